//! Result files.
//!
//! Every number goes through [`fmt_g6`], so a file depends only on the
//! values and not on float printing details.

use std::fmt::Write as _;
use std::path::Path;

use bootbandit::arms::{term_label, terms};
use bootbandit::design::InitialDesign;
use bootbandit::environment::ResponseSurface;
use bootbandit::simulation::{CurveRow, RunFailure, SummaryRow};

use crate::error::{io_err, Result};

pub const CURVES_HEADER: &str = "agent,noise_sigma,trial,mean_pseudo_performance,stderr,n_surfaces";
pub const SUMMARY_HEADER: &str = "agent,noise_sigma,horizon,mean_cumulative_regret,stderr,n_surfaces,seed";
pub const FAILURES_HEADER: &str = "surface,agent,noise_sigma,message";
pub const SURFACES_HEADER: &str = "surface,index,term,coefficient,active";

/// C `%g` with 6 significant digits: trailing zeros dropped, exponent form
/// below `1e-4` and from `1e6` up. Negative zero prints as `0`.
pub fn fmt_g6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs());
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Quotes a field when it holds a comma, quote or line break.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn curves_csv(rows: &[CurveRow]) -> String {
    let mut s = format!("{CURVES_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.agent,
            fmt_g6(r.noise_sigma),
            r.trial,
            fmt_g6(r.mean_pseudo_performance),
            fmt_g6(r.stderr),
            r.n_surfaces
        );
    }
    s
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.agent,
            fmt_g6(r.noise_sigma),
            r.horizon,
            fmt_g6(r.mean_cumulative_regret),
            fmt_g6(r.stderr),
            r.n_surfaces,
            r.seed
        );
    }
    s
}

pub fn failures_csv(rows: &[RunFailure]) -> String {
    let mut s = format!("{FAILURES_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.surface_id,
            r.agent,
            fmt_g6(r.noise_sigma),
            csv_field(&r.message)
        );
    }
    s
}

/// One run per line, `±1` levels, no header.
pub fn design_csv(d: &InitialDesign) -> String {
    let mut s = String::new();
    for run in d.runs() {
        let line: Vec<String> = run.levels().iter().map(|l| l.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// One line per coefficient of each surface.
pub fn surfaces_csv(surfaces: &[(u64, ResponseSurface)]) -> String {
    let mut s = format!("{SURFACES_HEADER}\n");
    for (id, surface) in surfaces {
        let labels = terms(surface.k(), 3);
        for (i, (term, (c, a))) in labels
            .iter()
            .zip(surface.theta().iter().zip(surface.active_mask()))
            .enumerate()
        {
            let _ = writeln!(s, "{id},{i},{},{},{}", term_label(term), fmt_g6(*c), u8::from(*a));
        }
    }
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a, b"), "\"a, b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
    }
}
