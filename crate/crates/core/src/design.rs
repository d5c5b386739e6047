//! Orthogonal-array initial designs.
//!
//! Every agent starts from the same balanced two-level design. The design
//! has to support the full agent model (intercept, mains, two-way
//! interactions), so its model matrix must have full column rank. Regular
//! fractions alias two-way interactions with each other, so candidates are
//! drawn from non-regular arrays: `K` random columns of a normalized Hadamard
//! matrix (Paley construction where available), with random column signs and
//! row order, accepting the first candidate whose model matrix is full rank.

use std::fmt;

use crate::arms::{agent_dim, Arm, MAX_TREATMENTS};
use crate::error::{contract, Error, Result};
use crate::numerics::{LeastSquares, Mat, RngStream};

/// Candidates tried before the search gives up.
pub const SEARCH_BUDGET: usize = 10_000;

/// Runs of the initial experiment and their agent-feature model matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDesign {
    k: usize,
    runs: Vec<Arm>,
    model_matrix: Mat,
}

impl InitialDesign {
    /// Wraps an explicit list of runs. No balance or rank checks are made here;
    /// use [`validate_design`] for that.
    pub fn from_runs(runs: Vec<Arm>) -> Result<Self> {
        let k = runs
            .first()
            .map(Arm::k)
            .ok_or_else(|| contract("design needs at least one run"))?;
        if let Some(bad) = runs.iter().find(|r| r.k() != k) {
            return Err(contract(format!(
                "all runs must have {k} treatments, found one with {}",
                bad.k()
            )));
        }
        let rows: Vec<Vec<f64>> = runs.iter().map(Arm::agent_features).collect();
        let model_matrix = Mat::from_rows(agent_dim(k), &rows)?;
        Ok(Self {
            k,
            runs,
            model_matrix,
        })
    }

    /// The `2^K` full factorial in lexicographic order.
    pub fn full_factorial(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_TREATMENTS {
            return Err(contract(format!("bad number of treatments {k}")));
        }
        Self::from_runs((0..1usize << k).map(|i| Arm::from_index(k, i)).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn runs(&self) -> &[Arm] {
        &self.runs
    }

    pub fn n_runs(&self) -> usize {
        self.runs.len()
    }

    pub fn model_matrix(&self) -> &Mat {
        &self.model_matrix
    }
}

// ── Hadamard matrices ───────────────────────────────────────────────────

fn is_prime(q: usize) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| q % d != 0)
}

/// Paley type I construction for `q` prime with `q ≡ 3 (mod 4)`; order `q + 1`.
fn paley(q: usize) -> Vec<Vec<i8>> {
    let mut residue = vec![false; q];
    for x in 1..q {
        residue[x * x % q] = true;
    }
    let chi = |d: usize| -> i8 {
        if d == 0 {
            0
        } else if residue[d] {
            1
        } else {
            -1
        }
    };
    let n = q + 1;
    let mut h = vec![vec![0i8; n]; n];
    for j in 1..n {
        h[0][j] = 1;
        h[j][0] = -1;
    }
    for i in 0..q {
        for j in 0..q {
            h[i + 1][j + 1] = chi((j + q - i) % q);
        }
    }
    for (i, row) in h.iter_mut().enumerate() {
        row[i] += 1;
    }
    h
}

/// A Hadamard matrix of order `n`, or `None` when no supported construction
/// applies (Paley I, doubling, and the trivial orders 1 and 2).
pub fn hadamard(n: usize) -> Option<Vec<Vec<i8>>> {
    match n {
        0 => None,
        1 => Some(vec![vec![1]]),
        2 => Some(vec![vec![1, 1], vec![1, -1]]),
        _ if n % 4 != 0 => None,
        _ if is_prime(n - 1) && (n - 1) % 4 == 3 => Some(paley(n - 1)),
        _ => {
            let half = hadamard(n / 2)?;
            let m = n / 2;
            let mut h = vec![vec![0i8; n]; n];
            for i in 0..m {
                for j in 0..m {
                    let v = half[i][j];
                    h[i][j] = v;
                    h[i][j + m] = v;
                    h[i + m][j] = v;
                    h[i + m][j + m] = -v;
                }
            }
            Some(h)
        }
    }
}

/// Scales rows so the first column is all `+1`; the remaining columns are
/// then balanced and pairwise orthogonal.
fn normalize(mut h: Vec<Vec<i8>>) -> Vec<Vec<i8>> {
    for row in &mut h {
        if row[0] < 0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
    h
}

// ── Search ──────────────────────────────────────────────────────────────

/// Draws a balanced strength-2 design with a full-rank agent model matrix.
pub fn generate_initial_design(
    k: usize,
    n_runs: usize,
    rng: &mut RngStream,
) -> Result<InitialDesign> {
    if k == 0 || k > MAX_TREATMENTS {
        return Err(contract(format!("number of treatments must be in 1..={MAX_TREATMENTS}, got {k}")));
    }
    let required = agent_dim(k);
    if n_runs < required {
        return Err(contract(format!(
            "{n_runs} runs cannot estimate {required} model columns"
        )));
    }
    if n_runs % 4 != 0 {
        return Err(contract(format!("run count must be a multiple of 4, got {n_runs}")));
    }
    if k > n_runs - 1 {
        return Err(contract(format!("{n_runs} runs support at most {} factors", n_runs - 1)));
    }
    let h = normalize(hadamard(n_runs).ok_or(Error::UnsupportedOrder(n_runs))?);

    let mut pool: Vec<usize> = (1..n_runs).collect();
    let mut best_rank = 0;
    for _ in 0..SEARCH_BUDGET {
        rng.shuffle(&mut pool);
        let cols = &pool[..k];
        let runs: Vec<Arm> = h
            .iter()
            .map(|row| Arm::new(cols.iter().map(|&c| row[c]).collect()))
            .collect::<Result<_>>()?;
        let design = InitialDesign::from_runs(runs)?;
        let rank = LeastSquares::new(design.model_matrix()).rank();
        best_rank = best_rank.max(rank);
        if rank < required {
            continue;
        }
        let signs: Vec<i8> = (0..k).map(|_| if rng.bernoulli(0.5) { 1 } else { -1 }).collect();
        let mut order: Vec<usize> = (0..n_runs).collect();
        rng.shuffle(&mut order);
        let runs = order
            .iter()
            .map(|&r| {
                let levels = design.runs()[r]
                    .levels()
                    .iter()
                    .zip(&signs)
                    .map(|(l, s)| l * s)
                    .collect();
                Arm::new(levels)
            })
            .collect::<Result<_>>()?;
        return InitialDesign::from_runs(runs);
    }
    Err(Error::DesignSearch {
        attempts: SEARCH_BUDGET,
        best_rank,
        required,
    })
}

// ── Validation ──────────────────────────────────────────────────────────

/// Balance, orthogonality and estimability summary of a design.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub k: usize,
    pub n_runs: usize,
    /// Column sum of every non-intercept model column (0 when balanced).
    pub balance_residuals: Vec<f64>,
    /// For each main-effect column, the largest |dot product| with another main column.
    pub main_gram_offdiag_max: Vec<f64>,
    pub rank: usize,
    pub required_rank: usize,
}

impl ValidationReport {
    pub fn balanced(&self) -> bool {
        self.balance_residuals.iter().all(|r| *r == 0.0)
    }

    pub fn mains_orthogonal(&self) -> bool {
        self.main_gram_offdiag_max.iter().all(|r| *r == 0.0)
    }

    pub fn full_rank(&self) -> bool {
        self.rank == self.required_rank
    }

    pub fn passes(&self) -> bool {
        self.balanced() && self.mains_orthogonal() && self.full_rank()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        writeln!(f, "design: {} runs, {} factors", self.n_runs, self.k)?;
        writeln!(
            f,
            "balance: max |column sum| = {} over {} columns ({})",
            max_abs(&self.balance_residuals),
            self.balance_residuals.len(),
            if self.balanced() { "ok" } else { "FAIL" }
        )?;
        writeln!(
            f,
            "main-effect orthogonality: max |off-diagonal| = {} ({})",
            max_abs(&self.main_gram_offdiag_max),
            if self.mains_orthogonal() { "ok" } else { "FAIL" }
        )?;
        writeln!(
            f,
            "model-matrix rank: {} of {} ({})",
            self.rank,
            self.required_rank,
            if self.full_rank() { "ok" } else { "FAIL: rank deficient" }
        )?;
        write!(f, "result: {}", if self.passes() { "pass" } else { "fail" })
    }
}

pub fn validate_design(d: &InitialDesign) -> ValidationReport {
    let x = d.model_matrix();
    let k = d.k();
    let balance_residuals = (1..x.cols())
        .map(|c| x.column(c).iter().sum::<f64>())
        .collect();
    let mains: Vec<Vec<f64>> = (1..=k).map(|c| x.column(c)).collect();
    let main_gram_offdiag_max = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| {
                    mains[i]
                        .iter()
                        .zip(&mains[j])
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        .abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    ValidationReport {
        k,
        n_runs: d.n_runs(),
        balance_residuals,
        main_gram_offdiag_max,
        rank: LeastSquares::new(x).rank(),
        required_rank: x.cols(),
    }
}
