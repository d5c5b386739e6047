//! Pairs-bootstrap (X-Random) and residual-bootstrap (X-Fixed) selection.

use super::{argmax_lowest, AgentHyperparams, History};
use crate::arms::{terms, ArmSet};
use crate::error::{contract, Result};
use crate::numerics::{
    least_squares, percentile_in_place, sample_indices_with_replacement, solve_normal_equations,
    walsh_hadamard, LeastSquares, Mat, NormalEquations, RngStream,
};

fn check_inputs(history: &History, arms: &ArmSet) -> Result<()> {
    if history.k() != arms.k() {
        return Err(contract(format!(
            "history has {} treatments, arm set has {}",
            history.k(),
            arms.k()
        )));
    }
    let d = history.x().cols();
    if history.len() < d {
        return Err(contract(format!(
            "bootstrap agents need at least {d} observations, history has {}",
            history.len()
        )));
    }
    Ok(())
}

/// Collects replicate predictions and returns the arm with the highest
/// `delta`-percentile score.
struct ScoreTable {
    arms: usize,
    replicates: usize,
    scores: Vec<f64>,
}

impl ScoreTable {
    fn new(arms: usize, replicates: usize) -> Self {
        Self {
            arms,
            replicates,
            scores: vec![0.0; arms * replicates],
        }
    }

    fn record(&mut self, b: usize, spectral: &Spectral, beta: &[f64], buf: &mut Vec<f64>) {
        spectral.predict(beta, buf);
        for (m, y) in buf.iter().enumerate() {
            self.scores[m * self.replicates + b] = *y;
        }
    }

    fn select(mut self, delta: f64) -> Result<usize> {
        let mut ucb = Vec::with_capacity(self.arms);
        for chunk in self.scores.chunks_exact_mut(self.replicates) {
            ucb.push(percentile_in_place(chunk, delta)?);
        }
        Ok(argmax_lowest(&ucb))
    }
}

/// Linear models over the full-factorial arm set in the Walsh basis.
///
/// Every agent column is a character `χ_S(a) = Π_{j∈S} x_j(a)`, so products of
/// columns are characters again and sums over arms are Walsh-Hadamard
/// coefficients. With `F_w` the transform of the per-arm weights,
/// `Σ_a w_a χ_S(a) χ_T(a) = ±F_w[S xor T]`.
struct Spectral {
    masks: Vec<usize>,
    // (-1)^|S|: levels are -1/+1 while the transform kernel uses bits 0/1
    signs: Vec<f64>,
    n_arms: usize,
}

impl Spectral {
    fn new(arms: &ArmSet) -> Self {
        let k = arms.k();
        let (masks, signs) = terms(k, 2)
            .iter()
            .map(|t| {
                let mask = t.iter().fold(0usize, |m, &j| m | 1 << (k - 1 - j));
                (mask, if t.len() % 2 == 0 { 1.0 } else { -1.0 })
            })
            .unzip();
        Self {
            masks,
            signs,
            n_arms: arms.len(),
        }
    }

    fn parity(mask: usize) -> f64 {
        if mask.count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Normal equations `(X'WX, X's)` from per-arm weights and reward sums;
    /// both inputs are overwritten with their transforms.
    fn normal_equations(&self, weight: &mut [f64], reward_sum: &mut [f64]) -> (Mat, Vec<f64>) {
        walsh_hadamard(weight);
        walsh_hadamard(reward_sum);
        let d = self.masks.len();
        let mut gram = Mat::zeros(d, d);
        for (i, &si) in self.masks.iter().enumerate() {
            for (j, &sj) in self.masks.iter().enumerate().take(i + 1) {
                let m = si ^ sj;
                let g = Self::parity(m) * weight[m];
                gram.set(i, j, g);
                gram.set(j, i, g);
            }
        }
        (gram, self.moments_transformed(reward_sum))
    }

    /// `X's` from per-arm sums; `sums` is overwritten with its transform.
    fn moments(&self, sums: &mut [f64]) -> Vec<f64> {
        walsh_hadamard(sums);
        self.moments_transformed(sums)
    }

    fn moments_transformed(&self, transformed: &[f64]) -> Vec<f64> {
        self.masks
            .iter()
            .zip(&self.signs)
            .map(|(&m, sg)| sg * transformed[m])
            .collect()
    }

    /// Predictions for every arm.
    fn predict(&self, beta: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.n_arms, 0.0);
        for ((&m, sg), b) in self.masks.iter().zip(&self.signs).zip(beta) {
            out[m] += sg * b;
        }
        walsh_hadamard(out);
    }
}

fn resample_fit(
    spectral: &Spectral,
    history: &History,
    indices: &[usize],
    weight: &mut Vec<f64>,
    reward_sum: &mut Vec<f64>,
) -> Result<Vec<f64>> {
    weight.clear();
    weight.resize(spectral.n_arms, 0.0);
    reward_sum.clear();
    reward_sum.resize(spectral.n_arms, 0.0);
    let arm_of = history.arm_indices();
    let rewards = history.rewards();
    for &i in indices {
        if i >= history.len() {
            return Err(contract(format!("resample index {i} out of range")));
        }
        weight[arm_of[i]] += 1.0;
        reward_sum[arm_of[i]] += rewards[i];
    }
    let (gram, rhs) = spectral.normal_equations(weight, reward_sum);
    solve_normal_equations(&gram, &rhs)
}

/// Least-squares fit to the history rows listed in `indices` (duplicates allowed).
///
/// Rows of the same arm are merged: the normal equations of the resample are
/// `Σ_a w_a x_a x_a' β = Σ_a s_a x_a` with `w_a` the number of drawn rows of
/// arm `a` and `s_a` the sum of their rewards. Rank-deficient resamples get
/// the minimum-norm solution.
pub fn xrandom_fit(history: &History, arms: &ArmSet, indices: &[usize]) -> Result<Vec<f64>> {
    if history.k() != arms.k() {
        return Err(contract("history and arm set disagree on the number of treatments"));
    }
    resample_fit(&Spectral::new(arms), history, indices, &mut Vec::new(), &mut Vec::new())
}

/// X-Random selection with caller-supplied resamples.
///
/// `resample(t)` must return `t` row indices for one bootstrap replicate; it
/// is called `replicates` times in order.
pub fn xrandom_select_with<F>(
    history: &History,
    arms: &ArmSet,
    replicates: usize,
    delta: f64,
    mut resample: F,
) -> Result<usize>
where
    F: FnMut(usize) -> Vec<usize>,
{
    check_inputs(history, arms)?;
    if replicates == 0 {
        return Err(contract("need at least one bootstrap replicate"));
    }
    let t = history.len();
    let spectral = Spectral::new(arms);
    let (mut weight, mut reward_sum, mut buf) = (Vec::new(), Vec::new(), Vec::new());
    let mut table = ScoreTable::new(arms.len(), replicates);
    for b in 0..replicates {
        let idx = resample(t);
        if idx.len() != t {
            return Err(contract(format!("resample has {} rows, expected {t}", idx.len())));
        }
        let beta = resample_fit(&spectral, history, &idx, &mut weight, &mut reward_sum)?;
        table.record(b, &spectral, &beta, &mut buf);
    }
    table.select(delta)
}

/// X-Random: bootstrap (arm, reward) pairs, refit, take the percentile UCB.
pub fn xrandom_select(
    history: &History,
    arms: &ArmSet,
    hp: &AgentHyperparams,
    rng: &mut RngStream,
) -> Result<usize> {
    xrandom_select_with(history, arms, hp.b, hp.delta, |t| {
        sample_indices_with_replacement(rng, t)
    })
}

/// Least-squares refit of `fitted + residual[indices]` on the fixed history design.
pub fn xfixed_fit(history: &History, indices: &[usize]) -> Result<Vec<f64>> {
    let x = history.x();
    let r = history.rewards();
    if indices.len() != r.len() {
        return Err(contract(format!("resample has {} rows, expected {}", indices.len(), r.len())));
    }
    let factor = LeastSquares::new(x);
    let beta_star = factor.solve(r)?;
    let fitted = x.mul_vec(&beta_star);
    let mut y = fitted.clone();
    for (yi, &j) in y.iter_mut().zip(indices) {
        let e = r.get(j).ok_or_else(|| contract(format!("resample index {j} out of range")))?;
        *yi += e - fitted[j];
    }
    factor.solve(&y)
}

/// X-Fixed selection with caller-supplied residual resamples.
pub fn xfixed_select_with<F>(
    history: &History,
    arms: &ArmSet,
    replicates: usize,
    delta: f64,
    mut resample: F,
) -> Result<usize>
where
    F: FnMut(usize) -> Vec<usize>,
{
    check_inputs(history, arms)?;
    if replicates == 0 {
        return Err(contract("need at least one bootstrap replicate"));
    }
    let x = history.x();
    let r = history.rewards();
    let t = r.len();
    let beta_star = LeastSquares::new(x).solve(r)?;
    let fitted = x.mul_vec(&beta_star);
    let resid: Vec<f64> = r.iter().zip(&fitted).map(|(a, b)| a - b).collect();

    // the design is fixed, so every replicate shares one factored Gram matrix
    let spectral = Spectral::new(arms);
    let arm_of = history.arm_indices();
    let mut counts = vec![0.0; arms.len()];
    for &a in arm_of {
        counts[a] += 1.0;
    }
    let (gram, _) = spectral.normal_equations(&mut counts, &mut vec![0.0; arms.len()]);
    let normal = NormalEquations::new(&gram)?;

    let mut table = ScoreTable::new(arms.len(), replicates);
    let (mut sums, mut buf) = (Vec::new(), Vec::new());
    for b in 0..replicates {
        let idx = resample(t);
        if idx.len() != t {
            return Err(contract(format!("resample has {} rows, expected {t}", idx.len())));
        }
        sums.clear();
        sums.resize(arms.len(), 0.0);
        for ((&a, fi), &j) in arm_of.iter().zip(&fitted).zip(&idx) {
            if j >= t {
                return Err(contract(format!("resample index {j} out of range")));
            }
            sums[a] += fi + resid[j];
        }
        let beta = normal.solve(&spectral.moments(&mut sums))?;
        table.record(b, &spectral, &beta, &mut buf);
    }
    table.select(delta)
}

/// X-Fixed: bootstrap residuals around the least-squares fit, refit on the
/// fixed design, take the percentile UCB.
pub fn xfixed_select(
    history: &History,
    arms: &ArmSet,
    hp: &AgentHyperparams,
    rng: &mut RngStream,
) -> Result<usize> {
    xfixed_select_with(history, arms, hp.b, hp.delta, |t| {
        sample_indices_with_replacement(rng, t)
    })
}

/// Pure exploitation: argmax of the least-squares prediction.
pub fn greedy_select(history: &History, arms: &ArmSet) -> Result<usize> {
    if history.k() != arms.k() || history.is_empty() {
        return Err(contract("greedy selection needs a nonempty matching history"));
    }
    let beta = least_squares(history.x(), history.rewards())?;
    Ok(argmax_lowest(&arms.agent_matrix().mul_vec(&beta)))
}
