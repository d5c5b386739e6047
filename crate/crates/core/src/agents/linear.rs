//! Ridge-statistics baselines: OFUL, LinUCB and linear Thompson sampling.

use super::{argmax_lowest, AgentHyperparams};
use crate::arms::ArmSet;
use crate::error::{contract, Result};
use crate::numerics::{Cholesky, Mat, RngStream};

/// Running `X'X` and `X'R`, updated one row at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeStats {
    gram: Mat,
    xty: Vec<f64>,
    n: usize,
}

impl RidgeStats {
    pub fn new(dim: usize) -> Self {
        Self {
            gram: Mat::zeros(dim, dim),
            xty: vec![0.0; dim],
            n: 0,
        }
    }

    /// Rank-one update with one observation.
    pub fn add(&mut self, x: &[f64], reward: f64) {
        crate::numerics::mat::add_outer(&mut self.gram, 1.0, x);
        for (b, xi) in self.xty.iter_mut().zip(x) {
            *b += reward * xi;
        }
        self.n += 1;
    }

    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }

    /// Factor of `V = X'X + λI` and the ridge estimate `V⁻¹X'R`.
    pub fn posterior(&self, lambda: f64) -> Result<(Cholesky, Vec<f64>)> {
        if self.n == 0 {
            return Err(contract("ridge statistics are empty"));
        }
        let mut v = self.gram.clone();
        for i in 0..self.dim() {
            v.set(i, i, v.get(i, i) + lambda);
        }
        let chol = Cholesky::new(&v)?;
        let theta = chol.solve(&self.xty);
        Ok((chol, theta))
    }
}

fn ucb_select(
    stats: &RidgeStats,
    arms: &ArmSet,
    lambda: f64,
    width: impl FnOnce(&Cholesky) -> Result<f64>,
) -> Result<usize> {
    if arms.agent_matrix().cols() != stats.dim() {
        return Err(contract("arm features do not match the statistics dimension"));
    }
    let (chol, theta) = stats.posterior(lambda)?;
    let w = width(&chol)?;
    let scores: Vec<f64> = arms
        .agent_matrix()
        .row_iter()
        .map(|x| {
            let mean: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
            if w == 0.0 {
                mean
            } else {
                mean + w * chol.inv_quad_form(x).sqrt()
            }
        })
        .collect();
    Ok(argmax_lowest(&scores))
}

/// Confidence-ellipsoid radius `√β_t`:
///
/// ```text
/// R · sqrt(2 ln(det(V)^½ det(λI)^-½ / δ)) + λ^½ S
/// ```
///
/// with `R = oful_noise_scale`, `S = oful_theta_bound`, `δ = oful_confidence`,
/// unless `oful_radius` overrides it.
pub fn oful_radius(stats: &RidgeStats, hp: &AgentHyperparams) -> Result<f64> {
    if let Some(r) = hp.oful_radius {
        return Ok(r);
    }
    if !(hp.lambda > 0.0) {
        return Err(contract("the computed OFUL radius needs lambda > 0"));
    }
    let (chol, _) = stats.posterior(hp.lambda)?;
    Ok(radius_from(&chol, hp))
}

fn radius_from(chol: &Cholesky, hp: &AgentHyperparams) -> f64 {
    let d = chol.dim() as f64;
    let log_ratio = 0.5 * chol.log_det() - 0.5 * d * hp.lambda.ln();
    let inner = 2.0 * (log_ratio - hp.oful_confidence.ln());
    hp.oful_noise_scale * inner.max(0.0).sqrt() + hp.lambda.sqrt() * hp.oful_theta_bound
}

/// OFUL: optimism over the confidence ellipsoid around the ridge estimate.
pub fn oful_select(stats: &RidgeStats, arms: &ArmSet, hp: &AgentHyperparams) -> Result<usize> {
    if let Some(r) = hp.oful_radius {
        return ucb_select(stats, arms, hp.lambda, |_| Ok(r));
    }
    if !(hp.lambda > 0.0) {
        return Err(contract("the computed OFUL radius needs lambda > 0"));
    }
    ucb_select(stats, arms, hp.lambda, |chol| Ok(radius_from(chol, hp)))
}

/// LinUCB: ridge estimate plus `α · ‖x‖_{V⁻¹}`.
pub fn linucb_select(stats: &RidgeStats, arms: &ArmSet, hp: &AgentHyperparams) -> Result<usize> {
    ucb_select(stats, arms, hp.lambda, |_| Ok(hp.linucb_alpha))
}

/// Thompson sampling: one draw `θ̃ ~ N(θ̂, v² V⁻¹)`, then greedy on `θ̃`.
///
/// `V⁻¹ = L⁻ᵀ L⁻¹`, so `θ̂ + v L⁻ᵀ z` with standard normal `z` has the right
/// covariance. Always consumes `dim` normal draws.
pub fn thompson_select(
    stats: &RidgeStats,
    arms: &ArmSet,
    hp: &AgentHyperparams,
    rng: &mut RngStream,
) -> Result<usize> {
    if arms.agent_matrix().cols() != stats.dim() {
        return Err(contract("arm features do not match the statistics dimension"));
    }
    let (chol, theta) = stats.posterior(hp.lambda)?;
    let mut z: Vec<f64> = (0..stats.dim()).map(|_| rng.standard_normal()).collect();
    chol.backward(&mut z);
    let sample: Vec<f64> = theta
        .iter()
        .zip(&z)
        .map(|(t, zi)| t + hp.ts_v * zi)
        .collect();
    Ok(argmax_lowest(&arms.agent_matrix().mul_vec(&sample)))
}
