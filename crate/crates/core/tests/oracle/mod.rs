//! Independent reference implementations shared by the agent tests and the
//! acceptance suite. Dense nalgebra algebra, no shortcuts.
#![allow(dead_code)]

use bootbandit::agents::History;
use bootbandit::arms::{enumerate_arms, ArmSet};
use bootbandit::design::InitialDesign;
use bootbandit::numerics::RngStream;
use nalgebra::{DMatrix, DVector};

pub fn features(arms: &ArmSet) -> DMatrix<f64> {
    let u = arms.agent_matrix();
    DMatrix::from_row_slice(u.rows(), u.cols(), u.data())
}

/// Minimum-norm least squares from the eigendecomposition of X'X.
pub fn pinv_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let eig = (x.transpose() * x).symmetric_eigen();
    let g = x.transpose() * y;
    let top = eig.eigenvalues.max();
    let mut beta = DVector::zeros(x.ncols());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 1e-10 * top {
            let v = eig.eigenvectors.column(i);
            beta += v * (v.dot(&g) / l);
        }
    }
    beta
}

pub fn nearest_rank(mut v: Vec<f64>, delta: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let k = (1..=n).find(|&k| 100.0 * k as f64 >= delta * n as f64 - 1e-9).unwrap_or(n);
    v[k - 1]
}

/// Lowest index among values within `tol` of the maximum.
pub fn argmax_tol(v: &[f64], tol: f64) -> usize {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter().position(|&x| x >= m - tol).unwrap()
}

pub fn history_matrix(h: &History) -> (DMatrix<f64>, DVector<f64>) {
    let x = h.x();
    (
        DMatrix::from_row_slice(x.rows(), x.cols(), x.data()),
        DVector::from_column_slice(h.rewards()),
    )
}

/// Pairs bootstrap exactly as written: resample rows, refit, percentile, argmax.
pub fn replay_pairs(h: &History, arms: &ArmSet, resamples: &[Vec<usize>], delta: f64) -> usize {
    let (x, r) = history_matrix(h);
    let u = features(arms);
    let mut y = vec![Vec::new(); arms.len()];
    for idx in resamples {
        let xb = x.select_rows(idx);
        let rb = DVector::from_iterator(idx.len(), idx.iter().map(|&i| r[i]));
        let pred = &u * pinv_fit(&xb, &rb);
        for (m, ym) in y.iter_mut().enumerate() {
            ym.push(pred[m]);
        }
    }
    let ucb: Vec<f64> = y.into_iter().map(|v| nearest_rank(v, delta)).collect();
    argmax_tol(&ucb, 1e-9)
}

/// Residual bootstrap exactly as written.
pub fn replay_residual(h: &History, arms: &ArmSet, resamples: &[Vec<usize>], delta: f64) -> usize {
    let (x, r) = history_matrix(h);
    let u = features(arms);
    let beta = pinv_fit(&x, &r);
    let fitted = &x * &beta;
    let e = &r - &fitted;
    let mut y = vec![Vec::new(); arms.len()];
    for idx in resamples {
        let rb = DVector::from_iterator(idx.len(), idx.iter().enumerate().map(|(i, &j)| fitted[i] + e[j]));
        let pred = &u * pinv_fit(&x, &rb);
        for (m, ym) in y.iter_mut().enumerate() {
            ym.push(pred[m]);
        }
    }
    let ucb: Vec<f64> = y.into_iter().map(|v| nearest_rank(v, delta)).collect();
    argmax_tol(&ucb, 1e-9)
}

/// Full-factorial K = 3 start with rewards from a fixed linear surface plus noise.
pub fn start_history(rng: &mut RngStream, noise: f64) -> (ArmSet, History, Vec<f64>) {
    let arms = enumerate_arms(3).unwrap();
    let theta: Vec<f64> = (0..7).map(|_| 2.0 * rng.standard_normal()).collect();
    let mut h = History::new(3);
    for arm in InitialDesign::full_factorial(3).unwrap().runs() {
        let mean: f64 = arm.agent_features().iter().zip(&theta).map(|(a, b)| a * b).sum();
        h.push(arm, mean + noise * rng.standard_normal()).unwrap();
    }
    (arms, h, theta)
}

pub fn reward(arms: &ArmSet, theta: &[f64], m: usize, noise: f64, rng: &mut RngStream) -> f64 {
    let mean: f64 = arms.agent_matrix().row(m).iter().zip(theta).map(|(a, b)| a * b).sum();
    mean + noise * rng.standard_normal()
}
