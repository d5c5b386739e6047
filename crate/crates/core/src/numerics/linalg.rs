use super::mat::{dot, Mat};
use crate::error::{contract, Result};

/// Pivots below this fraction of the largest pivot are treated as zero.
const RANK_TOL: f64 = 1e-10;

/// Householder reflector `I - tau v v'` with `v[0] = 1` that maps `x` onto
/// `beta e1`. Returns `(tau, beta)` and overwrites `x[1..]` with `v[1..]`.
fn householder(x: &mut [f64]) -> (f64, f64) {
    let alpha = x[0];
    let tail: f64 = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if tail == 0.0 {
        return (0.0, alpha);
    }
    let beta = -alpha.signum() * alpha.hypot(tail);
    let beta = if beta == 0.0 { tail } else { beta };
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for v in &mut x[1..] {
        *v *= scale;
    }
    x[0] = beta;
    (tau, beta)
}

/// Rank-revealing least-squares factorization of a fixed design matrix.
///
/// Column-pivoted Householder QR followed, when the matrix is rank
/// deficient, by a right-side orthogonal reduction of the trailing block
/// (a complete orthogonal decomposition). [`LeastSquares::solve`] then
/// returns the minimum-norm minimizer of `‖y − Xβ‖²` for any right-hand side.
/// Factor once, solve many times.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    m: usize,
    n: usize,
    // column-major; R on and above the diagonal, reflectors below it
    qr: Vec<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
    // right-side reflectors, one per leading row, used only when rank < n
    cod_tau: Vec<f64>,
    cod_v: Vec<f64>,
}

impl LeastSquares {
    pub fn new(x: &Mat) -> Self {
        let (m, n) = (x.rows(), x.cols());
        let mut qr = vec![0.0; m * n];
        for r in 0..m {
            for c in 0..n {
                qr[c * m + r] = x.get(r, c);
            }
        }
        Self::factor(m, n, qr)
    }

    fn factor(m: usize, n: usize, mut qr: Vec<f64>) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        let col_norm2 = |qr: &[f64], j: usize, from: usize| -> f64 {
            qr[j * m + from..(j + 1) * m].iter().map(|v| v * v).sum()
        };
        let mut norms: Vec<f64> = (0..n).map(|j| col_norm2(&qr, j, 0)).collect();
        let mut norms_ref = norms.clone();
        let mut tau = Vec::with_capacity(n.min(m));
        let mut rank = 0;
        let mut threshold = 0.0;

        for k in 0..n.min(m) {
            let (p, &best) = norms[k..]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, v)| (i + k, v))
                .expect("nonempty range");
            if k == 0 {
                threshold = RANK_TOL * best.sqrt();
            }
            if best.sqrt() <= threshold || best == 0.0 {
                break;
            }
            if p != k {
                for r in 0..m {
                    qr.swap(k * m + r, p * m + r);
                }
                perm.swap(k, p);
                norms.swap(k, p);
                norms_ref.swap(k, p);
            }
            let (t, _) = householder(&mut qr[k * m + k..(k + 1) * m]);
            tau.push(t);
            rank += 1;

            let (head, rest) = qr.split_at_mut((k + 1) * m);
            let v = &head[k * m + k..];
            for j in (k + 1)..n {
                let col = &mut rest[(j - k - 1) * m + k..(j - k) * m];
                let w = col[0] + dot(&v[1..], &col[1..]);
                if w != 0.0 && t != 0.0 {
                    let s = t * w;
                    col[0] -= s;
                    for (c, vi) in col[1..].iter_mut().zip(&v[1..]) {
                        *c -= s * vi;
                    }
                }
                let rkj = col[0];
                let updated = norms[j] - rkj * rkj;
                norms[j] = if updated <= 1e-6 * norms_ref[j] {
                    let fresh = col[1..].iter().map(|v| v * v).sum();
                    norms_ref[j] = fresh;
                    fresh
                } else {
                    updated
                };
            }
        }

        let mut out = Self {
            m,
            n,
            qr,
            tau,
            perm,
            rank,
            cod_tau: Vec::new(),
            cod_v: Vec::new(),
        };
        if rank < n {
            out.complete_orthogonal();
        }
        out
    }

    #[inline]
    fn r_at(&self, row: usize, col: usize) -> f64 {
        self.qr[col * self.m + row]
    }

    #[inline]
    fn r_set(&mut self, row: usize, col: usize, v: f64) {
        self.qr[col * self.m + row] = v;
    }

    // Zeroes R[0..r, r..n] with reflectors applied from the right, bottom row first.
    fn complete_orthogonal(&mut self) {
        let (r, n) = (self.rank, self.n);
        let width = n - r;
        self.cod_tau = vec![0.0; r];
        self.cod_v = vec![0.0; r * width];
        let mut x = vec![0.0; width + 1];
        for i in (0..r).rev() {
            x[0] = self.r_at(i, i);
            for l in 0..width {
                x[l + 1] = self.r_at(i, r + l);
            }
            let (t, beta) = householder(&mut x);
            self.cod_tau[i] = t;
            self.cod_v[i * width..(i + 1) * width].copy_from_slice(&x[1..]);
            self.r_set(i, i, beta);
            for l in 0..width {
                self.r_set(i, r + l, 0.0);
            }
            if t == 0.0 {
                continue;
            }
            for k in 0..i {
                let mut s = self.r_at(k, i);
                for l in 0..width {
                    s += x[l + 1] * self.r_at(k, r + l);
                }
                let s = t * s;
                let v = self.r_at(k, i) - s;
                self.r_set(k, i, v);
                for l in 0..width {
                    let v = self.r_at(k, r + l) - s * x[l + 1];
                    self.r_set(k, r + l, v);
                }
            }
        }
    }

    /// Numerical rank of the factored matrix.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    /// Minimum-norm least-squares solution for right-hand side `y`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m {
            return Err(contract(format!(
                "right-hand side has {} entries, matrix has {} rows",
                y.len(),
                self.m
            )));
        }
        let (m, n, r) = (self.m, self.n, self.rank);
        let mut c = y.to_vec();
        for k in 0..r {
            let t = self.tau[k];
            if t == 0.0 {
                continue;
            }
            let v = &self.qr[k * m + k + 1..(k + 1) * m];
            let w = t * (c[k] + dot(v, &c[k + 1..]));
            c[k] -= w;
            for (ci, vi) in c[k + 1..].iter_mut().zip(v) {
                *ci -= w * vi;
            }
        }
        let mut z = vec![0.0; n];
        for i in (0..r).rev() {
            let mut s = c[i];
            for j in (i + 1)..r {
                s -= self.r_at(i, j) * z[j];
            }
            z[i] = s / self.r_at(i, i);
        }
        if r < n {
            let width = n - r;
            for i in 0..r {
                let t = self.cod_tau[i];
                if t == 0.0 {
                    continue;
                }
                let v = &self.cod_v[i * width..(i + 1) * width];
                let s = t * (z[i] + dot(v, &z[r..]));
                z[i] -= s;
                for (zi, vi) in z[r..].iter_mut().zip(v) {
                    *zi -= s * vi;
                }
            }
        }
        let mut beta = vec![0.0; n];
        for (j, &p) in self.perm.iter().enumerate() {
            beta[p] = z[j];
        }
        Ok(beta)
    }
}

/// Minimum-norm least-squares solution of `X β ≈ y`.
pub fn least_squares(x: &Mat, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != x.rows() {
        return Err(contract(format!(
            "least_squares: y has {} entries, X has {} rows",
            y.len(),
            x.rows()
        )));
    }
    LeastSquares::new(x).solve(y)
}

/// Ridge estimate `(X'X + λI)⁻¹ X'y`.
///
/// Solved as ordinary least squares on `X` stacked over `√λ I`, which is the
/// same minimizer without squaring the condition number. With `λ = 0` this
/// is exactly [`least_squares`].
pub fn ridge_solve(x: &Mat, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(contract(format!("ridge_solve: lambda must be >= 0, got {lambda}")));
    }
    if y.len() != x.rows() {
        return Err(contract(format!(
            "ridge_solve: y has {} entries, X has {} rows",
            y.len(),
            x.rows()
        )));
    }
    if lambda == 0.0 {
        return least_squares(x, y);
    }
    let (m, n) = (x.rows(), x.cols());
    let rows = m + n;
    let mut qr = vec![0.0; rows * n];
    for c in 0..n {
        for r in 0..m {
            qr[c * rows + r] = x.get(r, c);
        }
        qr[c * rows + m + c] = lambda.sqrt();
    }
    let mut rhs = y.to_vec();
    rhs.resize(rows, 0.0);
    LeastSquares::factor(rows, n, qr).solve(&rhs)
}

/// Minimum-norm solution of consistent normal equations `G β = g`, where
/// `G = X'X` is symmetric positive semidefinite and `g = X'y`.
///
/// Uses a diagonally pivoted Cholesky factorization `P'GP = L L'` with `L`
/// of numerical rank `r`, then returns `P L (L'L)⁻¹ w` where `L₁₁ w = (P'g)₁`.
/// This equals the minimum-norm least-squares solution of `X β ≈ y` without
/// touching `X` again; prefer [`LeastSquares`] when `X` is ill-conditioned.
pub fn solve_normal_equations(gram: &Mat, rhs: &[f64]) -> Result<Vec<f64>> {
    NormalEquations::new(gram)?.solve(rhs)
}

/// Factored normal equations for repeated right-hand sides.
/// See [`solve_normal_equations`].
#[derive(Debug, Clone)]
pub struct NormalEquations {
    n: usize,
    rank: usize,
    perm: Vec<usize>,
    // row-major lower factor in pivoted order
    lf: Vec<f64>,
    // Cholesky of L'L when rank-deficient
    ltl: Option<Cholesky>,
}

impl NormalEquations {
    pub fn new(gram: &Mat) -> Result<Self> {
        let n = gram.rows();
        if gram.cols() != n {
            return Err(contract("normal equations: Gram matrix is not square"));
        }
        let a = gram.data();
        let mut perm: Vec<usize> = (0..n).collect();
        // remaining diagonal of the trailing block, by pivoted position
        let mut diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        let max_diag = diag.iter().copied().fold(0.0, f64::max);
        let tol = RANK_TOL * max_diag;
        // row-major lower factor in pivoted order
        let mut lf = vec![0.0; n * n];
        let mut rank = 0;
        for k in 0..n {
            let mut p = k;
            for i in (k + 1)..n {
                if diag[i] > diag[p] {
                    p = i;
                }
            }
            if !(diag[p] > tol) {
                break;
            }
            if p != k {
                perm.swap(k, p);
                diag.swap(k, p);
                for j in 0..k {
                    lf.swap(k * n + j, p * n + j);
                }
            }
            let lkk = diag[k].sqrt();
            lf[k * n + k] = lkk;
            let pk = perm[k];
            let (head, tail) = lf.split_at_mut((k + 1) * n);
            let lk = &head[k * n..k * n + k];
            for (off, row) in tail.chunks_exact_mut(n).enumerate() {
                let i = k + 1 + off;
                let v = (a[perm[i] * n + pk] - dot(&row[..k], lk)) / lkk;
                row[k] = v;
                diag[i] -= v * v;
            }
            rank += 1;
        }
        let r = rank;
        let ltl = if r > 0 && r < n {
            let mut m = Mat::zeros(r, r);
            for i in 0..r {
                for j in 0..=i {
                    let s: f64 = (i..n).map(|k| lf[k * n + i] * lf[k * n + j]).sum();
                    m.set(i, j, s);
                    m.set(j, i, s);
                }
            }
            Some(Cholesky::new(&m)?)
        } else {
            None
        };
        Ok(Self {
            n,
            rank,
            perm,
            lf,
            ltl,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let (n, r) = (self.n, self.rank);
        if rhs.len() != n {
            return Err(contract("normal equations: dimension mismatch"));
        }
        let l = |i: usize, j: usize| self.lf[i * n + j];
        // L11 w = (P'g)[..r]
        let mut w: Vec<f64> = self.perm[..r].iter().map(|&p| rhs[p]).collect();
        for i in 0..r {
            let s = w[i] - dot(&self.lf[i * n..i * n + i], &w[..i]);
            w[i] = s / l(i, i);
        }
        let mut y = vec![0.0; n];
        if r == n {
            // L' y = w
            for i in (0..n).rev() {
                let mut s = w[i];
                for k in (i + 1)..n {
                    s -= l(k, i) * y[k];
                }
                y[i] = s / l(i, i);
            }
        } else if let Some(ltl) = &self.ltl {
            // y = L (L'L)⁻¹ w
            let z = ltl.solve(&w);
            for (k, yk) in y.iter_mut().enumerate() {
                *yk = dot(&self.lf[k * n..k * n + r.min(k + 1)], &z[..r.min(k + 1)]);
            }
        }
        let mut beta = vec![0.0; n];
        for (j, &p) in self.perm.iter().enumerate() {
            beta[p] = y[j];
        }
        Ok(beta)
    }
}

/// Cholesky factor `A = L L'` of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    // row-major lower triangle
    l: Vec<f64>,
}

impl Cholesky {
    /// Fails when `a` is not square or not numerically positive definite.
    pub fn new(a: &Mat) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(contract("Cholesky: matrix is not square"));
        }
        let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        let floor = 1e-13 * max_diag.max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s = a.get(i, j) - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                if i == j {
                    if !(s > floor) {
                        return Err(contract(format!(
                            "Cholesky: matrix is not positive definite (pivot {i} = {s:e})"
                        )));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L z = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let s = b[i] - dot(&self.l[i * n..i * n + i], &b[..i]);
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `L' x = z` in place.
    pub fn backward(&self, z: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    /// `x' A⁻¹ x`
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        let mut z = x.to_vec();
        self.forward(&mut z);
        z.iter().map(|v| v * v).sum()
    }

    /// `ln det A`
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.l[i * self.n + i].ln()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_design_returns_targets() {
        let beta = least_squares(&Mat::identity(2), &[3.0, 5.0]).unwrap();
        assert_eq!(beta, vec![3.0, 5.0]);
    }

    #[test]
    fn dimension_mismatch_is_a_contract_error() {
        assert!(least_squares(&Mat::identity(2), &[1.0]).is_err());
        assert!(ridge_solve(&Mat::identity(2), &[1.0, 2.0], -1.0).is_err());
    }

    #[test]
    fn one_by_one_ridge() {
        let x = Mat::new(1, 1, vec![1.0]).unwrap();
        let beta = ridge_solve(&x, &[2.0], 1.0).unwrap();
        assert!((beta[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_gives_zero_solution() {
        let ls = LeastSquares::new(&Mat::zeros(3, 2));
        assert_eq!(ls.rank(), 0);
        assert_eq!(ls.solve(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn wide_system_gets_minimum_norm() {
        // x1 + x2 = 2 has min-norm solution (1, 1)
        let x = Mat::new(1, 2, vec![1.0, 1.0]).unwrap();
        let beta = least_squares(&x, &[2.0]).unwrap();
        assert!((beta[0] - 1.0).abs() < 1e-12 && (beta[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_equations_match_qr_on_rank_deficient_rows() {
        // columns 1 and 2 identical; row 3 repeats row 0
        let x = Mat::from_rows(
            3,
            &[[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [1.0, 1.0, 1.0], [1.0, -1.0, -1.0]],
        )
        .unwrap();
        let y = [2.0, 0.5, 1.0, -0.3];
        let qr = least_squares(&x, &y).unwrap();
        let ne = solve_normal_equations(&x.gram(), &x.tr_mul_vec(&y)).unwrap();
        for (a, b) in qr.iter().zip(&ne) {
            assert!((a - b).abs() < 1e-10, "{qr:?} vs {ne:?}");
        }
        assert!((qr[1] - qr[2]).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_rows(2, &[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(Cholesky::new(&a).is_err());
        let a = Mat::from_rows(2, &[[4.0, 2.0], [2.0, 3.0]]).unwrap();
        let c = Cholesky::new(&a).unwrap();
        let x = c.solve(&[2.0, 1.0]);
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-12);
        assert!((c.log_det() - 8f64.ln()).abs() < 1e-12);
        assert!((c.inv_quad_form(&[2.0, 1.0]) - (2.0 * x[0] + x[1])).abs() < 1e-12);
    }
}
