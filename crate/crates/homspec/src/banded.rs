//! Symmetric banded matrices, banded Cholesky factorization, and a
//! shift-invert Lanczos eigensolver with full reorthogonalization.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Symmetric matrix stored by its lower band: `band[k][i] = A[i+k][i]`
/// for subdiagonal offsets `k = 0..=bandwidth`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    pub n: usize,
    pub bandwidth: usize,
    band: Vec<Vec<f64>>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> BandedMatrix {
        let band = (0..=bandwidth).map(|k| vec![0.0; n - k.min(n)]).collect();
        BandedMatrix { n, bandwidth, band }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k > self.bandwidth {
            0.0
        } else {
            self.band[k][lo]
        }
    }

    /// Add `v` to the symmetric pair (i, j) and (j, i); stores once.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        assert!(k <= self.bandwidth, "entry ({i},{j}) outside the band");
        self.band[k][lo] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, (yv, &d0)) in y.iter_mut().zip(&self.band[0]).enumerate() {
            *yv += d0 * x[i];
        }
        for k in 1..=self.bandwidth {
            let diag = &self.band[k];
            for (i, &v) in diag.iter().enumerate() {
                y[i + k] += v * x[i];
                y[i] += v * x[i + k];
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i.saturating_sub(self.bandwidth)..=(i + self.bandwidth).min(self.n - 1) {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    /// A - sigma I.
    pub fn shifted(&self, sigma: f64) -> BandedMatrix {
        let mut m = self.clone();
        for v in m.band[0].iter_mut() {
            *v -= sigma;
        }
        m
    }

    /// Cholesky factorization A = L L^T within the band.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let n = self.n;
        let bw = self.bandwidth;
        let mut l: Vec<Vec<f64>> = self.band.clone();
        for j in 0..n {
            let mut d = l[0][j];
            for k in 1..=bw.min(j) {
                d -= l[k][j - k] * l[k][j - k];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::FactorizationFailure(j));
            }
            let dj = d.sqrt();
            l[0][j] = dj;
            for i in (j + 1)..=(j + bw).min(n - 1) {
                let mut s = l[i - j][j];
                let start = i.saturating_sub(bw).max(j.saturating_sub(bw));
                for m in start..j {
                    if i - m <= bw && j - m <= bw {
                        s -= l[i - m][m] * l[j - m][m];
                    }
                }
                l[i - j][j] = s / dj;
            }
        }
        Ok(BandedCholesky { n, bandwidth: bw, band: l })
    }
}

/// Lower-triangular banded Cholesky factor, same storage layout.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    pub n: usize,
    pub bandwidth: usize,
    band: Vec<Vec<f64>>,
}

impl BandedCholesky {
    /// Solve L L^T x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let bw = self.bandwidth;
        for j in 0..n {
            b[j] /= self.band[0][j];
            let bj = b[j];
            for k in 1..=bw.min(n - 1 - j) {
                b[j + k] -= self.band[k][j] * bj;
            }
        }
        for j in (0..n).rev() {
            let mut s = b[j];
            for k in 1..=bw.min(n - 1 - j) {
                s -= self.band[k][j] * b[j + k];
            }
            b[j] = s / self.band[0][j];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending eigenvalues of A closest above the shift.
    pub values: Vec<f64>,
    /// Matching unit eigenvectors, column per eigenvalue.
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Relative residuals ||A v - lambda v|| / |lambda| ||v||.
    pub residuals: Vec<f64>,
}

pub const LANCZOS_TOL: f64 = 1e-10;
pub const MAX_LANCZOS_ITER: usize = 400;

/// Shift-invert Lanczos for the `k` eigenvalues of A nearest above
/// `sigma`, assuming A - sigma I is positive definite. Full
/// reorthogonalization, deterministic seeded start vector.
pub fn shift_invert_lanczos(
    a: &BandedMatrix,
    sigma: f64,
    k: usize,
    seed: u64,
    tol: f64,
) -> Result<EigenPairs> {
    let n = a.n;
    assert!(k >= 1 && k <= n);
    let chol = a.shifted(sigma).cholesky()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![0.0; n];
    for x in v.iter_mut() {
        *x = rng.gen_range(-1.0..1.0);
    }
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let max_iter = MAX_LANCZOS_ITER.min(n);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    for m in 1..=max_iter {
        let vj = basis.last().unwrap().clone();
        // w = (A - sigma I)^{-1} v_j
        let mut w = vj.clone();
        chol.solve(&mut w);
        let alpha = dot(&w, &vj);
        alphas.push(alpha);
        // full reorthogonalization, twice for stability
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (wv, bv) in w.iter_mut().zip(b) {
                    *wv -= c * bv;
                }
            }
        }
        let beta = norm(&w);

        if m >= k {
            // Ritz values of the tridiagonal operator
            let mut t = DMatrix::zeros(m, m);
            for (i, &al) in alphas.iter().enumerate() {
                t[(i, i)] = al;
            }
            for (i, &be) in betas.iter().enumerate() {
                t[(i, i + 1)] = be;
                t[(i + 1, i)] = be;
            }
            let eig = t.symmetric_eigen();
            let mut order: Vec<usize> = (0..m).collect();
            // largest theta = eigenvalue of A closest above sigma
            order.sort_by(|&p, &q| eig.eigenvalues[q].partial_cmp(&eig.eigenvalues[p]).unwrap());
            if m >= k {
                // bottom entry of the Ritz vector bounds the residual
                let converged = order.iter().take(k).all(|&idx| {
                    let theta = eig.eigenvalues[idx];
                    let tail = eig.eigenvectors[(m - 1, idx)].abs();
                    theta > 0.0 && beta * tail <= tol * theta
                });
                if converged || beta <= 1e-14 || m == max_iter {
                    let mut values = Vec::with_capacity(k);
                    let mut vectors = Vec::with_capacity(k);
                    for &idx in order.iter().take(k) {
                        let theta = eig.eigenvalues[idx];
                        if theta <= 0.0 {
                            return Err(Error::LanczosNonConvergence {
                                wanted: k,
                                iterations: m,
                            });
                        }
                        values.push(sigma + 1.0 / theta);
                        let mut x = vec![0.0; n];
                        for (j, b) in basis.iter().enumerate() {
                            let c = eig.eigenvectors[(j, idx)];
                            for (xv, bv) in x.iter_mut().zip(b) {
                                *xv += c * bv;
                            }
                        }
                        let nx = norm(&x);
                        x.iter_mut().for_each(|v| *v /= nx);
                        vectors.push(x);
                    }
                    // sort ascending by eigenvalue
                    let mut idxs: Vec<usize> = (0..k).collect();
                    idxs.sort_by(|&p, &q| values[p].partial_cmp(&values[q]).unwrap());
                    let values: Vec<f64> = idxs.iter().map(|&i| values[i]).collect();
                    let vectors: Vec<Vec<f64>> =
                        idxs.iter().map(|&i| vectors[i].clone()).collect();

                    let mut residuals = Vec::with_capacity(k);
                    let mut work = vec![0.0; n];
                    for (lam, x) in values.iter().zip(&vectors) {
                        a.matvec(x, &mut work);
                        let mut r2 = 0.0;
                        for (wv, xv) in work.iter().zip(x) {
                            let r = wv - lam * xv;
                            r2 += r * r;
                        }
                        residuals.push(r2.sqrt() / lam.abs().max(1e-300));
                    }
                    if !converged && m == max_iter {
                        let worst = residuals.iter().cloned().fold(0.0, f64::max);
                        if worst > 1e-6 {
                            return Err(Error::LanczosNonConvergence {
                                wanted: k,
                                iterations: m,
                            });
                        }
                    }
                    return Ok(EigenPairs {
                        values,
                        vectors,
                        iterations: m,
                        residuals,
                    });
                }
            }
        }

        if beta <= 1e-14 {
            // invariant subspace smaller than requested
            return Err(Error::LanczosNonConvergence {
                wanted: k,
                iterations: m,
            });
        }
        betas.push(beta);
        let mut next = w;
        next.iter_mut().for_each(|x| *x /= beta);
        basis.push(next);
    }
    Err(Error::LanczosNonConvergence {
        wanted: k,
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> BandedMatrix {
        let mut m = BandedMatrix::zeros(n, 1);
        let h = 1.0 / (n + 1) as f64;
        for i in 0..n {
            m.add(i, i, 2.0 / (h * h));
            if i + 1 < n {
                m.add(i + 1, i, -1.0 / (h * h));
            }
        }
        m
    }

    #[test]
    fn matvec_matches_dense() {
        let m = laplacian_1d(12);
        let dense = m.to_dense();
        let x: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let mut y = vec![0.0; 12];
        m.matvec(&x, &mut y);
        let xd = nalgebra::DVector::from_vec(x);
        let yd = &dense * xd;
        for (a, b) in y.iter().zip(yd.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_solves() {
        let m = laplacian_1d(40);
        let chol = m.cholesky().unwrap();
        let b: Vec<f64> = (0..40).map(|i| 1.0 + (i as f64) * 0.1).collect();
        let mut x = b.clone();
        chol.solve(&mut x);
        let mut ax = vec![0.0; 40];
        m.matvec(&x, &mut ax);
        for (a, bb) in ax.iter().zip(&b) {
            assert!((a - bb).abs() < 1e-6 * bb.abs());
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut m = BandedMatrix::zeros(3, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, -5.0);
        m.add(2, 2, 1.0);
        assert!(matches!(m.cholesky(), Err(Error::FactorizationFailure(_))));
    }

    #[test]
    fn lanczos_matches_dense_eigenvalues() {
        let n = 60;
        let m = laplacian_1d(n);
        let pairs = shift_invert_lanczos(&m, 0.0, 4, 7, LANCZOS_TOL).unwrap();
        let dense = m.to_dense().symmetric_eigen();
        let mut all: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, lam) in pairs.values.iter().enumerate() {
            assert!(
                (lam - all[i]).abs() <= 1e-8 * all[i],
                "lambda_{i}: {lam} vs {}",
                all[i]
            );
        }
        for r in &pairs.residuals {
            assert!(*r <= 1e-8);
        }
        // orthonormal eigenvectors
        for i in 0..4 {
            for j in 0..4 {
                let d = dot(&pairs.vectors[i], &pairs.vectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-8, "gram[{i}][{j}] = {d}");
            }
        }
    }

    #[test]
    fn lanczos_with_nonzero_shift() {
        let n = 60;
        let m = laplacian_1d(n);
        let dense = m.to_dense().symmetric_eigen();
        let mut all: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let sigma = all[0] * 0.9;
        let pairs = shift_invert_lanczos(&m, sigma, 3, 7, LANCZOS_TOL).unwrap();
        for (i, lam) in pairs.values.iter().enumerate() {
            assert!((lam - all[i]).abs() <= 1e-8 * all[i]);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let m = laplacian_1d(30);
        let a = shift_invert_lanczos(&m, 0.0, 2, 11, LANCZOS_TOL).unwrap();
        let b = shift_invert_lanczos(&m, 0.0, 2, 11, LANCZOS_TOL).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
    }

    #[test]
    fn wide_band_factorization() {
        // pentadiagonal biharmonic-like matrix
        let n = 50;
        let mut m = BandedMatrix::zeros(n, 2);
        for i in 0..n {
            m.add(i, i, 6.0);
            if i + 1 < n {
                m.add(i + 1, i, -4.0);
            }
            if i + 2 < n {
                m.add(i + 2, i, 1.0);
            }
        }
        let chol = m.cholesky().unwrap();
        let b = vec![1.0; n];
        let mut x = b.clone();
        chol.solve(&mut x);
        let mut ax = vec![0.0; n];
        m.matvec(&x, &mut ax);
        for (a, bb) in ax.iter().zip(&b) {
            assert!((a - bb).abs() < 1e-8);
        }
    }
}
