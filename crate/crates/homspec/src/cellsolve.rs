//! Periodic cell problems on the unit torus, solved by Fourier-Galerkin
//! with dealiased pseudospectral coefficient products and preconditioned
//! conjugate gradient on the mean-zero subspace.
//!
//! Three families: fourth-order correctors N_kl, mixed correctors M_n
//! (fourth plus second order), and second-order correctors N_n, all with
//! coefficients frozen at the slow point x*.

use crate::coeffield::{matrix_index, tensor_index, CoefficientSpec};
use crate::error::{Error, Result};
use crate::fourier::{PeriodicField, TorusGrid};
use num_complex::Complex64;
use serde::Serialize;

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_CG_ITER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CellKind {
    /// N_kl, driven by the rank-4 field.
    Fourth,
    /// M_n, fourth plus second order operator.
    Mixed,
    /// N_n, second order only.
    Second,
}

/// A solved corrector family with a posteriori residuals.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub kind: CellKind,
    pub grid: TorusGrid,
    pub frozen_x: Vec<f64>,
    /// Fourth: d*d fields indexed (k,l) -> k*d+l. Mixed/Second: d fields.
    pub fields: Vec<PeriodicField>,
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl CellSolution {
    pub fn field(&self, idx: usize) -> Result<&PeriodicField> {
        self.fields
            .get(idx)
            .ok_or_else(|| Error::MissingCorrector(format!("index {idx}")))
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn max_mean(&self) -> f64 {
        self.fields.iter().map(|f| f.mean().abs()).fold(0.0, f64::max)
    }
}

/// Coefficient tables frozen at x*, sampled on the dealiased fine grid.
pub struct CellOperator {
    pub grid: TorusGrid,
    pub kind: CellKind,
    fine: TorusGrid,
    /// a_ijkl(x*, y) on the fine grid; empty for `Second`.
    a_fine: Vec<Vec<f64>>,
    /// b_ij(x*, y) on the fine grid; empty for `Fourth`.
    b_fine: Vec<Vec<f64>>,
    /// Torus means of a and b, for the constant-symbol preconditioner.
    a_mean: Vec<f64>,
    b_mean: Vec<f64>,
}

impl CellOperator {
    pub fn new(
        spec: &CoefficientSpec,
        frozen_x: &[f64],
        grid: TorusGrid,
        kind: CellKind,
    ) -> Result<CellOperator> {
        assert_eq!(grid.dim, spec.dim);
        let d = spec.dim;
        let fine = TorusGrid::new(grid.dim, grid.dealias_modes());
        let n_fine = fine.len();

        let needs_a = kind != CellKind::Second;
        let needs_b = kind != CellKind::Fourth;

        let mut a_fine = vec![vec![0.0; if needs_a { n_fine } else { 0 }]; if needs_a { d * d * d * d } else { 0 }];
        let mut b_fine = vec![vec![0.0; if needs_b { n_fine } else { 0 }]; if needs_b { d * d } else { 0 }];
        for flat in 0..n_fine {
            let y = fine.point(flat);
            if needs_a {
                let a = spec.a_at(frozen_x, &y)?;
                for (t, row) in a_fine.iter_mut().enumerate() {
                    row[flat] = a[t];
                }
            }
            if needs_b {
                let b = spec.b_at(frozen_x, &y)?;
                for (t, row) in b_fine.iter_mut().enumerate() {
                    row[flat] = b[t];
                }
            }
        }
        let mean = |rows: &[Vec<f64>]| -> Vec<f64> {
            rows.iter()
                .map(|r| r.iter().sum::<f64>() / n_fine.max(1) as f64)
                .collect()
        };
        Ok(CellOperator {
            grid,
            kind,
            fine,
            a_mean: mean(&a_fine),
            b_mean: mean(&b_fine),
            a_fine,
            b_fine,
        })
    }

    fn dim(&self) -> usize {
        self.grid.dim
    }

    /// Apply the discrete operator to a spectrum (mean-zero in, mean-zero out).
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        let g = self.grid;
        let mf = self.fine.modes;
        let mut out = vec![Complex64::new(0.0, 0.0); g.len()];

        if self.kind != CellKind::Second {
            // fourth-order part: sum_ij D2_ij FFT[ a_ijmn IFFT[D2_mn u] ]
            let mut v_fine: Vec<Vec<Complex64>> = Vec::with_capacity(d * d);
            for m in 0..d {
                for n in 0..d {
                    let spec: Vec<Complex64> = u
                        .iter()
                        .enumerate()
                        .map(|(flat, c)| c * g.deriv2_factor(flat, m, n))
                        .collect();
                    v_fine.push(self.fine.inverse(&g.pad_spectrum(&spec, mf)));
                }
            }
            for i in 0..d {
                for j in 0..d {
                    let mut w = vec![Complex64::new(0.0, 0.0); self.fine.len()];
                    for m in 0..d {
                        for n in 0..d {
                            let coeff = &self.a_fine[tensor_index(d, i, j, m, n)];
                            let v = &v_fine[m * d + n];
                            for (wv, (cv, vv)) in w.iter_mut().zip(coeff.iter().zip(v)) {
                                *wv += cv * vv;
                            }
                        }
                    }
                    let w_spec = g.truncate_spectrum(&self.fine.forward(&w), mf);
                    for (flat, (ov, wv)) in out.iter_mut().zip(w_spec).enumerate() {
                        *ov += wv * g.deriv2_factor(flat, i, j);
                    }
                }
            }
        }

        if self.kind != CellKind::Fourth {
            // second-order part: -sum_i D1_i FFT[ b_ij IFFT[D1_j u] ]
            let mut v_fine: Vec<Vec<Complex64>> = Vec::with_capacity(d);
            for jdir in 0..d {
                let spec: Vec<Complex64> = u
                    .iter()
                    .enumerate()
                    .map(|(flat, c)| c * g.deriv1_factor(flat, jdir))
                    .collect();
                v_fine.push(self.fine.inverse(&g.pad_spectrum(&spec, mf)));
            }
            for i in 0..d {
                let mut w = vec![Complex64::new(0.0, 0.0); self.fine.len()];
                for jdir in 0..d {
                    let coeff = &self.b_fine[matrix_index(d, i, jdir)];
                    let v = &v_fine[jdir];
                    for (wv, (cv, vv)) in w.iter_mut().zip(coeff.iter().zip(v)) {
                        *wv += cv * vv;
                    }
                }
                let w_spec = g.truncate_spectrum(&self.fine.forward(&w), mf);
                for (flat, (ov, wv)) in out.iter_mut().zip(w_spec).enumerate() {
                    *ov -= wv * g.deriv1_factor(flat, i);
                }
            }
        }

        out[0] = Complex64::new(0.0, 0.0);
        out
    }

    /// Discrete weak form A(u, v) = <L u, v>; symmetric by (H2).
    pub fn bilinear(&self, u: &[Complex64], v: &[Complex64]) -> f64 {
        dot(&self.apply(u), v)
    }

    /// Right side spectrum for the corrector with flat index `which`.
    /// Fourth: which = k*d + l, rhs = -d_ij a_ijkl.
    /// Mixed/Second: which = n, rhs = d_i b_ni.
    pub fn rhs(&self, which: usize) -> Vec<Complex64> {
        let d = self.dim();
        let g = self.grid;
        let mf = self.fine.modes;
        let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
        match self.kind {
            CellKind::Fourth => {
                let (k, l) = (which / d, which % d);
                for i in 0..d {
                    for j in 0..d {
                        let vals: Vec<Complex64> = self.a_fine[tensor_index(d, i, j, k, l)]
                            .iter()
                            .map(|&v| Complex64::new(-v, 0.0))
                            .collect();
                        let spec = g.truncate_spectrum(&self.fine.forward(&vals), mf);
                        for (flat, (ov, sv)) in out.iter_mut().zip(spec).enumerate() {
                            *ov += sv * g.deriv2_factor(flat, i, j);
                        }
                    }
                }
            }
            CellKind::Mixed | CellKind::Second => {
                let n = which;
                for i in 0..d {
                    let vals: Vec<Complex64> = self.b_fine[matrix_index(d, n, i)]
                        .iter()
                        .map(|&v| Complex64::new(v, 0.0))
                        .collect();
                    let spec = g.truncate_spectrum(&self.fine.forward(&vals), mf);
                    for (flat, (ov, sv)) in out.iter_mut().zip(spec).enumerate() {
                        *ov += sv * g.deriv1_factor(flat, i);
                    }
                }
            }
        }
        // Divergence form: the zero mode vanishes identically.
        debug_assert!(out[0].norm() <= 1e-10);
        out[0] = Complex64::new(0.0, 0.0);
        out
    }

    /// Inverse constant-coefficient symbol, the CG preconditioner.
    fn precondition(&self, r: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        let g = self.grid;
        r.iter()
            .enumerate()
            .map(|(flat, v)| {
                let k = g.wavevector(flat);
                let mut symbol = 0.0;
                if self.kind != CellKind::Second {
                    for i in 0..d {
                        for j in 0..d {
                            for m in 0..d {
                                for n in 0..d {
                                    symbol += self.a_mean[tensor_index(d, i, j, m, n)]
                                        * g.deriv2_factor(flat, i, j)
                                        * g.deriv2_factor(flat, m, n);
                                }
                            }
                        }
                    }
                }
                if self.kind != CellKind::Fourth {
                    for i in 0..d {
                        for j in 0..d {
                            symbol += self.b_mean[matrix_index(d, i, j)]
                                * crate::fourier::TWO_PI
                                * crate::fourier::TWO_PI
                                * (k[i] as f64)
                                * (k[j] as f64);
                        }
                    }
                }
                if symbol.abs() < 1e-300 {
                    Complex64::new(0.0, 0.0)
                } else {
                    v / symbol
                }
            })
            .collect()
    }

    /// Preconditioned CG for L u = rhs on the mean-zero subspace.
    pub fn solve(&self, rhs: &[Complex64], tol: f64) -> Result<(Vec<Complex64>, f64, usize)> {
        let rhs_norm = norm(rhs);
        if rhs_norm <= 1e-14 {
            return Ok((vec![Complex64::new(0.0, 0.0); rhs.len()], 0.0, 0));
        }
        let mut x = vec![Complex64::new(0.0, 0.0); rhs.len()];
        let mut r = rhs.to_vec();
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut iterations = 0;
        for it in 0..MAX_CG_ITER {
            iterations = it + 1;
            let ap = self.apply(&p);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::KrylovNonConvergence {
                    residual: norm(&r) / rhs_norm,
                    iterations,
                });
            }
            let alpha = rz / pap;
            for ((xv, pv), (rv, av)) in x.iter_mut().zip(&p).zip(r.iter_mut().zip(&ap)) {
                *xv += alpha * pv;
                *rv -= alpha * av;
            }
            let rel = norm(&r) / rhs_norm;
            if rel <= tol {
                x[0] = Complex64::new(0.0, 0.0);
                // a posteriori residual of the discrete equation
                let lr = self.apply(&x);
                let res = lr
                    .iter()
                    .zip(rhs)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
                    / rhs_norm;
                return Ok((x, res, iterations));
            }
            z = self.precondition(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pv, zv) in p.iter_mut().zip(&z) {
                *pv = zv + beta * *pv;
            }
        }
        Err(Error::KrylovNonConvergence {
            residual: norm(&r) / rhs_norm,
            iterations,
        })
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn solve_family(
    spec: &CoefficientSpec,
    frozen_x: &[f64],
    grid: TorusGrid,
    tol: f64,
    kind: CellKind,
) -> Result<CellSolution> {
    let op = CellOperator::new(spec, frozen_x, grid, kind)?;
    let d = spec.dim;
    let count = if kind == CellKind::Fourth { d * d } else { d };
    let mut fields = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    let mut iterations = Vec::with_capacity(count);
    for which in 0..count {
        let rhs = op.rhs(which);
        let (x, res, iters) = op.solve(&rhs, tol)?;
        fields.push(PeriodicField::from_spectrum(grid, x, true));
        residuals.push(res);
        iterations.push(iters);
    }
    Ok(CellSolution {
        kind,
        grid,
        frozen_x: frozen_x.to_vec(),
        fields,
        residuals,
        iterations,
    })
}

/// Correctors N_kl of the fourth-order cell problem.
pub fn solve_cell_fourth(
    spec: &CoefficientSpec,
    frozen_x: &[f64],
    grid: TorusGrid,
    tol: f64,
) -> Result<CellSolution> {
    solve_family(spec, frozen_x, grid, tol, CellKind::Fourth)
}

/// Correctors M_n of the mixed fourth-plus-second order cell problem.
pub fn solve_cell_mixed(
    spec: &CoefficientSpec,
    frozen_x: &[f64],
    grid: TorusGrid,
    tol: f64,
) -> Result<CellSolution> {
    solve_family(spec, frozen_x, grid, tol, CellKind::Mixed)
}

/// Correctors N_n of the second-order cell problem.
pub fn solve_cell_second(
    spec: &CoefficientSpec,
    frozen_x: &[f64],
    grid: TorusGrid,
    tol: f64,
) -> Result<CellSolution> {
    solve_family(spec, frozen_x, grid, tol, CellKind::Second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffield::BoxDomain;
    use crate::expr::Expression;
    use crate::fourier::TWO_PI;

    fn spec_1d(a: &str, b: &str) -> CoefficientSpec {
        CoefficientSpec::new(
            1,
            BoxDomain::new(vec![-1.0], vec![1.0]).unwrap(),
            vec![Expression::parse(a).unwrap()],
            vec![Expression::parse(b).unwrap()],
            Expression::parse("1").unwrap(),
        )
        .unwrap()
    }

    fn spec_2d(a_diag: &str, b_diag: &str) -> CoefficientSpec {
        // isotropic-diagonal rank-4 field a_ijkl = f(y) delta_ik delta_jl,
        // diagonal b_ij = g(y) delta_ij
        let d = 2;
        let mut a = Vec::new();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let e = if i == k && j == l { a_diag } else { "0" };
                        a.push(Expression::parse(e).unwrap());
                    }
                }
            }
        }
        let mut b = Vec::new();
        for i in 0..d {
            for j in 0..d {
                b.push(Expression::parse(if i == j { b_diag } else { "0" }).unwrap());
            }
        }
        CoefficientSpec::new(
            2,
            BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            a,
            b,
            Expression::parse("1").unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_coefficients_give_zero_correctors() {
        let spec = spec_1d("3", "2");
        let g = TorusGrid::new(1, 16);
        for sol in [
            solve_cell_fourth(&spec, &[0.0], g, DEFAULT_TOL).unwrap(),
            solve_cell_mixed(&spec, &[0.0], g, DEFAULT_TOL).unwrap(),
            solve_cell_second(&spec, &[0.0], g, DEFAULT_TOL).unwrap(),
        ] {
            for f in &sol.fields {
                assert!(f.norm_l2() <= 1e-12);
            }
        }
    }

    #[test]
    fn fourth_order_1d_closed_form() {
        // a(y) = 1/(2+sin 2 pi y): a (N'' + 1) = const = harmonic mean = 1/2,
        // so N''(y) = sin(2 pi y)/2.
        let spec = spec_1d("1/(2 + sin(2*pi*y1))", "1");
        let g = TorusGrid::new(1, 64);
        let sol = solve_cell_fourth(&spec, &[0.0], g, DEFAULT_TOL).unwrap();
        assert!(sol.max_residual() <= DEFAULT_TOL * 10.0);
        let n2 = sol.fields[0].derivative2(0, 0).values();
        for (j, v) in n2.iter().enumerate() {
            let y = j as f64 / 64.0;
            assert!(
                (v - 0.5 * (TWO_PI * y).sin()).abs() < 1e-8,
                "N'' mismatch at y={y}: {v}"
            );
        }
    }

    #[test]
    fn second_order_1d_closed_form() {
        // b(y) = 1/(2+sin): b (N' + 1) = const = 1/2, N' = (2+sin)/2 - 1.
        let spec = spec_1d("1", "1/(2 + sin(2*pi*y1))");
        let g = TorusGrid::new(1, 64);
        let sol = solve_cell_second(&spec, &[0.0], g, DEFAULT_TOL).unwrap();
        let n1 = sol.fields[0].derivative1(0).values();
        for (j, v) in n1.iter().enumerate() {
            let y = j as f64 / 64.0;
            assert!((v - 0.5 * (TWO_PI * y).sin()).abs() < 1e-10);
        }
        assert!(sol.max_mean() <= 1e-14);
    }

    #[test]
    fn mixed_1d_matches_refined_grid() {
        let spec = spec_1d("1", "2 + sin(2*pi*y1)");
        let coarse = solve_cell_mixed(&spec, &[0.0], TorusGrid::new(1, 32), DEFAULT_TOL).unwrap();
        let fine = solve_cell_mixed(&spec, &[0.0], TorusGrid::new(1, 64), DEFAULT_TOL).unwrap();
        let vc = coarse.fields[0].values_on(64);
        let vf = fine.fields[0].values();
        let err = vc
            .iter()
            .zip(&vf)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "refinement error {err}");
        assert!(coarse.max_mean() <= 1e-14);
        assert!(coarse.max_residual() <= DEFAULT_TOL * 10.0);
    }

    #[test]
    fn fourth_2d_refined_grid_oracle() {
        let spec = spec_2d("2 + cos(2*pi*y1)*sin(2*pi*y2)", "1");
        let coarse = solve_cell_fourth(&spec, &[0.0, 0.0], TorusGrid::new(2, 16), DEFAULT_TOL).unwrap();
        let fine = solve_cell_fourth(&spec, &[0.0, 0.0], TorusGrid::new(2, 32), DEFAULT_TOL).unwrap();
        assert!(coarse.max_residual() <= 1e-10 * 10.0);
        for (fc, ff) in coarse.fields.iter().zip(&fine.fields) {
            let vc = fc.values_on(32);
            let vf = ff.values();
            let err = vc
                .iter()
                .zip(&vf)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "refinement error {err}");
        }
    }

    #[test]
    fn second_2d_separable_structure() {
        // b = (2 + cos 2 pi y1) Id: N_1 depends only on y1, N_2 = 0.
        let spec = spec_2d("1", "2 + cos(2*pi*y1)");
        let g = TorusGrid::new(2, 32);
        let sol = solve_cell_second(&spec, &[0.0, 0.0], g, DEFAULT_TOL).unwrap();
        assert!(sol.fields[1].norm_l2() <= 1e-10, "N_2 should vanish");
        let vals = sol.fields[0].values();
        let m = 32;
        for i in 0..m {
            for j in 1..m {
                assert!(
                    (vals[i * m + j] - vals[i * m]).abs() < 1e-10,
                    "N_1 should not depend on y2"
                );
            }
        }
    }

    #[test]
    fn weak_form_is_symmetric() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let spec = spec_1d("1/(2 + sin(2*pi*y1))", "2 + cos(2*pi*y1)");
        let g = TorusGrid::new(1, 32);
        for kind in [CellKind::Fourth, CellKind::Mixed, CellKind::Second] {
            let op = CellOperator::new(&spec, &[0.0], g, kind).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..5 {
                let mk = |rng: &mut ChaCha8Rng| {
                    let vals: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let mut f = PeriodicField::from_values(g, &vals, true);
                    f.coeffs[0] = Complex64::new(0.0, 0.0);
                    f.coeffs
                };
                let u = mk(&mut rng);
                let v = mk(&mut rng);
                let auv = op.bilinear(&u, &v);
                let avu = op.bilinear(&v, &u);
                assert!(
                    (auv - avu).abs() <= 1e-12 * auv.abs().max(1.0),
                    "asymmetry {:?}: {auv} vs {avu}",
                    kind
                );
            }
        }
    }

    #[test]
    fn spectral_convergence_in_modes() {
        // a = 2 + sin gives a corrector with a full geometrically decaying
        // spectrum (the reciprocal fixture is a single harmonic and would
        // sit at the roundoff floor already at m = 8).
        let spec = spec_1d("2 + sin(2*pi*y1)", "1");
        let mut errs = Vec::new();
        for m in [8usize, 16, 32] {
            let sol = solve_cell_fourth(&spec, &[0.0], TorusGrid::new(1, m), 1e-12).unwrap();
            let reference =
                solve_cell_fourth(&spec, &[0.0], TorusGrid::new(1, 2 * m), 1e-12).unwrap();
            let vc = sol.fields[0].values_on(2 * m);
            let vf = reference.fields[0].values();
            let err = vc
                .iter()
                .zip(&vf)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max)
                .max(1e-15);
            errs.push(err);
        }
        // Super-polynomial decay: better than fourth order per doubling.
        assert!(errs[1] <= errs[0] * 0.0625, "errors {errs:?}");
        assert!(errs[2] <= errs[1] * 0.0625, "errors {errs:?}");
    }
}
