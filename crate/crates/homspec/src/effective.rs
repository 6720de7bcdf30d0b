//! Assembly of the constant effective tensors from cell solutions: the
//! homogenized rank-4 tensor, the three region variants of the effective
//! matrix, and coercivity certificates for both.

use crate::coeffield::{matrix_index, tensor_index, CoefficientSpec, SlowStatistics};
use crate::cellsolve::{CellKind, CellSolution};
use crate::error::{Error, Result};
use crate::fourier::TorusGrid;
use crate::regions::{EffectiveForm, Region, RegionScaling};
use nalgebra::DMatrix;
use serde::Serialize;

/// Exact smallest Rayleigh quotient of a symmetric tensor, with the
/// minimizing direction.
#[derive(Debug, Clone, Serialize)]
pub struct CoercivityCertificate {
    pub min_quotient: f64,
    pub minimizer: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveTensors {
    /// Rank-4 constant tensor, d^4 entries; present for R1, R2.
    pub a_eff: Option<Vec<f64>>,
    /// d x d constant matrix; present for R2 (the plain average) and R3-R5.
    pub b_eff: Option<Vec<f64>>,
    /// Hessian of the local average of c at the minimizer.
    pub hessian: Vec<f64>,
    /// Minimum value of the local average.
    pub c0: f64,
    pub a_coercivity: Option<CoercivityCertificate>,
    pub b_coercivity: Option<CoercivityCertificate>,
    /// Largest deviation from major symmetry before symmetrization.
    pub a_symmetry_deviation: Option<f64>,
    pub b_symmetry_deviation: Option<f64>,
}

/// Constant-coefficient effective operator for one region.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveOperator {
    pub form: EffectiveForm,
    pub dim: usize,
    pub tensors: EffectiveTensors,
    /// The freezing point x* (the minimizer of the local average of c).
    pub center: Vec<f64>,
}

fn quadrature_grid(cell_grid: TorusGrid) -> TorusGrid {
    TorusGrid::new(cell_grid.dim, cell_grid.dealias_modes())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn coefficient_table_a(
    spec: &CoefficientSpec,
    x: &[f64],
    fine: TorusGrid,
) -> Result<Vec<Vec<f64>>> {
    let d = spec.dim;
    let mut rows = vec![vec![0.0; fine.len()]; d * d * d * d];
    for flat in 0..fine.len() {
        let a = spec.a_at(x, &fine.point(flat))?;
        for (t, row) in rows.iter_mut().enumerate() {
            row[flat] = a[t];
        }
    }
    Ok(rows)
}

fn coefficient_table_b(
    spec: &CoefficientSpec,
    x: &[f64],
    fine: TorusGrid,
) -> Result<Vec<Vec<f64>>> {
    let d = spec.dim;
    let mut rows = vec![vec![0.0; fine.len()]; d * d];
    for flat in 0..fine.len() {
        let b = spec.b_at(x, &fine.point(flat))?;
        for (t, row) in rows.iter_mut().enumerate() {
            row[flat] = b[t];
        }
    }
    Ok(rows)
}

/// Symmetrize under the major symmetry t_ijkl = t_klij; returns the
/// pre-symmetrization deviation.
fn symmetrize_rank4(t: &mut [f64], d: usize) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let p = tensor_index(d, i, j, k, l);
                    let q = tensor_index(d, k, l, i, j);
                    if p < q {
                        dev = dev.max((t[p] - t[q]).abs());
                        let avg = 0.5 * (t[p] + t[q]);
                        t[p] = avg;
                        t[q] = avg;
                    }
                }
            }
        }
    }
    dev
}

fn symmetrize_rank2(t: &mut [f64], d: usize) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in 0..i {
            let p = matrix_index(d, i, j);
            let q = matrix_index(d, j, i);
            dev = dev.max((t[p] - t[q]).abs());
            let avg = 0.5 * (t[p] + t[q]);
            t[p] = avg;
            t[q] = avg;
        }
    }
    dev
}

/// Largest entrywise gap between two tensors of equal shape.
pub fn effective_max_delta(left: &[f64], right: &[f64]) -> f64 {
    left.iter()
        .zip(right)
        .map(|(l, r)| (l - r).abs())
        .fold(0.0, f64::max)
}

/// Divergence-form homogenized rank-4 tensor from the fourth-order cell
/// solutions; returns (tensor, pre-symmetrization deviation).
pub fn assemble_a_eff(
    cell: &CellSolution,
    spec: &CoefficientSpec,
    frozen_x: &[f64],
) -> Result<(Vec<f64>, f64)> {
    if cell.kind != CellKind::Fourth {
        return Err(Error::MissingCorrector("fourth-order family".into()));
    }
    let d = spec.dim;
    let fine = quadrature_grid(cell.grid);
    let a = coefficient_table_a(spec, frozen_x, fine)?;
    // second derivatives of every corrector on the quadrature grid
    let mut dd = vec![Vec::new(); d * d * d * d]; // [(k,l) family][(m,n) deriv]
    for k in 0..d {
        for l in 0..d {
            let field = cell.field(k * d + l)?;
            for m in 0..d {
                for n in 0..d {
                    dd[tensor_index(d, k, l, m, n)] =
                        field.derivative2(m, n).values_on(fine.modes);
                }
            }
        }
    }
    let mut t = vec![0.0; d * d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut acc = vec![0.0; fine.len()];
                    for m in 0..d {
                        for n in 0..d {
                            let coeff = &a[tensor_index(d, i, j, m, n)];
                            let der = &dd[tensor_index(d, k, l, m, n)];
                            for (av, (cv, dv)) in acc.iter_mut().zip(coeff.iter().zip(der)) {
                                *av += cv * dv;
                            }
                        }
                    }
                    let base = &a[tensor_index(d, i, j, k, l)];
                    for (av, bv) in acc.iter_mut().zip(base) {
                        *av += bv;
                    }
                    t[tensor_index(d, i, j, k, l)] = mean(&acc);
                }
            }
        }
    }
    let dev = symmetrize_rank4(&mut t, d);
    Ok((t, dev))
}

/// Energy-form assembly of the same tensor; agrees with the divergence
/// form up to discretization noise and is used as a built-in cross-check.
pub fn assemble_a_eff_energy(
    cell: &CellSolution,
    spec: &CoefficientSpec,
    frozen_x: &[f64],
) -> Result<Vec<f64>> {
    if cell.kind != CellKind::Fourth {
        return Err(Error::MissingCorrector("fourth-order family".into()));
    }
    let d = spec.dim;
    let fine = quadrature_grid(cell.grid);
    let a = coefficient_table_a(spec, frozen_x, fine)?;
    // G[(k,l)][(r,s)](y) = delta_rk delta_sl + d_rs N_kl
    let mut g = vec![Vec::new(); d * d * d * d];
    for k in 0..d {
        for l in 0..d {
            let field = cell.field(k * d + l)?;
            for r in 0..d {
                for s in 0..d {
                    let mut vals = field.derivative2(r, s).values_on(fine.modes);
                    if r == k && s == l {
                        for v in vals.iter_mut() {
                            *v += 1.0;
                        }
                    }
                    g[tensor_index(d, k, l, r, s)] = vals;
                }
            }
        }
    }
    let mut t = vec![0.0; d * d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut acc = vec![0.0; fine.len()];
                    for p in 0..d {
                        for q in 0..d {
                            for r in 0..d {
                                for s in 0..d {
                                    let coeff = &a[tensor_index(d, p, q, r, s)];
                                    let gkl = &g[tensor_index(d, k, l, r, s)];
                                    let gij = &g[tensor_index(d, i, j, p, q)];
                                    for (((av, cv), x1), x2) in
                                        acc.iter_mut().zip(coeff).zip(gkl).zip(gij)
                                    {
                                        *av += cv * x1 * x2;
                                    }
                                }
                            }
                        }
                    }
                    t[tensor_index(d, i, j, k, l)] = mean(&acc);
                }
            }
        }
    }
    Ok(t)
}

/// Plain torus average of b at the freezing point.
pub fn average_b(spec: &CoefficientSpec, frozen_x: &[f64], grid: TorusGrid) -> Result<Vec<f64>> {
    let d = spec.dim;
    let fine = quadrature_grid(grid);
    let b = coefficient_table_b(spec, frozen_x, fine)?;
    Ok((0..d * d).map(|t| mean(&b[t])).collect())
}

/// Region-dependent effective matrix; returns (matrix, deviation).
pub fn assemble_b_eff(
    region: Region,
    cell: Option<&CellSolution>,
    spec: &CoefficientSpec,
    frozen_x: &[f64],
    grid: TorusGrid,
) -> Result<(Vec<f64>, f64)> {
    let d = spec.dim;
    match region {
        Region::R2 | Region::R3 => {
            let mut t = average_b(spec, frozen_x, grid)?;
            let dev = symmetrize_rank2(&mut t, d);
            Ok((t, dev))
        }
        Region::R4 | Region::R5 => {
            let expected = if region == Region::R4 {
                CellKind::Mixed
            } else {
                CellKind::Second
            };
            let cell = cell.ok_or_else(|| {
                Error::MissingCorrector(format!("{expected:?} family for {region:?}"))
            })?;
            if cell.kind != expected {
                return Err(Error::MissingCorrector(format!(
                    "{region:?} needs the {expected:?} family, got {:?}",
                    cell.kind
                )));
            }
            let fine = quadrature_grid(cell.grid);
            let b = coefficient_table_b(spec, frozen_x, fine)?;
            // grad[(j)][(k)](y) = delta_kj + d_k M_j (or N_j)
            let mut grad = vec![Vec::new(); d * d];
            for j in 0..d {
                let field = cell.field(j)?;
                for k in 0..d {
                    let mut vals = field.derivative1(k).values_on(fine.modes);
                    if k == j {
                        for v in vals.iter_mut() {
                            *v += 1.0;
                        }
                    }
                    grad[matrix_index(d, j, k)] = vals;
                }
            }
            let mut t = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    let mut acc = vec![0.0; fine.len()];
                    for k in 0..d {
                        let coeff = &b[matrix_index(d, i, k)];
                        let gr = &grad[matrix_index(d, j, k)];
                        for (av, (cv, gv)) in acc.iter_mut().zip(coeff.iter().zip(gr)) {
                            *av += cv * gv;
                        }
                    }
                    t[matrix_index(d, i, j)] = mean(&acc);
                }
            }
            let dev = symmetrize_rank2(&mut t, d);
            Ok((t, dev))
        }
        other => Err(Error::MissingCorrector(format!(
            "no effective matrix is defined for {other:?}"
        ))),
    }
}

/// Energy-form counterpart of `assemble_b_eff` for R4/R5.
pub fn assemble_b_eff_energy(
    region: Region,
    cell: &CellSolution,
    spec: &CoefficientSpec,
    frozen_x: &[f64],
) -> Result<Vec<f64>> {
    let d = spec.dim;
    let fine = quadrature_grid(cell.grid);
    let b = coefficient_table_b(spec, frozen_x, fine)?;
    let mut grad = vec![Vec::new(); d * d];
    for j in 0..d {
        let field = cell.field(j)?;
        for k in 0..d {
            let mut vals = field.derivative1(k).values_on(fine.modes);
            if k == j {
                for v in vals.iter_mut() {
                    *v += 1.0;
                }
            }
            grad[matrix_index(d, j, k)] = vals;
        }
    }
    let mut t = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = vec![0.0; fine.len()];
            for k in 0..d {
                for l in 0..d {
                    let coeff = &b[matrix_index(d, k, l)];
                    let gi = &grad[matrix_index(d, i, l)];
                    let gj = &grad[matrix_index(d, j, k)];
                    for (((av, cv), x1), x2) in acc.iter_mut().zip(coeff).zip(gi).zip(gj) {
                        *av += cv * x1 * x2;
                    }
                }
            }
            t[matrix_index(d, i, j)] = mean(&acc);
        }
    }
    if region == Region::R4 {
        // plus the fourth-order corrector energy
        let a = coefficient_table_a(spec, frozen_x, fine)?;
        let mut dd = vec![Vec::new(); d * d * d];
        for j in 0..d {
            let field = cell.field(j)?;
            for p in 0..d {
                for q in 0..d {
                    dd[(j * d + p) * d + q] = field.derivative2(p, q).values_on(fine.modes);
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                let mut acc = vec![0.0; fine.len()];
                for p in 0..d {
                    for q in 0..d {
                        for r in 0..d {
                            for s in 0..d {
                                let coeff = &a[tensor_index(d, p, q, r, s)];
                                let dj = &dd[(j * d + r) * d + s];
                                let di = &dd[(i * d + p) * d + q];
                                for (((av, cv), x1), x2) in
                                    acc.iter_mut().zip(coeff).zip(dj).zip(di)
                                {
                                    *av += cv * x1 * x2;
                                }
                            }
                        }
                    }
                }
                t[matrix_index(d, i, j)] += mean(&acc);
            }
        }
    }
    Ok(t)
}

/// Smallest Rayleigh quotient of a symmetric rank-4 tensor acting on
/// d x d matrices, by exact dense eigendecomposition of its d^2 x d^2
/// matrix representation.
pub fn check_coercive_rank4(t: &[f64], d: usize) -> Result<CoercivityCertificate> {
    let n = d * d;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    m[(i * d + j, k * d + l)] = t[tensor_index(d, i, j, k, l)];
                }
            }
        }
    }
    let dev = (&m - m.transpose()).abs().max();
    if dev > 1e-8 {
        return Err(Error::AsymmetricTensor(dev));
    }
    smallest_pair(&m)
}

pub fn check_coercive_rank2(t: &[f64], d: usize) -> Result<CoercivityCertificate> {
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = t[matrix_index(d, i, j)];
        }
    }
    let dev = (&m - m.transpose()).abs().max();
    if dev > 1e-8 {
        return Err(Error::AsymmetricTensor(dev));
    }
    smallest_pair(&m)
}

fn smallest_pair(m: &DMatrix<f64>) -> Result<CoercivityCertificate> {
    let sym = 0.5 * (m + m.transpose());
    let eig = sym.symmetric_eigen();
    let (mut idx, mut val) = (0, f64::INFINITY);
    for (i, &e) in eig.eigenvalues.iter().enumerate() {
        if e < val {
            val = e;
            idx = i;
        }
    }
    Ok(CoercivityCertificate {
        min_quotient: val,
        minimizer: eig.eigenvectors.column(idx).iter().copied().collect(),
    })
}

/// Cell solutions required by `build_effective_operator`, keyed by family.
#[derive(Default)]
pub struct CellSolutions<'a> {
    pub fourth: Option<&'a CellSolution>,
    pub mixed: Option<&'a CellSolution>,
    pub second: Option<&'a CellSolution>,
}

/// Assemble the effective operator for a supported region from the cell
/// solutions and slow statistics, with coercivity certified exactly.
pub fn build_effective_operator(
    scaling: &RegionScaling,
    spec: &CoefficientSpec,
    cells: &CellSolutions<'_>,
    stats: &SlowStatistics,
) -> Result<EffectiveOperator> {
    let d = spec.dim;
    let x = &stats.minimizer;
    let mut a_eff = None;
    let mut b_eff = None;
    let mut a_dev = None;
    let mut b_dev = None;

    if matches!(scaling.effective_form, EffectiveForm::FourthOrder | EffectiveForm::FourthPlusSecond) {
        let cell = cells
            .fourth
            .ok_or_else(|| Error::MissingCorrector("fourth-order family".into()))?;
        let (t, dev) = assemble_a_eff(cell, spec, x)?;
        a_eff = Some(t);
        a_dev = Some(dev);
    }
    match scaling.region {
        Region::R2 | Region::R3 => {
            let grid = cells
                .fourth
                .map(|c| c.grid)
                .unwrap_or(TorusGrid::new(d, 32));
            let (t, dev) = assemble_b_eff(scaling.region, None, spec, x, grid)?;
            b_eff = Some(t);
            b_dev = Some(dev);
        }
        Region::R4 => {
            let cell = cells
                .mixed
                .ok_or_else(|| Error::MissingCorrector("mixed family".into()))?;
            let (t, dev) = assemble_b_eff(Region::R4, Some(cell), spec, x, cell.grid)?;
            b_eff = Some(t);
            b_dev = Some(dev);
        }
        Region::R5 => {
            let cell = cells
                .second
                .ok_or_else(|| Error::MissingCorrector("second-order family".into()))?;
            let (t, dev) = assemble_b_eff(Region::R5, Some(cell), spec, x, cell.grid)?;
            b_eff = Some(t);
            b_dev = Some(dev);
        }
        _ => {}
    }

    let a_coercivity = match &a_eff {
        Some(t) => {
            let c = check_coercive_rank4(t, d)?;
            if c.min_quotient <= 0.0 {
                return Err(Error::CoercivityFailure(c.min_quotient));
            }
            Some(c)
        }
        None => None,
    };
    let b_coercivity = match &b_eff {
        Some(t) => {
            let c = check_coercive_rank2(t, d)?;
            if c.min_quotient <= 0.0 {
                return Err(Error::CoercivityFailure(c.min_quotient));
            }
            Some(c)
        }
        None => None,
    };

    Ok(EffectiveOperator {
        form: scaling.effective_form,
        dim: d,
        tensors: EffectiveTensors {
            a_eff,
            b_eff,
            hessian: stats.hessian.clone(),
            c0: stats.c0,
            a_coercivity,
            b_coercivity,
            a_symmetry_deviation: a_dev,
            b_symmetry_deviation: b_dev,
        },
        center: x.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellsolve::{solve_cell_fourth, solve_cell_mixed, solve_cell_second, DEFAULT_TOL};
    use crate::coeffield::BoxDomain;
    use crate::expr::Expression;

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

    #[test]
    fn constant_coefficients_pass_through() {
        let spec = spec_1d("3", "2");
        let g = TorusGrid::new(1, 16);
        let cell = solve_cell_fourth(&spec, &[0.0], g, DEFAULT_TOL).unwrap();
        let (a, dev) = assemble_a_eff(&cell, &spec, &[0.0]).unwrap();
        assert!((a[0] - 3.0).abs() < 1e-13);
        assert!(dev <= 1e-13);

        let cell2 = solve_cell_second(&spec, &[0.0], g, DEFAULT_TOL).unwrap();
        let (b, _) = assemble_b_eff(Region::R5, Some(&cell2), &spec, &[0.0], g).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn harmonic_mean_identities_1d() {
        let spec = spec_1d("1/(2 + sin(2*pi*y1))", "1/(2 + sin(2*pi*y1))");
        let g = TorusGrid::new(1, 64);
        let cell4 = solve_cell_fourth(&spec, &[0.0], g, DEFAULT_TOL).unwrap();
        let (a, _) = assemble_a_eff(&cell4, &spec, &[0.0]).unwrap();
        assert!((a[0] - 0.5).abs() < 1e-8, "a_eff = {}", a[0]);

        let cell2 = solve_cell_second(&spec, &[0.0], g, DEFAULT_TOL).unwrap();
        let (b, _) = assemble_b_eff(Region::R5, Some(&cell2), &spec, &[0.0], g).unwrap();
        assert!((b[0] - 0.5).abs() < 1e-8, "b_eff = {}", b[0]);
    }

    #[test]
    fn r3_is_arithmetic_mean() {
        // b = 1/(2+sin 2 pi y): integral over the period is 1/sqrt(3).
        let spec = spec_1d("1", "1/(2 + sin(2*pi*y1))");
        let g = TorusGrid::new(1, 64);
        let (b, _) = assemble_b_eff(Region::R3, None, &spec, &[0.0], g).unwrap();
        let expect = 1.0 / 3.0_f64.sqrt();
        assert!((b[0] - expect).abs() < 1e-10, "b_eff = {} vs {}", b[0], expect);
    }

    #[test]
    fn harmonic_le_arithmetic_ordering() {
        let spec = spec_1d("1", "1/(2 + sin(2*pi*y1))");
        let g = TorusGrid::new(1, 64);
        let cell2 = solve_cell_second(&spec, &[0.0], g, DEFAULT_TOL).unwrap();
        let (harm, _) = assemble_b_eff(Region::R5, Some(&cell2), &spec, &[0.0], g).unwrap();
        let (arith, _) = assemble_b_eff(Region::R3, None, &spec, &[0.0], g).unwrap();
        assert!(harm[0] < arith[0]);
    }

    #[test]
    fn energy_form_agrees_with_divergence_form() {
        let spec = spec_1d("1/(2 + sin(2*pi*y1))", "2 + cos(2*pi*y1)");
        let g = TorusGrid::new(1, 64);
        let cell4 = solve_cell_fourth(&spec, &[0.0], g, 1e-12).unwrap();
        let (div, _) = assemble_a_eff(&cell4, &spec, &[0.0]).unwrap();
        let en = assemble_a_eff_energy(&cell4, &spec, &[0.0]).unwrap();
        assert!((div[0] - en[0]).abs() <= 1e-10);

        let cellm = solve_cell_mixed(&spec, &[0.0], g, 1e-12).unwrap();
        let (divb, _) = assemble_b_eff(Region::R4, Some(&cellm), &spec, &[0.0], g).unwrap();
        let enb = assemble_b_eff_energy(Region::R4, &cellm, &spec, &[0.0]).unwrap();
        assert!((divb[0] - enb[0]).abs() <= 1e-10, "{} vs {}", divb[0], enb[0]);
    }

    #[test]
    fn coercivity_identity_and_scalar() {
        let d = 2;
        let mut t = vec![0.0; 16];
        for i in 0..d {
            for j in 0..d {
                t[tensor_index(d, i, j, i, j)] = 1.0;
            }
        }
        let c = check_coercive_rank4(&t, d).unwrap();
        assert!((c.min_quotient - 1.0).abs() < 1e-12);

        let c = check_coercive_rank2(&[0.5], 1).unwrap();
        assert!((c.min_quotient - 0.5).abs() < 1e-14);
    }

    #[test]
    fn coercivity_vs_random_quotients_2d() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let d = 2;
        let mut a = Vec::new();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let e = if i == k && j == l {
                            "2 + cos(2*pi*y1)*sin(2*pi*y2)"
                        } else {
                            "0"
                        };
                        a.push(Expression::parse(e).unwrap());
                    }
                }
            }
        }
        let spec = CoefficientSpec::new(
            2,
            BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            a,
            vec!["1", "0", "0", "1"]
                .into_iter()
                .map(|s| Expression::parse(s).unwrap())
                .collect(),
            Expression::parse("1").unwrap(),
        )
        .unwrap();
        let cell = solve_cell_fourth(&spec, &[0.0, 0.0], TorusGrid::new(2, 16), DEFAULT_TOL).unwrap();
        let (t, _) = assemble_a_eff(&cell, &spec, &[0.0, 0.0]).unwrap();
        let cert = check_coercive_rank4(&t, d).unwrap();
        assert!(cert.min_quotient > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let xi: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n2: f64 = xi.iter().map(|v| v * v).sum();
            if n2 < 1e-12 {
                continue;
            }
            let mut q = 0.0;
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            q += t[tensor_index(d, i, j, k, l)] * xi[i * d + j] * xi[k * d + l];
                        }
                    }
                }
            }
            assert!(cert.min_quotient <= q / n2 + 1e-10);
        }
    }

    #[test]
    fn build_operator_per_region() {
        use crate::regions::{scaling, ParameterPoint};
        let spec = spec_1d("1/(2 + sin(2*pi*y1))", "2 + sin(2*pi*y1)");
        let stats = SlowStatistics {
            minimizer: vec![0.0],
            c0: 1.5,
            hessian: vec![2.0],
            hessian_min_eig: 2.0,
            grad_norm: 0.0,
            n_quad: 64,
        };
        let g = TorusGrid::new(1, 32);
        let cell4 = solve_cell_fourth(&spec, &[0.0], g, DEFAULT_TOL).unwrap();

        let s1 = scaling(ParameterPoint::new(0.0, 2.0).unwrap(), 1).unwrap();
        let op = build_effective_operator(
            &s1,
            &spec,
            &CellSolutions { fourth: Some(&cell4), ..Default::default() },
            &stats,
        )
        .unwrap();
        assert_eq!(op.form, EffectiveForm::FourthOrder);
        assert!(op.tensors.b_eff.is_none());

        let s2 = scaling(ParameterPoint::new(1.0 / 3.0, 1.0).unwrap(), 1).unwrap();
        let op = build_effective_operator(
            &s2,
            &spec,
            &CellSolutions { fourth: Some(&cell4), ..Default::default() },
            &stats,
        )
        .unwrap();
        assert_eq!(op.form, EffectiveForm::FourthPlusSecond);
        // plain average of 2 + sin is 2
        assert!((op.tensors.b_eff.as_ref().unwrap()[0] - 2.0).abs() < 1e-10);

        let s3 = scaling(ParameterPoint::new(1.0, 2.0).unwrap(), 1).unwrap();
        let op = build_effective_operator(&s3, &spec, &CellSolutions::default(), &stats).unwrap();
        assert_eq!(op.form, EffectiveForm::SecondOrder);
        assert!((op.tensors.b_eff.as_ref().unwrap()[0] - 2.0).abs() < 1e-10);
    }
}
