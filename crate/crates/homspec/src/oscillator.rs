//! Eigensolver for the constant-coefficient effective problems on R^d,
//! truncated to a box with clamped boundary conditions, plus the
//! analytic harmonic-oscillator oracle used to validate it.

use crate::banded::{shift_invert_lanczos, BandedMatrix, LANCZOS_TOL};
use crate::coeffield::{matrix_index, tensor_index};
use crate::effective::EffectiveOperator;
use crate::error::{Error, Result};
use crate::regions::EffectiveForm;
use crate::stencil::{first_derivative, second_derivative, BandOp};
use nalgebra::DMatrix;
use serde::Serialize;

/// Box (-L, L)^d with N subintervals per dimension; unknowns live on
/// the N - 1 interior nodes, with clamped conditions imposed by zero
/// extension.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncatedDomain {
    pub half_width: f64,
    pub points: usize,
}

impl TruncatedDomain {
    pub fn new(half_width: f64, points: usize) -> Result<TruncatedDomain> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Config(format!(
                "box half-width must be positive, got {half_width}"
            )));
        }
        if points < 16 {
            return Err(Error::Config(format!(
                "need at least 16 grid points per dimension, got {points}"
            )));
        }
        Ok(TruncatedDomain { half_width, points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn interior(&self) -> usize {
        self.points - 1
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (1..self.points)
            .map(|i| -self.half_width + i as f64 * h)
            .collect()
    }

    /// Ratio of the boundary potential to the target eigenvalue scale;
    /// the default policy wants this at least 50.
    pub fn potential_margin(&self, hessian: &[f64], dim: usize, eta_estimate: f64) -> f64 {
        let lam = crate::coeffield::smallest_eig_sym(hessian, dim);
        0.5 * lam * self.half_width * self.half_width / eta_estimate.max(1e-300)
    }
}

/// Formal accuracy of the difference stencils. `Four` is the default;
/// `Two` reproduces the textbook [-1, 2, -1]/h^2 row structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StencilOrder {
    Two,
    Four,
}

impl StencilOrder {
    fn points(self) -> usize {
        match self {
            StencilOrder::Two => 2,
            StencilOrder::Four => 4,
        }
    }
}

impl Default for StencilOrder {
    fn default() -> Self {
        StencilOrder::Four
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending eigenvalues of the truncated effective problem.
    pub values: Vec<f64>,
    /// Eigenvectors on the interior grid, normalized to unit discrete
    /// L2 norm (h^d quadrature).
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub domain: TruncatedDomain,
    pub order: StencilOrder,
}

fn second_difference_ops(d: usize, n1: usize, h: f64, ord: usize) -> Vec<BandOp> {
    // flattened rank-2 table of discrete second partials
    let d2 = second_derivative(n1, h, ord);
    let c1 = first_derivative(n1, h, ord);
    let id = BandOp::identity(n1);
    match d {
        1 => vec![d2],
        2 => {
            let g11 = d2.kron(&id);
            let g22 = id.kron(&d2);
            let g12 = c1.kron(&c1);
            vec![g11, g12.clone(), g12, g22]
        }
        _ => unreachable!("dimension checked upstream"),
    }
}

/// Assemble the symmetric banded discretization of the effective
/// operator on the truncated box.
pub fn discretize_effective(
    op: &EffectiveOperator,
    dom: TruncatedDomain,
    order: StencilOrder,
) -> Result<BandedMatrix> {
    let d = op.dim;
    if d > 2 {
        return Err(Error::Config("only d <= 2 is supported".into()));
    }
    let n1 = dom.interior();
    let h = dom.spacing();
    let ord = order.points();
    let n = n1.pow(d as u32);

    let g = second_difference_ops(d, n1, h, ord);
    let needs_a = matches!(
        op.form,
        EffectiveForm::FourthOrder | EffectiveForm::FourthPlusSecond
    );
    let needs_b = matches!(
        op.form,
        EffectiveForm::SecondOrder | EffectiveForm::FourthPlusSecond
    );
    // per-dimension stencil reach and the worst flat-index reach of a
    // single discrete second partial; composition for the fourth-order
    // term doubles it
    let r = ord / 2;
    let single = match d {
        1 => r,
        _ => r * n1 + r,
    };
    let reach = if needs_a { 2 * single } else { single };
    let mut acc = BandOp::zeros(n, reach.min(n - 1), reach.min(n - 1));

    if needs_a {
        let a = op
            .tensors
            .a_eff
            .as_ref()
            .ok_or_else(|| Error::MissingCorrector("fourth-order tensor".into()))?;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let coeff = a[tensor_index(d, i, j, k, l)];
                        if coeff != 0.0 {
                            let prod = g[i * d + j].mul(&g[k * d + l]);
                            acc.add_assign(&prod, coeff);
                        }
                    }
                }
            }
        }
    }
    if needs_b {
        let b = op
            .tensors
            .b_eff
            .as_ref()
            .ok_or_else(|| Error::MissingCorrector("second-order matrix".into()))?;
        for i in 0..d {
            for j in 0..d {
                let coeff = b[matrix_index(d, i, j)];
                if coeff == 0.0 {
                    continue;
                }
                if i == j {
                    // staggered form: -b_ii d^2/dz_i^2 directly
                    acc.add_assign(&g[i * d + i], -coeff);
                } else {
                    // centered cross difference, antisymmetric factors
                    acc.add_assign(&g[i * d + j], -coeff);
                }
            }
        }
    }

    let mut m = acc.into_symmetric();

    // quadratic potential, diagonal by pointwise multiplication
    let nodes = dom.nodes();
    let hess = &op.tensors.hessian;
    for flat in 0..n {
        let z: Vec<f64> = match d {
            1 => vec![nodes[flat]],
            _ => vec![nodes[flat / n1], nodes[flat % n1]],
        };
        let mut pot = 0.0;
        for i in 0..d {
            for j in 0..d {
                pot += hess[matrix_index(d, i, j)] * z[i] * z[j];
            }
        }
        m.add(flat, flat, 0.5 * pot);
    }
    Ok(m)
}

pub const OSCILLATOR_SEED: u64 = 0x05c1;

/// K smallest eigenpairs of the truncated effective problem via
/// shift-invert Lanczos at shift zero.
pub fn solve_oscillator(
    op: &EffectiveOperator,
    dom: TruncatedDomain,
    k: usize,
    order: StencilOrder,
) -> Result<SpectrumResult> {
    let m = discretize_effective(op, dom, order)?;
    let pairs = shift_invert_lanczos(&m, 0.0, k, OSCILLATOR_SEED, LANCZOS_TOL)?;
    let h = dom.spacing();
    let scale = h.powf(op.dim as f64 / 2.0);
    let vectors: Vec<Vec<f64>> = pairs
        .vectors
        .into_iter()
        .map(|mut v| {
            // unit vectors from Lanczos -> unit discrete L2 norm
            v.iter_mut().for_each(|x| *x /= scale);
            v
        })
        .collect();
    Ok(SpectrumResult {
        values: pairs.values,
        vectors,
        residuals: pairs.residuals,
        iterations: pairs.iterations,
        domain: dom,
        order,
    })
}

/// k-th smallest eigenvalue of -div(b grad v) + (1/2)(Hz.z) v on R^d,
/// from the frequencies of the pencil: the eigenvalues mu_i of
/// b^{1/2} H b^{1/2} give the spectrum { sum_i (2n_i - 1) sqrt(mu_i/2) }.
pub fn analytic_ho_oracle(b_eff: &[f64], hessian: &[f64], dim: usize, k: usize) -> Result<f64> {
    assert!(k >= 1);
    if dim > 2 {
        return Err(Error::Config("oracle supports d <= 2".into()));
    }
    let b = DMatrix::from_fn(dim, dim, |i, j| b_eff[matrix_index(dim, i, j)]);
    let h = DMatrix::from_fn(dim, dim, |i, j| hessian[matrix_index(dim, i, j)]);
    let be = b.clone().symmetric_eigen();
    if be.eigenvalues.iter().any(|&e| e <= 0.0) {
        return Err(Error::CoercivityFailure(
            be.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min),
        ));
    }
    let sqrt_b = &be.eigenvectors
        * DMatrix::from_diagonal(&be.eigenvalues.map(f64::sqrt))
        * be.eigenvectors.transpose();
    let m = &sqrt_b * h * &sqrt_b;
    let me = m.symmetric_eigen();
    let mut omegas: Vec<f64> = me.eigenvalues.iter().map(|&mu| (mu / 2.0).sqrt()).collect();
    if omegas.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::IndefiniteHessian(
            me.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min),
        ));
    }
    omegas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut levels = Vec::new();
    match dim {
        1 => {
            for n in 1..=k {
                levels.push((2 * n - 1) as f64 * omegas[0]);
            }
        }
        _ => {
            for n1 in 1..=k {
                for n2 in 1..=k {
                    levels.push((2 * n1 - 1) as f64 * omegas[0] + (2 * n2 - 1) as f64 * omegas[1]);
                }
            }
        }
    }
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(levels[k - 1])
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub half_width: f64,
    pub points: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<StudyRow>,
    /// Largest eigenvalue change between the last two rows.
    pub last_change: f64,
    pub flagged: bool,
}

/// Solve across a refinement schedule and flag when the last
/// refinement still moves an eigenvalue by more than `tol`.
pub fn convergence_study(
    op: &EffectiveOperator,
    domains: &[TruncatedDomain],
    k: usize,
    order: StencilOrder,
    tol: f64,
) -> Result<ConvergenceStudy> {
    let mut rows = Vec::with_capacity(domains.len());
    for dom in domains {
        let s = solve_oscillator(op, *dom, k, order)?;
        rows.push(StudyRow {
            half_width: dom.half_width,
            points: dom.points,
            values: s.values,
        });
    }
    let mut last_change = 0.0;
    if rows.len() >= 2 {
        let a = &rows[rows.len() - 2].values;
        let b = &rows[rows.len() - 1].values;
        last_change = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
    }
    Ok(ConvergenceStudy {
        rows,
        last_change,
        flagged: last_change > tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::EffectiveTensors;

    fn make_op(
        dim: usize,
        form: EffectiveForm,
        a: Option<Vec<f64>>,
        b: Option<Vec<f64>>,
        hessian: Vec<f64>,
    ) -> EffectiveOperator {
        EffectiveOperator {
            form,
            dim,
            tensors: EffectiveTensors {
                a_eff: a,
                b_eff: b,
                hessian,
                c0: 0.0,
                a_coercivity: None,
                b_coercivity: None,
                a_symmetry_deviation: None,
                b_symmetry_deviation: None,
            },
            center: vec![0.0; dim],
        }
    }

    #[test]
    fn second_order_stencil_is_textbook_laplacian() {
        let op = make_op(1, EffectiveForm::SecondOrder, None, Some(vec![1.0]), vec![0.0]);
        let dom = TruncatedDomain::new(1.0, 16).unwrap();
        let m = discretize_effective(&op, dom, StencilOrder::Two).unwrap();
        let h = dom.spacing();
        let i = 7;
        assert!((m.get(i, i) - 2.0 / (h * h)).abs() < 1e-12);
        assert!((m.get(i, i + 1) + 1.0 / (h * h)).abs() < 1e-12);
        assert!((m.get(i, i - 1) + 1.0 / (h * h)).abs() < 1e-12);
        assert_eq!(m.get(i, i + 2), 0.0);
    }

    #[test]
    fn potential_vanishes_at_origin() {
        let op = make_op(1, EffectiveForm::SecondOrder, None, Some(vec![0.0]), vec![2.0]);
        let dom = TruncatedDomain::new(1.0, 16).unwrap();
        let m = discretize_effective(&op, dom, StencilOrder::Two).unwrap();
        // node index 7 sits at z = 0
        assert_eq!(m.get(7, 7), 0.0);
        // and grows quadratically away from it
        let h = dom.spacing();
        assert!((m.get(9, 9) - (2.0 * h) * (2.0 * h)).abs() < 1e-12);
    }

    #[test]
    fn biharmonic_row_from_composition() {
        let op = make_op(1, EffectiveForm::FourthOrder, Some(vec![1.0]), None, vec![0.0]);
        let dom = TruncatedDomain::new(1.0, 16).unwrap();
        let m = discretize_effective(&op, dom, StencilOrder::Two).unwrap();
        let h4 = dom.spacing().powi(4);
        let i = 7;
        for (off, want) in [(0i64, 6.0), (1, -4.0), (2, 1.0)] {
            let j = (i as i64 + off) as usize;
            assert!((m.get(i, j) - want / h4).abs() < 1e-9, "offset {off}");
        }
    }

    #[test]
    fn harmonic_oscillator_levels() {
        let op = make_op(1, EffectiveForm::SecondOrder, None, Some(vec![1.0]), vec![2.0]);
        let dom = TruncatedDomain::new(12.0, 1024).unwrap();
        let s = solve_oscillator(&op, dom, 4, StencilOrder::Four).unwrap();
        for (k, want) in [1.0, 3.0, 5.0, 7.0].iter().enumerate() {
            assert!(
                (s.values[k] - want).abs() < 1e-5,
                "eta_{}: {} vs {want}",
                k + 1,
                s.values[k]
            );
        }
        for v in &s.values {
            assert!(*v > 0.0);
        }
    }

    #[test]
    fn scaled_oscillator_levels() {
        let op = make_op(1, EffectiveForm::SecondOrder, None, Some(vec![4.0]), vec![8.0]);
        let dom = TruncatedDomain::new(8.0, 768).unwrap();
        let s = solve_oscillator(&op, dom, 2, StencilOrder::Four).unwrap();
        assert!((s.values[0] - 4.0).abs() < 1e-5, "{}", s.values[0]);
        assert!((s.values[1] - 12.0).abs() < 1e-5, "{}", s.values[1]);
    }

    #[test]
    fn fourth_order_cross_discretization() {
        let op = make_op(1, EffectiveForm::FourthOrder, Some(vec![1.0]), None, vec![2.0]);
        let a = solve_oscillator(
            &op,
            TruncatedDomain::new(10.0, 512).unwrap(),
            1,
            StencilOrder::Four,
        )
        .unwrap();
        let b = solve_oscillator(
            &op,
            TruncatedDomain::new(14.0, 2048).unwrap(),
            1,
            StencilOrder::Four,
        )
        .unwrap();
        assert!(
            (a.values[0] - b.values[0]).abs() < 1e-5,
            "{} vs {}",
            a.values[0],
            b.values[0]
        );
    }

    #[test]
    fn oracle_closed_forms() {
        assert!((analytic_ho_oracle(&[1.0], &[2.0], 1, 1).unwrap() - 1.0).abs() < 1e-14);
        assert!((analytic_ho_oracle(&[1.0], &[2.0], 1, 4).unwrap() - 7.0).abs() < 1e-14);
        assert!((analytic_ho_oracle(&[4.0], &[8.0], 1, 1).unwrap() - 4.0).abs() < 1e-12);
        assert!((analytic_ho_oracle(&[4.0], &[8.0], 1, 2).unwrap() - 12.0).abs() < 1e-12);
        // d = 2 isotropic: 2, 4, 4, 6, ...
        let b = [1.0, 0.0, 0.0, 1.0];
        let h = [2.0, 0.0, 0.0, 2.0];
        assert!((analytic_ho_oracle(&b, &h, 2, 1).unwrap() - 2.0).abs() < 1e-12);
        assert!((analytic_ho_oracle(&b, &h, 2, 2).unwrap() - 4.0).abs() < 1e-12);
        assert!((analytic_ho_oracle(&b, &h, 2, 3).unwrap() - 4.0).abs() < 1e-12);
        assert!(analytic_ho_oracle(&[-1.0], &[2.0], 1, 1).is_err());
    }

    #[test]
    fn isotropic_2d_degeneracy_and_oracle() {
        let op = make_op(
            2,
            EffectiveForm::SecondOrder,
            None,
            Some(vec![1.0, 0.0, 0.0, 1.0]),
            vec![2.0, 0.0, 0.0, 2.0],
        );
        let dom = TruncatedDomain::new(7.0, 96).unwrap();
        let s = solve_oscillator(&op, dom, 3, StencilOrder::Four).unwrap();
        assert!((s.values[1] - s.values[2]).abs() < 1e-6);
        assert!((s.values[0] - 2.0).abs() < 1e-3, "{}", s.values[0]);
    }

    #[test]
    fn eigenvectors_orthonormal_in_l2() {
        let op = make_op(1, EffectiveForm::SecondOrder, None, Some(vec![1.0]), vec![2.0]);
        let dom = TruncatedDomain::new(10.0, 400).unwrap();
        let s = solve_oscillator(&op, dom, 3, StencilOrder::Four).unwrap();
        let h = dom.spacing();
        for i in 0..3 {
            for j in 0..3 {
                let g: f64 = s.vectors[i]
                    .iter()
                    .zip(&s.vectors[j])
                    .map(|(a, b)| a * b * h)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-8, "gram[{i}][{j}] = {g}");
            }
        }
    }

    #[test]
    fn dirichlet_bracketing_in_box_size() {
        let op = make_op(1, EffectiveForm::SecondOrder, None, Some(vec![1.0]), vec![2.0]);
        // same spacing, nested boxes
        let small = solve_oscillator(
            &op,
            TruncatedDomain::new(3.0, 96).unwrap(),
            2,
            StencilOrder::Four,
        )
        .unwrap();
        let large = solve_oscillator(
            &op,
            TruncatedDomain::new(6.0, 192).unwrap(),
            2,
            StencilOrder::Four,
        )
        .unwrap();
        for k in 0..2 {
            assert!(large.values[k] <= small.values[k] + 1e-8);
        }
    }

    #[test]
    fn study_measures_second_order_rate() {
        let op = make_op(1, EffectiveForm::SecondOrder, None, Some(vec![1.0]), vec![2.0]);
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for n in [128usize, 256, 512] {
            let dom = TruncatedDomain::new(12.0, n).unwrap();
            let s = solve_oscillator(&op, dom, 1, StencilOrder::Two).unwrap();
            errs.push((s.values[0] - 1.0).abs());
            hs.push(dom.spacing());
        }
        let slope = (errs[0] / errs[2]).ln() / (hs[0] / hs[2]).ln();
        assert!(slope >= 1.9, "observed order {slope}, errors {errs:?}");
    }

    #[test]
    fn study_flags_truncation_failure() {
        let op = make_op(1, EffectiveForm::SecondOrder, None, Some(vec![1.0]), vec![2.0]);
        let doms = [
            TruncatedDomain::new(1.0, 64).unwrap(),
            TruncatedDomain::new(2.0, 128).unwrap(),
        ];
        let study = convergence_study(&op, &doms, 1, StencilOrder::Four, 1e-6).unwrap();
        assert!(study.flagged, "change {}", study.last_change);

        let doms = [
            TruncatedDomain::new(12.0, 1024).unwrap(),
            TruncatedDomain::new(12.0, 2048).unwrap(),
        ];
        let study = convergence_study(&op, &doms, 1, StencilOrder::Four, 1e-6).unwrap();
        assert!(!study.flagged, "change {}", study.last_change);
    }

    #[test]
    fn potential_margin_policy() {
        let dom = TruncatedDomain::new(12.0, 1024).unwrap();
        assert!(dom.potential_margin(&[2.0], 1, 1.0) >= 50.0);
        let tight = TruncatedDomain::new(2.0, 64).unwrap();
        assert!(tight.potential_margin(&[2.0], 1, 1.0) < 50.0);
    }
}
