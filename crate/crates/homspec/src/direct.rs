//! Assembly and solution of the original eps-dependent Dirichlet
//! eigenproblem on a box, discretized from its bilinear form so the
//! matrix is symmetric, with shift-invert Lanczos near the spectral
//! bottom.

use crate::banded::{shift_invert_lanczos, BandedMatrix, LANCZOS_TOL};
use crate::coeffield::{matrix_index, tensor_index, CoefficientSpec};
use crate::error::{Error, Result};
use crate::regions::{scaling, ParameterPoint, RegionScaling};
use crate::stencil::{first_derivative, second_derivative, BandOp};

/// Points per microscale period required of the grid.
pub const POINTS_PER_PERIOD: f64 = 16.0;

pub struct DirectProblem<'a> {
    pub spec: &'a CoefficientSpec,
    pub point: ParameterPoint,
    pub epsilon: f64,
    /// Subintervals per dimension; unknowns on the interior nodes.
    pub resolution: usize,
}

impl<'a> DirectProblem<'a> {
    pub fn new(
        spec: &'a CoefficientSpec,
        point: ParameterPoint,
        epsilon: f64,
        resolution: usize,
    ) -> Result<DirectProblem<'a>> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        let needed = (POINTS_PER_PERIOD * spec.domain.diameter() / epsilon).ceil() as usize;
        if resolution < needed {
            return Err(Error::ResolutionTooCoarse {
                got: resolution,
                needed,
            });
        }
        Ok(DirectProblem {
            spec,
            point,
            epsilon,
            resolution,
        })
    }

    pub fn interior(&self) -> usize {
        self.resolution - 1
    }

    /// Per-dimension grid spacings.
    pub fn spacings(&self) -> Vec<f64> {
        let d = self.spec.dim;
        (0..d)
            .map(|i| (self.spec.domain.upper[i] - self.spec.domain.lower[i]) / self.resolution as f64)
            .collect()
    }

    /// Interior node coordinates along dimension `i`.
    pub fn nodes(&self, i: usize) -> Vec<f64> {
        let h = self.spacings()[i];
        (1..self.resolution)
            .map(|m| self.spec.domain.lower[i] + m as f64 * h)
            .collect()
    }

    fn unknowns(&self) -> usize {
        self.interior().pow(self.spec.dim as u32)
    }

    fn node_point(&self, flat: usize) -> Vec<f64> {
        let n1 = self.interior();
        match self.spec.dim {
            1 => vec![self.nodes(0)[flat]],
            _ => vec![self.nodes(0)[flat / n1], self.nodes(1)[flat % n1]],
        }
    }
}

pub struct DirectSpectrum {
    pub values: Vec<f64>,
    /// Eigenfunctions on the interior grid, each with discrete L2 norm
    /// squared equal to eps^{norm_exponent}.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub shift: f64,
}

/// Symmetric banded discretization of the bilinear form
/// A_eps(u, v) = int a d2u d2v + eps^-alpha int b du dv + eps^-beta int c u v.
pub fn assemble_direct(prob: &DirectProblem<'_>) -> Result<BandedMatrix> {
    let spec = prob.spec;
    let d = spec.dim;
    if d > 2 {
        return Err(Error::Config("only d <= 2 is supported".into()));
    }
    let n1 = prob.interior();
    let n = prob.unknowns();
    let hs = prob.spacings();
    let eps = prob.epsilon;
    let inv_a = eps.powf(-prob.point.alpha);
    let inv_b = eps.powf(-prob.point.beta);

    // node-sampled coefficient tables
    let mut a_tab = vec![vec![0.0; n]; d * d * d * d];
    let mut b_tab = vec![vec![0.0; n]; d * d];
    let mut c_tab = vec![0.0; n];
    for flat in 0..n {
        let x = prob.node_point(flat);
        let y: Vec<f64> = x.iter().map(|v| v / eps).collect();
        let a = spec.a_at(&x, &y)?;
        let b = spec.b_at(&x, &y)?;
        for (t, row) in a_tab.iter_mut().enumerate() {
            row[flat] = a[t];
        }
        for (t, row) in b_tab.iter_mut().enumerate() {
            row[flat] = b[t];
        }
        c_tab[flat] = spec.c_at(&x, &y)?;
    }

    // discrete second partials (order-2 stencils, zero extension)
    let ops: Vec<BandOp> = match d {
        1 => vec![second_derivative(n1, hs[0], 2)],
        _ => {
            let d2x = second_derivative(n1, hs[0], 2);
            let d2y = second_derivative(n1, hs[1], 2);
            let c1x = first_derivative(n1, hs[0], 2);
            let c1y = first_derivative(n1, hs[1], 2);
            let id = BandOp::identity(n1);
            let g11 = d2x.kron(&id);
            let g22 = id.kron(&d2y);
            let g12 = c1x.kron(&c1y);
            vec![g11, g12.clone(), g12, g22]
        }
    };
    let reach = match d {
        1 => 2,
        _ => 2 * (n1 + 1),
    };
    let mut acc = BandOp::zeros(n, reach.min(n - 1), reach.min(n - 1));

    // fourth-order term: sum over index pairs of G_ij^T diag(a) G_kl
    for ij in 0..d * d {
        for kl in 0..d * d {
            let (i, j) = (ij / d, ij % d);
            let (k, l) = (kl / d, kl % d);
            let w = &a_tab[tensor_index(d, i, j, k, l)];
            if w.iter().all(|&v| v == 0.0) {
                continue;
            }
            let gram = ops[ij].weighted_gram(w, &ops[kl]);
            acc.add_assign(&gram, 1.0);
        }
    }

    // second-order cross terms via centered differences
    if d == 2 {
        let c1x = first_derivative(n1, hs[0], 2);
        let c1y = first_derivative(n1, hs[1], 2);
        let id = BandOp::identity(n1);
        let cx = c1x.kron(&id);
        let cy = id.kron(&c1y);
        let w12 = &b_tab[matrix_index(d, 0, 1)];
        let w21 = &b_tab[matrix_index(d, 1, 0)];
        if w12.iter().any(|&v| v != 0.0) || w21.iter().any(|&v| v != 0.0) {
            let g = cx.weighted_gram(w12, &cy);
            acc.add_assign(&g, inv_a);
            let g = cy.weighted_gram(w21, &cx);
            acc.add_assign(&g, inv_a);
        }
    }

    let mut m = acc.into_symmetric();

    // diagonal second-order terms: midpoint-sampled coefficients on the
    // staggered difference quotient, the classic symmetric form
    for dir in 0..d {
        let h = hs[dir];
        let w = h * h;
        let nodes = prob.nodes(dir);
        let lower = spec.domain.lower[dir];
        let n1 = prob.interior();
        let other = if d == 2 { prob.nodes(1 - dir) } else { Vec::new() };
        let count_other = if d == 2 { n1 } else { 1 };
        for o in 0..count_other {
            for m1 in 0..n1 {
                // midpoints bracketing node m1 along dir
                let xm_lo = if m1 == 0 {
                    lower + 0.5 * h
                } else {
                    0.5 * (nodes[m1 - 1] + nodes[m1])
                };
                let xm_hi = 0.5 * (nodes[m1] + if m1 + 1 < n1 { nodes[m1 + 1] } else { nodes[m1] + h });
                let mk = |xm: f64| -> Result<f64> {
                    let x = match (d, dir) {
                        (1, _) => vec![xm],
                        (2, 0) => vec![xm, other[o]],
                        _ => vec![other[o], xm],
                    };
                    let y: Vec<f64> = x.iter().map(|v| v / eps).collect();
                    Ok(spec.b_at(&x, &y)?[matrix_index(d, dir, dir)])
                };
                let b_lo = mk(xm_lo)?;
                let b_hi = mk(xm_hi)?;
                let flat = |m1: usize| -> usize {
                    match (d, dir) {
                        (1, _) => m1,
                        (2, 0) => m1 * n1 + o,
                        _ => o * n1 + m1,
                    }
                };
                m.add(flat(m1), flat(m1), inv_a * (b_lo + b_hi) / w);
                if m1 + 1 < n1 {
                    m.add(flat(m1 + 1), flat(m1), -inv_a * b_hi / w);
                }
            }
        }
    }

    // potential term
    for flat in 0..n {
        m.add(flat, flat, inv_b * c_tab[flat]);
    }
    Ok(m)
}

pub const DIRECT_SEED: u64 = 0xd1ec;
const SHIFT_RETRIES: usize = 3;

/// Spectral shift sigma = local average of c at its minimizer, scaled
/// by eps^-beta; falls back to the domain center when the minimizer
/// search fails.
pub fn default_shift(prob: &DirectProblem<'_>) -> f64 {
    let x_star = prob
        .spec
        .find_min_hessian(&prob.spec.domain.center(), 1e-10)
        .map(|s| s.minimizer)
        .unwrap_or_else(|_| prob.spec.domain.center());
    let cbar = prob
        .spec
        .local_average_c(&x_star, 64)
        .unwrap_or(0.0)
        .max(0.0);
    cbar * prob.epsilon.powf(-prob.point.beta)
}

/// K smallest eigenpairs of the direct problem, eigenfunctions carrying
/// the region normalization ||u||^2 = eps^{norm_exponent}.
pub fn solve_direct(prob: &DirectProblem<'_>, k: usize) -> Result<DirectSpectrum> {
    let reg: RegionScaling = scaling(prob.point, prob.spec.dim)?;
    let m = assemble_direct(prob)?;
    let sigma0 = default_shift(prob);

    let mut attempt = 0usize;
    let mut pairs = None;
    let mut shift = sigma0;
    while attempt <= SHIFT_RETRIES {
        let sigma = sigma0 * (1.0 - 1e-3 * attempt as f64);
        match shift_invert_lanczos(&m, sigma, k, DIRECT_SEED, LANCZOS_TOL) {
            Ok(p) => {
                shift = sigma;
                pairs = Some(p);
                break;
            }
            Err(Error::FactorizationFailure(_)) => attempt += 1,
            Err(e) => return Err(e),
        }
    }
    let pairs = match pairs {
        Some(p) => p,
        None => {
            // guaranteed positive-definite shift: the potential bounds
            // the quadratic form from below by eps^-beta min c
            let inv_b = prob.epsilon.powf(-prob.point.beta);
            let mut min_c = f64::INFINITY;
            for flat in 0..prob.unknowns() {
                let x = prob.node_point(flat);
                let y: Vec<f64> = x.iter().map(|v| v / prob.epsilon).collect();
                min_c = min_c.min(prob.spec.c_at(&x, &y)?);
            }
            let sigma = 0.99 * inv_b * min_c;
            shift = sigma;
            shift_invert_lanczos(&m, sigma, k, DIRECT_SEED, LANCZOS_TOL)?
        }
    };

    let hd: f64 = prob.spacings().iter().product();
    let target = prob.epsilon.powf(reg.norm_exponent);
    let vectors: Vec<Vec<f64>> = pairs
        .vectors
        .into_iter()
        .map(|mut v| {
            let l2: f64 = v.iter().map(|x| x * x * hd).sum();
            let s = (target / l2).sqrt();
            v.iter_mut().for_each(|x| *x *= s);
            v
        })
        .collect();
    Ok(DirectSpectrum {
        values: pairs.values,
        vectors,
        residuals: pairs.residuals,
        iterations: pairs.iterations,
        shift,
    })
}

/// Resample an eigenfunction onto the localized variable
/// z = (x - x*) / eps^gamma by linear interpolation; zero outside the
/// domain. 1D.
pub fn rescale_eigenfunction(
    nodes: &[f64],
    values: &[f64],
    scaling: &RegionScaling,
    eps: f64,
    x_star: f64,
    z_nodes: &[f64],
) -> Result<Vec<f64>> {
    assert_eq!(nodes.len(), values.len());
    let s = eps.powf(scaling.spatial_exponent);
    let (x0, x1) = (nodes[0], nodes[nodes.len() - 1]);
    let h = if nodes.len() > 1 { nodes[1] - nodes[0] } else { 1.0 };
    let mut any = false;
    let out: Vec<f64> = z_nodes
        .iter()
        .map(|&z| {
            let x = x_star + s * z;
            if x < x0 || x > x1 {
                return 0.0;
            }
            any = true;
            let t = (x - x0) / h;
            let i = (t.floor() as usize).min(nodes.len() - 2);
            let frac = t - i as f64;
            values[i] * (1.0 - frac) + values[i + 1] * frac
        })
        .collect();
    if !any {
        return Err(Error::EmptyOverlap);
    }
    Ok(out)
}
