//! Locally periodic coefficient fields a_ijkl(x,y), b_ij(x,y), c(x,y) and
//! the slow-variable statistics of c: its local average over the torus,
//! the minimizer, and the Hessian there.

use crate::error::{Error, Result};
use crate::expr::Expression;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const PERIODICITY_TOL: f64 = 1e-12;
pub const DEFAULT_N_QUAD: usize = 64;

/// Axis-aligned box domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<BoxDomain> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Config("domain bounds must have equal, nonzero dimension".into()));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(lo < hi) {
                return Err(Error::Config(format!("empty domain side [{lo}, {hi}]")));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(xi, (lo, hi))| xi >= lo && xi <= hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }
}

pub fn tensor_index(d: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * d + j) * d + k) * d + l
}

pub fn matrix_index(d: usize, i: usize, j: usize) -> usize {
    i * d + j
}

/// The coefficient triple (a, b, c) on Omega x T^d.
///
/// Construction checks 1-periodicity in every fast direction; symmetry,
/// ellipticity and positivity are estimated by `verify_hypotheses` and
/// reported rather than assumed.
#[derive(Debug, Clone)]
pub struct CoefficientSpec {
    pub dim: usize,
    pub domain: BoxDomain,
    /// Rank-4 field, d^4 entries indexed by `tensor_index`.
    pub a: Vec<Expression>,
    /// Rank-2 field, d^2 entries indexed by `matrix_index`.
    pub b: Vec<Expression>,
    pub c: Expression,
}

impl CoefficientSpec {
    pub fn new(
        dim: usize,
        domain: BoxDomain,
        a: Vec<Expression>,
        b: Vec<Expression>,
        c: Expression,
    ) -> Result<CoefficientSpec> {
        if dim == 0 || dim > 2 {
            return Err(Error::Config(format!("dimension {dim} not supported (d must be 1 or 2)")));
        }
        if domain.dim() != dim {
            return Err(Error::Config("domain dimension does not match `dimension`".into()));
        }
        if a.len() != dim * dim * dim * dim {
            return Err(Error::Config(format!(
                "rank-4 field needs {} entries, got {}",
                dim * dim * dim * dim,
                a.len()
            )));
        }
        if b.len() != dim * dim {
            return Err(Error::Config(format!(
                "rank-2 field needs {} entries, got {}",
                dim * dim,
                b.len()
            )));
        }
        for (name, e) in a
            .iter()
            .enumerate()
            .map(|(idx, e)| (format!("a[{idx}]"), e))
            .chain(b.iter().enumerate().map(|(idx, e)| (format!("b[{idx}]"), e)))
            .chain(std::iter::once(("c".to_string(), &c)))
        {
            let (mx, my) = e.max_indices();
            if mx > dim || my > dim {
                return Err(Error::Config(format!(
                    "field {name} references variables beyond dimension {dim}"
                )));
            }
            check_periodic(&name, e, dim, &domain)?;
        }
        Ok(CoefficientSpec { dim, domain, a, b, c })
    }

    pub fn a_at(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let yw = wrap(y);
        self.a
            .iter()
            .map(|e| finite("a", e.eval(x, &yw)?, x, y))
            .collect()
    }

    pub fn b_at(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let yw = wrap(y);
        self.b
            .iter()
            .map(|e| finite("b", e.eval(x, &yw)?, x, y))
            .collect()
    }

    pub fn c_at(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let yw = wrap(y);
        finite("c", self.c.eval(x, &yw)?, x, y)
    }

    /// Local average of c(x, .) over the unit torus by the periodic
    /// trapezoid rule with `n_quad` points per dimension.
    pub fn local_average_c(&self, x: &[f64], n_quad: usize) -> Result<f64> {
        assert!(n_quad >= 2, "n_quad must be at least 2");
        let d = self.dim;
        let mut sum = 0.0;
        let total = n_quad.pow(d as u32);
        let mut y = vec![0.0; d];
        for flat in 0..total {
            let mut rem = flat;
            for yi in y.iter_mut() {
                *yi = (rem % n_quad) as f64 / n_quad as f64;
                rem /= n_quad;
            }
            sum += self.c_at(x, &y)?;
        }
        Ok(sum / total as f64)
    }

    /// Deterministic sampled check of the symmetry, ellipticity and
    /// positivity hypotheses. Violations are reported, never thrown.
    pub fn verify_hypotheses(&self, samples: usize, seed: u64) -> Result<HypothesisReport> {
        assert!(samples >= 1);
        let d = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lambda = f64::INFINITY;
        let mut lambda_prime = f64::INFINITY;
        let mut min_c = f64::INFINITY;
        let mut sym_dev_a: f64 = 0.0;
        let mut sym_dev_b: f64 = 0.0;
        for _ in 0..samples {
            let x: Vec<f64> = self
                .domain
                .lower
                .iter()
                .zip(&self.domain.upper)
                .map(|(lo, hi)| rng.gen_range(*lo..*hi))
                .collect();
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a = self.a_at(&x, &y)?;
            let b = self.b_at(&x, &y)?;
            min_c = min_c.min(self.c_at(&x, &y)?);

            for i in 0..d {
                for j in 0..d {
                    sym_dev_b = sym_dev_b
                        .max((b[matrix_index(d, i, j)] - b[matrix_index(d, j, i)]).abs());
                    for k in 0..d {
                        for l in 0..d {
                            sym_dev_a = sym_dev_a.max(
                                (a[tensor_index(d, i, j, k, l)] - a[tensor_index(d, k, l, i, j)])
                                    .abs(),
                            );
                        }
                    }
                }
            }

            // Rayleigh quotient of a over a random matrix direction.
            let xi: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm2: f64 = xi.iter().map(|v| v * v).sum();
            if norm2 > 1e-12 {
                let mut q = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        for k in 0..d {
                            for l in 0..d {
                                q += a[tensor_index(d, i, j, k, l)]
                                    * xi[matrix_index(d, i, j)]
                                    * xi[matrix_index(d, k, l)];
                            }
                        }
                    }
                }
                lambda = lambda.min(q / norm2);
            }

            let eta: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let enorm2: f64 = eta.iter().map(|v| v * v).sum();
            if enorm2 > 1e-12 {
                let mut q = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        q += b[matrix_index(d, i, j)] * eta[i] * eta[j];
                    }
                }
                lambda_prime = lambda_prime.min(q / enorm2);
            }
        }
        Ok(HypothesisReport {
            lambda_est: lambda,
            lambda_prime_est: lambda_prime,
            symmetry_ok: sym_dev_a <= 1e-12 && sym_dev_b <= 1e-12,
            symmetry_deviation: sym_dev_a.max(sym_dev_b),
            positivity_ok: min_c > 0.0,
            min_c,
            ellipticity_ok: lambda > 0.0 && lambda_prime > 0.0,
            samples,
            seed,
        })
    }

    /// Newton search for the minimizer of the local average of c, with a
    /// coarse grid scan over Omega as fallback starting point. Derivatives
    /// use central differences with step 1e-4 * diam(Omega).
    pub fn find_min_hessian(&self, x0: &[f64], tol: f64) -> Result<SlowStatistics> {
        let d = self.dim;
        let n_quad = DEFAULT_N_QUAD;
        let h = 1e-4 * self.domain.diameter();
        let cbar = |x: &[f64]| self.local_average_c(x, n_quad);

        let max_iter = 100;
        let mut x = x0.to_vec();
        if !self.domain.contains(&x) {
            x = self.domain.center();
        }
        let mut converged = false;
        for _ in 0..max_iter {
            let g = fd_gradient(&cbar, &x, h)?;
            let gn = norm(&g);
            if gn <= tol {
                converged = true;
                break;
            }
            let hess = fd_hessian(&cbar, &x, h)?;
            let step = solve_small(&hess, &g, d)
                .ok_or(Error::IndefiniteHessian(smallest_eig_sym(&hess, d)))?;
            let mut xn: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - si).collect();
            if !self.domain.contains(&xn) {
                // Newton left the box: restart from a coarse grid scan.
                xn = self.grid_scan_min(&cbar, 17)?;
            }
            x = xn;
        }
        if !converged {
            // One retry from the grid-scan minimum.
            x = self.grid_scan_min(&cbar, 33)?;
            for _ in 0..max_iter {
                let g = fd_gradient(&cbar, &x, h)?;
                if norm(&g) <= tol {
                    converged = true;
                    break;
                }
                let hess = fd_hessian(&cbar, &x, h)?;
                let step = solve_small(&hess, &g, d)
                    .ok_or(Error::IndefiniteHessian(smallest_eig_sym(&hess, d)))?;
                x = x.iter().zip(&step).map(|(xi, si)| xi - si).collect();
            }
            if !converged {
                return Err(Error::MinSearchDiverged(2 * max_iter));
            }
        }

        let mut hess = fd_hessian(&cbar, &x, h)?;
        // Exact symmetrization; the off-diagonal stencils commute up to roundoff.
        for i in 0..d {
            for j in 0..i {
                let avg = 0.5 * (hess[i * d + j] + hess[j * d + i]);
                hess[i * d + j] = avg;
                hess[j * d + i] = avg;
            }
        }
        let min_eig = smallest_eig_sym(&hess, d);
        if min_eig <= 0.0 {
            return Err(Error::IndefiniteHessian(min_eig));
        }
        let g = fd_gradient(&cbar, &x, h)?;
        Ok(SlowStatistics {
            minimizer: x.clone(),
            c0: cbar(&x)?,
            hessian: hess,
            hessian_min_eig: min_eig,
            grad_norm: norm(&g),
            n_quad,
        })
    }

    fn grid_scan_min(
        &self,
        cbar: &impl Fn(&[f64]) -> Result<f64>,
        n: usize,
    ) -> Result<Vec<f64>> {
        let d = self.dim;
        let mut best = self.domain.center();
        let mut best_val = cbar(&best)?;
        let total = n.pow(d as u32);
        let mut x = vec![0.0; d];
        for flat in 0..total {
            let mut rem = flat;
            for (xi, (lo, hi)) in x
                .iter_mut()
                .zip(self.domain.lower.iter().zip(&self.domain.upper))
            {
                let t = (rem % n) as f64 / (n - 1) as f64;
                *xi = lo + t * (hi - lo);
                rem /= n;
            }
            let v = cbar(&x)?;
            if v < best_val {
                best_val = v;
                best = x.clone();
            }
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub lambda_est: f64,
    pub lambda_prime_est: f64,
    pub symmetry_ok: bool,
    pub symmetry_deviation: f64,
    pub positivity_ok: bool,
    pub min_c: f64,
    pub ellipticity_ok: bool,
    pub samples: usize,
    pub seed: u64,
}

/// Statistics of the slow variable: minimizer of the local average of c,
/// its value there, and the Hessian.
#[derive(Debug, Clone, Serialize)]
pub struct SlowStatistics {
    pub minimizer: Vec<f64>,
    pub c0: f64,
    /// Row-major d x d.
    pub hessian: Vec<f64>,
    pub hessian_min_eig: f64,
    pub grad_norm: f64,
    pub n_quad: usize,
}

fn wrap(y: &[f64]) -> Vec<f64> {
    y.iter().map(|v| v - v.floor()).collect()
}

fn finite(field: &str, v: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            field: field.to_string(),
            x: x.to_vec(),
            y: y.to_vec(),
        })
    }
}

fn check_periodic(name: &str, e: &Expression, dim: usize, domain: &BoxDomain) -> Result<()> {
    if !e.depends_on_y() {
        return Ok(());
    }
    let n = 7;
    for dir in 0..dim {
        let mut worst: f64 = 0.0;
        for sx in 0..n {
            let x: Vec<f64> = domain
                .lower
                .iter()
                .zip(&domain.upper)
                .map(|(lo, hi)| lo + (sx as f64 + 0.5) / n as f64 * (hi - lo))
                .collect();
            for sy in 0..n {
                let mut y = vec![0.37; dim];
                y[dir] = sy as f64 / n as f64;
                let mut y_shift = y.clone();
                y_shift[dir] += 1.0;
                let v0 = e.eval(&x, &y)?;
                let v1 = e.eval(&x, &y_shift)?;
                worst = worst.max((v0 - v1).abs() / v0.abs().max(1.0));
            }
        }
        if worst > PERIODICITY_TOL {
            return Err(Error::NotPeriodic {
                field: name.to_string(),
                dir: dir + 1,
                deviation: worst,
            });
        }
    }
    Ok(())
}

fn fd_gradient(f: &impl Fn(&[f64]) -> Result<f64>, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp)? - f(&xm)?) / (2.0 * h);
    }
    Ok(g)
}

fn fd_hessian(f: &impl Fn(&[f64]) -> Result<f64>, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let d = x.len();
    let mut hess = vec![0.0; d * d];
    let f0 = f(x)?;
    for i in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        hess[i * d + i] = (f(&xp)? - 2.0 * f0 + f(&xm)?) / (h * h);
        for j in 0..i {
            let mut xpp = x.to_vec();
            let mut xpm = x.to_vec();
            let mut xmp = x.to_vec();
            let mut xmm = x.to_vec();
            xpp[i] += h;
            xpp[j] += h;
            xpm[i] += h;
            xpm[j] -= h;
            xmp[i] -= h;
            xmp[j] += h;
            xmm[i] -= h;
            xmm[j] -= h;
            let v = (f(&xpp)? - f(&xpm)? - f(&xmp)? + f(&xmm)?) / (4.0 * h * h);
            hess[i * d + j] = v;
            hess[j * d + i] = v;
        }
    }
    Ok(hess)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve the small SPD system m s = g for d <= 2; None if not positive definite.
fn solve_small(m: &[f64], g: &[f64], d: usize) -> Option<Vec<f64>> {
    match d {
        1 => {
            if m[0] <= 0.0 {
                None
            } else {
                Some(vec![g[0] / m[0]])
            }
        }
        2 => {
            let det = m[0] * m[3] - m[1] * m[2];
            if m[0] <= 0.0 || det <= 0.0 {
                return None;
            }
            Some(vec![
                (m[3] * g[0] - m[1] * g[1]) / det,
                (-m[2] * g[0] + m[0] * g[1]) / det,
            ])
        }
        _ => None,
    }
}

pub(crate) fn smallest_eig_sym(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0],
        2 => {
            let tr = m[0] + m[3];
            let det = m[0] * m[3] - m[1] * m[2];
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            tr / 2.0 - disc
        }
        _ => unreachable!("d <= 2"),
    }
}
