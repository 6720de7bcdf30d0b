//! Epsilon-sweep orchestration: direct spectra against effective
//! spectra, convergence-rate fits, localization measurements, and the
//! oscillating-integral law check.

use crate::cellsolve::{solve_cell_fourth, solve_cell_mixed, solve_cell_second, DEFAULT_TOL};
use crate::coeffield::CoefficientSpec;
use crate::direct::{solve_direct, DirectProblem, POINTS_PER_PERIOD};
use crate::effective::{build_effective_operator, CellSolutions, EffectiveOperator};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::fourier::TorusGrid;
use crate::oscillator::{solve_oscillator, StencilOrder, TruncatedDomain};
use crate::regions::{scaling, ParameterPoint, Region, RegionScaling};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct RateEstimate {
    pub slope: f64,
    /// Standard-error half-width of the fitted slope.
    pub half_width: f64,
}

/// Least-squares slope of log e against log eps.
pub fn estimate_rate(points: &[(f64, f64)]) -> Result<RateEstimate> {
    if points.len() < 3 {
        return Err(Error::Config(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(eps, e)| eps <= 0.0 || e <= 0.0) {
        return Err(Error::Config(
            "converged below tolerance: non-positive error in rate fit".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let dof = (xs.len() - 2).max(1) as f64;
    let half_width = (ss_res / dof / sxx).sqrt();
    Ok(RateEstimate { slope, half_width })
}

/// Smallest R with at least `mass` of the squared mass inside
/// |x - x*| <= R eps^gamma.
pub fn localization_metric(
    nodes: &[f64],
    u: &[f64],
    eps: f64,
    scaling: &RegionScaling,
    x_star: f64,
    mass: f64,
) -> Result<f64> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::Config(format!("mass fraction must be in (0,1), got {mass}")));
    }
    let total: f64 = u.iter().map(|v| v * v).sum();
    if total <= 0.0 {
        return Err(Error::MassUnreachable {
            mass,
            captured: 0.0,
        });
    }
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&i, &j| {
        let di = (nodes[i] - x_star).abs();
        let dj = (nodes[j] - x_star).abs();
        di.partial_cmp(&dj).unwrap()
    });
    let s = eps.powf(scaling.spatial_exponent);
    let mut captured = 0.0;
    for &i in &order {
        captured += u[i] * u[i];
        if captured >= mass * total {
            return Ok((nodes[i] - x_star).abs() / s);
        }
    }
    Err(Error::MassUnreachable {
        mass,
        captured: captured / total,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub resolution: usize,
    /// Raw eigenvalues of the direct problem.
    pub lambda: Vec<f64>,
    /// Scaled corrections eps^eta (lambda - c0 eps^-shift).
    pub eta_eps: Vec<f64>,
    /// Per-index |eta_eps - eta_effective|.
    pub errors: Vec<f64>,
    /// 99%-mass radius of the ground state at scale eps^gamma.
    pub localization_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub scaling: RegionScaling,
    pub c0: f64,
    pub center: Vec<f64>,
    pub effective_eta: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub rates: Vec<Option<RateEstimate>>,
    /// |eta_1^eps| / (c0 eps^{eta - shift}) at the smallest eps; the
    /// correction must stay lower order than the shift.
    pub shift_dominance_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub k: usize,
    pub mass: f64,
    pub cell_modes: usize,
    pub osc_domain: TruncatedDomain,
    pub order: StencilOrder,
    /// Multiplier on the minimum admissible direct resolution.
    pub resolution_factor: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            k: 1,
            mass: 0.99,
            cell_modes: 64,
            osc_domain: TruncatedDomain {
                half_width: 10.0,
                points: 1024,
            },
            order: StencilOrder::Four,
            resolution_factor: 1.0,
        }
    }
}

/// Solve the effective problem once for the given parameter point.
pub fn effective_pipeline(
    spec: &CoefficientSpec,
    point: ParameterPoint,
    cell_modes: usize,
) -> Result<(RegionScaling, EffectiveOperator)> {
    let reg = scaling(point, spec.dim)?;
    let stats = spec.find_min_hessian(&spec.domain.center(), 1e-10)?;
    let grid = TorusGrid::new(spec.dim, cell_modes);
    let fourth;
    let mixed;
    let second;
    let mut cells = CellSolutions::default();
    match reg.region {
        Region::R1 | Region::R2 => {
            fourth = solve_cell_fourth(spec, &stats.minimizer, grid, DEFAULT_TOL)?;
            cells.fourth = Some(&fourth);
        }
        Region::R4 => {
            mixed = solve_cell_mixed(spec, &stats.minimizer, grid, DEFAULT_TOL)?;
            cells.mixed = Some(&mixed);
        }
        Region::R5 => {
            second = solve_cell_second(spec, &stats.minimizer, grid, DEFAULT_TOL)?;
            cells.second = Some(&second);
        }
        _ => {}
    }
    let op = build_effective_operator(&reg, spec, &cells, &stats)?;
    Ok((reg, op))
}

fn annotate(eps: f64, e: Error) -> Error {
    Error::Config(format!("at eps = {eps}: {e}"))
}

/// Full sweep: one effective solve plus a direct solve per eps, tied
/// together through the region's scaling exponents.
pub fn run_sweep(
    spec: &CoefficientSpec,
    point: ParameterPoint,
    eps_list: &[f64],
    settings: &SweepSettings,
) -> Result<SweepResult> {
    if spec.dim != 1 {
        return Err(Error::Config("sweeps are implemented for d = 1".into()));
    }
    for w in eps_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::Config("eps list must be strictly decreasing".into()));
        }
    }
    let (reg, op) = effective_pipeline(spec, point, settings.cell_modes)?;
    let c0 = op.tensors.c0;
    let x_star = op.center.clone();
    let eff = solve_oscillator(&op, settings.osc_domain, settings.k, settings.order)?;

    let one_point = |eps: f64| -> Result<SweepPoint> {
        let needed =
            (POINTS_PER_PERIOD * spec.domain.diameter() / eps * settings.resolution_factor).ceil()
                as usize;
        let prob =
            DirectProblem::new(spec, point, eps, needed).map_err(|e| annotate(eps, e))?;
        let sol = solve_direct(&prob, settings.k).map_err(|e| annotate(eps, e))?;
        let shift = c0 * eps.powf(-reg.shift_exponent);
        let scale = eps.powf(reg.eta_exponent);
        let eta_eps: Vec<f64> = sol.values.iter().map(|l| scale * (l - shift)).collect();
        let errors: Vec<f64> = eta_eps
            .iter()
            .zip(&eff.values)
            .map(|(a, b)| (a - b).abs())
            .collect();
        let nodes = prob.nodes(0);
        let radius = localization_metric(
            &nodes,
            &sol.vectors[0],
            eps,
            &reg,
            x_star[0],
            settings.mass,
        )
        .map_err(|e| annotate(eps, e))?;
        Ok(SweepPoint {
            epsilon: eps,
            resolution: needed,
            lambda: sol.values,
            eta_eps,
            errors,
            localization_radius: radius,
        })
    };
    // per-eps pipelines are independent; run them in parallel and
    // aggregate in the original order
    let points: Vec<SweepPoint> = std::thread::scope(|scope| {
        let handles: Vec<_> = eps_list
            .iter()
            .map(|&eps| {
                let worker = &one_point;
                scope.spawn(move || worker(eps))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rates = Vec::with_capacity(settings.k);
    for k in 0..settings.k {
        let pts: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p.epsilon, p.errors[k]))
            .collect();
        rates.push(estimate_rate(&pts).ok());
    }
    let last = points.last().expect("non-empty eps list");
    let eps_min = last.epsilon;
    let denom = c0 * eps_min.powf(reg.eta_exponent - reg.shift_exponent);
    let shift_dominance_ratio = last.eta_eps[0].abs() / denom;

    Ok(SweepResult {
        scaling: reg,
        c0,
        center: x_star,
        effective_eta: eff.values,
        points,
        rates,
        shift_dominance_ratio,
    })
}

/// Piecewise-linear tent bump: max(0, 1 - |x - center| / width).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TentBump {
    pub center: f64,
    pub width: f64,
}

impl TentBump {
    pub fn eval(&self, x: f64) -> f64 {
        (1.0 - (x - self.center).abs() / self.width).max(0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MvtReport {
    pub description: String,
    pub u: TentBump,
    pub v: TentBump,
    pub eps: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub slope: Option<RateEstimate>,
}

const MEAN_TOL: f64 = 1e-12;

fn y_mean(g: &Expression, x: f64) -> Result<f64> {
    // periodic trapezoid rule: spectrally accurate in the mode count
    let n = 1024;
    let mut s = 0.0;
    for j in 0..n {
        s += g.eval(&[x], &[j as f64 / n as f64])?;
    }
    Ok(s / n as f64)
}

fn simpson<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, n: usize) -> Result<f64> {
    // n subintervals, forced even
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut s = f(a)? + f(b)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h)?;
    }
    Ok(s * h / 3.0)
}

/// Measure |int g(x, x/eps) u v dx| across eps and fit the power law.
pub fn mvt_check(
    g: &Expression,
    u: TentBump,
    v: TentBump,
    interval: (f64, f64),
    eps_list: &[f64],
) -> Result<MvtReport> {
    // hypothesis: zero mean in the fast variable
    for &x in &[interval.0, 0.5 * (interval.0 + interval.1), interval.1] {
        let m = y_mean(g, x)?;
        if m.abs() > MEAN_TOL {
            return Err(Error::NonzeroMean(m));
        }
    }

    let mut magnitudes = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        // integrate between the kinks of the bump product so each piece
        // is smooth; resolve the microscale well inside each piece
        let mut brk = vec![
            interval.0,
            u.center - u.width,
            u.center,
            u.center + u.width,
            v.center - v.width,
            v.center,
            v.center + v.width,
            interval.1,
        ];
        brk.retain(|&x| x >= interval.0 && x <= interval.1);
        brk.sort_by(|a, b| a.partial_cmp(b).unwrap());
        brk.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let mut total = 0.0;
        for w in brk.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a < 1e-14 {
                continue;
            }
            let n = ((b - a) / eps * 512.0).ceil() as usize;
            let n = n.clamp(64, 4_000_000);
            total += simpson(
                |x| Ok(g.eval(&[x], &[x / eps])? * u.eval(x) * v.eval(x)),
                a,
                b,
                n,
            )?;
        }
        magnitudes.push(total.abs());
    }

    let pts: Vec<(f64, f64)> = eps_list.iter().copied().zip(magnitudes.iter().copied()).collect();
    let slope = estimate_rate(&pts).ok();
    Ok(MvtReport {
        description: g.to_string(),
        u,
        v,
        eps: eps_list.to_vec(),
        magnitudes,
        slope,
    })
}
