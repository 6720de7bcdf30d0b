//! TOML run configuration: problem definition, solver settings, and
//! conversion into the solver-facing types.

use crate::coeffield::{BoxDomain, CoefficientSpec};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::oscillator::StencilOrder;
use crate::regions::ParameterPoint;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

/// A scalar that may be written as a number or an exact rational
/// string like "1/3".
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RationalOrFloat {
    Float(f64),
    Text(String),
}

impl RationalOrFloat {
    pub fn value(&self) -> Result<f64> {
        match self {
            RationalOrFloat::Float(v) => Ok(*v),
            RationalOrFloat::Text(s) => {
                if let Some((p, q)) = s.split_once('/') {
                    let p: f64 = p
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad rational `{s}`")))?;
                    let q: f64 = q
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad rational `{s}`")))?;
                    if q == 0.0 {
                        return Err(Error::Config(format!("zero denominator in `{s}`")));
                    }
                    Ok(p / q)
                } else {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad number `{s}`")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dimension: usize,
    pub alpha: RationalOrFloat,
    pub beta: RationalOrFloat,
    pub domain_lower: Vec<f64>,
    pub domain_upper: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    /// Rank-4 entries keyed by one-based index strings like "1111";
    /// missing entries are zero.
    #[serde(default)]
    pub a: BTreeMap<String, String>,
    /// Matrix entries keyed like "11", "12"; missing entries are zero.
    #[serde(default)]
    pub b: BTreeMap<String, String>,
    pub c: String,
}

fn default_cell_modes() -> usize {
    64
}
fn default_cell_tol() -> f64 {
    1e-10
}
fn default_box_half_width() -> f64 {
    10.0
}
fn default_box_points() -> usize {
    1024
}
fn default_stencil_order() -> usize {
    4
}
fn default_seed() -> u64 {
    42
}
fn default_mass_fraction() -> f64 {
    0.99
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_cell_modes")]
    pub cell_modes: usize,
    #[serde(default = "default_cell_tol")]
    pub cell_tol: f64,
    #[serde(default = "default_box_half_width")]
    pub box_half_width: f64,
    #[serde(default = "default_box_points")]
    pub box_points: usize,
    #[serde(default = "default_stencil_order")]
    pub stencil_order: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_mass_fraction")]
    pub mass_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cell_modes: default_cell_modes(),
            cell_tol: default_cell_tol(),
            box_half_width: default_box_half_width(),
            box_points: default_box_points(),
            stencil_order: default_stencil_order(),
            seed: default_seed(),
            mass_fraction: default_mass_fraction(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn parse_index(key: &str, rank: usize, dim: usize) -> Result<Vec<usize>> {
    if key.len() != rank {
        return Err(Error::Config(format!(
            "coefficient key `{key}` must have {rank} digits"
        )));
    }
    key.chars()
        .map(|c| {
            let v = c
                .to_digit(10)
                .ok_or_else(|| Error::Config(format!("bad index digit in `{key}`")))?
                as usize;
            if v < 1 || v > dim {
                return Err(Error::Config(format!(
                    "index `{key}` is outside dimension {dim}"
                )));
            }
            Ok(v - 1)
        })
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text)
    }

    pub fn parameter_point(&self) -> Result<ParameterPoint> {
        ParameterPoint::new(self.problem.alpha.value()?, self.problem.beta.value()?)
    }

    pub fn stencil_order(&self) -> Result<StencilOrder> {
        match self.solver.stencil_order {
            2 => Ok(StencilOrder::Two),
            4 => Ok(StencilOrder::Four),
            o => Err(Error::Config(format!("stencil_order must be 2 or 4, got {o}"))),
        }
    }

    pub fn coefficient_spec(&self) -> Result<CoefficientSpec> {
        let d = self.problem.dimension;
        if d == 0 || d > 2 {
            return Err(Error::Config(format!("dimension must be 1 or 2, got {d}")));
        }
        let domain = BoxDomain::new(
            self.problem.domain_lower.clone(),
            self.problem.domain_upper.clone(),
        )?;
        if domain.dim() != d {
            return Err(Error::Config(format!(
                "domain has {} coordinate(s) but dimension is {d}",
                domain.dim()
            )));
        }
        let zero = Expression::constant(0.0);
        let mut a = vec![zero.clone(); d * d * d * d];
        for (key, text) in &self.coefficients.a {
            let idx = parse_index(key, 4, d)?;
            let flat = ((idx[0] * d + idx[1]) * d + idx[2]) * d + idx[3];
            a[flat] = Expression::parse(text)?;
        }
        let mut b = vec![zero; d * d];
        for (key, text) in &self.coefficients.b {
            let idx = parse_index(key, 2, d)?;
            b[idx[0] * d + idx[1]] = Expression::parse(text)?;
        }
        let c = Expression::parse(&self.coefficients.c)?;
        CoefficientSpec::new(d, domain, a, b, c)
    }
}
