//! Classification of the parameter point (alpha, beta) into the regions
//! R1..R5 of the subcritical regime, and the per-region scaling exponents
//! used by every downstream solver.

use crate::error::{Error, Result};
use serde::Serialize;

/// Absolute tolerance for equality tests on region boundaries.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    R1,
    R2,
    R3,
    R4,
    R5,
    /// beta = 4, alpha < 4: the critical regime.
    Critical,
    /// 3 <= beta < 4 and alpha < beta - 2.
    Hatched,
    /// alpha = beta.
    Classical,
    /// Boundary segments and everything else without a stated limit problem.
    Unsupported,
}

impl Region {
    pub fn is_supported(self) -> bool {
        matches!(self, Region::R1 | Region::R2 | Region::R3 | Region::R4 | Region::R5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EffectiveForm {
    FourthOrder,
    FourthPlusSecond,
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterPoint {
    pub alpha: f64,
    pub beta: f64,
}

impl ParameterPoint {
    pub fn new(alpha: f64, beta: f64) -> Result<ParameterPoint> {
        if !alpha.is_finite() || !beta.is_finite() || alpha < 0.0 || beta <= 0.0 {
            return Err(Error::Config(format!(
                "parameter point needs alpha >= 0 and beta > 0, got ({alpha}, {beta})"
            )));
        }
        Ok(ParameterPoint { alpha, beta })
    }
}

/// Scaling exponents attached to a supported region: the spectral shift
/// eps^-shift, the correction scale eps^-eta, the eigenfunction spatial
/// scale eps^gamma, and the L2 normalization exponent.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegionScaling {
    pub region: Region,
    pub shift_exponent: f64,
    pub eta_exponent: f64,
    pub spatial_exponent: f64,
    pub norm_exponent: f64,
    pub effective_form: EffectiveForm,
}

fn eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_TOL
}

fn lt(a: f64, b: f64) -> bool {
    a < b && !eq(a, b)
}

pub fn classify(p: ParameterPoint) -> Region {
    let (al, be) = (p.alpha, p.beta);
    if eq(al, be) {
        return Region::Classical;
    }
    if eq(be, 4.0) && lt(al, 4.0) {
        return Region::Critical;
    }
    if (be > 3.0 || eq(be, 3.0)) && lt(be, 4.0) && lt(al, be - 2.0) {
        return Region::Hatched;
    }
    if (al > 0.0 || eq(al, 0.0)) && lt(al, 1.0) && lt(3.0 * al, be) && lt(be, 3.0) {
        return Region::R1;
    }
    if lt(0.0, al) && lt(al, 1.0) && eq(be, 3.0 * al) {
        return Region::R2;
    }
    if lt(0.0, al) && lt(al, 2.0) && lt(al, be) && lt(be, 3.0 * al) && lt(be, al + 2.0) {
        return Region::R3;
    }
    if eq(al, 2.0) && lt(2.0, be) && lt(be, 4.0) {
        return Region::R4;
    }
    if lt(2.0, al) && lt(al, 4.0) && lt(al, be) && lt(be, 4.0) {
        return Region::R5;
    }
    Region::Unsupported
}

pub fn scaling(p: ParameterPoint, dim: usize) -> Result<RegionScaling> {
    let region = classify(p);
    let d = dim as f64;
    let (al, be) = (p.alpha, p.beta);
    let s = match region {
        Region::R1 => RegionScaling {
            region,
            shift_exponent: be,
            eta_exponent: 2.0 * be / 3.0,
            spatial_exponent: be / 6.0,
            norm_exponent: d * be / 6.0,
            effective_form: EffectiveForm::FourthOrder,
        },
        Region::R2 => RegionScaling {
            region,
            shift_exponent: 3.0 * al,
            eta_exponent: 2.0 * al,
            spatial_exponent: al / 2.0,
            norm_exponent: d * al / 2.0,
            effective_form: EffectiveForm::FourthPlusSecond,
        },
        Region::R3 | Region::R4 | Region::R5 => RegionScaling {
            region,
            shift_exponent: be,
            eta_exponent: (al + be) / 2.0,
            spatial_exponent: (be - al) / 4.0,
            norm_exponent: d * (be - al) / 4.0,
            effective_form: EffectiveForm::SecondOrder,
        },
        other => {
            return Err(Error::UnsupportedRegion {
                alpha: al,
                beta: be,
                region: other,
            })
        }
    };
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(alpha: f64, beta: f64) -> Region {
        classify(ParameterPoint::new(alpha, beta).unwrap())
    }

    #[test]
    fn stated_examples() {
        assert_eq!(c(1.0 / 3.0, 1.0), Region::R2);
        assert_eq!(c(2.0, 3.0), Region::R4);
        assert_eq!(c(0.5, 3.5), Region::Hatched);
        assert_eq!(c(1.0, 2.5), Region::R3);
    }

    #[test]
    fn deferred_regimes() {
        assert_eq!(c(2.0, 2.0), Region::Classical);
        assert_eq!(c(1.0, 4.0), Region::Critical);
        assert_eq!(c(4.0, 4.0), Region::Classical);
    }

    #[test]
    fn unassigned_boundaries_are_unsupported() {
        // beta = alpha + 2 with 1 <= alpha < 2
        assert_eq!(c(1.5, 3.5), Region::Unsupported);
        // alpha = 1, beta = 3
        assert_eq!(c(1.0, 3.0), Region::Unsupported);
        // alpha = 1 side between R1/R3
        assert_eq!(c(1.0, 2.0), Region::R3);
    }

    #[test]
    fn r2_line_beats_neighbors() {
        for al in [0.1, 0.25, 1.0 / 3.0, 0.5, 0.9] {
            assert_eq!(c(al, 3.0 * al), Region::R2);
        }
    }

    #[test]
    fn scaling_r2_model_case() {
        let s = scaling(ParameterPoint::new(1.0 / 3.0, 1.0).unwrap(), 1).unwrap();
        assert!((s.shift_exponent - 1.0).abs() < 1e-12);
        assert!((s.eta_exponent - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.spatial_exponent - 1.0 / 6.0).abs() < 1e-12);
        assert!((s.norm_exponent - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(s.effective_form, EffectiveForm::FourthPlusSecond);
    }

    #[test]
    fn scaling_r1_and_r5() {
        let s = scaling(ParameterPoint::new(0.0, 2.0).unwrap(), 1).unwrap();
        assert_eq!(s.region, Region::R1);
        assert!((s.shift_exponent - 2.0).abs() < 1e-12);
        assert!((s.eta_exponent - 4.0 / 3.0).abs() < 1e-12);
        assert!((s.spatial_exponent - 1.0 / 3.0).abs() < 1e-12);

        let s = scaling(ParameterPoint::new(3.0, 3.5).unwrap(), 2).unwrap();
        assert_eq!(s.region, Region::R5);
        assert!((s.shift_exponent - 3.5).abs() < 1e-12);
        assert!((s.eta_exponent - 3.25).abs() < 1e-12);
        assert!((s.spatial_exponent - 0.125).abs() < 1e-12);
        assert!((s.norm_exponent - 0.25).abs() < 1e-12);
    }

    #[test]
    fn scaling_unsupported_carries_label() {
        match scaling(ParameterPoint::new(2.0, 2.0).unwrap(), 1) {
            Err(Error::UnsupportedRegion { region, .. }) => assert_eq!(region, Region::Classical),
            other => panic!("expected UnsupportedRegion, got {other:?}"),
        }
    }

    #[test]
    fn exponent_ordering() {
        // gamma > 0 and eta < shift in every supported region sample.
        for (al, be) in [
            (0.0, 2.0),
            (0.5, 2.0),
            (1.0 / 3.0, 1.0),
            (1.0, 2.0),
            (2.0, 3.0),
            (3.0, 3.5),
        ] {
            let s = scaling(ParameterPoint::new(al, be).unwrap(), 1).unwrap();
            assert!(s.spatial_exponent > 0.0, "({al},{be})");
            assert!(s.eta_exponent < s.shift_exponent, "({al},{be})");
        }
    }
}
