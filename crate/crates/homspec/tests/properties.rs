//! Randomized property tests for the structural invariants: region
//! partition uniqueness, expression printing round-trips, exact
//! symmetry of assembled quadratic forms, and banded factorization.

use homspec::banded::BandedMatrix;
use homspec::expr::Expression;
use homspec::regions::{classify, scaling, ParameterPoint, Region};
use homspec::stencil::BandOp;
use proptest::prelude::*;

fn eq(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12
}
fn lt(x: f64, y: f64) -> bool {
    x < y && !eq(x, y)
}
fn le(x: f64, y: f64) -> bool {
    x < y || eq(x, y)
}

/// Independent re-statement of the published region predicates.
fn predicate_labels(al: f64, be: f64) -> Vec<Region> {
    let mut labels = Vec::new();
    if le(0.0, al) && lt(al, 1.0) && lt(3.0 * al, be) && lt(be, 3.0) {
        labels.push(Region::R1);
    }
    if lt(0.0, al) && lt(al, 1.0) && eq(be, 3.0 * al) {
        labels.push(Region::R2);
    }
    if lt(0.0, al) && lt(al, 2.0) && lt(al, be) && lt(be, 3.0 * al) && lt(be, al + 2.0) {
        labels.push(Region::R3);
    }
    if eq(al, 2.0) && lt(2.0, be) && lt(be, 4.0) {
        labels.push(Region::R4);
    }
    if lt(2.0, al) && lt(al, 4.0) && lt(al, be) && lt(be, 4.0) {
        labels.push(Region::R5);
    }
    if eq(al, be) {
        labels.push(Region::Classical);
    }
    if eq(be, 4.0) && lt(al, 4.0) {
        labels.push(Region::Critical);
    }
    if le(3.0, be) && lt(be, 4.0) && lt(al, be - 2.0) {
        labels.push(Region::Hatched);
    }
    labels
}

/// Leaf-or-branch generator for well-formed expression source text in
/// the variables x1 and y1.
fn expr_source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (-4i32..=4).prop_map(|v| v.to_string()),
        (1u32..=31).prop_map(|v| format!("0.{v}")),
        Just("x1".to_string()),
        Just("y1".to_string()),
        Just("pi".to_string()),
    ];
    leaf.prop_recursive(4, 48, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/({b})")),
            (inner.clone(), 1u32..=3).prop_map(|(a, p)| format!("({a})^{p}")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.prop_map(|a| format!("exp({a})")),
        ]
    })
}

proptest! {
    /// Every parameter point carries exactly one region label, the
    /// label agrees with the published predicates, and scaling
    /// exponents exist exactly for the supported regions.
    #[test]
    fn region_partition_is_exact(
        al in 0.0..=4.0f64,
        be in 1e-6..=4.0f64,
        snap_alpha in proptest::bool::ANY,
        snap_beta in proptest::bool::ANY,
    ) {
        // snap some samples onto the measure-zero boundary lines
        let al = if snap_alpha { (al * 4.0).round() / 4.0 } else { al };
        let be = if snap_beta {
            (3.0 * al).min(4.0).max(1e-6)
        } else {
            be
        };
        let labels = predicate_labels(al, be);
        prop_assert!(labels.len() <= 1, "overlap at ({al}, {be}): {labels:?}");
        let expected = labels.first().copied().unwrap_or(Region::Unsupported);
        let p = ParameterPoint::new(al, be).unwrap();
        prop_assert_eq!(classify(p), expected);
        prop_assert_eq!(classify(p), classify(p));

        match scaling(p, 1) {
            Ok(s) => {
                prop_assert!(expected.is_supported());
                prop_assert!(s.spatial_exponent > 0.0);
                prop_assert!(s.eta_exponent < s.shift_exponent);
                // mass normalization matches the localization volume
                let s2 = scaling(p, 2).unwrap();
                prop_assert!(eq(s.norm_exponent, s.spatial_exponent));
                prop_assert!(eq(s2.norm_exponent, 2.0 * s2.spatial_exponent));
            }
            Err(_) => prop_assert!(!expected.is_supported()),
        }
    }

    /// `parse(print(e))` evaluates identically to `e` (bit for bit,
    /// including which points make evaluation fail).
    #[test]
    fn expression_print_parse_round_trip(
        source in expr_source(),
        x in -2.0..2.0f64,
        y in -2.0..2.0f64,
    ) {
        let e1 = Expression::parse(&source).unwrap();
        let printed = e1.print();
        let e2 = Expression::parse(&printed)
            .unwrap_or_else(|err| panic!("reparse of `{printed}` failed: {err}"));
        match (e1.eval(&[x], &[y]), e2.eval(&[x], &[y])) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits(), "{} vs {}", a, b),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "eval mismatch: {a:?} vs {b:?}"),
        }
    }

    /// Weighted Gram forms G^T diag(w) G are exactly symmetric, so the
    /// symmetric banded conversion loses nothing.
    #[test]
    fn weighted_gram_exactly_symmetric(
        n in 8usize..40,
        stencil in proptest::collection::vec((-3i64..=3, -2.0..2.0f64), 1..5),
        weights in proptest::collection::vec(-2.0..2.0f64, 40),
    ) {
        let g = BandOp::from_stencil(n, &stencil);
        let gram = g.weighted_gram(&weights[..n], &g);
        prop_assert_eq!(gram.asymmetry(), 0.0);
    }

    /// Banded Cholesky solves diagonally dominant systems to near
    /// machine precision.
    #[test]
    fn banded_cholesky_solves(
        n in 4usize..30,
        bw in 1usize..4,
        entries in proptest::collection::vec(-1.0..1.0f64, 30 * 4),
        rhs in proptest::collection::vec(-1.0..1.0f64, 30),
    ) {
        let mut m = BandedMatrix::zeros(n, bw);
        for i in 0..n {
            for k in 1..=bw.min(n - 1 - i) {
                m.add(i + k, i, entries[i * bw + k - 1]);
            }
        }
        // strict diagonal dominance guarantees positive definiteness
        for i in 0..n {
            let mut row = 1.0;
            for j in i.saturating_sub(bw)..(i + bw + 1).min(n) {
                if j != i {
                    row += m.get(i, j).abs();
                }
            }
            m.add(i, i, row);
        }
        let b = &rhs[..n];
        let chol = m.cholesky().unwrap();
        let mut x = b.to_vec();
        chol.solve(&mut x);
        let mut mx = vec![0.0; n];
        m.matvec(&x, &mut mx);
        let r: Vec<f64> = mx.iter().zip(b).map(|(mv, bv)| mv - bv).collect();
        let rel = r.iter().map(|v| v * v).sum::<f64>().sqrt()
            / (1e-30 + b.iter().map(|v| v * v).sum::<f64>().sqrt());
        prop_assert!(rel < 1e-12, "relative residual {rel}");
    }
}
