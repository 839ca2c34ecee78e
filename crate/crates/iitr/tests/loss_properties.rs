//! Property tests for the loss family and penalty: algebraic identities,
//! smoothness, convexity, and scale behavior that the solvers rely on.

use iitr::losses::{
    dloss_s, empirical_risk, loss_01, loss_hinge, loss_ramp, loss_s, LossKind, PenaltySpec,
};
use iitr::solvers::soft_threshold;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

const U_RANGE: std::ops::Range<f64> = -25.0..25.0;

proptest! {
    /// The two-sided ramp is exactly the difference of two one-sided
    /// smoothed losses — the identity behind the difference-of-convex split.
    #[test]
    fn ramp_is_difference_of_smoothed_losses(u in U_RANGE) {
        let direct = loss_ramp(u);
        let split = loss_s(u, 1.0) - loss_s(u, 0.0);
        prop_assert!((direct - split).abs() <= 1e-12, "u={u}: {direct} vs {split}");
    }

    /// The smoothed loss is continuous at its two knots.
    #[test]
    fn smoothed_loss_is_continuous_at_knots(s in -2.0..2.0f64) {
        for knot in [s - 1.0, s] {
            let below = loss_s(knot - 1e-9, s);
            let at = loss_s(knot, s);
            let above = loss_s(knot + 1e-9, s);
            prop_assert!((below - at).abs() < 1e-7);
            prop_assert!((above - at).abs() < 1e-7);
        }
    }

    /// The stated derivative matches central finite differences away from
    /// the knots (the loss is piecewise quadratic, so central differences
    /// are exact up to rounding inside each piece).
    #[test]
    fn derivative_matches_finite_differences(u in U_RANGE, s in prop_oneof![Just(0.0), Just(1.0)]) {
        let h = 1e-6;
        // Stay inside one piece: skip draws too close to a knot.
        prop_assume!((u - s).abs() > 1e-3 && (u - (s - 1.0)).abs() > 1e-3);
        let fd = (loss_s(u + h, s) - loss_s(u - h, s)) / (2.0 * h);
        let exact = dloss_s(u, s);
        prop_assert!((fd - exact).abs() <= 1e-6, "u={u}, s={s}: fd {fd} vs {exact}");
    }

    /// Convexity of the smoothed loss in its argument.
    #[test]
    fn smoothed_loss_is_convex(u1 in U_RANGE, u2 in U_RANGE, t in 0.0..1.0f64, s in 0.0..1.0f64) {
        let mix = t * u1 + (1.0 - t) * u2;
        let lhs = loss_s(mix, s);
        let rhs = t * loss_s(u1, s) + (1.0 - t) * loss_s(u2, s);
        prop_assert!(lhs <= rhs + 1e-9, "convexity violated at u1={u1}, u2={u2}, t={t}");
    }

    /// Both the smoothed loss and the ramp are non-increasing in the margin.
    #[test]
    fn losses_are_non_increasing(u1 in U_RANGE, u2 in U_RANGE, s in 0.0..1.0f64) {
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        prop_assert!(loss_s(lo, s) >= loss_s(hi, s) - 1e-12);
        prop_assert!(loss_ramp(lo) >= loss_ramp(hi) - 1e-12);
        prop_assert!(loss_hinge(lo) >= loss_hinge(hi) - 1e-12);
    }

    /// The hinge dominates the 0-1 loss; the ramp stays within [0, 2] and
    /// is antisymmetric around (0, 1).
    #[test]
    fn loss_bounds_and_symmetry(u in U_RANGE) {
        prop_assert!(loss_hinge(u) >= loss_01(u));
        let r = loss_ramp(u);
        prop_assert!((0.0..=2.0).contains(&r));
        prop_assert!((loss_ramp(u) + loss_ramp(-u) - 2.0).abs() <= 1e-12);
    }

    /// The 0-1 loss only looks at the sign, so positive rescaling of the
    /// margin never changes it.
    #[test]
    fn zero_one_loss_is_scale_invariant(u in U_RANGE, c in 1e-6..1e6f64) {
        prop_assert_eq!(loss_01(u), loss_01(c * u));
    }

    /// Soft thresholding never grows magnitude, keeps the sign, and shrinks
    /// by exactly the threshold outside the dead zone.
    #[test]
    fn soft_threshold_contracts(v in -100.0..100.0f64, t in 0.0..50.0f64) {
        let s = soft_threshold(v, t);
        prop_assert!(s.abs() <= v.abs() + 1e-15);
        prop_assert!(s == 0.0 || s.signum() == v.signum());
        if v.abs() > t {
            prop_assert!((s.abs() - (v.abs() - t)).abs() <= 1e-12);
        } else {
            prop_assert_eq!(s, 0.0);
        }
    }

    /// Rescaling all weights rescales the empirical risk linearly.
    #[test]
    fn risk_is_linear_in_weights(c in 0.1..10.0f64, seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 15;
        let mut design = Array2::<f64>::ones((n, 2));
        let mut labels = Array1::<f64>::zeros(n);
        let mut weights = Array1::<f64>::zeros(n);
        for i in 0..n {
            design[[i, 1]] = rng.gen::<f64>() * 4.0 - 2.0;
            labels[i] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            weights[i] = rng.gen::<f64>() + 0.05;
        }
        let eta = Array1::from(vec![0.3, -0.8]);
        for kind in [LossKind::ZeroOne, LossKind::Hinge, LossKind::Ramp] {
            let base = empirical_risk(design.view(), labels.view(), weights.view(), eta.view(), kind).unwrap();
            let scaled_w = weights.mapv(|w| c * w);
            let scaled = empirical_risk(design.view(), labels.view(), scaled_w.view(), eta.view(), kind).unwrap();
            prop_assert!((scaled - c * base).abs() <= 1e-9 * (1.0 + base.abs()) * c.max(1.0));
        }
    }

    /// The adaptive penalty value is linear in lambda and ignores pinned
    /// coordinates entirely.
    #[test]
    fn penalty_scales_linearly_in_lambda(lambda in 0.0..10.0f64, c in 1.0..5.0f64) {
        let eta_ref = Array1::from(vec![0.0, 2.0, 1e-15, -0.5]);
        let spec = PenaltySpec::adaptive(lambda, 1.0, eta_ref.clone());
        let spec_scaled = PenaltySpec::adaptive(c * lambda, 1.0, eta_ref);
        let eta = Array1::from(vec![3.0, 1.0, 0.0, 2.0]);
        let a = spec.evaluate(eta.view()).unwrap();
        let b = spec_scaled.evaluate(eta.view()).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-9 * (1.0 + a.abs()));
    }
}

/// Fixed-grid sweep of the difference identity, denser than the random one.
#[test]
fn ramp_identity_on_dense_grid() {
    let mut worst: f64 = 0.0;
    for k in 0..=40_000 {
        let u = -20.0 + k as f64 * 1e-3;
        let diff = (loss_ramp(u) - (loss_s(u, 1.0) - loss_s(u, 0.0))).abs();
        worst = worst.max(diff);
    }
    assert!(worst <= 1e-12, "worst identity gap {worst}");
}
