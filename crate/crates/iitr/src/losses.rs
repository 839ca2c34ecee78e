//! Classification losses and coefficient penalties for policy learning.
//!
//! A linear rule `d(x) = 1{x'eta > 0}` is scored on unit `i` through its
//! margin `u_i = z_i * x_i'eta`, where `z_i` is the +/-1 label carried by the
//! estimated treatment contrast and the unit weight is `|tau_i|`. The losses
//! here are the pieces used by the fitters:
//!
//! * `loss_01` — the target misclassification loss, discontinuous at 0;
//! * `loss_hinge` — its convex upper bound `max(1 - u, 0)`;
//! * `loss_ramp` — a bounded ramp surrogate that caps the hinge at 2;
//! * `loss_s` — the shifted convex quadratic-to-linear piece; the ramp is
//!   exactly the difference of two such pieces, `loss_s(u, 1) - loss_s(u, 0)`,
//!   which is what makes a difference-of-convex fit possible.
//!
//! Penalties are (adaptive) L1: coordinate `j` pays
//! `lambda * |eta_j| / |eta_ref_j|^gamma`, with unit weights when no
//! reference vector is supplied. Reference coefficients below
//! [`PenaltySpec::EXCLUDE_TOL`] mark the coordinate as excluded: its
//! coefficient is pinned to zero and contributes nothing to the penalty.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Misclassification (0-1) loss: `1{u <= 0}`. Ties (`u == 0`) count as errors.
pub fn loss_01(u: f64) -> f64 {
    if u <= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Hinge loss `max(1 - u, 0)`.
pub fn loss_hinge(u: f64) -> f64 {
    (1.0 - u).max(0.0)
}

/// Shifted convex loss piece: zero beyond `s`, quadratic `(s - u)^2` on
/// `[s - 1, s)`, linear `2s - 2u - 1` below `s - 1`. Convex and continuously
/// differentiable in `u`.
pub fn loss_s(u: f64, s: f64) -> f64 {
    if u >= s {
        0.0
    } else if u >= s - 1.0 {
        let d = s - u;
        d * d
    } else {
        2.0 * s - 2.0 * u - 1.0
    }
}

/// Derivative of [`loss_s`] with respect to `u`.
pub fn dloss_s(u: f64, s: f64) -> f64 {
    if u >= s {
        0.0
    } else if u >= s - 1.0 {
        -2.0 * (s - u)
    } else {
        -2.0
    }
}

/// Bounded ramp loss: 0 above 1, `(1 - u)^2` on `[0, 1)`, `2 - (1 + u)^2` on
/// `[-1, 0)`, and 2 at or below -1. Identical to
/// `loss_s(u, 1) - loss_s(u, 0)`.
pub fn loss_ramp(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else if u >= 0.0 {
        let d = 1.0 - u;
        d * d
    } else if u >= -1.0 {
        let d = 1.0 + u;
        2.0 - d * d
    } else {
        2.0
    }
}

/// Loss families understood by [`empirical_risk`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// 0-1 misclassification loss (evaluation only; not fittable).
    ZeroOne,
    /// Hinge surrogate.
    Hinge,
    /// Bounded ramp surrogate.
    Ramp,
}

impl LossKind {
    /// Loss value at margin `u`.
    pub fn value(self, u: f64) -> f64 {
        match self {
            LossKind::ZeroOne => loss_01(u),
            LossKind::Hinge => loss_hinge(u),
            LossKind::Ramp => loss_ramp(u),
        }
    }
}

/// Surrogates a policy can actually be fit under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Hinge,
    Ramp,
}

impl From<SurrogateKind> for LossKind {
    fn from(s: SurrogateKind) -> Self {
        match s {
            SurrogateKind::Hinge => LossKind::Hinge,
            SurrogateKind::Ramp => LossKind::Ramp,
        }
    }
}

impl std::fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SurrogateKind::Hinge => write!(f, "hinge"),
            SurrogateKind::Ramp => write!(f, "ramp"),
        }
    }
}

/// Margins `u_i = z_i * x_i'eta` for every row of `design`.
pub fn margins(
    design: ArrayView2<f64>,
    labels: ArrayView1<f64>,
    eta: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if design.nrows() != labels.len() {
        return Err(Error::Invalid(format!(
            "margins: {} design rows but {} labels",
            design.nrows(),
            labels.len()
        )));
    }
    if design.ncols() != eta.len() {
        return Err(Error::Invalid(format!(
            "margins: {} design columns but {} coefficients",
            design.ncols(),
            eta.len()
        )));
    }
    Ok(&design.dot(&eta) * &labels)
}

/// Weighted empirical classification risk
/// `(1/n) * sum_i w_i * loss(z_i * x_i'eta)`.
///
/// `n` is the number of rows, including any with zero weight. Empty input is
/// rejected.
pub fn empirical_risk(
    design: ArrayView2<f64>,
    labels: ArrayView1<f64>,
    weights: ArrayView1<f64>,
    eta: ArrayView1<f64>,
    kind: LossKind,
) -> Result<f64> {
    let n = design.nrows();
    if n == 0 {
        return Err(Error::Invalid("empirical_risk: empty design".into()));
    }
    if weights.len() != n {
        return Err(Error::Invalid(format!(
            "empirical_risk: {} rows but {} weights",
            n,
            weights.len()
        )));
    }
    let u = margins(design, labels, eta)?;
    let mut acc = 0.0;
    for i in 0..n {
        let wi = weights[i];
        if wi == 0.0 {
            continue;
        }
        acc += wi * kind.value(u[i]);
    }
    Ok(acc / n as f64)
}

/// Per-coordinate penalty treatment derived from a [`PenaltySpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordinatePenalty {
    /// Unpenalized coordinate (the intercept by default).
    Free,
    /// L1-penalized with threshold `lambda * weight`.
    Scaled(f64),
    /// Reference coefficient was (numerically) zero: coordinate is excluded,
    /// i.e. forced to zero with no penalty contribution.
    Pinned,
}

/// L1 / adaptive-L1 penalty specification.
///
/// The coefficient layout convention is that coordinate 0 is the intercept;
/// it is unpenalized unless `penalize_intercept` is set. `eta_ref` (when
/// present) must have the same length as the coefficient vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenaltySpec {
    /// Overall penalty level; zero disables the penalty entirely.
    pub lambda: f64,
    /// Adaptive exponent: weight `1 / |eta_ref_j|^gamma`.
    pub gamma: f64,
    /// Reference coefficients for adaptive weights; `None` means plain L1
    /// (all penalized coordinates get unit weight).
    pub eta_ref: Option<Array1<f64>>,
    /// Penalize coordinate 0 as well (off by default).
    pub penalize_intercept: bool,
}

impl PenaltySpec {
    /// Reference coefficients with absolute value below this are treated as
    /// excluded coordinates.
    pub const EXCLUDE_TOL: f64 = 1e-12;

    /// Plain LASSO at level `lambda` (unit weights, intercept free).
    pub fn lasso(lambda: f64) -> Self {
        PenaltySpec {
            lambda,
            gamma: 1.0,
            eta_ref: None,
            penalize_intercept: false,
        }
    }

    /// Adaptive LASSO with weights `1/|eta_ref_j|^gamma` (intercept free).
    pub fn adaptive(lambda: f64, gamma: f64, eta_ref: Array1<f64>) -> Self {
        PenaltySpec {
            lambda,
            gamma,
            eta_ref: Some(eta_ref),
            penalize_intercept: false,
        }
    }

    /// Resolve the penalty treatment of each of `p` coordinates.
    pub fn coordinate_penalties(&self, p: usize) -> Result<Vec<CoordinatePenalty>> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Invalid(format!("penalty lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Invalid(format!("penalty gamma must be > 0, got {}", self.gamma)));
        }
        if let Some(r) = &self.eta_ref {
            if r.len() != p {
                return Err(Error::Invalid(format!(
                    "penalty reference has {} coordinates but the problem has {}",
                    r.len(),
                    p
                )));
            }
        }
        let mut out = Vec::with_capacity(p);
        for j in 0..p {
            if j == 0 && !self.penalize_intercept {
                out.push(CoordinatePenalty::Free);
                continue;
            }
            match &self.eta_ref {
                None => out.push(CoordinatePenalty::Scaled(1.0)),
                Some(r) => {
                    let a = r[j].abs();
                    if a < Self::EXCLUDE_TOL {
                        out.push(CoordinatePenalty::Pinned);
                    } else {
                        out.push(CoordinatePenalty::Scaled(a.powf(-self.gamma)));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Penalty value `lambda * sum_j w_j |eta_j|` over penalized coordinates.
    pub fn evaluate(&self, eta: ArrayView1<f64>) -> Result<f64> {
        let pens = self.coordinate_penalties(eta.len())?;
        if self.lambda == 0.0 {
            return Ok(0.0);
        }
        let mut acc = 0.0;
        for (j, pen) in pens.iter().enumerate() {
            if let CoordinatePenalty::Scaled(w) = pen {
                acc += w * eta[j].abs();
            }
        }
        Ok(self.lambda * acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn shifted_loss_matches_hand_values() {
        assert_abs_diff_eq!(loss_s(0.5, 1.0), 0.25, epsilon = 0.0);
        assert_abs_diff_eq!(loss_s(-0.5, 0.0), 0.25, epsilon = 0.0);
        assert_abs_diff_eq!(loss_s(-1.0, 1.0), 3.0, epsilon = 0.0);
        // Boundary membership: u >= s means exactly zero.
        assert_eq!(loss_s(1.0, 1.0), 0.0);
        assert_eq!(loss_s(0.0, 0.0), 0.0);
    }

    #[test]
    fn ramp_matches_hand_values() {
        assert_abs_diff_eq!(loss_ramp(0.5), 0.25, epsilon = 0.0);
        assert_abs_diff_eq!(loss_ramp(-0.5), 1.75, epsilon = 0.0);
        assert_abs_diff_eq!(loss_ramp(-2.0), 2.0, epsilon = 0.0);
        assert_eq!(loss_ramp(1.0), 0.0);
        assert_eq!(loss_ramp(-1.0), 2.0);
    }

    #[test]
    fn shifted_loss_derivative_hand_values() {
        assert_abs_diff_eq!(dloss_s(-0.5, 0.0), -1.0, epsilon = 0.0);
        assert_eq!(dloss_s(0.3, 0.0), 0.0);
        assert_eq!(dloss_s(-2.0, 0.0), -2.0);
    }

    #[test]
    fn ramp_is_difference_of_shifted_losses() {
        // Deterministic sweep across all branch combinations.
        let mut u = -3.0;
        while u <= 3.0 {
            let lhs = loss_ramp(u);
            let rhs = loss_s(u, 1.0) - loss_s(u, 0.0);
            assert!(
                (lhs - rhs).abs() <= 1e-12,
                "decomposition broke at u={u}: {lhs} vs {rhs}"
            );
            u += 0.0173;
        }
    }

    #[test]
    fn hinge_dominates_zero_one() {
        let mut u = -4.0;
        while u <= 4.0 {
            assert!(loss_hinge(u) >= loss_01(u), "dominance broke at u={u}");
            u += 0.0119;
        }
    }

    #[test]
    fn zero_one_loss_is_scale_invariant() {
        for &u in &[-2.0, -0.3, 0.0, 0.7, 5.0] {
            for &c in &[0.25, 1.0, 42.0] {
                assert_eq!(loss_01(u), loss_01(c * u));
            }
        }
    }

    #[test]
    fn empirical_risk_matches_two_unit_example() {
        // tau = (2, -1) gives labels (+1, -1), weights (2, 1); with x = (1, 1)
        // and eta = 1 the margins are (1, -1), so only the second unit is
        // misclassified: risk = (1/2) * (2*0 + 1*1) = 0.5.
        let design = array![[1.0], [1.0]];
        let labels = array![1.0, -1.0];
        let weights = array![2.0, 1.0];
        let eta = array![1.0];
        let r = empirical_risk(
            design.view(),
            labels.view(),
            weights.view(),
            eta.view(),
            LossKind::ZeroOne,
        )
        .unwrap();
        assert_abs_diff_eq!(r, 0.5, epsilon = 0.0);
    }

    #[test]
    fn empirical_risk_is_zero_when_all_weights_vanish() {
        let design = array![[1.0, 0.5], [1.0, -0.5]];
        let labels = array![1.0, -1.0];
        let weights = array![0.0, 0.0];
        let eta = array![0.3, -2.0];
        for kind in [LossKind::ZeroOne, LossKind::Hinge, LossKind::Ramp] {
            let r = empirical_risk(design.view(), labels.view(), weights.view(), eta.view(), kind)
                .unwrap();
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn adaptive_penalty_matches_hand_value() {
        // eta = (0.5, 1, -2), reference = (anything, 2, 4), gamma = 1,
        // lambda = 1, intercept free: 1/2 + 2/4 = 1.
        let spec = PenaltySpec::adaptive(1.0, 1.0, array![7.0, 2.0, 4.0]);
        let v = spec.evaluate(array![0.5, 1.0, -2.0].view()).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_lambda_penalty_vanishes() {
        let spec = PenaltySpec::lasso(0.0);
        let v = spec.evaluate(array![3.0, -4.0, 5.0].view()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn plain_lasso_uses_unit_weights() {
        let spec = PenaltySpec::lasso(2.0);
        let v = spec.evaluate(array![9.0, 1.0, -2.0].view()).unwrap();
        assert_abs_diff_eq!(v, 2.0 * 3.0, epsilon = 1e-15);
    }

    #[test]
    fn tiny_reference_coefficients_pin_coordinates() {
        let spec = PenaltySpec::adaptive(1.0, 1.0, array![1.0, 1e-13, 2.0]);
        let pens = spec.coordinate_penalties(3).unwrap();
        assert_eq!(pens[0], CoordinatePenalty::Free);
        assert_eq!(pens[1], CoordinatePenalty::Pinned);
        assert_eq!(pens[2], CoordinatePenalty::Scaled(0.5));
        // Pinned coordinate contributes nothing even if a nonzero value
        // sneaks into the evaluation.
        let v = spec.evaluate(array![0.0, 123.0, 1.0].view()).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn margins_flag_dimension_mismatch() {
        let design = array![[1.0, 2.0]];
        let labels = array![1.0];
        let eta = array![1.0];
        assert!(margins(design.view(), labels.view(), eta.view()).is_err());
    }
}
