//! Fitters for the weighted-classification policy objective.
//!
//! The target is the penalized surrogate risk
//!
//! ```text
//! L(eta) = (1/n) sum_i w_i * loss(z_i * x_i'eta) + J(eta)
//! ```
//!
//! with `J` an (adaptive) L1 penalty. Two surrogates are supported:
//!
//! * **Ramp** — bounded but non-convex. Because the ramp decomposes exactly
//!   as `loss_s(u, 1) - loss_s(u, 0)`, [`dc_fit`] runs a
//!   difference-of-convex (d.c.) loop: at iterate `eta_t` the concave part is
//!   linearized through `xi_i = w_i * dloss_s(u_i, 0)`, and the convex
//!   subproblem
//!
//!   ```text
//!   min_eta (1/n) sum_i { w_i * loss_s(u_i, 1) - xi_i * u_i } + J(eta)
//!   ```
//!
//!   is solved by monotone accelerated proximal gradient
//!   ([`solve_convex_subproblem`]). Each outer solution is warm-started at
//!   the previous iterate and never returns anything worse, which makes the
//!   recorded objective trace non-increasing by construction.
//!
//! * **Hinge** — convex but nonsmooth. [`hinge_fit`] runs proximal
//!   subgradient descent in rounds with a halving step, iterate averaging,
//!   and best-point tracking; accuracy is enforced by oracle tests against
//!   exhaustive breakpoint enumeration on small instances.
//!
//! [`initial_estimate`] produces the unpenalized reference coefficients used
//! by the adaptive penalty: a weighted least-squares regression of the labels
//! on the design seeds a fit of the chosen surrogate at `lambda = 0`.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_wls, weighted_gram_spectral_bound};
use crate::losses::{
    dloss_s, empirical_risk, loss_s, CoordinatePenalty, LossKind, PenaltySpec, SurrogateKind,
};
use crate::nuisance::ContrastEstimate;

/// Iteration controls shared by every fitter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Outer d.c. stopping tolerance (absolute objective change, or
    /// coefficient change under [`StopRule::CoefChange`]).
    pub tol: f64,
    /// Cap on outer d.c. iterations (or hinge rounds).
    pub max_outer_iter: usize,
    /// Cap on inner proximal-gradient iterations per subproblem (or total
    /// hinge subgradient steps).
    pub max_inner_iter: usize,
    /// Inner stopping tolerance on the relative objective change.
    pub inner_tol: f64,
    /// Which outer stopping rule to apply.
    pub stop_rule: StopRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-5,
            max_outer_iter: 200,
            max_inner_iter: 5000,
            inner_tol: 1e-8,
            stop_rule: StopRule::LossChange,
        }
    }
}

impl SolverConfig {
    /// Reject non-positive tolerances or zero iteration budgets.
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.inner_tol > 0.0) {
            return Err(Error::Config(format!(
                "solver tolerances must be positive (tol={}, inner_tol={})",
                self.tol, self.inner_tol
            )));
        }
        if self.max_outer_iter == 0 || self.max_inner_iter == 0 {
            return Err(Error::Config("solver iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// Outer stopping rule for [`dc_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop when the absolute objective change is at most `tol` (default).
    LossChange,
    /// Stop when the L2 coefficient change is at most `tol`.
    CoefChange,
}

/// Outcome of a policy-coefficient fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    /// Fitted coefficients (same layout as the design columns).
    pub eta: Array1<f64>,
    /// Final penalized objective value.
    pub final_objective: f64,
    /// Outer iterations (d.c. steps, or hinge rounds) performed.
    pub outer_iterations: usize,
    /// Whether the outer stopping rule fired before the iteration cap.
    pub converged: bool,
    /// Objective after the initial point and after every outer iteration;
    /// non-increasing by construction.
    pub objective_trace: Vec<f64>,
}

/// Soft-thresholding kernel: `sign(v) * max(|v| - t, 0)`.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Apply the proximal map of `step * J` coordinate-wise.
fn prox(v: &Array1<f64>, step: f64, lambda: f64, pens: &[CoordinatePenalty]) -> Array1<f64> {
    let mut out = v.clone();
    for (j, pen) in pens.iter().enumerate() {
        match pen {
            CoordinatePenalty::Free => {}
            CoordinatePenalty::Scaled(w) => out[j] = soft_threshold(v[j], step * lambda * w),
            CoordinatePenalty::Pinned => out[j] = 0.0,
        }
    }
    out
}

/// Penalty value under precomputed coordinate treatments.
fn penalty_value(eta: &Array1<f64>, lambda: f64, pens: &[CoordinatePenalty]) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (j, pen) in pens.iter().enumerate() {
        if let CoordinatePenalty::Scaled(w) = pen {
            acc += w * eta[j].abs();
        }
    }
    lambda * acc
}

/// Zero out pinned coordinates of a warm start.
fn apply_pins(mut eta: Array1<f64>, pens: &[CoordinatePenalty]) -> Array1<f64> {
    for (j, pen) in pens.iter().enumerate() {
        if *pen == CoordinatePenalty::Pinned {
            eta[j] = 0.0;
        }
    }
    eta
}

/// Shared validation for the fitters.
fn check_problem(
    design: ArrayView2<f64>,
    contrast: &ContrastEstimate,
    warm: ArrayView1<f64>,
) -> Result<()> {
    let n = design.nrows();
    let p = design.ncols();
    if n == 0 || p == 0 {
        return Err(Error::Invalid("empty design".into()));
    }
    if contrast.n() != n {
        return Err(Error::Invalid(format!(
            "{} design rows but {} contrast entries",
            n,
            contrast.n()
        )));
    }
    if warm.len() != p {
        return Err(Error::Invalid(format!(
            "warm start has {} coordinates for {} design columns",
            warm.len(),
            p
        )));
    }
    if contrast.weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Invalid("contrast weights must be non-negative".into()));
    }
    Ok(())
}

/// Solution of one convex subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub eta: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `(1/n) sum_i { w_i loss_s(u_i, 1) - xi_i u_i } + J(eta)` by
/// monotone accelerated proximal gradient with backtracking.
///
/// The returned point is never worse (in subproblem objective) than the warm
/// start. Hitting the iteration cap returns the best iterate found with
/// `converged = false`.
pub fn solve_convex_subproblem(
    design: ArrayView2<f64>,
    contrast: &ContrastEstimate,
    xi: ArrayView1<f64>,
    spec: &PenaltySpec,
    warm_start: ArrayView1<f64>,
    cfg: &SolverConfig,
) -> Result<SubproblemSolution> {
    // Step size from the curvature bound loss_s'' <= 2; the xi term is linear.
    let lip = weighted_gram_spectral_bound(design, contrast.weights.view(), 2.0);
    solve_subproblem_with_bound(design, contrast, xi, spec, warm_start, cfg, lip)
}

/// Body of [`solve_convex_subproblem`] with the curvature bound supplied by
/// the caller. The bound depends only on the design and weights, so the d.c.
/// loop computes it once and reuses it across outer iterations.
fn solve_subproblem_with_bound(
    design: ArrayView2<f64>,
    contrast: &ContrastEstimate,
    xi: ArrayView1<f64>,
    spec: &PenaltySpec,
    warm_start: ArrayView1<f64>,
    cfg: &SolverConfig,
    lip: f64,
) -> Result<SubproblemSolution> {
    cfg.validate()?;
    check_problem(design, contrast, warm_start)?;
    if xi.len() != design.nrows() {
        return Err(Error::Invalid(format!(
            "{} xi entries for {} rows",
            xi.len(),
            design.nrows()
        )));
    }
    let n = design.nrows();
    let p = design.ncols();
    let pens = spec.coordinate_penalties(p)?;
    let z = &contrast.labels;
    let w = &contrast.weights;
    let inv_n = 1.0 / n as f64;

    // Smooth part `(1/n) sum_i { w_i loss_s(u_i, 1) - xi_i u_i }`, alone and
    // fused with its gradient. The two accumulations must stay identical so
    // backtracking compares like with like.
    let smooth = |eta: &Array1<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            let u = z[i] * design.row(i).dot(eta);
            acc += w[i] * loss_s(u, 1.0) - xi[i] * u;
        }
        acc * inv_n
    };
    let smooth_and_gradient = |eta: &Array1<f64>| -> (f64, Array1<f64>) {
        let mut acc = 0.0;
        let mut grad = Array1::<f64>::zeros(p);
        {
            let g = grad.as_slice_mut().expect("gradient buffer is contiguous");
            for i in 0..n {
                let row = design.row(i);
                let u = z[i] * row.dot(eta);
                acc += w[i] * loss_s(u, 1.0) - xi[i] * u;
                let c = (w[i] * dloss_s(u, 1.0) - xi[i]) * z[i] * inv_n;
                if c != 0.0 {
                    for (gj, &xj) in g.iter_mut().zip(row.iter()) {
                        *gj += c * xj;
                    }
                }
            }
        }
        (acc * inv_n, grad)
    };

    let mut step = if lip > 0.0 { 1.0 / (1.01 * lip) } else { 1.0 };

    let mut x = apply_pins(warm_start.to_owned(), &pens);
    let mut x_prev = x.clone();
    let mut fx = smooth(&x) + penalty_value(&x, spec.lambda, &pens);
    let mut y = x.clone();
    let mut theta: f64 = 1.0;
    let mut converged = false;
    let mut small_changes = 0usize;
    let mut iterations = 0usize;

    for k in 1..=cfg.max_inner_iter {
        iterations = k;
        let (g_y, gy) = smooth_and_gradient(&y);

        // Backtracking: halve until the quadratic upper bound holds.
        let mut p_next;
        let mut smooth_p;
        loop {
            let cand = &y - &gy.mapv(|g| step * g);
            p_next = prox(&cand, step, spec.lambda, &pens);
            let diff = &p_next - &y;
            let quad = g_y + gy.dot(&diff) + diff.dot(&diff) / (2.0 * step);
            smooth_p = smooth(&p_next);
            if smooth_p <= quad + 1e-12 * (1.0 + quad.abs()) {
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        let fp = smooth_p + penalty_value(&p_next, spec.lambda, &pens);

        // Monotone update: keep the better of the proximal point and the
        // current iterate.
        let (x_next, fx_next) = if fp <= fx {
            (p_next.clone(), fp)
        } else {
            (x.clone(), fx)
        };

        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        // Monotone-FISTA extrapolation anchored at the accepted iterate.
        y = &x_next
            + &(&p_next - &x_next).mapv(|v| v * (theta / theta_next))
            + &(&x_next - &x_prev).mapv(|v| v * ((theta - 1.0) / theta_next));

        let change = (fx - fx_next).abs();
        x_prev = x;
        x = x_next;
        theta = theta_next;

        if change <= cfg.inner_tol * (1.0 + fx.abs()) {
            small_changes += 1;
            if small_changes >= 2 {
                fx = fx_next;
                converged = true;
                break;
            }
        } else {
            small_changes = 0;
        }
        fx = fx_next;
    }

    Ok(SubproblemSolution {
        eta: x,
        objective: fx,
        iterations,
        converged,
    })
}

/// Fit the penalized ramp-loss objective by the d.c. algorithm.
///
/// Starting from `eta0`, each outer iteration linearizes the concave part at
/// the current margins and solves the convex subproblem warm-started there.
/// Stops when the outer rule in `cfg` fires; the objective trace it records
/// is non-increasing.
pub fn dc_fit(
    design: ArrayView2<f64>,
    contrast: &ContrastEstimate,
    spec: &PenaltySpec,
    eta0: ArrayView1<f64>,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    check_problem(design, contrast, eta0)?;
    let n = design.nrows();
    let pens = spec.coordinate_penalties(design.ncols())?;
    let z = &contrast.labels;
    let w = &contrast.weights;

    let objective = |eta: &Array1<f64>| -> Result<f64> {
        let risk = empirical_risk(design, z.view(), w.view(), eta.view(), LossKind::Ramp)?;
        Ok(risk + penalty_value(eta, spec.lambda, &pens))
    };

    let mut eta = apply_pins(eta0.to_owned(), &pens);
    let mut current = objective(&eta)?;
    let mut trace = vec![current];
    let mut converged = false;
    let mut outer = 0usize;

    // Curvature bound for the subproblem steps; constant across outer
    // iterations because the design and weights are.
    let lip = weighted_gram_spectral_bound(design, w.view(), 2.0);

    for t in 1..=cfg.max_outer_iter {
        outer = t;
        // Linearize the concave part at the current margins.
        let m = design.dot(&eta);
        let mut xi = Array1::<f64>::zeros(n);
        for i in 0..n {
            xi[i] = w[i] * dloss_s(z[i] * m[i], 0.0);
        }
        let sub =
            solve_subproblem_with_bound(design, contrast, xi.view(), spec, eta.view(), cfg, lip)?;
        let next = objective(&sub.eta)?;
        trace.push(next);

        let stop = match cfg.stop_rule {
            StopRule::LossChange => (current - next).abs() <= cfg.tol,
            StopRule::CoefChange => {
                let d = &sub.eta - &eta;
                d.dot(&d).sqrt() <= cfg.tol
            }
        };
        eta = sub.eta;
        current = next;
        if stop {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        eta,
        final_objective: current,
        outer_iterations: outer,
        converged,
        objective_trace: trace,
    })
}

/// Fit the penalized hinge-loss objective by proximal subgradient descent.
///
/// Runs in rounds: within a round the step is constant and iterates are
/// averaged; between rounds the step halves and the search restarts from the
/// best point seen. The returned point is never worse than the warm start.
pub fn hinge_fit(
    design: ArrayView2<f64>,
    contrast: &ContrastEstimate,
    spec: &PenaltySpec,
    warm_start: ArrayView1<f64>,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    check_problem(design, contrast, warm_start)?;
    let n = design.nrows();
    let p = design.ncols();
    let pens = spec.coordinate_penalties(p)?;
    let z = &contrast.labels;
    let w = &contrast.weights;
    let inv_n = 1.0 / n as f64;

    let objective = |eta: &Array1<f64>| -> Result<f64> {
        let risk = empirical_risk(design, z.view(), w.view(), eta.view(), LossKind::Hinge)?;
        Ok(risk + penalty_value(eta, spec.lambda, &pens))
    };
    let subgradient = |eta: &Array1<f64>| -> Array1<f64> {
        let m = design.dot(eta);
        let mut c = Array1::<f64>::zeros(n);
        for i in 0..n {
            let u = z[i] * m[i];
            if u < 1.0 {
                c[i] = -w[i] * z[i] * inv_n;
            }
        }
        design.t().dot(&c)
    };

    // Step scale from the same spectral bound used by the smooth solver; the
    // hinge has no curvature, so this only fixes the order of magnitude.
    let lip = weighted_gram_spectral_bound(design, w.view(), 2.0);
    let step0 = if lip > 0.0 { 1.0 / lip } else { 1.0 };

    let rounds = cfg.max_outer_iter.min(30).max(8);
    let per_round = (cfg.max_inner_iter / rounds).max(10);

    let mut best = apply_pins(warm_start.to_owned(), &pens);
    let mut f_best = objective(&best)?;
    let mut trace = vec![f_best];
    let mut step = step0;
    let mut stagnant = 0usize;
    let mut converged = false;
    let mut used_rounds = 0usize;

    for r in 1..=rounds {
        used_rounds = r;
        let f_before = f_best;
        let mut cur = best.clone();
        let mut avg = Array1::<f64>::zeros(p);
        for _ in 0..per_round {
            let g = subgradient(&cur);
            let cand = &cur - &g.mapv(|v| step * v);
            cur = prox(&cand, step, spec.lambda, &pens);
            avg += &cur;
            let f_cur = objective(&cur)?;
            if f_cur < f_best {
                f_best = f_cur;
                best = cur.clone();
            }
        }
        avg.mapv_inplace(|v| v / per_round as f64);
        let avg = apply_pins(avg, &pens);
        let f_avg = objective(&avg)?;
        if f_avg < f_best {
            f_best = f_avg;
            best = avg;
        }
        trace.push(f_best);
        step *= 0.5;

        if (f_before - f_best).abs() <= cfg.inner_tol * (1.0 + f_before.abs()) {
            stagnant += 1;
            if stagnant >= 2 {
                converged = true;
                break;
            }
        } else {
            stagnant = 0;
        }
    }

    Ok(FitResult {
        eta: best,
        final_objective: f_best,
        outer_iterations: used_rounds,
        converged,
        objective_trace: trace,
    })
}

/// Unpenalized reference coefficients for the adaptive penalty.
///
/// A weighted least-squares regression of the labels on the design (weights
/// `w_i`) seeds an unpenalized (`lambda = 0`) fit of the chosen surrogate.
/// Errors if every weight is zero: the contrast carries no signal.
pub fn initial_estimate(
    design: ArrayView2<f64>,
    contrast: &ContrastEstimate,
    loss: SurrogateKind,
    cfg: &SolverConfig,
) -> Result<Array1<f64>> {
    if contrast.is_degenerate() {
        return Err(Error::DegenerateContrast);
    }
    let seed = solve_wls(
        design,
        contrast.labels.view(),
        contrast.weights.view(),
        " in initial estimate",
    )?;
    let spec = PenaltySpec::lasso(0.0);
    let fit = match loss {
        SurrogateKind::Ramp => dc_fit(design, contrast, &spec, seed.view(), cfg)?,
        SurrogateKind::Hinge => hinge_fit(design, contrast, &spec, seed.view(), cfg)?,
    };
    Ok(fit.eta)
}
