//! Dual extrapolation outer loop.
//!
//! Keeps the running gradient sums `s = (s_x, s_y)`. Each iteration solves two
//! prox problems with the alternating-minimization oracle: `z` from the sums,
//! then `w` from the sums plus `G(z)/κ`. The sums advance by `G(w)/(2κ)` and
//! the output is the average of the `w` iterates.

use crate::error::{Error, Result};
use crate::operator::{gradient_x_into, gradient_y_into};
use crate::problem::{BarycenterProblem, DualPoint, PrimalPoint};
use crate::report::{evaluate_pair, Algorithm, Record, RunOptions, RunReport, SolveOutput, Stopwatch};

use super::am::{am_inner_iterations, AmProblem, AmSolver};
use super::{grad_at_min_entries, theta, ThetaVariant, KAPPA};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeConfig {
    pub kappa: f64,
    pub theta: f64,
    pub theta_variant: ThetaVariant,
    /// `N = ⌈12Θ/ε⌉`.
    pub outer_iters: usize,
    /// Sweeps per prox call.
    pub inner_iters: usize,
    pub eps: f64,
    /// Additive error budget of all prox calls together, `ε/2`.
    pub eps_prime: f64,
    /// Start every prox call from the previous solution instead of `z̄`.
    pub warm_start: bool,
    /// A prox call stops before `inner_iters` sweeps once a sweep moves no
    /// coordinate by more than this. Negative disables the check.
    pub am_tol: f64,
}

/// Default sweep-change threshold: below it the iterate is a fixed point of
/// the sweep map to within a few ulps of the box.
pub const DEFAULT_AM_TOL: f64 = 1e-13;

/// Constants for target accuracy `eps`.
pub fn de_config(prob: &BarycenterProblem, eps: f64, variant: ThetaVariant) -> Result<DeConfig> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("target accuracy {eps} must be positive")));
    }
    let d_inf = prob.cost().d_inf();
    if d_inf <= 0.0 {
        return Err(Error::Config("cost matrix is identically zero".into()));
    }
    let th = theta(prob.n(), d_inf, variant);
    let outer = (4.0 * KAPPA * th / eps).ceil() as usize;
    Ok(DeConfig {
        kappa: KAPPA,
        theta: th,
        theta_variant: variant,
        outer_iters: outer.max(1),
        inner_iters: am_inner_iterations(eps, th, d_inf)?,
        eps,
        eps_prime: eps / 2.0,
        warm_start: false,
        am_tol: DEFAULT_AM_TOL,
    })
}

/// Gradient sums and the running sum of the `w` iterates.
#[derive(Debug, Clone)]
pub struct DeState {
    pub s_x: PrimalPoint,
    pub s_y: DualPoint,
    pub sum_wx: PrimalPoint,
    pub sum_wy: DualPoint,
    /// Completed outer iterations.
    pub k: usize,
    /// Total alternating-minimization sweeps performed.
    pub sweeps: usize,
    solver: AmSolver,
    prox: AmProblem,
    grad: (PrimalPoint, DualPoint),
    last: Option<(PrimalPoint, DualPoint)>,
}

impl DeState {
    pub fn initial(n: usize, m: usize, d_inf: f64) -> Result<Self> {
        Ok(Self {
            s_x: PrimalPoint::zeros(n, m),
            s_y: DualPoint::zeros(n, m),
            sum_wx: PrimalPoint::zeros(n, m),
            sum_wy: DualPoint::zeros(n, m),
            k: 0,
            sweeps: 0,
            solver: AmSolver::new(n, m, d_inf)?,
            prox: AmProblem::zeros(n, m),
            grad: (PrimalPoint::zeros(n, m), DualPoint::zeros(n, m)),
            last: None,
        })
    }

    pub fn averages(&self) -> (PrimalPoint, DualPoint) {
        let w = 1.0 / self.k.max(1) as f64;
        (self.sum_wx.scaled(w), self.sum_wy.scaled(w))
    }

    fn solve_prox(&mut self, cfg: &DeConfig, outer: usize) -> Result<(PrimalPoint, DualPoint)> {
        let start = if cfg.warm_start { self.last.as_ref() } else { None };
        self.solver
            .load_from(&self.prox, start.map(|(x, y)| (x, y)))
            .map_err(|e| with_outer(e, outer))?;
        self.sweeps += self
            .solver
            .run(cfg.inner_iters, cfg.am_tol)
            .map_err(|e| with_outer(e, outer))?;
        let (x, y) = self.solver.point();
        let out = (x.clone(), y.clone());
        if cfg.warm_start {
            self.last = Some(out.clone());
        }
        Ok(out)
    }

    fn gradient(&mut self, x: &PrimalPoint, y: &DualPoint, prob: &BarycenterProblem) {
        let (gx, gy) = &mut self.grad;
        gradient_x_into(&y.duals, prob, &mut gx.plans, &mut gx.bary);
        gradient_y_into(&x.plans, &x.bary, prob, &mut gy.duals);
    }
}

fn with_outer(e: Error, outer: usize) -> Error {
    match e {
        Error::Numerical { iteration, detail, .. } => Error::Numerical {
            stage: "dual extrapolation",
            iteration: outer,
            detail: format!("{detail} (prox sweep {iteration})"),
        },
        other => other,
    }
}

/// One outer iteration, in place.
pub fn de_iteration(state: &mut DeState, cfg: &DeConfig, prob: &BarycenterProblem) -> Result<()> {
    let n = prob.n();
    let m = prob.m();
    let it = state.k + 1;
    let (plan_entry, bary_entry) = grad_at_min_entries(n, m, prob.cost().d_inf());

    // z = prox(s − ∇r(z̄))
    for (v, s) in state.prox.v.plans.iter_mut().zip(&state.s_x.plans) {
        v.iter_mut().zip(s).for_each(|(a, &b)| *a = b - plan_entry);
    }
    for (a, &b) in state.prox.v.bary.iter_mut().zip(&state.s_x.bary) {
        *a = b - bary_entry;
    }
    state.prox.u.clone_from(&state.s_y);
    let (zx, zy) = state.solve_prox(cfg, it)?;

    // w = prox(s − ∇r(z̄) + G(z)/κ)
    state.gradient(&zx, &zy, prob);
    state.prox.v.add_scaled(&state.grad.0, 1.0 / cfg.kappa);
    state.prox.u.add_scaled(&state.grad.1, 1.0 / cfg.kappa);
    let (wx, wy) = state.solve_prox(cfg, it)?;

    state.gradient(&wx, &wy, prob);
    state.s_x.add_scaled(&state.grad.0, 0.5 / cfg.kappa);
    state.s_y.add_scaled(&state.grad.1, 0.5 / cfg.kappa);
    state.sum_wx.add_scaled(&wx, 1.0);
    state.sum_wy.add_scaled(&wy, 1.0);
    state.k = it;
    if state.s_x.to_flat().iter().chain(state.s_y.duals.iter().flatten()).any(|a| !a.is_finite()) {
        return Err(Error::Numerical {
            stage: "dual extrapolation",
            iteration: it,
            detail: "non-finite gradient sum".into(),
        });
    }
    Ok(())
}

/// `(‖s_x‖∞, ‖s_y‖₁)` against their a-priori bounds after `k` iterations:
/// every primal gradient entry is at most `max(5/m, 2)‖d‖∞` in magnitude and
/// every dual gradient has `ℓ₁` norm at most `8‖d‖∞`.
pub fn gradient_sum_bounds(state: &DeState, cfg: &DeConfig, m: usize, d_inf: f64) -> ((f64, f64), (f64, f64)) {
    let steps = state.k as f64 / (2.0 * cfg.kappa);
    let sx = state.s_x.to_flat().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let sy: f64 = state.s_y.duals.iter().flatten().map(|a| a.abs()).sum();
    let bound_x = steps * (5.0 / m as f64).max(2.0) * d_inf;
    let bound_y = steps * 8.0 * d_inf;
    ((sx, bound_x), (sy, bound_y))
}

pub fn run_dual_extrapolation(prob: &BarycenterProblem, eps: f64, variant: ThetaVariant) -> Result<SolveOutput> {
    let cfg = de_config(prob, eps, variant)?;
    run_dual_extrapolation_with(prob, &cfg, &RunOptions::new())
}

/// Runs `min(cfg.outer_iters, opts.max_iters)` outer iterations. The
/// certificate is evaluated after every iteration when early exit is on;
/// records are kept at the log stride.
pub fn run_dual_extrapolation_with(
    prob: &BarycenterProblem,
    cfg: &DeConfig,
    opts: &RunOptions<'_>,
) -> Result<SolveOutput> {
    let n = prob.n();
    let m = prob.m();
    let d_inf = prob.cost().d_inf();
    let iters = opts.max_iters.map_or(cfg.outer_iters, |c| c.min(cfg.outer_iters)).max(1);
    let stride = opts.log_stride.unwrap_or((iters / 200).max(1));
    let clock = Stopwatch::start();
    let mut state = DeState::initial(n, m, d_inf)?;
    let mut records = Vec::new();
    let mut notes = Vec::new();
    let mut early_exit = false;
    let mut last_gap = f64::INFINITY;
    let mut bound_violations = 0usize;
    while state.k < iters {
        de_iteration(&mut state, cfg, prob)?;
        let ((sx, bx), (sy, by)) = gradient_sum_bounds(&state, cfg, m, d_inf);
        if sx > bx * (1.0 + 1e-12) || sy > by * (1.0 + 1e-12) {
            bound_violations += 1;
            if bound_violations == 1 {
                notes.push(format!(
                    "gradient-sum bound exceeded at iteration {}: |s_x|_inf {sx} vs {bx}, |s_y|_1 {sy} vs {by}",
                    state.k
                ));
            }
        }
        let logged = state.k.is_multiple_of(stride) || state.k == iters;
        if logged || opts.early_exit {
            let (xa, ya) = state.averages();
            let (gap, objective, opt) = evaluate_pair(prob, &xa, &ya, if logged { opts.oracle } else { None })?;
            last_gap = gap;
            let stop = opts.early_exit && gap <= cfg.eps && state.k < iters;
            if logged || stop {
                let opt = match (logged, opts.oracle) {
                    (false, Some(f)) => Some(f(&xa.bary_histogram()?)),
                    _ => opt,
                };
                records.push(Record {
                    iteration: state.k,
                    elapsed_seconds: clock.seconds(),
                    duality_gap: gap,
                    objective,
                    optimality_gap: opt,
                });
            }
            if stop {
                early_exit = true;
                break;
            }
        }
    }
    notes.push(format!("gradient-sum bound violations: {bound_violations}"));
    notes.push(format!("prox sweeps: {}", state.sweeps));
    let (x, y) = state.averages();
    let report = RunReport {
        algorithm: Algorithm::DualExtrapolation,
        records,
        config: vec![
            ("eps".into(), cfg.eps.to_string()),
            ("kappa".into(), cfg.kappa.to_string()),
            ("theta".into(), cfg.theta.to_string()),
            ("theta_variant".into(), cfg.theta_variant.tag().into()),
            ("guaranteed_iters".into(), cfg.outer_iters.to_string()),
            ("inner_iters".into(), cfg.inner_iters.to_string()),
            ("eps_prime".into(), cfg.eps_prime.to_string()),
            ("warm_start".into(), cfg.warm_start.to_string()),
            ("am_tol".into(), cfg.am_tol.to_string()),
        ],
        barycenter: x.bary_histogram()?,
        final_gap: last_gap,
        iterations: state.k,
        early_exit,
        notes,
    };
    Ok(SolveOutput { x, y, report })
}
