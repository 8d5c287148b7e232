//! Mirror prox on the product entropy / Euclidean geometry.
//!
//! Each iteration takes an extrapolation step from `(x, y)` to `(u, v)` using
//! the gradient at `(x, y)`, then a main step from `(x, y)` using the gradient
//! at `(u, v)`. Dual steps are projected onto the box, primal steps are
//! multiplicative and kept in the log domain. The returned pair is the
//! running average of the extrapolation points.

use crate::error::{Error, Result};
use crate::numeric::log_normalize;
use crate::operator::marginals_into;
use crate::problem::{clip_unit, BarycenterProblem, DualPoint, PrimalPoint};
use crate::report::{evaluate_pair, Algorithm, Record, RunOptions, RunReport, SolveOutput, Stopwatch};

/// Which step-size scaling to use for the plan and barycenter exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// `β = 6‖d‖∞η ln n`, `γ = 3mη ln n`.
    AsPrinted,
    /// Scaling implied by the prox weights `1/R²_𝒳`: `β` and `γ` divided by `m`.
    #[default]
    Derived,
}

impl Scaling {
    pub fn tag(self) -> &'static str {
        match self {
            Scaling::AsPrinted => "printed",
            Scaling::Derived => "derived",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpConfig {
    pub eta: f64,
    /// Dual step.
    pub alpha: f64,
    /// Barycenter exponent scale.
    pub beta: f64,
    /// Plan exponent scale.
    pub gamma: f64,
    /// Iteration count guaranteeing a gap of at most `eps`.
    pub iters: usize,
    pub scaling: Scaling,
}

impl MpConfig {
    /// Step constants for a given learning rate.
    pub fn from_eta(eta: f64, n: usize, m: usize, d_inf: f64, iters: usize, scaling: Scaling) -> Self {
        let ln_n = (n as f64).ln();
        let mut beta = 6.0 * d_inf * eta * ln_n;
        let mut gamma = 3.0 * m as f64 * eta * ln_n;
        if scaling == Scaling::Derived {
            beta /= m as f64;
            gamma /= m as f64;
        }
        Self {
            eta,
            alpha: 2.0 * d_inf * eta * n as f64,
            beta,
            gamma,
            iters,
            scaling,
        }
    }
}

/// `η = 1/(4‖d‖∞√(6 n ln n))`, `N = ⌈8‖d‖∞√(6 n ln n)/ε⌉`.
pub fn mp_config(prob: &BarycenterProblem, eps: f64, scaling: Scaling) -> Result<MpConfig> {
    let d_inf = prob.cost().d_inf();
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("target accuracy {eps} must be positive")));
    }
    if d_inf <= 0.0 {
        return Err(Error::Config("cost matrix is identically zero".into()));
    }
    let n = prob.n() as f64;
    let root = (6.0 * n * n.ln()).sqrt();
    let eta = 1.0 / (4.0 * d_inf * root);
    let iters = (8.0 * d_inf * root / eps).ceil() as usize;
    Ok(MpConfig::from_eta(eta, prob.n(), prob.m(), d_inf, iters.max(1), scaling))
}

/// Iterates of the method plus running sums of the extrapolation points.
#[derive(Debug, Clone)]
pub struct MpState {
    pub x: PrimalPoint,
    pub y: DualPoint,
    pub u: PrimalPoint,
    pub v: DualPoint,
    pub sum_u: PrimalPoint,
    pub sum_v: DualPoint,
    /// Completed iterations.
    pub k: usize,
    log_plans: Vec<Vec<f64>>,
    log_bary: Vec<f64>,
    scratch_logits: Vec<f64>,
    scratch_marg: Vec<f64>,
}

impl MpState {
    /// Uniform plans, uniform barycenter, zero duals.
    pub fn initial(n: usize, m: usize) -> Self {
        let x = PrimalPoint::uniform(n, m);
        let log_plans = x.plans.iter().map(|p| p.iter().map(|v| v.ln()).collect()).collect();
        let log_bary = x.bary.iter().map(|v| v.ln()).collect();
        Self {
            u: x.clone(),
            sum_u: PrimalPoint::zeros(n, m),
            x,
            y: DualPoint::zeros(n, m),
            v: DualPoint::zeros(n, m),
            sum_v: DualPoint::zeros(n, m),
            k: 0,
            log_plans,
            log_bary,
            scratch_logits: vec![0.0; n * n],
            scratch_marg: vec![0.0; 2 * n],
        }
    }

    /// Running averages `(Σu/k, Σv/k)`.
    pub fn averages(&self) -> (PrimalPoint, DualPoint) {
        let w = 1.0 / self.k.max(1) as f64;
        (self.sum_u.scaled(w), self.sum_v.scaled(w))
    }
}

fn numerical(iteration: usize, detail: &str) -> Error {
    Error::Numerical {
        stage: "mirror prox",
        iteration,
        detail: detail.to_string(),
    }
}

/// Box-projected dual step `clip(y + α(A x − (p; q)))`.
fn dual_step(y: &[f64], plan: &[f64], p: &[f64], q: &[f64], alpha: f64, marg: &mut [f64], out: &mut [f64]) {
    let n = p.len();
    marginals_into(plan, n, marg);
    for j in 0..n {
        out[j] = clip_unit(y[j] + alpha * (marg[j] - p[j]));
        out[n + j] = clip_unit(y[n + j] + alpha * (marg[n + j] - q[j]));
    }
}

/// Writes `base − γ(d + 2‖d‖∞ Aᵀ y)` into `logits`.
fn plan_logits(base: &[f64], d: &[f64], y: &[f64], gamma: f64, scale: f64, logits: &mut [f64]) {
    let n = y.len() / 2;
    let (rows, cols) = y.split_at(n);
    for (j, ((l_row, b_row), d_row)) in logits
        .chunks_exact_mut(n)
        .zip(base.chunks_exact(n))
        .zip(d.chunks_exact(n))
        .enumerate()
    {
        for (((l, &b), &dc), &c) in l_row.iter_mut().zip(b_row).zip(d_row).zip(cols) {
            *l = b - gamma * (dc + scale * (rows[j] + c));
        }
    }
}

/// One mirror-prox iteration, in place.
pub fn mp_iteration(state: &mut MpState, cfg: &MpConfig, prob: &BarycenterProblem) -> Result<()> {
    let n = prob.n();
    let m = prob.m();
    let d = prob.cost().d();
    let scale = 2.0 * prob.cost().d_inf();
    let it = state.k + 1;
    let MpState {
        x,
        y,
        u,
        v,
        log_plans,
        log_bary,
        scratch_logits,
        scratch_marg,
        ..
    } = state;

    // Extrapolation point (u, s, v) from the gradient at (x, p, y).
    for i in 0..m {
        let q = prob.measures()[i].as_slice();
        dual_step(&y.duals[i], &x.plans[i], &x.bary, q, cfg.alpha, scratch_marg, &mut v.duals[i]);
        plan_logits(&log_plans[i], d, &y.duals[i], cfg.gamma, scale, scratch_logits);
        if !log_normalize(scratch_logits, &mut u.plans[i]) {
            return Err(numerical(it, "non-finite plan in extrapolation step"));
        }
    }
    let mut bary_logits = log_bary.clone();
    for yi in &y.duals {
        for (l, r) in bary_logits.iter_mut().zip(&yi[..n]) {
            *l += cfg.beta * r;
        }
    }
    if !log_normalize(&mut bary_logits, &mut u.bary) {
        return Err(numerical(it, "non-finite barycenter in extrapolation step"));
    }

    // Main step from (x, p, y) with the gradient at (u, s, v).
    for i in 0..m {
        let q = prob.measures()[i].as_slice();
        let yi = y.duals[i].clone();
        dual_step(&yi, &u.plans[i], &u.bary, q, cfg.alpha, scratch_marg, &mut y.duals[i]);
        plan_logits(&log_plans[i], d, &v.duals[i], cfg.gamma, scale, scratch_logits);
        if !log_normalize(scratch_logits, &mut x.plans[i]) {
            return Err(numerical(it, "non-finite plan in main step"));
        }
        log_plans[i].copy_from_slice(scratch_logits);
    }
    for vi in &v.duals {
        for (l, r) in log_bary.iter_mut().zip(&vi[..n]) {
            *l += cfg.beta * r;
        }
    }
    if !log_normalize(log_bary, &mut x.bary) {
        return Err(numerical(it, "non-finite barycenter in main step"));
    }
    if v.duals.iter().flatten().any(|a| a.is_nan()) || y.duals.iter().flatten().any(|a| a.is_nan()) {
        return Err(numerical(it, "NaN in dual iterate"));
    }

    state.sum_u.add_scaled(&state.u, 1.0);
    state.sum_v.add_scaled(&state.v, 1.0);
    state.k = it;
    Ok(())
}

/// Runs the guaranteed iteration count with early exit on the certificate.
pub fn run_mirror_prox(prob: &BarycenterProblem, eps: f64, scaling: Scaling) -> Result<SolveOutput> {
    let cfg = mp_config(prob, eps, scaling)?;
    run_mirror_prox_with(prob, &cfg, eps, &RunOptions::new())
}

/// Runs `min(cfg.iters, opts.max_iters)` iterations from the standard start.
pub fn run_mirror_prox_with(
    prob: &BarycenterProblem,
    cfg: &MpConfig,
    eps: f64,
    opts: &RunOptions<'_>,
) -> Result<SolveOutput> {
    let n = prob.n();
    let m = prob.m();
    let iters = opts.max_iters.map_or(cfg.iters, |c| c.min(cfg.iters)).max(1);
    let stride = opts.log_stride.unwrap_or((iters / 200).max(1));
    let clock = Stopwatch::start();
    let mut state = MpState::initial(n, m);
    let mut records = Vec::new();
    let mut early_exit = false;
    let mut last_gap = f64::INFINITY;
    while state.k < iters {
        mp_iteration(&mut state, cfg, prob)?;
        if state.k.is_multiple_of(stride) || state.k == iters {
            let (xa, ya) = state.averages();
            let (gap, objective, opt) = evaluate_pair(prob, &xa, &ya, opts.oracle)?;
            last_gap = gap;
            records.push(Record {
                iteration: state.k,
                elapsed_seconds: clock.seconds(),
                duality_gap: gap,
                objective,
                optimality_gap: opt,
            });
            if opts.early_exit && gap <= eps && state.k < iters {
                early_exit = true;
                break;
            }
        }
    }
    let (x, y) = state.averages();
    let report = RunReport {
        algorithm: Algorithm::MirrorProx,
        records,
        config: vec![
            ("eps".into(), eps.to_string()),
            ("eta".into(), cfg.eta.to_string()),
            ("alpha".into(), cfg.alpha.to_string()),
            ("beta".into(), cfg.beta.to_string()),
            ("gamma".into(), cfg.gamma.to_string()),
            ("guaranteed_iters".into(), cfg.iters.to_string()),
            ("scaling".into(), cfg.scaling.tag().into()),
        ],
        barycenter: x.bary_histogram()?,
        final_gap: last_gap,
        iterations: state.k,
        early_exit,
        notes: Vec::new(),
    };
    Ok(SolveOutput { x, y, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{apply_marginals, duality_gap};
    use crate::problem::{CostData, Histogram};

    fn t1() -> BarycenterProblem {
        let cost = CostData::from_vec(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        BarycenterProblem::new(vec![Histogram::dirac(2, 0)], cost).unwrap()
    }

    #[test]
    fn config_iteration_count() {
        let cost = CostData::from_points(&[0.0, 1.0, 2.0, 3.0], 1.0)
            .unwrap()
            .sup_normalized()
            .unwrap();
        let prob = BarycenterProblem::new(vec![Histogram::uniform(4); 2], cost).unwrap();
        let cfg = mp_config(&prob, 0.1, Scaling::Derived).unwrap();
        assert_eq!(cfg.iters, 462);
    }

    #[test]
    fn config_learning_rate() {
        let cfg = mp_config(&t1(), 1.0, Scaling::Derived).unwrap();
        let expected = 1.0 / (4.0 * (12.0 * 2f64.ln()).sqrt());
        assert!((cfg.eta - expected).abs() < 1e-15);
        assert!((cfg.eta - 0.08671).abs() < 5e-5);
    }

    #[test]
    fn printed_constants() {
        let cfg = MpConfig::from_eta(0.1, 2, 3, 1.0, 1, Scaling::AsPrinted);
        let ln2 = 2f64.ln();
        assert!((cfg.alpha - 0.4).abs() < 1e-15);
        assert!((cfg.beta - 0.6 * ln2).abs() < 1e-15);
        assert!((cfg.gamma - 0.9 * ln2).abs() < 1e-15);
        let derived = MpConfig::from_eta(0.1, 2, 3, 1.0, 1, Scaling::Derived);
        assert_eq!(derived.alpha, cfg.alpha);
        assert!((derived.beta - 0.2 * ln2).abs() < 1e-15);
        assert!((derived.gamma - 0.3 * ln2).abs() < 1e-15);
    }

    #[test]
    fn config_rejects_bad_inputs() {
        assert!(matches!(mp_config(&t1(), 0.0, Scaling::Derived), Err(Error::Config(_))));
        let zero = t1()
            .with_cost(CostData::from_vec(2, vec![0.0; 4]).unwrap())
            .unwrap();
        assert!(matches!(mp_config(&zero, 0.1, Scaling::Derived), Err(Error::Config(_))));
    }

    #[test]
    fn zero_gradient_start_is_a_fixed_point() {
        let cost = CostData::from_vec(2, vec![0.0; 4]).unwrap();
        let prob = BarycenterProblem::new(vec![Histogram::uniform(2); 2], cost).unwrap();
        let cfg = MpConfig::from_eta(0.1, 2, 2, 1.0, 3, Scaling::Derived);
        let mut st = MpState::initial(2, 2);
        let start = st.clone();
        mp_iteration(&mut st, &cfg, &prob).unwrap();
        for (a, b) in st.x.to_flat().iter().zip(start.x.to_flat()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(st.y, start.y);
        assert_eq!(st.v, start.v);
    }

    #[test]
    fn first_iteration_t1_by_hand() {
        // From the standard start: A x = (½,½,½,½), (p; q) = (½,½,1,0), so
        // v = clip(α·(0, 0, −½, ½)); with y = 0 the plan exponent is −γ d.
        let prob = t1();
        let cfg = mp_config(&prob, 0.5, Scaling::Derived).unwrap();
        let mut st = MpState::initial(2, 1);
        mp_iteration(&mut st, &cfg, &prob).unwrap();
        let a = cfg.alpha;
        let want_v = [0.0, 0.0, (-0.5 * a).max(-1.0), (0.5 * a).min(1.0)];
        for (got, want) in st.v.duals[0].iter().zip(want_v) {
            assert!((got - want).abs() < 1e-15);
        }
        let w: Vec<f64> = prob.cost().d().iter().map(|&c| (-cfg.gamma * c).exp()).collect();
        let z: f64 = w.iter().sum();
        for (got, want) in st.u.plans[0].iter().zip(w.iter().map(|v| v / z)) {
            assert!((got - want).abs() < 1e-15);
        }
        // s = p since y = 0
        assert!((st.u.bary[0] - 0.5).abs() < 1e-15);
        // y¹ = clip(α(A u − (s; q)))
        let au = apply_marginals(&st.u.plans[0], 2).unwrap();
        let want_y = [
            clip_unit(a * (au[0] - 0.5)),
            clip_unit(a * (au[1] - 0.5)),
            clip_unit(a * (au[2] - 1.0)),
            clip_unit(a * (au[3] - 0.0)),
        ];
        for (got, want) in st.y.duals[0].iter().zip(want_y) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn iterates_stay_feasible() {
        let prob = t1();
        let cfg = MpConfig::from_eta(2.0, 2, 1, 1.0, 50, Scaling::AsPrinted);
        let mut st = MpState::initial(2, 1);
        for _ in 0..50 {
            mp_iteration(&mut st, &cfg, &prob).unwrap();
            assert!(st.x.simplex_violation() < 1e-12);
            assert!(st.u.simplex_violation() < 1e-12);
            assert!(st.y.in_box() && st.v.in_box());
        }
    }

    #[test]
    fn single_iteration_average_is_first_extrapolation_point() {
        let prob = t1();
        let cfg = mp_config(&prob, 0.5, Scaling::Derived).unwrap();
        let out = run_mirror_prox_with(&prob, &cfg, 0.5, &RunOptions::new().with_max_iters(1)).unwrap();
        let mut st = MpState::initial(2, 1);
        mp_iteration(&mut st, &cfg, &prob).unwrap();
        assert_eq!(out.x, st.u);
        assert_eq!(out.y, st.v);
    }

    #[test]
    fn t1_reaches_target_gap() {
        let prob = t1();
        let out = run_mirror_prox(&prob, 0.5, Scaling::Derived).unwrap();
        let gap = duality_gap(&out.x, &out.y, &prob).unwrap();
        assert!(gap <= 0.5, "gap {gap}");
        assert_eq!(gap, out.report.final_gap);
    }
}
