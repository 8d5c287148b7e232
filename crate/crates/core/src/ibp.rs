//! Iterative Bregman projections for the entropically regularized barycenter.
//!
//! With kernel `K = exp(−C/γ)` every measure carries scalings `(uᵢ, vᵢ)` and
//! plan `diag(uᵢ) K diag(vᵢ)`. One iteration matches the column marginals
//! (`vᵢ = qᵢ / Kᵀuᵢ`), sets the barycenter to the geometric mean of the row
//! marginals `p = Πᵢ (K vᵢ)^{1/m}`, and matches the row marginals to it
//! (`uᵢ = p / K vᵢ`).
//!
//! The naive variant works with `K` and the scalings directly, so it breaks
//! down once `exp(−C/γ)` underflows. The stabilized variant keeps potentials
//! `f = γ ln u`, `g = γ ln v` and evaluates every kernel product as a
//! log-sum-exp.

use crate::error::{Error, Result};
use crate::numeric::{log_normalize, logsumexp};
use crate::problem::{clip_unit, BarycenterProblem, DualPoint, Histogram, PrimalPoint};
use crate::report::{evaluate_pair, Algorithm, Record, RunOptions, RunReport, SolveOutput, Stopwatch};

/// Mean column-marginal `ℓ₁` violation at which the iteration stops.
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpConfig {
    /// Entropic regularization `γ > 0`.
    pub reg: f64,
    /// Iteration cap.
    pub iters: usize,
    pub stabilized: bool,
    pub tol: f64,
}

impl IbpConfig {
    pub fn new(reg: f64, iters: usize, stabilized: bool) -> Self {
        Self {
            reg,
            iters,
            stabilized,
            tol: DEFAULT_TOL,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.reg > 0.0 && self.reg.is_finite()) {
            return Err(Error::Config(format!("regularization {} must be positive", self.reg)));
        }
        if self.iters == 0 {
            return Err(Error::Config("iteration cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of an IBP run.
#[derive(Debug, Clone)]
pub struct IbpOutput {
    /// Saddle pair built from the scalings; `x.bary` is the normalized
    /// barycenter and `report.final_gap` its certificate.
    pub solve: SolveOutput,
    /// False when the iteration cap was hit before the tolerance.
    pub converged: bool,
    /// Entropic dual objective after every iteration; non-decreasing.
    pub dual_objective: Vec<f64>,
    /// Mean column-marginal violation after the last iteration.
    pub marginal_violation: f64,
}

impl IbpOutput {
    pub fn barycenter(&self) -> &Histogram {
        &self.solve.report.barycenter
    }
}

/// Potentials `(fᵢ, gᵢ)` in units of cost, `ln p`, and the dual objective.
struct Iterate {
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    log_p: Vec<f64>,
}

/// Naive scaling iteration with an explicit kernel.
struct Naive<'a> {
    prob: &'a BarycenterProblem,
    kernel: Vec<f64>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    kv: Vec<Vec<f64>>,
    p: Vec<f64>,
}

impl<'a> Naive<'a> {
    fn new(prob: &'a BarycenterProblem, reg: f64) -> Result<Self> {
        let n = prob.n();
        let m = prob.m();
        let kernel: Vec<f64> = prob.cost().d().iter().map(|c| (-c / reg).exp()).collect();
        if kernel.chunks_exact(n).any(|row| row.iter().all(|&k| k == 0.0)) {
            return Err(Error::UnderflowDegenerate { iteration: 0 });
        }
        Ok(Self {
            prob,
            kernel,
            u: vec![vec![1.0; n]; m],
            v: vec![vec![1.0; n]; m],
            kv: vec![vec![0.0; n]; m],
            p: vec![0.0; n],
        })
    }

    fn step(&mut self, it: usize) -> Result<()> {
        let n = self.prob.n();
        let m = self.prob.m() as f64;
        let mut ktu = vec![0.0; n];
        let mut log_p = vec![0.0; n];
        for i in 0..self.u.len() {
            ktu.fill(0.0);
            for (row, &uj) in self.kernel.chunks_exact(n).zip(&self.u[i]) {
                for (acc, &k) in ktu.iter_mut().zip(row) {
                    *acc += k * uj;
                }
            }
            let q = self.prob.measures()[i].as_slice();
            for ((v, &qk), &den) in self.v[i].iter_mut().zip(q).zip(&ktu) {
                *v = if qk == 0.0 { 0.0 } else { qk / den };
            }
            for (kv, row) in self.kv[i].iter_mut().zip(self.kernel.chunks_exact(n)) {
                *kv = row.iter().zip(&self.v[i]).map(|(k, v)| k * v).sum();
            }
            for (lp, &kv) in log_p.iter_mut().zip(&self.kv[i]) {
                *lp += kv.ln() / m;
            }
        }
        for (p, lp) in self.p.iter_mut().zip(&log_p) {
            *p = lp.exp();
        }
        for (u, kv) in self.u.iter_mut().zip(&self.kv) {
            for ((uj, &pj), &kj) in u.iter_mut().zip(&self.p).zip(kv) {
                *uj = if pj == 0.0 { 0.0 } else { pj / kj };
            }
        }
        let finite = |v: &Vec<Vec<f64>>| v.iter().flatten().all(|a| a.is_finite());
        if !finite(&self.u) || !finite(&self.v) || !self.p.iter().all(|a| a.is_finite()) {
            return Err(Error::UnderflowDegenerate { iteration: it });
        }
        if self.p.iter().sum::<f64>() <= 0.0 {
            return Err(Error::UnderflowDegenerate { iteration: it });
        }
        Ok(())
    }

    fn column_violation(&self) -> f64 {
        let n = self.prob.n();
        let mut total = 0.0;
        for (i, (u, v)) in self.u.iter().zip(&self.v).enumerate() {
            let q = self.prob.measures()[i].as_slice();
            for k in 0..n {
                let col: f64 = (0..n).map(|j| u[j] * self.kernel[j * n + k]).sum::<f64>() * v[k];
                total += (col - q[k]).abs();
            }
        }
        total / self.u.len() as f64
    }

    fn iterate(&self, reg: f64) -> Iterate {
        let logs = |v: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            v.iter().map(|b| b.iter().map(|a| reg * a.ln()).collect()).collect()
        };
        Iterate {
            f: logs(&self.u),
            g: logs(&self.v),
            log_p: self.p.iter().map(|p| p.ln()).collect(),
        }
    }
}

/// Log-domain iteration.
struct Stabilized<'a> {
    prob: &'a BarycenterProblem,
    reg: f64,
    state: Iterate,
    log_kv: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl<'a> Stabilized<'a> {
    fn new(prob: &'a BarycenterProblem, reg: f64) -> Self {
        let n = prob.n();
        let m = prob.m();
        Self {
            prob,
            reg,
            state: Iterate {
                f: vec![vec![0.0; n]; m],
                g: vec![vec![0.0; n]; m],
                log_p: vec![0.0; n],
            },
            log_kv: vec![vec![0.0; n]; m],
            scratch: vec![0.0; n],
        }
    }

    /// `ln Σⱼ exp((fⱼ − C_jk)/γ)`.
    fn log_kt(&mut self, f: &[f64], k: usize) -> f64 {
        let n = f.len();
        let d = self.prob.cost().d();
        for (j, s) in self.scratch.iter_mut().enumerate() {
            *s = (f[j] - d[j * n + k]) / self.reg;
        }
        logsumexp(&self.scratch)
    }

    /// `ln Σₖ exp((gₖ − C_jk)/γ)`.
    fn log_k(&mut self, g: &[f64], j: usize) -> f64 {
        let n = g.len();
        let row = &self.prob.cost().d()[j * n..(j + 1) * n];
        for ((s, &gk), &c) in self.scratch.iter_mut().zip(g).zip(row) {
            *s = (gk - c) / self.reg;
        }
        logsumexp(&self.scratch)
    }

    fn step(&mut self, it: usize) -> Result<()> {
        let n = self.prob.n();
        let m = self.prob.m() as f64;
        let mut log_p = vec![0.0; n];
        for i in 0..self.state.f.len() {
            let f = self.state.f[i].clone();
            for k in 0..n {
                let qk = self.prob.measures()[i].as_slice()[k];
                self.state.g[i][k] = if qk == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    self.reg * (qk.ln() - self.log_kt(&f, k))
                };
            }
            let g = self.state.g[i].clone();
            for j in 0..n {
                let l = self.log_k(&g, j);
                self.log_kv[i][j] = l;
                log_p[j] += l / m;
            }
        }
        for (f, lkv) in self.state.f.iter_mut().zip(&self.log_kv) {
            for ((fj, &lp), &l) in f.iter_mut().zip(&log_p).zip(lkv) {
                *fj = if lp == f64::NEG_INFINITY { f64::NEG_INFINITY } else { self.reg * (lp - l) };
            }
        }
        self.state.log_p = log_p;
        let bad = self
            .state
            .f
            .iter()
            .chain(&self.state.g)
            .flatten()
            .chain(&self.state.log_p)
            .any(|a| a.is_nan() || *a == f64::INFINITY);
        if bad {
            return Err(Error::Numerical {
                stage: "stabilized IBP",
                iteration: it,
                detail: "NaN potential".into(),
            });
        }
        Ok(())
    }

    fn column_violation(&mut self) -> f64 {
        let n = self.prob.n();
        let mut total = 0.0;
        for i in 0..self.state.f.len() {
            let f = self.state.f[i].clone();
            for k in 0..n {
                let q = self.prob.measures()[i].as_slice()[k];
                let col = (self.state.g[i][k] / self.reg + self.log_kt(&f, k)).exp();
                total += if q == 0.0 && col.is_nan() { 0.0 } else { (col - q).abs() };
            }
        }
        total / self.state.f.len() as f64
    }
}

/// `γ (1/m) Σᵢ (⟨ln vᵢ, qᵢ⟩ − ⟨uᵢ, K vᵢ⟩) + γ ΣK`, evaluated right after the
/// row update where `⟨uᵢ, K vᵢ⟩ = Σ p`.
fn dual_objective(state: &Iterate, prob: &BarycenterProblem, reg: f64, kernel_mass: f64) -> f64 {
    let m = prob.m() as f64;
    let mut total = 0.0;
    for (g, q) in state.g.iter().zip(prob.measures()) {
        for (&gk, &qk) in g.iter().zip(q.as_slice()) {
            if qk > 0.0 {
                total += gk * qk;
            }
        }
    }
    let p_mass: f64 = state.log_p.iter().map(|l| l.exp()).sum();
    total / m + reg * (kernel_mass - p_mass)
}

/// Normalized plans, normalized barycenter and box-clipped duals
/// `yᵢ = clip(−(fᵢ; gᵢ)/(2‖d‖∞))` built from the potentials.
fn saddle_pair(state: &Iterate, prob: &BarycenterProblem, reg: f64) -> Result<(PrimalPoint, DualPoint)> {
    let n = prob.n();
    let d = prob.cost().d();
    let d_inf = prob.cost().d_inf();
    let mut x = PrimalPoint::zeros(n, prob.m());
    let mut logits = vec![0.0; n * n];
    for (i, plan) in x.plans.iter_mut().enumerate() {
        for j in 0..n {
            for k in 0..n {
                logits[j * n + k] = (state.f[i][j] + state.g[i][k] - d[j * n + k]) / reg;
            }
        }
        if !log_normalize(&mut logits, plan) {
            return Err(Error::Numerical {
                stage: "IBP",
                iteration: 0,
                detail: format!("plan {i} has no finite mass"),
            });
        }
    }
    let mut lp = state.log_p.clone();
    if !log_normalize(&mut lp, &mut x.bary) {
        return Err(Error::Numerical {
            stage: "IBP",
            iteration: 0,
            detail: "barycenter has no finite mass".into(),
        });
    }
    let mut y = DualPoint::zeros(n, prob.m());
    let scale = if d_inf > 0.0 { 1.0 / (2.0 * d_inf) } else { 0.0 };
    for (i, yi) in y.duals.iter_mut().enumerate() {
        for j in 0..n {
            yi[j] = clip_unit(-state.f[i][j] * scale);
            yi[n + j] = clip_unit(-state.g[i][j] * scale);
        }
    }
    Ok((x, y))
}

/// Runs IBP until the mean column-marginal violation drops to `cfg.tol` or
/// the cap. `opts.max_iters` lowers the cap; `opts.log_stride` sets the record
/// spacing (default: every iteration up to 200 records).
pub fn ibp_barycenter(prob: &BarycenterProblem, cfg: &IbpConfig, opts: &RunOptions<'_>) -> Result<IbpOutput> {
    cfg.validate()?;
    let reg = cfg.reg;
    let iters = opts.max_iters.map_or(cfg.iters, |c| c.min(cfg.iters)).max(1);
    let stride = opts.log_stride.unwrap_or((iters / 200).max(1));
    let kernel_mass: f64 = prob.cost().d().iter().map(|c| (-c / reg).exp()).sum();
    let clock = Stopwatch::start();
    let mut naive = if cfg.stabilized { None } else { Some(Naive::new(prob, reg)?) };
    let mut stab = if cfg.stabilized { Some(Stabilized::new(prob, reg)) } else { None };
    let mut records = Vec::new();
    let mut dual_trace = Vec::new();
    let mut converged = false;
    let mut violation = f64::INFINITY;
    let mut last_pair = None;
    let mut done = 0;
    for it in 1..=iters {
        let iterate = match (&mut naive, &mut stab) {
            (Some(nv), _) => {
                nv.step(it)?;
                violation = nv.column_violation();
                nv.iterate(reg)
            }
            (_, Some(st)) => {
                st.step(it)?;
                violation = st.column_violation();
                Iterate {
                    f: st.state.f.clone(),
                    g: st.state.g.clone(),
                    log_p: st.state.log_p.clone(),
                }
            }
            _ => unreachable!("exactly one variant is active"),
        };
        dual_trace.push(dual_objective(&iterate, prob, reg, kernel_mass));
        done = it;
        converged = violation <= cfg.tol;
        let logged = it.is_multiple_of(stride) || it == iters || converged;
        if logged {
            let (x, y) = saddle_pair(&iterate, prob, reg)?;
            let (gap, objective, opt) = evaluate_pair(prob, &x, &y, opts.oracle)?;
            records.push(Record {
                iteration: it,
                elapsed_seconds: clock.seconds(),
                duality_gap: gap,
                objective,
                optimality_gap: opt,
            });
            last_pair = Some((x, y, gap));
        }
        if converged {
            break;
        }
    }
    let (x, y, gap) = last_pair.expect("the final iteration is always logged");
    let mut notes = vec![format!("column marginal violation: {violation}")];
    if !converged {
        notes.push(format!("iteration cap {iters} reached before tolerance {}", cfg.tol));
    }
    let report = RunReport {
        algorithm: Algorithm::Ibp,
        records,
        config: vec![
            ("reg".into(), reg.to_string()),
            ("iters".into(), cfg.iters.to_string()),
            ("stabilized".into(), cfg.stabilized.to_string()),
            ("tol".into(), cfg.tol.to_string()),
        ],
        barycenter: x.bary_histogram()?,
        final_gap: gap,
        iterations: done,
        early_exit: converged,
        notes,
    };
    Ok(IbpOutput {
        solve: SolveOutput { x, y, report },
        converged,
        dual_objective: dual_trace,
        marginal_violation: violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::CostData;

    fn grid_problem(n: usize, measures: Vec<Histogram>) -> BarycenterProblem {
        let pts: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let cost = CostData::from_points(&pts, 2.0).unwrap().sup_normalized().unwrap();
        BarycenterProblem::new(measures, cost).unwrap()
    }

    fn bump(n: usize, center: f64, width: f64) -> Histogram {
        Histogram::normalized((0..n).map(|i| (-(i as f64 - center).powi(2) / width).exp()).collect()).unwrap()
    }

    #[test]
    fn config_validation() {
        let prob = grid_problem(3, vec![Histogram::uniform(3)]);
        let opts = RunOptions::new();
        assert!(matches!(
            ibp_barycenter(&prob, &IbpConfig::new(0.0, 10, false), &opts),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ibp_barycenter(&prob, &IbpConfig::new(0.1, 0, false), &opts),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn tiny_regularization_underflows_naive() {
        let n = 100;
        let prob = grid_problem(n, vec![bump(n, 20.0, 30.0), bump(n, 70.0, 50.0)]);
        let res = ibp_barycenter(&prob, &IbpConfig::new(1e-5, 500, false), &RunOptions::new());
        assert!(matches!(res, Err(Error::UnderflowDegenerate { .. })), "{res:?}");
    }

    #[test]
    fn tiny_regularization_stabilized_stays_on_simplex() {
        let n = 30;
        let prob = grid_problem(n, vec![bump(n, 5.0, 4.0), bump(n, 22.0, 6.0)]);
        let out = ibp_barycenter(&prob, &IbpConfig::new(1e-5, 50, true), &RunOptions::new()).unwrap();
        let p = out.barycenter().as_slice();
        assert!(p.iter().all(|a| a.is_finite() && *a >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn naive_and_stabilized_agree() {
        let n = 20;
        let prob = grid_problem(n, vec![bump(n, 4.0, 3.0), bump(n, 14.0, 5.0), bump(n, 9.0, 8.0)]);
        let opts = RunOptions::new();
        let a = ibp_barycenter(&prob, &IbpConfig::new(0.05, 2000, false), &opts).unwrap();
        let b = ibp_barycenter(&prob, &IbpConfig::new(0.05, 2000, true), &opts).unwrap();
        assert_eq!(a.solve.report.iterations, b.solve.report.iterations);
        assert!(a.barycenter().total_variation(b.barycenter()) < 1e-8);
    }

    #[test]
    fn dual_objective_is_nondecreasing() {
        let n = 12;
        let prob = grid_problem(n, vec![bump(n, 2.0, 2.0), bump(n, 9.0, 3.0)]);
        for stabilized in [false, true] {
            let out = ibp_barycenter(&prob, &IbpConfig::new(0.1, 300, stabilized), &RunOptions::new()).unwrap();
            for w in out.dual_objective.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "{} < {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn single_measure_recovers_it() {
        let n = 10;
        let q = bump(n, 3.0, 2.0);
        let prob = grid_problem(n, vec![q.clone()]);
        let out = ibp_barycenter(&prob, &IbpConfig::new(0.002, 5000, true), &RunOptions::new()).unwrap();
        assert!(out.converged);
        assert!(out.barycenter().total_variation(&q) < 1e-3);
    }

    #[test]
    fn cap_without_convergence_is_flagged() {
        let n = 10;
        let prob = grid_problem(n, vec![bump(n, 1.0, 2.0), bump(n, 8.0, 2.0)]);
        let out = ibp_barycenter(&prob, &IbpConfig::new(0.01, 2, true), &RunOptions::new()).unwrap();
        assert!(!out.converged);
        assert_eq!(out.solve.report.iterations, 2);
        assert!(out.solve.report.notes.iter().any(|s| s.contains("cap")));
    }
}
