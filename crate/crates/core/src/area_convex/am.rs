//! Alternating minimization for `min_z ⟨v, x⟩ + ⟨u, y⟩ + r(x, y)`.
//!
//! With `y` fixed the problem separates into one softmax per plan plus one for
//! the barycenter; with `x` fixed every dual coordinate is a clipped 1-D
//! quadratic. A sweep performs both half-steps and costs `O(mn²)`.
//!
//! The plan exponent `(m/(20‖d‖∞)) vᵢ + (1/10) Aᵀ(yᵢ²)` factors into a fixed
//! part and a rank-one part, so the exponentials of the fixed part are taken
//! once per solve and a sweep only multiplies by row and column factors.

use crate::error::{Error, Result};
use crate::numeric::log_normalize;
use crate::operator::dot;
use crate::problem::{clip_unit, DualPoint, PrimalPoint};

use super::regularizer;

/// Linear terms of the prox objective. `v` and `u` are laid out like a primal
/// and a dual point but are unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct AmProblem {
    pub v: PrimalPoint,
    pub u: DualPoint,
}

impl AmProblem {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            v: PrimalPoint::zeros(n, m),
            u: DualPoint::zeros(n, m),
        }
    }
}

/// `H(x, y) = ⟨v, x⟩ + ⟨u, y⟩ + r(x, y)`.
pub fn am_objective(prob: &AmProblem, x: &PrimalPoint, y: &DualPoint, d_inf: f64) -> f64 {
    let linear_x: f64 = prob
        .v
        .plans
        .iter()
        .zip(&x.plans)
        .map(|(a, b)| dot(a, b))
        .sum::<f64>()
        + dot(&prob.v.bary, &x.bary);
    let linear_y: f64 = prob.u.duals.iter().zip(&y.duals).map(|(a, b)| dot(a, b)).sum();
    linear_x + linear_y + regularizer(x, y, d_inf)
}

/// `M = ⌈24 ln((88‖d‖∞/ε² + 4/ε) Θ + 36‖d‖∞/ε)⌉`, at least one.
pub fn am_inner_iterations(eps: f64, theta: f64, d_inf: f64) -> Result<usize> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("target accuracy {eps} must be positive")));
    }
    let arg = (88.0 * d_inf / (eps * eps) + 4.0 / eps) * theta + 36.0 * d_inf / eps;
    let m = (24.0 * arg.ln()).ceil();
    Ok(if m.is_finite() && m >= 1.0 { m as usize } else { 1 })
}

/// Reusable alternating-minimization workspace.
#[derive(Debug, Clone)]
pub struct AmSolver {
    n: usize,
    m: usize,
    d_inf: f64,
    x: PrimalPoint,
    y: DualPoint,
    /// `exp(−(m/(20‖d‖∞)) vᵢ − max)` per plan.
    base: Vec<Vec<f64>>,
    /// `−v_{m+1}/(10‖d‖∞)`.
    bary_base: Vec<f64>,
    /// `−(m/(4‖d‖∞)) uᵢ`.
    y_numer: Vec<Vec<f64>>,
    row_factor: Vec<f64>,
    col_factor: Vec<f64>,
    marg: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn numerical(iteration: usize, detail: String) -> Error {
    Error::Numerical {
        stage: "alternating minimization",
        iteration,
        detail,
    }
}

/// `clip(num / denom)`; when the quadratic coefficient vanishes the 1-D
/// problem is linear and its box minimizer is `sign(num)`.
fn clipped_ratio(num: f64, denom: f64) -> f64 {
    if denom > 0.0 {
        clip_unit(num / denom)
    } else if num == 0.0 {
        0.0
    } else {
        num.signum()
    }
}

impl AmSolver {
    pub fn new(n: usize, m: usize, d_inf: f64) -> Result<Self> {
        if !(d_inf > 0.0 && d_inf.is_finite()) {
            return Err(Error::Config(format!(
                "prox regularizer needs a positive cost scale, got {d_inf}"
            )));
        }
        let (x, y) = super::regularizer_argmin(n, m);
        Ok(Self {
            n,
            m,
            d_inf,
            x,
            y,
            base: vec![vec![0.0; n * n]; m],
            bary_base: vec![0.0; n],
            y_numer: vec![vec![0.0; 2 * n]; m],
            row_factor: vec![0.0; n],
            col_factor: vec![0.0; n],
            marg: vec![vec![0.0; 2 * n]; m],
            logits: vec![0.0; n],
        })
    }

    /// Installs new linear terms and resets the iterate to the regularizer's
    /// minimizer.
    pub fn load(&mut self, prob: &AmProblem) -> Result<()> {
        self.load_from(prob, None)
    }

    /// Installs new linear terms, starting from `start` if given.
    pub fn load_from(&mut self, prob: &AmProblem, start: Option<(&PrimalPoint, &DualPoint)>) -> Result<()> {
        let (n, m) = (self.n, self.m);
        prob.v.check_shape(n, m)?;
        prob.u.check_shape(n, m)?;
        let plan_scale = m as f64 / (20.0 * self.d_inf);
        for (i, (vi, base)) in prob.v.plans.iter().zip(&mut self.base).enumerate() {
            let min = vi.iter().copied().fold(f64::INFINITY, f64::min);
            if !min.is_finite() || vi.iter().any(|a| !a.is_finite()) {
                return Err(numerical(0, format!("non-finite linear term on plan {i}")));
            }
            for (b, &a) in base.iter_mut().zip(vi) {
                *b = (-plan_scale * (a - min)).exp();
            }
        }
        let bary_scale = 1.0 / (10.0 * self.d_inf);
        for (b, &a) in self.bary_base.iter_mut().zip(&prob.v.bary) {
            *b = -bary_scale * a;
        }
        let y_scale = m as f64 / (4.0 * self.d_inf);
        for (numer, ui) in self.y_numer.iter_mut().zip(&prob.u.duals) {
            for (a, &b) in numer.iter_mut().zip(ui) {
                *a = -y_scale * b;
            }
        }
        if self
            .bary_base
            .iter()
            .chain(self.y_numer.iter().flatten())
            .any(|a| !a.is_finite())
        {
            return Err(numerical(0, "non-finite linear term".into()));
        }
        match start {
            Some((x, y)) => {
                x.check_shape(n, m)?;
                y.check_shape(n, m)?;
                self.x.clone_from(x);
                self.y.clone_from(y);
            }
            None => {
                let (x, y) = super::regularizer_argmin(n, m);
                self.x = x;
                self.y = y;
            }
        }
        Ok(())
    }

    pub fn point(&self) -> (&PrimalPoint, &DualPoint) {
        (&self.x, &self.y)
    }

    pub fn into_point(self) -> (PrimalPoint, DualPoint) {
        (self.x, self.y)
    }

    /// One sweep: plans, then barycenter, then duals. Returns the largest
    /// absolute change of any coordinate. `sweep` is the 1-based index used
    /// in error messages.
    pub fn sweep(&mut self, sweep: usize) -> Result<f64> {
        let n = self.n;
        let mut change: f64 = 0.0;

        for i in 0..self.m {
            let yi = &self.y.duals[i];
            for j in 0..n {
                self.row_factor[j] = (-0.1 * yi[j] * yi[j]).exp();
                self.col_factor[j] = (-0.1 * yi[n + j] * yi[n + j]).exp();
            }
            let plan = &mut self.x.plans[i];
            let marg = &mut self.marg[i];
            marg.iter_mut().for_each(|a| *a = 0.0);
            let mut total = 0.0;
            for (j, (p_row, b_row)) in plan.chunks_exact_mut(n).zip(self.base[i].chunks_exact(n)).enumerate() {
                let rf = self.row_factor[j];
                let mut row_sum = 0.0;
                for (k, (p, &b)) in p_row.iter_mut().zip(b_row).enumerate() {
                    let w = rf * b * self.col_factor[k];
                    *p = w;
                    row_sum += w;
                    marg[n + k] += w;
                }
                marg[j] = row_sum;
                total += row_sum;
            }
            if !(total > 0.0 && total.is_finite()) {
                return Err(numerical(sweep, format!("plan {i} lost all mass")));
            }
            let inv = 1.0 / total;
            for p in plan.iter_mut() {
                *p *= inv;
            }
            marg.iter_mut().for_each(|a| *a *= inv);
        }

        for j in 0..n {
            let sq: f64 = self.y.duals.iter().map(|yi| yi[j] * yi[j]).sum();
            self.logits[j] = self.bary_base[j] - sq / (5.0 * self.m as f64);
        }
        let old_bary = self.x.bary.clone();
        if !log_normalize(&mut self.logits, &mut self.x.bary) {
            return Err(numerical(sweep, "barycenter lost all mass".into()));
        }
        for (a, b) in old_bary.iter().zip(&self.x.bary) {
            change = change.max((a - b).abs());
        }

        for i in 0..self.m {
            let numer = &self.y_numer[i];
            let marg = &self.marg[i];
            let yi = &mut self.y.duals[i];
            for j in 0..n {
                let row = clipped_ratio(numer[j], marg[j] + self.x.bary[j]);
                let col = clipped_ratio(numer[n + j], marg[n + j]);
                change = change.max((row - yi[j]).abs()).max((col - yi[n + j]).abs());
                yi[j] = row;
                yi[n + j] = col;
            }
        }
        if change.is_nan() {
            return Err(numerical(sweep, "NaN in dual block".into()));
        }
        Ok(change)
    }

    /// Up to `sweeps` sweeps; stops early once a sweep moves no barycenter or
    /// dual coordinate by more than `tol` (plans are a function of the duals,
    /// so they are then fixed too). Returns the sweeps performed.
    pub fn run(&mut self, sweeps: usize, tol: f64) -> Result<usize> {
        for t in 1..=sweeps {
            let change = self.sweep(t)?;
            if change <= tol {
                return Ok(t);
            }
        }
        Ok(sweeps)
    }

    /// Objective value after each of `sweeps` sweeps, no early stop.
    pub fn trace(&mut self, prob: &AmProblem, sweeps: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(sweeps);
        for t in 1..=sweeps {
            self.sweep(t)?;
            out.push(am_objective(prob, &self.x, &self.y, self.d_inf));
        }
        Ok(out)
    }
}

/// `sweeps` alternating-minimization sweeps from the regularizer's minimizer.
pub fn am_prox(prob: &AmProblem, sweeps: usize, d_inf: f64) -> Result<(PrimalPoint, DualPoint)> {
    if sweeps == 0 {
        return Err(Error::Config("alternating minimization needs at least one sweep".into()));
    }
    let mut solver = AmSolver::new(prob.v.n(), prob.v.m(), d_inf)?;
    solver.load(prob)?;
    solver.run(sweeps, -1.0)?;
    Ok(solver.into_point())
}
