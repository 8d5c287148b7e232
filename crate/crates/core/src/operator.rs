//! Matrix-free incidence operators, the saddle objective, its gradient
//! operator and the exact duality-gap certificate.
//!
//! None of the incidence matrices is ever formed. For a plan `x` (row-major,
//! length `n*n`) the marginal operator returns `(row sums; column sums)`; the
//! stacked operator over all measures subtracts the barycenter from the row
//! half of every block.

use crate::error::{Error, Result};
use crate::problem::{BarycenterProblem, DualPoint, PrimalPoint};

/// `A x`: row sums followed by column sums of the plan reshaped to `n x n`.
pub fn apply_marginals(x: &[f64], n: usize) -> Result<Vec<f64>> {
    if x.len() != n * n {
        return Err(Error::Shape(format!(
            "plan has length {}, expected {}",
            x.len(),
            n * n
        )));
    }
    let mut out = vec![0.0; 2 * n];
    marginals_into(x, n, &mut out);
    Ok(out)
}

/// `A^T y`: entry `(j, k)` is `y[j] + y[n + k]`.
pub fn apply_marginals_adjoint(y: &[f64], n: usize) -> Result<Vec<f64>> {
    if y.len() != 2 * n {
        return Err(Error::Shape(format!(
            "dual block has length {}, expected {}",
            y.len(),
            2 * n
        )));
    }
    let mut out = vec![0.0; n * n];
    for (j, row) in out.chunks_exact_mut(n).enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = y[j] + y[n + k];
        }
    }
    Ok(out)
}

/// Unchecked kernel of [`apply_marginals`]; `out` has length `2n`.
pub(crate) fn marginals_into(x: &[f64], n: usize, out: &mut [f64]) {
    let (rows, cols) = out.split_at_mut(n);
    cols.iter_mut().for_each(|c| *c = 0.0);
    for (j, row) in x.chunks_exact(n).enumerate() {
        let mut s = 0.0;
        for (k, &v) in row.iter().enumerate() {
            s += v;
            cols[k] += v;
        }
        rows[j] = s;
    }
}

/// `𝐀 x`: block `i` is `(rowsums(x_i) - p ; colsums(x_i))`.
pub fn big_operator_apply(x: &PrimalPoint) -> Result<Vec<f64>> {
    let n = x.n();
    let m = x.m();
    x.check_shape(n, m)?;
    let mut out = vec![0.0; 2 * m * n];
    for (plan, block) in x.plans.iter().zip(out.chunks_exact_mut(2 * n)) {
        marginals_into(plan, n, block);
        for (b, p) in block[..n].iter_mut().zip(&x.bary) {
            *b -= p;
        }
    }
    Ok(out)
}

/// `𝐀^T y` split as the plan blocks `A^T y_i` and the barycenter block
/// `-Σ_i [y_i]_{1..n}`.
pub fn big_operator_adjoint(y: &DualPoint, n: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    y.check_shape(n, y.m())?;
    let mut plans = Vec::with_capacity(y.m());
    let mut bary = vec![0.0; n];
    for yi in &y.duals {
        plans.push(apply_marginals_adjoint(yi, n)?);
        for (b, v) in bary.iter_mut().zip(&yi[..n]) {
            *b -= v;
        }
    }
    Ok((plans, bary))
}

fn check_points(x: &PrimalPoint, y: &DualPoint, prob: &BarycenterProblem) -> Result<()> {
    x.check_shape(prob.n(), prob.m())?;
    y.check_shape(prob.n(), prob.m())
}

/// Saddle objective `(1/m)(𝐝ᵀ𝐱 + 2‖d‖∞(𝐲ᵀ𝐀𝐱 − 𝐜ᵀ𝐲))`.
pub fn objective_f(x: &PrimalPoint, y: &DualPoint, prob: &BarycenterProblem) -> Result<f64> {
    check_points(x, y, prob)?;
    let n = prob.n();
    let m = prob.m() as f64;
    let d = prob.cost().d();
    let scale = 2.0 * prob.cost().d_inf();
    let mut marg = vec![0.0; 2 * n];
    let mut total = 0.0;
    for ((plan, yi), q) in x.plans.iter().zip(&y.duals).zip(prob.measures()) {
        total += dot(d, plan);
        marginals_into(plan, n, &mut marg);
        let q = q.as_slice();
        let mut bilinear = 0.0;
        for j in 0..n {
            bilinear += yi[j] * (marg[j] - x.bary[j]);
            bilinear += yi[n + j] * (marg[n + j] - q[j]);
        }
        total += scale * bilinear;
    }
    Ok(total / m)
}

/// Gradient operator `G = (∇ₓF, −∇ᵧF)` in block form.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// Plan blocks `(1/m)(d + 2‖d‖∞ A^T y_i)`.
    pub plans: Vec<Vec<f64>>,
    /// Barycenter block `−(2‖d‖∞/m) Σ_i [y_i]_{1..n}`.
    pub bary: Vec<f64>,
    /// Dual blocks `(2‖d‖∞/m)((p; q_i) − A x_i)`.
    pub duals: Vec<Vec<f64>>,
}

impl Gradient {
    /// Primal part as one vector of length `m n² + n`.
    pub fn flat_x(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.plans.iter().flatten().copied().collect();
        out.extend_from_slice(&self.bary);
        out
    }

    /// Dual part as one vector of length `2mn`.
    pub fn flat_y(&self) -> Vec<f64> {
        self.duals.iter().flatten().copied().collect()
    }
}

pub fn gradient_operator(
    x: &PrimalPoint,
    y: &DualPoint,
    prob: &BarycenterProblem,
) -> Result<Gradient> {
    check_points(x, y, prob)?;
    let n = prob.n();
    let m = prob.m();
    let mut g = Gradient {
        plans: vec![vec![0.0; n * n]; m],
        bary: vec![0.0; n],
        duals: vec![vec![0.0; 2 * n]; m],
    };
    gradient_x_into(&y.duals, prob, &mut g.plans, &mut g.bary);
    gradient_y_into(&x.plans, &x.bary, prob, &mut g.duals);
    Ok(g)
}

/// Primal half of the gradient operator, written into preallocated blocks.
pub(crate) fn gradient_x_into(
    duals: &[Vec<f64>],
    prob: &BarycenterProblem,
    plans_out: &mut [Vec<f64>],
    bary_out: &mut [f64],
) {
    let n = prob.n();
    let m = prob.m() as f64;
    let d = prob.cost().d();
    let scale = 2.0 * prob.cost().d_inf();
    bary_out.iter_mut().for_each(|b| *b = 0.0);
    for (yi, out) in duals.iter().zip(plans_out.iter_mut()) {
        let (rows, cols) = yi.split_at(n);
        for (j, (out_row, d_row)) in out.chunks_exact_mut(n).zip(d.chunks_exact(n)).enumerate() {
            for ((o, &dc), &c) in out_row.iter_mut().zip(d_row).zip(cols) {
                *o = (dc + scale * (rows[j] + c)) / m;
            }
        }
        for (b, r) in bary_out.iter_mut().zip(rows) {
            *b -= r;
        }
    }
    bary_out.iter_mut().for_each(|b| *b *= scale / m);
}

/// Dual half of the gradient operator, written into preallocated blocks.
pub(crate) fn gradient_y_into(
    plans: &[Vec<f64>],
    bary: &[f64],
    prob: &BarycenterProblem,
    duals_out: &mut [Vec<f64>],
) {
    let n = prob.n();
    let factor = 2.0 * prob.cost().d_inf() / prob.m() as f64;
    for ((plan, q), out) in plans.iter().zip(prob.measures()).zip(duals_out.iter_mut()) {
        marginals_into(plan, n, out);
        let q = q.as_slice();
        for j in 0..n {
            out[j] = factor * (bary[j] - out[j]);
            out[n + j] = factor * (q[j] - out[n + j]);
        }
    }
}

/// `max_{𝐲∈𝒴} F(𝐱, 𝐲) = (1/m)(𝐝ᵀ𝐱 + 2‖d‖∞‖𝐀𝐱 − 𝐜‖₁)`; the box maximizer is
/// the sign vector of the residual.
pub fn primal_value(x: &PrimalPoint, prob: &BarycenterProblem) -> Result<f64> {
    x.check_shape(prob.n(), prob.m())?;
    let n = prob.n();
    let d = prob.cost().d();
    let scale = 2.0 * prob.cost().d_inf();
    let mut marg = vec![0.0; 2 * n];
    let mut total = 0.0;
    for (plan, q) in x.plans.iter().zip(prob.measures()) {
        total += dot(d, plan);
        marginals_into(plan, n, &mut marg);
        let q = q.as_slice();
        let mut resid = 0.0;
        for j in 0..n {
            resid += (marg[j] - x.bary[j]).abs() + (marg[n + j] - q[j]).abs();
        }
        total += scale * resid;
    }
    Ok(total / prob.m() as f64)
}

/// `min_{𝐱∈𝒳} F(𝐱, 𝐲)`: every simplex block contributes its smallest linear
/// coefficient, then the constant `−(2‖d‖∞/m) 𝐜ᵀ𝐲` is added.
pub fn dual_value(y: &DualPoint, prob: &BarycenterProblem) -> Result<f64> {
    y.check_shape(prob.n(), prob.m())?;
    let n = prob.n();
    let m = prob.m() as f64;
    let d = prob.cost().d();
    let scale = 2.0 * prob.cost().d_inf();
    let mut total = 0.0;
    let mut bary_coef = vec![0.0; n];
    for (yi, q) in y.duals.iter().zip(prob.measures()) {
        let (rows, cols) = yi.split_at(n);
        let mut best = f64::INFINITY;
        for (j, d_row) in d.chunks_exact(n).enumerate() {
            for (&dc, &c) in d_row.iter().zip(cols) {
                best = best.min(dc + scale * (rows[j] + c));
            }
        }
        total += best / m;
        total -= scale / m * dot(q.as_slice(), cols);
        for (b, r) in bary_coef.iter_mut().zip(rows) {
            *b -= scale / m * r;
        }
    }
    total += bary_coef.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(total)
}

/// Exact duality gap `max_𝐲 F(x̃, 𝐲) − min_𝐱 F(𝐱, ỹ)`.
pub fn duality_gap(x: &PrimalPoint, y: &DualPoint, prob: &BarycenterProblem) -> Result<f64> {
    Ok(primal_value(x, prob)? - dual_value(y, prob)?)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
