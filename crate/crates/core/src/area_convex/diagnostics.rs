//! Numerical checks of the regularizer: area-convexity residuals, the
//! Hessian against its diagonal approximation, and the initial prox error.

use crate::error::{Error, Result};
use crate::operator::marginals_into;
use crate::problem::{DualPoint, PrimalPoint};

use super::regularizer;

/// Linear part of `G(a) − G(b)` paired with `e`:
/// `⟨(2‖d‖∞/m)(𝐀ᵀΔy, −𝐀Δx), e⟩`, where `e` is given as a primal/dual pair.
fn gradient_difference_dot(
    a: (&PrimalPoint, &DualPoint),
    b: (&PrimalPoint, &DualPoint),
    e: (&PrimalPoint, &DualPoint),
    d_inf: f64,
) -> f64 {
    let n = a.0.n();
    let m = a.0.m();
    let scale = 2.0 * d_inf / m as f64;
    let mut marg = vec![0.0; 2 * n];
    let mut dx = vec![0.0; n * n];
    let mut total = 0.0;
    for i in 0..m {
        let ya = &a.1.duals[i];
        let yb = &b.1.duals[i];
        let ex = &e.0.plans[i];
        let ey = &e.1.duals[i];
        // x-part: plan entry (Δy_j + Δy_{n+k}), barycenter entry −Δy_j
        for j in 0..n {
            let dr = ya[j] - yb[j];
            for k in 0..n {
                let dc = ya[n + k] - yb[n + k];
                total += (dr + dc) * ex[j * n + k];
            }
            total -= dr * e.0.bary[j];
        }
        // y-part: −(rowsum Δx − Δp; colsum Δx)
        for (d, (xa, xb)) in dx.iter_mut().zip(a.0.plans[i].iter().zip(&b.0.plans[i])) {
            *d = xa - xb;
        }
        marginals_into(&dx, n, &mut marg);
        for j in 0..n {
            let dp = a.0.bary[j] - b.0.bary[j];
            total -= (marg[j] - dp) * ey[j];
            total -= marg[n + j] * ey[n + j];
        }
    }
    scale * total
}

/// `κ(r(a) + r(b) + r(c) − 3r((a+b+c)/3)) − ⟨G(a) − G(b), b − c⟩`.
///
/// The constant part of the gradient operator cancels in `G(a) − G(b)`, so
/// only the bilinear part is evaluated.
pub fn area_convexity_residual(
    a: (&PrimalPoint, &DualPoint),
    b: (&PrimalPoint, &DualPoint),
    c: (&PrimalPoint, &DualPoint),
    d_inf: f64,
    kappa: f64,
) -> f64 {
    let mut mx = a.0.clone();
    mx.add_scaled(b.0, 1.0);
    mx.add_scaled(c.0, 1.0);
    let mx = mx.scaled(1.0 / 3.0);
    let mut my = a.1.clone();
    my.add_scaled(b.1, 1.0);
    my.add_scaled(c.1, 1.0);
    let my = my.scaled(1.0 / 3.0);
    let jensen = regularizer(a.0, a.1, d_inf) + regularizer(b.0, b.1, d_inf) + regularizer(c.0, c.1, d_inf)
        - 3.0 * regularizer(&mx, &my, d_inf);
    let mut ex = b.0.clone();
    ex.add_scaled(c.0, -1.0);
    let mut ey = b.1.clone();
    ey.add_scaled(c.1, -1.0);
    kappa * jensen - gradient_difference_dot(a, b, (&ex, &ey), d_inf)
}

/// `(wᵀ∇²r(x, y)w, wᵀD(x)w)` for a direction `w` laid out as
/// `(plans, barycenter, duals)`, length `mn² + n + 2mn`.
pub fn hessian_forms(x: &PrimalPoint, y: &DualPoint, w: &[f64], d_inf: f64) -> Result<(f64, f64)> {
    let n = x.n();
    let m = x.m();
    y.check_shape(n, m)?;
    let len = m * n * n + n + 2 * m * n;
    if w.len() != len {
        return Err(Error::Shape(format!("direction has length {}, expected {len}", w.len())));
    }
    if x.plans.iter().flatten().chain(&x.bary).any(|&v| v <= 0.0) {
        return Err(Error::Domain("Hessian needs strictly positive plans and barycenter".into()));
    }
    let (wa, rest) = w.split_at(m * n * n);
    let (wc, wb) = rest.split_at(n);
    let mf = m as f64;
    let mut marg = vec![0.0; 2 * n];
    let mut q_hess = 0.0;
    let mut q_diag = 0.0;
    for i in 0..m {
        let plan = &x.plans[i];
        let yi = &y.duals[i];
        let a = &wa[i * n * n..(i + 1) * n * n];
        let b = &wb[i * 2 * n..(i + 1) * 2 * n];
        let entropy: f64 = a.iter().zip(plan).map(|(a, x)| a * a / x).sum();
        let mut mixed = 0.0;
        for j in 0..n {
            for k in 0..n {
                mixed += a[j * n + k] * (yi[j] * b[j] + yi[n + k] * b[n + k]);
            }
        }
        marg.fill(0.0);
        marginals_into(plan, n, &mut marg);
        let weighted: f64 = marg.iter().zip(b).map(|(s, b)| s * b * b).sum();
        let bary_mixed: f64 = (0..n).map(|j| wc[j] * yi[j] * b[j]).sum();
        let bary_weighted: f64 = (0..n).map(|j| x.bary[j] * b[j] * b[j]).sum();
        q_hess += 10.0 * entropy + 4.0 * mixed + 2.0 * weighted + 4.0 * bary_mixed + 2.0 * bary_weighted;
        q_diag += 2.0 * entropy + weighted + bary_weighted;
    }
    let bary_entropy: f64 = wc.iter().zip(&x.bary).map(|(c, p)| c * c / p).sum();
    q_hess += 5.0 * mf * bary_entropy;
    q_diag += mf * bary_entropy;
    let scale = 2.0 * d_inf / mf;
    Ok((scale * q_hess, scale * q_diag))
}

/// Upper bound `(44‖d‖∞/ε + 2)Θ + 18‖d‖∞` on the initial suboptimality of a
/// prox call started at the regularizer's minimizer.
pub fn initial_error_bound(eps: f64, theta: f64, d_inf: f64) -> f64 {
    (44.0 * d_inf / eps + 2.0) * theta + 18.0 * d_inf
}
