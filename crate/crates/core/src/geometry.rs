//! Prox-geometry of the mirror-prox setup: entropy on the primal simplices,
//! half squared Euclidean norm on the dual box.

use crate::error::{Error, Result};
use crate::problem::{DualPoint, PrimalPoint};

/// Squared ranges of the two prox-functions and the matching weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxGeometry {
    /// `R²_𝒳 = 3 m ln n`.
    pub rx_sq: f64,
    /// `R²_𝒴 = m n`.
    pub ry_sq: f64,
    pub a1: f64,
    pub a2: f64,
}

impl ProxGeometry {
    pub fn new(n: usize, m: usize) -> Self {
        let rx_sq = 3.0 * m as f64 * (n as f64).ln();
        let ry_sq = (m * n) as f64;
        Self {
            rx_sq,
            ry_sq,
            a1: 1.0 / rx_sq,
            a2: 1.0 / ry_sq,
        }
    }
}

/// Primal prox-function `Σᵢ⟨xᵢ, ln xᵢ⟩ + m⟨p, ln p⟩` with `0 ln 0 = 0`.
pub fn primal_prox_function(x: &PrimalPoint) -> f64 {
    let m = x.m() as f64;
    x.plans.iter().map(|p| neg_entropy(p)).sum::<f64>() + m * neg_entropy(&x.bary)
}

/// `⟨v, ln v⟩` with the `0 ln 0 = 0` convention.
pub fn neg_entropy(v: &[f64]) -> f64 {
    v.iter().filter(|&&a| a > 0.0).map(|&a| a * a.ln()).sum()
}

/// Generalized KL divergence `Σ a ln(a/b) − Σ (a − b)`.
fn kl_block(a: &[f64], b: &[f64], what: &str) -> Result<f64> {
    let mut total = 0.0;
    for (j, (&u, &v)) in a.iter().zip(b).enumerate() {
        if u > 0.0 {
            if v <= 0.0 {
                return Err(Error::Domain(format!(
                    "{what} entry {j}: reference is {v} where the point has mass {u}"
                )));
            }
            total += u * (u / v).ln();
        }
        total -= u - v;
    }
    Ok(total)
}

/// Bregman divergences `(B_𝒳(x, x'), B_𝒴(y, y'))` of the two prox-functions.
pub fn bregman_divergences(
    z: (&PrimalPoint, &DualPoint),
    z_ref: (&PrimalPoint, &DualPoint),
) -> Result<(f64, f64)> {
    let (x, y) = z;
    let (xr, yr) = z_ref;
    let n = x.n();
    let m = x.m();
    xr.check_shape(n, m)?;
    y.check_shape(n, m)?;
    yr.check_shape(n, m)?;
    let mut bx = 0.0;
    for (i, (a, b)) in x.plans.iter().zip(&xr.plans).enumerate() {
        bx += kl_block(a, b, &format!("plan {i}"))?;
    }
    bx += m as f64 * kl_block(&x.bary, &xr.bary, "barycenter")?;
    let by = 0.5
        * y.duals
            .iter()
            .flatten()
            .zip(yr.duals.iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    // KL is nonnegative; clamp the rounding residue.
    Ok((bx.max(0.0), by))
}
