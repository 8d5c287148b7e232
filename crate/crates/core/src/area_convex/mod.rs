//! Dual extrapolation with an area-convex regularizer.
//!
//! The regularizer couples every plan to the squares of its dual block and
//! the barycenter to the squares of the row halves of all dual blocks:
//!
//! ```text
//! r(x, y) = (2‖d‖∞/m) · ( 10 Σᵢ⟨xᵢ, ln xᵢ⟩ + 5m⟨p, ln p⟩
//!                        + Σᵢ⟨A xᵢ, yᵢ²⟩ + Σᵢ⟨p, [yᵢ]²_{1..n}⟩ )
//! ```
//!
//! It is 3-area-convex with respect to the gradient operator, which lets dual
//! extrapolation run with it as the prox-function. Prox steps are solved by
//! the alternating minimization in [`am`]; [`de`] holds the outer loop and
//! [`diagnostics`] the numerical checks of the regularizer's properties.

pub mod am;
pub mod de;
pub mod diagnostics;

use crate::geometry::neg_entropy;
use crate::operator::marginals_into;
use crate::problem::{DualPoint, PrimalPoint};

pub use am::{am_inner_iterations, am_objective, am_prox, AmProblem, AmSolver};
pub use de::{de_config, run_dual_extrapolation, run_dual_extrapolation_with, DeConfig, DeState};
pub use diagnostics::{area_convexity_residual, hessian_forms, initial_error_bound};

/// Area-convexity constant of the regularizer.
pub const KAPPA: f64 = 3.0;

/// Which range bound to use for the regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaVariant {
    /// `40 ln n ‖d‖∞ + 6‖d‖∞`.
    Paper,
    /// `50 ln n ‖d‖∞ + 6‖d‖∞`: sup minus inf including the barycenter entropy.
    #[default]
    Exact,
}

impl ThetaVariant {
    pub fn tag(self) -> &'static str {
        match self {
            ThetaVariant::Paper => "paper",
            ThetaVariant::Exact => "exact",
        }
    }
}

/// Range bound `Θ ≥ sup r − min r`.
pub fn theta(n: usize, d_inf: f64, variant: ThetaVariant) -> f64 {
    let ln_n = (n as f64).ln();
    let entropy_coef = match variant {
        ThetaVariant::Paper => 40.0,
        ThetaVariant::Exact => 50.0,
    };
    entropy_coef * ln_n * d_inf + 6.0 * d_inf
}

/// `r(x, y)` with the `0 ln 0 = 0` convention.
pub fn regularizer(x: &PrimalPoint, y: &DualPoint, d_inf: f64) -> f64 {
    let n = x.n();
    let m = x.m() as f64;
    let mut marg = vec![0.0; 2 * n];
    let mut total = 5.0 * m * neg_entropy(&x.bary);
    for (plan, yi) in x.plans.iter().zip(&y.duals) {
        total += 10.0 * neg_entropy(plan);
        marginals_into(plan, n, &mut marg);
        total += marg.iter().zip(yi).map(|(a, v)| a * v * v).sum::<f64>();
        total += x.bary.iter().zip(&yi[..n]).map(|(p, v)| p * v * v).sum::<f64>();
    }
    2.0 * d_inf / m * total
}

/// Minimizer `z̄` of the regularizer: uniform plans, uniform barycenter,
/// zero duals.
pub fn regularizer_argmin(n: usize, m: usize) -> (PrimalPoint, DualPoint) {
    (PrimalPoint::uniform(n, m), DualPoint::zeros(n, m))
}

/// Per-entry values of `∇ₓ r(z̄)`: `(plan entry, barycenter entry)`.
pub(crate) fn grad_at_min_entries(n: usize, m: usize, d_inf: f64) -> (f64, f64) {
    let ln_n = (n as f64).ln();
    let m = m as f64;
    (
        10.0 * d_inf / m * (-4.0 * ln_n + 2.0),
        10.0 * d_inf * (-ln_n + 1.0),
    )
}

/// `(∇ₓ r(z̄), ∇ᵧ r(z̄))` as flat vectors of lengths `mn² + n` and `2mn`.
pub fn regularizer_grad_at_min(n: usize, m: usize, d_inf: f64) -> (Vec<f64>, Vec<f64>) {
    let (plan_entry, bary_entry) = grad_at_min_entries(n, m, d_inf);
    let mut gx = vec![plan_entry; m * n * n];
    gx.extend(std::iter::repeat_n(bary_entry, n));
    (gx, vec![0.0; 2 * m * n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regularizer_at_uniform() {
        let (x, y) = regularizer_argmin(2, 1);
        let r = regularizer(&x, &y, 1.0);
        assert!((r + 50.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn regularizer_at_vertices_with_zero_duals() {
        let x = PrimalPoint {
            plans: vec![vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
            bary: vec![1.0, 0.0],
        };
        assert_eq!(regularizer(&x, &DualPoint::zeros(2, 2), 3.0), 0.0);
    }

    #[test]
    fn quadratic_part_is_nonnegative() {
        let x = PrimalPoint {
            plans: vec![vec![0.1, 0.2, 0.3, 0.4]],
            bary: vec![0.6, 0.4],
        };
        let y = DualPoint {
            duals: vec![vec![-0.3, 0.9, -1.0, 0.2]],
        };
        let zero = regularizer(&x, &DualPoint::zeros(2, 1), 1.0);
        assert!(regularizer(&x, &y, 1.0) >= zero);
    }

    #[test]
    fn theta_values() {
        assert!((theta(2, 1.0, ThetaVariant::Paper) - 33.726).abs() < 1e-3);
        assert!((theta(2, 1.0, ThetaVariant::Exact) - 40.657).abs() < 1e-3);
        assert_eq!(theta(7, 0.0, ThetaVariant::Paper), 0.0);
        assert_eq!(theta(7, 0.0, ThetaVariant::Exact), 0.0);
    }

    #[test]
    fn grad_at_min_value() {
        let (gx, gy) = regularizer_grad_at_min(2, 1, 1.0);
        assert!((gx[0] + 7.726).abs() < 1e-3);
        assert_eq!(gx.len(), 4 + 2);
        assert!(gy.iter().all(|&v| v == 0.0));
        assert_eq!(gy.len(), 4);
    }

    #[test]
    fn grad_at_min_matches_finite_differences() {
        for &(n, m, d_inf) in &[(2usize, 1usize, 1.0), (3, 2, 0.7), (4, 3, 2.0)] {
            let (x0, y0) = regularizer_argmin(n, m);
            let (gx, gy) = regularizer_grad_at_min(n, m, d_inf);
            let flat_x = x0.to_flat();
            let h = 1e-6;
            for (idx, g) in gx.iter().enumerate() {
                let mut plus = flat_x.clone();
                let mut minus = flat_x.clone();
                plus[idx] += h;
                minus[idx] -= h;
                let rp = regularizer(&PrimalPoint::from_flat(&plus, n, m).unwrap(), &y0, d_inf);
                let rm = regularizer(&PrimalPoint::from_flat(&minus, n, m).unwrap(), &y0, d_inf);
                let fd = (rp - rm) / (2.0 * h);
                assert!((fd - g).abs() < 1e-6 * g.abs().max(1.0), "n={n} idx={idx} fd={fd} g={g}");
            }
            let flat_y = y0.to_flat();
            for (idx, g) in gy.iter().enumerate() {
                let mut plus = flat_y.clone();
                let mut minus = flat_y.clone();
                plus[idx] += h;
                minus[idx] -= h;
                let rp = regularizer(&x0, &DualPoint::from_flat(&plus, n, m).unwrap(), d_inf);
                let rm = regularizer(&x0, &DualPoint::from_flat(&minus, n, m).unwrap(), d_inf);
                assert!(((rp - rm) / (2.0 * h) - g).abs() < 1e-6);
            }
        }
    }
}
