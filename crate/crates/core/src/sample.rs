//! Seeded random instances and random feasible points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::problem::{BarycenterProblem, CostData, DualPoint, Histogram, PrimalPoint};

/// The generator used everywhere a seed is accepted.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dirichlet sample with symmetric concentration `alpha`. Small
/// concentrations push samples toward the vertices; if every gamma draw
/// underflows, a uniformly chosen vertex is returned.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize, alpha: f64) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::Config(format!("concentration {alpha}: {e}")))?;
    let mut v: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    if total > 0.0 && total.is_finite() {
        v.iter_mut().for_each(|a| *a /= total);
    } else {
        v.fill(0.0);
        v[rng.random_range(0..n)] = 1.0;
    }
    Ok(v)
}

/// Uniformly distributed histogram on the simplex.
pub fn random_histogram<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Histogram {
    let v = random_simplex(rng, n, 1.0).expect("unit concentration is valid");
    Histogram::normalized(v).expect("a simplex sample has positive mass")
}

/// Plans and barycenter drawn independently from a Dirichlet distribution.
pub fn random_primal<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, alpha: f64) -> Result<PrimalPoint> {
    let plans = (0..m).map(|_| random_simplex(rng, n * n, alpha)).collect::<Result<_>>()?;
    Ok(PrimalPoint {
        plans,
        bary: random_simplex(rng, n, alpha)?,
    })
}

/// Duals uniform in the box.
pub fn random_dual<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> DualPoint {
    DualPoint {
        duals: (0..m)
            .map(|_| (0..2 * n).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect(),
    }
}

/// Independent uniform entries on `[0, 1]`, rescaled to `‖C‖∞ = 1`.
pub fn random_cost<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CostData {
    let d: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
    CostData::from_vec(n, d)
        .and_then(|c| c.sup_normalized())
        .expect("random uniform entries are valid and not all zero")
}

/// `m` uniform random histograms under a random sup-normalized cost.
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Result<BarycenterProblem> {
    let measures = (0..m).map(|_| random_histogram(rng, n)).collect();
    BarycenterProblem::new(measures, random_cost(rng, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_samples_are_feasible() {
        let mut rng = seeded(1);
        for &alpha in &[1e-3, 0.1, 1.0, 10.0] {
            for _ in 0..50 {
                let v = random_simplex(&mut rng, 7, alpha).unwrap();
                assert!(v.iter().all(|&a| a >= 0.0));
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        assert!(random_simplex(&mut rng, 3, 0.0).is_err());
    }

    #[test]
    fn problems_are_reproducible() {
        let a = random_problem(&mut seeded(9), 4, 2).unwrap();
        let b = random_problem(&mut seeded(9), 4, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cost().d_inf(), 1.0);
    }

    #[test]
    fn points_are_feasible() {
        let mut rng = seeded(2);
        let x = random_primal(&mut rng, 3, 2, 0.5).unwrap();
        assert!(x.simplex_violation() < 1e-12);
        assert!(random_dual(&mut rng, 3, 2).in_box());
    }
}
