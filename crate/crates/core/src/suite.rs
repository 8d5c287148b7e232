//! Discretized Gaussian benchmark: measures on an equispaced grid with
//! random means and variances.

use rand::Rng;

use crate::error::{Error, Result};
use crate::oracle1d::{barycenter_1d_quantile, Grid1D};
use crate::problem::{BarycenterProblem, Histogram};
use crate::sample::seeded;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSuiteSpec {
    pub count: usize,
    pub support: usize,
    pub range: (f64, f64),
    pub mean_range: (f64, f64),
    pub var_range: (f64, f64),
    pub seed: u64,
}

impl Default for GaussianSuiteSpec {
    fn default() -> Self {
        Self {
            count: 10,
            support: 100,
            range: (-10.0, 10.0),
            mean_range: (-5.0, 5.0),
            var_range: (0.8, 1.8),
            seed: 0,
        }
    }
}

impl GaussianSuiteSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianSuite {
    /// Support points; the cost exponent is 2.
    pub grid: Grid1D,
    pub measures: Vec<Histogram>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GaussianSuite {
    /// Barycenter problem under the squared grid distance, optionally divided
    /// by its largest entry.
    pub fn problem(&self, normalize_cost: bool) -> Result<BarycenterProblem> {
        let mut cost = self.grid.cost()?;
        if normalize_cost {
            cost = cost.sup_normalized()?;
        }
        BarycenterProblem::new(self.measures.clone(), cost)
    }

    /// Grid-rebinned barycenter from averaged quantile functions.
    pub fn true_barycenter(&self) -> Result<Histogram> {
        barycenter_1d_quantile(&self.measures, &self.grid)
    }
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Means and variances are drawn in measure order, mean first.
pub fn gaussian_suite(spec: &GaussianSuiteSpec) -> Result<GaussianSuite> {
    if spec.count == 0 {
        return Err(Error::Config("suite needs at least one measure".into()));
    }
    let ordered = |(lo, hi): (f64, f64)| lo <= hi && lo.is_finite() && hi.is_finite();
    if !ordered(spec.mean_range) || !ordered(spec.var_range) || spec.var_range.0 <= 0.0 {
        return Err(Error::Config("mean and variance ranges must be ordered, variances positive".into()));
    }
    let grid = Grid1D::linspace(spec.range.0, spec.range.1, spec.support, 2.0)?;
    let mut rng = seeded(spec.seed);
    let mut measures = Vec::with_capacity(spec.count);
    let mut means = Vec::with_capacity(spec.count);
    let mut variances = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let mu = draw(&mut rng, spec.mean_range);
        let var = draw(&mut rng, spec.var_range);
        let density = grid.points().iter().map(|x| (-(x - mu) * (x - mu) / (2.0 * var)).exp()).collect();
        measures.push(Histogram::normalized(density)?);
        means.push(mu);
        variances.push(var);
    }
    Ok(GaussianSuite {
        grid,
        measures,
        means,
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_shape() {
        let s = gaussian_suite(&GaussianSuiteSpec::default()).unwrap();
        assert_eq!(s.measures.len(), 10);
        assert_eq!(s.grid.len(), 100);
        assert_eq!(s.grid.points()[0], -10.0);
        assert!((s.grid.points()[99] - 10.0).abs() < 1e-12);
        for (h, (&mu, &var)) in s.measures.iter().zip(s.means.iter().zip(&s.variances)) {
            assert!((h.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((-5.0..5.0).contains(&mu));
            assert!((0.8..1.8).contains(&var));
        }
    }

    #[test]
    fn suite_is_deterministic_per_seed() {
        let a = gaussian_suite(&GaussianSuiteSpec::with_seed(5)).unwrap();
        let b = gaussian_suite(&GaussianSuiteSpec::with_seed(5)).unwrap();
        let c = gaussian_suite(&GaussianSuiteSpec::with_seed(6)).unwrap();
        assert_eq!(a.measures, b.measures);
        assert_ne!(a.measures, c.measures);
    }

    #[test]
    fn centered_unit_gaussian_is_symmetric() {
        let spec = GaussianSuiteSpec {
            count: 1,
            mean_range: (0.0, 0.0),
            var_range: (1.0, 1.0),
            ..Default::default()
        };
        let s = gaussian_suite(&spec).unwrap();
        let v = s.measures[0].as_slice();
        for i in 0..100 {
            assert!((v[i] - v[99 - i]).abs() < 1e-15);
        }
    }
}
