//! Fixed benchmark instances shared by the criterion benches.

use wbary_core::suite::{gaussian_suite, GaussianSuiteSpec};
use wbary_core::{BarycenterProblem, Result};

/// Gaussian suite with `count` measures on `support` grid points and the
/// squared distance divided by its largest entry.
pub fn gaussian_instance(count: usize, support: usize) -> Result<BarycenterProblem> {
    let spec = GaussianSuiteSpec {
        count,
        support,
        ..GaussianSuiteSpec::default()
    };
    gaussian_suite(&spec)?.problem(true)
}
