//! Problem data and the primal/dual points of the barycenter saddle problem.
//!
//! Transport plans are stored as row-major vectors of length `n*n`: entry
//! `j*n + k` is the mass moved from support point `j` to support point `k`.
//! That convention is shared by the cost vectorization and by every marginal
//! operator in [`crate::operator`].

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of a simplex vector.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A probability vector on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram(Vec<f64>);

impl Histogram {
    /// Validates nonnegativity and unit mass (within [`SIMPLEX_TOL`]).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidHistogram("empty histogram".into()));
        }
        if let Some((j, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidHistogram(format!(
                "entry {j} is {w}, expected a finite nonnegative mass"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidHistogram(format!(
                "entries sum to {total}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Rescales a nonnegative vector with positive mass onto the simplex.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidHistogram(
                "cannot normalize a vector with negative or non-finite entries".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidHistogram("cannot normalize zero mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Unit mass at `index`.
    pub fn dirac(n: usize, index: usize) -> Self {
        let mut w = vec![0.0; n];
        w[index] = 1.0;
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Total variation distance `0.5 * |self - other|_1`.
    pub fn total_variation(&self, other: &Histogram) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

impl AsRef<[f64]> for Histogram {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Ground cost matrix together with its row-major vectorization.
#[derive(Debug, Clone, PartialEq)]
pub struct CostData {
    n: usize,
    d: Vec<f64>,
    d_inf: f64,
}

impl CostData {
    /// Builds the cost from its rows. Rejects ragged, non-square, negative or
    /// non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Shape("cost matrix has no rows".into()));
        }
        let mut d = Vec::with_capacity(n * n);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "cost row {j} has {} entries, expected {n} (square matrix)",
                    row.len()
                )));
            }
            d.extend_from_slice(row);
        }
        Self::from_vec(n, d)
    }

    /// Builds the cost from an already vectorized row-major matrix.
    pub fn from_vec(n: usize, d: Vec<f64>) -> Result<Self> {
        if d.len() != n * n {
            return Err(Error::Shape(format!(
                "vectorized cost has length {}, expected {}",
                d.len(),
                n * n
            )));
        }
        if let Some((idx, c)) = d.iter().enumerate().find(|(_, c)| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidCost(format!(
                "entry ({}, {}) is {c}",
                idx / n,
                idx % n
            )));
        }
        let d_inf = d.iter().fold(0.0_f64, |acc, &c| acc.max(c));
        Ok(Self { n, d, d_inf })
    }

    /// `|x_j - x_k|^power` on the given support.
    pub fn from_points(points: &[f64], power: f64) -> Result<Self> {
        let n = points.len();
        let mut d = Vec::with_capacity(n * n);
        for &a in points {
            for &b in points {
                d.push((a - b).abs().powf(power));
            }
        }
        Self::from_vec(n, d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major vectorized cost.
    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// Largest cost entry.
    pub fn d_inf(&self) -> f64 {
        self.d_inf
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.d[j * self.n + k]
    }

    /// The same cost multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidCost(format!("scale factor {factor} must be positive")));
        }
        Self::from_vec(self.n, self.d.iter().map(|c| c * factor).collect())
    }

    /// Divides by the largest entry so that `d_inf == 1`.
    pub fn sup_normalized(&self) -> Result<Self> {
        if self.d_inf <= 0.0 {
            return Err(Error::InvalidCost("cannot normalize an all-zero cost".into()));
        }
        // divide rather than multiply by the reciprocal so the max is exactly 1
        Self::from_vec(self.n, self.d.iter().map(|c| c / self.d_inf).collect())
    }
}

/// Row-major vectorization of a square nonnegative matrix.
pub fn vectorize_cost(c: &[Vec<f64>]) -> Result<CostData> {
    CostData::from_rows(c)
}

/// `m` measures on a common support of size `n` with a shared ground cost.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterProblem {
    measures: Vec<Histogram>,
    cost: CostData,
}

impl BarycenterProblem {
    pub fn new(measures: Vec<Histogram>, cost: CostData) -> Result<Self> {
        let n = cost.n();
        if n < 2 {
            return Err(Error::Shape(format!("support size {n} is below 2")));
        }
        if measures.is_empty() {
            return Err(Error::Shape("at least one measure is required".into()));
        }
        if let Some((i, q)) = measures.iter().enumerate().find(|(_, q)| q.len() != n) {
            return Err(Error::Shape(format!(
                "measure {i} has length {}, cost expects {n}",
                q.len()
            )));
        }
        Ok(Self { measures, cost })
    }

    pub fn n(&self) -> usize {
        self.cost.n()
    }

    pub fn m(&self) -> usize {
        self.measures.len()
    }

    pub fn measures(&self) -> &[Histogram] {
        &self.measures
    }

    pub fn cost(&self) -> &CostData {
        &self.cost
    }

    /// Same measures under a different ground cost.
    pub fn with_cost(&self, cost: CostData) -> Result<Self> {
        Self::new(self.measures.clone(), cost)
    }
}

/// Primal point: `m` transport plans on the `n*n` simplex plus a barycenter
/// candidate on the `n` simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalPoint {
    pub plans: Vec<Vec<f64>>,
    pub bary: Vec<f64>,
}

impl PrimalPoint {
    /// Uniform plans and uniform barycenter, the minimizer of every entropy
    /// used here.
    pub fn uniform(n: usize, m: usize) -> Self {
        Self {
            plans: vec![vec![1.0 / (n * n) as f64; n * n]; m],
            bary: vec![1.0 / n as f64; n],
        }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            plans: vec![vec![0.0; n * n]; m],
            bary: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.bary.len()
    }

    pub fn m(&self) -> usize {
        self.plans.len()
    }

    pub fn check_shape(&self, n: usize, m: usize) -> Result<()> {
        if self.plans.len() != m || self.bary.len() != n {
            return Err(Error::Shape(format!(
                "primal point has {} plans and barycenter length {}, expected {m} and {n}",
                self.plans.len(),
                self.bary.len()
            )));
        }
        if let Some((i, x)) = self.plans.iter().enumerate().find(|(_, x)| x.len() != n * n) {
            return Err(Error::Shape(format!(
                "plan {i} has length {}, expected {}",
                x.len(),
                n * n
            )));
        }
        Ok(())
    }

    /// Largest deviation from simplex membership over all blocks; negative
    /// entries count as their magnitude.
    pub fn simplex_violation(&self) -> f64 {
        self.plans
            .iter()
            .map(Vec::as_slice)
            .chain(std::iter::once(self.bary.as_slice()))
            .map(simplex_violation)
            .fold(0.0, f64::max)
    }

    pub fn bary_histogram(&self) -> Result<Histogram> {
        Histogram::normalized(self.bary.clone())
    }

    /// Entrywise `self += other * scale`.
    pub fn add_scaled(&mut self, other: &PrimalPoint, scale: f64) {
        for (acc, x) in self.plans.iter_mut().zip(&other.plans) {
            acc.iter_mut().zip(x).for_each(|(a, b)| *a += scale * b);
        }
        self.bary
            .iter_mut()
            .zip(&other.bary)
            .for_each(|(a, b)| *a += scale * b);
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            plans: self
                .plans
                .iter()
                .map(|x| x.iter().map(|v| v * scale).collect())
                .collect(),
            bary: self.bary.iter().map(|v| v * scale).collect(),
        }
    }

    /// Flattened `(x_1, ..., x_m, p)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.plans.iter().flatten().copied().collect();
        out.extend_from_slice(&self.bary);
        out
    }

    pub fn from_flat(flat: &[f64], n: usize, m: usize) -> Result<Self> {
        if flat.len() != m * n * n + n {
            return Err(Error::Shape(format!(
                "flat primal vector has length {}, expected {}",
                flat.len(),
                m * n * n + n
            )));
        }
        let plans = flat[..m * n * n].chunks(n * n).map(<[f64]>::to_vec).collect();
        Ok(Self {
            plans,
            bary: flat[m * n * n..].to_vec(),
        })
    }
}

/// Dual point: `m` vectors of length `2n` in the box `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub duals: Vec<Vec<f64>>,
}

impl DualPoint {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            duals: vec![vec![0.0; 2 * n]; m],
        }
    }

    pub fn m(&self) -> usize {
        self.duals.len()
    }

    pub fn check_shape(&self, n: usize, m: usize) -> Result<()> {
        if self.duals.len() != m {
            return Err(Error::Shape(format!(
                "dual point has {} blocks, expected {m}",
                self.duals.len()
            )));
        }
        if let Some((i, y)) = self.duals.iter().enumerate().find(|(_, y)| y.len() != 2 * n) {
            return Err(Error::Shape(format!(
                "dual block {i} has length {}, expected {}",
                y.len(),
                2 * n
            )));
        }
        Ok(())
    }

    pub fn in_box(&self) -> bool {
        self.duals.iter().flatten().all(|v| (-1.0..=1.0).contains(v))
    }

    pub fn add_scaled(&mut self, other: &DualPoint, scale: f64) {
        for (acc, y) in self.duals.iter_mut().zip(&other.duals) {
            acc.iter_mut().zip(y).for_each(|(a, b)| *a += scale * b);
        }
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            duals: self
                .duals
                .iter()
                .map(|y| y.iter().map(|v| v * scale).collect())
                .collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.duals.iter().flatten().copied().collect()
    }

    pub fn from_flat(flat: &[f64], n: usize, m: usize) -> Result<Self> {
        if flat.len() != 2 * m * n {
            return Err(Error::Shape(format!(
                "flat dual vector has length {}, expected {}",
                flat.len(),
                2 * m * n
            )));
        }
        Ok(Self {
            duals: flat.chunks(2 * n).map(<[f64]>::to_vec).collect(),
        })
    }
}

/// `|sum - 1|` plus the magnitude of the most negative entry.
pub fn simplex_violation(v: &[f64]) -> f64 {
    let total: f64 = v.iter().sum();
    let neg = v.iter().fold(0.0_f64, |acc, &x| acc.max(-x));
    (total - 1.0).abs() + neg
}

/// Clamps every entry into `[-1, 1]`; NaN is left untouched so callers can
/// detect it.
pub(crate) fn clip_unit(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}
