//! Exact transport on the line.
//!
//! For a convex cost `|x − y|^power` the monotone (north-west corner) coupling
//! of two histograms on sorted support points is optimal, and for the squared
//! distance the barycenter of measures on the line is the pushforward of the
//! uniform measure under the average of their quantile functions.

use crate::error::{Error, Result};
use crate::problem::{CostData, Histogram};

/// Sorted support points and the cost exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    points: Vec<f64>,
    power: f64,
}

impl Grid1D {
    pub fn new(points: Vec<f64>, power: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Shape("a grid needs at least two points".into()));
        }
        // negated so that NaN points are rejected too
        if let Some(w) = points.windows(2).find(|w| !w[0].lt(&w[1])) {
            return Err(Error::Config(format!(
                "grid points must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        if !(power >= 1.0 && power.is_finite()) {
            return Err(Error::Config(format!("cost exponent {power} must be at least 1")));
        }
        Ok(Self { points, power })
    }

    /// `n` equispaced points from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, n: usize, power: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Shape("a grid needs at least two points".into()));
        }
        let step = (hi - lo) / (n - 1) as f64;
        Self::new((0..n).map(|i| lo + step * i as f64).collect(), power)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Ground cost `|xⱼ − xₖ|^power` on the grid.
    pub fn cost(&self) -> Result<CostData> {
        CostData::from_points(&self.points, self.power)
    }

    fn unit_cost(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        if self.power == 2.0 {
            d * d
        } else {
            d.powf(self.power)
        }
    }

    fn check(&self, h: &Histogram, what: &str) -> Result<()> {
        if h.len() != self.len() {
            return Err(Error::Shape(format!(
                "{what} has length {}, grid has {} points",
                h.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// Exact transport cost between `p` and `q` through the monotone coupling.
pub fn ot_1d_monotone(p: &Histogram, q: &Histogram, grid: &Grid1D) -> Result<f64> {
    grid.check(p, "first histogram")?;
    grid.check(q, "second histogram")?;
    if grid.power != 1.0 && grid.power != 2.0 {
        return Err(Error::Unsupported(format!(
            "monotone coupling is only certified here for exponents 1 and 2, got {}",
            grid.power
        )));
    }
    let (a, b) = (p.as_slice(), q.as_slice());
    let x = grid.points();
    let n = a.len();
    let (mut j, mut k) = (0, 0);
    let (mut ra, mut rb) = (a[0], b[0]);
    let mut total = 0.0;
    while j < n && k < n {
        let mass = ra.min(rb);
        if mass > 0.0 && j != k {
            total += mass * grid.unit_cost(x[j], x[k]);
        }
        ra -= mass;
        rb -= mass;
        if ra <= rb {
            j += 1;
            if j < n {
                ra = a[j];
            }
        } else {
            k += 1;
            if k < n {
                rb = b[k];
            }
        }
    }
    Ok(total)
}

/// `(1/m) Σᵢ W(p, qᵢ)`.
pub fn barycenter_objective(p: &Histogram, measures: &[Histogram], grid: &Grid1D) -> Result<f64> {
    if measures.is_empty() {
        return Err(Error::Shape("no measures".into()));
    }
    let mut total = 0.0;
    for q in measures {
        total += ot_1d_monotone(p, q, grid)?;
    }
    Ok(total / measures.len() as f64)
}

/// Index of the grid point nearest to `t`, ties to the left.
fn nearest(points: &[f64], t: f64) -> usize {
    let right = points.partition_point(|&x| x < t);
    if right == 0 {
        return 0;
    }
    if right == points.len() {
        return points.len() - 1;
    }
    if t - points[right - 1] <= points[right] - t {
        right - 1
    } else {
        right
    }
}

/// Squared-distance barycenter from averaged quantile functions, with every
/// constant piece of the averaged quantile assigned to its nearest grid point.
pub fn barycenter_1d_quantile(measures: &[Histogram], grid: &Grid1D) -> Result<Histogram> {
    if grid.power != 2.0 {
        return Err(Error::Unsupported(format!(
            "quantile averaging gives the barycenter only for squared distance, got exponent {}",
            grid.power
        )));
    }
    if measures.is_empty() {
        return Err(Error::Shape("no measures".into()));
    }
    let cdfs: Vec<Vec<f64>> = measures
        .iter()
        .map(|h| {
            grid.check(h, "measure")?;
            let mut acc = 0.0;
            Ok(h.as_slice()
                .iter()
                .map(|w| {
                    acc += w;
                    acc
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut breaks: Vec<f64> = cdfs.iter().flatten().map(|&c| c.min(1.0)).collect();
    breaks.push(0.0);
    breaks.push(1.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let x = grid.points();
    let m = measures.len() as f64;
    let mut mass = vec![0.0; grid.len()];
    for w in breaks.windows(2) {
        let width = w[1] - w[0];
        if width <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let mut location = 0.0;
        for (cdf, h) in cdfs.iter().zip(measures) {
            let idx = cdf.partition_point(|&c| c < mid);
            // rounding can leave the last cumulative sum just below `mid`
            let idx = if idx < cdf.len() {
                idx
            } else {
                h.as_slice().iter().rposition(|&a| a > 0.0).unwrap_or(cdf.len() - 1)
            };
            location += x[idx];
        }
        mass[nearest(x, location / m)] += width;
    }
    Histogram::normalized(mass)
}

/// `(1/m) Σ W(p, qᵢ) − (1/m) Σ W(p*, qᵢ)`.
pub fn optimality_gap(p: &Histogram, p_star: &Histogram, measures: &[Histogram], grid: &Grid1D) -> Result<f64> {
    Ok(barycenter_objective(p, measures, grid)? - barycenter_objective(p_star, measures, grid)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: &[f64]) -> Histogram {
        Histogram::new(v.to_vec()).unwrap()
    }

    /// Exhaustive transport LP on a discretized polytope: enumerates plans
    /// with entries in multiples of `1/steps`.
    fn brute_force_ot(p: &[f64], q: &[f64], cost: &CostData, steps: usize) -> f64 {
        let n = p.len();
        let units_p: Vec<usize> = p.iter().map(|a| (a * steps as f64).round() as usize).collect();
        let units_q: Vec<usize> = q.iter().map(|a| (a * steps as f64).round() as usize).collect();
        let mut best = f64::INFINITY;
        let mut plan = vec![0usize; n * n];
        fn rec(
            cell: usize,
            n: usize,
            plan: &mut Vec<usize>,
            up: &[usize],
            uq: &[usize],
            cost: &CostData,
            steps: usize,
            best: &mut f64,
        ) {
            if cell == n * n {
                for j in 0..n {
                    if (0..n).map(|k| plan[j * n + k]).sum::<usize>() != up[j] {
                        return;
                    }
                }
                for k in 0..n {
                    if (0..n).map(|j| plan[j * n + k]).sum::<usize>() != uq[k] {
                        return;
                    }
                }
                let c: f64 = plan
                    .iter()
                    .enumerate()
                    .map(|(e, &u)| u as f64 / steps as f64 * cost.entry(e / n, e % n))
                    .sum();
                *best = best.min(c);
                return;
            }
            let (j, k) = (cell / n, cell % n);
            let cap = up[j].min(uq[k]);
            for u in 0..=cap {
                plan[cell] = u;
                rec(cell + 1, n, plan, up, uq, cost, steps, best);
            }
            plan[cell] = 0;
        }
        rec(0, n, &mut plan, &units_p, &units_q, cost, steps, &mut best);
        best
    }

    #[test]
    fn identity_costs_nothing() {
        let g = Grid1D::linspace(0.0, 1.0, 4, 2.0).unwrap();
        let p = h(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(ot_1d_monotone(&p, &p, &g).unwrap(), 0.0);
    }

    #[test]
    fn single_mass_move() {
        let g = Grid1D::new(vec![0.0, 1.0], 2.0).unwrap();
        assert_eq!(ot_1d_monotone(&Histogram::dirac(2, 0), &Histogram::dirac(2, 1), &g).unwrap(), 1.0);
    }

    #[test]
    fn three_point_example_matches_brute_force() {
        let g = Grid1D::new(vec![0.0, 1.0, 2.0], 2.0).unwrap();
        let p = h(&[0.5, 0.5, 0.0]);
        let q = h(&[0.0, 0.5, 0.5]);
        let w = ot_1d_monotone(&p, &q, &g).unwrap();
        assert!((w - 1.0).abs() < 1e-15);
        let bf = brute_force_ot(p.as_slice(), q.as_slice(), &g.cost().unwrap(), 4);
        assert!((w - bf).abs() < 1e-12);
    }

    #[test]
    fn random_small_instances_match_brute_force() {
        let g1 = Grid1D::new(vec![0.0, 0.4, 1.5], 1.0).unwrap();
        let g2 = Grid1D::new(vec![0.0, 0.4, 1.5], 2.0).unwrap();
        let patterns = [[1, 2, 3], [0, 6, 0], [3, 3, 0], [2, 0, 4], [1, 1, 4]];
        for a in &patterns {
            for b in &patterns {
                let p = h(&a.map(|u| u as f64 / 6.0));
                let q = h(&b.map(|u| u as f64 / 6.0));
                for g in [&g1, &g2] {
                    let bf = brute_force_ot(p.as_slice(), q.as_slice(), &g.cost().unwrap(), 6);
                    assert!((ot_1d_monotone(&p, &q, g).unwrap() - bf).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unsupported_exponents() {
        let g = Grid1D::new(vec![0.0, 1.0], 1.5).unwrap();
        let p = Histogram::uniform(2);
        assert!(matches!(ot_1d_monotone(&p, &p, &g), Err(Error::Unsupported(_))));
        assert!(matches!(barycenter_1d_quantile(&[p], &g), Err(Error::Unsupported(_))));
    }

    #[test]
    fn shape_errors() {
        let g = Grid1D::new(vec![0.0, 1.0, 2.0], 2.0).unwrap();
        assert!(matches!(
            ot_1d_monotone(&Histogram::uniform(2), &Histogram::uniform(3), &g),
            Err(Error::Shape(_))
        ));
        assert!(Grid1D::new(vec![0.0, 0.0, 1.0], 2.0).is_err());
    }

    #[test]
    fn diracs_meet_in_the_middle() {
        let g = Grid1D::new(vec![0.0, 0.5, 1.0], 2.0).unwrap();
        let b = barycenter_1d_quantile(&[Histogram::dirac(3, 0), Histogram::dirac(3, 2)], &g).unwrap();
        assert_eq!(b.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn mirrored_measures_give_symmetric_barycenter() {
        let g = Grid1D::linspace(-3.0, 3.0, 13, 2.0).unwrap();
        // mass on even indices only, so averaged quantiles land on grid
        // points and the left tie rule never fires
        let a: Vec<f64> = (0..13)
            .map(|i| if i % 2 == 0 { ((i as f64) * 0.7).sin().abs() + 0.1 } else { 0.0 })
            .collect();
        let b: Vec<f64> = a.iter().rev().copied().collect();
        let bar = barycenter_1d_quantile(
            &[Histogram::normalized(a).unwrap(), Histogram::normalized(b).unwrap()],
            &g,
        )
        .unwrap();
        let v = bar.as_slice();
        for i in 0..13 {
            assert!((v[i] - v[12 - i]).abs() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn gaussian_pair_barycenter() {
        let g = Grid1D::linspace(-10.0, 10.0, 100, 2.0).unwrap();
        let gauss = |mu: f64| {
            Histogram::normalized(g.points().iter().map(|x| (-(x - mu) * (x - mu) / 2.0).exp()).collect()).unwrap()
        };
        let bar = barycenter_1d_quantile(&[gauss(-1.0), gauss(1.0)], &g).unwrap();
        assert!(bar.total_variation(&gauss(0.0)) <= 0.02, "{}", bar.total_variation(&gauss(0.0)));
    }

    #[test]
    fn gap_examples() {
        let g = Grid1D::linspace(0.0, 3.0, 4, 2.0).unwrap();
        let q = h(&[0.1, 0.2, 0.3, 0.4]);
        let p = Histogram::uniform(4);
        assert_eq!(optimality_gap(&p, &p, std::slice::from_ref(&q), &g).unwrap(), 0.0);
        let gap = optimality_gap(&p, &q, std::slice::from_ref(&q), &g).unwrap();
        assert_eq!(gap, ot_1d_monotone(&p, &q, &g).unwrap());
        assert!(gap > 0.0);
    }
}
