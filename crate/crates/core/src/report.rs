//! Convergence logs produced by every solver and their CSV form.

use std::io::Write;
use std::time::Instant;

use crate::error::Result;
use crate::operator::{duality_gap, primal_value};
use crate::problem::{BarycenterProblem, DualPoint, Histogram, PrimalPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    MirrorProx,
    DualExtrapolation,
    Ibp,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::MirrorProx => "mp",
            Algorithm::DualExtrapolation => "de",
            Algorithm::Ibp => "ibp",
        }
    }
}

/// One logged iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub iteration: usize,
    pub elapsed_seconds: f64,
    /// Certificate of the averaged pair at this iteration.
    pub duality_gap: f64,
    /// Primal value `max_𝐲 F(x̃, 𝐲)` of the averaged primal point.
    pub objective: f64,
    /// Barycenter objective minus the oracle value, when an oracle applies.
    pub optimality_gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub records: Vec<Record>,
    /// `(key, value)` snapshot of the configuration that produced the run.
    pub config: Vec<(String, String)>,
    pub barycenter: Histogram,
    pub final_gap: f64,
    /// Iterations actually performed.
    pub iterations: usize,
    /// True when the run stopped because the certificate reached the target.
    pub early_exit: bool,
    /// Free-form diagnostics (bound checks, convergence flags).
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Writes the records as `report.csv`. With `include_timing == false` the
    /// `elapsed_seconds` column is left empty so that output bytes depend only
    /// on the inputs.
    pub fn write_csv<W: Write>(&self, out: W, include_timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "elapsed_seconds",
            "duality_gap",
            "objective",
            "optimality_gap",
        ])?;
        for r in &self.records {
            let elapsed = if include_timing {
                format!("{:.6}", r.elapsed_seconds)
            } else {
                String::new()
            };
            w.write_record([
                r.iteration.to_string(),
                elapsed,
                r.duality_gap.to_string(),
                r.objective.to_string(),
                r.optimality_gap.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Final averaged saddle pair of a run plus its log.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub x: PrimalPoint,
    pub y: DualPoint,
    pub report: RunReport,
}

/// Certificate, primal value and optional oracle gap of an averaged pair.
pub(crate) fn evaluate_pair(
    prob: &BarycenterProblem,
    x: &PrimalPoint,
    y: &DualPoint,
    oracle: Option<&dyn Fn(&Histogram) -> f64>,
) -> Result<(f64, f64, Option<f64>)> {
    let gap = duality_gap(x, y, prob)?;
    let objective = primal_value(x, prob)?;
    let opt = match oracle {
        Some(f) => Some(f(&x.bary_histogram()?)),
        None => None,
    };
    Ok((gap, objective, opt))
}

/// Writes a histogram as a single CSV row.
pub fn write_histogram_row<W: Write>(out: W, h: &Histogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(h.as_slice().iter().map(f64::to_string))?;
    w.flush()?;
    Ok(())
}

/// Monotonic stopwatch used for the `elapsed_seconds` column.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stopwatch(Instant);

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Self(Instant::now())
    }

    pub(crate) fn seconds(&self) -> f64 {
        // microsecond resolution
        self.0.elapsed().as_micros() as f64 * 1e-6
    }
}

/// Options shared by the iterative solvers.
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Hard cap on iterations; the guaranteed count is used when smaller or absent.
    pub max_iters: Option<usize>,
    /// Record every `log_stride` iterations (the default depends on the solver).
    pub log_stride: Option<usize>,
    /// Stop as soon as the certificate reaches the target accuracy.
    pub early_exit: bool,
    /// Oracle for the optimality-gap column, evaluated on the barycenter of
    /// the averaged iterate.
    pub oracle: Option<&'a dyn Fn(&Histogram) -> f64>,
}

impl<'a> RunOptions<'a> {
    pub fn new() -> Self {
        Self {
            early_exit: true,
            ..Default::default()
        }
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = Some(iters);
        self
    }

    pub fn with_log_stride(mut self, stride: usize) -> Self {
        self.log_stride = Some(stride.max(1));
        self
    }

    pub fn with_early_exit(mut self, on: bool) -> Self {
        self.early_exit = on;
        self
    }

    pub fn with_oracle(mut self, oracle: &'a dyn Fn(&Histogram) -> f64) -> Self {
        self.oracle = Some(oracle);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let report = RunReport {
            algorithm: Algorithm::MirrorProx,
            records: vec![
                Record {
                    iteration: 1,
                    elapsed_seconds: 0.25,
                    duality_gap: 0.5,
                    objective: 1.0,
                    optimality_gap: None,
                },
                Record {
                    iteration: 2,
                    elapsed_seconds: 0.5,
                    duality_gap: 0.125,
                    objective: 0.75,
                    optimality_gap: Some(0.01),
                },
            ],
            config: vec![],
            barycenter: Histogram::uniform(2),
            final_gap: 0.125,
            iterations: 2,
            early_exit: false,
            notes: vec![],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iteration,elapsed_seconds,duality_gap,objective,optimality_gap\n\
             1,0.250000,0.5,1,\n\
             2,0.500000,0.125,0.75,0.01\n"
        );
        let mut buf = Vec::new();
        report.write_csv(&mut buf, false).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("\n1,,0.5,1,\n"));
    }
}
