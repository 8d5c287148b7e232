//! Command-line front end: problem ingestion, solver orchestration and CSV
//! report emission. The binary in `main.rs` only maps results to exit codes.

pub mod args;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use wbary_core::area_convex::{de_config, run_dual_extrapolation_with, ThetaVariant};
use wbary_core::ibp::{ibp_barycenter, IbpConfig};
use wbary_core::io::{load_cost, load_histograms, read_snapshot, write_snapshot, Snapshot};
use wbary_core::mirror_prox::{mp_config, run_mirror_prox_with, Scaling};
use wbary_core::operator::duality_gap;
use wbary_core::oracle1d::{barycenter_1d_quantile, optimality_gap, Grid1D};
use wbary_core::report::write_histogram_row;
use wbary_core::suite::{gaussian_suite, GaussianSuiteSpec};
use wbary_core::{BarycenterProblem, Error, Histogram, Result, RunOptions, SolveOutput};

pub use args::{Algo, BarycenterArgs, BenchArgs, Cli, Command, GapArgs, ScalingArg, SolverArgs, ThetaArg};

/// IBP iteration cap when `--max-iters` is absent.
pub const DEFAULT_IBP_ITERS: usize = 10_000;

/// Process exit code for a failed run.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numerical { .. } => 3,
        Error::UnderflowDegenerate { .. } => 4,
        _ => 2,
    }
}

/// Short machine-readable status for summaries.
pub fn status_tag(err: &Error) -> &'static str {
    match err {
        Error::Numerical { .. } => "numerical-failure",
        Error::UnderflowDegenerate { .. } => "underflow-degenerate",
        _ => "config-error",
    }
}

/// Runs a parsed command, writing human-readable lines to `stdout`.
/// Returns the exit code for the process.
pub fn run<W: Write>(cli: Cli, stdout: &mut W) -> Result<u8> {
    match cli.command {
        Command::Barycenter(a) => barycenter(&a, stdout).map(|_| 0),
        Command::Gap(a) => gap(&a, stdout).map(|_| 0),
        Command::GaussianBench(a) => gaussian_bench(&a, stdout),
    }
}

/// A problem plus the 1-D structure needed by the exact oracle, if any.
struct Instance {
    problem: BarycenterProblem,
    /// Grid and the factor the raw squared-distance cost was divided by.
    line: Option<(Grid1D, f64)>,
}

impl Instance {
    /// Optimality-gap oracle in the units of `problem`'s cost.
    fn oracle(&self) -> Result<Option<impl Fn(&Histogram) -> f64 + '_>> {
        let Some((grid, scale)) = &self.line else {
            return Ok(None);
        };
        let measures = self.problem.measures();
        let star = barycenter_1d_quantile(measures, grid)?;
        Ok(Some(move |p: &Histogram| {
            optimality_gap(p, &star, measures, grid).map_or(f64::NAN, |g| g / scale)
        }))
    }
}

fn build_cost(
    spec: &str,
    grid: Option<&[f64]>,
    normalize: bool,
) -> Result<(wbary_core::CostData, Option<(Grid1D, f64)>)> {
    let (cost, line) = if spec == "sqdist" {
        let points = grid.ok_or_else(|| {
            Error::Config("`--cost sqdist` needs support points (`# grid:` header or --gaussian)".into())
        })?;
        let grid = Grid1D::new(points.to_vec(), 2.0)?;
        (grid.cost()?, Some(grid))
    } else if let Some(path) = spec.strip_prefix("csv:") {
        (load_cost(Path::new(path))?, None)
    } else {
        return Err(Error::Config(format!("unknown cost `{spec}`; use sqdist or csv:<path>")));
    };
    if normalize {
        let scale = cost.d_inf();
        Ok((cost.sup_normalized()?, line.map(|g| (g, scale))))
    } else {
        Ok((cost, line.map(|g| (g, 1.0))))
    }
}

fn load_instance(a: &BarycenterArgs) -> Result<Instance> {
    let (measures, grid) = match (&a.input, a.gaussian) {
        (Some(path), false) => {
            let loaded = load_histograms(path, a.normalize)?;
            (loaded.measures, loaded.grid)
        }
        (None, true) => {
            let suite = gaussian_suite(&GaussianSuiteSpec::with_seed(a.seed))?;
            (suite.measures, Some(suite.grid.points().to_vec()))
        }
        _ => return Err(Error::Config("give exactly one of --input and --gaussian".into())),
    };
    let (cost, line) = build_cost(&a.cost, grid.as_deref(), a.solver.normalize_cost)?;
    Ok(Instance {
        problem: BarycenterProblem::new(measures, cost)?,
        line,
    })
}

/// Runs one algorithm. Writes `report.csv`, `barycenter.csv` and
/// `iterates.csv` to `s.out`.
fn solve(algo: Algo, inst: &Instance, s: &SolverArgs) -> Result<SolveOutput> {
    let prob = &inst.problem;
    let oracle = inst.oracle()?;
    let mut opts = RunOptions::new().with_early_exit(!s.no_early_exit);
    opts.max_iters = s.max_iters;
    if let Some(stride) = s.log_stride {
        opts = opts.with_log_stride(stride);
    }
    if let Some(f) = &oracle {
        opts = opts.with_oracle(f);
    }
    let out = match algo {
        Algo::Mp => {
            let scaling = match s.scaling {
                ScalingArg::Printed => Scaling::AsPrinted,
                ScalingArg::Derived => Scaling::Derived,
            };
            let cfg = mp_config(prob, s.eps, scaling)?;
            run_mirror_prox_with(prob, &cfg, s.eps, &opts)?
        }
        Algo::De => {
            let variant = match s.theta {
                ThetaArg::Paper => ThetaVariant::Paper,
                ThetaArg::Exact => ThetaVariant::Exact,
            };
            let mut cfg = de_config(prob, s.eps, variant)?;
            cfg.warm_start = s.warm_start;
            run_dual_extrapolation_with(prob, &cfg, &opts)?
        }
        Algo::Ibp => {
            let cfg = IbpConfig::new(s.reg, s.max_iters.unwrap_or(DEFAULT_IBP_ITERS), s.stabilized);
            ibp_barycenter(prob, &cfg, &opts)?.solve
        }
    };
    write_outputs(&s.out, prob, &out, !s.no_timing)?;
    Ok(out)
}

fn write_outputs(dir: &Path, prob: &BarycenterProblem, out: &SolveOutput, timing: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    out.report.write_csv(BufWriter::new(File::create(dir.join("report.csv"))?), timing)?;
    write_histogram_row(BufWriter::new(File::create(dir.join("barycenter.csv"))?), &out.report.barycenter)?;
    let snap = Snapshot {
        problem: prob.clone(),
        x: out.x.clone(),
        y: out.y.clone(),
        stored_gap: Some(out.report.final_gap),
    };
    write_snapshot(BufWriter::new(File::create(dir.join("iterates.csv"))?), &snap)
}

fn barycenter<W: Write>(a: &BarycenterArgs, stdout: &mut W) -> Result<()> {
    let inst = load_instance(a)?;
    let out = solve(a.algo, &inst, &a.solver)?;
    let r = &out.report;
    writeln!(stdout, "algorithm: {}", r.algorithm.tag())?;
    writeln!(stdout, "iterations: {}", r.iterations)?;
    for note in &r.notes {
        writeln!(stdout, "note: {note}")?;
    }
    writeln!(stdout, "duality gap: {}", r.final_gap)?;
    Ok(())
}

fn gap<W: Write>(a: &GapArgs, stdout: &mut W) -> Result<()> {
    let snap = read_snapshot(File::open(&a.iterates)?)?;
    let g = duality_gap(&snap.x, &snap.y, &snap.problem)?;
    writeln!(stdout, "duality gap: {g}")?;
    if let Some(stored) = snap.stored_gap {
        writeln!(stdout, "stored gap: {stored}")?;
    }
    Ok(())
}

/// Runs mp, de and ibp in sequence on the Gaussian suite. A failing
/// algorithm is recorded in `summary.csv`; the exit code is the largest
/// failure code, or 0.
fn gaussian_bench<W: Write>(a: &BenchArgs, stdout: &mut W) -> Result<u8> {
    let suite = gaussian_suite(&GaussianSuiteSpec::with_seed(a.seed))?;
    let (cost, line) = build_cost("sqdist", Some(suite.grid.points()), a.solver.normalize_cost)?;
    let inst = Instance {
        problem: BarycenterProblem::new(suite.measures.clone(), cost)?,
        line,
    };
    fs::create_dir_all(&a.solver.out)?;
    write_histogram_row(
        BufWriter::new(File::create(a.solver.out.join("true_barycenter.csv"))?),
        &suite.true_barycenter()?,
    )?;
    let mut summary = csv::Writer::from_path(a.solver.out.join("summary.csv")).map_err(Error::from)?;
    summary.write_record(["algorithm", "status", "iterations", "duality_gap", "optimality_gap"])?;
    let mut code = 0u8;
    for algo in [Algo::Mp, Algo::De, Algo::Ibp] {
        let tag = match algo {
            Algo::Mp => "mp",
            Algo::De => "de",
            Algo::Ibp => "ibp",
        };
        let s = SolverArgs {
            out: a.solver.out.join(tag),
            ..a.solver.clone()
        };
        match solve(algo, &inst, &s) {
            Ok(out) => {
                let r = &out.report;
                let opt = r.records.last().and_then(|rec| rec.optimality_gap);
                writeln!(stdout, "{tag}: ok, {} iterations, duality gap {}", r.iterations, r.final_gap)?;
                summary.write_record([
                    tag.to_string(),
                    "ok".to_string(),
                    r.iterations.to_string(),
                    r.final_gap.to_string(),
                    opt.map(|v| v.to_string()).unwrap_or_default(),
                ])?;
            }
            Err(e) if matches!(e, Error::Numerical { .. } | Error::UnderflowDegenerate { .. }) => {
                writeln!(stdout, "{tag}: {}: {e}", status_tag(&e))?;
                summary.write_record([tag, status_tag(&e), "", "", ""])?;
                code = code.max(exit_code(&e));
            }
            Err(e) => return Err(e),
        }
    }
    summary.flush()?;
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Parse { line: 1, msg: "x".into() }), 2);
        assert_eq!(
            exit_code(&Error::Numerical {
                stage: "s",
                iteration: 1,
                detail: "d".into()
            }),
            3
        );
        assert_eq!(exit_code(&Error::UnderflowDegenerate { iteration: 1 }), 4);
        assert_eq!(status_tag(&Error::UnderflowDegenerate { iteration: 1 }), "underflow-degenerate");
    }

    #[test]
    fn input_and_gaussian_conflict() {
        let r = Cli::try_parse_from(["wbary", "barycenter", "--algo", "mp", "--gaussian", "--input", "a.csv"]);
        assert!(r.is_err());
        let r = Cli::try_parse_from(["wbary", "barycenter", "--algo", "mp"]);
        assert!(r.is_err());
    }

    #[test]
    fn defaults_parse() {
        let cli = Cli::try_parse_from(["wbary", "barycenter", "--algo", "de", "--gaussian"]).unwrap();
        let Command::Barycenter(a) = cli.command else {
            panic!("wrong subcommand");
        };
        assert_eq!(a.solver.eps, 0.05);
        assert_eq!(a.solver.scaling, ScalingArg::Derived);
        assert_eq!(a.solver.theta, ThetaArg::Exact);
        assert_eq!(a.cost, "sqdist");
        assert_eq!(a.seed, 0);
    }

    #[test]
    fn sqdist_needs_a_grid() {
        assert!(matches!(build_cost("sqdist", None, false), Err(Error::Config(_))));
        assert!(matches!(build_cost("euclid", Some(&[0.0, 1.0]), false), Err(Error::Config(_))));
    }

    #[test]
    fn normalized_cost_keeps_the_oracle_scale() {
        let (cost, line) = build_cost("sqdist", Some(&[0.0, 1.0, 3.0]), true).unwrap();
        assert_eq!(cost.d_inf(), 1.0);
        assert_eq!(line.unwrap().1, 9.0);
    }
}
