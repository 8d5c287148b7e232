//! CSV input of histograms and costs, and saved saddle pairs.
//!
//! Histogram files hold one measure per row. An optional first line
//! `# grid: x1, x2, ...` gives the support points; other lines starting with
//! `#` are comments.
//!
//! A saved pair is a flexible CSV whose first field tags each row:
//!
//! ```text
//! meta,0,<n>,<m>
//! cost,<j>,<row j of C>
//! measure,<i>,<q_i>
//! plan,<i>,<x_i>
//! bary,0,<p>
//! dual,<i>,<y_i>
//! gap,0,<certificate at save time>
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::problem::{BarycenterProblem, CostData, DualPoint, Histogram, PrimalPoint};

/// Row-sum deviation tolerated without explicit normalization.
pub const ROW_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedHistograms {
    pub measures: Vec<Histogram>,
    /// Support points from the `# grid:` header, if present.
    pub grid: Option<Vec<f64>>,
}

fn parse_field(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        msg: format!("`{}`: {e}", field.trim()),
    })
}

/// Numeric rows with their 1-based line numbers; `#` lines are skipped.
fn numeric_rows(text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec.iter().map(|f| parse_field(f, line)).collect::<Result<Vec<_>>>()?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn grid_header(text: &str) -> Result<Option<Vec<f64>>> {
    let Some((idx, first)) = text.lines().enumerate().find(|(_, l)| !l.trim().is_empty()) else {
        return Ok(None);
    };
    let Some(rest) = first.trim().strip_prefix('#') else {
        return Ok(None);
    };
    let Some(points) = rest.trim().strip_prefix("grid:") else {
        return Ok(None);
    };
    let line = idx + 1;
    points
        .split(',')
        .map(|f| parse_field(f, line))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Parses histogram rows. Rows must be nonnegative and of equal length; a row
/// whose sum is off by more than [`ROW_SUM_TOL`] is rejected unless
/// `normalize` is set. Accepted rows are rescaled to unit mass.
pub fn parse_histograms(text: &str, normalize: bool) -> Result<LoadedHistograms> {
    let grid = grid_header(text)?;
    let rows = numeric_rows(text)?;
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no histogram rows".into(),
        });
    }
    let n = rows[0].1.len();
    let mut measures = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        if row.len() != n {
            return Err(Error::Parse {
                line,
                msg: format!("row has {} entries, expected {n}", row.len()),
            });
        }
        if let Some(w) = row.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Parse {
                line,
                msg: format!("negative or non-finite mass {w}"),
            });
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > ROW_SUM_TOL && !normalize {
            return Err(Error::Parse {
                line,
                msg: format!("row sums to {total}; pass --normalize to rescale"),
            });
        }
        measures.push(Histogram::normalized(row).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?);
    }
    if let Some(g) = &grid {
        if g.len() != n {
            return Err(Error::Parse {
                line: 1,
                msg: format!("grid header has {} points, rows have {n}", g.len()),
            });
        }
    }
    Ok(LoadedHistograms { measures, grid })
}

pub fn load_histograms(path: &Path, normalize: bool) -> Result<LoadedHistograms> {
    parse_histograms(&std::fs::read_to_string(path)?, normalize)
}

/// Square nonnegative cost matrix, one row per line.
pub fn parse_cost(text: &str) -> Result<CostData> {
    let rows: Vec<Vec<f64>> = numeric_rows(text)?.into_iter().map(|(_, r)| r).collect();
    CostData::from_rows(&rows)
}

pub fn load_cost(path: &Path) -> Result<CostData> {
    parse_cost(&std::fs::read_to_string(path)?)
}

/// A saddle pair together with the problem it belongs to.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub problem: BarycenterProblem,
    pub x: PrimalPoint,
    pub y: DualPoint,
    /// Certificate recorded when the pair was saved.
    pub stored_gap: Option<f64>,
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, tag: &str, index: usize, values: &[f64]) -> Result<()> {
    let mut rec = vec![tag.to_string(), index.to_string()];
    rec.extend(values.iter().map(f64::to_string));
    w.write_record(&rec)?;
    Ok(())
}

/// Writes the pair in the tagged-row format. Values use the shortest
/// representation that parses back to the same double.
pub fn write_snapshot<W: Write>(out: W, snap: &Snapshot) -> Result<()> {
    let prob = &snap.problem;
    let n = prob.n();
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(["meta", "0", &n.to_string(), &prob.m().to_string()])?;
    for (j, row) in prob.cost().d().chunks_exact(n).enumerate() {
        write_row(&mut w, "cost", j, row)?;
    }
    for (i, q) in prob.measures().iter().enumerate() {
        write_row(&mut w, "measure", i, q.as_slice())?;
    }
    for (i, x) in snap.x.plans.iter().enumerate() {
        write_row(&mut w, "plan", i, x)?;
    }
    write_row(&mut w, "bary", 0, &snap.x.bary)?;
    for (i, y) in snap.y.duals.iter().enumerate() {
        write_row(&mut w, "dual", i, y)?;
    }
    if let Some(g) = snap.stored_gap {
        write_row(&mut w, "gap", 0, &[g])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(input: R) -> Result<Snapshot> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut shape: Option<(usize, usize)> = None;
    let mut cost_rows = Vec::new();
    let mut measures = Vec::new();
    let mut plans = Vec::new();
    let mut bary = None;
    let mut duals = Vec::new();
    let mut gap = None;
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let tag = rec.get(0).unwrap_or("");
        if tag.is_empty() {
            continue;
        }
        let index: usize = rec.get(1).unwrap_or("").parse().map_err(|_| Error::Parse {
            line,
            msg: "missing or invalid row index".into(),
        })?;
        let values: Vec<f64> = rec.iter().skip(2).map(|f| parse_field(f, line)).collect::<Result<_>>()?;
        let expect_index = |len: usize| -> Result<()> {
            if index != len {
                return Err(Error::Parse {
                    line,
                    msg: format!("{tag} row {index} out of order, expected {len}"),
                });
            }
            Ok(())
        };
        match tag {
            "meta" => {
                if values.len() != 2 {
                    return Err(Error::Parse {
                        line,
                        msg: "meta row needs n and m".into(),
                    });
                }
                shape = Some((values[0] as usize, values[1] as usize));
            }
            "cost" => {
                expect_index(cost_rows.len())?;
                cost_rows.push(values);
            }
            "measure" => {
                expect_index(measures.len())?;
                measures.push(Histogram::new(values).map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?);
            }
            "plan" => {
                expect_index(plans.len())?;
                plans.push(values);
            }
            "bary" => bary = Some(values),
            "dual" => {
                expect_index(duals.len())?;
                duals.push(values);
            }
            "gap" => gap = values.first().copied(),
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown row tag `{other}`"),
                })
            }
        }
    }
    let (n, m) = shape.ok_or_else(|| Error::Parse {
        line: 1,
        msg: "missing meta row".into(),
    })?;
    let problem = BarycenterProblem::new(measures, CostData::from_rows(&cost_rows)?)?;
    let x = PrimalPoint {
        plans,
        bary: bary.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "missing bary row".into(),
        })?,
    };
    let y = DualPoint { duals };
    x.check_shape(n, m)?;
    y.check_shape(n, m)?;
    if problem.n() != n || problem.m() != m {
        return Err(Error::Shape(format!(
            "meta row says n={n}, m={m} but the data has n={}, m={}",
            problem.n(),
            problem.m()
        )));
    }
    Ok(Snapshot {
        problem,
        x,
        y,
        stored_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_diracs() {
        let h = parse_histograms("1,0\n0,1\n", false).unwrap();
        assert_eq!(h.measures.len(), 2);
        assert_eq!(h.measures[0].as_slice(), &[1.0, 0.0]);
        assert_eq!(h.grid, None);
    }

    #[test]
    fn half_mass_row() {
        let err = parse_histograms("0.25,0.25\n", false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let h = parse_histograms("0.25,0.25\n", true).unwrap();
        assert_eq!(h.measures[0].as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn grid_header_and_comments() {
        let text = "# grid: -1, 0, 1\n# a comment\n0.2,0.3,0.5\n\n0,1,0\n";
        let h = parse_histograms(text, false).unwrap();
        assert_eq!(h.grid, Some(vec![-1.0, 0.0, 1.0]));
        assert_eq!(h.measures.len(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_histograms("0.5,0.5\n0.5,abc\n", false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_histograms("0.5,0.5\n1.5,-0.5\n", true) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("negative"));
            }
            other => panic!("{other:?}"),
        }
        match parse_histograms("0.5,0.5\n1,0,0\n", false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cost_matrix() {
        let c = parse_cost("0,1\n2,0\n").unwrap();
        assert_eq!(c.d(), &[0.0, 1.0, 2.0, 0.0]);
        assert!(parse_cost("0,1\n2\n").is_err());
    }

    #[test]
    fn snapshot_roundtrip_is_exact() {
        let cost = CostData::from_vec(2, vec![0.0, 1.0 / 3.0, 0.7, 0.0]).unwrap();
        let problem = BarycenterProblem::new(vec![Histogram::new(vec![0.1, 0.9]).unwrap()], cost).unwrap();
        let snap = Snapshot {
            problem,
            x: PrimalPoint {
                plans: vec![vec![0.1, 0.2, 0.3, 0.4]],
                bary: vec![1.0 / 3.0, 2.0 / 3.0],
            },
            y: DualPoint {
                duals: vec![vec![-1.0, 0.1, 1.0 / 7.0, 0.0]],
            },
            stored_gap: Some(0.123456789012345),
        };
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &snap).unwrap();
        let back = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back.problem, snap.problem);
        assert_eq!(back.x, snap.x);
        assert_eq!(back.y, snap.y);
        assert_eq!(back.stored_gap, snap.stored_gap);
    }
}
