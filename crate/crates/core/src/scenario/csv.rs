//! Sweep and trace tables.
//!
//! Sweep values are written in fixed notation with nine decimals, trace
//! values in scientific notation. Both are plain `format!` output, so equal
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{SolveReport, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Gamma,
    Tau,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Gamma => "gamma",
            SweepAxis::Tau => "tau",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSample {
    pub param: f64,
    /// Total received at each target, in network order.
    pub aggregates: Vec<f64>,
    pub true_loss: f64,
    pub perceived_loss: f64,
    pub active_targets: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub target_count: usize,
    /// Sorted by `param`.
    pub samples: Vec<SweepSample>,
}

fn sweep_header(n: usize) -> String {
    let mut h = String::from("param");
    for i in 1..=n {
        let _ = write!(h, ",target_{i}");
    }
    h.push_str(",true_loss,perceived_loss,active_targets\n");
    h
}

pub fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut out = sweep_header(result.target_count);
    for s in &result.samples {
        if s.aggregates.len() != result.target_count {
            return Err(Error::Mismatch(format!(
                "sample at {} has {} aggregates, expected {}",
                s.param,
                s.aggregates.len(),
                result.target_count
            )));
        }
        let _ = write!(out, "{:.9}", s.param);
        for a in &s.aggregates {
            let _ = write!(out, ",{a:.9}");
        }
        let _ = writeln!(out, ",{:.9},{:.9},{}", s.true_loss, s.perceived_loss, s.active_targets);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_sweep_csv(path: &Path, axis: SweepAxis) -> Result<SweepResult> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: &str| Error::Parse(vec![format!("{}: line {line}: {msg}", path.display())]);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "missing header"))?;
    let cols = header.split(',').count();
    if cols < 4 {
        return Err(bad(1, "too few columns"));
    }
    let target_count = cols - 4;
    if header.to_owned() + "\n" != sweep_header(target_count) {
        return Err(bad(1, "unexpected header"));
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(bad(i + 2, "wrong number of columns"));
        }
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 2, &format!("not a number: {s}")));
        let values = fields[..cols - 1]
            .iter()
            .map(|s| float(s))
            .collect::<Result<Vec<_>>>()?;
        let active = fields[cols - 1]
            .parse()
            .map_err(|_| bad(i + 2, "active_targets is not an integer"))?;
        samples.push(SweepSample {
            param: values[0],
            aggregates: values[1..=target_count].to_vec(),
            true_loss: values[target_count + 1],
            perceived_loss: values[target_count + 2],
            active_targets: active,
        });
    }
    Ok(SweepResult {
        axis,
        target_count,
        samples,
    })
}

pub fn write_trace_csv(report: &SolveReport, path: &Path) -> Result<()> {
    write_trace_records(&report.residual_trace, path)
}

pub fn write_trace_records(trace: &[TraceRecord], path: &Path) -> Result<()> {
    let mut out = String::from("iteration,primal_residual,objective\n");
    for r in trace {
        let _ = writeln!(out, "{},{:.12e},{:.12e}", r.iteration, r.primal_residual, r.objective);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centralized::{solve_op_a, SolverConfig};
    use crate::scenario::build_case_study;

    fn sample(param: f64) -> SweepSample {
        SweepSample {
            param,
            aggregates: vec![1.0 / 3.0, 12.345678912345, 0.0],
            true_loss: 0.123456789987,
            perceived_loss: 2.0f64.sqrt(),
            active_targets: 2,
        }
    }

    #[test]
    fn two_samples_give_three_lines_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let result = SweepResult {
            axis: SweepAxis::Gamma,
            target_count: 3,
            samples: vec![sample(0.3), sample(1.0)],
        };
        write_sweep_csv(&result, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("param,target_1,target_2,target_3,true_loss,perceived_loss,active_targets\n"));

        let back = read_sweep_csv(&path, SweepAxis::Gamma).unwrap();
        assert_eq!(back.samples.len(), 2);
        for (a, b) in result.samples.iter().zip(&back.samples) {
            let pairs = std::iter::once((a.param, b.param))
                .chain(a.aggregates.iter().copied().zip(b.aggregates.iter().copied()))
                .chain([(a.true_loss, b.true_loss), (a.perceived_loss, b.perceived_loss)]);
            for (x, y) in pairs {
                assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
            }
            assert_eq!(a.active_targets, b.active_targets);
        }
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        let result = SweepResult {
            axis: SweepAxis::Tau,
            target_count: 2,
            samples: vec![],
        };
        write_sweep_csv(&result, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "param,target_1,target_2,true_loss,perceived_loss,active_targets\n"
        );
    }

    #[test]
    fn trace_csv_of_centralized_run_is_non_increasing() {
        let (net, b) = build_case_study();
        let report = solve_op_a(&net, &b, &SolverConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let objective: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        assert_eq!(objective.len(), report.residual_trace.len());
        assert!(objective.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn empty_trace_is_header_only() {
        let (net, _) = build_case_study();
        let report = SolveReport {
            plan: crate::model::AllocationPlan::zeros(&net),
            true_loss: 0.0,
            perceived_loss: 0.0,
            source_utility: 0.0,
            iterations: 0,
            residual_trace: vec![],
            converged: true,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&report, &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "iteration,primal_residual,objective\n"
        );
    }

    #[test]
    fn unwritable_destination_names_path() {
        let result = SweepResult {
            axis: SweepAxis::Gamma,
            target_count: 0,
            samples: vec![],
        };
        let err = write_sweep_csv(&result, Path::new("/nonexistent/dir/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
    }
}
