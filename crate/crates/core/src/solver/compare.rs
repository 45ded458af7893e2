use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{solve, ShiftChoice, SolveOptions, SolveReport};
use crate::error::{LabError, Result};
use crate::lchs::{KernelKind, KernelOptions};
use crate::matrixcore::{vector_json, ComplexVector, GeneratorSpec};
use crate::par;

pub const CSV_HEADER: [&str; 9] = [
    "kernel",
    "eps",
    "K",
    "max_k",
    "total_weight",
    "rel_error",
    "success_prob",
    "rounds_overhead",
    "shift",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareProblem {
    pub name: String,
    pub gen: GeneratorSpec,
    #[serde(with = "vector_json")]
    pub u0: ComplexVector,
}

/// One `(problem, kernel, ε, shift)` cell of a sweep. Failed solves keep the
/// error message and leave unavailable metrics as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub problem: String,
    pub kernel: KernelKind,
    pub eps: f64,
    pub shift: bool,
    pub k: Option<u64>,
    pub max_k: Option<f64>,
    pub total_weight: Option<f64>,
    pub rel_error: Option<f64>,
    pub success_prob: Option<f64>,
    pub rounds_overhead: Option<f64>,
    pub error: Option<String>,
}

impl CompareRow {
    fn from_report(problem: &str, kernel: KernelKind, eps: f64, shift: bool, report: &SolveReport, error: Option<String>) -> Self {
        Self {
            problem: problem.to_string(),
            kernel,
            eps,
            shift,
            k: Some(report.kernel.k_max()),
            max_k: Some(report.max_abs_k),
            total_weight: Some(report.total_weight),
            rel_error: Some(report.rel_error),
            success_prob: Some(report.success_prob),
            rounds_overhead: Some(report.rounds_overhead),
            error,
        }
    }

    pub fn passed(&self) -> bool {
        self.error.is_none()
    }
}

/// Solves every combination of problem, kernel, tolerance and shift setting.
/// Rows are evaluated in parallel and returned in sweep order.
pub fn compare(
    problems: &[CompareProblem],
    eps_grid: &[f64],
    kernels: &[KernelKind],
    shifts: &[bool],
    options: KernelOptions,
) -> Vec<CompareRow> {
    let mut cells = Vec::new();
    for p in problems {
        for &k in kernels {
            for &eps in eps_grid {
                for &s in shifts {
                    cells.push((p, k, eps, s));
                }
            }
        }
    }
    par::map_indexed(cells.len(), |i| {
        let (p, kernel, eps, shift) = cells[i];
        let opts = SolveOptions {
            kernel: super::KernelChoice::Auto(kernel),
            kernel_options: options,
            epsilon: eps,
            shift: if shift { ShiftChoice::ExactMin } else { ShiftChoice::None },
        };
        match solve(&p.gen, &p.u0, &opts) {
            Ok(r) => CompareRow::from_report(&p.name, kernel, eps, shift, &r, None),
            Err(LabError::ToleranceNotMet(r)) => {
                let msg = LabError::ToleranceNotMet(r.clone()).to_string();
                CompareRow::from_report(&p.name, kernel, eps, shift, &r, Some(msg))
            }
            Err(e) => CompareRow {
                problem: p.name.clone(),
                kernel,
                eps,
                shift,
                k: None,
                max_k: None,
                total_weight: None,
                rel_error: None,
                success_prob: None,
                rounds_overhead: None,
                error: Some(e.to_string()),
            },
        }
    })
}

fn fmt_float(x: Option<f64>) -> String {
    match x {
        Some(v) if !v.is_nan() => format!("{v:.16e}"),
        _ => "NaN".to_string(),
    }
}

/// Writes the rows as CSV. The kernel column reads `problem:kernel` when the
/// rows span more than one problem.
pub fn write_csv<W: Write>(rows: &[CompareRow], out: W) -> Result<()> {
    let multi = rows.iter().any(|r| r.problem != rows[0].problem);
    let io = |e: csv::Error| LabError::NumericalFailure(format!("writing CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        let kernel = if multi {
            format!("{}:{}", r.problem, r.kernel)
        } else {
            r.kernel.to_string()
        };
        w.write_record([
            kernel,
            fmt_float(Some(r.eps)),
            r.k.map_or_else(|| "NaN".to_string(), |k| k.to_string()),
            fmt_float(r.max_k),
            fmt_float(r.total_weight),
            fmt_float(r.rel_error),
            fmt_float(r.success_prob),
            fmt_float(r.rounds_overhead),
            if r.shift { "on" } else { "off" }.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| LabError::NumericalFailure(format!("writing CSV: {e}")))?;
    Ok(())
}
