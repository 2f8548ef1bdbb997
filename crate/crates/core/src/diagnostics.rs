//! Training-dynamics diagnostics: mean positive kernel, embedding length and
//! the per-substep norms of a kernel step, plus their CSV form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::kernel::{LinkKernels, SubstepTrace};
use crate::scalar::Scalar;
use crate::trainer::TrainHistory;

pub const TRAJECTORY_HEADER: &str = "step,mean_k_plus,frob_norm,sub1,sub2,sub3,sub4";

/// Mean of `K₊` over the stored support of the positive mask.
pub fn mean_positive_kernel<T: Scalar>(kernels: &LinkKernels<T>) -> Result<f64> {
    let values = kernels.k_plus.values();
    if values.is_empty() {
        return Err(Error::EmptySupport("positive link kernel"));
    }
    let sum: f64 = values.iter().map(|v| v.to_f64_lossy()).sum();
    Ok(sum / values.len() as f64)
}

pub fn frobenius<T: Scalar>(x: &Array2<T>) -> T {
    x.iter().map(|v| *v * *v).sum::<T>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubstepCheck {
    pub norms: [f64; 4],
    /// Substep (1) did not lengthen the input and (3) did not lengthen (2).
    pub contracting: bool,
}

/// Validates a four-part trace and flags whether the propagation substeps
/// contracted. A relative slack of `1e-12` absorbs rounding.
pub fn substep_trace(trace: &SubstepTrace) -> Result<SubstepCheck> {
    if trace.entries.len() != 4 {
        return Err(Error::TraceLength {
            found: trace.entries.len(),
        });
    }
    let mut norms = [0.0; 4];
    for (k, &(id, n)) in trace.entries.iter().enumerate() {
        if id as usize != k + 1 {
            return Err(Error::InvalidConfig(format!("substep {id} out of order")));
        }
        norms[k] = n;
    }
    let not_longer = |after: f64, before: f64| after <= before * (1.0 + 1e-12);
    Ok(SubstepCheck {
        norms,
        contracting: not_longer(norms[0], trace.input_norm) && not_longer(norms[2], norms[1]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub mean_k_plus: f64,
    pub frob_norm: f64,
    pub substeps: Option<[f64; 4]>,
}

pub fn trajectory(history: &TrainHistory) -> Vec<TrajectoryRecord> {
    history
        .records
        .iter()
        .map(|r| TrajectoryRecord {
            step: r.epoch,
            mean_k_plus: r.mean_k_plus,
            frob_norm: r.frob_norm,
            substeps: r.substeps,
        })
        .collect()
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectories(records: &[TrajectoryRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for r in records {
            let subs = match r.substeps {
                Some(s) => s.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","),
                None => ",,,".to_string(),
            };
            writeln!(w, "{},{},{},{}", r.step, fmt_f64(r.mean_k_plus), fmt_f64(r.frob_norm), subs)?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

pub fn emit_trajectories(history: &TrainHistory, path: &Path) -> Result<()> {
    write_trajectories(&trajectory(history), path)
}

pub fn read_trajectories(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let shown = path.display().to_string();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: shown.clone(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if idx == 0 {
            if line != TRAJECTORY_HEADER {
                return Err(parse_err(1, format!("unexpected header `{line}`")));
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 7 {
            return Err(parse_err(idx + 1, format!("expected 7 cells, found {}", cells.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| parse_err(idx + 1, format!("`{s}`: {e}")))
        };
        let step = cells[0]
            .parse()
            .map_err(|e| parse_err(idx + 1, format!("step: {e}")))?;
        let substeps = if cells[3..].iter().all(|c| c.is_empty()) {
            None
        } else {
            Some([num(cells[3])?, num(cells[4])?, num(cells[5])?, num(cells[6])?])
        };
        out.push(TrajectoryRecord {
            step,
            mean_k_plus: num(cells[1])?,
            frob_norm: num(cells[2])?,
            substeps,
        });
    }
    Ok(out)
}
