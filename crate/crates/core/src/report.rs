//! CSV and JSON report writers. Column orders are fixed; every CSV starts
//! with its header row.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::fim::{FimReport, Metrics};
use crate::mc::{EstimationResult, SweepRow};
use crate::placement::{OptimizerTrace, PlacementSolution};
use crate::scenario::{scenario_to_doc, ArrayDoc, Scenario};
use crate::signal::{CovarianceModel, MeasurementVector};

pub type ReportResult = Result<(), csv::Error>;

fn finish<W: Write>(mut w: csv::Writer<W>) -> ReportResult {
    w.flush()?;
    Ok(())
}

/// `bin,path,re,im`, one row per bin and path. `bin` is the relative cell
/// index of the stored bin.
pub fn write_measurement_csv<W: Write>(out: W, rho: &MeasurementVector) -> ReportResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin", "path", "re", "im"])?;
    for slot in 0..rho.bins() {
        for l in 0..rho.paths {
            let (re, im) = rho.get(slot, l);
            w.serialize((slot + rho.first_bin, l, re, im))?;
        }
    }
    finish(w)
}

/// `row,col,value` for every nonzero entry.
pub fn write_matrix_csv<W: Write>(out: W, m: &DMatrix<f64>) -> ReportResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "value"])?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if m[(r, c)] != 0.0 {
                w.serialize((r, c, m[(r, c)]))?;
            }
        }
    }
    finish(w)
}

/// Nonzero entries of the full measurement covariance.
pub fn write_covariance_csv<W: Write>(out: W, cov: &CovarianceModel) -> ReportResult {
    write_matrix_csv(out, &cov.dense())
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsDoc {
    pub trace: f64,
    pub det: f64,
    pub max_eig: f64,
    pub cond: f64,
    pub ridge_applied: bool,
    /// Per-target position metrics.
    pub position: Vec<Metrics>,
}

impl From<&FimReport> for MetricsDoc {
    fn from(r: &FimReport) -> Self {
        Self {
            trace: r.metrics.trace,
            det: r.metrics.det,
            max_eig: r.metrics.max_eig,
            cond: r.cond,
            ridge_applied: r.ridge_applied,
            position: r.position.clone(),
        }
    }
}

/// Placement result in the document format used by `place`.
#[derive(Debug, Clone, Serialize)]
pub struct PlacementDoc {
    pub geometry: ArrayDoc,
    pub bound: Option<f64>,
    pub achieved: f64,
    pub gap: Option<f64>,
    pub rank1_residuals: Vec<f64>,
    pub iterations: usize,
    pub status: String,
}

impl PlacementDoc {
    pub fn new(s: &Scenario, sol: &PlacementSolution) -> Self {
        Self {
            geometry: scenario_to_doc(&s.with_array(sol.geometry.clone())).array,
            bound: sol.relaxation_bound,
            achieved: sol.achieved_cost,
            gap: sol.gap,
            rank1_residuals: sol.rank1_residuals.clone(),
            iterations: sol.iterations,
            status: sol.status.clone(),
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)
}

/// `restart,inner_iter,cost,accepted`: the inner cost history of every
/// restart; `accepted` repeats the restart's verdict on each of its rows.
pub fn write_trace_csv<W: Write>(out: W, trace: &OptimizerTrace) -> ReportResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["restart", "inner_iter", "cost", "accepted"])?;
    for rec in &trace.records {
        if rec.history.is_empty() {
            w.serialize((rec.restart, 0, rec.cost, rec.accepted))?;
        }
        for (i, c) in rec.history.iter().enumerate() {
            w.serialize((rec.restart, i, c, rec.accepted))?;
        }
    }
    finish(w)
}

pub const RMSE_HEADER: [&str; 7] = ["snr_db", "geometry", "target", "rmse_m", "crlb_m", "trials", "failures"];
pub const SWEEP_HEADER: [&str; 6] = ["axis_value", "geometry", "trace", "det", "max_eig", "doa_var"];
pub const BOUND_HEADER: [&str; 3] = ["dtheta_rad", "lo", "hi"];

/// Rows of the RMSE table for one geometry.
pub fn write_rmse_rows<W: Write>(w: &mut csv::Writer<W>, geometry: &str, results: &[EstimationResult]) -> ReportResult {
    for r in results {
        for (t, tr) in r.targets.iter().enumerate() {
            w.serialize((r.snr_db, geometry, t, tr.rmse_m, tr.crlb_m, r.trials, r.failures))?;
        }
    }
    Ok(())
}

pub fn write_sweep_rows<W: Write>(w: &mut csv::Writer<W>, rows: &[SweepRow]) -> ReportResult {
    for r in rows {
        w.serialize((r.axis_value, &r.geometry, r.trace, r.det, r.max_eig, r.doa_var))?;
    }
    Ok(())
}

pub fn write_bound_rows<W: Write>(w: &mut csv::Writer<W>, rows: &[(f64, f64, f64)]) -> ReportResult {
    for r in rows {
        w.serialize(r)?;
    }
    Ok(())
}
