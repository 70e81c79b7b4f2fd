//! Certificates, per-iteration traces and their CSV / JSON rendering.

use std::io::Write;

use rug::Float;
use serde::Serialize;

use crate::error::Result;
use crate::scalar;

/// Verified-convergence certificate at one iterate.
///
/// `u` combines the residual size `epsilon`, the inverse-gap bound `kappa` and
/// the spectral-radius bound `k_bound`; each solver documents its own formula
/// and threshold.  `satisfied` means `u <= threshold`: from this point the
/// iteration is guaranteed to converge quadratically.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub epsilon: Float,
    pub kappa: Float,
    pub k_bound: Float,
    pub u: Float,
    pub threshold: f64,
    pub satisfied: bool,
}

impl CertificateReport {
    pub fn new(epsilon: Float, kappa: Float, k_bound: Float, u: Float, threshold: f64) -> Self {
        let satisfied = u.is_finite() && u <= threshold;
        CertificateReport { epsilon, kappa, k_bound, u, threshold, satisfied }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Residual reached the requested target.
    Converged,
    /// Iteration budget exhausted before the target.
    MaxIterReached,
    /// Residual grew for several consecutive uncertified iterations.
    Diverging,
}

/// State snapshot after one Newton step (row 0 is the initial point).
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iteration: usize,
    /// Certificate value at this iterate, if one was evaluated.
    pub certificate: Option<Float>,
    /// Maximum residual norm at this iterate.
    pub err_res: Float,
    /// Seconds spent producing this iterate (0 for the initial row).
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    pub status: SolveStatus,
}

#[derive(Serialize)]
struct TraceRowJson {
    iteration: usize,
    certificate: Option<String>,
    err_res: String,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct TraceJson {
    status: SolveStatus,
    rows: Vec<TraceRowJson>,
}

impl IterationTrace {
    pub fn final_err(&self) -> &Float {
        &self.rows.last().expect("trace has at least the initial row").err_res
    }

    /// Decimal digits used when rendering a trace produced at `prec` bits.
    pub fn render_digits(prec: u32) -> usize {
        scalar::roundtrip_digits(prec)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W, digits: usize) -> Result<()> {
        writeln!(w, "iteration,certificate,err_res")?;
        for row in &self.rows {
            let cert = row
                .certificate
                .as_ref()
                .map(|c| scalar::fmt_sci(c, digits))
                .unwrap_or_default();
            writeln!(w, "{},{},{}", row.iteration, cert, scalar::fmt_sci(&row.err_res, digits))?;
        }
        Ok(())
    }

    /// JSON value with status and rendered rows (embeddable under metadata).
    pub fn to_json_value(&self, digits: usize) -> serde_json::Value {
        let doc = TraceJson {
            status: self.status,
            rows: self
                .rows
                .iter()
                .map(|r| TraceRowJson {
                    iteration: r.iteration,
                    certificate: r.certificate.as_ref().map(|c| scalar::fmt_sci(c, digits)),
                    err_res: scalar::fmt_sci(&r.err_res, digits),
                    wall_time_s: r.wall_time,
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("trace serialization is infallible")
    }

    pub fn write_json<W: Write>(&self, w: &mut W, digits: usize) -> Result<()> {
        serde_json::to_writer_pretty(&mut *w, &self.to_json_value(digits))?;
        writeln!(w)?;
        Ok(())
    }
}
