//! CSV output. Every table has a header row, `.` decimals and `\n` line ends.

use std::io::Write;

use serde::Serialize;

use crate::genfun::{PhiSeries, PhiValue, Tail};
use crate::montecarlo::SurvivalReport;
use crate::oracle::ExtinctionVector;
use crate::phases::{PhaseDiagramRow, RegimeRow};
use crate::spectral::SpectralSchedule;

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn write_rows<W: Write, R: Serialize>(out: W, rows: impl IntoIterator<Item = R>) -> csv::Result<()> {
    let mut w = writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes only the header when there are no rows.
fn write_header_if_empty<W: Write>(out: W, header: &[&str]) -> csv::Result<()> {
    let mut w = writer(out);
    w.write_record(header)?;
    w.flush()?;
    Ok(())
}

pub const PHASE_DIAGRAM_HEADER: [&str; 5] = ["k_oo", "lambda_w_star", "lambda_s_star", "closed_form", "abs_err"];

pub fn write_phase_diagram<W: Write>(out: W, rows: &[PhaseDiagramRow]) -> csv::Result<()> {
    if rows.is_empty() {
        return write_header_if_empty(out, &PHASE_DIAGRAM_HEADER);
    }
    write_rows(out, rows)
}

#[derive(Serialize)]
struct SurvivalCsv {
    lambda: f64,
    trials: u64,
    global_freq: f64,
    global_lo: f64,
    global_hi: f64,
    local_freq: f64,
    local_lo: f64,
    local_hi: f64,
    never_hit_freq: f64,
    never_hit_lo: f64,
    never_hit_hi: f64,
    capped: u64,
    alive_at_horizon: u64,
    undecided_count: u64,
}

pub const SURVIVAL_HEADER: [&str; 14] = [
    "lambda",
    "trials",
    "global_freq",
    "global_lo",
    "global_hi",
    "local_freq",
    "local_lo",
    "local_hi",
    "never_hit_freq",
    "never_hit_lo",
    "never_hit_hi",
    "capped",
    "alive_at_horizon",
    "undecided_count",
];

pub fn write_survival<W: Write>(out: W, reports: &[SurvivalReport]) -> csv::Result<()> {
    if reports.is_empty() {
        return write_header_if_empty(out, &SURVIVAL_HEADER);
    }
    write_rows(
        out,
        reports.iter().map(|r| SurvivalCsv {
            lambda: r.lambda,
            trials: r.trials,
            global_freq: r.global.frequency,
            global_lo: r.global.lo,
            global_hi: r.global.hi,
            local_freq: r.local.frequency,
            local_lo: r.local.lo,
            local_hi: r.local.hi,
            never_hit_freq: r.never_hit.frequency,
            never_hit_lo: r.never_hit.lo,
            never_hit_hi: r.never_hit.hi,
            capped: r.capped,
            alive_at_horizon: r.alive_at_horizon,
            undecided_count: r.undecided_count(),
        }),
    )
}

#[derive(Serialize)]
struct RegimeCsv {
    lambda: f64,
    label: &'static str,
    q_global_lo: Option<f64>,
    q_global_hi: Option<f64>,
    #[serde(rename = "q_B_lo")]
    q_b_lo: Option<f64>,
    #[serde(rename = "q_B_hi")]
    q_b_hi: Option<f64>,
    check: &'static str,
}

/// Extinction probabilities are one minus the survival frequencies; the
/// evidence columns are empty when no simulation backs a row.
pub fn write_regimes<W: Write>(out: W, rows: &[RegimeRow]) -> csv::Result<()> {
    if rows.is_empty() {
        return write_header_if_empty(
            out,
            &["lambda", "label", "q_global_lo", "q_global_hi", "q_B_lo", "q_B_hi", "check"],
        );
    }
    write_rows(
        out,
        rows.iter().map(|r| RegimeCsv {
            lambda: r.lambda,
            label: r.regime.label(),
            q_global_lo: r.evidence.map(|e| 1.0 - e.global.hi),
            q_global_hi: r.evidence.map(|e| 1.0 - e.global.lo),
            q_b_lo: r.evidence.map(|e| 1.0 - e.local.hi),
            q_b_hi: r.evidence.map(|e| 1.0 - e.local.lo),
            check: match r.check {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "",
            },
        }),
    )
}

#[derive(Serialize)]
struct VectorCsv {
    vertex: String,
    q: f64,
}

pub fn write_extinction_vector<W: Write>(out: W, v: &ExtinctionVector) -> csv::Result<()> {
    if v.vertices.is_empty() {
        return write_header_if_empty(out, &["vertex", "q"]);
    }
    write_rows(
        out,
        v.vertices.iter().zip(&v.values).map(|(x, &q)| VectorCsv { vertex: x.to_string(), q }),
    )
}

#[derive(Serialize)]
struct ScheduleCsv {
    radius: usize,
    vertex_count: String,
    spectral_radius: f64,
    lambda_s_estimate: f64,
    method: &'static str,
}

pub fn write_schedule<W: Write>(out: W, schedule: &SpectralSchedule) -> csv::Result<()> {
    if schedule.entries.is_empty() {
        return write_header_if_empty(
            out,
            &["radius", "vertex_count", "spectral_radius", "lambda_s_estimate", "method"],
        );
    }
    write_rows(
        out,
        schedule.entries.iter().map(|e| ScheduleCsv {
            radius: e.radius,
            vertex_count: e.vertex_count.to_string(),
            spectral_radius: e.spectral_radius,
            lambda_s_estimate: e.lambda_s_estimate,
            method: e.method.name(),
        }),
    )
}

#[derive(Serialize)]
struct SeriesCsv {
    n: usize,
    phi_n: f64,
}

/// Coefficients `φ^(n)` for `n = 1..=N`.
pub fn write_phi_series<W: Write>(out: W, series: &PhiSeries) -> csv::Result<()> {
    if series.order() == 0 {
        return write_header_if_empty(out, &["n", "phi_n"]);
    }
    write_rows(out, (1..=series.order()).map(|n| SeriesCsv { n, phi_n: series.coefficient(n) }))
}

#[derive(Serialize)]
struct PhiCsv {
    lambda: f64,
    phi_partial: f64,
    tail: String,
    phi_lower: f64,
    phi_upper: String,
}

/// One row per `λ`; a divergent tail is written as `inf`.
pub fn write_phi_table<W: Write>(out: W, rows: &[(f64, PhiValue)]) -> csv::Result<()> {
    if rows.is_empty() {
        return write_header_if_empty(out, &["lambda", "phi_partial", "tail", "phi_lower", "phi_upper"]);
    }
    let num = |x: Option<f64>| x.map_or_else(|| "inf".to_string(), |v| v.to_string());
    write_rows(
        out,
        rows.iter().map(|(lambda, v)| PhiCsv {
            lambda: *lambda,
            phi_partial: v.value,
            tail: num(match v.tail {
                Tail::Bounded(t) => Some(t),
                Tail::Divergent => None,
            }),
            phi_lower: v.lower,
            phi_upper: num(v.upper()),
        }),
    )
}
