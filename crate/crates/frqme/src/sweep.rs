//! Parameter sweeps over the dimensionless drive amplitude ω₁⁽ˢ⁾ = ω₁/ω_SE
//! and kernel time τc⁽ˢ⁾ = ω_SE·τc, plus the emitters behind the CLI.
//!
//! Sweep points are independent: execution can fan out over a worker pool of
//! any size, and records always come back in row-major grid order (τc⁽ˢ⁾
//! outer, ω₁⁽ˢ⁾ inner), so output files are byte-identical regardless of the
//! worker count. The per-record wall time is kept for diagnostics but never
//! written to CSV or JSON.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{compile_sequence, DensityMatrix, EngineError, Mode, POSITIVITY_TOL};
use crate::grover::{
    efficiency, fidelity, fidelity_did, purity, purity_did, target_state, MetricsError,
    MetricsRecord,
};
use crate::linalg::Superoperator;
use crate::model::{BasisLabel, ModelError, PhysicalParams};
use crate::seqdsl::{self, PulseSequence};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("sweep point (omega1_s={omega1_s:.6e}, tauc_s={tauc_s:.6e}) failed: {source}")]
    Point {
        omega1_s: f64,
        tauc_s: f64,
        source: Box<SweepError>,
    },
    #[error("optimum search needs at least 3 points in a row, got {0}")]
    RowTooShort(usize),
    #[error("row records must be ordered by strictly increasing omega1_s")]
    UnsortedRow,
    #[error("cannot emit an empty record list")]
    EmptyRecords,
    #[error("failed to build worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SweepError {
    /// True when the failure is a reader hanging up on our stdout, e.g. the
    /// output being piped into `head`.
    pub fn is_broken_pipe(&self) -> bool {
        match self {
            SweepError::Io(e) => e.kind() == std::io::ErrorKind::BrokenPipe,
            SweepError::Json(e) => e.io_error_kind() == Some(std::io::ErrorKind::BrokenPipe),
            _ => false,
        }
    }
}

/// Logarithmically spaced axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl LogRange {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self, SweepError> {
        let range = Self { min, max, count };
        range.validate()?;
        Ok(range)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if !self.min.is_finite() || self.min <= 0.0 {
            return Err(SweepError::InvalidGrid(format!(
                "range min must be > 0, got {}",
                self.min
            )));
        }
        if !self.max.is_finite() || self.max <= self.min {
            return Err(SweepError::InvalidGrid(format!(
                "range max must exceed min ({} <= {})",
                self.max, self.min
            )));
        }
        if self.count < 1 {
            return Err(SweepError::InvalidGrid(
                "range count must be >= 1".to_string(),
            ));
        }
        Ok(())
    }

    /// `min · (max/min)^(k/(count−1))`, evaluated in log10 space.
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let (lo, hi) = (self.min.log10(), self.max.log10());
        let step = (hi - lo) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| 10f64.powf(lo + step * k as f64))
            .collect()
    }

    /// Parse `"min:max:count"`.
    pub fn parse(spec: &str) -> Result<Self, SweepError> {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(SweepError::InvalidGrid(format!(
                "range spec {spec:?} must be min:max:count"
            )));
        }
        let min: f64 = parts[0]
            .parse()
            .map_err(|_| SweepError::InvalidGrid(format!("bad range min {:?}", parts[0])))?;
        let max: f64 = parts[1]
            .parse()
            .map_err(|_| SweepError::InvalidGrid(format!("bad range max {:?}", parts[1])))?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| SweepError::InvalidGrid(format!("bad range count {:?}", parts[2])))?;
        Self::new(min, max, count)
    }
}

/// Full sweep specification. `omega_se` sets the absolute frequency scale,
/// `target` selects the sign-flip target and the fidelity reference state.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub omega1_s: LogRange,
    pub tauc_s: LogRange,
    pub mode: Mode,
    pub j_hz: f64,
    pub omega_se: f64,
    pub target: BasisLabel,
}

impl Default for SweepGrid {
    /// 49×49 log grid: ω₁⁽ˢ⁾ over [1e−2, 1e2] (so the claimed optimum at 1
    /// sits on a grid point), τc⁽ˢ⁾ over [1e−4, 1], ω_SE = 2π·10³ rad/s,
    /// J = 10 kHz, both dissipators on, target |01⟩.
    fn default() -> Self {
        Self {
            omega1_s: LogRange {
                min: 1e-2,
                max: 1e2,
                count: 49,
            },
            tauc_s: LogRange {
                min: 1e-4,
                max: 1.0,
                count: 49,
            },
            mode: Mode::Both,
            j_hz: 1.0e4,
            omega_se: 2.0 * std::f64::consts::PI * 1.0e3,
            target: BasisLabel::B01,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), SweepError> {
        self.omega1_s.validate()?;
        self.tauc_s.validate()?;
        if !self.omega_se.is_finite() || self.omega_se <= 0.0 {
            return Err(SweepError::InvalidGrid(format!(
                "omega_se must be positive, got {}",
                self.omega_se
            )));
        }
        if !self.j_hz.is_finite() || self.j_hz < 0.0 {
            return Err(SweepError::InvalidGrid(format!(
                "j_hz must be >= 0, got {}",
                self.j_hz
            )));
        }
        Ok(())
    }
}

/// Diagnostics attached to a record; empty in normal operation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RecordFlags {
    /// Worst eigenvalue seen along the trajectory, when it dipped below the
    /// positivity tolerance.
    pub positivity_min_eig: Option<f64>,
}

impl std::fmt::Display for RecordFlags {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(eig) = self.positivity_min_eig {
            write!(f, "positivity_min_eig={eig:e}")?;
        }
        Ok(())
    }
}

/// One grid point's results.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub omega1_s: f64,
    pub tauc_s: f64,
    pub fidelity: f64,
    pub purity: f64,
    pub efficiency: f64,
    pub mode: Mode,
    pub j_hz: f64,
    pub flags: RecordFlags,
    /// Wall-clock seconds spent on this point; diagnostic only, not emitted.
    pub wall_time_s: f64,
}

/// Compile `seq` against `p`, apply the composed map to the uniform input,
/// and compute all three metrics against the `target` reference state.
///
/// The state is also stepped segment by segment so positivity can be
/// monitored along the whole trajectory; a dip below the tolerance is
/// recorded in the flags rather than treated as fatal.
pub fn run_point(
    p: &PhysicalParams,
    seq: &PulseSequence,
    mode: Mode,
    target: BasisLabel,
) -> Result<SweepRecord, SweepError> {
    if p.omega_se <= 0.0 {
        return Err(SweepError::InvalidGrid(
            "run_point requires omega_se > 0 to report scaled coordinates".to_string(),
        ));
    }
    let started = Instant::now();
    let segments = compile_sequence(p, seq, mode)?;

    let mut map = Superoperator::identity(4);
    let mut rho = crate::grover::uniform_state();
    let mut worst_eig = f64::INFINITY;
    for segment in &segments {
        let propagator = segment.propagator()?;
        map = &propagator * &map;
        let out = propagator
            .apply_matrix(rho.matrix())
            .map_err(EngineError::from)?;
        rho = DensityMatrix::new(out)?;
        worst_eig = worst_eig.min(rho.min_eigenvalue());
    }

    let fid = fidelity(&target_state(target), &rho)?;
    let pur = purity(&rho);
    let eff = efficiency(&map, 2)?;
    MetricsRecord::validated(fid, pur, eff)?;

    let flags = RecordFlags {
        positivity_min_eig: (worst_eig < -POSITIVITY_TOL).then_some(worst_eig),
    };
    Ok(SweepRecord {
        omega1_s: p.omega1_scaled(),
        tauc_s: p.tau_c_scaled(),
        fidelity: fid,
        purity: pur,
        efficiency: eff,
        mode,
        j_hz: p.j_coupling,
        flags,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Run every grid point, fanning out over `workers` threads when `workers > 1`.
/// Records are returned in row-major order (τc⁽ˢ⁾ outer, ω₁⁽ˢ⁾ inner)
/// regardless of execution order; a failing point aborts the sweep with its
/// coordinates attached.
pub fn run_sweep(
    grid: &SweepGrid,
    seq: &PulseSequence,
    workers: usize,
) -> Result<Vec<SweepRecord>, SweepError> {
    grid.validate()?;
    let omega1_points = grid.omega1_s.points();
    let mut coords = Vec::with_capacity(grid.tauc_s.count * grid.omega1_s.count);
    for tauc_s in grid.tauc_s.points() {
        for &omega1_s in &omega1_points {
            coords.push((omega1_s, tauc_s));
        }
    }

    let compute = |&(omega1_s, tauc_s): &(f64, f64)| -> Result<SweepRecord, SweepError> {
        let point = |err: SweepError| SweepError::Point {
            omega1_s,
            tauc_s,
            source: Box::new(err),
        };
        let p = PhysicalParams::from_scaled(omega1_s, tauc_s, grid.omega_se, grid.j_hz)
            .map_err(|e| point(e.into()))?;
        run_point(&p, seq, grid.mode, grid.target).map_err(point)
    };

    if workers <= 1 {
        coords.iter().map(compute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| SweepError::ThreadPool(e.to_string()))?;
        pool.install(|| coords.par_iter().map(compute).collect())
    }
}

/// Split a row-major record list into fixed-τc⁽ˢ⁾ rows.
pub fn rows_by_tauc(records: &[SweepRecord], omega1_count: usize) -> Vec<&[SweepRecord]> {
    records.chunks(omega1_count).collect()
}

/// Result of the per-row argmax search.
#[derive(Debug, Clone, Copy)]
pub struct OptimumReport {
    pub tauc_s: f64,
    pub omega1_s_opt: f64,
    pub fidelity: f64,
    pub index: usize,
    /// Whether the maximum sits strictly inside the row rather than on an
    /// edge (an edge maximum means the true optimum may lie off-grid).
    pub interior: bool,
}

/// Argmax of fidelity over one fixed-τc⁽ˢ⁾ row; ties break toward smaller
/// ω₁⁽ˢ⁾ (less drive power).
pub fn find_optimum(row: &[SweepRecord]) -> Result<OptimumReport, SweepError> {
    if row.len() < 3 {
        return Err(SweepError::RowTooShort(row.len()));
    }
    if !row.windows(2).all(|w| w[0].omega1_s < w[1].omega1_s) {
        return Err(SweepError::UnsortedRow);
    }
    let mut best = 0usize;
    for (i, record) in row.iter().enumerate().skip(1) {
        if record.fidelity > row[best].fidelity {
            best = i;
        }
    }
    Ok(OptimumReport {
        tauc_s: row[0].tauc_s,
        omega1_s_opt: row[best].omega1_s,
        fidelity: row[best].fidelity,
        index: best,
        interior: best != 0 && best != row.len() - 1,
    })
}

/// CSV column order is part of the output contract.
pub const CSV_HEADER: &str = "omega1_s,tauc_s,fidelity,purity,efficiency,mode,j_hz,flags";

/// Write records as CSV. Numbers carry 17 significant digits so parsing the
/// file recovers the exact doubles.
pub fn emit_csv<W: Write + ?Sized>(records: &[SweepRecord], out: &mut W) -> Result<(), SweepError> {
    if records.is_empty() {
        return Err(SweepError::EmptyRecords);
    }
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{}",
            r.omega1_s, r.tauc_s, r.fidelity, r.purity, r.efficiency, r.mode, r.j_hz, r.flags
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonRecord {
    omega1_s: f64,
    tauc_s: f64,
    fidelity: f64,
    purity: f64,
    efficiency: f64,
    mode: String,
    j_hz: f64,
    flags: String,
}

impl From<&SweepRecord> for JsonRecord {
    fn from(r: &SweepRecord) -> Self {
        Self {
            omega1_s: r.omega1_s,
            tauc_s: r.tauc_s,
            fidelity: r.fidelity,
            purity: r.purity,
            efficiency: r.efficiency,
            mode: r.mode.to_string(),
            j_hz: r.j_hz,
            flags: r.flags.to_string(),
        }
    }
}

/// Provenance header for JSON output: grid, sequence identity (name plus the
/// SHA-256 of its printed text, which regenerates the run), tool version.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub mode: String,
    pub target: String,
    pub j_hz: f64,
    pub omega_se: f64,
    pub omega1_s: LogRange,
    pub tauc_s: LogRange,
    pub spacing: String,
    pub sequence_name: String,
    pub sequence_sha256: String,
}

impl RunMetadata {
    pub fn new(grid: &SweepGrid, seq: &PulseSequence) -> Self {
        Self {
            tool: "frqme".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            mode: grid.mode.to_string(),
            target: grid.target.to_string(),
            j_hz: grid.j_hz,
            omega_se: grid.omega_se,
            omega1_s: grid.omega1_s,
            tauc_s: grid.tauc_s,
            spacing: "log10".to_string(),
            sequence_name: seq.name().to_string(),
            sequence_sha256: sequence_sha256(seq),
        }
    }
}

/// SHA-256 (hex) of the printed sequence text.
pub fn sequence_sha256(seq: &PulseSequence) -> String {
    let digest = Sha256::digest(seqdsl::print(seq).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn emit_json<W: Write + ?Sized>(
    records: &[SweepRecord],
    metadata: &RunMetadata,
    out: &mut W,
) -> Result<(), SweepError> {
    if records.is_empty() {
        return Err(SweepError::EmptyRecords);
    }
    #[derive(Serialize)]
    struct Document<'a> {
        metadata: &'a RunMetadata,
        records: Vec<JsonRecord>,
    }
    let doc = Document {
        metadata,
        records: records.iter().map(JsonRecord::from).collect(),
    };
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    writeln!(out)?;
    Ok(())
}

/// One point of the closed-form reference curves.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnalyticRecord {
    pub omega1_tauc: f64,
    pub fidelity: f64,
    pub purity: f64,
}

/// Evaluate the analytic fidelity/purity curves on a linear grid of
/// x = ω₁τc.
pub fn analytic_curve(
    x_min: f64,
    x_max: f64,
    count: usize,
) -> Result<Vec<AnalyticRecord>, SweepError> {
    if !x_min.is_finite() || x_min < 0.0 {
        return Err(SweepError::InvalidGrid(format!(
            "x_min must be >= 0, got {x_min}"
        )));
    }
    if count < 1 {
        return Err(SweepError::InvalidGrid("count must be >= 1".to_string()));
    }
    if count > 1 && (!x_max.is_finite() || x_max <= x_min) {
        return Err(SweepError::InvalidGrid(format!(
            "x_max must exceed x_min, got {x_max}"
        )));
    }
    let step = if count == 1 {
        0.0
    } else {
        (x_max - x_min) / (count - 1) as f64
    };
    Ok((0..count)
        .map(|k| {
            let x = x_min + step * k as f64;
            AnalyticRecord {
                omega1_tauc: x,
                fidelity: fidelity_did(x),
                purity: purity_did(x),
            }
        })
        .collect())
}

pub fn emit_analytic_csv<W: Write + ?Sized>(
    records: &[AnalyticRecord],
    out: &mut W,
) -> Result<(), SweepError> {
    if records.is_empty() {
        return Err(SweepError::EmptyRecords);
    }
    writeln!(out, "omega1_tauc,fidelity,purity")?;
    for r in records {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e}",
            r.omega1_tauc, r.fidelity, r.purity
        )?;
    }
    Ok(())
}

pub fn emit_analytic_json<W: Write + ?Sized>(
    records: &[AnalyticRecord],
    out: &mut W,
) -> Result<(), SweepError> {
    if records.is_empty() {
        return Err(SweepError::EmptyRecords);
    }
    #[derive(Serialize)]
    struct Document<'a> {
        records: &'a [AnalyticRecord],
    }
    serde_json::to_writer_pretty(&mut *out, &Document { records })?;
    writeln!(out)?;
    Ok(())
}

pub fn emit_optimum_csv<W: Write + ?Sized>(
    reports: &[OptimumReport],
    out: &mut W,
) -> Result<(), SweepError> {
    if reports.is_empty() {
        return Err(SweepError::EmptyRecords);
    }
    writeln!(out, "tauc_s,omega1_s_opt,fidelity,interior")?;
    for r in reports {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{}",
            r.tauc_s, r.omega1_s_opt, r.fidelity, r.interior
        )?;
    }
    Ok(())
}

pub fn emit_optimum_json<W: Write + ?Sized>(
    reports: &[OptimumReport],
    metadata: &RunMetadata,
    out: &mut W,
) -> Result<(), SweepError> {
    if reports.is_empty() {
        return Err(SweepError::EmptyRecords);
    }
    #[derive(Serialize)]
    struct JsonOptimum {
        tauc_s: f64,
        omega1_s_opt: f64,
        fidelity: f64,
        interior: bool,
    }
    #[derive(Serialize)]
    struct Document<'a> {
        metadata: &'a RunMetadata,
        optima: Vec<JsonOptimum>,
    }
    let doc = Document {
        metadata,
        optima: reports
            .iter()
            .map(|r| JsonOptimum {
                tauc_s: r.tauc_s,
                omega1_s_opt: r.omega1_s_opt,
                fidelity: r.fidelity,
                interior: r.interior,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    writeln!(out)?;
    Ok(())
}
