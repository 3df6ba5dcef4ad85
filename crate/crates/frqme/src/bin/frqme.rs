use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use frqme::config::parse_config;
use frqme::engine::Mode;
use frqme::model::{BasisLabel, PhysicalParams};
use frqme::seqdsl::{self, PulseSequence};
use frqme::sweep::{
    analytic_curve, emit_analytic_csv, emit_analytic_json, emit_csv, emit_json, emit_optimum_csv,
    emit_optimum_json, find_optimum, rows_by_tauc, run_point, run_sweep, LogRange, RunMetadata,
    SweepGrid,
};

#[derive(Parser)]
#[command(
    name = "frqme",
    version,
    about = "Two-qubit open-system sign-flip simulator: pulse programs, dissipation sweeps, optimum-drive search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single (omega1_s, tauc_s) point and emit its record.
    Point(PointArgs),
    /// Sweep the full (omega1_s, tauc_s) grid.
    Sweep(CommonArgs),
    /// Sweep, then report the per-row fidelity argmax over omega1_s.
    Optimum(CommonArgs),
    /// Emit the closed-form drive-only fidelity/purity curves over x = omega1*tau_c.
    Analytic(AnalyticArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// unitary | did-only | relax-only | both.
    #[arg(long)]
    mode: Option<String>,
    /// Grid spec W1MIN:W1MAX:W1N,TCMIN:TCMAX:TCN (log-spaced).
    #[arg(long)]
    grid: Option<String>,
    /// Pulse-program file overriding the built-in sign-flip sequence.
    #[arg(long)]
    sequence: Option<PathBuf>,
    /// Sign-flip target and fidelity reference: 00 | 01 | 10 | 11.
    #[arg(long)]
    target: Option<String>,
    /// Scalar spin-spin coupling in Hz.
    #[arg(long)]
    j_hz: Option<f64>,
    /// System-environment coupling strength in rad/s.
    #[arg(long)]
    omega_se: Option<f64>,
    /// csv | json.
    #[arg(long)]
    format: Option<String>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to $FRQME_WORKERS or 1.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dimensionless drive amplitude omega1/omega_se.
    #[arg(long)]
    omega1_s: f64,
    /// Dimensionless kernel time omega_se*tau_c.
    #[arg(long)]
    tauc_s: f64,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, default_value_t = 0.0)]
    x_min: f64,
    #[arg(long, default_value_t = 1.0)]
    x_max: f64,
    #[arg(long, default_value_t = 201)]
    count: usize,
    /// csv | json.
    #[arg(long)]
    format: Option<String>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Csv,
    Json,
}

struct Resolved {
    grid: SweepGrid,
    sequence: PulseSequence,
    format: OutputFormat,
    out: Option<PathBuf>,
    workers: usize,
}

fn main() -> Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::Point(args) => run_point_command(args),
        Command::Sweep(args) => run_sweep_command(args),
        Command::Optimum(args) => run_optimum_command(args),
        Command::Analytic(args) => run_analytic_command(args),
    }
}

fn run_point_command(args: PointArgs) -> Result<()> {
    let resolved = resolve(&args.common)?;
    let params = PhysicalParams::from_scaled(
        args.omega1_s,
        args.tauc_s,
        resolved.grid.omega_se,
        resolved.grid.j_hz,
    )?;
    let record = run_point(
        &params,
        &resolved.sequence,
        resolved.grid.mode,
        resolved.grid.target,
    )?;
    log::info!("point finished in {:.3e} s", record.wall_time_s);
    let records = [record];
    write_output(&resolved.out, |out| match resolved.format {
        OutputFormat::Csv => emit_csv(&records, out),
        OutputFormat::Json => {
            let meta = point_metadata(&resolved, args.omega1_s, args.tauc_s);
            emit_json(&records, &meta, out)
        }
    })
}

fn run_sweep_command(args: CommonArgs) -> Result<()> {
    let resolved = resolve(&args)?;
    let records = run_sweep(&resolved.grid, &resolved.sequence, resolved.workers)?;
    write_output(&resolved.out, |out| match resolved.format {
        OutputFormat::Csv => emit_csv(&records, out),
        OutputFormat::Json => emit_json(
            &records,
            &RunMetadata::new(&resolved.grid, &resolved.sequence),
            out,
        ),
    })
}

fn run_optimum_command(args: CommonArgs) -> Result<()> {
    let resolved = resolve(&args)?;
    let records = run_sweep(&resolved.grid, &resolved.sequence, resolved.workers)?;
    let reports = rows_by_tauc(&records, resolved.grid.omega1_s.count)
        .into_iter()
        .map(find_optimum)
        .collect::<Result<Vec<_>, _>>()?;
    write_output(&resolved.out, |out| match resolved.format {
        OutputFormat::Csv => emit_optimum_csv(&reports, out),
        OutputFormat::Json => emit_optimum_json(
            &reports,
            &RunMetadata::new(&resolved.grid, &resolved.sequence),
            out,
        ),
    })
}

fn run_analytic_command(args: AnalyticArgs) -> Result<()> {
    let records = analytic_curve(args.x_min, args.x_max, args.count)?;
    let format = parse_format(args.format.as_deref().unwrap_or("csv"))?;
    write_output(&args.out, |out| match format {
        OutputFormat::Csv => emit_analytic_csv(&records, out),
        OutputFormat::Json => emit_analytic_json(&records, out),
    })
}

/// Merge defaults, config file, and flags (flags win) into a run setup.
fn resolve(common: &CommonArgs) -> Result<Resolved> {
    let config: BTreeMap<String, String> = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            parse_config(&text)?
        }
        None => BTreeMap::new(),
    };

    let mut grid = SweepGrid::default();
    apply_config_grid(&mut grid, &config)?;

    if let Some(spec) = &common.grid {
        let (omega1, tauc) = spec.split_once(',').with_context(|| {
            format!("grid spec {spec:?} must be W1MIN:W1MAX:W1N,TCMIN:TCMAX:TCN")
        })?;
        grid.omega1_s = LogRange::parse(omega1)?;
        grid.tauc_s = LogRange::parse(tauc)?;
    }
    if let Some(mode) = &common.mode {
        grid.mode = mode.parse::<Mode>()?;
    }
    if let Some(target) = &common.target {
        grid.target = target.parse::<BasisLabel>()?;
    }
    if let Some(j_hz) = common.j_hz {
        grid.j_hz = j_hz;
    }
    if let Some(omega_se) = common.omega_se {
        grid.omega_se = omega_se;
    }
    grid.validate()?;

    let sequence_path = common
        .sequence
        .clone()
        .or_else(|| config.get("sequence").map(PathBuf::from));
    let sequence = match sequence_path {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading sequence {}", path.display()))?;
            seqdsl::parse(&text).with_context(|| format!("parsing sequence {}", path.display()))?
        }
        None => seqdsl::oracle_sequence(grid.target),
    };

    let format_name = common
        .format
        .clone()
        .or_else(|| config.get("format").cloned())
        .unwrap_or_else(|| "csv".to_string());
    let format = parse_format(&format_name)?;

    let out = common
        .out
        .clone()
        .or_else(|| config.get("out").map(PathBuf::from));

    let workers = match common.workers {
        Some(n) => n,
        None => match config.get("workers") {
            Some(v) => v
                .parse::<usize>()
                .with_context(|| format!("config key workers: bad value {v:?}"))?,
            None => default_workers(),
        },
    };
    if workers == 0 {
        bail!("workers must be at least 1");
    }

    Ok(Resolved {
        grid,
        sequence,
        format,
        out,
        workers,
    })
}

fn apply_config_grid(grid: &mut SweepGrid, config: &BTreeMap<String, String>) -> Result<()> {
    fn set_f64(slot: &mut f64, config: &BTreeMap<String, String>, key: &str) -> Result<()> {
        if let Some(v) = config.get(key) {
            *slot = v
                .parse()
                .with_context(|| format!("config key {key}: bad value {v:?}"))?;
        }
        Ok(())
    }
    fn set_usize(slot: &mut usize, config: &BTreeMap<String, String>, key: &str) -> Result<()> {
        if let Some(v) = config.get(key) {
            *slot = v
                .parse()
                .with_context(|| format!("config key {key}: bad value {v:?}"))?;
        }
        Ok(())
    }
    set_f64(&mut grid.omega1_s.min, config, "omega1_s_min")?;
    set_f64(&mut grid.omega1_s.max, config, "omega1_s_max")?;
    set_usize(&mut grid.omega1_s.count, config, "omega1_s_count")?;
    set_f64(&mut grid.tauc_s.min, config, "tauc_s_min")?;
    set_f64(&mut grid.tauc_s.max, config, "tauc_s_max")?;
    set_usize(&mut grid.tauc_s.count, config, "tauc_s_count")?;
    set_f64(&mut grid.j_hz, config, "j_hz")?;
    set_f64(&mut grid.omega_se, config, "omega_se")?;
    if let Some(mode) = config.get("mode") {
        grid.mode = mode.parse::<Mode>()?;
    }
    if let Some(target) = config.get("target") {
        grid.target = target.parse::<BasisLabel>()?;
    }
    Ok(())
}

fn parse_format(name: &str) -> Result<OutputFormat> {
    match name {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => bail!("unknown format {other:?} (expected csv or json)"),
    }
}

fn default_workers() -> usize {
    match std::env::var("FRQME_WORKERS") {
        Ok(value) => match value.parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => {
                log::warn!("ignoring invalid FRQME_WORKERS value {value:?}");
                1
            }
        },
        Err(_) => 1,
    }
}

fn point_metadata(resolved: &Resolved, omega1_s: f64, tauc_s: f64) -> RunMetadata {
    let grid = SweepGrid {
        omega1_s: LogRange {
            min: omega1_s,
            max: omega1_s,
            count: 1,
        },
        tauc_s: LogRange {
            min: tauc_s,
            max: tauc_s,
            count: 1,
        },
        ..resolved.grid.clone()
    };
    RunMetadata::new(&grid, &resolved.sequence)
}

fn write_output<F>(out: &Option<PathBuf>, emit: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<(), frqme::sweep::SweepError>,
{
    match out {
        Some(path) => {
            let mut file =
                fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            emit(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match emit(&mut lock) {
                Ok(()) => match lock.flush() {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                    Err(e) => return Err(e.into()),
                },
                Err(e) if e.is_broken_pipe() => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(())
}
