use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use xcreg_core::experiments::{
    run_imse_study, run_rate_study, run_xd_experiment, summarize_imse, write_imse_table, ExperimentReport,
    ImseStudyConfig, RateStudyConfig, XdExperimentConfig,
};
use xcreg_core::fcurve::io::write_long_csv;
use xcreg_core::pipeline::{
    load_sample, overlap_window, preprocess, read_intervals_csv, run_register, write_artifacts, GroupBy,
    PipelineConfig,
};
use xcreg_core::{generate_contaminated, ErrorCategory, SimConfig, XcrError};

#[derive(Parser)]
#[command(name = "xcreg", version, about = "Cross-component registration of multivariate curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register a long-format CSV and write shift tables, diagnostics and plot data.
    Register(RegisterArgs),
    /// Generate a contaminated sample as long-format CSV.
    Simulate {
        /// TOML simulation config; defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo study and write its JSON report.
    Experiment {
        kind: ExperimentKind,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Smallest interval containing every per-subject interval.
    OverlapWindow {
        /// CSV with `start,end` columns.
        #[arg(long)]
        intervals: PathBuf,
        /// Optional enclosing interval `a,b` that must contain the result.
        #[arg(long, value_parser = parse_pair)]
        enclosing: Option<(f64, f64)>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Imse,
    Rates,
    Xd,
}

#[derive(clap::Args)]
struct RegisterArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the input file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    coarse_step: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Integration window `r1,r2`.
    #[arg(long, value_parser = parse_pair)]
    window: Option<(f64, f64)>,
    #[arg(long)]
    extend_to: Option<f64>,
    /// Keep rows where `column=value`.
    #[arg(long, value_parser = parse_group)]
    group_by: Option<GroupBy>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected 'a,b'")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_group(s: &str) -> Result<GroupBy, String> {
    let (column, value) = s.split_once('=').ok_or("expected 'column=value'")?;
    Ok(GroupBy {
        column: column.trim().to_string(),
        value: value.trim().to_string(),
    })
}

enum Failure {
    Core(XcrError),
    Config { path: PathBuf, message: String },
    Io { path: PathBuf, source: std::io::Error },
}

impl From<XcrError> for Failure {
    fn from(e: XcrError) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => match e.category() {
                ErrorCategory::Parse => 2,
                ErrorCategory::Invariant => 3,
                ErrorCategory::Registration => 4,
            },
            Failure::Config { .. } | Failure::Io { .. } => 2,
        }
    }

    fn report(&self) -> serde_json::Value {
        let (code, message) = match self {
            Failure::Core(e) => (e.code(), e.to_string()),
            Failure::Config { path, message } => ("config", format!("{}: {message}", path.display())),
            Failure::Io { path, source } => ("io", format!("{}: {source}", path.display())),
        };
        json!({ "error": code, "exit": self.exit_code(), "message": message })
    }
}

type Outcome<T> = Result<T, Failure>;

fn io<T>(path: &Path, r: std::io::Result<T>) -> Outcome<T> {
    r.map_err(|source| Failure::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = io(path, fs::read_to_string(path))?;
    toml::from_str(&text).map_err(|e| Failure::Config {
        path: path.to_path_buf(),
        message: e.to_string().replace('\n', " "),
    })
}

fn read_toml_or_default<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Outcome<T> {
    path.map_or_else(|| Ok(T::default()), read_toml)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn warn(code: &str, message: &str) {
    eprintln!("{}", json!({ "warning": code, "message": message }));
}

fn cmd_register(args: RegisterArgs) -> Outcome<()> {
    let mut config: PipelineConfig = read_toml(&args.config)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    if let Some(step) = args.coarse_step {
        config.minimizer.coarse_step = Some(step);
    }
    if let Some(tol) = args.tol {
        config.minimizer.tol = tol;
    }
    if let Some((a, b)) = args.window {
        config.window = [a, b];
    }
    if args.extend_to.is_some() {
        config.extend_to = args.extend_to;
    }
    if args.group_by.is_some() {
        config.group_by = args.group_by;
    }
    let input = match &args.input {
        Some(p) => p.clone(),
        None => resolve(base, &config.input),
    };
    let out_dir = match &args.out {
        Some(p) => p.clone(),
        None => resolve(base, &config.output_dir),
    };

    let file = io(&input, File::open(&input))?;
    let raw = load_sample(BufReader::new(file), &config)?;
    let sample = preprocess(&raw, &config.preprocess, config.extend_to)?;
    let out = run_register(sample, &config)?;
    write_artifacts(&out, &config, &out_dir)?;

    for w in &out.warnings {
        warn(w.code, &w.message);
    }
    let names = out.sample.component_names();
    for (name, th) in names.iter().zip(out.registration.theta_hat()) {
        println!("{name}\t{th:.6}");
    }
    Ok(())
}

fn cmd_simulate(config: Option<&Path>, out: &Path) -> Outcome<()> {
    let cfg: SimConfig = read_toml_or_default(config)?;
    let sample = generate_contaminated(&cfg)?;
    let file = io(out, File::create(out))?;
    write_long_csv(BufWriter::new(file), &sample.observed)?;
    let sidecar = out.with_extension("truth.json");
    let mut f = BufWriter::new(io(&sidecar, File::create(&sidecar))?);
    let body = json!({ "theta": sample.theta, "config": cfg });
    io(&sidecar, writeln!(f, "{}", serde_json::to_string_pretty(&body).expect("plain JSON")))?;
    io(&sidecar, f.flush())?;
    Ok(())
}

fn write_report(report: &ExperimentReport, out: &Path) -> Outcome<()> {
    let mut f = BufWriter::new(io(out, File::create(out))?);
    serde_json::to_writer_pretty(&mut f, report).map_err(XcrError::from)?;
    io(out, writeln!(f))?;
    io(out, f.flush())
}

fn cmd_experiment(kind: ExperimentKind, config: Option<&Path>, out: &Path) -> Outcome<()> {
    let report = match kind {
        ExperimentKind::Imse => {
            let cfg: ImseStudyConfig = read_toml_or_default(config)?;
            let report = run_imse_study(&cfg)?;
            let table = out.with_extension("table.csv");
            let f = io(&table, File::create(&table))?;
            write_imse_table(BufWriter::new(f), &summarize_imse(&report.replications))?;
            report
        }
        ExperimentKind::Rates => run_rate_study(&read_toml_or_default::<RateStudyConfig>(config)?)?,
        ExperimentKind::Xd => run_xd_experiment(&read_toml_or_default::<XdExperimentConfig>(config)?)?,
    };
    write_report(&report, out)?;
    if report.failures() > 0 {
        warn(
            "replication_failures",
            &format!("{} of {} replications failed", report.failures(), report.replications.len()),
        );
    }
    println!("{}", serde_json::to_string(&report.summary).expect("plain JSON"));
    Ok(())
}

fn cmd_overlap(intervals: &Path, enclosing: Option<(f64, f64)>) -> Outcome<()> {
    let f = io(intervals, File::open(intervals))?;
    let list = read_intervals_csv(BufReader::new(f))?;
    let (a, b) = overlap_window(&list, enclosing)?;
    println!("{a},{b}");
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("XCREG_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // Fails only if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match cli.command {
        Command::Register(args) => cmd_register(args),
        Command::Simulate { config, out } => cmd_simulate(config.as_deref(), &out),
        Command::Experiment { kind, config, out } => cmd_experiment(kind, config.as_deref(), &out),
        Command::OverlapWindow { intervals, enclosing } => cmd_overlap(&intervals, enclosing),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.report());
            ExitCode::from(f.exit_code())
        }
    }
}
