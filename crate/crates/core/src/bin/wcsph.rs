use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use wcsph::harness::config::{CaseConfig, PolicyKind};
use wcsph::harness::driver::{run_simulation, RunError};
use wcsph::harness::report::read_reports_csv;
use wcsph::harness::{gpips_plot, runtime_plot, RunReport};
use wcsph::real::Precision;

#[derive(Parser)]
#[command(name = "wcsph", version, about = "Weakly-compressible SPH dam-break benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in case (dambreak2d, dambreak3d-obstacle, hydrostatic) or a case file.
    Run(RunArgs),
    /// Plot runtime and GPIPS from one or more report.csv files.
    Aggregate {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Text,
}

#[derive(Parser)]
struct RunArgs {
    /// Case name or path to a `key = value` case file.
    case: String,
    #[arg(long, value_parser = parse_policy)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = parse_precision)]
    precision: Option<Precision>,
    #[arg(long)]
    dp: Option<f64>,
    #[arg(long)]
    end_time: Option<f64>,
    #[arg(long)]
    sort_every: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of evenly spaced snapshots up to the end time.
    #[arg(long)]
    snapshots: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    report: ReportFormat,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse()
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    s.parse()
}

fn configure(args: &RunArgs) -> Result<CaseConfig, String> {
    let mut cfg = CaseConfig::resolve(&args.case).map_err(|e| e.to_string())?;
    if let Some(p) = args.policy {
        cfg.policy = p;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(p) = args.precision {
        cfg.precision = p;
    }
    if let Some(dp) = args.dp {
        cfg.dp = dp;
    }
    if let Some(t) = args.end_time {
        cfg.end_time = t;
    }
    if let Some(s) = args.sort_every {
        cfg.sort_every = s;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(m) = args.snapshots {
        cfg.snapshots = m;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn print_report(report: &RunReport, format: ReportFormat) {
    match format {
        ReportFormat::Text => print!("{}", report.to_text()),
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            if wcsph::harness::report::write_reports_csv(&mut buf, std::slice::from_ref(report)).is_ok() {
                print!("{}", String::from_utf8_lossy(&buf));
            }
        }
    }
}

fn run(args: RunArgs) -> Result<(), String> {
    let cfg = configure(&args)?;
    match run_simulation(&cfg) {
        Ok(outcome) => {
            print_report(&outcome.report, args.report);
            Ok(())
        }
        Err(RunError::Aborted { source, report }) => {
            print_report(&report, args.report);
            Err(format!("simulation aborted: {source}"))
        }
        Err(e) => Err(e.to_string()),
    }
}

fn aggregate(paths: &[PathBuf], out: &PathBuf) -> Result<(), String> {
    let mut reports = Vec::new();
    for path in paths {
        let file = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
        reports.extend(read_reports_csv(file).map_err(|e| format!("{}: {e}", path.display()))?);
    }
    std::fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    for (name, svg) in [("runtime.svg", runtime_plot(&reports)), ("gpips.svg", gpips_plot(&reports))] {
        let path = out.join(name);
        std::fs::write(&path, svg).map_err(|e| format!("{}: {e}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Aggregate { reports, out } => aggregate(&reports, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
