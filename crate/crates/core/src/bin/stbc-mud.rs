use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stbc_mud::harness::{self, ExportFormat, Progress, RunRecord, SimConfig, Suite, VerifyReport};
use stbc_mud::Error;

#[derive(Parser)]
#[command(
    name = "stbc-mud",
    version,
    about = "Multiuser space-time block code detection simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ExportFormat::Csv,
            Format::Json => ExportFormat::Json,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config thread count
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Symbol error rate versus SNR
    SimulateBer(RunArgs),
    /// Outage CDF of the array-processing effective SNR and its log-log slope
    EstimateOutage(RunArgs),
    /// Run a property suite (or `all`)
    Verify {
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a saved JSON run record
    Export {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Json(_) | Error::Io { .. } | Error::InvalidInput(_) => 2,
        _ => 1,
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn load(args: &RunArgs) -> Result<SimConfig, Error> {
    let mut cfg = SimConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_progress(p: Progress) {
    match p {
        Progress::Point {
            index,
            x,
            errors,
            trials,
        } => {
            eprintln!("point {index}: snr {x} dB, {errors} errors / {trials} symbols")
        }
    }
}

fn print_report(r: &VerifyReport) {
    eprintln!(
        "{} {} ({} samples, {:.2} s)",
        r.suite.name(),
        if r.passed { "PASS" } else { "FAIL" },
        r.samples,
        r.wall_time_s
    );
    for c in &r.checks {
        let rel = if c.at_least { ">=" } else { "<" };
        eprintln!(
            "  [{}] {}: {:e} (need {rel} {:e})",
            if c.passed { "ok" } else { "fail" },
            c.name,
            c.value,
            c.threshold
        );
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::SimulateBer(args) => {
            let cfg = load(&args)?;
            let record = harness::run_ber_with(&cfg, &mut report_progress)?;
            emit(
                &harness::render(&record, args.format.into())?,
                args.out.as_deref(),
            )?;
            Ok(true)
        }
        Command::EstimateOutage(args) => {
            let cfg = load(&args)?;
            let record = harness::run_outage(&cfg)?;
            if let Some(slope) = record.slope {
                eprintln!("outage slope {slope:.4}");
            }
            emit(
                &harness::render(&record, args.format.into())?,
                args.out.as_deref(),
            )?;
            Ok(true)
        }
        Command::Verify {
            suite,
            seed,
            threads,
            format,
            out,
        } => {
            let suites = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![Suite::from_name(&suite)?]
            };
            let mut reports = Vec::new();
            for s in suites {
                let r = harness::run_verify(s, seed, threads)?;
                print_report(&r);
                reports.push(r);
            }
            let passed = reports.iter().all(|r| r.passed);
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&reports)? + "\n",
                Format::Csv => {
                    let mut s = String::from("suite,check,value,threshold,passed\n");
                    for r in &reports {
                        for c in &r.checks {
                            s.push_str(&format!(
                                "{},\"{}\",{},{},{}\n",
                                r.suite.name(),
                                c.name,
                                c.value,
                                c.threshold,
                                c.passed
                            ));
                        }
                    }
                    s
                }
            };
            emit(&text, out.as_deref())?;
            Ok(passed)
        }
        Command::Export { input, format, out } => {
            let record: RunRecord = harness::load_record(&input)?;
            emit(&harness::render(&record, format.into())?, out.as_deref())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
