//! `zeno`: jump probabilities and decay rates of repeatedly measured
//! quantum systems. Natural units throughout (ℏ = 1): energies and rates
//! are angular frequencies.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use zeno_cli::emit::{emit_csv, emit_verify, format_float};
use zeno_cli::runner::{
    builtin_verification_set, run_scenario, run_verification, to_composite, RunReport,
};
use zeno_cli::scenario::{parse_scenario, OutputKind, Scenario};
use zeno_core::error::{Result, ZenoError};
use zeno_core::jump::QuadSpec;

#[derive(Parser)]
#[command(
    name = "zeno",
    about = "Jump probabilities and decay rates of repeatedly measured quantum systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, default_value = "zeno-out")]
    out: PathBuf,
    /// Time-quadrature panel count per cycle.
    #[arg(long, default_value_t = zeno_core::jump::DEFAULT_PANELS)]
    grid: usize,
    /// Reject unknown scenario keys.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: jump components, rates, survival, profile.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Sweep the measurement duration and classify Zeno/anti-Zeno regimes.
    Sweep {
        scenario: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Emit the measurement-induced broadening profile P(ω) only.
    Profile {
        scenario: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Check the jump formula against exact propagation of composite
    /// scenarios (built-in set, or every .json under --scenarios).
    Verify {
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { scenario, opts } => {
            let sc = load(&scenario, opts.strict)?;
            let quad = QuadSpec::with_panels(opts.grid);
            let report = run_scenario(&sc, &quad)?;
            let files = emit_csv(&report, &sc.outputs, &opts.out)?;
            print_summary(&report, &files);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { scenario, opts } => {
            let sc = load(&scenario, opts.strict)?;
            if sc.sweep.is_none() {
                return Err(ZenoError::Validation(
                    "the sweep subcommand needs a `sweep` section in the scenario".into(),
                ));
            }
            let quad = QuadSpec::with_panels(opts.grid);
            let report = run_scenario(&sc, &quad)?;
            let files = emit_csv(&report, &[OutputKind::Rates], &opts.out)?;
            print_summary(&report, &files);
            Ok(ExitCode::SUCCESS)
        }
        Command::Profile { scenario, opts } => {
            let sc = load(&scenario, opts.strict)?;
            if sc.spectrum.is_none() {
                return Err(ZenoError::Validation(
                    "the profile subcommand needs a `spectrum` section in the scenario".into(),
                ));
            }
            let quad = QuadSpec::with_panels(opts.grid);
            let report = run_scenario(&sc, &quad)?;
            let files = emit_csv(&report, &[OutputKind::Profile], &opts.out)?;
            print_summary(&report, &files);
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { scenarios, opts } => {
            let quad = QuadSpec::with_panels(opts.grid);
            let set = match scenarios {
                None => builtin_verification_set()?,
                Some(dir) => load_verification_dir(&dir, opts.strict)?,
            };
            let entries = run_verification(set, &quad);
            let path = emit_verify(&entries, &opts.out)?;
            let mut all_pass = true;
            for e in &entries {
                match (e.exponent, &e.error) {
                    (Some(p), _) => println!(
                        "{}: exponent {:.3} ({})",
                        e.scenario,
                        p,
                        if e.pass { "pass" } else { "FAIL" }
                    ),
                    (None, Some(err)) => println!("{}: error: {err}", e.scenario),
                    (None, None) => println!("{}: no result", e.scenario),
                }
                all_pass &= e.pass;
            }
            println!("report: {}", path.display());
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn load(path: &Path, strict: bool) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ZenoError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    parse_scenario(&text, &name, strict).map_err(|e| annotate(e, &path.display().to_string()))
}

fn annotate(e: ZenoError, path: &str) -> ZenoError {
    match e {
        ZenoError::Parse(m) => ZenoError::Parse(format!("{path}: {m}")),
        ZenoError::Validation(m) => ZenoError::Validation(format!("{path}: {m}")),
        ZenoError::Config(m) => ZenoError::Config(format!("{path}: {m}")),
        other => other,
    }
}

fn load_verification_dir(
    dir: &Path,
    strict: bool,
) -> Result<
    Vec<(
        String,
        zeno_core::oracle::CompositeScenario,
        zeno_core::system::StateLabel,
        usize,
    )>,
> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(ZenoError::Validation(format!(
            "no .json scenarios under {}",
            dir.display()
        )));
    }
    let mut out = Vec::new();
    for path in paths {
        let sc = load(&path, strict)?;
        let composite = to_composite(&sc).map_err(|e| annotate(e, &path.display().to_string()))?;
        out.push((sc.name.clone(), composite, sc.initial, sc.final_level));
    }
    Ok(out)
}

fn print_summary(report: &RunReport, files: &[PathBuf]) {
    println!("scenario: {}", report.scenario);
    if let Some(scale) = &report.unit_scale {
        println!("unit scale (informational): {scale}");
    }
    println!("rate: {}", format_float(report.rate));
    if let Some(gr) = report.rate_golden_rule {
        println!("golden-rule rate: {}", format_float(gr));
    }
    if let Some(last) = report.survival.last() {
        println!(
            "survival after {} cycles: {}",
            last.n,
            format_float(last.survival_exp)
        );
    }
    for line in &report.log {
        println!("note: {line}");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
}
