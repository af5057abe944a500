use clap::{Args, Parser, Subcommand};
use spectral_transport_cli::config::{emit_defaults, Violation};
use spectral_transport_cli::report::write_samples;
use spectral_transport_cli::runner::run_experiment_with;
use spectral_transport_cli::{
    emit_report, exit, parse_config, ConfigError, ExperimentConfig, ExperimentKind, Format,
    OUT_DIR_ENV,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Numerical checks of transport-map Hessian spectra.
///
/// Exit status: 0 all checks pass, 1 a check failed, 2 config error,
/// 3 runtime error.
#[derive(Parser)]
#[command(name = "spectral-transport", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Metric, invariance, geodesic and Lipschitz checks on random SPD pairs.
    GeometrySelftest(RunArgs),
    /// Variance of the log-eigenvalues of the transport Hessian.
    Variance(RunArgs),
    /// Poincaré ratios of the test-function bank.
    Poincare(RunArgs),
    /// Γ₂ identities and inequalities on smooth triples.
    Gamma2Check(RunArgs),
    /// Entropic transport on a 2D grid against closed-form maps.
    Sinkhorn2d(RunArgs),
    /// Exponential concentration and its calibration sweep.
    Concentration(RunArgs),
    /// Runs the kind named in the config file.
    Run(RunArgs),
    /// Prints the default config for a kind.
    EmitDefaults {
        kind: ExperimentKind,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Report path; `-` for stdout. Defaults to the config's path, then to
    /// `<kind>.<format>` in the output directory, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Also write raw log-eigenvalue samples to this CSV.
    #[arg(long)]
    dump_samples: Option<PathBuf>,
    /// Default output directory for relative and implicit paths.
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
}

fn config_failure(e: &ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit::CONFIG_ERROR as u8)
}

fn load(kind: Option<ExperimentKind>, args: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(p) => parse_config(p)?,
        None => match kind {
            Some(k) => ExperimentConfig::for_kind(k),
            None => {
                return Err(ConfigError::Invalid(vec![Violation::new(
                    "kind",
                    "run needs --config",
                )]))
            }
        },
    };
    match (kind, cfg.kind) {
        (Some(k), Some(c)) if k != c => {
            return Err(ConfigError::Invalid(vec![Violation::new(
                "kind",
                format!("config is for {}, not {}", c.name(), k.name()),
            )]))
        }
        (Some(k), _) => cfg.kind = Some(k),
        _ => {}
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.samples {
        cfg.samples = n;
    }
    let v = cfg.validate();
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(v))
    }
}

fn resolve(dir: Option<&Path>, p: &Path) -> PathBuf {
    match dir {
        Some(d) if p.is_relative() && p != Path::new("-") => d.join(p),
        _ => p.to_path_buf(),
    }
}

fn run(kind: Option<ExperimentKind>, args: RunArgs) -> ExitCode {
    let cfg = match load(kind, &args) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    let kind = cfg.kind.expect("validated");
    let format = args.format.unwrap_or(cfg.output.format);
    let dir = args.out_dir.as_deref();
    let report_path = match (&args.out, &cfg.output.report) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(p)) => Some(resolve(dir, p)),
        (None, None) => dir.map(|d| d.join(format!("{}.{}", kind.name(), format.extension()))),
    };
    // Output locations from flags stay out of the config echo, so the report
    // does not depend on where it is written.
    let samples_path = args
        .dump_samples
        .clone()
        .or_else(|| cfg.output.samples.as_deref().map(|p| resolve(dir, p)));
    let out = run_experiment_with(&cfg, samples_path.is_some());
    if let Some(p) = &samples_path {
        if let Err(e) = write_samples(&out.samples, p) {
            eprintln!("error: {e}");
            return ExitCode::from(exit::RUNTIME_ERROR as u8);
        }
    }
    if let Err(e) = emit_report(&out.report, format, report_path.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(exit::RUNTIME_ERROR as u8);
    }
    let s = &out.report.summary;
    eprintln!(
        "{}: {} checks, {} passed, {} failed",
        kind.name(),
        s.checks,
        s.passed,
        s.failed
    );
    for c in out.report.checks.iter().filter(|c| !c.pass).take(20) {
        eprintln!(
            "  FAIL {} = {} (tolerance {})",
            c.check, c.value, c.tolerance
        );
    }
    if out.report.all_pass() {
        ExitCode::from(exit::PASS as u8)
    } else {
        ExitCode::from(exit::CHECK_FAILED as u8)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::GeometrySelftest(a) => run(Some(ExperimentKind::GeometrySelftest), a),
        Command::Variance(a) => run(Some(ExperimentKind::Variance), a),
        Command::Poincare(a) => run(Some(ExperimentKind::Poincare), a),
        Command::Gamma2Check(a) => run(Some(ExperimentKind::Gamma2Check), a),
        Command::Sinkhorn2d(a) => run(Some(ExperimentKind::Sinkhorn2d), a),
        Command::Concentration(a) => run(Some(ExperimentKind::Concentration), a),
        Command::Run(a) => run(None, a),
        Command::EmitDefaults { kind, out } => {
            let text = emit_defaults(kind) + "\n";
            match out {
                Some(p) => match std::fs::write(&p, text) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => {
                        eprintln!("error: cannot write {}: {e}", p.display());
                        ExitCode::from(exit::RUNTIME_ERROR as u8)
                    }
                },
                None => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
            }
        }
    }
}
