use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use capacitary::cli::{self, Auto, Format, ModelSpec, PSpec, RunConfig, ScenarioName, ScenarioReport};

#[derive(Parser)]
#[command(name = "capacitary", version, about = "Radial p-capacitary potentials and their monotone quantities")]
struct Args {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; CSV output also writes a .json sidecar. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Gradient tolerance of the energy minimizer.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Model when no config is given: flat, cone:A, power_warp:ALPHA, positive_cap:K.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Exponent p in (1, 2), or "auto".
    #[arg(long, global = true)]
    p: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the potential and cross-check it against energy minimization.
    Solve,
    /// Monotone quantities F, G and their derivatives along the level sets.
    Monotone,
    /// Walk the rigidity chain and name the failing hypothesis.
    Contradict,
    /// Curvature, Gauss-Bonnet, Hölder and divergence identities.
    Check,
    /// Willmore deficit of small geodesic spheres at the pole.
    Willmore,
    /// Contradiction scenario over the whole model library.
    Report {
        /// Run the models on separate threads.
        #[arg(long)]
        parallel: bool,
    },
}

fn parse_model(text: &str) -> Result<ModelSpec> {
    let (kind, param) = match text.split_once(':') {
        Some((k, v)) => (k, Some(v.parse::<f64>().with_context(|| format!("bad model parameter in {text:?}"))?)),
        None => (text, None),
    };
    let need = |name: &str| param.with_context(|| format!("model {kind} needs a parameter: {kind}:{name}"));
    Ok(match kind {
        "flat" => ModelSpec::Flat,
        "cone" => ModelSpec::Cone { a: need("A")?, r_min: None },
        "power_warp" => ModelSpec::PowerWarp { alpha: need("ALPHA")? },
        "positive_cap" => ModelSpec::PositiveCap { k: need("K")? },
        other => bail!("unknown model kind {other:?}"),
    })
}

fn parse_p(text: &str) -> Result<PSpec> {
    if text == "auto" {
        Ok(PSpec::Auto(Auto::Auto))
    } else {
        Ok(PSpec::Value(text.parse().with_context(|| format!("bad exponent {text:?}"))?))
    }
}

fn base_config(args: &Args, scenario: ScenarioName) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cli::parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => RunConfig::new(ModelSpec::Flat, PSpec::Value(1.5), scenario),
    };
    config.scenario = scenario;
    if let Some(m) = &args.model {
        config.model = parse_model(m)?;
    }
    if let Some(p) = &args.p {
        config.p = parse_p(p)?;
    }
    if let Some(n) = args.grid_n {
        config.grid = n;
    }
    if let Some(tol) = args.tol {
        config.tolerances.variational = tol;
    }
    if let Some(f) = args.format {
        config.format = f;
    }
    if let Some(out) = &args.out {
        config.output = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn print_verdicts(report: &ScenarioReport) {
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "{}", report.summary);
    for (key, v) in &report.verdicts {
        let _ = writeln!(err, "  {key:<28} {:<14} {}", v.status.to_string(), v.reason);
    }
    if let Some(h) = &report.failed_hypothesis {
        let _ = writeln!(err, "  failed hypothesis: {h}");
    }
}

fn single(args: &Args, scenario: ScenarioName) -> Result<()> {
    let config = base_config(args, scenario)?;
    let report = cli::run(&config)?;
    print_verdicts(&report);
    match &config.output {
        Some(path) => {
            for written in cli::emit(&report, config.format, path)? {
                eprintln!("wrote {}", written.display());
            }
        }
        None => {
            let text = match config.format {
                Format::Csv => cli::render_csv(&report)?,
                Format::Json => cli::render_json(&report)?,
            };
            io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn library_report(args: &Args, parallel: bool) -> Result<()> {
    let base = base_config(args, ScenarioName::Contradict)?;
    let configs: Vec<RunConfig> = ModelSpec::library()
        .into_iter()
        .map(|model| RunConfig {
            model,
            ..base.clone()
        })
        .collect();
    let results: Vec<Result<ScenarioReport, cli::RunError>> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || cli::run(c))).collect();
            handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
        })
    } else {
        configs.iter().map(cli::run).collect()
    };
    let mut sidecars = Vec::new();
    for r in results {
        let report = r?;
        println!(
            "{:<20} {:<12} {}",
            report.model,
            report.failed_hypothesis.as_deref().unwrap_or("none"),
            report.summary
        );
        sidecars.push(serde_json::from_str::<serde_json::Value>(&cli::render_sidecar(&report)?)?);
    }
    if let Some(path) = &base.output {
        fs::write(path, serde_json::to_string_pretty(&sidecars)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = match &args.command {
        Command::Solve => single(&args, ScenarioName::Solve),
        Command::Monotone => single(&args, ScenarioName::Monotone),
        Command::Contradict => single(&args, ScenarioName::Contradict),
        Command::Check => single(&args, ScenarioName::CheckIdentities),
        Command::Willmore => single(&args, ScenarioName::WillmoreExpansion),
        Command::Report { parallel } => library_report(&args, *parallel),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
