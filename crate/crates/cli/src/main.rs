use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use lasso_tradeoff::asymptotic::{achieve_point, AchieveOptions};
use lasso_tradeoff::boundaries::{boundary_curve, transition_for};
use lasso_tradeoff::io::{
    self, AchieveDocument, AsymptoticDocument, BoundaryDocument, ContainmentDocument,
    ContainmentLevel, RegionDocument, SimulationDocument, TransitionDocument, SCHEMA_VERSION,
};
use lasso_tradeoff::region::{classify_case, region_polygon, TradeoffPoint};
use lasso_tradeoff::simulate::{self, containment_report};
use lasso_tradeoff::state_evolution::ProblemShape;
use lasso_tradeoff::Error;

#[derive(Parser)]
#[command(name = "lasso-tradeoff", version, about = "Lasso TPP/FDP tradeoff diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct ShapeArgs {
    #[arg(long, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: f64,
}

impl ShapeArgs {
    fn shape(&self) -> lasso_tradeoff::Result<ProblemShape> {
        ProblemShape::new(self.delta, self.epsilon)
    }
}

#[derive(clap::Args)]
struct Output {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the lower boundary curve with the l1 and l2 lines.
    Boundary {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Feasible region polygon and case label.
    Region {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Phase transition sparsity for a sampling ratio, as JSON.
    Dt {
        #[arg(long, allow_negative_numbers = true)]
        delta: f64,
    },
    /// Limiting tradeoff path over a penalty grid.
    Asymptotic {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo lasso paths, one CSV and JSON file per noise level.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Allowed distance outside the region in the containment report.
        #[arg(long, default_value_t = 0.05)]
        slack: f64,
    },
    /// Find a prior, noise level and penalty whose limit hits a point.
    Achieve {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long)]
        tpp: f64,
        #[arg(long)]
        fdp: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Infeasible { .. } => 4,
        Error::Convergence { .. }
        | Error::Bracket(_)
        | Error::NotFound { .. }
        | Error::TrialFailures { .. } => 3,
        _ => 2,
    }
}

fn emit(out: Option<&Path>, text: &str) -> lasso_tradeoff::Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> lasso_tradeoff::Result<()> {
    match cli.command {
        Command::Boundary { shape, samples, output } => {
            let doc = BoundaryDocument::from_curve(&boundary_curve(shape.shape()?, samples)?);
            let text = match output.format {
                Format::Csv => io::csv_string(&doc.rows)?,
                Format::Json => io::to_json(&doc)?,
            };
            emit(output.out.as_deref(), &text)
        }
        Command::Region { shape, samples, output } => {
            let shape = shape.shape()?;
            let region = region_polygon(shape, samples)?;
            let doc = RegionDocument::from_region(&region, classify_case(shape)?.active);
            let text = match output.format {
                Format::Csv => io::csv_string(&doc.vertices)?,
                Format::Json => io::to_json(&doc)?,
            };
            emit(output.out.as_deref(), &text)
        }
        Command::Dt { delta } => {
            // Any ε in (0, 1) will do; only δ matters for the transition.
            let shape = ProblemShape::new(delta, 0.5)?;
            let transition = transition_for(shape)?;
            let doc = TransitionDocument {
                schema_version: SCHEMA_VERSION,
                delta,
                always_below_transition: transition.is_none(),
                transition,
            };
            emit(None, &io::to_json(&doc)?)
        }
        Command::Asymptotic { config, output } => {
            let config = io::parse_asymptotic_config(&fs::read_to_string(config)?)?;
            let path = config.run()?;
            for f in &path.failures {
                warn!("no solution at lambda {}: {}", f.lambda, f.message);
            }
            let doc = AsymptoticDocument::new(&config, &path);
            let text = match output.format {
                Format::Csv => io::csv_string(&doc.rows)?,
                Format::Json => io::to_json(&doc)?,
            };
            emit(output.out.as_deref(), &text)?;
            if path.failures.is_empty() {
                Ok(())
            } else {
                Err(Error::Convergence {
                    solver: "asymptotic path",
                    iterations: path.failures.len(),
                    last: path.failures[0].lambda,
                    residual: f64::NAN,
                })
            }
        }
        Command::Simulate { config, out_dir, slack } => {
            let plan = io::parse_simulation_plan(&fs::read_to_string(config)?)?;
            fs::create_dir_all(&out_dir)?;
            let mut levels = Vec::new();
            for config in plan.configs() {
                info!("simulating sigma = {}", config.sigma);
                let path = simulate::run(&config)?;
                let doc = SimulationDocument::new(&path);
                let stem = out_dir.join(format!("sigma_{}", config.sigma));
                fs::write(stem.with_extension("csv"), io::csv_string(&doc.rows)?)?;
                fs::write(stem.with_extension("json"), io::to_json(&doc)?)?;
                levels.push(ContainmentLevel {
                    sigma: config.sigma,
                    failed_trials: path.failed_trials,
                    report: containment_report(&path, config.shape()?, slack)?,
                });
            }
            let doc = ContainmentDocument {
                schema_version: SCHEMA_VERSION,
                levels,
            };
            fs::write(out_dir.join("containment.json"), io::to_json(&doc)?)?;
            Ok(())
        }
        Command::Achieve { shape, tpp, fdp, tol } => {
            let shape = shape.shape()?;
            let target = TradeoffPoint::new(tpp, fdp)?;
            let achievement = achieve_point(target, shape, tol, &AchieveOptions::default())?;
            let doc = AchieveDocument {
                schema_version: SCHEMA_VERSION,
                shape,
                target,
                tol,
                achievement,
            };
            emit(None, &io::to_json(&doc)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
