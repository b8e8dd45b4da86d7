use std::path::PathBuf;
use std::process::ExitCode;

use cfs_lab::{run, Context, Experiment, ExperimentConfig, GeneratorSpec, LabError, OutputFormat};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

/// Numerical experiments on discrete causal fermion systems.
///
/// Exit status: 0 when every check passes, 1 when a numerical check fails
/// (the failing invariants are listed on stderr), 2 on invalid configuration
/// (a JSON diagnostic is printed on stderr).
#[derive(Debug, Parser)]
#[command(name = "cfs-lab", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance override, e.g. `--tol fd2_tol=1e-5`. Repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VAL")]
    tol: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// json, csv or both.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// System file to load instead of generating one.
    #[arg(long, global = true, value_name = "PATH")]
    system: Option<PathBuf>,
    /// Number of points of a generated random system.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Hilbert space dimension of a generated system.
    #[arg(long, global = true)]
    f: Option<usize>,
    /// Spin dimension bound of a generated system.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Causal action, Lagrangian matrix and EL values.
    Action,
    /// Causal class of every pair of points.
    Classify,
    /// Minimize the causal action under the volume and trace constraints.
    Minimize,
    /// Second variation split into lfe, Q and remainder terms.
    SecondVariation {
        #[arg(long)]
        directions: Option<usize>,
    },
    /// Lfe, Q and remainder restricted to time strips and slices.
    Decoupling,
    /// Strip operator spectrum, solves and boundary-driven solutions.
    SolveStrip,
    /// Conservation of the commutator inner product and the λ-sweep.
    Commutator {
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Extended space with its Gram matrix.
    Extend {
        /// Number of random Hilbert vectors to embed.
        #[arg(long)]
        embed: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Iterated coupling of solutions through the Hilbert space.
    Couple {
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Commutator trace identity and quadratic form on a subset of points.
    AppendixA {
        #[arg(long)]
        cases: Option<usize>,
    },
    /// Regularized Dirac dynamics in Fourier modes.
    DiracDemo {
        /// Spatial momentum, repeatable.
        #[arg(long, allow_negative_numbers = true)]
        k: Vec<f64>,
        /// Mass.
        #[arg(long)]
        m: Option<f64>,
    },
    /// Large-distance behavior of Bessel mass-shell kernels.
    KernelAsymptotics,
    /// Every experiment above; checks merged into one report.
    VerifyAll,
}

fn experiment(command: &Command) -> Experiment {
    match command {
        Command::Action => Experiment::Action,
        Command::Classify => Experiment::Classify,
        Command::Minimize => Experiment::Minimize,
        Command::SecondVariation { .. } => Experiment::SecondVariation,
        Command::Decoupling => Experiment::Decoupling,
        Command::SolveStrip => Experiment::SolveStrip,
        Command::Commutator { .. } => Experiment::Commutator,
        Command::Extend { .. } => Experiment::Extend,
        Command::Couple { .. } => Experiment::Couple,
        Command::AppendixA { .. } => Experiment::AppendixA,
        Command::DiracDemo { .. } => Experiment::DiracDemo,
        Command::KernelAsymptotics => Experiment::KernelAsymptotics,
        Command::VerifyAll => Experiment::VerifyAll,
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, LabError> {
    let c = &cli.common;
    let mut config = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        config.seed = seed;
    }
    for assignment in &c.tol {
        config.set_tolerance(assignment)?;
    }
    if let Some(out) = &c.out {
        config.out = out.clone();
    }
    if let Some(format) = c.format {
        config.format = format;
    }
    if let Some(system) = &c.system {
        config.system = Some(system.clone());
    }
    if c.points.is_some() || c.f.is_some() || c.n.is_some() || c.kappa.is_some() {
        let g = config.generator.get_or_insert_with(GeneratorSpec::default);
        g.points = c.points.unwrap_or(g.points);
        g.f = c.f.unwrap_or(g.f);
        g.n = c.n.unwrap_or(g.n);
        g.kappa = c.kappa.unwrap_or(g.kappa);
    }
    match &cli.command {
        Command::SecondVariation { directions: Some(d) } => config.directions = *d,
        Command::Commutator { lambda: Some(l) } => config.lambda = Some(*l),
        Command::Extend { embed, lambda } => {
            config.embed = embed.unwrap_or(config.embed);
            config.lambda = lambda.or(config.lambda);
        }
        Command::Couple { scale: Some(s) } => config.coupling.scale = *s,
        Command::AppendixA { cases: Some(n) } => config.cases = *n,
        Command::DiracDemo { k, m } => {
            if !k.is_empty() {
                config.dirac.momenta = k.clone();
            }
            config.dirac.mass = m.unwrap_or(config.dirac.mass);
            config.dirac.seed = config.seed;
        }
        _ => {}
    }
    Ok(config)
}

fn configure_threads() -> Result<(), LabError> {
    let Ok(value) = std::env::var("CFS_LAB_THREADS") else { return Ok(()) };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| LabError::Config(format!("CFS_LAB_THREADS must be a positive integer, got `{value}`")))?;
    // fails only if a pool already exists, which cannot happen this early
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn config_error(e: &LabError) -> ExitCode {
    let diagnostic = json!({"status": "invalid-config", "error": e.to_string()});
    eprintln!("{diagnostic}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return config_error(&e);
    }
    let ctx = match build_config(&cli).and_then(Context::new) {
        Ok(ctx) => ctx,
        Err(e) => return config_error(&e),
    };
    let exp = experiment(&cli.command);
    let bundle = match run(exp, &ctx) {
        Ok(b) => b,
        Err(e) if e.is_config() => return config_error(&e),
        Err(e) => {
            eprintln!("{}: numerical failure: {e}", exp.name());
            return ExitCode::from(1);
        }
    };
    let written = match bundle.write(&ctx.config.out, ctx.config.format) {
        Ok(w) => w,
        Err(e) => return config_error(&e),
    };
    let failures = bundle.report.failures();
    println!(
        "{}: {} checks, {} failed; {} files in {}",
        exp.name(),
        bundle.report.checks.len(),
        failures.len(),
        written.len(),
        ctx.config.out.display()
    );
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for c in failures {
            eprintln!("FAILED {}", c.describe());
        }
        ExitCode::from(1)
    }
}
