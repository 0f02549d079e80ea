use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cme_core::direct::{self, SparseDistribution, TruncationConfig};
use cme_core::distribution::DiscreteDistribution;
use cme_core::harness::{self, ExperimentConfig, HarnessError};
use cme_core::maxent::{self, Lattice, MaxEntOptions};
use cme_core::moments::{self, MomentVector};
use cme_core::network::{builtin_model, builtin_names};
use cme_core::ode::OdeOptions;

#[derive(Parser)]
#[command(name = "cme", version, about = "Chemical master equation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List builtin models.
    Models,
    /// Integrate the master equation with dynamic state-space truncation.
    SolveDirect(SolveDirect),
    /// Integrate the closed moment equations.
    SolveMoments(SolveMoments),
    /// Maximum-entropy marginal from a moment CSV.
    Reconstruct(Reconstruct),
    /// Chebyshev distance between two distribution CSVs.
    Compare(Compare),
    /// Run an experiment from a config file.
    Bench(Bench),
}

#[derive(Args)]
struct ModelArgs {
    /// Builtin model name or network file.
    #[arg(long)]
    model: String,
    /// Comma-separated rate constants, one per reaction.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long = "t-end")]
    t_end: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveDirect {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1e-15)]
    delta: f64,
    #[arg(long)]
    delta2: Option<f64>,
    /// Fixed Euler step.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long = "step-safety", default_value_t = 0.1)]
    step_safety: f64,
}

#[derive(Args)]
struct SolveMoments {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    order: usize,
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
}

#[derive(Args)]
struct Reconstruct {
    /// Moment CSV (`multi_index,value`).
    #[arg(long)]
    moments: PathBuf,
    #[arg(long)]
    order: usize,
    /// Species index in the moment file.
    #[arg(long, default_value_t = 0)]
    species: usize,
    #[arg(long, default_value_t = 1)]
    lattice: u32,
    #[arg(long, default_value_t = 0)]
    offset: u32,
    #[arg(long, default_value_t = 128)]
    nodes: usize,
    /// Integration window in standard deviations.
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Compare {
    first: PathBuf,
    second: PathBuf,
    #[arg(long, default_value_t = 1)]
    lattice: u32,
    #[arg(long, default_value_t = 0)]
    offset: u32,
}

#[derive(Args)]
struct Bench {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn usage(msg: String) -> HarnessError {
    HarnessError::Config(msg)
}

fn lattice(step: u32, offset: u32) -> Result<Lattice, HarnessError> {
    if step != 1 && step != 2 {
        return Err(usage(format!("lattice step must be 1 or 2, got {step}")));
    }
    Ok(Lattice::new(step, offset))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Models => {
            let mut out = io::stdout().lock();
            for name in builtin_names() {
                let net = builtin_model(name)?;
                writeln!(
                    out,
                    "{name}: {} species ({}), {} reactions",
                    net.num_species(),
                    net.species_names().join(" "),
                    net.num_reactions()
                )?;
            }
        }
        Command::SolveDirect(a) => {
            let net = harness::load_model(&a.model.model, a.model.rates.as_deref())?;
            let mut tc = TruncationConfig::with_delta(a.delta, a.model.t_end);
            if let Some(d2) = a.delta2 {
                tc.delta2 = d2;
            }
            tc.step_size = a.h;
            tc.step_safety = a.step_safety;
            let dist = direct::integrate(&net, &SparseDistribution::point_mass(net.initial_state().clone()), &tc)?;
            eprintln!("support {} mass defect {:e}", dist.len(), 1.0 - dist.total_mass());
            dist.write_csv(output(a.model.out.as_deref())?, &net.species_names())?;
        }
        Command::SolveMoments(a) => {
            let net = harness::load_model(&a.model.model, a.model.rates.as_deref())?;
            let sys = moments::close_system(&net, a.order)?;
            let init = moments::init_moments_from_state(net.initial_state(), sys.tracked());
            let opts = OdeOptions {
                rtol: a.rtol,
                ..OdeOptions::default()
            };
            let mv = moments::integrate_moments(&sys, &init, a.model.t_end, &opts)?;
            for w in &mv.warnings {
                eprintln!("warning: {w}");
            }
            mv.write_csv(output(a.model.out.as_deref())?)?;
        }
        Command::Reconstruct(a) => {
            let lat = lattice(a.lattice, a.offset)?;
            let mv = MomentVector::read_csv(BufReader::new(File::open(&a.moments)?))?;
            if a.species >= mv.num_species() {
                return Err(usage(format!(
                    "species {} out of range (file has {})",
                    a.species,
                    mv.num_species()
                )));
            }
            let mu = mv.marginal_moments(a.species, a.order as u32)?;
            let mut opts = MaxEntOptions {
                nodes: a.nodes,
                ..MaxEntOptions::default()
            };
            if let Some(w) = a.window {
                opts.window = w;
            }
            let sol = harness::solve_marginal(&mu, &opts)?;
            for w in &sol.diagnostics.warnings {
                eprintln!("warning: {w}");
            }
            sol.write_csv(&maxent::discretize(&sol, lat), output(a.out.as_deref())?)?;
        }
        Command::Compare(a) => {
            let lat = lattice(a.lattice, a.offset)?;
            let read = |p: &Path| -> Result<DiscreteDistribution, HarnessError> {
                Ok(DiscreteDistribution::read_csv(BufReader::new(File::open(p)?))?)
            };
            let (p, q) = (read(&a.first)?, read(&a.second)?);
            let d = harness::chebyshev_distance(&p, &q, lat)?;
            println!("chebyshev,{d:e}");
        }
        Command::Bench(a) => {
            let mut config = ExperimentConfig::parse(&std::fs::read_to_string(&a.config)?)?;
            if a.out.is_some() {
                config.out = a.out;
            }
            let report = harness::run_experiment(&config)?;
            if config.out.is_none() {
                let mut out = io::stdout().lock();
                report.write_moments_csv(&mut out)?;
                report.write_reconstruction_csv(&mut out)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
