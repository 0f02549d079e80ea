//! Benchmark runs: direct solve, moment closure per order and maximum-entropy
//! reconstruction, with error tables and figure data written as CSV.

mod config;
pub mod metrics;

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use metrics::{chebyshev_distance, relative_moment_error, MetricError, MomentErrorSummary};

use crate::direct::{self, DirectError, SparseDistribution, TruncationConfig};
use crate::distribution::DiscreteDistribution;
use crate::maxent::{self, Lattice, MaxEntError, MaxEntOptions, MaxEntSolution, MomentConstraints};
use crate::moments::{self, MomentError, MomentVector, MultiIndex};
use crate::network::{builtin_model, conservation_groups, parse_network, NetworkError, ReactionNetwork};
use crate::ode::OdeOptions;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Direct(#[from] DirectError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    MaxEnt(#[from] MaxEntError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl HarnessError {
    /// Whether the failure is numerical rather than a usage or I/O problem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            HarnessError::Direct(_) | HarnessError::Moment(_) | HarnessError::MaxEnt(_) | HarnessError::Metric(_)
        )
    }
}

/// A report cell: a value, a failure reason, or nothing.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(f64),
    Failed(String),
    Missing,
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Value(v) => write!(f, "{v:e}"),
            Cell::Failed(r) => write!(f, "\"failed: {}\"", r.replace('"', "'")),
            Cell::Missing => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectSummary {
    pub support_size: usize,
    pub mass_defect: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub order: usize,
    pub n_equations: usize,
    /// `errors[k - 1]` is the relative error of order `k`.
    pub errors: Vec<Cell>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionRow {
    pub order: usize,
    /// Per reported species: from closure moments.
    pub eps: Vec<Cell>,
    /// Per reported species: from direct-solver moments.
    pub eps_star: Vec<Cell>,
}

/// Reference marginal and reconstructions on a common count axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub species: String,
    pub order: usize,
    pub direct: DiscreteDistribution,
    pub reconstructed: Option<DiscreteDistribution>,
    pub reconstructed_star: Option<DiscreteDistribution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub model: String,
    pub t_end: f64,
    pub species: Vec<String>,
    pub max_order: usize,
    pub direct: Option<DirectSummary>,
    pub moments: Vec<MomentRow>,
    pub reconstruction: Vec<ReconstructionRow>,
    pub figures: Vec<FigureData>,
}

/// Loads a builtin model or a network file, applying rate overrides.
pub fn load_model(model: &str, rates: Option<&[f64]>) -> Result<ReactionNetwork, HarnessError> {
    let net = match builtin_model(model) {
        Ok(net) => net,
        Err(NetworkError::UnknownModel(_)) if Path::new(model).exists() => parse_network(&fs::read_to_string(model)?)?,
        Err(e) => return Err(e.into()),
    };
    Ok(match rates {
        Some(r) => net.with_rates(r)?,
        None => net,
    })
}

/// Lattice of species `i`: step 2 on the parity of its initial count when
/// every reaction changes it by an even amount, else every integer.
pub fn species_lattice(net: &ReactionNetwork, i: usize) -> Lattice {
    let even = (0..net.num_reactions()).all(|j| net.change_vector(j)[i] % 2 == 0);
    if even {
        Lattice::new(2, net.initial_state().counts()[i] % 2)
    } else {
        Lattice::UNIT
    }
}

/// Species reported by default: those outside every conserved group.
pub fn default_species(model: &str, net: &ReactionNetwork) -> Vec<usize> {
    let groups = conservation_groups(model);
    (0..net.num_species())
        .filter(|&i| {
            let name = net.species_names()[i];
            !groups.iter().any(|g| g.contains(&name))
        })
        .collect()
}

/// Pure marginal moments `E[X_i^k]`, `1 <= k <= order`, of a direct solution.
pub fn reference_moments(dist: &SparseDistribution, n: usize, order: usize) -> Result<MomentVector, HarnessError> {
    let mut pairs = Vec::new();
    for i in 0..n {
        let m = dist.empirical_moments(i, order)?;
        for (k, v) in m.into_iter().enumerate().skip(1) {
            pairs.push((MultiIndex::power(n, i, k as u32), v));
        }
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let (indices, values) = pairs.into_iter().unzip();
    Ok(MomentVector::new(indices, values, dist.time))
}

/// Half-line maximum-entropy solve; when it fails, the full-line solution
/// (later cut at zero by the discretization) is used instead.
pub fn solve_marginal(moments: &[f64], opts: &MaxEntOptions) -> Result<MaxEntSolution, MaxEntError> {
    match maxent::solve_dual(&MomentConstraints::half_line(moments.to_vec()), opts) {
        Ok(sol) => Ok(sol),
        Err(e @ MaxEntError::InvalidConstraints(_)) => Err(e),
        Err(e) => match maxent::solve_dual(&MomentConstraints::full_line(moments.to_vec()), opts) {
            Ok(mut sol) => {
                sol.diagnostics.warnings.push(format!("half-line solve failed ({e}); using the full-line solution"));
                Ok(sol)
            }
            Err(_) => Err(e),
        },
    }
}

/// Maximum-entropy marginal from raw moments `mu_0..mu_M`.
pub fn reconstruct_marginal(
    moments: &[f64],
    lattice: Lattice,
    opts: &MaxEntOptions,
) -> Result<DiscreteDistribution, MaxEntError> {
    let sol = solve_marginal(moments, opts)?;
    Ok(maxent::discretize(&sol, lattice))
}

fn elapsed(start: Instant, enabled: bool) -> f64 {
    if enabled {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

/// Runs the configured experiment and writes its CSVs when `config.out` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let net = load_model(&config.model, config.rates.as_deref())?;
    let (reference, summary) = if config.direct {
        let mut tc = TruncationConfig::with_delta(config.delta, config.t_end);
        if let Some(d2) = config.delta2 {
            tc.delta2 = d2;
        }
        tc.step_size = config.step_size;
        tc.step_safety = config.step_safety;
        let start = Instant::now();
        let dist = direct::integrate(&net, &SparseDistribution::point_mass(net.initial_state().clone()), &tc)?;
        let summary = DirectSummary {
            support_size: dist.len(),
            mass_defect: dist.mass_defect,
            wall_seconds: elapsed(start, config.wall_times),
        };
        (Some(dist), Some(summary))
    } else {
        (None, None)
    };
    let mut report = evaluate(&net, reference.as_ref(), config)?;
    report.direct = summary;
    if let Some(dir) = &config.out {
        write_report(&report, dir, config.figures)?;
    }
    Ok(report)
}

/// Moment closure and reconstruction for every configured order against an
/// optional reference distribution at `config.t_end`.
pub fn evaluate(
    net: &ReactionNetwork,
    reference: Option<&SparseDistribution>,
    config: &ExperimentConfig,
) -> Result<ExperimentReport, HarnessError> {
    let n = net.num_species();
    let species: Vec<usize> = if config.species.is_empty() {
        default_species(&config.model, net)
    } else {
        config
            .species
            .iter()
            .map(|s| {
                net.species_index(s)
                    .ok_or_else(|| HarnessError::Config(format!("unknown species `{s}`")))
            })
            .collect::<Result<_, _>>()?
    };
    let max_order = config.orders.iter().copied().max().unwrap_or(0).max(5);
    let ref_moments = reference.map(|d| reference_moments(d, n, max_order)).transpose()?;
    let marginals: Option<Vec<DiscreteDistribution>> = reference
        .map(|d| species.iter().map(|&i| d.marginal(i)).collect::<Result<_, _>>())
        .transpose()?;

    let mut report = ExperimentReport {
        model: config.model.clone(),
        t_end: config.t_end,
        species: species.iter().map(|&i| net.species_names()[i].to_string()).collect(),
        max_order,
        direct: None,
        moments: Vec::new(),
        reconstruction: Vec::new(),
        figures: Vec::new(),
    };

    for &m in &config.orders {
        let start = Instant::now();
        let closed = moments::close_system(net, m).and_then(|sys| {
            let init = moments::init_moments_from_state(net.initial_state(), sys.tracked());
            let mv = moments::integrate_moments(&sys, &init, config.t_end, &OdeOptions::default())?;
            Ok((sys.num_equations(), mv))
        });
        let wall = elapsed(start, config.wall_times);
        let (n_equations, approx) = match closed {
            Ok((neq, mv)) => (neq, Ok(mv)),
            Err(e) => (moments::moment_count(n, m), Err(e.to_string())),
        };
        let errors = (1..=max_order)
            .map(|k| match (&approx, &ref_moments) {
                _ if k > m => Cell::Missing,
                (Err(e), _) => Cell::Failed(e.clone()),
                (Ok(_), None) => Cell::Missing,
                (Ok(a), Some(r)) => match relative_moment_error(a, r, k as u32) {
                    Ok(s) => Cell::Value(s.value),
                    Err(e) => Cell::Failed(e.to_string()),
                },
            })
            .collect();
        report.moments.push(MomentRow {
            order: m,
            n_equations,
            errors,
            wall_seconds: wall,
        });

        let (Some(refm), Some(margs)) = (&ref_moments, &marginals) else {
            continue;
        };
        let mut row = ReconstructionRow {
            order: m,
            eps: Vec::new(),
            eps_star: Vec::new(),
        };
        for (s, &i) in species.iter().enumerate() {
            let lattice = species_lattice(net, i);
            let target = &margs[s];
            let from_closure = match &approx {
                Ok(a) => a
                    .marginal_moments(i, m as u32)
                    .map_err(|e| e.to_string())
                    .and_then(|mu| reconstruct_marginal(&mu, lattice, &config.maxent).map_err(|e| e.to_string())),
                Err(e) => Err(e.clone()),
            };
            let from_direct = refm
                .marginal_moments(i, m as u32)
                .map_err(|e| e.to_string())
                .and_then(|mu| reconstruct_marginal(&mu, lattice, &config.maxent).map_err(|e| e.to_string()));
            let cell = |r: &Result<DiscreteDistribution, String>| match r {
                Ok(d) => match chebyshev_distance(target, d, lattice) {
                    Ok(v) => Cell::Value(v),
                    Err(e) => Cell::Failed(e.to_string()),
                },
                Err(e) => Cell::Failed(e.clone()),
            };
            row.eps.push(cell(&from_closure));
            row.eps_star.push(cell(&from_direct));
            if config.figures {
                report.figures.push(FigureData {
                    species: report.species[s].clone(),
                    order: m,
                    direct: target.clone(),
                    reconstructed: from_closure.ok(),
                    reconstructed_star: from_direct.ok(),
                });
            }
        }
        report.reconstruction.push(row);
    }
    Ok(report)
}

impl ExperimentReport {
    /// `support_size,mass_defect,wall_seconds`.
    pub fn write_direct_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "support_size,mass_defect,wall_seconds")?;
        if let Some(d) = &self.direct {
            writeln!(w, "{},{:e},{}", d.support_size, d.mass_defect, d.wall_seconds)?;
        }
        Ok(())
    }

    /// `order,n_equations,err_ord_1..,wall_seconds`.
    pub fn write_moments_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let cols: Vec<String> = (1..=self.max_order).map(|k| format!("err_ord_{k}")).collect();
        writeln!(w, "order,n_equations,{},wall_seconds", cols.join(","))?;
        for r in &self.moments {
            let cells: Vec<String> = r.errors.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{},{},{}", r.order, r.n_equations, cells.join(","), r.wall_seconds)?;
        }
        Ok(())
    }

    /// `order,eps_<species>,eps_star_<species>,...`.
    pub fn write_reconstruction_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["order".to_string()];
        for s in &self.species {
            header.push(format!("eps_{s}"));
            header.push(format!("eps_star_{s}"));
        }
        writeln!(w, "{}", header.join(","))?;
        for r in &self.reconstruction {
            let mut cells = vec![r.order.to_string()];
            for (a, b) in r.eps.iter().zip(&r.eps_star) {
                cells.push(a.to_string());
                cells.push(b.to_string());
            }
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

impl FigureData {
    /// `count,direct,reconstructed,reconstructed_star` over the union of supports.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut counts: Vec<u32> = self.direct.iter().map(|(x, _)| x).collect();
        for d in [&self.reconstructed, &self.reconstructed_star].into_iter().flatten() {
            counts.extend(d.iter().map(|(x, _)| x));
        }
        counts.sort_unstable();
        counts.dedup();
        let get = |d: &Option<DiscreteDistribution>, x: u32| d.as_ref().map(|d| format!("{:e}", d.get(x))).unwrap_or_default();
        writeln!(w, "count,direct,reconstructed,reconstructed_star")?;
        for x in counts {
            writeln!(
                w,
                "{x},{:e},{},{}",
                self.direct.get(x),
                get(&self.reconstructed, x),
                get(&self.reconstructed_star, x)
            )?;
        }
        Ok(())
    }
}

/// Writes `direct.csv`, `moments.csv`, `reconstruction.csv` and, if asked,
/// `figure_<species>_M<order>.csv` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path, figures: bool) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let open = |name: &str| fs::File::create(dir.join(name)).map(io::BufWriter::new);
    report.write_direct_csv(open("direct.csv")?)?;
    report.write_moments_csv(open("moments.csv")?)?;
    report.write_reconstruction_csv(open("reconstruction.csv")?)?;
    if figures {
        for f in &report.figures {
            f.write_csv(open(&format!("figure_{}_M{}.csv", f.species, f.order))?)?;
        }
    }
    Ok(())
}
