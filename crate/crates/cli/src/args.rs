use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use scalepred::inference::CostKind;

use crate::config::{ContextConfig, RunConfig};
use crate::error::{CliError, Result};

/// Fit strong-scaling performance models to elapsed-time measurements and
/// extrapolate them with posterior prediction bands.
///
/// Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure,
/// 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "scalepred", version, about, long_about, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one model's posterior and write draws, histograms, estimates and a prediction band.
    Fit(FitArgs),
    /// Run a matrix of models x teacher splits x costs and write a comparison report.
    Compare(CompareArgs),
    /// Check the sampler against a quadrature of the posterior (models with at most three terms).
    Validate(ValidateArgs),
    /// Turn a fit artifact into whitespace-delimited curve files and an optional SVG chart.
    ExportPlot(ExportArgs),
}

/// Options shared by `fit` and `validate`. Flags override keys of `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(short, long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Data set (`.csv` or `.json`).
    #[arg(short, long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Model name (3TM, 4TM, 5TM, 6TM) or term list such as T1+T2.
    #[arg(short, long)]
    pub model: Option<String>,
    /// Comma-separated teacher node counts; the rest become test points.
    #[arg(long, value_delimiter = ',', value_name = "P,...")]
    pub teacher: Option<Vec<u32>>,
    /// Cost function: relative or loglog.
    #[arg(long)]
    pub cost: Option<CostKind>,
    /// Comma-separated upper prior bounds, one per coefficient.
    #[arg(long, value_delimiter = ',', value_name = "C,...")]
    pub prior: Option<Vec<f64>>,
    /// Matrix size M of the deceleration term.
    #[arg(long)]
    pub matrix_size: Option<u64>,
    /// Cores per node of the deceleration term.
    #[arg(long)]
    pub cores_per_node: Option<u64>,
    /// Histogram bins for marginals and bands.
    #[arg(long)]
    pub bins: Option<usize>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Run replicas one after another instead of in parallel (same results).
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplerArgs {
    /// Random seed (below 2^63).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sweeps per replica.
    #[arg(long)]
    pub n_steps: Option<u64>,
    /// Fraction of each chain discarded as burn-in.
    #[arg(long)]
    pub burn_in: Option<f64>,
    /// Sweeps between replica exchange attempts.
    #[arg(long)]
    pub exchange_interval: Option<u64>,
    /// Comma-separated ascending temperature ladder.
    #[arg(long, value_delimiter = ',', value_name = "TAU,...")]
    pub tau: Option<Vec<f64>>,
    /// Comma-separated initial proposal widths, one per coefficient.
    #[arg(long, value_delimiter = ',', value_name = "W,...")]
    pub step_sizes: Option<Vec<f64>>,
    /// Keep proposal widths fixed during burn-in.
    #[arg(long)]
    pub no_adapt: bool,
}

impl SamplerArgs {
    pub fn apply(&self, remc: &mut scalepred::inference::RemcConfig) {
        if let Some(seed) = self.seed {
            remc.seed = seed;
        }
        if let Some(n) = self.n_steps {
            remc.n_steps = n;
        }
        if let Some(f) = self.burn_in {
            remc.burn_in_fraction = f;
        }
        if let Some(k) = self.exchange_interval {
            remc.exchange_interval = k;
        }
        if let Some(tau) = &self.tau {
            remc.tau_ladder = tau.clone();
        }
        if let Some(w) = &self.step_sizes {
            remc.step_sizes = Some(w.clone());
        }
        if self.no_adapt {
            remc.adapt_step_sizes = false;
        }
    }
}

impl RunArgs {
    /// The config file (if any) with every given flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let (Some(data), Some(model)) = (&self.data, &self.model) else {
                    return Err(CliError::Invalid("give --config or both --data and --model".into()));
                };
                RunConfig::new(data, model)
            }
        };
        if let Some(data) = &self.data {
            config.dataset = data.clone();
        }
        if let Some(model) = &self.model {
            config.model = model.clone();
        }
        if let Some(teacher) = &self.teacher {
            config.teacher = Some(teacher.clone());
        }
        if let Some(cost) = self.cost {
            config.cost = cost;
        }
        if let Some(prior) = &self.prior {
            config.prior = Some(prior.clone());
        }
        config.context = merge_context(config.context, self.matrix_size, self.cores_per_node)?;
        if let Some(bins) = self.bins {
            config.bins = bins;
        }
        self.sampler.apply(&mut config.remc);
        Ok(config)
    }
}

pub(crate) fn merge_context(
    base: Option<ContextConfig>,
    matrix_size: Option<u64>,
    cores_per_node: Option<u64>,
) -> Result<Option<ContextConfig>> {
    match (base, matrix_size, cores_per_node) {
        (base, None, None) => Ok(base),
        (Some(b), m, c) => Ok(Some(ContextConfig {
            matrix_size: m.unwrap_or(b.matrix_size),
            cores_per_node: c.unwrap_or(b.cores_per_node),
        })),
        (None, Some(m), Some(c)) => Ok(Some(ContextConfig { matrix_size: m, cores_per_node: c })),
        (None, _, _) => Err(CliError::Invalid("--matrix-size and --cores-per-node go together".into())),
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Output directory (created atomically).
    #[arg(short, long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Probability mass of the HDRs.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Smallest node count of the prediction grid.
    #[arg(long)]
    pub grid_min: Option<f64>,
    /// Largest node count of the prediction grid.
    #[arg(long)]
    pub grid_max: Option<f64>,
    /// Number of prediction grid points.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Space the prediction grid linearly instead of logarithmically.
    #[arg(long)]
    pub linear_grid: bool,
    /// Replace an existing output directory.
    #[arg(long)]
    pub force: bool,
}

impl FitArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = self.run.resolve()?;
        if let Some(out) = &self.output {
            config.output = Some(out.clone());
        }
        if let Some(mass) = self.mass {
            config.mass = mass;
        }
        if let Some(v) = self.grid_min {
            config.grid.min = Some(v);
        }
        if let Some(v) = self.grid_max {
            config.grid.max = Some(v);
        }
        if let Some(n) = self.grid_points {
            config.grid.points = n;
        }
        if self.linear_grid {
            config.grid.log = false;
        }
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// TOML matrix configuration.
    #[arg(short, long, value_name = "FILE")]
    pub config: PathBuf,
    /// Output directory (created atomically).
    #[arg(short, long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Comma-separated cost kinds, overriding `costs`.
    #[arg(long, value_delimiter = ',')]
    pub costs: Option<Vec<CostKind>>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Run cells and replicas in the reference serial order (same results).
    #[arg(long)]
    pub serial: bool,
    /// Replace an existing output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Grid cells per axis of the quadrature.
    #[arg(long, default_value_t = 400)]
    pub resolution: usize,
    /// Largest acceptable total variation distance per marginal.
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    /// Write the distances as JSON to this file.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    /// Fit artifact directory (or a cell directory of a comparison).
    pub artifact: PathBuf,
    /// Where to write the plot files; defaults to `<artifact>/plot`.
    #[arg(short, long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Also render `band.svg`.
    #[arg(long)]
    pub svg: bool,
}
