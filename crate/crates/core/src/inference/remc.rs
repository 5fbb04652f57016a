use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{CostKind, PriorBox, Target};
use super::kernel::ChainState;
use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParamVector};

/// Sweeps per step-size adaptation batch.
const ADAPT_BATCH: u64 = 50;
/// Per-component acceptance rate the burn-in adaptation aims for.
const ADAPT_TARGET: f64 = 0.44;

/// The four-temperature ladder `τ_k = 0.1 · 10^(2k/3)`, `k = 0..3`.
pub fn default_tau_ladder() -> Vec<f64> {
    (0..4).map(|k| 0.1 * 10f64.powf(2.0 * k as f64 / 3.0)).collect()
}

/// Replica-exchange sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemcConfig {
    /// Strictly ascending temperatures; the first is the one sampled.
    pub tau_ladder: Vec<f64>,
    /// Sweeps per replica.
    pub n_steps: u64,
    /// Leading fraction of each chain that is discarded.
    pub burn_in_fraction: f64,
    /// Proposal widths per coefficient; `None` uses `c_max / 100`.
    pub step_sizes: Option<Vec<f64>>,
    /// Sweeps between swap attempts.
    pub exchange_interval: u64,
    pub seed: u64,
    /// Tune proposal widths during burn-in (frozen afterwards).
    pub adapt_step_sizes: bool,
}

impl Default for RemcConfig {
    fn default() -> Self {
        Self {
            tau_ladder: default_tau_ladder(),
            n_steps: 1_000_000,
            burn_in_fraction: 0.5,
            step_sizes: None,
            exchange_interval: 100,
            seed: 0,
            adapt_step_sizes: true,
        }
    }
}

impl RemcConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.tau_ladder.is_empty() {
            return Err(Error::Config("temperature ladder is empty".into()));
        }
        if self.tau_ladder.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Config("temperatures must be positive and finite".into()));
        }
        if self.tau_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("temperature ladder must be strictly ascending".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be positive".into()));
        }
        if !(self.burn_in_fraction > 0.0 && self.burn_in_fraction < 1.0) {
            return Err(Error::Config(format!(
                "burn-in fraction must lie in (0, 1), got {}",
                self.burn_in_fraction
            )));
        }
        if self.burn_in_steps() >= self.n_steps {
            return Err(Error::Config("burn-in leaves no draws".into()));
        }
        if self.exchange_interval == 0 {
            return Err(Error::Config("exchange interval must be positive".into()));
        }
        if let Some(steps) = &self.step_sizes {
            if steps.len() != dim {
                return Err(Error::Config(format!(
                    "{} step sizes given for {dim} coefficients",
                    steps.len()
                )));
            }
            if steps.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                return Err(Error::Config("step sizes must be finite and non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn burn_in_steps(&self) -> u64 {
        (self.burn_in_fraction * self.n_steps as f64).floor() as u64
    }

    pub fn draw_count(&self) -> u64 {
        self.n_steps - self.burn_in_steps()
    }

    pub fn resolved_step_sizes(&self, prior: &PriorBox) -> Vec<f64> {
        match &self.step_sizes {
            Some(s) => s.clone(),
            None => prior.upper().iter().map(|m| m / 100.0).collect(),
        }
    }
}

/// Whether replicas advance on the rayon pool or one after another.
///
/// Both produce bit-identical results; serial is the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Swap attempt and acceptance counters per adjacent temperature pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SwapStats {
    pub attempts: Vec<u64>,
    pub accepts: Vec<u64>,
}

impl SwapStats {
    pub fn new(pairs: usize) -> Self {
        Self { attempts: vec![0; pairs], accepts: vec![0; pairs] }
    }

    pub fn rates(&self) -> Vec<f64> {
        self.attempts
            .iter()
            .zip(&self.accepts)
            .map(|(&n, &k)| if n == 0 { 0.0 } else { k as f64 / n as f64 })
            .collect()
    }
}

/// Probability of exchanging the positions of two replicas:
/// `min(1, exp((1/τ_i - 1/τ_j)(F_i - F_j)))`.
pub fn swap_probability(tau_i: f64, cost_i: f64, tau_j: f64, cost_j: f64) -> f64 {
    if tau_i == tau_j || cost_i == cost_j {
        return 1.0;
    }
    let exponent = (1.0 / tau_i - 1.0 / tau_j) * (cost_i - cost_j);
    if exponent >= 0.0 {
        1.0
    } else {
        exponent.exp()
    }
}

/// Attempts swaps between adjacent replicas `(k, k+1)` for every `k` with
/// `k % 2 == parity % 2`. `chains` must be ordered by ascending temperature.
pub fn exchange_step<R: Rng + ?Sized>(
    chains: &mut [ChainState],
    parity: usize,
    stats: &mut SwapStats,
    rng: &mut R,
) {
    let mut k = parity % 2;
    while k + 1 < chains.len() {
        let (lo, hi) = chains.split_at_mut(k + 1);
        let (a, b) = (&mut lo[k], &mut hi[0]);
        let p = swap_probability(a.tau(), a.cost(), b.tau(), b.cost());
        stats.attempts[k] += 1;
        if p >= 1.0 || rng.random::<f64>() < p {
            a.swap_position(b);
            stats.accepts[k] += 1;
        }
        k += 2;
    }
}

/// Post-burn-in draws of the coldest replica plus sampler diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    dim: usize,
    /// Row-major `len × dim`.
    draws: Vec<f64>,
    costs: Vec<f64>,
    pub tau: f64,
    /// Post-burn-in acceptance rate per replica, coldest first.
    pub accept_rates: Vec<f64>,
    /// Swap acceptance rate per adjacent pair.
    pub swap_rates: Vec<f64>,
    /// Post-burn-in mean cost per replica.
    pub mean_costs: Vec<f64>,
    /// Proposal widths per replica after burn-in.
    pub step_sizes: Vec<Vec<f64>>,
}

impl PosteriorSamples {
    /// Wraps externally produced draws (all rows must have length `dim`).
    pub fn from_draws(dim: usize, rows: Vec<Vec<f64>>, tau: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Usage("draws need at least one coefficient".into()));
        }
        let mut draws = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::Usage(format!("draw has {} values, expected {dim}", row.len())));
            }
            draws.extend_from_slice(row);
        }
        Ok(Self {
            dim,
            costs: vec![f64::NAN; rows.len()],
            draws,
            tau,
            accept_rates: Vec::new(),
            swap_rates: Vec::new(),
            mean_costs: Vec::new(),
            step_sizes: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.draws.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.chunks_exact(self.dim)
    }

    /// Cost of each draw (NaN for draws not produced by the sampler).
    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.iter().map(|d| d[index]).collect()
    }

    /// Applies `f` to every draw, keeping the diagnostics.
    pub fn map_draws(&self, mut f: impl FnMut(&mut [f64])) -> Self {
        let mut out = self.clone();
        out.draws.chunks_exact_mut(self.dim).for_each(&mut f);
        out
    }
}

struct Replica {
    chain: ChainState,
    rng: ChaCha8Rng,
    widths: Vec<f64>,
    caps: Vec<f64>,
    batch_accepts: Vec<u64>,
    batches: u64,
    adapt: bool,
    record: bool,
    draws: Vec<f64>,
    costs: Vec<f64>,
    cost_sum: f64,
    cost_n: u64,
}

impl Replica {
    /// Advances sweeps `[start, start + count)`; each sweep updates every coefficient once.
    fn advance(&mut self, start: u64, count: u64, burn_in: u64, target: &Target, prior: &PriorBox) {
        for step in start..start + count {
            if step == burn_in {
                self.chain.reset_counters();
            }
            for (i, &width) in self.widths.iter().enumerate() {
                if width > 0.0
                    && self.chain.update_component(i, width, target, prior, &mut self.rng)
                    && step < burn_in
                {
                    self.batch_accepts[i] += 1;
                }
            }
            if step < burn_in {
                if self.adapt && (step + 1) % ADAPT_BATCH == 0 {
                    self.adapt_widths();
                }
            } else {
                self.cost_sum += self.chain.cost();
                self.cost_n += 1;
                if self.record {
                    self.draws.extend_from_slice(self.chain.params().as_slice());
                    self.costs.push(self.chain.cost());
                }
            }
        }
    }

    fn adapt_widths(&mut self) {
        self.batches += 1;
        let delta = (1.0 / (self.batches as f64).sqrt()).min(0.1);
        for ((w, acc), &cap) in self.widths.iter_mut().zip(&mut self.batch_accepts).zip(&self.caps) {
            let rate = *acc as f64 / ADAPT_BATCH as f64;
            let factor = if rate > ADAPT_TARGET { delta.exp() } else { (-delta).exp() };
            if *w > 0.0 {
                *w = (*w * factor).clamp(cap * 1e-12, cap);
            }
            *acc = 0;
        }
    }
}

/// Runs replica-exchange Monte Carlo on the parallel pool.
pub fn run_remc(
    spec: &ModelSpec,
    teacher: &DataSet,
    kind: CostKind,
    prior: &PriorBox,
    config: &RemcConfig,
) -> Result<PosteriorSamples> {
    run_remc_with(spec, teacher, kind, prior, config, Execution::Parallel)
}

/// Runs replica-exchange Monte Carlo.
///
/// Each replica starts at the centre of the prior box and owns its own
/// ChaCha stream (stream `k + 1` for replica `k`; stream 0 drives swaps), so
/// the result depends only on the inputs and `config.seed`.
pub fn run_remc_with(
    spec: &ModelSpec,
    teacher: &DataSet,
    kind: CostKind,
    prior: &PriorBox,
    config: &RemcConfig,
    execution: Execution,
) -> Result<PosteriorSamples> {
    config.validate(spec.dim())?;
    if prior.dim() != spec.dim() {
        return Err(Error::Config(format!(
            "prior box has {} bounds for {} coefficients",
            prior.dim(),
            spec.dim()
        )));
    }
    let target = Target::new(spec, teacher, kind)?;
    let start = prior.center();
    if !target.cost(start.as_slice()).is_finite() {
        return Err(Error::Numerical("cost is not finite at the centre of the prior box".into()));
    }

    let burn_in = config.burn_in_steps();
    let widths = config.resolved_step_sizes(prior);
    let mut replicas = config
        .tau_ladder
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64 + 1);
            let record = k == 0;
            let capacity = if record { (config.n_steps - burn_in) as usize } else { 0 };
            Ok(Replica {
                chain: ChainState::new(start.clone(), tau, &target, prior)?,
                rng,
                widths: widths.clone(),
                caps: prior.upper().to_vec(),
                batch_accepts: vec![0; spec.dim()],
                batches: 0,
                adapt: config.adapt_step_sizes,
                record,
                draws: Vec::with_capacity(capacity * spec.dim()),
                costs: Vec::with_capacity(capacity),
                cost_sum: 0.0,
                cost_n: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut swap_rng = ChaCha8Rng::seed_from_u64(config.seed);
    swap_rng.set_stream(0);
    let mut swaps = SwapStats::new(replicas.len().saturating_sub(1));
    let mut parity = 0;
    let mut step = 0;
    while step < config.n_steps {
        let count = config.exchange_interval.min(config.n_steps - step);
        match execution {
            Execution::Serial => replicas
                .iter_mut()
                .for_each(|r| r.advance(step, count, burn_in, &target, prior)),
            Execution::Parallel => replicas
                .par_iter_mut()
                .for_each(|r| r.advance(step, count, burn_in, &target, prior)),
        }
        step += count;
        if count == config.exchange_interval && step < config.n_steps && replicas.len() > 1 {
            let mut chains: Vec<ChainState> = replicas.iter().map(|r| r.chain.clone()).collect();
            exchange_step(&mut chains, parity, &mut swaps, &mut swap_rng);
            for (r, c) in replicas.iter_mut().zip(chains) {
                r.chain = c;
            }
            parity ^= 1;
        }
    }

    let accept_rates = replicas.iter().map(|r| r.chain.acceptance_rate()).collect();
    let mean_costs = replicas.iter().map(|r| r.cost_sum / r.cost_n as f64).collect();
    let step_sizes = replicas.iter().map(|r| r.widths.clone()).collect();
    let cold = replicas.swap_remove(0);
    Ok(PosteriorSamples {
        dim: spec.dim(),
        draws: cold.draws,
        costs: cold.costs,
        tau: cold.chain.tau(),
        accept_rates,
        swap_rates: swaps.rates(),
        mean_costs,
        step_sizes,
    })
}

/// Mean of the draws, used as a cheap summary in tests and reports.
pub fn posterior_mean(samples: &PosteriorSamples) -> ParamVector {
    let n = samples.len().max(1) as f64;
    let mut mean = vec![0.0; samples.dim()];
    for d in samples.iter() {
        for (m, v) in mean.iter_mut().zip(d) {
            *m += v;
        }
    }
    ParamVector::from_vec_unchecked(mean.into_iter().map(|m| m / n).collect())
}
