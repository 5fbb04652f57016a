//! Cost functions, the bounded uniform prior, the Metropolis kernel and the
//! replica-exchange driver.
//!
//! The posterior is `π(c | D) ∝ exp(-F(c)/τ)` on the box `[0, c_max]`, where
//! `F` is either the relative-error cost or the log-log cost. Replicas run at
//! every temperature of a ladder and swap positions periodically; only the
//! coldest replica's draws are kept.

mod cost;
mod kernel;
mod remc;

pub use cost::{cost, log_likelihood, CostKind, PriorBox, Target};
pub use kernel::{metropolis_step, propose, reflect, ChainState};
pub use remc::{
    default_tau_ladder, exchange_step, posterior_mean, run_remc, run_remc_with, swap_probability,
    Execution, PosteriorSamples, RemcConfig, SwapStats,
};
