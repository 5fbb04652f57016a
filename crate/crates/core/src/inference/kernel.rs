use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::cost::{PriorBox, Target};
use crate::error::{Error, Result};
use crate::model::ParamVector;

/// Folds `x` back into `[0, upper]` by mirror reflection at both walls.
pub fn reflect(x: f64, upper: f64) -> f64 {
    if (0.0..=upper).contains(&x) {
        return x;
    }
    let period = 2.0 * upper;
    let y = x.rem_euclid(period);
    if y > upper {
        period - y
    } else {
        y
    }
}

/// Gaussian random-walk proposal with per-component widths, reflected into the prior box.
///
/// Components with zero width are left untouched and consume no randomness.
pub fn propose<R: Rng + ?Sized>(
    params: &ParamVector,
    step_sizes: &[f64],
    prior: &PriorBox,
    rng: &mut R,
) -> ParamVector {
    let values = params
        .as_slice()
        .iter()
        .zip(step_sizes)
        .zip(prior.upper())
        .map(|((&c, &width), &upper)| {
            if width == 0.0 {
                c
            } else {
                let z: f64 = rng.sample(StandardNormal);
                reflect(c + width * z, upper)
            }
        })
        .collect();
    ParamVector::from_vec_unchecked(values)
}

/// Metropolis acceptance test for a cost change `delta` at temperature `tau`.
///
/// Downhill and level moves are accepted without drawing a random number.
#[inline]
pub(crate) fn accept<R: Rng + ?Sized>(delta: f64, tau: f64, rng: &mut R) -> bool {
    if delta <= 0.0 {
        return true;
    }
    rng.random::<f64>() < (-delta / tau).exp()
}

/// One Markov chain at a fixed temperature, with its cached cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    params: ParamVector,
    cost: f64,
    tau: f64,
    pub accept_count: u64,
    pub propose_count: u64,
}

impl ChainState {
    pub fn new(params: ParamVector, tau: f64, target: &Target, prior: &PriorBox) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {tau}")));
        }
        if params.len() != target.dim() || !prior.contains(params.as_slice()) {
            return Err(Error::Config("initial parameters lie outside the prior box".into()));
        }
        let cost = target.cost(params.as_slice());
        Ok(Self { params, cost, tau, accept_count: 0, propose_count: 0 })
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.propose_count == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.propose_count as f64
        }
    }

    pub(crate) fn reset_counters(&mut self) {
        self.accept_count = 0;
        self.propose_count = 0;
    }

    /// Exchanges positions (parameters and cached cost) with another chain; temperatures stay.
    pub(crate) fn swap_position(&mut self, other: &mut ChainState) {
        std::mem::swap(&mut self.params, &mut other.params);
        std::mem::swap(&mut self.cost, &mut other.cost);
    }

    /// Single-component update: moves coefficient `index` only.
    pub(crate) fn update_component<R: Rng + ?Sized>(
        &mut self,
        index: usize,
        width: f64,
        target: &Target,
        prior: &PriorBox,
        rng: &mut R,
    ) -> bool {
        self.propose_count += 1;
        let old = self.params[index];
        let z: f64 = rng.sample(StandardNormal);
        self.params.as_mut_slice()[index] = reflect(old + width * z, prior.upper()[index]);
        let new_cost = target.cost(self.params.as_slice());
        if accept(new_cost - self.cost, self.tau, rng) {
            self.cost = new_cost;
            self.accept_count += 1;
            true
        } else {
            self.params.as_mut_slice()[index] = old;
            false
        }
    }
}

/// Joint Metropolis step: proposes all components at once and accepts with
/// probability `min(1, exp(-(F_new - F_old)/τ))`. Returns whether the move was taken.
pub fn metropolis_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    target: &Target,
    prior: &PriorBox,
    step_sizes: &[f64],
    rng: &mut R,
) -> bool {
    state.propose_count += 1;
    let proposal = propose(&state.params, step_sizes, prior, rng);
    let new_cost = target.cost(proposal.as_slice());
    if accept(new_cost - state.cost, state.tau, rng) {
        state.params = proposal;
        state.cost = new_cost;
        state.accept_count += 1;
        true
    } else {
        false
    }
}
