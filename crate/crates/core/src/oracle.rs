//! Brute-force posterior on a grid, for checking the sampler on small models.
//!
//! The unnormalised density `exp(-F/τ)` is evaluated at the midpoint of every
//! cell of a uniform grid over the prior box and normalised by the Riemann
//! sum. Only models with up to three coefficients are accepted.

use serde::{Deserialize, Serialize};

use crate::analysis::Histogram;
use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::inference::{CostKind, PriorBox, Target};
use crate::model::ModelSpec;

pub const MAX_GRID_DIM: usize = 3;
pub const MIN_RESOLUTION: usize = 50;

/// Normalised posterior density on a uniform grid over the prior box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPosterior {
    /// Upper bound of each axis; axes start at zero.
    upper: Vec<f64>,
    resolution: Vec<usize>,
    /// Row-major density values (last axis fastest).
    density: Vec<f64>,
}

impl GridPosterior {
    pub fn dim(&self) -> usize {
        self.upper.len()
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        self.upper[axis] / self.resolution[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.cell_width(a)).product()
    }

    /// Cell-midpoint coordinates along `axis`.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        let w = self.cell_width(axis);
        (0..self.resolution[axis]).map(|i| (i as f64 + 0.5) * w).collect()
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `Σ density · cell volume`.
    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell_volume()
    }
}

/// Evaluates the posterior of `spec` on a grid with `resolution` cells per axis.
pub fn grid_posterior(
    spec: &ModelSpec,
    teacher: &DataSet,
    kind: CostKind,
    prior: &PriorBox,
    tau: f64,
    resolution: &[usize],
) -> Result<GridPosterior> {
    let dim = spec.dim();
    if dim > MAX_GRID_DIM {
        return Err(Error::Usage(format!(
            "grid oracle handles at most {MAX_GRID_DIM} coefficients, model {spec} has {dim}"
        )));
    }
    if resolution.len() != dim || prior.dim() != dim {
        return Err(Error::Usage("resolution and prior must match the model dimension".into()));
    }
    if let Some(r) = resolution.iter().find(|r| **r < MIN_RESOLUTION) {
        return Err(Error::Usage(format!("grid resolution must be at least {MIN_RESOLUTION}, got {r}")));
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    let target = Target::new(spec, teacher, kind)?;
    let widths: Vec<f64> = prior.upper().iter().zip(resolution).map(|(u, &r)| u / r as f64).collect();
    let cells: usize = resolution.iter().product();

    let mut costs = Vec::with_capacity(cells);
    let mut index = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    for _ in 0..cells {
        for a in 0..dim {
            point[a] = (index[a] as f64 + 0.5) * widths[a];
        }
        costs.push(target.cost(&point));
        for a in (0..dim).rev() {
            index[a] += 1;
            if index[a] < resolution[a] {
                break;
            }
            index[a] = 0;
        }
    }

    let floor = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(Error::Numerical("cost is infinite on the whole grid".into()));
    }
    let mut density: Vec<f64> = costs.iter().map(|c| (-(c - floor) / tau).exp()).collect();
    let volume: f64 = widths.iter().product();
    let norm = density.iter().sum::<f64>() * volume;
    density.iter_mut().for_each(|d| *d /= norm);
    Ok(GridPosterior { upper: prior.upper().to_vec(), resolution: resolution.to_vec(), density })
}

/// Piecewise-constant 1-D density on `[edges[0], edges[n]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityTable {
    pub fn integral(&self) -> f64 {
        self.density.iter().enumerate().map(|(i, d)| d * (self.edges[i + 1] - self.edges[i])).sum()
    }

    /// Probability mass inside `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let mut mass = 0.0;
        for (i, d) in self.density.iter().enumerate() {
            let overlap = hi.min(self.edges[i + 1]) - lo.max(self.edges[i]);
            if overlap > 0.0 {
                mass += d * overlap;
            }
        }
        mass
    }

    /// Fewest cells that together hold at least `mass` of the probability.
    ///
    /// A marginal concentrated in a handful of cells is too coarse to
    /// compare a finely binned histogram against.
    pub fn occupied_cells(&self, mass: f64) -> usize {
        let mut masses: Vec<f64> =
            self.density.iter().enumerate().map(|(i, d)| d * (self.edges[i + 1] - self.edges[i])).collect();
        masses.sort_unstable_by(|a, b| b.total_cmp(a));
        let target = mass * masses.iter().sum::<f64>();
        let mut acc = 0.0;
        for (i, m) in masses.iter().enumerate() {
            acc += m;
            if acc >= target {
                return i + 1;
            }
        }
        masses.len()
    }

    /// Bin masses after integrating over the given edges.
    pub fn rebin(&self, edges: &[f64]) -> Vec<f64> {
        edges.windows(2).map(|w| self.mass_between(w[0], w[1])).collect()
    }
}

/// Marginal density of coefficient `index`, summing over all other axes.
pub fn marginalize(gp: &GridPosterior, index: usize) -> Result<DensityTable> {
    if index >= gp.dim() {
        return Err(Error::Usage(format!("axis {index} out of range for a {}-D grid", gp.dim())));
    }
    let res = gp.resolution();
    let inner: usize = res[index + 1..].iter().product();
    let n = res[index];
    let mut marginal = vec![0.0; n];
    for (flat, d) in gp.density.iter().enumerate() {
        marginal[(flat / inner) % n] += d;
    }
    let w = gp.cell_width(index);
    let other_volume = gp.cell_volume() / w;
    marginal.iter_mut().for_each(|m| *m *= other_volume);
    let norm: f64 = marginal.iter().sum::<f64>() * w;
    marginal.iter_mut().for_each(|m| *m /= norm);
    let edges = (0..=n).map(|i| if i == n { gp.upper[index] } else { i as f64 * w }).collect();
    Ok(DensityTable { edges, density: marginal })
}

/// Total-variation distance between a histogram and a reference density.
/// Reference mass falling outside the histogram's range counts fully.
pub fn tv_distance(hist: &Histogram, reference: &DensityTable) -> f64 {
    let p = hist.masses();
    let q = reference.rebin(hist.edges());
    let inside: f64 = q.iter().sum();
    let outside = (reference.integral() - inside).max(0.0);
    let d: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * (d + outside)).clamp(0.0, 1.0)
}

/// Total-variation distance between two density tables, measured on the edges of `coarse`.
pub fn tv_between(coarse: &DensityTable, fine: &DensityTable) -> f64 {
    let p = coarse.rebin(&coarse.edges);
    let q = fine.rebin(&coarse.edges);
    0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
