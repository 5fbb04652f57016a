//! Posterior summaries: marginal histograms, highest density regions,
//! predictive bands over node counts, and model-comparison reports.
//!
//! Highest density regions are built at histogram-bin granularity: bins are
//! taken in order of decreasing density until they hold the requested mass,
//! and neighbouring bins are merged into intervals. Multimodal marginals
//! therefore produce several intervals.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataSet, Role};
use crate::error::{Error, Result};
use crate::inference::{CostKind, PosteriorSamples, PriorBox};
use crate::model::ModelSpec;

pub const DEFAULT_BINS: usize = 200;
pub const DEFAULT_MASS: f64 = 0.95;

/// Equal-width histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl Histogram {
    /// Bins `values` into `n_bins` equal-width bins on `[lo, hi]`. Values
    /// outside the range are clamped into the first or last bin.
    pub fn new(values: &[f64], n_bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Usage("cannot histogram an empty sample".into()));
        }
        if n_bins < 2 {
            return Err(Error::Usage(format!("need at least 2 bins, got {n_bins}")));
        }
        let hi = widen(lo, hi);
        let edges: Vec<f64> = (0..=n_bins)
            .map(|i| if i == n_bins { hi } else { lo + (hi - lo) * (i as f64 / n_bins as f64) })
            .collect();
        let scale = n_bins as f64 / (hi - lo);
        let mut counts = vec![0u64; n_bins];
        for &v in values {
            let b = ((v - lo) * scale).floor();
            let b = if b < 0.0 { 0 } else { (b as usize).min(n_bins - 1) };
            counts[b] += 1;
        }
        Ok(Self { edges, counts })
    }

    /// Histogram over `[min(values), max(values)]`.
    pub fn spanning(values: &[f64], n_bins: usize) -> Result<Self> {
        let (lo, hi) = min_max(values);
        Self::new(values, n_bins, lo, hi)
    }

    /// Builds a histogram from explicit edges and counts.
    pub fn from_counts(edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if edges.len() != counts.len() + 1 || counts.is_empty() {
            return Err(Error::Usage("histogram needs one more edge than bins".into()));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Usage("histogram edges must be strictly ascending".into()));
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::Usage("histogram is empty".into()));
        }
        Ok(Self { edges, counts })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn width(&self, bin: usize) -> f64 {
        self.edges[bin + 1] - self.edges[bin]
    }

    pub fn center(&self, bin: usize) -> f64 {
        0.5 * (self.edges[bin] + self.edges[bin + 1])
    }

    /// Probability mass of each bin.
    pub fn masses(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Normalised density of each bin; integrates to one over the support.
    pub fn densities(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts.iter().enumerate().map(|(i, &c)| c as f64 / (n * self.width(i))).collect()
    }

    /// Index of the densest bin (the first one on ties).
    pub fn mode_bin(&self) -> usize {
        let d = self.densities();
        let mut best = 0;
        for (i, v) in d.iter().enumerate() {
            if *v > d[best] {
                best = i;
            }
        }
        best
    }
}

fn widen(lo: f64, hi: f64) -> f64 {
    if hi > lo {
        hi
    } else {
        lo + lo.abs().max(1.0) * 1e-9
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// One contiguous piece of a highest density region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdrInterval {
    pub lower: f64,
    pub upper: f64,
    /// Probability mass inside this interval.
    pub mass: f64,
}

/// Highest density region as a union of intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hdr {
    pub intervals: Vec<HdrInterval>,
    /// Total mass of all intervals.
    pub mass: f64,
}

impl Hdr {
    fn point(v: f64) -> Self {
        Self { intervals: vec![HdrInterval { lower: v, upper: v, mass: 1.0 }], mass: 1.0 }
    }

    pub fn lower(&self) -> f64 {
        self.intervals[0].lower
    }

    pub fn upper(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].upper
    }

    pub fn is_contiguous(&self) -> bool {
        self.intervals.len() == 1
    }

    /// Total length of the region.
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|i| i.upper - i.lower).sum()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.intervals.iter().any(|i| i.lower <= v && v <= i.upper)
    }
}

/// Bins making up the highest density region of `hist`, in ascending index order.
pub fn hdr_bins(hist: &Histogram, mass: f64) -> Vec<usize> {
    let densities = hist.densities();
    let mut order: Vec<usize> = (0..hist.n_bins()).collect();
    order.sort_by(|&a, &b| densities[b].partial_cmp(&densities[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let need = mass * hist.total() as f64 * (1.0 - 1e-12);
    let mut taken = 0u64;
    let mut chosen = Vec::new();
    for b in order {
        if taken as f64 >= need {
            break;
        }
        taken += hist.counts()[b];
        chosen.push(b);
    }
    chosen.sort_unstable();
    chosen
}

/// Highest density region holding at least `mass` of the histogram.
pub fn hdr(hist: &Histogram, mass: f64) -> Hdr {
    let bins = hdr_bins(hist, mass);
    let total = hist.total() as f64;
    let mut intervals: Vec<HdrInterval> = Vec::new();
    let mut prev: Option<usize> = None;
    for b in bins {
        let m = hist.counts()[b] as f64 / total;
        match (prev, intervals.last_mut()) {
            (Some(p), Some(last)) if p + 1 == b => {
                last.upper = hist.edges()[b + 1];
                last.mass += m;
            }
            _ => intervals.push(HdrInterval { lower: hist.edges()[b], upper: hist.edges()[b + 1], mass: m }),
        }
        prev = Some(b);
    }
    let mass = intervals.iter().map(|i| i.mass).sum();
    Hdr { intervals, mass }
}

/// HDR of a raw sample; a sample with a single distinct value yields the point itself.
pub fn sample_hdr(values: &[f64], n_bins: usize, mass: f64) -> Result<Hdr> {
    let (lo, hi) = min_max(values);
    if values.is_empty() {
        return Err(Error::Usage("cannot summarize an empty sample".into()));
    }
    if lo == hi {
        return Ok(Hdr::point(lo));
    }
    Ok(hdr(&Histogram::new(values, n_bins, lo, hi)?, mass))
}

/// Empirical median (mean of the two central values for even sizes). Reorders `values`.
pub fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    assert!(n > 0, "median of an empty sample");
    let (_, upper, _) = values.select_nth_unstable_by(n / 2, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Empirical quantile by nearest rank. Reorders `values`.
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    let n = values.len();
    assert!(n > 0, "quantile of an empty sample");
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    *values.select_nth_unstable_by(rank, f64::total_cmp).1
}

/// Marginal histogram of coefficient `index`, with linear bins on `[0, max draw]`.
pub fn marginal_histogram(samples: &PosteriorSamples, index: usize, n_bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::Usage("posterior sample is empty".into()));
    }
    if index >= samples.dim() {
        return Err(Error::Usage(format!("coefficient index {index} out of range")));
    }
    let column = samples.column(index);
    let (_, hi) = min_max(&column);
    Histogram::new(&column, n_bins, 0.0, hi)
}

/// Summary of one coefficient's marginal posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    /// Centre of the densest histogram bin.
    pub mode: f64,
    pub median: f64,
    pub mean: f64,
    pub p99: f64,
    pub hdr: Hdr,
}

pub fn point_estimates(samples: &PosteriorSamples, n_bins: usize, mass: f64) -> Result<Vec<PointEstimate>> {
    (0..samples.dim())
        .map(|i| {
            let hist = marginal_histogram(samples, i, n_bins)?;
            let mut column = samples.column(i);
            let mean = column.iter().sum::<f64>() / column.len() as f64;
            let (lo, hi) = min_max(&column);
            let (mode, region) = if lo == hi {
                (lo, Hdr::point(lo))
            } else {
                (hist.center(hist.mode_bin()), hdr(&hist, mass))
            };
            Ok(PointEstimate {
                mode,
                median: median(&mut column),
                mean,
                p99: quantile(&mut column, 0.99),
                hdr: region,
            })
        })
        .collect()
}

/// Warnings for coefficients whose posterior presses against the prior's upper bound.
pub fn prior_warnings(estimates: &[PointEstimate], prior: &PriorBox) -> Vec<String> {
    estimates
        .iter()
        .zip(prior.upper())
        .enumerate()
        .filter(|(_, (e, &m))| e.p99 > 0.9 * m)
        .map(|(i, (e, &m))| {
            format!(
                "c{}: 99th percentile {:.6e} exceeds 90% of the prior bound {:.6e}; widen the prior",
                i + 1,
                e.p99,
                m
            )
        })
        .collect()
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    spaced(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    spaced(lo, hi, n)
}

fn spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * (i as f64 / (n - 1) as f64)).collect(),
    }
}

/// Pointwise median and HDR bounds of the predicted elapsed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionBand {
    pub grid: Vec<f64>,
    pub median: Vec<f64>,
    pub hdr_low: Vec<f64>,
    pub hdr_high: Vec<f64>,
}

impl PredictionBand {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Band width in `ln T` at each grid point.
    pub fn log_widths(&self) -> Vec<f64> {
        self.hdr_low.iter().zip(&self.hdr_high).map(|(l, h)| h.ln() - l.ln()).collect()
    }
}

/// Predicted elapsed times `T(P; c)` of every draw at one node count.
pub fn predictive_sample(samples: &PosteriorSamples, spec: &ModelSpec, nodes: f64) -> Result<Vec<f64>> {
    if samples.dim() != spec.dim() {
        return Err(Error::Usage(format!(
            "draws have {} coefficients but model {} has {}",
            samples.dim(),
            spec,
            spec.dim()
        )));
    }
    let basis = spec.basis(nodes)?;
    Ok(samples.iter().map(|d| d.iter().zip(&basis).map(|(c, b)| c * b).sum()).collect())
}

/// One grid point of a band: `(median, low, high)`.
fn band_point(samples: &PosteriorSamples, spec: &ModelSpec, nodes: f64, n_bins: usize, mass: f64) -> Result<(f64, f64, f64)> {
    let mut values = predictive_sample(samples, spec, nodes)?;
    let region = sample_hdr(&values, n_bins, mass)?;
    Ok((median(&mut values), region.lower(), region.upper()))
}

pub fn predict_band(
    samples: &PosteriorSamples,
    spec: &ModelSpec,
    grid: &[f64],
    n_bins: usize,
    mass: f64,
) -> Result<PredictionBand> {
    if samples.is_empty() {
        return Err(Error::Usage("posterior sample is empty".into()));
    }
    if let Some(p) = grid.iter().find(|p| !(**p >= 1.0)) {
        return Err(Error::Domain(format!("prediction grid points must be at least 1, got {p}")));
    }
    let points = grid
        .par_iter()
        .map(|&p| band_point(samples, spec, p, n_bins, mass))
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictionBand {
        grid: grid.to_vec(),
        median: points.iter().map(|p| p.0).collect(),
        hdr_low: points.iter().map(|p| p.1).collect(),
        hdr_high: points.iter().map(|p| p.2).collect(),
    })
}

/// A fitted model/split/cost combination to be compared.
#[derive(Debug, Clone, Copy)]
pub struct FitCell<'a> {
    pub model: &'a str,
    pub split: &'a str,
    pub cost: CostKind,
    pub spec: &'a ModelSpec,
    /// The data set with the roles used for this fit.
    pub data: &'a DataSet,
    pub samples: &'a PosteriorSamples,
}

/// Prediction versus measurement at one node count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    #[serde(rename = "P")]
    pub nodes: u32,
    pub role: Role,
    pub observed: f64,
    pub median: f64,
    pub hdr_low: f64,
    pub hdr_high: f64,
    /// `|median - observed| / observed`
    pub rel_error: f64,
    pub covered: bool,
    pub band_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub model: String,
    pub split: String,
    pub cost: CostKind,
    pub teacher_nodes: Vec<u32>,
    pub points: Vec<PointReport>,
    /// Fraction of test points inside the band; `None` without test points.
    pub test_coverage: Option<f64>,
    pub mean_test_rel_error: Option<f64>,
    pub max_test_rel_error: Option<f64>,
}

impl CellReport {
    pub fn point(&self, nodes: u32) -> Option<&PointReport> {
        self.points.iter().find(|p| p.nodes == nodes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub dataset: String,
    pub cells: Vec<CellReport>,
}

pub fn cell_report(cell: &FitCell<'_>, n_bins: usize, mass: f64) -> Result<CellReport> {
    let mut points = Vec::with_capacity(cell.data.len());
    for o in cell.data.observations() {
        let (median, low, high) = band_point(cell.samples, cell.spec, o.nodes as f64, n_bins, mass)?;
        points.push(PointReport {
            nodes: o.nodes,
            role: o.role,
            observed: o.time,
            median,
            hdr_low: low,
            hdr_high: high,
            rel_error: (median - o.time).abs() / o.time,
            covered: low <= o.time && o.time <= high,
            band_width: high - low,
        });
    }
    let test: Vec<&PointReport> = points.iter().filter(|p| p.role == Role::Test).collect();
    let (coverage, mean_err, max_err) = if test.is_empty() {
        (None, None, None)
    } else {
        let n = test.len() as f64;
        (
            Some(test.iter().filter(|p| p.covered).count() as f64 / n),
            Some(test.iter().map(|p| p.rel_error).sum::<f64>() / n),
            Some(test.iter().map(|p| p.rel_error).fold(0.0, f64::max)),
        )
    };
    Ok(CellReport {
        model: cell.model.to_string(),
        split: cell.split.to_string(),
        cost: cell.cost,
        teacher_nodes: cell.data.teacher().map(|o| o.nodes).collect(),
        points,
        test_coverage: coverage,
        mean_test_rel_error: mean_err,
        max_test_rel_error: max_err,
    })
}

/// Compares fits by their median error, band coverage and band width at every data point.
pub fn compare_report(label: &str, cells: &[FitCell<'_>], n_bins: usize, mass: f64) -> Result<ComparisonReport> {
    if cells.is_empty() {
        return Err(Error::Usage("comparison needs at least one fit".into()));
    }
    let cells = cells.iter().map(|c| cell_report(c, n_bins, mass)).collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport { dataset: label.to_string(), cells })
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Long format: one row per cell and data point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,split,cost,P,role,observed,median,hdr_low,hdr_high,rel_error,covered,band_width\n");
        for c in &self.cells {
            for p in &c.points {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    c.model, c.split, c.cost, p.nodes, p.role, p.observed, p.median, p.hdr_low, p.hdr_high,
                    p.rel_error, p.covered, p.band_width
                ));
            }
        }
        out
    }

    /// Test-point relative errors side by side for every cost kind present,
    /// one row per (model, split, P). `None` when only one cost kind was run.
    pub fn cost_comparison_csv(&self) -> Option<String> {
        let kinds: Vec<CostKind> = [CostKind::Relative, CostKind::Loglog]
            .into_iter()
            .filter(|k| self.cells.iter().any(|c| c.cost == *k))
            .collect();
        if kinds.len() < 2 {
            return None;
        }
        let mut out = String::from("model,split,P,observed");
        for k in &kinds {
            out.push_str(&format!(",median_{k},rel_error_{k}"));
        }
        out.push('\n');
        let mut keys: Vec<(&str, &str)> = Vec::new();
        for c in &self.cells {
            if !keys.contains(&(&c.model, &c.split)) {
                keys.push((&c.model, &c.split));
            }
        }
        for (model, split) in keys {
            let by_kind: Vec<Option<&CellReport>> = kinds
                .iter()
                .map(|k| self.cells.iter().find(|c| c.model == model && c.split == split && c.cost == *k))
                .collect();
            let Some(first) = by_kind.iter().flatten().next() else { continue };
            for p in first.points.iter().filter(|p| p.role == Role::Test) {
                out.push_str(&format!("{model},{split},{},{}", p.nodes, p.observed));
                for cell in &by_kind {
                    match cell.and_then(|c| c.point(p.nodes)) {
                        Some(q) => out.push_str(&format!(",{},{}", q.median, q.rel_error)),
                        None => out.push_str(",,"),
                    }
                }
                out.push('\n');
            }
        }
        Some(out)
    }

    /// Test coverage arranged as models (rows) × splits (columns), for one cost kind.
    pub fn coverage_matrix(&self, cost: CostKind) -> (Vec<String>, Vec<String>, Vec<Vec<Option<f64>>>) {
        let mut models = BTreeSet::new();
        let mut splits: Vec<String> = Vec::new();
        for c in self.cells.iter().filter(|c| c.cost == cost) {
            models.insert(c.model.clone());
            if !splits.contains(&c.split) {
                splits.push(c.split.clone());
            }
        }
        let models: Vec<String> = models.into_iter().collect();
        let table = models
            .iter()
            .map(|m| {
                splits
                    .iter()
                    .map(|s| {
                        self.cells
                            .iter()
                            .find(|c| &c.model == m && &c.split == s && c.cost == cost)
                            .and_then(|c| c.test_coverage)
                    })
                    .collect()
            })
            .collect();
        (models, splits, table)
    }
}
