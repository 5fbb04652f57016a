//! Fit artifacts: what a fit writes, how it is staged, and how it is read back.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use scalepred::analysis::{
    marginal_histogram, point_estimates, predict_band, prior_warnings, Hdr, PointEstimate, PredictionBand,
};
use scalepred::data::{parse_dataset, DataSet, Format};
use scalepred::inference::{run_remc_with, CostKind, Execution, PosteriorSamples, PriorBox};
use scalepred::model::ModelSpec;
use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use crate::config::{read_dataset, resolve_prior, sha256_hex, RunConfig, DATASET_FILE};
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const DRAWS_FILE: &str = "draws.csv";
pub const HISTOGRAMS_FILE: &str = "histograms.json";
pub const ESTIMATES_FILE: &str = "estimates.json";
pub const BAND_FILE: &str = "band.csv";

/// An output directory under construction.
///
/// Files go to a hidden sibling of the target which is renamed into place by
/// [`Staging::commit`]; dropping an uncommitted staging area deletes it, so a
/// failed run leaves nothing behind.
pub struct Staging {
    dir: TempDir,
    target: PathBuf,
    replace: bool,
}

impl Staging {
    pub fn new(target: &Path, replace: bool) -> Result<Self> {
        if target.exists() && !replace {
            return Err(CliError::Invalid(format!(
                "{} already exists; pass --force to replace it",
                target.display()
            )));
        }
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| CliError::io(&parent, e))?;
        let name = target.file_name().and_then(|n| n.to_str()).unwrap_or("out");
        let dir = tempfile::Builder::new()
            .prefix(&format!(".{name}."))
            .tempdir_in(&parent)
            .map_err(|e| CliError::io(&parent, e))?;
        Ok(Self { dir, target: target.to_path_buf(), replace })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn commit(self) -> Result<PathBuf> {
        if self.replace && self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| CliError::io(&self.target, e))?;
        }
        fs::rename(self.dir.path(), &self.target).map_err(|e| CliError::io(&self.target, e))?;
        // The directory has moved; the guard has nothing left to delete.
        let _ = self.dir.keep();
        Ok(self.target)
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(path, e))
}

/// Reproduction record of an artifact directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    /// The exact `config.toml` of the run.
    pub config: String,
    /// SHA-256 of every other file written, keyed by relative path.
    pub files: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub name: String,
    pub seed: u64,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: String) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config_sha256: sha256_hex(config.as_bytes()),
            config,
            files: BTreeMap::new(),
            cells: Vec::new(),
        }
    }

    /// Writes `contents` to `dir/name` and records its digest.
    pub fn add(&mut self, dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
        write_file(dir, name, contents)?;
        self.files.insert(name.to_string(), sha256_hex(contents));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_file(dir, MANIFEST_FILE, text.as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }
}

/// A fit with every input resolved.
#[derive(Debug, Clone)]
pub struct FitPlan {
    /// The configuration as stored in the artifact: data path `dataset.csv`,
    /// explicit teacher list, no output directory.
    pub config: RunConfig,
    pub data: DataSet,
    pub spec: ModelSpec,
    pub prior: PriorBox,
    pub grid: Vec<f64>,
}

impl FitPlan {
    pub fn load(config: &RunConfig) -> Result<Self> {
        let data = read_dataset(&config.dataset)?;
        Self::with_data(config, data)
    }

    pub fn with_data(config: &RunConfig, data: DataSet) -> Result<Self> {
        config.check_common()?;
        let spec = config.spec()?;
        let data = match &config.teacher {
            Some(nodes) => data.split_by_nodes(nodes)?,
            None => data,
        };
        let prior = resolve_prior(config.prior.as_deref(), &spec, &data)?;
        config.remc.validate(spec.dim())?;
        let grid = config.grid.resolve(&data)?;
        let mut stored = config.clone();
        stored.dataset = PathBuf::from(DATASET_FILE);
        stored.output = None;
        stored.teacher = Some(data.teacher().map(|o| o.nodes).collect());
        Ok(Self { config: stored, data, spec, prior, grid })
    }

    pub fn cost(&self) -> CostKind {
        self.config.cost
    }

    pub fn run(&self, execution: Execution) -> Result<FitOutcome> {
        let samples = run_remc_with(&self.spec, &self.data, self.cost(), &self.prior, &self.config.remc, execution)?;
        let estimates = point_estimates(&samples, self.config.bins, self.config.mass)?;
        let warnings = prior_warnings(&estimates, &self.prior);
        let band = predict_band(&samples, &self.spec, &self.grid, self.config.bins, self.config.mass)?;
        Ok(FitOutcome { samples, estimates, warnings, band })
    }

    /// Writes the complete artifact into `dir`, manifest last.
    pub fn write(&self, dir: &Path, outcome: &FitOutcome) -> Result<Manifest> {
        let config = self.config.to_toml();
        let mut manifest = Manifest::new("fit", self.config.remc.seed, config.clone());
        manifest.add(dir, CONFIG_FILE, config.as_bytes())?;
        manifest.add(dir, DATASET_FILE, self.data.to_csv().as_bytes())?;
        manifest.add(dir, DRAWS_FILE, draws_csv(&outcome.samples).as_bytes())?;
        manifest.add(dir, HISTOGRAMS_FILE, self.histograms_json(outcome)?.as_bytes())?;
        manifest.add(dir, ESTIMATES_FILE, self.estimates_json(outcome).as_bytes())?;
        manifest.add(dir, BAND_FILE, band_csv(&outcome.band).as_bytes())?;
        manifest.write(dir)?;
        Ok(manifest)
    }

    fn histograms_json(&self, outcome: &FitOutcome) -> Result<String> {
        let mut entries = Vec::with_capacity(self.spec.dim());
        for (i, term) in self.spec.terms().iter().enumerate() {
            let hist = marginal_histogram(&outcome.samples, i, self.config.bins)?;
            entries.push(HistogramEntry {
                coefficient: format!("c{}", i + 1),
                term: term.to_string(),
                edges: hist.edges().to_vec(),
                counts: hist.counts().to_vec(),
                hdr: outcome.estimates[i].hdr.clone(),
            });
        }
        Ok(pretty(&entries))
    }

    fn estimates_json(&self, outcome: &FitOutcome) -> String {
        let s = &outcome.samples;
        let coefficients = self
            .spec
            .terms()
            .iter()
            .zip(&outcome.estimates)
            .enumerate()
            .map(|(i, (term, e))| CoefficientEstimate {
                coefficient: format!("c{}", i + 1),
                term: term.to_string(),
                estimate: e.clone(),
            })
            .collect();
        pretty(&Estimates {
            model: self.spec.name(),
            cost: self.cost(),
            tau: s.tau,
            draws: s.len(),
            mass: self.config.mass,
            prior_upper: self.prior.upper().to_vec(),
            coefficients,
            warnings: outcome.warnings.clone(),
            accept_rates: s.accept_rates.clone(),
            swap_rates: s.swap_rates.clone(),
            mean_costs: s.mean_costs.clone(),
            step_sizes: s.step_sizes.clone(),
        })
    }
}

pub struct FitOutcome {
    pub samples: PosteriorSamples,
    pub estimates: Vec<PointEstimate>,
    pub warnings: Vec<String>,
    pub band: PredictionBand,
}

#[derive(Serialize)]
struct HistogramEntry {
    coefficient: String,
    term: String,
    edges: Vec<f64>,
    counts: Vec<u64>,
    hdr: Hdr,
}

#[derive(Serialize)]
struct CoefficientEstimate {
    coefficient: String,
    term: String,
    #[serde(flatten)]
    estimate: PointEstimate,
}

#[derive(Serialize)]
struct Estimates {
    model: String,
    cost: CostKind,
    tau: f64,
    draws: usize,
    mass: f64,
    prior_upper: Vec<f64>,
    coefficients: Vec<CoefficientEstimate>,
    warnings: Vec<String>,
    accept_rates: Vec<f64>,
    swap_rates: Vec<f64>,
    mean_costs: Vec<f64>,
    step_sizes: Vec<Vec<f64>>,
}

pub fn pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    text
}

/// One row per draw: `c1..cn,cost`.
pub fn draws_csv(samples: &PosteriorSamples) -> String {
    let mut out = String::with_capacity(samples.len() * 24 * (samples.dim() + 1));
    let header: Vec<String> = (1..=samples.dim()).map(|i| format!("c{i}")).collect();
    out.push_str(&header.join(","));
    out.push_str(",cost\n");
    for (row, cost) in samples.iter().zip(samples.costs()) {
        for v in row {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(&cost.to_string());
        out.push('\n');
    }
    out
}

pub fn band_csv(band: &PredictionBand) -> String {
    let mut out = String::from("P,median,hdr_low,hdr_high\n");
    for i in 0..band.len() {
        out.push_str(&format!("{},{},{},{}\n", band.grid[i], band.median[i], band.hdr_low[i], band.hdr_high[i]));
    }
    out
}

/// The pieces of a fit artifact needed for plotting.
pub struct PlotData {
    pub band: PredictionBand,
    pub data: DataSet,
}

impl PlotData {
    pub fn read(dir: &Path) -> Result<Self> {
        let band_path = dir.join(BAND_FILE);
        let data_path = dir.join(DATASET_FILE);
        if !band_path.is_file() || !data_path.is_file() {
            return Err(CliError::Invalid(format!("{} is not a fit artifact", dir.display())));
        }
        let text = fs::read(&data_path).map_err(|e| CliError::io(&data_path, e))?;
        let data = parse_dataset(text.as_slice(), Format::Csv, "dataset")?;
        let mut reader = csv::Reader::from_path(&band_path)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", band_path.display())))?;
        let mut band = PredictionBand { grid: vec![], median: vec![], hdr_low: vec![], hdr_high: vec![] };
        for row in reader.deserialize::<(f64, f64, f64, f64)>() {
            let (p, m, lo, hi) = row.map_err(|e| CliError::Invalid(format!("{}: {e}", band_path.display())))?;
            band.grid.push(p);
            band.median.push(m);
            band.hdr_low.push(lo);
            band.hdr_high.push(hi);
        }
        Ok(Self { band, data })
    }
}
