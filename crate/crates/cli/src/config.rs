//! Run configurations and their TOML form.
//!
//! A fit is described by a [`RunConfig`]; an experiment matrix by a
//! [`CompareConfig`], which expands into one `RunConfig` per cell. Relative
//! dataset paths are resolved against the directory of the config file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use scalepred::analysis::{linear_grid, log_grid, DEFAULT_BINS, DEFAULT_MASS};
use scalepred::data::{parse_dataset, DataSet, Format};
use scalepred::inference::{CostKind, PriorBox, RemcConfig};
use scalepred::model::{ModelContext, ModelSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Name under which an artifact stores its copy of the data.
pub const DATASET_FILE: &str = "dataset.csv";

/// Matrix size and cores per node, needed by the deceleration term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextConfig {
    pub matrix_size: u64,
    pub cores_per_node: u64,
}

impl ContextConfig {
    pub fn resolve(&self) -> Result<ModelContext> {
        Ok(ModelContext::new(self.matrix_size, self.cores_per_node)?)
    }
}

/// Node counts at which the prediction band is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Defaults to the smallest node count in the data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    /// Defaults to the largest node count in the data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    pub points: usize,
    pub log: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { min: None, max: None, points: 100, log: true }
    }
}

impl GridConfig {
    pub fn resolve(&self, data: &DataSet) -> Result<Vec<f64>> {
        let (lo, hi) = data.node_range();
        let min = self.min.unwrap_or(lo as f64);
        let max = self.max.unwrap_or(hi as f64);
        if !(min >= 1.0 && max >= min && max.is_finite()) {
            return Err(CliError::Invalid(format!("grid range [{min}, {max}] must satisfy 1 <= min <= max")));
        }
        if self.points < 2 && min != max {
            return Err(CliError::Invalid("grid needs at least two points".into()));
        }
        if self.points == 0 {
            return Err(CliError::Invalid("grid needs at least one point".into()));
        }
        Ok(if self.log { log_grid(min, max, self.points) } else { linear_grid(min, max, self.points) })
    }
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

fn default_mass() -> f64 {
    DEFAULT_MASS
}

/// Everything one fit needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    /// `3TM`..`6TM` or an explicit term list such as `T1+T2`.
    pub model: String,
    /// Teacher node counts; when absent the roles in the data file are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher: Option<Vec<u32>>,
    #[serde(default)]
    pub cost: CostKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_mass")]
    pub mass: f64,
    /// Upper prior bounds, one per coefficient; data-derived when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub remc: RemcConfig,
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>, model: impl Into<String>) -> Self {
        Self {
            dataset: dataset.into(),
            model: model.into(),
            teacher: None,
            cost: CostKind::default(),
            output: None,
            bins: DEFAULT_BINS,
            mass: DEFAULT_MASS,
            prior: None,
            context: None,
            grid: GridConfig::default(),
            remc: RemcConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut config: Self = load_toml(path)?;
        config.dataset = relative_to(path, &config.dataset);
        if let Some(out) = &config.output {
            config.output = Some(relative_to(path, out));
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        let ctx = self.context.as_ref().map(ContextConfig::resolve).transpose()?;
        Ok(ModelSpec::parse(&self.model, ctx)?)
    }

    pub fn check_common(&self) -> Result<()> {
        check_seed(self.remc.seed)?;
        check_summary(self.bins, self.mass)
    }
}

/// A named teacher split: either the `k` smallest node counts or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Split {
    Count(usize),
    Nodes(Vec<u32>),
}

impl Split {
    pub fn teacher_nodes(&self, data: &DataSet) -> Result<Vec<u32>> {
        match self {
            Split::Count(k) => Ok(data.smallest_nodes(*k)?),
            Split::Nodes(nodes) => Ok(nodes.clone()),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Count(k) => write!(f, "{k}"),
            Split::Nodes(nodes) => {
                let parts: Vec<String> = nodes.iter().map(u32::to_string).collect();
                f.write_str(&parts.join("-"))
            }
        }
    }
}

/// Models crossed with splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellGroup {
    pub models: Vec<String>,
    pub splits: Vec<Split>,
}

/// An experiment matrix: every group's models × splits, each under every cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub dataset: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_costs")]
    pub costs: Vec<CostKind>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    /// `remc.seed` is the base seed from which cell seeds are derived.
    #[serde(default)]
    pub remc: RemcConfig,
    #[serde(rename = "group")]
    pub groups: Vec<CellGroup>,
}

fn default_costs() -> Vec<CostKind> {
    vec![CostKind::Relative]
}

/// One expanded matrix cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub model: String,
    pub split: String,
    pub cost: CostKind,
    pub config: RunConfig,
}

impl Cell {
    /// Directory name of the cell inside a comparison artifact.
    pub fn name(&self) -> String {
        format!("{}_{}_{}", self.model, self.split, self.cost)
    }
}

impl CompareConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut config: Self = load_toml(path)?;
        config.dataset = relative_to(path, &config.dataset);
        if let Some(out) = &config.output {
            config.output = Some(relative_to(path, out));
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("compare config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))
    }

    /// Expands the matrix in group, model, split, cost order.
    pub fn cells(&self, data: &DataSet) -> Result<Vec<Cell>> {
        check_seed(self.remc.seed)?;
        check_summary(self.bins, self.mass)?;
        if self.costs.is_empty() {
            return Err(CliError::Invalid("compare needs at least one cost kind".into()));
        }
        let mut cells = Vec::new();
        for group in &self.groups {
            for model in &group.models {
                for split in &group.splits {
                    let split_name = split.to_string();
                    let teacher = split.teacher_nodes(data)?;
                    for &cost in &self.costs {
                        let mut remc = self.remc.clone();
                        remc.seed = derive_seed(self.remc.seed, model, &split_name);
                        let config = RunConfig {
                            dataset: self.dataset.clone(),
                            model: model.clone(),
                            teacher: Some(teacher.clone()),
                            cost,
                            output: None,
                            bins: self.bins,
                            mass: self.mass,
                            prior: None,
                            context: self.context,
                            grid: self.grid.clone(),
                            remc,
                        };
                        let cell = Cell { model: model.clone(), split: split_name.clone(), cost, config };
                        if cells.iter().any(|c: &Cell| c.name() == cell.name()) {
                            return Err(CliError::Invalid(format!("cell {} appears twice", cell.name())));
                        }
                        cells.push(cell);
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(CliError::Invalid("compare needs at least one model and split".into()));
        }
        Ok(cells)
    }
}

/// Seed of a matrix cell: the first 63 bits of `SHA-256(base ‖ model ‖ 0 ‖ split)`.
///
/// The cost kind is deliberately left out so that the two costs of one
/// model/split see the same random stream. 63 bits keep the seed a valid
/// TOML integer.
pub fn derive_seed(base: u64, model: &str, split: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(model.as_bytes());
    hasher.update([0u8]);
    hasher.update(split.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head) >> 1
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_dataset(path: &Path) -> Result<DataSet> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    Ok(parse_dataset(std::io::BufReader::new(file), Format::from_path(path), label)?)
}

/// Resolves the prior for `spec`, checking overrides against its dimension.
pub fn resolve_prior(overrides: Option<&[f64]>, spec: &ModelSpec, teacher: &DataSet) -> Result<PriorBox> {
    match overrides {
        Some(bounds) if bounds.len() != spec.dim() => Err(CliError::Invalid(format!(
            "prior lists {} bounds but model {spec} has {} coefficients",
            bounds.len(),
            spec.dim()
        ))),
        Some(bounds) => Ok(PriorBox::new(bounds.to_vec())?),
        None => Ok(PriorBox::default_for(spec, teacher)?),
    }
}

fn check_seed(seed: u64) -> Result<()> {
    if seed > i64::MAX as u64 {
        return Err(CliError::Invalid(format!("seed {seed} does not fit in 63 bits")));
    }
    Ok(())
}

fn check_summary(bins: usize, mass: f64) -> Result<()> {
    if bins == 0 {
        return Err(CliError::Invalid("histograms need at least one bin".into()));
    }
    if !(mass > 0.0 && mass < 1.0) {
        return Err(CliError::Invalid(format!("HDR mass must lie in (0, 1), got {mass}")));
    }
    Ok(())
}

fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn relative_to(config_path: &Path, target: &Path) -> PathBuf {
    match config_path.parent() {
        Some(dir) if target.is_relative() => dir.join(target),
        _ => target.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use scalepred::data::{Observation, Role};

    fn seven() -> DataSet {
        let obs = [4u32, 16, 64, 256, 1024, 4096, 10000]
            .iter()
            .map(|&p| Observation::new(p, 4000.0 / p as f64 + 5.0, Role::Teacher))
            .collect();
        DataSet::new("seven", obs).unwrap()
    }

    #[test]
    fn run_config_round_trips() {
        let mut config = RunConfig::new("data.csv", "6TM");
        config.teacher = Some(vec![4, 16, 64]);
        config.prior = Some(vec![1.5e4, 0.1 + 0.2, 3.0, 4.0, 5.0, 6.0]);
        config.context = Some(ContextConfig { matrix_size: 22500, cores_per_node: 8 });
        config.grid.min = Some(2.0);
        config.remc.step_sizes = Some(vec![1.0; 6]);
        config.remc.seed = i64::MAX as u64;
        let text = config.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), config);
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let config = RunConfig::from_toml("dataset = \"d.csv\"\nmodel = \"3TM\"\n").unwrap();
        assert_eq!(config, RunConfig::new("d.csv", "3TM"));
        assert_eq!(config.remc.n_steps, 1_000_000);
        assert!(RunConfig::from_toml("dataset = \"d.csv\"\nmodel = \"3TM\"\nsteps = 3\n").is_err());
    }

    #[test]
    fn matrix_expands_like_the_figure() {
        let text = r#"
dataset = "d.csv"
context = { matrix_size = 22500, cores_per_node = 8 }

[[group]]
models = ["3TM", "4TM", "5TM"]
splits = [7, 5, 3]

[[group]]
models = ["6TM"]
splits = [7, 6]
"#;
        let config = CompareConfig::from_toml(text).unwrap();
        let cells = config.cells(&seven()).unwrap();
        assert_eq!(cells.len(), 11);
        assert_eq!(cells[0].name(), "3TM_7_relative");
        let six = cells.iter().find(|c| c.name() == "6TM_6_relative").unwrap();
        assert_eq!(six.config.teacher.as_deref(), Some(&[4, 16, 64, 256, 1024, 4096][..]));
        assert_eq!(CompareConfig::from_toml(&config.to_toml()).unwrap(), config);
    }

    #[test]
    fn cell_seeds_ignore_cost_only() {
        let text = r#"
dataset = "d.csv"
costs = ["relative", "loglog"]
[[group]]
models = ["3TM", "4TM"]
splits = [7, [4, 16, 64]]
"#;
        let cells = CompareConfig::from_toml(text).unwrap().cells(&seven()).unwrap();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0].config.remc.seed, cells[1].config.remc.seed);
        let mut seeds: Vec<u64> = cells.iter().step_by(2).map(|c| c.config.remc.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 4);
        assert_eq!(cells[2].split, "4-16-64");
        assert!(seeds.iter().all(|s| *s <= i64::MAX as u64));
    }

    #[test]
    fn duplicate_cells_are_rejected() {
        let text = "dataset = \"d.csv\"\n[[group]]\nmodels = [\"3TM\", \"3TM\"]\nsplits = [3]\n";
        assert!(CompareConfig::from_toml(text).unwrap().cells(&seven()).is_err());
    }

    #[test]
    fn default_grid_spans_the_data() {
        let grid = GridConfig::default().resolve(&seven()).unwrap();
        assert_eq!(grid.len(), 100);
        assert!((grid[0] - 4.0).abs() < 1e-9 && (grid[99] - 10000.0).abs() < 1e-6);
        let bad = GridConfig { min: Some(0.5), ..GridConfig::default() };
        assert!(bad.resolve(&seven()).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        assert_eq!(relative_to(Path::new("/a/b/run.toml"), Path::new("d.csv")), PathBuf::from("/a/b/d.csv"));
        assert_eq!(relative_to(Path::new("/a/b/run.toml"), Path::new("/d.csv")), PathBuf::from("/d.csv"));
    }
}
