//! The `scalepred` command-line tool.
//!
//! Each subcommand is a plain function so that tests can drive it without a
//! process boundary; `main` only parses arguments and maps errors onto exit
//! codes.

pub mod args;
pub mod artifact;
pub mod config;
mod error;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use scalepred::analysis::{cell_report, CellReport, ComparisonReport, FitCell, Histogram};
use scalepred::inference::{run_remc_with, Execution};
use scalepred::oracle::{grid_posterior, marginalize, tv_distance};
use serde::Serialize;

pub use args::{Cli, Command};
use args::{CompareArgs, ExportArgs, FitArgs, ValidateArgs};
use artifact::{pretty, CellEntry, FitPlan, Manifest, PlotData, Staging, CONFIG_FILE};
use config::{read_dataset, Cell, CompareConfig, DATASET_FILE};
pub use error::{CliError, Result, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const COST_COMPARISON_CSV: &str = "cost_comparison.csv";
pub const CELLS_DIR: &str = "cells";

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => cmd_fit(&args).map(|_| ()),
        Command::Compare(args) => cmd_compare(&args).map(|_| ()),
        Command::Validate(args) => cmd_validate(&args).map(|_| ()),
        Command::ExportPlot(args) => cmd_export_plot(&args).map(|_| ()),
    }
}

fn execution(serial: bool) -> Execution {
    if serial {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

/// Runs one fit and writes its artifact directory; returns its path.
pub fn cmd_fit(args: &FitArgs) -> Result<PathBuf> {
    let config = args.resolve()?;
    let output = config
        .output
        .clone()
        .ok_or_else(|| CliError::Invalid("no output directory; give --output or set `output`".into()))?;
    let plan = FitPlan::load(&config)?;
    let staging = Staging::new(&output, args.force)?;
    let outcome = plan.run(execution(args.run.serial))?;
    plan.write(staging.path(), &outcome)?;
    let dir = staging.commit()?;

    println!("{} fit of {} draws written to {}", plan.spec.name(), outcome.samples.len(), dir.display());
    for (i, e) in outcome.estimates.iter().enumerate() {
        println!(
            "  c{} ({}): median {:.6e}, HDR [{:.6e}, {:.6e}]",
            i + 1,
            plan.spec.terms()[i],
            e.median,
            e.hdr.lower(),
            e.hdr.upper()
        );
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    Ok(dir)
}

/// Runs an experiment matrix; returns the artifact path and the report.
pub fn cmd_compare(args: &CompareArgs) -> Result<(PathBuf, ComparisonReport)> {
    let mut config = CompareConfig::load(&args.config)?;
    if let Some(out) = &args.output {
        config.output = Some(out.clone());
    }
    if let Some(costs) = &args.costs {
        config.costs = costs.clone();
    }
    if let Some(bins) = args.bins {
        config.bins = bins;
    }
    args.sampler.apply(&mut config.remc);
    let output = config
        .output
        .clone()
        .ok_or_else(|| CliError::Invalid("no output directory; give --output or set `output`".into()))?;

    let data = read_dataset(&config.dataset)?;
    let cells = config.cells(&data)?;
    let staging = Staging::new(&output, args.force)?;
    let cells_dir = staging.path().join(CELLS_DIR);
    fs::create_dir(&cells_dir).map_err(|e| CliError::io(&cells_dir, e))?;

    let run_cell = |cell: &Cell| -> Result<CellReport> {
        compare_cell(cell, &data, &cells_dir, args.serial)
            .map_err(|e| CliError::Cell { cell: cell.name(), source: Box::new(e) })
    };
    let reports: Vec<CellReport> = if args.serial {
        cells.iter().map(run_cell).collect::<Result<_>>()?
    } else {
        cells.par_iter().map(run_cell).collect::<Result<_>>()?
    };
    let report = ComparisonReport { dataset: data.label().to_string(), cells: reports };

    let mut stored = config.clone();
    stored.dataset = PathBuf::from(DATASET_FILE);
    stored.output = None;
    let stored = stored.to_toml();
    let dir = staging.path();
    let mut manifest = Manifest::new("compare", config.remc.seed, stored.clone());
    manifest.add(dir, CONFIG_FILE, stored.as_bytes())?;
    manifest.add(dir, DATASET_FILE, data.to_csv().as_bytes())?;
    manifest.add(dir, REPORT_JSON, pretty(&report).as_bytes())?;
    manifest.add(dir, REPORT_CSV, report.to_csv().as_bytes())?;
    if let Some(table) = report.cost_comparison_csv() {
        manifest.add(dir, COST_COMPARISON_CSV, table.as_bytes())?;
    }
    for cell in &cells {
        let name = cell.name();
        let cell_manifest = Manifest::read(&cells_dir.join(&name))?;
        for (file, digest) in cell_manifest.files {
            manifest.files.insert(format!("{CELLS_DIR}/{name}/{file}"), digest);
        }
        manifest.cells.push(CellEntry { name, seed: cell.config.remc.seed });
    }
    manifest.write(dir)?;
    let dir = staging.commit()?;

    println!("{} cells written to {}", report.cells.len(), dir.display());
    for c in &report.cells {
        let coverage = c.test_coverage.map_or("-".to_string(), |v| format!("{v:.2}"));
        let err = c.mean_test_rel_error.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("  {:<4} {:<12} {:<8} test coverage {coverage:>5}  mean test rel. error {err}", c.model, c.split, c.cost);
    }
    Ok((dir, report))
}

fn compare_cell(cell: &Cell, data: &scalepred::data::DataSet, cells_dir: &Path, serial: bool) -> Result<CellReport> {
    let plan = FitPlan::with_data(&cell.config, data.clone())?;
    let outcome = plan.run(execution(serial))?;
    let dir = cells_dir.join(cell.name());
    fs::create_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
    plan.write(&dir, &outcome)?;
    for w in &outcome.warnings {
        eprintln!("warning: {}: {w}", cell.name());
    }
    Ok(cell_report(
        &FitCell {
            model: &cell.model,
            split: &cell.split,
            cost: cell.cost,
            spec: &plan.spec,
            data: &plan.data,
            samples: &outcome.samples,
        },
        plan.config.bins,
        plan.config.mass,
    )?)
}

/// Distance between one sampled marginal and its quadrature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalCheck {
    pub coefficient: String,
    pub term: String,
    pub tv_distance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub model: String,
    pub tau: f64,
    pub draws: usize,
    pub bins: usize,
    pub resolution: usize,
    pub threshold: f64,
    pub marginals: Vec<MarginalCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.marginals.iter().all(|m| m.passed)
    }
}

/// Cells of the quadrature that must carry 99% of each marginal before a
/// comparison at histogram resolution means anything.
pub const MIN_OCCUPIED_CELLS: usize = 20;

/// Compares every sampled marginal with the grid quadrature of the posterior.
///
/// Fails with exit code 3 when any distance reaches the threshold, and with
/// exit code 1 before sampling when the grid is too coarse to resolve the
/// posterior (narrow the prior box or raise the resolution).
pub fn cmd_validate(args: &ValidateArgs) -> Result<ValidationReport> {
    let config = args.run.resolve()?;
    let plan = FitPlan::load(&config)?;
    let remc = &plan.config.remc;
    let tau = remc.tau_ladder[0];
    let dim = plan.spec.dim();
    let grid = grid_posterior(&plan.spec, &plan.data, plan.cost(), &plan.prior, tau, &vec![args.resolution; dim])?;
    let references = (0..dim).map(|i| marginalize(&grid, i)).collect::<scalepred::Result<Vec<_>>>()?;
    for (i, reference) in references.iter().enumerate() {
        let cells = reference.occupied_cells(0.99);
        if cells < MIN_OCCUPIED_CELLS {
            return Err(CliError::Invalid(format!(
                "c{}: 99% of the posterior lies in {cells} of {} grid cells; \
                 narrow the prior bound (currently {:.6e}) or raise --resolution",
                i + 1,
                args.resolution,
                plan.prior.upper()[i]
            )));
        }
    }
    let samples = run_remc_with(&plan.spec, &plan.data, plan.cost(), &plan.prior, remc, execution(args.run.serial))?;
    let mut marginals = Vec::with_capacity(dim);
    for ((i, term), reference) in plan.spec.terms().iter().enumerate().zip(&references) {
        let hist = Histogram::spanning(&samples.column(i), plan.config.bins)?;
        let tv = tv_distance(&hist, reference);
        marginals.push(MarginalCheck {
            coefficient: format!("c{}", i + 1),
            term: term.to_string(),
            tv_distance: tv,
            passed: tv < args.threshold,
        });
    }
    let report = ValidationReport {
        model: plan.spec.name(),
        tau,
        draws: samples.len(),
        bins: plan.config.bins,
        resolution: args.resolution,
        threshold: args.threshold,
        marginals,
    };
    for m in &report.marginals {
        println!(
            "{} ({}): TV {:.4} {} {}",
            m.coefficient,
            m.term,
            m.tv_distance,
            if m.passed { "<" } else { ">=" },
            report.threshold
        );
    }
    if let Some(path) = &args.report {
        fs::write(path, pretty(&report)).map_err(|e| CliError::io(path, e))?;
    }
    if report.passed() {
        Ok(report)
    } else {
        Err(CliError::Check(format!("sampler disagrees with the quadrature beyond TV {}", report.threshold)))
    }
}

pub const CURVE_FILE: &str = "curve.dat";
pub const SCATTER_FILE: &str = "scatter.dat";
pub const SVG_FILE: &str = "band.svg";

/// Writes `curve.dat`, `scatter.dat` and optionally `band.svg`; returns the directory.
pub fn cmd_export_plot(args: &ExportArgs) -> Result<PathBuf> {
    if !args.artifact.is_dir() {
        return Err(CliError::Invalid(format!("artifact {} does not exist", args.artifact.display())));
    }
    let plot = PlotData::read(&args.artifact)?;
    let out = args.output.clone().unwrap_or_else(|| args.artifact.join("plot"));
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;

    let b = &plot.band;
    let mut curve = String::from("# P median hdr_low hdr_high\n");
    for i in 0..b.len() {
        curve.push_str(&format!("{} {} {} {}\n", b.grid[i], b.median[i], b.hdr_low[i], b.hdr_high[i]));
    }
    artifact::write_file(&out, CURVE_FILE, curve.as_bytes())?;

    let mut scatter = String::from("# P T role\n");
    for o in plot.data.observations() {
        scatter.push_str(&format!("{} {} {}\n", o.nodes, o.time, o.role));
    }
    artifact::write_file(&out, SCATTER_FILE, scatter.as_bytes())?;

    if args.svg {
        let title = args.artifact.file_name().and_then(|n| n.to_str()).unwrap_or("band");
        artifact::write_file(&out, SVG_FILE, svg::band_chart(b, &plot.data, title).as_bytes())?;
    }
    println!("plot files written to {}", out.display());
    Ok(out)
}
