//! Strong-scaling performance prediction by Bayesian inference.
//!
//! Elapsed times `T(P)` measured at a few node counts are fitted with an
//! additive performance model whose coefficients are sampled by
//! replica-exchange Monte Carlo. The posterior is summarised by marginal
//! histograms, 95% highest density regions and a predictive band over node
//! counts, which is what extrapolation to larger machines relies on.
//!
//! ```
//! use scalepred::prelude::*;
//!
//! let spec = ModelSpec::from_name("3TM", None)?;
//! let truth = ParamVector::new(vec![4000.0, 5.0, 2.0])?;
//! let data = DataSet::new(
//!     "synthetic",
//!     [4, 16, 64]
//!         .iter()
//!         .map(|&p| Observation::new(p, spec.eval(&truth, p as f64).unwrap(), Role::Teacher))
//!         .collect(),
//! )?;
//! let prior = PriorBox::default_for(&spec, &data)?;
//! let config = RemcConfig { n_steps: 2_000, seed: 7, ..RemcConfig::default() };
//! let samples = run_remc(&spec, &data, CostKind::Relative, &prior, &config)?;
//! assert_eq!(samples.len(), 1_000);
//!
//! let band = predict_band(&samples, &spec, &log_grid(4.0, 10_000.0, 50), 200, 0.95)?;
//! assert!(band.hdr_low.iter().zip(&band.hdr_high).all(|(lo, hi)| lo <= hi));
//! # Ok::<(), scalepred::Error>(())
//! ```

pub mod analysis;
pub mod data;
mod error;
pub mod inference;
pub mod model;
pub mod oracle;

pub use error::{Error, Result};

/// The types most programs need.
pub mod prelude {
    pub use crate::analysis::{
        compare_report, hdr, log_grid, marginal_histogram, point_estimates, predict_band, ComparisonReport,
        FitCell, Hdr, Histogram, PredictionBand,
    };
    pub use crate::data::{parse_dataset, DataSet, Format, Observation, Role};
    pub use crate::inference::{run_remc, CostKind, PosteriorSamples, PriorBox, RemcConfig};
    pub use crate::model::{ModelContext, ModelSpec, ParamVector, Term};
    pub use crate::Error;
}

// The guide's code listings compile and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
