use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParamVector, Term};

/// How model predictions are compared with measured times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// `Σ_j (T(P_j) - T_j)² / T_j²`
    #[default]
    Relative,
    /// `Σ_j (ln T(P_j) - ln T_j)²`
    Loglog,
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::Relative => "relative",
            CostKind::Loglog => "loglog",
        })
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relative" => Ok(CostKind::Relative),
            "loglog" | "log-log" => Ok(CostKind::Loglog),
            other => Err(Error::Usage(format!("unknown cost kind `{other}`, expected relative or loglog"))),
        }
    }
}

/// Uniform prior on the box `Π_i [0, c_max_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorBox {
    c_max: Vec<f64>,
}

impl PriorBox {
    pub fn new(c_max: Vec<f64>) -> Result<Self> {
        if c_max.is_empty() {
            return Err(Error::Config("prior box needs at least one bound".into()));
        }
        if let Some((i, v)) = c_max.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("prior bound c{}_max must be positive, got {v}", i + 1)));
        }
        Ok(Self { c_max })
    }

    /// Data-derived default: ten times the one-term scale of each coefficient.
    ///
    /// The one-term scale of `c_i` is the largest coefficient at which term
    /// `i` alone reproduces a teacher point, `max_j T_j / f_i(P_j)` over points
    /// where `f_i(P_j) > 0`: `max_j T_j·P_j` for `T1`, `max_j T_j` for `T2`,
    /// `max_j T_j·P_j²` for `T5`. The deceleration term uses its saturated
    /// basis `P`. A term that vanishes at every teacher point falls back to
    /// `max_j T_j`.
    pub fn default_for(spec: &ModelSpec, teacher: &DataSet) -> Result<Self> {
        let max_t = teacher.teacher().map(|o| o.time).fold(0.0f64, f64::max);
        let mut bounds = Vec::with_capacity(spec.dim());
        for &term in spec.terms() {
            let mut scale = 0.0f64;
            for o in teacher.teacher() {
                let p = o.nodes as f64;
                let f = if term == Term::T6 { p } else { term.basis(p, spec.context())? };
                if f > 0.0 {
                    scale = scale.max(o.time / f);
                }
            }
            if !(scale > 0.0 && scale.is_finite()) {
                scale = max_t;
            }
            bounds.push(10.0 * scale);
        }
        Self::new(bounds)
    }

    pub fn upper(&self) -> &[f64] {
        &self.c_max
    }

    pub fn dim(&self) -> usize {
        self.c_max.len()
    }

    pub fn contains(&self, params: &[f64]) -> bool {
        params.len() == self.c_max.len()
            && params.iter().zip(&self.c_max).all(|(c, m)| *c >= 0.0 && c <= m)
    }

    pub fn center(&self) -> ParamVector {
        ParamVector::from_vec_unchecked(self.c_max.iter().map(|m| 0.5 * m).collect())
    }

    /// Scales every bound by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.c_max.iter().map(|m| m * factor).collect())
    }
}

/// The teacher points of a data set, pre-evaluated against a model's basis
/// so that the cost of a parameter vector is a handful of multiply-adds.
#[derive(Debug, Clone)]
pub struct Target {
    spec: ModelSpec,
    kind: CostKind,
    /// Row-major `points × dim` basis values.
    basis: Vec<f64>,
    /// `T_j` for the relative cost, `ln T_j` for the log-log cost.
    observed: Vec<f64>,
}

impl Target {
    pub fn new(spec: &ModelSpec, teacher: &DataSet, kind: CostKind) -> Result<Self> {
        let mut basis = Vec::new();
        let mut observed = Vec::new();
        for o in teacher.teacher() {
            basis.extend(spec.basis(o.nodes as f64)?);
            observed.push(match kind {
                CostKind::Relative => o.time,
                CostKind::Loglog => o.time.ln(),
            });
        }
        if observed.is_empty() {
            return Err(Error::Validation("no teacher observations to fit".into()));
        }
        Ok(Self { spec: spec.clone(), kind, basis, observed })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn n_points(&self) -> usize {
        self.observed.len()
    }

    /// Cost of `params`; `+∞` when the log-log cost meets a non-positive prediction.
    pub fn cost(&self, params: &[f64]) -> f64 {
        debug_assert_eq!(params.len(), self.dim());
        let rows = self.basis.chunks_exact(params.len()).zip(&self.observed);
        match self.kind {
            CostKind::Relative => rows
                .map(|(row, &t)| {
                    let r = (predict(row, params) - t) / t;
                    r * r
                })
                .sum(),
            CostKind::Loglog => {
                let mut total = 0.0;
                for (row, &ln_t) in rows {
                    let pred = predict(row, params);
                    if !(pred > 0.0) {
                        return f64::INFINITY;
                    }
                    let d = pred.ln() - ln_t;
                    total += d * d;
                }
                total
            }
        }
    }
}

#[inline]
fn predict(basis: &[f64], params: &[f64]) -> f64 {
    basis.iter().zip(params).map(|(b, c)| c * b).sum()
}

/// Cost `F` of `params` against the teacher points of `teacher`.
pub fn cost(kind: CostKind, spec: &ModelSpec, params: &ParamVector, teacher: &DataSet) -> Result<f64> {
    if params.len() != spec.dim() {
        return Err(Error::Usage(format!(
            "model {} has {} coefficients, got {}",
            spec,
            spec.dim(),
            params.len()
        )));
    }
    Ok(Target::new(spec, teacher, kind)?.cost(params.as_slice()))
}

/// Unnormalized log-likelihood `-F/τ`.
pub fn log_likelihood(cost: f64, tau: f64) -> f64 {
    debug_assert!(tau > 0.0);
    -cost / tau
}
