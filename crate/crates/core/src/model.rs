//! Additive strong-scaling performance models.
//!
//! A model is a sum of non-negative terms `T(P) = Σ c_i · f_i(P)`, where each
//! basis function `f_i` describes one cost mechanism:
//!
//! | term | basis `f(P)`                     | mechanism                        |
//! |------|----------------------------------|----------------------------------|
//! | `T1` | `1/P`                            | ideally parallel work            |
//! | `T2` | `1`                              | serial work                      |
//! | `T3` | `ln P`                           | communication setup              |
//! | `T4` | `ln P / √P`                      | communication volume             |
//! | `T5` | `1/P²`                           | super-linear (cache) speedup     |
//! | `T6` | `P / (1 + exp(-(P - P_c)))`      | deceleration beyond `P_c` nodes  |
//!
//! Every term is linear in its coefficient, which the sampler exploits by
//! tabulating the basis values once per data point.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One additive term of a performance model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
}

impl Term {
    pub const ALL: [Term; 6] = [Term::T1, Term::T2, Term::T3, Term::T4, Term::T5, Term::T6];

    /// Value of the term at unit coefficient.
    ///
    /// `ctx` is only consulted by [`Term::T6`], which fails without it.
    pub fn basis(self, nodes: f64, ctx: Option<&ModelContext>) -> Result<f64> {
        if !(nodes > 0.0) || !nodes.is_finite() {
            return Err(Error::Domain(format!(
                "node count must be positive and finite, got {nodes}"
            )));
        }
        let value = match self {
            Term::T1 => 1.0 / nodes,
            Term::T2 => 1.0,
            Term::T3 => nodes.ln(),
            Term::T4 => nodes.ln() / nodes.sqrt(),
            Term::T5 => 1.0 / (nodes * nodes),
            Term::T6 => {
                let ctx = ctx.ok_or_else(|| {
                    Error::Config("term T6 needs a model context with P_c".into())
                })?;
                nodes * logistic(nodes - ctx.critical_nodes())
            }
        };
        Ok(value)
    }

    pub fn label(self) -> &'static str {
        match self {
            Term::T1 => "T1",
            Term::T2 => "T2",
            Term::T3 => "T3",
            Term::T4 => "T4",
            Term::T5 => "T5",
            Term::T6 => "T6",
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "T1" | "t1" => Ok(Term::T1),
            "T2" | "t2" => Ok(Term::T2),
            "T3" | "t3" => Ok(Term::T3),
            "T4" | "t4" => Ok(Term::T4),
            "T5" | "t5" => Ok(Term::T5),
            "T6" | "t6" => Ok(Term::T6),
            other => Err(Error::Usage(format!("unknown model term `{other}`"))),
        }
    }
}

/// `1 / (1 + exp(-x))`, evaluated without overflow for large negative `x`.
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Node count at which the total number of cores equals the matrix size.
pub fn critical_node_count(matrix_size: u64, cores_per_node: u64) -> Result<f64> {
    if matrix_size == 0 || cores_per_node == 0 {
        return Err(Error::Domain(format!(
            "matrix size and cores per node must be positive, got M={matrix_size}, n_core={cores_per_node}"
        )));
    }
    Ok(matrix_size as f64 / cores_per_node as f64)
}

/// Fixed problem context shared by all terms; only the deceleration term uses it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelContext {
    matrix_size: u64,
    cores_per_node: u64,
    critical_nodes: f64,
}

impl ModelContext {
    pub fn new(matrix_size: u64, cores_per_node: u64) -> Result<Self> {
        let critical_nodes = critical_node_count(matrix_size, cores_per_node)?;
        Ok(Self { matrix_size, cores_per_node, critical_nodes })
    }

    pub fn matrix_size(&self) -> u64 {
        self.matrix_size
    }

    pub fn cores_per_node(&self) -> u64 {
        self.cores_per_node
    }

    /// `P_c = M / n_core`.
    pub fn critical_nodes(&self) -> f64 {
        self.critical_nodes
    }
}

/// Evaluates a single term with coefficient `coefficient` at `nodes`.
pub fn eval_term(
    term: Term,
    coefficient: f64,
    nodes: f64,
    ctx: Option<&ModelContext>,
) -> Result<f64> {
    if !(coefficient >= 0.0) {
        return Err(Error::Domain(format!(
            "coefficient of {term} must be non-negative, got {coefficient}"
        )));
    }
    Ok(coefficient * term.basis(nodes, ctx)?)
}

/// The active terms of a model plus the context they are evaluated in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    terms: Vec<Term>,
    context: Option<ModelContext>,
}

impl ModelSpec {
    pub fn new(terms: Vec<Term>, context: Option<ModelContext>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Config("a model needs at least one term".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if terms[..i].contains(t) {
                return Err(Error::Config(format!("term {t} listed twice")));
            }
        }
        if terms.contains(&Term::T6) && context.is_none() {
            return Err(Error::Config(
                "term T6 requires the matrix size and cores per node".into(),
            ));
        }
        Ok(Self { terms, context })
    }

    /// Builds one of the nested models `3TM`, `4TM`, `5TM` or `6TM`.
    pub fn from_name(name: &str, context: Option<ModelContext>) -> Result<Self> {
        let count = match name.trim() {
            "3TM" => 3,
            "4TM" => 4,
            "5TM" => 5,
            "6TM" => 6,
            other => {
                return Err(Error::Usage(format!(
                    "unknown model `{other}`, expected one of 3TM, 4TM, 5TM, 6TM"
                )))
            }
        };
        Self::new(Term::ALL[..count].to_vec(), context)
    }

    /// Parses either a model name (`3TM`) or a `+`-separated term list (`T1+T2`).
    pub fn parse(text: &str, context: Option<ModelContext>) -> Result<Self> {
        if text.trim().ends_with("TM") {
            return Self::from_name(text, context);
        }
        let terms = text.split('+').map(Term::from_str).collect::<Result<Vec<_>>>()?;
        Self::new(terms, context)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn context(&self) -> Option<&ModelContext> {
        self.context.as_ref()
    }

    /// Number of free coefficients.
    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    /// Human-readable name: `3TM`..`6TM` for the nested models, otherwise the term list.
    pub fn name(&self) -> String {
        let n = self.terms.len();
        if n >= 3 && self.terms[..] == Term::ALL[..n] {
            format!("{n}TM")
        } else {
            self.terms.iter().map(|t| t.label()).collect::<Vec<_>>().join("+")
        }
    }

    /// Basis values `f_i(P)` for every active term, in term order.
    pub fn basis(&self, nodes: f64) -> Result<Vec<f64>> {
        self.terms.iter().map(|t| t.basis(nodes, self.context.as_ref())).collect()
    }

    pub fn eval(&self, params: &ParamVector, nodes: f64) -> Result<f64> {
        if params.len() != self.dim() {
            return Err(Error::Usage(format!(
                "model {} has {} coefficients, got {}",
                self.name(),
                self.dim(),
                params.len()
            )));
        }
        let mut total = 0.0;
        for (term, &c) in self.terms.iter().zip(params.as_slice()) {
            total += eval_term(*term, c, nodes, self.context.as_ref())?;
        }
        Ok(total)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Shorthand for [`ModelSpec::from_name`].
pub fn model_from_name(name: &str, context: Option<ModelContext>) -> Result<ModelSpec> {
    ModelSpec::from_name(name, context)
}

/// Shorthand for [`ModelSpec::eval`].
pub fn eval_model(spec: &ModelSpec, params: &ParamVector, nodes: f64) -> Result<f64> {
    spec.eval(params, nodes)
}

/// Non-negative model coefficients, in the term order of their [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!(
                "coefficient c{} must be finite and non-negative, got {v}",
                i + 1
            )));
        }
        Ok(Self(values))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn kctx() -> ModelContext {
        ModelContext::new(22500, 8).unwrap()
    }

    #[test]
    fn term_examples() {
        assert_eq!(eval_term(Term::T1, 4000.0, 4.0, None).unwrap(), 1000.0);
        assert_eq!(eval_term(Term::T3, 5.0, 1.0, None).unwrap(), 0.0);
        let tiny = eval_term(Term::T6, 1.0, 4.0, Some(&kctx())).unwrap();
        assert!(tiny < 1e-300);
        let big = eval_term(Term::T6, 2.0, 10000.0, Some(&kctx())).unwrap();
        assert_relative_eq!(big, 20000.0, max_relative = 1e-6);
    }

    #[test]
    fn term_errors() {
        assert!(matches!(eval_term(Term::T1, 1.0, 0.0, None), Err(Error::Domain(_))));
        assert!(matches!(eval_term(Term::T1, 1.0, -3.0, None), Err(Error::Domain(_))));
        assert!(matches!(eval_term(Term::T6, 1.0, 3.0, None), Err(Error::Config(_))));
        assert!(matches!("T7".parse::<Term>(), Err(Error::Usage(_))));
    }

    #[test]
    fn model_examples() {
        let m3 = model_from_name("3TM", None).unwrap();
        let c = ParamVector::new(vec![4000.0, 0.0, 0.0]).unwrap();
        assert_eq!(m3.eval(&c, 64.0).unwrap(), 62.5);
        let c = ParamVector::new(vec![0.0, 7.0, 0.0]).unwrap();
        for p in [1.0, 3.0, 1e4] {
            assert_eq!(m3.eval(&c, p).unwrap(), 7.0);
        }
        let m5 = model_from_name("5TM", None).unwrap();
        let ones = ParamVector::new(vec![1.0; 5]).unwrap();
        assert_eq!(m5.eval(&ones, 1.0).unwrap(), 3.0);
    }

    #[test]
    fn model_names() {
        assert_eq!(model_from_name("3TM", None).unwrap().terms(), &[Term::T1, Term::T2, Term::T3]);
        assert_eq!(model_from_name("6TM", Some(kctx())).unwrap().terms(), &Term::ALL);
        assert!(matches!(model_from_name("7TM", None), Err(Error::Usage(_))));
        assert!(matches!(model_from_name("6TM", None), Err(Error::Config(_))));
        let amdahl = ModelSpec::parse("T1+T2", None).unwrap();
        assert_eq!(amdahl.name(), "T1+T2");
        assert_eq!(ModelSpec::parse("4TM", None).unwrap().name(), "4TM");
        assert!(ModelSpec::new(vec![Term::T1, Term::T1], None).is_err());
        assert!(ModelSpec::new(vec![], None).is_err());
    }

    #[test]
    fn length_mismatch_is_usage_error() {
        let m3 = model_from_name("3TM", None).unwrap();
        let c = ParamVector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(m3.eval(&c, 4.0), Err(Error::Usage(_))));
    }

    #[test]
    fn critical_nodes() {
        assert_eq!(critical_node_count(22500, 8).unwrap(), 2812.5);
        assert_eq!(critical_node_count(8, 8).unwrap(), 1.0);
        assert_eq!(critical_node_count(100, 3).unwrap(), 100.0 / 3.0);
        assert!(matches!(critical_node_count(0, 8), Err(Error::Domain(_))));
        assert!(matches!(critical_node_count(8, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn negative_coefficients_rejected() {
        assert!(ParamVector::new(vec![1.0, -0.5]).is_err());
        assert!(ParamVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn deceleration_gate() {
        let ctx = kctx();
        let pc = ctx.critical_nodes();
        for i in 0..1000 {
            let p = 1.0 + i as f64 * 10.0;
            let ratio = eval_term(Term::T6, 3.0, p, Some(&ctx)).unwrap() / (3.0 * p);
            if p <= pc - 20.0 {
                assert!(ratio < 1e-8, "P={p}");
            } else if p >= pc + 20.0 {
                assert!((ratio - 1.0).abs() < 1e-8, "P={p}");
            }
        }
    }

    proptest! {
        #[test]
        fn terms_are_linear(c in 0.0f64..1e6, lambda in 0.0f64..1e3, p in 1.0f64..1e5, t in 0usize..6) {
            let ctx = kctx();
            let term = Term::ALL[t];
            let scaled = eval_term(term, lambda * c, p, Some(&ctx)).unwrap();
            let base = eval_term(term, c, p, Some(&ctx)).unwrap();
            prop_assert!((scaled - lambda * base).abs() <= 1e-12 * scaled.abs().max(1e-300));
        }

        #[test]
        fn superlinear_term_decays_faster(c in 1e-3f64..1e6, p in 2.0f64..1e5) {
            prop_assert!(eval_term(Term::T5, c, p, None).unwrap() < eval_term(Term::T1, c, p, None).unwrap());
        }

        #[test]
        fn model_is_non_negative(cs in proptest::collection::vec(0.0f64..1e6, 6), p in 1.0f64..1e6) {
            let m = model_from_name("6TM", Some(kctx())).unwrap();
            let v = m.eval(&ParamVector::new(cs).unwrap(), p).unwrap();
            prop_assert!(v >= 0.0 && v.is_finite());
        }

        #[test]
        fn nested_models_agree(cs in proptest::collection::vec(0.0f64..1e4, 5), k in 3usize..6, p in 1.0f64..2e4) {
            let ctx = Some(kctx());
            let smaller = model_from_name(&format!("{k}TM"), ctx).unwrap();
            let larger = model_from_name(&format!("{}TM", k + 1), ctx).unwrap();
            let mut padded = cs[..k].to_vec();
            padded.push(0.0);
            let a = smaller.eval(&ParamVector::new(cs[..k].to_vec()).unwrap(), p).unwrap();
            let b = larger.eval(&ParamVector::new(padded).unwrap(), p).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
