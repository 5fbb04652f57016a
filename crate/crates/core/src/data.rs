//! Benchmark observations and teacher/test splits.
//!
//! CSV input has the header `P,T,role` (the `role` column may be omitted, in
//! which case every row is a teacher point). Lines starting with `#` are
//! comments. JSON input is an array of `{"P": .., "T": .., "role": ..}`
//! objects.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether an observation is used for fitting or held out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Teacher,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Teacher => "teacher",
            Role::Test => "test",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "teacher" => Ok(Role::Teacher),
            "test" => Ok(Role::Test),
            other => Err(Error::Validation(format!(
                "role must be `teacher` or `test`, got `{other}`"
            ))),
        }
    }
}

/// One measured elapsed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Node count.
    #[serde(rename = "P")]
    pub nodes: u32,
    /// Elapsed time in seconds.
    #[serde(rename = "T")]
    pub time: f64,
    #[serde(default = "default_role")]
    pub role: Role,
}

fn default_role() -> Role {
    Role::Teacher
}

impl Observation {
    pub fn new(nodes: u32, time: f64, role: Role) -> Self {
        Self { nodes, time, role }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// A validated set of observations with unique node counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    label: String,
    observations: Vec<Observation>,
}

impl DataSet {
    pub fn new(label: impl Into<String>, observations: Vec<Observation>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for obs in &observations {
            if obs.nodes == 0 {
                return Err(Error::Validation("node count P must be at least 1".into()));
            }
            if !(obs.time > 0.0) || !obs.time.is_finite() {
                return Err(Error::Validation(format!(
                    "elapsed time at P={} must be positive, got {}",
                    obs.nodes, obs.time
                )));
            }
            if !seen.insert(obs.nodes) {
                return Err(Error::Validation(format!("duplicate node count P={}", obs.nodes)));
            }
        }
        if !observations.iter().any(|o| o.role == Role::Teacher) {
            return Err(Error::Validation("data set has no teacher observation".into()));
        }
        Ok(Self { label: label.into(), observations })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn teacher(&self) -> impl Iterator<Item = &Observation> {
        self.observations.iter().filter(|o| o.role == Role::Teacher)
    }

    pub fn test(&self) -> impl Iterator<Item = &Observation> {
        self.observations.iter().filter(|o| o.role == Role::Test)
    }

    /// Node counts of all observations, in row order.
    pub fn nodes(&self) -> Vec<u32> {
        self.observations.iter().map(|o| o.nodes).collect()
    }

    /// Smallest and largest node count in the set.
    pub fn node_range(&self) -> (u32, u32) {
        let lo = self.observations.iter().map(|o| o.nodes).min().unwrap_or(1);
        let hi = self.observations.iter().map(|o| o.nodes).max().unwrap_or(1);
        (lo, hi)
    }

    /// Returns a copy in which exactly the listed node counts are teacher points.
    pub fn split_by_nodes(&self, teacher: &[u32]) -> Result<DataSet> {
        for p in teacher {
            if !self.observations.iter().any(|o| o.nodes == *p) {
                return Err(Error::Usage(format!("teacher node count P={p} is not in the data set")));
            }
        }
        let observations = self
            .observations
            .iter()
            .map(|o| {
                let role = if teacher.contains(&o.nodes) { Role::Teacher } else { Role::Test };
                Observation { role, ..*o }
            })
            .collect();
        DataSet::new(self.label.clone(), observations)
    }

    /// The `count` smallest node counts, which is how numbered splits are named.
    pub fn smallest_nodes(&self, count: usize) -> Result<Vec<u32>> {
        if count == 0 || count > self.len() {
            return Err(Error::Usage(format!(
                "cannot take {count} teacher points from a set of {}",
                self.len()
            )));
        }
        let mut nodes = self.nodes();
        nodes.sort_unstable();
        nodes.truncate(count);
        Ok(nodes)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("P,T,role\n");
        for o in &self.observations {
            out.push_str(&format!("{},{},{}\n", o.nodes, o.time, o.role));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.observations).expect("observations serialize")
    }
}

/// Reads a data set from CSV or JSON.
pub fn parse_dataset<R: Read>(source: R, format: Format, label: &str) -> Result<DataSet> {
    match format {
        Format::Csv => parse_csv(source, label),
        Format::Json => {
            let observations: Vec<Observation> = serde_json::from_reader(source).map_err(|e| {
                Error::Parse { line: e.line() as u64, message: e.to_string() }
            })?;
            DataSet::new(label, observations)
        }
    }
}

fn parse_csv<R: Read>(source: R, label: &str) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let header_err = |e: csv::Error| Error::Parse { line: 1, message: e.to_string() };
    let headers = reader.headers().map_err(header_err)?.clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (p_col, t_col) = match (column("P"), column("T")) {
        (Some(p), Some(t)) => (p, t),
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `P,T,role`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            })
        }
    };
    let role_col = column("role");

    let mut observations = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let nodes = field(p_col).parse::<u32>().map_err(|e| Error::Parse {
            line,
            message: format!("bad node count `{}`: {e}", field(p_col)),
        })?;
        let time = field(t_col).parse::<f64>().map_err(|e| Error::Parse {
            line,
            message: format!("bad elapsed time `{}`: {e}", field(t_col)),
        })?;
        let role = match role_col {
            Some(i) => field(i).parse::<Role>().map_err(|e| Error::Parse { line, message: e.to_string() })?,
            None => Role::Teacher,
        };
        observations.push(Observation { nodes, time, role });
    }
    DataSet::new(label, observations)
}

/// Shorthand for [`DataSet::split_by_nodes`].
pub fn split_by_nodes(ds: &DataSet, teacher: &[u32]) -> Result<DataSet> {
    ds.split_by_nodes(teacher)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn csv(text: &str) -> Result<DataSet> {
        parse_dataset(text.as_bytes(), Format::Csv, "t")
    }

    fn seven() -> DataSet {
        let rows = [(4, 900.0), (16, 260.0), (64, 80.0), (256, 30.0), (1024, 22.0), (4096, 27.0), (10000, 45.0)];
        DataSet::new("k", rows.iter().map(|&(p, t)| Observation::new(p, t, Role::Teacher)).collect()).unwrap()
    }

    #[test]
    fn parses_minimal_csv() {
        let ds = csv("P,T,role\n4,900,teacher").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.teacher().count(), 1);
    }

    #[test]
    fn comments_and_missing_role() {
        let ds = csv("# K computer\nP,T\n4,900\n# mid\n16,250.5\n").unwrap();
        assert_eq!(ds.nodes(), vec![4, 16]);
        assert!(ds.observations().iter().all(|o| o.role == Role::Teacher));
    }

    #[test]
    fn rejects_duplicates_and_bad_times() {
        let err = csv("P,T,role\n4,900,teacher\n4,800,test").unwrap_err();
        assert!(matches!(&err, Error::Validation(m) if m.contains("P=4")), "{err}");
        assert!(matches!(csv("P,T,role\n16,-2,teacher"), Err(Error::Validation(_))));
        assert!(matches!(csv("P,T,role\n16,0,teacher"), Err(Error::Validation(_))));
        assert!(matches!(csv("P,T,role\n16,2,test"), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_rows_report_line() {
        let err = csv("P,T,role\n4,900,teacher\n16,abc,teacher\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = csv("P,T,role\n4,900,teacher\n16,1,bogus\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(csv("nodes,time\n4,5\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn json_input() {
        let text = r#"[{"P": 4, "T": 900, "role": "teacher"}, {"P": 16, "T": 250.0, "role": "test"}]"#;
        let ds = parse_dataset(text.as_bytes(), Format::Json, "j").unwrap();
        assert_eq!(ds.teacher().count(), 1);
        assert_eq!(ds.test().count(), 1);
        assert!(parse_dataset("[{\"P\": 4}]".as_bytes(), Format::Json, "j").is_err());
    }

    #[test]
    fn splits() {
        let ds = seven();
        let s = ds.split_by_nodes(&[4, 16, 64]).unwrap();
        assert_eq!((s.teacher().count(), s.test().count()), (3, 4));
        let s = ds.split_by_nodes(&ds.nodes()).unwrap();
        assert_eq!((s.teacher().count(), s.test().count()), (7, 0));
        assert!(matches!(ds.split_by_nodes(&[5]), Err(Error::Usage(_))));
        assert!(matches!(ds.split_by_nodes(&[]), Err(Error::Validation(_))));
        assert_eq!(ds.smallest_nodes(6).unwrap(), vec![4, 16, 64, 256, 1024, 4096]);
    }

    fn arb_dataset() -> impl Strategy<Value = DataSet> {
        proptest::collection::btree_map(1u32..100_000, (1e-6f64..1e6, any::<bool>()), 1..12).prop_map(|rows| {
            let mut obs: Vec<Observation> = rows
                .into_iter()
                .map(|(p, (t, teach))| Observation::new(p, t, if teach { Role::Teacher } else { Role::Test }))
                .collect();
            obs[0].role = Role::Teacher;
            DataSet::new("prop", obs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn csv_and_json_round_trip(ds in arb_dataset()) {
            let back = parse_dataset(ds.to_csv().as_bytes(), Format::Csv, "prop").unwrap();
            prop_assert_eq!(&back, &ds);
            let back = parse_dataset(ds.to_json().as_bytes(), Format::Json, "prop").unwrap();
            prop_assert_eq!(&back, &ds);
        }

        #[test]
        fn split_only_changes_roles(ds in arb_dataset(), pick in proptest::collection::vec(any::<bool>(), 12)) {
            let mut teacher: Vec<u32> = ds.nodes().into_iter().zip(&pick).filter(|(_, k)| **k).map(|(p, _)| p).collect();
            if teacher.is_empty() { teacher.push(ds.nodes()[0]); }
            let s = ds.split_by_nodes(&teacher).unwrap();
            prop_assert_eq!(s.len(), ds.len());
            for (a, b) in s.observations().iter().zip(ds.observations()) {
                prop_assert_eq!((a.nodes, a.time), (b.nodes, b.time));
                prop_assert_eq!(a.role == Role::Teacher, teacher.contains(&a.nodes));
            }
        }
    }
}
