//! Problem files: versioned JSON describing an ensemble, a strategy class and solver settings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use procdisc::hermitian::CMatrix;
use procdisc::process::{is_comb, ChoiProcess, DiscriminationInstance, Role};
use procdisc::strategy::StrategyClass;
use procdisc::{Error, Hermitian, Result, SystemLayout, C64};

pub const SCHEMA_VERSION: u32 = 1;

/// Row-major matrix of `[re, im]` entries.
pub type ComplexMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema: u32,
    /// Wire dimensions, last output first.
    pub layout: Vec<usize>,
    pub combs: Vec<ComplexMatrix>,
    pub priors: Vec<f64>,
    #[serde(default)]
    pub class: ClassSpec,
    #[serde(default)]
    pub options: SolverSettings,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassSpec {
    #[default]
    Global,
    FixedInput {
        state: Vec<[f64; 2]>,
    },
    SeparableInput,
    Nonadaptive,
    SequentialTwoStep,
    #[serde(rename = "one_way_ab")]
    OneWayAB,
    MaxEntangled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
    /// Intermediate outcomes `J` of adaptive testers.
    pub outcomes: usize,
    pub max_cuts: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-7, seed: 0, restarts: 32, outcomes: 8, max_cuts: 500 }
    }
}

/// A validated problem file.
#[derive(Clone, Debug)]
pub struct Problem {
    pub instance: DiscriminationInstance,
    pub class: StrategyClass,
    pub settings: SolverSettings,
}

fn complex(v: &[f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

fn to_entries(m: &Hermitian) -> ComplexMatrix {
    (0..m.dim()).map(|i| (0..m.dim()).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect()).collect()
}

impl ClassSpec {
    pub fn from_class(class: &StrategyClass) -> Result<Self> {
        Ok(match class {
            StrategyClass::Global => ClassSpec::Global,
            StrategyClass::FixedInput { state } => ClassSpec::FixedInput { state: state.iter().map(|z| [z.re, z.im]).collect() },
            StrategyClass::SeparableInput => ClassSpec::SeparableInput,
            StrategyClass::Nonadaptive => ClassSpec::Nonadaptive,
            StrategyClass::SequentialTwoStep => ClassSpec::SequentialTwoStep,
            StrategyClass::OneWayAB => ClassSpec::OneWayAB,
            StrategyClass::MaxEntangled => ClassSpec::MaxEntangled,
            StrategyClass::Custom(c) => {
                return Err(Error::Unsupported(format!("custom class {} cannot be written to a problem file", c.name)))
            }
        })
    }

    pub fn to_class(&self) -> StrategyClass {
        match self {
            ClassSpec::Global => StrategyClass::Global,
            ClassSpec::FixedInput { state } => StrategyClass::FixedInput { state: state.iter().map(complex).collect() },
            ClassSpec::SeparableInput => StrategyClass::SeparableInput,
            ClassSpec::Nonadaptive => StrategyClass::Nonadaptive,
            ClassSpec::SequentialTwoStep => StrategyClass::SequentialTwoStep,
            ClassSpec::OneWayAB => StrategyClass::OneWayAB,
            ClassSpec::MaxEntangled => StrategyClass::MaxEntangled,
        }
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "$".to_string() } else { format!("$.{path}") };
            Error::schema(path, e.into_inner().to_string())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    pub fn from_instance(inst: &DiscriminationInstance, class: &StrategyClass, settings: SolverSettings) -> Result<Self> {
        Ok(Self {
            schema: SCHEMA_VERSION,
            layout: inst.layout().dims().to_vec(),
            combs: inst.combs().iter().map(|c| to_entries(c.matrix())).collect(),
            priors: inst.priors().to_vec(),
            class: ClassSpec::from_class(class)?,
            options: settings,
        })
    }

    /// Checks every field and builds the instance; errors name the offending JSON path.
    pub fn validate(&self) -> Result<Problem> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::schema(
                "$.schema",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.schema),
            ));
        }
        if let Some(k) = self.layout.iter().position(|&d| d == 0) {
            return Err(Error::schema(format!("$.layout[{k}]"), "wire dimensions must be positive"));
        }
        if self.layout.is_empty() || self.layout.len() % 2 != 0 {
            return Err(Error::schema("$.layout", "layout must alternate output and input wires"));
        }
        let layout = SystemLayout::new(self.layout.clone()).map_err(|e| Error::schema("$.layout", e.to_string()))?;
        let steps = self.layout.len() / 2;
        let n = layout.total_dim();
        if self.combs.len() < 2 {
            return Err(Error::schema("$.combs", "at least two combs are needed"));
        }
        let mut combs = Vec::with_capacity(self.combs.len());
        for (m, rows) in self.combs.iter().enumerate() {
            let path = format!("$.combs[{m}]");
            if rows.len() != n {
                return Err(Error::schema(path, format!("expected {n} rows, found {}", rows.len())));
            }
            if let Some(r) = rows.iter().position(|row| row.len() != n) {
                return Err(Error::schema(format!("{path}[{r}]"), format!("expected {n} entries, found {}", rows[r].len())));
            }
            let entries = CMatrix::from_fn(n, n, |i, j| complex(&rows[i][j]));
            let matrix = Hermitian::new(entries).map_err(|e| Error::schema(path.clone(), e.to_string()))?;
            let comb = ChoiProcess::new(matrix, layout.clone(), Role::CombCandidate)
                .map_err(|e| Error::schema(path.clone(), e.to_string()))?;
            let (ok, witness) = is_comb(&comb, steps, procdisc::process::COMB_TOL)?;
            if !ok {
                return Err(Error::schema(
                    path,
                    format!(
                        "not a comb: normalization residual {:.3e}, minimum eigenvalue {:.3e}",
                        witness.residual, witness.min_eigenvalue
                    ),
                ));
            }
            combs.push(comb);
        }
        if self.priors.len() != combs.len() {
            return Err(Error::schema(
                "$.priors",
                format!("expected {} priors, found {}", combs.len(), self.priors.len()),
            ));
        }
        if let Some(k) = self.priors.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::schema(format!("$.priors[{k}]"), "priors must be nonnegative"));
        }
        let total: f64 = self.priors.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::schema("$.priors", format!("priors must sum to 1 (sum is {total})")));
        }
        let class = self.class.to_class();
        class.check_layout(&layout).map_err(|e| {
            let path = if matches!(self.class, ClassSpec::FixedInput { .. }) { "$.class.state" } else { "$.class" };
            Error::schema(path, e.to_string())
        })?;
        let o = &self.options;
        if !(o.tol > 0.0 && o.tol < 1.0) {
            return Err(Error::schema("$.options.tol", "tolerance must lie in (0, 1)"));
        }
        if o.restarts == 0 {
            return Err(Error::schema("$.options.restarts", "at least one restart is needed"));
        }
        if o.outcomes == 0 {
            return Err(Error::schema("$.options.outcomes", "at least one intermediate outcome is needed"));
        }
        if o.max_cuts == 0 {
            return Err(Error::schema("$.options.max_cuts", "at least one cut is needed"));
        }
        let instance = DiscriminationInstance::new(combs, self.priors.clone(), steps)?;
        Ok(Problem { instance, class, settings: self.options })
    }
}

pub fn parse_problem(path: impl AsRef<Path>) -> Result<Problem> {
    ProblemFile::load(path)?.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn helstrom_json(priors: &str) -> String {
        format!(
            r#"{{"schema": 1, "layout": [2, 1],
               "combs": [[[[1, 0], [0, 0]], [[0, 0], [0, 0]]], [[[0.5, 0], [0.5, 0]], [[0.5, 0], [0.5, 0]]]],
               "priors": {priors}}}"#
        )
    }

    #[test]
    fn minimal_helstrom_file_parses() {
        let p = ProblemFile::from_json(&helstrom_json("[0.5, 0.5]")).unwrap().validate().unwrap();
        assert_eq!(p.instance.num_outcomes(), 2);
        assert_eq!(p.instance.time_steps(), 1);
        assert!(matches!(p.class, StrategyClass::Global));
        assert_eq!(p.settings, SolverSettings::default());
    }

    #[test]
    fn priors_must_sum_to_one() {
        let err = ProblemFile::from_json(&helstrom_json("[0.5, 0.4]")).unwrap().validate().unwrap_err();
        let text = err.to_string();
        assert!(text.contains("priors must sum to 1") && text.starts_with("$.priors"), "{text}");
    }

    #[test]
    fn type_errors_carry_a_path() {
        let text = helstrom_json("[0.5, 0.5]").replace("[0.5, 0], [0.5, 0]]]]", "[0.5, 0], [0.5]]]]");
        let err = ProblemFile::from_json(&text).unwrap_err().to_string();
        assert!(err.starts_with("$.combs[1][1][1]"), "{err}");
        let err = ProblemFile::from_json(r#"{"schema": 1, "layout": [2, 1], "combs": [], "priors": [], "extra": 0}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn non_combs_report_the_residual() {
        let text = helstrom_json("[0.5, 0.5]").replace("[[[1, 0], [0, 0]], [[0, 0], [0, 0]]]", "[[[2, 0], [0, 0]], [[0, 0], [0, 0]]]");
        let err = ProblemFile::from_json(&text).unwrap().validate().unwrap_err().to_string();
        assert!(err.starts_with("$.combs[0]") && err.contains("residual"), "{err}");
    }

    #[test]
    fn class_payload_is_checked() {
        let text = helstrom_json("[0.5, 0.5]").replace("\"priors\"", "\"class\": {\"kind\": \"fixed_input\", \"state\": [[1, 0], [0, 0]]}, \"priors\"");
        let err = ProblemFile::from_json(&text).unwrap().validate().unwrap_err().to_string();
        assert!(err.starts_with("$.class"), "{err}");
    }

    #[test]
    fn round_trip() {
        let f = ProblemFile::from_json(&helstrom_json("[0.25, 0.75]")).unwrap();
        assert_eq!(ProblemFile::from_json(&f.to_json()).unwrap(), f);
    }
}
