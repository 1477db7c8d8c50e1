//! Run reports and their JSON and text renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use procdisc::certification::OptimalityCondition;
use procdisc::primal::PrimalMethod;
use procdisc::strategy::BoundKind;
use procdisc::Hermitian;

use crate::problem::SolverSettings;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Text,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimalSummary {
    pub value: f64,
    pub method: PrimalMethod,
    pub certified_exact: bool,
    pub restarts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSummary {
    pub value: f64,
    pub bound: BoundKind,
    /// Value of the best tester met while solving.
    pub lower: f64,
    pub cuts: usize,
    pub certificate: Hermitian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalitySummary {
    pub optimal: bool,
    pub condition: Option<OptimalityCondition>,
    pub via_global_solution: bool,
    pub min_slack: f64,
    pub global_support: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub from_value: f64,
    pub direct: Option<f64>,
    /// Lower bound on `1 + R` from the dual characterization.
    pub dual_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleSummary {
    pub sequential_value: f64,
    pub reduced_value: f64,
    pub reduced_phase: f64,
    pub seesaw_value: f64,
    pub max_overlap: f64,
    pub sequential_robustness: f64,
    pub global_robustness: f64,
    pub sequential_globally_optimal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub class: String,
    pub seed: u64,
    pub config: SolverSettings,
    pub primal: Option<PrimalSummary>,
    pub dual: Option<DualSummary>,
    /// `[primal, dual]`.
    pub duality_bracket: Option<[f64; 2]>,
    pub global_value: Option<f64>,
    pub global_optimality: Option<OptimalitySummary>,
    pub robustness: Option<RobustnessSummary>,
    pub example: Option<ExampleSummary>,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    /// Wall-clock seconds per stage; not covered by the determinism contract.
    pub timings: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(command: &str, class: &str, config: SolverSettings) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            class: class.to_string(),
            seed: config.seed,
            config,
            primal: None,
            dual: None,
            duality_bracket: None,
            global_value: None,
            global_optimality: None,
            robustness: None,
            example: None,
            checks: Vec::new(),
            error: None,
            timings: BTreeMap::new(),
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }

    /// No error and every check passed.
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }

    pub fn without_timings(&self) -> Self {
        Self { timings: BTreeMap::new(), ..self.clone() }
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn render_text(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {} : {} (class {}, seed {})", r.tool, r.version, r.command, r.class, r.seed);
    if let Some(p) = &r.primal {
        let _ = writeln!(s, "primal value      {} ({:?}, exact {})", num(p.value), p.method, p.certified_exact);
    }
    if let Some(d) = &r.dual {
        let _ = writeln!(s, "dual value        {} ({:?} bound, {} cuts)", num(d.value), d.bound, d.cuts);
    }
    if let Some([lo, hi]) = r.duality_bracket {
        let _ = writeln!(s, "duality bracket   [{}, {}]", num(lo), num(hi));
    }
    if let Some(g) = r.global_value {
        let _ = writeln!(s, "global value      {}", num(g));
    }
    if let Some(o) = &r.global_optimality {
        let condition = o.condition.map_or("none".to_string(), |c| format!("{c:?}"));
        let _ = writeln!(s, "globally optimal  {} (condition {condition})", o.optimal);
    }
    if let Some(rb) = &r.robustness {
        let _ = writeln!(s, "robustness        {} (from value)", num(rb.from_value));
        if let Some(d) = rb.direct {
            let _ = writeln!(s, "robustness        {} (direct)", num(d));
        }
        if let Some(b) = rb.dual_bound {
            let _ = writeln!(s, "1 + robustness >= {}", num(b));
        }
    }
    if let Some(p) = &r.example {
        let _ = writeln!(s, "sequential dual   {}", num(p.sequential_value));
        let _ = writeln!(s, "reduced a + |b|   {} at phase {}", num(p.reduced_value), num(p.reduced_phase));
        let _ = writeln!(s, "seesaw primal     {}", num(p.seesaw_value));
        let _ = writeln!(s, "max overlap       {}", num(p.max_overlap));
        let _ = writeln!(s, "robustness        {} (sequential), {} (global)", num(p.sequential_robustness), num(p.global_robustness));
    }
    for c in &r.checks {
        let _ = writeln!(s, "[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(e) = &r.error {
        let _ = writeln!(s, "error: {e}");
    }
    for (stage, secs) in &r.timings {
        let _ = writeln!(s, "time {stage}: {secs:.3} s");
    }
    s
}

pub fn emit_report(r: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(r).expect("reports always serialize");
            out.push(b'\n');
            out
        }
        Format::Text => render_text(r).into_bytes(),
    }
}
