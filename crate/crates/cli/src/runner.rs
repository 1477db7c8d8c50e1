//! Command dispatch.

use std::time::Instant;

use procdisc::certification::check_global_optimality;
use procdisc::dual::{solve_dual_with_tester, solve_global_dual, DualCertificate, DualOptions};
use procdisc::instances::{max_pairwise_overlap, perfect_strategy_states, reduced_sequential_value, two_use_instance};
use procdisc::primal::{optimize_primal, seesaw_sequential, PrimalConfig, SeesawConfig, SeparableConfig};
use procdisc::process::DiscriminationInstance;
use procdisc::robustness::{robustness_direct, robustness_dual_bound, DualOracle, RobustnessProblem};
use procdisc::strategy::{SeparationConfig, StrategyClass};
use procdisc::conic::ConicOptions;
use procdisc::Result;

use crate::problem::{Problem, SolverSettings};
use crate::report::{DualSummary, OptimalitySummary, ExampleSummary, PrimalSummary, Report, RobustnessSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    SolvePrimal,
    SolveDual,
    Certify,
    Robustness,
    Example,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolvePrimal => "solve-primal",
            Command::SolveDual => "solve-dual",
            Command::Certify => "certify",
            Command::Robustness => "robustness",
            Command::Example => "paper-example",
        }
    }
}

/// Expected sequential value of the built-in example and its half-width.
pub const SEQUENTIAL_TARGET: (f64, f64) = (0.933, 0.005);
/// Tolerance used when deciding global optimality.
pub const CERTIFY_TOL: f64 = 1e-6;

pub fn dual_options(s: &SolverSettings) -> DualOptions {
    DualOptions {
        tol: s.tol,
        max_cuts: s.max_cuts,
        separation: SeparationConfig { seed: s.seed, ..SeparationConfig::default() },
        ..DualOptions::default()
    }
}

pub fn primal_config(s: &SolverSettings) -> PrimalConfig {
    PrimalConfig {
        seesaw: SeesawConfig { outcomes: s.outcomes, restarts: s.restarts, seed: s.seed, ..SeesawConfig::default() },
        separable: SeparableConfig { seed: s.seed, ..SeparableConfig::default() },
        dual: dual_options(s),
    }
}

fn timed<T>(report: &mut Report, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    report.timings.insert(stage.to_string(), start.elapsed().as_secs_f64());
    out
}

fn dual_summary(cert: &DualCertificate) -> DualSummary {
    DualSummary {
        value: cert.value,
        bound: cert.bound,
        lower: cert.lower,
        cuts: cert.cuts,
        certificate: cert.chi.matrix().clone(),
    }
}

fn solve_primal(report: &mut Report, p: &Problem) -> Result<()> {
    let r = timed(report, "primal", || optimize_primal(&p.instance, &p.class, &primal_config(&p.settings)))?;
    report.check("primal value is a probability", (-1e-9..=1.0 + 1e-9).contains(&r.value), format!("{}", r.value));
    report.primal = Some(PrimalSummary { value: r.value, method: r.method, certified_exact: r.certified_exact, restarts: r.restarts });
    Ok(())
}

fn solve_dual(report: &mut Report, p: &Problem) -> Result<DualCertificate> {
    let out = timed(report, "dual", || solve_dual_with_tester(&p.instance, &p.class, &dual_options(&p.settings)))?;
    let cert = out.certificate;
    report.duality_bracket = Some([cert.lower, cert.value]);
    report.check(
        "duality bracket is ordered",
        cert.lower <= cert.value + 10.0 * p.settings.tol,
        format!("[{}, {}]", cert.lower, cert.value),
    );
    report.dual = Some(dual_summary(&cert));
    Ok(cert)
}

fn certify(report: &mut Report, p: &Problem) -> Result<()> {
    let cert = solve_dual(report, p)?;
    let verdict = timed(report, "certify", || check_global_optimality(&cert, &p.instance, &p.class, CERTIFY_TOL))?;
    let global = timed(report, "global dual", || solve_global_dual(&p.instance, &dual_options(&p.settings)))?;
    report.global_value = Some(global.value);
    report.check(
        "verdict agrees with the global value",
        verdict.optimal == ((global.value - cert.value).abs() <= CERTIFY_TOL.max(10.0 * p.settings.tol)),
        format!("class {} vs global {}", cert.value, global.value),
    );
    report.global_optimality = Some(OptimalitySummary {
        optimal: verdict.optimal,
        condition: verdict.condition,
        via_global_solution: verdict.via_global_solution,
        min_slack: verdict.min_slack,
        global_support: verdict.global_support,
    });
    Ok(())
}

fn robustness(report: &mut Report, p: &Problem) -> Result<()> {
    let cert = solve_dual(report, p)?;
    let from_value = p.instance.num_outcomes() as f64 * cert.value - 1.0;
    let mut summary = RobustnessSummary { from_value, direct: None, dual_bound: None };
    match RobustnessProblem::for_discrimination(&p.instance, &p.class) {
        Ok(problem) => {
            let direct = timed(report, "robustness direct", || robustness_direct(&problem, p.settings.tol))?;
            let bound = timed(report, "robustness dual", || robustness_dual_bound(&problem, &DualOracle::Exact))?;
            report.check(
                "direct robustness matches the value identity",
                (direct - from_value).abs() <= 1e-4,
                format!("{direct} vs {from_value}"),
            );
            report.check(
                "dual characterization matches",
                (bound - 1.0 - direct).abs() <= 1e-4,
                format!("1 + R = {} vs {bound}", 1.0 + direct),
            );
            summary.direct = Some(direct);
            summary.dual_bound = Some(bound);
        }
        Err(e) => log::info!("direct robustness skipped: {e}"),
    }
    report.robustness = Some(summary);
    Ok(())
}

fn same_instance(a: &DiscriminationInstance, b: &DiscriminationInstance) -> bool {
    a.layout() == b.layout()
        && a.num_outcomes() == b.num_outcomes()
        && a.priors().iter().zip(b.priors()).all(|(x, y)| (x - y).abs() < 1e-12)
        && a.combs().iter().zip(b.combs()).all(|(x, y)| (x.matrix() - y.matrix()).max_abs() < 1e-12)
}

fn example(report: &mut Report, input: Option<&Problem>, settings: &SolverSettings) -> Result<()> {
    let inst = two_use_instance()?;
    if let Some(p) = input {
        report.check("input file holds the example instance", same_instance(&p.instance, &inst), String::new());
    }
    let options = dual_options(settings);
    let sequential = timed(report, "sequential dual", || {
        solve_dual_with_tester(&inst, &StrategyClass::SequentialTwoStep, &options)
    })?
    .certificate;
    let reduced = timed(report, "reduced form", || reduced_sequential_value(24, &ConicOptions::with_tol(1e-10)))?;
    let global = timed(report, "global dual", || solve_global_dual(&inst, &options))?;
    let overlap = timed(report, "perfect construction", || Ok(max_pairwise_overlap(&perfect_strategy_states()?)))?;
    let seesaw = timed(report, "seesaw", || seesaw_sequential(&inst, &primal_config(settings).seesaw))?;
    let verdict = timed(report, "certify", || {
        check_global_optimality(&sequential, &inst, &StrategyClass::SequentialTwoStep, CERTIFY_TOL)
    })?;
    let global_verdict = check_global_optimality(&global, &inst, &StrategyClass::Global, CERTIFY_TOL)?;

    let (target, width) = SEQUENTIAL_TARGET;
    report.check(
        "sequential value near 0.933",
        (sequential.value - target).abs() <= width,
        format!("{}", sequential.value),
    );
    report.check(
        "cutting plane agrees with the reduced form",
        (sequential.value - reduced.value).abs() <= 1e-3,
        format!("{} vs {}", sequential.value, reduced.value),
    );
    report.check("global value is 1", (global.value - 1.0).abs() <= 1e-6, format!("{}", global.value));
    report.check("perfect construction is orthogonal", overlap <= 1e-9, format!("{overlap:e}"));
    report.check(
        "seesaw reaches the dual value",
        seesaw.value <= sequential.value + 1e-6 && sequential.value - seesaw.value <= 5e-3,
        format!("{} vs {}", seesaw.value, sequential.value),
    );
    report.check("sequential tester is not globally optimal", !verdict.optimal, format!("{:?}", verdict.condition));
    report.check(
        "global certificate is proportional to a comb",
        global_verdict.optimal
            && global_verdict.condition == Some(procdisc::certification::OptimalityCondition::ProportionalToComb),
        format!("{:?}", global_verdict.condition),
    );

    report.duality_bracket = Some([seesaw.value, sequential.value]);
    report.primal = Some(PrimalSummary {
        value: seesaw.value,
        method: seesaw.method,
        certified_exact: false,
        restarts: seesaw.restarts,
    });
    report.dual = Some(dual_summary(&sequential));
    report.global_value = Some(global.value);
    report.global_optimality = Some(OptimalitySummary {
        optimal: verdict.optimal,
        condition: verdict.condition,
        via_global_solution: verdict.via_global_solution,
        min_slack: verdict.min_slack,
        global_support: verdict.global_support,
    });
    report.example = Some(ExampleSummary {
        sequential_value: sequential.value,
        reduced_value: reduced.value,
        reduced_phase: reduced.phase,
        seesaw_value: seesaw.value,
        max_overlap: overlap,
        sequential_robustness: 3.0 * sequential.value - 1.0,
        global_robustness: 3.0 * global.value - 1.0,
        sequential_globally_optimal: verdict.optimal,
    });
    Ok(())
}

/// Runs a command. Solver failures are recorded in the report together with
/// whatever was computed before them.
pub fn run(command: Command, problem: Option<&Problem>, settings: &SolverSettings) -> Report {
    let class = match (command, problem) {
        (Command::Example, _) => StrategyClass::SequentialTwoStep.name().to_string(),
        (_, Some(p)) => p.class.name().to_string(),
        (_, None) => String::new(),
    };
    let mut report = Report::new(command.name(), &class, *settings);
    let outcome = match (command, problem) {
        (Command::Example, p) => example(&mut report, p, settings),
        (_, None) => {
            report.error = Some(format!("{} needs a problem file (--input)", command.name()));
            return report;
        }
        (Command::SolvePrimal, Some(p)) => solve_primal(&mut report, p),
        (Command::SolveDual, Some(p)) => solve_dual(&mut report, p).map(|_| ()),
        (Command::Certify, Some(p)) => certify(&mut report, p),
        (Command::Robustness, Some(p)) => robustness(&mut report, p),
    };
    if let Err(e) = outcome {
        report.error = Some(e.to_string());
    }
    report
}
