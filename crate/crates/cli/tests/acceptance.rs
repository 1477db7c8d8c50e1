//! Acceptance suite: one pass/fail line per criterion.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use procdisc::certification::{
    assert_maxent_optimal, check_global_optimality, pauli_covariant_ensemble, phase_shift_action, symmetrize_dual,
    OptimalityCondition,
};
use procdisc::conic::ConicOptions;
use procdisc::dual::{evaluate_d_s, solve_dual, solve_dual_with_tester, solve_global_dual, DualOptions};
use procdisc::hermitian::CMatrix;
use procdisc::instances::{max_pairwise_overlap, perfect_strategy_states, reduced_sequential_value, two_use_instance};
use procdisc::primal::{optimize_global, seesaw_sequential, state_instance, SeesawConfig};
use procdisc::process::{is_comb, random_comb, random_dual_comb, ChoiProcess, DiscriminationInstance, Role};
use procdisc::robustness::{robustness_direct, robustness_from_value, RobustnessProblem};
use procdisc::strategy::StrategyClass;
use procdisc::{Hermitian, Result, SystemLayout, C64};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn random_priors(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn random_instance(rng: &mut ChaCha8Rng, m: usize, steps: usize) -> Result<DiscriminationInstance> {
    let layout = SystemLayout::new(vec![2; 2 * steps])?;
    let combs = (0..m).map(|_| random_comb(&layout, steps, rng.random())).collect::<Result<Vec<_>>>()?;
    DiscriminationInstance::new(combs, random_priors(rng, m), steps)
}

/// Qubit state from a Bloch vector drawn uniformly in the ball.
fn random_qubit(rng: &mut ChaCha8Rng) -> (Hermitian, [f64; 3]) {
    let r = loop {
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            break v;
        }
    };
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new((1.0 + r[2]) / 2.0, 0.0),
            C64::new(r[0] / 2.0, -r[1] / 2.0),
            C64::new(r[0] / 2.0, r[1] / 2.0),
            C64::new((1.0 - r[2]) / 2.0, 0.0),
        ],
    );
    (Hermitian::new(m).expect("Hermitian by construction"), r)
}

/// `(1 + ‖p ρ − q σ‖₁) / 2` from Bloch vectors: the difference has eigenvalues `(p − q)/2 ± |p r − q s|/2`.
fn helstrom_oracle(p: f64, r: [f64; 3], q: f64, s: [f64; 3]) -> f64 {
    let center = (p - q) / 2.0;
    let radius = (0..3).map(|k| (p * r[k] - q * s[k]).powi(2)).sum::<f64>().sqrt() / 2.0;
    let trace_norm = (center + radius).abs() + (center - radius).abs();
    (1.0 + trace_norm) / 2.0
}

fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    let inst = two_use_instance()?;
    let cert = solve_dual(&inst, &StrategyClass::SequentialTwoStep, &DualOptions::default())?;
    let reduced = reduced_sequential_value(24, &ConicOptions::with_tol(1e-10))?;
    let secs = start.elapsed().as_secs_f64();
    let near = (cert.value - 0.933).abs() <= 0.005;
    let agree = (cert.value - reduced.value).abs() <= 1e-3;
    outcome(
        near && agree && secs < 60.0,
        format!("cutting plane {:.10}, reduced {:.10}, {secs:.2} s", cert.value, reduced.value),
    )
}

fn criterion_2() -> Result<Outcome> {
    let start = Instant::now();
    let cert = solve_global_dual(&two_use_instance()?, &DualOptions::default())?;
    let overlap = max_pairwise_overlap(&perfect_strategy_states()?);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (cert.value - 1.0).abs() <= 1e-6 && overlap <= 1e-9 && secs < 10.0,
        format!("global {:.10}, max overlap {overlap:.2e}, {secs:.2} s", cert.value),
    )
}

fn criterion_3() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (rho, r) = random_qubit(&mut rng);
        let (sigma, s) = random_qubit(&mut rng);
        let p = rng.random_range(0.0..1.0);
        let inst = state_instance(vec![p, 1.0 - p], &[rho, sigma])?;
        let dual = solve_dual(&inst, &StrategyClass::Global, &DualOptions::default())?;
        worst = worst.max((dual.value - helstrom_oracle(p, r, 1.0 - p, s)).abs());
    }
    outcome(worst <= 1e-6, format!("200 instances, max deviation {worst:.2e}"))
}

fn criterion_4() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let inst = random_instance(&mut rng, 2 + k % 2, 1 + (k / 2) % 2)?;
        let primal = optimize_global(&inst)?;
        let dual = solve_global_dual(&inst, &DualOptions::default())?;
        worst = worst.max((primal.value - dual.value).abs());
    }
    let inst = two_use_instance()?;
    let dual = solve_dual(&inst, &StrategyClass::SequentialTwoStep, &DualOptions::default())?;
    let seesaw = seesaw_sequential(&inst, &SeesawConfig { outcomes: 8, restarts: 32, seed: 4, ..SeesawConfig::default() })?;
    let gap = dual.value - seesaw.value;
    outcome(
        worst <= 1e-4 && gap.abs() <= 5e-3,
        format!("global max gap {worst:.2e} over 50 instances; seesaw {:.10} vs dual {:.10}", seesaw.value, dual.value),
    )
}

/// Identity channels `V_2 → W_1` and `V_1 → W_2`: positive and trace-normalized but signalling backwards in time.
fn backward_signalling() -> Result<ChoiProcess> {
    let mut v = vec![C64::new(0.0, 0.0); 16];
    for a in 0..2 {
        for b in 0..2 {
            // index ((w2 * 2 + v2) * 2 + w1) * 2 + v1 with w2 = v1 = a, v2 = w1 = b
            v[((a * 2 + b) * 2 + b) * 2 + a] = C64::new(1.0, 0.0);
        }
    }
    ChoiProcess::new(Hermitian::projector(&v), SystemLayout::new(vec![2, 2, 2, 2])?, Role::CombCandidate)
}

fn criterion_5() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shapes: [(Vec<usize>, usize); 4] = [(vec![2, 2], 1), (vec![3, 2], 1), (vec![2, 3], 1), (vec![2, 2, 2, 2], 2)];
    let (mut worst, mut accepted, mut rejected, mut violators) = (0.0f64, 0usize, 0usize, 0usize);
    for k in 0..500 {
        let (dims, steps) = &shapes[k % shapes.len()];
        let layout = SystemLayout::new(dims.clone())?;
        let comb = random_comb(&layout, *steps, rng.random())?;
        let dual = random_dual_comb(&layout, *steps, rng.random())?;
        worst = worst.max((comb.matrix().inner(dual.matrix()) - 1.0).abs());
        if is_comb(&comb, *steps, 1e-9)?.0 {
            accepted += 1;
        }
        let n = layout.total_dim();
        let scale = if rng.random::<bool>() { 1.05 } else { 0.95 };
        let mut bad = vec![comb.matrix().scale(scale)];
        // A random traceless perturbation breaks the marginal conditions.
        let h = procdisc::hermitian::random_hermitian(n, &mut rng);
        let h = &h - &Hermitian::identity(n).scale(h.trace() / n as f64);
        bad.push(comb.matrix() + &h.scale(0.05 / h.max_abs()));
        // Negative eigenvalue at unchanged trace.
        let eig = comb.matrix().eig();
        let low = Hermitian::projector(&eig.vector(n - 1));
        let high = Hermitian::projector(&eig.vector(0));
        let shift = eig.values[n - 1] + 0.05;
        bad.push(&(comb.matrix() - &low.scale(shift)) + &high.scale(shift));
        for m in bad {
            violators += 1;
            if !is_comb(&ChoiProcess::new(m, layout.clone(), Role::DualVariable)?, *steps, 1e-9)?.0 {
                rejected += 1;
            }
        }
    }
    violators += 1;
    if !is_comb(&backward_signalling()?, 2, 1e-9)?.0 {
        rejected += 1;
    }
    outcome(
        worst <= 1e-9 && accepted == 500 && rejected == violators,
        format!("max |<comb, dual> - 1| {worst:.2e}; accepted {accepted}/500; rejected {rejected}/{violators}"),
    )
}

fn criterion_6() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let options = DualOptions::default();
    let mut worst = 0.0f64;
    for k in 0..20 {
        let inst = random_instance(&mut rng, 2 + k % 2, 1 + usize::from(k % 4 == 3))?;
        let from_value = robustness_from_value(&inst, &StrategyClass::Global, &options)?;
        let direct = robustness_direct(&RobustnessProblem::for_discrimination(&inst, &StrategyClass::Global)?, 1e-8)?;
        worst = worst.max((from_value - direct).abs());
    }
    let inst = two_use_instance()?;
    let global = robustness_from_value(&inst, &StrategyClass::Global, &options)?;
    let sequential = robustness_from_value(&inst, &StrategyClass::SequentialTwoStep, &options)?;
    outcome(
        worst <= 1e-4 && (global - 2.0).abs() <= 1e-4 && (sequential - 1.799).abs() <= 0.015,
        format!("max identity gap {worst:.2e} over 20 instances; example R = {global:.6} (global), {sequential:.6} (sequential)"),
    )
}

fn criterion_7() -> Result<Outcome> {
    let inst = two_use_instance()?;
    let options = DualOptions::default();
    let sequential = solve_dual_with_tester(&inst, &StrategyClass::SequentialTwoStep, &options)?.certificate;
    let seq_verdict = check_global_optimality(&sequential, &inst, &StrategyClass::SequentialTwoStep, 1e-6)?;
    let global = solve_global_dual(&inst, &options)?;
    let global_verdict = check_global_optimality(&global, &inst, &StrategyClass::Global, 1e-6)?;
    let fires = global_verdict.optimal && global_verdict.condition == Some(OptimalityCondition::ProportionalToComb);

    let symmetric = symmetrize_dual(&global.chi, &phase_shift_action()?)?;
    let conic = ConicOptions::with_tol(1e-12);
    let before = evaluate_d_s(&StrategyClass::Global, &global.chi, &conic)?;
    let after = evaluate_d_s(&StrategyClass::Global, &symmetric, &conic)?;
    let feasible = inst
        .weighted_all()
        .iter()
        .all(|w| (symmetric.matrix() - w).min_eigenvalue() >= -1e-8);
    let drift = (after - before).abs();
    outcome(
        !seq_verdict.optimal && fires && drift <= 1e-8 && feasible,
        format!(
            "sequential optimal {}; global condition {:?}; symmetrized value drift {drift:.2e}",
            seq_verdict.optimal, global_verdict.condition
        ),
    )
}

fn criterion_8() -> Result<Outcome> {
    let seed = random_comb(&SystemLayout::new(vec![2, 2])?, 1, 8)?;
    let (inst, action) = pauli_covariant_ensemble(&seed)?;
    let verdict = assert_maxent_optimal(&inst, &action)?;
    let options = DualOptions::default();
    let maxent = solve_dual(&inst, &StrategyClass::MaxEntangled, &options)?;
    let global = solve_global_dual(&inst, &options)?;
    let gap = (maxent.value - global.value).abs();
    outcome(
        verdict.holds && gap <= 1e-5,
        format!("maxent test holds {}; maximally entangled {:.10} vs global {:.10}", verdict.holds, maxent.value, global.value),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 8] = [
        ("sequential example value", criterion_1),
        ("global example value and perfect construction", criterion_2),
        ("two-state closed form", criterion_3),
        ("zero duality gap", criterion_4),
        ("comb and dual-comb properties", criterion_5),
        ("robustness identity", criterion_6),
        ("certification", criterion_7),
        ("maximally entangled inputs under covariance", criterion_8),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = match f() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {} [{}] {name}: {detail} ({:.1} s)",
            k + 1,
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
