use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use procdisc::dual::{evaluate_d_s, solve_dual, DualOptions};
use procdisc::conic::ConicOptions;
use procdisc::hermitian::{random_density, random_unitary, CMatrix};
use procdisc::instances::two_use_instance;
use procdisc::primal::{
    helstrom_two_state, optimize_fixed_input, optimize_global, optimize_separable_input, seesaw_sequential,
    success_probability, SeesawConfig, SeparableConfig,
};
use procdisc::process::{choi_from_unitary, random_comb, DiscriminationInstance};
use procdisc::strategy::{sample_tester, SampleConfig, StrategyClass};
use procdisc::{Hermitian, SystemLayout, C64};

fn bloch(rho: &Hermitian) -> [f64; 3] {
    [2.0 * rho.get(0, 1).re, -2.0 * rho.get(0, 1).im, rho.get(0, 0).re - rho.get(1, 1).re]
}

/// Success of the projective measurement along `n` (outcome 1 on `+n`).
fn projective_success(p: f64, r: [f64; 3], s: [f64; 3], n: [f64; 3]) -> f64 {
    let dot = |a: [f64; 3]| a[0] * n[0] + a[1] * n[1] + a[2] * n[2];
    p * (1.0 + dot(r)) / 2.0 + (1.0 - p) * (1.0 - dot(s)) / 2.0
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / len, v[1] / len, v[2] / len]
}

#[test]
fn helstrom_matches_measurement_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let (rho, sigma) = (random_density(2, &mut rng), random_density(2, &mut rng));
        let p: f64 = rng.random_range(0.05..0.95);
        let (r, s) = (bloch(&rho), bloch(&sigma));
        // Trivial measurements guess one label outright.
        let mut best = p.max(1.0 - p);
        let mut best_dir = [0.0, 0.0, 1.0];
        for _ in 0..10_000 {
            let n = normalize([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let v = projective_success(p, r, s, n);
            if v > best {
                best = v;
                best_dir = n;
            }
        }
        let mut radius = 0.05;
        while radius > 1e-9 {
            let mut improved = false;
            for _ in 0..40 {
                let n = normalize([
                    best_dir[0] + rng.random_range(-radius..radius),
                    best_dir[1] + rng.random_range(-radius..radius),
                    best_dir[2] + rng.random_range(-radius..radius),
                ]);
                let v = projective_success(p, r, s, n);
                if v > best {
                    best = v;
                    best_dir = n;
                    improved = true;
                }
            }
            if !improved {
                radius *= 0.5;
            }
        }
        let closed = helstrom_two_state(p, &rho, 1.0 - p, &sigma).unwrap().value;
        assert!(best <= closed + 1e-12);
        assert!(closed - best < 1e-6, "closed {closed}, search {best}");
    }
}

#[test]
fn relabelling_outcomes_keeps_the_value() {
    let layout = SystemLayout::new(vec![2, 2]).unwrap();
    let combs = (0..3).map(|k| random_comb(&layout, 1, 100 + k).unwrap()).collect();
    let inst = DiscriminationInstance::new(combs, vec![0.2, 0.3, 0.5], 1).unwrap();
    let base = optimize_global(&inst).unwrap();
    for perm in [[1, 2, 0], [2, 1, 0], [0, 2, 1]] {
        let r = optimize_global(&inst.permuted(&perm).unwrap()).unwrap();
        assert!((r.value - base.value).abs() < 1e-8);
        let elements = r.tester.matrices();
        let attained: f64 = (0..3).map(|k| inst.weighted(perm[k]).inner(&elements[k])).sum();
        assert!((attained - base.value).abs() < 1e-7);
    }
}

#[test]
fn sampled_testers_respect_weak_duality() {
    let inst = two_use_instance().unwrap();
    for class in [StrategyClass::Global, StrategyClass::SequentialTwoStep, StrategyClass::Nonadaptive] {
        let cert = solve_dual(&inst, &class, &DualOptions::default()).unwrap();
        let bound = evaluate_d_s(&class, &cert.chi, &ConicOptions::default()).unwrap();
        for seed in 0..20 {
            let tester = sample_tester(&class, inst.layout(), 3, seed, &SampleConfig::default()).unwrap();
            let p = success_probability(&inst, &tester).unwrap();
            assert!(p <= bound + 1e-7, "{}: {p} > {bound}", class.name());
        }
    }
}

#[test]
fn seesaw_on_the_example() {
    let inst = two_use_instance().unwrap();
    let adaptive = seesaw_sequential(&inst, &SeesawConfig { outcomes: 8, restarts: 32, seed: 1, ..SeesawConfig::default() }).unwrap();
    assert!((0.928..=0.9335).contains(&adaptive.value), "{}", adaptive.value);
    assert!(adaptive.history.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    let blind = seesaw_sequential(&inst, &SeesawConfig { outcomes: 1, restarts: 32, seed: 1, ..SeesawConfig::default() }).unwrap();
    assert!(blind.value <= adaptive.value + 1e-9);
    let again = seesaw_sequential(&inst, &SeesawConfig { outcomes: 8, restarts: 32, seed: 1, ..SeesawConfig::default() }).unwrap();
    assert_eq!(again.value, adaptive.value);
}

#[test]
fn step_count_is_enforced() {
    let inst = two_use_instance().unwrap();
    assert!(optimize_fixed_input(&inst, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).is_err());
    let layout = SystemLayout::new(vec![2, 2]).unwrap();
    let single = DiscriminationInstance::new(
        vec![random_comb(&layout, 1, 1).unwrap(), random_comb(&layout, 1, 2).unwrap()],
        vec![0.5, 0.5],
        1,
    )
    .unwrap();
    assert!(seesaw_sequential(&single, &SeesawConfig::default()).is_err());
    assert!(optimize_separable_input(&inst, &SeparableConfig::default()).is_err());
}

#[test]
fn orthogonal_outputs_are_perfectly_distinguished() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let u = random_unitary(2, &mut rng);
    // V maps u|0> to an orthogonal vector.
    let x = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let v = &u * &x;
    let inst = DiscriminationInstance::new(
        vec![choi_from_unitary(&u).unwrap(), choi_from_unitary(&v).unwrap()],
        vec![0.5, 0.5],
        1,
    )
    .unwrap();
    let r = optimize_fixed_input(&inst, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
    assert!((r.value - 1.0).abs() < 1e-9);
    let sep = optimize_separable_input(&inst, &SeparableConfig::default()).unwrap();
    assert!((sep.value - 1.0).abs() < 1e-8);
}

#[test]
fn identical_channels_give_the_largest_prior() {
    let id = choi_from_unitary(&CMatrix::identity(2, 2)).unwrap();
    let inst = DiscriminationInstance::new(vec![id.clone(), id], vec![0.35, 0.65], 1).unwrap();
    let r = optimize_separable_input(&inst, &SeparableConfig::default()).unwrap();
    assert!((r.value - 0.65).abs() < 1e-8);
}
