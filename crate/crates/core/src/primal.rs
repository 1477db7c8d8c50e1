//! Success probabilities of concrete testers and maximization over a class.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::ConicOptions;
use crate::dual::{solve_dual_with_tester, DualOptions};
use crate::error::{Error, Result};
use crate::hermitian::{random_pure_state, Hermitian, SystemLayout, C64};
use crate::model::{solve_tester_program, Split, StructuredCut, SumSetShape};
use crate::process::{ChoiProcess, DiscriminationInstance};
use crate::strategy::{
    exact_single_use, random_single_use, sequential_elements, CustomCone, Decomposition, StrategyClass, Tester,
    DEFAULT_ADAPTIVE_OUTCOMES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimalMethod {
    /// Solved to optimality by a single conic program or closed form.
    Exact,
    /// Alternating maximization; a lower bound on the class optimum.
    Seesaw,
    /// Search over input states.
    Grid,
}

#[derive(Clone, Debug)]
pub struct PrimalResult {
    pub value: f64,
    pub tester: Tester,
    pub method: PrimalMethod,
    pub restarts: usize,
    /// The value is the class optimum rather than a lower bound.
    pub certified_exact: bool,
    /// Objective after each round of the best restart.
    pub history: Vec<f64>,
}

/// `P(Φ) = Σ_m p_m ⟨Φ_m, E_m⟩`.
pub fn success_probability(inst: &DiscriminationInstance, tester: &Tester) -> Result<f64> {
    if tester.elements.len() != inst.num_outcomes() {
        return Err(Error::DimensionMismatch {
            context: "tester elements",
            expected: inst.num_outcomes(),
            found: tester.elements.len(),
        });
    }
    if tester.layout() != inst.layout() {
        return Err(Error::InvalidLayout(format!(
            "tester layout {} differs from instance layout {}",
            tester.layout(),
            inst.layout()
        )));
    }
    Ok(tester
        .elements
        .iter()
        .zip(inst.combs())
        .zip(inst.priors())
        .map(|((phi, e), p)| p * phi.matrix().inner(e.matrix()))
        .sum())
}

fn value_of(inst: &DiscriminationInstance, elements: &[Hermitian]) -> f64 {
    elements.iter().zip(inst.weighted_all()).map(|(phi, c)| phi.inner(&c)).sum()
}

/// Optimal two-outcome measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct Helstrom {
    pub value: f64,
    /// Projectors onto the nonnegative and negative eigenspaces of `p_1 ρ_1 − p_2 ρ_2`.
    pub measurement: [Hermitian; 2],
}

const DENSITY_TOL: f64 = 1e-9;

fn check_density(rho: &Hermitian, name: &str) -> Result<()> {
    if (rho.trace() - 1.0).abs() > DENSITY_TOL || !rho.is_psd(DENSITY_TOL) {
        return Err(Error::invalid(format!("{name} is not a density matrix")));
    }
    Ok(())
}

/// `1/2 + 1/2 ‖p_1 ρ_1 − p_2 ρ_2‖_1`.
pub fn helstrom_two_state(p1: f64, rho1: &Hermitian, p2: f64, rho2: &Hermitian) -> Result<Helstrom> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch { context: "helstrom states", expected: rho1.dim(), found: rho2.dim() });
    }
    if p1 < 0.0 || p2 < 0.0 || (p1 + p2 - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("priors must be nonnegative and sum to 1"));
    }
    check_density(rho1, "first state")?;
    check_density(rho2, "second state")?;
    let gamma = &rho1.scale(p1) - &rho2.scale(p2);
    let positive = gamma.map_spectrum(|x| if x >= 0.0 { 1.0 } else { 0.0 });
    let negative = &Hermitian::identity(gamma.dim()) - &positive;
    Ok(Helstrom { value: 0.5 + 0.5 * gamma.trace_norm(), measurement: [positive, negative] })
}

/// Output of every channel on the input `φ`.
pub(crate) fn outputs_on(inst: &DiscriminationInstance, state: &[C64]) -> Vec<Hermitian> {
    let conj: Vec<C64> = state.iter().map(|z| z.conj()).collect();
    let input = Hermitian::projector(&conj);
    let split = Split::new(inst.layout(), &[1]);
    inst.combs().iter().map(|e| split.onto_comp(&input, e.matrix())).collect()
}

/// Best measurement for the weighted states `p_m ρ_m` and its value.
pub(crate) fn best_measurement(
    priors: &[f64],
    states: &[Hermitian],
    options: &ConicOptions,
) -> Result<(f64, Vec<Hermitian>)> {
    let w = states[0].dim();
    if states.len() == 2 {
        let h = helstrom_two_state(priors[0], &states[0], priors[1], &states[1])?;
        let [a, b] = h.measurement;
        return Ok((h.value, vec![a, b]));
    }
    let layout = SystemLayout::new(vec![w, 1])?;
    let costs: Vec<Hermitian> = states.iter().zip(priors).map(|(s, p)| s.scale(*p)).collect();
    let cuts: Vec<StructuredCut> = (0..states.len()).map(StructuredCut::full).collect();
    let sol = solve_tester_program(&costs, &layout, &SumSetShape::DualComb, &cuts, options)?;
    let povm = exact_single_use(&clip(&sol.elements), w);
    let value = povm.iter().zip(&costs).map(|(e, c)| e.inner(c)).sum();
    Ok((value, povm))
}

fn clip(elements: &[Hermitian]) -> Vec<Hermitian> {
    elements.iter().map(|e| e.map_spectrum(|x| x.max(0.0))).collect()
}

fn single_use_steps(inst: &DiscriminationInstance) -> Result<()> {
    if inst.time_steps() != 1 {
        return Err(Error::InvalidLayout(format!("needs a single-use instance, got T = {}", inst.time_steps())));
    }
    Ok(())
}

fn fixed_input_value(inst: &DiscriminationInstance, state: &[C64], options: &ConicOptions) -> Result<(f64, Vec<Hermitian>)> {
    best_measurement(inst.priors(), &outputs_on(inst, state), options)
}

fn input_tester(inst: &DiscriminationInstance, state: &[C64], povm: &[Hermitian], class: StrategyClass) -> Result<Tester> {
    let conj: Vec<C64> = state.iter().map(|z| z.conj()).collect();
    let input = Hermitian::projector(&conj);
    Tester::new(povm.iter().map(|p| p.kron(&input)).collect(), inst.layout(), class)
}

/// Best measurement of the outputs `Ê_m(φ)`.
pub fn optimize_fixed_input(inst: &DiscriminationInstance, state: &[C64]) -> Result<PrimalResult> {
    single_use_steps(inst)?;
    let class = StrategyClass::FixedInput { state: state.to_vec() };
    class.check_layout(inst.layout())?;
    let (_, povm) = fixed_input_value(inst, state, &ConicOptions::with_tol(1e-11))?;
    let tester = input_tester(inst, state, &povm, class)?;
    let value = success_probability(inst, &tester)?;
    Ok(PrimalResult { value, tester, method: PrimalMethod::Exact, restarts: 0, certified_exact: true, history: vec![value] })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableConfig {
    /// Bloch-sphere grid spacing for qubit inputs. `None` picks 1° for two
    /// outcomes and 6° otherwise.
    pub grid_degrees: Option<f64>,
    /// Random starts for inputs beyond a qubit.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SeparableConfig {
    fn default() -> Self {
        Self { grid_degrees: None, restarts: 16, seed: 0 }
    }
}

fn bloch_state(theta: f64, phi: f64) -> Vec<C64> {
    vec![C64::new((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)]
}

/// Unit vector from real coordinates.
fn state_from_coords(x: &[f64]) -> Vec<C64> {
    let d = x.len() / 2;
    let v: Vec<C64> = (0..d).map(|k| C64::new(x[2 * k], x[2 * k + 1])).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    v.into_iter().map(|z| z / norm).collect()
}

/// Coordinate pattern search with step halving.
fn pattern_search(start: Vec<f64>, mut step: f64, min_step: f64, f: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let mut x = start;
    let mut fx = f(&x);
    while step > min_step {
        let mut improved = false;
        for k in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[k] += dir * step;
                let fy = f(&y);
                if fy > fx + 1e-15 {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (fx, x)
}

/// Maximizes over pure product inputs: a Bloch grid with local refinement for a
/// qubit input, multi-start pattern search otherwise.
pub fn optimize_separable_input(inst: &DiscriminationInstance, config: &SeparableConfig) -> Result<PrimalResult> {
    single_use_steps(inst)?;
    let v = inst.layout().dims()[1];
    let options = ConicOptions::with_tol(1e-10);
    let eval = |state: &[C64]| -> f64 { fixed_input_value(inst, state, &options).map_or(f64::NEG_INFINITY, |r| r.0) };

    let (best_state, grid_spacing, restarts) = if v == 2 {
        let degrees = config.grid_degrees.unwrap_or(if inst.num_outcomes() == 2 { 1.0 } else { 6.0 });
        let step = degrees.to_radians();
        let rows = (std::f64::consts::PI / step).round().max(1.0) as usize;
        let mut points = Vec::new();
        for i in 0..=rows {
            let theta = std::f64::consts::PI * i as f64 / rows as f64;
            let ring = ((2.0 * std::f64::consts::PI * theta.sin()) / step).round().max(1.0) as usize;
            let ring = if i == 0 || i == rows { 1 } else { ring.max(1) };
            for k in 0..ring {
                points.push((theta, 2.0 * std::f64::consts::PI * k as f64 / ring as f64));
            }
        }
        let values: Vec<f64> = points.par_iter().map(|&(t, p)| eval(&bloch_state(t, p))).collect();
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let refined: Vec<(f64, Vec<f64>)> = order
            .iter()
            .take(4)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&&k| {
                let (t, p) = points[k];
                pattern_search(vec![t, p], step / 2.0, 1e-8, |x| eval(&bloch_state(x[0], x[1])))
            })
            .collect();
        let (_, x) = refined.into_iter().fold((f64::NEG_INFINITY, vec![0.0, 0.0]), |acc, r| if r.0 > acc.0 { r } else { acc });
        (bloch_state(x[0], x[1]), Some(degrees), points.len())
    } else {
        let starts = config.restarts.max(1);
        let results: Vec<(f64, Vec<f64>)> = (0..starts)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(r as u64);
                let s = random_pure_state(v, &mut rng);
                let x: Vec<f64> = s.iter().flat_map(|z| [z.re, z.im]).collect();
                pattern_search(x, 0.25, 1e-7, |x| eval(&state_from_coords(x)))
            })
            .collect();
        let (_, x) = results.into_iter().fold((f64::NEG_INFINITY, Vec::new()), |acc, r| if r.0 > acc.0 { r } else { acc });
        (state_from_coords(&x), None, starts)
    };

    let (_, povm) = fixed_input_value(inst, &best_state, &ConicOptions::with_tol(1e-11))?;
    let tester = input_tester(inst, &best_state, &povm, StrategyClass::SeparableInput)?;
    let value = success_probability(inst, &tester)?;
    Ok(PrimalResult {
        value,
        tester,
        method: PrimalMethod::Grid,
        restarts,
        certified_exact: v == 2 && grid_spacing.is_some_and(|d| d <= 1.0),
        history: vec![value],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeesawConfig {
    /// Outcomes `J` of the first-round tester.
    pub outcomes: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Stop once the gain stays below `stall_gain` for `stall_rounds` rounds.
    pub stall_gain: f64,
    pub stall_rounds: usize,
    pub max_rounds: usize,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        Self {
            outcomes: DEFAULT_ADAPTIVE_OUTCOMES,
            restarts: 32,
            seed: 0,
            stall_gain: 1e-9,
            stall_rounds: 3,
            max_rounds: 200,
        }
    }
}

struct SeesawRun {
    value: f64,
    first: Vec<Hermitian>,
    second: Vec<Vec<Hermitian>>,
    history: Vec<f64>,
}

fn seesaw_run(inst: &DiscriminationInstance, config: &SeesawConfig, restart: usize) -> Result<SeesawRun> {
    let dims = inst.layout().dims();
    let outcomes = inst.num_outcomes();
    let j_count = config.outcomes.max(1);
    let split = Split::new(inst.layout(), &[0, 1]);
    let second_layout = SystemLayout::new(vec![dims[0], dims[1]])?;
    let first_layout = SystemLayout::new(vec![dims[2], dims[3]])?;
    let costs = inst.weighted_all();
    let options = ConicOptions::with_tol(1e-10);
    let second_cuts: Vec<StructuredCut> = (0..outcomes).map(StructuredCut::full).collect();
    let first_cuts: Vec<StructuredCut> = (0..j_count).map(StructuredCut::full).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(restart as u64);
    let mut first = random_single_use(dims[2], dims[3], j_count, &mut rng);
    let mut second: Vec<Vec<Hermitian>> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut stalled = 0;
    for _ in 0..config.max_rounds {
        second = first
            .iter()
            .map(|a| {
                let local: Vec<Hermitian> = costs.iter().map(|c| split.onto_factor(a, c)).collect();
                let sol = solve_tester_program(&local, &second_layout, &SumSetShape::DualComb, &second_cuts, &options)?;
                Ok(exact_single_use(&clip(&sol.elements), dims[0]))
            })
            .collect::<Result<_>>()?;
        let local: Vec<Hermitian> = second
            .iter()
            .map(|bs| {
                let mut k = Hermitian::zeros(split.comp_dim);
                for (b, c) in bs.iter().zip(&costs) {
                    k += &split.onto_comp(b, c);
                }
                k
            })
            .collect();
        let sol = solve_tester_program(&local, &first_layout, &SumSetShape::DualComb, &first_cuts, &options)?;
        first = exact_single_use(&clip(&sol.elements), dims[2]);
        let value = value_of(inst, &sequential_elements(&first, &second, outcomes, inst.dim()));
        let gain = value - history.last().copied().unwrap_or(f64::NEG_INFINITY);
        history.push(value);
        stalled = if gain < config.stall_gain { stalled + 1 } else { 0 };
        if stalled >= config.stall_rounds {
            break;
        }
    }
    let value = *history.last().expect("at least one round");
    Ok(SeesawRun { value, first, second, history })
}

/// Alternating maximization over `Φ_m = Σ_j B^(j)_m ⊗ A_j`: the second-round
/// testers given the first, then the first-round tester given the second.
pub fn seesaw_sequential(inst: &DiscriminationInstance, config: &SeesawConfig) -> Result<PrimalResult> {
    if inst.time_steps() != 2 {
        return Err(Error::InvalidLayout(format!("sequential testers need T = 2, got T = {}", inst.time_steps())));
    }
    let restarts = config.restarts.max(1);
    let runs: Vec<Result<SeesawRun>> = (0..restarts).into_par_iter().map(|r| seesaw_run(inst, config, r)).collect();
    let mut best: Option<SeesawRun> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let elements = sequential_elements(&best.first, &best.second, inst.num_outcomes(), inst.dim());
    let tester = Tester::new(elements, inst.layout(), StrategyClass::SequentialTwoStep)?
        .with_decomposition(Decomposition::Sequential { first: best.first, second: best.second });
    let value = success_probability(inst, &tester)?;
    Ok(PrimalResult { value, tester, method: PrimalMethod::Seesaw, restarts, certified_exact: false, history: best.history })
}

/// Exact optimum over a class whose cone is generated by `cuts`, with sums in `shape`.
fn exact_over(
    inst: &DiscriminationInstance,
    class: StrategyClass,
    shape: &SumSetShape,
    cuts: &[StructuredCut],
) -> Result<PrimalResult> {
    let sol = solve_tester_program(&inst.weighted_all(), inst.layout(), shape, cuts, &ConicOptions::with_tol(1e-11))?;
    let tester = Tester::new(clip(&sol.elements), inst.layout(), class)?;
    let value = success_probability(inst, &tester)?;
    Ok(PrimalResult { value, tester, method: PrimalMethod::Exact, restarts: 0, certified_exact: true, history: vec![value] })
}

/// Optimum over all testers.
pub fn optimize_global(inst: &DiscriminationInstance) -> Result<PrimalResult> {
    let cuts: Vec<StructuredCut> = (0..inst.num_outcomes()).map(StructuredCut::full).collect();
    exact_over(inst, StrategyClass::Global, &SumSetShape::DualComb, &cuts)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrimalConfig {
    pub seesaw: SeesawConfig,
    pub separable: SeparableConfig,
    pub dual: DualOptions,
}

/// Best tester found for the class, exact where the class admits a single conic program.
pub fn optimize_primal(inst: &DiscriminationInstance, class: &StrategyClass, config: &PrimalConfig) -> Result<PrimalResult> {
    class.check_layout(inst.layout())?;
    let outcomes = inst.num_outcomes();
    let full: Vec<StructuredCut> = (0..outcomes).map(StructuredCut::full).collect();
    match class {
        StrategyClass::Global => optimize_global(inst),
        StrategyClass::FixedInput { state } => optimize_fixed_input(inst, state),
        StrategyClass::SeparableInput => optimize_separable_input(inst, &config.separable),
        StrategyClass::SequentialTwoStep => seesaw_sequential(inst, &config.seesaw),
        StrategyClass::Nonadaptive | StrategyClass::MaxEntangled => {
            exact_over(inst, class.clone(), &class.sum_set(inst.layout())?, &full)
        }
        StrategyClass::Custom(c) if matches!(c.cone, CustomCone::Psd) => {
            exact_over(inst, class.clone(), &c.sum_set, &full)
        }
        StrategyClass::Custom(c) if matches!(c.cone, CustomCone::Generated(_)) => {
            let CustomCone::Generated(generators) = &c.cone else { unreachable!() };
            let cuts: Vec<StructuredCut> = generators.iter().map(|g| StructuredCut::ray(inst.layout(), g)).collect();
            exact_over(inst, class.clone(), &c.sum_set, &cuts)
        }
        _ => {
            let outcome = solve_dual_with_tester(inst, class, &config.dual)?;
            let value = success_probability(inst, &outcome.tester)?;
            Ok(PrimalResult {
                value,
                tester: outcome.tester,
                method: PrimalMethod::Seesaw,
                restarts: config.dual.separation.restarts,
                certified_exact: false,
                history: outcome.certificate.history.iter().map(|h| h.0).collect(),
            })
        }
    }
}

/// Combs of a single-use instance seen as states on `[W, 1]`.
pub fn state_instance(priors: Vec<f64>, states: &[Hermitian]) -> Result<DiscriminationInstance> {
    let d = states.first().ok_or_else(|| Error::invalid("no states given"))?.dim();
    let layout = SystemLayout::new(vec![d, 1])?;
    let combs = states
        .iter()
        .map(|s| ChoiProcess::new(s.clone(), layout.clone(), crate::process::Role::CombCandidate))
        .collect::<Result<Vec<_>>>()?;
    DiscriminationInstance::new(combs, priors, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::CMatrix;
    use crate::process::{choi_from_kraus, choi_from_unitary, Role};
    use crate::strategy::validate_tester;

    fn ket(re: &[f64]) -> Vec<C64> {
        re.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    fn channel_instance(channels: Vec<ChoiProcess>, priors: Vec<f64>) -> DiscriminationInstance {
        DiscriminationInstance::new(channels, priors, 1).unwrap()
    }

    fn pauli_z() -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_vec(ket(&[1.0, -1.0])))
    }

    #[test]
    fn helstrom_examples() {
        let zero = Hermitian::basis_projector(2, 0);
        let one = Hermitian::basis_projector(2, 1);
        assert!((helstrom_two_state(0.5, &zero, 0.5, &one).unwrap().value - 1.0).abs() < 1e-12);
        assert!((helstrom_two_state(0.3, &zero, 0.7, &zero).unwrap().value - 0.7).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = Hermitian::projector(&ket(&[h, h]));
        let v = helstrom_two_state(0.5, &zero, 0.5, &plus).unwrap().value;
        assert!((v - (1.0 + h) / 2.0).abs() < 1e-12);
        assert!(helstrom_two_state(0.5, &zero.scale(2.0), 0.5, &one).is_err());
    }

    #[test]
    fn helstrom_measurement_attains_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = crate::hermitian::random_density(3, &mut rng);
        let b = crate::hermitian::random_density(3, &mut rng);
        let h = helstrom_two_state(0.4, &a, 0.6, &b).unwrap();
        let attained = 0.4 * h.measurement[0].inner(&a) + 0.6 * h.measurement[1].inner(&b);
        assert!((attained - h.value).abs() < 1e-12);
    }

    #[test]
    fn fixed_input_amplitude_damping() {
        let g: f64 = 0.5;
        let k0 = CMatrix::from_row_slice(2, 2, &ket(&[1.0, 0.0, 0.0, (1.0 - g).sqrt()]));
        let k1 = CMatrix::from_row_slice(2, 2, &ket(&[0.0, g.sqrt(), 0.0, 0.0]));
        let damp = choi_from_kraus(&[k0, k1], 2, 2).unwrap();
        let id = choi_from_unitary(&CMatrix::identity(2, 2)).unwrap();
        let inst = channel_instance(vec![damp, id], vec![0.5, 0.5]);
        let r = optimize_fixed_input(&inst, &ket(&[0.0, 1.0])).unwrap();
        assert!((r.value - 0.75).abs() < 1e-10, "{}", r.value);
        assert!(validate_tester(&r.tester, &r.tester.class, 1e-8).unwrap().valid);
    }

    #[test]
    fn fixed_input_three_identity_channels() {
        let id = choi_from_unitary(&CMatrix::identity(2, 2)).unwrap();
        let inst = channel_instance(vec![id.clone(), id.clone(), id], vec![0.2, 0.5, 0.3]);
        let r = optimize_fixed_input(&inst, &ket(&[0.6, 0.8])).unwrap();
        assert!((r.value - 0.5).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn separable_input_finds_plus_state() {
        let z = choi_from_unitary(&pauli_z()).unwrap();
        let id = choi_from_unitary(&CMatrix::identity(2, 2)).unwrap();
        let inst = channel_instance(vec![z, id], vec![0.5, 0.5]);
        let r = optimize_separable_input(&inst, &SeparableConfig::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
        assert!(r.certified_exact);
    }

    #[test]
    fn global_optimum_on_states_is_helstrom() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let zero = Hermitian::basis_projector(2, 0);
        let plus = Hermitian::projector(&ket(&[h, h]));
        let inst = state_instance(vec![0.5, 0.5], &[zero, plus]).unwrap();
        let r = optimize_global(&inst).unwrap();
        assert!((r.value - (1.0 + h) / 2.0).abs() < 1e-8);
    }

    #[test]
    fn seesaw_on_identical_combs() {
        let layout = SystemLayout::new(vec![2, 2, 2, 2]).unwrap();
        let c = crate::process::random_comb(&layout, 2, 5).unwrap();
        let c = ChoiProcess::new(c.into_matrix(), layout, Role::CombCandidate).unwrap();
        let inst = DiscriminationInstance::new(vec![c.clone(), c], vec![0.5, 0.5], 2).unwrap();
        let config = SeesawConfig { restarts: 2, outcomes: 2, ..SeesawConfig::default() };
        let r = seesaw_sequential(&inst, &config).unwrap();
        assert!((r.value - 0.5).abs() < 1e-8);
        assert!(validate_tester(&r.tester, &StrategyClass::SequentialTwoStep, 1e-7).unwrap().valid);
        assert!(r.history.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }
}
