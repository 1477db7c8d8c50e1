//! Minimization of `D_S(χ)` over the dual cone of a strategy class.
//!
//! Classes whose cone is the full PSD cone reduce to one conic program. The
//! two-step and separable classes have infinitely many cone constraints and
//! are handled by a cutting-plane loop that alternates a restricted tester
//! program with the class separation routine.

use serde::{Deserialize, Serialize};

use crate::conic::{ConicOptions, ConicProgram, Telemetry, Term};
use crate::error::{Error, Result};
use crate::hermitian::{Hermitian, SystemLayout};
use crate::model::{add_chain, solve_tester_program, support_value, ChainEnd, MatVar, StructuredCut, SumSetShape};
use crate::process::{ChoiProcess, DiscriminationInstance, Role};
use crate::strategy::{find_violations, BoundKind, Decomposition, SeparationConfig, StrategyClass, Tester};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualOptions {
    /// Relative accuracy of every conic solve.
    pub tol: f64,
    /// Cone violations above this size trigger another cut.
    pub violation_tol: f64,
    pub max_cuts: usize,
    /// New generators added per cutting-plane round.
    pub cuts_per_round: usize,
    pub separation: SeparationConfig,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            violation_tol: 1e-6,
            max_cuts: 500,
            cuts_per_round: 4,
            separation: SeparationConfig::default(),
        }
    }
}

impl DualOptions {
    pub(crate) fn conic(&self) -> ConicOptions {
        ConicOptions::with_tol((self.tol * 1e-2).max(1e-11))
    }
}

/// `χ = λ·τ` with `τ` a comb.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombFactor {
    pub scale: f64,
    pub comb: Hermitian,
}

/// A dual-feasible point and the bound it certifies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub chi: ChoiProcess,
    /// `D_S(χ)`.
    pub value: f64,
    /// Largest class value attained by a tester found along the way.
    pub lower: f64,
    pub comb_factor: Option<CombFactor>,
    pub class: String,
    pub bound: BoundKind,
    pub cuts: usize,
    /// `(lower, upper)` after each cutting-plane round.
    pub history: Vec<(f64, f64)>,
    pub telemetry: Telemetry,
}

/// Dual certificate together with the tester attaining `lower`.
#[derive(Clone, Debug)]
pub struct DualOutcome {
    pub certificate: DualCertificate,
    pub tester: Tester,
}

/// `D_S(χ) = max_{Q ∈ S} ⟨Q, χ⟩`.
pub fn evaluate_d_s(class: &StrategyClass, chi: &ChoiProcess, options: &ConicOptions) -> Result<f64> {
    let shape = class.sum_set(chi.layout())?;
    Ok(support_value(&shape, chi.layout(), chi.matrix(), options)?.0)
}

/// `minimize λ` over `λ ≥ 0` and combs `τ` with `λτ ⪰ p_m E_m` for every `m`.
pub fn solve_global_dual(inst: &DiscriminationInstance, options: &DualOptions) -> Result<DualCertificate> {
    let layout = inst.layout();
    let n = inst.dim();
    let mut p = ConicProgram::new();
    let chi = MatVar::new(&mut p, n, false);
    let lambda = p.free_scalar();
    add_chain(&mut p, layout.dims(), chi, ChainEnd::Scale(lambda.var()));
    let mut groups = Vec::new();
    for m in 0..inst.num_outcomes() {
        let slack = p.psd_block(n);
        let g = p.add_hermitian_eq(
            n,
            |a, b| vec![Term::real(chi.at(a, b), 1.0), Term::real(slack.at(a, b), -1.0)],
            Some(&inst.weighted(m)),
        );
        groups.push(g);
    }
    p.minimize(vec![Term::real(lambda.var(), 1.0)]);
    let sol = p.solve(&options.conic())?;
    let chi_value = chi.value(&sol);
    let scale = sol.scalar(lambda);
    let comb_factor = (scale > 1e-12).then(|| CombFactor { scale, comb: chi_value.scale(1.0 / scale) });
    Ok(DualCertificate {
        chi: ChoiProcess::new(chi_value, layout.clone(), Role::DualVariable)?,
        value: scale,
        lower: sol.dual_value,
        comb_factor,
        class: StrategyClass::Global.name().to_string(),
        bound: BoundKind::Exact,
        cuts: 0,
        history: vec![(sol.dual_value, scale)],
        telemetry: sol.telemetry,
    })
}

/// Cutting-plane solution of the dual for any class with a separation routine.
pub fn solve_semi_infinite(
    inst: &DiscriminationInstance,
    class: &StrategyClass,
    options: &DualOptions,
) -> Result<DualCertificate> {
    Ok(cutting_plane(inst, class, options)?.certificate)
}

/// Dispatches to the exact conic form when the class cone is the PSD cone.
pub fn solve_dual(inst: &DiscriminationInstance, class: &StrategyClass, options: &DualOptions) -> Result<DualCertificate> {
    match class {
        StrategyClass::Global => solve_global_dual(inst, options),
        _ => Ok(solve_dual_with_tester(inst, class, options)?.certificate),
    }
}

/// Like [`solve_dual`] but also returns the best tester of the final restricted program.
pub fn solve_dual_with_tester(
    inst: &DiscriminationInstance,
    class: &StrategyClass,
    options: &DualOptions,
) -> Result<DualOutcome> {
    cutting_plane(inst, class, options)
}

fn identity_support(class: &StrategyClass, inst: &DiscriminationInstance, options: &ConicOptions) -> Option<f64> {
    let shape = class.sum_set(inst.layout()).ok()?;
    support_value(&shape, inst.layout(), &Hermitian::identity(inst.dim()), options).ok().map(|v| v.0)
}

fn is_duplicate(cuts: &[StructuredCut], candidate: &StructuredCut) -> bool {
    cuts.iter().any(|c| {
        c.factor_systems == candidate.factor_systems
            && c.terms.len() == candidate.terms.len()
            && c.terms.iter().zip(&candidate.terms).all(|((m1, f1), (m2, f2))| m1 == m2 && (f1 - f2).max_abs() < 1e-7)
    })
}

fn cutting_plane(inst: &DiscriminationInstance, class: &StrategyClass, options: &DualOptions) -> Result<DualOutcome> {
    let layout = inst.layout();
    if class.check_layout(layout)? != inst.time_steps() {
        return Err(Error::InvalidLayout("class and instance disagree on the number of steps".into()));
    }
    let shape = class.sum_set(layout)?;
    let costs = inst.weighted_all();
    let conic = options.conic();
    let outcomes = inst.num_outcomes();
    let gauge = identity_support(class, inst, &conic);

    if let Some(cuts) = exact_generators(class, layout, outcomes) {
        let sol = solve_tester_program(&costs, layout, &shape, &cuts, &conic)?;
        let chi = repair_dual(&sol.chi, &costs, &shape);
        let history = vec![(sol.value, sol.value)];
        return finish(inst, class, options, sol, cuts, chi, history);
    }

    let mut cuts: Vec<StructuredCut> = interior_generators(class, layout, outcomes);
    let negated: Vec<Hermitian> = costs.iter().map(|c| c.scale(-1.0)).collect();
    for v in find_violations(class, layout, &negated, &options.separation, &[])? {
        if cuts.len() >= options.cuts_per_round.max(outcomes) {
            break;
        }
        if !is_duplicate(&cuts, &v.cut) {
            cuts.push(v.cut);
        }
    }

    let mut history = Vec::new();
    let mut upper = f64::INFINITY;
    let mut warm: Vec<Hermitian> = Vec::new();
    loop {
        let sol = solve_tester_program(&costs, layout, &shape, &cuts, &conic)?;
        let deficits: Vec<Hermitian> = costs.iter().map(|c| &sol.chi - c).collect();
        let found = find_violations(class, layout, &deficits, &options.separation, &warm)?;
        let worst = found.first().map_or(0.0, |v| v.value);
        let shift = (-worst).max(0.0);
        if let Some(g) = gauge {
            upper = upper.min(sol.value + shift * g);
        }
        history.push((sol.value, upper));
        log::debug!("cuts {} lower {:.9} violation {:.3e}", cuts.len(), sol.value, worst);

        let new: Vec<StructuredCut> = found
            .into_iter()
            .filter(|v| v.value < -options.violation_tol)
            .map(|v| v.cut)
            .fold(Vec::new(), |mut acc, c| {
                if acc.len() < options.cuts_per_round && !is_duplicate(&cuts, &c) && !is_duplicate(&acc, &c) {
                    acc.push(c);
                }
                acc
            });
        if worst >= -options.violation_tol || new.is_empty() {
            let chi = &sol.chi + &Hermitian::identity(inst.dim()).scale(shift);
            return finish(inst, class, options, sol, cuts, chi, history);
        }
        if cuts.len() + new.len() > options.max_cuts {
            return Err(Error::CutLimit { cuts: cuts.len(), lower: sol.value, upper });
        }
        warm = sol
            .blocks
            .iter()
            .zip(&cuts)
            .filter(|(_, c)| !c.factor_systems.is_empty())
            .map(|(b, _)| b.clone())
            .filter(|b| b.trace() > 1e-6)
            .collect();
        warm.sort_by(|a, b| b.trace().total_cmp(&a.trace()));
        warm.truncate(4);
        cuts.extend(new);
    }
}

/// Generators that span the class cone exactly on the face selected by `S`.
fn exact_generators(class: &StrategyClass, layout: &SystemLayout, outcomes: usize) -> Option<Vec<StructuredCut>> {
    match class {
        StrategyClass::FixedInput { state } => {
            let conj: Vec<crate::hermitian::C64> = state.iter().map(|z| z.conj()).collect();
            let input = Hermitian::projector(&conj);
            Some((0..outcomes).map(|m| StructuredCut { factor_systems: vec![1], terms: vec![(m, input.clone())] }).collect())
        }
        c if c.has_psd_cone() => {
            let _ = layout;
            Some((0..outcomes).map(StructuredCut::full).collect())
        }
        _ => None,
    }
}

/// Generators of the uniform strategy of a class, which make every restricted
/// program strictly feasible.
fn interior_generators(class: &StrategyClass, layout: &SystemLayout, outcomes: usize) -> Vec<StructuredCut> {
    let dims = layout.dims();
    match class {
        StrategyClass::SeparableInput => (0..outcomes)
            .map(|m| StructuredCut { factor_systems: vec![1], terms: vec![(m, Hermitian::identity(dims[1]).scale(1.0 / dims[1] as f64))] })
            .collect(),
        StrategyClass::SequentialTwoStep => {
            let d = dims[0] * dims[1];
            let b = Hermitian::identity(d).scale(1.0 / (dims[1] * outcomes) as f64);
            vec![StructuredCut { factor_systems: vec![0, 1], terms: (0..outcomes).map(|m| (m, b.clone())).collect() }]
        }
        StrategyClass::OneWayAB => {
            let sigma = Hermitian::identity(dims[1] * dims[2]).scale(1.0 / dims[1] as f64);
            (0..outcomes).map(|m| StructuredCut { factor_systems: vec![1, 2], terms: vec![(m, sigma.clone())] }).collect()
        }
        _ => Vec::new(),
    }
}

/// Makes `χ ⪰ c_m` hold on the whole space. Directions outside the support of a
/// prescribed sum do not change `D_S`, so they are raised first; the remaining
/// violation is absorbed by a multiple of the identity.
fn repair_dual(chi: &Hermitian, costs: &[Hermitian], shape: &SumSetShape) -> Hermitian {
    let n = chi.dim();
    let violation = |x: &Hermitian| -> f64 {
        costs.iter().map(|c| (x - c).min_eigenvalue()).fold(f64::INFINITY, f64::min).min(0.0).abs()
    };
    let kernel = match shape {
        SumSetShape::Singleton { matrix } => {
            let support = matrix.positive_projector(1e-9 * (1.0 + matrix.max_abs()));
            let k = &Hermitian::identity(n) - &support;
            (k.trace() > 0.5).then_some(k)
        }
        _ => None,
    };
    let mut best = chi.clone();
    let mut best_violation = violation(chi);
    if let Some(k) = kernel {
        let mut t = 1.0 + chi.max_abs() + costs.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
        for _ in 0..40 {
            let candidate = chi + &k.scale(t);
            let v = violation(&candidate);
            if v < best_violation * 0.999 {
                best = candidate;
                best_violation = v;
            } else if v >= best_violation {
                break;
            }
            t *= 2.0;
        }
    }
    &best + &Hermitian::identity(n).scale(best_violation)
}

fn finish(
    inst: &DiscriminationInstance,
    class: &StrategyClass,
    options: &DualOptions,
    sol: crate::model::TesterProgramSolution,
    cuts: Vec<StructuredCut>,
    chi: Hermitian,
    history: Vec<(f64, f64)>,
) -> Result<DualOutcome> {
    let layout = inst.layout();
    let shape = class.sum_set(layout)?;
    let (value, _) = support_value(&shape, layout, &chi, &options.conic())?;
    let decomposition = match class {
        StrategyClass::SequentialTwoStep => Some(Decomposition::Sequential {
            first: sol.blocks.clone(),
            second: cuts
                .iter()
                .map(|c| {
                    let mut parts = vec![Hermitian::zeros(c.terms[0].1.dim()); inst.num_outcomes()];
                    for (m, f) in &c.terms {
                        parts[*m] = f.clone();
                    }
                    parts
                })
                .collect(),
        }),
        StrategyClass::OneWayAB => Some(Decomposition::OneWay {
            channels: cuts.iter().map(|c| c.terms[0].1.clone()).collect(),
            local: cuts
                .iter()
                .zip(&sol.blocks)
                .map(|(c, b)| {
                    let mut parts = vec![Hermitian::zeros(b.dim()); inst.num_outcomes()];
                    parts[c.terms[0].0] = b.clone();
                    parts
                })
                .collect(),
        }),
        _ => None,
    };
    let elements: Vec<Hermitian> = sol.elements.iter().map(|e| e.map_spectrum(|x| x.max(0.0))).collect();
    let mut tester = Tester::new(elements, layout, class.clone())?;
    if let Some(d) = decomposition {
        tester = tester.with_decomposition(d);
    }
    let certificate = DualCertificate {
        chi: ChoiProcess::new(chi, layout.clone(), Role::DualVariable)?,
        value,
        lower: sol.value,
        comb_factor: None,
        class: class.name().to_string(),
        bound: class.bound_kind(),
        cuts: cuts.len(),
        history,
        telemetry: sol.telemetry,
    };
    Ok(DualOutcome { certificate, tester })
}

/// Replays a certificate: the cone constraints hold up to `tol` and `D_S(χ)` matches the stored value.
pub fn verify_certificate(
    cert: &DualCertificate,
    inst: &DiscriminationInstance,
    class: &StrategyClass,
    tol: f64,
    separation: &SeparationConfig,
) -> Result<bool> {
    let layout = inst.layout();
    let deficits: Vec<Hermitian> = inst.weighted_all().iter().map(|c| cert.chi.matrix() - c).collect();
    let found = find_violations(class, layout, &deficits, separation, &[])?;
    let feasible = found.first().is_none_or(|v| v.value >= -tol);
    let value = evaluate_d_s(class, &cert.chi, &ConicOptions::with_tol(1e-10))?;
    Ok(feasible && (value - cert.value).abs() <= tol * (1.0 + value.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{random_density, SystemLayout, C64};
    use crate::process::random_comb;
    use rand::SeedableRng;

    fn state_instance(p: f64, a: &Hermitian, b: &Hermitian) -> DiscriminationInstance {
        let layout = SystemLayout::new(vec![a.dim(), 1]).unwrap();
        let combs = [a, b].iter().map(|m| ChoiProcess::new((*m).clone(), layout.clone(), Role::CombCandidate).unwrap()).collect();
        DiscriminationInstance::new(combs, vec![p, 1.0 - p], 1).unwrap()
    }

    #[test]
    fn identical_combs_give_uniform_guess() {
        let layout = SystemLayout::new(vec![2, 2, 2, 2]).unwrap();
        let c = random_comb(&layout, 2, 3).unwrap();
        let inst = DiscriminationInstance::new(vec![c.clone(), c.clone(), c], vec![1.0 / 3.0; 3], 2).unwrap();
        let cert = solve_global_dual(&inst, &DualOptions::default()).unwrap();
        assert!((cert.value - 1.0 / 3.0).abs() < 1e-7, "{}", cert.value);
    }

    #[test]
    fn global_dual_matches_helstrom_on_states() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let a = random_density(2, &mut rng);
        let b = random_density(2, &mut rng);
        let inst = state_instance(0.3, &a, &b);
        let cert = solve_global_dual(&inst, &DualOptions::default()).unwrap();
        let expected = 0.5 + 0.5 * (&a.scale(0.3) - &b.scale(0.7)).trace_norm();
        assert!((cert.value - expected).abs() < 1e-7);
        for m in 0..2 {
            assert!((cert.chi.matrix() - &inst.weighted(m)).min_eigenvalue() > -1e-7);
        }
        let via_cuts = solve_semi_infinite(&inst, &StrategyClass::Global, &DualOptions::default()).unwrap();
        assert!((via_cuts.value - expected).abs() < 1e-6);
    }

    #[test]
    fn fixed_input_on_a_blind_input() {
        // σ_z and identity act identically on |0⟩.
        let z = {
            let mut u = crate::hermitian::CMatrix::identity(2, 2);
            u[(1, 1)] = C64::new(-1.0, 0.0);
            u
        };
        let e1 = crate::process::choi_from_unitary(&z).unwrap();
        let e2 = crate::process::choi_from_unitary(&crate::hermitian::CMatrix::identity(2, 2)).unwrap();
        let inst = DiscriminationInstance::new(vec![e1, e2], vec![0.5, 0.5], 1).unwrap();
        let class = StrategyClass::FixedInput { state: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)] };
        let cert = solve_dual(&inst, &class, &DualOptions::default()).unwrap();
        assert!((cert.value - 0.5).abs() < 1e-6);
        assert!(verify_certificate(&cert, &inst, &class, 1e-6, &SeparationConfig::default()).unwrap());
    }

    #[test]
    fn d_s_of_scaled_comb_is_the_scale() {
        let layout = SystemLayout::new(vec![2, 2, 2, 2]).unwrap();
        let tau = random_comb(&layout, 2, 9).unwrap();
        let chi = ChoiProcess::new(tau.matrix().scale(0.7), layout, Role::DualVariable).unwrap();
        let v = evaluate_d_s(&StrategyClass::Global, &chi, &ConicOptions::default()).unwrap();
        assert!((v - 0.7).abs() < 1e-7);
    }

    #[test]
    fn maxent_support_of_identity() {
        let layout = SystemLayout::new(vec![2, 2, 2, 2]).unwrap();
        let chi = ChoiProcess::new(Hermitian::identity(16), layout, Role::DualVariable).unwrap();
        let v = evaluate_d_s(&StrategyClass::MaxEntangled, &chi, &ConicOptions::default()).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_input_support() {
        let layout = SystemLayout::new(vec![2, 2]).unwrap();
        let chi = Hermitian::identity(2).kron(&Hermitian::from_real_diagonal(&[0.3, 0.9]));
        let chi = ChoiProcess::new(chi, layout, Role::DualVariable).unwrap();
        let class = StrategyClass::FixedInput { state: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)] };
        let v = evaluate_d_s(&class, &chi, &ConicOptions::default()).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
    }
}

