//! Restricted tester families as a cone `C` of tuples together with a set `S`
//! for the sum of the tuple, with validation, sampling and cone separation.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{ConicOptions, ConicProgram, Term};
use crate::error::{Error, Result};
use crate::hermitian::{ginibre, random_density, random_pure_state, CMatrix, Hermitian, SystemLayout, C64};
use crate::model::{maximize_over_combs, solve_tester_program, Split, StructuredCut, SumSetShape};
use crate::process::{comb_recursion, dual_comb_residual, random_comb, random_dual_comb, ChoiProcess, Role};

/// Default number of outcomes of the first-round tester in two-step strategies.
pub const DEFAULT_ADAPTIVE_OUTCOMES: usize = 8;

pub type ConePredicate = Arc<dyn Fn(&[Hermitian], f64) -> bool + Send + Sync>;
/// Returns a tuple in the cone with `Σ_m ⟨Φ_m, deficit_m⟩ < −tol`, if one exists.
pub type SeparationOracle = Arc<dyn Fn(&[Hermitian], f64) -> Option<Vec<Hermitian>> + Send + Sync>;
/// Produces a valid tester for `(layout, outcomes, seed)`.
pub type TesterSampler = Arc<dyn Fn(&SystemLayout, usize, u64) -> Result<Vec<Hermitian>> + Send + Sync>;

/// Cone of a user-defined class.
#[derive(Clone)]
pub enum CustomCone {
    /// Every tuple of PSD matrices.
    Psd,
    /// Conic hull of finitely many tuples.
    Generated(Vec<Vec<Hermitian>>),
    /// An arbitrary membership test; the dual additionally needs a separation oracle.
    Predicate(ConePredicate),
}

#[derive(Clone)]
pub struct CustomClass {
    pub name: String,
    pub cone: CustomCone,
    pub sum_set: SumSetShape,
    pub separation: Option<SeparationOracle>,
    pub sampler: Option<TesterSampler>,
}

impl fmt::Debug for CustomClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cone = match &self.cone {
            CustomCone::Psd => "psd".to_string(),
            CustomCone::Generated(g) => format!("generated({})", g.len()),
            CustomCone::Predicate(_) => "predicate".to_string(),
        };
        f.debug_struct("CustomClass")
            .field("name", &self.name)
            .field("cone", &cone)
            .field("sum_set", &self.sum_set)
            .field("separation", &self.separation.is_some())
            .field("sampler", &self.sampler.is_some())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum StrategyClass {
    /// Every tester.
    Global,
    /// Single use with the given pure input state on `V_1`, then a measurement.
    FixedInput { state: Vec<C64> },
    /// Single use with an unentangled pure input.
    SeparableInput,
    /// All uses fed in parallel from one joint input state.
    Nonadaptive,
    /// Two uses where the second preparation depends on a measurement after the first.
    SequentialTwoStep,
    /// Two uses by separate parties with one-way communication from the first to the second.
    OneWayAB,
    /// Parallel uses on halves of maximally entangled states.
    MaxEntangled,
    Custom(CustomClass),
}

/// Whether a dual value is the class optimum or only bounds it from above.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Exact,
    Upper,
}

impl StrategyClass {
    pub fn name(&self) -> &str {
        match self {
            StrategyClass::Global => "global",
            StrategyClass::FixedInput { .. } => "fixed_input",
            StrategyClass::SeparableInput => "separable_input",
            StrategyClass::Nonadaptive => "nonadaptive",
            StrategyClass::SequentialTwoStep => "sequential_two_step",
            StrategyClass::OneWayAB => "one_way_ab",
            StrategyClass::MaxEntangled => "max_entangled",
            StrategyClass::Custom(c) => &c.name,
        }
    }

    pub fn bound_kind(&self) -> BoundKind {
        match self {
            StrategyClass::OneWayAB | StrategyClass::SeparableInput => BoundKind::Upper,
            _ => BoundKind::Exact,
        }
    }

    /// True when `C` is the full PSD cone, so the dual is a single conic program.
    pub fn has_psd_cone(&self) -> bool {
        match self {
            StrategyClass::Global
            | StrategyClass::FixedInput { .. }
            | StrategyClass::Nonadaptive
            | StrategyClass::MaxEntangled => true,
            StrategyClass::Custom(c) => matches!(c.cone, CustomCone::Psd),
            _ => false,
        }
    }

    /// Checks the layout against the class and returns the number of time steps.
    pub fn check_layout(&self, layout: &SystemLayout) -> Result<usize> {
        let steps = layout
            .time_steps()
            .ok_or_else(|| Error::InvalidLayout(format!("layout {layout} does not alternate outputs and inputs")))?;
        let need = |t: usize| -> Result<usize> {
            if steps == t {
                Ok(steps)
            } else {
                Err(Error::InvalidLayout(format!("class {} needs T = {t}, layout has T = {steps}", self.name())))
            }
        };
        match self {
            StrategyClass::FixedInput { state } => {
                need(1)?;
                if state.len() != layout.dims()[1] {
                    return Err(Error::DimensionMismatch {
                        context: "fixed input state",
                        expected: layout.dims()[1],
                        found: state.len(),
                    });
                }
                let norm: f64 = state.iter().map(|z| z.norm_sqr()).sum();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!("fixed input state has squared norm {norm}, expected 1")));
                }
                Ok(steps)
            }
            StrategyClass::SeparableInput => need(1),
            StrategyClass::SequentialTwoStep | StrategyClass::OneWayAB => need(2),
            _ => Ok(steps),
        }
    }

    /// The set `S` that tester sums must lie in.
    pub fn sum_set(&self, layout: &SystemLayout) -> Result<SumSetShape> {
        self.check_layout(layout)?;
        Ok(match self {
            StrategyClass::Global
            | StrategyClass::SeparableInput
            | StrategyClass::SequentialTwoStep
            | StrategyClass::OneWayAB => SumSetShape::DualComb,
            StrategyClass::Nonadaptive => SumSetShape::Nonadaptive,
            StrategyClass::FixedInput { state } => {
                let conj: Vec<C64> = state.iter().map(|z| z.conj()).collect();
                SumSetShape::Singleton {
                    matrix: Hermitian::identity(layout.dims()[0]).kron(&Hermitian::projector(&conj)),
                }
            }
            StrategyClass::MaxEntangled => {
                let n = layout.total_dim();
                let nv: usize = layout.dims().iter().skip(1).step_by(2).product();
                SumSetShape::Singleton { matrix: Hermitian::identity(n).scale(1.0 / nv as f64) }
            }
            StrategyClass::Custom(c) => c.sum_set.clone(),
        })
    }
}

/// Factorized form proving membership in a two-step cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decomposition {
    /// `Φ_m = Σ_j B^(j)_m ⊗ A_j` with `A_j` on the first-use systems and
    /// `{B^(j)_m}_m` a single-use tester on the second-use systems.
    Sequential { first: Vec<Hermitian>, second: Vec<Vec<Hermitian>> },
    /// `Φ_m = Σ_i σ_i ⊗ A^(i)_m` with `σ_i` a channel from `W_1` to `V_2` and
    /// `A^(i)_m` PSD on `W_2 ⊗ V_1`.
    OneWay { channels: Vec<Hermitian>, local: Vec<Vec<Hermitian>> },
}

#[derive(Clone, Debug)]
pub struct Tester {
    pub elements: Vec<ChoiProcess>,
    pub class: StrategyClass,
    pub decomposition: Option<Decomposition>,
}

impl Tester {
    pub fn new(elements: Vec<Hermitian>, layout: &SystemLayout, class: StrategyClass) -> Result<Self> {
        let elements = elements
            .into_iter()
            .map(|m| ChoiProcess::new(m, layout.clone(), Role::TesterElement))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { elements, class, decomposition: None })
    }

    pub fn with_decomposition(mut self, d: Decomposition) -> Self {
        self.decomposition = Some(d);
        self
    }

    pub fn layout(&self) -> &SystemLayout {
        self.elements[0].layout()
    }

    pub fn matrices(&self) -> Vec<Hermitian> {
        self.elements.iter().map(|e| e.matrix().clone()).collect()
    }

    pub fn sum(&self) -> Hermitian {
        let mut acc = Hermitian::zeros(self.layout().total_dim());
        for e in &self.elements {
            acc += e.matrix();
        }
        acc
    }

    /// Relabels outcomes: element `k` of the result is element `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            elements: perm.iter().map(|&k| self.elements[k].clone()).collect(),
            class: self.class.clone(),
            decomposition: None,
        }
    }
}

/// Outcome of [`validate_tester`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub valid: bool,
    pub diagnostics: Vec<String>,
}

fn scaled(tol: f64, m: &Hermitian) -> f64 {
    tol * (1.0 + m.frobenius_norm())
}

/// Membership of the tester in the class: every element in `C`, the sum in `S`.
pub fn validate_tester(t: &Tester, class: &StrategyClass, tol: f64) -> Result<Validation> {
    if t.elements.len() < 2 {
        return Err(Error::invalid("a tester needs at least two elements"));
    }
    let layout = t.layout().clone();
    if t.elements.iter().any(|e| e.layout() != &layout) {
        return Err(Error::InvalidLayout("tester elements do not share a layout".into()));
    }
    let steps = class.check_layout(&layout)?;
    let mats = t.matrices();
    let mut diagnostics = Vec::new();

    for (m, e) in mats.iter().enumerate() {
        let lo = e.min_eigenvalue();
        if lo < -scaled(tol, e) {
            diagnostics.push(format!("element {m} is not positive semidefinite (min eigenvalue {lo:.3e})"));
        }
    }
    cone_diagnostics(class, t, &mats, &layout, tol, &mut diagnostics)?;
    let sum = t.sum();
    sum_diagnostics(class, &sum, &layout, steps, tol, &mut diagnostics)?;
    Ok(Validation { valid: diagnostics.is_empty(), diagnostics })
}

fn cone_diagnostics(
    class: &StrategyClass,
    t: &Tester,
    mats: &[Hermitian],
    layout: &SystemLayout,
    tol: f64,
    out: &mut Vec<String>,
) -> Result<()> {
    match class {
        StrategyClass::SeparableInput => {
            for (m, e) in mats.iter().enumerate() {
                let pt = e.partial_transpose(layout, &[0])?;
                let lo = pt.min_eigenvalue();
                if lo < -scaled(tol, e) {
                    out.push(format!("element {m} is entangled across output and input (partial transpose eigenvalue {lo:.3e})"));
                }
            }
            if layout.total_dim() > 6 {
                log::warn!("partial-transpose test is only necessary for separability at dimension {}", layout.total_dim());
            }
        }
        StrategyClass::SequentialTwoStep => match &t.decomposition {
            Some(Decomposition::Sequential { first, second }) => {
                check_sequential(first, second, mats, layout, tol, out)?;
            }
            _ => out.push("sequential membership needs a decomposition witness".into()),
        },
        StrategyClass::OneWayAB => match &t.decomposition {
            Some(Decomposition::OneWay { channels, local }) => {
                check_one_way(channels, local, mats, layout, tol, out)?;
            }
            _ => out.push("one-way membership needs a decomposition witness".into()),
        },
        StrategyClass::Custom(c) => match &c.cone {
            CustomCone::Psd => {}
            CustomCone::Generated(generators) => {
                let residual = generated_cone_residual(generators, mats, layout.total_dim())?;
                if residual > tol * (1.0 + mats.iter().map(|m| m.frobenius_norm()).sum::<f64>()) {
                    out.push(format!("elements are outside the generated cone (residual {residual:.3e})"));
                }
            }
            CustomCone::Predicate(pred) => {
                if !pred(mats, tol) {
                    out.push(format!("elements rejected by the membership test of class {}", c.name));
                }
            }
        },
        _ => {}
    }
    Ok(())
}

fn check_sequential(
    first: &[Hermitian],
    second: &[Vec<Hermitian>],
    mats: &[Hermitian],
    layout: &SystemLayout,
    tol: f64,
    out: &mut Vec<String>,
) -> Result<()> {
    if first.len() != second.len() {
        out.push("decomposition has mismatched first and second rounds".into());
        return Ok(());
    }
    let dims = layout.dims();
    let inner = SystemLayout::new(vec![dims[0], dims[1]])?;
    let mut rebuilt = vec![Hermitian::zeros(layout.total_dim()); mats.len()];
    for (j, (a, bs)) in first.iter().zip(second).enumerate() {
        if a.dim() != dims[2] * dims[3] || bs.len() != mats.len() || bs.iter().any(|b| b.dim() != dims[0] * dims[1]) {
            out.push(format!("decomposition term {j} has wrong dimensions"));
            return Ok(());
        }
        if a.min_eigenvalue() < -scaled(tol, a) {
            out.push(format!("first-round element {j} is not positive semidefinite"));
        }
        let mut bsum = Hermitian::zeros(dims[0] * dims[1]);
        for (m, b) in bs.iter().enumerate() {
            if b.min_eigenvalue() < -scaled(tol, b) {
                out.push(format!("second-round element ({j}, {m}) is not positive semidefinite"));
            }
            bsum += b;
            rebuilt[m] += &b.kron(a);
        }
        let residual = dual_comb_residual(&bsum, &inner, 1)?;
        if residual > tol {
            out.push(format!("second-round tester {j} does not sum to I ⊗ ρ (residual {residual:.3e})"));
        }
    }
    for (m, (r, e)) in rebuilt.iter().zip(mats).enumerate() {
        let d = (r - e).max_abs();
        if d > scaled(tol, e) {
            out.push(format!("element {m} differs from its decomposition by {d:.3e}"));
        }
    }
    Ok(())
}

fn check_one_way(
    channels: &[Hermitian],
    local: &[Vec<Hermitian>],
    mats: &[Hermitian],
    layout: &SystemLayout,
    tol: f64,
    out: &mut Vec<String>,
) -> Result<()> {
    if channels.len() != local.len() {
        out.push("decomposition has mismatched channels and local parts".into());
        return Ok(());
    }
    let dims = layout.dims();
    let chan_layout = SystemLayout::new(vec![dims[1], dims[2]])?;
    let split = Split::new(layout, &[1, 2]);
    let mut rebuilt = vec![Hermitian::zeros(layout.total_dim()); mats.len()];
    for (i, (s, parts)) in channels.iter().zip(local).enumerate() {
        if s.dim() != split.factor_dim || parts.len() != mats.len() || parts.iter().any(|a| a.dim() != split.comp_dim) {
            out.push(format!("decomposition term {i} has wrong dimensions"));
            return Ok(());
        }
        let (ok, w) = comb_recursion(s, &chan_layout, 1, tol)?;
        if !ok {
            out.push(format!("channel {i} is not a channel from W_1 to V_2 (residual {:.3e})", w.residual));
        }
        for (m, a) in parts.iter().enumerate() {
            if a.min_eigenvalue() < -scaled(tol, a) {
                out.push(format!("local part ({i}, {m}) is not positive semidefinite"));
            }
            rebuilt[m] += &split.arrange(s, a);
        }
    }
    for (m, (r, e)) in rebuilt.iter().zip(mats).enumerate() {
        let d = (r - e).max_abs();
        if d > scaled(tol, e) {
            out.push(format!("element {m} differs from its decomposition by {d:.3e}"));
        }
    }
    Ok(())
}

/// Smallest trace-norm distance from the tuple to the conic hull of the generators.
fn generated_cone_residual(generators: &[Vec<Hermitian>], mats: &[Hermitian], n: usize) -> Result<f64> {
    if generators.is_empty() {
        return Ok(mats.iter().map(|m| m.trace_norm()).sum());
    }
    let mut p = ConicProgram::new();
    let weights: Vec<_> = generators.iter().map(|_| p.psd_block(1)).collect();
    let mut objective = Vec::new();
    for (m, target) in mats.iter().enumerate() {
        let pos = p.psd_block(n);
        let neg = p.psd_block(n);
        p.add_hermitian_eq(
            n,
            |a, b| {
                let mut terms = vec![Term::real(pos.at(a, b), 1.0), Term::real(neg.at(a, b), -1.0)];
                for (w, g) in weights.iter().zip(generators) {
                    let v = g[m].get(a, b);
                    if v != crate::hermitian::ZERO {
                        terms.push(Term::new(w.at(0, 0), v));
                    }
                }
                terms
            },
            Some(target),
        );
        for i in 0..n {
            objective.push(Term::real(pos.at(i, i), 1.0));
            objective.push(Term::real(neg.at(i, i), 1.0));
        }
    }
    p.minimize(objective);
    Ok(p.solve(&ConicOptions::with_tol(1e-10))?.value)
}

fn sum_diagnostics(
    class: &StrategyClass,
    sum: &Hermitian,
    layout: &SystemLayout,
    steps: usize,
    tol: f64,
    out: &mut Vec<String>,
) -> Result<()> {
    let shape = class.sum_set(layout)?;
    match &shape {
        SumSetShape::DualComb => {
            let r = dual_comb_residual(sum, layout, steps)?;
            if r > tol {
                out.push(format!("sum is not a dual comb (residual {r:.3e})"));
            }
        }
        SumSetShape::Singleton { matrix } => {
            let d = (sum - matrix).max_abs();
            if d > scaled(tol, matrix) {
                let what = match class {
                    StrategyClass::MaxEntangled => "sum not maximally mixed".to_string(),
                    StrategyClass::FixedInput { .. } => "sum differs from I ⊗ the fixed input".to_string(),
                    _ => "sum differs from the prescribed matrix".to_string(),
                };
                out.push(format!("{what} (deviation {d:.3e})"));
            }
        }
        SumSetShape::Nonadaptive => {
            let (rho, rebuilt) = nonadaptive_projection(sum, layout);
            let d = (sum - &rebuilt).max_abs();
            if d > scaled(tol, sum) {
                out.push(format!("sum is not I on the outputs tensored with an input state (deviation {d:.3e})"));
            }
            if (rho.trace() - 1.0).abs() > tol || rho.min_eigenvalue() < -tol {
                out.push("input state of the sum is not a density matrix".into());
            }
        }
        SumSetShape::AffineSlice { constraints } => {
            if sum.min_eigenvalue() < -scaled(tol, sum) {
                out.push("sum is not positive semidefinite".into());
            }
            for (k, (l, c)) in constraints.iter().enumerate() {
                let v = l.inner(sum);
                if (v - c).abs() > tol * (1.0 + c.abs()) {
                    out.push(format!("sum violates affine constraint {k}: {v:.6} ≠ {c:.6}"));
                }
            }
        }
        SumSetShape::FiniteHull { generators } => {
            let r = hull_residual(generators, sum)?;
            if r > scaled(tol, sum) {
                out.push(format!("sum is outside the generated hull (residual {r:.3e})"));
            }
        }
    }
    Ok(())
}

fn hull_residual(generators: &[Hermitian], target: &Hermitian) -> Result<f64> {
    let n = target.dim();
    let mut p = ConicProgram::new();
    let weights: Vec<_> = generators.iter().map(|_| p.psd_block(1)).collect();
    p.add_real_eq(weights.iter().map(|w| Term::real(w.at(0, 0), 1.0)).collect(), 1.0);
    let pos = p.psd_block(n);
    let neg = p.psd_block(n);
    p.add_hermitian_eq(
        n,
        |a, b| {
            let mut terms = vec![Term::real(pos.at(a, b), 1.0), Term::real(neg.at(a, b), -1.0)];
            for (w, g) in weights.iter().zip(generators) {
                terms.push(Term::new(w.at(0, 0), g.get(a, b)));
            }
            terms
        },
        Some(target),
    );
    p.minimize((0..n).flat_map(|i| [Term::real(pos.at(i, i), 1.0), Term::real(neg.at(i, i), 1.0)]).collect());
    Ok(p.solve(&ConicOptions::with_tol(1e-10))?.value)
}

/// Input marginal `ρ' = Tr_{outputs}(Q) / N_W` and `I_W ⊗ ρ'` rearranged onto the layout.
pub(crate) fn nonadaptive_projection(q: &Hermitian, layout: &SystemLayout) -> (Hermitian, Hermitian) {
    let (wmap, vmap, nw, nv) = wire_index(layout);
    let n = q.dim();
    let mut rho = CMatrix::zeros(nv, nv);
    for a in 0..n {
        for b in 0..n {
            if wmap[a] == wmap[b] {
                rho[(vmap[a], vmap[b])] += q.get(a, b);
            }
        }
    }
    let rho = Hermitian::symmetrize(rho.scale(1.0 / nw as f64));
    let rebuilt = Hermitian::symmetrize(CMatrix::from_fn(n, n, |a, b| {
        if wmap[a] == wmap[b] {
            rho.get(vmap[a], vmap[b])
        } else {
            crate::hermitian::ZERO
        }
    }));
    (rho, rebuilt)
}

fn wire_index(layout: &SystemLayout) -> (Vec<usize>, Vec<usize>, usize, usize) {
    let outputs: Vec<usize> = (0..layout.len()).step_by(2).collect();
    let w = Split::new(layout, &outputs);
    let nw = w.factor_dim;
    (w.factor, w.comp, nw, w.comp_dim)
}

/// Options for [`sample_tester`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    /// Outcomes of the first round in two-step classes.
    pub adaptive_outcomes: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { adaptive_outcomes: DEFAULT_ADAPTIVE_OUTCOMES }
    }
}

/// Random POVM with `k` outcomes on dimension `n`.
pub(crate) fn random_povm(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Hermitian> {
    let raw: Vec<Hermitian> = (0..k)
        .map(|_| {
            let g = ginibre(n, n, rng);
            Hermitian::symmetrize(&g * g.adjoint())
        })
        .collect();
    let mut total = Hermitian::zeros(n);
    for r in &raw {
        total += r;
    }
    let s = total.inv_sqrt_psd(1e-14);
    raw.iter().map(|r| r.conjugate_by(s.matrix())).collect()
}

/// `Q^{1/2} P_k Q^{1/2}`: the elements sum to `Q`.
pub(crate) fn split_sum(q: &Hermitian, povm: &[Hermitian]) -> Vec<Hermitian> {
    let root = q.sqrt_psd();
    povm.iter().map(|p| p.conjugate_by(root.matrix())).collect()
}

/// A single-use tester on `[W, V]`: random input state and measurement.
pub(crate) fn random_single_use(w: usize, v: usize, outcomes: usize, rng: &mut ChaCha8Rng) -> Vec<Hermitian> {
    let rho = random_density(v, rng);
    let q = Hermitian::identity(w).kron(&rho);
    split_sum(&q, &random_povm(w * v, outcomes, rng))
}

/// Random valid tester of the class.
pub fn sample_tester(
    class: &StrategyClass,
    layout: &SystemLayout,
    outcomes: usize,
    seed: u64,
    config: &SampleConfig,
) -> Result<Tester> {
    if outcomes < 2 {
        return Err(Error::invalid("a tester needs at least two outcomes"));
    }
    let steps = class.check_layout(layout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = layout.total_dim();
    let dims = layout.dims().to_vec();
    let tester = |elements: Vec<Hermitian>| Tester::new(elements, layout, class.clone());
    match class {
        StrategyClass::Global => {
            let q = random_dual_comb(layout, steps, seed)?.into_matrix();
            tester(split_sum(&q, &random_povm(n, outcomes, &mut rng)))
        }
        StrategyClass::FixedInput { state } => {
            let conj: Vec<C64> = state.iter().map(|z| z.conj()).collect();
            let input = Hermitian::projector(&conj);
            tester(random_povm(dims[0], outcomes, &mut rng).iter().map(|p| p.kron(&input)).collect())
        }
        StrategyClass::SeparableInput => {
            let phi = random_pure_state(dims[1], &mut rng);
            let conj: Vec<C64> = phi.iter().map(|z| z.conj()).collect();
            let input = Hermitian::projector(&conj);
            tester(random_povm(dims[0], outcomes, &mut rng).iter().map(|p| p.kron(&input)).collect())
        }
        StrategyClass::Nonadaptive => {
            let nv: usize = dims.iter().skip(1).step_by(2).product();
            let rho = random_density(nv, &mut rng);
            let (wmap, vmap, _, _) = wire_index(layout);
            let q = Hermitian::symmetrize(CMatrix::from_fn(n, n, |a, b| {
                if wmap[a] == wmap[b] {
                    rho.get(vmap[a], vmap[b])
                } else {
                    crate::hermitian::ZERO
                }
            }));
            tester(split_sum(&q, &random_povm(n, outcomes, &mut rng)))
        }
        StrategyClass::MaxEntangled => {
            let nv: usize = dims.iter().skip(1).step_by(2).product();
            let povm = random_povm(n, outcomes, &mut rng);
            tester(povm.iter().map(|p| p.scale(1.0 / nv as f64)).collect())
        }
        StrategyClass::SequentialTwoStep => {
            let j = config.adaptive_outcomes.max(1);
            let first = random_single_use(dims[2], dims[3], j, &mut rng);
            let second: Vec<Vec<Hermitian>> =
                (0..j).map(|_| random_single_use(dims[0], dims[1], outcomes, &mut rng)).collect();
            let elements = sequential_elements(&first, &second, outcomes, n);
            Ok(tester(elements)?.with_decomposition(Decomposition::Sequential { first, second }))
        }
        StrategyClass::OneWayAB => {
            let count = config.adaptive_outcomes.max(1);
            let chan_layout = SystemLayout::new(vec![dims[1], dims[2]])?;
            let weights = random_povm(1, count, &mut rng);
            let split = Split::new(layout, &[1, 2]);
            let mut channels = Vec::with_capacity(count);
            let mut local = Vec::with_capacity(count);
            let mut elements = vec![Hermitian::zeros(n); outcomes];
            for w in &weights {
                let q = w.get(0, 0).re;
                let sigma = random_comb(&chan_layout, 1, rand::Rng::random(&mut rng))?.into_matrix();
                let parts: Vec<Hermitian> =
                    random_single_use(dims[0], dims[3], outcomes, &mut rng).iter().map(|a| a.scale(q)).collect();
                for (m, a) in parts.iter().enumerate() {
                    elements[m] += &split.arrange(&sigma, a);
                }
                channels.push(sigma);
                local.push(parts);
            }
            Ok(tester(elements)?.with_decomposition(Decomposition::OneWay { channels, local }))
        }
        StrategyClass::Custom(c) => {
            let sampler = c
                .sampler
                .as_ref()
                .ok_or_else(|| Error::Unsupported(format!("class {} has no sampler", c.name)))?;
            tester(sampler(layout, outcomes, seed)?)
        }
    }
}

pub(crate) fn sequential_elements(
    first: &[Hermitian],
    second: &[Vec<Hermitian>],
    outcomes: usize,
    n: usize,
) -> Vec<Hermitian> {
    let mut elements = vec![Hermitian::zeros(n); outcomes];
    for (a, bs) in first.iter().zip(second) {
        for (m, b) in bs.iter().enumerate() {
            elements[m] += &b.kron(a);
        }
    }
    elements
}

/// Restart budget of the heuristic separation routines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub restarts: usize,
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self { restarts: 12, max_rounds: 60, seed: 0 }
    }
}

/// A cone element with unit total trace and its pairing with the deficit.
#[derive(Clone, Debug)]
pub struct Separation {
    pub elements: Vec<Hermitian>,
    pub value: f64,
}

/// A violated generator in structured form.
#[derive(Clone, Debug)]
pub(crate) struct Violation {
    pub(crate) value: f64,
    pub(crate) cut: StructuredCut,
    pub(crate) block: Hermitian,
}

/// Looks for `Φ ∈ C` with `Tr Σ Φ_m = 1` and `Σ_m ⟨Φ_m, deficit_m⟩ < −tol`.
pub fn cone_separation(
    class: &StrategyClass,
    layout: &SystemLayout,
    deficit: &[Hermitian],
    tol: f64,
    config: &SeparationConfig,
) -> Result<Option<Separation>> {
    let found = find_violations(class, layout, deficit, config, &[])?;
    Ok(found.into_iter().find(|v| v.value < -tol).map(|v| Separation {
        elements: v.cut.elements(layout, &v.block, deficit.len()),
        value: v.value,
    }))
}

/// Candidate generators sorted by increasing pairing; the first one is the best found.
pub(crate) fn find_violations(
    class: &StrategyClass,
    layout: &SystemLayout,
    deficit: &[Hermitian],
    config: &SeparationConfig,
    warm: &[Hermitian],
) -> Result<Vec<Violation>> {
    class.check_layout(layout)?;
    let n = layout.total_dim();
    for d in deficit {
        if d.dim() != n {
            return Err(Error::DimensionMismatch { context: "deficit", expected: n, found: d.dim() });
        }
    }
    let mut found = match class {
        c if c.has_psd_cone() => psd_violations(deficit),
        StrategyClass::SeparableInput => separable_violations(layout, deficit, config),
        StrategyClass::SequentialTwoStep => sequential_violations(layout, deficit, config, warm)?,
        StrategyClass::OneWayAB => one_way_violations(layout, deficit, config, warm)?,
        StrategyClass::Custom(c) => match &c.cone {
            CustomCone::Generated(generators) => generated_violations(layout, generators, deficit),
            _ => {
                let oracle = c
                    .separation
                    .as_ref()
                    .ok_or_else(|| Error::Unsupported(format!("class {} has no separation oracle", c.name)))?;
                match oracle(deficit, 0.0) {
                    Some(elements) => ray_violation(layout, &elements, deficit).into_iter().collect(),
                    None => Vec::new(),
                }
            }
        },
        _ => unreachable!("every class is covered above"),
    };
    found.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(found)
}

fn psd_violations(deficit: &[Hermitian]) -> Vec<Violation> {
    deficit
        .iter()
        .enumerate()
        .map(|(m, d)| {
            let eig = d.eig();
            let k = eig.values.len() - 1;
            Violation { value: eig.values[k], cut: StructuredCut::full(m), block: Hermitian::projector(&eig.vector(k)) }
        })
        .collect()
}

fn ray_violation(layout: &SystemLayout, elements: &[Hermitian], deficit: &[Hermitian]) -> Option<Violation> {
    let total: f64 = elements.iter().map(|e| e.trace()).sum();
    if total <= 0.0 {
        return None;
    }
    let value = elements.iter().zip(deficit).map(|(e, d)| e.inner(d)).sum::<f64>() / total;
    Some(Violation {
        value,
        cut: StructuredCut::ray(layout, elements),
        block: Hermitian::from_real_diagonal(&[1.0 / total]),
    })
}

fn generated_violations(layout: &SystemLayout, generators: &[Vec<Hermitian>], deficit: &[Hermitian]) -> Vec<Violation> {
    generators.iter().filter_map(|g| ray_violation(layout, g, deficit)).collect()
}

fn min_eigvec(m: &Hermitian) -> (f64, Vec<C64>) {
    let eig = m.eig();
    let k = eig.values.len() - 1;
    (eig.values[k], eig.vector(k))
}

fn restart_rng(config: &SeparationConfig, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    rng
}

const SEESAW_STALL: f64 = 1e-11;

/// Product generators `|a⟩⟨a| ⊗ |b⟩⟨b|` for one element, found by alternating eigenvectors.
fn separable_violations(layout: &SystemLayout, deficit: &[Hermitian], config: &SeparationConfig) -> Vec<Violation> {
    let split = Split::new(layout, &[1]);
    let jobs: Vec<(usize, usize)> =
        (0..deficit.len()).flat_map(|m| (0..config.restarts.max(1)).map(move |r| (m, r))).collect();
    jobs.par_iter()
        .map(|&(m, r)| {
            let mut rng = restart_rng(config, m * config.restarts.max(1) + r);
            let mut rho = Hermitian::projector(&random_pure_state(split.factor_dim, &mut rng));
            let mut best = f64::INFINITY;
            let mut block = Hermitian::zeros(split.comp_dim);
            for _ in 0..config.max_rounds {
                let (v, a) = min_eigvec(&split.onto_comp(&rho, &deficit[m]));
                block = Hermitian::projector(&a);
                let (v2, b) = min_eigvec(&split.onto_factor(&block, &deficit[m]));
                rho = Hermitian::projector(&b);
                let improved = best - v2.min(v);
                best = best.min(v2.min(v));
                if improved < SEESAW_STALL {
                    break;
                }
            }
            Violation { value: best, cut: StructuredCut { factor_systems: vec![1], terms: vec![(m, rho)] }, block }
        })
        .collect()
}

/// Generators `{B_m ⊗ |a⟩⟨a|}` with `{B_m}` a single-use tester on the second-use systems.
fn sequential_violations(
    layout: &SystemLayout,
    deficit: &[Hermitian],
    config: &SeparationConfig,
    warm: &[Hermitian],
) -> Result<Vec<Violation>> {
    let dims = layout.dims();
    let split = Split::new(layout, &[0, 1]);
    let inner = SystemLayout::new(vec![dims[0], dims[1]])?;
    let norm = dims[0] as f64;
    let full: Vec<StructuredCut> = (0..deficit.len()).map(StructuredCut::full).collect();
    let options = ConicOptions::with_tol(1e-10);
    let starts = seeds_for(config, warm, split.comp_dim);
    let results: Vec<Result<Violation>> = starts
        .par_iter()
        .map(|start| {
            let mut a = start.clone();
            let mut best: Option<Violation> = None;
            for _ in 0..config.max_rounds {
                let block = Hermitian::projector(&a);
                let costs: Vec<Hermitian> =
                    deficit.iter().map(|d| split.onto_factor(&block, d).scale(-1.0)).collect();
                let sol = solve_tester_program(&costs, &inner, &SumSetShape::DualComb, &full, &options)?;
                let mut lap = Hermitian::zeros(split.comp_dim);
                for (b, d) in sol.elements.iter().zip(deficit) {
                    lap += &split.onto_comp(b, d);
                }
                let (v, next) = min_eigvec(&lap);
                let value = v.min(-sol.value) / norm;
                let prev = best.as_ref().map_or(f64::INFINITY, |b| b.value);
                if value < prev {
                    let cut = StructuredCut {
                        factor_systems: vec![0, 1],
                        terms: exact_single_use(&sol.elements, dims[0]).into_iter().enumerate().collect(),
                    };
                    best = Some(Violation { value: v / norm, cut, block: Hermitian::projector(&next).scale(1.0 / norm) });
                }
                a = next;
                if prev - value < SEESAW_STALL {
                    break;
                }
            }
            Ok(best.expect("at least one round"))
        })
        .collect();
    results.into_iter().collect()
}

/// Generators `σ ⊗ |a⟩⟨a|` placed on a single element, with `σ` a channel from `W_1` to `V_2`.
fn one_way_violations(
    layout: &SystemLayout,
    deficit: &[Hermitian],
    config: &SeparationConfig,
    warm: &[Hermitian],
) -> Result<Vec<Violation>> {
    let dims = layout.dims();
    let split = Split::new(layout, &[1, 2]);
    let chan_layout = SystemLayout::new(vec![dims[1], dims[2]])?;
    let norm = dims[2] as f64;
    let options = ConicOptions::with_tol(1e-10);
    let starts = seeds_for(config, warm, split.comp_dim);
    let jobs: Vec<(usize, &Vec<C64>)> =
        (0..deficit.len()).flat_map(|m| starts.iter().map(move |s| (m, s))).collect();
    let results: Vec<Result<Violation>> = jobs
        .par_iter()
        .map(|&(m, start)| {
            let mut a = start.clone();
            let mut best: Option<Violation> = None;
            for _ in 0..config.max_rounds {
                let block = Hermitian::projector(&a);
                let g = split.onto_factor(&block, &deficit[m]);
                let (neg, sigma) = maximize_over_combs(&g.scale(-1.0), &chan_layout, &options)?;
                let (v, next) = min_eigvec(&split.onto_comp(&sigma, &deficit[m]));
                let value = v.min(-neg) / norm;
                let prev = best.as_ref().map_or(f64::INFINITY, |b| b.value);
                if value < prev {
                    let cut = StructuredCut { factor_systems: vec![1, 2], terms: vec![(m, exact_channel(&sigma, dims[1]))] };
                    best = Some(Violation { value: v / norm, cut, block: Hermitian::projector(&next).scale(1.0 / norm) });
                }
                a = next;
                if prev - value < SEESAW_STALL {
                    break;
                }
            }
            Ok(best.expect("at least one round"))
        })
        .collect();
    results.into_iter().collect()
}

/// Spreads the defect of `Σ_m B_m` from `I_W ⊗ ρ` evenly over the elements so that
/// the sum is exactly a normalized dual comb on `[W, V]`.
pub(crate) fn exact_single_use(elements: &[Hermitian], out_dim: usize) -> Vec<Hermitian> {
    let n = elements[0].dim();
    let sum = elements.iter().fold(Hermitian::zeros(n), |acc, e| &acc + e);
    let layout = SystemLayout::new(vec![out_dim, n / out_dim]).expect("positive dims");
    let reduced = sum.partial_trace(&layout, &[1]).expect("valid layout");
    let target = Hermitian::identity(out_dim).kron(&reduced.scale(1.0 / reduced.trace()));
    let share = (&target - &sum).scale(1.0 / elements.len() as f64);
    elements.iter().map(|e| e + &share).collect()
}

/// Projects onto the affine set `Tr_{out} σ = I` of channel Choi matrices on `[out, in]`.
pub(crate) fn exact_channel(sigma: &Hermitian, out_dim: usize) -> Hermitian {
    let n = sigma.dim();
    let in_dim = n / out_dim;
    let layout = SystemLayout::new(vec![out_dim, in_dim]).expect("positive dims");
    let defect = &sigma.partial_trace(&layout, &[1]).expect("valid layout") - &Hermitian::identity(in_dim);
    sigma - &Hermitian::identity(out_dim).scale(1.0 / out_dim as f64).kron(&defect)
}

/// Warm starts first, then seeded random unit vectors.
fn seeds_for(config: &SeparationConfig, warm: &[Hermitian], dim: usize) -> Vec<Vec<C64>> {
    let mut starts: Vec<Vec<C64>> = warm
        .iter()
        .filter(|w| w.dim() == dim)
        .map(|w| {
            let eig = w.eig();
            eig.vector(0)
        })
        .collect();
    for r in 0..config.restarts.max(1) {
        let mut rng = restart_rng(config, r);
        starts.push(random_pure_state(dim, &mut rng));
    }
    starts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qubits(k: usize) -> SystemLayout {
        SystemLayout::new(vec![2; k]).unwrap()
    }

    #[test]
    fn every_sampled_class_validates_in_itself_and_globally() {
        let classes = [
            (StrategyClass::Global, 2),
            (StrategyClass::FixedInput { state: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)] }, 1),
            (StrategyClass::SeparableInput, 1),
            (StrategyClass::Nonadaptive, 2),
            (StrategyClass::MaxEntangled, 2),
            (StrategyClass::SequentialTwoStep, 2),
            (StrategyClass::OneWayAB, 2),
        ];
        let config = SampleConfig { adaptive_outcomes: 2 };
        for (class, steps) in classes {
            let layout = qubits(2 * steps);
            let t = sample_tester(&class, &layout, 3, 7, &config).unwrap();
            let own = validate_tester(&t, &class, 1e-8).unwrap();
            assert!(own.valid, "{}: {:?}", class.name(), own.diagnostics);
            let global = validate_tester(&t, &StrategyClass::Global, 1e-8).unwrap();
            assert!(global.valid, "{} under global: {:?}", class.name(), global.diagnostics);
        }
    }

    #[test]
    fn maxent_rejects_other_sums() {
        let layout = qubits(2);
        let t = sample_tester(&StrategyClass::Global, &layout, 2, 3, &SampleConfig::default()).unwrap();
        let v = validate_tester(&t, &StrategyClass::MaxEntangled, 1e-8).unwrap();
        assert!(!v.valid);
        assert!(v.diagnostics.iter().any(|d| d.contains("sum not maximally mixed")));
    }

    #[test]
    fn sequential_without_witness_is_not_certified() {
        let layout = qubits(4);
        let mut t = sample_tester(&StrategyClass::SequentialTwoStep, &layout, 3, 1, &SampleConfig::default()).unwrap();
        t.decomposition = None;
        assert!(!validate_tester(&t, &StrategyClass::SequentialTwoStep, 1e-8).unwrap().valid);
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let t = sample_tester(&StrategyClass::Global, &qubits(2), 2, 0, &SampleConfig::default()).unwrap();
        assert!(validate_tester(&t, &StrategyClass::SequentialTwoStep, 1e-8).is_err());
    }

    #[test]
    fn global_separation_matches_eigenvalues() {
        let layout = qubits(2);
        let ok = vec![Hermitian::identity(4), Hermitian::basis_projector(4, 1)];
        assert!(cone_separation(&StrategyClass::Global, &layout, &ok, 1e-9, &SeparationConfig::default()).unwrap().is_none());
        let bad = vec![Hermitian::from_real_diagonal(&[1.0, -0.5, 0.2, 0.0]), Hermitian::identity(4)];
        let s = cone_separation(&StrategyClass::Global, &layout, &bad, 1e-9, &SeparationConfig::default()).unwrap().unwrap();
        assert!((s.value + 0.5).abs() < 1e-12);
        assert!((&s.elements[0] - &Hermitian::basis_projector(4, 1)).max_abs() < 1e-12);
        assert_eq!(s.elements[1].max_abs(), 0.0);
    }

    #[test]
    fn separable_separation_finds_product_minimum() {
        // deficit = -|00⟩⟨00| has product minimum -1; an entangled deficit has a higher product minimum.
        let layout = qubits(2);
        let d = vec![Hermitian::basis_projector(4, 0).scale(-1.0), Hermitian::identity(4)];
        let s = cone_separation(&StrategyClass::SeparableInput, &layout, &d, 1e-9, &SeparationConfig::default())
            .unwrap()
            .unwrap();
        assert!((s.value + 1.0).abs() < 1e-9);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = Hermitian::projector(&[C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)]);
        let d = vec![bell.scale(-1.0), Hermitian::identity(4)];
        let s = cone_separation(&StrategyClass::SeparableInput, &layout, &d, 1e-9, &SeparationConfig::default())
            .unwrap()
            .unwrap();
        assert!((s.value + 0.5).abs() < 1e-8, "{}", s.value);
    }
}
