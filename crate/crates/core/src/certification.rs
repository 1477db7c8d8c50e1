//! Global-optimality tests for dual certificates, the max-min criterion for
//! separable inputs, and finite-group covariance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::ConicOptions;
use crate::dual::{evaluate_d_s, solve_dual, solve_global_dual, DualCertificate, DualOptions};
use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, Hermitian, C64};
use crate::instances::{phase_unitary, NUM_CHANNELS};
use crate::primal::{optimize_separable_input, SeparableConfig};
use crate::process::{is_comb, ChoiProcess, DiscriminationInstance, Role};
use crate::strategy::StrategyClass;

const UNITARY_TOL: f64 = 1e-9;

/// Unitaries acting on the output and input wire of one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepUnitaries {
    pub output: CMatrix,
    pub input: CMatrix,
}

/// One factor of a product group: a finite group acting on a single time step.
#[derive(Clone, Debug)]
pub struct StepGroup {
    pub table: Vec<Vec<usize>>,
    pub unitaries: Vec<StepUnitaries>,
}

/// A finite group with projective unitary representations on every wire and
/// an action on the outcome labels.
#[derive(Clone, Debug)]
pub struct GroupAction {
    table: Vec<Vec<usize>>,
    identity: usize,
    /// `unitaries[g]` lists the steps in layout order, step `T` first.
    unitaries: Vec<Vec<StepUnitaries>>,
    outcome_perm: Vec<Vec<usize>>,
    /// Sizes of the per-step factors when the group is `G_T × … × G_1`.
    factors: Option<Vec<usize>>,
}

fn check_table(table: &[Vec<usize>]) -> Result<usize> {
    let n = table.len();
    if n == 0 {
        return Err(Error::invalid("group has no elements"));
    }
    if table.iter().any(|row| row.len() != n || row.iter().any(|&x| x >= n)) {
        return Err(Error::invalid("composition table is not closed"));
    }
    let identity = (0..n)
        .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
        .ok_or_else(|| Error::invalid("composition table has no identity"))?;
    for g in 0..n {
        if !(0..n).any(|h| table[g][h] == identity && table[h][g] == identity) {
            return Err(Error::invalid(format!("element {g} has no inverse")));
        }
        for h in 0..n {
            for k in 0..n {
                if table[table[g][h]][k] != table[g][table[h][k]] {
                    return Err(Error::invalid(format!("composition is not associative at ({g}, {h}, {k})")));
                }
            }
        }
    }
    Ok(identity)
}

fn is_unitary(u: &CMatrix) -> bool {
    u.is_square() && (u.adjoint() * u - CMatrix::identity(u.nrows(), u.ncols())).norm() <= UNITARY_TOL * u.nrows() as f64
}

/// `‖a − c·b‖` minimized over unit phases `c`.
fn phase_mismatch(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap: C64 = b.adjoint().component_mul(&a.transpose()).sum();
    let c = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
    (a - b * c).norm()
}

fn check_projective(table: &[Vec<usize>], reps: &[&CMatrix], what: &str) -> Result<()> {
    let d = reps[0].nrows();
    for (g, u) in reps.iter().enumerate() {
        if u.nrows() != d || !is_unitary(u) {
            return Err(Error::invalid(format!("{what} of element {g} is not a {d}x{d} unitary")));
        }
    }
    for g in 0..reps.len() {
        for h in 0..reps.len() {
            let product = reps[g] * reps[h];
            let gap = phase_mismatch(&product, reps[table[g][h]]);
            if gap > UNITARY_TOL * d as f64 {
                return Err(Error::invalid(format!(
                    "{what} violates the projective law at ({g}, {h}) by {gap:.3e}"
                )));
            }
        }
    }
    Ok(())
}

impl GroupAction {
    pub fn new(
        table: Vec<Vec<usize>>,
        unitaries: Vec<Vec<StepUnitaries>>,
        outcome_perm: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let identity = check_table(&table)?;
        let n = table.len();
        if unitaries.len() != n || outcome_perm.len() != n {
            return Err(Error::DimensionMismatch {
                context: "group action elements",
                expected: n,
                found: unitaries.len().min(outcome_perm.len()),
            });
        }
        let steps = unitaries[0].len();
        if unitaries.iter().any(|u| u.len() != steps) {
            return Err(Error::invalid("every element needs unitaries for the same time steps"));
        }
        for k in 0..steps {
            let outputs: Vec<&CMatrix> = unitaries.iter().map(|u| &u[k].output).collect();
            let inputs: Vec<&CMatrix> = unitaries.iter().map(|u| &u[k].input).collect();
            check_projective(&table, &outputs, &format!("output unitary at position {k}"))?;
            check_projective(&table, &inputs, &format!("input unitary at position {k}"))?;
        }
        let m = outcome_perm[0].len();
        for (g, perm) in outcome_perm.iter().enumerate() {
            let mut seen = vec![false; m];
            if perm.len() != m || perm.iter().any(|&x| x >= m || std::mem::replace(&mut seen[x], true)) {
                return Err(Error::InvalidPermutation(format!("outcome map of element {g} is not a permutation")));
            }
        }
        if outcome_perm[identity].iter().enumerate().any(|(i, &x)| i != x) {
            return Err(Error::invalid("the identity must fix every outcome"));
        }
        for g in 0..n {
            for h in 0..n {
                let gh = table[g][h];
                if (0..m).any(|i| outcome_perm[gh][i] != outcome_perm[g][outcome_perm[h][i]]) {
                    return Err(Error::invalid(format!("outcome action is not a homomorphism at ({g}, {h})")));
                }
            }
        }
        Ok(Self { table, identity, unitaries, outcome_perm, factors: None })
    }

    /// The group with one element acting trivially on `dims`.
    pub fn trivial(dims: &[usize], outcomes: usize) -> Result<Self> {
        if dims.len() % 2 != 0 {
            return Err(Error::InvalidLayout("layout does not alternate outputs and inputs".into()));
        }
        let step = dims
            .chunks(2)
            .map(|c| StepUnitaries { output: CMatrix::identity(c[0], c[0]), input: CMatrix::identity(c[1], c[1]) })
            .collect();
        let mut action = Self::new(vec![vec![0]], vec![step], vec![(0..outcomes).collect()])?;
        action.factors = Some(vec![1; dims.len() / 2]);
        Ok(action)
    }

    /// `G_T × … × G_1`, each factor acting on its own time step. Elements are
    /// numbered lexicographically with step `T` most significant; `outcome_perm`
    /// receives the factor indices in the same order.
    pub fn product(factors: Vec<StepGroup>, outcome_perm: impl Fn(&[usize]) -> Vec<usize>) -> Result<Self> {
        let sizes: Vec<usize> = factors.iter().map(|f| f.table.len()).collect();
        for f in &factors {
            check_table(&f.table)?;
            if f.unitaries.len() != f.table.len() {
                return Err(Error::DimensionMismatch {
                    context: "step group unitaries",
                    expected: f.table.len(),
                    found: f.unitaries.len(),
                });
            }
        }
        let total: usize = sizes.iter().product();
        let digits = |mut g: usize| -> Vec<usize> {
            let mut d = vec![0; sizes.len()];
            for k in (0..sizes.len()).rev() {
                d[k] = g % sizes[k];
                g /= sizes[k];
            }
            d
        };
        let number = |d: &[usize]| d.iter().zip(&sizes).fold(0, |acc, (&x, &s)| acc * s + x);
        let table = (0..total)
            .map(|g| {
                let a = digits(g);
                (0..total)
                    .map(|h| {
                        let b = digits(h);
                        let c: Vec<usize> = factors.iter().enumerate().map(|(k, f)| f.table[a[k]][b[k]]).collect();
                        number(&c)
                    })
                    .collect()
            })
            .collect();
        let unitaries = (0..total)
            .map(|g| digits(g).iter().zip(&factors).map(|(&x, f)| f.unitaries[x].clone()).collect())
            .collect();
        let perms = (0..total).map(|g| outcome_perm(&digits(g))).collect();
        let mut action = Self::new(table, unitaries, perms)?;
        action.factors = Some(sizes);
        Ok(action)
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn time_steps(&self) -> usize {
        self.unitaries[0].len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn compose(&self, g: usize, h: usize) -> usize {
        self.table[g][h]
    }

    pub fn outcome(&self, g: usize, m: usize) -> usize {
        self.outcome_perm[g][m]
    }

    pub fn is_product(&self) -> bool {
        self.factors.is_some() || self.time_steps() == 1
    }

    /// Wire dimensions in layout order.
    pub fn dims(&self) -> Vec<usize> {
        self.unitaries[0].iter().flat_map(|s| [s.output.nrows(), s.input.nrows()]).collect()
    }

    /// `U^{(T)}_g ⊗ Ũ^{(T)}_g ⊗ … ⊗ U^{(1)}_g ⊗ Ũ^{(1)}_g`.
    pub fn full_unitary(&self, g: usize) -> CMatrix {
        self.unitaries[g].iter().fold(CMatrix::identity(1, 1), |acc, s| acc.kronecker(&s.output).kronecker(&s.input))
    }

    /// Input-wire representation `g ↦ Ũ^{(t)}_g` for time step `t` (1-based).
    pub fn input_representation(&self, t: usize) -> Result<Vec<CMatrix>> {
        let steps = self.time_steps();
        if t == 0 || t > steps {
            return Err(Error::IndexOutOfRange { index: t, len: steps });
        }
        Ok(self.unitaries.iter().map(|u| u[steps - t].input.clone()).collect())
    }

    pub fn apply(&self, g: usize, x: &Hermitian) -> Hermitian {
        x.conjugate_by(&self.full_unitary(g))
    }

    fn check_dims(&self, dims: &[usize]) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::invalid(format!(
                "group action acts on wires {:?}, layout has {:?}",
                self.dims(),
                dims
            )));
        }
        Ok(())
    }
}

/// `U_g(E_m) = E_{ϖ_g(m)}` and `p_m = p_{ϖ_g(m)}` for every `g` and `m`.
pub fn check_covariance(inst: &DiscriminationInstance, action: &GroupAction, tol: f64) -> Result<bool> {
    action.check_dims(inst.layout().dims())?;
    let outcomes = inst.num_outcomes();
    if action.outcome_perm[0].len() != outcomes {
        return Err(Error::DimensionMismatch {
            context: "outcome action",
            expected: outcomes,
            found: action.outcome_perm[0].len(),
        });
    }
    let combs = inst.combs();
    Ok((0..action.order()).all(|g| {
        let u = action.full_unitary(g);
        (0..outcomes).all(|m| {
            let target = action.outcome(g, m);
            let moved = combs[m].matrix().conjugate_by(&u);
            let scale = 1.0 + combs[target].matrix().max_abs();
            (&moved - combs[target].matrix()).max_abs() <= tol * scale
                && (inst.priors()[m] - inst.priors()[target]).abs() <= tol
        })
    }))
}

/// Group average `(1/|G|) Σ_g U_g(χ)`.
pub fn symmetrize_dual(chi: &ChoiProcess, action: &GroupAction) -> Result<ChoiProcess> {
    action.check_dims(chi.layout().dims())?;
    let images: Vec<Hermitian> = (0..action.order()).into_par_iter().map(|g| action.apply(g, chi.matrix())).collect();
    let n = chi.matrix().dim();
    let sum = images.iter().fold(Hermitian::zeros(n), |acc, x| &acc + x);
    ChoiProcess::new(sum.scale(1.0 / action.order() as f64), chi.layout().clone(), chi.role())
}

/// Dimension of `{X : X U = U X for every U in reps}`.
pub fn commutant_dimension(reps: &[CMatrix]) -> usize {
    let d = reps.first().map_or(0, |u| u.nrows());
    if d == 0 {
        return 0;
    }
    let eye = CMatrix::identity(d, d);
    let mut stacked = CMatrix::zeros(reps.len() * d * d, d * d);
    for (k, u) in reps.iter().enumerate() {
        // Column-major vec: vec(XU) = (Uᵀ ⊗ I) vec X, vec(UX) = (I ⊗ U) vec X.
        let block = u.transpose().kronecker(&eye) - eye.kronecker(u);
        stacked.view_mut((k * d * d, 0), (d * d, d * d)).copy_from(&block);
    }
    let singular = stacked.svd(false, false).singular_values;
    let scale = singular.iter().copied().fold(1.0, f64::max);
    d * d - singular.iter().filter(|&&s| s > 1e-9 * scale).count()
}

/// Schur's criterion: the input representation at step `t` is irreducible iff its commutant is one-dimensional.
pub fn check_irreducibility(action: &GroupAction, t: usize) -> Result<bool> {
    Ok(commutant_dimension(&action.input_representation(t)?) == 1)
}

/// Outcome of the sufficient condition for a maximally entangled tester to be globally optimal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxEntVerdict {
    pub holds: bool,
    pub reason: String,
}

/// Covariance together with irreducible input representations on a product group.
pub fn assert_maxent_optimal(inst: &DiscriminationInstance, action: &GroupAction) -> Result<MaxEntVerdict> {
    let fail = |reason: String| Ok(MaxEntVerdict { holds: false, reason });
    if action.dims() != inst.layout().dims() {
        return fail(format!("group acts on wires {:?}, instance has {:?}", action.dims(), inst.layout().dims()));
    }
    if !check_covariance(inst, action, 1e-9)? {
        return fail("ensemble is not covariant under the action".into());
    }
    if !action.is_product() {
        return fail("group is not a product over time steps".into());
    }
    for t in 1..=action.time_steps() {
        if !check_irreducibility(action, t)? {
            return fail(format!("V_t representation reducible (t = {t})"));
        }
    }
    Ok(MaxEntVerdict { holds: true, reason: "covariant with irreducible input representations".into() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimalityCondition {
    /// `χ` is globally dual feasible and proportional to a comb.
    ProportionalToComb,
    /// `χ` is globally dual feasible and its class and global support values agree.
    EqualSupport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalOptimality {
    pub optimal: bool,
    pub condition: Option<OptimalityCondition>,
    /// True when the condition was met by the global dual solution rather than by the certificate's own `χ`.
    pub via_global_solution: bool,
    /// `min_m λ_min(χ − p_m E_m)`.
    pub min_slack: f64,
    pub class_value: f64,
    /// `D_{S_G}(χ)` of the certificate.
    pub global_support: f64,
}

fn min_slack(chi: &Hermitian, inst: &DiscriminationInstance) -> f64 {
    inst.weighted_all().iter().map(|c| (chi - c).min_eigenvalue()).fold(f64::INFINITY, f64::min)
}

fn proportional_to_comb(chi: &ChoiProcess, scale: f64, steps: usize, tol: f64) -> Result<bool> {
    if scale <= 1e-12 {
        return Ok(chi.matrix().max_abs() <= tol);
    }
    let tau = ChoiProcess::new(chi.matrix().scale(1.0 / scale), chi.layout().clone(), Role::CombCandidate)?;
    Ok(is_comb(&tau, steps, tol)?.0)
}

/// Tests the two checkable global-optimality conditions on the certificate's
/// `χ`. When neither holds there, the global dual optimum is tried as the
/// witness, since optimality only asks for some optimal `χ`.
pub fn check_global_optimality(
    cert: &DualCertificate,
    inst: &DiscriminationInstance,
    class: &StrategyClass,
    tol: f64,
) -> Result<GlobalOptimality> {
    let options = ConicOptions::with_tol(1e-10);
    let steps = inst.time_steps();
    let chi = &cert.chi;
    let slack = min_slack(chi.matrix(), inst);
    let in_cone = slack >= -tol;
    let global_support = evaluate_d_s(&StrategyClass::Global, chi, &options)?;
    let mut verdict = GlobalOptimality {
        optimal: false,
        condition: None,
        via_global_solution: false,
        min_slack: slack,
        class_value: cert.value,
        global_support,
    };
    if in_cone && proportional_to_comb(chi, cert.value, steps, tol)? {
        verdict.optimal = true;
        verdict.condition = Some(OptimalityCondition::ProportionalToComb);
        return Ok(verdict);
    }
    if in_cone && (cert.value - global_support).abs() <= tol {
        verdict.optimal = true;
        verdict.condition = Some(OptimalityCondition::EqualSupport);
        return Ok(verdict);
    }
    let global = solve_global_dual(inst, &DualOptions::default())?;
    let class_support = evaluate_d_s(class, &global.chi, &options)?;
    if (class_support - global.value).abs() <= tol && class_support <= cert.value + tol {
        verdict.optimal = true;
        verdict.condition = Some(OptimalityCondition::EqualSupport);
        verdict.via_global_solution = true;
    }
    Ok(verdict)
}

/// Both sides of the max-min inequality for single-use discrimination with product inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxMin {
    pub equal: bool,
    /// `max_φ min_χ ⟨I ⊗ φ, χ⟩`.
    pub lhs: f64,
    /// `min_χ max_φ ⟨I ⊗ φ, χ⟩`, the global value.
    pub rhs: f64,
    /// Input state attaining `lhs`.
    pub input: Vec<C64>,
}

/// Searches the best pure input, then evaluates the inner minimum at that input by a conic solve.
pub fn check_separable_maxmin(inst: &DiscriminationInstance, config: &SeparableConfig, tol: f64) -> Result<MaxMin> {
    if inst.time_steps() != 1 {
        return Err(Error::InvalidLayout(format!("max-min test needs T = 1, got T = {}", inst.time_steps())));
    }
    let options = DualOptions::default();
    let rhs = solve_global_dual(inst, &options)?.value;
    let best = optimize_separable_input(inst, config)?;
    let layout = inst.layout();
    let marginal = best.tester.sum().partial_trace(layout, &[1])?;
    let input: Vec<C64> = marginal.eig().vector(0).iter().map(|z| z.conj()).collect();
    let lhs = solve_dual(inst, &StrategyClass::FixedInput { state: input.clone() }, &options)?.value;
    Ok(MaxMin { equal: lhs >= rhs - tol, lhs, rhs, input })
}

/// Cyclic group `Z_n` table.
pub fn cyclic_table(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect()
}

/// `Z_3` acting by `U^k ⊗ I ⊗ U^k ⊗ I` on the two-use phase instance and by `m ↦ m + k` on outcomes.
pub fn phase_shift_action() -> Result<GroupAction> {
    let eye = CMatrix::identity(2, 2);
    let unitaries = (0..NUM_CHANNELS)
        .map(|k| {
            let u = phase_unitary(k);
            vec![StepUnitaries { output: u.clone(), input: eye.clone() }, StepUnitaries { output: u, input: eye.clone() }]
        })
        .collect();
    let perms = (0..NUM_CHANNELS).map(|k| (0..NUM_CHANNELS).map(|m| (m + k) % NUM_CHANNELS).collect()).collect();
    GroupAction::new(cyclic_table(NUM_CHANNELS), unitaries, perms)
}

/// `I, X, Y, Z`.
pub fn pauli_matrices() -> [CMatrix; 4] {
    let c = |re: f64, im: f64| C64::new(re, im);
    let m = |a: [C64; 4]| CMatrix::from_row_slice(2, 2, &a);
    [
        m([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
        m([c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
        m([c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]),
        m([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
    ]
}

/// Klein four-group `Z_2 × Z_2` realized projectively by the Pauli matrices on
/// both wires of a qubit channel.
pub fn pauli_step_group() -> StepGroup {
    let table = (0..4).map(|a| (0..4).map(|b| a ^ b).collect()).collect();
    let unitaries = pauli_matrices().into_iter().map(|p| StepUnitaries { output: p.clone(), input: p }).collect();
    StepGroup { table, unitaries }
}

/// The orbit `E_g = U_g(E_0)` of a qubit channel under [`pauli_step_group`],
/// with uniform priors and outcomes permuted by left multiplication.
pub fn pauli_covariant_ensemble(seed: &ChoiProcess) -> Result<(DiscriminationInstance, GroupAction)> {
    let group = pauli_step_group();
    let table = group.table.clone();
    let action = GroupAction::product(vec![group], |g| (0..4).map(|h| table[g[0]][h]).collect())?;
    action.check_dims(seed.layout().dims())?;
    let combs = (0..4)
        .map(|g| ChoiProcess::new(action.apply(g, seed.matrix()), seed.layout().clone(), Role::CombCandidate))
        .collect::<Result<Vec<_>>>()?;
    Ok((DiscriminationInstance::new(combs, vec![0.25; 4], 1)?, action))
}
