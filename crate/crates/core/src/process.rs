//! Choi representations of processes, comb membership and composition.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{
    partial_trace, permute_systems, random_isometry, CMatrix, Hermitian, SystemLayout, C64, ZERO,
};

/// Absolute tolerance on each level of the comb recursion.
pub const COMB_TOL: f64 = 1e-8;
/// Relative tolerance for positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    CombCandidate,
    TesterElement,
    DualVariable,
}

/// A Choi matrix together with the subsystem layout that gives it meaning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiProcess {
    matrix: Hermitian,
    layout: SystemLayout,
    role: Role,
}

impl ChoiProcess {
    pub fn new(matrix: Hermitian, layout: SystemLayout, role: Role) -> Result<Self> {
        layout.check_matrix(matrix.dim(), "Choi matrix")?;
        if role != Role::DualVariable && !matrix.is_psd(PSD_TOL) {
            return Err(Error::invalid(format!(
                "{role:?} must be positive semidefinite (minimum eigenvalue {:.3e})",
                matrix.min_eigenvalue()
            )));
        }
        Ok(Self { matrix, layout, role })
    }

    pub(crate) fn unchecked(matrix: Hermitian, layout: SystemLayout, role: Role) -> Self {
        Self { matrix, layout, role }
    }

    pub fn matrix(&self) -> &Hermitian {
        &self.matrix
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn into_matrix(self) -> Hermitian {
        self.matrix
    }

    pub fn with_role(self, role: Role) -> Result<Self> {
        Self::new(self.matrix, self.layout, role)
    }
}

/// Recovered chain `τ^(1), …, τ^(T)` of a comb and the worst recursion residual.
#[derive(Clone, Debug, PartialEq)]
pub struct CombWitness {
    pub chain: Vec<Hermitian>,
    pub layouts: Vec<SystemLayout>,
    pub residual: f64,
    pub min_eigenvalue: f64,
}

fn check_steps(layout: &SystemLayout, steps: usize) -> Result<()> {
    if steps == 0 || layout.len() != 2 * steps {
        return Err(Error::InvalidLayout(format!(
            "layout {layout} does not have {} subsystems for T = {steps}",
            2 * steps
        )));
    }
    Ok(())
}

/// Checks `Tr_{W_t} τ^(t) = I_{V_t} ⊗ τ^(t−1)` level by level, recovering
/// `τ^(t−1) = Tr_{V_t} Tr_{W_t} τ^(t) / N_{V_t}` and ending with `τ^(0) = 1`.
pub fn is_comb(p: &ChoiProcess, steps: usize, tol: f64) -> Result<(bool, CombWitness)> {
    comb_recursion(p.matrix(), p.layout(), steps, tol)
}

pub(crate) fn comb_recursion(
    matrix: &Hermitian,
    layout: &SystemLayout,
    steps: usize,
    tol: f64,
) -> Result<(bool, CombWitness)> {
    check_steps(layout, steps)?;
    layout.check_matrix(matrix.dim(), "comb test")?;
    let min_eig = matrix.min_eigenvalue();
    let psd = min_eig >= -PSD_TOL * (1.0 + matrix.frobenius_norm());

    let mut chain = vec![matrix.clone()];
    let mut layouts = vec![layout.clone()];
    let mut residual: f64 = 0.0;
    let mut current = matrix.clone();
    let mut current_layout = layout.clone();
    for _ in 0..steps {
        // `current` lives on [W_t, V_t, ...].
        let rest: Vec<usize> = (1..current_layout.len()).collect();
        let a = partial_trace(&current, &current_layout, &rest)?;
        let a_layout = current_layout.sub_layout(&rest)?;
        let nv = a_layout.dims()[0];
        if a_layout.len() == 1 {
            residual = residual.max((&a - &Hermitian::identity(nv)).max_abs());
            break;
        }
        let tail: Vec<usize> = (1..a_layout.len()).collect();
        let next = partial_trace(&a, &a_layout, &tail)?.scale(1.0 / nv as f64);
        let next_layout = a_layout.sub_layout(&tail)?;
        residual = residual.max((&a - &Hermitian::identity(nv).kron(&next)).max_abs());
        chain.push(next.clone());
        layouts.push(next_layout.clone());
        current = next;
        current_layout = next_layout;
    }
    chain.reverse();
    layouts.reverse();
    let witness = CombWitness { chain, layouts, residual, min_eigenvalue: min_eig };
    Ok((psd && residual <= tol, witness))
}

/// Layout `[1, dims..., 1]` under which a dual comb is an ordinary comb with
/// one more step.
pub(crate) fn dual_comb_layout(layout: &SystemLayout) -> Result<SystemLayout> {
    let mut dims = vec![1];
    dims.extend_from_slice(layout.dims());
    dims.push(1);
    SystemLayout::new(dims)
}

/// Membership in the dual-comb set: `p = I_{W_T} ⊗ τ^(T)`,
/// `Tr_{V_t} τ^(t) = I_{W_{t−1}} ⊗ τ^(t−1)` and `τ^(1)` a density matrix.
pub fn is_dual_comb(p: &ChoiProcess, steps: usize, tol: f64) -> Result<bool> {
    Ok(dual_comb_residual(p.matrix(), p.layout(), steps)? <= tol
        && p.matrix().is_psd(PSD_TOL))
}

/// Worst residual of the dual-comb recursion, ignoring positivity.
pub(crate) fn dual_comb_residual(matrix: &Hermitian, layout: &SystemLayout, steps: usize) -> Result<f64> {
    check_steps(layout, steps)?;
    let extended = dual_comb_layout(layout)?;
    let (_, witness) = comb_recursion(matrix, &extended, steps + 1, f64::INFINITY)?;
    Ok(witness.residual)
}

/// Choi matrix `Σ_k (K_k ⊗ I)|I⟩⟩⟨⟨I|(K_k ⊗ I)†` on layout `[W, V]`.
pub fn choi_from_kraus(kraus: &[CMatrix], in_dim: usize, out_dim: usize) -> Result<ChoiProcess> {
    if kraus.is_empty() {
        return Err(Error::invalid("at least one Kraus operator is required"));
    }
    let n = in_dim * out_dim;
    let mut m = CMatrix::zeros(n, n);
    for (k, op) in kraus.iter().enumerate() {
        if op.nrows() != out_dim || op.ncols() != in_dim {
            return Err(Error::invalid(format!(
                "Kraus operator {k} is {}x{}, expected {out_dim}x{in_dim}",
                op.nrows(),
                op.ncols()
            )));
        }
        let v: Vec<C64> = (0..n).map(|idx| op[(idx / in_dim, idx % in_dim)]).collect();
        for i in 0..n {
            if v[i] == ZERO {
                continue;
            }
            for j in 0..n {
                m[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    let layout = SystemLayout::new(vec![out_dim, in_dim])?;
    Ok(ChoiProcess::unchecked(Hermitian::symmetrize(m), layout, Role::CombCandidate))
}

pub fn choi_from_unitary(u: &CMatrix) -> Result<ChoiProcess> {
    choi_from_kraus(std::slice::from_ref(u), u.ncols(), u.nrows())
}

/// Link product joining subsystem `a_sys` of `a` with `b_sys` of `b` for each
/// pair in `shared`. The result is ordered as `[b unshared, a unshared]`, each
/// group in its original order, which is the natural ordering when `b` acts
/// after `a`.
pub fn link_product(a: &ChoiProcess, b: &ChoiProcess, shared: &[(usize, usize)]) -> Result<ChoiProcess> {
    let (matrix, layout) = link_matrices(a.matrix(), a.layout(), b.matrix(), b.layout(), shared)?;
    Ok(ChoiProcess::unchecked(matrix, layout, Role::CombCandidate))
}

pub(crate) fn link_matrices(
    a: &Hermitian,
    la: &SystemLayout,
    b: &Hermitian,
    lb: &SystemLayout,
    shared: &[(usize, usize)],
) -> Result<(Hermitian, SystemLayout)> {
    la.check_matrix(a.dim(), "link product (left)")?;
    lb.check_matrix(b.dim(), "link product (right)")?;
    let mut a_used = vec![false; la.len()];
    let mut b_used = vec![false; lb.len()];
    for &(i, j) in shared {
        la.check_index(i)?;
        lb.check_index(j)?;
        if a_used[i] || b_used[j] {
            return Err(Error::invalid("a subsystem appears twice in the link pairing"));
        }
        if la.dims()[i] != lb.dims()[j] {
            return Err(Error::DimensionMismatch {
                context: "linked wire",
                expected: la.dims()[i],
                found: lb.dims()[j],
            });
        }
        a_used[i] = true;
        b_used[j] = true;
    }
    let a_free: Vec<usize> = (0..la.len()).filter(|&k| !a_used[k]).collect();
    let b_free: Vec<usize> = (0..lb.len()).filter(|&k| !b_used[k]).collect();

    let a_perm: Vec<usize> = a_free.iter().copied().chain(shared.iter().map(|&(i, _)| i)).collect();
    let b_perm: Vec<usize> = shared.iter().map(|&(_, j)| j).chain(b_free.iter().copied()).collect();
    let ap = permute_systems(a, la, &a_perm)?;
    let bp = permute_systems(b, lb, &b_perm)?;
    let da = la.dim_of(&a_free);
    let db = lb.dim_of(&b_free);
    let ds: usize = shared.iter().map(|&(i, _)| la.dims()[i]).product();

    // result[(bu, au), (bu', au')] = Σ_{s,s'} a[(au, s'), (au', s)] · b[(s', bu), (s, bu')]
    let am = ap.matrix();
    let bm = bp.matrix();
    let n = da * db;
    let mut out = CMatrix::zeros(n, n);
    for au in 0..da {
        for au2 in 0..da {
            for s in 0..ds {
                for s2 in 0..ds {
                    let av = am[(au * ds + s2, au2 * ds + s)];
                    if av == ZERO {
                        continue;
                    }
                    for bu in 0..db {
                        for bu2 in 0..db {
                            let bv = bm[(s2 * db + bu, s * db + bu2)];
                            out[(bu * da + au, bu2 * da + au2)] += av * bv;
                        }
                    }
                }
            }
        }
    }
    let dims: Vec<usize> = b_free
        .iter()
        .map(|&k| lb.dims()[k])
        .chain(a_free.iter().map(|&k| la.dims()[k]))
        .collect();
    let layout = if dims.is_empty() { SystemLayout::new(vec![1])? } else { SystemLayout::new(dims)? };
    Ok((Hermitian::symmetrize(out), layout))
}

/// Choi matrix of the isometry `iso` seen as a map into `[out systems...]`
/// from `[in systems...]`, with layout `[out..., in...]`.
fn isometry_choi(iso: &CMatrix, out_dims: &[usize], in_dims: &[usize]) -> Result<(Hermitian, SystemLayout)> {
    let in_dim: usize = in_dims.iter().product();
    let out_dim: usize = out_dims.iter().product();
    let c = choi_from_kraus(std::slice::from_ref(iso), in_dim, out_dim)?;
    let dims: Vec<usize> = out_dims.iter().chain(in_dims).copied().collect();
    Ok((c.into_matrix(), SystemLayout::new(dims)?))
}

/// Random comb from Haar isometries threaded through a memory system.
pub fn random_comb(layout: &SystemLayout, steps: usize, seed: u64) -> Result<ChoiProcess> {
    check_steps(layout, steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_of = |t: usize| layout.dims()[layout.output_index(t)];
    let in_of = |t: usize| layout.dims()[layout.input_index(t)];

    let mut acc: Option<(Hermitian, SystemLayout)> = None;
    let mut memory = 1usize;
    for t in 1..=steps {
        let (w, v) = (out_of(t), in_of(t));
        let in_total = v * memory;
        // Next memory (or traced environment on the last step) keeps the map an isometry.
        let extra = 2usize.max(in_total.div_ceil(w));
        let iso = random_isometry(w * extra, in_total, &mut rng);
        let in_dims: Vec<usize> = if memory > 1 { vec![v, memory] } else { vec![v] };
        let (choi, choi_layout) = isometry_choi(&iso, &[w, extra], &in_dims)?;
        let (step_choi, step_layout) = if t == steps {
            let keep: Vec<usize> = (0..choi_layout.len()).filter(|&k| k != 1).collect();
            (partial_trace(&choi, &choi_layout, &keep)?, choi_layout.sub_layout(&keep)?)
        } else {
            (choi, choi_layout)
        };
        acc = Some(match acc {
            None => (step_choi, step_layout),
            Some((prev, prev_layout)) => {
                // prev = [W_{t-1}, M_{t-1}, V_{t-1}, ...]; step = [W_t, (M_t), V_t, M_{t-1}].
                let mem_in = step_layout.len() - 1;
                link_matrices(&prev, &prev_layout, &step_choi, &step_layout, &[(1, mem_in)])?
            }
        });
        memory = extra;
    }
    let (matrix, out_layout) = acc.expect("at least one step");
    debug_assert_eq!(out_layout.dims(), layout.dims());
    Ok(ChoiProcess::unchecked(matrix, layout.clone(), Role::CombCandidate))
}

/// Random element of the dual-comb set on `layout`.
pub fn random_dual_comb(layout: &SystemLayout, steps: usize, seed: u64) -> Result<ChoiProcess> {
    check_steps(layout, steps)?;
    let extended = dual_comb_layout(layout)?;
    let c = random_comb(&extended, steps + 1, seed)?;
    Ok(ChoiProcess::unchecked(c.into_matrix(), layout.clone(), Role::TesterElement))
}

/// Ensemble `{(p_m, E_m)}` of combs sharing a layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationInstance {
    combs: Vec<ChoiProcess>,
    priors: Vec<f64>,
    time_steps: usize,
}

impl DiscriminationInstance {
    pub fn new(combs: Vec<ChoiProcess>, priors: Vec<f64>, time_steps: usize) -> Result<Self> {
        if combs.len() < 2 {
            return Err(Error::invalid("an instance needs at least two combs"));
        }
        if priors.len() != combs.len() {
            return Err(Error::DimensionMismatch {
                context: "priors",
                expected: combs.len(),
                found: priors.len(),
            });
        }
        if let Some(p) = priors.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::invalid(format!("prior {p} is negative or not finite")));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("priors must sum to 1 (sum is {total})")));
        }
        let layout = combs[0].layout().clone();
        for (m, c) in combs.iter().enumerate() {
            if c.layout().dims() != layout.dims() {
                return Err(Error::InvalidLayout(format!(
                    "comb {m} has layout {} but comb 0 has {layout}",
                    c.layout()
                )));
            }
            let (ok, w) = is_comb(c, time_steps, COMB_TOL)?;
            if !ok {
                return Err(Error::invalid(format!(
                    "comb {m} fails the comb recursion (residual {:.3e}, minimum eigenvalue {:.3e})",
                    w.residual, w.min_eigenvalue
                )));
            }
        }
        let combs = combs
            .into_iter()
            .map(|c| ChoiProcess::unchecked(c.matrix, c.layout, Role::CombCandidate))
            .collect();
        Ok(Self { combs, priors, time_steps })
    }

    pub fn combs(&self) -> &[ChoiProcess] {
        &self.combs
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    pub fn num_outcomes(&self) -> usize {
        self.combs.len()
    }

    pub fn layout(&self) -> &SystemLayout {
        self.combs[0].layout()
    }

    pub fn dim(&self) -> usize {
        self.layout().total_dim()
    }

    /// `p_m E_m`.
    pub fn weighted(&self, m: usize) -> Hermitian {
        self.combs[m].matrix().scale(self.priors[m])
    }

    pub fn weighted_all(&self) -> Vec<Hermitian> {
        (0..self.num_outcomes()).map(|m| self.weighted(m)).collect()
    }

    /// Same ensemble with the outcomes reordered: new outcome `k` is old `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let combs = perm.iter().map(|&k| self.combs[k].clone()).collect();
        let priors = perm.iter().map(|&k| self.priors[k]).collect();
        Self::new(combs, priors, self.time_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{inner_product, ONE};
    use proptest::prelude::*;

    fn omega() -> C64 {
        C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
    }

    fn phase_unitary() -> CMatrix {
        let mut u = CMatrix::identity(2, 2);
        u[(1, 1)] = omega();
        u
    }

    #[test]
    fn identity_channel_choi() {
        let c = choi_from_unitary(&CMatrix::identity(2, 2)).unwrap();
        let v = [ONE, ZERO, ZERO, ONE];
        assert!((c.matrix() - &Hermitian::projector(&v)).max_abs() < 1e-15);
    }

    #[test]
    fn phase_channel_choi_matches_displayed_matrix() {
        let c = choi_from_unitary(&phase_unitary()).unwrap();
        let m = c.matrix();
        let w = omega();
        assert!((m.get(0, 0) - ONE).norm() < 1e-15);
        assert!((m.get(3, 3) - ONE).norm() < 1e-15);
        assert!((m.get(0, 3) - w.conj()).norm() < 1e-15);
        assert!((m.get(3, 0) - w).norm() < 1e-15);
        assert!(m.get(1, 1).norm() < 1e-15 && m.get(1, 2).norm() < 1e-15);
    }

    #[test]
    fn depolarizing_choi_is_maximally_mixed() {
        let s = 0.5;
        let paulis = [
            CMatrix::identity(2, 2),
            CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            CMatrix::from_row_slice(2, 2, &[ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO]),
            CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        ];
        let kraus: Vec<CMatrix> = paulis.iter().map(|p| p * C64::new(s, 0.0)).collect();
        let c = choi_from_kraus(&kraus, 2, 2).unwrap();
        assert!((c.matrix() - &Hermitian::identity(4).scale(0.5)).max_abs() < 1e-15);
        assert!(choi_from_kraus(&[CMatrix::identity(3, 2)], 2, 2).is_err());
    }

    #[test]
    fn comb_examples() {
        let l = choi_from_unitary(&phase_unitary()).unwrap();
        assert!(is_comb(&l, 1, COMB_TOL).unwrap().0);
        let bad = ChoiProcess::new(
            Hermitian::from_real_diagonal(&[2.0, 0.0, 0.0, 0.0]),
            SystemLayout::new(vec![2, 2]).unwrap(),
            Role::CombCandidate,
        )
        .unwrap();
        assert!(!is_comb(&bad, 1, COMB_TOL).unwrap().0);
        let ll = ChoiProcess::new(
            l.matrix().kron(l.matrix()),
            SystemLayout::new(vec![2, 2, 2, 2]).unwrap(),
            Role::CombCandidate,
        )
        .unwrap();
        let (ok, w) = is_comb(&ll, 2, COMB_TOL).unwrap();
        assert!(ok);
        assert_eq!(w.chain.len(), 2);
        assert!((&w.chain[0] - l.matrix()).max_abs() < 1e-14);
        assert!(is_comb(&ll, 1, COMB_TOL).is_err());
    }

    #[test]
    fn dual_comb_examples() {
        let layout = SystemLayout::new(vec![2, 2]).unwrap();
        let rho = Hermitian::from_real_diagonal(&[0.3, 0.7]);
        let good = ChoiProcess::new(Hermitian::identity(2).kron(&rho), layout.clone(), Role::TesterElement).unwrap();
        assert!(is_dual_comb(&good, 1, COMB_TOL).unwrap());
        let mixed = ChoiProcess::new(Hermitian::identity(4).scale(0.5), layout.clone(), Role::TesterElement).unwrap();
        assert!(is_dual_comb(&mixed, 1, COMB_TOL).unwrap());
        let bad = ChoiProcess::new(
            Hermitian::from_real_diagonal(&[1.0, 1.0, 0.0, 0.0]),
            layout,
            Role::TesterElement,
        )
        .unwrap();
        assert!(!is_dual_comb(&bad, 1, COMB_TOL).unwrap());
    }

    #[test]
    fn link_with_identity_is_neutral() {
        let c = random_comb(&SystemLayout::new(vec![2, 3]).unwrap(), 1, 7).unwrap();
        let id = choi_from_unitary(&CMatrix::identity(2, 2)).unwrap();
        // Identity after the channel: wire W of c into V of id.
        let out = link_product(&c, &id, &[(0, 1)]).unwrap();
        assert_eq!(out.layout().dims(), &[2, 3]);
        assert!((out.matrix() - c.matrix()).max_abs() < 1e-12);
    }

    #[test]
    fn linking_a_state_evaluates_the_channel() {
        let c = random_comb(&SystemLayout::new(vec![2, 2]).unwrap(), 1, 3).unwrap();
        let rho = Hermitian::from_rows(&[
            vec![C64::new(0.6, 0.0), C64::new(0.1, 0.2)],
            vec![C64::new(0.1, -0.2), C64::new(0.4, 0.0)],
        ])
        .unwrap();
        let state = ChoiProcess::new(rho.clone(), SystemLayout::new(vec![2]).unwrap(), Role::CombCandidate).unwrap();
        let out = link_product(&state, &c, &[(0, 1)]).unwrap();
        let expected = partial_trace(
            &Hermitian::symmetrize(
                c.matrix().matrix() * Hermitian::identity(2).kron(&rho.transpose()).matrix(),
            ),
            c.layout(),
            &[0],
        )
        .unwrap();
        assert!((out.matrix() - &expected).max_abs() < 1e-12);
    }

    #[test]
    fn random_combs_are_combs_and_deterministic() {
        for (dims, t) in [(vec![2, 2], 1), (vec![2, 2, 2, 2], 2), (vec![3, 2, 2, 3], 2), (vec![2, 1, 1, 2, 2, 2], 3)] {
            let layout = SystemLayout::new(dims).unwrap();
            let c = random_comb(&layout, t, 42).unwrap();
            let (ok, w) = is_comb(&c, t, 1e-9).unwrap();
            assert!(ok, "residual {}", w.residual);
            assert_eq!(c, random_comb(&layout, t, 42).unwrap());
            let d = random_dual_comb(&layout, t, 43).unwrap();
            assert!(is_dual_comb(&d, t, 1e-9).unwrap());
        }
    }

    #[test]
    fn linked_combs_form_a_comb() {
        let a = random_comb(&SystemLayout::new(vec![2, 2]).unwrap(), 1, 1).unwrap();
        let b = random_comb(&SystemLayout::new(vec![2, 2]).unwrap(), 1, 2).unwrap();
        let ab = link_product(&a, &b, &[(0, 1)]).unwrap();
        assert!(is_comb(&ab, 1, 1e-9).unwrap().0);
        // Parallel composition (nothing shared) is a two-step comb.
        let par = link_product(&a, &b, &[]).unwrap();
        assert!(is_comb(&par, 2, 1e-9).unwrap().0);
    }

    #[test]
    fn instance_validation() {
        let l = choi_from_unitary(&phase_unitary()).unwrap();
        let id = choi_from_unitary(&CMatrix::identity(2, 2)).unwrap();
        assert!(DiscriminationInstance::new(vec![l.clone(), id.clone()], vec![0.5, 0.5], 1).is_ok());
        let err = DiscriminationInstance::new(vec![l.clone(), id.clone()], vec![0.5, 0.4], 1).unwrap_err();
        assert!(err.to_string().contains("priors must sum to 1"));
        assert!(DiscriminationInstance::new(vec![l], vec![1.0], 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn comb_dual_comb_pairing_is_one(seed in any::<u64>(), two_steps in any::<bool>()) {
            let (layout, t) = if two_steps {
                (SystemLayout::new(vec![2, 2, 2, 2]).unwrap(), 2)
            } else {
                (SystemLayout::new(vec![2, 3]).unwrap(), 1)
            };
            let tau = random_comb(&layout, t, seed).unwrap();
            let sigma = random_dual_comb(&layout, t, seed.wrapping_add(1)).unwrap();
            let v = inner_product(tau.matrix(), sigma.matrix()).unwrap();
            prop_assert!((v - 1.0).abs() < 1e-9);
        }

        #[test]
        fn perturbed_combs_are_rejected(seed in any::<u64>(), eps in 1e-6f64..1e-2) {
            let layout = SystemLayout::new(vec![2, 2, 2, 2]).unwrap();
            let tau = random_comb(&layout, 2, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            // Rank-one PSD perturbation with nonzero trace always breaks the normalization.
            let v = crate::hermitian::random_pure_state(16, &mut rng);
            let bumped = tau.matrix() + &Hermitian::projector(&v).scale(eps);
            let p = ChoiProcess::new(bumped, layout, Role::CombCandidate).unwrap();
            prop_assert!(!is_comb(&p, 2, COMB_TOL).unwrap().0);
        }

        #[test]
        fn trace_preserving_kraus_gives_comb(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let iso = random_isometry(6, 2, &mut rng);
            let kraus: Vec<CMatrix> = (0..3).map(|k| iso.rows(2 * k, 2).into_owned()).collect();
            let c = choi_from_kraus(&kraus, 2, 2).unwrap();
            prop_assert!(is_comb(&c, 1, COMB_TOL).unwrap().0);
        }
    }
}
