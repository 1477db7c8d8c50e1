//! The three qubit phase channels `Λ_m = Ad_{U^m}` with `U = diag(1, ω)` used
//! twice in sequence, and helpers built around them.

use std::f64::consts::PI;

use crate::conic::ConicOptions;
use crate::error::Result;
use crate::hermitian::{CMatrix, Hermitian, SystemLayout, C64};
use crate::model::{solve_tester_program, StructuredCut, SumSetShape};
use crate::process::{choi_from_unitary, link_product, ChoiProcess, DiscriminationInstance, Role};
use crate::strategy::{StrategyClass, Tester};

pub const NUM_CHANNELS: usize = 3;

fn omega_power(k: i64) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * k as f64 / 3.0)
}

/// `U^m = diag(1, ω^m)`.
pub fn phase_unitary(m: usize) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), omega_power(m as i64)]))
}

/// `Λ_m` on layout `[W, V]` for `m = 1, 2, 3`.
pub fn phase_channel(m: usize) -> Result<ChoiProcess> {
    choi_from_unitary(&phase_unitary(m))
}

pub fn phase_channels() -> Result<Vec<ChoiProcess>> {
    (1..=NUM_CHANNELS).map(phase_channel).collect()
}

/// `{(1/3, Λ_m ⊗ Λ_m)}` on `[W_2, V_2, W_1, V_1]`.
pub fn two_use_instance() -> Result<DiscriminationInstance> {
    let layout = SystemLayout::new(vec![2, 2, 2, 2])?;
    let combs = phase_channels()?
        .into_iter()
        .map(|c| ChoiProcess::new(c.matrix().kron(c.matrix()), layout.clone(), Role::CombCandidate))
        .collect::<Result<Vec<_>>>()?;
    DiscriminationInstance::new(combs, vec![1.0 / 3.0; NUM_CHANNELS], 2)
}

/// Input state `|Φ+⟩⟨Φ+|` on `[V_1, V_1']`.
pub fn entangled_input() -> Result<ChoiProcess> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = [C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)];
    ChoiProcess::new(Hermitian::projector(&v), SystemLayout::new(vec![2, 2])?, Role::CombCandidate)
}

/// The unitary taking `W_1 ⊗ V_1'` to `V_2 ⊗ W_2'` between the two uses.
pub fn middle_unitary() -> CMatrix {
    let r = 2f64.sqrt();
    let rows = [[r, 0.0, 1.0, 0.0], [0.0, r, 0.0, 1.0], [-1.0, 0.0, r, 0.0], [0.0, -1.0, 0.0, r]];
    CMatrix::from_fn(4, 4, |i, j| C64::new(rows[i][j] / 3f64.sqrt(), 0.0))
}

/// `Ad` of [`middle_unitary`] on layout `[V_2, W_2', W_1, V_1']`.
pub fn middle_channel() -> Result<ChoiProcess> {
    let c = choi_from_unitary(&middle_unitary())?;
    ChoiProcess::new(c.into_matrix(), SystemLayout::new(vec![2, 2, 2, 2])?, Role::CombCandidate)
}

/// Output states on `[W_2, W_2']` of the adaptive strategy that makes the
/// three two-use processes perfectly distinguishable.
pub fn perfect_strategy_states() -> Result<Vec<Hermitian>> {
    let input = entangled_input()?;
    let middle = middle_channel()?;
    phase_channels()?
        .iter()
        .map(|channel| {
            // [V_1, V_1'] -> [W_1, V_1']
            let first = link_product(&input, channel, &[(0, 1)])?;
            // -> [V_2, W_2']
            let mid = link_product(&first, &middle, &[(0, 2), (1, 3)])?;
            // -> [W_2, W_2']
            Ok(link_product(&mid, channel, &[(0, 1)])?.into_matrix())
        })
        .collect()
}

/// Largest `|⟨ρ_m, ρ_n⟩|` over distinct pairs.
pub fn max_pairwise_overlap(states: &[Hermitian]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            worst = worst.max(a.inner(b).abs());
        }
    }
    worst
}

/// The tester of the perfect strategy: measure the output states in a basis
/// containing them.
pub fn perfect_strategy_tester() -> Result<Tester> {
    let states = perfect_strategy_states()?;
    let input = entangled_input()?;
    let middle = middle_channel()?;
    let rest = &Hermitian::identity(4) - &states.iter().fold(Hermitian::zeros(4), |acc, s| &acc + s);
    let pair = SystemLayout::new(vec![2, 2])?;
    let layout = SystemLayout::new(vec![2, 2, 2, 2])?;
    let mut elements = Vec::with_capacity(states.len());
    for (k, s) in states.iter().enumerate() {
        let effect = if k == 0 { s + &rest } else { s.clone() };
        let measure = ChoiProcess::new(effect.transpose(), pair.clone(), Role::TesterElement)?;
        // [V_2, W_2', W_1, V_1]
        let prepared = link_product(&input, &middle, &[(1, 3)])?;
        // [W_2, V_2, W_1, V_1]
        let linked = link_product(&prepared, &measure, &[(1, 1)])?;
        elements.push(linked.into_matrix().transpose());
    }
    Tester::new(elements, &layout, StrategyClass::Global)
}

/// Best value of the symmetric one-step reduction of the sequential dual,
/// `max_{B ∈ Test_3} (a + |b|)` with `a = (1/3) Σ ⟨B_m, Λ_m⟩` and
/// `b = (1/3) Σ ω^m ⟨B_m, Λ_m⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedValue {
    pub value: f64,
    /// Phase at which `|b| = Re(e^{-iθ} b)` is attained.
    pub phase: f64,
}

/// Writes `a + |b| = max_θ Σ_m w_m(θ) ⟨B_m, Λ_m⟩` with
/// `w_m(θ) = (1 + cos(2πm/3 − θ))/3` and maximizes over `θ` by a grid followed
/// by golden-section refinement. Each inner problem is a single-use
/// discrimination program.
pub fn reduced_sequential_value(grid: usize, options: &ConicOptions) -> Result<ReducedValue> {
    let channels: Vec<Hermitian> = phase_channels()?.into_iter().map(ChoiProcess::into_matrix).collect();
    let layout = SystemLayout::new(vec![2, 2])?;
    let cuts: Vec<StructuredCut> = (0..NUM_CHANNELS).map(StructuredCut::full).collect();
    let inner = |theta: f64| -> Result<f64> {
        let costs: Vec<Hermitian> = channels
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let m = (k + 1) as f64;
                c.scale((1.0 + (2.0 * PI * m / 3.0 - theta).cos()) / 3.0)
            })
            .collect();
        Ok(solve_tester_program(&costs, &layout, &SumSetShape::DualComb, &cuts, options)?.value)
    };

    let grid = grid.max(3);
    let step = 2.0 * PI / grid as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..grid {
        let theta = k as f64 * step;
        let v = inner(theta)?;
        if v > best.0 {
            best = (v, theta);
        }
    }
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best.1 - step, best.1 + step);
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let (mut f1, mut f2) = (inner(x1)?, inner(x2)?);
    while hi - lo > 1e-7 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = inner(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = inner(x1)?;
        }
    }
    for (v, t) in [(f1, x1), (f2, x2)] {
        if v > best.0 {
            best = (v, t);
        }
    }
    Ok(ReducedValue { value: best.0, phase: best.1.rem_euclid(2.0 * PI) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::is_comb;

    #[test]
    fn channel_matrix_entries() {
        let l = phase_channel(1).unwrap();
        let m = l.matrix();
        assert!((m.get(0, 0).re - 1.0).abs() < 1e-12 && (m.get(3, 3).re - 1.0).abs() < 1e-12);
        assert!((m.get(0, 3) - omega_power(-1)).norm() < 1e-12);
        assert!((m.get(3, 0) - omega_power(1)).norm() < 1e-12);
        assert!(m.get(1, 1).norm() < 1e-12);
        assert!((m.inner(m) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn two_use_combs_are_combs() {
        let inst = two_use_instance().unwrap();
        for c in inst.combs() {
            assert!(is_comb(c, 2, 1e-9).unwrap().0);
        }
    }

    #[test]
    fn perfect_states_are_orthogonal_and_normalized() {
        let states = perfect_strategy_states().unwrap();
        for s in &states {
            assert!((s.trace() - 1.0).abs() < 1e-10);
            assert!((s.max_eigenvalue() - 1.0).abs() < 1e-10);
        }
        assert!(max_pairwise_overlap(&states) < 1e-9);
    }

    #[test]
    fn perfect_tester_succeeds_with_certainty() {
        let inst = two_use_instance().unwrap();
        let t = perfect_strategy_tester().unwrap();
        let v: f64 = (0..3).map(|m| inst.priors()[m] * t.matrices()[m].inner(inst.combs()[m].matrix())).sum();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }
}

