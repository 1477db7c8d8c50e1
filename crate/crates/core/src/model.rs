//! Conic modeling shared by the strategy classes, the dual solver and the
//! primal solver: sum-set constraints, comb normalization chains, and the
//! restricted tester program built from structured cone generators.

use serde::{Deserialize, Serialize};

use crate::conic::{ConicOptions, ConicProgram, ConicSolution, FreeHermitian, PsdBlock, Telemetry, Term, Var};
use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, Hermitian, SystemLayout, C64, ZERO};

/// Machine-checkable description of the set `S` that the sum of tester elements must lie in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SumSetShape {
    /// All dual combs on the layout.
    DualComb,
    /// A single admissible sum.
    Singleton { matrix: Hermitian },
    /// `I` on every output wire tensored with an arbitrary state of all input wires.
    Nonadaptive,
    /// PSD matrices `Q` with `⟨L_i, Q⟩ = c_i` for every listed pair.
    AffineSlice { constraints: Vec<(Hermitian, f64)> },
    /// Convex hull of finitely many generators.
    FiniteHull { generators: Vec<Hermitian> },
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum MatVar {
    Psd(PsdBlock),
    Free(FreeHermitian),
}

impl MatVar {
    pub(crate) fn new(p: &mut ConicProgram, dim: usize, psd: bool) -> Self {
        if psd {
            MatVar::Psd(p.psd_block(dim))
        } else {
            MatVar::Free(p.free_hermitian(dim))
        }
    }

    pub(crate) fn at(&self, r: usize, c: usize) -> Var {
        match self {
            MatVar::Psd(b) => b.at(r, c),
            MatVar::Free(h) => h.at(r, c),
        }
    }

    pub(crate) fn dim(&self) -> usize {
        match self {
            MatVar::Psd(b) => b.dim(),
            MatVar::Free(h) => h.dim(),
        }
    }

    pub(crate) fn value(&self, sol: &ConicSolution) -> Hermitian {
        match self {
            MatVar::Psd(b) => sol.block(*b).clone(),
            MatVar::Free(h) => sol.hermitian(*h),
        }
    }

    /// Terms of `⟨X, K⟩ = Σ X[r][c]·K[c][r]`.
    pub(crate) fn pairing(&self, k: &Hermitian) -> Vec<Term> {
        let n = self.dim();
        let mut terms = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                let v = k.get(c, r);
                if v != ZERO {
                    terms.push(Term::new(self.at(r, c), v));
                }
            }
        }
        terms
    }
}

/// How a normalization chain terminates.
#[derive(Clone, Copy, Debug)]
pub(crate) enum ChainEnd {
    One,
    Scale(Var),
}

/// Imposes the recursive normalization
/// `Tr_{s0} X = I_{s1} ⊗ X'`, `Tr_{s2} X' = I_{s3} ⊗ X''`, … on `top`, whose
/// systems are `dims`. An even chain ends with `Tr_{s_{k-2}} X = I·end`, an odd
/// chain with `Tr X = end`.
pub(crate) fn add_chain(p: &mut ConicProgram, dims: &[usize], top: MatVar, end: ChainEnd) {
    let end_terms = |coef: f64| -> (Vec<Term>, f64) {
        match end {
            ChainEnd::One => (Vec::new(), coef),
            ChainEnd::Scale(v) => (vec![Term::real(v, -coef)], 0.0),
        }
    };
    if dims.len() == 1 {
        let mut terms: Vec<Term> = (0..dims[0]).map(|i| Term::real(top.at(i, i), 1.0)).collect();
        let (extra, rhs) = end_terms(1.0);
        terms.extend(extra);
        p.add_real_eq(terms, rhs);
        return;
    }
    let s0 = dims[0];
    let s1 = dims[1];
    let rest: usize = dims[2..].iter().product();
    let d = s1 * rest;
    let next = if dims.len() > 2 { Some(MatVar::Free(p.free_hermitian(rest))) } else { None };
    for a in 0..d {
        for b in a..d {
            let mut terms: Vec<Term> = (0..s0).map(|k| Term::real(top.at(k * d + a, k * d + b), 1.0)).collect();
            let same_block = a / rest == b / rest;
            let mut rhs = 0.0;
            if same_block {
                match next {
                    Some(x) => terms.push(Term::real(x.at(a % rest, b % rest), -1.0)),
                    None if a == b => {
                        let (extra, r) = end_terms(1.0);
                        terms.extend(extra);
                        rhs = r;
                    }
                    None => {}
                }
            }
            p.add_real_eq(terms.clone(), rhs);
            if a != b {
                let minus_i = C64::new(0.0, -1.0);
                p.add_real_eq(terms.iter().map(|t| Term::new(t.var, t.coef * minus_i)).collect(), 0.0);
            }
        }
    }
    if let Some(x) = next {
        add_chain(p, &dims[2..], x, end);
    }
}

/// Flat index over the output (even) systems and the input (odd) systems of each full index.
pub(crate) fn wire_maps(layout: &SystemLayout) -> (Vec<usize>, Vec<usize>, usize, usize) {
    let dims = layout.dims();
    let n = layout.total_dim();
    let mut digits = vec![0; dims.len()];
    let mut wmap = Vec::with_capacity(n);
    let mut vmap = Vec::with_capacity(n);
    let (mut nw, mut nv) = (1, 1);
    for (k, &d) in dims.iter().enumerate() {
        if k % 2 == 0 {
            nw *= d;
        } else {
            nv *= d;
        }
    }
    for a in 0..n {
        layout.digits(a, &mut digits);
        let (mut w, mut v) = (0, 0);
        for (k, &d) in dims.iter().enumerate() {
            if k % 2 == 0 {
                w = w * d + digits[k];
            } else {
                v = v * d + digits[k];
            }
        }
        wmap.push(w);
        vmap.push(v);
    }
    (wmap, vmap, nw, nv)
}

enum SumKind {
    DualComb { top: MatVar, outer: usize },
    Nonadaptive { rho: MatVar, wmap: Vec<usize>, vmap: Vec<usize> },
    Constant(Hermitian),
    Slice(MatVar),
    Hull { weights: Vec<PsdBlock>, generators: Vec<Hermitian> },
}

/// A point `Q` of a sum set expressed through program variables.
pub(crate) struct SumSetModel {
    n: usize,
    kind: SumKind,
}

impl SumSetModel {
    /// With `psd` false, free Hermitian variables replace PSD blocks where the
    /// set would otherwise be implied by other constraints.
    pub(crate) fn add(
        p: &mut ConicProgram,
        shape: &SumSetShape,
        layout: &SystemLayout,
        psd: bool,
    ) -> Result<Self> {
        let n = layout.total_dim();
        let kind = match shape {
            SumSetShape::DualComb => {
                let dims = layout.dims();
                if dims.len() % 2 != 0 {
                    return Err(Error::InvalidLayout("dual combs need an even number of systems".into()));
                }
                let outer = dims[0];
                let top = MatVar::new(p, n / outer, psd);
                add_chain(p, &dims[1..], top, ChainEnd::One);
                SumKind::DualComb { top, outer }
            }
            SumSetShape::Nonadaptive => {
                let (wmap, vmap, _, nv) = wire_maps(layout);
                let rho = MatVar::new(p, nv, psd);
                p.add_real_eq((0..nv).map(|i| Term::real(rho.at(i, i), 1.0)).collect(), 1.0);
                SumKind::Nonadaptive { rho, wmap, vmap }
            }
            SumSetShape::Singleton { matrix } => {
                check_dim(matrix, n)?;
                SumKind::Constant(matrix.clone())
            }
            SumSetShape::AffineSlice { constraints } => {
                let sigma = MatVar::new(p, n, true);
                for (l, c) in constraints {
                    check_dim(l, n)?;
                    p.add_real_eq(sigma.pairing(l), *c);
                }
                SumKind::Slice(sigma)
            }
            SumSetShape::FiniteHull { generators } => {
                if generators.is_empty() {
                    return Err(Error::invalid("finite hull needs at least one generator"));
                }
                for g in generators {
                    check_dim(g, n)?;
                }
                let weights: Vec<PsdBlock> = generators.iter().map(|_| p.psd_block(1)).collect();
                p.add_real_eq(weights.iter().map(|w| Term::real(w.at(0, 0), 1.0)).collect(), 1.0);
                SumKind::Hull { weights, generators: generators.clone() }
            }
        };
        Ok(Self { n, kind })
    }

    /// Terms of `Q[a][b]` and its constant part.
    pub(crate) fn entry(&self, a: usize, b: usize) -> (Vec<Term>, C64) {
        match &self.kind {
            SumKind::DualComb { top, outer } => {
                let r = self.n / outer;
                if a / r == b / r {
                    (vec![Term::real(top.at(a % r, b % r), 1.0)], ZERO)
                } else {
                    (Vec::new(), ZERO)
                }
            }
            SumKind::Nonadaptive { rho, wmap, vmap } => {
                if wmap[a] == wmap[b] {
                    (vec![Term::real(rho.at(vmap[a], vmap[b]), 1.0)], ZERO)
                } else {
                    (Vec::new(), ZERO)
                }
            }
            SumKind::Constant(m) => (Vec::new(), m.get(a, b)),
            SumKind::Slice(s) => (vec![Term::real(s.at(a, b), 1.0)], ZERO),
            SumKind::Hull { weights, generators } => {
                let terms = weights
                    .iter()
                    .zip(generators)
                    .filter(|(_, g)| g.get(a, b) != ZERO)
                    .map(|(w, g)| Term::new(w.at(0, 0), g.get(a, b)))
                    .collect();
                (terms, ZERO)
            }
        }
    }

    /// Terms and constant of `⟨Q, χ⟩`.
    pub(crate) fn pairing(&self, chi: &Hermitian) -> (Vec<Term>, f64) {
        match &self.kind {
            SumKind::DualComb { top, outer } => {
                let r = self.n / outer;
                let mut k = CMatrix::zeros(r, r);
                for w in 0..*outer {
                    for i in 0..r {
                        for j in 0..r {
                            k[(i, j)] += chi.get(w * r + i, w * r + j);
                        }
                    }
                }
                (top.pairing(&Hermitian::symmetrize(k)), 0.0)
            }
            SumKind::Nonadaptive { rho, wmap, vmap } => {
                let nv = rho.dim();
                let mut k = CMatrix::zeros(nv, nv);
                for a in 0..self.n {
                    for b in 0..self.n {
                        if wmap[a] == wmap[b] {
                            k[(vmap[b], vmap[a])] += chi.get(b, a);
                        }
                    }
                }
                (rho.pairing(&Hermitian::symmetrize(k)), 0.0)
            }
            SumKind::Constant(m) => (Vec::new(), m.inner(chi)),
            SumKind::Slice(s) => (s.pairing(chi), 0.0),
            SumKind::Hull { weights, generators } => {
                let terms = weights.iter().zip(generators).map(|(w, g)| Term::real(w.at(0, 0), g.inner(chi))).collect();
                (terms, 0.0)
            }
        }
    }

    pub(crate) fn value(&self, sol: &ConicSolution) -> Hermitian {
        let mut m = CMatrix::zeros(self.n, self.n);
        for a in 0..self.n {
            for b in 0..self.n {
                let (terms, c) = self.entry(a, b);
                m[(a, b)] = sol.eval_terms(&terms) + c;
            }
        }
        Hermitian::symmetrize(m)
    }
}

fn check_dim(m: &Hermitian, n: usize) -> Result<()> {
    if m.dim() != n {
        return Err(Error::DimensionMismatch { context: "sum set", expected: n, found: m.dim() });
    }
    Ok(())
}

/// `max_{Q ∈ S} ⟨Q, χ⟩`.
pub(crate) fn support_value(
    shape: &SumSetShape,
    layout: &SystemLayout,
    chi: &Hermitian,
    options: &ConicOptions,
) -> Result<(f64, Hermitian)> {
    check_dim(chi, layout.total_dim())?;
    match shape {
        SumSetShape::Singleton { matrix } => return Ok((matrix.inner(chi), matrix.clone())),
        SumSetShape::FiniteHull { generators } => {
            let (best, g) = generators
                .iter()
                .map(|g| (g.inner(chi), g))
                .fold((f64::NEG_INFINITY, None), |acc, (v, g)| if v > acc.0 { (v, Some(g)) } else { acc });
            return g.map(|g| (best, g.clone())).ok_or_else(|| Error::invalid("empty finite hull"));
        }
        _ => {}
    }
    let mut p = ConicProgram::new();
    let model = SumSetModel::add(&mut p, shape, layout, true)?;
    let (terms, c) = model.pairing(chi);
    p.maximize(terms);
    let sol = p.solve(options)?;
    Ok((sol.value + c, model.value(&sol)))
}

/// Index bookkeeping for matrices of the form `arrange(F ⊗ A)`, with `F` on a
/// set of factor systems and `A` on the remaining systems (both in layout order).
#[derive(Clone, Debug)]
pub(crate) struct Split {
    pub(crate) factor: Vec<usize>,
    pub(crate) comp: Vec<usize>,
    pub(crate) factor_dim: usize,
    pub(crate) comp_dim: usize,
}

impl Split {
    pub(crate) fn new(layout: &SystemLayout, factor_systems: &[usize]) -> Self {
        let dims = layout.dims();
        let n = layout.total_dim();
        let mut digits = vec![0; dims.len()];
        let mut factor = Vec::with_capacity(n);
        let mut comp = Vec::with_capacity(n);
        for a in 0..n {
            layout.digits(a, &mut digits);
            let (mut f, mut c) = (0, 0);
            for (k, &d) in dims.iter().enumerate() {
                if factor_systems.contains(&k) {
                    f = f * d + digits[k];
                } else {
                    c = c * d + digits[k];
                }
            }
            factor.push(f);
            comp.push(c);
        }
        let factor_dim = factor_systems.iter().map(|&k| dims[k]).product();
        Self { factor, comp, factor_dim, comp_dim: n / factor_dim }
    }

    pub(crate) fn arrange(&self, f: &Hermitian, a: &Hermitian) -> Hermitian {
        let n = self.factor.len();
        let m = CMatrix::from_fn(n, n, |i, j| {
            f.get(self.factor[i], self.factor[j]) * a.get(self.comp[i], self.comp[j])
        });
        Hermitian::from_raw(m)
    }

    /// `K` with `⟨arrange(F ⊗ A), D⟩ = ⟨A, K⟩`.
    pub(crate) fn onto_comp(&self, f: &Hermitian, d: &Hermitian) -> Hermitian {
        let n = self.factor.len();
        let mut k = CMatrix::zeros(self.comp_dim, self.comp_dim);
        for a in 0..n {
            for b in 0..n {
                let fv = f.get(self.factor[a], self.factor[b]);
                if fv != ZERO {
                    k[(self.comp[b], self.comp[a])] += fv * d.get(b, a);
                }
            }
        }
        Hermitian::symmetrize(k)
    }

    /// `G` with `⟨arrange(F ⊗ A), D⟩ = ⟨F, G⟩`.
    pub(crate) fn onto_factor(&self, a_mat: &Hermitian, d: &Hermitian) -> Hermitian {
        let n = self.factor.len();
        let mut g = CMatrix::zeros(self.factor_dim, self.factor_dim);
        for a in 0..n {
            for b in 0..n {
                let av = a_mat.get(self.comp[a], self.comp[b]);
                if av != ZERO {
                    g[(self.factor[b], self.factor[a])] += av * d.get(b, a);
                }
            }
        }
        Hermitian::symmetrize(g)
    }
}

/// Generator family of a cone: `Φ_m = Σ_{(m, F)} arrange(F ⊗ A)` over one PSD block `A`
/// on the complement of `factor_systems`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredCut {
    pub factor_systems: Vec<usize>,
    pub terms: Vec<(usize, Hermitian)>,
}

impl StructuredCut {
    /// An unrestricted PSD block for element `m`.
    pub fn full(m: usize) -> Self {
        Self { factor_systems: Vec::new(), terms: vec![(m, Hermitian::identity(1))] }
    }

    /// A fixed tuple, scaled by a nonnegative weight.
    pub fn ray(layout: &SystemLayout, elements: &[Hermitian]) -> Self {
        Self {
            factor_systems: (0..layout.len()).collect(),
            terms: elements.iter().cloned().enumerate().collect(),
        }
    }

    /// Elements produced by a concrete block `A`.
    pub(crate) fn elements(&self, layout: &SystemLayout, a: &Hermitian, outcomes: usize) -> Vec<Hermitian> {
        let split = Split::new(layout, &self.factor_systems);
        let n = layout.total_dim();
        let mut out = vec![Hermitian::zeros(n); outcomes];
        for (m, f) in &self.terms {
            out[*m] += &split.arrange(f, a);
        }
        out
    }
}

/// Solution of the restricted tester program.
#[derive(Clone, Debug)]
pub(crate) struct TesterProgramSolution {
    pub(crate) value: f64,
    pub(crate) elements: Vec<Hermitian>,
    /// Multiplier of the sum constraint, in the dual orientation (`χ ⪰ p_m E_m` for full cones).
    pub(crate) chi: Hermitian,
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) sum: Hermitian,
    pub(crate) blocks: Vec<Hermitian>,
    pub(crate) telemetry: Telemetry,
}

/// `maximize Σ_m ⟨Φ_m, costs_m⟩` over the cone generated by `cuts`, with `Σ Φ_m ∈ S`.
pub(crate) fn solve_tester_program(
    costs: &[Hermitian],
    layout: &SystemLayout,
    shape: &SumSetShape,
    cuts: &[StructuredCut],
    options: &ConicOptions,
) -> Result<TesterProgramSolution> {
    let n = layout.total_dim();
    for c in costs {
        check_dim(c, n)?;
    }
    if cuts.is_empty() {
        return Err(Error::invalid("tester program needs at least one cone generator"));
    }
    let mut p = ConicProgram::new();
    let splits: Vec<Split> = cuts.iter().map(|c| Split::new(layout, &c.factor_systems)).collect();
    let blocks: Vec<PsdBlock> = splits.iter().map(|s| p.psd_block(s.comp_dim)).collect();
    let sums: Vec<Hermitian> = cuts
        .iter()
        .zip(&splits)
        .map(|(c, s)| {
            let mut acc = Hermitian::zeros(s.factor_dim);
            for (_, f) in &c.terms {
                acc += f;
            }
            acc
        })
        .collect();
    let model = SumSetModel::add(&mut p, shape, layout, true)?;

    let constant = Hermitian::symmetrize(CMatrix::from_fn(n, n, |a, b| model.entry(a, b).1));
    let has_constant = constant.max_abs() > 0.0;
    let group = p.add_hermitian_eq(
        n,
        |a, b| {
            let mut terms = Vec::new();
            for ((blk, split), fsum) in blocks.iter().zip(&splits).zip(&sums) {
                let fv = fsum.get(split.factor[a], split.factor[b]);
                if fv != ZERO {
                    terms.push(Term::new(blk.at(split.comp[a], split.comp[b]), fv));
                }
            }
            let (q, _) = model.entry(a, b);
            terms.extend(q.into_iter().map(|t| Term::new(t.var, -t.coef)));
            terms
        },
        has_constant.then_some(&constant),
    );

    let mut objective = Vec::new();
    for ((cut, split), blk) in cuts.iter().zip(&splits).zip(&blocks) {
        let mut k = Hermitian::zeros(split.comp_dim);
        for (m, f) in &cut.terms {
            if *m >= costs.len() {
                return Err(Error::IndexOutOfRange { index: *m, len: costs.len() });
            }
            k += &split.onto_comp(f, &costs[*m]);
        }
        objective.extend(MatVar::Psd(*blk).pairing(&k));
    }
    p.maximize(objective);
    let sol = p.solve(options)?;

    let chi = sol.group_multiplier(group);
    let block_values: Vec<Hermitian> = blocks.iter().map(|b| sol.block(*b).clone()).collect();
    let mut elements = vec![Hermitian::zeros(n); costs.len()];
    for ((cut, split), a) in cuts.iter().zip(&splits).zip(&block_values) {
        for (m, f) in &cut.terms {
            elements[*m] += &split.arrange(f, a);
        }
    }
    Ok(TesterProgramSolution {
        value: sol.value,
        elements,
        chi,
        sum: model.value(&sol),
        blocks: block_values,
        telemetry: sol.telemetry,
    })
}

/// `maximize ⟨τ, cost⟩` over combs with `steps` steps on `layout`.
pub(crate) fn maximize_over_combs(
    cost: &Hermitian,
    layout: &SystemLayout,
    options: &ConicOptions,
) -> Result<(f64, Hermitian)> {
    check_dim(cost, layout.total_dim())?;
    let mut p = ConicProgram::new();
    let top = MatVar::new(&mut p, layout.total_dim(), true);
    add_chain(&mut p, layout.dims(), top, ChainEnd::One);
    p.maximize(top.pairing(cost));
    let sol = p.solve(options)?;
    Ok((sol.value, top.value(&sol)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{is_comb, is_dual_comb, random_comb, ChoiProcess, Role};

    fn qubit_pair() -> SystemLayout {
        SystemLayout::new(vec![2, 2]).unwrap()
    }

    #[test]
    fn split_maps_agree_with_arrangement() {
        let layout = SystemLayout::new(vec![2, 3, 2]).unwrap();
        let mut rng = rand::rng();
        let f = crate::hermitian::random_hermitian(4, &mut rng);
        let a = crate::hermitian::random_hermitian(3, &mut rng);
        let d = crate::hermitian::random_hermitian(12, &mut rng);
        let split = Split::new(&layout, &[0, 2]);
        let full = split.arrange(&f, &a);
        let lhs = full.inner(&d);
        assert!((lhs - a.inner(&split.onto_comp(&f, &d))).abs() < 1e-10);
        assert!((lhs - f.inner(&split.onto_factor(&a, &d))).abs() < 1e-10);
    }

    #[test]
    fn helstrom_through_tester_program() {
        // Trivial input wire: state discrimination of |0⟩ vs |+⟩.
        let layout = SystemLayout::new(vec![2, 1]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r0 = Hermitian::basis_projector(2, 0).scale(0.5);
        let rp = Hermitian::projector(&[C64::new(s, 0.0), C64::new(s, 0.0)]).scale(0.5);
        let cuts = vec![StructuredCut::full(0), StructuredCut::full(1)];
        let sol = solve_tester_program(&[r0.clone(), rp.clone()], &layout, &SumSetShape::DualComb, &cuts, &ConicOptions::default())
            .unwrap();
        let expected = 0.5 * (1.0 + s);
        assert!((sol.value - expected).abs() < 1e-7, "{}", sol.value);
        assert!((&sol.chi - &r0).min_eigenvalue() > -1e-7);
        assert!((&sol.chi - &rp).min_eigenvalue() > -1e-7);
        assert!((sol.chi.trace() - expected).abs() < 1e-7);
    }

    #[test]
    fn comb_maximization_pairs_to_one_with_dual_combs() {
        let layout = SystemLayout::new(vec![2, 2, 2, 2]).unwrap();
        let sigma = crate::process::random_dual_comb(&layout, 2, 5).unwrap();
        let (v, tau) = maximize_over_combs(sigma.matrix(), &layout, &ConicOptions::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-7);
        let p = ChoiProcess::new(tau, layout, Role::CombCandidate).unwrap();
        assert!(is_comb(&p, 2, 1e-6).unwrap().0);
    }

    #[test]
    fn support_of_dual_combs_on_a_comb_is_one() {
        let layout = SystemLayout::new(vec![2, 2, 2, 2]).unwrap();
        let tau = random_comb(&layout, 2, 11).unwrap();
        let (v, q) = support_value(&SumSetShape::DualComb, &layout, &tau.matrix().scale(2.5), &ConicOptions::default()).unwrap();
        assert!((v - 2.5).abs() < 1e-7);
        let q = ChoiProcess::new(q, layout, Role::TesterElement).unwrap();
        assert!(is_dual_comb(&q, 2, 1e-6).unwrap());
    }

    #[test]
    fn nonadaptive_support_is_top_eigenvalue_of_input_marginal() {
        let layout = qubit_pair();
        let chi = Hermitian::from_real_diagonal(&[1.0, 0.0, 0.0, 3.0]);
        let (v, _) = support_value(&SumSetShape::Nonadaptive, &layout, &chi, &ConicOptions::default()).unwrap();
        assert!((v - 3.0).abs() < 1e-7);
    }

    #[test]
    fn singleton_sum_set_moves_to_rhs() {
        let layout = qubit_pair();
        let q = Hermitian::identity(4).scale(0.5);
        let e0 = Hermitian::basis_projector(4, 0);
        let e1 = Hermitian::basis_projector(4, 3);
        let cuts = vec![StructuredCut::full(0), StructuredCut::full(1)];
        let sol = solve_tester_program(&[e0, e1], &layout, &SumSetShape::Singleton { matrix: q.clone() }, &cuts, &ConicOptions::default())
            .unwrap();
        assert!((sol.value - 1.0).abs() < 1e-7);
        assert!((&sol.sum - &q).max_abs() < 1e-7);
    }
}
