//! Generalized robustness of a process against a free set and a cone, and its
//! link to restricted discrimination.

use serde::{Deserialize, Serialize};

use crate::conic::{ConicOptions, ConicProgram, Term, Var};
use crate::dual::{solve_dual, DualOptions};
use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, Hermitian, SystemLayout, C64};
use crate::model::{add_chain, support_value, wire_maps, ChainEnd, MatVar, SumSetModel, SumSetShape};
use crate::process::{dual_comb_residual, DiscriminationInstance};
use crate::strategy::{CustomCone, StrategyClass};

/// `Σ_m p_m |m⟩⟨m| ⊗ E_m`.
pub fn build_extended_process(inst: &DiscriminationInstance) -> Hermitian {
    let n = inst.dim();
    let outcomes = inst.num_outcomes();
    let mut out = CMatrix::zeros(outcomes * n, outcomes * n);
    for m in 0..outcomes {
        out.view_mut((m * n, m * n), (n, n)).copy_from(inst.weighted(m).matrix());
    }
    Hermitian::symmetrize(out)
}

/// `M · D* − 1` from the optimal restricted success probability.
pub fn robustness_from_value(inst: &DiscriminationInstance, class: &StrategyClass, options: &DualOptions) -> Result<f64> {
    let value = solve_dual(inst, class, options)?.value;
    Ok(inst.num_outcomes() as f64 * value - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FreeSet {
    /// Convex hull of the listed points.
    Hull { generators: Vec<Hermitian> },
    /// `{I_M ⊗ χ' : D_S(χ') = 1/M}` with `χ'` on `layout`.
    ScaledSupport { outcomes: usize, layout: SystemLayout, sum_set: SumSetShape },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConeSpec {
    Psd,
    /// Matrices whose `blocks` diagonal blocks are PSD; off-diagonal blocks are unconstrained.
    BlockDiagonalPsd { blocks: usize },
    /// Conic hull of the generators.
    Generated { generators: Vec<Hermitian> },
    /// `{Y : ⟨N_k, Y⟩ ≥ 0}` for the listed normals.
    Polyhedral { normals: Vec<Hermitian> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessProblem {
    pub target: Hermitian,
    pub free: FreeSet,
    pub cone: ConeSpec,
}

/// Where the maximizing `φ` of the dual bound is searched.
#[derive(Clone, Debug, PartialEq)]
pub enum DualOracle {
    /// All of `K*`.
    Exact,
    /// The conic hull of the listed elements of `K*`.
    Generators(Vec<Hermitian>),
}

/// A matrix whose entries are affine in program variables.
struct MatrixExpr {
    n: usize,
    terms: Vec<Vec<Term>>,
    constant: CMatrix,
}

impl MatrixExpr {
    fn zero(n: usize) -> Self {
        Self { n, terms: vec![Vec::new(); n * n], constant: CMatrix::zeros(n, n) }
    }

    fn from_var(v: &MatVar) -> Self {
        let n = v.dim();
        let mut e = Self::zero(n);
        for a in 0..n {
            for b in 0..n {
                e.terms[a * n + b].push(Term::real(v.at(a, b), 1.0));
            }
        }
        e
    }

    fn combination(weights: &[Var], mats: &[Hermitian], n: usize) -> Self {
        let mut e = Self::zero(n);
        for (w, g) in weights.iter().zip(mats) {
            for a in 0..n {
                for b in 0..n {
                    let c = g.get(a, b);
                    if c != C64::new(0.0, 0.0) {
                        e.terms[a * n + b].push(Term::new(*w, c));
                    }
                }
            }
        }
        e
    }

    fn entry(&self, a: usize, b: usize) -> &[Term] {
        &self.terms[a * self.n + b]
    }

    /// Terms and constant of `⟨self, k⟩ = Σ self[a][b] k[b][a]`.
    fn pairing(&self, k: &Hermitian) -> (Vec<Term>, f64) {
        let mut out = Vec::new();
        let mut c = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                let kv = k.get(b, a);
                if kv == C64::new(0.0, 0.0) {
                    continue;
                }
                out.extend(self.entry(a, b).iter().map(|t| Term::new(t.var, t.coef * kv)));
                c += (self.constant[(a, b)] * kv).re;
            }
        }
        (out, c)
    }
}

fn scalars(p: &mut ConicProgram, k: usize) -> Vec<Var> {
    (0..k).map(|_| p.psd_block(1).at(0, 0)).collect()
}

fn check_dim(m: &Hermitian, n: usize, context: &'static str) -> Result<()> {
    if m.dim() != n {
        return Err(Error::DimensionMismatch { context, expected: n, found: m.dim() });
    }
    Ok(())
}

impl ConeSpec {
    fn check(&self, n: usize) -> Result<()> {
        match self {
            ConeSpec::Psd => Ok(()),
            ConeSpec::BlockDiagonalPsd { blocks } => {
                if *blocks == 0 || n % blocks != 0 {
                    return Err(Error::invalid(format!("{blocks} diagonal blocks do not divide dimension {n}")));
                }
                Ok(())
            }
            ConeSpec::Generated { generators: g } | ConeSpec::Polyhedral { normals: g } => {
                if g.is_empty() {
                    return Err(Error::invalid("cone needs at least one generator"));
                }
                g.iter().try_for_each(|m| check_dim(m, n, "cone generator"))
            }
        }
    }

    /// Imposes `expr ∈ K`.
    fn impose(&self, p: &mut ConicProgram, expr: &MatrixExpr) {
        let n = expr.n;
        let rhs = Hermitian::symmetrize(-expr.constant.clone());
        match self {
            ConeSpec::Psd => {
                let slack = p.psd_block(n);
                p.add_hermitian_eq(
                    n,
                    |a, b| {
                        let mut t = expr.entry(a, b).to_vec();
                        t.push(Term::real(slack.at(a, b), -1.0));
                        t
                    },
                    Some(&rhs),
                );
            }
            ConeSpec::BlockDiagonalPsd { blocks } => {
                let size = n / blocks;
                for k in 0..*blocks {
                    let slack = p.psd_block(size);
                    let off = k * size;
                    let sub = Hermitian::symmetrize(rhs.matrix().view((off, off), (size, size)).into_owned());
                    p.add_hermitian_eq(
                        size,
                        |a, b| {
                            let mut t = expr.entry(off + a, off + b).to_vec();
                            t.push(Term::real(slack.at(a, b), -1.0));
                            t
                        },
                        Some(&sub),
                    );
                }
            }
            ConeSpec::Generated { generators } => {
                let weights = scalars(p, generators.len());
                let hull = MatrixExpr::combination(&weights, generators, n);
                p.add_hermitian_eq(
                    n,
                    |a, b| {
                        let mut t = expr.entry(a, b).to_vec();
                        t.extend(hull.entry(a, b).iter().map(|x| Term::new(x.var, -x.coef)));
                        t
                    },
                    Some(&rhs),
                );
            }
            ConeSpec::Polyhedral { normals } => {
                for normal in normals {
                    let (mut t, c) = expr.pairing(normal);
                    t.push(Term::real(p.psd_block(1).at(0, 0), -1.0));
                    p.add_real_eq(t, -c);
                }
            }
        }
    }

    /// A variable ranging over `K*`.
    fn dual_variable(&self, p: &mut ConicProgram, n: usize) -> MatrixExpr {
        match self {
            ConeSpec::Psd => MatrixExpr::from_var(&MatVar::Psd(p.psd_block(n))),
            ConeSpec::BlockDiagonalPsd { blocks } => {
                let size = n / blocks;
                let mut e = MatrixExpr::zero(n);
                for k in 0..*blocks {
                    let block = p.psd_block(size);
                    for a in 0..size {
                        for b in 0..size {
                            e.terms[(k * size + a) * n + k * size + b].push(Term::real(block.at(a, b), 1.0));
                        }
                    }
                }
                e
            }
            ConeSpec::Generated { generators } => {
                let e = MatrixExpr::from_var(&MatVar::Free(p.free_hermitian(n)));
                for g in generators {
                    let (mut t, _) = e.pairing(g);
                    t.push(Term::real(p.psd_block(1).at(0, 0), -1.0));
                    p.add_real_eq(t, 0.0);
                }
                e
            }
            ConeSpec::Polyhedral { normals } => {
                let weights = scalars(p, normals.len());
                MatrixExpr::combination(&weights, normals, n)
            }
        }
    }

    fn contains_interior(&self, z: &Hermitian) -> Result<bool> {
        Ok(match self {
            ConeSpec::Psd => z.min_eigenvalue() > 1e-9,
            ConeSpec::BlockDiagonalPsd { blocks } => diagonal_blocks(z, *blocks).iter().all(|b| b.min_eigenvalue() > 1e-9),
            ConeSpec::Polyhedral { normals } => normals.iter().all(|k| k.inner(z) > 1e-12),
            ConeSpec::Generated { generators } => generated_interior(generators, z)?,
        })
    }

    fn dual_contains(&self, phi: &Hermitian, tol: f64) -> bool {
        match self {
            ConeSpec::Psd => phi.min_eigenvalue() >= -tol,
            ConeSpec::BlockDiagonalPsd { blocks } => {
                let size = phi.dim() / blocks;
                let off_diagonal = (0..phi.dim())
                    .flat_map(|a| (0..phi.dim()).map(move |b| (a, b)))
                    .filter(|(a, b)| a / size != b / size)
                    .all(|(a, b)| phi.get(a, b).norm() <= tol);
                off_diagonal && diagonal_blocks(phi, *blocks).iter().all(|b| b.min_eigenvalue() >= -tol)
            }
            ConeSpec::Generated { generators } => generators.iter().all(|g| g.inner(phi) >= -tol),
            ConeSpec::Polyhedral { .. } => true,
        }
    }
}

fn diagonal_blocks(z: &Hermitian, blocks: usize) -> Vec<Hermitian> {
    let size = z.dim() / blocks;
    (0..blocks)
        .map(|k| Hermitian::symmetrize(z.matrix().view((k * size, k * size), (size, size)).into_owned()))
        .collect()
}

/// `z` is interior to the conic hull iff the generators span the space and
/// `z` is a combination with strictly positive weights.
fn generated_interior(generators: &[Hermitian], z: &Hermitian) -> Result<bool> {
    let n = z.dim();
    let mut coords = nalgebra::DMatrix::<f64>::zeros(2 * n * n, generators.len());
    for (k, g) in generators.iter().enumerate() {
        for (i, v) in g.matrix().iter().enumerate() {
            coords[(2 * i, k)] = v.re;
            coords[(2 * i + 1, k)] = v.im;
        }
    }
    let singular = coords.svd(false, false).singular_values;
    let scale = singular.iter().copied().fold(1.0, f64::max);
    if singular.iter().filter(|&&s| s > 1e-9 * scale).count() < n * n {
        return Ok(false);
    }
    let mut p = ConicProgram::new();
    let weights = scalars(&mut p, generators.len());
    let margin = p.free_scalar();
    for w in &weights {
        let slack = p.psd_block(1).at(0, 0);
        p.add_real_eq(vec![Term::real(*w, 1.0), Term::real(margin.var(), -1.0), Term::real(slack, -1.0)], 0.0);
    }
    let hull = MatrixExpr::combination(&weights, generators, n);
    p.add_hermitian_eq(n, |a, b| hull.entry(a, b).to_vec(), Some(z));
    let cap = p.psd_block(1).at(0, 0);
    p.add_real_eq(vec![Term::real(margin.var(), 1.0), Term::real(cap, 1.0)], 1.0);
    p.maximize(vec![Term::real(margin.var(), 1.0)]);
    Ok(p.solve(&ConicOptions::with_tol(1e-9)).map(|s| s.value > 1e-9).unwrap_or(false))
}

/// Imposes `D_S(χ) ≤ s` for `χ` on `layout`.
fn bound_support(p: &mut ConicProgram, shape: &SumSetShape, layout: &SystemLayout, chi: &MatVar, s: Var) -> Result<()> {
    let n = layout.total_dim();
    let chi_expr = MatrixExpr::from_var(chi);
    match shape {
        SumSetShape::DualComb => {
            let upper = MatVar::Free(p.free_hermitian(n));
            add_chain(p, layout.dims(), upper, ChainEnd::Scale(s));
            let slack = p.psd_block(n);
            p.add_hermitian_eq(
                n,
                |a, b| vec![Term::real(upper.at(a, b), 1.0), Term::real(chi.at(a, b), -1.0), Term::real(slack.at(a, b), -1.0)],
                None,
            );
        }
        SumSetShape::Singleton { matrix } => {
            check_dim(matrix, n, "sum set")?;
            let (mut t, _) = chi_expr.pairing(matrix);
            t.push(Term::real(p.psd_block(1).at(0, 0), 1.0));
            t.push(Term::real(s, -1.0));
            p.add_real_eq(t, 0.0);
        }
        SumSetShape::FiniteHull { generators } => {
            for g in generators {
                check_dim(g, n, "sum set")?;
                let (mut t, _) = chi_expr.pairing(g);
                t.push(Term::real(p.psd_block(1).at(0, 0), 1.0));
                t.push(Term::real(s, -1.0));
                p.add_real_eq(t, 0.0);
            }
        }
        SumSetShape::Nonadaptive => {
            let (wmap, vmap, _, nv) = wire_maps(layout);
            let slack = p.psd_block(nv);
            p.add_hermitian_eq(
                nv,
                |v, w| {
                    let mut t = vec![Term::real(slack.at(v, w), -1.0)];
                    if v == w {
                        t.push(Term::real(s, 1.0));
                    }
                    for a in (0..n).filter(|&a| vmap[a] == v) {
                        for b in (0..n).filter(|&b| vmap[b] == w && wmap[b] == wmap[a]) {
                            t.push(Term::real(chi.at(a, b), -1.0));
                        }
                    }
                    t
                },
                None,
            );
        }
        SumSetShape::AffineSlice { constraints } => {
            let ys: Vec<Var> = constraints.iter().map(|_| p.free_scalar().var()).collect();
            let mut t: Vec<Term> = ys.iter().zip(constraints).map(|(y, (_, c))| Term::real(*y, *c)).collect();
            t.push(Term::real(s, -1.0));
            p.add_real_eq(t, 0.0);
            let mats: Vec<Hermitian> = constraints.iter().map(|(l, _)| l.clone()).collect();
            mats.iter().try_for_each(|l| check_dim(l, n, "sum set"))?;
            let combo = MatrixExpr::combination(&ys, &mats, n);
            let slack = p.psd_block(n);
            p.add_hermitian_eq(
                n,
                |a, b| {
                    let mut t = combo.entry(a, b).to_vec();
                    t.push(Term::real(chi.at(a, b), -1.0));
                    t.push(Term::real(slack.at(a, b), -1.0));
                    t
                },
                None,
            );
        }
    }
    Ok(())
}

impl RobustnessProblem {
    /// The descriptors under which robustness of `Σ p_m |m⟩⟨m| ⊗ E_m` equals
    /// `M·P* − 1` for the class.
    pub fn for_discrimination(inst: &DiscriminationInstance, class: &StrategyClass) -> Result<Self> {
        let outcomes = inst.num_outcomes();
        let layout = inst.layout().clone();
        let sum_set = class.sum_set(&layout)?;
        let cone = match class {
            StrategyClass::Custom(c) => match &c.cone {
                CustomCone::Psd => ConeSpec::BlockDiagonalPsd { blocks: outcomes },
                CustomCone::Generated(tuples) => ConeSpec::Polyhedral {
                    normals: tuples
                        .iter()
                        .map(|t| {
                            let n = inst.dim();
                            let mut m = CMatrix::zeros(outcomes * n, outcomes * n);
                            for (k, phi) in t.iter().enumerate() {
                                m.view_mut((k * n, k * n), (n, n)).copy_from(phi.matrix());
                            }
                            Hermitian::symmetrize(m)
                        })
                        .collect(),
                },
                CustomCone::Predicate(_) => {
                    return Err(Error::Unsupported(format!("class {} has no finite cone description", c.name)))
                }
            },
            c if c.has_psd_cone() => ConeSpec::BlockDiagonalPsd { blocks: outcomes },
            c => {
                return Err(Error::Unsupported(format!(
                    "class {} has no finite cone description; use robustness_from_value",
                    c.name()
                )))
            }
        };
        Ok(Self { target: build_extended_process(inst), free: FreeSet::ScaledSupport { outcomes, layout, sum_set }, cone })
    }

    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        self.cone.check(n)?;
        match &self.free {
            FreeSet::Hull { generators } => {
                if generators.is_empty() {
                    return Err(Error::invalid("free set needs at least one point"));
                }
                generators.iter().try_for_each(|g| check_dim(g, n, "free set point"))?;
            }
            FreeSet::ScaledSupport { outcomes, layout, .. } => {
                if outcomes * layout.total_dim() != n {
                    return Err(Error::DimensionMismatch {
                        context: "scaled-support free set",
                        expected: n,
                        found: outcomes * layout.total_dim(),
                    });
                }
            }
        }
        Ok(())
    }

    /// A point of `F` that must lie in the interior of `K`.
    pub fn interior_witness(&self) -> Result<Hermitian> {
        match &self.free {
            FreeSet::Hull { generators } => {
                let sum = generators.iter().fold(Hermitian::zeros(self.dim()), |acc, g| &acc + g);
                Ok(sum.scale(1.0 / generators.len() as f64))
            }
            FreeSet::ScaledSupport { outcomes, layout, sum_set } => {
                let n = layout.total_dim();
                let (d, _) = support_value(sum_set, layout, &Hermitian::identity(n), &ConicOptions::with_tol(1e-10))?;
                if d <= 0.0 {
                    return Err(Error::invalid("sum set has nonpositive support on the identity"));
                }
                Ok(Hermitian::identity(outcomes * n).scale(1.0 / (*outcomes as f64 * d)))
            }
        }
    }

    fn check_witness(&self) -> Result<()> {
        self.validate()?;
        let z = self.interior_witness()?;
        if !self.cone.contains_interior(&z)? {
            return Err(Error::invalid("free set does not meet the interior of the cone"));
        }
        Ok(())
    }
}

/// `min {λ ≥ 0 : (1+λ)Z − E ∈ K, Z ∈ F}` as one conic program.
pub fn robustness_direct(problem: &RobustnessProblem, tol: f64) -> Result<f64> {
    problem.check_witness()?;
    let n = problem.dim();
    let mut p = ConicProgram::new();
    let (mut expr, objective, offset) = match &problem.free {
        FreeSet::Hull { generators } => {
            let weights = scalars(&mut p, generators.len());
            let expr = MatrixExpr::combination(&weights, generators, n);
            let total: Vec<Term> = weights.iter().map(|w| Term::real(*w, 1.0)).collect();
            let mut nonneg = total.clone();
            nonneg.push(Term::real(p.psd_block(1).at(0, 0), -1.0));
            p.add_real_eq(nonneg, 1.0);
            (expr, total, -1.0)
        }
        FreeSet::ScaledSupport { outcomes, layout, sum_set } => {
            let inner = layout.total_dim();
            let chi = MatVar::Free(p.free_hermitian(inner));
            let s = p.free_scalar().var();
            bound_support(&mut p, sum_set, layout, &chi, s)?;
            let mut expr = MatrixExpr::zero(n);
            for m in 0..*outcomes {
                for a in 0..inner {
                    for b in 0..inner {
                        expr.terms[(m * inner + a) * n + m * inner + b].push(Term::real(chi.at(a, b), 1.0));
                    }
                }
            }
            (expr, vec![Term::real(s, *outcomes as f64)], -1.0)
        }
    };
    expr.constant = -problem.target.matrix().clone();
    problem.cone.impose(&mut p, &expr);
    p.minimize(objective);
    let sol = p.solve(&ConicOptions::with_tol((tol * 1e-2).max(1e-11)))?;
    Ok(sol.value + offset)
}

/// `max {⟨φ, E⟩ : φ ∈ K*, ⟨φ, Z⟩ ≤ 1 ∀Z ∈ F}` with `φ` drawn from the oracle.
/// Any feasible `φ` bounds `1 + R` from below.
pub fn robustness_dual_bound(problem: &RobustnessProblem, oracle: &DualOracle) -> Result<f64> {
    problem.check_witness()?;
    let n = problem.dim();
    let mut p = ConicProgram::new();
    let phi = match oracle {
        DualOracle::Exact => problem.cone.dual_variable(&mut p, n),
        DualOracle::Generators(gens) => {
            if gens.is_empty() {
                return Err(Error::invalid("dual oracle supplied no generators"));
            }
            for (k, g) in gens.iter().enumerate() {
                check_dim(g, n, "dual generator")?;
                if !problem.cone.dual_contains(g, 1e-9) {
                    return Err(Error::invalid(format!("dual generator {k} is not in the dual cone")));
                }
            }
            let weights = scalars(&mut p, gens.len());
            MatrixExpr::combination(&weights, gens, n)
        }
    };
    match &problem.free {
        FreeSet::Hull { generators } => {
            for z in generators {
                let (mut t, _) = phi.pairing(z);
                t.push(Term::real(p.psd_block(1).at(0, 0), 1.0));
                p.add_real_eq(t, 1.0);
            }
        }
        FreeSet::ScaledSupport { outcomes, layout, sum_set } => {
            // Bounded over the unbounded slice only when Tr_A φ = M·Q with Q ∈ S.
            let inner = layout.total_dim();
            let q = SumSetModel::add(&mut p, sum_set, layout, true)?;
            let scale = *outcomes as f64;
            let mut rhs = CMatrix::zeros(inner, inner);
            let mut rows = Vec::with_capacity(inner * inner);
            for a in 0..inner {
                for b in 0..inner {
                    let (qt, qc) = q.entry(a, b);
                    rhs[(a, b)] = qc * scale;
                    let mut t: Vec<Term> = qt.iter().map(|x| Term::new(x.var, -x.coef * scale)).collect();
                    for m in 0..*outcomes {
                        t.extend_from_slice(phi.entry(m * inner + a, m * inner + b));
                    }
                    rows.push(t);
                }
            }
            p.add_hermitian_eq(inner, |a, b| rows[a * inner + b].clone(), Some(&Hermitian::symmetrize(rhs)));
        }
    }
    let (objective, c) = phi.pairing(&problem.target);
    p.maximize(objective);
    Ok(p.solve(&ConicOptions::with_tol(1e-10))?.value + c)
}

/// `max_{Z ∈ F} ⟨φ, Z⟩`, or `None` when unbounded.
fn free_support(problem: &RobustnessProblem, phi: &Hermitian) -> Result<Option<f64>> {
    match &problem.free {
        FreeSet::Hull { generators } => Ok(generators.iter().map(|z| phi.inner(z)).reduce(f64::max)),
        FreeSet::ScaledSupport { outcomes, layout, sum_set } => {
            let inner = layout.total_dim();
            let traced = diagonal_blocks(phi, *outcomes).iter().fold(Hermitian::zeros(inner), |acc, b| &acc + b);
            let scale = match sum_set {
                SumSetShape::DualComb => {
                    let outputs: usize = layout.dims().iter().step_by(2).product();
                    let t = traced.trace() / outputs as f64;
                    let steps = layout.dims().len() / 2;
                    let fits = t > 0.0
                        && dual_comb_residual(&traced.scale(1.0 / t), layout, steps)? <= 1e-8
                        && traced.min_eigenvalue() >= -1e-9;
                    fits.then_some(t)
                }
                SumSetShape::Singleton { matrix } => {
                    let t = matrix.inner(&traced) / matrix.inner(matrix);
                    ((&traced - &matrix.scale(t)).max_abs() <= 1e-9 * (1.0 + traced.max_abs())).then_some(t)
                }
                _ => {
                    return Err(Error::Unsupported("advantage ratio over this sum set".into()));
                }
            };
            Ok(scale.map(|t| t / *outcomes as f64))
        }
    }
}

/// `sup_φ ⟨φ, E⟩ / max_{Z ∈ F} ⟨φ, Z⟩` over the family, skipping members with
/// nonpositive or unbounded denominator.
pub fn advantage_ratio(problem: &RobustnessProblem, family: &[Hermitian]) -> Result<f64> {
    problem.validate()?;
    let mut best = f64::NEG_INFINITY;
    for (k, phi) in family.iter().enumerate() {
        check_dim(phi, problem.dim(), "advantage family")?;
        if !problem.cone.dual_contains(phi, 1e-9) {
            return Err(Error::invalid(format!("family member {k} is not in the dual cone")));
        }
        match free_support(problem, phi)? {
            Some(d) if d > 1e-12 => best = best.max(phi.inner(&problem.target) / d),
            _ => {}
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::invalid("no family member has a positive bounded denominator"));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{random_pure_state, C64};
    use crate::instances::two_use_instance;
    use crate::process::{random_comb, ChoiProcess, Role};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_problem() -> RobustnessProblem {
        RobustnessProblem {
            target: Hermitian::basis_projector(2, 0),
            free: FreeSet::Hull { generators: vec![Hermitian::identity(2).scale(0.5)] },
            cone: ConeSpec::Psd,
        }
    }

    #[test]
    fn extended_process_blocks() {
        let layout = SystemLayout::new(vec![2, 1]).unwrap();
        let rho = Hermitian::basis_projector(2, 1);
        let c = ChoiProcess::new(rho.clone(), layout, Role::CombCandidate).unwrap();
        let inst = DiscriminationInstance::new(vec![c.clone(), c], vec![0.5, 0.5], 1).unwrap();
        let ex = build_extended_process(&inst);
        let expected = Hermitian::identity(2).kron(&rho).scale(0.5);
        assert!((&ex - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn example_extended_process_is_block_diagonal() {
        let inst = two_use_instance().unwrap();
        let ex = build_extended_process(&inst);
        assert_eq!(ex.dim(), 48);
        for (m, block) in diagonal_blocks(&ex, 3).iter().enumerate() {
            assert!((block - &inst.combs()[m].matrix().scale(1.0 / 3.0)).max_abs() < 1e-15);
        }
        assert!(ex.get(0, 16).norm() == 0.0 && ex.get(20, 40).norm() == 0.0);
        assert!((ex.trace() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_prior_gives_zero_block() {
        let layout = SystemLayout::new(vec![2, 1]).unwrap();
        let c = |k| ChoiProcess::new(Hermitian::basis_projector(2, k), layout.clone(), Role::CombCandidate).unwrap();
        let inst = DiscriminationInstance::new(vec![c(0), c(1)], vec![1.0, 0.0], 1).unwrap();
        let ex = build_extended_process(&inst);
        assert!(diagonal_blocks(&ex, 2)[1].max_abs() == 0.0);
    }

    #[test]
    fn qubit_robustness_is_one() {
        let p = qubit_problem();
        assert!((robustness_direct(&p, 1e-8).unwrap() - 1.0).abs() < 1e-7);
        assert!((robustness_dual_bound(&p, &DualOracle::Exact).unwrap() - 2.0).abs() < 1e-7);
        let family: Vec<Hermitian> = (0..2).map(|k| Hermitian::basis_projector(2, k)).collect();
        assert!((advantage_ratio(&p, &family).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn free_target_has_zero_robustness() {
        let mut p = qubit_problem();
        p.target = Hermitian::identity(2).scale(0.5);
        assert!(robustness_direct(&p, 1e-8).unwrap().abs() < 1e-7);
        assert!((robustness_dual_bound(&p, &DualOracle::Exact).unwrap() - 1.0).abs() < 1e-7);
        let family = vec![Hermitian::basis_projector(2, 0), Hermitian::identity(2)];
        assert!((advantage_ratio(&p, &family).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_interior_point_is_rejected() {
        let mut p = qubit_problem();
        p.free = FreeSet::Hull { generators: vec![Hermitian::basis_projector(2, 1)] };
        assert!(robustness_direct(&p, 1e-8).is_err());
    }

    #[test]
    fn sampled_oracle_stays_below() {
        let p = qubit_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gens: Vec<Hermitian> = (0..5).map(|_| Hermitian::projector(&random_pure_state(2, &mut rng))).collect();
        let v = robustness_dual_bound(&p, &DualOracle::Generators(gens)).unwrap();
        assert!(v <= 2.0 + 1e-9 && v >= 1.0 - 1e-9);
    }

    #[test]
    fn identical_combs_have_zero_robustness() {
        let layout = SystemLayout::new(vec![2, 2]).unwrap();
        let c = random_comb(&layout, 1, 4).unwrap();
        let inst = DiscriminationInstance::new(vec![c.clone(), c], vec![0.5, 0.5], 1).unwrap();
        let r = robustness_from_value(&inst, &StrategyClass::Global, &DualOptions::default()).unwrap();
        assert!(r.abs() < 1e-6);
        let p = RobustnessProblem::for_discrimination(&inst, &StrategyClass::Global).unwrap();
        assert!(robustness_direct(&p, 1e-8).unwrap().abs() < 1e-5);
    }

    #[test]
    fn example_instance_global_robustness_is_two() {
        let inst = two_use_instance().unwrap();
        let p = RobustnessProblem::for_discrimination(&inst, &StrategyClass::Global).unwrap();
        let r = robustness_direct(&p, 1e-8).unwrap();
        assert!((r - 2.0).abs() < 1e-4, "{r}");
    }

    #[test]
    fn scaled_support_dual_matches_direct() {
        let layout = SystemLayout::new(vec![2, 2]).unwrap();
        let combs = (0..2).map(|k| random_comb(&layout, 1, 20 + k).unwrap()).collect();
        let inst = DiscriminationInstance::new(combs, vec![0.4, 0.6], 1).unwrap();
        let p = RobustnessProblem::for_discrimination(&inst, &StrategyClass::Global).unwrap();
        let direct = robustness_direct(&p, 1e-8).unwrap();
        let dual = robustness_dual_bound(&p, &DualOracle::Exact).unwrap();
        assert!((1.0 + direct - dual).abs() < 1e-6, "{direct} {dual}");
        let fixed = StrategyClass::FixedInput { state: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)] };
        let p = RobustnessProblem::for_discrimination(&inst, &fixed).unwrap();
        let from_value = robustness_from_value(&inst, &fixed, &DualOptions::default()).unwrap();
        assert!((robustness_direct(&p, 1e-8).unwrap() - from_value).abs() < 1e-5);
    }

    #[test]
    fn sequential_class_has_no_finite_cone() {
        let inst = two_use_instance().unwrap();
        assert!(RobustnessProblem::for_discrimination(&inst, &StrategyClass::SequentialTwoStep).is_err());
    }
}
