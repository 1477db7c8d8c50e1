//! Complex Hermitian semidefinite programs and a primal-dual interior-point solver.
//!
//! Programs are stated through [`ConicProgram`]: PSD matrix blocks, free
//! Hermitian matrices and free real scalars, linked by real affine equalities.
//! The standard form solved internally is
//!
//! ```text
//! minimize   ⟨C, X⟩ + c·u
//! subject to ⟨A_i, X⟩ + (F u)_i = b_i,   X ⪰ 0 (block diagonal),  u free
//! ```
//!
//! with dual `maximize b·y  s.t.  C − Σ y_i A_i = Z ⪰ 0,  Fᵀ y = c`.
//! Search directions are HKM with a Mehrotra predictor-corrector step.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, Hermitian, C64, ONE, ZERO};

/// A scalar coordinate of a program variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    /// Entry `(r, c)` of a PSD block.
    Psd { block: usize, r: usize, c: usize },
    /// Entry `(r, c)` of a free Hermitian matrix.
    Herm { id: usize, r: usize, c: usize },
    /// A free real scalar.
    Scalar(usize),
}

/// `coef · var`; constraints and objectives use the real part of a sum of terms.
#[derive(Clone, Copy, Debug)]
pub struct Term {
    pub var: Var,
    pub coef: C64,
}

impl Term {
    pub fn new(var: Var, coef: C64) -> Self {
        Self { var, coef }
    }

    pub fn real(var: Var, coef: f64) -> Self {
        Self { var, coef: C64::new(coef, 0.0) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PsdBlock {
    index: usize,
    dim: usize,
}

impl PsdBlock {
    pub fn at(&self, r: usize, c: usize) -> Var {
        Var::Psd { block: self.index, r, c }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FreeHermitian {
    index: usize,
    dim: usize,
}

impl FreeHermitian {
    pub fn at(&self, r: usize, c: usize) -> Var {
        Var::Herm { id: self.index, r, c }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FreeScalar(usize);

impl FreeScalar {
    pub fn var(&self) -> Var {
        Var::Scalar(self.0)
    }
}

/// Handle to a family of rows imposing a Hermitian matrix equality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupId(usize);

/// Handle to a single real equality row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowId(usize);

#[derive(Clone, Debug)]
struct Row {
    terms: Vec<Term>,
    rhs: f64,
}

#[derive(Clone, Debug)]
struct Group {
    dim: usize,
    /// `(row, a, b, v)`: the row reads `Re(v · Q[a][b]) = rhs`.
    rows: Vec<(usize, usize, usize, C64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sense {
    Minimize,
    Maximize,
}

/// Builder for a Hermitian semidefinite program.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    blocks: Vec<usize>,
    herms: Vec<(usize, usize)>,
    scalars: usize,
    rows: Vec<Row>,
    groups: Vec<Group>,
    objective: Vec<Term>,
    sense: Sense,
}

impl Default for ConicProgram {
    fn default() -> Self {
        Self::new()
    }
}

/// Engine settings.
#[derive(Clone, Copy, Debug)]
pub struct ConicOptions {
    /// Target for relative gap and relative infeasibilities.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for ConicOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iterations: 120 }
    }
}

impl ConicOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Convergence telemetry of a solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Telemetry {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    /// Worst violation over all rows, including rows removed as redundant.
    pub full_residual: f64,
    pub dropped_rows: usize,
    /// False when the solver stopped short of `tol` but within `1e3·tol`.
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    /// Optimal objective in the direction requested by the program.
    pub value: f64,
    /// Dual objective in the same direction.
    pub dual_value: f64,
    blocks: Vec<Hermitian>,
    slacks: Vec<Hermitian>,
    free: Vec<f64>,
    multipliers: Vec<f64>,
    herms: Vec<(usize, usize)>,
    groups: Vec<Group>,
    sense: Sense,
    pub telemetry: Telemetry,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self {
            blocks: Vec::new(),
            herms: Vec::new(),
            scalars: 0,
            rows: Vec::new(),
            groups: Vec::new(),
            objective: Vec::new(),
            sense: Sense::Minimize,
        }
    }

    pub fn psd_block(&mut self, dim: usize) -> PsdBlock {
        assert!(dim > 0, "block dimension must be positive");
        self.blocks.push(dim);
        PsdBlock { index: self.blocks.len() - 1, dim }
    }

    pub fn free_hermitian(&mut self, dim: usize) -> FreeHermitian {
        assert!(dim > 0, "matrix dimension must be positive");
        let offset = self.herms.iter().map(|&(_, d)| d * d).sum();
        self.herms.push((offset, dim));
        FreeHermitian { index: self.herms.len() - 1, dim }
    }

    pub fn free_scalar(&mut self) -> FreeScalar {
        self.scalars += 1;
        FreeScalar(self.scalars - 1)
    }

    fn free_count(&self) -> usize {
        self.herms.iter().map(|&(_, d)| d * d).sum::<usize>() + self.scalars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// `Re(Σ terms) = rhs`.
    pub fn add_real_eq(&mut self, terms: Vec<Term>, rhs: f64) -> RowId {
        self.rows.push(Row { terms, rhs });
        RowId(self.rows.len() - 1)
    }

    /// Imposes `Q = rhs` for the Hermitian expression `Q[a][b] = entry(a, b)`.
    /// Only entries with `a ≤ b` are queried.
    pub fn add_hermitian_eq(
        &mut self,
        dim: usize,
        mut entry: impl FnMut(usize, usize) -> Vec<Term>,
        rhs: Option<&Hermitian>,
    ) -> GroupId {
        let mut group = Group { dim, rows: Vec::new() };
        for a in 0..dim {
            for b in a..dim {
                let terms = entry(a, b);
                let target = rhs.map_or(ZERO, |r| r.get(a, b));
                let row = self.add_real_eq(terms.clone(), target.re);
                group.rows.push((row.0, a, b, ONE));
                if a != b {
                    let minus_i = C64::new(0.0, -1.0);
                    let rotated = terms.iter().map(|t| Term::new(t.var, t.coef * minus_i)).collect();
                    let row = self.add_real_eq(rotated, target.im);
                    group.rows.push((row.0, a, b, minus_i));
                }
            }
        }
        self.groups.push(group);
        GroupId(self.groups.len() - 1)
    }

    pub fn minimize(&mut self, terms: Vec<Term>) {
        self.objective = terms;
        self.sense = Sense::Minimize;
    }

    pub fn maximize(&mut self, terms: Vec<Term>) {
        self.objective = terms;
        self.sense = Sense::Maximize;
    }

    pub fn solve(&self, options: &ConicOptions) -> Result<ConicSolution> {
        let standard = StandardForm::compile(self)?;
        let raw = standard.solve(options)?;
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        Ok(ConicSolution {
            value: sign * raw.primal_objective,
            dual_value: sign * raw.dual_objective,
            blocks: raw.x.into_iter().map(Hermitian::symmetrize).collect(),
            slacks: raw.z.into_iter().map(Hermitian::symmetrize).collect(),
            free: raw.u,
            multipliers: raw.y,
            herms: self.herms.clone(),
            groups: self.groups.clone(),
            sense: self.sense,
            telemetry: raw.telemetry,
        })
    }
}

impl ConicSolution {
    pub fn block(&self, b: PsdBlock) -> &Hermitian {
        &self.blocks[b.index]
    }

    /// Dual slack `Z` paired with a PSD block.
    pub fn slack(&self, b: PsdBlock) -> &Hermitian {
        &self.slacks[b.index]
    }

    pub fn hermitian(&self, h: FreeHermitian) -> Hermitian {
        let (offset, dim) = self.herms[h.index];
        let mut m = CMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = free_herm_value(&self.free[offset..offset + dim * dim], dim, r, c);
            }
        }
        Hermitian::symmetrize(m)
    }

    /// Value of a single coordinate.
    pub fn var_value(&self, var: Var) -> C64 {
        match var {
            Var::Psd { block, r, c } => self.blocks[block].get(r, c),
            Var::Herm { id, r, c } => {
                let (offset, dim) = self.herms[id];
                free_herm_value(&self.free[offset..offset + dim * dim], dim, r, c)
            }
            Var::Scalar(s) => {
                let offset: usize = self.herms.iter().map(|&(_, d)| d * d).sum();
                C64::new(self.free[offset + s], 0.0)
            }
        }
    }

    /// `Σ coef·value` over the terms (complex, before taking real parts).
    pub fn eval_terms(&self, terms: &[Term]) -> C64 {
        terms.iter().map(|t| t.coef * self.var_value(t.var)).sum()
    }

    pub fn scalar(&self, s: FreeScalar) -> f64 {
        let offset: usize = self.herms.iter().map(|&(_, d)| d * d).sum();
        self.free[offset + s.0]
    }

    /// Multiplier of a real row in the Lagrangian `f − Σ y_i (row_i − b_i)`
    /// written for the requested objective direction.
    pub fn row_multiplier(&self, row: RowId) -> f64 {
        self.direction_sign() * self.multipliers[row.0]
    }

    /// Matrix `Y` with `Σ_i y_i row_i = ⟨Y, Q⟩` for a Hermitian equality group.
    pub fn group_multiplier(&self, group: GroupId) -> Hermitian {
        let g = &self.groups[group.0];
        let mut m = CMatrix::zeros(g.dim, g.dim);
        for &(row, a, b, v) in &g.rows {
            let y = self.direction_sign() * self.multipliers[row];
            m[(b, a)] += v * (0.5 * y);
            m[(a, b)] += v.conj() * (0.5 * y);
        }
        Hermitian::symmetrize(m)
    }

    fn direction_sign(&self) -> f64 {
        match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

/// Value of entry `(r, c)` of a free Hermitian stored in real coordinates:
/// diagonal entries first, then `(re, im)` pairs of the strict upper triangle.
fn free_herm_value(coords: &[f64], dim: usize, r: usize, c: usize) -> C64 {
    if r == c {
        return C64::new(coords[r], 0.0);
    }
    let (a, b, conj) = if r < c { (r, c, false) } else { (c, r, true) };
    let k = dim + 2 * upper_pair_index(dim, a, b);
    let z = C64::new(coords[k], coords[k + 1]);
    if conj {
        z.conj()
    } else {
        z
    }
}

fn upper_pair_index(dim: usize, a: usize, b: usize) -> usize {
    // Pairs (a, b), a < b, enumerated row by row.
    a * dim - a * (a + 1) / 2 + (b - a - 1)
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    p: usize,
    q: usize,
    v: C64,
}

/// One constraint row in standard form: sparse Hermitian pieces per block plus
/// a sparse free-variable part. Entry `(p, q, v)` means `A[p][q] = v`.
#[derive(Clone, Debug, Default)]
struct SparseRow {
    blocks: Vec<(usize, Vec<Entry>)>,
    free: Vec<(usize, f64)>,
}

struct StandardForm {
    dims: Vec<usize>,
    nfree: usize,
    rows: Vec<SparseRow>,
    b: Vec<f64>,
    c_blocks: Vec<CMatrix>,
    c_free: Vec<f64>,
    /// Original row index of each kept row and its scale factor.
    kept: Vec<(usize, f64)>,
    total_rows: usize,
    /// Unscaled rows, for the final residual over every original equality.
    all_rows: Vec<SparseRow>,
    all_b: Vec<f64>,
}

struct RawSolution {
    x: Vec<CMatrix>,
    z: Vec<CMatrix>,
    u: Vec<f64>,
    y: Vec<f64>,
    primal_objective: f64,
    dual_objective: f64,
    telemetry: Telemetry,
}

/// Accumulates `Re(Σ coef·var)` into block and free coefficient maps.
#[derive(Default)]
struct Accumulator {
    blocks: HashMap<(usize, usize, usize), C64>,
    free: HashMap<usize, f64>,
}

impl Accumulator {
    fn add(&mut self, term: &Term, herms: &[(usize, usize)], scalar_offset: usize) {
        let coef = term.coef;
        match term.var {
            Var::Psd { block, r, c } => {
                // Re(coef·X[r][c]) = Tr(A X) with A[c][r] += coef/2, A[r][c] += conj(coef)/2.
                *self.blocks.entry((block, c, r)).or_insert(ZERO) += coef * 0.5;
                *self.blocks.entry((block, r, c)).or_insert(ZERO) += coef.conj() * 0.5;
            }
            Var::Herm { id, r, c } => {
                let (offset, dim) = herms[id];
                if r == c {
                    *self.free.entry(offset + r).or_insert(0.0) += coef.re;
                } else {
                    let (a, b) = if r < c { (r, c) } else { (c, r) };
                    let k = offset + dim + 2 * upper_pair_index(dim, a, b);
                    // H[a][b] = x + i y, H[b][a] = x − i y.
                    let sign = if r < c { 1.0 } else { -1.0 };
                    *self.free.entry(k).or_insert(0.0) += coef.re;
                    *self.free.entry(k + 1).or_insert(0.0) -= sign * coef.im;
                }
            }
            Var::Scalar(s) => {
                *self.free.entry(scalar_offset + s).or_insert(0.0) += coef.re;
            }
        }
    }

    fn into_row(self) -> SparseRow {
        let mut by_block: HashMap<usize, Vec<Entry>> = HashMap::new();
        for ((block, p, q), v) in self.blocks {
            if v.norm() > 0.0 {
                by_block.entry(block).or_default().push(Entry { p, q, v });
            }
        }
        let mut blocks: Vec<(usize, Vec<Entry>)> = by_block.into_iter().collect();
        blocks.sort_by_key(|(b, _)| *b);
        for (_, entries) in &mut blocks {
            entries.sort_by_key(|e| (e.p, e.q));
        }
        let mut free: Vec<(usize, f64)> = self.free.into_iter().filter(|&(_, v)| v != 0.0).collect();
        free.sort_by_key(|&(k, _)| k);
        SparseRow { blocks, free }
    }
}

impl SparseRow {
    fn scaled(&self, s: f64) -> SparseRow {
        SparseRow {
            blocks: self
                .blocks
                .iter()
                .map(|(b, es)| (*b, es.iter().map(|e| Entry { v: e.v * s, ..*e }).collect()))
                .collect(),
            free: self.free.iter().map(|&(k, v)| (k, v * s)).collect(),
        }
    }

    /// `⟨A, X⟩ + F·u`.
    fn apply(&self, x: &[CMatrix], u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (b, es) in &self.blocks {
            let m = &x[*b];
            for e in es {
                acc += (e.v * m[(e.q, e.p)]).re;
            }
        }
        for &(k, v) in &self.free {
            acc += v * u[k];
        }
        acc
    }

    fn is_empty(&self) -> bool {
        self.blocks.is_empty() && self.free.is_empty()
    }
}

fn check_var(var: &Var, prog: &ConicProgram) -> Result<()> {
    let ok = match *var {
        Var::Psd { block, r, c } => block < prog.blocks.len() && r < prog.blocks[block] && c < prog.blocks[block],
        Var::Herm { id, r, c } => id < prog.herms.len() && r < prog.herms[id].1 && c < prog.herms[id].1,
        Var::Scalar(s) => s < prog.scalars,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("variable reference {var:?} out of range")))
    }
}

impl StandardForm {
    fn compile(prog: &ConicProgram) -> Result<Self> {
        let scalar_offset: usize = prog.herms.iter().map(|&(_, d)| d * d).sum();
        let nfree = prog.free_count();

        let mut all_rows = Vec::with_capacity(prog.rows.len());
        let mut all_b = Vec::with_capacity(prog.rows.len());
        for row in &prog.rows {
            let mut acc = Accumulator::default();
            for t in &row.terms {
                check_var(&t.var, prog)?;
                acc.add(t, &prog.herms, scalar_offset);
            }
            all_rows.push(acc.into_row());
            all_b.push(row.rhs);
        }

        let sign = match prog.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut obj = Accumulator::default();
        for t in &prog.objective {
            check_var(&t.var, prog)?;
            obj.add(&Term::new(t.var, t.coef * sign), &prog.herms, scalar_offset);
        }
        let obj = obj.into_row();
        let mut c_blocks: Vec<CMatrix> = prog.blocks.iter().map(|&n| CMatrix::zeros(n, n)).collect();
        for (b, es) in &obj.blocks {
            for e in es {
                c_blocks[*b][(e.p, e.q)] += e.v;
            }
        }
        let mut c_free = vec![0.0; nfree];
        for &(k, v) in &obj.free {
            c_free[k] += v;
        }

        let (kept, rows, b) = presolve(&all_rows, &all_b, nfree)?;
        Ok(Self {
            dims: prog.blocks.clone(),
            nfree,
            rows,
            b,
            c_blocks,
            c_free,
            kept,
            total_rows: prog.rows.len(),
            all_rows,
            all_b,
        })
    }

    fn solve(&self, options: &ConicOptions) -> Result<RawSolution> {
        let mut ipm = Ipm::new(self);
        let result = ipm.run(options);
        let mut y_full = vec![0.0; self.total_rows];
        for (k, &(orig, scale)) in self.kept.iter().enumerate() {
            y_full[orig] = ipm.y[k] * scale;
        }
        let full_residual = self
            .all_rows
            .iter()
            .zip(&self.all_b)
            .map(|(row, &b)| (row.apply(&ipm.x, &ipm.u) - b).abs())
            .fold(0.0, f64::max);
        let mut telemetry = result?;
        telemetry.full_residual = full_residual;
        telemetry.dropped_rows = self.total_rows - self.kept.len();
        Ok(RawSolution {
            primal_objective: ipm.primal_objective(),
            dual_objective: ipm.dual_objective(),
            x: ipm.x,
            z: ipm.z,
            u: ipm.u,
            y: y_full,
            telemetry,
        })
    }
}

type Presolved = (Vec<(usize, f64)>, Vec<SparseRow>, Vec<f64>);

/// Normalizes rows and removes linearly dependent ones by pivoted Cholesky
/// on the row Gram matrix.
fn presolve(rows: &[SparseRow], b: &[f64], nfree: usize) -> Result<Presolved> {
    let m = rows.len();
    let mut norms = vec![0.0; m];
    for (i, row) in rows.iter().enumerate() {
        let mut s = 0.0;
        for (_, es) in &row.blocks {
            for e in es {
                s += e.v.norm_sqr();
            }
        }
        for &(_, v) in &row.free {
            s += v * v;
        }
        norms[i] = s.sqrt();
    }
    // Rows made only of rounding noise carry no constraint; normalizing them
    // would turn the noise into a spurious equation.
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    let max_b = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (i, row) in rows.iter().enumerate() {
        if row.is_empty() || norms[i] <= 1e-13 * max_norm {
            if b[i].abs() > 1e-12 * (1.0 + max_b) {
                return Err(Error::invalid(format!(
                    "constraint row {i} has no variables but right-hand side {}",
                    b[i]
                )));
            }
            norms[i] = 0.0;
        }
    }

    // Gram matrix of normalized rows: Re Tr(A_i A_k) + F_i·F_k.
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut by_pos: HashMap<(usize, usize, usize), Vec<(usize, C64)>> = HashMap::new();
    let mut by_free: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nfree];
    for (i, row) in rows.iter().enumerate() {
        if norms[i] == 0.0 {
            continue;
        }
        for (blk, es) in &row.blocks {
            for e in es {
                by_pos.entry((*blk, e.p, e.q)).or_default().push((i, e.v / norms[i]));
            }
        }
        for &(k, v) in &row.free {
            by_free[k].push((i, v / norms[i]));
        }
    }
    for (&(blk, p, q), list) in &by_pos {
        if let Some(other) = by_pos.get(&(blk, q, p)) {
            for &(i, v) in list {
                for &(k, w) in other {
                    gram[(i, k)] += (v * w).re;
                }
            }
        }
    }
    for list in &by_free {
        for &(i, v) in list {
            for &(k, w) in list {
                gram[(i, k)] += v * w;
            }
        }
    }

    // Pivoted Cholesky; rows whose residual diagonal falls below the threshold
    // lie in the span of earlier pivots.
    let threshold = 1e-9;
    let mut diag: Vec<f64> = (0..m).map(|i| gram[(i, i)]).collect();
    let mut l = DMatrix::<f64>::zeros(m, m);
    let mut chosen: Vec<usize> = Vec::new();
    let mut available: Vec<bool> = (0..m).map(|i| norms[i] > 0.0).collect();
    loop {
        let mut best = None;
        let mut best_val = threshold;
        for i in 0..m {
            if available[i] && diag[i] > best_val {
                best_val = diag[i];
                best = Some(i);
            }
        }
        let Some(piv) = best else { break };
        let col = chosen.len();
        let root = diag[piv].sqrt();
        available[piv] = false;
        for i in 0..m {
            if !available[i] {
                continue;
            }
            let mut s = gram[(i, piv)];
            for k in 0..col {
                s -= l[(i, k)] * l[(piv, k)];
            }
            l[(i, col)] = s / root;
            diag[i] -= l[(i, col)] * l[(i, col)];
        }
        l[(piv, col)] = root;
        chosen.push(piv);
    }
    chosen.sort_unstable();

    let kept: Vec<(usize, f64)> = chosen.iter().map(|&i| (i, 1.0 / norms[i])).collect();
    let out_rows = chosen.iter().map(|&i| rows[i].scaled(1.0 / norms[i])).collect();
    let out_b = chosen.iter().map(|&i| b[i] / norms[i]).collect();
    Ok((kept, out_rows, out_b))
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn frob_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    // Re Tr(a b) for Hermitian a, b.
    a.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

fn frob_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest `α ≤ cap` keeping `x + α·dx ⪰ 0`, given `x ≻ 0`.
fn max_step(x: &CMatrix, dx: &CMatrix) -> f64 {
    let n = x.nrows();
    if n == 1 {
        let d = dx[(0, 0)].re;
        return if d < 0.0 { -x[(0, 0)].re / d } else { f64::INFINITY };
    }
    let Some(chol) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(y) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&y.adjoint()) else {
        return 0.0;
    };
    let w = hermitian_part(&w);
    let lmin = w.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn inverse_pd(m: &CMatrix) -> Option<CMatrix> {
    if m.nrows() == 1 {
        let v = m[(0, 0)].re;
        return (v > 0.0).then(|| CMatrix::from_element(1, 1, C64::new(1.0 / v, 0.0)));
    }
    m.clone().cholesky().map(|c| c.inverse())
}

/// Factorization of the augmented system `[[M, F], [Fᵀ, 0]]`.
enum KktFactor {
    Dense(nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    /// `M` restricted to rows touching PSD blocks splits into independent
    /// groups; those rows are eliminated and the rest is solved densely.
    Structured {
        m: usize,
        groups: Vec<(Vec<usize>, nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>)>,
        /// `M_g⁻¹ F_g` per group.
        gain: Vec<DMatrix<f64>>,
        /// `F` restricted to each group's rows.
        coupling: Vec<DMatrix<f64>>,
        /// Rows without block entries.
        bare: Vec<usize>,
        reduced: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    },
}

impl KktFactor {
    fn dense(kkt: &DMatrix<f64>, m: usize, reg: f64) -> Option<Self> {
        let mut k = kkt.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += if i < m { reg } else { -reg };
        }
        Some(Self::Dense(k.lu()))
    }

    fn structured(sf: &StandardForm, schur: &DMatrix<f64>, reg: f64) -> Option<Self> {
        let m = sf.rows.len();
        let nf = sf.nfree;
        // Union rows through the blocks they touch.
        let mut parent: Vec<usize> = (0..sf.dims.len()).collect();
        fn root(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        for row in &sf.rows {
            let mut it = row.blocks.iter().map(|(b, _)| *b);
            if let Some(first) = it.next() {
                for b in it {
                    let (ra, rb) = (root(&mut parent, first), root(&mut parent, b));
                    parent[ra] = rb;
                }
            }
        }
        let mut by_root: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut bare = Vec::new();
        for (i, row) in sf.rows.iter().enumerate() {
            match row.blocks.first() {
                Some((b, _)) => by_root.entry(root(&mut parent, *b)).or_default().push(i),
                None => bare.push(i),
            }
        }
        let mut members: Vec<Vec<usize>> = by_root.into_values().collect();
        members.sort_by_key(|g| g[0]);

        let mut groups = Vec::with_capacity(members.len());
        let mut gain = Vec::with_capacity(members.len());
        let mut coupling = Vec::with_capacity(members.len());
        let mut schur_free = DMatrix::<f64>::zeros(nf, nf);
        for rows in members {
            let g = rows.len();
            let mut mg = DMatrix::<f64>::from_fn(g, g, |a, b| schur[(rows[a], rows[b])]);
            for a in 0..g {
                mg[(a, a)] += reg;
            }
            let chol = mg.cholesky()?;
            let mut f = DMatrix::<f64>::zeros(g, nf);
            for (a, &i) in rows.iter().enumerate() {
                for &(k, v) in &sf.rows[i].free {
                    f[(a, k)] += v;
                }
            }
            let w = chol.solve(&f);
            schur_free += f.transpose() * &w;
            groups.push((rows, chol));
            gain.push(w);
            coupling.push(f);
        }

        let q = bare.len();
        let mut reduced = DMatrix::<f64>::zeros(q + nf, q + nf);
        for (a, &i) in bare.iter().enumerate() {
            reduced[(a, a)] = schur[(i, i)] + reg;
            for &(k, v) in &sf.rows[i].free {
                reduced[(a, q + k)] += v;
                reduced[(q + k, a)] += v;
            }
        }
        for a in 0..nf {
            for b in 0..nf {
                reduced[(q + a, q + b)] = -schur_free[(a, b)];
            }
            reduced[(q + a, q + a)] -= reg;
        }
        Some(Self::Structured { m, groups, gain, coupling, bare, reduced: reduced.lu() })
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Self::Dense(lu) => lu.solve(rhs),
            Self::Structured { m, groups, gain, coupling, bare, reduced } => {
                let nf = rhs.len() - m;
                let q = bare.len();
                let mut r = DVector::<f64>::zeros(q + nf);
                for (a, &i) in bare.iter().enumerate() {
                    r[a] = rhs[i];
                }
                for k in 0..nf {
                    r[q + k] = rhs[m + k];
                }
                let mut partial = Vec::with_capacity(groups.len());
                for ((rows, chol), f) in groups.iter().zip(coupling) {
                    let rg = DVector::<f64>::from_iterator(rows.len(), rows.iter().map(|&i| rhs[i]));
                    let t = chol.solve(&rg);
                    let ft = f.transpose() * &t;
                    for k in 0..nf {
                        r[q + k] -= ft[k];
                    }
                    partial.push(t);
                }
                let sol = if r.is_empty() { r } else { reduced.solve(&r)? };
                let du = sol.rows(q, nf).into_owned();
                let mut out = DVector::<f64>::zeros(rhs.len());
                for (a, &i) in bare.iter().enumerate() {
                    out[i] = sol[a];
                }
                for (((rows, _), w), t) in groups.iter().zip(gain).zip(partial) {
                    let dy = t - w * &du;
                    for (a, &i) in rows.iter().enumerate() {
                        out[i] = dy[a];
                    }
                }
                for k in 0..nf {
                    out[*m + k] = du[k];
                }
                Some(out)
            }
        }
    }
}

const STALL_ITERATIONS: usize = 6;

struct Ipm<'a> {
    sf: &'a StandardForm,
    x: Vec<CMatrix>,
    z: Vec<CMatrix>,
    y: Vec<f64>,
    u: Vec<f64>,
    /// Rows touching each block, with the row's entries for that block.
    block_rows: Vec<Vec<(usize, &'a [Entry])>>,
}

impl<'a> Ipm<'a> {
    fn new(sf: &'a StandardForm) -> Self {
        let nb = sf.dims.len();
        let mut block_rows: Vec<Vec<(usize, &'a [Entry])>> = vec![Vec::new(); nb];
        for (i, row) in sf.rows.iter().enumerate() {
            for (b, es) in &row.blocks {
                block_rows[*b].push((i, es.as_slice()));
            }
        }

        // Scaled-identity starting point.
        let mut x = Vec::with_capacity(nb);
        let mut z = Vec::with_capacity(nb);
        for (j, &n) in sf.dims.iter().enumerate() {
            let nf = (n as f64).sqrt();
            let mut xi: f64 = 1.0;
            let mut zeta: f64 = 1.0;
            for &(i, es) in &block_rows[j] {
                let anorm = es.iter().map(|e| e.v.norm_sqr()).sum::<f64>().sqrt();
                xi = xi.max(n as f64 * (1.0 + sf.b[i].abs()) / (1.0 + anorm));
                zeta = zeta.max(anorm);
            }
            zeta = zeta.max(frob_norm(&sf.c_blocks[j]));
            let xi = xi.max(nf).max(1.0);
            let zeta = (1.0 + zeta).max(nf);
            x.push(CMatrix::identity(n, n) * C64::new(xi, 0.0));
            z.push(CMatrix::identity(n, n) * C64::new(zeta, 0.0));
        }
        Self { sf, x, z, y: vec![0.0; sf.rows.len()], u: vec![0.0; sf.nfree], block_rows }
    }

    fn a_apply(&self, mats: &[CMatrix]) -> Vec<f64> {
        let zero_u = vec![0.0; self.sf.nfree];
        self.sf.rows.iter().map(|r| r.apply(mats, &zero_u)).collect()
    }

    fn a_adjoint(&self, y: &[f64]) -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = self.sf.dims.iter().map(|&n| CMatrix::zeros(n, n)).collect();
        for (i, row) in self.sf.rows.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            for (b, es) in &row.blocks {
                for e in es {
                    out[*b][(e.p, e.q)] += e.v * y[i];
                }
            }
        }
        out
    }

    fn f_apply(&self, u: &[f64]) -> Vec<f64> {
        self.sf.rows.iter().map(|r| r.free.iter().map(|&(k, v)| v * u[k]).sum()).collect()
    }

    fn f_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.sf.nfree];
        for (i, row) in self.sf.rows.iter().enumerate() {
            for &(k, v) in &row.free {
                out[k] += v * y[i];
            }
        }
        out
    }

    fn primal_objective(&self) -> f64 {
        let mut v: f64 = self.sf.c_blocks.iter().zip(&self.x).map(|(c, x)| frob_inner(c, x)).sum();
        v += self.sf.c_free.iter().zip(&self.u).map(|(c, u)| c * u).sum::<f64>();
        v
    }

    fn dual_objective(&self) -> f64 {
        self.sf.b.iter().zip(&self.y).map(|(b, y)| b * y).sum()
    }

    /// HKM Schur complement `M_ik = Re Tr(A_i X A_k Z⁻¹)`.
    fn schur(&self, zinv: &[CMatrix]) -> DMatrix<f64> {
        let m = self.sf.rows.len();
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for (j, rows) in self.block_rows.iter().enumerate() {
            let n = self.sf.dims[j];
            let x = &self.x[j];
            let zi = &zinv[j];
            let total_nnz: usize = rows.iter().map(|(_, es)| es.len()).sum();
            for (kpos, &(k, ak)) in rows.iter().enumerate() {
                let sparse_cost = ak.len() * total_nnz;
                let dense_cost = n * n * n + n * ak.len() + total_nnz;
                if sparse_cost <= dense_cost {
                    for &(i, ai) in &rows[kpos..] {
                        let mut acc = 0.0;
                        for ei in ai {
                            for ek in ak {
                                acc += (ei.v * x[(ei.q, ek.p)] * ek.v * zi[(ek.q, ei.p)]).re;
                            }
                        }
                        schur[(i, k)] += acc;
                        if i != k {
                            schur[(k, i)] += acc;
                        }
                    }
                } else {
                    let mut xa = CMatrix::zeros(n, n);
                    for ek in ak {
                        for r in 0..n {
                            xa[(r, ek.q)] += x[(r, ek.p)] * ek.v;
                        }
                    }
                    let g = xa * zi;
                    for &(i, ai) in &rows[kpos..] {
                        let acc: f64 = ai.iter().map(|ei| (ei.v * g[(ei.q, ei.p)]).re).sum();
                        schur[(i, k)] += acc;
                        if i != k {
                            schur[(k, i)] += acc;
                        }
                    }
                }
            }
        }
        schur
    }

    fn run(&mut self, options: &ConicOptions) -> Result<Telemetry> {
        let sf = self.sf;
        let m = sf.rows.len();
        let nf = sf.nfree;
        let nb = sf.dims.len();
        let total_dim: usize = sf.dims.iter().sum::<usize>().max(1);
        let b_norm = sf.b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let c_norm = sf.c_blocks.iter().map(frob_norm).map(|v| v * v).sum::<f64>().sqrt()
            + sf.c_free.iter().map(|v| v * v).sum::<f64>().sqrt();

        let mut best: Option<(f64, Vec<CMatrix>, Vec<CMatrix>, Vec<f64>, Vec<f64>, Telemetry)> = None;
        let mut best_iter = 0;

        for iter in 0..=options.max_iterations {
            // Residuals.
            let ax = self.a_apply(&self.x);
            let fu = self.f_apply(&self.u);
            let rp: Vec<f64> = (0..m).map(|i| sf.b[i] - ax[i] - fu[i]).collect();
            let aty = self.a_adjoint(&self.y);
            let rd: Vec<CMatrix> =
                (0..nb).map(|j| &sf.c_blocks[j] - &aty[j] - &self.z[j]).collect();
            let fty = self.f_transpose(&self.y);
            let rf: Vec<f64> = (0..nf).map(|k| sf.c_free[k] - fty[k]).collect();

            let pobj = self.primal_objective();
            let dobj = self.dual_objective();
            let xz: f64 = (0..nb).map(|j| frob_inner(&self.x[j], &self.z[j])).sum();
            let mu = xz / total_dim as f64;
            let pinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + b_norm);
            let dinf = (rd.iter().map(frob_norm).map(|v| v * v).sum::<f64>()
                + rf.iter().map(|v| v * v).sum::<f64>())
            .sqrt()
                / (1.0 + c_norm);
            let gap = (pobj - dobj).abs().max(xz.abs()) / (1.0 + pobj.abs() + dobj.abs());
            let mut telemetry = Telemetry {
                iterations: iter,
                primal_residual: pinf,
                dual_residual: dinf,
                relative_gap: gap,
                full_residual: 0.0,
                dropped_rows: 0,
                converged: false,
            };
            let merit = pinf.max(dinf).max(gap);
            if best.as_ref().is_none_or(|b| merit < b.0) {
                best = Some((merit, self.x.clone(), self.z.clone(), self.y.clone(), self.u.clone(), telemetry));
                best_iter = iter;
            }
            if merit < options.tol {
                telemetry.converged = true;
                return Ok(telemetry);
            }
            // Stalled at an acceptable point: further iterations only lose precision.
            if iter >= best_iter + STALL_ITERATIONS && best.as_ref().is_some_and(|b| b.0 < 1e3 * options.tol) {
                break;
            }
            if iter == options.max_iterations {
                break;
            }

            let Some(zinv) = (0..nb).map(|j| inverse_pd(&self.z[j])).collect::<Option<Vec<_>>>() else {
                break;
            };

            // Augmented system [[M, F], [Fᵀ, 0]] factorized once per iteration.
            let schur = self.schur(&zinv);
            let dim = m + nf;
            let mut kkt = DMatrix::<f64>::zeros(dim, dim);
            let mut diag_max: f64 = 1.0;
            for i in 0..m {
                for k in 0..m {
                    kkt[(i, k)] = schur[(i, k)];
                }
                diag_max = diag_max.max(schur[(i, i)].abs());
            }
            for (i, row) in sf.rows.iter().enumerate() {
                for &(k, v) in &row.free {
                    kkt[(i, m + k)] += v;
                    kkt[(m + k, i)] += v;
                }
            }
            let reg = 1e-14 * diag_max;
            let factor = KktFactor::structured(sf, &schur, reg).or_else(|| KktFactor::dense(&kkt, m, reg));
            let Some(factor) = factor else { break };
            let solve = |rhs: &DVector<f64>| -> Option<DVector<f64>> {
                let mut sol = factor.solve(rhs)?;
                for _ in 0..2 {
                    let resid = rhs - &kkt * &sol;
                    let corr = factor.solve(&resid)?;
                    sol += corr;
                }
                Some(sol)
            };

            let x_rd_zi: Vec<CMatrix> =
                (0..nb).map(|j| hermitian_part(&(&self.x[j] * &rd[j] * &zinv[j]))).collect();
            let a_xrdzi = self.a_apply(&x_rd_zi);

            let direction = |ipm: &Ipm, rc: &[CMatrix]| -> Option<(Vec<CMatrix>, Vec<CMatrix>, Vec<f64>, Vec<f64>)> {
                let arc = ipm.a_apply(rc);
                let mut rhs = DVector::<f64>::zeros(dim);
                for i in 0..m {
                    rhs[i] = rp[i] - arc[i] + a_xrdzi[i];
                }
                for k in 0..nf {
                    rhs[m + k] = rf[k];
                }
                let sol = solve(&rhs)?;
                if sol.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                let dy: Vec<f64> = sol.rows(0, m).iter().copied().collect();
                let du: Vec<f64> = sol.rows(m, nf).iter().copied().collect();
                let atdy = ipm.a_adjoint(&dy);
                let dz: Vec<CMatrix> = (0..nb).map(|j| &rd[j] - &atdy[j]).collect();
                let dx: Vec<CMatrix> = (0..nb)
                    .map(|j| &rc[j] - hermitian_part(&(&ipm.x[j] * &dz[j] * &zinv[j])))
                    .collect();
                Some((dx, dz, dy, du))
            };

            // Predictor.
            let rc_aff: Vec<CMatrix> = self.x.iter().map(|x| -x.clone()).collect();
            let Some((dxa, dza, _, _)) = direction(self, &rc_aff) else { break };
            let ap = (0..nb).map(|j| max_step(&self.x[j], &dxa[j])).fold(f64::INFINITY, f64::min).min(1.0);
            let ad = (0..nb).map(|j| max_step(&self.z[j], &dza[j])).fold(f64::INFINITY, f64::min).min(1.0);
            let mu_aff: f64 = (0..nb)
                .map(|j| {
                    frob_inner(
                        &(&self.x[j] + &dxa[j] * C64::new(ap, 0.0)),
                        &(&self.z[j] + &dza[j] * C64::new(ad, 0.0)),
                    )
                })
                .sum::<f64>()
                / total_dim as f64;
            let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

            // Corrector.
            let rc: Vec<CMatrix> = (0..nb)
                .map(|j| {
                    &zinv[j] * C64::new(sigma * mu, 0.0)
                        - &self.x[j]
                        - hermitian_part(&(&dxa[j] * &dza[j] * &zinv[j]))
                })
                .collect();
            let Some((dx, dz, dy, du)) = direction(self, &rc) else { break };

            let ap_max = (0..nb).map(|j| max_step(&self.x[j], &dx[j])).fold(f64::INFINITY, f64::min);
            let ad_max = (0..nb).map(|j| max_step(&self.z[j], &dz[j])).fold(f64::INFINITY, f64::min);
            let gamma = 0.9 + 0.09 * ap_max.min(ad_max).min(1.0);
            let ap = (gamma * ap_max).min(1.0);
            let ad = (gamma * ad_max).min(1.0);
            log::trace!(
                "ipm {iter}: pinf {pinf:.2e} dinf {dinf:.2e} gap {gap:.2e} mu {mu:.2e} sigma {sigma:.2e} steps {ap:.3} {ad:.3}"
            );
            if ap < 1e-12 && ad < 1e-12 {
                break;
            }
            for j in 0..nb {
                self.x[j] = hermitian_part(&(&self.x[j] + &dx[j] * C64::new(ap, 0.0)));
                self.z[j] = hermitian_part(&(&self.z[j] + &dz[j] * C64::new(ad, 0.0)));
            }
            for k in 0..nf {
                self.u[k] += ap * du[k];
            }
            for i in 0..m {
                self.y[i] += ad * dy[i];
            }
        }

        let (merit, x, z, y, u, tel) = best.expect("at least one iterate evaluated");
        self.x = x;
        self.z = z;
        self.y = y;
        self.u = u;
        if merit < 1e3 * options.tol {
            return Ok(tel);
        }
        let p = self.primal_objective();
        let d = self.dual_objective();
        Err(Error::SolverFailed {
            reason: "tolerances not met".into(),
            iterations: tel.iterations,
            primal_residual: tel.primal_residual,
            dual_residual: tel.dual_residual,
            gap: tel.relative_gap,
            lower: d.min(p),
            upper: d.max(p),
        })
    }
}
