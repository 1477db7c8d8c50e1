//! Dense complex Hermitian matrices and multipartite bookkeeping.
//!
//! Subsystems are ordered `W_T, V_T, ..., W_1, V_1` from left to right, so
//! index 0 is the last output and the final index is the first input.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Relative tolerance used when accepting nearly Hermitian input.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Ordered subsystem dimensions of a multipartite space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemLayout {
    dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl SystemLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidLayout("layout has no subsystems".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidLayout(format!("subsystem {pos} has dimension 0")));
        }
        Ok(Self { dims, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                context: "layout labels",
                expected: self.dims.len(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Layout `[W_T, V_T, ..., W_1, V_1]` built from per-step `(out, in)` pairs
    /// listed from step T down to step 1.
    pub fn from_steps(steps: &[(usize, usize)]) -> Result<Self> {
        Self::new(steps.iter().flat_map(|&(w, v)| [w, v]).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn dim_of(&self, systems: &[usize]) -> usize {
        systems.iter().map(|&s| self.dims[s]).product()
    }

    /// Number of time steps when the layout alternates outputs and inputs.
    pub fn time_steps(&self) -> Option<usize> {
        (self.dims.len() % 2 == 0).then_some(self.dims.len() / 2)
    }

    /// Position of `W_t` (1-based time step) in a 2T-system layout.
    pub fn output_index(&self, t: usize) -> usize {
        let steps = self.dims.len() / 2;
        2 * (steps - t)
    }

    /// Position of `V_t` (1-based time step) in a 2T-system layout.
    pub fn input_index(&self, t: usize) -> usize {
        self.output_index(t) + 1
    }

    pub fn sub_layout(&self, systems: &[usize]) -> Result<Self> {
        for &s in systems {
            self.check_index(s)?;
        }
        let dims = systems.iter().map(|&s| self.dims[s]).collect();
        let mut out = Self::new(dims)?;
        if let Some(labels) = &self.labels {
            out.labels = Some(systems.iter().map(|&s| labels[s].clone()).collect());
        }
        Ok(out)
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, labels: None }
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.dims.len() {
            Err(Error::IndexOutOfRange { index, len: self.dims.len() })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_matrix(&self, dim: usize, context: &'static str) -> Result<()> {
        let expected = self.total_dim();
        if dim != expected {
            return Err(Error::DimensionMismatch { context, expected, found: dim });
        }
        Ok(())
    }

    /// Row-major strides: the flat index is `Σ digit[k]·stride[k]`.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    pub(crate) fn digits(&self, mut index: usize, out: &mut [usize]) {
        for k in (0..self.dims.len()).rev() {
            out[k] = index % self.dims[k];
            index /= self.dims[k];
        }
    }
}

impl fmt::Display for SystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.dims)
    }
}

/// Square complex matrix equal to its conjugate transpose.
#[derive(Clone, PartialEq)]
pub struct Hermitian(CMatrix);

impl fmt::Debug for Hermitian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian{}", self.0)
    }
}

impl Hermitian {
    /// Validates and symmetrizes `m`.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                context: "square matrix",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        let scale = m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        let tolerance = HERMITICITY_TOL * (1.0 + scale);
        let asymmetry = asymmetry(&m);
        if asymmetry > tolerance {
            return Err(Error::NotHermitian { asymmetry, tolerance });
        }
        Ok(Self::symmetrize(m))
    }

    /// Hermitian part `(m + m†)/2` without any tolerance check.
    pub fn symmetrize(m: CMatrix) -> Self {
        let adj = m.adjoint();
        Self((m + adj) * C64::new(0.5, 0.0))
    }

    pub(crate) fn from_raw(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { ZERO }))
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "matrix row length",
                    expected: n,
                    found: row.len(),
                });
            }
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    /// Projector `|v⟩⟨v|` (unnormalized if `v` is).
    pub fn projector(v: &[C64]) -> Self {
        let n = v.len();
        Self(CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj()))
    }

    pub fn basis_projector(n: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        m[(k, k)] = ONE;
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// `Tr(self · other)`; real because both factors are Hermitian.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(other.0.transpose().iter()).map(|(a, b)| (a * b).re).sum()
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * C64::new(s, 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// `U · self · U†` for a (not necessarily square) `U`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        Self::symmetrize(u * &self.0 * u.adjoint())
    }

    pub fn eig(&self) -> Eigen {
        let se = self.0.clone().symmetric_eigen();
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
        let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
        Eigen { values, vectors }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.0.clone().symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `λ_min ≥ −tol·(1 + ‖m‖_F)`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol * (1.0 + self.frobenius_norm())
    }

    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l.abs()).sum()
    }

    /// Applies `f` to the spectrum.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        let e = self.eig();
        let n = self.dim();
        let mut scaled = e.vectors.clone();
        for j in 0..n {
            let s = C64::new(f(e.values[j]), 0.0);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        Self::symmetrize(scaled * e.vectors.adjoint())
    }

    /// Square root of the positive part.
    pub fn sqrt_psd(&self) -> Self {
        self.map_spectrum(|l| l.max(0.0).sqrt())
    }

    /// Pseudo-inverse square root, discarding eigenvalues below `cutoff`.
    pub fn inv_sqrt_psd(&self, cutoff: f64) -> Self {
        self.map_spectrum(|l| if l > cutoff { 1.0 / l.sqrt() } else { 0.0 })
    }

    /// Projector onto the eigenspace of strictly positive eigenvalues.
    pub fn positive_projector(&self, cutoff: f64) -> Self {
        self.map_spectrum(|l| if l > cutoff { 1.0 } else { 0.0 })
    }

    pub fn partial_trace(&self, layout: &SystemLayout, keep: &[usize]) -> Result<Self> {
        partial_trace(self, layout, keep)
    }

    pub fn permute(&self, layout: &SystemLayout, perm: &[usize]) -> Result<Self> {
        permute_systems(self, layout, perm)
    }

    pub fn partial_transpose(&self, layout: &SystemLayout, systems: &[usize]) -> Result<Self> {
        partial_transpose(self, layout, systems)
    }
}

fn asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl Add for &Hermitian {
    type Output = Hermitian;
    fn add(self, rhs: &Hermitian) -> Hermitian {
        Hermitian(&self.0 + &rhs.0)
    }
}

impl Add for Hermitian {
    type Output = Hermitian;
    fn add(self, rhs: Hermitian) -> Hermitian {
        Hermitian(self.0 + rhs.0)
    }
}

impl Sub for &Hermitian {
    type Output = Hermitian;
    fn sub(self, rhs: &Hermitian) -> Hermitian {
        Hermitian(&self.0 - &rhs.0)
    }
}

impl Sub for Hermitian {
    type Output = Hermitian;
    fn sub(self, rhs: Hermitian) -> Hermitian {
        Hermitian(self.0 - rhs.0)
    }
}

impl AddAssign<&Hermitian> for Hermitian {
    fn add_assign(&mut self, rhs: &Hermitian) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Hermitian> for Hermitian {
    fn sub_assign(&mut self, rhs: &Hermitian) {
        self.0 -= &rhs.0;
    }
}

impl Mul<f64> for &Hermitian {
    type Output = Hermitian;
    fn mul(self, rhs: f64) -> Hermitian {
        self.scale(rhs)
    }
}

impl Mul<f64> for Hermitian {
    type Output = Hermitian;
    fn mul(self, rhs: f64) -> Hermitian {
        Hermitian(self.0 * C64::new(rhs, 0.0))
    }
}

impl Neg for Hermitian {
    type Output = Hermitian;
    fn neg(self) -> Hermitian {
        Hermitian(-self.0)
    }
}

impl Serialize for Hermitian {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Hermitian {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let rows: Vec<Vec<C64>> =
            rows.into_iter().map(|r| r.into_iter().map(|[a, b]| C64::new(a, b)).collect()).collect();
        Hermitian::from_rows(&rows).map_err(de::Error::custom)
    }
}

/// Spectrum sorted in descending order with matching orthonormal columns.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k).iter().copied().collect()
    }

    pub fn reconstruct(&self) -> Hermitian {
        let diag = Hermitian::from_real_diagonal(&self.values);
        Hermitian::symmetrize(&self.vectors * diag.matrix() * self.vectors.adjoint())
    }
}

pub fn inner_product(a: &Hermitian, b: &Hermitian) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "inner product",
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.inner(b))
}

pub fn kron(a: &Hermitian, b: &Hermitian) -> Hermitian {
    a.kron(b)
}

pub fn eig_hermitian(m: &Hermitian) -> Eigen {
    m.eig()
}

pub fn min_eigenvalue(m: &Hermitian) -> f64 {
    m.min_eigenvalue()
}

fn validate_system_set(layout: &SystemLayout, systems: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; layout.len()];
    for &s in systems {
        layout.check_index(s)?;
        if mask[s] {
            return Err(Error::InvalidLayout(format!("subsystem {s} listed twice")));
        }
        mask[s] = true;
    }
    Ok(mask)
}

/// Traces out every subsystem not listed in `keep`. Kept systems retain their
/// original relative order.
pub fn partial_trace(m: &Hermitian, layout: &SystemLayout, keep: &[usize]) -> Result<Hermitian> {
    layout.check_matrix(m.dim(), "partial trace")?;
    let mask = validate_system_set(layout, keep)?;
    let dims = layout.dims();
    let kept: Vec<usize> = (0..dims.len()).filter(|&k| mask[k]).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|&k| !mask[k]).collect();
    let strides = layout.strides();
    let kdim: usize = kept.iter().map(|&k| dims[k]).product();
    let tdim: usize = traced.iter().map(|&k| dims[k]).product();

    // Flat offsets contributed by kept and traced digits separately.
    let offsets = |systems: &[usize], count: usize| -> Vec<usize> {
        let mut out = Vec::with_capacity(count);
        let mut digits = vec![0usize; systems.len()];
        for _ in 0..count {
            out.push(systems.iter().zip(&digits).map(|(&s, &d)| d * strides[s]).sum());
            for pos in (0..systems.len()).rev() {
                digits[pos] += 1;
                if digits[pos] < dims[systems[pos]] {
                    break;
                }
                digits[pos] = 0;
            }
        }
        out
    };
    let koff = offsets(&kept, kdim);
    let toff = offsets(&traced, tdim);

    let src = m.matrix();
    let out = CMatrix::from_fn(kdim, kdim, |i, j| {
        toff.iter().map(|&t| src[(koff[i] + t, koff[j] + t)]).sum()
    });
    Ok(Hermitian::from_raw(out))
}

fn check_permutation(len: usize, perm: &[usize]) -> Result<()> {
    if perm.len() != len {
        return Err(Error::InvalidPermutation(format!(
            "expected {len} entries, found {}",
            perm.len()
        )));
    }
    let mut seen = vec![false; len];
    for &p in perm {
        if p >= len || seen[p] {
            return Err(Error::InvalidPermutation(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Flat index map for a subsystem permutation: output system `k` is input
/// system `perm[k]`. Returns `map[new_index] = old_index`.
pub(crate) fn permutation_index_map(layout: &SystemLayout, perm: &[usize]) -> Result<Vec<usize>> {
    check_permutation(layout.len(), perm)?;
    let dims = layout.dims();
    let strides = layout.strides();
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let new_layout = SystemLayout::new(new_dims)?;
    let n = layout.total_dim();
    let mut digits = vec![0usize; perm.len()];
    Ok((0..n)
        .map(|idx| {
            new_layout.digits(idx, &mut digits);
            perm.iter().zip(&digits).map(|(&p, &d)| d * strides[p]).sum()
        })
        .collect())
}

/// Reorders subsystems so that output subsystem `k` is input subsystem `perm[k]`.
pub fn permute_systems(m: &Hermitian, layout: &SystemLayout, perm: &[usize]) -> Result<Hermitian> {
    layout.check_matrix(m.dim(), "permute systems")?;
    let map = permutation_index_map(layout, perm)?;
    let src = m.matrix();
    let n = map.len();
    Ok(Hermitian::from_raw(CMatrix::from_fn(n, n, |i, j| src[(map[i], map[j])])))
}

pub fn permuted_layout(layout: &SystemLayout, perm: &[usize]) -> Result<SystemLayout> {
    check_permutation(layout.len(), perm)?;
    layout.sub_layout(perm)
}

/// Transposes the listed subsystems.
pub fn partial_transpose(m: &Hermitian, layout: &SystemLayout, systems: &[usize]) -> Result<Hermitian> {
    layout.check_matrix(m.dim(), "partial transpose")?;
    let mask = validate_system_set(layout, systems)?;
    let strides = layout.strides();
    let n = m.dim();
    let mut di = vec![0usize; layout.len()];
    let mut dj = vec![0usize; layout.len()];
    let src = m.matrix();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        layout.digits(i, &mut di);
        for j in 0..n {
            layout.digits(j, &mut dj);
            let (mut si, mut sj) = (0, 0);
            for k in 0..layout.len() {
                let (a, b) = if mask[k] { (dj[k], di[k]) } else { (di[k], dj[k]) };
                si += a * strides[k];
                sj += b * strides[k];
            }
            out[(si, sj)] = src[(i, j)];
        }
    }
    Ok(Hermitian::from_raw(out))
}

/// Haar-random unitary via QR of a complex Ginibre matrix with phase fix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    random_isometry(n, n, rng)
}

/// Haar-random isometry `rows × cols` (`rows ≥ cols`).
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rows, cols, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = q.columns(0, cols).into_owned();
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..rows {
            out[(i, j)] *= phase;
        }
    }
    out
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Random density matrix from the Hilbert-Schmidt ensemble.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Hermitian {
    let g = ginibre(n, n, rng);
    let w = Hermitian::symmetrize(&g * g.adjoint());
    let tr = w.trace();
    w.scale(1.0 / tr)
}

pub fn random_pure_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    let g = ginibre(n, 1, rng);
    let norm = g.norm();
    g.iter().map(|z| z / norm).collect()
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Hermitian {
    Hermitian::symmetrize(ginibre(n, n, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sigma_x() -> Hermitian {
        Hermitian::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]).unwrap()
    }

    fn sigma_z() -> Hermitian {
        Hermitian::from_real_diagonal(&[1.0, -1.0])
    }

    fn phase_choi() -> Hermitian {
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = ONE;
        m[(3, 3)] = ONE;
        m[(0, 3)] = w.conj();
        m[(3, 0)] = w;
        Hermitian::new(m).unwrap()
    }

    #[test]
    fn inner_products() {
        let i2 = Hermitian::identity(2);
        assert!((inner_product(&i2, &i2).unwrap() - 2.0).abs() < 1e-15);
        assert!(inner_product(&sigma_z(), &sigma_x()).unwrap().abs() < 1e-15);
        let l = phase_choi();
        assert!((l.inner(&l) - 4.0).abs() < 1e-12);
        assert!(inner_product(&i2, &Hermitian::identity(3)).is_err());
    }

    #[test]
    fn kron_basics() {
        let i4 = kron(&Hermitian::identity(2), &Hermitian::identity(2));
        assert_eq!(i4, Hermitian::identity(4));
        let p = kron(&Hermitian::basis_projector(2, 0), &Hermitian::basis_projector(2, 1));
        assert_eq!(p, Hermitian::from_real_diagonal(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = ONE;
        assert!(matches!(Hermitian::new(m), Err(Error::NotHermitian { .. })));
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = C64::new(1e-14, 0.0);
        let h = Hermitian::new(m).unwrap();
        assert_eq!(h.get(0, 1), h.get(1, 0).conj());
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let layout = SystemLayout::new(vec![2, 3]).unwrap();
        let ab = a.kron(&b);
        let left = partial_trace(&ab, &layout, &[0]).unwrap();
        assert!((&left - &a.scale(b.trace())).max_abs() < 1e-12);
        let right = partial_trace(&ab, &layout, &[1]).unwrap();
        assert!((&right - &b.scale(a.trace())).max_abs() < 1e-12);
        assert!(partial_trace(&ab, &layout, &[2]).is_err());
    }

    #[test]
    fn unitary_choi_marginal_is_identity() {
        let layout = SystemLayout::new(vec![2, 2]).unwrap();
        let marg = partial_trace(&phase_choi(), &layout, &[1]).unwrap();
        assert!((&marg - &Hermitian::identity(2)).max_abs() < 1e-15);
        let mixed = Hermitian::identity(4).scale(0.25);
        for keep in [0, 1] {
            let r = partial_trace(&mixed, &layout, &[keep]).unwrap();
            assert!((&r - &Hermitian::identity(2).scale(0.5)).max_abs() < 1e-15);
        }
    }

    #[test]
    fn swap_and_identity_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let layout = SystemLayout::new(vec![2, 3]).unwrap();
        let swapped = permute_systems(&a.kron(&b), &layout, &[1, 0]).unwrap();
        assert!((&swapped - &b.kron(&a)).max_abs() < 1e-14);
        assert_eq!(permute_systems(&a.kron(&b), &layout, &[0, 1]).unwrap(), a.kron(&b));
        let back = permute_systems(&swapped, &SystemLayout::new(vec![3, 2]).unwrap(), &[1, 0]).unwrap();
        assert_eq!(back, a.kron(&b));
        assert!(permute_systems(&a.kron(&b), &layout, &[0, 0]).is_err());
    }

    #[test]
    fn eigen_examples() {
        let e = Hermitian::from_real_diagonal(&[1.0, 3.0]).eig();
        assert_eq!(e.values, vec![3.0, 1.0]);
        let e = sigma_x().eig();
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] + 1.0).abs() < 1e-14);
        let v = e.vector(0);
        assert!((v[0].norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((v[0] - v[1]).norm() < 1e-12);
        let eigs = phase_choi().eigenvalues();
        assert!((eigs[0] - 2.0).abs() < 1e-12);
        assert!(eigs[1..].iter().all(|l| l.abs() < 1e-12));
        assert!((min_eigenvalue(&Hermitian::identity(2)) - 1.0).abs() < 1e-15);
        assert!((min_eigenvalue(&sigma_z()) + 1.0).abs() < 1e-15);
        assert!(min_eigenvalue(&phase_choi()).abs() < 1e-12);
    }

    #[test]
    fn partial_transpose_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let layout = SystemLayout::new(vec![2, 3]).unwrap();
        let pt = partial_transpose(&a.kron(&b), &layout, &[1]).unwrap();
        assert!((&pt - &a.kron(&b.transpose())).max_abs() < 1e-14);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(4, &mut rng);
        assert!((u.adjoint() * &u - CMatrix::identity(4, 4)).norm() < 1e-12);
        let v = random_isometry(6, 2, &mut rng);
        assert!((v.adjoint() * &v - CMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn serde_round_trip() {
        let h = phase_choi();
        let json = serde_json::to_string(&h).unwrap();
        let back: Hermitian = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<Hermitian>("[[[0,0],[1,0]],[[0,0],[0,0]]]").is_err());
    }

    fn layout_strategy() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(1usize..=3, 1..=3)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inner_product_symmetric(n in 1usize..8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hermitian(n, &mut rng);
            let b = random_hermitian(n, &mut rng);
            let direct: C64 = (a.matrix() * b.matrix()).trace();
            prop_assert!(direct.im.abs() < 1e-12 * (1.0 + direct.norm()));
            prop_assert!((a.inner(&b) - b.inner(&a)).abs() < 1e-12);
            prop_assert!((a.inner(&b) - direct.re).abs() < 1e-10);
        }

        #[test]
        fn partial_trace_preserves_trace(dims in layout_strategy(), mask in any::<u8>(), seed in any::<u64>()) {
            let layout = SystemLayout::new(dims.clone()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_hermitian(layout.total_dim(), &mut rng);
            let keep: Vec<usize> = (0..dims.len()).filter(|k| mask & (1 << k) != 0).collect();
            let r = partial_trace(&m, &layout, &keep).unwrap();
            prop_assert!((r.trace() - m.trace()).abs() < 1e-12 * (1.0 + m.frobenius_norm()));
        }

        #[test]
        fn partial_trace_is_linear(seed in any::<u64>(), s in -3.0f64..3.0) {
            let layout = SystemLayout::new(vec![2, 3, 2]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_hermitian(12, &mut rng);
            let b = random_hermitian(12, &mut rng);
            let lhs = partial_trace(&(&a + &b.scale(s)), &layout, &[0, 2]).unwrap();
            let rhs = &partial_trace(&a, &layout, &[0, 2]).unwrap()
                + &partial_trace(&b, &layout, &[0, 2]).unwrap().scale(s);
            prop_assert!((&lhs - &rhs).max_abs() < 1e-12);
        }

        #[test]
        fn permutation_preserves_spectrum(seed in any::<u64>(), which in 0usize..6) {
            let perms = [[0,1,2],[0,2,1],[1,0,2],[1,2,0],[2,0,1],[2,1,0]];
            let layout = SystemLayout::new(vec![2, 3, 2]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_hermitian(12, &mut rng);
            let p = permute_systems(&m, &layout, &perms[which]).unwrap();
            for (x, y) in m.eigenvalues().iter().zip(p.eigenvalues()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn eig_reconstructs(n in 1usize..=16, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_hermitian(n, &mut rng);
            let e = m.eig();
            let err = (&e.reconstruct() - &m).frobenius_norm();
            prop_assert!(err <= 1e-10 * (1.0 + m.frobenius_norm()));
            prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
