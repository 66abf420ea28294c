//! Dense complex linear algebra and quantum-state utilities.
//!
//! Matrices are stored row-major. Joint Hilbert spaces follow the ordering
//! system ⊗ ancilla (⊗ auxiliary): in [`kron`] the first factor indexes the
//! slower-varying (most significant) part of the joint index.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra as na;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest joint dimension any constructor will produce.
pub const MAX_DIM: usize = 4096;
/// Hermiticity and unit-trace tolerance for density matrices.
pub const STATE_TOL: f64 = 1e-10;
/// Squared-norm tolerance for pure states.
pub const NORM_TOL: f64 = 1e-12;
/// Eigenvalues of a density matrix below this are treated as zero before
/// square roots and logarithms.
pub const EIG_CLIP: f64 = 1e-13;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// `|a⟩⟨b|`
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * c).collect() }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.diag().into_iter().sum()
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Matrix product. Panics on mismatched inner dimensions.
    pub fn dot(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matrix product dimension mismatch ({}x{} * {}x{})",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert!(self.cols == other.rows && self.rows == other.cols);
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max |A - A†|` entrywise; infinite for non-square input.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut err: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                err = err.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        err
    }

    /// `max |U†U - I|` entrywise; infinite for non-square input.
    pub fn unitarity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.adjoint().dot(self).max_abs_diff(&Self::identity(self.rows))
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)].norm() <= tol))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Commutator `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        &self.dot(other) - &other.dot(self)
    }

    pub(crate) fn to_nalgebra(&self) -> na::DMatrix<C64> {
        na::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.dot(rhs)
    }
}

/// Kronecker product `a ⊗ b`, `(a⊗b)[i·q+k, j·s+l] = a[i,j]·b[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let dim = rows.max(cols);
    if dim > MAX_DIM {
        return Err(Error::DimensionOverflow { dim, max: MAX_DIM });
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let x = a[(i, j)];
            if x == ZERO {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out[(i * b.rows + k, j * b.cols + l)] = x * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of a list of matrices, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> Result<ComplexMatrix> {
    let mut acc = ComplexMatrix::identity(1);
    for f in factors {
        acc = kron(&acc, f)?;
    }
    Ok(acc)
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
}

impl PureState {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidState("empty state vector".into()));
        }
        let n2 = norm_sqr(&amps);
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("squared norm {n2} is not 1")));
        }
        Ok(Self { amps })
    }

    /// Normalizes `amps`; rejects the zero vector.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let n = norm_sqr(&amps).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= n);
        Ok(Self { amps })
    }

    /// Computational basis state `|k⟩`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::OutOfRange(format!("basis index {k} in dimension {dim}")));
        }
        let mut amps = vec![ZERO; dim];
        amps[k] = ONE;
        Ok(Self { amps })
    }

    pub(crate) fn from_vec_unchecked(amps: Vec<C64>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn kron(&self, other: &Self) -> Result<Self> {
        let dim = self.dim() * other.dim();
        if dim > MAX_DIM {
            return Err(Error::DimensionOverflow { dim, max: MAX_DIM });
        }
        Ok(Self { amps: kron_vec(&self.amps, &other.amps) })
    }

    /// `u|ψ⟩` for a unitary `u`; the result is renormalization-free.
    pub fn apply(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.cols() != self.dim() || !u.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "operator {}x{} on state of dim {}",
                u.rows(),
                u.cols(),
                self.dim()
            )));
        }
        Ok(Self { amps: u.mul_vec(&self.amps) })
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(ComplexMatrix::outer(&self.amps, &self.amps))
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        if !mat.is_square() || mat.rows() == 0 {
            return Err(Error::InvalidState(format!("{}x{} is not square", mat.rows(), mat.cols())));
        }
        if !mat.is_finite() {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        let herm = mat.hermiticity_error();
        if herm > STATE_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = hermitian_eigvals(&mat)?.into_iter().fold(f64::INFINITY, f64::min);
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { mat })
    }

    /// For matrices that are valid states by construction.
    pub(crate) fn from_matrix_unchecked(mat: ComplexMatrix) -> Self {
        debug_assert!(mat.is_square());
        Self { mat }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { mat: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64) }
    }

    /// Diagonal state with the given populations; must sum to one.
    pub fn from_populations(p: &[f64]) -> Result<Self> {
        if p.iter().any(|&x| x < -STATE_TOL) {
            return Err(Error::InvalidState("negative population".into()));
        }
        Self::new(ComplexMatrix::from_real_diag(p))
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    /// Eigenvalues, ascending, with `[-tol, EIG_CLIP)` noise clipped to zero.
    pub fn spectrum(&self) -> Vec<f64> {
        clip_spectrum(hermitian_eigvals(&self.mat).expect("density matrix is Hermitian"))
    }

    pub fn purity(&self) -> f64 {
        self.mat.trace_product(&self.mat).re
    }

    /// `Tr(ρ O)`, real part.
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        self.mat.trace_product(op).re
    }

    /// Convex combination `Σ w_k ρ_k`; weights are not renormalized.
    pub fn mixture<'a>(dim: usize, terms: impl IntoIterator<Item = (f64, &'a DensityMatrix)>) -> Self {
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for (w, rho) in terms {
            for (a, b) in acc.data.iter_mut().zip(&rho.mat.data) {
                *a += b * w;
            }
        }
        Self { mat: acc }
    }
}

fn clip_spectrum(mut values: Vec<f64>) -> Vec<f64> {
    for v in values.iter_mut() {
        if *v < EIG_CLIP {
            *v = 0.0;
        }
    }
    values
}

fn check_dims(dims: &[usize], total: usize) -> Result<()> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::DimensionMismatch(format!("invalid factor dims {dims:?}")));
    }
    let prod: usize = dims.iter().product();
    if prod != total {
        return Err(Error::DimensionMismatch(format!(
            "factor dims {dims:?} multiply to {prod}, state has dim {total}"
        )));
    }
    Ok(())
}

fn check_keep(keep: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut k = keep.to_vec();
    k.sort_unstable();
    k.dedup();
    if k.is_empty() || k.len() != keep.len() || k.iter().any(|&i| i >= n) {
        return Err(Error::DimensionMismatch(format!("invalid kept factors {keep:?} of {n}")));
    }
    Ok(k)
}

/// For each joint index, its (kept, traced) sub-indices.
fn split_indices(dims: &[usize], keep: &[usize]) -> (usize, usize, Vec<(usize, usize)>) {
    let total: usize = dims.iter().product();
    let kept_mask: Vec<bool> = (0..dims.len()).map(|i| keep.contains(&i)).collect();
    let d_keep: usize = keep.iter().map(|&i| dims[i]).product();
    let d_trace = total / d_keep;
    let mut table = Vec::with_capacity(total);
    let mut digits = vec![0usize; dims.len()];
    for _ in 0..total {
        let (mut ki, mut ti) = (0, 0);
        for (f, &dig) in digits.iter().enumerate() {
            if kept_mask[f] {
                ki = ki * dims[f] + dig;
            } else {
                ti = ti * dims[f] + dig;
            }
        }
        table.push((ki, ti));
        for f in (0..dims.len()).rev() {
            digits[f] += 1;
            if digits[f] < dims[f] {
                break;
            }
            digits[f] = 0;
        }
    }
    (d_keep, d_trace, table)
}

/// Reduced state on the factors in `keep`, kept in their original order.
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    check_dims(dims, rho.dim())?;
    let keep = check_keep(keep, dims.len())?;
    let (d_keep, d_trace, table) = split_indices(dims, &keep);
    // inverse map: (kept, traced) -> joint
    let mut joint = vec![0usize; d_keep * d_trace];
    for (idx, &(ki, ti)) in table.iter().enumerate() {
        joint[ki * d_trace + ti] = idx;
    }
    let m = rho.matrix();
    let out = ComplexMatrix::from_fn(d_keep, d_keep, |i, j| {
        (0..d_trace).map(|t| m[(joint[i * d_trace + t], joint[j * d_trace + t])]).sum()
    });
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Reshapes a pure joint state into the `d_keep × d_trace` coefficient matrix.
pub fn bipartite_coefficients(psi: &PureState, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    check_dims(dims, psi.dim())?;
    let keep = check_keep(keep, dims.len())?;
    let (d_keep, d_trace, table) = split_indices(dims, &keep);
    let mut out = ComplexMatrix::zeros(d_keep, d_trace);
    for (idx, &(ki, ti)) in table.iter().enumerate() {
        out[(ki, ti)] = psi.amps[idx];
    }
    Ok(out)
}

/// Reduced state of a pure joint state, `ρ = M M†` with `M` from
/// [`bipartite_coefficients`].
pub fn reduced_state(psi: &PureState, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let m = bipartite_coefficients(psi, dims, keep)?;
    Ok(DensityMatrix::from_matrix_unchecked(gram_rows(&m)))
}

/// `M M†`
pub(crate) fn gram_rows(m: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(m.rows(), m.rows());
    for i in 0..m.rows() {
        for j in i..m.rows() {
            let v: C64 = m.row(i).iter().zip(m.row(j)).map(|(a, b)| a * b.conj()).sum();
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

/// Reorders tensor factors: position `k` of the output holds old factor `order[k]`.
pub fn permute_factors(psi: &PureState, dims: &[usize], order: &[usize]) -> Result<PureState> {
    check_dims(dims, psi.dim())?;
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..dims.len()).collect::<Vec<_>>() {
        return Err(Error::DimensionMismatch(format!("{order:?} is not a permutation of {} factors", dims.len())));
    }
    if order.iter().enumerate().all(|(k, &o)| k == o) {
        return Ok(psi.clone());
    }
    let new_dims: Vec<usize> = order.iter().map(|&o| dims[o]).collect();
    // strides of the old layout
    let mut strides = vec![1usize; dims.len()];
    for f in (0..dims.len().saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * dims[f + 1];
    }
    let mut out = Vec::with_capacity(psi.dim());
    let mut digits = vec![0usize; dims.len()];
    for _ in 0..psi.dim() {
        let old: usize = digits.iter().zip(order).map(|(&d, &o)| d * strides[o]).sum();
        out.push(psi.amps[old]);
        for f in (0..new_dims.len()).rev() {
            digits[f] += 1;
            if digits[f] < new_dims[f] {
                break;
            }
            digits[f] = 0;
        }
    }
    Ok(PureState { amps: out })
}

#[derive(Clone, Debug)]
pub struct Eigh {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

impl Eigh {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// `Σ_k f(λ_k) |v_k⟩⟨v_k|`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * v[(j, k)].conj() * fv[k]).sum()
        })
    }
}

fn stable_ascending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending, ties in
/// solver order.
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<Eigh> {
    let herm = h.hermiticity_error();
    if herm > STATE_TOL {
        return Err(Error::NotHermitian(herm));
    }
    let n = h.rows();
    let eig = h
        .to_nalgebra()
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or(Error::NoConvergence)?;
    let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = stable_ascending(&raw);
    let values = order.iter().map(|&k| raw[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(Eigh { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigvals(h: &ComplexMatrix) -> Result<Vec<f64>> {
    let herm = h.hermiticity_error();
    if herm > STATE_TOL {
        return Err(Error::NotHermitian(herm));
    }
    let mut values: Vec<f64> = h.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt(rho: &DensityMatrix) -> ComplexMatrix {
    let eig = hermitian_eig(rho.matrix()).expect("density matrix is Hermitian");
    eig.reconstruct_with(|v| if v < EIG_CLIP { 0.0 } else { v.sqrt() })
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`, computed as the squared trace norm of
/// `√ρ √σ` via singular values.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!("fidelity of dims {} and {}", rho.dim(), sigma.dim())));
    }
    let a = psd_sqrt(rho).dot(&psd_sqrt(sigma));
    let sv = a.to_nalgebra().singular_values();
    let f: f64 = sv.iter().sum::<f64>().powi(2);
    Ok(f.clamp(0.0, 1.0))
}

/// Haar-random pure state: normalized complex standard-normal vector.
pub fn haar_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    assert!(dim >= 1, "haar_state needs dim >= 1");
    loop {
        let amps: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        if let Ok(psi) = PureState::normalized(amps) {
            return psi;
        }
    }
}

/// Haar-random unitary by Gram-Schmidt on a complex Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        // twice for numerical orthogonality
        for _ in 0..2 {
            for c in &cols {
                let proj: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let n = norm_sqr(&v).sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            cols.push(v);
        }
    }
    ComplexMatrix::from_fn(dim, dim, |i, j| cols[j][i])
}

/// Random mixed state `G G† / Tr(G G†)` from a `dim × rank` Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, rank.max(1), |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = gram_rows(&g);
    let tr = m.trace().re;
    DensityMatrix::from_matrix_unchecked(m.scale_real(1.0 / tr))
}

/// Von Neumann entropy in nats.
pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    shannon(&rho.spectrum())
}

/// `-Σ p ln p` with `0 ln 0 = 0`.
pub(crate) fn shannon(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}
