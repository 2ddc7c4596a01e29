//! Finite-dimensional C*-algebras realized as direct sums of full complex
//! matrix blocks `M_{n_1} ⊕ ... ⊕ M_{n_r}`.
//!
//! Elements are stored block by block. The norm is the operator norm of the
//! block-diagonal matrix, i.e. the largest singular value over all blocks.
//! Matrix functions (positive square root, `|a|`, the spectral sign of a
//! normal element) are computed block-wise from Hermitian eigendecompositions
//! or from a complex Schur form.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::{Error, Result, C64};

/// Eigenvalues in `[-tol * max(1, ||a||), 0)` are clamped to zero by [`AlgebraElement::pos_sqrt`].
pub const DEFAULT_CLAMP_TOL: f64 = 1e-9;

/// Relative threshold below which an eigenvalue counts as zero in the polar sign.
/// Relative size below which an eigenvalue of a positive element is zero.
pub const NULL_EIGENVALUE_TOL: f64 = 64.0 * f64::EPSILON;

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Relative commutator threshold `||a*a - aa*|| <= tol * ||a||^2`.
pub const DEFAULT_NORMALITY_TOL: f64 = 1e-6;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

/// Block structure of `M_{n_1} ⊕ ... ⊕ M_{n_r}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlgebraDescriptor {
    block_sizes: Vec<usize>,
}

impl AlgebraDescriptor {
    pub fn new(block_sizes: Vec<usize>) -> Result<Self> {
        if block_sizes.is_empty() {
            return Err(Error::InvalidDescriptor("at least one block is required".into()));
        }
        if block_sizes.contains(&0) {
            return Err(Error::InvalidDescriptor(format!(
                "block sizes must be positive, got {block_sizes:?}"
            )));
        }
        Ok(Self { block_sizes })
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    /// Complex dimension `sum n_i^2`.
    pub fn total_dim(&self) -> usize {
        self.block_sizes.iter().map(|n| n * n).sum()
    }

    /// Size of the matrix the algebra acts on, `sum n_i`.
    pub fn matrix_size(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn is_abelian(&self) -> bool {
        self.block_sizes.iter().all(|&n| n == 1)
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement {
            blocks: self.block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        }
    }

    pub fn identity(&self) -> AlgebraElement {
        AlgebraElement {
            blocks: self.block_sizes.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        }
    }

    /// Diagonal element from the concatenated block diagonals.
    pub fn diagonal(&self, entries: &[C64]) -> Result<AlgebraElement> {
        if entries.len() != self.matrix_size() {
            return Err(Error::DescriptorMismatch(format!(
                "expected {} diagonal entries, got {}",
                self.matrix_size(),
                entries.len()
            )));
        }
        let mut offset = 0;
        let blocks = self
            .block_sizes
            .iter()
            .map(|&n| {
                let d = DVector::from_column_slice(&entries[offset..offset + n]);
                offset += n;
                DMatrix::from_diagonal(&d)
            })
            .collect();
        Ok(AlgebraElement { blocks })
    }
}

/// An element of a block-diagonal matrix algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    blocks: Vec<DMatrix<C64>>,
}

/// Result of [`AlgebraElement::classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub positive: bool,
    pub projection: bool,
    pub partial_isometry: bool,
    pub normal: bool,
}

/// Unitary diagonalization of one block of a normal element.
#[derive(Debug, Clone)]
pub struct BlockSpectrum {
    pub unitary: DMatrix<C64>,
    pub eigenvalues: Vec<C64>,
}

/// Per-block unitary diagonalization `a = u diag(λ) u*` of a normal element.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub blocks: Vec<BlockSpectrum>,
}

impl SpectralData {
    /// Functional calculus: `u g(diag(λ)) u*` block by block.
    pub fn map<G: Fn(C64) -> C64>(&self, g: G) -> AlgebraElement {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let d = DVector::from_iterator(b.eigenvalues.len(), b.eigenvalues.iter().map(|&l| g(l)));
                &b.unitary * DMatrix::from_diagonal(&d) * b.unitary.adjoint()
            })
            .collect();
        AlgebraElement { blocks }
    }

    pub fn reconstruct(&self) -> AlgebraElement {
        self.map(|l| l)
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        self.blocks.iter().flat_map(|b| b.eigenvalues.iter().copied()).collect()
    }

    /// Largest `||u*u - 1||` over blocks.
    pub fn unitarity_residual(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let n = b.unitary.nrows();
                spectral_norm(&(b.unitary.adjoint() * &b.unitary - DMatrix::identity(n, n)))
            })
            .fold(0.0, f64::max)
    }
}

/// Polar pieces of a normal element: `a = s |a|`, `s* a = |a|`, `s` in the
/// algebra generated by `a`.
#[derive(Debug, Clone)]
pub struct PolarNormal {
    pub partial_isometry: AlgebraElement,
    pub modulus: AlgebraElement,
}

impl AlgebraElement {
    pub fn from_blocks(blocks: Vec<DMatrix<C64>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidDescriptor("at least one block is required".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.nrows() != b.ncols() || b.nrows() == 0 {
                return Err(Error::InvalidDescriptor(format!(
                    "block {i} has shape {}x{}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn descriptor(&self) -> AlgebraDescriptor {
        AlgebraDescriptor {
            block_sizes: self.blocks.iter().map(|b| b.nrows()).collect(),
        }
    }

    pub fn matches(&self, desc: &AlgebraDescriptor) -> bool {
        self.blocks.len() == desc.block_sizes.len()
            && self.blocks.iter().zip(&desc.block_sizes).all(|(b, &n)| b.nrows() == n)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.nrows() == b.nrows())
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DescriptorMismatch(format!(
                "{:?} vs {:?}",
                self.descriptor().block_sizes,
                other.descriptor().block_sizes
            )))
        }
    }

    fn zip_with(&self, other: &Self, op: impl Fn(&DMatrix<C64>, &DMatrix<C64>) -> DMatrix<C64>) -> Self {
        Self {
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| op(a, b)).collect(),
        }
    }

    fn map_blocks(&self, op: impl Fn(&DMatrix<C64>) -> DMatrix<C64>) -> Self {
        Self {
            blocks: self.blocks.iter().map(op).collect(),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.zip_with(other, |a, b| a * b))
    }

    /// Conjugate transpose per block.
    pub fn adjoint(&self) -> Self {
        self.map_blocks(|a| a.adjoint())
    }

    pub fn scale(&self, lambda: C64) -> Self {
        self.map_blocks(|a| a * lambda)
    }

    pub fn scale_real(&self, t: f64) -> Self {
        self.map_blocks(|a| a * C64::new(t, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Operator norm: the largest singular value over all blocks.
    pub fn op_norm(&self) -> f64 {
        self.blocks.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    /// `||self - other||`.
    pub fn dist(&self, other: &Self) -> f64 {
        debug_assert!(self.same_shape(other));
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| spectral_norm(&(a - b)))
            .fold(0.0, f64::max)
    }

    /// Block-diagonal dense matrix of size `sum n_i`.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let n: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let mut out = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let k = b.nrows();
            out.view_mut((off, off), (k, k)).copy_from(b);
            off += k;
        }
        out
    }

    /// `||a* - a||`.
    pub fn hermitian_residual(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| spectral_norm(&(b.adjoint() - b)))
            .fold(0.0, f64::max)
    }

    /// `||a*a - aa*||`.
    pub fn normality_residual(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let bh = b.adjoint();
                spectral_norm(&(&bh * b - b * &bh))
            })
            .fold(0.0, f64::max)
    }

    /// `||a^2 - a||` together with the hermitian residual, maximum of both.
    pub fn projection_residual(&self) -> f64 {
        let idem = self
            .blocks
            .iter()
            .map(|b| spectral_norm(&(b * b - b)))
            .fold(0.0, f64::max);
        idem.max(self.hermitian_residual())
    }

    /// Smallest eigenvalue of the Hermitian part over all blocks.
    pub fn min_hermitian_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let h = hermitian_part(b);
                SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn classify(&self, tol: f64) -> Classification {
        let herm = self.hermitian_residual();
        let positive = herm <= tol && self.min_hermitian_eigenvalue() >= -tol;
        let projection = self.projection_residual() <= tol;
        let partial_isometry = (&self.adjoint() * self).projection_residual() <= tol;
        let norm = self.op_norm();
        let normal = self.normality_residual() <= tol * norm * norm;
        Classification {
            positive,
            projection,
            partial_isometry,
            normal,
        }
    }

    /// Unique positive square root, with [`DEFAULT_CLAMP_TOL`].
    pub fn pos_sqrt(&self) -> Result<Self> {
        self.pos_sqrt_with_tol(DEFAULT_CLAMP_TOL)
    }

    /// Positive square root by Hermitian eigendecomposition per block.
    ///
    /// The tolerance is relative to `max(1, ||a||)`: eigenvalues in
    /// `[-tol, 0)` are clamped to zero, anything below is rejected, as is a
    /// Hermitian residual above `tol`. Eigenvalues within
    /// [`NULL_EIGENVALUE_TOL`]` * ||a||` of zero are rounding noise of a null
    /// space and also map to zero; their square roots would otherwise be of
    /// order `sqrt(eps) ||a||^(1/2)`.
    pub fn pos_sqrt_with_tol(&self, tol: f64) -> Result<Self> {
        let norm = self.op_norm();
        let scale = norm.max(1.0);
        let null = NULL_EIGENVALUE_TOL * norm;
        let herm = self.hermitian_residual();
        if herm > tol * scale {
            return Err(Error::NotPositive {
                min_eigenvalue: self.min_hermitian_eigenvalue(),
                hermitian_residual: herm,
            });
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let eig = SymmetricEigen::new(hermitian_part(b));
            let mut roots = Vec::with_capacity(eig.eigenvalues.len());
            for &l in eig.eigenvalues.iter() {
                if l < -tol * scale {
                    return Err(Error::NotPositive {
                        min_eigenvalue: l,
                        hermitian_residual: herm,
                    });
                }
                let l = if l <= null { 0.0 } else { l };
                roots.push(C64::new(l.sqrt(), 0.0));
            }
            let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
            let v = &eig.eigenvectors;
            blocks.push(v * d * v.adjoint());
        }
        Ok(Self { blocks })
    }

    /// `|a| = (a*a)^{1/2}`.
    pub fn abs(&self) -> Self {
        let gram = &self.adjoint() * self;
        // a*a is positive up to rounding, so the clamp always absorbs it.
        gram.pos_sqrt()
            .expect("a*a is positive semidefinite up to rounding")
    }

    /// Unitary diagonalization of a normal element from the complex Schur form.
    ///
    /// `tol` bounds the relative normality residual `||a*a - aa*|| / ||a||^2`.
    /// The strictly upper triangular part of the Schur factor is dropped.
    pub fn spectral_decomp_normal(&self, tol: f64) -> Result<SpectralData> {
        let norm = self.op_norm();
        let residual = self.normality_residual();
        let threshold = tol * norm * norm;
        if residual > threshold {
            return Err(Error::NotNormal { residual, threshold });
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let n = b.nrows();
                if n == 1 {
                    return Ok(BlockSpectrum {
                        unitary: DMatrix::identity(1, 1),
                        eigenvalues: vec![b[(0, 0)]],
                    });
                }
                let schur = Schur::try_new(b.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
                    .ok_or(Error::NoConvergence(n))?;
                let (q, t) = schur.unpack();
                Ok(BlockSpectrum {
                    unitary: q,
                    eigenvalues: t.diagonal().iter().copied().collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralData { blocks })
    }

    /// Polar decomposition of a normal element through its spectral sign,
    /// with [`DEFAULT_NORMALITY_TOL`].
    pub fn polar_normal(&self, rank_tol: f64) -> Result<PolarNormal> {
        self.polar_normal_with(rank_tol, DEFAULT_NORMALITY_TOL)
    }

    /// `s` has eigenvalue `λ/|λ|` where `|λ| > rank_tol * ||a||` and `0`
    /// elsewhere, on the eigenvectors of `a`. Hence `s` lies in the abelian
    /// algebra generated by `a` and `s*s = ss*` is the support projection.
    pub fn polar_normal_with(&self, rank_tol: f64, normality_tol: f64) -> Result<PolarNormal> {
        let spectral = self.spectral_decomp_normal(normality_tol)?;
        let cutoff = rank_tol * self.op_norm();
        let zero = C64::new(0.0, 0.0);
        let partial_isometry = spectral.map(|l| {
            let m = l.norm();
            if m > cutoff {
                l / m
            } else {
                zero
            }
        });
        let modulus = spectral.map(|l| {
            let m = l.norm();
            if m > cutoff {
                C64::new(m, 0.0)
            } else {
                zero
            }
        });
        Ok(PolarNormal {
            partial_isometry,
            modulus,
        })
    }
}

fn hermitian_part(b: &DMatrix<C64>) -> DMatrix<C64> {
    (b + b.adjoint()) * C64::new(0.5, 0.0)
}

pub(crate) fn spectral_norm(b: &DMatrix<C64>) -> f64 {
    if b.nrows() == 1 && b.ncols() == 1 {
        return b[(0, 0)].norm();
    }
    if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return if b.iter().any(|z| z.re.is_nan() || z.im.is_nan()) { f64::NAN } else { f64::INFINITY };
    }
    b.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&AlgebraElement> for &AlgebraElement {
            type Output = AlgebraElement;

            /// Panics on block-shape mismatch; see the `checked_*` variants.
            fn $method(self, rhs: &AlgebraElement) -> AlgebraElement {
                self.$checked(rhs).expect("algebra element shapes must match")
            }
        }

        impl $trait<AlgebraElement> for AlgebraElement {
            type Output = AlgebraElement;

            fn $method(self, rhs: AlgebraElement) -> AlgebraElement {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;

    fn neg(self) -> AlgebraElement {
        self.map_blocks(|a| -a)
    }
}
