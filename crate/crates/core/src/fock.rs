//! Truncated single-mode Fock space: ladder operators, states, and the
//! one-photon feedback map.
//!
//! The basis is `{|0⟩, …, |dim−1⟩}`. Composite two-mode spaces use row-major
//! indexing `(n₁, n₂) ↦ n₁·dim₂ + n₂`, mode 1 being the slow index.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest population tolerated on the top retained level before a raising
/// operation.
pub const TRUNCATION_GUARD: f64 = 1e-10;

const KET_NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-9;

/// Number of retained Fock levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockDim(usize);

impl FockDim {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "Fock dimension must be at least 2, got {dim}"
            )));
        }
        Ok(Self(dim))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for FockDim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket(CVector);

impl Ket {
    /// Normalizes `amplitudes`; rejects the zero vector and non-finite input.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState(
                "zero vector cannot be normalized".into(),
            ));
        }
        Ok(Self(amplitudes.unscale(norm)))
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(amplitudes))
    }

    /// The number state `|n⟩` in a space of `dim` levels.
    pub fn basis(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {n} outside a space of dimension {dim}"
            )));
        }
        let mut v = CVector::zeros(dim);
        v[n] = C64::new(1.0, 0.0);
        Ok(Self(v))
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn into_amplitudes(self) -> CVector {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_normalized(&self) -> bool {
        (self.0.norm() - 1.0).abs() < KET_NORM_TOL
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix(&self.0 * self.0.adjoint())
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(elements: CMatrix) -> Result<Self> {
        if !elements.is_square() {
            return Err(Error::InvalidState(format!(
                "density matrix must be square, got {}x{}",
                elements.nrows(),
                elements.ncols()
            )));
        }
        if elements
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidState("non-finite matrix element".into()));
        }
        let herm = hermiticity_error(&elements);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian: max |ρ − ρ†| = {herm:e}"
            )));
        }
        let tr = elements.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let rho = Self(hermitize(&elements));
        let min_eig = rho.min_eigenvalue();
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "not positive: smallest eigenvalue {min_eig:e}"
            )));
        }
        Ok(rho)
    }

    /// Wraps a matrix produced by a trusted internal computation.
    pub(crate) fn from_matrix_unchecked(elements: CMatrix) -> Self {
        Self(elements)
    }

    /// Convex combination `Σ wᵢ ρᵢ`; weights must be non-negative and sum to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::InvalidArgument("empty mixture".into()));
        };
        let dim = first.dim();
        let mut acc = CMatrix::zeros(dim, dim);
        for (w, rho) in parts {
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: rho.dim(),
                });
            }
            if *w < 0.0 {
                return Err(Error::InvalidArgument(format!("negative weight {w}")));
            }
            acc += rho.matrix() * C64::new(*w, 0.0);
        }
        Self::new(acc)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `Tr ρ²`
    pub fn purity(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .0
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `Tr{ρσ}`, real part.
    pub fn overlap(&self, other: &DensityMatrix) -> Result<f64> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(trace_of_product(&self.0, &other.0).re)
    }

    /// `½ Σ |λᵢ(ρ − σ)|`
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        check_same_dim(self.dim(), other.dim())?;
        let diff = hermitize(&(&self.0 - &other.0));
        Ok(0.5
            * diff
                .symmetric_eigenvalues()
                .iter()
                .map(|l| l.abs())
                .sum::<f64>())
    }

    /// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`; reduces to `⟨ψ|σ|ψ⟩` for pure `ρ`.
    pub fn fidelity(&self, other: &DensityMatrix) -> Result<f64> {
        check_same_dim(self.dim(), other.dim())?;
        let root = psd_sqrt(&self.0);
        let inner = hermitize(&(&root * &other.0 * &root));
        let s: f64 = inner
            .symmetric_eigenvalues()
            .iter()
            .map(|l| l.max(0.0).sqrt())
            .sum();
        Ok((s * s).min(1.0))
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn expectation_in(&self, psi: &Ket) -> Result<f64> {
        check_same_dim(self.dim(), psi.dim())?;
        Ok(psi.amplitudes().dotc(&(&self.0 * psi.amplitudes())).re)
    }
}

/// Ladder operators on a truncated mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeOps {
    pub a: CMatrix,
    pub a_dag: CMatrix,
    pub n_hat: CMatrix,
    pub sqrt_n: CMatrix,
}

pub fn mode_ops(dim: FockDim) -> ModeOps {
    let d = dim.get();
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let a_dag = a.adjoint();
    let n_hat = CMatrix::from_diagonal(&CVector::from_fn(d, |n, _| C64::new(n as f64, 0.0)));
    let sqrt_n = CMatrix::from_diagonal(&CVector::from_fn(d, |n, _| {
        C64::new((n as f64).sqrt(), 0.0)
    }));
    ModeOps {
        a,
        a_dag,
        n_hat,
        sqrt_n,
    }
}

/// `(aa†)^{−1/2}`, the diagonal matrix with entries `(n+1)^{−1/2}`.
pub fn inv_sqrt_a_adag(dim: FockDim) -> CMatrix {
    let d = dim.get();
    CMatrix::from_diagonal(&CVector::from_fn(d, |n, _| {
        C64::new(1.0 / ((n + 1) as f64).sqrt(), 0.0)
    }))
}

/// Fails if the population on the top level exceeds `guard`.
pub fn check_headroom(rho: &CMatrix, guard: f64) -> Result<()> {
    let top = rho.nrows() - 1;
    let population = rho[(top, top)].re.abs();
    if population > guard {
        return Err(Error::TruncationOverflow {
            level: top,
            population,
            guard,
        });
    }
    Ok(())
}

/// Feedback superoperator `Φ(ρ) = a†(aa†)^{−1/2} ρ (aa†)^{−1/2} a` on an
/// arbitrary single-mode operator. Shifts `ρ_{n,m}` to position `(n+1, m+1)`.
pub fn apply_feedback(rho: &CMatrix, guard: f64) -> Result<CMatrix> {
    let dim = FockDim::new(rho.nrows())?;
    check_same_dim(rho.nrows(), rho.ncols())?;
    check_headroom(rho, guard)?;
    let ops = mode_ops(dim);
    let root = inv_sqrt_a_adag(dim);
    let raise = &ops.a_dag * &root;
    Ok(&raise * rho * raise.adjoint())
}

/// `Φ(ρ)` with the default truncation guard.
pub fn feedback_map(rho: &DensityMatrix) -> Result<DensityMatrix> {
    feedback_map_with_guard(rho, TRUNCATION_GUARD)
}

pub fn feedback_map_with_guard(rho: &DensityMatrix, guard: f64) -> Result<DensityMatrix> {
    apply_feedback(rho.matrix(), guard).map(DensityMatrix::from_matrix_unchecked)
}

/// Neglected Poisson weight `P(n ≥ dim)` for mean `nbar`.
pub fn poisson_tail(nbar: f64, dim: usize) -> f64 {
    if nbar == 0.0 {
        return 0.0;
    }
    // log of the first neglected term, then sum upward until terms vanish
    let log_first = -nbar + dim as f64 * nbar.ln() - ln_factorial(dim);
    let mut term = log_first.exp();
    let mut total = 0.0;
    let mut n = dim;
    while term > total * 1e-17 && term > 1e-320 {
        total += term;
        n += 1;
        term *= nbar / n as f64;
    }
    total
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Coherent state `|α⟩` truncated to `dim` levels and renormalized.
///
/// Rejected when the neglected Poisson tail exceeds [`TRUNCATION_GUARD`].
pub fn coherent_state(alpha: C64, dim: FockDim) -> Result<Ket> {
    let d = dim.get();
    let nbar = alpha.norm_sqr();
    let tail = poisson_tail(nbar, d);
    if tail > TRUNCATION_GUARD {
        return Err(Error::InvalidArgument(format!(
            "|alpha|^2 = {nbar} too large for dim = {d}: truncated Poisson weight {tail:e}"
        )));
    }
    let mut v = CVector::zeros(d);
    let mut amp = C64::new(1.0, 0.0);
    v[0] = amp;
    for n in 1..d {
        amp *= alpha / (n as f64).sqrt();
        v[n] = amp;
    }
    Ket::new(v)
}

/// Which factor of a two-mode tensor product an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    First,
    Second,
}

/// `op ⊗ I` or `I ⊗ op` in row-major composite indexing.
pub fn tensor_embed(op: &CMatrix, mode: Mode, dims: (FockDim, FockDim)) -> Result<CMatrix> {
    let (d1, d2) = (dims.0.get(), dims.1.get());
    let expected = match mode {
        Mode::First => d1,
        Mode::Second => d2,
    };
    if op.nrows() != expected || op.ncols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: op.nrows().max(op.ncols()),
        });
    }
    Ok(match mode {
        Mode::First => op.kronecker(&CMatrix::identity(d2, d2)),
        Mode::Second => CMatrix::identity(d1, d1).kronecker(op),
    })
}

/// Composite index of `|n₁, n₂⟩`.
pub fn composite_index(n1: usize, n2: usize, dim2: usize) -> usize {
    n1 * dim2 + n2
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).unscale(2.0)
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `Tr{AB}` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let eig = hermitize(m).symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * CMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
