//! Polarization-coded qubits `α|n,m⟩ + β|m,n⟩` on two independently
//! fed-back cavity modes, and their minimum fidelity.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{
    composite_index, trace_of_product, CMatrix, CVector, DensityMatrix, FockDim, Ket,
};
use crate::liouville::{integrate_operator, FeedbackGenerator, FeedbackParams, IntegratorConfig};

/// Photon-number headroom added above `max(n, m)` on each mode.
pub const DEFAULT_HEADROOM: usize = 3;

/// Default search bound on `n + m`.
pub const DEFAULT_SEARCH_BOUND: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitSpec {
    n: usize,
    m: usize,
    alpha: C64,
    beta: C64,
}

impl QubitSpec {
    pub fn new(n: usize, m: usize, alpha: C64, beta: C64) -> Result<Self> {
        if n == m {
            return Err(Error::InvalidArgument(format!(
                "qubit photon numbers must differ, got n = m = {n}"
            )));
        }
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "|alpha|^2 + |beta|^2 = {norm}, expected 1"
            )));
        }
        Ok(Self { n, m, alpha, beta })
    }

    /// Rescales `(alpha, beta)` to unit norm.
    pub fn normalized(n: usize, m: usize, alpha: C64, beta: C64) -> Result<Self> {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument(
                "alpha and beta cannot both vanish".into(),
            ));
        }
        Self::new(n, m, alpha / norm, beta / norm)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    /// `α|m,n⟩ + β|n,m⟩`, the image of this qubit under exchange of the modes.
    pub fn swapped(&self) -> Self {
        Self {
            n: self.m,
            m: self.n,
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// `(max(n,m) + 3)` levels on each mode.
pub fn default_dims(n: usize, m: usize) -> (FockDim, FockDim) {
    let d = FockDim::new(n.max(m) + DEFAULT_HEADROOM).expect("at least 3 levels");
    (d, d)
}

/// A state on the row-major product of two modes.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeState {
    pub dims: (FockDim, FockDim),
    pub rho: DensityMatrix,
}

impl TwoModeState {
    pub fn new(dims: (FockDim, FockDim), rho: DensityMatrix) -> Result<Self> {
        let size = dims.0.get() * dims.1.get();
        if rho.dim() != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                found: rho.dim(),
            });
        }
        Ok(Self { dims, rho })
    }

    pub fn product(a: &DensityMatrix, b: &DensityMatrix) -> Result<Self> {
        let dims = (FockDim::new(a.dim())?, FockDim::new(b.dim())?);
        let rho = DensityMatrix::new(a.matrix().kronecker(b.matrix()))?;
        Self::new(dims, rho)
    }

    /// Reduced state of mode 1 (`first = true`) or mode 2.
    pub fn reduced(&self, first: bool) -> DensityMatrix {
        let (d1, d2) = (self.dims.0.get(), self.dims.1.get());
        let m = self.rho.matrix();
        let out = if first {
            CMatrix::from_fn(d1, d1, |i, j| {
                (0..d2).map(|k| m[(i * d2 + k, j * d2 + k)]).sum()
            })
        } else {
            CMatrix::from_fn(d2, d2, |i, j| {
                (0..d1).map(|k| m[(k * d2 + i, k * d2 + j)]).sum()
            })
        };
        DensityMatrix::from_matrix_unchecked(out)
    }

    /// Exchanges the two modes.
    pub fn swap_modes(&self) -> Self {
        let (d1, d2) = (self.dims.0.get(), self.dims.1.get());
        let perm = |i: usize| (i % d2) * d1 + i / d2;
        let m = self.rho.matrix();
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(perm(i), perm(j))] = m[(i, j)];
            }
        }
        Self {
            dims: (self.dims.1, self.dims.0),
            rho: DensityMatrix::from_matrix_unchecked(out),
        }
    }
}

fn check_headroom(spec: &QubitSpec, dims: (FockDim, FockDim)) -> Result<()> {
    let needed = spec.n.max(spec.m) + 1;
    let available = dims.0.get().min(dims.1.get());
    if needed >= available {
        return Err(Error::InvalidArgument(format!(
            "qubit ({}, {}) needs more than {needed} levels per mode, got {available}",
            spec.n, spec.m
        )));
    }
    Ok(())
}

/// `α|n,m⟩ + β|m,n⟩` as a ket.
pub fn qubit_ket(spec: &QubitSpec, dims: (FockDim, FockDim)) -> Result<Ket> {
    check_headroom(spec, dims)?;
    let d2 = dims.1.get();
    let mut v = CVector::zeros(dims.0.get() * d2);
    v[composite_index(spec.n, spec.m, d2)] = spec.alpha;
    v[composite_index(spec.m, spec.n, d2)] = spec.beta;
    Ket::new(v)
}

pub fn make_qubit(spec: &QubitSpec, dims: (FockDim, FockDim)) -> Result<TwoModeState> {
    let ket = qubit_ket(spec, dims)?;
    TwoModeState::new(dims, ket.projector())
}

/// Evolves both modes under independent copies of the feedback generator,
/// with the default step `1e−3/γ`.
pub fn evolve_two_mode(
    state: &TwoModeState,
    p: &FeedbackParams,
    gamma_t: f64,
) -> Result<TwoModeState> {
    evolve_two_mode_with(state, p, &IntegratorConfig::for_gamma_t(p, gamma_t)?)
}

pub fn evolve_two_mode_with(
    state: &TwoModeState,
    p: &FeedbackParams,
    cfg: &IntegratorConfig,
) -> Result<TwoModeState> {
    let generator = FeedbackGenerator::product(&[state.dims.0.get(), state.dims.1.get()], p);
    let cfg = IntegratorConfig {
        sample_points: 1,
        ..*cfg
    };
    let (_, mut states) = integrate_operator(&generator, state.rho.matrix(), &cfg)?;
    let rho = states.pop().expect("final sample");
    Ok(TwoModeState {
        dims: state.dims,
        rho: DensityMatrix::from_matrix_unchecked(rho),
    })
}

/// `F = Tr{ρ(0) ρ(t)}`
pub fn fidelity(initial: &TwoModeState, evolved: &TwoModeState) -> Result<f64> {
    if initial.dims != evolved.dims {
        return Err(Error::DimensionMismatch {
            expected: initial.rho.dim(),
            found: evolved.rho.dim(),
        });
    }
    Ok(trace_of_product(initial.rho.matrix(), evolved.rho.matrix()).re)
}

/// `½(e^{−(1−η)γt(n+m)} + e^{−γt(n+m−2η√(nm))})`
pub fn min_fidelity_closed(n: usize, m: usize, eta: f64, gamma_t: f64) -> Result<f64> {
    if n == m {
        return Err(Error::InvalidArgument("n and m must differ".into()));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!(
            "eta must lie in [0, 1], got {eta}"
        )));
    }
    if gamma_t.is_nan() || gamma_t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "gamma_t must be >= 0, got {gamma_t}"
        )));
    }
    let total = (n + m) as f64;
    let cross = 2.0 * eta * ((n * m) as f64).sqrt();
    Ok(0.5 * ((-(1.0 - eta) * gamma_t * total).exp() + (-gamma_t * (total - cross)).exp()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinFidelity {
    pub value: f64,
    /// `|α|²` at the minimum.
    pub alpha_sq: f64,
    /// Relative phase `arg β − arg α` at the minimum.
    pub phase: f64,
    pub alpha: C64,
    pub beta: C64,
}

/// Matrix elements `⟨i|O|j⟩` on `{|n,m⟩, |m,n⟩}`.
type Block = [[C64; 2]; 2];

fn block_of(op: &CMatrix, idx: [usize; 2]) -> Block {
    [
        [op[(idx[0], idx[0])], op[(idx[0], idx[1])]],
        [op[(idx[1], idx[0])], op[(idx[1], idx[1])]],
    ]
}

fn quadratic(b: &Block, alpha: C64, beta: C64) -> f64 {
    (alpha.conj() * alpha * b[0][0]
        + alpha.conj() * beta * b[0][1]
        + beta.conj() * alpha * b[1][0]
        + beta.conj() * beta * b[1][1])
        .re
}

/// Evolved images of the four Hermitian pieces of a qubit projector,
/// restricted to `{|n,m⟩, |m,n⟩}`.
///
/// `|ψ⟩⟨ψ| = |α|² P₁ + |β|² P₂ + Re(αβ*) X + Im(αβ*) Y` with `X = C + C†`,
/// `Y = i(C − C†)`, `C = |n,m⟩⟨m,n|`. The generator is linear, so every
/// qubit's `ρ(t)` is the same combination of the evolved pieces.
#[derive(Clone, Debug)]
pub struct EvolvedQubitBasis {
    pub t: f64,
    blocks: [Block; 4],
}

impl EvolvedQubitBasis {
    /// `F(t) = ⟨ψ|ρ(t)|ψ⟩` for `ψ = α|n,m⟩ + β|m,n⟩`.
    pub fn fidelity(&self, alpha: C64, beta: C64) -> f64 {
        let z = alpha * beta.conj();
        let coeffs = [alpha.norm_sqr(), beta.norm_sqr(), z.re, z.im];
        coeffs
            .iter()
            .zip(&self.blocks)
            .map(|(c, b)| c * quadratic(b, alpha, beta))
            .sum()
    }

    /// Grid minimum over `grid + 1` values of `|α|² ∈ [0, 1]` and `grid`
    /// relative phases in `[0, 2π)`.
    pub fn minimize(&self, grid: usize) -> MinFidelity {
        let mut best: Option<MinFidelity> = None;
        for i in 0..=grid {
            let alpha_sq = i as f64 / grid as f64;
            let alpha = C64::new(alpha_sq.sqrt(), 0.0);
            for k in 0..grid {
                let phase = std::f64::consts::TAU * k as f64 / grid as f64;
                let beta = C64::from_polar((1.0 - alpha_sq).sqrt(), phase);
                let value = self.fidelity(alpha, beta);
                if best.is_none_or(|b| value < b.value) {
                    best = Some(MinFidelity {
                        value,
                        alpha_sq,
                        phase,
                        alpha,
                        beta,
                    });
                }
            }
        }
        best.expect("non-empty grid")
    }
}

/// Integrates the qubit pieces for `(n, m)` on the default dims, returning one
/// [`EvolvedQubitBasis`] per sample of `cfg`.
pub fn evolve_qubit_basis(
    n: usize,
    m: usize,
    p: &FeedbackParams,
    cfg: &IntegratorConfig,
) -> Result<Vec<EvolvedQubitBasis>> {
    if n == m {
        return Err(Error::InvalidArgument("n and m must differ".into()));
    }
    let dims = default_dims(n, m);
    let d2 = dims.1.get();
    let size = dims.0.get() * d2;
    let idx = [composite_index(n, m, d2), composite_index(m, n, d2)];

    let unit = C64::new(1.0, 0.0);
    let mut pieces = vec![CMatrix::zeros(size, size); 4];
    pieces[0][(idx[0], idx[0])] = unit;
    pieces[1][(idx[1], idx[1])] = unit;
    pieces[2][(idx[0], idx[1])] = unit;
    pieces[2][(idx[1], idx[0])] = unit;
    pieces[3][(idx[0], idx[1])] = C64::new(0.0, 1.0);
    pieces[3][(idx[1], idx[0])] = C64::new(0.0, -1.0);

    let generator = FeedbackGenerator::product(&[dims.0.get(), d2], p);
    let evolved: Vec<(Vec<f64>, Vec<CMatrix>)> = pieces
        .par_iter()
        .map(|op| integrate_operator(&generator, op, cfg))
        .collect::<Result<_>>()?;

    let times = &evolved[0].0;
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| EvolvedQubitBasis {
            t,
            blocks: [0, 1, 2, 3].map(|j| block_of(&evolved[j].1[k], idx)),
        })
        .collect())
}

/// Numerical minimum fidelity at `gamma_t` over a grid of qubits (see
/// [`EvolvedQubitBasis::minimize`]), using the default step `1e−3/γ`.
pub fn min_fidelity_numeric(
    n: usize,
    m: usize,
    p: &FeedbackParams,
    gamma_t: f64,
    grid: usize,
) -> Result<MinFidelity> {
    if grid < 64 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be >= 64, got {grid}"
        )));
    }
    let cfg = IntegratorConfig {
        sample_points: 1,
        ..IntegratorConfig::for_gamma_t(p, gamma_t)?
    };
    let mut basis = evolve_qubit_basis(n, m, p, &cfg)?;
    Ok(basis.pop().expect("final sample").minimize(grid))
}

/// Best-protected `(n, m)` with `0 ≤ m < n`, `n + m ≤ bound`, by closed-form
/// minimum fidelity; ties go to the smaller `n + m`.
pub fn optimal_qubit(eta: f64, gamma_t: f64, bound: usize) -> Result<(usize, usize, f64)> {
    if bound < 1 {
        return Err(Error::InvalidArgument("search bound must be >= 1".into()));
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for total in 1..=bound {
        for m in 0..=(total - 1) / 2 {
            let n = total - m;
            if n == m {
                continue;
            }
            let f = min_fidelity_closed(n, m, eta, gamma_t)?;
            if best.is_none_or(|(_, _, b)| f > b) {
                best = Some((n, m, f));
            }
        }
    }
    Ok(best.expect("bound >= 1 yields a candidate"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorScaling {
    /// `½(e^{−(1−η)γt} + e^{−γt})`
    pub exact: f64,
    /// `1 − γt(1 − η/2)`
    pub linear: f64,
}

/// Short-time minimum fidelity of the one-photon qubit, valid for `γt ≤ 0.2`.
pub fn error_probability_scaling(eta: f64, gamma_t: f64) -> Result<ErrorScaling> {
    if !(0.0..=0.2).contains(&gamma_t) {
        return Err(Error::InvalidArgument(format!(
            "short-time scaling needs 0 <= gamma_t <= 0.2, got {gamma_t}"
        )));
    }
    Ok(ErrorScaling {
        exact: min_fidelity_closed(1, 0, eta, gamma_t)?,
        linear: 1.0 - gamma_t * (1.0 - 0.5 * eta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn spec_validation() {
        assert!(QubitSpec::new(1, 1, c(1.0), c(0.0)).is_err());
        assert!(QubitSpec::new(0, 1, c(1.0), c(1.0)).is_err());
        assert!(QubitSpec::normalized(0, 1, c(1.0), c(1.0)).is_ok());
    }

    #[test]
    fn basis_qubits() {
        let dims = default_dims(0, 1);
        let a = qubit_ket(&QubitSpec::new(0, 1, c(1.0), c(0.0)).unwrap(), dims).unwrap();
        assert_eq!(a, Ket::basis(16, composite_index(0, 1, 4)).unwrap());
        let b = qubit_ket(&QubitSpec::new(0, 1, c(0.0), c(1.0)).unwrap(), dims).unwrap();
        assert_eq!(a.inner(&b), c(0.0));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let shared = qubit_ket(&QubitSpec::new(0, 1, c(h), c(h)).unwrap(), dims).unwrap();
        assert_abs_diff_eq!(shared.amplitudes().norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn headroom_is_enforced() {
        let spec = QubitSpec::new(2, 0, c(1.0), c(0.0)).unwrap();
        let small = (FockDim::new(3).unwrap(), FockDim::new(3).unwrap());
        assert!(make_qubit(&spec, small).is_err());
    }

    #[test]
    fn closed_form_values() {
        assert_abs_diff_eq!(
            min_fidelity_closed(0, 1, 0.0, 0.1).unwrap(),
            (-0.1f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            min_fidelity_closed(0, 1, 0.0, 0.1).unwrap(),
            0.904_837,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            min_fidelity_closed(0, 1, 0.5, 0.1).unwrap(),
            0.928_033,
            epsilon = 1e-6
        );
        // ½(1 + e^{−(√2−1)²}) = 0.92116944…
        assert_abs_diff_eq!(
            min_fidelity_closed(1, 2, 1.0, 1.0).unwrap(),
            0.921_169_440_061_77,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            min_fidelity_closed(2, 3, 0.5, 0.2).unwrap(),
            0.603_482_480_105_586,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            min_fidelity_closed(3, 5, 0.4, 0.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn short_time_scaling() {
        let s = error_probability_scaling(0.0, 0.1).unwrap();
        assert_abs_diff_eq!(s.linear, 0.9, epsilon = 1e-15);
        let s = error_probability_scaling(1.0, 0.1).unwrap();
        assert_abs_diff_eq!(s.exact, 0.952_419, epsilon = 1e-6);
        assert_abs_diff_eq!(s.linear, 0.95, epsilon = 1e-15);
        let s = error_probability_scaling(0.5, 0.1).unwrap();
        assert_abs_diff_eq!(s.linear, 0.925, epsilon = 1e-15);
        assert!(error_probability_scaling(0.5, 0.3).is_err());
        for gt in [0.2, 0.1, 0.05, 0.025] {
            let s = error_probability_scaling(0.7, gt).unwrap();
            assert!((s.exact - s.linear).abs() <= gt * gt);
        }
    }

    #[test]
    fn single_photon_qubit_loses_to_vacuum() {
        let p = FeedbackParams::new(1.0, 0.0).unwrap();
        let dims = default_dims(0, 1);
        let q = make_qubit(&QubitSpec::new(0, 1, c(1.0), c(0.0)).unwrap(), dims).unwrap();
        for gt in [0.3, 1.0] {
            let out = evolve_two_mode(&q, &p, gt).unwrap();
            let vac = out.rho.matrix()[(0, 0)].re;
            assert_abs_diff_eq!(vac, 1.0 - (-gt).exp(), epsilon = 1e-8);
        }
    }

    #[test]
    fn identity_at_zero_time() {
        let p = FeedbackParams::new(1.0, 0.3).unwrap();
        let q = make_qubit(
            &QubitSpec::normalized(2, 1, c(0.6), C64::new(0.0, 0.8)).unwrap(),
            default_dims(2, 1),
        )
        .unwrap();
        assert_eq!(evolve_two_mode(&q, &p, 0.0).unwrap(), q);
        assert_abs_diff_eq!(fidelity(&q, &q).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn optimal_search() {
        let (n, m, _) = optimal_qubit(0.8, 0.05, 7).unwrap();
        assert_eq!((n, m), (1, 0));
        for gt in [0.01, 0.3, 2.0] {
            let (n, m, _) = optimal_qubit(0.0, gt, 7).unwrap();
            assert_eq!((n, m), (1, 0));
        }
        let (n, m, _) = optimal_qubit(1.0, 0.1, 21).unwrap();
        assert_eq!((n, m), (11, 10));
    }
}
