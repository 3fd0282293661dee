//! Feedback master equation
//!
//! ```text
//! ρ̇ = ηγ Φ(aρa†) + (1−η)γ aρa† − (γ/2){a†a, ρ}
//!   = ηγ √n̂ ρ √n̂ + (1−η)γ aρa† − (γ/2){a†a, ρ}
//! ```
//!
//! integrated with fixed-step RK4, together with the closed-form propagators
//! used as oracles (ideal feedback, standard phase diffusion, pure vacuum
//! damping) and the coherent-amplitude decay estimates.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{hermitize, CMatrix, DensityMatrix};

/// Default RK4 step in units of `1/γ`.
pub const DEFAULT_DT_GAMMA: f64 = 1e-3;

/// Cavity decay rate and detection efficiency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeedbackParams {
    gamma: f64,
    eta: f64,
}

impl FeedbackParams {
    pub fn new(gamma: f64, eta: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be > 0, got {gamma}"
            )));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidArgument(format!(
                "eta must lie in [0, 1], got {eta}"
            )));
        }
        Ok(Self { gamma, eta })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub trace_tolerance: f64,
    /// Number of equally spaced output samples, endpoints included.
    pub sample_points: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_final,
            trace_tolerance: 1e-8,
            sample_points: 2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default step `1e−3/γ` over the horizon `gamma_t/γ`.
    pub fn for_gamma_t(p: &FeedbackParams, gamma_t: f64) -> Result<Self> {
        Self::new(DEFAULT_DT_GAMMA / p.gamma(), gamma_t / p.gamma())
    }

    pub fn with_samples(mut self, sample_points: usize) -> Result<Self> {
        self.sample_points = sample_points;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "t_final must be >= 0, got {}",
                self.t_final
            )));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(Error::InvalidArgument(format!(
                "dt = {} exceeds t_final = {}",
                self.dt, self.t_final
            )));
        }
        if self.trace_tolerance.is_nan() || self.trace_tolerance <= 0.0 {
            return Err(Error::InvalidArgument("trace_tolerance must be > 0".into()));
        }
        if self.sample_points == 0 {
            return Err(Error::InvalidArgument("sample_points must be >= 1".into()));
        }
        Ok(())
    }

    /// Step count and the effective step that lands exactly on `t_final`.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_final == 0.0 {
            return (0, self.dt);
        }
        let n = ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }

    /// Step indices at which samples are recorded.
    pub fn sample_steps(&self) -> Vec<usize> {
        let (n, _) = self.steps();
        if n == 0 || self.sample_points == 1 {
            return vec![n];
        }
        let intervals = self.sample_points - 1;
        (0..self.sample_points)
            .map(|k| (k * n + intervals / 2) / intervals)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffusionKind {
    SquareRoot,
    Standard,
}

/// Sampled solution of the master equation.
#[derive(Clone, Debug)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Solution {
    pub fn last(&self) -> &DensityMatrix {
        self.states
            .last()
            .expect("solution holds at least one sample")
    }
}

/// The feedback generator on a product of independent modes sharing the same
/// `FeedbackParams`, applied elementwise:
///
/// `ρ̇_{n,m} = Σ_modes [ηγ√(nm) − (γ/2)(n+m)] ρ_{n,m} + (1−η)γ√((n+1)(m+1)) ρ_{n+1,m+1}`
#[derive(Clone, Debug)]
pub struct FeedbackGenerator {
    dims: Vec<usize>,
    size: usize,
    local: Vec<f64>,
    // (target, source, coefficient) in column-major flat indexing
    inflow: Vec<(usize, usize, f64)>,
}

impl FeedbackGenerator {
    pub fn single_mode(dim: usize, p: &FeedbackParams) -> Self {
        Self::product(&[dim], p)
    }

    /// Generator `L⊗id + id⊗L + …` on the row-major product of `dims`.
    pub fn product(dims: &[usize], p: &FeedbackParams) -> Self {
        let size: usize = dims.iter().product();
        let (gamma, eta) = (p.gamma(), p.eta());
        let strides: Vec<usize> = (0..dims.len())
            .map(|j| dims[j + 1..].iter().product())
            .collect();
        let digits = |idx: usize, j: usize| (idx / strides[j]) % dims[j];

        let mut local = vec![0.0; size * size];
        let mut inflow = Vec::new();
        for col in 0..size {
            for row in 0..size {
                let flat = col * size + row;
                let mut rate = 0.0;
                for j in 0..dims.len() {
                    let (n, m) = (digits(row, j) as f64, digits(col, j) as f64);
                    rate += eta * gamma * (n * m).sqrt() - 0.5 * gamma * (n + m);
                    let coef = (1.0 - eta) * gamma * ((n + 1.0) * (m + 1.0)).sqrt();
                    if coef != 0.0 && digits(row, j) + 1 < dims[j] && digits(col, j) + 1 < dims[j] {
                        let source = (col + strides[j]) * size + row + strides[j];
                        inflow.push((flat, source, coef));
                    }
                }
                local[flat] = rate;
            }
        }
        Self {
            dims: dims.to_vec(),
            size,
            local,
            inflow,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn apply_into(&self, rho: &CMatrix, out: &mut CMatrix) {
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        for ((d, s), r) in dst.iter_mut().zip(src).zip(&self.local) {
            *d = s * r;
        }
        for &(target, source, coef) in &self.inflow {
            dst[target] += src[source] * coef;
        }
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.size || rho.ncols() != self.size {
            return Err(Error::DimensionMismatch {
                expected: self.size,
                found: rho.nrows(),
            });
        }
        let mut out = CMatrix::zeros(self.size, self.size);
        self.apply_into(rho, &mut out);
        Ok(out)
    }
}

/// `dρ/dt` for a single mode.
pub fn rhs(rho: &DensityMatrix, p: &FeedbackParams) -> Result<CMatrix> {
    FeedbackGenerator::single_mode(rho.dim(), p).apply(rho.matrix())
}

/// RK4 over a Hermitian operator. The trace of `m0` is the reference for the
/// drift guard, so traceless inputs are allowed.
pub fn integrate_operator(
    generator: &FeedbackGenerator,
    m0: &CMatrix,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<CMatrix>)> {
    cfg.validate()?;
    if m0.nrows() != generator.size() || m0.ncols() != generator.size() {
        return Err(Error::DimensionMismatch {
            expected: generator.size(),
            found: m0.nrows(),
        });
    }
    let (n_steps, dt) = cfg.steps();
    let samples = cfg.sample_steps();
    let trace0 = m0.trace();
    let size = generator.size();

    let mut times = Vec::with_capacity(samples.len());
    let mut states = Vec::with_capacity(samples.len());
    let mut next_sample = 0;
    let mut state = m0.clone();
    record_samples(
        &samples,
        &mut next_sample,
        0,
        dt,
        &state,
        &mut times,
        &mut states,
    );

    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);
    let mut k1 = CMatrix::zeros(size, size);
    let mut k2 = CMatrix::zeros(size, size);
    let mut k3 = CMatrix::zeros(size, size);
    let mut k4 = CMatrix::zeros(size, size);
    for step in 1..=n_steps {
        generator.apply_into(&state, &mut k1);
        generator.apply_into(&(&state + &k1 * half), &mut k2);
        generator.apply_into(&(&state + &k2 * half), &mut k3);
        generator.apply_into(&(&state + &k3 * full), &mut k4);
        let incr = (&k1 + (&k2 + &k3) * C64::new(2.0, 0.0) + &k4) * sixth;
        state = hermitize(&(state + incr));

        let t = step as f64 * dt;
        let drift = (state.trace() - trace0).norm();
        if !drift.is_finite() {
            return Err(Error::NonFinite { t });
        }
        if drift > cfg.trace_tolerance {
            return Err(Error::TraceDrift {
                t,
                drift,
                tolerance: cfg.trace_tolerance,
            });
        }
        if samples.get(next_sample) == Some(&step) {
            if state.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite { t });
            }
            record_samples(
                &samples,
                &mut next_sample,
                step,
                dt,
                &state,
                &mut times,
                &mut states,
            );
        }
    }
    Ok((times, states))
}

/// Integrates the single-mode feedback master equation from `rho0`.
pub fn integrate(
    rho0: &DensityMatrix,
    p: &FeedbackParams,
    cfg: &IntegratorConfig,
) -> Result<Solution> {
    let generator = FeedbackGenerator::single_mode(rho0.dim(), p);
    let (times, states) = integrate_operator(&generator, rho0.matrix(), cfg)?;
    Ok(Solution {
        times,
        states: states
            .into_iter()
            .map(DensityMatrix::from_matrix_unchecked)
            .collect(),
    })
}

fn record_samples(
    samples: &[usize],
    next: &mut usize,
    step: usize,
    dt: f64,
    m: &CMatrix,
    times: &mut Vec<f64>,
    states: &mut Vec<CMatrix>,
) {
    while *next < samples.len() && samples[*next] == step {
        times.push(step as f64 * dt);
        states.push(m.clone());
        *next += 1;
    }
}

fn check_gamma_t(gamma_t: f64) -> Result<()> {
    if !(gamma_t.is_finite() && gamma_t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma_t must be >= 0, got {gamma_t}"
        )));
    }
    Ok(())
}

/// Closed-form pure-dephasing evolution: `ρ_{n,m}` is damped by
/// `exp{−(γt/2)(√n−√m)²}` (ideal feedback) or `exp{−(γt/2)(n−m)²}`
/// (standard phase diffusion).
pub fn propagate_analytic(
    rho0: &DensityMatrix,
    kind: DiffusionKind,
    gamma_t: f64,
) -> Result<DensityMatrix> {
    check_gamma_t(gamma_t)?;
    let d = rho0.dim();
    let m = CMatrix::from_fn(d, d, |n, k| {
        let (n, k) = (n as f64, k as f64);
        let gap = match kind {
            DiffusionKind::SquareRoot => n.sqrt() - k.sqrt(),
            DiffusionKind::Standard => n - k,
        };
        rho0.matrix()[(n as usize, k as usize)] * (-0.5 * gamma_t * gap * gap).exp()
    });
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Exact η = 0 solution (vacuum-bath damping):
///
/// `ρ_{n,m}(t) = e^{−γt(n+m)/2} Σ_k √(C(n+k,k) C(m+k,k)) (1−e^{−γt})^k ρ_{n+k,m+k}(0)`
pub fn damped_cavity_analytic(rho0: &DensityMatrix, gamma_t: f64) -> Result<DensityMatrix> {
    check_gamma_t(gamma_t)?;
    let d = rho0.dim();
    let survive = (-gamma_t).exp();
    let lost = -(-gamma_t).exp_m1();
    let rho = rho0.matrix();
    let m = CMatrix::from_fn(d, d, |n, m| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..d - n.max(m) {
            let weight = (binomial(n + k, k) * binomial(m + k, k)).sqrt() * lost.powi(k as i32);
            acc += rho[(n + k, m + k)] * weight;
        }
        acc * survive.powf(0.5 * (n + m) as f64)
    });
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Decay rate `γ[(n+m)/2 − η√(nm)]` of `ρ_{n,m}` in the absence of in-flow.
pub fn offdiag_rate(n: usize, m: usize, p: &FeedbackParams) -> f64 {
    let (n, m) = (n as f64, m as f64);
    p.gamma() * (0.5 * (n + m) - p.eta() * (n * m).sqrt())
}

/// Exponents `(√n−√m)²` and `(n−m)²` of the two dephasing laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayExponents {
    pub square_root: f64,
    pub standard: f64,
}

impl DecayExponents {
    pub fn is_ordered(&self) -> bool {
        self.square_root <= self.standard
    }
}

pub fn decay_inequality_check(n: u64, m: u64) -> DecayExponents {
    let root_gap = (n as f64).sqrt() - (m as f64).sqrt();
    let gap = n.abs_diff(m);
    let out = DecayExponents {
        square_root: root_gap * root_gap,
        standard: (gap * gap) as f64,
    };
    debug_assert!(
        out.is_ordered(),
        "({n}, {m}) violates the dephasing ordering"
    );
    out
}

/// `⟨a⟩ = Σₙ √(n+1) ρ_{n+1,n}`
pub fn mean_amplitude(rho: &DensityMatrix) -> C64 {
    let m = rho.matrix();
    (0..rho.dim() - 1)
        .map(|n| m[(n + 1, n)] * ((n + 1) as f64).sqrt())
        .sum()
}

/// `⟨n̂⟩`
pub fn mean_photon_number(rho: &DensityMatrix) -> f64 {
    rho.populations()
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

/// Amplitude decay factors at a given `γt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudeDecay {
    /// `exp{−(γt/2)(√(n̄+1)−√n̄)²}` from factorized averages.
    pub factorized: f64,
    /// `exp{−γt/(8n̄)}`, the large-`n̄` limit.
    pub large_nbar: f64,
    /// `exp{−γt/2}` under standard phase diffusion.
    pub ordinary: f64,
}

pub fn semiclassical_amplitude(nbar: f64, gamma_t: f64) -> Result<AmplitudeDecay> {
    check_gamma_t(gamma_t)?;
    if !(nbar.is_finite() && nbar > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "nbar must be > 0, got {nbar}"
        )));
    }
    let gap = (nbar + 1.0).sqrt() - nbar.sqrt();
    Ok(AmplitudeDecay {
        factorized: (-0.5 * gamma_t * gap * gap).exp(),
        large_nbar: (-gamma_t / (8.0 * nbar)).exp(),
        ordinary: (-0.5 * gamma_t).exp(),
    })
}
