//! Monte-Carlo wavefunction unraveling of the feedback master equation.
//!
//! Two jump channels: a detected photon triggers the feedback atom, so the
//! net jump is `Φ ∘ a ∝ √n̂`; an undetected photon is ordinary loss `a`.
//! Their `C†C` both reduce to multiples of `n̂`, so the no-jump drift is
//! `exp{−γ t n̂/2}` independently of `η`.
//!
//! Every trajectory owns a ChaCha stream selected by `(master_seed,
//! traj_index)`, and ensembles are reduced over fixed-size blocks in index
//! order, so results do not depend on the number of worker threads.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{mode_ops, CMatrix, CVector, DensityMatrix, FockDim, Ket};
use crate::liouville::FeedbackParams;

/// Largest per-step jump probability accepted by the first-order scheme.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

const ENSEMBLE_BLOCK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelLabel {
    FeedbackDetection,
    UndetectedLoss,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpChannel {
    pub label: ChannelLabel,
    /// Jump operator including its rate, `√(rate)·L`.
    pub operator: CMatrix,
}

/// `√(ηγ)·√n̂` and `√((1−η)γ)·a`. Both channels are always present; one may
/// be the zero operator at `η ∈ {0, 1}`.
pub fn jump_channels(p: &FeedbackParams, dim: FockDim) -> Vec<JumpChannel> {
    let ops = mode_ops(dim);
    let detected = (p.eta() * p.gamma()).sqrt();
    let undetected = ((1.0 - p.eta()) * p.gamma()).sqrt();
    vec![
        JumpChannel {
            label: ChannelLabel::FeedbackDetection,
            operator: ops.sqrt_n * C64::new(detected, 0.0),
        },
        JumpChannel {
            label: ChannelLabel::UndetectedLoss,
            operator: ops.a * C64::new(undetected, 0.0),
        },
    ]
}

/// `Σ_k C_k ρ C_k† − ½{C_k†C_k, ρ}`
pub fn lindblad_rhs(channels: &[JumpChannel], rho: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
    for ch in channels {
        let c = &ch.operator;
        let cdc = c.adjoint() * c;
        out += c * rho * c.adjoint() - (&cdc * rho + rho * &cdc) * C64::new(0.5, 0.0);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub n_traj: usize,
    pub master_seed: u64,
    pub dt: f64,
    pub t_final: f64,
    pub sample_times: Vec<f64>,
}

impl TrajectoryConfig {
    pub fn new(
        n_traj: usize,
        master_seed: u64,
        dt: f64,
        t_final: f64,
        sample_times: Vec<f64>,
    ) -> Result<Self> {
        let cfg = Self {
            n_traj,
            master_seed,
            dt,
            t_final,
            sample_times,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `points` equally spaced sample times over `[0, t_final]`.
    pub fn evenly_sampled(
        n_traj: usize,
        master_seed: u64,
        dt: f64,
        t_final: f64,
        points: usize,
    ) -> Result<Self> {
        let times = match points {
            0 => Vec::new(),
            1 => vec![t_final],
            _ => (0..points)
                .map(|k| t_final * k as f64 / (points - 1) as f64)
                .collect(),
        };
        Self::new(n_traj, master_seed, dt, t_final, times)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::InvalidArgument("n_traj must be >= 1".into()));
        }
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
        if self.sample_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument(
                "sample_times must be ascending".into(),
            ));
        }
        if let Some(t) = self
            .sample_times
            .iter()
            .find(|t| !(0.0..=self.t_final).contains(*t))
        {
            return Err(Error::InvalidArgument(format!(
                "sample time {t} outside [0, {}]",
                self.t_final
            )));
        }
        Ok(())
    }

    /// Step count and effective step landing exactly on `t_final`.
    pub fn steps(&self) -> (usize, f64) {
        if self.t_final == 0.0 {
            return (0, self.dt);
        }
        let n = ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }

    fn sample_steps(&self) -> Vec<usize> {
        let (n, dt) = self.steps();
        self.sample_times
            .iter()
            .map(|t| ((t / dt).round() as usize).min(n))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub t: f64,
    pub channel: ChannelLabel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub jumps: Vec<JumpEvent>,
    pub sampled_states: Vec<Ket>,
}

/// `C†C`, kept diagonal when it is.
#[derive(Clone, Debug)]
enum Positive {
    Diagonal(Vec<f64>),
    Dense(CMatrix),
}

impl Positive {
    fn new(m: CMatrix) -> Self {
        let off_diagonal = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .any(|(i, j)| i != j && m[(i, j)].norm() != 0.0);
        if off_diagonal {
            Self::Dense(m)
        } else {
            Self::Diagonal(m.diagonal().iter().map(|z| z.re).collect())
        }
    }

    fn expectation(&self, psi: &CVector) -> f64 {
        match self {
            Self::Diagonal(d) => psi.iter().zip(d).map(|(z, w)| z.norm_sqr() * w).sum(),
            Self::Dense(m) => psi.dotc(&(m * psi)).re,
        }
    }

    /// `ψ ← (1 − s·M) ψ`
    fn damp(&self, psi: &mut CVector, s: f64) {
        match self {
            Self::Diagonal(d) => {
                for (z, w) in psi.iter_mut().zip(d) {
                    *z *= 1.0 - s * w;
                }
            }
            Self::Dense(m) => {
                let shift = m * &*psi * C64::new(s, 0.0);
                *psi -= shift;
            }
        }
    }
}

struct Stepper<'a> {
    channels: &'a [JumpChannel],
    rates: Vec<Positive>,
    drift: Positive,
}

impl<'a> Stepper<'a> {
    fn new(channels: &'a [JumpChannel], dim: usize) -> Result<Self> {
        let mut total = CMatrix::zeros(dim, dim);
        let mut rates = Vec::with_capacity(channels.len());
        for ch in channels {
            if ch.operator.nrows() != dim || ch.operator.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ch.operator.nrows(),
                });
            }
            let cdc = ch.operator.adjoint() * &ch.operator;
            total += &cdc;
            rates.push(Positive::new(cdc));
        }
        Ok(Self {
            channels,
            rates,
            drift: Positive::new(total),
        })
    }
}

fn trajectory_rng(master_seed: u64, traj_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(traj_index);
    rng
}

/// Runs one first-order jump trajectory, calling `sample` at each sample time.
fn run_trajectory(
    psi0: &Ket,
    stepper: &Stepper<'_>,
    cfg: &TrajectoryConfig,
    traj_index: u64,
    mut sample: impl FnMut(usize, &CVector, &[JumpEvent]),
) -> Result<Vec<JumpEvent>> {
    let (n_steps, dt) = cfg.steps();
    let sample_steps = cfg.sample_steps();
    let mut rng = trajectory_rng(cfg.master_seed, traj_index);
    let mut psi = psi0.amplitudes().clone();
    let mut jumps = Vec::new();
    let mut probs = vec![0.0; stepper.rates.len()];
    let mut next = 0;

    while next < sample_steps.len() && sample_steps[next] == 0 {
        sample(next, &psi, &jumps);
        next += 1;
    }
    for step in 1..=n_steps {
        let mut total = 0.0;
        for (p, rate) in probs.iter_mut().zip(&stepper.rates) {
            *p = dt * rate.expectation(&psi);
            if *p > MAX_JUMP_PROBABILITY {
                return Err(Error::StepTooLarge {
                    probability: *p,
                    limit: MAX_JUMP_PROBABILITY,
                });
            }
            total += *p;
        }
        let r: f64 = rng.gen();
        if r < total {
            let mut acc = 0.0;
            let mut chosen = probs.len() - 1;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if r < acc {
                    chosen = k;
                    break;
                }
            }
            psi = &stepper.channels[chosen].operator * &psi;
            jumps.push(JumpEvent {
                t: step as f64 * dt,
                channel: stepper.channels[chosen].label,
            });
        } else {
            stepper.drift.damp(&mut psi, 0.5 * dt);
        }
        let norm = psi.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NonFinite {
                t: step as f64 * dt,
            });
        }
        psi.unscale_mut(norm);

        while next < sample_steps.len() && sample_steps[next] == step {
            sample(next, &psi, &jumps);
            next += 1;
        }
    }
    Ok(jumps)
}

/// A single trajectory, reproducible from `(cfg.master_seed, traj_index)`.
pub fn evolve_trajectory(
    psi0: &Ket,
    channels: &[JumpChannel],
    cfg: &TrajectoryConfig,
    traj_index: u64,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let stepper = Stepper::new(channels, psi0.dim())?;
    let mut sampled = Vec::with_capacity(cfg.sample_times.len());
    let jumps = run_trajectory(psi0, &stepper, cfg, traj_index, |_, psi, _| {
        sampled.push(psi.clone());
    })?;
    Ok(TrajectoryRecord {
        jumps,
        sampled_states: sampled.into_iter().map(Ket::new).collect::<Result<_>>()?,
    })
}

/// Ensemble statistics at one sample time. Standard errors are
/// `sample-std/√n_traj`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleStats {
    pub t: f64,
    pub populations: Vec<f64>,
    pub population_se: Vec<f64>,
    pub mean_n: f64,
    pub mean_n_se: f64,
    pub amplitude: C64,
    pub amplitude_re_se: f64,
    pub amplitude_im_se: f64,
    /// Mean number of jumps up to this time.
    pub mean_jumps: f64,
    pub mean_jumps_se: f64,
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub n_traj: usize,
    pub states: Vec<DensityMatrix>,
    pub stats: Vec<SampleStats>,
    /// `(total jump count, number of trajectories)`, ascending.
    pub jump_histogram: Vec<(usize, u64)>,
}

#[derive(Clone, Debug)]
struct Moments {
    rho: CMatrix,
    pop_sq: Vec<f64>,
    n: f64,
    n_sq: f64,
    amp: C64,
    amp_re_sq: f64,
    amp_im_sq: f64,
    jumps: f64,
    jumps_sq: f64,
}

impl Moments {
    fn zeros(dim: usize) -> Self {
        Self {
            rho: CMatrix::zeros(dim, dim),
            pop_sq: vec![0.0; dim],
            n: 0.0,
            n_sq: 0.0,
            amp: C64::new(0.0, 0.0),
            amp_re_sq: 0.0,
            amp_im_sq: 0.0,
            jumps: 0.0,
            jumps_sq: 0.0,
        }
    }

    fn add_sample(&mut self, psi: &CVector, jumps: usize) {
        self.rho += psi * psi.adjoint();
        let mut n = 0.0;
        for (k, z) in psi.iter().enumerate() {
            let p = z.norm_sqr();
            self.pop_sq[k] += p * p;
            n += k as f64 * p;
        }
        let amp: C64 = (1..psi.len())
            .map(|k| psi[k - 1].conj() * psi[k] * (k as f64).sqrt())
            .sum();
        self.n += n;
        self.n_sq += n * n;
        self.amp += amp;
        self.amp_re_sq += amp.re * amp.re;
        self.amp_im_sq += amp.im * amp.im;
        let j = jumps as f64;
        self.jumps += j;
        self.jumps_sq += j * j;
    }

    fn merge(&mut self, other: &Moments) {
        self.rho += &other.rho;
        for (a, b) in self.pop_sq.iter_mut().zip(&other.pop_sq) {
            *a += b;
        }
        self.n += other.n;
        self.n_sq += other.n_sq;
        self.amp += other.amp;
        self.amp_re_sq += other.amp_re_sq;
        self.amp_im_sq += other.amp_im_sq;
        self.jumps += other.jumps;
        self.jumps_sq += other.jumps_sq;
    }
}

struct Partial {
    moments: Vec<Moments>,
    histogram: BTreeMap<usize, u64>,
}

fn standard_error(sum: f64, sum_sq: f64, count: usize) -> f64 {
    if count < 2 {
        return 0.0;
    }
    let n = count as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (var / n).sqrt()
}

/// Averages `|ψ⟩⟨ψ|` over `cfg.n_traj` trajectories on the current rayon pool.
pub fn ensemble_density(
    psi0: &Ket,
    p: &FeedbackParams,
    cfg: &TrajectoryConfig,
) -> Result<EnsembleResult> {
    cfg.validate()?;
    let dim = FockDim::new(psi0.dim())?;
    let channels = jump_channels(p, dim);
    let stepper = Stepper::new(&channels, dim.get())?;
    let n_samples = cfg.sample_times.len();
    let n_blocks = cfg.n_traj.div_ceil(ENSEMBLE_BLOCK);

    let partials: Vec<Partial> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut part = Partial {
                moments: vec![Moments::zeros(dim.get()); n_samples],
                histogram: BTreeMap::new(),
            };
            let end = ((block + 1) * ENSEMBLE_BLOCK).min(cfg.n_traj);
            for traj in block * ENSEMBLE_BLOCK..end {
                let jumps = run_trajectory(psi0, &stepper, cfg, traj as u64, |k, psi, jumps| {
                    part.moments[k].add_sample(psi, jumps.len());
                })?;
                *part.histogram.entry(jumps.len()).or_default() += 1;
            }
            Ok(part)
        })
        .collect::<Result<_>>()?;

    let mut total = Partial {
        moments: vec![Moments::zeros(dim.get()); n_samples],
        histogram: BTreeMap::new(),
    };
    for part in &partials {
        for (acc, m) in total.moments.iter_mut().zip(&part.moments) {
            acc.merge(m);
        }
        for (k, v) in &part.histogram {
            *total.histogram.entry(*k).or_default() += v;
        }
    }

    let count = cfg.n_traj;
    let inv = 1.0 / count as f64;
    let mut states = Vec::with_capacity(n_samples);
    let mut stats = Vec::with_capacity(n_samples);
    for (m, &t) in total.moments.iter().zip(&cfg.sample_times) {
        let rho = &m.rho * C64::new(inv, 0.0);
        let populations: Vec<f64> = rho.diagonal().iter().map(|z| z.re).collect();
        let population_se = m
            .rho
            .diagonal()
            .iter()
            .zip(&m.pop_sq)
            .map(|(s, sq)| standard_error(s.re, *sq, count))
            .collect();
        stats.push(SampleStats {
            t,
            populations,
            population_se,
            mean_n: m.n * inv,
            mean_n_se: standard_error(m.n, m.n_sq, count),
            amplitude: m.amp * inv,
            amplitude_re_se: standard_error(m.amp.re, m.amp_re_sq, count),
            amplitude_im_se: standard_error(m.amp.im, m.amp_im_sq, count),
            mean_jumps: m.jumps * inv,
            mean_jumps_se: standard_error(m.jumps, m.jumps_sq, count),
        });
        states.push(DensityMatrix::from_matrix_unchecked(rho));
    }
    Ok(EnsembleResult {
        n_traj: count,
        states,
        stats,
        jump_histogram: total.histogram.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dim(d: usize) -> FockDim {
        FockDim::new(d).unwrap()
    }

    #[test]
    fn channel_operators_at_extreme_efficiencies() {
        let p = FeedbackParams::new(1.0, 1.0).unwrap();
        let ch = jump_channels(&p, dim(4));
        assert_eq!(ch.len(), 2);
        assert_eq!(ch[0].label, ChannelLabel::FeedbackDetection);
        assert_eq!(ch[0].operator, mode_ops(dim(4)).sqrt_n);
        assert!(ch[1].operator.iter().all(|z| *z == C64::new(0.0, 0.0)));

        let p = FeedbackParams::new(1.0, 0.0).unwrap();
        let ch = jump_channels(&p, dim(4));
        assert!(ch[0].operator.iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert_eq!(ch[1].operator, mode_ops(dim(4)).a);
    }

    #[test]
    fn jump_rates_sum_to_number_operator() {
        let p = FeedbackParams::new(1.7, 0.35).unwrap();
        let ch = jump_channels(&p, dim(6));
        let total: CMatrix = ch.iter().map(|c| c.operator.adjoint() * &c.operator).sum();
        let expected = mode_ops(dim(6)).n_hat * C64::new(1.7, 0.0);
        assert!((total - expected).iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn fock_state_is_frozen_under_ideal_feedback() {
        let p = FeedbackParams::new(1.0, 1.0).unwrap();
        let ch = jump_channels(&p, dim(6));
        let cfg = TrajectoryConfig::evenly_sampled(1, 3, 1e-3, 1.0, 11).unwrap();
        let psi = Ket::basis(6, 3).unwrap();
        let rec = evolve_trajectory(&psi, &ch, &cfg, 0).unwrap();
        assert!(!rec.jumps.is_empty());
        for s in &rec.sampled_states {
            assert_abs_diff_eq!(s.inner(&psi).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn vacuum_never_jumps() {
        for eta in [0.0, 0.5, 1.0] {
            let p = FeedbackParams::new(1.0, eta).unwrap();
            let ch = jump_channels(&p, dim(4));
            let cfg = TrajectoryConfig::evenly_sampled(1, 9, 1e-3, 2.0, 3).unwrap();
            let psi = Ket::basis(4, 0).unwrap();
            let rec = evolve_trajectory(&psi, &ch, &cfg, 5).unwrap();
            assert!(rec.jumps.is_empty());
            assert!(rec.sampled_states.iter().all(|s| s == &psi));
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let p = FeedbackParams::new(1.0, 0.5).unwrap();
        let ch = jump_channels(&p, dim(12));
        let cfg = TrajectoryConfig::evenly_sampled(1, 0, 0.05, 1.0, 2).unwrap();
        let psi = Ket::basis(12, 10).unwrap();
        assert!(matches!(
            evolve_trajectory(&psi, &ch, &cfg, 0),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn trajectories_are_reproducible_per_index() {
        let p = FeedbackParams::new(1.0, 0.5).unwrap();
        let ch = jump_channels(&p, dim(8));
        let cfg = TrajectoryConfig::evenly_sampled(1, 42, 1e-3, 1.0, 5).unwrap();
        let psi = Ket::basis(8, 4).unwrap();
        let a = evolve_trajectory(&psi, &ch, &cfg, 7).unwrap();
        let b = evolve_trajectory(&psi, &ch, &cfg, 7).unwrap();
        let c = evolve_trajectory(&psi, &ch, &cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.jumps, c.jumps);
        assert!(a.jumps.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn single_trajectory_ensemble_is_a_projector() {
        let p = FeedbackParams::new(1.0, 0.5).unwrap();
        let psi = Ket::from_slice(&[
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(0.5, 0.0),
            C64::new(0.0, 0.0),
        ])
        .unwrap();
        let cfg = TrajectoryConfig::evenly_sampled(1, 11, 1e-3, 0.5, 3).unwrap();
        let ens = ensemble_density(&psi, &p, &cfg).unwrap();
        let ch = jump_channels(&p, dim(4));
        let rec = evolve_trajectory(&psi, &ch, &cfg, 0).unwrap();
        for (rho, ket) in ens.states.iter().zip(&rec.sampled_states) {
            assert!((rho.matrix() - ket.projector().matrix())
                .iter()
                .all(|z| z.norm() < 1e-14));
        }
        assert_eq!(ens.stats[0].mean_n_se, 0.0);
    }
}
