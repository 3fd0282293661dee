//! Run configuration: a TOML document, validated into a [`RunConfig`] with
//! every default made explicit.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::fock::{coherent_state, FockDim, Ket};
use crate::liouville::DEFAULT_DT_GAMMA;
use crate::qubit::{self, QubitSpec};
use crate::stirap::PulseSchedule;

pub const DEFAULT_SAMPLE_POINTS: usize = 11;
pub const DEFAULT_N_TRAJ: usize = 1000;
pub const DEFAULT_QUBIT_GRID: usize = 128;
pub const DEFAULT_CROSSING_STEPS: f64 = 1e5;
/// TOML integers are signed 64-bit.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config field `{field}`: {message}")]
    Field { field: String, message: String },
}

impl ConfigError {
    pub(crate) fn field(field: &str, message: impl Into<String>) -> Self {
        Self::Field {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Evolve,
    Trajectories,
    QubitFidelity,
    QubitOptimal,
    Stirap,
    Sweep,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Evolve,
        Scenario::Trajectories,
        Scenario::QubitFidelity,
        Scenario::QubitOptimal,
        Scenario::Stirap,
        Scenario::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Evolve => "evolve",
            Scenario::Trajectories => "trajectories",
            Scenario::QubitFidelity => "qubit-fidelity",
            Scenario::QubitOptimal => "qubit-optimal",
            Scenario::Stirap => "stirap",
            Scenario::Sweep => "sweep",
        }
    }

    fn is_qubit(self) -> bool {
        matches!(self, Scenario::QubitFidelity | Scenario::QubitOptimal)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| ConfigError::field("scenario", format!("unknown scenario `{s}`")))
    }
}

// ---- raw document -------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_bound: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<RawInitial>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traj: Option<RawTraj>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stirap: Option<RawStirap>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInitial {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// `[re, im]`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
    /// `[[re, im], …]`, normalized before use
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qubit: Option<RawQubit>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQubit {
    pub n: usize,
    pub m: usize,
    pub alpha_re: f64,
    #[serde(default)]
    pub alpha_im: f64,
    pub beta_re: f64,
    #[serde(default)]
    pub beta_im: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTraj {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStirap {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    /// `[cavity center, pump center]`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centers: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_cross: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

// ---- validated configuration --------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fock(usize),
    Coherent(C64),
    /// Fock amplitudes as written; normalized when the ket is built.
    Amplitudes(Vec<C64>),
    Qubit(QubitSpec),
}

impl InitialState {
    /// Single-mode ket on `dim` levels.
    pub fn ket(&self, dim: usize) -> crate::Result<Ket> {
        match self {
            InitialState::Fock(n) => Ket::basis(dim, *n),
            InitialState::Coherent(alpha) => coherent_state(*alpha, FockDim::new(dim)?),
            InitialState::Amplitudes(amps) => {
                let mut v = vec![C64::new(0.0, 0.0); dim];
                v[..amps.len()].copy_from_slice(amps);
                Ket::from_slice(&v)
            }
            InitialState::Qubit(_) => Err(crate::Error::InvalidArgument(
                "a qubit state lives on two modes".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajSettings {
    pub n_traj: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StirapSettings {
    pub schedule: PulseSchedule,
    pub nbar: f64,
    pub gamma_e: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Levels per mode.
    pub dim: usize,
    pub gamma: f64,
    pub etas: Vec<f64>,
    pub t_final: f64,
    pub dt: f64,
    pub sample_points: usize,
    pub grid: usize,
    pub search_bound: usize,
    pub initial: Option<InitialState>,
    pub traj: TrajSettings,
    pub stirap: Option<StirapSettings>,
    pub out: Option<PathBuf>,
}

/// Parses a TOML document. `scenario` in the document wins unless absent, in
/// which case `default_scenario` is used.
pub fn parse_config(
    text: &str,
    default_scenario: Option<Scenario>,
) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    validate(raw, default_scenario)
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::field(field, format!("must be > 0, got {v}")))
    }
}

fn efficiency(field: &str, v: f64) -> Result<f64, ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ConfigError::field(
            field,
            format!("must lie in [0, 1], got {v}"),
        ))
    }
}

fn validate(raw: RawConfig, default_scenario: Option<Scenario>) -> Result<RunConfig, ConfigError> {
    let scenario = raw
        .scenario
        .or(default_scenario)
        .ok_or_else(|| ConfigError::field("scenario", "missing"))?;

    let gamma = positive("gamma", raw.gamma.unwrap_or(1.0))?;
    let etas = match (raw.eta, raw.eta_list) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::field(
                "eta",
                "give either `eta` or `eta_list`, not both",
            ))
        }
        (Some(e), None) => vec![efficiency("eta", e)?],
        (None, Some(list)) if !list.is_empty() => list
            .into_iter()
            .map(|e| efficiency("eta_list", e))
            .collect::<Result<_, _>>()?,
        (None, Some(_)) => return Err(ConfigError::field("eta_list", "must not be empty")),
        (None, None) if scenario == Scenario::Stirap => Vec::new(),
        (None, None) => return Err(ConfigError::field("eta", "missing")),
    };
    if matches!(scenario, Scenario::Evolve | Scenario::Trajectories) && etas.len() != 1 {
        return Err(ConfigError::field(
            "eta_list",
            format!("scenario `{scenario}` takes a single eta; use `sweep` for lists"),
        ));
    }

    let t_final = raw.t_final.unwrap_or(1.0 / gamma);
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(ConfigError::field(
            "t_final",
            format!("must be >= 0, got {t_final}"),
        ));
    }
    let dt = positive("dt", raw.dt.unwrap_or(DEFAULT_DT_GAMMA / gamma))?;
    if t_final > 0.0 && dt > t_final {
        return Err(ConfigError::field(
            "dt",
            format!("{dt} exceeds t_final = {t_final}"),
        ));
    }
    let sample_points = raw.sample_points.unwrap_or(DEFAULT_SAMPLE_POINTS);
    if sample_points < 2 {
        return Err(ConfigError::field("sample_points", "must be >= 2"));
    }
    let grid = raw.grid.unwrap_or(DEFAULT_QUBIT_GRID);
    if grid < 64 {
        return Err(ConfigError::field(
            "grid",
            format!("must be >= 64, got {grid}"),
        ));
    }
    let search_bound = raw.search_bound.unwrap_or(qubit::DEFAULT_SEARCH_BOUND);
    if search_bound < 1 {
        return Err(ConfigError::field("search_bound", "must be >= 1"));
    }

    let initial = raw.initial.map(validate_initial).transpose()?;
    let dim = match (scenario, &initial, raw.dim) {
        (_, _, Some(d)) => d,
        (sc, Some(InitialState::Qubit(q)), None) if sc.is_qubit() => {
            qubit::default_dims(q.n(), q.m()).0.get()
        }
        (Scenario::QubitOptimal, None, None) => qubit::DEFAULT_HEADROOM + 1,
        _ => return Err(ConfigError::field("dim", "missing")),
    };
    if dim < 2 {
        return Err(ConfigError::field(
            "dim",
            format!("must be >= 2, got {dim}"),
        ));
    }
    check_initial(scenario, initial.as_ref(), dim)?;

    let raw_traj = raw.traj.unwrap_or_default();
    let traj = TrajSettings {
        n_traj: raw_traj.n_traj.unwrap_or(DEFAULT_N_TRAJ),
        master_seed: raw_traj.master_seed.unwrap_or(0),
    };
    if traj.master_seed > MAX_SEED {
        return Err(ConfigError::field(
            "traj.master_seed",
            format!("must be <= {MAX_SEED}"),
        ));
    }
    if traj.n_traj == 0 {
        return Err(ConfigError::field("traj.n_traj", "must be >= 1"));
    }

    let stirap = if scenario == Scenario::Stirap {
        Some(validate_stirap(raw.stirap.unwrap_or_default())?)
    } else if raw.stirap.is_some() {
        return Err(ConfigError::field(
            "stirap",
            format!("not used by scenario `{scenario}`"),
        ));
    } else {
        None
    };

    Ok(RunConfig {
        scenario,
        dim,
        gamma,
        etas,
        t_final,
        dt,
        sample_points,
        grid,
        search_bound,
        initial,
        traj,
        stirap,
        out: raw.out,
    })
}

fn validate_initial(raw: RawInitial) -> Result<InitialState, ConfigError> {
    let only = |present: bool, what: &str| -> Result<(), ConfigError> {
        if present {
            Ok(())
        } else {
            Err(ConfigError::field(
                &format!("initial.{what}"),
                format!("required for kind `{}`", raw.kind),
            ))
        }
    };
    let extras = [
        raw.n.is_some(),
        raw.alpha.is_some(),
        raw.amplitudes.is_some(),
        raw.qubit.is_some(),
    ]
    .iter()
    .filter(|b| **b)
    .count();
    if extras > 1 {
        return Err(ConfigError::field(
            "initial",
            "give exactly one of n, alpha, amplitudes, qubit",
        ));
    }
    match raw.kind.as_str() {
        "fock" => {
            only(raw.n.is_some(), "n")?;
            Ok(InitialState::Fock(raw.n.unwrap()))
        }
        "coherent" => {
            only(raw.alpha.is_some(), "alpha")?;
            let [re, im] = raw.alpha.unwrap();
            Ok(InitialState::Coherent(C64::new(re, im)))
        }
        "amplitudes" => {
            only(raw.amplitudes.is_some(), "amplitudes")?;
            let amps: Vec<C64> = raw
                .amplitudes
                .unwrap()
                .iter()
                .map(|[re, im]| C64::new(*re, *im))
                .collect();
            Ket::from_slice(&amps)
                .map_err(|e| ConfigError::field("initial.amplitudes", e.to_string()))?;
            Ok(InitialState::Amplitudes(amps))
        }
        "qubit" => {
            only(raw.qubit.is_some(), "qubit")?;
            let q = raw.qubit.unwrap();
            let spec = QubitSpec::normalized(
                q.n,
                q.m,
                C64::new(q.alpha_re, q.alpha_im),
                C64::new(q.beta_re, q.beta_im),
            )
            .map_err(|e| {
                let msg = if q.n == q.m {
                    "n ≠ m required".to_string()
                } else {
                    e.to_string()
                };
                ConfigError::field("initial.qubit", msg)
            })?;
            Ok(InitialState::Qubit(spec))
        }
        other => Err(ConfigError::field(
            "initial.kind",
            format!("unknown kind `{other}` (expected fock, coherent, amplitudes or qubit)"),
        )),
    }
}

fn check_initial(
    scenario: Scenario,
    initial: Option<&InitialState>,
    dim: usize,
) -> Result<(), ConfigError> {
    let Some(initial) = initial else {
        return match scenario {
            Scenario::QubitOptimal => Ok(()),
            _ => Err(ConfigError::field("initial", "missing")),
        };
    };
    match (scenario.is_qubit(), initial) {
        (true, InitialState::Qubit(q)) => {
            let d = FockDim::new(dim).map_err(|e| ConfigError::field("dim", e.to_string()))?;
            qubit::qubit_ket(q, (d, d)).map_err(|e| ConfigError::field("dim", e.to_string()))?;
            if scenario == Scenario::QubitFidelity
                && dim != qubit::default_dims(q.n(), q.m()).0.get()
            {
                return Err(ConfigError::field(
                    "dim",
                    format!(
                        "qubit-fidelity uses max(n, m) + {} levels per mode",
                        qubit::DEFAULT_HEADROOM
                    ),
                ));
            }
            Ok(())
        }
        (true, _) => Err(ConfigError::field(
            "initial.kind",
            format!("scenario `{scenario}` needs a qubit"),
        )),
        (false, InitialState::Qubit(_)) => Err(ConfigError::field(
            "initial.kind",
            format!("scenario `{scenario}` needs a single-mode state"),
        )),
        (false, state) => {
            if let InitialState::Amplitudes(a) = state {
                if a.len() > dim {
                    return Err(ConfigError::field(
                        "initial.amplitudes",
                        format!("more than dim = {dim} entries"),
                    ));
                }
            }
            state
                .ket(dim)
                .map_err(|e| ConfigError::field("initial", e.to_string()))?;
            Ok(())
        }
    }
}

fn validate_stirap(raw: RawStirap) -> Result<StirapSettings, ConfigError> {
    let t_cross = positive("stirap.t_cross", raw.t_cross.unwrap_or(1.0))?;
    let g_max = positive("stirap.g_max", raw.g_max.unwrap_or(100.0 / t_cross))?;
    let omega_max = positive("stirap.omega_max", raw.omega_max.unwrap_or(g_max))?;
    let [c_g, c_omega] = raw.centers.unwrap_or([0.4 * t_cross, 0.6 * t_cross]);
    let width = positive("stirap.width", raw.width.unwrap_or(0.13 * t_cross))?;
    let schedule = PulseSchedule::new(g_max, omega_max, c_g, c_omega, width, t_cross)
        .map_err(|e| ConfigError::field("stirap", e.to_string()))?;
    let dt = positive(
        "stirap.dt",
        raw.dt.unwrap_or(t_cross / DEFAULT_CROSSING_STEPS),
    )?;
    if dt > t_cross {
        return Err(ConfigError::field("stirap.dt", "exceeds t_cross"));
    }
    Ok(StirapSettings {
        schedule,
        nbar: positive("stirap.nbar", raw.nbar.unwrap_or(1.0))?,
        gamma_e: positive("stirap.gamma_e", raw.gamma_e.unwrap_or(0.01 / t_cross))?,
        dt,
    })
}

impl RunConfig {
    /// The fully materialized document; parsing it yields `self` again.
    pub fn to_raw(&self) -> RawConfig {
        let (eta, eta_list) = match self.etas.as_slice() {
            [] => (None, None),
            [single] => (Some(*single), None),
            list => (None, Some(list.to_vec())),
        };
        let initial = self.initial.as_ref().map(|s| match s {
            InitialState::Fock(n) => RawInitial {
                kind: "fock".into(),
                n: Some(*n),
                ..Default::default()
            },
            InitialState::Coherent(a) => RawInitial {
                kind: "coherent".into(),
                alpha: Some([a.re, a.im]),
                ..Default::default()
            },
            InitialState::Amplitudes(v) => RawInitial {
                kind: "amplitudes".into(),
                amplitudes: Some(v.iter().map(|z| [z.re, z.im]).collect()),
                ..Default::default()
            },
            InitialState::Qubit(q) => RawInitial {
                kind: "qubit".into(),
                qubit: Some(RawQubit {
                    n: q.n(),
                    m: q.m(),
                    alpha_re: q.alpha().re,
                    alpha_im: q.alpha().im,
                    beta_re: q.beta().re,
                    beta_im: q.beta().im,
                }),
                ..Default::default()
            },
        });
        let stirap = self.stirap.map(|s| RawStirap {
            g_max: Some(s.schedule.g_max),
            omega_max: Some(s.schedule.omega_max),
            centers: Some([s.schedule.t_center_g, s.schedule.t_center_omega]),
            width: Some(s.schedule.width),
            t_cross: Some(s.schedule.t_cross),
            nbar: Some(s.nbar),
            gamma_e: Some(s.gamma_e),
            dt: Some(s.dt),
        });
        RawConfig {
            scenario: Some(self.scenario),
            dim: Some(self.dim),
            gamma: Some(self.gamma),
            eta,
            eta_list,
            t_final: Some(self.t_final),
            dt: Some(self.dt),
            sample_points: Some(self.sample_points),
            grid: Some(self.grid),
            search_bound: Some(self.search_bound),
            out: self.out.clone(),
            initial,
            traj: Some(RawTraj {
                n_traj: Some(self.traj.n_traj),
                master_seed: Some(self.traj.master_seed),
            }),
            stirap,
        }
    }

    /// Effective configuration as a TOML document.
    pub fn echo(&self) -> String {
        toml::to_string(&self.to_raw()).expect("config serializes")
    }
}
