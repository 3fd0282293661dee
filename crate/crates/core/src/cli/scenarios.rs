//! One runner per scenario. Each returns the result table plus a JSON
//! metadata object; neither depends on the number of worker threads.

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{InitialState, RunConfig, Scenario};
use super::table::ResultTable;
use crate::liouville::{self, FeedbackParams, IntegratorConfig, Solution};
use crate::mcwf::{self, TrajectoryConfig};
use crate::qubit::{self, QubitSpec};
use crate::stirap;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub table: ResultTable,
    pub metadata: Value,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let (table, extra) = match cfg.scenario {
        Scenario::Evolve => (evolve(cfg, cfg.etas[0])?, Value::Null),
        Scenario::Sweep => (sweep(cfg)?, Value::Null),
        Scenario::Trajectories => trajectories(cfg)?,
        Scenario::QubitFidelity => (qubit_fidelity(cfg)?, Value::Null),
        Scenario::QubitOptimal => (qubit_optimal(cfg)?, Value::Null),
        Scenario::Stirap => crossing(cfg)?,
    };
    let mut metadata = json!({
        "scenario": cfg.scenario.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "columns": table.columns(),
        "rows": table.rows().len(),
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut metadata, extra) {
        m.extend(e);
    }
    Ok(RunOutput { table, metadata })
}

fn initial(cfg: &RunConfig) -> &InitialState {
    cfg.initial
        .as_ref()
        .expect("validated config has an initial state")
}

fn qubit_spec(cfg: &RunConfig) -> Option<&QubitSpec> {
    match cfg.initial.as_ref()? {
        InitialState::Qubit(q) => Some(q),
        _ => None,
    }
}

fn integrator(cfg: &RunConfig) -> Result<IntegratorConfig> {
    IntegratorConfig::new(cfg.dt, cfg.t_final)?.with_samples(cfg.sample_points)
}

fn solve(cfg: &RunConfig, eta: f64) -> Result<Solution> {
    let p = FeedbackParams::new(cfg.gamma, eta)?;
    let rho0 = initial(cfg).ket(cfg.dim)?.projector();
    liouville::integrate(&rho0, &p, &integrator(cfg)?)
}

fn evolve(cfg: &RunConfig, eta: f64) -> Result<ResultTable> {
    let sol = solve(cfg, eta)?;
    let mut columns = vec!["t".to_string(), "trace".into(), "purity".into()];
    columns.extend((0..cfg.dim).map(|k| format!("p{k}")));
    columns.extend(["re_amp".into(), "im_amp".into()]);
    let mut table = ResultTable::new(columns);
    for (t, rho) in sol.times.iter().zip(&sol.states) {
        let amp = liouville::mean_amplitude(rho);
        let mut row = vec![*t, rho.trace().re, rho.purity()];
        row.extend(rho.populations());
        row.extend([amp.re, amp.im]);
        table.push(row)?;
    }
    Ok(table)
}

fn sweep(cfg: &RunConfig) -> Result<ResultTable> {
    let runs: Vec<Solution> = cfg
        .etas
        .par_iter()
        .map(|&eta| solve(cfg, eta))
        .collect::<Result<_>>()?;
    let mut table = ResultTable::new(["eta", "t", "trace", "purity", "mean_n", "re_amp", "im_amp"]);
    for (eta, sol) in cfg.etas.iter().zip(runs) {
        for (t, rho) in sol.times.iter().zip(&sol.states) {
            let amp = liouville::mean_amplitude(rho);
            table.push(vec![
                *eta,
                *t,
                rho.trace().re,
                rho.purity(),
                liouville::mean_photon_number(rho),
                amp.re,
                amp.im,
            ])?;
        }
    }
    Ok(table)
}

fn trajectories(cfg: &RunConfig) -> Result<(ResultTable, Value)> {
    let p = FeedbackParams::new(cfg.gamma, cfg.etas[0])?;
    let psi0 = initial(cfg).ket(cfg.dim)?;
    let tcfg = TrajectoryConfig::evenly_sampled(
        cfg.traj.n_traj,
        cfg.traj.master_seed,
        cfg.dt,
        cfg.t_final,
        cfg.sample_points,
    )?;
    let ens = mcwf::ensemble_density(&psi0, &p, &tcfg)?;

    let mut columns: Vec<String> = [
        "t",
        "mean_n",
        "mean_n_se",
        "re_amp",
        "re_amp_se",
        "im_amp",
        "im_amp_se",
    ]
    .map(String::from)
    .into();
    for k in 0..cfg.dim {
        columns.push(format!("p{k}"));
        columns.push(format!("p{k}_se"));
    }
    columns.extend(["mean_jumps".into(), "mean_jumps_se".into()]);
    let mut table = ResultTable::new(columns);
    for s in &ens.stats {
        let mut row = vec![
            s.t,
            s.mean_n,
            s.mean_n_se,
            s.amplitude.re,
            s.amplitude_re_se,
            s.amplitude.im,
            s.amplitude_im_se,
        ];
        for (p, se) in s.populations.iter().zip(&s.population_se) {
            row.extend([*p, *se]);
        }
        row.extend([s.mean_jumps, s.mean_jumps_se]);
        table.push(row)?;
    }
    let histogram: Vec<Value> = ens
        .jump_histogram
        .iter()
        .map(|(jumps, count)| json!({ "jumps": jumps, "trajectories": count }))
        .collect();
    let meta = json!({
        "n_traj": ens.n_traj,
        "master_seed": cfg.traj.master_seed,
        "jump_histogram": histogram,
    });
    Ok((table, meta))
}

fn qubit_fidelity(cfg: &RunConfig) -> Result<ResultTable> {
    let spec = qubit_spec(cfg).expect("validated qubit config");
    let icfg = integrator(cfg)?;
    let per_eta: Vec<Vec<Vec<f64>>> = cfg
        .etas
        .par_iter()
        .map(|&eta| -> Result<Vec<Vec<f64>>> {
            let p = FeedbackParams::new(cfg.gamma, eta)?;
            let basis = qubit::evolve_qubit_basis(spec.n(), spec.m(), &p, &icfg)?;
            basis
                .iter()
                .map(|b| {
                    let gamma_t = cfg.gamma * b.t;
                    let closed = qubit::min_fidelity_closed(spec.n(), spec.m(), eta, gamma_t)?;
                    let numeric = b.minimize(cfg.grid).value;
                    let state = b.fidelity(spec.alpha(), spec.beta());
                    Ok(vec![gamma_t, eta, closed, numeric, state])
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut table =
        ResultTable::new(["gamma_t", "eta", "F_min_closed", "F_min_numeric", "F_state"]);
    for row in per_eta.into_iter().flatten() {
        table.push(row)?;
    }
    Ok(table)
}

fn qubit_optimal(cfg: &RunConfig) -> Result<ResultTable> {
    let gt_final = cfg.gamma * cfg.t_final;
    let intervals = (cfg.sample_points - 1) as f64;
    let mut table = ResultTable::new(["gamma_t", "eta", "n", "m", "F_min_closed"]);
    for &eta in &cfg.etas {
        for k in 0..cfg.sample_points {
            let gamma_t = gt_final * k as f64 / intervals;
            let (n, m, f) = qubit::optimal_qubit(eta, gamma_t, cfg.search_bound)?;
            table.push(vec![gamma_t, eta, n as f64, m as f64, f])?;
        }
    }
    Ok(table)
}

fn crossing(cfg: &RunConfig) -> Result<(ResultTable, Value)> {
    let s = cfg
        .stirap
        .ok_or_else(|| Error::InvalidArgument("stirap settings missing".into()))?;
    let field = initial(cfg).ket(cfg.dim)?.projector();
    let res = stirap::simulate_crossing_sampled(&field, &s.schedule, s.dt, cfg.sample_points)?;
    let report = stirap::adiabaticity_check(&s.schedule, s.nbar, cfg.gamma, s.gamma_e)?;

    let mut table = ResultTable::new(["t", "dark_overlap", "excited_pop"]);
    for sample in &res.diagnostics.samples {
        table.push(vec![
            sample.t,
            sample.dark_overlap,
            sample.excited_population,
        ])?;
    }
    let d = &res.diagnostics;
    let meta = json!({
        "adiabaticity": report,
        "transfer_fidelity": d.transfer_fidelity,
        "max_excited_population": d.max_excited_population,
        "final_g2_population": d.final_g2_population,
        "min_dark_overlap": d.min_dark_overlap,
    });
    Ok((table, meta))
}
