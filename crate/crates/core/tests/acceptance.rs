//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use cavity_feedback::fock::{self, coherent_state, mode_ops, DensityMatrix, FockDim, Ket};
use cavity_feedback::liouville::{self, DiffusionKind, FeedbackParams, IntegratorConfig};
use cavity_feedback::mcwf::{self, TrajectoryConfig};
use cavity_feedback::qubit;
use cavity_feedback::stirap::{self, PulseSchedule};
use common::{max_abs_diff, random_density, random_ket};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> Outcome;

const CRITERIA: [(&str, &str, u64, Check); 11] = [
    (
        "C1",
        "feedback after loss equals sqrt(n) sandwich",
        1,
        c1_bridge,
    ),
    (
        "C2",
        "integrator vs ideal-feedback closed form",
        5,
        c2_ideal_feedback,
    ),
    (
        "C3",
        "integrator vs vacuum-damping closed form",
        5,
        c3_vacuum_damping,
    ),
    (
        "C4",
        "photon-number populations conserved at eta = 1",
        5,
        c4_qnd,
    ),
    (
        "C5",
        "sqrt-diffusion exponents never exceed standard ones",
        1,
        c5_ordering,
    ),
    (
        "C6",
        "trajectory average converges to the master equation",
        60,
        c6_trajectories,
    ),
    (
        "C7",
        "numerical minimum fidelity vs closed form",
        120,
        c7_min_fidelity,
    ),
    ("C8", "optimal qubit encodings", 60, c8_optimality),
    (
        "C9",
        "slow amplitude decay of a bright coherent state",
        10,
        c9_semiclassical,
    ),
    (
        "C10",
        "adiabatic passage realizes the feedback map",
        30,
        c10_stirap,
    ),
    (
        "C11",
        "results independent of worker count",
        60,
        c11_determinism,
    ),
];

fn main() -> ExitCode {
    let mut failures = 0;
    for (id, name, budget_s, check) in CRITERIA {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget_s);
        let pass = out.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] {id} {name}: {}; {:.2} s (budget {budget_s} s)",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
        );
    }
    println!(
        "{} of {} criteria passed",
        CRITERIA.len() - failures,
        CRITERIA.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn c1_bridge() -> Outcome {
    let dim = 16;
    let ops = mode_ops(FockDim::new(dim).unwrap());
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for k in 0..64 {
        let rho = random_density(&mut r, dim, dim, 1 + k % 4);
        let lowered = &ops.a * rho.matrix() * &ops.a_dag;
        let lhs = fock::apply_feedback(&lowered, fock::TRUNCATION_GUARD).unwrap();
        let rhs = &ops.sqrt_n * rho.matrix() * &ops.sqrt_n;
        worst = worst.max(max_abs_diff(&lhs, &rhs));
    }
    outcome(
        worst < 1e-12,
        format!("64 states, max error {worst:.1e} (< 1e-12)"),
    )
}

fn c2_ideal_feedback() -> Outcome {
    let dim = 12;
    let rho0 = random_ket(&mut rng(2), dim, dim).projector();
    let p = FeedbackParams::new(1.0, 1.0).unwrap();
    let sol =
        liouville::integrate(&rho0, &p, &IntegratorConfig::for_gamma_t(&p, 1.0).unwrap()).unwrap();
    let exact = liouville::propagate_analytic(&rho0, DiffusionKind::SquareRoot, 1.0).unwrap();
    let err = max_abs_diff(sol.last().matrix(), exact.matrix());
    outcome(err < 1e-8, format!("max error {err:.1e} (< 1e-8)"))
}

fn c3_vacuum_damping() -> Outcome {
    let dim = 8;
    let mut amps = random_ket(&mut rng(3), dim, 6).into_amplitudes() * C64::new(0.4, 0.0);
    amps[3] += C64::new(1.0, 0.0);
    let rho0 = Ket::new(amps).unwrap().projector();
    let p = FeedbackParams::new(1.0, 0.0).unwrap();
    let mut worst = 0.0f64;
    for gt in [0.25, 1.0] {
        let sol = liouville::integrate(&rho0, &p, &IntegratorConfig::for_gamma_t(&p, gt).unwrap())
            .unwrap();
        let exact = liouville::damped_cavity_analytic(&rho0, gt).unwrap();
        worst = worst.max(max_abs_diff(sol.last().matrix(), exact.matrix()));
    }
    let p3 = rho0.populations()[3];
    outcome(
        worst < 1e-8,
        format!("p3(0) = {p3:.2}, max error {worst:.1e} (< 1e-8)"),
    )
}

fn c4_qnd() -> Outcome {
    let dim = 12;
    let rho0 = random_density(&mut rng(4), dim, dim, 3);
    let p = FeedbackParams::new(1.0, 1.0).unwrap();
    let sol =
        liouville::integrate(&rho0, &p, &IntegratorConfig::for_gamma_t(&p, 2.0).unwrap()).unwrap();
    let drift = rho0
        .populations()
        .iter()
        .zip(sol.last().populations())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let coherence = sol.last().matrix()[(0, dim - 1)].norm() / rho0.matrix()[(0, dim - 1)].norm();
    outcome(
        drift < 1e-9,
        format!(
            "max diagonal drift {drift:.1e} (< 1e-9); outermost coherence kept {coherence:.2e}"
        ),
    )
}

fn c5_ordering() -> Outcome {
    let mut bad = Vec::new();
    for n in 0u64..=32 {
        for m in 0u64..=32 {
            // |√n − √m| ≤ |n − m| = |√n − √m|(√n + √m) holds iff n = m or n + m ≥ 1.
            let exact = n == m || n + m >= 1;
            if !exact || !liouville::decay_inequality_check(n, m).is_ordered() {
                bad.push((n, m));
            }
        }
    }
    outcome(bad.is_empty(), format!("1089 pairs, violations {bad:?}"))
}

fn c6_trajectories() -> Outcome {
    let dim = 8;
    let p = FeedbackParams::new(1.0, 0.5).unwrap();
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    amps[..2].fill(C64::new(1.0, 0.0));
    let psi0 = Ket::from_slice(&amps).unwrap();
    let reference = liouville::integrate(
        &psi0.projector(),
        &p,
        &IntegratorConfig::for_gamma_t(&p, 1.0).unwrap(),
    )
    .unwrap()
    .last()
    .clone();
    let error = |n_traj: usize, seed: u64| -> f64 {
        let cfg = TrajectoryConfig::new(n_traj, seed, 1e-3, 1.0, vec![1.0]).unwrap();
        let ens = mcwf::ensemble_density(&psi0, &p, &cfg).unwrap();
        ens.states[0].trace_distance(&reference).unwrap()
    };
    // Independent seeds per ensemble; the ratio is averaged over five draws.
    let seeds = 5u64;
    let small: Vec<f64> = (0..seeds).map(|s| error(5_000, 100 + s)).collect();
    let large: Vec<f64> = (0..seeds).map(|s| error(20_000, 200 + s)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let factor = mean(&small) / mean(&large);
    let worst = large.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst < 0.02 && (1.6..=2.6).contains(&factor),
        format!(
            "trace distance at 20000 <= {worst:.4} (< 0.02), mean at 5000 {:.4}, halving factor {factor:.2} (in [1.6, 2.6])",
            mean(&small)
        ),
    )
}

fn c7_min_fidelity() -> Outcome {
    let mut worst = 0.0f64;
    let mut spot = Vec::new();
    for (n, m) in [(0, 1), (1, 2), (2, 3)] {
        for eta in [0.0, 0.5, 1.0] {
            let p = FeedbackParams::new(1.0, eta).unwrap();
            for gt in [0.1, 1.0] {
                let numeric = qubit::min_fidelity_numeric(n, m, &p, gt, 128)
                    .unwrap()
                    .value;
                let closed = qubit::min_fidelity_closed(n, m, eta, gt).unwrap();
                worst = worst.max((numeric - closed).abs());
                if (n, m, eta, gt) == (0, 1, 0.5, 0.1) {
                    spot.push((numeric, 0.928033));
                }
                if (n, m, eta, gt) == (1, 2, 1.0, 1.0) {
                    spot.push((numeric, 0.921174));
                }
            }
        }
    }
    let spot_err = spot.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(
        worst < 1e-4 && spot_err < 1e-4 && spot.len() == 2,
        format!(
            "18 cases, max |numeric - closed| {worst:.1e}; spot values {:.6} and {:.6}, max deviation {spot_err:.1e} (< 1e-4)",
            spot[0].0, spot[1].0
        ),
    )
}

fn c8_optimality() -> Outcome {
    let (n, m, f) = qubit::optimal_qubit(0.8, 0.05, 7).unwrap();
    let single_photon = (n, m) == (1, 0);

    let gt = 0.1;
    let p = FeedbackParams::new(1.0, 1.0).unwrap();
    let family: Vec<f64> = (0..=10)
        .map(|k| {
            qubit::min_fidelity_numeric(k + 1, k, &p, gt, 128)
                .unwrap()
                .value
        })
        .collect();
    let increasing = family.windows(2).all(|w| w[1] > w[0]);
    let closed = qubit::min_fidelity_closed(11, 10, 1.0, gt).unwrap();
    let approx = 1.0 - gt / (8.0 * 10.0);
    let rel = (family[10] - approx).abs() / approx;
    outcome(
        single_photon && increasing && rel < 0.01 && (family[10] - closed).abs() < 1e-4,
        format!(
            "argmax at eta=0.8 is ({n},{m}) with F={f:.5}; (n+1,n) family increasing: {increasing}; \
             F(11,10)={:.6} vs 1-gt/8n={approx:.6}, rel. diff {rel:.1e} (< 1%)",
            family[10]
        ),
    )
}

fn c9_semiclassical() -> Outcome {
    let dim = 64;
    let nbar: f64 = 25.0;
    let gt = 1.0;
    let rho0 = coherent_state(C64::new(nbar.sqrt(), 0.0), FockDim::new(dim).unwrap())
        .unwrap()
        .projector();
    let a0 = liouville::mean_amplitude(&rho0).re;

    let exact = liouville::propagate_analytic(&rho0, DiffusionKind::SquareRoot, gt).unwrap();
    let p = FeedbackParams::new(1.0, 1.0).unwrap();
    let integrated =
        liouville::integrate(&rho0, &p, &IntegratorConfig::for_gamma_t(&p, gt).unwrap()).unwrap();
    let log_exact = (liouville::mean_amplitude(&exact).re / a0).ln();
    let log_integrated = (liouville::mean_amplitude(integrated.last()).re / a0).ln();
    let predicted = -gt / (8.0 * nbar);
    let deviation = ((log_exact - predicted) / predicted).abs();

    let standard = liouville::propagate_analytic(&rho0, DiffusionKind::Standard, gt).unwrap();
    let ordinary = liouville::mean_amplitude(&standard).re / a0;
    let ordinary_err = (ordinary - (-gt / 2.0).exp()).abs();
    outcome(
        deviation < 0.05 && ordinary_err < 1e-8 && (log_exact - log_integrated).abs() < 1e-8,
        format!(
            "log-amplitude {log_exact:.6} vs {predicted:.6}, deviation {:.1}% (< 5%); \
             ordinary diffusion off e^-gt/2 by {ordinary_err:.1e} (< 1e-8)",
            100.0 * deviation
        ),
    )
}

fn c10_stirap() -> Outcome {
    let dim = 6;
    let mut fields: Vec<(String, DensityMatrix)> = (0..=3)
        .map(|n| (format!("|{n}>"), Ket::basis(dim, n).unwrap().projector()))
        .collect();
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    amps[..3].copy_from_slice(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0)]);
    fields.push((
        "superposition".into(),
        Ket::from_slice(&amps).unwrap().projector(),
    ));

    let adiabatic = PulseSchedule::with_pulse_product(100.0, 1.0).unwrap();
    let diabatic = PulseSchedule::with_pulse_product(1.0, 1.0).unwrap();
    let dt = 1e-5;
    let mut min_f = 1.0f64;
    let mut max_e = 0.0f64;
    let mut max_diabatic = 0.0f64;
    for (_, field) in &fields {
        let good = stirap::simulate_crossing(field, &adiabatic, dt)
            .unwrap()
            .diagnostics;
        min_f = min_f.min(good.transfer_fidelity);
        max_e = max_e.max(good.max_excited_population);
        let bad = stirap::simulate_crossing(field, &diabatic, dt)
            .unwrap()
            .diagnostics;
        max_diabatic = max_diabatic.max(bad.transfer_fidelity);
    }
    outcome(
        min_f > 0.99 && max_e < 0.05 && max_diabatic < 0.9,
        format!(
            "{} fields: min transfer fidelity {min_f:.5} (> 0.99), max excited {max_e:.4} (< 0.05), \
             diabatic max fidelity {max_diabatic:.3} (< 0.9)",
            fields.len()
        ),
    )
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let configs = [
        (
            "trajectories",
            "dim = 8\neta = 0.5\nt_final = 1.0\n[initial]\nkind = \"amplitudes\"\n\
             amplitudes = [[1.0, 0.0], [1.0, 0.0]]\n[traj]\nn_traj = 2000\nmaster_seed = 2024\n",
        ),
        ("sweep", "dim = 10\neta_list = [0.0, 0.3, 0.6, 1.0]\nt_final = 1.0\n[initial]\nkind = \"fock\"\nn = 4\n"),
        (
            "qubit-fidelity",
            "eta_list = [0.0, 0.5, 1.0]\nt_final = 1.0\n[initial]\nkind = \"qubit\"\n\
             qubit = { n = 1, m = 2, alpha_re = 0.6, beta_re = 0.0, beta_im = 0.8 }\n",
        ),
    ];
    let mut identical = Vec::new();
    for (scenario, text) in configs {
        let cfg = dir.path().join(format!("{scenario}.toml"));
        fs::write(&cfg, text).unwrap();
        let mut tables = Vec::new();
        for threads in ["1", "8"] {
            let out = dir.path().join(format!("{scenario}-{threads}.csv"));
            let status = Command::new(env!("CARGO_BIN_EXE_cavfb"))
                .args([
                    scenario,
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                ])
                .args(["--threads", threads])
                .status()
                .unwrap();
            tables.push(status.success().then(|| fs::read(&out).unwrap()));
        }
        identical.push((scenario, tables[0].is_some() && tables[0] == tables[1]));
    }
    outcome(
        identical.iter().all(|(_, same)| *same),
        format!("bit-identical with 1 vs 8 workers: {identical:?}"),
    )
}
