//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ibc_cli::{compare, load_config, run, Mode, Overrides, RunConfig};
use ibc_core::costate::backward_sweep;
use ibc_core::gradient::gradient_field;
use ibc_core::pide::{
    adjointness_refinement, feynman_kac_check, value_costate_identity_check, Advection,
    FeynmanKacSettings, IdentitySettings,
};
use ibc_core::process::JumpMap;
use ibc_core::*;

const SEED: u64 = 20_240_611;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn shipped_config() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper_example.toml");
    load_config(&path, &Overrides::default()).expect("shipped config loads")
}

fn example() -> (JumpDiffusion, SpaceTimeGrid, CostSpec, InitialDistribution) {
    let c = shipped_config();
    (c.model(), c.grid().unwrap(), c.cost(), c.init())
}

fn adjointness() -> Outcome {
    let (m, g, _, _) = example();
    let start = Instant::now();
    let study = adjointness_refinement(
        &m,
        &g,
        &[61, 121, 241],
        10,
        0.5 * g.t_final(),
        &|x| 0.4 - 0.2 * x,
        32,
        Advection::Central,
        StreamSeed::new(SEED),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let dx_ok = study
        .dx
        .iter()
        .zip([0.1, 0.05, 0.025])
        .all(|(a, b)| (a - b).abs() < 1e-12);
    let monotone = study
        .residuals
        .iter()
        .all(|r| r.windows(2).all(|w| w[1] < w[0]));
    let passed = dx_ok && monotone && study.min_order >= 1.8 && elapsed < Duration::from_secs(60);
    outcome(
        passed,
        format!(
            "10 pairs, dx {:?}, decreasing {monotone}, min order {:.3} (need 1.8), {:.1?}",
            study.dx, study.min_order, elapsed
        ),
    )
}

fn feynman_kac() -> Outcome {
    let (m, g, c, _) = example();
    let zero = ControlSchedule::zero(ScheduleKind::StateLinear, g.n_t(), g.control_bounds());
    let settings = FeynmanKacSettings::default();
    assert_eq!(
        (
            settings.k_backstep,
            settings.k_full_horizon,
            settings.probes
        ),
        (4000, 40_000, 20)
    );
    let start = Instant::now();
    let r = feynman_kac_check(&m, &c, &g, &zero, &settings, StreamSeed::new(SEED)).unwrap();
    let elapsed = start.elapsed();
    let max_z = r.nodes.iter().map(|n| n.z).fold(0.0, f64::max);
    let within = r.nodes.iter().filter(|n| n.z <= 3.0).count();
    let passed = r.passed && elapsed < Duration::from_secs(600);
    outcome(
        passed,
        format!(
            "{within}/{} nodes within 3 SE (max z {max_z:.2}); solver sup gap {:.4} at {:?}, ratio to allowance {:.3}; {:.1?}",
            r.nodes.len(),
            r.sup_gap,
            r.sup_location,
            r.sup_ratio,
            elapsed
        ),
    )
}

fn analytic_oracles() -> Outcome {
    let k = 100_000u64;
    // Ornstein-Uhlenbeck from a point mass
    let (alpha, sigma, x0, t) = (0.5, 0.5, 1.0, 1.0);
    let g = SpaceTimeGrid::new(0.0, t, 200, -10.0, 10.0, 401).unwrap();
    let ou = JumpDiffusion::ornstein_uhlenbeck(alpha, sigma);
    let quiet = ControlSchedule::zero(ScheduleKind::Feedforward, 200, (-3.0, 3.0));
    let seed = StreamSeed::new(SEED).derive(1);
    let finals: Vec<f64> = (0..k)
        .map(|i| {
            *simulate_path(&ou, &quiet, &g, x0, &mut seed.rng(i))
                .unwrap()
                .states
                .last()
                .unwrap()
        })
        .collect();
    let est = Estimate::from_samples(&finals);
    let var = finals.iter().map(|x| (x - est.mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let exact_mean = x0 * (-alpha * t).exp();
    let exact_var = sigma * sigma * (1.0 - (-2.0 * alpha * t).exp()) / (2.0 * alpha);
    let mean_err = (est.mean / exact_mean - 1.0).abs();
    let var_err = (var / exact_var - 1.0).abs();

    // Poisson counts
    let (rate, horizon) = (2.0, 2.0);
    let g = SpaceTimeGrid::new(0.0, horizon, 200, -10.0, 10.0, 401).unwrap();
    let pj = JumpDiffusion::pure_jump(
        rate,
        JumpMap::Additive { scale: 0.0 },
        MarkDistribution::Dirac(1.0),
    );
    let seed = StreamSeed::new(SEED).derive(2);
    let jumps: u64 = (0..k)
        .map(|i| {
            simulate_path(&pj, &quiet, &g, 0.0, &mut seed.rng(i))
                .unwrap()
                .jump_count as u64
        })
        .sum();
    let count_err = (jumps as f64 / k as f64 / (rate * horizon) - 1.0).abs();

    let jac = make_example_model()
        .inverse_jump(0.0, 1.7, 1.0)
        .unwrap()
        .jacobian;
    let jac_err = (jac - 2.0 / 3.0).abs();
    let passed = mean_err < 0.02 && var_err < 0.02 && count_err < 0.02 && jac_err <= 1e-12;
    outcome(
        passed,
        format!(
            "OU mean err {:.3}%, var err {:.3}%, Poisson count err {:.3}%, Jacobian err {jac_err:.1e}",
            100.0 * mean_err,
            100.0 * var_err,
            100.0 * count_err
        ),
    )
}

/// Frozen-field functional built directly from the model callbacks.
#[allow(clippy::too_many_arguments)]
fn frozen_functional(
    g: &SpaceTimeGrid,
    m: &JumpDiffusion,
    c: &CostSpec,
    pi: &[f64],
    p: &[f64],
    t: f64,
    u1: f64,
    u2: f64,
) -> f64 {
    let (d1, d2) = g.fd_derivatives(pi);
    let (lo, hi) = g.control_bounds();
    (0..g.n_x())
        .map(|j| {
            let x = g.node(j);
            let u = (u1 + x * u2).clamp(lo, hi);
            (c.running(t, x, u) + m.drift(t, x, u) * d1[j] + 0.5 * m.sigma(t, x, u) * d2[j])
                * p[j]
                * g.dx()
        })
        .sum()
}

fn gradient_correctness() -> Outcome {
    let (m, g, c, init) = example();
    // deterministic part
    let p = InitialDistribution::Normal {
        mean: -0.3,
        variance: 0.3,
    }
    .grid_density(&g);
    let pi: Vec<f64> = g
        .nodes()
        .iter()
        .map(|&x| 1.0 + 0.5 * x + 0.3 * (2.0 * x).sin() + 0.1 * x * x)
        .collect();
    let mut worst: f64 = 0.0;
    for (i, u1, u2) in [(37usize, 0.3, -0.2), (150, -0.8, 0.1), (260, 1.1, 0.35)] {
        let mut s = ControlSchedule::zero(ScheduleKind::StateLinear, g.n_t(), g.control_bounds());
        s.u1[i] = u1;
        s.u2[i] = u2;
        let t = g.time(i);
        let grad = hamiltonian_gradient(i, &s, &pi, &p, &m, &c, &g).unwrap();
        let h = 1e-5;
        let f = |a: f64, b: f64| frozen_functional(&g, &m, &c, &pi, &p, t, a, b);
        let fd = [
            (f(u1 + h, u2) - f(u1 - h, u2)) / (2.0 * h),
            (f(u1, u2 + h) - f(u1, u2 - h)) / (2.0 * h),
        ];
        for k in 0..2 {
            worst = worst.max((grad[k] - fd[k]).abs() / fd[k].abs());
        }
    }

    // full loop: sign of the summed gradient over a window against a
    // common-random-numbers cost difference
    let s = ControlSchedule::zero(ScheduleKind::StateLinear, g.n_t(), g.control_bounds());
    let seed = StreamSeed::new(SEED).derive(4);
    let costate = backward_sweep(&m, &c, &g, &s, 1000, seed.derive(1)).unwrap();
    let density = simulate_density(&m, &s, &g, init, 100_000, seed.derive(2)).unwrap();
    let grads = gradient_field(&s, &costate, &density, &m, &c, &g).unwrap();
    let window = g.n_t() / 20;
    let delta = 0.3;
    let mut probes = 0;
    let mut agree = 0;
    for w in 0..20 {
        for comp in 0..2 {
            let range = w * window..(w + 1) * window;
            let predicted: f64 = range.clone().map(|i| grads[i][comp]).sum();
            let mut up = s.clone();
            let mut down = s.clone();
            for i in range {
                let (a, b) = if comp == 0 {
                    (&mut up.u1[i], &mut down.u1[i])
                } else {
                    (&mut up.u2[i], &mut down.u2[i])
                };
                *a += delta;
                *b -= delta;
            }
            let crn = seed.derive(3);
            let diff = evaluate_cost(&m, &c, &g, &up, init, 40_000, crn)
                .unwrap()
                .mean
                - evaluate_cost(&m, &c, &g, &down, init, 40_000, crn)
                    .unwrap()
                    .mean;
            probes += 1;
            agree += (diff.signum() == predicted.signum()) as usize;
        }
    }
    let rate = agree as f64 / probes as f64;
    outcome(
        worst <= 1e-6 && rate >= 0.95,
        format!("max relative FD error {worst:.2e} (need 1e-6); sign agreement {agree}/{probes}"),
    )
}

fn value_identity() -> Outcome {
    let (m, g, c, init) = example();
    let zero = ControlSchedule::zero(ScheduleKind::StateLinear, g.n_t(), g.control_bounds());
    let settings = IdentitySettings {
        k_backstep: 4000,
        k_ensemble: 100_000,
        time_indices: vec![0, g.n_t()],
        gate: 3.0,
    };
    let r = value_costate_identity_check(&m, &c, &g, &zero, init, &settings, StreamSeed::new(SEED))
        .unwrap();
    let start = &r.entries[0];
    let end = &r.entries[1];
    let bound = ibc_cli::runner::terminal_node_bound(&c, &g);
    let passed = start.within_gate && end.gap <= bound;
    outcome(
        passed,
        format!(
            "t0 gap {:.5} vs 3 SE {:.5}; T gap {:.2e} vs quadrature bound {:.2e}",
            start.gap,
            3.0 * start.combined_se,
            end.gap,
            bound
        ),
    )
}

fn read_history(dir: &Path, kind: &str) -> Vec<f64> {
    let text = fs::read_to_string(dir.join("cost_per_iteration.csv")).unwrap();
    text.lines()
        .skip(2)
        .filter_map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            (cols[0] == kind).then(|| cols[2].parse().unwrap())
        })
        .collect()
}

fn smoothed_non_increasing(costs: &[f64]) -> bool {
    let avg: Vec<f64> = costs
        .windows(5)
        .map(|w| w.iter().sum::<f64>() / 5.0)
        .collect();
    avg.windows(2).all(|w| w[1] <= w[0])
}

fn optimization(scratch: &Path) -> Outcome {
    let mut config = shipped_config();
    config.output_dir = scratch.join("compare");
    let start = Instant::now();
    let kinds = [ScheduleKind::StateLinear, ScheduleKind::Feedforward];
    let (_, report) = compare(&config, &kinds).unwrap();
    let elapsed = start.elapsed();
    let mut passed = elapsed < Duration::from_secs(1800);
    let mut parts = Vec::new();
    for e in &report.entries {
        let history = read_history(&config.output_dir, &e.schedule_kind);
        let smooth = smoothed_non_increasing(&history);
        let ok = e.converged && e.iterations_used <= 200 && e.final_gradient_norm < 1e-2 && smooth;
        passed &= ok;
        parts.push(format!(
            "{}: converged {} in {} iters, |g| {:.4}, smoothed cost non-increasing {smooth}, J {:.4} +- {:.4}",
            e.schedule_kind, e.converged, e.iterations_used, e.final_gradient_norm, e.final_cost, e.final_cost_se
        ));
    }
    let (sl, ff) = (&report.entries[0], &report.entries[1]);
    let ordered = sl.final_cost <= ff.final_cost;
    passed &= ordered;
    parts.push(format!(
        "state_linear <= feedforward {ordered}; {:.0?}",
        elapsed
    ));
    outcome(passed, parts.join("; "))
}

fn reproducibility(scratch: &Path) -> Outcome {
    let mut config = shipped_config();
    config.optimizer.k_forward = 20_000;
    config.optimizer.k_cost = 20_000;
    config.optimizer.max_iters = 4;
    config.verify.enabled = false;
    let dirs: Vec<PathBuf> = ["first", "second"]
        .iter()
        .map(|d| scratch.join(d))
        .collect();
    for d in &dirs {
        config.output_dir = d.clone();
        run(&config, Mode::Full).unwrap();
    }
    let mut identical = 0;
    let mut differing = Vec::new();
    for name in ibc_cli::runner::RUN_CSVS {
        if fs::read(dirs[0].join(name)).unwrap() == fs::read(dirs[1].join(name)).unwrap() {
            identical += 1;
        } else {
            differing.push(name);
        }
    }
    outcome(
        differing.is_empty(),
        format!(
            "{identical}/{} CSV artifacts byte-identical {differing:?}",
            ibc_cli::runner::RUN_CSVS.len()
        ),
    )
}

fn main() {
    // `cargo test -- --list` and filters from other targets
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let scratch = tempfile::tempdir().unwrap();
    let criteria: [(&str, Box<dyn Fn() -> Outcome>); 7] = [
        ("1 adjointness refinement", Box::new(adjointness)),
        ("2 Feynman-Kac cross-check", Box::new(feynman_kac)),
        ("3 analytic oracles", Box::new(analytic_oracles)),
        ("4 gradient correctness", Box::new(gradient_correctness)),
        ("5 value-costate identity", Box::new(value_identity)),
        (
            "6 optimization behavior",
            Box::new(|| optimization(scratch.path())),
        ),
        (
            "7 reproducibility",
            Box::new(|| reproducibility(scratch.path())),
        ),
    ];
    // IBC_ACCEPTANCE=2,5 runs a subset
    let only: Option<Vec<String>> = std::env::var("IBC_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').map(|s| s.trim().to_string()).collect());
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in &criteria {
        let number = name.split(' ').next().unwrap_or_default();
        if only
            .as_ref()
            .is_some_and(|o| !o.iter().any(|n| n == number))
        {
            println!("criterion {name}: SKIP");
            continue;
        }
        let o = check();
        ran += 1;
        failed += !o.passed as usize;
        println!(
            "criterion {name}: {} ({})",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
