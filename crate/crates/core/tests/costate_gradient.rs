use ibc_core::costate::{backstep, backward_sweep_with, BackstepRule, Interpolation};
use ibc_core::gradient::gradient_field;
use ibc_core::*;

const ALPHA: f64 = 0.6;
const SIGMA: f64 = 0.35;
const QF: f64 = 0.8;
const GOAL: f64 = 0.4;

fn ou_setup(n_t: usize) -> (SpaceTimeGrid, JumpDiffusion, CostSpec, ControlSchedule) {
    let g = SpaceTimeGrid::new(0.0, 0.5, n_t, -10.0, 10.0, 401).unwrap();
    let m = JumpDiffusion::ornstein_uhlenbeck(ALPHA, SIGMA);
    let c = CostSpec {
        terminal_weight: QF,
        goal: GOAL,
        ..CostSpec::zero()
    };
    let s = ControlSchedule::zero(ScheduleKind::Feedforward, n_t, (-3.0, 3.0));
    (g, m, c, s)
}

#[test]
fn backstep_matches_one_step_conditional_moment() {
    let (g, m, c, s) = ou_setup(50);
    let dt = g.dt();
    let n = g.n_t();
    let next = terminal_costate(&g, &c);
    let zeros = vec![0.0; g.n_x()];
    let slice = backstep(&m, &c, &g, &s, n, &next, &zeros, 1000, StreamSeed::new(21)).unwrap();
    for j in (0..g.n_x()).filter(|&j| g.node(j).abs() < 8.0) {
        let x = g.node(j);
        let mean = x - ALPHA * x * dt;
        let exact = QF * ((mean - GOAL).powi(2) + SIGMA * SIGMA * dt);
        let se = slice.variance[j].sqrt();
        assert!(
            (slice.values[j] - exact).abs() <= 3.0 * se + 1e-12,
            "node {x}: {} vs {exact} (se {se})",
            slice.values[j]
        );
    }
}

#[test]
fn sweep_matches_discrete_ou_cost_to_go() {
    let (g, m, c, s) = ou_setup(50);
    let dt = g.dt();
    let field = backward_sweep(&m, &c, &g, &s, 1000, StreamSeed::new(22)).unwrap();
    let a = 1.0 - ALPHA * dt;
    for i in [0usize, 10, 25, 49] {
        let steps = (g.n_t() - i) as i32;
        let var: f64 = (0..steps).map(|k| SIGMA * SIGMA * dt * a.powi(2 * k)).sum();
        for j in (0..g.n_x()).step_by(20).filter(|&j| g.node(j).abs() < 6.0) {
            let x = g.node(j);
            let exact = QF * ((x * a.powi(steps) - GOAL).powi(2) + var);
            let got = field.values.get(i, j);
            let se = field.std_error(i, j);
            assert!(
                (got - exact).abs() <= 3.0 * se + 1e-9,
                "({i}, {x}): {got} vs {exact} (se {se})"
            );
        }
    }
}

#[test]
fn plain_and_reduced_sampling_agree() {
    let g = SpaceTimeGrid::paper_example(100, 61).unwrap();
    let m = make_example_model();
    let c = CostSpec::paper_example();
    let s = ControlSchedule::zero(ScheduleKind::StateLinear, 100, (-3.0, 3.0));
    let plain = backward_sweep_with(
        &m,
        &c,
        &g,
        &s,
        4000,
        StreamSeed::new(1),
        BackstepRule::plain(Interpolation::Cubic),
    )
    .unwrap();
    let reduced = backward_sweep(&m, &c, &g, &s, 4000, StreamSeed::new(2)).unwrap();
    for j in 5..56 {
        let se = (plain.variance.get(0, j) + reduced.variance.get(0, j)).sqrt();
        let gap = (plain.values.get(0, j) - reduced.values.get(0, j)).abs();
        assert!(gap <= 4.0 * se, "node {j}: gap {gap} se {se}");
    }
}

#[test]
fn costate_scales_with_cost() {
    let g = SpaceTimeGrid::paper_example(60, 61).unwrap();
    let m = make_example_model();
    let c = CostSpec::paper_example();
    let mut s = ControlSchedule::zero(ScheduleKind::StateLinear, 60, (-3.0, 3.0));
    s.u1.iter_mut()
        .enumerate()
        .for_each(|(i, u)| *u = 0.02 * i as f64);
    let seed = StreamSeed::new(5);
    let base = backward_sweep(&m, &c, &g, &s, 200, seed).unwrap();
    let doubled = backward_sweep(&m, &c.scaled(2.0), &g, &s, 200, seed).unwrap();
    for (a, b) in base.values.values().iter().zip(doubled.values.values()) {
        assert!((b - 2.0 * a).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn sweep_is_deterministic_per_seed() {
    let g = SpaceTimeGrid::paper_example(40, 61).unwrap();
    let m = make_example_model();
    let c = CostSpec::paper_example();
    let s = ControlSchedule::zero(ScheduleKind::StateLinear, 40, (-3.0, 3.0));
    let a = backward_sweep(&m, &c, &g, &s, 100, StreamSeed::new(9)).unwrap();
    let b = backward_sweep(&m, &c, &g, &s, 100, StreamSeed::new(9)).unwrap();
    let other = backward_sweep(&m, &c, &g, &s, 100, StreamSeed::new(10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.values, other.values);
}

/// Frozen-field functional written out directly from the model callbacks.
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
    (0..g.n_x())
        .map(|j| {
            let x = g.node(j);
            let u = (u1 + x * u2).clamp(-3.0, 3.0);
            (c.running(t, x, u) + m.drift(t, x, u) * d1[j] + 0.5 * m.sigma(t, x, u) * d2[j])
                * p[j]
                * g.dx()
        })
        .sum()
}

#[test]
fn gradient_matches_central_differences() {
    let g = SpaceTimeGrid::paper_example(300, 121).unwrap();
    let m = make_example_model();
    let c = CostSpec::paper_example();
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
    let mut s = ControlSchedule::zero(ScheduleKind::StateLinear, 300, (-3.0, 3.0));
    let i = 37;
    s.u1[i] = 0.3;
    s.u2[i] = -0.2;
    let t = g.time(i);
    let grad = hamiltonian_gradient(i, &s, &pi, &p, &m, &c, &g).unwrap();
    let h = 1e-5;
    let f = |a: f64, b: f64| frozen_functional(&g, &m, &c, &pi, &p, t, a, b);
    let fd = [
        (f(0.3 + h, -0.2) - f(0.3 - h, -0.2)) / (2.0 * h),
        (f(0.3, -0.2 + h) - f(0.3, -0.2 - h)) / (2.0 * h),
    ];
    for k in 0..2 {
        let rel = (grad[k] - fd[k]).abs() / fd[k].abs();
        assert!(
            rel <= 1e-6,
            "component {k}: {} vs {} (rel {rel})",
            grad[k],
            fd[k]
        );
    }
}

#[test]
fn gradient_signs_agree_with_cost_differences() {
    let g = SpaceTimeGrid::paper_example(300, 121).unwrap();
    let m = make_example_model();
    let c = CostSpec::paper_example();
    let init = InitialDistribution::Normal {
        mean: -1.0,
        variance: 0.5,
    };
    let s = ControlSchedule::zero(ScheduleKind::Feedforward, 300, (-3.0, 3.0));
    let costate = backward_sweep(&m, &c, &g, &s, 1000, StreamSeed::new(31)).unwrap();
    let density = simulate_density(&m, &s, &g, init, 20_000, StreamSeed::new(32)).unwrap();
    let grads = gradient_field(&s, &costate, &density, &m, &c, &g).unwrap();
    let delta = 0.5;
    let mut agree = 0;
    let probes = [5usize, 40, 75, 120, 160, 230];
    for &i in &probes {
        let mut up = s.clone();
        let mut down = s.clone();
        up.u1[i] += delta;
        down.u1[i] -= delta;
        let seed = StreamSeed::new(33);
        let diff = evaluate_cost(&m, &c, &g, &up, init, 20_000, seed)
            .unwrap()
            .mean
            - evaluate_cost(&m, &c, &g, &down, init, 20_000, seed)
                .unwrap()
                .mean;
        agree += (diff.signum() == grads[i][0].signum()) as usize;
    }
    assert_eq!(agree, probes.len());
}

#[test]
fn full_horizon_agrees_with_sweep_on_example() {
    // fine enough that interpolation bias stays below the reduced-variance error
    let g = SpaceTimeGrid::paper_example(300, 241).unwrap();
    let m = make_example_model();
    let c = CostSpec::paper_example();
    let s = ControlSchedule::zero(ScheduleKind::StateLinear, 300, (-3.0, 3.0));
    let sweep = backward_sweep(&m, &c, &g, &s, 1000, StreamSeed::new(41)).unwrap();
    for (i, j) in [(0usize, 80usize), (150, 160), (250, 200)] {
        let full = full_horizon_costate(
            &m,
            &c,
            &g,
            &s,
            i,
            g.node(j),
            20_000,
            StreamSeed::new(42 + i as u64),
        )
        .unwrap();
        let est = Estimate {
            mean: sweep.values.get(i, j),
            std_error: sweep.std_error(i, j),
        };
        let z = (est.mean - full.mean).abs() / est.combined_se(&full);
        assert!(
            z <= 3.0,
            "({i}, {j}): sweep {} full {} z {z}",
            est.mean,
            full.mean
        );
    }
}
