//! Hamiltonian gradient and the outer descent loop.
//!
//! The gradient at time index `i` is the derivative of the frozen-field
//! functional
//!
//! ```text
//! H_i(u1, u2) = sum_j [ l(t_i, x_j, u(x_j)) + F(t_i, x_j, u(x_j)) pi_x(x_j)
//!                       + 1/2 Sigma(t_i, x_j, u(x_j)) pi_xx(x_j) + jump terms ] p(x_j) dx
//! ```
//!
//! with `u(x) = u1 + x u2` clamped to the control bounds. Jump terms do not
//! depend on `u` and drop out. By the chain rule,
//!
//! ```text
//! dH/du1 = sum_j b_j p_j dx,   dH/du2 = sum_j x_j b_j p_j dx,
//! b_j = l_u + F_u pi_x + 1/2 Sigma_u pi_xx
//! ```
//!
//! where nodes whose realized control sits on a bound contribute nothing.

use alloc::vec::Vec;

use crate::cost::CostSpec;
use crate::costate::{backward_sweep, CostateField};
use crate::density::{
    evaluate_cost, evaluate_cost_conditional, simulate_density, DensityField, InitialDistribution,
};
use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::par;
use crate::process::ProcessModel;
use crate::rng::{tag, StreamSeed};
use crate::schedule::{ControlSchedule, ScheduleKind};

/// Gradient of the frozen-field Hamiltonian at time index `t_index` with
/// respect to `(u1, u2)`; the second entry is zero for feedforward schedules.
#[allow(clippy::too_many_arguments)]
pub fn hamiltonian_gradient<M: ProcessModel + ?Sized>(
    t_index: usize,
    schedule: &ControlSchedule,
    costate: &[f64],
    density: &[f64],
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
) -> Result<[f64; 2]> {
    if t_index >= schedule.len() {
        return Err(Error::IndexOutOfRange {
            index: t_index,
            len: schedule.len(),
        });
    }
    if costate.len() != grid.n_x() || density.len() != grid.n_x() {
        return Err(Error::invalid(
            "field slice",
            "length differs from the node count",
        ));
    }
    let t = grid.time(t_index);
    let (d1, d2) = grid.fd_derivatives(costate);
    let dx = grid.dx();
    let mut g = [0.0, 0.0];
    for j in 0..grid.n_x() {
        if density[j] == 0.0 {
            continue;
        }
        let x = grid.node(j);
        let sens = schedule.parameter_sensitivity(t_index, x);
        if sens == [0.0, 0.0] {
            continue;
        }
        let u = schedule.realize(t_index, x);
        let jac = model
            .control_jacobian(t, x, u)
            .ok_or(Error::MissingControlJacobian)?;
        let b = cost.running_du(t, x, u) + jac.drift_du * d1[j] + 0.5 * jac.sigma_du * d2[j];
        let w = b * density[j] * dx;
        g[0] += w * sens[0];
        g[1] += w * sens[1];
    }
    Ok(g)
}

/// Gradient at every time index, pairing costate slice `i` with density slice `i`.
pub fn gradient_field<M: ProcessModel + ?Sized>(
    schedule: &ControlSchedule,
    costate: &CostateField,
    density: &DensityField,
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
) -> Result<Vec<[f64; 2]>> {
    par::try_map_indices(grid.n_t(), |i| {
        hamiltonian_gradient(
            i,
            schedule,
            costate.values.slice(i),
            density.values.slice(i),
            model,
            cost,
            grid,
        )
    })
}

/// `u <- u - eps g` at every index, then the parameters are projected so the
/// realized control stays within bounds on `domain = (x_lo, x_hi)`.
pub fn update_control(
    schedule: &ControlSchedule,
    gradients: &[[f64; 2]],
    eps: f64,
    domain: (f64, f64),
) -> ControlSchedule {
    let mut next = schedule.clone();
    for (i, g) in gradients.iter().enumerate().take(next.len()) {
        next.u1[i] -= eps * g[0];
        if next.kind == ScheduleKind::StateLinear {
            next.u2[i] -= eps * g[1];
        }
    }
    next.clamp_parameters(domain.0, domain.1);
    next
}

/// Sup-norm of the projected gradient `(u - P(u - eps g)) / eps`.
///
/// Equals the plain sup-norm wherever the step stays inside the feasible set.
pub fn projected_gradient_norm(
    schedule: &ControlSchedule,
    gradients: &[[f64; 2]],
    eps: f64,
    domain: (f64, f64),
) -> f64 {
    let next = update_control(schedule, gradients, eps, domain);
    let mut norm: f64 = 0.0;
    for i in 0..gradients.len().min(schedule.len()) {
        norm = norm.max(((schedule.u1[i] - next.u1[i]) / eps).abs());
        norm = norm.max(((schedule.u2[i] - next.u2[i]) / eps).abs());
    }
    norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbcOptions {
    /// Samples per node in the backward recursion.
    pub k_backstep: usize,
    /// Ensemble size for the density.
    pub k_forward: usize,
    /// Paths per cost evaluation.
    pub k_cost: usize,
    pub step_size: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub schedule_kind: ScheduleKind,
    /// Reuse the same noise in every iteration.
    pub reuse_noise: bool,
    /// Halve the step while the cost increases; a step that still raises the
    /// cost after `max_halvings` halvings is not taken.
    pub backtracking: bool,
    pub max_halvings: usize,
    /// Pair the gradient with the renormalized density.
    pub renormalize: bool,
    /// Score schedules with the survival-conditioned estimator, which varies
    /// smoothly with the control under common noise.
    pub conditional_cost: bool,
    /// Starting schedule; zero control when absent.
    pub initial: Option<ControlSchedule>,
}

impl Default for IbcOptions {
    fn default() -> Self {
        IbcOptions {
            k_backstep: 1000,
            k_forward: 10_000,
            k_cost: 10_000,
            step_size: 1.0,
            tolerance: 1e-2,
            max_iters: 200,
            seed: 42,
            schedule_kind: ScheduleKind::StateLinear,
            reuse_noise: false,
            backtracking: true,
            max_halvings: 6,
            renormalize: false,
            conditional_cost: true,
            initial: None,
        }
    }
}

impl IbcOptions {
    pub fn validate(&self) -> Result<()> {
        if self.k_backstep == 0 || self.k_forward == 0 || self.k_cost == 0 {
            return Err(Error::invalid(
                "optimizer",
                "sample counts must be positive",
            ));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("optimizer.step_size", "must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("optimizer.tolerance", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("optimizer.max_iters", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Cost of the schedule at the start of each iteration, plus the final one.
    pub cost_per_iteration: Vec<f64>,
    pub cost_se: Vec<f64>,
    pub gradient_norm_per_iteration: Vec<f64>,
    /// Step taken after each iteration; zero when none was taken.
    pub step_sizes: Vec<f64>,
    pub final_schedule: ControlSchedule,
    pub final_costate: CostateField,
    pub final_density: DensityField,
    pub final_gradient: Vec<[f64; 2]>,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Iterates costate sweep, density estimate, gradient and control update until
/// the projected gradient sup-norm drops below the tolerance.
///
/// Non-convergence is reported through `converged = false`, not an error.
pub fn run_ibc<M: ProcessModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    init: InitialDistribution,
    options: &IbcOptions,
) -> Result<OptimizationResult> {
    options.validate()?;
    init.validate(grid)?;
    let domain = (grid.x_min(), grid.x_max());
    let mut schedule = match &options.initial {
        Some(s) if s.len() != grid.n_t() => {
            return Err(Error::invalid(
                "optimizer.initial",
                "length differs from N_t",
            ))
        }
        Some(s) => s.clone(),
        None => ControlSchedule::zero(options.schedule_kind, grid.n_t(), grid.control_bounds()),
    };
    schedule.clamp_parameters(domain.0, domain.1);

    let root = StreamSeed::new(options.seed);
    let evaluate = |s: &ControlSchedule, key: u64| {
        let seed = root.derive(tag::COST).derive(key);
        if options.conditional_cost {
            evaluate_cost_conditional(model, cost, grid, s, init, options.k_cost, seed)
        } else {
            evaluate_cost(model, cost, grid, s, init, options.k_cost, seed)
        }
    };

    let mut costs = Vec::new();
    let mut cost_se = Vec::new();
    let mut norms = Vec::new();
    let mut steps = Vec::new();
    let mut current = evaluate(&schedule, 0)?;
    let mut converged = false;
    let mut last = None;
    let mut eps = options.step_size;
    // bumped after a failed line search so that the next gradient and cost see new noise
    let mut refresh = 0u64;

    for iter in 0..options.max_iters {
        let key = if options.reuse_noise {
            refresh
        } else {
            iter as u64
        };
        let costate = backward_sweep(
            model,
            cost,
            grid,
            &schedule,
            options.k_backstep,
            root.derive(tag::BACKSTEP).derive(key),
        )?;
        let costate = CostateField {
            iteration: iter,
            ..costate
        };
        let mut density = simulate_density(
            model,
            &schedule,
            grid,
            init,
            options.k_forward,
            root.derive(tag::FORWARD).derive(key),
        )?;
        if options.renormalize {
            density = density.renormalized();
        }
        let grads = gradient_field(&schedule, &costate, &density, model, cost, grid)?;
        let norm = projected_gradient_norm(&schedule, &grads, 1.0, domain);
        costs.push(current.mean);
        cost_se.push(current.std_error);
        norms.push(norm);
        if norm < options.tolerance {
            converged = true;
            steps.push(0.0);
            last = Some((costate, density, grads));
            break;
        }

        let mut trial = eps;
        let mut candidate = update_control(&schedule, &grads, trial, domain);
        let mut value = evaluate(&candidate, refresh)?;
        let mut accepted = true;
        if options.backtracking {
            let mut halvings = 0;
            while value.mean >= current.mean && halvings < options.max_halvings {
                trial *= 0.5;
                halvings += 1;
                candidate = update_control(&schedule, &grads, trial, domain);
                value = evaluate(&candidate, refresh)?;
            }
            accepted = value.mean < current.mean;
        }
        if accepted {
            steps.push(trial);
            schedule = candidate;
            current = value;
            eps = (2.0 * trial).min(options.step_size);
        } else {
            steps.push(0.0);
            refresh += 1;
            current = evaluate(&schedule, refresh)?;
            eps = options.step_size;
        }
        last = Some((costate, density, grads));
    }

    let iterations_used = norms.len();
    if !converged {
        costs.push(current.mean);
        cost_se.push(current.std_error);
    }
    let (final_costate, final_density, final_gradient) = last.expect("at least one iteration");
    Ok(OptimizationResult {
        cost_per_iteration: costs,
        cost_se,
        gradient_norm_per_iteration: norms,
        step_sizes: steps,
        final_schedule: schedule,
        final_costate,
        final_density,
        final_gradient,
        iterations_used,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{
        make_example_model, Drift, JumpDiffusion, JumpMap, MarkDistribution, Volatility,
    };

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::paper_example(300, 121).unwrap()
    }

    fn normal_slice(g: &SpaceTimeGrid) -> Vec<f64> {
        InitialDistribution::Normal {
            mean: -0.5,
            variance: 0.4,
        }
        .grid_density(g)
    }

    #[test]
    fn constant_costate_zero_control_gives_zero() {
        let g = grid();
        let s = ControlSchedule::zero(ScheduleKind::StateLinear, 300, (-3.0, 3.0));
        let pi = alloc::vec![2.0; 121];
        let out = hamiltonian_gradient(
            5,
            &s,
            &pi,
            &normal_slice(&g),
            &make_example_model(),
            &CostSpec::paper_example(),
            &g,
        )
        .unwrap();
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn linear_costate_pairs_with_moments() {
        let g = grid();
        let s = ControlSchedule::zero(ScheduleKind::StateLinear, 300, (-3.0, 3.0));
        let slope = 1.7;
        let pi: Vec<f64> = g.nodes().iter().map(|x| slope * x).collect();
        let p = normal_slice(&g);
        let mass: f64 = p.iter().sum::<f64>() * g.dx();
        let first: f64 = g.nodes().iter().zip(&p).map(|(x, v)| x * v).sum::<f64>() * g.dx();
        let out = hamiltonian_gradient(
            0,
            &s,
            &pi,
            &p,
            &make_example_model(),
            &CostSpec::paper_example(),
            &g,
        )
        .unwrap();
        assert!((out[0] - slope * mass).abs() < 1e-12);
        assert!((out[1] - slope * first).abs() < 1e-12);
    }

    #[test]
    fn update_arithmetic_and_clamp() {
        let s = ControlSchedule::constant(ScheduleKind::Feedforward, 4, 0.5, (-3.0, 3.0));
        let same = update_control(&s, &[[0.0, 0.0]; 4], 0.1, (-3.0, 3.0));
        assert_eq!(same, s);
        let down = update_control(&s, &[[1.0, 0.0]; 4], 0.1, (-3.0, 3.0));
        assert!(down.u1.iter().all(|&u| (u - 0.4).abs() < 1e-15));
        let up = update_control(&s, &[[-100.0, 0.0]; 4], 0.1, (-3.0, 3.0));
        assert!(up.u1.iter().all(|&u| u == 3.0));
        assert_eq!(up.realize(0, 1.0), 3.0);
    }

    #[test]
    fn missing_jacobian_is_reported() {
        struct Bare(MarkDistribution);
        impl ProcessModel for Bare {
            fn drift(&self, _: f64, _: f64, u: f64) -> f64 {
                u
            }
            fn diffusion(&self, _: f64, _: f64, _: f64) -> f64 {
                0.1
            }
            fn jump_amplitude(&self, _: f64, _: f64, _: f64) -> f64 {
                0.0
            }
            fn jump_rate(&self, _: f64, _: f64) -> f64 {
                0.0
            }
            fn marks(&self) -> &MarkDistribution {
                &self.0
            }
        }
        let g = grid();
        let s = ControlSchedule::zero(ScheduleKind::Feedforward, 300, (-3.0, 3.0));
        let pi = g.nodes();
        let r = hamiltonian_gradient(
            0,
            &s,
            &pi,
            &normal_slice(&g),
            &Bare(MarkDistribution::Dirac(0.0)),
            &CostSpec::zero(),
            &g,
        );
        assert_eq!(r, Err(Error::MissingControlJacobian));
    }

    fn quiet_model() -> JumpDiffusion {
        JumpDiffusion {
            drift: Drift::MeanReverting { alpha: 0.5 },
            volatility: Volatility::Constant(0.1),
            jump: JumpMap::None,
            rate: 0.0,
            marks: MarkDistribution::Dirac(0.0),
        }
    }

    #[test]
    fn control_effort_only_converges_to_zero() {
        let g = SpaceTimeGrid::new(0.0, 1.0, 20, -3.0, 3.0, 61).unwrap();
        let cost = CostSpec {
            control_weight: 1.0,
            ..CostSpec::zero()
        };
        let opts = IbcOptions {
            k_backstep: 50,
            k_forward: 500,
            k_cost: 200,
            step_size: 0.5,
            max_iters: 100,
            schedule_kind: ScheduleKind::Feedforward,
            initial: Some(ControlSchedule::constant(
                ScheduleKind::Feedforward,
                20,
                1.0,
                (-3.0, 3.0),
            )),
            ..IbcOptions::default()
        };
        let r = run_ibc(
            &quiet_model(),
            &cost,
            &g,
            InitialDistribution::Delta(0.0),
            &opts,
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.final_schedule.u1.iter().all(|u| u.abs() <= 1e-2));
    }

    #[test]
    fn start_at_minimizer_stops_immediately() {
        let g = SpaceTimeGrid::new(0.0, 1.0, 20, -3.0, 3.0, 61).unwrap();
        let cost = CostSpec {
            control_weight: 1.0,
            ..CostSpec::zero()
        };
        let start = ControlSchedule::zero(ScheduleKind::Feedforward, 20, (-3.0, 3.0));
        let opts = IbcOptions {
            k_backstep: 20,
            k_forward: 100,
            k_cost: 50,
            schedule_kind: ScheduleKind::Feedforward,
            initial: Some(start.clone()),
            ..IbcOptions::default()
        };
        let r = run_ibc(
            &quiet_model(),
            &cost,
            &g,
            InitialDistribution::Delta(0.0),
            &opts,
        )
        .unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations_used, 1);
        assert_eq!(r.final_schedule, start);
    }
}
