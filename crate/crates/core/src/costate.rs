//! Costate estimation by backward one-step Monte Carlo recursion, and the
//! full-horizon Feynman-Kac estimator it is checked against.
//!
//! The recursion computes, for every node `x_j` and time index `i - 1`,
//!
//! ```text
//! pi(t_{i-1}, x_j) = l(t_{i-1}, x_j, u) dt + (1/K) sum_k V_k
//! V_k = pi(t_i, x'_k)      if x'_k survives at t_i
//!     = Xi - w t_i          otherwise
//! ```
//!
//! where `x'_k` is a one-step sample from `x_j` and `pi(t_i, .)` is read by
//! cubic interpolation unless linear is requested. All nodes of one time index
//! reuse the same draws, so that the spatial derivatives of the estimated
//! field carry little sampling noise. Draws are fresh for every time index.
//!
//! By default the normal draws come in antithetic pairs and the jump indicator
//! is integrated out: each draw averages the no-jump and jump arrivals with
//! weights `1 - lambda dt` and `lambda dt`. Both keep every node estimate
//! unbiased given the next slice. [`BackstepRule::plain`] turns them off.
//!
//! Slices store the continuation value at nodes that lie inside an obstacle
//! active at that time index; absorption is decided on arrival samples only.

use alloc::vec::Vec;

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::grid::{Field, SpaceTimeGrid};
use crate::math;
use crate::par;
use crate::process::{check_rate, walk_path, ProcessModel, StepNoise};
use crate::rng::StreamSeed;
use crate::schedule::ControlSchedule;
use crate::stats::Estimate;

/// Costate values with a Monte Carlo variance estimate per node.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateField {
    pub values: Field,
    /// Propagated variance of each value.
    pub variance: Field,
    pub samples_per_node: usize,
    pub iteration: usize,
    pub seed: u64,
}

impl CostateField {
    pub fn std_error(&self, i: usize, j: usize) -> f64 {
        math::sqrt(self.variance.get(i, j))
    }
}

/// One time slice of the recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateSlice {
    pub values: Vec<f64>,
    pub variance: Vec<f64>,
}

/// `pi(T, x_j) = phi(x_j)` at every node.
pub fn terminal_costate(grid: &SpaceTimeGrid, cost: &CostSpec) -> Vec<f64> {
    (0..grid.n_x())
        .map(|j| cost.terminal(grid.node(j)))
        .collect()
}

/// How the next slice is read between nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Linear,
    /// Four-point Lagrange; no `O(dx^2)` smoothing per step.
    #[default]
    Cubic,
}

/// Interpolated value and the variance `(sum_m w_m sd_m)^2`, which is exact
/// when the errors at neighboring nodes are perfectly correlated.
#[inline]
fn read_slice(
    grid: &SpaceTimeGrid,
    values: &[f64],
    variance: &[f64],
    x: f64,
    how: Interpolation,
) -> (f64, f64) {
    match how {
        Interpolation::Cubic if grid.n_x() >= 4 => {
            let (j, w) = grid.cubic_stencil(x);
            let mut v = 0.0;
            let mut sd = 0.0;
            for m in 0..4 {
                v += w[m] * values[j + m];
                sd += w[m] * math::sqrt(variance[j + m]);
            }
            (v, sd * sd)
        }
        _ => (grid.interp(values, x), grid.interp(variance, x)),
    }
}

/// Computes the slice at time index `i - 1` from the slice `next` at `i`.
///
/// `next_variance` is the variance of `next`; it is carried backward as
/// `Var = s^2 / K + mean_k sd_k^2`, where `K` counts independent draws (pairs
/// when antithetic), `s^2` is their sample variance and `sd_k` is the standard
/// deviation of `next` carried to draw `k` with the same weights as its value.
/// The fresh sampling error of this step is uncorrelated with the error
/// inherited from `next`, and the second term bounds the inherited variance
/// when neighboring errors move together, which the shared draws make nearly
/// true.
#[allow(clippy::too_many_arguments)]
pub fn backstep<M: ProcessModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    i: usize,
    next: &[f64],
    next_variance: &[f64],
    samples: usize,
    seed: StreamSeed,
) -> Result<CostateSlice> {
    backstep_with(
        model,
        cost,
        grid,
        schedule,
        i,
        next,
        next_variance,
        samples,
        seed,
        BackstepRule::default(),
    )
}

/// Sampling rule of one backstep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackstepRule {
    pub interpolation: Interpolation,
    /// Pair every normal draw with its negative; `K` draws form `ceil(K / 2)` pairs.
    pub antithetic: bool,
    /// Average the jump and no-jump arrivals with weights `lambda dt` and
    /// `1 - lambda dt` instead of drawing the jump indicator.
    pub condition_jumps: bool,
}

impl Default for BackstepRule {
    fn default() -> Self {
        BackstepRule {
            interpolation: Interpolation::default(),
            antithetic: true,
            condition_jumps: true,
        }
    }
}

impl BackstepRule {
    /// One independent draw per sample, jump indicator sampled.
    pub fn plain(interpolation: Interpolation) -> Self {
        BackstepRule {
            interpolation,
            antithetic: false,
            condition_jumps: false,
        }
    }
}

/// [`backstep`] with an explicit sampling rule.
#[allow(clippy::too_many_arguments)]
pub fn backstep_with<M: ProcessModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    i: usize,
    next: &[f64],
    next_variance: &[f64],
    samples: usize,
    seed: StreamSeed,
    rule: BackstepRule,
) -> Result<CostateSlice> {
    if i == 0 || i > grid.n_t() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: grid.n_t() + 1,
        });
    }
    if samples == 0 {
        return Err(Error::invalid(
            "sample count",
            "need at least one sample per node",
        ));
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("costate slice", "next slice is not finite"));
    }
    let prev = i - 1;
    let t = grid.time(prev);
    let dt = grid.dt();
    let sqrt_dt = math::sqrt(dt);
    for j in 0..grid.n_x() {
        check_rate(model, t, grid.node(j), dt)?;
    }
    let units = if rule.antithetic {
        samples.div_ceil(2)
    } else {
        samples
    };
    let mut rng = seed.rng(prev as u64);
    let noise: Vec<StepNoise> = (0..units)
        .map(|_| StepNoise::draw(&mut rng, model.marks()))
        .collect();
    let payoff = cost.collision_payoff(grid.time(i));
    let k = units as f64;
    let signs: &[f64] = if rule.antithetic {
        &[1.0, -1.0]
    } else {
        &[1.0]
    };
    let share = 1.0 / signs.len() as f64;

    let nodes = par::map_indices(grid.n_x(), |j| {
        let x = grid.node(j);
        let u = schedule.realize(prev, x);
        let running = cost.running(t, x, u) * dt;
        let mean_step = x + model.drift(t, x, u) * dt;
        let spread = model.diffusion(t, x, u) * sqrt_dt;
        let p_jump = model.jump_rate(t, x) * dt;
        // value and standard deviation carried from the next slice at an arrival point
        let arrive = |y: f64| {
            if grid.survives(i, y) {
                let (value, var) = read_slice(grid, next, next_variance, y, rule.interpolation);
                (value, math::sqrt(var))
            } else {
                (payoff, 0.0)
            }
        };
        // Welford accumulation over units
        let mut mean = 0.0;
        let mut m2 = 0.0;
        let mut carried = 0.0;
        for (n, draw) in noise.iter().enumerate() {
            let mut v = 0.0;
            let mut sd = 0.0;
            for &sign in signs {
                let pre = mean_step + spread * sign * draw.z;
                let (a, b) = if rule.condition_jumps {
                    let (v0, s0) = arrive(pre);
                    let (v1, s1) = arrive(pre + model.jump_amplitude(t, pre, draw.mark));
                    (
                        (1.0 - p_jump) * v0 + p_jump * v1,
                        (1.0 - p_jump) * s0 + p_jump * s1,
                    )
                } else if draw.jump_draw < p_jump {
                    arrive(pre + model.jump_amplitude(t, pre, draw.mark))
                } else {
                    arrive(pre)
                };
                v += share * a;
                sd += share * b;
            }
            carried += sd * sd;
            let delta = v - mean;
            mean += delta / (n + 1) as f64;
            m2 += delta * (v - mean);
        }
        let sample_var = if units > 1 { m2 / (k - 1.0) } else { 0.0 };
        (running + mean, sample_var / k + carried / k)
    });

    let mut values = Vec::with_capacity(grid.n_x());
    let mut variance = Vec::with_capacity(grid.n_x());
    for (j, (v, var)) in nodes.into_iter().enumerate() {
        if !v.is_finite() || !var.is_finite() {
            return Err(Error::NonFiniteCostate {
                time_index: prev,
                node: j,
            });
        }
        values.push(v);
        variance.push(var);
    }
    Ok(CostateSlice { values, variance })
}

/// Full backward recursion from the terminal condition.
///
/// Slice `i - 1` draws its noise from `seed.rng(i - 1)`.
pub fn backward_sweep<M: ProcessModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    samples: usize,
    seed: StreamSeed,
) -> Result<CostateField> {
    backward_sweep_with(
        model,
        cost,
        grid,
        schedule,
        samples,
        seed,
        BackstepRule::default(),
    )
}

pub fn backward_sweep_with<M: ProcessModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    samples: usize,
    seed: StreamSeed,
    rule: BackstepRule,
) -> Result<CostateField> {
    if schedule.len() < grid.n_t() {
        return Err(Error::invalid("schedule", "shorter than the time grid"));
    }
    let mut values = Field::zeros(grid);
    let mut variance = Field::zeros(grid);
    let n = grid.n_t();
    values
        .slice_mut(n)
        .copy_from_slice(&terminal_costate(grid, cost));
    for i in (1..=n).rev() {
        let slice = backstep_with(
            model,
            cost,
            grid,
            schedule,
            i,
            values.slice(i),
            variance.slice(i),
            samples,
            seed,
            rule,
        )?;
        values.slice_mut(i - 1).copy_from_slice(&slice.values);
        variance.slice_mut(i - 1).copy_from_slice(&slice.variance);
    }
    Ok(CostateField {
        values,
        variance,
        samples_per_node: samples,
        iteration: 0,
        seed: seed.value(),
    })
}

/// Cost-to-go of one path started at `(t_index, x)`.
pub(crate) fn path_cost<M: ProcessModel + ?Sized, R: rand::Rng + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    t_index: usize,
    x: f64,
    rng: &mut R,
) -> Result<f64> {
    let dt = grid.dt();
    let mut running = 0.0;
    let end = walk_path(model, schedule, grid, t_index, x, rng, |i, xi, u| {
        running += cost.running(grid.time(i), xi, u) * dt;
    })?;
    Ok(if end.terminated {
        cost.collision_payoff(grid.time(end.stop_index)) + running
    } else {
        cost.terminal(end.final_state) + running
    })
}

/// Feynman-Kac estimate of `pi(t_index, x)` from `samples` full paths.
///
/// Path `k` uses `seed.rng(k)`.
#[allow(clippy::too_many_arguments)]
pub fn full_horizon_costate<M: ProcessModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    t_index: usize,
    x: f64,
    samples: usize,
    seed: StreamSeed,
) -> Result<Estimate> {
    if !grid.in_bounds(x) {
        return Err(Error::invalid("initial state", "outside the state box"));
    }
    if t_index > grid.n_t() {
        return Err(Error::IndexOutOfRange {
            index: t_index,
            len: grid.n_t() + 1,
        });
    }
    let costs = par::try_map_indices(samples, |k| {
        let mut rng = seed.rng(k as u64);
        path_cost(model, cost, grid, schedule, t_index, x, &mut rng)
    })?;
    Ok(Estimate::from_samples(&costs))
}
