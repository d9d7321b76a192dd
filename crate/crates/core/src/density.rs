//! Ensemble density by forward Monte Carlo, and the cost functional.
//!
//! Trajectory `k` of an ensemble draws its initial state and all step noise
//! from `seed.rng(k)`, so the density, the cost and the restarted cost-to-go
//! computed with one seed all see the same paths.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cost::CostSpec;
use crate::costate::path_cost;
use crate::error::{Error, Result};
use crate::grid::{Field, SpaceTimeGrid};
use crate::math;
use crate::par;
use crate::process::{
    check_rate, simulate_path, walk_path, walk_segment, ProcessModel, Trajectory,
};
use crate::rng::StreamSeed;
use crate::schedule::ControlSchedule;
use crate::stats::Estimate;

const MAX_REJECTIONS: usize = 100_000;
const BATCH: usize = 64;

/// Initial state distribution; normals are truncated to the state box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDistribution {
    Delta(f64),
    Normal { mean: f64, variance: f64 },
}

impl InitialDistribution {
    pub fn validate(&self, grid: &SpaceTimeGrid) -> Result<()> {
        match *self {
            InitialDistribution::Delta(x0) if !grid.in_bounds(x0) => Err(Error::invalid(
                "init",
                "delta location outside the state box",
            )),
            InitialDistribution::Normal { mean, variance }
                if !(variance >= 0.0) || !mean.is_finite() =>
            {
                Err(Error::invalid(
                    "init",
                    "normal needs finite mean and non-negative variance",
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, grid: &SpaceTimeGrid, rng: &mut R) -> Result<f64> {
        match *self {
            InitialDistribution::Delta(x0) => {
                if grid.in_bounds(x0) {
                    Ok(x0)
                } else {
                    Err(Error::invalid(
                        "init",
                        "delta location outside the state box",
                    ))
                }
            }
            InitialDistribution::Normal { mean, variance } => {
                let sd = math::sqrt(variance);
                for _ in 0..MAX_REJECTIONS {
                    let z: f64 = rng.sample(StandardNormal);
                    let x = mean + sd * z;
                    if grid.in_bounds(x) {
                        return Ok(x);
                    }
                }
                Err(Error::invalid(
                    "init",
                    "truncated normal has negligible mass in the box",
                ))
            }
        }
    }

    /// Grid density with unit discrete mass.
    pub fn grid_density(&self, grid: &SpaceTimeGrid) -> Vec<f64> {
        let dx = grid.dx();
        let mut p = vec![0.0; grid.n_x()];
        match *self {
            InitialDistribution::Delta(x0) => p[grid.nearest_node(x0)] = 1.0 / dx,
            InitialDistribution::Normal { mean, variance } => {
                if variance <= 0.0 {
                    p[grid.nearest_node(mean)] = 1.0 / dx;
                } else {
                    for (j, v) in p.iter_mut().enumerate() {
                        let d = grid.node(j) - mean;
                        *v = math::exp(-d * d / (2.0 * variance));
                    }
                    let mass: f64 = p.iter().sum::<f64>() * dx;
                    p.iter_mut().for_each(|v| *v /= mass);
                }
            }
        }
        p
    }
}

/// Density of surviving ensemble members on the space-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub values: Field,
    /// Fraction of the ensemble alive at each time index.
    pub survival: Vec<f64>,
    /// Ensemble size; zero for densities not built from samples.
    pub samples: usize,
    pub init: InitialDistribution,
}

impl DensityField {
    pub fn mass(&self, grid: &SpaceTimeGrid, i: usize) -> f64 {
        self.values.slice(i).iter().sum::<f64>() * grid.dx()
    }

    /// Each slice divided by its survival fraction; empty slices stay zero.
    pub fn renormalized(&self) -> DensityField {
        let mut out = self.clone();
        for (i, &s) in self.survival.iter().enumerate() {
            if s > 0.0 {
                out.values.slice_mut(i).iter_mut().for_each(|v| *v /= s);
                out.survival[i] = 1.0;
            }
        }
        out
    }

    fn from_counts(
        grid: &SpaceTimeGrid,
        counts: &[u32],
        samples: usize,
        init: InitialDistribution,
    ) -> Self {
        let n_x = grid.n_x();
        let scale = 1.0 / (samples as f64 * grid.dx());
        let values = Field::from_fn(grid, |i, j| counts[i * n_x + j] as f64 * scale);
        let survival = counts
            .chunks(n_x)
            .map(|row| row.iter().map(|&c| c as u64).sum::<u64>() as f64 / samples as f64)
            .collect();
        DensityField {
            values,
            survival,
            samples,
            init,
        }
    }
}

/// `samples` independent trajectories started from `init`.
pub fn sample_ensemble<M: ProcessModel + ?Sized>(
    model: &M,
    schedule: &ControlSchedule,
    grid: &SpaceTimeGrid,
    init: InitialDistribution,
    samples: usize,
    seed: StreamSeed,
) -> Result<Vec<Trajectory>> {
    init.validate(grid)?;
    par::try_map_indices(samples, |k| {
        let mut rng = seed.rng(k as u64);
        let x0 = init.sample(grid, &mut rng)?;
        simulate_path(model, schedule, grid, x0, &mut rng)
    })
}

/// Node-centered histogram of the surviving states, divided by `K dx`.
///
/// `init` is recorded as the descriptor of the returned field.
pub fn histogram_density(
    trajectories: &[Trajectory],
    grid: &SpaceTimeGrid,
    init: InitialDistribution,
) -> DensityField {
    let n_x = grid.n_x();
    let mut counts = vec![0u32; (grid.n_t() + 1) * n_x];
    for tr in trajectories {
        for i in tr.start_index..=tr.stop_index().min(grid.n_t()) {
            if let Some(x) = tr.alive_state(i) {
                counts[i * n_x + grid.nearest_node(x)] += 1;
            }
        }
    }
    DensityField::from_counts(grid, &counts, trajectories.len().max(1), init)
}

/// Same result as `histogram_density(sample_ensemble(..))` without storing paths.
pub fn simulate_density<M: ProcessModel + ?Sized>(
    model: &M,
    schedule: &ControlSchedule,
    grid: &SpaceTimeGrid,
    init: InitialDistribution,
    samples: usize,
    seed: StreamSeed,
) -> Result<DensityField> {
    init.validate(grid)?;
    if schedule.len() < grid.n_t() {
        return Err(Error::invalid("schedule", "shorter than the time grid"));
    }
    let n_x = grid.n_x();
    let len = (grid.n_t() + 1) * n_x;
    let batches = samples.div_ceil(BATCH);
    let counts = par::map_reduce_indices(
        batches,
        || Ok(vec![0u32; len]),
        |b| {
            let mut counts = vec![0u32; len];
            for k in b * BATCH..((b + 1) * BATCH).min(samples) {
                let mut rng = seed.rng(k as u64);
                let x0 = init.sample(grid, &mut rng)?;
                let end = walk_path(model, schedule, grid, 0, x0, &mut rng, |i, x, _| {
                    counts[i * n_x + grid.nearest_node(x)] += 1;
                })?;
                if !end.terminated {
                    counts[grid.n_t() * n_x + grid.nearest_node(end.final_state)] += 1;
                }
            }
            Ok(counts)
        },
        |a: Result<Vec<u32>>, b: Result<Vec<u32>>| {
            let mut a = a?;
            let b = b?;
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            Ok(a)
        },
    )?;
    Ok(DensityField::from_counts(
        grid,
        &counts,
        samples.max(1),
        init,
    ))
}

/// Monte Carlo estimate of the cost functional over `samples` paths from `init`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_cost<M: ProcessModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    init: InitialDistribution,
    samples: usize,
    seed: StreamSeed,
) -> Result<Estimate> {
    init.validate(grid)?;
    if schedule.len() < grid.n_t() {
        return Err(Error::invalid("schedule", "shorter than the time grid"));
    }
    let costs = par::try_map_indices(samples, |k| {
        let mut rng = seed.rng(k as u64);
        let x0 = init.sample(grid, &mut rng)?;
        path_cost(model, cost, grid, schedule, 0, x0, &mut rng)
    })?;
    Ok(Estimate::from_samples(&costs))
}

/// Lower-variance estimate of the same functional: at every step the Gaussian
/// increment is drawn conditionally on survival, the path carries the survival
/// probability as a weight and the killed share is booked at the collision
/// payoff. Under common random numbers the estimate is continuous in the
/// schedule, which the plain estimator is not once killing sets are present.
///
/// Steps whose jump map has no monotone inverse fall back to plain sampling.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_cost_conditional<M: ProcessModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    init: InitialDistribution,
    samples: usize,
    seed: StreamSeed,
) -> Result<Estimate> {
    init.validate(grid)?;
    if schedule.len() < grid.n_t() {
        return Err(Error::invalid("schedule", "shorter than the time grid"));
    }
    let alive: Vec<Vec<(f64, f64)>> = (0..=grid.n_t()).map(|i| survival_set(grid, i)).collect();
    let costs = par::try_map_indices(samples, |k| {
        let mut rng = seed.rng(k as u64);
        let x0 = init.sample(grid, &mut rng)?;
        conditional_path_cost(model, cost, grid, schedule, &alive, x0, &mut rng)
    })?;
    Ok(Estimate::from_samples(&costs))
}

/// The state box minus the obstacles active at `i`, as sorted disjoint intervals.
fn survival_set(grid: &SpaceTimeGrid, i: usize) -> Vec<(f64, f64)> {
    let mut cuts: Vec<(f64, f64)> = grid.obstacles_at(i).map(|o| (o.x_lo, o.x_hi)).collect();
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut lo = grid.x_min();
    for (a, b) in cuts {
        if a > lo {
            out.push((lo, a.min(grid.x_max())));
        }
        lo = lo.max(b);
        if lo >= grid.x_max() {
            return out;
        }
    }
    out.push((lo, grid.x_max()));
    out
}

/// Standard normal mass of `[a, b]`, accurate in both tails.
fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        math::normal_sf(a) - math::normal_sf(b)
    } else if b <= 0.0 {
        math::normal_cdf(b) - math::normal_cdf(a)
    } else {
        1.0 - math::normal_cdf(a) - math::normal_sf(b)
    }
}

/// Point of `[a, b]` with standard normal mass `m` to its left inside the interval.
fn normal_point(a: f64, b: f64, mass: f64, m: f64) -> f64 {
    let z = if a >= 0.0 {
        -math::normal_quantile(math::normal_sf(a) - m)
    } else {
        let p = math::normal_cdf(a) + m;
        if p <= 0.5 {
            math::normal_quantile(p)
        } else {
            -math::normal_quantile(math::normal_sf(b) + (mass - m))
        }
    };
    z.clamp(a, b)
}

#[allow(clippy::too_many_arguments)]
fn conditional_path_cost<M: ProcessModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    alive: &[Vec<(f64, f64)>],
    x0: f64,
    rng: &mut R,
) -> Result<f64> {
    let dt = grid.dt();
    let root_dt = math::sqrt(dt);
    let mut x = x0;
    let mut weight = 1.0;
    let mut total = 0.0;
    let mut pieces: Vec<(f64, f64, f64)> = Vec::with_capacity(4);
    for i in 0..grid.n_t() {
        let t = grid.time(i);
        let u = schedule.realize(i, x);
        total += weight * cost.running(t, x, u) * dt;
        check_rate(model, t, x, dt)?;
        let v: f64 = rng.random();
        let jump_draw: f64 = rng.random();
        let mark = model.marks().sample(rng);
        let jumped = jump_draw < model.jump_rate(t, x) * dt;
        let mean = x + model.drift(t, x, u) * dt;
        let sd = model.diffusion(t, x, u) * root_dt;
        let payoff = cost.collision_payoff(grid.time(i + 1));

        // survival intervals pulled back to the pre-jump state, standardized
        pieces.clear();
        let mut exact = sd > 0.0;
        for &(a, b) in &alive[i + 1] {
            if !exact {
                break;
            }
            let (a, b) = if jumped {
                match (
                    model.inverse_jump(t, a, mark),
                    model.inverse_jump(t, b, mark),
                ) {
                    (Some(ja), Some(jb)) if ja.jacobian > 0.0 && jb.jacobian > 0.0 => {
                        (a - ja.eta, b - jb.eta)
                    }
                    _ => {
                        exact = false;
                        break;
                    }
                }
            } else {
                (a, b)
            };
            let (a, b) = ((a - mean) / sd, (b - mean) / sd);
            pieces.push((a, b, normal_mass(a, b)));
        }

        if !exact {
            let pre = mean + sd * math::normal_quantile(v);
            let next = if jumped {
                pre + model.jump_amplitude(t, pre, mark)
            } else {
                pre
            };
            if !grid.survives(i + 1, next) {
                return Ok(total + weight * payoff);
            }
            x = next;
            continue;
        }

        let s: f64 = pieces.iter().map(|p| p.2).sum();
        if !(s > 0.0) {
            return Ok(total + weight * payoff);
        }
        total += weight * (1.0 - s).max(0.0) * payoff;
        weight *= s.min(1.0);

        let mut target = v * s;
        let mut z = pieces[pieces.len() - 1].1;
        for (k, &(a, b, m)) in pieces.iter().enumerate() {
            if target <= m || k + 1 == pieces.len() {
                z = normal_point(a, b, m, target.min(m));
                break;
            }
            target -= m;
        }
        let pre = mean + sd * z;
        let next = if jumped {
            pre + model.jump_amplitude(t, pre, mark)
        } else {
            pre
        };
        x = next.clamp(grid.x_min(), grid.x_max());
    }
    Ok(total + weight * cost.terminal(x))
}

/// States of the ensemble at time index `s`, `None` for members absorbed at or
/// before `s`. Member `k` follows the same path as in [`simulate_density`].
pub fn ensemble_states_at<M: ProcessModel + ?Sized>(
    model: &M,
    schedule: &ControlSchedule,
    grid: &SpaceTimeGrid,
    init: InitialDistribution,
    samples: usize,
    seed: StreamSeed,
    s: usize,
) -> Result<Vec<Option<f64>>> {
    init.validate(grid)?;
    if s > grid.n_t() {
        return Err(Error::IndexOutOfRange {
            index: s,
            len: grid.n_t() + 1,
        });
    }
    par::try_map_indices(samples, |k| {
        let mut rng = seed.rng(k as u64);
        let x0 = init.sample(grid, &mut rng)?;
        let end = walk_segment(model, schedule, grid, 0, s, x0, &mut rng, |_, _, _| {})?;
        Ok(if end.terminated {
            None
        } else {
            Some(end.final_state)
        })
    })
}

/// Cost-to-go from time index `s` averaged over all members, absorbed members
/// contributing zero. Restart `k` draws from `seed.rng(k)`.
pub fn restarted_cost<M: ProcessModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    s: usize,
    states: &[Option<f64>],
    seed: StreamSeed,
) -> Result<Estimate> {
    let costs = par::try_map_indices(states.len(), |k| match states[k] {
        Some(x) => {
            let mut rng = seed.rng(k as u64);
            path_cost(model, cost, grid, schedule, s, x, &mut rng)
        }
        None => Ok(0.0),
    })?;
    Ok(Estimate::from_samples(&costs))
}
