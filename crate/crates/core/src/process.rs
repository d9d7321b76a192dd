//! Q-marked jump-diffusion dynamics in one state dimension and their
//! Euler-Maruyama simulation with Bernoulli-thinned jumps.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::math;
use crate::schedule::ControlSchedule;

/// Upper bound on `lambda * dt` so that at most one jump per step is a sound
/// approximation.
pub const MAX_RATE_STEP: f64 = 0.1;

/// Distribution of the jump mark `Q`.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkDistribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// All marks equal to the given value.
    Dirac(f64),
}

impl MarkDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MarkDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            MarkDistribution::Dirac(q) => q,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarkDistribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            MarkDistribution::Dirac(q) => q,
        }
    }

    /// Nodes and weights of an `m`-point midpoint rule against the mark
    /// density; weights sum to one.
    pub fn quadrature(&self, m: usize) -> Vec<(f64, f64)> {
        match *self {
            MarkDistribution::Uniform { lo, hi } => {
                let m = m.max(1);
                let h = (hi - lo) / m as f64;
                (0..m)
                    .map(|k| (lo + (k as f64 + 0.5) * h, 1.0 / m as f64))
                    .collect()
            }
            MarkDistribution::Dirac(q) => vec![(q, 1.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MarkDistribution::Uniform { lo, hi }
                if !(lo.is_finite() && hi.is_finite() && lo < hi) =>
            {
                Err(Error::invalid(
                    "mark distribution",
                    "uniform marks need lo < hi",
                ))
            }
            MarkDistribution::Dirac(q) if !q.is_finite() => {
                Err(Error::invalid("mark distribution", "non-finite mark"))
            }
            _ => Ok(()),
        }
    }
}

/// `dF/du` and `dSigma/du` at a point, `Sigma = B^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlJacobian {
    pub drift_du: f64,
    pub sigma_du: f64,
}

/// Pre-image of a jump: a post-jump state `xi` came from `xi - eta`, and the
/// change of variables contributes `|1 - d eta / d xi|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseJump {
    pub eta: f64,
    pub jacobian: f64,
}

/// `dx = F(t,x,u) dt + B(t,x,u) dw + h(t,x,Q) dP`, with `P` a Poisson process of
/// rate `lambda(t,x)` and marks drawn from [`ProcessModel::marks`].
///
/// Implementations must be pure; estimators call them from many threads.
pub trait ProcessModel: Sync {
    fn drift(&self, t: f64, x: f64, u: f64) -> f64;
    fn diffusion(&self, t: f64, x: f64, u: f64) -> f64;
    fn jump_amplitude(&self, t: f64, x: f64, q: f64) -> f64;
    fn jump_rate(&self, t: f64, x: f64) -> f64;
    fn marks(&self) -> &MarkDistribution;

    /// `Sigma = B B^T`.
    fn sigma(&self, t: f64, x: f64, u: f64) -> f64 {
        let b = self.diffusion(t, x, u);
        b * b
    }

    /// Analytic control derivatives, if the model has them.
    fn control_jacobian(&self, _t: f64, _x: f64, _u: f64) -> Option<ControlJacobian> {
        None
    }

    /// Inverse of `x -> x + h(t, x, q)`, if the model has one.
    fn inverse_jump(&self, _t: f64, _xi: f64, _q: f64) -> Option<InverseJump> {
        None
    }

    /// Largest jump rate over the state box, used for the `lambda dt` guard.
    fn max_jump_rate(&self, grid: &SpaceTimeGrid) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..=grid.n_t() {
            for j in 0..grid.n_x() {
                m = m.max(self.jump_rate(grid.time(i), grid.node(j)));
            }
        }
        m
    }
}

/// Drift `F = f(x) + u`.
#[derive(Debug, Clone, PartialEq)]
pub enum Drift {
    /// `f(x) = -alpha x`.
    MeanReverting { alpha: f64 },
    /// `f(x) = sum_k c_k x^k`.
    Polynomial(Vec<f64>),
}

/// Diffusion coefficient `B`.
#[derive(Debug, Clone, PartialEq)]
pub enum Volatility {
    Constant(f64),
    /// `B = zeta sqrt((kappa - x)^2 / 2 + u^2)`.
    ControlDependent {
        zeta: f64,
        kappa: f64,
    },
    /// `B = sum_k c_k x^k`.
    Polynomial(Vec<f64>),
}

/// Jump amplitude `h(x, q)`.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpMap {
    None,
    /// `h = gain q x`.
    Proportional {
        gain: f64,
    },
    /// `h = scale q`.
    Additive {
        scale: f64,
    },
}

/// The built-in family of scalar jump-diffusions with control-affine drift
/// and constant jump rate.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDiffusion {
    pub drift: Drift,
    pub volatility: Volatility,
    pub jump: JumpMap,
    pub rate: f64,
    pub marks: MarkDistribution,
}

impl JumpDiffusion {
    /// `F = -alpha x + u`, `B = zeta sqrt((kappa - x)^2/2 + u^2)`, `h = 0.5 q x`,
    /// `lambda = 1`, `Q ~ U[0, 1]`.
    pub fn paper_example(alpha: f64, kappa: f64, zeta: f64) -> Self {
        JumpDiffusion {
            drift: Drift::MeanReverting { alpha },
            volatility: Volatility::ControlDependent { zeta, kappa },
            jump: JumpMap::Proportional { gain: 0.5 },
            rate: 1.0,
            marks: MarkDistribution::Uniform { lo: 0.0, hi: 1.0 },
        }
    }

    /// `F = -alpha x + u`, `B = sigma`, no jumps.
    pub fn ornstein_uhlenbeck(alpha: f64, sigma: f64) -> Self {
        JumpDiffusion {
            drift: Drift::MeanReverting { alpha },
            volatility: Volatility::Constant(sigma),
            jump: JumpMap::None,
            rate: 0.0,
            marks: MarkDistribution::Dirac(0.0),
        }
    }

    /// `F = u`, `B = 0`, jumps only.
    pub fn pure_jump(rate: f64, jump: JumpMap, marks: MarkDistribution) -> Self {
        JumpDiffusion {
            drift: Drift::Polynomial(Vec::new()),
            volatility: Volatility::Constant(0.0),
            jump,
            rate,
            marks,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(Error::invalid(
                "jump rate",
                "must be finite and non-negative",
            ));
        }
        self.marks.validate()?;
        if let JumpMap::Proportional { gain } = self.jump {
            // x -> (1 + gain q) x must stay a bijection over the mark support
            let qs: &[f64] = match self.marks {
                MarkDistribution::Uniform { lo, hi } => &[lo, hi],
                MarkDistribution::Dirac(q) => &[q, q],
            };
            let (a, b) = (qs[0], qs[1]);
            if 1.0 + gain * a <= 0.0 || 1.0 + gain * b <= 0.0 {
                return Err(Error::invalid("jump map", "1 + gain q must stay positive"));
            }
        }
        Ok(())
    }
}

/// The example model with `alpha = 0.5`, `kappa = 3`, `zeta = 0.1`.
pub fn make_example_model() -> JumpDiffusion {
    JumpDiffusion::paper_example(0.5, 3.0, 0.1)
}

impl ProcessModel for JumpDiffusion {
    #[inline]
    fn drift(&self, _t: f64, x: f64, u: f64) -> f64 {
        let f = match &self.drift {
            Drift::MeanReverting { alpha } => -alpha * x,
            Drift::Polynomial(c) => math::polyval(c, x),
        };
        f + u
    }

    #[inline]
    fn diffusion(&self, _t: f64, x: f64, u: f64) -> f64 {
        match &self.volatility {
            Volatility::Constant(s) => *s,
            Volatility::ControlDependent { zeta, kappa } => {
                let d = kappa - x;
                zeta * math::sqrt(0.5 * d * d + u * u)
            }
            Volatility::Polynomial(c) => math::polyval(c, x),
        }
    }

    #[inline]
    fn sigma(&self, _t: f64, x: f64, u: f64) -> f64 {
        match &self.volatility {
            Volatility::Constant(s) => s * s,
            Volatility::ControlDependent { zeta, kappa } => {
                let d = kappa - x;
                zeta * zeta * (0.5 * d * d + u * u)
            }
            Volatility::Polynomial(c) => {
                let b = math::polyval(c, x);
                b * b
            }
        }
    }

    #[inline]
    fn jump_amplitude(&self, _t: f64, x: f64, q: f64) -> f64 {
        match self.jump {
            JumpMap::None => 0.0,
            JumpMap::Proportional { gain } => gain * q * x,
            JumpMap::Additive { scale } => scale * q,
        }
    }

    #[inline]
    fn jump_rate(&self, _t: f64, _x: f64) -> f64 {
        match self.jump {
            JumpMap::None => 0.0,
            _ => self.rate,
        }
    }

    fn marks(&self) -> &MarkDistribution {
        &self.marks
    }

    fn control_jacobian(&self, _t: f64, _x: f64, u: f64) -> Option<ControlJacobian> {
        let sigma_du = match &self.volatility {
            Volatility::ControlDependent { zeta, .. } => 2.0 * zeta * zeta * u,
            _ => 0.0,
        };
        Some(ControlJacobian {
            drift_du: 1.0,
            sigma_du,
        })
    }

    fn inverse_jump(&self, _t: f64, xi: f64, q: f64) -> Option<InverseJump> {
        match self.jump {
            JumpMap::None => None,
            // xi = (1 + g q) x  =>  eta = xi g q / (1 + g q),  |1 - eta'| = 1 / (1 + g q)
            JumpMap::Proportional { gain } => {
                let s = 1.0 + gain * q;
                Some(InverseJump {
                    eta: xi * gain * q / s,
                    jacobian: 1.0 / s,
                })
            }
            JumpMap::Additive { scale } => Some(InverseJump {
                eta: scale * q,
                jacobian: 1.0,
            }),
        }
    }

    fn max_jump_rate(&self, _grid: &SpaceTimeGrid) -> f64 {
        self.jump_rate(0.0, 0.0)
    }
}

/// Random inputs of one Euler-Maruyama step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepNoise {
    pub z: f64,
    /// Uniform draw compared against `lambda dt`.
    pub jump_draw: f64,
    pub mark: f64,
}

impl StepNoise {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, marks: &MarkDistribution) -> Self {
        let z: f64 = rng.sample(StandardNormal);
        let jump_draw: f64 = rng.random();
        let mark = marks.sample(rng);
        StepNoise { z, jump_draw, mark }
    }
}

#[inline]
pub fn check_rate<M: ProcessModel + ?Sized>(model: &M, t: f64, x: f64, dt: f64) -> Result<()> {
    let rate_dt = model.jump_rate(t, x) * dt;
    if rate_dt > MAX_RATE_STEP {
        return Err(Error::RateStepViolation {
            rate_dt,
            limit: MAX_RATE_STEP,
        });
    }
    Ok(())
}

/// One step driven by the given noise; the jump amplitude is evaluated at the
/// post-diffusion, pre-jump state. No rate check.
#[inline]
pub fn step_with_noise<M: ProcessModel + ?Sized>(
    model: &M,
    t: f64,
    x: f64,
    u: f64,
    dt: f64,
    noise: &StepNoise,
) -> (f64, bool) {
    let pre = x + model.drift(t, x, u) * dt + model.diffusion(t, x, u) * math::sqrt(dt) * noise.z;
    let jumped = noise.jump_draw < model.jump_rate(t, x) * dt;
    if jumped {
        (pre + model.jump_amplitude(t, pre, noise.mark), true)
    } else {
        (pre, false)
    }
}

/// One Euler-Maruyama step with at most one jump, occurring with probability
/// `lambda(t, x) dt`.
pub fn step<M: ProcessModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    t: f64,
    x: f64,
    u: f64,
    dt: f64,
    rng: &mut R,
) -> Result<(f64, bool)> {
    if !(dt > 0.0) {
        return Err(Error::invalid("time step", "dt must be positive"));
    }
    check_rate(model, t, x, dt)?;
    let noise = StepNoise::draw(rng, model.marks());
    Ok(step_with_noise(model, t, x, u, dt, &noise))
}

/// Where and why a simulated path stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEnd {
    /// Time index of the last recorded state (the absorption index if terminated).
    pub stop_index: usize,
    pub terminated: bool,
    pub jumps: u32,
    pub final_state: f64,
}

/// Simulates from `x0` at time index `start` until absorption or `T`, calling
/// `visit(i, x_i, u_i)` before each step taken.
///
/// Absorption is checked at every arrival time index: leaving the state box or
/// landing in an obstacle active at that index. The start point itself is not
/// checked.
pub fn walk_path<M, R, V>(
    model: &M,
    schedule: &ControlSchedule,
    grid: &SpaceTimeGrid,
    start: usize,
    x0: f64,
    rng: &mut R,
    visit: V,
) -> Result<PathEnd>
where
    M: ProcessModel + ?Sized,
    R: Rng + ?Sized,
    V: FnMut(usize, f64, f64),
{
    walk_segment(model, schedule, grid, start, grid.n_t(), x0, rng, visit)
}

/// [`walk_path`] stopped at time index `stop` instead of `T`.
#[allow(clippy::too_many_arguments)]
pub fn walk_segment<M, R, V>(
    model: &M,
    schedule: &ControlSchedule,
    grid: &SpaceTimeGrid,
    start: usize,
    stop: usize,
    x0: f64,
    rng: &mut R,
    mut visit: V,
) -> Result<PathEnd>
where
    M: ProcessModel + ?Sized,
    R: Rng + ?Sized,
    V: FnMut(usize, f64, f64),
{
    let dt = grid.dt();
    let mut x = x0;
    let mut jumps = 0;
    for i in start..stop.min(grid.n_t()) {
        let t = grid.time(i);
        let u = schedule.realize(i, x);
        visit(i, x, u);
        let (next, jumped) = step(model, t, x, u, dt, rng)?;
        jumps += jumped as u32;
        x = next;
        if !grid.survives(i + 1, x) {
            return Ok(PathEnd {
                stop_index: i + 1,
                terminated: true,
                jumps,
                final_state: x,
            });
        }
    }
    Ok(PathEnd {
        stop_index: stop.max(start).min(grid.n_t()),
        terminated: false,
        jumps,
        final_state: x,
    })
}

/// A recorded sample path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// States at `times`; the last entry is the absorbing state when terminated.
    pub states: Vec<f64>,
    /// Control applied over each step; one fewer than `states`.
    pub controls: Vec<f64>,
    pub start_index: usize,
    pub jump_count: u32,
    pub stopping_time: f64,
    pub terminated: bool,
}

impl Trajectory {
    /// Time index of the last recorded state.
    pub fn stop_index(&self) -> usize {
        self.start_index + self.states.len() - 1
    }

    /// State at time index `i` if the trajectory is alive there.
    pub fn alive_state(&self, i: usize) -> Option<f64> {
        if i < self.start_index
            || i > self.stop_index()
            || (self.terminated && i == self.stop_index())
        {
            return None;
        }
        Some(self.states[i - self.start_index])
    }
}

/// Simulates one path from `x0` at `t0` under `schedule`.
pub fn simulate_path<M: ProcessModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    schedule: &ControlSchedule,
    grid: &SpaceTimeGrid,
    x0: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    simulate_path_from(model, schedule, grid, 0, x0, rng)
}

pub fn simulate_path_from<M: ProcessModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    schedule: &ControlSchedule,
    grid: &SpaceTimeGrid,
    start: usize,
    x0: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if !grid.in_bounds(x0) {
        return Err(Error::invalid("initial state", "outside the state box"));
    }
    if schedule.len() < grid.n_t() {
        return Err(Error::invalid("schedule", "shorter than the time grid"));
    }
    let mut states = Vec::with_capacity(grid.n_t() - start + 1);
    let mut controls = Vec::with_capacity(grid.n_t() - start);
    let end = walk_path(model, schedule, grid, start, x0, rng, |_, x, u| {
        states.push(x);
        controls.push(u);
    })?;
    states.push(end.final_state);
    let times = (start..=end.stop_index).map(|i| grid.time(i)).collect();
    Ok(Trajectory {
        times,
        states,
        controls,
        start_index: start,
        jump_count: end.jumps,
        stopping_time: grid.time(end.stop_index),
        terminated: end.terminated,
    })
}
