//! Finite-difference forward and backward Chapman-Kolmogorov operators in one
//! dimension, explicit time stepping, and the identity checks built on them.
//!
//! Advection and diffusion are written with face fluxes for the forward
//! operator; the backward operator uses the exact discrete transpose of those
//! stencils, so on compactly supported fields the two are adjoint up to the
//! jump terms, which go through linear interpolation.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::cost::CostSpec;
use crate::costate::{
    backward_sweep, backward_sweep_with, full_horizon_costate, BackstepRule, CostateField,
    Interpolation,
};
use crate::density::{ensemble_states_at, restarted_cost, DensityField, InitialDistribution};
use crate::error::{Error, Result};
use crate::grid::{inner, Field, SpaceTimeGrid};
use crate::math;
use crate::par;
use crate::process::{check_rate, ProcessModel};
use crate::rng::{tag, StreamSeed};
use crate::schedule::ControlSchedule;
use crate::stats::Estimate;

/// Face flux rule for the advection term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advection {
    Central,
    /// Upwind on faces whose cell Peclet number exceeds 2, central elsewhere.
    Hybrid,
}

/// Number of explicit substeps per grid step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substeps {
    /// Smallest count satisfying the stability bound.
    Auto,
    Fixed(usize),
}

pub struct OperatorDiscretization<'a, M: ProcessModel + ?Sized> {
    pub grid: &'a SpaceTimeGrid,
    pub model: &'a M,
    /// Mark nodes and weights; weights sum to one.
    pub quadrature: Vec<(f64, f64)>,
    pub advection: Advection,
    /// How jump targets and origins are read between nodes.
    pub jump_interpolation: Interpolation,
}

impl<'a, M: ProcessModel + ?Sized> OperatorDiscretization<'a, M> {
    pub fn new(
        grid: &'a SpaceTimeGrid,
        model: &'a M,
        mark_points: usize,
        advection: Advection,
    ) -> Self {
        OperatorDiscretization {
            grid,
            model,
            quadrature: model.marks().quadrature(mark_points),
            advection,
            jump_interpolation: Interpolation::Linear,
        }
    }

    pub fn with_jump_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.jump_interpolation = interpolation;
        self
    }

    /// Face weights `(left, right)` of the advective flux through face `f`
    /// between nodes `f - 1` and `f` (`f` in `0..=n_x`); the flux is
    /// `left * F_{f-1} p_{f-1} + right * F_f p_f`.
    fn face_weights(&self, f: usize, drift: &[f64], sigma: &[f64]) -> (f64, f64) {
        let n = drift.len();
        let (fl, sl) = if f > 0 {
            (drift[f - 1], sigma[f - 1])
        } else {
            (drift[0], sigma[0])
        };
        let (fr, sr) = if f < n {
            (drift[f], sigma[f])
        } else {
            (drift[n - 1], sigma[n - 1])
        };
        let v = 0.5 * (fl + fr);
        let s = 0.5 * (sl + sr);
        match self.advection {
            Advection::Hybrid if math::abs(v) * self.grid.dx() > s => {
                if v > 0.0 {
                    (1.0, 0.0)
                } else {
                    (0.0, 1.0)
                }
            }
            _ => (0.5, 0.5),
        }
    }

    fn coefficients(&self, t: f64, control: &dyn Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let g = self.grid;
        let mut drift = Vec::with_capacity(g.n_x());
        let mut sigma = Vec::with_capacity(g.n_x());
        for j in 0..g.n_x() {
            let x = g.node(j);
            let u = control(x);
            drift.push(self.model.drift(t, x, u));
            sigma.push(self.model.sigma(t, x, u));
        }
        (drift, sigma)
    }

    /// Linear interpolation with `outside` beyond the box.
    fn interp_or(&self, slice: &[f64], x: f64, outside: f64) -> f64 {
        if !self.grid.in_bounds(x) {
            outside
        } else if self.jump_interpolation == Interpolation::Cubic {
            self.grid.interp_cubic(slice, x)
        } else {
            self.grid.interp(slice, x)
        }
    }

    /// `F pi_x + 1/2 Sigma pi_xx + lambda sum_q w_q [pi(x + h) - pi(x)]`, with
    /// `pi = exterior` outside the box.
    pub fn apply_backward(
        &self,
        pi: &[f64],
        t: f64,
        control: &dyn Fn(f64) -> f64,
        exterior: f64,
    ) -> Vec<f64> {
        let g = self.grid;
        let n = g.n_x();
        let dx = g.dx();
        let (drift, sigma) = self.coefficients(t, control);
        let at = |j: isize| {
            if j < 0 || j >= n as isize {
                exterior
            } else {
                pi[j as usize]
            }
        };
        let faces: Vec<(f64, f64)> = (0..=n)
            .map(|f| self.face_weights(f, &drift, &sigma))
            .collect();
        par::map_indices(n, |j| {
            let x = g.node(j);
            let ji = j as isize;
            // transpose of the flux difference: node j enters face j+1 from the left, face j from the right
            let right = faces[j + 1].0 * (at(ji + 1) - pi[j]);
            let left = faces[j].1 * (pi[j] - at(ji - 1));
            let adv = drift[j] * (right + left) / dx;
            let diff = 0.5 * sigma[j] * (at(ji + 1) - 2.0 * pi[j] + at(ji - 1)) / (dx * dx);
            let rate = self.model.jump_rate(t, x);
            let mut jump = 0.0;
            if rate > 0.0 {
                for &(q, w) in &self.quadrature {
                    let target = x + self.model.jump_amplitude(t, x, q);
                    jump += w * (self.interp_or(pi, target, exterior) - pi[j]);
                }
                jump *= rate;
            }
            adv + diff + jump
        })
    }

    /// `-(F p)_x + 1/2 (Sigma p)_xx + sum_q w_q [lambda(x - eta) p(x - eta) |1 - eta_x| - lambda(x) p(x)]`,
    /// with `p = 0` outside the box.
    pub fn apply_forward(&self, p: &[f64], t: f64, control: &dyn Fn(f64) -> f64) -> Vec<f64> {
        let g = self.grid;
        let n = g.n_x();
        let dx = g.dx();
        let (drift, sigma) = self.coefficients(t, control);
        let fp = |j: isize| {
            if j < 0 || j >= n as isize {
                0.0
            } else {
                drift[j as usize] * p[j as usize]
            }
        };
        let sp = |j: isize| {
            if j < 0 || j >= n as isize {
                0.0
            } else {
                sigma[j as usize] * p[j as usize]
            }
        };
        let flux: Vec<f64> = (0..=n)
            .map(|f| {
                let (l, r) = self.face_weights(f, &drift, &sigma);
                l * fp(f as isize - 1) + r * fp(f as isize)
            })
            .collect();
        par::map_indices(n, |j| {
            let x = g.node(j);
            let ji = j as isize;
            let adv = -(flux[j + 1] - flux[j]) / dx;
            let diff = 0.5 * (sp(ji + 1) - 2.0 * sp(ji) + sp(ji - 1)) / (dx * dx);
            let mut jump = 0.0;
            for &(q, w) in &self.quadrature {
                let gain = match self.model.inverse_jump(t, x, q) {
                    Some(inv) => {
                        let origin = x - inv.eta;
                        self.model.jump_rate(t, origin)
                            * self.interp_or(p, origin, 0.0)
                            * math::abs(inv.jacobian)
                    }
                    None => 0.0,
                };
                jump += w * (gain - self.model.jump_rate(t, x) * p[j]);
            }
            adv + diff + jump
        })
    }

    /// Largest stable explicit step: `1 / (max Sigma / dx^2 + max |F| / dx + max lambda)`.
    pub fn stable_step(&self, t: f64, control: &dyn Fn(f64) -> f64) -> f64 {
        let g = self.grid;
        let dx = g.dx();
        let (drift, sigma) = self.coefficients(t, control);
        let smax = sigma.iter().fold(0.0f64, |a, &s| a.max(s));
        let fmax = drift.iter().fold(0.0f64, |a, &f| a.max(math::abs(f)));
        let lmax = (0..g.n_x()).fold(0.0f64, |a, j| a.max(self.model.jump_rate(t, g.node(j))));
        let rate = smax / (dx * dx) + fmax / dx + lmax;
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    fn substeps(&self, t: f64, control: &dyn Fn(f64) -> f64, mode: Substeps) -> Result<usize> {
        let dt = self.grid.dt();
        let limit = self.stable_step(t, control);
        match mode {
            Substeps::Auto => Ok((math::ceil(dt / limit) as usize).max(1)),
            Substeps::Fixed(m) => {
                let m = m.max(1);
                let h = dt / m as f64;
                if h > limit {
                    Err(Error::StabilityViolation { dt: h, limit })
                } else {
                    Ok(m)
                }
            }
        }
    }
}

/// `|<pi, Fwd p> - <p, Bwd pi>|` with zero exterior values.
pub fn adjoint_identity_residual<M: ProcessModel + ?Sized>(
    pi: &[f64],
    p: &[f64],
    t: f64,
    control: &dyn Fn(f64) -> f64,
    disc: &OperatorDiscretization<'_, M>,
) -> f64 {
    let fwd = disc.apply_forward(p, t, control);
    let bwd = disc.apply_backward(pi, t, control, 0.0);
    math::abs(inner(disc.grid, pi, &fwd) - inner(disc.grid, p, &bwd))
}

/// `exp(1 - 1 / (1 - r^2))` with `r = (x - center) / width`; zero for `|r| >= 1`.
pub fn smooth_bump(x: f64, center: f64, width: f64) -> f64 {
    let r = (x - center) / width;
    if math::abs(r) < 1.0 {
        math::exp(1.0 - 1.0 / (1.0 - r * r))
    } else {
        0.0
    }
}

/// Sum of smooth bumps `(center, width, height)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSum {
    pub terms: Vec<(f64, f64, f64)>,
}

impl BumpSum {
    /// `count` bumps with supports inside `[lo, hi]`, each at least a third of it wide.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64, count: usize) -> Self {
        let span = hi - lo;
        let terms = (0..count)
            .map(|_| {
                let width = span * (0.35 + 0.15 * rng.random::<f64>());
                let center = lo + width + (span - 2.0 * width) * rng.random::<f64>();
                let height = 0.5 + rng.random::<f64>();
                (center, width, height)
            })
            .collect();
        BumpSum { terms }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, w, h)| h * smooth_bump(x, c, w))
            .sum()
    }

    pub fn on_grid(&self, grid: &SpaceTimeGrid) -> Vec<f64> {
        grid.nodes().iter().map(|&x| self.eval(x)).collect()
    }
}

/// Adjoint residuals of random bump pairs under grid refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub n_x: Vec<usize>,
    pub dx: Vec<f64>,
    /// `residuals[pair][level]`.
    pub residuals: Vec<Vec<f64>>,
    /// `orders[pair][k]` between levels `k` and `k + 1`.
    pub orders: Vec<Vec<f64>>,
    pub min_order: f64,
}

/// Evaluates [`adjoint_identity_residual`] for `pairs` random bump pairs
/// supported in the middle 80% of the box, at every node count in `levels`.
#[allow(clippy::too_many_arguments)]
pub fn adjointness_refinement<M: ProcessModel + ?Sized>(
    model: &M,
    grid: &SpaceTimeGrid,
    levels: &[usize],
    pairs: usize,
    t: f64,
    control: &dyn Fn(f64) -> f64,
    mark_points: usize,
    advection: Advection,
    seed: StreamSeed,
) -> Result<RefinementStudy> {
    if levels.len() < 2 {
        return Err(Error::invalid(
            "refinement levels",
            "need at least two levels",
        ));
    }
    let grids = levels
        .iter()
        .map(|&n| grid.with_nodes(n))
        .collect::<Result<Vec<_>>>()?;
    let margin = 0.1 * (grid.x_max() - grid.x_min());
    let (lo, hi) = (grid.x_min() + margin, grid.x_max() - margin);
    let mut residuals = Vec::with_capacity(pairs);
    let mut orders = Vec::with_capacity(pairs);
    let mut min_order = f64::INFINITY;
    for k in 0..pairs {
        let mut rng = seed.rng(k as u64);
        let pi = BumpSum::random(&mut rng, lo, hi, 3);
        let p = BumpSum::random(&mut rng, lo, hi, 3);
        let res: Vec<f64> = grids
            .iter()
            .map(|g| {
                let disc = OperatorDiscretization::new(g, model, mark_points, advection);
                adjoint_identity_residual(&pi.on_grid(g), &p.on_grid(g), t, control, &disc)
            })
            .collect();
        let ord: Vec<f64> = (0..grids.len() - 1)
            .map(|l| math::ln(res[l] / res[l + 1]) / math::ln(grids[l].dx() / grids[l + 1].dx()))
            .collect();
        for &o in &ord {
            min_order = if o.is_nan() {
                f64::NAN
            } else {
                min_order.min(o)
            };
        }
        residuals.push(res);
        orders.push(ord);
    }
    Ok(RefinementStudy {
        n_x: levels.to_vec(),
        dx: grids.iter().map(|g| g.dx()).collect(),
        residuals,
        orders,
        min_order,
    })
}

/// Result of an explicit forward solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSolution {
    pub density: DensityField,
    /// Negative values set to zero over the whole solve.
    pub clipped: usize,
    pub substeps: usize,
}

/// Explicit Euler for `p_t = Fwd p` from the grid density of `init`. At a time
/// index with active obstacles each cell loses the covered fraction of its mass.
pub fn solve_forward<M: ProcessModel + ?Sized>(
    init: InitialDistribution,
    schedule: &ControlSchedule,
    disc: &OperatorDiscretization<'_, M>,
    mode: Substeps,
) -> Result<ForwardSolution> {
    let g = disc.grid;
    init.validate(g)?;
    if schedule.len() < g.n_t() {
        return Err(Error::invalid("schedule", "shorter than the time grid"));
    }
    let mut values = Field::zeros(g);
    let mut p = init.grid_density(g);
    let mut clipped = 0;
    let mut total_substeps = 0;
    values.slice_mut(0).copy_from_slice(&p);
    for i in 0..g.n_t() {
        let control = |x: f64| schedule.realize(i, x);
        let m = disc.substeps(g.time(i), &control, mode)?;
        let h = g.dt() / m as f64;
        for s in 0..m {
            let t = g.time(i) + s as f64 * h;
            let rhs = disc.apply_forward(&p, t, &control);
            for (v, r) in p.iter_mut().zip(&rhs) {
                *v += h * r;
                if *v < 0.0 {
                    *v = 0.0;
                    clipped += 1;
                }
            }
        }
        total_substeps += m;
        for (j, v) in p.iter_mut().enumerate() {
            *v *= 1.0 - g.obstacle_coverage(i + 1, j);
        }
        values.slice_mut(i + 1).copy_from_slice(&p);
    }
    let dx = g.dx();
    let survival = (0..=g.n_t())
        .map(|i| values.slice(i).iter().sum::<f64>() * dx)
        .collect();
    Ok(ForwardSolution {
        density: DensityField {
            values,
            survival,
            samples: 0,
            init,
        },
        clipped,
        substeps: total_substeps,
    })
}

/// Time stepping for [`solve_backward`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardScheme {
    /// Explicit Euler on `-pi_t = l + Bwd pi`.
    ExplicitEuler(Substeps),
    /// One grid step at a time through the Euler-Maruyama transition kernel:
    /// Gaussian increments by an `normal_points`-point rule, marks by the
    /// discretization's quadrature, the next slice read by cubic
    /// interpolation. Obstacle edges are located on arrival, not on the grid.
    SemiLagrangian { normal_points: usize },
}

/// Standard normal nodes on `[-8, 8]` with weights proportional to the density,
/// normalized to sum to one.
fn normal_rule(m: usize) -> Vec<(f64, f64)> {
    let m = m.max(1);
    if m == 1 {
        return vec![(0.0, 1.0)];
    }
    let h = 16.0 / m as f64;
    let mut rule: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let z = -8.0 + (k as f64 + 0.5) * h;
            (z, math::exp(-0.5 * z * z))
        })
        .collect();
    let total: f64 = rule.iter().map(|r| r.1).sum();
    rule.iter_mut().for_each(|r| r.1 /= total);
    rule
}

/// Backward costate solve from `pi(T) = phi` with the collision payoff outside
/// the box and on obstacles.
///
/// Like the Monte Carlo recursion, the stored slice at an obstacle time holds
/// the continuation value.
pub fn solve_backward<M: ProcessModel + ?Sized>(
    cost: &CostSpec,
    schedule: &ControlSchedule,
    disc: &OperatorDiscretization<'_, M>,
    scheme: BackwardScheme,
) -> Result<CostateField> {
    let g = disc.grid;
    if schedule.len() < g.n_t() {
        return Err(Error::invalid("schedule", "shorter than the time grid"));
    }
    let n = g.n_x();
    let mut values = Field::zeros(g);
    let mut pi: Vec<f64> = (0..n).map(|j| cost.terminal(g.node(j))).collect();
    values.slice_mut(g.n_t()).copy_from_slice(&pi);
    for i in (0..g.n_t()).rev() {
        pi = match scheme {
            BackwardScheme::ExplicitEuler(mode) => euler_step(cost, schedule, disc, i, pi, mode)?,
            BackwardScheme::SemiLagrangian { normal_points } => {
                kernel_step(cost, schedule, disc, i, &pi, normal_points)?
            }
        };
        if let Some(j) = pi.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCostate {
                time_index: i,
                node: j,
            });
        }
        values.slice_mut(i).copy_from_slice(&pi);
    }
    Ok(CostateField {
        variance: Field::zeros(g),
        values,
        samples_per_node: 0,
        iteration: 0,
        seed: 0,
    })
}

/// Slice `i` from slice `i + 1` by explicit Euler substeps. Where an obstacle
/// covers part of a cell, the value there is first blended with the payoff by
/// the covered fraction.
fn euler_step<M: ProcessModel + ?Sized>(
    cost: &CostSpec,
    schedule: &ControlSchedule,
    disc: &OperatorDiscretization<'_, M>,
    i: usize,
    mut pi: Vec<f64>,
    mode: Substeps,
) -> Result<Vec<f64>> {
    let g = disc.grid;
    let payoff = cost.collision_payoff(g.time(i + 1));
    for (j, v) in pi.iter_mut().enumerate() {
        let f = g.obstacle_coverage(i + 1, j);
        *v = f * payoff + (1.0 - f) * *v;
    }
    let control = |x: f64| schedule.realize(i, x);
    let m = disc.substeps(g.time(i), &control, mode)?;
    let h = g.dt() / m as f64;
    let running: Vec<f64> = g
        .nodes()
        .iter()
        .map(|&x| cost.running(g.time(i), x, control(x)))
        .collect();
    for s in (0..m).rev() {
        let t = g.time(i) + (s + 1) as f64 * h;
        let rhs = disc.apply_backward(&pi, t, &control, cost.collision_payoff(t));
        for j in 0..pi.len() {
            pi[j] += h * (running[j] + rhs[j]);
        }
    }
    Ok(pi)
}

fn kernel_step<M: ProcessModel + ?Sized>(
    cost: &CostSpec,
    schedule: &ControlSchedule,
    disc: &OperatorDiscretization<'_, M>,
    i: usize,
    next: &[f64],
    normal_points: usize,
) -> Result<Vec<f64>> {
    let g = disc.grid;
    let model = disc.model;
    let t = g.time(i);
    let dt = g.dt();
    let payoff = cost.collision_payoff(g.time(i + 1));
    let diffusion_rule = normal_rule(normal_points);
    let jump_rule = normal_rule((normal_points / 8).max(16));
    let value = |y: f64| {
        if g.survives(i + 1, y) {
            g.interp_cubic(next, y)
        } else {
            payoff
        }
    };
    for j in 0..g.n_x() {
        check_rate(model, t, g.node(j), dt)?;
    }
    Ok(par::map_indices(g.n_x(), |j| {
        let x = g.node(j);
        let u = schedule.realize(i, x);
        let mean = x + model.drift(t, x, u) * dt;
        let sd = model.diffusion(t, x, u) * math::sqrt(dt);
        let rate = model.jump_rate(t, x) * dt;
        let stay: f64 = diffusion_rule
            .iter()
            .map(|&(z, w)| w * value(mean + sd * z))
            .sum();
        let mut jumped = 0.0;
        if rate > 0.0 {
            for &(z, w) in &jump_rule {
                let pre = mean + sd * z;
                for &(q, wq) in &disc.quadrature {
                    jumped += w * wq * value(pre + model.jump_amplitude(t, pre, q));
                }
            }
        }
        cost.running(t, x, u) * dt + (1.0 - rate) * stay + rate * jumped
    }))
}

/// One node of the sweep versus full-horizon comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeComparison {
    pub time_index: usize,
    pub node: usize,
    pub x: f64,
    pub sweep: Estimate,
    pub full_horizon: Estimate,
    /// Gap in units of the combined standard error.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeynmanKacReport {
    pub nodes: Vec<NodeComparison>,
    pub gate: f64,
    pub nodes_passed: bool,
    /// Largest `|sweep - solver|` over interior nodes of every slice.
    pub sup_gap: f64,
    /// `(time_index, node)` of the largest gap.
    pub sup_location: (usize, usize),
    /// Largest ratio of the gap to its allowance `max(gate SE, 5 dx)`.
    pub sup_ratio: f64,
    pub solver_passed: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeynmanKacSettings {
    pub k_backstep: usize,
    pub k_full_horizon: usize,
    /// Number of random interior nodes compared with full-horizon paths.
    pub probes: usize,
    pub gate: f64,
    pub normal_points: usize,
    pub mark_points: usize,
    /// Sampling rule of the sweep. Plain draws by default, so the reported
    /// standard error is that of `k_backstep` independent samples per node.
    pub rule: BackstepRule,
}

impl Default for FeynmanKacSettings {
    fn default() -> Self {
        FeynmanKacSettings {
            k_backstep: 4000,
            k_full_horizon: 40000,
            probes: 20,
            gate: 3.0,
            normal_points: 400,
            mark_points: 32,
            rule: BackstepRule::plain(Interpolation::Cubic),
        }
    }
}

/// Checks the Monte Carlo costate sweep against independent full-horizon
/// path averages at random surviving interior nodes, and against the
/// semi-Lagrangian backward solve in sup norm.
pub fn feynman_kac_check<M: ProcessModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    settings: &FeynmanKacSettings,
    seed: StreamSeed,
) -> Result<FeynmanKacReport> {
    let sweep = backward_sweep_with(
        model,
        cost,
        grid,
        schedule,
        settings.k_backstep,
        seed.derive(tag::BACKSTEP),
        settings.rule,
    )?;
    let mut picker = seed.derive(tag::PROBE).rng(0);
    let mut nodes = Vec::with_capacity(settings.probes);
    while nodes.len() < settings.probes {
        let i = picker.random_range(0..grid.n_t());
        let j = picker.random_range(1..grid.n_x() - 1);
        let x = grid.node(j);
        if !grid.survives(i, x) {
            continue;
        }
        let key = (i * grid.n_x() + j) as u64;
        let full = full_horizon_costate(
            model,
            cost,
            grid,
            schedule,
            i,
            x,
            settings.k_full_horizon,
            seed.derive(tag::FULL_HORIZON).derive(key),
        )?;
        let est = Estimate {
            mean: sweep.values.get(i, j),
            std_error: sweep.std_error(i, j),
        };
        let z = math::abs(est.mean - full.mean) / est.combined_se(&full);
        nodes.push(NodeComparison {
            time_index: i,
            node: j,
            x,
            sweep: est,
            full_horizon: full,
            z,
        });
    }
    let nodes_passed = nodes.iter().all(|n| n.z <= settings.gate);

    let disc = OperatorDiscretization::new(grid, model, settings.mark_points, Advection::Hybrid);
    let solved = solve_backward(
        cost,
        schedule,
        &disc,
        BackwardScheme::SemiLagrangian {
            normal_points: settings.normal_points,
        },
    )?;
    let floor = 5.0 * grid.dx();
    let mut sup_gap = 0.0;
    let mut sup_location = (0, 0);
    let mut sup_ratio: f64 = 0.0;
    for i in 0..=grid.n_t() {
        for j in 1..grid.n_x() - 1 {
            let gap = math::abs(sweep.values.get(i, j) - solved.values.get(i, j));
            if gap > sup_gap {
                sup_gap = gap;
                sup_location = (i, j);
            }
            let allowance = (settings.gate * sweep.std_error(i, j)).max(floor);
            sup_ratio = sup_ratio.max(gap / allowance);
        }
    }
    let solver_passed = sup_ratio <= 1.0;
    Ok(FeynmanKacReport {
        nodes,
        gate: settings.gate,
        nodes_passed,
        sup_gap,
        sup_location,
        sup_ratio,
        solver_passed,
        passed: nodes_passed && solver_passed,
    })
}

/// One time of the value-costate comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityEntry {
    pub time_index: usize,
    pub time: f64,
    /// `<pi(s), p(s)>` from the costate sweep and the ensemble histogram.
    pub pairing: Estimate,
    /// Cost-to-go restarted from the time-`s` ensemble.
    pub restarted: Estimate,
    pub gap: f64,
    pub combined_se: f64,
    pub within_gate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub entries: Vec<IdentityEntry>,
    /// Gate in units of combined standard error.
    pub gate: f64,
    pub passed: bool,
}

/// Settings of [`value_costate_identity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct IdentitySettings {
    pub k_backstep: usize,
    pub k_ensemble: usize,
    pub time_indices: Vec<usize>,
    pub gate: f64,
}

/// Compares `<pi(s), p(s)>` with the Monte Carlo cost-to-go restarted from the
/// ensemble at each requested time index.
///
/// Pairing member `k` contributes `pi(s, node(X_k))`, which is the histogram
/// pairing written per sample. Its standard error adds the ensemble spread to
/// the density-weighted mean of the costate standard errors.
#[allow(clippy::too_many_arguments)]
pub fn value_costate_identity_check<M: ProcessModel + ?Sized>(
    model: &M,
    cost: &CostSpec,
    grid: &SpaceTimeGrid,
    schedule: &ControlSchedule,
    init: InitialDistribution,
    settings: &IdentitySettings,
    seed: StreamSeed,
) -> Result<IdentityReport> {
    let costate = backward_sweep(
        model,
        cost,
        grid,
        schedule,
        settings.k_backstep,
        seed.derive(tag::BACKSTEP),
    )?;
    let mut entries = Vec::new();
    for &s in &settings.time_indices {
        let states = ensemble_states_at(
            model,
            schedule,
            grid,
            init,
            settings.k_ensemble,
            seed.derive(tag::FORWARD),
            s,
        )?;
        let slice = costate.values.slice(s);
        let mut samples = vec![0.0; states.len()];
        let mut costate_sd = 0.0;
        for (v, st) in samples.iter_mut().zip(&states) {
            if let Some(x) = st {
                let j = grid.nearest_node(*x);
                *v = slice[j];
                costate_sd += costate.std_error(s, j);
            }
        }
        costate_sd /= states.len().max(1) as f64;
        let spread = Estimate::from_samples(&samples);
        let pairing = Estimate {
            mean: spread.mean,
            std_error: math::sqrt(spread.std_error * spread.std_error + costate_sd * costate_sd),
        };
        let restarted = restarted_cost(
            model,
            cost,
            grid,
            schedule,
            s,
            &states,
            seed.derive(tag::RESTART),
        )?;
        let gap = math::abs(pairing.mean - restarted.mean);
        let combined_se = pairing.combined_se(&restarted);
        entries.push(IdentityEntry {
            time_index: s,
            time: grid.time(s),
            pairing,
            restarted,
            gap,
            combined_se,
            within_gate: gap <= settings.gate * combined_se,
        });
    }
    let passed = entries.iter().all(|e| e.within_gate);
    Ok(IdentityReport {
        entries,
        gate: settings.gate,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{
        make_example_model, Drift, JumpDiffusion, JumpMap, MarkDistribution, Volatility,
    };
    use crate::schedule::ScheduleKind;

    fn zero_u(_: f64) -> f64 {
        0.0
    }

    fn bump(center: f64, width: f64) -> impl Fn(f64) -> f64 {
        move |x| {
            let r = (x - center) / width;
            if r.abs() < 1.0 {
                (1.0 - 1.0 / (1.0 - r * r)).exp()
            } else {
                0.0
            }
        }
    }

    fn model(drift: f64, sigma: f64, jump: JumpMap, rate: f64) -> JumpDiffusion {
        JumpDiffusion {
            drift: Drift::Polynomial(alloc::vec![drift]),
            volatility: Volatility::Constant(sigma),
            jump,
            rate,
            marks: MarkDistribution::Uniform { lo: 0.0, hi: 1.0 },
        }
    }

    #[test]
    fn backward_constant_and_linear() {
        let g = SpaceTimeGrid::paper_example(300, 121).unwrap();
        let m = make_example_model();
        let d = OperatorDiscretization::new(&g, &m, 32, Advection::Central);
        let out = d.apply_backward(&alloc::vec![3.0; 121], 0.5, &zero_u, 3.0);
        assert!(out.iter().all(|v| v.abs() < 1e-12));

        let c = 0.8;
        let m = model(c, 0.0, JumpMap::None, 0.0);
        let d = OperatorDiscretization::new(&g, &m, 32, Advection::Central);
        let pi = g.nodes();
        let out = d.apply_backward(&pi, 0.0, &zero_u, 0.0);
        for v in &out[1..120] {
            assert!((v - c).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_jump_mean() {
        // pi = x, h = 0.5 q x: output = x E[0.5 q] = 0.25 x while x + h stays inside
        let g = SpaceTimeGrid::paper_example(300, 121).unwrap();
        let m = model(0.0, 0.0, JumpMap::Proportional { gain: 0.5 }, 1.0);
        let d = OperatorDiscretization::new(&g, &m, 32, Advection::Central);
        let pi = g.nodes();
        let out = d.apply_backward(&pi, 0.0, &zero_u, 0.0);
        for j in 20..100 {
            assert!((out[j] - 0.25 * g.node(j)).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_zero_and_mass() {
        let g = SpaceTimeGrid::paper_example(300, 121).unwrap();
        let m = make_example_model();
        let d = OperatorDiscretization::new(&g, &m, 32, Advection::Hybrid);
        assert!(d
            .apply_forward(&alloc::vec![0.0; 121], 0.0, &zero_u)
            .iter()
            .all(|&v| v == 0.0));
        let f = bump(-0.5, 1.0);
        let p: Vec<f64> = g.nodes().iter().map(|&x| f(x)).collect();
        let out = d.apply_forward(&p, 0.0, &|x| 0.3 - 0.2 * x);
        let total: f64 = out.iter().sum::<f64>() * g.dx();
        assert!(total.abs() < 1e-3, "{total}");
    }

    #[test]
    fn example_jacobian_at_unit_mark() {
        let m = make_example_model();
        let inv = m.inverse_jump(0.0, 1.2, 1.0).unwrap();
        assert!((inv.jacobian - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cost_backward_is_zero() {
        let g = SpaceTimeGrid::paper_example(60, 61).unwrap();
        let m = make_example_model();
        let d = OperatorDiscretization::new(&g, &m, 16, Advection::Hybrid);
        let s = ControlSchedule::zero(ScheduleKind::StateLinear, 60, (-3.0, 3.0));
        for scheme in [
            BackwardScheme::ExplicitEuler(Substeps::Auto),
            BackwardScheme::SemiLagrangian { normal_points: 64 },
        ] {
            let f = solve_backward(&CostSpec::zero(), &s, &d, scheme).unwrap();
            assert!(f.values.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn fixed_substeps_check_stability() {
        let g = SpaceTimeGrid::new(0.0, 1.0, 10, -1.0, 1.0, 201).unwrap();
        let m = model(0.0, 1.0, JumpMap::None, 0.0);
        let d = OperatorDiscretization::new(&g, &m, 4, Advection::Central);
        let s = ControlSchedule::zero(ScheduleKind::Feedforward, 10, (-1.0, 1.0));
        let r = solve_forward(InitialDistribution::Delta(0.0), &s, &d, Substeps::Fixed(1));
        assert!(matches!(r, Err(Error::StabilityViolation { .. })));
        assert!(solve_forward(InitialDistribution::Delta(0.0), &s, &d, Substeps::Auto).is_ok());
    }

    #[test]
    fn adjoint_residual_shrinks() {
        let m = make_example_model();
        let u = |x: f64| 0.4 - 0.3 * x;
        let res: Vec<f64> = [61usize, 121, 241]
            .iter()
            .map(|&n| {
                let g = SpaceTimeGrid::paper_example(300, n).unwrap();
                let d = OperatorDiscretization::new(&g, &m, 32, Advection::Central);
                let (a, b) = (bump(-0.4, 1.5), bump(0.2, 1.2));
                let pi: Vec<f64> = g.nodes().iter().map(|&x| a(x)).collect();
                let p: Vec<f64> = g.nodes().iter().map(|&x| b(x)).collect();
                adjoint_identity_residual(&pi, &p, 0.0, &u, &d)
            })
            .collect();
        assert!(res[0] > res[1] && res[1] > res[2], "{res:?}");
        assert!((res[1] / res[2]).log2() > 1.8, "{res:?}");
    }
}
