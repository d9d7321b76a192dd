//! Uniform space-time grid, obstacle windows, and the field operations shared
//! by the costate and density computations.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// A state window that absorbs trajectories at a single grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub time: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    t0: f64,
    t_final: f64,
    n_t: usize,
    x_min: f64,
    x_max: f64,
    n_x: usize,
    obstacles: Vec<Obstacle>,
    // grid time index each obstacle snaps to, parallel to `obstacles`
    obstacle_index: Vec<usize>,
    control_bounds: (f64, f64),
}

impl SpaceTimeGrid {
    /// `n_t` time steps on `[t0, t_final]` and `n_x` nodes on `[x_min, x_max]`.
    pub fn new(
        t0: f64,
        t_final: f64,
        n_t: usize,
        x_min: f64,
        x_max: f64,
        n_x: usize,
    ) -> Result<Self> {
        if !(t0.is_finite() && t_final.is_finite() && t0 < t_final) {
            return Err(Error::invalid("grid", "require t0 < T"));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::invalid("grid", "require x_min < x_max"));
        }
        if n_t < 1 {
            return Err(Error::invalid("grid", "require at least one time step"));
        }
        if n_x < 3 {
            return Err(Error::invalid(
                "grid",
                "require at least three spatial nodes",
            ));
        }
        Ok(SpaceTimeGrid {
            t0,
            t_final,
            n_t,
            x_min,
            x_max,
            n_x,
            obstacles: Vec::new(),
            obstacle_index: Vec::new(),
            control_bounds: (f64::NEG_INFINITY, f64::INFINITY),
        })
    }

    pub fn with_obstacles(mut self, obstacles: Vec<Obstacle>) -> Result<Self> {
        let mut index = Vec::with_capacity(obstacles.len());
        for o in &obstacles {
            if !(self.x_min <= o.x_lo && o.x_lo < o.x_hi && o.x_hi <= self.x_max) {
                return Err(Error::invalid(
                    "obstacle",
                    "require x_min <= x_lo < x_hi <= x_max",
                ));
            }
            if !(self.t0 <= o.time && o.time <= self.t_final) {
                return Err(Error::invalid("obstacle", "time outside [t0, T]"));
            }
            index.push(self.nearest_time_index(o.time));
        }
        self.obstacles = obstacles;
        self.obstacle_index = index;
        Ok(self)
    }

    pub fn with_control_bounds(mut self, u_min: f64, u_max: f64) -> Result<Self> {
        if !(u_min < u_max) {
            return Err(Error::invalid("control bounds", "require u_min < u_max"));
        }
        self.control_bounds = (u_min, u_max);
        Ok(self)
    }

    /// The worked example's grid: `[0, 3] x [-3, 3]`, two obstacles,
    /// controls in `[-3, 3]`, with `n_t` steps and `n_x` nodes.
    pub fn paper_example(n_t: usize, n_x: usize) -> Result<Self> {
        SpaceTimeGrid::new(0.0, 3.0, n_t, -3.0, 3.0, n_x)?
            .with_obstacles(vec![
                Obstacle {
                    time: 1.0,
                    x_lo: -2.0,
                    x_hi: -1.0,
                },
                Obstacle {
                    time: 2.0,
                    x_lo: 0.5,
                    x_hi: 2.0,
                },
            ])?
            .with_control_bounds(-3.0, 3.0)
    }

    /// Same box, obstacles and bounds with `n_x` nodes.
    pub fn with_nodes(&self, n_x: usize) -> Result<Self> {
        if n_x < 3 {
            return Err(Error::invalid(
                "grid",
                "require at least three spatial nodes",
            ));
        }
        Ok(SpaceTimeGrid {
            n_x,
            ..self.clone()
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    /// Number of time steps; there are `n_t() + 1` time stamps.
    pub fn n_t(&self) -> usize {
        self.n_t
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }
    pub fn control_bounds(&self) -> (f64, f64) {
        self.control_bounds
    }
    pub fn dt(&self) -> f64 {
        (self.t_final - self.t0) / self.n_t as f64
    }
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_t {
            self.t_final
        } else {
            self.t0 + i as f64 * self.dt()
        }
    }
    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_x - 1 {
            self.x_max
        } else {
            self.x_min + j as f64 * self.dx()
        }
    }
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_x).map(|j| self.node(j)).collect()
    }
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_t).map(|i| self.time(i)).collect()
    }

    pub fn nearest_time_index(&self, t: f64) -> usize {
        let i = math::round((t - self.t0) / self.dt());
        (i.max(0.0) as usize).min(self.n_t)
    }

    /// Index of the node whose cell `[x_j - dx/2, x_j + dx/2)` contains `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        let j = math::floor((x - self.x_min) / self.dx() + 0.5);
        (j.max(0.0) as usize).min(self.n_x - 1)
    }

    /// Obstacle windows active at time index `i`.
    pub fn obstacles_at(&self, i: usize) -> impl Iterator<Item = &Obstacle> {
        self.obstacles
            .iter()
            .zip(&self.obstacle_index)
            .filter(move |(_, &k)| k == i)
            .map(|(o, _)| o)
    }

    pub fn in_bounds(&self, x: f64) -> bool {
        self.x_min <= x && x <= self.x_max
    }

    pub fn in_obstacle(&self, i: usize, x: f64) -> bool {
        self.obstacles
            .iter()
            .zip(&self.obstacle_index)
            .any(|(o, &k)| k == i && o.x_lo <= x && x <= o.x_hi)
    }

    /// Whether a trajectory at `x` at time index `i` is still alive.
    #[inline]
    pub fn survives(&self, i: usize, x: f64) -> bool {
        self.in_bounds(x) && !self.in_obstacle(i, x)
    }

    /// Fraction of the cell `[x_j - dx/2, x_j + dx/2]` covered by obstacles
    /// active at time index `i`.
    pub fn obstacle_coverage(&self, i: usize, j: usize) -> f64 {
        let h = self.dx();
        let (a, b) = (self.node(j) - 0.5 * h, self.node(j) + 0.5 * h);
        let covered: f64 = self
            .obstacles_at(i)
            .map(|o| (b.min(o.x_hi) - a.max(o.x_lo)).max(0.0))
            .sum();
        (covered / h).min(1.0)
    }

    /// Piecewise-linear interpolation of a nodal slice; `x` is clamped into the box.
    #[inline]
    pub fn interp(&self, slice: &[f64], x: f64) -> f64 {
        debug_assert_eq!(slice.len(), self.n_x);
        let s = ((x - self.x_min) / self.dx()).clamp(0.0, (self.n_x - 1) as f64);
        let j = (math::floor(s) as usize).min(self.n_x - 2);
        let w = s - j as f64;
        slice[j] + w * (slice[j + 1] - slice[j])
    }

    /// Four-point Lagrange stencil at `x` (clamped into the box): first node
    /// index and weights. Exact for cubics; the stencil shifts inward at the ends.
    #[inline]
    pub fn cubic_stencil(&self, x: f64) -> (usize, [f64; 4]) {
        debug_assert!(self.n_x >= 4);
        let s = ((x - self.x_min) / self.dx()).clamp(0.0, (self.n_x - 1) as f64);
        let j = (math::floor(s) as usize).clamp(1, self.n_x - 3) - 1;
        let r = s - j as f64;
        let (a, b, c, d) = (r, r - 1.0, r - 2.0, r - 3.0);
        let w = [
            -b * c * d / 6.0,
            a * c * d / 2.0,
            -a * b * d / 2.0,
            a * b * c / 6.0,
        ];
        (j, w)
    }

    /// Cubic interpolation of a nodal slice; linear when fewer than four nodes.
    #[inline]
    pub fn interp_cubic(&self, slice: &[f64], x: f64) -> f64 {
        if self.n_x < 4 {
            return self.interp(slice, x);
        }
        let (j, w) = self.cubic_stencil(x);
        w[0] * slice[j] + w[1] * slice[j + 1] + w[2] * slice[j + 2] + w[3] * slice[j + 3]
    }

    /// First and second spatial derivatives of a nodal slice.
    ///
    /// Central differences inside, second-order one-sided at the two ends
    /// (first-order for the second derivative when only three nodes exist).
    pub fn fd_derivatives(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_x;
        debug_assert_eq!(f.len(), n);
        let h = self.dx();
        let h2 = h * h;
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        for j in 1..n - 1 {
            d1[j] = (f[j + 1] - f[j - 1]) / (2.0 * h);
            d2[j] = (f[j + 1] - 2.0 * f[j] + f[j - 1]) / h2;
        }
        d1[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        d1[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
        if n >= 4 {
            d2[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
            d2[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
        } else {
            d2[0] = d2[1];
            d2[n - 1] = d2[n - 2];
        }
        (d1, d2)
    }
}

/// A scalar field sampled at every `(time index, node)` of a grid, row-major in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n_times: usize,
    n_x: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Field {
            n_times: grid.n_t() + 1,
            n_x: grid.n_x(),
            values: vec![0.0; (grid.n_t() + 1) * grid.n_x()],
        }
    }

    pub fn from_fn(grid: &SpaceTimeGrid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut field = Field::zeros(grid);
        for i in 0..field.n_times {
            for j in 0..field.n_x {
                field.values[i * field.n_x + j] = f(i, j);
            }
        }
        field
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_x..(i + 1) * self.n_x]
    }

    pub fn slice_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_x..(i + 1) * self.n_x]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_x + j]
    }

    pub fn try_slice(&self, i: usize) -> Result<&[f64]> {
        if i >= self.n_times {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n_times,
            });
        }
        Ok(self.slice(i))
    }

    /// Linear interpolation in `x` at time index `t_index`.
    pub fn interp(&self, grid: &SpaceTimeGrid, t_index: usize, x: f64) -> Result<f64> {
        Ok(grid.interp(self.try_slice(t_index)?, x))
    }

    /// Spatial derivatives at time index `t_index`.
    pub fn fd_derivatives(
        &self,
        grid: &SpaceTimeGrid,
        t_index: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok(grid.fd_derivatives(self.try_slice(t_index)?))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            n_times: self.n_times,
            n_x: self.n_x,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Discrete inner product `sum_j f_j g_j dx`.
pub fn inner(grid: &SpaceTimeGrid, f: &[f64], g: &[f64]) -> f64 {
    f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * grid.dx()
}
