//! Open-loop broadcast control schedules.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    /// `u(t) = u1(t)`.
    Feedforward,
    /// `u(t, x) = u1(t) + x u2(t)`.
    StateLinear,
}

impl ScheduleKind {
    pub fn channels(self) -> usize {
        match self {
            ScheduleKind::Feedforward => 1,
            ScheduleKind::StateLinear => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Feedforward => "feedforward",
            ScheduleKind::StateLinear => "state_linear",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "feedforward" => Some(ScheduleKind::Feedforward),
            "state_linear" => Some(ScheduleKind::StateLinear),
            _ => None,
        }
    }
}

/// One control parameter pair per time step. The realized control is clamped
/// into `bounds` wherever it is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub kind: ScheduleKind,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub bounds: (f64, f64),
}

impl ControlSchedule {
    pub fn constant(kind: ScheduleKind, steps: usize, u1: f64, bounds: (f64, f64)) -> Self {
        ControlSchedule {
            kind,
            u1: vec![u1; steps],
            u2: vec![0.0; steps],
            bounds,
        }
    }

    pub fn zero(kind: ScheduleKind, steps: usize, bounds: (f64, f64)) -> Self {
        Self::constant(kind, steps, 0.0, bounds)
    }

    pub fn len(&self) -> usize {
        self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u1.is_empty()
    }

    /// Control before clamping.
    #[inline]
    pub fn raw(&self, i: usize, x: f64) -> f64 {
        match self.kind {
            ScheduleKind::Feedforward => self.u1[i],
            ScheduleKind::StateLinear => self.u1[i] + x * self.u2[i],
        }
    }

    /// Control applied at time index `i` by an agent at state `x`.
    #[inline]
    pub fn realize(&self, i: usize, x: f64) -> f64 {
        self.raw(i, x).clamp(self.bounds.0, self.bounds.1)
    }

    /// Whether the raw control lies within the bounds, so that the realized
    /// control responds to the schedule parameters. A control sitting exactly
    /// on a bound counts as free: the projected update keeps it feasible, and
    /// the one-sided derivative from inside is the relevant one.
    #[inline]
    pub fn is_free(&self, i: usize, x: f64) -> bool {
        let u = self.raw(i, x);
        self.bounds.0 <= u && u <= self.bounds.1
    }

    /// Partial derivatives of the realized control w.r.t. `(u1, u2)`.
    #[inline]
    pub fn parameter_sensitivity(&self, i: usize, x: f64) -> [f64; 2] {
        if !self.is_free(i, x) {
            return [0.0, 0.0];
        }
        match self.kind {
            ScheduleKind::Feedforward => [1.0, 0.0],
            ScheduleKind::StateLinear => [1.0, x],
        }
    }

    /// Euclidean projection of `(u1, u2)` at every index onto the set where the
    /// realized control at both ends of `[x_lo, x_hi]` lies within the bounds.
    /// Feedforward schedules clamp `u1` and zero `u2`. Returns the number of
    /// indices that were modified.
    pub fn clamp_parameters(&mut self, x_lo: f64, x_hi: f64) -> usize {
        let (lo, hi) = self.bounds;
        let mut touched = 0;
        for i in 0..self.u1.len() {
            let old = (self.u1[i], self.u2[i]);
            let new = match self.kind {
                ScheduleKind::Feedforward => (old.0.clamp(lo, hi), 0.0),
                ScheduleKind::StateLinear => project_state_linear(old, lo, hi, x_lo, x_hi),
            };
            if new != old {
                touched += 1;
                self.u1[i] = new.0;
                self.u2[i] = new.1;
            }
        }
        touched
    }
}

/// Nearest point to `p` with `lo <= u1 + x u2 <= hi` for `x` in `{x_lo, x_hi}`.
fn project_state_linear(p: (f64, f64), lo: f64, hi: f64, x_lo: f64, x_hi: f64) -> (f64, f64) {
    // half-planes a . u <= b
    let planes = [
        (1.0, x_lo, hi),
        (-1.0, -x_lo, -lo),
        (1.0, x_hi, hi),
        (-1.0, -x_hi, -lo),
    ];
    let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    let feasible = |u: (f64, f64)| {
        planes
            .iter()
            .all(|&(a1, a2, b)| a1 * u.0 + a2 * u.1 <= b + tol)
    };
    if feasible(p) {
        return p;
    }
    let mut best = p;
    let mut best_d = f64::INFINITY;
    let mut consider = |u: (f64, f64)| {
        let d = (u.0 - p.0) * (u.0 - p.0) + (u.1 - p.1) * (u.1 - p.1);
        if d < best_d && feasible(u) {
            best = u;
            best_d = d;
        }
    };
    for &(a1, a2, b) in &planes {
        let nn = a1 * a1 + a2 * a2;
        let excess = (a1 * p.0 + a2 * p.1 - b) / nn;
        consider((p.0 - excess * a1, p.1 - excess * a2));
    }
    for (k, &(a1, a2, b)) in planes.iter().enumerate() {
        for &(c1, c2, d) in &planes[k + 1..] {
            let det = a1 * c2 - a2 * c1;
            if det.abs() > 1e-300 {
                consider(((b * c2 - a2 * d) / det, (a1 * d - b * c1) / det));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realize_and_clamp() {
        let mut s = ControlSchedule::zero(ScheduleKind::StateLinear, 3, (-3.0, 3.0));
        s.u1[0] = 1.0;
        s.u2[0] = -2.0;
        assert_eq!(s.realize(0, 0.5), 0.0);
        assert_eq!(s.realize(0, -3.0), 3.0);
        assert!(!s.is_free(0, -3.0));
        assert!(s.is_free(0, -1.0));
        assert_eq!(s.parameter_sensitivity(0, 0.5), [1.0, 0.5]);
        assert_eq!(s.parameter_sensitivity(0, -3.0), [0.0, 0.0]);
        s.clamp_parameters(-3.0, 3.0);
        for &x in &[-3.0, 3.0] {
            let u = s.raw(0, x);
            assert!((-3.0 - 1e-12..=3.0 + 1e-12).contains(&u), "{u}");
        }
        // nearest point of |u1| + 3|u2| <= 3 to (1, -2) lies on u1 - 3 u2 = 3
        assert!((s.u1[0] - 0.6).abs() < 1e-12);
        assert!((s.u2[0] + 0.8).abs() < 1e-12);
        let before = s.clone();
        assert_eq!(s.clamp_parameters(-3.0, 3.0), 0);
        assert_eq!(s, before);
    }

    #[test]
    fn feedforward_ignores_state() {
        let mut s = ControlSchedule::constant(ScheduleKind::Feedforward, 2, 5.0, (-3.0, 3.0));
        s.u2[1] = 9.0;
        assert_eq!(s.realize(1, 2.0), 3.0);
        assert_eq!(s.clamp_parameters(-3.0, 3.0), 2);
        assert_eq!(s.u1, vec![3.0, 3.0]);
        assert_eq!(s.u2, vec![0.0, 0.0]);
    }
}
