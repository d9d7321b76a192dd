//! Quadratic running/terminal cost with a collision penalty.

/// `l(t, x, u) = R/2 u^2`, `phi(x) = Q_f (x - x_goal)^2 + c`, and a trajectory
/// absorbed at time `tau` pays `Xi - w tau` instead of the terminal cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSpec {
    pub control_weight: f64,
    pub terminal_weight: f64,
    pub goal: f64,
    /// Constant added to the terminal cost.
    pub terminal_offset: f64,
    pub termination_penalty: f64,
    /// Coefficient `w` on the stopping time in the collision payoff; 1 in the example.
    pub stopping_time_weight: f64,
}

impl CostSpec {
    /// R = 2e-4, Q_f = 4/9, x_goal = 0, Xi = 7.
    pub fn paper_example() -> Self {
        CostSpec {
            control_weight: 2e-4,
            terminal_weight: 4.0 / 9.0,
            goal: 0.0,
            terminal_offset: 0.0,
            termination_penalty: 7.0,
            stopping_time_weight: 1.0,
        }
    }

    pub fn zero() -> Self {
        CostSpec {
            control_weight: 0.0,
            terminal_weight: 0.0,
            goal: 0.0,
            terminal_offset: 0.0,
            termination_penalty: 0.0,
            stopping_time_weight: 0.0,
        }
    }

    #[inline]
    pub fn running(&self, _t: f64, _x: f64, u: f64) -> f64 {
        0.5 * self.control_weight * u * u
    }

    /// `dl/du`.
    #[inline]
    pub fn running_du(&self, _t: f64, _x: f64, u: f64) -> f64 {
        self.control_weight * u
    }

    #[inline]
    pub fn terminal(&self, x: f64) -> f64 {
        let d = x - self.goal;
        self.terminal_weight * d * d + self.terminal_offset
    }

    #[inline]
    pub fn collision_payoff(&self, tau: f64) -> f64 {
        self.termination_penalty - self.stopping_time_weight * tau
    }

    /// Every cost ingredient multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        CostSpec {
            control_weight: self.control_weight * c,
            terminal_weight: self.terminal_weight * c,
            goal: self.goal,
            terminal_offset: self.terminal_offset * c,
            termination_penalty: self.termination_penalty * c,
            stopping_time_weight: self.stopping_time_weight * c,
        }
    }
}
