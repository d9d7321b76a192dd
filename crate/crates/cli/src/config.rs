//! Run configuration: TOML on disk, validated into [`RunConfig`].
//!
//! Every section is optional and defaults to the built-in example; only
//! `seed` is required. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use ibc_core::process::{Drift, JumpMap, Volatility};
use ibc_core::{
    CostSpec, InitialDistribution, JumpDiffusion, MarkDistribution, Obstacle, ScheduleKind,
    SpaceTimeGrid,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Largest admissible `lambda * dt`: beyond it two jumps in one step stop
/// being negligible.
pub const MAX_RATE_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// `paper_example` (state- and control-dependent volatility) or
    /// `ornstein_uhlenbeck` (constant volatility `sigma`).
    pub name: String,
    pub alpha: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub sigma: f64,
    pub lambda: f64,
    /// `h(x, q) = jump_gain q x`.
    pub jump_gain: f64,
    /// `uniform` on `[mark_lo, mark_hi]` or `dirac` at `mark_lo`.
    pub marks: String,
    pub mark_lo: f64,
    pub mark_hi: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            name: "paper_example".into(),
            alpha: 0.5,
            kappa: 3.0,
            zeta: 0.1,
            sigma: 0.1,
            lambda: 1.0,
            jump_gain: 0.5,
            marks: "uniform".into(),
            mark_lo: 0.0,
            mark_hi: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub time: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t0: f64,
    pub t_final: f64,
    pub n_t: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub obstacles: Vec<ObstacleConfig>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            t0: 0.0,
            t_final: 3.0,
            n_t: 300,
            x_min: -3.0,
            x_max: 3.0,
            n_x: 121,
            u_min: -3.0,
            u_max: 3.0,
            obstacles: vec![
                ObstacleConfig {
                    time: 1.0,
                    x_lo: -2.0,
                    x_hi: -1.0,
                },
                ObstacleConfig {
                    time: 2.0,
                    x_lo: 0.5,
                    x_hi: 2.0,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub r: f64,
    pub q_f: f64,
    pub x_goal: f64,
    /// Collision payoff constant; a path stopped at `tau` pays `xi - tau`.
    pub xi: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            r: 2e-4,
            q_f: 4.0 / 9.0,
            x_goal: 0.0,
            xi: 7.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// `normal` or `delta`.
    pub kind: String,
    pub mean: f64,
    pub variance: f64,
    pub x0: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            kind: "normal".into(),
            mean: -1.0,
            variance: 0.5,
            x0: -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub k_backstep: usize,
    pub k_forward: usize,
    /// Paths per cost evaluation.
    pub k_cost: usize,
    pub step_size: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub schedule_kind: String,
    pub reuse_noise: bool,
    pub backtracking: bool,
    pub max_halvings: usize,
    /// Score costs with the survival-conditioned estimator.
    pub conditional_cost: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            k_backstep: 1000,
            k_forward: 100_000,
            k_cost: 100_000,
            step_size: 8.0,
            tolerance: 1e-2,
            max_iters: 200,
            schedule_kind: "state_linear".into(),
            reuse_noise: true,
            backtracking: true,
            max_halvings: 6,
            conditional_cost: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    /// Rescale each density slice to unit mass instead of keeping killed mass out.
    pub renormalize: bool,
    /// Paths written to `trajectories_sample.csv`.
    pub sample_paths: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            renormalize: false,
            sample_paths: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub enabled: bool,
    pub adjointness: bool,
    pub feynman_kac: bool,
    pub value_identity: bool,
    /// Node counts of the adjointness refinement study.
    pub refinement_levels: Vec<usize>,
    pub refinement_pairs: usize,
    pub mark_points: usize,
    pub fk_k_backstep: usize,
    pub fk_k_full_horizon: usize,
    pub fk_probes: usize,
    pub identity_k_backstep: usize,
    pub identity_k_ensemble: usize,
    /// Gate in combined standard errors.
    pub gate: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            enabled: true,
            adjointness: true,
            feynman_kac: true,
            value_identity: true,
            refinement_levels: vec![61, 121, 241],
            refinement_pairs: 10,
            mark_points: 32,
            fk_k_backstep: 4000,
            fk_k_full_horizon: 40_000,
            fk_probes: 20,
            identity_k_backstep: 4000,
            identity_k_ensemble: 100_000,
            gate: 3.0,
        }
    }
}

/// On-disk layout; `seed` stays optional here so that its absence is a
/// validation error naming the key rather than a parse error.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    model: ModelConfig,
    #[serde(default)]
    grid: GridConfig,
    #[serde(default)]
    cost: CostConfig,
    #[serde(default)]
    init: InitConfig,
    #[serde(default)]
    optimizer: OptimizerConfig,
    #[serde(default)]
    density: DensityConfig,
    #[serde(default)]
    verify: VerifyConfig,
}

/// A validated run configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub cost: CostConfig,
    pub init: InitConfig,
    pub optimizer: OptimizerConfig,
    pub density: DensityConfig,
    pub verify: VerifyConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, overrides).map_err(|e| match e {
        CliError::Parse { message, .. } => CliError::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn parse_config(text: &str, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse {
        path: PathBuf::new(),
        message: e.to_string(),
    })?;
    let seed = overrides
        .seed
        .or(raw.seed)
        .ok_or_else(|| invalid("seed", "required (64-bit integer)"))?;
    let output_dir = overrides
        .output_dir
        .clone()
        .or(raw.output_dir)
        .unwrap_or_else(|| PathBuf::from("output"));
    let config = RunConfig {
        seed,
        output_dir,
        model: raw.model,
        grid: raw.grid,
        cost: raw.cost,
        init: raw.init,
        optimizer: raw.optimizer,
        density: raw.density,
        verify: raw.verify,
    };
    config.validate()?;
    Ok(config)
}

fn invalid(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Validation {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn finite(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, "must be finite"))
    }
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, "must be positive"))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(key, "must be non-negative"))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(invalid(key, format!("must be at least {min}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.model;
        if !matches!(m.name.as_str(), "paper_example" | "ornstein_uhlenbeck") {
            return Err(invalid(
                "model.name",
                format!(
                    "unknown model `{}` (paper_example, ornstein_uhlenbeck)",
                    m.name
                ),
            ));
        }
        finite("model.alpha", m.alpha)?;
        finite("model.kappa", m.kappa)?;
        non_negative("model.zeta", m.zeta)?;
        non_negative("model.sigma", m.sigma)?;
        non_negative("model.lambda", m.lambda)?;
        finite("model.jump_gain", m.jump_gain)?;
        finite("model.mark_lo", m.mark_lo)?;
        match m.marks.as_str() {
            "uniform" => {
                if !(m.mark_hi.is_finite() && m.mark_hi > m.mark_lo) {
                    return Err(invalid("model.mark_hi", "must exceed model.mark_lo"));
                }
            }
            "dirac" => {}
            other => {
                return Err(invalid(
                    "model.marks",
                    format!("unknown mark distribution `{other}` (uniform, dirac)"),
                ))
            }
        }
        // x -> (1 + gain q) x must stay invertible over the mark support
        let lo_factor = 1.0 + m.jump_gain * m.mark_lo;
        let hi_factor = 1.0
            + m.jump_gain
                * if m.marks == "uniform" {
                    m.mark_hi
                } else {
                    m.mark_lo
                };
        if m.lambda > 0.0 && (lo_factor <= 0.0 || hi_factor <= 0.0) {
            return Err(invalid(
                "model.jump_gain",
                "jump map x -> (1 + gain q) x must keep its orientation",
            ));
        }

        let g = &self.grid;
        finite("grid.t0", g.t0)?;
        if !(g.t_final.is_finite() && g.t_final > g.t0) {
            return Err(invalid("grid.t_final", "must exceed grid.t0"));
        }
        at_least("grid.n_t", g.n_t, 1)?;
        finite("grid.x_min", g.x_min)?;
        if !(g.x_max.is_finite() && g.x_max > g.x_min) {
            return Err(invalid("grid.x_max", "must exceed grid.x_min"));
        }
        at_least("grid.n_x", g.n_x, 4)?;
        finite("grid.u_min", g.u_min)?;
        if !(g.u_max.is_finite() && g.u_max > g.u_min) {
            return Err(invalid("grid.u_max", "must exceed grid.u_min"));
        }
        for (k, o) in g.obstacles.iter().enumerate() {
            if !(o.time.is_finite() && o.time >= g.t0 && o.time <= g.t_final) {
                return Err(invalid(
                    &format!("grid.obstacles[{k}].time"),
                    "must lie in [t0, t_final]",
                ));
            }
            if !(o.x_lo.is_finite() && o.x_hi.is_finite() && o.x_hi > o.x_lo) {
                return Err(invalid(
                    &format!("grid.obstacles[{k}].x_hi"),
                    "must exceed x_lo",
                ));
            }
        }
        let dt = (g.t_final - g.t0) / g.n_t as f64;
        let rate_dt = m.lambda * dt;
        if rate_dt > MAX_RATE_STEP {
            return Err(invalid(
                "grid.n_t",
                format!(
                    "lambda * dt = {rate_dt} exceeds {MAX_RATE_STEP}; the zero-one law (at most one jump per step) needs n_t >= {}",
                    (m.lambda * (g.t_final - g.t0) / MAX_RATE_STEP).ceil()
                ),
            ));
        }

        let c = &self.cost;
        non_negative("cost.r", c.r)?;
        non_negative("cost.q_f", c.q_f)?;
        finite("cost.x_goal", c.x_goal)?;
        finite("cost.xi", c.xi)?;

        let i = &self.init;
        match i.kind.as_str() {
            "normal" => {
                positive("init.variance", i.variance)?;
                if !(i.mean.is_finite() && i.mean >= g.x_min && i.mean <= g.x_max) {
                    return Err(invalid("init.mean", "must lie in the state box"));
                }
            }
            "delta" => {
                if !(i.x0.is_finite() && i.x0 >= g.x_min && i.x0 <= g.x_max) {
                    return Err(invalid("init.x0", "must lie in the state box"));
                }
            }
            other => {
                return Err(invalid(
                    "init.kind",
                    format!("unknown initial distribution `{other}` (normal, delta)"),
                ))
            }
        }

        let o = &self.optimizer;
        at_least("optimizer.k_backstep", o.k_backstep, 1)?;
        at_least("optimizer.k_forward", o.k_forward, 1)?;
        at_least("optimizer.k_cost", o.k_cost, 2)?;
        positive("optimizer.step_size", o.step_size)?;
        positive("optimizer.tolerance", o.tolerance)?;
        at_least("optimizer.max_iters", o.max_iters, 1)?;
        if ScheduleKind::from_name(&o.schedule_kind).is_none() {
            return Err(invalid(
                "optimizer.schedule_kind",
                format!(
                    "unknown schedule kind `{}` (feedforward, state_linear)",
                    o.schedule_kind
                ),
            ));
        }

        let v = &self.verify;
        if v.refinement_levels.len() < 2 {
            return Err(invalid(
                "verify.refinement_levels",
                "need at least two levels",
            ));
        }
        if v.refinement_levels.iter().any(|&n| n < 4)
            || v.refinement_levels.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(invalid(
                "verify.refinement_levels",
                "must be increasing node counts of at least 4",
            ));
        }
        at_least("verify.refinement_pairs", v.refinement_pairs, 1)?;
        at_least("verify.mark_points", v.mark_points, 1)?;
        at_least("verify.fk_k_backstep", v.fk_k_backstep, 2)?;
        at_least("verify.fk_k_full_horizon", v.fk_k_full_horizon, 2)?;
        at_least("verify.identity_k_backstep", v.identity_k_backstep, 2)?;
        at_least("verify.identity_k_ensemble", v.identity_k_ensemble, 2)?;
        positive("verify.gate", v.gate)?;
        Ok(())
    }

    pub fn model(&self) -> JumpDiffusion {
        let m = &self.model;
        let volatility = match m.name.as_str() {
            "paper_example" => Volatility::ControlDependent {
                zeta: m.zeta,
                kappa: m.kappa,
            },
            _ => Volatility::Constant(m.sigma),
        };
        let marks = match m.marks.as_str() {
            "uniform" => MarkDistribution::Uniform {
                lo: m.mark_lo,
                hi: m.mark_hi,
            },
            _ => MarkDistribution::Dirac(m.mark_lo),
        };
        let jump = if m.lambda > 0.0 {
            JumpMap::Proportional { gain: m.jump_gain }
        } else {
            JumpMap::None
        };
        JumpDiffusion {
            drift: Drift::MeanReverting { alpha: m.alpha },
            volatility,
            jump,
            rate: m.lambda,
            marks,
        }
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid, CliError> {
        let g = &self.grid;
        let obstacles = g
            .obstacles
            .iter()
            .map(|o| Obstacle {
                time: o.time,
                x_lo: o.x_lo,
                x_hi: o.x_hi,
            })
            .collect();
        SpaceTimeGrid::new(g.t0, g.t_final, g.n_t, g.x_min, g.x_max, g.n_x)
            .and_then(|grid| grid.with_obstacles(obstacles))
            .and_then(|grid| grid.with_control_bounds(g.u_min, g.u_max))
            .map_err(|source| CliError::Core {
                stage: "grid",
                source,
            })
    }

    pub fn cost(&self) -> CostSpec {
        let c = &self.cost;
        CostSpec {
            control_weight: c.r,
            terminal_weight: c.q_f,
            goal: c.x_goal,
            terminal_offset: 0.0,
            termination_penalty: c.xi,
            stopping_time_weight: 1.0,
        }
    }

    pub fn init(&self) -> InitialDistribution {
        let i = &self.init;
        match i.kind.as_str() {
            "delta" => InitialDistribution::Delta(i.x0),
            _ => InitialDistribution::Normal {
                mean: i.mean,
                variance: i.variance,
            },
        }
    }

    pub fn schedule_kind(&self) -> ScheduleKind {
        ScheduleKind::from_name(&self.optimizer.schedule_kind).unwrap_or(ScheduleKind::StateLinear)
    }

    /// The resolved configuration as TOML; this exact text is hashed.
    pub fn resolved_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    /// Hex SHA-256 of [`Self::resolved_toml`] with the output directory blanked,
    /// so relocating a run does not change its fingerprint.
    pub fn hash(&self) -> String {
        let located = RunConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(located.resolved_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
