//! Orchestration of optimization, verification and comparison runs, and the
//! artifacts they leave in the output directory.

use std::fs;
use std::path::PathBuf;

use ibc_core::gradient::projected_gradient_norm;
use ibc_core::pide::{
    adjointness_refinement, feynman_kac_check, value_costate_identity_check, Advection,
    FeynmanKacSettings, IdentitySettings,
};
use ibc_core::{
    evaluate_cost, evaluate_cost_conditional, run_ibc, sample_ensemble, ControlSchedule, CostSpec,
    Estimate, IbcOptions, OptimizationResult, ScheduleKind, SpaceTimeGrid, StreamSeed,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::format::{Cell, Csv};
use crate::svg::{self, Series};

/// Stream keys of the runner's own Monte Carlo work.
mod key {
    pub const SAMPLE_PATHS: u64 = 0x7061_7468;
    pub const COMPARISON: u64 = 0x636d_7072;
    pub const VERIFY: u64 = 0x7672_6679;
}

/// Observed order the adjointness residual must reach.
pub const REQUIRED_ORDER: f64 = 1.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Full,
    VerifyOnly,
}

/// What a command achieved; mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// The optimizer stopped at `max_iters`, or a verification gate failed.
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::NotConverged => 2,
        }
    }
}

struct Output {
    dir: PathBuf,
    comment: String,
}

impl Output {
    fn prepare(config: &RunConfig) -> Result<Self, CliError> {
        let dir = config.output_dir.clone();
        fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        let out = Output {
            dir,
            comment: format!("seed={} config_sha256={}", config.seed, config.hash()),
        };
        out.write(
            "resolved_config.toml",
            &format!("# {}\n{}", out.comment, config.resolved_toml()),
        )?;
        Ok(out)
    }

    fn write(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&path, text).map_err(|source| CliError::Io { path, source })
    }

    fn csv(&self, columns: &[&str]) -> Csv {
        Csv::new(&self.comment, columns)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(name, &text)
    }
}

struct Problem {
    model: ibc_core::JumpDiffusion,
    grid: SpaceTimeGrid,
    cost: CostSpec,
    init: ibc_core::InitialDistribution,
}

impl Problem {
    fn from(config: &RunConfig) -> Result<Self, CliError> {
        let model = config.model();
        model.validate().map_err(CliError::core("process"))?;
        Ok(Problem {
            model,
            grid: config.grid()?,
            cost: config.cost(),
            init: config.init(),
        })
    }
}

fn options(config: &RunConfig, kind: ScheduleKind) -> IbcOptions {
    let o = &config.optimizer;
    IbcOptions {
        k_backstep: o.k_backstep,
        k_forward: o.k_forward,
        k_cost: o.k_cost,
        step_size: o.step_size,
        tolerance: o.tolerance,
        max_iters: o.max_iters,
        seed: config.seed,
        schedule_kind: kind,
        reuse_noise: o.reuse_noise,
        backtracking: o.backtracking,
        max_halvings: o.max_halvings,
        renormalize: config.density.renormalize,
        conditional_cost: o.conditional_cost,
        initial: None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationReport {
    pub seed: u64,
    pub config_sha256: String,
    pub schedule_kind: String,
    pub converged: bool,
    pub iterations_used: usize,
    pub tolerance: f64,
    pub final_gradient_norm: f64,
    /// Fresh estimate of the final cost on the comparison stream.
    pub final_cost: f64,
    pub final_cost_se: f64,
    pub cost_per_iteration: Vec<f64>,
    pub gradient_norm_per_iteration: Vec<f64>,
}

/// `run <config>`: optimize, verify when enabled, write every artifact.
pub fn run(config: &RunConfig, mode: Mode) -> Result<Status, CliError> {
    let out = Output::prepare(config)?;
    let problem = Problem::from(config)?;
    if mode == Mode::VerifyOnly {
        let report = verify(config, &problem)?;
        out.json("verify_report.json", &report)?;
        return Ok(if report.passed {
            Status::Success
        } else {
            Status::NotConverged
        });
    }

    let kind = config.schedule_kind();
    let result = optimize(config, &problem, kind)?;
    let fresh = comparison_cost(config, &problem, &result.final_schedule)?;
    let zero = ControlSchedule::zero(kind, problem.grid.n_t(), problem.grid.control_bounds());
    let baseline = comparison_cost(config, &problem, &zero)?;

    write_history(&out, &result)?;
    write_schedule(&out, &problem.grid, &result)?;
    write_fields(&out, &problem.grid, &result)?;
    let paths = write_sample_paths(&out, config, &problem, &result.final_schedule)?;
    let mut csv = out.csv(&["schedule", "cost", "std_error"]);
    csv.row(&[
        Cell::from("zero_control"),
        Cell::from(baseline.mean),
        Cell::from(baseline.std_error),
    ]);
    csv.row(&[
        Cell::from(kind.name()),
        Cell::from(fresh.mean),
        Cell::from(fresh.std_error),
    ]);
    out.write("cost_comparison.csv", &csv.finish())?;
    out.json(
        "optimization_result.json",
        &optimization_report(config, &problem, kind, &result, fresh),
    )?;

    let mut status = if result.converged {
        Status::Success
    } else {
        Status::NotConverged
    };
    if config.verify.enabled {
        let report = verify(config, &problem)?;
        out.json("verify_report.json", &report)?;
        if !report.passed {
            status = Status::NotConverged;
        }
    }

    out.write(
        "plots/costate_surface.svg",
        &costate_plot(&out.comment, &problem.grid, &result),
    )?;
    out.write(
        "plots/trajectories.svg",
        &trajectory_plot(&out.comment, &paths),
    )?;
    let history = Series {
        label: kind.name(),
        points: indexed(&result.cost_per_iteration),
    };
    out.write(
        "plots/cost_vs_iteration.svg",
        &svg::line_plot(
            &out.comment,
            "Cost per iteration",
            "iteration",
            "J",
            &[history],
        ),
    )?;
    let curves = [
        Series {
            label: kind.name(),
            points: indexed(&result.cost_per_iteration),
        },
        Series {
            label: "zero control",
            points: vec![
                (0.0, baseline.mean),
                ((result.cost_per_iteration.len() - 1) as f64, baseline.mean),
            ],
        },
    ];
    out.write(
        "plots/cost_comparison.svg",
        &svg::line_plot(&out.comment, "Cost comparison", "iteration", "J", &curves),
    )?;
    Ok(status)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonEntry {
    pub schedule_kind: String,
    pub converged: bool,
    pub iterations_used: usize,
    pub final_gradient_norm: f64,
    pub final_cost: f64,
    pub final_cost_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub config_sha256: String,
    pub entries: Vec<ComparisonEntry>,
}

/// `compare <config> --kinds ...`: one optimization per schedule kind under the
/// shared seed; final costs are evaluated on common random numbers.
pub fn compare(
    config: &RunConfig,
    kinds: &[ScheduleKind],
) -> Result<(Status, ComparisonReport), CliError> {
    if kinds.is_empty() {
        return Err(CliError::Usage(
            "compare needs at least one schedule kind".into(),
        ));
    }
    let out = Output::prepare(config)?;
    let problem = Problem::from(config)?;
    let mut csv = out.csv(&[
        "schedule",
        "converged",
        "iterations",
        "gradient_norm",
        "cost",
        "std_error",
    ]);
    let mut entries = Vec::new();
    let mut curves = Vec::new();
    let mut history = out.csv(&[
        "schedule",
        "iteration",
        "cost",
        "std_error",
        "gradient_norm",
    ]);
    for &kind in kinds {
        let result = optimize(config, &problem, kind)?;
        let fresh = comparison_cost(config, &problem, &result.final_schedule)?;
        let norm = final_norm(&problem, &result);
        csv.row(&[
            Cell::from(kind.name()),
            Cell::from(if result.converged { "true" } else { "false" }),
            Cell::from(result.iterations_used),
            Cell::from(norm),
            Cell::from(fresh.mean),
            Cell::from(fresh.std_error),
        ]);
        for (k, c) in result.cost_per_iteration.iter().enumerate() {
            history.row(&[
                Cell::from(kind.name()),
                Cell::from(k),
                Cell::from(*c),
                Cell::from(result.cost_se.get(k).copied().unwrap_or(f64::NAN)),
                Cell::from(
                    result
                        .gradient_norm_per_iteration
                        .get(k)
                        .copied()
                        .unwrap_or(f64::NAN),
                ),
            ]);
        }
        curves.push((kind, indexed(&result.cost_per_iteration)));
        entries.push(ComparisonEntry {
            schedule_kind: kind.name().into(),
            converged: result.converged,
            iterations_used: result.iterations_used,
            final_gradient_norm: norm,
            final_cost: fresh.mean,
            final_cost_se: fresh.std_error,
        });
    }
    out.write("cost_comparison.csv", &csv.finish())?;
    out.write("cost_per_iteration.csv", &history.finish())?;
    let series: Vec<Series<'_>> = curves
        .iter()
        .map(|(k, p)| Series {
            label: k.name(),
            points: p.clone(),
        })
        .collect();
    out.write(
        "plots/cost_comparison.svg",
        &svg::line_plot(&out.comment, "Cost comparison", "iteration", "J", &series),
    )?;
    let report = ComparisonReport {
        seed: config.seed,
        config_sha256: config.hash(),
        entries,
    };
    out.json("comparison_result.json", &report)?;
    let status = if report.entries.iter().all(|e| e.converged) {
        Status::Success
    } else {
        Status::NotConverged
    };
    Ok((status, report))
}

fn optimize(
    config: &RunConfig,
    problem: &Problem,
    kind: ScheduleKind,
) -> Result<OptimizationResult, CliError> {
    run_ibc(
        &problem.model,
        &problem.cost,
        &problem.grid,
        problem.init,
        &options(config, kind),
    )
    .map_err(CliError::core("gradient_control"))
}

fn comparison_cost(
    config: &RunConfig,
    problem: &Problem,
    schedule: &ControlSchedule,
) -> Result<Estimate, CliError> {
    let seed = StreamSeed::new(config.seed).derive(key::COMPARISON);
    let estimate = if config.optimizer.conditional_cost {
        evaluate_cost_conditional
    } else {
        evaluate_cost
    };
    estimate(
        &problem.model,
        &problem.cost,
        &problem.grid,
        schedule,
        problem.init,
        config.optimizer.k_cost,
        seed,
    )
    .map_err(CliError::core("density_and_cost"))
}

fn final_norm(problem: &Problem, result: &OptimizationResult) -> f64 {
    let domain = (problem.grid.x_min(), problem.grid.x_max());
    projected_gradient_norm(&result.final_schedule, &result.final_gradient, 1.0, domain)
}

fn optimization_report(
    config: &RunConfig,
    problem: &Problem,
    kind: ScheduleKind,
    result: &OptimizationResult,
    fresh: Estimate,
) -> OptimizationReport {
    OptimizationReport {
        seed: config.seed,
        config_sha256: config.hash(),
        schedule_kind: kind.name().into(),
        converged: result.converged,
        iterations_used: result.iterations_used,
        tolerance: config.optimizer.tolerance,
        final_gradient_norm: final_norm(problem, result),
        final_cost: fresh.mean,
        final_cost_se: fresh.std_error,
        cost_per_iteration: result.cost_per_iteration.clone(),
        gradient_norm_per_iteration: result.gradient_norm_per_iteration.clone(),
    }
}

fn indexed(values: &[f64]) -> Vec<(f64, f64)> {
    values
        .iter()
        .enumerate()
        .map(|(k, &v)| (k as f64, v))
        .collect()
}

fn write_history(out: &Output, result: &OptimizationResult) -> Result<(), CliError> {
    let mut csv = out.csv(&["iteration", "cost", "std_error", "step_size"]);
    for (k, &c) in result.cost_per_iteration.iter().enumerate() {
        csv.row(&[
            Cell::from(k),
            Cell::from(c),
            Cell::from(result.cost_se.get(k).copied().unwrap_or(f64::NAN)),
            Cell::from(result.step_sizes.get(k).copied().unwrap_or(0.0)),
        ]);
    }
    out.write("cost_per_iteration.csv", &csv.finish())?;
    let mut csv = out.csv(&["iteration", "gradient_norm"]);
    for (k, &g) in result.gradient_norm_per_iteration.iter().enumerate() {
        csv.row(&[Cell::from(k), Cell::from(g)]);
    }
    out.write("gradient_norm.csv", &csv.finish())
}

fn write_schedule(
    out: &Output,
    grid: &SpaceTimeGrid,
    result: &OptimizationResult,
) -> Result<(), CliError> {
    let s = &result.final_schedule;
    let mut csv = out.csv(&[
        "time_index",
        "time",
        "u1",
        "u2",
        "gradient_u1",
        "gradient_u2",
    ]);
    for i in 0..s.len() {
        let g = result
            .final_gradient
            .get(i)
            .copied()
            .unwrap_or([f64::NAN; 2]);
        csv.row(&[
            Cell::from(i),
            Cell::from(grid.time(i)),
            Cell::from(s.u1[i]),
            Cell::from(s.u2[i]),
            Cell::from(g[0]),
            Cell::from(g[1]),
        ]);
    }
    out.write("final_schedule.csv", &csv.finish())
}

fn write_fields(
    out: &Output,
    grid: &SpaceTimeGrid,
    result: &OptimizationResult,
) -> Result<(), CliError> {
    let costate = &result.final_costate;
    let mut csv = out.csv(&["time_index", "time", "node", "x", "costate", "std_error"]);
    for i in 0..costate.values.n_times() {
        for j in 0..grid.n_x() {
            csv.row(&[
                Cell::from(i),
                Cell::from(grid.time(i)),
                Cell::from(j),
                Cell::from(grid.node(j)),
                Cell::from(costate.values.get(i, j)),
                Cell::from(costate.std_error(i, j)),
            ]);
        }
    }
    out.write("costate_field.csv", &csv.finish())?;
    let density = &result.final_density;
    let mut csv = out.csv(&["time_index", "time", "node", "x", "density", "survival"]);
    for i in 0..density.values.n_times() {
        for j in 0..grid.n_x() {
            csv.row(&[
                Cell::from(i),
                Cell::from(grid.time(i)),
                Cell::from(j),
                Cell::from(grid.node(j)),
                Cell::from(density.values.get(i, j)),
                Cell::from(density.survival[i]),
            ]);
        }
    }
    out.write("density_field.csv", &csv.finish())
}

fn write_sample_paths(
    out: &Output,
    config: &RunConfig,
    problem: &Problem,
    schedule: &ControlSchedule,
) -> Result<Vec<Vec<(f64, f64)>>, CliError> {
    let seed = StreamSeed::new(config.seed).derive(key::SAMPLE_PATHS);
    let paths = sample_ensemble(
        &problem.model,
        schedule,
        &problem.grid,
        problem.init,
        config.density.sample_paths,
        seed,
    )
    .map_err(CliError::core("process"))?;
    let mut csv = out.csv(&[
        "path",
        "time_index",
        "time",
        "state",
        "control",
        "terminated",
    ]);
    let mut points = Vec::with_capacity(paths.len());
    for (k, p) in paths.iter().enumerate() {
        for (n, (&t, &x)) in p.times.iter().zip(&p.states).enumerate() {
            let last = n + 1 == p.states.len();
            csv.row(&[
                Cell::from(k),
                Cell::from(p.start_index + n),
                Cell::from(t),
                Cell::from(x),
                Cell::from(p.controls.get(n).copied().unwrap_or(f64::NAN)),
                Cell::from(if last && p.terminated {
                    "true"
                } else {
                    "false"
                }),
            ]);
        }
        points.push(
            p.times
                .iter()
                .copied()
                .zip(p.states.iter().copied())
                .collect(),
        );
    }
    out.write("trajectories_sample.csv", &csv.finish())?;
    Ok(points)
}

fn costate_plot(comment: &str, grid: &SpaceTimeGrid, result: &OptimizationResult) -> String {
    let values = &result.final_costate.values;
    let stride = values.n_times().div_ceil(100).max(1);
    let times: Vec<usize> = (0..values.n_times()).step_by(stride).collect();
    let rows: Vec<Vec<f64>> = (0..grid.n_x())
        .map(|j| times.iter().map(|&i| values.get(i, j)).collect())
        .collect();
    svg::heat_map(
        comment,
        "Costate surface",
        "t",
        "x",
        (grid.t0(), grid.t_final()),
        (grid.x_min(), grid.x_max()),
        &rows,
    )
}

fn trajectory_plot(comment: &str, paths: &[Vec<(f64, f64)>]) -> String {
    let series: Vec<Series<'_>> = paths
        .iter()
        .map(|p| Series {
            label: "",
            points: p.clone(),
        })
        .collect();
    svg::line_plot(
        comment,
        "Sample paths under the final control",
        "t",
        "x",
        &series,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct AdjointnessJson {
    pub levels: Vec<usize>,
    pub dx: Vec<f64>,
    pub residuals: Vec<Vec<f64>>,
    pub orders: Vec<Vec<f64>>,
    pub min_order: f64,
    pub required_order: f64,
    pub monotone: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeJson {
    pub time_index: usize,
    pub x: f64,
    pub sweep: f64,
    pub sweep_se: f64,
    pub full_horizon: f64,
    pub full_horizon_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeynmanKacJson {
    pub nodes: Vec<NodeJson>,
    pub gate: f64,
    pub nodes_passed: bool,
    pub solver_sup_gap: f64,
    pub solver_sup_location: (usize, usize),
    pub solver_sup_ratio: f64,
    pub solver_passed: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityJson {
    pub time_index: usize,
    pub time: f64,
    pub pairing: f64,
    pub pairing_se: f64,
    pub restarted_cost: f64,
    pub restarted_cost_se: f64,
    pub gap: f64,
    pub combined_se: f64,
    /// `gate * combined_se`, or the nearest-node quadrature bound at the final time.
    pub allowance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueIdentityJson {
    pub entries: Vec<IdentityJson>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub config_sha256: String,
    /// Control under which the checks ran.
    pub control: String,
    pub adjointness: Option<AdjointnessJson>,
    pub feynman_kac: Option<FeynmanKacJson>,
    pub value_identity: Option<ValueIdentityJson>,
    pub passed: bool,
}

/// Largest `|phi(x) - phi(node(x))|` of the quadratic terminal cost over the box.
pub fn terminal_node_bound(cost: &CostSpec, grid: &SpaceTimeGrid) -> f64 {
    let reach = (grid.x_min() - cost.goal)
        .abs()
        .max((grid.x_max() - cost.goal).abs());
    cost.terminal_weight * 0.5 * grid.dx() * (2.0 * reach + 0.5 * grid.dx())
}

fn verify(config: &RunConfig, problem: &Problem) -> Result<VerifyReport, CliError> {
    let v = &config.verify;
    let grid = &problem.grid;
    let seed = StreamSeed::new(config.seed).derive(key::VERIFY);
    let zero = ControlSchedule::zero(config.schedule_kind(), grid.n_t(), grid.control_bounds());

    let adjointness = if v.adjointness {
        let t = 0.5 * (grid.t0() + grid.t_final());
        let study = adjointness_refinement(
            &problem.model,
            grid,
            &v.refinement_levels,
            v.refinement_pairs,
            t,
            &|_| 0.0,
            v.mark_points,
            Advection::Central,
            seed.derive(1),
        )
        .map_err(CliError::core("pide_verify"))?;
        let monotone = study
            .residuals
            .iter()
            .all(|r| r.windows(2).all(|w| w[1] < w[0]));
        let passed = monotone && study.min_order >= REQUIRED_ORDER;
        Some(AdjointnessJson {
            levels: study.n_x,
            dx: study.dx,
            residuals: study.residuals,
            orders: study.orders,
            min_order: study.min_order,
            required_order: REQUIRED_ORDER,
            monotone,
            passed,
        })
    } else {
        None
    };

    let feynman_kac = if v.feynman_kac {
        let settings = FeynmanKacSettings {
            k_backstep: v.fk_k_backstep,
            k_full_horizon: v.fk_k_full_horizon,
            probes: v.fk_probes,
            gate: v.gate,
            mark_points: v.mark_points,
            ..FeynmanKacSettings::default()
        };
        let r = feynman_kac_check(
            &problem.model,
            &problem.cost,
            grid,
            &zero,
            &settings,
            seed.derive(2),
        )
        .map_err(CliError::core("pide_verify"))?;
        Some(FeynmanKacJson {
            nodes: r
                .nodes
                .iter()
                .map(|n| NodeJson {
                    time_index: n.time_index,
                    x: n.x,
                    sweep: n.sweep.mean,
                    sweep_se: n.sweep.std_error,
                    full_horizon: n.full_horizon.mean,
                    full_horizon_se: n.full_horizon.std_error,
                    z: n.z,
                })
                .collect(),
            gate: r.gate,
            nodes_passed: r.nodes_passed,
            solver_sup_gap: r.sup_gap,
            solver_sup_location: r.sup_location,
            solver_sup_ratio: r.sup_ratio,
            solver_passed: r.solver_passed,
            passed: r.passed,
        })
    } else {
        None
    };

    let value_identity = if v.value_identity {
        let settings = IdentitySettings {
            k_backstep: v.identity_k_backstep,
            k_ensemble: v.identity_k_ensemble,
            time_indices: vec![0, grid.n_t()],
            gate: v.gate,
        };
        let r = value_costate_identity_check(
            &problem.model,
            &problem.cost,
            grid,
            &zero,
            problem.init,
            &settings,
            seed.derive(3),
        )
        .map_err(CliError::core("pide_verify"))?;
        let bound = terminal_node_bound(&problem.cost, grid);
        let entries: Vec<IdentityJson> = r
            .entries
            .iter()
            .map(|e| {
                let allowance = if e.time_index == grid.n_t() {
                    bound
                } else {
                    v.gate * e.combined_se
                };
                IdentityJson {
                    time_index: e.time_index,
                    time: e.time,
                    pairing: e.pairing.mean,
                    pairing_se: e.pairing.std_error,
                    restarted_cost: e.restarted.mean,
                    restarted_cost_se: e.restarted.std_error,
                    gap: e.gap,
                    combined_se: e.combined_se,
                    allowance,
                    passed: e.gap <= allowance,
                }
            })
            .collect();
        let passed = entries.iter().all(|e| e.passed);
        Some(ValueIdentityJson { entries, passed })
    } else {
        None
    };

    let passed = adjointness.as_ref().is_none_or(|a| a.passed)
        && feynman_kac.as_ref().is_none_or(|f| f.passed)
        && value_identity.as_ref().is_none_or(|i| i.passed);
    Ok(VerifyReport {
        seed: config.seed,
        config_sha256: config.hash(),
        control: "zero".into(),
        adjointness,
        feynman_kac,
        value_identity,
        passed,
    })
}

/// Names of the CSV artifacts a full run writes.
pub const RUN_CSVS: [&str; 7] = [
    "cost_per_iteration.csv",
    "gradient_norm.csv",
    "final_schedule.csv",
    "costate_field.csv",
    "density_field.csv",
    "trajectories_sample.csv",
    "cost_comparison.csv",
];
