//! Experiment driver: parses a JSON config, dispatches to the library, and
//! emits trajectory CSVs, JSON reports, and a run manifest.
//!
//! Exit codes: 0 success, 1 usage, 2 validation failure, 3 numerical
//! failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use causalkit::curve::SampledCurve;
use causalkit::field::MetricField;
use causalkit::filippov::{
    integrate_geodesic, pointwise_limit_is_geodesic, reparametrize_constant_speed,
    velocity_upper_bound_check, FilippovState, GeodesicTrajectory, ReparOptions,
};
use causalkit::inequalities::{triangle_sweep, velocity_lower_bound_check};
use causalkit::maximality::{
    lorentzian_length, maximize_causal_curve, shoot_geodesic, MaximizeOptions, ShootOptions,
};
use causalkit::regularity::{default_h_grid, estimate_holder_exponent, regularity_of_maximizer};
use causalkit::zoo::{make_metric, MetricSpec};
use causalkit::{io, lvec};

use config::{CheckBoundsConfig, EllSpec, ExperimentConfig, IntegrateConfig};

#[derive(Parser)]
#[command(
    name = "causalkit",
    version,
    about = "Causal-curve experiments on low-regularity Lorentzian metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment config (JSON); an emitted run manifest also works.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed override (replaces the config seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Integrate a geodesic of the configured metric.
    Integrate(CommonArgs),
    /// Maximize Lorentzian length between two points.
    Maximize(CommonArgs),
    /// Shoot a geodesic onto a target endpoint.
    Shoot(CommonArgs),
    /// Estimate the Hölder exponent of a curve derivative.
    Regularity(CommonArgs),
    /// Reparametrize a curve to constant Lorentzian speed.
    Repar(CommonArgs),
    /// Sweep the quantitative reverse triangle inequality.
    SweepTriangle(CommonArgs),
    /// Check velocity bounds along a trajectory.
    CheckBounds(CommonArgs),
    /// Lightlike limit of concatenated timelike geodesics.
    LimitExperiment(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Integrate(_) => "integrate",
            Command::Maximize(_) => "maximize",
            Command::Shoot(_) => "shoot",
            Command::Regularity(_) => "regularity",
            Command::Repar(_) => "repar",
            Command::SweepTriangle(_) => "sweep-triangle",
            Command::CheckBounds(_) => "check-bounds",
            Command::LimitExperiment(_) => "limit-experiment",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Integrate(a)
            | Command::Maximize(a)
            | Command::Shoot(a)
            | Command::Regularity(a)
            | Command::Repar(a)
            | Command::SweepTriangle(a)
            | Command::CheckBounds(a)
            | Command::LimitExperiment(a) => a,
        }
    }
}

enum RunError {
    Validation(String),
    Numerical(String),
}

impl From<causalkit::Error> for RunError {
    fn from(e: causalkit::Error) -> Self {
        if e.is_numerical() {
            RunError::Numerical(e.to_string())
        } else {
            RunError::Validation(e.to_string())
        }
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Validation(format!("{e:#}"))
    }
}

type RunResult = Result<(Value, Vec<String>), RunError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems (unknown subcommand, bad flags) exit 1; help
            // and version requests are not errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let args = cli.command.args().clone();
    if let Some(k) = args.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global();
    }

    let mut experiment = match ExperimentConfig::load(&args.config, cli.command.name()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        experiment.seed = seed;
    }
    if let Some(output) = &args.output {
        experiment.output_dir = Some(output.clone());
    }
    let out_dir = experiment
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("cannot create output directory {}: {e}", out_dir.display());
        return ExitCode::from(2);
    }
    let config_base = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let started = Instant::now();
    let outcome = run(&cli.command, &experiment, &config_base, &out_dir);
    let runtime_seconds = started.elapsed().as_secs_f64();

    match outcome {
        Ok((results, warnings)) => {
            let report = json!({
                "command": cli.command.name(),
                "config": experiment,
                "results": results,
                "warnings": warnings,
                "runtime_seconds": runtime_seconds,
            });
            let manifest = json!({
                "command": cli.command.name(),
                "version": env!("CARGO_PKG_VERSION"),
                "seed": experiment.seed,
                "config": experiment,
            });
            if let Err(e) = write_json(&out_dir.join("report.json"), &report)
                .and_then(|()| write_json(&out_dir.join("manifest.json"), &manifest))
            {
                eprintln!("cannot write outputs: {e}");
                return ExitCode::from(2);
            }
            println!("{}: ok ({} warnings)", cli.command.name(), report["warnings"].as_array().map_or(0, Vec::len));
            ExitCode::SUCCESS
        }
        Err(RunError::Validation(msg)) => {
            eprintln!("validation error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn write_json(path: &Path, value: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text)
}

fn run(
    command: &Command,
    experiment: &ExperimentConfig,
    config_base: &Path,
    out_dir: &Path,
) -> RunResult {
    let field = make_metric(&experiment.metric)?;
    match command {
        Command::Integrate(_) => {
            let cfg = experiment
                .integrate
                .as_ref()
                .ok_or_else(|| RunError::Validation("config lacks an `integrate` block".into()))?;
            let (traj, results, warnings) = run_integrate(&field, cfg)?;
            io::write_trajectory_csv(&out_dir.join("trajectory.csv"), &traj)?;
            io::write_events_json(&out_dir.join("events.json"), &traj)?;
            Ok((results, warnings))
        }
        Command::Maximize(_) => {
            let cfg = experiment
                .maximize
                .as_ref()
                .ok_or_else(|| RunError::Validation("config lacks a `maximize` block".into()))?;
            check_dim(&field, &cfg.from)?;
            check_dim(&field, &cfg.to)?;
            let mut opts = MaximizeOptions {
                seed: experiment.seed,
                ..MaximizeOptions::default()
            };
            if let Some(iters) = cfg.max_iters {
                opts.max_iters = iters;
            }
            let result = maximize_causal_curve(
                &field,
                &lvec(&cfg.from),
                &lvec(&cfg.to),
                cfg.segments,
                &opts,
            )?;
            io::write_curve_csv(&out_dir.join("curve.csv"), &result.curve)?;

            let mut warnings = Vec::new();
            if !result.converged {
                warnings.push("maximizer hit the iteration cap".to_string());
            }
            let regularity = regularity_of_maximizer(&result.curve, &field)?;
            let c2 = causalkit::connection::christoffel_quadratic_bound(
                &field,
                3000,
                experiment.seed ^ 0x632d,
            );
            let arc = result.curve.arclength_reparametrized(512)?;
            let velocity_bound = velocity_lower_bound_check(&arc, &field, c2)?;
            if !velocity_bound.passed {
                warnings.push("velocity lower bound violated on the maximizer".to_string());
            }
            let results = json!({
                "length": result.length,
                "iterations": result.iterations,
                "converged": result.converged,
                "first_order_residual": result.first_order_residual,
                "surrogate_regime": result.surrogate_regime,
                "alpha_hat": regularity.alpha_hat,
                "fit_r2": regularity.fit_r2,
                "velocity_bound": velocity_bound,
            });
            Ok((results, warnings))
        }
        Command::Shoot(_) => {
            let cfg = experiment
                .shoot
                .as_ref()
                .ok_or_else(|| RunError::Validation("config lacks a `shoot` block".into()))?;
            check_dim(&field, &cfg.from)?;
            check_dim(&field, &cfg.to)?;
            let from = lvec(&cfg.from);
            let to = lvec(&cfg.to);
            let guess = cfg
                .v0_guess
                .as_ref()
                .map(|v| lvec(v))
                .unwrap_or_else(|| &to - &from);
            let mut opts = ShootOptions::default();
            if let Some(step) = cfg.step {
                opts.step = step;
            }
            let traj = shoot_geodesic(&field, &from, &to, &guess, &opts)?;
            io::write_trajectory_csv(&out_dir.join("trajectory.csv"), &traj)?;
            io::write_events_json(&out_dir.join("events.json"), &traj)?;
            let length = lorentzian_length(&traj.to_curve()?, &field)?;
            let results = json!({
                "v0": traj.first().v.iter().copied().collect::<Vec<f64>>(),
                "endpoint_error": (traj.last().x.clone() - &to).norm(),
                "length": length,
                "events": traj.events.len(),
            });
            Ok((results, Vec::new()))
        }
        Command::Regularity(_) => {
            let cfg = experiment
                .regularity
                .as_ref()
                .ok_or_else(|| RunError::Validation("config lacks a `regularity` block".into()))?;
            let report = if let Some(input) = &cfg.input {
                let curve = io::read_curve_csv_file(&experiment.resolve(config_base, input))?;
                regularity_of_maximizer(&curve, &field)?
            } else {
                let generator = cfg.generator.as_ref().expect("validated at parse time");
                let curve = synthetic_angle_curve(generator.samples, generator.beta);
                let grid = default_h_grid(&curve);
                estimate_holder_exponent(&curve, &grid)?
            };
            let results = serde_json::to_value(&report).expect("report serializes");
            Ok((results, Vec::new()))
        }
        Command::Repar(_) => {
            let cfg = experiment
                .repar
                .as_ref()
                .ok_or_else(|| RunError::Validation("config lacks a `repar` block".into()))?;
            let curve = io::read_curve_csv_file(&experiment.resolve(config_base, &cfg.input))?;
            let ell = match cfg.ell {
                EllSpec::Auto => None,
                EllSpec::Value(v) => Some(v),
            };
            let out = reparametrize_constant_speed(&curve, &field, ell, &ReparOptions::default())?;
            let speeds: Vec<f64> = (0..out.len())
                .map(|i| field.norm_at(out.point(i), &out.velocity(i)))
                .collect();
            let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
            let max_dev = speeds
                .iter()
                .map(|s| (s - mean).abs())
                .fold(0.0f64, f64::max);
            let traj = curve_as_trajectory(&field, &out);
            io::write_trajectory_csv(&out_dir.join("repar.csv"), &traj)?;
            let (a, b) = out.param_range();
            let results = json!({
                "ell": mean,
                "speed_max_deviation": max_dev,
                "interval": [a, b],
                "samples": out.len(),
            });
            Ok((results, Vec::new()))
        }
        Command::SweepTriangle(_) => {
            let cfg = experiment
                .sweep
                .as_ref()
                .ok_or_else(|| RunError::Validation("config lacks a `sweep` block".into()))?;
            if cfg.dimension < 2 {
                return Err(RunError::Validation("sweep dimension must be >= 2".into()));
            }
            let report = triangle_sweep(cfg.dimension, cfg.trials, experiment.seed);
            let results = serde_json::to_value(&report).expect("report serializes");
            let warnings = if report.violations > 0 {
                vec![format!("{} violations observed", report.violations)]
            } else {
                Vec::new()
            };
            Ok((results, warnings))
        }
        Command::CheckBounds(_) => {
            let cfg = experiment
                .check_bounds
                .as_ref()
                .ok_or_else(|| RunError::Validation("config lacks a `check_bounds` block".into()))?;
            let traj = load_or_integrate(&field, cfg, experiment, config_base)?;
            let c2 = causalkit::connection::christoffel_quadratic_bound(
                &field,
                3000,
                experiment.seed ^ 0x177,
            );
            let upper = velocity_upper_bound_check(&traj, c2);
            let c1 = traj.max_speed();
            let lipschitz = traj.velocity_lipschitz();
            let curve = traj.to_curve()?;
            let lower = if lorentzian_length(&curve, &field)? <= 1e-8 * curve.euclidean_length() {
                velocity_lower_bound_check(&curve, &field, c2)?
            } else {
                let arc = curve.arclength_reparametrized(1024)?;
                velocity_lower_bound_check(&arc, &field, c2)?
            };
            let mut warnings = Vec::new();
            if upper.min_slack < 0.0 {
                warnings.push("velocity upper bound violated".to_string());
            }
            if !lower.passed {
                warnings.push("velocity lower bound violated".to_string());
            }
            let c11_bound = 1.1 * c2 * c1 * c1;
            if lipschitz > c11_bound + 1e-10 {
                warnings.push("C^(1,1) bound on gamma' violated".to_string());
            }
            let results = json!({
                "upper": upper,
                "lower": lower,
                "c11": {"measured_lipschitz": lipschitz, "bound": c11_bound, "c2": c2, "c1": c1},
            });
            Ok((results, warnings))
        }
        Command::LimitExperiment(_) => {
            let cfg = experiment.limit_experiment.as_ref().ok_or_else(|| {
                RunError::Validation("config lacks a `limit_experiment` block".into())
            })?;
            if !matches!(experiment.metric, MetricSpec::Minkowski { n: 2, .. }) {
                return Err(RunError::Validation(
                    "limit-experiment runs on the 2-dimensional Minkowski metric".into(),
                ));
            }
            if cfg.spatial_end <= 0.0
                || cfg.spatial_end * std::f64::consts::SQRT_2 * 1.3 >= field.domain_radius() * 2.0
            {
                return Err(RunError::Validation(
                    "spatial_end leaves no room inside the chart".into(),
                ));
            }
            let mut trajs = Vec::new();
            for k in 1..=cfg.levels {
                let delta = 2f64.powi(-(k as i32)) * 0.2;
                let pieces_count = k as usize + 2;
                let mut pieces = Vec::new();
                for i in 0..pieces_count {
                    let s0 = cfg.spatial_end * i as f64 / pieces_count as f64;
                    let s1 = cfg.spatial_end * (i + 1) as f64 / pieces_count as f64;
                    let init = FilippovState {
                        x: lvec(&[(1.0 + delta) * s0, s0]),
                        v: lvec(&[1.0 + delta, 1.0]),
                        tau: s0,
                    };
                    pieces.push(integrate_geodesic(&field, &init, s1, 1e-3)?);
                }
                trajs.push(concatenate(pieces));
            }
            let limit = SampledCurve::line(
                &lvec(&[0.0, 0.0]),
                &lvec(&[cfg.spatial_end, cfg.spatial_end]),
                600,
            );
            let checks = cfg.check_points.unwrap_or(100);
            let report = pointwise_limit_is_geodesic(&trajs, &limit, &field, checks, experiment.seed)?;
            io::write_curve_csv(&out_dir.join("limit.csv"), &limit)?;
            let mut warnings = Vec::new();
            if !report.converged {
                warnings.push("trajectory sequence did not converge".to_string());
            }
            if !report.inclusion.passed {
                warnings.push("limit curve fails the inclusion margin".to_string());
            }
            let results = serde_json::to_value(&report).expect("report serializes");
            Ok((results, warnings))
        }
    }
}

fn run_integrate(
    field: &MetricField,
    cfg: &IntegrateConfig,
) -> Result<(GeodesicTrajectory, Value, Vec<String>), RunError> {
    check_dim(field, &cfg.x)?;
    check_dim(field, &cfg.v)?;
    let init = FilippovState::new(lvec(&cfg.x), lvec(&cfg.v));
    let traj = integrate_geodesic(field, &init, cfg.tau_end, cfg.step)?;
    let mut warnings = Vec::new();
    if traj.exited_chart {
        warnings.push("trajectory left the chart; output truncated".to_string());
    }
    let results = json!({
        "states": traj.len(),
        "events": traj.events,
        "energy_drift": traj.energy_drift(field),
        "exited_chart": traj.exited_chart,
        "final_tau": traj.last().tau,
        "final_x": traj.last().x.iter().copied().collect::<Vec<f64>>(),
        "final_v": traj.last().v.iter().copied().collect::<Vec<f64>>(),
    });
    Ok((traj, results, warnings))
}

fn load_or_integrate(
    field: &MetricField,
    cfg: &CheckBoundsConfig,
    experiment: &ExperimentConfig,
    config_base: &Path,
) -> Result<GeodesicTrajectory, RunError> {
    if let Some(input) = &cfg.input {
        let curve = io::read_curve_csv_file(&experiment.resolve(config_base, input))?;
        Ok(curve_as_trajectory(field, &curve))
    } else {
        let integrate = cfg.integrate.as_ref().expect("validated at parse time");
        let (traj, _, _) = run_integrate(field, integrate)?;
        Ok(traj)
    }
}

/// Wrap a sampled curve as a trajectory (no events, branch from position).
fn curve_as_trajectory(field: &MetricField, curve: &SampledCurve) -> GeodesicTrajectory {
    let states: Vec<FilippovState> = (0..curve.len())
        .map(|i| FilippovState {
            x: curve.point(i).clone(),
            v: curve.velocity(i),
            tau: curve.params()[i],
        })
        .collect();
    let branch_ids = states.iter().map(|s| field.branch_index(&s.x)).collect();
    GeodesicTrajectory {
        states,
        branch_ids,
        events: Vec::new(),
        metric_ref: field.name().to_string(),
        exited_chart: false,
    }
}

fn concatenate(pieces: Vec<GeodesicTrajectory>) -> GeodesicTrajectory {
    let mut iter = pieces.into_iter();
    let mut out = iter.next().expect("at least one piece");
    for piece in iter {
        let skip = usize::from((piece.first().tau - out.last().tau).abs() < 1e-12);
        out.states.extend(piece.states.into_iter().skip(skip));
        out.branch_ids.extend(piece.branch_ids.into_iter().skip(skip));
        out.events.extend(piece.events);
        out.exited_chart |= piece.exited_chart;
    }
    out
}

/// Unit-speed plane curve whose tangent angle is `|s|^beta`.
fn synthetic_angle_curve(samples: usize, beta: f64) -> SampledCurve {
    let n = samples.max(16);
    let mut params = Vec::with_capacity(n + 1);
    let mut points = Vec::with_capacity(n + 1);
    let mut p = lvec(&[0.0, 0.0]);
    let dt = 2.0 / n as f64;
    params.push(-1.0);
    points.push(p.clone());
    for i in 0..n {
        let s: f64 = -1.0 + (i as f64 + 0.5) * dt;
        let th = s.abs().powf(beta);
        p = &p + lvec(&[th.cos(), th.sin()]) * dt;
        params.push(-1.0 + (i + 1) as f64 * dt);
        points.push(p.clone());
    }
    SampledCurve::new(params, points).expect("strictly increasing parameters")
}

fn check_dim(field: &MetricField, coords: &[f64]) -> Result<(), RunError> {
    if coords.len() != field.dim() {
        return Err(RunError::Validation(format!(
            "expected {} coordinates, got {}",
            field.dim(),
            coords.len()
        )));
    }
    Ok(())
}
