//! `retime` — seeded experiment runner for look-ahead path tracking with
//! offline speed-profile scaling.
//!
//! The binary exposes every stage of the experiment as a sub-command with
//! file-based inputs and outputs (`gen-world`, `plan`, `fit`, `scale`,
//! `run`), plus batch drivers (`trials`, `report`, `pipeline`). Running the
//! stages by hand with the same configuration and seeds reproduces the
//! batch output byte for byte.
//!
//! Configuration is a single optional TOML file whose flat keys are named
//! exactly like the run-configuration fields (`trials = 50`,
//! `master_seed = 7`, `start = [0.05, 0.05]`, ...); command-line flags
//! override file values, and anything left unset falls back to the built-in
//! defaults. Every output file is accompanied by provenance — either a
//! `*.meta.json` sidecar or, for closed-loop runs, the standard trial
//! sidecar — embedding the exact configuration and seeds that produced it.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when every
//! trial in a batch failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use retime_core::pipeline::{
    plan_geometry, report_from_dir, run_pipeline, stage_seed, write_atomic, write_batch,
    write_report, PipelineError, RunConfig, TrialSidecar, STAGE_SIM, STAGE_WORLD,
};
use retime_core::simulator::run_trial;
use retime_core::spline::{build_grid, fit_spline, PathGrid};
use retime_core::timescale::{build_profile, profile_stats, ProfileStats, ScalingProfile};
use retime_core::tracker::TrackerConfig;
use retime_core::vec2::Vec2;
use retime_core::workspace::Workspace;

#[derive(Parser)]
#[command(
    name = "retime",
    version,
    about = "Seeded tracking experiments: world generation, planning, spline \
             references, speed-profile scaling, closed-loop trials, reports.",
    propagate_version = true
)]
struct Cli {
    /// TOML configuration file; flat keys named like the config fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Cmd,
}

/// Per-field overrides applied on top of the config file (or defaults).
/// All flags are global, so they may follow the sub-command.
#[derive(Args)]
struct Overrides {
    /// Control period in seconds.
    #[arg(long, global = true)]
    t_s: Option<f64>,
    /// Reference duration assigned to the fitted spline, seconds.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Speed limit, m/s.
    #[arg(long, global = true)]
    v_max: Option<f64>,
    /// Acceleration limit, m/s^2.
    #[arg(long, global = true)]
    a_max: Option<f64>,
    /// Position-disturbance bound, m/s.
    #[arg(long, global = true)]
    eps_p: Option<f64>,
    /// Acceleration-disturbance bound, m/s^2.
    #[arg(long, global = true)]
    eps_v: Option<f64>,
    /// Gain-schedule slope for the relaxed tracking branch.
    #[arg(long, global = true)]
    c0: Option<f64>,
    /// Lower clamp for the scheduled gain.
    #[arg(long, global = true)]
    c_min: Option<f64>,
    /// Upper clamp for the scheduled gain.
    #[arg(long, global = true)]
    c_max: Option<f64>,
    /// World width, m.
    #[arg(long, global = true)]
    width: Option<f64>,
    /// World height, m.
    #[arg(long, global = true)]
    height: Option<f64>,
    /// Start position as `x,y`.
    #[arg(long, global = true, value_parser = parse_vec2, value_name = "X,Y")]
    start: Option<Vec2>,
    /// Goal position as `x,y`.
    #[arg(long, global = true, value_parser = parse_vec2, value_name = "X,Y")]
    goal: Option<Vec2>,
    /// Number of circular obstacles.
    #[arg(long, global = true)]
    n_obstacles: Option<usize>,
    /// Minimum obstacle radius, m.
    #[arg(long, global = true)]
    obstacle_r_min: Option<f64>,
    /// Maximum obstacle radius, m.
    #[arg(long, global = true)]
    obstacle_r_max: Option<f64>,
    /// Required gap between obstacles and start/goal, m.
    #[arg(long, global = true)]
    clearance: Option<f64>,
    /// Planner iteration budget.
    #[arg(long, global = true)]
    rrt_max_iters: Option<usize>,
    /// Planner extension step, m.
    #[arg(long, global = true)]
    rrt_step: Option<f64>,
    /// Probability of sampling the goal directly.
    #[arg(long, global = true)]
    rrt_goal_bias: Option<f64>,
    /// Rewiring neighborhood radius, m.
    #[arg(long, global = true)]
    rrt_rewire_radius: Option<f64>,
    /// Radius around the goal that ends a plan, m.
    #[arg(long, global = true)]
    rrt_goal_tolerance: Option<f64>,
    /// Obstacle inflation used during planning, m.
    #[arg(long, global = true)]
    rrt_inflation: Option<f64>,
    /// Waypoints closer than this are merged, m.
    #[arg(long, global = true)]
    dedupe_tol: Option<f64>,
    /// Plan attempts before a trial is abandoned.
    #[arg(long, global = true)]
    replan_attempts: Option<usize>,
    /// Samples in the dense reference grid.
    #[arg(long, global = true)]
    grid_samples: Option<usize>,
    /// Lower clamp for the speed profile.
    #[arg(long, global = true)]
    alpha_min: Option<f64>,
    /// Arc-length half-width of each profile update, m.
    #[arg(long, global = true)]
    w_n: Option<f64>,
    /// Moving-average window for profile smoothing (odd sample count).
    #[arg(long, global = true)]
    n_smooth: Option<usize>,
    /// Record-and-refine rounds when building the profile.
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Arrival radius around the goal, m.
    #[arg(long, global = true)]
    goal_tol: Option<f64>,
    /// Step budget per closed-loop run.
    #[arg(long, global = true)]
    max_steps: Option<usize>,
    /// Freeze window start, seconds.
    #[arg(long, global = true)]
    freeze_start: Option<f64>,
    /// Freeze window length, seconds (zero disables it).
    #[arg(long, global = true)]
    freeze_duration: Option<f64>,
    /// Number of trials in a batch.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Master seed; trial i uses master_seed + i.
    #[arg(long = "seed", global = true, value_name = "SEED")]
    master_seed: Option<u64>,
    /// Bins in the per-trial mean-margin histogram.
    #[arg(long, global = true)]
    histogram_bins: Option<usize>,
    /// Worker threads for the batch (0 = library default).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Default output directory for batch commands.
    #[arg(long, global = true)]
    out_dir: Option<String>,
}

macro_rules! apply_overrides {
    ($self:ident, $cfg:ident; $($field:ident),* $(,)?) => {
        $(if let Some(v) = $self.$field.clone() {
            $cfg.$field = v;
        })*
    };
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        apply_overrides!(self, cfg;
            t_s, horizon, v_max, a_max, eps_p, eps_v, c0, c_min, c_max,
            width, height, start, goal, n_obstacles, obstacle_r_min,
            obstacle_r_max, clearance, rrt_max_iters, rrt_step,
            rrt_goal_bias, rrt_rewire_radius, rrt_goal_tolerance,
            rrt_inflation, dedupe_tol, replan_attempts, grid_samples,
            alpha_min, w_n, n_smooth, repeats, goal_tol, max_steps,
            freeze_start, freeze_duration, trials, master_seed,
            histogram_bins, threads, out_dir,
        );
    }
}

fn parse_vec2(s: &str) -> Result<Vec2, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let x: f64 = x.trim().parse().map_err(|e| format!("x: {e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("y: {e}"))?;
    Ok(Vec2::new(x, y))
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the seeded random world for one trial index.
    GenWorld {
        /// Trial index; the world seed derives from master_seed + trial.
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Output world JSON path.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Plan a waypoint path through a world, replanning with inflated
    /// obstacles when the fitted curve would clip one.
    Plan {
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// World JSON produced by gen-world.
        #[arg(long, value_name = "FILE")]
        world: PathBuf,
        /// Output waypoint JSON path (array of [x, y] pairs).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Fit the reference spline to a waypoint path and export the dense
    /// sampled grid as CSV.
    Fit {
        /// World JSON; the sampled curve is checked against it.
        #[arg(long, value_name = "FILE")]
        world: PathBuf,
        /// Waypoint JSON produced by plan.
        #[arg(long, value_name = "FILE")]
        path: PathBuf,
        /// Output grid CSV path.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Record a baseline run and build the speed profile from it.
    Scale {
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, value_name = "FILE")]
        world: PathBuf,
        #[arg(long, value_name = "FILE")]
        path: PathBuf,
        /// Output profile CSV path (`tau,alpha` rows).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// One closed-loop trial on a planned path: nominal timing without
    /// --profile, scaled timing with it. Both variants of the same trial
    /// share one disturbance stream and freeze window.
    Run {
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, value_name = "FILE")]
        world: PathBuf,
        #[arg(long, value_name = "FILE")]
        path: PathBuf,
        /// Profile CSV from scale; omit to run the nominal variant.
        #[arg(long, value_name = "FILE")]
        profile: Option<PathBuf>,
        /// Plan attempts to record in the sidecar (from the plan metadata).
        #[arg(long, default_value_t = 1)]
        plan_attempts: usize,
        /// Planning inflation to record in the sidecar; defaults to the
        /// configured rrt_inflation.
        #[arg(long, value_name = "METERS")]
        inflation_used: Option<f64>,
        /// Output CSV path; the sidecar goes next to it with a .json
        /// extension.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Run the whole trial batch and write per-trial artifacts.
    Trials {
        /// Destination directory; defaults to the configured out_dir.
        #[arg(long, value_name = "DIR")]
        dir: Option<PathBuf>,
    },
    /// Rebuild the aggregate report from per-trial artifacts on disk.
    Report {
        #[arg(long, value_name = "DIR")]
        dir: Option<PathBuf>,
    },
    /// Full experiment: the trial batch plus the report built back from
    /// the written files.
    Pipeline {
        #[arg(long, value_name = "DIR")]
        dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                PipelineError::InvalidConfig(_) => ExitCode::from(2),
                PipelineError::AllTrialsFailed(..) => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Cmd::GenWorld { trial, out } => cmd_gen_world(&cfg, trial, &out),
        Cmd::Plan { trial, world, out } => cmd_plan(&cfg, trial, &world, &out),
        Cmd::Fit { world, path, out } => cmd_fit(&cfg, &world, &path, &out),
        Cmd::Scale {
            trial,
            world,
            path,
            out,
        } => cmd_scale(&cfg, trial, &world, &path, &out),
        Cmd::Run {
            trial,
            world,
            path,
            profile,
            plan_attempts,
            inflation_used,
            out,
        } => cmd_run(
            &cfg,
            trial,
            &world,
            &path,
            profile.as_deref(),
            plan_attempts,
            inflation_used,
            &out,
        ),
        Cmd::Trials { dir } => cmd_trials(&cfg, &batch_dir(&cfg, dir)),
        Cmd::Report { dir } => cmd_report(&cfg, &batch_dir(&cfg, dir)),
        Cmd::Pipeline { dir } => cmd_pipeline(&cfg, &batch_dir(&cfg, dir)),
    }
}

fn batch_dir(cfg: &RunConfig, dir: Option<PathBuf>) -> PathBuf {
    dir.unwrap_or_else(|| PathBuf::from(&cfg.out_dir))
}

/// Defaults, overlaid by the TOML file, overlaid by flags, then validated.
fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                PipelineError::InvalidConfig(format!("config {}: {e}", path.display()))
            })?;
            toml::from_str(&text).map_err(|e| {
                PipelineError::InvalidConfig(format!("config {}: {e}", path.display()))
            })?
        }
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Stage provenance sidecars: every file the single-stage commands write is
// paired with `<stem>.meta.json` embedding the exact config and seeds.

#[derive(Serialize)]
struct WorldMeta<'a> {
    command: &'static str,
    trial_index: usize,
    trial_seed: u64,
    world_seed: u64,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct PlanMeta<'a> {
    command: &'static str,
    trial_index: usize,
    trial_seed: u64,
    plan_attempts: usize,
    inflation_used: f64,
    waypoints: usize,
    polyline_length: f64,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct FitMeta<'a> {
    command: &'static str,
    samples: usize,
    tau_end: f64,
    total_arclen: f64,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct ScaleMeta<'a> {
    command: &'static str,
    trial_index: usize,
    trial_seed: u64,
    sim_seed: u64,
    rounds: usize,
    /// Count of margin violations in each recording round.
    baseline_violations: Vec<usize>,
    stats: ProfileStats,
    config: &'a RunConfig,
}

fn meta_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// File loading.

fn read_file(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_world(path: &Path) -> Result<Workspace, PipelineError> {
    let world = Workspace::from_json(&read_file(path)?).map_err(|e| PipelineError::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    world.validate()?;
    Ok(world)
}

fn load_waypoints(path: &Path) -> Result<Vec<Vec2>, PipelineError> {
    serde_json::from_str(&read_file(path)?).map_err(|e| PipelineError::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Parse a `tau,alpha` CSV back into a profile. Shortest-round-trip float
/// formatting on the way out makes this read exact.
fn load_profile(path: &Path) -> Result<ScalingProfile, PipelineError> {
    let malformed = |reason: String| PipelineError::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let text = read_file(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("tau,alpha") => {}
        other => return Err(malformed(format!("expected `tau,alpha` header, got {other:?}"))),
    }
    let mut alpha = Vec::new();
    for (i, line) in lines.enumerate() {
        let (_, a) = line
            .split_once(',')
            .ok_or_else(|| malformed(format!("row {}: expected two columns", i + 1)))?;
        let a: f64 = a
            .parse()
            .map_err(|e| malformed(format!("row {}: {e}", i + 1)))?;
        alpha.push(a);
    }
    if alpha.is_empty() {
        return Err(malformed("profile has no rows".to_string()));
    }
    Ok(ScalingProfile { alpha })
}

/// Rebuild the dense reference grid exactly as the batch pipeline does:
/// fit the spline to the waypoints and sample it against the world.
fn grid_for(
    cfg: &RunConfig,
    world: &Workspace,
    waypoints: &[Vec2],
) -> Result<PathGrid, PipelineError> {
    let spline = fit_spline(waypoints, cfg.horizon)?;
    Ok(build_grid(&spline, cfg.grid_samples, world)?)
}

fn write_csv_atomic<F>(path: &Path, write: F) -> Result<(), PipelineError>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_atomic(path, &buf)
}

// ---------------------------------------------------------------------------
// Sub-commands.

fn cmd_gen_world(cfg: &RunConfig, trial: usize, out: &Path) -> Result<(), PipelineError> {
    let trial_seed = cfg.trial_seed(trial);
    let world_seed = stage_seed(trial_seed, STAGE_WORLD, 0);
    let world = Workspace::generate(&cfg.world_params(), world_seed)?;
    write_atomic(out, world.to_json()?.as_bytes())?;
    let meta = WorldMeta {
        command: "gen-world",
        trial_index: trial,
        trial_seed,
        world_seed,
        config: cfg,
    };
    write_atomic(&meta_path(out), to_pretty_json(&meta).as_bytes())?;
    println!(
        "world: {} obstacles in {} x {} m -> {}",
        world.obstacles.len(),
        world.width,
        world.height,
        out.display()
    );
    Ok(())
}

fn cmd_plan(cfg: &RunConfig, trial: usize, world: &Path, out: &Path) -> Result<(), PipelineError> {
    let world = load_world(world)?;
    let trial_seed = cfg.trial_seed(trial);
    let geom = plan_geometry(cfg, &world, trial_seed)?;
    write_atomic(out, to_pretty_json(&geom.waypoints).as_bytes())?;
    let polyline_length = retime_core::planner::path_length(&geom.waypoints);
    let meta = PlanMeta {
        command: "plan",
        trial_index: trial,
        trial_seed,
        plan_attempts: geom.attempts,
        inflation_used: geom.inflation_used,
        waypoints: geom.waypoints.len(),
        polyline_length,
        config: cfg,
    };
    write_atomic(&meta_path(out), to_pretty_json(&meta).as_bytes())?;
    println!(
        "plan: {} waypoints, {:.4} m polyline, {} attempt(s) -> {}",
        geom.waypoints.len(),
        polyline_length,
        geom.attempts,
        out.display()
    );
    Ok(())
}

fn cmd_fit(cfg: &RunConfig, world: &Path, path: &Path, out: &Path) -> Result<(), PipelineError> {
    let world = load_world(world)?;
    let waypoints = load_waypoints(path)?;
    let grid = grid_for(cfg, &world, &waypoints)?;
    write_csv_atomic(out, |buf| grid.write_csv(buf))?;
    let meta = FitMeta {
        command: "fit",
        samples: grid.len(),
        tau_end: grid.tau_end(),
        total_arclen: grid.total_arclen(),
        config: cfg,
    };
    write_atomic(&meta_path(out), to_pretty_json(&meta).as_bytes())?;
    println!(
        "fit: {} samples over {} s, {:.4} m arc length -> {}",
        grid.len(),
        grid.tau_end(),
        grid.total_arclen(),
        out.display()
    );
    Ok(())
}

fn cmd_scale(
    cfg: &RunConfig,
    trial: usize,
    world: &Path,
    path: &Path,
    out: &Path,
) -> Result<(), PipelineError> {
    let world = load_world(world)?;
    let waypoints = load_waypoints(path)?;
    let grid = grid_for(cfg, &world, &waypoints)?;
    let trial_seed = cfg.trial_seed(trial);
    let sim_seed = stage_seed(trial_seed, STAGE_SIM, 0);
    let tcfg: TrackerConfig = cfg.tracker_config();
    let scfg = cfg.sim_config(sim_seed);
    let (profile, logs) = build_profile(&grid, &tcfg, &scfg, &cfg.timescale_params())?;
    let stats = profile_stats(&profile);
    write_csv_atomic(out, |buf| profile.write_csv(&grid, buf))?;
    let meta = ScaleMeta {
        command: "scale",
        trial_index: trial,
        trial_seed,
        sim_seed,
        rounds: cfg.repeats,
        baseline_violations: logs.iter().map(|l| l.violating().count()).collect(),
        stats,
        config: cfg,
    };
    write_atomic(&meta_path(out), to_pretty_json(&meta).as_bytes())?;
    println!(
        "scale: min alpha {:.4}, mean alpha {:.4}, {:.2}% modified -> {}",
        stats.min_alpha,
        stats.mean_alpha,
        stats.modified_pct,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    cfg: &RunConfig,
    trial: usize,
    world: &Path,
    path: &Path,
    profile: Option<&Path>,
    plan_attempts: usize,
    inflation_used: Option<f64>,
    out: &Path,
) -> Result<(), PipelineError> {
    let world = load_world(world)?;
    let waypoints = load_waypoints(path)?;
    let grid = grid_for(cfg, &world, &waypoints)?;
    let (variant, profile) = match profile {
        Some(p) => {
            let profile = load_profile(p)?;
            if profile.len() != grid.len() {
                return Err(PipelineError::Malformed {
                    path: p.to_path_buf(),
                    reason: format!(
                        "profile has {} rows but the grid has {} samples",
                        profile.len(),
                        grid.len()
                    ),
                });
            }
            ("scaled", profile)
        }
        None => ("nominal", ScalingProfile::ones(grid.len())),
    };
    let trial_seed = cfg.trial_seed(trial);
    let sim_seed = stage_seed(trial_seed, STAGE_SIM, 0);
    let tcfg = cfg.tracker_config();
    let scfg = cfg.sim_config(sim_seed);
    let result = run_trial(&grid, &profile.alpha, &tcfg, &scfg)?;
    write_csv_atomic(out, |buf| result.write_csv(buf))?;
    let sidecar = TrialSidecar {
        config: cfg.clone(),
        trial_index: trial,
        seed: trial_seed,
        sim_seed,
        variant: variant.to_string(),
        plan_attempts,
        inflation_used: inflation_used.unwrap_or(cfg.rrt_inflation),
        profile_stats: profile_stats(&profile),
        meta: result.meta(),
    };
    write_atomic(&out.with_extension("json"), to_pretty_json(&sidecar).as_bytes())?;
    match retime_core::metrics::trial_metrics(&result) {
        Ok(m) => println!(
            "run ({variant}): {:?} after {} samples; moving mean margin {:.3}, {:.2}% positive -> {}",
            result.status,
            result.len(),
            m.mean_delta,
            m.pct_delta_pos,
            out.display()
        ),
        Err(_) => println!(
            "run ({variant}): {:?} after {} samples; no moving samples -> {}",
            result.status,
            result.len(),
            out.display()
        ),
    }
    Ok(())
}

fn cmd_trials(cfg: &RunConfig, dir: &Path) -> Result<(), PipelineError> {
    let batch = write_batch(cfg, dir)?;
    for art in &batch.completed {
        println!(
            "trial {:03}: ok  plan attempts {}  min alpha {:.4}  nominal {:>5} samples  scaled {:>5} samples",
            art.index,
            art.attempts,
            art.profile_stats.min_alpha,
            art.nominal.len(),
            art.scaled.len(),
        );
    }
    for f in &batch.failures {
        println!("trial {:03}: FAILED  {}", f.index, f.error);
    }
    println!(
        "trials: {} completed, {} failed -> {}",
        batch.completed.len(),
        batch.failures.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_report(cfg: &RunConfig, dir: &Path) -> Result<(), PipelineError> {
    let doc = report_from_dir(cfg, dir)?;
    write_report(&doc, dir)?;
    print!("{}", doc.render_markdown());
    println!(
        "\nreport: {} of {} trials -> {}",
        doc.completed,
        doc.trials,
        dir.join("report.{json,md}").display()
    );
    Ok(())
}

fn cmd_pipeline(cfg: &RunConfig, dir: &Path) -> Result<(), PipelineError> {
    let doc = run_pipeline(cfg, dir)?;
    print!("{}", doc.render_markdown());
    println!(
        "\npipeline: {} of {} trials -> {}",
        doc.completed,
        doc.trials,
        dir.display()
    );
    Ok(())
}
