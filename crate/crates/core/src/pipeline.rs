//! Seeded end-to-end experiment batches: generate a workspace, plan, fit,
//! build the speed profile, run a nominal and a scaled closed-loop trial on
//! the same geometry and noise stream, and reduce everything to a report.
//!
//! Determinism contract: every random stage derives its stream from the
//! trial seed (`master_seed + trial_index`) through a SplitMix64 finalizer
//! keyed by stage and attempt, so re-running any stage — in process, from
//! the CLI, or in parallel — reproduces identical bytes.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    aggregate, compare, mean_std, trial_metrics, CompareReport, MeanStd, MetricsError,
    TrialMetrics,
};
use crate::planner::{dedupe, plan, PlannerError, RrtParams};
use crate::simulator::{run_trial, SimConfig, SimError, TrialMeta, TrialResult};
use crate::spline::{build_grid, fit_spline, PathGrid, SplineError};
use crate::timescale::{
    build_profile, profile_stats, ProfileStats, ScalingProfile, TimescaleError, TimescaleParams,
};
use crate::tracker::TrackerConfig;
use crate::vec2::Vec2;
use crate::workspace::{Workspace, WorkspaceError, WorldGenParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Timescale(#[from] TimescaleError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("all {0} trials failed; first error: {1}")]
    AllTrialsFailed(usize, String),
    #[error("malformed artifact {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

/// Flat configuration for the whole experiment; TOML-friendly, every field
/// optional with these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // Control timing and limits.
    pub t_s: f64,
    pub horizon: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub eps_p: f64,
    pub eps_v: f64,
    pub c0: f64,
    pub c_min: f64,
    pub c_max: f64,
    // World generation.
    pub width: f64,
    pub height: f64,
    pub start: Vec2,
    pub goal: Vec2,
    pub n_obstacles: usize,
    pub obstacle_r_min: f64,
    pub obstacle_r_max: f64,
    pub clearance: f64,
    // Planner.
    pub rrt_max_iters: usize,
    pub rrt_step: f64,
    pub rrt_goal_bias: f64,
    pub rrt_rewire_radius: f64,
    pub rrt_goal_tolerance: f64,
    pub rrt_inflation: f64,
    pub dedupe_tol: f64,
    /// Replans allowed when the fitted curve clips an obstacle; each retry
    /// inflates obstacles 1.5x further and replans with a fresh stream.
    pub replan_attempts: usize,
    // Reference discretization.
    pub grid_samples: usize,
    // Speed profile.
    pub alpha_min: f64,
    pub w_n: f64,
    pub n_smooth: usize,
    pub repeats: usize,
    // Closed-loop simulation.
    pub goal_tol: f64,
    pub max_steps: usize,
    pub freeze_start: f64,
    pub freeze_duration: f64,
    // Batch.
    pub trials: usize,
    pub master_seed: u64,
    pub histogram_bins: usize,
    /// Worker threads for the trial batch; 0 uses the global default.
    pub threads: usize,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t_s: 0.0125,
            horizon: 2.0,
            v_max: 1.0,
            a_max: 2.5,
            eps_p: 0.00125,
            eps_v: 0.1,
            c0: 0.05,
            c_min: 1e-4,
            c_max: 1.0,
            width: 0.5,
            height: 0.5,
            start: Vec2::new(0.05, 0.05),
            goal: Vec2::new(0.45, 0.45),
            n_obstacles: 6,
            obstacle_r_min: 0.035,
            obstacle_r_max: 0.07,
            clearance: 0.05,
            // Denser tree than `RrtParams::default()`: short extensions and a
            // tight rewire radius keep waypoint spacing near the step size, so
            // stock benchmark paths carry enough curvature for the scaling
            // stage to have real work to do.
            rrt_max_iters: 5500,
            rrt_step: 0.02,
            rrt_goal_bias: 0.05,
            rrt_rewire_radius: 0.03,
            rrt_goal_tolerance: 0.02,
            rrt_inflation: 0.01,
            dedupe_tol: 1e-6,
            replan_attempts: 5,
            grid_samples: 150_000,
            alpha_min: 0.1,
            w_n: 0.02,
            n_smooth: 201,
            repeats: 1,
            goal_tol: 0.01,
            max_steps: 3200,
            // Freezing early puts the resume transient inside the slowed
            // start-up arc, where the profile can actually soften it.
            freeze_start: 0.25,
            freeze_duration: 0.5,
            trials: 50,
            master_seed: 7,
            histogram_bins: 20,
            threads: 0,
            out_dir: "out".to_string(),
        }
    }
}

impl RunConfig {
    pub fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            t_s: self.t_s,
            v_max: self.v_max,
            a_max: self.a_max,
            eps_p: self.eps_p,
            eps_v: self.eps_v,
            c0: self.c0,
            c_min: self.c_min,
            c_max: self.c_max,
        }
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            seed,
            max_steps: self.max_steps,
            goal_tol: self.goal_tol,
            freeze_start: self.freeze_start,
            freeze_duration: self.freeze_duration,
            eps_p: self.eps_p,
            eps_v: self.eps_v,
        }
    }

    pub fn world_params(&self) -> WorldGenParams {
        WorldGenParams {
            width: self.width,
            height: self.height,
            start: self.start,
            goal: self.goal,
            n_obs: self.n_obstacles,
            r_min: self.obstacle_r_min,
            r_max: self.obstacle_r_max,
            clearance: self.clearance,
        }
    }

    pub fn rrt_params(&self) -> RrtParams {
        RrtParams {
            max_iters: self.rrt_max_iters,
            step: self.rrt_step,
            goal_bias: self.rrt_goal_bias,
            rewire_radius: self.rrt_rewire_radius,
            goal_tolerance: self.rrt_goal_tolerance,
            inflation: self.rrt_inflation,
        }
    }

    pub fn timescale_params(&self) -> TimescaleParams {
        TimescaleParams {
            alpha_min: self.alpha_min,
            w_n: self.w_n,
            n_smooth: self.n_smooth,
            repeats: self.repeats,
        }
    }

    /// Check every stage's preconditions before any work starts.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::InvalidConfig(msg.to_string()));
        self.world_params().validate()?;
        self.rrt_params().validate()?;
        self.tracker_config()
            .validate()
            .map_err(SimError::from)
            .map_err(PipelineError::from)?;
        self.sim_config(0).validate()?;
        self.timescale_params()
            .validate()
            .map_err(PipelineError::from)?;
        if !(self.horizon > 0.0) {
            return bad("horizon must be positive");
        }
        if self.grid_samples < 2 {
            return bad("grid_samples must be at least 2");
        }
        if self.dedupe_tol < 0.0 {
            return bad("dedupe_tol must be non-negative");
        }
        if self.replan_attempts < 1 {
            return bad("replan_attempts must be at least 1");
        }
        if self.trials < 1 {
            return bad("trials must be at least 1");
        }
        if self.histogram_bins < 1 {
            return bad("histogram_bins must be at least 1");
        }
        Ok(())
    }

    pub fn trial_seed(&self, index: usize) -> u64 {
        self.master_seed.wrapping_add(index as u64)
    }
}

/// Random-stage selectors for [`stage_seed`].
pub const STAGE_WORLD: u64 = 0;
pub const STAGE_PLAN: u64 = 1;
pub const STAGE_SIM: u64 = 2;

/// Independent stream per (trial, stage, attempt): SplitMix64 finalizer
/// over a composed key, so stages never replay each other's draws.
pub fn stage_seed(trial_seed: u64, stage: u64, attempt: u64) -> u64 {
    let mut z = trial_seed
        ^ stage.wrapping_mul(0xA076_1D64_78BD_642F)
        ^ attempt.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Waypoints plus the grid they produced, with the replan bookkeeping.
pub struct PlannedGeometry {
    pub waypoints: Vec<Vec2>,
    pub grid: PathGrid,
    pub attempts: usize,
    pub inflation_used: f64,
}

/// Plan, dedupe, fit, and sample; when the fitted curve clips an obstacle,
/// replan with 1.5x the inflation and a fresh planning stream.
pub fn plan_geometry(
    cfg: &RunConfig,
    world: &Workspace,
    trial_seed: u64,
) -> Result<PlannedGeometry, PipelineError> {
    let mut rrt = cfg.rrt_params();
    let mut last_err: Option<PipelineError> = None;
    for attempt in 0..cfg.replan_attempts {
        let seed = stage_seed(trial_seed, STAGE_PLAN, attempt as u64);
        let waypoints = match plan(world, &rrt, seed) {
            Ok(p) => dedupe(&p, cfg.dedupe_tol),
            Err(e) => {
                // A fresh stream may find a path; inflating would only
                // make planning harder, so leave it alone here.
                last_err = Some(e.into());
                continue;
            }
        };
        let spline = fit_spline(&waypoints, cfg.horizon)?;
        match build_grid(&spline, cfg.grid_samples, world) {
            Ok(grid) => {
                return Ok(PlannedGeometry {
                    waypoints,
                    grid,
                    attempts: attempt + 1,
                    inflation_used: rrt.inflation,
                })
            }
            Err(e @ SplineError::SplineCollision { .. }) => {
                last_err = Some(e.into());
                rrt.inflation *= 1.5;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Err(last_err.expect("at least one attempt runs"))
}

/// Everything one trial produces, minus the heavyweight grid.
pub struct TrialArtifacts {
    pub index: usize,
    pub seed: u64,
    pub sim_seed: u64,
    pub attempts: usize,
    pub inflation_used: f64,
    pub world: Workspace,
    pub waypoints: Vec<Vec2>,
    pub profile_stats: ProfileStats,
    pub nominal: TrialResult,
    pub scaled: TrialResult,
    pub nominal_metrics: TrialMetrics,
    pub scaled_metrics: TrialMetrics,
}

/// One full trial: world, geometry, profile, then a nominal and a scaled
/// run sharing the workspace, path, freeze timing, and disturbance stream.
pub fn run_single_trial(cfg: &RunConfig, index: usize) -> Result<TrialArtifacts, PipelineError> {
    let seed = cfg.trial_seed(index);
    let world = Workspace::generate(&cfg.world_params(), stage_seed(seed, STAGE_WORLD, 0))?;
    let geom = plan_geometry(cfg, &world, seed)?;
    let tcfg = cfg.tracker_config();

    let sim_seed = stage_seed(seed, STAGE_SIM, 0);
    let scfg = cfg.sim_config(sim_seed);
    let (profile, _logs) = build_profile(&geom.grid, &tcfg, &scfg, &cfg.timescale_params())?;
    let stats = profile_stats(&profile);

    let ones = ScalingProfile::ones(geom.grid.len());
    let nominal = run_trial(&geom.grid, &ones.alpha, &tcfg, &scfg)?;
    let scaled = run_trial(&geom.grid, &profile.alpha, &tcfg, &scfg)?;
    let nominal_metrics = trial_metrics(&nominal)?;
    let scaled_metrics = trial_metrics(&scaled)?;

    Ok(TrialArtifacts {
        index,
        seed,
        sim_seed,
        attempts: geom.attempts,
        inflation_used: geom.inflation_used,
        world,
        waypoints: geom.waypoints,
        profile_stats: stats,
        nominal,
        scaled,
        nominal_metrics,
        scaled_metrics,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

pub struct BatchResult {
    pub completed: Vec<TrialArtifacts>,
    pub failures: Vec<TrialFailure>,
}

/// Run the whole batch in memory, in parallel, in trial order.
pub fn run_batch(cfg: &RunConfig) -> Result<BatchResult, PipelineError> {
    cfg.validate()?;
    let run_all = || -> Vec<Result<TrialArtifacts, PipelineError>> {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| run_single_trial(cfg, i))
            .collect()
    };
    let results = if cfg.threads == 0 {
        run_all()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| PipelineError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(run_all)
    };
    let mut completed = Vec::new();
    let mut failures = Vec::new();
    for (index, res) in results.into_iter().enumerate() {
        match res {
            Ok(art) => completed.push(art),
            Err(e) => failures.push(TrialFailure {
                index,
                seed: cfg.trial_seed(index),
                error: e.to_string(),
            }),
        }
    }
    if completed.is_empty() {
        let first = failures
            .first()
            .map(|f| f.error.clone())
            .unwrap_or_default();
        return Err(PipelineError::AllTrialsFailed(cfg.trials, first));
    }
    Ok(BatchResult {
        completed,
        failures,
    })
}

/// Write `bytes` to `path` through a temp file plus rename, so concurrent
/// writers and crashes never leave half a file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let io_err = |source: std::io::Error| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err)
}

fn read_file(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Sidecar written next to each trial CSV; carries the exact configuration
/// and seeds that produced it plus everything needed to rebuild the rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSidecar {
    pub config: RunConfig,
    pub trial_index: usize,
    pub seed: u64,
    pub sim_seed: u64,
    pub variant: String,
    pub plan_attempts: usize,
    pub inflation_used: f64,
    pub profile_stats: ProfileStats,
    pub meta: TrialMeta,
}

pub fn trial_file_stem(index: usize, variant: &str) -> String {
    format!("trial_{index:03}_{variant}")
}

fn sidecar_for(cfg: &RunConfig, art: &TrialArtifacts, variant: &str) -> TrialSidecar {
    // Each sidecar records the stats of the profile its own run used: the
    // all-ones profile has min = mean = 1 and no modified samples.
    let (result, profile_stats) = if variant == "nominal" {
        (
            &art.nominal,
            ProfileStats {
                min_alpha: 1.0,
                mean_alpha: 1.0,
                modified_pct: 0.0,
            },
        )
    } else {
        (&art.scaled, art.profile_stats)
    };
    TrialSidecar {
        config: cfg.clone(),
        trial_index: art.index,
        seed: art.seed,
        sim_seed: art.sim_seed,
        variant: variant.to_string(),
        plan_attempts: art.attempts,
        inflation_used: art.inflation_used,
        profile_stats,
        meta: result.meta(),
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Write one trial's artifacts: world and waypoint JSON, and per variant a
/// CSV plus a sidecar embedding config and seeds.
pub fn write_trial_files(
    cfg: &RunConfig,
    dir: &Path,
    art: &TrialArtifacts,
) -> Result<(), PipelineError> {
    let prefix = format!("trial_{:03}", art.index);
    let world_json = art.world.to_json()?;
    write_atomic(&dir.join(format!("{prefix}_world.json")), world_json.as_bytes())?;
    write_atomic(
        &dir.join(format!("{prefix}_path.json")),
        to_pretty_json(&art.waypoints).as_bytes(),
    )?;
    for (variant, result) in [("nominal", &art.nominal), ("scaled", &art.scaled)] {
        let stem = trial_file_stem(art.index, variant);
        let mut csv = Vec::new();
        result.write_csv(&mut csv).map_err(|source| PipelineError::Io {
            path: dir.join(format!("{stem}.csv")),
            source,
        })?;
        write_atomic(&dir.join(format!("{stem}.csv")), &csv)?;
        let sidecar = sidecar_for(cfg, art, variant);
        write_atomic(
            &dir.join(format!("{stem}.json")),
            to_pretty_json(&sidecar).as_bytes(),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureLog {
    pub config: RunConfig,
    pub master_seed: u64,
    pub failures: Vec<TrialFailure>,
}

/// The `trials` stage: run the batch and write every per-trial artifact
/// plus the failure log. The report stage is separate.
pub fn write_batch(cfg: &RunConfig, dir: &Path) -> Result<BatchResult, PipelineError> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let batch = run_batch(cfg)?;
    for art in &batch.completed {
        write_trial_files(cfg, dir, art)?;
    }
    let log = FailureLog {
        config: cfg.clone(),
        master_seed: cfg.master_seed,
        failures: batch.failures.clone(),
    };
    write_atomic(&dir.join("failures.json"), to_pretty_json(&log).as_bytes())?;
    Ok(batch)
}

/// Mean/std of the per-trial profile statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileAggregate {
    pub min_alpha: MeanStd,
    pub mean_alpha: MeanStd,
    pub modified_pct: MeanStd,
}

/// Machine-readable batch report; the Markdown rendering is derived from
/// this exact structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDoc {
    pub config: RunConfig,
    pub master_seed: u64,
    pub trials: usize,
    pub completed: usize,
    pub failed_indices: Vec<usize>,
    pub profile: ProfileAggregate,
    pub comparison: CompareReport,
}

fn aggregate_profile(stats: &[ProfileStats]) -> ProfileAggregate {
    let pick = |f: fn(&ProfileStats) -> f64| -> Vec<f64> { stats.iter().map(f).collect() };
    ProfileAggregate {
        min_alpha: mean_std(&pick(|s| s.min_alpha)),
        mean_alpha: mean_std(&pick(|s| s.mean_alpha)),
        modified_pct: mean_std(&pick(|s| s.modified_pct)),
    }
}

/// Rebuild the report purely from files in `dir`: a trial whose nominal CSV
/// is missing counts as failed, everything else must load cleanly. Because
/// the CSV floats round-trip exactly, this reproduces the in-memory
/// metrics bit for bit.
pub fn report_from_dir(cfg: &RunConfig, dir: &Path) -> Result<ReportDoc, PipelineError> {
    cfg.validate()?;
    let mut nominal_ms = Vec::new();
    let mut scaled_ms = Vec::new();
    let mut profile_stats = Vec::new();
    let mut failed_indices = Vec::new();
    for index in 0..cfg.trials {
        let nominal_csv = dir.join(format!("{}.csv", trial_file_stem(index, "nominal")));
        if !nominal_csv.exists() {
            failed_indices.push(index);
            continue;
        }
        let mut per_variant = Vec::new();
        for variant in ["nominal", "scaled"] {
            let stem = trial_file_stem(index, variant);
            let sidecar_path = dir.join(format!("{stem}.json"));
            let sidecar: TrialSidecar =
                serde_json::from_str(&read_file(&sidecar_path)?).map_err(|e| {
                    PipelineError::Malformed {
                        path: sidecar_path.clone(),
                        reason: e.to_string(),
                    }
                })?;
            let csv_path = dir.join(format!("{stem}.csv"));
            let result = TrialResult::read_csv(&sidecar.meta, &read_file(&csv_path)?)
                .map_err(|e| PipelineError::Malformed {
                    path: csv_path,
                    reason: e.to_string(),
                })?;
            per_variant.push((sidecar, result));
        }
        let (scaled_sidecar, scaled_result) = per_variant.pop().expect("two variants");
        let (_, nominal_result) = per_variant.pop().expect("two variants");
        nominal_ms.push(trial_metrics(&nominal_result)?);
        scaled_ms.push(trial_metrics(&scaled_result)?);
        profile_stats.push(scaled_sidecar.profile_stats);
    }
    if nominal_ms.is_empty() {
        return Err(PipelineError::AllTrialsFailed(
            cfg.trials,
            "no trial artifacts found".to_string(),
        ));
    }
    let comparison = compare(
        aggregate(&nominal_ms),
        aggregate(&scaled_ms),
        cfg.histogram_bins,
    );
    Ok(ReportDoc {
        config: cfg.clone(),
        master_seed: cfg.master_seed,
        trials: cfg.trials,
        completed: nominal_ms.len(),
        failed_indices,
        profile: aggregate_profile(&profile_stats),
        comparison,
    })
}

impl ReportDoc {
    pub fn render_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("# Batch report\n\n");
        s.push_str(&format!(
            "- master seed: {}\n- trials: {} requested, {} completed, {} failed\n- control period: {} s, horizon: {} s, grid samples: {}\n\n",
            self.master_seed,
            self.trials,
            self.completed,
            self.failed_indices.len(),
            self.config.t_s,
            self.config.horizon,
            self.config.grid_samples,
        ));
        s.push_str("## Speed profile\n\n");
        s.push_str("| Statistic | Mean ± std across trials |\n|---|---|\n");
        let p = &self.profile;
        s.push_str(&format!(
            "| Mean alpha | {:.4} ± {:.4} |\n",
            p.mean_alpha.mean, p.mean_alpha.std
        ));
        s.push_str(&format!(
            "| Min alpha | {:.4} ± {:.4} |\n",
            p.min_alpha.mean, p.min_alpha.std
        ));
        s.push_str(&format!(
            "| Modified samples (%) | {:.2} ± {:.2} |\n\n",
            p.modified_pct.mean, p.modified_pct.std
        ));
        s.push_str("## Nominal vs scaled, moving interval\n\n");
        s.push_str(&self.comparison.render_markdown());
        if !self.failed_indices.is_empty() {
            s.push_str(&format!(
                "\nFailed trial indices: {:?}\n",
                self.failed_indices
            ));
        }
        s
    }
}

/// Write `report.json`, `report.md`, and `histogram.csv` into `dir`.
pub fn write_report(doc: &ReportDoc, dir: &Path) -> Result<(), PipelineError> {
    write_atomic(&dir.join("report.json"), to_pretty_json(doc).as_bytes())?;
    write_atomic(&dir.join("report.md"), doc.render_markdown().as_bytes())?;
    let mut csv = Vec::new();
    doc.comparison
        .histogram
        .write_csv(&mut csv)
        .map_err(|source| PipelineError::Io {
            path: dir.join("histogram.csv"),
            source,
        })?;
    write_atomic(&dir.join("histogram.csv"), &csv)?;
    Ok(())
}

/// The full pipeline: trial batch to disk, then the report rebuilt from
/// those files — so every run exercises the artifact round-trip.
pub fn run_pipeline(cfg: &RunConfig, dir: &Path) -> Result<ReportDoc, PipelineError> {
    write_batch(cfg, dir)?;
    let doc = report_from_dir(cfg, dir)?;
    write_report(&doc, dir)?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Shrunk batch that still runs the whole machine in a few seconds.
    fn small_cfg() -> RunConfig {
        RunConfig {
            trials: 2,
            grid_samples: 20_000,
            rrt_max_iters: 1200,
            n_smooth: 51,
            master_seed: 42,
            ..RunConfig::default()
        }
    }

    #[test]
    fn stage_seeds_are_distinct_streams() {
        let s = 7;
        let mut seen = std::collections::HashSet::new();
        for stage in [STAGE_WORLD, STAGE_PLAN, STAGE_SIM] {
            for attempt in 0..3 {
                assert!(seen.insert(stage_seed(s, stage, attempt)));
            }
        }
        assert_eq!(stage_seed(s, STAGE_PLAN, 1), stage_seed(s, STAGE_PLAN, 1));
        assert_ne!(stage_seed(s, STAGE_PLAN, 0), stage_seed(s + 1, STAGE_PLAN, 0));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        assert!(RunConfig::default().validate().is_ok());
        for (name, cfg) in [
            (
                "trials",
                RunConfig {
                    trials: 0,
                    ..RunConfig::default()
                },
            ),
            (
                "grid",
                RunConfig {
                    grid_samples: 1,
                    ..RunConfig::default()
                },
            ),
            (
                "margin",
                RunConfig {
                    a_max: 0.1,
                    ..RunConfig::default()
                },
            ),
            (
                "smooth",
                RunConfig {
                    n_smooth: 2,
                    ..RunConfig::default()
                },
            ),
        ] {
            assert!(cfg.validate().is_err(), "{name} should fail");
        }
    }

    #[test]
    fn single_trial_produces_consistent_artifacts() {
        let cfg = small_cfg();
        let art = run_single_trial(&cfg, 0).unwrap();
        assert_eq!(art.seed, cfg.trial_seed(0));
        assert_eq!(art.world.obstacles.len(), cfg.n_obstacles);
        assert_eq!(art.waypoints.first(), Some(&cfg.start));
        assert_eq!(art.waypoints.last(), Some(&cfg.goal));
        assert!(art.profile_stats.min_alpha >= cfg.alpha_min);
        // Same noise stream and freeze timing for both variants.
        assert_eq!(art.nominal.seed, art.scaled.seed);
        assert!(art.nominal.len() > 0 && art.scaled.len() > 0);
    }

    #[test]
    fn trials_are_independent_of_batch_context() {
        let cfg = small_cfg();
        let batch = run_batch(&cfg).unwrap();
        assert_eq!(batch.completed.len() + batch.failures.len(), cfg.trials);
        for art in &batch.completed {
            let solo = run_single_trial(&cfg, art.index).unwrap();
            assert_eq!(solo.nominal.p, art.nominal.p);
            assert_eq!(solo.scaled.u, art.scaled.u);
            assert_eq!(solo.world.obstacles.len(), art.world.obstacles.len());
        }
    }

    #[test]
    fn pipeline_outputs_are_byte_identical_across_runs() {
        let cfg = small_cfg();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        run_pipeline(&cfg, dir_a.path()).unwrap();
        run_pipeline(&cfg, dir_b.path()).unwrap();
        let mut names: Vec<String> = fs::read_dir(dir_a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert!(names.contains(&"report.json".to_string()));
        assert!(names.contains(&"report.md".to_string()));
        assert!(names.contains(&"histogram.csv".to_string()));
        assert!(names.contains(&"failures.json".to_string()));
        for name in &names {
            let a = fs::read(dir_a.path().join(name)).unwrap();
            let b = fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "file {name} differs between identical runs");
        }
    }

    #[test]
    fn report_from_dir_matches_in_memory_metrics() {
        let cfg = small_cfg();
        let dir = tempfile::tempdir().unwrap();
        let batch = write_batch(&cfg, dir.path()).unwrap();
        let doc = report_from_dir(&cfg, dir.path()).unwrap();
        assert_eq!(doc.completed, batch.completed.len());
        let in_memory: Vec<TrialMetrics> =
            batch.completed.iter().map(|a| a.nominal_metrics).collect();
        let agg = aggregate(&in_memory);
        assert_eq!(doc.comparison.nominal, agg);
    }

    #[test]
    fn missing_trials_count_as_failures_in_report() {
        let cfg = small_cfg();
        let dir = tempfile::tempdir().unwrap();
        write_batch(&cfg, dir.path()).unwrap();
        // Remove trial 1 entirely; the report should degrade gracefully.
        for variant in ["nominal", "scaled"] {
            let stem = trial_file_stem(1, variant);
            let _ = fs::remove_file(dir.path().join(format!("{stem}.csv")));
            let _ = fs::remove_file(dir.path().join(format!("{stem}.json")));
        }
        let doc = report_from_dir(&cfg, dir.path()).unwrap();
        assert_eq!(doc.failed_indices, vec![1]);
        assert_eq!(doc.completed, cfg.trials - 1);
        let md = doc.render_markdown();
        assert!(md.contains("Failed trial indices"));
    }

    #[test]
    fn empty_dir_report_is_all_trials_failed() {
        let cfg = small_cfg();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            report_from_dir(&cfg, dir.path()),
            Err(PipelineError::AllTrialsFailed(..))
        ));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1, "no temp left");
    }

    #[test]
    fn toml_config_roundtrip_with_defaults() {
        // Partial configs fill from defaults; unknown keys are rejected
        // at the CLI layer via serde's deny_unknown_fields.
        let cfg: RunConfig = serde_json::from_str(r#"{"trials": 3, "master_seed": 9}"#).unwrap();
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.t_s, RunConfig::default().t_s);
        assert!(serde_json::from_str::<RunConfig>(r#"{"no_such_key": 1}"#).is_err());
    }
}
