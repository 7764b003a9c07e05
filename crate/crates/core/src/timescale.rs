//! Offline speed profiles from a recorded nominal run.
//!
//! A nominal (unit-speed, noise-free, uninterrupted) closed-loop run logs
//! the reachability margin, the demanded acceleration, and the arc-length
//! location of the look-ahead target at every control sample. Wherever the
//! margin came out positive the profile is pulled down by the square-root
//! ratio rule
//!
//! `alpha_new = sqrt(a_avail / u_req)`,
//!
//! applied with a min-assignment to every grid sample within `w_n` of the
//! violating arc-length location, clamped to `alpha_min`, and finally
//! smoothed by a truncated centered moving average. The demanded
//! acceleration of an on-path tracker scales as the square of the timing
//! rate, so this choice targets `u_req = a_avail` at the violating spot.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulator::{run_trial, SimConfig, SimError, TrialStatus};
use crate::spline::PathGrid;
use crate::tracker::TrackerConfig;
use crate::vec2::Vec2;

/// A profile value below `1 - MODIFIED_TOL` counts as modified.
pub const MODIFIED_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TimescaleError {
    #[error("invalid timescale parameter: {0}")]
    InvalidParams(String),
    #[error("nominal recording run did not reach the goal within {steps} steps")]
    BaselineDiverged { steps: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimescaleParams {
    /// Lower clamp for the profile.
    pub alpha_min: f64,
    /// Arc-length half-width of each local update (meters).
    pub w_n: f64,
    /// Moving-average window in grid samples; odd.
    pub n_smooth: usize,
    /// Number of record/update rounds; 1 is the standard offline pass.
    pub repeats: usize,
}

impl Default for TimescaleParams {
    fn default() -> Self {
        TimescaleParams {
            alpha_min: 0.1,
            w_n: 0.02,
            n_smooth: 201,
            repeats: 1,
        }
    }
}

impl TimescaleParams {
    pub fn validate(&self) -> Result<(), TimescaleError> {
        let bad = |msg: &str| Err(TimescaleError::InvalidParams(msg.to_string()));
        if !(self.alpha_min > 0.0 && self.alpha_min <= 1.0) {
            return bad("alpha_min must lie in (0, 1]");
        }
        if self.w_n < 0.0 {
            return bad("w_n must be non-negative");
        }
        if self.n_smooth == 0 || self.n_smooth % 2 == 0 {
            return bad("n_smooth must be odd and positive");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        Ok(())
    }
}

/// One control sample of the recording run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub step: usize,
    pub delta: f64,
    pub u_req: f64,
    /// Arc length of the look-ahead target, the location the update slows.
    pub s_la: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineLog {
    pub records: Vec<BaselineRecord>,
}

impl BaselineLog {
    pub fn violating(&self) -> impl Iterator<Item = &BaselineRecord> {
        self.records.iter().filter(|r| r.delta > 0.0)
    }
}

/// Per-grid-sample timing rate, one value per [`PathGrid`] sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingProfile {
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileStats {
    pub min_alpha: f64,
    pub mean_alpha: f64,
    /// Percentage of grid samples pulled below one.
    pub modified_pct: f64,
}

impl ScalingProfile {
    pub fn ones(m: usize) -> ScalingProfile {
        ScalingProfile {
            alpha: vec![1.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Write `tau,alpha` rows aligned with the grid.
    pub fn write_csv<W: std::io::Write>(&self, g: &PathGrid, mut out: W) -> std::io::Result<()> {
        assert_eq!(self.len(), g.len(), "profile must cover the grid");
        writeln!(out, "tau,alpha")?;
        for j in 0..self.len() {
            writeln!(out, "{},{}", g.tau[j], self.alpha[j])?;
        }
        Ok(())
    }
}

/// Record the unit-speed nominal run: no freeze, zero realized noise. The
/// tracker still budgets for disturbances through its margin offset.
pub fn record_baseline(
    g: &PathGrid,
    tcfg: &TrackerConfig,
    scfg: &SimConfig,
) -> Result<BaselineLog, TimescaleError> {
    record_profiled(g, &vec![1.0; g.len()], tcfg, scfg)
}

/// Same recording protocol under an arbitrary profile; used for the
/// repeated refinement rounds and for before/after comparisons.
pub fn record_profiled(
    g: &PathGrid,
    alpha: &[f64],
    tcfg: &TrackerConfig,
    scfg: &SimConfig,
) -> Result<BaselineLog, TimescaleError> {
    let mut quiet = *scfg;
    quiet.eps_p = 0.0;
    quiet.eps_v = 0.0;
    quiet.freeze_duration = 0.0;
    let trial = run_trial(g, alpha, tcfg, &quiet)?;
    if trial.status == TrialStatus::Timeout {
        return Err(TimescaleError::BaselineDiverged { steps: trial.len() });
    }
    let records = trial
        .diag
        .iter()
        .enumerate()
        .map(|(step, d)| BaselineRecord {
            step,
            delta: d.delta,
            u_req: d.u_req,
            s_la: g.arclen_at(d.tau_la),
        })
        .collect();
    Ok(BaselineLog { records })
}

/// Grid index range with `|arclen[j] - s| <= w_n`.
fn arc_window(g: &PathGrid, s: f64, w_n: f64) -> std::ops::Range<usize> {
    let lo = g.arclen.partition_point(|&a| a < s - w_n);
    let hi = g.arclen.partition_point(|&a| a <= s + w_n);
    lo..hi
}

/// Min-assign the square-root-ratio candidate of every violating record
/// into its arc-length neighborhood, then clamp to `alpha_min`. Candidates
/// depend only on the log, so the operation is idempotent.
pub fn apply_local_updates(
    log: &BaselineLog,
    g: &PathGrid,
    mut profile: ScalingProfile,
    a_avail: f64,
    params: &TimescaleParams,
) -> ScalingProfile {
    assert_eq!(profile.len(), g.len(), "profile must cover the grid");
    for rec in log.violating() {
        let candidate = (a_avail / rec.u_req).sqrt();
        for j in arc_window(g, rec.s_la, params.w_n) {
            if candidate < profile.alpha[j] {
                profile.alpha[j] = candidate;
            }
        }
    }
    for a in &mut profile.alpha {
        *a = a.max(params.alpha_min);
    }
    profile
}

/// Refinement variant for repeat rounds: the candidate is the current
/// profile value at the record's location times the square-root ratio, so
/// a round under an already-scaled profile keeps contracting the demand.
pub fn refine_local_updates(
    log: &BaselineLog,
    g: &PathGrid,
    mut profile: ScalingProfile,
    a_avail: f64,
    params: &TimescaleParams,
) -> ScalingProfile {
    assert_eq!(profile.len(), g.len(), "profile must cover the grid");
    let snapshot = profile.alpha.clone();
    for rec in log.violating() {
        let here = snapshot[g.nearest_index(g.tau_at_arclen(rec.s_la))];
        let candidate = here * (a_avail / rec.u_req).sqrt();
        for j in arc_window(g, rec.s_la, params.w_n) {
            if candidate < profile.alpha[j] {
                profile.alpha[j] = candidate;
            }
        }
    }
    for a in &mut profile.alpha {
        *a = a.max(params.alpha_min);
    }
    profile
}

/// Truncated centered moving average over `n_smooth` samples, re-clamped to
/// `[alpha_min, 1]`.
pub fn smooth_profile(
    profile: ScalingProfile,
    n_smooth: usize,
    alpha_min: f64,
) -> ScalingProfile {
    let m = profile.len();
    let h = n_smooth / 2;
    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(0.0);
    for &a in &profile.alpha {
        prefix.push(prefix.last().unwrap() + a);
    }
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let lo = j.saturating_sub(h);
        let hi = (j + h + 1).min(m);
        let mean = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
        out.push(mean.clamp(alpha_min, 1.0));
    }
    ScalingProfile { alpha: out }
}

/// Reference velocity per grid sample under the profile: `alpha_j * dp_j`.
pub fn scaled_reference(g: &PathGrid, profile: &ScalingProfile) -> Vec<Vec2> {
    assert_eq!(profile.len(), g.len(), "profile must cover the grid");
    g.dp
        .iter()
        .zip(&profile.alpha)
        .map(|(&dp, &a)| dp * a)
        .collect()
}

pub fn profile_stats(profile: &ScalingProfile) -> ProfileStats {
    let m = profile.len();
    let min_alpha = profile.alpha.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_alpha = profile.alpha.iter().sum::<f64>() / m as f64;
    let modified = profile
        .alpha
        .iter()
        .filter(|&&a| a < 1.0 - MODIFIED_TOL)
        .count();
    ProfileStats {
        min_alpha,
        mean_alpha,
        modified_pct: 100.0 * modified as f64 / m as f64,
    }
}

/// Record, update, clamp, and smooth; `repeats > 1` re-records under the
/// current profile and contracts it further. Returns the final profile and
/// the log of every recording round.
pub fn build_profile(
    g: &PathGrid,
    tcfg: &TrackerConfig,
    scfg: &SimConfig,
    params: &TimescaleParams,
) -> Result<(ScalingProfile, Vec<BaselineLog>), TimescaleError> {
    params.validate()?;
    tcfg.validate().map_err(SimError::from)?;
    let a_avail = tcfg.a_avail();
    let mut profile = ScalingProfile::ones(g.len());
    let mut logs = Vec::new();
    for round in 0..params.repeats {
        let log = record_profiled(g, &profile.alpha, tcfg, scfg)?;
        profile = if round == 0 {
            apply_local_updates(&log, g, profile, a_avail, params)
        } else {
            refine_local_updates(&log, g, profile, a_avail, params)
        };
        profile = smooth_profile(profile, params.n_smooth, params.alpha_min);
        logs.push(log);
    }
    Ok((profile, logs))
}
