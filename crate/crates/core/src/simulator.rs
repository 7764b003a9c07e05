//! Sampled closed-loop trials with bounded disturbances and a freeze/resume
//! interruption.
//!
//! Dynamics are the forward-Euler double integrator
//!
//! `v' = v + (u + n_v) t_s`,
//! `p' = p + (v + n_p) t_s + (u + n_v) t_s^2 / 2`,
//!
//! with `n_p`, `n_v` drawn uniformly from discs of radius `eps_p`, `eps_v`.
//! A trial optionally freezes the robot for a window of whole control
//! periods: position holds, velocity and input read zero, no randomness is
//! consumed, but the timing clock keeps advancing, which is exactly the
//! situation the offline speed profile has to survive. After the window the
//! tracker re-projects globally.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spline::PathGrid;
use crate::tracker::{control_step, Branch, StepDiagnostics, TrackerConfig, TrackerState};
use crate::vec2::Vec2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Tracker(#[from] crate::tracker::TrackerError),
    #[error("malformed trial CSV: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub max_steps: usize,
    /// Arrival radius around the goal.
    pub goal_tol: f64,
    /// Freeze window start, seconds; quantized to whole control periods.
    pub freeze_start: f64,
    /// Freeze window length, seconds; zero disables the freeze.
    pub freeze_duration: f64,
    /// Realized position-disturbance bound (m/s).
    pub eps_p: f64,
    /// Realized acceleration-disturbance bound (m/s^2).
    pub eps_v: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            max_steps: 3200,
            goal_tol: 0.01,
            freeze_start: 0.8,
            freeze_duration: 0.5,
            eps_p: 0.00125,
            eps_v: 0.1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::InvalidParams(msg.to_string()));
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        if !(self.goal_tol > 0.0) {
            return bad("goal_tol must be positive");
        }
        if self.freeze_start < 0.0 || self.freeze_duration < 0.0 {
            return bad("freeze window must be non-negative");
        }
        if self.eps_p < 0.0 || self.eps_v < 0.0 {
            return bad("disturbance bounds must be non-negative");
        }
        Ok(())
    }

    /// Freeze window as whole control-period indices `[first, first + len)`.
    pub fn freeze_indices(&self, t_s: f64) -> (usize, usize) {
        let first = (self.freeze_start / t_s).round() as usize;
        let len = (self.freeze_duration / t_s).round() as usize;
        (first, len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    /// Timing clock ran out and the robot settled inside the goal radius.
    Reached,
    /// Step budget exhausted first.
    Timeout,
}

/// The scalar header of a [`TrialResult`]; written as the trial's JSON
/// sidecar so the CSV rows can be rebuilt into a full result.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrialMeta {
    pub t_s: f64,
    pub tau_end: f64,
    pub goal: Vec2,
    pub goal_tol: f64,
    pub seed: u64,
    pub status: TrialStatus,
}

/// Per-sample record of one closed-loop run.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub t_s: f64,
    pub tau_end: f64,
    pub goal: Vec2,
    pub goal_tol: f64,
    pub seed: u64,
    pub status: TrialStatus,
    pub t: Vec<f64>,
    pub frozen: Vec<bool>,
    pub p: Vec<Vec2>,
    pub v: Vec<Vec2>,
    pub u: Vec<Vec2>,
    pub tau_clock: Vec<f64>,
    pub diag: Vec<StepDiagnostics>,
}

pub const TRIAL_CSV_HEADER: &str =
    "k,t,frozen,px,py,vx,vy,ux,uy,tau_clock,tau_c,tau_la,u_req,delta,branch,clipped";

impl TrialResult {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn meta(&self) -> TrialMeta {
        TrialMeta {
            t_s: self.t_s,
            tau_end: self.tau_end,
            goal: self.goal,
            goal_tol: self.goal_tol,
            seed: self.seed,
            status: self.status,
        }
    }

    /// Rebuild a result from its CSV rows plus sidecar metadata. Columns
    /// the CSV does not carry (look-ahead point, mismatch, applied input
    /// vector) are zero-filled; re-serializing reproduces the input bytes.
    pub fn read_csv(meta: &TrialMeta, text: &str) -> Result<TrialResult, SimError> {
        let malformed = |line: usize, what: &str| SimError::Parse(format!("line {line}: {what}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == TRIAL_CSV_HEADER => {}
            _ => return Err(SimError::Parse("missing or wrong header".into())),
        }
        let mut r = TrialResult {
            t_s: meta.t_s,
            tau_end: meta.tau_end,
            goal: meta.goal,
            goal_tol: meta.goal_tol,
            seed: meta.seed,
            status: meta.status,
            t: Vec::new(),
            frozen: Vec::new(),
            p: Vec::new(),
            v: Vec::new(),
            u: Vec::new(),
            tau_clock: Vec::new(),
            diag: Vec::new(),
        };
        for (n, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 16 {
                return Err(malformed(n + 1, "expected 16 fields"));
            }
            let num = |i: usize| -> Result<f64, SimError> {
                fields[i]
                    .parse::<f64>()
                    .map_err(|_| malformed(n + 1, "bad number"))
            };
            let flag = |i: usize| -> Result<bool, SimError> {
                fields[i]
                    .parse::<bool>()
                    .map_err(|_| malformed(n + 1, "bad flag"))
            };
            let frozen = flag(2)?;
            let branch = match fields[14] {
                "feasible" => Branch::Feasible,
                "qp" => Branch::Qp,
                "frozen" if frozen => Branch::Feasible,
                _ => return Err(malformed(n + 1, "bad branch tag")),
            };
            let u = Vec2::new(num(7)?, num(8)?);
            r.t.push(num(1)?);
            r.frozen.push(frozen);
            r.p.push(Vec2::new(num(3)?, num(4)?));
            r.v.push(Vec2::new(num(5)?, num(6)?));
            r.u.push(u);
            r.tau_clock.push(num(9)?);
            r.diag.push(StepDiagnostics {
                tau_c: num(10)?,
                tau_la: num(11)?,
                p_la: Vec2::ZERO,
                u_req: num(12)?,
                delta: num(13)?,
                mismatch: 0.0,
                u_applied: u,
                clipped: flag(15)?,
                branch,
            });
        }
        Ok(r)
    }

    /// Write `k,t,frozen,px,py,vx,vy,ux,uy,tau_clock,tau_c,tau_la,u_req,delta,branch,clipped`
    /// rows. Frozen rows keep their diagnostics but are tagged `frozen` in
    /// the branch column.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRIAL_CSV_HEADER}")?;
        for k in 0..self.len() {
            let d = &self.diag[k];
            let branch = if self.frozen[k] { "frozen" } else { d.branch.as_str() };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                k,
                self.t[k],
                self.frozen[k],
                self.p[k].x,
                self.p[k].y,
                self.v[k].x,
                self.v[k].y,
                self.u[k].x,
                self.u[k].y,
                self.tau_clock[k],
                d.tau_c,
                d.tau_la,
                d.u_req,
                d.delta,
                branch,
                d.clipped
            )?;
        }
        Ok(())
    }
}

/// Forward-Euler double-integrator step under additive disturbances.
pub fn step_dynamics(p: Vec2, v: Vec2, u: Vec2, n_p: Vec2, n_v: Vec2, t_s: f64) -> (Vec2, Vec2) {
    let a = u + n_v;
    let v_next = v + a * t_s;
    let p_next = p + (v + n_p) * t_s + a * (0.5 * t_s * t_s);
    (p_next, v_next)
}

/// Uniform draw from the closed disc of radius `bound`: uniform angle,
/// radius `bound * sqrt(U)`. Always consumes two draws so the stream shape
/// does not depend on the bound. Mean norm is `2/3 * bound`.
pub fn sample_disturbance<R: Rng>(rng: &mut R, bound: f64) -> Vec2 {
    let angle = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let radius = bound * rng.random::<f64>().sqrt();
    Vec2::new(radius * angle.cos(), radius * angle.sin())
}

/// Timing-clock update `tau' = min(tau_end, tau + alpha t_s)`.
pub fn advance_tau(tau: f64, alpha: f64, t_s: f64, tau_end: f64) -> f64 {
    (tau + alpha * t_s).min(tau_end)
}

/// Run one closed-loop trial of the tracker over `g` with the per-sample
/// speed profile `alpha`. Terminates as soon as the clock has reached the
/// path end and the robot sits inside the goal radius; otherwise runs to
/// the step budget and reports a timeout.
pub fn run_trial(
    g: &PathGrid,
    alpha: &[f64],
    tcfg: &TrackerConfig,
    scfg: &SimConfig,
) -> Result<TrialResult, SimError> {
    tcfg.validate()?;
    scfg.validate()?;
    assert_eq!(alpha.len(), g.len(), "profile must cover the grid");

    let tau_end = g.tau_end();
    let goal = *g.p.last().expect("grid is non-empty");
    let (freeze_first, freeze_len) = scfg.freeze_indices(tcfg.t_s);

    let mut rng = ChaCha8Rng::seed_from_u64(scfg.seed);
    let mut state = TrackerState::new(g.p[0], tcfg);
    let mut out = TrialResult {
        t_s: tcfg.t_s,
        tau_end,
        goal,
        goal_tol: scfg.goal_tol,
        seed: scfg.seed,
        status: TrialStatus::Timeout,
        t: Vec::new(),
        frozen: Vec::new(),
        p: Vec::new(),
        v: Vec::new(),
        u: Vec::new(),
        tau_clock: Vec::new(),
        diag: Vec::new(),
    };

    for k in 0..scfg.max_steps {
        if state.tau_clock >= tau_end && state.p.dist(goal) <= scfg.goal_tol {
            out.status = TrialStatus::Reached;
            break;
        }
        let frozen = freeze_len > 0 && (freeze_first..freeze_first + freeze_len).contains(&k);
        if frozen && k == freeze_first {
            state.v = Vec2::ZERO;
        }
        if freeze_len > 0 && k == freeze_first + freeze_len {
            // Resume: force a global re-projection.
            state.closest_hint = None;
        }

        // Diagnostics are always computed, even while frozen; only the
        // application of the command differs.
        let (u_cmd, diag) = control_step(&mut state, g, alpha, tcfg);
        let u = if frozen { Vec2::ZERO } else { u_cmd };

        out.t.push(k as f64 * tcfg.t_s);
        out.frozen.push(frozen);
        out.p.push(state.p);
        out.v.push(state.v);
        out.u.push(u);
        out.tau_clock.push(state.tau_clock);
        out.diag.push(diag);

        if !frozen {
            let n_p = sample_disturbance(&mut rng, scfg.eps_p);
            let n_v = sample_disturbance(&mut rng, scfg.eps_v);
            let (p_next, v_next) = step_dynamics(state.p, state.v, u, n_p, n_v, tcfg.t_s);
            state.p = p_next;
            state.v = v_next;
        }

        let tau_dot = alpha[g.nearest_index(state.tau_clock)];
        state.tau_clock = advance_tau(state.tau_clock, tau_dot, tcfg.t_s, tau_end);
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_grid(len: f64, m: usize) -> PathGrid {
        PathGrid::from_curve(m, 2.0, |tau| {
            (
                Vec2::new(len * tau / 2.0, 0.0),
                Vec2::new(len / 2.0, 0.0),
                Vec2::ZERO,
            )
        })
        .unwrap()
    }

    fn quiet_cfg() -> (TrackerConfig, SimConfig) {
        let tcfg = TrackerConfig::default();
        let scfg = SimConfig {
            seed: 5,
            freeze_duration: 0.0,
            eps_p: 0.0,
            eps_v: 0.0,
            ..SimConfig::default()
        };
        (tcfg, scfg)
    }

    #[test]
    fn step_dynamics_hand_case() {
        let (p, v) = step_dynamics(
            Vec2::new(1.0, 2.0),
            Vec2::new(0.5, -0.5),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.01, 0.0),
            Vec2::new(0.0, -0.1),
            0.1,
        );
        assert!((v.x - 0.7).abs() <= 1e-15);
        assert!((v.y - -0.51).abs() <= 1e-15);
        assert!((p.x - 1.061).abs() <= 1e-15);
        assert!((p.y - 1.9495).abs() <= 1e-15);
    }

    #[test]
    fn disturbance_stays_in_disc_with_two_thirds_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let bound = 0.3;
        let n = 100_000;
        let mut sum = 0.0;
        let mut quadrants = [0usize; 4];
        for _ in 0..n {
            let d = sample_disturbance(&mut rng, bound);
            let norm = d.norm();
            assert!(norm <= bound);
            sum += norm;
            let q = match (d.x >= 0.0, d.y >= 0.0) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            };
            quadrants[q] += 1;
        }
        let mean = sum / n as f64;
        let expected = 2.0 / 3.0 * bound;
        assert!(
            (mean - expected).abs() <= 0.02 * expected,
            "mean {mean} vs {expected}"
        );
        for &q in &quadrants {
            let frac = q as f64 / n as f64;
            assert!((frac - 0.25).abs() <= 0.0125, "quadrant fraction {frac}");
        }
    }

    #[test]
    fn zero_bound_draws_are_zero_but_consume_stream() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(sample_disturbance(&mut a, 0.0), Vec2::ZERO);
        let _ = (b.random::<f64>(), b.random::<f64>());
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn advance_tau_clamps_at_end() {
        assert_eq!(advance_tau(1.999, 1.0, 0.0125, 2.0), 2.0);
        assert_eq!(advance_tau(2.0, 1.0, 0.0125, 2.0), 2.0);
        let tau = advance_tau(0.5, 0.8, 0.0125, 2.0);
        assert!((tau - 0.51).abs() <= 1e-15);
    }

    #[test]
    fn slow_line_trial_reaches_goal_without_violations() {
        // Short line at a crawl: the one-step demand fits the authority
        // everywhere except possibly the very first samples.
        let g = line_grid(0.01, 5000);
        let (tcfg, scfg) = quiet_cfg();
        let alpha = vec![1.0; g.len()];
        let r = run_trial(&g, &alpha, &tcfg, &scfg).unwrap();
        assert_eq!(r.status, TrialStatus::Reached);
        assert!(r.p.last().unwrap().dist(r.goal) <= scfg.goal_tol);
        for k in 10..r.len() {
            assert!(
                r.diag[k].delta <= 0.0,
                "delta {} at sample {k}",
                r.diag[k].delta
            );
        }
        // Nominal timing: the clock needs horizon / t_s = 160 samples.
        assert!(r.len() >= 160, "only {} samples", r.len());
    }

    #[test]
    fn dynamics_match_model_exactly_without_noise() {
        let g = line_grid(0.01, 5000);
        let (tcfg, scfg) = quiet_cfg();
        let alpha = vec![1.0; g.len()];
        let r = run_trial(&g, &alpha, &tcfg, &scfg).unwrap();
        for k in 0..r.len() - 1 {
            let (p_pred, v_pred) = step_dynamics(
                r.p[k],
                r.v[k],
                r.u[k],
                Vec2::ZERO,
                Vec2::ZERO,
                tcfg.t_s,
            );
            assert!(p_pred.dist(r.p[k + 1]) <= 1e-15);
            assert!(v_pred.dist(r.v[k + 1]) <= 1e-15);
        }
    }

    #[test]
    fn freeze_window_invariants() {
        let g = line_grid(0.01, 5000);
        let tcfg = TrackerConfig::default();
        let scfg = SimConfig {
            seed: 11,
            freeze_start: 0.5,
            freeze_duration: 0.25,
            ..SimConfig::default()
        };
        let r = run_trial(&g, &vec![1.0; g.len()], &tcfg, &scfg).unwrap();
        assert_eq!(r.status, TrialStatus::Reached);
        let frozen_count = r.frozen.iter().filter(|&&f| f).count();
        assert_eq!(frozen_count, 20); // 0.25 s at 80 Hz
        let first = (0.5 / tcfg.t_s).round() as usize;
        for k in 0..r.len() {
            let expect = (first..first + 20).contains(&k);
            assert_eq!(r.frozen[k], expect, "frozen flag at {k}");
            if r.frozen[k] {
                assert_eq!(r.u[k], Vec2::ZERO);
                assert_eq!(r.v[k], Vec2::ZERO);
                assert_eq!(r.p[k], r.p[first]);
            }
        }
        // The clock never stops while the path end is ahead.
        for k in 1..r.len() {
            assert!(r.tau_clock[k] >= r.tau_clock[k - 1]);
            if r.tau_clock[k - 1] < r.tau_end {
                assert!(r.tau_clock[k] > r.tau_clock[k - 1]);
            }
        }
    }

    #[test]
    fn zero_length_freeze_equals_no_freeze() {
        let g = line_grid(0.01, 5000);
        let tcfg = TrackerConfig::default();
        let noisy = SimConfig {
            seed: 42,
            freeze_duration: 0.0,
            ..SimConfig::default()
        };
        let mut shifted = noisy;
        shifted.freeze_start = 1.3; // irrelevant with zero duration
        let a = run_trial(&g, &vec![1.0; g.len()], &tcfg, &noisy).unwrap();
        let b = run_trial(&g, &vec![1.0; g.len()], &tcfg, &shifted).unwrap();
        assert_eq!(a.p, b.p);
        assert_eq!(a.v, b.v);
        assert_eq!(a.u, b.u);
    }

    #[test]
    fn trials_are_deterministic_per_seed() {
        let g = line_grid(0.01, 5000);
        let tcfg = TrackerConfig::default();
        let scfg = SimConfig {
            seed: 9,
            ..SimConfig::default()
        };
        let a = run_trial(&g, &vec![1.0; g.len()], &tcfg, &scfg).unwrap();
        let b = run_trial(&g, &vec![1.0; g.len()], &tcfg, &scfg).unwrap();
        assert_eq!(a.p, b.p);
        assert_eq!(a.u, b.u);
        let mut other = scfg;
        other.seed = 10;
        let c = run_trial(&g, &vec![1.0; g.len()], &tcfg, &other).unwrap();
        assert_ne!(a.p, c.p);
    }

    #[test]
    fn step_budget_timeout() {
        let g = line_grid(0.01, 5000);
        let (tcfg, mut scfg) = quiet_cfg();
        scfg.max_steps = 5;
        let r = run_trial(&g, &vec![1.0; g.len()], &tcfg, &scfg).unwrap();
        assert_eq!(r.status, TrialStatus::Timeout);
        assert_eq!(r.len(), 5);
    }

    #[test]
    fn csv_layout_and_frozen_rows() {
        let g = line_grid(0.01, 5000);
        let tcfg = TrackerConfig::default();
        let scfg = SimConfig {
            seed: 2,
            freeze_start: 0.25,
            freeze_duration: 0.125,
            ..SimConfig::default()
        };
        let r = run_trial(&g, &vec![1.0; g.len()], &tcfg, &scfg).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,t,frozen,px,py,vx,vy,ux,uy,tau_clock,tau_c,tau_la,u_req,delta,branch,clipped"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), r.len());
        let frozen_row: Vec<&str> = rows[21].split(',').collect();
        assert_eq!(frozen_row.len(), 16);
        assert_eq!(frozen_row[0], "21");
        assert_eq!(frozen_row[2], "true");
        assert_eq!(frozen_row[7], "0"); // ux
        assert_eq!(frozen_row[8], "0"); // uy
        assert_eq!(frozen_row[14], "frozen");
        let active_row: Vec<&str> = rows[0].split(',').collect();
        assert_eq!(active_row[2], "false");
        assert!(active_row[14] == "feasible" || active_row[14] == "qp");
    }

    #[test]
    fn csv_roundtrip_is_byte_identical() {
        let g = line_grid(0.01, 5001);
        let alpha = vec![1.0; g.len()];
        let scfg = SimConfig {
            seed: 5,
            freeze_start: 0.25,
            freeze_duration: 0.25,
            ..SimConfig::default()
        };
        let r = run_trial(&g, &alpha, &TrackerConfig::default(), &scfg).unwrap();
        let mut first = Vec::new();
        r.write_csv(&mut first).unwrap();
        let text = String::from_utf8(first).unwrap();
        let back = TrialResult::read_csv(&r.meta(), &text).unwrap();
        assert_eq!(back.len(), r.len());
        assert_eq!(back.seed, r.seed);
        assert_eq!(back.status, r.status);
        let mut second = Vec::new();
        back.write_csv(&mut second).unwrap();
        assert_eq!(text.as_bytes(), second.as_slice());
    }

    #[test]
    fn csv_reader_rejects_malformed_input() {
        let meta = TrialMeta {
            t_s: 0.0125,
            tau_end: 2.0,
            goal: Vec2::new(0.45, 0.45),
            goal_tol: 0.01,
            seed: 0,
            status: TrialStatus::Reached,
        };
        assert!(TrialResult::read_csv(&meta, "nonsense\n").is_err());
        let missing_field = format!("{TRIAL_CSV_HEADER}\n0,0,false,0,0\n");
        assert!(TrialResult::read_csv(&meta, &missing_field).is_err());
        let bad_branch = format!(
            "{TRIAL_CSV_HEADER}\n0,0,false,0,0,0,0,0,0,0,0,0,0,0,sideways,false\n"
        );
        assert!(TrialResult::read_csv(&meta, &bad_branch).is_err());
    }
}
