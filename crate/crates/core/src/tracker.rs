//! Look-ahead tracking controller with a one-step reachability margin.
//!
//! Each control sample projects the robot onto the reference grid, places a
//! look-ahead target one commanded travel increment further along the arc,
//! and asks for the acceleration that lands on the target in a single step.
//! The margin
//!
//! `delta = u_req - (a_max - sigma)`,  `sigma = 2 eps_p / t_s + eps_v`
//!
//! compares that demand against the input authority left after worst-case
//! disturbances. When `delta <= 0` the exact one-step law is feasible and is
//! applied as-is; otherwise a regularized law blends position and velocity
//! error so the saturated robot degrades gracefully. Commands always pass
//! through [`clip_command`], which enforces the acceleration bound and the
//! disturbance-free speed bound no matter what the branches produced.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spline::PathGrid;
use crate::vec2::Vec2;

/// Closest-point searches scan this many grid samples on each side of the
/// previous match; one step of motion moves well under half a window.
pub const W_SEARCH: usize = 2000;

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("invalid tracker parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Control period in seconds.
    pub t_s: f64,
    pub v_max: f64,
    pub a_max: f64,
    /// Velocity-disturbance bound entering the position update (m/s).
    pub eps_p: f64,
    /// Acceleration-disturbance bound entering the velocity update (m/s^2).
    pub eps_v: f64,
    /// Gain mapping positive margins to the velocity-blend weight.
    pub c0: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            t_s: 0.0125,
            v_max: 1.0,
            a_max: 2.5,
            eps_p: 0.00125,
            eps_v: 0.1,
            c0: 0.05,
            c_min: 1e-4,
            c_max: 1.0,
        }
    }
}

impl TrackerConfig {
    pub fn sigma(&self) -> f64 {
        disturbance_offset(self.eps_p, self.eps_v, self.t_s)
    }

    /// Input authority left after the worst-case disturbance offset.
    pub fn a_avail(&self) -> f64 {
        self.a_max - self.sigma()
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |msg: &str| Err(TrackerError::InvalidParams(msg.to_string()));
        if !(self.t_s > 0.0) {
            return bad("t_s must be positive");
        }
        if !(self.v_max > 0.0) {
            return bad("v_max must be positive");
        }
        if self.eps_p < 0.0 || self.eps_v < 0.0 {
            return bad("disturbance bounds must be non-negative");
        }
        if !(self.a_max > self.sigma()) {
            return bad("a_max must exceed the disturbance offset sigma");
        }
        if !(self.c0 >= 0.0) {
            return bad("c0 must be non-negative");
        }
        if !(self.c_min > 0.0 && self.c_min <= self.c_max) {
            return bad("blend clamp must satisfy 0 < c_min <= c_max");
        }
        Ok(())
    }
}

/// Mutable controller state carried across samples. Position, velocity, and
/// the timing clock are advanced by the simulator; `control_step` only
/// refreshes the search hint and the last blend weight.
#[derive(Debug, Clone, Copy)]
pub struct TrackerState {
    pub p: Vec2,
    pub v: Vec2,
    pub tau_clock: f64,
    /// Grid index of the previous projection; `None` forces a global search
    /// (first sample and the sample after a resume).
    pub closest_hint: Option<usize>,
    /// Blend weight from the most recent sample, for diagnostics.
    pub c_k: f64,
}

impl TrackerState {
    pub fn new(start: Vec2, cfg: &TrackerConfig) -> Self {
        TrackerState {
            p: start,
            v: Vec2::ZERO,
            tau_clock: 0.0,
            closest_hint: None,
            c_k: cfg.c_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Exact one-step law, margin non-positive.
    Feasible,
    /// Regularized blend, margin positive.
    Qp,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Feasible => "feasible",
            Branch::Qp => "qp",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub tau_c: f64,
    pub tau_la: f64,
    pub p_la: Vec2,
    pub u_req: f64,
    pub delta: f64,
    /// Norm of the chord/tangent mismatch vector.
    pub mismatch: f64,
    pub u_applied: Vec2,
    pub clipped: bool,
    pub branch: Branch,
}

/// Project `p` onto the grid samples. With a hint, only `W_SEARCH` samples
/// on each side are scanned; ties resolve to the smaller index. Returns the
/// sample's tau and its index.
pub fn closest_point(g: &PathGrid, p: Vec2, hint: Option<usize>) -> (f64, usize) {
    let last = g.len() - 1;
    let (lo, hi) = match hint {
        None => (0, last),
        Some(h) => (h.saturating_sub(W_SEARCH), (h + W_SEARCH).min(last)),
    };
    let mut best = lo;
    let mut best_d = f64::INFINITY;
    for j in lo..=hi {
        let d = (g.p[j] - p).norm_sq();
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (g.tau[best], best)
}

/// Place the look-ahead target one commanded travel increment past the
/// projection: `s_la = min(v_max, tau_dot * |p'(tau_c)|) * t_s` along the
/// arc, clamped at the path end.
pub fn lookahead(g: &PathGrid, tau_c: f64, tau_dot: f64, cfg: &TrackerConfig) -> (f64, Vec2, f64) {
    let v_la = cfg.v_max.min(tau_dot * g.dpos_at(tau_c).norm());
    let s_la = v_la * cfg.t_s;
    let tau_la = g.tau_at_arclen(g.arclen_at(tau_c) + s_la);
    (tau_la, g.pos_at(tau_la), s_la)
}

/// One-step chord and the acceleration magnitude that closes it:
/// `r = p_la - p - t_s v`, `u_req = (2 / t_s^2) |r|`.
pub fn required_accel(p: Vec2, v: Vec2, p_la: Vec2, t_s: f64) -> (Vec2, f64) {
    let r = p_la - p - v * t_s;
    (r, 2.0 / (t_s * t_s) * r.norm())
}

/// Worst-case disturbance offset `sigma = 2 eps_p / t_s + eps_v`.
pub fn disturbance_offset(eps_p: f64, eps_v: f64, t_s: f64) -> f64 {
    2.0 * eps_p / t_s + eps_v
}

/// Reachability margin `delta = u_req - (a_max - sigma)`.
pub fn margin(u_req: f64, a_max: f64, sigma: f64) -> f64 {
    u_req - (a_max - sigma)
}

/// Exact one-step law: `u = (2 / t_s^2) e_p`.
pub fn feasible_control(e_p: Vec2, t_s: f64) -> Vec2 {
    e_p * (2.0 / (t_s * t_s))
}

/// Regularized law for saturated samples:
/// `u = (e_p + (2 c / t_s) e_v) / (t_s^2 / 2 + 2 c)`.
pub fn qp_control(e_p: Vec2, e_v: Vec2, c: f64, t_s: f64) -> Vec2 {
    (e_p + e_v * (2.0 * c / t_s)) / (t_s * t_s / 2.0 + 2.0 * c)
}

/// Chord/tangent mismatch `m = 2 (p_la - p) - t_s (v + v_ref)`; its norm
/// measures how far the segment-to-target deviates from the local tangents.
pub fn chord_tangent_mismatch(p: Vec2, p_la: Vec2, v: Vec2, v_ref: Vec2, t_s: f64) -> Vec2 {
    (p_la - p) * 2.0 - (v + v_ref) * t_s
}

/// Enforce the acceleration bound, then the disturbance-free speed bound by
/// shrinking the command along its own direction (largest feasible factor
/// in `[0, 1]`, closed form). If no factor works because the current speed
/// already exceeds `v_max` and the command will not oppose it, brake at full
/// authority instead; config validation guarantees that restores the bound.
pub fn clip_command(u_star: Vec2, v: Vec2, cfg: &TrackerConfig) -> (Vec2, bool) {
    let mut u = u_star;
    let n = u.norm();
    if n > cfg.a_max {
        u = u * (cfg.a_max / n);
    }
    if (v + u * cfg.t_s).norm() > cfg.v_max {
        u = match speed_scale(u, v, cfg) {
            Some(beta) => u * beta,
            None => -v.unit().expect("speed over v_max is non-zero") * cfg.a_max,
        };
    }
    (u, u != u_star)
}

/// Largest `beta` in `[0, 1]` with `|v + beta u t_s| <= v_max`, or `None`
/// when the quadratic admits no such factor.
fn speed_scale(u: Vec2, v: Vec2, cfg: &TrackerConfig) -> Option<f64> {
    let w = u * cfg.t_s;
    let a = w.norm_sq();
    let b = 2.0 * v.dot(w);
    let c = v.norm_sq() - cfg.v_max * cfg.v_max;
    if c <= 0.0 {
        // Current speed is in bounds, so beta = 0 is feasible and the upper
        // root exists whenever the unscaled command violates the bound.
        if a == 0.0 {
            return Some(0.0);
        }
        let disc = (b * b - 4.0 * a * c).max(0.0);
        return Some(((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0));
    }
    if a == 0.0 {
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sqrt_disc = disc.sqrt();
    let lo = (-b - sqrt_disc) / (2.0 * a);
    let hi = (-b + sqrt_disc) / (2.0 * a);
    if lo > 1.0 || hi < 0.0 {
        return None;
    }
    Some(hi.min(1.0))
}

/// One control sample. Reads the per-grid-sample speed profile `alpha`
/// (piecewise constant, evaluated at the timing clock), updates the state's
/// search hint and blend weight, and returns the clipped command with full
/// diagnostics.
pub fn control_step(
    state: &mut TrackerState,
    g: &PathGrid,
    alpha: &[f64],
    cfg: &TrackerConfig,
) -> (Vec2, StepDiagnostics) {
    assert_eq!(alpha.len(), g.len(), "profile must cover the grid");
    let (tau_c, idx) = closest_point(g, state.p, state.closest_hint);
    state.closest_hint = Some(idx);

    let tau_dot = alpha[g.nearest_index(state.tau_clock)];
    let (tau_la, p_la, _s_la) = lookahead(g, tau_c, tau_dot, cfg);
    let (e_p, u_req) = required_accel(state.p, state.v, p_la, cfg.t_s);
    let sigma = cfg.sigma();
    let delta = margin(u_req, cfg.a_max, sigma);
    let v_ref = g.dpos_at(tau_la) * tau_dot;

    let c_k = (cfg.c0 * delta.max(0.0) / cfg.a_avail()).clamp(cfg.c_min, cfg.c_max);
    state.c_k = c_k;

    let (u_star, branch) = if delta <= 0.0 {
        (feasible_control(e_p, cfg.t_s), Branch::Feasible)
    } else {
        (qp_control(e_p, v_ref - state.v, c_k, cfg.t_s), Branch::Qp)
    };
    let (u, clipped) = clip_command(u_star, state.v, cfg);

    let diag = StepDiagnostics {
        tau_c,
        tau_la,
        p_la,
        u_req,
        delta,
        mismatch: chord_tangent_mismatch(state.p, p_la, state.v, v_ref, cfg.t_s).norm(),
        u_applied: u,
        clipped,
        branch,
    };
    (u, diag)
}
