//! Natural cubic reference splines and the dense path grid.
//!
//! Waypoints are interpolated per axis by a natural cubic spline (zero
//! second derivative at both ends) over chord-length-proportional knots
//! scaled to `[0, horizon]`, so the nominal timing parameter runs the whole
//! path in `horizon` seconds. Downstream consumers never touch the spline
//! directly: they read a [`PathGrid`] of `m` uniform samples carrying
//! position, the first two derivatives, and a trapezoidal arc-length table.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec2::Vec2;
use crate::workspace::Workspace;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("spline fit needs at least two waypoints, got {got}")]
    TooFewWaypoints { got: usize },
    #[error("duplicate knot at waypoint {index}; dedupe the path first")]
    DuplicateKnot { index: usize },
    #[error("horizon must be positive")]
    InvalidHorizon,
    #[error("tau {tau} outside [0, {tau_end}]")]
    TauOutOfRange { tau: f64, tau_end: f64 },
    #[error("grid needs at least two samples, got {m}")]
    GridTooSmall { m: usize },
    #[error("reference is not regular: derivative vanishes at sample {index}")]
    NotRegular { index: usize },
    #[error("reference collides with an obstacle at sample {index} ({x}, {y})")]
    SplineCollision { index: usize, x: f64, y: f64 },
}

/// One axis of a cubic spline: interval `i` evaluates
/// `a[i] + b[i] dt + c[i] dt^2 + d[i] dt^3` with `dt = tau - knots[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpline {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl AxisSpline {
    /// Natural cubic spline through `(t[i], y[i])`: tridiagonal solve for
    /// the half-second-derivatives with zero end conditions.
    fn fit(t: &[f64], y: &[f64]) -> AxisSpline {
        let n = t.len() - 1;
        let h: Vec<f64> = (0..n).map(|i| t[i + 1] - t[i]).collect();

        let mut rhs = vec![0.0; n + 1];
        for i in 1..n {
            rhs[i] = 3.0 * (y[i + 1] - y[i]) / h[i] - 3.0 * (y[i] - y[i - 1]) / h[i - 1];
        }

        let mut l = vec![1.0; n + 1];
        let mut mu = vec![0.0; n + 1];
        let mut z = vec![0.0; n + 1];
        for i in 1..n {
            l[i] = 2.0 * (t[i + 1] - t[i - 1]) - h[i - 1] * mu[i - 1];
            mu[i] = h[i] / l[i];
            z[i] = (rhs[i] - h[i - 1] * z[i - 1]) / l[i];
        }

        let mut c = vec![0.0; n + 1];
        let mut b = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in (0..n).rev() {
            c[i] = z[i] - mu[i] * c[i + 1];
            b[i] = (y[i + 1] - y[i]) / h[i] - h[i] * (c[i + 1] + 2.0 * c[i]) / 3.0;
            d[i] = (c[i + 1] - c[i]) / (3.0 * h[i]);
        }
        c.truncate(n);
        AxisSpline {
            a: y[..n].to_vec(),
            b,
            c,
            d,
        }
    }

    fn eval(&self, dt: f64, i: usize) -> (f64, f64, f64) {
        let (a, b, c, d) = (self.a[i], self.b[i], self.c[i], self.d[i]);
        (
            a + b * dt + c * dt * dt + d * dt * dt * dt,
            b + 2.0 * c * dt + 3.0 * d * dt * dt,
            2.0 * c + 6.0 * d * dt,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineRef {
    pub knots: Vec<f64>,
    pub x: AxisSpline,
    pub y: AxisSpline,
}

impl SplineRef {
    pub fn tau_end(&self) -> f64 {
        *self.knots.last().expect("spline has knots")
    }

    /// Position and first two derivatives at `tau`.
    pub fn eval(&self, tau: f64) -> Result<(Vec2, Vec2, Vec2), SplineError> {
        let tau_end = self.tau_end();
        if !(0.0..=tau_end).contains(&tau) {
            return Err(SplineError::TauOutOfRange { tau, tau_end });
        }
        // partition_point finds the first knot beyond tau; tau == tau_end
        // falls into the last interval.
        let i = self
            .knots
            .partition_point(|&k| k <= tau)
            .saturating_sub(1)
            .min(self.knots.len() - 2);
        let dt = tau - self.knots[i];
        let (px, dpx, ddpx) = self.x.eval(dt, i);
        let (py, dpy, ddpy) = self.y.eval(dt, i);
        Ok((
            Vec2::new(px, py),
            Vec2::new(dpx, dpy),
            Vec2::new(ddpx, ddpy),
        ))
    }
}

/// Fit a natural cubic spline through `path`, with knots proportional to
/// cumulative chord length and the final knot at exactly `horizon`.
pub fn fit_spline(path: &[Vec2], horizon: f64) -> Result<SplineRef, SplineError> {
    if path.len() < 2 {
        return Err(SplineError::TooFewWaypoints { got: path.len() });
    }
    if !(horizon > 0.0) {
        return Err(SplineError::InvalidHorizon);
    }
    let mut chord = vec![0.0; path.len()];
    for i in 1..path.len() {
        let step = path[i].dist(path[i - 1]);
        if step == 0.0 {
            return Err(SplineError::DuplicateKnot { index: i });
        }
        chord[i] = chord[i - 1] + step;
    }
    let total = chord[path.len() - 1];
    let knots: Vec<f64> = chord.iter().map(|&s| horizon * (s / total)).collect();

    let xs: Vec<f64> = path.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = path.iter().map(|p| p.y).collect();
    Ok(SplineRef {
        x: AxisSpline::fit(&knots, &xs),
        y: AxisSpline::fit(&knots, &ys),
        knots,
    })
}

/// Dense sampling of a reference curve on `m` uniform tau values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub tau: Vec<f64>,
    pub p: Vec<Vec2>,
    pub dp: Vec<Vec2>,
    pub ddp: Vec<Vec2>,
    /// Trapezoidal cumulative arc length; strictly increasing for regular
    /// references.
    pub arclen: Vec<f64>,
}

impl PathGrid {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn tau_end(&self) -> f64 {
        *self.tau.last().expect("grid is non-empty")
    }

    pub fn total_arclen(&self) -> f64 {
        *self.arclen.last().expect("grid is non-empty")
    }

    /// Build from any analytic curve `f(tau) -> (p, dp, ddp)`. No occupancy
    /// check; used for closed-form references in tests and calibration.
    pub fn from_curve<F>(m: usize, tau_end: f64, f: F) -> Result<PathGrid, SplineError>
    where
        F: Fn(f64) -> (Vec2, Vec2, Vec2),
    {
        if m < 2 {
            return Err(SplineError::GridTooSmall { m });
        }
        let mut grid = PathGrid {
            tau: Vec::with_capacity(m),
            p: Vec::with_capacity(m),
            dp: Vec::with_capacity(m),
            ddp: Vec::with_capacity(m),
            arclen: Vec::with_capacity(m),
        };
        let denom = (m - 1) as f64;
        for j in 0..m {
            let tau = tau_end * (j as f64 / denom);
            let (p, dp, ddp) = f(tau);
            grid.tau.push(tau);
            grid.p.push(p);
            grid.dp.push(dp);
            grid.ddp.push(ddp);
        }
        for j in 0..m {
            if grid.dp[j].norm_sq() == 0.0 {
                return Err(SplineError::NotRegular { index: j });
            }
        }
        grid.arclen.push(0.0);
        for j in 1..m {
            let seg = 0.5 * (grid.dp[j - 1].norm() + grid.dp[j].norm()) * (grid.tau[j] - grid.tau[j - 1]);
            grid.arclen.push(grid.arclen[j - 1] + seg);
        }
        Ok(grid)
    }

    /// Index of the interval containing `tau` (clamped), plus the fraction
    /// through it. The grid is uniform, so this is O(1) with a defensive
    /// nudge for rounding at interval boundaries.
    fn locate(&self, tau: f64) -> (usize, f64) {
        let m = self.len();
        let tau_end = self.tau_end();
        let t = tau.clamp(0.0, tau_end);
        let mut i = ((t / tau_end) * (m - 1) as f64) as usize;
        i = i.min(m - 2);
        while i > 0 && t < self.tau[i] {
            i -= 1;
        }
        while i < m - 2 && t > self.tau[i + 1] {
            i += 1;
        }
        let span = self.tau[i + 1] - self.tau[i];
        let frac = if span > 0.0 { (t - self.tau[i]) / span } else { 0.0 };
        (i, frac)
    }

    /// Arc length at `tau` by linear interpolation of the table. Clamps.
    pub fn arclen_at(&self, tau: f64) -> f64 {
        let (i, frac) = self.locate(tau);
        self.arclen[i] + frac * (self.arclen[i + 1] - self.arclen[i])
    }

    /// Inverse of [`arclen_at`](Self::arclen_at): tau at arc length `s` by
    /// binary search plus linear interpolation. Clamps.
    pub fn tau_at_arclen(&self, s: f64) -> f64 {
        let total = self.total_arclen();
        let s = s.clamp(0.0, total);
        let i = self
            .arclen
            .partition_point(|&a| a <= s)
            .saturating_sub(1)
            .min(self.len() - 2);
        let span = self.arclen[i + 1] - self.arclen[i];
        let frac = if span > 0.0 { (s - self.arclen[i]) / span } else { 0.0 };
        self.tau[i] + frac * (self.tau[i + 1] - self.tau[i])
    }

    /// Index of the grid sample nearest to `tau` (clamped). Per-sample
    /// quantities such as speed-profile values are read at this index.
    pub fn nearest_index(&self, tau: f64) -> usize {
        let (i, frac) = self.locate(tau);
        if frac >= 0.5 {
            i + 1
        } else {
            i
        }
    }

    /// Position at `tau` by linear interpolation between grid samples.
    pub fn pos_at(&self, tau: f64) -> Vec2 {
        let (i, frac) = self.locate(tau);
        self.p[i] + (self.p[i + 1] - self.p[i]) * frac
    }

    /// Derivative at `tau` by linear interpolation between grid samples.
    pub fn dpos_at(&self, tau: f64) -> Vec2 {
        let (i, frac) = self.locate(tau);
        self.dp[i] + (self.dp[i + 1] - self.dp[i]) * frac
    }

    /// Write `tau,px,py,dpx,dpy,ddpx,ddpy,arclen` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tau,px,py,dpx,dpy,ddpx,ddpy,arclen")?;
        for j in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.tau[j],
                self.p[j].x,
                self.p[j].y,
                self.dp[j].x,
                self.dp[j].y,
                self.ddp[j].x,
                self.ddp[j].y,
                self.arclen[j]
            )?;
        }
        Ok(())
    }
}

/// Sample the spline on `m` uniform tau values and verify every sample is
/// in free space.
pub fn build_grid(s: &SplineRef, m: usize, w: &Workspace) -> Result<PathGrid, SplineError> {
    let grid = PathGrid::from_curve(m, s.tau_end(), |tau| {
        s.eval(tau).expect("uniform samples lie inside [0, tau_end]")
    })?;
    for (j, &p) in grid.p.iter().enumerate() {
        if !w.point_free(p) {
            return Err(SplineError::SplineCollision {
                index: j,
                x: p.x,
                y: p.y,
            });
        }
    }
    Ok(grid)
}
