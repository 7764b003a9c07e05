//! Rectangular planar world with circular obstacles.
//!
//! The rectangle is `[0, width] x [0, height]` with its boundary free.
//! Obstacle membership is strict interior: a point exactly on a disc
//! boundary is free, so `point_free` and `segment_free` agree on tangent
//! geometry. All collision predicates are exact (closed-form point/segment
//! distances, no sampling).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec2::Vec2;

/// Attempt cap for rejection-sampling a single obstacle.
const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("invalid workspace parameter: {0}")]
    InvalidParams(String),
    #[error("could not place obstacle {index} within {attempts} attempts; workspace too crowded")]
    TooCrowded { index: usize, attempts: usize },
    #[error("workspace JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "ObstacleJson", into = "ObstacleJson")]
pub struct CircleObstacle {
    pub center: Vec2,
    pub radius: f64,
}

/// On-disk obstacle layout: `{"cx": .., "cy": .., "r": ..}`.
#[derive(Serialize, Deserialize)]
struct ObstacleJson {
    cx: f64,
    cy: f64,
    r: f64,
}

impl From<ObstacleJson> for CircleObstacle {
    fn from(o: ObstacleJson) -> Self {
        CircleObstacle {
            center: Vec2::new(o.cx, o.cy),
            radius: o.r,
        }
    }
}

impl From<CircleObstacle> for ObstacleJson {
    fn from(o: CircleObstacle) -> Self {
        ObstacleJson {
            cx: o.center.x,
            cy: o.center.y,
            r: o.radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub width: f64,
    pub height: f64,
    pub start: Vec2,
    pub goal: Vec2,
    pub obstacles: Vec<CircleObstacle>,
}

/// Generation parameters. Defaults match the benchmark world: a 0.5 m
/// square with start and goal tucked into opposite corners.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldGenParams {
    pub width: f64,
    pub height: f64,
    pub start: Vec2,
    pub goal: Vec2,
    pub n_obs: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Minimum gap between any obstacle boundary and start/goal.
    pub clearance: f64,
}

impl Default for WorldGenParams {
    fn default() -> Self {
        WorldGenParams {
            width: 0.5,
            height: 0.5,
            start: Vec2::new(0.05, 0.05),
            goal: Vec2::new(0.45, 0.45),
            n_obs: 6,
            r_min: 0.035,
            r_max: 0.07,
            clearance: 0.05,
        }
    }
}

impl WorldGenParams {
    pub fn validate(&self) -> Result<(), WorkspaceError> {
        let bad = |msg: &str| Err(WorkspaceError::InvalidParams(msg.to_string()));
        if !(self.width > 0.0 && self.height > 0.0) {
            return bad("width and height must be positive");
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max) {
            return bad("radius range must satisfy 0 < r_min <= r_max");
        }
        if self.clearance < 0.0 {
            return bad("clearance must be non-negative");
        }
        if !in_rect(self.start, self.width, self.height) || !in_rect(self.goal, self.width, self.height) {
            return bad("start and goal must lie inside the rectangle");
        }
        Ok(())
    }
}

fn in_rect(p: Vec2, width: f64, height: f64) -> bool {
    p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height
}

/// Exact distance from point `c` to the closed segment `[a, b]`.
pub fn point_segment_dist(c: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return c.dist(a);
    }
    let t = ((c - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    c.dist(a + ab * t)
}

impl Workspace {
    /// Generate a world by rejection sampling: obstacle centers uniform in
    /// the rectangle, radii uniform in `[r_min, r_max]`; a draw is rejected
    /// while its boundary comes within `clearance` of start or goal.
    pub fn generate(params: &WorldGenParams, seed: u64) -> Result<Workspace, WorkspaceError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut obstacles = Vec::with_capacity(params.n_obs);
        for index in 0..params.n_obs {
            let mut placed = false;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let center = Vec2::new(
                    rng.random::<f64>() * params.width,
                    rng.random::<f64>() * params.height,
                );
                let radius = params.r_min + rng.random::<f64>() * (params.r_max - params.r_min);
                if center.dist(params.start) - radius >= params.clearance
                    && center.dist(params.goal) - radius >= params.clearance
                {
                    obstacles.push(CircleObstacle { center, radius });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(WorkspaceError::TooCrowded {
                    index,
                    attempts: MAX_PLACEMENT_ATTEMPTS,
                });
            }
        }
        Ok(Workspace {
            width: params.width,
            height: params.height,
            start: params.start,
            goal: params.goal,
            obstacles,
        })
    }

    pub fn validate(&self) -> Result<(), WorkspaceError> {
        let bad = |msg: &str| Err(WorkspaceError::InvalidParams(msg.to_string()));
        if !(self.width > 0.0 && self.height > 0.0) {
            return bad("width and height must be positive");
        }
        if !in_rect(self.start, self.width, self.height) || !in_rect(self.goal, self.width, self.height) {
            return bad("start and goal must lie inside the rectangle");
        }
        for o in &self.obstacles {
            if !(o.radius > 0.0) {
                return bad("obstacle radii must be positive");
            }
            if !o.center.is_finite() {
                return bad("obstacle centers must be finite");
            }
        }
        Ok(())
    }

    /// True when `p` lies in the rectangle and strictly outside every
    /// obstacle disc (disc boundaries count as free).
    pub fn point_free(&self, p: Vec2) -> bool {
        in_rect(p, self.width, self.height)
            && self
                .obstacles
                .iter()
                .all(|o| p.dist(o.center) >= o.radius)
    }

    /// True when the closed segment `[a, b]` stays in the rectangle and
    /// clear of every obstacle. The rectangle is convex, so containment of
    /// both endpoints contains the segment.
    pub fn segment_free(&self, a: Vec2, b: Vec2) -> bool {
        in_rect(a, self.width, self.height)
            && in_rect(b, self.width, self.height)
            && self
                .obstacles
                .iter()
                .all(|o| point_segment_dist(o.center, a, b) >= o.radius)
    }

    /// Copy with every obstacle radius grown by `inflation` (robot-radius
    /// margin for planning).
    pub fn inflated(&self, inflation: f64) -> Workspace {
        let mut w = self.clone();
        for o in &mut w.obstacles {
            o.radius += inflation;
        }
        w
    }

    /// Serialize with every float printed to 17 significant digits, enough
    /// to reproduce the exact `f64` bits on parse.
    pub fn to_json(&self) -> Result<String, WorkspaceError> {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17);
        self.serialize(&mut ser)?;
        Ok(String::from_utf8(out).expect("serializer emits UTF-8"))
    }

    pub fn from_json(s: &str) -> Result<Workspace, WorkspaceError> {
        let w: Workspace = serde_json::from_str(s)?;
        w.validate()?;
        Ok(w)
    }
}

/// JSON formatter that prints every float with 17 significant digits.
struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{:.16e}", value)
    }
}

/// Convenience wrapper over [`Workspace::generate`] with the default
/// rectangle and endpoints.
pub fn generate_workspace(
    seed: u64,
    n_obs: usize,
    r_min: f64,
    r_max: f64,
    clearance: f64,
) -> Result<Workspace, WorkspaceError> {
    let params = WorldGenParams {
        n_obs,
        r_min,
        r_max,
        clearance,
        ..WorldGenParams::default()
    };
    Workspace::generate(&params, seed)
}
