//! RRT* waypoint planner over the inflated workspace.
//!
//! Collision checks run against a copy of the world whose obstacle radii are
//! grown by `inflation`, so the returned polyline keeps a robot-radius
//! margin from the true discs. Costs are exact Euclidean path lengths and
//! are propagated through the subtree on every rewire, which keeps the
//! extracted path length non-increasing in the iteration budget for a fixed
//! seed stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec2::Vec2;
use crate::workspace::Workspace;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid planner parameter: {0}")]
    InvalidParams(String),
    #[error("no collision-free path found within the iteration budget")]
    NoPathFound,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RrtParams {
    pub max_iters: usize,
    /// Maximum edge length when steering toward a sample.
    pub step: f64,
    /// Probability of sampling the goal instead of a uniform point.
    pub goal_bias: f64,
    /// Neighbor radius for choose-parent and rewiring.
    pub rewire_radius: f64,
    /// A node this close to the goal may terminate the path.
    pub goal_tolerance: f64,
    /// Obstacle radius growth applied before collision checks.
    pub inflation: f64,
}

impl Default for RrtParams {
    fn default() -> Self {
        RrtParams {
            max_iters: 5000,
            step: 0.03,
            goal_bias: 0.05,
            rewire_radius: 0.09,
            goal_tolerance: 0.02,
            inflation: 0.01,
        }
    }
}

impl RrtParams {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |msg: &str| Err(PlannerError::InvalidParams(msg.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.step > 0.0) {
            return bad("step must be positive");
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return bad("goal_bias must lie in [0, 1]");
        }
        if self.rewire_radius < self.step {
            return bad("rewire_radius must be at least step");
        }
        if !(self.goal_tolerance > 0.0) {
            return bad("goal_tolerance must be positive");
        }
        if self.inflation < 0.0 {
            return bad("inflation must be non-negative");
        }
        Ok(())
    }
}

struct Node {
    pos: Vec2,
    parent: Option<usize>,
    children: Vec<usize>,
    /// Exact polyline length from the root.
    cost: f64,
}

/// Plan a waypoint path from `w.start` to `w.goal`. The first waypoint is
/// exactly `start`, the last exactly `goal`, and every consecutive segment
/// passes `segment_free` on the inflated workspace.
pub fn plan(w: &Workspace, params: &RrtParams, seed: u64) -> Result<Vec<Vec2>, PlannerError> {
    params.validate()?;
    let world = w.inflated(params.inflation);
    if !world.point_free(world.start) || !world.point_free(world.goal) {
        return Err(PlannerError::NoPathFound);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![Node {
        pos: world.start,
        parent: None,
        children: Vec::new(),
        cost: 0.0,
    }];

    for _ in 0..params.max_iters {
        let sample = if rng.random::<f64>() < params.goal_bias {
            world.goal
        } else {
            Vec2::new(
                rng.random::<f64>() * world.width,
                rng.random::<f64>() * world.height,
            )
        };

        let nearest = nearest_node(&nodes, sample);
        let new_pos = steer(nodes[nearest].pos, sample, params.step);
        if !world.segment_free(nodes[nearest].pos, new_pos) {
            continue;
        }

        // Choose the parent minimizing cost-to-come among reachable neighbors.
        let neighbors: Vec<usize> = (0..nodes.len())
            .filter(|&j| nodes[j].pos.dist(new_pos) <= params.rewire_radius)
            .collect();
        let mut best_parent = nearest;
        let mut best_cost = nodes[nearest].cost + nodes[nearest].pos.dist(new_pos);
        for &j in &neighbors {
            let c = nodes[j].cost + nodes[j].pos.dist(new_pos);
            if c < best_cost && world.segment_free(nodes[j].pos, new_pos) {
                best_parent = j;
                best_cost = c;
            }
        }

        let new_idx = nodes.len();
        nodes.push(Node {
            pos: new_pos,
            parent: Some(best_parent),
            children: Vec::new(),
            cost: best_cost,
        });
        nodes[best_parent].children.push(new_idx);

        // Rewire neighbors through the new node when that shortens them.
        for &j in &neighbors {
            if j == best_parent {
                continue;
            }
            let through = best_cost + new_pos.dist(nodes[j].pos);
            if through < nodes[j].cost && world.segment_free(new_pos, nodes[j].pos) {
                let old_parent = nodes[j].parent.expect("root is never rewired");
                nodes[old_parent].children.retain(|&c| c != j);
                nodes[j].parent = Some(new_idx);
                nodes[new_idx].children.push(j);
                propagate_cost(&mut nodes, j, through);
            }
        }
    }

    // Lowest total-cost node that reaches the goal within tolerance.
    let mut best: Option<(usize, f64)> = None;
    for (idx, node) in nodes.iter().enumerate() {
        let gap = node.pos.dist(world.goal);
        if gap <= params.goal_tolerance && world.segment_free(node.pos, world.goal) {
            let total = node.cost + gap;
            if best.map_or(true, |(_, c)| total < c) {
                best = Some((idx, total));
            }
        }
    }
    let (mut idx, _) = best.ok_or(PlannerError::NoPathFound)?;

    let mut path = Vec::new();
    loop {
        path.push(nodes[idx].pos);
        match nodes[idx].parent {
            Some(p) => idx = p,
            None => break,
        }
    }
    path.reverse();
    if *path.last().expect("path contains the root") != world.goal {
        path.push(world.goal);
    }
    Ok(path)
}

fn nearest_node(nodes: &[Node], p: Vec2) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (idx, node) in nodes.iter().enumerate() {
        let d = node.pos.dist(p);
        if d < best_d {
            best = idx;
            best_d = d;
        }
    }
    best
}

fn steer(from: Vec2, toward: Vec2, step: f64) -> Vec2 {
    let d = from.dist(toward);
    if d <= step {
        toward
    } else {
        from + (toward - from) * (step / d)
    }
}

/// Reassign `node`'s cost and push the exact delta down its subtree.
fn propagate_cost(nodes: &mut Vec<Node>, node: usize, new_cost: f64) {
    let delta = new_cost - nodes[node].cost;
    let mut stack = vec![node];
    while let Some(i) = stack.pop() {
        nodes[i].cost += delta;
        stack.extend(nodes[i].children.iter().copied());
    }
}

/// Drop waypoints closer than `tol` to their predecessor, keeping the first
/// of each run. Both endpoints are always retained.
pub fn dedupe(path: &[Vec2], tol: f64) -> Vec<Vec2> {
    if path.len() <= 1 {
        return path.to_vec();
    }
    let mut out = vec![path[0]];
    for &w in &path[1..] {
        if w.dist(*out.last().expect("non-empty")) > tol {
            out.push(w);
        }
    }
    let last = *path.last().expect("non-empty");
    if *out.last().expect("non-empty") != last {
        if out.len() >= 2 {
            *out.last_mut().expect("non-empty") = last;
        } else {
            out.push(last);
        }
    }
    out
}

/// Total polyline length.
pub fn path_length(path: &[Vec2]) -> f64 {
    path.windows(2).map(|w| w[0].dist(w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workspace::{generate_workspace, CircleObstacle};

    fn empty_world() -> Workspace {
        generate_workspace(1, 0, 0.03, 0.06, 0.05).unwrap()
    }

    fn check_postconditions(w: &Workspace, params: &RrtParams, path: &[Vec2]) {
        assert!(path.len() >= 2);
        assert_eq!(path[0], w.start);
        assert_eq!(*path.last().unwrap(), w.goal);
        let world = w.inflated(params.inflation);
        for seg in path.windows(2) {
            assert!(world.segment_free(seg[0], seg[1]));
        }
    }

    #[test]
    fn empty_world_path_is_near_straight() {
        let w = empty_world();
        let params = RrtParams::default();
        let path = plan(&w, &params, 11).unwrap();
        check_postconditions(&w, &params, &path);
        let straight = w.start.dist(w.goal);
        assert!(
            path_length(&path) <= 1.05 * straight,
            "length {} vs straight {}",
            path_length(&path),
            straight
        );
    }

    #[test]
    fn plans_around_obstacles() {
        let w = generate_workspace(21, 6, 0.035, 0.07, 0.05).unwrap();
        let params = RrtParams::default();
        let path = plan(&w, &params, 5).unwrap();
        check_postconditions(&w, &params, &path);
    }

    #[test]
    fn blocked_world_reports_no_path() {
        let mut w = empty_world();
        // Overlapping discs form a solid wall at x = 0.25.
        for i in 0..11 {
            w.obstacles.push(CircleObstacle {
                center: Vec2::new(0.25, 0.05 * i as f64),
                radius: 0.06,
            });
        }
        let params = RrtParams {
            max_iters: 2000,
            ..RrtParams::default()
        };
        assert!(matches!(
            plan(&w, &params, 3),
            Err(PlannerError::NoPathFound)
        ));
    }

    #[test]
    fn blocked_start_reports_no_path() {
        let mut w = empty_world();
        w.obstacles.push(CircleObstacle {
            center: w.start,
            radius: 0.02,
        });
        assert!(matches!(
            plan(&w, &RrtParams::default(), 3),
            Err(PlannerError::NoPathFound)
        ));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let w = generate_workspace(8, 5, 0.035, 0.07, 0.05).unwrap();
        let params = RrtParams::default();
        let a = plan(&w, &params, 17).unwrap();
        let b = plan(&w, &params, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cost_non_increasing_in_iteration_budget() {
        let w = generate_workspace(8, 5, 0.035, 0.07, 0.05).unwrap();
        let mut last = f64::INFINITY;
        for iters in [800, 1600, 3200, 5000] {
            let params = RrtParams {
                max_iters: iters,
                ..RrtParams::default()
            };
            let len = path_length(&plan(&w, &params, 17).unwrap());
            assert!(
                len <= last + 1e-12,
                "length grew from {last} to {len} at {iters} iters"
            );
            last = len;
        }
    }

    #[test]
    fn rejects_invalid_params() {
        let w = empty_world();
        for params in [
            RrtParams {
                step: 0.0,
                ..RrtParams::default()
            },
            RrtParams {
                goal_bias: 1.5,
                ..RrtParams::default()
            },
            RrtParams {
                rewire_radius: 0.01,
                ..RrtParams::default()
            },
            RrtParams {
                max_iters: 0,
                ..RrtParams::default()
            },
        ] {
            assert!(matches!(
                plan(&w, &params, 1),
                Err(PlannerError::InvalidParams(_))
            ));
        }
    }

    #[test]
    fn dedupe_keeps_first_of_each_run_and_endpoints() {
        let path = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1e-10, 0.0),
            Vec2::new(0.2, 0.0),
            Vec2::new(0.2, 0.0),
            Vec2::new(0.45, 0.45),
        ];
        let out = dedupe(&path, 1e-6);
        assert_eq!(
            out,
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(0.2, 0.0),
                Vec2::new(0.45, 0.45)
            ]
        );
    }

    #[test]
    fn dedupe_retains_close_endpoints() {
        let path = vec![Vec2::new(0.0, 0.0), Vec2::new(1e-9, 0.0)];
        let out = dedupe(&path, 1e-6);
        assert_eq!(out, path);

        // Goal absorbed into a run: the final kept point becomes the goal.
        let path = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.3, 0.0),
            Vec2::new(0.3 + 1e-9, 0.0),
        ];
        let out = dedupe(&path, 1e-6);
        assert_eq!(out, vec![Vec2::new(0.0, 0.0), Vec2::new(0.3 + 1e-9, 0.0)]);
    }

    #[test]
    fn dedupe_spacing_property() {
        let mut path = Vec::new();
        for i in 0..100 {
            // Bursts of near-duplicates along a line.
            let base = 0.005 * (i / 4) as f64;
            path.push(Vec2::new(base + 1e-9 * (i % 4) as f64, 0.0));
        }
        let out = dedupe(&path, 1e-6);
        for pair in out.windows(2).take(out.len().saturating_sub(2)) {
            assert!(pair[0].dist(pair[1]) > 1e-6);
        }
        assert_eq!(out[0], path[0]);
        assert_eq!(*out.last().unwrap(), *path.last().unwrap());
    }
}
