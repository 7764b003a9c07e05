//! Reachability-margin time scaling for sampled-data path tracking.
//!
//! The crate covers the full experiment loop for a planar double integrator
//! that follows a geometric reference path under bounded disturbances:
//!
//! * [`workspace`] — rectangular world with circular obstacles, seeded generation.
//! * [`planner`] — RRT* waypoint paths through the inflated world.
//! * [`spline`] — natural cubic reference splines and dense path grids.
//! * [`tracker`] — look-ahead tracking controller with a one-step
//!   reachability margin and hard input/speed clipping.
//! * [`timescale`] — offline square-root-ratio speed profiles built from a
//!   recorded nominal run.
//! * [`simulator`] — sampled closed-loop trials with disturbances and a
//!   freeze/resume interruption.
//! * [`metrics`] — per-trial and aggregate statistics over the moving phase.
//! * [`pipeline`] — batch orchestration, file formats, and reports.
//!
//! Everything is deterministic given the seeds carried in the configs: two
//! runs with the same inputs produce byte-identical artifacts.

pub mod metrics;
pub mod pipeline;
pub mod planner;
pub mod simulator;
pub mod spline;
pub mod timescale;
pub mod tracker;
pub mod vec2;
pub mod workspace;

pub use vec2::Vec2;
