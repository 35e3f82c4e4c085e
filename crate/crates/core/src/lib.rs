//! Frontier-based exploration of unknown 2D environments on occupancy grids.
//!
//! The crate covers the full loop: a simulated range scanner over a hidden
//! world, log-odds occupancy mapping with latched classification, frontier
//! clustering, a visit-cost field with minimum travel-cost planning,
//! viewpoint selection, a safe unicycle path follower, and the three
//! replanning strategies that tie them together. Everything is deterministic.

pub mod control;
pub mod costmap;
pub mod distance;
pub mod error;
pub mod experiment;
pub mod explorer;
pub mod frontier;
pub mod geometry;
pub mod occupancy;
pub mod oracle;
pub mod raycast;
pub mod viewpoint;
pub mod world;

pub use costmap::{CostField, NavKind, PathPlan};
pub use error::{ExploreError, Result};
pub use frontier::{FrontierRegion, InfoKind};
pub use geometry::{Cell, GridSpec, Mask, Vec2};
pub use occupancy::{CellState, OccupancyGrid, SafeSpaces};
pub use world::{GroundTruthWorld, RangeScan, SensorParams};
