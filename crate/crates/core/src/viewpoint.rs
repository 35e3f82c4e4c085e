//! Visible frontiers, viewpoint sets and optimal viewpoints, actionable
//! information, the informativeness and completion predicates, and target
//! region selection.
//!
//! A frontier cell is visible from `v` when, for each of nine probe points
//! (`v` itself and eight points spaced evenly on the circle of radius `eta`
//! around it), the segment from the probe to the frontier cell center touches
//! only free cells and has length at most the sensing range.

use std::f64::consts::FRAC_PI_4;

use crate::costmap::{navigation_cost_from, CostField, CostToGo, NavKind};
use crate::error::{ExploreError, Result};
use crate::frontier::{info_measure, FrontierRegion, FrontierSet, InfoKind};
use crate::geometry::{Cell, Vec2};
use crate::occupancy::{CellState, OccupancyGrid, SafeSpaces};
use crate::raycast;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewpointQuery {
    /// Visibility tolerance, meters.
    pub eta: f64,
    pub sensing_range: f64,
    /// Minimum actionable information, m².
    pub mu: f64,
    pub info: InfoKind,
    pub nav: NavKind,
}

impl ViewpointQuery {
    pub fn new(resolution: f64, sensing_range: f64) -> Self {
        Self {
            eta: 2.0 * resolution,
            sensing_range,
            mu: 0.0,
            info: InfoKind::Volume,
            nav: NavKind::Geodesic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < self.sensing_range) {
            return Err(ExploreError::config(
                "eta",
                format!("need 0 < eta < sensing_range, got {}", self.eta),
            ));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(ExploreError::config("mu", format!("must be >= 0, got {}", self.mu)));
        }
        Ok(())
    }

    /// Frontier cells farther than this from the viewpoint are never visible.
    pub fn reach(&self) -> f64 {
        self.sensing_range - self.eta
    }

    pub fn probes(&self, v: Vec2) -> [Vec2; 9] {
        let mut out = [v; 9];
        for (k, p) in out.iter_mut().skip(1).enumerate() {
            *p = v + Vec2::from_angle(k as f64 * FRAC_PI_4) * self.eta;
        }
        out
    }
}

/// Whether frontier cell `f` is visible from `v` under the probe rule.
pub fn is_visible(grid: &OccupancyGrid, f: usize, v: Vec2, query: &ViewpointQuery) -> bool {
    let spec = grid.spec();
    let target = spec.center_of_index(f);
    if target.distance(v) + query.eta > query.sensing_range {
        return false;
    }
    let states = grid.states();
    let free = |c: Cell| spec.checked_index(c).is_some_and(|i| states[i] == CellState::Free);
    query
        .probes(v)
        .iter()
        .all(|&u| raycast::segment_all(spec.resolution, target, u, free))
}

/// Subset of `frontier_cells` visible from `v`.
pub fn visible_frontiers(
    grid: &OccupancyGrid,
    frontier_cells: &[usize],
    v: Vec2,
    query: &ViewpointQuery,
) -> Vec<usize> {
    frontier_cells
        .iter()
        .copied()
        .filter(|&f| is_visible(grid, f, v, query))
        .collect()
}

fn visible_volume(grid: &OccupancyGrid, frontier_cells: &[usize], v: Vec2, query: &ViewpointQuery) -> f64 {
    visible_frontiers(grid, frontier_cells, v, query).len() as f64 * grid.spec().cell_area()
}

/// Planning cells whose inflated neighborhood can contain a viewpoint of `region`.
fn candidate_cells(spaces: &SafeSpaces, region: &FrontierRegion, query: &ViewpointQuery) -> Vec<usize> {
    let spec = spaces.spec();
    let (lo, hi) = region.bounds(spec);
    let pad = (query.reach() / spec.resolution).ceil().max(0.0) as i32;
    let x0 = (lo.x - pad).max(0);
    let y0 = (lo.y - pad).max(0);
    let x1 = (hi.x + pad).min(spec.width as i32 - 1);
    let y1 = (hi.y + pad).min(spec.height as i32 - 1);
    let mut out = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let i = spec.index(Cell::new(x, y));
            if spaces.planning_free.get(i) {
                out.push(i);
            }
        }
    }
    out
}

fn sees_region(grid: &OccupancyGrid, region: &FrontierRegion, v: Vec2, query: &ViewpointQuery) -> bool {
    region.cells.iter().any(|&f| is_visible(grid, f, v, query))
}

/// Planning cells from which at least one cell of `region` is visible.
pub fn viewpoint_set(
    grid: &OccupancyGrid,
    region: &FrontierRegion,
    spaces: &SafeSpaces,
    query: &ViewpointQuery,
) -> Vec<usize> {
    let spec = *grid.spec();
    candidate_cells(spaces, region, query)
        .into_iter()
        .filter(|&i| sees_region(grid, region, spec.center_of_index(i), query))
        .collect()
}

/// Everything derived from one map snapshot that the selection step reads.
#[derive(Debug, Clone, Copy)]
pub struct MapView<'a> {
    pub grid: &'a OccupancyGrid,
    pub spaces: &'a SafeSpaces,
    pub field: &'a CostField,
    pub frontiers: &'a FrontierSet,
    pub regions: &'a [FrontierRegion],
}

/// Reachable viewpoint minimizing the summed distance to the region's cells;
/// ties go to the lower cell index.
pub fn select_viewpoint(
    view: &MapView<'_>,
    region: &FrontierRegion,
    reach: &CostToGo,
    query: &ViewpointQuery,
) -> Option<usize> {
    let spec = *view.grid.spec();
    let cell_centers: Vec<Vec2> = region.cells.iter().map(|&f| spec.center_of_index(f)).collect();
    let mut ranked: Vec<(f64, usize)> = candidate_cells(view.spaces, region, query)
        .into_iter()
        .filter(|&i| reach.is_reachable(i))
        .map(|i| {
            let v = spec.center_of_index(i);
            (cell_centers.iter().map(|f| f.distance(v)).sum::<f64>(), i)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked
        .into_iter()
        .map(|(_, i)| i)
        .find(|&i| sees_region(view.grid, region, spec.center_of_index(i), query))
}

/// Visible frontier volume at the region's selected viewpoint (0 without one).
pub fn actionable_info(view: &MapView<'_>, region: &FrontierRegion, reach: &CostToGo, query: &ViewpointQuery) -> f64 {
    match select_viewpoint(view, region, reach, query) {
        Some(v) => visible_volume(
            view.grid,
            &view.frontiers.cells,
            view.grid.spec().center_of_index(v),
            query,
        ),
        None => 0.0,
    }
}

pub fn is_near(x: Vec2, v: Vec2, eta: f64) -> bool {
    x.distance(v) <= eta
}

pub fn is_informative(grid: &OccupancyGrid, frontiers: &FrontierSet, v: Vec2, query: &ViewpointQuery) -> bool {
    visible_volume(grid, &frontiers.cells, v, query) > query.mu
}

/// Scores for one frontier region as seen from a given start.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionScore {
    pub region_id: usize,
    pub viewpoint: Option<usize>,
    pub actionable: f64,
    pub info: f64,
    pub nav_cost: f64,
}

pub fn score_regions(view: &MapView<'_>, reach: &CostToGo, query: &ViewpointQuery) -> Vec<RegionScore> {
    view.regions
        .iter()
        .map(|region| {
            let viewpoint = select_viewpoint(view, region, reach, query);
            let (actionable, nav_cost) = match viewpoint {
                Some(v) => {
                    let p = view.grid.spec().center_of_index(v);
                    (
                        visible_volume(view.grid, &view.frontiers.cells, p, query),
                        navigation_cost_from(reach, p, query.nav),
                    )
                }
                None => (0.0, f64::INFINITY),
            };
            RegionScore {
                region_id: region.id,
                viewpoint,
                actionable,
                info: info_measure(view.grid, region, query.info),
                nav_cost,
            }
        })
        .collect()
}

/// True when no region offers more than `mu` actionable information.
pub fn is_complete(view: &MapView<'_>, robot: Vec2, query: &ViewpointQuery) -> bool {
    let reach = CostToGo::compute(view.field, robot);
    view.regions
        .iter()
        .all(|region| actionable_info(view, region, &reach, query) <= query.mu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub region_id: usize,
    pub viewpoint: usize,
    pub utility: f64,
}

/// Argmax of information per navigation cost among regions whose actionable
/// information exceeds `mu`; ties go to the lowest region id.
pub fn pick_target(scores: &[RegionScore], mu: f64) -> Option<Target> {
    let mut best: Option<Target> = None;
    for s in scores {
        let Some(viewpoint) = s.viewpoint else {
            continue;
        };
        if s.actionable <= mu {
            continue;
        }
        let utility = if s.nav_cost > 0.0 {
            s.info / s.nav_cost
        } else {
            f64::INFINITY
        };
        if best.as_ref().is_none_or(|b| utility > b.utility) {
            best = Some(Target {
                region_id: s.region_id,
                viewpoint,
                utility,
            });
        }
    }
    best
}

pub fn select_target_region(view: &MapView<'_>, robot: Vec2, query: &ViewpointQuery) -> Option<Target> {
    let reach = CostToGo::compute(view.field, robot);
    pick_target(&score_regions(view, &reach, query), query.mu)
}
