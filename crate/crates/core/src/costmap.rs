//! Safe and informative visit-cost field, minimum travel-cost paths over the
//! planning space, and the navigation cost measures.
//!
//! The visit cost of a planning cell is its (saturated) distance to unknown
//! space divided by its (saturated) distance to the planning-space boundary.
//! Paths are 8-connected lattice walks; an edge between neighboring cells
//! costs the mean of the two visit costs times the center-to-center length.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::str::FromStr;

use crate::distance::DistanceField;
use crate::error::{ExploreError, Result};
use crate::geometry::{GridSpec, Mask, Vec2, NEIGHBORS_8};
use crate::occupancy::{CellState, OccupancyGrid, SafeSpaces};

#[derive(Debug, Clone)]
pub struct CostField {
    spec: GridSpec,
    pub dist2unknown: Vec<f64>,
    pub dist2collision: Vec<f64>,
    /// `INFINITY` outside the planning space.
    pub visit_cost: Vec<f64>,
    pub planning: Mask,
    pub alpha_max: f64,
    pub beta_max: f64,
}

pub fn build_cost_field(grid: &OccupancyGrid, spaces: &SafeSpaces, alpha_max: f64, beta_max: f64) -> Result<CostField> {
    if !(alpha_max > 0.0 && alpha_max.is_finite()) {
        return Err(ExploreError::config(
            "alpha_max",
            format!("must be positive, got {alpha_max}"),
        ));
    }
    if !(beta_max > 0.0 && beta_max.is_finite()) {
        return Err(ExploreError::config(
            "beta_max",
            format!("must be positive, got {beta_max}"),
        ));
    }
    let spec = *grid.spec();
    if !spec.same_shape(spaces.spec()) {
        return Err(ExploreError::Dimension {
            expected: format!("{}x{}", spec.width, spec.height),
            actual: format!("{}x{}", spaces.spec().width, spaces.spec().height),
        });
    }

    let unknown = grid.mask_of(CellState::Unknown);
    let to_unknown = DistanceField::compute_distances(spec, &unknown, false);
    let blocked = Mask::from_vec(
        spec.width,
        spec.height,
        spaces.planning_free.as_slice().iter().map(|b| !b).collect(),
    );
    let to_blocked = DistanceField::compute_distances(spec, &blocked, true);

    let n = spec.len();
    let mut dist2unknown = Vec::with_capacity(n);
    let mut dist2collision = Vec::with_capacity(n);
    let mut visit_cost = Vec::with_capacity(n);
    for i in 0..n {
        let du = to_unknown.distance(i).min(alpha_max);
        let dc = to_blocked.distance(i).min(beta_max);
        dist2unknown.push(du);
        dist2collision.push(dc);
        visit_cost.push(if spaces.planning_free.get(i) {
            du / dc
        } else {
            f64::INFINITY
        });
    }
    Ok(CostField {
        spec,
        dist2unknown,
        dist2collision,
        visit_cost,
        planning: spaces.planning_free.clone(),
        alpha_max,
        beta_max,
    })
}

impl CostField {
    /// Field with explicit visit costs; cells with non-finite cost are
    /// treated as outside the planning space.
    pub fn from_visit_costs(spec: GridSpec, visit_cost: Vec<f64>) -> Result<Self> {
        if visit_cost.len() != spec.len() {
            return Err(ExploreError::Dimension {
                expected: format!("{} cells", spec.len()),
                actual: format!("{} cells", visit_cost.len()),
            });
        }
        if let Some(c) = visit_cost.iter().find(|c| c.is_finite() && **c <= 0.0) {
            return Err(ExploreError::config("visit_cost", format!("must be positive, got {c}")));
        }
        let planning = Mask::from_vec(
            spec.width,
            spec.height,
            visit_cost.iter().map(|c| c.is_finite()).collect(),
        );
        let visit_cost = visit_cost
            .into_iter()
            .map(|c| if c.is_finite() { c } else { f64::INFINITY })
            .collect();
        Ok(Self {
            spec,
            dist2unknown: vec![f64::NAN; spec.len()],
            dist2collision: vec![f64::NAN; spec.len()],
            visit_cost,
            planning,
            alpha_max: f64::NAN,
            beta_max: f64::NAN,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Cost of the lattice edge between neighboring cells `a` and `b`.
    pub fn edge_cost(&self, a: usize, b: usize) -> f64 {
        let ca = self.spec.cell_of_index(a);
        let cb = self.spec.cell_of_index(b);
        let diagonal = ca.x != cb.x && ca.y != cb.y;
        let length = if diagonal {
            std::f64::consts::SQRT_2 * self.spec.resolution
        } else {
            self.spec.resolution
        };
        0.5 * (self.visit_cost[a] + self.visit_cost[b]) * length
    }

    pub fn is_planning(&self, index: usize) -> bool {
        self.planning.get(index)
    }

    /// Lattice index of `p` if it lies in a planning cell.
    pub fn planning_index(&self, p: Vec2) -> Option<usize> {
        self.spec
            .checked_index(self.spec.cell_at(p))
            .filter(|&i| self.planning.get(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    hops: u32,
    index: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // reversed so that BinaryHeap pops the smallest (cost, hops, index)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.hops.cmp(&self.hops))
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source minimum travel costs over the planning space.
#[derive(Debug, Clone)]
pub struct CostToGo {
    spec: GridSpec,
    start: Vec2,
    source: Option<usize>,
    cost: Vec<f64>,
    hops: Vec<u32>,
    parent: Vec<usize>,
}

impl CostToGo {
    /// Dijkstra from the cell containing `start`. If that cell is not in the
    /// planning space nothing is reachable.
    pub fn compute(field: &CostField, start: Vec2) -> Self {
        let spec = field.spec;
        let n = spec.len();
        let mut out = Self {
            spec,
            start,
            source: field.planning_index(start),
            cost: vec![f64::INFINITY; n],
            hops: vec![u32::MAX; n],
            parent: vec![usize::MAX; n],
        };
        let Some(source) = out.source else {
            return out;
        };
        out.cost[source] = 0.0;
        out.hops[source] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry {
            cost: 0.0,
            hops: 0,
            index: source,
        });
        while let Some(HeapEntry { cost, hops, index }) = heap.pop() {
            if cost > out.cost[index] || (cost == out.cost[index] && hops > out.hops[index]) {
                continue;
            }
            let cell = spec.cell_of_index(index);
            for &(dx, dy) in &NEIGHBORS_8 {
                let Some(next) = spec.checked_index(cell.offset(dx, dy)) else {
                    continue;
                };
                if !field.planning.get(next) {
                    continue;
                }
                let c = cost + field.edge_cost(index, next);
                let h = hops + 1;
                if c < out.cost[next] || (c == out.cost[next] && h < out.hops[next]) {
                    out.cost[next] = c;
                    out.hops[next] = h;
                    out.parent[next] = index;
                    heap.push(HeapEntry {
                        cost: c,
                        hops: h,
                        index: next,
                    });
                }
            }
        }
        out
    }

    pub fn start(&self) -> Vec2 {
        self.start
    }

    pub fn source(&self) -> Option<usize> {
        self.source
    }

    pub fn cost(&self, index: usize) -> f64 {
        self.cost[index]
    }

    pub fn is_reachable(&self, index: usize) -> bool {
        self.cost[index].is_finite()
    }

    /// Travel cost to the cell containing `goal`, `INFINITY` if unreachable.
    pub fn cost_to(&self, goal: Vec2) -> f64 {
        match self.spec.checked_index(self.spec.cell_at(goal)) {
            Some(i) => self.cost[i],
            None => f64::INFINITY,
        }
    }

    /// Minimum-cost path to cell `goal`, or `None` if it is unreachable.
    pub fn path_to(&self, goal: usize) -> Option<PathPlan> {
        if !self.is_reachable(goal) {
            return None;
        }
        let mut chain = vec![goal];
        let mut cur = goal;
        while Some(cur) != self.source {
            cur = self.parent[cur];
            chain.push(cur);
        }
        chain.reverse();

        let mut waypoints = vec![self.start];
        let mut cumulative_cost = vec![0.0];
        if chain.len() == 1 {
            let center = self.spec.center_of_index(goal);
            if center != self.start {
                waypoints.push(center);
                cumulative_cost.push(0.0);
            }
        } else {
            for &i in &chain[1..] {
                waypoints.push(self.spec.center_of_index(i));
                cumulative_cost.push(self.cost[i]);
            }
        }
        Some(PathPlan::new(waypoints, cumulative_cost))
    }
}

/// Piecewise-linear reference path parameterized by normalized arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPlan {
    pub waypoints: Vec<Vec2>,
    pub cumulative_cost: Vec<f64>,
    /// Arc length from the first waypoint, meters.
    cumulative_length: Vec<f64>,
}

impl PathPlan {
    pub fn new(waypoints: Vec<Vec2>, cumulative_cost: Vec<f64>) -> Self {
        assert!(!waypoints.is_empty(), "a path needs at least one waypoint");
        assert_eq!(waypoints.len(), cumulative_cost.len());
        let mut cumulative_length = Vec::with_capacity(waypoints.len());
        let mut acc = 0.0;
        cumulative_length.push(0.0);
        for w in waypoints.windows(2) {
            acc += w[0].distance(w[1]);
            cumulative_length.push(acc);
        }
        Self {
            waypoints,
            cumulative_cost,
            cumulative_length,
        }
    }

    /// Degenerate path holding at one point.
    pub fn stationary(p: Vec2) -> Self {
        Self::new(vec![p], vec![0.0])
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative_length.last().unwrap()
    }

    pub fn total_cost(&self) -> f64 {
        *self.cumulative_cost.last().unwrap()
    }

    pub fn start(&self) -> Vec2 {
        self.waypoints[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.waypoints.last().unwrap()
    }

    /// Segment index `k` and local fraction for parameter `s`, such that the
    /// point lies on `[waypoints[k], waypoints[k + 1]]`.
    fn locate(&self, s: f64) -> (usize, f64) {
        let total = self.total_length();
        if self.waypoints.len() == 1 || total <= 0.0 {
            return (0, 0.0);
        }
        let target = s.clamp(0.0, 1.0) * total;
        let k = match self.cumulative_length.binary_search_by(|l| l.total_cmp(&target)) {
            Ok(k) => k.min(self.waypoints.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.waypoints.len() - 2),
        };
        let seg = self.cumulative_length[k + 1] - self.cumulative_length[k];
        let frac = if seg > 0.0 {
            ((target - self.cumulative_length[k]) / seg).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (k, frac)
    }

    /// Position at normalized arc length `s` (clamped to `[0, 1]`).
    pub fn point_at(&self, s: f64) -> Vec2 {
        if s >= 1.0 {
            return self.end();
        }
        let (k, frac) = self.locate(s);
        if self.waypoints.len() == 1 {
            return self.waypoints[0];
        }
        self.waypoints[k].lerp(self.waypoints[k + 1], frac)
    }

    /// Waypoint of the segment containing `p(s)` that is closest to it.
    pub fn nearest_waypoint(&self, s: f64) -> Vec2 {
        if self.waypoints.len() == 1 {
            return self.waypoints[0];
        }
        let (k, frac) = self.locate(s);
        if frac <= 0.5 {
            self.waypoints[k]
        } else {
            self.waypoints[k + 1]
        }
    }
}

/// Minimum-cost path between two positions, `None` if the goal is not in the
/// reachable planning space.
pub fn optimal_path(field: &CostField, start: Vec2, goal: Vec2) -> Option<PathPlan> {
    let goal_index = field.planning_index(goal)?;
    CostToGo::compute(field, start).path_to(goal_index)
}

/// Minimum travel cost between two positions, `INFINITY` when unreachable.
pub fn travel_cost(field: &CostField, start: Vec2, goal: Vec2) -> f64 {
    CostToGo::compute(field, start).cost_to(goal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NavKind {
    Uniform,
    Euclidean,
    Geodesic,
}

impl NavKind {
    pub const ALL: [NavKind; 3] = [NavKind::Uniform, NavKind::Euclidean, NavKind::Geodesic];

    pub fn as_str(self) -> &'static str {
        match self {
            NavKind::Uniform => "uniform",
            NavKind::Euclidean => "euclidean",
            NavKind::Geodesic => "geodesic",
        }
    }
}

impl FromStr for NavKind {
    type Err = ExploreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(NavKind::Uniform),
            "euclidean" => Ok(NavKind::Euclidean),
            "geodesic" => Ok(NavKind::Geodesic),
            other => Err(ExploreError::config(
                "nav",
                format!("unknown navigation cost `{other}`"),
            )),
        }
    }
}

/// Navigation cost from the source of `reach` to `goal`.
pub fn navigation_cost_from(reach: &CostToGo, goal: Vec2, kind: NavKind) -> f64 {
    match kind {
        NavKind::Uniform => 1.0,
        NavKind::Euclidean => reach.start().distance(goal),
        NavKind::Geodesic => reach.cost_to(goal),
    }
}

pub fn navigation_cost(field: &CostField, start: Vec2, goal: Vec2, kind: NavKind) -> f64 {
    match kind {
        NavKind::Uniform => 1.0,
        NavKind::Euclidean => start.distance(goal),
        NavKind::Geodesic => travel_cost(field, start, goal),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cell;
    use crate::occupancy::MappingParams;

    fn uniform_field(w: usize, h: usize, cost: f64, blocked: impl Fn(Cell) -> bool) -> CostField {
        let spec = GridSpec::new(w, h, 0.1);
        let planning = Mask::from_fn(w, h, |c| !blocked(c));
        let visit_cost = (0..spec.len())
            .map(|i| if planning.get(i) { cost } else { f64::INFINITY })
            .collect();
        CostField {
            spec,
            dist2unknown: vec![1.0; spec.len()],
            dist2collision: vec![1.0; spec.len()],
            visit_cost,
            planning,
            alpha_max: 1.0,
            beta_max: 1.0,
        }
    }

    #[test]
    fn start_equals_goal() {
        let f = uniform_field(5, 5, 1.0, |_| false);
        let p = f.spec().center(Cell::new(2, 2));
        let path = optimal_path(&f, p, p).unwrap();
        assert_eq!(path.waypoints, vec![p]);
        assert_eq!(path.total_cost(), 0.0);
        assert_eq!(travel_cost(&f, p, p), 0.0);
    }

    #[test]
    fn straight_corridor() {
        let f = uniform_field(10, 3, 2.0, |c| c.y != 1);
        let a = f.spec().center(Cell::new(1, 1));
        let b = f.spec().center(Cell::new(8, 1));
        let path = optimal_path(&f, a, b).unwrap();
        assert_eq!(path.waypoints.len(), 8);
        assert!(path.waypoints.iter().all(|w| (w.y - 0.15).abs() < 1e-12));
        assert!((path.total_cost() - 2.0 * 0.7).abs() < 1e-12);
        assert!((path.total_length() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn sealed_room_is_unreachable() {
        let f = uniform_field(10, 5, 1.0, |c| c.x == 5);
        let a = f.spec().center(Cell::new(1, 2));
        let b = f.spec().center(Cell::new(8, 2));
        assert!(optimal_path(&f, a, b).is_none());
        assert!(travel_cost(&f, a, b).is_infinite());
    }

    #[test]
    fn nav_kinds() {
        // wall with a gap at the top forces a detour
        let f = uniform_field(11, 11, 1.0, |c| c.x == 5 && c.y < 9);
        let a = f.spec().center(Cell::new(2, 1));
        let b = f.spec().center(Cell::new(8, 1));
        assert_eq!(navigation_cost(&f, a, b, NavKind::Uniform), 1.0);
        let e = navigation_cost(&f, a, b, NavKind::Euclidean);
        let g = navigation_cost(&f, a, b, NavKind::Geodesic);
        assert!((e - 0.6).abs() < 1e-12);
        assert!(e < g);

        let open = uniform_field(11, 11, 3.0, |_| false);
        let g = navigation_cost(&open, a, b, NavKind::Geodesic);
        assert!((g - 3.0 * 0.6).abs() < 1e-12);
        assert!(matches!("bogus".parse::<NavKind>(), Err(ExploreError::Config { .. })));
    }

    #[test]
    fn off_center_start_keeps_start_point() {
        let f = uniform_field(5, 5, 1.0, |_| false);
        let start = Vec2::new(0.23, 0.21);
        let path = optimal_path(&f, start, start).unwrap();
        assert_eq!(path.waypoints, vec![start, Vec2::new(0.25, 0.25)]);
        let path = optimal_path(&f, start, f.spec().center(Cell::new(4, 2))).unwrap();
        assert_eq!(path.start(), start);
        assert!(path.cumulative_cost.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn arc_length_parameter() {
        let path = PathPlan::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 3.0)],
            vec![0.0, 1.0, 4.0],
        );
        assert_eq!(path.total_length(), 4.0);
        assert_eq!(path.point_at(0.0), Vec2::new(0.0, 0.0));
        assert_eq!(path.point_at(0.125), Vec2::new(0.5, 0.0));
        assert_eq!(path.point_at(0.5), Vec2::new(1.0, 1.0));
        assert_eq!(path.point_at(1.0), Vec2::new(1.0, 3.0));
        assert_eq!(path.nearest_waypoint(0.2), Vec2::new(1.0, 0.0));
        let still = PathPlan::stationary(Vec2::new(2.0, 2.0));
        assert_eq!(still.point_at(0.7), Vec2::new(2.0, 2.0));
    }

    #[test]
    fn field_from_map() {
        // 12x12 room, fully known, radius small enough to leave a planning core
        let spec = GridSpec::new(12, 12, 0.1);
        let states: Vec<CellState> = (0..spec.len())
            .map(|i| {
                let c = spec.cell_of_index(i);
                if c.x == 0 || c.y == 0 || c.x == 11 || c.y == 11 {
                    CellState::Occupied
                } else {
                    CellState::Free
                }
            })
            .collect();
        let g = OccupancyGrid::from_states(spec, MappingParams::default(), &states).unwrap();
        let spaces = SafeSpaces::compute(&g, 0.1, 0.05);
        let f = build_cost_field(&g, &spaces, 3.0, 0.75).unwrap();
        assert!(f.dist2unknown.iter().all(|d| *d == 3.0));
        for i in spaces.planning_free.iter_set() {
            assert!(f.visit_cost[i].is_finite() && f.visit_cost[i] > 0.0);
            assert!(f.dist2collision[i] >= 0.1 - 1e-12);
        }
        assert!(build_cost_field(&g, &spaces, 0.0, 1.0).is_err());
    }
}
