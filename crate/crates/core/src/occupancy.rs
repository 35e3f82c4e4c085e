//! Probabilistic occupancy belief with a latched free/occupied/unknown
//! classification, plus the eroded planning and control free spaces.
//!
//! Cells are updated with fixed log-odds increments, at most once per scan.
//! Once a cell is classified free or occupied it stays that way, so the free
//! and occupied sets only grow and the unknown set only shrinks.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use crate::distance::DistanceField;
use crate::error::{ExploreError, Result};
use crate::geometry::{Cell, GridSpec, Mask, Vec2};
use crate::raycast;
use crate::world::RangeScan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingParams {
    pub p_free: f64,
    pub p_occ: f64,
    /// Log-odds added to a cell a beam passed through.
    pub free_evidence: f64,
    /// Log-odds added to the cell a beam ended in.
    pub occupied_evidence: f64,
    /// Symmetric clamp on the accumulated log-odds.
    pub log_odds_limit: f64,
}

impl Default for MappingParams {
    fn default() -> Self {
        Self {
            p_free: 0.2,
            p_occ: 0.8,
            free_evidence: -0.85,
            occupied_evidence: 2.2,
            // keeps probabilities inside [0.01, 0.99]
            log_odds_limit: 99f64.ln(),
        }
    }
}

impl MappingParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.p_free && self.p_free < self.p_occ && self.p_occ <= 1.0) {
            return Err(ExploreError::config(
                "p_free/p_occ",
                format!("need 0 <= p_free < p_occ <= 1, got {} and {}", self.p_free, self.p_occ),
            ));
        }
        if !(self.free_evidence < 0.0 && self.occupied_evidence > 0.0 && self.log_odds_limit > 0.0) {
            return Err(ExploreError::config(
                "log_odds",
                "free evidence must be negative, occupied evidence and limit positive",
            ));
        }
        Ok(())
    }

    /// Classification of a fresh (unlatched) probability.
    pub fn classify_probability(&self, p: f64) -> CellState {
        if p <= self.p_free {
            CellState::Free
        } else if p >= self.p_occ {
            CellState::Occupied
        } else {
            CellState::Unknown
        }
    }
}

pub fn probability(log_odds: f64) -> f64 {
    1.0 / (1.0 + (-log_odds).exp())
}

pub fn log_odds(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    spec: GridSpec,
    params: MappingParams,
    log_odds: Vec<f64>,
    state: Vec<CellState>,
    // per-scan bookkeeping so a cell takes at most one update per scan
    free_mark: Vec<u32>,
    occ_mark: Vec<u32>,
    scans: u32,
    known: usize,
    revision: u64,
}

/// Disjoint free/occupied/unknown index sets covering the lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub free: Vec<usize>,
    pub occupied: Vec<usize>,
    pub unknown: Vec<usize>,
}

impl OccupancyGrid {
    /// All cells at probability 0.5.
    pub fn new(spec: GridSpec, params: MappingParams) -> Result<Self> {
        params.validate()?;
        let n = spec.len();
        let mut grid = Self {
            spec,
            params,
            log_odds: vec![0.0; n],
            state: vec![CellState::Unknown; n],
            free_mark: vec![0; n],
            occ_mark: vec![0; n],
            scans: 0,
            known: 0,
            revision: 0,
        };
        for i in 0..n {
            grid.relatch(i);
        }
        Ok(grid)
    }

    /// Grid whose cells are already classified; probabilities are set to a
    /// representative value inside each class.
    pub fn from_states(spec: GridSpec, params: MappingParams, states: &[CellState]) -> Result<Self> {
        if states.len() != spec.len() {
            return Err(ExploreError::Dimension {
                expected: format!("{} cells", spec.len()),
                actual: format!("{} cells", states.len()),
            });
        }
        let mut grid = Self::new(spec, params)?;
        for (i, s) in states.iter().enumerate() {
            let p = match s {
                CellState::Free => params.p_free * 0.5,
                CellState::Occupied => 0.5 * (1.0 + params.p_occ),
                CellState::Unknown => 0.5 * (params.p_free + params.p_occ),
            };
            grid.log_odds[i] = log_odds(p);
            grid.relatch(i);
        }
        Ok(grid)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn params(&self) -> &MappingParams {
        &self.params
    }

    pub fn probability(&self, index: usize) -> f64 {
        probability(self.log_odds[index])
    }

    pub fn state(&self, index: usize) -> CellState {
        self.state[index]
    }

    pub fn states(&self) -> &[CellState] {
        &self.state
    }

    pub fn is_free(&self, index: usize) -> bool {
        self.state[index] == CellState::Free
    }

    /// Bumped whenever any cell changes class.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Overwrites a cell probability and re-derives its class; latched
    /// classes are kept.
    pub fn set_probability(&mut self, index: usize, p: f64) {
        let limit = self.params.log_odds_limit;
        self.log_odds[index] = log_odds(p.clamp(1e-12, 1.0 - 1e-12)).clamp(-limit, limit);
        self.relatch(index);
    }

    fn relatch(&mut self, index: usize) {
        if self.state[index] != CellState::Unknown {
            return;
        }
        let next = self.params.classify_probability(self.probability(index));
        if next != CellState::Unknown {
            self.state[index] = next;
            self.known += 1;
            self.revision += 1;
        }
    }

    /// Applies one scan: cells a beam passed through get free evidence, the
    /// cell a beam stopped in gets occupied evidence. Returns how many cells
    /// changed class.
    pub fn integrate_scan(&mut self, scan: &RangeScan) -> Result<usize> {
        if self.spec.checked_index(self.spec.cell_at(scan.origin)).is_none() {
            return Err(ExploreError::Dimension {
                expected: format!(
                    "scan origin inside {:.3} x {:.3} m lattice",
                    self.spec.width as f64 * self.spec.resolution,
                    self.spec.height as f64 * self.spec.resolution
                ),
                actual: format!("({}, {})", scan.origin.x, scan.origin.y),
            });
        }
        if scan.bearings.len() != scan.ranges.len() || scan.ranges.len() != scan.hits.len() {
            return Err(ExploreError::Dimension {
                expected: format!("{} beams", scan.bearings.len()),
                actual: format!("{} ranges / {} hit flags", scan.ranges.len(), scan.hits.len()),
            });
        }

        self.scans = self.scans.wrapping_add(1).max(1);
        let stamp = self.scans;
        let mut touched = Vec::new();
        let spec = self.spec;
        for ((&bearing, &range), &hit) in scan.bearings.iter().zip(&scan.ranges).zip(&scan.hits) {
            raycast::walk::<()>(
                spec.resolution,
                scan.origin,
                Vec2::from_angle(bearing),
                range,
                |cell, entry| {
                    let Some(i) = spec.checked_index(cell) else {
                        return ControlFlow::Continue(());
                    };
                    if entry < range || !hit {
                        if self.free_mark[i] != stamp {
                            self.free_mark[i] = stamp;
                            touched.push(i);
                        }
                    } else if self.occ_mark[i] != stamp {
                        self.occ_mark[i] = stamp;
                        touched.push(i);
                    }
                    ControlFlow::Continue(())
                },
            );
        }

        let limit = self.params.log_odds_limit;
        let before = self.known;
        touched.sort_unstable();
        touched.dedup();
        for i in touched {
            let delta = if self.occ_mark[i] == stamp {
                self.params.occupied_evidence
            } else {
                self.params.free_evidence
            };
            self.log_odds[i] = (self.log_odds[i] + delta).clamp(-limit, limit);
            self.relatch(i);
        }
        Ok(self.known - before)
    }

    pub fn classify(&self) -> Partition {
        let mut part = Partition {
            free: Vec::new(),
            occupied: Vec::new(),
            unknown: Vec::new(),
        };
        for (i, s) in self.state.iter().enumerate() {
            match s {
                CellState::Free => part.free.push(i),
                CellState::Occupied => part.occupied.push(i),
                CellState::Unknown => part.unknown.push(i),
            }
        }
        part
    }

    pub fn mask_of(&self, state: CellState) -> Mask {
        Mask::from_vec(
            self.spec.width,
            self.spec.height,
            self.state.iter().map(|s| *s == state).collect(),
        )
    }

    /// Known (free + occupied) cells over all cells.
    pub fn mapping_percentage(&self) -> f64 {
        if self.state.is_empty() {
            return 0.0;
        }
        self.known as f64 / self.state.len() as f64
    }

    /// Plain-text graymap: 0 occupied, 128 unknown, 255 free; top row first.
    pub fn to_pgm(&self) -> String {
        let (w, h) = (self.spec.width, self.spec.height);
        let mut out = String::with_capacity(w * h * 4 + 32);
        let _ = writeln!(out, "P2\n{w} {h}\n255");
        for y in (0..h).rev() {
            let row: Vec<&str> = (0..w)
                .map(|x| match self.state[y * w + x] {
                    CellState::Occupied => "0",
                    CellState::Unknown => "128",
                    CellState::Free => "255",
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Cells whose closed disc of `radius` (evaluated on cell centers) lies
/// entirely inside `cells`. Cells beyond the lattice count as outside.
pub fn erode(spec: &GridSpec, cells: &Mask, radius: f64) -> Mask {
    let outside = Mask::from_vec(spec.width, spec.height, cells.as_slice().iter().map(|b| !b).collect());
    let field = DistanceField::compute_distances(*spec, &outside, true);
    threshold(&field, cells, radius)
}

fn threshold(field: &DistanceField, cells: &Mask, radius: f64) -> Mask {
    let spec = field.spec();
    let r = radius / spec.resolution;
    let r2 = r * r;
    Mask::from_vec(
        spec.width,
        spec.height,
        (0..spec.len())
            .map(|i| cells.get(i) && field.squared_cells(i) > r2)
            .collect(),
    )
}

/// Inclusive cell bounding box of `cells`.
pub(crate) fn bounding_box(spec: &GridSpec, cells: &[usize]) -> Option<(Cell, Cell)> {
    let first = spec.cell_of_index(*cells.first()?);
    Some(cells.iter().fold((first, first), |(lo, hi), &i| {
        let c = spec.cell_of_index(i);
        (
            Cell::new(lo.x.min(c.x), lo.y.min(c.y)),
            Cell::new(hi.x.max(c.x), hi.y.max(c.y)),
        )
    }))
}

/// Re-erodes every cell whose disc can reach the box `[lo, hi]`, by testing
/// the disc cells directly. Returns whether any cell changed.
fn erode_window(spec: &GridSpec, states: &[CellState], eroded: &mut Mask, radius: f64, lo: Cell, hi: Cell) -> bool {
    let r = radius / spec.resolution;
    let r2 = r * r;
    let reach = r.floor() as i32 + 1;
    let mut offsets = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if ((dx * dx + dy * dy) as f64) <= r2 {
                offsets.push((dx, dy));
            }
        }
    }
    // farthest first: they fail earliest near walls
    offsets.sort_by_key(|&(dx, dy)| std::cmp::Reverse(dx * dx + dy * dy));
    let free = |c: Cell| spec.checked_index(c).is_some_and(|i| states[i] == CellState::Free);
    let x0 = (lo.x - reach).max(0);
    let y0 = (lo.y - reach).max(0);
    let x1 = (hi.x + reach).min(spec.width as i32 - 1);
    let y1 = (hi.y + reach).min(spec.height as i32 - 1);
    let mut changed = false;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let c = Cell::new(x, y);
            let inside = free(c) && offsets.iter().all(|&(dx, dy)| free(c.offset(dx, dy)));
            let i = spec.index(c);
            if eroded.get(i) != inside {
                eroded.set(i, inside);
                changed = true;
            }
        }
    }
    changed
}

/// Eroded free spaces for planning (`radius + clearance`) and control
/// (`radius`). Also carries the distance field to the control-space exterior
/// that the path follower queries every tick.
#[derive(Debug, Clone)]
pub struct SafeSpaces {
    pub planning_free: Mask,
    pub control_free: Mask,
    pub robot_radius: f64,
    pub clearance: f64,
    pub control_distance: DistanceField,
}

impl SafeSpaces {
    pub fn compute(grid: &OccupancyGrid, robot_radius: f64, clearance: f64) -> Self {
        let spec = *grid.spec();
        let free = grid.mask_of(CellState::Free);
        let not_free = Mask::from_vec(spec.width, spec.height, free.as_slice().iter().map(|b| !b).collect());
        let to_obstacle = DistanceField::compute_distances(spec, &not_free, true);
        let planning_free = threshold(&to_obstacle, &free, robot_radius + clearance);
        let control_free = threshold(&to_obstacle, &free, robot_radius);
        let unsafe_cells = Mask::from_vec(
            spec.width,
            spec.height,
            control_free.as_slice().iter().map(|b| !b).collect(),
        );
        let control_distance = DistanceField::compute(spec, &unsafe_cells, true);
        Self {
            planning_free,
            control_free,
            robot_radius,
            clearance,
            control_distance,
        }
    }

    /// Brings the spaces up to date after the cells in `changed` switched
    /// class. Only the neighborhood of the changed cells is re-eroded; the
    /// clearance field is rebuilt only if the control space changed.
    pub fn refresh(&mut self, grid: &OccupancyGrid, changed: &[usize]) {
        let spec = *grid.spec();
        let Some((lo, hi)) = bounding_box(&spec, changed) else {
            return;
        };
        let states = grid.states();
        let control_changed = erode_window(&spec, states, &mut self.control_free, self.robot_radius, lo, hi);
        erode_window(
            &spec,
            states,
            &mut self.planning_free,
            self.robot_radius + self.clearance,
            lo,
            hi,
        );
        if control_changed {
            let unsafe_cells = Mask::from_vec(
                spec.width,
                spec.height,
                self.control_free.as_slice().iter().map(|b| !b).collect(),
            );
            self.control_distance = DistanceField::compute(spec, &unsafe_cells, true);
        }
    }

    pub fn spec(&self) -> &GridSpec {
        self.control_distance.spec()
    }

    pub fn in_planning(&self, p: Vec2) -> bool {
        self.planning_free.at(self.spec().cell_at(p))
    }

    pub fn in_control(&self, p: Vec2) -> bool {
        self.control_free.at(self.spec().cell_at(p))
    }
}

/// Convenience wrapper matching the mapping-space definitions.
pub fn safe_spaces(grid: &OccupancyGrid, robot_radius: f64, clearance: f64) -> SafeSpaces {
    SafeSpaces::compute(grid, robot_radius, clearance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cell;

    fn spec(w: usize, h: usize) -> GridSpec {
        GridSpec::new(w, h, 0.1)
    }

    fn beam_scan(origin: Vec2, range: f64, hit: bool) -> RangeScan {
        RangeScan {
            origin,
            bearings: vec![0.0],
            ranges: vec![range],
            hits: vec![hit],
            max_range: 1.5,
        }
    }

    #[test]
    fn fresh_grid_is_unknown() {
        let g = OccupancyGrid::new(spec(4, 4), MappingParams::default()).unwrap();
        let p = g.classify();
        assert_eq!(p.unknown.len(), 16);
        assert_eq!(g.mapping_percentage(), 0.0);
    }

    #[test]
    fn threshold_classification() {
        let mut g = OccupancyGrid::new(spec(2, 1), MappingParams::default()).unwrap();
        g.set_probability(0, 0.1);
        g.set_probability(1, 0.5);
        assert_eq!(g.state(0), CellState::Free);
        assert_eq!(g.state(1), CellState::Unknown);
        // latched: a later high probability does not flip the class
        g.set_probability(0, 0.95);
        assert_eq!(g.state(0), CellState::Free);
    }

    #[test]
    fn rejects_bad_thresholds() {
        let params = MappingParams {
            p_free: 0.8,
            p_occ: 0.2,
            ..Default::default()
        };
        assert!(OccupancyGrid::new(spec(2, 2), params).is_err());
    }

    #[test]
    fn free_cells_latch_after_two_scans() {
        // logit(0.2) = -1.386; one observation gives -0.85, two give -1.70
        let params = MappingParams::default();
        let k = (log_odds(params.p_free) / params.free_evidence).ceil() as usize;
        assert_eq!(k, 2);

        let mut g = OccupancyGrid::new(spec(30, 3), params).unwrap();
        let scan = beam_scan(Vec2::new(0.0, 0.15), 1.0, true);
        let beam_cells: Vec<usize> = (0..10).map(|x| g.spec().index(Cell::new(x, 1))).collect();
        let wall = g.spec().index(Cell::new(10, 1));

        g.integrate_scan(&scan).unwrap();
        assert!(beam_cells.iter().all(|&i| g.state(i) == CellState::Unknown));
        assert_eq!(g.state(wall), CellState::Occupied);

        g.integrate_scan(&scan).unwrap();
        assert!(beam_cells.iter().all(|&i| g.state(i) == CellState::Free));
        assert!((g.probability(beam_cells[0]) - probability(2.0 * params.free_evidence)).abs() < 1e-12);
    }

    #[test]
    fn miss_gives_no_occupied_evidence() {
        let mut g = OccupancyGrid::new(spec(30, 3), MappingParams::default()).unwrap();
        let scan = beam_scan(Vec2::new(0.0, 0.15), 1.5, false);
        for _ in 0..3 {
            g.integrate_scan(&scan).unwrap();
        }
        assert!(g.classify().occupied.is_empty());
        assert!(g.probability(g.spec().index(Cell::new(15, 1))) < 0.5);
    }

    #[test]
    fn probabilities_clamped() {
        let mut g = OccupancyGrid::new(spec(30, 3), MappingParams::default()).unwrap();
        let scan = beam_scan(Vec2::new(0.0, 0.15), 1.0, true);
        for _ in 0..50 {
            g.integrate_scan(&scan).unwrap();
        }
        let p_free = g.probability(g.spec().width);
        let p_wall = g.probability(g.spec().index(Cell::new(10, 1)));
        assert!((p_free - 0.01).abs() < 1e-12);
        assert!((p_wall - 0.99).abs() < 1e-12);
    }

    #[test]
    fn off_lattice_scan_rejected() {
        let mut g = OccupancyGrid::new(spec(5, 5), MappingParams::default()).unwrap();
        let scan = beam_scan(Vec2::new(-1.0, 0.2), 1.0, true);
        assert!(matches!(g.integrate_scan(&scan), Err(ExploreError::Dimension { .. })));
    }

    #[test]
    fn mapping_percentage_ratio() {
        let spec = GridSpec::new(10, 10, 0.1);
        let states: Vec<CellState> = (0..100)
            .map(|i| match i {
                0..=19 => CellState::Free,
                20..=29 => CellState::Occupied,
                _ => CellState::Unknown,
            })
            .collect();
        let g = OccupancyGrid::from_states(spec, MappingParams::default(), &states).unwrap();
        assert!((g.mapping_percentage() - 0.30).abs() < 1e-12);
        let all_free = OccupancyGrid::from_states(spec, MappingParams::default(), &[CellState::Free; 100]).unwrap();
        assert_eq!(all_free.mapping_percentage(), 1.0);
    }

    #[test]
    fn erode_radius_zero_is_identity() {
        let s = GridSpec::new(6, 5, 1.0);
        let m = Mask::from_fn(6, 5, |c| (c.x * 7 + c.y * 3) % 4 != 0);
        assert_eq!(erode(&s, &m, 0.0), m);
    }

    #[test]
    fn erode_five_by_five_by_one_cell() {
        let s = GridSpec::new(5, 5, 0.1);
        let eroded = erode(&s, &Mask::new(5, 5, true), 0.1);
        let want = Mask::from_fn(5, 5, |c| (1..=3).contains(&c.x) && (1..=3).contains(&c.y));
        assert_eq!(eroded, want);
    }

    #[test]
    fn point_robot_limit_planning_equals_control() {
        let s = GridSpec::new(12, 12, 0.1);
        let states: Vec<CellState> = (0..144)
            .map(|i| {
                let c = s.cell_of_index(i);
                if c.x == 0 || c.y == 0 || c.x == 11 || c.y == 11 || (c.x == 5 && c.y < 6) {
                    CellState::Occupied
                } else {
                    CellState::Free
                }
            })
            .collect();
        let g = OccupancyGrid::from_states(s, MappingParams::default(), &states).unwrap();
        let spaces = safe_spaces(&g, 0.15, 1e-9);
        assert_eq!(spaces.planning_free, spaces.control_free);
        let spaces = safe_spaces(&g, 0.15, 0.1);
        assert!(spaces.planning_free.is_subset_of(&spaces.control_free));
        assert!(spaces.planning_free.count() < spaces.control_free.count());
    }

    #[test]
    fn pgm_levels() {
        let s = GridSpec::new(3, 1, 0.1);
        let g = OccupancyGrid::from_states(
            s,
            MappingParams::default(),
            &[CellState::Occupied, CellState::Unknown, CellState::Free],
        )
        .unwrap();
        assert_eq!(g.to_pgm(), "P2\n3 1\n255\n0 128 255\n");
    }
}
