//! Frontier detection, connected-component clustering and the information
//! measures used to score frontier regions.

use std::str::FromStr;

use crate::error::ExploreError;
use crate::geometry::{Cell, GridSpec, Mask};
use crate::occupancy::{CellState, OccupancyGrid};

/// Frontier cells of one map snapshot, as both a sorted index list and a mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierSet {
    pub cells: Vec<usize>,
    pub mask: Mask,
}

impl FrontierSet {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }
}

/// Whether the unknown cell at `(dx, dy)` from `cell` counts as adjacent.
///
/// Edge neighbors always do. A diagonal neighbor only does when neither of
/// the two cells sharing its corner with `cell` is occupied: a known wall
/// corner seals the diagonal, and a cell behind it can never be observed.
pub(crate) fn unknown_adjacent(spec: &GridSpec, states: &[CellState], cell: Cell, dx: i32, dy: i32) -> bool {
    let state_at = |c: Cell| spec.checked_index(c).map(|i| states[i]);
    if state_at(cell.offset(dx, dy)) != Some(CellState::Unknown) {
        return false;
    }
    if dx == 0 || dy == 0 {
        return true;
    }
    let side_a = state_at(cell.offset(dx, 0));
    let side_b = state_at(cell.offset(0, dy));
    side_a != Some(CellState::Occupied) && side_b != Some(CellState::Occupied)
}

/// Free cells with at least one adjacent unknown cell (8-neighborhood, with
/// diagonals sealed by occupied corners).
pub fn detect_frontiers(grid: &OccupancyGrid) -> FrontierSet {
    let spec = *grid.spec();
    let states = grid.states();
    let mut mask = Mask::new(spec.width, spec.height, false);
    let mut cells = Vec::new();
    for (i, s) in states.iter().enumerate() {
        if *s != CellState::Free {
            continue;
        }
        let cell = spec.cell_of_index(i);
        let frontier = crate::geometry::NEIGHBORS_8
            .iter()
            .any(|&(dx, dy)| unknown_adjacent(&spec, states, cell, dx, dy));
        if frontier {
            mask.set(i, true);
            cells.push(i);
        }
    }
    FrontierSet { cells, mask }
}

/// Updates `set` after the cells in `changed` switched class. Only cells
/// next to a changed cell can change frontier status.
pub fn refresh_frontiers(grid: &OccupancyGrid, set: &mut FrontierSet, changed: &[usize]) {
    let spec = *grid.spec();
    let Some((lo, hi)) = crate::occupancy::bounding_box(&spec, changed) else {
        return;
    };
    let states = grid.states();
    for y in (lo.y - 1).max(0)..=(hi.y + 1).min(spec.height as i32 - 1) {
        for x in (lo.x - 1).max(0)..=(hi.x + 1).min(spec.width as i32 - 1) {
            let cell = Cell::new(x, y);
            let i = spec.index(cell);
            let frontier = states[i] == CellState::Free
                && crate::geometry::NEIGHBORS_8
                    .iter()
                    .any(|&(dx, dy)| unknown_adjacent(&spec, states, cell, dx, dy));
            set.mask.set(i, frontier);
        }
    }
    set.cells = set.mask.iter_set().collect();
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierRegion {
    /// Position in the deterministic region ordering.
    pub id: usize,
    /// Sorted lattice indices.
    pub cells: Vec<usize>,
    /// Cell count times cell area, in m².
    pub volume: f64,
}

impl FrontierRegion {
    /// Inclusive bounding box `(min, max)` in cell coordinates.
    pub fn bounds(&self, spec: &GridSpec) -> (Cell, Cell) {
        let mut lo = Cell::new(i32::MAX, i32::MAX);
        let mut hi = Cell::new(i32::MIN, i32::MIN);
        for &i in &self.cells {
            let c = spec.cell_of_index(i);
            lo = Cell::new(lo.x.min(c.x), lo.y.min(c.y));
            hi = Cell::new(hi.x.max(c.x), hi.y.max(c.y));
        }
        (lo, hi)
    }
}

/// Partitions frontier cells into 8-connected regions, ordered by their first
/// cell in raster order (lowest row, then lowest column).
pub fn cluster_frontiers(spec: &GridSpec, cells: &[usize]) -> Vec<FrontierRegion> {
    let mut member = Mask::new(spec.width, spec.height, false);
    for &i in cells {
        member.set(i, true);
    }
    let mut sorted = cells.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut seen = Mask::new(spec.width, spec.height, false);
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for &seed in &sorted {
        if seen.get(seed) {
            continue;
        }
        seen.set(seed, true);
        stack.push(seed);
        let mut component = Vec::new();
        while let Some(i) = stack.pop() {
            component.push(i);
            for n in spec.neighbors8(i) {
                if member.get(n) && !seen.get(n) {
                    seen.set(n, true);
                    stack.push(n);
                }
            }
        }
        component.sort_unstable();
        let volume = component.len() as f64 * spec.cell_area();
        regions.push(FrontierRegion {
            id: regions.len(),
            cells: component,
            volume,
        });
    }
    regions
}

/// Binary entropy in nats, with `0 ln 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    term(p) + term(1.0 - p)
}

/// Sum of per-cell binary entropies times cell area.
pub fn region_entropy(grid: &OccupancyGrid, region: &FrontierRegion) -> f64 {
    let area = grid.spec().cell_area();
    region
        .cells
        .iter()
        .map(|&i| binary_entropy(grid.probability(i)))
        .sum::<f64>()
        * area
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InfoKind {
    Uniform,
    Volume,
    Entropy,
}

impl InfoKind {
    pub const ALL: [InfoKind; 3] = [InfoKind::Uniform, InfoKind::Volume, InfoKind::Entropy];

    pub fn as_str(self) -> &'static str {
        match self {
            InfoKind::Uniform => "uniform",
            InfoKind::Volume => "volume",
            InfoKind::Entropy => "entropy",
        }
    }
}

impl FromStr for InfoKind {
    type Err = ExploreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(InfoKind::Uniform),
            "volume" | "size" => Ok(InfoKind::Volume),
            "entropy" => Ok(InfoKind::Entropy),
            other => Err(ExploreError::config(
                "info",
                format!("unknown information measure `{other}`"),
            )),
        }
    }
}

pub fn info_measure(grid: &OccupancyGrid, region: &FrontierRegion, kind: InfoKind) -> f64 {
    match kind {
        InfoKind::Uniform => 1.0,
        InfoKind::Volume => region.volume,
        InfoKind::Entropy => region_entropy(grid, region),
    }
}
