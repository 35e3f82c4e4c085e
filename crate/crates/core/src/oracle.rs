//! Brute-force reference implementations and randomized equivalence suites.
//!
//! Each oracle is written from the definitions alone, without sharing code
//! with the production path: erosion and distance transforms by exhaustive
//! pairwise search, travel costs by Bellman-Ford relaxation, visibility by
//! clipping every probe segment against every nearby cell square, and range
//! readings by marching along the beam in small steps.

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::costmap::{build_cost_field, CostField, CostToGo};
use crate::distance::DistanceField;
use crate::error::{ExploreError, Result};
use crate::frontier::{cluster_frontiers, detect_frontiers};
use crate::geometry::{Cell, GridSpec, Mask, Vec2};
use crate::occupancy::{erode, CellState, MappingParams, OccupancyGrid, SafeSpaces};
use crate::viewpoint::{viewpoint_set, visible_frontiers, ViewpointQuery};
use crate::world::{ray_cast, GroundTruthWorld, SensorParams};

/// Squares are grown by this much (meters) before clipping, so that a segment
/// grazing an edge or corner counts as touching it.
const CLIP_TOL: f64 = 1e-9;

/// Relative tolerance for comparing path costs summed in different orders.
const COST_TOL: f64 = 1e-9;

/// Cells whose closed disc of `radius` (cell centers) lies inside `cells`.
pub fn erode_bruteforce(spec: &GridSpec, cells: &Mask, radius: f64) -> Mask {
    let r = radius / spec.resolution;
    let reach = r.floor() as i32 + 1;
    Mask::from_fn(spec.width, spec.height, |c| {
        if !cells.at(c) {
            return false;
        }
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                if ((dx * dx + dy * dy) as f64) <= r * r {
                    let n = c.offset(dx, dy);
                    if !spec.contains(n) || !cells.at(n) {
                        return false;
                    }
                }
            }
        }
        true
    })
}

/// Distance (meters) from every cell center to the nearest site center,
/// optionally treating every cell beyond the lattice as a site.
pub fn distance_bruteforce(spec: &GridSpec, sites: &Mask, outside_is_site: bool) -> Vec<f64> {
    let site_list: Vec<Cell> = sites.iter_set().map(|i| spec.cell_of_index(i)).collect();
    (0..spec.len())
        .map(|i| {
            let c = spec.cell_of_index(i);
            let mut best = f64::INFINITY;
            for s in &site_list {
                let dx = (s.x - c.x) as f64;
                let dy = (s.y - c.y) as f64;
                best = best.min((dx * dx + dy * dy).sqrt());
            }
            if outside_is_site {
                let edge = [c.x + 1, spec.width as i32 - c.x, c.y + 1, spec.height as i32 - c.y];
                best = best.min(*edge.iter().min().unwrap() as f64);
            }
            best * spec.resolution
        })
        .collect()
}

/// Single-source travel costs by repeated relaxation of every lattice edge.
pub fn bellman_ford(field: &CostField, source: usize) -> Vec<f64> {
    let spec = *field.spec();
    let n = spec.len();
    let mut cost = vec![f64::INFINITY; n];
    if !field.visit_cost[source].is_finite() {
        return cost;
    }
    cost[source] = 0.0;
    let mut edges = Vec::new();
    for a in 0..n {
        if !field.visit_cost[a].is_finite() {
            continue;
        }
        let ca = spec.cell_of_index(a);
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let Some(b) = spec.checked_index(ca.offset(dx, dy)) else {
                    continue;
                };
                if !field.visit_cost[b].is_finite() {
                    continue;
                }
                let len = ((dx * dx + dy * dy) as f64).sqrt() * spec.resolution;
                edges.push((a, b, (field.visit_cost[a] + field.visit_cost[b]) / 2.0 * len));
            }
        }
    }
    for _ in 0..n {
        let mut changed = false;
        for &(a, b, w) in &edges {
            if cost[a] + w < cost[b] {
                cost[b] = cost[a] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    cost
}

/// Whether the closed segment `[p, q]` meets the closed box `[lo, hi]`
/// (Liang-Barsky clipping).
pub fn segment_meets_box(p: Vec2, q: Vec2, lo: Vec2, hi: Vec2) -> bool {
    let d = q - p;
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for (pk, qk) in [
        (-d.x, p.x - lo.x),
        (d.x, hi.x - p.x),
        (-d.y, p.y - lo.y),
        (d.y, hi.y - p.y),
    ] {
        if pk == 0.0 {
            if qk < 0.0 {
                return false;
            }
        } else {
            let r = qk / pk;
            if pk < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    t0 <= t1
}

/// Probe-rule visibility of cell `f` from `v`, evaluated by clipping each
/// probe segment against every cell square in its bounding box.
pub fn is_visible_bruteforce(grid: &OccupancyGrid, f: usize, v: Vec2, eta: f64, sensing_range: f64) -> bool {
    let spec = grid.spec();
    let res = spec.resolution;
    let fc = spec.cell_of_index(f);
    let target = Vec2::new((fc.x as f64 + 0.5) * res, (fc.y as f64 + 0.5) * res);
    if (target - v).norm() + eta > sensing_range {
        return false;
    }
    (0..9).all(|k| {
        let u = if k == 0 {
            v
        } else {
            let a = (k - 1) as f64 * FRAC_PI_4;
            Vec2::new(v.x + eta * a.cos(), v.y + eta * a.sin())
        };
        let x0 = (target.x.min(u.x) / res).floor() as i32 - 1;
        let x1 = (target.x.max(u.x) / res).floor() as i32 + 1;
        let y0 = (target.y.min(u.y) / res).floor() as i32 - 1;
        let y1 = (target.y.max(u.y) / res).floor() as i32 + 1;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let lo = Vec2::new(x as f64 * res - CLIP_TOL, y as f64 * res - CLIP_TOL);
                let hi = Vec2::new((x + 1) as f64 * res + CLIP_TOL, (y + 1) as f64 * res + CLIP_TOL);
                if !segment_meets_box(target, u, lo, hi) {
                    continue;
                }
                let free = spec
                    .checked_index(Cell::new(x, y))
                    .is_some_and(|i| grid.state(i) == CellState::Free);
                if !free {
                    return false;
                }
            }
        }
        true
    })
}

/// Every planning cell, anywhere on the lattice, that sees some cell of `region`.
pub fn viewpoint_set_bruteforce(
    grid: &OccupancyGrid,
    region_cells: &[usize],
    planning: &Mask,
    eta: f64,
    sensing_range: f64,
) -> Vec<usize> {
    let spec = grid.spec();
    planning
        .iter_set()
        .filter(|&i| {
            let v = spec.center_of_index(i);
            region_cells
                .iter()
                .any(|&f| is_visible_bruteforce(grid, f, v, eta, sensing_range))
        })
        .collect()
}

/// Free cells with an unknown edge neighbor, or an unknown diagonal neighbor
/// whose two shared edge cells are both non-occupied.
pub fn frontiers_bruteforce(grid: &OccupancyGrid) -> Vec<usize> {
    let spec = grid.spec();
    let state = |c: Cell| spec.checked_index(c).map(|i| grid.state(i));
    (0..spec.len())
        .filter(|&i| {
            if grid.state(i) != CellState::Free {
                return false;
            }
            let c = spec.cell_of_index(i);
            let edge = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(dx, dy)| state(c.offset(dx, dy)) == Some(CellState::Unknown));
            let diag = [(1, 1), (1, -1), (-1, 1), (-1, -1)].iter().any(|&(dx, dy)| {
                state(c.offset(dx, dy)) == Some(CellState::Unknown)
                    && state(c.offset(dx, 0)) != Some(CellState::Occupied)
                    && state(c.offset(0, dy)) != Some(CellState::Occupied)
            });
            edge || diag
        })
        .collect()
}

/// Range reading by marching in steps of `step` meters. Returns the first
/// sampled distance that lands in an occupied cell, or `max_range`.
pub fn ray_march(world: &GroundTruthWorld, origin: Vec2, bearing: f64, max_range: f64, step: f64) -> (f64, bool) {
    let dir = Vec2::new(bearing.cos(), bearing.sin());
    let n = (max_range / step).ceil() as usize;
    for k in 0..=n {
        let t = (k as f64 * step).min(max_range);
        let p = origin + dir * t;
        let c = Cell::new(
            (p.x / world.spec.resolution).floor() as i32,
            (p.y / world.spec.resolution).floor() as i32,
        );
        if world.is_occupied(c) {
            return (t, true);
        }
    }
    (max_range, false)
}

/// Outcome of one randomized suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub instances: usize,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &'static str) -> Self {
        Self {
            suite,
            instances: 0,
            checks: 0,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checks > 0
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.failures.len() < 20 {
            self.failures.push(what());
        }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} instances, {} checks, {} failures",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.instances,
            self.checks,
            self.failures.len()
        )
    }
}

pub const SUITES: [&str; 6] = ["erosion", "distance", "dijkstra", "visibility", "frontier", "raycast"];

/// Runs one named suite (or `all`) over `instances` random cases.
pub fn run_suite(name: &str, instances: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    let one = |s: &str| -> Result<SuiteReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match s {
            "erosion" => erosion_suite(&mut rng, instances),
            "distance" => distance_suite(&mut rng, instances)?,
            "dijkstra" => dijkstra_suite(&mut rng, instances)?,
            "visibility" => visibility_suite(&mut rng, instances)?,
            "frontier" => frontier_suite(&mut rng, instances),
            "raycast" => raycast_suite(&mut rng, instances)?,
            other => {
                return Err(ExploreError::config(
                    "suite",
                    format!("unknown suite `{other}`; expected one of {} or all", SUITES.join(", ")),
                ))
            }
        })
    };
    if name == "all" {
        SUITES.iter().map(|s| one(s)).collect()
    } else {
        Ok(vec![one(name)?])
    }
}

/// Random tri-state map of at most 20x20 cells at 0.1 m.
pub fn random_grid(rng: &mut impl Rng) -> OccupancyGrid {
    let w = rng.gen_range(3..=20);
    let h = rng.gen_range(3..=20);
    let spec = GridSpec::new(w, h, 0.1);
    let p_occ = rng.gen_range(0.0..0.25);
    let p_unk = rng.gen_range(0.0..0.35);
    let states: Vec<CellState> = (0..spec.len())
        .map(|_| {
            let u: f64 = rng.gen();
            if u < p_occ {
                CellState::Occupied
            } else if u < p_occ + p_unk {
                CellState::Unknown
            } else {
                CellState::Free
            }
        })
        .collect();
    OccupancyGrid::from_states(spec, MappingParams::default(), &states).expect("valid random map")
}

fn random_mask(rng: &mut impl Rng, spec: &GridSpec, density: f64) -> Mask {
    Mask::from_fn(spec.width, spec.height, |_| rng.gen_bool(density))
}

fn erosion_suite(rng: &mut ChaCha8Rng, instances: usize) -> SuiteReport {
    let mut report = SuiteReport::new("erosion");
    for k in 0..instances {
        report.instances += 1;
        let grid = random_grid(rng);
        let spec = *grid.spec();
        let free = grid.mask_of(CellState::Free);
        let radius = rng.gen_range(0.0..0.45);
        let got = erode(&spec, &free, radius);
        let want = erode_bruteforce(&spec, &free, radius);
        report.check(got == want, || format!("instance {k}: erode radius {radius}"));

        let r = rng.gen_range(0.0..0.3);
        let c = rng.gen_range(0.0..0.15);
        let spaces = SafeSpaces::compute(&grid, r, c);
        report.check(spaces.planning_free == erode_bruteforce(&spec, &free, r + c), || {
            format!("instance {k}: planning space r={r} c={c}")
        });
        report.check(spaces.control_free == erode_bruteforce(&spec, &free, r), || {
            format!("instance {k}: control space r={r}")
        });
    }
    report
}

fn fields_match(got: impl Fn(usize) -> f64, want: &[f64], tol: f64) -> Option<usize> {
    want.iter().enumerate().position(|(i, &w)| {
        let g = got(i);
        !((g.is_infinite() && w.is_infinite()) || (g - w).abs() <= tol)
    })
}

fn distance_suite(rng: &mut ChaCha8Rng, instances: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("distance");
    for k in 0..instances {
        report.instances += 1;
        let grid = random_grid(rng);
        let spec = *grid.spec();
        let half = 0.5 * spec.resolution;

        let density = rng.gen_range(0.0..0.3);
        let sites = random_mask(rng, &spec, density);
        for outside in [false, true] {
            let field = DistanceField::compute(spec, &sites, outside);
            let want = distance_bruteforce(&spec, &sites, outside);
            let bad = fields_match(|i| field.distance(i), &want, half);
            report.check(bad.is_none(), || {
                format!("instance {k}: raw transform outside={outside} at {bad:?}")
            });
        }

        let spaces = SafeSpaces::compute(&grid, rng.gen_range(0.0..0.2), rng.gen_range(0.0..0.1));
        let alpha = rng.gen_range(0.2..3.0);
        let beta = rng.gen_range(0.2..3.0);
        let field = build_cost_field(&grid, &spaces, alpha, beta)?;
        let unknown = grid.mask_of(CellState::Unknown);
        let want_u: Vec<f64> = distance_bruteforce(&spec, &unknown, false)
            .into_iter()
            .map(|d| d.min(alpha))
            .collect();
        let bad = fields_match(|i| field.dist2unknown[i], &want_u, half);
        report.check(bad.is_none(), || {
            format!("instance {k}: distance to unknown at {bad:?}")
        });

        let blocked = Mask::from_fn(spec.width, spec.height, |c| !spaces.planning_free.at(c));
        let want_c: Vec<f64> = distance_bruteforce(&spec, &blocked, true)
            .into_iter()
            .map(|d| d.min(beta))
            .collect();
        let bad = fields_match(|i| field.dist2collision[i], &want_c, half);
        report.check(bad.is_none(), || {
            format!("instance {k}: distance to collision at {bad:?}")
        });
    }
    Ok(report)
}

fn costs_equal(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= COST_TOL * a.abs().max(b.abs()).max(1.0)
}

fn dijkstra_suite(rng: &mut ChaCha8Rng, instances: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("dijkstra");
    for k in 0..instances {
        report.instances += 1;
        let grid = random_grid(rng);
        let spec = *grid.spec();
        let field = if k % 2 == 0 {
            let spaces = SafeSpaces::compute(&grid, rng.gen_range(0.0..0.1), 0.0);
            build_cost_field(&grid, &spaces, rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0))?
        } else {
            let costs = (0..spec.len())
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        f64::INFINITY
                    } else {
                        rng.gen_range(0.05..5.0)
                    }
                })
                .collect();
            CostField::from_visit_costs(spec, costs)?
        };
        let planning: Vec<usize> = field.planning.iter_set().collect();
        if planning.is_empty() {
            report.check(true, String::new);
            continue;
        }
        let source = planning[rng.gen_range(0..planning.len())];
        let c = spec.cell_of_index(source);
        let start = Vec2::new(
            (c.x as f64 + rng.gen_range(0.0..1.0)) * spec.resolution,
            (c.y as f64 + rng.gen_range(0.0..1.0)) * spec.resolution,
        );
        let reach = CostToGo::compute(&field, start);
        let want = bellman_ford(&field, source);
        let bad = (0..spec.len()).find(|&i| !costs_equal(reach.cost(i), want[i]));
        report.check(bad.is_none(), || {
            let i = bad.unwrap_or(0);
            format!("instance {k}: cell {i} dijkstra {} vs {}", reach.cost(i), want[i])
        });

        // the reconstructed path realizes the reported cost
        let goal = planning[rng.gen_range(0..planning.len())];
        if let Some(path) = reach.path_to(goal) {
            report.check(costs_equal(path.total_cost(), want[goal]), || {
                format!("instance {k}: path cost {} vs {}", path.total_cost(), want[goal])
            });
        } else {
            report.check(want[goal].is_infinite(), || {
                format!("instance {k}: missing path to {goal}")
            });
        }
    }
    Ok(report)
}

fn visibility_suite(rng: &mut ChaCha8Rng, instances: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("visibility");
    for k in 0..instances {
        report.instances += 1;
        let grid = random_grid(rng);
        let spec = *grid.spec();
        let mut query = ViewpointQuery::new(spec.resolution, rng.gen_range(0.5..1.2));
        query.eta = rng.gen_range(0.05..0.25);
        let frontiers = detect_frontiers(&grid);
        let free: Vec<usize> = grid.mask_of(CellState::Free).iter_set().collect();
        if free.is_empty() {
            report.check(frontiers.is_empty(), || {
                format!("instance {k}: frontier without free cells")
            });
            continue;
        }
        for _ in 0..3 {
            let v = spec.center_of_index(free[rng.gen_range(0..free.len())]);
            let got = visible_frontiers(&grid, &frontiers.cells, v, &query);
            let want: Vec<usize> = frontiers
                .cells
                .iter()
                .copied()
                .filter(|&f| is_visible_bruteforce(&grid, f, v, query.eta, query.sensing_range))
                .collect();
            report.check(got == want, || format!("instance {k}: visible set from {v:?}"));
        }
        let spaces = SafeSpaces::compute(&grid, rng.gen_range(0.0..0.15), 0.0);
        for region in cluster_frontiers(&spec, &frontiers.cells) {
            let got = viewpoint_set(&grid, &region, &spaces, &query);
            let want = viewpoint_set_bruteforce(
                &grid,
                &region.cells,
                &spaces.planning_free,
                query.eta,
                query.sensing_range,
            );
            report.check(got == want, || {
                format!("instance {k}: viewpoint set of region {}", region.id)
            });
        }
    }
    Ok(report)
}

fn frontier_suite(rng: &mut ChaCha8Rng, instances: usize) -> SuiteReport {
    let mut report = SuiteReport::new("frontier");
    for k in 0..instances {
        report.instances += 1;
        let grid = random_grid(rng);
        let got = detect_frontiers(&grid);
        report.check(got.cells == frontiers_bruteforce(&grid), || {
            format!("instance {k}: frontier set")
        });
    }
    report
}

fn raycast_suite(rng: &mut ChaCha8Rng, instances: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("raycast");
    for k in 0..instances {
        report.instances += 1;
        let w = rng.gen_range(3..=20);
        let h = rng.gen_range(3..=20);
        let spec = GridSpec::new(w, h, 0.1);
        let density = rng.gen_range(0.0..0.3);
        let occupied = random_mask(rng, &spec, density);
        let world = GroundTruthWorld {
            spec,
            occupied,
            sensor: SensorParams::default(),
        };
        let free: Vec<usize> = (0..spec.len()).filter(|&i| !world.occupied.get(i)).collect();
        if free.is_empty() {
            continue;
        }
        let step = spec.resolution / 50.0;
        for _ in 0..10 {
            let c = spec.cell_of_index(free[rng.gen_range(0..free.len())]);
            // keep away from cell boundaries so the origin cell is unambiguous
            let origin = Vec2::new(
                (c.x as f64 + rng.gen_range(0.05..0.95)) * spec.resolution,
                (c.y as f64 + rng.gen_range(0.05..0.95)) * spec.resolution,
            );
            let bearing = rng.gen_range(0.0..std::f64::consts::TAU);
            let max_range = rng.gen_range(0.2..2.5);
            let (got, got_hit) = ray_cast(&world, origin, bearing, max_range)?;
            let (want, want_hit) = ray_march(&world, origin, bearing, max_range, step);
            // marching can only overshoot the true entry, by at most one step;
            // a beam that grazes a cell for less than a step may be stepped over,
            // in which case a much finer march must confirm the graze
            let near = |d: f64| d >= got - 1e-9 && d - got <= step + 1e-9;
            let ok = match (got_hit, want_hit) {
                (true, true) if near(want) => true,
                (true, _) => {
                    let (fine, fine_hit) = ray_march(&world, origin, bearing, max_range, step / 64.0);
                    !fine_hit || near(fine)
                }
                (false, hit) => !hit,
            };
            report.check(ok, || {
                format!("instance {k}: ray from {origin:?} bearing {bearing}: cast ({got}, {got_hit}) march ({want}, {want_hit})")
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_basics() {
        let lo = Vec2::new(0.0, 0.0);
        let hi = Vec2::new(1.0, 1.0);
        assert!(segment_meets_box(Vec2::new(-1.0, 0.5), Vec2::new(2.0, 0.5), lo, hi));
        assert!(segment_meets_box(Vec2::new(-1.0, 1.0), Vec2::new(2.0, 1.0), lo, hi));
        assert!(!segment_meets_box(Vec2::new(-1.0, 1.5), Vec2::new(2.0, 1.5), lo, hi));
        assert!(segment_meets_box(Vec2::new(0.5, 0.5), Vec2::new(0.5, 0.5), lo, hi));
        assert!(!segment_meets_box(Vec2::new(1.5, 0.5), Vec2::new(3.0, 0.5), lo, hi));
    }

    #[test]
    fn brute_distance_counts_the_border() {
        let spec = GridSpec::new(5, 3, 1.0);
        let none = Mask::new(5, 3, false);
        let d = distance_bruteforce(&spec, &none, true);
        assert_eq!(d[spec.index(Cell::new(2, 1))], 2.0);
        assert!(distance_bruteforce(&spec, &none, false)[0].is_infinite());
    }

    #[test]
    fn small_suites_pass() {
        for report in run_suite("all", 8, 7).unwrap() {
            assert!(report.passed(), "{report}: {:?}", report.failures);
        }
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(matches!(run_suite("bogus", 1, 0), Err(ExploreError::Config { .. })));
    }
}
