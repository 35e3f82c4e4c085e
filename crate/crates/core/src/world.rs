//! Hidden ground-truth environment and the noiseless 360° range scanner.

use std::f64::consts::TAU;
use std::ops::ControlFlow;

use crate::error::{ExploreError, Result};
use crate::geometry::{Cell, GridSpec, Mask, Vec2};
use crate::raycast;

/// Simulated scanner constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorParams {
    /// Maximum sensing range in meters.
    pub sensing_range: f64,
    pub beam_count: usize,
    /// Scans per second.
    pub scan_rate: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            sensing_range: 1.5,
            beam_count: 360,
            scan_rate: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruthWorld {
    pub spec: GridSpec,
    pub occupied: Mask,
    pub sensor: SensorParams,
}

/// One full revolution of range readings taken from `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeScan {
    pub origin: Vec2,
    pub bearings: Vec<f64>,
    /// Hit distance, or the sensing range when nothing was hit.
    pub ranges: Vec<f64>,
    pub hits: Vec<bool>,
    /// Sensing range the scan was taken with.
    pub max_range: f64,
}

impl RangeScan {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

/// Parses the ASCII world format: a `resolution <meters>` header line, then
/// one row per line (`#` occupied, `.` free), first row at the top.
pub fn load_world(text: &str, sensor: SensorParams) -> Result<GroundTruthWorld> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let err = |line: usize, message: String| ExploreError::WorldParse { line, message };

    let (header_line, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| err(1, "missing `resolution` header".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("resolution") {
        return Err(err(
            header_line,
            format!("expected `resolution <meters>`, found `{header}`"),
        ));
    }
    let resolution: f64 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err(header_line, "resolution is not a number".into()))?;
    if parts.next().is_some() {
        return Err(err(header_line, "trailing tokens after resolution".into()));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(err(
            header_line,
            format!("resolution must be positive, got {resolution}"),
        ));
    }

    let mut rows: Vec<(usize, Vec<bool>)> = Vec::new();
    for (line_no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row = line
            .chars()
            .map(|ch| match ch {
                '#' => Ok(true),
                '.' => Ok(false),
                other => Err(err(line_no, format!("unexpected character `{other}`"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        if let Some((_, first)) = rows.first() {
            if row.len() != first.len() {
                return Err(err(
                    line_no,
                    format!("ragged row: {} cells, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push((line_no, row));
    }
    if rows.is_empty() {
        return Err(err(header_line + 1, "no raster rows".into()));
    }

    let height = rows.len();
    let width = rows[0].1.len();
    for (r, (line_no, row)) in rows.iter().enumerate() {
        let open = if r == 0 || r == height - 1 {
            !row.iter().all(|b| *b)
        } else {
            !(row[0] && row[width - 1])
        };
        if open {
            return Err(err(*line_no, "border cell is not occupied".into()));
        }
    }

    let spec = GridSpec::new(width, height, resolution);
    // first text row is the top (max y) row of the lattice
    let occupied = Mask::from_fn(width, height, |c| rows[height - 1 - c.y as usize].1[c.x as usize]);
    Ok(GroundTruthWorld { spec, occupied, sensor })
}

impl GroundTruthWorld {
    pub fn is_occupied(&self, cell: Cell) -> bool {
        match self.spec.checked_index(cell) {
            Some(i) => self.occupied.get(i),
            None => true,
        }
    }

    pub fn is_free_position(&self, p: Vec2) -> bool {
        !self.is_occupied(self.spec.cell_at(p))
    }

    pub fn free_cell_count(&self) -> usize {
        self.occupied.len() - self.occupied.count()
    }

    /// Renders back to the ASCII world format.
    pub fn to_text(&self) -> String {
        let mut out = format!("resolution {}\n", self.spec.resolution);
        for y in (0..self.spec.height).rev() {
            for x in 0..self.spec.width {
                let occ = self.occupied.get(y * self.spec.width + x);
                out.push(if occ { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

/// Range to the first occupied cell boundary along `bearing`, truncated at
/// `max_range`. The flag is false iff the ray was truncated.
pub fn ray_cast(world: &GroundTruthWorld, origin: Vec2, bearing: f64, max_range: f64) -> Result<(f64, bool)> {
    if !world.is_free_position(origin) {
        return Err(ExploreError::InvalidOrigin(origin));
    }
    let hit = raycast::walk(
        world.spec.resolution,
        origin,
        Vec2::from_angle(bearing),
        max_range,
        |cell, entry| {
            if world.is_occupied(cell) {
                ControlFlow::Break(entry)
            } else {
                ControlFlow::Continue(())
            }
        },
    );
    Ok(match hit {
        Some(d) => (d, true),
        None => (max_range, false),
    })
}

/// One `ray_cast` per beam at bearings `2*pi*k / beam_count`.
pub fn simulate_scan(world: &GroundTruthWorld, position: Vec2) -> Result<RangeScan> {
    let n = world.sensor.beam_count;
    let max_range = world.sensor.sensing_range;
    let mut scan = RangeScan {
        origin: position,
        bearings: Vec::with_capacity(n),
        ranges: Vec::with_capacity(n),
        hits: Vec::with_capacity(n),
        max_range,
    };
    for k in 0..n {
        let bearing = TAU * k as f64 / n as f64;
        let (range, hit) = ray_cast(world, position, bearing, max_range)?;
        scan.bearings.push(bearing);
        scan.ranges.push(range);
        scan.hits.push(hit);
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed(w: usize, h: usize, res: f64) -> String {
        let mut s = format!("resolution {res}\n");
        for r in 0..h {
            for c in 0..w {
                let border = r == 0 || c == 0 || r == h - 1 || c == w - 1;
                s.push(if border { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn all_occupied_three_by_three() {
        let w = load_world("resolution 1\n###\n###\n###\n", SensorParams::default()).unwrap();
        assert_eq!(w.occupied.count(), 9);
    }

    #[test]
    fn five_by_five_box() {
        let w = load_world(&boxed(5, 5, 1.0), SensorParams::default()).unwrap();
        assert_eq!(w.free_cell_count(), 9);
        assert!(w.is_free_position(Vec2::new(2.5, 2.5)));
    }

    #[test]
    fn top_row_is_max_y() {
        let text = "resolution 1\n####\n#..#\n##.#\n####\n";
        let w = load_world(text, SensorParams::default()).unwrap();
        assert!(!w.is_occupied(Cell::new(1, 2)));
        assert!(w.is_occupied(Cell::new(1, 1)));
        assert_eq!(w.to_text(), text);
    }

    #[test]
    fn parse_errors_name_lines() {
        let bad = |t: &str| match load_world(t, SensorParams::default()) {
            Err(ExploreError::WorldParse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(bad("res 1\n###\n"), 1);
        assert_eq!(bad("resolution -1\n###\n"), 1);
        assert_eq!(bad("resolution 1\n###\n#.#\n##\n"), 4);
        assert_eq!(bad("resolution 1\n###\n#..\n###\n"), 3);
        assert_eq!(bad("resolution 1\n###\n#x#\n###\n"), 3);
    }

    #[test]
    fn flat_wall_range() {
        // wall at x = 2.0 m (cells with x index >= 20 are the right border)
        let w = load_world(&boxed(21, 21, 0.1), SensorParams::default()).unwrap();
        let (d, hit) = ray_cast(&w, Vec2::new(1.5, 1.05), 0.0, 1.5).unwrap();
        assert!(hit);
        assert!((d - 0.5).abs() < 1e-9);
    }

    #[test]
    fn open_ray_truncates() {
        let w = load_world(&boxed(60, 60, 0.1), SensorParams::default()).unwrap();
        let (d, hit) = ray_cast(&w, Vec2::new(3.0, 3.0), 0.3, 1.5).unwrap();
        assert!(!hit);
        assert_eq!(d, 1.5);
    }

    #[test]
    fn origin_in_wall_rejected() {
        let w = load_world(&boxed(5, 5, 1.0), SensorParams::default()).unwrap();
        assert!(matches!(
            ray_cast(&w, Vec2::new(0.5, 0.5), 0.0, 1.0),
            Err(ExploreError::InvalidOrigin(_))
        ));
    }

    #[test]
    fn scan_in_open_room_sees_nothing() {
        // 10 m room, robot at its center
        let w = load_world(&boxed(102, 102, 0.1), SensorParams::default()).unwrap();
        let scan = simulate_scan(&w, Vec2::new(5.1, 5.1)).unwrap();
        assert_eq!(scan.len(), 360);
        assert!(scan.ranges.iter().all(|r| *r == 1.5));
        assert!(scan.hits.iter().all(|h| !h));
        assert!((scan.bearings[90] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn scan_near_wall_min_range_at_normal() {
        let w = load_world(&boxed(41, 41, 0.1), SensorParams::default()).unwrap();
        // right wall's inner face at x = 4.0 m
        let scan = simulate_scan(&w, Vec2::new(3.5, 2.05)).unwrap();
        let (k, min) = scan
            .ranges
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert_eq!(k, 0);
        assert!((min - 0.5).abs() < 1e-9);
        assert!(scan.ranges.iter().all(|r| *r > 0.0 && *r <= 1.5));
    }
}
