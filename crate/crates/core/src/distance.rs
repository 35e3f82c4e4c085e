//! Exact Euclidean distance transform over the cell lattice.
//!
//! Separable lower-envelope algorithm: a column pass followed by a row pass,
//! each computing the lower envelope of parabolas rooted at the previous
//! pass's values (the column pass reduces to two linear scans because its
//! input is binary). Distances are measured between cell centers. The transform
//! also records which site cell is nearest, which lets continuous query points
//! be answered without rounding to the containing cell.

use crate::geometry::{Cell, GridSpec, Mask, Vec2};

#[derive(Debug, Clone)]
pub struct DistanceField {
    spec: GridSpec,
    /// Squared distance to the nearest site, in cell units.
    squared: Vec<f64>,
    nearest: Vec<Option<Cell>>,
}

impl DistanceField {
    /// Distance from each cell center to the nearest center of a cell where
    /// `sites` is true. With `outside_is_site`, the ring of cells just beyond
    /// the lattice also counts as sites.
    pub fn compute(spec: GridSpec, sites: &Mask, outside_is_site: bool) -> Self {
        Self::build(spec, sites, outside_is_site, true)
    }

    /// Like [`DistanceField::compute`] but without nearest-site bookkeeping;
    /// [`DistanceField::nearest_site`] and [`DistanceField::distance_at`] are
    /// then unavailable.
    pub fn compute_distances(spec: GridSpec, sites: &Mask, outside_is_site: bool) -> Self {
        Self::build(spec, sites, outside_is_site, false)
    }

    fn build(spec: GridSpec, sites: &Mask, outside_is_site: bool, track: bool) -> Self {
        assert_eq!(sites.len(), spec.len(), "site mask does not match lattice");
        let pad = usize::from(outside_is_site);
        let w = spec.width + 2 * pad;
        let h = spec.height + 2 * pad;
        const NONE: u32 = u32::MAX;

        // column pass: binary input, so a downward and an upward sweep over
        // whole rows give each cell its nearest site within the column
        let site_at = |x: usize, y: usize| -> bool {
            if pad == 1 && (x == 0 || y == 0 || x == w - 1 || y == h - 1) {
                return true;
            }
            sites.get((y - pad) * spec.width + (x - pad))
        };
        let mut col_row = vec![NONE; w * h];
        for y in 0..h {
            for x in 0..w {
                col_row[y * w + x] = if site_at(x, y) {
                    y as u32
                } else if y > 0 {
                    col_row[(y - 1) * w + x]
                } else {
                    NONE
                };
            }
        }
        for y in (0..h.saturating_sub(1)).rev() {
            for x in 0..w {
                let above = col_row[(y + 1) * w + x];
                if above == NONE {
                    continue;
                }
                let cur = col_row[y * w + x];
                if cur == NONE || (above as usize).abs_diff(y) < y - cur as usize {
                    col_row[y * w + x] = above;
                }
            }
        }

        // row pass: lower envelope of parabolas rooted at the column distances
        let mut env = Envelope::with_capacity(w);
        let mut f = vec![0.0; w];
        let mut d = vec![0.0; w];
        let mut arg = vec![0usize; w];
        let mut squared = vec![f64::INFINITY; spec.len()];
        let mut nearest = if track { vec![None; spec.len()] } else { Vec::new() };
        for y in pad..h - pad {
            let rows = &col_row[y * w..(y + 1) * w];
            for (fx, &r) in f.iter_mut().zip(rows) {
                *fx = if r == NONE {
                    f64::INFINITY
                } else {
                    let dy = r as f64 - y as f64;
                    dy * dy
                };
            }
            env.run(&f, &mut d, &mut arg);
            let row = (y - pad) * spec.width;
            squared[row..row + spec.width].copy_from_slice(&d[pad..w - pad]);
            if track {
                for x in pad..w - pad {
                    if d[x].is_finite() {
                        let sx = arg[x];
                        let sy = rows[sx] as usize;
                        nearest[row + x - pad] = Some(Cell::new(sx as i32 - pad as i32, sy as i32 - pad as i32));
                    }
                }
            }
        }

        Self { spec, squared, nearest }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Squared distance in cell units (`INFINITY` when there are no sites).
    pub fn squared_cells(&self, index: usize) -> f64 {
        self.squared[index]
    }

    /// Distance in meters.
    pub fn distance(&self, index: usize) -> f64 {
        self.squared[index].sqrt() * self.spec.resolution
    }

    pub fn nearest_site(&self, index: usize) -> Option<Cell> {
        self.nearest[index]
    }

    pub fn is_site(&self, index: usize) -> bool {
        self.squared[index] == 0.0
    }

    /// Distance in meters from an arbitrary point to the nearest site center.
    /// Zero when the point lies in a site cell or off the lattice.
    pub fn distance_at(&self, p: Vec2) -> f64 {
        let cell = self.spec.cell_at(p);
        let Some(index) = self.spec.checked_index(cell) else {
            return 0.0;
        };
        if self.is_site(index) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(n) = self.spec.checked_index(cell.offset(dx, dy)) {
                    if let Some(site) = self.nearest[n] {
                        best = best.min(p.distance(self.spec.center(site)));
                    }
                }
            }
        }
        best
    }
}

/// Scratch space for the 1D lower envelope of parabolas.
struct Envelope {
    roots: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            roots: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    /// `d[q] = min_p (q - p)^2 + f[p]` over finite `f[p]`, with `arg[q]` the minimizer.
    fn run(&mut self, f: &[f64], d: &mut [f64], arg: &mut [usize]) {
        let n = f.len();
        let roots = &mut self.roots;
        let bounds = &mut self.bounds;
        // index of the last parabola in the envelope, plus one
        let mut len = 0usize;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + (q * q) as f64;
            let mut s = f64::NEG_INFINITY;
            while len > 0 {
                let p = roots[len - 1];
                let fp = f[p] + (p * p) as f64;
                s = (fq - fp) / (2.0 * (q - p) as f64);
                if s <= bounds[len - 1] {
                    len -= 1;
                } else {
                    break;
                }
            }
            if len == 0 {
                s = f64::NEG_INFINITY;
            }
            roots[len] = q;
            bounds[len] = s;
            len += 1;
        }
        if len == 0 {
            d.fill(f64::INFINITY);
            arg.fill(usize::MAX);
            return;
        }
        bounds[len] = f64::INFINITY;
        let mut k = 0;
        for q in 0..n {
            while bounds[k + 1] < q as f64 {
                k += 1;
            }
            let p = roots[k];
            let dq = q as f64 - p as f64;
            d[q] = dq * dq + f[p];
            arg[q] = p;
        }
    }
}
