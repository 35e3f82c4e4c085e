//! Planar vectors and the cell lattice shared by every map layer.
//!
//! The lattice origin is the lower-left corner of cell `(0, 0)`; `x` grows to
//! the right and `y` grows upward. Cell `(ix, iy)` covers
//! `[ix*res, (ix+1)*res) x [iy*res, (iy+1)*res)`.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians counterclockwise from +x.
    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Counterclockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn lerp(self, other: Vec2, t: f64) -> Vec2 {
        self + (other - self) * t
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let wrapped = (angle + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to TAU for tiny negative inputs
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Integer lattice coordinate. May lie outside a particular grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Cell {
        Cell::new(self.x + dx, self.y + dy)
    }
}

/// 8-neighborhood offsets, edge neighbors first.
pub const NEIGHBORS_8: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)];

/// Dimensions and resolution of a lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        Self {
            width,
            height,
            resolution,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && (cell.x as usize) < self.width && (cell.y as usize) < self.height
    }

    /// Row-major index (row = `y`). Panics in debug builds if out of range.
    pub fn index(&self, cell: Cell) -> usize {
        debug_assert!(self.contains(cell), "{cell:?} outside {}x{}", self.width, self.height);
        cell.y as usize * self.width + cell.x as usize
    }

    pub fn checked_index(&self, cell: Cell) -> Option<usize> {
        self.contains(cell).then(|| self.index(cell))
    }

    pub fn cell_of_index(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn cell_at(&self, p: Vec2) -> Cell {
        Cell::new(
            (p.x / self.resolution).floor() as i32,
            (p.y / self.resolution).floor() as i32,
        )
    }

    pub fn center(&self, cell: Cell) -> Vec2 {
        Vec2::new(
            (cell.x as f64 + 0.5) * self.resolution,
            (cell.y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn center_of_index(&self, index: usize) -> Vec2 {
        self.center(self.cell_of_index(index))
    }

    pub fn cell_area(&self) -> f64 {
        self.resolution * self.resolution
    }

    /// In-grid 8-neighbors of `index`.
    pub fn neighbors8(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let cell = self.cell_of_index(index);
        NEIGHBORS_8
            .iter()
            .filter_map(move |&(dx, dy)| self.checked_index(cell.offset(dx, dy)))
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.width == other.width && self.height == other.height && self.resolution == other.resolution
    }
}

/// Boolean raster over a [`GridSpec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask size mismatch");
        Self { width, height, bits }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(Cell) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(Cell::new(x as i32, y as i32)));
            }
        }
        Self { width, height, bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    /// Out-of-range cells read as `false`.
    pub fn at(&self, cell: Cell) -> bool {
        if cell.x < 0 || cell.y < 0 || cell.x as usize >= self.width || cell.y as usize >= self.height {
            return false;
        }
        self.bits[cell.y as usize * self.width + cell.x as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    /// True if every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_half_open() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
        for k in -20..20 {
            let a = wrap_angle(k as f64 * 0.7);
            assert!((-PI..PI).contains(&a));
        }
    }

    #[test]
    fn cell_center_round_trip() {
        let spec = GridSpec::new(7, 5, 0.1);
        for i in 0..spec.len() {
            assert_eq!(spec.cell_at(spec.center_of_index(i)), spec.cell_of_index(i));
        }
        assert!(!spec.contains(Cell::new(7, 0)));
        assert!(!spec.contains(Cell::new(0, -1)));
    }

    #[test]
    fn neighbors_clip_at_corner() {
        let spec = GridSpec::new(3, 3, 1.0);
        assert_eq!(spec.neighbors8(0).count(), 3);
        assert_eq!(spec.neighbors8(4).count(), 8);
    }
}
