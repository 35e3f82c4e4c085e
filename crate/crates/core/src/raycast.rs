//! Supercover traversal of a line segment over the cell lattice.
//!
//! Every cell whose closed square the segment touches is visited, including
//! both side cells when the segment passes exactly through a lattice corner.
//! The same walker drives the simulated range sensor, the mapper and the
//! visibility tests, so the three agree cell for cell.

use std::ops::ControlFlow;

use crate::geometry::{Cell, Vec2};

/// Corner-crossing tolerance, in cell units.
const CORNER_EPS: f64 = 1e-9;

/// Walks cells touched by the segment starting at `origin`, heading along the
/// unit vector `dir` for `length` meters. `visit` receives each cell with the
/// distance (meters) at which the segment enters it, in non-decreasing order.
/// Returning `ControlFlow::Break` stops the walk.
pub fn walk<B>(
    resolution: f64,
    origin: Vec2,
    dir: Vec2,
    length: f64,
    mut visit: impl FnMut(Cell, f64) -> ControlFlow<B>,
) -> Option<B> {
    let px = origin.x / resolution;
    let py = origin.y / resolution;
    let len = length / resolution;
    let mut cx = px.floor() as i32;
    let mut cy = py.floor() as i32;

    if let ControlFlow::Break(b) = visit(Cell::new(cx, cy), 0.0) {
        return Some(b);
    }
    if len <= 0.0 {
        return None;
    }

    let sx: i32 = if dir.x > 0.0 {
        1
    } else if dir.x < 0.0 {
        -1
    } else {
        0
    };
    let sy: i32 = if dir.y > 0.0 {
        1
    } else if dir.y < 0.0 {
        -1
    } else {
        0
    };

    let next_t = |c: i32, s: i32, p: f64, d: f64| -> f64 {
        if s == 0 {
            f64::INFINITY
        } else {
            let boundary = if s > 0 { c + 1 } else { c } as f64;
            (boundary - p) / d
        }
    };

    loop {
        let tx = next_t(cx, sx, px, dir.x);
        let ty = next_t(cy, sy, py, dir.y);
        let t = tx.min(ty);
        if t > len {
            return None;
        }
        let entry = t * resolution;
        if (tx - ty).abs() <= CORNER_EPS {
            // passes through a corner: both side cells are touched
            if let ControlFlow::Break(b) = visit(Cell::new(cx + sx, cy), entry) {
                return Some(b);
            }
            if let ControlFlow::Break(b) = visit(Cell::new(cx, cy + sy), entry) {
                return Some(b);
            }
            cx += sx;
            cy += sy;
        } else if tx < ty {
            cx += sx;
        } else {
            cy += sy;
        }
        if let ControlFlow::Break(b) = visit(Cell::new(cx, cy), entry) {
            return Some(b);
        }
    }
}

/// Walks the closed segment `[from, to]`.
pub fn walk_segment<B>(
    resolution: f64,
    from: Vec2,
    to: Vec2,
    visit: impl FnMut(Cell, f64) -> ControlFlow<B>,
) -> Option<B> {
    let delta = to - from;
    let length = delta.norm();
    let dir = if length > 0.0 {
        delta * (1.0 / length)
    } else {
        Vec2::new(1.0, 0.0)
    };
    walk(resolution, from, dir, length, visit)
}

/// True if every cell touched by `[from, to]` satisfies `pred`.
pub fn segment_all(resolution: f64, from: Vec2, to: Vec2, mut pred: impl FnMut(Cell) -> bool) -> bool {
    walk_segment(resolution, from, to, |cell, _| {
        if pred(cell) {
            ControlFlow::Continue(())
        } else {
            ControlFlow::Break(())
        }
    })
    .is_none()
}
