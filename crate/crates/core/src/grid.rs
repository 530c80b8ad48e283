//! Points and the uniform cell-centred grid shared by the solver and the
//! level iteration.

use serde::{Deserialize, Serialize};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 2;

/// A point in `R^n`, `n <= 2`. Coordinates beyond the active dimension are
/// kept at zero, so Euclidean distances never need the dimension.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point(pub [f64; MAX_DIM]);

impl Point {
    /// Builds a point from one or two coordinates; missing ones are zero.
    pub fn new(coords: &[f64]) -> Self {
        let mut x = [0.0; MAX_DIM];
        for (dst, src) in x.iter_mut().zip(coords) {
            *dst = *src;
        }
        Point(x)
    }

    pub fn on_line(x: f64) -> Self {
        Point([x, 0.0])
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Point([x, y])
    }

    pub fn coord(&self, axis: usize) -> f64 {
        self.0[axis]
    }

    pub fn dist(&self, other: &Point) -> f64 {
        let dx = self.0[0] - other.0[0];
        let dy = self.0[1] - other.0[1];
        dx.hypot(dy)
    }

    pub fn coords(&self, n: usize) -> &[f64] {
        &self.0[..n]
    }
}

/// Distance from `p` to the nearest point of the axis-aligned box `[lo, hi]`.
pub fn box_min_dist(p: &Point, lo: &Point, hi: &Point, n: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..n {
        let c = p.0[a];
        let d = if c < lo.0[a] {
            lo.0[a] - c
        } else if c > hi.0[a] {
            c - hi.0[a]
        } else {
            0.0
        };
        s += d * d;
    }
    s.sqrt()
}

/// Distance from `p` to the farthest corner of the box `[lo, hi]`.
pub fn box_max_dist(p: &Point, lo: &Point, hi: &Point, n: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..n {
        let d = (p.0[a] - lo.0[a]).abs().max((hi.0[a] - p.0[a]).abs());
        s += d * d;
    }
    s.sqrt()
}

/// Uniform grid of `cells^n` square cells covering `[origin, origin + side]^n`.
/// Cell values live at cell centres; the outermost layer of cells is the
/// Dirichlet boundary for the solver.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub origin: f64,
    pub side: f64,
    pub cells: usize,
}

impl Grid {
    pub fn new(n: usize, origin: f64, side: f64, cells: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension must be 1 or 2");
        Grid {
            n,
            origin,
            side,
            cells,
        }
    }

    pub fn h(&self) -> f64 {
        self.side / self.cells as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.n as i32)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.pow(self.n as u32)
    }

    pub fn index(&self, multi: [usize; MAX_DIM]) -> usize {
        if self.n == 1 {
            multi[0]
        } else {
            multi[0] + self.cells * multi[1]
        }
    }

    pub fn multi(&self, idx: usize) -> [usize; MAX_DIM] {
        if self.n == 1 {
            [idx, 0]
        } else {
            [idx % self.cells, idx / self.cells]
        }
    }

    pub fn center(&self, idx: usize) -> Point {
        let m = self.multi(idx);
        let h = self.h();
        let mut p = Point::default();
        for a in 0..self.n {
            p.0[a] = self.origin + (m[a] as f64 + 0.5) * h;
        }
        p
    }

    pub fn cell_box(&self, idx: usize) -> (Point, Point) {
        let m = self.multi(idx);
        let h = self.h();
        let mut lo = Point::default();
        let mut hi = Point::default();
        for a in 0..self.n {
            lo.0[a] = self.origin + m[a] as f64 * h;
            hi.0[a] = lo.0[a] + h;
        }
        (lo, hi)
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let m = self.multi(idx);
        (0..self.n).any(|a| m[a] == 0 || m[a] + 1 == self.cells)
    }

    /// Index of the cell containing `p`. A point on a shared face belongs to
    /// the lexicographically smallest adjacent cell; points outside the grid
    /// are clamped to the nearest cell.
    pub fn containing_cell(&self, p: &Point) -> usize {
        let h = self.h();
        let mut m = [0usize; MAX_DIM];
        for a in 0..self.n {
            let s = (p.0[a] - self.origin) / h;
            let k = s.ceil() - 1.0;
            m[a] = k.clamp(0.0, (self.cells - 1) as f64) as usize;
        }
        self.index(m)
    }

    /// Whether the closed ball `B_r(c)` lies inside the closed grid box.
    pub fn contains_ball(&self, c: &Point, r: f64) -> bool {
        (0..self.n).all(|a| c.0[a] - r >= self.origin && c.0[a] + r <= self.origin + self.side)
    }

    /// Indices of cells whose centre lies strictly inside `B_r(c)`, in
    /// increasing index order.
    pub fn cells_in_ball(&self, c: &Point, r: f64) -> Vec<usize> {
        let h = self.h();
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        for a in 0..self.n {
            let l = ((c.0[a] - r - self.origin) / h - 0.5).floor().max(0.0);
            let u = ((c.0[a] + r - self.origin) / h - 0.5).ceil();
            lo[a] = l as usize;
            hi[a] = (u.max(0.0) as usize).min(self.cells - 1);
        }
        let mut out = Vec::new();
        let (j0, j1) = if self.n == 1 { (0, 0) } else { (lo[1], hi[1]) };
        for j in j0..=j1 {
            for i in lo[0]..=hi[0] {
                let idx = self.index([i, j]);
                if self.center(idx).dist(c) < r {
                    out.push(idx);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_ties_go_to_smaller_cell() {
        let g = Grid::new(1, 0.0, 1.0, 4);
        assert_eq!(g.containing_cell(&Point::on_line(0.5)), 1);
        assert_eq!(g.containing_cell(&Point::on_line(0.51)), 2);
        assert_eq!(g.containing_cell(&Point::on_line(0.0)), 0);
        assert_eq!(g.containing_cell(&Point::on_line(1.0)), 3);

        let g2 = Grid::new(2, 0.0, 1.0, 4);
        assert_eq!(g2.containing_cell(&Point::xy(0.5, 0.5)), g2.index([1, 1]));
    }

    #[test]
    fn ball_cells_match_brute_force() {
        let g = Grid::new(2, -1.0, 2.0, 17);
        let c = Point::xy(0.13, -0.31);
        for &r in &[0.0, 0.05, 0.3, 0.77, 5.0] {
            let fast = g.cells_in_ball(&c, r);
            let brute: Vec<usize> = (0..g.num_cells())
                .filter(|&i| g.center(i).dist(&c) < r)
                .collect();
            assert_eq!(fast, brute, "r = {r}");
        }
    }

    #[test]
    fn boundary_layer() {
        let g = Grid::new(2, 0.0, 1.0, 5);
        let count = (0..g.num_cells()).filter(|&i| g.is_boundary(i)).count();
        assert_eq!(count, 25 - 9);
    }
}
