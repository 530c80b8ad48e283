//! Nonnegative Radon measures made of point masses and a piecewise-constant
//! density, with closed-ball mass queries.

use crate::error::{Error, Result};
use crate::grid::{box_max_dist, box_min_dist, Grid, Point};

/// Dyadic subdivision depth used for cells cut by a ball boundary.
pub const OVERLAP_DEPTH: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub loc: Point,
    pub mass: f64,
}

/// Piecewise-constant density (mass per volume) on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::domain(format!(
                "density has {} values, grid has {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("density value {v} is not a finite nonnegative number")));
        }
        Ok(DensityGrid { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        let values = vec![value; grid.num_cells()];
        Self::new(grid, values)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `int_{B_r(c)} density`, by exact interval overlap in 1D and by
    /// subdivision of cut cells in 2D.
    fn ball_integral(&self, c: &Point, r: f64) -> f64 {
        let g = &self.grid;
        let n = g.n;
        let h = g.h();
        let mut lo = [0usize; 2];
        let mut hi = [0usize; 2];
        for a in 0..n {
            let l = ((c.0[a] - r - g.origin) / h).floor();
            let u = ((c.0[a] + r - g.origin) / h).floor();
            if u < 0.0 || l > (g.cells - 1) as f64 {
                return 0.0;
            }
            lo[a] = l.max(0.0) as usize;
            hi[a] = (u as usize).min(g.cells - 1);
        }
        let (j0, j1) = if n == 1 { (0, 0) } else { (lo[1], hi[1]) };
        let mut sum = 0.0;
        for j in j0..=j1 {
            for i in lo[0]..=hi[0] {
                let idx = g.index([i, j]);
                let v = self.values[idx];
                if v == 0.0 {
                    continue;
                }
                let (blo, bhi) = g.cell_box(idx);
                let vol = if n == 1 {
                    (bhi.0[0].min(c.0[0] + r) - blo.0[0].max(c.0[0] - r)).max(0.0)
                } else {
                    box_ball_overlap_2d(&blo, &bhi, c, r, OVERLAP_DEPTH)
                };
                sum += v * vol;
            }
        }
        sum
    }

    fn support_distance(&self, c: &Point) -> f64 {
        let g = &self.grid;
        (0..g.num_cells())
            .filter(|&i| self.values[i] > 0.0)
            .map(|i| {
                let (lo, hi) = g.cell_box(i);
                box_min_dist(c, &lo, &hi, g.n)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Area of `[lo, hi] ∩ B_r(c)`. Boxes cut by the circle are bisected per axis
/// down to `depth`; at the leaves the cut fraction is interpolated linearly
/// between the nearest and farthest box distances, which keeps the result
/// continuous and nondecreasing in `r`.
pub fn box_ball_overlap_2d(lo: &Point, hi: &Point, c: &Point, r: f64, depth: u32) -> f64 {
    let dmin = box_min_dist(c, lo, hi, 2);
    if dmin >= r {
        return 0.0;
    }
    let area = (hi.0[0] - lo.0[0]) * (hi.0[1] - lo.0[1]);
    let dmax = box_max_dist(c, lo, hi, 2);
    if dmax <= r {
        return area;
    }
    if depth == 0 {
        return area * ((r - dmin) / (dmax - dmin)).clamp(0.0, 1.0);
    }
    let mx = 0.5 * (lo.0[0] + hi.0[0]);
    let my = 0.5 * (lo.0[1] + hi.0[1]);
    let quads = [
        (Point::xy(lo.0[0], lo.0[1]), Point::xy(mx, my)),
        (Point::xy(mx, lo.0[1]), Point::xy(hi.0[0], my)),
        (Point::xy(lo.0[0], my), Point::xy(mx, hi.0[1])),
        (Point::xy(mx, my), Point::xy(hi.0[0], hi.0[1])),
    ];
    quads
        .iter()
        .map(|(l, u)| box_ball_overlap_2d(l, u, c, r, depth - 1))
        .sum()
}

/// A nonnegative measure `mu = sum_i m_i delta_{x_i} + rho dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadonMeasure {
    pub n: usize,
    pub atoms: Vec<Atom>,
    pub density: Option<DensityGrid>,
}

impl RadonMeasure {
    pub fn zero(n: usize) -> Self {
        RadonMeasure {
            n,
            atoms: Vec::new(),
            density: None,
        }
    }

    pub fn new(n: usize, atoms: Vec<Atom>, density: Option<DensityGrid>) -> Result<Self> {
        if let Some(a) = atoms.iter().find(|a| !(a.mass >= 0.0 && a.mass.is_finite())) {
            return Err(Error::domain(format!("atom mass {} is not a finite nonnegative number", a.mass)));
        }
        if let Some(d) = &density {
            if d.grid.n != n {
                return Err(Error::domain("density grid dimension differs from measure dimension"));
            }
        }
        Ok(RadonMeasure { n, atoms, density })
    }

    /// A single point mass.
    pub fn dirac(n: usize, loc: Point, mass: f64) -> Result<Self> {
        Self::new(n, vec![Atom { loc, mass }], None)
    }

    pub fn with_atom(mut self, loc: Point, mass: f64) -> Result<Self> {
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::domain(format!("atom mass {mass} is not a finite nonnegative number")));
        }
        self.atoms.push(Atom { loc, mass });
        Ok(self)
    }

    /// Multiplies every mass and density value by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Self {
        RadonMeasure {
            n: self.n,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    loc: a.loc,
                    mass: a.mass * c,
                })
                .collect(),
            density: self.density.as_ref().map(|d| DensityGrid {
                grid: d.grid.clone(),
                values: d.values.iter().map(|v| v * c).collect(),
            }),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.total_mass() == 0.0
    }

    /// `mu(B_r(center))` for the closed ball.
    pub fn ball_mass(&self, center: &Point, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("ball radius must be nonnegative, got {r}")));
        }
        Ok(self.ball_mass_unchecked(center, r))
    }

    pub(crate) fn ball_mass_unchecked(&self, center: &Point, r: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.loc.dist(center) <= r)
            .map(|a| a.mass)
            .sum();
        let dens = self
            .density
            .as_ref()
            .map_or(0.0, |d| d.ball_integral(center, r));
        atoms + dens
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>()
            + self.density.as_ref().map_or(0.0, DensityGrid::total)
    }

    /// Mass of atoms located exactly at `center`.
    pub fn atom_mass_at(&self, center: &Point) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.loc.dist(center) == 0.0)
            .map(|a| a.mass)
            .sum()
    }

    /// Sorted distances from `center` to atoms of positive mass.
    pub fn atom_distances(&self, center: &Point) -> Vec<f64> {
        let mut d: Vec<f64> = self
            .atoms
            .iter()
            .filter(|a| a.mass > 0.0)
            .map(|a| a.loc.dist(center))
            .collect();
        d.sort_by(f64::total_cmp);
        d
    }

    /// Distance from `center` to the closure of the set where the density is
    /// positive (infinite without density).
    pub fn density_support_distance(&self, center: &Point) -> f64 {
        self.density
            .as_ref()
            .map_or(f64::INFINITY, |d| d.support_distance(center))
    }

    /// Distance from `center` to the support of the measure.
    pub fn support_distance(&self, center: &Point) -> f64 {
        let atom = self.atom_distances(center).first().copied().unwrap_or(f64::INFINITY);
        atom.min(self.density_support_distance(center))
    }

    /// Mass attributed to each cell of `grid`: atoms go wholly to their
    /// containing cell (face ties to the lexicographically smallest cell,
    /// atoms outside the grid are dropped), densities are integrated exactly
    /// over cell overlaps.
    pub fn cell_masses(&self, grid: &Grid) -> Vec<f64> {
        let mut out = vec![0.0; grid.num_cells()];
        let inside = |p: &Point| {
            (0..grid.n).all(|a| p.0[a] >= grid.origin && p.0[a] <= grid.origin + grid.side)
        };
        for a in self.atoms.iter().filter(|a| inside(&a.loc)) {
            out[grid.containing_cell(&a.loc)] += a.mass;
        }
        if let Some(d) = &self.density {
            let dg = &d.grid;
            let h = grid.h();
            for k in 0..dg.num_cells() {
                let v = d.values[k];
                if v == 0.0 {
                    continue;
                }
                let (lo, hi) = dg.cell_box(k);
                let mut range = [(0usize, 0usize); 2];
                let mut empty = false;
                for a in 0..grid.n {
                    let l = ((lo.0[a] - grid.origin) / h).floor().max(0.0);
                    let u = ((hi.0[a] - grid.origin) / h).ceil() - 1.0;
                    if u < l || l > (grid.cells - 1) as f64 {
                        empty = true;
                    }
                    range[a] = (l as usize, (u.max(0.0) as usize).min(grid.cells - 1));
                }
                if empty {
                    continue;
                }
                let (j0, j1) = if grid.n == 1 { (0, 0) } else { range[1] };
                for j in j0..=j1 {
                    for i in range[0].0..=range[0].1 {
                        let idx = grid.index([i, j]);
                        let (clo, chi) = grid.cell_box(idx);
                        let mut vol = 1.0;
                        for a in 0..grid.n {
                            vol *= (chi.0[a].min(hi.0[a]) - clo.0[a].max(lo.0[a])).max(0.0);
                        }
                        out[idx] += v * vol;
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn atom_inside_and_outside() {
        let mu = RadonMeasure::dirac(2, Point::xy(0.0, 0.0), 1.0).unwrap();
        assert_eq!(mu.ball_mass(&Point::xy(0.0, 0.0), 0.5).unwrap(), 1.0);
        assert_eq!(mu.ball_mass(&Point::xy(1.0, 0.0), 0.5).unwrap(), 0.0);
        // closed ball
        assert_eq!(mu.ball_mass(&Point::xy(1.0, 0.0), 1.0).unwrap(), 1.0);
        assert_eq!(mu.ball_mass(&Point::xy(0.0, 0.0), 0.0).unwrap(), 1.0);
    }

    #[test]
    fn negative_radius_is_domain_error() {
        let mu = RadonMeasure::zero(1);
        assert!(matches!(mu.ball_mass(&Point::on_line(0.0), -1.0), Err(Error::Domain(_))));
        assert!(mu.ball_mass(&Point::on_line(0.0), f64::NAN).is_err());
    }

    #[test]
    fn disc_mass_of_uniform_density() {
        let g = Grid::new(2, -1.5, 3.0, 96);
        let d = DensityGrid::constant(g, 1.0 / PI).unwrap();
        let mu = RadonMeasure::new(2, vec![], Some(d)).unwrap();
        let m = mu.ball_mass(&Point::xy(0.0, 0.0), 1.0).unwrap();
        assert!((m - 1.0).abs() < 1e-4, "got {m}");
    }

    #[test]
    fn overlap_converges_with_depth() {
        // one big cell; area of the unit quarter disc inside [0,1]^2
        let lo = Point::xy(0.0, 0.0);
        let hi = Point::xy(1.0, 1.0);
        let c = Point::xy(0.0, 0.0);
        let coarse = box_ball_overlap_2d(&lo, &hi, &c, 1.0, 4);
        let fine = box_ball_overlap_2d(&lo, &hi, &c, 1.0, 11);
        assert!((fine - PI / 4.0).abs() < 1e-5);
        assert!((coarse - PI / 4.0).abs() < 1e-2);
    }

    #[test]
    fn total_mass_cases() {
        assert_eq!(RadonMeasure::zero(2).total_mass(), 0.0);
        let mu = RadonMeasure::dirac(1, Point::on_line(0.1), 0.5)
            .unwrap()
            .with_atom(Point::on_line(0.7), 1.5)
            .unwrap();
        assert_eq!(mu.total_mass(), 2.0);
        let g = Grid::new(2, 0.0, 1.0, 8);
        let d = DensityGrid::constant(g, 2.0).unwrap();
        let mu = RadonMeasure::new(2, vec![], Some(d)).unwrap();
        assert!((mu.total_mass() - 2.0).abs() < 1e-14);
        // ball larger than the domain diameter sees everything
        let m = mu.ball_mass(&Point::xy(0.3, 0.2), 10.0).unwrap();
        assert!((m - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_negative_mass() {
        assert!(RadonMeasure::dirac(1, Point::on_line(0.0), -1.0).is_err());
        let g = Grid::new(1, 0.0, 1.0, 4);
        assert!(DensityGrid::new(g, vec![1.0, -1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn lumping_preserves_mass() {
        let g = Grid::new(2, 0.0, 1.0, 8);
        let dg = Grid::new(2, 0.1, 0.7, 5);
        let d = DensityGrid::new(dg, (0..25).map(|i| i as f64 * 0.1).collect()).unwrap();
        let mu = RadonMeasure::new(
            2,
            vec![
                Atom { loc: Point::xy(0.5, 0.5), mass: 1.0 },
                Atom { loc: Point::xy(0.26, 0.9), mass: 0.25 },
            ],
            Some(d),
        )
        .unwrap();
        let cells = mu.cell_masses(&g);
        let sum: f64 = cells.iter().sum();
        assert!((sum - mu.total_mass()).abs() < 1e-12);
        // atom on a cell corner goes to the lower-left cell
        assert!(cells[g.index([3, 3])] >= 1.0);
    }

    #[test]
    fn density_support_distance_is_box_distance() {
        let g = Grid::new(1, 0.0, 1.0, 4);
        let d = DensityGrid::new(g, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let mu = RadonMeasure::new(1, vec![], Some(d)).unwrap();
        assert!((mu.support_distance(&Point::on_line(0.1)) - 0.4).abs() < 1e-15);
        assert_eq!(mu.support_distance(&Point::on_line(0.6)), 0.0);
    }
}
