//! The discrete implicit-Euler functional
//!
//! `J(v) = sum_cells h^n (v - u_prev)^2 / (2 dt) + E(v) - sum_cells v mu(cell)`,
//! `E(v) = (1/p) sum_samples w |g|_eps^p`, `|g|_eps = sqrt(|g|^2 + eps^2)`,
//!
//! together with its gradient and Hessian with respect to the interior cells.
//!
//! Gradient samples: in 1D one per face (difference of the two adjacent
//! cells). In 2D every square of four neighbouring cell centres carries four
//! samples of weight `h^2/4`, pairing each of its two x-differences with each
//! of its two y-differences (the P1 gradients of both diagonal
//! triangulations). This keeps the energy isotropic and makes the
//! truncation `v -> max(v, 0)` energy-decreasing sample by sample.

use super::banded::BandedSpd;
use crate::grid::Grid;

#[derive(Clone, Copy, Debug)]
struct Sample {
    weight: f64,
    ncomp: usize,
    // (from, to) cell pairs; component = (v[to] - v[from]) / h
    comps: [(usize, usize); 2],
}

#[derive(Clone, Debug)]
pub struct Discretization {
    pub grid: Grid,
    pub dt: f64,
    pub p: f64,
    pub eps: f64,
    pub cell_mass: Vec<f64>,
    samples: Vec<Sample>,
    unknown_of: Vec<Option<usize>>,
    cell_of: Vec<usize>,
    bandwidth: usize,
}

impl Discretization {
    pub fn new(grid: Grid, dt: f64, p: f64, eps: f64, cell_mass: Vec<f64>) -> Self {
        let nc = grid.num_cells();
        let h = grid.h();
        let mut samples = Vec::new();
        if grid.n == 1 {
            for i in 0..grid.cells - 1 {
                samples.push(Sample {
                    weight: h,
                    ncomp: 1,
                    comps: [(i, i + 1), (0, 0)],
                });
            }
        } else {
            let w = 0.25 * h * h;
            for j in 0..grid.cells - 1 {
                for i in 0..grid.cells - 1 {
                    let a = grid.index([i, j]);
                    let b = grid.index([i + 1, j]);
                    let c = grid.index([i, j + 1]);
                    let d = grid.index([i + 1, j + 1]);
                    for xs in [(a, b), (c, d)] {
                        for ys in [(a, c), (b, d)] {
                            samples.push(Sample {
                                weight: w,
                                ncomp: 2,
                                comps: [xs, ys],
                            });
                        }
                    }
                }
            }
        }
        let mut unknown_of = vec![None; nc];
        let mut cell_of = Vec::new();
        for (c, slot) in unknown_of.iter_mut().enumerate() {
            if !grid.is_boundary(c) {
                *slot = Some(cell_of.len());
                cell_of.push(c);
            }
        }
        let bandwidth = if grid.n == 1 { 1 } else { grid.cells - 1 };
        Discretization {
            grid,
            dt,
            p,
            eps,
            cell_mass,
            samples,
            unknown_of,
            cell_of,
            bandwidth,
        }
    }

    pub fn num_unknowns(&self) -> usize {
        self.cell_of.len()
    }

    pub fn interior_cells(&self) -> &[usize] {
        &self.cell_of
    }

    pub fn unknown(&self, cell: usize) -> Option<usize> {
        self.unknown_of[cell]
    }

    fn sample_grad(&self, s: &Sample, v: &[f64]) -> [f64; 2] {
        let h = self.grid.h();
        let mut g = [0.0; 2];
        for (c, &(from, to)) in s.comps.iter().enumerate().take(s.ncomp) {
            g[c] = (v[to] - v[from]) / h;
        }
        g
    }

    #[inline]
    fn reg_norm(&self, g: &[f64; 2]) -> f64 {
        (g[0] * g[0] + g[1] * g[1] + self.eps * self.eps).sqrt()
    }

    /// Regularized p-Dirichlet energy `E(v)`.
    pub fn dirichlet_energy(&self, v: &[f64]) -> f64 {
        self.samples
            .iter()
            .map(|s| {
                let g = self.sample_grad(s, v);
                s.weight * self.reg_norm(&g).powf(self.p) / self.p
            })
            .sum()
    }

    pub fn objective(&self, v: &[f64], u_prev: &[f64]) -> f64 {
        let hn = self.grid.cell_volume();
        let mut j = self.dirichlet_energy(v);
        for &c in &self.cell_of {
            let d = v[c] - u_prev[c];
            j += hn * d * d / (2.0 * self.dt) - v[c] * self.cell_mass[c];
        }
        j
    }

    /// `J(v + alpha d) - J(v)` evaluated term by term, which avoids the
    /// cancellation of subtracting two nearly equal totals.
    pub fn objective_change(&self, v: &[f64], d: &[f64], alpha: f64, u_prev: &[f64]) -> f64 {
        let hn = self.grid.cell_volume();
        let mut dj = 0.0;
        for &c in &self.cell_of {
            let step = alpha * d[c];
            dj += hn * step * (2.0 * (v[c] - u_prev[c]) + step) / (2.0 * self.dt) - step * self.cell_mass[c];
        }
        let trial: Vec<f64> = v.iter().zip(d).map(|(x, y)| x + alpha * y).collect();
        for s in &self.samples {
            let g0 = self.sample_grad(s, v);
            let g1 = self.sample_grad(s, &trial);
            let n0 = self.reg_norm(&g0);
            let n1 = self.reg_norm(&g1);
            dj += s.weight * (n1.powf(self.p) - n0.powf(self.p)) / self.p;
        }
        dj
    }

    /// Gradient of `J` on every cell (boundary entries are left at zero).
    pub fn gradient_cells(&self, v: &[f64], u_prev: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        let hn = self.grid.cell_volume();
        let mut out = vec![0.0; v.len()];
        for s in &self.samples {
            let g = self.sample_grad(s, v);
            let phi = self.reg_norm(&g).powf(self.p - 2.0);
            for (c, &(from, to)) in s.comps.iter().enumerate().take(s.ncomp) {
                let f = s.weight * phi * g[c] / h;
                out[to] += f;
                out[from] -= f;
            }
        }
        for c in 0..v.len() {
            if self.unknown_of[c].is_some() {
                out[c] += hn * (v[c] - u_prev[c]) / self.dt - self.cell_mass[c];
            } else {
                out[c] = 0.0;
            }
        }
        out
    }

    pub fn gradient(&self, v: &[f64], u_prev: &[f64]) -> Vec<f64> {
        let full = self.gradient_cells(v, u_prev);
        self.cell_of.iter().map(|&c| full[c]).collect()
    }

    pub fn hessian(&self, v: &[f64]) -> BandedSpd {
        let h = self.grid.h();
        let hn = self.grid.cell_volume();
        let mut m = BandedSpd::zeros(self.num_unknowns(), self.bandwidth);
        for k in 0..self.num_unknowns() {
            m.add(k, k, hn / self.dt);
        }
        let pm2 = self.p - 2.0;
        for s in &self.samples {
            let g = self.sample_grad(s, v);
            let nrm = self.reg_norm(&g);
            let phi = nrm.powf(self.p - 2.0);
            let psi = if pm2 == 0.0 { 0.0 } else { pm2 * nrm.powf(self.p - 4.0) };
            // (unknown, component, sign / h)
            let mut ent: [(usize, usize, f64); 4] = [(0, 0, 0.0); 4];
            let mut ne = 0;
            for (c, &(from, to)) in s.comps.iter().enumerate().take(s.ncomp) {
                if let Some(u) = self.unknown_of[to] {
                    ent[ne] = (u, c, 1.0 / h);
                    ne += 1;
                }
                if let Some(u) = self.unknown_of[from] {
                    ent[ne] = (u, c, -1.0 / h);
                    ne += 1;
                }
            }
            for a in 0..ne {
                let (ua, ca, sa) = ent[a];
                for (b, &(ub, cb, sb)) in ent.iter().enumerate().take(a + 1) {
                    let mut hab = psi * g[ca] * g[cb];
                    if ca == cb {
                        hab += phi;
                    }
                    let val = s.weight * hab * sa * sb;
                    // an unordered pair (a, b), b < a, stands for both ordered
                    // pairs; they coincide on the diagonal when ua == ub
                    let mult = if b != a && ua == ub { 2.0 } else { 1.0 };
                    m.add(ua, ub, mult * val);
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize, p: f64) -> (Discretization, Vec<f64>, Vec<f64>) {
        let grid = Grid::new(n, 0.0, 1.0, 6);
        let nc = grid.num_cells();
        let masses: Vec<f64> = (0..nc).map(|i| 0.01 * (i % 3) as f64).collect();
        let v: Vec<f64> = (0..nc).map(|i| ((i * 7 % 11) as f64 * 0.37).sin()).collect();
        let u: Vec<f64> = (0..nc).map(|i| ((i * 5 % 13) as f64 * 0.21).cos()).collect();
        (Discretization::new(grid, 0.01, p, 1e-3, masses), v, u)
    }

    #[test]
    fn gradient_matches_central_differences() {
        for &(n, p) in &[(1, 2.0), (1, 3.0), (2, 2.0), (2, 3.5)] {
            let (d, v, u) = setup(n, p);
            let g = d.gradient(&v, &u);
            for (k, &c) in d.interior_cells().iter().enumerate() {
                let e = 1e-6;
                let mut vp = v.clone();
                vp[c] += e;
                let mut vm = v.clone();
                vm[c] -= e;
                let fd = (d.objective(&vp, &u) - d.objective(&vm, &u)) / (2.0 * e);
                assert!((fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()), "n={n} p={p} k={k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        for &(n, p) in &[(1, 3.0), (2, 2.0), (2, 3.0)] {
            let (d, v, u) = setup(n, p);
            let hm = d.hessian(&v);
            let m = d.num_unknowns();
            for (k, &c) in d.interior_cells().iter().enumerate() {
                let e = 1e-6;
                let mut vp = v.clone();
                vp[c] += e;
                let mut vm = v.clone();
                vm[c] -= e;
                let gp = d.gradient(&vp, &u);
                let gm = d.gradient(&vm, &u);
                for i in 0..m {
                    let fd = (gp[i] - gm[i]) / (2.0 * e);
                    let an = hm.get(i, k);
                    assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "n={n} p={p} ({i},{k}): {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn objective_change_matches_difference() {
        let (d, v, u) = setup(2, 3.0);
        let dir: Vec<f64> = (0..v.len()).map(|i| if d.unknown(i).is_some() { 0.1 * (i as f64).cos() } else { 0.0 }).collect();
        let trial: Vec<f64> = v.iter().zip(&dir).map(|(a, b)| a + 0.5 * b).collect();
        let direct = d.objective(&trial, &u) - d.objective(&v, &u);
        let change = d.objective_change(&v, &dir, 0.5, &u);
        assert!((direct - change).abs() < 1e-12);
    }

    #[test]
    fn quadratic_energy_is_five_point_laplacian() {
        // for p = 2 the 2D energy equals (1/2) sum over faces of squared differences
        let grid = Grid::new(2, 0.0, 1.0, 5);
        let d = Discretization::new(grid.clone(), 1.0, 2.0, 0.0, vec![0.0; 25]);
        let v: Vec<f64> = (0..25).map(|i| ((i * i) % 7) as f64).collect();
        let mut faces = 0.0;
        for j in 0..5 {
            for i in 0..5 {
                let a = v[grid.index([i, j])];
                if i + 1 < 5 {
                    let b = v[grid.index([i + 1, j])];
                    faces += (b - a).powi(2);
                }
                if j + 1 < 5 {
                    let b = v[grid.index([i, j + 1])];
                    faces += (b - a).powi(2);
                }
            }
        }
        // interior faces carry weight h^2/2 from each of two squares, edge
        // faces h^2/2 from one; every gradient is a difference divided by h
        let mut expected = 0.0;
        for j in 0..5 {
            for i in 0..5 {
                let a = v[grid.index([i, j])];
                if i + 1 < 5 {
                    let b = v[grid.index([i + 1, j])];
                    let w = if j == 0 || j == 4 { 0.5 } else { 1.0 };
                    expected += w * (b - a).powi(2);
                }
                if j + 1 < 5 {
                    let b = v[grid.index([i, j + 1])];
                    let w = if i == 0 || i == 4 { 0.5 } else { 1.0 };
                    expected += w * (b - a).powi(2);
                }
            }
        }
        assert!(faces > 0.0);
        assert!((d.dirichlet_energy(&v) - 0.5 * expected).abs() < 1e-10);
    }
}
