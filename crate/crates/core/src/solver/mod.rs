//! Minimizing-movement solver for `u_t - Delta_p u = mu` with Dirichlet data.
//!
//! Each implicit Euler step minimizes the strictly convex functional of
//! [`discrete::Discretization`] by damped Newton with a backtracking line
//! search. The minimizer satisfies the discrete weak identity, audited by
//! [`weak_residual`].

pub mod banded;
pub mod discrete;

use crate::error::{Error, Result};
use crate::grid::{Grid, Point};
use crate::measure::RadonMeasure;
use crate::params::{validate, Domain, Params};
pub use discrete::Discretization;

/// Initial data `u(., 0)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    Constant(f64),
    /// `amplitude * exp(-|x - center|^2 / width^2)`.
    Gaussian {
        center: Point,
        width: f64,
        amplitude: f64,
    },
    /// `offset + slope . x`.
    Linear { slope: Point, offset: f64 },
}

impl Initial {
    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            Initial::Constant(c) => *c,
            Initial::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let r = x.dist(center);
                amplitude * (-(r * r) / (width * width)).exp()
            }
            Initial::Linear { slope, offset } => offset + slope.0[0] * x.0[0] + slope.0[1] * x.0[1],
        }
    }
}

/// Values held on the outer layer of cells.
#[derive(Clone, Debug, PartialEq)]
pub enum Boundary {
    Constant(f64),
    /// Keep the initial values on boundary cells for all times.
    FromInitial,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub params: Params,
    pub domain: Domain,
    pub measure: RadonMeasure,
    pub initial: Initial,
    pub boundary: Boundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub level: usize,
    pub iterations: usize,
    pub grad_norm: f64,
    pub energy: f64,
    /// Objective value at every Newton iterate, starting from the initial guess.
    pub objective_trace: Vec<f64>,
    /// Stopped because the Newton correction fell below the float spacing
    /// of the iterate while the gradient norm was still above tolerance.
    pub rounding_floor: bool,
}

/// Space-time discrete solution: one vector of cell values per time level
/// `t_k = k dt`.
#[derive(Clone, Debug)]
pub struct GridField {
    pub domain: Domain,
    pub grid: Grid,
    pub levels: Vec<Vec<f64>>,
    pub reports: Vec<StepReport>,
}

impl GridField {
    /// Samples `f(x, t)` at cell centres and time levels.
    pub fn from_fn(n: usize, domain: &Domain, f: impl Fn(&Point, f64) -> f64) -> Self {
        let grid = domain.grid(n);
        let levels = (0..=domain.steps())
            .map(|k| {
                let t = k as f64 * domain.dt;
                (0..grid.num_cells()).map(|c| f(&grid.center(c), t)).collect()
            })
            .collect();
        GridField {
            domain: domain.clone(),
            grid,
            levels,
            reports: Vec::new(),
        }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dt(&self) -> f64 {
        self.domain.dt
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.domain.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.num_levels() - 1)
    }

    /// Level closest to `t` (ties to the earlier level), clamped to the range.
    pub fn nearest_level(&self, t: f64) -> usize {
        let k = (t / self.domain.dt - 0.5).ceil();
        k.clamp(0.0, (self.num_levels() - 1) as f64) as usize
    }

    pub fn value(&self, level: usize, cell: usize) -> f64 {
        self.levels[level][cell]
    }

    /// Cell average read at the cell containing `y` and the level nearest `s`.
    pub fn sample(&self, y: &Point, s: f64) -> f64 {
        self.levels[self.nearest_level(s)][self.grid.containing_cell(y)]
    }
}

fn initial_vector(problem: &Problem, grid: &Grid) -> Vec<f64> {
    (0..grid.num_cells())
        .map(|c| {
            let x = grid.center(c);
            let v = problem.initial.eval(&x);
            match problem.boundary {
                Boundary::Constant(b) if grid.is_boundary(c) => b,
                _ => v,
            }
        })
        .collect()
}

/// One implicit Euler step from `u_prev`. Boundary entries of `u_prev` are
/// kept. `level` is only used for reporting.
pub fn step(disc: &Discretization, u_prev: &[f64], params: &Params, level: usize) -> Result<(Vec<f64>, StepReport)> {
    let hn = disc.grid.cell_volume();
    let target = params.tol_newton * hn;
    let mut v = u_prev.to_vec();
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let g = disc.gradient(&v, u_prev);
        let gn = norm(&g);
        trace.push(disc.objective(&v, u_prev));
        let mut floor = false;
        let mut dir = None;
        if gn > target && iterations < params.max_newton_iter {
            let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
            let d = disc.hessian(&v).solve(&rhs).ok_or(Error::NonConvergence {
                level,
                iterations,
                grad_norm: gn,
            })?;
            let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            floor = dmax <= 8.0 * f64::EPSILON * vmax;
            dir = Some(d);
        }
        if gn <= target || floor {
            let energy = *trace.last().unwrap();
            return Ok((
                v,
                StepReport {
                    level,
                    iterations,
                    grad_norm: gn,
                    energy,
                    objective_trace: trace,
                    rounding_floor: floor,
                },
            ));
        }
        if iterations >= params.max_newton_iter {
            return Err(Error::NonConvergence {
                level,
                iterations,
                grad_norm: gn,
            });
        }
        iterations += 1;
        let dir = dir.expect("direction computed below the iteration limit");
        let mut d_full = vec![0.0; v.len()];
        for (k, &c) in disc.interior_cells().iter().enumerate() {
            d_full[c] = dir[k];
        }
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();

        // Below this size a change of J is indistinguishable from rounding.
        let noise = 1e-14 * trace.last().unwrap().abs().max(hn);
        let mut alpha = 1.0;
        let mut accepted = false;
        if -slope > noise {
            while alpha >= 1e-12 {
                let dj = disc.objective_change(&v, &d_full, alpha, u_prev);
                if dj <= 1e-4 * alpha * slope {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if !accepted {
            // Armijo is unresolvable here; take the full step only if it
            // lowers the gradient norm and J rises by no more than rounding.
            alpha = 1.0;
            let trial: Vec<f64> = v.iter().zip(&d_full).map(|(a, b)| a + b).collect();
            let dj = disc.objective_change(&v, &d_full, 1.0, u_prev);
            if !(norm(&disc.gradient(&trial, u_prev)) < gn && dj <= noise) {
                if -slope <= noise {
                    // nothing left to gain at this precision
                    let energy = *trace.last().unwrap();
                    return Ok((
                        v,
                        StepReport {
                            level,
                            iterations: iterations - 1,
                            grad_norm: gn,
                            energy,
                            objective_trace: trace,
                            rounding_floor: true,
                        },
                    ));
                }
                return Err(Error::NonConvergence {
                    level,
                    iterations,
                    grad_norm: gn,
                });
            }
        }
        for (x, d) in v.iter_mut().zip(&d_full) {
            *x += alpha * d;
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn discretization(problem: &Problem) -> Discretization {
    let grid = problem.domain.grid(problem.params.n);
    let masses = problem.measure.cell_masses(&grid);
    Discretization::new(grid, problem.domain.dt, problem.params.p, problem.params.eps_reg, masses)
}

/// Runs all implicit steps up to `t_final`.
pub fn solve(problem: &Problem) -> Result<GridField> {
    let report = validate(&problem.params, &problem.domain);
    if !report.is_ok() {
        return Err(Error::InvalidParams(report.to_string()));
    }
    if problem.measure.n != problem.params.n {
        return Err(Error::InvalidParams("measure dimension differs from n".into()));
    }
    let disc = discretization(problem);
    let grid = disc.grid.clone();
    let mut levels = vec![initial_vector(problem, &grid)];
    let mut reports = Vec::new();
    for k in 1..=problem.domain.steps() {
        let (v, rep) = step(&disc, &levels[k - 1], &problem.params, k)?;
        levels.push(v);
        reports.push(rep);
    }
    Ok(GridField {
        domain: problem.domain.clone(),
        grid,
        levels,
        reports,
    })
}

/// Space-time box `[lo, hi] x [t_lo, t_hi]` selecting test functions.
#[derive(Clone, Copy, Debug)]
pub struct Window {
    pub lo: Point,
    pub hi: Point,
    pub t_lo: f64,
    pub t_hi: f64,
}

/// Largest residual of the discrete weak identity
/// `h^n (u^k - u^{k-1}) / dt . phi + sum_samples w |g|^{p-2} g . grad phi - sum phi mu(cell)`
/// over nodal test functions `phi` at interior cells with centre in the
/// window and levels `k >= 1` with `t_k` in `[t_lo, t_hi]`.
pub fn weak_residual(u: &GridField, mu: &RadonMeasure, params: &Params, window: &Window) -> Result<f64> {
    let g = &u.grid;
    let top = g.origin + g.side;
    for a in 0..g.n {
        let (l, h) = (window.lo.0[a], window.hi.0[a]);
        if !(l >= g.origin && h <= top && l <= h) {
            return Err(Error::domain(format!("window axis {a} [{l}, {h}] is not inside [{}, {top}]", g.origin)));
        }
    }
    if !(window.t_lo >= 0.0 && window.t_hi <= u.horizon() + 1e-12 * u.horizon() && window.t_lo <= window.t_hi) {
        return Err(Error::domain(format!(
            "window times [{}, {}] are not inside [0, {}]",
            window.t_lo,
            window.t_hi,
            u.horizon()
        )));
    }
    let masses = mu.cell_masses(g);
    let disc = Discretization::new(g.clone(), u.dt(), params.p, params.eps_reg, masses);
    let cells: Vec<usize> = disc
        .interior_cells()
        .iter()
        .copied()
        .filter(|&c| {
            let x = g.center(c);
            (0..g.n).all(|a| x.0[a] >= window.lo.0[a] && x.0[a] <= window.hi.0[a])
        })
        .collect();
    let mut worst: f64 = 0.0;
    for k in 1..u.num_levels() {
        let t = u.time(k);
        if t < window.t_lo || t > window.t_hi {
            continue;
        }
        let r = disc.gradient_cells(&u.levels[k], &u.levels[k - 1]);
        for &c in &cells {
            worst = worst.max(r[c].abs());
        }
    }
    Ok(worst)
}
