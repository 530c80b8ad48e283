//! End-to-end checks of the pointwise bound
//! `u(y, s) <= gamma (avg + 1 + W(y, 2 rho))` on solved scenarios.

pub mod config;
pub mod report;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Point;
use crate::km::{psi_power_check, recursion_checks, run_iteration, KmContext, LevelSequence, PsiPowerCheck, RecursionCheck};
use crate::measure::RadonMeasure;
use crate::params::Params;
use crate::solver::{discretization, solve, GridField};
use crate::wolff::{wolff_potential, WolffQuery, WolffValue};
pub use config::{load_config, parse_config, Scenario, VerificationPoint};

/// Right-hand side of the pointwise bound at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    /// `(rho^{-(p+n)} iint_{B_rho x (s - rho^p, s + rho^p)} u_+^{(1+lambda)(p-1)})^{1/(1+lambda(p-1))}`.
    pub avg_term: f64,
    pub wolff_term: WolffValue,
}

impl Bracket {
    /// `avg + 1 + W`, `None` when the potential diverges.
    pub fn value(&self) -> Option<f64> {
        self.wolff_term.finite().map(|w| self.avg_term + 1.0 + w)
    }
}

/// Average term with cells whose centre lies in `B_rho(y)`, the field read as
/// constant on each time cell `[t_k - dt/2, t_k + dt/2]`, and `s` snapped to
/// its nearest level. The time window is clipped to the solved interval.
pub fn average_term(u: &GridField, params: &Params, pt: &VerificationPoint) -> f64 {
    let p = params.p;
    let n = u.grid.n as i32;
    let lambda = params.lambda;
    let power = (1.0 + lambda) * (p - 1.0);
    let half = pt.rho.powf(p);
    let s = u.time(u.nearest_level(pt.s));
    let cells = u.grid.cells_in_ball(&pt.y, pt.rho);
    let hn = u.grid.cell_volume();
    let (lo, hi) = ((s - half).max(0.0), (s + half).min(u.horizon()));
    let mut sum = 0.0;
    for k in 0..u.num_levels() {
        let t = u.time(k);
        let overlap = (hi.min(t + 0.5 * u.dt()) - lo.max(t - 0.5 * u.dt())).max(0.0);
        if overlap == 0.0 {
            continue;
        }
        sum += cells.iter().map(|&c| u.levels[k][c].max(0.0).powf(power)).sum::<f64>() * hn * overlap;
    }
    (sum / pt.rho.powf(p) / pt.rho.powi(n)).powf(1.0 / (1.0 + lambda * (p - 1.0)))
}

/// Both nonconstant terms of the bracket. Errors if the point violates the
/// containment hypothesis for this field.
pub fn theorem_rhs_bracket(u: &GridField, mu: &RadonMeasure, pt: &VerificationPoint, params: &Params) -> Result<Bracket> {
    let ctx = KmContext::new(u, params, pt.y, pt.s, pt.rho);
    ctx.check_containment()?;
    let wolff = wolff_potential(mu, &WolffQuery::new(pt.y, 2.0 * pt.rho, params.p, params.n))?;
    Ok(Bracket {
        avg_term: average_term(u, params, pt),
        wolff_term: wolff,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Bounded,
    Vacuous,
    ViolationFlag,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Bounded => "BOUNDED",
            Verdict::Vacuous => "VACUOUS",
            Verdict::ViolationFlag => "VIOLATION-FLAG",
        }
    }
}

/// Everything measured at one verification point on one rung.
#[derive(Clone, Debug)]
pub struct PointReport {
    pub point: VerificationPoint,
    pub u_value: f64,
    pub bracket: Bracket,
    /// `max(u, 0) / bracket`, `None` if the bracket diverges.
    pub gamma_emp: Option<f64>,
    pub levels: LevelSequence,
    /// `l_J / (delta_0 + rho + W)`.
    pub gamma_lj: Option<f64>,
    pub recursion: Vec<RecursionCheck>,
    /// `delta_0 / (avg + 1 + rho)`.
    pub gamma_delta0: f64,
    pub psi_check: PsiPowerCheck,
    pub verdict: Verdict,
}

impl PointReport {
    pub fn max_gamma_j(&self) -> f64 {
        self.recursion.iter().map(|r| r.gamma).fold(0.0, f64::max)
    }

    pub fn recursion_violated(&self) -> bool {
        self.recursion.iter().any(|r| r.violation)
    }
}

/// Reads `u(y, s)`, the bracket and the level construction at one point.
///
/// The verdict is VACUOUS when the potential diverges, VIOLATION-FLAG when
/// any empirical constant exceeds `gamma_cap` or the one-step recursion has a
/// positive excess on a massless ball, and BOUNDED otherwise.
pub fn verify_point(u: &GridField, mu: &RadonMeasure, params: &Params, pt: &VerificationPoint, gamma_cap: f64, j_max: usize) -> Result<PointReport> {
    let bracket = theorem_rhs_bracket(u, mu, pt, params)?;
    let u_value = u.sample(&pt.y, pt.s);
    let levels = run_iteration(u, params, pt.y, pt.s, pt.rho, j_max)?;
    let recursion = recursion_checks(&levels, mu, &pt.y, params.p, params.n);
    let ctx = KmContext::new(u, params, pt.y, pt.s, pt.rho);
    let psi_check = psi_power_check(&ctx, &levels);
    let delta0 = levels.delta0();
    let gamma_delta0 = delta0 / (bracket.avg_term + 1.0 + pt.rho);
    let gamma_emp = bracket.value().map(|b| u_value.max(0.0) / b);
    let gamma_lj = bracket.wolff_term.finite().map(|w| levels.l_final / (delta0 + pt.rho + w));
    let verdict = match gamma_emp {
        None => Verdict::Vacuous,
        Some(g) => {
            let km_max = recursion.iter().map(|r| r.gamma).fold(gamma_delta0, f64::max).max(gamma_lj.unwrap_or(0.0));
            if g <= gamma_cap && km_max <= gamma_cap && !recursion.iter().any(|r| r.violation) {
                Verdict::Bounded
            } else {
                Verdict::ViolationFlag
            }
        }
    };
    Ok(PointReport {
        point: *pt,
        u_value,
        bracket,
        gamma_emp,
        levels,
        gamma_lj,
        recursion,
        gamma_delta0,
        psi_check,
        verdict,
    })
}

/// Solver-level audit of one rung.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveSummary {
    pub steps: usize,
    pub max_iterations: usize,
    pub max_grad_norm: f64,
    pub min_value: f64,
    /// Largest increase of the discrete p-Dirichlet energy between
    /// consecutive levels (zero if it never rises).
    pub max_energy_rise: f64,
}

pub fn summarize_field(u: &GridField, disc_energy: impl Fn(&[f64]) -> f64) -> SolveSummary {
    let energies: Vec<f64> = u.levels.iter().map(|v| disc_energy(v)).collect();
    SolveSummary {
        steps: u.reports.len(),
        max_iterations: u.reports.iter().map(|r| r.iterations).max().unwrap_or(0),
        max_grad_norm: u.reports.iter().map(|r| r.grad_norm).fold(0.0, f64::max),
        min_value: u.levels.iter().flatten().copied().fold(f64::INFINITY, f64::min),
        max_energy_rise: energies.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max),
    }
}

/// Outcome of one scenario on one rung.
#[derive(Clone, Debug)]
pub struct RungResult {
    pub rung: usize,
    pub cells: usize,
    pub dt: f64,
    pub field: std::result::Result<GridField, String>,
    pub summary: Option<SolveSummary>,
    pub points: Vec<std::result::Result<PointReport, String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Solve only.
    Solve,
    /// Solve and run the level construction and the bracket at every point.
    Verify,
}

pub fn run_rung(sc: &Scenario, rung: usize, stage: Stage) -> RungResult {
    let problem = sc.problem(rung);
    let (cells, dt) = sc.ladder[rung];
    let field = solve(&problem).map_err(|e| e.to_string());
    let summary = field.as_ref().ok().map(|u| {
        let disc = discretization(&problem);
        summarize_field(u, |v| disc.dirichlet_energy(v))
    });
    let points = match (&field, stage) {
        (Ok(u), Stage::Verify) => sc
            .points
            .iter()
            .map(|pt| verify_point(u, &sc.measure, &sc.params, pt, sc.gamma_cap, sc.j_max).map_err(|e| e.to_string()))
            .collect(),
        _ => Vec::new(),
    };
    RungResult {
        rung,
        cells,
        dt,
        field,
        summary,
        points,
    }
}

/// Runs the selected rungs (all if `only` is `None`) of every scenario in
/// parallel. Results come back ordered by scenario, then rung.
pub fn run_scenarios(scenarios: &[Scenario], only: Option<usize>, stage: Stage) -> Result<Vec<Vec<RungResult>>> {
    let mut jobs = Vec::new();
    for (si, sc) in scenarios.iter().enumerate() {
        match only {
            Some(r) if r >= sc.ladder.len() => {
                return Err(Error::Config(format!(
                    "rung {r} requested but scenario {} has {} rung(s)",
                    sc.name,
                    sc.ladder.len()
                )))
            }
            Some(r) => jobs.push((si, r)),
            None => jobs.extend((0..sc.ladder.len()).map(|r| (si, r))),
        }
    }
    let done: Vec<(usize, RungResult)> = jobs.par_iter().map(|&(si, r)| (si, run_rung(&scenarios[si], r, stage))).collect();
    let mut out: Vec<Vec<RungResult>> = scenarios.iter().map(|_| Vec::new()).collect();
    for (si, rr) in done {
        out[si].push(rr);
    }
    Ok(out)
}

/// Wolff potentials at `(y, 2 rho)` for every point and at every extra query.
pub fn wolff_table(sc: &Scenario) -> Result<Vec<(Point, f64, WolffValue)>> {
    let p = sc.params.p;
    let n = sc.params.n;
    let mut out = Vec::new();
    for pt in &sc.points {
        out.push((pt.y, 2.0 * pt.rho, wolff_potential(&sc.measure, &WolffQuery::new(pt.y, 2.0 * pt.rho, p, n))?));
    }
    for &(c, r) in &sc.queries {
        out.push((c, r, wolff_potential(&sc.measure, &WolffQuery::new(c, r, p, n))?));
    }
    Ok(out)
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_change(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}
