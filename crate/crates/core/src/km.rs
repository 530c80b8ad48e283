//! Kilpelainen-Maly level iteration on a discrete solution.
//!
//! Around a point `(y, s)` and for radii `rho_j = rho 2^{-j}` the iteration
//! builds levels `l_0 = 0 < l_1 < ...` with gaps `delta_j = l_{j+1} - l_j`,
//! choosing each gap from the normalized level-excess functional `A_j(l)`
//! evaluated on intrinsic cylinders
//! `B_{rho_j}(y) x (s - (l - l_j)^{2-p} rho_j^p, s + (l - l_j)^{2-p} rho_j^p)`.
//!
//! On the grid, space integrals are midpoint sums over cells whose centre lies
//! in the ball. In time the field is read as constant on each time cell
//! `[t_k - dt/2, t_k + dt/2]`: the space-time term integrates the time cutoff
//! exactly over the part of each cell inside the window, and the sup term
//! takes the cutoff at the point of the cell nearest `s`. The centre time `s`
//! is snapped to the nearest level. With these choices `A_j` is continuous
//! and nonincreasing in `l` even when the window is shorter than `dt`.

use crate::error::{Error, Result};
use crate::grid::Point;
use crate::measure::RadonMeasure;
use crate::params::Params;
use crate::quadrature::{integrate, Tolerance};
use crate::solver::GridField;

/// `G(u) = u` for `u > 1`, `u^{2 - 2 lambda}` for `0 < u <= 1`, `G(0) = 0`.
pub fn g_weight(u: f64, lambda: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::domain(format!("G needs u >= 0, got {u}")));
    }
    Ok(g_unchecked(u, lambda))
}

#[inline]
fn g_unchecked(u: f64, lambda: f64) -> f64 {
    if u > 1.0 {
        u
    } else if u > 0.0 {
        u.powf(2.0 - 2.0 * lambda)
    } else {
        0.0
    }
}

/// `int_0^z (1 + w)^{-(1-lambda)/p} w^{-2 lambda/p} dw`.
///
/// The substitution `w = v^{1/(1-a)}`, `a = 2 lambda / p`, removes the
/// endpoint singularity; the tail beyond `v = 1` is integrated in `ln v`.
pub fn psi_normalized(z: f64, lambda: f64, p: f64) -> f64 {
    if !(z > 0.0) {
        return 0.0;
    }
    let a = 2.0 * lambda / p;
    let b = (1.0 - lambda) / p;
    let e = 1.0 / (1.0 - a);
    let top = z.powf(1.0 - a);
    let tol = Tolerance::relative(1e-13);
    let f = |v: f64| (1.0 + v.powf(e)).powf(-b);
    let head = integrate(f, 0.0, top.min(1.0), &tol).value;
    let tail = if top > 1.0 {
        integrate(|s: f64| f(s.exp()) * s.exp(), 0.0, top.ln(), &tol).value
    } else {
        0.0
    };
    e * (head + tail)
}

/// `psi(u) = (1/delta) [int_l^u (1 + (s-l)/delta)^{-(1-lambda)/p} ((s-l)/delta)^{-2 lambda/p} ds]_+`.
pub fn psi(u: f64, l: f64, delta: f64, lambda: f64, p: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::domain(format!("psi needs delta > 0, got {delta}")));
    }
    if u <= l {
        return Ok(0.0);
    }
    Ok(psi_normalized((u - l) / delta, lambda, p))
}

/// Exponent `p / (p - 1 - lambda)` linking `psi` to the normalized excess.
pub fn psi_exponent(lambda: f64, p: f64) -> f64 {
    p / (p - 1.0 - lambda)
}

/// Largest `c` with `c psi(z)^{p/(p-1-lambda)} <= z` for all `z > 0`,
/// approximated by minimizing the ratio over a logarithmic grid together
/// with its `z -> infinity` limit.
pub fn psi_power_constant(lambda: f64, p: f64) -> f64 {
    let rho = psi_exponent(lambda, p);
    let limit = ((p - 1.0 - lambda) / p).powf(rho);
    (0..=480)
        .map(|i| 10f64.powf(-8.0 + i as f64 / 30.0))
        .map(|z| z / psi_normalized(z, lambda, p).powf(rho))
        .fold(limit, f64::min)
}

#[inline]
fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z * z * (3.0 - 2.0 * z)
}

/// Half-length `delta^{2-p} rho^p` of the intrinsic time window.
pub fn intrinsic_half_width(rho: f64, delta: f64, p: f64) -> f64 {
    delta.powf(2.0 - p) * rho.powf(p)
}

/// Space factor of the cutoff: 1 on `B_{rho/2}`, 0 outside `B_rho`.
pub fn cutoff_space(dist: f64, rho: f64) -> f64 {
    smoothstep((rho - dist) / (0.5 * rho))
}

/// Time factor of the cutoff: 1 for `|t - s| <= 3 tau / 4`, 0 beyond `tau`.
pub fn cutoff_time(dt_abs: f64, tau: f64) -> f64 {
    smoothstep((tau - dt_abs) / (0.25 * tau))
}

/// `int_{m_0}^{m_1} cutoff_time(m, tau)^e dm` for `0 <= m_0 <= m_1`.
fn time_cutoff_integral(m0: f64, m1: f64, tau: f64, e: f64) -> f64 {
    let flat_end = 0.75 * tau;
    let m1 = m1.min(tau);
    if m1 <= m0 {
        return 0.0;
    }
    let flat = (m1.min(flat_end) - m0).max(0.0);
    let (r0, r1) = (m0.max(flat_end), m1);
    let ramp = if r1 > r0 {
        // m = tau - z tau / 4
        let z0 = (tau - r1) / (0.25 * tau);
        let z1 = (tau - r0) / (0.25 * tau);
        0.25 * tau * integrate(|z: f64| smoothstep(z).powf(e), z0.max(0.0), z1.min(1.0), &Tolerance::relative(1e-13)).value
    } else {
        0.0
    };
    flat + ramp
}

/// Integral of `cutoff_time(|t - s|, tau)^e` over the time cell
/// `[offset - dt/2, offset + dt/2]` (times relative to `s`).
pub fn time_weight(offset: f64, dt: f64, tau: f64, e: f64) -> f64 {
    let (a, b) = (offset - 0.5 * dt, offset + 0.5 * dt);
    if a >= 0.0 {
        time_cutoff_integral(a, b, tau, e)
    } else if b <= 0.0 {
        time_cutoff_integral(-b, -a, tau, e)
    } else {
        time_cutoff_integral(0.0, -a, tau, e) + time_cutoff_integral(0.0, b, tau, e)
    }
}

/// Largest value of `cutoff_time(|t - s|, tau)` on the time cell around
/// `offset`.
pub fn time_peak(offset: f64, dt: f64, tau: f64) -> f64 {
    cutoff_time((offset.abs() - 0.5 * dt).max(0.0), tau)
}

/// Cubic-smoothstep bump equal to one on
/// `B_{rho_j/2}(y) x (s +- 3/4 delta^{2-p} rho_j^p)` and vanishing outside the
/// cylinder of radius `rho_j` and gap `delta`. Its gradient is at most
/// `3 / rho_j` in space and `6 delta^{p-2} rho_j^{-p}` in time.
pub fn cutoff(x: &Point, t: f64, y: &Point, s: f64, rho_j: f64, delta: f64, p: f64) -> f64 {
    let tau = intrinsic_half_width(rho_j, delta, p);
    cutoff_space(x.dist(y), rho_j) * cutoff_time((t - s).abs(), tau)
}

/// `B_rho(y) x (s - delta^{2-p} rho^p, s + delta^{2-p} rho^p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cylinder {
    pub y: Point,
    pub s: f64,
    pub rho: f64,
    pub delta: f64,
    pub p: f64,
}

impl Cylinder {
    pub fn half_width(&self) -> f64 {
        intrinsic_half_width(self.rho, self.delta, self.p)
    }

    pub fn contains(&self, x: &Point, t: f64) -> bool {
        x.dist(&self.y) < self.rho && (t - self.s).abs() < self.half_width()
    }

    /// Whether the cylinder lies inside `Omega_T` of `field`.
    pub fn inside(&self, field: &GridField) -> bool {
        let tau = self.half_width();
        let slack = 1e-12 * field.horizon().max(1.0);
        field.grid.contains_ball(&self.y, self.rho) && self.s - tau >= -slack && self.s + tau <= field.horizon() + slack
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `A_j(l_j + hat delta_j) <= kappa`: the default gap is kept.
    CapAccepted,
    /// The gap solves `A_j(l) = kappa`.
    RootFound,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::CapAccepted => "CAP_ACCEPTED",
            Branch::RootFound => "ROOT_FOUND",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KmState {
    pub j: usize,
    pub rho_j: f64,
    pub l_j: f64,
    pub delta_j: f64,
    pub branch: Branch,
    /// `A_j(l_{j+1})`.
    pub a_value: f64,
    /// The time window at `l_{j+1}` is shorter than one time step.
    pub window_collapsed: bool,
}

impl KmState {
    pub fn l_next(&self) -> f64 {
        self.l_j + self.delta_j
    }
}

/// Both terms of `A_j(l)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelExcess {
    /// `(l - l_j)^{p-2} rho_j^{-(n+p)} iint ((u - l_j)/(l - l_j))^{(1+lambda)(p-1)} xi^{k-p}`.
    pub space_time: f64,
    /// `sup_t rho_j^{-n} int G((u - l_j)/(l - l_j)) xi^k`.
    pub sup_slice: f64,
    pub window_collapsed: bool,
}

impl LevelExcess {
    pub fn value(&self) -> f64 {
        self.space_time + self.sup_slice
    }
}

/// A discrete field together with the point `(y, s)` and base radius `rho`
/// of one level iteration.
#[derive(Clone, Copy, Debug)]
pub struct KmContext<'a> {
    pub field: &'a GridField,
    pub params: &'a Params,
    pub y: Point,
    /// Level index nearest to the requested time `s`.
    pub s_level: usize,
    pub rho: f64,
}

impl<'a> KmContext<'a> {
    pub fn new(field: &'a GridField, params: &'a Params, y: Point, s: f64, rho: f64) -> Self {
        KmContext {
            field,
            params,
            y,
            s_level: field.nearest_level(s),
            rho,
        }
    }

    pub fn s(&self) -> f64 {
        self.field.time(self.s_level)
    }

    pub fn rho_j(&self, j: usize) -> f64 {
        self.rho * 0.5f64.powi(j as i32)
    }

    /// Default gap: `max(1, rho)` for `j = 0`, `rho_j` afterwards.
    pub fn default_gap(&self, j: usize) -> f64 {
        if j == 0 {
            self.rho.max(1.0)
        } else {
            self.rho_j(j)
        }
    }

    /// Checks the hypothesis `B_{2 rho}(y) x (s - 4 rho^2, s + 4 rho^2) ⊂ Omega_T`
    /// together with `0 < rho < 1`.
    pub fn check_containment(&self) -> Result<()> {
        let f = self.field;
        let s = self.s();
        let rho = self.rho;
        let slack = 1e-12 * f.horizon().max(1.0);
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::domain(format!("rho must lie in (0, 1), got {rho}")));
        }
        if !f.grid.contains_ball(&self.y, 2.0 * rho) {
            return Err(Error::domain(format!("B_(2 rho)(y) with rho = {rho} leaves the spatial domain")));
        }
        if s - 4.0 * rho * rho < -slack || s + 4.0 * rho * rho > f.horizon() + slack {
            return Err(Error::domain(format!(
                "time window (s - 4 rho^2, s + 4 rho^2) = ({}, {}) leaves (0, {})",
                s - 4.0 * rho * rho,
                s + 4.0 * rho * rho,
                f.horizon()
            )));
        }
        Ok(())
    }

    /// Time levels whose time cell meets `(s - tau, s + tau)`.
    fn window_levels(&self, tau: f64) -> std::ops::RangeInclusive<usize> {
        let dt = self.field.dt();
        let last = self.field.num_levels() - 1;
        let reach = ((tau + 0.5 * dt) / dt).ceil() as usize;
        let s = self.s();
        let lo = self.s_level.saturating_sub(reach);
        let hi = (self.s_level + reach).min(last);
        let inside = |k: usize| (self.field.time(k) - s).abs() < tau + 0.5 * dt;
        let lo = (lo..=self.s_level).find(|&k| inside(k)).unwrap_or(self.s_level);
        let hi = (self.s_level..=hi).rev().find(|&k| inside(k)).unwrap_or(self.s_level);
        lo..=hi
    }

    /// Evaluates `A_j(l)` for `l >= l_j + rho_j`.
    pub fn level_excess(&self, j: usize, l_j: f64, l: f64) -> Result<LevelExcess> {
        let rho_j = self.rho_j(j);
        let gap = l - l_j;
        if !(gap >= rho_j * (1.0 - 1e-12)) {
            return Err(Error::domain(format!(
                "A_{j}(l) needs l >= l_j + rho_j; got l - l_j = {gap}, rho_j = {rho_j}"
            )));
        }
        let p = self.params.p;
        let lambda = self.params.lambda;
        let k = self.params.k_cutoff;
        let n = self.field.grid.n as i32;
        let cyl = Cylinder {
            y: self.y,
            s: self.s(),
            rho: rho_j,
            delta: gap,
            p,
        };
        if !cyl.inside(self.field) {
            return Err(Error::domain(format!(
                "cylinder at j = {j} (rho_j = {rho_j}, half width {}) escapes Omega_T",
                cyl.half_width()
            )));
        }
        let tau = cyl.half_width();
        let dt = self.field.dt();
        let hn = self.field.grid.cell_volume();
        let s = self.s();
        let cells = self.field.grid.cells_in_ball(&self.y, rho_j);
        let space: Vec<f64> = cells
            .iter()
            .map(|&c| cutoff_space(self.field.grid.center(c).dist(&self.y), rho_j))
            .collect();
        let power = (1.0 + lambda) * (p - 1.0);

        let mut integral = 0.0;
        let mut sup: f64 = 0.0;
        for lvl in self.window_levels(tau) {
            let offset = self.field.time(lvl) - s;
            let peak = time_peak(offset, dt, tau);
            if peak == 0.0 {
                continue;
            }
            let weight = time_weight(offset, dt, tau, k - p);
            let u = &self.field.levels[lvl];
            let mut slice_int = 0.0;
            let mut slice_g = 0.0;
            for (&c, &xs) in cells.iter().zip(&space) {
                let excess = u[c] - l_j;
                if excess <= 0.0 {
                    continue;
                }
                let ratio = excess / gap;
                slice_int += ratio.powf(power) * xs.powf(k - p);
                slice_g += g_unchecked(ratio, lambda) * (xs * peak).powf(k);
            }
            integral += slice_int * hn * weight;
            sup = sup.max(slice_g * hn);
        }
        Ok(LevelExcess {
            space_time: gap.powf(p - 2.0) / rho_j.powi(n) / rho_j.powf(p) * integral,
            sup_slice: sup / rho_j.powi(n),
            window_collapsed: 2.0 * tau < dt,
        })
    }
}

/// Picks `l_{j+1}` from a nonincreasing functional `a`: keep
/// `l_j + default_gap` when `a` is at most `kappa` there, otherwise bracket
/// the crossing by doubling the offset and bisect to
/// `tol_root * default_gap`. The returned level always satisfies
/// `a(l_{j+1}) <= kappa`. Returns `(l_{j+1}, branch, a(l_{j+1}))`.
pub fn select_with<F>(mut a: F, j: usize, l_j: f64, default_gap: f64, kappa: f64, tol_root: f64) -> Result<(f64, Branch, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const MAX_DOUBLINGS: usize = 60;
    let cap = l_j + default_gap;
    let a_cap = a(cap)?;
    if a_cap <= kappa {
        return Ok((cap, Branch::CapAccepted, a_cap));
    }
    let mut lo = cap;
    let mut offset = 2.0 * default_gap;
    let mut hi = l_j + offset;
    let mut a_hi = a(hi)?;
    let mut doublings = 0;
    while a_hi >= kappa {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::LevelSearch { j, doublings: MAX_DOUBLINGS });
        }
        lo = hi;
        offset *= 2.0;
        hi = l_j + offset;
        a_hi = a(hi)?;
    }
    let width = tol_root * default_gap;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let a_mid = a(mid)?;
        if a_mid > kappa {
            lo = mid;
        } else {
            hi = mid;
            a_hi = a_mid;
        }
    }
    Ok((hi, Branch::RootFound, a_hi))
}

/// One step of the construction: chooses `delta_j` and `l_{j+1}` at index
/// `j` given `l_j`.
pub fn select_level(ctx: &KmContext<'_>, j: usize, l_j: f64) -> Result<KmState> {
    let gap = ctx.default_gap(j);
    let (l_next, branch, a_value) = select_with(
        |l| ctx.level_excess(j, l_j, l).map(|e| e.value()),
        j,
        l_j,
        gap,
        ctx.params.kappa,
        ctx.params.tol_root,
    )?;
    let delta = l_next - l_j;
    let collapsed = 2.0 * intrinsic_half_width(ctx.rho_j(j), delta, ctx.params.p) < ctx.field.dt();
    Ok(KmState {
        j,
        rho_j: ctx.rho_j(j),
        l_j,
        delta_j: delta,
        branch,
        a_value,
        window_collapsed: collapsed,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSequence {
    pub states: Vec<KmState>,
    /// Stopped because `delta_j` fell below a quarter of the mesh width.
    pub natural_termination: bool,
    /// `l_J`, the last level produced.
    pub l_final: f64,
}

impl LevelSequence {
    pub fn delta0(&self) -> f64 {
        self.states.first().map_or(0.0, |s| s.delta_j)
    }
}

/// Runs the level construction for `j = 0..=j_max`, stopping early once a
/// gap drops below `h / 4`.
pub fn run_iteration(field: &GridField, params: &Params, y: Point, s: f64, rho: f64, j_max: usize) -> Result<LevelSequence> {
    let ctx = KmContext::new(field, params, y, s, rho);
    ctx.check_containment()?;
    let floor = 0.25 * field.grid.h();
    let mut states = Vec::new();
    let mut l = 0.0;
    let mut natural = false;
    for j in 0..=j_max {
        let st = select_level(&ctx, j, l)?;
        l = st.l_next();
        states.push(st);
        if st.delta_j < floor {
            natural = true;
            break;
        }
    }
    Ok(LevelSequence {
        states,
        natural_termination: natural,
        l_final: l,
    })
}

/// Empirical constant of the one-step recursion
/// `delta_j <= delta_{j-1}/2 + rho_j + gamma (rho_j^{p-n} mu(B_j))^{1/(p-1)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecursionCheck {
    pub j: usize,
    /// `max(0, delta_j - delta_{j-1}/2 - rho_j)`.
    pub excess: f64,
    pub ball_mass: f64,
    /// `excess / (rho_j^{p-n} mu(B_j))^{1/(p-1)}`; zero when the excess is
    /// zero and infinite when the excess is positive on a massless ball.
    pub gamma: f64,
    pub violation: bool,
}

pub fn recursion_checks(seq: &LevelSequence, mu: &RadonMeasure, y: &Point, p: f64, n: usize) -> Vec<RecursionCheck> {
    seq.states
        .windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            let excess = (cur.delta_j - 0.5 * prev.delta_j - cur.rho_j).max(0.0);
            let mass = mu.ball_mass_unchecked(y, cur.rho_j);
            let scale = (cur.rho_j.powf(p - n as f64) * mass).powf(1.0 / (p - 1.0));
            let (gamma, violation) = if excess <= 0.0 {
                (0.0, false)
            } else if mass == 0.0 {
                (f64::INFINITY, true)
            } else {
                (excess / scale, false)
            };
            RecursionCheck {
                j: cur.j,
                excess,
                ball_mass: mass,
                gamma,
                violation,
            }
        })
        .collect()
}

/// Outcome of testing `c psi_j^{p/(p-1-lambda)} <= (u - l_j)/delta_j` on the
/// cells of every `L_j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiPowerCheck {
    pub constant: f64,
    pub samples: usize,
    pub violations: usize,
    /// Smallest observed `z / psi^rho`.
    pub min_ratio: f64,
}

pub fn psi_power_check(ctx: &KmContext<'_>, seq: &LevelSequence) -> PsiPowerCheck {
    let p = ctx.params.p;
    let lambda = ctx.params.lambda;
    let c = psi_power_constant(lambda, p);
    let rho_exp = psi_exponent(lambda, p);
    let mut samples = 0;
    let mut violations = 0;
    let mut min_ratio = f64::INFINITY;
    let s = ctx.s();
    for st in &seq.states {
        let tau = intrinsic_half_width(st.rho_j, st.delta_j, p);
        let cells = ctx.field.grid.cells_in_ball(&ctx.y, st.rho_j);
        for lvl in ctx.window_levels(tau) {
            if (ctx.field.time(lvl) - s).abs() >= tau && lvl != ctx.s_level {
                continue;
            }
            for &cell in &cells {
                let u = ctx.field.levels[lvl][cell];
                if u <= st.l_j {
                    continue;
                }
                let z = (u - st.l_j) / st.delta_j;
                let ps = psi_normalized(z, lambda, p).powf(rho_exp);
                samples += 1;
                min_ratio = min_ratio.min(z / ps);
                if c * ps > z * (1.0 + 1e-9) {
                    violations += 1;
                }
            }
        }
    }
    PsiPowerCheck {
        constant: c,
        samples,
        violations,
        min_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Domain;

    #[test]
    fn g_examples() {
        for lam in [0.1, 0.25, 0.5] {
            assert_eq!(g_weight(1.0, lam).unwrap(), 1.0);
        }
        assert_eq!(g_weight(2.0, 0.25).unwrap(), 2.0);
        assert!((g_weight(0.25, 0.25).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(g_weight(0.0, 0.3).unwrap(), 0.0);
        assert!(g_weight(-0.1, 0.3).is_err());
    }

    #[test]
    fn psi_zero_below_level_and_rejects_bad_gap() {
        assert_eq!(psi(0.5, 1.0, 1.0, 0.5, 3.0).unwrap(), 0.0);
        assert!(psi(2.0, 1.0, 0.0, 0.5, 3.0).is_err());
    }

    #[test]
    fn psi_lambda_zero_closed_form() {
        let exact = 1.5 * (2f64.powf(2.0 / 3.0) - 1.0);
        let got = psi(3.0, 2.0, 1.0, 0.0, 3.0).unwrap();
        assert!((got - exact).abs() < 1e-12, "{got} vs {exact}");
        assert!((exact - 0.8811).abs() < 1e-4);
    }

    #[test]
    fn psi_scales_with_gap() {
        // psi depends on (u - l)/delta only
        let a = psi(1.7, 0.2, 0.5, 0.4, 3.0).unwrap();
        let b = psi(3.2, 0.2, 1.0, 0.4, 3.0).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn cutoff_shape() {
        let y = Point::xy(0.0, 0.0);
        assert_eq!(cutoff(&y, 0.5, &y, 0.5, 0.2, 1.0, 3.0), 1.0);
        assert_eq!(cutoff(&Point::xy(0.25, 0.0), 0.5, &y, 0.5, 0.2, 1.0, 3.0), 0.0);
        // outside in time: tau = 0.2^3 = 0.008
        assert_eq!(cutoff(&y, 0.51, &y, 0.5, 0.2, 1.0, 3.0), 0.0);
        assert_eq!(cutoff(&Point::xy(0.1, 0.0), 0.5 + 0.006, &y, 0.5, 0.2, 1.0, 3.0), 1.0);
    }

    #[test]
    fn cutoff_gradient_bounds() {
        let y = Point::xy(0.0, 0.0);
        let rho = 0.3;
        let delta = 2.0;
        let p = 3.0;
        let tau = intrinsic_half_width(rho, delta, p);
        let h = 1e-6;
        let mut gx: f64 = 0.0;
        let mut gt: f64 = 0.0;
        for i in 0..=2000 {
            let r = rho * i as f64 / 2000.0;
            for m in 0..=50 {
                let t = 1.0 + tau * m as f64 / 50.0;
                let x = Point::xy(r, 0.0);
                let dx = (cutoff(&Point::xy(r + h, 0.0), t, &y, 1.0, rho, delta, p) - cutoff(&x, t, &y, 1.0, rho, delta, p)) / h;
                let dtt = (cutoff(&x, t + h * tau, &y, 1.0, rho, delta, p) - cutoff(&x, t, &y, 1.0, rho, delta, p)) / (h * tau);
                gx = gx.max(dx.abs());
                gt = gt.max(dtt.abs());
            }
        }
        assert!(gx <= 8.0 / rho, "space gradient {gx}");
        assert!(gt <= 8.0 * delta.powf(p - 2.0) / rho.powf(p), "time derivative {gt}");
    }

    #[test]
    fn time_weight_closed_forms() {
        let tau = 0.4;
        // whole window inside one cell: flat part 2 * 0.3, ramp 2 * 0.1 * int S^2
        let ramp_sq = 9.0 / 5.0 - 2.0 + 4.0 / 7.0;
        let w = time_weight(0.0, 2.0, tau, 2.0);
        assert!((w - (0.6 + 0.2 * ramp_sq)).abs() < 1e-14, "{w}");
        // int_0^1 S = 1/2
        let w1 = time_weight(0.0, 2.0, tau, 1.0);
        assert!((w1 - (0.6 + 0.1)).abs() < 1e-14);
        // exponent zero measures the overlap length
        assert!((time_weight(0.35, 0.2, tau, 0.0) - 0.15).abs() < 1e-14);
        assert_eq!(time_weight(0.6, 0.2, tau, 2.0), 0.0);
        // cells tile the line: weights add up to the full integral
        let dt = 0.07;
        let total: f64 = (-10..=10).map(|i| time_weight(i as f64 * dt, dt, tau, 2.0)).sum();
        assert!((total - w).abs() < 1e-13);
    }

    #[test]
    fn time_peak_uses_nearest_point() {
        assert_eq!(time_peak(0.0, 0.1, 0.01), 1.0);
        assert_eq!(time_peak(0.1, 0.1, 0.04), cutoff_time(0.05, 0.04));
        assert_eq!(time_peak(0.2, 0.1, 0.1), 0.0);
    }

    #[test]
    fn selection_finds_surrogate_root() {
        // A(l) = 1 / (l - l_j)^2 crosses kappa = 0.04 at l - l_j = 5
        let (l, br, a) = select_with(|l| Ok(1.0 / (l - 1.0).powi(2)), 3, 1.0, 0.25, 0.04, 1e-10).unwrap();
        assert_eq!(br, Branch::RootFound);
        assert!(a <= 0.04);
        assert!((l - 6.0).abs() <= 1e-10 * 0.25 * 1.0001);
    }

    #[test]
    fn selection_keeps_cap_when_small() {
        let (l, br, a) = select_with(|_| Ok(0.01), 0, 2.0, 1.0, 0.1, 1e-10).unwrap();
        assert_eq!((l, br, a), (3.0, Branch::CapAccepted, 0.01));
    }

    #[test]
    fn selection_gives_up_on_flat_functional() {
        let r = select_with(|_| Ok(1.0), 2, 0.0, 1.0, 0.1, 1e-10);
        assert!(matches!(r, Err(Error::LevelSearch { j: 2, .. })));
    }

    #[test]
    fn zero_field_caps_every_step() {
        let d = Domain::new(1.0, 32, 1.0, 0.01);
        let f = GridField::from_fn(1, &d, |_, _| 0.0);
        let mut params = Params::model(1, 3.0);
        params.lambda = 0.5;
        let seq = run_iteration(&f, &params, Point::on_line(0.5), 0.5, 0.2, 30).unwrap();
        assert!(seq.states.iter().all(|s| s.branch == Branch::CapAccepted && s.a_value == 0.0));
        let expected: f64 = 1.0 + seq.states[1..].iter().map(|s| s.rho_j).sum::<f64>();
        assert!((seq.l_final - expected).abs() < 1e-14);
        assert!(seq.natural_termination);
    }

    #[test]
    fn containment_is_enforced() {
        let d = Domain::new(1.0, 32, 1.0, 0.01);
        let f = GridField::from_fn(1, &d, |_, _| 0.0);
        let params = Params::model(1, 3.0);
        assert!(run_iteration(&f, &params, Point::on_line(0.1), 0.5, 0.2, 5).is_err());
        assert!(run_iteration(&f, &params, Point::on_line(0.5), 0.1, 0.2, 5).is_err());
        assert!(run_iteration(&f, &params, Point::on_line(0.5), 0.5, 0.0, 5).is_err());
    }

    #[test]
    fn level_below_minimum_gap_is_rejected() {
        let d = Domain::new(1.0, 32, 1.0, 0.01);
        let f = GridField::from_fn(1, &d, |_, _| 0.0);
        let params = Params::model(1, 3.0);
        let ctx = KmContext::new(&f, &params, Point::on_line(0.5), 0.5, 0.2);
        assert!(ctx.level_excess(1, 0.0, 0.05).is_err());
        assert_eq!(ctx.level_excess(1, 0.0, 0.1).unwrap().value(), 0.0);
    }

    fn state(j: usize, rho_j: f64, delta_j: f64) -> KmState {
        KmState {
            j,
            rho_j,
            l_j: 0.0,
            delta_j,
            branch: Branch::RootFound,
            a_value: 0.0,
            window_collapsed: false,
        }
    }

    #[test]
    fn recursion_gamma_by_hand() {
        let y = Point::on_line(0.5);
        let seq = LevelSequence {
            states: vec![state(0, 0.4, 2.0), state(1, 0.2, 1.5), state(2, 0.1, 0.5)],
            natural_termination: false,
            l_final: 4.0,
        };
        // atom of mass 0.25 at distance 0.15: inside B_0.2, outside B_0.1
        let mu = RadonMeasure::dirac(1, Point::on_line(0.65), 0.25).unwrap();
        let checks = recursion_checks(&seq, &mu, &y, 3.0, 1);
        assert_eq!(checks.len(), 2);
        // j = 1: excess 1.5 - 1.0 - 0.2 = 0.3, scale (0.2^2 * 0.25)^{1/2} = 0.1
        assert!((checks[0].excess - 0.3).abs() < 1e-15);
        assert!((checks[0].gamma - 3.0).abs() < 1e-12);
        assert!(!checks[0].violation);
        // j = 2: excess 0.5 - 0.75 - 0.1 < 0
        assert_eq!(checks[1].gamma, 0.0);
        assert!(!checks[1].violation);

        let far = RadonMeasure::dirac(1, Point::on_line(0.9), 1.0).unwrap();
        let flagged = recursion_checks(&seq, &far, &y, 3.0, 1);
        assert!(flagged[0].violation);
        assert!(flagged[0].gamma.is_infinite());
    }

    #[test]
    fn psi_power_constant_bounds_ratio() {
        for &(lam, p) in &[(0.5, 3.0), (0.25, 3.0), (1.0, 3.0), (0.5, 2.0)] {
            let c = psi_power_constant(lam, p);
            assert!(c > 0.0);
            let rho = psi_exponent(lam, p);
            for i in 0..200 {
                let z = 10f64.powf(-6.0 + i as f64 * 0.061);
                assert!(c * psi_normalized(z, lam, p).powf(rho) <= z * (1.0 + 1e-6), "lam={lam} p={p} z={z}");
            }
        }
    }
}
