//! Truncated Wolff potential
//! `W(x, R) = int_0^R (mu(B_r(x)) / r^{n-p})^{1/(p-1)} dr / r`.
//!
//! Writing `alpha = (p - n)/(p - 1)`, the integrand is
//! `mu(B_r)^{1/(p-1)} r^{alpha - 1}`. The radial interval is cut at every atom
//! distance (where `r -> mu(B_r)` jumps) and each piece is integrated in a
//! variable that absorbs the power weight: `t = r^alpha` when `alpha > 0`,
//! `t = ln r` otherwise. On pieces where only atoms contribute the
//! transformed integrand is constant and the quadrature is exact.

use crate::error::{Error, Result};
use crate::grid::Point;
use crate::measure::RadonMeasure;
use crate::quadrature::{integrate, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WolffValue {
    Finite(f64),
    /// Non-integrable singularity at `r = 0` (an atom at the centre with
    /// `p <= n`).
    Divergent,
}

impl WolffValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            WolffValue::Finite(v) => Some(v),
            WolffValue::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, WolffValue::Divergent)
    }
}

impl std::fmt::Display for WolffValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WolffValue::Finite(v) => write!(f, "{v:.16e}"),
            WolffValue::Divergent => write!(f, "DIVERGENT"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WolffQuery {
    pub center: Point,
    /// Truncation radius `R`.
    pub radius: f64,
    pub p: f64,
    pub n: usize,
    pub rel_tol: f64,
}

impl WolffQuery {
    pub fn new(center: Point, radius: f64, p: f64, n: usize) -> Self {
        WolffQuery {
            center,
            radius,
            p,
            n,
            rel_tol: 1e-10,
        }
    }
}

fn check_exponent(p: f64, n: usize) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::domain(format!("Wolff potential needs p > 1, got {p}")));
    }
    if n == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    Ok(())
}

/// Exact potential of a single atom of mass `m` at distance `dist` from the
/// centre.
pub fn wolff_closed_form_atom(m: f64, dist: f64, radius: f64, p: f64, n: usize) -> Result<WolffValue> {
    check_exponent(p, n)?;
    if !(radius > 0.0) {
        return Err(Error::domain(format!("truncation radius must be positive, got {radius}")));
    }
    if !(m >= 0.0) || !(dist >= 0.0) {
        return Err(Error::domain(format!("need m >= 0 and dist >= 0, got m = {m}, dist = {dist}")));
    }
    if m == 0.0 || dist >= radius {
        return Ok(WolffValue::Finite(0.0));
    }
    let nf = n as f64;
    if dist == 0.0 && p <= nf {
        return Ok(WolffValue::Divergent);
    }
    let scale = m.powf(1.0 / (p - 1.0));
    let value = if p == nf {
        scale * (radius.ln() - dist.ln())
    } else {
        let alpha = (p - nf) / (p - 1.0);
        scale * (radius.powf(alpha) - dist.powf(alpha)) / alpha
    };
    Ok(WolffValue::Finite(value))
}

/// Evaluates `W^mu_p(center, R)` by piecewise adaptive quadrature.
pub fn wolff_potential(mu: &RadonMeasure, q: &WolffQuery) -> Result<WolffValue> {
    check_exponent(q.p, q.n)?;
    let big_r = q.radius;
    if !(big_r > 0.0) {
        return Err(Error::domain(format!("truncation radius must be positive, got {big_r}")));
    }
    let p = q.p;
    let nf = q.n as f64;
    let inv = 1.0 / (p - 1.0);
    let alpha = (p - nf) / (p - 1.0);
    let c = q.center;

    let center_mass = mu.atom_mass_at(&c);
    if center_mass > 0.0 && p <= nf {
        return Ok(WolffValue::Divergent);
    }

    let r0 = mu.support_distance(&c);
    if r0 >= big_r {
        return Ok(WolffValue::Finite(0.0));
    }

    let atom_dists = mu.atom_distances(&c);
    let mut total = 0.0;
    let start = if center_mass > 0.0 {
        // closed-form head on [0, r_first) where only the centre atom is seen
        let next_atom = atom_dists.iter().copied().find(|&d| d > 0.0).unwrap_or(f64::INFINITY);
        let r_first = next_atom.min(mu.density_support_distance(&c)).min(big_r);
        total += center_mass.powf(inv) * r_first.powf(alpha) / alpha;
        r_first
    } else {
        r0
    };

    let mut cuts = vec![start];
    cuts.extend(atom_dists.iter().copied().filter(|&d| d > start && d < big_r));
    cuts.push(big_r);
    cuts.dedup();

    let tol = Tolerance::relative(q.rel_tol);
    let f = |r: f64| mu.ball_mass_unchecked(&c, r).powf(inv);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let piece = if alpha > 0.0 {
            integrate(|t: f64| f(t.powf(1.0 / alpha)), a.powf(alpha), b.powf(alpha), &tol).value / alpha
        } else if a > 0.0 {
            integrate(|s: f64| f(s.exp()) * (alpha * s).exp(), a.ln(), b.ln(), &tol).value
        } else {
            integrate(|r: f64| f(r) * r.powf(alpha - 1.0), a, b, &tol).value
        };
        total += piece;
    }
    Ok(WolffValue::Finite(total))
}
