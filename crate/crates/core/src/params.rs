//! Problem constants, discretization geometry and their validation.

use crate::grid::Grid;

/// Scalar constants of the model problem and of the numerical machinery.
///
/// The flux is always the model p-Laplacian; `c1` and `c2` are recorded for
/// reporting only.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub n: usize,
    pub p: f64,
    pub lambda: f64,
    pub kappa: f64,
    /// Threshold of the small/large split of the level sets.
    pub eps_split: f64,
    pub c1: f64,
    pub c2: f64,
    pub k_cutoff: f64,
    /// Gradient regularization `|g|_eps = sqrt(|g|^2 + eps^2)`.
    pub eps_reg: f64,
    pub tol_root: f64,
    pub tol_newton: f64,
    pub max_newton_iter: usize,
}

impl Params {
    /// Defaults for dimension `n` and exponent `p`: `lambda = 1/(2n)`,
    /// `kappa = eps_split = 0.1`, `k = p + 2`.
    pub fn model(n: usize, p: f64) -> Self {
        Params {
            n,
            p,
            lambda: 0.5 / n.max(1) as f64,
            kappa: 0.1,
            eps_split: 0.1,
            c1: 1.0,
            c2: 1.0,
            k_cutoff: p + 2.0,
            eps_reg: 1e-8,
            tol_root: 1e-10,
            tol_newton: 1e-9,
            max_newton_iter: 200,
        }
    }
}

/// Space-time discretization of `Omega_T = [origin, origin + side]^n x (0, T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub side_length: f64,
    pub cells_per_axis: usize,
    pub t_final: f64,
    pub dt: f64,
    pub origin: f64,
}

impl Domain {
    pub fn new(side_length: f64, cells_per_axis: usize, t_final: f64, dt: f64) -> Self {
        Domain {
            side_length,
            cells_per_axis,
            t_final,
            dt,
            origin: 0.0,
        }
    }

    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = origin;
        self
    }

    pub fn h(&self) -> f64 {
        self.side_length / self.cells_per_axis as f64
    }

    pub fn grid(&self, n: usize) -> Grid {
        Grid::new(n, self.origin, self.side_length, self.cells_per_axis)
    }

    /// Number of implicit steps; `t_final` is rounded to a whole number of
    /// steps.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }

    /// End time actually reached by [`Domain::steps`] steps.
    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub constraint: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, constraint: &str) -> bool {
        self.violations.iter().any(|v| v.constraint == constraint)
    }

    fn check(&mut self, ok: bool, constraint: &'static str, detail: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(Violation {
                constraint,
                detail: detail(),
            });
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{} ({})", v.constraint, v.detail))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every parameter and domain constraint. Never panics; NaN values
/// fail every comparison and are reported as violations.
pub fn validate(params: &Params, domain: &Domain) -> ValidationReport {
    let mut r = ValidationReport::default();
    let Params {
        n,
        p,
        lambda,
        kappa,
        eps_split,
        c1,
        c2,
        k_cutoff,
        eps_reg,
        tol_root,
        tol_newton,
        max_newton_iter,
    } = *params;

    r.check(n == 1 || n == 2, "n in {1, 2}", || format!("n = {n}"));
    r.check(p >= 2.0 && p.is_finite(), "p >= 2", || format!("p = {p}"));
    let inv_n = 1.0 / n.max(1) as f64;
    r.check(lambda > 0.0 && lambda <= inv_n, "0 < lambda <= 1/n", || {
        format!("lambda = {lambda}, n = {n}")
    });
    r.check(kappa > 0.0 && kappa < 1.0, "0 < kappa < 1", || format!("kappa = {kappa}"));
    r.check(eps_split > 0.0 && eps_split < 1.0, "0 < eps_split < 1", || {
        format!("eps_split = {eps_split}")
    });
    r.check(k_cutoff > p && k_cutoff.is_finite(), "k_cutoff > p", || {
        format!("k_cutoff = {k_cutoff}, p = {p}")
    });
    r.check(c1 > 0.0 && c1 <= c2 && c2.is_finite(), "0 < c1 <= c2", || {
        format!("c1 = {c1}, c2 = {c2}")
    });
    r.check(eps_reg > 0.0 && eps_reg.is_finite(), "eps_reg > 0", || {
        format!("eps_reg = {eps_reg}")
    });
    r.check(tol_root > 0.0 && tol_root < 1.0, "0 < tol_root < 1", || {
        format!("tol_root = {tol_root}")
    });
    r.check(tol_newton > 0.0 && tol_newton.is_finite(), "tol_newton > 0", || {
        format!("tol_newton = {tol_newton}")
    });
    r.check(max_newton_iter >= 1, "max_newton_iter >= 1", || {
        format!("max_newton_iter = {max_newton_iter}")
    });

    let Domain {
        side_length,
        cells_per_axis,
        t_final,
        dt,
        origin,
    } = *domain;
    r.check(cells_per_axis >= 4, "cells_per_axis >= 4", || {
        format!("cells_per_axis = {cells_per_axis}")
    });
    r.check(side_length > 0.0 && side_length.is_finite(), "h > 0", || {
        format!("side_length = {side_length}")
    });
    r.check(origin.is_finite(), "origin finite", || format!("origin = {origin}"));
    r.check(dt > 0.0 && dt.is_finite(), "dt > 0", || format!("dt = {dt}"));
    r.check(t_final >= dt && t_final.is_finite(), "t_final >= dt", || {
        format!("t_final = {t_final}, dt = {dt}")
    });
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> (Params, Domain) {
        let mut p = Params::model(2, 3.0);
        p.lambda = 0.5;
        p.kappa = 0.5;
        p.eps_split = 0.5;
        p.k_cutoff = 5.0;
        (p, Domain::new(1.0, 16, 1.0, 0.1))
    }

    #[test]
    fn accepts_admissible_set() {
        let (p, d) = base();
        assert!(validate(&p, &d).is_ok());
    }

    #[test]
    fn lambda_above_inverse_dimension() {
        let (mut p, d) = base();
        p.lambda = 0.6;
        let r = validate(&p, &d);
        assert!(r.has("0 < lambda <= 1/n"));
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn singular_exponent_rejected() {
        let (mut p, d) = base();
        p.p = 1.5;
        let r = validate(&p, &d);
        assert!(r.has("p >= 2"));
        // k = 5 > 1.5 is still fine, nothing else trips
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn domain_constraints() {
        let (p, _) = base();
        let d = Domain::new(1.0, 3, 0.05, 0.1);
        let r = validate(&p, &d);
        assert!(r.has("cells_per_axis >= 4"));
        assert!(r.has("t_final >= dt"));
    }

    #[test]
    fn nan_is_reported_not_panicking() {
        let (mut p, mut d) = base();
        p.p = f64::NAN;
        p.kappa = f64::NAN;
        d.dt = f64::NAN;
        let r = validate(&p, &d);
        assert!(r.has("p >= 2"));
        assert!(r.has("0 < kappa < 1"));
        assert!(r.has("dt > 0"));
    }
}
