//! Scenario files.
//!
//! ```toml
//! [[scenario]]
//! name = "atom-1d"
//! gamma_cap = 100.0          # optional
//! j_max = 60                 # optional
//!
//! [scenario.params]
//! n = 1
//! p = 3.0                    # lambda, kappa, ... fall back to Params::model
//!
//! [scenario.grid]
//! side_length = 1.0
//! origin = 0.0               # optional
//! t_final = 0.5
//! ladder = [[64, 2e-3], [128, 1e-3]]
//!
//! [scenario.initial]
//! kind = "constant"          # or "gaussian" / "linear"
//! value = 0.0
//!
//! [scenario.boundary]
//! kind = "constant"          # or "from_initial"
//! value = 0.0
//!
//! [scenario.measure]
//! atoms = [{ at = [0.5], mass = 1.0 }]
//! density = { value = 0.0 } # or { cells_per_axis = 4, values = [...] }
//!
//! [[scenario.point]]
//! y = [0.5]
//! s = 0.3
//! rho = 0.2
//!
//! [[scenario.query]]         # extra Wolff evaluations
//! center = [0.5]
//! radius = 0.25
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, Point};
use crate::measure::{Atom, DensityGrid, RadonMeasure};
use crate::params::{validate, Domain, Params};
use crate::solver::{Boundary, Initial, Problem};

pub const DEFAULT_GAMMA_CAP: f64 = 100.0;
pub const DEFAULT_J_MAX: usize = 60;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub scenario: Vec<ScenarioSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub gamma_cap: Option<f64>,
    #[serde(default)]
    pub j_max: Option<usize>,
    pub params: ParamsSpec,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub measure: MeasureSpec,
    #[serde(default)]
    pub point: Vec<PointSpec>,
    #[serde(default)]
    pub query: Vec<QuerySpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub n: usize,
    pub p: f64,
    pub lambda: Option<f64>,
    pub kappa: Option<f64>,
    pub eps_split: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub k_cutoff: Option<f64>,
    pub eps_reg: Option<f64>,
    pub tol_root: Option<f64>,
    pub tol_newton: Option<f64>,
    pub max_newton_iter: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub side_length: f64,
    #[serde(default)]
    pub origin: f64,
    pub t_final: f64,
    pub ladder: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant { value: f64 },
    Gaussian { center: Vec<f64>, width: f64, amplitude: f64 },
    Linear { slope: Vec<f64>, offset: f64 },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    Constant { value: f64 },
    FromInitial,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default)]
    pub density: Option<DensitySpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub at: Vec<f64>,
    pub mass: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub value: Option<f64>,
    pub cells_per_axis: Option<usize>,
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub y: Vec<f64>,
    pub s: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// A point `(y, s)` with base radius `rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerificationPoint {
    pub y: Point,
    pub s: f64,
    pub rho: f64,
}

/// A validated scenario, ready to run on any rung of its ladder.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub params: Params,
    pub side_length: f64,
    pub origin: f64,
    pub t_final: f64,
    pub ladder: Vec<(usize, f64)>,
    pub initial: Initial,
    pub boundary: Boundary,
    pub measure: RadonMeasure,
    pub points: Vec<VerificationPoint>,
    pub queries: Vec<(Point, f64)>,
    pub gamma_cap: f64,
    pub j_max: usize,
}

impl Scenario {
    pub fn domain(&self, rung: usize) -> Domain {
        let (cells, dt) = self.ladder[rung];
        Domain::new(self.side_length, cells, self.t_final, dt).with_origin(self.origin)
    }

    pub fn problem(&self, rung: usize) -> Problem {
        Problem {
            params: self.params.clone(),
            domain: self.domain(rung),
            measure: self.measure.clone(),
            initial: self.initial.clone(),
            boundary: self.boundary.clone(),
        }
    }

    /// `B_{2 rho}(y) x (s - 4 rho^2, s + 4 rho^2)` inside the space-time box
    /// and `0 < rho < 1`.
    pub fn check_point(&self, pt: &VerificationPoint) -> std::result::Result<(), String> {
        let rho = pt.rho;
        if !(rho > 0.0 && rho < 1.0) {
            return Err(format!("rho = {rho} is not in (0, 1)"));
        }
        let n = self.params.n;
        let top = self.origin + self.side_length;
        for a in 0..n {
            let c = pt.y.0[a];
            if c - 2.0 * rho < self.origin || c + 2.0 * rho > top {
                return Err(format!("B_(2 rho)(y) leaves the domain along axis {a}"));
            }
        }
        let r2 = 4.0 * rho * rho;
        if pt.s - r2 < 0.0 || pt.s + r2 > self.t_final {
            return Err(format!("(s - 4 rho^2, s + 4 rho^2) = ({}, {}) leaves (0, {})", pt.s - r2, pt.s + r2, self.t_final));
        }
        Ok(())
    }
}

fn coords(v: &[f64], n: usize, key: &str) -> Result<Point> {
    if v.len() != n {
        return Err(Error::Config(format!("{key}: expected {n} coordinate(s), got {}", v.len())));
    }
    Ok(Point::new(v))
}

fn params_from(spec: &ParamsSpec) -> Params {
    let mut p = Params::model(spec.n, spec.p);
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut p.lambda, spec.lambda);
    set(&mut p.kappa, spec.kappa);
    set(&mut p.eps_split, spec.eps_split);
    set(&mut p.c1, spec.c1);
    set(&mut p.c2, spec.c2);
    set(&mut p.k_cutoff, spec.k_cutoff);
    set(&mut p.eps_reg, spec.eps_reg);
    set(&mut p.tol_root, spec.tol_root);
    set(&mut p.tol_newton, spec.tol_newton);
    if let Some(m) = spec.max_newton_iter {
        p.max_newton_iter = m;
    }
    p
}

impl ScenarioSpec {
    pub fn build(&self, index: usize) -> Result<Scenario> {
        let key = format!("scenario[{index}] ({})", self.name);
        let params = params_from(&self.params);
        let n = params.n;
        if self.grid.ladder.is_empty() {
            return Err(Error::Config(format!("{key}.grid.ladder: at least one (cells, dt) rung is required")));
        }
        let sc_domain = |cells: usize, dt: f64| Domain::new(self.grid.side_length, cells, self.grid.t_final, dt).with_origin(self.grid.origin);
        for (r, &(cells, dt)) in self.grid.ladder.iter().enumerate() {
            let report = validate(&params, &sc_domain(cells, dt));
            if !report.is_ok() {
                return Err(Error::Config(format!("{key}.grid.ladder[{r}]: {report}")));
            }
        }
        let initial = match &self.initial {
            InitialSpec::Constant { value } => Initial::Constant(*value),
            InitialSpec::Gaussian { center, width, amplitude } => Initial::Gaussian {
                center: coords(center, n, &format!("{key}.initial.center"))?,
                width: *width,
                amplitude: *amplitude,
            },
            InitialSpec::Linear { slope, offset } => Initial::Linear {
                slope: coords(slope, n, &format!("{key}.initial.slope"))?,
                offset: *offset,
            },
        };
        let boundary = match &self.boundary {
            None => Boundary::Constant(0.0),
            Some(BoundarySpec::Constant { value }) => Boundary::Constant(*value),
            Some(BoundarySpec::FromInitial) => Boundary::FromInitial,
        };
        let mut atoms = Vec::new();
        for (i, a) in self.measure.atoms.iter().enumerate() {
            atoms.push(Atom {
                loc: coords(&a.at, n, &format!("{key}.measure.atoms[{i}].at"))?,
                mass: a.mass,
            });
        }
        let density = match &self.measure.density {
            None => None,
            Some(d) => {
                let dkey = format!("{key}.measure.density");
                let g = |cells| Grid::new(n, self.grid.origin, self.grid.side_length, cells);
                let built = match (d.value, &d.values) {
                    (Some(v), None) => DensityGrid::constant(g(d.cells_per_axis.unwrap_or(1)), v),
                    (None, Some(vals)) => {
                        let cells = d
                            .cells_per_axis
                            .ok_or_else(|| Error::Config(format!("{dkey}.cells_per_axis: required with values")))?;
                        DensityGrid::new(g(cells), vals.clone())
                    }
                    _ => return Err(Error::Config(format!("{dkey}: give exactly one of value, values"))),
                };
                Some(built.map_err(|e| Error::Config(format!("{dkey}: {e}")))?)
            }
        };
        let measure = RadonMeasure::new(n, atoms, density).map_err(|e| Error::Config(format!("{key}.measure: {e}")))?;
        let mut points = Vec::new();
        for (i, pt) in self.point.iter().enumerate() {
            points.push(VerificationPoint {
                y: coords(&pt.y, n, &format!("{key}.point[{i}].y"))?,
                s: pt.s,
                rho: pt.rho,
            });
        }
        let mut queries = Vec::new();
        for (i, q) in self.query.iter().enumerate() {
            let c = coords(&q.center, n, &format!("{key}.query[{i}].center"))?;
            if !(q.radius > 0.0) {
                return Err(Error::Config(format!("{key}.query[{i}].radius: must be positive")));
            }
            queries.push((c, q.radius));
        }
        let gamma_cap = self.gamma_cap.unwrap_or(DEFAULT_GAMMA_CAP);
        if !(gamma_cap > 0.0) {
            return Err(Error::Config(format!("{key}.gamma_cap: must be positive")));
        }
        let sc = Scenario {
            name: self.name.clone(),
            params,
            side_length: self.grid.side_length,
            origin: self.grid.origin,
            t_final: self.grid.t_final,
            ladder: self.grid.ladder.clone(),
            initial,
            boundary,
            measure,
            points,
            queries,
            gamma_cap,
            j_max: self.j_max.unwrap_or(DEFAULT_J_MAX),
        };
        for (i, pt) in sc.points.iter().enumerate() {
            sc.check_point(pt).map_err(|e| Error::Config(format!("{key}.point[{i}]: {e}")))?;
        }
        Ok(sc)
    }
}

/// Parses and validates a scenario file from text.
pub fn parse_config(text: &str) -> Result<Vec<Scenario>> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    file.scenario.iter().enumerate().map(|(i, s)| s.build(i)).collect()
}

pub fn load_config(path: &Path) -> Result<Vec<Scenario>> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ATOM: &str = r#"
[[scenario]]
name = "a"
[scenario.params]
n = 1
p = 3.0
[scenario.grid]
side_length = 1.0
t_final = 0.5
ladder = [[32, 0.01]]
[scenario.initial]
kind = "constant"
value = 0.0
[scenario.measure]
atoms = [{ at = [0.5], mass = 1.0 }]
[[scenario.point]]
y = [0.5]
s = 0.3
rho = 0.2
"#;

    #[test]
    fn parses_atom_scenario() {
        let sc = parse_config(ATOM).unwrap();
        assert_eq!(sc.len(), 1);
        assert_eq!(sc[0].measure.total_mass(), 1.0);
        assert_eq!(sc[0].boundary, Boundary::Constant(0.0));
        assert_eq!(sc[0].gamma_cap, 100.0);
        assert_eq!(sc[0].params.lambda, 0.5);
    }

    #[test]
    fn empty_file_has_no_scenarios() {
        assert!(parse_config("").unwrap().is_empty());
    }

    #[test]
    fn unknown_key_is_named() {
        let bad = ATOM.replace("rho = 0.2", "rho = 0.2\nradius = 1.0");
        let err = parse_config(&bad).unwrap_err().to_string();
        assert!(err.contains("radius"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn containment_failure_is_reported() {
        let bad = ATOM.replace("s = 0.3", "s = 0.05");
        let err = parse_config(&bad).unwrap_err().to_string();
        assert!(err.contains("point[0]"), "{err}");
    }

    #[test]
    fn wrong_dimension_is_reported() {
        let bad = ATOM.replace("y = [0.5]", "y = [0.5, 0.5]");
        let err = parse_config(&bad).unwrap_err().to_string();
        assert!(err.contains("point[0].y"), "{err}");
    }
}
