//! CSV and text artifacts. Floats are written with 17 significant digits so
//! identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::solver::GridField;
use crate::wolff::WolffValue;

use super::{relative_change, run_scenarios, wolff_table, PointReport, RungResult, Scenario, Stage, Verdict};

/// Relative change between the two finest rungs regarded as stable.
pub const REFINEMENT_TOLERANCE: f64 = 0.25;

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt)
}

fn fmt_wolff(w: WolffValue) -> String {
    match w {
        WolffValue::Finite(v) => fmt(v),
        WolffValue::Divergent => "DIVERGENT".into(),
    }
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

pub const FIELD_HEADER: &str = "t,cell,value";
pub const WOLFF_HEADER: &str = "scenario,kind,index,x0,x1,radius,value";
pub const KM_HEADER: &str = "scenario,rung,point,j,rho_j,l_j,delta_j,branch,A_value,gamma_j,window_collapsed";
pub const VERDICT_HEADER: &str = "scenario,rung,cells,dt,point,y0,y1,s,rho,u_value,avg_term,wolff_term,bracket,gamma_emp,l_J,delta_0,gamma_lJ,max_gamma_j,gamma_delta0,steps_j,natural_termination,collapsed_windows,psi_violations,verdict";
pub const REFINEMENT_HEADER: &str = "scenario,point,quantity,coarse,fine,rel_change,stable";
pub const SOLVER_HEADER: &str = "scenario,rung,cells,dt,status,steps,max_newton_iterations,max_grad_norm,min_value,max_energy_rise";

pub fn field_csv(u: &GridField) -> String {
    let mut s = String::from(FIELD_HEADER);
    s.push('\n');
    for (k, level) in u.levels.iter().enumerate() {
        let t = fmt(u.time(k));
        for (c, v) in level.iter().enumerate() {
            let _ = writeln!(s, "{t},{c},{}", fmt(*v));
        }
    }
    s
}

pub fn wolff_csv(scenarios: &[Scenario]) -> Result<String> {
    let mut s = String::from(WOLFF_HEADER);
    s.push('\n');
    for sc in scenarios {
        let np = sc.points.len();
        for (i, (c, r, w)) in wolff_table(sc)?.into_iter().enumerate() {
            let (kind, idx) = if i < np { ("point", i) } else { ("query", i - np) };
            let _ = writeln!(s, "{},{kind},{idx},{},{},{},{}", sc.name, fmt(c.0[0]), fmt(c.0[1]), fmt(r), fmt_wolff(w));
        }
    }
    Ok(s)
}

fn each_point<'a>(results: &'a [Vec<RungResult>]) -> impl Iterator<Item = (usize, &'a RungResult, usize, &'a std::result::Result<PointReport, String>)> {
    results
        .iter()
        .enumerate()
        .flat_map(|(si, rungs)| rungs.iter().flat_map(move |rr| rr.points.iter().enumerate().map(move |(pi, p)| (si, rr, pi, p))))
}

pub fn km_csv(scenarios: &[Scenario], results: &[Vec<RungResult>]) -> String {
    let mut s = String::from(KM_HEADER);
    s.push('\n');
    for (si, rr, pi, rep) in each_point(results) {
        let Ok(rep) = rep else { continue };
        for st in &rep.levels.states {
            let gamma = rep.recursion.iter().find(|r| r.j == st.j).map(|r| r.gamma);
            let _ = writeln!(
                s,
                "{},{},{pi},{},{},{},{},{},{},{},{}",
                scenarios[si].name,
                rr.rung,
                st.j,
                fmt(st.rho_j),
                fmt(st.l_j),
                fmt(st.delta_j),
                st.branch.label(),
                fmt(st.a_value),
                fmt_opt(gamma),
                st.window_collapsed
            );
        }
    }
    s
}

pub fn verdict_csv(scenarios: &[Scenario], results: &[Vec<RungResult>]) -> String {
    let mut s = String::from(VERDICT_HEADER);
    s.push('\n');
    for (si, rr, pi, rep) in each_point(results) {
        let sc = &scenarios[si];
        let pt = sc.points[pi];
        let head = format!("{},{},{},{},{pi},{},{},{},{}", sc.name, rr.rung, rr.cells, fmt(rr.dt), fmt(pt.y.0[0]), fmt(pt.y.0[1]), fmt(pt.s), fmt(pt.rho));
        match rep {
            Ok(r) => {
                let collapsed = r.levels.states.iter().filter(|st| st.window_collapsed).count();
                let _ = writeln!(
                    s,
                    "{head},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    fmt(r.u_value),
                    fmt(r.bracket.avg_term),
                    fmt_wolff(r.bracket.wolff_term),
                    fmt_opt(r.bracket.value()),
                    fmt_opt(r.gamma_emp),
                    fmt(r.levels.l_final),
                    fmt(r.levels.delta0()),
                    fmt_opt(r.gamma_lj),
                    fmt(r.max_gamma_j()),
                    fmt(r.gamma_delta0),
                    r.levels.states.len(),
                    r.levels.natural_termination,
                    collapsed,
                    r.psi_check.violations,
                    r.verdict.label()
                );
            }
            Err(_) => {
                let _ = writeln!(s, "{head},,,,,,,,,,,,,,,ERROR");
            }
        }
    }
    s
}

/// Quantities compared between the two finest rungs of each point.
pub fn refinement_rows(r_coarse: &PointReport, r_fine: &PointReport) -> Vec<(&'static str, f64, f64)> {
    let mut rows = vec![("u_value", r_coarse.u_value, r_fine.u_value)];
    if let (Some(a), Some(b)) = (r_coarse.bracket.value(), r_fine.bracket.value()) {
        rows.push(("bracket", a, b));
    }
    if let (Some(a), Some(b)) = (r_coarse.gamma_emp, r_fine.gamma_emp) {
        rows.push(("gamma_emp", a, b));
    }
    rows.push(("max_gamma_j", r_coarse.max_gamma_j(), r_fine.max_gamma_j()));
    rows.push(("gamma_delta0", r_coarse.gamma_delta0, r_fine.gamma_delta0));
    rows
}

pub fn refinement_csv(scenarios: &[Scenario], results: &[Vec<RungResult>]) -> String {
    let mut s = String::from(REFINEMENT_HEADER);
    s.push('\n');
    for (si, rungs) in results.iter().enumerate() {
        if rungs.len() < 2 {
            continue;
        }
        let (a, b) = (&rungs[rungs.len() - 2], &rungs[rungs.len() - 1]);
        for (pi, (ra, rb)) in a.points.iter().zip(&b.points).enumerate() {
            let (Ok(ra), Ok(rb)) = (ra, rb) else { continue };
            for (q, x, y) in refinement_rows(ra, rb) {
                let rel = relative_change(x, y);
                let _ = writeln!(s, "{},{pi},{q},{},{},{},{}", scenarios[si].name, fmt(x), fmt(y), fmt(rel), rel < REFINEMENT_TOLERANCE);
            }
        }
    }
    s
}

pub fn solver_csv(scenarios: &[Scenario], results: &[Vec<RungResult>]) -> String {
    let mut s = String::from(SOLVER_HEADER);
    s.push('\n');
    for (si, rungs) in results.iter().enumerate() {
        for rr in rungs {
            let name = &scenarios[si].name;
            match (&rr.field, &rr.summary) {
                (Ok(_), Some(m)) => {
                    let _ = writeln!(
                        s,
                        "{name},{},{},{},ok,{},{},{},{},{}",
                        rr.rung,
                        rr.cells,
                        fmt(rr.dt),
                        m.steps,
                        m.max_iterations,
                        fmt(m.max_grad_norm),
                        fmt(m.min_value),
                        fmt(m.max_energy_rise)
                    );
                }
                _ => {
                    let _ = writeln!(s, "{name},{},{},{},failed,,,,,", rr.rung, rr.cells, fmt(rr.dt));
                }
            }
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Wolff,
    KmTrace,
    Verify,
}

/// What a run found; `success` decides the exit status.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub solver_failures: usize,
    pub point_failures: usize,
    /// VIOLATION-FLAG verdicts on the finest rung that was run.
    pub finest_violations: usize,
    pub summary: String,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.solver_failures == 0 && self.point_failures == 0 && self.finest_violations == 0
    }
}

fn summary_text(command: Command, scenarios: &[Scenario], results: &[Vec<RungResult>], seed: Option<u64>) -> (String, usize, usize, usize) {
    let mut s = String::new();
    let _ = writeln!(s, "command: {command:?}");
    if let Some(seed) = seed {
        let _ = writeln!(s, "seed: {seed}");
    }
    let _ = writeln!(s, "scenarios: {}", scenarios.len());
    let (mut solver_failures, mut point_failures, mut finest) = (0, 0, 0);
    for (si, rungs) in results.iter().enumerate() {
        let sc = &scenarios[si];
        let _ = writeln!(s, "\n[{}] n = {}, p = {}, gamma_cap = {}", sc.name, sc.params.n, sc.params.p, sc.gamma_cap);
        for (k, rr) in rungs.iter().enumerate() {
            let is_finest = k + 1 == rungs.len();
            match &rr.field {
                Err(e) => {
                    solver_failures += 1;
                    let _ = writeln!(s, "  rung {} ({} cells, dt {}): solver failed: {e}", rr.rung, rr.cells, rr.dt);
                    continue;
                }
                Ok(_) => {
                    let m = rr.summary.expect("summary accompanies a field");
                    let _ = writeln!(
                        s,
                        "  rung {} ({} cells, dt {}): {} steps, <= {} Newton iterations, min u {:.6e}, max energy rise {:.3e}",
                        rr.rung, rr.cells, rr.dt, m.steps, m.max_iterations, m.min_value, m.max_energy_rise
                    );
                }
            }
            for (pi, rep) in rr.points.iter().enumerate() {
                match rep {
                    Err(e) => {
                        point_failures += 1;
                        let _ = writeln!(s, "    point {pi}: error: {e}");
                    }
                    Ok(r) => {
                        if is_finest && r.verdict == Verdict::ViolationFlag {
                            finest += 1;
                        }
                        let _ = writeln!(
                            s,
                            "    point {pi}: u = {:.6e}, bracket = {}, gamma_emp = {}, l_J = {:.6e}, max gamma_j = {:.4e}, gamma_delta0 = {:.4e}, J = {}{}, {}",
                            r.u_value,
                            r.bracket.value().map_or("divergent".to_string(), |b| format!("{b:.6e}")),
                            r.gamma_emp.map_or("-".to_string(), |g| format!("{g:.4e}")),
                            r.levels.l_final,
                            r.max_gamma_j(),
                            r.gamma_delta0,
                            r.levels.states.len(),
                            if r.levels.natural_termination { "" } else { " (j_max reached)" },
                            r.verdict.label()
                        );
                    }
                }
            }
        }
    }
    let ok = solver_failures == 0 && point_failures == 0 && finest == 0;
    let _ = writeln!(
        s,
        "\nsolver failures: {solver_failures}, point errors: {point_failures}, violations on finest rung: {finest}\nstatus: {}",
        if ok { "ok" } else { "FAILED" }
    );
    (s, solver_failures, point_failures, finest)
}

fn write(out: &Path, name: &str, body: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    fs::write(&path, body)?;
    files.push(path);
    Ok(())
}

/// Runs `command` on `scenarios`, writing artifacts into `out`.
pub fn execute(command: Command, scenarios: &[Scenario], out: &Path, rung: Option<usize>, seed: Option<u64>) -> Result<Outcome> {
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    if command == Command::Wolff {
        write(out, "wolff.csv", &wolff_csv(scenarios)?, &mut files)?;
        return Ok(Outcome {
            files,
            summary: format!("wolff potentials for {} scenario(s)\n", scenarios.len()),
            ..Outcome::default()
        });
    }
    let stage = if command == Command::Solve { Stage::Solve } else { Stage::Verify };
    let results = run_scenarios(scenarios, rung, stage)?;
    write(out, "solver.csv", &solver_csv(scenarios, &results), &mut files)?;
    match command {
        Command::Solve => {
            for (si, rungs) in results.iter().enumerate() {
                for rr in rungs {
                    if let Ok(u) = &rr.field {
                        let name = format!("field_{}_r{}.csv", file_stem(&scenarios[si].name), rr.rung);
                        write(out, &name, &field_csv(u), &mut files)?;
                    }
                }
            }
        }
        Command::KmTrace => {
            write(out, "km_trace.csv", &km_csv(scenarios, &results), &mut files)?;
        }
        Command::Verify => {
            write(out, "wolff.csv", &wolff_csv(scenarios)?, &mut files)?;
            write(out, "km_trace.csv", &km_csv(scenarios, &results), &mut files)?;
            write(out, "verdict.csv", &verdict_csv(scenarios, &results), &mut files)?;
            write(out, "refinement.csv", &refinement_csv(scenarios, &results), &mut files)?;
        }
        Command::Wolff => unreachable!(),
    }
    let (summary, solver_failures, point_failures, finest_violations) = summary_text(command, scenarios, &results, seed);
    write(out, "summary.txt", &summary, &mut files)?;
    Ok(Outcome {
        files,
        solver_failures,
        point_failures,
        finest_violations,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt(2.0), "2.0000000000000000e0");
    }

    #[test]
    fn empty_run_writes_headers() {
        let dir = tempfile::tempdir().unwrap();
        let out = execute(Command::Verify, &[], dir.path(), None, None).unwrap();
        assert!(out.success());
        let v = fs::read_to_string(dir.path().join("verdict.csv")).unwrap();
        assert_eq!(v, format!("{VERDICT_HEADER}\n"));
    }

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(file_stem("atom 2d/p=3"), "atom_2d_p_3");
    }
}
