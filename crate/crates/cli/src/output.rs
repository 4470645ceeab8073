use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::Resolved;
use crate::RunError;

/// A scalar compared against a declared bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, max: f64) -> Self {
        Check {
            name: name.into(),
            value,
            min: None,
            max: Some(max),
            pass: value <= max,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, min: f64) -> Self {
        Check {
            name: name.into(),
            value,
            min: Some(min),
            max: None,
            pass: value >= min,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, half_width: f64) -> Self {
        let (min, max) = (target - half_width, target + half_width);
        Check {
            name: name.into(),
            value,
            min: Some(min),
            max: Some(max),
            pass: value >= min && value <= max,
        }
    }
}

/// One row of `errors.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub eps: f64,
    pub order: usize,
    pub error: f64,
}

/// A table with header `t,x1,…,xd`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(times: Vec<f64>, states: Vec<Vec<f64>>) -> Self {
        Series { times, states }
    }

    fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }
}

/// Everything an experiment produces.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub diagnostics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub errors: Vec<ErrorRow>,
    pub trajectory: Series,
    /// Additional trajectories written next to `trajectory.csv`, by stem.
    pub extra: Vec<(String, Series)>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn diag(&mut self, name: impl Into<String>, value: f64) {
        self.diagnostics.insert(name.into(), value);
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    config: &'a Resolved,
    diagnostics: &'a BTreeMap<String, f64>,
    checks: &'a [Check],
    pass: bool,
}

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_csv(s: &Series) -> String {
    let mut out = String::from("t");
    for i in 1..=s.dim() {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for (t, x) in s.times.iter().zip(&s.states) {
        out.push_str(&num(*t));
        for v in x {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

pub fn errors_csv(rows: &[ErrorRow]) -> String {
    let mut out = String::from("eps,order,error\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", num(r.eps), r.order, num(r.error));
    }
    out
}

pub fn summary_json(cfg: &Resolved, report: &Report) -> String {
    let s = Summary {
        experiment: cfg.experiment.name(),
        config: cfg,
        diagnostics: &report.diagnostics,
        checks: &report.checks,
        pass: report.pass(),
    };
    let mut text = serde_json::to_string_pretty(&s).expect("summary is always serializable");
    text.push('\n');
    text
}

pub fn plot_script(cfg: &Resolved, report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}: gnuplot script over the CSVs in this directory", cfg.experiment);
    out.push_str("set datafile separator ','\nset key autotitle columnhead\n");
    out.push_str("set terminal pngcairo size 900,600\n");
    if !report.errors.is_empty() {
        out.push_str("set output 'errors.png'\nset logscale xy\nset xlabel 'eps'\nset ylabel 'error'\n");
        let orders: Vec<usize> = {
            let mut o: Vec<usize> = report.errors.iter().map(|r| r.order).collect();
            o.dedup();
            o.sort_unstable();
            o.dedup();
            o
        };
        let plots: Vec<String> = orders
            .iter()
            .map(|n| {
                format!("'errors.csv' using 1:($2=={n} ? $3 : 1/0) with linespoints title 'order {n}'")
            })
            .collect();
        let _ = writeln!(out, "plot {}", plots.join(", \\\n     "));
        out.push_str("unset logscale\n");
    }
    if report.trajectory.dim() >= 2 {
        out.push_str("set output 'trajectory.png'\nset xlabel 'x1'\nset ylabel 'x2'\n");
        let curve = |stem: &str, style: &str| format!("'{stem}.csv' using 2:3 with {style} title '{stem}'");
        // series in original (non-rotating) coordinates get their own figure
        let (orig, rot): (Vec<&str>, Vec<&str>) = report
            .extra
            .iter()
            .map(|(s, _)| s.as_str())
            .partition(|s| s.ends_with("original"));
        let mut plots = vec![curve("trajectory", "lines")];
        plots.extend(rot.iter().map(|s| curve(s, "points pt 7 ps 0.5")));
        let _ = writeln!(out, "plot {}", plots.join(", \\\n     "));
        if !orig.is_empty() {
            out.push_str("set output 'original.png'\n");
            let plots: Vec<String> = orig.iter().map(|s| curve(s, "lines")).collect();
            let _ = writeln!(out, "plot {}", plots.join(", \\\n     "));
        }
    }
    out
}

/// Writes all artifacts into `cfg.out_dir`.
pub fn write_all(cfg: &Resolved, report: &Report) -> Result<(), RunError> {
    let dir = &cfg.out_dir;
    let io = |p: &Path, e: std::io::Error| RunError::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut files = vec![
        ("trajectory.csv".to_string(), trajectory_csv(&report.trajectory)),
        ("plot.gp".to_string(), plot_script(cfg, report)),
        ("summary.json".to_string(), summary_json(cfg, report)),
    ];
    if !report.errors.is_empty() {
        files.push(("errors.csv".to_string(), errors_csv(&report.errors)));
    }
    for (stem, s) in &report.extra {
        files.push((format!("{stem}.csv"), trajectory_csv(s)));
    }
    for (name, text) in files {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| io(&p, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let s = Series::new(vec![0.0, 0.5], vec![vec![1.0, -2.0], vec![0.1, 3.0]]);
        let text = trajectory_csv(&s);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2");
        assert_eq!(lines[1], "0.0000000000000000e0,1.0000000000000000e0,-2.0000000000000000e0");
        // 17 significant digits round-trip exactly
        let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.1);
        assert!(!text.contains('\r'));
        let e = errors_csv(&[ErrorRow { eps: 0.1, order: 2, error: 1e-5 }]);
        assert_eq!(e, "eps,order,error\n1.0000000000000001e-1,2,1.0000000000000001e-5\n");
    }

    #[test]
    fn checks() {
        assert!(Check::at_most("a", 1.0, 1.0).pass);
        assert!(!Check::at_most("a", f64::NAN, 1.0).pass);
        assert!(Check::within("s", 3.2, 3.0, 0.3).pass);
        assert!(!Check::within("s", 2.6, 3.0, 0.3).pass);
        assert!(!Check::at_least("s", 1.0, 1.5).pass);
    }
}
