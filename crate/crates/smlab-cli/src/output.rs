//! Files written by the commands, and the aggregated run summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use smlab::estimates::report::f17;
use smlab::estimates::{write_atomic, SuiteReport};

use crate::CliError;

/// Fixed notation for moderate magnitudes, exponent form otherwise.
fn num(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

pub fn json_string(s: &str) -> String {
    serde_json::Value::String(s.to_string()).to_string()
}

/// Writes `<suite>.json`, `<suite>.csv` and one `<suite>_<curve>.dat` per fitted curve.
pub fn write_suite(out: &Path, report: &SuiteReport) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let json = out.join(format!("{}.json", report.suite));
    write_atomic(&json, report.to_json().as_bytes())?;
    written.push(json);
    let csv = out.join(format!("{}.csv", report.suite));
    write_atomic(&csv, report.to_csv().as_bytes())?;
    written.push(csv);
    for (name, pts) in &report.evaluate()?.curves {
        let mut text = format!("# {} {name}: x y\n", report.suite);
        for (x, y) in pts {
            let _ = writeln!(text, "{} {}", f17(*x), f17(*y));
        }
        let p = out.join(format!("{}_{}.dat", report.suite, file_stem(name)));
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}

/// One line per check, for the terminal.
pub fn describe_report(r: &SuiteReport) -> String {
    let mut s = format!("suite {}: {}\n", r.suite, if r.pass { "PASS" } else { "FAIL" });
    for c in &r.checks {
        let bound = match (c.lower, c.upper) {
            (Some(l), Some(u)) => format!("in [{}, {}]", num(l), num(u)),
            (Some(l), None) => format!(">= {}", num(l)),
            (None, Some(u)) => format!("<= {}", num(u)),
            (None, None) => "finite".to_string(),
        };
        let tag = if c.informational { "info" } else if c.pass { "ok" } else { "FAIL" };
        let _ = writeln!(s, "  [{tag}] {} = {:.6e} {bound}", c.name, c.value);
    }
    s
}

#[derive(Debug, PartialEq)]
pub enum Row {
    Report { file: String, suite: String, pass: bool, consistent: bool, fits: Vec<(String, f64)>, checks: Vec<(String, f64, Option<f64>, Option<f64>, bool)> },
    Unreadable { file: String, error: String },
}

impl Row {
    pub fn ok(&self) -> bool {
        matches!(self, Row::Report { pass: true, consistent: true, .. })
    }
}

/// Reads every `*.json` suite report in `dir` (summaries excluded), sorted by file name.
pub fn collect(dir: &Path) -> Result<Vec<Row>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let n = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            n.ends_with(".json") && !n.ends_with(".summary.json")
        })
        .collect();
    files.sort();
    let mut rows = Vec::new();
    for p in files {
        let file = p.file_name().unwrap().to_string_lossy().into_owned();
        let parsed = std::fs::read_to_string(&p)
            .map_err(|e| e.to_string())
            .and_then(|t| SuiteReport::from_json(&t).map_err(|e| e.to_string()));
        rows.push(match parsed {
            Err(error) => Row::Unreadable { file, error },
            Ok(r) => Row::Report {
                consistent: r.is_consistent().unwrap_or(false),
                fits: r.fits.iter().map(|(k, f)| (k.clone(), f.slope)).collect(),
                checks: r.checks.iter().filter(|c| !c.informational).map(|c| (c.name.clone(), c.value, c.lower, c.upper, c.pass)).collect(),
                file,
                suite: r.suite,
                pass: r.pass,
            },
        });
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(f17).unwrap_or_else(|| "null".into())
}

/// Machine-readable aggregate; floats with 17 significant digits.
pub fn summary_json(rows: &[Row]) -> String {
    let mut s = String::from("{\n  \"report_version\": 1,\n  \"rows\": [");
    for (i, row) in rows.iter().enumerate() {
        s.push_str(if i == 0 { "\n    " } else { ",\n    " });
        match row {
            Row::Unreadable { file, error } => {
                let _ = write!(s, "{{\"file\": {}, \"readable\": false, \"error\": {}}}", json_string(file), json_string(error));
            }
            Row::Report { file, suite, pass, consistent, fits, checks } => {
                let fits: Vec<String> = fits.iter().map(|(k, v)| format!("{}: {}", json_string(k), f17(*v))).collect();
                let checks: Vec<String> = checks
                    .iter()
                    .map(|(n, v, l, u, p)| {
                        format!(
                            "{{\"name\": {}, \"value\": {}, \"lower\": {}, \"upper\": {}, \"pass\": {p}}}",
                            json_string(n),
                            f17(*v),
                            opt(*l),
                            opt(*u)
                        )
                    })
                    .collect();
                let _ = write!(
                    s,
                    "{{\"file\": {}, \"readable\": true, \"suite\": {}, \"pass\": {pass}, \"consistent\": {consistent}, \"fitted_exponents\": {{{}}}, \"checks\": [{}]}}",
                    json_string(file),
                    json_string(suite),
                    fits.join(", "),
                    checks.join(", ")
                );
            }
        }
    }
    s.push_str(if rows.is_empty() { "]\n}\n" } else { "\n  ]\n}\n" });
    s
}

/// Terminal table: suite, predicted-vs-fitted checks, verdict.
pub fn summary_table(rows: &[Row]) -> String {
    let mut s = format!("{:<28} {:<18} {:<8} checks\n", "file", "suite", "verdict");
    for row in rows {
        match row {
            Row::Unreadable { file, error } => {
                let _ = writeln!(s, "{file:<28} {:<18} {:<8} {error}", "-", "UNREADABLE");
            }
            Row::Report { file, suite, pass, consistent, checks, .. } => {
                let verdict = match (pass, consistent) {
                    (_, false) => "STALE",
                    (true, true) => "PASS",
                    (false, true) => "FAIL",
                };
                let cs: Vec<String> = checks
                    .iter()
                    .map(|(n, v, l, u, _)| match (l, u) {
                        (Some(l), Some(u)) => format!("{n}={} in [{},{}]", num(*v), num(*l), num(*u)),
                        (Some(l), None) => format!("{n}={} >= {}", num(*v), num(*l)),
                        (None, Some(u)) => format!("{n}={} <= {}", num(*v), num(*u)),
                        (None, None) => format!("{n}={}", num(*v)),
                    })
                    .collect();
                let _ = writeln!(s, "{file:<28} {suite:<18} {verdict:<8} {}", cs.join("; "));
            }
        }
    }
    s
}
