//! Suite reports: storage, re-evaluation and serialisation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Error, Result};
use crate::fit::ExponentFit;

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Reported but excluded from the pass flag.
    pub informational: bool,
    pub pass: bool,
}

impl Check {
    pub fn within(name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = value.is_finite() && lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        Self { name: name.to_string(), value, lower, upper, informational: false, pass }
    }

    pub fn le(name: &str, value: f64, upper: f64) -> Self {
        Self::within(name, value, None, Some(upper))
    }

    pub fn ge(name: &str, value: f64, lower: f64) -> Self {
        Self::within(name, value, Some(lower), None)
    }

    pub fn info(mut self) -> Self {
        self.informational = true;
        self
    }
}

/// Everything derived from a stored table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Evaluation {
    pub fits: BTreeMap<String, ExponentFit>,
    pub constants: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// Points behind each fit, for two-column plot files.
    pub curves: BTreeMap<String, Vec<(f64, f64)>>,
}

impl Evaluation {
    pub fn pass(&self) -> bool {
        self.checks.iter().filter(|c| !c.informational).all(|c| c.pass)
    }

    pub(crate) fn fit(&mut self, name: &str, fit: ExponentFit, points: Vec<(f64, f64)>) {
        self.fits.insert(name.to_string(), fit);
        self.curves.insert(name.to_string(), points);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub report_version: u32,
    pub suite: String,
    pub labels: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub measurements: BTreeMap<String, f64>,
    pub columns: Vec<String>,
    pub table: Vec<Vec<f64>>,
    pub fits: BTreeMap<String, ExponentFit>,
    pub constants: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Inputs of an evaluation, as stored in a report.
pub struct EvalInput<'a> {
    pub parameters: &'a BTreeMap<String, f64>,
    pub tolerances: &'a BTreeMap<String, f64>,
    pub measurements: &'a BTreeMap<String, f64>,
    pub columns: &'a [String],
    pub table: &'a [Vec<f64>],
}

impl EvalInput<'_> {
    fn lookup(map: &BTreeMap<String, f64>, what: &str, key: &str) -> Result<f64> {
        map.get(key).copied().ok_or_else(|| invalid(format!("report lacks {what} '{key}'")))
    }

    pub fn param(&self, key: &str) -> Result<f64> {
        Self::lookup(self.parameters, "parameter", key)
    }

    pub fn param_opt(&self, key: &str) -> Option<f64> {
        self.parameters.get(key).copied()
    }

    pub fn tol(&self, key: &str) -> Result<f64> {
        Self::lookup(self.tolerances, "tolerance", key)
    }

    pub fn measured(&self, key: &str) -> Result<f64> {
        Self::lookup(self.measurements, "measurement", key)
    }

    pub fn col(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| invalid(format!("report table lacks column '{name}'")))
    }

    /// Rows as `(a, b)` pairs of two named columns.
    pub fn pairs(&self, a: &str, b: &str) -> Result<Vec<(f64, f64)>> {
        let (i, j) = (self.col(a)?, self.col(b)?);
        Ok(self.table.iter().map(|r| (r[i], r[j])).collect())
    }
}

type Evaluator = fn(&EvalInput) -> Result<Evaluation>;

fn evaluator(suite: &str) -> Result<Evaluator> {
    use super::*;
    Ok(match suite {
        "rsk" => heat::evaluate_rsk,
        "heat2inf" => heat::evaluate_heat2inf,
        "ondiag" => heat::evaluate_ondiag,
        "schrodinger" => heat::evaluate_schrodinger,
        "wave" => wave::evaluate_wave,
        "multiplier" => wave::evaluate_multiplier,
        "resolvent_sector" => sector::evaluate_resolvent_sector,
        "spectrum_probe" => sector::evaluate_spectrum_probe,
        "dg" => local::evaluate_dg,
        "locality" => local::evaluate_locality,
        "subordination" => local::evaluate_subordination,
        other => return Err(invalid(format!("unknown suite '{other}'"))),
    })
}

/// Unassembled report contents produced by a suite's measurement step.
#[derive(Clone, Debug, Default)]
pub struct Measured {
    pub labels: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub measurements: BTreeMap<String, f64>,
    pub columns: Vec<String>,
    pub table: Vec<Vec<f64>>,
}

impl Measured {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn label(&mut self, k: &str, v: impl Into<String>) -> &mut Self {
        self.labels.insert(k.to_string(), v.into());
        self
    }

    pub fn param(&mut self, k: &str, v: f64) -> &mut Self {
        self.parameters.insert(k.to_string(), v);
        self
    }

    pub fn tol(&mut self, k: &str, v: f64) -> &mut Self {
        self.tolerances.insert(k.to_string(), v);
        self
    }

    pub fn measure(&mut self, k: &str, v: f64) -> &mut Self {
        self.measurements.insert(k.to_string(), v);
        self
    }

    pub fn row(&mut self, r: Vec<f64>) {
        debug_assert_eq!(r.len(), self.columns.len());
        self.table.push(r);
    }

    pub fn finish(self, suite: &str) -> Result<SuiteReport> {
        for (i, r) in self.table.iter().enumerate() {
            if r.len() != self.columns.len() {
                return Err(Error::Numerical(format!("row {i} has {} cells for {} columns", r.len(), self.columns.len())));
            }
            if let Some(v) = r.iter().find(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("row {i} holds a non-finite value {v}")));
            }
        }
        let mut report = SuiteReport {
            report_version: REPORT_VERSION,
            suite: suite.to_string(),
            labels: self.labels,
            parameters: self.parameters,
            tolerances: self.tolerances,
            measurements: self.measurements,
            columns: self.columns,
            table: self.table,
            fits: BTreeMap::new(),
            constants: BTreeMap::new(),
            checks: Vec::new(),
            pass: false,
        };
        let ev = report.evaluate()?;
        report.pass = ev.pass();
        report.fits = ev.fits;
        report.constants = ev.constants;
        report.checks = ev.checks;
        Ok(report)
    }
}

impl SuiteReport {
    fn input(&self) -> EvalInput<'_> {
        EvalInput {
            parameters: &self.parameters,
            tolerances: &self.tolerances,
            measurements: &self.measurements,
            columns: &self.columns,
            table: &self.table,
        }
    }

    /// Recomputes fits, constants and checks from the stored table.
    pub fn evaluate(&self) -> Result<Evaluation> {
        evaluator(&self.suite)?(&self.input())
    }

    /// Whether the stored verdict agrees with a fresh evaluation.
    pub fn is_consistent(&self) -> Result<bool> {
        let ev = self.evaluate()?;
        Ok(ev.pass() == self.pass && ev.checks == self.checks && ev.fits == self.fits && ev.constants == self.constants)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.table.iter().map(|r| r[i]).collect())
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("report serialises");
        let mut out = String::new();
        write_value(&mut out, &v, 0);
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("report JSON: {e}")))?;
        if r.report_version != REPORT_VERSION {
            return Err(Error::Config(format!("unsupported report_version {}", r.report_version)));
        }
        Ok(r)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.table {
            let cells: Vec<String> = r.iter().map(|v| f17(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits in exponent form.
pub fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_u64() {
                let _ = write!(out, "{i}");
            } else if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else {
                out.push_str(&f17(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            let flat = a.iter().all(|x| !x.is_array() && !x.is_object());
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if flat {
                    if i > 0 {
                        out.push(' ');
                    }
                } else {
                    out.push('\n');
                    out.push_str(&pad(indent + 1));
                }
                write_value(out, x, indent + 1);
            }
            if !flat {
                out.push('\n');
                out.push_str(&pad(indent));
            }
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, x)) in m.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push_str(": ");
                write_value(out, x, indent + 1);
            }
            out.push('\n');
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = f17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            assert_eq!(serde_json::from_str::<f64>(&s).unwrap(), v);
        }
    }

    #[test]
    fn check_bounds() {
        assert!(Check::le("a", 1.0, 1.0).pass);
        assert!(!Check::ge("a", f64::NAN, 0.0).pass);
        assert!(!Check::within("a", 2.0, Some(0.0), Some(1.0)).pass);
    }
}
