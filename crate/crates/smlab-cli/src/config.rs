//! Sectioned `key = value` experiment files.
//!
//! ```text
//! # comment
//! [space]
//! kind = grid
//! dim = 2
//!
//! [suite.rsk]
//! t_grid = geom(0.3, 30, 15)
//! ```
//!
//! Values are numbers, bare words, comma lists, or the grid helpers `geom(lo, hi, n)` and
//! `lin(lo, hi, n)`. Every section declares the keys it accepts; anything else is an error
//! that names the key and its line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: BTreeMap<String, Entry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub path: PathBuf,
    pub sections: Vec<Section>,
}

fn err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("line {line}: {msg}"))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, format!("unterminated section header '{body}'")))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                    return Err(err(line, format!("bad section name '{name}'")));
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(err(line, format!("duplicate section [{name}]")));
                }
                sections.push(Section { name: name.to_string(), line, entries: BTreeMap::new() });
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected 'key = value', got '{body}'")))?;
            let key = k.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                return Err(err(line, format!("malformed key '{key}'")));
            }
            let section = sections
                .last_mut()
                .ok_or_else(|| err(line, format!("key '{key}' appears before any section")))?;
            if section.entries.contains_key(key) {
                return Err(err(line, format!("duplicate key '{key}' in [{}]", section.name)));
            }
            section.entries.insert(key.to_string(), Entry { value: v.trim().to_string(), line });
        }
        Ok(Self { path: path.to_path_buf(), sections })
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Section, CliError> {
        self.section(name).ok_or_else(|| CliError::Config(format!("missing section [{name}]")))
    }

    /// Names `X` of all `[suite.X]` sections, in file order.
    pub fn suite_names(&self) -> Vec<String> {
        self.sections.iter().filter_map(|s| s.name.strip_prefix("suite.").map(str::to_string)).collect()
    }

    /// Path relative to the config file's directory.
    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }
}

fn parse_f64(s: &str, line: usize, key: &str) -> Result<f64, CliError> {
    let v: f64 = s.trim().parse().map_err(|_| err(line, format!("key '{key}': '{}' is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(err(line, format!("key '{key}': value must be finite")));
    }
    Ok(v)
}

impl Section {
    /// Rejects keys outside `allowed`; a trailing `*` in an allowed entry matches any suffix.
    pub fn allow(&self, allowed: &[&str]) -> Result<(), CliError> {
        for (k, e) in &self.entries {
            let ok = allowed.iter().any(|a| match a.strip_suffix('*') {
                Some(prefix) => k.starts_with(prefix),
                None => a == k,
            });
            if !ok {
                return Err(err(e.line, format!("unknown key '{k}' in [{}]", self.name)));
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn missing(&self, key: &str) -> CliError {
        err(self.line, format!("[{}] needs key '{key}'", self.name))
    }

    pub fn str_opt(&self, key: &str) -> Option<&str> {
        self.raw(key).map(|e| e.value.as_str())
    }

    pub fn str(&self, key: &str) -> Result<&str, CliError> {
        self.str_opt(key).ok_or_else(|| self.missing(key))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.raw(key).map(|e| parse_f64(&e.value, e.line, key)).transpose()
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.f64_opt(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.raw(key)
            .map(|e| {
                e.value
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| err(e.line, format!("key '{key}': '{}' is not a non-negative integer", e.value)))
            })
            .transpose()
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.usize_opt(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                v => Err(err(e.line, format!("key '{key}': '{v}' is not a boolean"))),
            },
        }
    }

    /// Comma list of numbers, or `geom(lo, hi, n)` / `lin(lo, hi, n)`.
    pub fn list_opt(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        let v = e.value.trim();
        for (name, geometric) in [("geom", true), ("lin", false)] {
            if let Some(args) = v.strip_prefix(name).and_then(|r| r.trim().strip_prefix('(')).and_then(|r| r.strip_suffix(')')) {
                let parts: Vec<&str> = args.split(',').collect();
                if parts.len() != 3 {
                    return Err(err(e.line, format!("key '{key}': {name}() takes lo, hi, n")));
                }
                let lo = parse_f64(parts[0], e.line, key)?;
                let hi = parse_f64(parts[1], e.line, key)?;
                let n: usize = parts[2]
                    .trim()
                    .parse()
                    .map_err(|_| err(e.line, format!("key '{key}': point count must be an integer")))?;
                if n < 2 || (geometric && !(lo > 0.0 && hi > lo)) || (!geometric && !(hi > lo)) {
                    return Err(err(e.line, format!("key '{key}': degenerate {name}({lo}, {hi}, {n})")));
                }
                let pts = (0..n)
                    .map(|k| {
                        let s = k as f64 / (n - 1) as f64;
                        if geometric { lo * (hi / lo).powf(s) } else { lo + (hi - lo) * s }
                    })
                    .collect();
                return Ok(Some(pts));
            }
        }
        let vals = v
            .split(',')
            .map(|p| parse_f64(p, e.line, key))
            .collect::<Result<Vec<f64>, _>>()?;
        if vals.is_empty() {
            return Err(err(e.line, format!("key '{key}': empty list")));
        }
        Ok(Some(vals))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.list_opt(key)?.ok_or_else(|| self.missing(key))
    }

    /// Strictly increasing list of positive values.
    pub fn grid(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let g = self.list(key)?;
        let line = self.raw(key).map(|e| e.line).unwrap_or(self.line);
        if g.iter().any(|v| !(*v > 0.0)) {
            return Err(err(line, format!("key '{key}': grid values must be positive")));
        }
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(err(line, format!("key '{key}': grid must be strictly increasing")));
        }
        Ok(g)
    }

    pub fn window_opt(&self, key: &str) -> Result<Option<(f64, f64)>, CliError> {
        match self.list_opt(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 && v[0] < v[1] => Ok(Some((v[0], v[1]))),
            Some(_) => Err(err(self.raw(key).unwrap().line, format!("key '{key}' needs two increasing numbers"))),
        }
    }

    /// `tol.<name>` override, else `default`.
    pub fn tol(&self, name: &str, default: f64) -> Result<f64, CliError> {
        self.f64_or(&format!("tol.{name}"), default)
    }

    /// Line of `key`, or of the header when absent.
    pub fn line_of(&self, key: &str) -> usize {
        self.raw(key).map(|e| e.line).unwrap_or(self.line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Config, CliError> {
        Config::parse(s, Path::new("x.cfg"))
    }

    #[test]
    fn sections_keys_and_grids() {
        let c = parse("# c\n[space]\nkind = grid # trailing\ndim=2\n[suite.rsk]\nt = geom(1, 100, 3)\nl = 1, 2.5\n").unwrap();
        let s = c.require("space").unwrap();
        assert_eq!(s.str("kind").unwrap(), "grid");
        assert_eq!(s.usize("dim").unwrap(), 2);
        let r = c.require("suite.rsk").unwrap();
        let g = r.grid("t").unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12 && g.len() == 3);
        assert_eq!(r.list("l").unwrap(), vec![1.0, 2.5]);
        assert_eq!(c.suite_names(), vec!["rsk".to_string()]);
    }

    #[test]
    fn errors_carry_line_numbers_and_keys() {
        let e = parse("[space]\nkind = grid\nbad key = 1\n").unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("bad key"), "{e}");
        let e = parse("x = 1\n").unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
        let c = parse("[space]\nkind = grid\ndimm = 2\n").unwrap();
        let e = c.require("space").unwrap().allow(&["kind", "dim"]).unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("dimm"), "{e}");
        let c = parse("[s]\nx = abc\n").unwrap();
        let e = c.require("s").unwrap().f64("x").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("'x'"), "{e}");
        let c = parse("[s]\ng = 3, 2\n").unwrap();
        assert!(c.require("s").unwrap().grid("g").is_err());
    }
}
