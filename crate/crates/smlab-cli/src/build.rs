//! Spaces and operators from config sections.

use std::collections::BTreeMap;
use std::sync::Arc;

use smlab::metric_space::{
    build_ends_model_with_budget, build_grid_with_budget, build_torus_with_budget, Boundary, MetricMeasureSpace,
    DEFAULT_POINT_BUDGET,
};
use smlab::operators::{laplacian, schrodinger_unchecked, Eigensystem, PotentialSpec, SelfAdjointOperator, DEFAULT_EIGEN_BUDGET};

use crate::config::{Config, Section};
use crate::CliError;

const SPACE_KEYS: &[&str] =
    &["kind", "dim", "side", "h", "boundary", "n", "m", "side_small", "side_big", "torus_side", "profile_crossover"];
const OPERATOR_KEYS: &[&str] = &["kind", "c", "cutoff", "eigen_budget", "cache", "subcritical_eps"];

/// Section holding the space called `name`: `[space]` for `"space"`, else `[space.<name>]`.
pub fn space_section<'a>(cfg: &'a Config, name: &str) -> Result<&'a Section, CliError> {
    let sec = if name == "space" { "space".to_string() } else { format!("space.{name}") };
    cfg.require(&sec)
}

pub fn build_space(s: &Section, budget: Option<usize>) -> Result<MetricMeasureSpace, CliError> {
    s.allow(SPACE_KEYS)?;
    let budget = budget.unwrap_or(DEFAULT_POINT_BUDGET);
    let h = s.f64_or("h", 1.0)?;
    let kind = s.str("kind")?;
    let space = match kind {
        "grid" | "torus" => {
            let (dim, side) = (s.usize("dim")?, s.usize("side")?);
            if kind == "torus" {
                build_torus_with_budget(dim, side, h, budget)?
            } else {
                let b = match s.str_opt("boundary").unwrap_or("free") {
                    "free" => Boundary::Free,
                    "absorbing" => Boundary::Absorbing,
                    other => {
                        return Err(CliError::Config(format!(
                            "line {}: boundary must be 'free' or 'absorbing', got '{other}'",
                            s.line_of("boundary")
                        )))
                    }
                };
                build_grid_with_budget(dim, side, h, b, budget)?
            }
        }
        "ends" => build_ends_model_with_budget(
            s.usize("n")?,
            s.usize("m")?,
            s.usize("side_small")?,
            s.usize("side_big")?,
            s.usize("torus_side")?,
            h,
            budget,
        )?,
        other => {
            return Err(CliError::Config(format!(
                "line {}: unknown space kind '{other}' (grid, torus, ends)",
                s.line_of("kind")
            )))
        }
    };
    Ok(space)
}

/// Operator description used to key eigensystem caches.
fn cache_key(space: &MetricMeasureSpace, pot: Option<PotentialSpec>) -> String {
    match pot {
        None => format!("{}/laplacian", space.content_hash()),
        Some(p) => format!("{}/schrodinger(c={:e},cutoff={:e})", space.content_hash(), p.c, p.cutoff),
    }
}

pub struct Built {
    pub op: SelfAdjointOperator,
    pub spec: Option<PotentialSpec>,
}

/// Builds the operator of `[operator]` (Laplacian when absent) on `space`, reading or
/// writing the eigensystem cache when one is configured.
pub fn build_operator(cfg: &Config, space: Arc<MetricMeasureSpace>, budget: Option<usize>) -> Result<Built, CliError> {
    let sec = cfg.section("operator");
    if let Some(s) = sec {
        s.allow(OPERATOR_KEYS)?;
    }
    let eigen_budget = match sec.map(|s| s.usize_opt("eigen_budget")).transpose()?.flatten() {
        Some(b) => b,
        None => budget.unwrap_or(DEFAULT_EIGEN_BUDGET),
    };
    let kind = sec.and_then(|s| s.str_opt("kind")).unwrap_or("laplacian");
    let (op, spec) = match kind {
        "laplacian" => (laplacian(space.clone()), None),
        "schrodinger" => {
            let s = sec.unwrap();
            let spec = PotentialSpec::new(s.f64("c")?, s.f64_or("cutoff", 1.0)?)?;
            (schrodinger_unchecked(space.clone(), spec)?, Some(spec))
        }
        other => return Err(CliError::Config(format!("unknown operator kind '{other}' (laplacian, schrodinger)"))),
    };
    let op = op.with_eigen_budget(eigen_budget);
    if let Some(path) = sec.and_then(|s| s.str_opt("cache")).map(|p| cfg.resolve(p)) {
        if op.len() <= op.eigen_budget() {
            let key = cache_key(&space, spec);
            if path.exists() {
                op.install_eigensystem(Eigensystem::read_cache(&path, &key)?)?;
            } else {
                op.spectral_decomposition()?.write_cache(&path, &key)?;
            }
        }
    }
    if spec.is_some() {
        let (min, tol) = (op.min_eigenvalue()?, op.tol_psd()?);
        if min < -tol {
            return Err(smlab::Error::NotNonNegative { min_eig: min, tol }.into());
        }
    }
    Ok(Built { op, spec })
}

/// Operators per space name, built on first use.
pub struct OperatorPool<'a> {
    cfg: &'a Config,
    budget: Option<usize>,
    ops: BTreeMap<String, Arc<Built>>,
}

impl<'a> OperatorPool<'a> {
    pub fn new(cfg: &'a Config, budget: Option<usize>) -> Self {
        Self { cfg, budget, ops: BTreeMap::new() }
    }

    pub fn get(&mut self, name: &str) -> Result<Arc<Built>, CliError> {
        if let Some(b) = self.ops.get(name) {
            return Ok(b.clone());
        }
        let space = Arc::new(build_space(space_section(self.cfg, name)?, self.budget)?);
        let built = Arc::new(build_operator(self.cfg, space, self.budget)?);
        self.ops.insert(name.to_string(), built.clone());
        Ok(built)
    }
}
