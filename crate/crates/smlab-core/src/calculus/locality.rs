//! Measured propagation speed of `cos(τ√L)` and leakage of bandlimited multipliers.

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::multiplier::MultiplierFunction;
use super::spectral_kernel;
use crate::error::{invalid, Error, Result};
use crate::metric_space::MetricMeasureSpace;
use crate::operators::SelfAdjointOperator;

/// `max length · sup_x √(2 Σ_y w_xy / μ(x))`.
pub fn cfl_speed(space: &MetricMeasureSpace) -> f64 {
    let mut dw = vec![0.0; space.len()];
    for e in space.edges() {
        dw[e.a] += e.conductance;
        dw[e.b] += e.conductance;
    }
    let s = dw
        .iter()
        .zip(space.mu())
        .map(|(d, m)| (2.0 * d / m).sqrt())
        .fold(0.0, f64::max);
    s * space.max_edge_length()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedResult {
    pub speed: f64,
    pub cfl: f64,
    /// `(τ, smallest admissible v at that τ)`.
    pub per_tau: Vec<(f64, f64)>,
}

/// `|K(x,y)| μ(x)` summed over columns and tails.
struct ColumnMass<'a> {
    space: &'a MetricMeasureSpace,
    re: &'a Mat<f64>,
    im: Option<&'a Mat<f64>>,
}

impl ColumnMass<'_> {
    fn column(&self, y: usize) -> Vec<(f64, f64)> {
        let d = self.space.distance_row(y);
        let mu = self.space.mu();
        (0..self.space.len())
            .map(|x| {
                let v = match self.im {
                    None => self.re[(x, y)].abs(),
                    Some(im) => self.re[(x, y)].hypot(im[(x, y)]),
                };
                (d[x], v * mu[x])
            })
            .collect()
    }

    /// Smallest distance `D` with the mass beyond `D` at most `tol` of the column.
    fn cone_radius(&self, y: usize, tol: f64) -> f64 {
        let mut col = self.column(y);
        let total: f64 = col.iter().map(|c| c.1).sum();
        if total == 0.0 {
            return 0.0;
        }
        col.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut tail = 0.0;
        let mut i = 0;
        while i < col.len() {
            let d = col[i].0;
            let mut group = 0.0;
            while i < col.len() && col[i].0 == d {
                group += col[i].1;
                i += 1;
            }
            if tail + group > tol * total {
                return d;
            }
            tail += group;
        }
        0.0
    }

    fn leak(&self, y: usize, radius: f64) -> f64 {
        let col = self.column(y);
        let total: f64 = col.iter().map(|c| c.1).sum();
        if total == 0.0 {
            return 0.0;
        }
        col.iter().filter(|c| c.0 > radius).map(|c| c.1).sum::<f64>() / total
    }
}

/// Smallest `v` such that for every `τ` at most `mass_tol` of each column's 1→1 mass of
/// `cos(τ√L)` lies beyond distance `vτ`.
pub fn propagation_speed(op: &SelfAdjointOperator, tau_grid: &[f64], mass_tol: f64) -> Result<SpeedResult> {
    if tau_grid.is_empty() || tau_grid.iter().any(|t| !(*t > 0.0)) || !(mass_tol > 0.0) {
        return Err(invalid("propagation_speed needs positive times and mass_tol > 0"));
    }
    let space = op.space();
    let cfl = cfl_speed(space);
    if space.len() <= 1 {
        return Ok(SpeedResult { speed: 0.0, cfl, per_tau: tau_grid.iter().map(|&t| (t, 0.0)).collect() });
    }
    let es = op.spectral_decomposition()?;
    let v_max = 10.0 * cfl;
    let mut per_tau = Vec::with_capacity(tau_grid.len());
    let mut speed: f64 = 0.0;
    for &tau in tau_grid {
        let c: Vec<f64> = es.values.iter().map(|&l| (tau * l.max(0.0).sqrt()).cos()).collect();
        let k = spectral_kernel(&es, &c);
        let cm = ColumnMass { space, re: &k, im: None };
        let d = (0..space.len()).map(|y| cm.cone_radius(y, mass_tol)).fold(0.0, f64::max);
        let v = d / tau;
        if v > v_max {
            return Err(Error::Numerical(format!(
                "no speed up to {v_max} confines cos(tau sqrt L) at tau = {tau} (needs {v})"
            )));
        }
        speed = speed.max(v);
        per_tau.push((tau, v));
    }
    Ok(SpeedResult { speed, cfl, per_tau })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalityResult {
    pub leaked_fraction: f64,
    /// Cone radius `speed · r · (1 + slack)` in the original metric.
    pub radius: f64,
}

/// Largest column fraction of the 1→1 mass of `F(r√L / B)` beyond `speed · r · (1 + slack)`.
pub fn locality_check(
    op: &SelfAdjointOperator,
    f: &MultiplierFunction,
    r: f64,
    slack: f64,
    speed: f64,
) -> Result<LocalityResult> {
    let b = f
        .bandlimit()
        .ok_or_else(|| invalid(format!("{} has no bandlimit; locality is undefined", f.describe())))?;
    if !(r > 0.0) || !(slack >= 0.0) || !(speed > 0.0) {
        return Err(invalid("locality_check needs r > 0, slack >= 0 and speed > 0"));
    }
    let space = op.space();
    let radius = speed * r * (1.0 + slack);
    if b == 0.0 {
        return Ok(LocalityResult { leaked_fraction: 0.0, radius });
    }
    let es = op.spectral_decomposition()?;
    let mut re = Vec::with_capacity(es.len());
    let mut im = Vec::with_capacity(es.len());
    for &l in &es.values {
        let arg = r * l.max(0.0).sqrt() / b;
        let v = f.eval(arg);
        if !v.is_finite() {
            return Err(Error::Undefined(arg));
        }
        re.push(v.re);
        im.push(v.im);
    }
    let kre = spectral_kernel(&es, &re);
    let kim = im.iter().any(|v| *v != 0.0).then(|| spectral_kernel(&es, &im));
    let cm = ColumnMass { space, re: &kre, im: kim.as_ref() };
    let leaked_fraction = (0..space.len()).map(|y| cm.leak(y, radius)).fold(0.0, f64::max);
    Ok(LocalityResult { leaked_fraction, radius })
}
