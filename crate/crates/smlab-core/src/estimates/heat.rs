//! Volume-weighted resolvent and heat norms, on-diagonal decay and the Schrödinger heat norm.

use rayon::prelude::*;

use super::report::{Check, EvalInput, Evaluation, Measured, SuiteReport};
use super::{bool_f, check_grid, length_window, pick_window};
use crate::calculus::spectral_row_l2_squared;
use crate::error::{invalid, Result};
use crate::fit::fit_power_law;
use crate::metric_space::volumes_at;
use crate::norms::weighted_sup;
use crate::operators::{check_subcritical, resonance_proxy, SelfAdjointOperator};

fn describe(op: &SelfAdjointOperator, m: &mut Measured) {
    m.label("space_hash", op.space().content_hash());
    m.label("operator", format!("{:?}", op.kind()));
    m.measure("points", op.len() as f64);
}

/// `sup_x V(x,t)^{1/2} (Σ_i c(t,λ_i)² u_i(x)²)^{1/2}` for every `t`.
fn weighted_norms(op: &SelfAdjointOperator, t_grid: &[f64], coeff: impl Fn(f64, f64) -> f64 + Sync) -> Result<Vec<f64>> {
    let es = op.spectral_decomposition()?;
    let vols = volumes_at(op.space(), t_grid);
    Ok(t_grid
        .par_iter()
        .zip(vols.par_iter())
        .map(|(&t, v)| {
            let c: Vec<f64> = es.values.iter().map(|&l| coeff(t, l).abs()).collect();
            weighted_sup(v, &spectral_row_l2_squared(&es, &c))
        })
        .collect())
}

/// Log–log fit of `norm` against `1 + t²` over `t ∈ [lo, hi]`.
fn kappa_fit(ev: &mut Evaluation, input: &EvalInput, name: &str) -> Result<f64> {
    let (lo, hi) = (input.param("window_lo")?, input.param("window_hi")?);
    let pts: Vec<(f64, f64)> = input
        .pairs("t", "norm")?
        .into_iter()
        .filter(|(t, _)| *t >= lo && *t <= hi)
        .map(|(t, v)| (1.0 + t * t, v))
        .collect();
    let fit = fit_power_law(&pts, (1.0 + lo * lo, 1.0 + hi * hi))?;
    let k = fit.slope;
    ev.constants.insert("C".into(), fit.intercept.exp());
    ev.fit(name, fit, pts);
    Ok(k)
}

#[derive(Clone, Debug)]
pub struct RskOptions {
    /// Fit window in `t`; defaults to `[h, diam/4]`.
    pub window: Option<(f64, f64)>,
    pub kappa_predicted: f64,
    pub kappa_tol: f64,
}

impl Default for RskOptions {
    fn default() -> Self {
        Self { window: None, kappa_predicted: 0.0, kappa_tol: 0.15 }
    }
}

/// `‖V_t^{1/2} (I + t²L)^{-σ}‖_{2→∞}` over `t`, with `κ̂` the slope against `1 + t²`.
pub fn suite_rsk(op: &SelfAdjointOperator, sigma: f64, t_grid: &[f64], opts: &RskOptions) -> Result<SuiteReport> {
    if !(sigma > 0.0) {
        return Err(invalid("rsk needs sigma > 0"));
    }
    check_grid("t_grid", t_grid, 2.0)?;
    let (lo, hi) = pick_window(opts.window, length_window(op.space()), t_grid);
    let norms = weighted_norms(op, t_grid, |t, l| (1.0 + t * t * l).powf(-sigma))?;
    let mut m = Measured::new(&["t", "norm"]);
    describe(op, &mut m);
    m.param("sigma", sigma).param("window_lo", lo).param("window_hi", hi).param("kappa_predicted", opts.kappa_predicted);
    m.tol("kappa", opts.kappa_tol);
    for (&t, &v) in t_grid.iter().zip(&norms) {
        m.row(vec![t, v]);
    }
    m.finish("rsk")
}

pub fn evaluate_rsk(input: &EvalInput) -> Result<Evaluation> {
    let mut ev = Evaluation::default();
    let k = kappa_fit(&mut ev, input, "kappa")?;
    ev.checks.push(Check::le("kappa_hat", k, input.param("kappa_predicted")? + input.tol("kappa")?));
    Ok(ev)
}

#[derive(Clone, Debug)]
pub struct Heat2InfOptions {
    pub window: Option<(f64, f64)>,
    pub kappa_predicted: f64,
    pub kappa_tol: f64,
    /// `κ̂` of a resolvent suite on the same space, for the equivalence check.
    pub kappa_rsk: Option<f64>,
    pub agreement_tol: f64,
}

impl Default for Heat2InfOptions {
    fn default() -> Self {
        Self { window: None, kappa_predicted: 0.0, kappa_tol: 0.15, kappa_rsk: None, agreement_tol: 0.15 }
    }
}

/// `‖V_t^{1/2} e^{-t²L}‖_{2→∞}` over `t`.
pub fn suite_heat2inf(op: &SelfAdjointOperator, t_grid: &[f64], opts: &Heat2InfOptions) -> Result<SuiteReport> {
    check_grid("t_grid", t_grid, 2.0)?;
    let (lo, hi) = pick_window(opts.window, length_window(op.space()), t_grid);
    let norms = weighted_norms(op, t_grid, |t, l| (-t * t * l).exp())?;
    let mut m = Measured::new(&["t", "norm"]);
    describe(op, &mut m);
    m.param("window_lo", lo).param("window_hi", hi).param("kappa_predicted", opts.kappa_predicted);
    if let Some(k) = opts.kappa_rsk {
        m.param("kappa_rsk", k);
    }
    m.tol("kappa", opts.kappa_tol).tol("agreement", opts.agreement_tol);
    for (&t, &v) in t_grid.iter().zip(&norms) {
        m.row(vec![t, v]);
    }
    m.finish("heat2inf")
}

pub fn evaluate_heat2inf(input: &EvalInput) -> Result<Evaluation> {
    let mut ev = Evaluation::default();
    let k = kappa_fit(&mut ev, input, "kappa")?;
    ev.checks.push(Check::le("kappa_hat", k, input.param("kappa_predicted")? + input.tol("kappa")?));
    if let Some(kr) = input.param_opt("kappa_rsk") {
        ev.checks.push(Check::le("kappa_agreement", (k - kr).abs(), input.tol("agreement")?));
    }
    Ok(ev)
}

#[derive(Clone, Debug)]
pub struct OndiagOptions {
    /// Small-time window (local dimension `m`).
    pub small_window: (f64, f64),
    /// Large-time window (global dimension `n`); `None` for a single regime.
    pub large_window: Option<(f64, f64)>,
    pub slope_tol: f64,
}

impl Default for OndiagOptions {
    fn default() -> Self {
        Self { small_window: (1.3, 2.6), large_window: Some((6.0, 12.0)), slope_tol: 0.2 }
    }
}

/// `sup_x p_t(x,x)` over `t`, fitted separately on a small-time and a large-time window.
///
/// Times beyond `min((diam/4)², 1/λ_*)`, with `λ_*` the lowest eigenvalue above rounding,
/// are flagged as saturated and left out of the fits.
pub fn suite_ondiag(op: &SelfAdjointOperator, t_grid: &[f64], n: usize, m_dim: usize, opts: &OndiagOptions) -> Result<SuiteReport> {
    check_grid("t_grid", t_grid, 1.0)?;
    let vals = op.eigenvalues()?;
    let top = vals.last().copied().unwrap_or(0.0).abs().max(1e-300);
    let lam_star = vals.iter().copied().find(|&l| l > 1e-9 * top).unwrap_or(top);
    let diam = op.space().diameter();
    let t_sat = (diam * diam / 16.0).min(1.0 / lam_star);
    let mut m = Measured::new(&["t", "sup_diag", "argmax", "saturated"]);
    describe(op, &mut m);
    m.param("n", n as f64).param("m", m_dim as f64).param("t_saturation", t_sat);
    m.param("small_lo", opts.small_window.0).param("small_hi", opts.small_window.1);
    if let Some((a, b)) = opts.large_window {
        m.param("large_lo", a).param("large_hi", b);
    }
    m.tol("slope", opts.slope_tol);
    m.measure("plateau", 1.0 / op.space().total_mass()).measure("lowest_eigenvalue", vals[0]);
    let rows: Vec<Result<Vec<f64>>> = t_grid
        .par_iter()
        .map(|&t| {
            let d = op.spectral_diagonal(|l| (-t * l).exp())?;
            let (arg, sup) = d.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
            Ok(vec![t, sup, arg as f64, bool_f(t > t_sat)])
        })
        .collect();
    for r in rows {
        m.row(r?);
    }
    m.finish("ondiag")
}

pub fn evaluate_ondiag(input: &EvalInput) -> Result<Evaluation> {
    let mut ev = Evaluation::default();
    let (ti, si, sat) = (input.col("t")?, input.col("sup_diag")?, input.col("saturated")?);
    let tol = input.tol("slope")?;
    let mut regime = |name: &str, lo: f64, hi: f64, target: f64| -> Result<()> {
        let pts: Vec<(f64, f64)> = input
            .table
            .iter()
            .filter(|r| r[ti] >= lo && r[ti] <= hi && r[sat] == 0.0)
            .map(|r| (r[ti], r[si]))
            .collect();
        let fit = fit_power_law(&pts, (lo, hi))?;
        ev.checks.push(Check::within(&format!("{name}_slope"), fit.slope, Some(target - tol), Some(target + tol)));
        ev.constants.insert(format!("{name}_C"), fit.intercept.exp());
        ev.fit(name, fit, pts);
        Ok(())
    };
    let (n, m) = (input.param("n")?, input.param("m")?);
    regime("small", input.param("small_lo")?, input.param("small_hi")?, -m / 2.0)?;
    if let (Some(a), Some(b)) = (input.param_opt("large_lo"), input.param_opt("large_hi")) {
        regime("large", a, b, -n / 2.0)?;
    }
    Ok(ev)
}

#[derive(Clone, Debug)]
pub struct SchrodingerOptions {
    /// Fit window in `t`; defaults to `[1, t_sat / 2]`.
    pub window: Option<(f64, f64)>,
    pub exponent_tol: f64,
    /// Largest rms log-residual accepted as a genuine power law.
    pub residual_tol: f64,
    /// `ε` for the subcriticality check, if requested.
    pub subcritical_eps: Option<f64>,
    /// Radial window for the ground-state resonance proxy, if requested.
    pub resonance_window: Option<(f64, f64)>,
}

impl Default for SchrodingerOptions {
    fn default() -> Self {
        Self { window: None, exponent_tol: 0.25, residual_tol: 0.05, subcritical_eps: Some(0.1), resonance_window: None }
    }
}

/// `‖e^{-tL}‖_{2→∞}` over `t`, with the exponent of `t^{n/4}‖e^{-tL}‖_{2→∞}` against `1 + t`.
///
/// The saturation time is `(s h / 4)²` for the shortest lattice side `s` (or `(diam/4)²`).
pub fn suite_schrodinger(
    op: &SelfAdjointOperator,
    t_grid: &[f64],
    alpha: f64,
    n: usize,
    opts: &SchrodingerOptions,
) -> Result<SuiteReport> {
    check_grid("t_grid", t_grid, 1.0)?;
    let space = op.space();
    let scale = match space.lattice() {
        Some(l) => *l.shape.iter().min().unwrap() as f64 * space.max_edge_length(),
        None => space.diameter(),
    };
    let t_sat = (scale / 4.0).powi(2);
    let (lo, hi) = opts.window.unwrap_or((1.0, 0.5 * t_sat));
    let mut m = Measured::new(&["t", "norm", "scaled", "saturated"]);
    describe(op, &mut m);
    m.param("alpha", alpha).param("n", n as f64).param("window_lo", lo).param("window_hi", hi).param("t_saturation", t_sat);
    m.tol("exponent", opts.exponent_tol).tol("residual", opts.residual_tol);
    if let Some(p) = op.potential() {
        m.param("c", p.spec.c);
    }
    m.measure("min_eigenvalue", op.min_eigenvalue()?);
    if let Some(eps) = opts.subcritical_eps {
        let s = check_subcritical(op, eps)?;
        m.param("subcritical_eps", eps).measure("subcritical_min_eig", s.min_eig).measure("subcritical_tol", s.tol);
    }
    if let Some(w) = opts.resonance_window {
        let r = resonance_proxy(op, w)?;
        m.measure("resonance_alpha", r.alpha_fit);
    }
    for &t in t_grid {
        let d = op.spectral_diagonal(|l| (-2.0 * t * l).exp())?;
        let norm = d.iter().copied().fold(0.0, f64::max).sqrt();
        m.row(vec![t, norm, t.powf(n as f64 / 4.0) * norm, bool_f(t > t_sat)]);
    }
    m.finish("schrodinger")
}

pub fn evaluate_schrodinger(input: &EvalInput) -> Result<Evaluation> {
    let mut ev = Evaluation::default();
    let (lo, hi) = (input.param("window_lo")?, input.param("window_hi")?);
    let (ti, si, sat) = (input.col("t")?, input.col("scaled")?, input.col("saturated")?);
    if input.table.iter().any(|r| r[ti] >= lo && r[ti] <= hi && r[sat] != 0.0) {
        return Err(invalid("schrodinger fit window reaches the saturation regime"));
    }
    let pts: Vec<(f64, f64)> = input
        .table
        .iter()
        .filter(|r| r[ti] >= lo && r[ti] <= hi)
        .map(|r| (1.0 + r[ti], r[si]))
        .collect();
    let fit = fit_power_law(&pts, (1.0 + lo, 1.0 + hi))?;
    let half = input.param("alpha")? / 2.0;
    let tol = input.tol("exponent")?;
    ev.checks.push(Check::within("exponent", fit.slope, Some(half - tol), Some(half + tol)));
    ev.checks.push(Check::le("fit_residual", fit.residual_rms, input.tol("residual")?));
    ev.checks.push(Check::le("exponent_vs_half_alpha", fit.slope, half).info());
    if let (Ok(v), Ok(t)) = (input.measured("subcritical_min_eig"), input.measured("subcritical_tol")) {
        ev.checks.push(Check::ge("subcritical_min_eig", v, -t));
    }
    ev.constants.insert("C".into(), fit.intercept.exp());
    ev.fit("exponent", fit, pts);
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::metric_space::MetricMeasureSpace;
    use crate::operators::laplacian;

    #[test]
    fn single_point_rsk_is_flat() {
        let op = laplacian(Arc::new(MetricMeasureSpace::new(vec![2.0], vec![], vec![0]).unwrap()));
        let grid: Vec<f64> = (0..9).map(|k| 10f64.powf(-1.0 + 0.25 * k as f64)).collect();
        let r = suite_rsk(&op, 1.0, &grid, &RskOptions::default()).unwrap();
        assert!(r.fits["kappa"].slope.abs() < 1e-12);
        assert!(r.column("norm").unwrap().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(r.pass && r.is_consistent().unwrap());
    }

    #[test]
    fn grid_must_span_decades() {
        let op = laplacian(Arc::new(MetricMeasureSpace::new(vec![1.0], vec![], vec![0]).unwrap()));
        assert!(suite_rsk(&op, 1.0, &[1.0, 2.0, 3.0], &RskOptions::default()).is_err());
    }
}
