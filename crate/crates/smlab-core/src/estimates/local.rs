//! Davies–Gaffney decay, locality of bandlimited multipliers and the subordination identity.

use rayon::prelude::*;

use super::check_grid;
use super::report::{Check, EvalInput, Evaluation, Measured, SuiteReport};
use crate::calculus::{f_a, locality_check, propagation_speed, subordination_integral, MultiplierFunction};
use crate::error::{invalid, Result};
use crate::fit::{fit_power_law, least_squares};
use crate::metric_space::{volume_profile_fit, MetricMeasureSpace};
use crate::norms::{davies_gaffney_pairs, BallPair};
use crate::operators::SelfAdjointOperator;

/// Propagation times used to measure the speed, in units of the edge length.
pub const SPEED_TAUS: [f64; 4] = [6.0, 8.0, 10.0, 12.0];

fn measured_speed(op: &SelfAdjointOperator, tol: f64) -> Result<(f64, f64)> {
    let h = op.space().max_edge_length();
    let taus: Vec<f64> = SPEED_TAUS.iter().map(|t| t * h).collect();
    let s = propagation_speed(op, &taus, tol)?;
    Ok((s.speed, s.cfl))
}

/// For every centre and gap `g`, pairs `B(c, R)` with `B(c', R)` where `c'` is the
/// lowest-index point whose distance to `c` is closest to `2R + g`.
pub fn pair_schedule(space: &MetricMeasureSpace, centers: &[usize], ball_radius: f64, gaps: &[f64]) -> Result<Vec<BallPair>> {
    if !(ball_radius >= 0.0) || gaps.iter().any(|g| !(*g > 0.0)) {
        return Err(invalid("pair schedule needs ball_radius >= 0 and positive gaps"));
    }
    let mut out = Vec::new();
    for &c in centers {
        if c >= space.len() {
            return Err(invalid(format!("centre {c} out of range")));
        }
        let row = space.distance_row(c);
        for &g in gaps {
            let target = 2.0 * ball_radius + g;
            let best = row
                .iter()
                .enumerate()
                .filter(|(_, d)| d.is_finite())
                .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()).then(a.0.cmp(&b.0)));
            if let Some((c2, &d)) = best {
                if d - 2.0 * ball_radius > 0.0 {
                    out.push(BallPair { c1: c, r1: ball_radius, c2, r2: ball_radius });
                }
            }
        }
    }
    out.sort_by(|a, b| (a.c1, a.c2).cmp(&(b.c1, b.c2)));
    out.dedup();
    if out.is_empty() {
        return Err(invalid("pair schedule is empty"));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct DgOptions {
    /// Metric rescaling; measured from `cos(τ√L)` when `None`.
    pub speed: Option<f64>,
    pub mass_tol: f64,
    /// Volume growth exponents below and above unit scale.
    pub n1: f64,
    pub n2: f64,
    pub rate_floor: f64,
    pub prefactor_tol: f64,
    /// Norms below this are left out of the regression.
    pub norm_floor: f64,
    /// Radius separating the two regimes of the reported volume profile, if wanted.
    pub volume_crossover: Option<f64>,
}

impl Default for DgOptions {
    fn default() -> Self {
        Self {
            speed: None,
            mass_tol: 1e-6,
            n1: 0.0,
            n2: 0.0,
            rate_floor: 0.125,
            prefactor_tol: 0.3,
            norm_floor: 1e-12,
            volume_crossover: None,
        }
    }
}

/// `‖1_{B₂} e^{-tL} 1_{B₁}‖_{2→2}` over `t` and ball pairs, regressed as
/// `log norm ≈ a + β log(1+t) − ĉ r²/t` with `r` the speed-rescaled ball distance.
pub fn suite_dg_decay(op: &SelfAdjointOperator, t_grid: &[f64], pairs: &[BallPair], opts: &DgOptions) -> Result<SuiteReport> {
    check_grid("t_grid", t_grid, 1.0)?;
    if pairs.is_empty() {
        return Err(invalid("degenerate pair schedule: no pairs"));
    }
    let (speed, cfl) = match opts.speed {
        Some(v) if v > 0.0 => (v, f64::NAN),
        Some(v) => return Err(invalid(format!("speed must be positive, got {v}"))),
        None => measured_speed(op, opts.mass_tol)?,
    };
    let results: Vec<Result<_>> = t_grid.par_iter().map(|&t| davies_gaffney_pairs(op, t, pairs, speed)).collect();
    let mut m = Measured::new(&["t", "pair", "distance", "r_scaled", "norm", "ratio"]);
    m.label("space_hash", op.space().content_hash());
    m.param("n1", opts.n1).param("n2", opts.n2).param("norm_floor", opts.norm_floor).param("speed", speed);
    m.tol("rate_floor", opts.rate_floor).tol("prefactor", opts.prefactor_tol);
    if cfl.is_finite() {
        m.measure("cfl_speed", cfl);
    }
    let mut worst: f64 = 0.0;
    let mut rs = Vec::new();
    for (&t, res) in t_grid.iter().zip(results) {
        let res = res?;
        worst = worst.max(res.worst_ratio);
        for (i, p) in res.pairs.iter().enumerate() {
            rs.push(p.scaled_distance);
            m.row(vec![t, i as f64, p.distance, p.scaled_distance, p.norm, p.ratio]);
        }
    }
    let (lo, hi) = rs.iter().fold((f64::INFINITY, 0.0f64), |a, &r| (a.0.min(r), a.1.max(r)));
    if (hi / lo).log10() + 1e-12 < 1.0 {
        return Err(invalid(format!("degenerate pair schedule: distances span {lo}..{hi}, less than a decade")));
    }
    m.measure("worst_ratio", worst);
    if let Some(c) = opts.volume_crossover {
        let diam = op.space().diameter();
        let h = op.space().max_edge_length();
        let grid: Vec<f64> = (0..16).map(|k| h * (diam / h).powf(k as f64 / 15.0)).collect();
        let vp = volume_profile_fit(op.space(), &grid, c)?;
        m.measure("volume_n_small", vp.n_small).measure("volume_n_large", vp.n_large);
    }
    m.finish("dg")
}

pub fn evaluate_dg(input: &EvalInput) -> Result<Evaluation> {
    let mut ev = Evaluation::default();
    let (tc, rc, nc) = (input.col("t")?, input.col("r_scaled")?, input.col("norm")?);
    let floor = input.param("norm_floor")?;
    let used: Vec<&Vec<f64>> = input.table.iter().filter(|r| r[nc] >= floor).collect();
    let design: Vec<Vec<f64>> = used.iter().map(|r| vec![1.0, (1.0 + r[tc]).ln(), -r[rc] * r[rc] / r[tc]]).collect();
    let y: Vec<f64> = used.iter().map(|r| r[nc].ln()).collect();
    let (beta, rms) = least_squares(&design, &y)?;
    ev.constants.insert("log_C".into(), beta[0]);
    ev.constants.insert("fit_rms".into(), rms);
    ev.constants.insert("rows_used".into(), used.len() as f64);
    ev.checks.push(Check::ge("gaussian_rate", beta[2], input.tol("rate_floor")?));
    let bound = (input.param("n2")? - input.param("n1")?) / 2.0 + input.tol("prefactor")?;
    ev.checks.push(Check::le("prefactor_exponent", beta[1], bound));
    Ok(ev)
}

#[derive(Clone, Debug)]
pub struct LocalityOptions {
    pub speed: Option<f64>,
    pub mass_tol: f64,
    pub slack: f64,
    pub leak_tol: f64,
}

impl Default for LocalityOptions {
    fn default() -> Self {
        Self { speed: None, mass_tol: 1e-6, slack: 0.1, leak_tol: 1e-6 }
    }
}

/// Leaked 1→1 mass of `F(r√L/B)` outside the cone `speed · r · (1 + slack)` for each `r`.
pub fn suite_locality(op: &SelfAdjointOperator, f: &MultiplierFunction, r_grid: &[f64], opts: &LocalityOptions) -> Result<SuiteReport> {
    if f.bandlimit().is_none() {
        return Err(invalid(format!("{} has no bandlimit", f.describe())));
    }
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(invalid("r_grid must hold finite positive radii"));
    }
    let (speed, cfl) = match opts.speed {
        Some(v) => (v, f64::NAN),
        None => measured_speed(op, opts.mass_tol)?,
    };
    let mut m = Measured::new(&["r", "leaked", "cone_radius"]);
    m.label("space_hash", op.space().content_hash()).label("multiplier", f.describe());
    m.param("speed", speed).param("slack", opts.slack);
    m.tol("leak", opts.leak_tol);
    if cfl.is_finite() {
        m.measure("cfl_speed", cfl);
    }
    for &r in r_grid {
        let res = locality_check(op, f, r, opts.slack, speed)?;
        m.row(vec![r, res.leaked_fraction, res.radius]);
    }
    m.finish("locality")
}

pub fn evaluate_locality(input: &EvalInput) -> Result<Evaluation> {
    let mut ev = Evaluation::default();
    let lc = input.col("leaked")?;
    let worst = input.table.iter().map(|r| r[lc]).fold(0.0, f64::max);
    ev.checks.push(Check::le("max_leaked_fraction", worst, input.tol("leak")?));
    Ok(ev)
}

#[derive(Clone, Debug)]
pub struct SubordinationOptions {
    pub quad_tol: f64,
    pub residual_tol: f64,
    /// `λ` window for the envelope of `|F_a|`; skipped when `None`.
    pub envelope_window: Option<(f64, f64)>,
    pub envelope_tol: f64,
}

impl Default for SubordinationOptions {
    fn default() -> Self {
        Self { quad_tol: 1e-9, residual_tol: 1e-6, envelope_window: Some((20.0, 200.0)), envelope_tol: 0.05 }
    }
}

/// Local maxima of `|F_a|` on `[lo, hi]`, located on a grid of step `0.01` and refined by
/// a parabola through the three samples around each peak.
pub fn envelope_peaks(a: f64, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid("envelope window must satisfy 0 < lo < hi"));
    }
    let step = 0.01;
    let n = ((hi - lo) / step).ceil() as usize + 2;
    let xs: Vec<f64> = (0..=n).map(|i| lo - step + i as f64 * step).collect();
    let ys: Vec<f64> = xs.par_iter().map(|&l| f_a(a, l).map(f64::abs)).collect::<Result<_>>()?;
    let mut peaks = Vec::new();
    for i in 1..ys.len() - 1 {
        let (y0, y1, y2) = (ys[i - 1], ys[i], ys[i + 1]);
        if !(y1 > y0 && y1 >= y2) {
            continue;
        }
        let den = y0 - 2.0 * y1 + y2;
        let shift = if den < 0.0 { 0.5 * (y0 - y2) / den } else { 0.0 };
        let x = xs[i] + shift * step;
        if (lo..=hi).contains(&x) {
            peaks.push((x, f_a(a, x)?.abs().max(y1)));
        }
    }
    Ok(peaks)
}

/// Subordination residuals over `a × ξ`, and envelope decay of `|F_a|` per `a`.
///
/// Column `kind` is 0 for residual rows (`x = ξ`) and 1 for envelope peaks (`x = λ`).
pub fn suite_subordination(a_values: &[f64], xi_grid: &[f64], opts: &SubordinationOptions) -> Result<SuiteReport> {
    if a_values.is_empty() || a_values.iter().any(|a| !(*a > 0.0)) {
        return Err(invalid("subordination suite needs a > 0"));
    }
    if xi_grid.is_empty() || xi_grid.iter().any(|x| !x.is_finite()) {
        return Err(invalid("xi_grid must hold finite values"));
    }
    let mut m = Measured::new(&["kind", "a", "x", "value"]);
    m.param("quad_tol", opts.quad_tol);
    m.tol("residual", opts.residual_tol).tol("envelope", opts.envelope_tol);
    if let Some((lo, hi)) = opts.envelope_window {
        m.param("envelope_lo", lo).param("envelope_hi", hi);
    }
    for &a in a_values {
        let res: Vec<Result<f64>> = xi_grid
            .par_iter()
            .map(|&xi| Ok((subordination_integral(a, xi, opts.quad_tol)? - (-xi * xi).exp()).abs()))
            .collect();
        for (&xi, r) in xi_grid.iter().zip(res) {
            m.row(vec![0.0, a, xi, r?]);
        }
        if let Some((lo, hi)) = opts.envelope_window {
            for (l, v) in envelope_peaks(a, lo, hi)? {
                m.row(vec![1.0, a, l, v]);
            }
        }
    }
    m.finish("subordination")
}

pub fn evaluate_subordination(input: &EvalInput) -> Result<Evaluation> {
    let mut ev = Evaluation::default();
    let (kc, ac, xc, vc) = (input.col("kind")?, input.col("a")?, input.col("x")?, input.col("value")?);
    let worst = input.table.iter().filter(|r| r[kc] == 0.0).map(|r| r[vc]).fold(0.0, f64::max);
    ev.checks.push(Check::le("max_residual", worst, input.tol("residual")?));
    if let (Some(lo), Some(hi)) = (input.param_opt("envelope_lo"), input.param_opt("envelope_hi")) {
        let tol = input.tol("envelope")?;
        let mut a_values: Vec<f64> = input.table.iter().map(|r| r[ac]).collect();
        a_values.sort_by(f64::total_cmp);
        a_values.dedup();
        for a in a_values {
            let pts: Vec<(f64, f64)> =
                input.table.iter().filter(|r| r[kc] == 1.0 && r[ac] == a).map(|r| (r[xc], r[vc])).collect();
            let fit = fit_power_law(&pts, (lo, hi))?;
            let target = -(1.0 + a);
            ev.checks.push(Check::within(&format!("envelope_slope_a={a}"), fit.slope, Some(target - tol), Some(target + tol)));
            ev.fit(&format!("envelope_a={a}"), fit, pts);
        }
    }
    Ok(ev)
}
