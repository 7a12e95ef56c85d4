//! Sector resolvent bounds for `(z² + L)^{-1}` and the gap-point spectrum probe.

use num_complex::Complex64;
use rayon::prelude::*;

use super::bool_f;
use super::report::{Check, EvalInput, Evaluation, Measured, SuiteReport};
use crate::calculus::{apply_multiplier, complex_time_resolvent, hormander_check, MultiplierFunction};
use crate::error::{invalid, Result};
use crate::fit::fit_power_law;
use crate::norms::{norm_1to1, norm_ptop};
use crate::operators::SelfAdjointOperator;

#[derive(Clone, Debug)]
pub struct SectorOptions {
    pub slope_tol: f64,
    pub stability_tol: f64,
}

impl Default for SectorOptions {
    fn default() -> Self {
        Self { slope_tol: 0.5, stability_tol: 0.25 }
    }
}

/// `(|z|/Re z)^{2σ+2κ+3/2} |z|^{-2} (1 + |z|^{-2})^κ`.
pub fn sector_shape(z: Complex64, sigma: f64, kappa: f64) -> f64 {
    let r = z.norm();
    (r / z.re).powf(2.0 * sigma + 2.0 * kappa + 1.5) * r.powi(-2) * (1.0 + r.powi(-2)).powf(kappa)
}

/// `‖(z² + L)^{-1}‖_{p→p}` for `p ∈ {1, ∞}` over the samples, on one or two mesh sizes.
///
/// Column `inv_p` holds `1/p`.
pub fn suite_resolvent_sector(
    ops: &[&SelfAdjointOperator],
    z_samples: &[Complex64],
    sigma: f64,
    kappa: f64,
    opts: &SectorOptions,
) -> Result<SuiteReport> {
    if ops.is_empty() || ops.len() > 2 {
        return Err(invalid("resolvent sector suite takes one or two operators"));
    }
    if z_samples.is_empty() || z_samples.iter().any(|z| !(z.re > 0.0) || !z.is_finite()) {
        return Err(invalid("every sample needs Re z > 0"));
    }
    let (rmin, rmax) = z_samples.iter().fold((f64::INFINITY, 0.0f64), |a, z| (a.0.min(z.norm()), a.1.max(z.norm())));
    if (rmax / rmin).log10() + 1e-12 < 2.0 {
        return Err(invalid("sample radii must span at least 2 decades"));
    }
    let mut m = Measured::new(&["level", "r", "theta", "inv_p", "norm", "shape", "ratio"]);
    for (i, op) in ops.iter().enumerate() {
        m.label(&format!("space_hash_{i}"), op.space().content_hash());
        m.measure(&format!("points_{i}"), op.len() as f64);
    }
    m.param("sigma", sigma).param("kappa", kappa).param("levels", ops.len() as f64);
    m.tol("slope", opts.slope_tol).tol("stability", opts.stability_tol);
    for (level, op) in ops.iter().enumerate() {
        let rows: Vec<Result<Vec<Vec<f64>>>> = z_samples
            .par_iter()
            .map(|&z| {
                let k = complex_time_resolvent(op, z)?;
                let shape = sector_shape(z, sigma, kappa);
                let mut out = Vec::with_capacity(2);
                for p in [1.0, f64::INFINITY] {
                    let norm = norm_ptop(&k, p)?.upper;
                    out.push(vec![level as f64, z.norm(), z.arg(), 1.0 / p, norm, shape, norm / shape]);
                }
                Ok(out)
            })
            .collect();
        for r in rows {
            for row in r? {
                m.row(row);
            }
        }
    }
    m.finish("resolvent_sector")
}

/// Sorted representatives of `values`, merging those within a relative `1e-9`.
fn clusters(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if out.last().is_none_or(|&l| (v - l).abs() > 1e-9 * v.abs().max(l.abs())) {
            out.push(v);
        }
    }
    out
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

pub fn evaluate_resolvent_sector(input: &EvalInput) -> Result<Evaluation> {
    let mut ev = Evaluation::default();
    let (lc, rc, tc, pc) = (input.col("level")?, input.col("r")?, input.col("theta")?, input.col("inv_p")?);
    let (nc, qc) = (input.col("norm")?, input.col("ratio")?);
    let (sigma, kappa) = (input.param("sigma")?, input.param("kappa")?);
    let levels = input.param("levels")? as usize;
    let radii = clusters(input.table.iter().map(|r| r[rc]).collect());

    let mut best: Option<(String, crate::fit::ExponentFit, Vec<(f64, f64)>)> = None;
    for level in 0..levels {
        for inv_p in [1.0, 0.0] {
            for &r in &radii {
                let pts: Vec<(f64, f64)> = input
                    .table
                    .iter()
                    .filter(|row| row[lc] == level as f64 && row[pc] == inv_p && same(row[rc], r))
                    .map(|row| (1.0 / row[tc].cos(), row[nc]))
                    .collect();
                if clusters(pts.iter().map(|p| p.0).collect()).len() < 3 {
                    continue;
                }
                let hi = pts.iter().map(|p| p.0).fold(1.0, f64::max);
                let fit = fit_power_law(&pts, (1.0, hi))?;
                if best.as_ref().is_none_or(|b| fit.slope > b.1.slope) {
                    let p = if inv_p == 1.0 { "1" } else { "inf" };
                    best = Some((format!("level={level} p={p} r={r}"), fit, pts));
                }
            }
        }
    }
    let (_, fit, pts) = best.ok_or_else(|| invalid("no radius has three distinct angles; angular slope undefined"))?;
    let slope = fit.slope;
    ev.fit("angular", fit, pts);
    let bound = 2.0 * sigma + 2.0 * kappa + 1.5;
    ev.checks.push(Check::le("angular_slope", slope, bound + input.tol("slope")?));

    let mut cs = Vec::new();
    for level in 0..levels {
        let c = input.table.iter().filter(|r| r[lc] == level as f64).map(|r| r[qc]).fold(0.0, f64::max);
        ev.constants.insert(format!("C_{level}"), c);
        cs.push(c);
    }
    if levels == 2 {
        ev.checks.push(Check::le("C_stability", (cs[1] / cs[0] - 1.0).abs(), input.tol("stability")?));
    } else {
        ev.checks.push(Check::within("C_0", cs[0], None, None));
    }
    let real = input.table.iter().filter(|r| r[tc] == 0.0).map(|r| r[qc]).fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))));
    if let Some(c) = real {
        ev.checks.push(Check::le("real_axis_C", c, 2.0).info());
    }
    Ok(ev)
}

#[derive(Clone, Debug)]
pub struct ProbeOptions {
    pub sigma: f64,
    pub kappa: f64,
    pub eps: f64,
    pub psi_tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { sigma: 0.5, kappa: 0.0, eps: 0.1, psi_tol: 1e-12 }
    }
}

/// At a point `ρ` at distance at least `gap` from the spectrum: `ψ(L) = 0` for the bump
/// `ψ` around `ρ`, the 1→1 norm of `(ρ − L)^{-1}(I − ψ(L))`, and the Hörmander table of
/// `g(λ) = (1 − ψ(λ))/(ρ − λ)`.
pub fn suite_spectrum_probe(op: &SelfAdjointOperator, rho: f64, gap: f64, opts: &ProbeOptions) -> Result<SuiteReport> {
    if !(gap > 0.0) || !rho.is_finite() {
        return Err(invalid("spectrum probe needs finite rho and gap > 0"));
    }
    let vals = op.eigenvalues()?;
    let dist = vals.iter().map(|l| (l - rho).abs()).fold(f64::INFINITY, f64::min);
    // eigenvalues carry rounding; a point exactly `gap` away is admissible
    if dist < gap * (1.0 - 1e-9) {
        return Err(invalid(format!("rho = {rho} lies within {dist:.3e} of the spectrum, less than gap {gap}")));
    }
    let psi = apply_multiplier(op, &MultiplierFunction::Bump { center: rho, width: gap }, 1.0)?;
    let g = MultiplierFunction::GapResolvent { rho, width: gap };
    let norm = norm_1to1(&apply_multiplier(op, &g, 1.0)?);
    let h = hormander_check(&g, opts.sigma, opts.kappa, opts.eps)?;
    let mut m = Measured::new(&["m", "low_sup", "max_block", "bounded"]);
    m.label("space_hash", op.space().content_hash());
    m.param("rho", rho).param("gap", gap).param("sigma", opts.sigma).param("kappa", opts.kappa).param("eps", opts.eps);
    m.param("sub_markov", bool_f(op.potential().is_none()));
    m.tol("psi", opts.psi_tol);
    m.measure("distance_to_spectrum", dist).measure("psi_max_entry", psi.max_abs());
    m.measure("resolvent_norm_1to1", norm).measure("hormander_constant", h.constant);
    for row in &h.rows {
        let max_block = row.block_sup.iter().copied().fold(0.0, f64::max);
        m.row(vec![row.m as f64, row.low_sup, max_block, bool_f(row.bounded)]);
    }
    m.finish("spectrum_probe")
}

pub fn evaluate_spectrum_probe(input: &EvalInput) -> Result<Evaluation> {
    let mut ev = Evaluation::default();
    ev.checks.push(Check::le("psi_vanishes", input.measured("psi_max_entry")?, input.tol("psi")?));
    let norm = input.measured("resolvent_norm_1to1")?;
    ev.checks.push(Check::within("resolvent_norm_finite", norm, None, None));
    let bc = input.col("bounded")?;
    let bounded = input.table.iter().all(|r| r[bc] == 1.0) && !input.table.is_empty();
    ev.checks.push(Check::ge("hormander_bounded", bool_f(bounded), 1.0));
    let rho = input.param("rho")?;
    if rho < 0.0 && input.param("sub_markov")? == 1.0 {
        ev.checks.push(Check::le("positivity_bound", norm, (1.0 + 1e-9) / rho.abs()));
    }
    ev.constants.insert("hormander_constant".into(), input.measured("hormander_constant")?);
    Ok(ev)
}
