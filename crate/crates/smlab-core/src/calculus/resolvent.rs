//! Resolvent powers `(I + t²L)^{-σ}` and complex-time resolvents `(z² + L)^{-1}`.

use num_complex::Complex64;

use super::multiplier::MultiplierFunction;
use super::{apply_multiplier, spectral_kernel};
use crate::error::{invalid, Error, Result};
use crate::norms::OperatorKernel;
use crate::operators::SelfAdjointOperator;
use crate::quadrature::{frequency_panels, integrate, QuadOptions};

/// Kernel of `(I + t²L)^{-σ}`.
pub fn resolvent_power(op: &SelfAdjointOperator, t: f64, sigma: f64) -> Result<OperatorKernel> {
    if !(t > 0.0) || !(sigma > 0.0) {
        return Err(invalid("resolvent_power needs t > 0 and sigma > 0"));
    }
    apply_multiplier(op, &MultiplierFunction::ResolventPower { sigma }, t * t)
}

/// `Γ(σ)^{-1} ∫_0^∞ e^{-sc} s^{σ-1} ds` with `s = u^{1/σ}`, which equals `c^{-σ}`.
pub fn resolvent_power_scalar(c: f64, sigma: f64, quad_tol: f64) -> Result<f64> {
    if !(c > 0.0) || !(sigma > 0.0) {
        return Err(invalid("resolvent_power_scalar needs c > 0 and sigma > 0"));
    }
    let upper = (40.0 / c).powf(sigma);
    let mut breaks: Vec<f64> = (0..=24).rev().map(|k| upper * 2f64.powi(-k)).collect();
    breaks.insert(0, 0.0);
    let r = integrate(
        |u| Complex64::new((-c * u.powf(1.0 / sigma)).exp(), 0.0),
        &breaks,
        QuadOptions { abs_tol: quad_tol * sigma * libm::tgamma(sigma), rel_tol: 0.0, max_intervals: 100_000 },
    )?;
    Ok(r.value.re / (sigma * libm::tgamma(sigma)))
}

/// Kernel of `(I + t²L)^{-σ}` assembled from the Gamma-integral form per eigenvalue.
pub fn resolvent_power_quadrature(op: &SelfAdjointOperator, t: f64, sigma: f64) -> Result<OperatorKernel> {
    if !(t > 0.0) || !(sigma > 0.0) {
        return Err(invalid("resolvent_power needs t > 0 and sigma > 0"));
    }
    let es = op.spectral_decomposition()?;
    let coeffs = es
        .values
        .iter()
        .map(|&l| resolvent_power_scalar(1.0 + t * t * l.max(0.0), sigma, 1e-12))
        .collect::<Result<Vec<f64>>>()?;
    OperatorKernel::new(op.space().clone(), spectral_kernel(&es, &coeffs), None)
}

fn check_half_plane(z: Complex64) -> Result<()> {
    if !(z.re > 0.0) || !z.is_finite() {
        return Err(invalid(format!("complex time must satisfy Re z > 0, got {z}")));
    }
    Ok(())
}

/// Kernel of `(z² + L)^{-1}`.
pub fn complex_time_resolvent(op: &SelfAdjointOperator, z: Complex64) -> Result<OperatorKernel> {
    check_half_plane(z)?;
    let es = op.spectral_decomposition()?;
    let z2 = z * z;
    let mut re = Vec::with_capacity(es.len());
    let mut im = Vec::with_capacity(es.len());
    for &l in &es.values {
        let d = z2 + l;
        if d.norm() <= 1e-12 * l.abs().max(1.0) {
            return Err(Error::Pole(l));
        }
        let v = d.inv();
        re.push(v.re);
        im.push(v.im);
    }
    let kim = im.iter().any(|v| *v != 0.0).then(|| spectral_kernel(&es, &im));
    OperatorKernel::new(op.space().clone(), spectral_kernel(&es, &re), kim)
}

/// `e^{-iθ} ∫_0^∞ exp(-s(λe^{-iθ} + r²e^{iθ})) ds` for `z = re^{iθ}`.
pub fn complex_resolvent_scalar(lambda: f64, z: Complex64, quad_tol: f64) -> Result<Complex64> {
    check_half_plane(z)?;
    let (r, theta) = z.to_polar();
    let rot = Complex64::from_polar(1.0, theta);
    let a = lambda * rot.conj() + r * r * rot;
    if !(a.re > 0.0) {
        return Err(Error::Pole(lambda));
    }
    let upper = (35.0 + (1.0 / a.re).ln().max(0.0)) / a.re;
    let freq = a.im.abs();
    let panels = frequency_panels(0.0, upper, upper / 32.0, |_| freq);
    let q = integrate(
        |s| (-a * s).exp(),
        &panels,
        QuadOptions { abs_tol: quad_tol, rel_tol: 0.0, max_intervals: 100_000 },
    )?;
    Ok(rot.conj() * q.value)
}

/// Max over the spectrum of `|integral formula - 1/(z² + λ)|`.
pub fn complex_resolvent_check(op: &SelfAdjointOperator, z: Complex64) -> Result<f64> {
    check_half_plane(z)?;
    let mut values = op.eigenvalues()?;
    values.dedup_by(|p, q| (*p - *q).abs() <= 1e-12 * q.abs().max(1.0));
    let mut worst: f64 = 0.0;
    for l in values {
        let d = z * z + l;
        if d.norm() <= 1e-12 * l.abs().max(1.0) {
            return Err(Error::Pole(l));
        }
        let q = complex_resolvent_scalar(l, z, 1e-11)?;
        worst = worst.max((q - d.inv()).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_integral_matches_power() {
        for (c, s) in [(1.0, 0.75), (3.0, 1.0), (9.0, 2.5), (1.5, 0.2)] {
            let v = resolvent_power_scalar(c, s, 1e-13).unwrap();
            assert!((v - c.powf(-s)).abs() < 1e-11, "{c} {s}: {v}");
        }
    }

    #[test]
    fn diagonal_time_scalar() {
        let z = Complex64::new(1.0, 1.0) / 2f64.sqrt();
        let v = complex_resolvent_scalar(1.0, z, 1e-11).unwrap();
        let exact = Complex64::new(1.0, 1.0).inv();
        assert!((v - exact).norm() < 1e-8);
        assert!(complex_resolvent_scalar(1.0, Complex64::new(0.0, 1.0), 1e-9).is_err());
    }
}
