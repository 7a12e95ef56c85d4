//! The bandlimited kernel `F_a` and the Gamma-type subordination identities built on it.
//!
//! `F_a(λ) = c_a ∫_{-1}^{1} (1-u²)^a cos(λu) du` is evaluated with a Gauss–Jacobi rule
//! for the weight `(1-u²)^a`, so only `cos(λ x_i)` is sampled. The rule size grows
//! linearly with `|λ|`, which keeps the error at rounding level for every argument.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use faer::Mat;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::operators::{symmetric_eigen, SelfAdjointOperator};
use crate::quadrature::{frequency_panels, integrate, QuadOptions};

type Rule = Arc<(Vec<f64>, Vec<f64>)>;

static RULES: RwLock<Option<HashMap<(u64, usize), Rule>>> = RwLock::new(None);

/// `∫_{-1}^{1} (1-u²)^a du = √π Γ(a+1) / Γ(a+3/2)`.
pub fn weight_mass(a: f64) -> f64 {
    std::f64::consts::PI.sqrt() * libm::tgamma(a + 1.0) / libm::tgamma(a + 1.5)
}

/// Normalisation `F_a(0) = 1 / (Γ(a+3/2) 4^{a+3/2})`.
pub fn f_a_at_zero(a: f64) -> f64 {
    1.0 / (libm::tgamma(a + 1.5) * 4f64.powf(a + 1.5))
}

/// Gauss rule with `n` nodes for the weight `(1-u²)^a` on `[-1, 1]` (Golub–Welsch).
pub fn gauss_jacobi_symmetric(a: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut j = Mat::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let beta = kf * (kf + 2.0 * a) / ((2.0 * kf + 2.0 * a + 1.0) * (2.0 * kf + 2.0 * a - 1.0));
        let b = beta.sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let (nodes, vecs) = symmetric_eigen(&j)?;
    let m0 = weight_mass(a);
    let weights = (0..n).map(|i| m0 * vecs[(0, i)] * vecs[(0, i)]).collect();
    Ok((nodes, weights))
}

fn rule_for(a: f64, lambda: f64) -> Rule {
    let n = (((0.75 * lambda.abs() + 24.0) / 16.0).ceil() as usize) * 16;
    let key = (a.to_bits(), n);
    if let Some(map) = RULES.read().unwrap().as_ref() {
        if let Some(r) = map.get(&key) {
            return r.clone();
        }
    }
    let rule = Arc::new(gauss_jacobi_symmetric(a, n).expect("tridiagonal eigenproblem"));
    let mut guard = RULES.write().unwrap();
    guard.get_or_insert_with(HashMap::new).insert(key, rule.clone());
    rule
}

/// `F_a(λ)`, returning NaN for `a <= 0`.
pub fn f_a_unchecked(a: f64, lambda: f64) -> f64 {
    if !(a > 0.0) || !lambda.is_finite() {
        return f64::NAN;
    }
    let rule = rule_for(a, lambda);
    let (x, w) = (&rule.0, &rule.1);
    let s: f64 = x.iter().zip(w).map(|(&xi, &wi)| wi * (lambda * xi).cos()).sum();
    s * f_a_at_zero(a) / weight_mass(a)
}

/// `F_a(λ)`; even, real, bandlimited to `[-1, 1]`.
pub fn f_a(a: f64, lambda: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(invalid(format!("F_a needs a > 0, got {a}")));
    }
    Ok(f_a_unchecked(a, lambda))
}

/// Upper end of `[0, V]` beyond which `2 F_a(0) |scale| v^{2a+2} e^{-β v²}` integrates below `tol`.
fn gaussian_cutoff(a: f64, beta: f64, scale: f64, tol: f64) -> f64 {
    let amp = 2.0 * f_a_at_zero(a) * scale;
    let mut v = ((2.0 * a + 2.0) / (2.0 * beta)).sqrt().max(1.0);
    loop {
        let g = amp * v.powf(2.0 * a + 2.0) * (-beta * v * v).exp();
        if g / (2.0 * beta * v) * 4.0 < tol {
            return v;
        }
        v *= 1.05;
    }
}

/// `∫_0^∞ F_a(√s ξ) s^{a+1/2} e^{-s/4} ds`, computed in `v = √s`.
pub fn subordination_integral(a: f64, xi: f64, quad_tol: f64) -> Result<f64> {
    if !(a > 0.0) || !(quad_tol > 0.0) {
        return Err(invalid("subordination needs a > 0 and quad_tol > 0"));
    }
    let beta = 0.25;
    let vmax = gaussian_cutoff(a, beta, 1.0, 0.01 * quad_tol);
    let panels = frequency_panels(0.0, vmax, 0.5, |_| xi.abs());
    let r = integrate(
        |v| Complex64::new(2.0 * f_a_unchecked(a, v * xi) * v.powf(2.0 * a + 2.0) * (-beta * v * v).exp(), 0.0),
        &panels,
        QuadOptions { abs_tol: 0.1 * quad_tol, rel_tol: 0.0, max_intervals: 200_000 },
    )?;
    Ok(r.value.re)
}

/// `max_ξ |∫ F_a(√s ξ) s^{a+1/2} e^{-s/4} ds - e^{-ξ²}|` over the grid.
pub fn subordination_check(a: f64, xi_grid: &[f64], quad_tol: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &xi in xi_grid {
        let v = subordination_integral(a, xi, quad_tol)?;
        worst = worst.max((v - (-xi * xi).exp()).abs());
    }
    Ok(worst)
}

/// Right side of the complex-time rewrite for one eigenvalue:
/// `∫_0^∞ F_a(√(sλ)) s^{a+1/2} ν^{-a-3/2} exp(-s/(4ν)) ds` with `ν = t(1 - iξ)`.
pub fn wave_rewrite_scalar(lambda: f64, t: f64, xi: f64, a: f64, quad_tol: f64) -> Result<Complex64> {
    if !(t > 0.0) || !(a > 0.0) {
        return Err(invalid("wave rewrite needs t > 0 and a > 0"));
    }
    let lam = lambda.max(0.0);
    let nu = Complex64::new(t, -t * xi);
    let pref = nu.powf(-(a + 1.5));
    let inv4nu = 1.0 / (4.0 * nu);
    let beta = inv4nu.re;
    let vmax = gaussian_cutoff(a, beta, pref.norm(), 0.01 * quad_tol);
    let sl = lam.sqrt();
    let phase_rate = inv4nu.im.abs();
    let panels = frequency_panels(0.0, vmax, vmax / 64.0, |v| sl + 2.0 * phase_rate * v);
    let r = integrate(
        |v| {
            let s = v * v;
            pref * (-inv4nu * s).exp() * (2.0 * f_a_unchecked(a, v * sl) * v.powf(2.0 * a + 2.0))
        },
        &panels,
        QuadOptions { abs_tol: 0.1 * quad_tol, rel_tol: 0.0, max_intervals: 400_000 },
    )?;
    Ok(r.value)
}

/// Max over the spectrum of `|rewrite(λ) - e^{iξtλ} e^{-tλ}|`.
pub fn wave_rewrite_check(op: &SelfAdjointOperator, t: f64, xi: f64, a: f64) -> Result<f64> {
    let mut values = op.eigenvalues()?;
    values.dedup_by(|p, q| (*p - *q).abs() <= 1e-12 * q.abs().max(1.0));
    let mut worst: f64 = 0.0;
    for lam in values {
        let rhs = wave_rewrite_scalar(lam, t, xi, a, 1e-9)?;
        let direct = Complex64::from_polar((-t * lam).exp(), xi * t * lam);
        worst = worst.max((rhs - direct).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials() {
        let a = 1.7;
        let (x, w) = gauss_jacobi_symmetric(a, 12).unwrap();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        // ∫ u² (1-u²)^a du = B(3/2, a+1)
        let exact = libm::tgamma(1.5) * libm::tgamma(a + 1.0) / libm::tgamma(a + 2.5);
        assert!((m2 - exact).abs() < 1e-14);
    }

    #[test]
    fn zero_value_normalisation() {
        for a in [0.3, 1.0, 2.0, 3.5] {
            let v = f_a(a, 0.0).unwrap();
            assert!((v - f_a_at_zero(a)).abs() <= 1e-14 * v);
        }
        assert!(f_a(0.0, 1.0).is_err());
    }
}
