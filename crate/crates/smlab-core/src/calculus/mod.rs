//! Functional calculus `F(L) = Σ_i F(λ_i) u_i u_iᵀ` and the scalar identities around it.

pub mod dyadic;
pub mod fa;
pub mod locality;
pub mod multiplier;
pub mod resolvent;
pub mod sobolev;

use faer::Mat;

pub use dyadic::{dyadic_partition, hormander_check, HormanderReport, HormanderRow};
pub use fa::{f_a, f_a_at_zero, subordination_check, subordination_integral, wave_rewrite_check, wave_rewrite_scalar};
pub use locality::{cfl_speed, locality_check, propagation_speed, LocalityResult, SpeedResult};
pub use multiplier::{Extension, MultiplierFunction};
pub use resolvent::{
    complex_resolvent_check, complex_resolvent_scalar, complex_time_resolvent, resolvent_power,
    resolvent_power_quadrature,
};
pub use sobolev::{sobolev_norm, sobolev_norm_detailed, SobolevResult};

use crate::error::{invalid, Error, Result};
use crate::norms::OperatorKernel;
use crate::operators::{Eigensystem, SelfAdjointOperator};

/// `Σ_i c_i u_i(x) u_i(y)` restricted to `rows × cols`.
pub fn spectral_block(es: &Eigensystem, coeffs: &[f64], rows: &[usize], cols: &[usize]) -> Mat<f64> {
    let active: Vec<usize> = (0..coeffs.len()).filter(|&i| coeffs[i] != 0.0).collect();
    let u = &es.vectors;
    let left = Mat::from_fn(rows.len(), active.len(), |r, k| coeffs[active[k]] * u[(rows[r], active[k])]);
    let right = Mat::from_fn(active.len(), cols.len(), |k, c| u[(cols[c], active[k])]);
    left * right
}

/// Full `N × N` table of `Σ_i c_i u_i(x) u_i(y)`.
pub fn spectral_kernel(es: &Eigensystem, coeffs: &[f64]) -> Mat<f64> {
    let n = es.vectors.nrows();
    let active: Vec<usize> = (0..coeffs.len()).filter(|&i| coeffs[i] != 0.0).collect();
    if active.is_empty() {
        return Mat::zeros(n, n);
    }
    let u = &es.vectors;
    let left = Mat::from_fn(n, active.len(), |x, k| coeffs[active[k]] * u[(x, active[k])]);
    let right = Mat::from_fn(active.len(), n, |k, y| u[(y, active[k])]);
    let mut k = left * right;
    for y in 0..n {
        for x in 0..y {
            let m = 0.5 * (k[(x, y)] + k[(y, x)]);
            k[(x, y)] = m;
            k[(y, x)] = m;
        }
    }
    k
}

/// `Σ_y |K(x,y)|² μ(y) = Σ_i |c_i|² u_i(x)²` without forming the kernel.
pub fn spectral_row_l2_squared(es: &Eigensystem, coeffs_abs: &[f64]) -> Vec<f64> {
    let n = es.vectors.nrows();
    let mut out = vec![0.0; n];
    for (i, &c) in coeffs_abs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let col = es.vectors.col(i);
        let c2 = c * c;
        for (x, o) in out.iter_mut().enumerate() {
            *o += c2 * col[x] * col[x];
        }
    }
    out
}

/// `F(tλ_i)` for every eigenvalue, failing on non-finite values.
pub fn multiplier_values(es: &Eigensystem, f: &MultiplierFunction, t: f64) -> Result<Vec<num_complex::Complex64>> {
    es.values
        .iter()
        .map(|&l| {
            let v = f.eval(t * l);
            if v.is_finite() { Ok(v) } else { Err(Error::Undefined(t * l)) }
        })
        .collect()
}

/// Kernel of `F(tL)`.
pub fn apply_multiplier(op: &SelfAdjointOperator, f: &MultiplierFunction, t: f64) -> Result<OperatorKernel> {
    if !(t > 0.0) {
        return Err(invalid(format!("multiplier scale must be > 0, got {t}")));
    }
    let es = op.spectral_decomposition()?;
    let vals = multiplier_values(&es, f, t)?;
    let re: Vec<f64> = vals.iter().map(|v| v.re).collect();
    let im = if vals.iter().any(|v| v.im != 0.0) {
        let c: Vec<f64> = vals.iter().map(|v| v.im).collect();
        Some(spectral_kernel(&es, &c))
    } else {
        None
    };
    OperatorKernel::new(op.space().clone(), spectral_kernel(&es, &re), im)
}

/// Kernel of `e^{-tL}`.
pub fn heat_kernel(op: &SelfAdjointOperator, t: f64) -> Result<OperatorKernel> {
    apply_multiplier(op, &MultiplierFunction::Gaussian, t)
}
