//! Dyadic decomposition of multipliers and the Hörmander-type symbol check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::multiplier::{dyadic_phi, MultiplierFunction};
use crate::error::{invalid, Error, Result};

/// `[F φ₀, F φ(2^{-1}·), …, F φ(2^{-ℓ_max}·)]`; exact on `[0, 2^{ℓ_max - 1}]`.
pub fn dyadic_partition(f: &MultiplierFunction, ell_max: u32) -> Result<Vec<MultiplierFunction>> {
    if ell_max < 1 {
        return Err(invalid("dyadic partition needs ell_max >= 1"));
    }
    Ok((0..=ell_max)
        .map(|level| MultiplierFunction::DyadicPiece { base: Box::new(f.clone()), level })
        .collect())
}

/// `Σ_{ℓ∈ℤ} φ(2^{-ℓ}λ)` summed over every level that can be nonzero.
pub fn full_dyadic_sum(lambda: f64) -> f64 {
    let l = lambda.abs();
    if l == 0.0 {
        return 0.0;
    }
    let k = l.log2().floor() as i32;
    ((k - 2)..=(k + 4)).map(|ell| dyadic_phi(l * 2f64.powi(-ell))).sum()
}

/// Fornberg weights for the `m`-th derivative on integer offsets `-p..=p`.
pub fn central_weights(m: usize, p: usize) -> Vec<f64> {
    let xs: Vec<f64> = (-(p as i64)..=(p as i64)).map(|k| k as f64).collect();
    let n = xs.len();
    // c[j][k]: weight of node j for derivative k
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i];
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// Relative difference step for order `m`: `1e-3` for `m <= 1`, `ε^{1/(m+4)}` beyond.
pub fn derivative_step(m: usize) -> f64 {
    if m <= 1 { 1e-3 } else { f64::EPSILON.powf(1.0 / (m as f64 + 4.0)) }
}

/// Fourth-order central estimate of `F^{(m)}(λ)` with step `derivative_step(m)·(1+λ)`.
pub fn derivative(f: &MultiplierFunction, m: usize, lambda: f64) -> Result<Complex64> {
    if m == 0 {
        return Ok(f.eval(lambda));
    }
    let h = derivative_step(m) * (1.0 + lambda.abs());
    if h <= 16.0 * f64::EPSILON * lambda.abs().max(1.0) {
        return Err(Error::Numerical(format!("difference step underflows at lambda = {lambda}")));
    }
    let p = m.div_ceil(2) + 1;
    let w = central_weights(m, p);
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, wk) in w.iter().enumerate() {
        if *wk != 0.0 {
            acc += f.eval(lambda + (k as f64 - p as f64) * h) * *wk;
        }
    }
    Ok(acc / h.powi(m as i32))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HormanderRow {
    pub m: usize,
    pub low_sup: f64,
    /// `sup λ^{m+ε}|F^{(m)}|` on each dyadic block `[2^k, 2^{k+1}]`.
    pub block_sup: Vec<f64>,
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HormanderReport {
    pub pass: bool,
    pub constant: f64,
    pub max_order: usize,
    pub rows: Vec<HormanderRow>,
}

/// Number of dyadic blocks sampled above `λ = 1`.
pub const HORMANDER_BLOCKS: usize = 13;

/// Checks `sup_{[0,1)} |F^{(m)}|` and `sup_{λ>=1} λ^{m+ε} |F^{(m)}|` for
/// `m = 0..=⌊2σ+2κ+1⌋+1`.
///
/// Both suprema are sampled; the second is declared bounded when its largest value on
/// the last two dyadic blocks is at most twice its largest value on the first half of
/// the blocks. A polynomially growing weight fails this over six octaves.
pub fn hormander_check(f: &MultiplierFunction, sigma: f64, kappa: f64, eps: f64) -> Result<HormanderReport> {
    if !(sigma >= 0.0 && kappa >= 0.0 && eps > 0.0) {
        return Err(invalid("hormander_check needs sigma, kappa >= 0 and eps > 0"));
    }
    let max_order = (2.0 * sigma + 2.0 * kappa + 1.0).floor() as usize + 1;
    let mut rows = Vec::new();
    let mut constant: f64 = 0.0;
    let mut pass = true;
    for m in 0..=max_order {
        let p = m.div_ceil(2) + 1;
        let start = if m == 0 { 0.0 } else { p as f64 * derivative_step(m) };
        let mut low_sup: f64 = 0.0;
        for i in 0..400 {
            let l = start + (1.0 - start) * i as f64 / 400.0;
            low_sup = low_sup.max(derivative(f, m, l)?.norm());
        }
        let mut block_sup = Vec::with_capacity(HORMANDER_BLOCKS);
        for k in 0..HORMANDER_BLOCKS {
            let mut s: f64 = 0.0;
            for i in 0..=64 {
                let l = 2f64.powf(k as f64 + i as f64 / 64.0);
                s = s.max(l.powf(m as f64 + eps) * derivative(f, m, l)?.norm());
            }
            block_sup.push(s);
        }
        let head = block_sup[..=HORMANDER_BLOCKS / 2].iter().copied().fold(0.0, f64::max);
        let tail = block_sup[HORMANDER_BLOCKS - 2..].iter().copied().fold(0.0, f64::max);
        let finite = low_sup.is_finite() && block_sup.iter().all(|v| v.is_finite());
        let bounded = finite && tail <= 2.0 * head + 1e-300;
        pass &= bounded;
        constant = constant.max(low_sup).max(block_sup.iter().copied().fold(0.0, f64::max));
        rows.push(HormanderRow { m, low_sup, block_sup, bounded });
    }
    Ok(HormanderReport { pass, constant, max_order, rows })
}
