//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex-valued integrands.
//!
//! Oscillatory integrands are handled by seeding the adaptive pass with panels whose
//! width is at most `π / (4 · local frequency)`.

use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 0.0,
            max_intervals: 50_000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).norm())
}

/// Integrates `f` over `[breaks[0], breaks.last()]`, starting from the given panels.
pub fn integrate<F: FnMut(f64) -> Complex64>(
    mut f: F,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if breaks.len() < 2 {
        return Err(Error::Quadrature("need at least one panel".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut evals = 0;
    for w in breaks.windows(2) {
        if !(w[1] > w[0]) {
            if w[1] == w[0] {
                continue;
            }
            return Err(Error::Quadrature("panel breakpoints must increase".into()));
        }
        let (v, e) = kronrod(&mut f, w[0], w[1]);
        evals += 15;
        total += v;
        err += e;
        heap.push(Piece { a: w[0], b: w[1], value: v, error: e });
    }
    loop {
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::Quadrature("integrand produced a non-finite value".into()));
        }
        let target = opts.abs_tol.max(opts.rel_tol * total.norm());
        if err <= target {
            return Ok(QuadResult { value: total, error: err, evaluations: evals });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} above tolerance {target:e} after {} intervals",
                heap.len()
            )));
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::Quadrature(format!(
                "interval [{}, {}] cannot be bisected further; error {err:e}",
                worst.a, worst.b
            )));
        }
        let (v1, e1) = kronrod(&mut f, worst.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, worst.b);
        evals += 30;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        // guard against drift of the running sums
        if err < 0.0 {
            err = heap.iter().map(|p| p.error).sum::<f64>() + e1 + e2;
        }
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
}

/// Real-valued convenience wrapper.
pub fn integrate_real<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], opts: QuadOptions) -> Result<(f64, f64)> {
    let r = integrate(|x| Complex64::new(f(x), 0.0), breaks, opts)?;
    Ok((r.value.re, r.error))
}

/// Breakpoints on `[a, b]` with panel width at most `π / (4 · freq(x))` and at most `max_width`.
pub fn frequency_panels(a: f64, b: f64, max_width: f64, freq: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![a];
    let mut x = a;
    while x < b {
        let w = freq(x).abs();
        let mut step = if w > 0.0 { std::f64::consts::PI / (4.0 * w) } else { max_width };
        step = step.min(max_width).max((b - a) * 1e-7);
        x = (x + step).min(b);
        if b - x < 1e-3 * step {
            x = b;
        }
        out.push(x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate_real(|x| x * x * x - 2.0 * x, &[0.0, 2.0], QuadOptions::default()).unwrap();
        assert!((v - 0.0).abs() < 1e-14);
    }

    #[test]
    fn oscillatory_integral() {
        // ∫_0^{50} cos(40 x) e^{-x} dx = (1 - e^{-50}(cos 2000 - 40 sin 2000)) / 1601
        let exact = (1.0 - (-50.0f64).exp() * ((2000.0f64).cos() - 40.0 * (2000.0f64).sin())) / 1601.0;
        let br = frequency_panels(0.0, 50.0, 1.0, |_| 40.0);
        let (v, _) = integrate_real(|x| (40.0 * x).cos() * (-x).exp(), &br, QuadOptions { abs_tol: 1e-13, ..Default::default() }).unwrap();
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn endpoint_singularity_adapts() {
        let (v, _) = integrate_real(|x| x.sqrt(), &[0.0, 1.0], QuadOptions { abs_tol: 1e-12, ..Default::default() }).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn reports_nonconvergence() {
        let r = integrate_real(|x| 1.0 / x, &[0.0, 1.0], QuadOptions { abs_tol: 1e-12, rel_tol: 0.0, max_intervals: 50 });
        assert!(r.is_err());
    }
}
