//! Symbolic spectral functions.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::fa::f_a_unchecked;
use crate::error::{invalid, Result};

type ComplexFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// How a function given on `[0, ∞)` is continued to the real line for Sobolev norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extension {
    /// `F(|λ|)`.
    Even,
    /// Same formula continued to `λ < 0`, multiplied by a smooth cutoff that is 1 on
    /// `[-1/4, 0]` and 0 on `(-∞, -3/4]`.
    SmoothCutoff,
}

#[derive(Clone)]
pub enum MultiplierFunction {
    Zero,
    One,
    /// `e^{-λ}`
    Gaussian,
    /// `e^{iξλ} e^{-λ}`
    OscGaussian { xi: f64 },
    /// `(1+λ)^{-σ}`
    ResolventPower { sigma: f64 },
    /// `(1-λ)_+^δ`
    BochnerRiesz { delta: f64, extension: Extension },
    /// Bandlimited kernel `F_a`.
    Fa { a: f64 },
    /// Smooth bump: 1 on `|λ-c| <= w/2`, 0 on `|λ-c| >= w`.
    Bump { center: f64, width: f64 },
    /// `(1 - ψ(λ)) / (ρ - λ)` with `ψ` the bump of half-width `width` around `ρ`.
    GapResolvent { rho: f64, width: f64 },
    /// `F φ₀` (level 0) or `F φ(2^{-ℓ} ·)` (level ℓ >= 1).
    DyadicPiece { base: Box<MultiplierFunction>, level: u32 },
    /// Linear interpolation of samples; zero outside the table.
    Tabulated { lambda: Arc<Vec<f64>>, value: Arc<Vec<f64>> },
    Custom {
        name: String,
        f: ComplexFn,
        support: Option<(f64, f64)>,
        bandlimit: Option<f64>,
        real: bool,
    },
}

impl fmt::Debug for MultiplierFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

/// `exp(-1/x)` for `x > 0`, else 0.
fn e_inv(x: f64) -> f64 {
    if x > 0.0 { (-1.0 / x).exp() } else { 0.0 }
}

/// Smooth monotone step: 0 for `x <= 0`, 1 for `x >= 1`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = e_inv(x);
        a / (a + e_inv(1.0 - x))
    }
}

/// Smooth bump equal to 1 on `|λ-c| <= w/2` and supported in `|λ-c| < w`.
pub fn bump(lambda: f64, center: f64, width: f64) -> f64 {
    smooth_step((width - (lambda - center).abs()) / (0.5 * width))
}

/// `ψ(λ) = exp(-1/((λ-1/4)(1-λ)))` on `(1/4, 1)`, zero elsewhere.
pub fn dyadic_psi(lambda: f64) -> f64 {
    if lambda > 0.25 && lambda < 1.0 {
        (-1.0 / ((lambda - 0.25) * (1.0 - lambda))).exp()
    } else {
        0.0
    }
}

/// `φ(λ) = ψ(|λ|) / Σ_{ℓ∈ℤ} ψ(2^{-ℓ}|λ|)`.
pub fn dyadic_phi(lambda: f64) -> f64 {
    let l = lambda.abs();
    let p = dyadic_psi(l);
    if p == 0.0 {
        return 0.0;
    }
    let k = l.log2().floor() as i32;
    let mut den = 0.0;
    for ell in (k - 1)..=(k + 3) {
        den += dyadic_psi(l * 2f64.powi(-ell));
    }
    p / den
}

/// `φ₀(λ) = 1 - Σ_{ℓ>=1} φ(2^{-ℓ}λ)`.
pub fn dyadic_phi0(lambda: f64) -> f64 {
    let l = lambda.abs();
    if l <= 0.5 {
        return 1.0;
    }
    let mut s = 0.0;
    let mut ell = 1;
    while l * 2f64.powi(-ell) > 0.25 {
        s += dyadic_phi(l * 2f64.powi(-ell));
        ell += 1;
    }
    1.0 - s
}

impl MultiplierFunction {
    pub fn bochner_riesz(delta: f64) -> Self {
        Self::BochnerRiesz { delta, extension: Extension::SmoothCutoff }
    }

    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
        support: Option<(f64, f64)>,
        bandlimit: Option<f64>,
    ) -> Self {
        Self::Custom { name: name.into(), f: Arc::new(f), support, bandlimit, real: false }
    }

    pub fn custom_real(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: Option<(f64, f64)>,
        bandlimit: Option<f64>,
    ) -> Self {
        Self::Custom {
            name: name.into(),
            f: Arc::new(move |x| Complex64::new(f(x), 0.0)),
            support,
            bandlimit,
            real: true,
        }
    }

    /// Tabulated function from sorted samples.
    pub fn tabulated(lambda: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        if lambda.len() != value.len() || lambda.len() < 2 {
            return Err(invalid("tabulated multiplier needs >= 2 samples of equal length"));
        }
        if lambda.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("tabulated abscissae must increase strictly"));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(invalid("tabulated values must be finite"));
        }
        Ok(Self::Tabulated { lambda: Arc::new(lambda), value: Arc::new(value) })
    }

    /// Tabulates `f` on `[lo, hi]`, doubling the grid until linear interpolation at
    /// cell midpoints is within `tol` of `f`.
    pub fn tabulate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<Self> {
        let mut n = 64usize;
        while n <= 1 << 22 {
            let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
            let worst = xs
                .windows(2)
                .zip(ys.windows(2))
                .map(|(x, y)| (f(0.5 * (x[0] + x[1])) - 0.5 * (y[0] + y[1])).abs())
                .fold(0.0, f64::max);
            if worst <= tol {
                return Self::tabulated(xs, ys);
            }
            n *= 2;
        }
        Err(crate::error::Error::Refinement(format!("tabulation on [{lo}, {hi}] did not reach {tol:e}")))
    }

    /// Value at `λ` (the spectral side, `λ >= 0`; tiny negative rounding is tolerated).
    pub fn eval(&self, lambda: f64) -> Complex64 {
        let re = |v: f64| Complex64::new(v, 0.0);
        match self {
            Self::Zero => re(0.0),
            Self::One => re(1.0),
            Self::Gaussian => re((-lambda).exp()),
            Self::OscGaussian { xi } => Complex64::from_polar((-lambda).exp(), xi * lambda),
            Self::ResolventPower { sigma } => re((1.0 + lambda).powf(-sigma)),
            Self::BochnerRiesz { delta, .. } => re(if lambda < 1.0 { (1.0 - lambda).powf(*delta) } else { 0.0 }),
            Self::Fa { a } => re(f_a_unchecked(*a, lambda)),
            Self::Bump { center, width } => re(bump(lambda, *center, *width)),
            Self::GapResolvent { rho, width } => {
                let p = bump(lambda, *rho, *width);
                if p == 1.0 { re(0.0) } else { re((1.0 - p) / (rho - lambda)) }
            }
            Self::DyadicPiece { base, level } => {
                let w = if *level == 0 { dyadic_phi0(lambda) } else { dyadic_phi(lambda * 2f64.powi(-(*level as i32))) };
                if w == 0.0 { re(0.0) } else { base.eval(lambda) * w }
            }
            Self::Tabulated { lambda: xs, value: ys } => {
                if lambda < xs[0] || lambda > *xs.last().unwrap() {
                    return re(0.0);
                }
                let k = xs.partition_point(|&x| x <= lambda).clamp(1, xs.len() - 1);
                let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
                re(y0 + (y1 - y0) * (lambda - x0) / (x1 - x0))
            }
            Self::Custom { f, .. } => f(lambda),
        }
    }

    /// Whether values are real on the whole spectral side.
    pub fn is_real(&self) -> bool {
        match self {
            Self::OscGaussian { xi } => *xi == 0.0,
            Self::DyadicPiece { base, .. } => base.is_real(),
            Self::Custom { real, .. } => *real,
            _ => true,
        }
    }

    /// Real-line continuation used for Fourier transforms and Sobolev norms.
    pub fn eval_line(&self, lambda: f64) -> Result<f64> {
        if !self.is_real() {
            return Err(invalid(format!("{} is complex-valued; no real-line extension", self.describe())));
        }
        Ok(match self {
            Self::BochnerRiesz { delta, extension: Extension::SmoothCutoff } if lambda < 0.0 => {
                (1.0 - lambda).powf(*delta) * smooth_step((lambda + 0.75) / 0.5)
            }
            Self::Fa { a } => f_a_unchecked(*a, lambda),
            Self::Custom { f, .. } => f(lambda).re,
            _ => self.eval(lambda.abs()).re,
        })
    }

    /// Interval outside of which the real-line continuation vanishes, if known.
    pub fn declared_support(&self) -> Option<(f64, f64)> {
        match self {
            Self::Zero => Some((0.0, 0.0)),
            Self::BochnerRiesz { extension: Extension::SmoothCutoff, .. } => Some((-0.75, 1.0)),
            Self::BochnerRiesz { extension: Extension::Even, .. } => Some((-1.0, 1.0)),
            Self::Bump { center, width } => {
                let hi = center.abs() + width;
                Some((-hi, hi))
            }
            Self::DyadicPiece { level, base } => {
                let hi = if *level == 0 { 2.0 } else { 2f64.powi(*level as i32) };
                match base.declared_support() {
                    Some((_, bh)) => {
                        let h = hi.min(bh.abs().max(0.0));
                        Some((-h, h))
                    }
                    None => Some((-hi, hi)),
                }
            }
            Self::Tabulated { lambda, .. } => {
                let hi = lambda.last().unwrap().abs().max(lambda[0].abs());
                Some((-hi, hi))
            }
            Self::Custom { support, .. } => *support,
            _ => None,
        }
    }

    /// `B` such that the Fourier transform of the even continuation lives in `[-B, B]`.
    pub fn bandlimit(&self) -> Option<f64> {
        match self {
            Self::Fa { .. } => Some(1.0),
            Self::Zero => Some(0.0),
            Self::Custom { bandlimit, .. } => *bandlimit,
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Zero => "zero",
            Self::One => "one",
            Self::Gaussian => "gaussian",
            Self::OscGaussian { .. } => "osc_gaussian",
            Self::ResolventPower { .. } => "resolvent_power",
            Self::BochnerRiesz { .. } => "bochner_riesz",
            Self::Fa { .. } => "f_a",
            Self::Bump { .. } => "bump",
            Self::GapResolvent { .. } => "gap_resolvent",
            Self::DyadicPiece { .. } => "dyadic_piece",
            Self::Tabulated { .. } => "tabulated",
            Self::Custom { name, .. } => name,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::OscGaussian { xi } => format!("osc_gaussian(xi={xi})"),
            Self::ResolventPower { sigma } => format!("resolvent_power(sigma={sigma})"),
            Self::BochnerRiesz { delta, extension } => format!("bochner_riesz(delta={delta}, {extension:?})"),
            Self::Fa { a } => format!("f_a(a={a})"),
            Self::Bump { center, width } => format!("bump(center={center}, width={width})"),
            Self::GapResolvent { rho, width } => format!("gap_resolvent(rho={rho}, width={width})"),
            Self::DyadicPiece { base, level } => format!("dyadic_piece({}, level={level})", base.describe()),
            other => other.name().to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_shape() {
        assert_eq!(bump(2.0, 2.0, 1.0), 1.0);
        assert_eq!(bump(2.45, 2.0, 1.0), 1.0);
        assert_eq!(bump(3.0, 2.0, 1.0), 0.0);
        assert!(bump(2.7, 2.0, 1.0) > 0.0 && bump(2.7, 2.0, 1.0) < 1.0);
    }

    #[test]
    fn support_is_respected() {
        let f = MultiplierFunction::bochner_riesz(2.0);
        for l in [1.0, 1.5, 7.0] {
            assert_eq!(f.eval(l).re, 0.0);
        }
        for l in [-0.8, -2.0] {
            assert_eq!(f.eval_line(l).unwrap(), 0.0);
        }
        assert_eq!(f.eval_line(-0.2).unwrap(), 1.2f64.powi(2));
    }

    #[test]
    fn tabulation_meets_tolerance() {
        let t = MultiplierFunction::tabulate(|x| (-x).exp(), 0.0, 4.0, 1e-8).unwrap();
        for i in 0..1000 {
            let x = 4.0 * i as f64 / 999.0 * 0.9999;
            assert!((t.eval(x).re - (-x).exp()).abs() <= 1.1e-8);
        }
        assert_eq!(t.eval(5.0).re, 0.0);
        assert!(MultiplierFunction::tabulated(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn gap_resolvent_vanishes_near_rho() {
        let g = MultiplierFunction::GapResolvent { rho: 2.0, width: 1.0 };
        assert_eq!(g.eval(2.0).re, 0.0);
        assert!((g.eval(0.0).re - 0.5).abs() < 1e-15);
    }
}
