//! Measure-relative kernels and their operator norms.
//!
//! A kernel acts by `(Tf)(x) = Σ_y K(x,y) f(y) μ(y)`.

use std::sync::Arc;

use faer::{c64, Mat};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr_free::standard_normal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metric_space::{volumes_at, MetricMeasureSpace};
use crate::operators::SelfAdjointOperator;

mod rand_distr_free {
    use rand::Rng;

    /// Box–Muller standard normal draw.
    pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

#[derive(Clone, Debug)]
pub struct OperatorKernel {
    space: Arc<MetricMeasureSpace>,
    re: Mat<f64>,
    im: Option<Mat<f64>>,
}

impl OperatorKernel {
    pub fn new(space: Arc<MetricMeasureSpace>, re: Mat<f64>, im: Option<Mat<f64>>) -> Result<Self> {
        let n = space.len();
        if re.nrows() != n || re.ncols() != n || im.as_ref().is_some_and(|m| m.nrows() != n || m.ncols() != n) {
            return Err(invalid("kernel table does not match the space size"));
        }
        Ok(Self { space, re, im })
    }

    /// Kernel of the identity, `δ_xy / μ(y)`.
    pub fn identity(space: Arc<MetricMeasureSpace>) -> Self {
        let n = space.len();
        let re = Mat::from_fn(n, n, |x, y| if x == y { 1.0 / space.mu()[y] } else { 0.0 });
        Self { space, re, im: None }
    }

    /// Kernel `A_xy / μ(y)` of the coefficient table of `op`.
    pub fn from_operator(op: &SelfAdjointOperator) -> Self {
        let space = op.space().clone();
        let mut re = op.dense();
        for y in 0..space.len() {
            let m = space.mu()[y];
            for x in 0..space.len() {
                re[(x, y)] /= m;
            }
        }
        Self { space, re, im: None }
    }

    pub fn space(&self) -> &Arc<MetricMeasureSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.re.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.re.nrows() == 0
    }

    pub fn re(&self) -> &Mat<f64> {
        &self.re
    }

    pub fn im(&self) -> Option<&Mat<f64>> {
        self.im.as_ref()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        Complex64::new(self.re[(x, y)], self.im.as_ref().map_or(0.0, |m| m[(x, y)]))
    }

    /// `|K(x, y)|`.
    #[inline]
    pub fn abs(&self, x: usize, y: usize) -> f64 {
        match &self.im {
            None => self.re[(x, y)].abs(),
            Some(m) => self.re[(x, y)].hypot(m[(x, y)]),
        }
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.len();
        let mut m: f64 = 0.0;
        for y in 0..n {
            for x in 0..n {
                m = m.max(self.abs(x, y));
            }
        }
        m
    }

    /// Entrywise maximum of `|K - L|`.
    pub fn max_deviation(&self, other: &OperatorKernel) -> f64 {
        let n = self.len();
        let mut m: f64 = 0.0;
        for y in 0..n {
            for x in 0..n {
                m = m.max((self.get(x, y) - other.get(x, y)).norm());
            }
        }
        m
    }

    /// Kernel of the μ-adjoint, `conj K(y, x)`.
    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space.clone(),
            re: self.re.transpose().to_owned(),
            im: self.im.as_ref().map(|m| -m.transpose().to_owned()),
        }
    }

    /// Kernel of `T ∘ S`: `Σ_z K_T(x,z) K_S(z,y) μ(z)`.
    pub fn compose(&self, other: &OperatorKernel) -> Self {
        let n = self.len();
        let mu = self.space.mu();
        let scale = |m: &Mat<f64>| Mat::from_fn(n, n, |z, y| m[(z, y)] * mu[z]);
        let ore = scale(&other.re);
        let oim = other.im.as_ref().map(scale);
        let re_rr = &self.re * &ore;
        let (re, im) = match (&self.im, &oim) {
            (None, None) => (re_rr, None),
            (Some(si), None) => (re_rr, Some(si * &ore)),
            (None, Some(oi)) => (re_rr, Some(&self.re * oi)),
            (Some(si), Some(oi)) => (re_rr - si * oi, Some(&self.re * oi + si * &ore)),
        };
        Self { space: self.space.clone(), re, im }
    }

    /// `(Tf)(x) = Σ_y K(x,y) f(y) μ(y)`.
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        let mu = self.space.mu();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for y in 0..n {
            let fy = f[y] * mu[y];
            if fy == Complex64::new(0.0, 0.0) {
                continue;
            }
            let cr = self.re.col(y);
            match &self.im {
                None => {
                    for x in 0..n {
                        out[x] += fy * cr[x];
                    }
                }
                Some(im) => {
                    let ci = im.col(y);
                    for x in 0..n {
                        out[x] += fy * Complex64::new(cr[x], ci[x]);
                    }
                }
            }
        }
        out
    }

    /// `Σ_y |K(x,y)|² μ(y)` for each `x`.
    pub fn row_l2_squared(&self) -> Vec<f64> {
        let n = self.len();
        let mu = self.space.mu();
        let mut out = vec![0.0; n];
        for y in 0..n {
            for (x, o) in out.iter_mut().enumerate() {
                let a = self.abs(x, y);
                *o += a * a * mu[y];
            }
        }
        out
    }
}

/// `sup_y Σ_x |K(x,y)| μ(x)`.
pub fn norm_1to1(t: &OperatorKernel) -> f64 {
    let n = t.len();
    let mu = t.space.mu();
    (0..n)
        .map(|y| (0..n).map(|x| t.abs(x, y) * mu[x]).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `sup_x Σ_y |K(x,y)| μ(y)`.
pub fn norm_inf_to_inf(t: &OperatorKernel) -> f64 {
    let n = t.len();
    let mu = t.space.mu();
    let mut rows = vec![0.0; n];
    for y in 0..n {
        for (x, r) in rows.iter_mut().enumerate() {
            *r += t.abs(x, y) * mu[y];
        }
    }
    rows.into_iter().fold(0.0, f64::max)
}

/// Spectral norm on `L²(μ)`: largest singular value of `D^{1/2} K D^{1/2}`.
pub fn norm_2to2(t: &OperatorKernel) -> Result<f64> {
    let n = t.len();
    let s: Vec<f64> = t.space.mu().iter().map(|m| m.sqrt()).collect();
    let sv = match &t.im {
        None => Mat::from_fn(n, n, |x, y| s[x] * t.re[(x, y)] * s[y])
            .singular_values()
            .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?,
        Some(im) => Mat::from_fn(n, n, |x, y| c64::new(s[x] * t.re[(x, y)] * s[y], s[x] * im[(x, y)] * s[y]))
            .singular_values()
            .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?,
    };
    Ok(sv.into_iter().fold(0.0, f64::max))
}

/// `sup_x (Σ_y |K(x,y)|² μ(y))^{1/2}`.
pub fn norm_2toinf(t: &OperatorKernel) -> f64 {
    t.row_l2_squared().into_iter().fold(0.0, f64::max).sqrt()
}

/// `sup_x V(x,t)^{1/2} (Σ_y |K(x,y)|² μ(y))^{1/2}`.
pub fn weighted_2toinf(t: &OperatorKernel, radius: f64) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(invalid(format!("weighted 2→∞ norm needs t >= 0, got {radius}")));
    }
    let v = volumes_at(&t.space, &[radius]).pop().unwrap();
    Ok(weighted_sup(&v, &t.row_l2_squared()))
}

/// `sup_x (v(x) · r(x))^{1/2}`.
pub fn weighted_sup(volumes: &[f64], row_sq: &[f64]) -> f64 {
    volumes
        .iter()
        .zip(row_sq)
        .map(|(v, r)| v * r)
        .fold(0.0, f64::max)
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormInterval {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

/// Test-vector set for lower bounds on intermediate `p`.
#[derive(Clone, Copy, Debug)]
pub struct PNormOptions {
    pub seed: u64,
    /// Gaussian complex random starts.
    pub random_vectors: usize,
    /// Point masses are tried at up to this many points (evenly strided).
    pub point_masses: usize,
    /// Nonlinear power iterations applied to the best starts.
    pub power_iterations: usize,
}

impl Default for PNormOptions {
    fn default() -> Self {
        Self { seed: 0x5eed, random_vectors: 16, point_masses: 256, power_iterations: 30 }
    }
}

fn lp_norm(f: &[Complex64], mu: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    f.iter().zip(mu).map(|(v, m)| v.norm().powf(p) * m).sum::<f64>().powf(1.0 / p)
}

/// `|v|^{p-1} v/|v|`, the extremal dual direction of `v` in `L^p`.
fn dual_direction(v: &[Complex64], p: f64) -> Vec<Complex64> {
    v.iter()
        .map(|z| {
            let r = z.norm();
            if r == 0.0 { Complex64::new(0.0, 0.0) } else { z / r * r.powf(p - 1.0) }
        })
        .collect()
}

/// `‖T‖_{p→p}`: exact for `p ∈ {1, 2, ∞}`, otherwise a Riesz–Thorin interval.
pub fn norm_ptop(t: &OperatorKernel, p: f64) -> Result<NormInterval> {
    norm_ptop_with(t, p, PNormOptions::default())
}

pub fn norm_ptop_with(t: &OperatorKernel, p: f64, opts: PNormOptions) -> Result<NormInterval> {
    if !(p >= 1.0) {
        return Err(invalid(format!("p must be >= 1, got {p}")));
    }
    if p == 1.0 {
        let v = norm_1to1(t);
        return Ok(NormInterval { lower: v, upper: v, exact: true });
    }
    if p.is_infinite() {
        let v = norm_inf_to_inf(t);
        return Ok(NormInterval { lower: v, upper: v, exact: true });
    }
    let n2 = norm_2to2(t)?;
    if p == 2.0 {
        return Ok(NormInterval { lower: n2, upper: n2, exact: true });
    }
    let upper = if p < 2.0 {
        let theta = 2.0 * (1.0 - 1.0 / p);
        norm_1to1(t).powf(1.0 - theta) * n2.powf(theta)
    } else {
        let theta = 1.0 - 2.0 / p;
        n2.powf(1.0 - theta) * norm_inf_to_inf(t).powf(theta)
    };
    let lower = lower_bound(t, p, opts).min(upper);
    Ok(NormInterval { lower, upper, exact: false })
}

fn lower_bound(t: &OperatorKernel, p: f64, opts: PNormOptions) -> f64 {
    let n = t.len();
    let mu = t.space.mu();
    let q = p / (p - 1.0);
    let ratio = |f: &[Complex64]| -> f64 {
        let d = lp_norm(f, mu, p);
        if d == 0.0 { 0.0 } else { lp_norm(&t.apply(f), mu, p) / d }
    };
    let mut starts: Vec<(f64, Vec<Complex64>)> = Vec::new();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    starts.push((0.0, vec![one; n]));
    let stride = (n / opts.point_masses.max(1)).max(1);
    for y in (0..n).step_by(stride) {
        let mut f = vec![zero; n];
        f[y] = one;
        starts.push((0.0, f));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_vectors {
        let f: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng)))
            .collect();
        starts.push((0.0, f));
    }
    for s in starts.iter_mut() {
        s.0 = ratio(&s.1);
    }
    starts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = starts.first().map_or(0.0, |s| s.0);
    let adj = t.adjoint();
    for (_, start) in starts.into_iter().take(4) {
        let mut x = start;
        for _ in 0..opts.power_iterations {
            let y = t.apply(&x);
            let g = dual_direction(&y, p);
            let z = adj.apply(&g);
            let nx = dual_direction(&z, q);
            if lp_norm(&nx, mu, p) == 0.0 {
                break;
            }
            x = nx;
            best = best.max(ratio(&x));
        }
    }
    best
}

/// Two closed balls `B(c1, r1)` and `B(c2, r2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallPair {
    pub c1: usize,
    pub r1: f64,
    pub c2: usize,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgPair {
    pub pair: BallPair,
    /// Distance between the balls in the original metric.
    pub distance: f64,
    /// Distance after dividing by the propagation speed.
    pub scaled_distance: f64,
    pub norm: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgResult {
    pub worst_ratio: f64,
    pub pairs: Vec<DgPair>,
}

pub fn ball(space: &MetricMeasureSpace, c: usize, r: f64) -> Vec<usize> {
    space
        .distance_row(c)
        .iter()
        .enumerate()
        .filter(|(_, &d)| d <= r)
        .map(|(i, _)| i)
        .collect()
}

/// `‖1_{B₂} e^{-tL} 1_{B₁}‖_{2→2} / e^{-r²/4t}` for each pair, `r` measured in the metric
/// divided by `speed`.
pub fn davies_gaffney_pairs(op: &SelfAdjointOperator, t: f64, pairs: &[BallPair], speed: f64) -> Result<DgResult> {
    if !(t > 0.0) || !(speed > 0.0) {
        return Err(invalid("Davies–Gaffney check needs t > 0 and a positive speed"));
    }
    let space = op.space().clone();
    let es = op.spectral_decomposition()?;
    let coeffs: Vec<f64> = es.values.iter().map(|&l| (-t * l).exp()).collect();
    let mut out = Vec::with_capacity(pairs.len());
    let mut worst: f64 = 0.0;
    for &pair in pairs {
        if pair.c1 >= space.len() || pair.c2 >= space.len() {
            return Err(invalid("ball centre outside the space"));
        }
        let b1 = ball(&space, pair.c1, pair.r1);
        let b2 = ball(&space, pair.c2, pair.r2);
        let mut r = f64::INFINITY;
        for &x in &b1 {
            let row = space.distance_row(x);
            for &y in &b2 {
                r = r.min(row[y]);
            }
        }
        if !(r > 0.0) {
            return Err(invalid(format!("balls around {} and {} overlap or touch (r = {r})", pair.c1, pair.c2)));
        }
        let block = crate::calculus::spectral_block(&es, &coeffs, &b2, &b1);
        let mu = space.mu();
        let m = Mat::from_fn(b2.len(), b1.len(), |i, j| mu[b2[i]].sqrt() * block[(i, j)] * mu[b1[j]].sqrt());
        let norm = m
            .singular_values()
            .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?
            .into_iter()
            .fold(0.0, f64::max);
        let rs = r / speed;
        let ratio = norm / (-rs * rs / (4.0 * t)).exp();
        worst = worst.max(ratio);
        out.push(DgPair { pair, distance: r, scaled_distance: rs, norm, ratio });
    }
    Ok(DgResult { worst_ratio: worst, pairs: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_space::{build_grid, Boundary};

    #[test]
    fn identity_norms() {
        let s = Arc::new(build_grid(1, 4, 1.0, Boundary::Free).unwrap());
        let id = OperatorKernel::identity(s);
        assert_eq!(norm_1to1(&id), 1.0);
        assert_eq!(norm_2toinf(&id), 1.0);
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let r = norm_ptop(&id, p).unwrap();
            assert!((r.lower - 1.0).abs() < 1e-12 && (r.upper - 1.0).abs() < 1e-12, "{p}: {r:?}");
        }
        assert!(norm_ptop(&id, 0.5).is_err());
    }

    #[test]
    fn weighted_norm_reduces_at_zero_radius() {
        let s = Arc::new(build_grid(1, 5, 1.0, Boundary::Free).unwrap());
        let id = OperatorKernel::identity(s);
        assert_eq!(weighted_2toinf(&id, 0.0).unwrap(), norm_2toinf(&id));
    }
}
