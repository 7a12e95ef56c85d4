//! Non-negative self-adjoint operators on `L²(X, μ)` and their spectral decompositions.
//!
//! The coefficient table is kept sparse: off-diagonal entries come from the edges
//! (`A_xy = -w_xy / μ(x)`), the diagonal collects the stencil mass, the absorbing
//! exterior, the potential and an optional exploratory shift. Eigenvectors are
//! μ-orthonormal and come from the symmetrised matrix `D^{1/2} A D^{-1/2}`.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use faer::{Mat, Side};

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_power_law, ExponentFit};
use crate::metric_space::{radial_coordinates, MetricMeasureSpace};

pub mod sectors;

pub use sectors::SectorSpectrum;

/// Default cap on the size of a dense eigenproblem.
pub const DEFAULT_EIGEN_BUDGET: usize = 6000;

/// Coupling for the inverse-square potential `V(x) = -c / |x|²` outside `|x| <= cutoff`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialSpec {
    pub c: f64,
    pub cutoff: f64,
}

impl PotentialSpec {
    pub fn new(c: f64, cutoff: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(invalid(format!("coupling c must be finite and >= 0, got {c}")));
        }
        if !(cutoff > 0.0) {
            return Err(invalid(format!("cutoff must be positive, got {cutoff}")));
        }
        Ok(Self { c, cutoff })
    }

    /// Murata coupling on an `n`-dimensional model: requires `0 < c <= ((n-2)/2)²`.
    pub fn murata(n: usize, c: f64) -> Result<Self> {
        let limit = ((n as f64 - 2.0) / 2.0).powi(2);
        if n < 3 || !(c > 0.0) || c > limit {
            return Err(invalid(format!(
                "Murata coupling needs n >= 3 and 0 < c <= {limit} (got n = {n}, c = {c})"
            )));
        }
        Self::new(c, 1.0)
    }

    /// Index `α = (n-2)/2 - sqrt(((n-2)/2)² - c)` of the radial resonance.
    pub fn resonance_index(n: usize, c: f64) -> f64 {
        let h = (n as f64 - 2.0) / 2.0;
        h - (h * h - c).max(0.0).sqrt()
    }
}

/// Sign decomposition `V = V₊ - V₋`, stored per point.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    pub spec: PotentialSpec,
    pub values: Vec<f64>,
}

impl Potential {
    pub fn positive_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.max(0.0)).collect()
    }

    pub fn negative_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| (-v).max(0.0)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Laplacian,
    Schrodinger,
}

/// Full spectral decomposition; column `i` of `vectors` is `u_i`, μ-orthonormal.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl Eigensystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `Σ_i g(λ_i) u_i(x)²` for every `x`.
    pub fn diagonal_of(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        let n = self.vectors.nrows();
        let gv: Vec<f64> = self.values.iter().map(|&l| g(l)).collect();
        let mut out = vec![0.0; n];
        for (i, &gi) in gv.iter().enumerate() {
            if gi == 0.0 {
                continue;
            }
            let col = self.vectors.col(i);
            for (x, o) in out.iter_mut().enumerate() {
                let u = col[x];
                *o += gi * u * u;
            }
        }
        out
    }

    /// Writes the eigensystem in the versioned `SMLAB1` binary layout.
    pub fn write_cache(&self, path: &Path, space_hash: &str) -> Result<()> {
        let n = self.values.len();
        let mut buf = Vec::with_capacity(64 + 8 * n * (n + 1));
        buf.extend_from_slice(b"SMLAB1");
        buf.extend_from_slice(&1u32.to_le_bytes());
        let hash = space_hash.as_bytes();
        buf.extend_from_slice(&(hash.len() as u32).to_le_bytes());
        buf.extend_from_slice(hash);
        buf.extend_from_slice(&(n as u64).to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for j in 0..n {
            for i in 0..n {
                buf.extend_from_slice(&self.vectors[(i, j)].to_le_bytes());
            }
        }
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&buf)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Reads an `SMLAB1` file, refusing it if it was written for a different space.
    pub fn read_cache(path: &Path, space_hash: &str) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        let mut cur = 0usize;
        let mut take = |k: usize| -> Result<&[u8]> {
            if cur + k > buf.len() {
                return Err(Error::Cache("truncated eigensystem cache".into()));
            }
            cur += k;
            Ok(&buf[cur - k..cur])
        };
        if take(6)? != b"SMLAB1" {
            return Err(Error::Cache("missing SMLAB1 header".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != 1 {
            return Err(Error::Cache(format!("unsupported cache version {version}")));
        }
        let hl = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let hash = String::from_utf8_lossy(take(hl)?).into_owned();
        if hash != space_hash {
            return Err(Error::Cache(format!("cache is for space {hash}, expected {space_hash}")));
        }
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        let mut vectors = Mat::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                vectors[(i, j)] = f64::from_le_bytes(take(8)?.try_into().unwrap());
            }
        }
        if cur != buf.len() {
            return Err(Error::Cache("trailing bytes in eigensystem cache".into()));
        }
        Ok(Self { values, vectors })
    }
}

/// Symmetric dense eigendecomposition, eigenvalues ascending.
pub(crate) fn symmetric_eigen(s: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let n = s.nrows();
    let values: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok((values, evd.U().to_owned()))
}

pub struct SelfAdjointOperator {
    space: Arc<MetricMeasureSpace>,
    kind: OperatorKind,
    diag: Vec<f64>,
    potential: Option<Potential>,
    shift: f64,
    eigen_budget: usize,
    eigen: Mutex<Option<Arc<Eigensystem>>>,
    sectors: Mutex<Option<Arc<SectorSpectrum>>>,
}

impl std::fmt::Debug for SelfAdjointOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SelfAdjointOperator")
            .field("kind", &self.kind)
            .field("points", &self.space.len())
            .field("shift", &self.shift)
            .finish()
    }
}

impl SelfAdjointOperator {
    fn from_parts(space: Arc<MetricMeasureSpace>, kind: OperatorKind, potential: Option<Potential>, shift: f64) -> Self {
        let n = space.len();
        let mut diag: Vec<f64> = (0..n).map(|x| space.exterior()[x]).collect();
        for e in space.edges() {
            diag[e.a] += e.conductance;
            diag[e.b] += e.conductance;
        }
        for (x, d) in diag.iter_mut().enumerate() {
            *d /= space.mu()[x];
            if let Some(p) = &potential {
                *d += p.values[x];
            }
            *d += shift;
        }
        Self {
            space,
            kind,
            diag,
            potential,
            shift,
            eigen_budget: DEFAULT_EIGEN_BUDGET,
            eigen: Mutex::new(None),
            sectors: Mutex::new(None),
        }
    }

    pub fn space(&self) -> &Arc<MetricMeasureSpace> {
        &self.space
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn potential(&self) -> Option<&Potential> {
        self.potential.as_ref()
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn with_eigen_budget(mut self, budget: usize) -> Self {
        self.eigen_budget = budget;
        self
    }

    pub fn eigen_budget(&self) -> usize {
        self.eigen_budget
    }

    /// Copy of this operator plus `delta · I` (exploratory runs only).
    pub fn with_shift(&self, delta: f64) -> Self {
        Self::from_parts(self.space.clone(), self.kind, self.potential.clone(), self.shift + delta)
            .with_eigen_budget(self.eigen_budget)
    }

    /// Diagonal coefficients `A_xx`.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Entry `A_xy` of the coefficient table.
    pub fn coefficient(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return self.diag[x];
        }
        let (a, b) = (x.min(y), x.max(y));
        match self.space.edges().binary_search_by_key(&(a, b), |e| (e.a, e.b)) {
            Ok(k) => -self.space.edges()[k].conductance / self.space.mu()[x],
            Err(_) => 0.0,
        }
    }

    /// Dense coefficient table `A`.
    pub fn dense(&self) -> Mat<f64> {
        let n = self.len();
        let mu = self.space.mu();
        let mut a = Mat::zeros(n, n);
        for x in 0..n {
            a[(x, x)] = self.diag[x];
        }
        for e in self.space.edges() {
            a[(e.a, e.b)] = -e.conductance / mu[e.a];
            a[(e.b, e.a)] = -e.conductance / mu[e.b];
        }
        a
    }

    /// Dense symmetrised table `D^{1/2} A D^{-1/2}`.
    pub fn symmetric_dense(&self) -> Mat<f64> {
        let n = self.len();
        let mu = self.space.mu();
        let mut s = Mat::zeros(n, n);
        for x in 0..n {
            s[(x, x)] = self.diag[x];
        }
        for e in self.space.edges() {
            let v = -e.conductance / (mu[e.a] * mu[e.b]).sqrt();
            s[(e.a, e.b)] = v;
            s[(e.b, e.a)] = v;
        }
        s
    }

    /// `(Af)(x)` using the sparse structure.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mu = self.space.mu();
        let mut out: Vec<f64> = self.diag.iter().zip(f).map(|(d, v)| d * v).collect();
        for e in self.space.edges() {
            out[e.a] -= e.conductance / mu[e.a] * f[e.b];
            out[e.b] -= e.conductance / mu[e.b] * f[e.a];
        }
        out
    }

    /// Cached dense eigensystem (μ-orthonormal eigenvectors).
    pub fn spectral_decomposition(&self) -> Result<Arc<Eigensystem>> {
        let mut guard = self.eigen.lock().unwrap();
        if let Some(e) = guard.as_ref() {
            return Ok(e.clone());
        }
        let n = self.len();
        if n > self.eigen_budget {
            return Err(Error::Budget { what: "dense eigensolver", needed: n, budget: self.eigen_budget });
        }
        let (values, mut w) = symmetric_eigen(&self.symmetric_dense())?;
        let mu = self.space.mu();
        for j in 0..n {
            for x in 0..n {
                w[(x, j)] /= mu[x].sqrt();
            }
        }
        let es = Arc::new(Eigensystem { values, vectors: w });
        *guard = Some(es.clone());
        Ok(es)
    }

    /// Installs an eigensystem read from a cache file after checking its shape.
    pub fn install_eigensystem(&self, es: Eigensystem) -> Result<Arc<Eigensystem>> {
        if es.values.len() != self.len() || es.vectors.nrows() != self.len() {
            return Err(Error::Cache("cached eigensystem does not match operator size".into()));
        }
        let es = Arc::new(es);
        *self.eigen.lock().unwrap() = Some(es.clone());
        Ok(es)
    }

    /// Eigensystem split by lattice reflection symmetries (cached).
    pub fn sector_spectrum(&self) -> Result<Arc<SectorSpectrum>> {
        let mut guard = self.sectors.lock().unwrap();
        if let Some(s) = guard.as_ref() {
            return Ok(s.clone());
        }
        let s = Arc::new(SectorSpectrum::compute(self, self.eigen_budget)?);
        *guard = Some(s.clone());
        Ok(s)
    }

    /// All eigenvalues, ascending, through the dense path when it fits and sectors otherwise.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.len() <= self.eigen_budget {
            Ok(self.spectral_decomposition()?.values.clone())
        } else {
            Ok(self.sector_spectrum()?.eigenvalues())
        }
    }

    /// `Σ_i g(λ_i) u_i(x)²` for every `x`, dense or by sectors like [`Self::eigenvalues`].
    pub fn spectral_diagonal(&self, g: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        if self.len() <= self.eigen_budget {
            Ok(self.spectral_decomposition()?.diagonal_of(g))
        } else {
            Ok(self.sector_spectrum()?.diagonal_of(g))
        }
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// `1e-10 · max(λ_N, 1e-300)`.
    pub fn tol_psd(&self) -> Result<f64> {
        let v = self.eigenvalues()?;
        Ok(1e-10 * v.last().copied().unwrap_or(0.0).abs().max(1e-300))
    }

    /// μ-self-adjointness defect `max |μ(x)A_xy - μ(y)A_yx|` relative to `max |μ(x)A_xy|`.
    pub fn self_adjointness_defect(&self) -> f64 {
        let mu = self.space.mu();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for e in self.space.edges() {
            let l = mu[e.a] * self.coefficient(e.a, e.b);
            let r = mu[e.b] * self.coefficient(e.b, e.a);
            worst = worst.max((l - r).abs());
            scale = scale.max(l.abs());
        }
        for x in 0..self.len() {
            scale = scale.max((mu[x] * self.diag[x]).abs());
        }
        if scale == 0.0 { 0.0 } else { worst / scale }
    }

    /// Same space with the potential term `extra` added to the diagonal.
    fn with_extra_diagonal(&self, extra: &[f64]) -> Self {
        let mut op = Self::from_parts(self.space.clone(), self.kind, self.potential.clone(), self.shift)
            .with_eigen_budget(self.eigen_budget);
        for (d, e) in op.diag.iter_mut().zip(extra) {
            *d += e;
        }
        op
    }
}

/// Graph Laplacian `(Lf)(x) = μ(x)^{-1} Σ_y w_xy (f(x) - f(y))`, plus exterior killing.
pub fn laplacian(space: Arc<MetricMeasureSpace>) -> SelfAdjointOperator {
    SelfAdjointOperator::from_parts(space, OperatorKind::Laplacian, None, 0.0)
}

/// `L = Δ + V` with `V(x) = -c/|x|²` for `|x| > cutoff`, without the non-negativity check.
pub fn schrodinger_unchecked(space: Arc<MetricMeasureSpace>, pot: PotentialSpec) -> Result<SelfAdjointOperator> {
    let radial = radial_coordinates(&space)?;
    let values = radial
        .iter()
        .map(|&r| if r > pot.cutoff { -pot.c / (r * r) } else { 0.0 })
        .collect();
    Ok(SelfAdjointOperator::from_parts(
        space,
        OperatorKind::Schrodinger,
        Some(Potential { spec: pot, values }),
        0.0,
    ))
}

/// Schrödinger operator; fails if the discretisation is not non-negative.
pub fn schrodinger(space: Arc<MetricMeasureSpace>, pot: PotentialSpec) -> Result<SelfAdjointOperator> {
    schrodinger_with_budget(space, pot, DEFAULT_EIGEN_BUDGET)
}

pub fn schrodinger_with_budget(
    space: Arc<MetricMeasureSpace>,
    pot: PotentialSpec,
    eigen_budget: usize,
) -> Result<SelfAdjointOperator> {
    let op = schrodinger_unchecked(space, pot)?.with_eigen_budget(eigen_budget);
    let min = op.min_eigenvalue()?;
    let tol = op.tol_psd()?;
    if min < -tol {
        return Err(Error::NotNonNegative { min_eig: min, tol });
    }
    Ok(op)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubcriticalCheck {
    pub min_eig: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Minimum eigenvalue of `L - ε V₋`; passes iff it is at least `-tol_psd`.
pub fn check_subcritical(op: &SelfAdjointOperator, eps: f64) -> Result<SubcriticalCheck> {
    let pot = op
        .potential()
        .ok_or_else(|| invalid("check_subcritical needs a Schrödinger operator with a potential"))?;
    if !(eps > 0.0 && eps < 1.0) && eps != 1.0 {
        return Err(invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    let extra: Vec<f64> = pot.negative_part().iter().map(|v| -eps * v).collect();
    let modified = op.with_extra_diagonal(&extra);
    let min_eig = modified.min_eigenvalue()?;
    let tol = modified.tol_psd()?;
    Ok(SubcriticalCheck { min_eig, tol, pass: min_eig >= -tol })
}

#[derive(Clone, Debug)]
pub struct ResonanceProxy {
    /// Ground state, normalised positive with maximum 1.
    pub eta: Vec<f64>,
    /// Log–log fit of `η` against `1 + |x|` over the window.
    pub fit: ExponentFit,
    /// `-fit.slope`, the decay index of the proxy.
    pub alpha_fit: f64,
}

/// Ground state of `op` as a resonance proxy, fitted over `|x| ∈ window`.
pub fn resonance_proxy(op: &SelfAdjointOperator, window: (f64, f64)) -> Result<ResonanceProxy> {
    let space = op.space().clone();
    let mut eta = if op.len() <= op.eigen_budget() {
        let es = op.spectral_decomposition()?;
        es.vectors.col(0).iter().copied().collect::<Vec<f64>>()
    } else {
        op.sector_spectrum()?.ground_state()
    };
    let sum: f64 = eta.iter().sum();
    if sum < 0.0 {
        eta.iter_mut().for_each(|v| *v = -*v);
    }
    let peak = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = 1e-12 * peak;
    if let Some(x) = eta.iter().position(|&v| v < -floor) {
        return Err(Error::Numerical(format!(
            "ground state changes sign at point {x}; proxy is a truncation artefact"
        )));
    }
    eta.iter_mut().for_each(|v| *v /= peak);
    let radial = radial_coordinates(&space)?;
    let samples: Vec<(f64, f64)> = radial
        .iter()
        .zip(&eta)
        .filter(|(&r, &v)| r >= window.0 && r <= window.1 && v > 0.0)
        .map(|(&r, &v)| (1.0 + r, v))
        .collect();
    let fit = fit_power_law(&samples, (1.0 + window.0, 1.0 + window.1))?;
    Ok(ResonanceProxy { alpha_fit: -fit.slope, eta, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_space::{build_grid, Boundary, Edge};

    fn path3() -> Arc<MetricMeasureSpace> {
        Arc::new(build_grid(1, 3, 1.0, Boundary::Free).unwrap())
    }

    #[test]
    fn two_point_spectrum() {
        let s = MetricMeasureSpace::new(vec![1.0, 1.0], vec![Edge { a: 0, b: 1, conductance: 1.0, length: 1.0 }], vec![0]).unwrap();
        let l = laplacian(Arc::new(s));
        let v = l.eigenvalues().unwrap();
        assert!(v[0].abs() < 1e-14 && (v[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn path3_spectrum_and_row_sums() {
        let l = laplacian(path3());
        let v = l.eigenvalues().unwrap();
        for (a, b) in v.iter().zip([0.0, 1.0, 3.0]) {
            assert!((a - b).abs() < 1e-13);
        }
        let a = l.dense();
        for x in 0..3 {
            let s: f64 = (0..3).map(|y| a[(x, y)]).sum();
            assert!(s.abs() < 1e-15);
        }
    }

    #[test]
    fn mu_orthonormal_eigenvectors() {
        let s = MetricMeasureSpace::new(
            vec![1.0, 2.0, 0.5],
            vec![Edge { a: 0, b: 1, conductance: 1.5, length: 1.0 }, Edge { a: 1, b: 2, conductance: 0.3, length: 2.0 }],
            vec![0],
        )
        .unwrap();
        let l = laplacian(Arc::new(s));
        assert!(l.self_adjointness_defect() < 1e-15);
        let es = l.spectral_decomposition().unwrap();
        let mu = l.space().mu();
        for i in 0..3 {
            for j in 0..3 {
                let ip: f64 = (0..3).map(|x| es.vectors[(x, i)] * es.vectors[(x, j)] * mu[x]).sum();
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigen_budget_guard() {
        let s = Arc::new(build_grid(1, 10, 1.0, Boundary::Free).unwrap());
        let l = laplacian(s).with_eigen_budget(5);
        assert!(matches!(l.spectral_decomposition(), Err(Error::Budget { .. })));
    }

    #[test]
    fn schrodinger_zero_coupling_is_laplacian() {
        let s = Arc::new(build_grid(2, 7, 1.0, Boundary::Absorbing).unwrap());
        let l = laplacian(s.clone());
        let h = schrodinger(s, PotentialSpec::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(l.dense(), h.dense());
    }

    #[test]
    fn check_subcritical_needs_potential() {
        let l = laplacian(path3());
        assert!(check_subcritical(&l, 0.1).is_err());
    }

    #[test]
    fn murata_range() {
        assert!(PotentialSpec::murata(3, 0.16).is_ok());
        assert!(PotentialSpec::murata(3, 0.5).is_err());
        assert!((PotentialSpec::resonance_index(3, 0.16) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn cache_round_trip() {
        let l = laplacian(path3());
        let es = l.spectral_decomposition().unwrap();
        let dir = std::env::temp_dir().join(format!("smlab-cache-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("eig.bin");
        let hash = l.space().content_hash();
        es.write_cache(&p, &hash).unwrap();
        let back = Eigensystem::read_cache(&p, &hash).unwrap();
        assert_eq!(back.values, es.values);
        assert_eq!(back.vectors, es.vectors);
        assert!(matches!(Eigensystem::read_cache(&p, "other"), Err(Error::Cache(_))));
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..6], b"SMLAB1");
        std::fs::remove_dir_all(&dir).ok();
    }
}
