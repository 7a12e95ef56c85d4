//! Block diagonalisation under the coordinate reflections `c_i -> S_i - 1 - c_i` of a lattice.
//!
//! Each character `χ ∈ {±1}^d` of the reflection group gives an invariant subspace spanned
//! by signed orbit sums. The blocks are diagonalised densely, so lattices several times
//! larger than the dense budget still get an exact spectrum.

use std::collections::HashMap;

use faer::Mat;

use super::{symmetric_eigen, SelfAdjointOperator};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug)]
pub struct Sector {
    pub character: Vec<i8>,
    /// Orbit ids spanning the block, in block order.
    pub orbits: Vec<usize>,
    pub values: Vec<f64>,
    /// Column `i` holds the block eigenvector in the normalised orbit basis.
    pub vectors: Mat<f64>,
}

#[derive(Clone, Debug)]
pub struct SectorSpectrum {
    pub sectors: Vec<Sector>,
    /// Orbit id of every point.
    pub orbit_of: Vec<usize>,
    pub orbit_size: Vec<usize>,
    pub orbit_rep: Vec<usize>,
    /// Per point, the axes on which it differs from its orbit representative (bit mask).
    flips: Vec<u32>,
    /// Per orbit, the axes fixed by its stabiliser (bit mask).
    fixed: Vec<u32>,
    mu: Vec<f64>,
}

fn character_sign(chi: &[i8], mask: u32) -> f64 {
    let mut s = 1.0;
    for (i, &c) in chi.iter().enumerate() {
        if mask >> i & 1 == 1 && c < 0 {
            s = -s;
        }
    }
    s
}

impl SectorSpectrum {
    pub fn compute(op: &SelfAdjointOperator, block_budget: usize) -> Result<Self> {
        let space = op.space();
        let lat = space
            .lattice()
            .ok_or_else(|| invalid("sector decomposition needs a lattice space"))?
            .clone();
        let d = lat.shape.len();
        if d > 16 {
            return Err(invalid("too many lattice axes"));
        }
        let n = space.len();
        let mu = space.mu().to_vec();
        let reflect = |idx: usize, mask: u32| -> usize {
            let mut c = lat.coords(idx);
            for ax in 0..d {
                if mask >> ax & 1 == 1 {
                    c[ax] = lat.shape[ax] - 1 - c[ax];
                }
            }
            lat.index(&c)
        };

        // invariance of measure, diagonal and edges under each generator
        let mut edge_w: HashMap<(usize, usize), f64> = HashMap::with_capacity(space.edges().len());
        for e in space.edges() {
            edge_w.insert((e.a, e.b), e.conductance);
        }
        for ax in 0..d {
            let g = 1u32 << ax;
            for x in 0..n {
                let y = reflect(x, g);
                let dd = (op.diagonal()[x] - op.diagonal()[y]).abs();
                if mu[x] != mu[y] || dd > 1e-12 * op.diagonal()[x].abs().max(1.0) {
                    return Err(invalid(format!("operator is not symmetric under reflection of axis {ax}")));
                }
            }
            for e in space.edges() {
                let (a, b) = (reflect(e.a, g), reflect(e.b, g));
                match edge_w.get(&(a.min(b), a.max(b))) {
                    Some(&w) if (w - e.conductance).abs() <= 1e-14 * w => {}
                    _ => return Err(invalid(format!("edge set is not symmetric under reflection of axis {ax}"))),
                }
            }
        }

        let mut orbit_of = vec![usize::MAX; n];
        let mut orbit_rep = Vec::new();
        let mut orbit_size = Vec::new();
        let mut fixed = Vec::new();
        let mut flips = vec![0u32; n];
        for x in 0..n {
            if orbit_of[x] != usize::MAX {
                continue;
            }
            let id = orbit_rep.len();
            let c = lat.coords(x);
            let mut fix = 0u32;
            for ax in 0..d {
                if 2 * c[ax] + 1 == lat.shape[ax] {
                    fix |= 1 << ax;
                }
            }
            let mut size = 0;
            for mask in 0..(1u32 << d) {
                if mask & fix != 0 {
                    continue;
                }
                let y = reflect(x, mask);
                orbit_of[y] = id;
                flips[y] = mask;
                size += 1;
            }
            orbit_rep.push(x);
            orbit_size.push(size);
            fixed.push(fix);
        }

        let mut sectors = Vec::new();
        for chi_mask in 0..(1u32 << d) {
            let chi: Vec<i8> = (0..d).map(|ax| if chi_mask >> ax & 1 == 1 { -1 } else { 1 }).collect();
            let orbits: Vec<usize> = (0..orbit_rep.len()).filter(|&o| fixed[o] & chi_mask == 0).collect();
            if orbits.is_empty() {
                continue;
            }
            let k = orbits.len();
            if k > block_budget {
                return Err(Error::Budget { what: "sector eigensolver block", needed: k, budget: block_budget });
            }
            let mut pos = vec![usize::MAX; orbit_rep.len()];
            for (i, &o) in orbits.iter().enumerate() {
                pos[o] = i;
            }
            let mut s = Mat::<f64>::zeros(k, k);
            for (i, &o) in orbits.iter().enumerate() {
                let r = orbit_rep[o];
                s[(i, i)] += op.diagonal()[r];
                for (y, _) in space.neighbors(r) {
                    let oy = orbit_of[y];
                    if pos[oy] == usize::MAX {
                        continue;
                    }
                    let (a, b) = (r.min(y), r.max(y));
                    let w = edge_w[&(a, b)];
                    let sym = -w / (mu[r] * mu[y]).sqrt();
                    let scale = (orbit_size[o] as f64 / orbit_size[oy] as f64).sqrt();
                    s[(i, pos[oy])] += scale * character_sign(&chi, flips[y]) * sym;
                }
            }
            let (values, vectors) = symmetric_eigen(&s)?;
            sectors.push(Sector { character: chi, orbits, values, vectors });
        }
        Ok(Self { sectors, orbit_of, orbit_size, orbit_rep, flips, fixed, mu })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.sectors.iter().flat_map(|s| s.values.iter().copied()).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `Σ_i g(λ_i) u_i(x)²` for every point, assembled per orbit.
    pub fn diagonal_of(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut per_orbit = vec![0.0; self.orbit_rep.len()];
        for s in &self.sectors {
            let gv: Vec<f64> = s.values.iter().map(|&l| g(l)).collect();
            for (i, &o) in s.orbits.iter().enumerate() {
                let mut acc = 0.0;
                for (j, &gj) in gv.iter().enumerate() {
                    let w = s.vectors[(i, j)];
                    acc += gj * w * w;
                }
                per_orbit[o] += acc;
            }
        }
        (0..self.orbit_of.len())
            .map(|x| {
                let o = self.orbit_of[x];
                per_orbit[o] / (self.orbit_size[o] as f64 * self.mu[x])
            })
            .collect()
    }

    /// μ-normalised eigenvector of the smallest eigenvalue, in point coordinates.
    pub fn ground_state(&self) -> Vec<f64> {
        let (si, _) = self
            .sectors
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.values[0]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one sector");
        self.eigenvector(si, 0)
    }

    /// Eigenvector `j` of sector `si` in point coordinates (μ-normalised).
    pub fn eigenvector(&self, si: usize, j: usize) -> Vec<f64> {
        let s = &self.sectors[si];
        let mut coef = vec![f64::NAN; self.orbit_rep.len()];
        for (i, &o) in s.orbits.iter().enumerate() {
            coef[o] = s.vectors[(i, j)];
        }
        (0..self.orbit_of.len())
            .map(|x| {
                let o = self.orbit_of[x];
                if coef[o].is_nan() {
                    return 0.0;
                }
                character_sign(&s.character, self.flips[x]) * coef[o]
                    / ((self.orbit_size[o] as f64).sqrt() * self.mu[x].sqrt())
            })
            .collect()
    }

    /// Number of axes fixed by the stabiliser of orbit `o`.
    pub fn fixed_axes(&self, o: usize) -> u32 {
        self.fixed[o].count_ones()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::metric_space::{build_grid, Boundary};
    use crate::operators::{laplacian, schrodinger_unchecked, PotentialSpec};

    #[test]
    fn sectors_reproduce_dense_spectrum_and_diagonal() {
        for (dim, side, b, c) in [
            (2, 5, Boundary::Free, 0.3),
            (3, 5, Boundary::Absorbing, 0.3),
            (2, 6, Boundary::Absorbing, 0.0),
        ] {
            let s = Arc::new(build_grid(dim, side, 0.7, b).unwrap());
            let op = schrodinger_unchecked(s, PotentialSpec::new(c, 1.0).unwrap()).unwrap();
            let dense = op.spectral_decomposition().unwrap();
            let sec = SectorSpectrum::compute(&op, 6000).unwrap();
            let ev = sec.eigenvalues();
            for (a, b) in ev.iter().zip(&dense.values) {
                assert!((a - b).abs() < 1e-11, "{a} vs {b}");
            }
            let g = |l: f64| (-0.8 * l).exp();
            for (a, b) in sec.diagonal_of(g).iter().zip(dense.diagonal_of(g)) {
                assert!((a - b).abs() < 1e-11);
            }
            let gs = sec.ground_state();
            let lg = op.apply(&gs);
            for (a, b) in lg.iter().zip(&gs) {
                assert!((a - ev[0] * b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_off_centre_potential() {
        let s = Arc::new(build_grid(2, 6, 1.0, Boundary::Absorbing).unwrap());
        let op = schrodinger_unchecked(s, PotentialSpec::new(0.3, 0.5).unwrap()).unwrap();
        assert!(SectorSpectrum::compute(&op, 6000).is_err());
    }

    #[test]
    fn needs_lattice() {
        let p = build_grid(1, 3, 1.0, Boundary::Free).unwrap();
        let glued = crate::metric_space::connected_sum(&p, &p, &[2], &[0]).unwrap();
        let op = laplacian(Arc::new(glued));
        assert!(SectorSpectrum::compute(&op, 100).is_err());
    }
}
