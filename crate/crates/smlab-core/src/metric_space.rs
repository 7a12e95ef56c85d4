//! Finite metric-measure spaces: lattices, tori, connected sums and the two-ended model.
//!
//! Points carry a positive measure `mu`; edges carry a conductance and a length.
//! Distances are shortest paths over edge lengths, computed per source row on demand
//! and cached. Absorbing boundaries are stored as a per-point conductance to an
//! implicit exterior, which the Laplacian places on its diagonal.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_power_law, ExponentFit};

/// Default cap on the number of points a builder may create.
pub const DEFAULT_POINT_BUDGET: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Absorbing,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub conductance: f64,
    pub length: f64,
}

/// Row-major lattice layout (last axis fastest), kept so reflections can be recognised.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub shape: Vec<usize>,
    pub periodic: Vec<bool>,
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.shape.len()];
        for ax in (0..self.shape.len()).rev() {
            c[ax] = idx % self.shape[ax];
            idx /= self.shape[ax];
        }
        c
    }

    pub fn index(&self, c: &[usize]) -> usize {
        c.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&ci, &s)| acc * s + ci)
    }
}

#[derive(Clone, Copy, Debug)]
struct Arc {
    to: usize,
    length: f64,
}

pub struct MetricMeasureSpace {
    mu: Vec<f64>,
    edges: Vec<Edge>,
    exterior: Vec<f64>,
    compact: Vec<usize>,
    lattice: Option<Lattice>,
    offsets: Vec<usize>,
    arcs: Vec<Arc>,
    unit_lengths: Option<f64>,
    rows: Vec<OnceLock<Box<[f64]>>>,
}

impl std::fmt::Debug for MetricMeasureSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricMeasureSpace")
            .field("points", &self.len())
            .field("edges", &self.edges.len())
            .field("compact", &self.compact.len())
            .finish()
    }
}

impl Clone for MetricMeasureSpace {
    fn clone(&self) -> Self {
        Self::assemble(
            self.mu.clone(),
            self.edges.clone(),
            self.exterior.clone(),
            self.compact.clone(),
            self.lattice.clone(),
        )
        .expect("clone of a valid space")
    }
}

impl MetricMeasureSpace {
    /// Builds a space from raw parts, validating positivity, symmetry and connectivity.
    ///
    /// Edges are undirected; parallel edges between the same pair are rejected.
    pub fn new(mu: Vec<f64>, edges: Vec<Edge>, compact: Vec<usize>) -> Result<Self> {
        let n = mu.len();
        Self::assemble(mu, edges, vec![0.0; n], compact, None)
    }

    /// Like [`new`](Self::new) with per-point conductance to an absorbing exterior.
    pub fn with_exterior(
        mu: Vec<f64>,
        edges: Vec<Edge>,
        exterior: Vec<f64>,
        compact: Vec<usize>,
    ) -> Result<Self> {
        Self::assemble(mu, edges, exterior, compact, None)
    }

    fn assemble(
        mu: Vec<f64>,
        mut edges: Vec<Edge>,
        exterior: Vec<f64>,
        compact: Vec<usize>,
        lattice: Option<Lattice>,
    ) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(invalid("space must have at least one point"));
        }
        if let Some(x) = mu.iter().position(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(invalid(format!("mu({x}) = {} is not positive", mu[x])));
        }
        if exterior.len() != n || exterior.iter().any(|&k| !(k >= 0.0) || !k.is_finite()) {
            return Err(invalid("exterior conductances must be finite and non-negative"));
        }
        let mut seen = std::collections::HashSet::new();
        for e in edges.iter_mut() {
            if e.a >= n || e.b >= n {
                return Err(invalid(format!("edge ({}, {}) references a missing point", e.a, e.b)));
            }
            if e.a == e.b {
                return Err(invalid(format!("self-loop at point {}", e.a)));
            }
            if !(e.conductance > 0.0 && e.conductance.is_finite()) {
                return Err(invalid(format!("edge ({}, {}) has nonpositive conductance", e.a, e.b)));
            }
            if !(e.length > 0.0 && e.length.is_finite()) {
                return Err(invalid(format!("edge ({}, {}) has nonpositive length", e.a, e.b)));
            }
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
            if !seen.insert((e.a, e.b)) {
                return Err(invalid(format!("duplicate edge ({}, {})", e.a, e.b)));
            }
        }
        edges.sort_by_key(|e| (e.a, e.b));
        if let Some(&z) = compact.iter().find(|&&z| z >= n) {
            return Err(invalid(format!("compact set references missing point {z}")));
        }
        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e.a] += 1;
            degree[e.b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for x in 0..n {
            offsets[x + 1] = offsets[x] + degree[x];
        }
        let mut fill = offsets.clone();
        let mut arcs = vec![Arc { to: 0, length: 0.0 }; offsets[n]];
        for e in &edges {
            arcs[fill[e.a]] = Arc { to: e.b, length: e.length };
            fill[e.a] += 1;
            arcs[fill[e.b]] = Arc { to: e.a, length: e.length };
            fill[e.b] += 1;
        }
        let unit_lengths = match edges.first() {
            Some(first) if edges.iter().all(|e| e.length == first.length) => Some(first.length),
            None => Some(1.0),
            _ => None,
        };
        let mut compact = compact;
        compact.sort_unstable();
        compact.dedup();
        let space = Self {
            rows: (0..n).map(|_| OnceLock::new()).collect(),
            mu,
            edges,
            exterior,
            compact,
            lattice,
            offsets,
            arcs,
            unit_lengths,
        };
        if !space.is_connected() {
            return Err(invalid("space is not connected"));
        }
        Ok(space)
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Conductance from each point to the absorbing exterior (zero for free points).
    pub fn exterior(&self) -> &[f64] {
        &self.exterior
    }

    pub fn compact_set(&self) -> &[usize] {
        &self.compact
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    pub fn total_mass(&self) -> f64 {
        self.mu.iter().sum()
    }

    /// Neighbours of `x` as `(y, length)`.
    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.arcs[self.offsets[x]..self.offsets[x + 1]]
            .iter()
            .map(|a| (a.to, a.length))
    }

    pub fn degree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    /// Replaces the compact set used by radial coordinates.
    pub fn set_compact_set(&mut self, compact: Vec<usize>) -> Result<()> {
        if let Some(&z) = compact.iter().find(|&&z| z >= self.len()) {
            return Err(invalid(format!("compact set references missing point {z}")));
        }
        self.compact = compact;
        self.compact.sort_unstable();
        self.compact.dedup();
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for (y, _) in self.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count == n
    }

    /// Shortest-path distances from `x`, computed without touching the cache.
    pub fn compute_distance_row(&self, x: usize) -> Vec<f64> {
        let n = self.len();
        if let Some(h) = self.unit_lengths {
            let mut hops = vec![usize::MAX; n];
            hops[x] = 0;
            let mut queue = VecDeque::from([x]);
            while let Some(u) = queue.pop_front() {
                for (v, _) in self.neighbors(u) {
                    if hops[v] == usize::MAX {
                        hops[v] = hops[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            return hops.into_iter().map(|k| k as f64 * h).collect();
        }
        let mut dist = vec![f64::INFINITY; n];
        dist[x] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem(0.0, x));
        while let Some(HeapItem(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for (v, len) in self.neighbors(u) {
                let nd = d + len;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(HeapItem(nd, v));
                }
            }
        }
        dist
    }

    /// Cached shortest-path distances from `x`.
    pub fn distance_row(&self, x: usize) -> &[f64] {
        self.rows[x].get_or_init(|| self.compute_distance_row(x).into_boxed_slice())
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.distance_row(x)[y]
    }

    /// Largest pairwise distance; streams rows so memory stays linear.
    pub fn diameter(&self) -> f64 {
        (0..self.len())
            .into_par_iter()
            .map(|x| {
                match self.rows[x].get() {
                    Some(r) => r.iter().copied().fold(0.0, f64::max),
                    None => self.compute_distance_row(x).into_iter().fold(0.0, f64::max),
                }
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Length of the longest edge.
    pub fn max_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    /// SHA-256 over measure, edges, exterior conductances and compact set.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"smlab-space-v1");
        h.update((self.len() as u64).to_le_bytes());
        for m in &self.mu {
            h.update(m.to_le_bytes());
        }
        for e in &self.edges {
            h.update((e.a as u64).to_le_bytes());
            h.update((e.b as u64).to_le_bytes());
            h.update(e.conductance.to_le_bytes());
            h.update(e.length.to_le_bytes());
        }
        for k in &self.exterior {
            h.update(k.to_le_bytes());
        }
        for z in &self.compact {
            h.update((*z as u64).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_budget(what: &'static str, needed: Option<usize>, budget: usize) -> Result<usize> {
    match needed {
        Some(n) if n <= budget => Ok(n),
        Some(n) => Err(Error::Budget { what, needed: n, budget }),
        None => Err(Error::Budget { what, needed: usize::MAX, budget }),
    }
}

/// Rectangular lattice block with per-face absorbing flags `[axis][0 = low, 1 = high]`.
fn lattice_block(
    shape: &[usize],
    periodic: &[bool],
    absorbing: &[[bool; 2]],
    h: f64,
    weight_dim: usize,
    budget: usize,
) -> Result<MetricMeasureSpace> {
    let needed = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
    let n = check_budget("lattice points", needed, budget)?;
    let lattice = Lattice {
        shape: shape.to_vec(),
        periodic: periodic.to_vec(),
    };
    let w = h.powi(weight_dim as i32 - 2);
    let mu = vec![h.powi(weight_dim as i32); n];
    let mut edges = Vec::new();
    let mut exterior = vec![0.0; n];
    for idx in 0..n {
        let c = lattice.coords(idx);
        for ax in 0..shape.len() {
            let s = shape[ax];
            if c[ax] + 1 < s {
                let mut d = c.clone();
                d[ax] += 1;
                edges.push(Edge { a: idx, b: lattice.index(&d), conductance: w, length: h });
            } else if periodic[ax] && s > 2 {
                let mut d = c.clone();
                d[ax] = 0;
                edges.push(Edge { a: idx, b: lattice.index(&d), conductance: w, length: h });
            }
            if !periodic[ax] {
                if c[ax] == 0 && absorbing[ax][0] {
                    exterior[idx] += w;
                }
                if c[ax] + 1 == s && absorbing[ax][1] {
                    exterior[idx] += w;
                }
            }
        }
    }
    let centre: Vec<usize> = shape.iter().map(|&s| (s - 1) / 2).collect();
    let k = lattice.index(&centre);
    MetricMeasureSpace::assemble(mu, edges, exterior, vec![k], Some(lattice))
}

/// Cubic lattice `side^dim` with spacing `h`, conductance `h^(dim-2)` and measure `h^dim`.
pub fn build_grid(dim: usize, side: usize, h: f64, boundary: Boundary) -> Result<MetricMeasureSpace> {
    build_grid_with_budget(dim, side, h, boundary, DEFAULT_POINT_BUDGET)
}

pub fn build_grid_with_budget(
    dim: usize,
    side: usize,
    h: f64,
    boundary: Boundary,
    budget: usize,
) -> Result<MetricMeasureSpace> {
    if dim < 1 || side < 2 || !(h > 0.0) {
        return Err(invalid(format!("grid needs dim >= 1, side >= 2, h > 0 (got {dim}, {side}, {h})")));
    }
    let abs = boundary == Boundary::Absorbing;
    lattice_block(&vec![side; dim], &vec![false; dim], &vec![[abs, abs]; dim], h, dim, budget)
}

/// Periodic lattice `side^dim` with the grid weight conventions.
pub fn build_torus(dim: usize, side: usize, h: f64) -> Result<MetricMeasureSpace> {
    build_torus_with_budget(dim, side, h, DEFAULT_POINT_BUDGET)
}

pub fn build_torus_with_budget(dim: usize, side: usize, h: f64, budget: usize) -> Result<MetricMeasureSpace> {
    if dim < 1 || side < 3 || !(h > 0.0) {
        return Err(invalid(format!("torus needs dim >= 1, side >= 3, h > 0 (got {dim}, {side}, {h})")));
    }
    lattice_block(&vec![side; dim], &vec![true; dim], &vec![[false, false]; dim], h, dim, budget)
}

/// Glues `b` onto `a`, identifying `face_a[i]` with `face_b[i]`.
///
/// Identified points get the average measure and average exterior conductance. Edges
/// present on both sides of the face are merged with averaged conductance and the
/// shorter length. The compact set of the result is the identified face.
pub fn connected_sum(
    a: &MetricMeasureSpace,
    b: &MetricMeasureSpace,
    face_a: &[usize],
    face_b: &[usize],
) -> Result<MetricMeasureSpace> {
    if face_a.len() != face_b.len() || face_a.is_empty() {
        return Err(invalid(format!(
            "faces must be nonempty and of equal size (got {} and {})",
            face_a.len(),
            face_b.len()
        )));
    }
    if let Some(&x) = face_a.iter().find(|&&x| x >= a.len()) {
        return Err(invalid(format!("face point {x} not in first space")));
    }
    if let Some(&x) = face_b.iter().find(|&&x| x >= b.len()) {
        return Err(invalid(format!("face point {x} not in second space")));
    }
    let mut map_b = vec![usize::MAX; b.len()];
    for (&fa, &fb) in face_a.iter().zip(face_b) {
        if map_b[fb] != usize::MAX {
            return Err(invalid(format!("face point {fb} listed twice")));
        }
        map_b[fb] = fa;
    }
    {
        let mut s = face_a.to_vec();
        s.sort_unstable();
        s.dedup();
        if s.len() != face_a.len() {
            return Err(invalid("first face lists a point twice"));
        }
    }
    let mut mu = a.mu.clone();
    let mut exterior = a.exterior.clone();
    for y in 0..b.len() {
        if map_b[y] == usize::MAX {
            map_b[y] = mu.len();
            mu.push(b.mu[y]);
            exterior.push(b.exterior[y]);
        } else {
            let x = map_b[y];
            mu[x] = 0.5 * (a.mu[x] + b.mu[y]);
            exterior[x] = 0.5 * (a.exterior[x] + b.exterior[y]);
        }
    }
    let mut merged: BTreeMap<(usize, usize), (f64, f64, u8)> = BTreeMap::new();
    for e in &a.edges {
        merged.insert((e.a.min(e.b), e.a.max(e.b)), (e.conductance, e.length, 1));
    }
    for e in &b.edges {
        let (x, y) = (map_b[e.a], map_b[e.b]);
        let key = (x.min(y), x.max(y));
        merged
            .entry(key)
            .and_modify(|v| {
                v.0 = 0.5 * (v.0 + e.conductance);
                v.1 = v.1.min(e.length);
                v.2 += 1;
            })
            .or_insert((e.conductance, e.length, 1));
    }
    let edges = merged
        .into_iter()
        .map(|((x, y), (w, l, _))| Edge { a: x, b: y, conductance: w, length: l })
        .collect();
    MetricMeasureSpace::assemble(mu, edges, exterior, face_a.to_vec(), None)
}

/// Two-ended model: an `n`-dimensional half-lattice times an `(m-n)`-dimensional torus,
/// glued along a face patch to an `m`-dimensional lattice block.
///
/// The small end (`side_small^n × torus_side^(m-n)`) has a free boundary. The big end
/// (`side_big^m`) is absorbing on every exterior face except the glued one, which keeps
/// its corners from acting as a second, faster-decaying reservoir. The glued patch is the
/// block `min(side_small, side_big)^(n-1) × min(torus_side, side_big)^(m-n)` of the small
/// end's `x_0 = 0` face, matched coordinatewise with the big end's `x_0 = 0` face.
pub fn build_ends_model(
    n: usize,
    m: usize,
    side_small: usize,
    side_big: usize,
    torus_side: usize,
    h: f64,
) -> Result<MetricMeasureSpace> {
    build_ends_model_with_budget(n, m, side_small, side_big, torus_side, h, DEFAULT_POINT_BUDGET)
}

pub fn build_ends_model_with_budget(
    n: usize,
    m: usize,
    side_small: usize,
    side_big: usize,
    torus_side: usize,
    h: f64,
    budget: usize,
) -> Result<MetricMeasureSpace> {
    if n <= 2 {
        return Err(invalid(format!("ends model needs n > 2, got n = {n}")));
    }
    if n > m {
        return Err(invalid(format!("ends model needs n <= m, got n = {n}, m = {m}")));
    }
    if side_small < 2 || side_big < 2 || (m > n && torus_side < 3) || !(h > 0.0) {
        return Err(invalid("ends model sides must be >= 2 (torus side >= 3) and h > 0"));
    }
    let mut shape_s = vec![side_small; n];
    shape_s.extend(std::iter::repeat(torus_side).take(m - n));
    let mut periodic_s = vec![false; n];
    periodic_s.extend(std::iter::repeat(true).take(m - n));
    let small = lattice_block(&shape_s, &periodic_s, &vec![[false, false]; m], h, m, budget)?;
    let mut absorbing_b = vec![[true, true]; m];
    absorbing_b[0][0] = false;
    let big = lattice_block(&vec![side_big; m], &vec![false; m], &absorbing_b, h, m, budget)?;

    let ls = small.lattice().unwrap().clone();
    let lb = big.lattice().unwrap().clone();
    let patch: Vec<usize> = (1..m).map(|ax| shape_s[ax].min(side_big)).collect();
    let patch_lattice = Lattice { shape: patch, periodic: vec![false; m - 1] };
    let mut face_s = Vec::with_capacity(patch_lattice.len());
    let mut face_b = Vec::with_capacity(patch_lattice.len());
    for p in 0..patch_lattice.len() {
        let mut c = vec![0usize];
        c.extend(patch_lattice.coords(p));
        face_s.push(ls.index(&c));
        face_b.push(lb.index(&c));
    }
    let glued = connected_sum(&small, &big, &face_s, &face_b)?;
    check_budget("ends model points", Some(glued.len()), budget)?;
    Ok(glued)
}

/// Measure of the closed ball `B(x, r)`.
pub fn volume(space: &MetricMeasureSpace, x: usize, r: f64) -> f64 {
    space
        .distance_row(x)
        .iter()
        .zip(space.mu())
        .filter(|(&d, _)| d <= r)
        .map(|(_, &m)| m)
        .sum()
}

/// `V(x, r)` for every point and every radius; `out[k][x]` is for `radii[k]`.
///
/// Rows are computed on the fly and dropped, so this never fills the distance cache.
pub fn volumes_at(space: &MetricMeasureSpace, radii: &[f64]) -> Vec<Vec<f64>> {
    let per_point: Vec<Vec<f64>> = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let row;
            let d: &[f64] = match space.rows[x].get() {
                Some(r) => r,
                None => {
                    row = space.compute_distance_row(x);
                    &row
                }
            };
            let mut pairs: Vec<(f64, f64)> = d.iter().copied().zip(space.mu().iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut cum = Vec::with_capacity(pairs.len());
            let mut acc = 0.0;
            for p in &pairs {
                acc += p.1;
                cum.push(acc);
            }
            radii
                .iter()
                .map(|&r| {
                    let k = pairs.partition_point(|p| p.0 <= r);
                    if k == 0 { 0.0 } else { cum[k - 1] }
                })
                .collect()
        })
        .collect();
    (0..radii.len())
        .map(|k| per_point.iter().map(|v| v[k]).collect())
        .collect()
}

/// `max_{x, r} V(x, 2r) / V(x, r)` over all points and the given radii.
pub fn doubling_ratio(space: &MetricMeasureSpace, radii: &[f64]) -> Result<f64> {
    if radii.is_empty() {
        return Err(invalid("doubling_ratio needs at least one radius"));
    }
    if radii.iter().any(|&r| !(r >= 0.0)) {
        return Err(invalid("radii must be non-negative"));
    }
    let mut all: Vec<f64> = radii.to_vec();
    all.extend(radii.iter().map(|r| 2.0 * r));
    let v = volumes_at(space, &all);
    let k = radii.len();
    let mut worst: f64 = 1.0;
    for i in 0..k {
        for x in 0..space.len() {
            worst = worst.max(v[k + i][x] / v[i][x]);
        }
    }
    Ok(worst)
}

/// `|x| = sup_{z in K} d(x, z)`.
pub fn radial_coordinate(space: &MetricMeasureSpace, x: usize) -> Result<f64> {
    let k = space.compact_set();
    if k.is_empty() {
        return Err(Error::Config("radial coordinate needs a nonempty compact set K".into()));
    }
    Ok(k.iter().map(|&z| space.distance(z, x)).fold(0.0, f64::max))
}

/// Radial coordinate of every point.
pub fn radial_coordinates(space: &MetricMeasureSpace) -> Result<Vec<f64>> {
    let k = space.compact_set();
    if k.is_empty() {
        return Err(Error::Config("radial coordinate needs a nonempty compact set K".into()));
    }
    let mut out = vec![0.0f64; space.len()];
    for &z in k {
        for (o, &d) in out.iter_mut().zip(space.distance_row(z)) {
            *o = o.max(d);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeSample {
    pub r: f64,
    pub sup_volume: f64,
    pub argmax_point: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeProfile {
    pub n_small: f64,
    pub n_large: f64,
    pub crossover_radius: f64,
    pub fit_residual: f64,
    pub small_fit: ExponentFit,
    pub large_fit: ExponentFit,
    pub samples: Vec<VolumeSample>,
}

/// `sup_x V(x, r)` with its (lowest-index) maximiser for each radius.
pub fn volume_profile(space: &MetricMeasureSpace, r_grid: &[f64]) -> Vec<VolumeSample> {
    let v = volumes_at(space, r_grid);
    r_grid
        .iter()
        .zip(v)
        .map(|(&r, vol)| {
            let (arg, sup) = vol
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
            VolumeSample { r, sup_volume: sup, argmax_point: arg }
        })
        .collect()
}

/// Log–log slopes of `sup_x V(x, r)` below and above `crossover` (inclusive on both sides).
pub fn volume_profile_fit(space: &MetricMeasureSpace, r_grid: &[f64], crossover: f64) -> Result<VolumeProfile> {
    let below = r_grid.iter().filter(|&&r| r > 0.0 && r <= crossover).count();
    let above = r_grid.iter().filter(|&&r| r >= crossover).count();
    if below < 3 || above < 3 {
        return Err(invalid(format!(
            "volume profile needs >= 3 radii on each side of the crossover (got {below} and {above})"
        )));
    }
    let samples = volume_profile(space, r_grid);
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.r, s.sup_volume)).collect();
    let lo = r_grid.iter().copied().filter(|&r| r > 0.0).fold(f64::INFINITY, f64::min);
    let hi = r_grid.iter().copied().fold(0.0, f64::max);
    let small_fit = fit_power_law(&pts, (lo, crossover))?;
    let large_fit = fit_power_law(&pts, (crossover, hi))?;
    Ok(VolumeProfile {
        n_small: small_fit.slope,
        n_large: large_fit.slope,
        crossover_radius: crossover,
        fit_residual: small_fit.residual_rms.max(large_fit.residual_rms),
        small_fit,
        large_fit,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_three() {
        let s = build_grid(1, 3, 1.0, Boundary::Free).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.edges().len(), 2);
        assert!(s.edges().iter().all(|e| e.conductance == 1.0 && e.length == 1.0));
        assert_eq!(s.mu(), &[1.0, 1.0, 1.0]);
        assert_eq!(volume(&s, 1, 1.0), 3.0);
        assert_eq!(volume(&s, 0, 0.0), 1.0);
        assert_eq!(s.compact_set(), &[1]);
    }

    #[test]
    fn grid_weights_follow_spacing() {
        let s = build_grid(2, 4, 0.5, Boundary::Free).unwrap();
        assert_eq!(s.len(), 16);
        assert!(s.mu().iter().all(|&m| m == 0.25));
        assert!(s.edges().iter().all(|e| e.conductance == 1.0 && e.length == 0.5));
        let s3 = build_grid(3, 4, 0.5, Boundary::Free).unwrap();
        assert!(s3.edges().iter().all(|e| e.conductance == 0.5));
    }

    #[test]
    fn grid_budget_guard() {
        match build_grid(3, 30, 1.0, Boundary::Free) {
            Err(Error::Budget { needed, budget, .. }) => {
                assert_eq!(needed, 27_000);
                assert_eq!(budget, 20_000);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn absorbing_grid_exterior_mass() {
        let s = build_grid(2, 3, 1.0, Boundary::Absorbing).unwrap();
        // corner misses two neighbours, edge midpoint one, centre none
        assert_eq!(s.exterior()[0], 2.0);
        assert_eq!(s.exterior()[1], 1.0);
        assert_eq!(s.exterior()[4], 0.0);
    }

    #[test]
    fn tori() {
        let c4 = build_torus(1, 4, 1.0).unwrap();
        assert!(c4.diameter() <= 2.0);
        let c3 = build_torus(1, 3, 1.0).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert_eq!(c3.distance(x, y), if x == y { 0.0 } else { 1.0 });
            }
        }
        let t = build_torus(2, 50, 1.0).unwrap();
        assert_eq!(t.len(), 2500);
    }

    #[test]
    fn path_gluing() {
        let p = build_grid(1, 3, 1.0, Boundary::Free).unwrap();
        let s = connected_sum(&p, &p, &[2], &[0]).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.diameter(), 4.0);
        assert_eq!(s.total_mass(), 5.0);
        assert!(matches!(connected_sum(&p, &p, &[0, 1], &[0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(connected_sum(&p, &p, &[7], &[0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ends_guards() {
        assert!(build_ends_model(2, 4, 5, 4, 3, 1.0).is_err());
        assert!(build_ends_model(4, 3, 5, 4, 3, 1.0).is_err());
    }

    #[test]
    fn ends_point_count_and_face() {
        let (s, t, b) = (5, 3, 4);
        let e = build_ends_model(3, 4, s, b, t, 1.0).unwrap();
        let face = s.min(b) * s.min(b) * t.min(b);
        assert_eq!(e.len(), s * s * s * t + b * b * b * b - face);
        assert_eq!(e.compact_set().len(), face);
    }

    #[test]
    fn grid_ball_is_l1_ball() {
        let s = build_grid(2, 11, 1.0, Boundary::Free).unwrap();
        let c = s.compact_set()[0];
        assert_eq!(volume(&s, c, 2.0), 13.0);
    }

    #[test]
    fn radial_on_path() {
        let mut p = build_grid(1, 6, 0.5, Boundary::Free).unwrap();
        p.set_compact_set(vec![0]).unwrap();
        assert_eq!(radial_coordinate(&p, 0).unwrap(), 0.0);
        assert_eq!(radial_coordinate(&p, 5).unwrap(), 2.5);
        p.set_compact_set(vec![]).unwrap();
        assert!(matches!(radial_coordinate(&p, 0), Err(Error::Config(_))));
    }

    #[test]
    fn single_point_doubling() {
        let s = MetricMeasureSpace::new(vec![2.0], vec![], vec![0]).unwrap();
        assert_eq!(doubling_ratio(&s, &[0.5, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn profile_needs_three_radii() {
        let s = build_grid(1, 20, 1.0, Boundary::Free).unwrap();
        assert!(volume_profile_fit(&s, &[1.0, 2.0], 1.5).is_err());
    }

    #[test]
    fn rejects_disconnected_and_bad_weights() {
        assert!(MetricMeasureSpace::new(vec![1.0, 1.0], vec![], vec![]).is_err());
        assert!(MetricMeasureSpace::new(vec![1.0, 0.0], vec![Edge { a: 0, b: 1, conductance: 1.0, length: 1.0 }], vec![]).is_err());
        assert!(MetricMeasureSpace::new(vec![1.0, 1.0], vec![Edge { a: 0, b: 1, conductance: -1.0, length: 1.0 }], vec![]).is_err());
    }
}
