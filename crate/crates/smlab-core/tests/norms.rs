use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smlab::calculus::{apply_multiplier, heat_kernel, propagation_speed, MultiplierFunction};
use smlab::metric_space::{build_grid, Boundary, Edge, MetricMeasureSpace};
use smlab::norms::*;
use smlab::operators::laplacian;

fn space(mu: Vec<f64>) -> Arc<MetricMeasureSpace> {
    let n = mu.len();
    let edges = (0..n - 1).map(|i| Edge { a: i, b: i + 1, conductance: 1.0, length: 1.0 }).collect();
    Arc::new(MetricMeasureSpace::new(mu, edges, vec![0]).unwrap())
}

fn random_kernel(s: Arc<MetricMeasureSpace>, seed: u64, complex: bool) -> OperatorKernel {
    let n = s.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let re = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let im = complex.then(|| Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)));
    OperatorKernel::new(s, re, im).unwrap()
}

#[test]
fn one_to_one_by_enumeration() {
    let s = space(vec![0.5, 1.5, 2.0]);
    let k = random_kernel(s.clone(), 3, true);
    let mu = s.mu();
    let mut best: f64 = 0.0;
    for y in 0..3 {
        let mut c = 0.0;
        for x in 0..3 {
            c += k.get(x, y).norm() * mu[x];
        }
        best = best.max(c);
    }
    assert!((norm_1to1(&k) - best).abs() < 1e-14);
    assert!((norm_1to1(&k) - norm_inf_to_inf(&k.adjoint())).abs() < 1e-12);
}

#[test]
fn heat_kernel_is_markov() {
    let op = laplacian(Arc::new(build_grid(2, 5, 1.0, Boundary::Free).unwrap()));
    let k = heat_kernel(&op, 0.7).unwrap();
    assert!((norm_1to1(&k) - 1.0).abs() < 1e-10);
    assert!((norm_inf_to_inf(&k) - 1.0).abs() < 1e-10);
}

#[test]
fn two_to_infinity_rank_one_and_extremizer() {
    let s = space(vec![1.0, 0.5, 2.0, 1.5]);
    let mu = s.mu().to_vec();
    let g = [0.3, -1.2, 0.7, 0.1];
    let h = [1.0, 2.0, -0.5, 0.25];
    let k = OperatorKernel::new(s.clone(), Mat::from_fn(4, 4, |x, y| g[x] * h[y]), None).unwrap();
    let hn: f64 = h.iter().zip(&mu).map(|(v, m)| v * v * m).sum::<f64>().sqrt();
    assert!((norm_2toinf(&k) - 1.2 * hn).abs() < 1e-13);

    let k = random_kernel(s, 11, true);
    let mut extremal: f64 = 0.0;
    for x in 0..4 {
        let row: Vec<Complex64> = (0..4).map(|y| k.get(x, y).conj()).collect();
        let nrm: f64 = row.iter().zip(&mu).map(|(v, m)| v.norm_sqr() * m).sum::<f64>().sqrt();
        let f: Vec<Complex64> = row.iter().map(|v| v / nrm).collect();
        extremal = extremal.max(k.apply(&f)[x].norm());
    }
    assert!((norm_2toinf(&k) - extremal).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20000 {
        let f: Vec<Complex64> = (0..4).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let nrm: f64 = f.iter().zip(&mu).map(|(v, m)| v.norm_sqr() * m).sum::<f64>().sqrt();
        let tf = k.apply(&f);
        for v in tf {
            assert!(v.norm() / nrm <= norm_2toinf(&k) + 1e-12);
        }
    }
}

#[test]
fn weighted_norm_on_two_points() {
    let s = space(vec![1.0, 1.0]);
    let op = laplacian(s.clone());
    let k = heat_kernel(&op, 0.6).unwrap();
    let w = weighted_2toinf(&k, s.diameter()).unwrap();
    assert!((w - 2f64.sqrt() * norm_2toinf(&k)).abs() < 1e-14);
    let s1 = space(vec![0.25, 4.0, 1.0]);
    let k1 = random_kernel(s1.clone(), 2, false);
    let rows = k1.row_l2_squared();
    let expect = rows.iter().zip(s1.mu()).map(|(r, m)| (r * m).sqrt()).fold(0.0, f64::max);
    assert!((weighted_2toinf(&k1, 0.0).unwrap() - expect).abs() < 1e-14);
    assert_eq!(weighted_sup(&[1.0; 3], &rows), norm_2toinf(&k1));
}

#[test]
fn spectral_norm_of_multiplier() {
    let op = laplacian(Arc::new(build_grid(1, 9, 1.0, Boundary::Absorbing).unwrap()));
    let f = MultiplierFunction::OscGaussian { xi: 2.0 };
    let k = apply_multiplier(&op, &f, 0.3).unwrap();
    let es = op.spectral_decomposition().unwrap();
    let expect = es.values.iter().map(|&l| f.eval(0.3 * l).norm()).fold(0.0, f64::max);
    let r = norm_ptop(&k, 2.0).unwrap();
    assert!(r.exact && (r.lower - expect).abs() < 1e-12);
}

fn lp(v: &[f64], mu: &[f64], p: f64) -> f64 {
    v.iter().zip(mu).map(|(x, m)| x.abs().powf(p) * m).sum::<f64>().powf(1.0 / p)
}

#[test]
fn intermediate_p_interval_contains_grid_search() {
    let s = space(vec![1.0, 1.0, 1.0]);
    let mu = s.mu().to_vec();
    for seed in [1, 2, 3] {
        let k = random_kernel(s.clone(), seed, false);
        let p = 1.5;
        let r = norm_ptop(&k, p).unwrap();
        assert!(r.lower <= r.upper && !r.exact);
        // unit sphere of ℓ^{1.5}: parametrise the first two coordinates on a 1e-2 mesh
        let mut grid: f64 = 0.0;
        let steps = 200;
        for i in 0..=steps {
            for j in 0..=steps {
                let a = -1.0 + 2.0 * i as f64 / steps as f64;
                let b = -1.0 + 2.0 * j as f64 / steps as f64;
                let rest = 1.0 - a.abs().powf(p) - b.abs().powf(p);
                if rest < 0.0 {
                    continue;
                }
                for sgn in [-1.0, 1.0] {
                    let f = [a, b, sgn * rest.powf(1.0 / p)];
                    let tf = k.apply(&f.map(|v| Complex64::new(v, 0.0)));
                    let tr: Vec<f64> = tf.iter().map(|v| v.re).collect();
                    grid = grid.max(lp(&tr, &mu, p) / lp(&f, &mu, p));
                }
            }
        }
        assert!(grid <= r.upper + 1e-12, "seed {seed}: grid {grid} above upper {}", r.upper);
        assert!(grid >= r.lower * (1.0 - 1e-2), "seed {seed}: grid {grid} well below lower {}", r.lower);
    }
}

#[test]
fn interval_endpoints_and_log_convexity() {
    let s = space(vec![0.5, 1.0, 2.0, 1.0, 0.7]);
    let k = random_kernel(s, 9, true);
    let ps = [1.0, 1.5, 2.0, 3.0, f64::INFINITY];
    let rs: Vec<NormInterval> = ps.iter().map(|&p| norm_ptop(&k, p).unwrap()).collect();
    for (p, r) in ps.iter().zip(&rs) {
        assert!(r.lower <= r.upper + 1e-12);
        if [1.0, 2.0, f64::INFINITY].contains(p) {
            assert!(r.exact && r.lower == r.upper);
        }
    }
    let pts: Vec<(f64, f64)> = ps.iter().zip(&rs).map(|(p, r)| (1.0 / p, r.upper.ln())).collect();
    for w in pts.windows(3) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        let (x2, y2) = w[2];
        let chord = y0 + (y2 - y0) * (x1 - x0) / (x2 - x0);
        assert!(y1 <= chord + 1e-12);
    }
    assert!(norm_ptop(&k, 0.9).is_err());
}

#[test]
fn davies_gaffney_on_a_path() {
    let op = laplacian(Arc::new(build_grid(1, 61, 1.0, Boundary::Free).unwrap()));
    let v = propagation_speed(&op, &[6.0, 8.0, 10.0, 12.0], 1e-6).unwrap().speed;
    // scaled distance 8 between B(10, 2) and B(c2, 2)
    let gap = (8.0 * v).ceil() as usize;
    let pair = BallPair { c1: 10, r1: 2.0, c2: 10 + 4 + gap, r2: 2.0 };
    let r = davies_gaffney_pairs(&op, 1.0, &[pair], v).unwrap();
    assert!(r.pairs[0].scaled_distance >= 8.0);
    assert!(r.worst_ratio <= 10.0, "{r:?}");
    let late = davies_gaffney_pairs(&op, 1e6, &[pair], v).unwrap();
    assert!(late.worst_ratio <= 1.0 + 1e-9);
    let overlap = BallPair { c1: 10, r1: 3.0, c2: 13, r2: 1.0 };
    assert!(davies_gaffney_pairs(&op, 1.0, &[overlap], v).is_err());
}
