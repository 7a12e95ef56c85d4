//! Acceptance run: one line per criterion with its verdict, runtime and the measured values.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use num_complex::Complex64;
use smlab::calculus::{
    complex_resolvent_check, complex_time_resolvent, heat_kernel, resolvent_power, resolvent_power_quadrature,
    MultiplierFunction,
};
use smlab::estimates::*;
use smlab::metric_space::{build_ends_model, build_grid, Boundary};
use smlab::operators::{laplacian, schrodinger, PotentialSpec, SelfAdjointOperator};

type Verdict = Result<(bool, String), String>;

fn e2s(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn geom(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

fn lin(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn grid_op(dim: usize, side: usize, h: f64, b: Boundary) -> SelfAdjointOperator {
    laplacian(Arc::new(build_grid(dim, side, h, b).unwrap()))
}

fn ends(small: usize, big: usize, torus: usize) -> SelfAdjointOperator {
    laplacian(Arc::new(build_ends_model(3, 4, small, big, torus, 1.0).unwrap()))
}

static ENDS_754: OnceLock<SelfAdjointOperator> = OnceLock::new();
static ENDS_865: OnceLock<SelfAdjointOperator> = OnceLock::new();

fn ends_754() -> &'static SelfAdjointOperator {
    ENDS_754.get_or_init(|| ends(7, 5, 4))
}

fn ends_865() -> &'static SelfAdjointOperator {
    ENDS_865.get_or_init(|| ends(8, 6, 5))
}

/// Binding checks as `name=value`.
fn checks(r: &SuiteReport) -> String {
    r.checks
        .iter()
        .filter(|c| !c.informational)
        .map(|c| format!("{}={:.4e}{}", c.name, c.value, if c.pass { "" } else { "(x)" }))
        .collect::<Vec<_>>()
        .join(" ")
}

fn check(r: &SuiteReport, name: &str) -> Result<bool, String> {
    r.check(name).map(|c| c.pass).ok_or_else(|| format!("{} has no check {name}", r.suite))
}

// ---------------------------------------------------------------- oracles

/// Taylor series at `t / 2^s` with `‖tA‖ / 2^s <= 1/2`, squared `s` times.
fn taylor_heat(a: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = a.len();
    let norm = a.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max) * t;
    let s = (2.0 * norm).log2().ceil().max(0.0) as i32;
    let tau = t / 2f64.powi(s);
    let mul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| x[i][l] * y[l][j]).sum()).collect()).collect()
    };
    let mut term: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut sum = term.clone();
    let neg: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| -tau * v).collect()).collect();
    for k in 1..=30 {
        term = mul(&term, &neg).into_iter().map(|r| r.into_iter().map(|v| v / k as f64).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        sum = mul(&sum, &sum);
    }
    sum
}

/// Gauss–Jordan inverse with partial pivoting.
fn inverse(m: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let n = m.len();
    let mut a: Vec<Vec<Complex64>> = m.to_vec();
    let mut inv: Vec<Vec<Complex64>> =
        (0..n).map(|i| (0..n).map(|j| Complex64::new(f64::from(u8::from(i == j)), 0.0)).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].norm().total_cmp(&a[y][c].norm())).unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c].inv();
        for j in 0..n {
            a[c][j] *= d;
            inv[c][j] *= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for j in 0..n {
                    let (ac, ic) = (a[c][j], inv[c][j]);
                    a[r][j] -= f * ac;
                    inv[r][j] -= f * ic;
                }
            }
        }
    }
    inv
}

fn matmul(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
}

/// Largest kernel deviation from the action matrix `m`, using `K(x,y) = m(x,y)/μ(y)`.
fn deviation(k: &smlab::norms::OperatorKernel, m: &[Vec<Complex64>], mu: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for x in 0..m.len() {
        for y in 0..m.len() {
            worst = worst.max((k.get(x, y) - m[x][y] / mu[y]).norm());
        }
    }
    worst
}

fn oracle_deviation(op: &SelfAdjointOperator) -> Result<f64, String> {
    let a: Vec<Vec<f64>> = {
        let d = op.dense();
        (0..op.len()).map(|i| (0..op.len()).map(|j| d[(i, j)]).collect()).collect()
    };
    let n = a.len();
    let mu = op.space().mu().to_vec();
    let cplx = |m: &Vec<Vec<f64>>| -> Vec<Vec<Complex64>> {
        m.iter().map(|r| r.iter().map(|&v| Complex64::new(v, 0.0)).collect()).collect()
    };
    let shifted = |s: Complex64, scale: f64| -> Vec<Vec<Complex64>> {
        (0..n)
            .map(|i| (0..n).map(|j| Complex64::new(scale * a[i][j], 0.0) + if i == j { s } else { Complex64::new(0.0, 0.0) }).collect())
            .collect()
    };
    let mut worst: f64 = 0.0;
    for t in [0.1, 1.0, 2.5] {
        let k = heat_kernel(op, t).map_err(e2s)?;
        worst = worst.max(deviation(&k, &cplx(&taylor_heat(&a, t)), &mu));
    }
    for t in [0.3, 1.0, 2.0] {
        let inv = inverse(&shifted(Complex64::new(1.0, 0.0), t * t));
        worst = worst.max(deviation(&resolvent_power(op, t, 1.0).map_err(e2s)?, &inv, &mu));
        worst = worst.max(deviation(&resolvent_power(op, t, 2.0).map_err(e2s)?, &matmul(&inv, &inv), &mu));
        for sigma in [0.5, 0.75, 1.5] {
            let q = resolvent_power_quadrature(op, t, sigma).map_err(e2s)?;
            worst = worst.max(resolvent_power(op, t, sigma).map_err(e2s)?.max_deviation(&q));
        }
    }
    for (r, th) in [(0.2, 0.0), (1.0, 0.7), (3.0, 1.3), (0.5, -1.0)] {
        let z = Complex64::from_polar(r, th);
        let inv = inverse(&shifted(z * z, 1.0));
        worst = worst.max(deviation(&complex_time_resolvent(op, z).map_err(e2s)?, &inv, &mu));
        worst = worst.max(complex_resolvent_check(op, z).map_err(e2s)?);
    }
    Ok(worst)
}

// ---------------------------------------------------------------- criteria

fn c1() -> Verdict {
    let opts = SubordinationOptions { envelope_window: None, ..Default::default() };
    let r = suite_subordination(&[1.0, 2.0, 3.5], &lin(0.0, 8.0, 33), &opts).map_err(e2s)?;
    Ok((check(&r, "max_residual")?, checks(&r)))
}

fn c2() -> Verdict {
    let opts = SubordinationOptions { envelope_window: Some((20.0, 200.0)), envelope_tol: 0.05, ..Default::default() };
    let r = suite_subordination(&[1.0, 2.0], &[0.0, 1.0], &opts).map_err(e2s)?;
    let ok = check(&r, "envelope_slope_a=1")? && check(&r, "envelope_slope_a=2")?;
    Ok((ok, checks(&r)))
}

fn c3() -> Verdict {
    let ops = [grid_op(2, 3, 0.7, Boundary::Free), grid_op(1, 10, 1.0, Boundary::Absorbing), grid_op(1, 7, 0.5, Boundary::Free)];
    let mut worst: f64 = 0.0;
    for op in &ops {
        worst = worst.max(oracle_deviation(op)?);
    }
    Ok((worst <= 1e-8, format!("max_deviation={worst:.3e} (<= 1e-8)")))
}

fn c4() -> Verdict {
    let mut ok = true;
    let mut out = Vec::new();
    for (dim, side, h) in [(1, 401, 0.5), (2, 40, 1.0)] {
        let op = grid_op(dim, side, h, Boundary::Free);
        let diam = op.space().diameter();
        let r = suite_locality(&op, &MultiplierFunction::Fa { a: 2.0 }, &geom(5.0 * h, diam / 4.0, 6), &LocalityOptions::default())
            .map_err(e2s)?;
        ok &= check(&r, "max_leaked_fraction")?;
        out.push(format!("{dim}D N={}: {}", op.len(), checks(&r)));
    }
    Ok((ok, out.join("; ")))
}

fn c5() -> Verdict {
    let op = ends(9, 5, 7);
    let r = suite_ondiag(&op, &geom(0.5, 24.0, 30), 3, 4, &OndiagOptions::default()).map_err(e2s)?;
    Ok((check(&r, "small_slope")? && check(&r, "large_slope")?, format!("N={} {}", op.len(), checks(&r))))
}

fn c6() -> Verdict {
    let ts = geom(0.3, 30.0, 13);
    let e = suite_rsk(ends_754(), 1.5, &ts, &RskOptions { kappa_predicted: 0.25, kappa_tol: 0.15, ..Default::default() })
        .map_err(e2s)?;
    let g = grid_op(2, 40, 1.0, Boundary::Free);
    let d = suite_rsk(&g, 1.0, &ts, &RskOptions { kappa_predicted: 0.0, kappa_tol: 0.1, ..Default::default() }).map_err(e2s)?;
    Ok((
        check(&e, "kappa_hat")? && check(&d, "kappa_hat")?,
        format!("ends: {}; grid: {}", checks(&e), checks(&d)),
    ))
}

fn c7() -> Verdict {
    let (sigma, kappa) = (1.5, 0.25);
    let r = suite_wave(ends_754(), &[0.0, 1.0, 2.0, 4.0, 8.0, 16.0], &geom(1.0, 100.0, 9), sigma, kappa, &WaveOptions::default())
        .map_err(e2s)?;
    Ok((check(&r, "xi_growth")? && check(&r, "t_growth")?, checks(&r)))
}

fn c8() -> Verdict {
    let f = MultiplierFunction::bochner_riesz(6.0);
    let r = suite_multiplier(&[ends_754(), ends_865()], &f, 5.0, &geom(0.05, 100.0, 20), 0.25, &MultiplierOptions::default())
        .map_err(e2s)?;
    let ok = check(&r, "ratio_bounded_0")? && check(&r, "ratio_bounded_1")? && check(&r, "C_stability")?;
    // the supremum sits at the smallest t; the t >= 1 tail is shown for information
    let (lc, tc, qc) = (0, 1, 3);
    let tail = |level: f64| r.table.iter().filter(|row| row[lc] == level && row[tc] >= 1.0).map(|row| row[qc]).fold(0.0, f64::max);
    let (n0, n1) = (ends_754().len(), ends_865().len());
    Ok((ok, format!("N={n0},{n1} {} tail_C_change(t>=1)={:.3e}", checks(&r), (tail(1.0) / tail(0.0) - 1.0).abs())))
}

fn c9() -> Verdict {
    let coarse = grid_op(2, 11, 1.0, Boundary::Free);
    let fine = grid_op(2, 21, 0.5, Boundary::Free);
    let mut z = Vec::new();
    for r in geom(0.1, 10.0, 5) {
        for th in [0.0, 0.4, 0.8, 1.1, 1.3] {
            z.push(Complex64::from_polar(r, th));
        }
    }
    let r = suite_resolvent_sector(&[&coarse, &fine], &z, 0.5, 0.0, &SectorOptions::default()).map_err(e2s)?;
    // the real axis gives ratio 1 on every mesh; off-axis maxima are shown for information
    let (lc, tc, qc) = (0, 2, 6);
    let off = |level: f64| r.table.iter().filter(|row| row[lc] == level && row[tc] > 0.0).map(|row| row[qc]).fold(0.0, f64::max);
    Ok((
        check(&r, "angular_slope")? && check(&r, "C_stability")?,
        format!("{} off_axis_C={:.4e},{:.4e}", checks(&r), off(0.0), off(1.0)),
    ))
}

fn c10() -> Verdict {
    let op = ends_754();
    let n = op.len();
    let pairs = pair_schedule(op.space(), &[0, 857, 1714, n - 1, n - 100], 1.0, &[1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0])
        .map_err(e2s)?;
    let opts = DgOptions { n1: 3.0, n2: 4.0, ..Default::default() };
    let r = suite_dg_decay(op, &geom(1.0, 30.0, 10), &pairs, &opts).map_err(e2s)?;
    Ok((check(&r, "gaussian_rate")? && check(&r, "prefactor_exponent")?, checks(&r)))
}

fn c11() -> Verdict {
    let space = Arc::new(build_grid(3, 27, 1.0, Boundary::Absorbing).map_err(e2s)?);
    let spec = PotentialSpec::new(0.16, 1.0).map_err(e2s)?;
    let op = schrodinger(space, spec).map_err(e2s)?;
    let alpha = PotentialSpec::resonance_index(3, 0.16);
    let r = suite_schrodinger(&op, &geom(0.5, 40.0, 16), alpha, 3, &SchrodingerOptions::default()).map_err(e2s)?;
    let e = r.fits["exponent"].slope;
    let ok = (-0.05..=0.45).contains(&e) && check(&r, "subcritical_min_eig")?;
    Ok((ok, format!("alpha={alpha:.4} exponent={e:.4} in [-0.05, 0.45]; {}", checks(&r))))
}

fn c12() -> Verdict {
    let op = grid_op(1, 3, 1.0, Boundary::Free);
    let r = suite_spectrum_probe(&op, 2.0, 1.0, &ProbeOptions::default()).map_err(e2s)?;
    let psi = r.measurements["psi_max_entry"];
    let norm = r.measurements["resolvent_norm_1to1"];
    let ok = psi <= 1e-12 && norm.is_finite() && check(&r, "hormander_bounded")?;
    Ok((ok, format!("psi_max={psi:.1e} norm_1to1={norm:.4} {}", checks(&r))))
}

fn c13() -> Verdict {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let cfg = dir.path().join("det.cfg");
    std::fs::write(
        &cfg,
        "[space]\nkind = ends\nn = 3\nm = 4\nside_small = 5\nside_big = 4\ntorus_side = 3\n\
         [run]\nseed = 11\npnorm_p = 1.5\n\
         [suite.rsk]\nsigma = 1.5\nt_grid = geom(0.3, 30, 21)\n\
         [suite.wave]\nxi_grid = 0, 1, 4, 16\nt_grid = geom(1, 100, 7)\nsigma = 1.5\nkappa = 0.25\n\
         [suite.multiplier]\nfunction = bochner_riesz\ndelta = 6\ns = 5\nt_grid = geom(0.05, 100, 8)\nkappa = 0.25\n\
         [suite.subordination]\na_values = 1, 2\nxi_grid = 0, 1, 4\n",
    )
    .map_err(e2s)?;
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        for cmd in [vec!["op"], vec!["suite", "all"]] {
            let mut args = vec!["smlab", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
            args.extend(cmd);
            let o = smlab_cli::run_args(args);
            if o.code > 1 {
                return Err(format!("run {run} exited {}: {}", o.code, o.stderr.trim()));
            }
        }
        let mut names: Vec<String> = std::fs::read_dir(&out)
            .map_err(e2s)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".json"))
            .collect();
        names.sort();
        files.push((out, names));
    }
    let same_names = files[0].1 == files[1].1;
    let mut differing = Vec::new();
    for n in &files[0].1 {
        let a = std::fs::read(files[0].0.join(n)).map_err(e2s)?;
        let b = std::fs::read(files[1].0.join(n)).unwrap_or_default();
        if a != b {
            differing.push(n.clone());
        }
    }
    let ok = same_names && differing.is_empty() && files[0].1.len() >= 5;
    Ok((ok, format!("{} JSON files compared, differing: {differing:?}", files[0].1.len())))
}

fn main() {
    let criteria: [(u32, &str, f64, fn() -> Verdict); 13] = [
        (1, "subordination identity", 10.0, c1),
        (2, "F_a envelope decay", 10.0, c2),
        (3, "oracle equivalence", 5.0, c3),
        (4, "locality of bandlimited F_a", 120.0, c4),
        (5, "on-diagonal decay on ends", 600.0, c5),
        (6, "resolvent-power kappa", 300.0, c6),
        (7, "oscillating heat growth", 600.0, c7),
        (8, "Bochner-Riesz multiplier stability", 600.0, c8),
        (9, "sector resolvent bound", 600.0, c9),
        (10, "Davies-Gaffney decay", 300.0, c10),
        (11, "Schrodinger heat exponent", 900.0, c11),
        (12, "spectrum probe", 60.0, c12),
        (13, "determinism", f64::INFINITY, c13),
    ];
    let only: Vec<u32> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = Vec::new();
    for (id, name, budget, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match verdict {
            Ok((p, d)) => (p && secs <= budget, if secs <= budget { d } else { format!("{d}; over time budget") }),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = if budget.is_finite() { format!("{budget:.0}s") } else { "-".into() };
        println!(
            "criterion {id:>2} {:<4} {name:<36} {secs:>7.1}s (budget {budget}) {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
