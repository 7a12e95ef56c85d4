use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use smlab::calculus::{heat_kernel, MultiplierFunction};
use smlab::estimates::*;
use smlab::metric_space::{build_grid, Boundary};
use smlab::norms::norm_1to1;
use smlab::operators::{laplacian, SelfAdjointOperator};

fn grid_op(dim: usize, side: usize, h: f64, b: Boundary) -> SelfAdjointOperator {
    laplacian(Arc::new(build_grid(dim, side, h, b).unwrap()))
}

fn geom(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

#[test]
fn report_round_trip_and_reevaluation() {
    let op = grid_op(2, 12, 1.0, Boundary::Free);
    let r = suite_rsk(&op, 1.0, &geom(0.3, 30.0, 9), &RskOptions::default()).unwrap();
    let back = SuiteReport::from_json(&r.to_json()).unwrap();
    assert_eq!(back, r);
    assert!(back.is_consistent().unwrap());
    assert_eq!(back.to_json(), r.to_json());
    let csv = r.to_csv();
    assert_eq!(csv.lines().count(), r.table.len() + 1);
    assert!(csv.starts_with("t,norm"));
}

#[test]
fn wave_at_zero_frequency_is_the_heat_table() {
    let op = grid_op(1, 15, 1.0, Boundary::Free);
    let ts = geom(0.5, 20.0, 5);
    let r = suite_wave(&op, &[0.0, 1.0, 4.0, 10.0], &ts, 0.75, 0.0, &WaveOptions::default()).unwrap();
    let (xc, tc, nc) = (0, 1, 2);
    for row in r.table.iter().filter(|row| row[xc] == 0.0) {
        let heat = norm_1to1(&heat_kernel(&op, row[tc]).unwrap());
        assert!((row[nc] - heat).abs() <= 1e-10, "t = {}", row[tc]);
        assert!(row[nc] <= 1.0 + 1e-12);
    }
    assert!(r.check("heat_norm_at_xi0").unwrap().pass);
}

#[test]
fn resolvent_and_heat_exponents_agree_on_a_doubling_grid() {
    let op = grid_op(2, 20, 1.0, Boundary::Free);
    let ts = geom(0.3, 30.0, 13);
    let opts = RskOptions { window: Some((1.0, 5.0)), ..Default::default() };
    let rsk = suite_rsk(&op, 1.0, &ts, &opts).unwrap();
    let k = rsk.fits["kappa"].slope;
    let heat = suite_heat2inf(
        &op,
        &ts,
        &Heat2InfOptions { window: Some((1.0, 5.0)), kappa_rsk: Some(k), ..Default::default() },
    )
    .unwrap();
    assert!(rsk.pass && heat.pass, "{:?} {:?}", rsk.checks, heat.checks);
    assert!(heat.check("kappa_agreement").unwrap().value <= 0.15);
}

#[test]
fn ondiag_on_a_long_path_decays_like_one_dimension() {
    let op = grid_op(1, 301, 1.0, Boundary::Free);
    let opts = OndiagOptions { small_window: (5.0, 50.0), large_window: None, slope_tol: 0.2 };
    let r = suite_ondiag(&op, &geom(1.0, 100.0, 11), 1, 1, &opts).unwrap();
    assert!(r.pass, "{:?}", r.checks);
    assert!((r.fits["small"].slope + 0.5).abs() < 0.05);
}

#[test]
fn free_box_schrodinger_exponent_is_near_zero() {
    let op = grid_op(3, 11, 1.0, Boundary::Absorbing);
    let opts = SchrodingerOptions { subcritical_eps: None, ..Default::default() };
    let r = suite_schrodinger(&op, &geom(0.5, 5.0, 8), 0.0, 3, &opts).unwrap();
    let e = r.fits["exponent"].slope;
    assert!(e.abs() <= 0.25, "{e}");
}

#[test]
fn spectrum_probe_examples() {
    let op = grid_op(1, 3, 1.0, Boundary::Free);
    let r = suite_spectrum_probe(&op, 2.0, 1.0, &ProbeOptions::default()).unwrap();
    assert!(r.measurements["psi_max_entry"] == 0.0);
    assert!(r.measurements["resolvent_norm_1to1"].is_finite());
    assert!(r.pass, "{:?}", r.checks);
    let neg = suite_spectrum_probe(&op, -2.0, 1.0, &ProbeOptions::default()).unwrap();
    assert!(neg.measurements["resolvent_norm_1to1"] <= 0.5 + 1e-12);
    assert!(neg.check("positivity_bound").unwrap().pass);
    assert!(suite_spectrum_probe(&op, 1.0, 0.5, &ProbeOptions::default()).is_err());
}

#[test]
fn sector_real_axis_and_guards() {
    let op = grid_op(1, 9, 1.0, Boundary::Free);
    let real: Vec<Complex64> = [0.1, 1.0, 10.0].iter().map(|&r| Complex64::new(r, 0.0)).collect();
    let r = suite_resolvent_sector(&[&op], &real, 0.5, 0.0, &SectorOptions::default());
    // a single angle per radius leaves the angular slope undefined
    assert!(r.is_err());
    let mut z = Vec::new();
    for r in [0.1, 1.0, 10.0] {
        for th in [0.0, 0.5, 1.0, 1.3] {
            z.push(Complex64::from_polar(r, th));
        }
    }
    let rep = suite_resolvent_sector(&[&op], &z, 0.5, 0.0, &SectorOptions::default()).unwrap();
    let (tc, qc) = (2, 6);
    for row in rep.table.iter().filter(|row| row[tc] == 0.0) {
        // Markov resolvent: exactly 1/z² on both endpoints
        assert!((row[qc] - 1.0).abs() < 1e-9, "{row:?}");
    }
    assert!(rep.pass, "{:?}", rep.checks);
    let bad = [Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0), Complex64::new(100.0, 0.0)];
    assert!(suite_resolvent_sector(&[&op], &bad, 0.5, 0.0, &SectorOptions::default()).is_err());
}

#[test]
fn zero_multiplier_has_zero_ratio() {
    let op = grid_op(1, 9, 1.0, Boundary::Free);
    let r = suite_multiplier(&[&op], &MultiplierFunction::Zero, 2.0, &geom(0.1, 10.0, 5), 0.0, &MultiplierOptions::default())
        .unwrap();
    assert!(r.column("ratio").unwrap().iter().all(|v| *v == 0.0));
    assert!(suite_multiplier(&[&op], &MultiplierFunction::Gaussian, 2.0, &geom(0.1, 10.0, 5), 0.0, &Default::default())
        .is_err());
}

#[test]
fn dg_on_a_homogeneous_grid() {
    let op = grid_op(2, 24, 1.0, Boundary::Free);
    let space = op.space();
    let centers = [space.lattice().unwrap().index(&[3, 3]), space.lattice().unwrap().index(&[12, 12])];
    let pairs = pair_schedule(space, &centers, 1.0, &[1.0, 2.0, 4.0, 8.0, 12.0]).unwrap();
    let opts = DgOptions { speed: Some(2.0), ..Default::default() };
    let r = suite_dg_decay(&op, &geom(0.5, 30.0, 8), &pairs, &opts).unwrap();
    assert!(r.pass, "{:?}", r.checks);
    // one short gap cannot span a decade of distances
    let short = pair_schedule(space, &centers[..1], 1.0, &[1.0]).unwrap();
    assert!(suite_dg_decay(&op, &geom(0.5, 30.0, 8), &short, &opts).is_err());
}

#[test]
fn locality_suite_on_a_path() {
    let op = grid_op(1, 81, 1.0, Boundary::Free);
    let r = suite_locality(&op, &MultiplierFunction::Fa { a: 2.0 }, &[5.0, 10.0, 20.0], &LocalityOptions::default()).unwrap();
    assert!(r.pass, "{:?} {:?}", r.checks, r.parameters);
    assert!(suite_locality(&op, &MultiplierFunction::Gaussian, &[5.0], &Default::default()).is_err());
}

#[test]
fn subordination_suite_is_deterministic() {
    let opts = SubordinationOptions { envelope_window: Some((20.0, 60.0)), ..Default::default() };
    let a = suite_subordination(&[1.0], &[0.0, 0.5, 1.0, 2.0, 4.0], &opts).unwrap();
    let b = suite_subordination(&[1.0], &[0.0, 0.5, 1.0, 2.0, 4.0], &opts).unwrap();
    assert!(a.pass, "{:?}", a.checks);
    assert_eq!(a.to_json(), b.to_json());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip_preserves_every_bit(
        rows in prop::collection::vec((1e-300f64..1e300, -1e3f64..1e3), 1..20),
        tol in 1e-12f64..1.0,
    ) {
        let mut m = Measured::new(&["r", "leaked", "cone_radius"]);
        m.tol("leak", tol).param("speed", 2.0).param("slack", 0.1);
        for (a, b) in &rows {
            m.row(vec![*a, b.abs() * 1e-9, *b]);
        }
        let r = m.finish("locality").unwrap();
        let back = SuiteReport::from_json(&r.to_json()).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert!(back.is_consistent().unwrap());
    }
}
