use nlsobolev::whitney::GeometryReport;
use nlsobolev::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(d: &Domain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let o = d.outer();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: Vec<f64> = (0..d.dim()).map(|i| rng.random_range(o.lo()[i]..o.hi()[i])).collect();
        if d.contains_inner(&x) {
            out.push(x);
        }
    }
    out
}

fn test_domains() -> Vec<(&'static str, Domain)> {
    vec![
        ("interval", Domain::unit_cube(1).unwrap().with_margin(0.05).unwrap()),
        ("square", Domain::unit_cube(2).unwrap().with_margin(0.05).unwrap()),
        ("l-shape", Domain::l_shape().with_margin(0.02).unwrap()),
        ("square-with-hole", Domain::square_with_hole().with_margin(0.02).unwrap()),
    ]
}

#[test]
fn cube_properties_and_partition_sum() {
    for (name, d) in test_domains() {
        let pts = random_points(&d, 10_000, 7);
        for k in 3..=5 {
            let dec = decompose(&d, k, k + 4).unwrap();
            let report = dec.verify(&pts);
            assert!(report.passes(d.dim()), "{name} k={k}: {report:?}");
            assert!(report.max_overlap <= GeometryReport::overlap_bound(d.dim()));
            let pou = partition_of_unity(&dec);
            for x in pts.iter().filter(|x| dec.in_covered_region(x)) {
                let s: f64 = pou.weights_at(x).unwrap().iter().map(|(_, w)| w).sum();
                assert!((s - 1.0).abs() <= 1e-12, "{name}: {s}");
            }
        }
    }
}

#[test]
fn partition_derivatives_scale_with_cube_size() {
    // sup |D^β φ_i| · diam(Q_i)^{|β|} along x_1, measured by central
    // differences at 1/64 of the cube side
    let d = Domain::unit_cube(2).unwrap().with_margin(0.05).unwrap();
    let mut constants = Vec::new();
    for k in 3..=5 {
        let dec = decompose(&d, k, k + 3).unwrap();
        let pou = partition_of_unity(&dec);
        let mut c = [0.0f64; 3];
        for (i, cube) in dec.cubes().iter().enumerate().step_by(5) {
            let q = cube.dilated();
            let s = cube.side();
            let t = s / 64.0;
            for a in 0..24 {
                for b in 0..24 {
                    let x = [q.lo()[0] + (a as f64 + 0.5) * (q.hi()[0] - q.lo()[0]) / 24.0, q.lo()[1] + (b as f64 + 0.5) * (q.hi()[1] - q.lo()[1]) / 24.0];
                    let at = |dx: f64| pou.weight(i, &[x[0] + dx, x[1]]);
                    let d1 = (at(t) - at(-t)) / (2.0 * t);
                    let d2 = (at(t) - 2.0 * at(0.0) + at(-t)) / (t * t);
                    let diam = cube.diameter();
                    c[0] = c[0].max(at(0.0));
                    c[1] = c[1].max(d1.abs() * diam);
                    c[2] = c[2].max(d2.abs() * diam * diam);
                }
            }
        }
        constants.push(c);
    }
    for j in 0..3 {
        let v: Vec<f64> = constants.iter().map(|c| c[j]).collect();
        let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
        assert!(hi <= 2.0 * lo, "order {j}: {v:?}");
    }
}

#[test]
fn sine_reconstruction_rates() {
    let d = Domain::open_box(&[0.0], &[std::f64::consts::PI]).unwrap();
    let grid = Grid::new(&d, 0.5f64.powi(11)).unwrap();
    let inner = d.clone().with_margin(0.25).unwrap();
    let jet = Jet::analytic(CatalogFunction::parse("sin", 1).unwrap(), 1);
    let recs = whitney_sweep(&jet, &grid, &inner, &[3, 4, 5, 6, 7], 9, 1).unwrap();
    let diag = reconstruction_diagnostics(&jet, &recs, 2, 2.0).unwrap();
    for rate in &diag.rates {
        let expected = rate.alpha.order() as f64 - 2.0;
        assert!((rate.slope.unwrap() - expected).abs() <= 0.3, "{rate:?}");
    }
    assert!(diag.top_bounded);
}

#[test]
fn polynomial_jet_reconstructs_exactly() {
    let d = Domain::l_shape();
    let grid = Grid::new(&d, 1.0 / 128.0).unwrap();
    let f = CatalogFunction::parse("2-x+3y", 2).unwrap();
    let jet = Jet::analytic(f.clone(), 1);
    let recs = whitney_sweep(&jet, &grid, &d.clone().with_margin(0.03).unwrap(), &[2, 3, 4], 5, 1).unwrap();
    let diag = reconstruction_diagnostics(&jet, &recs, 2, 2.0).unwrap();
    assert!(diag.rates.iter().all(|r| r.slope.is_none() && r.errors.iter().all(|e| *e < 1e-10)), "{diag:?}");
}

#[test]
fn export_round_trips_through_json() {
    let d = Domain::square_with_hole().with_margin(0.02).unwrap();
    let dec = decompose(&d, 3, 6).unwrap();
    let e = dec.export();
    let s = serde_json::to_string(&e).unwrap();
    let back: nlsobolev::whitney::DecompositionExport = serde_json::from_str(&s).unwrap();
    assert_eq!(back, e);
    assert_eq!(e.cubes.len(), dec.len());
}
