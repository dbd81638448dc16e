use std::f64::consts::PI;

use nlsobolev::multiindex::factorial;
use nlsobolev::*;

fn sweep(name: &str, n: usize, m: usize, p: f64, h: f64, eps0: f64, count: usize) -> FunctionalSweep {
    let grid = Grid::new(&Domain::unit_cube(n).unwrap(), h).unwrap();
    let jet = Jet::analytic(CatalogFunction::parse(name, n).unwrap(), m);
    let spec = FunctionalSpec {
        kind: FunctionalKind::Bbm(Mollifier::power(n, m, p).unwrap()),
        m,
        p,
    };
    run_sweep(&spec, &jet, &grid, &geometric_schedule(eps0, count), &QuadratureConfig::default()).unwrap()
}

#[test]
fn sweep_limits_match_closed_forms() {
    let cases = [
        ("x", 1, 1, 2.0),
        ("x^2", 1, 1, 8.0 / 3.0),
        ("sin", 1, 1, 1.0 + 2f64.sin() / 2.0),
        ("x^3", 1, 2, 6.0),
    ];
    for (name, n, m, target) in cases {
        let s = sweep(name, n, m, 2.0, 1.0 / 256.0, 0.25, 4);
        let rel = (s.limit - target).abs() / target;
        assert!(rel < 0.01, "{name}: {} vs {target}", s.limit);
    }
}

#[test]
fn sphere_targets_match_closed_forms() {
    let s2 = 2f64.sin();
    let cases = [
        ("sin", 1, 1.0 + s2 / 2.0),
        ("xy", 2, 2.0 * PI / 3.0),
        ("sinxsiny", 2, 2.0 * PI * (0.5 + s2 / 4.0) * (0.5 - s2 / 4.0)),
    ];
    for (name, n, target) in cases {
        let grid = Grid::new(&Domain::unit_cube(n).unwrap(), 1.0 / 512.0).unwrap();
        let jet = Jet::analytic(CatalogFunction::parse(name, n).unwrap(), 1);
        let t = sphere_limit_target(&jet, &grid, 1, 2.0, &SphereRule::new(n).unwrap()).unwrap();
        assert!((t - target).abs() < 1e-5 * target, "{name}: {t} vs {target}");
    }
}

#[test]
fn cubic_vanishes_only_above_its_degree() {
    let s = sweep("x^3", 1, 4, 2.0, 1.0 / 128.0, 0.25, 3);
    assert_eq!(s.limit, 0.0);
    assert!(s.values.iter().all(|v| *v == 0.0));
    // at m = 3 the limit is Σ_± |f'''/3!|² = 2
    let s = sweep("x^3", 1, 3, 2.0, 1.0 / 256.0, 0.25, 4);
    assert!((s.limit - 2.0).abs() < 0.02, "{}", s.limit);
}

#[test]
fn polynomials_are_annihilated() {
    let cfg = QuadratureConfig::default();
    for n in 1..=2 {
        let h = if n == 1 { 1.0 / 64.0 } else { 1.0 / 16.0 };
        let grid = Grid::new(&Domain::unit_cube(n).unwrap(), h).unwrap();
        for m in 1..=3 {
            let terms: Vec<_> = enumerate_multiindices(n, m - 1).unwrap().into_iter().map(|a| (a, 1.0 + a.order() as f64)).collect();
            let f = CatalogFunction::polynomial(n, &terms).unwrap();
            let jet = Jet::analytic(f.clone(), m - 1);
            let rho = Mollifier::power(n, m, 2.0).unwrap();
            assert_eq!(bbm_functional(&jet, &grid, m, 2.0, &rho, 0.2, &cfg).unwrap(), 0.0);
            assert_eq!(difference_functional(&f, &grid, m, 2.0, &rho, 0.2, &cfg).unwrap().value, 0.0);
            assert_eq!(jet_condition_value(&jet, &grid, m, 2.0, 0.2, &cfg).unwrap(), 0.0);
            let coarse = Grid::new(&Domain::unit_cube(n).unwrap(), 2.0 * h).unwrap();
            assert_eq!(singular_remainder_integral(&jet, &coarse, m, 2.0, 3, &cfg).unwrap().value(), 0.0);
            let y = vec![0.5; n];
            assert_eq!(maximal_function(&f, &grid, &y, m, 2.0, &[0.3, 0.15]).unwrap().value, 0.0);
        }
    }
}

#[test]
fn vlc_witness_dominates_jet_condition() {
    // |R^{m−1}F(x,y)| ≤ |x−y|^m (a(x) + a(y)) with a ≡ sup‖D^m f‖/(2·m!)
    // gives jet_condition ≤ 2^p ω_{n−1}/(n+mp) ‖a‖_p^p
    let cfg = QuadratureConfig::default();
    for (name, n, m, p) in [("sin", 1, 1, 2.0), ("exp", 1, 2, 1.5), ("sinxsiny", 2, 1, 2.0)] {
        let h = if n == 1 { 1.0 / 256.0 } else { 1.0 / 48.0 };
        let grid = Grid::new(&Domain::unit_cube(n).unwrap(), h).unwrap();
        let f = CatalogFunction::parse(name, n).unwrap();
        let top = multiindices_of_order(n, m).unwrap();
        let sup = (0..grid.len())
            .map(|i| {
                top.iter()
                    .map(|a| factorial(m) / a.factorial() * f.derivative(a, grid.point(i)).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        let a = sup / (2.0 * factorial(m));
        let norm = a.powf(p) * grid.len() as f64 * grid.cell_volume();
        let bound = 2f64.powf(p) * sphere_measure(n) / (n as f64 + m as f64 * p) * norm;
        let jet = Jet::analytic(f, m - 1);
        for eps in geometric_schedule(0.25, 3) {
            let v = jet_condition_value(&jet, &grid, m, p, eps, &cfg).unwrap();
            assert!(v <= 2.0 * bound, "{name}: {v} > 2·{bound}");
        }
    }
}

#[test]
fn shifted_condition_tracks_jet_condition() {
    let cfg = QuadratureConfig::default();
    let grid = Grid::new(&Domain::unit_cube(1).unwrap(), 1.0 / 512.0).unwrap();
    let jet = Jet::analytic(CatalogFunction::parse("sin", 1).unwrap(), 2);
    let j = MultiIndex::unit(1, 0);
    let schedule = geometric_schedule(0.16, 4);
    let ratios: Vec<f64> = schedule
        .iter()
        .map(|&e| {
            let a = jet_condition_value_inner(&jet, &grid, 3, 2.0, e, 0.2, &cfg).unwrap();
            let b = shifted_jet_condition(&jet, &grid, 3, &j, 2.0, e, 0.2, &cfg).unwrap();
            b / a
        })
        .collect();
    assert!(ratios.iter().all(|r| r.is_finite() && *r <= 4.0 * ratios[0]), "{ratios:?}");
}

#[test]
fn detector_degree_sharpness() {
    let grid = Grid::new(&Domain::unit_cube(1).unwrap(), 1.0 / 128.0).unwrap();
    let mut cfg = DetectorConfig::new(geometric_schedule(0.25, 4));
    cfg.singular_h = Some(1.0 / 32.0);
    for m in 2..=3 {
        let name = if m == 2 { "x" } else { "x^2" };
        let f = CatalogFunction::parse(name, 1).unwrap();
        let at_m = detect_polynomial(&Jet::analytic(f.clone(), m - 1), &grid, m, 2.0, &cfg).unwrap();
        assert_eq!(at_m.verdict, Verdict::Polynomial);
        let below = detect_polynomial(&Jet::analytic(f, m - 2), &grid, m - 1, 2.0, &cfg).unwrap();
        assert_eq!(below.verdict, Verdict::NotPolynomial);
    }
}

#[test]
fn maximal_function_is_stable_for_smooth_entries() {
    let grid = Grid::new(&Domain::unit_cube(1).unwrap(), 1.0 / 1024.0).unwrap();
    let f = CatalogFunction::parse("sin", 1).unwrap();
    let coarse: Vec<f64> = (0..4).map(|j| 0.2 * 0.5f64.powi(j)).collect();
    let fine: Vec<f64> = (0..7).map(|j| 0.2 * 0.5f64.powf(j as f64 / 2.0)).collect();
    let a = maximal_profile(&f, &grid, 1, 2.0, &coarse, 16).unwrap();
    let b = maximal_profile(&f, &grid, 1, 2.0, &fine, 16).unwrap();
    let (na, nb) = (a.lp_norm(2.0), b.lp_norm(2.0));
    assert!(na.is_finite() && (na - nb).abs() < 0.05 * na, "{na} {nb}");
    assert!(a.unbounded.iter().all(|u| !u));
}
