//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use nlsobolev::multiindex::factorial;
use nlsobolev::whitney::GeometryReport;
use nlsobolev::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e(err: nlsobolev::Error) -> String {
    err.to_string()
}

fn power_sweep(f: &CatalogFunction, grid: &Grid, m: usize, p: f64, schedule: &[f64]) -> std::result::Result<FunctionalSweep, String> {
    let n = f.dim();
    let spec = FunctionalSpec {
        kind: FunctionalKind::Bbm(Mollifier::power(n, m, p).map_err(e)?),
        m,
        p,
    };
    run_sweep(&spec, &Jet::analytic(f.clone(), m - 1), grid, schedule, &QuadratureConfig::default()).map_err(e)
}

fn target(f: &CatalogFunction, grid: &Grid, m: usize, p: f64) -> std::result::Result<f64, String> {
    let rule = SphereRule::new(f.dim()).map_err(e)?;
    sphere_limit_target(&Jet::analytic(f.clone(), m), grid, m, p, &rule).map_err(e)
}

fn criterion_1() -> Outcome {
    let s2 = 2f64.sin();
    // closed forms of ∫_Ω ∫_{S^{n−1}} |∇f·e|² dσ dx on the unit cube
    let cases = [
        ("x", 1, 2.0),
        ("x^2", 1, 8.0 / 3.0),
        ("sin", 1, 1.0 + s2 / 2.0),
        ("xy", 2, 2.0 * PI / 3.0),
        ("sinxsiny", 2, 2.0 * PI * (0.5 + s2 / 4.0) * (0.5 - s2 / 4.0)),
    ];
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for (name, n, closed) in cases {
        let start = Instant::now();
        let h = if n == 1 { 1.0 / 512.0 } else { 1.0 / 128.0 };
        let f = CatalogFunction::parse(name, n).map_err(e)?;
        let grid = Grid::new(&Domain::unit_cube(n).map_err(e)?, h).map_err(e)?;
        let t = target(&f, &grid, 1, 2.0)?;
        ensure((t - closed).abs() <= 1e-4 * closed, format!("{name}: target {t} vs closed form {closed}"))?;
        let schedule = if n == 1 { geometric_schedule(0.25, 5) } else { geometric_schedule(0.25, 4) };
        let sweep = power_sweep(&f, &grid, 1, 2.0, &schedule)?;
        let rel = (sweep.limit - t).abs() / t;
        let secs = start.elapsed().as_secs_f64();
        ensure(rel < 0.03, format!("{name}: limit {} vs {t} ({rel:.2e})", sweep.limit))?;
        ensure(secs < 60.0, format!("{name}: {secs:.1} s"))?;
        worst = worst.max(rel);
        slowest = slowest.max(secs);
    }
    Ok(format!("5 cases, worst relative error {worst:.2e}, slowest {slowest:.2} s"))
}

fn criterion_2() -> Outcome {
    let grid = Grid::new(&Domain::unit_cube(1).map_err(e)?, 1.0 / 512.0).map_err(e)?;
    let f = CatalogFunction::parse("x^3", 1).map_err(e)?;
    // ∫_0^1 Σ_± |f''(x)/2|² dx = ∫ 18x² = 6
    let s = power_sweep(&f, &grid, 2, 2.0, &geometric_schedule(0.25, 5))?;
    let rel = (s.limit - 6.0).abs() / 6.0;
    ensure(rel < 0.03, format!("m=2: limit {} vs 6", s.limit))?;
    // zero limit below the noise floor once x³ lies in the annihilated
    // class, i.e. at m = 4; at m = 3 the limit is Σ_± |f'''/3!|² = 2
    let schedule = geometric_schedule(0.25, 4);
    let mut cfg = DetectorConfig::new(schedule.clone());
    cfg.singular_h = Some(1.0 / 64.0);
    let at4 = detect_polynomial(&Jet::analytic(f.clone(), 3), &grid, 4, 2.0, &cfg).map_err(e)?;
    ensure(at4.sweep.limit <= at4.theta_zero, format!("m=4: limit {} above θ_zero {}", at4.sweep.limit, at4.theta_zero))?;
    ensure(at4.verdict == Verdict::Polynomial, format!("m=4: verdict {:?}", at4.verdict))?;
    let at3 = power_sweep(&f, &grid, 3, 2.0, &schedule)?;
    ensure((at3.limit - 2.0).abs() < 0.06, format!("m=3: limit {} vs 2", at3.limit))?;
    Ok(format!(
        "m=2 limit {:.4} (rel {rel:.2e}); m=4 limit {} ≤ θ_zero {:.1e}; m=3 limit {:.4} vs 2 (nonzero, degree 3 is not below m)",
        s.limit, at4.sweep.limit, at4.theta_zero, at3.limit
    ))
}

fn criterion_3() -> Outcome {
    let cfg = QuadratureConfig::default();
    let mut checked = 0;
    for n in 1..=2 {
        let h = if n == 1 { 1.0 / 64.0 } else { 1.0 / 16.0 };
        let domain = Domain::unit_cube(n).map_err(e)?;
        let grid = Grid::new(&domain, h).map_err(e)?;
        let coarse = Grid::new(&domain, 2.0 * h).map_err(e)?;
        for m in 1..=3 {
            let mut fs = Vec::new();
            for name in ["x", "x^2", "x^3", "xy"] {
                if let Ok(f) = CatalogFunction::parse(name, n) {
                    if f.polynomial_degree().is_some_and(|d| d <= m - 1) {
                        fs.push(f);
                    }
                }
            }
            let terms: Vec<_> = enumerate_multiindices(n, m - 1).map_err(e)?.into_iter().map(|a| (a, 0.5 - a.order() as f64)).collect();
            fs.push(CatalogFunction::polynomial(n, &terms).map_err(e)?);
            for f in fs {
                let jet = Jet::analytic(f.clone(), m - 1);
                let rho = Mollifier::power(n, m, 2.0).map_err(e)?;
                let y = vec![0.5; n];
                let values = [
                    bbm_functional(&jet, &grid, m, 2.0, &rho, 0.2, &cfg).map_err(e)?,
                    difference_functional(&f, &grid, m, 2.0, &rho, 0.2, &cfg).map_err(e)?.value,
                    singular_remainder_integral(&jet, &coarse, m, 2.0, 3, &cfg).map_err(e)?.value(),
                    jet_condition_value(&jet, &grid, m, 2.0, 0.2, &cfg).map_err(e)?,
                    maximal_function(&f, &grid, &y, m, 2.0, &[0.3, 0.15]).map_err(e)?.value,
                ];
                ensure(values.iter().all(|v| *v == 0.0), format!("{} n={n} m={m}: {values:?}", f.name()))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} polynomials × 5 functionals exactly 0"))
}

fn criterion_4() -> Outcome {
    let grid = Grid::new(&Domain::unit_cube(1).map_err(e)?, 1.0 / 128.0).map_err(e)?;
    let mut cfg = DetectorConfig::new(geometric_schedule(0.25, 4));
    cfg.singular_h = Some(1.0 / 32.0);
    for m in 2..=3 {
        let f = CatalogFunction::parse(if m == 2 { "x" } else { "x^2" }, 1).map_err(e)?;
        let at = detect_polynomial(&Jet::analytic(f.clone(), m - 1), &grid, m, 2.0, &cfg).map_err(e)?;
        ensure(at.verdict == Verdict::Polynomial, format!("x^{} at m={m}: {:?}", m - 1, at.verdict))?;
        let below = detect_polynomial(&Jet::analytic(f, m - 2), &grid, m - 1, 2.0, &cfg).map_err(e)?;
        ensure(below.verdict == Verdict::NotPolynomial, format!("x^{} at m={}: {:?}", m - 1, m - 1, below.verdict))?;
    }
    let coarse = Grid::new(&Domain::unit_cube(1).map_err(e)?, 1.0 / 32.0).map_err(e)?;
    let jet = Jet::analytic(CatalogFunction::parse("x^2", 1).map_err(e)?, 1);
    let s = singular_remainder_integral(&jet, &coarse, 2, 1.0, 5, &QuadratureConfig::default()).map_err(e)?;
    let sustained = s.growth_ratios.iter().all(|r| *r > 1.5);
    ensure(s.divergent && sustained, format!("x², m=2, p=1: ratios {:?}", s.growth_ratios))?;
    let ratios: Vec<String> = s.growth_ratios.iter().map(|r| format!("{r:.3}")).collect();
    Ok(format!("sharp at m=2,3; x² p=1 growth ratios [{}]", ratios.join(", ")))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let d = Domain::open_box(&[0.0], &[PI]).map_err(e)?;
    let grid = Grid::new(&d, 0.5f64.powi(11)).map_err(e)?;
    let inner = d.clone().with_margin(0.25).map_err(e)?;
    let jet = Jet::analytic(CatalogFunction::parse("sin", 1).map_err(e)?, 2);
    let recs = whitney_sweep(&jet, &grid, &inner, &[3, 4, 5, 6, 7], 9, 1).map_err(e)?;
    let diag = reconstruction_diagnostics(&jet, &recs, 2, 2.0).map_err(e)?;
    let mut parts = Vec::new();
    for rate in &diag.rates {
        let expected = rate.alpha.order() as f64 - 2.0;
        let slope = rate.slope.ok_or("no slope for an inexact reconstruction")?;
        ensure((slope - expected).abs() <= 0.3, format!("α={}: slope {slope} vs {expected}", rate.alpha))?;
        parts.push(format!("α={} slope {slope:.3}", rate.alpha));
    }
    let (_, top) = &diag.top_norms[0];
    ensure(diag.top_bounded, format!("top-order norms {top:?}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, format!("{secs:.1} s"))?;
    Ok(format!("{}; |α|=2 norms {:.3} → {:.3}; {secs:.2} s", parts.join(", "), top[0], top[top.len() - 1]))
}

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

fn criterion_6() -> Outcome {
    let domains = [
        ("interval", Domain::unit_cube(1).map_err(e)?.with_margin(0.05).map_err(e)?),
        ("square", Domain::unit_cube(2).map_err(e)?.with_margin(0.05).map_err(e)?),
        ("l-shape", Domain::l_shape().with_margin(0.02).map_err(e)?),
        ("square-with-hole", Domain::square_with_hole().with_margin(0.02).map_err(e)?),
    ];
    let mut worst: f64 = 0.0;
    let mut weighed = 0usize;
    for (name, d) in &domains {
        let pts = random_points(d, 10_000, 7);
        for k in 3..=5 {
            let dec = decompose(d, k, k + 4).map_err(e)?;
            let report = dec.verify(&pts);
            ensure(report.passes(d.dim()), format!("{name} k={k}: {report:?}"))?;
            ensure(report.max_overlap <= GeometryReport::overlap_bound(d.dim()), format!("{name} k={k}: overlap {}", report.max_overlap))?;
            let pou = partition_of_unity(&dec);
            for x in pts.iter().filter(|x| dec.in_covered_region(x)) {
                let s: f64 = pou.weights_at(x).map_err(e)?.iter().map(|(_, w)| w).sum();
                worst = worst.max((s - 1.0).abs());
                weighed += 1;
            }
        }
    }
    ensure(worst <= 1e-12, format!("partition sum off by {worst:e}"))?;
    Ok(format!("4 domains × 3 levels; max |Σφ − 1| = {worst:.1e} over {weighed} covered samples"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0007);
    let cfg = QuadratureConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.random_range(1..=2usize);
        let m = rng.random_range(1..=2usize);
        let p = [1.0, 1.5, 2.0, 3.0][rng.random_range(0..4)];
        let eps = rng.random_range(0.1..0.3);
        let names: &[&str] = if n == 1 { &["sin", "exp", "x^3", "cos"] } else { &["sinxsiny", "xy", "exp(x)*exp(y)"] };
        let name = names[rng.random_range(0..names.len())];
        let h = if n == 1 { 1.0 / 128.0 } else { 1.0 / 24.0 };
        let grid = Grid::new(&Domain::unit_cube(n).map_err(e)?, h).map_err(e)?;
        let jet = Jet::analytic(CatalogFunction::parse(name, n).map_err(e)?, m);
        let rho = Mollifier::power(n, m, p).map_err(e)?;
        let a = bbm_functional(&jet, &grid, m, p, &rho, eps, &cfg).map_err(e)?;
        let b = jet_condition_value(&jet, &grid, m, p, eps, &cfg).map_err(e)?;
        let c = n as f64 + m as f64 * p;
        let rel = (a - c * b).abs() / a.abs();
        ensure(rel <= 1e-12, format!("{name} n={n} m={m} p={p} ε={eps}: {rel:e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("10 random configs, worst relative gap {worst:.1e}"))
}

fn criterion_8() -> Outcome {
    // a ≡ sup‖D^m f‖/(2·m!) witnesses |R^{m−1}F(x,y)| ≤ |x−y|^m (a(x) + a(y)),
    // so the condition is at most 2^p ω_{n−1}/(n+mp) ‖a‖_p^p
    let cfg = QuadratureConfig::default();
    let mut worst: f64 = 0.0;
    for (name, n, m, p) in [("sin", 1, 1, 2.0), ("exp", 1, 2, 1.5), ("cos", 1, 3, 2.0), ("sinxsiny", 2, 1, 2.0), ("exp(x)*exp(y)", 2, 2, 1.0)] {
        let h = if n == 1 { 1.0 / 256.0 } else { 1.0 / 48.0 };
        let grid = Grid::new(&Domain::unit_cube(n).map_err(e)?, h).map_err(e)?;
        let f = CatalogFunction::parse(name, n).map_err(e)?;
        let top = multiindices_of_order(n, m).map_err(e)?;
        let sup = (0..grid.len())
            .map(|i| top.iter().map(|a| factorial(m) / a.factorial() * f.derivative(a, grid.point(i)).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let a = sup / (2.0 * factorial(m));
        let bound = 2f64.powf(p) * sphere_measure(n) / (n as f64 + m as f64 * p) * a.powf(p) * grid.len() as f64 * grid.cell_volume();
        let jet = Jet::analytic(f, m - 1);
        for eps in geometric_schedule(0.25, 3) {
            let v = jet_condition_value(&jet, &grid, m, p, eps, &cfg).map_err(e)?;
            ensure(v <= 2.0 * bound, format!("{name} m={m} ε={eps}: {v} > 2·{bound}"))?;
            worst = worst.max(v / bound);
        }
    }
    Ok(format!("5 jets × 3 scales, max value/bound {worst:.3}"))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0009);
    for n in 1..=3 {
        let rule = SphereRule::new(n).map_err(e)?;
        ensure((rule.total_weight() - sphere_measure(n)).abs() <= 1e-10, format!("n={n}: total weight {}", rule.total_weight()))?;
    }
    let mut cases = 0;
    for n in 1..=2 {
        let rule = SphereRule::new(n).map_err(e)?;
        for m in 1..=2 {
            let k = multiindices_of_order(n, m).map_err(e)?.len();
            let zero = CoefficientVector::zero(n, m).map_err(e)?;
            for p in [1.0, 2.0] {
                ensure(coeff_sphere_norm(&zero, p, &rule).map_err(e)? == 0.0, "zero vector has nonzero norm")?;
                let probe = norm_equivalence_probe(m, n, p, &rule, 1000).map_err(e)?;
                ensure(probe.c_lower > 0.0, format!("n={n} m={m} p={p}: c_lower {}", probe.c_lower))?;
                for _ in 0..1000 {
                    let mut draw = || CoefficientVector::new(n, m, (0..k).map(|_| rng.random_range(-3.0..3.0)).collect()).map_err(e);
                    let (u, v) = (draw()?, draw()?);
                    let lambda = rng.random_range(-5.0..5.0);
                    let nu = coeff_sphere_norm(&u, p, &rule).map_err(e)?;
                    let nv = coeff_sphere_norm(&v, p, &rule).map_err(e)?;
                    let nuv = coeff_sphere_norm(&u.add(&v).map_err(e)?, p, &rule).map_err(e)?;
                    let nl = coeff_sphere_norm(&u.scaled(lambda), p, &rule).map_err(e)?;
                    ensure(nuv <= (nu + nv) * (1.0 + 1e-12), format!("triangle: {nuv} > {nu} + {nv}"))?;
                    ensure((nl - lambda.abs() * nu).abs() <= 1e-12 * nl.max(f64::MIN_POSITIVE), format!("homogeneity: {nl} vs |{lambda}|·{nu}"))?;
                    ensure(u.euclidean_norm() == 0.0 || nu > 0.0, "positivity")?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} random vectors over 8 (n,m,p); sphere weights exact to 1e-10 for n=1..3"))
}

fn run_binary(config: &Path, out: &Path, threads: usize) -> std::result::Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_nlsobolev"))
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", &threads.to_string()])
        .stderr(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), format!("{} exited with {status}", config.display()))
}

fn csv_cells(path: &Path) -> std::result::Result<Vec<Vec<String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text.lines().map(|l| l.split(',').map(String::from).collect()).collect())
}

fn criterion_10() -> Outcome {
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&configs)
        .map_err(|e| e.to_string())?
        .filter_map(|d| d.ok().map(|d| d.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    ensure(paths.len() == 7, format!("expected 7 reference configs, found {}", paths.len()))?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for path in &paths {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let dirs = [tmp.path().join(format!("{stem}-1")), tmp.path().join(format!("{stem}-8"))];
        run_binary(path, &dirs[0], 1)?;
        run_binary(path, &dirs[1], 8)?;
        let read = |d: &Path| std::fs::read(d.join("summary.json")).map_err(|e| e.to_string());
        ensure(read(&dirs[0])? == read(&dirs[1])?, format!("{stem}: summary.json differs"))?;
        let a = csv_cells(&dirs[0].join(format!("{stem}.csv")))?;
        let b = csv_cells(&dirs[1].join(format!("{stem}.csv")))?;
        ensure(a.len() == b.len() && a[0] == b[0], format!("{stem}: CSV shape differs"))?;
        for (ra, rb) in a.iter().zip(&b).skip(1) {
            ensure(ra.len() == rb.len(), format!("{stem}: row length differs"))?;
            for (x, y) in ra.iter().zip(rb) {
                let (x, y): (f64, f64) = (x.parse().map_err(|_| format!("{stem}: bad cell {x}"))?, y.parse().map_err(|_| format!("{stem}: bad cell {y}"))?);
                let rel = if x == y { 0.0 } else { (x - y).abs() / x.abs().max(y.abs()) };
                ensure(rel <= 1e-12, format!("{stem}: cell {x} vs {y}"))?;
                worst = worst.max(rel);
            }
        }
    }
    Ok(format!("{} configs, summaries byte-identical, worst CSV drift {worst:.1e}", paths.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("lemma identity suite", criterion_1),
        ("higher-order identity", criterion_2),
        ("polynomial annihilation", criterion_3),
        ("detector sharpness", criterion_4),
        ("Whitney reconstruction rates", criterion_5),
        ("Whitney geometry", criterion_6),
        ("equivalence of functionals", criterion_7),
        ("VLC implies averaged condition", criterion_8),
        ("norm module properties", criterion_9),
        ("determinism across thread counts", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
