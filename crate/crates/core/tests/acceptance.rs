mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{g1, g2, mixed, random_admissible, random_m0_curve, rng};
use rand::Rng;
use rayon::prelude::*;
use sg_core::admissibility::{
    admissibility_check, band_clearance, divisor_from_polynomial, enumerate_components,
    find_witness, polynomial_from_divisor, PairSelector, RealPolynomial, TopologicalType,
};
use sg_core::averaging::{cycle_average_g1, orbit_average, SymmetricFunctional};
use sg_core::dynamics::{
    evolve, evolve_to, pde_residual, potential, winding_density, Direction, DivisorState,
    EvolveOptions,
};
use sg_core::periods::{
    b_periods, cycle_paths, gap_loop, normalize_dp, period_integral, CycleBasis, CycleKind,
    Periods, QuadratureOptions,
};
use sg_core::spectral_curve::SpectralCurve;
use sg_core::Complex64;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn divisor_of(curve: &SpectralCurve, t: &TopologicalType) -> sg_core::admissibility::Divisor {
    let p = find_witness(curve, t).unwrap();
    divisor_from_polynomial(curve, &p, &PairSelector::default()).unwrap()
}

fn zero_charge() -> Outcome {
    let mut r = rng(1);
    let curves: Vec<SpectralCurve> = (0..10)
        .map(|i| random_m0_curve(&mut r, 1 + i % 3))
        .collect();
    let rows: Vec<Result<(f64, f64, f64), String>> = curves
        .par_iter()
        .map(|c| {
            let t = TopologicalType::new(Vec::new());
            let n = Periods::compute(c)
                .map_err(|e| e.to_string())?
                .charge(&t)
                .unwrap()
                .n_bar;
            let w = winding_density(c, &divisor_of(c, &t), 500.0).map_err(|e| e.to_string())?;
            Ok((n, w.smoothed, w.smoothed_band))
        })
        .collect();
    let mut worst = 0.0f64;
    for (c, row) in curves.iter().zip(rows) {
        let (n, w, band) = row?;
        ensure(n.abs() <= 1e-10, || {
            format!("n̄ = {n:e} on {:?}", c.branch_points())
        })?;
        ensure(w.abs() <= band, || {
            format!(
                "winding {w:e} outside band {band:e} on {:?}",
                c.branch_points()
            )
        })?;
        worst = worst.max(w.abs());
    }
    Ok(format!("10 curves, max |winding| {worst:.1e}"))
}

fn formula_vs_winding() -> Outcome {
    let cases: Vec<(SpectralCurve, TopologicalType)> = [g1(), g2()]
        .into_iter()
        .flat_map(|c| {
            TopologicalType::all(c.m())
                .into_iter()
                .map(move |t| (c.clone(), t))
        })
        .collect();
    let rows: Vec<Result<String, String>> = cases
        .par_iter()
        .map(|(c, t)| {
            let n = Periods::compute(c).unwrap().charge(t).unwrap().n_bar;
            let w = winding_density(c, &divisor_of(c, t), 2000.0).map_err(|e| e.to_string())?;
            let rel = (n - w.smoothed).abs() / n.abs().max(1e-3);
            let plain = (n - w.density).abs() / n.abs().max(1e-3);
            let line = format!(
                "g={} {t}: formula {n:.8} smoothed {:.8} (rel {rel:.1e}) plain {:.8} (rel {plain:.1e})",
                c.genus(),
                w.smoothed,
                w.density
            );
            ensure(rel <= 2e-2, || line.clone())?;
            Ok(line)
        })
        .collect();
    let lines = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(lines.join("; "))
}

fn pde() -> Outcome {
    let c = g1();
    let d = divisor_from_polynomial(
        &c,
        &RealPolynomial::constant(1, 2.0),
        &PairSelector::default(),
    )
    .unwrap();
    let coarse = pde_residual(&c, &d, 200, 200, 0.01).map_err(|e| e.to_string())?;
    let fine = pde_residual(&c, &d, 400, 400, 0.005).map_err(|e| e.to_string())?;
    let ratio = coarse / fine;
    let msg = format!("residual {coarse:.3e} at h=0.01, {fine:.3e} at h=0.005, ratio {ratio:.2}");
    ensure(coarse <= 1e-3 && ratio >= 3.0, || msg.clone())?;
    Ok(msg)
}

fn admissibility_suite() -> Outcome {
    let c = g1();
    let expected = [
        (0.5, false, false),
        (1.0, true, true),
        (2.0, true, false),
        (3.0, true, true),
        (4.0, false, false),
    ];
    for (k, adm, boundary) in expected {
        let v = admissibility_check(&c, &RealPolynomial::constant(1, k)).unwrap();
        ensure(v.admissible == adm && v.boundary == boundary, || {
            format!(
                "P ≡ {k}: admissible {} boundary {}",
                v.admissible, v.boundary
            )
        })?;
    }
    let mut r = rng(4);
    let mut checked = 0;
    for curve in [g1(), g2(), mixed()] {
        let sample = random_admissible(&curve, 100, &mut r);
        for (i, (p, t)) in sample.iter().enumerate() {
            let d = divisor_from_polynomial(&curve, p, &PairSelector::default()).unwrap();
            ensure(d.violations(&curve).is_empty(), || {
                format!("{p:?}: {:?}", d.violations(&curve))
            })?;
            for pt in &d.points {
                if pt.lambda.im != 0.0 {
                    continue;
                }
                let x = pt.lambda.re;
                let gap = (1..=curve.m()).find(|&k| {
                    let (lo, hi) = curve.gap(k);
                    x > lo && x < hi
                });
                let Some(k) = gap else {
                    return Err(format!("{p:?}: real point {x} outside every gap"));
                };
                ensure(pt.mu.re.signum() == -(t.signs()[k - 1] as f64), || {
                    format!("{p:?}: μ = {} in gap {k} for type {t}", pt.mu)
                })?;
            }
            let partner = sample[i + 1..]
                .iter()
                .chain(&sample[..i])
                .find(|(_, u)| u == t)
                .map(|(q, _)| q.clone())
                .unwrap_or_else(|| find_witness(&curve, t).unwrap());
            for s in 1..=9 {
                let mix = p.lerp(&partner, s as f64 / 10.0);
                let v = admissibility_check(&curve, &mix).unwrap();
                ensure(
                    v.admissible && v.topological_type.as_ref() == Some(t),
                    || format!("convex combination {mix:?} of type {t} fails"),
                )?;
            }
            checked += 1;
        }
    }
    Ok(format!(
        "five constants classified; {checked} random polynomials, 0 violations"
    ))
}

fn flow_invariants() -> Outcome {
    let cases: Vec<(SpectralCurve, TopologicalType)> = [g1(), g2()]
        .into_iter()
        .flat_map(|c| {
            TopologicalType::all(c.m())
                .into_iter()
                .map(move |t| (c.clone(), t))
        })
        .collect();
    let rows: Vec<Result<(usize, f64, f64), String>> = cases
        .par_iter()
        .map(|(c, t)| {
            let traj = evolve(c, &divisor_of(c, t), Direction::X, 50.0, 1e-10)
                .map_err(|e| e.to_string())?;
            let mut clearance = f64::INFINITY;
            let mut modulus = 0.0f64;
            for (s, state) in traj.s.iter().zip(&traj.states) {
                let d = state.divisor();
                let (p, _) = polynomial_from_divisor(c, &d).map_err(|e| format!("x = {s}: {e}"))?;
                let v = admissibility_check(c, &p).unwrap();
                ensure(
                    v.admissible && v.topological_type.as_ref() == Some(t),
                    || format!("g={} {t}: x = {s}: admissibility lost ({p:?})", c.genus()),
                )?;
                for l in d.lambdas() {
                    clearance = clearance.min(band_clearance(c, l));
                }
                modulus = modulus.max((potential(c, &d).norm() - 1.0).abs());
            }
            ensure(clearance > 0.0, || {
                format!("g={} {t}: divisor reached a band", c.genus())
            })?;
            ensure(modulus <= 1e-8, || {
                format!("g={} {t}: ||e^iu| − 1| = {modulus:e}", c.genus())
            })?;
            Ok((traj.s.len(), clearance, modulus))
        })
        .collect();
    let mut steps = 0;
    let mut clearance = f64::INFINITY;
    let mut modulus = 0.0f64;
    for row in rows {
        let (n, cl, md) = row?;
        steps += n;
        clearance = clearance.min(cl);
        modulus = modulus.max(md);
    }
    Ok(format!(
        "{steps} accepted steps, min clearance {clearance:.3e}, max ||e^iu|−1| {modulus:.1e}"
    ))
}

fn jitter(basis: &CycleBasis, amount: f64, seed: u64) -> CycleBasis {
    let mut r = rng(seed);
    let mut out = basis.clone();
    for path in &mut out.a_paths {
        let fixed: Vec<usize> = match path.kind {
            CycleKind::Loop => vec![0, path.vertices.len() - 1],
            CycleKind::DoubledArc { anchor } => vec![0, anchor, path.vertices.len() - 1],
            CycleKind::GapOval { .. } => (0..path.vertices.len()).collect(),
        };
        for (i, v) in path.vertices.iter_mut().enumerate() {
            if !fixed.contains(&i) {
                *v +=
                    Complex64::from_polar(amount * r.random::<f64>(), 2.0 * PI * r.random::<f64>());
            }
        }
    }
    out
}

fn period_machinery() -> Outcome {
    let opts = QuadratureOptions::default();
    let doubled = QuadratureOptions {
        gl_nodes: 32,
        cheb_nodes: 64,
        ..opts
    };
    let mut worst = [0.0f64; 5];
    for (ci, curve) in [g1(), g2(), mixed()].iter().enumerate() {
        let base = Periods::compute(curve).map_err(|e| e.to_string())?;
        let residual = base.dp.max_a_residual();
        let im = base.u.iter().map(|u| u.im.abs()).fold(0.0, f64::max);
        ensure(residual <= 1e-8 && im <= 1e-8, || {
            format!("curve {ci}: a-residual {residual:e}, Im U {im:e}")
        })?;

        let basis = cycle_paths(curve).unwrap();
        let moved = jitter(&basis, 0.1 * basis.clearance, 10 + ci as u64);
        let dp = normalize_dp(curve, &moved, &opts).map_err(|e| e.to_string())?;
        let u = b_periods(curve, &moved, &dp, &opts).map_err(|e| e.to_string())?;
        let mut homotopy = dp
            .coeffs
            .iter()
            .zip(&base.dp.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        for (a, b) in u.iter().zip(&base.u) {
            homotopy = homotopy.max((a - b).norm());
        }
        // b-periods over contours around the gaps instead of the real ovals.
        let num = base.dp.numerator();
        for k in 1..=curve.m() {
            let mut lp = gap_loop(curve, &basis, k).map_err(|e| e.to_string())?;
            let last = lp.vertices.len() - 1;
            let mut r = rng(100 + k as u64);
            for v in &mut lp.vertices[1..last] {
                *v += Complex64::from_polar(
                    0.1 * basis.clearance * r.random::<f64>(),
                    2.0 * PI * r.random::<f64>(),
                );
            }
            let z = period_integral(curve, &num, &lp, &opts).map_err(|e| e.to_string())?;
            homotopy = homotopy.max((-z / (2.0 * PI) - base.u[k - 1]).norm());
        }
        ensure(homotopy <= 1e-8, || {
            format!("curve {ci}: homotopy change {homotopy:e}")
        })?;

        let fine = Periods::compute_with(curve, &doubled).map_err(|e| e.to_string())?;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        let mut nodes = base
            .dp
            .coeffs
            .iter()
            .zip(&fine.dp.coeffs)
            .map(|(&a, &b)| if b == 0.0 { a.abs() } else { rel(a, b) })
            .fold(0.0, f64::max);
        for (a, b) in fine.u.iter().zip(&base.u) {
            nodes = nodes.max((a - b).norm() / b.norm());
        }
        ensure(nodes <= 1e-9, || {
            format!("curve {ci}: node doubling change {nodes:e}")
        })?;
        for (w, v) in worst.iter_mut().zip([residual, im, homotopy, nodes, 0.0]) {
            *w = w.max(v);
        }
    }
    Ok(format!(
        "a-residual {:.1e}, Im U {:.1e}, homotopy {:.1e}, node doubling {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn averaging() -> Outcome {
    let c = g1();
    let types = TopologicalType::all(1);
    let divisors: Vec<_> = types.iter().map(|t| divisor_of(&c, t)).collect();

    let mut ux = Vec::new();
    for (t, d) in types.iter().zip(&divisors) {
        let f = SymmetricFunctional::from_name("ux").unwrap();
        let a = orbit_average(&c, d, &f, 200.0).map_err(|e| e.to_string())?;
        let w = winding_density(&c, d, 200.0).map_err(|e| e.to_string())?;
        let gap = (a.value.re - 2.0 * PI * w.smoothed).abs();
        let band = a.error_band + 2.0 * PI * w.smoothed_band;
        ensure(gap <= band, || {
            format!(
                "{t}: ux {} vs 2πw {} (band {band:e})",
                a.value,
                2.0 * PI * w.smoothed
            )
        })?;
        ux.push(a.value.re);
    }
    ensure(ux[0] * ux[1] < 0.0, || {
        format!("ux averages {ux:?} do not have opposite signs")
    })?;

    let jobs: Vec<(SymmetricFunctional, usize)> = SymmetricFunctional::registry()
        .into_iter()
        .flat_map(|f| (0..types.len()).map(move |i| (f, i)))
        .collect();
    let results: Vec<Result<(Complex64, f64, Complex64), String>> = jobs
        .par_iter()
        .map(|&(f, i)| {
            let horizon = if f.to_string().starts_with("ham") {
                100.0
            } else {
                200.0
            };
            let a = orbit_average(&c, &divisors[i], &f, horizon).map_err(|e| e.to_string())?;
            let cy = cycle_average_g1(&c, &types[i], &f).map_err(|e| e.to_string())?;
            Ok((a.value, a.error_band, cy))
        })
        .collect();
    let mut cycle_gap = 0.0f64;
    let mut component_gap = 0.0f64;
    let mut per_f: Vec<(SymmetricFunctional, Vec<Complex64>)> = Vec::new();
    for (&(f, _), res) in jobs.iter().zip(results) {
        let (value, _band, cy) = res?;
        let d = (value - cy).norm();
        ensure(d <= 1e-4, || format!("{f}: orbit {value} vs cycle {cy}"))?;
        cycle_gap = cycle_gap.max(d);
        match per_f.iter_mut().find(|(g, _)| *g == f) {
            Some((_, v)) => v.push(value),
            None => per_f.push((f, vec![value])),
        }
    }
    let mut symmetric = 0;
    for (f, values) in &per_f {
        if f.sigma_symmetric() {
            let d = (values[0] - values[1]).norm();
            ensure(d <= 1e-4, || {
                format!("{f}: components {} vs {}", values[0], values[1])
            })?;
            component_gap = component_gap.max(d);
            symmetric += 1;
        }
    }
    Ok(format!(
        "ux {:.8}/{:.8}; {symmetric} σ-symmetric functionals agree to {component_gap:.1e}; cycle vs orbit {cycle_gap:.1e}",
        ux[0], ux[1]
    ))
}

fn round_trips() -> Outcome {
    let mut r = rng(8);
    let mut poly_err = 0.0f64;
    for curve in [g1(), g2(), mixed()] {
        for (p, _) in random_admissible(&curve, 100, &mut r) {
            let d = divisor_from_polynomial(&curve, &p, &PairSelector::default()).unwrap();
            let (q, im) = polynomial_from_divisor(&curve, &d).map_err(|e| e.to_string())?;
            let err = p.max_coeff_diff(&q).max(im);
            ensure(err <= 1e-8, || format!("{p:?} came back as {q:?}"))?;
            poly_err = poly_err.max(err);
        }
    }
    let opts = EvolveOptions::default();
    let mut flow_err = 0.0f64;
    for curve in [g1(), g2(), mixed()] {
        for (t, p) in enumerate_components(&curve).unwrap() {
            let d = divisor_from_polynomial(&curve, &p, &PairSelector::default()).unwrap();
            for dir in [Direction::X, Direction::T] {
                let start = DivisorState::new(&d, 0.0, 0.0);
                let (end, _) = evolve_to(&curve, &start, dir, &[10.0], opts)
                    .map_err(|e| e.to_string())?
                    .remove(0);
                let (back, _) = evolve_to(&curve, &end, dir, &[-10.0], opts)
                    .map_err(|e| e.to_string())?
                    .remove(0);
                let mut a = d.lambdas();
                let mut b = back.lambdas();
                let key = |z: &Complex64| (z.re, z.im);
                a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
                b.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
                let err = a
                    .iter()
                    .zip(&b)
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                ensure(err <= 1e-6, || {
                    format!("g={} {t} {dir}: return error {err:e}", curve.genus())
                })?;
                flow_err = flow_err.max(err);
            }
        }
    }
    Ok(format!(
        "polynomial↔divisor {poly_err:.1e}; evolve forward/backward {flow_err:.1e}"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("zero-charge curves", zero_charge),
        ("charge formula vs winding oracle", formula_vs_winding),
        ("PDE residual", pde),
        ("admissibility suite", admissibility_suite),
        ("flow invariants", flow_invariants),
        ("period machinery", period_machinery),
        ("averaging", averaging),
        ("round trips", round_trips),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{label}: PASS [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{label}: FAIL [{secs:.1}s] {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
