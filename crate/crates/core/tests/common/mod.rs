#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sg_core::admissibility::{
    admissibility_check, enumerate_components, RealPolynomial, TopologicalType,
};
use sg_core::spectral_curve::SpectralCurve;
use sg_core::Complex64;

pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn g1() -> SpectralCurve {
    SpectralCurve::new(&[re(-1.0), re(-4.0)]).unwrap()
}

pub fn g2() -> SpectralCurve {
    SpectralCurve::new(&[re(-1.0), re(-2.0), re(-3.0), re(-4.0)]).unwrap()
}

/// Genus two, one real gap and one conjugate pair.
pub fn mixed() -> SpectralCurve {
    SpectralCurve::new(&[
        re(-0.5),
        re(-2.0),
        Complex64::new(1.0, 1.5),
        Complex64::new(1.0, -1.5),
    ])
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A curve of genus `g` without real gaps.
pub fn random_m0_curve(rng: &mut ChaCha8Rng, g: usize) -> SpectralCurve {
    loop {
        let mut pts = Vec::with_capacity(2 * g);
        for _ in 0..g {
            let z = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(0.4..3.0));
            pts.push(z);
            pts.push(z.conj());
        }
        let spread = pts.iter().step_by(2).enumerate().all(|(i, a)| {
            pts.iter()
                .step_by(2)
                .skip(i + 1)
                .all(|b| (a.re - b.re).abs() > 0.2)
        });
        if !spread {
            continue;
        }
        if let Ok(c) = SpectralCurve::new(&pts) {
            return c;
        }
    }
}

/// Admissible polynomials drawn uniformly from a box around the component witnesses,
/// with their types.
pub fn random_admissible(
    curve: &SpectralCurve,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(RealPolynomial, TopologicalType)> {
    let witnesses = enumerate_components(curve).unwrap();
    let g = curve.genus();
    let mut lo = vec![f64::INFINITY; g];
    let mut hi = vec![f64::NEG_INFINITY; g];
    for (_, p) in &witnesses {
        for (j, &c) in p.coeffs().iter().enumerate() {
            lo[j] = lo[j].min(c);
            hi[j] = hi[j].max(c);
        }
    }
    let pad: Vec<f64> = (0..g)
        .map(|j| 0.5 * (hi[j] - lo[j]) + 0.5 / curve.scale().powi(j as i32))
        .collect();
    let mut out = Vec::with_capacity(count);
    let mut draws = 0;
    while out.len() < count {
        draws += 1;
        assert!(
            draws < 200 * count,
            "admissible set too thin for rejection sampling"
        );
        let coeffs = (0..g)
            .map(|j| rng.random_range(lo[j] - pad[j]..hi[j] + pad[j]))
            .collect();
        let p = RealPolynomial::new(coeffs);
        let v = admissibility_check(curve, &p).unwrap();
        if v.admissible && !v.boundary {
            out.push((p, v.topological_type.unwrap()));
        }
    }
    out
}
