//! Admissible polynomials `P_{g−1}`, their topological types and the divisors
//! they define.
//!
//! With `S(λ) = λ² P(λ)² − R(λ) = λ · T(λ)` and `T(λ) = λ P(λ)² − Π (λ − E_j)`,
//! `P` is admissible exactly when every real root of `T` has even multiplicity.
//! `T` has degree `2g` and leading coefficient `−1`, so this is the same as
//! `T ≤ 0` on the whole real line.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::poly::{self, RootCluster};
use crate::spectral_curve::{CurvePoint, SpectralCurve};

/// Radius used to merge numerically coincident roots of `T`.
pub const CLUSTER_RADIUS: f64 = 1e-7;
/// Minimal separation of divisor projections for interpolation.
pub const COINCIDENT_PROJECTIONS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdmissibilityError {
    #[error("polynomial has {got} coefficients, curve of genus {genus} needs {genus}")]
    WrongDegree { got: usize, genus: usize },
    #[error("polynomial is not admissible")]
    NotAdmissible,
    #[error("cannot separate the roots of S into conjugate pairs")]
    PairingAmbiguity,
    #[error("divisor projections {0} and {1} are too close to interpolate")]
    CoincidentProjections(Complex64, Complex64),
    #[error("no admissible witness found for type {0} within the step budget")]
    WitnessSearchFailed(TopologicalType),
    #[error("sign word {word:?} is invalid for m = {m}")]
    BadSignWord { word: String, m: usize },
}

/// `P(λ) = Σ c_j λ^j` with `g` real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl RealPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(
            coeffs.iter().all(|c| c.is_finite()),
            "non-finite coefficient"
        );
        Self { coeffs }
    }

    pub fn constant(genus: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; genus];
        coeffs[0] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        poly::eval_real(&self.coeffs, x)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        poly::eval_complex(&self.coeffs, z)
    }

    pub fn neg(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| -c).collect())
    }

    /// `t·self + (1 − t)·other`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect(),
        )
    }

    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Sign word `s ∈ {±1}^m`; position `k − 1` holds `s_k` for gap `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TopologicalType(Vec<i8>);

impl TopologicalType {
    pub fn new(signs: Vec<i8>) -> Self {
        assert!(signs.iter().all(|&s| s == 1 || s == -1), "signs must be ±1");
        Self(signs)
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    /// All `2^m` types, `+` before `−` at each position from the left.
    pub fn all(m: usize) -> Vec<Self> {
        (0..1usize << m)
            .map(|bits| {
                Self(
                    (0..m)
                        .map(|k| if bits >> (m - 1 - k) & 1 == 0 { 1 } else { -1 })
                        .collect(),
                )
            })
            .collect()
    }

    pub fn parse_for(word: &str, m: usize) -> Result<Self, AdmissibilityError> {
        let t: Self = word.parse().map_err(|_| AdmissibilityError::BadSignWord {
            word: word.to_string(),
            m,
        })?;
        if t.len() != m {
            return Err(AdmissibilityError::BadSignWord {
                word: word.to_string(),
                m,
            });
        }
        Ok(t)
    }
}

impl fmt::Display for TopologicalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for TopologicalType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(format!("invalid sign character {other:?}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

/// An unordered set of `g` curve points.
#[derive(Debug, Clone, PartialEq)]
pub struct Divisor {
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DivisorViolation {
    AtZeroOrInfinity(Complex64),
    InBand { lambda: Complex64, band: usize },
    OffCurve { lambda: Complex64, residual: f64 },
}

impl Divisor {
    pub fn new(points: Vec<CurvePoint>) -> Self {
        Self { points }
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    pub fn tau(&self) -> Self {
        Self::new(
            self.points
                .iter()
                .map(|p| p.apply(crate::spectral_curve::Involution::Tau))
                .collect(),
        )
    }

    /// Checks the divisor invariants: finite, away from `0`, off the closed bands.
    pub fn violations(&self, curve: &SpectralCurve) -> Vec<DivisorViolation> {
        let scale = curve.scale().max(1.0);
        let mut out = Vec::new();
        for p in &self.points {
            let l = p.lambda;
            if !l.re.is_finite() || !l.im.is_finite() || l.norm() <= 1e-12 * scale {
                out.push(DivisorViolation::AtZeroOrInfinity(l));
                continue;
            }
            if let Some(band) = band_containing(curve, l) {
                out.push(DivisorViolation::InBand { lambda: l, band });
            }
            let residual = p.residual(curve);
            if residual > 1e-8 {
                out.push(DivisorViolation::OffCurve {
                    lambda: l,
                    residual,
                });
            }
        }
        out
    }
}

/// Bands (closed) are `[E_1, 0]`, `[E_3, E_2]`, …, `(−∞, E_2m]`; index 0 is `[E_1, 0]`.
fn bands(curve: &SpectralCurve) -> Vec<(f64, f64)> {
    let e = curve.branch_points();
    let m = curve.m();
    if m == 0 {
        return Vec::new();
    }
    let mut out = vec![(e[0].re, 0.0)];
    for k in 1..m {
        out.push((e[2 * k].re, e[2 * k - 1].re));
    }
    out.push((f64::NEG_INFINITY, e[2 * m - 1].re));
    out
}

fn band_containing(curve: &SpectralCurve, l: Complex64) -> Option<usize> {
    if l.im.abs() > 1e-12 * (1.0 + l.norm()) {
        return None;
    }
    if curve.m() == 0 {
        // Only the point 0 itself, handled by the caller.
        return None;
    }
    bands(curve)
        .iter()
        .position(|&(lo, hi)| l.re >= lo && l.re <= hi)
}

/// Euclidean distance from `λ` to the union of the closed bands.
///
/// For curves without real gaps only the point `0` remains.
pub fn band_clearance(curve: &SpectralCurve, l: Complex64) -> f64 {
    if curve.m() == 0 {
        return l.norm();
    }
    bands(curve)
        .iter()
        .map(|&(lo, hi)| {
            let x = l.re.clamp(lo, hi);
            (l - Complex64::new(x, 0.0)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A real root of `S` with odd multiplicity.
    OddRealRoot { at: f64, multiplicity: usize },
    /// `S(λ*) ≥ 0` at the positive probe point.
    WrongSignAtProbe { at: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub admissible: bool,
    /// Some real root cluster of `S` has even size: the polynomial touches the
    /// boundary of its component.
    pub boundary: bool,
    pub topological_type: Option<TopologicalType>,
    pub violations: Vec<Violation>,
    /// Real root clusters of `T` (nonzero real roots of `S`).
    pub real_roots: Vec<RootCluster>,
}

/// Coefficients of `T(λ) = λ P(λ)² − Π (λ − E_j)`.
pub fn reduced_coeffs(curve: &SpectralCurve, p: &RealPolynomial) -> Vec<f64> {
    let pi: Vec<f64> = poly::from_roots(curve.branch_points())
        .iter()
        .map(|z| z.re)
        .collect();
    let mut lp2 = vec![0.0];
    lp2.extend(poly::mul_real(p.coeffs(), p.coeffs()));
    let mut t: Vec<f64> = pi.iter().map(|x| -x).collect();
    for (j, c) in lp2.iter().enumerate() {
        if j < t.len() {
            t[j] += c;
        }
    }
    t
}

/// `T(λ)` evaluated with the unexpanded product.
pub fn eval_reduced(curve: &SpectralCurve, p: &RealPolynomial, l: Complex64) -> Complex64 {
    let pv = p.eval_complex(l);
    l * pv * pv - curve.eval_pi(l)
}

fn check_len(curve: &SpectralCurve, p: &RealPolynomial) -> Result<(), AdmissibilityError> {
    if p.coeffs().len() != curve.genus() {
        return Err(AdmissibilityError::WrongDegree {
            got: p.coeffs().len(),
            genus: curve.genus(),
        });
    }
    Ok(())
}

fn near_real(z: Complex64) -> bool {
    z.im.abs() <= CLUSTER_RADIUS * (1.0 + z.norm())
}

/// Decides admissibility of `p` and classifies its topological type.
pub fn admissibility_check(
    curve: &SpectralCurve,
    p: &RealPolynomial,
) -> Result<Verdict, AdmissibilityError> {
    check_len(curve, p)?;
    let roots = poly::roots_real(&reduced_coeffs(curve, p));
    let real: Vec<Complex64> = roots.iter().copied().filter(|&z| near_real(z)).collect();
    let clusters = poly::cluster_roots(&real, CLUSTER_RADIUS);

    let mut violations = Vec::new();
    let mut boundary = false;
    for cl in &clusters {
        let c = cl.center.re;
        let h = (10.0 * cl.spread).max(1e-6 * (1.0 + c.abs()));
        let left = eval_reduced(curve, p, Complex64::new(c - h, 0.0)).re;
        let right = eval_reduced(curve, p, Complex64::new(c + h, 0.0)).re;
        let sign_change = left * right < 0.0;
        if cl.size % 2 == 1 || sign_change {
            violations.push(Violation::OddRealRoot {
                at: c,
                multiplicity: cl.size,
            });
        } else {
            boundary = true;
        }
    }
    let probe = 1.0 + 2.0 * curve.scale();
    let s_probe = probe * eval_reduced(curve, p, Complex64::new(probe, 0.0)).re;
    if s_probe >= 0.0 {
        violations.push(Violation::WrongSignAtProbe { at: probe });
    }
    let admissible = violations.is_empty();
    let topological_type = admissible.then(|| classify(curve, p));
    Ok(Verdict {
        admissible,
        boundary: admissible && boundary,
        topological_type,
        violations,
        real_roots: clusters,
    })
}

/// `s_k = sign P` at the midpoint of gap `k`.
fn classify(curve: &SpectralCurve, p: &RealPolynomial) -> TopologicalType {
    TopologicalType(
        (1..=curve.m())
            .map(|k| {
                let (lo, hi) = curve.gap(k);
                if p.eval(0.5 * (lo + hi)) > 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect(),
    )
}

/// Which member of each conjugate root pair enters the divisor.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum PairSelector {
    #[default]
    PositiveImaginary,
    NegativeImaginary,
    /// One flag per complex pair in order of increasing real part; `true` picks `Im > 0`.
    PerPair(Vec<bool>),
}

/// Roots of `T` grouped into the `g` pairs `{γ, τγ}`; real double roots pair with themselves.
#[derive(Debug, Clone)]
struct RootPairs {
    /// Upper root of each complex pair, by increasing real part.
    complex: Vec<Complex64>,
    /// Real points, with multiplicity (one entry per pair).
    real: Vec<f64>,
}

fn pair_roots(curve: &SpectralCurve, p: &RealPolynomial) -> Result<RootPairs, AdmissibilityError> {
    let roots = poly::roots_real(&reduced_coeffs(curve, p));
    let (real, cplx): (Vec<Complex64>, Vec<Complex64>) = roots.iter().partition(|&&z| near_real(z));
    let mut real_pts = Vec::new();
    for cl in poly::cluster_roots(&real, CLUSTER_RADIUS) {
        if cl.size % 2 == 1 {
            return Err(AdmissibilityError::NotAdmissible);
        }
        for _ in 0..cl.size / 2 {
            real_pts.push(cl.center.re);
        }
    }
    let upper: Vec<Complex64> = cplx.iter().copied().filter(|z| z.im > 0.0).collect();
    let mut lower: Vec<Complex64> = cplx.iter().copied().filter(|z| z.im < 0.0).collect();
    if upper.len() != lower.len() {
        return Err(AdmissibilityError::PairingAmbiguity);
    }
    let mut pairs = Vec::with_capacity(upper.len());
    for &u in &upper {
        let target = u.conj();
        let (idx, &best) = lower
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()))
            .ok_or(AdmissibilityError::PairingAmbiguity)?;
        if (best - target).norm() > 1e-6 * (1.0 + u.norm()) {
            return Err(AdmissibilityError::PairingAmbiguity);
        }
        lower.swap_remove(idx);
        // Average out the asymmetry left by the eigenvalue solver.
        pairs.push(Complex64::new(
            0.5 * (u.re + best.re),
            0.5 * (u.im - best.im),
        ));
    }
    pairs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    real_pts.sort_by(f64::total_cmp);
    Ok(RootPairs {
        complex: pairs,
        real: real_pts,
    })
}

/// The admissible divisor selected from the nonzero roots of `S`, with `μ = λ P(λ)`.
pub fn divisor_from_polynomial(
    curve: &SpectralCurve,
    p: &RealPolynomial,
    selector: &PairSelector,
) -> Result<Divisor, AdmissibilityError> {
    let verdict = admissibility_check(curve, p)?;
    if !verdict.admissible {
        return Err(AdmissibilityError::NotAdmissible);
    }
    let pairs = pair_roots(curve, p)?;
    if let PairSelector::PerPair(flags) = selector {
        if flags.len() != pairs.complex.len() {
            return Err(AdmissibilityError::PairingAmbiguity);
        }
    }
    let mut points = Vec::with_capacity(curve.genus());
    for (i, &u) in pairs.complex.iter().enumerate() {
        let upper = match selector {
            PairSelector::PositiveImaginary => true,
            PairSelector::NegativeImaginary => false,
            PairSelector::PerPair(flags) => flags[i],
        };
        let l = if upper { u } else { u.conj() };
        points.push(CurvePoint::new(l, l * p.eval_complex(l)));
    }
    for &x in &pairs.real {
        let l = Complex64::new(x, 0.0);
        points.push(CurvePoint::new(l, l * p.eval(x)));
    }
    Ok(Divisor::new(points))
}

/// All nonzero roots of `S` as curve points `(λ, λP(λ))`, i.e. the zeros of `Ω`.
pub fn zeros_of_omega(
    curve: &SpectralCurve,
    p: &RealPolynomial,
) -> Result<Vec<CurvePoint>, AdmissibilityError> {
    let pairs = pair_roots(curve, p)?;
    let mut out = Vec::new();
    for &u in &pairs.complex {
        for l in [u, u.conj()] {
            out.push(CurvePoint::new(l, l * p.eval_complex(l)));
        }
    }
    for &x in &pairs.real {
        let l = Complex64::new(x, 0.0);
        for _ in 0..2 {
            out.push(CurvePoint::new(l, l * p.eval(x)));
        }
    }
    Ok(out)
}

/// Interpolant of degree `≤ g − 1` through `(λ_k, μ_k / λ_k)`, returned together with
/// the largest imaginary part discarded from its coefficients.
pub fn polynomial_from_divisor(
    curve: &SpectralCurve,
    d: &Divisor,
) -> Result<(RealPolynomial, f64), AdmissibilityError> {
    let coeffs = complex_interpolant(curve, d)?;
    let residual = coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    Ok((
        RealPolynomial::new(coeffs.iter().map(|c| c.re).collect()),
        residual,
    ))
}

/// Complex coefficients of the interpolant through `(λ_k, μ_k / λ_k)`.
pub fn complex_interpolant(
    curve: &SpectralCurve,
    d: &Divisor,
) -> Result<Vec<Complex64>, AdmissibilityError> {
    let lambdas = d.lambdas();
    let g = curve.genus();
    assert_eq!(lambdas.len(), g, "divisor degree must equal the genus");
    for i in 0..g {
        for j in (i + 1)..g {
            if (lambdas[i] - lambdas[j]).norm() <= COINCIDENT_PROJECTIONS {
                return Err(AdmissibilityError::CoincidentProjections(
                    lambdas[i], lambdas[j],
                ));
            }
        }
    }
    let values: Vec<Complex64> = d.points.iter().map(|p| p.mu / p.lambda).collect();
    Ok(poly::interpolate(&lambdas, &values))
}

/// One admissible witness per topological type, in [`TopologicalType::all`] order.
pub fn enumerate_components(
    curve: &SpectralCurve,
) -> Result<Vec<(TopologicalType, RealPolynomial)>, AdmissibilityError> {
    use rayon::prelude::*;
    TopologicalType::all(curve.m())
        .into_par_iter()
        .map(|t| find_witness(curve, &t).map(|p| (t, p)))
        .collect()
}

/// Linear constraint `a · d ≤ b` on the scaled coefficients `d_j = c_j · scale^j`.
struct Row {
    a: Vec<f64>,
    b: f64,
}

const WITNESS_SWEEPS: usize = 4000;

/// Searches an interior point of the component of type `t`.
///
/// In the scaled variable `z = λ / scale` the admissible set is the polyhedron
/// `s_k P ≥ f` on the gaps and `|P| ≤ f` on `λ > 0`, with `f = √R / |λ|`. The
/// squared hinge penalty of a margin-tightened, sampled version of these
/// constraints is minimized by exact coordinate descent.
pub fn find_witness(
    curve: &SpectralCurve,
    t: &TopologicalType,
) -> Result<RealPolynomial, AdmissibilityError> {
    let g = curve.genus();
    let m = curve.m();
    assert_eq!(t.len(), m, "type length must equal m");
    let scale = curve.scale().max(1e-300);
    let to_coeffs = |d: &[f64]| -> RealPolynomial {
        RealPolynomial::new(
            d.iter()
                .enumerate()
                .map(|(j, &x)| x / scale.powi(j as i32))
                .collect(),
        )
    };
    let f = |x: f64| curve.eval_r_real(x).abs().sqrt() / x.abs();

    // Start: interpolant through the gap midpoints.
    let mut start = vec![0.0; g];
    if m > 0 {
        let mids: Vec<f64> = (1..=m)
            .map(|k| {
                let (lo, hi) = curve.gap(k);
                0.5 * (lo + hi)
            })
            .collect();
        let vals: Vec<Complex64> = (1..=m)
            .map(|k| {
                let (lo, hi) = curve.gap(k);
                let peak = crate::quadrature::chebyshev_nodes(16, lo, hi)
                    .map(f)
                    .fold(0.0, f64::max);
                Complex64::new(t.signs()[k - 1] as f64 * 1.25 * peak, 0.0)
            })
            .collect();
        let nodes: Vec<Complex64> = mids
            .iter()
            .map(|&x| Complex64::new(x / scale, 0.0))
            .collect();
        let c = poly::interpolate(&nodes, &vals);
        for (j, v) in c.iter().enumerate() {
            start[j] = v.re;
        }
    }

    let mut d = start;
    for &margin in &[0.25, 0.05, 0.01, 0.002] {
        for &density in &[1usize, 4] {
            let rows = witness_rows(curve, t, margin, density, scale);
            let check_rows = witness_rows(curve, t, 0.5 * margin, density, scale);
            for sweep in 0..WITNESS_SWEEPS {
                if sweep % 4 == 0 && rows_satisfied(&check_rows, &d) {
                    let cand = to_coeffs(&d);
                    if let Ok(v) = admissibility_check(curve, &cand) {
                        if v.admissible && !v.boundary && v.topological_type.as_ref() == Some(t) {
                            return Ok(cand);
                        }
                    }
                    break;
                }
                let moved = descent_sweep(&rows, &mut d);
                if !moved {
                    break;
                }
            }
        }
    }
    Err(AdmissibilityError::WitnessSearchFailed(t.clone()))
}

fn witness_rows(
    curve: &SpectralCurve,
    t: &TopologicalType,
    margin: f64,
    density: usize,
    scale: f64,
) -> Vec<Row> {
    let g = curve.genus();
    let f = |x: f64| curve.eval_r_real(x).abs().sqrt() / x.abs();
    let powers = |x: f64| -> Vec<f64> { (0..g).map(|j| (x / scale).powi(j as i32)).collect() };
    let mut rows = Vec::new();
    for k in 1..=curve.m() {
        let (lo, hi) = curve.gap(k);
        let s = t.signs()[k - 1] as f64;
        for x in crate::quadrature::chebyshev_nodes(24 * density, lo, hi) {
            let fx = f(x);
            // s P(x) / f(x) ≥ 1 + margin
            let a = powers(x).iter().map(|p| -s * p / fx).collect();
            rows.push(Row {
                a,
                b: -(1.0 + margin),
            });
        }
    }
    let n = 160 * density;
    for i in 0..n {
        let x = scale * 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64);
        let fx = f(x);
        let base = powers(x);
        for sgn in [1.0, -1.0] {
            let a = base.iter().map(|p| sgn * p / fx).collect();
            rows.push(Row { a, b: 1.0 - margin });
        }
    }
    rows
}

fn rows_satisfied(rows: &[Row], d: &[f64]) -> bool {
    rows.iter().all(|r| dot(&r.a, d) <= r.b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One pass of exact coordinate minimization of `Σ max(0, a·d − b)²`.
fn descent_sweep(rows: &[Row], d: &mut [f64]) -> bool {
    let mut moved = false;
    for j in 0..d.len() {
        let resid: Vec<f64> = rows.iter().map(|r| dot(&r.a, d) - r.b).collect();
        let slope = |t: f64| -> f64 {
            rows.iter()
                .zip(&resid)
                .map(|(r, &v)| r.a[j] * (v + r.a[j] * t).max(0.0))
                .sum()
        };
        let s0 = slope(0.0);
        if s0 == 0.0 {
            continue;
        }
        // Bracket the root of the monotone derivative.
        let mut step = 1e-3 * (1.0 + d[j].abs());
        let (mut lo, mut hi) = if s0 > 0.0 { (-step, 0.0) } else { (0.0, step) };
        for _ in 0..200 {
            if s0 > 0.0 && slope(lo) > 0.0 {
                hi = lo;
                step *= 2.0;
                lo = -step;
            } else if s0 < 0.0 && slope(hi) < 0.0 {
                lo = hi;
                step *= 2.0;
                hi = step;
            } else {
                break;
            }
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let delta = 0.5 * (lo + hi);
        if delta != 0.0 {
            d[j] += delta;
            moved = true;
        }
    }
    moved
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn g1() -> SpectralCurve {
        SpectralCurve::new(&[re(-1.0), re(-4.0)]).unwrap()
    }

    fn g2() -> SpectralCurve {
        SpectralCurve::new(&[re(-1.0), re(-2.0), re(-3.0), re(-4.0)]).unwrap()
    }

    fn verdict(c: &SpectralCurve, p: &[f64]) -> Verdict {
        admissibility_check(c, &RealPolynomial::new(p.to_vec())).unwrap()
    }

    #[test]
    fn constant_polynomials_on_genus_one() {
        let c = g1();
        let v = verdict(&c, &[2.0]);
        assert!(v.admissible && !v.boundary);
        assert_eq!(v.topological_type, Some(TopologicalType::new(vec![1])));
        let v = verdict(&c, &[3.0]);
        assert!(v.admissible && v.boundary);
        assert_eq!(v.topological_type, Some(TopologicalType::new(vec![1])));
        let v = verdict(&c, &[1.0]);
        assert!(v.admissible && v.boundary);
        assert!(!verdict(&c, &[0.5]).admissible);
        assert!(!verdict(&c, &[4.0]).admissible);
        let v = verdict(&c, &[-2.0]);
        assert!(v.admissible);
        assert_eq!(v.topological_type, Some(TopologicalType::new(vec![-1])));
    }

    #[test]
    fn reduced_polynomial_factorizations() {
        let c = g1();
        // P ≡ 2: T = −(λ² + λ + 4)
        assert_eq!(
            reduced_coeffs(&c, &RealPolynomial::new(vec![2.0])),
            vec![-4.0, -1.0, -1.0]
        );
        // P ≡ 3: T = −(λ − 2)²
        assert_eq!(
            reduced_coeffs(&c, &RealPolynomial::new(vec![3.0])),
            vec![-4.0, 4.0, -1.0]
        );
    }

    #[test]
    fn violation_reports_odd_roots() {
        let c = g1();
        let v = verdict(&c, &[0.5]);
        let odd: Vec<f64> = v
            .violations
            .iter()
            .filter_map(|x| match x {
                Violation::OddRealRoot { at, .. } => Some(*at),
                _ => None,
            })
            .collect();
        // roots of λ² + 4.75λ + 4
        let disc = (4.75f64 * 4.75 - 16.0).sqrt();
        let expect = [(-4.75 - disc) / 2.0, (-4.75 + disc) / 2.0];
        assert_eq!(odd.len(), 2);
        for (a, b) in odd.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn genus_two_witnesses() {
        let c = g2();
        let v = verdict(&c, &[2.0, 0.0]);
        assert!(v.admissible);
        assert_eq!(v.topological_type.unwrap().to_string(), "++");
        let v = verdict(&c, &[2.5, 1.0]);
        assert!(v.admissible);
        assert_eq!(v.topological_type.unwrap().to_string(), "+-");
    }

    #[test]
    fn sign_words() {
        let t: TopologicalType = "+-+".parse().unwrap();
        assert_eq!(t.signs(), &[1, -1, 1]);
        assert_eq!(t.to_string(), "+-+");
        assert!("+x".parse::<TopologicalType>().is_err());
        assert!(TopologicalType::parse_for("+", 2).is_err());
        let all: Vec<String> = TopologicalType::all(2)
            .iter()
            .map(|t| t.to_string())
            .collect();
        assert_eq!(all, vec!["++", "+-", "-+", "--"]);
        assert_eq!(TopologicalType::all(0), vec![TopologicalType::new(vec![])]);
    }

    #[test]
    fn divisor_examples() {
        let c = g1();
        let d = divisor_from_polynomial(
            &c,
            &RealPolynomial::new(vec![2.0]),
            &PairSelector::default(),
        )
        .unwrap();
        let l = Complex64::new(-0.5, 15f64.sqrt() / 2.0);
        assert!((d.points[0].lambda - l).norm() < 1e-14);
        assert!((d.points[0].mu - Complex64::new(-1.0, 15f64.sqrt())).norm() < 1e-13);
        let dn = divisor_from_polynomial(
            &c,
            &RealPolynomial::new(vec![2.0]),
            &PairSelector::NegativeImaginary,
        )
        .unwrap();
        assert_eq!(dn, d.tau());
        let d3 = divisor_from_polynomial(
            &c,
            &RealPolynomial::new(vec![3.0]),
            &PairSelector::default(),
        )
        .unwrap();
        assert!((d3.points[0].lambda - re(2.0)).norm() < 1e-7);
        assert!((d3.points[0].mu - re(6.0)).norm() < 1e-6);
        assert!(matches!(
            divisor_from_polynomial(
                &c,
                &RealPolynomial::new(vec![0.5]),
                &PairSelector::default()
            ),
            Err(AdmissibilityError::NotAdmissible)
        ));
    }

    #[test]
    fn inverse_map_examples() {
        let c = g1();
        let l = Complex64::new(-0.5, 15f64.sqrt() / 2.0);
        let d = Divisor::new(vec![CurvePoint::new(l, Complex64::new(-1.0, 15f64.sqrt()))]);
        let (p, res) = polynomial_from_divisor(&c, &d).unwrap();
        assert!((p.coeffs()[0] - 2.0).abs() < 1e-14);
        assert!(res < 1e-14);
        let d = Divisor::new(vec![CurvePoint::new(re(2.0), re(6.0))]);
        assert_eq!(polynomial_from_divisor(&c, &d).unwrap().0.coeffs(), &[3.0]);
    }

    #[test]
    fn coincident_projections_rejected() {
        let c = g2();
        let p = CurvePoint::new(re(0.5), c.eval_r(re(0.5)).sqrt());
        let d = Divisor::new(vec![p, p]);
        assert!(matches!(
            polynomial_from_divisor(&c, &d),
            Err(AdmissibilityError::CoincidentProjections(..))
        ));
    }

    #[test]
    fn witnesses_for_every_component() {
        for c in [g1(), g2()] {
            let comps = enumerate_components(&c).unwrap();
            assert_eq!(comps.len(), 1 << c.m());
            for (t, p) in comps {
                let v = admissibility_check(&c, &p).unwrap();
                assert!(v.admissible && !v.boundary);
                assert_eq!(v.topological_type, Some(t));
            }
        }
        let c = SpectralCurve::new(&[Complex64::new(1.0, 1.0), Complex64::new(1.0, -1.0)]).unwrap();
        let comps = enumerate_components(&c).unwrap();
        assert_eq!(comps.len(), 1);
        assert!(comps[0].0.is_empty());
    }

    #[test]
    fn band_membership() {
        let c = g2();
        assert_eq!(band_containing(&c, re(-0.5)), Some(0));
        assert_eq!(band_containing(&c, re(-2.5)), Some(1));
        assert_eq!(band_containing(&c, re(-7.0)), Some(2));
        assert_eq!(band_containing(&c, re(-1.5)), None);
        assert_eq!(band_containing(&c, Complex64::new(-0.5, 0.1)), None);
        assert!((band_clearance(&c, Complex64::new(-1.5, 0.0)) - 0.5).abs() < 1e-15);
    }
}
