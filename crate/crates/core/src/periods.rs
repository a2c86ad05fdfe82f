//! Cycles, period integrals and the density of topological charge.
//!
//! Differentials are written as `N(λ) dλ / (λ μ)` with a polynomial numerator.
//! The quasimomentum `dp` has `deg N = g + 1`; its leading and constant
//! coefficients are fixed by the double poles at `∞` and `0`, the remaining `g`
//! by vanishing a-periods.
//!
//! Cycle layout, with `H` the smallest imaginary part of a complex branch point:
//!
//! * `a_k`, `k ≤ m`: rectangle on sheet `G+` enclosing `[E_2k−1, 0]`, crossing
//!   the real axis at the midpoint of gap `k` and at a point of `λ > 0`.
//! * `a_j`, `j > m`: two-sheeted lift of the polyline
//!   `E_2j−1 → (Re E_2j−1, iε_j) → κ_j → conj`, with `κ_j` increasing.
//! * `b_k`, `k ≤ m`: oval over gap `k`, oriented by increasing `λ` on `G+`.
//!
//! Rectangle heights stay below every `ε_j`, which stay below `H`, so no two
//! a-paths meet and none crosses a vertical cut.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::admissibility::TopologicalType;
use crate::poly;
use crate::quadrature::{chebyshev_nodes, GaussLegendre};
use crate::spectral_curve::{CurveError, SpectralCurve};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodError {
    #[error("cannot route cycle paths: {0}")]
    GeometryFailure(String),
    #[error("quadrature did not reach tolerance within the panel budget")]
    QuadratureStall,
    #[error("a-period matrix is singular (condition number {0:e})")]
    SingularPeriodMatrix(f64),
    #[error("topological type has length {got}, curve has m = {m}")]
    TypeMismatch { got: usize, m: usize },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CycleKind {
    /// Closed polyline on one sheet; `μ` is continued from the first vertex.
    Loop,
    /// Two-sheeted cycle over an open polyline joining two branch points.
    /// `μ` is given at vertex `anchor`; the forward sheet is the one reached from it.
    DoubledArc { anchor: usize },
    /// Real oval over gap `k`, oriented by increasing `λ` on the sheet carrying `mu_anchor`'s sign.
    GapOval { gap: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclePath {
    pub vertices: Vec<Complex64>,
    pub kind: CycleKind,
    /// `μ` at the anchor vertex (first vertex for loops, gap midpoint for ovals).
    pub mu_anchor: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleBasis {
    pub a_paths: Vec<CyclePath>,
    /// Only the real ovals `b_1..b_m` are built.
    pub b_paths: Vec<CyclePath>,
    pub kappa: Vec<f64>,
    /// Minimal distance kept between paths and branch points.
    pub clearance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Gauss–Legendre nodes per panel.
    pub gl_nodes: usize,
    /// Initial Gauss–Chebyshev node count on gap ovals.
    pub cheb_nodes: usize,
    pub tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            gl_nodes: 16,
            cheb_nodes: 32,
            tol: 1e-10,
            max_panels: 50_000,
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds the cycle basis described in the module docs.
pub fn cycle_paths(curve: &SpectralCurve) -> Result<CycleBasis, PeriodError> {
    let g = curve.genus();
    let m = curve.m();
    let e = curve.branch_points();
    let scale = curve.scale();
    let clearance = 1e-3 * scale;

    let uppers: Vec<Complex64> = (m..g).map(|j| e[2 * j]).collect();
    let h_top = uppers.iter().map(|z| z.im).fold(scale, f64::min);
    for w in uppers.windows(2) {
        if (w[1].re - w[0].re).abs() < clearance {
            return Err(PeriodError::GeometryFailure(format!(
                "complex branch points {} and {} are vertically aligned",
                w[0], w[1]
            )));
        }
    }
    let n_levels = (g - m) as f64 + 1.0;
    // Heights: rectangles in (0, 0.25 H], arcs in [0.35 H, 0.7 H].
    let rect_height = |k: usize| 0.25 * h_top * k as f64 / m.max(1) as f64;
    let arc_height = |j: usize| h_top * (0.35 + 0.35 * (j - m) as f64 / n_levels);
    if rect_height(1).min(0.3 * h_top) < clearance {
        return Err(PeriodError::GeometryFailure(
            "complex branch points too close to the real axis".into(),
        ));
    }

    let x_right = |k: usize| scale * (0.25 + 0.25 * k as f64 / m.max(1) as f64);
    let mut a_paths = Vec::with_capacity(g);
    let mut b_paths = Vec::with_capacity(m);
    for k in 1..=m {
        let (lo, hi) = curve.gap(k);
        if hi - lo < 2.0 * clearance {
            return Err(PeriodError::GeometryFailure(format!(
                "gap {k} is too narrow"
            )));
        }
        let mid = 0.5 * (lo + hi);
        let (xr, h) = (x_right(k), rect_height(k));
        // Counterclockwise from the positive crossing: it runs down through gap k.
        let vertices = vec![
            c(xr, 0.0),
            c(xr, h),
            c(mid, h),
            c(mid, -h),
            c(xr, -h),
            c(xr, 0.0),
        ];
        let mu0 = c(curve.mu_positive_axis(xr), 0.0);
        a_paths.push(CyclePath {
            vertices,
            kind: CycleKind::Loop,
            mu_anchor: mu0,
        });

        let mu_gap = curve.continue_mu(&[c(xr, 0.0), c(xr, h), c(mid, h), c(mid, 0.0)], mu0)?;
        b_paths.push(CyclePath {
            vertices: vec![c(lo, 0.0), c(hi, 0.0)],
            kind: CycleKind::GapOval { gap: k },
            mu_anchor: c(mu_gap.re, 0.0),
        });
    }

    let max_re = uppers.iter().map(|z| z.re).fold(0.0, f64::max);
    let mut kappa = Vec::with_capacity(g - m);
    for (i, j) in (m..g).enumerate() {
        let top = e[2 * j];
        let eps = arc_height(j);
        let kap = x_right(m).max(max_re) + scale * 0.25 * (i as f64 + 1.0);
        kappa.push(kap);
        let vertices = vec![
            top,
            c(top.re, eps),
            c(kap, eps),
            c(kap, 0.0),
            c(kap, -eps),
            c(top.re, -eps),
            top.conj(),
        ];
        a_paths.push(CyclePath {
            vertices,
            kind: CycleKind::DoubledArc { anchor: 3 },
            mu_anchor: c(curve.mu_positive_axis(kap), 0.0),
        });
    }
    Ok(CycleBasis {
        a_paths,
        b_paths,
        kappa,
        clearance,
    })
}

/// `∮ λ^j dλ / (λ μ)` for `j = 0..n_basis` over one cycle.
pub fn basis_periods(
    curve: &SpectralCurve,
    path: &CyclePath,
    n_basis: usize,
    opts: &QuadratureOptions,
) -> Result<Vec<Complex64>, PeriodError> {
    let h = |l: Complex64, mu: Complex64| {
        let base = 1.0 / (l * mu);
        let mut pw = c(1.0, 0.0);
        (0..n_basis)
            .map(|_| {
                let v = base * pw;
                pw *= l;
                v
            })
            .collect()
    };
    lifted_integral(curve, path, n_basis, &h, opts)
}

/// `∮ h(λ, μ) dλ` along a lifted cycle, for a vector-valued `h` of length `n`.
pub fn lifted_integral(
    curve: &SpectralCurve,
    path: &CyclePath,
    n: usize,
    h: &dyn Fn(Complex64, Complex64) -> Vec<Complex64>,
    opts: &QuadratureOptions,
) -> Result<Vec<Complex64>, PeriodError> {
    let v = &path.vertices;
    match path.kind {
        CycleKind::Loop => {
            let mut q = Quad::new(curve, n, h, opts);
            let mut mu = path.mu_anchor;
            let mut total = vec![c(0.0, 0.0); n];
            for seg in v.windows(2) {
                let (part, mu_next) = q.segment(Param::Line(seg[0], seg[1]), mu)?;
                add_into(&mut total, &part);
                mu = mu_next;
            }
            Ok(total)
        }
        CycleKind::DoubledArc { anchor } => {
            // Forward on the anchor sheet, back on the other one.
            let both = |l: Complex64, mu: Complex64| {
                let (p, m) = (h(l, mu), h(l, -mu));
                p.iter().zip(&m).map(|(a, b)| a - b).collect()
            };
            let mut q = Quad::new(curve, n, &both, opts);
            let back = q.open_to_branch(
                &v[..=anchor].iter().rev().copied().collect::<Vec<_>>(),
                path.mu_anchor,
            )?;
            let fwd = q.open_to_branch(&v[anchor..], path.mu_anchor)?;
            Ok(fwd.iter().zip(&back).map(|(f, b)| f - b).collect())
        }
        CycleKind::GapOval { gap } => {
            let (lo, hi) = curve.gap(gap);
            let sign = path.mu_anchor.re.signum();
            // Integrand times the arcsine weight, smooth up to both ends.
            let smooth = |x: f64| -> Vec<Complex64> {
                let root = ((x - lo) * (hi - x)).max(0.0).sqrt();
                let mu = c(sign * root * curve.gap_reduced_abs_r(gap, x).sqrt(), 0.0);
                let (p, m) = (h(c(x, 0.0), mu), h(c(x, 0.0), -mu));
                p.iter().zip(&m).map(|(a, b)| (a - b) * root).collect()
            };
            let cheb = |nodes: usize| -> Vec<Complex64> {
                let mut acc = vec![c(0.0, 0.0); n];
                for x in chebyshev_nodes(nodes, lo, hi) {
                    add_into(&mut acc, &smooth(x));
                }
                acc.iter().map(|z| z * (PI / nodes as f64)).collect()
            };
            let mut nodes = opts.cheb_nodes;
            let mut prev = cheb(nodes);
            loop {
                nodes *= 2;
                let next = cheb(nodes);
                let err = next
                    .iter()
                    .zip(&prev)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                let size = next.iter().map(|z| z.norm()).fold(0.0, f64::max);
                prev = next;
                if err <= opts.tol * size.max(1e-300) {
                    return Ok(prev);
                }
                if nodes > opts.max_panels * 16 {
                    return Err(PeriodError::QuadratureStall);
                }
            }
        }
    }
}

fn add_into(acc: &mut [Complex64], part: &[Complex64]) {
    for (a, p) in acc.iter_mut().zip(part) {
        *a += p;
    }
}

/// `∮ N(λ) dλ / (λ μ)` along a cycle.
pub fn period_integral(
    curve: &SpectralCurve,
    numerator: &[Complex64],
    path: &CyclePath,
    opts: &QuadratureOptions,
) -> Result<Complex64, PeriodError> {
    let basis = basis_periods(curve, path, numerator.len(), opts)?;
    Ok(numerator.iter().zip(&basis).map(|(a, b)| a * b).sum())
}

#[derive(Clone, Copy)]
enum Param {
    /// `λ = a + (b − a) s`.
    Line(Complex64, Complex64),
    /// `λ = e + (a − e)(1 − s)²`, ending at the branch point `e`.
    ToBranch(Complex64, Complex64),
}

impl Param {
    fn at(&self, s: f64) -> (Complex64, Complex64) {
        match *self {
            Param::Line(a, b) => (a + (b - a) * s, b - a),
            Param::ToBranch(a, e) => {
                let w = 1.0 - s;
                (e + (a - e) * (w * w), -(a - e) * (2.0 * w))
            }
        }
    }
}

struct Quad<'a> {
    curve: &'a SpectralCurve,
    rule: GaussLegendre,
    n_basis: usize,
    integrand: &'a dyn Fn(Complex64, Complex64) -> Vec<Complex64>,
    opts: QuadratureOptions,
    panels: usize,
}

impl<'a> Quad<'a> {
    fn new(
        curve: &'a SpectralCurve,
        n_basis: usize,
        integrand: &'a dyn Fn(Complex64, Complex64) -> Vec<Complex64>,
        opts: &QuadratureOptions,
    ) -> Self {
        Self {
            curve,
            rule: GaussLegendre::new(opts.gl_nodes),
            n_basis,
            integrand,
            opts: *opts,
            panels: 0,
        }
    }

    /// Open polyline from a regular point to a branch point (last vertex).
    fn open_to_branch(
        &mut self,
        v: &[Complex64],
        mu0: Complex64,
    ) -> Result<Vec<Complex64>, PeriodError> {
        let mut total = vec![c(0.0, 0.0); self.n_basis];
        let mut mu = mu0;
        let n = v.len();
        for i in 0..n - 1 {
            let p = if i + 2 == n {
                Param::ToBranch(v[i], v[i + 1])
            } else {
                Param::Line(v[i], v[i + 1])
            };
            let (part, mu_next) = self.segment(p, mu)?;
            add_into(&mut total, &part);
            mu = mu_next;
        }
        Ok(total)
    }

    /// Adaptive integral over one parametrized segment; returns `μ` at its end
    /// (meaningless for [`Param::ToBranch`]).
    fn segment(
        &mut self,
        p: Param,
        mu0: Complex64,
    ) -> Result<(Vec<Complex64>, Complex64), PeriodError> {
        let (whole, mu_end) = self.panel(p, 0.0, 1.0, mu0)?;
        self.refine(p, 0.0, 1.0, mu0, whole, mu_end, 0)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &mut self,
        p: Param,
        s0: f64,
        s1: f64,
        mu0: Complex64,
        whole: Vec<Complex64>,
        mu_end: Complex64,
        depth: usize,
    ) -> Result<(Vec<Complex64>, Complex64), PeriodError> {
        let sm = 0.5 * (s0 + s1);
        let (left, mu_mid) = self.panel(p, s0, sm, mu0)?;
        let (right, mu_r) = self.panel(p, sm, s1, mu_mid)?;
        let split: Vec<Complex64> = left.iter().zip(&right).map(|(a, b)| a + b).collect();
        let err = whole
            .iter()
            .zip(&split)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let size = split.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if err <= self.opts.tol * size.max(1e-300) || err == 0.0 {
            return Ok((split, mu_r));
        }
        if depth > 48 || self.panels > self.opts.max_panels {
            return Err(PeriodError::QuadratureStall);
        }
        let _ = mu_end;
        let (l, mu_mid2) = self.refine(p, s0, sm, mu0, left, mu_mid, depth + 1)?;
        let (r, mu_last) = self.refine(p, sm, s1, mu_mid2, right, mu_r, depth + 1)?;
        Ok((l.iter().zip(&r).map(|(a, b)| a + b).collect(), mu_last))
    }

    fn panel(
        &mut self,
        p: Param,
        s0: f64,
        s1: f64,
        mu0: Complex64,
    ) -> Result<(Vec<Complex64>, Complex64), PeriodError> {
        self.panels += 1;
        let mut acc = vec![c(0.0, 0.0); self.n_basis];
        let (mut prev_l, _) = p.at(s0);
        let mut mu = mu0;
        let nodes: Vec<(f64, f64)> = self.rule.mapped(s0, s1).collect();
        for (s, w) in nodes {
            let (l, dl) = p.at(s);
            mu = self.curve.continue_segment(prev_l, l, mu)?;
            prev_l = l;
            let scale = dl * w;
            for (a, v) in acc.iter_mut().zip((self.integrand)(l, mu)) {
                *a += v * scale;
            }
        }
        let (end, _) = p.at(s1);
        let mu_end = match p {
            Param::ToBranch(..) if s1 >= 1.0 => c(0.0, 0.0),
            _ => self.curve.continue_segment(prev_l, end, mu)?,
        };
        Ok((acc, mu_end))
    }
}

/// Numerator of `dp = N(λ) dλ / (λ μ)`, `N = Σ a_j λ^j`, `j = 0..g+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasimomentumDifferential {
    pub coeffs: Vec<f64>,
    /// Largest imaginary part discarded after the linear solve.
    pub max_imag: f64,
    /// `|∮_{a_k} dp|`, re-integrated at a tighter tolerance.
    pub a_residuals: Vec<f64>,
}

impl QuasimomentumDifferential {
    pub fn numerator(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|&x| c(x, 0.0)).collect()
    }

    pub fn max_a_residual(&self) -> f64 {
        self.a_residuals.iter().copied().fold(0.0, f64::max)
    }

    /// `dp / dλ` on the sheet of `mu`.
    pub fn eval(&self, lambda: Complex64, mu: Complex64) -> Complex64 {
        poly::eval_complex(&self.coeffs, lambda) / (lambda * mu)
    }
}

/// Normalizes `dp`: fixed pole parts, zero a-periods.
pub fn normalize_dp(
    curve: &SpectralCurve,
    basis: &CycleBasis,
    opts: &QuadratureOptions,
) -> Result<QuasimomentumDifferential, PeriodError> {
    let g = curve.genus();
    let a0 = curve.sqrt_prod() / 8.0;
    let top = 1.0 / 8.0;
    let periods: Vec<Vec<Complex64>> = {
        use rayon::prelude::*;
        basis
            .a_paths
            .par_iter()
            .map(|p| basis_periods(curve, p, g + 2, opts))
            .collect::<Result<_, _>>()?
    };
    let mat = DMatrix::from_fn(g, g, |k, j| periods[k][j + 1]);
    let rhs = DVector::from_fn(g, |k, _| -(periods[k][0] * a0 + periods[k][g + 1] * top));
    let sv = mat.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if cond > 1e12 {
        return Err(PeriodError::SingularPeriodMatrix(cond));
    }
    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or(PeriodError::SingularPeriodMatrix(f64::INFINITY))?;
    let mut coeffs = vec![a0];
    coeffs.extend(sol.iter().map(|z| z.re));
    coeffs.push(top);
    let max_imag = sol.iter().map(|z| z.im.abs()).fold(0.0, f64::max);

    let strict = QuadratureOptions {
        tol: opts.tol * 1e-2,
        ..*opts
    };
    let num: Vec<Complex64> = coeffs.iter().map(|&x| c(x, 0.0)).collect();
    let a_residuals = basis
        .a_paths
        .iter()
        .map(|p| period_integral(curve, &num, p, &strict).map(|z| z.norm()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(QuasimomentumDifferential {
        coeffs,
        max_imag,
        a_residuals,
    })
}

/// `U^k = −(1/2π) ∮_{b_k} dp` for the real ovals.
pub fn b_periods(
    curve: &SpectralCurve,
    basis: &CycleBasis,
    dp: &QuasimomentumDifferential,
    opts: &QuadratureOptions,
) -> Result<Vec<Complex64>, PeriodError> {
    let num = dp.numerator();
    basis
        .b_paths
        .iter()
        .map(|p| period_integral(curve, &num, p, opts).map(|z| -z / (2.0 * PI)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargeResult {
    /// `U^1..U^m`.
    pub u: Vec<Complex64>,
    pub n_bar: f64,
    pub topological_type: TopologicalType,
    pub max_a_residual: f64,
}

/// Cached cycle data for one curve; evaluates the charge of any component.
#[derive(Debug, Clone)]
pub struct Periods {
    pub basis: CycleBasis,
    pub dp: QuasimomentumDifferential,
    pub u: Vec<Complex64>,
}

impl Periods {
    pub fn compute(curve: &SpectralCurve) -> Result<Self, PeriodError> {
        Self::compute_with(curve, &QuadratureOptions::default())
    }

    pub fn compute_with(
        curve: &SpectralCurve,
        opts: &QuadratureOptions,
    ) -> Result<Self, PeriodError> {
        let basis = cycle_paths(curve)?;
        let dp = normalize_dp(curve, &basis, opts)?;
        let u = b_periods(curve, &basis, &dp, opts)?;
        Ok(Self { basis, dp, u })
    }

    /// `n̄ = Σ_{k ≤ m} n_k U^k` with per-cycle charges `n_k = (−1)^{k−1} s_k`.
    pub fn charge(&self, t: &TopologicalType) -> Result<ChargeResult, PeriodError> {
        if t.len() != self.u.len() {
            return Err(PeriodError::TypeMismatch {
                got: t.len(),
                m: self.u.len(),
            });
        }
        let n_bar = t
            .signs()
            .iter()
            .zip(&self.u)
            .enumerate()
            .map(|(i, (&s, u))| if i % 2 == 0 { 1.0 } else { -1.0 } * s as f64 * u.re)
            .sum();
        Ok(ChargeResult {
            u: self.u.clone(),
            n_bar,
            topological_type: t.clone(),
            max_a_residual: self.dp.max_a_residual(),
        })
    }
}

pub fn charge_density(
    curve: &SpectralCurve,
    t: &TopologicalType,
) -> Result<ChargeResult, PeriodError> {
    Periods::compute(curve)?.charge(t)
}

/// Closed loop around gap `k` on the sheet of `G+`, homologous to `b_k`.
pub fn gap_loop(
    curve: &SpectralCurve,
    basis: &CycleBasis,
    k: usize,
) -> Result<CyclePath, PeriodError> {
    let (lo, hi) = curve.gap(k);
    let mid = 0.5 * (lo + hi);
    let neighbour = curve
        .all_branch_points()
        .iter()
        .filter(|z| z.im != 0.0 || (z.re != lo && z.re != hi))
        .map(|&z| (z - c(z.re.clamp(lo, hi), 0.0)).norm())
        .fold(f64::INFINITY, f64::min);
    let r = (0.4 * neighbour).min(0.5 * (hi - lo));
    let mu_gap = basis.b_paths[k - 1].mu_anchor;
    let start = c(mid, r);
    let mu0 = curve.continue_mu(&[c(mid, 0.0), start], mu_gap)?;
    // Rightwards above the gap, back below it.
    let vertices = vec![
        start,
        c(hi + r, r),
        c(hi + r, -r),
        c(lo - r, -r),
        c(lo - r, r),
        start,
    ];
    Ok(CyclePath {
        vertices,
        kind: CycleKind::Loop,
        mu_anchor: mu0,
    })
}

/// Signed intersection number of an a-path with the oval over gap `l`.
///
/// A crossing of gap `l` downwards on the sheet `G+` counts `+1`; upward
/// crossings and crossings on `G−` flip the sign.
pub fn intersection_with_gap(
    curve: &SpectralCurve,
    basis: &CycleBasis,
    path: &CyclePath,
    l: usize,
) -> Result<i32, PeriodError> {
    let (lo, hi) = curve.gap(l);
    let g_plus_sign = basis.b_paths[l - 1].mu_anchor.re.signum();
    let mut count = 0;
    let (verts, mu0, factor): (Vec<Complex64>, Complex64, i32) = match path.kind {
        CycleKind::Loop => (path.vertices.clone(), path.mu_anchor, 1),
        CycleKind::DoubledArc { anchor } => {
            // Both lifts contribute equally; count the forward one twice.
            let mut v: Vec<Complex64> = path.vertices[anchor..path.vertices.len() - 1].to_vec();
            v.splice(0..0, path.vertices[1..anchor].iter().copied());
            let mu_start = curve.continue_mu(
                &path.vertices[1..=anchor]
                    .iter()
                    .rev()
                    .copied()
                    .collect::<Vec<_>>(),
                path.mu_anchor,
            )?;
            (v, mu_start, 2)
        }
        CycleKind::GapOval { .. } => return Ok(0),
    };
    let mut mu = mu0;
    for seg in verts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if (a.im > 0.0) != (b.im > 0.0) && a.im != b.im {
            let t = a.im / (a.im - b.im);
            let x = a.re + t * (b.re - a.re);
            if x > lo && x < hi {
                let mu_x = curve.continue_segment(a, c(x, 0.0), mu)?;
                let sheet = if mu_x.re.signum() == g_plus_sign {
                    1
                } else {
                    -1
                };
                let dir = if b.im < a.im { 1 } else { -1 };
                count += sheet * dir;
            }
        }
        mu = curve.continue_segment(a, b, mu)?;
    }
    Ok(factor * count)
}
