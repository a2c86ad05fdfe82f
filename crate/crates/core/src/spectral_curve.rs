//! The real hyperelliptic curve `μ² = R(λ) = λ Π_{j=1}^{2g} (λ − E_j)`.
//!
//! Branch points are kept unexpanded and `R` is always evaluated as a product.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative on-curve residual accepted for a [`CurvePoint`].
pub const TOL_CURVE: f64 = 1e-10;
/// Relative separation below which two branch points are considered coincident.
pub const BRANCH_SEPARATION: f64 = 1e-12;
/// Minimal distance between a continuation path and any branch point.
pub const PATH_CLEARANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("branch point list must have even, nonzero length (got {0})")]
    OddLength(usize),
    #[error("branch point {index} is not finite")]
    NonFinite { index: usize },
    #[error("real branch point {value} is not strictly negative")]
    NonRealNegativeViolation { value: f64 },
    #[error("complex branch point {value} has no conjugate partner")]
    UnpairedComplexPoint { value: Complex64 },
    #[error("branch points {a} and {b} coincide within relative tolerance")]
    DegenerateBranchPoints { a: Complex64, b: Complex64 },
    #[error("path point {point} lies within {PATH_CLEARANCE:e} of branch point {branch}")]
    PathThroughBranchPoint { point: Complex64, branch: Complex64 },
    #[error("square-root branch lost near {at}")]
    LostBranch { at: Complex64 },
    #[error("malformed curve file: {0}")]
    Parse(String),
}

/// A real spectral curve satisfying the reality constraints.
///
/// `branch[0..2m]` are the negative real branch points in decreasing order,
/// followed by conjugate pairs `(E, conj E)` with `Im E > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCurve {
    branch: Vec<Complex64>,
    genus: usize,
    m: usize,
    sqrt_prod: f64,
}

/// A point `(λ, μ)` of the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub lambda: Complex64,
    pub mu: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Involution {
    /// `(λ, μ) -> (λ, −μ)`
    Sigma,
    /// `(λ, μ) -> (conj λ, conj μ)`
    Tau,
}

fn relative_close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * 1f64.max(a.norm()).max(b.norm())
}

impl SpectralCurve {
    /// Validates `E_1..E_2g` and puts them in canonical order.
    pub fn new(points: &[Complex64]) -> Result<Self, CurveError> {
        if points.is_empty() || !points.len().is_multiple_of(2) {
            return Err(CurveError::OddLength(points.len()));
        }
        for (index, p) in points.iter().enumerate() {
            if !p.re.is_finite() || !p.im.is_finite() {
                return Err(CurveError::NonFinite { index });
            }
        }
        let mut real = Vec::new();
        let mut upper = Vec::new();
        let mut lower = Vec::new();
        for &p in points {
            if p.im == 0.0 {
                if p.re >= 0.0 {
                    return Err(CurveError::NonRealNegativeViolation { value: p.re });
                }
                real.push(p.re);
            } else if p.im > 0.0 {
                upper.push(p);
            } else {
                lower.push(p);
            }
        }
        // Pair every upper point with a distinct conjugate among the lower ones.
        let mut used = vec![false; lower.len()];
        let mut pairs = Vec::with_capacity(upper.len());
        for &u in &upper {
            let target = u.conj();
            let best = lower
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()));
            match best {
                Some((i, &l)) if relative_close(l, target, BRANCH_SEPARATION) => {
                    used[i] = true;
                    pairs.push(u);
                }
                _ => return Err(CurveError::UnpairedComplexPoint { value: u }),
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(CurveError::UnpairedComplexPoint { value: lower[i] });
        }
        // Vertical cuts force the order of the pairs: increasing real part.
        pairs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        real.sort_by(|a, b| b.total_cmp(a));

        let mut branch: Vec<Complex64> = real.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for p in &pairs {
            branch.push(*p);
            branch.push(p.conj());
        }
        let mut all = vec![Complex64::new(0.0, 0.0)];
        all.extend_from_slice(&branch);
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                if relative_close(all[i], all[j], BRANCH_SEPARATION) {
                    return Err(CurveError::DegenerateBranchPoints {
                        a: all[i],
                        b: all[j],
                    });
                }
            }
        }
        let genus = branch.len() / 2;
        let m = real.len() / 2;
        let prod: Complex64 = branch.iter().product();
        Ok(Self {
            branch,
            genus,
            m,
            sqrt_prod: prod.re.sqrt(),
        })
    }

    /// Parses `{"E": [[re, im], ...]}`.
    pub fn from_json(text: &str) -> Result<Self, CurveError> {
        let file: CurveFile =
            serde_json::from_str(text).map_err(|e| CurveError::Parse(e.to_string()))?;
        let pts: Vec<Complex64> = file
            .e
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        Self::new(&pts)
    }

    pub fn to_json(&self) -> String {
        let file = CurveFile {
            e: self.branch.iter().map(|z| [z.re, z.im]).collect(),
        };
        serde_json::to_string(&file).unwrap_or_default()
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    /// Number of negative real branch-point pairs.
    pub fn m(&self) -> usize {
        self.m
    }

    /// `E_1..E_2g` in canonical order (`E_0 = 0` is implicit).
    pub fn branch_points(&self) -> &[Complex64] {
        &self.branch
    }

    /// `E_0 = 0` followed by [`Self::branch_points`].
    pub fn all_branch_points(&self) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0)];
        v.extend_from_slice(&self.branch);
        v
    }

    /// Positive square root of `Π E_j`.
    pub fn sqrt_prod(&self) -> f64 {
        self.sqrt_prod
    }

    /// Characteristic length of the branch-point configuration.
    pub fn scale(&self) -> f64 {
        self.branch.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Gap `k` (1-based) as `(E_2k, E_2k−1)`, left end first.
    pub fn gap(&self, k: usize) -> (f64, f64) {
        assert!(k >= 1 && k <= self.m, "gap index out of range");
        (self.branch[2 * k - 1].re, self.branch[2 * k - 2].re)
    }

    /// `Π_{j=1}^{2g} (λ − E_j)`.
    pub fn eval_pi(&self, lambda: Complex64) -> Complex64 {
        self.branch.iter().map(|&e| lambda - e).product()
    }

    pub fn eval_r(&self, lambda: Complex64) -> Complex64 {
        lambda * self.eval_pi(lambda)
    }

    pub fn eval_r_real(&self, lambda: f64) -> f64 {
        self.eval_r(Complex64::new(lambda, 0.0)).re
    }

    /// `R'(λ)` by the product rule over all `2g + 1` linear factors.
    pub fn eval_r_prime(&self, lambda: Complex64) -> Complex64 {
        let all = self.all_branch_points();
        (0..all.len())
            .map(|k| {
                all.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, &e)| lambda - e)
                    .product::<Complex64>()
            })
            .sum()
    }

    /// `|R(λ)| / ((λ − a)(b − λ))` for λ inside gap `k = [a, b]`; smooth up to the endpoints.
    pub fn gap_reduced_abs_r(&self, k: usize, lambda: f64) -> f64 {
        let z = Complex64::new(lambda, 0.0);
        let (lo, hi) = (2 * k - 1, 2 * k - 2);
        let rest: Complex64 = self
            .branch
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != lo && *j != hi)
            .map(|(_, &e)| z - e)
            .product();
        (z * rest).norm()
    }

    pub fn distance_to_branch_points(&self, lambda: Complex64) -> f64 {
        self.branch
            .iter()
            .map(|&e| (lambda - e).norm())
            .fold(lambda.norm(), f64::min)
    }

    fn nearest_branch_point(&self, lambda: Complex64) -> Complex64 {
        let mut best = Complex64::new(0.0, 0.0);
        let mut d = lambda.norm();
        for &e in &self.branch {
            let de = (lambda - e).norm();
            if de < d {
                d = de;
                best = e;
            }
        }
        best
    }

    pub fn is_on_curve(&self, p: &CurvePoint) -> bool {
        p.residual(self) <= TOL_CURVE
    }

    /// Analytic continuation of `μ = √R` along a polyline.
    pub fn continue_mu(
        &self,
        path: &[Complex64],
        mu_start: Complex64,
    ) -> Result<Complex64, CurveError> {
        let mut mu = mu_start;
        if let Some(&first) = path.first() {
            self.check_clearance(first)?;
        }
        for seg in path.windows(2) {
            mu = self.continue_segment(seg[0], seg[1], mu)?;
        }
        Ok(mu)
    }

    fn check_clearance(&self, z: Complex64) -> Result<(), CurveError> {
        if self.distance_to_branch_points(z) < PATH_CLEARANCE {
            return Err(CurveError::PathThroughBranchPoint {
                point: z,
                branch: self.nearest_branch_point(z),
            });
        }
        Ok(())
    }

    /// Continues `mu` from `a` to `b` along the straight segment.
    pub fn continue_segment(
        &self,
        a: Complex64,
        b: Complex64,
        mu: Complex64,
    ) -> Result<Complex64, CurveError> {
        // Closest approach of the segment to each branch point.
        let d = b - a;
        let len2 = d.norm_sqr();
        for e in self.all_branch_points() {
            let t = if len2 > 0.0 {
                (((e - a) * d.conj()).re / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let closest = a + d * t;
            if (closest - e).norm() < PATH_CLEARANCE {
                return Err(CurveError::PathThroughBranchPoint {
                    point: closest,
                    branch: e,
                });
            }
        }
        let mut z = a;
        let mut r_z = self.eval_r(z);
        let mut mu = mu;
        let mut t: f64 = 0.0;
        let mut dt: f64 = 1.0;
        while t < 1.0 {
            let step = dt.min(1.0 - t);
            let next = a + d * (t + step);
            let reach = 0.25 * self.distance_to_branch_points(z);
            let r_next = self.eval_r(next);
            let turn = (r_next / r_z).arg().abs();
            if (d * step).norm() > reach || turn >= FRAC_PI_2 {
                dt = 0.5 * step;
                if dt < 1e-15 {
                    return Err(CurveError::LostBranch { at: z });
                }
                continue;
            }
            let root = r_next.sqrt();
            let (dp, dm) = ((root - mu).norm(), (root + mu).norm());
            if (dp - dm).abs() <= 1e-12 * (dp + dm) {
                return Err(CurveError::LostBranch { at: next });
            }
            mu = if dp <= dm { root } else { -root };
            z = next;
            r_z = r_next;
            t += step;
            dt = (2.0 * step).min(1.0);
        }
        Ok(mu)
    }

    /// `μ` on sheet `G+` at a point of the positive real axis.
    pub fn mu_positive_axis(&self, lambda: f64) -> f64 {
        debug_assert!(lambda > 0.0);
        self.eval_r_real(lambda).sqrt()
    }
}

impl CurvePoint {
    pub fn new(lambda: Complex64, mu: Complex64) -> Self {
        Self { lambda, mu }
    }

    /// Relative on-curve residual `|μ² − R(λ)| / (1 + |R(λ)|)`.
    pub fn residual(&self, curve: &SpectralCurve) -> f64 {
        let r = curve.eval_r(self.lambda);
        (self.mu * self.mu - r).norm() / (1.0 + r.norm())
    }

    pub fn apply(&self, which: Involution) -> Self {
        match which {
            Involution::Sigma => Self::new(self.lambda, -self.mu),
            Involution::Tau => Self::new(self.lambda.conj(), self.mu.conj()),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveFile {
    #[serde(rename = "E")]
    e: Vec<[f64; 2]>,
}
