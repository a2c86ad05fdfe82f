//! Dense polynomial helpers shared by the curve, admissibility and dynamics code.
//!
//! Coefficients are stored in ascending order: `c[j]` multiplies `λ^j`.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn eval_real(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn eval_complex(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn eval_cc(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Value and first derivative by Horner's scheme.
pub fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

pub fn mul_real(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn mul_complex(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Expands `Π (λ − r_j)` into monic ascending coefficients.
pub fn from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        out = mul_complex(&out, &[-r, Complex64::new(1.0, 0.0)]);
    }
    out
}

/// Remainder of `a` modulo the monic polynomial `m`.
pub fn rem_monic(a: &[Complex64], m: &[Complex64]) -> Vec<Complex64> {
    let d = m.len() - 1;
    let mut r = a.to_vec();
    while r.len() > d {
        let lead = r.pop().unwrap_or_default();
        let shift = r.len() - d;
        for j in 0..d {
            r[shift + j] -= lead * m[j];
        }
    }
    r.resize(d, Complex64::new(0.0, 0.0));
    r
}

/// Coefficients of the degree `< n` interpolant through `(nodes[k], values[k])`.
///
/// Newton divided differences followed by conversion to monomial form; callers
/// are responsible for keeping nodes separated.
pub fn interpolate(nodes: &[Complex64], values: &[Complex64]) -> Vec<Complex64> {
    let n = nodes.len();
    let mut dd = values.to_vec();
    for level in 1..n {
        for i in (level..n).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (nodes[i] - nodes[i - level]);
        }
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        // coeffs <- coeffs * (z - nodes[i]) + dd[i]
        let mut next = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            if j + 1 < n {
                next[j + 1] += coeffs[j];
            }
            next[j] -= coeffs[j] * nodes[i];
        }
        next[0] += dd[i];
        coeffs = next;
    }
    coeffs
}

/// Roots of a complex polynomial by Aberth iteration from the given guesses.
///
/// `guess.len()` must equal the degree; guesses that coincide are spread apart first.
pub fn roots_complex(coeffs: &[Complex64], guess: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    assert_eq!(guess.len(), n, "one guess per root");
    let size = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max) / coeffs[n].norm();
    let mut z = guess.to_vec();
    for i in 0..n {
        for j in 0..i {
            if (z[i] - z[j]).norm() < 1e-10 * (1.0 + size) {
                let r = 1e-6 * (1.0 + z[i].norm());
                z[i] += Complex64::from_polar(r, 0.7 + i as f64);
            }
        }
    }
    for _ in 0..200 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (p, dp) = eval_with_derivative(coeffs, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repel: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| 1.0 / (z[i] - z[j]))
                .sum();
            let step = ratio / (1.0 - ratio * repel);
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-16 {
            break;
        }
    }
    z
}

/// All roots of a real polynomial via the eigenvalues of its companion matrix,
/// each refined by a few guarded Newton steps.
pub fn roots_real(coeffs: &[f64]) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().is_some_and(|&x| x == 0.0) {
        c.pop();
    }
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    let eig = comp.complex_eigenvalues();
    let cc: Vec<Complex64> = c.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut roots: Vec<Complex64> = eig.iter().map(|&z| polish(&cc, z)).collect();
    // Real inputs have conjugate-symmetric root sets; snap tiny imaginary noise.
    for r in &mut roots {
        if r.im.abs() <= 1e-15 * (1.0 + r.re.abs()) {
            r.im = 0.0;
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

fn polish(coeffs: &[Complex64], mut z: Complex64) -> Complex64 {
    let mut best = eval_cc(coeffs, z).norm();
    for _ in 0..8 {
        let (p, dp) = eval_with_derivative(coeffs, z);
        if dp.norm() == 0.0 {
            break;
        }
        let cand = z - p / dp;
        let val = eval_cc(coeffs, cand).norm();
        if val < best {
            best = val;
            z = cand;
        } else {
            break;
        }
    }
    z
}

/// A group of numerically coincident roots.
#[derive(Debug, Clone, PartialEq)]
pub struct RootCluster {
    pub center: Complex64,
    pub size: usize,
    /// Largest distance between two members.
    pub spread: f64,
}

/// Single-linkage clustering of `roots` with absolute radius `radius · (1 + |z|)`.
pub fn cluster_roots(roots: &[Complex64], radius: f64) -> Vec<RootCluster> {
    let n = roots.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        let mut j = i;
        while label[j] != r {
            let next = label[j];
            label[j] = r;
            j = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let tol = radius * (1.0 + roots[i].norm().max(roots[j].norm()));
            if (roots[i] - roots[j]).norm() <= tol {
                let a = find(&mut label, i);
                let b = find(&mut label, j);
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    let mut root_of: Vec<usize> = Vec::new();
    for (i, &z) in roots.iter().enumerate().take(n) {
        let r = find(&mut label, i);
        match root_of.iter().position(|&x| x == r) {
            Some(k) => groups[k].push(z),
            None => {
                root_of.push(r);
                groups.push(vec![z]);
            }
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let center = g.iter().sum::<Complex64>() / g.len() as f64;
            let mut spread: f64 = 0.0;
            for a in &g {
                for b in &g {
                    spread = spread.max((a - b).norm());
                }
            }
            RootCluster {
                center,
                size: g.len(),
                spread,
            }
        })
        .collect()
}
