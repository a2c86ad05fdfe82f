//! Averages of symmetric functionals of the divisor over a real component.
//!
//! Two routes: ergodic averages along the `x` flow, and at genus one the ratio
//! `∮ f̃ dλ/μ / ∮ dλ/μ` over the cycle traced by the divisor point.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::admissibility::{Divisor, TopologicalType};
use crate::dynamics::{self, bump, Direction, DivisorState, DynamicsError, EvolveOptions, Flow};
use crate::periods::{self, lifted_integral, PeriodError, QuadratureOptions};
use crate::poly;
use crate::spectral_curve::{CurvePoint, SpectralCurve};

pub const MAX_ORDER: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AveragingError {
    #[error("divisor projections {0} and {1} coincide")]
    CoincidentProjections(Complex64, Complex64),
    #[error("sampling circle of radius {0:e} conflicts with the divisor")]
    FitIllConditioned(f64),
    #[error("expansion order {0} exceeds {MAX_ORDER}")]
    OrderTooLarge(usize),
    #[error("cycle averages need genus 1, curve has genus {0}")]
    NotGenusOne(usize),
    #[error("unknown functional {0:?}")]
    UnknownFunctional(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Periods(#[from] PeriodError),
}

/// Data of the Baker–Akhiezer logarithmic derivatives at one divisor.
#[derive(Debug, Clone)]
pub struct LogDerivative {
    lambdas: Vec<Complex64>,
    q_xi: Vec<Complex64>,
    q_eta: Vec<Complex64>,
    u0: Complex64,
    sqrt_prod: f64,
}

impl LogDerivative {
    pub fn new(curve: &SpectralCurve, points: &[CurvePoint]) -> Result<Self, AveragingError> {
        let lambdas: Vec<Complex64> = points.iter().map(|p| p.lambda).collect();
        for i in 0..lambdas.len() {
            for j in 0..i {
                if (lambdas[i] - lambdas[j]).norm() <= dynamics::NEAR_COLLISION {
                    return Err(AveragingError::CoincidentProjections(
                        lambdas[i], lambdas[j],
                    ));
                }
            }
        }
        let mus: Vec<Complex64> = points.iter().map(|p| p.mu).collect();
        let over: Vec<Complex64> = points.iter().map(|p| p.mu / p.lambda).collect();
        Ok(Self {
            q_xi: poly::interpolate(&lambdas, &mus),
            q_eta: poly::interpolate(&lambdas, &over),
            u0: lambdas.iter().map(|&l| -l).product(),
            lambdas,
            sqrt_prod: curve.sqrt_prod(),
        })
    }

    /// `Ψ_dir / Ψ` at `(λ, μ)`.
    ///
    /// The `η` part carries the sign that makes its residue at `λ_k` equal
    /// to `−∂_η λ_k` of [`dynamics::dubrovin_rhs`].
    pub fn eval(&self, lambda: Complex64, mu: Complex64, dir: Direction) -> Complex64 {
        let i = Complex64::i();
        let u: Complex64 = self.lambdas.iter().map(|&l| lambda - l).product();
        let xi = i * (mu + poly::eval_cc(&self.q_xi, lambda)) / u;
        let eta = -i * (mu + lambda * poly::eval_cc(&self.q_eta, lambda)) * self.u0
            / (lambda * u * self.sqrt_prod);
        match dir {
            Direction::Xi => xi,
            Direction::Eta => eta,
            Direction::X => 0.25 * (xi + eta),
            Direction::T => 0.25 * (xi - eta),
        }
    }
}

/// `Ψ_dir / Ψ` at `(λ, μ)` for the divisor `d`.
pub fn log_derivative(
    curve: &SpectralCurve,
    d: &Divisor,
    lambda: Complex64,
    mu: Complex64,
    dir: Direction,
) -> Result<Complex64, AveragingError> {
    Ok(LogDerivative::new(curve, &d.points)?.eval(lambda, mu, dir))
}

/// Laurent coefficients of `Ψ_x / Ψ`.
///
/// `infinity[n + 1]` multiplies `k^{−n}` with `k = √λ` and `μ ~ k^{2g+1}`;
/// `zero[n + 1]` multiplies `w^n` with `w = √λ` and `μ ~ √(ΠE) w`; `n = −1..=order`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianCoeffs {
    pub infinity: Vec<Complex64>,
    pub zero: Vec<Complex64>,
}

impl HamiltonianCoeffs {
    pub fn at_infinity(&self, n: i32) -> Complex64 {
        self.infinity[(n + 1) as usize]
    }

    pub fn at_zero(&self, n: i32) -> Complex64 {
        self.zero[(n + 1) as usize]
    }
}

pub const DEFAULT_SAMPLES: usize = 128;

pub fn hamiltonian_density_coeffs(
    curve: &SpectralCurve,
    d: &Divisor,
    order: usize,
) -> Result<HamiltonianCoeffs, AveragingError> {
    hamiltonian_density_coeffs_with(curve, &d.points, order, DEFAULT_SAMPLES)
}

pub fn hamiltonian_density_coeffs_with(
    curve: &SpectralCurve,
    points: &[CurvePoint],
    order: usize,
    samples: usize,
) -> Result<HamiltonianCoeffs, AveragingError> {
    if order > MAX_ORDER {
        return Err(AveragingError::OrderTooLarge(order));
    }
    let ld = LogDerivative::new(curve, points)?;
    let e = curve.branch_points();
    let g = curve.genus();
    let far = points
        .iter()
        .map(|p| p.lambda.norm())
        .chain(e.iter().map(|z| z.norm()))
        .fold(1.0, f64::max);
    let near = points
        .iter()
        .map(|p| p.lambda.norm())
        .chain(e.iter().map(|z| z.norm()))
        .fold(f64::INFINITY, f64::min);
    if near < 1e-8 * far {
        return Err(AveragingError::FitIllConditioned(0.5 * near));
    }
    let big = (2.0 * far).sqrt();
    let small = (0.5 * near).sqrt();
    let n = samples as f64;
    let mut infinity = vec![Complex64::new(0.0, 0.0); order + 2];
    let mut zero = vec![Complex64::new(0.0, 0.0); order + 2];
    for j in 0..samples {
        let phase = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n);
        let k = phase * big;
        let lambda = k * k;
        let mu = k.powu(2 * g as u32 + 1)
            * e.iter()
                .map(|&ej| (1.0 - ej / lambda).sqrt())
                .product::<Complex64>();
        let f = ld.eval(lambda, mu, Direction::X);
        let mut kp = 1.0 / k;
        for c in infinity.iter_mut() {
            *c += f * kp / n;
            kp *= k;
        }
        let w = phase * small;
        let lambda = w * w;
        let mu = w
            * curve.sqrt_prod()
            * e.iter()
                .map(|&ej| (1.0 - lambda / ej).sqrt())
                .product::<Complex64>();
        let f = ld.eval(lambda, mu, Direction::X);
        let mut wp = w;
        for c in zero.iter_mut() {
            *c += f * wp / n;
            wp /= w;
        }
    }
    Ok(HamiltonianCoeffs { infinity, zero })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    One,
    Ux,
    HamInfinity(usize),
    HamZero(usize),
    SymDemo,
    AsymDemo,
}

/// A symmetric rational function of the divisor coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymmetricFunctional {
    kind: Kind,
}

impl fmt::Display for SymmetricFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Kind::One => f.write_str("one"),
            Kind::Ux => f.write_str("ux"),
            Kind::HamInfinity(k) => write!(f, "ham{k}"),
            Kind::HamZero(k) => write!(f, "ham{k}@0"),
            Kind::SymDemo => f.write_str("sym-demo"),
            Kind::AsymDemo => f.write_str("asym-demo"),
        }
    }
}

impl SymmetricFunctional {
    /// Built-in names: `one`, `ux`, `ham<k>` (at `∞`), `ham<k>@0`, `sym-demo`, `asym-demo`.
    pub fn from_name(name: &str) -> Result<Self, AveragingError> {
        let unknown = || AveragingError::UnknownFunctional(name.to_string());
        let kind = match name {
            "one" => Kind::One,
            "ux" => Kind::Ux,
            "sym-demo" => Kind::SymDemo,
            "asym-demo" => Kind::AsymDemo,
            _ => {
                let rest = name.strip_prefix("ham").ok_or_else(unknown)?;
                let (digits, at_zero) = match rest.strip_suffix("@0") {
                    Some(d) => (d, true),
                    None => (rest, false),
                };
                let k: usize = digits.parse().map_err(|_| unknown())?;
                if k > MAX_ORDER {
                    return Err(AveragingError::OrderTooLarge(k));
                }
                if at_zero {
                    Kind::HamZero(k)
                } else {
                    Kind::HamInfinity(k)
                }
            }
        };
        Ok(Self { kind })
    }

    pub fn registry() -> Vec<Self> {
        let mut out = vec![
            Self { kind: Kind::One },
            Self { kind: Kind::Ux },
            Self {
                kind: Kind::SymDemo,
            },
            Self {
                kind: Kind::AsymDemo,
            },
        ];
        for k in (1..=MAX_ORDER).step_by(2) {
            out.push(Self {
                kind: Kind::HamInfinity(k),
            });
            out.push(Self {
                kind: Kind::HamZero(k),
            });
        }
        out
    }

    /// Invariance under every single `σ_k : μ_k → −μ_k`.
    pub fn sigma_symmetric(&self) -> bool {
        match self.kind {
            Kind::One | Kind::SymDemo => true,
            Kind::Ux | Kind::AsymDemo => false,
            Kind::HamInfinity(k) | Kind::HamZero(k) => k % 2 == 1,
        }
    }

    pub fn eval(
        &self,
        curve: &SpectralCurve,
        points: &[CurvePoint],
    ) -> Result<Complex64, AveragingError> {
        Ok(match self.kind {
            Kind::One => Complex64::new(1.0, 0.0),
            // Real orbits have a purely imaginary rate; `−i·rate` is its holomorphic extension.
            Kind::Ux => {
                -Complex64::i() * dynamics::log_potential_rate(curve, points, Direction::X)?
            }
            Kind::SymDemo => points.iter().map(|p| p.lambda + 1.0 / p.lambda).sum(),
            Kind::AsymDemo => points.iter().map(|p| p.mu / p.lambda).sum(),
            Kind::HamInfinity(k) => {
                hamiltonian_density_coeffs_with(curve, points, k, DEFAULT_SAMPLES)?
                    .at_infinity(k as i32)
            }
            Kind::HamZero(k) => hamiltonian_density_coeffs_with(curve, points, k, DEFAULT_SAMPLES)?
                .at_zero(k as i32),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Average {
    /// Smooth-window average `∫ w(x/T) f̃ dx / ∫ w(x/T) dx`.
    pub value: Complex64,
    /// Largest change of `value` between horizons `T/4`, `T/2` and `T`, plus a tolerance floor.
    pub error_band: f64,
    /// Plain `(1/T) ∫_0^T f̃ dx`.
    pub plain: Complex64,
    /// Drift of the plain running average over the last quarter.
    pub plain_band: f64,
}

pub fn orbit_average(
    curve: &SpectralCurve,
    d0: &Divisor,
    f: &SymmetricFunctional,
    length: f64,
) -> Result<Average, AveragingError> {
    orbit_average_with(curve, d0, f, length, EvolveOptions::default())
}

pub fn orbit_average_with(
    curve: &SpectralCurve,
    d0: &Divisor,
    f: &SymmetricFunctional,
    length: f64,
    opts: EvolveOptions,
) -> Result<Average, AveragingError> {
    let f = *f;
    let start = DivisorState::new(d0, 0.0, 0.0);
    let eval = move |pts: &[CurvePoint]| {
        f.eval(curve, pts).map_err(|e| match e {
            AveragingError::Dynamics(d) => d,
            AveragingError::CoincidentProjections(a, b) => {
                DynamicsError::NearCollision((a - b).norm())
            }
            _ => DynamicsError::NearCollision(0.0),
        })
    };
    let mut flow = Flow::new(curve, &start, Direction::X, opts)?
        .with_observable(Box::new(move |_, pts| eval(pts)));
    for horizon in [length, 0.5 * length, 0.25 * length] {
        flow = flow
            .with_observable(Box::new(move |s, _| {
                Ok(Complex64::new(bump(s / horizon), 0.0))
            }))
            .with_observable(Box::new(move |s, pts| {
                let w = bump(s / horizon);
                if w == 0.0 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                Ok(eval(pts)? * w)
            }));
    }
    let mut running: Vec<Complex64> = Vec::new();
    flow.advance(length, &mut |fl| {
        if fl.s() >= 0.75 * length && fl.s() > 0.0 {
            running.push(fl.integrals()[0] / fl.s());
        }
    })?;
    let q = flow.integrals();
    let plain = q[0] / length;
    let value = q[2] / q[1];
    let half = q[4] / q[3];
    let quarter = q[6] / q[5];
    let plain_band = running
        .iter()
        .map(|a| (a - plain).norm())
        .fold(0.0, f64::max);
    Ok(Average {
        value,
        error_band: (value - half).norm().max((half - quarter).norm())
            + dynamics::BAND_FLOOR * opts.tol * (1.0 + value.norm()),
        plain,
        plain_band,
    })
}

/// `∮ f̃ dλ/μ / ∮ dλ/μ` over the cycle traced by the divisor point of the given component.
pub fn cycle_average_g1(
    curve: &SpectralCurve,
    t: &TopologicalType,
    f: &SymmetricFunctional,
) -> Result<Complex64, AveragingError> {
    cycle_average_g1_with(curve, t, f, &QuadratureOptions::default())
}

pub fn cycle_average_g1_with(
    curve: &SpectralCurve,
    t: &TopologicalType,
    f: &SymmetricFunctional,
    opts: &QuadratureOptions,
) -> Result<Complex64, AveragingError> {
    if curve.genus() != 1 {
        return Err(AveragingError::NotGenusOne(curve.genus()));
    }
    if t.len() != curve.m() {
        return Err(PeriodError::TypeMismatch {
            got: t.len(),
            m: curve.m(),
        }
        .into());
    }
    let basis = periods::cycle_paths(curve)?;
    let mut path = basis.a_paths[0].clone();
    if curve.m() == 1 {
        // On the gap μ = λ P(λ) has the sign −s_1.
        let g_plus = basis.b_paths[0].mu_anchor.re.signum();
        if -(t.signs()[0] as f64) != g_plus {
            path.mu_anchor = -path.mu_anchor;
        }
    }
    let failed = std::cell::Cell::new(None);
    let h = |l: Complex64, mu: Complex64| -> Vec<Complex64> {
        let v = match f.eval(curve, &[CurvePoint::new(l, mu)]) {
            Ok(v) => v,
            Err(e) => {
                failed.set(Some(e));
                Complex64::new(0.0, 0.0)
            }
        };
        vec![v / mu, 1.0 / mu]
    };
    let ints = lifted_integral(curve, &path, 2, &h, opts)?;
    if let Some(e) = failed.take() {
        return Err(e);
    }
    Ok(ints[0] / ints[1])
}
