//! Divisor dynamics, the potential `e^{iu}` and the winding oracle.
//!
//! With `U(z) = Π (z − λ_k)` and `U'_k = Π_{j≠k} (λ_k − λ_j)` the flows are
//!
//! ```text
//! ∂_ξ λ_k = −2i μ_k / U'_k
//! ∂_η λ_k =  2i μ_k U(0) / (λ_k √(ΠE) U'_k)
//! ∂_x = (∂_ξ + ∂_η) / 4,   ∂_t = (∂_ξ − ∂_η) / 4
//! ```
//!
//! and `∂μ_k = R'(λ_k) ∂λ_k / (2 μ_k)`. The signs are fixed by requiring
//! `u_tt − u_xx + sin u = 0` for `e^{iu} = U(0) / √(ΠE)`; see [`pde_residual`].
//!
//! Integration runs on `(λ, μ)` with re-projection onto the curve. When two
//! projections come within [`COLLISION_WINDOW`] the state switches to the
//! symmetric pair `(U, V)`, `V` being the interpolant of degree `g − 1` with
//! `V(λ_k) = μ_k`; in those coordinates the flow is polynomial:
//!
//! ```text
//! U_ξ = 2i V,              U_η = −(2i/c) (U(0) V₁ − V(0) U₁)
//! V_ξ = i (W mod U),       V_η = (i/c) (W U₁ mod U)
//! ```
//!
//! with `W = (V² − R) / U`, `U₁ = (U − U(0)) / z`, `V₁ = (V − V(0)) / z`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::admissibility::Divisor;
use crate::poly;
use crate::spectral_curve::{CurvePoint, SpectralCurve};

/// Projections closer than this make the point velocities unusable.
pub const NEAR_COLLISION: f64 = 1e-9;
/// Switch to symmetric coordinates below this separation.
pub const COLLISION_WINDOW: f64 = 1e-6;
/// Largest on-curve residual tolerated after re-projection.
pub const STATE_RESIDUAL: f64 = 1e-8;

const PREDICTOR_RESIDUAL: f64 = 1e-6;
const MIN_STEP: f64 = 1e-13;
/// Integration-error allowance of the smoothed bands, in units of the step tolerance.
pub const BAND_FLOOR: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("divisor projections are {0:e} apart")]
    NearCollision(f64),
    #[error("step size underflow at s = {at} (last step {step:e})")]
    StepFailure { at: f64, step: f64 },
    #[error("divisor projection {0} approaches 0 or infinity")]
    SingularApproach(Complex64),
    #[error("divisor has {got} points, curve has genus {genus}")]
    DegreeMismatch { got: usize, genus: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Xi,
    Eta,
    X,
    T,
}

impl Direction {
    /// Weights of `∂_ξ` and `∂_η`.
    fn weights(self) -> (f64, f64) {
        match self {
            Direction::Xi => (1.0, 0.0),
            Direction::Eta => (0.0, 1.0),
            Direction::X => (0.25, 0.25),
            Direction::T => (0.25, -0.25),
        }
    }

    /// Displacement of `(x, t)` per unit of the flow parameter.
    fn xt_rate(self) -> (f64, f64) {
        match self {
            Direction::Xi => (2.0, 2.0),
            Direction::Eta => (2.0, -2.0),
            Direction::X => (1.0, 0.0),
            Direction::T => (0.0, 1.0),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Xi => "xi",
            Direction::Eta => "eta",
            Direction::X => "x",
            Direction::T => "t",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xi" => Ok(Direction::Xi),
            "eta" => Ok(Direction::Eta),
            "x" => Ok(Direction::X),
            "t" => Ok(Direction::T),
            other => Err(format!(
                "unknown direction {other:?} (expected xi, eta, x or t)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivisorState {
    pub points: Vec<CurvePoint>,
    pub x: f64,
    pub t: f64,
}

impl DivisorState {
    pub fn new(d: &Divisor, x: f64, t: f64) -> Self {
        Self {
            points: d.points.clone(),
            x,
            t,
        }
    }

    pub fn divisor(&self) -> Divisor {
        Divisor::new(self.points.clone())
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p.lambda).collect()
    }
}

#[derive(Debug, Clone)]
pub struct DivisorTrajectory {
    pub direction: Direction,
    /// Flow parameter of each state, starting at 0.
    pub s: Vec<f64>,
    pub states: Vec<DivisorState>,
    /// Unwrapped `u` at each state.
    pub u_samples: Vec<f64>,
}

/// `e^{iu} = Π (−λ_j) / √(ΠE)`.
pub fn potential(curve: &SpectralCurve, d: &Divisor) -> Complex64 {
    d.points.iter().map(|p| -p.lambda).product::<Complex64>() / curve.sqrt_prod()
}

fn min_separation(lambdas: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..lambdas.len() {
        for j in 0..i {
            best = best.min((lambdas[i] - lambdas[j]).norm());
        }
    }
    best
}

/// `∂λ_k / μ_k` for the given direction.
fn velocity_factors(
    curve: &SpectralCurve,
    lambdas: &[Complex64],
    dir: Direction,
) -> Result<Vec<Complex64>, DynamicsError> {
    let sep = min_separation(lambdas);
    if sep < NEAR_COLLISION {
        return Err(DynamicsError::NearCollision(sep));
    }
    let (a, b) = dir.weights();
    let i = Complex64::i();
    let u0: Complex64 = lambdas.iter().map(|&l| -l).product();
    let cst = curve.sqrt_prod();
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(k, &lk)| {
            let du: Complex64 = lambdas
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, &lj)| lk - lj)
                .product();
            let xi = -2.0 * i / du;
            let eta = 2.0 * i * u0 / (lk * cst * du);
            xi * a + eta * b
        })
        .collect())
}

/// Velocities `∂λ_k` of the divisor points.
pub fn dubrovin_rhs(
    curve: &SpectralCurve,
    state: &DivisorState,
    dir: Direction,
) -> Result<Vec<Complex64>, DynamicsError> {
    let w = velocity_factors(curve, &state.lambdas(), dir)?;
    Ok(state.points.iter().zip(w).map(|(p, w)| p.mu * w).collect())
}

/// `∂ log U(0) = Σ ∂λ_k / λ_k`; its imaginary part is `∂u`.
pub fn log_potential_rate(
    curve: &SpectralCurve,
    points: &[CurvePoint],
    dir: Direction,
) -> Result<Complex64, DynamicsError> {
    let lambdas: Vec<Complex64> = points.iter().map(|p| p.lambda).collect();
    let w = velocity_factors(curve, &lambdas, dir)?;
    Ok(points.iter().zip(w).map(|(p, w)| p.mu * w / p.lambda).sum())
}

/// Newton steps on `μ² − R(λ) = 0` along the minimal-norm correction.
fn project(curve: &SpectralCurve, p: CurvePoint) -> CurvePoint {
    let (mut l, mut mu) = (p.lambda, p.mu);
    for _ in 0..4 {
        let r = curve.eval_r(l);
        let f = mu * mu - r;
        if f.norm() <= 1e-16 * (1.0 + r.norm()) {
            break;
        }
        let a = -curve.eval_r_prime(l);
        let b = 2.0 * mu;
        let denom = a.norm_sqr() + b.norm_sqr();
        if denom == 0.0 {
            break;
        }
        l -= f * a.conj() / denom;
        mu -= f * b.conj() / denom;
    }
    CurvePoint::new(l, mu)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Mixed absolute/relative local error target.
    pub tol: f64,
    pub max_step: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Points,
    Symmetric,
}

/// Quantity integrated along the flow together with the state.
pub type Observable<'a> =
    Box<dyn Fn(f64, &[CurvePoint]) -> Result<Complex64, DynamicsError> + Sync + 'a>;

// Dormand–Prince 5(4).
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Adaptive integrator for one direction of the flow.
pub struct Flow<'a> {
    curve: &'a SpectralCurve,
    dir: Direction,
    opts: EvolveOptions,
    mode: Mode,
    /// `(λ, μ)` in point mode, `(U, V)` lower coefficients in symmetric mode.
    y: Vec<Complex64>,
    q: Vec<Complex64>,
    observables: Vec<Observable<'a>>,
    hint: Vec<Complex64>,
    r_coeffs: Vec<Complex64>,
    s: f64,
    h: f64,
    phase: f64,
    origin: (f64, f64),
}

impl<'a> Flow<'a> {
    pub fn new(
        curve: &'a SpectralCurve,
        start: &DivisorState,
        dir: Direction,
        opts: EvolveOptions,
    ) -> Result<Self, DynamicsError> {
        let g = curve.genus();
        if start.points.len() != g {
            return Err(DynamicsError::DegreeMismatch {
                got: start.points.len(),
                genus: g,
            });
        }
        let mut y: Vec<Complex64> = start.points.iter().map(|p| p.lambda).collect();
        y.extend(start.points.iter().map(|p| p.mu));
        let mut r_coeffs: Vec<Complex64> = poly::from_roots(&curve.all_branch_points());
        r_coeffs
            .iter_mut()
            .for_each(|z| *z = Complex64::new(z.re, 0.0));
        let phase = potential(curve, &start.divisor()).arg();
        let mut flow = Self {
            curve,
            dir,
            opts,
            mode: Mode::Points,
            y,
            q: Vec::new(),
            observables: Vec::new(),
            hint: start.lambdas(),
            r_coeffs,
            s: 0.0,
            h: opts.max_step.min(0.05),
            phase,
            origin: (start.x, start.t),
        };
        if min_separation(&flow.hint) < COLLISION_WINDOW {
            flow.enter_symmetric();
        }
        Ok(flow)
    }

    pub fn with_observable(mut self, f: Observable<'a>) -> Self {
        self.observables.push(f);
        self.q.push(Complex64::new(0.0, 0.0));
        self
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Unwrapped `u` at the current state.
    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// `∫_0^s` of each observable.
    pub fn integrals(&self) -> &[Complex64] {
        &self.q
    }

    pub fn state(&self) -> DivisorState {
        let points = self.points_of(&self.y, &self.hint);
        let (rx, rt) = self.dir.xt_rate();
        DivisorState {
            points,
            x: self.origin.0 + rx * self.s,
            t: self.origin.1 + rt * self.s,
        }
    }

    fn g(&self) -> usize {
        self.curve.genus()
    }

    fn points_of(&self, y: &[Complex64], hint: &[Complex64]) -> Vec<CurvePoint> {
        let g = self.g();
        match self.mode {
            Mode::Points => (0..g).map(|k| CurvePoint::new(y[k], y[g + k])).collect(),
            Mode::Symmetric => {
                let mut u = y[..g].to_vec();
                u.push(Complex64::new(1.0, 0.0));
                let lambdas = poly::roots_complex(&u, hint);
                lambdas
                    .into_iter()
                    .map(|l| CurvePoint::new(l, poly::eval_cc(&y[g..], l)))
                    .collect()
            }
        }
    }

    fn enter_symmetric(&mut self) {
        let g = self.g();
        let lambdas = self.y[..g].to_vec();
        let mus = self.y[g..].to_vec();
        let u = poly::from_roots(&lambdas);
        let v = poly::interpolate(&lambdas, &mus);
        self.y = u[..g].iter().chain(v.iter()).copied().collect();
        self.mode = Mode::Symmetric;
    }

    fn enter_points(&mut self) {
        let pts = self.points_of(&self.y, &self.hint);
        let g = self.g();
        self.mode = Mode::Points;
        let pts: Vec<CurvePoint> = pts.into_iter().map(|p| project(self.curve, p)).collect();
        self.y = pts
            .iter()
            .map(|p| p.lambda)
            .chain(pts.iter().map(|p| p.mu))
            .collect();
        debug_assert_eq!(self.y.len(), 2 * g);
    }

    fn rhs(
        &self,
        s: f64,
        y: &[Complex64],
    ) -> Result<(Vec<Complex64>, Vec<Complex64>), DynamicsError> {
        let g = self.g();
        let dy = match self.mode {
            Mode::Points => {
                let w = velocity_factors(self.curve, &y[..g], self.dir)?;
                let mut out = vec![Complex64::new(0.0, 0.0); 2 * g];
                for k in 0..g {
                    out[k] = y[g + k] * w[k];
                    out[g + k] = 0.5 * self.curve.eval_r_prime(y[k]) * w[k];
                }
                out
            }
            Mode::Symmetric => self.symmetric_rhs(y),
        };
        let dq = if self.observables.is_empty() {
            Vec::new()
        } else {
            let pts = self.points_of(y, &self.hint);
            self.observables
                .iter()
                .map(|f| f(s, &pts))
                .collect::<Result<Vec<_>, _>>()?
        };
        Ok((dy, dq))
    }

    fn symmetric_rhs(&self, y: &[Complex64]) -> Vec<Complex64> {
        let g = self.g();
        let zero = Complex64::new(0.0, 0.0);
        let i = Complex64::i();
        let cst = self.curve.sqrt_prod();
        let mut u = y[..g].to_vec();
        u.push(Complex64::new(1.0, 0.0));
        let v = &y[g..];
        let mut num = poly::mul_complex(v, v);
        num.resize(self.r_coeffs.len(), zero);
        for (n, r) in num.iter_mut().zip(&self.r_coeffs) {
            *n -= r;
        }
        let w = quotient_monic(&num, &u);
        let u1 = &u[1..];
        let mut v1 = v[1..].to_vec();
        v1.resize(g, zero);
        let (a, b) = self.dir.weights();
        let w_mod = poly::rem_monic(&w, &u);
        let wu1_mod = poly::rem_monic(&poly::mul_complex(&w, u1), &u);
        let mut out = Vec::with_capacity(2 * g);
        for j in 0..g {
            let u_xi = 2.0 * i * v[j];
            let u_eta = -(2.0 * i / cst) * (u[0] * v1[j] - v[0] * u1[j]);
            out.push(a * u_xi + b * u_eta);
        }
        for j in 0..g {
            let v_xi = i * w_mod[j];
            let v_eta = (i / cst) * wu1_mod[j];
            out.push(a * v_xi + b * v_eta);
        }
        out
    }

    fn phase_value(&self, y: &[Complex64]) -> Complex64 {
        let g = self.g();
        match self.mode {
            Mode::Points => y[..g].iter().map(|&l| -l).product(),
            Mode::Symmetric => y[0],
        }
    }

    /// Integrates to `s = target`, calling `on_step` after every accepted step.
    pub fn advance(
        &mut self,
        target: f64,
        on_step: &mut dyn FnMut(&Flow<'a>),
    ) -> Result<(), DynamicsError> {
        let dirn = if target >= self.s { 1.0 } else { -1.0 };
        let mut retries_without_progress = 0usize;
        while (target - self.s) * dirn > 1e-15 * (1.0 + target.abs()) {
            let remaining = (target - self.s).abs();
            let h = self.h.min(remaining).min(self.opts.max_step);
            match self.try_step(dirn * h)? {
                Some(err) => {
                    retries_without_progress = 0;
                    let grow = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    if h < remaining {
                        self.h = (h * grow).min(self.opts.max_step);
                    } else {
                        self.h = self.h.max(h * grow.min(1.0)).min(self.opts.max_step);
                    }
                    on_step(self);
                }
                None => {
                    retries_without_progress += 1;
                    if self.h < MIN_STEP || retries_without_progress > 200 {
                        return Err(DynamicsError::StepFailure {
                            at: self.s,
                            step: self.h,
                        });
                    }
                }
            }
        }
        self.s = target;
        Ok(())
    }

    /// One trial step; `Ok(None)` means rejected with a smaller step stored.
    fn try_step(&mut self, h: f64) -> Result<Option<f64>, DynamicsError> {
        let n = self.y.len();
        let nq = self.q.len();
        let mut ky: Vec<Vec<Complex64>> = Vec::with_capacity(7);
        let mut kq: Vec<Vec<Complex64>> = Vec::with_capacity(7);
        for stage in 0..7 {
            let mut yi = self.y.clone();
            for (j, kj) in ky.iter().enumerate() {
                let a = DP_A[stage][j] * h;
                if a != 0.0 {
                    for (y, k) in yi.iter_mut().zip(kj) {
                        *y += k * a;
                    }
                }
            }
            match self.rhs(self.s + DP_C[stage] * h, &yi) {
                Ok((dy, dq)) => {
                    ky.push(dy);
                    kq.push(dq);
                }
                Err(DynamicsError::NearCollision(_)) if self.mode == Mode::Points => {
                    self.enter_symmetric();
                    return Ok(None);
                }
                Err(DynamicsError::NearCollision(_)) => {
                    self.h = 0.5 * h.abs();
                    return Ok(None);
                }
                Err(e) => return Err(e),
            }
        }
        let mut y_new = self.y.clone();
        let mut q_new = self.q.clone();
        let mut err = 0.0f64;
        for i in 0..n {
            let mut inc = Complex64::new(0.0, 0.0);
            let mut e = Complex64::new(0.0, 0.0);
            for s in 0..7 {
                inc += ky[s][i] * DP_B[s];
                e += ky[s][i] * DP_E[s];
            }
            y_new[i] += inc * h;
            let sc = self.opts.tol * (1.0 + self.y[i].norm().max(y_new[i].norm()));
            err = err.max((e * h).norm() / sc);
        }
        for i in 0..nq {
            let mut inc = Complex64::new(0.0, 0.0);
            let mut e = Complex64::new(0.0, 0.0);
            for s in 0..7 {
                inc += kq[s][i] * DP_B[s];
                e += kq[s][i] * DP_E[s];
            }
            q_new[i] += inc * h;
            let sc = self.opts.tol * (1.0 + q_new[i].norm());
            err = err.max((e * h).norm() / sc);
        }
        if !err.is_finite() || err > 1.0 {
            let shrink = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.5)
            } else {
                0.25
            };
            self.h = h.abs() * shrink;
            return Ok(None);
        }

        let g = self.g();
        if self.mode == Mode::Points {
            for k in 0..g {
                let p = CurvePoint::new(y_new[k], y_new[g + k]);
                if p.residual(self.curve) > PREDICTOR_RESIDUAL {
                    self.h = 0.5 * h.abs();
                    return Ok(None);
                }
                let p = project(self.curve, p);
                if p.residual(self.curve) > STATE_RESIDUAL {
                    self.h = 0.5 * h.abs();
                    return Ok(None);
                }
                y_new[k] = p.lambda;
                y_new[g + k] = p.mu;
            }
        }
        let inc = (self.phase_value(&y_new) / self.phase_value(&self.y)).arg();
        if inc.abs() >= FRAC_PI_2 {
            self.h = 0.5 * h.abs();
            return Ok(None);
        }

        let pts = self.points_of(&y_new, &self.hint);
        let scale = self.curve.scale().max(1.0);
        for p in &pts {
            let r = p.lambda.norm();
            if r < 1e-8 * scale || r > 1e8 * scale || !r.is_finite() {
                return Err(DynamicsError::SingularApproach(p.lambda));
            }
        }
        self.y = y_new;
        self.q = q_new;
        self.s += h;
        self.phase += inc;
        self.hint = pts.iter().map(|p| p.lambda).collect();
        let sep = min_separation(&self.hint);
        match self.mode {
            Mode::Points if sep < COLLISION_WINDOW => self.enter_symmetric(),
            Mode::Symmetric if sep > 2.0 * COLLISION_WINDOW => self.enter_points(),
            _ => {}
        }
        Ok(Some(err))
    }
}

/// Quotient of `a` by the monic polynomial `m`.
fn quotient_monic(a: &[Complex64], m: &[Complex64]) -> Vec<Complex64> {
    let d = m.len() - 1;
    if a.len() <= d {
        return vec![Complex64::new(0.0, 0.0)];
    }
    let mut r = a.to_vec();
    let mut q = vec![Complex64::new(0.0, 0.0); a.len() - d];
    for i in (0..q.len()).rev() {
        let lead = r[i + d];
        q[i] = lead;
        for j in 0..=d {
            r[i + j] -= lead * m[j];
        }
    }
    q
}

/// Evolves `d0` from `(x, t) = (0, 0)` by `length` along `dir`, recording every accepted step.
pub fn evolve(
    curve: &SpectralCurve,
    d0: &Divisor,
    dir: Direction,
    length: f64,
    tol: f64,
) -> Result<DivisorTrajectory, DynamicsError> {
    evolve_with(
        curve,
        &DivisorState::new(d0, 0.0, 0.0),
        dir,
        length,
        EvolveOptions {
            tol,
            ..EvolveOptions::default()
        },
    )
}

pub fn evolve_with(
    curve: &SpectralCurve,
    start: &DivisorState,
    dir: Direction,
    length: f64,
    opts: EvolveOptions,
) -> Result<DivisorTrajectory, DynamicsError> {
    let mut flow = Flow::new(curve, start, dir, opts)?;
    let mut traj = DivisorTrajectory {
        direction: dir,
        s: vec![0.0],
        states: vec![flow.state()],
        u_samples: vec![flow.phase()],
    };
    flow.advance(length, &mut |f| {
        traj.s.push(f.s());
        traj.states.push(f.state());
        traj.u_samples.push(f.phase());
    })?;
    Ok(traj)
}

/// States at the requested parameter values (monotone, same sign), with unwrapped `u`.
pub fn evolve_to(
    curve: &SpectralCurve,
    start: &DivisorState,
    dir: Direction,
    targets: &[f64],
    opts: EvolveOptions,
) -> Result<Vec<(DivisorState, f64)>, DynamicsError> {
    let mut flow = Flow::new(curve, start, dir, opts)?;
    let mut out = Vec::with_capacity(targets.len());
    for &t in targets {
        flow.advance(t, &mut |_| {})?;
        out.push((flow.state(), flow.phase()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingEstimate {
    /// `(u(T) − u(0)) / 2πT`.
    pub density: f64,
    /// `max 2|u(x) − u(0) − 2π n̄ x| / 2πx` over `x ∈ [T/2, T]`.
    pub error_band: f64,
    /// `∫ w(x/T) u_x dx / (2π ∫ w(x/T) dx)` with a smooth bump `w`.
    pub smoothed: f64,
    /// Largest change of `smoothed` between horizons `T/4`, `T/2` and `T`, plus a floor
    /// proportional to the step tolerance.
    pub smoothed_band: f64,
    pub length: f64,
}

/// Smooth bump on `(0, 1)`, flat to all orders at both ends.
pub fn bump(tau: f64) -> f64 {
    if tau <= 0.0 || tau >= 1.0 {
        0.0
    } else {
        (-1.0 / (tau * (1.0 - tau))).exp()
    }
}

/// Winding of `u` along the `x` flow over `[0, T]`.
pub fn winding_density(
    curve: &SpectralCurve,
    d0: &Divisor,
    length: f64,
) -> Result<WindingEstimate, DynamicsError> {
    winding_density_with(curve, d0, length, EvolveOptions::default())
}

pub fn winding_density_with(
    curve: &SpectralCurve,
    d0: &Divisor,
    length: f64,
    opts: EvolveOptions,
) -> Result<WindingEstimate, DynamicsError> {
    let start = DivisorState::new(d0, 0.0, 0.0);
    let mut flow = Flow::new(curve, &start, Direction::X, opts)?;
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
                Ok(Complex64::new(
                    w * log_potential_rate(curve, pts, Direction::X)?.im,
                    0.0,
                ))
            }));
    }
    let u0 = flow.phase();
    let mut tail: Vec<(f64, f64)> = Vec::new();
    flow.advance(length, &mut |f| {
        if f.s() >= 0.5 * length {
            tail.push((f.s(), f.phase()));
        }
    })?;
    let du = flow.phase() - u0;
    let density = du / (2.0 * PI * length);
    let error_band = tail
        .iter()
        .filter(|(x, _)| *x > 0.0)
        .map(|&(x, u)| 2.0 * (u - u0 - 2.0 * PI * density * x).abs() / (2.0 * PI * x))
        .fold(0.0, f64::max);
    let q = flow.integrals();
    let smoothed = q[1].re / (2.0 * PI * q[0].re);
    let half = q[3].re / (2.0 * PI * q[2].re);
    let quarter = q[5].re / (2.0 * PI * q[4].re);
    Ok(WindingEstimate {
        density,
        error_band,
        smoothed,
        smoothed_band: (smoothed - half).abs().max((half - quarter).abs()) + BAND_FLOOR * opts.tol,
        length,
    })
}

/// `max |u_tt − u_xx + sin u|` over the interior of a grid `u[i][j] = u(x_i, t_j)`.
pub fn sg_operator_residual(u: &[Vec<f64>], hx: f64, ht: f64) -> f64 {
    let nx = u.len();
    let nt = u.first().map_or(0, Vec::len);
    let mut worst = 0.0f64;
    for i in 1..nx.saturating_sub(1) {
        for j in 1..nt.saturating_sub(1) {
            let utt = (u[i][j + 1] - 2.0 * u[i][j] + u[i][j - 1]) / (ht * ht);
            let uxx = (u[i + 1][j] - 2.0 * u[i][j] + u[i - 1][j]) / (hx * hx);
            worst = worst.max((utt - uxx + u[i][j].sin()).abs());
        }
    }
    worst
}

/// Unwrapped `u` on the grid `x_i = i hx`, `t_j = j ht`, starting from `d0` at the origin.
pub fn potential_grid(
    curve: &SpectralCurve,
    d0: &Divisor,
    nx: usize,
    nt: usize,
    hx: f64,
    ht: f64,
    opts: EvolveOptions,
) -> Result<Vec<Vec<f64>>, DynamicsError> {
    use rayon::prelude::*;
    let start = DivisorState::new(d0, 0.0, 0.0);
    let xs: Vec<f64> = (0..nx).map(|i| i as f64 * hx).collect();
    let ts: Vec<f64> = (0..nt).map(|j| j as f64 * ht).collect();
    let line = evolve_to(curve, &start, Direction::X, &xs, opts)?;
    line.par_iter()
        .map(|(state, u0)| {
            let col = evolve_to(curve, state, Direction::T, &ts, opts)?;
            let base = col[0].1;
            Ok(col.iter().map(|(_, u)| u - base + u0).collect())
        })
        .collect()
}

/// Largest residual of `u_tt − u_xx + sin u` on an `nx × nt` grid with spacing `h`.
pub fn pde_residual(
    curve: &SpectralCurve,
    d0: &Divisor,
    nx: usize,
    nt: usize,
    h: f64,
) -> Result<f64, DynamicsError> {
    let opts = EvolveOptions {
        tol: 1e-13,
        max_step: 0.1,
    };
    let u = potential_grid(curve, d0, nx, nt, h, h, opts)?;
    Ok(sg_operator_residual(&u, h, h))
}
