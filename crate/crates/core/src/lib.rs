//! Real finite-gap solutions of the Sine-Gordon equation `u_tt − u_xx + sin u = 0`.
//!
//! The spectral data is a real hyperelliptic curve `μ² = λ Π (λ − E_j)` together
//! with an admissible divisor. The crate classifies the `2^m` real components of
//! the isospectral set, evaluates the density of topological charge from the
//! b-periods of the quasimomentum differential, and checks it against the
//! winding of `u` obtained by integrating the divisor dynamics.

pub mod admissibility;
pub mod averaging;
pub mod dynamics;
pub mod periods;
pub mod poly;
pub mod quadrature;
pub mod spectral_curve;

pub use num_complex::Complex64;
