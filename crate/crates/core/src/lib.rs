//! Tikhonov-Fenichel reduction of singularly perturbed autonomous ODE systems.
//!
//! A perturbed system `x' = h(x, eps) = h0(x) + eps h1(x) + eps^2 h*(x, eps)`
//! with a product decomposition `h0 = P(x) mu(x)` admits, on the slow manifold
//! `Y = V(mu)`, the reduced system `x' = q(x) = Q(x) h1(x)` where
//! `Q = Id - P (Dmu P)^{-1} Dmu` projects along the fast directions.
//!
//! The crate computes the reduction numerically, certifies the convergence
//! hypotheses at sample points (rank and eigenvalue-splitting conditions,
//! Hurwitz stability of the fast spectrum, invariance of a compact region,
//! Lyapunov certificates with explicit decay envelopes), and runs eps-sweeps
//! comparing full-system trajectories against reduced ones in slow time.
//!
//! Module map: [`dual`] forward-mode scalars, [`model`] systems and regions,
//! [`linalg`] characteristic polynomials and Hurwitz tests, [`reduction`]
//! decompositions and the projection, [`manifold`] charts, continuation and
//! fiber projection, [`conditions`] certifiers, [`integrate`] stiff/explicit
//! integration and convergence experiments, [`examples`] the built-in systems.

pub mod conditions;
pub mod dual;
pub mod examples;
pub mod integrate;
pub mod linalg;
pub mod manifold;
pub mod model;
pub mod reduction;
