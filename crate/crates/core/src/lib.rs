//! Numerical toolkit for weighted modular Hardy-type inequalities with
//! variable exponents.
//!
//! Given a problem instance — a domain, an exponent field `p(x)`, a
//! nonnegative profile `u` solving `-Δ_{p(x)} u ≥ Φ`, a weight `σ`, and a
//! parameter `β` — the crate constructs the two weight measures of the
//! inequality
//!
//! ```text
//! ∫ |ξ|^{p(x)} dμ₁ ≤ ∫ |∇ξ|^{p(x)} dμ₂ + ∫ |ξ log ξ|^{p(x)} |∇p|^{p(x)}/p^{p(x)} dμ₂
//! ```
//!
//! checks every admissibility condition with witnesses, evaluates both sides
//! for compactly supported Lipschitz test functions by panel-based
//! Gauss–Legendre quadrature, and probes sharpness by maximizing the
//! left/right ratio over test-function families.

// Negated comparisons like `!(a < b)` are NaN guards; indexed loops walk
// several arrays in lockstep.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod conditions;
pub mod exponent;
pub mod fieldexpr;
pub mod geometry;
pub mod measures;
pub mod modular;
pub mod plaplace;
pub mod scenario;
pub mod testfn;
pub mod verify;

pub use exponent::ExponentField;
pub use fieldexpr::{Expr, ScalarField};
pub use geometry::{Cell, Domain};
pub use measures::{MeasurePair, WeightedMeasure};
pub use modular::{QuadOptions, QuadratureResult};
pub use scenario::{builtin, builtin_with, BuiltinSpec, Profile, RadialProfile, Scenario};
pub use testfn::{Family, TestFunction};
pub use verify::{sharpness_probe, verify_batch, verify_inequality, VerificationReport};
