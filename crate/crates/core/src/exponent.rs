//! Variable exponent fields `p(x)`: admissibility checks, a sampled
//! log-Hölder modulus, and Luxemburg-norm computation.
//!
//! An admissible exponent is bounded between finite values strictly above 1.
//! Essential bounds are approximated by grid extrema, which converge for the
//! continuous exponents used throughout; the log-Hölder estimator likewise
//! reports a sampled lower bound on the true modulus constant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fieldexpr::{EvalError, ScalarField};
use crate::geometry::{grid_points, sample_points, Domain};
use crate::modular::{integrate, QuadOptions, QuadratureResult};

/// A variable exponent with an optional analytic gradient and a flag that
/// marks it as identically constant (which zeroes every gradient-driven
/// term exactly).
#[derive(Debug, Clone)]
pub struct ExponentField {
    field: ScalarField,
    declared_constant: bool,
}

impl ExponentField {
    pub fn new(field: ScalarField) -> Self {
        ExponentField {
            field,
            declared_constant: false,
        }
    }

    /// A constant exponent `p ≡ p0`.
    pub fn constant(p0: f64) -> Self {
        ExponentField {
            field: ScalarField::constant(p0),
            declared_constant: true,
        }
    }

    /// Mark a (possibly closure-backed) field as identically constant.
    pub fn declared_constant(field: ScalarField) -> Self {
        ExponentField {
            field,
            declared_constant: true,
        }
    }

    pub fn is_declared_constant(&self) -> bool {
        self.declared_constant
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.field.eval(x)
    }

    /// Gradient of the exponent: exactly zero when declared constant,
    /// analytic when attached, central differences otherwise.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        if self.declared_constant {
            return Ok(vec![0.0; x.len()]);
        }
        self.field.gradient(x)
    }

    pub fn grad_norm(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self
            .grad(x)?
            .iter()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt())
    }

    /// `⟨∇p(x), x⟩`.
    pub fn grad_dot_x(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self
            .grad(x)?
            .iter()
            .zip(x)
            .map(|(g, xi)| g * xi)
            .sum())
    }
}

/// Sampled exponent bounds over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentBounds {
    pub p_minus: f64,
    pub p_plus: f64,
    pub ok: bool,
}

/// Scan the closure of the domain on a grid and report min/max of `p`.
/// `ok` requires the sampled minimum to stay strictly above 1 and all values
/// finite. True essential bounds and local integrability of the class
/// integrands `p^p`, `|∇p|^p` are not computable from samples; the scan
/// additionally requires those integrands to be finite at every node.
pub fn validate_exponent(
    field: &ExponentField,
    domain: &Domain,
    resolution: usize,
) -> Result<ExponentBounds, EvalError> {
    let mut p_minus = f64::INFINITY;
    let mut p_plus = f64::NEG_INFINITY;
    let mut integrands_finite = true;
    for pt in grid_points(domain, resolution) {
        let v = field.value(&pt)?;
        if !v.is_finite() {
            return Err(EvalError::NonFinite("exponent sample".into()));
        }
        if v > 0.0 && !(v.powf(v).is_finite() && field.grad_norm(&pt)?.powf(v).is_finite()) {
            integrands_finite = false;
        }
        p_minus = p_minus.min(v);
        p_plus = p_plus.max(v);
    }
    let ok = p_minus > 1.0 && p_minus.is_finite() && p_plus.is_finite() && integrands_finite;
    Ok(ExponentBounds { p_minus, p_plus, ok })
}

/// Sampled lower bound for the log-Hölder modulus constant:
/// `sup |p(x) - p(y)| * log(e + 1/|x - y|)` over `num_pairs` random pairs.
/// The true supremum is not computable from samples, so this is a lower
/// bound by construction.
pub fn log_holder_constant(
    field: &ExponentField,
    domain: &Domain,
    num_pairs: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    let pts = sample_points(domain, 2 * num_pairs, &mut rng);
    for pair in pts.chunks_exact(2) {
        let (x, y) = (&pair[0], &pair[1]);
        let d: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if d == 0.0 {
            continue;
        }
        let diff = (field.value(x)? - field.value(y)?).abs();
        let v = diff * (std::f64::consts::E + 1.0 / d).ln();
        best = best.max(v);
    }
    Ok(best)
}

#[derive(Debug, Error)]
pub enum LuxemburgError {
    #[error("modular integral failed: {0}")]
    Quadrature(#[from] crate::modular::QuadError),
    #[error("modular stayed {} 1 while bracketing", if *.diverging { "above" } else { "below" })]
    NoBracket { diverging: bool },
    #[error("tolerance must be positive")]
    BadTolerance,
}

const BRACKET_CAP: usize = 200;

/// Modular `∫ |f(x)/λ|^{p(x)} dx` over the domain.
pub fn modular_of(
    f: &ScalarField,
    field: &ExponentField,
    domain: &Domain,
    lambda: f64,
    opts: &QuadOptions,
) -> Result<QuadratureResult, crate::modular::QuadError> {
    integrate(
        |x: &[f64]| {
            let t = (f.eval(x)? / lambda).abs();
            let p = field.value(x)?;
            if t == 0.0 {
                return Ok(0.0);
            }
            let v = t.powf(p);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(EvalError::NonFinite("modular integrand".into()))
            }
        },
        domain,
        opts,
    )
}

/// Luxemburg norm `inf { λ > 0 : ∫ |f/λ|^{p(x)} ≤ 1 }` by bisection on the
/// monotone map λ ↦ modular(f/λ). Returns 0 for `f ≡ 0`; stops when the
/// modular is within `tol` of 1 and the bracket is tight.
pub fn luxemburg_norm(
    f: &ScalarField,
    field: &ExponentField,
    domain: &Domain,
    tol: f64,
    opts: &QuadOptions,
) -> Result<f64, LuxemburgError> {
    if tol <= 0.0 {
        return Err(LuxemburgError::BadTolerance);
    }
    let modular = |lambda: f64| -> Result<f64, LuxemburgError> {
        Ok(modular_of(f, field, domain, lambda, opts)?.value)
    };
    let m1 = modular(1.0)?;
    if m1 == 0.0 {
        return Ok(0.0);
    }
    // Bracket: grow λ_hi until modular ≤ 1, shrink λ_lo until modular ≥ 1.
    let (mut lo, mut hi);
    if m1 > 1.0 {
        lo = 1.0;
        hi = 2.0;
        let mut steps = 0;
        while modular(hi)? > 1.0 {
            hi *= 2.0;
            steps += 1;
            if steps >= BRACKET_CAP {
                return Err(LuxemburgError::NoBracket { diverging: true });
            }
        }
    } else {
        hi = 1.0;
        lo = 0.5;
        let mut steps = 0;
        loop {
            let m = modular(lo)?;
            if m >= 1.0 {
                break;
            }
            if m == 0.0 {
                // Dividing by ever smaller λ never raised the modular: the
                // field vanishes a.e. on the domain.
                return Ok(0.0);
            }
            lo *= 0.5;
            steps += 1;
            if steps >= BRACKET_CAP {
                return Err(LuxemburgError::NoBracket { diverging: false });
            }
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..BRACKET_CAP {
        mid = 0.5 * (lo + hi);
        let m = modular(mid)?;
        let tight = (hi - lo) <= tol * mid.max(1e-300);
        if (m - 1.0).abs() <= tol && tight {
            return Ok(mid);
        }
        if m > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}
