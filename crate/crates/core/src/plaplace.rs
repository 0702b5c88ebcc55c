//! The variable-exponent Laplacian `div(|∇u|^{p(x)-2} ∇u)`: a closed radial
//! form, a finite-difference divergence of the flux, the weak pairing
//! against test functions, and a numerical check of the differential
//! inequality `-Δ_{p(x)} u ≥ Φ`.

use thiserror::Error;

use crate::exponent::ExponentField;
use crate::fieldexpr::{EvalError, ScalarField};
use crate::modular::{integrate_box, QuadError, QuadOptions};
use crate::scenario::{RadialProfile, Scenario};
use crate::testfn::TestFunction;

/// Default finite-difference step for the flux divergence.
pub const DEFAULT_FLUX_STEP: f64 = 1e-4;

/// How an operator value was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorMethod {
    RadialClosedForm,
    FiniteDifference { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorEval {
    pub value: f64,
    pub method: OperatorMethod,
}

/// Closed-form operator value for a radial profile `u(x) = v(|x|)`:
/// `|v'|^{p-2} [⟨∇p, x⟩ v' log|v'| / |x| + v''(p-1) + (n-1) v' / |x|]`.
///
/// Requires `|x| > 0` and `v'(|x|) ≠ 0` (the logarithm must be finite).
pub fn plaplacian_radial(
    profile: &RadialProfile,
    exponent: &ExponentField,
    x: &[f64],
) -> Result<f64, EvalError> {
    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(EvalError::Singular("radial operator at the origin".into()));
    }
    let n = x.len() as f64;
    let dv = profile.dv(r)?;
    if dv == 0.0 {
        return Err(EvalError::Singular(
            "radial operator where v' vanishes".into(),
        ));
    }
    let d2v = profile.d2v(r)?;
    let p = exponent.value(x)?;
    let gpx = exponent.grad_dot_x(x)?;
    let bracket = gpx * dv * dv.abs().ln() / r + d2v * (p - 1.0) + (n - 1.0) * dv / r;
    let value = dv.abs().powf(p - 2.0) * bracket;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::NonFinite("radial operator".into()))
    }
}

/// Flux `F(y) = |∇u(y)|^{p(y)-2} ∇u(y)`, singular where the gradient
/// vanishes and `p < 2`.
fn flux(u: &ScalarField, exponent: &ExponentField, y: &[f64]) -> Result<Vec<f64>, EvalError> {
    let g = u.gradient(y)?;
    let gn: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let p = exponent.value(y)?;
    if gn == 0.0 {
        if p < 2.0 {
            return Err(EvalError::Singular(
                "flux singular: vanishing gradient with p < 2".into(),
            ));
        }
        return Ok(vec![0.0; y.len()]);
    }
    let scale = gn.powf(p - 2.0);
    if !scale.is_finite() {
        return Err(EvalError::NonFinite("flux magnitude".into()));
    }
    Ok(g.into_iter().map(|v| scale * v).collect())
}

/// Central-difference divergence of the flux:
/// `Σ_i (F_i(x + h e_i) - F_i(x - h e_i)) / (2h)`.
///
/// Uses the analytic `∇u` when the field carries one, so only one layer of
/// differencing is involved.
pub fn plaplacian_general(
    u: &ScalarField,
    exponent: &ExponentField,
    x: &[f64],
    h: f64,
) -> Result<f64, EvalError> {
    let mut div = 0.0;
    let mut work = x.to_vec();
    for i in 0..x.len() {
        let xp = x[i] + h;
        let xm = x[i] - h;
        work[i] = xp;
        let fp = flux(u, exponent, &work)?[i];
        work[i] = xm;
        let fm = flux(u, exponent, &work)?[i];
        work[i] = x[i];
        div += (fp - fm) / (xp - xm);
    }
    if div.is_finite() {
        Ok(div)
    } else {
        Err(EvalError::NonFinite("flux divergence".into()))
    }
}

/// Evaluate both operator forms side by side where the scenario is radial;
/// the finite-difference value is always produced.
pub fn evaluate_both(
    s: &Scenario,
    x: &[f64],
    h: f64,
) -> Result<(Option<OperatorEval>, OperatorEval), EvalError> {
    let radial = match s.radial_profile() {
        Some(p) => Some(OperatorEval {
            value: plaplacian_radial(p, &s.exponent, x)?,
            method: OperatorMethod::RadialClosedForm,
        }),
        None => None,
    };
    let u = s.u_field();
    let fd = OperatorEval {
        value: plaplacian_general(&u, &s.exponent, x, h)?,
        method: OperatorMethod::FiniteDifference { step: h },
    };
    Ok((radial, fd))
}

/// Weak pairing `∫ |∇u|^{p(x)-2} ⟨∇u, ∇w⟩ dx` over the support of `w`.
pub fn weak_pairing(
    u: &ScalarField,
    exponent: &ExponentField,
    w: &TestFunction,
    opts: &QuadOptions,
) -> Result<f64, QuadError> {
    let support = w.support_box();
    let mut local = opts.clone();
    local.breakpoints = merge_breakpoints(&opts.breakpoints, &w.breakpoints());
    let integrand = |x: &[f64]| -> Result<f64, EvalError> {
        let gw = w.grad(x);
        if gw.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let f = flux(u, exponent, x)?;
        Ok(f.iter().zip(&gw).map(|(a, b)| a * b).sum())
    };
    Ok(integrate_box(integrand, &support.lo, &support.hi, &local)?.value)
}

/// Merge per-axis breakpoint lists.
pub fn merge_breakpoints(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len().max(b.len());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut axis: Vec<f64> = Vec::new();
        if let Some(v) = a.get(i) {
            axis.extend_from_slice(v);
        }
        if let Some(v) = b.get(i) {
            axis.extend_from_slice(v);
        }
        axis.sort_by(|x, y| x.partial_cmp(y).unwrap());
        axis.dedup();
        out.push(axis);
    }
    out
}

/// Absolute and relative tolerance for the inequality margin, calibrated
/// for two nested quadratures.
fn pdi_tolerance(pairing: f64) -> f64 {
    1e-6 + 1e-4 * pairing.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdiRow {
    pub witness: String,
    pub pairing: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdiReport {
    pub rows: Vec<PdiRow>,
    pub pass: bool,
}

#[derive(Debug, Error)]
pub enum PdiError {
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("witness must be nonnegative, found {value} at {point:?}")]
    SignedWitness { point: Vec<f64>, value: f64 },
}

/// Check `⟨-Δ_{p(x)} u, w⟩ ≥ ∫ Φ w` for each nonnegative witness.
pub fn pdi_check(
    s: &Scenario,
    witnesses: &[TestFunction],
    opts: &QuadOptions,
) -> Result<PdiReport, PdiError> {
    let u = s.u_field();
    let mut rows = Vec::with_capacity(witnesses.len());
    for w in witnesses {
        let support = w.support_box();
        for corner in [support.lo.clone(), support.center()] {
            let v = w.eval(&corner);
            if v < 0.0 {
                return Err(PdiError::SignedWitness { point: corner, value: v });
            }
        }
        let mut local = opts.clone();
        local.breakpoints = merge_breakpoints(
            &merge_breakpoints(&opts.breakpoints, &s.breakpoints),
            &w.breakpoints(),
        );
        let pairing = weak_pairing(&u, &s.exponent, w, &local)?;
        let phi = &s.phi;
        let rhs = integrate_box(
            |x: &[f64]| {
                let wv = w.eval(x);
                if wv == 0.0 {
                    return Ok(0.0);
                }
                Ok(phi.eval(x)? * wv)
            },
            &support.lo,
            &support.hi,
            &local,
        )?
        .value;
        let margin = pairing - rhs;
        rows.push(PdiRow {
            witness: w.describe(),
            pairing,
            rhs,
            margin,
            pass: margin >= -pdi_tolerance(pairing),
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(PdiReport { rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::scenario::{builtin, Profile};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn linear_profile_reduces_to_mean_curvature_term() {
        // v(r) = r: value is (n-1)/|x| for any exponent (log 1 = 0).
        let profile = RadialProfile::linear();
        let p = ExponentField::new(crate::fieldexpr::ScalarField::parse("2 + x1/4").unwrap());
        let x = [2.0, 0.0, 0.0];
        let v = plaplacian_radial(&profile, &p, &x).unwrap();
        assert_relative_eq!(v, 2.0 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn quadratic_profile_with_p_two_gives_dimension() {
        // v(r) = r²/2, p ≡ 2: the operator is the Laplacian of |x|²/2 = n.
        let profile = RadialProfile::power(2.0);
        let p = ExponentField::constant(2.0);
        let v = plaplacian_radial(&profile, &p, &[0.3, -0.4, 1.0]).unwrap();
        assert_relative_eq!(v, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn origin_and_critical_points_are_singular() {
        let profile = RadialProfile::linear();
        let p = ExponentField::constant(2.0);
        assert!(matches!(
            plaplacian_radial(&profile, &p, &[0.0, 0.0]),
            Err(EvalError::Singular(_))
        ));
        let flat = RadialProfile::new("1", |_| Ok(1.0), |_| Ok(0.0), |_| Ok(0.0));
        assert!(matches!(
            plaplacian_radial(&flat, &p, &[1.0]),
            Err(EvalError::Singular(_))
        ));
    }

    #[test]
    fn finite_difference_matches_laplacian_of_quadratic() {
        let u = ScalarField::from_fn("quad", |x: &[f64]| {
            Ok(0.5 * x.iter().map(|v| v * v).sum::<f64>())
        })
        .with_gradient(|x: &[f64]| Ok(x.to_vec()));
        let p = ExponentField::constant(2.0);
        let v = plaplacian_general(&u, &p, &[0.7, -0.2], DEFAULT_FLUX_STEP).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn orthant_exponential_matches_closed_form() {
        // u = e^{J}, p ≡ 2, n = 2: closed form S^{p/2} e^{(p-1)J} (p-1)
        // evaluates to 5 e^{J}.
        let u = ScalarField::from_fn("expJ", |x: &[f64]| Ok(crate::scenario::orthant_j(x).exp()))
            .with_gradient(|x: &[f64]| {
                let e = crate::scenario::orthant_j(x).exp();
                Ok((0..x.len()).map(|i| (i as f64 + 1.0) * e).collect())
            });
        let p = ExponentField::constant(2.0);
        let x = [0.0, 0.0];
        let v = plaplacian_general(&u, &p, &x, DEFAULT_FLUX_STEP).unwrap();
        assert_relative_eq!(v, 5.0, max_relative = 1e-7);
        let x = [0.3, 0.1];
        let expect = 5.0 * crate::scenario::orthant_j(&x).exp();
        let v = plaplacian_general(&u, &p, &x, DEFAULT_FLUX_STEP).unwrap();
        assert_relative_eq!(v, expect, max_relative = 1e-7);
    }

    #[test]
    fn radial_closed_form_is_the_oracle_for_finite_differences() {
        // u = |x| in n = 3 at |x| = 2: operator value (n-1)/|x| = 1.
        let s = {
            let mut spec = crate::scenario::BuiltinSpec::named("power_linear");
            spec.n = Some(3);
            crate::scenario::builtin_with(&spec).unwrap()
        };
        let u = s.u_field();
        let x = [2.0 / 3f64.sqrt(); 3];
        let fd = plaplacian_general(&u, &s.exponent, &x, DEFAULT_FLUX_STEP).unwrap();
        let radial =
            plaplacian_radial(s.radial_profile().unwrap(), &s.exponent, &x).unwrap();
        assert_relative_eq!(radial, 1.0, max_relative = 1e-12);
        assert_relative_eq!(fd, radial, max_relative = 1e-6);
    }

    #[test]
    fn radial_and_general_agree_for_nonconstant_exponent() {
        let profile = RadialProfile::exponential();
        let p = ExponentField::new(
            ScalarField::parse("2 + exp(-x1^2 - x2^2)").unwrap(),
        );
        let u = ScalarField::from_fn("exp(|x|)", |x: &[f64]| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(r.exp())
        })
        .with_gradient(|x: &[f64]| {
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 {
                return Err(EvalError::Singular("origin".into()));
            }
            Ok(x.iter().map(|xi| r.exp() * xi / r).collect())
        });
        let x = [1.0, 0.0];
        let radial = plaplacian_radial(&profile, &p, &x).unwrap();
        let fd = plaplacian_general(&u, &p, &x, 1e-4).unwrap();
        assert_relative_eq!(fd, radial, max_relative = 1e-4);
    }

    #[test]
    fn rotation_invariance_for_constant_exponent() {
        let profile = RadialProfile::power(2.0);
        let p = ExponentField::constant(3.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let base = plaplacian_radial(&profile, &p, &[1.3, 0.0]).unwrap();
        for _ in 0..20 {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = [1.3 * theta.cos(), 1.3 * theta.sin()];
            let v = plaplacian_radial(&profile, &p, &x).unwrap();
            assert_relative_eq!(v, base, max_relative = 1e-12);
        }
    }

    #[test]
    fn pairing_of_linear_field_telescopes_to_zero() {
        // u(x) = x, p ≡ 2: pairing = ∫ w' = 0 over the full tent support.
        let d = Domain::interval(0.0, 1.0).unwrap();
        let u = ScalarField::parse("x1").unwrap();
        let p = ExponentField::constant(2.0);
        let w = TestFunction::tent(0.5, 0.3, &d).unwrap();
        let opts = QuadOptions::with_resolution(16);
        let v = weak_pairing(&u, &p, &w, &opts).unwrap();
        assert!(v.abs() < 1e-12, "pairing {v} should vanish");
    }

    #[test]
    fn pairing_matches_integration_by_parts_for_quadratic_field() {
        // u = x²/2: ∫ x w' = -∫ w = -ρ for a unit tent of half-width ρ.
        let d = Domain::interval(0.0, 1.0).unwrap();
        let u = ScalarField::parse("x1^2/2").unwrap();
        let p = ExponentField::constant(2.0);
        let w = TestFunction::tent(0.5, 0.25, &d).unwrap();
        let opts = QuadOptions::with_resolution(16);
        let v = weak_pairing(&u, &p, &w, &opts).unwrap();
        assert_relative_eq!(v, -0.25, max_relative = 1e-10);
    }

    #[test]
    fn pairing_of_radial_cone_matches_weighted_mass() {
        // u = |x| in n = 2 has Δ_{p(x)} u = (n-1)/|x|, so by parts the
        // pairing equals -∫ (n-1)/|x| w dx; the oracle is direct
        // high-resolution quadrature of that weighted mass.
        let d = Domain::annulus(2, 0.5, 3.0).unwrap();
        let s = {
            let mut spec = crate::scenario::BuiltinSpec::named("power_linear");
            spec.n = Some(2);
            crate::scenario::builtin_with(&spec).unwrap()
        };
        let u = s.u_field();
        let w = TestFunction::radial_bump(&[1.5, 0.0], 0.4, &d).unwrap();
        let opts = QuadOptions::with_resolution(24);
        let pairing = weak_pairing(&u, &s.exponent, &w, &opts).unwrap();
        let cell = w.support_box();
        let oracle = integrate_box(
            |x: &[f64]| {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                Ok(w.eval(x) / r)
            },
            &cell.lo,
            &cell.hi,
            &QuadOptions::with_resolution(48),
        )
        .unwrap()
        .value;
        assert_relative_eq!(pairing, -oracle, max_relative = 1e-4);
    }

    #[test]
    fn pde_instance_attains_equality_and_offsets_shift_the_margin() {
        // Witnesses supported away from the profile kink at 0, where the
        // instance solves the equation exactly.
        let s = builtin("piecewise_1d").unwrap();
        let witnesses: Vec<TestFunction> = (0..10)
            .map(|i| {
                let c = if i < 5 {
                    -2.4 + 0.45 * i as f64
                } else {
                    0.6 + 0.45 * (i - 5) as f64
                };
                TestFunction::tent(c, 0.35, &s.domain).unwrap()
            })
            .collect();
        let opts = QuadOptions::with_resolution(24);
        let report = pdi_check(&s, &witnesses, &opts).unwrap();
        assert!(report.pass);
        for row in &report.rows {
            assert!(
                row.margin.abs() <= pdi_tolerance(row.pairing),
                "expected near-equality, margin {}",
                row.margin
            );
        }

        // Lowering Φ by 1 adds slack ≈ ∫w (= ρ for unit tents).
        let mut slack = s.clone();
        let phi = slack.phi.clone();
        slack.phi = ScalarField::from_fn("phi - 1", move |x| Ok(phi.eval(x)? - 1.0));
        let report = pdi_check(&slack, &witnesses, &opts).unwrap();
        assert!(report.pass);
        for row in &report.rows {
            assert_relative_eq!(row.margin, 0.35, epsilon = 1e-3);
        }

        // Raising Φ by 1 breaks the inequality for every witness.
        let mut broken = s.clone();
        let phi = broken.phi.clone();
        broken.phi = ScalarField::from_fn("phi + 1", move |x| Ok(phi.eval(x)? + 1.0));
        let report = pdi_check(&broken, &witnesses, &opts).unwrap();
        assert!(!report.pass);
        assert!(report.rows.iter().any(|r| !r.pass));
    }

    #[test]
    fn profile_kink_contributes_a_positive_atom_to_the_pairing() {
        // u = e(M - |x|) is concave at 0: the flux jumps by -2e^{p(0)-1}
        // there, so a witness straddling 0 sees the extra mass
        // 2 e^{p(0)-1} w(0) on top of ∫ Φ w. The inequality holds with
        // exactly that margin.
        let s = builtin("piecewise_1d").unwrap();
        let w = TestFunction::tent(-0.28, 0.35, &s.domain).unwrap();
        let report =
            pdi_check(&s, std::slice::from_ref(&w), &QuadOptions::with_resolution(32)).unwrap();
        assert!(report.pass);
        let p0 = s.exponent.value(&[0.0]).unwrap();
        let atom = 2.0 * std::f64::consts::E.powf(p0 - 1.0) * w.eval(&[0.0]);
        assert_relative_eq!(report.rows[0].margin, atom, max_relative = 1e-4);
    }

    #[test]
    fn orthant_closed_form_holds_for_nonconstant_exponent() {
        // The catalog forcing is the closed form
        // S^{p/2} e^{(p-1)J} [(J + log S/2)/S Σ j ∂p/∂x_j + p - 1]; it must
        // match the finite-difference divergence for p = 1 + e^{-J}.
        let s = builtin("orthant").unwrap();
        let u = s.u_field();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for x in crate::geometry::sample_points(&s.domain, 25, &mut rng) {
            let closed = -s.phi.eval(&x).unwrap();
            let fd = plaplacian_general(&u, &s.exponent, &x, 1e-4).unwrap();
            assert_relative_eq!(closed, fd, max_relative = 1e-4);
        }
    }

    #[test]
    fn both_evaluators_reported_for_radial_scenarios() {
        let s = builtin("exp").unwrap();
        let (radial, fd) = evaluate_both(&s, &[2.0], DEFAULT_FLUX_STEP).unwrap();
        let radial = radial.unwrap();
        assert_relative_eq!(radial.value, fd.value, max_relative = 1e-5);
        assert!(matches!(s.profile, Profile::Radial(_)));
    }
}
