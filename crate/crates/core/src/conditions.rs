//! Admissibility margins: the pointwise crucial margin
//! `Φ·u + σ|∇u|^{p(x)}`, the radial margin `K`, its power and exponential
//! specializations, the orthant slope bound, and per-family hypothesis
//! scans with witnesses.

use thiserror::Error;

use crate::exponent::ExponentField;
use crate::fieldexpr::{EvalError, ScalarField};
use crate::geometry::grid_points;
use crate::scenario::{orthant_j, orthant_s, orthant_weighted_grad, Scenario};

/// Nonnegativity checks tolerate this much rounding below zero, so exact
/// boundary cases (margin 0) pass.
pub const MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ConditionError {
    #[error("scenario profile is not radial")]
    NotRadial,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Pointwise crucial margin `Φ(x)·u(x) + σ(x)·|∇u(x)|^{p(x)}`.
pub fn crucial_margin(s: &Scenario, x: &[f64]) -> Result<f64, EvalError> {
    let u = s.u_field();
    let uv = u.eval(x)?;
    let g = u.gradient(x)?;
    let gn: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let p = s.exponent.value(x)?;
    let phi = s.phi.eval(x)?;
    let sigma = s.sigma.eval(x)?;
    let grad_term = if gn == 0.0 { 0.0 } else { gn.powf(p) };
    let m = phi * uv + sigma * grad_term;
    if m.is_finite() {
        Ok(m)
    } else {
        Err(EvalError::NonFinite("crucial margin".into()))
    }
}

/// Radial margin
/// `K(x) = σ(x) - (v/v')[⟨∇p,x⟩ log|v'|/|x| + (v''/v')(p-1) + (n-1)/|x|]`.
pub fn radial_margin(s: &Scenario, x: &[f64]) -> Result<f64, ConditionError> {
    let profile = s.radial_profile().ok_or(ConditionError::NotRadial)?;
    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(EvalError::Singular("radial margin at the origin".into()).into());
    }
    let n = x.len() as f64;
    let v = profile.v(r)?;
    let dv = profile.dv(r)?;
    if dv == 0.0 {
        return Err(EvalError::Singular("radial margin where v' vanishes".into()).into());
    }
    let d2v = profile.d2v(r)?;
    let p = s.exponent.value(x)?;
    let gpx = s.exponent.grad_dot_x(x)?;
    let sigma = s.sigma.eval(x)?;
    let bracket = gpx * dv.abs().ln() / r + (d2v / dv) * (p - 1.0) + (n - 1.0) / r;
    Ok(sigma - (v / dv) * bracket)
}

/// Power-profile margin
/// `K_α(x) = σ(x) - [(α-1)(⟨∇p,x⟩ log|x| + p(x)) + n - α]/α`.
pub fn power_margin(
    exponent: &ExponentField,
    sigma: &ScalarField,
    alpha: f64,
    n: usize,
    x: &[f64],
) -> Result<f64, EvalError> {
    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(EvalError::Singular("power margin at the origin".into()));
    }
    let p = exponent.value(x)?;
    let gpx = exponent.grad_dot_x(x)?;
    let s = sigma.eval(x)?;
    Ok(s - ((alpha - 1.0) * (gpx * r.ln() + p) + n as f64 - alpha) / alpha)
}

/// Exponential-profile margin
/// `K^e(x) = σ(x) - ⟨∇p,x⟩ - p(x) + 1 + (1-n)/|x|`.
pub fn exp_margin(
    exponent: &ExponentField,
    sigma: &ScalarField,
    n: usize,
    x: &[f64],
) -> Result<f64, EvalError> {
    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(EvalError::Singular("exp margin at the origin".into()));
    }
    let p = exponent.value(x)?;
    let gpx = exponent.grad_dot_x(x)?;
    let s = sigma.eval(x)?;
    Ok(s - gpx - p + 1.0 + (1.0 - n as f64) / r)
}

/// Margin of the `σ = β - 2(p-1)` power-weight choice:
/// `s̄ = (β - n + 3)/2 - p⁺`.
pub fn power_choice_bound(beta: f64, n: usize, p_plus: f64) -> f64 {
    (beta - n as f64 + 3.0) / 2.0 - p_plus
}

/// Margin of the `σ = β - 2(p-1)/α` choice for power profiles:
/// `s̄ = (αβ + 2 - n + α - (α-1)C_L)/(α+1) - p⁺`.
pub fn power_alpha_choice_bound(alpha: f64, beta: f64, n: usize, c_l: f64, p_plus: f64) -> f64 {
    (alpha * beta + 2.0 - n as f64 + alpha - (alpha - 1.0) * c_l) / (alpha + 1.0) - p_plus
}

/// Margin of the `σ = β - 2(p-1)` choice for the exponential profile:
/// `k̄ = (β + C_e)/3 + 1 - p⁺`.
pub fn exp_choice_bound(beta: f64, c_e: f64, p_plus: f64) -> f64 {
    (beta + c_e) / 3.0 + 1.0 - p_plus
}

/// Orthant slope condition: `Σ_j j ∂p/∂x_j < T(x)` with
/// `T(x) = -Sβ/(J(x) + log S / 2)`; returns `T(x) - Σ_j j ∂p/∂x_j`.
pub fn orthant_slope_margin(s: &Scenario, x: &[f64]) -> Result<f64, EvalError> {
    let n = s.dim();
    let sv = orthant_s(n);
    let j = orthant_j(x);
    let t = -sv * s.beta / (j + sv.ln() / 2.0);
    Ok(t - orthant_weighted_grad(&s.exponent, x)?)
}

/// One scanned condition: minimum margin over a grid with the witness point
/// attaining it. Nodes where the margin is singular (`v' = 0`, origin) are
/// skipped and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub name: String,
    pub min_margin: f64,
    pub witness: Vec<f64>,
    pub pass: bool,
    pub resolution: usize,
    pub skipped: usize,
}

/// Scan a pointwise margin over the domain grid.
pub fn scan_margin<F>(
    name: &str,
    s: &Scenario,
    resolution: usize,
    margin: F,
) -> Result<ConditionReport, EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let mut min_margin = f64::INFINITY;
    let mut witness = Vec::new();
    let mut skipped = 0usize;
    for pt in grid_points(&s.domain, resolution) {
        match margin(&pt) {
            Ok(m) => {
                if m < min_margin {
                    min_margin = m;
                    witness = pt;
                }
            }
            Err(EvalError::Singular(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(ConditionReport {
        name: name.into(),
        min_margin,
        pass: min_margin >= -MARGIN_TOL,
        witness,
        resolution,
        skipped,
    })
}

/// Hypothesis reports for a scenario family.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HypothesisReports {
    pub reports: Vec<ConditionReport>,
    pub warnings: Vec<String>,
}

impl HypothesisReports {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Run the family-specific hypothesis scans. An unknown family yields no
/// reports and a warning.
pub fn hypothesis_reports(
    s: &Scenario,
    resolution: usize,
) -> Result<HypothesisReports, ConditionError> {
    let mut out = HypothesisReports::default();
    let n = s.dim();
    match s.family.as_str() {
        "power_linear" => {
            out.reports.push(scan_margin(
                "sigma_at_least_n_minus_1",
                s,
                resolution,
                |x| Ok(s.sigma.eval(x)? - (n as f64 - 1.0)),
            )?);
            out.reports
                .push(scan_margin("radial_margin_nonneg", s, resolution, |x| {
                    radial_margin(s, x).map_err(flatten)
                })?);
        }
        "power_alpha" => {
            let alpha = s.params.alpha.unwrap_or(1.0);
            let c_l = s.params.c_l.unwrap_or(0.0);
            out.reports.push(scan_margin(
                "alpha_sigma_hypothesis",
                s,
                resolution,
                |x| {
                    let sigma = s.sigma.eval(x)?;
                    let p = s.exponent.value(x)?;
                    Ok(alpha * sigma - n as f64 + alpha - p * (alpha - 1.0)
                        - (alpha - 1.0) * c_l)
                },
            )?);
            // C_L brackets ⟨∇p,x⟩ log|x|: from below for α ≥ 1, from above
            // for 0 < α < 1.
            let name = if alpha >= 1.0 {
                "c_l_lower_bounds_grad_log_term"
            } else {
                "c_l_upper_bounds_grad_log_term"
            };
            out.reports.push(scan_margin(name, s, resolution, |x| {
                let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let l = s.exponent.grad_dot_x(x)? * r.ln();
                Ok(if alpha >= 1.0 { l - c_l } else { c_l - l })
            })?);
            out.reports
                .push(scan_margin("radial_margin_nonneg", s, resolution, |x| {
                    radial_margin(s, x).map_err(flatten)
                })?);
        }
        "sigma_choice_power" => {
            let bounds = crate::exponent::validate_exponent(&s.exponent, &s.domain, resolution)?;
            let margin = power_choice_bound(s.beta, n, bounds.p_plus);
            out.reports.push(ConditionReport {
                name: "p_plus_below_power_threshold".into(),
                min_margin: margin,
                witness: Vec::new(),
                pass: margin >= -MARGIN_TOL,
                resolution,
                skipped: 0,
            });
            out.reports.push(scan_margin(
                "sigma_at_least_n_minus_1",
                s,
                resolution,
                |x| Ok(s.sigma.eval(x)? - (n as f64 - 1.0)),
            )?);
            out.reports
                .push(scan_margin("radial_margin_nonneg", s, resolution, |x| {
                    radial_margin(s, x).map_err(flatten)
                })?);
        }
        "exp" => {
            let c_e = s.params.c_e.unwrap_or(0.0);
            out.reports.push(scan_margin(
                "grad_p_dot_x_above_c_e",
                s,
                resolution,
                |x| Ok(s.exponent.grad_dot_x(x)? - c_e),
            )?);
            out.reports
                .push(scan_margin("exp_sigma_hypothesis", s, resolution, |x| {
                    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let sigma = s.sigma.eval(x)?;
                    let p = s.exponent.value(x)?;
                    Ok(r * sigma - r * (c_e + p - 1.0) - (n as f64 - 1.0))
                })?);
            out.reports
                .push(scan_margin("radial_margin_nonneg", s, resolution, |x| {
                    radial_margin(s, x).map_err(flatten)
                })?);
        }
        "piecewise_1d" => {
            out.reports
                .push(scan_margin("radial_margin_nonneg", s, resolution, |x| {
                    radial_margin(s, x).map_err(flatten)
                })?);
        }
        "orthant" => {
            out.reports
                .push(scan_margin("orthant_slope_bound", s, resolution, |x| {
                    orthant_slope_margin(s, x)
                })?);
        }
        other => {
            out.warnings
                .push(format!("no hypothesis set for family `{other}`"));
        }
    }
    Ok(out)
}

fn flatten(e: ConditionError) -> EvalError {
    match e {
        ConditionError::Eval(e) => e,
        ConditionError::NotRadial => EvalError::Singular("profile is not radial".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_points;
    use crate::scenario::{builtin, builtin_with, BuiltinSpec, Profile, RadialProfile};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn linear_profile_margin_cancels_exactly_at_sigma_n_minus_1() {
        // v(r) = r, σ ≡ n-1, Φ = -(n-1)/|x|: margin is 0.
        let mut spec = BuiltinSpec::named("power_linear");
        spec.n = Some(3);
        spec.sigma_const = Some(2.0);
        spec.beta = Some(3.0);
        let s = builtin_with(&spec).unwrap();
        let m = crucial_margin(&s, &[1.2, 0.3, 0.9]).unwrap();
        assert!(m.abs() < 1e-12, "margin {m}");
    }

    #[test]
    fn crucial_margin_equals_grad_power_times_radial_margin() {
        // On radial instances driven by the exact forcing, the identity
        // Φ·u + σ|∇u|^p = |v'|^p K holds pointwise.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for name in ["power_linear", "power_alpha", "exp", "piecewise_1d"] {
            let s = builtin(name).unwrap();
            let profile = s.radial_profile().unwrap();
            for x in sample_points(&s.domain, 50, &mut rng) {
                let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let dv = profile.dv(r).unwrap();
                let p = s.exponent.value(&x).unwrap();
                let lhs = crucial_margin(&s, &x).unwrap();
                let rhs = dv.abs().powf(p) * radial_margin(&s, &x).unwrap();
                let denom = 1.0 + lhs.abs().max(rhs.abs());
                assert!(
                    (lhs - rhs).abs() / denom <= 1e-10,
                    "{name}: {lhs} vs {rhs} at {x:?}"
                );
            }
        }
    }

    #[test]
    fn radial_margin_specializes_to_power_margin() {
        let mut spec = BuiltinSpec::named("power_alpha");
        spec.alpha = Some(2.0);
        let mut s = builtin_with(&spec).unwrap();
        // Use a nonconstant exponent to exercise the gradient term.
        s.exponent = ExponentField::new(
            ScalarField::parse("2 + x1/8 + x2/16").unwrap(),
        );
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for x in sample_points(&s.domain, 100, &mut rng) {
            let k = radial_margin(&s, &x).unwrap();
            let ka = power_margin(&s.exponent, &s.sigma, 2.0, s.dim(), &x).unwrap();
            assert!((k - ka).abs() <= 1e-12, "{k} vs {ka} at {x:?}");
        }
    }

    #[test]
    fn radial_margin_specializes_to_exp_margin() {
        let s = builtin("exp").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for x in sample_points(&s.domain, 100, &mut rng) {
            let k = radial_margin(&s, &x).unwrap();
            let ke = exp_margin(&s.exponent, &s.sigma, s.dim(), &x).unwrap();
            assert!((k - ke).abs() <= 1e-12, "{k} vs {ke} at {x:?}");
        }
    }

    #[test]
    fn power_margin_alpha_one_collapses() {
        let p = ExponentField::new(ScalarField::parse("2 + x1/4").unwrap());
        let sigma = ScalarField::constant(4.0);
        let m = power_margin(&p, &sigma, 1.0, 3, &[1.0, 1.0, 0.5]).unwrap();
        assert_relative_eq!(m, 4.0 - 2.0, max_relative = 1e-12);
    }

    #[test]
    fn power_margin_direct_substitution() {
        // p ≡ 2, σ ≡ 5, α = 2, n = 3, |x| = 1: 5 - [(1)(0+2) + 1]/2 = 3.5.
        let p = ExponentField::constant(2.0);
        let sigma = ScalarField::constant(5.0);
        let m = power_margin(&p, &sigma, 2.0, 3, &[1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(m, 3.5);
    }

    #[test]
    fn exp_margin_direct_substitution() {
        // n = 1, σ ≡ 5, p ≡ 2, ∇p = 0: 5 - 0 - 2 + 1 + 0 = 4.
        let p = ExponentField::constant(2.0);
        let sigma = ScalarField::constant(5.0);
        let m = exp_margin(&p, &sigma, 1, &[1.7]).unwrap();
        assert_relative_eq!(m, 4.0);
    }

    #[test]
    fn choice_bounds_match_hand_arithmetic() {
        assert_relative_eq!(power_choice_bound(10.0, 3, 2.0), 3.0);
        assert_relative_eq!(exp_choice_bound(8.0, 1.0, 4.0), 0.0);
        // α = 1 collapses to the linear bound with C_L irrelevant.
        assert_relative_eq!(
            power_alpha_choice_bound(1.0, 10.0, 3, 123.0, 2.0),
            power_choice_bound(10.0, 3, 2.0)
        );
    }

    #[test]
    fn margin_is_affine_in_sigma_with_gradient_power_slope() {
        let s = builtin("exp").unwrap();
        let x = [1.7];
        let base = crucial_margin(&s, &x).unwrap();
        let p = s.exponent.value(&x).unwrap();
        let grad_pow = s.u_field().gradient(&x).unwrap()[0].abs().powf(p);
        for delta in [0.5, 2.0] {
            let mut shifted = s.clone();
            let sig = s.sigma.clone();
            shifted.sigma =
                ScalarField::from_fn("sigma+d", move |y| Ok(sig.eval(y)? + delta));
            let m = crucial_margin(&shifted, &x).unwrap();
            assert_relative_eq!(m - base, delta * grad_pow, max_relative = 1e-10);
        }
    }

    #[test]
    fn hypothesis_reports_for_default_instances() {
        for name in ["power_linear", "power_alpha", "exp", "sigma_choice_power"] {
            let s = builtin(name).unwrap();
            let h = hypothesis_reports(&s, 33).unwrap();
            assert!(h.warnings.is_empty());
            assert!(h.pass(), "{name}: {:#?}", h.reports);
        }
    }

    #[test]
    fn power_linear_margin_value() {
        let s = builtin("power_linear").unwrap();
        let h = hypothesis_reports(&s, 21).unwrap();
        let r = h
            .reports
            .iter()
            .find(|r| r.name == "sigma_at_least_n_minus_1")
            .unwrap();
        assert_relative_eq!(r.min_margin, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn piecewise_radial_margin_fails_as_specified() {
        // This instance's σ makes K negative on both branches; the scan
        // reports it while validation still passes.
        let s = builtin("piecewise_1d").unwrap();
        let h = hypothesis_reports(&s, 61).unwrap();
        assert_eq!(h.reports.len(), 1);
        assert!(!h.reports[0].pass);
        assert!(h.reports[0].min_margin < 0.0);
        assert!(h.reports[0].skipped >= 1, "origin node should be skipped");
    }

    #[test]
    fn orthant_margin_matches_flux_divergence_route() {
        // Closed-form margin S^{p/2} e^{pJ} (β - (J + log S / 2)/S · Σ j ∂p/∂x_j)
        // against Φ·u + σ|∇u|^p with Φ from finite differences.
        let s = builtin("orthant").unwrap();
        let u = s.u_field();
        let sv = orthant_s(s.dim());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for x in sample_points(&s.domain, 30, &mut rng) {
            let p = s.exponent.value(&x).unwrap();
            let j = orthant_j(&x);
            let d = orthant_weighted_grad(&s.exponent, &x).unwrap();
            let closed =
                sv.powf(p / 2.0) * (p * j).exp() * (s.beta - (j + sv.ln() / 2.0) / sv * d);

            let fd_phi =
                -crate::plaplace::plaplacian_general(&u, &s.exponent, &x, 1e-4).unwrap();
            let g = u.gradient(&x).unwrap();
            let gn: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let sigma = s.sigma.eval(&x).unwrap();
            let via_fd = fd_phi * u.eval(&x).unwrap() + sigma * gn.powf(p);
            assert_relative_eq!(closed, via_fd, max_relative = 1e-4);
        }
    }

    #[test]
    fn unknown_family_warns_and_reports_nothing() {
        let mut s = builtin("power_linear").unwrap();
        s.family = "mystery".into();
        let h = hypothesis_reports(&s, 9).unwrap();
        assert!(h.reports.is_empty());
        assert_eq!(h.warnings.len(), 1);
    }

    #[test]
    fn zero_margin_passes_under_tolerance() {
        // σ ≡ n-1 sits exactly on the boundary of the linear-profile
        // hypothesis and must pass.
        let mut spec = BuiltinSpec::named("power_linear");
        spec.n = Some(1);
        spec.sigma_const = Some(0.0);
        spec.beta = Some(1.0);
        let s = builtin_with(&spec).unwrap();
        let h = hypothesis_reports(&s, 21).unwrap();
        assert!(h.pass(), "{:#?}", h.reports);
    }

    #[test]
    fn radial_margin_requires_radial_profile() {
        let s = builtin("orthant").unwrap();
        assert!(matches!(
            radial_margin(&s, &[0.5, 0.5]),
            Err(ConditionError::NotRadial)
        ));
        assert!(matches!(s.profile, Profile::General(_)));
        let _ = RadialProfile::linear();
    }
}
