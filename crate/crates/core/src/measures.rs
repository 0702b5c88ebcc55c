//! Weight measures for the two sides of the inequality, as densities against
//! Lebesgue measure with explicit support predicates.
//!
//! Three constructors: the general form driven by `(Φ, u, σ, β)`, the
//! quasi-radial form driven by `(v, v', v'', σ, β)`, and fixed closed-form
//! weights per family (power, power with `σ = β - 2(p-1)`, power-α,
//! exponential and its `σ`-choice variant, orthant). The general form
//! applies the factor `2^{p-1}` only where `∇p ≠ 0`; the family forms carry
//! it unconditionally, which makes them pointwise upper bounds for the
//! right-hand side weight.

use std::sync::Arc;

use thiserror::Error;

use crate::conditions::{exp_margin, power_margin, radial_margin, ConditionError};
use crate::exponent::validate_exponent;
use crate::fieldexpr::EvalError;
use crate::geometry::grid_points;
use crate::scenario::{orthant_j, orthant_s, orthant_weighted_grad, Scenario};

type DensityFn = dyn Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync;
type SupportFn = dyn Fn(&[f64]) -> Result<bool, EvalError> + Send + Sync;

/// A density against Lebesgue measure. Outside the support predicate the
/// density evaluates to exactly 0, which realizes the characteristic
/// functions carried by the weights.
#[derive(Clone)]
pub struct WeightedMeasure {
    density: Arc<DensityFn>,
    support: Arc<SupportFn>,
    label: Arc<str>,
}

impl std::fmt::Debug for WeightedMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "WeightedMeasure({})", self.label)
    }
}

impl WeightedMeasure {
    pub fn new<D, S>(label: &str, density: D, support: S) -> Self
    where
        D: Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync + 'static,
        S: Fn(&[f64]) -> Result<bool, EvalError> + Send + Sync + 'static,
    {
        WeightedMeasure {
            density: Arc::new(density),
            support: Arc::new(support),
            label: label.into(),
        }
    }

    /// Plain Lebesgue measure.
    pub fn lebesgue() -> Self {
        WeightedMeasure::new("1", |_| Ok(1.0), |_| Ok(true))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        if !(self.support)(x)? {
            return Ok(0.0);
        }
        let v = (self.density)(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite(format!("density {}", self.label)))
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// The pair of weights: `lhs` weighs `|ξ|^{p(x)}`, `rhs` weighs
/// `|∇ξ|^{p(x)}` and the logarithmic correction.
#[derive(Debug, Clone)]
pub struct MeasurePair {
    pub lhs: WeightedMeasure,
    pub rhs: WeightedMeasure,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("no closed-form family densities for `{0}`")]
    UnknownFamily(String),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `((p-1)/(β-σ))^{p-1}`, failing hard when `β ≤ σ` at the point.
fn rhs_base(p: f64, beta: f64, sigma: f64) -> Result<f64, EvalError> {
    let denom = beta - sigma;
    if denom <= 0.0 {
        return Err(EvalError::Singular(format!(
            "beta - sigma = {denom} is not positive"
        )));
    }
    Ok(((p - 1.0) / denom).powf(p - 1.0))
}

/// General-form weights from `(Φ, u, σ, β)`:
/// `lhs = (Φ·u + σ|∇u|^p) u^{-β-1} χ{u>0}`,
/// `rhs = ((p-1)/(β-σ))^{p-1} 2^{(p-1)χ{∇p≠0}} u^{p-β-1} χ{|∇u|≠0}`.
pub fn measures_general(s: &Scenario) -> MeasurePair {
    let beta = s.beta;
    let u = s.u_field();

    let s1 = s.clone();
    let u1 = u.clone();
    let lhs = WeightedMeasure::new(
        "general lhs weight",
        move |x| {
            let uv = u1.eval(x)?;
            let m = crate::conditions::crucial_margin(&s1, x)?;
            let v = m * uv.powf(-beta - 1.0);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(EvalError::NonFinite("lhs weight".into()))
            }
        },
        {
            let u = u.clone();
            move |x: &[f64]| Ok(u.eval(x)? > 0.0)
        },
    );

    let s2 = s.clone();
    let u2 = u.clone();
    let rhs = WeightedMeasure::new(
        "general rhs weight",
        move |x| {
            let p = s2.exponent.value(x)?;
            let sigma = s2.sigma.eval(x)?;
            let base = rhs_base(p, beta, sigma)?;
            let two = if s2.exponent.is_declared_constant() || s2.exponent.grad_norm(x)? == 0.0
            {
                1.0
            } else {
                2f64.powf(p - 1.0)
            };
            Ok(base * two * u2.eval(x)?.powf(p - beta - 1.0))
        },
        move |x: &[f64]| {
            let g = u.gradient(x)?;
            Ok(g.iter().any(|&v| v != 0.0))
        },
    );

    MeasurePair {
        lhs,
        rhs,
        warnings: Vec::new(),
    }
}

/// Quasi-radial weights from `(v, v', σ, β)`:
/// `lhs = |v'|^p v^{-β-1} K(x) χ{v>0}`,
/// `rhs = ((p-1)/(β-σ))^{p-1} 2^{(p-1)χ{∇p≠0}} v^{p-β-1} χ{|v'|≠0}`.
pub fn measures_radial(s: &Scenario) -> Result<MeasurePair, MeasureError> {
    let profile = s.radial_profile().ok_or(ConditionError::NotRadial)?.clone();
    let beta = s.beta;

    let s1 = s.clone();
    let prof1 = profile.clone();
    let lhs = WeightedMeasure::new(
        "radial lhs weight",
        move |x| {
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dv = prof1.dv(r)?;
            let v = prof1.v(r)?;
            let p = s1.exponent.value(x)?;
            let k = match radial_margin(&s1, x) {
                Ok(k) => k,
                Err(ConditionError::Eval(e)) => return Err(e),
                Err(ConditionError::NotRadial) => unreachable!("checked radial above"),
            };
            let val = dv.abs().powf(p) * v.powf(-beta - 1.0) * k;
            if val.is_finite() {
                Ok(val)
            } else {
                Err(EvalError::NonFinite("radial lhs weight".into()))
            }
        },
        {
            let prof = profile.clone();
            move |x: &[f64]| {
                let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                Ok(prof.v(r)? > 0.0)
            }
        },
    );

    let s2 = s.clone();
    let prof2 = profile.clone();
    let rhs = WeightedMeasure::new(
        "radial rhs weight",
        move |x| {
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let p = s2.exponent.value(x)?;
            let sigma = s2.sigma.eval(x)?;
            let base = rhs_base(p, beta, sigma)?;
            let two = if s2.exponent.is_declared_constant() || s2.exponent.grad_norm(x)? == 0.0
            {
                1.0
            } else {
                2f64.powf(p - 1.0)
            };
            Ok(base * two * prof2.v(r)?.powf(p - beta - 1.0))
        },
        move |x: &[f64]| {
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(profile.dv(r)? != 0.0)
        },
    );

    Ok(MeasurePair {
        lhs,
        rhs,
        warnings: Vec::new(),
    })
}

/// Weights for the verification pipeline: quasi-radial when the profile is
/// radial, general otherwise.
pub fn scenario_measures(s: &Scenario) -> MeasurePair {
    match measures_radial(s) {
        Ok(pair) => pair,
        Err(_) => measures_general(s),
    }
}

/// The closed-form per-family densities. Hypothesis failures are attached
/// as warnings; the densities are still constructed for diagnostic use.
pub fn measures_family(s: &Scenario, resolution: usize) -> Result<MeasurePair, MeasureError> {
    let beta = s.beta;
    let n = s.dim();
    let mut warnings = Vec::new();
    let hyp = crate::conditions::hypothesis_reports(s, resolution)?;
    for r in &hyp.reports {
        if !r.pass {
            warnings.push(format!(
                "hypothesis `{}` fails: min margin {} at {:?}",
                r.name, r.min_margin, r.witness
            ));
        }
    }
    warnings.extend(hyp.warnings.iter().cloned());

    let pair = match s.family.as_str() {
        "power_linear" => {
            let s1 = s.clone();
            let lhs = WeightedMeasure::new(
                "power lhs weight",
                move |x| {
                    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    Ok(r.powf(-beta - 1.0) * (s1.sigma.eval(x)? + 1.0 - n as f64))
                },
                |_| Ok(true),
            );
            let s2 = s.clone();
            let rhs = WeightedMeasure::new(
                "power rhs weight",
                move |x| {
                    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let p = s2.exponent.value(x)?;
                    let sigma = s2.sigma.eval(x)?;
                    let denom = beta - sigma;
                    if denom <= 0.0 {
                        return Err(EvalError::Singular(format!(
                            "beta - sigma = {denom} is not positive"
                        )));
                    }
                    Ok(r.powf(p - beta - 1.0) * (2.0 * (p - 1.0) / denom).powf(p - 1.0))
                },
                |_| Ok(true),
            );
            MeasurePair { lhs, rhs, warnings }
        }
        "sigma_choice_power" => {
            let bounds = validate_exponent(&s.exponent, &s.domain, resolution)?;
            let s_bar = crate::conditions::power_choice_bound(beta, n, bounds.p_plus);
            let lhs = WeightedMeasure::new(
                "power choice lhs weight",
                move |x| {
                    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    Ok(s_bar * r.powf(-beta - 1.0))
                },
                |_| Ok(true),
            );
            let s2 = s.clone();
            let rhs = WeightedMeasure::new(
                "power choice rhs weight",
                move |x| {
                    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    Ok(r.powf(s2.exponent.value(x)? - beta - 1.0))
                },
                |_| Ok(true),
            );
            MeasurePair { lhs, rhs, warnings }
        }
        "power_alpha" => {
            let alpha = s.params.alpha.ok_or_else(|| {
                MeasureError::UnknownFamily("power_alpha without alpha".into())
            })?;
            let s1 = s.clone();
            let lhs = WeightedMeasure::new(
                "power-alpha lhs weight",
                move |x| {
                    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let p = s1.exponent.value(x)?;
                    let k = power_margin(&s1.exponent, &s1.sigma, alpha, n, x)?;
                    Ok(r.powf(alpha * (p - beta - 1.0) - p) * alpha * k)
                },
                |_| Ok(true),
            );
            let s2 = s.clone();
            let rhs = WeightedMeasure::new(
                "power-alpha rhs weight",
                move |x| {
                    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let p = s2.exponent.value(x)?;
                    let sigma = s2.sigma.eval(x)?;
                    let denom = beta - sigma;
                    if denom <= 0.0 {
                        return Err(EvalError::Singular(format!(
                            "beta - sigma = {denom} is not positive"
                        )));
                    }
                    Ok(r.powf(alpha * (p - beta - 1.0))
                        * (2.0 / alpha * (p - 1.0) / denom).powf(p - 1.0))
                },
                |_| Ok(true),
            );
            MeasurePair { lhs, rhs, warnings }
        }
        "exp" => {
            let s1 = s.clone();
            let lhs = WeightedMeasure::new(
                "exp lhs weight",
                move |x| {
                    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let p = s1.exponent.value(x)?;
                    let k = exp_margin(&s1.exponent, &s1.sigma, n, x)?;
                    Ok((r * (p - beta - 1.0)).exp() * k)
                },
                |_| Ok(true),
            );
            let s2 = s.clone();
            let rhs = WeightedMeasure::new(
                "exp rhs weight",
                move |x| {
                    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let p = s2.exponent.value(x)?;
                    let sigma = s2.sigma.eval(x)?;
                    let denom = beta - sigma;
                    if denom <= 0.0 {
                        return Err(EvalError::Singular(format!(
                            "beta - sigma = {denom} is not positive"
                        )));
                    }
                    Ok((r * (p - beta - 1.0)).exp() * (2.0 * (p - 1.0) / denom).powf(p - 1.0))
                },
                |_| Ok(true),
            );
            MeasurePair { lhs, rhs, warnings }
        }
        "exp_sigma_choice" => {
            let c_e = s.params.c_e.unwrap_or(0.0);
            let bounds = validate_exponent(&s.exponent, &s.domain, resolution)?;
            let k_bar = crate::conditions::exp_choice_bound(beta, c_e, bounds.p_plus);
            let s1 = s.clone();
            let lhs = WeightedMeasure::new(
                "exp choice lhs weight",
                move |x| {
                    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    Ok(k_bar * (r * (s1.exponent.value(x)? - beta - 1.0)).exp())
                },
                |_| Ok(true),
            );
            let s2 = s.clone();
            let rhs = WeightedMeasure::new(
                "exp choice rhs weight",
                move |x| {
                    let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    Ok((r * (s2.exponent.value(x)? - beta - 1.0)).exp())
                },
                |_| Ok(true),
            );
            MeasurePair { lhs, rhs, warnings }
        }
        "orthant" => {
            let sv = orthant_s(n);
            let s1 = s.clone();
            let lhs = WeightedMeasure::new(
                "orthant lhs weight",
                move |x| {
                    let p = s1.exponent.value(x)?;
                    let j = orthant_j(x);
                    let d = orthant_weighted_grad(&s1.exponent, x)?;
                    Ok(((p - beta - 1.0) * j).exp()
                        * sv.powf(p / 2.0)
                        * (beta - d * (j + sv.ln() / 2.0) / sv))
                },
                |_| Ok(true),
            );
            let s2 = s.clone();
            let rhs = WeightedMeasure::new(
                "orthant rhs weight",
                move |x| {
                    let p = s2.exponent.value(x)?;
                    let j = orthant_j(x);
                    Ok(((p - beta - 1.0) * j).exp() * 2f64.powf(p - 1.0))
                },
                |_| Ok(true),
            );
            MeasurePair { lhs, rhs, warnings }
        }
        other => return Err(MeasureError::UnknownFamily(other.to_string())),
    };
    Ok(pair)
}

/// Sample both densities on a grid and render CSV rows
/// `x1,...,xn,lhs_density,rhs_density`. Singular nodes are skipped.
pub fn density_csv(
    pair: &MeasurePair,
    domain: &crate::geometry::Domain,
    resolution: usize,
) -> Result<String, EvalError> {
    let n = domain.dim();
    let mut out = String::new();
    for i in 0..n {
        out.push_str(&format!("x{},", i + 1));
    }
    out.push_str("lhs_density,rhs_density\n");
    for pt in grid_points(domain, resolution) {
        let w1 = match pair.lhs.eval(&pt) {
            Ok(v) => v,
            Err(EvalError::Singular(_)) => continue,
            Err(e) => return Err(e),
        };
        let w2 = match pair.rhs.eval(&pt) {
            Ok(v) => v,
            Err(EvalError::Singular(_)) => continue,
            Err(e) => return Err(e),
        };
        for c in &pt {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{w1},{w2}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::ExponentField;
    use crate::fieldexpr::ScalarField;
    use crate::geometry::{sample_points, Domain};
    use crate::scenario::{builtin, builtin_with, BuiltinSpec, Profile, RadialProfile, Scenario, ScenarioParams};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    /// 1-D instance u(x) = x on (1, 2) with p ≡ 2, β = 3, σ ≡ 1.
    fn linear_on_1_2() -> Scenario {
        let domain = Domain::interval(1.0, 2.0).unwrap();
        let exponent = ExponentField::constant(2.0);
        let profile = RadialProfile::linear();
        let phi = crate::scenario::radial_pde_forcing(&profile, &exponent);
        Scenario {
            domain,
            exponent,
            profile: Profile::Radial(profile),
            phi,
            sigma: ScalarField::constant(1.0),
            beta: 3.0,
            family: "power_linear".into(),
            params: ScenarioParams::default(),
            breakpoints: Vec::new(),
        }
    }

    #[test]
    fn general_densities_by_direct_substitution() {
        let s = linear_on_1_2();
        let pair = measures_general(&s);
        // rhs: ((2-1)/(3-1))^1 · 2^0 · x^{2-3-1} = x^{-2}/2.
        for &x in &[1.1, 1.5, 1.9] {
            assert_relative_eq!(
                pair.rhs.eval(&[x]).unwrap(),
                0.5 * x.powi(-2),
                max_relative = 1e-12
            );
            // lhs: Φ = 0 in 1D for v = r, so margin = σ·1 = 1 and weight
            // u^{-4} = x^{-4}.
            assert_relative_eq!(
                pair.lhs.eval(&[x]).unwrap(),
                x.powi(-4),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn nonconstant_exponent_doubles_the_rhs_weight() {
        // At a point with ∇p ≠ 0 and p(x) = 3 the factor 2^{p-1} = 4 enters.
        let mut s = linear_on_1_2();
        s.exponent = ExponentField::new(
            ScalarField::from_fn("3 + (x-1.5)", |x| Ok(3.0 + (x[0] - 1.5)))
                .with_gradient(|x| Ok(vec![1.0; x.len()])),
        );
        let pair = measures_general(&s);
        let x = [1.5];
        let p: f64 = 3.0;
        let expect = ((p - 1.0) / (3.0 - 1.0)).powf(p - 1.0) * 4.0 * 1.5_f64.powf(p - 3.0 - 1.0);
        assert_relative_eq!(pair.rhs.eval(&x).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn beta_not_dominating_sigma_is_a_hard_error() {
        let mut s = linear_on_1_2();
        s.beta = 0.5;
        let pair = measures_general(&s);
        assert!(matches!(
            pair.rhs.eval(&[1.5]),
            Err(EvalError::Singular(_))
        ));
    }

    #[test]
    fn radial_lhs_vanishes_exactly_when_sigma_is_n_minus_1() {
        let mut spec = BuiltinSpec::named("power_linear");
        spec.n = Some(2);
        spec.sigma_const = Some(1.0);
        spec.beta = Some(2.0);
        let s = builtin_with(&spec).unwrap();
        let pair = measures_radial(&s).unwrap();
        for x in [[1.2, 0.3], [2.0, 1.0], [1.0, 1.5]] {
            assert_eq!(pair.lhs.eval(&x).unwrap(), 0.0);
            // rhs: r^{p-β-1} ((p-1)/(β-n+1))^{p-1} with p = 2, β = 2.
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert_relative_eq!(
                pair.rhs.eval(&x).unwrap(),
                r.powf(-1.0),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn radial_matches_family_weights_for_linear_profile() {
        // With a nonconstant exponent the family's unconditional factor 2
        // coincides with the pointwise 2^{χ} factor, so family and radial
        // weights agree.
        let mut s = builtin("power_linear").unwrap();
        s.exponent = ExponentField::new(
            ScalarField::parse("2 + x1/8").unwrap(),
        );
        let radial = measures_radial(&s).unwrap();
        let family = measures_family(&s, 17).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for x in sample_points(&s.domain, 40, &mut rng) {
            let a = radial.lhs.eval(&x).unwrap();
            let b = family.lhs.eval(&x).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-14);
            let a = radial.rhs.eval(&x).unwrap();
            let b = family.rhs.eval(&x).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn family_rhs_weight_dominates_radial_for_constant_exponent() {
        // The family factor 2 is unconditional; the pointwise form drops
        // it for constant exponents. The family weight is then the
        // conservative upper bound 2^{p-1} × the radial one.
        let s = builtin("power_linear").unwrap();
        let radial = measures_radial(&s).unwrap();
        let family = measures_family(&s, 17).unwrap();
        for &x in &[1.2, 2.0, 2.8] {
            let r = radial.rhs.eval(&[x]).unwrap();
            let f = family.rhs.eval(&[x]).unwrap();
            assert_relative_eq!(f, 2.0 * r, max_relative = 1e-12);
            assert!(f >= r);
        }
    }

    #[test]
    fn alpha_family_reduction_matches_radial_up_to_alpha_power_beta() {
        // The radial weights on v = r^α/α equal α^β times the family
        // weights (the family form divides both sides by α^β).
        let mut spec = BuiltinSpec::named("power_alpha");
        spec.alpha = Some(2.0);
        let mut s = builtin_with(&spec).unwrap();
        s.exponent = ExponentField::new(ScalarField::parse("2 + x1/8 + x2/8").unwrap());
        let radial = measures_radial(&s).unwrap();
        let family = measures_family(&s, 17).unwrap();
        let scale = 2f64.powf(s.beta);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        for x in sample_points(&s.domain, 40, &mut rng) {
            let a = radial.lhs.eval(&x).unwrap();
            let b = family.lhs.eval(&x).unwrap() * scale;
            assert_relative_eq!(a, b, max_relative = 1e-11, epsilon = 1e-13);
            let a = radial.rhs.eval(&x).unwrap();
            let b = family.rhs.eval(&x).unwrap() * scale;
            assert_relative_eq!(a, b, max_relative = 1e-11);
        }
    }

    #[test]
    fn power_choice_family_weights() {
        // β = 10, n = 3, p ≡ 2: s̄ = 3, lhs = 3|x|^{-11}, rhs = |x|^{-9}.
        let s = builtin("sigma_choice_power").unwrap();
        let pair = measures_family(&s, 17).unwrap();
        assert!(pair.warnings.is_empty(), "{:?}", pair.warnings);
        let x = [1.5, 0.0, 0.0];
        assert_relative_eq!(
            pair.lhs.eval(&x).unwrap(),
            3.0 * 1.5_f64.powi(-11),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            pair.rhs.eval(&x).unwrap(),
            1.5_f64.powi(-9),
            max_relative = 1e-12
        );
    }

    #[test]
    fn exp_family_weights_at_unit_radius() {
        // n = 1, p ≡ 2, β = 3, σ ≡ 0, |x| = 1: rhs = e^{-2}·(2/3).
        let mut s = builtin("exp").unwrap();
        s.exponent = ExponentField::constant(2.0);
        s.sigma = ScalarField::constant(0.0);
        s.beta = 3.0;
        let pair = measures_family(&s, 17).unwrap();
        let expect = (2.0 / 3.0) * (-2f64).exp();
        assert_relative_eq!(pair.rhs.eval(&[1.0]).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn orthant_family_weights_at_origin() {
        // n = 2 (S = 5), p ≡ 2, β = 1, x = 0: rhs = 2, lhs = 5.
        let mut s = builtin("orthant").unwrap();
        s.exponent = ExponentField::constant(2.0);
        s.beta = 1.0;
        let pair = measures_family(&s, 9).unwrap();
        let x = [0.0, 0.0];
        assert_relative_eq!(pair.rhs.eval(&x).unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(pair.lhs.eval(&x).unwrap(), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn radial_equals_general_on_pde_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for name in ["power_linear", "power_alpha", "exp", "piecewise_1d"] {
            let s = builtin(name).unwrap();
            let radial = measures_radial(&s).unwrap();
            let general = measures_general(&s);
            for x in sample_points(&s.domain, 40, &mut rng) {
                let a = radial.lhs.eval(&x).unwrap();
                let b = general.lhs.eval(&x).unwrap();
                let denom = 1.0 + a.abs().max(b.abs());
                assert!(
                    (a - b).abs() / denom <= 1e-10,
                    "{name} lhs: {a} vs {b} at {x:?}"
                );
                let a = radial.rhs.eval(&x).unwrap();
                let b = general.rhs.eval(&x).unwrap();
                let denom = 1.0 + a.abs().max(b.abs());
                assert!(
                    (a - b).abs() / denom <= 1e-10,
                    "{name} rhs: {a} vs {b} at {x:?}"
                );
            }
        }
    }

    #[test]
    fn negative_lhs_density_implies_failed_condition_scan() {
        // The piecewise instance has a negative lhs weight; the radial
        // margin scan must fail in agreement.
        let s = builtin("piecewise_1d").unwrap();
        let pair = measures_radial(&s).unwrap();
        let mut negative_at = None;
        for pt in grid_points(&s.domain, 41) {
            if let Ok(v) = pair.lhs.eval(&pt) {
                if v < 0.0 {
                    negative_at = Some(pt);
                    break;
                }
            }
        }
        let witness = negative_at.expect("expected a negative lhs density");
        let margin = radial_margin(&s, &witness).unwrap();
        assert!(margin < 0.0);
        let reports = crate::conditions::hypothesis_reports(&s, 41).unwrap();
        assert!(!reports.pass());
    }

    #[test]
    fn family_hypothesis_violations_become_warnings() {
        let s = builtin("orthant").unwrap();
        let pair = measures_family(&s, 9);
        // Densities still constructed even if warnings are present.
        let pair = pair.unwrap();
        let _ = pair.lhs.eval(&[0.5, 0.5]).unwrap();
        let s2 = builtin("piecewise_1d").unwrap();
        assert!(matches!(
            measures_family(&s2, 9),
            Err(MeasureError::UnknownFamily(_))
        ));
    }

    #[test]
    fn density_csv_has_header_and_rows() {
        let s = builtin("power_linear").unwrap();
        let pair = measures_radial(&s).unwrap();
        let csv = density_csv(&pair, &s.domain, 5).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "x1,lhs_density,rhs_density");
        assert_eq!(lines.count(), 5);
    }
}
