//! Problem instances: a domain, a variable exponent, a nonnegative profile
//! `u`, a forcing term, a weight `σ`, and a parameter `β`, plus the catalog
//! of built-in instances used throughout the test suites and the CLI.
//!
//! Built-ins cover radial power profiles (`v(r) = r`, `v(r) = r^α/α`), the
//! exponential profile `v(r) = e^r`, a one-dimensional piecewise instance
//! with a nonconstant exponent, a non-radial orthant instance driven by
//! `u = e^{J(x)}`, and the `σ = β - 2(p-1)` power-weight variant. Two
//! deliberately fail validation and are kept for diagnostics: the orthant
//! instance ships with `σ = p + β - 1`, which violates `β > sup σ`, and the
//! `as_printed` flag of the piecewise instance selects the sign variant
//! with negative `u`.

use std::sync::Arc;

use thiserror::Error;

use crate::exponent::{validate_exponent, ExponentField};
use crate::fieldexpr::{parse, EvalError, Expr, ScalarField};
use crate::geometry::{grid_points, Domain};

type Map1d = dyn Fn(f64) -> Result<f64, EvalError> + Send + Sync;

/// A radial profile `v` with first and second derivatives, each a
/// one-dimensional evaluable map on `r > 0`.
#[derive(Clone)]
pub struct RadialProfile {
    v: Arc<Map1d>,
    dv: Arc<Map1d>,
    d2v: Arc<Map1d>,
    label: Arc<str>,
}

impl std::fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RadialProfile({})", self.label)
    }
}

impl RadialProfile {
    pub fn new<V, D, D2>(label: &str, v: V, dv: D, d2v: D2) -> Self
    where
        V: Fn(f64) -> Result<f64, EvalError> + Send + Sync + 'static,
        D: Fn(f64) -> Result<f64, EvalError> + Send + Sync + 'static,
        D2: Fn(f64) -> Result<f64, EvalError> + Send + Sync + 'static,
    {
        RadialProfile {
            v: Arc::new(v),
            dv: Arc::new(dv),
            d2v: Arc::new(d2v),
            label: label.into(),
        }
    }

    /// Profile from expressions in `r` (or `x1`). Missing derivative
    /// expressions fall back to central differences.
    pub fn from_exprs(v: Expr, dv: Option<Expr>, d2v: Option<Expr>) -> Self {
        let label: Arc<str> = v.to_string().into();
        let v_outer = Arc::new(v);
        let eval1 = move |e: &Expr, r: f64| e.eval(&[r]);
        let v_for_dv = v_outer.clone();
        let dv_fn: Arc<Map1d> = match dv {
            Some(e) => Arc::new(move |r| eval1(&e, r)),
            None => Arc::new(move |r| {
                let h = 1e-5 * r.abs().max(1.0);
                Ok((v_for_dv.eval(&[r + h])? - v_for_dv.eval(&[r - h])?) / (2.0 * h))
            }),
        };
        let v_for_d2v = v_outer.clone();
        let d2v_fn: Arc<Map1d> = match d2v {
            Some(e) => Arc::new(move |r| eval1(&e, r)),
            None => Arc::new(move |r| {
                let h = 1e-4 * r.abs().max(1.0);
                Ok(
                    (v_for_d2v.eval(&[r + h])? - 2.0 * v_for_d2v.eval(&[r])?
                        + v_for_d2v.eval(&[r - h])?)
                        / (h * h),
                )
            }),
        };
        let v_eval = v_outer;
        RadialProfile {
            v: Arc::new(move |r| v_eval.eval(&[r])),
            dv: dv_fn,
            d2v: d2v_fn,
            label,
        }
    }

    /// `v(r) = r`.
    pub fn linear() -> Self {
        RadialProfile::new("r", Ok, |_| Ok(1.0), |_| Ok(0.0))
    }

    /// `v(r) = r^α / α`.
    pub fn power(alpha: f64) -> Self {
        RadialProfile::new(
            &format!("r^{alpha}/{alpha}"),
            move |r: f64| Ok(r.powf(alpha) / alpha),
            move |r: f64| Ok(r.powf(alpha - 1.0)),
            move |r: f64| Ok((alpha - 1.0) * r.powf(alpha - 2.0)),
        )
    }

    /// `v(r) = e^r`.
    pub fn exponential() -> Self {
        RadialProfile::new("exp(r)", |r: f64| Ok(r.exp()), |r: f64| Ok(r.exp()), |r: f64| {
            Ok(r.exp())
        })
    }

    pub fn v(&self, r: f64) -> Result<f64, EvalError> {
        (self.v)(r)
    }

    pub fn dv(&self, r: f64) -> Result<f64, EvalError> {
        (self.dv)(r)
    }

    pub fn d2v(&self, r: f64) -> Result<f64, EvalError> {
        (self.d2v)(r)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// The solution profile: radial with derivatives, or a general field with
/// gradient.
#[derive(Debug, Clone)]
pub enum Profile {
    Radial(RadialProfile),
    General(ScalarField),
}

/// Extra named parameters carried by catalog instances.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioParams {
    pub alpha: Option<f64>,
    pub c_l: Option<f64>,
    pub c_e: Option<f64>,
    pub big_m: Option<f64>,
    pub as_printed: bool,
}

/// A full problem instance. Immutable after construction; cloning is cheap.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub domain: Domain,
    pub exponent: ExponentField,
    pub profile: Profile,
    pub phi: ScalarField,
    pub sigma: ScalarField,
    pub beta: f64,
    pub family: String,
    pub params: ScenarioParams,
    /// Mandatory quadrature breakpoints per axis (piecewise definitions,
    /// radial kinks through the origin).
    pub breakpoints: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn radial_profile(&self) -> Option<&RadialProfile> {
        match &self.profile {
            Profile::Radial(p) => Some(p),
            Profile::General(_) => None,
        }
    }

    /// The profile as a scalar field with analytic gradient. For radial
    /// profiles `∇u = v'(|x|) x / |x|`, singular at the origin.
    pub fn u_field(&self) -> ScalarField {
        match &self.profile {
            Profile::General(u) => u.clone(),
            Profile::Radial(p) => {
                let pv = p.clone();
                let pg = p.clone();
                let label = format!("radial {}", p.label());
                ScalarField::from_fn(&label, move |x| {
                    let r = norm(x);
                    pv.v(r)
                })
                .with_gradient(move |x| {
                    let r = norm(x);
                    if r == 0.0 {
                        return Err(EvalError::Singular(
                            "radial gradient at the origin".into(),
                        ));
                    }
                    let d = pg.dv(r)?;
                    Ok(x.iter().map(|xi| d * xi / r).collect())
                })
            }
        }
    }

    /// Run the admissibility checks on a sample grid.
    pub fn validate(&self, resolution: usize) -> Result<ValidationReport, EvalError> {
        let mut entries = Vec::new();

        entries.push(ValidationEntry {
            check: "beta_positive".into(),
            pass: self.beta > 0.0,
            witness: None,
            detail: format!("beta = {}", self.beta),
        });

        // β must dominate σ over the (truncated) closed domain.
        let pts = grid_points(&self.domain, resolution);
        let mut sup_sigma = f64::NEG_INFINITY;
        let mut sup_witness = None;
        for pt in &pts {
            match self.sigma.eval(pt) {
                Ok(v) => {
                    if v > sup_sigma {
                        sup_sigma = v;
                        sup_witness = Some(pt.clone());
                    }
                }
                Err(EvalError::Singular(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        entries.push(ValidationEntry {
            check: "beta_above_sigma".into(),
            pass: self.beta > sup_sigma,
            witness: sup_witness,
            detail: format!("beta = {} vs sampled sup sigma = {sup_sigma}", self.beta),
        });

        let u = self.u_field();
        let mut min_u = f64::INFINITY;
        let mut min_witness = None;
        for pt in &pts {
            match u.eval(pt) {
                Ok(v) => {
                    if v < min_u {
                        min_u = v;
                        min_witness = Some(pt.clone());
                    }
                }
                Err(EvalError::Singular(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        entries.push(ValidationEntry {
            check: "u_nonnegative".into(),
            pass: min_u >= 0.0,
            witness: min_witness,
            detail: format!("sampled min u = {min_u}"),
        });

        let bounds = validate_exponent(&self.exponent, &self.domain, resolution)?;
        entries.push(ValidationEntry {
            check: "exponent_condition".into(),
            pass: bounds.ok,
            witness: None,
            detail: format!("p_minus = {}, p_plus = {}", bounds.p_minus, bounds.p_plus),
        });

        let pass = entries.iter().all(|e| e.pass);
        Ok(ValidationReport { entries, pass })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationEntry {
    pub check: String,
    pub pass: bool,
    pub witness: Option<Vec<f64>>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &ValidationEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `J(x) = Σ_j j x_j` (1-based weights).
pub fn orthant_j(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, xi)| (i as f64 + 1.0) * xi)
        .sum()
}

/// `S = Σ_j j² = n(2n+1)(n+1)/6`.
pub fn orthant_s(n: usize) -> f64 {
    let n = n as f64;
    n * (2.0 * n + 1.0) * (n + 1.0) / 6.0
}

/// Weighted gradient sum `Σ_j j ∂p/∂x_j`.
pub fn orthant_weighted_grad(exponent: &ExponentField, x: &[f64]) -> Result<f64, EvalError> {
    Ok(exponent
        .grad(x)?
        .iter()
        .enumerate()
        .map(|(i, g)| (i as f64 + 1.0) * g)
        .sum())
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown scenario name `{0}`")]
    UnknownName(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("domain construction failed: {0}")]
    Domain(#[from] crate::geometry::DomainError),
    #[error("expression failed to parse: {0}")]
    Parse(#[from] crate::fieldexpr::ParseError),
}

/// Overrides for a catalog instance; unset fields keep their defaults.
#[derive(Debug, Clone, Default)]
pub struct BuiltinSpec {
    pub name: String,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub big_m: Option<f64>,
    pub c_l: Option<f64>,
    pub c_e: Option<f64>,
    pub sigma_const: Option<f64>,
    pub as_printed: bool,
}

impl BuiltinSpec {
    pub fn named(name: &str) -> Self {
        BuiltinSpec {
            name: name.to_string(),
            ..Default::default()
        }
    }
}

/// Catalog instance with default parameters.
pub fn builtin(name: &str) -> Result<Scenario, CatalogError> {
    builtin_with(&BuiltinSpec::named(name))
}

pub fn builtin_names() -> &'static [&'static str] {
    &[
        "power_linear",
        "power_alpha",
        "exp",
        "piecewise_1d",
        "orthant",
        "sigma_choice_power",
    ]
}

/// Build a catalog instance, applying any overrides in `spec`.
pub fn builtin_with(spec: &BuiltinSpec) -> Result<Scenario, CatalogError> {
    match spec.name.as_str() {
        "power_linear" => power_linear(spec),
        "power_alpha" => power_alpha(spec),
        "exp" => exp_profile(spec),
        "piecewise_1d" => piecewise_1d(spec),
        "orthant" => orthant(spec),
        "sigma_choice_power" => sigma_choice_power(spec),
        other => Err(CatalogError::UnknownName(other.to_string())),
    }
}

/// Forcing term matching the radial operator exactly: `Φ = -Δ_{p(x)} u`.
pub fn radial_pde_forcing(profile: &RadialProfile, exponent: &ExponentField) -> ScalarField {
    let profile = profile.clone();
    let exponent = exponent.clone();
    ScalarField::from_fn("pde forcing", move |x| {
        Ok(-crate::plaplace::plaplacian_radial(&profile, &exponent, x)?)
    })
}

fn radial_domain(n: usize, r_in: f64, r_out: f64) -> Result<Domain, CatalogError> {
    if n == 1 {
        Ok(Domain::interval(r_in, r_out)?)
    } else {
        Ok(Domain::annulus(n, r_in, r_out)?)
    }
}

fn power_linear(spec: &BuiltinSpec) -> Result<Scenario, CatalogError> {
    let n = spec.n.unwrap_or(1);
    let domain = radial_domain(n, 1.0, 3.0)?;
    let exponent = ExponentField::constant(2.0);
    let profile = RadialProfile::linear();
    // Defaults follow the 1-D instance: σ ≡ 0.5 ≥ n-1, β = σ + 0.5.
    let sigma_v = spec.sigma_const.unwrap_or(n as f64 - 1.0 + 0.5);
    let beta = spec.beta.unwrap_or(sigma_v + 0.5);
    let phi = radial_pde_forcing(&profile, &exponent);
    Ok(Scenario {
        domain,
        exponent,
        profile: Profile::Radial(profile),
        phi,
        sigma: ScalarField::constant(sigma_v),
        beta,
        family: "power_linear".into(),
        params: ScenarioParams::default(),
        breakpoints: Vec::new(),
    })
}

fn power_alpha(spec: &BuiltinSpec) -> Result<Scenario, CatalogError> {
    let alpha = spec.alpha.unwrap_or(2.0);
    if !(alpha > 0.0) {
        return Err(CatalogError::BadParameter(format!("alpha = {alpha}")));
    }
    let n = spec.n.unwrap_or(2);
    let domain = radial_domain(n, 1.0, 2.0)?;
    let exponent = ExponentField::constant(2.0);
    let profile = RadialProfile::power(alpha);
    // K_α = σ - [(α-1)(⟨∇p,x⟩ log|x| + p) + n - α]/α must stay ≥ 0; with
    // constant p = 2 this needs ασ ≥ (α-1)2 + n - α.
    let sigma_default = ((alpha - 1.0) * 2.0 + n as f64 - alpha) / alpha + 0.5;
    let sigma_v = spec.sigma_const.unwrap_or(sigma_default);
    let beta = spec.beta.unwrap_or(sigma_v + 0.5);
    let phi = radial_pde_forcing(&profile, &exponent);
    Ok(Scenario {
        domain,
        exponent,
        profile: Profile::Radial(profile),
        phi,
        sigma: ScalarField::constant(sigma_v),
        beta,
        family: "power_alpha".into(),
        params: ScenarioParams {
            alpha: Some(alpha),
            c_l: Some(spec.c_l.unwrap_or(0.0)),
            ..Default::default()
        },
        breakpoints: Vec::new(),
    })
}

fn exp_profile(spec: &BuiltinSpec) -> Result<Scenario, CatalogError> {
    let n = spec.n.unwrap_or(1);
    if n != 1 {
        return Err(CatalogError::BadParameter(
            "the exponential instance ships in one dimension".into(),
        ));
    }
    let domain = Domain::interval(1.0, 3.0)?;
    // Nonconstant exponent with ⟨∇p, x⟩ = x/4 > C_e on (1, 3).
    let exponent = ExponentField::new(
        ScalarField::from_expr(parse("2 + x1/4")?)
            .with_gradient(|x: &[f64]| Ok(vec![0.25; x.len()])),
    );
    let c_e = spec.c_e.unwrap_or(0.2);
    let profile = RadialProfile::exponential();
    // σ = 2 + x/4 keeps |x|σ ≥ |x|(C_e + p - 1) + n - 1 with margin 0.8
    // and sup σ = 2.75 < β.
    let sigma = match spec.sigma_const {
        Some(c) => ScalarField::constant(c),
        None => ScalarField::from_expr(parse("2 + x1/4")?),
    };
    let beta = spec.beta.unwrap_or(3.0);
    let phi = radial_pde_forcing(&profile, &exponent);
    Ok(Scenario {
        domain,
        exponent,
        profile: Profile::Radial(profile),
        phi,
        sigma,
        beta,
        family: "exp".into(),
        params: ScenarioParams {
            c_e: Some(c_e),
            ..Default::default()
        },
        breakpoints: Vec::new(),
    })
}

/// Piecewise exponent on a symmetric interval:
/// `p = 2 + 1/(1-x)` for `x < 0`, `p = 5 - 4/(x+2)` for `x ≥ 0`.
fn piecewise_exponent() -> ExponentField {
    let p = ScalarField::from_fn("piecewise p", |x: &[f64]| {
        let t = x[0];
        if t < 0.0 {
            Ok(2.0 + 1.0 / (1.0 - t))
        } else {
            Ok(5.0 - 4.0 / (t + 2.0))
        }
    })
    .with_gradient(|x: &[f64]| {
        let t = x[0];
        let d = if t < 0.0 {
            1.0 / ((1.0 - t) * (1.0 - t))
        } else {
            4.0 / ((t + 2.0) * (t + 2.0))
        };
        Ok(vec![d])
    });
    ExponentField::new(p)
}

fn piecewise_1d(spec: &BuiltinSpec) -> Result<Scenario, CatalogError> {
    let m = spec.big_m.unwrap_or(4.0);
    if !(m > 3.0) {
        return Err(CatalogError::BadParameter(format!(
            "piecewise instance needs M > 3 so the interval (-3, 3) fits, got {m}"
        )));
    }
    let domain = Domain::interval(-3.0, 3.0)?;
    let exponent = piecewise_exponent();
    let e = std::f64::consts::E;
    let as_printed = spec.as_printed;
    // The default sign variant keeps u ≥ 0 on the interval; the
    // alternative u = -e(|x| + M) is negative everywhere and is retained
    // for the diagnostic suite.
    let profile = if as_printed {
        RadialProfile::new(
            "-e*(r+M)",
            move |r| Ok(-e * (r + m)),
            move |_| Ok(-e),
            |_| Ok(0.0),
        )
    } else {
        RadialProfile::new(
            "e*(M-r)",
            move |r| Ok(e * (m - r)),
            move |_| Ok(-e),
            |_| Ok(0.0),
        )
    };
    let sigma = ScalarField::from_fn("piecewise sigma", move |x: &[f64]| {
        let t = x[0];
        if t < 0.0 {
            Ok(2.0 * (t - m) / ((1.0 - t) * (1.0 - t)))
        } else {
            Ok(-8.0 * (t + m) / ((t + 2.0) * (t + 2.0)))
        }
    });
    let beta = spec.beta.unwrap_or(1.0);
    let phi = radial_pde_forcing(&profile, &exponent);
    Ok(Scenario {
        domain,
        exponent,
        profile: Profile::Radial(profile),
        phi,
        sigma,
        beta,
        family: "piecewise_1d".into(),
        params: ScenarioParams {
            big_m: Some(m),
            as_printed,
            ..Default::default()
        },
        breakpoints: vec![vec![0.0]],
    })
}

fn orthant(spec: &BuiltinSpec) -> Result<Scenario, CatalogError> {
    let n = spec.n.unwrap_or(2);
    if n == 0 {
        return Err(CatalogError::BadParameter("n must be positive".into()));
    }
    let domain = Domain::orthant_box(vec![(0.0, 1.0); n])?;
    let s = orthant_s(n);
    // p = 1 + e^{-J(x)} stays in (1, 2) on the box.
    let p_field = ScalarField::from_fn("1 + exp(-J)", move |x: &[f64]| {
        Ok(1.0 + (-orthant_j(x)).exp())
    })
    .with_gradient(move |x: &[f64]| {
        let e = (-orthant_j(x)).exp();
        Ok((0..x.len()).map(|i| -((i as f64) + 1.0) * e).collect())
    });
    let exponent = ExponentField::new(p_field);
    let beta = spec.beta.unwrap_or(1.0);
    // This instance fixes σ = p + β - 1, which violates β > sup σ
    // whenever p > 1; validation reports it with a witness.
    let exp_for_sigma = exponent.clone();
    let sigma = ScalarField::from_fn("p + beta - 1", move |x: &[f64]| {
        Ok(exp_for_sigma.value(x)? + beta - 1.0)
    });
    let u = ScalarField::from_fn("exp(J)", |x: &[f64]| Ok(orthant_j(x).exp())).with_gradient(
        |x: &[f64]| {
            let e = orthant_j(x).exp();
            Ok((0..x.len()).map(|i| ((i as f64) + 1.0) * e).collect())
        },
    );
    // Closed-form p(x)-Laplacian of e^{J}; Φ is its negative.
    let exp_for_phi = exponent.clone();
    let phi = ScalarField::from_fn("orthant forcing", move |x: &[f64]| {
        let p = exp_for_phi.value(x)?;
        let j = orthant_j(x);
        let d = orthant_weighted_grad(&exp_for_phi, x)?;
        let lap = s.powf(p / 2.0)
            * ((p - 1.0) * j).exp()
            * ((j + s.ln() / 2.0) / s * d + p - 1.0);
        Ok(-lap)
    });
    Ok(Scenario {
        domain,
        exponent,
        profile: Profile::General(u),
        phi,
        sigma,
        beta,
        family: "orthant".into(),
        params: ScenarioParams::default(),
        breakpoints: Vec::new(),
    })
}

fn sigma_choice_power(spec: &BuiltinSpec) -> Result<Scenario, CatalogError> {
    let n = spec.n.unwrap_or(3);
    let domain = radial_domain(n, 1.0, 2.0)?;
    let exponent = ExponentField::constant(2.0);
    let beta = spec.beta.unwrap_or(10.0);
    // σ = β - 2(p - 1); constant exponent makes it constant.
    let exp_for_sigma = exponent.clone();
    let sigma = ScalarField::from_fn("beta - 2(p-1)", move |x: &[f64]| {
        Ok(beta - 2.0 * (exp_for_sigma.value(x)? - 1.0))
    });
    let profile = RadialProfile::linear();
    let phi = radial_pde_forcing(&profile, &exponent);
    Ok(Scenario {
        domain,
        exponent,
        profile: Profile::Radial(profile),
        phi,
        sigma,
        beta,
        family: "sigma_choice_power".into(),
        params: ScenarioParams::default(),
        breakpoints: Vec::new(),
    })
}
