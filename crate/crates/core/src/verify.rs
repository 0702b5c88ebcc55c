//! Assembling and checking the inequality, plus a derivative-free sharpness
//! probe over test-function parameters.
//!
//! For a scenario and a test function ξ the report carries the weighted
//! modular of |ξ| (left side), the weighted modular of |∇ξ| and the
//! logarithmic correction (right side), their quadrature error budget, and
//! the ratio. The probe maximizes the ratio over the family parameters with
//! a bounded simplex search plus coordinate sweeps, clamping parameters to
//! the feasible set.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fieldexpr::EvalError;
use crate::measures::{scenario_measures, MeasurePair};
use crate::modular::{integrate_box, modular_integral, QuadError, QuadOptions};
use crate::plaplace::merge_breakpoints;
use crate::scenario::Scenario;
use crate::testfn::{log_integrand, max_feasible_radius, Family, TestFunction};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("measure construction failed: {0}")]
    Measure(#[from] crate::measures::MeasureError),
    #[error("test function construction failed: {0}")]
    TestFn(#[from] crate::testfn::TestFnError),
    #[error("no feasible test function inside the domain")]
    Infeasible,
}

/// One verification of the inequality for a fixed test function.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub scenario: String,
    pub xi: String,
    pub lhs: f64,
    pub rhs_gradient: f64,
    pub rhs_log: f64,
    pub error_budget: f64,
    pub ratio: f64,
    pub pass: bool,
}

impl VerificationReport {
    pub fn csv_header() -> &'static str {
        "scenario,family,xi_params,lhs,rhs_gradient,rhs_log,ratio,error_budget,pass"
    }

    pub fn csv_row(&self, family: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scenario,
            family,
            self.xi.replace(',', ";"),
            self.lhs,
            self.rhs_gradient,
            self.rhs_log,
            self.ratio,
            self.error_budget,
            self.pass
        )
    }
}

fn ratio_of(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    }
}

/// Evaluate both sides of the inequality for one test function, integrating
/// over its support box with the scenario and kink breakpoints installed.
pub fn verify_inequality(
    s: &Scenario,
    xi: &TestFunction,
    opts: &QuadOptions,
) -> Result<VerificationReport, VerifyError> {
    let measures = scenario_measures(s);
    verify_with_measures(s, &measures, xi, opts)
}

/// Same as [`verify_inequality`] with prebuilt weights (cheaper in batches).
pub fn verify_with_measures(
    s: &Scenario,
    measures: &MeasurePair,
    xi: &TestFunction,
    opts: &QuadOptions,
) -> Result<VerificationReport, VerifyError> {
    let support = xi.support_box();
    let mut local = opts.clone();
    local.breakpoints = merge_breakpoints(
        &merge_breakpoints(&opts.breakpoints, &s.breakpoints),
        &xi.breakpoints(),
    );

    let lhs = modular_integral(
        |x: &[f64]| Ok(xi.eval(x)),
        &s.exponent,
        &measures.lhs,
        &support,
        &local,
    )?;
    let rhs_grad = modular_integral(
        |x: &[f64]| Ok(xi.grad_norm(x)),
        &s.exponent,
        &measures.rhs,
        &support,
        &local,
    )?;
    let rhs_measure = measures.rhs.clone();
    let exponent = s.exponent.clone();
    let rhs_log = integrate_box(
        move |x: &[f64]| {
            let w = rhs_measure.eval(x)?;
            if w == 0.0 {
                return Ok(0.0);
            }
            let v = log_integrand(xi, &exponent, x)? * w;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(EvalError::NonFinite("log term".into()))
            }
        },
        &support.lo,
        &support.hi,
        &local,
    )?;

    let rhs = rhs_grad.value + rhs_log.value;
    let error_budget = lhs.error_estimate + rhs_grad.error_estimate + rhs_log.error_estimate;
    Ok(VerificationReport {
        scenario: s.family.clone(),
        xi: xi.describe(),
        lhs: lhs.value,
        rhs_gradient: rhs_grad.value,
        rhs_log: rhs_log.value,
        error_budget,
        ratio: ratio_of(lhs.value, rhs),
        pass: lhs.value <= rhs + error_budget,
    })
}

/// Verify against `count` seeded random test functions of one family.
pub fn verify_batch(
    s: &Scenario,
    family: Family,
    count: usize,
    seed: u64,
    opts: &QuadOptions,
) -> Result<Vec<VerificationReport>, VerifyError> {
    let xis = crate::testfn::seeded_family(family, &s.domain, count, seed)?;
    let measures = scenario_measures(s);
    xis.iter()
        .map(|xi| verify_with_measures(s, &measures, xi, opts))
        .collect()
}

// ---------------------------------------------------------------------------
// Sharpness probe
// ---------------------------------------------------------------------------

/// One probe evaluation: the parameter vector (center coordinates, then the
/// half-width) and the resulting report.
#[derive(Debug, Clone)]
pub struct ProbeStep {
    pub index: usize,
    pub params: Vec<f64>,
    pub report: VerificationReport,
}

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub best_ratio: f64,
    pub best_params: Vec<f64>,
    pub trace: Vec<ProbeStep>,
}

struct ProbeContext<'a> {
    scenario: &'a Scenario,
    measures: MeasurePair,
    family: Family,
    poly_k: u32,
    opts: QuadOptions,
    trace: Vec<ProbeStep>,
    budget: usize,
}

impl<'a> ProbeContext<'a> {
    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    /// Clamp params to the feasible set and build the test function.
    fn realize(&self, params: &[f64]) -> Option<(TestFunction, Vec<f64>)> {
        let domain = &self.scenario.domain;
        let n = domain.dim();
        let bbox = domain.bounding_box();
        let mut center: Vec<f64> = params[..n].to_vec();
        for i in 0..n {
            let (lo, hi) = bbox[i];
            let pad = 1e-6 * (hi - lo);
            center[i] = center[i].clamp(lo + pad, hi - pad);
        }
        let mut rho_max = max_feasible_radius(domain, &center);
        if rho_max.is_none() {
            // Pull the center toward a feasible anchor until a box fits.
            let anchor = feasible_anchor(domain)?;
            for _ in 0..40 {
                for i in 0..n {
                    center[i] = 0.5 * (center[i] + anchor[i]);
                }
                rho_max = max_feasible_radius(domain, &center);
                if rho_max.is_some() {
                    break;
                }
            }
        }
        let rho_max = rho_max?;
        let rho_min = rho_max * 1e-3;
        let rho = params[n].clamp(rho_min, rho_max);
        let xi = match self.family {
            Family::Tent | Family::TensorTent => {
                TestFunction::tensor_tent(&center, &vec![rho; n], domain).ok()?
            }
            Family::RadialBump => TestFunction::radial_bump(&center, rho, domain).ok()?,
            Family::PolyBump => {
                TestFunction::poly_bump(&center, rho, self.poly_k, domain).ok()?
            }
        };
        let mut effective = center;
        effective.push(rho);
        Some((xi, effective))
    }

    /// Objective: the verified ratio (NaN-free; failures count as -inf so
    /// the search moves away from them).
    fn objective(&mut self, params: &[f64]) -> Result<f64, VerifyError> {
        let Some((xi, effective)) = self.realize(params) else {
            return Ok(f64::NEG_INFINITY);
        };
        let report = verify_with_measures(self.scenario, &self.measures, &xi, &self.opts)?;
        let ratio = if report.ratio.is_finite() {
            report.ratio
        } else {
            f64::NEG_INFINITY
        };
        self.trace.push(ProbeStep {
            index: self.trace.len(),
            params: effective,
            report,
        });
        Ok(ratio)
    }
}

fn feasible_anchor(domain: &crate::geometry::Domain) -> Option<Vec<f64>> {
    use crate::geometry::Domain;
    let candidate = match domain {
        Domain::Interval { a, b } => vec![0.5 * (a + b)],
        Domain::Box { bounds } | Domain::OrthantBox { bounds } => bounds
            .iter()
            .map(|&(lo, hi)| 0.5 * (lo + hi))
            .collect(),
        Domain::Annulus { dim, r_in, r_out } => {
            let mid = 0.5 * (r_in + r_out) / (*dim as f64).sqrt();
            vec![mid; *dim]
        }
    };
    max_feasible_radius(domain, &candidate).map(|_| candidate)
}

/// Maximize the verification ratio over test-function parameters with a
/// simplex search (restarted when it collapses) and coordinate sweeps as a
/// fallback. Every evaluation lands in the trace; the best ratio is the
/// trace maximum by construction.
pub fn sharpness_probe(
    s: &Scenario,
    family: Family,
    seed: u64,
    budget: usize,
    opts: &QuadOptions,
) -> Result<ProbeOutcome, VerifyError> {
    let n = s.dim();
    let dim = n + 1;
    let anchor_center = feasible_anchor(&s.domain).ok_or(VerifyError::Infeasible)?;
    let anchor_rho = max_feasible_radius(&s.domain, &anchor_center).ok_or(VerifyError::Infeasible)?;
    let mut anchor = anchor_center;
    anchor.push(0.5 * anchor_rho);

    let bbox = s.domain.bounding_box();
    let mut scale: Vec<f64> = bbox.iter().map(|&(lo, hi)| 0.25 * (hi - lo)).collect();
    scale.push(0.5 * anchor_rho);

    let mut ctx = ProbeContext {
        scenario: s,
        measures: scenario_measures(s),
        family,
        poly_k: 2,
        opts: opts.clone(),
        trace: Vec::new(),
        budget: budget.max(dim + 1),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut start = anchor.clone();
    while !ctx.exhausted() {
        nelder_mead(&mut ctx, &start, &scale, &mut rng)?;
        if ctx.exhausted() {
            break;
        }
        // Coordinate sweep around the incumbent, then restart the simplex
        // from a jittered best point.
        let best = best_of(&ctx.trace).map(|s| s.params.clone()).unwrap_or(anchor.clone());
        coordinate_sweep(&mut ctx, &best, &scale)?;
        let best = best_of(&ctx.trace).map(|s| s.params.clone()).unwrap_or(anchor.clone());
        start = best
            .iter()
            .zip(&scale)
            .map(|(b, sc)| b + sc * rng.gen_range(-0.2..0.2))
            .collect();
    }

    let best = best_of(&ctx.trace).ok_or(VerifyError::Infeasible)?;
    Ok(ProbeOutcome {
        best_ratio: best.report.ratio,
        best_params: best.params.clone(),
        trace: ctx.trace,
    })
}

fn best_of(trace: &[ProbeStep]) -> Option<&ProbeStep> {
    trace
        .iter()
        .filter(|s| s.report.ratio.is_finite())
        .max_by(|a, b| a.report.ratio.partial_cmp(&b.report.ratio).unwrap())
}

/// One bounded simplex descent on -ratio starting from `start`.
fn nelder_mead(
    ctx: &mut ProbeContext<'_>,
    start: &[f64],
    scale: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<(), VerifyError> {
    let dim = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = ctx.objective(start)?;
    simplex.push((start.to_vec(), f0));
    for i in 0..dim {
        if ctx.exhausted() {
            return Ok(());
        }
        let mut v = start.to_vec();
        v[i] += scale[i] * (0.3 + rng.gen_range(0.0..0.1));
        let f = ctx.objective(&v)?;
        simplex.push((v, f));
    }

    while !ctx.exhausted() {
        // Maximization: best first.
        simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread: f64 = (0..dim)
            .map(|i| {
                let vals: Vec<f64> = simplex.iter().map(|(v, _)| v[i]).collect();
                let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mn = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                (mx - mn) / scale[i].max(1e-12)
            })
            .fold(0.0, f64::max);
        if spread < 1e-6 {
            return Ok(());
        }
        let worst = simplex[dim].clone();
        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(v, _)| v[i]).sum::<f64>() / dim as f64)
            .collect();
        let reflect: Vec<f64> = (0..dim)
            .map(|i| centroid[i] + (centroid[i] - worst.0[i]))
            .collect();
        let fr = ctx.objective(&reflect)?;
        if fr > simplex[0].1 && !ctx.exhausted() {
            let expand: Vec<f64> = (0..dim)
                .map(|i| centroid[i] + 2.0 * (centroid[i] - worst.0[i]))
                .collect();
            let fe = ctx.objective(&expand)?;
            simplex[dim] = if fe > fr { (expand, fe) } else { (reflect, fr) };
            continue;
        }
        if fr > simplex[dim - 1].1 {
            simplex[dim] = (reflect, fr);
            continue;
        }
        if ctx.exhausted() {
            return Ok(());
        }
        let contract: Vec<f64> = (0..dim)
            .map(|i| centroid[i] + 0.5 * (worst.0[i] - centroid[i]))
            .collect();
        let fc = ctx.objective(&contract)?;
        if fc > worst.1 {
            simplex[dim] = (contract, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for k in 1..=dim {
            if ctx.exhausted() {
                return Ok(());
            }
            let v: Vec<f64> = (0..dim)
                .map(|i| best[i] + 0.5 * (simplex[k].0[i] - best[i]))
                .collect();
            let f = ctx.objective(&v)?;
            simplex[k] = (v, f);
        }
    }
    Ok(())
}

/// Axis-by-axis probes around `center` with two halvings per axis.
fn coordinate_sweep(
    ctx: &mut ProbeContext<'_>,
    center: &[f64],
    scale: &[f64],
) -> Result<(), VerifyError> {
    let mut incumbent = center.to_vec();
    let mut best = f64::NEG_INFINITY;
    for axis in 0..incumbent.len() {
        let mut step = 0.25 * scale[axis];
        for _ in 0..2 {
            for dir in [-1.0, 1.0] {
                if ctx.exhausted() {
                    return Ok(());
                }
                let mut probe = incumbent.clone();
                probe[axis] += dir * step;
                let f = ctx.objective(&probe)?;
                if f > best {
                    best = f;
                    incumbent = probe;
                }
            }
            step *= 0.5;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin, builtin_with, BuiltinSpec};
    use crate::testfn::TestFunction;
    use approx::assert_relative_eq;

    fn power_linear_opts() -> QuadOptions {
        QuadOptions::with_resolution(32)
    }

    #[test]
    fn power_linear_with_unit_tent_matches_closed_forms() {
        let s = builtin("power_linear").unwrap();
        let xi = TestFunction::tent(2.0, 1.0 - 1e-9, &s.domain).unwrap();
        let r = verify_inequality(&s, &xi, &power_linear_opts()).unwrap();
        // lhs = 0.5 ∫ tent²/x², rhs_gradient = 2 ∫ (ξ')² = 4, log term 0.
        let exact_lhs = 0.5 * (4.0 - 2.0 * 2f64.ln() - 6.0 * 1.5f64.ln());
        assert_relative_eq!(r.lhs, exact_lhs, max_relative = 1e-5);
        assert_relative_eq!(r.rhs_gradient, 4.0, max_relative = 1e-5);
        assert_eq!(r.rhs_log, 0.0);
        assert!(r.pass);
        assert_relative_eq!(r.ratio, exact_lhs / 4.0, max_relative = 1e-4);
    }

    #[test]
    fn zero_test_function_passes_vacuously_with_zero_ratio() {
        let s = builtin("power_linear").unwrap();
        let xi = TestFunction::zero(&[2.0], &s.domain).unwrap();
        let r = verify_inequality(&s, &xi, &power_linear_opts()).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs_gradient, 0.0);
        assert_eq!(r.rhs_log, 0.0);
        assert_eq!(r.ratio, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn piecewise_instance_passes_with_positive_log_term() {
        let s = builtin("piecewise_1d").unwrap();
        let xi = TestFunction::tent(0.0, 0.8, &s.domain).unwrap();
        let r = verify_inequality(&s, &xi, &QuadOptions::with_resolution(24)).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.rhs_log > 0.0, "log term should be active: {r:?}");
    }

    #[test]
    fn batch_reports_are_deterministic() {
        let s = builtin("power_linear").unwrap();
        let opts = QuadOptions::with_resolution(16);
        let a = verify_batch(&s, Family::Tent, 5, 42, &opts).unwrap();
        let b = verify_batch(&s, Family::Tent, 5, 42, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.pass));
    }

    #[test]
    fn constant_exponent_ratio_is_scale_invariant() {
        let s = builtin("power_linear").unwrap();
        let xi = TestFunction::tent(2.0, 0.7, &s.domain).unwrap();
        let opts = power_linear_opts();
        let base = verify_inequality(&s, &xi, &opts).unwrap();
        for &c in &[0.1, 3.0, 25.0] {
            let scaled = xi.scaled(c);
            let r = verify_inequality(&s, &scaled, &opts).unwrap();
            assert_relative_eq!(r.ratio, base.ratio, max_relative = 1e-12);
            // Both sides scale by c^p = c².
            assert_relative_eq!(r.lhs, base.lhs * c * c, max_relative = 1e-12);
            assert_relative_eq!(
                r.rhs_gradient,
                base.rhs_gradient * c * c,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn probe_dominates_any_fixed_sample_and_stays_below_one() {
        let s = builtin("power_linear").unwrap();
        let opts = QuadOptions::with_resolution(12);
        let xi = TestFunction::tent(2.0, 0.9, &s.domain).unwrap();
        let fixed = verify_inequality(&s, &xi, &opts).unwrap();
        let probe = sharpness_probe(&s, Family::Tent, 7, 120, &opts).unwrap();
        assert!(probe.best_ratio >= fixed.ratio - 1e-12);
        assert!(probe.best_ratio <= 1.0);
        // Internal consistency: best equals the trace maximum.
        let trace_max = probe
            .trace
            .iter()
            .map(|s| s.report.ratio)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(probe.best_ratio, trace_max);
        assert!(probe.trace.len() <= 120);
    }

    #[test]
    fn probe_returns_exact_zero_when_lhs_weight_vanishes() {
        // σ ≡ n-1 on the linear profile kills the lhs weight identically.
        let mut spec = BuiltinSpec::named("power_linear");
        spec.sigma_const = Some(0.0);
        spec.beta = Some(1.0);
        let s = builtin_with(&spec).unwrap();
        let probe = sharpness_probe(&s, Family::Tent, 3, 40, &QuadOptions::with_resolution(8))
            .unwrap();
        assert_eq!(probe.best_ratio, 0.0);
        // Same seed, same trace, bit for bit.
        let again = sharpness_probe(&s, Family::Tent, 3, 40, &QuadOptions::with_resolution(8))
            .unwrap();
        assert_eq!(probe.best_params, again.best_params);
        assert_eq!(probe.trace.len(), again.trace.len());
        for (a, b) in probe.trace.iter().zip(&again.trace) {
            assert_eq!(a.report, b.report);
            assert_eq!(a.params, b.params);
        }
    }

    #[test]
    fn power_profile_below_one_branch_verifies() {
        // 0 < α < 1 flips the bound direction in the hypothesis scan; the
        // default parameter rule still produces an admissible instance.
        let mut spec = BuiltinSpec::named("power_alpha");
        spec.alpha = Some(0.5);
        let s = builtin_with(&spec).unwrap();
        assert!(s.validate(33).unwrap().pass);
        let hyp = crate::conditions::hypothesis_reports(&s, 33).unwrap();
        assert!(hyp.pass(), "{:#?}", hyp.reports);
        assert!(hyp
            .reports
            .iter()
            .any(|r| r.name == "c_l_upper_bounds_grad_log_term"));
        let reports =
            verify_batch(&s, Family::TensorTent, 5, 77, &QuadOptions::with_resolution(12))
                .unwrap();
        assert!(reports.iter().all(|r| r.pass));
    }

    #[test]
    fn widening_tents_toward_the_singular_end_increase_the_ratio() {
        // Constant-exponent instance on (0.01, 3): the weight x^{-β-1}
        // concentrates at the left end, so nested tents reaching toward it
        // drive the ratio up monotonically.
        let mut spec = BuiltinSpec::named("power_linear");
        spec.sigma_const = Some(0.5);
        spec.beta = Some(1.0);
        let mut s = builtin_with(&spec).unwrap();
        s.domain = crate::geometry::Domain::interval(0.01, 3.0).unwrap();
        let opts = QuadOptions::with_resolution(48);
        let mut prev = -1.0;
        for k in 1..=5 {
            let a = 1.0 / (1.5f64.powi(k));
            let c = 0.5 * (a + 2.0);
            let rho = 0.5 * (2.0 - a);
            let xi = TestFunction::tent(c, rho, &s.domain).unwrap();
            let r = verify_inequality(&s, &xi, &opts).unwrap();
            assert!(
                r.ratio > prev,
                "ratio did not increase: {} after {prev} at k={k}",
                r.ratio
            );
            prev = r.ratio;
        }
    }

    #[test]
    fn csv_rows_round_trip_fields() {
        let s = builtin("power_linear").unwrap();
        let xi = TestFunction::tent(2.0, 0.5, &s.domain).unwrap();
        let r = verify_inequality(&s, &xi, &QuadOptions::with_resolution(8)).unwrap();
        let row = r.csv_row("tent");
        assert_eq!(row.split(',').count(), 9);
        assert!(row.starts_with("power_linear,tent,"));
    }
}
