//! Compactly supported Lipschitz test functions with analytic gradients.
//!
//! Four families: 1D tents, tensor-product tents, radial cones, and radial
//! polynomial bumps `max(0, 1 - (|x-c|/ρ)²)^k`. Support boxes must sit
//! strictly inside the scenario domain; gradients are defined a.e. with a
//! deterministic one-sided convention on the kink sets.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exponent::ExponentField;
use crate::fieldexpr::EvalError;
use crate::geometry::{Cell, Domain};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TestFnError {
    #[error("support box {lo:?}..{hi:?} is not strictly inside the domain")]
    SupportOutside { lo: Vec<f64>, hi: Vec<f64> },
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("bump power must be at least 1, got {0}")]
    BadPower(u32),
    #[error("center dimension {got} does not match domain dimension {want}")]
    DimMismatch { want: usize, got: usize },
    #[error("no feasible support box found after {0} attempts")]
    Infeasible(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Tent,
    TensorTent,
    RadialBump,
    PolyBump,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Tent => "tent",
            Family::TensorTent => "tensor_tent",
            Family::RadialBump => "radial_bump",
            Family::PolyBump => "poly_bump",
        }
    }

    pub fn from_name(s: &str) -> Option<Family> {
        match s {
            "tent" => Some(Family::Tent),
            "tensor_tent" => Some(Family::TensorTent),
            "radial_bump" => Some(Family::RadialBump),
            "poly_bump" => Some(Family::PolyBump),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// Product of per-axis tents (a single tent in 1D).
    Tensor,
    /// Cone `max(0, 1 - |x-c|/ρ)`.
    Cone,
    /// `max(0, 1 - (|x-c|/ρ)²)^k`.
    Poly { k: u32 },
    /// Identically zero (degenerate witness for vacuous checks).
    Zero,
}

/// A compactly supported Lipschitz function with analytic a.e. gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    shape: Shape,
    center: Vec<f64>,
    radii: Vec<f64>,
    amplitude: f64,
}

impl TestFunction {
    /// 1D tent `max(0, 1 - |x-c|/ρ)`.
    pub fn tent(center: f64, rho: f64, domain: &Domain) -> Result<Self, TestFnError> {
        Self::tensor_tent(&[center], &[rho], domain)
    }

    /// Product of per-axis tents.
    pub fn tensor_tent(
        center: &[f64],
        radii: &[f64],
        domain: &Domain,
    ) -> Result<Self, TestFnError> {
        Self::build(
            Shape::Tensor,
            center.to_vec(),
            radii.to_vec(),
            domain,
        )
    }

    /// Radial cone `max(0, 1 - |x-c|/ρ)`.
    pub fn radial_bump(center: &[f64], rho: f64, domain: &Domain) -> Result<Self, TestFnError> {
        let radii = vec![rho; center.len()];
        Self::build(Shape::Cone, center.to_vec(), radii, domain)
    }

    /// Radial polynomial bump `max(0, 1 - (|x-c|/ρ)²)^k`, `k ≥ 1`.
    pub fn poly_bump(
        center: &[f64],
        rho: f64,
        k: u32,
        domain: &Domain,
    ) -> Result<Self, TestFnError> {
        if k < 1 {
            return Err(TestFnError::BadPower(k));
        }
        let radii = vec![rho; center.len()];
        Self::build(Shape::Poly { k }, center.to_vec(), radii, domain)
    }

    /// The zero function with a token support box around `center`.
    pub fn zero(center: &[f64], domain: &Domain) -> Result<Self, TestFnError> {
        let bbox = domain.bounding_box();
        let scale = bbox
            .iter()
            .map(|(lo, hi)| hi - lo)
            .fold(f64::INFINITY, f64::min);
        let radii = vec![scale * 1e-3; center.len()];
        Self::build(Shape::Zero, center.to_vec(), radii, domain)
    }

    fn build(
        shape: Shape,
        center: Vec<f64>,
        radii: Vec<f64>,
        domain: &Domain,
    ) -> Result<Self, TestFnError> {
        if center.len() != domain.dim() {
            return Err(TestFnError::DimMismatch {
                want: domain.dim(),
                got: center.len(),
            });
        }
        for &r in &radii {
            if !(r > 0.0) {
                return Err(TestFnError::BadRadius(r));
            }
        }
        let f = TestFunction {
            shape,
            center,
            radii,
            amplitude: 1.0,
        };
        let (lo, hi) = f.support_bounds();
        if !domain.contains_box_strictly(&lo, &hi) {
            return Err(TestFnError::SupportOutside { lo, hi });
        }
        Ok(f)
    }

    /// Same shape scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.amplitude *= c;
        out
    }

    fn support_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self
            .center
            .iter()
            .zip(&self.radii)
            .map(|(c, r)| c - r)
            .collect();
        let hi = self
            .center
            .iter()
            .zip(&self.radii)
            .map(|(c, r)| c + r)
            .collect();
        (lo, hi)
    }

    pub fn support_box(&self) -> Cell {
        let (lo, hi) = self.support_bounds();
        Cell::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn family_name(&self) -> &'static str {
        match self.shape {
            Shape::Tensor => {
                if self.dim() == 1 {
                    "tent"
                } else {
                    "tensor_tent"
                }
            }
            Shape::Cone => "radial_bump",
            Shape::Poly { .. } => "poly_bump",
            Shape::Zero => "zero",
        }
    }

    /// Compact parameter description for reports.
    pub fn describe(&self) -> String {
        let c: Vec<String> = self.center.iter().map(|v| format!("{v:.6}")).collect();
        let r: Vec<String> = self.radii.iter().map(|v| format!("{v:.6}")).collect();
        let mut s = format!(
            "{} c=({}) rho=({})",
            self.family_name(),
            c.join(" "),
            r.join(" ")
        );
        if let Shape::Poly { k } = self.shape {
            s.push_str(&format!(" k={k}"));
        }
        if self.amplitude != 1.0 {
            s.push_str(&format!(" amp={}", self.amplitude));
        }
        s
    }

    fn radial_s(&self, x: &[f64]) -> f64 {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(xi, ci)| (xi - ci) * (xi - ci))
            .sum();
        d2.sqrt() / self.radii[0]
    }

    /// Evaluate ξ(x). Total; zero outside the support box.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let v = match &self.shape {
            Shape::Zero => 0.0,
            Shape::Tensor => {
                let mut prod = 1.0;
                for i in 0..self.dim() {
                    let t = 1.0 - (x[i] - self.center[i]).abs() / self.radii[i];
                    if t <= 0.0 {
                        return 0.0;
                    }
                    prod *= t;
                }
                prod
            }
            Shape::Cone => (1.0 - self.radial_s(x)).max(0.0),
            Shape::Poly { k } => {
                let s = self.radial_s(x);
                let t = 1.0 - s * s;
                if t <= 0.0 {
                    0.0
                } else {
                    t.powi(*k as i32)
                }
            }
        };
        self.amplitude * v
    }

    /// Gradient, defined a.e.; on tent kinks the one-sided limit from the
    /// left is used, at the cone apex the gradient is set to zero. Both kink
    /// sets have measure zero.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut g = vec![0.0; n];
        match &self.shape {
            Shape::Zero => {}
            Shape::Tensor => {
                let mut vals = Vec::with_capacity(n);
                let mut ders = Vec::with_capacity(n);
                for i in 0..n {
                    let d = x[i] - self.center[i];
                    let t = 1.0 - d.abs() / self.radii[i];
                    if t < 0.0 || (t == 0.0 && d < 0.0) {
                        // Outside, or on the left edge where the left limit
                        // is zero.
                        return g;
                    }
                    vals.push(t.max(0.0));
                    // Left-limit convention: derivative +1/ρ for x ≤ c,
                    // -1/ρ for x > c (this covers the right edge too).
                    ders.push(if d <= 0.0 {
                        1.0 / self.radii[i]
                    } else {
                        -1.0 / self.radii[i]
                    });
                }
                for i in 0..n {
                    let mut prod = ders[i];
                    for (j, v) in vals.iter().enumerate() {
                        if j != i {
                            prod *= v;
                        }
                    }
                    g[i] = self.amplitude * prod;
                }
            }
            Shape::Cone => {
                let s = self.radial_s(x);
                if s == 0.0 || s > 1.0 {
                    return g;
                }
                let rho = self.radii[0];
                let d = s * rho;
                for i in 0..n {
                    g[i] = -self.amplitude * (x[i] - self.center[i]) / (d * rho);
                }
            }
            Shape::Poly { k } => {
                let s = self.radial_s(x);
                if s >= 1.0 {
                    return g;
                }
                let rho = self.radii[0];
                let t = 1.0 - s * s;
                let factor = -2.0 * (*k as f64) * t.powi(*k as i32 - 1) / (rho * rho);
                for i in 0..n {
                    g[i] = self.amplitude * factor * (x[i] - self.center[i]);
                }
            }
        }
        g
    }

    pub fn grad_norm(&self, x: &[f64]) -> f64 {
        self.grad(x).iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Largest sampled |∇ξ| over the support box (Lipschitz bound witness).
    pub fn lipschitz_bound(&self, resolution: usize) -> f64 {
        let cell = self.support_box();
        let n = self.dim();
        let k = resolution.max(2);
        let mut best = 0.0_f64;
        let mut idx = vec![0usize; n];
        'outer: loop {
            let p: Vec<f64> = (0..n)
                .map(|i| cell.lo[i] + (cell.hi[i] - cell.lo[i]) * idx[i] as f64 / (k - 1) as f64)
                .collect();
            best = best.max(self.grad_norm(&p));
            let mut axis = n;
            loop {
                if axis == 0 {
                    break 'outer;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < k {
                    break;
                }
                idx[axis] = 0;
            }
        }
        best
    }

    /// Mandatory quadrature breakpoints per axis (kink locations).
    pub fn breakpoints(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            match self.shape {
                Shape::Tensor => out.push(vec![
                    self.center[i] - self.radii[i],
                    self.center[i],
                    self.center[i] + self.radii[i],
                ]),
                _ => out.push(vec![self.center[i]]),
            }
        }
        out
    }
}

/// Logarithmic integrand `|ξ log ξ|^{p(x)} · |∇p(x)|^{p(x)} / p(x)^{p(x)}`.
///
/// Conventions: the value is 0 where ξ vanishes (limit of `t log t`), the
/// logarithm is applied to |ξ| so signed test functions stay well defined,
/// and a declared-constant exponent short-circuits to exactly 0.
pub fn log_integrand(
    xi: &TestFunction,
    exponent: &ExponentField,
    x: &[f64],
) -> Result<f64, EvalError> {
    if exponent.is_declared_constant() {
        return Ok(0.0);
    }
    let t = xi.eval(x).abs();
    if t == 0.0 {
        return Ok(0.0);
    }
    let p = exponent.value(x)?;
    let gp = exponent.grad_norm(x)?;
    if gp == 0.0 {
        return Ok(0.0);
    }
    let base = t * t.ln().abs() * gp / p;
    if base == 0.0 {
        return Ok(0.0);
    }
    let v = base.powf(p);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite("log integrand".into()))
    }
}

/// Draw `count` random test functions of one family, strictly supported in
/// the domain, deterministically from `seed`.
pub fn seeded_family(
    family: Family,
    domain: &Domain,
    count: usize,
    seed: u64,
) -> Result<Vec<TestFunction>, TestFnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = domain.dim();
    let bbox = domain.bounding_box();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 10_000 * count.max(1) {
            return Err(TestFnError::Infeasible(attempts));
        }
        let center: Vec<f64> = bbox.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
        if !domain.contains_open(&center) {
            continue;
        }
        let Some(rho_max) = max_feasible_radius(domain, &center) else {
            continue;
        };
        if rho_max <= 0.0 {
            continue;
        }
        let frac = rng.gen_range(0.25..0.9);
        let rho = frac * rho_max;
        let made = match family {
            Family::Tent | Family::TensorTent => {
                let radii: Vec<f64> = (0..n).map(|_| rho * rng.gen_range(0.6..1.0)).collect();
                TestFunction::tensor_tent(&center, &radii, domain)
            }
            Family::RadialBump => TestFunction::radial_bump(&center, rho, domain),
            Family::PolyBump => {
                let k = rng.gen_range(1..=3);
                TestFunction::poly_bump(&center, rho, k, domain)
            }
        };
        if let Ok(f) = made {
            out.push(f);
        }
    }
    Ok(out)
}

/// Largest half-width ρ such that the cube `[c-ρ, c+ρ]` sits strictly inside
/// the domain, found by bisection on the strict-containment predicate.
pub fn max_feasible_radius(domain: &Domain, center: &[f64]) -> Option<f64> {
    let bbox = domain.bounding_box();
    let mut hi = bbox
        .iter()
        .map(|(lo, hi)| hi - lo)
        .fold(f64::INFINITY, f64::min);
    let fits = |rho: f64| {
        let lo: Vec<f64> = center.iter().map(|c| c - rho).collect();
        let hi_: Vec<f64> = center.iter().map(|c| c + rho).collect();
        domain.contains_box_strictly(&lo, &hi_)
    };
    let mut lo = hi * 1e-9;
    if !fits(lo) {
        return None;
    }
    if fits(hi) {
        return Some(hi);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Shrink slightly so the strict inequalities hold with margin.
    Some(lo * 0.999)
}
