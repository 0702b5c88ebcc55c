//! Panel-based tensor Gauss–Legendre quadrature and weighted modular
//! integrals.
//!
//! Every integral in the inequality checker goes through [`integrate`] or its
//! box-restricted variants: an order-5 rule per axis on each panel, an
//! embedded order-3 rule for per-panel discrepancies, and a fixed number of
//! refinement passes that split the worst panels. Mandatory breakpoints keep
//! kinks (tent edges, piecewise exponents) on panel boundaries so the rule
//! stays high-order. Panel sums run in a fixed order with compensated
//! accumulation, so results are bit-reproducible; panel evaluations may run
//! concurrently.

use rayon::prelude::*;
use thiserror::Error;

use crate::exponent::ExponentField;
use crate::fieldexpr::EvalError;
use crate::geometry::{panels, Cell, Domain};
use crate::measures::WeightedMeasure;

#[derive(Debug, Clone, Error)]
pub enum QuadError {
    #[error("integrand failed at {point:?}: {source}")]
    Node { point: Vec<f64>, source: EvalError },
    #[error("non-finite integrand value at {point:?}")]
    NonFiniteNode { point: Vec<f64> },
    #[error("no panels to integrate over")]
    EmptyPanels,
}

/// Quadrature controls.
#[derive(Debug, Clone)]
pub struct QuadOptions {
    /// Base panels per axis (before breakpoints and refinement).
    pub resolution: usize,
    /// Number of discrepancy-driven refinement passes.
    pub refinement_levels: usize,
    /// Mandatory panel boundaries, one list per axis.
    pub breakpoints: Vec<Vec<f64>>,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            resolution: 16,
            refinement_levels: 2,
            breakpoints: Vec::new(),
        }
    }
}

impl QuadOptions {
    pub fn with_resolution(resolution: usize) -> Self {
        QuadOptions {
            resolution,
            ..Default::default()
        }
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<Vec<f64>>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    /// Same options at doubled base resolution (convergence checks).
    pub fn doubled(&self) -> Self {
        QuadOptions {
            resolution: self.resolution * 2,
            refinement_levels: self.refinement_levels,
            breakpoints: self.breakpoints.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
}

// 5-point and 3-point Gauss–Legendre rules on [-1, 1].
fn gl5() -> [(f64, f64); 5] {
    let a = (1.0 / 3.0) * (5.0 - 2.0 * (10.0_f64 / 7.0).sqrt()).sqrt();
    let b = (1.0 / 3.0) * (5.0 + 2.0 * (10.0_f64 / 7.0).sqrt()).sqrt();
    let wa = (322.0 + 13.0 * 70.0_f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70.0_f64.sqrt()) / 900.0;
    [
        (0.0, 128.0 / 225.0),
        (-a, wa),
        (a, wa),
        (-b, wb),
        (b, wb),
    ]
}

fn gl3() -> [(f64, f64); 3] {
    let x = (3.0_f64 / 5.0).sqrt();
    [(0.0, 8.0 / 9.0), (-x, 5.0 / 9.0), (x, 5.0 / 9.0)]
}

struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn new() -> Self {
        Kahan { sum: 0.0, comp: 0.0 }
    }

    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Tensor rule over one panel.
fn panel_rule<F>(f: &F, cell: &Cell, rule: &[(f64, f64)]) -> Result<f64, QuadError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let n = cell.dim();
    let half: Vec<f64> = (0..n).map(|i| 0.5 * (cell.hi[i] - cell.lo[i])).collect();
    let mid: Vec<f64> = (0..n).map(|i| 0.5 * (cell.hi[i] + cell.lo[i])).collect();
    let jac: f64 = half.iter().product();
    let m = rule.len();
    let mut idx = vec![0usize; n];
    let mut point = vec![0.0; n];
    let mut acc = Kahan::new();
    loop {
        let mut w = 1.0;
        for i in 0..n {
            let (node, weight) = rule[idx[i]];
            point[i] = mid[i] + half[i] * node;
            w *= weight;
        }
        let v = f(&point).map_err(|source| QuadError::Node {
            point: point.clone(),
            source,
        })?;
        if !v.is_finite() {
            return Err(QuadError::NonFiniteNode {
                point: point.clone(),
            });
        }
        acc.add(w * v);
        let mut axis = n;
        loop {
            if axis == 0 {
                return Ok(acc.sum * jac);
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < m {
                break;
            }
            idx[axis] = 0;
        }
    }
}

struct PanelEval {
    cell: Cell,
    high: f64,
    low: f64,
}

impl PanelEval {
    fn discrepancy(&self) -> f64 {
        (self.high - self.low).abs()
    }
}

fn eval_panels<F>(f: &F, cells: Vec<Cell>) -> Result<Vec<PanelEval>, QuadError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    let five = gl5();
    let three = gl3();
    cells
        .into_par_iter()
        .map(|cell| {
            let high = panel_rule(f, &cell, &five)?;
            let low = panel_rule(f, &cell, &three)?;
            Ok(PanelEval { cell, high, low })
        })
        .collect()
}

fn total(panels: &[PanelEval]) -> f64 {
    let mut acc = Kahan::new();
    for p in panels {
        acc.add(p.high);
    }
    acc.sum
}

/// Integrate over an explicit panel list with discrepancy-driven refinement.
pub fn integrate_cells<F>(
    f: F,
    cells: Vec<Cell>,
    opts: &QuadOptions,
) -> Result<QuadratureResult, QuadError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    if cells.is_empty() {
        return Err(QuadError::EmptyPanels);
    }
    let mut evals = eval_panels(&f, cells)?;
    let mut value = total(&evals);
    let mut previous = None;
    for _ in 0..opts.refinement_levels {
        // Split the quarter of panels with the largest embedded-rule
        // discrepancy (at least one, and only panels with nonzero
        // discrepancy).
        let mut order: Vec<usize> = (0..evals.len()).collect();
        order.sort_by(|&a, &b| {
            evals[b]
                .discrepancy()
                .partial_cmp(&evals[a].discrepancy())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let quota = (evals.len() / 4).max(1);
        let chosen: Vec<usize> = order
            .into_iter()
            .take(quota)
            .filter(|&i| evals[i].discrepancy() > 0.0)
            .collect();
        if chosen.is_empty() {
            previous = Some(value);
            break;
        }
        let mut split_flags = vec![false; evals.len()];
        for &i in &chosen {
            split_flags[i] = true;
        }
        let mut fresh_cells = Vec::new();
        let mut kept = Vec::new();
        for (i, pe) in evals.into_iter().enumerate() {
            if split_flags[i] {
                let (a, b) = pe.cell.split(pe.cell.longest_axis());
                // Children are evaluated afresh; record insertion slot.
                kept.push(None);
                fresh_cells.push((kept.len() - 1, a, b));
            } else {
                kept.push(Some(pe));
            }
        }
        let mut new_children: Vec<(usize, PanelEval, PanelEval)> = fresh_cells
            .into_par_iter()
            .map(|(slot, a, b)| {
                let five = gl5();
                let three = gl3();
                let pa = PanelEval {
                    high: panel_rule(&f, &a, &five)?,
                    low: panel_rule(&f, &a, &three)?,
                    cell: a,
                };
                let pb = PanelEval {
                    high: panel_rule(&f, &b, &five)?,
                    low: panel_rule(&f, &b, &three)?,
                    cell: b,
                };
                Ok((slot, pa, pb))
            })
            .collect::<Result<Vec<_>, QuadError>>()?;
        new_children.sort_by_key(|(slot, _, _)| *slot);
        let mut rebuilt = Vec::with_capacity(kept.len() + new_children.len());
        let mut child_iter = new_children.into_iter().peekable();
        for (slot, entry) in kept.into_iter().enumerate() {
            match entry {
                Some(pe) => rebuilt.push(pe),
                None => {
                    let (_, pa, pb) = child_iter.next().expect("child for split slot");
                    debug_assert!(child_iter.peek().map(|(s, _, _)| *s != slot).unwrap_or(true));
                    rebuilt.push(pa);
                    rebuilt.push(pb);
                }
            }
        }
        evals = rebuilt;
        previous = Some(value);
        value = total(&evals);
    }
    let error_estimate = match previous {
        Some(prev) => (value - prev).abs(),
        None => {
            let mut acc = Kahan::new();
            for p in &evals {
                acc.add(p.discrepancy());
            }
            acc.sum
        }
    };
    Ok(QuadratureResult {
        value,
        error_estimate,
        panels: evals.len(),
    })
}

/// Per-axis panel edges: mandatory breakpoints first, then uniform fill so
/// the axis carries about `resolution` panels in total.
fn axis_edges(lo: f64, hi: f64, resolution: usize, breakpoints: &[f64]) -> Vec<f64> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > lo && b < hi)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(lo);
    bounds.extend(cuts);
    bounds.push(hi);
    let total_len = hi - lo;
    let mut edges = Vec::new();
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let k = ((resolution as f64) * (b - a) / total_len).round().max(1.0) as usize;
        for j in 0..k {
            edges.push(a + (b - a) * j as f64 / k as f64);
        }
    }
    edges.push(hi);
    edges
}

fn box_cells(lo: &[f64], hi: &[f64], opts: &QuadOptions) -> Vec<Cell> {
    let n = lo.len();
    let empty: Vec<f64> = Vec::new();
    let per_axis: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let brk = opts.breakpoints.get(i).unwrap_or(&empty);
            axis_edges(lo[i], hi[i], opts.resolution, brk)
        })
        .collect();
    let mut cells = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let clo: Vec<f64> = (0..n).map(|i| per_axis[i][idx[i]]).collect();
        let chi: Vec<f64> = (0..n).map(|i| per_axis[i][idx[i] + 1]).collect();
        cells.push(Cell::new(clo, chi));
        let mut axis = n;
        loop {
            if axis == 0 {
                return cells;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] + 1 < per_axis[axis].len() {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Integrate over an axis-aligned box.
pub fn integrate_box<F>(
    f: F,
    lo: &[f64],
    hi: &[f64],
    opts: &QuadOptions,
) -> Result<QuadratureResult, QuadError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    integrate_cells(f, box_cells(lo, hi, opts), opts)
}

/// Integrate over a whole domain. Box-like domains are paneled directly;
/// annuli use the inscribed cover from [`panels`].
pub fn integrate<F>(f: F, domain: &Domain, opts: &QuadOptions) -> Result<QuadratureResult, QuadError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    match domain {
        Domain::Annulus { .. } => {
            let ps = panels(domain, &vec![opts.resolution; domain.dim()]);
            integrate_cells(f, ps.cells, opts)
        }
        _ => {
            let bbox = domain.bounding_box();
            let lo: Vec<f64> = bbox.iter().map(|&(a, _)| a).collect();
            let hi: Vec<f64> = bbox.iter().map(|&(_, b)| b).collect();
            integrate_box(f, &lo, &hi, opts)
        }
    }
}

/// Weighted modular integral `∫ |f|^{p(x)} dμ` restricted to `support`.
pub fn modular_integral<F>(
    f: F,
    exponent: &ExponentField,
    measure: &WeightedMeasure,
    support: &Cell,
    opts: &QuadOptions,
) -> Result<QuadratureResult, QuadError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    let integrand = move |x: &[f64]| -> Result<f64, EvalError> {
        let w = measure.eval(x)?;
        if w == 0.0 {
            return Ok(0.0);
        }
        let t = f(x)?.abs();
        let p = exponent.value(x)?;
        let v = if t == 0.0 { 0.0 } else { t.powf(p) * w };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite("modular integrand".into()))
        }
    };
    integrate_box(integrand, &support.lo, &support.hi, opts)
}
