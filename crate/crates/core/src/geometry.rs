//! Domain descriptions and quadrature-ready panel decompositions.
//!
//! Domains are open sets: intervals, axis-aligned boxes, origin-centered
//! annuli (origin excluded), and boxes inside the positive orthant. The panel
//! generator produces axis-aligned cells; for annuli the cells form an
//! inscribed cover whose uncovered volume is reported and shrinks under
//! boundary refinement.

use thiserror::Error;

use rand::Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("domain has empty or inverted extent on axis {axis}")]
    EmptyAxis { axis: usize },
    #[error("annulus needs 0 < r_in < r_out, got r_in = {r_in}, r_out = {r_out}")]
    BadRadii { r_in: f64, r_out: f64 },
    #[error("orthant box must lie in the positive orthant (axis {axis} starts at {lo})")]
    NotInOrthant { axis: usize, lo: f64 },
    #[error("dimension must be at least 1")]
    ZeroDim,
}

/// An open computational domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Open interval (a, b).
    Interval { a: f64, b: f64 },
    /// Axis-aligned open box, one `(lo, hi)` pair per axis.
    Box { bounds: Vec<(f64, f64)> },
    /// Origin-centered annulus `{ r_in < |x| < r_out }`; the origin is
    /// always excluded (`r_in > 0`).
    Annulus { dim: usize, r_in: f64, r_out: f64 },
    /// Axis-aligned box contained in the positive orthant.
    OrthantBox { bounds: Vec<(f64, f64)> },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self, DomainError> {
        if !(a < b) {
            return Err(DomainError::EmptyAxis { axis: 0 });
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn box_nd(bounds: Vec<(f64, f64)>) -> Result<Self, DomainError> {
        check_bounds(&bounds)?;
        Ok(Domain::Box { bounds })
    }

    pub fn annulus(dim: usize, r_in: f64, r_out: f64) -> Result<Self, DomainError> {
        if dim == 0 {
            return Err(DomainError::ZeroDim);
        }
        if !(0.0 < r_in && r_in < r_out) {
            return Err(DomainError::BadRadii { r_in, r_out });
        }
        Ok(Domain::Annulus { dim, r_in, r_out })
    }

    pub fn orthant_box(bounds: Vec<(f64, f64)>) -> Result<Self, DomainError> {
        check_bounds(&bounds)?;
        for (axis, &(lo, _)) in bounds.iter().enumerate() {
            if lo < 0.0 {
                return Err(DomainError::NotInOrthant { axis, lo });
            }
        }
        Ok(Domain::OrthantBox { bounds })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Box { bounds } | Domain::OrthantBox { bounds } => bounds.len(),
            Domain::Annulus { dim, .. } => *dim,
        }
    }

    /// Exact volume (closed form for the annulus).
    pub fn volume(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Box { bounds } | Domain::OrthantBox { bounds } => {
                bounds.iter().map(|(lo, hi)| hi - lo).product()
            }
            Domain::Annulus { dim, r_in, r_out } => {
                unit_ball_volume(*dim) * (r_out.powi(*dim as i32) - r_in.powi(*dim as i32))
            }
        }
    }

    /// Smallest axis-aligned box containing the domain.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match self {
            Domain::Interval { a, b } => vec![(*a, *b)],
            Domain::Box { bounds } | Domain::OrthantBox { bounds } => bounds.clone(),
            Domain::Annulus { dim, r_out, .. } => vec![(-r_out, *r_out); *dim],
        }
    }

    /// Membership in the closure of the domain.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        match self {
            Domain::Interval { a, b } => x.len() == 1 && *a <= x[0] && x[0] <= *b,
            Domain::Box { bounds } | Domain::OrthantBox { bounds } => {
                x.len() == bounds.len()
                    && bounds
                        .iter()
                        .zip(x)
                        .all(|(&(lo, hi), &xi)| lo <= xi && xi <= hi)
            }
            Domain::Annulus { dim, r_in, r_out } => {
                let n = norm(x);
                x.len() == *dim && *r_in <= n && n <= *r_out
            }
        }
    }

    /// Strict membership in the open domain.
    pub fn contains_open(&self, x: &[f64]) -> bool {
        match self {
            Domain::Interval { a, b } => x.len() == 1 && *a < x[0] && x[0] < *b,
            Domain::Box { bounds } | Domain::OrthantBox { bounds } => {
                x.len() == bounds.len()
                    && bounds
                        .iter()
                        .zip(x)
                        .all(|(&(lo, hi), &xi)| lo < xi && xi < hi)
            }
            Domain::Annulus { dim, r_in, r_out } => {
                let n = norm(x);
                x.len() == *dim && *r_in < n && n < *r_out
            }
        }
    }

    /// Whether the closed box `[lo, hi]` lies strictly inside the domain.
    pub fn contains_box_strictly(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self {
            Domain::Interval { a, b } => lo.len() == 1 && *a < lo[0] && hi[0] < *b,
            Domain::Box { bounds } | Domain::OrthantBox { bounds } => {
                lo.len() == bounds.len()
                    && bounds
                        .iter()
                        .enumerate()
                        .all(|(i, &(a, b))| a < lo[i] && hi[i] < b)
            }
            Domain::Annulus { dim, r_in, r_out } => {
                if lo.len() != *dim {
                    return false;
                }
                let cell = Cell {
                    lo: lo.to_vec(),
                    hi: hi.to_vec(),
                };
                *r_in < cell.min_norm() && cell.max_norm() < *r_out
            }
        }
    }
}

fn check_bounds(bounds: &[(f64, f64)]) -> Result<(), DomainError> {
    if bounds.is_empty() {
        return Err(DomainError::ZeroDim);
    }
    for (axis, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo < hi) {
            return Err(DomainError::EmptyAxis { axis });
        }
    }
    Ok(())
}

/// Volume of the unit ball in `n` dimensions, via the two-step recursion.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Cells
// ---------------------------------------------------------------------------

/// Axis-aligned closed cell used as a quadrature panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        Cell { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn longest_axis(&self) -> usize {
        let mut best = 0;
        let mut len = self.hi[0] - self.lo[0];
        for i in 1..self.dim() {
            let l = self.hi[i] - self.lo[i];
            if l > len {
                len = l;
                best = i;
            }
        }
        best
    }

    /// Split at the midpoint along `axis`.
    pub fn split(&self, axis: usize) -> (Cell, Cell) {
        let mid = 0.5 * (self.lo[axis] + self.hi[axis]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[axis] = mid;
        right.lo[axis] = mid;
        (left, right)
    }

    /// Distance from the origin to the nearest point of the cell.
    pub fn min_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim() {
            let c = 0.0_f64.clamp(self.lo[i], self.hi[i]);
            s += c * c;
        }
        s.sqrt()
    }

    /// Distance from the origin to the farthest corner of the cell.
    pub fn max_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim() {
            let m = self.lo[i].abs().max(self.hi[i].abs());
            s += m * m;
        }
        s.sqrt()
    }

    fn split_all_axes(&self) -> Vec<Cell> {
        let mut cells = vec![self.clone()];
        for axis in 0..self.dim() {
            let mut next = Vec::with_capacity(cells.len() * 2);
            for c in cells {
                let (a, b) = c.split(axis);
                next.push(a);
                next.push(b);
            }
            cells = next;
        }
        cells
    }
}

/// A panel decomposition plus the volume it fails to cover.
#[derive(Debug, Clone)]
pub struct PanelSet {
    pub cells: Vec<Cell>,
    pub uncovered_volume: f64,
}

impl PanelSet {
    pub fn covered_volume(&self) -> f64 {
        self.cells.iter().map(Cell::volume).sum()
    }
}

/// Depth of recursive boundary-cell subdivision used for annuli.
const ANNULUS_BOUNDARY_DEPTH: usize = 5;

/// Decompose the domain into axis-aligned cells, `resolution[i]` base cells
/// per axis over the bounding box. Box-like domains are covered exactly; the
/// annulus gets an inscribed cover with recursively refined boundary cells
/// and a reported uncovered volume.
pub fn panels(domain: &Domain, resolution: &[usize]) -> PanelSet {
    let bbox = domain.bounding_box();
    let n = bbox.len();
    assert_eq!(resolution.len(), n, "one resolution entry per axis");
    let grid = grid_cells(&bbox, resolution);
    match domain {
        Domain::Interval { .. } | Domain::Box { .. } | Domain::OrthantBox { .. } => PanelSet {
            cells: grid,
            uncovered_volume: 0.0,
        },
        Domain::Annulus { r_in, r_out, .. } => {
            let mut inside = Vec::new();
            for cell in grid {
                classify_annulus_cell(cell, *r_in, *r_out, ANNULUS_BOUNDARY_DEPTH, &mut inside);
            }
            let covered: f64 = inside.iter().map(Cell::volume).sum();
            PanelSet {
                cells: inside,
                uncovered_volume: (domain.volume() - covered).max(0.0),
            }
        }
    }
}

fn classify_annulus_cell(cell: Cell, r_in: f64, r_out: f64, depth: usize, out: &mut Vec<Cell>) {
    let min_n = cell.min_norm();
    let max_n = cell.max_norm();
    if min_n >= r_in && max_n <= r_out {
        out.push(cell);
        return;
    }
    // Fully outside: entirely inside the hole or entirely beyond the outer
    // sphere.
    if max_n <= r_in || min_n >= r_out {
        return;
    }
    if depth == 0 {
        return;
    }
    for child in cell.split_all_axes() {
        classify_annulus_cell(child, r_in, r_out, depth - 1, out);
    }
}

fn grid_cells(bbox: &[(f64, f64)], resolution: &[usize]) -> Vec<Cell> {
    let n = bbox.len();
    let mut edges: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, &(lo, hi)) in bbox.iter().enumerate() {
        let k = resolution[i].max(1);
        let mut e = Vec::with_capacity(k + 1);
        for j in 0..=k {
            e.push(lo + (hi - lo) * j as f64 / k as f64);
        }
        edges.push(e);
    }
    let mut cells = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let lo: Vec<f64> = (0..n).map(|i| edges[i][idx[i]]).collect();
        let hi: Vec<f64> = (0..n).map(|i| edges[i][idx[i] + 1]).collect();
        cells.push(Cell::new(lo, hi));
        // Row-major advance.
        let mut axis = n;
        loop {
            if axis == 0 {
                return cells;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < resolution[axis].max(1) {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Deterministic sample grid over the closure of the domain: `resolution`
/// equispaced values per axis including endpoints, filtered by closed
/// membership. Row-major order.
pub fn grid_points(domain: &Domain, resolution: usize) -> Vec<Vec<f64>> {
    let bbox = domain.bounding_box();
    let n = bbox.len();
    let k = resolution.max(2);
    let axis_vals: Vec<Vec<f64>> = bbox
        .iter()
        .map(|&(lo, hi)| {
            (0..k)
                .map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64)
                .collect()
        })
        .collect();
    let mut pts = Vec::new();
    let mut idx = vec![0usize; n];
    'outer: loop {
        let p: Vec<f64> = (0..n).map(|i| axis_vals[i][idx[i]]).collect();
        if domain.contains_closed(&p) {
            pts.push(p);
        }
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
    pts
}

/// Rejection-sample `count` points strictly inside the domain.
pub fn sample_points<R: Rng>(domain: &Domain, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let bbox = domain.bounding_box();
    let mut pts = Vec::with_capacity(count);
    let mut guard = 0usize;
    while pts.len() < count {
        guard += 1;
        assert!(
            guard < count.max(1) * 10_000,
            "rejection sampling failed to hit the domain"
        );
        let p: Vec<f64> = bbox.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
        if domain.contains_open(&p) {
            pts.push(p);
        }
    }
    pts
}
