//! Spatial domains, payoff data and the lattice both the solver and the
//! simulator run on.
//!
//! A [`Lattice`] stores the grid points of spacing `h` that lie in the open
//! domain or in the exterior collar `{x not in domain : dist(x, domain) <= eps}`.
//! Collar nodes are terminal and carry the frozen payoffs; every interior node
//! owns a stencil listing the stored nodes inside its closed `eps`-ball.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when comparing squared distances against `eps^2`.
const BALL_SLACK: f64 = 1e-12;

/// Bounded open sets with the uniform exterior ball property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::Interval { a, b }.validated()
    }

    pub fn cube(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::Box { lo, hi }.validated()
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::Ball { center, radius }.validated()
    }

    pub fn annulus(center: Vec<f64>, r_in: f64, r_out: f64) -> Result<Self> {
        Self::Annulus { center, r_in, r_out }.validated()
    }

    /// Checks the shape parameters; used after deserialization as well.
    pub fn validated(self) -> Result<Self> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match &self {
            Domain::Interval { a, b } => a.is_finite() && b.is_finite() && a < b,
            Domain::Box { lo, hi } => {
                !lo.is_empty()
                    && lo.len() == hi.len()
                    && finite(lo)
                    && finite(hi)
                    && lo.iter().zip(hi).all(|(l, h)| l < h)
            }
            Domain::Ball { center, radius } => {
                !center.is_empty() && finite(center) && radius.is_finite() && *radius > 0.0
            }
            Domain::Annulus { center, r_in, r_out } => {
                !center.is_empty() && finite(center) && r_out.is_finite() && *r_in > 0.0 && r_in < r_out
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidDomain(format!("{self:?}")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } | Domain::Annulus { center, .. } => center.len(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() })
        }
    }

    /// Open-set membership; boundary points are outside.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        match self {
            Domain::Interval { a, b } => *a < x[0] && x[0] < *b,
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l < v && v < h),
            Domain::Ball { center, radius } => dist2(x, center) < radius * radius,
            Domain::Annulus { center, r_in, r_out } => {
                let d2 = dist2(x, center);
                r_in * r_in < d2 && d2 < r_out * r_out
            }
        }
    }

    /// Euclidean distance from `x` to the closure of the domain.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.distance_unchecked(x))
    }

    fn distance_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Interval { a, b } => (a - x[0]).max(x[0] - b).max(0.0),
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (l - v).max(v - h).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt(),
            Domain::Ball { center, radius } => (dist2(x, center).sqrt() - radius).max(0.0),
            Domain::Annulus { center, r_in, r_out } => {
                let r = dist2(x, center).sqrt();
                (r - r_out).max(r_in - r).max(0.0)
            }
        }
    }

    /// Axis-aligned bounding box `(lo, hi)` of the closure.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Interval { a, b } => (vec![*a], vec![*b]),
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Ball { center, radius: r } | Domain::Annulus { center, r_out: r, .. } => {
                (center.iter().map(|c| c - r).collect(), center.iter().map(|c| c + r).collect())
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Box { lo, hi } => dist2(lo, hi).sqrt(),
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::Annulus { r_out, .. } => 2.0 * r_out,
        }
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Built-in scalar fields used for payoffs and spatially varying coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Field {
    Constant {
        value: f64,
    },
    /// `offset + coeffs . x`
    Linear {
        coeffs: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `|x - center|`; an empty center means the origin.
    Norm {
        #[serde(default)]
        center: Vec<f64>,
    },
    /// Product of all coordinates.
    Product,
    /// `offset + sum_i weight_i * field_i(x)`
    Sum {
        terms: Vec<Term>,
        #[serde(default)]
        offset: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub weight: f64,
    pub field: Field,
}

impl Field {
    pub fn constant(value: f64) -> Self {
        Field::Constant { value }
    }

    pub fn linear(coeffs: Vec<f64>, offset: f64) -> Self {
        Field::Linear { coeffs, offset }
    }

    pub fn norm() -> Self {
        Field::Norm { center: Vec::new() }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Field::Constant { value } => *value,
            Field::Linear { coeffs, offset } => offset + coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>(),
            Field::Norm { center } if center.is_empty() => norm(x),
            Field::Norm { center } => dist2(x, center).sqrt(),
            Field::Product => x.iter().product(),
            Field::Sum { terms, offset } => offset + terms.iter().map(|t| t.weight * t.field.eval(x)).sum::<f64>(),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Field::Constant { value } => Some(*value),
            _ => None,
        }
    }

    pub(crate) fn validate(&self, dim: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("field {what}: {self:?}")));
        match self {
            Field::Constant { value } if !value.is_finite() => bad("not finite"),
            Field::Linear { coeffs, offset } if coeffs.len() != dim || !offset.is_finite() => {
                bad("coefficient count differs from dimension")
            }
            Field::Norm { center } if !center.is_empty() && center.len() != dim => bad("center dimension"),
            Field::Sum { terms, .. } => terms.iter().try_for_each(|t| t.field.validate(dim)),
            _ => Ok(()),
        }
    }
}

/// Terminal payoffs for the two boards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffData {
    pub f: Field,
    pub g: Field,
    /// Declared Lipschitz constant of both payoffs.
    #[serde(default)]
    pub lipschitz: f64,
}

impl PayoffData {
    pub fn new(f: Field, g: Field) -> Self {
        Self { f, g, lipschitz: 0.0 }
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = lipschitz;
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Field::constant(c), Field::constant(c))
    }

    pub fn field(&self, board: Board) -> &Field {
        match board {
            Board::One => &self.f,
            Board::Two => &self.g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Board {
    /// Tug-of-War board.
    #[serde(rename = "1")]
    One,
    /// Random walk board.
    #[serde(rename = "2")]
    Two,
}

impl Board {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Board::One),
            2 => Some(Board::Two),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Board::One => 1,
            Board::Two => 2,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Board::One => Board::Two,
            Board::Two => Board::One,
        }
    }
}

/// Terminal payoff `f(x)` (board 1) or `g(x)` (board 2) at an exterior point.
pub fn eval_payoff(domain: &Domain, payoff: &PayoffData, x: &[f64], board: Board) -> Result<f64> {
    if domain.contains(x)? {
        return Err(Error::InteriorPayoff(x.to_vec()));
    }
    Ok(payoff.field(board).eval(x))
}

const NO_NODE: u32 = u32::MAX;

/// Regular grid over the domain plus its exterior collar, with ball stencils.
#[derive(Debug, Clone)]
pub struct Lattice {
    domain: Domain,
    payoff: PayoffData,
    h: f64,
    epsilon: f64,
    origin: Vec<f64>,
    extent: Vec<usize>,
    strides: Vec<usize>,
    coords: Vec<f64>,
    grid_index: Vec<usize>,
    node_of: Vec<u32>,
    interior: Vec<bool>,
    interior_nodes: Vec<usize>,
    rank_of: Vec<u32>,
    f_values: Vec<f64>,
    g_values: Vec<f64>,
    offsets: Vec<Vec<i64>>,
    stencil_ptr: Vec<usize>,
    stencil_idx: Vec<u32>,
    run_ptr: Vec<usize>,
    runs: Vec<(u32, u32)>,
    max_run: usize,
}

impl Lattice {
    /// Builds the lattice. Requires `0 < h <= eps/4` and `eps < diam`.
    pub fn build(domain: &Domain, payoff: &PayoffData, h: f64, epsilon: f64) -> Result<Self> {
        let domain = domain.clone().validated()?;
        let dim = domain.dim();
        payoff.f.validate(dim)?;
        payoff.g.validate(dim)?;
        if !(h > 0.0 && h.is_finite() && h <= epsilon / 4.0 * (1.0 + BALL_SLACK)) {
            return Err(Error::SpacingRatio { h, epsilon });
        }
        let diameter = domain.diameter();
        if !(epsilon > 0.0 && epsilon < diameter) {
            return Err(Error::EpsilonRange { epsilon, diameter });
        }

        let ratio = epsilon / h;
        let collar_cells = (ratio * (1.0 - BALL_SLACK)).ceil() as usize;
        let (lo, hi) = domain.bounding_box();
        let origin: Vec<f64> = lo.iter().map(|l| l - collar_cells as f64 * h).collect();
        let extent: Vec<usize> =
            lo.iter().zip(&hi).map(|(l, u)| ((u - l) / h - 1e-9).ceil() as usize + 2 * collar_cells + 1).collect();
        let mut strides = vec![1usize; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * extent[k + 1];
        }
        let dense_len = strides[0] * extent[0];
        if dense_len > u32::MAX as usize / 2 {
            return Err(Error::InvalidParameter(format!("grid too large: {dense_len} points")));
        }

        let collar_limit = epsilon * (1.0 + 1e-9);
        let mut coords = Vec::new();
        let mut grid_index = Vec::new();
        let mut node_of = vec![NO_NODE; dense_len];
        let mut interior = Vec::new();
        let mut point = vec![0.0; dim];
        for (dense, slot) in node_of.iter_mut().enumerate() {
            let mut rest = dense;
            for k in 0..dim {
                let i = rest / strides[k];
                rest %= strides[k];
                point[k] = origin[k] + i as f64 * h;
            }
            let inside = domain.contains_unchecked(&point);
            if inside || domain.distance_unchecked(&point) <= collar_limit {
                *slot = grid_index.len() as u32;
                grid_index.push(dense);
                coords.extend_from_slice(&point);
                interior.push(inside);
            }
        }

        let interior_nodes: Vec<usize> = (0..interior.len()).filter(|&i| interior[i]).collect();
        if interior_nodes.is_empty() {
            return Err(Error::EmptyInterior);
        }
        let mut rank_of = vec![NO_NODE; interior.len()];
        for (r, &i) in interior_nodes.iter().enumerate() {
            rank_of[i] = r as u32;
        }

        let offsets = ball_offsets(dim, ratio);
        let dense_offsets: Vec<isize> =
            offsets.iter().map(|o| o.iter().zip(&strides).map(|(d, s)| *d as isize * *s as isize).sum()).collect();
        let mut stencil_ptr = Vec::with_capacity(interior_nodes.len() + 1);
        let mut stencil_idx = Vec::with_capacity(interior_nodes.len() * offsets.len());
        stencil_ptr.push(0);
        for &i in &interior_nodes {
            let base = grid_index[i] as isize;
            for d in &dense_offsets {
                let node = node_of[(base + d) as usize];
                if node == NO_NODE {
                    return Err(Error::InvalidDomain("stencil escapes the stored collar".to_string()));
                }
                stencil_idx.push(node);
            }
            stencil_ptr.push(stencil_idx.len());
        }

        // Stencil rows are contiguous in node order; the solver scans them as runs.
        let mut run_ptr = Vec::with_capacity(interior_nodes.len() + 1);
        let mut runs: Vec<(u32, u32)> = Vec::new();
        run_ptr.push(0);
        for w in stencil_ptr.windows(2) {
            let first = runs.len();
            for &node in &stencil_idx[w[0]..w[1]] {
                let extends = runs.len() > first && runs.last().is_some_and(|&(s, l)| s + l == node);
                if extends {
                    runs.last_mut().unwrap().1 += 1;
                } else {
                    runs.push((node, 1));
                }
            }
            run_ptr.push(runs.len());
        }
        let max_run = runs.iter().map(|r| r.1 as usize).max().unwrap_or(1);

        let n = interior.len();
        let f_values = (0..n).map(|i| payoff.f.eval(&coords[i * dim..(i + 1) * dim])).collect();
        let g_values = (0..n).map(|i| payoff.g.eval(&coords[i * dim..(i + 1) * dim])).collect();

        Ok(Self {
            domain,
            payoff: payoff.clone(),
            h,
            epsilon,
            origin,
            extent,
            strides,
            coords,
            grid_index,
            node_of,
            interior,
            interior_nodes,
            rank_of,
            f_values,
            g_values,
            offsets,
            stencil_ptr,
            stencil_idx,
            run_ptr,
            runs,
            max_run,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn payoff(&self) -> &PayoffData {
        &self.payoff
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of stored nodes (interior and collar).
    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior[i]
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    /// Terminal payoff stored at node `i` for the given board.
    pub fn payoff_value(&self, i: usize, board: Board) -> f64 {
        match board {
            Board::One => self.f_values[i],
            Board::Two => self.g_values[i],
        }
    }

    /// `C = max(sup |f|, sup |g|)` over the collar nodes.
    pub fn payoff_bound(&self) -> f64 {
        (0..self.len())
            .filter(|&i| !self.interior[i])
            .map(|i| self.f_values[i].abs().max(self.g_values[i].abs()))
            .fold(0.0, f64::max)
    }

    /// Stencil of an interior node: every stored node within closed distance
    /// `eps`, the node itself included. `None` for collar nodes.
    pub fn stencil(&self, node: usize) -> Option<&[u32]> {
        let r = *self.rank_of.get(node)?;
        (r != NO_NODE).then(|| self.stencil_by_rank(r as usize))
    }

    /// Stencil of the `rank`-th interior node.
    pub(crate) fn stencil_by_rank(&self, rank: usize) -> &[u32] {
        &self.stencil_idx[self.stencil_ptr[rank]..self.stencil_ptr[rank + 1]]
    }

    /// Stencil of the `rank`-th interior node as `(first node, length)` runs
    /// of consecutive node ids.
    pub(crate) fn runs_by_rank(&self, rank: usize) -> &[(u32, u32)] {
        &self.runs[self.run_ptr[rank]..self.run_ptr[rank + 1]]
    }

    pub(crate) fn max_run(&self) -> usize {
        self.max_run
    }

    /// Integer grid offsets making up every stencil, in stencil order.
    pub fn stencil_offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    /// Grid multi-index of node `i`.
    pub fn grid_coords(&self, i: usize) -> Vec<i64> {
        let mut rest = self.grid_index[i];
        self.strides
            .iter()
            .map(|s| {
                let v = rest / s;
                rest %= s;
                v as i64
            })
            .collect()
    }

    /// Node at a grid multi-index, if stored.
    pub fn node_at(&self, idx: &[i64]) -> Option<usize> {
        let mut dense = 0usize;
        for (k, &i) in idx.iter().enumerate() {
            if i < 0 || i as usize >= self.extent[k] {
                return None;
            }
            dense += i as usize * self.strides[k];
        }
        let n = self.node_of[dense];
        (n != NO_NODE).then_some(n as usize)
    }

    /// Node whose coordinates equal `x` up to a small fraction of `h`.
    pub fn node_at_point(&self, x: &[f64]) -> Option<usize> {
        let idx: Vec<i64> = x.iter().zip(&self.origin).map(|(v, o)| ((v - o) / self.h).round() as i64).collect();
        let n = self.node_at(&idx)?;
        (dist2(self.node(n), x).sqrt() <= 1e-6 * self.h).then_some(n)
    }

    /// Nearest stored node to `x`, searching the grid cells around it.
    pub fn nearest_node(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        self.for_each_within(x, self.h * (self.dim() as f64).sqrt(), |n, d2| {
            if best.is_none_or(|(b, bn)| d2 < b || (d2 == b && n < bn)) {
                best = Some((d2, n));
            }
        });
        best.map(|(_, n)| n)
    }

    /// Calls `visit(node, squared_distance)` for every stored node within
    /// closed distance `radius` of the arbitrary point `x`.
    pub fn for_each_within(&self, x: &[f64], radius: f64, mut visit: impl FnMut(usize, f64)) {
        let dim = self.dim();
        let r2 = radius * radius * (1.0 + BALL_SLACK);
        let mut lo = vec![0i64; dim];
        let mut hi = vec![0i64; dim];
        for k in 0..dim {
            let a = ((x[k] - radius - self.origin[k]) / self.h - 1e-9).ceil() as i64;
            let b = ((x[k] + radius - self.origin[k]) / self.h + 1e-9).floor() as i64;
            lo[k] = a.max(0);
            hi[k] = b.min(self.extent[k] as i64 - 1);
            if lo[k] > hi[k] {
                return;
            }
        }
        let mut idx = lo.clone();
        let mut point = vec![0.0; dim];
        loop {
            for k in 0..dim {
                point[k] = self.origin[k] + idx[k] as f64 * self.h;
            }
            let d2 = dist2(&point, x);
            if d2 <= r2 {
                if let Some(n) = self.node_at(&idx) {
                    visit(n, d2);
                }
            }
            let mut k = dim;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if idx[k] < hi[k] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = lo[k];
            }
        }
    }

    /// Writes `node_id, x0.., interior_flag, f_value, g_value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let dim = self.dim();
        write!(out, "node_id")?;
        for k in 0..dim {
            write!(out, ",x{k}")?;
        }
        writeln!(out, ",interior_flag,f_value,g_value")?;
        for i in 0..self.len() {
            write!(out, "{i}")?;
            for v in self.node(i) {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{},{},{}", u8::from(self.interior[i]), self.f_values[i], self.g_values[i])?;
        }
        Ok(())
    }
}

/// Integer offsets `k` with `|k| <= ratio`, in row-major order.
fn ball_offsets(dim: usize, ratio: f64) -> Vec<Vec<i64>> {
    let m = (ratio * (1.0 + BALL_SLACK)).floor() as i64;
    let limit = ratio * ratio * (1.0 + BALL_SLACK);
    let mut out = Vec::new();
    let mut cur = vec![-m; dim];
    loop {
        let r2: i64 = cur.iter().map(|c| c * c).sum();
        if (r2 as f64) <= limit {
            out.push(cur.clone());
        }
        let mut k = dim;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if cur[k] < m {
                cur[k] += 1;
                break;
            }
            cur[k] = -m;
        }
    }
}
