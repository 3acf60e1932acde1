use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Lattice;
use crate::error::{Error, Result};

/// One-board averaging operator applied to a value field over a stencil.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "alpha", rename_all = "snake_case")]
pub enum Operator {
    /// `1/2 max + 1/2 min` (Tug-of-War).
    Infinity,
    /// Unweighted stencil mean (random walk).
    Laplace,
    /// `alpha * (1/2 max + 1/2 min) + (1 - alpha) * mean`.
    Mix(f64),
}

impl Operator {
    /// Picks the pure operator when the mixing weight is exactly 0 or 1.
    pub fn from_mix(alpha: f64) -> Self {
        if alpha == 1.0 {
            Operator::Infinity
        } else if alpha == 0.0 {
            Operator::Laplace
        } else {
            Operator::Mix(alpha)
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            Operator::Mix(a) if !(0.0..=1.0).contains(a) => {
                Err(Error::InvalidParameter(format!("mixing weight {a} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    fn needs_extrema(&self) -> bool {
        !matches!(self, Operator::Laplace)
    }

    #[inline]
    fn apply(&self, values: &[f64], table: Option<&RangeExtrema<'_>>, runs: &[(u32, u32)]) -> f64 {
        match self {
            Operator::Infinity => tow_average(table.expect("extrema table"), runs),
            Operator::Laplace => run_mean(values, runs),
            Operator::Mix(alpha) => {
                mix_value(*alpha, tow_average(table.expect("extrema table"), runs), run_mean(values, runs))
            }
        }
    }
}

#[inline]
pub(crate) fn mix_value(alpha: f64, tow: f64, mean: f64) -> f64 {
    alpha * tow + (1.0 - alpha) * mean
}

#[inline]
fn tow_average(table: &RangeExtrema<'_>, runs: &[(u32, u32)]) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for &(start, len) in runs {
        let (a, b) = table.query(start as usize, len as usize);
        hi = hi.max(b);
        lo = lo.min(a);
    }
    0.5 * hi + 0.5 * lo
}

#[inline]
fn run_mean(values: &[f64], runs: &[(u32, u32)]) -> f64 {
    let mut lanes = [0.0f64; 4];
    let mut count = 0usize;
    for &(start, len) in runs {
        let row = &values[start as usize..(start + len) as usize];
        let mut chunks = row.chunks_exact(4);
        for c in &mut chunks {
            for k in 0..4 {
                lanes[k] += c[k];
            }
        }
        for (k, v) in chunks.remainder().iter().enumerate() {
            lanes[k] += v;
        }
        count += len as usize;
    }
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) / count as f64
}

/// Sparse table answering range min/max over node-id intervals in O(1).
pub(crate) struct RangeExtrema<'v> {
    base: &'v [f64],
    max_levels: Vec<Vec<f64>>,
    min_levels: Vec<Vec<f64>>,
}

impl<'v> RangeExtrema<'v> {
    pub fn new(base: &'v [f64], longest: usize) -> Self {
        let levels = usize::BITS - longest.max(1).leading_zeros();
        let mut max_levels: Vec<Vec<f64>> = Vec::new();
        let mut min_levels: Vec<Vec<f64>> = Vec::new();
        for k in 1..levels as usize {
            let half = 1usize << (k - 1);
            let (mx, mn) = {
                let (pmax, pmin) = match k {
                    1 => (base, base),
                    _ => (&max_levels[k - 2][..], &min_levels[k - 2][..]),
                };
                let n = pmax.len().saturating_sub(half);
                let mx: Vec<f64> = (0..n).map(|i| pmax[i].max(pmax[i + half])).collect();
                let mn: Vec<f64> = (0..n).map(|i| pmin[i].min(pmin[i + half])).collect();
                (mx, mn)
            };
            max_levels.push(mx);
            min_levels.push(mn);
        }
        Self { base, max_levels, min_levels }
    }

    /// `(min, max)` over `base[start..start + len]`, `len >= 1`.
    #[inline]
    pub fn query(&self, start: usize, len: usize) -> (f64, f64) {
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        if k == 0 {
            let v = self.base[start];
            return (v, v);
        }
        let tail = start + len - (1 << k);
        let mx = &self.max_levels[k - 1];
        let mn = &self.min_levels[k - 1];
        (mn[start].min(mn[tail]), mx[start].max(mx[tail]))
    }
}

/// Coupling of one board to the others at every interior node.
#[derive(Debug, Clone)]
pub(crate) struct BoardRule {
    pub op: Operator,
    /// `(other board, per-interior-rank weight a_ij * eps^2)`
    pub couplings: Vec<(usize, Vec<f64>)>,
    /// `1 - sum_j a_ij * eps^2` per interior rank.
    pub keep: Vec<f64>,
}

/// Jacobi sweep machinery for an n-board DPP on a lattice.
#[derive(Debug, Clone)]
pub(crate) struct Engine<'a> {
    pub lattice: &'a Lattice,
    pub rules: Vec<BoardRule>,
}

const CHUNK: usize = 512;

impl<'a> Engine<'a> {
    pub fn new(lattice: &'a Lattice, rules: Vec<BoardRule>) -> Result<Self> {
        let n = lattice.interior_nodes().len();
        for (i, r) in rules.iter().enumerate() {
            r.op.validate()?;
            for (j, w) in &r.couplings {
                if *j == i || *j >= rules.len() || w.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "bad coupling from board {} to board {}",
                        i + 1,
                        j + 1
                    )));
                }
                if w.iter().any(|x| !(*x >= 0.0)) {
                    return Err(Error::InvalidParameter(format!("negative jump weight on board {}", i + 1)));
                }
            }
            if r.keep.iter().any(|k| !(*k >= 0.0 && *k <= 1.0)) {
                return Err(Error::InvalidParameter(format!("total jump probability on board {} exceeds 1", i + 1)));
            }
        }
        Ok(Self { lattice, rules })
    }

    pub fn boards(&self) -> usize {
        self.rules.len()
    }

    /// New interior value of board `b` at interior rank `r`.
    #[inline]
    fn node_value(&self, fields: &[Vec<f64>], table: Option<&RangeExtrema<'_>>, b: usize, r: usize) -> f64 {
        let node = self.lattice.interior_nodes()[r];
        let rule = &self.rules[b];
        let runs = self.lattice.runs_by_rank(r);
        let mut acc = rule.keep[r] * rule.op.apply(&fields[b], table, runs);
        for (j, w) in &rule.couplings {
            acc += w[r] * fields[*j][node];
        }
        acc
    }

    /// Interior values of the update, indexed `[board][rank]`.
    pub fn interior_update(&self, fields: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.lattice.interior_nodes().len();
        (0..self.boards())
            .map(|b| {
                let table =
                    self.rules[b].op.needs_extrema().then(|| RangeExtrema::new(&fields[b], self.lattice.max_run()));
                let table = table.as_ref();
                let mut out = vec![0.0; n];
                out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                    for (k, slot) in chunk.iter_mut().enumerate() {
                        *slot = self.node_value(fields, table, b, c * CHUNK + k);
                    }
                });
                out
            })
            .collect()
    }

    /// Writes the update of `fields` into `out` (exterior rows copied) and
    /// returns the sup-norm change over interior nodes.
    pub fn sweep_into(&self, fields: &[Vec<f64>], out: &mut [Vec<f64>]) -> f64 {
        let fresh = self.interior_update(fields);
        let mut change: f64 = 0.0;
        for b in 0..self.boards() {
            out[b].copy_from_slice(&fields[b]);
            for (r, &node) in self.lattice.interior_nodes().iter().enumerate() {
                let v = fresh[b][r];
                change = change.max((v - fields[b][node]).abs());
                out[b][node] = v;
            }
        }
        change
    }

    pub fn residual(&self, fields: &[Vec<f64>]) -> f64 {
        let fresh = self.interior_update(fields);
        let mut res: f64 = 0.0;
        for (b, row) in fresh.iter().enumerate() {
            for (r, &node) in self.lattice.interior_nodes().iter().enumerate() {
                res = res.max((row[r] - fields[b][node]).abs());
            }
        }
        res
    }
}
