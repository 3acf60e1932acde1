//! Fixed point of the coupled two-board dynamic programming principle.
//!
//! For every interior node `x` (stencil `S(x)`, jump weights `a`, `b`):
//!
//! ```text
//! u(x) = a eps^2 v(x) + (1 - a eps^2) [ alpha1 (max_S u + min_S u)/2 + (1 - alpha1) mean_S u ]
//! v(x) = b eps^2 u(x) + (1 - b eps^2) [ alpha2 (max_S v + min_S v)/2 + (1 - alpha2) mean_S v ]
//! ```
//!
//! with `u = f`, `v = g` frozen on the collar. The update is monotone and
//! nonexpansive in the sup norm, so Jacobi iteration from the constant
//! sub/supersolutions `-C` and `+C` brackets the unique fixed point.

mod engine;
mod system;

use serde::{Deserialize, Serialize};

use crate::domain::{Board, Field, Lattice};
use crate::error::{Error, Result};

pub use engine::Operator;
pub(crate) use engine::{BoardRule, Engine};
pub use system::{solve_n_system, BoardSpec, NSystem, NSystemSolution};

/// Board values `u` (Tug-of-War) and `v` (random walk), indexed by node id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuePair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub epsilon: f64,
}

impl ValuePair {
    /// Constant `c` on the interior, payoff data on the collar.
    pub fn with_interior(lattice: &Lattice, c: f64) -> Self {
        let pick = |board| {
            (0..lattice.len())
                .map(|i| if lattice.is_interior(i) { c } else { lattice.payoff_value(i, board) })
                .collect()
        };
        Self { u: pick(Board::One), v: pick(Board::Two), epsilon: lattice.epsilon() }
    }

    pub fn get(&self, board: Board) -> &[f64] {
        match board {
            Board::One => &self.u,
            Board::Two => &self.v,
        }
    }

    /// Sup-norm distance over both boards.
    pub fn sup_distance(&self, other: &ValuePair) -> f64 {
        sup_diff(&self.u, &other.u).max(sup_diff(&self.v, &other.v))
    }

    /// True when `self <= other` at every node on both boards.
    pub fn le(&self, other: &ValuePair) -> bool {
        self.u.iter().zip(&other.u).all(|(a, b)| a <= b) && self.v.iter().zip(&other.v).all(|(a, b)| a <= b)
    }

    pub fn sup_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).fold(0.0, |m, x| m.max(x.abs()))
    }

    fn check(&self, lattice: &Lattice) -> Result<()> {
        for f in [&self.u, &self.v] {
            if f.len() != lattice.len() {
                return Err(Error::ShapeMismatch { expected: lattice.len(), got: f.len() });
            }
        }
        Ok(())
    }

    fn into_fields(self) -> Vec<Vec<f64>> {
        vec![self.u, self.v]
    }

    fn from_fields(mut fields: Vec<Vec<f64>>, epsilon: f64) -> Self {
        let v = fields.pop().unwrap_or_default();
        let u = fields.pop().unwrap_or_default();
        Self { u, v, epsilon }
    }
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Jump weights and per-board mixing for the generalized DPP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DppParams {
    /// Board 1 -> 2 jump weight `a(x)`; jump probability `a(x) eps^2`.
    pub jump_coeff_1: Field,
    /// Board 2 -> 1 jump weight `b(x)`.
    pub jump_coeff_2: Field,
    /// Tug-of-War share on board 1.
    pub mix_alpha_1: f64,
    /// Tug-of-War share on board 2.
    pub mix_alpha_2: f64,
}

impl Default for DppParams {
    fn default() -> Self {
        Self {
            jump_coeff_1: Field::constant(1.0),
            jump_coeff_2: Field::constant(1.0),
            mix_alpha_1: 1.0,
            mix_alpha_2: 0.0,
        }
    }
}

impl DppParams {
    pub(crate) fn engine<'a>(&self, lattice: &'a Lattice) -> Result<Engine<'a>> {
        for a in [self.mix_alpha_1, self.mix_alpha_2] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidParameter(format!("mixing weight {a} outside [0, 1]")));
            }
        }
        let eps2 = lattice.epsilon() * lattice.epsilon();
        let weights = |field: &Field, name: &str| -> Result<Vec<f64>> {
            lattice
                .interior_nodes()
                .iter()
                .map(|&i| {
                    let c = field.eval(lattice.node(i));
                    if c >= 0.0 && c * eps2 <= 1.0 {
                        Ok(c * eps2)
                    } else {
                        Err(Error::InvalidParameter(format!(
                            "{name}(x) = {c} at {:?} violates 0 <= {name} eps^2 <= 1",
                            lattice.node(i)
                        )))
                    }
                })
                .collect()
        };
        let wa = weights(&self.jump_coeff_1, "a")?;
        let wb = weights(&self.jump_coeff_2, "b")?;
        let keep = |w: &[f64]| w.iter().map(|x| 1.0 - x).collect();
        Engine::new(
            lattice,
            vec![
                BoardRule { op: Operator::from_mix(self.mix_alpha_1), keep: keep(&wa), couplings: vec![(1, wa)] },
                BoardRule { op: Operator::from_mix(self.mix_alpha_2), keep: keep(&wb), couplings: vec![(0, wb)] },
            ],
        )
    }
}

/// Starting point of the value iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Seed {
    /// Constant `-C` on the interior.
    Lower,
    /// Constant `+C` on the interior.
    Upper,
    Custom(ValuePair),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    /// Estimated sup distance from the returned iterate to the fixed point.
    pub error_estimate: f64,
    /// Sup distance between the fixed points reached from `-C` and `+C`.
    pub gap_up_down: Option<f64>,
    pub converged: bool,
}

/// Iteration controls. `max_iter = None` means `10^6 / eps^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: None }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub(crate) fn iteration_cap(&self, epsilon: f64) -> usize {
        self.max_iter.unwrap_or_else(|| (1e6 / (epsilon * epsilon)).min(1e12) as usize)
    }
}

/// One Jacobi sweep of the DPP.
pub fn dpp_update(values: &ValuePair, lattice: &Lattice, params: &DppParams) -> Result<ValuePair> {
    values.check(lattice)?;
    let engine = params.engine(lattice)?;
    let fields = values.clone().into_fields();
    let mut out = fields.clone();
    engine.sweep_into(&fields, &mut out);
    Ok(ValuePair::from_fields(out, values.epsilon))
}

/// Sup over interior nodes and both boards of `|T(values) - values|`.
pub fn residual(values: &ValuePair, lattice: &Lattice, params: &DppParams) -> Result<f64> {
    values.check(lattice)?;
    let engine = params.engine(lattice)?;
    Ok(engine.residual(&[values.u.clone(), values.v.clone()]))
}

/// Iterates the update until the sup-norm change `d_k` drops below `tol`
/// and so does the tail bound `d_k rho / (1 - rho)`, where `rho` is the
/// contraction rate observed over the last 20 sweeps. The plain `d_k < tol`
/// rule leaves the iterate up to `tol / (1 - rho)` away from the fixed point,
/// which is far more than `tol` on slowly mixing lattices.
///
/// Hitting the iteration cap is not an error: the last iterate is returned
/// with `converged = false`.
pub fn solve_fixed_point(
    lattice: &Lattice,
    params: &DppParams,
    seed: Seed,
    opts: SolveOptions,
) -> Result<(ValuePair, SolveReport)> {
    let engine = params.engine(lattice)?;
    let c = lattice.payoff_bound();
    let start = match seed {
        Seed::Lower => ValuePair::with_interior(lattice, -c),
        Seed::Upper => ValuePair::with_interior(lattice, c),
        Seed::Custom(v) => {
            v.check(lattice)?;
            v
        }
    };
    let eps = lattice.epsilon();
    let (fields, report) = iterate(&engine, start.into_fields(), opts, eps)?;
    Ok((ValuePair::from_fields(fields, eps), report))
}

pub(crate) fn iterate(
    engine: &Engine<'_>,
    mut cur: Vec<Vec<f64>>,
    opts: SolveOptions,
    epsilon: f64,
) -> Result<(Vec<Vec<f64>>, SolveReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be positive", opts.tol)));
    }
    let cap = opts.iteration_cap(epsilon);
    let mut next = cur.clone();
    let mut history = Vec::new();
    let mut change = f64::INFINITY;
    let mut error_estimate = f64::INFINITY;
    while history.len() < cap {
        change = engine.sweep_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        history.push(change);
        error_estimate = tail_error(&history, opts.tol);
        if change < opts.tol && error_estimate < opts.tol {
            break;
        }
    }
    let final_residual = engine.residual(&cur);
    let report = SolveReport {
        iterations: history.len(),
        residual_history: history,
        final_residual,
        error_estimate,
        gap_up_down: None,
        converged: change < opts.tol && final_residual < 10.0 * opts.tol,
    };
    Ok((cur, report))
}

const RATE_WINDOW: usize = 20;

/// A-posteriori bound `d_k rho / (1 - rho)` on the distance to the fixed
/// point, with the contraction rate `rho` observed over the last window.
fn tail_error(history: &[f64], tol: f64) -> f64 {
    let n = history.len();
    let last = history[n - 1];
    // Below this the tail bound holds for any rate up to 0.999.
    if last <= 1e-3 * tol {
        return 0.0;
    }
    if n <= RATE_WINDOW {
        return f64::INFINITY;
    }
    let first = history[n - 1 - RATE_WINDOW];
    let rho = (last / first).powf(1.0 / RATE_WINDOW as f64);
    if rho < 1.0 {
        last * rho / (1.0 - rho)
    } else {
        f64::INFINITY
    }
}

/// Fixed points reached from both Perron seeds.
#[derive(Debug, Clone)]
pub struct PerronSolution {
    pub lower: ValuePair,
    pub upper: ValuePair,
    pub lower_report: SolveReport,
    pub upper_report: SolveReport,
    pub gap: f64,
}

impl PerronSolution {
    /// Report of the lower solve with the seed gap filled in.
    pub fn report(&self) -> SolveReport {
        SolveReport {
            iterations: self.lower_report.iterations.max(self.upper_report.iterations),
            gap_up_down: Some(self.gap),
            converged: self.lower_report.converged && self.upper_report.converged,
            ..self.lower_report.clone()
        }
    }
}

pub fn solve_perron(lattice: &Lattice, params: &DppParams, opts: SolveOptions) -> Result<PerronSolution> {
    let (lower, lower_report) = solve_fixed_point(lattice, params, Seed::Lower, opts)?;
    let (upper, upper_report) = solve_fixed_point(lattice, params, Seed::Upper, opts)?;
    let gap = lower.sup_distance(&upper);
    Ok(PerronSolution { lower, upper, lower_report, upper_report, gap })
}

/// Whether `a <= b` nodewise implies `T(a) <= T(b)` nodewise for this pair.
pub fn comparison_check(pair_a: &ValuePair, pair_b: &ValuePair, lattice: &Lattice, params: &DppParams) -> Result<bool> {
    if !pair_a.le(pair_b) {
        return Ok(true);
    }
    let ta = dpp_update(pair_a, lattice, params)?;
    let tb = dpp_update(pair_b, lattice, params)?;
    Ok(ta.le(&tb))
}
