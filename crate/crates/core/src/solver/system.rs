use serde::{Deserialize, Serialize};

use crate::domain::{Field, Lattice};
use crate::error::{Error, Result};

use super::{iterate, sup_diff, BoardRule, Engine, Operator, SolveOptions, SolveReport};

/// One board of an n-board system: its averaging operator, constant jump
/// weights `a_ij` towards the other boards, and terminal payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardSpec {
    pub operator: Operator,
    /// Row `i` of the coupling matrix; the diagonal entry is ignored.
    pub coupling: Vec<f64>,
    pub payoff: Field,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NSystem {
    pub boards: Vec<BoardSpec>,
}

#[derive(Debug, Clone)]
pub struct NSystemSolution {
    pub fields: Vec<Vec<f64>>,
    pub report: SolveReport,
}

impl NSystem {
    fn payoff_values(&self, lattice: &Lattice) -> Vec<Vec<f64>> {
        self.boards.iter().map(|b| (0..lattice.len()).map(|i| b.payoff.eval(lattice.node(i))).collect()).collect()
    }

    fn engine<'a>(&self, lattice: &'a Lattice) -> Result<Engine<'a>> {
        let n = self.boards.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty system".into()));
        }
        let eps2 = lattice.epsilon() * lattice.epsilon();
        let ranks = lattice.interior_nodes().len();
        let mut rules = Vec::with_capacity(n);
        for (i, spec) in self.boards.iter().enumerate() {
            if spec.coupling.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "board {} has {} coupling entries, expected {n}",
                    i + 1,
                    spec.coupling.len()
                )));
            }
            spec.payoff.validate(lattice.dim())?;
            let mut couplings = Vec::new();
            let mut b_i = 0.0;
            for (j, &a) in spec.coupling.iter().enumerate() {
                if j == i {
                    continue;
                }
                if !(a >= 0.0) {
                    return Err(Error::InvalidParameter(format!("a_{}{} = {a} is negative", i + 1, j + 1)));
                }
                b_i += a;
                if a > 0.0 {
                    couplings.push((j, vec![a * eps2; ranks]));
                }
            }
            if b_i * eps2 > 1.0 {
                return Err(Error::InvalidParameter(format!("b_{} eps^2 = {} exceeds 1", i + 1, b_i * eps2)));
            }
            rules.push(BoardRule { op: spec.operator, couplings, keep: vec![1.0 - b_i * eps2; ranks] });
        }
        Engine::new(lattice, rules)
    }
}

/// Fixed point of the n-board DPP
/// `u_i = eps^2 sum_{j != i} a_ij u_j + (1 - b_i eps^2) L_i[u_i]`, `b_i = sum_{j != i} a_ij`,
/// iterated from the constant `-C` seed and certified against the `+C` seed.
pub fn solve_n_system(lattice: &Lattice, system: &NSystem, opts: SolveOptions) -> Result<NSystemSolution> {
    let engine = system.engine(lattice)?;
    let payoffs = system.payoff_values(lattice);
    let c = (0..lattice.len())
        .filter(|&i| !lattice.is_interior(i))
        .flat_map(|i| payoffs.iter().map(move |p| p[i].abs()))
        .fold(0.0, f64::max);
    let seeded = |c: f64| -> Vec<Vec<f64>> {
        payoffs
            .iter()
            .map(|p| (0..lattice.len()).map(|i| if lattice.is_interior(i) { c } else { p[i] }).collect())
            .collect()
    };
    let eps = lattice.epsilon();
    let (lower, mut report) = iterate(&engine, seeded(-c), opts, eps)?;
    let (upper, upper_report) = iterate(&engine, seeded(c), opts, eps)?;
    let gap = lower.iter().zip(&upper).map(|(a, b)| sup_diff(a, b)).fold(0.0, f64::max);
    report.gap_up_down = Some(gap);
    report.converged &= upper_report.converged;
    report.iterations = report.iterations.max(upper_report.iterations);
    Ok(NSystemSolution { fields: lower, report })
}
