use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Board, Domain, Lattice, PayoffData};
use crate::error::{Error, Result};
use crate::solver::{solve_fixed_point, DppParams, Seed, SolveOptions, ValuePair};

use super::{kappa, solve_reference_1d_with, stencil_kappa, Diffusion, ReferenceSolution1D};

/// Cells of the 1D reference mesh.
const REFERENCE_MESH: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    /// 1D: distance to the reference solution of the limit system.
    Quantitative,
    /// Any domain: distance to the next finer `eps` on common nodes.
    Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub h: f64,
    pub interior_nodes: usize,
    pub iterations: usize,
    pub converged: bool,
    pub stencil_kappa: f64,
    /// Sup distances over interior nodes. In trend mode they compare with the
    /// next row and are absent on the last one.
    pub dist_u: Option<f64>,
    pub dist_v: Option<f64>,
    pub dist: Option<f64>,
    /// Quantitative mode: sup distance to the reference built with the
    /// stencil's own `κ` instead of `1/(N+2)`.
    pub dist_stencil_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub mode: ConvergenceMode,
    pub h_ratio: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Whether the defined `dist` values strictly decrease down the table.
    pub fn strictly_decreasing(&self) -> bool {
        let d: Vec<f64> = self.rows.iter().filter_map(|r| r.dist).collect();
        d.len() >= 2 && d.windows(2).all(|w| w[1] < w[0])
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "epsilon,h,interior_nodes,iterations,converged,stencil_kappa,dist_u,dist_v,dist,dist_stencil_ref"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.epsilon,
                r.h,
                r.interior_nodes,
                r.iterations,
                r.converged,
                r.stencil_kappa,
                opt(r.dist_u),
                opt(r.dist_v),
                opt(r.dist),
                opt(r.dist_stencil_ref)
            )?;
        }
        Ok(())
    }
}

struct Level {
    lattice: Lattice,
    values: ValuePair,
    iterations: usize,
    converged: bool,
    stencil_kappa: f64,
}

/// Solves the DPP for each `eps` (coarse to fine after sorting) with
/// `h = eps / h_ratio` and tabulates the distances. Intervals use the
/// quantitative mode, other domains the trend mode.
pub fn convergence_study(
    domain: &Domain,
    payoff: &PayoffData,
    params: &DppParams,
    eps_list: &[f64],
    h_ratio: f64,
    opts: SolveOptions,
) -> Result<ConvergenceTable> {
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter("empty eps list".into()));
    }
    if !(h_ratio >= 4.0) {
        return Err(Error::InvalidParameter(format!("h_ratio {h_ratio} must be at least 4")));
    }
    let mut eps: Vec<f64> = eps_list.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let levels: Vec<Level> = eps
        .par_iter()
        .map(|&e| -> Result<Level> {
            let lattice = Lattice::build(domain, payoff, e / h_ratio, e)?;
            let (values, report) = solve_fixed_point(&lattice, params, Seed::Lower, opts)?;
            let centre = lattice.interior_nodes()[lattice.interior_nodes().len() / 2];
            let stencil_kappa = stencil_kappa(&lattice, centre)?;
            Ok(Level { lattice, values, iterations: report.iterations, converged: report.converged, stencil_kappa })
        })
        .collect::<Result<_>>()?;

    let mode = match domain {
        Domain::Interval { .. } => ConvergenceMode::Quantitative,
        _ => ConvergenceMode::Trend,
    };
    let mut rows: Vec<ConvergenceRow> = levels
        .iter()
        .map(|l| ConvergenceRow {
            epsilon: l.lattice.epsilon(),
            h: l.lattice.h(),
            interior_nodes: l.lattice.interior_nodes().len(),
            iterations: l.iterations,
            converged: l.converged,
            stencil_kappa: l.stencil_kappa,
            dist_u: None,
            dist_v: None,
            dist: None,
            dist_stencil_ref: None,
        })
        .collect();

    match mode {
        ConvergenceMode::Quantitative => {
            let Domain::Interval { a, b } = *domain else { unreachable!() };
            let ends = |board: Board| (payoff.field(board).eval(&[a]), payoff.field(board).eval(&[b]));
            let (f, g) = (ends(Board::One), ends(Board::Two));
            let k = kappa(1)?;
            let reference = solve_reference_1d_with((a, b), f, g, REFERENCE_MESH, limit_diffusion(params, k)?)?;
            for (row, level) in rows.iter_mut().zip(&levels) {
                let (du, dv) = distance_to_reference(level, &reference);
                row.dist_u = Some(du);
                row.dist_v = Some(dv);
                row.dist = Some(du.max(dv));
                let own = solve_reference_1d_with(
                    (a, b),
                    f,
                    g,
                    REFERENCE_MESH,
                    limit_diffusion(params, level.stencil_kappa)?,
                )?;
                let (su, sv) = distance_to_reference(level, &own);
                row.dist_stencil_ref = Some(su.max(sv));
            }
        }
        ConvergenceMode::Trend => {
            for i in 0..levels.len().saturating_sub(1) {
                let (du, dv) = distance_between(&levels[i], &levels[i + 1])?;
                rows[i].dist_u = Some(du);
                rows[i].dist_v = Some(dv);
                rows[i].dist = Some(du.max(dv));
            }
        }
    }
    Ok(ConvergenceTable { mode, h_ratio, rows })
}

/// 1D limit coefficients for constant jump weights and mixing shares: the
/// board with share `α` of Tug-of-War gets `(α/2 + (1-α) κ/2) / weight`.
pub fn limit_diffusion(params: &DppParams, kappa_mean: f64) -> Result<Diffusion> {
    let a = params
        .jump_coeff_1
        .as_constant()
        .ok_or_else(|| Error::InvalidParameter("1D reference needs a constant jump weight a".into()))?;
    let b = params
        .jump_coeff_2
        .as_constant()
        .ok_or_else(|| Error::InvalidParameter("1D reference needs a constant jump weight b".into()))?;
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter("1D reference needs positive jump weights".into()));
    }
    let c = |alpha: f64| 0.5 * alpha + 0.5 * (1.0 - alpha) * kappa_mean;
    Ok(Diffusion { c_u: c(params.mix_alpha_1) / a, c_v: c(params.mix_alpha_2) / b })
}

fn distance_to_reference(level: &Level, reference: &ReferenceSolution1D) -> (f64, f64) {
    let mut du: f64 = 0.0;
    let mut dv: f64 = 0.0;
    for &i in level.lattice.interior_nodes() {
        let (ru, rv) = reference.interpolate(level.lattice.node(i)[0]);
        du = du.max((level.values.u[i] - ru).abs());
        dv = dv.max((level.values.v[i] - rv).abs());
    }
    (du, dv)
}

fn distance_between(coarse: &Level, fine: &Level) -> Result<(f64, f64)> {
    let mut du: f64 = 0.0;
    let mut dv: f64 = 0.0;
    let mut common = 0;
    for &i in coarse.lattice.interior_nodes() {
        if let Some(j) = fine.lattice.node_at_point(coarse.lattice.node(i)) {
            du = du.max((coarse.values.u[i] - fine.values.u[j]).abs());
            dv = dv.max((coarse.values.v[i] - fine.values.v[j]).abs());
            common += 1;
        }
    }
    if common == 0 {
        return Err(Error::InvalidParameter("successive lattices share no interior nodes".into()));
    }
    Ok((du, dv))
}
