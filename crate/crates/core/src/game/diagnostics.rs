//! Empirical checks of the exit estimates for the single-board games and of
//! the coupling used for interior equicontinuity.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{dist2, Board};
use crate::error::{Error, Result};

use super::{EpisodeTrace, Game, GameMode, MoveContext, RngStream, Running, Strategy};

/// Bins with fewer samples are not used for the pass/fail statistics.
const MIN_BIN_COUNT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftBin {
    /// Range of `|x_k - target|` covered by the bin.
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_drift: f64,
    pub drift_se: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
}

/// Extremes over a set of bins and the two checks built on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub bins_used: usize,
    /// Largest binned mean of `N_{k+1} - N_k`, and that bin's standard error.
    pub max_drift: f64,
    pub max_drift_se: f64,
    /// Smallest binned mean of `(N_{k+1} - N_k)^2`, and its standard error.
    pub min_second_moment: f64,
    pub min_second_moment_se: f64,
    /// `max_drift <= 3 se`
    pub supermartingale_ok: bool,
    /// `min_second_moment >= eps^2 / 3 - 3 se`
    pub second_moment_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub bins: Vec<DriftBin>,
    pub steps: usize,
    /// `eps^2 / 3`
    pub second_moment_floor: f64,
    /// Every bin with enough samples.
    pub all: BinSummary,
    /// Bins with `|x_k - target| >= eps` only. Closer in, the pull overshoots
    /// the target and `|x_k - target|` can grow, so the increment identity
    /// behind the supermartingale property does not hold there.
    pub beyond_eps: Option<BinSummary>,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.all.supermartingale_ok && self.all.second_moment_ok
    }
}

fn summarize_bins(bins: &[&DriftBin], floor: f64) -> Option<BinSummary> {
    let worst = bins.iter().max_by(|a, b| a.mean_drift.total_cmp(&b.mean_drift))?;
    let weakest = bins.iter().min_by(|a, b| a.second_moment.total_cmp(&b.second_moment))?;
    Some(BinSummary {
        bins_used: bins.len(),
        max_drift: worst.mean_drift,
        max_drift_se: worst.drift_se,
        min_second_moment: weakest.second_moment,
        min_second_moment_se: weakest.second_moment_se,
        supermartingale_ok: worst.mean_drift <= 3.0 * worst.drift_se,
        second_moment_ok: weakest.second_moment >= floor - 3.0 * weakest.second_moment_se,
    })
}

/// Binned conditional increments of `N_k = |x_k - target| + eps^3 / 2^k`
/// along Tug-of-War traces played against a puller.
pub fn martingale_diagnostic(traces: &[EpisodeTrace], epsilon: f64, target: &[f64]) -> Result<MartingaleReport> {
    if let Some(t) = traces.iter().find(|t| t.mode != GameMode::TowOnly) {
        return Err(Error::WrongMode { expected: "tow-only", reason: format!("found {:?} trace", t.mode) });
    }
    let width = epsilon / 2.0;
    let mut bins: Vec<(Running, Running)> = Vec::new();
    let mut steps = 0;
    for t in traces {
        let n_of = |k: usize| dist2(&t.states[k].x, target).sqrt() + epsilon.powi(3) * 0.5f64.powi(k as i32);
        for k in 0..t.states.len().saturating_sub(1) {
            let r = dist2(&t.states[k].x, target).sqrt();
            let b = (r / width) as usize;
            if bins.len() <= b {
                bins.resize(b + 1, Default::default());
            }
            let d = n_of(k + 1) - n_of(k);
            bins[b].0.push(d);
            bins[b].1.push(d * d);
            steps += 1;
        }
    }
    let bins: Vec<DriftBin> = bins
        .iter()
        .enumerate()
        .filter(|(_, (d, _))| d.n > 0)
        .map(|(i, (d, s))| DriftBin {
            lo: i as f64 * width,
            hi: (i + 1) as f64 * width,
            count: d.n,
            mean_drift: d.mean,
            drift_se: d.std_error(),
            second_moment: s.mean,
            second_moment_se: s.std_error(),
        })
        .collect();
    let floor = epsilon * epsilon / 3.0;
    let used: Vec<&DriftBin> = bins.iter().filter(|b| b.count >= MIN_BIN_COUNT).collect();
    let far: Vec<&DriftBin> = used.iter().copied().filter(|b| b.lo >= epsilon * (1.0 - 1e-12)).collect();
    let all =
        summarize_bins(&used, floor).ok_or_else(|| Error::InvalidParameter("too few transitions to bin".into()))?;
    Ok(MartingaleReport { steps, second_moment_floor: floor, all, beyond_eps: summarize_bins(&far, floor), bins })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeReport {
    pub mode: GameMode,
    pub episodes: usize,
    pub capped: usize,
    /// `|x0 - y|`
    pub start_distance: f64,
    pub mean_tau: f64,
    pub tau_se: f64,
    pub mean_sq_exit_distance: f64,
    pub sq_exit_se: f64,
    /// Fraction of exits with `|x_tau - y| >= far_radius`.
    pub far_radius: f64,
    pub far_fraction: f64,
    pub far_fraction_se: f64,
    /// `4 |x0 - y|^2 / eps^2` and `2 |x0 - y|^2`, Tug-of-War only.
    pub tau_bound: Option<f64>,
    pub sq_exit_bound: Option<f64>,
    pub tau_ok: Option<bool>,
    pub sq_exit_ok: Option<bool>,
}

/// Exit time and exit position statistics for single-board traces started
/// at `x0` near the boundary point `boundary_target`.
pub fn exit_time_stats(
    traces: &[EpisodeTrace],
    epsilon: f64,
    x0: &[f64],
    boundary_target: &[f64],
    far_radius: f64,
) -> Result<ExitTimeReport> {
    let mode = traces.first().map(|t| t.mode).ok_or_else(|| Error::InvalidParameter("no traces".into()))?;
    if mode == GameMode::Full || traces.iter().any(|t| t.mode != mode) {
        return Err(Error::WrongMode {
            expected: "single-board (tow-only or random-only)",
            reason: "mixed or full-mode traces".into(),
        });
    }
    let mut tau = Running::default();
    let mut sq = Running::default();
    let mut far = Running::default();
    let mut capped = 0;
    for t in traces {
        if t.capped {
            capped += 1;
            continue;
        }
        let d2 = dist2(&t.exit_state.x, boundary_target);
        tau.push(t.tau as f64);
        sq.push(d2);
        far.push(if d2.sqrt() >= far_radius { 1.0 } else { 0.0 });
    }
    if tau.n == 0 {
        return Err(Error::AllCapped(traces.len()));
    }
    let r0 = dist2(x0, boundary_target).sqrt();
    let (tau_bound, sq_bound) = match mode {
        GameMode::TowOnly => (Some(4.0 * r0 * r0 / (epsilon * epsilon)), Some(2.0 * r0 * r0)),
        _ => (None, None),
    };
    Ok(ExitTimeReport {
        mode,
        episodes: traces.len(),
        capped,
        start_distance: r0,
        mean_tau: tau.mean,
        tau_se: tau.std_error(),
        mean_sq_exit_distance: sq.mean,
        sq_exit_se: sq.std_error(),
        far_radius,
        far_fraction: far.mean,
        far_fraction_se: far.std_error(),
        tau_bound,
        sq_exit_bound: sq_bound,
        tau_ok: tau_bound.map(|b| tau.mean <= b + 3.0 * tau.std_error()),
        sq_exit_ok: sq_bound.map(|b| sq.mean <= b + 3.0 * sq.std_error()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub separation: f64,
    pub pairs: usize,
    pub capped: usize,
    pub mean_gap: f64,
    pub gap_se: f64,
    pub max_gap: f64,
    /// Largest `| |x_k - z_k| - |x0 - z0| |` seen along any pair.
    pub max_separation_drift: f64,
}

/// Plays `n` pairs of games from `x0` and `z0` that share every random draw
/// and every displacement (the strategies act on the `x` token) until either
/// token leaves the domain; reports `|h(x_tau) - h(z_tau)|` with `h` the
/// payoff of the current board.
#[allow(clippy::too_many_arguments)]
pub fn coupling_diagnostic(
    game: &Game<'_>,
    x0: &[f64],
    z0: &[f64],
    board: Board,
    s1: &Strategy<'_>,
    s2: &Strategy<'_>,
    n: usize,
    seed: u64,
) -> Result<CouplingReport> {
    let separation = dist2(x0, z0).sqrt();
    if x0.len() != z0.len() {
        return Err(Error::DimensionMismatch { expected: x0.len(), got: z0.len() });
    }
    if !(separation < game.epsilon) {
        return Err(Error::InvalidParameter(format!(
            "coupled starts are {separation} apart, need less than eps = {}",
            game.epsilon
        )));
    }
    for p in [x0, z0] {
        if !game.domain.contains(p)? {
            return Err(Error::StartOutside(p.to_vec()));
        }
    }
    let results: Vec<Option<(f64, f64)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| coupled_pair(game, x0, z0, board, s1, s2, RngStream::new(seed, i)))
        .collect::<Result<_>>()?;
    let mut gap = Running::default();
    let mut max_gap: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let mut capped = 0;
    for r in results {
        match r {
            Some((g, d)) => {
                gap.push(g);
                max_gap = max_gap.max(g);
                drift = drift.max(d);
            }
            None => capped += 1,
        }
    }
    Ok(CouplingReport {
        separation,
        pairs: n,
        capped,
        mean_gap: gap.mean,
        gap_se: gap.std_error(),
        max_gap,
        max_separation_drift: drift,
    })
}

fn coupled_pair(
    game: &Game<'_>,
    x0: &[f64],
    z0: &[f64],
    board: Board,
    s1: &Strategy<'_>,
    s2: &Strategy<'_>,
    stream: RngStream,
) -> Result<Option<(f64, f64)>> {
    let eps = game.epsilon;
    let sep0 = dist2(x0, z0).sqrt();
    let mut rng = stream.rng();
    let mut x = x0.to_vec();
    let mut z = z0.to_vec();
    let mut board = board;
    let mut moves = [0usize; 2];
    let mut drift: f64 = 0.0;
    for step in 0..game.cap {
        if game.mode == GameMode::Full {
            let jump: f64 = rng.random();
            if jump < eps * eps {
                board = board.other();
                continue;
            }
        }
        let next = match board {
            Board::One => {
                let coin: f64 = rng.random();
                let (who, s) = if coin < 0.5 { (0, s1) } else { (1, s2) };
                let ctx = MoveContext { position: &x, step, own_moves: moves[who], epsilon: eps };
                moves[who] += 1;
                s.choose(&ctx, &mut rng)
            }
            Board::Two => game.random_move(&x, &mut rng),
        };
        let dx: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        for k in 0..x.len() {
            x[k] += dx[k];
            z[k] += dx[k];
        }
        drift = drift.max((dist2(&x, &z).sqrt() - sep0).abs());
        if !game.domain.contains_unchecked(&x) || !game.domain.contains_unchecked(&z) {
            let h = game.payoff.field(board);
            return Ok(Some(((h.eval(&x) - h.eval(&z)).abs(), drift)));
        }
    }
    Ok(None)
}
