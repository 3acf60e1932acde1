use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use crate::domain::{dist2, Lattice};

use super::sample_ball;

/// What a strategy sees when it wins the coin toss on board 1.
#[derive(Debug, Clone, Copy)]
pub struct MoveContext<'s> {
    pub position: &'s [f64],
    /// Transitions played so far in the episode (jumps included).
    pub step: usize,
    /// Moves this player has already made in the episode.
    pub own_moves: usize,
    pub epsilon: f64,
}

pub type CustomRule = dyn Fn(&MoveContext<'_>, &mut dyn RngCore) -> Vec<f64> + Send + Sync;

/// Lattice values consulted by the greedy strategies.
#[derive(Debug, Clone, Copy)]
pub struct Greedy<'a> {
    pub lattice: &'a Lattice,
    /// Board-1 values indexed by node id.
    pub values: &'a [f64],
}

impl Greedy<'_> {
    /// Stored node within `eps` of `x` with the largest (or smallest) value;
    /// ties go to the lowest node index.
    fn pick(&self, x: &[f64], epsilon: f64, maximize: bool) -> Vec<f64> {
        let mut best: Option<(f64, usize)> = None;
        self.lattice.for_each_within(x, epsilon, |n, _| {
            let v = if maximize { self.values[n] } else { -self.values[n] };
            let better = match best {
                None => true,
                Some((bv, bn)) => v > bv || (v == bv && n < bn),
            };
            if better {
                best = Some((v, n));
            }
        });
        match best {
            Some((_, n)) => self.lattice.node(n).to_vec(),
            None => x.to_vec(),
        }
    }
}

/// Rule giving the next position when its owner wins the toss.
#[derive(Clone)]
pub enum Strategy<'a> {
    /// Step towards `target` by `eps - eps^3 / 2^k`, `k` the step index.
    PullTo(Vec<f64>),
    GreedyMax(Greedy<'a>),
    GreedyMin(Greedy<'a>),
    /// Uniform point of the ball, independent of history.
    StationaryRandom,
    Custom(Arc<CustomRule>),
}

impl fmt::Debug for Strategy<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::PullTo(t) => f.debug_tuple("PullTo").field(t).finish(),
            Strategy::GreedyMax(_) => f.write_str("GreedyMax"),
            Strategy::GreedyMin(_) => f.write_str("GreedyMin"),
            Strategy::StationaryRandom => f.write_str("StationaryRandom"),
            Strategy::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl<'a> Strategy<'a> {
    pub fn pull_to(target: Vec<f64>) -> Self {
        Strategy::PullTo(target)
    }

    pub fn greedy_max(lattice: &'a Lattice, values: &'a [f64]) -> Self {
        Strategy::GreedyMax(Greedy { lattice, values })
    }

    pub fn greedy_min(lattice: &'a Lattice, values: &'a [f64]) -> Self {
        Strategy::GreedyMin(Greedy { lattice, values })
    }

    pub fn choose(&self, ctx: &MoveContext<'_>, rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            Strategy::PullTo(target) => pull_move(ctx.position, target, ctx.epsilon, ctx.step),
            Strategy::GreedyMax(g) => g.pick(ctx.position, ctx.epsilon, true),
            Strategy::GreedyMin(g) => g.pick(ctx.position, ctx.epsilon, false),
            Strategy::StationaryRandom => sample_ball(rng, ctx.position, ctx.epsilon),
            Strategy::Custom(rule) => rule(ctx, rng),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::PullTo(_) => "pull_to",
            Strategy::GreedyMax(_) => "greedy_max",
            Strategy::GreedyMin(_) => "greedy_min",
            Strategy::StationaryRandom => "stationary_random",
            Strategy::Custom(_) => "custom",
        }
    }
}

/// `x + (eps^3 / 2^k - eps) (x - target) / |x - target|`; stays put on the target.
pub fn pull_move(x: &[f64], target: &[f64], epsilon: f64, k: usize) -> Vec<f64> {
    let r = dist2(x, target).sqrt();
    if r == 0.0 {
        return x.to_vec();
    }
    let step = epsilon.powi(3) * 0.5f64.powi(k.min(i32::MAX as usize) as i32) - epsilon;
    x.iter().zip(target).map(|(xi, ti)| xi + step * (xi - ti) / r).collect()
}
