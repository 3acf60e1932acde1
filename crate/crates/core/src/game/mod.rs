//! Monte Carlo simulation of the two-board game.
//!
//! On board 1 the token jumps to board 2 with probability `eps^2`; otherwise a
//! fair coin decides which player's strategy picks the next point in the closed
//! `eps`-ball. On board 2 the token jumps back with probability `eps^2` and
//! otherwise moves to a uniform point of the ball. The game stops as soon as
//! the position leaves the domain and pays `f` or `g` depending on the board.
//!
//! Every step draws its randomness in a fixed order (jump, then coin or uniform
//! move, then whatever the moving strategy consumes), so an episode is a pure
//! function of its [`RngStream`].

mod diagnostics;
mod strategy;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{dist2, eval_payoff, Board, Domain, Lattice, PayoffData};
use crate::error::{Error, Result};

pub use diagnostics::{
    coupling_diagnostic, exit_time_stats, martingale_diagnostic, BinSummary, CouplingReport, DriftBin, ExitTimeReport,
    MartingaleReport,
};
pub use strategy::{pull_move, CustomRule, Greedy, MoveContext, Strategy};

/// Relative slack allowed on `|move - x| <= eps`.
const MOVE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub x: Vec<f64>,
    pub board: Board,
}

impl GameState {
    pub fn new(x: Vec<f64>, board: Board) -> Self {
        Self { x, board }
    }
}

/// Which transitions are enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameMode {
    /// Both boards with `eps^2` jumps.
    Full,
    /// Tug-of-War on board 1 only, no jumps.
    TowOnly,
    /// Random walk on board 2 only, no jumps.
    RandomOnly,
}

impl std::str::FromStr for GameMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(GameMode::Full),
            "tow-only" | "tow_only" => Ok(GameMode::TowOnly),
            "random-only" | "random_only" => Ok(GameMode::RandomOnly),
            _ => Err(Error::InvalidParameter(format!("unknown mode {s:?}"))),
        }
    }
}

/// What happened in one transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepEvent {
    Jump,
    /// Player I won the toss and moved.
    PlayerOne,
    /// Player II won the toss and moved.
    PlayerTwo,
    /// Uniform move on board 2.
    Random,
}

impl StepEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            StepEvent::Jump => "jump",
            StepEvent::PlayerOne => "player_one",
            StepEvent::PlayerTwo => "player_two",
            StepEvent::Random => "random",
        }
    }
}

/// Counter-based random stream: `(master_seed, episode_index)` selects an
/// independent ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub episode_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, episode_index: u64) -> Self {
        Self { master_seed, episode_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.episode_index);
        rng
    }
}

/// Uniform point of the closed ball `B(center, radius)`: Gaussian direction,
/// radius `R U^(1/N)`.
pub fn sample_ball<R: RngCore + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let n = center.len();
    let mut dir: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut len = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    while len == 0.0 {
        dir = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        len = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    }
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / n as f64);
    center.iter().zip(&dir).map(|(c, d)| c + r * d / len).collect()
}

/// Full record of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub mode: GameMode,
    /// `states[0]` is the start, `states[k]` the state after `k` transitions.
    pub states: Vec<GameState>,
    /// `events[k]` produced `states[k + 1]`.
    pub events: Vec<StepEvent>,
    pub exit_state: GameState,
    /// `None` when capped.
    pub payoff: Option<f64>,
    pub tau: usize,
    pub capped: bool,
}

impl EpisodeTrace {
    /// Coin toss results on board-1 steps that were not jumps (`true`: Player I).
    pub fn coin_outcomes(&self) -> Vec<bool> {
        self.events
            .iter()
            .filter_map(|e| match e {
                StepEvent::PlayerOne => Some(true),
                StepEvent::PlayerTwo => Some(false),
                _ => None,
            })
            .collect()
    }

    pub fn jump_flags(&self) -> Vec<bool> {
        self.events.iter().map(|e| *e == StepEvent::Jump).collect()
    }
}

/// Summary of one episode without the path.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub exit_state: GameState,
    pub payoff: Option<f64>,
    pub tau: usize,
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub capped_count: usize,
    /// Mean number of transitions over finished episodes.
    pub mean_tau: f64,
    pub episodes: usize,
}

/// How the board-2 random move is drawn.
#[derive(Debug, Clone, Copy)]
pub enum Kernel<'a> {
    /// Uniform point of the continuous ball.
    Continuum,
    /// Uniform stencil offset of the nearest lattice node. From a node this is
    /// the transition whose value the lattice DPP computes.
    Lattice(&'a Lattice),
}

/// Game rules: domain, payoffs, step size, enabled transitions and step cap.
#[derive(Debug, Clone)]
pub struct Game<'a> {
    pub domain: &'a Domain,
    pub payoff: &'a PayoffData,
    pub epsilon: f64,
    pub mode: GameMode,
    pub cap: usize,
    pub kernel: Kernel<'a>,
}

impl<'a> Game<'a> {
    /// Rules with the default cap `ceil(100 / eps^2) * diam^2`.
    pub fn new(domain: &'a Domain, payoff: &'a PayoffData, epsilon: f64, mode: GameMode) -> Self {
        Self { domain, payoff, epsilon, mode, cap: default_cap(epsilon, domain.diameter()), kernel: Kernel::Continuum }
    }

    /// Board-2 moves pick a uniform stencil node of `lattice`.
    pub fn with_lattice_kernel(mut self, lattice: &'a Lattice) -> Self {
        self.kernel = Kernel::Lattice(lattice);
        self
    }

    fn random_move(&self, x: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        match self.kernel {
            Kernel::Continuum => sample_ball(rng, x, self.epsilon),
            Kernel::Lattice(lat) => {
                let near = lat.nearest_node(x).and_then(|n| Some((n, lat.stencil(n)?)));
                match near {
                    Some((n, st)) => {
                        let k = rng.random_range(0..st.len());
                        let base = lat.node(n);
                        let y = lat.node(st[k] as usize);
                        if dist2(x, base) <= (1e-9 * lat.h()).powi(2) {
                            // on a node: land exactly on the stencil node so exits match the lattice
                            return y.to_vec();
                        }
                        // same offset applied to x, so off-lattice positions stay within eps
                        y.iter().zip(base).zip(x).map(|((y, b), xi)| xi + (y - b)).collect()
                    }
                    None => sample_ball(rng, x, self.epsilon),
                }
            }
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    fn check_start(&self, x0: &[f64], board: Board) -> Result<()> {
        if !self.domain.contains(x0)? {
            return Err(Error::StartOutside(x0.to_vec()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {}", self.epsilon)));
        }
        match (self.mode, board) {
            (GameMode::TowOnly, Board::Two) | (GameMode::RandomOnly, Board::One) => {
                Err(Error::InvalidParameter(format!("{:?} mode cannot start on board {}", self.mode, board.number())))
            }
            _ => Ok(()),
        }
    }

    /// One transition from a live state. `moves` counts how often each player
    /// has moved so far and is updated in place.
    pub fn step(
        &self,
        state: &GameState,
        step_index: usize,
        moves: &mut [usize; 2],
        s1: &Strategy<'_>,
        s2: &Strategy<'_>,
        rng: &mut dyn RngCore,
    ) -> Result<(GameState, StepEvent)> {
        let eps = self.epsilon;
        if self.mode == GameMode::Full {
            let jump: f64 = rng.random();
            if jump < eps * eps {
                return Ok((GameState::new(state.x.clone(), state.board.other()), StepEvent::Jump));
            }
        }
        let (x, event) = match state.board {
            Board::One => {
                let coin: f64 = rng.random();
                let (who, strategy, event) =
                    if coin < 0.5 { (0, s1, StepEvent::PlayerOne) } else { (1, s2, StepEvent::PlayerTwo) };
                let ctx = MoveContext { position: &state.x, step: step_index, own_moves: moves[who], epsilon: eps };
                let next = strategy.choose(&ctx, rng);
                moves[who] += 1;
                (next, event)
            }
            Board::Two => (self.random_move(&state.x, rng), StepEvent::Random),
        };
        if x.len() != state.x.len() {
            return Err(Error::DimensionMismatch { expected: state.x.len(), got: x.len() });
        }
        let d = dist2(&x, &state.x).sqrt();
        if !(d <= eps * (1.0 + MOVE_SLACK)) {
            return Err(Error::StrategyOutOfBall { distance: d, epsilon: eps });
        }
        Ok((GameState::new(x, state.board), event))
    }

    fn run(
        &self,
        start: GameState,
        s1: &Strategy<'_>,
        s2: &Strategy<'_>,
        stream: RngStream,
        mut record: Option<(&mut Vec<GameState>, &mut Vec<StepEvent>)>,
    ) -> Result<EpisodeOutcome> {
        self.check_start(&start.x, start.board)?;
        let mut rng = stream.rng();
        let mut moves = [0usize; 2];
        let mut state = start;
        let mut tau = 0;
        while tau < self.cap {
            let (next, event) = self.step(&state, tau, &mut moves, s1, s2, &mut rng)?;
            tau += 1;
            if let Some((states, events)) = record.as_mut() {
                states.push(next.clone());
                events.push(event);
            }
            state = next;
            if !self.domain.contains_unchecked(&state.x) {
                let payoff = eval_payoff(self.domain, self.payoff, &state.x, state.board)?;
                return Ok(EpisodeOutcome { exit_state: state, payoff: Some(payoff), tau, capped: false });
            }
        }
        Ok(EpisodeOutcome { exit_state: state, payoff: None, tau, capped: true })
    }

    /// Plays one episode and records every state.
    pub fn play_episode(
        &self,
        x0: &[f64],
        board: Board,
        s1: &Strategy<'_>,
        s2: &Strategy<'_>,
        stream: RngStream,
    ) -> Result<EpisodeTrace> {
        let start = GameState::new(x0.to_vec(), board);
        let mut states = vec![start.clone()];
        let mut events = Vec::new();
        let out = self.run(start, s1, s2, stream, Some((&mut states, &mut events)))?;
        Ok(EpisodeTrace {
            mode: self.mode,
            states,
            events,
            exit_state: out.exit_state,
            payoff: out.payoff,
            tau: out.tau,
            capped: out.capped,
        })
    }

    /// Plays one episode keeping only its outcome.
    pub fn play_outcome(
        &self,
        x0: &[f64],
        board: Board,
        s1: &Strategy<'_>,
        s2: &Strategy<'_>,
        stream: RngStream,
    ) -> Result<EpisodeOutcome> {
        self.run(GameState::new(x0.to_vec(), board), s1, s2, stream, None)
    }

    /// Episodes `0..n` of `seed`, in episode order.
    pub fn outcomes(
        &self,
        x0: &[f64],
        board: Board,
        s1: &Strategy<'_>,
        s2: &Strategy<'_>,
        n: usize,
        seed: u64,
    ) -> Result<Vec<EpisodeOutcome>> {
        (0..n as u64).into_par_iter().map(|i| self.play_outcome(x0, board, s1, s2, RngStream::new(seed, i))).collect()
    }

    /// Episodes `0..n` of `seed` with full traces.
    pub fn traces(
        &self,
        x0: &[f64],
        board: Board,
        s1: &Strategy<'_>,
        s2: &Strategy<'_>,
        n: usize,
        seed: u64,
    ) -> Result<Vec<EpisodeTrace>> {
        (0..n as u64).into_par_iter().map(|i| self.play_episode(x0, board, s1, s2, RngStream::new(seed, i))).collect()
    }

    /// Sample mean and standard error of the payoff over `n` episodes.
    /// Capped episodes are excluded and counted.
    pub fn estimate_value(
        &self,
        x0: &[f64],
        board: Board,
        s1: &Strategy<'_>,
        s2: &Strategy<'_>,
        n: usize,
        seed: u64,
    ) -> Result<Estimate> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 episodes, got {n}")));
        }
        let outcomes = self.outcomes(x0, board, s1, s2, n, seed)?;
        summarize(&outcomes)
    }
}

/// `ceil(100 / eps^2) * diam^2`, at least `ceil(100 / eps^2)`.
pub fn default_cap(epsilon: f64, diameter: f64) -> usize {
    let base = (100.0 / (epsilon * epsilon)).ceil();
    (base * diameter.powi(2).max(1.0)).ceil() as usize
}

/// Welford mean / standard error over finished episodes, in episode order.
pub fn summarize(outcomes: &[EpisodeOutcome]) -> Result<Estimate> {
    let mut stats = Running::default();
    let mut tau = Running::default();
    let mut capped = 0;
    for o in outcomes {
        match o.payoff {
            Some(p) => {
                stats.push(p);
                tau.push(o.tau as f64);
            }
            None => capped += 1,
        }
    }
    if stats.n == 0 {
        return Err(Error::AllCapped(outcomes.len()));
    }
    Ok(Estimate {
        mean: stats.mean,
        std_error: stats.std_error(),
        capped_count: capped,
        mean_tau: tau.mean,
        episodes: outcomes.len(),
    })
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Running {
    pub n: usize,
    pub mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}
