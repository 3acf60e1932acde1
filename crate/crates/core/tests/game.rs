use std::sync::Arc;

use proptest::prelude::*;

use tow_core::game::{
    coupling_diagnostic, exit_time_stats, Game, GameMode, GameState, MoveContext, RngStream, StepEvent, Strategy,
};
use tow_core::solver::{solve_fixed_point, DppParams, Seed, SolveOptions};
use tow_core::{Board, Domain, Field, Lattice, PayoffData};

fn disk() -> Domain {
    Domain::ball(vec![0.0, 0.0], 1.0).unwrap()
}

fn ramp() -> PayoffData {
    PayoffData::new(Field::linear(vec![1.0, 0.0], 0.0), Field::constant(0.0)).with_lipschitz(1.0)
}

fn assert_kernel_support(states: &[GameState], events: &[StepEvent], eps: f64) {
    for (k, e) in events.iter().enumerate() {
        let (a, b) = (&states[k], &states[k + 1]);
        if *e == StepEvent::Jump {
            assert_eq!(a.x, b.x);
            assert_eq!(a.board.other(), b.board);
        } else {
            assert_eq!(a.board, b.board);
            let d: f64 = a.x.iter().zip(&b.x).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            assert!(d <= eps * (1.0 + 1e-9), "step {k}: {d}");
        }
    }
}

#[test]
fn traces_respect_kernel_and_payoff_rules() {
    let (d, payoff) = (disk(), ramp());
    let game = Game::new(&d, &payoff, 0.1, GameMode::Full);
    let s1 = Strategy::pull_to(vec![1.0, 0.0]);
    let s2 = Strategy::StationaryRandom;
    for t in game.traces(&[0.1, 0.2], Board::One, &s1, &s2, 200, 5).unwrap() {
        assert!(!t.capped);
        assert_eq!(t.tau, t.events.len());
        assert_eq!(t.states.len(), t.tau + 1);
        assert_kernel_support(&t.states, &t.events, 0.1);
        assert!(t.states[..t.tau].iter().all(|s| d.contains(&s.x).unwrap()));
        assert!(!d.contains(&t.exit_state.x).unwrap());
        let want = payoff.field(t.exit_state.board).eval(&t.exit_state.x);
        assert_eq!(t.payoff, Some(want));
        // payoffs bounded by sup over the collar
        assert!(want.abs() <= 1.1);
        assert_eq!(t.jump_flags().len(), t.tau);
    }
}

#[test]
fn same_seed_same_trace_and_streams_differ() {
    let (d, payoff) = (disk(), ramp());
    let game = Game::new(&d, &payoff, 0.1, GameMode::Full);
    let s = Strategy::StationaryRandom;
    let a = game.play_episode(&[0.0, 0.0], Board::Two, &s, &s, RngStream::new(9, 4)).unwrap();
    let b = game.play_episode(&[0.0, 0.0], Board::Two, &s, &s, RngStream::new(9, 4)).unwrap();
    let c = game.play_episode(&[0.0, 0.0], Board::Two, &s, &s, RngStream::new(9, 5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let e1 = game.estimate_value(&[0.0, 0.0], Board::One, &s, &s, 500, 1).unwrap();
    let e2 = game.estimate_value(&[0.0, 0.0], Board::One, &s, &s, 500, 1).unwrap();
    assert_eq!(e1, e2);
}

#[test]
fn custom_rule_sees_move_counts() {
    let d = Domain::interval(0.0, 1.0).unwrap();
    let payoff = PayoffData::constant(0.0);
    let game = Game::new(&d, &payoff, 0.2, GameMode::TowOnly);
    let left = Strategy::Custom(Arc::new(|ctx: &MoveContext<'_>, _: &mut dyn rand::RngCore| {
        assert!(ctx.own_moves <= ctx.step);
        vec![ctx.position[0] - ctx.epsilon]
    }));
    let t = game.play_episode(&[0.5], Board::One, &left, &left, RngStream::new(0, 0)).unwrap();
    assert_eq!(t.tau, 3);
    assert!(t.exit_state.x[0] <= 0.0);
}

#[test]
fn value_sandwich_against_pullers() {
    let d = Domain::interval(0.0, 1.0).unwrap();
    let payoff = PayoffData::new(Field::linear(vec![1.0], 0.0), Field::constant(0.0));
    let eps = 0.1;
    let lat = Lattice::build(&d, &payoff, eps / 8.0, eps).unwrap();
    let (sol, _) = solve_fixed_point(&lat, &DppParams::default(), Seed::Lower, SolveOptions::default()).unwrap();
    let game = Game::new(&d, &payoff, eps, GameMode::Full).with_lattice_kernel(&lat);
    let x0 = [0.5];
    let node = lat.node_at_point(&x0).unwrap();
    let max = Strategy::greedy_max(&lat, &sol.u);
    let min = Strategy::greedy_min(&lat, &sol.u);
    let pull_low = Strategy::pull_to(vec![0.0]);
    let pull_high = Strategy::pull_to(vec![1.0]);
    // Player I guarantees at least u against a pull to the bad end
    let e = game.estimate_value(&x0, Board::One, &max, &pull_low, 20_000, 11).unwrap();
    assert!(e.mean >= sol.u[node] - 3.0 * e.std_error, "{} vs {}", e.mean, sol.u[node]);
    // Player II holds Player I to at most u
    let e = game.estimate_value(&x0, Board::One, &pull_high, &min, 20_000, 12).unwrap();
    assert!(e.mean <= sol.u[node] + 3.0 * e.std_error, "{} vs {}", e.mean, sol.u[node]);
}

#[test]
fn random_walk_exits_closer_as_start_approaches_boundary() {
    let d = disk();
    let payoff = PayoffData::constant(0.0);
    let eps = 0.05;
    let game = Game::new(&d, &payoff, eps, GameMode::RandomOnly);
    let y = [1.0, 0.0];
    let s = Strategy::StationaryRandom;
    let mut fractions = Vec::new();
    for r in [0.3, 0.15, 0.05] {
        let x0 = [1.0 - r, 0.0];
        let traces = game.traces(&x0, Board::Two, &s, &s, 3000, 21).unwrap();
        let rep = exit_time_stats(&traces, eps, &x0, &y, 0.3).unwrap();
        assert_eq!(rep.tau_bound, None);
        fractions.push(rep.far_fraction);
    }
    assert!(fractions.windows(2).all(|w| w[1] < w[0]), "{fractions:?}");
}

#[test]
fn exit_stats_reject_full_mode() {
    let (d, payoff) = (disk(), ramp());
    let game = Game::new(&d, &payoff, 0.1, GameMode::Full);
    let s = Strategy::StationaryRandom;
    let traces = game.traces(&[0.9, 0.0], Board::One, &s, &s, 10, 0).unwrap();
    assert!(exit_time_stats(&traces, 0.1, &[0.9, 0.0], &[1.0, 0.0], 0.3).is_err());
}

#[test]
fn coupled_games_keep_their_separation() {
    let (d, payoff) = (disk(), ramp());
    let game = Game::new(&d, &payoff, 0.1, GameMode::Full);
    let s1 = Strategy::pull_to(vec![0.0, 1.0]);
    let s2 = Strategy::StationaryRandom;
    let x0 = [0.2, 0.1];
    let same = coupling_diagnostic(&game, &x0, &x0, Board::One, &s1, &s2, 500, 3).unwrap();
    assert_eq!(same.max_gap, 0.0);
    assert_eq!(same.max_separation_drift, 0.0);
    let mut gaps = Vec::new();
    for sep in [0.01, 0.005, 0.0025] {
        let z0 = [x0[0] + sep, x0[1]];
        let rep = coupling_diagnostic(&game, &x0, &z0, Board::One, &s1, &s2, 2000, 4).unwrap();
        assert!(rep.max_separation_drift < 1e-12);
        assert!(rep.max_gap <= sep * (1.0 + 1e-9));
        gaps.push(rep.mean_gap);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    let far = [x0[0] + 0.2, x0[1]];
    assert!(coupling_diagnostic(&game, &x0, &far, Board::One, &s1, &s2, 10, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_transition_is_in_the_kernel(seed in any::<u64>(), x in -0.6..0.6f64, y in -0.6..0.6f64, board in 1u8..=2) {
        let (d, payoff) = (disk(), ramp());
        let lat = Lattice::build(&d, &payoff, 0.05, 0.2).unwrap();
        let (sol, _) = solve_fixed_point(&lat, &DppParams::default(), Seed::Lower, SolveOptions::with_tol(1e-6)).unwrap();
        let game = Game::new(&d, &payoff, 0.2, GameMode::Full);
        let s1 = Strategy::greedy_max(&lat, &sol.u);
        let s2 = Strategy::pull_to(vec![-1.0, 0.0]);
        let t = game.play_episode(&[x, y], Board::from_number(board).unwrap(), &s1, &s2, RngStream::new(seed, 0)).unwrap();
        assert_kernel_support(&t.states, &t.events, 0.2);
        prop_assert!(!t.capped);
    }
}
