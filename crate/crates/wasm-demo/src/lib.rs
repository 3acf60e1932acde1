//! wasm-bindgen front end for the static page in `www/`.
//!
//! Every export returns a JSON string. Failures come back as
//! `{"error": "..."}` so the same functions run natively in tests.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use tow_core::game::{Game, GameMode, RngStream, Strategy};
use tow_core::solver::{solve_fixed_point, DppParams, Seed, SolveOptions};
use tow_core::{Board, Domain, Field, Lattice, PayoffData};

/// Interval problem on `[0, 1]`: `f(x) = slope * x` on board 1, `g = level`
/// on board 2, both jump weights equal to `jump`.
#[derive(Debug, Clone, Copy)]
struct IntervalProblem {
    epsilon: f64,
    slope: f64,
    level: f64,
    alpha_1: f64,
    alpha_2: f64,
    jump: f64,
}

impl IntervalProblem {
    fn build(&self) -> Result<(Domain, PayoffData, DppParams), String> {
        let domain = Domain::interval(0.0, 1.0).map_err(|e| e.to_string())?;
        let payoff = PayoffData::new(Field::linear(vec![self.slope], 0.0), Field::constant(self.level));
        let params = DppParams {
            jump_coeff_1: Field::constant(self.jump),
            jump_coeff_2: Field::constant(self.jump),
            mix_alpha_1: self.alpha_1,
            mix_alpha_2: self.alpha_2,
        };
        Ok((domain, payoff, params))
    }
}

/// Lattice values sorted by `x`, collar included.
#[derive(Serialize)]
struct Profile {
    x: Vec<f64>,
    interior: Vec<bool>,
    u: Vec<f64>,
    v: Vec<f64>,
    iterations: usize,
    residual: f64,
}

fn respond<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string()),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn solve_profile(p: IntervalProblem) -> Result<Profile, String> {
    let (domain, payoff, params) = p.build()?;
    let lat = Lattice::build(&domain, &payoff, p.epsilon / 8.0, p.epsilon).map_err(|e| e.to_string())?;
    let (sol, rep) =
        solve_fixed_point(&lat, &params, Seed::Lower, SolveOptions::with_tol(1e-10)).map_err(|e| e.to_string())?;
    let mut order: Vec<usize> = (0..lat.len()).collect();
    order.sort_by(|&i, &j| lat.node(i)[0].total_cmp(&lat.node(j)[0]));
    Ok(Profile {
        x: order.iter().map(|&i| lat.node(i)[0]).collect(),
        interior: order.iter().map(|&i| lat.is_interior(i)).collect(),
        u: order.iter().map(|&i| sol.u[i]).collect(),
        v: order.iter().map(|&i| sol.v[i]).collect(),
        iterations: rep.iterations,
        residual: rep.final_residual,
    })
}

/// Solves the DPP on `[0, 1]` and returns the value profiles `u`, `v`.
#[wasm_bindgen]
pub fn solve_interval(epsilon: f64, slope: f64, level: f64, alpha_1: f64, alpha_2: f64, jump: f64) -> String {
    respond(solve_profile(IntervalProblem { epsilon, slope, level, alpha_1, alpha_2, jump }))
}

/// One traced episode on the unit disk with payoffs `f = x1`, `g = 0`.
/// Player I pulls toward `(tx, ty)`, Player II toward the opposite point.
#[wasm_bindgen]
pub fn play_disk(x: f64, y: f64, board: u8, epsilon: f64, tx: f64, ty: f64, seed: u32) -> String {
    respond((|| {
        let board = Board::from_number(board).ok_or("board must be 1 or 2")?;
        let domain = Domain::ball(vec![0.0, 0.0], 1.0).map_err(|e| e.to_string())?;
        let payoff = PayoffData::new(Field::linear(vec![1.0, 0.0], 0.0), Field::constant(0.0));
        let game = Game::new(&domain, &payoff, epsilon, GameMode::Full);
        let s1 = Strategy::pull_to(vec![tx, ty]);
        let s2 = Strategy::pull_to(vec![-tx, -ty]);
        game.play_episode(&[x, y], board, &s1, &s2, RngStream::new(u64::from(seed), 0)).map_err(|e| e.to_string())
    })())
}

/// Greedy players in the base game on `[0, 1]` (unit jump weights, pure
/// Tug-of-War on board 1, pure random walk on board 2): Monte Carlo mean
/// against the DPP value at `x0` on board 1.
#[wasm_bindgen]
pub fn estimate_interval(x0: f64, epsilon: f64, slope: f64, level: f64, episodes: usize, seed: u32) -> String {
    respond((|| {
        let p = IntervalProblem { epsilon, slope, level, alpha_1: 1.0, alpha_2: 0.0, jump: 1.0 };
        let (domain, payoff, params) = p.build()?;
        let lat = Lattice::build(&domain, &payoff, epsilon / 8.0, epsilon).map_err(|e| e.to_string())?;
        let node = lat
            .node_at_point(&[x0])
            .filter(|&i| lat.is_interior(i))
            .ok_or("x0 must be a lattice node inside (0, 1)")?;
        let (sol, _) =
            solve_fixed_point(&lat, &params, Seed::Lower, SolveOptions::with_tol(1e-10)).map_err(|e| e.to_string())?;
        let game = Game::new(&domain, &payoff, epsilon, GameMode::Full).with_lattice_kernel(&lat);
        let s1 = Strategy::greedy_max(&lat, &sol.u);
        let s2 = Strategy::greedy_min(&lat, &sol.u);
        let est =
            game.estimate_value(&[x0], Board::One, &s1, &s2, episodes, u64::from(seed)).map_err(|e| e.to_string())?;
        Ok(json!({ "x0": lat.node(node)[0], "dpp": sol.u[node], "estimate": est }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn interior_profile_is_increasing() {
        let v = parse(solve_interval(0.1, 1.0, 0.0, 1.0, 0.0, 1.0));
        let u: Vec<f64> = serde_json::from_value(v["u"].clone()).unwrap();
        let inside: Vec<bool> = serde_json::from_value(v["interior"].clone()).unwrap();
        let u: Vec<f64> = u.into_iter().zip(inside).filter(|p| p.1).map(|p| p.0).collect();
        assert!(u.windows(2).all(|w| w[1] > w[0]));
        assert!(v["residual"].as_f64().unwrap() <= 1e-10);
    }

    #[test]
    fn episode_trace_round_trips() {
        let v = parse(play_disk(0.2, 0.1, 1, 0.1, 1.0, 0.0, 7));
        assert_eq!(v["states"].as_array().unwrap().len(), v["tau"].as_u64().unwrap() as usize + 1);
        assert_eq!(v, parse(play_disk(0.2, 0.1, 1, 0.1, 1.0, 0.0, 7)));
    }

    #[test]
    fn estimate_brackets_dpp_value() {
        let v = parse(estimate_interval(0.5, 0.1, 1.0, 0.0, 4000, 2));
        let (dpp, mean, se) = (
            v["dpp"].as_f64().unwrap(),
            v["estimate"]["mean"].as_f64().unwrap(),
            v["estimate"]["std_error"].as_f64().unwrap(),
        );
        assert!((mean - dpp).abs() <= 4.0 * se, "{mean} vs {dpp} (se {se})");
    }

    #[test]
    fn errors_are_reported_as_json() {
        assert!(parse(play_disk(0.0, 0.0, 3, 0.1, 1.0, 0.0, 0))["error"].is_string());
        assert!(parse(solve_interval(0.1, 1.0, 0.0, 1.0, 0.0, 500.0))["error"].is_string());
        assert!(parse(estimate_interval(0.5, 0.1, 1.0, 0.0, 1, 0))["error"].is_string());
    }
}
