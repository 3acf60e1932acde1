//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! cargo test -p tow-core --test acceptance

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tow_core::game::{
    exit_time_stats, martingale_diagnostic, Game, GameMode, GameState, RngStream, StepEvent, Strategy,
};
use tow_core::pde::{
    consistency_residual, convergence_study, kappa, solve_reference_1d_with, stencil_kappa, Diffusion, TestFunction,
};
use tow_core::solver::{
    comparison_check, dpp_update, solve_fixed_point, solve_n_system, solve_perron, BoardSpec, DppParams, NSystem,
    Operator, Seed, SolveOptions, ValuePair,
};
use tow_core::{Board, Domain, Field, Lattice, PayoffData, Term};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("DPP uniqueness", c1_uniqueness),
        ("constant invariance", c2_constants),
        ("brute-force oracle", c3_oracle),
        ("monotonicity and bounds", c4_monotone),
        ("game value = DPP value", c5_game_value),
        ("kernel statistics", c6_kernel),
        ("termination", c7_termination),
        ("martingale and exit bounds", c8_martingale),
        ("kappa", c9_kappa),
        ("consistency", c10_consistency),
        ("eps-convergence", c11_convergence),
        ("extensions", c12_extensions),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {:<28} {:>7.1}s  {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            name,
            t.elapsed().as_secs_f64(),
            detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn unit_interval() -> Domain {
    Domain::interval(0.0, 1.0).unwrap()
}

fn unit_disk() -> Domain {
    Domain::ball(vec![0.0, 0.0], 1.0).unwrap()
}

/// `f(x) = x_1`, `g = 0`.
fn ramp(dim: usize) -> PayoffData {
    let mut c = vec![0.0; dim];
    c[0] = 1.0;
    PayoffData::new(Field::linear(c, 0.0), Field::constant(0.0))
}

fn c1_uniqueness() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, domain) in [("1D", unit_interval()), ("2D", unit_disk())] {
        let t = Instant::now();
        let payoff = ramp(domain.dim());
        let lat = Lattice::build(&domain, &payoff, 0.1 / 8.0, 0.1).map_err(e)?;
        let sol = solve_perron(&lat, &DppParams::default(), SolveOptions::with_tol(1e-9)).map_err(e)?;
        let secs = t.elapsed().as_secs_f64();
        pass &= sol.gap < 1e-7 && secs < 60.0;
        parts.push(format!("{label} gap {:.2e} ({secs:.1}s)", sol.gap));
    }
    Ok((pass, parts.join(", ")))
}

fn c2_constants() -> Outcome {
    let c = 0.37;
    let payoff = PayoffData::constant(c);
    let mut worst: f64 = 0.0;
    for domain in [unit_interval(), unit_disk()] {
        let lat = Lattice::build(&domain, &payoff, 0.025, 0.1).map_err(e)?;
        for seed in [Seed::Lower, Seed::Upper] {
            let (v, _) =
                solve_fixed_point(&lat, &DppParams::default(), seed, SolveOptions::with_tol(1e-13)).map_err(e)?;
            worst = v.u.iter().chain(&v.v).fold(worst, |m, x| m.max((x - c).abs()));
        }
    }
    let domain = unit_disk();
    let game = Game::new(&domain, &payoff, 0.1, GameMode::Full);
    let pulls = Strategy::pull_to(vec![1.0, 0.0]);
    let random = Strategy::StationaryRandom;
    let mut all_exact = true;
    let mut episodes = 0;
    for (s1, s2) in [(&pulls, &random), (&random, &random), (&random, &pulls)] {
        for board in [Board::One, Board::Two] {
            let outs = game.outcomes(&[0.2, -0.3], board, s1, s2, 1000, 3).map_err(e)?;
            episodes += outs.len();
            all_exact &= outs.iter().all(|o| o.payoff == Some(c));
            let est = game.estimate_value(&[0.2, -0.3], board, s1, s2, 1000, 3).map_err(e)?;
            all_exact &= est.mean == c && est.std_error == 0.0;
        }
    }
    Ok((
        worst <= 1e-12 && all_exact,
        format!("max |value - c| {worst:.1e}; {episodes} episodes all paid exactly c: {all_exact}"),
    ))
}

/// Independent Jacobi iteration on a hand-built 1D grid.
struct PicardOracle {
    xs: Vec<f64>,
    interior: Vec<bool>,
    m: usize,
}

impl PicardOracle {
    fn new(a: f64, b: f64, eps: f64, h: f64) -> Self {
        let m = (eps / h).round() as usize;
        let count = ((b - a + 2.0 * eps) / h).round() as usize + 1;
        let xs: Vec<f64> = (0..count).map(|k| a - eps + k as f64 * h).collect();
        let interior = xs.iter().map(|&x| a < x && x < b).collect();
        Self { xs, interior, m }
    }

    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        f: &Field,
        g: &Field,
        a: &Field,
        b: &Field,
        alpha1: f64,
        alpha2: f64,
        eps: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = self.xs.len();
        let mut u: Vec<f64> = self.xs.iter().map(|&x| f.eval(&[x])).collect();
        let mut v: Vec<f64> = self.xs.iter().map(|&x| g.eval(&[x])).collect();
        let e2 = eps * eps;
        for _ in 0..2_000_000 {
            let mut nu = u.clone();
            let mut nv = v.clone();
            let mut change: f64 = 0.0;
            for k in 0..n {
                if !self.interior[k] {
                    continue;
                }
                let lo = k - self.m;
                let hi = k + self.m;
                let avg = |w: &[f64], alpha: f64| {
                    let s = &w[lo..=hi];
                    let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mn = s.iter().cloned().fold(f64::INFINITY, f64::min);
                    let mean = s.iter().sum::<f64>() / s.len() as f64;
                    alpha * (0.5 * mx + 0.5 * mn) + (1.0 - alpha) * mean
                };
                let x = [self.xs[k]];
                let pa = a.eval(&x) * e2;
                let pb = b.eval(&x) * e2;
                nu[k] = pa * v[k] + (1.0 - pa) * avg(&u, alpha1);
                nv[k] = pb * u[k] + (1.0 - pb) * avg(&v, alpha2);
                change = change.max((nu[k] - u[k]).abs()).max((nv[k] - v[k]).abs());
            }
            u = nu;
            v = nv;
            if change < 1e-15 {
                break;
            }
        }
        (u, v)
    }
}

fn c3_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut max_nodes = 0;
    for trial in 0..5 {
        let b_end = [1.0, 0.75, 1.0, 0.875, 1.0][trial];
        let domain = Domain::interval(0.0, b_end).map_err(e)?;
        let (eps, h) = (0.25, 0.0625);
        let f = Field::Sum {
            terms: vec![
                Term { weight: rng.random_range(-2.0..2.0), field: Field::linear(vec![1.0], 0.0) },
                Term { weight: rng.random_range(-1.0..1.0), field: Field::Norm { center: vec![0.4] } },
            ],
            offset: rng.random_range(-1.0..1.0),
        };
        let g = Field::linear(vec![rng.random_range(-2.0..2.0)], rng.random_range(-1.0..1.0));
        let a = Field::linear(vec![rng.random_range(0.0..3.0)], rng.random_range(0.5..4.0));
        let b = Field::constant(rng.random_range(0.5..8.0));
        let alpha1 = rng.random_range(0.0..1.0);
        let alpha2 = rng.random_range(0.0..1.0);
        let payoff = PayoffData::new(f.clone(), g.clone());
        let lat = Lattice::build(&domain, &payoff, h, eps).map_err(e)?;
        max_nodes = max_nodes.max(lat.len());
        let params =
            DppParams { jump_coeff_1: a.clone(), jump_coeff_2: b.clone(), mix_alpha_1: alpha1, mix_alpha_2: alpha2 };
        let (sol, _) = solve_fixed_point(&lat, &params, Seed::Lower, SolveOptions::with_tol(1e-13)).map_err(e)?;
        let oracle = PicardOracle::new(0.0, b_end, eps, h);
        let (ou, ov) = oracle.solve(&f, &g, &a, &b, alpha1, alpha2, eps);
        if oracle.xs.len() != lat.len() {
            return Ok((false, format!("oracle grid has {} nodes, lattice {}", oracle.xs.len(), lat.len())));
        }
        for (k, x) in oracle.xs.iter().enumerate() {
            let i = lat.node_at_point(&[*x]).ok_or(format!("no lattice node at {x}"))?;
            worst = worst.max((sol.u[i] - ou[k]).abs()).max((sol.v[i] - ov[k]).abs());
        }
    }
    Ok((worst <= 1e-10 && max_nodes <= 30, format!("5 configs, <= {max_nodes} nodes, max diff {worst:.1e}")))
}

fn random_pair(lat: &Lattice, rng: &mut ChaCha8Rng, c: f64) -> ValuePair {
    let mut p = ValuePair::with_interior(lat, 0.0);
    for &i in lat.interior_nodes() {
        p.u[i] = rng.random_range(-c..=c);
        p.v[i] = rng.random_range(-c..=c);
    }
    p
}

fn c4_monotone() -> Outcome {
    let domain = unit_disk();
    let payoff = PayoffData::new(
        Field::Sum { terms: vec![Term { weight: 1.0, field: Field::Product }], offset: 0.2 },
        Field::linear(vec![0.5, -1.0], 0.0),
    );
    let lat = Lattice::build(&domain, &payoff, 0.05, 0.2).map_err(e)?;
    let c = lat.payoff_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut ordered_ok = 0;
    let mut bounded_ok = 0;
    let mut nonexp_ok = 0;
    for t in 0..100 {
        let params = DppParams {
            jump_coeff_1: Field::constant(rng.random_range(0.0..20.0)),
            jump_coeff_2: Field::linear(vec![1.0, 1.0], 3.0),
            mix_alpha_1: if t % 3 == 0 { 1.0 } else { rng.random_range(0.0..1.0) },
            mix_alpha_2: if t % 3 == 0 { 0.0 } else { rng.random_range(0.0..1.0) },
        };
        let a = random_pair(&lat, &mut rng, c);
        let mut b = a.clone();
        for &i in lat.interior_nodes() {
            b.u[i] = (b.u[i] + rng.random_range(0.0..0.5)).min(c);
            b.v[i] = (b.v[i] + rng.random_range(0.0..0.5)).min(c);
        }
        if a.le(&b) && comparison_check(&a, &b, &lat, &params).map_err(e)? {
            ordered_ok += 1;
        }
        let ta = dpp_update(&a, &lat, &params).map_err(e)?;
        if ta.sup_abs() <= c {
            bounded_ok += 1;
        }
        let other = random_pair(&lat, &mut rng, c);
        let to = dpp_update(&other, &lat, &params).map_err(e)?;
        if ta.sup_distance(&to) <= a.sup_distance(&other) {
            nonexp_ok += 1;
        }
    }
    Ok((
        ordered_ok == 100 && bounded_ok == 100 && nonexp_ok == 100,
        format!("comparison {ordered_ok}/100, bounds {bounded_ok}/100, nonexpansive {nonexp_ok}/100"),
    ))
}

fn c5_game_value() -> Outcome {
    let domain = unit_interval();
    let payoff = ramp(1);
    let eps = 0.1;
    let lat = Lattice::build(&domain, &payoff, eps / 8.0, eps).map_err(e)?;
    let sol = solve_perron(&lat, &DppParams::default(), SolveOptions::default()).map_err(e)?;
    let node = lat.node_at_point(&[0.5]).ok_or("0.5 is not a node")?;
    let (u, v) = (sol.lower.u[node], sol.lower.v[node]);
    let s1 = Strategy::greedy_max(&lat, &sol.lower.u);
    let s2 = Strategy::greedy_min(&lat, &sol.lower.u);
    let game = Game::new(&domain, &payoff, eps, GameMode::Full).with_lattice_kernel(&lat);
    let mut pass = true;
    let mut parts = Vec::new();
    for (board, target) in [(Board::One, u), (Board::Two, v)] {
        let est = game.estimate_value(&[0.5], board, &s1, &s2, 20_000, 5).map_err(e)?;
        let z = (est.mean - target) / est.std_error;
        pass &= z.abs() <= 3.0 && est.capped_count == 0;
        parts.push(format!("board {} mean {:.4} vs {:.4} (z {z:+.2})", board.number(), est.mean, target));
    }
    // for information: continuous board-2 moves differ from the lattice average by O(h)
    let continuum = Game::new(&domain, &payoff, eps, GameMode::Full);
    let est = continuum.estimate_value(&[0.5], Board::Two, &s1, &s2, 20_000, 5).map_err(e)?;
    parts.push(format!("[continuum kernel, board 2: z {:+.2}]", (est.mean - v) / est.std_error));
    Ok((pass, parts.join("; ")))
}

fn c6_kernel() -> Outcome {
    let domain = unit_interval();
    let payoff = ramp(1);
    let eps = 0.3;
    let game = Game::new(&domain, &payoff, eps, GameMode::Full);
    let s = Strategy::StationaryRandom;
    let n = 100_000usize;
    let p = eps * eps;
    let mut pass = true;
    let mut parts = Vec::new();
    for board in [Board::One, Board::Two] {
        let state = GameState::new(vec![0.5], board);
        let mut rng = RngStream::new(11, board.number() as u64).rng();
        let mut moves = [0usize; 2];
        let (mut jumps, mut heads, mut tosses) = (0usize, 0usize, 0usize);
        for k in 0..n {
            let (next, ev) = game.step(&state, k, &mut moves, &s, &s, &mut rng).map_err(e)?;
            match ev {
                StepEvent::Jump => {
                    jumps += 1;
                    pass &= next.x == state.x && next.board == board.other();
                }
                StepEvent::PlayerOne | StepEvent::PlayerTwo => {
                    tosses += 1;
                    heads += (ev == StepEvent::PlayerOne) as usize;
                }
                StepEvent::Random => {}
            }
        }
        let jf = jumps as f64 / n as f64;
        let jse = (p * (1.0 - p) / n as f64).sqrt();
        pass &= (jf - p).abs() <= 3.0 * jse;
        parts.push(format!("board {} jump rate {jf:.4} vs {p:.2} (z {:+.2})", board.number(), (jf - p) / jse));
        if board == Board::One {
            let hf = heads as f64 / tosses as f64;
            let hse = (0.25 / tosses as f64).sqrt();
            pass &= (hf - 0.5).abs() <= 3.0 * hse;
            parts.push(format!("coin {hf:.4} (z {:+.2})", (hf - 0.5) / hse));
        }
    }
    Ok((pass, parts.join(", ")))
}

fn c7_termination() -> Outcome {
    let domain = unit_disk();
    let payoff = ramp(2);
    let eps = 0.1;
    let lat = Lattice::build(&domain, &payoff, eps / 4.0, eps).map_err(e)?;
    let (values, _) =
        solve_fixed_point(&lat, &DppParams::default(), Seed::Lower, SolveOptions::with_tol(1e-6)).map_err(e)?;
    let strategies = [
        Strategy::pull_to(vec![1.0, 0.0]),
        Strategy::greedy_max(&lat, &values.u),
        Strategy::greedy_min(&lat, &values.u),
        Strategy::StationaryRandom,
    ];
    let game = Game::new(&domain, &payoff, eps, GameMode::Full);
    let episodes = 10_000;
    let mut worst = 0.0f64;
    let mut worst_pair = String::new();
    for s1 in &strategies {
        for s2 in &strategies {
            let outs = game.outcomes(&[0.0, 0.0], Board::One, s1, s2, episodes, 99).map_err(e)?;
            let frac = outs.iter().filter(|o| o.capped).count() as f64 / episodes as f64;
            if frac >= worst {
                worst = frac;
                worst_pair = format!("{} vs {}", s1.name(), s2.name());
            }
        }
    }
    Ok((
        worst < 1e-3,
        format!("16 pairs x {episodes} episodes, cap {}, worst capped fraction {worst} ({worst_pair})", game.cap),
    ))
}

fn c8_martingale() -> Outcome {
    let domain = unit_disk();
    let payoff = ramp(2);
    let eps = 0.05;
    let y = [1.0, 0.0];
    let x0 = [0.9, 0.0];
    let game = Game::new(&domain, &payoff, eps, GameMode::TowOnly);
    let puller = Strategy::pull_to(y.to_vec());
    let random = Strategy::StationaryRandom;
    let traces = game.traces(&x0, Board::One, &puller, &random, 10_000, 8).map_err(e)?;
    let m = martingale_diagnostic(&traces, eps, &y).map_err(e)?;
    let x = exit_time_stats(&traces, eps, &x0, &y, 0.5).map_err(e)?;
    let tau_ok = x.mean_tau <= 16.0 + 3.0 * x.tau_se;
    let sq_ok = x.mean_sq_exit_distance <= 0.02 + 3.0 * x.sq_exit_se;
    let far = match &m.beyond_eps {
        Some(b) => format!(
            " [bins with |x-y| >= eps only: max drift {:.2e}, min E[dN^2] {:.2e}]",
            b.max_drift, b.min_second_moment
        ),
        None => String::new(),
    };
    Ok((
        m.passed() && tau_ok && sq_ok && x.capped == 0,
        format!(
            "max drift {:.2e} (se {:.1e}), min E[dN^2] {:.2e} vs {:.2e}, E[tau] {:.2} <= 16, E|x-y|^2 {:.4} <= 0.02{far}",
            m.all.max_drift,
            m.all.max_drift_se,
            m.all.min_second_moment,
            m.second_moment_floor,
            x.mean_tau,
            x.mean_sq_exit_distance
        ),
    ))
}

/// Monte Carlo mean of `z_1^2` over the unit ball by rejection from the cube.
fn mc_kappa(n: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut count) = (0.0, 0usize);
    while count < samples {
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if z.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            sum += z[0] * z[0];
            count += 1;
        }
    }
    sum / samples as f64
}

fn c9_kappa() -> Outcome {
    let exact = (1..=10).all(|n| {
        let k = kappa(n).unwrap();
        k == 1.0 / (n as f64 + 2.0) && k * (n as f64 + 2.0) == 1.0
    });
    let mc: Vec<f64> =
        [2usize, 3].iter().map(|&n| (mc_kappa(n, 4_000_000, n as u64) - kappa(n).unwrap()).abs()).collect();
    let mut ladder_ok = true;
    let mut gaps = Vec::new();
    for dim in [1usize, 2] {
        let eps = 0.1;
        let domain = Domain::ball(vec![0.0; dim], 0.06).map_err(e)?;
        let g: Vec<f64> = [4.0, 8.0, 16.0]
            .iter()
            .map(|m| {
                let lat = Lattice::build(&domain, &PayoffData::constant(0.0), eps / m, eps).unwrap();
                let node = lat.nearest_node(&vec![0.0; dim]).unwrap();
                (stencil_kappa(&lat, node).unwrap() - kappa(dim).unwrap()).abs()
            })
            .collect();
        ladder_ok &= g[1] < g[0] && g[2] < g[1];
        gaps.push(format!("{dim}D gaps {:.2e} {:.2e} {:.2e}", g[0], g[1], g[2]));
    }
    Ok((
        exact && mc.iter().all(|d| *d < 1e-3) && ladder_ok,
        format!("closed form exact N<=10: {exact}; MC diff N=2 {:.1e}, N=3 {:.1e}; {}", mc[0], mc[1], gaps.join(", ")),
    ))
}

fn c10_consistency() -> Outcome {
    let quad = |q: Vec<f64>, b: Vec<f64>, c: f64| TestFunction::Quadratic { q, b, c };
    // gradients at the probes are nonzero; in 2D they point along a lattice axis
    let pairs: Vec<(TestFunction, TestFunction, Vec<f64>)> = vec![
        (TestFunction::half_norm_squared(2), quad(vec![1.0, 0.0, 0.0, 2.0], vec![0.3, -0.2], 0.1), vec![0.5, 0.0]),
        (
            quad(vec![2.0, 0.5, 0.5, 1.0], vec![0.0, -0.25], 0.0),
            quad(vec![3.0, 1.0, 1.0, -1.0], vec![0.0, 0.0], 1.0),
            vec![0.5, 0.0],
        ),
        (quad(vec![1.0], vec![0.2], 0.0), quad(vec![-2.0], vec![1.0], 0.5), vec![0.5]),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (phi, psi, x)) in pairs.iter().enumerate() {
        let domain = if x.len() == 1 {
            Domain::interval(0.0, 1.0).map_err(e)?
        } else {
            Domain::ball(vec![0.5, 0.0], 0.5).map_err(e)?
        };
        let mut r = Vec::new();
        for eps in [0.2, 0.1, 0.05] {
            let lat = Lattice::build(&domain, &PayoffData::constant(0.0), eps / 8.0, eps).map_err(e)?;
            r.push(consistency_residual(phi, psi, x, eps, &lat).map_err(e)?);
        }
        let ratio = |f: fn(&(f64, f64)) -> f64| [f(&r[1]) / f(&r[0]), f(&r[2]) / f(&r[1])];
        let r1 = ratio(|p| p.0);
        let r2 = ratio(|p| p.1);
        pass &= r1.iter().chain(&r2).all(|q| *q <= 0.75);
        parts.push(format!(
            "pair {}: r1 {:.1e}->{:.1e} (ratios {:.2},{:.2}), r2 {:.1e}->{:.1e} (ratios {:.2},{:.2})",
            k + 1,
            r[0].0,
            r[2].0,
            r1[0],
            r1[1],
            r[0].1,
            r[2].1,
            r2[0],
            r2[1]
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn c11_convergence() -> Outcome {
    let quant = convergence_study(
        &unit_interval(),
        &ramp(1),
        &DppParams::default(),
        &[0.2, 0.1, 0.05],
        8.0,
        SolveOptions::default(),
    )
    .map_err(e)?;
    let trend = convergence_study(
        &unit_disk(),
        &ramp(2),
        &DppParams::default(),
        &[0.2, 0.1, 0.05],
        4.0,
        SolveOptions::with_tol(1e-8),
    )
    .map_err(e)?;
    let fmt = |t: &tow_core::pde::ConvergenceTable| {
        t.rows.iter().filter_map(|r| r.dist).map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(" > ")
    };
    Ok((
        quant.strictly_decreasing() && trend.strictly_decreasing(),
        format!("1D vs reference {}; 2D successive {}", fmt(&quant), fmt(&trend)),
    ))
}

fn c12_extensions() -> Outcome {
    let mut parts = Vec::new();
    let opts = SolveOptions::with_tol(1e-10);

    // n = 2 with the default operators and unit couplings
    let domain = unit_disk();
    let payoff = PayoffData::new(Field::linear(vec![1.0, 0.5], 0.0), Field::norm());
    let lat = Lattice::build(&domain, &payoff, 0.05, 0.2).map_err(e)?;
    let (base, _) = solve_fixed_point(&lat, &DppParams::default(), Seed::Lower, opts).map_err(e)?;
    let system = |op1: Operator, op2: Operator| NSystem {
        boards: vec![
            BoardSpec { operator: op1, coupling: vec![0.0, 1.0], payoff: payoff.f.clone() },
            BoardSpec { operator: op2, coupling: vec![1.0, 0.0], payoff: payoff.g.clone() },
        ],
    };
    let two = solve_n_system(&lat, &system(Operator::Infinity, Operator::Laplace), opts).map_err(e)?;
    let diff = tow_core_sup(&two.fields[0], &base.u).max(tow_core_sup(&two.fields[1], &base.v));
    let n_ok = diff <= 1e-12;
    parts.push(format!("n=2 vs base {diff:.1e}"));

    // explicit Mix(1) / Mix(0) against the pure operators
    let mixed = solve_n_system(&lat, &system(Operator::Mix(1.0), Operator::Mix(0.0)), opts).map_err(e)?;
    let bitwise =
        mixed.fields.iter().zip(&two.fields).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    parts.push(format!("mix 1/0 bitwise: {bitwise}"));

    // doubling b halves the v diffusion: compare with the kappa/(2K) reference
    let k = 2.0;
    let params = DppParams { jump_coeff_2: Field::constant(k), ..DppParams::default() };
    let table = convergence_study(&unit_interval(), &ramp(1), &params, &[0.2, 0.1, 0.05], 8.0, SolveOptions::default())
        .map_err(e)?;
    let dv: Vec<f64> = table.rows.iter().map(|r| r.dist_v.unwrap()).collect();
    let approaching = dv.windows(2).all(|w| w[1] < w[0]);
    let lat = Lattice::build(&unit_interval(), &ramp(1), 0.05 / 8.0, 0.05).map_err(e)?;
    let (sol, _) = solve_fixed_point(&lat, &params, Seed::Lower, SolveOptions::default()).map_err(e)?;
    let third = kappa(1).map_err(e)?;
    let dist_v = |diff: Diffusion| -> Result<f64, String> {
        let r = solve_reference_1d_with((0.0, 1.0), (0.0, 1.0), (0.0, 0.0), 4000, diff).map_err(e)?;
        Ok(lat.interior_nodes().iter().fold(0.0f64, |m, &i| m.max((sol.v[i] - r.interpolate(lat.node(i)[0]).1).abs())))
    };
    let scaled = dist_v(Diffusion::with_jump_weights(third, 1.0, k))?;
    let unscaled = dist_v(Diffusion::with_jump_weights(third, 1.0, 1.0))?;
    let remark_ok = approaching && scaled < unscaled;
    parts.push(format!(
        "b=2: |v - ref(kappa/4)| {} ; at eps 0.05 {scaled:.3e} vs {unscaled:.3e} against ref(kappa/2)",
        dv.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(" > ")
    ));
    Ok((n_ok && bitwise && remark_ok, parts.join("; ")))
}

fn tow_core_sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
