use anyhow::{bail, Context};
use serde::Serialize;

use tow_core::game::{summarize, EpisodeOutcome, Game, GameMode, Strategy};
use tow_core::pde::{
    consistency_residual, convergence_study, kappa, kappa_monte_carlo, limit_diffusion, solve_reference_1d_with,
    ConvergenceTable, TestFunction,
};
use tow_core::solver::{solve_fixed_point, solve_n_system, solve_perron, Seed, SolveOptions, SolveReport, ValuePair};
use tow_core::{Board, Domain, Lattice, PayoffData};

use crate::config::{ExperimentConfig, InitSeed, KernelChoice, SimulationConfig, StrategySpec, Suite};
use crate::output::{coord_header, num, Check, RunDir};

/// Seed used by the kappa Monte Carlo table when none is given.
const DEFAULT_MC_SEED: u64 = 0;

pub struct Run<'a> {
    pub cfg: &'a ExperimentConfig,
    pub dir: &'a mut RunDir,
    pub seed: Option<u64>,
    pub seeds: Vec<(String, u64)>,
    pub checks: Vec<Check>,
}

impl Run<'_> {
    fn lattice(&self) -> anyhow::Result<Lattice> {
        let g = &self.cfg.grid;
        Lattice::build(&self.cfg.domain, &self.cfg.payoff, g.h, g.epsilon).context("building the lattice")
    }

    fn solve_options(&self, tol: Option<f64>, max_iter: Option<usize>) -> SolveOptions {
        SolveOptions { tol: tol.unwrap_or(self.cfg.solve.tol), max_iter: max_iter.or(self.cfg.solve.max_iter) }
    }

    fn write_node_table(
        &mut self,
        name: &str,
        lat: &Lattice,
        labels: &[&str],
        fields: &[&[f64]],
    ) -> anyhow::Result<()> {
        let mut header = vec!["node_id".to_string()];
        header.extend(coord_header(lat.dim()));
        header.push("interior".into());
        header.extend(labels.iter().map(|s| s.to_string()));
        let rows: Vec<Vec<String>> = (0..lat.len())
            .map(|i| {
                let mut r = vec![i.to_string()];
                r.extend(lat.node(i).iter().map(|&x| num(x)));
                r.push(u8::from(lat.is_interior(i)).to_string());
                r.extend(fields.iter().map(|f| num(f[i])));
                r
            })
            .collect();
        self.dir.write_csv(name, &header, &rows)
    }
}

#[derive(Serialize)]
struct SeedReport<'a> {
    seed: &'a str,
    iterations: usize,
    final_residual: f64,
    error_estimate: f64,
    converged: bool,
}

impl<'a> SeedReport<'a> {
    fn new(seed: &'a str, r: &SolveReport) -> Self {
        Self {
            seed,
            iterations: r.iterations,
            final_residual: r.final_residual,
            error_estimate: r.error_estimate,
            converged: r.converged,
        }
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    nodes: usize,
    interior_nodes: usize,
    iterations: usize,
    final_residual: f64,
    gap_up_down: Option<f64>,
    converged: bool,
    runs: Vec<SeedReport<'a>>,
}

pub fn solve(
    run: &mut Run<'_>,
    init: Option<InitSeed>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    dump_lattice: bool,
) -> anyhow::Result<()> {
    let lat = run.lattice()?;
    let opts = run.solve_options(tol, max_iter);
    let params = &run.cfg.dpp;
    let init = init.unwrap_or(run.cfg.solve.init);
    let (values, runs, gap) = match init {
        InitSeed::Lower | InitSeed::Upper => {
            let (seed, label) = if init == InitSeed::Lower { (Seed::Lower, "lower") } else { (Seed::Upper, "upper") };
            let (v, r) = solve_fixed_point(&lat, params, seed, opts)?;
            (v, vec![SeedReport::new(label, &r)], None)
        }
        InitSeed::Both => {
            let p = solve_perron(&lat, params, opts)?;
            let runs = vec![SeedReport::new("lower", &p.lower_report), SeedReport::new("upper", &p.upper_report)];
            (p.lower, runs, Some(p.gap))
        }
    };
    let out = SolveOutput {
        nodes: lat.len(),
        interior_nodes: lat.interior_nodes().len(),
        iterations: runs.iter().map(|r| r.iterations).max().unwrap_or(0),
        final_residual: runs.iter().map(|r| r.final_residual).fold(0.0, f64::max),
        gap_up_down: gap,
        converged: runs.iter().all(|r| r.converged),
        runs,
    };
    run.checks.push(Check::flag("converged", out.converged));
    run.checks.push(Check::at_most("final_residual", out.final_residual, 10.0 * opts.tol));
    if let Some(gap) = gap {
        run.checks.push(Check::at_most("gap_up_down", gap, 10.0 * opts.tol));
    }
    run.dir.write_json("report.json", &out)?;
    run.write_node_table("values.csv", &lat, &["u", "v"], &[&values.u, &values.v])?;
    if dump_lattice {
        let mut buf = Vec::new();
        lat.write_csv(&mut buf)?;
        run.dir.write_with("lattice.csv", |out| std::io::Write::write_all(out, &buf))?;
    }
    Ok(())
}

/// Command-line overrides of the simulation block.
#[derive(Debug, Default, Clone)]
pub struct SimulateArgs {
    pub x0: Option<Vec<f64>>,
    pub board: Option<u8>,
    pub s1: Option<StrategySpec>,
    pub s2: Option<StrategySpec>,
    pub episodes: Option<usize>,
    pub mode: Option<GameMode>,
    pub traces: bool,
}

fn merge_simulation(
    b: Option<&SimulationConfig>,
    args: SimulateArgs,
    seed: Option<u64>,
) -> anyhow::Result<SimulationConfig> {
    let missing = |what: &str| anyhow::anyhow!("simulation.{what} is not set in the config or on the command line");
    Ok(SimulationConfig {
        x0: args.x0.or_else(|| b.map(|s| s.x0.clone())).ok_or_else(|| missing("x0"))?,
        board: args.board.or_else(|| b.map(|s| s.board)).ok_or_else(|| missing("board"))?,
        s1: args.s1.or_else(|| b.map(|s| s.s1.clone())).ok_or_else(|| missing("s1"))?,
        s2: args.s2.or_else(|| b.map(|s| s.s2.clone())).ok_or_else(|| missing("s2"))?,
        episodes: args.episodes.or_else(|| b.map(|s| s.episodes)).ok_or_else(|| missing("episodes"))?,
        seed: seed.or_else(|| b.map(|s| s.seed)).ok_or_else(|| missing("seed"))?,
        mode: args.mode.or_else(|| b.map(|s| s.mode)).unwrap_or(GameMode::Full),
        cap: b.and_then(|s| s.cap),
        kernel: b.map(|s| s.kernel).unwrap_or_default(),
        traces: args.traces || b.is_some_and(|s| s.traces),
    })
}

#[derive(Serialize)]
struct SimulationSummary {
    x0: Vec<f64>,
    board: u8,
    s1: String,
    s2: String,
    mode: GameMode,
    kernel: KernelChoice,
    epsilon: f64,
    cap: usize,
    seed: u64,
    episodes: usize,
    mean: f64,
    std_error: f64,
    capped_count: usize,
    mean_tau: f64,
    /// Lattice DPP value at the node nearest `x0`, when one was solved.
    dpp_value: Option<f64>,
}

pub fn simulate(run: &mut Run<'_>, args: SimulateArgs) -> anyhow::Result<()> {
    let cfg = run.cfg;
    let sim = merge_simulation(cfg.simulation.as_ref(), args, run.seed)?;
    let dim = cfg.domain.dim();
    if sim.x0.len() != dim {
        bail!("x0 has {} coordinates for a {dim}-dimensional domain", sim.x0.len());
    }
    let board = Board::from_number(sim.board).context("board must be 1 or 2")?;
    run.seeds.push(("simulation".into(), sim.seed));

    let needs_lattice = sim.s1.needs_values() || sim.s2.needs_values() || sim.kernel == KernelChoice::Lattice;
    let solved: Option<(Lattice, ValuePair)> = if needs_lattice {
        let lat = run.lattice()?;
        let (values, report) = solve_fixed_point(&lat, &cfg.dpp, Seed::Lower, run.solve_options(None, None))?;
        run.checks.push(Check::flag("dpp_converged", report.converged));
        Some((lat, values))
    } else {
        None
    };
    let strategy = |spec: &StrategySpec| -> anyhow::Result<Strategy<'_>> {
        Ok(match spec {
            StrategySpec::PullTo { target } => {
                if target.len() != dim {
                    bail!("pull_to target has {} coordinates for a {dim}-dimensional domain", target.len());
                }
                Strategy::pull_to(target.clone())
            }
            StrategySpec::GreedyMax => {
                let (lat, v) = solved.as_ref().expect("lattice solved");
                Strategy::greedy_max(lat, &v.u)
            }
            StrategySpec::GreedyMin => {
                let (lat, v) = solved.as_ref().expect("lattice solved");
                Strategy::greedy_min(lat, &v.u)
            }
            StrategySpec::StationaryRandom => Strategy::StationaryRandom,
        })
    };
    let (s1, s2) = (strategy(&sim.s1)?, strategy(&sim.s2)?);
    let mut game = Game::new(&cfg.domain, &cfg.payoff, cfg.grid.epsilon, sim.mode);
    if let Some(cap) = sim.cap {
        game = game.with_cap(cap);
    }
    if sim.kernel == KernelChoice::Lattice {
        game = game.with_lattice_kernel(&solved.as_ref().expect("lattice solved").0);
    }

    let estimate = if sim.traces {
        let traces = game.traces(&sim.x0, board, &s1, &s2, sim.episodes, sim.seed)?;
        let mut header = vec!["episode".to_string(), "step".to_string()];
        header.extend(coord_header(dim));
        header.extend(["board".to_string(), "event".to_string()]);
        let mut rows = Vec::new();
        for (e, t) in traces.iter().enumerate() {
            for (k, s) in t.states.iter().enumerate() {
                let mut r = vec![e.to_string(), k.to_string()];
                r.extend(s.x.iter().map(|&x| num(x)));
                r.push(s.board.number().to_string());
                r.push(if k == 0 { "start".into() } else { t.events[k - 1].as_str().to_string() });
                rows.push(r);
            }
        }
        run.dir.write_csv("traces.csv", &header, &rows)?;
        let outcomes: Vec<EpisodeOutcome> = traces
            .into_iter()
            .map(|t| EpisodeOutcome { exit_state: t.exit_state, payoff: t.payoff, tau: t.tau, capped: t.capped })
            .collect();
        summarize(&outcomes)?
    } else {
        game.estimate_value(&sim.x0, board, &s1, &s2, sim.episodes, sim.seed)?
    };
    let dpp_value = solved.as_ref().and_then(|(lat, v)| lat.nearest_node(&sim.x0).map(|i| v.get(board)[i]));
    let summary = SimulationSummary {
        s1: sim.s1.to_string(),
        s2: sim.s2.to_string(),
        board: sim.board,
        mode: sim.mode,
        kernel: sim.kernel,
        epsilon: cfg.grid.epsilon,
        cap: game.cap,
        seed: sim.seed,
        episodes: estimate.episodes,
        mean: estimate.mean,
        std_error: estimate.std_error,
        capped_count: estimate.capped_count,
        mean_tau: estimate.mean_tau,
        dpp_value,
        x0: sim.x0,
    };
    run.checks.push(Check::at_most("capped_fraction", estimate.capped_count as f64 / estimate.episodes as f64, 1e-3));
    run.dir.write_json("summary.json", &summary)
}

fn write_convergence(run: &mut Run<'_>, table: &ConvergenceTable) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    run.dir.write_with("convergence.csv", |out| std::io::Write::write_all(out, &buf))?;
    run.checks.push(Check::flag("all_levels_converged", table.rows.iter().all(|r| r.converged)));
    run.checks.push(Check::flag("distances_strictly_decreasing", table.strictly_decreasing()));
    Ok(())
}

fn study(run: &Run<'_>) -> anyhow::Result<ConvergenceTable> {
    let g = &run.cfg.grid;
    if g.epsilons.len() < 2 {
        bail!("grid.epsilons: a convergence study needs at least two step sizes");
    }
    let opts = run.solve_options(None, None);
    Ok(convergence_study(&run.cfg.domain, &run.cfg.payoff, &run.cfg.dpp, &g.epsilons, g.h_ratio(), opts)?)
}

pub fn converge(run: &mut Run<'_>) -> anyhow::Result<()> {
    let table = study(run)?;
    write_convergence(run, &table)
}

pub fn verify(run: &mut Run<'_>, suites: &[Suite]) -> anyhow::Result<()> {
    let suites: Vec<Suite> = if suites.is_empty() { run.cfg.verify.suites.clone() } else { suites.to_vec() };
    if suites.is_empty() {
        bail!("no verification suite selected");
    }
    for s in suites {
        match s {
            Suite::Kappa => verify_kappa(run)?,
            Suite::Consistency => verify_consistency(run)?,
            Suite::Reference => verify_reference(run)?,
            Suite::Convergence => {
                let table = study(run)?;
                write_convergence(run, &table)?;
            }
        }
    }
    Ok(())
}

fn verify_kappa(run: &mut Run<'_>) -> anyhow::Result<()> {
    let v = &run.cfg.verify;
    let seed = run.seed.unwrap_or(DEFAULT_MC_SEED);
    run.seeds.push(("kappa_mc".into(), seed));
    let header: Vec<String> =
        ["n", "closed_form", "mc_estimate", "mc_std_error", "abs_diff"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &n in &v.kappa_dims {
        let exact = kappa(n)?;
        let (mc, se) = kappa_monte_carlo(n, v.kappa_samples, seed.wrapping_add(n as u64))?;
        let diff = (mc - exact).abs();
        rows.push(vec![n.to_string(), num(exact), num(mc), num(se), num(diff)]);
        checks.push(Check::at_most(format!("kappa_mc_n{n}"), diff, v.kappa_tol));
        checks.push(Check::flag(format!("kappa_closed_form_n{n}"), exact * (n as f64 + 2.0) == 1.0));
    }
    run.dir.write_csv("kappa.csv", &header, &rows)?;
    run.checks.extend(checks);
    Ok(())
}

/// Quadratic pairs whose `φ` gradient at the probe `x = e_1 / 2` is nonzero
/// and lies along the first axis.
fn consistency_pairs(n: usize) -> Vec<(TestFunction, TestFunction)> {
    let quad = |diag: &dyn Fn(usize) -> f64, cross: f64, b: Vec<f64>, c: f64| {
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = diag(i);
        }
        if n > 1 {
            q[1] = cross;
            q[n] = cross;
        }
        TestFunction::Quadratic { q, b, c }
    };
    let mut b = vec![0.0; n];
    b[0] = 0.2;
    let mut first = vec![(TestFunction::half_norm_squared(n), quad(&|i| (i + 1) as f64, 0.0, b.clone(), 0.1))];
    if n > 1 {
        // cancel the cross term's pull on the second coordinate at the probe
        let mut b2 = vec![0.0; n];
        b2[1] = -0.25;
        first.push((quad(&|i| if i == 0 { 2.0 } else { 1.0 }, 0.5, b2, 0.0), quad(&|_| -1.0, 1.0, vec![0.0; n], 1.0)));
    }
    first
}

fn verify_consistency(run: &mut Run<'_>) -> anyhow::Result<()> {
    let n = run.cfg.domain.dim();
    let v = &run.cfg.verify;
    let mut probe = vec![0.0; n];
    probe[0] = 0.5;
    // the residual only uses the stencil shape, so any domain around the probe will do
    let host = Domain::ball(probe.clone(), 1.0)?;
    let header: Vec<String> = ["pair", "epsilon", "h", "r1", "r2"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (k, (phi, psi)) in consistency_pairs(n).iter().enumerate() {
        let mut prev: Option<(f64, f64, f64)> = None;
        for &eps in &v.consistency_epsilons {
            let lat = Lattice::build(&host, &PayoffData::constant(0.0), eps / 8.0, eps)?;
            let (r1, r2) = consistency_residual(phi, psi, &probe, eps, &lat)?;
            rows.push(vec![(k + 1).to_string(), num(eps), num(lat.h()), num(r1), num(r2)]);
            if let Some((pe, p1, p2)) = prev {
                let tag = format!("pair{}_eps{}_to_{}", k + 1, pe, eps);
                checks.push(Check::at_most(format!("{tag}_r1_ratio"), r1 / p1, v.consistency_ratio));
                checks.push(Check::at_most(format!("{tag}_r2_ratio"), r2 / p2, v.consistency_ratio));
            }
            prev = Some((eps, r1, r2));
        }
    }
    run.dir.write_csv("consistency.csv", &header, &rows)?;
    run.checks.extend(checks);
    Ok(())
}

fn verify_reference(run: &mut Run<'_>) -> anyhow::Result<()> {
    let cfg = run.cfg;
    let Domain::Interval { a, b } = cfg.domain else {
        bail!("the reference suite needs an interval domain");
    };
    let ends = |board: Board| (cfg.payoff.field(board).eval(&[a]), cfg.payoff.field(board).eval(&[b]));
    let (f, g) = (ends(Board::One), ends(Board::Two));
    let diffusion = limit_diffusion(&cfg.dpp, kappa(1)?)?;
    let r = solve_reference_1d_with((a, b), f, g, cfg.verify.reference_mesh, diffusion)?;
    let lo = f.0.min(f.1).min(g.0).min(g.1);
    let hi = f.0.max(f.1).max(g.0).max(g.1);
    let slack = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
    let bounded = r.u.iter().chain(&r.v).all(|x| *x >= lo - slack && *x <= hi + slack);
    let header: Vec<String> = ["x", "u", "v"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = (0..r.grid.len()).map(|i| vec![num(r.grid[i]), num(r.u[i]), num(r.v[i])]).collect();
    run.dir.write_csv("reference.csv", &header, &rows)?;
    run.checks.push(Check::at_most("reference_residual", r.residual, cfg.verify.reference_tol));
    run.checks.push(Check::flag("reference_maximum_principle", bounded));
    Ok(())
}

#[derive(Serialize)]
struct NSystemOutput {
    boards: usize,
    nodes: usize,
    iterations: usize,
    final_residual: f64,
    gap_up_down: Option<f64>,
    converged: bool,
}

pub fn n_system(run: &mut Run<'_>, tol: Option<f64>, max_iter: Option<usize>) -> anyhow::Result<()> {
    let sys = run.cfg.n_system.clone().context("the config has no [n_system] block")?;
    let lat = run.lattice()?;
    let opts = run.solve_options(tol, max_iter);
    let sol = solve_n_system(&lat, &sys, opts)?;
    let r = &sol.report;
    let out = NSystemOutput {
        boards: sys.boards.len(),
        nodes: lat.len(),
        iterations: r.iterations,
        final_residual: r.final_residual,
        gap_up_down: r.gap_up_down,
        converged: r.converged,
    };
    run.checks.push(Check::flag("converged", r.converged));
    run.checks.push(Check::at_most("final_residual", r.final_residual, 10.0 * opts.tol));
    if let Some(gap) = r.gap_up_down {
        run.checks.push(Check::at_most("gap_up_down", gap, 10.0 * opts.tol));
    }
    run.dir.write_json("report.json", &out)?;
    let labels: Vec<String> = (1..=sys.boards.len()).map(|k| format!("u{k}")).collect();
    let labels: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    let fields: Vec<&[f64]> = sol.fields.iter().map(|f| f.as_slice()).collect();
    run.write_node_table("values.csv", &lat, &labels, &fields)
}
