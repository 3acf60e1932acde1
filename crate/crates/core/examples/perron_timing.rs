//! Times the two-seed Perron solve on the unit interval or disk.
//!
//! cargo run --release -p tow-core --example perron_timing -- [1|2] [eps] [eps/h]

use std::time::Instant;

use tow_core::solver::{solve_perron, DppParams, SolveOptions};
use tow_core::{Domain, Field, Lattice, PayoffData};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dim: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let eps: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let ratio: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(8.0);
    let domain = if dim == 2 { Domain::ball(vec![0.0, 0.0], 1.0) } else { Domain::interval(0.0, 1.0) }.unwrap();
    let mut c = vec![0.0; dim];
    c[0] = 1.0;
    let payoff = PayoffData::new(Field::linear(c, 0.0), Field::constant(0.0));

    let t = Instant::now();
    let lat = Lattice::build(&domain, &payoff, eps / ratio, eps).unwrap();
    println!("lattice: {} nodes, {} interior, {:?}", lat.len(), lat.interior_nodes().len(), t.elapsed());
    let t = Instant::now();
    let s = solve_perron(&lat, &DppParams::default(), SolveOptions::default()).unwrap();
    println!(
        "perron: {} + {} iterations, gap {:.2e}, {:?}",
        s.lower_report.iterations,
        s.upper_report.iterations,
        s.gap,
        t.elapsed()
    );
}
