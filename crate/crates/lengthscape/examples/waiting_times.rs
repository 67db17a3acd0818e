//! Growth-block size and the timing of gene acceptance.
//!
//! Compares G = 1 (one gene per growth event) against G = 20 (a whole block
//! at once) across epistasis levels: when the first addition lands, how long
//! the genome ends up, and what fitness the walk reaches. A block insertion
//! is absorbed through the same neutral-pin mechanism as a single gene, so
//! the first acceptance epoch barely depends on G — but a 20-gene block
//! brings far more adaptive raw material, which pays off at high K.
//!
//! Run with: cargo run --release --example waiting_times

use lengthscape::nk::NkLandscape;
use lengthscape::rng::derive_seed;
use lengthscape::stats::{mean, welch_t_test};
use lengthscape::walk::{run_walk, waiting_time_samples, WalkConfig, WalkTrace};

fn run_cell(k: usize, g: usize, master: u64) -> Vec<WalkTrace> {
    let mut traces = Vec::new();
    for land_rep in 0..10u64 {
        let land_seed = derive_seed(master, &[g as u64, k as u64, land_rep]);
        for start_rep in 0..10u64 {
            let mut l = NkLandscape::generate(20, k, land_seed).unwrap();
            let walk_seed = derive_seed(master, &[g as u64, k as u64, land_rep, start_rep]);
            traces.push(run_walk(&mut l, &WalkConfig::growth(20_000, g, walk_seed)).unwrap());
        }
    }
    traces
}

fn main() {
    let master: u64 = 31_415;
    println!("master seed: {master}, 100 walks per cell, N = 20\n");
    println!(
        "{:>3} | {:>24} | {:>24} | {:>10}",
        "K", "G=1 first-add len fit", "G=20 first-add len fit", "fit p"
    );
    for k in [2usize, 5, 8, 11, 14] {
        let g1 = run_cell(k, 1, master);
        let g20 = run_cell(k, 20, master);
        let first = |ts: &[WalkTrace]| {
            let s = waiting_time_samples(ts, 1);
            (mean(&s), s.len())
        };
        let fits = |ts: &[WalkTrace]| -> Vec<f64> { ts.iter().map(|t| t.final_fitness).collect() };
        let lens = |ts: &[WalkTrace]| -> Vec<f64> {
            ts.iter().map(|t| t.final_length as f64).collect()
        };
        let (w1, r1) = first(&g1);
        let (w20, r20) = first(&g20);
        let f1 = fits(&g1);
        let f20 = fits(&g20);
        let test = welch_t_test(&f20, &f1);
        println!(
            "{:>3} | {:>5.0} ({:>3}) {:>5.1} {:.4} | {:>5.0} ({:>3}) {:>5.1} {:.4} | {:>10.2e}",
            k,
            w1,
            r1,
            mean(&lens(&g1)),
            mean(&f1),
            w20,
            r20,
            mean(&lens(&g20)),
            mean(&f20),
            test.p
        );
    }
    println!("\n(first-add = mean generation of the first accepted growth event,");
    println!(" with how many of the 100 walks accepted one; fit p = Welch p-value");
    println!(" for the G=20 vs G=1 final-fitness difference)");
}
