//! Fixed-length adaptive walks: the two classic NK baselines.
//!
//! 1. With K = 0 each gene optimizes independently, so a long walk finds the
//!    global optimum and the mean optimal contribution approaches 0.66
//!    (the expected maximum of two uniforms is 2/3, minus a small
//!    finite-population correction).
//! 2. With large K relative to N, conflicting constraints drag reachable
//!    optima toward 0.5 — and the drag is *worse* for smaller N at the same
//!    K: the walk with N = 20, K = 15 ends significantly lower than
//!    N = 100, K = 15.
//!
//! Run with: cargo run --release --example nk_walk

use lengthscape::nk::NkLandscape;
use lengthscape::rng::derive_seed;
use lengthscape::stats::{mean_ci, welch_t_test};
use lengthscape::walk::{run_walk, WalkConfig};

fn cell(n: usize, k: usize, master: u64, replicates: usize, generations: u32) -> Vec<f64> {
    (0..replicates)
        .map(|rep| {
            let land_seed = derive_seed(master, &[n as u64, k as u64, rep as u64, 0]);
            let walk_seed = derive_seed(master, &[n as u64, k as u64, rep as u64, 1]);
            let mut l = NkLandscape::generate(n, k, land_seed).unwrap();
            run_walk(&mut l, &WalkConfig::fixed_length(generations, walk_seed))
                .unwrap()
                .final_fitness
        })
        .collect()
}

fn main() {
    let master: u64 = 7;
    let replicates = 100;
    let generations = 20_000;

    println!("master seed: {master}, {replicates} replicates per cell\n");
    println!("K = 0 baseline (expect mean final fitness near 0.66):");
    for n in [20usize, 100] {
        let fits = cell(n, 0, master, replicates, generations);
        let ci = mean_ci(&fits, 0.95);
        println!("  N = {n:>3}: {:.4} ± {:.4} (95% CI)", ci.mean, ci.half_width);
    }

    println!("\nHigh epistasis, K = 15 (smaller N fares worse):");
    let small = cell(20, 15, master, replicates, generations);
    let large = cell(100, 15, master, replicates, generations);
    let ci_s = mean_ci(&small, 0.95);
    let ci_l = mean_ci(&large, 0.95);
    let test = welch_t_test(&small, &large);
    println!("  N =  20: {:.4} ± {:.4}", ci_s.mean, ci_s.half_width);
    println!("  N = 100: {:.4} ± {:.4}", ci_l.mean, ci_l.half_width);
    println!(
        "  Welch t = {:.2}, p = {:.2e} ({})",
        test.t,
        test.p,
        if test.p < 0.05 && ci_s.mean < ci_l.mean {
            "N = 20 significantly lower"
        } else {
            "no significant separation"
        }
    );
}
