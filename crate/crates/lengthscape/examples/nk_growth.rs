//! Genome growth across epistasis levels.
//!
//! Runs 20000-generation adaptive walks from 20-gene landscapes with growth
//! mutation enabled (G = 1, mutation mix 50% allele / 50% add) for a range
//! of K, and prints how far each cell grew, the fitness it reached, and the
//! mean generation at which the first three gene additions were accepted.
//!
//! Replicate protocol: 10 landscapes x 10 walks per cell, all seeds derived
//! from one master seed.
//!
//! Run with: cargo run --release --example nk_growth

use lengthscape::nk::NkLandscape;
use lengthscape::rng::derive_seed;
use lengthscape::stats::{mean, sample_std, welch_t_test};
use lengthscape::walk::{run_walk, waiting_time_samples, waiting_time_stats, WalkConfig, WalkTrace};

fn main() {
    let master: u64 = 20_220_818;
    let n = 20;
    let generations = 20_000;
    let ks = [0usize, 2, 5, 8, 11, 14];

    println!("master seed: {master}");
    println!(
        "{:>3} {:>12} {:>8} {:>14} {:>14} {:>14}",
        "K", "final len", "fitness", "gene1 @gen", "gene2 @gen", "gene3 @gen"
    );
    let mut per_k_samples: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
    for &k in &ks {
        let mut traces: Vec<WalkTrace> = Vec::new();
        for landscape_rep in 0..10u64 {
            let land_seed = derive_seed(master, &[k as u64, landscape_rep]);
            for start_rep in 0..10u64 {
                let mut l = NkLandscape::generate(n, k, land_seed).unwrap();
                let walk_seed = derive_seed(master, &[k as u64, landscape_rep, start_rep]);
                let config = WalkConfig::growth(generations, 1, walk_seed);
                traces.push(run_walk(&mut l, &config).unwrap());
            }
        }
        let lens: Vec<f64> = traces.iter().map(|t| t.final_length as f64).collect();
        let fits: Vec<f64> = traces.iter().map(|t| t.final_fitness).collect();
        let w: Vec<String> = (1..=3)
            .map(|j| {
                let s = waiting_time_stats(&traces, j);
                match s.mean_generation {
                    Some(m) => format!("{m:7.0} ({:>3})", s.reached),
                    None => format!("{:>7} ({:>3})", "-", 0),
                }
            })
            .collect();
        println!(
            "{:>3} {:>6.1} ±{:>4.1} {:>8.4} {:>14} {:>14} {:>14}",
            k,
            mean(&lens),
            sample_std(&lens),
            mean(&fits),
            w[0],
            w[1],
            w[2]
        );
        if k > 0 {
            per_k_samples.push((
                k,
                waiting_time_samples(&traces, 1),
                waiting_time_samples(&traces, 2),
            ));
        }
    }

    // K-dependence of the first two waiting times: Welch tests against the
    // K=2 cell (reference), per gene.
    println!("\nwaiting-time K-dependence vs K=2 (Welch p):");
    let reference = per_k_samples[0].clone();
    for (k, g1, g2) in per_k_samples.iter().skip(1) {
        let p1 = welch_t_test(&reference.1, g1).p;
        let p2 = welch_t_test(&reference.2, g2).p;
        println!(
            "  K={k:>2}: gene1 {:.0}/{:.0} p={p1:.4}   gene2 {:.0}/{:.0} p={p2:.4}",
            mean(&reference.1),
            mean(g1),
            mean(&reference.2),
            mean(g2),
        );
    }
}
