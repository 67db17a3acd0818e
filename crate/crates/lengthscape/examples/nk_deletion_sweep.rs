//! Deletion mutation: neutral for fitness, shrinking for length.
//!
//! Compares a 50/25/25 allele/add/delete mutation mix against the growth-only
//! 50/50 mix, then sweeps the deletion probability (with p_add fixed at 0.25
//! and the allele share absorbing the remainder) to show mean final length
//! falling monotonically as deletion pressure rises.
//!
//! Run with: cargo run --release --example nk_deletion_sweep

use lengthscape::nk::NkLandscape;
use lengthscape::rng::derive_seed;
use lengthscape::stats::{mean, sample_std, spearman_rho, welch_t_test};
use lengthscape::walk::{run_walk, WalkConfig, WalkTrace};

fn run_cell(k: usize, p_add: f64, p_delete: f64, master: u64, tag: u64) -> Vec<WalkTrace> {
    let mut traces = Vec::new();
    for land_rep in 0..10u64 {
        let land_seed = derive_seed(master, &[tag, k as u64, land_rep]);
        for start_rep in 0..10u64 {
            let mut l = NkLandscape::generate(20, k, land_seed).unwrap();
            let config = WalkConfig {
                generations: 20_000,
                g: 1,
                p_allele: 1.0 - p_add - p_delete,
                p_add,
                p_delete,
                seed: derive_seed(master, &[tag, k as u64, land_rep, start_rep]),
            };
            traces.push(run_walk(&mut l, &config).unwrap());
        }
    }
    traces
}

fn main() {
    let master: u64 = 271_828;
    println!("master seed: {master}, 100 walks per cell, N = 20, 20000 generations\n");

    println!("50/25/25 (allele/add/delete) vs growth-only 50/50:");
    println!(
        "{:>3} | {:>8} {:>8} {:>8} | {:>8} {:>8} | {:>9}",
        "K", "del fit", "del len", "", "grow fit", "grow len", "fit p"
    );
    for k in [0usize, 2, 8, 14] {
        let del = run_cell(k, 0.25, 0.25, master, 1);
        let grow = run_cell(k, 0.5, 0.0, master, 2);
        let fit = |ts: &[WalkTrace]| -> Vec<f64> { ts.iter().map(|t| t.final_fitness).collect() };
        let len = |ts: &[WalkTrace]| -> Vec<f64> {
            ts.iter().map(|t| t.final_length as f64).collect()
        };
        let p = welch_t_test(&fit(&del), &fit(&grow)).p;
        println!(
            "{:>3} | {:>8.4} {:>5.1}±{:<4.1} | {:>8.4} {:>5.1}±{:<4.1} | {:>9.3}",
            k,
            mean(&fit(&del)),
            mean(&len(&del)),
            sample_std(&len(&del)),
            mean(&fit(&grow)),
            mean(&len(&grow)),
            sample_std(&len(&grow)),
            p,
        );
    }

    println!("\nDeletion-probability sweep at K = 8 (p_add = 0.25):");
    let mut ps = Vec::new();
    let mut lens = Vec::new();
    for (i, &p_delete) in [0.0, 0.10, 0.20, 0.30, 0.40].iter().enumerate() {
        let traces = run_cell(8, 0.25, p_delete, master, 100 + i as u64);
        let cell_lens: Vec<f64> = traces.iter().map(|t| t.final_length as f64).collect();
        println!("  p_delete = {p_delete:.2}: mean len {:>5.2}", mean(&cell_lens));
        for l in cell_lens {
            ps.push(p_delete);
            lens.push(l);
        }
    }
    let rho = spearman_rho(&ps, &lens);
    println!("  Spearman rho(p_delete, final length) = {rho:.3}");
}
