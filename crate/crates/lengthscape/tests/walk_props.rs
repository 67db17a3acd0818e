//! Behavioral tests for adaptive walks: monotonicity under fixed length,
//! convergence to local optima on small landscapes, determinism, and the
//! bookkeeping of growth/deletion traces.

use lengthscape::nk::{Genome, NkLandscape};
use lengthscape::walk::{
    accept, run_walk, waiting_time_stats, WalkConfig, WalkConfigError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fixed_length_fitness_never_decreases() {
    for seed in 0..20 {
        let mut l = NkLandscape::generate(15, 3, seed).unwrap();
        let trace = run_walk(&mut l, &WalkConfig::fixed_length(2000, seed ^ 0xA5)).unwrap();
        let mut prev = trace.initial_fitness;
        for &f in &trace.fitness_series {
            assert!(f >= prev, "fitness decreased: {prev} -> {f}");
            prev = f;
        }
        assert_eq!(trace.final_length, 15);
        assert!(trace.accepted_growth_generations.is_empty());
    }
}

#[test]
fn converged_fixed_walks_end_at_local_optima() {
    // 1000 random small landscapes; every converged endpoint must be a local
    // optimum (or an equal-fitness plateau point, which accept() can reach
    // via coin-flip ties). For k = 0 the endpoint must be the global optimum.
    let mut failures = 0;
    for i in 0usize..1000 {
        let n = 2 + (i % 3); // n in {2,3,4}
        let k = (i / 7) % n; // k < n
        let seed = 10_000 + i as u64;
        let mut l = NkLandscape::generate(n, k, seed).unwrap();
        let trace = run_walk(&mut l, &WalkConfig::fixed_length(400, seed ^ 0xF00)).unwrap();
        let genome = best_endpoint(&l, &trace, seed);
        let at_optimum = l.is_local_optimum(&genome).unwrap();
        let on_plateau = plateau_within_one_flip(&l, &genome);
        if !(at_optimum || on_plateau) {
            failures += 1;
        }
        if k == 0 {
            let (_, f_opt) = l.brute_force_optimum().unwrap();
            assert!(
                trace.final_fitness == f_opt,
                "k=0 walk missed global optimum: {} vs {f_opt} (i={i})",
                trace.final_fitness
            );
        }
    }
    assert_eq!(failures, 0);
}

/// Reconstruct the endpoint genome by replaying the walk (traces do not
/// store genomes; replay is exact because walks are deterministic).
fn best_endpoint(l: &NkLandscape, trace: &lengthscape::walk::WalkTrace, seed: u64) -> Genome {
    let mut l2 = NkLandscape::generate(l.n0(), l.k(), l.seed()).unwrap();
    let config = WalkConfig::fixed_length(400, seed ^ 0xF00);
    let trace2 = run_walk(&mut l2, &config).unwrap();
    assert_eq!(trace2.final_fitness, trace.final_fitness);
    // Re-run the RNG stream to regenerate the endpoint.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut genome = Genome::random(l.len(), &mut rng);
    let mut fitness = l.evaluate(&genome).unwrap();
    for _ in 0..400 {
        let _class: f64 = rand::Rng::gen(&mut rng);
        let pos = rand::Rng::gen_range(&mut rng, 0..genome.len());
        genome.flip(pos);
        let mutant = l.evaluate(&genome).unwrap();
        if accept(fitness, mutant, &mut rng) {
            fitness = mutant;
        } else {
            genome.flip(pos);
        }
    }
    assert_eq!(fitness, trace.final_fitness);
    genome
}

/// True when some single flip leaves fitness exactly equal (plateau edge).
fn plateau_within_one_flip(l: &NkLandscape, genome: &Genome) -> bool {
    let base = l.evaluate(genome).unwrap();
    let mut probe = genome.clone();
    for i in 0..genome.len() {
        probe.flip(i);
        let f = l.evaluate(&probe).unwrap();
        probe.flip(i);
        if f == base {
            return true;
        }
    }
    false
}

#[test]
fn walks_are_deterministic() {
    let config = WalkConfig::growth(3000, 1, 77);
    let mut a = NkLandscape::generate(20, 5, 4).unwrap();
    let mut b = NkLandscape::generate(20, 5, 4).unwrap();
    let ta = run_walk(&mut a, &config).unwrap();
    let tb = run_walk(&mut b, &config).unwrap();
    assert_eq!(ta.fitness_series, tb.fitness_series);
    assert_eq!(ta.length_series, tb.length_series);
    assert_eq!(ta.accepted_growth_generations, tb.accepted_growth_generations);
    assert_eq!(a, b);
}

#[test]
fn growth_walk_length_matches_trace() {
    let mut l = NkLandscape::generate(20, 2, 9).unwrap();
    let trace = run_walk(&mut l, &WalkConfig::growth(5000, 1, 12)).unwrap();
    assert_eq!(l.len() as u32, trace.final_length);
    assert_eq!(
        trace.final_length as usize,
        20 + trace.accepted_growth_generations.len()
    );
    // Length series is consistent with the acceptance log.
    let mut expect = 20u32;
    let mut next_growth = trace.accepted_growth_generations.iter().peekable();
    for (gen0, &len) in trace.length_series.iter().enumerate() {
        let gen = gen0 as u32 + 1;
        if next_growth.peek() == Some(&&gen) {
            expect += 1;
            next_growth.next();
        }
        assert_eq!(len, expect, "length series mismatch at generation {gen}");
    }
}

#[test]
fn growth_deletion_walk_preserves_undo_consistency() {
    // After a 50/25/25 walk, unwinding the surviving blocks restores the
    // original 20-gene landscape bit-exactly.
    for seed in 0..5 {
        let mut l = NkLandscape::generate(20, 8, seed).unwrap();
        let pristine = l.clone();
        let trace = run_walk(&mut l, &WalkConfig::growth_deletion(5000, 1, seed ^ 0xBEEF)).unwrap();
        assert_eq!(l.len() as u32, trace.final_length);
        // Every accepted growth event advances the lineage counter, and
        // neither rejected proposals nor later deletions roll it back.
        assert_eq!(
            l.fixed_growth_events(),
            trace.accepted_growth_generations.len() as u64
        );
        let mut genome = Genome::zeros(l.len());
        while l.remove_last_block(&mut genome).is_some() {}
        assert_eq!(l, pristine);
    }
}

#[test]
fn deletion_with_empty_history_consumes_generation() {
    // A deletion-only walk on a fresh landscape can never change anything.
    let mut l = NkLandscape::generate(10, 2, 3).unwrap();
    let config = WalkConfig {
        generations: 100,
        g: 1,
        p_allele: 0.0,
        p_add: 0.0,
        p_delete: 1.0,
        seed: 5,
    };
    let trace = run_walk(&mut l, &config).unwrap();
    assert_eq!(trace.final_length, 10);
    assert_eq!(trace.final_fitness, trace.initial_fitness);
    assert_eq!(trace.fitness_series.len(), 100);
}

#[test]
fn accept_rule_is_strict_improvement_with_coin_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(accept(0.5, 0.6, &mut rng));
    assert!(!accept(0.6, 0.5, &mut rng));
    // Exact ties: close to half accepted.
    let accepted = (0..10_000).filter(|_| accept(0.5, 0.5, &mut rng)).count();
    assert!((4_700..=5_300).contains(&accepted), "tie rate {accepted}");
}

#[test]
fn waiting_time_stats_handle_partial_reaching() {
    let mut l1 = NkLandscape::generate(20, 2, 0).unwrap();
    let mut l2 = NkLandscape::generate(20, 2, 1).unwrap();
    let t1 = run_walk(&mut l1, &WalkConfig::growth(2000, 1, 2)).unwrap();
    let t2 = run_walk(&mut l2, &WalkConfig::growth(2000, 1, 3)).unwrap();
    let traces = vec![t1, t2];
    let w1 = waiting_time_stats(&traces, 1);
    assert!(w1.reached <= 2);
    if w1.reached > 0 {
        assert!(w1.mean_generation.unwrap() >= 1.0);
    }
    // An ordinal no run reached.
    let w99 = waiting_time_stats(&traces, 99);
    assert_eq!(w99.reached, 0);
    assert!(w99.mean_generation.is_none());
}

#[test]
fn config_validation_catches_errors() {
    let mut c = WalkConfig::growth(10, 1, 0);
    c.p_add = 0.7;
    assert_eq!(c.validate(), Err(WalkConfigError::BadSum { sum: 1.2 }));
    let mut c = WalkConfig::fixed_length(10, 0);
    c.p_allele = -0.2;
    assert_eq!(c.validate(), Err(WalkConfigError::NegativeProbability));
    let c = WalkConfig {
        generations: 10,
        g: 0,
        p_allele: 0.5,
        p_add: 0.5,
        p_delete: 0.0,
        seed: 0,
    };
    assert_eq!(c.validate(), Err(WalkConfigError::LengthMutationWithoutG));
}
