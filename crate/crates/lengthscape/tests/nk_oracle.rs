//! Oracle tests for the NK core: an independent re-implementation of the
//! fitness function, exhaustive enumeration cross-checks, bit-exact undo of
//! growth blocks, and serialization round-trips.

use lengthscape::nk::{Genome, NkError, NkLandscape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent fitness computation: materialize every table entry up front
/// through the public accessors, then evaluate by explicit index assembly.
/// Any disagreement with `evaluate` flags an indexing or laziness bug.
fn oracle_fitness(l: &NkLandscape, genome: &Genome) -> f64 {
    let n = l.len();
    let k = l.k();
    let mut sum = 0.0;
    for gene in 0..n {
        let mut index = 0u64;
        index |= genome.allele(gene) as u64;
        for (j, &target) in l.links(gene).iter().enumerate() {
            index |= (genome.allele(target as usize) as u64) << (j + 1);
        }
        assert!(index < (1u64 << (k + 1)));
        sum += l.table_entry(gene, index);
    }
    sum / n as f64
}

#[test]
fn evaluate_agrees_with_oracle_exhaustively() {
    // Every genome of every small landscape, multiple K values.
    for &(n, k) in &[(1usize, 0usize), (3, 0), (3, 2), (5, 1), (5, 4), (8, 3)] {
        for seed in 0..20 {
            let l = NkLandscape::generate(n, k, seed).unwrap();
            for bits in 0u64..(1 << n) {
                let alleles: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
                let genome = Genome::from_bits(&alleles);
                let got = l.evaluate(&genome).unwrap();
                let want = oracle_fitness(&l, &genome);
                assert_eq!(got, want, "n={n} k={k} seed={seed} bits={bits:b}");
            }
        }
    }
}

#[test]
fn fitness_is_mean_of_contributions() {
    let l = NkLandscape::generate(12, 5, 99).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let g = Genome::random(12, &mut rng);
        let f = l.evaluate(&g).unwrap();
        let mean: f64 = (0..12).map(|i| l.contribution(i, &g)).sum::<f64>() / 12.0;
        assert_eq!(f, mean);
    }
}

#[test]
fn table_entries_lie_in_unit_interval() {
    let l = NkLandscape::generate(6, 5, 1234).unwrap();
    for gene in 0..6 {
        for index in 0..(1u64 << 6) {
            let v = l.table_entry(gene, index);
            assert!((0.0..1.0).contains(&v), "entry {v} outside [0,1)");
        }
    }
}

#[test]
fn generation_is_deterministic_and_seed_sensitive() {
    let a = NkLandscape::generate(20, 5, 42).unwrap();
    let b = NkLandscape::generate(20, 5, 42).unwrap();
    let c = NkLandscape::generate(20, 5, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn links_are_distinct_and_exclude_self() {
    for &(n, k) in &[(20usize, 0usize), (20, 1), (20, 10), (20, 19), (16, 15)] {
        let l = NkLandscape::generate(n, k, 5).unwrap();
        for gene in 0..n {
            let links = l.links(gene);
            assert_eq!(links.len(), k);
            let mut seen = std::collections::HashSet::new();
            for &t in links {
                assert_ne!(t as usize, gene, "self-link at gene {gene}");
                assert!((t as usize) < n);
                assert!(seen.insert(t), "duplicate link at gene {gene}");
            }
        }
    }
}

#[test]
fn k_bounds_are_enforced() {
    assert!(matches!(
        NkLandscape::generate(20, 20, 0),
        Err(NkError::KTooLarge { .. })
    ));
    assert!(NkLandscape::generate(20, 19, 0).is_ok());
    assert!(matches!(
        NkLandscape::generate(1, 1, 0),
        Err(NkError::KTooLarge { .. })
    ));
    assert!(NkLandscape::generate(1, 0, 0).is_ok());
}

#[test]
fn evaluate_rejects_length_mismatch() {
    let l = NkLandscape::generate(10, 2, 0).unwrap();
    let g = Genome::zeros(9);
    assert!(matches!(
        l.evaluate(&g),
        Err(NkError::LengthMismatch { genome: 9, landscape: 10 })
    ));
}

#[test]
fn added_genes_link_over_extended_genome_and_rewires_point_at_newcomers() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in [1usize, 3, 7] {
        let mut l = NkLandscape::generate(10, k, 21).unwrap();
        let mut genome = Genome::random(10, &mut rng);
        let before_links: Vec<Vec<u32>> = (0..10).map(|i| l.links(i).to_vec()).collect();
        l.add_genes(&mut genome, 3, &mut rng).unwrap();
        assert_eq!(l.len(), 13);
        assert_eq!(genome.len(), 13);
        // New genes may target anything in 0..13 except themselves.
        for gene in 10..13 {
            let links = l.links(gene);
            assert_eq!(links.len(), k);
            for &t in links {
                assert_ne!(t as usize, gene);
                assert!((t as usize) < 13);
            }
        }
        // Exactly one first-link change per new gene, targeting that gene.
        let mut retargeted = 0;
        for i in 0..10 {
            let now = l.links(i);
            if now != before_links[i].as_slice() {
                assert_eq!(now[1..], before_links[i][1..], "only first link may move");
                assert!((10..13).contains(&(now[0] as usize)));
                retargeted += 1;
            }
        }
        // A gene can be picked twice (second pick overwrites), so the count
        // of changed genes is at most the block size.
        assert!(retargeted >= 1 && retargeted <= 3, "retargeted = {retargeted}");
        let hist = l.history();
        assert_eq!(hist.len(), 1);
        assert_eq!(hist[0].rewires.len(), 3);
        for (i, r) in hist[0].rewires.iter().enumerate() {
            assert!((r.gene as usize) < 10);
            // Rewire i redirected its gene's first link to new gene 10 + i at
            // the time of application.
            let _ = i;
        }
    }
}

#[test]
fn k0_growth_has_no_rewires() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut l = NkLandscape::generate(6, 0, 0).unwrap();
    let mut genome = Genome::random(6, &mut rng);
    l.add_genes(&mut genome, 2, &mut rng).unwrap();
    assert_eq!(l.history()[0].rewires.len(), 0);
}

#[test]
fn new_gene_is_fitness_neutral_at_insertion_when_unclamped() {
    // With k = 0 there is no rewiring disturbance, so whenever the parent
    // fitness is inside the pin range the whole event is an exact tie up to
    // the final rounding of the mean.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    for seed in 0..200 {
        let mut l = NkLandscape::generate(12, 0, seed).unwrap();
        let mut genome = Genome::random(12, &mut rng);
        let before = l.evaluate(&genome).unwrap();
        l.add_genes(&mut genome, 1, &mut rng).unwrap();
        let after = l.evaluate(&genome).unwrap();
        if let Some(pin) = l.pinned(12) {
            if pin.value > 0.0 && pin.value < 0.5 {
                // Unclamped: mean must be preserved to rounding error.
                assert!(
                    (after - before).abs() < 1e-12,
                    "seed {seed}: {before} -> {after}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 50, "too few unclamped events to be meaningful");
}

#[test]
fn undo_restores_bit_exact_state_10k() {
    // Randomized add/remove stress: 10_000 operations across many
    // landscapes; every full unwind must restore the generated state and
    // fitness bit-exactly.
    let mut rng = ChaCha8Rng::seed_from_u64(0xDEADBEEF);
    let mut ops = 0usize;
    let mut sequence = 0u64;
    while ops < 10_000 {
        let n = rng.gen_range(4..16);
        let k = rng.gen_range(0..n.min(8));
        let mut l = NkLandscape::generate(n, k, 0x5EED + sequence).unwrap();
        sequence += 1;
        let mut genome = Genome::random(n, &mut rng);
        let pristine_l = l.clone();
        let pristine_g = genome.clone();
        let pristine_f = l.evaluate(&genome).unwrap();

        // Random walk over the undo stack.
        let mut depth = 0usize;
        for _ in 0..rng.gen_range(1..40) {
            if depth == 0 || rng.gen_bool(0.6) {
                let g = rng.gen_range(1..4);
                l.add_genes(&mut genome, g, &mut rng).unwrap();
                depth += 1;
            } else {
                let block = l.remove_last_block(&mut genome).unwrap();
                if rng.gen_bool(0.3) {
                    // Exercise the restore path too.
                    l.restore_block(&mut genome, block);
                } else {
                    depth -= 1;
                }
            }
            ops += 1;
        }
        // Full unwind.
        while l.remove_last_block(&mut genome).is_some() {}
        assert_eq!(l, pristine_l, "landscape drifted (sequence {sequence})");
        assert_eq!(genome, pristine_g, "genome drifted (sequence {sequence})");
        let f = l.evaluate(&genome).unwrap();
        assert!(
            f == pristine_f,
            "fitness drifted: {pristine_f} -> {f} (sequence {sequence})"
        );
    }
}

#[test]
fn remove_on_empty_history_is_noop() {
    let mut l = NkLandscape::generate(8, 2, 1).unwrap();
    let mut genome = Genome::zeros(8);
    let before = l.clone();
    assert!(l.remove_last_block(&mut genome).is_none());
    assert_eq!(l, before);
    assert_eq!(genome.len(), 8);
}

#[test]
fn restore_after_remove_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut l = NkLandscape::generate(10, 4, 77).unwrap();
    let mut genome = Genome::random(10, &mut rng);
    l.add_genes(&mut genome, 2, &mut rng).unwrap();
    l.add_genes(&mut genome, 1, &mut rng).unwrap();
    let snap_l = l.clone();
    let snap_g = genome.clone();
    let block = l.remove_last_block(&mut genome).unwrap();
    assert_eq!(l.len(), 12);
    l.restore_block(&mut genome, block);
    assert_eq!(l, snap_l);
    assert_eq!(genome, snap_g);
}

#[test]
fn brute_force_optimum_is_global_and_local() {
    for seed in 0..10 {
        let l = NkLandscape::generate(8, 3, seed).unwrap();
        let (opt, f_opt) = l.brute_force_optimum().unwrap();
        assert_eq!(l.evaluate(&opt).unwrap(), f_opt);
        assert!(l.is_local_optimum(&opt).unwrap());
        // No enumerated genome beats it.
        for bits in 0u64..(1 << 8) {
            let alleles: Vec<u8> = (0..8).map(|i| ((bits >> i) & 1) as u8).collect();
            let f = l.evaluate(&Genome::from_bits(&alleles)).unwrap();
            assert!(f <= f_opt);
        }
    }
}

#[test]
fn k0_optimum_is_independent_per_gene() {
    // With no epistasis the global optimum simply picks each gene's better
    // allele; verify against the brute force result.
    for seed in 0..20 {
        let l = NkLandscape::generate(10, 0, seed).unwrap();
        let (opt, f_opt) = l.brute_force_optimum().unwrap();
        let mut expect = Vec::new();
        for gene in 0..10 {
            let f0 = l.table_entry(gene, 0);
            let f1 = l.table_entry(gene, 1);
            expect.push(if f1 > f0 { 1u8 } else { 0u8 });
        }
        let best = Genome::from_bits(&expect);
        assert_eq!(l.evaluate(&best).unwrap(), f_opt);
        let _ = opt;
    }
}

#[test]
fn serialization_round_trips_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut l = NkLandscape::generate(15, 6, 909).unwrap();
    let mut genome = Genome::random(15, &mut rng);
    l.add_genes(&mut genome, 2, &mut rng).unwrap();
    l.commit_growth();
    l.add_genes(&mut genome, 3, &mut rng).unwrap();
    l.commit_growth();

    let mut buf = Vec::new();
    l.save(&mut buf).unwrap();
    let back = NkLandscape::load(&mut buf.as_slice()).unwrap();
    assert_eq!(l, back);
    assert_eq!(l.fixed_growth_events(), back.fixed_growth_events());
    // Same fitness for a shared genome, entry-for-entry equal tables.
    let f_a = l.evaluate(&genome).unwrap();
    let f_b = back.evaluate(&genome).unwrap();
    assert!(f_a == f_b);
    for gene in 0..l.len() {
        for index in 0..(1u64 << 7) {
            assert!(l.table_entry(gene, index) == back.table_entry(gene, index));
        }
    }
}

#[test]
fn deserialization_rejects_garbage() {
    assert!(NkLandscape::load(&mut &b"NOPE"[..]).is_err());
    let mut valid = Vec::new();
    NkLandscape::generate(5, 1, 0)
        .unwrap()
        .save(&mut valid)
        .unwrap();
    // Truncations must error, not panic.
    for cut in 0..valid.len() {
        assert!(NkLandscape::load(&mut &valid[..cut]).is_err());
    }
}
