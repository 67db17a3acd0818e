//! Adaptive walks: population-of-one hill climbing over an [`NkLandscape`].
//!
//! Each generation draws one mutation — an allele flip, a growth event
//! appending a block of `g` genes, or a deletion removing the most recent
//! surviving block — builds the mutant, and keeps it iff strictly fitter
//! (equal fitness survives a coin flip). Rejected growth and deletion are
//! rolled back bit-exactly, so a walk's landscape state is always a pure
//! function of its seeds.

use crate::nk::{Genome, NkError, NkLandscape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Walk parameters. `p_allele + p_add + p_delete` must equal 1.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct WalkConfig {
    /// Number of mutation-selection steps.
    pub generations: u32,
    /// Genes appended per growth event; 0 disables length mutation entirely.
    pub g: usize,
    pub p_allele: f64,
    pub p_add: f64,
    pub p_delete: f64,
    /// Seed for this walk's mutation stream and its random start genome.
    pub seed: u64,
}

impl WalkConfig {
    /// Fixed-length walk: allele mutation only.
    pub fn fixed_length(generations: u32, seed: u64) -> Self {
        WalkConfig {
            generations,
            g: 0,
            p_allele: 1.0,
            p_add: 0.0,
            p_delete: 0.0,
            seed,
        }
    }

    /// Growth-only walk: equal chance of allele mutation and adding a block.
    pub fn growth(generations: u32, g: usize, seed: u64) -> Self {
        WalkConfig {
            generations,
            g,
            p_allele: 0.5,
            p_add: 0.5,
            p_delete: 0.0,
            seed,
        }
    }

    /// Growth and deletion: 50% allele flip, 25% add, 25% delete.
    pub fn growth_deletion(generations: u32, g: usize, seed: u64) -> Self {
        WalkConfig {
            generations,
            g,
            p_allele: 0.5,
            p_add: 0.25,
            p_delete: 0.25,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), WalkConfigError> {
        if self.p_allele < 0.0 || self.p_add < 0.0 || self.p_delete < 0.0 {
            return Err(WalkConfigError::NegativeProbability);
        }
        let sum = self.p_allele + self.p_add + self.p_delete;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(WalkConfigError::BadSum { sum });
        }
        if self.g == 0 && (self.p_add > 0.0 || self.p_delete > 0.0) {
            return Err(WalkConfigError::LengthMutationWithoutG);
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WalkConfigError {
    #[error("mutation probabilities must be nonnegative")]
    NegativeProbability,
    #[error("mutation probabilities sum to {sum}, expected 1.0")]
    BadSum { sum: f64 },
    #[error("p_add/p_delete require g >= 1")]
    LengthMutationWithoutG,
}

/// Per-generation record of an adaptive walk plus derived statistics.
#[derive(Debug, Clone)]
pub struct WalkTrace {
    /// Accepted fitness after each generation (index 0 = after generation 1).
    pub fitness_series: Vec<f64>,
    /// Genome length after each generation.
    pub length_series: Vec<u32>,
    /// Generations at which a growth event was accepted, in order.
    pub accepted_growth_generations: Vec<u32>,
    /// Generation of the last accepted strictly-improving mutation.
    pub walk_length_to_optimum: u32,
    /// Generation of the last accepted length change (growth or deletion).
    pub length_stop_generation: u32,
    pub final_fitness: f64,
    pub final_length: u32,
    /// Fitness of the random start genome, before any mutation.
    pub initial_fitness: f64,
}

/// The uniform acceptance rule: keep the mutant iff strictly fitter, and on
/// an exact tie keep it with probability 1/2.
pub fn accept(current: f64, mutant: f64, rng: &mut impl Rng) -> bool {
    if mutant > current {
        true
    } else if mutant == current {
        rng.gen_bool(0.5)
    } else {
        false
    }
}

/// Flip one uniformly chosen allele; returns the flipped index.
pub fn allele_mutation(genome: &mut Genome, rng: &mut impl Rng) -> usize {
    let pos = rng.gen_range(0..genome.len());
    genome.flip(pos);
    pos
}

/// Run one adaptive walk. The landscape is mutated in place (growth blocks
/// may survive); pass a clone when the original must stay pristine.
///
/// Deterministic: identical `(landscape, config)` give bit-identical traces.
pub fn run_walk(landscape: &mut NkLandscape, config: &WalkConfig) -> Result<WalkTrace, NkError> {
    config.validate().expect("invalid walk config");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut genome = Genome::random(landscape.len(), &mut rng);
    let mut fitness = landscape.evaluate(&genome)?;
    let initial_fitness = fitness;

    let gens = config.generations as usize;
    let mut trace = WalkTrace {
        fitness_series: Vec::with_capacity(gens),
        length_series: Vec::with_capacity(gens),
        accepted_growth_generations: Vec::new(),
        walk_length_to_optimum: 0,
        length_stop_generation: 0,
        final_fitness: fitness,
        final_length: genome.len() as u32,
        initial_fitness,
    };

    for gen in 1..=config.generations {
        let class = rng.gen::<f64>();
        if class < config.p_allele {
            let pos = allele_mutation(&mut genome, &mut rng);
            let mutant = landscape.evaluate(&genome)?;
            if accept(fitness, mutant, &mut rng) {
                if mutant > fitness {
                    trace.walk_length_to_optimum = gen;
                }
                fitness = mutant;
            } else {
                genome.flip(pos);
            }
        } else if class < config.p_allele + config.p_add {
            landscape.add_genes(&mut genome, config.g, &mut rng)?;
            let mutant = landscape.evaluate(&genome)?;
            if accept(fitness, mutant, &mut rng) {
                landscape.commit_growth();
                if mutant > fitness {
                    trace.walk_length_to_optimum = gen;
                }
                fitness = mutant;
                trace.accepted_growth_generations.push(gen);
                trace.length_stop_generation = gen;
            } else {
                let block = landscape
                    .remove_last_block(&mut genome)
                    .expect("just-added block must be removable");
                debug_assert_eq!(block.genes_added(), config.g);
            }
        } else {
            // Deletion of the most recent surviving block; with no growth
            // history this is a rejected mutation event (generation consumed).
            if let Some(block) = landscape.remove_last_block(&mut genome) {
                let mutant = landscape.evaluate(&genome)?;
                if accept(fitness, mutant, &mut rng) {
                    if mutant > fitness {
                        trace.walk_length_to_optimum = gen;
                    }
                    fitness = mutant;
                    trace.length_stop_generation = gen;
                } else {
                    landscape.restore_block(&mut genome, block);
                }
            }
        }
        trace.fitness_series.push(fitness);
        trace.length_series.push(genome.len() as u32);
    }

    trace.final_fitness = fitness;
    trace.final_length = genome.len() as u32;
    Ok(trace)
}

/// Mean generation of the `j`-th accepted growth event (1-based) across
/// traces, with how many traces reached it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitingTime {
    /// `None` when no trace reached the j-th acceptance.
    pub mean_generation: Option<f64>,
    pub reached: usize,
}

/// Waiting-time statistic over a set of traces. `j` is 1-based; the mean is
/// taken over the traces in which the j-th growth acceptance occurred.
pub fn waiting_time_stats(traces: &[WalkTrace], j: usize) -> WaitingTime {
    assert!(j >= 1, "growth ordinal is 1-based");
    let gens: Vec<f64> = traces
        .iter()
        .filter_map(|t| t.accepted_growth_generations.get(j - 1))
        .map(|&g| g as f64)
        .collect();
    WaitingTime {
        mean_generation: if gens.is_empty() {
            None
        } else {
            Some(gens.iter().sum::<f64>() / gens.len() as f64)
        },
        reached: gens.len(),
    }
}

/// Per-trace samples of the `j`-th growth acceptance generation, for tests
/// that need the full distribution rather than the mean.
pub fn waiting_time_samples(traces: &[WalkTrace], j: usize) -> Vec<f64> {
    assert!(j >= 1, "growth ordinal is 1-based");
    traces
        .iter()
        .filter_map(|t| t.accepted_growth_generations.get(j - 1))
        .map(|&g| g as f64)
        .collect()
}
