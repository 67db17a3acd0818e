//! Steady-state genetic algorithm over [`Treatment`] genomes.
//!
//! The GA is deliberately small: population 20, binary tournaments for both
//! reproduction and (inverse) replacement, mutation as the only variation
//! operator, and a hard budget of counted fitness evaluations. Fitness is
//! the live tumor-cell count after a simulated treatment — lower is better —
//! and every evaluation is the mean of a fixed number of independent
//! simulation samples ("static sampling") to damp stochastic noise.
//!
//! Variable-length search enters through the mutation operator: with
//! probability [`GaConfig::p_add_type`] a mutation appends freshly random
//! worker types instead of nudging a parameter, so the genome (the set of
//! worker types) can grow toward the configured cap while the 50 injected
//! workers are re-split among the types.
//!
//! Budget accounting: the budget covers every evaluator invocation made by
//! the run — `population · samples` to score the initial population, then
//! `samples` per steady-state generation, so a budget of 1000 with the
//! default population of 20 and 5 samples buys 180 generations.
//! [`GaTrace::total_evals`] asserts the exact spend so downstream
//! experiments can verify budget honesty.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng::derive_seed;
use crate::tumor::{Treatment, NP_DESIGN_BOUNDS};

/// Everything that defines a GA run apart from the evaluator itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    /// Population size.
    pub population: usize,
    /// Tournament size for both selection and inverse replacement.
    pub tournament: usize,
    /// Total evaluator-invocation budget, covering initialization
    /// (population · samples) plus samples · generations.
    pub budget: u64,
    /// Simulation samples averaged per fitness evaluation.
    pub samples: u64,
    /// Mutation step as a fraction of each parameter's range.
    pub step_frac: f64,
    /// Probability that a mutation adds new random types instead of
    /// perturbing a parameter. Zero gives the fixed-length GA.
    pub p_add_type: f64,
    /// How many random types one add-mutation appends (1 or 2).
    pub types_per_add: usize,
    /// Hard cap on types per treatment; add-mutations at the cap are no-ops.
    pub max_types: usize,
    /// Master seed: drives initialization, mutation, and per-sample
    /// simulation seeds.
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 20,
            tournament: 2,
            budget: 1000,
            samples: 5,
            step_frac: 0.05,
            p_add_type: 0.0,
            types_per_add: 1,
            max_types: Treatment::MAX_TYPES,
            seed: 0,
        }
    }
}

/// Configuration errors reported before any evaluation is spent.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GaConfigError {
    #[error("population must be at least 2, got {0}")]
    PopulationTooSmall(usize),
    #[error("tournament size must be in 2..=population, got {0}")]
    BadTournament(usize),
    #[error("samples must be positive")]
    ZeroSamples,
    #[error("budget {budget} cannot cover initializing the population ({minimum} evaluations)")]
    BudgetTooSmall { budget: u64, minimum: u64 },
    #[error("budget {budget} is not initialization plus a whole number of generations (samples {samples})")]
    UnevenBudget { budget: u64, samples: u64 },
    #[error("step_frac must be in (0, 1], got {0}")]
    BadStep(f64),
    #[error("p_add_type must be in [0, 1], got {0}")]
    BadAddProbability(f64),
    #[error("types_per_add must be 1 or 2, got {0}")]
    BadTypesPerAdd(usize),
    #[error("max_types must be in 1..=10, got {0}")]
    BadMaxTypes(usize),
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaConfigError> {
        if self.population < 2 {
            return Err(GaConfigError::PopulationTooSmall(self.population));
        }
        if self.tournament < 2 || self.tournament > self.population {
            return Err(GaConfigError::BadTournament(self.tournament));
        }
        if self.samples == 0 {
            return Err(GaConfigError::ZeroSamples);
        }
        let setup = self.population as u64 * self.samples;
        if self.budget < setup {
            return Err(GaConfigError::BudgetTooSmall { budget: self.budget, minimum: setup });
        }
        if (self.budget - setup) % self.samples != 0 {
            return Err(GaConfigError::UnevenBudget { budget: self.budget, samples: self.samples });
        }
        if !(self.step_frac > 0.0 && self.step_frac <= 1.0) {
            return Err(GaConfigError::BadStep(self.step_frac));
        }
        if !(0.0..=1.0).contains(&self.p_add_type) {
            return Err(GaConfigError::BadAddProbability(self.p_add_type));
        }
        if !(1..=2).contains(&self.types_per_add) {
            return Err(GaConfigError::BadTypesPerAdd(self.types_per_add));
        }
        if self.max_types == 0 || self.max_types > Treatment::MAX_TYPES {
            return Err(GaConfigError::BadMaxTypes(self.max_types));
        }
        Ok(())
    }

    /// Steady-state generations the budget buys after initialization.
    pub fn generations(&self) -> u64 {
        (self.budget - self.population as u64 * self.samples) / self.samples
    }
}

/// A population member: genome plus its cached sampled fitness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Individual {
    pub treatment: Treatment,
    /// Mean of the per-sample fitness values at birth (lower is better).
    pub fitness: f64,
}

/// One row of the per-generation log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaGeneration {
    /// 0 for the initial population, then 1..=generations.
    pub generation: u64,
    /// Evaluator invocations spent so far, initialization included.
    pub evals_spent: u64,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Type count of the current best individual.
    pub best_types: usize,
    pub mean_types: f64,
    pub max_types: usize,
    /// Population composition: histogram over type counts, index t-1
    /// holding the number of individuals with t types.
    pub type_histogram: Vec<u32>,
    /// Whether this generation's offspring replaced a population member.
    pub replaced: bool,
}

/// Full run record: per-generation rows plus the budget audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaTrace {
    pub generations: Vec<GaGeneration>,
    /// Total evaluator invocations (asserted == config.budget).
    pub total_evals: u64,
    /// The slice of the budget spent scoring the initial population.
    pub setup_evals: u64,
}

/// Outcome of a GA run.
#[derive(Debug, Clone)]
pub struct GaResult {
    pub best: Individual,
    pub population: Vec<Individual>,
    pub trace: GaTrace,
}

/// Runs the steady-state GA. The evaluator maps (treatment, sample seed) to
/// one noisy fitness sample; the GA averages [`GaConfig::samples`] of them
/// per evaluation. Lower fitness is better.
///
/// Determinism: everything is driven by `config.seed`. The initial
/// population depends only on (seed, population), so runs that share a seed
/// share their starting point regardless of `p_add_type`.
pub fn run_ga(
    config: &GaConfig,
    mut eval_sample: impl FnMut(&Treatment, u64) -> f64,
) -> Result<GaResult, GaConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[1]));
    let mut invocations: u64 = 0;

    // Sampled fitness: `samples` independent runs, seeds derived from the
    // master seed and a global invocation index so no two samples anywhere
    // in the run share a simulation seed.
    let mut evaluate = |t: &Treatment, invocations: &mut u64| -> f64 {
        let mut acc = 0.0;
        for _ in 0..config.samples {
            let sample_seed = derive_seed(config.seed, &[2, *invocations]);
            acc += eval_sample(t, sample_seed);
            *invocations += 1;
        }
        acc / config.samples as f64
    };

    // Initial population: random single-type treatments (setup cost).
    let mut population: Vec<Individual> = (0..config.population)
        .map(|_| Treatment::random(1, &mut rng).expect("single-type treatment is always valid"))
        .collect::<Vec<_>>()
        .into_iter()
        .map(|treatment| {
            let fitness = evaluate(&treatment, &mut invocations);
            Individual { treatment, fitness }
        })
        .collect();
    let setup_evals = invocations;

    let mut trace = GaTrace {
        generations: Vec::with_capacity(config.generations() as usize + 1),
        total_evals: setup_evals,
        setup_evals,
    };
    trace.generations.push(snapshot(0, setup_evals, config.max_types, &population, false));

    for generation in 1..=config.generations() {
        let parent_idx = tournament_best(&population, config.tournament, &mut rng);
        let mut child = population[parent_idx].treatment.clone();
        mutate(&mut child, config, &mut rng);
        let fitness = evaluate(&child, &mut invocations);

        let victim_idx = tournament_worst(&population, config.tournament, &mut rng);
        let replaced = fitness < population[victim_idx].fitness;
        if replaced {
            population[victim_idx] = Individual { treatment: child, fitness };
        }
        trace.generations.push(snapshot(generation, invocations, config.max_types, &population, replaced));
    }

    trace.total_evals = invocations;
    assert_eq!(
        trace.total_evals, config.budget,
        "GA spent {} evaluator invocations against a budget of {}",
        trace.total_evals, config.budget
    );

    let best = population
        .iter()
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
        .expect("population is non-empty")
        .clone();
    Ok(GaResult { best, population, trace })
}

fn snapshot(
    generation: u64,
    evals_spent: u64,
    cap: usize,
    population: &[Individual],
    replaced: bool,
) -> GaGeneration {
    let best = population
        .iter()
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
        .expect("population is non-empty");
    let mean_fitness = population.iter().map(|i| i.fitness).sum::<f64>() / population.len() as f64;
    let mean_types = population.iter().map(|i| i.treatment.type_count() as f64).sum::<f64>()
        / population.len() as f64;
    let max_types = population.iter().map(|i| i.treatment.type_count()).max().unwrap_or(0);
    let mut type_histogram = vec![0u32; cap];
    for i in population {
        type_histogram[i.treatment.type_count() - 1] += 1;
    }
    GaGeneration {
        generation,
        evals_spent,
        best_fitness: best.fitness,
        mean_fitness,
        best_types: best.treatment.type_count(),
        mean_types,
        max_types,
        type_histogram,
        replaced,
    }
}

/// Binary-or-larger tournament over distinct population indices; returns the
/// index of the fittest entrant (ties keep the earliest-drawn entrant).
fn tournament_best(population: &[Individual], size: usize, rng: &mut ChaCha8Rng) -> usize {
    draw_distinct(population.len(), size, rng, |idx, best_so_far| {
        population[idx].fitness < population[best_so_far].fitness
    })
}

/// Inverse tournament: index of the least fit entrant (ties keep the
/// earliest-drawn entrant).
fn tournament_worst(population: &[Individual], size: usize, rng: &mut ChaCha8Rng) -> usize {
    draw_distinct(population.len(), size, rng, |idx, worst_so_far| {
        population[idx].fitness > population[worst_so_far].fitness
    })
}

/// Draws `size` distinct indices in 0..n one at a time (rejecting repeats)
/// and folds them with `better`, keeping the first-drawn on ties.
fn draw_distinct(
    n: usize,
    size: usize,
    rng: &mut ChaCha8Rng,
    better: impl Fn(usize, usize) -> bool,
) -> usize {
    debug_assert!(size <= n);
    let mut seen: Vec<usize> = Vec::with_capacity(size);
    let mut kept = usize::MAX;
    while seen.len() < size {
        let idx = rng.gen_range(0..n);
        if seen.contains(&idx) {
            continue;
        }
        seen.push(idx);
        if kept == usize::MAX || better(idx, kept) {
            kept = idx;
        }
    }
    kept
}

/// One mutation: with probability `p_add_type` append `types_per_add` fresh
/// random worker types (a no-op at the cap — the event is consumed either
/// way); otherwise nudge one uniformly chosen parameter by a uniform step
/// of ±`step_frac` of its range, clamped to the range.
fn mutate(t: &mut Treatment, config: &GaConfig, rng: &mut ChaCha8Rng) {
    if config.p_add_type > 0.0 && rng.gen::<f64>() < config.p_add_type {
        for _ in 0..config.types_per_add {
            if t.type_count() < config.max_types {
                t.add_random_types(1, rng).expect("below the cap, adding one type succeeds");
            }
        }
        return;
    }
    let idx = rng.gen_range(0..t.param_count());
    let (lo, hi) = NP_DESIGN_BOUNDS[idx % NP_DESIGN_BOUNDS.len()];
    let step = (rng.gen::<f64>() * 2.0 - 1.0) * config.step_frac * (hi - lo);
    let value = t.get_param(idx) + step;
    t.set_param_clamped(idx, value);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(seed: u64) -> GaConfig {
        GaConfig { budget: 500, samples: 5, seed, ..GaConfig::default() }
    }

    /// A constant evaluator gives no strict improvements, so the population
    /// never changes and the budget is still spent exactly.
    #[test]
    fn constant_fitness_never_replaces() {
        let config = base_config(11);
        let result = run_ga(&config, |_, _| 42.0).unwrap();
        assert_eq!(result.trace.total_evals, 500);
        assert_eq!(result.trace.setup_evals, 100);
        assert!(result.trace.generations.iter().all(|g| !g.replaced));
        assert_eq!(result.best.fitness, 42.0);
        assert_eq!(result.trace.generations.len(), 81);
        assert_eq!(result.trace.generations.last().unwrap().evals_spent, 500);
        assert_eq!(result.trace.generations[0].type_histogram[0], 20);
    }

    /// Minimizing the type count keeps everything at one type even when
    /// add-mutations fire constantly: grown offspring are strictly worse.
    #[test]
    fn type_count_pressure_respects_strict_improvement() {
        let config = GaConfig { p_add_type: 0.5, ..base_config(7) };
        let result = run_ga(&config, |t, _| t.type_count() as f64).unwrap();
        assert_eq!(result.best.treatment.type_count(), 1);
        assert!(result.population.iter().all(|i| i.treatment.type_count() == 1));
    }

    /// Rewarding types drives genomes to the cap, and no further.
    #[test]
    fn type_reward_reaches_cap() {
        let config = GaConfig { p_add_type: 0.5, budget: 2000, ..base_config(3) };
        let result = run_ga(&config, |t, _| (Treatment::MAX_TYPES - t.type_count()) as f64).unwrap();
        assert_eq!(result.best.treatment.type_count(), Treatment::MAX_TYPES);
        let last = result.trace.generations.last().unwrap();
        assert!(last.max_types <= Treatment::MAX_TYPES);
        assert_eq!(last.best_types, Treatment::MAX_TYPES);
    }

    /// types_per_add = 2 grows two at a time but still respects the cap.
    #[test]
    fn add_two_respects_cap() {
        let config =
            GaConfig { p_add_type: 0.5, types_per_add: 2, max_types: 3, budget: 1000, ..base_config(5) };
        let result = run_ga(&config, |t, _| (10 - t.type_count()) as f64).unwrap();
        assert_eq!(result.best.treatment.type_count(), 3);
    }

    /// Same seed, same arms -> identical initial population rows; and the
    /// whole run is reproducible.
    #[test]
    fn same_seed_same_initial_population_and_rerun() {
        let fixed = base_config(9);
        let variable = GaConfig { p_add_type: 0.5, ..base_config(9) };
        let eval = |t: &Treatment, s: u64| t.get_param(0) * 100.0 + (s % 7) as f64;
        let a = run_ga(&fixed, eval).unwrap();
        let b = run_ga(&variable, eval).unwrap();
        assert_eq!(a.trace.generations[0].best_fitness, b.trace.generations[0].best_fitness);
        assert_eq!(a.trace.generations[0].mean_fitness, b.trace.generations[0].mean_fitness);
        let a2 = run_ga(&fixed, eval).unwrap();
        assert_eq!(a.best.fitness, a2.best.fitness);
        assert_eq!(a.best.treatment, a2.best.treatment);
    }

    /// The GA minimizes: an evaluator rewarding a high first parameter with
    /// low fitness drags that parameter up against its clamp.
    #[test]
    fn optimizes_toward_low_fitness() {
        let config = GaConfig { budget: 3000, ..base_config(13) };
        let result = run_ga(&config, |t, _| 1.0 - t.get_param(0)).unwrap();
        assert!(
            result.best.treatment.get_param(0) > 0.95,
            "expected near-1 bias, got {}",
            result.best.treatment.get_param(0)
        );
        let f = &result.trace.generations;
        assert!(f.last().unwrap().best_fitness <= f[0].best_fitness);
    }

    /// Every sample seed in a run is distinct (fresh noise per sample).
    #[test]
    fn sample_seeds_are_distinct() {
        use std::cell::RefCell;
        let seen = RefCell::new(std::collections::HashSet::new());
        let config = base_config(21);
        run_ga(&config, |_, s| {
            assert!(seen.borrow_mut().insert(s), "sample seed {s} repeated");
            0.0
        })
        .unwrap();
        assert_eq!(seen.borrow().len(), 500);
    }

    /// Uneven budget / samples combinations are rejected up front.
    #[test]
    fn validation_catches_bad_configs() {
        let mut c = GaConfig::default();
        c.budget = 1001;
        assert_eq!(
            c.validate(),
            Err(GaConfigError::UnevenBudget { budget: 1001, samples: 5 })
        );
        let mut c = GaConfig::default();
        c.budget = 50;
        assert_eq!(c.validate(), Err(GaConfigError::BudgetTooSmall { budget: 50, minimum: 100 }));
        let mut c = GaConfig::default();
        c.tournament = 1;
        assert_eq!(c.validate(), Err(GaConfigError::BadTournament(1)));
        let mut c = GaConfig::default();
        c.types_per_add = 3;
        assert_eq!(c.validate(), Err(GaConfigError::BadTypesPerAdd(3)));
        let mut c = GaConfig::default();
        c.max_types = Treatment::MAX_TYPES + 1;
        assert_eq!(c.validate(), Err(GaConfigError::BadMaxTypes(Treatment::MAX_TYPES + 1)));
    }

    /// Tournament entrants are distinct and uniformly drawn: over many
    /// constant-fitness draws every index wins about equally often because
    /// ties keep the first-drawn entrant.
    #[test]
    fn tournament_uniformity() {
        let mut seed_rng = ChaCha8Rng::seed_from_u64(4);
        let pop: Vec<Individual> = (0..10)
            .map(|_| Individual {
                treatment: Treatment::random(1, &mut seed_rng).unwrap(),
                fitness: 1.0,
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = [0u32; 10];
        for _ in 0..100_000 {
            counts[tournament_best(&pop, 2, &mut rng)] += 1;
        }
        for &c in &counts {
            let frequency = c as f64 / 100_000.0;
            assert!((frequency - 0.1).abs() < 0.01, "non-uniform winner frequency {frequency}");
        }
    }

    /// Perturb-mutations clamp at the parameter bounds.
    #[test]
    fn mutation_clamps_to_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let config = GaConfig { step_frac: 1.0, ..GaConfig::default() };
        let mut rng_t = ChaCha8Rng::seed_from_u64(2);
        let mut t = Treatment::random(1, &mut rng_t).unwrap();
        for _ in 0..2000 {
            mutate(&mut t, &config, &mut rng);
        }
        for idx in 0..t.param_count() {
            let (lo, hi) = NP_DESIGN_BOUNDS[idx % NP_DESIGN_BOUNDS.len()];
            let v = t.get_param(idx);
            assert!(v >= lo && v <= hi, "param {idx} escaped bounds: {v}");
        }
    }
}
