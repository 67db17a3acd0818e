//! NK fitness landscapes with growable, shrinkable genomes.
//!
//! A landscape holds one fitness table per gene. Gene `i` reads its own
//! allele plus the alleles of `k` linked genes; those `k+1` bits form an
//! index into a table of `2^(k+1)` values in `[0,1]`, and the genome's
//! fitness is the mean table value across all genes.
//!
//! Tables are represented lazily: entry `index` of a gene is a hash of
//! `(table_seed, index)`, so a gene at `k = 15` carries a single seed word
//! instead of 65536 floats. One entry per gene may be pinned to an explicit
//! value; [`NkLandscape::add_genes`] uses this to make a freshly inserted
//! gene fitness-neutral in its insertion context (see `add_genes` docs).
//!
//! Growth events are recorded on an undo stack so that
//! [`NkLandscape::remove_last_block`] restores the previous landscape
//! bit-exactly — a rejected deletion can therefore be rolled back via
//! [`NkLandscape::restore_block`] with no drift.

pub mod io;

use crate::rng::{hash2, u64_to_f01};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors from landscape construction and evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum NkError {
    #[error("k = {k} requires at least k+1 genes, got n = {n}")]
    KTooLarge { n: usize, k: usize },
    #[error("genome length {genome} does not match landscape gene count {landscape}")]
    LengthMismatch { genome: usize, landscape: usize },
    #[error("gene count {n} too large for exhaustive enumeration (limit {limit})")]
    TooManyGenes { n: usize, limit: usize },
}

/// A binary allele vector. Length always tracks the owning landscape's
/// current gene count; `add_genes`/`remove_last_block` adjust both together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Genome {
    alleles: Vec<u8>,
}

impl Genome {
    /// Uniform random genome of length `n`.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        Genome {
            alleles: (0..n).map(|_| rng.gen_range(0..2u8)).collect(),
        }
    }

    /// Genome from explicit bits (each must be 0 or 1).
    pub fn from_bits(bits: &[u8]) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "alleles must be 0 or 1");
        Genome {
            alleles: bits.to_vec(),
        }
    }

    /// All-zero genome of length `n`.
    pub fn zeros(n: usize) -> Self {
        Genome {
            alleles: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.alleles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alleles.is_empty()
    }

    pub fn allele(&self, i: usize) -> u8 {
        self.alleles[i]
    }

    pub fn bits(&self) -> &[u8] {
        &self.alleles
    }

    /// Flip the allele at `pos`. Flipping twice is the identity.
    pub fn flip(&mut self, pos: usize) {
        self.alleles[pos] ^= 1;
    }
}

/// One gene: its epistatic inputs and its (lazy) fitness table.
#[derive(Debug, Clone, PartialEq)]
pub struct Gene {
    /// Exactly `k` other gene indices; position in this list fixes the bit
    /// position in the table index (link j -> bit j+1).
    links: Vec<u32>,
    /// Seed defining the table: entry(i) = hash(table_seed, i) in [0,1).
    table_seed: u64,
    /// At most one entry overridden with an explicit value.
    pinned: Option<Pin>,
}

/// A single overridden table entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pin {
    pub index: u64,
    pub value: f64,
}

/// Record of one first-link retarget performed during a growth event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rewire {
    /// Pre-existing gene whose first link was redirected.
    pub gene: u32,
    /// Its first link's target before the redirect.
    pub old_target: u32,
}

/// One growth event: how many genes were appended and which links were
/// retargeted, in application order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthBlock {
    pub genes_added: usize,
    pub rewires: Vec<Rewire>,
}

/// Everything needed to re-apply a popped growth block bit-exactly.
///
/// Returned by [`NkLandscape::remove_last_block`]; pass it to
/// [`NkLandscape::restore_block`] to undo the removal (e.g. when a walk
/// rejects a deletion), or drop it to make the removal final.
#[derive(Debug, Clone)]
pub struct RemovedBlock {
    genes: Vec<Gene>,
    alleles: Vec<u8>,
    rewires: Vec<Rewire>,
}

impl RemovedBlock {
    pub fn genes_added(&self) -> usize {
        self.genes.len()
    }
}

/// An NK landscape over a variable number of genes.
#[derive(Debug, Clone)]
pub struct NkLandscape {
    n0: usize,
    k: usize,
    seed: u64,
    genes: Vec<Gene>,
    history: Vec<GrowthBlock>,
    /// Growth events ever fixed by selection on this lineage (monotone; not
    /// decremented by undo of a rejected proposal — see [`Self::commit_growth`]).
    fixed_growth_events: u64,
}

/// Equality compares the fitness-defining state: generative parameters,
/// genes, and the undo history. The lineage's fixed-growth-event counter is
/// deliberately excluded, so a landscape restored by unwinding proposals
/// compares equal to its pristine origin even after committed growth.
impl PartialEq for NkLandscape {
    fn eq(&self, other: &Self) -> bool {
        self.n0 == other.n0
            && self.k == other.k
            && self.seed == other.seed
            && self.genes == other.genes
            && self.history == other.history
    }
}

/// Gene counts above this are rejected by `brute_force_optimum`.
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Pin cap schedule, indexed by the number of growth events the lineage has
/// ever fixed (see [`NkLandscape::commit_growth`]); the last entry repeats
/// for all later events. Each entry is a fraction of the genome's current
/// mean fitness: a new gene may be pinned no higher than `r * fitness`, so
/// the link-retargeting shift must contribute the remaining
/// `(1 - r) * fitness` for the event to be absorbed as neutral. The first
/// entry is 1, so a first insertion — whatever the block size — is always
/// absorbable; later events demand an ever larger retargeting windfall.
/// The tail channel closes by itself as a walk converges: the demanded
/// shortfall is a fraction of a *rising* fitness while retargeting shifts
/// shrink as contributions adapt, so late insertions become rare without
/// ever being forbidden outright.
///
/// For an insertion of `g` genes the demanded fraction shrinks with
/// `1/sqrt(g)`: a single pinned gene is scrutinized in full, while a long
/// segment pinned near the genome mean is statistically unexceptional and
/// is judged on a per-segment noise scale instead. This keeps the
/// acceptance hurdle for a block roughly constant in z-score units across
/// block sizes.
pub const PIN_CAP_SCHEDULE: [f64; 4] = [1.0, 0.68, 0.50, 0.40];

/// Growth blocks a genome may carry before the pin cap starts to shrink.
pub const PIN_CAP_FREE_BLOCKS: usize = 3;

/// Pin cap ratio reduction per carried growth block beyond
/// [`PIN_CAP_FREE_BLOCKS`]. The schedule above prices a lineage's *history*
/// (events ever fixed); this prices its current *burden* (blocks carried
/// right now), so an already much-grown genome tolerates further neutral
/// insertions poorly however the lineage got there, and genome length
/// saturates instead of trickling upward forever.
pub const PIN_CAP_BURDEN_DECAY: f64 = 0.2;

impl NkLandscape {
    /// Build a landscape of `n` genes, each with `k` distinct links to other
    /// genes and a fresh random table. Deterministic in `(n, k, seed)`.
    pub fn generate(n: usize, k: usize, seed: u64) -> Result<Self, NkError> {
        if (n > 1 && k > n - 1) || (n == 1 && k > 0) {
            return Err(NkError::KTooLarge { n, k });
        }
        assert!(n >= 1, "landscape needs at least one gene");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let genes = (0..n)
            .map(|i| {
                let links = draw_distinct_targets(i, n, k, &mut rng);
                let table_seed = rng.next_u64();
                Gene {
                    links,
                    table_seed,
                    pinned: None,
                }
            })
            .collect();
        Ok(NkLandscape {
            n0: n,
            k,
            seed,
            genes,
            history: Vec::new(),
            fixed_growth_events: 0,
        })
    }

    /// Gene count at construction time.
    pub fn n0(&self) -> usize {
        self.n0
    }

    /// Current gene count (construction count plus surviving growth).
    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of growth blocks currently on the undo stack.
    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[GrowthBlock] {
        &self.history
    }

    /// Growth events ever fixed on this lineage (see [`Self::commit_growth`]).
    pub fn fixed_growth_events(&self) -> u64 {
        self.fixed_growth_events
    }

    /// Record that the most recent growth event was fixed by selection.
    ///
    /// The pin cap schedule ([`PIN_CAP_SCHEDULE`]) advances with every event
    /// a lineage has ever fixed, not with the genes it currently carries:
    /// absorbability of neutral insertions wanes over a lineage's history
    /// and is not restored by later deletions. Callers running an adaptive
    /// walk call this once per *accepted* growth mutation; a rejected
    /// proposal is instead unwound with [`Self::remove_last_block`], which
    /// leaves the counter untouched, as does an accepted deletion.
    pub fn commit_growth(&mut self) {
        self.fixed_growth_events += 1;
    }

    /// Link targets of `gene` (length `k`).
    pub fn links(&self, gene: usize) -> &[u32] {
        &self.genes[gene].links
    }

    /// Table entry `index` of `gene`. Entries are in [0,1); the pinned entry
    /// (if any) returns its explicit value instead of the hashed one.
    pub fn table_entry(&self, gene: usize, index: u64) -> f64 {
        let g = &self.genes[gene];
        if let Some(p) = g.pinned {
            if p.index == index {
                return p.value;
            }
        }
        u64_to_f01(hash2(g.table_seed, index))
    }

    /// The pinned entry of `gene`, if any.
    pub fn pinned(&self, gene: usize) -> Option<Pin> {
        self.genes[gene].pinned
    }

    /// Table index selected by `genome` for `gene`: the gene's own allele is
    /// bit 0, and its j-th link's allele is bit j+1.
    pub fn context_index(&self, gene: usize, genome: &Genome) -> u64 {
        let g = &self.genes[gene];
        let mut idx = genome.allele(gene) as u64;
        for (j, &t) in g.links.iter().enumerate() {
            idx |= (genome.allele(t as usize) as u64) << (j + 1);
        }
        idx
    }

    /// Fitness contribution of one gene under `genome`.
    pub fn contribution(&self, gene: usize, genome: &Genome) -> f64 {
        self.table_entry(gene, self.context_index(gene, genome))
    }

    /// Mean per-gene table value selected by `genome`. Pure: identical
    /// arguments give bit-identical results.
    pub fn evaluate(&self, genome: &Genome) -> Result<f64, NkError> {
        if genome.len() != self.genes.len() {
            return Err(NkError::LengthMismatch {
                genome: genome.len(),
                landscape: self.genes.len(),
            });
        }
        let mut sum = 0.0;
        for i in 0..self.genes.len() {
            sum += self.contribution(i, genome);
        }
        Ok(sum / self.genes.len() as f64)
    }

    /// Append `g` new genes to the right-hand end.
    ///
    /// Each new gene gets `k` distinct link targets drawn over the entire
    /// post-addition genome (self excluded), a fresh table, and a uniform
    /// random allele appended to `genome`. When `k >= 1`, for each new gene
    /// one uniformly chosen pre-existing gene has its first link retargeted
    /// to that new gene, so the newcomer both reads and is read by the
    /// resident genome.
    ///
    /// A new gene starts out without an adapted function. Its table entry at
    /// the insertion context (the index its own and linked alleles select at
    /// the moment of insertion) is pinned so that, when possible, the whole
    /// insertion event leaves mean fitness unchanged: the pin absorbs the
    /// contribution shift `delta` that the link retargeting causes in the
    /// pre-existing genes, i.e. `pin = parent_fitness - delta / g`. The pin
    /// is clamped to `[0, cap]`, where the cap follows a fixed shrinking
    /// schedule over the number of growth events the lineage has ever fixed
    /// ([`PIN_CAP_SCHEDULE`], last entry repeating), interpolated toward the
    /// current mean contribution for multi-gene blocks. Early insertions are
    /// therefore absorbable as neutral events (surviving on the tie
    /// coin-flip), occasional retargeting windfalls make an insertion
    /// outright beneficial, and an increasingly strict cap makes a
    /// well-adapted, already-grown genome reject further additions — growth
    /// self-limits rather than running away. All unpinned entries are
    /// ordinary random table values, so a newcomer's contribution is free to
    /// adapt as soon as any participating allele changes.
    ///
    /// The event is pushed onto the undo stack; `remove_last_block` restores
    /// the exact prior state.
    pub fn add_genes(
        &mut self,
        genome: &mut Genome,
        g: usize,
        rng: &mut impl Rng,
    ) -> Result<(), NkError> {
        assert!(g >= 1, "growth block must add at least one gene");
        let parent_fitness = self.evaluate(genome)?;
        let n_before = self.genes.len();
        let n_after = n_before + g;
        let event_index =
            usize::try_from(self.fixed_growth_events).unwrap_or(PIN_CAP_SCHEDULE.len());
        let scheduled = PIN_CAP_SCHEDULE[event_index.min(PIN_CAP_SCHEDULE.len() - 1)];
        let burden = self.history.len().saturating_sub(PIN_CAP_FREE_BLOCKS);
        let ratio = (scheduled - PIN_CAP_BURDEN_DECAY * burden as f64).max(0.0);
        // Effective cap: the scheduled fraction of current fitness, with the
        // demanded shortfall diluted by 1/sqrt(g) so the hurdle scales with
        // the block's fitness-noise scale.
        let cap = (parent_fitness * (1.0 - (1.0 - ratio) / (g as f64).sqrt())).max(0.0);

        // Draw order per new gene: links, table seed, allele.
        for m in n_before..n_after {
            let links = draw_distinct_targets(m, n_after, self.k, rng);
            let table_seed = rng.next_u64();
            self.genes.push(Gene {
                links,
                table_seed,
                pinned: None,
            });
            let allele = rng.gen_range(0..2u8);
            genome.alleles.push(allele);
        }

        // Retarget one pre-existing gene's first link per new gene,
        // accumulating the contribution change it causes.
        let mut rewires = Vec::new();
        let mut delta = 0.0;
        if self.k >= 1 {
            let mut picks = Vec::with_capacity(g);
            for m in n_before..n_after {
                let e = rng.gen_range(0..n_before);
                picks.push((e, m));
            }
            let mut touched: Vec<usize> = picks.iter().map(|&(e, _)| e).collect();
            touched.sort_unstable();
            touched.dedup();
            let before: Vec<f64> = touched
                .iter()
                .map(|&e| self.contribution(e, genome))
                .collect();
            for (e, m) in picks {
                rewires.push(Rewire {
                    gene: e as u32,
                    old_target: self.genes[e].links[0],
                });
                self.genes[e].links[0] = m as u32;
            }
            for (&e, b) in touched.iter().zip(before) {
                delta += self.contribution(e, genome) - b;
            }
        }

        // Pin each new gene's insertion-context entry so the event as a
        // whole is fitness-neutral where the clamp allows. Contexts may read
        // other new genes and the rewires are already in place, so this runs
        // last; it consumes no randomness.
        let pin_value = (parent_fitness - delta / g as f64).clamp(0.0, cap);
        for m in n_before..n_after {
            let index = self.context_index(m, genome);
            self.genes[m].pinned = Some(Pin {
                index,
                value: pin_value,
            });
        }

        self.history.push(GrowthBlock {
            genes_added: g,
            rewires,
        });
        Ok(())
    }

    /// Remove the most recent growth block, restoring landscape and genome
    /// to their exact pre-addition state. Returns `None` (a no-op) when no
    /// growth has survived; callers treat that as a rejected mutation event.
    ///
    /// The returned [`RemovedBlock`] can re-apply the removal's inverse via
    /// [`NkLandscape::restore_block`].
    pub fn remove_last_block(&mut self, genome: &mut Genome) -> Option<RemovedBlock> {
        let block = self.history.pop()?;
        let n_after = self.genes.len();
        let n_before = n_after - block.genes_added;
        // Undo rewires in reverse application order so repeated retargets of
        // the same gene unwind correctly.
        for r in block.rewires.iter().rev() {
            self.genes[r.gene as usize].links[0] = r.old_target;
        }
        let genes = self.genes.split_off(n_before);
        let alleles = genome.alleles.split_off(n_before);
        Some(RemovedBlock {
            genes,
            alleles,
            rewires: block.rewires,
        })
    }

    /// Re-apply a block popped by `remove_last_block`, restoring landscape
    /// and genome to their exact pre-removal state.
    pub fn restore_block(&mut self, genome: &mut Genome, block: RemovedBlock) {
        let RemovedBlock {
            genes,
            alleles,
            rewires,
        } = block;
        let genes_added = genes.len();
        self.genes.extend(genes);
        genome.alleles.extend(alleles);
        let n_before = self.genes.len() - genes_added;
        // One rewire was recorded per new gene in block order, so rewire i
        // pointed its gene's first link at gene n_before + i (none for k=0).
        debug_assert!(rewires.is_empty() || rewires.len() == genes_added);
        for (i, r) in rewires.iter().enumerate() {
            self.genes[r.gene as usize].links[0] = (n_before + i) as u32;
        }
        self.history.push(GrowthBlock {
            genes_added,
            rewires,
        });
    }

    /// True iff no single-allele flip strictly improves fitness.
    pub fn is_local_optimum(&self, genome: &Genome) -> Result<bool, NkError> {
        let base = self.evaluate(genome)?;
        let mut probe = genome.clone();
        for i in 0..self.genes.len() {
            probe.flip(i);
            let f = self.evaluate(&probe)?;
            probe.flip(i);
            if f > base {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Exhaustively enumerate all `2^n` genomes and return a maximum-fitness
    /// genome (first found on ties) with its fitness.
    pub fn brute_force_optimum(&self) -> Result<(Genome, f64), NkError> {
        let n = self.genes.len();
        if n > BRUTE_FORCE_LIMIT {
            return Err(NkError::TooManyGenes {
                n,
                limit: BRUTE_FORCE_LIMIT,
            });
        }
        let mut best: Option<(Genome, f64)> = None;
        for bits in 0u64..(1u64 << n) {
            let genome = Genome {
                alleles: (0..n).map(|i| ((bits >> i) & 1) as u8).collect(),
            };
            let f = self.evaluate(&genome)?;
            match &best {
                Some((_, bf)) if *bf >= f => {}
                _ => best = Some((genome, f)),
            }
        }
        Ok(best.expect("at least one genome enumerated"))
    }
}

/// Draw `k` distinct gene indices from `0..n` excluding `self_idx`, in draw
/// order (order is meaningful: it fixes table index bit positions).
fn draw_distinct_targets(self_idx: usize, n: usize, k: usize, rng: &mut impl Rng) -> Vec<u32> {
    debug_assert!(k < n || (k == 0 && n >= 1));
    let mut others: Vec<u32> = (0..n as u32).filter(|&j| j != self_idx as u32).collect();
    // Partial Fisher-Yates: fix positions 0..k.
    for j in 0..k {
        let pick = rng.gen_range(j..others.len());
        others.swap(j, pick);
    }
    others.truncate(k);
    others
}
