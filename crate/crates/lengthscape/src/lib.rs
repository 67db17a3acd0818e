//! Seeded, reproducible toolkit for studying how genome length evolves.
//!
//! Four building blocks, each with a runnable example:
//!
//! * [`nk`] — NK fitness landscapes whose genomes can grow and shrink
//!   (`examples/nk_walk.rs`, `examples/nk_growth.rs`)
//! * [`walk`] — mutation-based adaptive walks over those landscapes, with
//!   growth/deletion mutation and waiting-time statistics
//!   (`examples/waiting_times.rs`, `examples/nk_deletion_sweep.rs`)
//! * [`tumor`] — a desk-scale agent-based tumor treatment simulator:
//!   cancer cells under oxygen dynamics, drug-carrying worker agents, and
//!   damage accumulation; fitness of a treatment = remaining cancer cells
//!   (`examples/tumor_fixture.rs`, `examples/treatment_eval.rs`)
//! * [`ga`] — a steady-state genetic algorithm over variable-length
//!   treatment genomes under evaluation noise (`examples/ga_tumor.rs`)
//!
//! [`experiments`] batches any of the above into seeded replicate grids with
//! Welch t-tests, confidence intervals, CSV artifacts, and SVG plots
//! (`examples/experiment_grid.rs`). The `lengthscape` binary exposes the
//! same flows as subcommands; every run prints its effective seed and can be
//! replayed exactly from it.

pub mod config;
pub mod experiments;
pub mod ga;
pub mod nk;
pub mod rng;
pub mod stats;
pub mod tumor;
pub mod walk;
