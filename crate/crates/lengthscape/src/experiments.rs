//! Batch experiment grids: seeded replicate protocols over the walk and GA
//! modules, with raw + aggregate CSV artifacts and SVG plots.
//!
//! A grid names an experiment kind, its parameter axes, and replicate
//! counts. Running it executes every (cell, replicate) job with a seed
//! derived from the master seed and the cell's own coordinates — never from
//! execution order — so re-runs reproduce the raw CSV byte-identically no
//! matter how many worker threads are used or whether the run was resumed
//! halfway. Aggregates (mean, min/max, 95% CI over replicates) are pure
//! functions of the raw rows.
//!
//! Failed replicates are never silently dropped: they land in
//! `warnings.csv` and shrink the aggregate sample count.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::ga::{run_ga, GaConfig, GaTrace};
use crate::nk::NkLandscape;
use crate::rng::derive_seed;
use crate::tumor::{apply_treatment, grow_tumor, SimParams, SimState, Treatment};
use crate::walk::{run_walk, WalkConfig};

pub use crate::stats::{mean_ci, welch_t_test, MeanCi, WelchTest};

/// Confidence interval at the conventional 95% level.
pub fn confidence_interval_95(xs: &[f64]) -> MeanCi {
    mean_ci(xs, 0.95)
}

/// The experiment families the harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// Fixed-length adaptive walks over an (N, K) grid.
    NkFixed,
    /// Growth-enabled walks (50% allele / 50% add) over (N, K, G).
    NkGrow,
    /// Growth plus deletion (50/25/25) over (N, K, G).
    NkDelete,
    /// Deletion-probability sweep at fixed K (add fixed at 0.25).
    NkDeleteSweep,
    /// Fixed-length GA runs on the tumor evaluator.
    GaFixed,
    /// Variable-length GA runs over a types-added-per-event axis.
    GaGrow,
}

impl GridKind {
    pub const ALL: [GridKind; 6] = [
        GridKind::NkFixed,
        GridKind::NkGrow,
        GridKind::NkDelete,
        GridKind::NkDeleteSweep,
        GridKind::GaFixed,
        GridKind::GaGrow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::NkFixed => "nk-fixed",
            GridKind::NkGrow => "nk-grow",
            GridKind::NkDelete => "nk-delete",
            GridKind::NkDeleteSweep => "nk-delete-sweep",
            GridKind::GaFixed => "ga-fixed",
            GridKind::GaGrow => "ga-grow",
        }
    }

    fn is_ga(self) -> bool {
        matches!(self, GridKind::GaFixed | GridKind::GaGrow)
    }

    /// Stable seed-derivation tag (never reordered).
    fn tag(self) -> u64 {
        match self {
            GridKind::NkFixed => 1,
            GridKind::NkGrow => 2,
            GridKind::NkDelete => 3,
            GridKind::NkDeleteSweep => 4,
            GridKind::GaFixed => 5,
            GridKind::GaGrow => 6,
        }
    }
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GridKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GridKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown grid kind {s:?} (expected one of nk-fixed, nk-grow, nk-delete, nk-delete-sweep, ga-fixed, ga-grow)"))
    }
}

/// A complete grid description: kind, axes, replicate counts, master seed.
/// Axes that do not apply to a kind are ignored by it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentGrid {
    pub kind: GridKind,
    /// Genome sizes (NK kinds).
    pub n_values: Vec<usize>,
    /// Epistasis levels (NK kinds).
    pub k_values: Vec<usize>,
    /// Growth-block sizes (nk-grow / nk-delete).
    pub g_values: Vec<usize>,
    /// Deletion probabilities (nk-delete-sweep; addition fixed at 0.25).
    pub delete_probabilities: Vec<f64>,
    /// Walk length in generations (NK kinds).
    pub generations: u32,
    /// Landscapes per cell and walks per landscape; replicates = product.
    pub landscapes: usize,
    pub walks: usize,
    /// GA template for the ga kinds; its seed is overridden per replicate
    /// and `p_add_type`/`types_per_add` are set by the kind and axis.
    pub ga: GaConfig,
    /// Types added per growth event (ga-grow axis).
    pub add_counts: Vec<usize>,
    /// Independent GA runs per cell.
    pub ga_runs: usize,
    /// Tumor evaluator scale for the ga kinds.
    pub tumor: SimParams,
    /// Days of tumor growth before treatment (fixture) and days simulated
    /// per fitness evaluation.
    pub tumor_fixture_days: f64,
    pub tumor_treatment_days: f64,
    /// Seed for growing the shared tumor fixture.
    pub tumor_fixture_seed: u64,
    pub master_seed: u64,
    /// Worker threads (1 = fully sequential).
    pub threads: usize,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            kind: GridKind::NkFixed,
            n_values: vec![20],
            k_values: vec![0, 2, 5, 8, 11, 14],
            g_values: vec![1],
            delete_probabilities: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            generations: 20_000,
            landscapes: 10,
            walks: 10,
            ga: GaConfig::default(),
            add_counts: vec![1],
            ga_runs: 10,
            tumor: SimParams::default(),
            tumor_fixture_days: 0.0,
            tumor_treatment_days: 0.1875,
            tumor_fixture_seed: 7,
            master_seed: 20_220_818,
            threads: 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed raw row: {0}")]
    Parse(String),
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::BadGrid(m));
        match self.kind {
            GridKind::NkFixed | GridKind::NkGrow | GridKind::NkDelete => {
                if self.n_values.is_empty() || self.k_values.is_empty() {
                    return bad("n_values and k_values must be non-empty".into());
                }
                if self.kind != GridKind::NkFixed && self.g_values.iter().any(|&g| g == 0) {
                    return bad("g_values must be positive for growth kinds".into());
                }
                if self.landscapes == 0 || self.walks == 0 {
                    return bad("landscapes and walks must be at least 1".into());
                }
            }
            GridKind::NkDeleteSweep => {
                if self.k_values.is_empty() || self.delete_probabilities.is_empty() {
                    return bad("k_values and delete_probabilities must be non-empty".into());
                }
                if self
                    .delete_probabilities
                    .iter()
                    .any(|&p| !(0.0..=0.75).contains(&p))
                {
                    return bad("delete probabilities must lie in [0, 0.75]".into());
                }
                if self.landscapes == 0 || self.walks == 0 {
                    return bad("landscapes and walks must be at least 1".into());
                }
            }
            GridKind::GaFixed | GridKind::GaGrow => {
                self.ga
                    .validate()
                    .map_err(|e| ExperimentError::BadGrid(format!("ga config: {e}")))?;
                self.tumor
                    .validate()
                    .map_err(|e| ExperimentError::BadGrid(format!("tumor params: {e}")))?;
                if self.ga_runs == 0 {
                    return bad("ga_runs must be at least 1".into());
                }
                if self.kind == GridKind::GaGrow
                    && (self.add_counts.is_empty()
                        || self.add_counts.iter().any(|&a| !(1..=2).contains(&a)))
                {
                    return bad("add_counts must be non-empty with entries 1 or 2".into());
                }
            }
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }

    /// Every cell of the grid, in deterministic axis order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        match self.kind {
            GridKind::NkFixed => {
                for &n in &self.n_values {
                    for &k in &self.k_values {
                        cells.push(Cell { n, k, g: 0, p_add: 0.0, p_delete: 0.0, types_per_add: 0 });
                    }
                }
            }
            GridKind::NkGrow | GridKind::NkDelete => {
                let (p_add, p_delete) = if self.kind == GridKind::NkGrow {
                    (0.5, 0.0)
                } else {
                    (0.25, 0.25)
                };
                for &n in &self.n_values {
                    for &k in &self.k_values {
                        for &g in &self.g_values {
                            cells.push(Cell { n, k, g, p_add, p_delete, types_per_add: 0 });
                        }
                    }
                }
            }
            GridKind::NkDeleteSweep => {
                let g = *self.g_values.first().unwrap_or(&1);
                for &n in &self.n_values {
                    for &k in &self.k_values {
                        for &p_delete in &self.delete_probabilities {
                            cells.push(Cell { n, k, g, p_add: 0.25, p_delete, types_per_add: 0 });
                        }
                    }
                }
            }
            GridKind::GaFixed => {
                cells.push(Cell { n: 0, k: 0, g: 0, p_add: 0.0, p_delete: 0.0, types_per_add: 0 });
            }
            GridKind::GaGrow => {
                for &a in &self.add_counts {
                    cells.push(Cell {
                        n: 0,
                        k: 0,
                        g: 0,
                        p_add: self.ga.p_add_type.max(0.5),
                        p_delete: 0.0,
                        types_per_add: a,
                    });
                }
            }
        }
        cells
    }

    fn replicates(&self) -> usize {
        if self.kind.is_ga() {
            self.ga_runs
        } else {
            self.landscapes * self.walks
        }
    }
}

/// One grid cell: the axis coordinates that define it. Axes that do not
/// apply to the kind are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub k: usize,
    pub g: usize,
    pub p_add: f64,
    pub p_delete: f64,
    pub types_per_add: usize,
}

impl Cell {
    /// Total order used for the deterministic raw-file sort.
    fn sort_key(&self) -> (usize, usize, usize, u64, u64, usize) {
        (self.n, self.k, self.g, self.p_add.to_bits(), self.p_delete.to_bits(), self.types_per_add)
    }

    /// Stable coordinates for seed derivation: probabilities enter as
    /// fixed-point ten-thousandths so the mapping is exact and permanent.
    fn seed_path(&self) -> [u64; 6] {
        [
            self.n as u64,
            self.k as u64,
            self.g as u64,
            (self.p_add * 10_000.0).round() as u64,
            (self.p_delete * 10_000.0).round() as u64,
            self.types_per_add as u64,
        ]
    }
}

/// One raw replicate outcome. NK metrics fill the walk columns; GA metrics
/// fill the ga columns; the others stay empty in the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub cell: Cell,
    pub replicate: u64,
    pub seed: u64,
    pub final_fitness: Option<f64>,
    pub final_length: Option<f64>,
    pub initial_fitness: Option<f64>,
    /// Generation of the j-th accepted growth event, if reached.
    pub growth_gen: [Option<f64>; 3],
    pub ga_best_fitness: Option<f64>,
    pub ga_best_types: Option<f64>,
    pub ga_mean_fitness: Option<f64>,
}

pub const RAW_HEADER: [&str; 18] = [
    "kind",
    "n",
    "k",
    "g",
    "p_add",
    "p_delete",
    "types_per_add",
    "replicate",
    "seed",
    "final_fitness",
    "final_length",
    "initial_fitness",
    "gene1_gen",
    "gene2_gen",
    "gene3_gen",
    "ga_best_fitness",
    "ga_best_types",
    "ga_mean_fitness",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn parse_opt(s: &str, what: &str) -> Result<Option<f64>, ExperimentError> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse::<f64>()
            .map(Some)
            .map_err(|_| ExperimentError::Parse(format!("bad {what}: {s:?}")))
    }
}

impl RawRow {
    fn to_record(&self, kind: GridKind) -> Vec<String> {
        let mut rec = vec![
            kind.as_str().to_string(),
            self.cell.n.to_string(),
            self.cell.k.to_string(),
            self.cell.g.to_string(),
            format!("{}", self.cell.p_add),
            format!("{}", self.cell.p_delete),
            self.cell.types_per_add.to_string(),
            self.replicate.to_string(),
            self.seed.to_string(),
            fmt_opt(self.final_fitness),
            fmt_opt(self.final_length),
            fmt_opt(self.initial_fitness),
        ];
        for g in self.growth_gen {
            rec.push(fmt_opt(g));
        }
        rec.push(fmt_opt(self.ga_best_fitness));
        rec.push(fmt_opt(self.ga_best_types));
        rec.push(fmt_opt(self.ga_mean_fitness));
        rec
    }

    fn from_record(rec: &csv::StringRecord) -> Result<(GridKind, RawRow), ExperimentError> {
        if rec.len() != RAW_HEADER.len() {
            return Err(ExperimentError::Parse(format!(
                "expected {} columns, found {}",
                RAW_HEADER.len(),
                rec.len()
            )));
        }
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let kind: GridKind = field(0).parse().map_err(ExperimentError::Parse)?;
        let parse_usize = |i: usize, what: &str| -> Result<usize, ExperimentError> {
            field(i)
                .parse::<usize>()
                .map_err(|_| ExperimentError::Parse(format!("bad {what}: {:?}", field(i))))
        };
        let parse_f64 = |i: usize, what: &str| -> Result<f64, ExperimentError> {
            field(i)
                .parse::<f64>()
                .map_err(|_| ExperimentError::Parse(format!("bad {what}: {:?}", field(i))))
        };
        let cell = Cell {
            n: parse_usize(1, "n")?,
            k: parse_usize(2, "k")?,
            g: parse_usize(3, "g")?,
            p_add: parse_f64(4, "p_add")?,
            p_delete: parse_f64(5, "p_delete")?,
            types_per_add: parse_usize(6, "types_per_add")?,
        };
        let row = RawRow {
            cell,
            replicate: parse_f64(7, "replicate")? as u64,
            seed: field(8)
                .parse::<u64>()
                .map_err(|_| ExperimentError::Parse(format!("bad seed: {:?}", field(8))))?,
            final_fitness: parse_opt(field(9), "final_fitness")?,
            final_length: parse_opt(field(10), "final_length")?,
            initial_fitness: parse_opt(field(11), "initial_fitness")?,
            growth_gen: [
                parse_opt(field(12), "gene1_gen")?,
                parse_opt(field(13), "gene2_gen")?,
                parse_opt(field(14), "gene3_gen")?,
            ],
            ga_best_fitness: parse_opt(field(15), "ga_best_fitness")?,
            ga_best_types: parse_opt(field(16), "ga_best_types")?,
            ga_mean_fitness: parse_opt(field(17), "ga_mean_fitness")?,
        };
        Ok((kind, row))
    }
}

/// A failed replicate, preserved in `warnings.csv`.
#[derive(Debug, Clone)]
pub struct WarningRow {
    pub cell: Cell,
    pub replicate: u64,
    pub seed: u64,
    pub message: String,
}

/// Per-cell, per-metric aggregate over successful replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub cell: Cell,
    pub metric: &'static str,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Half-width of the 95% confidence interval on the mean.
    pub ci95_half: f64,
}

/// Result of a grid run: rows already sorted, aggregates derived, file
/// paths of the artifacts written.
#[derive(Debug)]
pub struct GridOutput {
    pub rows: Vec<RawRow>,
    pub warnings: Vec<WarningRow>,
    pub aggregates: Vec<AggregateRecord>,
    pub raw_path: PathBuf,
    pub aggregate_path: PathBuf,
    pub warnings_path: PathBuf,
}

struct Job {
    cell: Cell,
    replicate: u64,
}

/// Seed for one replicate: master + kind tag + cell coordinates + replicate.
fn job_seed(grid: &ExperimentGrid, cell: &Cell, replicate: u64) -> u64 {
    let p = cell.seed_path();
    derive_seed(
        grid.master_seed,
        &[grid.kind.tag(), p[0], p[1], p[2], p[3], p[4], p[5], replicate],
    )
}

/// Runs one replicate job to a raw row.
fn run_job(
    grid: &ExperimentGrid,
    cell: &Cell,
    replicate: u64,
    fixture: Option<&SimState>,
) -> Result<RawRow, String> {
    let seed = job_seed(grid, cell, replicate);
    if grid.kind.is_ga() {
        let tumor = fixture.expect("ga kinds carry a tumor fixture");
        let config = GaConfig {
            seed,
            p_add_type: if grid.kind == GridKind::GaFixed { 0.0 } else { cell.p_add },
            types_per_add: if grid.kind == GridKind::GaFixed { 1 } else { cell.types_per_add },
            ..grid.ga.clone()
        };
        let params = &grid.tumor;
        let days = grid.tumor_treatment_days;
        let eval_failure = std::cell::RefCell::new(None);
        let result = run_ga(&config, |t: &Treatment, s: u64| {
            match apply_treatment(tumor, t, params, days, s) {
                Ok(alive) => alive as f64,
                Err(e) => {
                    *eval_failure.borrow_mut() = Some(e.to_string());
                    f64::INFINITY
                }
            }
        })
        .map_err(|e| e.to_string())?;
        if let Some(msg) = eval_failure.into_inner() {
            return Err(format!("evaluator failed: {msg}"));
        }
        let last = result.trace.generations.last().expect("trace has rows");
        Ok(RawRow {
            cell: *cell,
            replicate,
            seed,
            final_fitness: None,
            final_length: None,
            initial_fitness: None,
            growth_gen: [None; 3],
            ga_best_fitness: Some(result.best.fitness),
            ga_best_types: Some(result.best.treatment.type_count() as f64),
            ga_mean_fitness: Some(last.mean_fitness),
        })
    } else {
        // One adaptive walk. The landscape seed is shared by the walks of
        // one landscape replicate (replicate / walks), the walk seed is
        // unique per replicate.
        let landscape_rep = replicate / grid.walks as u64;
        let p = cell.seed_path();
        let land_seed = derive_seed(
            grid.master_seed,
            &[grid.kind.tag(), p[0], p[1], p[2], p[3], p[4], p[5], u64::MAX, landscape_rep],
        );
        let mut landscape =
            NkLandscape::generate(cell.n, cell.k, land_seed).map_err(|e| e.to_string())?;
        let config = WalkConfig {
            generations: grid.generations,
            g: cell.g,
            p_allele: 1.0 - cell.p_add - cell.p_delete,
            p_add: cell.p_add,
            p_delete: cell.p_delete,
            seed,
        };
        let trace = run_walk(&mut landscape, &config).map_err(|e| e.to_string())?;
        let growth_gen = std::array::from_fn(|j| {
            trace.accepted_growth_generations.get(j).map(|&g| g as f64)
        });
        Ok(RawRow {
            cell: *cell,
            replicate,
            seed,
            final_fitness: Some(trace.final_fitness),
            final_length: Some(trace.final_length as f64),
            initial_fitness: Some(trace.initial_fitness),
            growth_gen,
            ga_best_fitness: None,
            ga_best_types: None,
            ga_mean_fitness: None,
        })
    }
}

/// Executes the grid into `out_dir`, resuming from any raw rows already on
/// disk. Artifacts: `raw.csv`, `aggregate.csv`, `warnings.csv`.
pub fn run_grid(grid: &ExperimentGrid, out_dir: &Path) -> Result<GridOutput, ExperimentError> {
    grid.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| ExperimentError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let raw_path = out_dir.join("raw.csv");
    let aggregate_path = out_dir.join("aggregate.csv");
    let warnings_path = out_dir.join("warnings.csv");

    // Resume: keep rows whose (cell, replicate) is already complete.
    let mut rows: Vec<RawRow> = Vec::new();
    if raw_path.exists() {
        for row in read_raw_rows(&raw_path)? {
            let (kind, row) = row;
            if kind == grid.kind {
                rows.push(row);
            }
        }
    }
    let done: BTreeSet<(u64, u64)> = rows
        .iter()
        .map(|r| (job_seed(grid, &r.cell, r.replicate), r.replicate))
        .collect();

    // Build the outstanding job list.
    let mut jobs: Vec<Job> = Vec::new();
    for cell in grid.cells() {
        for replicate in 0..grid.replicates() as u64 {
            if !done.contains(&(job_seed(grid, &cell, replicate), replicate)) {
                jobs.push(Job { cell, replicate });
            }
        }
    }

    // Shared tumor fixture for the GA kinds (grown once).
    let fixture: Option<SimState> = if grid.kind.is_ga() {
        Some(
            grow_tumor(&grid.tumor, grid.tumor_fixture_days, grid.tumor_fixture_seed)
                .map_err(|e| ExperimentError::BadGrid(format!("tumor fixture: {e}")))?,
        )
    } else {
        None
    };

    // Worker pool: a shared job cursor, results collected under a mutex and
    // sorted afterwards, so scheduling order never shows in the output.
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<RawRow, (Job, String)>)>> = Mutex::new(Vec::new());
    let workers = grid.threads.min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let job = &jobs[i];
                let outcome = run_job(grid, &job.cell, job.replicate, fixture.as_ref())
                    .map_err(|msg| (Job { cell: job.cell, replicate: job.replicate }, msg));
                results.lock().expect("results lock").push((i, outcome));
            });
        }
    });

    let mut warnings: Vec<WarningRow> = Vec::new();
    for (_, outcome) in results.into_inner().expect("results lock") {
        match outcome {
            Ok(row) => rows.push(row),
            Err((job, message)) => warnings.push(WarningRow {
                cell: job.cell,
                replicate: job.replicate,
                seed: job_seed(grid, &job.cell, job.replicate),
                message,
            }),
        }
    }

    rows.sort_by(|a, b| {
        a.cell
            .sort_key()
            .cmp(&b.cell.sort_key())
            .then(a.replicate.cmp(&b.replicate))
    });
    warnings.sort_by(|a, b| {
        a.cell
            .sort_key()
            .cmp(&b.cell.sort_key())
            .then(a.replicate.cmp(&b.replicate))
    });

    write_raw_csv(&raw_path, grid, &rows)?;
    write_warnings_csv(&warnings_path, grid, &warnings)?;
    let aggregates = aggregate(&rows);
    write_aggregate_csv(&aggregate_path, grid, &aggregates)?;

    Ok(GridOutput { rows, warnings, aggregates, raw_path, aggregate_path, warnings_path })
}

/// The artifact header comment: version line plus the grid fingerprint.
/// Deterministic (no timestamps) so re-runs match byte for byte.
fn artifact_comment(grid: &ExperimentGrid, what: &str) -> String {
    format!(
        "# lengthscape {what} v1\n# kind={} master_seed={}\n",
        grid.kind, grid.master_seed
    )
}

fn open_with_comment(path: &Path, comment: &str) -> Result<fs::File, ExperimentError> {
    let mut file = fs::File::create(path).map_err(|e| ExperimentError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    file.write_all(comment.as_bytes()).map_err(|e| ExperimentError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(file)
}

fn write_raw_csv(path: &Path, grid: &ExperimentGrid, rows: &[RawRow]) -> Result<(), ExperimentError> {
    let file = open_with_comment(path, &artifact_comment(grid, "raw"))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(RAW_HEADER)?;
    for row in rows {
        w.write_record(row.to_record(grid.kind))?;
    }
    w.flush().map_err(|e| ExperimentError::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

/// Reads raw rows back (any kind), skipping the comment header.
pub fn read_raw_rows(path: &Path) -> Result<Vec<(GridKind, RawRow)>, ExperimentError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(RawRow::from_record(&record?)?);
    }
    Ok(rows)
}

fn write_warnings_csv(
    path: &Path,
    grid: &ExperimentGrid,
    warnings: &[WarningRow],
) -> Result<(), ExperimentError> {
    let file = open_with_comment(path, &artifact_comment(grid, "warnings"))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["n", "k", "g", "p_add", "p_delete", "types_per_add", "replicate", "seed", "message"])?;
    for row in warnings {
        w.write_record([
            row.cell.n.to_string(),
            row.cell.k.to_string(),
            row.cell.g.to_string(),
            format!("{}", row.cell.p_add),
            format!("{}", row.cell.p_delete),
            row.cell.types_per_add.to_string(),
            row.replicate.to_string(),
            row.seed.to_string(),
            row.message.clone(),
        ])?;
    }
    w.flush().map_err(|e| ExperimentError::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

/// Metrics carried per row, in aggregate order.
const METRICS: [(&str, fn(&RawRow) -> Option<f64>); 9] = [
    ("final_fitness", |r| r.final_fitness),
    ("final_length", |r| r.final_length),
    ("initial_fitness", |r| r.initial_fitness),
    ("gene1_gen", |r| r.growth_gen[0]),
    ("gene2_gen", |r| r.growth_gen[1]),
    ("gene3_gen", |r| r.growth_gen[2]),
    ("ga_best_fitness", |r| r.ga_best_fitness),
    ("ga_best_types", |r| r.ga_best_types),
    ("ga_mean_fitness", |r| r.ga_mean_fitness),
];

/// Aggregates rows per (cell, metric): count, mean, min, max, 95% CI.
/// Pure function of the rows — re-aggregating a raw file reproduces the
/// aggregate file exactly.
pub fn aggregate(rows: &[RawRow]) -> Vec<AggregateRecord> {
    let mut cells: Vec<Cell> = Vec::new();
    for r in rows {
        if !cells.contains(&r.cell) {
            cells.push(r.cell);
        }
    }
    cells.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut out = Vec::new();
    for cell in cells {
        for (metric, get) in METRICS {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.cell == cell)
                .filter_map(get)
                .collect();
            if values.is_empty() {
                continue;
            }
            let ci = if values.len() >= 2 {
                confidence_interval_95(&values).half_width
            } else {
                0.0
            };
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in &values {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            out.push(AggregateRecord {
                cell,
                metric,
                count: values.len(),
                mean,
                min: lo,
                max: hi,
                ci95_half: ci,
            });
        }
    }
    out
}

fn write_aggregate_csv(
    path: &Path,
    grid: &ExperimentGrid,
    records: &[AggregateRecord],
) -> Result<(), ExperimentError> {
    let file = open_with_comment(path, &artifact_comment(grid, "aggregate"))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "n", "k", "g", "p_add", "p_delete", "types_per_add", "metric", "count", "mean", "min",
        "max", "ci95_half",
    ])?;
    for r in records {
        w.write_record([
            r.cell.n.to_string(),
            r.cell.k.to_string(),
            r.cell.g.to_string(),
            format!("{}", r.cell.p_add),
            format!("{}", r.cell.p_delete),
            r.cell.types_per_add.to_string(),
            r.metric.to_string(),
            r.count.to_string(),
            format!("{}", r.mean),
            format!("{}", r.min),
            format!("{}", r.max),
            format!("{}", r.ci95_half),
        ])?;
    }
    w.flush().map_err(|e| ExperimentError::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

/// Re-derives the aggregate records from a raw CSV on disk.
pub fn aggregate_file(raw_path: &Path) -> Result<Vec<AggregateRecord>, ExperimentError> {
    let rows: Vec<RawRow> = read_raw_rows(raw_path)?.into_iter().map(|(_, r)| r).collect();
    Ok(aggregate(&rows))
}

/// Writes a GA trace as CSV: one row per generation with the population
/// composition histogram flattened into `types_<t>` columns.
pub fn write_ga_trace_csv(path: &Path, trace: &GaTrace) -> Result<(), ExperimentError> {
    let cap = trace
        .generations
        .first()
        .map(|g| g.type_histogram.len())
        .unwrap_or(0);
    let mut file = fs::File::create(path).map_err(|e| ExperimentError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    file.write_all(b"# lengthscape ga-trace v1\n")
        .map_err(|e| ExperimentError::Io { path: path.to_path_buf(), source: e })?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec![
        "generation".to_string(),
        "evals_spent".to_string(),
        "mean_fitness".to_string(),
        "best_fitness".to_string(),
        "best_types".to_string(),
        "replaced".to_string(),
    ];
    for t in 1..=cap {
        header.push(format!("types_{t}"));
    }
    w.write_record(&header)?;
    for g in &trace.generations {
        let mut rec = vec![
            g.generation.to_string(),
            g.evals_spent.to_string(),
            format!("{}", g.mean_fitness),
            format!("{}", g.best_fitness),
            g.best_types.to_string(),
            (g.replaced as u8).to_string(),
        ];
        for &h in &g.type_histogram {
            rec.push(h.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| ExperimentError::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_nk_grid() -> ExperimentGrid {
        ExperimentGrid {
            kind: GridKind::NkGrow,
            n_values: vec![6],
            k_values: vec![0, 2],
            g_values: vec![1],
            generations: 200,
            landscapes: 2,
            walks: 2,
            master_seed: 99,
            ..ExperimentGrid::default()
        }
    }

    #[test]
    fn grid_cells_enumerate_axes() {
        let grid = tiny_nk_grid();
        let cells = grid.cells();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].k, 0);
        assert_eq!(cells[1].k, 2);
        assert!(cells.iter().all(|c| c.p_add == 0.5 && c.p_delete == 0.0));
    }

    #[test]
    fn rerun_is_byte_identical_and_resume_completes() {
        let dir = tempfile::tempdir().unwrap();
        let grid = tiny_nk_grid();
        let out = run_grid(&grid, dir.path()).unwrap();
        assert_eq!(out.rows.len(), 8);
        assert!(out.warnings.is_empty());
        let first = fs::read(&out.raw_path).unwrap();

        // Full re-run in a fresh directory: byte-identical.
        let dir2 = tempfile::tempdir().unwrap();
        let out2 = run_grid(&grid, dir2.path()).unwrap();
        assert_eq!(first, fs::read(&out2.raw_path).unwrap());

        // Resume: truncate the raw file to half the rows and re-run.
        let truncated: Vec<RawRow> = out.rows[..4].to_vec();
        write_raw_csv(&out.raw_path, &grid, &truncated).unwrap();
        let resumed = run_grid(&grid, dir.path()).unwrap();
        assert_eq!(first, fs::read(&resumed.raw_path).unwrap());
    }

    #[test]
    fn threads_do_not_change_output() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let grid = tiny_nk_grid();
        let mut threaded = tiny_nk_grid();
        threaded.threads = 4;
        run_grid(&grid, dir1.path()).unwrap();
        run_grid(&threaded, dir2.path()).unwrap();
        assert_eq!(
            fs::read(dir1.path().join("raw.csv")).unwrap(),
            fs::read(dir2.path().join("raw.csv")).unwrap()
        );
    }

    #[test]
    fn aggregate_is_pure_function_of_raw() {
        let dir = tempfile::tempdir().unwrap();
        let grid = tiny_nk_grid();
        let out = run_grid(&grid, dir.path()).unwrap();
        let re = aggregate_file(&out.raw_path).unwrap();
        assert_eq!(out.aggregates, re);
        // And every aggregate respects min <= mean <= max.
        for a in &out.aggregates {
            assert!(a.min <= a.mean + 1e-12 && a.mean <= a.max + 1e-12, "{a:?}");
            assert!(a.ci95_half >= 0.0);
        }
    }

    #[test]
    fn sweep_cells_cover_delete_axis() {
        let grid = ExperimentGrid {
            kind: GridKind::NkDeleteSweep,
            n_values: vec![20],
            k_values: vec![8],
            delete_probabilities: vec![0.0, 0.1, 0.2],
            ..ExperimentGrid::default()
        };
        let cells = grid.cells();
        assert_eq!(cells.len(), 3);
        assert!(cells.iter().all(|c| c.p_add == 0.25));
        assert_eq!(cells[2].p_delete, 0.2);
        // Allele probability fills the remainder in the walk config.
        grid.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_grids() {
        let mut grid = tiny_nk_grid();
        grid.k_values.clear();
        assert!(matches!(run_grid(&grid, Path::new("/nonexistent")), Err(ExperimentError::BadGrid(_))));

        let mut grid = ExperimentGrid { kind: GridKind::GaGrow, ..ExperimentGrid::default() };
        grid.add_counts = vec![3];
        assert!(grid.validate().is_err());

        let mut grid = tiny_nk_grid();
        grid.threads = 0;
        assert!(grid.validate().is_err());
    }

    #[test]
    fn ga_grid_smoke_runs_and_audits_budget() {
        // A micro GA grid against a toy-size tumor: exercises the fixture
        // plumbing end to end without simulating minutes of biology.
        let mut tumor = SimParams::default();
        tumor.domain_size = 400.0;
        tumor.cargo_count = 40;
        tumor.injection_ring_inner = 130.0;
        tumor.injection_ring_outer = 170.0;
        let grid = ExperimentGrid {
            kind: GridKind::GaFixed,
            ga: GaConfig { population: 4, budget: 30, samples: 2, ..GaConfig::default() },
            ga_runs: 2,
            tumor,
            tumor_treatment_days: 0.003,
            ..ExperimentGrid::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let out = run_grid(&grid, dir.path()).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert!(out.warnings.is_empty());
        assert!(out.rows.iter().all(|r| r.ga_best_fitness.is_some()));
        let agg: Vec<_> = out.aggregates.iter().filter(|a| a.metric == "ga_best_fitness").collect();
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].count, 2);
    }
}
