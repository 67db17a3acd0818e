//! Desk-scale agent-based tumor treatment simulator.
//!
//! A 2D analogue of nanoparticle-mediated drug delivery. Cancer cells sit on
//! a square domain with a diffusing oxygen field and divide where oxygen and
//! crowding allow. A *treatment* is a small set of nanoparticle design types
//! ([`NpDesign`]) plus a worker head-count split ([`Treatment`]). Worker
//! agents pick up drug cargo from an injection ring outside the tumor, haul
//! it down the oxygen gradient into the hypoxic core, and release it where
//! oxygen drops below a threshold. The drug wounds any cell its payload
//! touches — whether the cargo is still dangling from a worker or already
//! anchored — and anchored deposits additionally poison adjacent cells
//! outright. Depending on its design a worker type can therefore act as a
//! *ferry* (haul payloads deep and release them) or as a *grazer* (cling to
//! the well-oxygenated rim and wound the dividing cells there with its
//! dangling payload), two roles no single parameter setting covers at once.
//! The figure of merit for a treatment is the number of live cancer cells
//! remaining after a fixed simulated time — lower is better.
//!
//! # Units
//!
//! Distances are micrometers, time is minutes, oxygen is mmHg. All rates are
//! per minute.
//!
//! # Update schedule
//!
//! [`SimState::step`] advances one tick `dt` in a fixed order: oxygen
//! diffusion and uptake, then worker motility and mechanical forces, then
//! cargo attachment and release, then damage/repair/death, then cell
//! division. Motility, forces, and division integrate on a coarser
//! *mechanics interval* (default 0.5 min, i.e. every fifth tick at the
//! default `dt` of 0.1 min); they run in the listed position of the schedule
//! on ticks where they fire. Everything else updates every tick. The fixed
//! order plus two dedicated RNG streams (one for cell events, one for
//! worker/cargo events) make a run a pure function of its inputs and seed.
//!
//! Two deliberate couplings keep a do-nothing treatment *exactly* equal to
//! the no-treatment baseline rather than only statistically close: workers
//! consume oxygen only while actually moving, and cargo only once deposited,
//! so inert agents parked on the injection ring leave the oxygen field — and
//! therefore every cell-stream random draw — untouched.

use crate::rng::derive_seed;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{self, Read, Write};

/// Inclusive bounds for the five [`NpDesign`] parameters, in field order.
pub const NP_DESIGN_BOUNDS: [(f64, f64); 5] =
    [(0.0, 1.0), (0.0, 1.0), (0.0, 10.0), (0.0, 10.0), (0.0, 10.0)];

/// Field names for [`NpDesign`] parameters, in the same order as
/// [`NP_DESIGN_BOUNDS`]. Used for CSV headers and error messages.
pub const NP_DESIGN_FIELDS: [&str; 5] = [
    "attached_migration_bias",
    "unattached_migration_bias",
    "relative_adhesion",
    "relative_repulsion",
    "persistence_time",
];

/// One nanoparticle design: the tunable behavioral parameters of a worker
/// type. All five are bounded; see [`NP_DESIGN_BOUNDS`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NpDesign {
    /// Gradient-following strength while hauling cargo (0 = pure random
    /// walk, 1 = straight down the oxygen gradient).
    pub attached_migration_bias: f64,
    /// Gradient-following strength while empty (0 = pure random walk,
    /// 1 = straight up the oxygen gradient).
    pub unattached_migration_bias: f64,
    /// Worker adhesion strength relative to the shared force scale, 0–10.
    pub relative_adhesion: f64,
    /// Worker repulsion strength relative to the shared force scale, 0–10.
    pub relative_repulsion: f64,
    /// Mean time in minutes between random re-draws of the persistent
    /// motility direction, 0–10.
    pub persistence_time: f64,
}

impl NpDesign {
    /// Read parameter `i` (0–4, field order).
    pub fn get(&self, i: usize) -> f64 {
        match i {
            0 => self.attached_migration_bias,
            1 => self.unattached_migration_bias,
            2 => self.relative_adhesion,
            3 => self.relative_repulsion,
            4 => self.persistence_time,
            _ => panic!("NpDesign parameter index {i} out of range"),
        }
    }

    /// Write parameter `i` (0–4, field order). The value is not clamped;
    /// call [`NpDesign::validate`] or clamp at the call site.
    pub fn set(&mut self, i: usize, v: f64) {
        match i {
            0 => self.attached_migration_bias = v,
            1 => self.unattached_migration_bias = v,
            2 => self.relative_adhesion = v,
            3 => self.relative_repulsion = v,
            4 => self.persistence_time = v,
            _ => panic!("NpDesign parameter index {i} out of range"),
        }
    }

    /// Check every field against its bound.
    pub fn validate(&self) -> Result<(), TreatmentError> {
        for i in 0..5 {
            let v = self.get(i);
            let (lo, hi) = NP_DESIGN_BOUNDS[i];
            if !(lo..=hi).contains(&v) || !v.is_finite() {
                return Err(TreatmentError::ParamOutOfRange {
                    field: NP_DESIGN_FIELDS[i],
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// Uniformly random design within bounds.
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut d = NpDesign {
            attached_migration_bias: 0.0,
            unattached_migration_bias: 0.0,
            relative_adhesion: 0.0,
            relative_repulsion: 0.0,
            persistence_time: 0.0,
        };
        for i in 0..5 {
            let (lo, hi) = NP_DESIGN_BOUNDS[i];
            d.set(i, rng.gen_range(lo..=hi));
        }
        d
    }
}

/// Ways a treatment or design can be invalid. The message always names the
/// offending field.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TreatmentError {
    #[error("np_types: treatment must have at least 1 type")]
    NoTypes,
    #[error("np_types: treatment has {0} types, maximum is 10")]
    TooManyTypes(usize),
    #[error("worker_counts: sum {0} != 50")]
    BadWorkerSum(u32),
    #[error("worker_counts: counts differ by more than 1: {0:?}")]
    CountsUneven(Vec<u32>),
    #[error("worker_counts: {counts} counts for {types} types")]
    CountsMismatch { counts: usize, types: usize },
    #[error("{field}: value {value} outside its allowed range")]
    ParamOutOfRange { field: &'static str, value: f64 },
}

/// A full treatment: an ordered list of 1–10 nanoparticle types and a
/// per-type worker head count summing to 50, with counts differing by at
/// most 1 (earlier types receive the remainder).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Treatment {
    np_types: Vec<NpDesign>,
    worker_counts: Vec<u32>,
}

impl Treatment {
    /// Hard cap on the number of distinct types.
    pub const MAX_TYPES: usize = 10;
    /// Total workers injected, split across types.
    pub const TOTAL_WORKERS: u32 = 50;

    /// Build a treatment from a type list, deriving the worker split.
    pub fn new(np_types: Vec<NpDesign>) -> Result<Self, TreatmentError> {
        let counts = Self::split(np_types.len())?;
        let t = Treatment { np_types, worker_counts: counts };
        t.validate()?;
        Ok(t)
    }

    /// The even worker split for `n` types: every type gets ⌊50/n⌋ workers
    /// and the first `50 mod n` types get one extra.
    pub fn split(n: usize) -> Result<Vec<u32>, TreatmentError> {
        if n == 0 {
            return Err(TreatmentError::NoTypes);
        }
        if n > Self::MAX_TYPES {
            return Err(TreatmentError::TooManyTypes(n));
        }
        let base = Self::TOTAL_WORKERS / n as u32;
        let extra = Self::TOTAL_WORKERS as usize % n;
        Ok((0..n).map(|i| base + u32::from(i < extra)).collect())
    }

    /// Uniformly random treatment with `n_types` types.
    pub fn random(n_types: usize, rng: &mut impl Rng) -> Result<Self, TreatmentError> {
        Self::new((0..n_types).map(|_| NpDesign::random(rng)).collect())
    }

    /// Check every invariant: type count in 1–10, designs in bounds, counts
    /// matching the canonical split.
    pub fn validate(&self) -> Result<(), TreatmentError> {
        let n = self.np_types.len();
        if n == 0 {
            return Err(TreatmentError::NoTypes);
        }
        if n > Self::MAX_TYPES {
            return Err(TreatmentError::TooManyTypes(n));
        }
        if self.worker_counts.len() != n {
            return Err(TreatmentError::CountsMismatch { counts: self.worker_counts.len(), types: n });
        }
        let sum: u32 = self.worker_counts.iter().sum();
        if sum != Self::TOTAL_WORKERS {
            return Err(TreatmentError::BadWorkerSum(sum));
        }
        let min = *self.worker_counts.iter().min().unwrap();
        let max = *self.worker_counts.iter().max().unwrap();
        if max - min > 1 {
            return Err(TreatmentError::CountsUneven(self.worker_counts.clone()));
        }
        for d in &self.np_types {
            d.validate()?;
        }
        Ok(())
    }

    pub fn np_types(&self) -> &[NpDesign] {
        &self.np_types
    }

    /// Number of distinct worker types.
    pub fn type_count(&self) -> usize {
        self.np_types.len()
    }

    pub fn worker_counts(&self) -> &[u32] {
        &self.worker_counts
    }

    /// Append `n` random types, re-deriving the worker split. Fails if the
    /// result would exceed [`Treatment::MAX_TYPES`]; the treatment is left
    /// unchanged in that case.
    pub fn add_random_types(&mut self, n: usize, rng: &mut impl Rng) -> Result<(), TreatmentError> {
        let new_len = self.np_types.len() + n;
        let counts = Self::split(new_len)?;
        for _ in 0..n {
            self.np_types.push(NpDesign::random(rng));
        }
        self.worker_counts = counts;
        Ok(())
    }

    /// Total number of scalar parameters (5 per type).
    pub fn param_count(&self) -> usize {
        self.np_types.len() * 5
    }

    /// Read flat parameter `i` (type-major: type 0 fields 0–4, then type 1…).
    pub fn get_param(&self, i: usize) -> f64 {
        self.np_types[i / 5].get(i % 5)
    }

    /// Write flat parameter `i`, clamping to its bound.
    pub fn set_param_clamped(&mut self, i: usize, v: f64) {
        let (lo, hi) = NP_DESIGN_BOUNDS[i % 5];
        self.np_types[i / 5].set(i % 5, v.clamp(lo, hi));
    }

    /// Bounds of flat parameter `i`.
    pub fn param_range(i: usize) -> (f64, f64) {
        NP_DESIGN_BOUNDS[i % 5]
    }
}

/// All simulation parameters. The first block mirrors the fixed rates of
/// the transport scenario being modeled; the second block configures the
/// desk-scale analogue itself (geometry, oxygen physics, cell cycle).
///
/// Every field can be overridden from a config file; [`SimParams::default`]
/// is the reference configuration used by the shipped fixtures.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SimParams {
    // --- fixed transport-scenario rates ---
    /// Damage accrued by a cancer cell per minute per adjacent cargo
    /// payload (carried or deposited), on a 0–1 scale where 1 is lethal.
    pub damage_rate: f64,
    /// Exponential decay rate of accumulated damage.
    pub repair_rate: f64,
    /// Probability per minute that a cell in contact with deposited cargo
    /// dies outright.
    pub drug_death_rate: f64,
    /// Relaxation rate of the elastic bond dragging carried cargo after its
    /// worker.
    pub elastic_coefficient: f64,
    /// Cargo oxygen uptake as a fraction of `cancer_o2_uptake`; applies only
    /// once the cargo is deposited.
    pub cargo_o2_relative_uptake: f64,
    /// Probability per minute that a cargo agent degrades and vanishes.
    pub cargo_apoptosis_rate: f64,
    /// Cargo adhesion strength on the shared force scale.
    pub cargo_relative_adhesion: f64,
    /// Cargo repulsion strength on the shared force scale.
    pub cargo_relative_repulsion: f64,
    /// Carried cargo is released where oxygen falls below this (mmHg).
    pub cargo_release_o2_threshold: f64,
    /// Adhesion reaches this multiple of the two radii's sum; also the drug
    /// contact radius for deposited cargo.
    pub max_relative_adhesion_distance: f64,
    /// Hard cap on worker–carried-cargo separation (µm).
    pub max_elastic_displacement: f64,
    /// A worker grabs cargo only from within this distance (µm) …
    pub max_attachment_distance: f64,
    /// … and no closer than this (µm).
    pub min_attachment_distance: f64,
    /// Below this oxygen-gradient magnitude (mmHg/µm) a worker cannot sense
    /// direction and its bias term switches off.
    pub motility_shutdown_threshold: f64,
    /// Cargo is only grabbable while its surface receptor level is at or
    /// above this; deposition consumes the receptor.
    pub attachment_receptor_threshold: f64,
    /// Worker self-propulsion speed (µm/min).
    pub worker_speed: f64,
    /// Probability per minute that a worker dies (0: workers are permanent).
    pub worker_apoptosis_rate: f64,
    /// Worker oxygen uptake as a fraction of `cancer_o2_uptake`; applies
    /// only while the worker is actually moving.
    pub worker_o2_relative_uptake: f64,

    // --- analogue-only knobs: oxygen field ---
    /// Oxygen diffusion coefficient (µm²/min), desk-scale.
    pub oxygen_diffusion: f64,
    /// Background oxygen decay rate (0 keeps an empty domain static).
    pub oxygen_decay: f64,
    /// Far-field oxygen held at the domain boundary (mmHg).
    pub oxygen_boundary: f64,
    /// Oxygen grid node spacing (µm).
    pub grid_spacing: f64,
    /// Side length of the square domain (µm).
    pub domain_size: f64,

    // --- analogue-only knobs: cells and mechanics ---
    /// Cancer cell oxygen uptake rate (fraction of local O2 per minute per
    /// cell); the reference for the two relative uptakes above.
    pub cancer_o2_uptake: f64,
    /// Cancer cell radius (µm).
    pub cell_radius: f64,
    /// Worker and cargo agent radius (µm).
    pub agent_radius: f64,
    /// Cancer cell adhesion strength on the shared force scale.
    pub cancer_relative_adhesion: f64,
    /// Cancer cell repulsion strength on the shared force scale.
    pub cancer_relative_repulsion: f64,
    /// Probability per minute that an eligible cell divides.
    pub division_rate: f64,
    /// Cells divide only where oxygen is at least this (mmHg).
    pub division_o2_threshold: f64,
    /// Cells divide only while their summed neighbor overlap is below this.
    pub division_pressure_threshold: f64,
    /// Motility, forces, and division integrate on this interval (min).
    pub mechanics_interval: f64,

    // --- analogue-only knobs: injection protocol ---
    /// Number of cargo agents injected per treatment.
    pub cargo_count: usize,
    /// Inner radius of the injection ring (µm from the domain center).
    pub injection_ring_inner: f64,
    /// Outer radius of the injection ring (µm from the domain center).
    pub injection_ring_outer: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            damage_rate: 0.03333,
            repair_rate: 0.004167,
            drug_death_rate: 0.004167,
            elastic_coefficient: 0.05,
            cargo_o2_relative_uptake: 0.1,
            cargo_apoptosis_rate: 4.065e-5,
            cargo_relative_adhesion: 0.0,
            cargo_relative_repulsion: 5.0,
            cargo_release_o2_threshold: 10.0,
            max_relative_adhesion_distance: 1.25,
            max_elastic_displacement: 50.0,
            max_attachment_distance: 18.0,
            min_attachment_distance: 14.0,
            motility_shutdown_threshold: 0.001,
            attachment_receptor_threshold: 0.1,
            worker_speed: 2.0,
            worker_apoptosis_rate: 0.0,
            worker_o2_relative_uptake: 0.1,

            oxygen_diffusion: 800.0,
            oxygen_decay: 0.0,
            oxygen_boundary: 38.0,
            grid_spacing: 20.0,
            domain_size: 1500.0,

            cancer_o2_uptake: 0.05,
            cell_radius: 8.0,
            agent_radius: 5.0,
            cancer_relative_adhesion: 0.4,
            cancer_relative_repulsion: 10.0,
            division_rate: 5.4e-4,
            division_o2_threshold: 11.0,
            division_pressure_threshold: 0.5,
            mechanics_interval: 0.5,

            cargo_count: 450,
            injection_ring_inner: 380.0,
            injection_ring_outer: 460.0,
        }
    }
}

/// Ways a parameter set can be unusable.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParamsError {
    #[error("{field}: rate must be finite and >= 0, got {value}")]
    NegativeRate { field: &'static str, value: f64 },
    #[error("min_attachment_distance: {min} must be < max_attachment_distance {max}")]
    AttachmentWindow { min: f64, max: f64 },
    #[error("{field}: must be finite and > 0, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("injection_ring_inner: {inner} must be < injection_ring_outer {outer}")]
    RingOrder { inner: f64, outer: f64 },
}

impl SimParams {
    /// Validate rate signs, the attachment window, and geometry.
    pub fn validate(&self) -> Result<(), ParamsError> {
        let rates: [(&'static str, f64); 12] = [
            ("damage_rate", self.damage_rate),
            ("repair_rate", self.repair_rate),
            ("drug_death_rate", self.drug_death_rate),
            ("elastic_coefficient", self.elastic_coefficient),
            ("cargo_o2_relative_uptake", self.cargo_o2_relative_uptake),
            ("cargo_apoptosis_rate", self.cargo_apoptosis_rate),
            ("worker_speed", self.worker_speed),
            ("worker_apoptosis_rate", self.worker_apoptosis_rate),
            ("worker_o2_relative_uptake", self.worker_o2_relative_uptake),
            ("cancer_o2_uptake", self.cancer_o2_uptake),
            ("division_rate", self.division_rate),
            ("oxygen_decay", self.oxygen_decay),
        ];
        for (field, value) in rates {
            if !value.is_finite() || value < 0.0 {
                return Err(ParamsError::NegativeRate { field, value });
            }
        }
        if self.min_attachment_distance >= self.max_attachment_distance {
            return Err(ParamsError::AttachmentWindow {
                min: self.min_attachment_distance,
                max: self.max_attachment_distance,
            });
        }
        let positives: [(&'static str, f64); 6] = [
            ("grid_spacing", self.grid_spacing),
            ("domain_size", self.domain_size),
            ("cell_radius", self.cell_radius),
            ("agent_radius", self.agent_radius),
            ("mechanics_interval", self.mechanics_interval),
            ("oxygen_boundary", self.oxygen_boundary),
        ];
        for (field, value) in positives {
            if !value.is_finite() || value <= 0.0 {
                return Err(ParamsError::NonPositive { field, value });
            }
        }
        if self.injection_ring_inner >= self.injection_ring_outer {
            return Err(ParamsError::RingOrder {
                inner: self.injection_ring_inner,
                outer: self.injection_ring_outer,
            });
        }
        Ok(())
    }

    /// Largest `dt` the explicit oxygen update tolerates:
    /// `D·dt/dx² ≤ 0.25`.
    pub fn max_stable_dt(&self) -> f64 {
        0.25 * self.grid_spacing * self.grid_spacing / self.oxygen_diffusion.max(f64::MIN_POSITIVE)
    }
}

/// Errors from advancing the simulation.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StepError {
    #[error("dt {dt} must be > 0")]
    NonPositiveDt { dt: f64 },
    #[error("dt {dt} exceeds the diffusion stability bound {bound} (D*dt/dx^2 must be <= 0.25)")]
    UnstableDt { dt: f64, bound: f64 },
}

/// One cancer cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub x: f64,
    pub y: f64,
    /// Accumulated drug damage, 0–1 scale; the cell dies at 1.
    pub damage: f64,
    pub alive: bool,
}

/// One worker agent (nanoparticle).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Worker {
    pub x: f64,
    pub y: f64,
    /// Persistent random component of the motility direction (unit vector).
    pub dir_x: f64,
    pub dir_y: f64,
    /// Index into the treatment's type list.
    pub type_index: u32,
    /// Index of the carried cargo, if any.
    pub attached: Option<u32>,
    /// Whether the worker actually moved on the latest mechanics tick;
    /// gates its oxygen uptake.
    pub moving: bool,
}

/// Life-cycle state of a cargo agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CargoState {
    /// Sitting on the injection ring, grabbable.
    Waiting,
    /// Attached to a worker and being hauled.
    Carried,
    /// Released in the tumor; damages nearby cells.
    Deposited,
    /// Degraded; out of play.
    Gone,
}

/// One cargo agent (a parcel of drug).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cargo {
    pub x: f64,
    pub y: f64,
    pub state: CargoState,
    /// Surface receptor level; attachment requires it at or above the
    /// receptor threshold, and deposition zeroes it.
    pub receptor: f64,
}

/// The oxygen field: node values on a regular grid covering the domain,
/// with the outermost node ring held at the far-field boundary value.
#[derive(Debug, Clone)]
pub struct OxygenField {
    nx: usize,
    ny: usize,
    dx: f64,
    values: Vec<f64>,
    scratch: Vec<f64>,
}

impl PartialEq for OxygenField {
    fn eq(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.dx == other.dx && self.values == other.values
    }
}

impl OxygenField {
    fn new(domain_size: f64, dx: f64, boundary: f64) -> Self {
        let nx = (domain_size / dx).round() as usize + 1;
        OxygenField { nx, ny: nx, dx, values: vec![boundary; nx * nx], scratch: vec![boundary; nx * nx] }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn node(&self, x: f64, y: f64) -> usize {
        let i = (x / self.dx).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = (y / self.dx).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        j * self.nx + i
    }

    /// Oxygen at the node nearest (x, y).
    #[inline]
    pub fn at(&self, x: f64, y: f64) -> f64 {
        self.values[self.node(x, y)]
    }

    /// Central-difference oxygen gradient (mmHg/µm) at the node nearest
    /// (x, y); one-sided at the boundary.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let i = (x / self.dx).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = (y / self.dx).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        let ip = (i + 1).min(self.nx - 1);
        let im = i.saturating_sub(1);
        let jp = (j + 1).min(self.ny - 1);
        let jm = j.saturating_sub(1);
        let gx = (self.values[j * self.nx + ip] - self.values[j * self.nx + im]) / ((ip - im) as f64 * self.dx);
        let gy = (self.values[jp * self.nx + i] - self.values[jm * self.nx + i]) / ((jp - jm) as f64 * self.dx);
        (gx, gy)
    }

    /// One explicit diffusion + decay update with Dirichlet boundary.
    fn diffuse(&mut self, diffusion: f64, decay: f64, boundary: f64, dt: f64) {
        let nx = self.nx;
        let ny = self.ny;
        let alpha = diffusion * dt / (self.dx * self.dx);
        let keep = 1.0 - decay * dt;
        // Row-slice iteration so the stencil loop stays bounds-check-free.
        for j in 1..ny - 1 {
            let (above, tail) = self.values[(j - 1) * nx..].split_at(nx);
            let (row, tail) = tail.split_at(nx);
            let below = &tail[..nx];
            let out = &mut self.scratch[j * nx..(j + 1) * nx];
            for i in 1..nx - 1 {
                let c = row[i];
                let lap = row[i - 1] + row[i + 1] + above[i] + below[i] - 4.0 * c;
                out[i] = c * keep + alpha * lap;
            }
        }
        for i in 0..nx {
            self.scratch[i] = boundary;
            self.scratch[(ny - 1) * nx + i] = boundary;
        }
        for j in 0..ny {
            self.scratch[j * nx] = boundary;
            self.scratch[j * nx + nx - 1] = boundary;
        }
        std::mem::swap(&mut self.values, &mut self.scratch);
    }

    /// Multiplicative local uptake at the node nearest (x, y).
    #[inline]
    fn consume(&mut self, x: f64, y: f64, rate: f64, dt: f64) {
        let idx = self.node(x, y);
        self.values[idx] *= 1.0 - (rate * dt).min(1.0);
    }
}

/// Reusable spatial hash (linked-list binning) for neighbor queries.
#[derive(Debug, Clone, Default)]
struct BinGrid {
    bin: f64,
    nx: usize,
    ny: usize,
    heads: Vec<i32>,
    next: Vec<i32>,
}

impl BinGrid {
    fn reset(&mut self, domain: f64, bin: f64, capacity: usize) {
        self.bin = bin;
        self.nx = (domain / bin).ceil() as usize + 1;
        self.ny = self.nx;
        self.heads.clear();
        self.heads.resize(self.nx * self.ny, -1);
        self.next.clear();
        self.next.resize(capacity, -1);
    }

    #[inline]
    fn bin_of(&self, x: f64, y: f64) -> (usize, usize) {
        let i = ((x / self.bin) as usize).min(self.nx - 1);
        let j = ((y / self.bin) as usize).min(self.ny - 1);
        (i, j)
    }

    #[inline]
    fn insert(&mut self, idx: usize, x: f64, y: f64) {
        let (i, j) = self.bin_of(x, y);
        let b = j * self.nx + i;
        self.next[idx] = self.heads[b];
        self.heads[b] = idx as i32;
    }

    /// Call `f(idx)` for every entry in the 3×3 bin block around (x, y).
    #[inline]
    fn for_neighbors(&self, x: f64, y: f64, mut f: impl FnMut(usize)) {
        let (ci, cj) = self.bin_of(x, y);
        let i0 = ci.saturating_sub(1);
        let j0 = cj.saturating_sub(1);
        let i1 = (ci + 1).min(self.nx - 1);
        let j1 = (cj + 1).min(self.ny - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let mut cur = self.heads[j * self.nx + i];
                while cur >= 0 {
                    f(cur as usize);
                    cur = self.next[cur as usize];
                }
            }
        }
    }
}

/// Scratch buffers rebuilt during stepping; never serialized or compared.
#[derive(Debug, Clone, Default)]
struct Scratch {
    waiting_cargo: BinGrid,
    cell_grid: BinGrid,
    // Struct-of-arrays body snapshot for the force pass (positions, radius,
    // adhesion, repulsion, original body id), rebuilt every mechanics tick.
    sx: Vec<f64>,
    sy: Vec<f64>,
    srad: Vec<f64>,
    sadh: Vec<f64>,
    srep: Vec<f64>,
    sid: Vec<u32>,
    /// Snapshot index of each worker.
    wsnap: Vec<u32>,
    // Counting-sort spatial index over the snapshot.
    bin_starts: Vec<u32>,
    bin_cursor: Vec<u32>,
    bin_order: Vec<u32>,
    force_x: Vec<f64>,
    force_y: Vec<f64>,
    pressure: Vec<f64>,
    // Deposited-cargo -> cell contact entries, refreshed when positions or
    // the deposited set change.
    contact_list: Vec<u32>,
    // Carried-cargo -> cell contacts, rescanned every step (payloads move).
    carried_contacts: Vec<u32>,
    contacted: Vec<bool>,
    drugged: Vec<bool>,
    touched: Vec<u32>,
    // Oxygen node index per cell; cells only move on mechanics ticks, so
    // the uptake and division passes can reuse these between rebuilds.
    cell_nodes: Vec<u32>,
    waiting_grid_valid: bool,
    cell_grid_valid: bool,
    contacts_valid: bool,
    cell_nodes_valid: bool,
}

/// Everything that evolves during a run: cells, workers, cargo, the oxygen
/// field, and the clock, plus the designs the workers follow and the two
/// RNG streams. Equality compares the physical state (clock, agents, field,
/// designs) and ignores RNG internals and scratch buffers.
#[derive(Debug, Clone)]
pub struct SimState {
    pub clock: f64,
    steps: u64,
    pub cells: Vec<Cell>,
    pub workers: Vec<Worker>,
    pub cargo: Vec<Cargo>,
    /// The worker type designs currently in play (empty before injection).
    pub designs: Vec<NpDesign>,
    pub oxygen: OxygenField,
    rng_cells: ChaCha8Rng,
    rng_agents: ChaCha8Rng,
    scratch: Scratch,
}

impl PartialEq for SimState {
    /// Physical-state equality: clock, step count, agents, designs, oxygen.
    fn eq(&self, other: &Self) -> bool {
        self.clock == other.clock
            && self.steps == other.steps
            && self.cells == other.cells
            && self.workers == other.workers
            && self.cargo == other.cargo
            && self.designs == other.designs
            && self.oxygen == other.oxygen
    }
}

/// RNG stream tags: stream 1 drives cell events (division, drug death),
/// stream 2 drives worker/cargo events (placement, motility, degradation).
const STREAM_CELLS: u64 = 1;
const STREAM_AGENTS: u64 = 2;

impl SimState {
    /// Fresh state: a hexagonally packed disc of cancer cells of the given
    /// radius at the domain center, oxygen at the boundary value everywhere,
    /// no workers or cargo, clock at zero.
    pub fn tumor_disc(params: &SimParams, radius: f64, seed: u64) -> SimState {
        let spacing = 2.0 * params.cell_radius;
        let row_h = spacing * 3f64.sqrt() / 2.0;
        let c = params.domain_size / 2.0;
        let mut cells = Vec::new();
        let rows = (radius / row_h).ceil() as i64 + 1;
        let cols = (radius / spacing).ceil() as i64 + 1;
        for j in -rows..=rows {
            let y = j as f64 * row_h;
            let x_off = if j.rem_euclid(2) == 1 { spacing / 2.0 } else { 0.0 };
            for i in -cols..=cols {
                let x = i as f64 * spacing + x_off;
                if x * x + y * y <= radius * radius {
                    cells.push(Cell { x: c + x, y: c + y, damage: 0.0, alive: true });
                }
            }
        }
        SimState {
            clock: 0.0,
            steps: 0,
            cells,
            workers: Vec::new(),
            cargo: Vec::new(),
            designs: Vec::new(),
            oxygen: OxygenField::new(params.domain_size, params.grid_spacing, params.oxygen_boundary),
            rng_cells: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_CELLS])),
            rng_agents: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_AGENTS])),
            scratch: Scratch::default(),
        }
    }

    /// Re-seed both RNG streams from a fresh master seed. Used when reusing
    /// a saved tumor for independently seeded treatment runs.
    pub fn reseed(&mut self, seed: u64) {
        self.rng_cells = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_CELLS]));
        self.rng_agents = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_AGENTS]));
    }

    /// Number of live cancer cells.
    pub fn alive_count(&self) -> usize {
        self.cells.iter().filter(|c| c.alive).count()
    }

    /// Number of cargo agents in a given state.
    pub fn cargo_in_state(&self, state: CargoState) -> usize {
        self.cargo.iter().filter(|c| c.state == state).count()
    }

    /// Place the treatment's workers and the drug cargo uniformly on the
    /// injection ring. Fails (leaving the state untouched) if the treatment
    /// is invalid.
    pub fn inject(&mut self, treatment: &Treatment, params: &SimParams) -> Result<(), TreatmentError> {
        treatment.validate()?;
        self.designs = treatment.np_types().to_vec();
        let c = params.domain_size / 2.0;
        let r0 = params.injection_ring_inner;
        let r1 = params.injection_ring_outer;
        let ring_point = |rng: &mut ChaCha8Rng| loop {
            let x = rng.gen_range(-r1..=r1);
            let y = rng.gen_range(-r1..=r1);
            let d2 = x * x + y * y;
            if d2 >= r0 * r0 && d2 <= r1 * r1 {
                return (c + x, c + y);
            }
        };
        for _ in 0..params.cargo_count {
            let (x, y) = ring_point(&mut self.rng_agents);
            self.cargo.push(Cargo { x, y, state: CargoState::Waiting, receptor: 1.0 });
        }
        for (type_index, &count) in treatment.worker_counts().iter().enumerate() {
            for _ in 0..count {
                let (x, y) = ring_point(&mut self.rng_agents);
                let (dir_x, dir_y) = random_unit(&mut self.rng_agents);
                self.workers.push(Worker {
                    x,
                    y,
                    dir_x,
                    dir_y,
                    type_index: type_index as u32,
                    attached: None,
                    moving: false,
                });
            }
        }
        self.scratch.waiting_grid_valid = false;
        Ok(())
    }

    /// Advance one tick of `dt` minutes. See the module docs for the update
    /// schedule.
    pub fn step(&mut self, params: &SimParams, dt: f64) -> Result<(), StepError> {
        if !(dt > 0.0) {
            return Err(StepError::NonPositiveDt { dt });
        }
        let bound = params.max_stable_dt();
        if dt > bound * (1.0 + 1e-12) {
            return Err(StepError::UnstableDt { dt, bound });
        }
        self.steps += 1;
        let stride = (params.mechanics_interval / dt).round().max(1.0) as u64;
        let mechanics_tick = self.steps % stride == 0;
        let dt_mech = stride as f64 * dt;

        self.update_oxygen(params, dt);
        if mechanics_tick {
            self.mechanics(params, dt_mech);
        }
        self.attachment_and_release(params);
        self.damage_and_death(params, dt);
        if mechanics_tick {
            self.division(params, dt_mech);
            self.agent_lifecycle(params, dt_mech);
        }
        self.clock += dt;
        Ok(())
    }

    /// Advance `minutes` of simulated time in ticks of `dt`.
    pub fn run(&mut self, params: &SimParams, minutes: f64, dt: f64) -> Result<(), StepError> {
        let n = (minutes / dt).round() as u64;
        for _ in 0..n {
            self.step(params, dt)?;
        }
        Ok(())
    }

    /// Rebuild the per-cell oxygen-node cache if stale.
    fn ensure_cell_nodes(&mut self) {
        if self.scratch.cell_nodes_valid {
            return;
        }
        let nodes = &mut self.scratch.cell_nodes;
        nodes.clear();
        nodes.reserve(self.cells.len());
        for cell in &self.cells {
            nodes.push(self.oxygen.node(cell.x, cell.y) as u32);
        }
        self.scratch.cell_nodes_valid = true;
    }

    fn update_oxygen(&mut self, params: &SimParams, dt: f64) {
        self.oxygen
            .diffuse(params.oxygen_diffusion, params.oxygen_decay, params.oxygen_boundary, dt);
        self.ensure_cell_nodes();
        let factor = 1.0 - (params.cancer_o2_uptake * dt).min(1.0);
        for (cell, &node) in self.cells.iter().zip(&self.scratch.cell_nodes) {
            if cell.alive {
                self.oxygen.values[node as usize] *= factor;
            }
        }
        let base = params.cancer_o2_uptake;
        let worker_rate = params.worker_o2_relative_uptake * base;
        if worker_rate > 0.0 {
            for w in &self.workers {
                if w.moving {
                    self.oxygen.consume(w.x, w.y, worker_rate, dt);
                }
            }
        }
        let cargo_rate = params.cargo_o2_relative_uptake * base;
        if cargo_rate > 0.0 {
            for c in &self.cargo {
                if c.state == CargoState::Deposited {
                    self.oxygen.consume(c.x, c.y, cargo_rate, dt);
                }
            }
        }
    }

    /// Worker motility plus pairwise adhesion/repulsion among cells,
    /// workers, and un-carried cargo; then carried-cargo bond drag.
    /// Cargo never moves from forces (ring cargo rests in place, deposited
    /// cargo is anchored), but exerts them on others.
    fn mechanics(&mut self, params: &SimParams, dt_mech: f64) {
        let n_cells = self.cells.len();
        let n_workers = self.workers.len();
        let n_cargo = self.cargo.len();
        let n_bodies = n_cells + n_workers + n_cargo;
        let interaction_reach =
            2.0 * params.cell_radius.max(params.agent_radius) * params.max_relative_adhesion_distance;
        let bin = interaction_reach.max(params.grid_spacing);

        let SimState { cells, workers, cargo, designs, oxygen, rng_agents, scratch, .. } = self;
        let Scratch {
            sx,
            sy,
            srad,
            sadh,
            srep,
            sid,
            wsnap,
            bin_starts,
            bin_cursor,
            bin_order,
            force_x,
            force_y,
            pressure,
            cell_grid_valid,
            contacts_valid,
            cell_nodes_valid,
            ..
        } = scratch;

        // Snapshot the mechanical bodies into flat arrays: live cells first,
        // then workers (the movers), then passive un-carried cargo.
        sx.clear();
        sy.clear();
        srad.clear();
        sadh.clear();
        srep.clear();
        sid.clear();
        wsnap.clear();
        for (i, cell) in cells.iter().enumerate() {
            if cell.alive {
                sx.push(cell.x);
                sy.push(cell.y);
                srad.push(params.cell_radius);
                sadh.push(params.cancer_relative_adhesion);
                srep.push(params.cancer_relative_repulsion);
                sid.push(i as u32);
            }
        }
        for (i, w) in workers.iter().enumerate() {
            let d = &designs[w.type_index as usize];
            wsnap.push(sx.len() as u32);
            sx.push(w.x);
            sy.push(w.y);
            srad.push(params.agent_radius);
            sadh.push(d.relative_adhesion);
            srep.push(d.relative_repulsion);
            sid.push((n_cells + i) as u32);
        }
        let n_movers = sx.len();
        for (i, c) in cargo.iter().enumerate() {
            if matches!(c.state, CargoState::Waiting | CargoState::Deposited) {
                sx.push(c.x);
                sy.push(c.y);
                srad.push(params.agent_radius);
                sadh.push(params.cargo_relative_adhesion);
                srep.push(params.cargo_relative_repulsion);
                sid.push((n_cells + n_workers + i) as u32);
            }
        }
        let n_snap = sx.len();
        debug_assert!(n_snap <= n_bodies);

        // Counting-sort the snapshot into square bins.
        let nbx = (params.domain_size / bin).ceil() as usize + 1;
        let nbins = nbx * nbx;
        let bin_of = |x: f64, y: f64| -> usize {
            let i = ((x / bin) as usize).min(nbx - 1);
            let j = ((y / bin) as usize).min(nbx - 1);
            j * nbx + i
        };
        bin_starts.clear();
        bin_starts.resize(nbins + 1, 0);
        for a in 0..n_snap {
            bin_starts[bin_of(sx[a], sy[a]) + 1] += 1;
        }
        for b in 0..nbins {
            bin_starts[b + 1] += bin_starts[b];
        }
        bin_cursor.clear();
        bin_cursor.extend_from_slice(&bin_starts[..nbins]);
        bin_order.clear();
        bin_order.resize(n_snap, 0);
        for a in 0..n_snap {
            let b = bin_of(sx[a], sy[a]);
            bin_order[bin_cursor[b] as usize] = a as u32;
            bin_cursor[b] += 1;
        }

        force_x.clear();
        force_x.resize(n_movers, 0.0);
        force_y.clear();
        force_y.resize(n_movers, 0.0);
        pressure.clear();
        pressure.resize(n_cells, 0.0);

        // Force accumulation over unique pairs (half stencil: each pair is
        // visited once and applied to both sides). Passive cargo exerts on
        // movers but feels nothing, and cargo-cargo pairs are skipped.
        let max_rel = params.max_relative_adhesion_distance;
        let mut pair = |a: usize, b: usize| {
            if a >= n_movers && b >= n_movers {
                return;
            }
            let dxp = sx[a] - sx[b];
            let dyp = sy[a] - sy[b];
            let d2 = dxp * dxp + dyp * dyp;
            let r_sum = srad[a] + srad[b];
            let r_adh = r_sum * max_rel;
            if d2 >= r_adh * r_adh || d2 < 1e-12 {
                return;
            }
            let d = d2.sqrt();
            let ux = dxp / d;
            let uy = dyp / d;
            let mut f = 0.0;
            if d < r_sum {
                let overlap = 1.0 - d / r_sum;
                let o2 = overlap * overlap;
                f += (srep[a] * srep[b]).sqrt() * o2;
                if (sid[a] as usize) < n_cells {
                    pressure[sid[a] as usize] += o2;
                }
                if b < n_movers && (sid[b] as usize) < n_cells {
                    pressure[sid[b] as usize] += o2;
                }
            }
            let reach = 1.0 - d / r_adh;
            f -= (sadh[a] * sadh[b]).sqrt() * reach * reach;
            let fx = f * ux;
            let fy = f * uy;
            if a < n_movers {
                force_x[a] += fx;
                force_y[a] += fy;
            }
            if b < n_movers {
                force_x[b] -= fx;
                force_y[b] -= fy;
            }
        };
        for bj in 0..nbx {
            let row = bj * nbx;
            for bi in 0..nbx {
                let lo = bin_starts[row + bi] as usize;
                let hi = bin_starts[row + bi + 1] as usize;
                if lo == hi {
                    continue;
                }
                for p in lo..hi {
                    let a = bin_order[p] as usize;
                    for &qu in &bin_order[p + 1..hi] {
                        pair(a, qu as usize);
                    }
                    // East neighbor bin.
                    if bi + 1 < nbx {
                        let elo = bin_starts[row + bi + 1] as usize;
                        let ehi = bin_starts[row + bi + 2] as usize;
                        for &qu in &bin_order[elo..ehi] {
                            pair(a, qu as usize);
                        }
                    }
                    // The three bins of the next row are contiguous.
                    if bj + 1 < nbx {
                        let nrow = row + nbx;
                        let slo = bin_starts[nrow + bi.saturating_sub(1)] as usize;
                        let shi = bin_starts[nrow + (bi + 1).min(nbx - 1) + 1] as usize;
                        for &qu in &bin_order[slo..shi] {
                            pair(a, qu as usize);
                        }
                    }
                }
            }
        }

        // Worker motility velocities add onto the force field.
        for (i, w) in workers.iter_mut().enumerate() {
            let design = &designs[w.type_index as usize];
            let tau = design.persistence_time;
            let u: f64 = rng_agents.gen();
            if tau <= dt_mech || u < dt_mech / tau {
                let (dx, dy) = random_unit(rng_agents);
                w.dir_x = dx;
                w.dir_y = dy;
            }
            let (gx, gy) = oxygen.gradient(w.x, w.y);
            let gmag = (gx * gx + gy * gy).sqrt();
            let (bias, sign) = if w.attached.is_some() {
                (design.attached_migration_bias, -1.0)
            } else {
                (design.unattached_migration_bias, 1.0)
            };
            let (bx, by) = if gmag >= params.motility_shutdown_threshold {
                (sign * gx / gmag, sign * gy / gmag)
            } else {
                (0.0, 0.0)
            };
            let mx = bias * bx + (1.0 - bias) * w.dir_x;
            let my = bias * by + (1.0 - bias) * w.dir_y;
            let mmag = (mx * mx + my * my).sqrt();
            if mmag > 1e-9 && params.worker_speed > 0.0 {
                let id = wsnap[i] as usize;
                force_x[id] += params.worker_speed * mx / mmag;
                force_y[id] += params.worker_speed * my / mmag;
                w.moving = true;
            } else {
                w.moving = false;
            }
        }

        // Integrate positions; clamp the per-tick displacement and keep
        // everything inside the domain.
        let max_disp = 8.0f64.min(bin / 2.0);
        let lo = params.agent_radius;
        let hi = params.domain_size - params.agent_radius;
        for a in 0..n_movers {
            let mut ddx = force_x[a] * dt_mech;
            let mut ddy = force_y[a] * dt_mech;
            let mag = (ddx * ddx + ddy * ddy).sqrt();
            if mag > max_disp {
                ddx *= max_disp / mag;
                ddy *= max_disp / mag;
            }
            let orig = sid[a] as usize;
            if orig < n_cells {
                cells[orig].x = (cells[orig].x + ddx).clamp(lo, hi);
                cells[orig].y = (cells[orig].y + ddy).clamp(lo, hi);
            } else {
                let w = &mut workers[orig - n_cells];
                w.x = (w.x + ddx).clamp(lo, hi);
                w.y = (w.y + ddy).clamp(lo, hi);
            }
        }

        // Carried cargo relaxes toward its worker; separation is capped.
        for w in workers.iter() {
            if let Some(ci) = w.attached {
                let c = &mut cargo[ci as usize];
                c.x += params.elastic_coefficient * (w.x - c.x) * dt_mech;
                c.y += params.elastic_coefficient * (w.y - c.y) * dt_mech;
                let dx = c.x - w.x;
                let dy = c.y - w.y;
                let d = (dx * dx + dy * dy).sqrt();
                if d > params.max_elastic_displacement {
                    let f = params.max_elastic_displacement / d;
                    c.x = w.x + dx * f;
                    c.y = w.y + dy * f;
                }
            }
        }

        *cell_grid_valid = false;
        *contacts_valid = false;
        *cell_nodes_valid = false;
    }

    /// Rebuild the waiting-cargo lookup grid (positions on the ring never
    /// change, so this happens at most once per injection).
    fn ensure_waiting_grid(&mut self, params: &SimParams) {
        if self.scratch.waiting_grid_valid {
            return;
        }
        let bin = params.max_attachment_distance.max(params.grid_spacing);
        let grid = &mut self.scratch.waiting_cargo;
        grid.reset(params.domain_size, bin, self.cargo.len());
        for (i, c) in self.cargo.iter().enumerate() {
            grid.insert(i, c.x, c.y);
        }
        self.scratch.waiting_grid_valid = true;
    }

    /// Rebuild the live-cell lookup grid used for damage queries; refreshed
    /// after every mechanics tick and after division.
    fn ensure_cell_grid(&mut self, params: &SimParams) {
        if self.scratch.cell_grid_valid {
            return;
        }
        let reach = params.max_relative_adhesion_distance * (params.cell_radius + params.agent_radius);
        let bin = reach.max(params.grid_spacing);
        let grid = &mut self.scratch.cell_grid;
        grid.reset(params.domain_size, bin, self.cells.len());
        for (i, c) in self.cells.iter().enumerate() {
            if c.alive {
                grid.insert(i, c.x, c.y);
            }
        }
        self.scratch.cell_grid_valid = true;
    }

    fn attachment_and_release(&mut self, params: &SimParams) {
        self.ensure_waiting_grid(params);
        let min_d2 = params.min_attachment_distance * params.min_attachment_distance;
        let max_d2 = params.max_attachment_distance * params.max_attachment_distance;
        for wi in 0..self.workers.len() {
            let w = self.workers[wi];
            if w.attached.is_none() {
                // Grab the nearest waiting cargo inside the window.
                let mut best: Option<(f64, usize)> = None;
                let cargo = &self.cargo;
                let threshold = params.attachment_receptor_threshold;
                self.scratch.waiting_cargo.for_neighbors(w.x, w.y, |ci| {
                    let c = &cargo[ci];
                    if c.state != CargoState::Waiting || c.receptor < threshold {
                        return;
                    }
                    let dx = c.x - w.x;
                    let dy = c.y - w.y;
                    let d2 = dx * dx + dy * dy;
                    if d2 >= min_d2 && d2 <= max_d2 {
                        match best {
                            Some((bd2, bi)) if bd2 < d2 || (bd2 == d2 && bi < ci) => {}
                            _ => best = Some((d2, ci)),
                        }
                    }
                });
                if let Some((_, ci)) = best {
                    self.cargo[ci].state = CargoState::Carried;
                    self.workers[wi].attached = Some(ci as u32);
                }
            } else if let Some(ci) = w.attached {
                // Hypoxic release: the worker senses local oxygen and drops
                // its cargo where the cargo currently trails. Fast straight
                // carriers stretch the elastic bond, so their deposits land
                // shallower than those of slow meandering carriers.
                let c = &mut self.cargo[ci as usize];
                if self.oxygen.at(w.x, w.y) < params.cargo_release_o2_threshold {
                    c.state = CargoState::Deposited;
                    c.receptor = 0.0;
                    self.workers[wi].attached = None;
                    self.scratch.contacts_valid = false;
                }
            }
        }
    }

    /// Refresh the deposited-cargo → cell contact entries. Cells barely move
    /// between mechanics ticks and deposits are anchored, so the pair list
    /// stays valid until either changes.
    fn ensure_contacts(&mut self, params: &SimParams) {
        if self.scratch.contacts_valid {
            return;
        }
        self.ensure_cell_grid(params);
        let reach = params.max_relative_adhesion_distance * (params.cell_radius + params.agent_radius);
        let reach2 = reach * reach;
        let list = &mut self.scratch.contact_list;
        list.clear();
        let cells = &self.cells;
        let grid = &self.scratch.cell_grid;
        for c in &self.cargo {
            if c.state != CargoState::Deposited {
                continue;
            }
            grid.for_neighbors(c.x, c.y, |i| {
                let cell = &cells[i];
                if !cell.alive {
                    return;
                }
                let dx = cell.x - c.x;
                let dy = cell.y - c.y;
                if dx * dx + dy * dy <= reach2 {
                    list.push(i as u32);
                }
            });
        }
        self.scratch.contacts_valid = true;
    }

    fn damage_and_death(&mut self, params: &SimParams, dt: f64) {
        // Exponential repair keeps the closed-form decay exact per tick.
        let decay = (-params.repair_rate * dt).exp();
        for cell in &mut self.cells {
            if cell.alive && cell.damage > 0.0 {
                cell.damage *= decay;
            }
        }

        if self.cargo.is_empty() {
            return;
        }
        // The drug is active whenever a payload touches a cell: carried
        // cargo dragged along the rim wounds the cells it brushes, while
        // anchored deposits additionally trigger the apoptosis draw below.
        // Carried payloads move every step, so their contacts are scanned
        // fresh instead of cached.
        self.scratch.carried_contacts.clear();
        if self.cargo.iter().any(|c| c.state == CargoState::Carried) {
            self.ensure_cell_grid(params);
            let reach =
                params.max_relative_adhesion_distance * (params.cell_radius + params.agent_radius);
            let reach2 = reach * reach;
            let carried = &mut self.scratch.carried_contacts;
            let cells = &self.cells;
            let grid = &self.scratch.cell_grid;
            for c in &self.cargo {
                if c.state != CargoState::Carried {
                    continue;
                }
                grid.for_neighbors(c.x, c.y, |i| {
                    let cell = &cells[i];
                    if !cell.alive {
                        return;
                    }
                    let dx = cell.x - c.x;
                    let dy = cell.y - c.y;
                    if dx * dx + dy * dy <= reach2 {
                        carried.push(i as u32);
                    }
                });
            }
        }
        self.ensure_contacts(params);
        if self.scratch.contact_list.is_empty() && self.scratch.carried_contacts.is_empty() {
            return;
        }
        // Damage stacks additively across contacts; the apoptosis draw below
        // is once per deposit-contacted cell regardless of how many touch it.
        let damage_add = params.damage_rate * dt;
        let contacted = &mut self.scratch.contacted;
        let drugged = &mut self.scratch.drugged;
        let touched = &mut self.scratch.touched;
        contacted.resize(self.cells.len(), false);
        drugged.resize(self.cells.len(), false);
        touched.clear();
        for &iu in &self.scratch.carried_contacts {
            let i = iu as usize;
            let cell = &mut self.cells[i];
            if !cell.alive {
                continue;
            }
            cell.damage += damage_add;
            if !contacted[i] {
                contacted[i] = true;
                touched.push(iu);
            }
        }
        for &iu in &self.scratch.contact_list {
            let i = iu as usize;
            let cell = &mut self.cells[i];
            if !cell.alive {
                continue;
            }
            cell.damage += damage_add;
            drugged[i] = true;
            if !contacted[i] {
                contacted[i] = true;
                touched.push(iu);
            }
        }
        // Deaths: lethal accumulated damage, plus a per-minute death chance
        // while in contact with a deposit. First-contact order is
        // deterministic, and the death stream draws only for drugged cells.
        let p_death = 1.0 - (-params.drug_death_rate * dt).exp();
        for &iu in touched.iter() {
            let i = iu as usize;
            contacted[i] = false;
            let was_drugged = drugged[i];
            drugged[i] = false;
            let cell = &mut self.cells[i];
            if cell.damage >= 1.0 {
                cell.alive = false;
                self.scratch.cell_grid_valid = false;
                continue;
            }
            if was_drugged && self.rng_cells.gen::<f64>() < p_death {
                cell.alive = false;
                self.scratch.cell_grid_valid = false;
            }
        }
    }

    fn division(&mut self, params: &SimParams, dt_mech: f64) {
        let p_div = params.division_rate * dt_mech;
        if p_div <= 0.0 {
            return;
        }
        let lo = params.cell_radius;
        let hi = params.domain_size - params.cell_radius;
        self.ensure_cell_nodes();
        let n = self.cells.len();
        let mut divided = false;
        for i in 0..n {
            let cell = self.cells[i];
            if !cell.alive {
                continue;
            }
            // Pressure comes from the force pass of this same mechanics tick.
            if self.scratch.pressure.get(i).copied().unwrap_or(f64::INFINITY)
                >= params.division_pressure_threshold
            {
                continue;
            }
            if self.oxygen.values[self.scratch.cell_nodes[i] as usize] < params.division_o2_threshold {
                continue;
            }
            if self.rng_cells.gen::<f64>() < p_div {
                let (ux, uy) = random_unit(&mut self.rng_cells);
                let x = (cell.x + ux * params.cell_radius).clamp(lo, hi);
                let y = (cell.y + uy * params.cell_radius).clamp(lo, hi);
                self.cells.push(Cell { x, y, damage: 0.0, alive: true });
                divided = true;
            }
        }
        if divided {
            self.scratch.cell_grid_valid = false;
            self.scratch.cell_nodes_valid = false;
        }
    }

    /// Slow agent turnover: cargo degradation and (if configured) worker
    /// death. Runs on the mechanics interval to keep RNG traffic low.
    fn agent_lifecycle(&mut self, params: &SimParams, dt_mech: f64) {
        if params.cargo_apoptosis_rate > 0.0 {
            let p = 1.0 - (-params.cargo_apoptosis_rate * dt_mech).exp();
            for ci in 0..self.cargo.len() {
                if self.cargo[ci].state == CargoState::Gone {
                    continue;
                }
                if self.rng_agents.gen::<f64>() < p {
                    let was = self.cargo[ci].state;
                    self.cargo[ci].state = CargoState::Gone;
                    if was == CargoState::Carried {
                        for w in &mut self.workers {
                            if w.attached == Some(ci as u32) {
                                w.attached = None;
                            }
                        }
                    }
                    if was == CargoState::Deposited {
                        self.scratch.contacts_valid = false;
                    }
                }
            }
        }
        if params.worker_apoptosis_rate > 0.0 {
            let p = 1.0 - (-params.worker_apoptosis_rate * dt_mech).exp();
            let mut wi = 0;
            while wi < self.workers.len() {
                if self.rng_agents.gen::<f64>() < p {
                    if let Some(ci) = self.workers[wi].attached {
                        self.cargo[ci as usize].state = CargoState::Waiting;
                    }
                    self.workers.remove(wi);
                } else {
                    wi += 1;
                }
            }
        }
    }
}

/// Draw a uniformly random unit vector by rejection sampling (no
/// trigonometry, for cross-platform bit stability).
fn random_unit(rng: &mut impl Rng) -> (f64, f64) {
    loop {
        let x: f64 = rng.gen_range(-1.0..=1.0);
        let y: f64 = rng.gen_range(-1.0..=1.0);
        let m2 = x * x + y * y;
        if m2 > 1e-6 && m2 <= 1.0 {
            let m = m2.sqrt();
            return (x / m, y / m);
        }
    }
}

/// Radius of the seeded tumor disc (µm).
pub const TUMOR_SEED_RADIUS: f64 = 200.0;

/// Default tick length (minutes).
pub const DEFAULT_DT: f64 = 0.1;

/// Seed a 200 µm tumor disc (about 570 cells) and let it grow for `days`
/// under oxygen limitation. `days = 0` returns the packed disc unchanged.
/// The result serializes with [`save_state`] for reuse as a fixed
/// evaluation tumor.
pub fn grow_tumor(params: &SimParams, days: f64, seed: u64) -> Result<SimState, StepError> {
    let mut state = SimState::tumor_disc(params, TUMOR_SEED_RADIUS, seed);
    state.run(params, days * 1440.0, DEFAULT_DT)?;
    Ok(state)
}

/// Errors from evaluating a treatment.
#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Treatment(#[from] TreatmentError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Inject a treatment into a copy of `tumor`, simulate `days`, and return
/// the number of live cancer cells (the treatment's score; lower is
/// better). Deterministic per (tumor, treatment, seed).
pub fn apply_treatment(
    tumor: &SimState,
    treatment: &Treatment,
    params: &SimParams,
    days: f64,
    seed: u64,
) -> Result<usize, EvalError> {
    let mut state = tumor.clone();
    state.reseed(seed);
    state.inject(treatment, params)?;
    state.run(params, days * 1440.0, DEFAULT_DT)?;
    Ok(state.alive_count())
}

/// The no-treatment control: simulate the same `days` from the same tumor
/// and seed without injecting anything. A treatment whose workers cannot
/// move leaves the cell population exactly equal to this baseline.
pub fn run_baseline(tumor: &SimState, params: &SimParams, days: f64, seed: u64) -> Result<usize, StepError> {
    let mut state = tumor.clone();
    state.reseed(seed);
    state.run(params, days * 1440.0, DEFAULT_DT)?;
    Ok(state.alive_count())
}

// ---------------------------------------------------------------------------
// Versioned serialization
// ---------------------------------------------------------------------------

/// Errors from loading a serialized simulation state.
#[derive(Debug, thiserror::Error)]
pub enum StateLoadError {
    #[error("bad magic: not a simulation state dump (expected TMS1)")]
    BadMagic,
    #[error("inconsistent dump: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

const STATE_MAGIC: &[u8; 4] = b"TMS1";

/// Serialize a state. Layout (little-endian):
///
/// ```text
/// magic    4 bytes "TMS1"
/// clock    f64 bits
/// steps    u64
/// oxygen   nx u32, ny u32, dx f64 bits, nx*ny f64 bits
/// designs  u64 count, then 5 f64 per design (field order)
/// cells    u64 count, then x f64, y f64, damage f64, alive u8
/// workers  u64 count, then x, y, dir_x, dir_y f64, type u32,
///          attached u32 (u32::MAX = none), moving u8
/// cargo    u64 count, then x f64, y f64, state u8, receptor f64
/// ```
///
/// All floats are raw IEEE-754 bits, so save → load → save is
/// byte-identical.
pub fn save_state(state: &SimState, w: &mut impl Write) -> io::Result<()> {
    w.write_all(STATE_MAGIC)?;
    w.write_f64::<LittleEndian>(state.clock)?;
    w.write_u64::<LittleEndian>(state.steps)?;
    w.write_u32::<LittleEndian>(state.oxygen.nx as u32)?;
    w.write_u32::<LittleEndian>(state.oxygen.ny as u32)?;
    w.write_f64::<LittleEndian>(state.oxygen.dx)?;
    for &v in &state.oxygen.values {
        w.write_f64::<LittleEndian>(v)?;
    }
    w.write_u64::<LittleEndian>(state.designs.len() as u64)?;
    for d in &state.designs {
        for i in 0..5 {
            w.write_f64::<LittleEndian>(d.get(i))?;
        }
    }
    w.write_u64::<LittleEndian>(state.cells.len() as u64)?;
    for c in &state.cells {
        w.write_f64::<LittleEndian>(c.x)?;
        w.write_f64::<LittleEndian>(c.y)?;
        w.write_f64::<LittleEndian>(c.damage)?;
        w.write_u8(u8::from(c.alive))?;
    }
    w.write_u64::<LittleEndian>(state.workers.len() as u64)?;
    for wk in &state.workers {
        w.write_f64::<LittleEndian>(wk.x)?;
        w.write_f64::<LittleEndian>(wk.y)?;
        w.write_f64::<LittleEndian>(wk.dir_x)?;
        w.write_f64::<LittleEndian>(wk.dir_y)?;
        w.write_u32::<LittleEndian>(wk.type_index)?;
        w.write_u32::<LittleEndian>(wk.attached.unwrap_or(u32::MAX))?;
        w.write_u8(u8::from(wk.moving))?;
    }
    w.write_u64::<LittleEndian>(state.cargo.len() as u64)?;
    for c in &state.cargo {
        w.write_f64::<LittleEndian>(c.x)?;
        w.write_f64::<LittleEndian>(c.y)?;
        let s = match c.state {
            CargoState::Waiting => 0u8,
            CargoState::Carried => 1,
            CargoState::Deposited => 2,
            CargoState::Gone => 3,
        };
        w.write_u8(s)?;
        w.write_f64::<LittleEndian>(c.receptor)?;
    }
    Ok(())
}

/// Load a state saved by [`save_state`]. The RNG streams are reset to a
/// fixed default; call [`SimState::reseed`] (or use the seed arguments of
/// the evaluation entry points) before stepping further.
pub fn load_state(r: &mut impl Read) -> Result<SimState, StateLoadError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != STATE_MAGIC {
        return Err(StateLoadError::BadMagic);
    }
    let clock = r.read_f64::<LittleEndian>()?;
    let steps = r.read_u64::<LittleEndian>()?;
    let nx = r.read_u32::<LittleEndian>()? as usize;
    let ny = r.read_u32::<LittleEndian>()? as usize;
    let dx = r.read_f64::<LittleEndian>()?;
    if nx == 0 || ny == 0 || nx * ny > 100_000_000 {
        return Err(StateLoadError::Inconsistent(format!("oxygen grid {nx}x{ny}")));
    }
    if !(dx > 0.0) || !dx.is_finite() {
        return Err(StateLoadError::Inconsistent(format!("grid spacing {dx}")));
    }
    let mut values = Vec::with_capacity(nx * ny);
    for _ in 0..nx * ny {
        values.push(r.read_f64::<LittleEndian>()?);
    }
    let n_designs = r.read_u64::<LittleEndian>()? as usize;
    if n_designs > Treatment::MAX_TYPES {
        return Err(StateLoadError::Inconsistent(format!("{n_designs} designs")));
    }
    let mut designs = Vec::with_capacity(n_designs);
    for _ in 0..n_designs {
        let mut d = NpDesign {
            attached_migration_bias: 0.0,
            unattached_migration_bias: 0.0,
            relative_adhesion: 0.0,
            relative_repulsion: 0.0,
            persistence_time: 0.0,
        };
        for i in 0..5 {
            d.set(i, r.read_f64::<LittleEndian>()?);
        }
        designs.push(d);
    }
    let n_cells = r.read_u64::<LittleEndian>()? as usize;
    let mut cells = Vec::with_capacity(n_cells.min(1 << 24));
    for _ in 0..n_cells {
        let x = r.read_f64::<LittleEndian>()?;
        let y = r.read_f64::<LittleEndian>()?;
        let damage = r.read_f64::<LittleEndian>()?;
        let alive = r.read_u8()? != 0;
        cells.push(Cell { x, y, damage, alive });
    }
    let n_workers = r.read_u64::<LittleEndian>()? as usize;
    let mut workers = Vec::with_capacity(n_workers.min(1 << 20));
    for _ in 0..n_workers {
        let x = r.read_f64::<LittleEndian>()?;
        let y = r.read_f64::<LittleEndian>()?;
        let dir_x = r.read_f64::<LittleEndian>()?;
        let dir_y = r.read_f64::<LittleEndian>()?;
        let type_index = r.read_u32::<LittleEndian>()?;
        if type_index as usize >= n_designs.max(1) && n_designs > 0 {
            return Err(StateLoadError::Inconsistent(format!("worker type {type_index} of {n_designs}")));
        }
        let attached_raw = r.read_u32::<LittleEndian>()?;
        let moving = r.read_u8()? != 0;
        workers.push(Worker {
            x,
            y,
            dir_x,
            dir_y,
            type_index,
            attached: (attached_raw != u32::MAX).then_some(attached_raw),
            moving,
        });
    }
    let n_cargo = r.read_u64::<LittleEndian>()? as usize;
    let mut cargo = Vec::with_capacity(n_cargo.min(1 << 20));
    for _ in 0..n_cargo {
        let x = r.read_f64::<LittleEndian>()?;
        let y = r.read_f64::<LittleEndian>()?;
        let state = match r.read_u8()? {
            0 => CargoState::Waiting,
            1 => CargoState::Carried,
            2 => CargoState::Deposited,
            3 => CargoState::Gone,
            other => return Err(StateLoadError::Inconsistent(format!("cargo state tag {other}"))),
        };
        let receptor = r.read_f64::<LittleEndian>()?;
        cargo.push(Cargo { x, y, state, receptor });
    }
    for w in &workers {
        if let Some(ci) = w.attached {
            if ci as usize >= cargo.len() {
                return Err(StateLoadError::Inconsistent(format!(
                    "worker attached to cargo {ci} of {}",
                    cargo.len()
                )));
            }
        }
    }
    Ok(SimState {
        clock,
        steps,
        cells,
        workers,
        cargo,
        designs,
        oxygen: OxygenField { nx, ny, dx, scratch: vec![0.0; nx * ny], values },
        rng_cells: ChaCha8Rng::seed_from_u64(derive_seed(0, &[STREAM_CELLS])),
        rng_agents: ChaCha8Rng::seed_from_u64(derive_seed(0, &[STREAM_AGENTS])),
        scratch: Scratch::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_rule_matches_examples() {
        assert_eq!(Treatment::split(2).unwrap(), vec![25, 25]);
        assert_eq!(Treatment::split(3).unwrap(), vec![17, 17, 16]);
        assert_eq!(Treatment::split(1).unwrap(), vec![50]);
        assert_eq!(Treatment::split(7).unwrap(), vec![8, 7, 7, 7, 7, 7, 7]);
        for n in 1..=10 {
            let counts = Treatment::split(n).unwrap();
            assert_eq!(counts.iter().sum::<u32>(), 50, "{n} types");
            let min = counts.iter().min().unwrap();
            let max = counts.iter().max().unwrap();
            assert!(max - min <= 1, "{n} types: {counts:?}");
        }
        assert_eq!(Treatment::split(0), Err(TreatmentError::NoTypes));
        assert_eq!(Treatment::split(11), Err(TreatmentError::TooManyTypes(11)));
    }

    #[test]
    fn disc_seeding_hits_target_count() {
        let params = SimParams::default();
        let state = SimState::tumor_disc(&params, TUMOR_SEED_RADIUS, 1);
        let n = state.cells.len();
        assert!((513..=627).contains(&n), "packed disc has {n} cells, expected 570 +- 10%");
    }

    #[test]
    fn stability_bound_math() {
        let params = SimParams::default();
        // D=800, dx=20 -> bound 0.125; the default tick must sit below it.
        assert!((params.max_stable_dt() - 0.125).abs() < 1e-12);
        assert!(DEFAULT_DT <= params.max_stable_dt());
        let mut state = SimState::tumor_disc(&params, 50.0, 1);
        let err = state.step(&params, 0.2).unwrap_err();
        assert!(matches!(err, StepError::UnstableDt { .. }));
        let err = state.step(&params, 0.0).unwrap_err();
        assert!(matches!(err, StepError::NonPositiveDt { .. }));
    }

    #[test]
    fn empty_domain_is_static() {
        let params = SimParams::default();
        let mut state = SimState::tumor_disc(&params, 0.0, 9);
        state.cells.clear();
        let before = state.clone();
        for _ in 0..50 {
            state.step(&params, DEFAULT_DT).unwrap();
        }
        assert!(state.cells.is_empty());
        assert_eq!(state.oxygen, before.oxygen, "no agents -> oxygen untouched");
        assert!((state.clock - 5.0).abs() < 1e-9);
    }

    #[test]
    fn param_validation_names_field() {
        let mut params = SimParams::default();
        params.division_rate = -1.0;
        let err = params.validate().unwrap_err();
        assert!(err.to_string().contains("division_rate"), "{err}");
        let mut params = SimParams::default();
        params.min_attachment_distance = 20.0;
        assert!(matches!(params.validate().unwrap_err(), ParamsError::AttachmentWindow { .. }));
    }

    #[test]
    fn design_validation_names_field() {
        let mut d = NpDesign::random(&mut ChaCha8Rng::seed_from_u64(4));
        d.relative_repulsion = 11.0;
        let err = d.validate().unwrap_err();
        assert!(err.to_string().contains("relative_repulsion"), "{err}");
    }
}
