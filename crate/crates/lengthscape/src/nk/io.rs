//! Versioned binary serialization for landscapes.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! magic   4 bytes  "NKL1"
//! n0      u64
//! k       u64
//! seed    u64
//! fixed growth events  u64
//! genes   u64      current gene count
//! per gene:
//!   table_seed u64
//!   pin flag   u8   0 = none, 1 = present
//!   [pin index u64, pin value f64 bits]   when flag = 1
//!   links      k * u32
//! blocks  u64      history length
//! per block:
//!   genes_added u64
//!   rewire count u64
//!   per rewire: gene u32, old_target u32
//! ```
//!
//! Floats are written as raw IEEE-754 bits, so save -> load -> save is
//! byte-identical and a loaded landscape evaluates bit-exactly like the
//! original.

use super::{Gene, GrowthBlock, NkLandscape, Pin, Rewire};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{self, Read, Write};

const MAGIC: &[u8; 4] = b"NKL1";

/// Errors from loading a serialized landscape.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("bad magic: not a landscape dump")]
    BadMagic,
    #[error("inconsistent dump: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl NkLandscape {
    /// Serialize to a writer. See the module docs for the exact layout.
    pub fn save(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u64::<LittleEndian>(self.n0 as u64)?;
        w.write_u64::<LittleEndian>(self.k as u64)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        w.write_u64::<LittleEndian>(self.fixed_growth_events)?;
        w.write_u64::<LittleEndian>(self.genes.len() as u64)?;
        for g in &self.genes {
            w.write_u64::<LittleEndian>(g.table_seed)?;
            match g.pinned {
                None => w.write_u8(0)?,
                Some(p) => {
                    w.write_u8(1)?;
                    w.write_u64::<LittleEndian>(p.index)?;
                    w.write_u64::<LittleEndian>(p.value.to_bits())?;
                }
            }
            debug_assert_eq!(g.links.len(), self.k);
            for &t in &g.links {
                w.write_u32::<LittleEndian>(t)?;
            }
        }
        w.write_u64::<LittleEndian>(self.history.len() as u64)?;
        for b in &self.history {
            w.write_u64::<LittleEndian>(b.genes_added as u64)?;
            w.write_u64::<LittleEndian>(b.rewires.len() as u64)?;
            for r in &b.rewires {
                w.write_u32::<LittleEndian>(r.gene)?;
                w.write_u32::<LittleEndian>(r.old_target)?;
            }
        }
        Ok(())
    }

    /// Deserialize from a reader, validating structure.
    pub fn load(r: &mut impl Read) -> Result<Self, LoadError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(LoadError::BadMagic);
        }
        let n0 = r.read_u64::<LittleEndian>()? as usize;
        let k = r.read_u64::<LittleEndian>()? as usize;
        let seed = r.read_u64::<LittleEndian>()?;
        let fixed_growth_events = r.read_u64::<LittleEndian>()?;
        let gene_count = r.read_u64::<LittleEndian>()? as usize;
        if gene_count < n0 {
            return Err(LoadError::Inconsistent(format!(
                "gene count {gene_count} below construction count {n0}"
            )));
        }
        let mut genes = Vec::with_capacity(gene_count);
        for _ in 0..gene_count {
            let table_seed = r.read_u64::<LittleEndian>()?;
            let pinned = match r.read_u8()? {
                0 => None,
                1 => {
                    let index = r.read_u64::<LittleEndian>()?;
                    let value = f64::from_bits(r.read_u64::<LittleEndian>()?);
                    Some(Pin { index, value })
                }
                other => {
                    return Err(LoadError::Inconsistent(format!("bad pin flag {other}")));
                }
            };
            let mut links = Vec::with_capacity(k);
            for _ in 0..k {
                let t = r.read_u32::<LittleEndian>()?;
                if t as usize >= gene_count {
                    return Err(LoadError::Inconsistent(format!(
                        "link target {t} out of range for {gene_count} genes"
                    )));
                }
                links.push(t);
            }
            genes.push(Gene {
                links,
                table_seed,
                pinned,
            });
        }
        let block_count = r.read_u64::<LittleEndian>()? as usize;
        let mut history = Vec::with_capacity(block_count);
        let mut grown = 0usize;
        for _ in 0..block_count {
            let genes_added = r.read_u64::<LittleEndian>()? as usize;
            let rewire_count = r.read_u64::<LittleEndian>()? as usize;
            let mut rewires = Vec::with_capacity(rewire_count);
            for _ in 0..rewire_count {
                let gene = r.read_u32::<LittleEndian>()?;
                let old_target = r.read_u32::<LittleEndian>()?;
                rewires.push(Rewire { gene, old_target });
            }
            grown += genes_added;
            history.push(GrowthBlock {
                genes_added,
                rewires,
            });
        }
        if n0 + grown != gene_count {
            return Err(LoadError::Inconsistent(format!(
                "history adds {grown} genes to {n0} but {gene_count} are present"
            )));
        }
        if fixed_growth_events < history.len() as u64 {
            return Err(LoadError::Inconsistent(format!(
                "{} surviving blocks exceed {} fixed growth events",
                history.len(),
                fixed_growth_events
            )));
        }
        Ok(NkLandscape {
            n0,
            k,
            seed,
            genes,
            history,
            fixed_growth_events,
        })
    }
}
