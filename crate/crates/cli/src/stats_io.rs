//! On-disk cache for per-feature statistics, so the full variance pass runs
//! once per corpus.
//!
//! Layout (little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "SPCASTAT"
//! 8       4     format version (1)
//! 12      4     feature count n
//! 16      8     document count m
//! 24      8     corpus content hash (FNV-1a 64 of the docword file)
//! 32      20*n  per-feature records: id (u32), mean (f64), variance (f64)
//! ```
//!
//! Records are written for ids `1..=n` in order; the variance ranking is
//! rebuilt on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use spca_core::screening::FeatureStats;

use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"SPCASTAT";
const VERSION: u32 = 1;

pub fn write_stats(path: impl AsRef<Path>, stats: &FeatureStats, corpus_hash: u64) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e.to_string()))?;
    let mut out = BufWriter::new(file);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(stats.num_features() as u32).to_le_bytes())?;
    out.write_all(&stats.num_docs().to_le_bytes())?;
    out.write_all(&corpus_hash.to_le_bytes())?;
    for id in 1..=stats.num_features() as u32 {
        out.write_all(&id.to_le_bytes())?;
        out.write_all(&stats.mean(id).to_le_bytes())?;
        out.write_all(&stats.variance(id).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_stats(path: impl AsRef<Path>) -> Result<(FeatureStats, u64)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e.to_string()))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::file(path, "truncated stats header"))?;
    if &magic != MAGIC {
        return Err(Error::file(path, "not a stats cache (bad magic)"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::file(path, format!("unsupported stats version {version}")));
    }
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let m = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let corpus_hash = u64::from_le_bytes(b8);

    let mut mean = Vec::with_capacity(n);
    let mut variance = Vec::with_capacity(n);
    for expect_id in 1..=n as u32 {
        r.read_exact(&mut b4)
            .map_err(|_| Error::file(path, "truncated stats records"))?;
        let id = u32::from_le_bytes(b4);
        if id != expect_id {
            return Err(Error::file(
                path,
                format!("record out of order: expected id {expect_id}, found {id}"),
            ));
        }
        r.read_exact(&mut b8)?;
        mean.push(f64::from_le_bytes(b8));
        r.read_exact(&mut b8)?;
        variance.push(f64::from_le_bytes(b8));
    }
    if r.read(&mut b4)? != 0 {
        return Err(Error::file(path, "trailing bytes after stats records"));
    }
    let stats = FeatureStats::from_moments(m, mean, variance)?;
    Ok((stats, corpus_hash))
}
