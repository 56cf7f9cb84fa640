//! Precomputed frontiers for forward-only queries.
//!
//! File layout, all little-endian:
//!
//! ```text
//! magic "FPPRFRN1" | graph hash u64 | alpha f64 | beta f64 | eps_r f64 | record count u64
//! per record: byte length u64 | target u32 | eps_r f64
//!             | target-set count u64 | (node u32, estimate f64)*
//!             | frontier count u64   | (node u32, estimate f64)*
//! ```
//!
//! Pairs are sorted by node id. Floats are stored as raw bits, so a reload
//! is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{forward_phase, walk_count, Algorithm, Estimate, QueryParams};
use crate::frontier::{frontier_push, FrontierResult};
use crate::graph::{Graph, NodeId};

const STORE_MAGIC: &[u8; 8] = b"FPPRFRN1";

/// The persisted part of a [`FrontierResult`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierRecord {
    pub target: NodeId,
    pub eps_r: f64,
    pub targets: Vec<(NodeId, f64)>,
    pub frontier: Vec<(NodeId, f64)>,
}

impl FrontierRecord {
    pub fn from_result(f: &FrontierResult) -> Self {
        let pairs = |nodes: &[NodeId]| nodes.iter().map(|&u| (u, f.estimate(u))).collect();
        FrontierRecord {
            target: f.target,
            eps_r: f.eps_r,
            targets: pairs(&f.target_set),
            frontier: pairs(&f.frontier_set),
        }
    }

    pub fn entries(&self) -> usize {
        self.targets.len() + self.frontier.len()
    }

    fn encoded_len(&self) -> u64 {
        (4 + 8 + 8 + 8 + 12 * self.entries()) as u64
    }

    fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.encoded_len().to_le_bytes())?;
        w.write_all(&self.target.to_le_bytes())?;
        w.write_all(&self.eps_r.to_bits().to_le_bytes())?;
        for pairs in [&self.targets, &self.frontier] {
            w.write_all(&(pairs.len() as u64).to_le_bytes())?;
            for &(u, p) in pairs {
                w.write_all(&u.to_le_bytes())?;
                w.write_all(&p.to_bits().to_le_bytes())?;
            }
        }
        Ok(())
    }

    fn read<R: Read>(r: &mut R) -> Result<Self> {
        let len = read_u64(r)?;
        let mut bytes = Vec::new();
        r.take(len).read_to_end(&mut bytes)?;
        if bytes.len() as u64 != len {
            return Err(Error::Corrupt("truncated frontier record".into()));
        }
        let mut cur = bytes.as_slice();
        let target = read_u32(&mut cur)?;
        let eps_r = f64::from_bits(read_u64(&mut cur)?);
        let read_pairs = |cur: &mut &[u8]| -> Result<Vec<(NodeId, f64)>> {
            let count = read_u64(cur)? as usize;
            if count.saturating_mul(12) > cur.len() {
                return Err(Error::Corrupt("pair count exceeds record length".into()));
            }
            (0..count)
                .map(|_| Ok((read_u32(cur)?, f64::from_bits(read_u64(cur)?))))
                .collect()
        };
        let targets = read_pairs(&mut cur)?;
        let frontier = read_pairs(&mut cur)?;
        if !cur.is_empty() {
            return Err(Error::Corrupt("trailing bytes in frontier record".into()));
        }
        Ok(FrontierRecord {
            target,
            eps_r,
            targets,
            frontier,
        })
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Corrupt("unexpected end of store".into()))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Corrupt("unexpected end of store".into()))?;
    Ok(u32::from_le_bytes(buf))
}

/// One frontier record per target, all at the same `(alpha, beta, eps_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierStore {
    pub graph_hash: u64,
    pub alpha: f64,
    pub beta: f64,
    pub eps_r: f64,
    /// Sorted by target.
    pub records: Vec<FrontierRecord>,
}

impl FrontierStore {
    /// Sum over targets of `|target set| + |frontier|`.
    pub fn total_entries(&self) -> u64 {
        self.records.iter().map(|r| r.entries() as u64).sum()
    }

    pub fn frontier_entries(&self) -> u64 {
        self.records.iter().map(|r| r.frontier.len() as u64).sum()
    }

    pub fn record(&self, t: NodeId) -> Result<&FrontierRecord> {
        self.records
            .binary_search_by_key(&t, |r| r.target)
            .map(|i| &self.records[i])
            .map_err(|_| Error::MissingRecord(t))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(STORE_MAGIC)?;
        w.write_all(&self.graph_hash.to_le_bytes())?;
        for x in [self.alpha, self.beta, self.eps_r] {
            w.write_all(&x.to_bits().to_le_bytes())?;
        }
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        for r in &self.records {
            r.write(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != STORE_MAGIC {
            return Err(Error::Corrupt("bad frontier store magic".into()));
        }
        let graph_hash = read_u64(&mut r)?;
        let alpha = f64::from_bits(read_u64(&mut r)?);
        let beta = f64::from_bits(read_u64(&mut r)?);
        let eps_r = f64::from_bits(read_u64(&mut r)?);
        let count = read_u64(&mut r)?;
        let mut records = Vec::new();
        for _ in 0..count {
            records.push(FrontierRecord::read(&mut r)?);
        }
        if !records.windows(2).all(|w| w[0].target < w[1].target) {
            return Err(Error::Corrupt("records out of order".into()));
        }
        Ok(FrontierStore {
            graph_hash,
            alpha,
            beta,
            eps_r,
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    /// Loads a store and checks that it was built for `g`.
    pub fn load(path: &Path, g: &Graph) -> Result<Self> {
        let store = Self::read(BufReader::new(File::open(path)?))?;
        let hash = g.fingerprint();
        if store.graph_hash != hash {
            return Err(Error::StoreMismatch(format!(
                "store built for graph {:016x}, loaded graph is {hash:016x}",
                store.graph_hash
            )));
        }
        Ok(store)
    }
}

/// Runs the fixed-threshold frontier for every target and optionally writes
/// the store to `out`. Fails if the total entry count exceeds `m / eps_r`.
pub fn precompute_frontiers(g: &Graph, eps_r: f64, beta: f64, alpha: f64, out: Option<&Path>) -> Result<FrontierStore> {
    let records = g
        .nodes()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|t| frontier_push(g, t, eps_r, beta, alpha).map(|f| FrontierRecord::from_result(&f)))
        .collect::<Result<Vec<_>>>()?;
    let store = FrontierStore {
        graph_hash: g.fingerprint(),
        alpha,
        beta,
        eps_r,
        records,
    };
    let bound = g.edge_count() as f64 / eps_r;
    let entries = store.total_entries();
    if entries as f64 > bound {
        return Err(Error::StorageBound { entries, bound });
    }
    if let Some(path) = out {
        store.save(path)?;
    }
    Ok(store)
}

/// Forward-only query against a stored frontier.
///
/// Produces exactly the estimate `fast_ppr` would for the same seed.
pub fn query_with_store(store: &FrontierStore, g: &Graph, s: NodeId, t: NodeId, p: &QueryParams) -> Result<Estimate> {
    p.validate()?;
    g.check_node(s)?;
    g.check_node(t)?;
    if store.graph_hash != g.fingerprint() {
        return Err(Error::StoreMismatch("store was built for a different graph".into()));
    }
    let eps_r = p.eps_r.unwrap_or(store.eps_r);
    if store.alpha.to_bits() != p.alpha.to_bits()
        || store.beta.to_bits() != p.beta.to_bits()
        || store.eps_r.to_bits() != eps_r.to_bits()
    {
        return Err(Error::StoreMismatch(format!(
            "store has (alpha, beta, eps_r) = ({}, {}, {}), query wants ({}, {}, {eps_r})",
            store.alpha, store.beta, store.eps_r, p.alpha, p.beta
        )));
    }
    let record = store.record(t)?;
    let fwd = forward_phase(g, s, record, walk_count(p.c, eps_r, p.delta), p.alpha, p.seed)?;
    Ok(Estimate {
        value: fwd.value,
        algorithm: Algorithm::FastPpr,
        walks_used: fwd.walks,
        frontier_pushes: 0,
        forward_time: fwd.elapsed,
        reverse_time: Duration::ZERO,
        shortcut: fwd.shortcut,
        eps_r: Some(eps_r),
    })
}
