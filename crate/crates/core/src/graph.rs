//! Immutable directed graphs in compressed sparse row form.
//!
//! Both directions are stored: out-adjacency drives forward walks and
//! in-adjacency drives reverse pushes. Every node has at least one
//! out-edge; nodes that would be dangling get a self-loop at build time.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use rustc_hash::FxHashMap;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type NodeId = u32;

const CACHE_MAGIC: &[u8; 8] = b"FPPRCSR1";

pub struct Graph {
    out_offsets: Vec<usize>,
    out_targets: Vec<NodeId>,
    in_offsets: Vec<usize>,
    in_sources: Vec<NodeId>,
    /// Original id of each node, in first-seen order.
    labels: Vec<u64>,
    label_index: OnceLock<HashMap<u64, NodeId>>,
    /// Mean forward-walk duration in seconds, keyed by alpha bits.
    walk_time: Mutex<Vec<(u64, f64)>>,
}

impl Graph {
    /// Builds a graph over nodes `0..n` from an edge iterator.
    ///
    /// Duplicate edges are dropped, self-loops are kept and dangling nodes
    /// receive a self-loop.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let labels = (0..n as u64).collect();
        Self::build(n, edges.into_iter().collect(), labels)
    }

    fn build(n: usize, mut edges: Vec<(NodeId, NodeId)>, labels: Vec<u64>) -> Result<Graph> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if n > NodeId::MAX as usize {
            return Err(Error::InvalidArgument(format!("{n} nodes exceed the u32 id space")));
        }
        for &(u, v) in &edges {
            let bad = if (u as usize) >= n { u } else { v };
            if (u as usize) >= n || (v as usize) >= n {
                return Err(Error::NodeOutOfRange {
                    node: bad as u64,
                    node_count: n,
                });
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let mut out_deg = vec![0usize; n];
        for &(u, _) in &edges {
            out_deg[u as usize] += 1;
        }
        let dangling: Vec<NodeId> = (0..n as NodeId).filter(|&u| out_deg[u as usize] == 0).collect();
        if !dangling.is_empty() {
            edges.extend(dangling.into_iter().map(|u| (u, u)));
            edges.sort_unstable();
        }

        let m = edges.len();
        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        for &(u, v) in &edges {
            out_offsets[u as usize + 1] += 1;
            in_offsets[v as usize + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        // Edges are sorted by (u, v), so targets land sorted per row.
        let out_targets: Vec<NodeId> = edges.iter().map(|&(_, v)| v).collect();
        let mut in_sources = vec![0 as NodeId; m];
        let mut cursor = in_offsets.clone();
        for &(u, v) in &edges {
            in_sources[cursor[v as usize]] = u;
            cursor[v as usize] += 1;
        }

        Ok(Graph {
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
            labels,
            label_index: OnceLock::new(),
            walk_time: Mutex::new(Vec::new()),
        })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.out_targets.len()
    }

    #[inline]
    pub fn out_neighbors(&self, u: NodeId) -> &[NodeId] {
        let u = u as usize;
        &self.out_targets[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    #[inline]
    pub fn in_neighbors(&self, u: NodeId) -> &[NodeId] {
        let u = u as usize;
        &self.in_sources[self.in_offsets[u]..self.in_offsets[u + 1]]
    }

    #[inline]
    pub fn out_degree(&self, u: NodeId) -> usize {
        let u = u as usize;
        self.out_offsets[u + 1] - self.out_offsets[u]
    }

    #[inline]
    pub fn in_degree(&self, u: NodeId) -> usize {
        let u = u as usize;
        self.in_offsets[u + 1] - self.in_offsets[u]
    }

    /// m / n.
    pub fn average_degree(&self) -> f64 {
        self.edge_count() as f64 / self.node_count() as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count() as NodeId
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes()
            .flat_map(move |u| self.out_neighbors(u).iter().map(move |&v| (u, v)))
    }

    pub fn out_offsets(&self) -> &[usize] {
        &self.out_offsets
    }

    pub fn in_offsets(&self) -> &[usize] {
        &self.in_offsets
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn label(&self, u: NodeId) -> u64 {
        self.labels[u as usize]
    }

    /// Internal id of a node given its id in the source file.
    pub fn node_by_label(&self, label: u64) -> Option<NodeId> {
        self.label_index
            .get_or_init(|| self.labels.iter().enumerate().map(|(i, &l)| (l, i as NodeId)).collect())
            .get(&label)
            .copied()
    }

    pub fn check_node(&self, u: NodeId) -> Result<()> {
        if (u as usize) < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: u as u64,
                node_count: self.node_count(),
            })
        }
    }

    /// Content hash of the adjacency arrays, used to key frontier stores.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.node_count() as u64).to_le_bytes());
        h.update((self.edge_count() as u64).to_le_bytes());
        for &o in &self.out_offsets {
            h.update((o as u64).to_le_bytes());
        }
        for &v in &self.out_targets {
            h.update(v.to_le_bytes());
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    /// Returns the cached value for `alpha`, computing it with `measure` on first use.
    pub(crate) fn cached_walk_time(&self, alpha: f64, measure: impl FnOnce() -> f64) -> f64 {
        let key = alpha.to_bits();
        let mut cache = self.walk_time.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(&(_, t)) = cache.iter().find(|(k, _)| *k == key) {
            return t;
        }
        let t = measure();
        cache.push((key, t));
        t
    }

    /// Canonical edge-list text using original labels.
    ///
    /// Reloading always gives back the same labelled edges. Lines are grouped
    /// by max(u, v), so the internal ids usually come back unchanged too. A
    /// node whose edges all lead to higher ids can still be renumbered.
    pub fn to_edge_list_text(&self) -> String {
        let mut edges: Vec<(NodeId, NodeId)> = self.edges().collect();
        edges.sort_unstable_by_key(|&(u, v)| (u.max(v), u, v));
        let mut out = String::with_capacity(edges.len() * 12);
        for (u, v) in edges {
            let _ = writeln!(out, "{} {}", self.label(u), self.label(v));
        }
        out
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        write_u64s(
            &mut w,
            self.out_offsets.iter().map(|&x| x as u64),
            self.out_offsets.len(),
        )?;
        write_u64s(
            &mut w,
            self.out_targets.iter().map(|&x| x as u64),
            self.out_targets.len(),
        )?;
        write_u64s(&mut w, self.in_offsets.iter().map(|&x| x as u64), self.in_offsets.len())?;
        write_u64s(&mut w, self.in_sources.iter().map(|&x| x as u64), self.in_sources.len())?;
        write_u64s(&mut w, self.labels.iter().copied(), self.labels.len())?;
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Graph> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Corrupt("bad graph cache magic".into()));
        }
        let out_offsets = read_u64s(&mut r)?.into_iter().map(|x| x as usize).collect::<Vec<_>>();
        let out_targets = read_ids(&mut r)?;
        let in_offsets = read_u64s(&mut r)?.into_iter().map(|x| x as usize).collect::<Vec<_>>();
        let in_sources = read_ids(&mut r)?;
        let labels = read_u64s(&mut r)?;
        let n = labels.len();
        let consistent = n > 0
            && out_offsets.len() == n + 1
            && in_offsets.len() == n + 1
            && out_offsets.last() == Some(&out_targets.len())
            && in_offsets.last() == Some(&in_sources.len())
            && out_targets.len() == in_sources.len()
            && out_offsets.windows(2).all(|w| w[0] <= w[1])
            && in_offsets.windows(2).all(|w| w[0] <= w[1])
            && out_targets.iter().chain(&in_sources).all(|&v| (v as usize) < n);
        if !consistent {
            return Err(Error::Corrupt("inconsistent CSR arrays".into()));
        }
        Ok(Graph {
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
            labels,
            label_index: OnceLock::new(),
            walk_time: Mutex::new(Vec::new()),
        })
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.out_offsets == other.out_offsets
            && self.out_targets == other.out_targets
            && self.in_offsets == other.in_offsets
            && self.in_sources == other.in_sources
            && self.labels == other.labels
    }
}

impl Eq for Graph {}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Graph")
            .field("node_count", &self.node_count())
            .field("edge_count", &self.edge_count())
            .finish()
    }
}

fn write_u64s<W: Write>(w: &mut W, values: impl Iterator<Item = u64>, len: usize) -> Result<()> {
    w.write_all(&(len as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64s<R: Read>(r: &mut R) -> Result<Vec<u64>> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let len = u64::from_le_bytes(buf) as usize;
    let mut bytes = Vec::new();
    r.take(len as u64 * 8).read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::Corrupt("truncated array".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn read_ids<R: Read>(r: &mut R) -> Result<Vec<NodeId>> {
    read_u64s(r)?
        .into_iter()
        .map(|x| NodeId::try_from(x).map_err(|_| Error::Corrupt(format!("node id {x} out of range"))))
        .collect()
}

/// Parses an edge list: one `u v` pair per line, `#` starts a comment line.
///
/// Ids are remapped to `0..n` in first-seen order.
pub fn load_edge_list<R: BufRead>(reader: R, undirected: bool) -> Result<Graph> {
    let mut index: FxHashMap<u64, NodeId> = FxHashMap::default();
    let mut labels: Vec<u64> = Vec::new();
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut intern = |label: u64, labels: &mut Vec<u64>| -> NodeId {
        *index.entry(label).or_insert_with(|| {
            labels.push(label);
            (labels.len() - 1) as NodeId
        })
    };

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected two node ids, got {trimmed:?}"),
            });
        };
        let parse = |s: &str| {
            s.parse::<u64>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad node id {s:?}: {e}"),
            })
        };
        let (a, b) = (parse(a)?, parse(b)?);
        let u = intern(a, &mut labels);
        let v = intern(b, &mut labels);
        edges.push((u, v));
        if undirected {
            edges.push((v, u));
        }
    }
    if edges.is_empty() {
        return Err(Error::EmptyInput);
    }
    Graph::build(labels.len(), edges, labels)
}

pub fn load_edge_list_file(path: &Path, undirected: bool) -> Result<Graph> {
    let file = File::open(path)?;
    load_edge_list(BufReader::new(file), undirected)
}

/// Loads an edge-list file through a binary CSR cache in `cache_dir`.
///
/// The cache file name embeds a hash of the text contents, so edits to the
/// text invalidate it.
pub fn load_edge_list_cached(path: &Path, undirected: bool, cache_dir: &Path) -> Result<Graph> {
    let text = fs::read(path)?;
    let cache = cache_path(path, &text, undirected, cache_dir);
    if let Ok(file) = File::open(&cache) {
        if let Ok(g) = Graph::read_binary(BufReader::new(file)) {
            return Ok(g);
        }
    }
    let g = load_edge_list(text.as_slice(), undirected)?;
    fs::create_dir_all(cache_dir)?;
    let tmp = cache.with_extension("tmp");
    g.write_binary(BufWriter::new(File::create(&tmp)?))?;
    fs::rename(&tmp, &cache)?;
    Ok(g)
}

fn cache_path(path: &Path, text: &[u8], undirected: bool, cache_dir: &Path) -> PathBuf {
    let mut h = Sha256::new();
    h.update(text);
    h.update([undirected as u8]);
    let digest = h.finalize();
    let key: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "graph".into());
    cache_dir.join(format!("{stem}.{key}.csr"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Degrees {
    pub out_degree: Vec<usize>,
    pub in_degree: Vec<usize>,
    pub average: f64,
}

pub fn degrees(g: &Graph) -> Degrees {
    Degrees {
        out_degree: g.nodes().map(|u| g.out_degree(u)).collect(),
        in_degree: g.nodes().map(|u| g.in_degree(u)).collect(),
        average: g.average_degree(),
    }
}

/// Fixed-size membership bitmap over node ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMask {
    words: Vec<u64>,
}

impl NodeMask {
    pub fn new(n: usize) -> Self {
        NodeMask {
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn from_nodes(n: usize, nodes: impl IntoIterator<Item = NodeId>) -> Self {
        let mut mask = Self::new(n);
        for u in nodes {
            mask.insert(u);
        }
        mask
    }

    #[inline]
    pub fn insert(&mut self, u: NodeId) {
        self.words[(u >> 6) as usize] |= 1 << (u & 63);
    }

    #[inline]
    pub fn contains(&self, u: NodeId) -> bool {
        self.words
            .get((u >> 6) as usize)
            .is_some_and(|w| w & (1 << (u & 63)) != 0)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }
}
