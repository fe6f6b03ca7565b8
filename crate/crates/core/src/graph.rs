//! Directed graphs with per-edge activation probability and delay distribution.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rand::Rng;
use rand_distr::{Distribution, Exp, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node index, `0 <= index < n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Distribution of the transmission delay of a live edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayDist {
    Weibull { shape: f64, scale: f64 },
    Deterministic { value: f64 },
    Exponential { rate: f64 },
}

impl Default for DelayDist {
    /// Weibull with shape 4 and scale 1.
    fn default() -> Self {
        DelayDist::Weibull {
            shape: 4.0,
            scale: 1.0,
        }
    }
}

impl DelayDist {
    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        let d = DelayDist::Weibull { shape, scale };
        d.validate()?;
        Ok(d)
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        let d = DelayDist::Deterministic { value };
        d.validate()?;
        Ok(d)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let d = DelayDist::Exponential { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DelayDist::Weibull { shape, scale } => {
                shape.is_finite() && scale.is_finite() && shape > 0.0 && scale > 0.0
            }
            DelayDist::Deterministic { value } => value.is_finite() && value >= 0.0,
            DelayDist::Exponential { rate } => rate.is_finite() && rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad delay distribution {self:?}")))
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DelayDist::Weibull { shape, scale } => Weibull::new(scale, shape)
                .expect("validated weibull")
                .sample(rng),
            DelayDist::Deterministic { value } => value,
            DelayDist::Exponential { rate } => Exp::new(rate).expect("validated rate").sample(rng),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub p: f64,
    pub delay: DelayDist,
}

impl Edge {
    /// One realisation of the edge: `Some(delay)` when live.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        let live = if self.p >= 1.0 {
            true
        } else if self.p <= 0.0 {
            false
        } else {
            rng.random::<f64>() < self.p
        };
        live.then(|| self.delay.sample(rng))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directedness {
    Directed,
    /// Every input line yields both directions.
    Symmetrize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n: usize,
    pub edges: usize,
    pub max_in_degree: usize,
    pub max_out_degree: usize,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Immutable directed graph in compressed adjacency form.
///
/// Edges keep their insertion order; `out_*` and `in_*` hold edge indices
/// grouped by source and destination respectively.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    out_offsets: Vec<usize>,
    out_edges: Vec<u32>,
    in_offsets: Vec<usize>,
    in_edges: Vec<u32>,
    external_ids: Vec<u64>,
    self_loops_dropped: usize,
    duplicates_dropped: usize,
}

impl Graph {
    /// Builds a graph over `n` nodes; self-loops and repeated `(src, dst)`
    /// pairs are dropped (first occurrence wins).
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        let mut self_loops = 0;
        let mut dups = 0;
        for e in edges {
            if e.src.index() >= n || e.dst.index() >= n {
                return Err(Error::UnknownNode(e.src.0.max(e.dst.0) as u64));
            }
            if !(0.0..=1.0).contains(&e.p) {
                return Err(Error::invalid(format!(
                    "edge probability {} not in [0,1]",
                    e.p
                )));
            }
            e.delay.validate()?;
            if e.src == e.dst {
                self_loops += 1;
                continue;
            }
            if !seen.insert((e.src, e.dst)) {
                dups += 1;
                continue;
            }
            kept.push(e);
        }
        let mut g = Graph {
            n,
            edges: kept,
            out_offsets: Vec::new(),
            out_edges: Vec::new(),
            in_offsets: Vec::new(),
            in_edges: Vec::new(),
            external_ids: (0..n as u64).collect(),
            self_loops_dropped: self_loops,
            duplicates_dropped: dups,
        };
        g.index();
        Ok(g)
    }

    /// Convenience for tests and generators: every edge gets probability `p`
    /// and delay `delay`.
    pub fn from_pairs(
        n: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
        p: f64,
        delay: DelayDist,
    ) -> Result<Self> {
        Graph::from_edges(
            n,
            pairs.into_iter().map(|(s, d)| Edge {
                src: NodeId::from(s),
                dst: NodeId::from(d),
                p,
                delay,
            }),
        )
    }

    fn index(&mut self) {
        let (oo, oe) = csr(self.n, self.edges.iter().map(|e| e.src.index()));
        let (io, ie) = csr(self.n, self.edges.iter().map(|e| e.dst.index()));
        self.out_offsets = oo;
        self.out_edges = oe;
        self.in_offsets = io;
        self.in_edges = ie;
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Indices of edges leaving `v`.
    #[inline]
    pub fn out_edges(&self, v: NodeId) -> &[u32] {
        &self.out_edges[self.out_offsets[v.index()]..self.out_offsets[v.index() + 1]]
    }

    /// Indices of edges entering `v`.
    #[inline]
    pub fn in_edges(&self, v: NodeId) -> &[u32] {
        &self.in_edges[self.in_offsets[v.index()]..self.in_offsets[v.index() + 1]]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_edges(v).len()
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_edges(v).len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n as u32).map(NodeId)
    }

    pub fn external_id(&self, v: NodeId) -> u64 {
        self.external_ids[v.index()]
    }

    pub fn external_ids(&self) -> &[u64] {
        &self.external_ids
    }

    /// Inverse of the id remap; `None` when the id never appeared.
    pub fn lookup_external(&self, ext: u64) -> Option<NodeId> {
        // Identity remaps are the common case for generated graphs.
        if let Some(&id) = self.external_ids.get(ext as usize) {
            if id == ext {
                return Some(NodeId(ext as u32));
            }
        }
        self.external_ids
            .iter()
            .position(|&x| x == ext)
            .map(NodeId::from)
    }

    pub fn external_lookup_table(&self) -> HashMap<u64, NodeId> {
        self.external_ids
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, NodeId::from(i)))
            .collect()
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            n: self.n,
            edges: self.edges.len(),
            max_in_degree: self.nodes().map(|v| self.in_degree(v)).max().unwrap_or(0),
            max_out_degree: self.nodes().map(|v| self.out_degree(v)).max().unwrap_or(0),
            self_loops_dropped: self.self_loops_dropped,
            duplicates_dropped: self.duplicates_dropped,
        }
    }

    /// Sets `p(u,v) = 1 / in_degree(v)` on every edge.
    pub fn assign_weighted_cascade(mut self) -> Self {
        let indeg: Vec<usize> = self.nodes().map(|v| self.in_degree(v)).collect();
        for e in &mut self.edges {
            e.p = 1.0 / indeg[e.dst.index()] as f64;
        }
        self
    }

    pub fn assign_uniform_probability(mut self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("edge probability {p} not in [0,1]")));
        }
        for e in &mut self.edges {
            e.p = p;
        }
        Ok(self)
    }

    /// Gives every edge the same delay distribution.
    pub fn assign_delay(mut self, delay: DelayDist) -> Result<Self> {
        delay.validate()?;
        for e in &mut self.edges {
            e.delay = delay;
        }
        Ok(self)
    }

    /// Per-edge override, by edge index.
    pub fn set_edge_delay(&mut self, edge: usize, delay: DelayDist) -> Result<()> {
        delay.validate()?;
        self.edges[edge].delay = delay;
        Ok(())
    }

    pub fn set_edge_probability(&mut self, edge: usize, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("edge probability {p} not in [0,1]")));
        }
        self.edges[edge].p = p;
        Ok(())
    }

    /// Writes `src dst` lines using external ids.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(
                w,
                "{} {}",
                self.external_ids[e.src.index()],
                self.external_ids[e.dst.index()]
            )?;
        }
        Ok(())
    }

    /// Parses a whitespace-separated edge list; gzip input is detected by its
    /// magic bytes. Ids are remapped densely in order of first appearance.
    /// Edges get `p = 1` and the default delay until reassigned.
    pub fn load_edge_list(path: impl AsRef<Path>, directedness: Directedness) -> Result<Self> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = File::open(path).map_err(io_err)?;
        let mut magic = [0u8; 2];
        let got = file.read(&mut magic).map_err(io_err)?;
        drop(file);
        let file = File::open(path).map_err(io_err)?;
        let reader: Box<dyn BufRead> = if got == 2 && magic == [0x1f, 0x8b] {
            Box::new(BufReader::new(MultiGzDecoder::new(file)))
        } else {
            Box::new(BufReader::new(file))
        };
        parse_edge_list(reader, path, directedness)
    }
}

fn parse_edge_list(reader: impl BufRead, path: &Path, directedness: Directedness) -> Result<Graph> {
    let mut remap: HashMap<u64, u32> = HashMap::new();
    let mut external_ids = Vec::new();
    let mut pairs = Vec::new();
    let mut intern = |x: u64| {
        *remap.entry(x).or_insert_with(|| {
            external_ids.push(x);
            (external_ids.len() - 1) as u32
        })
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let malformed = || Error::MalformedLine {
            path: path.to_path_buf(),
            line: lineno + 1,
            text: text.to_string(),
        };
        let mut tok = text.split_whitespace();
        let (Some(a), Some(b), None) = (tok.next(), tok.next(), tok.next()) else {
            return Err(malformed());
        };
        let a: u64 = a.parse().map_err(|_| malformed())?;
        let b: u64 = b.parse().map_err(|_| malformed())?;
        let (u, v) = (intern(a), intern(b));
        pairs.push((u, v));
        if directedness == Directedness::Symmetrize {
            pairs.push((v, u));
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyGraph(path.to_path_buf()));
    }
    let n = external_ids.len();
    let delay = DelayDist::default();
    let mut g = Graph::from_edges(
        n,
        pairs.into_iter().map(|(s, d)| Edge {
            src: NodeId(s),
            dst: NodeId(d),
            p: 1.0,
            delay,
        }),
    )?;
    if directedness == Directedness::Symmetrize {
        // Each input self-loop was pushed twice.
        g.self_loops_dropped /= 2;
    }
    if g.edges.is_empty() {
        return Err(Error::EmptyGraph(path.to_path_buf()));
    }
    g.external_ids = external_ids;
    Ok(g)
}

fn csr(n: usize, keys: impl Iterator<Item = usize> + Clone) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = vec![0usize; n + 1];
    for k in keys.clone() {
        offsets[k + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut slots = vec![0u32; offsets[n]];
    for (e, k) in keys.enumerate() {
        slots[cursor[k]] = e as u32;
        cursor[k] += 1;
    }
    (offsets, slots)
}
