//! Shortest-path queries and abstract-cloud extension.

mod heap;

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

pub use heap::SkewHeap;

use crate::corpus::NormalizedDocument;
use crate::error::{Error, Result};
use crate::netbuild::{KnowledgeNetwork, NodeId};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryParams {
    /// Abstracts taken from the multi-source neighbourhood of the path.
    pub cloud_size: usize,
    /// Co-occurrence abstracts kept per adjacent keyword pair.
    pub pair_cap: usize,
}

impl Default for QueryParams {
    fn default() -> Self {
        QueryParams {
            cloud_size: 1000,
            pair_cap: 150,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub edge_weights: Vec<f64>,
    pub total_weight: f64,
}

impl Path {
    pub fn abstracts(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter().filter(|n| n.is_abstract())
    }

    /// Consecutive keyword pairs along the path.
    pub fn keyword_pairs(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> {
        self.nodes
            .windows(2)
            .filter(|w| w[0].is_keyword() && w[1].is_keyword())
            .map(|w| (&w[0], &w[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over a skew heap with lazy deletion. Nodes are finalized in
/// `(distance, index)` order; among equal-distance predecessors the smallest
/// node id wins.
struct Dijkstra<'a> {
    net: &'a KnowledgeNetwork,
    dist: Vec<f64>,
    pred: Vec<Option<usize>>,
    done: Vec<bool>,
    heap: SkewHeap<Entry>,
}

impl<'a> Dijkstra<'a> {
    fn new(net: &'a KnowledgeNetwork, sources: &[usize]) -> Self {
        let n = net.node_count();
        let mut d = Dijkstra {
            net,
            dist: vec![f64::INFINITY; n],
            pred: vec![None; n],
            done: vec![false; n],
            heap: SkewHeap::new(),
        };
        for &s in sources {
            if d.dist[s] != 0.0 {
                d.dist[s] = 0.0;
                d.heap.push(Entry { dist: 0.0, node: s });
            }
        }
        d
    }

    /// Finalizes and returns the next closest node.
    fn next(&mut self) -> Option<(usize, f64)> {
        while let Some(Entry { dist, node }) = self.heap.pop() {
            if self.done[node] || dist > self.dist[node] {
                continue;
            }
            self.done[node] = true;
            for adj in self.net.neighbors(node) {
                let v = adj.node;
                if self.done[v] {
                    continue;
                }
                let cand = dist + adj.weight;
                if cand < self.dist[v] {
                    self.dist[v] = cand;
                    self.pred[v] = Some(node);
                    self.heap.push(Entry { dist: cand, node: v });
                } else if cand == self.dist[v] && self.pred[v].is_some_and(|p| node < p) {
                    self.pred[v] = Some(node);
                }
            }
            return Some((node, dist));
        }
        None
    }
}

fn lookup(net: &KnowledgeNetwork, id: &NodeId) -> Result<usize> {
    net.index_of(id).ok_or_else(|| Error::UnknownNode(id.to_string()))
}

/// Minimum-weight path from `source` to `target`; `Ok(None)` when the target
/// is unreachable.
pub fn shortest_path(net: &KnowledgeNetwork, source: &NodeId, target: &NodeId) -> Result<Option<Path>> {
    let s = lookup(net, source)?;
    let t = lookup(net, target)?;
    if s == t {
        return Err(Error::SameEndpoints(source.to_string()));
    }
    let mut dj = Dijkstra::new(net, &[s]);
    while let Some((u, _)) = dj.next() {
        if u == t {
            break;
        }
    }
    if !dj.done[t] {
        return Ok(None);
    }
    let mut rev = vec![t];
    let mut cur = t;
    while let Some(p) = dj.pred[cur] {
        rev.push(p);
        cur = p;
    }
    rev.reverse();
    let edge_weights: Vec<f64> = rev
        .windows(2)
        .map(|w| net.weight(w[0], w[1]).expect("path follows edges"))
        .collect();
    let total_weight = edge_weights.iter().fold(0.0, |acc, w| acc + w);
    Ok(Some(Path {
        nodes: rev.into_iter().map(|i| net.node(i).clone()).collect(),
        edge_weights,
        total_weight,
    }))
}

/// Distances from `source` to every node (infinite when unreachable).
pub fn distances_from(net: &KnowledgeNetwork, source: &NodeId) -> Result<Vec<f64>> {
    let s = lookup(net, source)?;
    let mut dj = Dijkstra::new(net, &[s]);
    while dj.next().is_some() {}
    Ok(dj.dist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodMember {
    pub node: NodeId,
    /// Multi-source distance from the path abstracts.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceMember {
    pub node: NodeId,
    pub pair: (NodeId, NodeId),
    /// `weight(c, alpha) + weight(c, beta)`.
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AbstractCloud {
    /// Abstracts on the path, in path order.
    pub path_abstracts: Vec<NodeId>,
    pub neighborhood: Vec<NeighborhoodMember>,
    pub cooccurrence: Vec<CooccurrenceMember>,
    /// Deduplicated: neighbourhood, leftover path abstracts, co-occurrence.
    pub union: Vec<NodeId>,
    /// Set when the path runs entirely through the keyword layer, i.e. the
    /// endpoints are already related by known keyword relations.
    pub direct_keyword_link: bool,
}

fn check_path(net: &KnowledgeNetwork, path: &Path) -> Result<Vec<usize>> {
    let idx: Vec<usize> = path.nodes.iter().map(|n| lookup(net, n)).collect::<Result<_>>()?;
    for w in idx.windows(2) {
        if net.weight(w[0], w[1]).is_none() {
            return Err(Error::InvalidParam(format!(
                "path nodes {} and {} are not adjacent",
                net.node(w[0]),
                net.node(w[1])
            )));
        }
    }
    Ok(idx)
}

/// Widens a path into the abstract cloud used for topic modeling.
///
/// The neighbourhood is the first `cloud_size` abstracts finalized by a
/// Dijkstra seeded at distance zero from every path abstract (path abstracts
/// count toward it). For each adjacent keyword pair the abstracts linked to
/// both are ranked by summed edge weight and truncated at `pair_cap`.
pub fn extend_cloud(net: &KnowledgeNetwork, path: &Path, params: &QueryParams) -> Result<AbstractCloud> {
    let idx = check_path(net, path)?;
    let seeds: Vec<usize> = idx.iter().copied().filter(|&i| net.node(i).is_abstract()).collect();
    let path_abstracts: Vec<NodeId> = seeds.iter().map(|&i| net.node(i).clone()).collect();

    let mut neighborhood = Vec::new();
    if !seeds.is_empty() && params.cloud_size > 0 {
        let mut dj = Dijkstra::new(net, &seeds);
        while let Some((u, d)) = dj.next() {
            if net.node(u).is_abstract() {
                neighborhood.push(NeighborhoodMember {
                    node: net.node(u).clone(),
                    distance: d,
                });
                if neighborhood.len() == params.cloud_size {
                    break;
                }
            }
        }
    }

    let mut cooccurrence = Vec::new();
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(net.node(a).is_keyword() && net.node(b).is_keyword()) {
            continue;
        }
        let b_weights: HashMap<usize, f64> = net
            .neighbors(b)
            .iter()
            .filter(|x| net.node(x.node).is_abstract())
            .map(|x| (x.node, x.weight))
            .collect();
        let mut shared: Vec<(f64, usize)> = net
            .neighbors(a)
            .iter()
            .filter_map(|x| b_weights.get(&x.node).map(|wb| (x.weight + wb, x.node)))
            .collect();
        shared.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        shared.truncate(params.pair_cap);
        cooccurrence.extend(shared.into_iter().map(|(score, c)| CooccurrenceMember {
            node: net.node(c).clone(),
            pair: (net.node(a).clone(), net.node(b).clone()),
            score,
        }));
    }

    let mut seen = HashSet::new();
    let union: Vec<NodeId> = neighborhood
        .iter()
        .map(|m| &m.node)
        .chain(&path_abstracts)
        .chain(cooccurrence.iter().map(|m| &m.node))
        .filter(|n| seen.insert(*n))
        .cloned()
        .collect();

    Ok(AbstractCloud {
        direct_keyword_link: seeds.is_empty(),
        path_abstracts,
        neighborhood,
        cooccurrence,
        union,
    })
}

/// Everything a query produces: the path (if any), its cloud, and the
/// cloud's phrase-merged documents in union order.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBundle {
    pub source: NodeId,
    pub target: NodeId,
    pub params: QueryParams,
    pub path: Option<Path>,
    pub cloud: AbstractCloud,
    pub docs: Vec<NormalizedDocument>,
    /// Copied from the network provenance (config hash, seed).
    pub meta: std::collections::BTreeMap<String, String>,
}

impl QueryBundle {
    pub fn found(&self) -> bool {
        self.path.is_some()
    }
}

/// Runs a full query against `docs`, the phrase-merged documents the
/// network was built from.
pub fn run_query(
    net: &KnowledgeNetwork,
    docs: &[NormalizedDocument],
    source: &NodeId,
    target: &NodeId,
    params: &QueryParams,
) -> Result<QueryBundle> {
    let path = shortest_path(net, source, target)?;
    let cloud = match &path {
        Some(p) => extend_cloud(net, p, params)?,
        None => AbstractCloud::default(),
    };
    let by_id: HashMap<&str, &NormalizedDocument> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let cloud_docs = cloud
        .union
        .iter()
        .map(|n| {
            by_id
                .get(n.key.as_str())
                .map(|d| (*d).clone())
                .ok_or_else(|| Error::MissingDocument(n.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QueryBundle {
        source: source.clone(),
        target: target.clone(),
        params: *params,
        path,
        cloud,
        docs: cloud_docs,
        meta: net.provenance().clone(),
    })
}

#[derive(Serialize, Deserialize)]
struct PathFile {
    source: NodeId,
    target: NodeId,
    found: bool,
    nodes: Vec<NodeId>,
    weights: Vec<f64>,
    total_weight: Option<f64>,
    meta: std::collections::BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct CloudFile {
    params: QueryParams,
    #[serde(flatten)]
    cloud: AbstractCloud,
    meta: std::collections::BTreeMap<String, String>,
}

fn write_json<T: Serialize>(path: &FsPath, value: &T) -> Result<()> {
    let mut w = util::create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    util::finish(path, w)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &FsPath) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `path.json`, `cloud.json` and `docs.jsonl` into `dir`.
pub fn write_bundle(dir: &FsPath, bundle: &QueryBundle) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pf = PathFile {
        source: bundle.source.clone(),
        target: bundle.target.clone(),
        found: bundle.path.is_some(),
        nodes: bundle.path.as_ref().map(|p| p.nodes.clone()).unwrap_or_default(),
        weights: bundle.path.as_ref().map(|p| p.edge_weights.clone()).unwrap_or_default(),
        total_weight: bundle.path.as_ref().map(|p| p.total_weight),
        meta: bundle.meta.clone(),
    };
    write_json(&dir.join("path.json"), &pf)?;
    write_json(
        &dir.join("cloud.json"),
        &CloudFile {
            params: bundle.params,
            cloud: bundle.cloud.clone(),
            meta: bundle.meta.clone(),
        },
    )?;
    let docs_path = dir.join("docs.jsonl");
    let mut w = util::create(&docs_path)?;
    for d in &bundle.docs {
        serde_json::to_writer(&mut w, d)?;
        writeln!(w).map_err(|e| Error::io(&docs_path, e))?;
    }
    util::finish(&docs_path, w)
}

pub fn read_bundle(dir: &FsPath) -> Result<QueryBundle> {
    let pf: PathFile = read_json(&dir.join("path.json"))?;
    let cf: CloudFile = read_json(&dir.join("cloud.json"))?;
    let docs = read_docs_jsonl(&dir.join("docs.jsonl"))?;
    let path = pf.found.then(|| Path {
        nodes: pf.nodes,
        edge_weights: pf.weights,
        total_weight: pf.total_weight.unwrap_or(0.0),
    });
    Ok(QueryBundle {
        source: pf.source,
        target: pf.target,
        params: cf.params,
        path,
        cloud: cf.cloud,
        docs,
        meta: pf.meta,
    })
}

/// One `{"id": .., "tokens": [..]}` object per line.
pub fn read_docs_jsonl(path: &FsPath) -> Result<Vec<NormalizedDocument>> {
    let mut docs = Vec::new();
    for (lineno, line) in util::open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.to_string()))?);
    }
    Ok(docs)
}
