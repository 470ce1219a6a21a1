use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::node::{Edge, EdgeClass, NodeId, NodeKind};
use crate::error::{Error, Result};
use crate::util;

const MAGIC: &str = "hypnet-network";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adjacent {
    pub node: usize,
    pub weight: f64,
    pub class: EdgeClass,
}

/// Immutable weighted undirected network over abstract and keyword nodes.
///
/// Node indices follow [`NodeId`] order, so index comparisons agree with
/// identifier comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeNetwork {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    adjacency: Vec<Vec<Adjacent>>,
    sigma: f64,
    provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConnectivityReport {
    pub components: usize,
    pub largest: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkStats {
    pub nodes: usize,
    pub abstracts: usize,
    pub keywords: usize,
    pub edges: usize,
    pub aa_edges: usize,
    pub kk_edges: usize,
    pub ak_edges: usize,
    pub average_degree: f64,
    /// Global clustering coefficient: closed triplets over all connected
    /// triplets.
    pub clustering_coefficient: f64,
    pub components: usize,
    pub largest_component: usize,
    /// Component sizes, largest first.
    pub component_sizes: Vec<usize>,
}

/// Merges the three edge classes over the given node sets.
///
/// Fails when an edge names a node outside the sets, joins a node to itself,
/// connects the wrong node kinds for its class, or falls outside its class
/// range (`[0, 1]` for abstract-abstract, `[0, sigma]` otherwise). Repeated
/// pairs keep the smallest weight.
pub fn assemble(
    abstract_ids: &[String],
    keyword_ids: &[String],
    aa: &[Edge],
    kk: &[Edge],
    ak: &[Edge],
    sigma: f64,
) -> Result<KnowledgeNetwork> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParam(format!("sigma must be > 0, got {sigma}")));
    }
    let mut nodes: Vec<NodeId> = abstract_ids
        .iter()
        .map(NodeId::abstract_node)
        .chain(keyword_ids.iter().map(NodeId::keyword))
        .collect();
    nodes.sort();
    nodes.dedup();
    let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

    let mut merged: BTreeMap<(usize, usize), (f64, EdgeClass)> = BTreeMap::new();
    for e in aa.iter().chain(kk).chain(ak) {
        let lookup = |n: &NodeId| index.get(n).copied().ok_or_else(|| Error::MissingNode(n.to_string()));
        let (a, b) = (lookup(&e.u)?, lookup(&e.v)?);
        if a == b {
            return Err(Error::InvalidParam(format!("self-loop on {}", e.u)));
        }
        if !e.class.admits(e.u.kind, e.v.kind) {
            return Err(Error::InvalidParam(format!("{} edge {} - {} joins wrong node kinds", e.class.as_str(), e.u, e.v)));
        }
        let hi = if e.class == EdgeClass::AA { 1.0 } else { sigma };
        if !(0.0..=hi).contains(&e.weight) {
            return Err(Error::InvalidParam(format!(
                "{} edge {} - {} weight {} outside [0, {hi}]",
                e.class.as_str(),
                e.u,
                e.v,
                e.weight
            )));
        }
        let w = util::round_sig9(e.weight);
        merged
            .entry((a.min(b), a.max(b)))
            .and_modify(|cur| {
                if w < cur.0 {
                    *cur = (w, e.class)
                }
            })
            .or_insert((w, e.class));
    }
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for (&(a, b), &(weight, class)) in &merged {
        adjacency[a].push(Adjacent { node: b, weight, class });
        adjacency[b].push(Adjacent { node: a, weight, class });
    }
    for list in &mut adjacency {
        list.sort_by_key(|x| x.node);
    }
    Ok(KnowledgeNetwork {
        nodes,
        index,
        adjacency,
        sigma,
        provenance: BTreeMap::new(),
    })
}

impl KnowledgeNetwork {
    pub fn with_provenance(mut self, provenance: BTreeMap<String, String>) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn provenance(&self) -> &BTreeMap<String, String> {
        &self.provenance
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &NodeId {
        &self.nodes[i]
    }

    pub fn index_of(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[Adjacent] {
        &self.adjacency[i]
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a]
            .binary_search_by_key(&b, |x| x.node)
            .ok()
            .map(|p| self.adjacency[a][p].weight)
    }

    /// Edges in canonical order, each once with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adjacency.iter().enumerate().flat_map(move |(a, list)| {
            list.iter().filter(move |x| x.node > a).map(move |x| Edge {
                u: self.nodes[a].clone(),
                v: self.nodes[x.node].clone(),
                weight: x.weight,
                class: x.class,
            })
        })
    }

    fn component_sizes(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            queue.push_back(s);
            let mut size = 0;
            while let Some(u) = queue.pop_front() {
                size += 1;
                for x in &self.adjacency[u] {
                    if !seen[x.node] {
                        seen[x.node] = true;
                        queue.push_back(x.node);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn connectivity(&self) -> ConnectivityReport {
        let sizes = self.component_sizes();
        ConnectivityReport {
            components: sizes.len(),
            largest: sizes.first().copied().unwrap_or(0),
        }
    }

    pub fn stats(&self) -> NetworkStats {
        let sizes = self.component_sizes();
        let mut by_class = [0usize; 3];
        for e in self.edges() {
            by_class[e.class as usize] += 1;
        }
        let edges = self.edge_count();
        let mut triangles = 0u64;
        let mut triplets = 0u64;
        for (a, list) in self.adjacency.iter().enumerate() {
            let d = list.len() as u64;
            triplets += d * d.saturating_sub(1) / 2;
            for x in list.iter().filter(|x| x.node > a) {
                let b = x.node;
                // common neighbours c > b, via sorted merge
                let (mut i, mut j) = (0, 0);
                let (la, lb) = (list, &self.adjacency[b]);
                while i < la.len() && j < lb.len() {
                    let (ca, cb) = (la[i].node, lb[j].node);
                    if ca == cb {
                        if ca > b {
                            triangles += 1;
                        }
                        i += 1;
                        j += 1;
                    } else if ca < cb {
                        i += 1;
                    } else {
                        j += 1;
                    }
                }
            }
        }
        let abstracts = self.nodes.iter().filter(|n| n.kind == NodeKind::Abstract).count();
        NetworkStats {
            nodes: self.nodes.len(),
            abstracts,
            keywords: self.nodes.len() - abstracts,
            edges,
            aa_edges: by_class[EdgeClass::AA as usize],
            kk_edges: by_class[EdgeClass::KK as usize],
            ak_edges: by_class[EdgeClass::AK as usize],
            average_degree: if self.nodes.is_empty() { 0.0 } else { 2.0 * edges as f64 / self.nodes.len() as f64 },
            clustering_coefficient: if triplets == 0 { 0.0 } else { 3.0 * triangles as f64 / triplets as f64 },
            components: sizes.len(),
            largest_component: sizes.first().copied().unwrap_or(0),
            component_sizes: sizes,
        }
    }
}

fn check_token(s: &str, what: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::InvalidParam(format!("{what} {s:?} cannot be written: empty or contains whitespace")));
    }
    Ok(())
}

/// Text format: a version line, a count line, a `meta` line of provenance
/// `key=value` pairs, the node table, then `u v weight class` edges in
/// canonical order.
pub fn write_network(path: &Path, net: &KnowledgeNetwork) -> Result<()> {
    for n in &net.nodes {
        check_token(&n.key, "node key")?;
    }
    for (k, v) in &net.provenance {
        check_token(k, "provenance key")?;
        check_token(v, "provenance value")?;
    }
    let mut w = util::create(path)?;
    let io = |e| Error::io(path, e);
    let stats_abstracts = net.nodes.iter().filter(|n| n.is_abstract()).count();
    writeln!(w, "{MAGIC} {VERSION}").map_err(io)?;
    writeln!(
        w,
        "abstracts={} keywords={} edges={} sigma={}",
        stats_abstracts,
        net.nodes.len() - stats_abstracts,
        net.edge_count(),
        net.sigma
    )
    .map_err(io)?;
    write!(w, "meta").map_err(io)?;
    for (k, v) in &net.provenance {
        write!(w, " {k}={v}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    writeln!(w, "nodes").map_err(io)?;
    for n in &net.nodes {
        writeln!(w, "{n}").map_err(io)?;
    }
    writeln!(w, "edges").map_err(io)?;
    for e in net.edges() {
        writeln!(w, "{} {} {} {}", e.u, e.v, e.weight, e.class.as_str()).map_err(io)?;
    }
    util::finish(path, w)
}

pub fn read_network(path: &Path) -> Result<KnowledgeNetwork> {
    let mut lines = util::open_lines(path)?;
    let mut next = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, l)) => Ok((n, l?)),
            None => Err(Error::parse(path, 0, format!("unexpected end of file, expected {expect}"))),
        }
    };
    let (_, first) = next("version line")?;
    if first != format!("{MAGIC} {VERSION}") {
        return Err(Error::Version(format!(
            "{}: expected {MAGIC:?} version {VERSION}, found {:?}",
            path.display(),
            first.chars().take(40).collect::<String>()
        )));
    }
    let (ln, counts) = next("count line")?;
    let fields: HashMap<&str, &str> = counts.split_whitespace().filter_map(|p| p.split_once('=')).collect();
    let get = |k: &str| -> Result<&str> {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::parse(path, ln, format!("missing {k}")))
    };
    let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::parse(path, ln, format!("bad {k}"))) };
    let (n_abs, n_kw, n_edges) = (num("abstracts")?, num("keywords")?, num("edges")?);
    let sigma: f64 = get("sigma")?.parse().map_err(|_| Error::parse(path, ln, "bad sigma"))?;

    let (ln, meta) = next("meta line")?;
    let mut provenance = BTreeMap::new();
    let mut parts = meta.split(' ');
    if parts.next() != Some("meta") {
        return Err(Error::parse(path, ln, "expected meta line"));
    }
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| Error::parse(path, ln, "bad meta entry"))?;
        provenance.insert(k.to_string(), v.to_string());
    }
    let (ln, tag) = next("nodes")?;
    if tag != "nodes" {
        return Err(Error::parse(path, ln, "expected nodes section"));
    }
    let (mut abstracts, mut keywords) = (Vec::new(), Vec::new());
    for _ in 0..n_abs + n_kw {
        let (ln, l) = next("node")?;
        let id: NodeId = l.parse().map_err(|e: String| Error::parse(path, ln, e))?;
        match id.kind {
            NodeKind::Abstract => abstracts.push(id.key),
            NodeKind::Keyword => keywords.push(id.key),
        }
    }
    if abstracts.len() != n_abs {
        return Err(Error::parse(path, ln, "abstract count does not match node table"));
    }
    let (ln, tag) = next("edges")?;
    if tag != "edges" {
        return Err(Error::parse(path, ln, "expected edges section"));
    }
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let (ln, l) = next("edge")?;
        let cols: Vec<&str> = l.split(' ').collect();
        if cols.len() != 4 {
            return Err(Error::parse(path, ln, "expected `u v weight class`"));
        }
        let u: NodeId = cols[0].parse().map_err(|e: String| Error::parse(path, ln, e))?;
        let v: NodeId = cols[1].parse().map_err(|e: String| Error::parse(path, ln, e))?;
        let weight: f64 = cols[2].parse().map_err(|_| Error::parse(path, ln, "bad weight"))?;
        let class: EdgeClass = cols[3].parse().map_err(|e: String| Error::parse(path, ln, e))?;
        edges.push(Edge::new(u, v, weight, class));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::parse(path, ln, "trailing data after edge list"));
    }
    let net = assemble(&abstracts, &keywords, &edges, &[], &[], sigma)?;
    if net.edge_count() != n_edges {
        return Err(Error::parse(path, 2, "duplicate edges in edge list"));
    }
    Ok(net.with_provenance(provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn aa(a: &str, b: &str, w: f64) -> Edge {
        Edge::new(NodeId::abstract_node(a), NodeId::abstract_node(b), w, EdgeClass::AA)
    }

    fn kk(a: &str, b: &str, w: f64) -> Edge {
        Edge::new(NodeId::keyword(a), NodeId::keyword(b), w, EdgeClass::KK)
    }

    fn ak(a: &str, k: &str, w: f64) -> Edge {
        Edge::new(NodeId::abstract_node(a), NodeId::keyword(k), w, EdgeClass::AK)
    }

    #[test]
    fn components_with_and_without_bridge() {
        let a = ids(&["a1", "a2"]);
        let k = ids(&["k1", "k2"]);
        let net = assemble(&a, &k, &[aa("a1", "a2", 0.5)], &[kk("k1", "k2", 1.0)], &[], 2.0).unwrap();
        assert_eq!(net.connectivity(), ConnectivityReport { components: 2, largest: 2 });
        let net = assemble(&a, &k, &[aa("a1", "a2", 0.5)], &[kk("k1", "k2", 1.0)], &[ak("a2", "k1", 0.3)], 2.0).unwrap();
        assert_eq!(net.connectivity(), ConnectivityReport { components: 1, largest: 4 });
        assert_eq!(net.node_count(), 4);
    }

    #[test]
    fn rejects_bad_edges() {
        let a = ids(&["a1", "a2"]);
        let k = ids(&["k1"]);
        let err = assemble(&a, &k, &[aa("a1", "zz", 0.1)], &[], &[], 2.0).unwrap_err();
        assert!(matches!(err, Error::MissingNode(ref n) if n == "a:zz"));
        assert!(assemble(&a, &k, &[aa("a1", "a2", 1.5)], &[], &[], 2.0).is_err());
        assert!(assemble(&a, &k, &[], &[], &[ak("a1", "k1", 2.5)], 2.0).is_err());
        assert!(assemble(&a, &k, &[aa("a1", "a1", 0.1)], &[], &[], 2.0).is_err());
        let wrong = Edge::new(NodeId::abstract_node("a1"), NodeId::keyword("k1"), 0.1, EdgeClass::AA);
        assert!(assemble(&a, &k, &[wrong], &[], &[], 2.0).is_err());
    }

    #[test]
    fn stats_on_hand_countable_graphs() {
        // triangle a1 a2 a3 plus pendant k1 on a3
        let a = ids(&["a1", "a2", "a3"]);
        let k = ids(&["k1", "k2"]);
        let net = assemble(
            &a,
            &k,
            &[aa("a1", "a2", 0.1), aa("a2", "a3", 0.2), aa("a1", "a3", 0.3)],
            &[],
            &[ak("a3", "k1", 1.0)],
            2.0,
        )
        .unwrap();
        let s = net.stats();
        assert_eq!((s.nodes, s.abstracts, s.keywords, s.edges), (5, 3, 2, 4));
        assert_eq!((s.aa_edges, s.kk_edges, s.ak_edges), (3, 0, 1));
        assert!((s.average_degree - 8.0 / 5.0).abs() < 1e-12);
        // degrees 2,2,3,1,0 -> triplets 1+1+3 = 5; one triangle -> 3/5
        assert!((s.clustering_coefficient - 0.6).abs() < 1e-12);
        assert_eq!(s.component_sizes, vec![4, 1]);

        // a 4-cycle has no triangles
        let a = ids(&["a", "b", "c", "d"]);
        let net = assemble(&a, &[], &[aa("a", "b", 0.1), aa("b", "c", 0.1), aa("c", "d", 0.1), aa("a", "d", 0.1)], &[], &[], 2.0).unwrap();
        assert_eq!(net.stats().clustering_coefficient, 0.0);
    }

    fn fixture() -> KnowledgeNetwork {
        let a = ids(&["a1", "a2", "a3"]);
        let k = ids(&["k1", "k2"]);
        assemble(
            &a,
            &k,
            &[aa("a1", "a2", 0.123456789123), aa("a2", "a3", 1.0)],
            &[kk("k1", "k2", 1.6)],
            &[ak("a1", "k1", 0.0), ak("a3", "k2", 2.0)],
            2.0,
        )
        .unwrap()
        .with_provenance([("k".to_string(), "10".to_string())].into())
    }

    #[test]
    fn round_trip_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("net.txt");
        let net = fixture();
        write_network(&p, &net).unwrap();
        let back = read_network(&p).unwrap();
        assert_eq!(back, net);
        assert_eq!(net.weight(0, 1), Some(0.123456789));
    }

    #[test]
    fn corrupted_header_is_version_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("net.txt");
        write_network(&p, &fixture()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap().replacen("hypnet-network 1", "hypnet-network 7", 1);
        std::fs::write(&p, text).unwrap();
        assert!(matches!(read_network(&p), Err(Error::Version(_))));
        std::fs::write(&p, "garbage\n").unwrap();
        assert!(matches!(read_network(&p), Err(Error::Version(_))));
    }

    #[test]
    fn round_trip_random_thousand_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a: Vec<String> = (0..700).map(|i| format!("doc{i}")).collect();
        let k: Vec<String> = (0..300).map(|i| format!("C{i:05}")).collect();
        let mut aa_e = Vec::new();
        let mut kk_e = Vec::new();
        let mut ak_e = Vec::new();
        for _ in 0..3000 {
            let (i, j) = (rng.random_range(0..700), rng.random_range(0..700));
            if i != j {
                aa_e.push(aa(&a[i], &a[j], rng.random::<f64>()));
            }
            let (p, q) = (rng.random_range(0..300), rng.random_range(0..300));
            if p != q {
                kk_e.push(kk(&k[p], &k[q], 2.0 * rng.random::<f64>()));
            }
            ak_e.push(ak(&a[i], &k[p], 2.0 * rng.random::<f64>()));
        }
        let net = assemble(&a, &k, &aa_e, &kk_e, &ak_e, 2.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("net.txt");
        write_network(&p, &net).unwrap();
        let back = read_network(&p).unwrap();
        assert_eq!(back.node_count(), 1000);
        for i in 0..net.node_count() {
            assert_eq!(back.neighbors(i), net.neighbors(i));
        }
        assert_eq!(back, net);
    }
}
