use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::node::{Edge, EdgeClass, NodeId};
use crate::embed::Centroid;
use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnMethod {
    /// Brute force over all pairs.
    #[default]
    Exact,
    /// NN-descent neighbour refinement.
    Approx,
}

impl KnnMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            KnnMethod::Exact => "exact",
            KnnMethod::Approx => "approx",
        }
    }
}

impl FromStr for KnnMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exact" => Ok(KnnMethod::Exact),
            "approx" => Ok(KnnMethod::Approx),
            _ => Err(format!("unknown knn method {s:?}")),
        }
    }
}

fn l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn by_dist(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// For each point, its `k` nearest other points by L2 distance, as
/// `(index, distance)` sorted by distance then index.
pub fn knn_lists(points: &[&[f32]], k: usize, method: KnnMethod) -> Vec<Vec<(usize, f64)>> {
    let k = k.min(points.len().saturating_sub(1));
    if k == 0 {
        return vec![Vec::new(); points.len()];
    }
    match method {
        KnnMethod::Exact => exact(points, k),
        KnnMethod::Approx => nn_descent(points, k),
    }
}

fn exact(points: &[&[f32]], k: usize) -> Vec<Vec<(usize, f64)>> {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut all: Vec<(usize, f64)> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| (j, l2(points[i], points[j])))
                .collect();
            all.select_nth_unstable_by(k - 1, by_dist);
            all.truncate(k);
            all.sort_by(by_dist);
            all
        })
        .collect()
}

struct Candidate {
    id: usize,
    dist: f64,
    fresh: bool,
}

fn try_insert(list: &mut Vec<Candidate>, k: usize, id: usize, dist: f64) -> bool {
    if list.iter().any(|c| c.id == id) {
        return false;
    }
    let key = (id, dist);
    if list.len() == k {
        let last = list.last().expect("k > 0");
        if by_dist(&key, &(last.id, last.dist)) != Ordering::Less {
            return false;
        }
        list.pop();
    }
    let pos = list
        .iter()
        .position(|c| by_dist(&key, &(c.id, c.dist)) == Ordering::Less)
        .unwrap_or(list.len());
    list.insert(pos, Candidate { id, dist, fresh: true });
    true
}

fn nn_descent(points: &[&[f32]], k: usize) -> Vec<Vec<(usize, f64)>> {
    const MAX_ITERS: usize = 30;
    const DELTA: f64 = 0.0005;
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b6e_6e64);
    let mut lists: Vec<Vec<Candidate>> = (0..n)
        .map(|i| {
            let mut l = Vec::with_capacity(k);
            while l.len() < k {
                let j = rng.random_range(0..n);
                if j != i {
                    try_insert(&mut l, k, j, l2(points[i], points[j]));
                }
            }
            l
        })
        .collect();

    for _ in 0..MAX_ITERS {
        let mut fresh: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut old: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, list) in lists.iter_mut().enumerate() {
            for c in list.iter_mut() {
                if c.fresh {
                    fresh[i].push(c.id);
                    c.fresh = false;
                } else {
                    old[i].push(c.id);
                }
            }
        }
        let mut rev_fresh: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut rev_old: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for &j in &fresh[i] {
                rev_fresh[j].push(i);
            }
            for &j in &old[i] {
                rev_old[j].push(i);
            }
        }
        let mut updates = 0usize;
        for i in 0..n {
            let mut f: Vec<usize> = fresh[i].iter().chain(&rev_fresh[i]).copied().collect();
            f.sort_unstable();
            f.dedup();
            let mut o: Vec<usize> = old[i].iter().chain(&rev_old[i]).copied().collect();
            o.sort_unstable();
            o.dedup();
            for (a, &p) in f.iter().enumerate() {
                for &q in f[a + 1..].iter().chain(o.iter()) {
                    if p == q {
                        continue;
                    }
                    let d = l2(points[p], points[q]);
                    updates += try_insert(&mut lists[p], k, q, d) as usize;
                    updates += try_insert(&mut lists[q], k, p, d) as usize;
                }
            }
        }
        if (updates as f64) <= DELTA * (n * k) as f64 {
            break;
        }
    }
    lists
        .into_iter()
        .map(|l| l.into_iter().map(|c| (c.id, c.dist)).collect())
        .collect()
}

/// Abstract-layer edges: each non-degenerate centroid links to its `k`
/// nearest neighbours, the union is symmetrized, and raw L2 distances are
/// min-max scaled to `[0, 1]`.
pub fn knn_abstract_edges(centroids: &[Centroid], k: usize, method: KnnMethod) -> Result<Vec<Edge>> {
    if k < 1 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    let live: Vec<&Centroid> = centroids.iter().filter(|c| !c.degenerate).collect();
    if live.len() < k + 1 {
        return Err(Error::TooFewCentroids {
            needed: k + 1,
            got: live.len(),
        });
    }
    let points: Vec<&[f32]> = live.iter().map(|c| c.vector.as_slice()).collect();
    let lists = knn_lists(&points, k, method);
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, list) in lists.iter().enumerate() {
        for &(j, d) in list {
            pairs.insert((i.min(j), i.max(j)), d);
        }
    }
    let raw: Vec<f64> = pairs.values().copied().collect();
    let scaled = util::min_max_scale(&raw, 1.0);
    let mut edges: Vec<Edge> = pairs
        .keys()
        .zip(scaled)
        .map(|(&(i, j), w)| {
            Edge::new(
                NodeId::abstract_node(&live[i].doc_id),
                NodeId::abstract_node(&live[j].doc_id),
                util::round_sig9(w),
                EdgeClass::AA,
            )
        })
        .collect();
    edges.sort_by(|a, b| (&a.u, &a.v).cmp(&(&b.u, &b.v)));
    Ok(edges)
}
