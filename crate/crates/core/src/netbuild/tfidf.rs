use std::collections::BTreeMap;

use super::node::{Edge, EdgeClass, NodeId};
use super::trie::CountMatrix;
use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Clone, PartialEq)]
pub struct RawAkWeight {
    pub doc_id: String,
    pub keyword: String,
    pub count: u64,
    pub total: u64,
    /// `total / count`.
    pub raw: f64,
}

/// Inverse tf-idf distances before scaling: a keyword's corpus-wide count
/// divided by its count in the abstract. Zero counts produce no entry.
pub fn raw_ak_weights(counts: &CountMatrix) -> Vec<RawAkWeight> {
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for row in counts.values() {
        for (kw, &c) in row {
            *totals.entry(kw.as_str()).or_default() += c;
        }
    }
    counts
        .iter()
        .flat_map(|(doc, row)| {
            let totals = &totals;
            row.iter().filter(|(_, &c)| c > 0).map(move |(kw, &c)| {
                let total = totals[kw.as_str()];
                RawAkWeight {
                    doc_id: doc.clone(),
                    keyword: kw.clone(),
                    count: c,
                    total,
                    raw: total as f64 / c as f64,
                }
            })
        })
        .collect()
}

/// Abstract-keyword edges with raw inverse tf-idf min-max scaled to
/// `[0, sigma]`.
pub fn tfidf_edges(counts: &CountMatrix, sigma: f64) -> Result<Vec<Edge>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParam(format!("sigma must be > 0, got {sigma}")));
    }
    let raw = raw_ak_weights(counts);
    let scaled = util::min_max_scale(&raw.iter().map(|r| r.raw).collect::<Vec<_>>(), sigma);
    Ok(raw
        .into_iter()
        .zip(scaled)
        .map(|(r, w)| {
            Edge::new(
                NodeId::abstract_node(r.doc_id),
                NodeId::keyword(r.keyword),
                util::round_sig9(w),
                EdgeClass::AK,
            )
        })
        .collect())
}
