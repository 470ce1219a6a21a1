use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::node::{Edge, EdgeClass, NodeId};
use crate::error::{Error, Result};
use crate::util;

/// The fourteen ontology relation types, following the UMLS `REL` codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationType {
    AllowedQualifier,
    Child,
    Deleted,
    Parent,
    QualifiedBy,
    Broader,
    Alike,
    Narrower,
    Other,
    PossiblySynonymous,
    Unspecified,
    Sibling,
    Synonym,
    NotRelated,
}

impl RelationType {
    pub const ALL: [RelationType; 14] = [
        RelationType::AllowedQualifier,
        RelationType::Child,
        RelationType::Deleted,
        RelationType::Parent,
        RelationType::QualifiedBy,
        RelationType::Broader,
        RelationType::Alike,
        RelationType::Narrower,
        RelationType::Other,
        RelationType::PossiblySynonymous,
        RelationType::Unspecified,
        RelationType::Sibling,
        RelationType::Synonym,
        RelationType::NotRelated,
    ];

    pub fn code(&self) -> &'static str {
        use RelationType::*;
        match self {
            AllowedQualifier => "AQ",
            Child => "CHD",
            Deleted => "DEL",
            Parent => "PAR",
            QualifiedBy => "QB",
            Broader => "RB",
            Alike => "RL",
            Narrower => "RN",
            Other => "RO",
            PossiblySynonymous => "RQ",
            Unspecified => "RU",
            Sibling => "SIB",
            Synonym => "SY",
            NotRelated => "XR",
        }
    }

    fn name(&self) -> &'static str {
        use RelationType::*;
        match self {
            AllowedQualifier => "allowed_qualifier",
            Child => "child",
            Deleted => "deleted",
            Parent => "parent",
            QualifiedBy => "qualified_by",
            Broader => "broader",
            Alike => "alike",
            Narrower => "narrower",
            Other => "other",
            PossiblySynonymous => "possibly_synonymous",
            Unspecified => "unspecified",
            Sibling => "sibling",
            Synonym => "synonym",
            NotRelated => "not_related",
        }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for RelationType {
    type Err = String;

    /// Accepts the code (`PAR`) or the lowercase name (`parent`).
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        RelationType::ALL
            .into_iter()
            .find(|r| r.code().eq_ignore_ascii_case(s) || r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown relation type {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub a: String,
    pub b: String,
    pub rel: RelationType,
}

/// Keywords, their synonyms, and the typed relations between them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordCatalog {
    /// id → canonical name (the first synonym listed, else the id).
    pub keywords: BTreeMap<String, String>,
    /// id → synonym strings, in file order without duplicates.
    pub synonyms: BTreeMap<String, Vec<String>>,
    pub relations: Vec<Relation>,
}

impl KeywordCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_synonym(&mut self, id: &str, synonym: &str) {
        self.keywords
            .entry(id.to_string())
            .or_insert_with(|| synonym.to_string());
        let list = self.synonyms.entry(id.to_string()).or_default();
        if !list.iter().any(|s| s == synonym) {
            list.push(synonym.to_string());
        }
    }

    pub fn add_relation(&mut self, a: &str, b: &str, rel: RelationType) {
        for id in [a, b] {
            self.keywords
                .entry(id.to_string())
                .or_insert_with(|| id.to_string());
        }
        self.relations.push(Relation {
            a: a.to_string(),
            b: b.to_string(),
            rel,
        });
    }

    /// Reads the synonyms TSV (`keyword_id`, `synonym`) and relations TSV
    /// (`id1`, `id2`, `relation_type`). Blank lines and `#` comments are
    /// skipped. Every row with an unknown relation type is reported at once.
    pub fn load(synonyms: &Path, relations: &Path) -> Result<Self> {
        let mut cat = KeywordCatalog::new();
        for (lineno, line) in util::open_lines(synonyms)? {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let (id, syn) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(synonyms, lineno, "expected keyword_id<TAB>synonym"))?;
            let (id, syn) = (id.trim(), syn.trim());
            if id.is_empty() || syn.is_empty() {
                return Err(Error::parse(synonyms, lineno, "empty keyword id or synonym"));
            }
            cat.add_synonym(id, syn);
        }
        let mut bad = Vec::new();
        for (lineno, line) in util::open_lines(relations)? {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 3 || cols[0].is_empty() || cols[1].is_empty() {
                return Err(Error::parse(relations, lineno, "expected id1<TAB>id2<TAB>relation_type"));
            }
            match cols[2].parse() {
                Ok(rel) => cat.add_relation(cols[0], cols[1], rel),
                Err(_) => bad.push(format!("{}:{lineno}: {line}", relations.display())),
            }
        }
        if !bad.is_empty() {
            return Err(Error::UnknownRelationType(bad));
        }
        Ok(cat)
    }
}

/// Relevance weight in `[0, 1]` per relation type.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationWeights(BTreeMap<RelationType, f64>);

impl Default for RelationWeights {
    /// parent/child 0.5, broader/narrower 0.6, everything else 0.8.
    fn default() -> Self {
        use RelationType::*;
        RelationWeights(
            RelationType::ALL
                .into_iter()
                .map(|r| {
                    let w = match r {
                        Parent | Child => 0.5,
                        Broader | Narrower => 0.6,
                        _ => 0.8,
                    };
                    (r, w)
                })
                .collect(),
        )
    }
}

impl RelationWeights {
    pub fn empty() -> Self {
        RelationWeights(BTreeMap::new())
    }

    pub fn set(&mut self, rel: RelationType, weight: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParam(format!("relation weight {weight} for {rel} outside [0,1]")));
        }
        self.0.insert(rel, weight);
        Ok(())
    }

    pub fn get(&self, rel: RelationType) -> Option<f64> {
        self.0.get(&rel).copied()
    }

    /// Reads `relation_type<TAB>weight` rows over the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let mut w = RelationWeights::default();
        for (lineno, line) in util::open_lines(path)? {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let (rel, weight) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, lineno, "expected relation_type<TAB>weight"))?;
            let rel: RelationType = rel.parse().map_err(|e: String| Error::parse(path, lineno, e))?;
            let weight: f64 = weight
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, lineno, "bad weight"))?;
            w.set(rel, weight).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        }
        Ok(w)
    }
}

/// Keyword-layer edges: `weight(type) * sigma` per relation, parallel
/// relations collapsed to the minimum, self-relations dropped.
pub fn load_keyword_graph(catalog: &KeywordCatalog, weights: &RelationWeights, sigma: f64) -> Result<Vec<Edge>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParam(format!("sigma must be > 0, got {sigma}")));
    }
    let missing: BTreeSet<String> = catalog
        .relations
        .iter()
        .filter(|r| weights.get(r.rel).is_none())
        .map(|r| format!("{}\t{}\t{} (no weight configured)", r.a, r.b, r.rel))
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnknownRelationType(missing.into_iter().collect()));
    }
    let mut best: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    for r in &catalog.relations {
        if r.a == r.b {
            continue;
        }
        let w = util::round_sig9(weights.get(r.rel).expect("checked above") * sigma);
        let e = Edge::new(NodeId::keyword(&r.a), NodeId::keyword(&r.b), w, EdgeClass::KK);
        best.entry((e.u, e.v))
            .and_modify(|cur| *cur = cur.min(w))
            .or_insert(w);
    }
    Ok(best
        .into_iter()
        .map(|((u, v), w)| Edge { u, v, weight: w, class: EdgeClass::KK })
        .collect())
}
