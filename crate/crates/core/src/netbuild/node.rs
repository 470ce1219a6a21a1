use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Abstract,
    Keyword,
}

/// A network node, written as `a:<doc_id>` or `k:<keyword_id>`.
///
/// Ordering is abstracts first, then by key, which matches the ordering of
/// the serialized strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub kind: NodeKind,
    pub key: String,
}

impl NodeId {
    pub fn abstract_node(doc_id: impl Into<String>) -> Self {
        NodeId {
            kind: NodeKind::Abstract,
            key: doc_id.into(),
        }
    }

    pub fn keyword(id: impl Into<String>) -> Self {
        NodeId {
            kind: NodeKind::Keyword,
            key: id.into(),
        }
    }

    pub fn is_abstract(&self) -> bool {
        self.kind == NodeKind::Abstract
    }

    pub fn is_keyword(&self) -> bool {
        self.kind == NodeKind::Keyword
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.kind {
            NodeKind::Abstract => "a",
            NodeKind::Keyword => "k",
        };
        write!(f, "{p}:{}", self.key)
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("a", key)) if !key.is_empty() => Ok(NodeId::abstract_node(key)),
            Some(("k", key)) if !key.is_empty() => Ok(NodeId::keyword(key)),
            _ => Err(format!("bad node id {s:?}; expected a:<doc_id> or k:<keyword_id>")),
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeClass {
    AA,
    KK,
    AK,
}

impl EdgeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeClass::AA => "AA",
            EdgeClass::KK => "KK",
            EdgeClass::AK => "AK",
        }
    }

    /// Whether `(a, b)` have the node kinds this class connects.
    pub fn admits(&self, a: NodeKind, b: NodeKind) -> bool {
        use NodeKind::*;
        matches!(
            (self, a, b),
            (EdgeClass::AA, Abstract, Abstract)
                | (EdgeClass::KK, Keyword, Keyword)
                | (EdgeClass::AK, Abstract, Keyword)
                | (EdgeClass::AK, Keyword, Abstract)
        )
    }
}

impl FromStr for EdgeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "AA" => Ok(EdgeClass::AA),
            "KK" => Ok(EdgeClass::KK),
            "AK" => Ok(EdgeClass::AK),
            _ => Err(format!("bad edge class {s:?}")),
        }
    }
}

/// Undirected weighted edge stored with `u < v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub weight: f64,
    pub class: EdgeClass,
}

impl Edge {
    pub fn new(a: NodeId, b: NodeId, weight: f64, class: EdgeClass) -> Self {
        let (u, v) = if a <= b { (a, b) } else { (b, a) };
        Edge { u, v, weight, class }
    }
}
