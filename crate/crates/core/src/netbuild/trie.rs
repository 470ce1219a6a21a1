use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;

use super::keywords::KeywordCatalog;
use crate::corpus::{tokenize, Document};

/// doc_id → keyword id → occurrences.
pub type CountMatrix = BTreeMap<String, BTreeMap<String, u64>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrieNode {
    pub token: String,
    /// Keyword ids whose synonym ends at this node.
    pub ids: BTreeSet<String>,
    pub children: BTreeMap<String, usize>,
    fail: usize,
    output: Option<usize>,
}

impl TrieNode {
    fn new(token: &str) -> Self {
        TrieNode {
            token: token.to_string(),
            ids: BTreeSet::new(),
            children: BTreeMap::new(),
            fail: 0,
            output: None,
        }
    }
}

/// Token-level parse tree over synonym strings.
///
/// The root holds the empty string; the path from the root spells a
/// synonym's tokens and its keyword id is stored at the last node. Failure
/// and output links over the same tree let [`TagMode::Complete`] report every
/// synonym occurrence at every text position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymTrie {
    nodes: Vec<TrieNode>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrieReport {
    /// `(keyword id, synonym)` pairs that normalized to nothing.
    pub skipped: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagMode {
    /// Every occurrence of every synonym, overlapping and nested ones
    /// included.
    #[default]
    Complete,
    /// Walk the tree; on a mismatch go back to the root and retry the
    /// current token once. Misses synonyms that start inside a partial
    /// match.
    RootRetry,
}

impl Default for SynonymTrie {
    fn default() -> Self {
        SynonymTrie {
            nodes: vec![TrieNode::new("")],
        }
    }
}

impl SynonymTrie {
    pub const ROOT: usize = 0;

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn node(&self, i: usize) -> &TrieNode {
        &self.nodes[i]
    }

    pub fn child(&self, i: usize, token: &str) -> Option<usize> {
        self.nodes[i].children.get(token).copied()
    }

    /// Follows `tokens` from the root.
    pub fn find(&self, tokens: &[&str]) -> Option<usize> {
        tokens
            .iter()
            .try_fold(Self::ROOT, |cur, t| self.child(cur, t))
    }

    fn insert(&mut self, tokens: &[String], id: &str) {
        let mut cur = Self::ROOT;
        for t in tokens {
            cur = match self.nodes[cur].children.get(t).copied() {
                Some(c) => c,
                None => {
                    let c = self.nodes.len();
                    self.nodes.push(TrieNode::new(t));
                    self.nodes[cur].children.insert(t.clone(), c);
                    c
                }
            };
        }
        self.nodes[cur].ids.insert(id.to_string());
    }

    fn link(&mut self) {
        let mut queue: VecDeque<usize> = VecDeque::new();
        let first: Vec<usize> = self.nodes[Self::ROOT].children.values().copied().collect();
        for c in first {
            self.nodes[c].fail = Self::ROOT;
            self.nodes[c].output = None;
            queue.push_back(c);
        }
        while let Some(s) = queue.pop_front() {
            let children: Vec<(String, usize)> =
                self.nodes[s].children.iter().map(|(t, &c)| (t.clone(), c)).collect();
            for (tok, c) in children {
                let mut f = self.nodes[s].fail;
                let fail = loop {
                    if let Some(n) = self.child(f, &tok) {
                        break n;
                    }
                    if f == Self::ROOT {
                        break Self::ROOT;
                    }
                    f = self.nodes[f].fail;
                };
                self.nodes[c].fail = fail;
                self.nodes[c].output = if self.nodes[fail].ids.is_empty() {
                    self.nodes[fail].output
                } else {
                    Some(fail)
                };
                queue.push_back(c);
            }
        }
    }

    fn record(&self, node: usize, counts: &mut BTreeMap<String, u64>) {
        for id in &self.nodes[node].ids {
            *counts.entry(id.clone()).or_default() += 1;
        }
    }

    /// Keyword occurrence counts in a token stream.
    pub fn count<S: AsRef<str>>(&self, tokens: &[S], mode: TagMode) -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        let mut state = Self::ROOT;
        for tok in tokens {
            let tok = tok.as_ref();
            match mode {
                TagMode::Complete => {
                    while state != Self::ROOT && self.child(state, tok).is_none() {
                        state = self.nodes[state].fail;
                    }
                    state = self.child(state, tok).unwrap_or(Self::ROOT);
                    let mut hit = Some(state);
                    while let Some(n) = hit {
                        self.record(n, &mut counts);
                        hit = self.nodes[n].output;
                    }
                }
                TagMode::RootRetry => {
                    state = match self.child(state, tok) {
                        Some(c) => c,
                        None => self.child(Self::ROOT, tok).unwrap_or(Self::ROOT),
                    };
                    self.record(state, &mut counts);
                }
            }
        }
        counts
    }
}

/// Builds the tree from every synonym, normalized with the corpus tokenizer
/// but without stopword removal.
pub fn build_synonym_trie(catalog: &KeywordCatalog) -> (SynonymTrie, TrieReport) {
    let mut trie = SynonymTrie::default();
    let mut report = TrieReport::default();
    for (id, syns) in &catalog.synonyms {
        for syn in syns {
            let tokens = tokenize(syn);
            if tokens.is_empty() {
                report.skipped.push((id.clone(), syn.clone()));
            } else {
                trie.insert(&tokens, id);
            }
        }
    }
    trie.link();
    (trie, report)
}

/// Counts keyword occurrences in each document's title and abstract, with
/// stopwords kept. Documents without matches are omitted.
pub fn tag_abstracts(docs: &[Document], trie: &SynonymTrie) -> CountMatrix {
    docs.par_iter()
        .map(|d| (d.doc_id.clone(), trie.count(&tokenize(&d.full_text()), TagMode::Complete)))
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|(_, c)| !c.is_empty())
        .collect()
}
