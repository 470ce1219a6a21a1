//! Frequent phrase mining by bottom-up significance merging.
//!
//! Documents start as sequences of single-token units. Each round counts
//! adjacent unit pairs, picks the most significant pair that clears both the
//! frequency and significance thresholds, and merges every non-overlapping
//! occurrence into one unit. Merged units become lexicon phrases.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::NormalizedDocument;
use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhraseParams {
    pub min_freq: u64,
    pub max_len: usize,
    pub min_significance: f64,
}

impl Default for PhraseParams {
    fn default() -> Self {
        PhraseParams {
            min_freq: 5,
            max_len: 4,
            min_significance: 3.0,
        }
    }
}

impl PhraseParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_freq < 1 {
            return Err(Error::InvalidParam("phrase min_freq must be >= 1".into()));
        }
        if self.max_len < 2 {
            return Err(Error::InvalidParam("phrase max_len must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseEntry {
    pub merged: String,
    pub frequency: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhraseLexicon {
    phrases: BTreeMap<Vec<String>, PhraseEntry>,
    longest: usize,
}

impl PhraseLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a phrase; the merged token is the underscore-join of `components`.
    pub fn insert(&mut self, components: Vec<String>, frequency: u64) {
        self.longest = self.longest.max(components.len());
        let merged = components.join("_");
        self.phrases
            .insert(components, PhraseEntry { merged, frequency });
    }

    pub fn get(&self, components: &[String]) -> Option<&PhraseEntry> {
        self.phrases.get(components)
    }

    pub fn contains_merged(&self, merged: &str) -> bool {
        self.phrases.values().any(|e| e.merged == merged)
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[String], &PhraseEntry)> {
        self.phrases.iter().map(|(k, v)| (k.as_slice(), v))
    }

    /// TSV: space-joined phrase, merged token, frequency. Lines starting with
    /// `#` are comments.
    pub fn write_tsv(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let mut w = util::create(path)?;
        let io = |e| Error::io(path, e);
        if let Some(c) = comment {
            writeln!(w, "# {c}").map_err(io)?;
        }
        for (components, entry) in &self.phrases {
            writeln!(w, "{}\t{}\t{}", components.join(" "), entry.merged, entry.frequency).map_err(io)?;
        }
        util::finish(path, w)
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let mut lex = PhraseLexicon::new();
        for (lineno, line) in util::open_lines(path)? {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(path, lineno, "expected 3 tab-separated columns"));
            }
            let components: Vec<String> = cols[0].split(' ').map(str::to_string).collect();
            if components.len() < 2 || components.join("_") != cols[1] {
                return Err(Error::parse(path, lineno, "merged token does not match phrase"));
            }
            let freq = cols[2]
                .parse()
                .map_err(|_| Error::parse(path, lineno, "bad frequency"))?;
            lex.insert(components, freq);
        }
        Ok(lex)
    }
}

pub type NgramCounts = BTreeMap<Vec<String>, u64>;

/// Counts every contiguous n-gram with `1 <= n <= max_len`, per document.
pub fn count_ngrams(docs: &[NormalizedDocument], max_len: usize) -> NgramCounts {
    let merged = docs
        .par_iter()
        .fold(HashMap::<&[String], u64>::new, |mut acc, doc| {
            let toks = &doc.tokens;
            for start in 0..toks.len() {
                for n in 1..=max_len.min(toks.len() - start) {
                    *acc.entry(&toks[start..start + n]).or_default() += 1;
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    merged.into_iter().map(|(k, v)| (k.to_vec(), v)).collect()
}

/// t-style adjacency significance `(n_ab - n_a n_b / N) / sqrt(n_ab)`, zero
/// when the pair never occurs.
pub fn significance(count_ab: u64, count_a: u64, count_b: u64, total_positions: u64) -> f64 {
    if count_ab == 0 || total_positions == 0 {
        return 0.0;
    }
    let expected = count_a as f64 * count_b as f64 / total_positions as f64;
    (count_ab as f64 - expected) / (count_ab as f64).sqrt()
}

struct Units {
    components: Vec<Vec<String>>,
    by_components: HashMap<Vec<String>, u32>,
}

impl Units {
    fn intern(&mut self, components: Vec<String>) -> u32 {
        if let Some(&id) = self.by_components.get(&components) {
            return id;
        }
        let id = self.components.len() as u32;
        self.components.push(components.clone());
        self.by_components.insert(components, id);
        id
    }

    fn merged(&self, id: u32) -> String {
        self.components[id as usize].join("_")
    }
}

pub fn mine_phrases(docs: &[NormalizedDocument], params: &PhraseParams) -> Result<PhraseLexicon> {
    params.validate()?;
    let mut units = Units {
        components: Vec::new(),
        by_components: HashMap::new(),
    };
    let mut seqs: Vec<Vec<u32>> = docs
        .iter()
        .map(|d| d.tokens.iter().map(|t| units.intern(vec![t.clone()])).collect())
        .collect();
    let mut mined: Vec<Vec<String>> = Vec::new();

    loop {
        let mut unit_freq: HashMap<u32, u64> = HashMap::new();
        let mut pair_freq: HashMap<(u32, u32), u64> = HashMap::new();
        let mut total = 0u64;
        for seq in &seqs {
            total += seq.len() as u64;
            for &u in seq {
                *unit_freq.entry(u).or_default() += 1;
            }
            for w in seq.windows(2) {
                let len = units.components[w[0] as usize].len() + units.components[w[1] as usize].len();
                if len <= params.max_len {
                    *pair_freq.entry((w[0], w[1])).or_default() += 1;
                }
            }
        }

        let mut best: Option<(f64, String, usize, (u32, u32))> = None;
        for (&(a, b), &n_ab) in &pair_freq {
            if n_ab < params.min_freq {
                continue;
            }
            let sig = significance(n_ab, unit_freq[&a], unit_freq[&b], total);
            if sig < params.min_significance {
                continue;
            }
            let merged = format!("{}_{}", units.merged(a), units.merged(b));
            let left_len = units.components[a as usize].len();
            let better = match &best {
                None => true,
                Some((s, m, l, _)) => {
                    sig > *s || (sig == *s && (merged.as_str(), left_len) < (m.as_str(), *l))
                }
            };
            if better {
                best = Some((sig, merged, left_len, (a, b)));
            }
        }
        let Some((_, _, _, (a, b))) = best else {
            break;
        };

        let mut components = units.components[a as usize].clone();
        components.extend(units.components[b as usize].iter().cloned());
        let merged_id = units.intern(components.clone());
        mined.push(components);

        for seq in &mut seqs {
            let mut out = Vec::with_capacity(seq.len());
            let mut i = 0;
            while i < seq.len() {
                if i + 1 < seq.len() && seq[i] == a && seq[i + 1] == b {
                    out.push(merged_id);
                    i += 2;
                } else {
                    out.push(seq[i]);
                    i += 1;
                }
            }
            *seq = out;
        }
    }

    // Frequencies are recounted on the original token streams so every entry
    // can be checked against the corpus it came from.
    let mut freq: HashMap<&[String], u64> = mined.iter().map(|c| (c.as_slice(), 0)).collect();
    let longest = mined.iter().map(Vec::len).max().unwrap_or(0);
    for doc in docs {
        for start in 0..doc.tokens.len() {
            for n in 2..=longest.min(doc.tokens.len() - start) {
                if let Some(c) = freq.get_mut(&doc.tokens[start..start + n]) {
                    *c += 1;
                }
            }
        }
    }
    let mut lex = PhraseLexicon::new();
    for components in &mined {
        let f = freq[components.as_slice()];
        lex.insert(components.clone(), f);
    }
    Ok(lex)
}

/// Greedy longest-match, left to right, non-overlapping phrase replacement.
pub fn apply_lexicon(doc: &NormalizedDocument, lex: &PhraseLexicon) -> NormalizedDocument {
    let toks = &doc.tokens;
    let mut out = Vec::with_capacity(toks.len());
    let mut i = 0;
    'outer: while i < toks.len() {
        let max_n = lex.longest.min(toks.len() - i);
        for n in (2..=max_n).rev() {
            if let Some(entry) = lex.get(&toks[i..i + n]) {
                out.push(entry.merged.clone());
                i += n;
                continue 'outer;
            }
        }
        out.push(toks[i].clone());
        i += 1;
    }
    NormalizedDocument {
        doc_id: doc.doc_id.clone(),
        tokens: out,
    }
}

pub fn apply_lexicon_all(docs: &[NormalizedDocument], lex: &PhraseLexicon) -> Vec<NormalizedDocument> {
    docs.par_iter().map(|d| apply_lexicon(d, lex)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(tokens: &[&str]) -> NormalizedDocument {
        NormalizedDocument {
            doc_id: "d".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn key(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_string).collect()
    }

    fn lex_of(phrases: &[&str]) -> PhraseLexicon {
        let mut lex = PhraseLexicon::new();
        for p in phrases {
            lex.insert(key(p), 1);
        }
        lex
    }

    #[test]
    fn ngram_counts_by_hand() {
        let counts = count_ngrams(&[doc(&["a", "b", "a", "b"])], 2);
        let expected: NgramCounts = [("a", 2), ("b", 2), ("a b", 2), ("b a", 1)]
            .into_iter()
            .map(|(k, v)| (key(k), v))
            .collect();
        assert_eq!(counts, expected);
        assert!(count_ngrams(&[], 3).is_empty());
        assert_eq!(count_ngrams(&[doc(&["x"])], 2), [(key("x"), 1)].into_iter().collect());
    }

    #[test]
    fn ngrams_do_not_cross_documents() {
        let counts = count_ngrams(&[doc(&["a"]), doc(&["b"])], 2);
        assert!(!counts.contains_key(&key("a b")));
    }

    #[test]
    fn significance_examples() {
        assert_eq!(significance(0, 10, 10, 100), 0.0);
        let n = 7;
        assert_eq!(significance(n, n, n, n), 0.0);
        assert!((significance(25, 50, 50, 10_000) - 4.95).abs() < 1e-12);
    }

    fn noise(i: usize) -> String {
        format!("w{i}")
    }

    #[test]
    fn mines_stem_cells() {
        let mut docs = Vec::new();
        for i in 0..20 {
            docs.push(NormalizedDocument {
                doc_id: format!("d{i}"),
                tokens: vec![noise(3 * i), "stem".into(), "cells".into(), noise(3 * i + 1), noise(3 * i + 2)],
            });
        }
        let lex = mine_phrases(&docs, &PhraseParams::default()).unwrap();
        assert!(lex.contains_merged("stem_cells"));
        assert_eq!(lex.get(&key("stem cells")).unwrap().frequency, 20);
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn distinct_tokens_yield_empty_lexicon() {
        let docs: Vec<_> = (0..10)
            .map(|i| NormalizedDocument {
                doc_id: format!("d{i}"),
                tokens: (0..8).map(|j| noise(i * 8 + j)).collect(),
            })
            .collect();
        assert!(mine_phrases(&docs, &PhraseParams::default()).unwrap().is_empty());
    }

    #[test]
    fn nested_phrase_merge_order() {
        // "asthma attack" is common on its own, so it merges first; the
        // trigram then forms from (acute, asthma_attack).
        let mut docs = Vec::new();
        for i in 0..30 {
            let mut t = vec![noise(10 * i), noise(10 * i + 1)];
            if i < 20 {
                t.extend(["acute", "asthma", "attack"].map(String::from));
            } else {
                t.extend(["asthma", "attack"].map(String::from));
            }
            t.push(noise(10 * i + 2));
            docs.push(NormalizedDocument { doc_id: format!("d{i}"), tokens: t });
        }
        let lex = mine_phrases(&docs, &PhraseParams::default()).unwrap();
        assert!(lex.contains_merged("asthma_attack"));
        assert!(lex.contains_merged("acute_asthma_attack"));
        assert_eq!(lex.get(&key("asthma attack")).unwrap().frequency, 30);
        assert_eq!(lex.get(&key("acute asthma attack")).unwrap().frequency, 20);
    }

    #[test]
    fn max_len_caps_phrase_length() {
        let docs: Vec<_> = (0..10)
            .map(|i| NormalizedDocument {
                doc_id: format!("d{i}"),
                tokens: ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).chain([noise(i)]).collect(),
            })
            .collect();
        let params = PhraseParams { min_freq: 5, max_len: 3, min_significance: 0.0 };
        let lex = mine_phrases(&docs, &params).unwrap();
        assert!(!lex.is_empty());
        assert!(lex.iter().all(|(c, _)| c.len() <= 3));
    }

    #[test]
    fn apply_examples() {
        let d = doc(&["asthma", "attack"]);
        assert_eq!(apply_lexicon(&d, &lex_of(&["asthma attack"])).tokens, ["asthma_attack"]);
        assert_eq!(apply_lexicon(&d, &PhraseLexicon::new()).tokens, d.tokens);
        let d = doc(&["a", "b", "c"]);
        assert_eq!(apply_lexicon(&d, &lex_of(&["a b c", "a b"])).tokens, ["a_b_c"]);
        let d = doc(&["a", "b", "a", "b", "c"]);
        assert_eq!(apply_lexicon(&d, &lex_of(&["a b c", "a b"])).tokens, ["a_b", "a_b_c"]);
    }

    #[test]
    fn tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.tsv");
        let mut lex = lex_of(&["stem cells", "p53 gene mutation"]);
        lex.insert(key("x y"), 9);
        lex.write_tsv(&path, Some("config_hash=abc seed=1")).unwrap();
        assert_eq!(PhraseLexicon::read_tsv(&path).unwrap(), lex);
    }

    fn arb_docs() -> impl Strategy<Value = Vec<NormalizedDocument>> {
        let tok = prop::sample::select(vec!["a", "b", "c", "d", "e"]);
        prop::collection::vec(prop::collection::vec(tok, 0..30), 1..12).prop_map(|ds| {
            ds.into_iter()
                .enumerate()
                .map(|(i, t)| NormalizedDocument {
                    doc_id: format!("d{i}"),
                    tokens: t.into_iter().map(String::from).collect(),
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn lexicon_invariants(docs in arb_docs(), min_freq in 1u64..6, sig in -2.0f64..3.0) {
            let params = PhraseParams { min_freq, max_len: 4, min_significance: sig };
            let lex = mine_phrases(&docs, &params).unwrap();
            let counts = count_ngrams(&docs, 4);
            for (components, entry) in lex.iter() {
                prop_assert!(components.len() >= 2 && components.len() <= 4);
                prop_assert_eq!(&entry.merged, &components.join("_"));
                prop_assert!(entry.frequency >= min_freq);
                prop_assert_eq!(counts.get(components).copied(), Some(entry.frequency));
            }
            prop_assert_eq!(&lex, &mine_phrases(&docs, &params).unwrap());

            for d in &docs {
                let merged = apply_lexicon(d, &lex);
                prop_assert!(merged.tokens.len() <= d.tokens.len());
                let split: Vec<String> = merged.tokens.iter()
                    .flat_map(|t| t.split('_').map(String::from).collect::<Vec<_>>())
                    .collect();
                prop_assert_eq!(&split, &d.tokens);
            }
        }
    }
}
