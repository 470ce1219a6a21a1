//! LDA topic models over abstract clouds, fitted by collapsed Gibbs
//! sampling, and substring term-distribution reports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::NormalizedDocument;
use crate::error::{Error, Result};
use crate::util;

/// Top words per topic inspected by [`term_distribution`].
pub const REPORT_TOP_N: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaParams {
    pub num_topics: usize,
    pub iterations: usize,
    /// Document-topic prior; `None` means `50 / num_topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub seed: u64,
}

impl Default for LdaParams {
    fn default() -> Self {
        LdaParams {
            num_topics: 20,
            iterations: 100,
            alpha: None,
            beta: 0.01,
            seed: 1,
        }
    }
}

impl LdaParams {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.num_topics as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.num_topics < 2 {
            return bad(format!("num_topics must be >= 2, got {}", self.num_topics));
        }
        if self.iterations < 1 {
            return bad("iterations must be >= 1".into());
        }
        if !(self.alpha() > 0.0) || !(self.beta > 0.0) {
            return bad("alpha and beta must be > 0".into());
        }
        Ok(())
    }
}

/// Collapsed Gibbs sampler state.
///
/// Documents are visited in a canonical order (by id, then tokens), so the
/// fitted model does not depend on the order documents are supplied in.
pub struct LdaSampler {
    topics: usize,
    alpha: f64,
    beta: f64,
    params: LdaParams,
    vocab: Vec<String>,
    doc_ids: Vec<String>,
    /// Word ids per document, input order.
    words: Vec<Vec<usize>>,
    /// Topic per token, input order.
    assign: Vec<Vec<usize>>,
    /// Canonical visiting order over input positions.
    order: Vec<usize>,
    word_topic: Vec<u32>,
    doc_topic: Vec<u32>,
    topic_total: Vec<u32>,
    rng: ChaCha8Rng,
}

impl LdaSampler {
    /// Random initial assignments drawn from the seed.
    pub fn new(docs: &[NormalizedDocument], params: &LdaParams) -> Result<Self> {
        Self::build(docs, params, None)
    }

    /// Starts from given assignments (per document, per token, input order).
    pub fn with_assignments(docs: &[NormalizedDocument], params: &LdaParams, assign: Vec<Vec<usize>>) -> Result<Self> {
        Self::build(docs, params, Some(assign))
    }

    fn build(docs: &[NormalizedDocument], params: &LdaParams, given: Option<Vec<Vec<usize>>>) -> Result<Self> {
        params.validate()?;
        if docs.is_empty() {
            return Err(Error::EmptyVocabulary("no documents to model".into()));
        }
        let vocab: Vec<String> = docs
            .iter()
            .flat_map(|d| d.tokens.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary("every document is empty".into()));
        }
        let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let words: Vec<Vec<usize>> = docs
            .iter()
            .map(|d| d.tokens.iter().map(|t| index[t.as_str()]).collect())
            .collect();
        let mut order: Vec<usize> = (0..docs.len()).collect();
        order.sort_by(|&a, &b| (&docs[a].doc_id, &docs[a].tokens).cmp(&(&docs[b].doc_id, &docs[b].tokens)));

        let t = params.num_topics;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let assign = match given {
            Some(a) => {
                let shape_ok = a.len() == docs.len()
                    && a.iter().zip(&words).all(|(z, w)| z.len() == w.len() && z.iter().all(|&k| k < t));
                if !shape_ok {
                    return Err(Error::InvalidParam("assignments do not match documents or topic count".into()));
                }
                a
            }
            None => {
                let mut a: Vec<Vec<usize>> = words.iter().map(|w| vec![0; w.len()]).collect();
                for &d in &order {
                    for z in a[d].iter_mut() {
                        *z = rng.random_range(0..t);
                    }
                }
                a
            }
        };
        let mut s = LdaSampler {
            topics: t,
            alpha: params.alpha(),
            beta: params.beta,
            params: *params,
            vocab,
            doc_ids: docs.iter().map(|d| d.doc_id.clone()).collect(),
            word_topic: Vec::new(),
            doc_topic: Vec::new(),
            topic_total: Vec::new(),
            words,
            assign,
            order,
            rng,
        };
        (s.word_topic, s.doc_topic, s.topic_total) = s.tally();
        Ok(s)
    }

    fn tally(&self) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
        let t = self.topics;
        let mut wt = vec![0u32; self.vocab.len() * t];
        let mut dt = vec![0u32; self.words.len() * t];
        let mut tt = vec![0u32; t];
        for (d, (ws, zs)) in self.words.iter().zip(&self.assign).enumerate() {
            for (&w, &z) in ws.iter().zip(zs) {
                wt[w * t + z] += 1;
                dt[d * t + z] += 1;
                tt[z] += 1;
            }
        }
        (wt, dt, tt)
    }

    /// Unnormalized full conditional for every topic, with the token itself
    /// removed from the counts:
    /// `(n_wt + beta) (n_dt + alpha) / (n_t + V beta)`.
    fn weights(&self, d: usize, w: usize, current: usize, out: &mut [f64]) {
        let t = self.topics;
        let vb = self.vocab.len() as f64 * self.beta;
        for (k, slot) in out.iter_mut().enumerate() {
            let own = (k == current) as u32;
            let nwt = (self.word_topic[w * t + k] - own) as f64;
            let ndt = (self.doc_topic[d * t + k] - own) as f64;
            let nt = (self.topic_total[k] - own) as f64;
            *slot = (nwt + self.beta) * (ndt + self.alpha) / (nt + vb);
        }
    }

    /// Normalized conditional distribution for token `pos` of document `doc`
    /// (input order).
    pub fn conditional(&self, doc: usize, pos: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.topics];
        self.weights(doc, self.words[doc][pos], self.assign[doc][pos], &mut p);
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    /// One full pass resampling every token.
    pub fn sweep(&mut self) {
        let t = self.topics;
        let mut p = vec![0.0; t];
        for oi in 0..self.order.len() {
            let d = self.order[oi];
            for pos in 0..self.words[d].len() {
                let w = self.words[d][pos];
                let old = self.assign[d][pos];
                self.weights(d, w, old, &mut p);
                let total: f64 = p.iter().sum();
                let mut u = self.rng.random::<f64>() * total;
                let mut new = t - 1;
                for (k, &pk) in p.iter().enumerate() {
                    if u < pk {
                        new = k;
                        break;
                    }
                    u -= pk;
                }
                if new != old {
                    self.word_topic[w * t + old] -= 1;
                    self.doc_topic[d * t + old] -= 1;
                    self.topic_total[old] -= 1;
                    self.word_topic[w * t + new] += 1;
                    self.doc_topic[d * t + new] += 1;
                    self.topic_total[new] += 1;
                    self.assign[d][pos] = new;
                }
            }
        }
    }

    /// Whether the incremental counts equal a fresh tally of the assignments
    /// and sum to the token totals.
    pub fn counts_consistent(&self) -> bool {
        let (wt, dt, tt) = self.tally();
        let tokens: usize = self.words.iter().map(Vec::len).sum();
        let t = self.topics;
        let per_doc_ok = self
            .words
            .iter()
            .enumerate()
            .all(|(d, w)| self.doc_topic[d * t..(d + 1) * t].iter().sum::<u32>() as usize == w.len());
        wt == self.word_topic
            && dt == self.doc_topic
            && tt == self.topic_total
            && self.topic_total.iter().sum::<u32>() as usize == tokens
            && per_doc_ok
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assign
    }

    pub fn into_model(self) -> TopicModel {
        let t = self.topics;
        let v = self.vocab.len();
        let vb = v as f64 * self.beta;
        let topic_word_counts: Vec<Vec<u32>> = (0..t)
            .map(|k| (0..v).map(|w| self.word_topic[w * t + k]).collect())
            .collect();
        let topic_word = topic_word_counts
            .iter()
            .zip(&self.topic_total)
            .map(|(row, &nt)| row.iter().map(|&c| (c as f64 + self.beta) / (nt as f64 + vb)).collect())
            .collect();
        let doc_topic_counts: Vec<Vec<u32>> = self.doc_topic.chunks(t).map(<[u32]>::to_vec).collect();
        let ta = t as f64 * self.alpha;
        let doc_topic = doc_topic_counts
            .iter()
            .zip(&self.words)
            .map(|(row, w)| row.iter().map(|&c| (c as f64 + self.alpha) / (w.len() as f64 + ta)).collect())
            .collect();
        let mut params = self.params;
        params.alpha = Some(self.alpha);
        TopicModel {
            params,
            vocab: self.vocab,
            doc_ids: self.doc_ids,
            topic_word,
            doc_topic,
            topic_word_counts,
            doc_topic_counts,
            meta: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub params: LdaParams,
    pub vocab: Vec<String>,
    pub doc_ids: Vec<String>,
    /// `T x V`, rows sum to one.
    pub topic_word: Vec<Vec<f64>>,
    /// `D x T`, rows sum to one.
    pub doc_topic: Vec<Vec<f64>>,
    pub topic_word_counts: Vec<Vec<u32>>,
    pub doc_topic_counts: Vec<Vec<u32>>,
    /// Provenance such as config hash and seed.
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl TopicModel {
    pub fn num_topics(&self) -> usize {
        self.topic_word.len()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = util::create(path)?;
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
        util::finish(path, w)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Fits LDA with `params.iterations` full Gibbs sweeps.
pub fn fit_lda(docs: &[NormalizedDocument], params: &LdaParams) -> Result<TopicModel> {
    let mut s = LdaSampler::new(docs, params)?;
    for _ in 0..params.iterations {
        s.sweep();
    }
    Ok(s.into_model())
}

/// The `m` most probable words of `topic`, ties broken lexicographically.
pub fn top_words(model: &TopicModel, topic: usize, m: usize) -> Result<Vec<(String, f64)>> {
    let row = model.topic_word.get(topic).ok_or(Error::TopicOutOfRange {
        index: topic,
        topics: model.num_topics(),
    })?;
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(model.vocab[a].cmp(&model.vocab[b])));
    Ok(idx
        .into_iter()
        .take(m)
        .map(|i| (model.vocab[i].clone(), row[i]))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDistributionReport {
    pub pattern: String,
    /// Vocabulary terms containing the pattern.
    pub matched_terms: Vec<String>,
    /// Per topic: summed probability of the matched terms.
    pub mass: Vec<f64>,
    /// Per topic: matched terms among its top [`REPORT_TOP_N`] words.
    pub top_matches: Vec<usize>,
}

impl TermDistributionReport {
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().fold(0.0, |a, b| a + b)
    }

    /// Largest single-topic share of the matched mass (0 when nothing
    /// matched).
    pub fn peak_share(&self) -> f64 {
        let total = self.total_mass();
        if total > 0.0 {
            self.mass.iter().copied().fold(0.0, f64::max) / total
        } else {
            0.0
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!("# pattern={} matched_terms={}\ntopic\tmass\ttop{}_matches\n", self.pattern, self.matched_terms.len(), REPORT_TOP_N);
        for (t, (m, c)) in self.mass.iter().zip(&self.top_matches).enumerate() {
            let _ = writeln!(s, "{t}\t{m}\t{c}");
        }
        s
    }

    pub fn summary(&self) -> String {
        let (peak_topic, peak) = self
            .mass
            .iter()
            .enumerate()
            .fold((0, 0.0), |best, (t, &m)| if m > best.1 { (t, m) } else { best });
        format!(
            "pattern {:?}: {} matching terms, total mass {:.6}, peak topic {} holds {:.1}%\nterms: {}",
            self.pattern,
            self.matched_terms.len(),
            self.total_mass(),
            peak_topic,
            100.0 * if self.total_mass() > 0.0 { peak / self.total_mass() } else { 0.0 },
            self.matched_terms.join(", ")
        )
    }
}

/// Per-topic probability mass of every vocabulary term containing `pattern`.
pub fn term_distribution(model: &TopicModel, pattern: &str) -> Result<TermDistributionReport> {
    if pattern.is_empty() {
        return Err(Error::InvalidParam("pattern must be non-empty".into()));
    }
    let matched: Vec<usize> = (0..model.vocab.len())
        .filter(|&i| model.vocab[i].contains(pattern))
        .collect();
    let mass = model
        .topic_word
        .iter()
        .map(|row| matched.iter().fold(0.0, |acc, &i| acc + row[i]))
        .collect();
    let top_matches = (0..model.num_topics())
        .map(|t| {
            top_words(model, t, REPORT_TOP_N)
                .expect("topic in range")
                .iter()
                .filter(|(w, _)| w.contains(pattern))
                .count()
        })
        .collect();
    Ok(TermDistributionReport {
        pattern: pattern.to_string(),
        matched_terms: matched.iter().map(|&i| model.vocab[i].clone()).collect(),
        mass,
        top_matches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub topic: usize,
    pub mass_a: f64,
    pub mass_b: f64,
    pub top_matches_a: usize,
    pub top_matches_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryComparison {
    pub pattern: String,
    pub rows: Vec<ComparisonRow>,
    pub total_a: f64,
    pub total_b: f64,
}

impl QueryComparison {
    /// `total_a - total_b`.
    pub fn difference(&self) -> f64 {
        self.total_a - self.total_b
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!(
            "# pattern={} total_a={} total_b={} difference={}\ntopic\tmass_a\tmass_b\ttop_matches_a\ttop_matches_b\n",
            self.pattern,
            self.total_a,
            self.total_b,
            self.difference()
        );
        for r in &self.rows {
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", r.topic, r.mass_a, r.mass_b, r.top_matches_a, r.top_matches_b);
        }
        s
    }
}

/// Lines two reports up topic by topic; the shorter one is padded with zeros.
pub fn compare_queries(a: &TermDistributionReport, b: &TermDistributionReport) -> Result<QueryComparison> {
    if a.pattern != b.pattern {
        return Err(Error::PatternMismatch(a.pattern.clone(), b.pattern.clone()));
    }
    let n = a.mass.len().max(b.mass.len());
    let rows = (0..n)
        .map(|t| ComparisonRow {
            topic: t,
            mass_a: a.mass.get(t).copied().unwrap_or(0.0),
            mass_b: b.mass.get(t).copied().unwrap_or(0.0),
            top_matches_a: a.top_matches.get(t).copied().unwrap_or(0),
            top_matches_b: b.top_matches.get(t).copied().unwrap_or(0),
        })
        .collect();
    Ok(QueryComparison {
        pattern: a.pattern.clone(),
        rows,
        total_a: a.total_mass(),
        total_b: b.total_mass(),
    })
}

#[cfg(test)]
mod tests;
