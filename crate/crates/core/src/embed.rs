//! Skip-gram embeddings with negative sampling, and per-document centroids.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use num_traits::Float;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::NormalizedDocument;
use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingParams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Starting rate; decays linearly to near zero over training.
    pub learning_rate: f64,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            dim: 50,
            window: 8,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 0,
            seed: 1,
        }
    }
}

impl EmbeddingParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.into()));
        if self.dim < 2 {
            return bad("embedding dim must be >= 2");
        }
        if self.window < 1 {
            return bad("embedding window must be >= 1");
        }
        if self.negatives < 1 {
            return bad("negatives must be >= 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    vectors: Vec<f32>,
    pub seed: u64,
}

impl EmbeddingTable {
    /// Builds a table from explicit vectors. Tokens are stored sorted.
    pub fn from_vectors(entries: impl IntoIterator<Item = (String, Vec<f32>)>, seed: u64) -> Result<Self> {
        let sorted: BTreeMap<String, Vec<f32>> = entries.into_iter().collect();
        let dim = sorted.values().next().map(Vec::len).unwrap_or(0);
        if sorted.is_empty() {
            return Err(Error::EmptyVocabulary("no vectors".into()));
        }
        let mut vocab = Vec::with_capacity(sorted.len());
        let mut vectors = Vec::with_capacity(sorted.len() * dim);
        for (tok, v) in sorted {
            if v.len() != dim {
                return Err(Error::InvalidParam(format!("vector for {tok:?} has dim {} != {dim}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParam(format!("non-finite entry in vector for {tok:?}")));
            }
            vocab.push(tok);
            vectors.extend(v);
        }
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(EmbeddingTable { vocab, index, dim, vectors, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Header `dim=<d> vocab=<V> seed=<s>`, then `token v1 .. vd` per line.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = util::create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(w, "dim={} vocab={} seed={}", self.dim, self.vocab.len(), self.seed).map_err(io)?;
        for (i, tok) in self.vocab.iter().enumerate() {
            write!(w, "{tok}").map_err(io)?;
            for x in self.row(i) {
                write!(w, " {x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        util::finish(path, w)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut lines = util::open_lines(path)?;
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
        let header = header?;
        let mut fields = HashMap::new();
        for part in header.split_whitespace() {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::parse(path, 1, "bad header"))?;
            fields.insert(k, v);
        }
        let num = |k: &str| -> Result<u64> {
            fields
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(path, 1, format!("header missing {k}")))
        };
        let (dim, n, seed) = (num("dim")? as usize, num("vocab")? as usize, num("seed")?);
        let mut entries = Vec::with_capacity(n);
        for (lineno, line) in lines {
            let line = line?;
            let mut parts = line.split(' ');
            let tok = parts.next().unwrap_or("").to_string();
            let v: Vec<f32> = parts
                .map(|x| x.parse::<f32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, lineno, "bad vector entry"))?;
            if tok.is_empty() || v.len() != dim {
                return Err(Error::parse(path, lineno, "malformed vector line"));
            }
            entries.push((tok, v));
        }
        if entries.len() != n {
            return Err(Error::parse(path, 1, format!("header says {n} tokens, found {}", entries.len())));
        }
        EmbeddingTable::from_vectors(entries, seed)
    }
}

fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `-log s(u_o . v_c) - sum_k log s(-u_k . v_c)` for one (center, context)
/// pair with its negative samples.
pub fn ns_loss<F: Float>(center: &[F], context: &[F], negatives: &[&[F]]) -> F {
    let eps = F::from(1e-30).unwrap();
    let mut loss = -(sigmoid(dot(context, center)).max(eps)).ln();
    for neg in negatives {
        loss = loss - (sigmoid(-dot(neg, center)).max(eps)).ln();
    }
    loss
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsGradient<F> {
    pub center: Vec<F>,
    pub context: Vec<F>,
    pub negatives: Vec<Vec<F>>,
}

/// Analytic gradient of [`ns_loss`] with respect to every vector involved.
pub fn ns_gradient<F: Float>(center: &[F], context: &[F], negatives: &[&[F]]) -> NsGradient<F> {
    let g_pos = sigmoid(dot(context, center)) - F::one();
    let mut g_center: Vec<F> = context.iter().map(|&u| g_pos * u).collect();
    let g_context = center.iter().map(|&v| g_pos * v).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let g = sigmoid(dot(neg, center));
        for (gc, &u) in g_center.iter_mut().zip(neg.iter()) {
            *gc = *gc + g * u;
        }
        g_negs.push(center.iter().map(|&v| g * v).collect());
    }
    NsGradient {
        center: g_center,
        context: g_context,
        negatives: g_negs,
    }
}

pub fn train_skipgram(docs: &[NormalizedDocument], params: &EmbeddingParams) -> Result<EmbeddingTable> {
    train_skipgram_with_loss(docs, params).map(|(t, _)| t)
}

/// Trains and also returns the mean per-pair loss of each epoch, measured
/// before each update.
///
/// Single-threaded and deterministic for a given seed.
pub fn train_skipgram_with_loss(
    docs: &[NormalizedDocument],
    params: &EmbeddingParams,
) -> Result<(EmbeddingTable, Vec<f64>)> {
    params.validate()?;
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for d in docs {
        for t in &d.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    counts.retain(|_, c| *c >= params.min_count);
    if counts.is_empty() {
        return Err(Error::EmptyVocabulary("no token meets min_count".into()));
    }
    let vocab: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    let index: HashMap<&str, usize> = counts.keys().enumerate().map(|(i, &t)| (t, i)).collect();
    let sentences: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.tokens.iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .collect();

    let dim = params.dim;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let half = 0.5 / dim as f32;
    let mut input: Vec<f32> = (0..v * dim).map(|_| rng.random_range(-half..half)).collect();
    let mut output = vec![0f32; v * dim];
    let noise = WeightedIndex::new(counts.values().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::EmptyVocabulary(e.to_string()))?;

    let total_steps = (params.epochs * sentences.iter().map(Vec::len).sum::<usize>()).max(1);
    let mut step = 0usize;
    let mut epoch_loss = Vec::with_capacity(params.epochs);
    let mut negs = Vec::with_capacity(params.negatives);

    for _ in 0..params.epochs {
        let (mut loss_sum, mut pairs) = (0f64, 0u64);
        for sent in &sentences {
            for (pos, &center) in sent.iter().enumerate() {
                let lr = (params.learning_rate * (1.0 - step as f64 / total_steps as f64)).max(params.learning_rate * 1e-4) as f32;
                step += 1;
                let lo = pos.saturating_sub(params.window);
                let hi = (pos + params.window + 1).min(sent.len());
                for cpos in lo..hi {
                    if cpos == pos {
                        continue;
                    }
                    let context = sent[cpos];
                    negs.clear();
                    while negs.len() < params.negatives {
                        let n = noise.sample(&mut rng);
                        if n != context || v == 1 {
                            negs.push(n);
                        }
                    }
                    let c_vec = input[center * dim..(center + 1) * dim].to_vec();
                    let o_vec = output[context * dim..(context + 1) * dim].to_vec();
                    let n_vecs: Vec<Vec<f32>> = negs.iter().map(|&n| output[n * dim..(n + 1) * dim].to_vec()).collect();
                    let n_refs: Vec<&[f32]> = n_vecs.iter().map(Vec::as_slice).collect();
                    loss_sum += ns_loss(&c_vec, &o_vec, &n_refs) as f64;
                    pairs += 1;
                    let g = ns_gradient(&c_vec, &o_vec, &n_refs);
                    axpy(&mut output[context * dim..(context + 1) * dim], -lr, &g.context);
                    for (&n, gn) in negs.iter().zip(&g.negatives) {
                        axpy(&mut output[n * dim..(n + 1) * dim], -lr, gn);
                    }
                    axpy(&mut input[center * dim..(center + 1) * dim], -lr, &g.center);
                }
            }
        }
        epoch_loss.push(if pairs > 0 { loss_sum / pairs as f64 } else { 0.0 });
    }

    if input.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParam("training diverged (non-finite vectors); lower learning_rate".into()));
    }
    let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    let table = EmbeddingTable {
        vocab,
        index,
        dim,
        vectors: input,
        seed: params.seed,
    };
    Ok((table, epoch_loss))
}

fn axpy(y: &mut [f32], a: f32, x: &[f32]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub doc_id: String,
    pub vector: Vec<f32>,
    /// Number of in-vocabulary tokens averaged.
    pub tokens: usize,
    /// Set when the document had no in-vocabulary tokens; `vector` is zero.
    pub degenerate: bool,
}

/// Mean of the document's in-vocabulary token vectors, with multiplicity.
pub fn centroid(doc: &NormalizedDocument, table: &EmbeddingTable) -> Centroid {
    let mut sum = vec![0f64; table.dim];
    let mut k = 0usize;
    for v in doc.tokens.iter().filter_map(|t| table.get(t)) {
        for (s, &x) in sum.iter_mut().zip(v) {
            *s += x as f64;
        }
        k += 1;
    }
    let vector = if k == 0 {
        vec![0f32; table.dim]
    } else {
        sum.iter().map(|s| (s / k as f64) as f32).collect()
    };
    Centroid {
        doc_id: doc.doc_id.clone(),
        vector,
        tokens: k,
        degenerate: k == 0,
    }
}

pub fn centroids(docs: &[NormalizedDocument], table: &EmbeddingTable) -> Vec<Centroid> {
    docs.par_iter().map(|d| centroid(d, table)).collect()
}

/// The `n` most cosine-similar tokens to `token`, excluding itself.
pub fn nearest_tokens(table: &EmbeddingTable, token: &str, n: usize) -> Result<Vec<(String, f64)>> {
    let &qi = table
        .index
        .get(token)
        .ok_or_else(|| Error::UnknownToken(token.to_string()))?;
    let norm = |v: &[f32]| v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    let q = table.row(qi);
    let qn = norm(q);
    let mut scored: Vec<(usize, f64)> = (0..table.len())
        .filter(|&i| i != qi)
        .map(|i| {
            let r = table.row(i);
            let denom = qn * norm(r);
            let d: f64 = q.iter().zip(r).map(|(&a, &b)| a as f64 * b as f64).sum();
            (i, if denom > 0.0 { d / denom } else { 0.0 })
        })
        .collect();
    // vocab is sorted, so the index is the lexicographic tie-break
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .take(n)
        .map(|(i, s)| (table.vocab[i].clone(), s))
        .collect())
}
