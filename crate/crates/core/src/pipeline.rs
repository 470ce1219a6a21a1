//! Network construction as a sequence of cached stages driven by one
//! config file.
//!
//! Every stage writes its artifact under `<out_dir>/cache` next to a key
//! file. The key hashes the stage's parameters, the keys of the stages it
//! reads from, and the contents of any input files, so an edit anywhere
//! upstream invalidates exactly the stages downstream of it.

use std::collections::BTreeMap;
use std::fs::{File, TryLockError};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, CorpusFormat, Document, LoadMode, NormalizedDocument, Stopwords};
use crate::embed::{self, Centroid, EmbeddingParams, EmbeddingTable};
use crate::error::{Error, Result};
use crate::netbuild::{self, CountMatrix, Edge, EdgeClass, KeywordCatalog, KnnMethod, KnowledgeNetwork, NodeId, RelationWeights};
use crate::phrases::{self, PhraseLexicon, PhraseParams};
use crate::query::{self, QueryParams};
use crate::topics::LdaParams;
use crate::util;

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "MOLIERE_SEED";

pub const NETWORK_FILE: &str = "network.txt";
pub const DOCS_FILE: &str = "docs.jsonl";
pub const STAGES_FILE: &str = "stages.tsv";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    /// Built-in English list when absent.
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    pub synonyms: PathBuf,
    pub relations: PathBuf,
    /// Built-in relation weights when absent.
    #[serde(default)]
    pub relation_weights: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    pub k: usize,
    pub sigma: f64,
    pub knn: KnnMethod,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            k: netbuild::DEFAULT_K,
            sigma: netbuild::DEFAULT_SIGMA,
            knn: KnnMethod::Exact,
        }
    }
}

fn default_seed() -> u64 {
    1
}

/// Flat TOML config:
///
/// ```toml
/// seed = 7
/// cutoff = "2009-12-31"
///
/// [paths]
/// corpus = "abstracts.jsonl"
/// synonyms = "synonyms.tsv"
/// relations = "relations.tsv"
/// out_dir = "out"
///
/// [network]
/// k = 10
/// sigma = 2.0
/// ```
///
/// The global seed overrides the seeds inside `embedding` and `lda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// `YYYY-MM-DD`; documents published later are dropped.
    #[serde(default)]
    pub cutoff: Option<String>,
    #[serde(default)]
    pub keep_undated: bool,
    #[serde(default)]
    pub phrases: PhraseParams,
    #[serde(default)]
    pub embedding: EmbeddingParams,
    #[serde(default)]
    pub network: NetworkParams,
    #[serde(default)]
    pub query: QueryParams,
    #[serde(default)]
    pub lda: LdaParams,
}

impl PipelineConfig {
    pub fn new(paths: PathsConfig) -> Self {
        PipelineConfig {
            paths,
            seed: default_seed(),
            cutoff: None,
            keep_undated: false,
            phrases: PhraseParams::default(),
            embedding: EmbeddingParams::default(),
            network: NetworkParams::default(),
            query: QueryParams::default(),
            lda: LdaParams::default(),
        }
    }

    /// Parses a TOML file. Relative paths are taken relative to the file's
    /// directory, and `MOLIERE_SEED` replaces the seed when set.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for f in [&mut p.corpus, &mut p.synonyms, &mut p.relations, &mut p.out_dir] {
            *f = base.join(&*f);
        }
        for f in [&mut p.stopwords, &mut p.relation_weights].into_iter().flatten() {
            *f = base.join(&*f);
        }
        cfg.apply_seed_env()?;
        Ok(cfg)
    }

    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn cutoff_date(&self) -> Result<Option<NaiveDate>> {
        self.cutoff
            .as_deref()
            .map(|s| {
                NaiveDate::parse_from_str(s, "%Y-%m-%d")
                    .map_err(|_| Error::Config(format!("cutoff {s:?} is not a YYYY-MM-DD date")))
            })
            .transpose()
    }

    /// Embedding parameters with the global seed applied.
    pub fn embedding_params(&self) -> EmbeddingParams {
        EmbeddingParams { seed: self.seed, ..self.embedding }
    }

    /// LDA parameters with the global seed applied.
    pub fn lda_params(&self) -> LdaParams {
        LdaParams { seed: self.seed, ..self.lda }
    }

    pub fn validate(&self) -> Result<()> {
        self.cutoff_date()?;
        self.phrases.validate()?;
        self.embedding_params().validate()?;
        self.lda_params().validate()?;
        if self.network.k < 1 {
            return Err(Error::InvalidParam("k must be >= 1".into()));
        }
        if !(self.network.sigma > 0.0) {
            return Err(Error::InvalidParam("sigma must be > 0".into()));
        }
        let p = &self.paths;
        let inputs = [Some(&p.corpus), p.stopwords.as_ref(), Some(&p.synonyms), Some(&p.relations), p.relation_weights.as_ref()];
        for f in inputs.into_iter().flatten() {
            if !f.is_file() {
                return Err(Error::Config(format!("input file not found: {}", f.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub cached: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub stages: Vec<StageTiming>,
    pub network_path: PathBuf,
    pub docs_path: PathBuf,
    pub config_hash: String,
    pub seed: u64,
}

impl BuildReport {
    pub fn all_cached(&self) -> bool {
        self.stages.iter().all(|s| s.cached)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("stage\tstatus\tseconds\n");
        for t in &self.stages {
            let status = if t.cached { "cached" } else { "built" };
            s.push_str(&format!("{}\t{}\t{:.6}\n", t.stage, status, t.seconds));
        }
        s
    }
}

#[derive(Serialize)]
struct HashedConfig<'a> {
    seed: u64,
    cutoff: &'a Option<String>,
    keep_undated: bool,
    phrases: &'a PhraseParams,
    embedding: EmbeddingParams,
    network: &'a NetworkParams,
    query: &'a QueryParams,
    lda: LdaParams,
    inputs: &'a BTreeMap<&'static str, String>,
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(util::sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

fn input_hashes(cfg: &PipelineConfig) -> Result<BTreeMap<&'static str, String>> {
    let p = &cfg.paths;
    let mut h = BTreeMap::new();
    h.insert("corpus", file_hash(&p.corpus)?);
    h.insert("synonyms", file_hash(&p.synonyms)?);
    h.insert("relations", file_hash(&p.relations)?);
    h.insert("stopwords", p.stopwords.as_deref().map(file_hash).transpose()?.unwrap_or_else(|| "builtin".into()));
    h.insert(
        "relation_weights",
        p.relation_weights.as_deref().map(file_hash).transpose()?.unwrap_or_else(|| "builtin".into()),
    );
    Ok(h)
}

/// Hash over every parameter and the contents of every input file. Output
/// locations do not contribute.
pub fn config_hash(cfg: &PipelineConfig) -> Result<String> {
    let inputs = input_hashes(cfg)?;
    Ok(hash_config(cfg, &inputs))
}

fn hash_config(cfg: &PipelineConfig, inputs: &BTreeMap<&'static str, String>) -> String {
    let h = HashedConfig {
        seed: cfg.seed,
        cutoff: &cfg.cutoff,
        keep_undated: cfg.keep_undated,
        phrases: &cfg.phrases,
        embedding: cfg.embedding_params(),
        network: &cfg.network,
        query: &cfg.query,
        lda: cfg.lda_params(),
        inputs,
    };
    util::sha256_hex(serde_json::to_string(&h).expect("config serializes").as_bytes())
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("parameters serialize")
}

struct Runner {
    cache: PathBuf,
    timings: Vec<StageTiming>,
}

impl Runner {
    /// Loads the stage's artifact when its key file matches, otherwise
    /// computes and stores it. Returns the value and the stage key.
    fn stage<T>(
        &mut self,
        name: &str,
        key_parts: &[&str],
        compute: impl FnOnce() -> Result<T>,
        save: impl FnOnce(&T) -> Result<()>,
        load: impl FnOnce() -> Result<T>,
    ) -> Result<(T, String)> {
        let start = Instant::now();
        let key = util::sha256_hex(format!("{name}\n{}", key_parts.join("\n")).as_bytes());
        let key_path = self.cache.join(format!("{name}.key"));
        let wrap = |e: Error| Error::Stage {
            stage: name.to_string(),
            source: Box::new(e),
        };
        let fresh = std::fs::read_to_string(&key_path).is_ok_and(|k| k.trim() == key);
        let cached = if fresh { load().ok() } else { None };
        let was_cached = cached.is_some();
        let value = match cached {
            Some(v) => v,
            None => {
                // drop the key first so an interrupted write is never trusted
                let _ = std::fs::remove_file(&key_path);
                let v = compute().map_err(wrap)?;
                save(&v).map_err(wrap)?;
                std::fs::write(&key_path, format!("{key}\n")).map_err(|e| wrap(Error::io(&key_path, e)))?;
                v
            }
        };
        self.timings.push(StageTiming {
            stage: name.to_string(),
            cached: was_cached,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok((value, key))
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = util::create(path)?;
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    util::finish(path, w)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (lineno, line) in util::open_lines(path)? {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.to_string()))?);
        }
    }
    Ok(out)
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut w = util::create(path)?;
    for l in lines {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    util::finish(path, w)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    util::open_lines(path)?.map(|(_, l)| l).collect()
}

fn write_edges(path: &Path, edges: &[Edge]) -> Result<()> {
    write_lines(path, edges.iter().map(|e| format!("{}\t{}\t{}\t{}", e.u, e.v, e.weight, e.class.as_str())))
}

fn read_edges(path: &Path) -> Result<Vec<Edge>> {
    let mut edges = Vec::new();
    for (lineno, line) in util::open_lines(path)? {
        let line = line?;
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = || Error::parse(path, lineno, "malformed edge line");
        if cols.len() != 4 {
            return Err(bad());
        }
        let u: NodeId = cols[0].parse().map_err(|_| bad())?;
        let v: NodeId = cols[1].parse().map_err(|_| bad())?;
        let w: f64 = cols[2].parse().map_err(|_| bad())?;
        let class: EdgeClass = cols[3].parse().map_err(|_| bad())?;
        edges.push(Edge::new(u, v, w, class));
    }
    Ok(edges)
}

fn write_counts(path: &Path, counts: &CountMatrix) -> Result<()> {
    write_lines(
        path,
        counts
            .iter()
            .flat_map(|(d, row)| row.iter().map(move |(k, c)| format!("{d}\t{k}\t{c}"))),
    )
}

fn read_counts(path: &Path) -> Result<CountMatrix> {
    let mut m = CountMatrix::new();
    for (lineno, line) in util::open_lines(path)? {
        let line = line?;
        let cols: Vec<&str> = line.split('\t').collect();
        let count = match cols.as_slice() {
            [_, _, c] => c.parse::<u64>().ok(),
            _ => None,
        }
        .ok_or_else(|| Error::parse(path, lineno, "malformed count line"))?;
        m.entry(cols[0].to_string()).or_default().insert(cols[1].to_string(), count);
    }
    Ok(m)
}

fn lock(out_dir: &Path) -> Result<File> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join(LOCK_FILE);
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    match f.try_lock() {
        Ok(()) => Ok(f),
        Err(TryLockError::WouldBlock) => Err(Error::Locked(path)),
        Err(TryLockError::Error(e)) => Err(Error::io(&path, e)),
    }
}

/// Runs every stage, reusing cached artifacts whose keys still match, and
/// writes `network.txt`, `docs.jsonl` and `stages.tsv` into the output
/// directory.
pub fn build(cfg: &PipelineConfig) -> Result<BuildReport> {
    cfg.validate()?;
    let out = cfg.paths.out_dir.clone();
    let _guard = lock(&out)?;
    let inputs = input_hashes(cfg)?;
    let config_hash = hash_config(cfg, &inputs);
    let mut r = Runner {
        cache: out.join("cache"),
        timings: Vec::new(),
    };
    let p = &cfg.paths;

    let (docs, ingest_key) = r.stage(
        "ingest",
        &[&inputs["corpus"]],
        || Ok(corpus::load_corpus(&p.corpus, CorpusFormat::Jsonl, LoadMode::Strict)?.0.documents),
        |d: &Vec<Document>| write_jsonl(&r_path(&out, "ingest.jsonl"), d),
        || read_jsonl(&r_path(&out, "ingest.jsonl")),
    )?;

    let (normalized, norm_key) = r.stage(
        "normalize",
        &[&ingest_key, &inputs["stopwords"]],
        || {
            let sw = match &p.stopwords {
                Some(f) => Stopwords::load(f)?,
                None => Stopwords::default_english(),
            };
            Ok(corpus::normalize_all(&docs, &sw))
        },
        |d: &Vec<NormalizedDocument>| write_jsonl(&r_path(&out, "normalize.jsonl"), d),
        || query::read_docs_jsonl(&r_path(&out, "normalize.jsonl")),
    )?;

    let (docs, normalized, docs_key) = match cfg.cutoff_date()? {
        None => (docs, normalized, norm_key),
        Some(cutoff) => {
            let (kept, key) = r.stage(
                "filter",
                &[&norm_key, &json(&(&cfg.cutoff, cfg.keep_undated))],
                || {
                    let c = corpus::Corpus::from_documents(docs.clone(), p.corpus.display().to_string())?;
                    Ok(corpus::filter_by_date(&c, cutoff, cfg.keep_undated)
                        .documents
                        .into_iter()
                        .map(|d| d.doc_id)
                        .collect::<Vec<_>>())
                },
                |ids: &Vec<String>| write_lines(&r_path(&out, "filter.txt"), ids.iter().cloned()),
                || read_lines(&r_path(&out, "filter.txt")),
            )?;
            let keep: std::collections::HashSet<&str> = kept.iter().map(String::as_str).collect();
            let docs: Vec<Document> = docs.into_iter().filter(|d| keep.contains(d.doc_id.as_str())).collect();
            let normalized = normalized
                .into_iter()
                .filter(|d| keep.contains(d.doc_id.as_str()))
                .collect();
            (docs, normalized, key)
        }
    };

    let (lexicon, lex_key) = r.stage(
        "mine_phrases",
        &[&docs_key, &json(&cfg.phrases)],
        || phrases::mine_phrases(&normalized, &cfg.phrases),
        |l: &PhraseLexicon| l.write_tsv(&r_path(&out, "phrases.tsv"), Some(&format!("config_hash={config_hash} seed={}", cfg.seed))),
        || PhraseLexicon::read_tsv(&r_path(&out, "phrases.tsv")),
    )?;

    let (merged, merged_key) = r.stage(
        "apply_phrases",
        &[&lex_key],
        || Ok(phrases::apply_lexicon_all(&normalized, &lexicon)),
        |d: &Vec<NormalizedDocument>| write_jsonl(&r_path(&out, "merged.jsonl"), d),
        || query::read_docs_jsonl(&r_path(&out, "merged.jsonl")),
    )?;

    let emb_params = cfg.embedding_params();
    let (table, emb_key) = r.stage(
        "train_embeddings",
        &[&merged_key, &json(&emb_params)],
        || embed::train_skipgram(&merged, &emb_params),
        |t: &EmbeddingTable| t.write(&r_path(&out, "embeddings.txt")),
        || EmbeddingTable::read(&r_path(&out, "embeddings.txt")),
    )?;

    let (cents, cent_key) = r.stage(
        "centroids",
        &[&emb_key],
        || Ok(embed::centroids(&merged, &table)),
        |c: &Vec<Centroid>| write_jsonl(&r_path(&out, "centroids.jsonl"), c),
        || read_jsonl(&r_path(&out, "centroids.jsonl")),
    )?;

    let (aa, aa_key) = r.stage(
        "knn",
        &[&cent_key, &json(&(cfg.network.k, cfg.network.knn))],
        || netbuild::knn_abstract_edges(&cents, cfg.network.k, cfg.network.knn),
        |e: &Vec<Edge>| write_edges(&r_path(&out, "knn.tsv"), e),
        || read_edges(&r_path(&out, "knn.tsv")),
    )?;

    let catalog_inputs = [inputs["synonyms"].as_str(), inputs["relations"].as_str()];
    let load_catalog = || KeywordCatalog::load(&p.synonyms, &p.relations);
    let ((keywords, kk), kk_key) = r.stage(
        "keyword_graph",
        &[catalog_inputs[0], catalog_inputs[1], &inputs["relation_weights"], &json(&cfg.network.sigma)],
        || {
            let cat = load_catalog()?;
            let weights = match &p.relation_weights {
                Some(f) => RelationWeights::load(f)?,
                None => RelationWeights::default(),
            };
            let edges = netbuild::load_keyword_graph(&cat, &weights, cfg.network.sigma)?;
            Ok((cat.keywords.into_keys().collect::<Vec<_>>(), edges))
        },
        |(ids, e): &(Vec<String>, Vec<Edge>)| {
            write_lines(&r_path(&out, "keywords.txt"), ids.iter().cloned())?;
            write_edges(&r_path(&out, "keyword_graph.tsv"), e)
        },
        || Ok((read_lines(&r_path(&out, "keywords.txt"))?, read_edges(&r_path(&out, "keyword_graph.tsv"))?)),
    )?;

    let (counts, tag_key) = r.stage(
        "tag",
        &[&docs_key, catalog_inputs[0], catalog_inputs[1]],
        || {
            let (trie, _) = netbuild::build_synonym_trie(&load_catalog()?);
            Ok(netbuild::tag_abstracts(&docs, &trie))
        },
        |c: &CountMatrix| write_counts(&r_path(&out, "tags.tsv"), c),
        || read_counts(&r_path(&out, "tags.tsv")),
    )?;

    let (ak, ak_key) = r.stage(
        "tfidf",
        &[&tag_key, &json(&cfg.network.sigma)],
        || netbuild::tfidf_edges(&counts, cfg.network.sigma),
        |e: &Vec<Edge>| write_edges(&r_path(&out, "tfidf.tsv"), e),
        || read_edges(&r_path(&out, "tfidf.tsv")),
    )?;

    let provenance: BTreeMap<String, String> =
        [("config_hash".to_string(), config_hash.clone()), ("seed".to_string(), cfg.seed.to_string())].into();
    let (net, net_key) = r.stage(
        "assemble",
        &[&docs_key, &aa_key, &kk_key, &ak_key, &config_hash],
        || {
            let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
            Ok(netbuild::assemble(&ids, &keywords, &aa, &kk, &ak, cfg.network.sigma)?.with_provenance(provenance.clone()))
        },
        |n: &KnowledgeNetwork| netbuild::write_network(&r_path(&out, "network.txt"), n),
        || netbuild::read_network(&r_path(&out, "network.txt")),
    )?;

    let network_path = out.join(NETWORK_FILE);
    let docs_path = out.join(DOCS_FILE);
    r.stage(
        "write",
        &[&net_key, &merged_key],
        || Ok(()),
        |_| {
            netbuild::write_network(&network_path, &net)?;
            write_jsonl(&docs_path, &merged)
        },
        || {
            if network_path.is_file() && docs_path.is_file() {
                Ok(())
            } else {
                Err(Error::io(&network_path, std::io::ErrorKind::NotFound.into()))
            }
        },
    )?;

    let report = BuildReport {
        stages: r.timings,
        network_path,
        docs_path,
        config_hash,
        seed: cfg.seed,
    };
    std::fs::write(out.join(STAGES_FILE), report.to_tsv()).map_err(|e| Error::io(out.join(STAGES_FILE), e))?;
    Ok(report)
}

fn r_path(out: &Path, file: &str) -> PathBuf {
    out.join("cache").join(file)
}
