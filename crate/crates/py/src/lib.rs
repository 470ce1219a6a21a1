//! Python bindings: `import hypnet_py`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use hypnet::corpus::{self, Document, NormalizedDocument, Stopwords};
use hypnet::netbuild::{self, KnowledgeNetwork, NodeId};
use hypnet::{phrases, pipeline, query, topics, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn node(s: &str) -> PyResult<NodeId> {
    if s.contains(':') {
        s.parse().map_err(PyValueError::new_err)
    } else {
        Ok(NodeId::keyword(s))
    }
}

/// Lowercased ASCII tokens, with accents folded and hyphens joined.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    corpus::tokenize(text)
}

/// Tokens of title and abstract with stopwords removed. `stopwords=None`
/// uses the built-in English list.
#[pyfunction]
#[pyo3(signature = (title, abstract_text, stopwords=None))]
fn normalize(title: &str, abstract_text: &str, stopwords: Option<Vec<String>>) -> Vec<String> {
    let sw = match &stopwords {
        Some(list) => list.iter().map(String::as_str).collect(),
        None => Stopwords::default_english(),
    };
    corpus::normalize(&Document::new("", title, abstract_text), &sw).tokens
}

/// Collocation score of a bigram given its count, the counts of both parts,
/// and the number of token positions.
#[pyfunction]
fn significance(count_ab: u64, count_a: u64, count_b: u64, total_positions: u64) -> f64 {
    phrases::significance(count_ab, count_a, count_b, total_positions)
}

/// Runs the cached build pipeline for a TOML config. Returns
/// `(stage, cached, seconds)` rows.
#[pyfunction]
fn build(config: PathBuf) -> PyResult<Vec<(String, bool, f64)>> {
    let cfg = pipeline::PipelineConfig::load(&config).map_err(err)?;
    let report = pipeline::build(&cfg).map_err(err)?;
    Ok(report.stages.into_iter().map(|s| (s.stage, s.cached, s.seconds)).collect())
}

#[pyclass(frozen, get_all)]
struct NetworkStats {
    nodes: usize,
    abstracts: usize,
    keywords: usize,
    edges: usize,
    aa_edges: usize,
    kk_edges: usize,
    ak_edges: usize,
    average_degree: f64,
    clustering_coefficient: f64,
    components: usize,
    component_sizes: Vec<usize>,
}

#[pyclass(frozen, name = "Network")]
struct PyNetwork {
    inner: KnowledgeNetwork,
}

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        netbuild::read_network(&path).map(|inner| PyNetwork { inner }).map_err(err)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma()
    }

    fn provenance(&self) -> BTreeMap<String, String> {
        self.inner.provenance().clone()
    }

    fn stats(&self) -> NetworkStats {
        let s = self.inner.stats();
        NetworkStats {
            nodes: s.nodes,
            abstracts: s.abstracts,
            keywords: s.keywords,
            edges: s.edges,
            aa_edges: s.aa_edges,
            kk_edges: s.kk_edges,
            ak_edges: s.ak_edges,
            average_degree: s.average_degree,
            clustering_coefficient: s.clustering_coefficient,
            components: s.components,
            component_sizes: s.component_sizes,
        }
    }

    /// `(nodes, total_weight)`, or `None` when the nodes are disconnected.
    fn shortest_path(&self, source: &str, target: &str) -> PyResult<Option<(Vec<String>, f64)>> {
        let path = query::shortest_path(&self.inner, &node(source)?, &node(target)?).map_err(err)?;
        Ok(path.map(|p| (p.nodes.iter().map(ToString::to_string).collect(), p.total_weight)))
    }

    /// Abstract ids of the cloud around the shortest path, in cloud order.
    #[pyo3(signature = (source, target, cloud_size=1000, pair_cap=150))]
    fn extend_cloud(&self, source: &str, target: &str, cloud_size: usize, pair_cap: usize) -> PyResult<Vec<String>> {
        let Some(path) = query::shortest_path(&self.inner, &node(source)?, &node(target)?).map_err(err)? else {
            return Ok(Vec::new());
        };
        let cloud = query::extend_cloud(&self.inner, &path, &query::QueryParams { cloud_size, pair_cap }).map_err(err)?;
        Ok(cloud.union.into_iter().map(|n| n.key).collect())
    }
}

#[pyclass(frozen, name = "TopicModel")]
struct PyTopicModel {
    inner: topics::TopicModel,
}

#[pymethods]
impl PyTopicModel {
    /// Fits LDA to `(doc_id, tokens)` pairs.
    #[staticmethod]
    #[pyo3(signature = (docs, num_topics=20, iterations=100, seed=1, alpha=None, beta=0.01))]
    fn fit(
        docs: Vec<(String, Vec<String>)>,
        num_topics: usize,
        iterations: usize,
        seed: u64,
        alpha: Option<f64>,
        beta: f64,
    ) -> PyResult<Self> {
        let docs: Vec<NormalizedDocument> = docs
            .into_iter()
            .map(|(doc_id, tokens)| NormalizedDocument { doc_id, tokens })
            .collect();
        let params = topics::LdaParams { num_topics, iterations, alpha, beta, seed };
        topics::fit_lda(&docs, &params).map(|inner| PyTopicModel { inner }).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        topics::TopicModel::load(&path).map(|inner| PyTopicModel { inner }).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn num_topics(&self) -> usize {
        self.inner.num_topics()
    }

    #[getter]
    fn vocab(&self) -> Vec<String> {
        self.inner.vocab.clone()
    }

    #[getter]
    fn doc_topic(&self) -> Vec<Vec<f64>> {
        self.inner.doc_topic.clone()
    }

    fn top_words(&self, topic: usize, m: usize) -> PyResult<Vec<(String, f64)>> {
        topics::top_words(&self.inner, topic, m).map_err(err)
    }

    /// `(matched_terms, per_topic_mass, per_topic_top30_matches)`.
    fn term_distribution(&self, pattern: &str) -> PyResult<(Vec<String>, Vec<f64>, Vec<usize>)> {
        let r = topics::term_distribution(&self.inner, pattern).map_err(err)?;
        Ok((r.matched_terms, r.mass, r.top_matches))
    }
}

/// Total matched mass of `pattern` in two models: `(total_a, total_b)`.
#[pyfunction]
fn compare_queries(a: &PyTopicModel, b: &PyTopicModel, pattern: &str) -> PyResult<(f64, f64)> {
    let ra = topics::term_distribution(&a.inner, pattern).map_err(err)?;
    let rb = topics::term_distribution(&b.inner, pattern).map_err(err)?;
    let cmp = topics::compare_queries(&ra, &rb).map_err(err)?;
    Ok((cmp.total_a, cmp.total_b))
}

#[pymodule]
fn hypnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(significance, m)?)?;
    m.add_function(wrap_pyfunction!(build, m)?)?;
    m.add_function(wrap_pyfunction!(compare_queries, m)?)?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyTopicModel>()?;
    m.add_class::<NetworkStats>()?;
    Ok(())
}
