//! Document ingestion, text normalization and date filtering.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::util;

/// Publication date with an optional day.
///
/// Ordering compares `(year, month, day)` with a missing day sorting before
/// every concrete day of the same month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PubDate {
    pub year: i32,
    pub month: u32,
    pub day: Option<u32>,
}

impl PubDate {
    /// The last calendar day the date could denote. Cutoff comparisons use
    /// this so a month-precision record is only kept when the whole month is
    /// on or before the cutoff.
    pub fn latest(&self) -> NaiveDate {
        match self.day {
            Some(d) => NaiveDate::from_ymd_opt(self.year, self.month, d).expect("validated on parse"),
            None => {
                let (y, m) = if self.month == 12 {
                    (self.year + 1, 1)
                } else {
                    (self.year, self.month + 1)
                };
                NaiveDate::from_ymd_opt(y, m, 1).expect("validated on parse").pred_opt().expect("not the minimum date")
            }
        }
    }
}

impl From<NaiveDate> for PubDate {
    fn from(d: NaiveDate) -> Self {
        PubDate {
            year: d.year(),
            month: d.month(),
            day: Some(d.day()),
        }
    }
}

impl FromStr for PubDate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(d.into());
        }
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| format!("unparseable date {s:?}"))?;
        let year: i32 = y.parse().map_err(|_| format!("unparseable date {s:?}"))?;
        let month: u32 = m.parse().map_err(|_| format!("unparseable date {s:?}"))?;
        if NaiveDate::from_ymd_opt(year, month, 1).is_none() {
            return Err(format!("unparseable date {s:?}"));
        }
        Ok(PubDate {
            year,
            month,
            day: None,
        })
    }
}

impl fmt::Display for PubDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)?;
        if let Some(d) = self.day {
            write!(f, "-{d:02}")?;
        }
        Ok(())
    }
}

impl Serialize for PubDate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PubDate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One abstract record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<PubDate>,
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>, abstract_text: impl Into<String>) -> Self {
        Document {
            doc_id: id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            date: None,
        }
    }

    pub fn with_date(mut self, date: PubDate) -> Self {
        self.date = Some(date);
        self
    }

    /// Title followed by abstract, separated so tokens never fuse across them.
    pub fn full_text(&self) -> String {
        format!("{} {}", self.title, self.abstract_text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormalizedDocument {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub ingested_at: String,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub provenance: Provenance,
}

impl Corpus {
    /// Builds a corpus from in-memory documents, enforcing id uniqueness.
    pub fn from_documents(documents: Vec<Document>, source: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, d) in documents.iter().enumerate() {
            if d.doc_id.is_empty() {
                return Err(Error::InvalidParam(format!("document {} has an empty id", i + 1)));
            }
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::DuplicateDocId {
                    id: d.doc_id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Corpus {
            documents,
            provenance: Provenance {
                source: source.into(),
                ingested_at: chrono::Utc::now().to_rfc3339(),
            },
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// Abort on the first malformed line.
    #[default]
    Strict,
    /// Skip malformed lines and report them.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    Jsonl,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// `(line number, reason)` for each skipped record.
    pub skipped: Vec<(usize, String)>,
}

/// Reads a JSON-lines corpus. Blank lines are ignored.
pub fn load_corpus(path: &Path, format: CorpusFormat, mode: LoadMode) -> Result<(Corpus, LoadReport)> {
    let CorpusFormat::Jsonl = format;
    let mut docs = Vec::new();
    let mut report = LoadReport::default();
    let mut ids: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in util::open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = serde_json::from_str::<Document>(&line)
            .map_err(|e| e.to_string())
            .and_then(|d| {
                if d.doc_id.is_empty() {
                    Err("empty id".to_string())
                } else {
                    Ok(d)
                }
            });
        match doc {
            Ok(doc) => {
                if ids.insert(doc.doc_id.clone(), lineno).is_some() {
                    return Err(Error::DuplicateDocId {
                        id: doc.doc_id,
                        line: lineno,
                    });
                }
                docs.push(doc);
            }
            Err(msg) => match mode {
                LoadMode::Strict => return Err(Error::parse(path, lineno, msg)),
                LoadMode::Skip => report.skipped.push((lineno, msg)),
            },
        }
    }
    let corpus = Corpus {
        documents: docs,
        provenance: Provenance {
            source: path.display().to_string(),
            ingested_at: chrono::Utc::now().to_rfc3339(),
        },
    };
    Ok((corpus, report))
}

/// Lowercase stopword set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "after", "against", "all", "also", "an", "and", "any", "are", "as", "at", "be",
    "been", "before", "being", "between", "both", "but", "by", "can", "could", "did", "do",
    "does", "during", "each", "for", "from", "had", "has", "have", "he", "her", "here", "his",
    "how", "however", "i", "if", "in", "into", "is", "it", "its", "may", "more", "most", "no",
    "nor", "not", "of", "on", "or", "other", "our", "over", "she", "should", "such", "than",
    "that", "the", "their", "them", "then", "there", "these", "they", "this", "those", "through",
    "to", "under", "up", "was", "we", "were", "what", "when", "where", "which", "while", "who",
    "will", "with", "within", "without", "would",
];

impl Stopwords {
    pub fn empty() -> Self {
        Stopwords(HashSet::new())
    }

    /// A small English list.
    pub fn default_english() -> Self {
        DEFAULT_STOPWORDS.iter().copied().collect()
    }

    /// One token per line; `#` starts a comment.
    pub fn load(path: &Path) -> Result<Self> {
        let mut set = HashSet::new();
        for (_, line) in util::open_lines(path)? {
            let line = line?;
            let word = line.split('#').next().unwrap_or("").trim();
            if !word.is_empty() {
                set.insert(word.to_lowercase());
            }
        }
        Ok(Stopwords(set))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<'a> FromIterator<&'a str> for Stopwords {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        Stopwords(iter.into_iter().map(str::to_lowercase).collect())
    }
}

fn is_token_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'
}

/// Folds `text` to lowercase ASCII and splits it into tokens of `[a-z0-9_]`.
///
/// Characters without an ASCII decomposition are dropped. A hyphen joining two
/// token characters becomes an underscore; any other punctuation or space is a
/// boundary. No stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    let folded: Vec<char> = text
        .nfkd()
        .filter(char::is_ascii)
        .map(|c| c.to_ascii_lowercase())
        .collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut flush = |cur: &mut String| {
        let t = cur.trim_matches('_');
        if !t.is_empty() {
            tokens.push(t.to_string());
        }
        cur.clear();
    };
    for (i, &c) in folded.iter().enumerate() {
        if is_token_char(c) {
            cur.push(c);
        } else if c == '-'
            && !cur.is_empty()
            && folded.get(i + 1).copied().is_some_and(is_token_char)
        {
            cur.push('_');
        } else {
            flush(&mut cur);
        }
    }
    flush(&mut cur);
    tokens
}

/// Tokenizes title + abstract and removes stopwords.
pub fn normalize(doc: &Document, stopwords: &Stopwords) -> NormalizedDocument {
    let tokens = tokenize(&doc.full_text())
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect();
    NormalizedDocument {
        doc_id: doc.doc_id.clone(),
        tokens,
    }
}

/// Normalizes every document; output order matches input order.
pub fn normalize_all(docs: &[Document], stopwords: &Stopwords) -> Vec<NormalizedDocument> {
    docs.par_iter().map(|d| normalize(d, stopwords)).collect()
}

/// Keeps documents dated on or before `cutoff`. Undated documents are kept
/// only when `keep_undated` is set.
pub fn filter_by_date(corpus: &Corpus, cutoff: NaiveDate, keep_undated: bool) -> Corpus {
    let documents = corpus
        .documents
        .iter()
        .filter(|d| match d.date {
            Some(date) => date.latest() <= cutoff,
            None => keep_undated,
        })
        .cloned()
        .collect();
    Corpus {
        documents,
        provenance: corpus.provenance.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_single_record() {
        let f = write_tmp(r#"{"id":"d1","title":"A","abstract":"B","date":"2009-01-01"}"#);
        let (c, report) = load_corpus(f.path(), CorpusFormat::Jsonl, LoadMode::Strict).unwrap();
        assert_eq!(c.len(), 1);
        assert!(report.skipped.is_empty());
        let d = &c.documents[0];
        assert_eq!(d.doc_id, "d1");
        assert_eq!(d.title, "A");
        assert_eq!(d.abstract_text, "B");
        assert_eq!(d.date, Some(ymd(2009, 1, 1).into()));
    }

    #[test]
    fn duplicate_id_aborts() {
        let f = write_tmp(
            "{\"id\":\"d1\",\"title\":\"A\",\"abstract\":\"B\"}\n{\"id\":\"d1\",\"title\":\"C\",\"abstract\":\"D\"}\n",
        );
        for mode in [LoadMode::Strict, LoadMode::Skip] {
            let err = load_corpus(f.path(), CorpusFormat::Jsonl, mode).unwrap_err();
            assert!(matches!(err, Error::DuplicateDocId { ref id, line: 2 } if id == "d1"));
        }
    }

    #[test]
    fn malformed_line_skip_and_strict() {
        let f = write_tmp(
            "{\"id\":\"d1\",\"title\":\"A\",\"abstract\":\"B\"}\n{not json\n{\"id\":\"d3\",\"title\":\"C\",\"abstract\":\"D\",\"date\":\"2001-02\"}\n",
        );
        let (c, report) = load_corpus(f.path(), CorpusFormat::Jsonl, LoadMode::Skip).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].0, 2);

        let err = load_corpus(f.path(), CorpusFormat::Jsonl, LoadMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_dates_are_malformed() {
        let f = write_tmp(
            "{\"id\":\"d1\",\"title\":\"A\",\"abstract\":\"B\",\"author\":\"x\"}\n{\"id\":\"d2\",\"title\":\"A\",\"abstract\":\"B\",\"date\":\"soon\"}\n",
        );
        let (c, report) = load_corpus(f.path(), CorpusFormat::Jsonl, LoadMode::Skip).unwrap();
        assert!(c.is_empty());
        assert_eq!(report.skipped.len(), 2);
    }

    #[test]
    fn normalize_examples() {
        let sw: Stopwords = ["of"].into_iter().collect();
        let n = normalize(&Document::new("d", "Colour of p53", ""), &sw);
        assert_eq!(n.tokens, ["colour", "p53"]);

        let n = normalize(&Document::new("d", "Naïve T-cells", ""), &Stopwords::empty());
        assert_eq!(n.tokens, ["naive", "t_cells"]);

        let sw: Stopwords = ["the", "of", "and"].into_iter().collect();
        let n = normalize(&Document::new("d", "The OF", "and, the."), &sw);
        assert!(n.tokens.is_empty());
    }

    #[test]
    fn tokenizer_edges() {
        assert_eq!(tokenize("well-being -x y- a--b"), ["well_being", "x", "y", "a", "b"]);
        assert_eq!(tokenize("IL-6/STAT3 (n=12)"), ["il_6", "stat3", "n", "12"]);
        assert_eq!(tokenize("α-synuclein ß"), ["synuclein"]);
        assert_eq!(tokenize("_x_ __"), ["x"]);
    }

    #[test]
    fn date_filter_examples() {
        let docs = vec![
            Document::new("a", "", "").with_date(ymd(2008, 6, 1).into()),
            Document::new("b", "", "").with_date(ymd(2010, 1, 1).into()),
            Document::new("u", "", ""),
        ];
        let c = Corpus::from_documents(docs, "mem").unwrap();
        let kept = filter_by_date(&c, ymd(2009, 12, 31), false);
        assert_eq!(kept.documents.iter().map(|d| d.doc_id.as_str()).collect::<Vec<_>>(), ["a"]);
        assert!(filter_by_date(&c, ymd(2000, 1, 1), false).is_empty());
        let kept = filter_by_date(&c, ymd(2000, 1, 1), true);
        assert_eq!(kept.documents[0].doc_id, "u");
    }

    #[test]
    fn month_precision_uses_last_day() {
        let d: PubDate = "2009-12".parse().unwrap();
        assert_eq!(d.latest(), ymd(2009, 12, 31));
        let c = Corpus::from_documents(vec![Document::new("a", "", "").with_date(d)], "m").unwrap();
        assert!(filter_by_date(&c, ymd(2009, 12, 15), false).is_empty());
        assert_eq!(filter_by_date(&c, ymd(2009, 12, 31), false).len(), 1);
        assert_eq!(d.to_string(), "2009-12");
    }

    fn arb_date() -> impl Strategy<Value = Option<NaiveDate>> {
        prop::option::of((1990i32..2020, 1u32..=12, 1u32..=28).prop_map(|(y, m, d)| ymd(y, m, d)))
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(text in "\\PC{0,80}") {
            let sw = Stopwords::default_english();
            let once = normalize(&Document::new("d", text, ""), &sw);
            let twice = normalize(&Document::new("d", once.tokens.join(" "), ""), &sw);
            prop_assert_eq!(&once.tokens, &twice.tokens);
            for t in &once.tokens {
                prop_assert!(!t.is_empty());
                prop_assert!(t.chars().all(is_token_char));
                prop_assert!(!sw.contains(t));
            }
        }

        #[test]
        fn filter_composes_to_min(dates in prop::collection::vec(arb_date(), 0..20),
                                  t1 in arb_date(), t2 in arb_date(), keep in any::<bool>()) {
            let t1 = t1.unwrap_or(ymd(2005, 1, 1));
            let t2 = t2.unwrap_or(ymd(2010, 1, 1));
            let docs = dates.iter().enumerate().map(|(i, d)| {
                let doc = Document::new(format!("d{i}"), "", "");
                match d { Some(d) => doc.with_date((*d).into()), None => doc }
            }).collect();
            let c = Corpus::from_documents(docs, "m").unwrap();
            let nested = filter_by_date(&filter_by_date(&c, t1, keep), t2, keep);
            let direct = filter_by_date(&c, t1.min(t2), keep);
            prop_assert_eq!(nested.documents, direct.documents);
        }
    }
}
