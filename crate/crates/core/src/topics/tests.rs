use super::*;
use proptest::{prop_assert, prop_assert_eq, proptest};

fn doc(id: &str, tokens: &str) -> NormalizedDocument {
    NormalizedDocument {
        doc_id: id.to_string(),
        tokens: tokens.split_whitespace().map(str::to_string).collect(),
    }
}

fn params(t: usize, iters: usize, seed: u64) -> LdaParams {
    LdaParams {
        num_topics: t,
        iterations: iters,
        seed,
        ..LdaParams::default()
    }
}

fn model_from_counts(vocab: &[&str], counts: Vec<Vec<u32>>, beta: f64) -> TopicModel {
    let v = vocab.len() as f64;
    let topic_word = counts
        .iter()
        .map(|row| {
            let n: u32 = row.iter().sum();
            row.iter().map(|&c| (c as f64 + beta) / (n as f64 + v * beta)).collect()
        })
        .collect();
    TopicModel {
        params: LdaParams { num_topics: counts.len(), beta, ..LdaParams::default() },
        vocab: vocab.iter().map(|s| s.to_string()).collect(),
        doc_ids: vec![],
        topic_word,
        doc_topic: vec![],
        topic_word_counts: counts,
        doc_topic_counts: vec![],
        meta: BTreeMap::new(),
    }
}

#[test]
fn defaults() {
    let p = LdaParams::default();
    assert_eq!((p.num_topics, p.iterations, p.beta), (20, 100, 0.01));
    assert_eq!(p.alpha(), 2.5);
    assert!(params(1, 10, 0).validate().is_err());
    assert!(params(2, 0, 0).validate().is_err());
    assert!(LdaParams { beta: 0.0, ..LdaParams::default() }.validate().is_err());
}

#[test]
fn conditional_matches_hand_computation() {
    // vocab a, b, c; d0 = a b a, d1 = c b
    let docs = [doc("d0", "a b a"), doc("d1", "c b")];
    let p = LdaParams { num_topics: 2, alpha: Some(0.5), beta: 0.1, ..LdaParams::default() };
    let s = LdaSampler::with_assignments(&docs, &p, vec![vec![0, 1, 0], vec![1, 1]]).unwrap();
    assert!(s.counts_consistent());
    // token d0[0] = a in topic 0, removed: n_a0 = 1, n_a1 = 0, n_d0,0 = 1,
    // n_d0,1 = 1, n_0 = 1, n_1 = 3, V beta = 0.3
    let w0 = (1.0 + 0.1) * (1.0 + 0.5) / (1.0 + 0.3);
    let w1 = (0.0 + 0.1) * (1.0 + 0.5) / (3.0 + 0.3);
    let got = s.conditional(0, 0);
    assert!((got[0] - w0 / (w0 + w1)).abs() < 1e-12);
    assert!((got[1] - w1 / (w0 + w1)).abs() < 1e-12);
    // token d1[1] = b in topic 1, removed: n_b0 = 0, n_b1 = 1, n_d1,0 = 0,
    // n_d1,1 = 1, n_0 = 2, n_1 = 2
    let w0 = 0.1 * 0.5 / 2.3;
    let w1 = 1.1 * 1.5 / 2.3;
    let got = s.conditional(1, 1);
    assert!((got[0] - w0 / (w0 + w1)).abs() < 1e-12);
    assert!((got[1] - w1 / (w0 + w1)).abs() < 1e-12);
}

#[test]
fn rejects_bad_assignments() {
    let docs = [doc("d0", "a b")];
    let p = params(2, 1, 0);
    assert!(LdaSampler::with_assignments(&docs, &p, vec![vec![0]]).is_err());
    assert!(LdaSampler::with_assignments(&docs, &p, vec![vec![0, 2]]).is_err());
}

#[test]
fn single_document() {
    let m = fit_lda(&[doc("d", "x y z x")], &params(2, 5, 3)).unwrap();
    assert_eq!(m.doc_topic.len(), 1);
    assert!((m.doc_topic[0].iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(m.doc_topic_counts[0].iter().sum::<u32>(), 4);
    assert_eq!(m.topic_word_counts.iter().flatten().sum::<u32>(), 4);
}

#[test]
fn empty_inputs_error() {
    assert!(matches!(fit_lda(&[], &params(2, 1, 0)), Err(Error::EmptyVocabulary(_))));
    assert!(matches!(fit_lda(&[doc("a", ""), doc("b", "")], &params(2, 1, 0)), Err(Error::EmptyVocabulary(_))));
    // empty documents alongside others are fine
    let m = fit_lda(&[doc("a", ""), doc("b", "w")], &params(2, 1, 0)).unwrap();
    assert!((m.doc_topic[0].iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

fn small_corpus() -> Vec<NormalizedDocument> {
    (0..12)
        .map(|i| {
            let text = if i % 2 == 0 { "heart cardiac valve heart" } else { "brain neuron cortex brain" };
            doc(&format!("d{i:02}"), text)
        })
        .collect()
}

#[test]
fn same_seed_same_model() {
    let docs = small_corpus();
    let a = fit_lda(&docs, &params(3, 20, 9)).unwrap();
    let b = fit_lda(&docs, &params(3, 20, 9)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = fit_lda(&docs, &params(3, 20, 10)).unwrap();
    assert_ne!(a.topic_word_counts, c.topic_word_counts);
}

#[test]
fn permuted_input_gives_permuted_rows() {
    let docs = small_corpus();
    let mut rev = docs.clone();
    rev.reverse();
    let a = fit_lda(&docs, &params(3, 15, 4)).unwrap();
    let b = fit_lda(&rev, &params(3, 15, 4)).unwrap();
    let n = docs.len();
    for i in 0..n {
        assert_eq!(a.doc_topic[i], b.doc_topic[n - 1 - i]);
        assert_eq!(a.doc_ids[i], b.doc_ids[n - 1 - i]);
    }
    assert_eq!(a.topic_word, b.topic_word);
}

#[test]
fn model_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let mut m = fit_lda(&small_corpus(), &params(2, 5, 1)).unwrap();
    m.meta.insert("seed".into(), "1".into());
    m.save(&path).unwrap();
    assert_eq!(TopicModel::load(&path).unwrap(), m);
}

#[test]
fn top_words_from_hand_counts() {
    let m = model_from_counts(&["t2", "t1", "t3"], vec![vec![3, 5, 2]], 0.01);
    let top = top_words(&m, 0, 3).unwrap();
    let names: Vec<&str> = top.iter().map(|(w, _)| w.as_str()).collect();
    assert_eq!(names, ["t1", "t2", "t3"]);
    let denom = 10.0 + 3.0 * 0.01;
    for ((_, p), c) in top.iter().zip([5.0, 3.0, 2.0]) {
        assert!((p - (c + 0.01) / denom).abs() < 1e-15);
    }
    assert_eq!(top_words(&m, 0, 10).unwrap().len(), 3);
    assert!(matches!(top_words(&m, 1, 3), Err(Error::TopicOutOfRange { index: 1, topics: 1 })));
}

#[test]
fn top_words_ties_are_lexicographic() {
    let m = model_from_counts(&["a", "b", "c"], vec![vec![1, 4, 4]], 0.01);
    let names: Vec<String> = top_words(&m, 0, 3).unwrap().into_iter().map(|(w, _)| w).collect();
    assert_eq!(names, ["b", "c", "a"]);
}

#[test]
fn single_token_vocab() {
    let m = fit_lda(&[doc("d", "only only")], &params(2, 3, 0)).unwrap();
    for t in 0..2 {
        let top = top_words(&m, t, 5).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].0, "only");
        assert!((top[0].1 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn substring_matching() {
    let m = model_from_counts(&["antidepressant", "anxiety", "depression"], vec![vec![1, 1, 1]], 0.01);
    let r = term_distribution(&m, "depress").unwrap();
    assert_eq!(r.matched_terms, ["antidepressant", "depression"]);
    assert_eq!(r.top_matches, [2]);
    let none = term_distribution(&m, "zzz").unwrap();
    assert!(none.matched_terms.is_empty());
    assert_eq!(none.mass, [0.0]);
    assert_eq!(none.top_matches, [0]);
    assert!(term_distribution(&m, "").is_err());
}

#[test]
fn mass_concentrates_in_the_right_topic() {
    // topic 0 holds every depress* count
    let m = model_from_counts(&["depressed", "depression", "liver"], vec![vec![4, 6, 0], vec![0, 0, 10]], 0.01);
    let r = term_distribution(&m, "depress").unwrap();
    let d = 10.03;
    assert!((r.mass[0] - (4.01 + 6.01) / d).abs() < 1e-15);
    assert!((r.mass[1] - 0.02 / d).abs() < 1e-15);
    assert!(r.peak_share() > 0.99);
    assert!(r.to_tsv().contains("0\t"));
    assert!(r.summary().contains("2 matching terms"));
}

#[test]
fn comparisons() {
    let m = model_from_counts(&["depressed", "liver"], vec![vec![4, 1], vec![1, 4]], 0.01);
    let a = term_distribution(&m, "depress").unwrap();
    let same = compare_queries(&a, &a).unwrap();
    assert_eq!(same.difference(), 0.0);
    let zero = TermDistributionReport {
        pattern: "depress".into(),
        matched_terms: vec![],
        mass: vec![0.0; 3],
        top_matches: vec![0; 3],
    };
    let c = compare_queries(&a, &zero).unwrap();
    assert_eq!(c.total_a, a.total_mass());
    assert_eq!(c.difference(), a.total_mass());
    assert_eq!(c.rows.len(), 3);
    assert_eq!(c.rows[2].mass_a, 0.0);
    assert!(c.to_tsv().lines().count() == 5);
    let other = term_distribution(&m, "liver").unwrap();
    assert!(matches!(compare_queries(&a, &other), Err(Error::PatternMismatch(_, _))));
}

proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

    #[test]
    fn sweeps_conserve_counts(
        lens in proptest::collection::vec(0usize..12, 1..8),
        t in 2usize..5,
        seed in 0u64..1000,
    ) {
        let words = ["w0", "w1", "w2", "w3", "w4", "w5"];
        let docs: Vec<NormalizedDocument> = lens
            .iter()
            .enumerate()
            .map(|(i, &n)| NormalizedDocument {
                doc_id: format!("d{i}"),
                tokens: (0..n).map(|j| words[(i * 7 + j * 3) % words.len()].to_string()).collect(),
            })
            .collect();
        proptest::prop_assume!(lens.iter().any(|&n| n > 0));
        let p = params(t, 1, seed);
        let mut s = LdaSampler::new(&docs, &p).unwrap();
        for _ in 0..4 {
            s.sweep();
            prop_assert!(s.counts_consistent());
        }
        let m = s.into_model();
        let total: usize = lens.iter().sum();
        prop_assert_eq!(m.topic_word_counts.iter().flatten().sum::<u32>() as usize, total);
        for row in m.topic_word.iter().chain(&m.doc_topic) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|&x| x >= 0.0));
        }
    }
}

#[test]
fn json_round_trip_is_bit_exact() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut m = model_from_counts(&["a"], vec![vec![1]], 0.01);
    m.topic_word = vec![(0..5000).map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-12..3))).collect()];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    m.save(&path).unwrap();
    let back = TopicModel::load(&path).unwrap();
    assert!(back.topic_word[0].iter().zip(&m.topic_word[0]).all(|(a, b)| a.to_bits() == b.to_bits()));
}
