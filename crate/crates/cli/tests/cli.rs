use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hypnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypnet"))
        .args(args)
        .env_remove("MOLIERE_SEED")
        .output()
        .expect("binary runs")
}

fn text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/bridge")
}

fn write_config(dir: &Path) -> PathBuf {
    let data = fixture();
    let cfg = format!(
        "seed = 3\n[paths]\ncorpus = {:?}\nsynonyms = {:?}\nrelations = {:?}\nout_dir = \"out\"\n[embedding]\ndim = 16\nepochs = 3\n",
        data.join("corpus.jsonl"),
        data.join("synonyms.tsv"),
        data.join("relations.tsv"),
    );
    let path = dir.join("hypnet.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_query_fit_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = hypnet(&["build", "--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = text(&out);
    assert_eq!(stdout.lines().filter(|l| l.contains("\tbuilt\t")).count(), 12);
    let again = text(&hypnet(&["build", "--config", s(&cfg)]));
    assert_eq!(again.lines().filter(|l| l.contains("\tcached\t")).count(), 12);

    let net = dir.path().join("out/network.txt");
    let stats = hypnet(&["stats", "--network", s(&net), "--json"]);
    assert!(stats.status.success());
    let v: serde_json::Value = serde_json::from_str(&text(&stats)).unwrap();
    assert_eq!(v["abstracts"], 60);
    assert!(text(&hypnet(&["stats", "--network", s(&net)])).contains("clustering_coefficient"));

    let bundle = dir.path().join("q");
    let q = hypnet(&[
        "query", "--network", s(&net), "--source", "k:K001", "--target", "K002", "--cloud-size", "30", "--out", s(&bundle),
    ]);
    assert!(q.status.success(), "{}", String::from_utf8_lossy(&q.stderr));
    let path: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(bundle.join("path.json")).unwrap()).unwrap();
    assert_eq!(path["found"], true);
    assert!(path["nodes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().starts_with("a:")));

    let fit = hypnet(&["topics", "fit", "--bundle", s(&bundle), "--topics", "5", "--iters", "50", "--seed", "2"]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    assert_eq!(text(&fit).lines().filter(|l| l.starts_with("topic ")).count(), 5);
    let model = bundle.join("model.json");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m["meta"]["lda_seed"], "2");
    assert_eq!(m["meta"]["seed"], "3");

    let tsv = dir.path().join("report.tsv");
    let rep = hypnet(&["topics", "report", "--model", s(&model), "--pattern", "serotonin", "--out", s(&tsv)]);
    assert!(rep.status.success());
    assert!(text(&rep).contains("pattern \"serotonin\""));
    assert_eq!(std::fs::read_to_string(&tsv).unwrap().lines().count(), 2 + 5);

    let cmp = hypnet(&["topics", "report", "--model", s(&model), "--against", s(&model), "--pattern", "serotonin"]);
    assert!(cmp.status.success());
    assert!(text(&cmp).contains("difference=0"));
}

#[test]
fn no_path_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("network.txt");
    std::fs::write(
        &net,
        "hypnet-network 1\nabstracts=2 keywords=2 edges=2 sigma=2\nmeta\nnodes\na:d1\na:d2\nk:A\nk:B\nedges\na:d1 k:A 1 AK\na:d2 k:B 1 AK\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("docs.jsonl"),
        "{\"id\":\"d1\",\"tokens\":[\"x\"]}\n{\"id\":\"d2\",\"tokens\":[\"y\"]}\n",
    )
    .unwrap();
    let bundle = dir.path().join("b");
    let out = hypnet(&["query", "--network", s(&net), "--source", "k:A", "--target", "k:B", "--out", s(&bundle)]);
    assert_eq!(out.status.code(), Some(2));
    let path = std::fs::read_to_string(bundle.join("path.json")).unwrap();
    assert!(path.contains("\"found\": false"));
    assert_eq!(std::fs::read_to_string(bundle.join("docs.jsonl")).unwrap(), "");
}

#[test]
fn missing_network_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere/network.txt");
    let out = hypnet(&["stats", "--network", s(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere/network.txt"));
}

#[test]
fn bad_node_id_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hypnet(&["query", "--network", "x", "--source", "z:1", "--target", "k:2", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_hypnet"))
        .args(["build", "--config", s(&cfg)])
        .env("MOLIERE_SEED", "11")
        .output()
        .unwrap();
    assert!(out.status.success());
    let net = std::fs::read_to_string(dir.path().join("out/network.txt")).unwrap();
    assert!(net.lines().nth(2).unwrap().contains("seed=11"));
}
