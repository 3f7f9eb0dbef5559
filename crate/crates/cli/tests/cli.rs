use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn domtrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domtrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = domtrace(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_field(manifest: &str, key: &str) -> u64 {
    let v: serde_json::Value = serde_json::from_str(manifest).unwrap();
    v["seeds"][key].as_u64().expect("seed entry")
}

#[test]
fn cards_lists_the_canonical_order() {
    let out = ok(&["cards"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 18);
    assert!(lines[1].starts_with("0,Copper,0"));
    assert!(lines[17].starts_with("16,Workshop,3"));
}

#[test]
fn stages_run_individually_match_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let config = dir.join("run.toml");
    fs::write(
        &config,
        r#"
out_dir = "pipe"
seed = 9
threads = 1
[synth]
archetypes = "bigmoney:15,mine:15"
[tsne]
perplexity = 6.0
n_iter = 250
[[plots]]
color = "card:Silver+Gold@final"
file = "money.svg"
"#,
    )
    .unwrap();
    ok(&["run", s(&config)]);
    let pipe = dir.join("pipe");
    let manifest = fs::read_to_string(pipe.join("manifest.json")).unwrap();
    let synth_seed = json_field(&manifest, "synth").to_string();
    let init_seed = json_field(&manifest, "tsne-init").to_string();

    let games = dir.join("games.jsonl");
    let traces = dir.join("traces.jsonl");
    let hist = dir.join("histogram.csv");
    let corpus = dir.join("corpus.csv");
    let emb = dir.join("embedding.csv");
    ok(&["--threads", "1", "synth", "--archetypes", "bigmoney:15,mine:15", "--seed", &synth_seed, "--out", s(&games)]);
    ok(&["filter", "--in", s(&games), "--out", s(&traces)]);
    ok(&["stats", "--histogram", "--in", s(&traces), "--out", s(&hist)]);
    ok(&["encode", "--scheme", "normalized", "--in", s(&traces), "--out", s(&corpus)]);
    ok(&[
        "--threads", "1", "embed", "--in", s(&corpus), "--out", s(&emb), "--perplexity", "6", "--iters", "250", "--seed", &init_seed,
    ]);
    ok(&["plot", "--embedding", s(&emb), "--traces", s(&traces), "--color", "card:Silver+Gold@final", "--out", s(&dir.join("money.svg"))]);
    ok(&["plot", "--histogram", s(&hist), "--out", s(&dir.join("histogram.svg"))]);

    for f in [
        "games.jsonl",
        "traces.jsonl",
        "histogram.csv",
        "corpus.csv",
        "embedding.csv",
        "embedding.kl.csv",
        "money.svg",
        "histogram.svg",
    ] {
        assert_eq!(fs::read(dir.join(f)).unwrap(), fs::read(pipe.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn reruns_reproduce_artifact_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        "out_dir = \"a\"\nseed = 1\nhistogram = false\n[synth]\narchetypes = \"village:10,bigmoney:10\"\n[tsne]\nperplexity = 4.0\nn_iter = 100\n",
    )
    .unwrap();
    ok(&["run", s(&config)]);
    ok(&["run", s(&config), "--out-dir", s(&tmp.path().join("b"))]);
    let digests = |d: &str| {
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join(d).join("manifest.json")).unwrap()).unwrap();
        m["artifacts"].clone()
    };
    assert_eq!(digests("a"), digests("b"));
}

#[test]
fn replay_prints_compositions() {
    let tmp = tempfile::tempdir().unwrap();
    let games = tmp.path().join("g.jsonl");
    let traces = tmp.path().join("t.jsonl");
    ok(&["synth", "--archetypes", "bigmoney:2", "--seed", "4", "--out", s(&games)]);
    ok(&["filter", "--in", s(&games), "--out", s(&traces)]);
    let out = ok(&["replay", "--trace", "synth-4-00000/p1", "--in", s(&traces)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("0,7,0,0,3,"));
    let out = domtrace(&["replay", "--trace", "nope/p1", "--in", s(&traces)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes_separate_config_from_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.jsonl");
    let out = domtrace(&["encode", "--scheme", "turn", "--in", s(&missing), "--out", s(&tmp.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));

    let config = tmp.path().join("run.toml");
    fs::write(&config, format!("out_dir = \"out\"\ninputs = [\"{}\"]\n", s(&missing))).unwrap();
    assert_eq!(domtrace(&["run", s(&config)]).status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());

    assert_eq!(domtrace(&["synth", "--archetypes", "chapel:3", "--out", s(&tmp.path().join("g"))]).status.code(), Some(2));
    assert_eq!(domtrace(&["plot", "--histogram", "h.csv", "--color", "card:Gold", "--out", "x.svg"]).status.code(), Some(2));

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "trace_id,n_turns,label,f0\na,3,,oops\n").unwrap();
    let out = domtrace(&["embed", "--in", s(&bad), "--out", s(&tmp.path().join("e.csv"))]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
