mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;

fn geoqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoqa"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn geoqa_in(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_geoqa"));
    cmd.current_dir(dir).args(args).env("RUST_LOG", "debug");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn tomtom_louvre_id() -> String {
    let file = geoqa_core::scenario::ScenarioFile::load(&workspace_root().join("fixtures/scenarios.json")).unwrap();
    let s = file.scenarios.iter().find(|s| s.id == "ctx-03-louvre-restaurants-tomtom").unwrap();
    s.steps[1].query.get("place_id").unwrap().as_str().unwrap().to_string()
}

#[test]
fn nearby_prints_twenty_lines_by_distance() {
    let fixtures = fixture_dir();
    let id = tomtom_louvre_id();
    let o = geoqa(&[
        "nearby", "--provider", "tomtom", "--around", &id, "--type", "restaurant", "--limit", "20", "--replay-only",
        "--fixtures", fixtures.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let meters: Vec<u64> = text
        .lines()
        .filter_map(|l| l.strip_suffix(" m)"))
        .map(|l| l.rsplit(", ").next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(meters.len(), 20, "{text}");
    assert!(meters.windows(2).all(|w| w[0] <= w[1]));
    assert!(text.starts_with("== Nearby restaurant around Louvre Museum"));
}

#[test]
fn nearby_json_output_parses() {
    let fixtures = fixture_dir();
    let id = tomtom_louvre_id();
    let o = geoqa(&[
        "--json", "nearby", "--provider", "tomtom", "--around", &id, "--type", "restaurant", "--limit", "20",
        "--replay-only", "--fixtures", fixtures.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["normalized"]["places"].as_array().unwrap().len(), 20);
    assert_eq!(v["normalized"]["distances"].as_array().unwrap().len(), 20);
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad-dataset.json");
    std::fs::write(&bad, r#"{"schema_version": 1, "contexts": "nope"}"#).unwrap();
    let o = geoqa(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("violation"));
    let golden = workspace_root().join("fixtures/golden/dataset.json");
    assert_eq!(code(&geoqa(&["validate", golden.to_str().unwrap()])), 0);
}

#[test]
fn fresh_cache_stats_are_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("fresh.redb");
    let o = geoqa(&["--cache", cache.to_str().unwrap(), "--json", "cache", "stats"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v, serde_json::json!({"bytes": 0, "entries": 0, "hits": 0, "misses": 0}));
}

#[test]
fn replay_miss_exits_two_and_bad_parameter_exits_one() {
    let fixtures = fixture_dir();
    let f = fixtures.to_str().unwrap();
    assert_eq!(code(&geoqa(&["search", "--provider", "google", "never recorded", "--fixtures", f])), 2);
    let o = geoqa(&["route", "--provider", "google", "--from", "48.85,2.29", "--to", "48.86,2.33", "--mode", "transit"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("UnsupportedParameter"));
}

#[test]
fn headless_workflow_through_a_session_file() {
    let dir = tempfile::tempdir().unwrap();
    let session = dir.path().join("session.json");
    let cache = dir.path().join("cache.redb");
    let fixtures = fixture_dir();
    let base = [
        "--session", session.to_str().unwrap(), "--cache", cache.to_str().unwrap(), "--fixtures",
        fixtures.to_str().unwrap(), "--replay-only",
    ];
    let run = |args: &[&str]| {
        let mut all: Vec<&str> = base.to_vec();
        all.extend_from_slice(args);
        let o = geoqa(&all);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let ctx = run(&["context", "new", "Eiffel to Louvre"]).trim().to_string();
    let id = tomtom_louvre_id();
    run(&["nearby", "--provider", "tomtom", "--around", &id, "--type", "restaurant", "--limit", "20"]);
    assert_eq!(run(&["context", "suggest", "lou"]).trim(), "Louvre Museum");
    let shown = run(&["context", "show", &ctx]);
    assert!(shown.contains("== Place details ==") && shown.contains("closest first"));
    let qa = run(&[
        "qa", "add", "--question", "Which is closer to @Louvre Museum?", "--format", "SingleChoice", "--option",
        "La Marché Saint-Paul", "--option", "Le Coq", "--gold", "1",
    ])
    .trim()
    .to_string();
    assert!(qa.starts_with("qa-"));
    assert!(run(&["qa", "prompt", &qa]).contains("1. La Marché Saint-Paul"));
    assert_eq!(run(&["qa", "compare", &qa, "Option 1"]).trim(), "correct");
    assert_eq!(run(&["qa", "compare", &qa, "2"]).trim(), "incorrect");
    let out = dir.path().join("dataset.json");
    run(&["export", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&geoqa(&["validate", out.to_str().unwrap()])), 0);
    let doc = geoqa_core::dataset::import_json(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc.qa_pairs.len(), 1);

    // A second session file imports it and re-exports identical bytes.
    let other = dir.path().join("other.json");
    let o = geoqa(&["--session", other.to_str().unwrap(), "import", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let again = dir.path().join("again.json");
    assert_eq!(code(&geoqa(&["--session", other.to_str().unwrap(), "export", "-o", again.to_str().unwrap()])), 0);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());

    // Cache export, purge, import.
    let exported = dir.path().join("cache-fixtures");
    let c = cache.to_str().unwrap();
    assert_eq!(code(&geoqa(&["--cache", c, "cache", "export", exported.to_str().unwrap()])), 0);
    assert_eq!(code(&geoqa(&["--cache", c, "cache", "purge"])), 0);
    assert!(stdout(&geoqa(&["--cache", c, "cache", "stats"])).contains("entries: 0"));
    assert_eq!(code(&geoqa(&["--cache", c, "cache", "import", exported.to_str().unwrap()])), 0);
    assert!(!stdout(&geoqa(&["--cache", c, "cache", "stats"])).contains("entries: 0"));
}

#[test]
fn scenario_export_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = workspace_root().join("fixtures/scenarios.json");
    let fixtures = fixture_dir();
    let mut outputs = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.path().join(name);
        let o = geoqa(&[
            "export", "--scenarios", scenarios.to_str().unwrap(), "--fixtures", fixtures.to_str().unwrap(),
            "--replay-only", "-o", out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], std::fs::read(workspace_root().join("fixtures/golden/dataset.json")).unwrap());
}

#[test]
fn live_failure_exits_two_without_leaking_the_key() {
    let stub = StubServer::start(|target| (403, format!("{{\"error\":\"denied\",\"echo\":\"{target}\"}}").into_bytes()));
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("geoqa.toml");
    std::fs::write(
        &config,
        format!(
            "upstream_origin = \"{}\"\ncache_path = \"cache.redb\"\n[gateway]\nmode = \"record\"\nfixture_dir = \"recorded\"\nretries = 0\nrate_limit_per_sec = 0.0\n",
            stub.origin
        ),
    )
    .unwrap();
    let envs = [("TOMTOM_API_KEY", SENTINEL), ("GOOGLE_MAPS_API_KEY", SENTINEL)];
    let o = geoqa_in(dir.path(), &["--config", "geoqa.toml", "search", "--provider", "tomtom", "Louvre Museum"], &envs);
    assert_eq!(code(&o), 2);
    assert!(stub.count() >= 1);
    let o2 = geoqa_in(
        dir.path(),
        &["--config", "geoqa.toml", "--json", "search", "--provider", "tomtom", "Louvre Museum"],
        &envs,
    );
    assert_eq!(code(&o2), 2);

    // Successful echoing provider: recorded fixture, cache and output stay clean.
    let ok = StubServer::start(|target| (200, format!("{{\"summary\":{{}},\"results\":[],\"echo\":\"{target}\"}}").into_bytes()));
    std::fs::write(&config, std::fs::read_to_string(&config).unwrap().replace(&stub.origin, &ok.origin)).unwrap();
    let o3 = geoqa_in(dir.path(), &["--config", "geoqa.toml", "--json", "search", "--provider", "tomtom", "Louvre Museum"], &envs);
    assert_eq!(code(&o3), 0, "{}", String::from_utf8_lossy(&o3.stderr));
    assert!(std::fs::read_dir(dir.path().join("recorded")).unwrap().count() == 1);

    for o in [&o, &o2, &o3] {
        assert!(!contains(&o.stdout, SENTINEL));
        assert!(!contains(&o.stderr, SENTINEL));
    }
    for f in files_under(dir.path()) {
        assert!(!contains(&std::fs::read(&f).unwrap(), SENTINEL), "{}", f.display());
    }
}
