use std::path::PathBuf;

use aotmpc::scenario::{run_all, stats_table, verify_transcript, ScenarioConfig};
use aotmpc::transcript::Transcript;

fn bundled() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn every_bundled_scenario_meets_its_expectation() {
    let files = bundled();
    assert!(files.len() >= 25);
    let mut runs = Vec::new();
    for f in &files {
        let cfg = ScenarioConfig::load(f).unwrap();
        let reports = run_all(&cfg).unwrap();
        for r in &reports {
            assert!(r.ok(), "{} seed {}: {} {:?}", cfg.name, r.seed, r.outcome, r.findings);
            // what the CLI writes out verifies after a round trip through text
            let t = Transcript::parse(&r.transcript.to_text()).unwrap();
            assert_eq!(verify_transcript(&t, &cfg), Vec::<String>::new(), "{}", cfg.name);
        }
        runs.push((cfg, reports));
    }
    let table = stats_table(&runs);
    assert_eq!(table.lines().count(), files.len() + 1);
}

#[test]
fn edited_transcripts_are_caught() {
    let f = bundled().into_iter().find(|p| p.ends_with("gcot.toml")).unwrap();
    let cfg = ScenarioConfig::load(&f).unwrap();
    let rep = run_all(&cfg).unwrap().remove(0);
    let text = rep.transcript.to_text();
    let without_outcome: String = text
        .lines()
        .filter(|l| !l.contains("|OUTCOME|"))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_ne!(without_outcome, text);
    let t = Transcript::parse(&without_outcome).unwrap();
    assert!(!verify_transcript(&t, &cfg).is_empty());
    let other_code = text.replacen("# code=16,13,", "# code=16,12,", 1);
    assert_ne!(other_code, text);
    let t = Transcript::parse(&other_code).unwrap();
    assert!(!verify_transcript(&t, &cfg).is_empty());
}
