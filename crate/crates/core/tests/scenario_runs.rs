use std::path::Path;
use std::process::Command;

use llmnet::contract::{ContractState, QualityCriteria};
use llmnet::debate::transcript_from_chain;
use llmnet::ledger::{Chain, EntryKind};
use llmnet::reputation::evaluations_from_chain;
use llmnet::scenario::{
    run_scenario, verify_run, RunReport, ScenarioConfig, BUNDLED_SCENARIOS, REPORT_FILE,
};

fn bundled(name: &str) -> ScenarioConfig {
    ScenarioConfig::bundled(name).unwrap()
}

fn ledger_text(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("ledger.ndjson")).unwrap()
}

#[test]
fn equal_seeds_give_identical_dumps() {
    for (name, _) in BUNDLED_SCENARIOS {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_scenario(&bundled(name), a.path()).unwrap();
        run_scenario(&bundled(name), b.path()).unwrap();
        assert_eq!(ledger_text(a.path()), ledger_text(b.path()), "{name}");
        assert_eq!(
            std::fs::read(a.path().join(REPORT_FILE)).unwrap(),
            std::fs::read(b.path().join(REPORT_FILE)).unwrap()
        );
    }
}

#[test]
fn seeds_change_only_the_run_metadata() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut other = bundled("primes-claude");
    other.seed = 99;
    let ra = run_scenario(&bundled("primes-claude"), a.path()).unwrap();
    let rb = run_scenario(&other, b.path()).unwrap();
    assert_ne!(ledger_text(a.path()), ledger_text(b.path()));
    let entries = |c: &Chain| -> Vec<_> { c.entries().cloned().collect() };
    let (ea, eb) = (entries(&ra.chain), entries(&rb.chain));
    assert_eq!(ea.len(), eb.len());
    for (x, y) in ea.iter().zip(&eb) {
        if x.entry_kind == EntryKind::RunMetadata {
            assert_ne!(x.payload, y.payload);
        } else {
            assert_eq!(x, y);
        }
    }
    for (qa, qb) in ra.queries.iter().zip(&rb.queries) {
        assert_eq!(qa.transcript, qb.transcript);
        assert_eq!(qa.evaluations, qb.evaluations);
    }
}

#[test]
fn chain_round_trips_match_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_scenario(&bundled("primes-llama"), dir.path()).unwrap();
    let all_evals = evaluations_from_chain(&run.chain).unwrap();
    let in_memory: Vec<_> = run
        .queries
        .iter()
        .flat_map(|q| q.evaluations.clone())
        .collect();
    assert_eq!(all_evals, in_memory);
    for q in &run.queries {
        let t = q.transcript.as_ref().unwrap();
        assert_eq!(
            &transcript_from_chain(&run.chain, &t.contract_id).unwrap(),
            t
        );
    }
    let dumped = Chain::from_ndjson(&ledger_text(dir.path())).unwrap();
    assert_eq!(dumped, run.chain);
}

#[test]
fn report_paths_exist_and_parse() {
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&bundled("primes-grok"), dir.path()).unwrap();
    let report: RunReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap())
            .unwrap();
    assert!(report.verification.valid);
    for q in &report.queries {
        for path in [&q.selection, &q.transcript, &q.evaluations]
            .into_iter()
            .flatten()
        {
            let text = std::fs::read_to_string(dir.path().join(path)).unwrap();
            serde_json::from_str::<serde_json::Value>(&text).unwrap();
        }
    }
    verify_run(&dir.path().join(&report.ledger)).unwrap();
}

#[test]
fn a_failed_query_does_not_stop_the_scenario() {
    let mut c = bundled("primes-claude");
    c.queries[0].quality_criteria = Some(QualityCriteria::ExpectedAnswer {
        answer: "62".into(),
    });
    let dir = tempfile::tempdir().unwrap();
    let run = run_scenario(&c, dir.path()).unwrap();
    assert!(matches!(
        run.queries[0].final_state,
        Some(ContractState::Failed(_))
    ));
    assert!(run.queries[0]
        .failure
        .as_ref()
        .unwrap()
        .contains("quality check failed"));
    assert!(run.queries[1].completed());
    // no evaluations were recorded, so query 2 is a cold start
    assert!(run.queries[1]
        .selection
        .as_ref()
        .unwrap()
        .excluded
        .is_empty());
    assert!(
        run.report.verification.valid,
        "{:?}",
        run.report.verification.violations
    );
}

#[test]
fn tampered_dump_fails_at_the_edited_block() {
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&bundled("primes-claude"), dir.path()).unwrap();
    let text = ledger_text(dir.path());
    let line = text
        .lines()
        .position(|l| l.contains("Yes, 61 is right"))
        .unwrap();
    let edited = text.replacen("Yes, 61 is right", "Yes, 67 is right", 1);
    let path = dir.path().join("edited.ndjson");
    std::fs::write(&path, edited).unwrap();
    let v = verify_run(&path).unwrap();
    assert!(!v.valid);
    assert_eq!(v.chain.failing_index(), Some(line as u64));
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_llmnet"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let ok = cli()
        .args(["run", "--config", "primes-claude", "--out"])
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert_eq!(ok.code(), Some(0));
    let verified = cli()
        .args(["verify", "--ledger"])
        .arg(out.join("ledger.ndjson"))
        .output()
        .unwrap()
        .status;
    assert_eq!(verified.code(), Some(0));
    let report = cli().args(["report", "--out"]).arg(&out).output().unwrap();
    assert!(String::from_utf8(report.stdout)
        .unwrap()
        .contains("excluded resp1"));

    let mut c = bundled("primes-claude");
    c.nodes.retain(|n| n.id.as_str() != "validator-1");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&c).unwrap()).unwrap();
    let config_error = cli()
        .args(["run", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap()
        .status;
    assert_eq!(config_error.code(), Some(1));

    let text = ledger_text(&out).replacen("Yes, 61 is right", "Yes, 67 is right", 1);
    let tampered = dir.path().join("tampered.ndjson");
    std::fs::write(&tampered, text).unwrap();
    let failed = cli()
        .args(["verify", "--ledger"])
        .arg(&tampered)
        .output()
        .unwrap()
        .status;
    assert_eq!(failed.code(), Some(2));
}
