// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;

use blockfuzz::campaign::{load_records, run_campaign, summarize};
use blockfuzz::{BlockCatalog, CampaignConfig, Dialect, ToolAdapter};

fn config(out: &Path, cases: usize) -> CampaignConfig {
    let mut cfg = CampaignConfig {
        out: out.to_path_buf(),
        ..Default::default()
    };
    cfg.generation.seed = 11;
    cfg.generation.block_count_target = 20;
    cfg.generation.dialects = vec![Dialect::Verilog];
    cfg.limits.cases = cases;
    cfg.limits.cycles = 8;
    cfg
}

fn faithful() -> Vec<ToolAdapter> {
    vec![
        ToolAdapter::simulator("replay-a", "cat {golden} > {output}"),
        ToolAdapter::simulator("replay-b", "cp {golden} {output}"),
    ]
}

/// Replays the golden trace, except in one case where it zeroes every value.
fn faulty_in(case: &str) -> ToolAdapter {
    let cmd = format!(
        "case \"{{dir}}\" in *{case}*) sed 's/=[0-9a-f]*@/=0@/; s/=0@/=1@/' {{golden}} > {{output}};; *) cat {{golden}} > {{output}};; esac"
    );
    ToolAdapter::simulator("faulty", &cmd)
}

#[test]
fn generate_only_writes_designs_and_testbenches() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 10);
    cfg.limits.generate_only = true;
    cfg.generation.dialects = Dialect::ALL.to_vec();
    let stats = run_campaign(&cfg, &BlockCatalog::standard()).unwrap();
    assert_eq!(stats.cases.len(), 10);
    assert_eq!(stats.tally.get("generated"), Some(&10));
    let case = tmp.path().join("cases/case-000003");
    for f in [
        "model.json",
        "golden.trace",
        "design.v",
        "design.vhd",
        "design.sv",
        "verdict.json",
    ] {
        assert!(case.join(f).is_file(), "missing {f}");
    }
    assert!(tmp.path().join("report.md").is_file());
}

#[test]
fn one_injected_fault_is_one_defect() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 50);
    cfg.adapters = faithful();
    cfg.adapters.push(faulty_in("case-000017"));
    cfg.limits.jobs = 2;
    let stats = run_campaign(&cfg, &BlockCatalog::standard()).unwrap();
    assert_eq!(stats.unique_defects, 1, "{:?}", stats.tally);
    assert_eq!(stats.tally.get("miscompilation"), Some(&1));
    assert_eq!(stats.tally.get("consistent"), Some(&49));
    let row = &stats.defects[0];
    assert_eq!(row.case_id, "case-000017");
    assert_eq!(row.tools, vec!["faulty".to_string()]);
    assert!(tmp
        .path()
        .join("defects")
        .join(&row.signature)
        .join("report.json")
        .is_file());
}

#[test]
fn stats_repeat_exactly_and_resume_skips_finished_cases() {
    let cat = BlockCatalog::standard();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut ca = config(a.path(), 6);
    ca.adapters = faithful();
    let mut cb = ca.clone();
    cb.out = b.path().to_path_buf();
    run_campaign(&ca, &cat).unwrap();
    run_campaign(&cb, &cat).unwrap();
    let stats = |p: &Path| fs::read_to_string(p.join("stats.json")).unwrap();
    assert_eq!(stats(a.path()), stats(b.path()));

    // A finished case is left alone; a deleted one is regenerated identically.
    let done = a.path().join("cases/case-000001/verdict.json");
    let before = fs::metadata(&done).unwrap().modified().unwrap();
    let model = a.path().join("cases/case-000004/model.json");
    let original = fs::read_to_string(&model).unwrap();
    fs::remove_dir_all(a.path().join("cases/case-000004")).unwrap();
    run_campaign(&ca, &cat).unwrap();
    assert_eq!(fs::metadata(&done).unwrap().modified().unwrap(), before);
    assert_eq!(fs::read_to_string(&model).unwrap(), original);
    assert_eq!(stats(a.path()), stats(b.path()));
}

#[test]
fn a_deleted_case_drops_out_of_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 4);
    cfg.limits.generate_only = true;
    run_campaign(&cfg, &BlockCatalog::standard()).unwrap();
    fs::remove_dir_all(tmp.path().join("cases/case-000002")).unwrap();
    let stats = summarize(tmp.path()).unwrap();
    assert_eq!(stats.cases.len(), 3);
    assert_eq!(load_records(tmp.path()).unwrap().len(), 3);
}

#[test]
fn interrupted_case_is_redone() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 2);
    cfg.adapters = faithful();
    let cat = BlockCatalog::standard();
    run_campaign(&cfg, &cat).unwrap();
    let case = tmp.path().join("cases/case-000000");
    fs::remove_file(case.join("verdict.json")).unwrap();
    fs::write(case.join("stray.txt"), "partial").unwrap();
    let stats = run_campaign(&cfg, &cat).unwrap();
    assert!(!case.join("stray.txt").exists());
    assert_eq!(stats.tally.get("consistent"), Some(&2));
}
