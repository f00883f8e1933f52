// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::time::Duration;

use blockfuzz::harness::{compare, run_case, Case, Outcome, RunResult};
use blockfuzz::hdl::emit;
use blockfuzz::interp::{make_stimulus, simulate};
use blockfuzz::{
    generate_default, BlockCatalog, Classification, Dialect, GenerationConfig, ToolAdapter,
};

fn case(seed: u64) -> Case {
    let cat = BlockCatalog::standard();
    let m = generate_default(&GenerationConfig::with_seed(seed, 20), &cat).unwrap();
    let stimulus = make_stimulus(&m, &cat, seed, 8);
    let golden = simulate(&m, &stimulus, &cat);
    Case {
        design: emit(&m, Dialect::Verilog, &cat).unwrap(),
        stimulus,
        golden,
    }
}

fn run(c: &Case, adapters: &[ToolAdapter], dir: &Path) -> Vec<RunResult> {
    run_case(c, adapters, dir).unwrap()
}

fn replay(name: &str) -> ToolAdapter {
    ToolAdapter::simulator(name, "cat {golden} > {output}")
}

#[test]
fn faithful_tools_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let c = case(1);
    let rs = run(&c, &[replay("a"), replay("b")], tmp.path());
    assert!(rs.iter().all(|r| r.outcome == Outcome::Completed));
    assert!(rs.iter().all(|r| r.dir.join("cmd.sh").is_file()));
    assert_eq!(
        compare(&rs, &c.golden).classification,
        Classification::Consistent
    );
}

#[test]
fn a_signal_is_a_crash() {
    let tmp = tempfile::tempdir().unwrap();
    let c = case(2);
    let rs = run(
        &c,
        &[replay("a"), ToolAdapter::simulator("dies", "kill -ABRT $$")],
        tmp.path(),
    );
    let dies = rs.iter().find(|r| r.adapter == "dies").unwrap();
    assert_eq!(
        dies.outcome,
        Outcome::Crashed {
            code: None,
            signal: Some(6)
        }
    );
    let v = compare(&rs, &c.golden);
    assert_eq!(
        v.classification,
        Classification::Crash {
            tool: "dies".into()
        }
    );
    assert!(v.signature.unwrap().key.contains("signal 6"));
}

#[test]
fn timeout_is_enforced_within_a_second() {
    let tmp = tempfile::tempdir().unwrap();
    let c = case(3);
    let slow = ToolAdapter::simulator("slow", "sleep 30").with_timeout(1.0);
    let rs = run(&c, &[replay("a"), slow], tmp.path());
    let r = rs.iter().find(|r| r.adapter == "slow").unwrap();
    assert_eq!(r.outcome, Outcome::TimedOut);
    assert!(
        r.wall_time >= Duration::from_secs(1) && r.wall_time < Duration::from_secs(2),
        "{:?}",
        r.wall_time
    );
    assert_eq!(
        compare(&rs, &c.golden).classification,
        Classification::Timeout {
            tool: "slow".into()
        }
    );
}

#[test]
fn a_disagreeing_tool_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let c = case(4);
    let wrong = ToolAdapter::simulator(
        "wrong",
        "sed 's/=[0-9a-f]*@/=0@/; s/=0@/=1@/' {golden} > {output}",
    );
    let rs = run(&c, &[replay("a"), wrong], tmp.path());
    match compare(&rs, &c.golden).classification {
        Classification::Miscompilation { tools, .. } => {
            assert_eq!(tools, vec!["wrong".to_string()])
        }
        other => panic!("{other}"),
    }
}

#[test]
fn empty_adapter_list_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_case(&case(5), &[], tmp.path()).is_err());
}
