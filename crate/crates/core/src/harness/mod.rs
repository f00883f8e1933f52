// SPDX-License-Identifier: Apache-2.0

//! Differential testing: external tools run in private sandboxes, their
//! traces are compared with the interpreter's golden trace and with each
//! other, and failures are classified and keyed for deduplication.

mod testbench;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use testbench::{make_cxxrtl_driver, make_testbench, testbench_file, TB_NAME};

use crate::error::HarnessError;
use crate::hdl::{Dialect, HdlDesign};
use crate::interp::{split_line, Stimulus, Trace};

/// Default per-invocation timeout in seconds.
pub const DEFAULT_TIMEOUT_SECS: f64 = 300.0;

/// Placeholders a command template may use.
pub const PLACEHOLDERS: [&str; 8] = [
    "input",
    "output",
    "top",
    "testbench",
    "dir",
    "netlist",
    "golden",
    "tb_top",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    /// Accepts or rejects the design; only crashes and timeouts matter.
    Synthesis,
    /// Produces a trace from the design and testbench.
    Simulation,
    /// Exit 0 means equivalent, exit 1 means not equivalent.
    Equivalence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestbenchFlavor {
    /// HDL testbench in the design's dialect.
    #[default]
    Hdl,
    /// C++ driver for a CXXRTL model.
    Cxxrtl,
}

/// One external tool. Templates run under `sh -c` inside the adapter's
/// sandbox directory, so relative file names resolve there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolAdapter {
    pub name: String,
    pub kind: AdapterKind,
    #[serde(default = "all_dialects")]
    pub dialects: Vec<Dialect>,
    /// Synthesis, elaboration or compile step.
    #[serde(default)]
    pub synth: Option<String>,
    #[serde(default)]
    pub simulate: Option<String>,
    #[serde(default)]
    pub equivalence: Option<String>,
    /// Prints the tool version, recorded in defect reports.
    #[serde(default)]
    pub version: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Files the tool is expected to leave behind, relative to its directory.
    #[serde(default)]
    pub artifacts: Vec<String>,
    #[serde(default)]
    pub testbench: TestbenchFlavor,
}

fn all_dialects() -> Vec<Dialect> {
    Dialect::ALL.to_vec()
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}

impl ToolAdapter {
    /// A simulation adapter running one shell command.
    pub fn simulator(name: &str, command: &str) -> Self {
        ToolAdapter {
            name: name.to_string(),
            kind: AdapterKind::Simulation,
            dialects: all_dialects(),
            synth: None,
            simulate: Some(command.to_string()),
            equivalence: None,
            version: None,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            artifacts: Vec::new(),
            testbench: TestbenchFlavor::Hdl,
        }
    }

    pub fn with_timeout(mut self, secs: f64) -> Self {
        self.timeout_secs = secs;
        self
    }

    pub fn templates(&self) -> impl Iterator<Item = &String> {
        [
            &self.synth,
            &self.simulate,
            &self.equivalence,
            &self.version,
        ]
        .into_iter()
        .flatten()
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Adapter(self.name.clone(), m));
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return bad("name must be non-empty and use [A-Za-z0-9_-]".into());
        }
        if !self.timeout_secs.is_finite() || self.timeout_secs <= 0.0 {
            return bad(format!("timeout {} must be positive", self.timeout_secs));
        }
        if self.dialects.is_empty() {
            return bad("no dialect".into());
        }
        let needed = match self.kind {
            AdapterKind::Synthesis => self.synth.is_some(),
            AdapterKind::Simulation => self.simulate.is_some(),
            AdapterKind::Equivalence => self.equivalence.is_some(),
        };
        if !needed {
            return bad(format!("{:?} adapter lacks its command", self.kind));
        }
        for t in self.templates() {
            for p in placeholders(t) {
                if !PLACEHOLDERS.contains(&p.as_str()) {
                    return bad(format!("unknown placeholder {{{p}}}"));
                }
            }
        }
        Ok(())
    }

    pub fn supports(&self, dialect: Dialect) -> bool {
        self.dialects.contains(&dialect)
    }
}

fn placeholders(t: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = t;
    while let Some(i) = rest.find('{') {
        let after = &rest[i + 1..];
        match after.find('}') {
            Some(j)
                if after[..j]
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_')
                    && j > 0 =>
            {
                out.push(after[..j].to_string());
                rest = &after[j + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

fn substitute(t: &str, vars: &BTreeMap<&str, String>) -> String {
    let mut s = t.to_string();
    for (k, v) in vars {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Outcome {
    Completed,
    TimedOut,
    Crashed {
        code: Option<i32>,
        signal: Option<i32>,
    },
}

/// Output trace as printed by a tool. `None` marks an undefined value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolTrace {
    pub outputs: BTreeMap<String, Vec<Option<u64>>>,
    /// `MISMATCH <name> <cycle>` reports from self-checking testbenches.
    pub mismatches: Vec<(String, usize)>,
}

impl ToolTrace {
    /// Lenient reading of tool output: trace lines and mismatch reports
    /// are picked out, everything else is ignored. Digits `x`, `z`, `u`,
    /// `w`, `-` make a value undefined.
    pub fn parse(text: &str) -> ToolTrace {
        let mut t = ToolTrace::default();
        for line in text.lines().map(str::trim) {
            if let Some(rest) = line.strip_prefix("MISMATCH ") {
                let mut it = rest.split_whitespace();
                if let (Some(n), Some(c)) = (it.next(), it.next().and_then(|c| c.parse().ok())) {
                    t.mismatches.push((n.to_string(), c));
                }
                continue;
            }
            let Some((name, value, cycle)) = split_line(line) else {
                continue;
            };
            let v = value.to_ascii_lowercase();
            let bits = if v.chars().any(|c| matches!(c, 'x' | 'z' | 'u' | 'w' | '-')) {
                None
            } else {
                match u64::from_str_radix(&v, 16) {
                    Ok(b) => Some(b),
                    Err(_) => continue,
                }
            };
            let vals = t.outputs.entry(name.to_string()).or_default();
            if vals.len() <= cycle {
                vals.resize(cycle + 1, None);
            }
            vals[cycle] = bits;
        }
        t
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty() && self.mismatches.is_empty()
    }

    /// Earliest point where this trace departs from `golden`, scanning
    /// cycles in order and outputs in port order.
    pub fn first_divergence(&self, golden: &Trace) -> Option<(String, usize)> {
        let mut best: Option<(usize, usize, String)> = None;
        let mut note = |cycle: usize, port: usize, name: &str| {
            if best
                .as_ref()
                .is_none_or(|(c, p, _)| (cycle, port) < (*c, *p))
            {
                best = Some((cycle, port, name.to_string()));
            }
        };
        for (port, o) in golden.outputs.iter().enumerate() {
            let got = self.outputs.get(&o.name);
            for (t, want) in o.values.iter().enumerate() {
                let mask = if o.width >= 64 {
                    u64::MAX
                } else {
                    (1u64 << o.width) - 1
                };
                match got.and_then(|v| v.get(t)).copied().flatten() {
                    Some(v) if v & mask == *want => {}
                    _ => {
                        note(t, port, &o.name);
                        break;
                    }
                }
            }
        }
        for (name, cycle) in &self.mismatches {
            let port = golden
                .outputs
                .iter()
                .position(|o| o.name == *name)
                .unwrap_or(usize::MAX);
            note(*cycle, port, name);
        }
        best.map(|(c, _, n)| (n, c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub adapter: String,
    pub kind: AdapterKind,
    pub outcome: Outcome,
    pub wall_time: Duration,
    pub stdout: String,
    pub stderr: String,
    pub trace: Option<ToolTrace>,
    /// Verdict of an equivalence adapter.
    pub equivalent: Option<bool>,
    pub artifacts: Vec<PathBuf>,
    pub dir: PathBuf,
    pub version: Option<String>,
}

/// A design with its stimulus and the interpreter's trace for it.
#[derive(Debug, Clone)]
pub struct Case {
    pub design: HdlDesign,
    pub stimulus: Stimulus,
    pub golden: Trace,
}

struct Exec {
    outcome: Outcome,
    stdout: String,
    stderr: String,
    elapsed: Duration,
}

/// Runs `sh -c command` in `dir` with a hard timeout on the whole process
/// group. Output goes through files so large logs never block the child.
fn exec(command: &str, dir: &Path, timeout: Duration, tag: &str) -> Result<Exec, HarnessError> {
    let out_path = dir.join(format!("{tag}.stdout"));
    let err_path = dir.join(format!("{tag}.stderr"));
    let out = fs::File::create(&out_path).map_err(|e| HarnessError::sandbox(&out_path, e))?;
    let err = fs::File::create(&err_path).map_err(|e| HarnessError::sandbox(&err_path, e))?;
    let start = Instant::now();
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .current_dir(dir)
        .stdin(Stdio::null())
        .stdout(out)
        .stderr(err)
        .process_group(0)
        .spawn()
        .map_err(|e| HarnessError::sandbox(dir, e))?;
    let status = loop {
        match child
            .try_wait()
            .map_err(|e| HarnessError::sandbox(dir, e))?
        {
            Some(s) => break Some(s),
            None if start.elapsed() >= timeout => {
                // SAFETY: the child leads its own process group, created above.
                unsafe {
                    libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
                }
                let _ = child.wait();
                break None;
            }
            None => std::thread::sleep(Duration::from_millis(5)),
        }
    };
    let elapsed = start.elapsed();
    let read = |p: &Path| {
        fs::read(p)
            .map(|b| String::from_utf8_lossy(&b).into_owned())
            .map_err(|e| HarnessError::sandbox(p, e))
    };
    let outcome = match status {
        None => Outcome::TimedOut,
        Some(s) if s.success() => Outcome::Completed,
        Some(s) => Outcome::Crashed {
            code: s.code(),
            signal: s.signal(),
        },
    };
    Ok(Exec {
        outcome,
        stdout: read(&out_path)?,
        stderr: read(&err_path)?,
        elapsed,
    })
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::sandbox(path, e))
}

fn run_adapter(
    case: &Case,
    adapter: &ToolAdapter,
    sandbox: &Path,
) -> Result<RunResult, HarnessError> {
    let dir = sandbox.join(&adapter.name);
    fs::create_dir_all(&dir).map_err(|e| HarnessError::sandbox(&dir, e))?;
    let design_file = case.design.file_name();
    write(&dir.join(&design_file), &case.design.text)?;
    let (tb_file, tb_text) = match adapter.testbench {
        TestbenchFlavor::Hdl => (
            testbench_file(case.design.dialect),
            make_testbench(&case.design, &case.stimulus, &case.golden),
        ),
        TestbenchFlavor::Cxxrtl => (
            "driver.cpp".to_string(),
            make_cxxrtl_driver(&case.design, &case.stimulus, &case.golden),
        ),
    };
    write(&dir.join(&tb_file), &tb_text)?;
    write(&dir.join("golden.trace"), &case.golden.to_text())?;
    let abs = fs::canonicalize(&dir).map_err(|e| HarnessError::sandbox(&dir, e))?;
    let vars: BTreeMap<&str, String> = [
        ("input", design_file),
        ("output", "trace.txt".to_string()),
        ("top", case.design.top.clone()),
        ("testbench", tb_file),
        ("dir", abs.display().to_string()),
        ("netlist", "netlist.v".to_string()),
        ("golden", "golden.trace".to_string()),
        ("tb_top", TB_NAME.to_string()),
    ]
    .into_iter()
    .collect();
    let timeout = Duration::from_secs_f64(adapter.timeout_secs);
    let mut stdout = String::new();
    let mut stderr = String::new();
    let mut elapsed = Duration::ZERO;
    let mut outcome = Outcome::Completed;
    let mut equivalent = None;
    let steps: Vec<(&str, &String)> = [
        ("synth", &adapter.synth),
        ("simulate", &adapter.simulate),
        ("equivalence", &adapter.equivalence),
    ]
    .into_iter()
    .filter_map(|(tag, t)| t.as_ref().map(|t| (tag, t)))
    .collect();
    let script: Vec<String> = steps.iter().map(|(_, t)| substitute(t, &vars)).collect();
    write(
        &dir.join("cmd.sh"),
        &format!("cd \"$(dirname \"$0\")\" && {}\n", script.join(" && ")),
    )?;
    for (tag, template) in steps {
        let left = timeout.saturating_sub(elapsed);
        let e = exec(&substitute(template, &vars), &dir, left, tag)?;
        elapsed += e.elapsed;
        stdout.push_str(&e.stdout);
        stderr.push_str(&e.stderr);
        outcome = e.outcome;
        if tag == "equivalence" {
            match outcome {
                Outcome::Completed => equivalent = Some(true),
                Outcome::Crashed { code: Some(1), .. } => {
                    equivalent = Some(false);
                    outcome = Outcome::Completed;
                }
                _ => {}
            }
        }
        if outcome != Outcome::Completed {
            break;
        }
    }
    let trace =
        (adapter.kind == AdapterKind::Simulation && outcome == Outcome::Completed).then(|| {
            let file = dir.join("trace.txt");
            let text = fs::read_to_string(&file).unwrap_or_else(|_| stdout.clone());
            ToolTrace::parse(&text)
        });
    let version = match &adapter.version {
        Some(t) => exec(
            &substitute(t, &vars),
            &dir,
            Duration::from_secs(30),
            "version",
        )
        .ok()
        .map(|e| e.stdout.lines().next().unwrap_or("").trim().to_string()),
        None => None,
    };
    let artifacts = adapter
        .artifacts
        .iter()
        .map(|a| dir.join(a))
        .filter(|p| p.exists())
        .collect();
    Ok(RunResult {
        adapter: adapter.name.clone(),
        kind: adapter.kind,
        outcome,
        wall_time: elapsed,
        stdout,
        stderr,
        trace,
        equivalent,
        artifacts,
        dir,
        version,
    })
}

/// Runs every adapter that supports the design's dialect, each in
/// `sandbox/<adapter name>`. Results are ordered by adapter name.
pub fn run_case(
    case: &Case,
    adapters: &[ToolAdapter],
    sandbox: &Path,
) -> Result<Vec<RunResult>, HarnessError> {
    if adapters.is_empty() {
        return Err(HarnessError::Adapter(
            String::new(),
            "no adapters configured".into(),
        ));
    }
    for a in adapters {
        a.check()?;
    }
    fs::create_dir_all(sandbox).map_err(|e| HarnessError::sandbox(sandbox, e))?;
    let mut results: Vec<RunResult> = adapters
        .par_iter()
        .filter(|a| a.supports(case.design.dialect))
        .map(|a| run_adapter(case, a, sandbox))
        .collect::<Result<_, _>>()?;
    results.sort_by(|a, b| a.adapter.cmp(&b.adapter));
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Classification {
    Consistent,
    Crash {
        tool: String,
    },
    Miscompilation {
        tools: Vec<String>,
        output: String,
        cycle: Option<usize>,
    },
    Timeout {
        tool: String,
    },
    Inconclusive {
        reason: String,
    },
}

impl Classification {
    pub fn is_defect(&self) -> bool {
        matches!(
            self,
            Classification::Crash { .. } | Classification::Miscompilation { .. }
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            Classification::Consistent => "consistent",
            Classification::Crash { .. } => "crash",
            Classification::Miscompilation { .. } => "miscompilation",
            Classification::Timeout { .. } => "timeout",
            Classification::Inconclusive { .. } => "inconclusive",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Consistent => f.write_str("consistent"),
            Classification::Crash { tool } => write!(f, "crash in {tool}"),
            Classification::Miscompilation {
                tools,
                output,
                cycle,
            } => {
                write!(f, "miscompilation by {} at {output}", tools.join("+"))?;
                match cycle {
                    Some(c) => write!(f, "@{c}"),
                    None => Ok(()),
                }
            }
            Classification::Timeout { tool } => write!(f, "timeout in {tool}"),
            Classification::Inconclusive { reason } => write!(f, "inconclusive: {reason}"),
        }
    }
}

/// Deduplication key: the readable form and a short hash used for
/// directory names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    pub key: String,
    pub hash: String,
}

impl Signature {
    fn new(key: String) -> Self {
        let digest = Sha256::digest(key.as_bytes());
        let hash = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Signature { key, hash }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffVerdict {
    pub classification: Classification,
    pub signature: Option<Signature>,
}

/// Classifies a set of results. Crashes outrank timeouts, which outrank
/// trace divergence. With three or more traces a lone dissenter against a
/// golden-agreeing majority is named; otherwise every tool diverging from
/// the golden trace is.
pub fn compare(results: &[RunResult], golden: &Trace) -> DiffVerdict {
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.adapter.cmp(&b.adapter));
    let classification = classify(&sorted, golden);
    let signature = if classification.is_defect() {
        signature(&sorted, &classification)
    } else {
        None
    };
    DiffVerdict {
        classification,
        signature,
    }
}

fn classify(results: &[&RunResult], golden: &Trace) -> Classification {
    if results.is_empty() {
        return Classification::Inconclusive {
            reason: "no results".into(),
        };
    }
    if let Some(r) = results
        .iter()
        .find(|r| matches!(r.outcome, Outcome::Crashed { .. }))
    {
        return Classification::Crash {
            tool: r.adapter.clone(),
        };
    }
    if let Some(r) = results.iter().find(|r| r.outcome == Outcome::TimedOut) {
        return Classification::Timeout {
            tool: r.adapter.clone(),
        };
    }
    let mut agree = 0usize;
    let mut diverging: Vec<(&str, String, Option<usize>)> = Vec::new();
    for r in results {
        if r.equivalent == Some(false) {
            diverging.push((&r.adapter, "equivalence".into(), None));
            continue;
        }
        let Some(trace) = &r.trace else { continue };
        if trace.outputs.is_empty() && trace.mismatches.is_empty() {
            return Classification::Inconclusive {
                reason: format!("{} printed no trace", r.adapter),
            };
        }
        match trace.first_divergence(golden) {
            None => agree += 1,
            Some((output, cycle)) => diverging.push((&r.adapter, output, Some(cycle))),
        }
    }
    if diverging.is_empty() {
        return Classification::Consistent;
    }
    let traced = agree + diverging.len();
    let named: Vec<&(&str, String, Option<usize>)> =
        if traced >= 3 && agree >= 2 && diverging.len() == 1 {
            vec![&diverging[0]]
        } else {
            diverging.iter().collect()
        };
    let first = named
        .iter()
        .min_by_key(|d| d.2.unwrap_or(usize::MAX))
        .expect("non-empty");
    Classification::Miscompilation {
        tools: named.iter().map(|d| d.0.to_string()).collect(),
        output: first.1.clone(),
        cycle: first.2,
    }
}

/// Strips run-specific noise from a diagnostic line: path-like tokens,
/// hex addresses and digit runs of four or more.
pub fn normalize_line(line: &str) -> String {
    let mut words = Vec::new();
    for w in line.split_whitespace() {
        if w.contains('/') {
            words.push("<path>".to_string());
            continue;
        }
        let mut out = String::new();
        let chars: Vec<char> = w.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if chars[i] == '0' && matches!(chars.get(i + 1), Some('x') | Some('X')) {
                let mut j = i + 2;
                while j < chars.len() && chars[j].is_ascii_hexdigit() {
                    j += 1;
                }
                if j > i + 2 {
                    out.push_str("<addr>");
                    i = j;
                    continue;
                }
            }
            if chars[i].is_ascii_digit() {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j - i >= 4 {
                    out.push_str("<n>");
                } else {
                    out.extend(&chars[i..j]);
                }
                i = j;
                continue;
            }
            out.push(chars[i]);
            i += 1;
        }
        words.push(out);
    }
    words.join(" ")
}

const MARKERS: [&str; 9] = [
    "assert",
    "panic",
    "fatal",
    "error",
    "fault",
    "abort",
    "exception",
    "terminate",
    "internal",
];

/// The diagnostic line a crash is keyed on: the first line naming an
/// assertion, panic or error, else the last non-empty line, else the exit
/// status.
pub fn crash_line(r: &RunResult) -> String {
    for text in [&r.stderr, &r.stdout] {
        if let Some(l) = text.lines().find(|l| {
            let low = l.to_ascii_lowercase();
            MARKERS.iter().any(|m| low.contains(m))
        }) {
            return normalize_line(l);
        }
    }
    if let Some(l) = r
        .stderr
        .lines()
        .chain(r.stdout.lines())
        .rfind(|l| !l.trim().is_empty())
    {
        return normalize_line(l);
    }
    match &r.outcome {
        Outcome::Crashed {
            signal: Some(s), ..
        } => format!("signal {s}"),
        Outcome::Crashed { code: Some(c), .. } => format!("exit {c}"),
        _ => "unknown".into(),
    }
}

/// Deduplication key for a defect verdict.
pub fn signature(results: &[&RunResult], c: &Classification) -> Option<Signature> {
    match c {
        Classification::Crash { tool } => {
            let r = results.iter().find(|r| &r.adapter == tool)?;
            Some(Signature::new(format!("crash|{tool}|{}", crash_line(r))))
        }
        Classification::Miscompilation { tools, output, .. } => Some(Signature::new(format!(
            "miscompilation|{}|{output}",
            tools.join("+")
        ))),
        _ => None,
    }
}

/// Reproducible record of one defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub case_id: String,
    pub dialect: Dialect,
    pub verdict: Classification,
    pub signature: Signature,
    /// Sandbox directories of every tool run on the case.
    pub artifacts: Vec<PathBuf>,
    #[serde(default)]
    pub reduced_artifacts: Vec<PathBuf>,
    pub tool_versions: BTreeMap<String, String>,
    /// Shell command replaying the flagged tool in its sandbox.
    pub reproduce: String,
    /// Other cases with the same signature.
    #[serde(default)]
    pub occurrences: Vec<String>,
    /// Automatic deduplication may merge distinct defects or split one.
    pub needs_review: bool,
}

impl DefectReport {
    /// `None` unless the verdict is a defect with a signature.
    pub fn new(
        case_id: &str,
        dialect: Dialect,
        verdict: &DiffVerdict,
        results: &[RunResult],
    ) -> Option<Self> {
        let signature = verdict.signature.clone()?;
        let flagged = match &verdict.classification {
            Classification::Crash { tool } => tool.clone(),
            Classification::Miscompilation { tools, .. } => tools.first()?.clone(),
            _ => return None,
        };
        let mut artifacts = Vec::new();
        let mut tool_versions = BTreeMap::new();
        let mut reproduce = String::new();
        for r in results {
            artifacts.push(r.dir.clone());
            if let Some(v) = &r.version {
                tool_versions.insert(r.adapter.clone(), v.clone());
            }
            if r.adapter == flagged {
                reproduce = format!("sh {}", r.dir.join("cmd.sh").display());
            }
        }
        Some(DefectReport {
            case_id: case_id.to_string(),
            dialect,
            verdict: verdict.classification.clone(),
            signature,
            artifacts,
            reduced_artifacts: Vec::new(),
            tool_versions,
            reproduce,
            occurrences: Vec::new(),
            needs_review: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::TraceOutput;

    fn golden() -> Trace {
        Trace {
            cycles: 3,
            reset_cycles: 2,
            outputs: vec![
                TraceOutput {
                    name: "out1".into(),
                    width: 8,
                    values: vec![1, 2, 3],
                },
                TraceOutput {
                    name: "out2".into(),
                    width: 1,
                    values: vec![0, 1, 0],
                },
            ],
        }
    }

    fn result(name: &str, trace: Option<&str>, outcome: Outcome, stderr: &str) -> RunResult {
        RunResult {
            adapter: name.into(),
            kind: AdapterKind::Simulation,
            outcome,
            wall_time: Duration::ZERO,
            stdout: String::new(),
            stderr: stderr.into(),
            trace: trace.map(ToolTrace::parse),
            equivalent: None,
            artifacts: Vec::new(),
            dir: PathBuf::new(),
            version: None,
        }
    }

    #[test]
    fn placeholder_scan() {
        assert_eq!(
            placeholders("a {input} {x_y} {} {top"),
            vec!["input", "x_y"]
        );
        let a = ToolAdapter::simulator("bad", "run {nope}");
        assert!(matches!(a.check(), Err(HarnessError::Adapter(..))));
        assert!(ToolAdapter::simulator("ok", "cat {golden} > {output}")
            .check()
            .is_ok());
        assert!(ToolAdapter::simulator("ok", "x")
            .with_timeout(0.0)
            .check()
            .is_err());
    }

    #[test]
    fn golden_replay_is_consistent() {
        let g = golden();
        let r = result("a", Some(&g.to_text()), Outcome::Completed, "");
        assert_eq!(compare(&[r], &g).classification, Classification::Consistent);
    }

    #[test]
    fn undefined_values_diverge() {
        let g = golden();
        let text = g.to_text().replace("out1=02@1", "out1=xx@1");
        let v = compare(&[result("a", Some(&text), Outcome::Completed, "")], &g);
        assert_eq!(
            v.classification,
            Classification::Miscompilation {
                tools: vec!["a".into()],
                output: "out1".into(),
                cycle: Some(1)
            }
        );
        assert!(v.signature.is_some());
    }

    #[test]
    fn majority_names_the_dissenter() {
        let g = golden();
        let good = g.to_text();
        let bad = good.replace("out2=1@1", "out2=0@1");
        let rs = vec![
            result("c", Some(&bad), Outcome::Completed, ""),
            result("a", Some(&good), Outcome::Completed, ""),
            result("b", Some(&good), Outcome::Completed, ""),
        ];
        match compare(&rs, &g).classification {
            Classification::Miscompilation {
                tools,
                output,
                cycle,
            } => {
                assert_eq!(
                    (tools, output.as_str(), cycle),
                    (vec!["c".to_string()], "out2", Some(1))
                );
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn crash_signatures_ignore_paths_and_addresses() {
        let g = golden();
        let crash = Outcome::Crashed {
            code: Some(134),
            signal: None,
        };
        let a = result(
            "syn",
            None,
            crash.clone(),
            "Assertion failed: HARTRegInfo::Synchronousity at /tmp/a1/x.cpp:12345 0xdeadbeef",
        );
        let b = result(
            "syn",
            None,
            crash.clone(),
            "Assertion failed: HARTRegInfo::Synchronousity at /tmp/zz/x.cpp:12399 0x1234",
        );
        let c = result(
            "syn",
            None,
            crash,
            "Assertion failed: Other::check at /tmp/zz/x.cpp:1",
        );
        let (va, vb, vc) = (compare(&[a], &g), compare(&[b], &g), compare(&[c], &g));
        assert_eq!(
            va.classification,
            Classification::Crash { tool: "syn".into() }
        );
        assert_eq!(va.signature, vb.signature);
        assert_ne!(va.signature, vc.signature);
    }

    #[test]
    fn mismatch_lines_count() {
        let t = ToolTrace::parse("noise\nout1=01@0\nMISMATCH out1 0\n");
        assert_eq!(t.mismatches, vec![("out1".to_string(), 0)]);
    }
}
