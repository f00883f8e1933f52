// SPDX-License-Identifier: Apache-2.0

//! Campaign driver: generate, optimize, emit, simulate, run tools, persist
//! and summarize. All aggregate output is recomputed from the per-case
//! records on disk, so resuming or deleting cases keeps the summary sound.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::catalog::BlockCatalog;
use crate::error::{CampaignError, ReduceError};
use crate::generator::{
    default_matrix, generate_model, syntax_guidance, GenerationConfig, ProbabilityMatrix,
};
use crate::harness::{
    compare, make_testbench, run_case, testbench_file, Case, DefectReport, DiffVerdict, ToolAdapter,
};
use crate::hdl::{emit, optimize, Dialect, Strategy, DEFAULT_LEVELS};
use crate::interp::{make_stimulus, simulate};
use crate::model::{ComplexityMetrics, ModelGraph};
use crate::reducer::{reduce, ReduceOptions, ReductionResult, DEFAULT_BUDGET};
use crate::rng::derive;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub cases: usize,
    pub jobs: usize,
    /// No case starts after this many seconds.
    pub wall_time_secs: Option<f64>,
    /// Stop starting cases once a defect is seen.
    pub first_defect: bool,
    pub generate_only: bool,
    /// Stimulus length after reset.
    pub cycles: usize,
    /// Pipelining depths offered to the optimizer.
    pub levels: u32,
    pub reduce_budget: usize,
    /// Re-run every adapter during reduction, not only the flagged ones.
    pub reduce_all_adapters: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            cases: 10,
            jobs: 1,
            wall_time_secs: None,
            first_defect: false,
            generate_only: false,
            cycles: 32,
            levels: DEFAULT_LEVELS,
            reduce_budget: DEFAULT_BUDGET,
            reduce_all_adapters: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub generation: GenerationConfig,
    /// JSON file of probability-matrix overrides.
    pub matrix: Option<PathBuf>,
    pub adapters: Vec<ToolAdapter>,
    pub limits: Limits,
    pub out: PathBuf,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            generation: GenerationConfig::default(),
            matrix: None,
            adapters: Vec::new(),
            limits: Limits::default(),
            out: PathBuf::from("campaign"),
        }
    }
}

impl CampaignConfig {
    /// Reads a config file. A relative matrix path resolves against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let mut cfg: CampaignConfig = read_json(path)?;
        if let (Some(m), Some(dir)) = (&cfg.matrix, path.parent()) {
            if m.is_relative() {
                cfg.matrix = Some(dir.join(m));
            }
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CampaignError> {
        let bad = |m: &str| Err(CampaignError::Config(m.to_string()));
        self.generation.check()?;
        if self.limits.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        if self.limits.cycles == 0 {
            return bad("cycles must be at least 1");
        }
        if self.limits.reduce_budget == 0 {
            return bad("reduce_budget must be at least 1");
        }
        if self.adapters.is_empty() && !self.limits.generate_only {
            return bad("no adapters configured; pass --generate-only to only generate");
        }
        let mut names = std::collections::BTreeSet::new();
        for a in &self.adapters {
            a.check()?;
            if !names.insert(&a.name) {
                return Err(CampaignError::Config(format!(
                    "adapter `{}` defined twice",
                    a.name
                )));
            }
        }
        Ok(())
    }

    pub fn matrix(&self, catalog: &BlockCatalog) -> Result<ProbabilityMatrix, CampaignError> {
        let base = default_matrix(catalog);
        match &self.matrix {
            None => Ok(base),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CampaignError::io(p, e))?;
                Ok(base.with_overrides(&text)?)
            }
        }
    }
}

pub fn case_id(index: usize) -> String {
    format!("case-{index:06}")
}

/// Seed of case `index` under campaign seed `seed`.
pub fn case_seed(seed: u64, index: usize) -> u64 {
    derive(seed, index as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialectVerdict {
    pub dialect: Dialect,
    pub verdict: DiffVerdict,
}

/// Everything deterministic about one case, written last as `verdict.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub index: usize,
    pub seed: u64,
    pub cycles: usize,
    /// Of the generated model.
    pub metrics: Option<ComplexityMetrics>,
    /// Of the optimized model that was emitted.
    #[serde(default)]
    pub emitted_metrics: Option<ComplexityMetrics>,
    pub strategy: Option<Strategy>,
    pub latency: u32,
    #[serde(default)]
    pub verdicts: Vec<DialectVerdict>,
    /// Generation or infrastructure failure, if any.
    pub error: Option<String>,
    #[serde(default)]
    pub infrastructure: bool,
}

impl CaseRecord {
    pub fn label(&self) -> &'static str {
        if self.error.is_some() {
            return if self.infrastructure {
                "infrastructure_error"
            } else {
                "generation_failed"
            };
        }
        const RANK: [&str; 5] = [
            "crash",
            "miscompilation",
            "timeout",
            "inconclusive",
            "consistent",
        ];
        self.verdicts
            .iter()
            .map(|v| v.verdict.classification.label())
            .min_by_key(|l| RANK.iter().position(|r| r == l))
            .unwrap_or("generated")
    }

    pub fn has_defect(&self) -> bool {
        self.verdicts
            .iter()
            .any(|v| v.verdict.classification.is_defect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CaseTiming {
    /// Generation, optimization and emission.
    pub generation_secs: f64,
    pub tool_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub id: String,
    pub seed: u64,
    pub verdict: String,
    pub metrics: Option<ComplexityMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectRow {
    pub signature: String,
    pub key: String,
    pub kind: String,
    pub tools: Vec<String>,
    pub case_id: String,
    pub occurrences: usize,
    pub reduced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Medians {
    pub node_count: f64,
    pub connection_count: f64,
    pub reference_count: f64,
}

/// Deterministic campaign summary written as `stats.json`. Wall times
/// live in `timing.json` so this file repeats exactly across runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CampaignStats {
    pub cases: Vec<CaseSummary>,
    pub tally: BTreeMap<String, usize>,
    pub unique_defects: usize,
    pub defects: Vec<DefectRow>,
    /// Over cases that generated successfully.
    pub medians: Option<Medians>,
    #[serde(skip)]
    pub timing: TimingSummary,
}

impl CampaignStats {
    pub fn infrastructure_errors(&self) -> usize {
        self.tally.get("infrastructure_error").copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingSummary {
    pub per_case: BTreeMap<String, CaseTiming>,
    pub median_generation_secs: Option<f64>,
    pub mean_generation_secs: Option<f64>,
    pub median_tool_secs: Option<f64>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CampaignError> {
    let text = fs::read_to_string(path).map_err(|e| CampaignError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CampaignError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CampaignError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CampaignError::io(dir, e))?;
    }
    // Write then rename, so a record is either absent or whole.
    let tmp = path.with_extension("partial");
    fs::write(&tmp, text).map_err(|e| CampaignError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CampaignError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CampaignError> {
    let mut text = serde_json::to_string_pretty(value).expect("records serialize");
    text.push('\n');
    write_text(path, &text)
}

fn cases_dir(out: &Path) -> PathBuf {
    out.join("cases")
}

/// Runs every case not already recorded under `cfg.out`, then summarizes.
pub fn run_campaign(
    cfg: &CampaignConfig,
    catalog: &BlockCatalog,
) -> Result<CampaignStats, CampaignError> {
    cfg.check()?;
    let matrix = cfg.matrix(catalog)?;
    fs::create_dir_all(cases_dir(&cfg.out)).map_err(|e| CampaignError::io(&cfg.out, e))?;
    write_json(&cfg.out.join("config.json"), cfg)?;
    let start = Instant::now();
    let stop = AtomicBool::new(false);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.limits.jobs)
        .build()
        .map_err(|e| CampaignError::Config(e.to_string()))?;
    let outcome: Result<(), CampaignError> = pool.install(|| {
        (0..cfg.limits.cases).into_par_iter().try_for_each(|index| {
            let dir = cases_dir(&cfg.out).join(case_id(index));
            if dir.join("verdict.json").exists() {
                if cfg.limits.first_defect {
                    let rec: CaseRecord = read_json(&dir.join("verdict.json"))?;
                    if rec.has_defect() {
                        stop.store(true, Ordering::SeqCst);
                    }
                }
                return Ok(());
            }
            let late = cfg
                .limits
                .wall_time_secs
                .is_some_and(|t| start.elapsed().as_secs_f64() >= t);
            if late || stop.load(Ordering::SeqCst) {
                return Ok(());
            }
            let rec = run_one(cfg, catalog, &matrix, index, &dir)?;
            if cfg.limits.first_defect && rec.has_defect() {
                stop.store(true, Ordering::SeqCst);
            }
            Ok(())
        })
    });
    outcome?;
    summarize(&cfg.out)
}

fn run_one(
    cfg: &CampaignConfig,
    catalog: &BlockCatalog,
    matrix: &ProbabilityMatrix,
    index: usize,
    dir: &Path,
) -> Result<CaseRecord, CampaignError> {
    if dir.exists() {
        // Left over from an interrupted run.
        fs::remove_dir_all(dir).map_err(|e| CampaignError::io(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| CampaignError::io(dir, e))?;
    let seed = case_seed(cfg.generation.seed, index);
    let mut rec = CaseRecord {
        id: case_id(index),
        index,
        seed,
        cycles: cfg.limits.cycles,
        metrics: None,
        emitted_metrics: None,
        strategy: None,
        latency: 0,
        verdicts: Vec::new(),
        error: None,
        infrastructure: false,
    };
    let mut timing = CaseTiming::default();
    let t0 = Instant::now();
    let gen = GenerationConfig {
        seed,
        ..cfg.generation.clone()
    };
    let mut guide = syntax_guidance(catalog);
    let generated = generate_model(&gen, catalog, matrix, &mut guide);
    let prepared = generated.map_err(CampaignError::from).and_then(|m| {
        let (g, choice, _) = optimize(&m, cfg.limits.levels, catalog);
        let designs = cfg
            .generation
            .dialects
            .iter()
            .map(|&d| emit(&g, d, catalog))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((m.metrics(), g, choice, designs))
    });
    timing.generation_secs = t0.elapsed().as_secs_f64();
    let (generated, g, choice, designs) = match prepared {
        Ok(x) => x,
        Err(e) => {
            rec.error = Some(e.to_string());
            write_json(&dir.join("timing.json"), &timing)?;
            write_json(&dir.join("verdict.json"), &rec)?;
            return Ok(rec);
        }
    };
    rec.metrics = Some(generated);
    rec.emitted_metrics = Some(g.metrics());
    rec.strategy = Some(choice.chosen_strategy());
    rec.latency = choice.latency;
    write_text(&dir.join("model.json"), &g.to_json())?;
    write_json(&dir.join("optimization.json"), &choice)?;
    let stimulus = make_stimulus(&g, catalog, seed, cfg.limits.cycles);
    let golden = simulate(&g, &stimulus, catalog);
    write_text(&dir.join("golden.trace"), &golden.to_text())?;
    for d in &designs {
        write_text(&dir.join(d.file_name()), &d.text)?;
        write_text(
            &dir.join(testbench_file(d.dialect)),
            &make_testbench(d, &stimulus, &golden),
        )?;
    }
    if !cfg.limits.generate_only {
        let t1 = Instant::now();
        let mut per_tool: BTreeMap<String, Vec<serde_json::Value>> = BTreeMap::new();
        for d in designs {
            let dialect = d.dialect;
            let case = Case {
                design: d,
                stimulus: stimulus.clone(),
                golden: golden.clone(),
            };
            let sandbox = dir.join("sandbox").join(dialect.extension());
            let results = match run_case(&case, &cfg.adapters, &sandbox) {
                Ok(r) => r,
                Err(e) => {
                    rec.error = Some(e.to_string());
                    rec.infrastructure = true;
                    break;
                }
            };
            if results.is_empty() {
                continue;
            }
            let verdict = compare(&results, &golden);
            if let Some(report) = DefectReport::new(&rec.id, dialect, &verdict, &results) {
                write_json(
                    &dir.join(format!("defect.{}.json", dialect.extension())),
                    &report,
                )?;
            }
            for r in &results {
                per_tool
                    .entry(r.adapter.clone())
                    .or_default()
                    .push(serde_json::json!({
                        "dialect": dialect,
                        "result": r,
                    }));
            }
            rec.verdicts.push(DialectVerdict { dialect, verdict });
        }
        for (tool, runs) in per_tool {
            write_json(&dir.join("results").join(format!("{tool}.json")), &runs)?;
        }
        timing.tool_secs = t1.elapsed().as_secs_f64();
    }
    write_json(&dir.join("timing.json"), &timing)?;
    write_json(&dir.join("verdict.json"), &rec)?;
    Ok(rec)
}

/// Case records currently on disk, in id order. Incomplete cases are skipped.
pub fn load_records(out: &Path) -> Result<Vec<CaseRecord>, CampaignError> {
    let dir = cases_dir(out);
    let mut recs = Vec::new();
    let entries = match fs::read_dir(&dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(recs),
        Err(e) => return Err(CampaignError::io(&dir, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| CampaignError::io(&dir, e))?;
        let p = entry.path().join("verdict.json");
        if p.exists() {
            recs.push(read_json::<CaseRecord>(&p)?);
        }
    }
    recs.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(recs)
}

/// Recomputes stats, defect reports and the text report from the case
/// records under `out`.
pub fn summarize(out: &Path) -> Result<CampaignStats, CampaignError> {
    let recs = load_records(out)?;
    let mut stats = CampaignStats::default();
    let mut gen_times = Vec::new();
    let mut tool_times = Vec::new();
    let (mut nodes, mut conns, mut refs) = (Vec::new(), Vec::new(), Vec::new());
    let mut defects: BTreeMap<String, DefectReport> = BTreeMap::new();
    for r in &recs {
        *stats.tally.entry(r.label().to_string()).or_default() += 1;
        stats.cases.push(CaseSummary {
            id: r.id.clone(),
            seed: r.seed,
            verdict: r.label().into(),
            metrics: r.metrics,
        });
        let case_dir = cases_dir(out).join(&r.id);
        if let Ok(t) = read_json::<CaseTiming>(&case_dir.join("timing.json")) {
            if r.metrics.is_some() {
                gen_times.push(t.generation_secs);
                if !r.verdicts.is_empty() {
                    tool_times.push(t.tool_secs);
                }
            }
            stats.timing.per_case.insert(r.id.clone(), t);
        }
        if let Some(m) = r.metrics {
            nodes.push(m.node_count as f64);
            conns.push(m.connection_count as f64);
            refs.push(m.reference_count as f64);
        }
        for v in &r.verdicts {
            let Some(sig) = &v.verdict.signature else {
                continue;
            };
            if let Some(d) = defects.get_mut(&sig.hash) {
                if !d.occurrences.contains(&r.id) && d.case_id != r.id {
                    d.occurrences.push(r.id.clone());
                }
                continue;
            }
            let path = case_dir.join(format!("defect.{}.json", v.dialect.extension()));
            let mut report: DefectReport = read_json(&path)?;
            let reduced = case_dir.join("model.reduced.json");
            if reduced.exists() {
                report.reduced_artifacts = reduced_files(&case_dir);
            }
            defects.insert(sig.hash.clone(), report);
        }
    }
    if !nodes.is_empty() {
        stats.medians = Some(Medians {
            node_count: median(&mut nodes).unwrap_or(0.0),
            connection_count: median(&mut conns).unwrap_or(0.0),
            reference_count: median(&mut refs).unwrap_or(0.0),
        });
    }
    stats.timing.median_generation_secs = median(&mut gen_times);
    stats.timing.mean_generation_secs =
        (!gen_times.is_empty()).then(|| gen_times.iter().sum::<f64>() / gen_times.len() as f64);
    stats.timing.median_tool_secs = median(&mut tool_times);
    let defects_dir = out.join("defects");
    if defects_dir.exists() {
        fs::remove_dir_all(&defects_dir).map_err(|e| CampaignError::io(&defects_dir, e))?;
    }
    for (hash, d) in &defects {
        write_json(&defects_dir.join(hash).join("report.json"), d)?;
        stats.defects.push(DefectRow {
            signature: hash.clone(),
            key: d.signature.key.clone(),
            kind: d.verdict.label().to_string(),
            tools: match &d.verdict {
                crate::harness::Classification::Crash { tool } => vec![tool.clone()],
                crate::harness::Classification::Miscompilation { tools, .. } => tools.clone(),
                _ => Vec::new(),
            },
            case_id: d.case_id.clone(),
            occurrences: 1 + d.occurrences.len(),
            reduced: !d.reduced_artifacts.is_empty(),
        });
    }
    stats.unique_defects = defects.len();
    fs::create_dir_all(out).map_err(|e| CampaignError::io(out, e))?;
    write_json(&out.join("stats.json"), &stats)?;
    write_json(&out.join("timing.json"), &stats.timing)?;
    write_text(&out.join("report.md"), &report(&stats))?;
    Ok(stats)
}

fn reduced_files(case_dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(case_dir)
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.contains(".reduced."))
        })
        .collect();
    v.sort();
    v
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or("-".into(), |x| format!("{x:.digits$}"))
}

/// Human-readable summary. Depends only on `stats`, so regenerating it
/// from the same records gives the same bytes.
pub fn report(stats: &CampaignStats) -> String {
    let mut s = String::from("# Campaign report\n\n");
    let count = |k: &str| stats.tally.get(k).copied().unwrap_or(0);
    s.push_str(&format!("Cases: {}\n\n", stats.cases.len()));
    s.push_str("| Verdict | Cases |\n|---|---|\n");
    for k in [
        "consistent",
        "crash",
        "miscompilation",
        "timeout",
        "inconclusive",
        "generated",
        "generation_failed",
        "infrastructure_error",
    ] {
        s.push_str(&format!("| {k} | {} |\n", count(k)));
    }
    s.push_str(&format!("\nUnique defects: {}\n\n", stats.unique_defects));
    let m = stats.medians.unwrap_or_default();
    s.push_str("| Median | Value |\n|---|---|\n");
    s.push_str(&format!("| node_count | {} |\n", m.node_count));
    s.push_str(&format!("| connection_count | {} |\n", m.connection_count));
    s.push_str(&format!("| reference_count | {} |\n", m.reference_count));
    s.push_str(&format!(
        "| generation+emission seconds | {} |\n",
        fmt_opt(stats.timing.median_generation_secs, 4)
    ));
    s.push_str(&format!(
        "| tool seconds | {} |\n",
        fmt_opt(stats.timing.median_tool_secs, 4)
    ));
    s.push_str("\n## Defects\n\n| ID | Summary | Status | Type | Tool |\n|---|---|---|---|---|\n");
    for d in &stats.defects {
        let kind = if d.kind == "crash" { "C" } else { "M" };
        let status = if d.reduced {
            "reduced, needs review"
        } else {
            "needs review"
        };
        let summary = format!(
            "{} ({} case{})",
            d.key.replace('|', " "),
            d.occurrences,
            if d.occurrences == 1 { "" } else { "s" }
        );
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            d.signature,
            summary,
            status,
            kind,
            d.tools.join(", ")
        ));
    }
    s
}

/// Minimizes the case `case` of the campaign under `out` while it keeps
/// the defect with signature hash `signature`. Reduced artifacts are
/// written beside the originals.
pub fn reduce_case(
    cfg: &CampaignConfig,
    catalog: &BlockCatalog,
    out: &Path,
    case: &str,
    signature: &str,
) -> Result<ReductionResult, CampaignError> {
    let dir = cases_dir(out).join(case);
    let rec: CaseRecord = read_json(&dir.join("verdict.json"))?;
    let found = rec
        .verdicts
        .iter()
        .find(|v| {
            v.verdict
                .signature
                .as_ref()
                .is_some_and(|s| s.hash == signature || s.key == signature)
        })
        .ok_or_else(|| {
            CampaignError::Config(format!(
                "case {case} has no defect with signature {signature}"
            ))
        })?;
    let (dialect, expected) = (found.dialect, found.verdict.clone());
    let flagged: Vec<String> = match &expected.classification {
        crate::harness::Classification::Crash { tool } => vec![tool.clone()],
        crate::harness::Classification::Miscompilation { tools, .. } => tools.clone(),
        _ => Vec::new(),
    };
    let adapters: Vec<ToolAdapter> = cfg
        .adapters
        .iter()
        .filter(|a| cfg.limits.reduce_all_adapters || flagged.contains(&a.name))
        .cloned()
        .collect();
    if adapters.is_empty() {
        return Err(CampaignError::Config(format!(
            "none of {flagged:?} is configured"
        )));
    }
    let model = ModelGraph::from_json(
        &fs::read_to_string(dir.join("model.json")).map_err(|e| CampaignError::io(&dir, e))?,
    )
    .map_err(|source| CampaignError::Json {
        path: dir.join("model.json"),
        source,
    })?;
    let work = dir.join("reduce");
    let mut n = 0usize;
    let mut predicate = |g: &ModelGraph| -> Result<bool, ReduceError> {
        n += 1;
        let design = emit(g, dialect, catalog)?;
        let stimulus = make_stimulus(g, catalog, rec.seed, rec.cycles);
        let golden = simulate(g, &stimulus, catalog);
        let sandbox = work.join(format!("eval-{n:04}"));
        let results = run_case(
            &Case {
                design,
                stimulus,
                golden: golden.clone(),
            },
            &adapters,
            &sandbox,
        )
        .map_err(|e| ReduceError::Predicate(e.to_string()))?;
        let v = compare(&results, &golden);
        let _ = fs::remove_dir_all(&sandbox);
        Ok(v.classification.label() == expected.classification.label()
            && v.signature == expected.signature)
    };
    if !predicate(&model)? {
        return Err(ReduceError::TriggerLost.into());
    }
    let opts = ReduceOptions {
        budget: cfg.limits.reduce_budget,
        seed: rec.seed,
    };
    let result = match reduce(&model, catalog, opts, &mut predicate) {
        Ok(r) => r,
        Err(ReduceError::BudgetExhausted(best)) => *best,
        Err(ReduceError::TriggerLost) => {
            return Err(ReduceError::Predicate("flaky trigger: held once, then lost".into()).into())
        }
        Err(e) => return Err(e.into()),
    };
    let _ = fs::remove_dir_all(&work);
    write_text(&dir.join("model.reduced.json"), &result.reduced.to_json())?;
    for d in &result.designs {
        write_text(
            &dir.join(format!("design.reduced.{}", d.dialect.extension())),
            &d.text,
        )?;
    }
    #[derive(Serialize)]
    struct Log<'a> {
        signature: &'a str,
        evaluations: usize,
        before: ComplexityMetrics,
        after: ComplexityMetrics,
        steps: &'a [crate::reducer::ReductionStep],
        certificate: &'a [(crate::reducer::Element, crate::reducer::Refutation)],
    }
    write_json(
        &dir.join("reduction.json"),
        &Log {
            signature,
            evaluations: result.evaluations,
            before: result.before,
            after: result.after,
            steps: &result.steps,
            certificate: &result.certificate,
        },
    )?;
    summarize(out)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn config_needs_adapters_or_generate_only() {
        let mut cfg = CampaignConfig::default();
        assert!(matches!(cfg.check(), Err(CampaignError::Config(_))));
        cfg.limits.generate_only = true;
        assert!(cfg.check().is_ok());
        cfg.limits.jobs = 0;
        assert!(cfg.check().is_err());
    }

    #[test]
    fn empty_campaign_reports_zero() {
        let dir = tempfile::tempdir().unwrap();
        let stats = summarize(dir.path()).unwrap();
        assert_eq!(stats.unique_defects, 0);
        let text = report(&stats);
        assert!(text.contains("Cases: 0"));
        assert_eq!(
            fs::read_to_string(dir.path().join("report.md")).unwrap(),
            text
        );
    }
}
