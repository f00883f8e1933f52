// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use blockfuzz::campaign::{self, case_id, case_seed, CampaignConfig};
use blockfuzz::generator::{generate_model, syntax_guidance, GenerationConfig};
use blockfuzz::hdl::{emit, optimize, Dialect};
use blockfuzz::interp::{make_stimulus, simulate};
use blockfuzz::{BlockCatalog, ModelGraph};

/// Block-diagram model fuzzer for HDL toolchains.
#[derive(Parser)]
#[command(name = "blockfuzz", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Global {
    /// Campaign config file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Campaign seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Comma-separated dialects: verilog, vhdl, systemverilog.
    #[arg(long, global = true, value_delimiter = ',')]
    dialects: Option<Vec<Dialect>>,
    /// Number of cases.
    #[arg(long, global = true)]
    cases: Option<usize>,
    /// Generate and emit only; run no tools.
    #[arg(long, global = true)]
    generate_only: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate models into <out>/<case>/model.json.
    Generate {
        /// Target node count.
        #[arg(long)]
        blocks: Option<usize>,
    },
    /// Emit HDL for a model file.
    Emit {
        model: PathBuf,
        /// Skip the pipelining optimizer.
        #[arg(long)]
        no_optimize: bool,
    },
    /// Print the interpreter's golden trace for a model file.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 32)]
        cycles: usize,
    },
    /// Run a differential-testing campaign.
    Fuzz,
    /// Minimize a defect-triggering case of a campaign.
    Reduce {
        #[arg(long)]
        case: String,
        /// Signature hash (or key) from the defect report.
        #[arg(long)]
        signature: String,
    },
    /// Regenerate stats.json and report.md for a campaign directory.
    Report,
}

fn load_config(g: &Global) -> Result<CampaignConfig> {
    let mut cfg = match &g.config {
        Some(p) => CampaignConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => CampaignConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.generation.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(j) = g.jobs {
        cfg.limits.jobs = j;
    }
    if let Some(d) = &g.dialects {
        cfg.generation.dialects = d.clone();
    }
    if let Some(c) = g.cases {
        cfg.limits.cases = c;
    }
    cfg.limits.generate_only |= g.generate_only;
    Ok(cfg)
}

fn read_model(path: &Path) -> Result<ModelGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ModelGraph::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let catalog = BlockCatalog::standard();
    let g = &cli.global;
    match cli.command {
        Cmd::Generate { blocks } => {
            let mut cfg = load_config(g)?;
            if let Some(n) = blocks {
                cfg.generation.block_count_target = n;
            }
            cfg.generation.check()?;
            let matrix = cfg.matrix(&catalog)?;
            for i in 0..cfg.limits.cases {
                let gen = GenerationConfig {
                    seed: case_seed(cfg.generation.seed, i),
                    ..cfg.generation.clone()
                };
                let mut guide = syntax_guidance(&catalog);
                let m = generate_model(&gen, &catalog, &matrix, &mut guide)
                    .with_context(|| format!("generating case {i} (seed {})", gen.seed))?;
                let path = cfg.out.join(case_id(i)).join("model.json");
                write(&path, &m.to_json())?;
                let x = m.metrics();
                println!(
                    "{} nodes={} connections={} references={}",
                    path.display(),
                    x.node_count,
                    x.connection_count,
                    x.reference_count
                );
            }
        }
        Cmd::Emit { model, no_optimize } => {
            let cfg = load_config(g)?;
            let mut m = read_model(&model)?;
            let violations = blockfuzz::validate(&m, &catalog);
            if !violations.is_empty() {
                bail!("{} does not validate: {}", model.display(), violations[0]);
            }
            if !no_optimize {
                let (p, choice, report) = optimize(&m, cfg.limits.levels, &catalog);
                eprintln!(
                    "strategy {} critical delay {}",
                    choice.chosen_strategy(),
                    report.critical_delay
                );
                m = p;
            }
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
            for &d in &cfg.generation.dialects {
                let design = emit(&m, d, &catalog)?;
                let path = out.join(design.file_name());
                write(&path, &design.text)?;
                println!("{}", path.display());
            }
        }
        Cmd::Simulate { model, cycles } => {
            let m = read_model(&model)?;
            let violations = blockfuzz::validate(&m, &catalog);
            if !violations.is_empty() {
                bail!("{} does not validate: {}", model.display(), violations[0]);
            }
            let s = make_stimulus(&m, &catalog, g.seed.unwrap_or(0), cycles);
            let text = simulate(&m, &s, &catalog).to_text();
            match &g.out {
                Some(p) => write(p, &text)?,
                None => print!("{text}"),
            }
        }
        Cmd::Fuzz => {
            let cfg = load_config(g)?;
            let stats = campaign::run_campaign(&cfg, &catalog)?;
            println!("{}", campaign::report(&stats));
            if stats.infrastructure_errors() > 0 {
                return Ok(ExitCode::from(2));
            }
            if stats.unique_defects > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Reduce { case, signature } => {
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("campaign"));
            let cfg = match &g.config {
                Some(_) => load_config(g)?,
                None => CampaignConfig::load(&out.join("config.json"))
                    .context("no --config and no saved campaign config")?,
            };
            let r = campaign::reduce_case(&cfg, &catalog, &out, &case, &signature)?;
            println!(
                "nodes {} -> {}, {} evaluations, {} certified removals",
                r.before.node_count,
                r.after.node_count,
                r.evaluations,
                r.certificate.len()
            );
        }
        Cmd::Report => {
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("campaign"));
            if !out.is_dir() {
                bail!("{} is not a campaign directory", out.display());
            }
            let stats = campaign::summarize(&out)?;
            print!("{}", campaign::report(&stats));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
