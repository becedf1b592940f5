//! Command implementations behind the `memprompt` binary.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendDescriptor};
use crate::correspondence::MatchConfig;
use crate::error::{Error, Result};
use crate::eval::{
    ablate_bg, ablate_memory, load_exemplars, pair_by_stem, render_comparison, render_overlay,
    segment_image, split_dataset, synth_dataset, would_be_negatives, write_dataset, write_rgb_png,
    DatasetItem, EvalReport, Family, PipelineConfig, QueryItem, SplitPart, SplitSpec,
};
use crate::io_util;
use crate::memory_bank::{build_bank, dedup, load_bank, save_bank, MemoryBank, DEFAULT_DEDUP_THRESHOLD};
use crate::prompt::{BgMode, FgStrategy, PromptPolicy};
use crate::tensor_io::{read_mask_png, write_mask_png};

/// Config echo written beside every output.
pub const CONFIG_FILE: &str = "config.json";
/// Split record stored in a bank directory built with `--split`.
pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Parser)]
#[command(name = "memprompt", version, about = "Training-free retrieval-to-prompt segmentation")]
pub struct Cli {
    /// Worker threads for per-image parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and persist a memory bank from image/mask pairs.
    BuildMemory(BuildMemoryArgs),
    /// Segment one image with prompts derived from the memory bank.
    Segment(SegmentArgs),
    /// Run the pipeline over a dataset split and write a report.
    Evaluate(EvaluateArgs),
    /// Compare BG prompt modes or memory pool sizes.
    Ablate(AblateArgs),
    /// Generate a seeded synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// `mock` or `bridge:<command>`.
    #[arg(long, default_value = "mock")]
    pub backend: BackendDescriptor,
}

#[derive(Debug, Clone, Args)]
pub struct MatchArgs {
    #[arg(long, default_value_t = 0.9)]
    pub tau_fg: f32,
    #[arg(long, default_value_t = 0.9)]
    pub tau_bg: f32,
    /// `most-confident` or `kmeans`.
    #[arg(long, default_value = "most-confident")]
    pub fg_strategy: FgStrategy,
    /// `all`, a count N, or `none` (also `0`).
    #[arg(long, default_value = "all")]
    pub bg: BgMode,
}

impl MatchArgs {
    fn pipeline(&self, jobs: usize) -> PipelineConfig {
        PipelineConfig {
            matching: MatchConfig {
                tau_fg: self.tau_fg,
                tau_bg: self.tau_bg,
            },
            policy: PromptPolicy {
                fg_strategy: self.fg_strategy,
                bg_mode: self.bg,
            },
            jobs,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Support fraction.
    #[arg(long, default_value_t = 0.7)]
    pub ratio: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl SplitArgs {
    fn spec(&self) -> SplitSpec {
        SplitSpec {
            ratio: self.ratio,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DedupScope {
    /// Dedup every pair, then split the survivors.
    Union,
    /// Split first, then dedup the support part only.
    Support,
}

#[derive(Debug, Args)]
pub struct BuildMemoryArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub masks: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DEDUP_THRESHOLD)]
    pub dedup_threshold: f32,
    /// Keep every pair.
    #[arg(long)]
    pub no_dedup: bool,
    #[arg(long, value_enum, default_value = "union")]
    pub dedup_scope: DedupScope,
    /// Build from the support part of a seeded split only.
    #[arg(long)]
    pub split: Option<SplitPart>,
    #[command(flatten)]
    pub split_args: SplitArgs,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub memory: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub matching: MatchArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory with `images/` and `masks/`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub memory: PathBuf,
    /// Evaluate one part of the split; all pairs when omitted.
    #[arg(long)]
    pub split: Option<SplitPart>,
    #[command(flatten)]
    pub split_args: SplitArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub matching: MatchArgs,
    /// Report JSON path; the table goes beside it with a `.txt` extension.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationMode {
    Bg,
    Memory,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_enum)]
    pub mode: AblationMode,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub matching: MatchArgs,
    /// BG modes compared by `--mode bg`.
    #[arg(long, value_delimiter = ',', default_value = "5,20,all")]
    pub bg_modes: Vec<BgMode>,
    /// Pool sizes compared by `--mode memory`.
    #[arg(long, value_delimiter = ',', default_value = "1,10,20")]
    pub pools: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub pool_seed: u64,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "simple")]
    pub family: Family,
    #[arg(long)]
    pub out: PathBuf,
}

/// Resolved settings of one command, echoed as JSON beside its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PromptPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    pub paths: BTreeMap<String, PathBuf>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
    pub jobs: usize,
}

impl RunConfig {
    fn new(command: &str, jobs: usize) -> Self {
        Self {
            command: command.into(),
            backend: None,
            matching: None,
            policy: None,
            split: None,
            paths: BTreeMap::new(),
            extra: BTreeMap::new(),
            jobs,
        }
    }

    fn path(mut self, key: &str, p: &Path) -> Self {
        self.paths.insert(key.into(), p.to_path_buf());
        self
    }

    fn extra(mut self, key: &str, v: impl Serialize) -> Self {
        self.extra
            .insert(key.into(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::Config("--jobs must be >= 1".into()));
        }
        if let Some(m) = &self.matching {
            m.validate()?;
        }
        if let Some(s) = &self.split {
            s.validate()?;
        }
        for (key, p) in &self.paths {
            if p.as_os_str().is_empty() {
                return Err(Error::Config(format!("empty path for {key}")));
            }
        }
        Ok(())
    }
}

/// Support/query ids recorded with a bank built from a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub spec: SplitSpec,
    pub dedup_scope: Option<DedupScope>,
    pub support: Vec<String>,
    pub query: Vec<String>,
    pub removed: Vec<String>,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Backend { transcript, .. } = &e {
                for line in transcript {
                    eprintln!("  runner: {line}");
                }
            }
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::BuildMemory(a) => build_memory(a, cli.jobs),
        Command::Segment(a) => segment(a, cli.jobs),
        Command::Evaluate(a) => evaluate(a, cli.jobs),
        Command::Ablate(a) => ablate(a, cli.jobs),
        Command::Synth(a) => synth(a, cli.jobs),
    }
}

fn instantiate(args: &BackendArgs) -> Result<Arc<dyn Backend>> {
    args.backend.instantiate()
}

fn worker_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn write_config(path: &Path, config: &RunConfig) -> Result<()> {
    io_util::write_json(path, config)
}

fn stdout_line(s: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(s.as_bytes());
    let _ = out.flush();
}

pub fn build_memory(a: &BuildMemoryArgs, jobs: usize) -> Result<()> {
    let threshold = (!a.no_dedup).then_some(a.dedup_threshold);
    let mut config = RunConfig::new("build-memory", jobs)
        .path("images", &a.images)
        .path("masks", &a.masks)
        .path("out", &a.out)
        .extra("dedup_threshold", threshold)
        .extra("dedup_scope", a.dedup_scope);
    config.backend = Some(a.backend.backend.clone());
    if a.split.is_some() {
        config.split = Some(a.split_args.spec());
    }
    config.validate()?;
    if a.split == Some(SplitPart::Query) {
        return Err(Error::Config("a memory bank is built from the support split only".into()));
    }
    let items = pair_by_stem(&a.images, &a.masks)?;
    let backend = instantiate(&a.backend)?;
    let load = |items: &[DatasetItem]| -> Result<MemoryBank> {
        let exemplars = worker_pool(jobs)?.install(|| load_exemplars(items, backend.as_ref()))?;
        build_bank(exemplars)
    };
    let maybe_dedup = |bank: MemoryBank| -> Result<(MemoryBank, Vec<String>)> {
        match threshold {
            Some(t) => dedup(&bank, t),
            None => Ok((bank, Vec::new())),
        }
    };

    let (bank, removed, record) = match a.split {
        None => {
            let (bank, removed) = maybe_dedup(load(&items)?)?;
            (bank, removed, None)
        }
        Some(_) => {
            let spec = a.split_args.spec();
            match a.dedup_scope {
                DedupScope::Union => {
                    let (union, removed) = maybe_dedup(load(&items)?)?;
                    let ids: Vec<String> = union.entries().iter().map(|e| e.id.clone()).collect();
                    let (support, query) = split_dataset(&ids, &spec)?;
                    let positions: Vec<usize> = union
                        .entries()
                        .iter()
                        .enumerate()
                        .filter(|(_, e)| support.contains(&e.id))
                        .map(|(p, _)| p)
                        .collect();
                    let bank = union.subset(&positions)?;
                    let record = SplitRecord {
                        spec,
                        dedup_scope: threshold.map(|_| DedupScope::Union),
                        support,
                        query,
                        removed: removed.clone(),
                    };
                    (bank, removed, Some(record))
                }
                DedupScope::Support => {
                    let ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
                    let (support, query) = split_dataset(&ids, &spec)?;
                    let chosen: Vec<DatasetItem> =
                        items.iter().filter(|i| support.contains(&i.id)).cloned().collect();
                    let (bank, removed) = maybe_dedup(load(&chosen)?)?;
                    let kept: Vec<String> = bank.entries().iter().map(|e| e.id.clone()).collect();
                    let record = SplitRecord {
                        spec,
                        dedup_scope: threshold.map(|_| DedupScope::Support),
                        support: kept,
                        query,
                        removed: removed.clone(),
                    };
                    (bank, removed, Some(record))
                }
            }
        }
    };

    save_bank(&bank, &a.out)?;
    if let Some(record) = &record {
        io_util::write_json(&a.out.join(SPLIT_FILE), record)?;
    }
    write_config(&a.out.join(CONFIG_FILE), &config)?;
    let mut msg = format!("bank: {} entries, {} removed by dedup", bank.len(), removed.len());
    if !removed.is_empty() {
        msg.push_str(&format!(" ({})", removed.join(", ")));
    }
    msg.push('\n');
    stdout_line(&msg);
    Ok(())
}

pub fn segment(a: &SegmentArgs, jobs: usize) -> Result<()> {
    let pipeline = a.matching.pipeline(jobs);
    let mut config = RunConfig::new("segment", jobs)
        .path("query", &a.query)
        .path("memory", &a.memory)
        .path("out", &a.out);
    config.backend = Some(a.backend.backend.clone());
    config.matching = Some(pipeline.matching);
    config.policy = Some(pipeline.policy);
    config.validate()?;
    let bank = load_bank(&a.memory)?;
    let backend = instantiate(&a.backend)?;
    let (prepared, seg) = worker_pool(jobs)?
        .install(|| segment_image(&a.query, &bank, backend.as_ref(), &pipeline))?;

    if seg.prompts.background().next().is_none() {
        log::warn!("no background prompts were placed; the mask may spill into adjacent regions");
    }
    let covered = would_be_negatives(&prepared, &seg.prompts)
        .into_iter()
        .filter(|p| seg.prediction.contains(*p))
        .count();
    if covered > 0 {
        log::warn!("predicted mask covers {covered} background-matched point(s): likely leakage");
    }

    let image = crate::backend::open_rgb(&a.query)?;
    let overlay = render_overlay(&image, &seg.prediction, &seg.prompts)?;
    write_mask_png(&seg.prediction, a.out.join("mask.png"))?;
    io_util::write_json(&a.out.join("prompts.json"), &seg.prompts)?;
    io_util::write_json(
        &a.out.join("retrieval.json"),
        &serde_json::json!({
            "exemplar": prepared.retrieved.entry.id,
            "similarity": prepared.retrieved.similarity,
            "fg_candidates": prepared.candidates.fg.len(),
            "bg_candidates": prepared.candidates.bg.len(),
            "candidate_scores": seg.candidates.iter().map(|c| c.score).collect::<Vec<_>>(),
        }),
    )?;
    write_rgb_png(&overlay, &a.out.join("overlay.png"))?;
    write_config(&a.out.join(CONFIG_FILE), &config)?;
    stdout_line(&format!(
        "exemplar {} (similarity {:.4}); {} prompt points; mask written to {}\n",
        prepared.retrieved.entry.id,
        prepared.retrieved.similarity,
        seg.prompts.len(),
        a.out.join("mask.png").display()
    ));
    Ok(())
}

/// Query items for the requested split, with ground truth loaded.
fn load_queries(d: &DataArgs) -> Result<(Vec<QueryItem>, Option<SplitSpec>)> {
    let items = pair_by_stem(&d.data.join("images"), &d.data.join("masks"))?;
    let (selected, spec): (Vec<DatasetItem>, Option<SplitSpec>) = match d.split {
        None => (items, None),
        Some(part) => {
            let record_path = d.memory.join(SPLIT_FILE);
            let (support, query, spec) = if record_path.exists() {
                let record: SplitRecord = serde_json::from_slice(&io_util::read(&record_path)?)?;
                (record.support, record.query, record.spec)
            } else {
                let spec = d.split_args.spec();
                let ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
                let (s, q) = split_dataset(&ids, &spec)?;
                (s, q, spec)
            };
            let wanted = match part {
                SplitPart::Support => support,
                SplitPart::Query => query,
            };
            let missing: Vec<String> = wanted
                .iter()
                .filter(|id| !items.iter().any(|i| &&i.id == id))
                .cloned()
                .collect();
            if !missing.is_empty() {
                return Err(Error::Unpaired {
                    what: "split ids without an image/mask pair in the data directory".into(),
                    ids: missing,
                });
            }
            let chosen = items.into_iter().filter(|i| wanted.contains(&i.id)).collect();
            (chosen, Some(spec))
        }
    };
    if selected.is_empty() {
        return Err(Error::EmptyInput("the selected split has no images".into()));
    }
    let queries = selected
        .into_iter()
        .map(|i| {
            Ok(QueryItem {
                gt: read_mask_png(&i.mask)?,
                id: i.id,
                image: i.image,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((queries, spec))
}

fn report_paths(report: &Path) -> (PathBuf, PathBuf) {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    (
        report.with_extension("txt"),
        report.with_file_name(format!("{stem}.{CONFIG_FILE}")),
    )
}

fn data_config(command: &str, d: &DataArgs, m: &MatchArgs, jobs: usize) -> RunConfig {
    let pipeline = m.pipeline(jobs);
    let mut config = RunConfig::new(command, jobs)
        .path("data", &d.data)
        .path("memory", &d.memory)
        .extra("split_part", d.split);
    config.backend = Some(d.backend.backend.clone());
    config.matching = Some(pipeline.matching);
    config.policy = Some(pipeline.policy);
    config
}

pub fn evaluate(a: &EvaluateArgs, jobs: usize) -> Result<()> {
    let mut config = data_config("evaluate", &a.data, &a.matching, jobs).path("report", &a.report);
    config.validate()?;
    let bank = load_bank(&a.data.memory)?;
    let backend = instantiate(&a.data.backend)?;
    let (queries, spec) = load_queries(&a.data)?;
    config.split = spec;
    let mut report = crate::eval::run_pipeline(&queries, &bank, backend.as_ref(), &a.matching.pipeline(jobs))?;
    if let serde_json::Value::Object(map) = &mut report.config {
        map.insert("split".into(), serde_json::to_value(spec)?);
        map.insert("split_part".into(), serde_json::to_value(a.data.split)?);
    }
    let (table_path, config_path) = report_paths(&a.report);
    let table = report.to_table();
    io_util::write_json(&a.report, &report)?;
    io_util::write_atomic(&table_path, table.as_bytes())?;
    write_config(&config_path, &config)?;
    stdout_line(&table);
    Ok(())
}

pub fn ablate(a: &AblateArgs, jobs: usize) -> Result<()> {
    let mut config = data_config("ablate", &a.data, &a.matching, jobs)
        .path("report", &a.report)
        .extra("mode", a.mode);
    match a.mode {
        AblationMode::Bg => config = config.extra("bg_modes", &a.bg_modes),
        AblationMode::Memory => {
            config = config.extra("pools", &a.pools).extra("pool_seed", a.pool_seed)
        }
    }
    config.validate()?;
    let bank = load_bank(&a.data.memory)?;
    let backend = instantiate(&a.data.backend)?;
    let (queries, spec) = load_queries(&a.data)?;
    config.split = spec;
    let pipeline = a.matching.pipeline(jobs);
    let (json, table) = match a.mode {
        AblationMode::Bg => {
            let rows = ablate_bg(&queries, &bank, backend.as_ref(), &a.bg_modes, &pipeline)?;
            let labels: Vec<(String, &EvalReport)> = rows
                .iter()
                .map(|r| (bg_label(r.mode), &r.report))
                .collect();
            (serde_json::to_value(&rows)?, render_comparison(&labels))
        }
        AblationMode::Memory => {
            let rows = ablate_memory(
                &queries,
                &bank,
                backend.as_ref(),
                &a.pools,
                a.pool_seed,
                &pipeline,
            )?;
            let labels: Vec<(String, &EvalReport)> = rows
                .iter()
                .map(|r| (format!("pool {}", r.pool_size), &r.report))
                .collect();
            (serde_json::to_value(&rows)?, render_comparison(&labels))
        }
    };
    let (table_path, config_path) = report_paths(&a.report);
    io_util::write_json(&a.report, &json)?;
    io_util::write_atomic(&table_path, table.as_bytes())?;
    write_config(&config_path, &config)?;
    stdout_line(&table);
    Ok(())
}

fn bg_label(mode: BgMode) -> String {
    match mode {
        BgMode::All => "All".into(),
        BgMode::TopN(n) => format!("TopN({n})"),
        BgMode::Disabled => "none".into(),
    }
}

pub fn synth(a: &SynthArgs, jobs: usize) -> Result<()> {
    let config = RunConfig::new("synth", jobs)
        .path("out", &a.out)
        .extra("count", a.count)
        .extra("seed", a.seed)
        .extra("family", a.family);
    config.validate()?;
    let samples = synth_dataset(a.count, a.seed, a.family)?;
    write_dataset(&samples, &a.out)?;
    write_config(&a.out.join(CONFIG_FILE), &config)?;
    stdout_line(&format!(
        "wrote {} {} scenes to {}\n",
        samples.len(),
        a.family,
        a.out.display()
    ));
    Ok(())
}
