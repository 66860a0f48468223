//! The `sti-mapper` command line: one subcommand per stage plus
//! `pipeline`, all driven by a JSON config file.
//!
//! Every stage reads its predecessors' files from the output directory and
//! writes its own, then drops a completion marker in `.stages/` holding
//! the config fingerprint. `pipeline` skips stages whose marker matches and
//! reruns everything after the first stage it has to run.

mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use config::{ClassifierConfig, ConfigError, EmbedConfig, Filters, PipelineConfig, ReportConfig, ScaleSetting, SourceConfig, TopicsConfig};

use crate::classifier::{load_lexicons, weak_label, LinearBackend, PanelBackend, PanelDistribution};
use crate::embed::{compute_affinities, tsne};
use crate::ingest::{harvest, CachingFetcher, EndpointConfig, Fetcher, FixtureFetcher, HttpFetcher, RetryPolicy};
use crate::model::{Corpus, SdgTagResult, Source};
use crate::report::{
    panel_histogram, read_layout_csv, render_histogram, render_scatter, summary_table, write_layout_csv, LayoutPoint, SummaryTable,
    PALETTE,
};
use crate::topics::{default_stopwords, lda_fit, BowCorpus, TopicModel};
use crate::vocab::{load_vocabulary, tag_corpus};

/// Name of the environment variable that may hold the config path.
pub const CONFIG_ENV: &str = "STI_MAPPER_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage}: missing input {}; run the earlier stages first", path.display())]
    MissingInput { stage: Stage, path: PathBuf },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 2 for usage and config problems, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            _ => 2,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Subcommand)]
pub enum Stage {
    /// Fetch and filter records from every configured source.
    Harvest,
    /// Tag records against the SDG 13 vocabulary.
    Tag,
    /// Weak-label, train the panel classifier and classify tagged records.
    Classify,
    /// Fit the topic model on tagged records.
    Topics,
    /// Embed document-topic vectors in 2-D.
    Embed,
    /// Write tables and figures.
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Harvest, Stage::Tag, Stage::Classify, Stage::Topics, Stage::Embed, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Harvest => "harvest",
            Stage::Tag => "tag",
            Stage::Classify => "classify",
            Stage::Topics => "topics",
            Stage::Embed => "embed",
            Stage::Report => "report",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    #[command(flatten)]
    Stage(Stage),
    /// Run every stage in order, skipping completed ones.
    Pipeline,
}

#[derive(Debug, Parser)]
#[command(name = "sti-mapper", version, about = "Map a country's research and innovation records to SDG 13")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Pipeline config (JSON). Falls back to $STI_MAPPER_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Harvest only this source.
    #[arg(long, global = true)]
    source: Option<Source>,
    /// Seed for the topic model and the embedding.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Never hit the network; cache misses fail.
    #[arg(long, global = true)]
    offline: bool,
}

/// A loaded, validated config plus the command-line switches.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: PipelineConfig,
    pub source: Option<Source>,
    pub offline: bool,
}

impl Context {
    /// Validates `config` and applies the overrides.
    pub fn new(mut config: PipelineConfig, source: Option<Source>, seed: Option<u64>, output: Option<PathBuf>, offline: bool) -> Result<Context, CliError> {
        if let Some(seed) = seed {
            config.topics.seed = seed;
            config.embed.seed = seed;
        }
        if let Some(out) = output {
            config.output_dir = out;
        }
        config.validate()?;
        if let Some(s) = source {
            if !config.sources.contains_key(&s) {
                return Err(CliError::Usage(format!("source `{}` is not configured", s.slug())));
            }
        }
        Ok(Context { config, source, offline })
    }

    pub fn paths(&self) -> Paths {
        Paths { root: self.config.output_dir.clone() }
    }

    fn fingerprint(&self) -> String {
        let scope = self.source.map_or("all", Source::slug);
        format!("{} {scope}", self.config.fingerprint())
    }

    fn sources(&self) -> Vec<Source> {
        self.config.sources.keys().copied().collect()
    }
}

/// File layout of the output directory.
#[derive(Debug, Clone)]
pub struct Paths {
    pub root: PathBuf,
}

impl Paths {
    pub fn corpus(&self, source: Source) -> PathBuf {
        self.root.join("corpus").join(format!("{}.jsonl", source.slug()))
    }
    pub fn provenance(&self, source: Source) -> PathBuf {
        self.root.join("corpus").join(format!("{}.provenance.json", source.slug()))
    }
    pub fn tags(&self) -> PathBuf {
        self.root.join("tags.jsonl")
    }
    pub fn summary_csv(&self) -> PathBuf {
        self.root.join("summary.csv")
    }
    pub fn summary_md(&self) -> PathBuf {
        self.root.join("summary.md")
    }
    pub fn weak_labels(&self) -> PathBuf {
        self.root.join("weak_labels.csv")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model.json")
    }
    pub fn distributions(&self) -> PathBuf {
        self.root.join("panel_distributions.jsonl")
    }
    pub fn topic_model(&self) -> PathBuf {
        self.root.join("topic_model.json")
    }
    pub fn layout(&self) -> PathBuf {
        self.root.join("layout.csv")
    }
    pub fn layout_meta(&self) -> PathBuf {
        self.root.join("layout_meta.json")
    }
    pub fn histogram_csv(&self) -> PathBuf {
        self.root.join("panel_histogram.csv")
    }
    pub fn fig_topics(&self) -> PathBuf {
        self.root.join("fig1_topics.svg")
    }
    pub fn fig_panels(&self) -> PathBuf {
        self.root.join("fig2_panels.svg")
    }
    pub fn marker(&self, stage: Stage) -> PathBuf {
        self.root.join(".stages").join(format!("{stage}.done"))
    }
}

/// Writes through a temporary file in the same directory so readers never
/// see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    tmp.persist(path).map_err(|e| runtime(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn require(stage: Stage, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingInput { stage, path: path.to_path_buf() })
    }
}

fn read_bytes(stage: Stage, path: &Path) -> Result<Vec<u8>, CliError> {
    require(stage, path)?;
    std::fs::read(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable");
        out.push(b'\n');
    }
    out
}

fn read_jsonl<T: DeserializeOwned>(stage: Stage, path: &Path) -> Result<Vec<T>, CliError> {
    let bytes = read_bytes(stage, path)?;
    BufReader::new(&bytes[..])
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, line)| {
            let line = line.map_err(runtime)?;
            serde_json::from_str(&line).map_err(|e| runtime(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

fn load_corpus(ctx: &Context, stage: Stage) -> Result<Corpus, CliError> {
    let paths = ctx.paths();
    let mut parts = Vec::new();
    for source in ctx.sources() {
        let path = paths.corpus(source);
        let bytes = read_bytes(stage, &path)?;
        parts.push(Corpus::read_jsonl(&bytes[..]).map_err(|e| runtime(format!("{}: {e}", path.display())))?);
    }
    Corpus::merge(parts).map_err(runtime)
}

fn mark_done(ctx: &Context, stage: Stage) -> Result<(), CliError> {
    write_atomic(&ctx.paths().marker(stage), format!("{}\n", ctx.fingerprint()).as_bytes())
}

fn is_done(ctx: &Context, stage: Stage) -> bool {
    std::fs::read_to_string(ctx.paths().marker(stage)).is_ok_and(|m| m.trim_end() == ctx.fingerprint())
}

/// Counters from one harvest run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HarvestStats {
    pub records: BTreeMap<Source, usize>,
    pub live_fetches: usize,
    pub cache_hits: usize,
}

fn fetcher_for(ctx: &Context, source: Source) -> Result<Box<dyn Fetcher>, CliError> {
    let sc = &ctx.config.sources[&source];
    if let Some(dir) = &sc.fixture_dir {
        return Ok(Box::new(FixtureFetcher::new(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?));
    }
    let endpoint = sc
        .endpoint
        .clone()
        .or_else(|| EndpointConfig::default_for(source))
        .ok_or_else(|| CliError::Usage(format!("no endpoint for {source}")))?;
    let http = HttpFetcher::new(BTreeMap::from([(source, endpoint)]), ctx.config.rate_limit_per_sec).map_err(runtime)?;
    Ok(Box::new(http))
}

/// Harvests the configured sources (or only `ctx.source`) through the
/// response cache and writes one corpus file per source.
pub fn cmd_harvest(ctx: &Context, out: &mut dyn Write) -> Result<HarvestStats, CliError> {
    let paths = ctx.paths();
    let mut stats = HarvestStats::default();
    let retry = RetryPolicy::default();
    for source in ctx.sources() {
        if ctx.source.is_some_and(|s| s != source) {
            continue;
        }
        let cache_dir = ctx.config.cache_dir().join(source.slug());
        let fetcher = CachingFetcher::new(fetcher_for(ctx, source)?, &cache_dir)
            .map_err(|e| runtime(format!("{}: {e}", cache_dir.display())))?
            .offline(ctx.offline);
        let mut corpus = harvest(&ctx.config.query(source), &fetcher, &retry).map_err(runtime)?;
        if ctx.config.sources[&source].fixture_dir.is_none() {
            let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
            if let Some(meta) = corpus.provenance.get_mut(&source) {
                meta.fetched_at = Some(format!("unix:{now}"));
            }
        }
        let mut bytes = Vec::new();
        corpus.write_jsonl(&mut bytes).map_err(runtime)?;
        write_atomic(&paths.corpus(source), &bytes)?;
        write_atomic(&paths.provenance(source), &pretty_json(&corpus.provenance.get(&source)))?;
        let meta = &corpus.provenance[&source];
        writeln!(
            out,
            "{source}: {} records from {} pages ({} live fetches, {} cache hits)",
            corpus.len(),
            meta.page_count,
            fetcher.live_fetches(),
            fetcher.cache_hits()
        )
        .map_err(runtime)?;
        stats.records.insert(source, corpus.len());
        stats.live_fetches += fetcher.live_fetches();
        stats.cache_hits += fetcher.cache_hits();
    }
    mark_done(ctx, Stage::Harvest)?;
    Ok(stats)
}

/// Tags every harvested record; writes `tags.jsonl` and `summary.csv`.
pub fn cmd_tag(ctx: &Context, out: &mut dyn Write) -> Result<SummaryTable, CliError> {
    let paths = ctx.paths();
    let vocabulary = load_vocabulary(&ctx.config.vocabulary_path).map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = load_corpus(ctx, Stage::Tag)?;
    let (results, summary) = tag_corpus(&corpus, &vocabulary);
    let table = summary_table(&summary);
    write_atomic(&paths.tags(), &jsonl(&results))?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv).map_err(runtime)?;
    write_atomic(&paths.summary_csv(), &csv)?;
    out.write_all(table.to_markdown().as_bytes()).map_err(runtime)?;
    mark_done(ctx, Stage::Tag)?;
    Ok(table)
}

fn tagged_ids(ctx: &Context, stage: Stage) -> Result<Vec<String>, CliError> {
    let tags: Vec<SdgTagResult> = read_jsonl(stage, &ctx.paths().tags())?;
    Ok(tags.into_iter().filter(|t| t.is_sdg13).map(|t| t.record_id).collect())
}

/// Counters from one classify run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifyStats {
    pub labeled: usize,
    pub trained: bool,
    pub classified: usize,
    pub unclassified: usize,
}

/// Weak-labels the corpus, trains (or loads) the panel model and predicts
/// a distribution for every SDG-tagged record.
pub fn cmd_classify(ctx: &Context, out: &mut dyn Write) -> Result<ClassifyStats, CliError> {
    let paths = ctx.paths();
    let cc = &ctx.config.classifier;
    let lexicons = load_lexicons(&ctx.config.lexicon_path).map_err(|e| {
        if e.is_config() {
            CliError::Usage(e.to_string())
        } else {
            runtime(e)
        }
    })?;
    let corpus = load_corpus(ctx, Stage::Classify)?;
    let tagged = tagged_ids(ctx, Stage::Classify)?;
    let labels = weak_label(&corpus, &lexicons).map_err(runtime)?;
    let texts: BTreeMap<&str, String> = corpus.records().iter().map(|r| (r.record_id.as_str(), r.text())).collect();

    let mut weak_csv = String::from("record_id,panel\n");
    for (id, panel) in &labels {
        weak_csv.push_str(&format!("{id},{panel}\n"));
    }
    write_atomic(&paths.weak_labels(), weak_csv.as_bytes())?;

    let prebuilt = cc.model_path.as_ref().filter(|p| p.is_file());
    let (backend, trained) = match prebuilt {
        Some(path) => (LinearBackend::load(path).map_err(runtime)?, false),
        None => {
            let mut backend = LinearBackend::new(cc.linear());
            let train_texts: Vec<&str> = labels.keys().map(|id| texts[id.as_str()].as_str()).collect();
            let train_labels: Vec<_> = labels.values().copied().collect();
            backend.train(&train_texts, &train_labels).map_err(runtime)?;
            if let Some(path) = &cc.model_path {
                backend.save(path).map_err(runtime)?;
            }
            (backend, true)
        }
    };
    write_atomic(&paths.model(), backend.to_json().map_err(runtime)?.as_bytes())?;

    let mut distributions: Vec<PanelDistribution> = Vec::with_capacity(tagged.len());
    for id in &tagged {
        let text = texts.get(id.as_str()).ok_or_else(|| runtime(format!("tagged record {id} is not in the corpus")))?;
        distributions.push(backend.predict(id, text, cc.threshold).map_err(runtime)?);
    }
    write_atomic(&paths.distributions(), &jsonl(&distributions))?;
    let classified = distributions.iter().filter(|d| d.assigned.is_some()).count();
    let stats = ClassifyStats {
        labeled: labels.len(),
        trained,
        classified,
        unclassified: distributions.len() - classified,
    };
    writeln!(
        out,
        "{} weak labels; model {}; {} records classified, {} unclassified",
        stats.labeled,
        if trained { "trained" } else { "reused" },
        stats.classified,
        stats.unclassified
    )
    .map_err(runtime)?;
    mark_done(ctx, Stage::Classify)?;
    Ok(stats)
}

/// Fits the topic model on SDG-tagged records in record-id order.
pub fn cmd_topics(ctx: &Context, out: &mut dyn Write) -> Result<TopicModel, CliError> {
    let tc = &ctx.config.topics;
    let corpus = load_corpus(ctx, Stage::Topics)?;
    let tagged = tagged_ids(ctx, Stage::Topics)?;
    let by_id: BTreeMap<&str, _> = corpus.records().iter().map(|r| (r.record_id.as_str(), r)).collect();
    let mut items = Vec::with_capacity(tagged.len());
    for id in &tagged {
        let record = by_id.get(id.as_str()).ok_or_else(|| runtime(format!("tagged record {id} is not in the corpus")))?;
        if tc.sources.as_ref().is_none_or(|s| s.contains(&record.source)) {
            items.push((id.as_str(), record.text()));
        }
    }
    let bow = BowCorpus::build(&items, &default_stopwords(), tc.min_df, tc.min_doc_len).map_err(runtime)?;
    let model = lda_fit(&bow, tc.lda()).map_err(runtime)?;
    write_atomic(&ctx.paths().topic_model(), &pretty_json(&model))?;
    writeln!(out, "{} topics over {} documents ({} dropped)", model.k, model.doc_ids.len(), bow.dropped.len()).map_err(runtime)?;
    for t in 0..model.k {
        let words = model.top_words(t, 5).map_err(runtime)?;
        writeln!(out, "  {t:>2}: {}", words.join(" ")).map_err(runtime)?;
    }
    mark_done(ctx, Stage::Topics)?;
    Ok(model)
}

fn read_topic_model(stage: Stage, path: &Path) -> Result<TopicModel, CliError> {
    let bytes = read_bytes(stage, path)?;
    serde_json::from_slice(&bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

/// Embeds each document's topic proportions with t-SNE.
pub fn cmd_embed(ctx: &Context, out: &mut dyn Write) -> Result<Vec<LayoutPoint>, CliError> {
    let paths = ctx.paths();
    let ec = &ctx.config.embed;
    let model = read_topic_model(Stage::Embed, &paths.topic_model())?;
    let affinities = compute_affinities(&model.theta, ec.perplexity).map_err(runtime)?;
    let layout = tsne(&affinities, ec.tsne()).map_err(runtime)?;
    let points: Vec<LayoutPoint> = model
        .doc_ids
        .iter()
        .zip(&layout.coordinates)
        .enumerate()
        .map(|(d, (id, xy))| {
            Ok(LayoutPoint {
                record_id: id.clone(),
                x: xy[0],
                y: xy[1],
                dominant_topic: model.dominant_topic(d).map_err(runtime)?,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let mut csv = Vec::new();
    write_layout_csv(&points, &mut csv).map_err(runtime)?;
    write_atomic(&paths.layout(), &csv)?;
    let meta = serde_json::json!({
        "final_kl": crate::decimal::fmt(layout.final_kl),
        "kl_after_exaggeration": layout.kl_after_exaggeration.map(crate::decimal::fmt),
        "iterations": layout.iterations,
        "seed": layout.seed,
    });
    write_atomic(&paths.layout_meta(), &pretty_json(&meta))?;
    writeln!(out, "{} points embedded; final KL {:.4}", points.len(), layout.final_kl).map_err(runtime)?;
    mark_done(ctx, Stage::Embed)?;
    Ok(points)
}

/// Writes the summary table, the panel histogram and both figures.
pub fn cmd_report(ctx: &Context, out: &mut dyn Write) -> Result<(), CliError> {
    let paths = ctx.paths();
    let summary_bytes = read_bytes(Stage::Report, &paths.summary_csv())?;
    let table = SummaryTable::read_csv(&summary_bytes[..]).map_err(runtime)?;
    let distributions: Vec<PanelDistribution> = read_jsonl(Stage::Report, &paths.distributions())?;
    let model = read_topic_model(Stage::Report, &paths.topic_model())?;
    let layout = read_layout_csv(&read_bytes(Stage::Report, &paths.layout())?[..]).map_err(runtime)?;
    let corpus = load_corpus(ctx, Stage::Report)?;
    let sources: BTreeMap<String, Source> = corpus.records().iter().map(|r| (r.record_id.clone(), r.source)).collect();

    let histogram = panel_histogram(&distributions, &sources).map_err(runtime)?;
    let topic_words = (0..model.k).map(|t| model.top_words(t, 3)).collect::<Result<Vec<_>, _>>().map_err(runtime)?;
    let scatter = render_scatter(&layout, &topic_words, &PALETTE).map_err(runtime)?;
    let bars = render_histogram(&histogram, ctx.config.report.scale());

    let mut summary_csv = Vec::new();
    table.write_csv(&mut summary_csv).map_err(runtime)?;
    let mut histogram_csv = Vec::new();
    histogram.write_csv(&mut histogram_csv).map_err(runtime)?;
    write_atomic(&paths.summary_csv(), &summary_csv)?;
    write_atomic(&paths.summary_md(), table.to_markdown().as_bytes())?;
    write_atomic(&paths.histogram_csv(), &histogram_csv)?;
    write_atomic(&paths.fig_topics(), scatter.as_bytes())?;
    write_atomic(&paths.fig_panels(), bars.as_bytes())?;
    writeln!(out, "report written to {}", paths.root.display()).map_err(runtime)?;
    mark_done(ctx, Stage::Report)?;
    Ok(())
}

pub fn run_stage(ctx: &Context, stage: Stage, out: &mut dyn Write) -> Result<(), CliError> {
    match stage {
        Stage::Harvest => cmd_harvest(ctx, out).map(drop),
        Stage::Tag => cmd_tag(ctx, out).map(drop),
        Stage::Classify => cmd_classify(ctx, out).map(drop),
        Stage::Topics => cmd_topics(ctx, out).map(drop),
        Stage::Embed => cmd_embed(ctx, out).map(drop),
        Stage::Report => cmd_report(ctx, out),
    }
}

/// Runs all stages in order. Stages with a matching completion marker are
/// skipped until one has to run; every later stage then runs too.
/// Returns the stages that ran.
pub fn cmd_pipeline(ctx: &Context, out: &mut dyn Write) -> Result<Vec<Stage>, CliError> {
    let mut ran = Vec::new();
    for stage in Stage::ALL {
        if ran.is_empty() && is_done(ctx, stage) {
            writeln!(out, "[{stage}] already complete").map_err(runtime)?;
            continue;
        }
        writeln!(out, "[{stage}]").map_err(runtime)?;
        run_stage(ctx, stage, out)?;
        ran.push(stage);
    }
    Ok(ran)
}

fn parse_and_run(args: Vec<OsString>, out: &mut dyn Write) -> Result<(), CliError> {
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}").map_err(runtime)?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string().trim_end().to_string())),
    };
    let config_path = match args.config {
        Some(p) => p,
        None => std::env::var_os(CONFIG_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Usage(format!("no config given; pass --config <path> or set {CONFIG_ENV}")))?,
    };
    let config = PipelineConfig::load(&config_path)?;
    let ctx = Context::new(config, args.source, args.seed, args.output, args.offline)?;
    match args.command {
        Command::Stage(stage) => {
            if args.source.is_some() && stage != Stage::Harvest {
                return Err(CliError::Usage("--source only applies to harvest and pipeline".into()));
            }
            run_stage(&ctx, stage, out)
        }
        Command::Pipeline => cmd_pipeline(&ctx, out).map(drop),
    }
}

/// Entry point shared by the binary and tests. Returns the exit code.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString>>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match parse_and_run(args.into_iter().map(Into::into).collect(), out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
