//! Command-line entry point.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tokenqoe_core::analysis::{self, CorrelationMatrix};
use tokenqoe_core::model::{
    to_feature_vector, Category, ContentConfig, Dimension, Feature, Language, MbtiAxis, QosConfig, RaterProfile,
    RatingRecord,
};
use tokenqoe_core::pca::{self, PcaResult};
use tokenqoe_core::pipeline::{self, PipelineReport};
use tokenqoe_core::predictor::{self, Dataset, Hyperparameters, ModelFamily, TargetMode, TargetSpec};
use tokenqoe_core::shaper::{self, ClockKind, SinkClosed, StreamEvent, VirtualClock};
use tokenqoe_core::synth::{self, SyntheticWorld};
use tokenqoe_core::PipelineParams;

use crate::clock::{self, WallClock};
use crate::error::{Error, Result};
use crate::files;
use crate::service::{self, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "tokenqoe", version, about = "Quality-of-experience toolkit for streamed text answers")]
pub struct Cli {
    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    /// Seed for every random choice; recorded in output metadata.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the rating service.
    Serve(ServeArgs),
    /// Stream a text file to stdout under a QoS setting.
    Simulate(SimulateArgs),
    /// Generate synthetic ratings with a known ground truth.
    Synth(SynthArgs),
    /// Clean ratings and compute the MOS table.
    Process(ProcessArgs),
    /// Descriptive analyses of a MOS table.
    Analyze(AnalyzeArgs),
    /// Fit a MOS regression model.
    Train(TrainArgs),
    /// Score a fitted model on a ratings file.
    Evaluate(EvaluateArgs),
    /// Drop one feature at a time and report test metrics.
    Ablate(AblateArgs),
    /// Predict the score of one configuration.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub content: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Emit tokens without sleeping (for tests and demos).
    #[arg(long)]
    pub virtual_clock: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub text_file: PathBuf,
    /// Seconds per token.
    #[arg(long)]
    pub speed: f64,
    /// Pause position as a fraction of the token count.
    #[arg(long)]
    pub pause_at: f64,
    #[arg(long)]
    pub pause_secs: f64,
    #[arg(long)]
    pub virtual_clock: bool,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Tokenization language; detected from the text when absent.
    #[arg(long, value_enum)]
    pub language: Option<LangArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LangArg {
    Zh,
    En,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub world: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Number of honest raters; adversarial raters come from the world.
    #[arg(long, default_value_t = 20)]
    pub raters: usize,
    /// Grid combinations rated per question (default: the whole grid).
    #[arg(long)]
    pub per_question: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write rater profiles (JSON Lines).
    #[arg(long)]
    pub profiles_out: Option<PathBuf>,
    /// Also write the ground-truth utility per condition (CSV).
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Frozen rescaling anchors (anchors map or an earlier report.json).
    #[arg(long)]
    pub anchors: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalysisKind {
    Pca,
    Corr,
    Mbti,
    Topics,
    Dist,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub kind: AnalysisKind,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Rater profiles (JSON Lines), needed by `mbti`.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = DimArg::Overall)]
    pub dimension: DimArg,
    /// Grouping parameter of `dist`; all five when absent.
    #[arg(long)]
    pub key: Option<String>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DimArg {
    Overall,
    Content,
    Response,
}

impl From<DimArg> for Dimension {
    fn from(d: DimArg) -> Self {
        match d {
            DimArg::Overall => Dimension::Overall,
            DimArg::Content => Dimension::Content,
            DimArg::Response => Dimension::Response,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Linear,
    Knn,
    Forest,
}

impl From<ModelArg> for ModelFamily {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Linear => ModelFamily::LinearRidge,
            ModelArg::Knn => ModelFamily::Knn,
            ModelArg::Forest => ModelFamily::TreeEnsemble,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Record,
    Mos,
}

#[derive(Debug, Args)]
pub struct ModelOpts {
    #[arg(long, value_enum, default_value_t = TargetArg::Record)]
    pub target: TargetArg,
    #[arg(long, value_enum, default_value_t = DimArg::Overall)]
    pub dimension: DimArg,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub ridge_lambda: Option<f64>,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Train on the category split's training part and report test metrics.
    #[arg(long)]
    pub holdout: bool,
    #[command(flatten)]
    pub opts: ModelOpts,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Write the metrics as JSON here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Forest)]
    pub model: ModelArg,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub opts: ModelOpts,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub rho: u8,
    #[arg(long)]
    pub alpha: u8,
    #[arg(long)]
    pub speed: f64,
    #[arg(long)]
    pub pos: f64,
    #[arg(long)]
    pub dur: f64,
}

/// Contents of `--config`. Every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub log_level: Option<String>,
    pub content: Option<PathBuf>,
    pub grid: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub port: Option<u16>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub hyperparameters: Option<Hyperparameters>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = files::read_json(path)?;
        for (what, p) in [("content", &cfg.content), ("grid", &cfg.grid)] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::new("file-not-found", format!("{what} {}", p.display())));
                }
            }
        }
        Ok(cfg)
    }
}

/// Resolved global settings.
struct Ctx {
    seed: u64,
    config: RunConfig,
}

impl Ctx {
    fn meta(&self, command: &str) -> Vec<(&'static str, String)> {
        vec![("tool", "tokenqoe".into()), ("command", command.into()), ("seed", self.seed.to_string())]
    }

    fn params(&self, tau: Option<f64>, gamma: Option<f64>) -> Result<PipelineParams> {
        let d = PipelineParams::default();
        let p = PipelineParams {
            tau: tau.or(self.config.tau).unwrap_or(d.tau),
            gamma: gamma.or(self.config.gamma).unwrap_or(d.gamma),
        };
        p.validate()?;
        Ok(p)
    }

    fn hyper(&self, o: &ModelOpts) -> Hyperparameters {
        let mut h = self.config.hyperparameters.unwrap_or_default();
        if let Some(v) = o.ridge_lambda {
            h.ridge_lambda = v;
        }
        if let Some(v) = o.knn_k {
            h.knn_k = v;
        }
        if let Some(v) = o.trees {
            h.forest.n_trees = v;
        }
        if let Some(v) = o.max_depth {
            h.forest.max_depth = v;
        }
        h
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn init_logging(level: &str) {
    let _ = env_logger::Builder::new()
        .parse_filters(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

pub fn execute(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let level = cli.log_level.clone().or(config.log_level.clone()).unwrap_or_else(|| "warn".into());
    init_logging(&level);
    let ctx = Ctx { seed: cli.seed.or(config.seed).unwrap_or(0), config };
    match cli.command {
        Command::Serve(a) => serve(&ctx, a),
        Command::Simulate(a) => simulate(a),
        Command::Synth(a) => synth_cmd(&ctx, a),
        Command::Process(a) => process(&ctx, a),
        Command::Analyze(a) => analyze(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Evaluate(a) => evaluate(a),
        Command::Ablate(a) => ablate(&ctx, a),
        Command::Predict(a) => predict_cmd(a),
    }
}

fn serve(ctx: &Ctx, a: ServeArgs) -> Result<()> {
    let content = a
        .content
        .or(ctx.config.content.clone())
        .ok_or_else(|| Error::new("missing-argument", "--content is required"))?;
    let store = a
        .store
        .or(ctx.config.store.clone())
        .ok_or_else(|| Error::new("missing-argument", "--store is required"))?;
    let grid_path = a.grid.or(ctx.config.grid.clone());
    let port = a.port.or(ctx.config.port).unwrap_or(8080);
    let config = ServiceConfig {
        fixture: files::load_fixture(&content)?,
        grid: files::load_grid(grid_path.as_deref())?,
        seed: ctx.seed,
        clock: if a.virtual_clock { ClockKind::Virtual } else { ClockKind::Wall },
    };
    let svc = service::Service::open(config, &store)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::new("io-error", e.to_string()))?;
    rt.block_on(async move {
        let addr = format!("{}:{port}", a.host);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Error::new("io-error", format!("bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| Error::new("io-error", e.to_string()))?;
        println!("listening on http://{local}");
        axum::serve(listener, service::router(svc))
            .await
            .map_err(|e| Error::new("io-error", e.to_string()))
    })
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let text = files::read_text(&a.text_file)?;
    let qos = QosConfig::new(a.speed, a.pause_at, a.pause_secs)?;
    let lang = match a.language {
        Some(LangArg::Zh) => Language::Zh,
        Some(LangArg::En) => Language::En,
        None => shaper::detect_language(&text),
    };
    let schedule = shaper::schedule_emission(&shaper::tokenize(&text, lang), &qos);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut sink = |index: usize, token: &str| {
        let line = serde_json::to_string(&StreamEvent::Token { index, token: token.into() }).expect("events serialize");
        writeln!(out, "{line}").and_then(|_| out.flush()).map_err(|_| SinkClosed)
    };
    let played = if a.virtual_clock {
        shaper::play(&schedule, &VirtualClock, &mut sink)
    } else {
        shaper::play(&schedule, &WallClock, &mut sink)
    };
    let trace = played.map_err(|e| Error::new(e.code(), e.to_string()))?;
    let done = serde_json::to_string(&StreamEvent::done(trace.len())).expect("events serialize");
    println!("{done}");
    if trace.clock_kind == ClockKind::Wall {
        log::info!("p95 lateness {:.4}s over {} tokens", clock::p95(&trace.lateness()), trace.len());
    }
    if let Some(p) = a.trace_out {
        files::write_json(&p, &trace)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TruthRow {
    question_id: String,
    density: u8,
    accuracy: u8,
    speed: f64,
    pause_pos: f64,
    pause_dur: f64,
    utility: f64,
}

fn synth_cmd(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let mut world: SyntheticWorld = match &a.world {
        Some(p) => files::read_json(p)?,
        None => SyntheticWorld::default(),
    };
    if ctx.seed != 0 || a.world.is_none() {
        world.seed = ctx.seed;
    }
    if a.raters == 0 {
        return Err(Error::new("bad-params", "--raters must be at least 1"));
    }
    let grid = files::load_grid(a.grid.as_deref())?;
    let per_question = a.per_question.unwrap_or(grid.combinations().len());
    let conditions = synth::conditions_for(&synth::default_questions(), &grid, per_question);
    let records = synth::generate(&world, &conditions, a.raters);
    files::write_jsonl(&a.out, &records)?;
    log::info!("wrote {} records for {} conditions to {}", records.len(), conditions.len(), a.out.display());
    if let Some(p) = &a.profiles_out {
        files::write_jsonl(p, &synth::generate_profiles(&world, a.raters))?;
    }
    if let Some(p) = &a.truth_out {
        let rows: Vec<TruthRow> = conditions
            .iter()
            .map(|c| TruthRow {
                question_id: c.question_id.clone(),
                density: c.content.density,
                accuracy: c.content.accuracy,
                speed: c.qos.speed_s_per_token,
                pause_pos: c.qos.pause_pos,
                pause_dur: c.qos.pause_dur_s,
                utility: world.utility(c.content, c.qos),
            })
            .collect();
        files::write_csv(p, &rows, &ctx.meta("synth"))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Meta {
    tool: &'static str,
    command: &'static str,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct ProcessReport<'a> {
    meta: Meta,
    params: PipelineParams,
    records_removed: usize,
    #[serde(flatten)]
    report: &'a PipelineReport,
    anchors: &'a pipeline::Anchors,
}

fn process(ctx: &Ctx, a: ProcessArgs) -> Result<()> {
    let records: Vec<RatingRecord> = files::read_jsonl(&a.input)?;
    for r in &records {
        tokenqoe_core::model::validate_record(r, None)?;
    }
    if let Some(i) = tokenqoe_core::model::find_duplicate(&records) {
        let r = &records[i];
        return Err(Error::new("duplicate-submission", format!("rater {} rated {} twice", r.rater_id, r.question_id)));
    }
    let params = ctx.params(a.tau, a.gamma)?;
    let (table, report) = match &a.anchors {
        Some(p) => pipeline::run_pipeline_with_anchors(&records, &params, &files::load_anchors(p)?)?,
        None => pipeline::run_pipeline(&records, &params)?,
    };
    for c in &report.empty_conditions {
        log::warn!("empty condition: no valid rating left for {} {:?} {:?}", c.question_id, c.content, c.qos);
    }
    files::write_mos_csv(&a.out, &table, &ctx.meta("process"))?;
    let out = ProcessReport {
        meta: Meta { tool: "tokenqoe", command: "process", seed: ctx.seed },
        params,
        records_removed: report.records_removed(),
        report: &report,
        anchors: &table.anchors,
    };
    files::write_json(&a.report, &out)?;
    log::info!(
        "{} records in, {} removed, {} kept; {} raters retained",
        report.records_in,
        report.records_removed(),
        report.records_out,
        report.final_raters.len()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct PcaOutput<'a> {
    meta: Meta,
    /// Column labels of the samples.
    features: Vec<String>,
    samples: usize,
    #[serde(flatten)]
    result: &'a PcaResult,
}

#[derive(Debug, Serialize)]
struct CorrOutput<'a> {
    meta: Meta,
    #[serde(flatten)]
    matrix: &'a CorrelationMatrix,
}

#[derive(Debug, Serialize)]
struct MbtiGroupOutput {
    axis: String,
    letter: char,
    records: usize,
    raters: usize,
    records_removed: Option<usize>,
    pca: Option<PcaResult>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct DistRow {
    key: String,
    level: String,
    n: usize,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
    samples: String,
}

fn pca_labels(dim: Dimension) -> Vec<String> {
    Feature::ALL.iter().map(|f| f.as_str().to_owned()).chain([format!("score_{dim}")]).collect()
}

fn record_samples(records: &[RatingRecord], dim: Dimension) -> Vec<[f64; 6]> {
    records
        .iter()
        .filter_map(|r| {
            let x = to_feature_vector(r.content, r.qos).0;
            Some([x[0], x[1], x[2], x[3], x[4], f64::from(r.score(dim)?)])
        })
        .collect()
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str, kind: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::new("missing-argument", format!("analyze {kind} needs {flag}")))
}

fn analyze(ctx: &Ctx, a: AnalyzeArgs) -> Result<()> {
    let table = files::read_mos_csv(&a.input)?;
    let dim = Dimension::from(a.dimension);
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let meta = || Meta { tool: "tokenqoe", command: "analyze", seed: ctx.seed };
    match a.kind {
        AnalysisKind::Pca => {
            // per-rating rows when the ratings are at hand, else per condition
            let samples = match &a.records {
                Some(p) => {
                    let records: Vec<RatingRecord> = files::read_jsonl(p)?;
                    let params = ctx.params(a.tau, a.gamma)?;
                    let (_, report) = pipeline::run_pipeline(&records, &params)?;
                    record_samples(&pipeline::surviving_records(&records, &report), dim)
                }
                None => analysis::pca_samples(&table, dim),
            };
            let result = pca::pca(&samples)?;
            let out = PcaOutput { meta: meta(), features: pca_labels(dim), samples: samples.len(), result: &result };
            files::write_json(&a.out.join("pca.json"), &out)
        }
        AnalysisKind::Corr => {
            let m = analysis::dimension_correlations(&table)?;
            files::write_json(&a.out.join("corr.json"), &CorrOutput { meta: meta(), matrix: &m })
        }
        AnalysisKind::Mbti => {
            let records: Vec<RatingRecord> = files::read_jsonl(require(&a.records, "--records", "mbti")?)?;
            let profiles: Vec<RaterProfile> = files::read_jsonl(require(&a.profiles, "--profiles", "mbti")?)?;
            let params = ctx.params(a.tau, a.gamma)?;
            let mut groups = Vec::new();
            for axis in MbtiAxis::ALL {
                let split = analysis::group_by_mbti(&records, &profiles, axis)?;
                for (letter, subset) in split.groups {
                    let raters = subset.iter().map(|r| r.rater_id.as_str()).collect::<std::collections::BTreeSet<_>>().len();
                    let outcome = pipeline::run_pipeline(&subset, &params).map_err(Error::from).and_then(|(_, rep)| {
                        let rows = record_samples(&pipeline::surviving_records(&subset, &rep), dim);
                        Ok((rep.records_removed(), pca::pca(&rows)?))
                    });
                    let (removed, pca, error) = match outcome {
                        // per-record projections would dwarf the rest of the file
                        Ok((removed, p)) => (Some(removed), Some(PcaResult { scores: Vec::new(), ..p }), None),
                        Err(e) => (None, None, Some(e.to_string())),
                    };
                    groups.push(MbtiGroupOutput {
                        axis: format!("{axis:?}"),
                        letter,
                        records: subset.len(),
                        raters,
                        records_removed: removed,
                        pca,
                        error,
                    });
                }
            }
            #[derive(Serialize)]
            struct Out {
                meta: Meta,
                features: Vec<String>,
                groups: Vec<MbtiGroupOutput>,
            }
            files::write_json(&a.out.join("mbti.json"), &Out { meta: meta(), features: pca_labels(dim), groups })
        }
        AnalysisKind::Topics => {
            let records: Vec<RatingRecord> = files::read_jsonl(require(&a.records, "--records", "topics")?)?;
            let categories: BTreeMap<String, Category> =
                records.iter().map(|r| (r.question_id.clone(), r.category)).collect();
            let rows = analysis::topic_tiers(&analysis::tier_samples(&table, &categories));
            files::write_csv(&a.out.join("topics.csv"), &rows, &ctx.meta("analyze"))
        }
        AnalysisKind::Dist => {
            let keys: Vec<String> = match &a.key {
                Some(k) => vec![k.clone()],
                None => Feature::ALL.iter().map(|f| f.as_str().to_owned()).collect(),
            };
            for key in keys {
                let d = analysis::distribution_export(&table, &key, dim)?;
                let rows: Vec<DistRow> = d
                    .levels
                    .iter()
                    .map(|l| DistRow {
                        key: d.key.as_str().into(),
                        level: l.level.clone(),
                        n: l.samples.len(),
                        min: l.summary.min,
                        q1: l.summary.q1,
                        median: l.summary.median,
                        q3: l.summary.q3,
                        max: l.summary.max,
                        samples: l.samples.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
                    })
                    .collect();
                let mut meta = ctx.meta("analyze");
                meta.push(("dimension", dim.as_str().into()));
                for w in &d.warnings {
                    log::warn!("{key}: {w}");
                    meta.push(("warning", w.replace(' ', "_")));
                }
                files::write_csv(&a.out.join(format!("dist_{}.csv", d.key.as_str())), &rows, &meta)?;
            }
            Ok(())
        }
    }
}

fn target_spec(ctx: &Ctx, o: &ModelOpts) -> Result<TargetSpec> {
    let mode = match o.target {
        TargetArg::Record => TargetMode::Record,
        TargetArg::Mos => TargetMode::Mos,
    };
    let mut spec = TargetSpec::new(mode, o.dimension.into());
    spec.params = ctx.params(o.tau, o.gamma)?;
    Ok(spec)
}

fn dataset(path: &Path, spec: &TargetSpec) -> Result<(Dataset, pipeline::Anchors)> {
    let records: Vec<RatingRecord> = files::read_jsonl(path)?;
    Ok(Dataset::from_ratings(&records, spec)?)
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("serializable"));
}

fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let mut spec = target_spec(ctx, &a.opts)?;
    let (data, anchors) = dataset(&a.input, &spec)?;
    // record-mode models keep them too, for mapping predictions onto the MOS scale
    spec.anchors = Some(anchors);
    let hyper = ctx.hyper(&a.opts);
    let family = ModelFamily::from(a.model);
    let mut model = if a.holdout {
        let (tr, te) = predictor::split_by_category(&data, ctx.seed)?;
        let model = predictor::train(family, &tr, &hyper, ctx.seed)?;
        let m = predictor::evaluate(&model, &te)?;
        print_json(&serde_json::json!({"split": "category", "train_rows": tr.len(), "test_rows": te.len(), "test": m}));
        model
    } else {
        predictor::train(family, &data, &hyper, ctx.seed)?
    };
    model.target = Some(spec);
    files::write_model(&a.out, &model)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model = files::read_model(&a.model)?;
    let spec = model.target.clone().unwrap_or_else(|| TargetSpec::new(TargetMode::Record, Dimension::Overall));
    let (data, _) = dataset(&a.input, &spec)?;
    let m = predictor::evaluate(&model, &data)?;
    print_json(&m);
    if let Some(p) = a.out {
        files::write_json(&p, &m)?;
    }
    Ok(())
}

fn ablate(ctx: &Ctx, a: AblateArgs) -> Result<()> {
    let spec = target_spec(ctx, &a.opts)?;
    let (data, _) = dataset(&a.input, &spec)?;
    let hyper = ctx.hyper(&a.opts);
    let family = ModelFamily::from(a.model);
    let rows = predictor::ablate(&data, family, &hyper, ctx.seed)?;
    let mut meta = ctx.meta("ablate");
    meta.push(("model", family.as_str().into()));
    meta.push(("target", format!("{:?}", spec.mode).to_lowercase()));
    files::write_ablation_csv(&a.out, &rows, &meta)
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let model = files::read_model(&a.model)?;
    let content = ContentConfig::new(a.rho, a.alpha)?;
    let qos = QosConfig::new(a.speed, a.pos, a.dur)?;
    let p = predictor::predict_full(&model, &to_feature_vector(content, qos));
    #[derive(Serialize)]
    struct Out {
        raw: f64,
        clamped: f64,
        /// A z-score prediction mapped through the training MOS anchors.
        #[serde(skip_serializing_if = "Option::is_none")]
        mos: Option<f64>,
    }
    let mos = model.target.as_ref().filter(|t| t.mode == TargetMode::Record).and_then(|t| {
        let anchor = t.anchors.as_ref()?.get(&t.dimension)?;
        Some(anchor.scale(p.raw))
    });
    print_json(&Out { raw: p.raw, clamped: p.clamped, mos });
    Ok(())
}
