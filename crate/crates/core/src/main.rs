use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use act_core::candidates_io::{load_candidates, load_question_entities, CandidateList, QuestionEntities};
use act_core::embeddings::{load_embeddings, EmbeddingTable};
use act_core::eval::{
    gold_missing_count, hit_at_1, load_dataset, render_ablation_table, run_ablation, type_accuracy, AblationConfig,
    DatasetFormat, EvalRecord, ReportDocument,
};
use act_core::kg_store::{ingest_snapshot, read_snapshot, IngestConfig, KgSnapshot, PropertyId};
use act_core::pipeline::{Pipeline, PipelineConfig, PoolSource, RunOutput};
use act_core::scoring::{write_predictions, ScoreMask, ScoreWeights, ScoringConfig, T2tMode};
use act_core::typing::{TypingConfig, DEFAULT_SIMILARITY_THRESHOLD, DEFAULT_TOP_K};

#[derive(Parser)]
#[command(
    name = "act",
    version,
    about = "Answer candidate type selection over a knowledge graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a snapshot file from triples and labels TSVs.
    IngestKg(IngestArgs),
    /// Rank answer candidates and write predictions as JSONL.
    Rank(RankArgs),
    /// Rank a dataset's questions and report Hit@1.
    Evaluate(EvalArgs),
    /// Hit@1 over every pool source and score subset.
    Ablate(AblateArgs),
    /// Answer-type accuracy of the selected type sets.
    TypeEval(TypeEvalArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    triples: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "P31")]
    instance_of: PropertyId,
    /// Skip and count malformed lines instead of failing.
    #[arg(long)]
    skip_malformed: bool,
}

#[derive(Args)]
struct KgArgs {
    /// Snapshot written by `ingest-kg`.
    #[arg(long, required_unless_present = "kg_endpoint", conflicts_with = "kg_endpoint")]
    kg: Option<PathBuf>,
    /// SPARQL endpoint to fetch the needed facts from.
    #[arg(long)]
    kg_endpoint: Option<String>,
    #[arg(long, default_value = ".act-cache")]
    kg_cache: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    kg_qps: f64,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long, default_value_t = DEFAULT_SIMILARITY_THRESHOLD)]
    sim_threshold: f64,
    /// Weights as type,neighbour,t2t,property.
    #[arg(long, default_value = "1,1,1,1")]
    weights: ScoreWeights,
    /// inverted or literal.
    #[arg(long = "t2t-score", default_value = "inverted")]
    t2t_mode: T2tMode,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "en")]
    language: String,
}

impl ModelArgs {
    fn typing(&self) -> TypingConfig {
        TypingConfig {
            top_k: self.top_k,
            similarity_threshold: self.sim_threshold,
            language: self.language.clone(),
        }
    }

    fn pipeline(&self, mask: ScoreMask, source: PoolSource) -> PipelineConfig {
        PipelineConfig {
            typing: self.typing(),
            scoring: ScoringConfig {
                weights: self.weights,
                mask,
                t2t_mode: self.t2t_mode,
            },
            source,
            threads: self.threads,
        }
    }
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    kg: KgArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Question entities JSONL; without it no neighbors are added.
    #[arg(long)]
    entities: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Score subset: "all" or a comma list of type,neighbour,t2t,property.
    #[arg(long, default_value = "all")]
    scores: ScoreMask,
    /// lm-only, neighbours-only or full.
    #[arg(long, default_value = "full")]
    pool: PoolSource,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// sqwd-tsv, rubq-json, mintaka-json or generic-jsonl.
    #[arg(long, default_value = "generic-jsonl")]
    format: DatasetFormat,
    /// Question entities JSONL; defaults to the ones in the dataset.
    #[arg(long)]
    entities: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    kg: KgArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, default_value = "all")]
    scores: ScoreMask,
    #[arg(long, default_value = "full")]
    pool: PoolSource,
    /// Also write the predictions JSONL here.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    kg: KgArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DatasetArgs,
    /// Plain-text table path; printed to stdout when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct TypeEvalArgs {
    #[command(flatten)]
    kg: KgArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DatasetArgs,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::IngestKg(args) => ingest(args),
        Command::Rank(args) => rank(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Ablate(args) => ablate(args),
        Command::TypeEval(args) => type_eval(args),
    }
}

fn ingest(args: IngestArgs) -> Result<()> {
    let config = IngestConfig {
        instance_of: args.instance_of,
        skip_malformed: args.skip_malformed,
    };
    let (snapshot, stats) = ingest_snapshot(&args.triples, &args.labels, &config)?;
    snapshot.write_to(&args.out)?;
    eprintln!(
        "{} triples ({} duplicates), {} label rows, {} skipped lines, {} entities",
        stats.triples,
        stats.duplicate_triples,
        stats.label_rows,
        stats.skipped_lines,
        snapshot.entity_count()
    );
    Ok(())
}

fn load_kg(
    kg: &KgArgs,
    language: &str,
    candidates: &[CandidateList],
    entities: &BTreeMap<String, QuestionEntities>,
) -> Result<KgSnapshot> {
    if let Some(path) = &kg.kg {
        return read_snapshot(path).with_context(|| format!("loading snapshot {}", path.display()));
    }
    let Some(endpoint) = &kg.kg_endpoint else {
        bail!("either --kg or --kg-endpoint is required");
    };
    remote_kg(endpoint, kg, language, candidates, entities)
}

#[cfg(feature = "remote")]
fn remote_kg(
    endpoint: &str,
    kg: &KgArgs,
    language: &str,
    candidates: &[CandidateList],
    entities: &BTreeMap<String, QuestionEntities>,
) -> Result<KgSnapshot> {
    use act_core::remote::{RemoteConfig, RemoteKg};
    let mut config = RemoteConfig::new(endpoint, &kg.kg_cache);
    config.qps = kg.kg_qps;
    config.language = language.to_owned();
    let client = RemoteKg::new(config)?;
    let snapshot = client.materialize(candidates, entities)?;
    log::info!("{} SPARQL requests sent", client.requests_sent());
    Ok(snapshot)
}

#[cfg(not(feature = "remote"))]
fn remote_kg(
    _: &str,
    _: &KgArgs,
    _: &str,
    _: &[CandidateList],
    _: &BTreeMap<String, QuestionEntities>,
) -> Result<KgSnapshot> {
    bail!("built without the `remote` feature; use --kg")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn run(
    snapshot: &KgSnapshot,
    table: &EmbeddingTable,
    config: &PipelineConfig,
    candidates: &[CandidateList],
    entities: &BTreeMap<String, QuestionEntities>,
) -> Result<RunOutput> {
    let pipeline = Pipeline::new(snapshot, table, config)?;
    Ok(pipeline.run(candidates, entities)?)
}

fn rank(args: RankArgs) -> Result<()> {
    let candidates = load_candidates(&args.model.candidates)?;
    let entities = match &args.entities {
        Some(path) => load_question_entities(path)?,
        None => BTreeMap::new(),
    };
    let snapshot = load_kg(&args.kg, &args.model.language, &candidates, &entities)?;
    let table = load_embeddings(&args.model.embeddings)?;
    let config = args.model.pipeline(args.scores, args.pool);
    let output = run(&snapshot, &table, &config, &candidates, &entities)?;

    let answers = output.outcomes.iter().map(|o| &o.answer);
    match &args.out {
        Some(path) => {
            let mut out = create(path)?;
            write_predictions(&mut out, answers)?;
            out.flush()?;
        }
        None => {
            let mut out = BufWriter::new(io::stdout().lock());
            write_predictions(&mut out, answers)?;
            out.flush()?;
        }
    }
    let stats = &output.stats;
    eprintln!(
        "{} questions, {} unlinked candidates, {} embedding misses, {} without entities, {} empty rankings",
        stats.questions,
        stats.link_drop_count,
        stats.embedding_miss_count,
        stats.questions_without_entities,
        stats.empty_rankings
    );
    Ok(())
}

/// Everything the dataset-driven subcommands share.
struct EvalInputs {
    records: Vec<EvalRecord>,
    candidates: Vec<CandidateList>,
    entities: BTreeMap<String, QuestionEntities>,
    snapshot: KgSnapshot,
    table: EmbeddingTable,
}

fn dataset_entities(records: &[EvalRecord]) -> BTreeMap<String, QuestionEntities> {
    records
        .iter()
        .map(|r| {
            let q = QuestionEntities {
                question_id: r.question_id.clone(),
                entities: r.question_entities.clone(),
            };
            (r.question_id.clone(), q)
        })
        .collect()
}

fn load_eval_inputs(kg: &KgArgs, model: &ModelArgs, data: &DatasetArgs) -> Result<EvalInputs> {
    let candidates = load_candidates(&model.candidates)?;
    // Dataset filters that need the graph are applied once it is loaded.
    let unfiltered = load_dataset(&data.dataset, data.format, None)?;
    let entities = match &data.entities {
        Some(path) => load_question_entities(path)?,
        None => dataset_entities(&unfiltered.records),
    };
    let snapshot = load_kg(kg, &model.language, &candidates, &entities)?;
    let dataset = load_dataset(&data.dataset, data.format, Some(&snapshot))?;
    if dataset.skipped > 0 {
        log::info!("{} dataset records skipped", dataset.skipped);
    }
    let table = load_embeddings(&model.embeddings)?;
    Ok(EvalInputs {
        records: dataset.records,
        candidates,
        entities,
        snapshot,
        table,
    })
}

fn write_report(path: &Path, report: &ReportDocument) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn evaluate(args: EvalArgs) -> Result<()> {
    let inputs = load_eval_inputs(&args.kg, &args.model, &args.data)?;
    let config = args.model.pipeline(args.scores, args.pool);
    let output = run(
        &inputs.snapshot,
        &inputs.table,
        &config,
        &inputs.candidates,
        &inputs.entities,
    )?;

    let mut report = hit_at_1(&inputs.records, &output.answers());
    let types = type_accuracy(
        &inputs.records,
        &output.type_sets(),
        &output.lm_candidates(),
        &inputs.snapshot,
    );
    report.type_accuracy = Some(types.type_accuracy);
    report.candidate_type_match_rate = Some(types.candidate_type_match_rate);
    report.link_drop_count = output.stats.link_drop_count;
    report.embedding_miss_count = output.stats.embedding_miss_count;
    report.gold_missing_count = gold_missing_count(&inputs.records, &inputs.snapshot);

    if let Some(path) = &args.predictions {
        let mut out = create(path)?;
        write_predictions(&mut out, output.outcomes.iter().map(|o| &o.answer))?;
        out.flush()?;
    }
    println!(
        "Hit@1 {:.4} ({}/{})",
        report.hit_at_1, report.correct, report.n_questions
    );
    write_report(
        &args.data.report,
        &ReportDocument {
            report,
            type_eval: Some(types),
            run_stats: Some(output.stats),
            ablation: None,
        },
    )
}

fn ablate(args: AblateArgs) -> Result<()> {
    let inputs = load_eval_inputs(&args.kg, &args.model, &args.data)?;
    let cells = run_ablation(&AblationConfig {
        records: &inputs.records,
        candidates: &inputs.candidates,
        entities: &inputs.entities,
        snapshot: &inputs.snapshot,
        table: &inputs.table,
        typing: args.model.typing(),
        weights: args.model.weights,
        t2t_mode: args.model.t2t_mode,
        threads: args.model.threads,
    })?;
    let rendered = render_ablation_table(&cells);
    match &args.table {
        Some(path) => fs::write(path, &rendered).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{rendered}"),
    }

    // The headline report is the full pool with every score.
    let config = args.model.pipeline(ScoreMask::all(), PoolSource::Full);
    let output = run(
        &inputs.snapshot,
        &inputs.table,
        &config,
        &inputs.candidates,
        &inputs.entities,
    )?;
    let mut report = hit_at_1(&inputs.records, &output.answers());
    report.link_drop_count = output.stats.link_drop_count;
    report.embedding_miss_count = output.stats.embedding_miss_count;
    report.gold_missing_count = gold_missing_count(&inputs.records, &inputs.snapshot);
    write_report(
        &args.data.report,
        &ReportDocument {
            report,
            type_eval: None,
            run_stats: Some(output.stats),
            ablation: Some(cells),
        },
    )
}

fn type_eval(args: TypeEvalArgs) -> Result<()> {
    let inputs = load_eval_inputs(&args.kg, &args.model, &args.data)?;
    let config = args.model.pipeline(ScoreMask::all(), PoolSource::Full);
    let output = run(
        &inputs.snapshot,
        &inputs.table,
        &config,
        &inputs.candidates,
        &inputs.entities,
    )?;
    let types = type_accuracy(
        &inputs.records,
        &output.type_sets(),
        &output.lm_candidates(),
        &inputs.snapshot,
    );
    println!(
        "type accuracy {:.4} ({}/{}), candidate type match {:.4} ({}/{})",
        types.type_accuracy,
        types.questions_matched,
        types.questions,
        types.candidate_type_match_rate,
        types.candidates_matched,
        types.candidates
    );
    let mut report = hit_at_1(&inputs.records, &output.answers());
    report.type_accuracy = Some(types.type_accuracy);
    report.candidate_type_match_rate = Some(types.candidate_type_match_rate);
    report.link_drop_count = output.stats.link_drop_count;
    report.embedding_miss_count = output.stats.embedding_miss_count;
    report.gold_missing_count = gold_missing_count(&inputs.records, &inputs.snapshot);
    write_report(
        &args.data.report,
        &ReportDocument {
            report,
            type_eval: Some(types),
            run_stats: Some(output.stats),
            ablation: None,
        },
    )
}
