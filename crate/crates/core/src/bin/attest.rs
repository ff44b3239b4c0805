use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use attest_core::baselines::{BaselineSystem, Baselines};
use attest_core::config::{Config, JudgeKind, LlmBackendKind};
use attest_core::corpus::LexicalIndex;
use attest_core::eval::{evaluate, read_gold, EvalOptions, EvalReport};
use attest_core::pipeline::Engine;
use attest_core::response::{read_responses, write_responses, VerifiedResponse};
use attest_core::runner::{
    build_judge, build_templates, manifest_path, read_questions, run_batch, unix_now, LlmSource, RunManifest,
};

#[derive(Parser)]
#[command(name = "attest", version, about = "Answer questions with verified, cited claims")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a lexical index from a JSONL corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer questions with the verifying engine.
    Run(BatchArgs),
    /// Answer questions with a single-pass comparison system.
    Baseline {
        #[arg(long, value_enum)]
        system: BaselineSystem,
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// Score predictions; writes a JSON report and a text table beside it.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        index: PathBuf,
        #[arg(long, value_enum)]
        judge: Option<JudgeKind>,
        #[arg(long)]
        judge_url: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Row label in the rendered table.
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a saved report as a table.
    Report {
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    question_file: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scripted completions; overrides the configured completion backend.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Keep the full per-question trace in each output record.
    #[arg(long)]
    trace: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn cmd_index(corpus: &Path, out: &Path) -> Result<()> {
    let index = LexicalIndex::from_corpus_file(corpus).with_context(|| format!("reading {}", corpus.display()))?;
    index.save(out)?;
    let stats = index.stats();
    println!(
        "indexed {} documents, {} terms, fingerprint {}",
        stats.document_count,
        stats.vocabulary_size,
        &index.fingerprint()[..16]
    );
    Ok(())
}

fn cmd_batch(system: Option<BaselineSystem>, args: &BatchArgs) -> Result<bool> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(script) = &args.script {
        config.llm.backend = LlmBackendKind::Script;
        config.llm.script = Some(script.clone());
    }
    let index = LexicalIndex::load(&args.index)?;
    let questions = read_questions(&args.question_file)
        .with_context(|| format!("reading {}", args.question_file.display()))?;
    let llm = LlmSource::from_config(&config.llm)?;
    let judge = build_judge(&config.judge)?;
    let templates = build_templates(&config.prompts)?;

    let started = unix_now();
    let outcomes = run_batch(&questions, args.workers, |q| {
        let backend = llm.for_question(&q.id).map_err(|e| (e, None))?;
        match system {
            None => Engine::new(&*backend, &*judge, &index, &templates, &config.engine)
                .run(q)
                .map_err(|f| (f.error, Some(f.partial))),
            Some(s) => Baselines::new(&*backend, &index, &templates, &config.baseline)
                .run(s, &*judge, q)
                .map_err(|e| (e, None)),
        }
    })?;

    let responses: Vec<VerifiedResponse> = outcomes
        .iter()
        .filter_map(|o| o.response.clone())
        .map(|r| if args.trace { r } else { r.without_trace() })
        .collect();
    let mut out = BufWriter::new(
        fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?,
    );
    write_responses(&mut out, &responses)?;
    out.flush()?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: system.map_or_else(|| "run".to_string(), |s| format!("baseline:{}", s.name())),
        config,
        index_fingerprint: index.fingerprint().into(),
        index_stats: index.stats(),
        llm: llm.name(),
        judge: judge.name(),
        started_unix: started,
        finished_unix: unix_now(),
        questions: outcomes.into_iter().map(|o| o.status).collect(),
    };
    manifest.write(&manifest_path(&args.out))?;
    for q in manifest.questions.iter().filter(|q| q.error.is_some()) {
        eprintln!("question {} failed: {}", q.id, q.error.as_deref().unwrap_or_default());
    }
    println!(
        "{} of {} questions answered; wrote {}",
        responses.len(),
        manifest.questions.len(),
        args.out.display()
    );
    Ok(manifest.failed() == 0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    pred: &Path,
    gold: Option<&Path>,
    index: &Path,
    judge: Option<JudgeKind>,
    judge_url: Option<String>,
    config: Option<&Path>,
    system: Option<String>,
    out: &Path,
) -> Result<()> {
    let mut config = load_config(config)?;
    if let Some(kind) = judge {
        config.judge.backend = kind;
    }
    if judge_url.is_some() {
        config.judge.url = judge_url;
    }
    if config.judge.backend == JudgeKind::Remote && config.judge.url.is_none() {
        bail!("--judge remote needs --judge-url or judge.url in the config");
    }
    let judge = build_judge(&config.judge)?;
    let index = LexicalIndex::load(index)?;
    let responses = read_responses(BufReader::new(
        fs::File::open(pred).with_context(|| format!("opening {}", pred.display()))?,
    ))?;
    let golds = match gold {
        Some(p) => read_gold(BufReader::new(
            fs::File::open(p).with_context(|| format!("opening {}", p.display()))?,
        ))?,
        None => Default::default(),
    };
    let options = EvalOptions {
        premise_char_budget: config.eval.premise_char_budget,
        system,
    };
    let report = evaluate(&*judge, &index, &responses, &golds, &options)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;
    let text = report.render();
    fs::write(out.with_extension("txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_report(path: &Path) -> Result<()> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let report: EvalReport = serde_json::from_slice(&bytes).context("malformed report")?;
    print!("{}", report.render());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Index { corpus, out } => cmd_index(&corpus, &out).map(|_| true),
        Command::Run(args) => cmd_batch(None, &args),
        Command::Baseline { system, batch } => cmd_batch(Some(system), &batch),
        Command::Eval {
            pred,
            gold,
            index,
            judge,
            judge_url,
            config,
            system,
            out,
        } => cmd_eval(&pred, gold.as_deref(), &index, judge, judge_url, config.as_deref(), system, &out).map(|_| true),
        Command::Report { report } => cmd_report(&report).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
