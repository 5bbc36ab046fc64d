//! Command-line frontend: train the pipeline, rewrite sentences toward a
//! target gender context, evaluate outputs, build augmented training data and
//! post-edit MT output.
//!
//! Input and output are one tokenized sentence per line, UTF-8. Errors print
//! a single `error: ...` line on stderr and exit nonzero.

use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use gender_rewrite::corpus::PerTarget;
use gender_rewrite::eval::NormalizationTable;
use gender_rewrite::pipeline::{
    self, evaluate, read_sentences, tokenize_lines, write_sentences, Pipeline, PipelineConfig,
};
use gender_rewrite::SentenceTarget;

#[derive(Parser)]
#[command(
    name = "gender-rewrite",
    version,
    about = "Multi-step gender rewriting: identify word genders, rewrite, rank in context"
)]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Target user gender context.
    #[arg(long, global = true, value_parser = parse_target)]
    target: Option<SentenceTarget>,

    /// Evaluate in the orthographically normalized space.
    #[arg(long, global = true)]
    normalize: bool,

    /// Write per-sentence decision traces as JSON lines.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

fn parse_target(s: &str) -> Result<SentenceTarget, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Subcommand)]
enum Command {
    /// Train all pipeline components and write the model files.
    Train,
    /// Rewrite sentences toward the --target gender context.
    Rewrite(RewriteArgs),
    /// Score hypotheses against references with the MaxMatch scorer and BLEU.
    Evaluate(EvaluateArgs),
    /// Build augmented training data from a sentence-pair pool.
    Augment(AugmentArgs),
    /// Re-target MT output for all four gender contexts.
    #[command(name = "post-edit")]
    PostEdit(PostEditArgs),
}

#[derive(Args)]
struct RewriteArgs {
    /// Input file; stdin when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Source sentences (the pre-rewrite input).
    #[arg(long)]
    source: PathBuf,
    /// System output to score.
    #[arg(long)]
    hypothesis: PathBuf,
    /// One or more reference files.
    #[arg(long, required = true, num_args = 1..)]
    reference: Vec<PathBuf>,
}

#[derive(Args)]
struct AugmentArgs {
    /// Pool of sentence pairs, one `source<TAB>target` per line.
    #[arg(long)]
    pool: PathBuf,
    /// Directory for the augmented corpus.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PostEditArgs {
    /// MT hypotheses, one sentence per line.
    #[arg(long)]
    input: PathBuf,
    /// Directory for the four re-targeted outputs.
    #[arg(long)]
    out_dir: PathBuf,
    /// Directory with per-target references named like the corpus files
    /// (`target-1M2M.txt`, ...).
    #[arg(long)]
    ref_dir: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => bail!("--config is required for this command"),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.normalize {
        config.normalize = true;
    }
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Train => {
            let config = load_config(&cli)?;
            let summary = pipeline::train(&config)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Rewrite(args) => {
            let config = load_config(&cli)?;
            let target = cli.target.ok_or_else(|| anyhow!("rewrite requires --target"))?;
            let sentences = match &args.input {
                Some(path) => read_sentences(path)?,
                None => {
                    let mut buf = String::new();
                    std::io::stdin().read_to_string(&mut buf).context("reading stdin")?;
                    buf.lines().map(str::to_string).collect()
                }
            };
            let pipeline = Pipeline::load(&config)?;
            let traces = pipeline.rewrite_all(&sentences, target)?;
            let outputs: Vec<String> = traces.iter().map(|t| t.selected.join(" ")).collect();
            match &args.output {
                Some(path) => write_sentences(path, &outputs)?,
                None => {
                    let stdout = std::io::stdout();
                    let mut out = BufWriter::new(stdout.lock());
                    for line in &outputs {
                        writeln!(out, "{line}")?;
                    }
                }
            }
            if let Some(trace_path) = &cli.trace {
                let file = std::fs::File::create(trace_path)
                    .with_context(|| format!("creating {}", trace_path.display()))?;
                let mut out = BufWriter::new(file);
                for trace in &traces {
                    serde_json::to_writer(&mut out, trace)?;
                    writeln!(out)?;
                }
            }
        }
        Command::Evaluate(args) => {
            let sources = tokenize_lines(&read_sentences(&args.source)?);
            let hypotheses = tokenize_lines(&read_sentences(&args.hypothesis)?);
            let reference_files: Vec<Vec<Vec<String>>> = args
                .reference
                .iter()
                .map(|p| Ok(tokenize_lines(&read_sentences(p)?)))
                .collect::<anyhow::Result<_>>()?;
            for file in &reference_files {
                if file.len() != sources.len() {
                    bail!(
                        "length mismatch: {} reference sentences vs {} sources",
                        file.len(),
                        sources.len()
                    );
                }
            }
            let references: Vec<Vec<Vec<String>>> = (0..sources.len())
                .map(|i| reference_files.iter().map(|f| f[i].clone()).collect())
                .collect();
            let table = NormalizationTable::default_table();
            let normalization = cli.normalize.then_some(&table);
            let block = evaluate(&sources, &hypotheses, &references, normalization)?;
            println!(
                "P {:.2}  R {:.2}  F0.5 {:.2}  BLEU {:.2}",
                100.0 * block.m2.precision,
                100.0 * block.m2.recall,
                100.0 * block.m2.f_beta,
                block.bleu
            );
        }
        Command::Augment(args) => {
            let config = load_config(&cli)?;
            let pipeline = Pipeline::load(&config)?;
            let pool = read_pool(&args.pool)?;
            let summary = pipeline::augment_to_dir(&pipeline, &config, &pool, &args.out_dir)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::PostEdit(args) => {
            let config = load_config(&cli)?;
            let pipeline = Pipeline::load(&config)?;
            let hypotheses = read_sentences(&args.input)?;
            let references = match &args.ref_dir {
                Some(dir) => Some(read_reference_dir(dir, hypotheses.len())?),
                None => None,
            };
            let table = NormalizationTable::default_table();
            let (outputs, report) =
                pipeline::post_edit(&pipeline, &hypotheses, references.as_ref(), &table)?;
            for (target, sentences) in outputs.iter() {
                let path = args.out_dir.join(format!("postedit-{}.txt", target.file_tag()));
                write_sentences(&path, sentences)?;
            }
            println!("target      raw    post-edited");
            for (target, raw, post) in &report.per_target {
                let fmt = |v: &Option<f64>| match v {
                    Some(b) => format!("{b:.2}"),
                    None => "-".to_string(),
                };
                println!("{target}   {:>6}  {:>6}", fmt(raw), fmt(post));
            }
        }
    }
    Ok(())
}

fn read_pool(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading pool {}", path.display()))?;
    let mut pool = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (source, target) = line
            .split_once('\t')
            .ok_or_else(|| anyhow!("pool line {} is not source<TAB>target", i + 1))?;
        pool.push((source.to_string(), target.to_string()));
    }
    Ok(pool)
}

fn read_reference_dir(dir: &Path, expected: usize) -> anyhow::Result<PerTarget<Vec<String>>> {
    let mut refs = Vec::with_capacity(4);
    for target in SentenceTarget::ALL {
        let path = dir.join(format!("target-{}.txt", target.file_tag()));
        let sentences = read_sentences(&path)?;
        if sentences.len() != expected {
            bail!(
                "reference {} has {} sentences, expected {expected}",
                path.display(),
                sentences.len()
            );
        }
        refs.push(sentences);
    }
    let mut iter = refs.into_iter();
    Ok(PerTarget([
        iter.next().unwrap(),
        iter.next().unwrap(),
        iter.next().unwrap(),
        iter.next().unwrap(),
    ]))
}
