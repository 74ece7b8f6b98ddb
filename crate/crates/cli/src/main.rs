use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod files;

#[derive(Parser)]
#[command(
    name = "matner",
    version,
    about = "Extract materials and synthesis conditions from full-text articles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse XML articles into paragraph JSON lines.
    Ingest(IngestArgs),
    /// Convert brat standoff annotations to an IOB corpus.
    CorpusConvert(ConvertArgs),
    /// Split an IOB corpus into train, dev and test files.
    Split(SplitArgs),
    /// Train a tagger.
    Train(TrainArgs),
    /// Random hyperparameter search.
    Search(SearchArgs),
    /// Tag ingested documents with a trained model.
    Tag(TagArgs),
    /// Normalize tagged quantities into extraction records.
    Normalize(NormalizeArgs),
    /// Score predicted IOB against gold IOB.
    Eval(EvalArgs),
    /// Agreement between two annotators' IOB files.
    Iaa(IaaArgs),
    /// Train skip-gram word vectors on ingested documents.
    WordvecTrain(WordvecArgs),
    /// Assign material types to extracted material names.
    Classify(ClassifyArgs),
    /// Aggregate extraction records into trend tables.
    Trends(TrendsArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    /// An XML file or a directory of them.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// JSON lines with doc_id, year and country.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Keep only sections whose heading contains one of these.
    #[arg(long, value_delimiter = ',')]
    pub sections: Vec<String>,
}

#[derive(Args)]
pub struct ConvertArgs {
    /// Directory of `.txt`/`.ann` pairs.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for train.iob, dev.iob and test.iob.
    #[arg(long)]
    pub output: PathBuf,
    /// Train, dev and test fractions.
    #[arg(long, default_value = "0.8,0.1,0.1", value_parser = parse_ratios)]
    pub ratios: (f64, f64, f64),
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep all paragraphs of a paper in the same part.
    #[arg(long)]
    pub by_paper: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// TOML file with tagger config fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Word vectors used to initialize the embedding table.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

#[derive(Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    /// JSON report of all trials.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base config for fields not searched.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct TagArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Documents written by `ingest`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub sections: Vec<String>,
    /// Decode without the IOB transition mask.
    #[arg(long)]
    pub unconstrained: bool,
}

#[derive(Args)]
pub struct NormalizeArgs {
    /// Paragraphs written by `tag`.
    #[arg(long)]
    pub input: PathBuf,
    /// Extraction records, one per paragraph.
    #[arg(long)]
    pub output: PathBuf,
    /// Every normalized quantity with its source span.
    #[arg(long)]
    pub quantities: Option<PathBuf>,
    /// Phrases no pattern recognized.
    #[arg(long)]
    pub gaps: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "exact")]
    pub mode: matner::metrics::MatchMode,
    /// JSON report.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Confusion matrix CSV.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

#[derive(Args)]
pub struct IaaArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value = "exact")]
    pub mode: matner::metrics::MatchMode,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct WordvecArgs {
    /// Documents written by `ingest`.
    #[arg(long)]
    pub input: PathBuf,
    /// Text vectors, one `token v1 ... vd` line per word.
    #[arg(long)]
    pub output: PathBuf,
    /// TOML file with word-vector config fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct ClassifyArgs {
    /// Extraction records written by `normalize`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub vectors: PathBuf,
    /// CSV of term, best query and similarity.
    #[arg(long)]
    pub output: PathBuf,
    /// Copy of the records with material types filled in.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub queries: Vec<String>,
}

#[derive(Args)]
pub struct TrendsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for the CSV tables.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=2))]
    pub buckets: u32,
    /// Sections counted in the year ranking.
    #[arg(long, value_delimiter = ',', default_value = "Abstract")]
    pub sections: Vec<String>,
    /// Count every section in the year ranking.
    #[arg(long, conflicts_with = "sections")]
    pub all_sections: bool,
    /// Restrict the condition table to this material name.
    #[arg(long, conflicts_with = "material_type")]
    pub material: Option<String>,
    /// Restrict the condition table to this material type.
    #[arg(long)]
    pub material_type: Option<String>,
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [a, b, c] => Ok((*a, *b, *c)),
        _ => Err(format!("expected three comma-separated ratios, got {}", parts.len())),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::CorpusConvert(a) => commands::corpus_convert(a),
        Command::Split(a) => commands::split(a),
        Command::Train(a) => commands::train(a),
        Command::Search(a) => commands::search(a),
        Command::Tag(a) => commands::tag(a),
        Command::Normalize(a) => commands::normalize(a),
        Command::Eval(a) => commands::eval(a),
        Command::Iaa(a) => commands::iaa(a),
        Command::WordvecTrain(a) => commands::wordvec_train(a),
        Command::Classify(a) => commands::classify(a),
        Command::Trends(a) => commands::trends(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
