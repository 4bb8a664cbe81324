//! Command-line front end for the adversarial-text detection pipeline.
//!
//! Exit codes: 0 success, 2 input/parse problems, 3 schema mismatches,
//! 4 data problems (e.g. single-class training sets).

use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use advtext::classify::{self, ClassifierKind, Hyper, LinearModel};
use advtext::corpus::{
    self, tag_sentence, tokenize, LabeledPair, ManifestPair, TaggedSentence, TaggerModel,
};
use advtext::eval::{self, PipelineConfig};
use advtext::features::{
    CoherenceConfig, ExtractionContext, FeatureGroup, FeatureSchema, NgramVocab, Tagset,
};
use advtext::matrix::{write_atomic, FeatureMatrix};
use advtext::resources::{load_embeddings, load_frequencies, EmbeddingTable, FrequencyTable};
use advtext::{derive_seed, Error, Result};

#[derive(Parser)]
#[command(name = "advtext", version, about = "Detect machine-generated adversarial sentences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pair-preserving train/dev/test split of a dataset manifest
    Split(SplitArgs),
    /// Extract feature vectors for every sentence in a manifest
    Extract(ExtractArgs),
    /// Train a classifier from a feature matrix file
    Train(TrainArgs),
    /// Score sentences from standard input
    Predict(PredictArgs),
    /// Evaluate a trained model on a labeled manifest
    Evaluate(EvaluateArgs),
    /// Pick the coherence keep-ratio alpha on the development set
    TuneAlpha(TuneAlphaArgs),
    /// Induce a lexicon+suffix POS tagger from a tagged corpus
    TaggerTrain(TaggerTrainArgs),
    /// Train/evaluate every feature-subset and classifier combination
    Ablation(AblationArgs),
}

/// Flags shared by every command that loads resources and tags input.
#[derive(Args)]
struct ResourceArgs {
    /// Word-embedding table (GloVe text format)
    #[arg(long)]
    embeddings: PathBuf,
    /// Unigram frequency table (word<TAB>count)
    #[arg(long)]
    frequencies: PathBuf,
    /// Pre-tagged sentences (two-column format), two per manifest pair in
    /// pair order: human then machine
    #[arg(long)]
    tagged: Option<PathBuf>,
    /// Tagger model JSON used to tag raw manifest text
    #[arg(long)]
    tagger: Option<PathBuf>,
    /// Coherence keep-ratio
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    /// Feature groups, comma-separated: coherence,frequency,optimization,ngram
    #[arg(long, default_value = "coherence,frequency,optimization,ngram")]
    groups: String,
    /// Tagset: `ptb` or a file with one tag per line
    #[arg(long, default_value = "ptb")]
    tagset: String,
    /// Use raw counts instead of ln(1+count) for frequency statistics
    #[arg(long)]
    raw_freq: bool,
}

#[derive(Args)]
struct HyperArgs {
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    /// SMO box constraint
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// SMO KKT tolerance
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_passes: usize,
}

impl HyperArgs {
    fn to_hyper(&self, seed: u64) -> Hyper {
        Hyper {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            lambda: self.lambda,
            c: self.c,
            tol: self.tol,
            max_passes: self.max_passes,
            seed,
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// train,dev,test ratios
    #[arg(long, default_value = "0.6,0.2,0.2")]
    ratios: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    resources: ResourceArgs,
    /// Reuse a frozen n-gram vocabulary instead of building one
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Write the vocabulary built from this input
    #[arg(long)]
    vocab_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value = "svm-smo")]
    classifier: String,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    resources: ResourceArgs,
    /// Standard input is pre-tagged (two-column blocks) instead of raw text
    #[arg(long)]
    pretagged: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    resources: ResourceArgs,
    #[arg(long)]
    out: PathBuf,
    /// Optional two-column ROC dump
    #[arg(long)]
    roc_out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneAlphaArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    #[command(flatten)]
    resources: ResourceArgs,
    /// Pre-tagged sentences for the dev manifest (with --tagged covering the
    /// train manifest)
    #[arg(long)]
    tagged_dev: Option<PathBuf>,
    /// Comma-separated alpha grid; default 0.05,0.10,...,1.00
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value = "svm-smo")]
    classifier: String,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TaggerTrainArgs {
    /// Tagged training corpus (two-column format)
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblationArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    resources: ResourceArgs,
    /// Pre-tagged sentences for the test manifest
    #[arg(long)]
    tagged_test: Option<PathBuf>,
    /// Comma-separated classifier kinds
    #[arg(long, default_value = "logistic,svm-sgd,svm-smo")]
    classifiers: String,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Split(args) => cmd_split(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::TuneAlpha(args) => cmd_tune_alpha(args),
        Command::TaggerTrain(args) => cmd_tagger_train(args),
        Command::Ablation(args) => cmd_ablation(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SchemaMismatch { .. } => 3,
        Error::SingleClass
        | Error::NonConvergence { .. }
        | Error::TooFewPairs(_)
        | Error::EmptyTrainingSet
        | Error::EmptyEvalSet => 4,
        _ => 2,
    }
}

/// Resolves a resource path: the flag value wins, but a relative path that
/// does not exist is also tried under `$ADVTEXT_RESOURCES`.
fn resolve_resource(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("ADVTEXT_RESOURCES") {
        Some(dir) => {
            let candidate = PathBuf::from(dir).join(path);
            if candidate.exists() {
                candidate
            } else {
                path.to_path_buf()
            }
        }
        None => path.to_path_buf(),
    }
}

struct LoadedResources {
    embeddings: EmbeddingTable,
    frequencies: FrequencyTable,
    tagset: Tagset,
    groups: Vec<FeatureGroup>,
    alpha: f64,
    log_freq: bool,
}

impl ResourceArgs {
    fn load(&self) -> Result<LoadedResources> {
        CoherenceConfig::new(self.alpha)?;
        let embeddings = load_embeddings(&resolve_resource(&self.embeddings), None)?;
        let frequencies = load_frequencies(&resolve_resource(&self.frequencies))?;
        let tagset = if self.tagset == "ptb" {
            Tagset::ptb()
        } else {
            let text = std::fs::read_to_string(resolve_resource(Path::new(&self.tagset)))
                .map_err(|e| Error::io(self.tagset.clone(), e))?;
            Tagset::new(text.lines().filter(|l| !l.is_empty()))
        };
        let mut groups = Vec::new();
        for name in self.groups.split(',') {
            let group = FeatureGroup::parse(name.trim())?;
            if !groups.contains(&group) {
                groups.push(group);
            }
        }
        Ok(LoadedResources {
            embeddings,
            frequencies,
            tagset,
            groups,
            alpha: self.alpha,
            log_freq: !self.raw_freq,
        })
    }

    /// Turns manifest pairs into tagged sentence pairs, either via the
    /// pre-tagged file (two sentences per pair, human first) or the tagger.
    fn tag_pairs(&self, pairs: &[ManifestPair], tagged: Option<&Path>) -> Result<Vec<LabeledPair>> {
        let tagged = tagged.or(self.tagged.as_deref());
        if let Some(tagged_path) = tagged {
            let sentences = corpus::load_tagged_corpus(&resolve_resource(tagged_path))?;
            if sentences.len() != pairs.len() * 2 {
                return Err(Error::Invalid(format!(
                    "{}: expected {} tagged sentences for {} pairs, found {}",
                    tagged_path.display(),
                    pairs.len() * 2,
                    pairs.len(),
                    sentences.len()
                )));
            }
            return Ok(pairs
                .iter()
                .zip(sentences.chunks(2))
                .map(|(pair, chunk)| LabeledPair {
                    pair_id: pair.pair_id.clone(),
                    human: TaggedSentence::new(format!("{}.human", pair.pair_id), chunk[0].tokens.clone()),
                    machine: TaggedSentence::new(
                        format!("{}.machine", pair.pair_id),
                        chunk[1].tokens.clone(),
                    ),
                })
                .collect());
        }
        let tagger_path = self.tagger.as_ref().ok_or_else(|| {
            Error::Invalid("either --tagged or --tagger is required".to_string())
        })?;
        let tagger = TaggerModel::load(&resolve_resource(tagger_path))?;
        pairs
            .iter()
            .map(|pair| {
                let human = tag_sentence(
                    &format!("{}.human", pair.pair_id),
                    &tokenize(&pair.human_text)?,
                    &tagger,
                );
                let machine = tag_sentence(
                    &format!("{}.machine", pair.pair_id),
                    &tokenize(&pair.machine_text)?,
                    &tagger,
                );
                Ok(LabeledPair {
                    pair_id: pair.pair_id.clone(),
                    human,
                    machine,
                })
            })
            .collect()
    }
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Invalid(format!("bad ratios {s:?}")))?;
    if parts.len() != 3 {
        return Err(Error::Invalid(format!("expected 3 ratios, got {}", parts.len())));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn cmd_split(args: SplitArgs) -> Result<()> {
    let pairs = corpus::load_manifest(&args.manifest)?;
    let ratios = parse_ratios(&args.ratios)?;
    let seed = derive_seed(args.seed, "split");
    let (train, dev, test) = corpus::split_indices(pairs.len(), ratios, seed)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Error::io(args.out_dir.display().to_string(), e))?;
    for (name, indices) in [("train", &train), ("dev", &dev), ("test", &test)] {
        let subset: Vec<ManifestPair> = indices.iter().map(|&i| pairs[i].clone()).collect();
        let path = args.out_dir.join(format!("{name}.tsv"));
        write_atomic(&path, corpus::format_manifest(&subset).as_bytes())?;
        println!("{name}\t{} pairs\t{}", subset.len(), path.display());
    }
    Ok(())
}

fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let res = args.resources.load()?;
    let manifest = corpus::load_manifest(&args.manifest)?;
    let pairs = args.resources.tag_pairs(&manifest, None)?;
    let sentences: Vec<TaggedSentence> = pairs
        .iter()
        .flat_map(|p| [p.human.clone(), p.machine.clone()])
        .collect();
    let vocab = match &args.vocab {
        Some(path) => NgramVocab::load(&resolve_resource(path))?,
        None => advtext::features::build_ngram_vocab(&sentences),
    };
    if let Some(vocab_out) = &args.vocab_out {
        vocab.save(vocab_out)?;
    }
    let schema = FeatureSchema::build(&res.tagset, &vocab, &res.groups);
    // refuse to silently overwrite a matrix with a different schema
    if args.out.exists() {
        let existing = std::fs::read_to_string(&args.out)
            .map_err(|e| Error::io(args.out.display().to_string(), e))?;
        if let Some(line) = existing.lines().next() {
            if let Some(fp) = line.strip_prefix("# schema ") {
                if fp != schema.fingerprint() {
                    return Err(Error::SchemaMismatch {
                        expected: fp.to_string(),
                        actual: schema.fingerprint().to_string(),
                    });
                }
            }
        }
    }
    let ctx = ExtractionContext {
        embeddings: &res.embeddings,
        frequencies: &res.frequencies,
        tagset: &res.tagset,
        vocab: &vocab,
        coherence: CoherenceConfig::new(res.alpha)?,
        log_freq: res.log_freq,
    };
    let mut matrix = FeatureMatrix::new(schema.clone());
    for (i, sentence) in sentences.iter().enumerate() {
        let label = (i % 2) as u8; // human first, machine second per pair
        let fv = advtext::features::assemble_features(sentence, &ctx, &schema)?;
        matrix.push(sentence.id.clone(), label, fv.values)?;
    }
    matrix.save(&args.out)?;
    println!(
        "{} rows x {} features -> {}",
        matrix.rows.len(),
        schema.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let kind = ClassifierKind::parse(&args.classifier)?;
    let matrix = FeatureMatrix::load(&args.features)?;
    let hyper = args.hyper.to_hyper(derive_seed(args.seed, "train"));
    let x: Vec<Vec<f64>> = matrix.rows.iter().map(|r| r.values.clone()).collect();
    let y = matrix.labels();
    let model = classify::train(kind, &x, &y, &matrix.schema, &hyper)?;
    let correct = matrix
        .rows
        .iter()
        .filter(|row| {
            let fv = advtext::features::FeatureVector {
                schema_fingerprint: matrix.schema.fingerprint().to_string(),
                values: row.values.clone(),
            };
            model.predict(&fv).unwrap() == row.label
        })
        .count();
    model.save(&args.out)?;
    println!(
        "trained {} on {} rows, training accuracy {:.4} -> {}",
        kind.name(),
        matrix.rows.len(),
        correct as f64 / matrix.rows.len() as f64,
        args.out.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let model = LinearModel::load(&args.model)?;
    let schema = FeatureSchema::from_names(&model.feature_names)?;
    if schema.fingerprint() != model.schema_fingerprint {
        return Err(Error::SchemaMismatch {
            expected: model.schema_fingerprint.clone(),
            actual: schema.fingerprint().to_string(),
        });
    }
    let res = args.resources.load()?;
    let vocab = schema.vocab();

    let mut input = String::new();
    std::io::stdin()
        .read_to_string(&mut input)
        .map_err(|e| Error::io("stdin", e))?;
    let sentences: Vec<TaggedSentence> = if args.pretagged {
        corpus::parse_tagged_corpus(&input, "stdin")?
    } else {
        let tagger_path = args
            .resources
            .tagger
            .as_ref()
            .ok_or_else(|| Error::Invalid("--tagger is required for raw input".to_string()))?;
        let tagger = TaggerModel::load(&resolve_resource(tagger_path))?;
        input
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, line)| Ok(tag_sentence(&format!("s{i}"), &tokenize(line)?, &tagger)))
            .collect::<Result<_>>()?
    };

    let ctx = ExtractionContext {
        embeddings: &res.embeddings,
        frequencies: &res.frequencies,
        tagset: &res.tagset,
        vocab: &vocab,
        coherence: CoherenceConfig::new(res.alpha)?,
        log_freq: res.log_freq,
    };
    for sentence in &sentences {
        let fv = advtext::features::assemble_features(sentence, &ctx, &schema)?;
        let score = model.score(&fv)?;
        let label = if score > 0.0 { "machine" } else { "human" };
        println!("{}\t{}\t{}", sentence.id, score, label);
    }
    Ok(())
}

fn pipeline_config<'a>(
    res: &'a LoadedResources,
    kind: ClassifierKind,
    hyper: Hyper,
) -> PipelineConfig<'a> {
    PipelineConfig {
        embeddings: &res.embeddings,
        frequencies: &res.frequencies,
        tagset: &res.tagset,
        alpha: res.alpha,
        log_freq: res.log_freq,
        groups: res.groups.clone(),
        kind,
        hyper,
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let model = LinearModel::load(&args.model)?;
    let schema = FeatureSchema::from_names(&model.feature_names)?;
    if schema.fingerprint() != model.schema_fingerprint {
        return Err(Error::SchemaMismatch {
            expected: model.schema_fingerprint.clone(),
            actual: schema.fingerprint().to_string(),
        });
    }
    let res = args.resources.load()?;
    let manifest = corpus::load_manifest(&args.manifest)?;
    let pairs = args.resources.tag_pairs(&manifest, None)?;
    let mut cfg = pipeline_config(&res, model.kind, model.hyper);
    cfg.groups = schema.enabled_groups();
    let vocab = schema.vocab();
    let report = eval::evaluate(&model, &pairs, &cfg, &vocab)?;
    let rows = vec![eval::AblationRow {
        subset: schema.enabled_groups(),
        kind: model.kind,
        report: report.clone(),
    }];
    write_atomic(&args.out, eval::format_report_rows(&rows).as_bytes())?;
    if let Some(roc_out) = &args.roc_out {
        write_atomic(roc_out, eval::format_roc(&report.roc).as_bytes())?;
    }
    println!(
        "accuracy {:.4}\teer {:.4}\tn {}",
        report.accuracy, report.eer, report.n
    );
    Ok(())
}

fn cmd_tune_alpha(args: TuneAlphaArgs) -> Result<()> {
    let kind = ClassifierKind::parse(&args.classifier)?;
    let res = args.resources.load()?;
    let train_manifest = corpus::load_manifest(&args.train)?;
    let dev_manifest = corpus::load_manifest(&args.dev)?;
    let train_pairs = args.resources.tag_pairs(&train_manifest, None)?;
    let dev_pairs = args
        .resources
        .tag_pairs(&dev_manifest, args.tagged_dev.as_deref())?;
    let grid = match &args.grid {
        Some(spec) => spec
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("bad alpha {v:?}")))
            })
            .collect::<Result<Vec<f64>>>()?,
        None => eval::default_alpha_grid(),
    };
    let hyper = args.hyper.to_hyper(derive_seed(args.seed, "tune-alpha"));
    let cfg = pipeline_config(&res, kind, hyper);
    let (best, reports) = eval::tune_alpha(&train_pairs, &dev_pairs, &grid, &cfg)?;
    if let Some(out) = &args.out {
        let mut table = String::from("alpha\taccuracy\teer\n");
        for (alpha, report) in &reports {
            table.push_str(&format!("{alpha}\t{}\t{}\n", report.accuracy, report.eer));
        }
        write_atomic(out, table.as_bytes())?;
    }
    println!("alpha {best}");
    Ok(())
}

fn cmd_tagger_train(args: TaggerTrainArgs) -> Result<()> {
    let sentences = corpus::load_tagged_corpus(&args.corpus)?;
    let tagger = corpus::train_lexicon_tagger(&sentences)?;
    tagger.save(&args.out)?;
    println!(
        "lexicon {} words, {} suffix rules, default {} -> {}",
        tagger.lexicon.len(),
        tagger.suffix_rules.len(),
        tagger.default_tag,
        args.out.display()
    );
    Ok(())
}

fn cmd_ablation(args: AblationArgs) -> Result<()> {
    let res = args.resources.load()?;
    let kinds: Vec<ClassifierKind> = args
        .classifiers
        .split(',')
        .map(|k| ClassifierKind::parse(k.trim()))
        .collect::<Result<_>>()?;
    let train_manifest = corpus::load_manifest(&args.train)?;
    let test_manifest = corpus::load_manifest(&args.test)?;
    let train_pairs = args.resources.tag_pairs(&train_manifest, None)?;
    let test_pairs = args
        .resources
        .tag_pairs(&test_manifest, args.tagged_test.as_deref())?;
    let hyper = args.hyper.to_hyper(derive_seed(args.seed, "ablation"));
    let cfg = pipeline_config(&res, kinds[0], hyper);
    let rows = eval::run_ablation(
        &train_pairs,
        &test_pairs,
        &eval::standard_subsets(),
        &kinds,
        &cfg,
    )?;
    write_atomic(&args.out, eval::format_report_rows(&rows).as_bytes())?;
    for row in &rows {
        println!(
            "{}\t{}\taccuracy {:.4}\teer {:.4}",
            eval::subset_name(&row.subset),
            row.kind.name(),
            row.report.accuracy,
            row.report.eer
        );
    }
    Ok(())
}
