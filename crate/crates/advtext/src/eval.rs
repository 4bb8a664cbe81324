//! Accuracy, ROC/EER metrics, dev-set alpha tuning and feature-group
//! ablations.

use std::fmt::Write as _;

use crate::classify::{self, ClassifierKind, Hyper, LinearModel};
use crate::corpus::LabeledPair;
use crate::features::{
    assemble_features, build_ngram_vocab, CoherenceConfig, ExtractionContext, FeatureGroup,
    FeatureSchema, NgramVocab, Tagset,
};
use crate::resources::{EmbeddingTable, FrequencyTable};
use crate::{Error, Result};

/// One operating point on the score sweep. `fpr` is the rate of human
/// sentences scored as machine, `fnr` the rate of machine sentences scored
/// as human, with the decision rule `machine iff score > threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub fnr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub eer: f64,
    pub confusion: Confusion,
    pub roc: Vec<RocPoint>,
    pub n: usize,
}

/// Sweeps thresholds at +-infinity and the midpoints between consecutive
/// distinct scores.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::DimMismatch(scores.len(), labels.len()));
    }
    let n_m = labels.iter().filter(|&&l| l == 1).count();
    let n_h = labels.len() - n_m;
    if n_m == 0 || n_h == 0 {
        return Err(Error::SingleClass);
    }
    let mut sorted: Vec<(f64, u8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut thresholds = vec![f64::NEG_INFINITY];
    for w in sorted.windows(2) {
        if w[0].0 < w[1].0 {
            thresholds.push(0.5 * (w[0].0 + w[1].0));
        }
    }
    thresholds.push(f64::INFINITY);

    // single pass: maintain counts of samples at or below the threshold
    let mut points = Vec::with_capacity(thresholds.len());
    let mut idx = 0usize;
    let mut h_below = 0usize;
    let mut m_below = 0usize;
    for t in thresholds {
        while idx < sorted.len() && sorted[idx].0 <= t {
            if sorted[idx].1 == 0 {
                h_below += 1;
            } else {
                m_below += 1;
            }
            idx += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: (n_h - h_below) as f64 / n_h as f64,
            fnr: m_below as f64 / n_m as f64,
        });
    }
    Ok(points)
}

fn eer_from_curve(points: &[RocPoint]) -> f64 {
    for (i, p) in points.iter().enumerate() {
        let diff = p.fpr - p.fnr;
        if diff == 0.0 {
            return p.fpr;
        }
        if diff < 0.0 {
            // crossing lies between points i-1 and i
            let prev = points[i - 1];
            let d1 = prev.fpr - prev.fnr;
            let d2 = diff;
            let s = d1 / (d1 - d2);
            return prev.fpr + (p.fpr - prev.fpr) * s;
        }
    }
    // fpr - fnr starts at 1 and ends at -1, so a crossing always exists
    unreachable!("EER crossing not found")
}

/// Equal error rate: the operating point where the false-positive and
/// false-negative rates coincide, linearly interpolated at the sign change
/// of their difference.
pub fn compute_eer(scores: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(eer_from_curve(&roc_curve(scores, labels)?))
}

/// Scores a list of labeled sentences and computes accuracy (threshold 0,
/// ties to human), the confusion counts and the EER over raw scores.
pub fn report_from_scores(scores: &[f64], labels: &[u8]) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let roc = roc_curve(scores, labels)?;
    let eer = eer_from_curve(&roc);
    let mut confusion = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        let predicted = if s > 0.0 { 1 } else { 0 };
        match (l, predicted) {
            (1, 1) => confusion.tp += 1,
            (0, 1) => confusion.fp += 1,
            (0, 0) => confusion.tn += 1,
            (1, 0) => confusion.fn_ += 1,
            _ => unreachable!(),
        }
    }
    let n = scores.len();
    Ok(EvalReport {
        accuracy: (confusion.tp + confusion.tn) as f64 / n as f64,
        eer,
        confusion,
        roc,
        n,
    })
}

/// Shared extraction settings for pipeline runs.
#[derive(Clone)]
pub struct PipelineConfig<'a> {
    pub embeddings: &'a EmbeddingTable,
    pub frequencies: &'a FrequencyTable,
    pub tagset: &'a Tagset,
    pub alpha: f64,
    pub log_freq: bool,
    pub groups: Vec<FeatureGroup>,
    pub kind: ClassifierKind,
    pub hyper: Hyper,
}

impl PipelineConfig<'_> {
    fn context<'b>(&'b self, vocab: &'b NgramVocab) -> Result<ExtractionContext<'b>> {
        Ok(ExtractionContext {
            embeddings: self.embeddings,
            frequencies: self.frequencies,
            tagset: self.tagset,
            vocab,
            coherence: CoherenceConfig::new(self.alpha)?,
            log_freq: self.log_freq,
        })
    }
}

fn sentences_of(pairs: &[LabeledPair]) -> impl Iterator<Item = (&crate::corpus::TaggedSentence, u8)> {
    pairs
        .iter()
        .flat_map(|p| [(&p.human, 0u8), (&p.machine, 1u8)])
}

/// Extracts a feature matrix (two rows per pair) under a fixed schema.
pub fn extract_matrix(
    pairs: &[LabeledPair],
    ctx: &ExtractionContext,
    schema: &FeatureSchema,
) -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
    let mut x = Vec::with_capacity(pairs.len() * 2);
    let mut y = Vec::with_capacity(pairs.len() * 2);
    for (sentence, label) in sentences_of(pairs) {
        x.push(assemble_features(sentence, ctx, schema)?.values);
        y.push(label);
    }
    Ok((x, y))
}

/// Builds the n-gram vocabulary from the training pairs, extracts features
/// and trains the configured classifier. Returns the model and the frozen
/// vocabulary.
pub fn train_pipeline(
    cfg: &PipelineConfig,
    train_pairs: &[LabeledPair],
) -> Result<(LinearModel, NgramVocab)> {
    let train_sentences: Vec<_> = sentences_of(train_pairs).map(|(s, _)| s.clone()).collect();
    let vocab = build_ngram_vocab(&train_sentences);
    let schema = FeatureSchema::build(cfg.tagset, &vocab, &cfg.groups);
    let ctx = cfg.context(&vocab)?;
    let (x, y) = extract_matrix(train_pairs, &ctx, &schema)?;
    let model = classify::train(cfg.kind, &x, &y, &schema, &cfg.hyper)?;
    Ok((model, vocab))
}

/// Extracts features for both members of every pair, scores them with the
/// model and reports accuracy, confusion counts and EER.
pub fn evaluate(
    model: &LinearModel,
    pairs: &[LabeledPair],
    cfg: &PipelineConfig,
    vocab: &NgramVocab,
) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let schema = FeatureSchema::from_names(&model.feature_names)?;
    if schema.fingerprint() != model.schema_fingerprint {
        return Err(Error::SchemaMismatch {
            expected: model.schema_fingerprint.clone(),
            actual: schema.fingerprint().to_string(),
        });
    }
    let ctx = cfg.context(vocab)?;
    let mut scores = Vec::with_capacity(pairs.len() * 2);
    let mut labels = Vec::with_capacity(pairs.len() * 2);
    for (sentence, label) in sentences_of(pairs) {
        let fv = assemble_features(sentence, &ctx, &schema)?;
        scores.push(model.score(&fv)?);
        labels.push(label);
    }
    report_from_scores(&scores, &labels)
}

/// The default alpha grid: 0.05, 0.10, ..., 1.00.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

/// Retrains on the training pairs for every grid alpha and evaluates on the
/// dev pairs. Returns the accuracy-maximizing alpha (ties to the smaller
/// value) and every per-alpha report.
pub fn tune_alpha(
    train_pairs: &[LabeledPair],
    dev_pairs: &[LabeledPair],
    grid: &[f64],
    cfg: &PipelineConfig,
) -> Result<(f64, Vec<(f64, EvalReport)>)> {
    if grid.is_empty() {
        return Err(Error::Invalid("empty alpha grid".to_string()));
    }
    let mut reports = Vec::with_capacity(grid.len());
    for &alpha in grid {
        CoherenceConfig::new(alpha)?;
        let mut run_cfg = cfg.clone();
        run_cfg.alpha = alpha;
        let (model, vocab) = train_pipeline(&run_cfg, train_pairs)?;
        let report = evaluate(&model, dev_pairs, &run_cfg, &vocab)?;
        reports.push((alpha, report));
    }
    let best = reports
        .iter()
        .max_by(|a, b| {
            a.1.accuracy
                .partial_cmp(&b.1.accuracy)
                .unwrap()
                .then(b.0.partial_cmp(&a.0).unwrap())
        })
        .map(|(alpha, _)| *alpha)
        .unwrap();
    Ok((best, reports))
}

/// Human-readable name for a feature-group subset.
pub fn subset_name(groups: &[FeatureGroup]) -> String {
    groups
        .iter()
        .map(|g| g.name())
        .collect::<Vec<_>>()
        .join("+")
}

/// The seven subsets evaluated in the feature-combination table: the four
/// individual groups, then coherence+frequency, +optimization, all four.
pub fn standard_subsets() -> Vec<Vec<FeatureGroup>> {
    vec![
        vec![FeatureGroup::Coherence],
        vec![FeatureGroup::Frequency],
        vec![FeatureGroup::Optimization],
        vec![FeatureGroup::PosNgram],
        vec![FeatureGroup::Coherence, FeatureGroup::Frequency],
        vec![
            FeatureGroup::Coherence,
            FeatureGroup::Frequency,
            FeatureGroup::Optimization,
        ],
        FeatureGroup::ALL.to_vec(),
    ]
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub subset: Vec<FeatureGroup>,
    pub kind: ClassifierKind,
    pub report: EvalReport,
}

/// Trains on the train split and evaluates on the test split for every
/// (feature subset, classifier) combination.
pub fn run_ablation(
    train_pairs: &[LabeledPair],
    test_pairs: &[LabeledPair],
    subsets: &[Vec<FeatureGroup>],
    kinds: &[ClassifierKind],
    cfg: &PipelineConfig,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for subset in subsets {
        for &kind in kinds {
            let mut run_cfg = cfg.clone();
            run_cfg.groups = subset.clone();
            run_cfg.kind = kind;
            let (model, vocab) = train_pipeline(&run_cfg, train_pairs)?;
            let report = evaluate(&model, test_pairs, &run_cfg, &vocab)?;
            rows.push(AblationRow {
                subset: subset.clone(),
                kind,
                report,
            });
        }
    }
    Ok(rows)
}

/// Report TSV:
/// `subset<TAB>classifier<TAB>accuracy<TAB>eer<TAB>tp<TAB>fp<TAB>tn<TAB>fn`.
pub fn format_report_rows(rows: &[AblationRow]) -> String {
    let mut out = String::from("subset\tclassifier\taccuracy\teer\ttp\tfp\ttn\tfn\n");
    for row in rows {
        let c = &row.report.confusion;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            subset_name(&row.subset),
            row.kind.name(),
            row.report.accuracy,
            row.report.eer,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
        )
        .unwrap();
    }
    out
}

/// Optional ROC dump: two-column TSV of (fpr, fnr).
pub fn format_roc(points: &[RocPoint]) -> String {
    let mut out = String::from("fpr\tfnr\n");
    for p in points {
        writeln!(out, "{}\t{}", p.fpr, p.fnr).unwrap();
    }
    out
}
