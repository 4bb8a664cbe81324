//! The four feature extractors and deterministic schema assembly.
//!
//! Step 1: every token pair with embedding vectors is matched, the closest
//! `alpha` fraction (Euclidean distance, ascending) is kept, and per
//! POS-pair group the mean and population variance of the kept distances
//! become the coherence features. A 45-tag tagset yields 1035 groups and
//! 2070 values.
//!
//! Step 2: per-token `ln(1 + frequency)` values are grouped by POS tag and
//! summarized the same way (2 values per tag).
//!
//! Step 3: counts of successive duplicate phrases (lengths 1-5) plus the
//! sentence length form the optimization features.
//!
//! Step 4: POS n-gram counts (n up to 3) against a vocabulary frozen from
//! the training split.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::TaggedSentence;
use crate::resources::{EmbeddingTable, FrequencyTable};
use crate::{Error, Result};

/// Active POS tagset in canonical (lexicographic) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tagset {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl Tagset {
    pub fn new(tags: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let set: BTreeSet<String> = tags.into_iter().map(Into::into).collect();
        let tags: Vec<String> = set.into_iter().collect();
        let index = tags
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Tagset { tags, index }
    }

    /// The default 45-symbol Penn Treebank tagset.
    pub fn ptb() -> Self {
        Tagset::new(crate::corpus::PTB_TAGSET)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    /// Number of unordered tag pairs: T(T+1)/2.
    pub fn pair_count(&self) -> usize {
        self.tags.len() * (self.tags.len() + 1) / 2
    }

    /// Linear index of the canonical pair (i, j) with i <= j.
    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j < self.tags.len());
        let t = self.tags.len();
        i * t - i * (i + 1) / 2 + j
    }
}

/// Canonical unordered POS tag pair: `tag_a <= tag_b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PosPairKey {
    tag_a: String,
    tag_b: String,
}

impl PosPairKey {
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Self {
        let (x, y) = (x.into(), y.into());
        if x <= y {
            PosPairKey { tag_a: x, tag_b: y }
        } else {
            PosPairKey { tag_a: y, tag_b: x }
        }
    }

    pub fn tag_a(&self) -> &str {
        &self.tag_a
    }

    pub fn tag_b(&self) -> &str {
        &self.tag_b
    }
}

/// A matched token pair with its embedding distance.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub i: usize,
    pub j: usize,
    pub key: PosPairKey,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceConfig {
    /// Keep-ratio for the closest matched pairs, in (0, 1].
    pub alpha: f64,
}

impl CoherenceConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::BadAlpha(alpha));
        }
        Ok(CoherenceConfig { alpha })
    }
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig { alpha: 0.7 }
    }
}

/// Matches every unordered token pair whose members both have embedding
/// vectors; out-of-vocabulary tokens contribute no pairs.
pub fn match_words(sentence: &TaggedSentence, emb: &EmbeddingTable) -> Vec<MatchedPair> {
    let vectors: Vec<Option<&[f64]>> = sentence
        .tokens
        .iter()
        .map(|t| emb.lookup(&t.norm, &t.surface))
        .collect();
    let mut pairs = Vec::new();
    for i in 0..sentence.tokens.len() {
        let Some(vi) = vectors[i] else { continue };
        for j in i + 1..sentence.tokens.len() {
            let Some(vj) = vectors[j] else { continue };
            pairs.push(MatchedPair {
                i,
                j,
                key: PosPairKey::new(&sentence.tokens[i].pos, &sentence.tokens[j].pos),
                distance: crate::resources::squared_distance(vi, vj).sqrt(),
            });
        }
    }
    pairs
}

/// Keeps the ceil(alpha * M) smallest-distance pairs, ties broken by (i, j)
/// ascending.
pub fn select_top(mut pairs: Vec<MatchedPair>, alpha: f64) -> Result<Vec<MatchedPair>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    pairs.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap()
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    let keep = (alpha * pairs.len() as f64).ceil() as usize;
    pairs.truncate(keep);
    Ok(pairs)
}

/// Online mean/population-variance accumulator (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct RunningStats {
    n: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// (mean, population variance); (0, 0) when empty.
    fn finish(&self) -> (f64, f64) {
        if self.n == 0 {
            (0.0, 0.0)
        } else {
            (self.mean, self.m2 / self.n as f64)
        }
    }
}

/// Step 1 output: per POS-pair group, (mean, variance) of the kept
/// distances, canonical group order, (0, 0) for empty groups. Length is
/// T(T+1)/2 * 2.
pub fn coherence_features(
    sentence: &TaggedSentence,
    emb: &EmbeddingTable,
    cfg: &CoherenceConfig,
    tagset: &Tagset,
) -> Vec<f64> {
    let kept = select_top(match_words(sentence, emb), cfg.alpha).expect("validated alpha");
    let mut stats = vec![RunningStats::default(); tagset.pair_count()];
    for pair in &kept {
        let (Some(a), Some(b)) = (
            tagset.index_of(pair.key.tag_a()),
            tagset.index_of(pair.key.tag_b()),
        ) else {
            continue;
        };
        stats[tagset.pair_index(a, b)].push(pair.distance);
    }
    let mut out = Vec::with_capacity(stats.len() * 2);
    for s in &stats {
        let (mean, var) = s.finish();
        out.push(mean);
        out.push(var);
    }
    out
}

/// Step 2 output: per POS tag, (mean, variance) of the per-token
/// `ln(1 + frequency)` values (raw counts when `log_transform` is off).
/// Length is 2T.
pub fn frequency_features(
    sentence: &TaggedSentence,
    freq: &FrequencyTable,
    tagset: &Tagset,
    log_transform: bool,
) -> Vec<f64> {
    let mut stats = vec![RunningStats::default(); tagset.len()];
    for token in &sentence.tokens {
        let Some(tag_idx) = tagset.index_of(&token.pos) else {
            continue;
        };
        let count = freq.lookup(&token.norm, &token.surface) as f64;
        let value = if log_transform { (1.0 + count).ln() } else { count };
        stats[tag_idx].push(value);
    }
    let mut out = Vec::with_capacity(stats.len() * 2);
    for s in &stats {
        let (mean, var) = s.finish();
        out.push(mean);
        out.push(var);
    }
    out
}

/// Counts successive duplicate phrases of length `phrase_len`: the scan
/// extends each run of consecutive equal phrases at stride `phrase_len`;
/// a maximal run of k >= 2 phrase instances contributes k.
pub fn count_successive_duplicates<S: AsRef<str>>(tokens: &[S], phrase_len: usize) -> Result<usize> {
    if !(1..=5).contains(&phrase_len) {
        return Err(Error::BadPhraseLength(phrase_len));
    }
    let n = tokens.len();
    let l = phrase_len;
    // eq[p] is true when the phrase starting at p repeats the one at p - l.
    let phrase_repeats = |p: usize| (p..p + l).all(|j| tokens[j].as_ref() == tokens[j - l].as_ref());
    let mut total = 0;
    let mut i = 0;
    while i + l <= n {
        let mut k = 1;
        while i + (k + 1) * l <= n && phrase_repeats(i + k * l) {
            k += 1;
        }
        if k >= 2 {
            total += k;
            i += k * l;
        } else {
            i += 1;
        }
    }
    Ok(total)
}

/// Step 3 output: duplicate counts for phrase lengths 1-5 plus the token
/// count, computed over normalized forms.
pub fn optimization_features(sentence: &TaggedSentence) -> Vec<f64> {
    let norms: Vec<&str> = sentence.tokens.iter().map(|t| t.norm.as_str()).collect();
    let mut out: Vec<f64> = (1..=5)
        .map(|l| count_successive_duplicates(&norms, l).expect("l in range") as f64)
        .collect();
    out.push(sentence.tokens.len() as f64);
    out
}

/// Ordered POS n-gram vocabulary (n = 1..3), frozen from the training split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NgramVocab {
    grams: Vec<Vec<String>>,
    index: HashMap<Vec<String>, usize>,
}

impl NgramVocab {
    pub fn from_grams(grams: impl IntoIterator<Item = Vec<String>>) -> Self {
        let set: BTreeSet<(usize, Vec<String>)> =
            grams.into_iter().map(|g| (g.len(), g)).collect();
        let grams: Vec<Vec<String>> = set.into_iter().map(|(_, g)| g).collect();
        let index = grams
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i))
            .collect();
        NgramVocab { grams, index }
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn grams(&self) -> &[Vec<String>] {
        &self.grams
    }

    pub fn parse(text: &str, path: &str) -> Result<NgramVocab> {
        let mut grams = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let gram: Vec<String> = line.split(' ').map(str::to_string).collect();
            if gram.is_empty() || gram.len() > 3 || gram.iter().any(String::is_empty) {
                return Err(Error::parse(path, idx + 1, "expected 1-3 space-separated tags"));
            }
            grams.push(gram);
        }
        Ok(NgramVocab::from_grams(grams))
    }

    pub fn load(path: &Path) -> Result<NgramVocab> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        NgramVocab::parse(&text, &path.display().to_string())
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        for gram in &self.grams {
            writeln!(out, "{}", gram.join(" ")).unwrap();
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::matrix::write_atomic(path, self.format().as_bytes())
    }
}

fn sentence_ngrams(sentence: &TaggedSentence) -> impl Iterator<Item = Vec<String>> + '_ {
    (1..=3usize).flat_map(move |n| {
        sentence
            .tokens
            .windows(n)
            .map(|w| w.iter().map(|t| t.pos.clone()).collect::<Vec<_>>())
    })
}

/// Step 4 vocabulary: every POS n-gram (n = 1..3) occurring in the training
/// sentences, deduplicated, ordered by n then lexicographically.
pub fn build_ngram_vocab(train_sentences: &[TaggedSentence]) -> NgramVocab {
    NgramVocab::from_grams(train_sentences.iter().flat_map(sentence_ngrams))
}

/// Step 4 output: per-vocabulary-entry occurrence counts; n-grams outside
/// the vocabulary are ignored.
pub fn pos_ngram_features(sentence: &TaggedSentence, vocab: &NgramVocab) -> Vec<f64> {
    let mut counts = vec![0.0; vocab.len()];
    for gram in sentence_ngrams(sentence) {
        if let Some(&idx) = vocab.index.get(&gram) {
            counts[idx] += 1.0;
        }
    }
    counts
}

/// The four feature groups, in fixed schema order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureGroup {
    Coherence,
    Frequency,
    Optimization,
    PosNgram,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Coherence,
        FeatureGroup::Frequency,
        FeatureGroup::Optimization,
        FeatureGroup::PosNgram,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FeatureGroup::Coherence => "coherence",
            FeatureGroup::Frequency => "frequency",
            FeatureGroup::Optimization => "optimization",
            FeatureGroup::PosNgram => "ngram",
        }
    }

    pub fn parse(s: &str) -> Result<FeatureGroup> {
        match s {
            "coherence" => Ok(FeatureGroup::Coherence),
            "frequency" => Ok(FeatureGroup::Frequency),
            "optimization" => Ok(FeatureGroup::Optimization),
            "ngram" | "pos_ngram" => Ok(FeatureGroup::PosNgram),
            other => Err(Error::UnknownGroup(other.to_string())),
        }
    }
}

/// Ordered feature-name list partitioned into groups, with a content hash
/// that changes iff the names change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    names: Vec<String>,
    groups: Vec<(FeatureGroup, std::ops::Range<usize>)>,
    fingerprint: String,
}

fn group_names(group: FeatureGroup, tagset: &Tagset, vocab: &NgramVocab) -> Vec<String> {
    match group {
        FeatureGroup::Coherence => {
            let tags = tagset.tags();
            let mut names = Vec::with_capacity(tagset.pair_count() * 2);
            for i in 0..tags.len() {
                for j in i..tags.len() {
                    names.push(format!("coh:{}|{}:mean", tags[i], tags[j]));
                    names.push(format!("coh:{}|{}:var", tags[i], tags[j]));
                }
            }
            names
        }
        FeatureGroup::Frequency => tagset
            .tags()
            .iter()
            .flat_map(|t| [format!("freq:{t}:mean"), format!("freq:{t}:var")])
            .collect(),
        FeatureGroup::Optimization => (1..=5)
            .map(|l| format!("opt:dup{l}"))
            .chain(std::iter::once("opt:len".to_string()))
            .collect(),
        FeatureGroup::PosNgram => vocab
            .grams()
            .iter()
            .map(|g| format!("ngram:{}", g.join("|")))
            .collect(),
    }
}

fn fingerprint_names(names: &[String]) -> String {
    let mut hasher = Sha256::new();
    for name in names {
        hasher.update(name.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl FeatureSchema {
    /// Builds the schema for the enabled groups. Group order is always
    /// coherence, frequency, optimization, pos_ngram regardless of the
    /// order given.
    pub fn build(tagset: &Tagset, vocab: &NgramVocab, enabled: &[FeatureGroup]) -> FeatureSchema {
        let mut names = Vec::new();
        let mut groups = Vec::new();
        for group in FeatureGroup::ALL {
            if !enabled.contains(&group) {
                continue;
            }
            let start = names.len();
            names.extend(group_names(group, tagset, vocab));
            groups.push((group, start..names.len()));
        }
        let fingerprint = fingerprint_names(&names);
        FeatureSchema {
            names,
            groups,
            fingerprint,
        }
    }

    /// Reconstructs a schema (including the tagset and n-gram vocabulary it
    /// implies) from a serialized feature-name list.
    pub fn from_names(names: &[String]) -> Result<FeatureSchema> {
        let mut tags: BTreeSet<String> = BTreeSet::new();
        let mut grams: Vec<Vec<String>> = Vec::new();
        let mut enabled: Vec<FeatureGroup> = Vec::new();
        for name in names {
            let group = if name.starts_with("coh:") {
                // the (t, t) diagonal names enumerate every tag
                if let Some(rest) = name.strip_prefix("coh:").and_then(|r| r.strip_suffix(":mean"))
                {
                    if let Some((a, b)) = rest.split_once('|') {
                        if a == b {
                            tags.insert(a.to_string());
                        }
                    }
                }
                FeatureGroup::Coherence
            } else if let Some(rest) = name.strip_prefix("freq:") {
                if let Some(tag) = rest.strip_suffix(":mean") {
                    tags.insert(tag.to_string());
                }
                FeatureGroup::Frequency
            } else if name.starts_with("opt:") {
                FeatureGroup::Optimization
            } else if let Some(rest) = name.strip_prefix("ngram:") {
                grams.push(rest.split('|').map(str::to_string).collect());
                FeatureGroup::PosNgram
            } else {
                return Err(Error::Invalid(format!("unrecognized feature name {name:?}")));
            };
            if enabled.last() != Some(&group) {
                enabled.push(group);
            }
        }
        let tagset = Tagset::new(tags);
        let vocab = NgramVocab::from_grams(grams);
        let rebuilt = FeatureSchema::build(&tagset, &vocab, &enabled);
        if rebuilt.names != names {
            return Err(Error::Invalid(
                "feature names are not a canonical schema".to_string(),
            ));
        }
        Ok(rebuilt)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn groups(&self) -> &[(FeatureGroup, std::ops::Range<usize>)] {
        &self.groups
    }

    pub fn enabled_groups(&self) -> Vec<FeatureGroup> {
        self.groups.iter().map(|(g, _)| *g).collect()
    }

    /// The tagset this schema was built from, recovered from its names.
    pub fn tagset(&self) -> Tagset {
        let mut tags = BTreeSet::new();
        for name in &self.names {
            if let Some(rest) = name.strip_prefix("freq:") {
                if let Some(tag) = rest.strip_suffix(":mean") {
                    tags.insert(tag.to_string());
                }
            } else if let Some(rest) = name.strip_prefix("coh:") {
                if let Some(pair) = rest.strip_suffix(":mean") {
                    if let Some((a, b)) = pair.split_once('|') {
                        if a == b {
                            tags.insert(a.to_string());
                        }
                    }
                }
            }
        }
        Tagset::new(tags)
    }

    /// The n-gram vocabulary this schema was built from.
    pub fn vocab(&self) -> NgramVocab {
        NgramVocab::from_grams(self.names.iter().filter_map(|n| {
            n.strip_prefix("ngram:")
                .map(|rest| rest.split('|').map(str::to_string).collect())
        }))
    }
}

/// Dense feature values aligned to a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub schema_fingerprint: String,
    pub values: Vec<f64>,
}

/// Everything extraction needs besides the sentence itself.
pub struct ExtractionContext<'a> {
    pub embeddings: &'a EmbeddingTable,
    pub frequencies: &'a FrequencyTable,
    pub tagset: &'a Tagset,
    pub vocab: &'a NgramVocab,
    pub coherence: CoherenceConfig,
    /// ln(1 + f) transform for frequency statistics; on by default.
    pub log_freq: bool,
}

/// Concatenates the enabled group vectors in schema order.
pub fn assemble_features(
    sentence: &TaggedSentence,
    ctx: &ExtractionContext,
    schema: &FeatureSchema,
) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(schema.len());
    for (group, range) in &schema.groups {
        let part = match group {
            FeatureGroup::Coherence => {
                coherence_features(sentence, ctx.embeddings, &ctx.coherence, ctx.tagset)
            }
            FeatureGroup::Frequency => {
                frequency_features(sentence, ctx.frequencies, ctx.tagset, ctx.log_freq)
            }
            FeatureGroup::Optimization => optimization_features(sentence),
            FeatureGroup::PosNgram => pos_ngram_features(sentence, ctx.vocab),
        };
        if part.len() != range.len() {
            return Err(Error::Invalid(format!(
                "schema group {} expects {} features but the context produces {}; \
                 tagset or vocabulary mismatch",
                group.name(),
                range.len(),
                part.len()
            )));
        }
        values.extend(part);
    }
    Ok(FeatureVector {
        schema_fingerprint: schema.fingerprint.clone(),
        values,
    })
}
