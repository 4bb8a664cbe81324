//! Tokenization, POS tagging, dataset manifests and pair-preserving splits.
//!
//! The tagger is a deterministic lexicon + suffix-rule fallback model so the
//! pipeline carries no external runtime dependency; pre-tagged input files
//! are accepted as the higher-fidelity alternative.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The 45-symbol Penn Treebank tagset (36 word classes plus 9 punctuation
/// symbols). This is the default tagset; all group counts downstream are
/// derived from whatever tagset is configured.
pub const PTB_TAGSET: [&str; 45] = [
    "#", "$", "''", ",", "-LRB-", "-RRB-", ".", ":", "CC", "CD", "DT", "EX", "FW", "IN", "JJ",
    "JJR", "JJS", "LS", "MD", "NN", "NNP", "NNPS", "NNS", "PDT", "POS", "PRP", "PRP$", "RB",
    "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP",
    "WP$", "WRB", "``",
];

/// Tag used when a token's tag is unknown or outside the active tagset.
pub const UNK_TAG: &str = "UNK";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// Original surface form.
    pub surface: String,
    /// Lowercased surface, used for embedding/frequency lookup and duplicate
    /// detection.
    pub norm: String,
    /// POS tag symbol.
    pub pos: String,
}

impl Token {
    pub fn new(surface: impl Into<String>, pos: impl Into<String>) -> Self {
        let surface = surface.into();
        let norm = surface.to_lowercase();
        Token {
            surface,
            norm,
            pos: pos.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub id: String,
    pub tokens: Vec<Token>,
}

impl TaggedSentence {
    pub fn new(id: impl Into<String>, tokens: Vec<Token>) -> Self {
        TaggedSentence {
            id: id.into(),
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// One original/adversarial sentence pair. The human member is class 0, the
/// machine member class 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPair {
    pub pair_id: String,
    pub human: TaggedSentence,
    pub machine: TaggedSentence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledPair>,
    pub dev: Vec<LabeledPair>,
    pub test: Vec<LabeledPair>,
    pub seed: u64,
}

/// Clitics detached by the tokenizer, longest-suffix first. Fixed list, no
/// statistical tokenization.
const CLITICS: [&str; 6] = ["n't", "'re", "'ve", "'ll", "'s", "'d"];

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
}

fn push_chunk(chunk: &str, out: &mut Vec<String>) {
    if chunk.is_empty() {
        return;
    }
    let lower = chunk.to_lowercase();
    // A chunk that already is a clitic or pure punctuation stays whole, so
    // tokenization is idempotent on its own output.
    if CLITICS.contains(&lower.as_str()) || chunk.chars().all(is_punct) {
        out.push(chunk.to_string());
        return;
    }
    let mut chars = chunk.chars();
    let first = chars.next().unwrap();
    if is_punct(first) {
        out.push(first.to_string());
        push_chunk(&chunk[first.len_utf8()..], out);
        return;
    }
    let last = chunk.chars().last().unwrap();
    if is_punct(last) {
        let cut = chunk.len() - last.len_utf8();
        // Keep clitic apostrophes attached; "it's" must not lose its "'s".
        let keeps_clitic = last == '\''
            && CLITICS
                .iter()
                .any(|c| lower.ends_with(c) && lower.len() > c.len());
        if !keeps_clitic {
            push_chunk(&chunk[..cut], out);
            out.push(last.to_string());
            return;
        }
    }
    for clitic in CLITICS {
        if lower.ends_with(clitic) && lower.len() > clitic.len() {
            let cut = chunk.len() - clitic.len();
            push_chunk(&chunk[..cut], out);
            out.push(chunk[cut..].to_string());
            return;
        }
    }
    out.push(chunk.to_string());
}

/// Splits one sentence into surface tokens: whitespace split, then leading
/// and trailing punctuation and the clitics 's, n't, 're, 've, 'll, 'd are
/// detached as separate tokens.
pub fn tokenize(text: &str) -> Result<Vec<String>> {
    if text.trim().is_empty() {
        return Err(Error::EmptySentence);
    }
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        push_chunk(chunk, &mut out);
    }
    Ok(out)
}

/// Lexicon tagger with suffix-rule fallback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggerModel {
    /// word (lowercased) -> modal tag
    pub lexicon: BTreeMap<String, String>,
    /// (suffix, tag), applied longest-suffix-first
    pub suffix_rules: Vec<(String, String)>,
    pub default_tag: String,
}

fn modal_tag(counts: &BTreeMap<String, usize>) -> String {
    // BTreeMap iteration order makes ties resolve to the lexicographically
    // smaller tag.
    counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(tag, _)| tag.clone())
        .unwrap()
}

/// Induces a tagger from a tagged corpus: per-word modal tags, suffix rules
/// (lengths 1-4) from hapax words, and a corpus-wide default tag.
pub fn train_lexicon_tagger(corpus: &[TaggedSentence]) -> Result<TaggerModel> {
    if corpus.is_empty() || corpus.iter().all(|s| s.tokens.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let mut word_tag_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut word_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut tag_counts: BTreeMap<String, usize> = BTreeMap::new();
    for sentence in corpus {
        for token in &sentence.tokens {
            *word_tag_counts
                .entry(token.norm.clone())
                .or_default()
                .entry(token.pos.clone())
                .or_default() += 1;
            *word_counts.entry(token.norm.clone()).or_default() += 1;
            *tag_counts.entry(token.pos.clone()).or_default() += 1;
        }
    }
    let lexicon: BTreeMap<String, String> = word_tag_counts
        .iter()
        .map(|(word, counts)| (word.clone(), modal_tag(counts)))
        .collect();

    // Suffix rules come from hapax words only: those are the best proxy for
    // the unknown words the rules will be applied to.
    let mut suffix_tag_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (word, count) in &word_counts {
        if *count != 1 {
            continue;
        }
        let tag = &lexicon[word];
        let chars: Vec<char> = word.chars().collect();
        for len in 1..=4usize.min(chars.len()) {
            let suffix: String = chars[chars.len() - len..].iter().collect();
            *suffix_tag_counts
                .entry(suffix)
                .or_default()
                .entry(tag.clone())
                .or_default() += 1;
        }
    }
    let mut suffix_rules: Vec<(String, String)> = suffix_tag_counts
        .iter()
        .map(|(suffix, counts)| (suffix.clone(), modal_tag(counts)))
        .collect();
    // longest-suffix-first, then lexicographic for determinism
    suffix_rules.sort_by(|a, b| b.0.chars().count().cmp(&a.0.chars().count()).then(a.0.cmp(&b.0)));

    Ok(TaggerModel {
        lexicon,
        suffix_rules,
        default_tag: modal_tag(&tag_counts),
    })
}

impl TaggerModel {
    pub fn tag_word(&self, surface: &str) -> &str {
        let norm = surface.to_lowercase();
        if let Some(tag) = self.lexicon.get(&norm) {
            return tag;
        }
        for (suffix, tag) in &self.suffix_rules {
            if norm.ends_with(suffix.as_str()) {
                return tag;
            }
        }
        &self.default_tag
    }

    pub fn load(path: &Path) -> Result<TaggerModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("tagger serialization");
        crate::matrix::write_atomic(path, json.as_bytes())
    }
}

/// Tags surface tokens: lexicon hit, else longest matching suffix rule, else
/// the default tag.
pub fn tag_sentence(id: &str, tokens: &[String], tagger: &TaggerModel) -> TaggedSentence {
    let tokens = tokens
        .iter()
        .map(|surface| Token::new(surface.clone(), tagger.tag_word(surface)))
        .collect();
    TaggedSentence::new(id, tokens)
}

/// Parses the two-column tagged corpus format: one `surface<TAB>tag` per
/// line, sentences separated by one blank line.
pub fn parse_tagged_corpus(text: &str, path: &str) -> Result<Vec<TaggedSentence>> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            if !current.is_empty() {
                let id = format!("s{}", sentences.len());
                sentences.push(TaggedSentence::new(id, std::mem::take(&mut current)));
            }
            continue;
        }
        let mut cols = line.split('\t');
        let surface = cols.next().unwrap_or("");
        let tag = cols.next();
        let extra = cols.next();
        match (tag, extra) {
            (Some(tag), None) if !surface.is_empty() && !tag.is_empty() => {
                current.push(Token::new(surface, tag));
            }
            _ => {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("expected `surface<TAB>tag`, got {line:?}"),
                ));
            }
        }
    }
    if !current.is_empty() {
        let id = format!("s{}", sentences.len());
        sentences.push(TaggedSentence::new(id, current));
    }
    Ok(sentences)
}

pub fn load_tagged_corpus(path: &Path) -> Result<Vec<TaggedSentence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_tagged_corpus(&text, &path.display().to_string())
}

/// Canonical serialization of a tagged corpus; `parse_tagged_corpus` of the
/// output round-trips byte-identically.
pub fn format_tagged_corpus(sentences: &[TaggedSentence]) -> String {
    let mut out = String::new();
    for (i, sentence) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for token in &sentence.tokens {
            writeln!(out, "{}\t{}", token.surface, token.pos).unwrap();
        }
    }
    out
}

pub fn save_tagged_corpus(path: &Path, sentences: &[TaggedSentence]) -> Result<()> {
    crate::matrix::write_atomic(path, format_tagged_corpus(sentences).as_bytes())
}

/// One row pair from a dataset manifest, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestPair {
    pub pair_id: String,
    pub human_text: String,
    pub machine_text: String,
}

/// Parses the dataset manifest: TSV with header `pair_id<TAB>label<TAB>text`
/// and exactly one human and one machine row per pair_id. Pair order follows
/// the first occurrence of each pair_id.
pub fn parse_manifest(text: &str, path: &str) -> Result<Vec<ManifestPair>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == "pair_id\tlabel\ttext" => {}
        Some((_, header)) => {
            return Err(Error::parse(
                path,
                1,
                format!("expected header `pair_id\\tlabel\\ttext`, got {header:?}"),
            ))
        }
        None => return Err(Error::parse(path, 1, "empty manifest")),
    }
    let mut order: Vec<String> = Vec::new();
    let mut humans: BTreeMap<String, String> = BTreeMap::new();
    let mut machines: BTreeMap<String, String> = BTreeMap::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(path, idx + 1, "expected 3 tab-separated columns"));
        }
        let (pair_id, label, sentence) = (cols[0], cols[1], cols[2]);
        if pair_id.is_empty() {
            return Err(Error::parse(path, idx + 1, "empty pair_id"));
        }
        let bucket = match label {
            "human" => &mut humans,
            "machine" => &mut machines,
            other => {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("label must be `human` or `machine`, got {other:?}"),
                ))
            }
        };
        if bucket.insert(pair_id.to_string(), sentence.to_string()).is_some() {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("duplicate {label} row for pair {pair_id:?}"),
            ));
        }
        if !order.iter().any(|id| id == pair_id) {
            order.push(pair_id.to_string());
        }
    }
    let mut pairs = Vec::with_capacity(order.len());
    for pair_id in order {
        let human_text = humans
            .remove(&pair_id)
            .ok_or_else(|| Error::parse(path, 0, format!("pair {pair_id:?} has no human row")))?;
        let machine_text = machines
            .remove(&pair_id)
            .ok_or_else(|| Error::parse(path, 0, format!("pair {pair_id:?} has no machine row")))?;
        pairs.push(ManifestPair {
            pair_id,
            human_text,
            machine_text,
        });
    }
    Ok(pairs)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_manifest(&text, &path.display().to_string())
}

pub fn format_manifest(pairs: &[ManifestPair]) -> String {
    let mut out = String::from("pair_id\tlabel\ttext\n");
    for pair in pairs {
        writeln!(out, "{}\thuman\t{}", pair.pair_id, pair.human_text).unwrap();
        writeln!(out, "{}\tmachine\t{}", pair.pair_id, pair.machine_text).unwrap();
    }
    out
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Computes the train/dev/test index partition for `n` pairs: shuffle with a
/// seeded PRNG, round-half-up on the dev and test shares, remainder to train.
pub fn split_indices(
    n: usize,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let sum = ratios.0 + ratios.1 + ratios.2;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadRatios(sum));
    }
    if n < 3 {
        return Err(Error::TooFewPairs(n));
    }
    let n_dev = round_half_up(ratios.1 * n as f64);
    let n_test = round_half_up(ratios.2 * n as f64);
    if n_dev + n_test > n || (ratios.0 > 0.0 && n_dev + n_test == n) || n_dev == 0 || n_test == 0 {
        return Err(Error::TooFewPairs(n));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_train = n - n_dev - n_test;
    let dev = indices.split_off(n_train + n_dev);
    // after split_off above, `dev` actually holds the test block
    let test = dev;
    let dev = indices.split_off(n_train);
    let train = indices;
    Ok((train, dev, test))
}

/// Pair-preserving 60/20/20 (or custom-ratio) split. Both members of every
/// pair land in the same partition.
pub fn pair_split(pairs: &[LabeledPair], ratios: (f64, f64, f64), seed: u64) -> Result<DatasetSplit> {
    let (train_idx, dev_idx, test_idx) = split_indices(pairs.len(), ratios, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| pairs[i].clone()).collect();
    Ok(DatasetSplit {
        train: pick(&train_idx),
        dev: pick(&dev_idx),
        test: pick(&test_idx),
        seed,
    })
}
