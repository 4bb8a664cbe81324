//! Synthetic benchmark data: human sentences over a designed vocabulary and
//! machine counterparts produced by a scripted simplifier (higher-frequency
//! synonym replacement, 10-20% truncation, occasional duplicate-phrase
//! injection).

// each integration-test target compiles this module separately and uses a
// different subset of it
#![allow(dead_code)]

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use advtext::corpus::{LabeledPair, TaggedSentence, Token};
use advtext::resources::{EmbeddingTable, FrequencyTable};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub const EMB_DIM: usize = 16;

pub struct SynthWorld {
    pub embeddings: EmbeddingTable,
    pub frequencies: FrequencyTable,
    /// word -> POS tag, fixed per word
    pub tags: HashMap<String, String>,
    pub pairs: Vec<LabeledPair>,
}

const FILLER_TAGS: [&str; 5] = ["DT", "IN", "PRP", "CC", "RB"];
const CONTENT_TAGS: [&str; 3] = ["NN", "VB", "JJ"];
/// Tags the simplifier maps some content words onto, mimicking the flatter
/// syntax of generated text.
const SIMPLE_TAGS: [&str; 3] = ["NNS", "VBZ", "JJR"];

fn random_unit(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..EMB_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
    v.into_iter().map(|x| x / norm).collect()
}

fn scaled(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let dir = random_unit(rng);
    center
        .iter()
        .zip(dir)
        .map(|(c, d)| c + radius * d)
        .collect()
}

pub fn synth_world(n_pairs: usize, seed: u64) -> SynthWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut embeddings = EmbeddingTable::new(EMB_DIM);
    let mut frequencies = FrequencyTable::new();
    let mut tags: HashMap<String, String> = HashMap::new();

    // fillers: mid-frequency function words on a mid-radius shell
    let origin = vec![0.0; EMB_DIM];
    let mut fillers = Vec::new();
    for i in 0..80 {
        let word = format!("f{i}");
        let tag = FILLER_TAGS[i % FILLER_TAGS.len()];
        embeddings
            .insert(word.clone(), scaled(&mut rng, &origin, 2.0))
            .unwrap();
        frequencies.insert(word.clone(), rng.gen_range(100_000..10_000_000));
        tags.insert(word.clone(), tag.to_string());
        fillers.push(word);
    }

    // rare/common synonym pairs: rare words are low-frequency and scattered
    // far out, their replacements high-frequency and tightly clustered
    let cluster: Vec<f64> = random_unit(&mut rng).iter().map(|x| x * 0.8).collect();
    let mut synonyms: Vec<(String, String)> = Vec::new();
    for i in 0..60 {
        let rare = format!("r{i}");
        let common = format!("c{i}");
        let tag = CONTENT_TAGS[i % CONTENT_TAGS.len()];
        let common_tag = if i % 4 == 0 {
            SIMPLE_TAGS[i % SIMPLE_TAGS.len()]
        } else {
            tag
        };
        embeddings
            .insert(rare.clone(), scaled(&mut rng, &origin, 5.0))
            .unwrap();
        embeddings
            .insert(common.clone(), scaled(&mut rng, &cluster, 0.4))
            .unwrap();
        frequencies.insert(rare.clone(), rng.gen_range(10..1_000));
        frequencies.insert(common.clone(), rng.gen_range(10_000_000..1_000_000_000));
        tags.insert(rare.clone(), tag.to_string());
        tags.insert(common.clone(), common_tag.to_string());
        synonyms.push((rare, common));
    }

    let token_of = |word: &str, tags: &HashMap<String, String>| Token::new(word, tags[word].clone());

    let mut pairs = Vec::with_capacity(n_pairs);
    for p in 0..n_pairs {
        let len = rng.gen_range(18..=30);
        let mut human_words: Vec<String> = Vec::with_capacity(len);
        for _ in 0..len {
            if rng.gen_bool(0.45) {
                human_words.push(synonyms.choose(&mut rng).unwrap().0.clone());
            } else {
                human_words.push(fillers.choose(&mut rng).unwrap().clone());
            }
        }

        // scripted simplifier
        let mut machine_words: Vec<String> = human_words
            .iter()
            .map(|w| {
                if let Some(idx) = w.strip_prefix('r').and_then(|n| n.parse::<usize>().ok()) {
                    if rng.gen_bool(0.9) {
                        return synonyms[idx].1.clone();
                    }
                }
                w.clone()
            })
            .collect();
        let cut = ((len as f64) * rng.gen_range(0.10..0.20)).round() as usize;
        machine_words.truncate((len - cut).max(3));
        if rng.gen_bool(0.3) {
            let phrase_len = rng.gen_range(1..=3usize).min(machine_words.len());
            let pos = rng.gen_range(0..=machine_words.len() - phrase_len);
            let phrase: Vec<String> = machine_words[pos..pos + phrase_len].to_vec();
            for (k, w) in phrase.into_iter().enumerate() {
                machine_words.insert(pos + phrase_len + k, w);
            }
        }

        let pair_id = format!("p{p}");
        pairs.push(LabeledPair {
            pair_id: pair_id.clone(),
            human: TaggedSentence::new(
                format!("{pair_id}.human"),
                human_words.iter().map(|w| token_of(w, &tags)).collect(),
            ),
            machine: TaggedSentence::new(
                format!("{pair_id}.machine"),
                machine_words.iter().map(|w| token_of(w, &tags)).collect(),
            ),
        });
    }

    SynthWorld {
        embeddings,
        frequencies,
        tags,
        pairs,
    }
}

/// Writes the world as the CLI file formats: manifest, tagged corpus (for
/// tagger training), embedding and frequency tables.
pub fn write_world_files(world: &SynthWorld, dir: &Path) {
    let manifest = advtext::corpus::format_manifest(
        &world
            .pairs
            .iter()
            .map(|p| advtext::corpus::ManifestPair {
                pair_id: p.pair_id.clone(),
                human_text: p
                    .human
                    .tokens
                    .iter()
                    .map(|t| t.surface.clone())
                    .collect::<Vec<_>>()
                    .join(" "),
                machine_text: p
                    .machine
                    .tokens
                    .iter()
                    .map(|t| t.surface.clone())
                    .collect::<Vec<_>>()
                    .join(" "),
            })
            .collect::<Vec<_>>(),
    );
    std::fs::write(dir.join("manifest.tsv"), manifest).unwrap();

    let sentences: Vec<TaggedSentence> = world
        .pairs
        .iter()
        .flat_map(|p| [p.human.clone(), p.machine.clone()])
        .collect();
    std::fs::write(
        dir.join("tagged.txt"),
        advtext::corpus::format_tagged_corpus(&sentences),
    )
    .unwrap();

    let mut emb_text = String::new();
    let mut words: Vec<&String> = world.tags.keys().collect();
    words.sort();
    for word in &words {
        if let Some(vector) = world.embeddings.get(word) {
            write!(emb_text, "{word}").unwrap();
            for v in vector {
                write!(emb_text, " {v}").unwrap();
            }
            emb_text.push('\n');
        }
    }
    std::fs::write(dir.join("embeddings.txt"), emb_text).unwrap();

    let mut freq_text = String::new();
    for word in &words {
        writeln!(freq_text, "{word}\t{}", world.frequencies.get(word)).unwrap();
    }
    std::fs::write(dir.join("frequencies.tsv"), freq_text).unwrap();
}
