//! CLI behavior: the subcommand pipeline must match the in-process pipeline,
//! and failures must map to the documented exit codes (2 input, 3 schema,
//! 4 data).

mod common;

use std::path::Path;
use std::process::{Command, Output, Stdio};

use advtext::classify::{ClassifierKind, Hyper};
use advtext::corpus::{
    self, load_manifest, split_indices, tag_sentence, tokenize, train_lexicon_tagger, LabeledPair,
};
use advtext::derive_seed;
use advtext::eval::{self, PipelineConfig};
use advtext::features::{FeatureGroup, Tagset};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_advtext")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .stdin(Stdio::null())
        .output()
        .unwrap()
}

fn assert_exit(args: &[&str], code: i32) {
    let out = run(args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "args {args:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

struct Paths {
    manifest: String,
    tagged: String,
    embeddings: String,
    frequencies: String,
}

fn world_files(dir: &Path, n_pairs: usize, seed: u64) -> Paths {
    let world = common::synth_world(n_pairs, seed);
    common::write_world_files(&world, dir);
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    Paths {
        manifest: p("manifest.tsv"),
        tagged: p("tagged.txt"),
        embeddings: p("embeddings.txt"),
        frequencies: p("frequencies.tsv"),
    }
}

#[test]
fn cli_pipeline_matches_in_process_pipeline() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let paths = world_files(input.path(), 30, 11);
    let p = |name: &str| out.path().join(name).to_str().unwrap().to_string();

    let ok = |args: &[&str]| {
        let o = run(args);
        assert!(
            o.status.success(),
            "args {args:?}\nstderr: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        o
    };
    ok(&["tagger-train", "--corpus", &paths.tagged, "--out", &p("tagger.json")]);
    ok(&[
        "split", "--manifest", &paths.manifest, "--seed", "9", "--out-dir",
        out.path().to_str().unwrap(),
    ]);
    ok(&[
        "extract", "--manifest", &p("train.tsv"), "--embeddings", &paths.embeddings,
        "--frequencies", &paths.frequencies, "--tagger", &p("tagger.json"),
        "--vocab-out", &p("vocab.txt"), "--out", &p("train_features.tsv"),
    ]);
    ok(&[
        "train", "--features", &p("train_features.tsv"), "--classifier", "svm-sgd",
        "--seed", "9", "--out", &p("model.json"),
    ]);
    ok(&[
        "evaluate", "--model", &p("model.json"), "--manifest", &p("test.tsv"),
        "--embeddings", &paths.embeddings, "--frequencies", &paths.frequencies,
        "--tagger", &p("tagger.json"), "--out", &p("report.tsv"),
    ]);

    // replicate in process: same split seed derivation, same tagger, same
    // hyperparameter seeding
    let world_manifest = load_manifest(Path::new(&paths.manifest)).unwrap();
    let tagged = corpus::load_tagged_corpus(Path::new(&paths.tagged)).unwrap();
    let tagger = train_lexicon_tagger(&tagged).unwrap();
    let pairs: Vec<LabeledPair> = world_manifest
        .iter()
        .map(|m| LabeledPair {
            pair_id: m.pair_id.clone(),
            human: tag_sentence(
                &format!("{}.human", m.pair_id),
                &tokenize(&m.human_text).unwrap(),
                &tagger,
            ),
            machine: tag_sentence(
                &format!("{}.machine", m.pair_id),
                &tokenize(&m.machine_text).unwrap(),
                &tagger,
            ),
        })
        .collect();
    let (train_idx, _, test_idx) =
        split_indices(pairs.len(), (0.6, 0.2, 0.2), derive_seed(9, "split")).unwrap();
    let train: Vec<LabeledPair> = train_idx.iter().map(|&i| pairs[i].clone()).collect();
    let test: Vec<LabeledPair> = test_idx.iter().map(|&i| pairs[i].clone()).collect();

    let world = common::synth_world(30, 11);
    let tagset = Tagset::ptb();
    let cfg = PipelineConfig {
        embeddings: &world.embeddings,
        frequencies: &world.frequencies,
        tagset: &tagset,
        alpha: 0.7,
        log_freq: true,
        groups: FeatureGroup::ALL.to_vec(),
        kind: ClassifierKind::SvmSgd,
        hyper: Hyper {
            seed: derive_seed(9, "train"),
            ..Hyper::default()
        },
    };
    let (model, vocab) = eval::train_pipeline(&cfg, &train).unwrap();
    let report = eval::evaluate(&model, &test, &cfg, &vocab).unwrap();

    let report_text = std::fs::read_to_string(p("report.tsv")).unwrap();
    let row = report_text.lines().nth(1).unwrap();
    let cols: Vec<&str> = row.split('\t').collect();
    let cli_accuracy: f64 = cols[2].parse().unwrap();
    let cli_eer: f64 = cols[3].parse().unwrap();
    assert!(
        (cli_accuracy - report.accuracy).abs() < 1e-12,
        "cli {cli_accuracy} vs in-process {}",
        report.accuracy
    );
    assert!((cli_eer - report.eer).abs() < 1e-12);
}

#[test]
fn cli_predict_scores_raw_sentences() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let paths = world_files(input.path(), 20, 12);
    let p = |name: &str| out.path().join(name).to_str().unwrap().to_string();

    for args in [
        vec!["tagger-train", "--corpus", &paths.tagged, "--out", &p("tagger.json")],
        vec![
            "extract", "--manifest", &paths.manifest, "--embeddings", &paths.embeddings,
            "--frequencies", &paths.frequencies, "--tagger", &p("tagger.json"),
            "--out", &p("features.tsv"),
        ],
        vec![
            "train", "--features", &p("features.tsv"), "--classifier", "logistic",
            "--out", &p("model.json"),
        ],
    ] {
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }

    let mut child = Command::new(bin())
        .args([
            "predict", "--model", &p("model.json"), "--embeddings", &paths.embeddings,
            "--frequencies", &paths.frequencies, "--tagger", &p("tagger.json"),
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write as _;
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"f0 f1 r2 f3\nc2 c2 f1\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    for (i, line) in lines.iter().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 3);
        assert_eq!(cols[0], format!("s{i}"));
        cols[1].parse::<f64>().unwrap();
        assert!(cols[2] == "human" || cols[2] == "machine");
    }
}

#[test]
fn cli_maps_failures_to_exit_codes() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let paths = world_files(input.path(), 12, 13);
    let p = |name: &str| out.path().join(name).to_str().unwrap().to_string();

    // input problems -> 2
    assert_exit(
        &[
            "split", "--manifest", &p("missing.tsv"), "--out-dir",
            out.path().to_str().unwrap(),
        ],
        2,
    );
    assert_exit(
        &[
            "split", "--manifest", &paths.manifest, "--ratios", "0.9,0.9,0.9",
            "--out-dir", out.path().to_str().unwrap(),
        ],
        2,
    );

    let o = run(&[
        "extract", "--manifest", &paths.manifest, "--embeddings", &paths.embeddings,
        "--frequencies", &paths.frequencies, "--tagged", &paths.tagged,
        "--out", &p("features.tsv"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // refusing to overwrite a matrix extracted under a different schema -> 3
    assert_exit(
        &[
            "extract", "--manifest", &paths.manifest, "--embeddings", &paths.embeddings,
            "--frequencies", &paths.frequencies, "--tagged", &paths.tagged,
            "--groups", "optimization", "--out", &p("features.tsv"),
        ],
        3,
    );

    // single-class training data -> 4
    let text = std::fs::read_to_string(p("features.tsv")).unwrap();
    let single: String = text
        .lines()
        .enumerate()
        .map(|(i, line)| {
            if i < 2 {
                line.to_string()
            } else {
                let mut cols: Vec<&str> = line.split('\t').collect();
                cols[1] = "0";
                cols.join("\t")
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(p("single.tsv"), single).unwrap();
    assert_exit(
        &["train", "--features", &p("single.tsv"), "--out", &p("model.json")],
        4,
    );
}
