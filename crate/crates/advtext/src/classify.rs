//! From-scratch linear classifiers: logistic regression (mini-batch gradient
//! descent), hinge-loss SVM (stochastic gradient descent) and a Platt-style
//! SMO solver for the SVM dual with a linear kernel.
//!
//! All trainers standardize features internally, are deterministic for a
//! fixed seed, and produce a [`LinearModel`] whose score orientation is
//! higher = machine class.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureSchema, FeatureVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logistic,
    SvmSgd,
    SvmSmo,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [
        ClassifierKind::Logistic,
        ClassifierKind::SvmSgd,
        ClassifierKind::SvmSmo,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::SvmSgd => "svm-sgd",
            ClassifierKind::SvmSmo => "svm-smo",
        }
    }

    pub fn parse(s: &str) -> Result<ClassifierKind> {
        match s {
            "logistic" => Ok(ClassifierKind::Logistic),
            "svm-sgd" | "svm_sgd" => Ok(ClassifierKind::SvmSgd),
            "svm-smo" | "svm_smo" => Ok(ClassifierKind::SvmSmo),
            other => Err(Error::UnknownClassifier(other.to_string())),
        }
    }
}

/// Training hyperparameters. The defaults are the ones used throughout the
/// evaluation commands; every field is exposed as a CLI flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 regularization strength.
    pub lambda: f64,
    /// SMO box constraint.
    pub c: f64,
    /// SMO KKT tolerance.
    pub tol: f64,
    /// SMO full-sweep limit before giving up.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            learning_rate: 0.1,
            epochs: 100,
            lambda: 1e-4,
            c: 1.0,
            tol: 1e-3,
            max_passes: 200,
            seed: 0,
        }
    }
}

impl Hyper {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0
            || self.lambda < 0.0
            || self.c <= 0.0
            || self.tol <= 0.0
        {
            return Err(Error::Invalid("hyperparameter out of range".to_string()));
        }
        Ok(())
    }
}

/// Per-feature standardization statistics fit on the training matrix.
/// Near-constant features (population std below 1e-12) are masked and
/// transform to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant_mask: Vec<bool>,
}

pub fn fit_standardizer(x: &[Vec<f64>]) -> Result<Standardizer> {
    let n = x.len();
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let d = x[0].len();
    let mut means = vec![0.0; d];
    for row in x {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut vars = vec![0.0; d];
    for row in x {
        for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
            let dlt = v - m;
            *s += dlt * dlt;
        }
    }
    let mut stds = Vec::with_capacity(d);
    let mut constant_mask = Vec::with_capacity(d);
    for s in vars {
        let std = (s / n as f64).sqrt();
        if std < 1e-12 {
            stds.push(1.0);
            constant_mask.push(true);
        } else {
            stds.push(std);
            constant_mask.push(false);
        }
    }
    Ok(Standardizer {
        means,
        stds,
        constant_mask,
    })
}

impl Standardizer {
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| {
                if self.constant_mask[k] {
                    0.0
                } else {
                    (v - self.means[k]) / self.stds[k]
                }
            })
            .collect()
    }

    fn transform_matrix(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|row| self.transform(row)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub n_samples: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: ClassifierKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardizer: Standardizer,
    pub schema_fingerprint: String,
    pub feature_names: Vec<String>,
    pub hyper: Hyper,
    pub train_meta: TrainMeta,
}

/// On-disk model layout (canonical JSON).
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: ClassifierKind,
    schema_fingerprint: String,
    feature_names: Vec<String>,
    weights: Vec<f64>,
    bias: f64,
    means: Vec<f64>,
    stds: Vec<f64>,
    constant_mask: Vec<bool>,
    hyper: Hyper,
    train_meta: TrainMeta,
}

impl LinearModel {
    /// Raw decision value for one feature vector: `w . standardize(x) + b`.
    /// Higher means machine class.
    pub fn score(&self, x: &FeatureVector) -> Result<f64> {
        if x.schema_fingerprint != self.schema_fingerprint {
            return Err(Error::SchemaMismatch {
                expected: self.schema_fingerprint.clone(),
                actual: x.schema_fingerprint.clone(),
            });
        }
        if x.values.len() != self.weights.len() {
            return Err(Error::DimMismatch(x.values.len(), self.weights.len()));
        }
        let z = self.standardizer.transform(&x.values);
        Ok(dot(&self.weights, &z) + self.bias)
    }

    /// 1 (machine) iff score > 0; score ties resolve to human.
    pub fn predict(&self, x: &FeatureVector) -> Result<u8> {
        Ok(if self.score(x)? > 0.0 { 1 } else { 0 })
    }

    /// Machine-class probability (sigmoid of the score); only calibrated for
    /// the logistic kind.
    pub fn probability(&self, x: &FeatureVector) -> Result<f64> {
        Ok(sigmoid(self.score(x)?))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: 1,
            kind: self.kind,
            schema_fingerprint: self.schema_fingerprint.clone(),
            feature_names: self.feature_names.clone(),
            weights: self.weights.clone(),
            bias: self.bias,
            means: self.standardizer.means.clone(),
            stds: self.standardizer.stds.clone(),
            constant_mask: self.standardizer.constant_mask.clone(),
            hyper: self.hyper,
            train_meta: self.train_meta,
        };
        serde_json::to_string(&file).expect("model serialization")
    }

    pub fn from_json(text: &str, path: &str) -> Result<LinearModel> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Json {
            path: path.to_string(),
            source: e,
        })?;
        if file.format_version != 1 {
            return Err(Error::Invalid(format!(
                "unsupported model format_version {}",
                file.format_version
            )));
        }
        let d = file.weights.len();
        if file.means.len() != d
            || file.stds.len() != d
            || file.constant_mask.len() != d
            || file.feature_names.len() != d
            || !file.bias.is_finite()
            || !file.weights.iter().all(|w| w.is_finite())
        {
            return Err(Error::Invalid("inconsistent model file".to_string()));
        }
        Ok(LinearModel {
            kind: file.kind,
            weights: file.weights,
            bias: file.bias,
            standardizer: Standardizer {
                means: file.means,
                stds: file.stds,
                constant_mask: file.constant_mask,
            },
            schema_fingerprint: file.schema_fingerprint,
            feature_names: file.feature_names,
            hyper: file.hyper,
            train_meta: file.train_meta,
        })
    }

    pub fn load(path: &Path) -> Result<LinearModel> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        LinearModel::from_json(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::matrix::write_atomic(path, self.to_json().as_bytes())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_labels(y: &[u8]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if y.iter().all(|&l| l == 0) || y.iter().all(|&l| l == 1) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// L2-regularized negative log-likelihood (mean over rows) and its gradient
/// at (w, b). Public so correctness can be audited against finite
/// differences.
pub fn logistic_loss_grad(
    x: &[Vec<f64>],
    y: &[u8],
    w: &[f64],
    b: f64,
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; w.len()];
    let mut grad_b = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z = dot(w, row) + b;
        let p = sigmoid(z);
        let t = label as f64;
        // numerically stable -[t ln p + (1-t) ln(1-p)]
        loss += z.max(0.0) - t * z + (1.0 + (-z.abs()).exp()).ln();
        let err = p - t;
        for (g, v) in grad_w.iter_mut().zip(row) {
            *g += err * v;
        }
        grad_b += err;
    }
    loss /= n;
    grad_b /= n;
    for (g, wk) in grad_w.iter_mut().zip(w) {
        *g = *g / n + lambda * wk;
    }
    loss += 0.5 * lambda * dot(w, w);
    (loss, grad_w, grad_b)
}

const LOGISTIC_BATCH: usize = 32;

/// Logistic regression via mini-batch gradient descent (batch 32, seeded
/// shuffle each epoch).
pub fn train_logistic(
    x: &[Vec<f64>],
    y: &[u8],
    schema: &FeatureSchema,
    hyper: &Hyper,
) -> Result<LinearModel> {
    check_labels(y)?;
    hyper.validate()?;
    let standardizer = fit_standardizer(x)?;
    let z = standardizer.transform_matrix(x);
    let d = schema.len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(hyper.seed, "logistic"));
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(LOGISTIC_BATCH) {
            let m = batch.len() as f64;
            let mut grad_w = vec![0.0; d];
            let mut grad_b = 0.0;
            for &i in batch {
                let err = sigmoid(dot(&w, &z[i]) + b) - y[i] as f64;
                for (g, v) in grad_w.iter_mut().zip(&z[i]) {
                    *g += err * v;
                }
                grad_b += err;
            }
            for k in 0..d {
                w[k] -= hyper.learning_rate * (grad_w[k] / m + hyper.lambda * w[k]);
            }
            b -= hyper.learning_rate * grad_b / m;
        }
    }
    Ok(LinearModel {
        kind: ClassifierKind::Logistic,
        weights: w,
        bias: b,
        standardizer,
        schema_fingerprint: schema.fingerprint().to_string(),
        feature_names: schema.names().to_vec(),
        hyper: *hyper,
        train_meta: TrainMeta {
            n_samples: x.len(),
            n_features: d,
        },
    })
}

/// The SGD-SVM objective: lambda * ||w||^2 / 2 + mean hinge loss.
pub fn svm_objective(x: &[Vec<f64>], y: &[u8], w: &[f64], b: f64, lambda: f64) -> f64 {
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let sign = if label == 1 { 1.0 } else { -1.0 };
            (1.0 - sign * (dot(w, row) + b)).max(0.0)
        })
        .sum();
    0.5 * lambda * dot(w, w) + hinge / x.len() as f64
}

/// Linear SVM via stochastic sub-gradient descent with step
/// eta_t = learning_rate / (1 + lambda * t).
pub fn train_svm_sgd(
    x: &[Vec<f64>],
    y: &[u8],
    schema: &FeatureSchema,
    hyper: &Hyper,
) -> Result<LinearModel> {
    check_labels(y)?;
    hyper.validate()?;
    let standardizer = fit_standardizer(x)?;
    let z = standardizer.transform_matrix(x);
    let d = schema.len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(hyper.seed, "svm-sgd"));
    let mut t = 0u64;
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = hyper.learning_rate / (1.0 + hyper.lambda * t as f64);
            let sign = if y[i] == 1 { 1.0 } else { -1.0 };
            let margin = sign * (dot(&w, &z[i]) + b);
            if margin < 1.0 {
                for (wk, v) in w.iter_mut().zip(&z[i]) {
                    *wk -= eta * (hyper.lambda * *wk - sign * v);
                }
                b += eta * sign;
            } else {
                for wk in &mut w {
                    *wk -= eta * hyper.lambda * *wk;
                }
            }
        }
    }
    Ok(LinearModel {
        kind: ClassifierKind::SvmSgd,
        weights: w,
        bias: b,
        standardizer,
        schema_fingerprint: schema.fingerprint().to_string(),
        feature_names: schema.names().to_vec(),
        hyper: *hyper,
        train_meta: TrainMeta {
            n_samples: x.len(),
            n_features: d,
        },
    })
}

/// Result of the SMO dual solve, kept for KKT auditing in tests.
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub sweeps: usize,
}

/// Minimum relative multiplier change worth applying; steps below it are
/// rejected so the solve cannot creep forever on negligible updates.
const SMO_STEP_EPS: f64 = 1e-3;

/// Snaps a multiplier sitting within rounding distance of a box bound onto
/// the bound itself, so residues like 1e-21 do not read as support vectors.
fn snap_to_bounds(a: f64, c: f64) -> f64 {
    if a < 1e-12 {
        0.0
    } else if a > c - 1e-12 {
        c
    } else {
        a
    }
}

struct SmoState<'a> {
    z: &'a [Vec<f64>],
    y: Vec<f64>,
    alphas: Vec<f64>,
    w: Vec<f64>,
    b: f64,
    /// cached decision values f_k = w . z_k + b
    f: Vec<f64>,
    /// precomputed linear-kernel Gram matrix, row-major n x n
    gram: Vec<f64>,
    c: f64,
    tol: f64,
}

impl SmoState<'_> {
    fn error(&self, k: usize) -> f64 {
        self.f[k] - self.y[k]
    }

    /// Recomputes the cached decision values from (w, b), discarding any
    /// drift the incremental updates accumulated.
    fn refresh_errors(&mut self) {
        for k in 0..self.f.len() {
            self.f[k] = dot(&self.w, &self.z[k]) + self.b;
        }
    }

    #[cfg(debug_assertions)]
    fn dual_objective(&self) -> f64 {
        self.alphas.iter().sum::<f64>() - 0.5 * dot(&self.w, &self.w)
    }

    /// Attempts one pairwise update; returns true when a multiplier moved.
    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        #[cfg(debug_assertions)]
        let obj_before = self.dual_objective();
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai_old, aj_old) = (self.alphas[i], self.alphas[j]);
        let s = yi * yj;
        let (lo, hi) = if s < 0.0 {
            let diff = aj_old - ai_old;
            (diff.max(0.0), (self.c + diff).min(self.c))
        } else {
            let sum = ai_old + aj_old;
            ((sum - self.c).max(0.0), sum.min(self.c))
        };
        if hi - lo < 1e-12 {
            return false;
        }
        let n = self.f.len();
        let kii = self.gram[i * n + i];
        let kjj = self.gram[j * n + j];
        let kij = self.gram[i * n + j];
        let eta = kii + kjj - 2.0 * kij;
        if eta <= 1e-12 {
            return false;
        }
        let ei = self.error(i);
        let ej = self.error(j);
        let mut aj_new = snap_to_bounds(aj_old + yj * (ei - ej) / eta, self.c).clamp(lo, hi);
        aj_new = snap_to_bounds(aj_new, self.c);
        if (aj_new - aj_old).abs() < SMO_STEP_EPS * (aj_new + aj_old + SMO_STEP_EPS) {
            return false;
        }
        let ai_new = snap_to_bounds(
            (ai_old + s * (aj_old - aj_new)).clamp(0.0, self.c),
            self.c,
        );
        let (dai, daj) = (ai_new - ai_old, aj_new - aj_old);

        let b1 = self.b - ei - yi * dai * kii - yj * daj * kij;
        let b2 = self.b - ej - yi * dai * kij - yj * daj * kjj;
        let b_new = if ai_new > 0.0 && ai_new < self.c {
            b1
        } else if aj_new > 0.0 && aj_new < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = b_new - self.b;

        self.alphas[i] = ai_new;
        self.alphas[j] = aj_new;
        self.b = b_new;
        for k in 0..self.w.len() {
            self.w[k] += yi * dai * self.z[i][k] + yj * daj * self.z[j][k];
        }
        for k in 0..n {
            self.f[k] += yi * dai * self.gram[i * n + k] + yj * daj * self.gram[j * n + k] + db;
        }
        #[cfg(debug_assertions)]
        debug_assert!(
            self.dual_objective() >= obj_before - 1e-9,
            "SMO dual objective decreased"
        );
        true
    }

    /// Second-choice heuristic: the partner maximizing |E_i - E_j|, with a
    /// deterministic scan over the remaining points as fallback.
    fn examine(&mut self, i: usize) -> bool {
        let r = self.error(i) * self.y[i];
        let violates = (r < -self.tol && self.alphas[i] < self.c)
            || (r > self.tol && self.alphas[i] > 0.0);
        if !violates {
            return false;
        }
        let ei = self.error(i);
        let mut best = None;
        let mut best_gap = -1.0;
        for j in 0..self.f.len() {
            if j == i {
                continue;
            }
            let gap = (ei - self.error(j)).abs();
            if gap > best_gap {
                best_gap = gap;
                best = Some(j);
            }
        }
        if let Some(j) = best {
            if self.take_step(i, j) {
                return true;
            }
            for offset in 1..self.f.len() {
                let k = (j + offset) % self.f.len();
                if k != i && self.take_step(i, k) {
                    return true;
                }
            }
        }
        false
    }
}

/// Solves the SVM dual with SMO on standardized rows; exposed separately so
/// the dual variables can be audited.
///
/// All-zero columns (constant features masked by standardization) cannot
/// contribute to any kernel value or weight, so the solve runs on the
/// compacted matrix and scatters the weights back afterwards.
pub fn smo_solve(z: &[Vec<f64>], y_signs: &[f64], hyper: &Hyper) -> Result<(SmoSolution, Vec<f64>, f64)> {
    let d = z.first().map_or(0, Vec::len);
    let live: Vec<usize> = (0..d)
        .filter(|&k| z.iter().any(|row| row[k] != 0.0))
        .collect();
    if live.len() == d {
        return smo_solve_dense(z, y_signs, hyper);
    }
    let compact: Vec<Vec<f64>> = z
        .iter()
        .map(|row| live.iter().map(|&k| row[k]).collect())
        .collect();
    let (solution, w_compact, b) = smo_solve_dense(&compact, y_signs, hyper)?;
    let mut w = vec![0.0; d];
    for (&k, wv) in live.iter().zip(&w_compact) {
        w[k] = *wv;
    }
    Ok((solution, w, b))
}

fn smo_solve_dense(
    z: &[Vec<f64>],
    y_signs: &[f64],
    hyper: &Hyper,
) -> Result<(SmoSolution, Vec<f64>, f64)> {
    let n = z.len();
    let d = z.first().map_or(0, Vec::len);
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = dot(&z[i], &z[j]);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }
    let mut state = SmoState {
        z,
        y: y_signs.to_vec(),
        alphas: vec![0.0; n],
        w: vec![0.0; d],
        b: 0.0,
        f: vec![0.0; n],
        gram,
        c: hyper.c,
        tol: hyper.tol,
    };
    // Full sweeps alternate with repeated sweeps over the non-bound
    // multipliers; the solve terminates when a full sweep changes nothing.
    // Only full sweeps count against max_passes; the non-bound refinement
    // between them gets its own generous safety cap.
    let inner_cap = hyper.max_passes.saturating_mul(50);
    let mut sweeps = 0;
    loop {
        state.refresh_errors();
        let mut changed = 0usize;
        for i in 0..n {
            if state.examine(i) {
                changed += 1;
            }
        }
        sweeps += 1;
        if changed == 0 {
            break;
        }
        if sweeps >= hyper.max_passes {
            return Err(Error::NonConvergence { sweeps });
        }
        let mut inner_sweeps = 0usize;
        loop {
            let mut inner_changed = 0usize;
            for i in 0..n {
                if state.alphas[i] > 0.0
                    && state.alphas[i] < state.c
                    && state.examine(i)
                {
                    inner_changed += 1;
                }
            }
            inner_sweeps += 1;
            if inner_changed == 0 {
                break;
            }
            if inner_sweeps >= inner_cap {
                return Err(Error::NonConvergence { sweeps });
            }
        }
    }
    Ok((
        SmoSolution {
            alphas: state.alphas,
            sweeps,
        },
        state.w,
        state.b,
    ))
}

/// Linear SVM trained by sequential minimal optimization. Weights are
/// recovered from the dual as sum(alpha_i * y_i * x_i).
pub fn train_svm_smo(
    x: &[Vec<f64>],
    y: &[u8],
    schema: &FeatureSchema,
    hyper: &Hyper,
) -> Result<LinearModel> {
    check_labels(y)?;
    hyper.validate()?;
    let standardizer = fit_standardizer(x)?;
    let z = standardizer.transform_matrix(x);
    let signs: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let (_, w, b) = smo_solve(&z, &signs, hyper)?;
    Ok(LinearModel {
        kind: ClassifierKind::SvmSmo,
        weights: w,
        bias: b,
        standardizer,
        schema_fingerprint: schema.fingerprint().to_string(),
        feature_names: schema.names().to_vec(),
        hyper: *hyper,
        train_meta: TrainMeta {
            n_samples: x.len(),
            n_features: schema.len(),
        },
    })
}

/// Dispatch on the classifier kind.
pub fn train(
    kind: ClassifierKind,
    x: &[Vec<f64>],
    y: &[u8],
    schema: &FeatureSchema,
    hyper: &Hyper,
) -> Result<LinearModel> {
    match kind {
        ClassifierKind::Logistic => train_logistic(x, y, schema, hyper),
        ClassifierKind::SvmSgd => train_svm_sgd(x, y, schema, hyper),
        ClassifierKind::SvmSmo => train_svm_smo(x, y, schema, hyper),
    }
}
