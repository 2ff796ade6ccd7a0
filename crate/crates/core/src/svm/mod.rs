//! One-vs-one kernel SVM over moment features.
//!
//! Training standardizes features with the training-set mean and standard
//! deviation, then fits one SMO machine per class pair. Prediction is a
//! majority vote; ties go to the class with the larger summed |decision|
//! over the machines it won, then to the smaller class label.

pub mod smo;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::Method;
use crate::retrieval::FeatureDatabase;

/// Decision values with magnitude at or below this abstain from voting.
pub const TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Rbf { gamma: f64 },
    Linear,
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

/// `exp(−γ‖a − b‖²)`.
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    Ok(Kernel::Rbf { gamma }.eval(a, b))
}

/// Kernel choice before the feature dimension is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `gamma: None` resolves to `1 / dim`.
    Rbf { gamma: Option<f64> },
    Linear,
}

impl KernelSpec {
    pub fn resolve(self, dim: usize) -> Kernel {
        match self {
            KernelSpec::Rbf { gamma } => Kernel::Rbf {
                gamma: gamma.unwrap_or(1.0 / dim.max(1) as f64),
            },
            KernelSpec::Linear => Kernel::Linear,
        }
    }
}

/// Which views of each class are used for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Indices `round(t·n/k)`, `t = 0..k`, within the class's sorted order.
    Even,
    First,
    Random(u64),
}

impl Selection {
    /// Positions (into a class of `n` items) chosen for training, ascending.
    pub fn pick(self, n: usize, k: usize, class_label: usize) -> Result<Vec<usize>> {
        if k == 0 || k > n {
            return Err(Error::Svm(format!(
                "class {class_label} has {n} samples, cannot select {k}"
            )));
        }
        let mut idx: Vec<usize> = match self {
            Selection::Even => (0..k)
                .map(|t| ((t * n) as f64 / k as f64).round() as usize)
                .map(|i| i.min(n - 1))
                .collect(),
            Selection::First => (0..k).collect(),
            Selection::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (class_label as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut all: Vec<usize> = (0..n).collect();
                all.shuffle(&mut rng);
                all.truncate(k);
                all
            }
        };
        idx.sort_unstable();
        idx.dedup();
        Ok(idx)
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::Even => f.write_str("even"),
            Selection::First => f.write_str("first"),
            Selection::Random(s) => write!(f, "random:{s}"),
        }
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Selection::Even),
            "first" => Ok(Selection::First),
            _ => s
                .strip_prefix("random:")
                .and_then(|seed| seed.parse().ok())
                .map(Selection::Random)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "selection {s:?}: expected even, first or random:<seed>"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub kernel: KernelSpec,
    pub c: f64,
    /// Training samples per class.
    pub k: usize,
    pub selection: Selection,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Rbf { gamma: None },
            c: 10.0,
            k: 7,
            selection: Selection::Even,
            tol: 1e-3,
            max_iter: 10_000,
        }
    }
}

/// Per-feature z-scoring; zero-variance features get unit stddev.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Self {
        let dim = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            if !(*s > 0.0) || !s.is_finite() {
                *s = 1.0;
            }
        }
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Binary machine separating `positive` (+1) from `negative` (−1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMachine {
    pub positive: usize,
    pub negative: usize,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i · y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PairMachine {
    pub fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

/// Provenance recorded alongside a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub k: usize,
    pub selection: Selection,
    pub method: Option<Method>,
    pub order: Option<u16>,
    pub train_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub classes: Vec<usize>,
    pub machines: Vec<PairMachine>,
    pub standardization: Standardizer,
    pub training: TrainingInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: usize,
    /// `(class, votes)` for every class, ascending class.
    pub votes: Vec<(usize, u32)>,
}

/// Trains on labelled vectors (all of them; no per-class selection).
pub fn train(samples: &[(&[f64], usize)], config: &SvmConfig) -> Result<SvmModel> {
    let mut classes: Vec<usize> = samples.iter().map(|s| s.1).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Svm(format!(
            "need at least 2 classes, got {}",
            classes.len()
        )));
    }
    if !(config.c > 0.0) {
        return Err(Error::Svm(format!("C must be positive, got {}", config.c)));
    }
    let dim = samples[0].0.len();
    if let Some(bad) = samples.iter().find(|s| s.0.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.0.len(),
        });
    }
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.0).collect();
    let standardization = Standardizer::fit(&rows);
    let z: Vec<Vec<f64>> = rows.iter().map(|r| standardization.apply(r)).collect();
    let kernel = config.kernel.resolve(dim);

    let pairs: Vec<(usize, usize)> = classes
        .iter()
        .enumerate()
        .flat_map(|(a, &ca)| classes[a + 1..].iter().map(move |&cb| (ca, cb)))
        .collect();
    let machines = pairs
        .par_iter()
        .map(|&(pos, neg)| {
            let idx: Vec<usize> = (0..samples.len())
                .filter(|&i| samples[i].1 == pos || samples[i].1 == neg)
                .collect();
            let y: Vec<f64> = idx
                .iter()
                .map(|&i| if samples[i].1 == pos { 1.0 } else { -1.0 })
                .collect();
            let n = idx.len();
            let mut gram = vec![0.0; n * n];
            for a in 0..n {
                for b in a..n {
                    let v = kernel.eval(&z[idx[a]], &z[idx[b]]);
                    gram[a * n + b] = v;
                    gram[b * n + a] = v;
                }
            }
            let sol = smo::solve(&gram, &y, config.c, config.tol, config.max_iter.max(100 * n));
            let (mut support_vectors, mut dual_coef) = (Vec::new(), Vec::new());
            for (t, &a) in sol.alpha.iter().enumerate() {
                if a > 0.0 {
                    support_vectors.push(z[idx[t]].clone());
                    dual_coef.push(a * y[t]);
                }
            }
            PairMachine {
                positive: pos,
                negative: neg,
                support_vectors,
                dual_coef,
                bias: sol.bias,
                iterations: sol.iterations,
                converged: sol.converged,
            }
        })
        .collect();

    Ok(SvmModel {
        kernel,
        c: config.c,
        classes,
        machines,
        standardization,
        training: TrainingInfo {
            k: config.k,
            selection: config.selection,
            method: None,
            order: None,
            train_ids: Vec::new(),
        },
    })
}

/// Database indices used for training: `config.k` per class via `config.selection`,
/// applied to each class's records in database order.
pub fn select_training(db: &FeatureDatabase, config: &SvmConfig) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for class in db.classes() {
        let members: Vec<usize> = (0..db.len())
            .filter(|&i| db.records()[i].class_label == class)
            .collect();
        for p in config.selection.pick(members.len(), config.k, class)? {
            out.push(members[p]);
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Selects `k` views per class from `db` and trains on them.
pub fn train_from_db(db: &FeatureDatabase, config: &SvmConfig) -> Result<SvmModel> {
    let chosen = select_training(db, config)?;
    let samples: Vec<(&[f64], usize)> = chosen
        .iter()
        .map(|&i| (db.records()[i].values.as_slice(), db.records()[i].class_label))
        .collect();
    let mut model = train(&samples, config)?;
    model.training.method = Some(db.method());
    model.training.order = Some(db.order());
    model.training.train_ids = chosen.iter().map(|&i| db.records()[i].id.clone()).collect();
    Ok(model)
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.standardization.mean.len()
    }

    pub fn classify(&self, feature: &[f64]) -> Result<Classification> {
        if feature.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: feature.len(),
            });
        }
        let z = self.standardization.apply(feature);
        let pos_of = |c: usize| self.classes.binary_search(&c).expect("known class");
        let mut votes = vec![0u32; self.classes.len()];
        let mut strength = vec![0.0f64; self.classes.len()];
        for m in &self.machines {
            let d = m.decision(&self.kernel, &z);
            if d.abs() <= TIE_EPSILON {
                continue;
            }
            let winner = if d > 0.0 { m.positive } else { m.negative };
            votes[pos_of(winner)] += 1;
            strength[pos_of(winner)] += d.abs();
        }
        let mut best = 0;
        for c in 1..self.classes.len() {
            let better = votes[c] > votes[best]
                || (votes[c] == votes[best] && strength[c] > strength[best]);
            if better {
                best = c;
            }
        }
        Ok(Classification {
            label: self.classes[best],
            votes: self.classes.iter().copied().zip(votes).collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Which database images are scored after training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalScope {
    All,
    Heldout,
}

impl FromStr for EvalScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(EvalScope::All),
            "heldout" => Ok(EvalScope::Heldout),
            _ => Err(Error::InvalidArgument(format!(
                "eval scope {s:?}: expected all or heldout"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    pub k: usize,
    pub scope: EvalScope,
    pub correct: usize,
    pub total: usize,
    pub efficiency: f64,
}

/// Trains with `config` and reports `100 × correct / total` over `scope`.
pub fn classification_efficiency(
    db: &FeatureDatabase,
    config: &SvmConfig,
    scope: EvalScope,
) -> Result<ClassificationOutcome> {
    let model = train_from_db(db, config)?;
    let training: std::collections::HashSet<&str> =
        model.training.train_ids.iter().map(String::as_str).collect();
    let targets: Vec<usize> = (0..db.len())
        .filter(|&i| scope == EvalScope::All || !training.contains(db.records()[i].id.as_str()))
        .collect();
    if targets.is_empty() {
        return Err(Error::Svm("no images left to evaluate".into()));
    }
    let correct = targets
        .par_iter()
        .map(|&i| {
            let r = &db.records()[i];
            Ok(usize::from(model.classify(&r.values)?.label == r.class_label))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(ClassificationOutcome {
        k: config.k,
        scope,
        correct,
        total: targets.len(),
        efficiency: 100.0 * correct as f64 / targets.len() as f64,
    })
}

#[cfg(test)]
mod tests;
