//! Canberra-distance retrieval over a feature database.

mod format;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{FeatureVector, Method};

pub(crate) use format::write_atomic as format_write_atomic;
pub use format::{load_db, load_db_json, save_db, save_db_json, DB_MAGIC, DB_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    #[serde(rename = "class")]
    pub class_label: usize,
    pub values: Vec<f64>,
}

/// Feature vectors of one method/order for a labelled image collection.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDatabase {
    method: Method,
    order: u16,
    dim: usize,
    records: Vec<Record>,
}

impl FeatureDatabase {
    pub fn from_records(
        method: Method,
        order: usize,
        dim: usize,
        records: Vec<Record>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.values.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.values.len(),
                });
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self {
            method,
            order: method.effective_order(order) as u16,
            dim,
            records,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn order(&self) -> u16 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature(&self, index: usize) -> FeatureVector {
        FeatureVector::new(
            self.method,
            self.order as usize,
            self.records[index].values.clone(),
        )
    }

    /// Sorted distinct class labels.
    pub fn classes(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.records.iter().map(|r| r.class_label).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Same records with every feature value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.records {
            r.values.iter_mut().for_each(|v| *v *= factor);
        }
        out
    }

    /// CRC32 of the binary serialization.
    pub fn checksum(&self) -> u32 {
        crc32fast::hash(&format::encode(self).expect("encodable database"))
    }
}

/// `Σ |a_k − b_k| / (|a_k| + |b_k|)`, with `0/0` terms taken as 0.
pub fn canberra(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(canberra_unchecked(a, b))
}

#[inline]
fn canberra_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let den = x.abs() + y.abs();
            if den == 0.0 {
                0.0
            } else {
                (x - y).abs() / den
            }
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    #[serde(rename = "class")]
    pub class_label: usize,
    pub distance: f64,
}

/// Hits in ascending distance, ties broken by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub hits: Vec<Hit>,
}

/// `member` is the database index of the query when it is itself a record:
/// it is dropped when `exclude_self`, otherwise it wins ties at its distance.
fn rank(
    db: &FeatureDatabase,
    q: &[f64],
    top_n: usize,
    member: Option<usize>,
    exclude_self: bool,
) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = db
        .records
        .iter()
        .enumerate()
        .filter(|(i, _)| !(exclude_self && Some(*i) == member))
        .map(|(i, r)| (i, canberra_unchecked(q, &r.values)))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
        a.1.total_cmp(&b.1)
            .then_with(|| (Some(b.0) == member).cmp(&(Some(a.0) == member)))
            .then_with(|| db.records[a.0].id.cmp(&db.records[b.0].id))
    };
    let n = top_n.min(scored.len());
    if n < scored.len() && n > 0 {
        scored.select_nth_unstable_by(n - 1, cmp);
        scored.truncate(n);
    }
    scored.sort_unstable_by(cmp);
    scored.truncate(n);
    scored
}

/// Returns the `top_n` nearest records (all of them if `top_n` exceeds the size).
pub fn query(db: &FeatureDatabase, q: &FeatureVector, top_n: usize) -> Result<RankedResult> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if q.method != db.method || q.order != db.order {
        return Err(Error::MethodMismatch {
            expected: db.method,
            expected_order: db.order,
            actual: q.method,
            actual_order: q.order,
        });
    }
    if q.dim() != db.dim {
        return Err(Error::DimensionMismatch {
            expected: db.dim,
            actual: q.dim(),
        });
    }
    let hits = rank(db, &q.values, top_n, None, false)
        .into_iter()
        .map(|(i, d)| Hit {
            id: db.records[i].id.clone(),
            class_label: db.records[i].class_label,
            distance: d,
        })
        .collect();
    Ok(RankedResult { hits })
}

/// Average retrieval efficiency with every record used once as the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalEfficiency {
    pub top_n: usize,
    pub exclude_self: bool,
    /// `(class, mean efficiency %)`, ascending class.
    pub per_class: Vec<(usize, f64)>,
    /// Mean over all queries.
    pub average: f64,
    /// Mean of the per-class means.
    pub class_average: f64,
}

/// For each query: `100 × same-class hits / retrieved`, where `retrieved`
/// is `top_n` clamped to the candidate count. With `exclude_self = false`
/// the query itself is a candidate and normally ranks first.
pub fn retrieval_efficiency(
    db: &FeatureDatabase,
    top_n: usize,
    exclude_self: bool,
) -> Result<RetrievalEfficiency> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if top_n == 0 {
        return Err(Error::InvalidArgument("top_n must be at least 1".into()));
    }
    let scores: Vec<f64> = (0..db.len())
        .into_par_iter()
        .map(|qi| {
            let q = &db.records[qi];
            let ranked = rank(db, &q.values, top_n, Some(qi), exclude_self);
            if ranked.is_empty() {
                return 0.0;
            }
            let hits = ranked
                .iter()
                .filter(|(i, _)| db.records[*i].class_label == q.class_label)
                .count();
            100.0 * hits as f64 / ranked.len() as f64
        })
        .collect();

    let mut by_class: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (r, s) in db.records.iter().zip(&scores) {
        let e = by_class.entry(r.class_label).or_default();
        e.0 += s;
        e.1 += 1;
    }
    let per_class: Vec<(usize, f64)> = by_class
        .into_iter()
        .map(|(c, (sum, n))| (c, sum / n as f64))
        .collect();
    let average = scores.iter().sum::<f64>() / scores.len() as f64;
    let class_average = per_class.iter().map(|(_, v)| v).sum::<f64>() / per_class.len() as f64;
    Ok(RetrievalEfficiency {
        top_n,
        exclude_self,
        per_class,
        average,
        class_average,
    })
}
