//! End-to-end benchmarks over a labelled image collection: average
//! retrieval efficiency per method and order, SVM classification
//! efficiency per training-set size, and per-query timing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::Extractor;
use crate::feature::Method;
use crate::image_io::{scan_coil20, GrayImage, ScanOptions};
use crate::retrieval::{self, retrieval_efficiency, save_db, FeatureDatabase};
use crate::svm::{classification_efficiency, EvalScope, SvmConfig};

/// Images plus a description of where they came from.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub variant: String,
    pub root: Option<PathBuf>,
    pub images: Vec<GrayImage>,
}

impl Dataset {
    /// Loads a COIL-20 style directory (assumed to be the processed 128×128 release).
    pub fn load_coil20(root: impl AsRef<Path>, opts: ScanOptions) -> Result<Self> {
        let root = root.as_ref();
        let manifest = scan_coil20(root, opts)?;
        let images = manifest.load_all()?;
        if let Some(first) = images.first() {
            if let Some(bad) = images.iter().find(|i| i.side() != first.side()) {
                return Err(Error::Dataset(format!(
                    "{} is {}px, expected {}px like {}",
                    bad.id,
                    bad.side(),
                    first.side(),
                    first.id
                )));
            }
        }
        Ok(Self {
            variant: "coil-20-proc (processed 128x128 distribution assumed)".into(),
            root: Some(root.to_path_buf()),
            images,
        })
    }

    pub fn from_images(variant: impl Into<String>, images: Vec<GrayImage>) -> Self {
        Self {
            variant: variant.into(),
            root: None,
            images,
        }
    }

    pub fn side(&self) -> usize {
        self.images.first().map_or(0, |i| i.side())
    }
}

/// Feature databases keyed by `(method, effective order)`, built on demand.
#[derive(Debug, Default)]
pub struct FeatureCache {
    dbs: BTreeMap<(Method, usize), FeatureDatabase>,
}

impl FeatureCache {
    pub fn get_or_build(
        &mut self,
        dataset: &Dataset,
        method: Method,
        order: usize,
    ) -> Result<&FeatureDatabase> {
        let key = (method, method.effective_order(order));
        if !self.dbs.contains_key(&key) {
            if dataset.images.is_empty() {
                return Err(Error::Dataset("dataset has no images".into()));
            }
            let t = Instant::now();
            let db = Extractor::new(method, key.1, dataset.side()).build_database(&dataset.images)?;
            log::info!(
                "extracted {method} order {} for {} images in {:.2?}",
                key.1,
                db.len(),
                t.elapsed()
            );
            self.dbs.insert(key, db);
        }
        Ok(&self.dbs[&key])
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeatureDatabase> {
        self.dbs.values()
    }

    /// Writes every cached database as `<method>_<order>.momf` under `dir`.
    pub fn save_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.dbs
            .values()
            .map(|db| {
                let p = dir.join(format!("{}_{}.momf", db.method(), db.order()));
                save_db(db, &p)?;
                Ok(p)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRow {
    pub method: Method,
    pub order: usize,
    pub dim: usize,
    /// Mean over all queries under the configured protocol.
    pub avg_retrieval_efficiency_pct: f64,
    /// Mean of per-class means under the configured protocol.
    pub class_mean_efficiency_pct: f64,
    /// Same metric with the opposite self-match convention.
    pub alt_protocol_efficiency_pct: f64,
    pub per_class_pct: Vec<(usize, f64)>,
    pub db_crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSection {
    pub top_n: usize,
    pub exclude_self: bool,
    pub rows: Vec<RetrievalRow>,
}

impl RetrievalSection {
    pub fn efficiency(&self, method: Method, order: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.order == order)
            .map(|r| r.avg_retrieval_efficiency_pct)
    }
}

/// Average retrieval efficiency for every `(method, order)`. Hu invariants
/// are computed once and repeated for each order.
pub fn run_retrieval_benchmark(
    dataset: &Dataset,
    cache: &mut FeatureCache,
    methods: &[Method],
    orders: &[usize],
    top_n: usize,
    exclude_self: bool,
) -> Result<RetrievalSection> {
    let mut rows = Vec::new();
    for &method in methods {
        let mut memo: Option<RetrievalRow> = None;
        for &order in orders {
            if method == Method::Mi {
                if let Some(row) = &memo {
                    rows.push(RetrievalRow {
                        order,
                        ..row.clone()
                    });
                    continue;
                }
            }
            let ctx = || format!("retrieval benchmark {method} order {order}");
            let db = cache
                .get_or_build(dataset, method, order)
                .map_err(|e| e.context(ctx()))?;
            let main = retrieval_efficiency(db, top_n, exclude_self).map_err(|e| e.context(ctx()))?;
            let alt = retrieval_efficiency(db, top_n, !exclude_self).map_err(|e| e.context(ctx()))?;
            let row = RetrievalRow {
                method,
                order,
                dim: db.dim(),
                avg_retrieval_efficiency_pct: main.average,
                class_mean_efficiency_pct: main.class_average,
                alt_protocol_efficiency_pct: alt.average,
                per_class_pct: main.per_class,
                db_crc32: db.checksum(),
            };
            if method == Method::Mi {
                memo = Some(row.clone());
            }
            rows.push(row);
        }
    }
    Ok(RetrievalSection {
        top_n,
        exclude_self,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub method: Method,
    pub order: usize,
    pub k_train: usize,
    /// Under the configured scope.
    pub classification_efficiency_pct: f64,
    pub correct: usize,
    pub total: usize,
    /// Under the other scope (`all` ↔ `heldout`); absent when no image is held out.
    pub alt_scope_efficiency_pct: Option<f64>,
    pub db_crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSection {
    pub scope: EvalScope,
    pub svm: SvmConfig,
    pub rows: Vec<ClassificationRow>,
}

impl ClassificationSection {
    pub fn efficiency(&self, method: Method, k: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.k_train == k)
            .map(|r| r.classification_efficiency_pct)
    }
}

pub fn run_classification_benchmark(
    dataset: &Dataset,
    cache: &mut FeatureCache,
    methods: &[Method],
    order: usize,
    k_values: &[usize],
    svm: &SvmConfig,
    scope: EvalScope,
) -> Result<ClassificationSection> {
    let mut rows = Vec::new();
    for &method in methods {
        for &k in k_values {
            let ctx = || format!("classification benchmark {method} order {order} k={k}");
            let db = cache
                .get_or_build(dataset, method, order)
                .map_err(|e| e.context(ctx()))?;
            let cfg = SvmConfig { k, ..*svm };
            let main = classification_efficiency(db, &cfg, scope).map_err(|e| e.context(ctx()))?;
            let other = match scope {
                EvalScope::All => EvalScope::Heldout,
                EvalScope::Heldout => EvalScope::All,
            };
            let alt = classification_efficiency(db, &cfg, other).ok().map(|o| o.efficiency);
            rows.push(ClassificationRow {
                method,
                order: method.effective_order(order),
                k_train: k,
                classification_efficiency_pct: main.efficiency,
                correct: main.correct,
                total: main.total,
                alt_scope_efficiency_pct: alt,
                db_crc32: db.checksum(),
            });
        }
    }
    Ok(ClassificationSection {
        scope,
        svm: *svm,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: Method,
    pub order: usize,
    pub reps: usize,
    /// Extraction of the query + distance scan over the database + full sort.
    pub mean_query_s: f64,
    pub std_query_s: f64,
    pub mean_extract_s: f64,
    pub mean_scan_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSection {
    pub database_size: usize,
    pub rows: Vec<TimingRow>,
}

impl TimingSection {
    pub fn mean_query(&self, method: Method) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method)
            .map(|r| r.mean_query_s)
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Times `reps` single-threaded queries per method. Queries cycle through
/// evenly spaced dataset images; extractor tables are prebuilt.
pub fn run_timing_benchmark(
    dataset: &Dataset,
    cache: &mut FeatureCache,
    methods: &[Method],
    order: usize,
    reps: usize,
) -> Result<TimingSection> {
    if dataset.images.is_empty() {
        return Err(Error::Dataset("dataset has no images".into()));
    }
    let reps = reps.max(1);
    let mut rows = Vec::new();
    for &method in methods {
        let db = cache.get_or_build(dataset, method, order)?;
        let extractor = Extractor::new(method, order, dataset.side());
        // warm-up
        let warm = extractor.extract(&dataset.images[0])?;
        retrieval::query(db, &warm, db.len())?;

        let (mut total, mut extract, mut scan) = (Vec::new(), Vec::new(), Vec::new());
        let stride = (dataset.images.len() / reps).max(1);
        for r in 0..reps {
            let img = &dataset.images[(r * stride) % dataset.images.len()];
            let t0 = Instant::now();
            let f = extractor.extract(img)?;
            let t1 = Instant::now();
            let ranked = retrieval::query(db, &f, db.len())?;
            let t2 = Instant::now();
            std::hint::black_box(&ranked);
            total.push((t2 - t0).as_secs_f64());
            extract.push((t1 - t0).as_secs_f64());
            scan.push((t2 - t1).as_secs_f64());
        }
        let (mean_query_s, std_query_s) = mean_std(&total);
        rows.push(TimingRow {
            method,
            order: method.effective_order(order),
            reps,
            mean_query_s,
            std_query_s,
            mean_extract_s: mean_std(&extract).0,
            mean_scan_s: mean_std(&scan).0,
        });
    }
    Ok(TimingSection {
        database_size: dataset.images.len(),
        rows,
    })
}

/// Configuration snapshot embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub dataset_variant: String,
    pub dataset_root: Option<PathBuf>,
    pub image_count: usize,
    pub methods: Vec<Method>,
    pub orders: Vec<usize>,
    pub top_n: usize,
    pub exclude_self: bool,
    pub classify_order: usize,
    pub k_values: Vec<usize>,
    pub svm: SvmConfig,
    pub eval_scope: EvalScope,
    pub timing_order: usize,
    pub timing_reps: usize,
}

/// Conventions that affect reported numbers.
pub const CONVENTIONS: &[&str] = &[
    "intensities scaled to [0,1] (8-bit value / 255)",
    "ELM order g = max p+q; features ordered by p+q then p",
    "ZM magnitudes |A_nm| for m >= 0 on the [-1,1]^2 pixel-center grid, pixels with rho > 1 dropped, area element dxdy included, theta = atan2(y, x)",
    "MI: eta_pq = mu_pq / mu_00^gamma, raw phi values (no log transform), x = column, y = row",
    "retrieval: Canberra distance with 0/0 terms = 0; ties broken by id",
    "SVM: features z-scored with training statistics, one-vs-one voting, SMO stop at max KKT violation < tol",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub conventions: Vec<String>,
    pub retrieval: Option<RetrievalSection>,
    pub classification: Option<ClassificationSection>,
    pub timing: Option<TimingSection>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

#[derive(Serialize)]
struct Table1Row {
    method: Method,
    order: usize,
    avg_retrieval_efficiency_pct: f64,
}

#[derive(Serialize)]
struct Table2Row {
    method: Method,
    k_train: usize,
    classification_efficiency_pct: f64,
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
}

impl EvalReport {
    pub fn new(config: EvalConfig) -> Self {
        Self {
            config,
            conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
            retrieval: None,
            classification: None,
            timing: None,
            started_unix_s: unix_now(),
            finished_unix_s: 0,
        }
    }

    pub fn retrieval_csv(&self) -> Result<Option<Vec<u8>>> {
        self.retrieval
            .as_ref()
            .map(|s| {
                csv_bytes(s.rows.iter().map(|r| Table1Row {
                    method: r.method,
                    order: r.order,
                    avg_retrieval_efficiency_pct: r.avg_retrieval_efficiency_pct,
                }))
            })
            .transpose()
    }

    pub fn classification_csv(&self) -> Result<Option<Vec<u8>>> {
        self.classification
            .as_ref()
            .map(|s| {
                csv_bytes(s.rows.iter().map(|r| Table2Row {
                    method: r.method,
                    k_train: r.k_train,
                    classification_efficiency_pct: r.classification_efficiency_pct,
                }))
            })
            .transpose()
    }

    pub fn timing_csv(&self) -> Result<Option<Vec<u8>>> {
        self.timing
            .as_ref()
            .map(|s| csv_bytes(s.rows.iter()))
            .transpose()
    }

    /// Writes `report.json` plus one CSV per present section into `dir`.
    /// On any failure every file written so far is removed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files: Vec<(PathBuf, Vec<u8>)> =
            vec![(dir.join("report.json"), serde_json::to_vec_pretty(self)?)];
        if let Some(b) = self.retrieval_csv()? {
            files.push((dir.join("retrieval.csv"), b));
        }
        if let Some(b) = self.classification_csv()? {
            files.push((dir.join("classification.csv"), b));
        }
        if let Some(b) = self.timing_csv()? {
            files.push((dir.join("timing.csv"), b));
        }
        let mut written = Vec::new();
        for (path, bytes) in files {
            if let Err(e) = retrieval::format_write_atomic(&path, &bytes) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e);
            }
            written.push(path);
        }
        Ok(written)
    }
}
