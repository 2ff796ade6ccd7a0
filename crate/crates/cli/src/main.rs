//! `momcbir`: moment-feature extraction, retrieval, SVM classification
//! and COIL-20 benchmarks from the command line.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use moment_cbir::eval::{
    run_classification_benchmark, run_retrieval_benchmark, run_timing_benchmark, Dataset,
    EvalConfig, EvalReport, FeatureCache,
};
use moment_cbir::retrieval::{load_db, load_db_json, save_db, save_db_json};
use moment_cbir::svm::{self, EvalScope, KernelSpec, Selection, SvmConfig, SvmModel};
use moment_cbir::{
    load_image, query, scan_coil20, Error, Extractor, FeatureDatabase, Method, ScanOptions,
};

use config::{parse_list, FileConfig};

#[derive(Parser)]
#[command(name = "momcbir", version, about = "Image-moment retrieval and classification")]
struct Cli {
    /// TOML or JSON file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for extraction and evaluation (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract features for a COIL-20 style directory into a feature database.
    Extract(ExtractArgs),
    /// Rank database images by Canberra distance to a query image.
    Query(QueryArgs),
    /// Train a one-vs-one SVM on a feature database.
    TrainSvm(TrainArgs),
    /// Classify images (or a whole database) with a trained model.
    Classify(ClassifyArgs),
    /// Run retrieval, classification and timing benchmarks.
    Eval(EvalArgs),
    /// Describe or export a feature database.
    DbInfo(DbInfoArgs),
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// binary (default) or json.
    #[arg(long)]
    format: Option<String>,
    /// Also write the dataset manifest as JSON.
    #[arg(long)]
    manifest_out: Option<PathBuf>,
    /// Require exactly 20 classes × 72 views.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    top_n: Option<usize>,
    /// Expected method; an error is raised if the database differs.
    #[arg(long)]
    method: Option<String>,
    /// text (default), json or csv.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Default)]
struct SvmArgs {
    /// Training samples per class; a list for eval (e.g. 4,5,6,7 or 4..7).
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    /// RBF gamma or "auto" (1 / feature dimension).
    #[arg(long)]
    gamma: Option<String>,
    /// rbf (default) or linear.
    #[arg(long)]
    kernel: Option<String>,
    /// even, first or random:<seed>.
    #[arg(long)]
    select: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    db: PathBuf,
    #[command(flatten)]
    svm: SvmArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Images to classify.
    #[arg(long, num_args = 1..)]
    image: Vec<PathBuf>,
    /// Classify every record of this database and report the efficiency.
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// retrieval, classify, timing or all.
    #[arg(long)]
    suite: Option<String>,
    /// Comma list of methods (elm, zm, mi).
    #[arg(long, alias = "method")]
    methods: Option<String>,
    /// Retrieval orders, e.g. 4..9.
    #[arg(long)]
    orders: Option<String>,
    /// Order used by the classification and timing suites.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    exclude_self: bool,
    #[command(flatten)]
    svm: SvmArgs,
    /// all or heldout.
    #[arg(long)]
    eval_scope: Option<String>,
    /// Timed queries per method.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    strict: bool,
    /// Also write report tables to stdout: text (default), json or csv.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct DbInfoArgs {
    #[arg(long)]
    db: PathBuf,
    /// text (default) or json (full export).
    #[arg(long)]
    format: Option<String>,
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn show_config<T: Serialize>(name: &str, cfg: &T) {
    eprintln!(
        "{name} config: {}",
        serde_json::to_string(cfg).unwrap_or_else(|_| "<unserializable>".into())
    );
}

fn load_any_db(path: &Path) -> Result<FeatureDatabase> {
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let db = if json { load_db_json(path) } else { load_db(path) };
    db.with_context(|| format!("loading feature database {}", path.display()))
}

fn resolve_svm(args: &SvmArgs, file: &FileConfig) -> Result<(Vec<usize>, SvmConfig)> {
    let k = parse_list(&pick(args.k.clone(), file.k.clone(), "4,5,6,7".into()))?;
    let gamma = pick(args.gamma.clone(), file.gamma.clone(), "auto".into());
    let gamma = match gamma.as_str() {
        "auto" => None,
        g => Some(g.parse::<f64>().with_context(|| format!("bad gamma {g:?}"))?),
    };
    let kernel = match pick(args.kernel.clone(), file.kernel.clone(), "rbf".into()).as_str() {
        "rbf" => KernelSpec::Rbf { gamma },
        "linear" => KernelSpec::Linear,
        other => bail!("unknown kernel {other:?} (expected rbf or linear)"),
    };
    let selection: Selection = pick(args.select.clone(), file.select.clone(), "even".into()).parse()?;
    let cfg = SvmConfig {
        kernel,
        c: pick(args.c, file.c, 10.0),
        k: k[0],
        selection,
        ..SvmConfig::default()
    };
    Ok((k, cfg))
}

#[derive(Serialize)]
struct ExtractConfig<'a> {
    dataset: &'a Path,
    method: Method,
    order: usize,
    out: &'a Path,
    format: &'a str,
    strict: bool,
    jobs: Option<usize>,
}

fn cmd_extract(args: ExtractArgs, file: &FileConfig, jobs: Option<usize>) -> Result<()> {
    let dataset = args
        .dataset
        .or(file.dataset.clone())
        .ok_or_else(|| anyhow!("--dataset is required"))?;
    let method: Method = pick(args.method, file.method.clone(), "elm".into()).parse()?;
    let order = pick(args.order, file.order, 9);
    let format = pick(args.format, file.format.clone(), "binary".into());
    let strict = args.strict || file.strict.unwrap_or(false);
    if format != "binary" && format != "json" {
        bail!("unknown database format {format:?} (expected binary or json)");
    }
    show_config(
        "extract",
        &ExtractConfig {
            dataset: &dataset,
            method,
            order,
            out: &args.out,
            format: &format,
            strict,
            jobs,
        },
    );
    if method == Method::Mi && (args.order.is_some() || file.order.is_some()) {
        log::warn!("Hu invariants have no order; --order {order} ignored");
        eprintln!("warning: mi features are order-independent; --order ignored");
    }

    let manifest = scan_coil20(&dataset, ScanOptions { strict })
        .with_context(|| format!("scanning {}", dataset.display()))?;
    let images = manifest.load_all()?;
    let side = images[0].side();
    let db = Extractor::new(method, order, side).build_database(&images)?;
    match format.as_str() {
        "binary" => save_db(&db, &args.out)?,
        _ => save_db_json(&db, &args.out)?,
    }
    if let Some(p) = &args.manifest_out {
        let written = manifest
            .to_json()
            .map_err(anyhow::Error::from)
            .and_then(|text| fs::write(p, text).map_err(anyhow::Error::from));
        if let Err(e) = written {
            let _ = fs::remove_file(p);
            let _ = fs::remove_file(&args.out);
            return Err(e.context(format!("writing manifest {}", p.display())));
        }
    }
    println!(
        "wrote {} records of dim {} ({} order {}) to {}",
        db.len(),
        db.dim(),
        db.method(),
        db.order(),
        args.out.display()
    );
    Ok(())
}

fn cmd_query(args: QueryArgs, file: &FileConfig) -> Result<()> {
    let top_n = pick(args.top_n, file.top_n, 10);
    let format = pick(args.format, file.format.clone(), "text".into());
    show_config(
        "query",
        &serde_json::json!({"db": args.db, "image": args.image, "top_n": top_n, "format": format}),
    );
    let db = load_any_db(&args.db)?;
    let image = load_image(&args.image)?;
    let method = match args.method {
        Some(m) => m.parse::<Method>()?,
        None => db.method(),
    };
    let extractor = Extractor::new(method, db.order() as usize, image.side());
    let q = extractor.extract(&image)?;
    let ranked = query(&db, &q, top_n).map_err(|e| match e {
        Error::MethodMismatch { .. } => anyhow!(
            "{e}; database {} holds {} order {} features",
            args.db.display(),
            db.method(),
            db.order()
        ),
        other => anyhow!(other),
    })?;
    match format.as_str() {
        "text" => {
            for (rank, h) in ranked.hits.iter().enumerate() {
                println!("{:>4}  {:<20} {:>3}  {:.10}", rank + 1, h.id, h.class_label, h.distance);
            }
        }
        "json" => println!("{}", serde_json::to_string_pretty(&ranked)?),
        "csv" => {
            println!("rank,id,class,distance");
            for (rank, h) in ranked.hits.iter().enumerate() {
                println!("{},{},{},{}", rank + 1, h.id, h.class_label, h.distance);
            }
        }
        other => bail!("unknown format {other:?}"),
    }
    Ok(())
}

fn cmd_train(args: TrainArgs, file: &FileConfig) -> Result<()> {
    let (k, cfg) = resolve_svm(&args.svm, file)?;
    if k.len() != 1 && args.svm.k.is_some() {
        bail!("train-svm takes a single --k, got {k:?}");
    }
    let cfg = SvmConfig { k: k[0], ..cfg };
    show_config("train-svm", &serde_json::json!({"db": args.db, "svm": cfg, "out": args.out}));
    let db = load_any_db(&args.db)?;
    let model = svm::train_from_db(&db, &cfg)?;
    let text = model.to_json()?;
    let tmp = args.out.with_extension("json.partial");
    fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let unconverged = model.machines.iter().filter(|m| !m.converged).count();
    println!(
        "trained {} pairwise machines over {} classes ({} training images){}",
        model.machines.len(),
        model.classes.len(),
        model.training.train_ids.len(),
        if unconverged > 0 {
            format!(", {unconverged} hit the iteration cap")
        } else {
            String::new()
        }
    );
    Ok(())
}

fn cmd_classify(args: ClassifyArgs, file: &FileConfig) -> Result<()> {
    let format = pick(args.format, file.format.clone(), "text".into());
    let text = fs::read_to_string(&args.model)
        .with_context(|| format!("reading model {}", args.model.display()))?;
    let model = SvmModel::from_json(&text)?;
    show_config(
        "classify",
        &serde_json::json!({"model": args.model, "images": args.image, "db": args.db, "format": format}),
    );
    if args.image.is_empty() && args.db.is_none() {
        bail!("give --image or --db");
    }
    let mut results = Vec::new();
    if let Some(dbp) = &args.db {
        let db = load_any_db(dbp)?;
        if let (Some(m), Some(o)) = (model.training.method, model.training.order) {
            if m != db.method() || o != db.order() {
                bail!(
                    "model trained on {m} order {o} features, database holds {} order {}",
                    db.method(),
                    db.order()
                );
            }
        }
        let mut correct = 0;
        for r in db.records() {
            let c = model.classify(&r.values)?;
            correct += usize::from(c.label == r.class_label);
            results.push(serde_json::json!({"id": r.id, "class": r.class_label, "predicted": c.label}));
        }
        let eff = 100.0 * correct as f64 / db.len().max(1) as f64;
        eprintln!("classification efficiency: {eff:.2}% ({correct}/{})", db.len());
    }
    for p in &args.image {
        let image = load_image(p)?;
        let method = model
            .training
            .method
            .ok_or_else(|| anyhow!("model does not record its feature method"))?;
        let order = model.training.order.unwrap_or(0) as usize;
        let f = Extractor::new(method, order, image.side()).extract(&image)?;
        let c = model.classify(&f.values)?;
        results.push(serde_json::json!({"id": image.id, "predicted": c.label, "votes": c.votes}));
    }
    match format.as_str() {
        "json" => println!("{}", serde_json::to_string_pretty(&results)?),
        "text" | "csv" => {
            println!("id,predicted");
            for r in &results {
                println!("{},{}", r["id"].as_str().unwrap_or(""), r["predicted"]);
            }
        }
        other => bail!("unknown format {other:?}"),
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs, file: &FileConfig, jobs: Option<usize>) -> Result<()> {
    let dataset_root = args
        .dataset
        .or(file.dataset.clone())
        .ok_or_else(|| anyhow!("--dataset is required"))?;
    let suite = pick(args.suite, file.suite.clone(), "all".into());
    let (run_retrieval, run_classify, run_timing) = match suite.as_str() {
        "retrieval" => (true, false, false),
        "classify" => (false, true, false),
        "timing" => (false, false, true),
        "all" => (true, true, true),
        other => bail!("unknown suite {other:?} (retrieval, classify, timing, all)"),
    };
    let methods: Vec<Method> = pick(args.methods, file.methods.clone(), "mi,zm,elm".into())
        .split(',')
        .map(|m| m.parse())
        .collect::<Result<_, _>>()?;
    let orders = parse_list(&pick(args.orders, file.orders.clone(), "4..9".into()))?;
    let order = pick(args.order, file.order, 9);
    let top_n = pick(args.top_n, file.top_n, 72);
    let exclude_self = args.exclude_self || file.exclude_self.unwrap_or(false);
    let (k_values, svm_cfg) = resolve_svm(&args.svm, file)?;
    let scope: EvalScope = pick(args.eval_scope, file.eval_scope.clone(), "all".into()).parse()?;
    let reps = pick(args.reps, file.reps, 20);
    let out_dir = pick(args.out_dir, file.out_dir.clone(), PathBuf::from("reports"));
    let strict = args.strict || file.strict.unwrap_or(false);
    let format = pick(args.format, file.format.clone(), "text".into());

    let dataset = Dataset::load_coil20(&dataset_root, ScanOptions { strict })
        .with_context(|| format!("eval: loading dataset {}", dataset_root.display()))?;
    let config = EvalConfig {
        dataset_variant: dataset.variant.clone(),
        dataset_root: Some(dataset_root.clone()),
        image_count: dataset.images.len(),
        methods: methods.clone(),
        orders: orders.clone(),
        top_n,
        exclude_self,
        classify_order: order,
        k_values: k_values.clone(),
        svm: svm_cfg,
        eval_scope: scope,
        timing_order: order,
        timing_reps: reps,
    };
    show_config("eval", &serde_json::json!({"suite": suite, "jobs": jobs, "out_dir": out_dir, "eval": config}));

    let mut report = EvalReport::new(config);
    let mut cache = FeatureCache::default();
    if run_retrieval {
        report.retrieval = Some(
            run_retrieval_benchmark(&dataset, &mut cache, &methods, &orders, top_n, exclude_self)
                .context("eval --suite retrieval")?,
        );
    }
    if run_classify {
        report.classification = Some(
            run_classification_benchmark(&dataset, &mut cache, &methods, order, &k_values, &svm_cfg, scope)
                .context("eval --suite classify")?,
        );
    }
    if run_timing {
        report.timing = Some(
            run_timing_benchmark(&dataset, &mut cache, &methods, order, reps)
                .context("eval --suite timing")?,
        );
    }
    report.finished_unix_s = moment_cbir::eval::unix_now();

    let db_dir = out_dir.join("dbs");
    let written = report.write(&out_dir)?;
    if let Err(e) = cache.save_all(&db_dir) {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        let _ = fs::remove_dir_all(&db_dir);
        return Err(anyhow!(e).context("saving feature databases"));
    }
    print_report(&report, &format)?;
    for p in &written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn print_report(report: &EvalReport, format: &str) -> Result<()> {
    match format {
        "json" => println!("{}", serde_json::to_string_pretty(report)?),
        "csv" => {
            for bytes in [
                report.retrieval_csv()?,
                report.classification_csv()?,
                report.timing_csv()?,
            ]
            .into_iter()
            .flatten()
            {
                print!("{}", String::from_utf8_lossy(&bytes));
            }
        }
        "text" => {
            if let Some(r) = &report.retrieval {
                println!("average retrieval efficiency (top {}, self {}):", r.top_n,
                    if r.exclude_self { "excluded" } else { "included" });
                for row in &r.rows {
                    println!("  {:<4} order {:>2}  dim {:>3}  {:6.2}%", row.method, row.order, row.dim,
                        row.avg_retrieval_efficiency_pct);
                }
            }
            if let Some(c) = &report.classification {
                println!("classification efficiency (scope {:?}):", c.scope);
                for row in &c.rows {
                    println!("  {:<4} order {:>2}  k {:>2}  {:6.2}%", row.method, row.order, row.k_train,
                        row.classification_efficiency_pct);
                }
            }
            if let Some(t) = &report.timing {
                println!("mean query time over {} images:", t.database_size);
                for row in &t.rows {
                    println!("  {:<4} order {:>2}  {:.6} s ± {:.6} (extract {:.6}, scan {:.6})",
                        row.method, row.order, row.mean_query_s, row.std_query_s,
                        row.mean_extract_s, row.mean_scan_s);
                }
            }
        }
        other => bail!("unknown format {other:?}"),
    }
    Ok(())
}

fn cmd_db_info(args: DbInfoArgs, file: &FileConfig) -> Result<()> {
    let format = pick(args.format, file.format.clone(), "text".into());
    show_config("db-info", &serde_json::json!({"db": args.db, "format": format}));
    let db = load_any_db(&args.db)?;
    match format.as_str() {
        "json" => println!("{}", db.to_json()?),
        "text" => {
            println!("method   {}", db.method());
            println!("order    {}", db.order());
            println!("dim      {}", db.dim());
            println!("records  {}", db.len());
            println!("classes  {}", db.classes().len());
            println!("crc32    {:#010x}", db.checksum());
        }
        other => bail!("unknown format {other:?}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let jobs = cli.jobs.or(file.jobs);
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Extract(a) => cmd_extract(a, &file, jobs),
        Command::Query(a) => cmd_query(a, &file),
        Command::TrainSvm(a) => cmd_train(a, &file),
        Command::Classify(a) => cmd_classify(a, &file),
        Command::Eval(a) => cmd_eval(a, &file, jobs),
        Command::DbInfo(a) => cmd_db_info(a, &file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already embed their source text; skip repeats
            let mut msg = String::new();
            for cause in e.chain() {
                let text = cause.to_string();
                if !msg.contains(&text) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&text);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
