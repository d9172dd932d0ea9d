//! `cwhash` — the command-line front door to the hashing pipeline:
//! generate labeled data, train the two-stage model, encode binary codes,
//! search by Hamming distance, and evaluate retrieval quality.
//!
//! Every tunable can come from three places, in rising precedence: built-in
//! defaults, a `--config key=value` file, and explicit flags. All artifacts
//! are written atomically and deterministically; wall-clock timestamps are
//! confined to the `meta.txt` sidecar so replaying a run reproduces every
//! other artifact byte for byte.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data/format error,
//! 4 numerical failure.

mod config;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

use cwhash_core::codec::{encode, read_codes, write_codes, BinaryCode};
use cwhash_core::data::{
    gen_blobs, gen_multilabel_blobs, read_dataset, split, write_dataset, LabelMode,
    LabeledDataset, SplitCount, SplitSpec,
};
use cwhash_core::eval::{evaluate, precision_curve, write_precision_csv, RelevanceJudge};
use cwhash_core::index::{build_index, HammingIndex};
use cwhash_core::loss::{CenterMode, LossConfig};
use cwhash_core::net::EmbeddingNet;
use cwhash_core::trainer::{train_full, CenterUpdateMode, TrainConfig};
use cwhash_core::{Error, Result};

use config::FileConfig;

#[derive(Parser)]
#[command(
    name = "cwhash",
    version,
    about = "Class-wise hashing pipeline: generate data, train, encode, search, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic labeled data and write train/query/database splits
    Gen(GenArgs),
    /// Train the two-stage model; write checkpoint, centers, and logs
    Train(TrainArgs),
    /// Encode a dataset into packed binary codes with a trained network
    Encode(EncodeArgs),
    /// Validate a code file and optionally run batch queries against it
    Index(IndexArgs),
    /// Rank the database for one query code
    Query(QueryArgs),
    /// Compute MAP, precision@k, and nDCG@k; write a JSON report
    Eval(EvalArgs),
    /// Write mean precision@k for k = 1..k-max as CSV
    Curves(CurvesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CenterModeArg {
    Periodic,
    Gradient,
}

impl FromStr for CenterModeArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<CenterModeArg, String> {
        match s {
            "periodic" => Ok(CenterModeArg::Periodic),
            "gradient" => Ok(CenterModeArg::Gradient),
            other => Err(format!("expected 'periodic' or 'gradient', got {other:?}")),
        }
    }
}

impl From<CenterModeArg> for CenterUpdateMode {
    fn from(a: CenterModeArg) -> CenterUpdateMode {
        match a {
            CenterModeArg::Periodic => CenterUpdateMode::Periodic,
            CenterModeArg::Gradient => CenterUpdateMode::Gradient,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage2CentersArg {
    Continuous,
    Binary,
}

impl FromStr for Stage2CentersArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Stage2CentersArg, String> {
        match s {
            "continuous" => Ok(Stage2CentersArg::Continuous),
            "binary" => Ok(Stage2CentersArg::Binary),
            other => Err(format!("expected 'continuous' or 'binary', got {other:?}")),
        }
    }
}

impl From<Stage2CentersArg> for CenterMode {
    fn from(a: Stage2CentersArg) -> CenterMode {
        match a {
            Stage2CentersArg::Continuous => CenterMode::Continuous,
            Stage2CentersArg::Binary => CenterMode::Binary,
        }
    }
}

#[derive(Parser)]
struct GenArgs {
    /// key=value config file supplying defaults for any flag
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Within-cluster standard deviation (centers sit at radius 10·spread)
    #[arg(long)]
    spread: Option<f64>,
    /// Generate multi-label clusters (all single classes plus adjacent pairs)
    #[arg(long)]
    multilabel: bool,
    /// Query samples drawn per class (single-label data)
    #[arg(long)]
    query_per_class: Option<usize>,
    /// Query samples drawn uniformly over all rows (required for multi-label)
    #[arg(long)]
    query_total: Option<usize>,
    /// Train on this many samples per class instead of the whole database
    #[arg(long)]
    train_per_class: Option<usize>,
    /// Train on this many samples total instead of the whole database
    #[arg(long)]
    train_total: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for full/train/query/db dataset files
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Parser)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training dataset (defaults to <out>/train.dcw1)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for net.dcwn, centers.json, logs, meta.txt
    #[arg(long)]
    out: Option<PathBuf>,
    /// Code length in bits
    #[arg(long)]
    bits: Option<usize>,
    /// Gaussian variance; default keyed by --bits (1.0 for multi-label data)
    #[arg(long)]
    sigma_sq: Option<f64>,
    /// Embedding box half-width
    #[arg(long)]
    alpha: Option<f64>,
    /// Stage-one cube penalty weight
    #[arg(long)]
    eta1: Option<f64>,
    /// Stage-two vertex penalty weight
    #[arg(long)]
    eta2: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Minibatch size
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs_stage1: Option<usize>,
    #[arg(long)]
    epochs_stage2: Option<usize>,
    #[arg(long, value_enum)]
    center_mode: Option<CenterModeArg>,
    /// Steps between center refreshes (default: once per epoch)
    #[arg(long)]
    center_update_period: Option<usize>,
    #[arg(long, value_enum)]
    stage2_centers: Option<Stage2CentersArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for minibatch passes (1 = fully sequential)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Parser)]
struct EncodeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trained checkpoint
    #[arg(long)]
    net: Option<PathBuf>,
    /// Dataset to encode
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output code file (default: the dataset path with extension .dcwb)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Parser)]
struct IndexArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Database code file
    #[arg(long)]
    codes: Option<PathBuf>,
    /// Query code file; each query prints ranked "query db_id distance" lines
    #[arg(long)]
    query_codes: Option<PathBuf>,
    /// Neighbors per query
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Parser)]
struct QueryArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Database code file
    #[arg(long)]
    codes: Option<PathBuf>,
    /// Query code file
    #[arg(long)]
    query_codes: Option<PathBuf>,
    /// Which query row to search with
    #[arg(long)]
    row: Option<usize>,
    /// Neighbors to print as "db_id distance" lines
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Parser)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Database dataset (labels; features if encoding on the fly)
    #[arg(long)]
    db: Option<PathBuf>,
    /// Query dataset (labels; features if encoding on the fly)
    #[arg(long)]
    query: Option<PathBuf>,
    /// Checkpoint used to encode datasets without precomputed codes
    #[arg(long)]
    net: Option<PathBuf>,
    /// Precomputed database codes (skips encoding the database)
    #[arg(long)]
    db_codes: Option<PathBuf>,
    /// Precomputed query codes (skips encoding the queries)
    #[arg(long)]
    query_codes: Option<PathBuf>,
    /// Evaluation cutoff
    #[arg(long)]
    k: Option<usize>,
    /// Report path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Parser)]
struct CurvesArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    query: Option<PathBuf>,
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    db_codes: Option<PathBuf>,
    #[arg(long)]
    query_codes: Option<PathBuf>,
    /// Largest cutoff; the CSV covers k = 1..k-max
    #[arg(long)]
    k_max: Option<usize>,
    /// CSV path
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Index(args) => cmd_index(args),
        Command::Query(args) => cmd_query(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Curves(args) => cmd_curves(args),
    };
    if let Err(e) = result {
        eprintln!("cwhash: {e}");
        std::process::exit(e.exit_code());
    }
}

fn resolve_path(
    cfg: &FileConfig,
    flag: Option<PathBuf>,
    key: &str,
    default: PathBuf,
) -> PathBuf {
    flag.or_else(|| cfg.raw(key).map(PathBuf::from))
        .unwrap_or(default)
}

/// The label combinations `gen --multilabel` produces: every single class
/// plus every adjacent pair around the class circle.
fn multilabel_combos(classes: usize) -> Vec<Vec<usize>> {
    let mut set: BTreeSet<Vec<usize>> = BTreeSet::new();
    for c in 0..classes {
        set.insert(vec![c]);
        let mut pair = vec![c, (c + 1) % classes];
        pair.sort_unstable();
        pair.dedup();
        set.insert(pair);
    }
    set.into_iter().collect()
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let classes = cfg.resolve(args.classes, "classes", 10)?;
    let per_class = cfg.resolve(args.per_class, "per-class", 120)?;
    let dim = cfg.resolve(args.dim, "dim", 16)?;
    let spread = cfg.resolve(args.spread, "spread", 1.0)?;
    let seed = cfg.resolve(args.seed, "seed", 1)?;
    let multilabel = args.multilabel || cfg.get("multilabel")?.unwrap_or(false);
    let out = resolve_path(&cfg, args.out, "out", PathBuf::from("run"));

    let dataset = if multilabel {
        let combos = multilabel_combos(classes);
        gen_multilabel_blobs(classes, per_class, dim, &combos, spread, seed)?
    } else {
        gen_blobs(classes, per_class, dim, spread, seed)?
    };

    let query_per_class = cfg.resolve_opt(args.query_per_class, "query-per-class")?;
    let query_total = cfg.resolve_opt(args.query_total, "query-total")?;
    let query = match (query_per_class, query_total) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either query-per-class or query-total, not both".into(),
            ))
        }
        (Some(q), None) => SplitCount::PerClass(q),
        (None, Some(t)) => SplitCount::Total(t),
        (None, None) => {
            if multilabel {
                SplitCount::Total(dataset.len() / 6)
            } else {
                SplitCount::PerClass(20)
            }
        }
    };
    let train_per_class = cfg.resolve_opt(args.train_per_class, "train-per-class")?;
    let train_total = cfg.resolve_opt(args.train_total, "train-total")?;
    let train = match (train_per_class, train_total) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either train-per-class or train-total, not both".into(),
            ))
        }
        (Some(q), None) => Some(SplitCount::PerClass(q)),
        (None, Some(t)) => Some(SplitCount::Total(t)),
        (None, None) => None,
    };

    let spec = SplitSpec { query, train, seed };
    let (train_set, query_set, db_set) = split(&dataset, &spec)?;

    std::fs::create_dir_all(&out)?;
    for (name, part) in [
        ("full.dcw1", &dataset),
        ("train.dcw1", &train_set),
        ("query.dcw1", &query_set),
        ("db.dcw1", &db_set),
    ] {
        let path = out.join(name);
        write_dataset(&path, part)?;
        println!(
            "wrote {} ({} samples, {} dims, {} classes)",
            path.display(),
            part.len(),
            part.dim(),
            part.class_count()
        );
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let out = resolve_path(&cfg, args.out, "out", PathBuf::from("run"));
    let data_path = resolve_path(&cfg, args.data, "data", out.join("train.dcw1"));
    let dataset = read_dataset(&data_path)?;

    let bits = cfg.resolve(args.bits, "bits", 16)?;
    if bits == 0 {
        return Err(Error::Config("bits must be >= 1".into()));
    }
    let mut loss = LossConfig::new(bits, dataset.class_count());
    if dataset.label_mode() == LabelMode::MultiLabel {
        loss.sigma_sq = LossConfig::MULTILABEL_SIGMA_SQ;
    }
    loss.sigma_sq = cfg.resolve(args.sigma_sq, "sigma-sq", loss.sigma_sq)?;
    loss.alpha = cfg.resolve(args.alpha, "alpha", loss.alpha)?;
    loss.eta1 = cfg.resolve(args.eta1, "eta1", loss.eta1)?;
    loss.eta2 = cfg.resolve(args.eta2, "eta2", loss.eta2)?;

    let mut train_cfg = TrainConfig::new(loss);
    train_cfg.lr = cfg.resolve(args.lr, "lr", train_cfg.lr)?;
    train_cfg.weight_decay = cfg.resolve(args.weight_decay, "weight-decay", train_cfg.weight_decay)?;
    train_cfg.batch_size = cfg.resolve(args.batch, "batch", train_cfg.batch_size)?;
    train_cfg.stage1_epochs = cfg.resolve(args.epochs_stage1, "epochs-stage1", train_cfg.stage1_epochs)?;
    train_cfg.stage2_epochs = cfg.resolve(args.epochs_stage2, "epochs-stage2", train_cfg.stage2_epochs)?;
    train_cfg.center_update_period =
        cfg.resolve_opt(args.center_update_period, "center-update-period")?;
    train_cfg.center_mode = cfg
        .resolve_opt(args.center_mode, "center-mode")?
        .map_or(train_cfg.center_mode, Into::into);
    train_cfg.stage2_centers = cfg
        .resolve_opt(args.stage2_centers, "stage2-centers")?
        .map_or(train_cfg.stage2_centers, Into::into);
    train_cfg.seed = cfg.resolve(args.seed, "seed", 1)?;
    train_cfg.threads = cfg.resolve(args.threads, "threads", train_cfg.threads)?;
    train_cfg.validate()?;

    let (net, centers, log, _) = train_full(&dataset, &train_cfg)?;

    std::fs::create_dir_all(&out)?;
    let net_path = out.join("net.dcwn");
    let centers_path = out.join("centers.json");
    let log_path = out.join("trainlog.csv");
    let refresh_path = out.join("centerlog.csv");
    net.write_checkpoint(&net_path)?;
    centers.write_json(&centers_path)?;
    log.write_csv(&log_path)?;
    log.write_refresh_csv(&refresh_path)?;
    write_meta(&out.join("meta.txt"), &data_path, &train_cfg)?;

    let last = log.iterations.last();
    println!(
        "trained {} iterations; final loss {}, quantization error {}",
        log.last_iteration(),
        last.map_or(f64::NAN, |r| r.loss),
        last.map_or(f64::NAN, |r| r.quant_error),
    );
    for p in [&net_path, &centers_path, &log_path, &refresh_path] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// The one artifact allowed to differ between replays: records when and
/// from what settings the run was produced.
fn write_meta(path: &Path, data_path: &Path, cfg: &TrainConfig) -> Result<()> {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let center_mode = match cfg.center_mode {
        CenterUpdateMode::Periodic => "periodic",
        CenterUpdateMode::Gradient => "gradient",
    };
    let stage2_centers = match cfg.stage2_centers {
        CenterMode::Continuous => "continuous",
        CenterMode::Binary => "binary",
    };
    let text = format!(
        "created_unix={stamp}\ncommand=train\ndata={}\nbits={}\nsigma-sq={}\nalpha={}\neta1={}\neta2={}\nlr={}\nweight-decay={}\nbatch={}\nepochs-stage1={}\nepochs-stage2={}\ncenter-mode={center_mode}\ncenter-update-period={}\nstage2-centers={stage2_centers}\nseed={}\nthreads={}\n",
        data_path.display(),
        cfg.loss.code_length,
        cfg.loss.sigma_sq,
        cfg.loss.alpha,
        cfg.loss.eta1,
        cfg.loss.eta2,
        cfg.lr,
        cfg.weight_decay,
        cfg.batch_size,
        cfg.stage1_epochs,
        cfg.stage2_epochs,
        cfg.center_update_period
            .map_or("epoch".to_string(), |p| p.to_string()),
        cfg.seed,
        cfg.threads,
    );
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let net_path = resolve_path(&cfg, args.net, "net", PathBuf::from("run/net.dcwn"));
    let data_path = resolve_path(&cfg, args.data, "data", PathBuf::from("run/db.dcw1"));
    let out = resolve_path(
        &cfg,
        args.out,
        "out",
        data_path.with_extension("dcwb"),
    );
    let net = EmbeddingNet::read_checkpoint(&net_path)?;
    let dataset = read_dataset(&data_path)?;
    let codes = encode(&net, dataset.features())?;
    let ids: Vec<u32> = (0..dataset.len() as u32).collect();
    write_codes(&out, &codes, &ids)?;
    println!(
        "wrote {} ({} codes, {} bits)",
        out.display(),
        codes.len(),
        net.output_dim()
    );
    Ok(())
}

fn cmd_index(args: IndexArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let codes_path = resolve_path(&cfg, args.codes, "codes", PathBuf::from("run/db.dcwb"));
    let k = cfg.resolve(args.k, "k", 10)?;
    let (codes, ids) = read_codes(&codes_path)?;
    let index = build_index(&codes, &ids)?;
    let query_path = cfg.resolve_opt(args.query_codes, "query-codes")?;
    match query_path {
        None => {
            println!("{} codes, {} bits", index.len(), index.bits());
        }
        Some(path) => {
            let (queries, _) = read_codes(&path)?;
            for (qi, q) in queries.iter().enumerate() {
                for (id, dist) in index.query_topk(q, k)? {
                    println!("{qi} {id} {dist}");
                }
            }
        }
    }
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let codes_path = resolve_path(&cfg, args.codes, "codes", PathBuf::from("run/db.dcwb"));
    let query_path = resolve_path(
        &cfg,
        args.query_codes,
        "query-codes",
        PathBuf::from("run/query.dcwb"),
    );
    let row = cfg.resolve(args.row, "row", 0)?;
    let k = cfg.resolve(args.k, "k", 10)?;
    let (codes, ids) = read_codes(&codes_path)?;
    let index = build_index(&codes, &ids)?;
    let (queries, _) = read_codes(&query_path)?;
    if row >= queries.len() {
        return Err(Error::Config(format!(
            "query row {row} out of range for {} codes",
            queries.len()
        )));
    }
    for (id, dist) in index.query_topk(&queries[row], k)? {
        println!("{id} {dist}");
    }
    Ok(())
}

/// Codes for one side of an evaluation: from a code file when given,
/// otherwise by encoding the dataset with the checkpoint.
fn side_codes(
    dataset: &LabeledDataset,
    code_path: Option<PathBuf>,
    net: &mut Option<EmbeddingNet>,
    net_path: &Path,
    side: &str,
) -> Result<(Vec<BinaryCode>, Vec<u32>)> {
    match code_path {
        Some(path) => {
            let (codes, ids) = read_codes(&path)?;
            if codes.len() != dataset.len() {
                return Err(Error::Data(format!(
                    "{side} code file has {} codes but the dataset has {} samples",
                    codes.len(),
                    dataset.len()
                )));
            }
            Ok((codes, ids))
        }
        None => {
            if net.is_none() {
                *net = Some(EmbeddingNet::read_checkpoint(net_path)?);
            }
            let codes = encode(net.as_ref().unwrap(), dataset.features())?;
            let ids = (0..dataset.len() as u32).collect();
            Ok((codes, ids))
        }
    }
}

struct RetrievalSetup {
    index: HammingIndex,
    query_codes: Vec<BinaryCode>,
    query_set: LabeledDataset,
    db_set: LabeledDataset,
}

#[allow(clippy::too_many_arguments)]
fn retrieval_setup(
    cfg: &FileConfig,
    db: Option<PathBuf>,
    query: Option<PathBuf>,
    net_flag: Option<PathBuf>,
    db_codes: Option<PathBuf>,
    query_codes: Option<PathBuf>,
) -> Result<RetrievalSetup> {
    let db_path = resolve_path(cfg, db, "db", PathBuf::from("run/db.dcw1"));
    let query_path = resolve_path(cfg, query, "query", PathBuf::from("run/query.dcw1"));
    let net_path = resolve_path(cfg, net_flag, "net", PathBuf::from("run/net.dcwn"));
    let db_codes_path = cfg.resolve_opt(db_codes, "db-codes")?;
    let query_codes_path = cfg.resolve_opt(query_codes, "query-codes")?;

    let db_set = read_dataset(&db_path)?;
    let query_set = read_dataset(&query_path)?;
    let mut net = None;
    let (db_code_list, db_ids) =
        side_codes(&db_set, db_codes_path, &mut net, &net_path, "database")?;
    let (query_code_list, _) =
        side_codes(&query_set, query_codes_path, &mut net, &net_path, "query")?;
    let index = build_index(&db_code_list, &db_ids)?;
    Ok(RetrievalSetup {
        index,
        query_codes: query_code_list,
        query_set,
        db_set,
    })
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let k = cfg.resolve(args.k, "k", 100)?;
    let out = resolve_path(&cfg, args.out, "out", PathBuf::from("run/report.json"));
    let setup = retrieval_setup(&cfg, args.db, args.query, args.net, args.db_codes, args.query_codes)?;
    let judge = RelevanceJudge::new(setup.query_set.labels(), setup.db_set.labels());
    let report = evaluate(&setup.index, &setup.query_codes, &judge, k)?;
    report.write_json(&out)?;
    println!(
        "map {} over {} queries at k={} ({} bits); wrote {}",
        report.map,
        report.query_count,
        report.k_eval,
        report.bits,
        out.display()
    );
    Ok(())
}

fn cmd_curves(args: CurvesArgs) -> Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let k_max = cfg.resolve(args.k_max, "k-max", 100)?;
    let out = resolve_path(&cfg, args.out, "out", PathBuf::from("run/curve.csv"));
    let setup = retrieval_setup(&cfg, args.db, args.query, args.net, args.db_codes, args.query_codes)?;
    let judge = RelevanceJudge::new(setup.query_set.labels(), setup.db_set.labels());
    let curve = precision_curve(&setup.index, &setup.query_codes, &judge, k_max)?;
    write_precision_csv(&out, &curve)?;
    println!("wrote {} ({} cutoffs)", out.display(), curve.len());
    Ok(())
}
