//! Acceptance gate for the toolkit. Each test exercises one release
//! criterion end to end against an independent oracle or a seeded benchmark
//! and prints a single `[acceptance] <name>: PASS|FAIL (...)` line carrying
//! the measured values and the thresholds pinned in this file.
//!
//! The benchmark problem shared by several criteria is a 10-class Gaussian
//! blob dataset (120 samples per class, 16 input dims, 20 queries per class
//! held out) trained to 16-bit codes with the default configuration.

use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use cwhash_core::codec::{encode_embeddings, pack, write_codes, BinaryCode};
use cwhash_core::data::{
    gen_blobs, gen_multilabel_blobs, split, LabeledDataset, SplitCount, SplitSpec,
};
use cwhash_core::eval::{evaluate, mean_average_precision, RelevanceJudge};
use cwhash_core::index::{build_index, hamming};
use cwhash_core::loss::{
    center_gradients, classwise_loss_grad, cube_penalty_grad, mean_quantization_error,
    multilabel_loss_grad, vertex_penalty_grad, CenterMode, ClassCenters, LabelVector, LossConfig,
};
use cwhash_core::net::{init_net, EmbeddingNet};
use cwhash_core::trainer::{train_full, train_stage1, train_stage2, CenterUpdateMode, TrainConfig};

/// Step used by every central-difference gradient check.
const FD_STEP: f64 = 1e-5;
/// Maximum allowed relative error between analytic and numeric gradients.
const FD_TOL: f64 = 1e-4;
/// Fixed seed for the shared benchmark problem.
const BENCH_SEED: u64 = 1;
/// Moving-average window for the convergence-ordering criterion.
const SMOOTH_WINDOW: usize = 20;
/// Learning rate for the convergence-ordering criterion (the benchmark
/// problem is easy enough at the default rate that both code lengths halve
/// their loss in the same window, leaving nothing to order).
const CONVERGENCE_LR: f64 = 0.003;

/// Prints the one-line verdict for a criterion, then enforces it.
fn gate(name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("[acceptance] {name}: {verdict} ({detail})");
    assert!(pass, "[acceptance] {name}: {verdict} ({detail})");
}

/// Relative error with a unit floor: absolute near zero, relative above 1.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs())
}

/// Central finite difference (f(x+h) − f(x−h)) / 2h.
fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

fn random_multihot(rng: &mut ChaCha8Rng, classes: usize) -> LabelVector {
    let mut bits: Vec<bool> = (0..classes).map(|_| rng.random::<f64>() < 0.5).collect();
    if !bits.iter().any(|&b| b) {
        bits[rng.random_range(0..classes)] = true;
    }
    LabelVector::MultiHot(bits)
}

fn random_code(rng: &mut ChaCha8Rng, bits: usize) -> BinaryCode {
    let signs: Vec<i8> = (0..bits)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    pack(&signs).unwrap()
}

/// End-to-end MAP@k of a trained network on a query/database pair.
fn map_of(net: &EmbeddingNet, query: &LabeledDataset, db: &LabeledDataset, k: usize) -> f64 {
    let db_codes = encode_embeddings(&net.embed(db.features()).unwrap());
    let q_codes = encode_embeddings(&net.embed(query.features()).unwrap());
    let ids: Vec<u32> = (0..db.len() as u32).collect();
    let index = build_index(&db_codes, &ids).unwrap();
    let judge = RelevanceJudge::new(query.labels(), db.labels());
    mean_average_precision(&index, &q_codes, &judge, k).unwrap()
}

/// The shared seeded benchmark: blobs, the default two-stage training, and
/// quality snapshots at the stage boundary and at the end.
struct BenchRun {
    train: LabeledDataset,
    query: LabeledDataset,
    db: LabeledDataset,
    stage1_quant: f64,
    stage1_map: f64,
    final_quant: f64,
    final_map: f64,
    secs: f64,
}

fn bench() -> &'static BenchRun {
    static RUN: OnceLock<BenchRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let data = gen_blobs(10, 120, 16, 1.0, BENCH_SEED).unwrap();
        let spec = SplitSpec {
            query: SplitCount::PerClass(20),
            train: None,
            seed: BENCH_SEED,
        };
        let (train, query, db) = split(&data, &spec).unwrap();
        let mut cfg = TrainConfig::new(LossConfig::new(16, 10));
        cfg.seed = BENCH_SEED;
        let t0 = Instant::now();
        let net = init_net(&cfg.net_dims(train.dim()), cfg.seed).unwrap();
        let (net, centers, _) = train_stage1(net, &train, &cfg).unwrap();
        let stage1_quant = mean_quantization_error(&net.embed(train.features()).unwrap());
        let stage1_map = map_of(&net, &query, &db, 100);
        let (net, _, _) = train_stage2(net, centers, &train, &cfg).unwrap();
        let final_quant = mean_quantization_error(&net.embed(train.features()).unwrap());
        let final_map = map_of(&net, &query, &db, 100);
        let secs = t0.elapsed().as_secs_f64();
        BenchRun {
            train,
            query,
            db,
            stage1_quant,
            stage1_map,
            final_quant,
            final_map,
            secs,
        }
    })
}

#[test]
fn analytic_gradients_match_central_differences() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst: f64 = 0.0;
    let mut coords = 0usize;
    let instances = 60usize;
    for _ in 0..instances {
        let c = rng.random_range(1..=5);
        let l = rng.random_range(1..=8);
        let b = rng.random_range(1..=4);
        let mut cfg = LossConfig::new(l, c);
        cfg.sigma_sq = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let centers = ClassCenters {
            centers: Array2::from_shape_fn((c, l), |_| rng.random_range(-1.0..1.0)),
            mode: CenterMode::Continuous,
        };
        // Coordinates are kept away from the cube-penalty kinks at ±α and
        // the vertex-penalty sign flip at 0, where one-sided subgradients
        // make central differences meaningless.
        let emb = Array2::from_shape_fn((b, l), |_| {
            let mut v: f64 = rng.random_range(-1.5..1.5);
            if (v.abs() - cfg.alpha).abs() < 0.01 {
                v += 0.05;
            }
            if v.abs() < 0.01 {
                v += 0.02;
            }
            v
        });
        let single: Vec<LabelVector> = (0..b)
            .map(|_| LabelVector::Class(rng.random_range(0..c)))
            .collect();
        let multi: Vec<LabelVector> = (0..b).map(|_| random_multihot(&mut rng, c)).collect();

        let (_, g) = classwise_loss_grad(&emb, &single, &centers, &cfg).unwrap();
        for n in 0..b {
            for k in 0..l {
                let fd = central_diff(
                    |v| {
                        let mut e = emb.clone();
                        e[[n, k]] = v;
                        classwise_loss_grad(&e, &single, &centers, &cfg).unwrap().0
                    },
                    emb[[n, k]],
                );
                worst = worst.max(rel_err(g[[n, k]], fd));
                coords += 1;
            }
        }

        let cg = center_gradients(&emb, &single, &centers, &cfg).unwrap();
        for i in 0..c {
            for k in 0..l {
                let fd = central_diff(
                    |v| {
                        let mut m = centers.clone();
                        m.centers[[i, k]] = v;
                        classwise_loss_grad(&emb, &single, &m, &cfg).unwrap().0
                    },
                    centers.centers[[i, k]],
                );
                worst = worst.max(rel_err(cg[[i, k]], fd));
                coords += 1;
            }
        }

        let (_, gm) = multilabel_loss_grad(&emb, &multi, &centers, &cfg).unwrap();
        for n in 0..b {
            for k in 0..l {
                let fd = central_diff(
                    |v| {
                        let mut e = emb.clone();
                        e[[n, k]] = v;
                        multilabel_loss_grad(&e, &multi, &centers, &cfg).unwrap().0
                    },
                    emb[[n, k]],
                );
                worst = worst.max(rel_err(gm[[n, k]], fd));
                coords += 1;
            }
        }

        let (_, gc) = cube_penalty_grad(&emb, &cfg).unwrap();
        let (_, gv) = vertex_penalty_grad(&emb, &cfg).unwrap();
        for n in 0..b {
            for k in 0..l {
                let fd_c = central_diff(
                    |v| {
                        let mut e = emb.clone();
                        e[[n, k]] = v;
                        cube_penalty_grad(&e, &cfg).unwrap().0
                    },
                    emb[[n, k]],
                );
                let fd_v = central_diff(
                    |v| {
                        let mut e = emb.clone();
                        e[[n, k]] = v;
                        vertex_penalty_grad(&e, &cfg).unwrap().0
                    },
                    emb[[n, k]],
                );
                worst = worst.max(rel_err(gc[[n, k]], fd_c));
                worst = worst.max(rel_err(gv[[n, k]], fd_v));
                coords += 2;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    gate(
        "analytic gradients vs central differences",
        worst <= FD_TOL && secs < 10.0,
        &format!(
            "{instances} instances, {coords} coordinates, max relative error {worst:.2e} <= {FD_TOL:.0e}, {secs:.1} s < 10 s"
        ),
    );
}

/// Full-sort Hamming oracle with the same tie rule the index promises:
/// ascending distance, then ascending id.
fn naive_topk(codes: &[BinaryCode], ids: &[u32], q: &BinaryCode, k: usize) -> Vec<(u32, u32)> {
    let mut all: Vec<(u32, u32)> = codes
        .iter()
        .zip(ids)
        .map(|(c, &id)| (id, hamming(c, q).unwrap()))
        .collect();
    all.sort_by_key(|&(id, d)| (d, id));
    all.truncate(k);
    all
}

/// Metric recomputation from first principles for one query's ranking.
struct NaiveMetrics {
    ap: f64,
    precision: Vec<(usize, f64)>,
    ndcg: Vec<(usize, f64)>,
}

fn naive_query_metrics(
    db_codes: &[BinaryCode],
    db_labels: &[LabelVector],
    q_code: &BinaryCode,
    q_label: &LabelVector,
    k: usize,
    cutoffs: &[usize],
) -> NaiveMetrics {
    let mut order: Vec<usize> = (0..db_codes.len()).collect();
    let dist: Vec<u32> = db_codes
        .iter()
        .map(|c| hamming(c, q_code).unwrap())
        .collect();
    order.sort_by_key(|&i| (dist[i], i));
    let top: Vec<usize> = order.iter().copied().take(k).collect();

    let rel: Vec<bool> = top
        .iter()
        .map(|&i| q_label.shares_label(&db_labels[i]))
        .collect();
    let mut hits = 0usize;
    let mut ap_sum = 0.0;
    for (i, &r) in rel.iter().enumerate() {
        if r {
            hits += 1;
            ap_sum += hits as f64 / (i + 1) as f64;
        }
    }
    let ap = if hits > 0 { ap_sum / hits as f64 } else { 0.0 };

    let gains: Vec<f64> = top
        .iter()
        .map(|&i| f64::exp2(q_label.intersection_size(&db_labels[i]) as f64) - 1.0)
        .collect();
    let mut ideal: Vec<f64> = db_labels
        .iter()
        .map(|l| f64::exp2(q_label.intersection_size(l) as f64) - 1.0)
        .collect();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut precision = Vec::new();
    let mut ndcg = Vec::new();
    for &t in cutoffs {
        let hits_t = rel.iter().take(t).filter(|&&r| r).count();
        precision.push((t, hits_t as f64 / t as f64));
        let dcg: f64 = gains
            .iter()
            .take(t)
            .enumerate()
            .map(|(i, &g)| g / ((i + 2) as f64).log2())
            .sum();
        let idcg: f64 = ideal
            .iter()
            .take(t)
            .enumerate()
            .map(|(i, &g)| g / ((i + 2) as f64).log2())
            .sum();
        ndcg.push((t, if idcg > 0.0 { dcg / idcg } else { 0.0 }));
    }
    NaiveMetrics { ap, precision, ndcg }
}

#[test]
fn topk_and_metrics_match_naive_oracles() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    let mut mismatches = 0usize;
    let mut first_mismatch = String::new();
    let topk_instances = 100usize;
    for inst in 0..topk_instances {
        let n = rng.random_range(1..=500);
        let l = [12usize, 32, 64][rng.random_range(0..3)];
        let codes: Vec<BinaryCode> = (0..n).map(|_| random_code(&mut rng, l)).collect();
        let mut ids: Vec<u32> = (0..n as u32).collect();
        ids.shuffle(&mut rng);
        let index = build_index(&codes, &ids).unwrap();
        let q = random_code(&mut rng, l);
        let k = rng.random_range(1..=n + 3);
        let got = index.query_topk(&q, k).unwrap();
        let want = naive_topk(&codes, &ids, &q, k);
        if got != want {
            mismatches += 1;
            if first_mismatch.is_empty() {
                first_mismatch = format!("; first diff at instance {inst} (N={n}, L={l}, k={k})");
            }
        }
    }

    let mut worst = 0.0f64;
    let metric_instances = 30usize;
    for inst in 0..metric_instances {
        let n = rng.random_range(1..=200);
        let qn = rng.random_range(1..=15);
        let c = rng.random_range(1..=6);
        let l = 16usize;
        let multi = inst % 2 == 1;
        let label = |rng: &mut ChaCha8Rng| {
            if multi {
                random_multihot(rng, c)
            } else {
                LabelVector::Class(rng.random_range(0..c))
            }
        };
        let db_codes: Vec<BinaryCode> = (0..n).map(|_| random_code(&mut rng, l)).collect();
        let db_labels: Vec<LabelVector> = (0..n).map(|_| label(&mut rng)).collect();
        let q_codes: Vec<BinaryCode> = (0..qn).map(|_| random_code(&mut rng, l)).collect();
        let q_labels: Vec<LabelVector> = (0..qn).map(|_| label(&mut rng)).collect();
        let ids: Vec<u32> = (0..n as u32).collect();
        let index = build_index(&db_codes, &ids).unwrap();
        let judge = RelevanceJudge::new(&q_labels, &db_labels);
        let k = rng.random_range(1..=n + 2);
        let report = evaluate(&index, &q_codes, &judge, k).unwrap();

        let cutoffs: Vec<usize> = report.precision_at.iter().map(|&(t, _)| t).collect();
        let mut map_sum = 0.0;
        let mut p_sums = vec![0.0; cutoffs.len()];
        let mut g_sums = vec![0.0; cutoffs.len()];
        for (qi, q) in q_codes.iter().enumerate() {
            let m = naive_query_metrics(&db_codes, &db_labels, q, &q_labels[qi], k, &cutoffs);
            map_sum += m.ap;
            for (j, &(_, p)) in m.precision.iter().enumerate() {
                p_sums[j] += p;
            }
            for (j, &(_, g)) in m.ndcg.iter().enumerate() {
                g_sums[j] += g;
            }
        }
        let nq = qn as f64;
        worst = worst.max((report.map - map_sum / nq).abs());
        for (j, &(_, p)) in report.precision_at.iter().enumerate() {
            worst = worst.max((p - p_sums[j] / nq).abs());
        }
        for (j, &(_, g)) in report.ndcg_at.iter().enumerate() {
            worst = worst.max((g - g_sums[j] / nq).abs());
        }
    }

    let secs = t0.elapsed().as_secs_f64();
    gate(
        "retrieval and metrics vs naive oracles",
        mismatches == 0 && worst <= 1e-12 && secs < 10.0,
        &format!(
            "{topk_instances} top-k instances, {mismatches} ranking mismatches{first_mismatch}; {metric_instances} metric instances, max deviation {worst:.2e} <= 1e-12; {secs:.1} s < 10 s"
        ),
    );
}

#[test]
fn benchmark_training_reaches_target_map() {
    let b = bench();
    gate(
        "benchmark retrieval quality",
        b.final_map >= 0.95 && b.secs < 60.0,
        &format!(
            "MAP@100 = {:.4} >= 0.95 after both stages, {:.1} s < 60 s single-threaded",
            b.final_map, b.secs
        ),
    );
}

#[test]
fn vertex_stage_cuts_quantization_error_without_losing_map() {
    let b = bench();
    gate(
        "vertex-stage quantization effect",
        b.final_quant < b.stage1_quant && b.final_map >= b.stage1_map - 0.01,
        &format!(
            "mean quantization error {:.3} -> {:.3} (strictly down), MAP@100 {:.4} -> {:.4} (allowed drop 0.01)",
            b.stage1_quant, b.final_quant, b.stage1_map, b.final_map
        ),
    );
}

#[test]
fn wider_gaussians_tighten_classes_and_spread_centers() {
    let b = bench();
    // The trade-off emerges once training has converged; the small variance
    // saturates its softmax early, so both runs get the same longer budget
    // with the vertex stage disabled to keep the comparison pure.
    let run = |sigma_sq: f64| {
        let mut cfg = TrainConfig::new(LossConfig::new(16, 10));
        cfg.loss.sigma_sq = sigma_sq;
        cfg.stage1_epochs = 100;
        cfg.stage2_epochs = 0;
        cfg.seed = BENCH_SEED;
        let (_, _, log, _) = train_full(&b.train, &cfg).unwrap();
        let last = log.refreshes.last().unwrap();
        (last.intra_class_variance, last.mean_center_distance)
    };
    let (var_small, dist_small) = run(0.5);
    let (var_big, dist_big) = run(2.0);
    gate(
        "variance-spread trade-off in sigma-squared",
        var_big < var_small && dist_big > dist_small,
        &format!(
            "sigma_sq 0.5 -> 2: intra-class variance {var_small:.3} -> {var_big:.3} (down), center distance {dist_small:.3} -> {dist_big:.3} (up)"
        ),
    );
}

/// First iteration at which the window-averaged first-stage loss reaches
/// half of its starting value; the record count if it never does.
fn half_loss_iteration(train: &LabeledDataset, bits: usize) -> usize {
    let mut cfg = TrainConfig::new(LossConfig::new(bits, 10));
    cfg.loss.sigma_sq = 1.0;
    cfg.lr = CONVERGENCE_LR;
    cfg.seed = BENCH_SEED;
    let net = init_net(&cfg.net_dims(train.dim()), cfg.seed).unwrap();
    let (_, _, log) = train_stage1(net, train, &cfg).unwrap();
    let losses: Vec<f64> = log.iterations.iter().map(|r| r.loss).collect();
    let smooth: Vec<f64> = losses
        .windows(SMOOTH_WINDOW)
        .map(|w| w.iter().sum::<f64>() / SMOOTH_WINDOW as f64)
        .collect();
    let target = smooth[0] / 2.0;
    smooth
        .iter()
        .position(|&v| v <= target)
        .unwrap_or(smooth.len())
}

#[test]
fn longer_codes_halve_their_loss_no_later() {
    let b = bench();
    let short = half_loss_iteration(&b.train, 12);
    let long = half_loss_iteration(&b.train, 48);
    gate(
        "code-length convergence ordering",
        long <= short,
        &format!(
            "sigma_sq = 1, lr = {CONVERGENCE_LR}: smoothed loss halves at iteration {long} for 48 bits <= {short} for 12 bits"
        ),
    );
}

#[test]
fn gradient_center_updates_match_periodic_retrieval() {
    let b = bench();
    let mut cfg = TrainConfig::new(LossConfig::new(16, 10));
    cfg.center_mode = CenterUpdateMode::Gradient;
    cfg.seed = BENCH_SEED;
    let (net, _, _, _) = train_full(&b.train, &cfg).unwrap();
    let map = map_of(&net, &b.query, &b.db, 100);
    let diff = (map - b.final_map).abs();
    gate(
        "gradient-mode center parity",
        diff <= 0.05,
        &format!(
            "MAP@100 {:.4} (gradient) vs {:.4} (periodic), |diff| = {diff:.4} <= 0.05",
            map, b.final_map
        ),
    );
}

#[test]
fn multilabel_training_reaches_target_map() {
    let combos: Vec<Vec<usize>> = vec![
        vec![0],
        vec![1],
        vec![2],
        vec![3],
        vec![4],
        vec![5],
        vec![0, 1],
        vec![1, 2],
        vec![2, 3],
        vec![3, 4],
        vec![4, 5],
        vec![0, 5],
    ];
    let data = gen_multilabel_blobs(6, 100, 16, &combos, 1.0, 1).unwrap();
    let spec = SplitSpec {
        query: SplitCount::Total(120),
        train: None,
        seed: 1,
    };
    let (train, query, db) = split(&data, &spec).unwrap();
    let mut cfg = TrainConfig::new(LossConfig::new(16, 6));
    cfg.loss.sigma_sq = LossConfig::MULTILABEL_SIGMA_SQ;
    cfg.seed = 1;
    let (net, _, _, _) = train_full(&train, &cfg).unwrap();
    let map = map_of(&net, &query, &db, 100);
    gate(
        "multi-label retrieval quality",
        map >= 0.90,
        &format!(
            "6 classes, label sets of size <= 2, shared-label relevance: MAP@100 = {map:.4} >= 0.90"
        ),
    );
}

#[test]
fn replayed_training_writes_byte_identical_artifacts() {
    let run = |dir: &Path| {
        let data = gen_blobs(10, 120, 16, 1.0, BENCH_SEED).unwrap();
        let spec = SplitSpec {
            query: SplitCount::PerClass(20),
            train: None,
            seed: BENCH_SEED,
        };
        let (train, query, db) = split(&data, &spec).unwrap();
        let mut cfg = TrainConfig::new(LossConfig::new(16, 10));
        cfg.seed = BENCH_SEED;
        let (net, _, log, _) = train_full(&train, &cfg).unwrap();
        let db_codes = encode_embeddings(&net.embed(db.features()).unwrap());
        let q_codes = encode_embeddings(&net.embed(query.features()).unwrap());
        let ids: Vec<u32> = (0..db.len() as u32).collect();
        write_codes(&dir.join("db.dcwb"), &db_codes, &ids).unwrap();
        let q_ids: Vec<u32> = (0..query.len() as u32).collect();
        write_codes(&dir.join("query.dcwb"), &q_codes, &q_ids).unwrap();
        log.write_csv(&dir.join("trainlog.csv")).unwrap();
        log.write_refresh_csv(&dir.join("centerlog.csv")).unwrap();
        let index = build_index(&db_codes, &ids).unwrap();
        let judge = RelevanceJudge::new(query.labels(), db.labels());
        let report = evaluate(&index, &q_codes, &judge, 100).unwrap();
        report.write_json(&dir.join("report.json")).unwrap();
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());
    let names = ["db.dcwb", "query.dcwb", "trainlog.csv", "centerlog.csv", "report.json"];
    let mut differing = Vec::new();
    for name in names {
        let bytes_a = std::fs::read(a.path().join(name)).unwrap();
        let bytes_b = std::fs::read(b.path().join(name)).unwrap();
        if bytes_a != bytes_b {
            differing.push(name);
        }
    }
    gate(
        "replay determinism",
        differing.is_empty(),
        &format!(
            "codes, logs, and report replayed with the same seed: {} of {} artifacts byte-identical{}",
            names.len() - differing.len(),
            names.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!("; differing: {differing:?}")
            }
        ),
    );
}
