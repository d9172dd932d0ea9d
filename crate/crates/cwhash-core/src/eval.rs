//! Retrieval quality metrics: MAP@k, precision@k, and nDCG@k, under
//! single-label and multi-label relevance rules.
//!
//! Relevance is judged from labels: a retrieved item is relevant when it
//! shares at least one class with the query (for single-label data that
//! means equal class ids). nDCG uses graded relevance — the size of the
//! label intersection — with exponential gain (2^grade − 1) and a log₂(i+1)
//! position discount.
//!
//! Conventions, chosen once and used everywhere:
//!
//! - AP@k divides by the number of relevant items *within the top k*
//!   (0 when none are relevant), the standard truncated-MAP reading.
//! - precision@k divides by k even when fewer than k results exist; absent
//!   items count as irrelevant.
//! - queries with no relevant item anywhere contribute AP = 0 instead of
//!   being skipped, so reported means are comparable across splits.

use std::path::Path;

use serde::Serialize;

use crate::codec::BinaryCode;
use crate::error::{Error, Result};
use crate::fsio::atomic_write;
use crate::index::HammingIndex;
use crate::loss::LabelVector;

/// Maps (query, database id) pairs to relevance and graded relevance by
/// comparing their labels.
pub struct RelevanceJudge<'a> {
    query_labels: &'a [LabelVector],
    db_labels: &'a [LabelVector],
}

impl<'a> RelevanceJudge<'a> {
    pub fn new(query_labels: &'a [LabelVector], db_labels: &'a [LabelVector]) -> RelevanceJudge<'a> {
        RelevanceJudge {
            query_labels,
            db_labels,
        }
    }

    pub fn query_count(&self) -> usize {
        self.query_labels.len()
    }

    fn db_label(&self, id: u32) -> Result<&LabelVector> {
        self.db_labels.get(id as usize).ok_or_else(|| {
            Error::Data(format!(
                "code id {id} out of range for {} database labels",
                self.db_labels.len()
            ))
        })
    }

    /// True when the query and the database item share at least one label.
    pub fn relevant(&self, query: usize, db_id: u32) -> Result<bool> {
        Ok(self.query_labels[query].shares_label(self.db_label(db_id)?))
    }

    /// Graded relevance: the label intersection size (1/0 for single-label).
    pub fn grade(&self, query: usize, db_id: u32) -> Result<u32> {
        Ok(self.query_labels[query].intersection_size(self.db_label(db_id)?) as u32)
    }

    /// The multiset of attainable grades for a query over the whole
    /// database, sorted descending — the ideal ranking nDCG normalizes by.
    pub fn ideal_grades(&self, query: usize) -> Vec<u32> {
        let q = &self.query_labels[query];
        let mut grades: Vec<u32> = self
            .db_labels
            .iter()
            .map(|l| q.intersection_size(l) as u32)
            .collect();
        grades.sort_unstable_by(|a, b| b.cmp(a));
        grades
    }
}

/// AP@k over a ranked relevance list: the mean of precision@i at each
/// relevant rank i ≤ k, divided by the number of relevant items in the top
/// k; 0 when none are relevant.
pub fn average_precision(ranked_relevance: &[bool], k: usize) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in ranked_relevance.iter().take(k).enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// precision@k: relevant count in the top k divided by k (absent items count
/// as irrelevant).
pub fn precision_at_k(ranked_relevance: &[bool], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked_relevance.iter().take(k).filter(|&&r| r).count();
    hits as f64 / k as f64
}

/// nDCG@k with exponential gain: DCG@k = Σ_{i=1..k} (2^grade − 1)/log₂(i+1),
/// normalized by the DCG of `ideal_grades` (the attainable grades sorted
/// descending). Returns 0 when the ideal DCG is 0.
pub fn ndcg_at_k(ranked_grades: &[u32], ideal_grades: &[u32], k: usize) -> f64 {
    fn dcg(grades: &[u32], k: usize) -> f64 {
        grades
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, &g)| (f64::exp2(g as f64) - 1.0) / ((i + 2) as f64).log2())
            .sum()
    }
    let ideal = dcg(ideal_grades, k);
    if ideal == 0.0 {
        0.0
    } else {
        dcg(ranked_grades, k) / ideal
    }
}

/// Mean AP@k over all queries (unweighted). Errors on an empty query set.
pub fn mean_average_precision(
    index: &HammingIndex,
    query_codes: &[BinaryCode],
    judge: &RelevanceJudge,
    k: usize,
) -> Result<f64> {
    if query_codes.is_empty() {
        return Err(Error::Config("empty query set".into()));
    }
    if query_codes.len() != judge.query_count() {
        return Err(Error::Config(format!(
            "{} query codes but {} query labels",
            query_codes.len(),
            judge.query_count()
        )));
    }
    let mut sum = 0.0;
    for (qi, q) in query_codes.iter().enumerate() {
        let hits = index.query_topk(q, k)?;
        let mut rel = Vec::with_capacity(hits.len());
        for &(id, _) in &hits {
            rel.push(judge.relevant(qi, id)?);
        }
        sum += average_precision(&rel, k);
    }
    Ok(sum / query_codes.len() as f64)
}

/// Retrieval quality figures at a family of cutoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// MAP at `k_eval`.
    pub map: f64,
    /// (k, mean precision@k) pairs, ascending in k.
    pub precision_at: Vec<(usize, f64)>,
    /// (k, mean nDCG@k) pairs, ascending in k.
    pub ndcg_at: Vec<(usize, f64)>,
    pub query_count: usize,
    pub k_eval: usize,
    /// Code length the codes were evaluated at.
    pub bits: usize,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    map: f64,
    precision_at: &'a [(usize, f64)],
    ndcg_at: &'a [(usize, f64)],
    queries: usize,
    bits: usize,
}

impl EvalReport {
    /// The report as a JSON document:
    /// `{"map": f, "precision_at": [[k,p]...], "ndcg_at": [[k,g]...],
    /// "queries": n, "bits": L}`.
    pub fn to_json(&self) -> String {
        let file = ReportFile {
            map: self.map,
            precision_at: &self.precision_at,
            ndcg_at: &self.ndcg_at,
            queries: self.query_count,
            bits: self.bits,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes the JSON report atomically.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_json().as_bytes())
    }
}

/// Cutoffs reported alongside MAP: a standard ladder capped at `k_eval`,
/// with `k_eval` itself always included.
fn report_cutoffs(k_eval: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = [1, 5, 10, 20, 50, 100]
        .into_iter()
        .filter(|&k| k < k_eval)
        .collect();
    ks.push(k_eval);
    ks
}

/// Runs every query, judges the rankings, and assembles an [`EvalReport`]
/// with MAP@`k_eval` plus precision/nDCG at the standard cutoffs.
pub fn evaluate(
    index: &HammingIndex,
    query_codes: &[BinaryCode],
    judge: &RelevanceJudge,
    k_eval: usize,
) -> Result<EvalReport> {
    if k_eval == 0 {
        return Err(Error::Config("evaluation cutoff k must be >= 1".into()));
    }
    if query_codes.is_empty() {
        return Err(Error::Config("empty query set".into()));
    }
    if query_codes.len() != judge.query_count() {
        return Err(Error::Config(format!(
            "{} query codes but {} query labels",
            query_codes.len(),
            judge.query_count()
        )));
    }
    let ks = report_cutoffs(k_eval);
    let mut map_sum = 0.0;
    let mut precision_sums = vec![0.0; ks.len()];
    let mut ndcg_sums = vec![0.0; ks.len()];
    for (qi, q) in query_codes.iter().enumerate() {
        let hits = index.query_topk(q, k_eval)?;
        let mut rel = Vec::with_capacity(hits.len());
        let mut grades = Vec::with_capacity(hits.len());
        for &(id, _) in &hits {
            rel.push(judge.relevant(qi, id)?);
            grades.push(judge.grade(qi, id)?);
        }
        let ideal = judge.ideal_grades(qi);
        map_sum += average_precision(&rel, k_eval);
        for (j, &k) in ks.iter().enumerate() {
            precision_sums[j] += precision_at_k(&rel, k);
            ndcg_sums[j] += ndcg_at_k(&grades, &ideal, k);
        }
    }
    let n = query_codes.len() as f64;
    Ok(EvalReport {
        map: map_sum / n,
        precision_at: ks.iter().zip(&precision_sums).map(|(&k, &s)| (k, s / n)).collect(),
        ndcg_at: ks.iter().zip(&ndcg_sums).map(|(&k, &s)| (k, s / n)).collect(),
        query_count: query_codes.len(),
        k_eval,
        bits: index.bits(),
    })
}

/// Mean precision@k for every k in 1..=k_max — the data behind a
/// precision-curve plot. Written as CSV rows `k,precision`.
pub fn precision_curve(
    index: &HammingIndex,
    query_codes: &[BinaryCode],
    judge: &RelevanceJudge,
    k_max: usize,
) -> Result<Vec<(usize, f64)>> {
    if k_max == 0 {
        return Err(Error::Config("curve cutoff k must be >= 1".into()));
    }
    if query_codes.is_empty() {
        return Err(Error::Config("empty query set".into()));
    }
    if query_codes.len() != judge.query_count() {
        return Err(Error::Config(format!(
            "{} query codes but {} query labels",
            query_codes.len(),
            judge.query_count()
        )));
    }
    let mut sums = vec![0.0; k_max];
    for (qi, q) in query_codes.iter().enumerate() {
        let hits = index.query_topk(q, k_max)?;
        let mut running = 0usize;
        let mut per_rank = vec![0usize; k_max];
        for (i, &(id, _)) in hits.iter().enumerate() {
            if judge.relevant(qi, id)? {
                running += 1;
            }
            per_rank[i] = running;
        }
        // Ranks past the result list keep the final count (absent items are
        // irrelevant).
        for slot in per_rank.iter_mut().skip(hits.len()) {
            *slot = running;
        }
        for (i, &hits_at) in per_rank.iter().enumerate() {
            sums[i] += hits_at as f64 / (i + 1) as f64;
        }
    }
    let n = query_codes.len() as f64;
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(i, s)| (i + 1, s / n))
        .collect())
}

/// Writes `(k, precision)` rows as a CSV file with a header (atomic).
pub fn write_precision_csv(path: &Path, curve: &[(usize, f64)]) -> Result<()> {
    let mut out = String::from("k,precision\n");
    for &(k, p) in curve {
        out.push_str(&format!("{k},{p}\n"));
    }
    atomic_write(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::pack;
    use crate::index::build_index;
    use crate::testutil::assert_close;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const R: bool = true;
    const N: bool = false;

    #[test]
    fn ap_perfect_ranking() {
        assert_eq!(average_precision(&[R, R, R], 3), 1.0);
    }

    #[test]
    fn ap_hand_value() {
        // (1/1 + 2/3) / 2 = 5/6.
        assert_close(average_precision(&[R, N, R], 3), 5.0 / 6.0, 1e-12);
    }

    #[test]
    fn ap_no_relevant_is_zero() {
        assert_eq!(average_precision(&[N, N, N], 3), 0.0);
    }

    #[test]
    fn ap_denominator_counts_only_top_k() {
        // One relevant inside the cutoff, one outside: AP@2 = 1/1 over 1.
        assert_eq!(average_precision(&[R, N, N, R], 2), 1.0);
    }

    #[test]
    fn ap_can_drop_when_a_relevant_item_enters_the_window() {
        // A consequence of the within-top-k denominator: pulling a relevant
        // item across the cutoff adds a below-average precision term.
        assert_eq!(average_precision(&[R, N, N, R], 3), 1.0);
        assert_close(average_precision(&[R, N, R, N], 3), 5.0 / 6.0, 1e-12);
    }

    #[test]
    fn precision_hand_values() {
        assert_eq!(precision_at_k(&[R, R, N, N], 2), 1.0);
        assert_eq!(precision_at_k(&[R, N, R, N], 4), 0.5);
    }

    #[test]
    fn precision_divides_by_k_with_short_lists() {
        assert_eq!(precision_at_k(&[R], 4), 0.25);
    }

    #[test]
    fn ndcg_ideal_ranking_is_one() {
        let grades = [3, 2, 1, 0];
        assert_close(ndcg_at_k(&grades, &grades, 4), 1.0, 1e-15);
    }

    #[test]
    fn ndcg_hand_value() {
        // grades [0,3] vs ideal [3,0] at k=2:
        // DCG = 0 + 7/log₂3, IDCG = 7 → nDCG = 1/log₂3 ≈ 0.6309.
        let ndcg = ndcg_at_k(&[0, 3], &[3, 0], 2);
        assert_close(ndcg, 1.0 / 3.0_f64.log2(), 1e-12);
        assert_close(ndcg, 0.6309, 1e-4);
    }

    #[test]
    fn ndcg_all_zero_grades_is_zero() {
        assert_eq!(ndcg_at_k(&[0, 0], &[0, 0], 2), 0.0);
    }

    fn single(ids: &[usize]) -> Vec<LabelVector> {
        ids.iter().map(|&c| LabelVector::Class(c)).collect()
    }

    /// Distinct 4-bit codes at controlled distances from 0000.
    fn code(bits: &[i8]) -> crate::codec::BinaryCode {
        pack(bits).unwrap()
    }

    #[test]
    fn map_is_mean_of_per_query_ap() {
        let db_codes = vec![
            code(&[-1, -1, -1, -1]), // id 0, class 0
            code(&[1, 1, -1, -1]),   // id 1, class 0
            code(&[1, 1, 1, 1]),     // id 2, class 1
        ];
        let index = build_index(&db_codes, &[0, 1, 2]).unwrap();
        let db_labels = single(&[0, 0, 1]);
        // Query A (class 0) at 0000: distances 0,2,4 → ranking 0,1,2 → [R,R,N] → AP 1.
        // Query B (class 1) at 1000: distances 1,1,3 → ranking 0,1,2 → [N,N,R]
        // → AP = (1/3)/1 = 1/3. Mean = (1 + 1/3)/2 = 2/3.
        let q_codes = vec![code(&[-1, -1, -1, -1]), code(&[1, -1, -1, -1])];
        let q_labels = single(&[0, 1]);
        let judge = RelevanceJudge::new(&q_labels, &db_labels);
        let map = mean_average_precision(&index, &q_codes, &judge, 3).unwrap();
        assert_close(map, (1.0 + 1.0 / 3.0) / 2.0, 1e-12);
    }

    #[test]
    fn map_rejects_empty_query_set() {
        let index = build_index(&[], &[]).unwrap();
        let labels: Vec<LabelVector> = vec![];
        let judge = RelevanceJudge::new(&labels, &labels);
        assert!(matches!(
            mean_average_precision(&index, &[], &judge, 5),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn judge_rejects_out_of_range_id() {
        let q_labels = single(&[0]);
        let db_labels = single(&[0]);
        let judge = RelevanceJudge::new(&q_labels, &db_labels);
        assert!(matches!(judge.relevant(0, 5), Err(Error::Data(_))));
    }

    #[test]
    fn multilabel_grades_are_intersection_sizes() {
        let q = vec![LabelVector::MultiHot(vec![true, true, false])];
        let db = vec![
            LabelVector::MultiHot(vec![true, true, true]),
            LabelVector::MultiHot(vec![false, false, true]),
        ];
        let judge = RelevanceJudge::new(&q, &db);
        assert_eq!(judge.grade(0, 0).unwrap(), 2);
        assert_eq!(judge.grade(0, 1).unwrap(), 0);
        assert!(judge.relevant(0, 0).unwrap());
        assert!(!judge.relevant(0, 1).unwrap());
        assert_eq!(judge.ideal_grades(0), vec![2, 0]);
    }

    #[test]
    fn report_json_shape_is_frozen() {
        let report = EvalReport {
            map: 0.5,
            precision_at: vec![(1, 1.0), (2, 0.5)],
            ndcg_at: vec![(1, 1.0), (2, 0.75)],
            query_count: 4,
            k_eval: 2,
            bits: 16,
        };
        let json = report.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["map"], 0.5);
        assert_eq!(value["precision_at"][1][0], 2);
        assert_eq!(value["precision_at"][1][1], 0.5);
        assert_eq!(value["ndcg_at"][1][1], 0.75);
        assert_eq!(value["queries"], 4);
        assert_eq!(value["bits"], 16);
        // Exactly the five documented keys.
        assert_eq!(value.as_object().unwrap().len(), 5);
    }

    #[test]
    fn report_round_trips_through_file() {
        let report = EvalReport {
            map: 1.0 / 3.0,
            precision_at: vec![(1, 0.25)],
            ndcg_at: vec![(1, 0.125)],
            query_count: 2,
            k_eval: 1,
            bits: 12,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        report.write_json(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, report.to_json());
    }

    /// Independent, definitional recomputation of MAP/precision/nDCG from
    /// raw codes and labels using a full sort (no shared code with the
    /// pipeline beyond the Hamming distance definition).
    fn naive_metrics(
        db_codes: &[crate::codec::BinaryCode],
        db_labels: &[LabelVector],
        q_codes: &[crate::codec::BinaryCode],
        q_labels: &[LabelVector],
        k: usize,
    ) -> (f64, f64, f64) {
        let mut map_sum = 0.0;
        let mut prec_sum = 0.0;
        let mut ndcg_sum = 0.0;
        for (qi, q) in q_codes.iter().enumerate() {
            let qs = crate::codec::unpack(q);
            let mut scored: Vec<(u32, u32)> = db_codes
                .iter()
                .enumerate()
                .map(|(n, c)| {
                    let cs = crate::codec::unpack(c);
                    let d = qs.iter().zip(&cs).filter(|(a, b)| a != b).count() as u32;
                    (d, n as u32)
                })
                .collect();
            scored.sort_unstable();
            let top: Vec<u32> = scored.iter().take(k).map(|&(_, id)| id).collect();
            let rel: Vec<bool> = top
                .iter()
                .map(|&id| q_labels[qi].shares_label(&db_labels[id as usize]))
                .collect();
            let mut hits = 0usize;
            let mut ap = 0.0;
            for (i, &r) in rel.iter().enumerate() {
                if r {
                    hits += 1;
                    ap += hits as f64 / (i + 1) as f64;
                }
            }
            map_sum += if hits == 0 { 0.0 } else { ap / hits as f64 };
            prec_sum += rel.iter().filter(|&&r| r).count() as f64 / k as f64;
            let grades: Vec<u32> = top
                .iter()
                .map(|&id| q_labels[qi].intersection_size(&db_labels[id as usize]) as u32)
                .collect();
            let mut ideal: Vec<u32> = db_labels
                .iter()
                .map(|l| q_labels[qi].intersection_size(l) as u32)
                .collect();
            ideal.sort_unstable_by(|a, b| b.cmp(a));
            let dcg: f64 = grades
                .iter()
                .take(k)
                .enumerate()
                .map(|(i, &g)| (f64::exp2(g as f64) - 1.0) / ((i + 2) as f64).log2())
                .sum();
            let idcg: f64 = ideal
                .iter()
                .take(k)
                .enumerate()
                .map(|(i, &g)| (f64::exp2(g as f64) - 1.0) / ((i + 2) as f64).log2())
                .sum();
            ndcg_sum += if idcg == 0.0 { 0.0 } else { dcg / idcg };
        }
        let n = q_codes.len() as f64;
        (map_sum / n, prec_sum / n, ndcg_sum / n)
    }

    #[test]
    fn pipeline_matches_naive_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let bits = 12;
        let db_codes: Vec<crate::codec::BinaryCode> = (0..80)
            .map(|_| {
                let signs: Vec<i8> = (0..bits)
                    .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                    .collect();
                pack(&signs).unwrap()
            })
            .collect();
        let db_labels = single(
            &(0..80)
                .map(|_| rng.random_range(0..4usize))
                .collect::<Vec<_>>(),
        );
        let q_codes: Vec<crate::codec::BinaryCode> = (0..10)
            .map(|_| {
                let signs: Vec<i8> = (0..bits)
                    .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                    .collect();
                pack(&signs).unwrap()
            })
            .collect();
        let q_labels = single(
            &(0..10)
                .map(|_| rng.random_range(0..4usize))
                .collect::<Vec<_>>(),
        );
        let ids: Vec<u32> = (0..80).collect();
        let index = build_index(&db_codes, &ids).unwrap();
        let judge = RelevanceJudge::new(&q_labels, &db_labels);
        let k = 15;
        let report = evaluate(&index, &q_codes, &judge, k).unwrap();
        let (map, prec, ndcg) = naive_metrics(&db_codes, &db_labels, &q_codes, &q_labels, k);
        assert_close(report.map, map, 1e-12);
        let (_, p) = *report.precision_at.last().unwrap();
        let (_, g) = *report.ndcg_at.last().unwrap();
        assert_close(p, prec, 1e-12);
        assert_close(g, ndcg, 1e-12);
    }

    #[test]
    fn curve_matches_pointwise_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let db_codes: Vec<crate::codec::BinaryCode> = (0..30)
            .map(|_| {
                let signs: Vec<i8> = (0..8)
                    .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                    .collect();
                pack(&signs).unwrap()
            })
            .collect();
        let db_labels = single(
            &(0..30)
                .map(|_| rng.random_range(0..3usize))
                .collect::<Vec<_>>(),
        );
        let q_codes = vec![db_codes[4].clone(), db_codes[9].clone()];
        let q_labels = single(&[1, 2]);
        let ids: Vec<u32> = (0..30).collect();
        let index = build_index(&db_codes, &ids).unwrap();
        let judge = RelevanceJudge::new(&q_labels, &db_labels);
        let curve = precision_curve(&index, &q_codes, &judge, 10).unwrap();
        assert_eq!(curve.len(), 10);
        for &(k, p) in &curve {
            let mut sum = 0.0;
            for (qi, q) in q_codes.iter().enumerate() {
                let hits = index.query_topk(q, 10).unwrap();
                let rel: Vec<bool> = hits
                    .iter()
                    .map(|&(id, _)| judge.relevant(qi, id).unwrap())
                    .collect();
                sum += precision_at_k(&rel, k);
            }
            assert_close(p, sum / 2.0, 1e-12);
        }
    }

    proptest! {
        /// All three metrics stay within [0, 1].
        #[test]
        fn metrics_are_bounded(
            rel in prop::collection::vec(prop::bool::ANY, 1..30),
            k in 1usize..35,
        ) {
            let ap = average_precision(&rel, k);
            let p = precision_at_k(&rel, k);
            prop_assert!((0.0..=1.0).contains(&ap));
            prop_assert!((0.0..=1.0).contains(&p));
            let grades: Vec<u32> = rel.iter().map(|&r| u32::from(r)).collect();
            let mut ideal = grades.clone();
            ideal.sort_unstable_by(|a, b| b.cmp(a));
            let g = ndcg_at_k(&grades, &ideal, k);
            prop_assert!((0.0..=1.0).contains(&g));
        }

        /// Promoting a relevant item one rank earlier never decreases AP, as
        /// long as the swap stays inside the top-k window (crossing the
        /// cutoff can lower it — see
        /// `ap_can_drop_when_a_relevant_item_enters_the_window`).
        #[test]
        fn promoting_relevant_within_window_never_decreases_ap(
            rel in prop::collection::vec(prop::bool::ANY, 2..25),
            k in 1usize..30,
        ) {
            for i in 1..rel.len().min(k) {
                if rel[i] && !rel[i - 1] {
                    let mut promoted = rel.clone();
                    promoted.swap(i - 1, i);
                    let before = average_precision(&rel, k);
                    let after = average_precision(&promoted, k);
                    prop_assert!(after + 1e-12 >= before);
                }
            }
        }

        /// Items beyond the cutoff cannot change AP or precision.
        #[test]
        fn tail_beyond_k_is_ignored(
            rel in prop::collection::vec(prop::bool::ANY, 1..20),
            k in 1usize..10,
            tail in prop::collection::vec(prop::bool::ANY, 0..10),
        ) {
            let k = k.min(rel.len());
            let mut extended = rel.clone();
            extended.truncate(k);
            extended.extend(&tail);
            prop_assert_eq!(average_precision(&rel, k), average_precision(&extended, k));
            prop_assert_eq!(precision_at_k(&rel, k), precision_at_k(&extended, k));
        }
    }
}
