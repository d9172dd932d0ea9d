//! Exhaustive Hamming-distance retrieval over packed binary codes.
//!
//! The index is a flat arena of packed code words plus a parallel id array,
//! immutable after build. Queries do a single word-parallel XOR + popcount
//! pass over the arena, keeping the best k candidates in a bounded max-heap,
//! so a scan is O(N·L/64) time and O(k) extra space.
//!
//! Results are sorted by ascending distance with ties broken by ascending id,
//! which makes rankings — and therefore every evaluation metric downstream —
//! reproducible across implementations and insertion orders.

use std::collections::BinaryHeap;

use crate::codec::BinaryCode;
use crate::error::{Error, Result};

/// Immutable retrieval index over uniform-length packed codes.
#[derive(Debug, Clone)]
pub struct HammingIndex {
    /// Packed code arena, `stride` words per code.
    words: Vec<u64>,
    stride: usize,
    ids: Vec<u32>,
    bits: usize,
}

/// Exact Hamming distance between two codes of equal length.
pub fn hamming(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.bits() != b.bits() {
        return Err(Error::Config(format!(
            "code length mismatch: {} vs {}",
            a.bits(),
            b.bits()
        )));
    }
    Ok(a.words()
        .iter()
        .zip(b.words())
        .map(|(x, y)| (x ^ y).count_ones())
        .sum())
}

/// Builds an index over `codes` with one caller-chosen id per code.
/// Codes must share one length and ids must be unique; an empty input is a
/// valid empty index.
pub fn build_index(codes: &[BinaryCode], ids: &[u32]) -> Result<HammingIndex> {
    if codes.len() != ids.len() {
        return Err(Error::Config(format!(
            "{} codes but {} ids",
            codes.len(),
            ids.len()
        )));
    }
    let bits = codes.first().map_or(0, |c| c.bits());
    let stride = bits.div_ceil(64);
    let mut words = Vec::with_capacity(codes.len() * stride);
    for (n, code) in codes.iter().enumerate() {
        if code.bits() != bits {
            return Err(Error::Data(format!(
                "codes have mixed lengths: code {n} has {} bits, expected {bits}",
                code.bits()
            )));
        }
        words.extend_from_slice(code.words());
    }
    let mut seen = std::collections::HashSet::with_capacity(ids.len());
    for &id in ids {
        if !seen.insert(id) {
            return Err(Error::Data(format!("duplicate id {id}")));
        }
    }
    Ok(HammingIndex {
        words,
        stride,
        ids: ids.to_vec(),
        bits,
    })
}

impl HammingIndex {
    /// Number of indexed codes.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Code length L (0 for an empty index).
    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Stored ids in insertion order.
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Reconstructs the stored codes (round-trip check and CLI dump).
    pub fn codes(&self) -> Vec<BinaryCode> {
        let mut signs = vec![0i8; self.bits];
        (0..self.len())
            .map(|n| {
                let words = &self.words[n * self.stride..(n + 1) * self.stride];
                for (k, s) in signs.iter_mut().enumerate() {
                    *s = if (words[k / 64] >> (k % 64)) & 1 == 1 {
                        1
                    } else {
                        -1
                    };
                }
                crate::codec::pack(&signs).expect("stored codes are valid")
            })
            .collect()
    }

    /// The k nearest codes to `q`: ascending distance, ties by ascending id.
    /// Returns all codes when k ≥ N. A query against an empty index returns
    /// an empty ranking.
    pub fn query_topk(&self, q: &BinaryCode, k: usize) -> Result<Vec<(u32, u32)>> {
        if k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.is_empty() {
            return Ok(Vec::new());
        }
        if q.bits() != self.bits {
            return Err(Error::Config(format!(
                "query has {} bits, index has {}",
                q.bits(),
                self.bits
            )));
        }
        // Bounded max-heap of (distance, id): the root is the current worst
        // kept candidate, so each arena entry costs at most one push/pop.
        let mut heap: BinaryHeap<(u32, u32)> = BinaryHeap::with_capacity(k + 1);
        let qwords = q.words();
        for (n, &id) in self.ids.iter().enumerate() {
            let words = &self.words[n * self.stride..(n + 1) * self.stride];
            let dist: u32 = words
                .iter()
                .zip(qwords)
                .map(|(x, y)| (x ^ y).count_ones())
                .sum();
            if heap.len() < k {
                heap.push((dist, id));
            } else if let Some(&worst) = heap.peek() {
                if (dist, id) < worst {
                    heap.pop();
                    heap.push((dist, id));
                }
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|(dist, id)| (id, dist))
            .collect())
    }
}
