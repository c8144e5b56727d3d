//! Exact self-join of strings under a normalized Levenshtein threshold:
//! all pairs with `lev(a, b) / max(|a|, |b|) <= limit`.
//!
//! Candidates come from a partition filter. The longer string `b` of a pair
//! is cut into `d + 1` segments, where `d = floor(limit * |b|)`; at most `d`
//! edits leave one segment intact, and it occurs in `a` shifted by at most
//! `d` positions. Candidates are confirmed with a bounded edit distance.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

/// Edits allowed between a string of length `m` and any shorter partner.
fn max_edits(m: usize, limit: f64) -> usize {
    (limit * m as f64 + 1e-9).floor() as usize
}

/// Start and length of each of the `d + 1` segments of a length-`m` string.
fn segments(m: usize, d: usize) -> Vec<(usize, usize)> {
    let parts = d + 1;
    let (base, extra) = (m / parts, m % parts);
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        // later segments take the remainder
        let len = base + usize::from(k >= parts - extra);
        out.push((start, len));
        start += len;
    }
    out
}

fn segment_hash(chars: &[char]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    chars.hash(&mut h);
    h.finish()
}

/// Levenshtein distance if it is at most `max`.
pub(crate) fn bounded_levenshtein(a: &[char], b: &[char], max: usize, row: &mut Vec<usize>) -> Option<usize> {
    if a.len().abs_diff(b.len()) > max {
        return None;
    }
    row.clear();
    row.extend(0..=b.len());
    for (i, ca) in a.iter().enumerate() {
        let mut prev = row[0];
        row[0] = i + 1;
        let mut best = row[0];
        for (j, cb) in b.iter().enumerate() {
            let cur = row[j + 1];
            row[j + 1] = if ca == cb { prev } else { 1 + prev.min(cur).min(row[j]) };
            prev = cur;
            best = best.min(row[j + 1]);
        }
        if best > max {
            return None;
        }
    }
    let d = row[b.len()];
    (d <= max).then_some(d)
}

/// Index over `strings` answering the join.
pub(crate) struct SimilarityJoin {
    chars: Vec<Vec<char>>,
    limit: f64,
    /// (length, segment slot, segment hash) -> string ids
    index: HashMap<(usize, usize, u64), Vec<u32>>,
}

impl SimilarityJoin {
    pub(crate) fn new(strings: &[&str], limit: f64) -> Self {
        let chars: Vec<Vec<char>> = strings.iter().map(|s| s.chars().collect()).collect();
        let mut index: HashMap<(usize, usize, u64), Vec<u32>> = HashMap::new();
        for (id, c) in chars.iter().enumerate() {
            let m = c.len();
            if m == 0 {
                continue;
            }
            for (k, (start, len)) in segments(m, max_edits(m, limit)).into_iter().enumerate() {
                index.entry((m, k, segment_hash(&c[start..start + len]))).or_default().push(id as u32);
            }
        }
        SimilarityJoin { chars, limit, index }
    }

    /// Partners of string `i` that are at least as long as it, with the
    /// edit distance. `seen` must hold one slot per string.
    fn longer_partners(&self, i: usize, seen: &mut [u32], row: &mut Vec<usize>, out: &mut Vec<(u32, u32)>) {
        let a = &self.chars[i];
        let len = a.len();
        let stamp = i as u32 + 1;
        let mut m = len.max(1);
        loop {
            let d = max_edits(m, self.limit);
            if m - len > d {
                // m - len grows by 1 per step while d grows by at most 1
                break;
            }
            for (k, (start, seg_len)) in segments(m, d).into_iter().enumerate() {
                if seg_len > len {
                    continue;
                }
                let lo = start.saturating_sub(d);
                let hi = (start + d).min(len - seg_len);
                for pos in lo..=hi.max(lo) {
                    if pos + seg_len > len {
                        break;
                    }
                    let Some(ids) = self.index.get(&(m, k, segment_hash(&a[pos..pos + seg_len]))) else {
                        continue;
                    };
                    for &j in ids {
                        if j as usize == i || seen[j as usize] == stamp {
                            continue;
                        }
                        seen[j as usize] = stamp;
                        if let Some(dist) = bounded_levenshtein(a, &self.chars[j as usize], d, row) {
                            out.push((j, dist as u32));
                        }
                    }
                }
            }
            m += 1;
        }
    }

    /// Every unordered pair `(i, j)`, `i < j`, within the threshold.
    pub(crate) fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.chars.len();
        let mut pairs: Vec<(usize, usize)> = (0..n)
            .into_par_iter()
            .map_init(
                || (vec![0u32; n], Vec::new(), Vec::new()),
                |(seen, row, out), i| {
                    out.clear();
                    self.longer_partners(i, seen, row, out);
                    out.iter().map(|&(j, _)| (i.min(j as usize), i.max(j as usize))).collect::<Vec<_>>()
                },
            )
            .flatten()
            .collect();
        pairs.par_sort_unstable();
        pairs.dedup();
        pairs
    }
}

/// Adjacency lists of [`SimilarityJoin::pairs`], each including the node itself.
pub(crate) fn similar_lists(strings: &[&str], limit: f64) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = (0..strings.len()).map(|i| vec![i]).collect();
    for (i, j) in SimilarityJoin::new(strings, limit).pairs() {
        adj[i].push(j);
        adj[j].push(i);
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    adj
}
