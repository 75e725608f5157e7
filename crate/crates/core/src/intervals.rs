//! Deterministic seeded intervals.
//!
//! For each length `2l` on the ladder `l_1 = 1`, `l_{j+1} = max(l_j + 1,
//! floor(alpha * l_j))`, `2l <= n`, intervals `(i*s, i*s + 2l]` are laid down
//! with shift `s = max(1, floor(l / K))`, plus one interval anchored at the
//! right end `(n - 2l, n]`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open integer interval `(s, e]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeededInterval {
    pub s: usize,
    pub e: usize,
}

impl SeededInterval {
    pub fn len(&self) -> usize {
        self.e - self.s
    }

    pub fn is_empty(&self) -> bool {
        self.e <= self.s
    }

    /// Midpoint `floor((s + e) / 2)`.
    pub fn midpoint(&self) -> usize {
        (self.s + self.e) / 2
    }

    pub fn contains_interval(&self, other: &SeededInterval) -> bool {
        self.s <= other.s && other.e <= self.e
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LengthGroup {
    len: usize,
    range: Range<usize>,
}

/// Seeded intervals sorted by length, then start, without duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededIntervalSet {
    n: usize,
    alpha: f64,
    k: usize,
    ladder: Vec<usize>,
    intervals: Vec<SeededInterval>,
    groups: Vec<LengthGroup>,
}

/// Half-lengths `l` generated for sample size `n`.
pub fn length_ladder(n: usize, alpha: f64) -> Vec<usize> {
    let mut ladder = Vec::new();
    let mut l = 1usize;
    while 2 * l <= n {
        ladder.push(l);
        let grown = (alpha * l as f64).floor() as usize;
        l = (l + 1).max(grown);
    }
    ladder
}

/// Generates the seeded interval set for `n` time points.
pub fn generate(n: usize, alpha: f64, k: usize) -> Result<SeededIntervalSet> {
    if n < 2 {
        return Err(Error::BadParams(format!("n must be at least 2, got {n}")));
    }
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::BadParams(format!("alpha must exceed 1, got {alpha}")));
    }
    if k == 0 {
        return Err(Error::BadParams("K must be at least 1".into()));
    }
    let ladder = length_ladder(n, alpha);
    let mut intervals = Vec::new();
    for &l in &ladder {
        let len = 2 * l;
        let shift = (l / k).max(1);
        for i in 0..=(n - len) / shift {
            intervals.push(SeededInterval {
                s: i * shift,
                e: i * shift + len,
            });
        }
        intervals.push(SeededInterval { s: n - len, e: n });
    }
    intervals.sort_unstable_by_key(|iv| (iv.len(), iv.s));
    intervals.dedup();

    let mut groups: Vec<LengthGroup> = Vec::new();
    for (idx, iv) in intervals.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if g.len == iv.len() => g.range.end = idx + 1,
            _ => groups.push(LengthGroup {
                len: iv.len(),
                range: idx..idx + 1,
            }),
        }
    }
    Ok(SeededIntervalSet {
        n,
        alpha,
        k,
        ladder,
        intervals,
        groups,
    })
}

impl SeededIntervalSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Half-lengths on the ladder.
    pub fn ladder(&self) -> &[usize] {
        &self.ladder
    }

    /// All intervals in canonical (length, start) order.
    pub fn intervals(&self) -> &[SeededInterval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Distinct interval lengths, ascending.
    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().map(|g| g.len)
    }

    /// Intervals of exactly `len`, sorted by start.
    pub fn of_length(&self, len: usize) -> &[SeededInterval] {
        match self.groups.binary_search_by_key(&len, |g| g.len) {
            Ok(idx) => &self.intervals[self.groups[idx].range.clone()],
            Err(_) => &[],
        }
    }

    /// Intervals of length `len` lying inside `(s, e]`, sorted by start.
    pub fn of_length_within(&self, len: usize, s: usize, e: usize) -> &[SeededInterval] {
        &self.intervals[self.range_within(len, s, e)]
    }

    /// Positions in [`Self::intervals`] of the intervals of length `len`
    /// inside `(s, e]`.
    pub fn range_within(&self, len: usize, s: usize, e: usize) -> Range<usize> {
        let Ok(idx) = self.groups.binary_search_by_key(&len, |g| g.len) else {
            return 0..0;
        };
        if e < s + len {
            return 0..0;
        }
        let range = self.groups[idx].range.clone();
        let group = &self.intervals[range.clone()];
        let lo = group.partition_point(|iv| iv.s < s);
        let hi = group.partition_point(|iv| iv.s <= e - len);
        if lo >= hi {
            return 0..0;
        }
        range.start + lo..range.start + hi
    }

    pub fn contains(&self, iv: &SeededInterval) -> bool {
        self.of_length(iv.len())
            .binary_search_by_key(&iv.s, |x| x.s)
            .is_ok()
    }

    /// Number of `(s, v, e)` scan triples, `sum(e - s - 1)`.
    pub fn triple_count(&self) -> u64 {
        self.intervals.iter().map(|iv| (iv.len() - 1) as u64).sum()
    }

    /// Finds an interval `(v - l, v + l]` in the set with
    /// `h/2 <= l <= max(h, 1)` and `|v - eta| <= l/K`, preferring the longest
    /// such half-length. Returns `None` when no interval qualifies.
    pub fn coverage_witness(&self, h: f64, eta: usize) -> Option<SeededInterval> {
        let upper = h.max(1.0);
        let k = self.k as f64;
        for &l in self.ladder.iter().rev() {
            let lf = l as f64;
            if lf > upper || lf < h / 2.0 {
                continue;
            }
            let reach = (lf / k).min(lf / 2.0).floor() as usize;
            let lo = eta.saturating_sub(reach).max(l);
            let hi = (eta + reach).min(self.n.saturating_sub(l));
            for v in lo..=hi {
                let iv = SeededInterval { s: v - l, e: v + l };
                if self.contains(&iv) {
                    return Some(iv);
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(s: usize, e: usize) -> SeededInterval {
        SeededInterval { s, e }
    }

    #[test]
    fn four_point_set() {
        let set = generate(4, 2.0, 2).unwrap();
        assert_eq!(set.intervals(), &[iv(0, 2), iv(1, 3), iv(2, 4), iv(0, 4)]);
        assert_eq!(set.triple_count(), 6);
    }

    #[test]
    fn two_point_set() {
        for (alpha, k) in [(1.5, 1), (2.0, 4), (3.0, 10)] {
            let set = generate(2, alpha, k).unwrap();
            assert_eq!(set.intervals(), &[iv(0, 2)]);
            assert_eq!(set.triple_count(), 1);
        }
    }

    #[test]
    fn twenty_point_bounds() {
        let set = generate(20, 1.5, 4).unwrap();
        for x in set.intervals() {
            assert!(x.len() >= 2 && x.len() <= 20 && x.len() % 2 == 0);
            assert!(x.e <= 20);
        }
        let lens: Vec<usize> = set.lengths().collect();
        let want: Vec<usize> = set.ladder().iter().map(|l| 2 * l).collect();
        assert_eq!(lens, want);
        assert_eq!(set.ladder(), &[1, 2, 3, 4, 6, 9]);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(generate(1, 1.5, 4).is_err());
        assert!(generate(10, 1.0, 4).is_err());
        assert!(generate(10, f64::NAN, 4).is_err());
        assert!(generate(10, 1.5, 0).is_err());
    }

    #[test]
    fn witness_examples() {
        let set = generate(100, 2.0, 2).unwrap();
        assert_eq!(set.coverage_witness(1.0, 50), Some(iv(49, 51)));
        let small = generate(4, 2.0, 2).unwrap();
        assert_eq!(small.coverage_witness(2.0, 2), Some(iv(0, 4)));
    }

    #[test]
    fn within_filter() {
        let set = generate(64, 1.5, 4).unwrap();
        for len in set.lengths().collect::<Vec<_>>() {
            let inside = set.of_length_within(len, 10, 40);
            let brute: Vec<_> = set
                .of_length(len)
                .iter()
                .copied()
                .filter(|x| x.s >= 10 && x.e <= 40)
                .collect();
            assert_eq!(inside, brute.as_slice());
        }
    }

    #[test]
    fn ladder_ratio_bounded() {
        for alpha in [1.1, 1.5, 2.0, 3.0] {
            let ladder = length_ladder(10_000, alpha);
            for w in ladder.windows(2) {
                assert!(w[1] as f64 / w[0] as f64 <= alpha.max(2.0));
            }
        }
    }
}
