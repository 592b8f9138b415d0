//! Suffix quality measures.
//!
//! - [`sdl`]: one minus the optimal-string-alignment Damerau-Levenshtein
//!   distance normalized by the longer sequence.
//! - [`ras`]: one minus the normalized absolute difference of per-activity
//!   counts; insensitive to order, sensitive to how often each activity repeats.
//! - [`mae`]: mean absolute error of remaining-time predictions.
//!
//! Two empty sequences score 1 under both similarity measures.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Run length mapped to the number of maximal runs of that length.
pub type RepetitionProfile = BTreeMap<usize, usize>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean_sdl: f64,
    pub mean_ras: f64,
    pub mae_hours: f64,
    pub n_pairs: usize,
}

/// Optimal string alignment distance: unit-cost insertion, deletion,
/// substitution and adjacent transposition, no substring edited twice.
pub fn dl_distance<T: PartialEq>(s1: &[T], s2: &[T]) -> usize {
    let (n, m) = (s1.len(), s2.len());
    if n == 0 {
        return m;
    }
    if m == 0 {
        return n;
    }
    // three rolling rows: i-2, i-1, i
    let mut before: Vec<usize> = vec![0; m + 1];
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur: Vec<usize> = vec![0; m + 1];
    for i in 1..=n {
        cur[0] = i;
        for j in 1..=m {
            let cost = usize::from(s1[i - 1] != s2[j - 1]);
            let mut best = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
            if i > 1 && j > 1 && s1[i - 1] == s2[j - 2] && s1[i - 2] == s2[j - 1] {
                best = best.min(before[j - 2] + 1);
            }
            cur[j] = best;
        }
        std::mem::swap(&mut before, &mut prev);
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

pub fn sdl<T: PartialEq>(s1: &[T], s2: &[T]) -> f64 {
    let longest = s1.len().max(s2.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - dl_distance(s1, s2) as f64 / longest as f64
}

pub fn ras<T: Eq + Hash>(ground: &[T], predicted: &[T]) -> f64 {
    let total = ground.len() + predicted.len();
    if total == 0 {
        return 1.0;
    }
    let mut diff: HashMap<&T, i64> = HashMap::new();
    for a in ground {
        *diff.entry(a).or_insert(0) += 1;
    }
    for a in predicted {
        *diff.entry(a).or_insert(0) -= 1;
    }
    let penalty: u64 = diff.values().map(|d| d.unsigned_abs()).sum();
    1.0 - penalty as f64 / total as f64
}

/// Mean of `|actual - predicted|` over `(actual, predicted)` pairs.
pub fn mae(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyErrors);
    }
    let sum: f64 = pairs.iter().map(|(a, p)| (a - p).abs()).sum();
    Ok(sum / pairs.len() as f64)
}

pub fn repetition_profile<T: PartialEq>(s: &[T]) -> RepetitionProfile {
    let mut profile = RepetitionProfile::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i + 1;
        while j < s.len() && s[j] == s[i] {
            j += 1;
        }
        *profile.entry(j - i).or_insert(0) += 1;
        i = j;
    }
    profile
}

pub fn merge_profile(into: &mut RepetitionProfile, other: &RepetitionProfile) {
    for (&len, &count) in other {
        *into.entry(len).or_insert(0) += count;
    }
}

/// L1 distance between two profiles after normalizing each to relative run frequencies.
pub fn profile_l1(a: &RepetitionProfile, b: &RepetitionProfile) -> f64 {
    let total = |p: &RepetitionProfile| p.values().sum::<usize>().max(1) as f64;
    let (ta, tb) = (total(a), total(b));
    let keys: std::collections::BTreeSet<usize> = a.keys().chain(b.keys()).copied().collect();
    keys.into_iter()
        .map(|k| {
            let fa = a.get(&k).copied().unwrap_or(0) as f64 / ta;
            let fb = b.get(&k).copied().unwrap_or(0) as f64 / tb;
            (fa - fb).abs()
        })
        .sum()
}
