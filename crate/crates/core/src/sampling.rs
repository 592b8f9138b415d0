//! Next-activity selection policies.
//!
//! Every stochastic policy reduces to a categorical draw over a
//! non-negative weight vector kept in vocabulary order, so truncated or
//! reweighted variants that happen to keep the full weight vector reproduce
//! [`sample_categorical`] draw for draw.
//!
//! The daemon policy weights each candidate by its model probability divided
//! by `count(a) + 1`, where `count(a)` is how often `a` already occurred in the
//! case being generated. The weights are renormalized exactly; any constant
//! denominator leaves both the ranking and the sampling law unchanged.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::predictor::NextStepDistribution;

/// Seeded deterministic pseudo-random stream.
#[derive(Clone, Debug)]
pub struct RandomStream(ChaCha8Rng);

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform in `0..n`.
    pub fn next_index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }
}

/// Per-generation occurrence counts indexed by vocabulary index (EOC included).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DaemonCounts(Vec<u64>);

impl DaemonCounts {
    pub fn zeros(vocab_size: usize) -> Self {
        DaemonCounts(vec![0; vocab_size])
    }

    /// Occurrences of each activity in `prefix`.
    pub fn from_prefix(vocab_size: usize, prefix: &[usize]) -> Self {
        let mut counts = Self::zeros(vocab_size);
        for &a in prefix {
            counts.increment(a);
        }
        counts
    }

    pub fn from_vec(counts: Vec<u64>) -> Self {
        DaemonCounts(counts)
    }

    pub fn increment(&mut self, index: usize) {
        self.0[index] += 1;
    }

    pub fn get(&self, index: usize) -> u64 {
        self.0[index]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DaemonMode {
    Sample,
    Argmax,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplerPolicy {
    Argmax,
    Random,
    TopK(usize),
    Nucleus(f64),
    Daemon(DaemonMode),
}

impl SamplerPolicy {
    /// The five policies compared by default.
    pub fn defaults() -> Vec<SamplerPolicy> {
        vec![
            SamplerPolicy::Argmax,
            SamplerPolicy::Random,
            SamplerPolicy::TopK(2),
            SamplerPolicy::Nucleus(0.7),
            SamplerPolicy::Daemon(DaemonMode::Sample),
        ]
    }

    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            SamplerPolicy::TopK(k) if k < 1 => Err(Error::InvalidPolicy(self.to_string())),
            SamplerPolicy::Nucleus(p) if !(p > 0.0 && p <= 1.0) => {
                Err(Error::InvalidPolicy(self.to_string()))
            }
            _ => Ok(()),
        }
    }

    /// Selects the next index. `counts` is only read by the daemon policy.
    pub fn select(&self, dist: &NextStepDistribution, counts: &DaemonCounts, rng: &mut RandomStream) -> usize {
        match *self {
            SamplerPolicy::Argmax => sample_argmax(dist),
            SamplerPolicy::Random => sample_categorical(dist, rng),
            SamplerPolicy::TopK(k) => sample_top_k(dist, k, rng),
            SamplerPolicy::Nucleus(p) => sample_nucleus(dist, p, rng),
            SamplerPolicy::Daemon(mode) => sample_daemon(dist, counts, mode, rng),
        }
    }

    /// Renormalized law the policy draws from (one-hot for deterministic policies).
    pub fn target_distribution(&self, dist: &NextStepDistribution, counts: &DaemonCounts) -> Vec<f64> {
        let weights = match *self {
            SamplerPolicy::Argmax => one_hot(dist.len(), sample_argmax(dist)),
            SamplerPolicy::Random => dist.probs().to_vec(),
            SamplerPolicy::TopK(k) => top_k_weights(dist, k),
            SamplerPolicy::Nucleus(p) => nucleus_weights(dist, p),
            SamplerPolicy::Daemon(DaemonMode::Sample) => return daemon_weights(dist, counts),
            SamplerPolicy::Daemon(DaemonMode::Argmax) => {
                one_hot(dist.len(), argmax(&daemon_raw_weights(dist, counts)))
            }
        };
        normalize(weights)
    }
}

impl fmt::Display for SamplerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerPolicy::Argmax => f.write_str("argmax"),
            SamplerPolicy::Random => f.write_str("random"),
            SamplerPolicy::TopK(k) => write!(f, "topk:{k}"),
            SamplerPolicy::Nucleus(p) => write!(f, "nucleus:{p}"),
            SamplerPolicy::Daemon(DaemonMode::Sample) => f.write_str("daemon"),
            SamplerPolicy::Daemon(DaemonMode::Argmax) => f.write_str("daemon-argmax"),
        }
    }
}

impl FromStr for SamplerPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || Error::InvalidPolicy(s.to_string());
        let policy = match s.split_once(':') {
            None => match s {
                "argmax" => SamplerPolicy::Argmax,
                "random" => SamplerPolicy::Random,
                "daemon" => SamplerPolicy::Daemon(DaemonMode::Sample),
                "daemon-argmax" => SamplerPolicy::Daemon(DaemonMode::Argmax),
                _ => return Err(bad()),
            },
            Some(("topk", k)) => SamplerPolicy::TopK(k.trim().parse().map_err(|_| bad())?),
            Some(("nucleus", p)) => SamplerPolicy::Nucleus(p.trim().parse().map_err(|_| bad())?),
            Some(_) => return Err(bad()),
        };
        policy.validate().map_err(|_| bad())?;
        Ok(policy)
    }
}

/// Parses a comma-separated policy list.
pub fn parse_policies(list: &str) -> Result<Vec<SamplerPolicy>, Error> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

fn one_hot(len: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

fn normalize(mut weights: Vec<f64>) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// Highest weight, lowest index on ties.
fn argmax(weights: &[f64]) -> usize {
    let mut best = 0;
    for (i, &w) in weights.iter().enumerate().skip(1) {
        if w > weights[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw over unnormalized weights. Only positive-weight indices
/// can be returned.
fn draw_weighted(weights: &[f64], rng: &mut RandomStream) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.next_unit() * total;
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        cumulative += w;
        last_positive = i;
        if target < cumulative {
            return i;
        }
    }
    last_positive
}

/// Indices by descending probability, lower index first on ties.
fn ranked_indices(dist: &NextStepDistribution) -> Vec<usize> {
    let probs = dist.probs();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
}

fn masked(dist: &NextStepDistribution, keep: &[usize]) -> Vec<f64> {
    let mut weights = vec![0.0; dist.len()];
    for &i in keep {
        weights[i] = dist.prob(i);
    }
    weights
}

fn top_k_weights(dist: &NextStepDistribution, k: usize) -> Vec<f64> {
    let k = k.clamp(1, dist.len());
    if k == dist.len() {
        return dist.probs().to_vec();
    }
    masked(dist, &ranked_indices(dist)[..k])
}

fn nucleus_weights(dist: &NextStepDistribution, p: f64) -> Vec<f64> {
    if p >= 1.0 {
        return dist.probs().to_vec();
    }
    let order = ranked_indices(dist);
    let mut cumulative = 0.0;
    let mut size = order.len();
    for (n, &i) in order.iter().enumerate() {
        cumulative += dist.prob(i);
        if cumulative >= p {
            size = n + 1;
            break;
        }
    }
    masked(dist, &order[..size])
}

pub fn sample_argmax(dist: &NextStepDistribution) -> usize {
    argmax(dist.probs())
}

pub fn sample_categorical(dist: &NextStepDistribution, rng: &mut RandomStream) -> usize {
    draw_weighted(dist.probs(), rng)
}

/// Draws among the `k` most probable indices; `k` is clamped to the vocabulary size.
pub fn sample_top_k(dist: &NextStepDistribution, k: usize, rng: &mut RandomStream) -> usize {
    draw_weighted(&top_k_weights(dist, k), rng)
}

/// Draws from the shortest probability-ranked prefix whose mass reaches `p`.
pub fn sample_nucleus(dist: &NextStepDistribution, p: f64, rng: &mut RandomStream) -> usize {
    draw_weighted(&nucleus_weights(dist, p), rng)
}

fn daemon_raw_weights(dist: &NextStepDistribution, counts: &DaemonCounts) -> Vec<f64> {
    dist.probs()
        .iter()
        .zip(counts.as_slice())
        .map(|(&p, &c)| p / (c as f64 + 1.0))
        .collect()
}

/// `P(a) / (count(a) + 1)`, renormalized to sum to one.
pub fn daemon_weights(dist: &NextStepDistribution, counts: &DaemonCounts) -> Vec<f64> {
    normalize(daemon_raw_weights(dist, counts))
}

pub fn sample_daemon(
    dist: &NextStepDistribution,
    counts: &DaemonCounts,
    mode: DaemonMode,
    rng: &mut RandomStream,
) -> usize {
    let raw = daemon_raw_weights(dist, counts);
    match mode {
        DaemonMode::Sample => draw_weighted(&raw, rng),
        DaemonMode::Argmax => argmax(&raw),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> NextStepDistribution {
        NextStepDistribution::new(p.to_vec()).unwrap()
    }

    fn frequencies(n: usize, draws: usize, mut f: impl FnMut() -> usize) -> Vec<f64> {
        let mut hist = vec![0usize; n];
        for _ in 0..draws {
            hist[f()] += 1;
        }
        hist.into_iter().map(|h| h as f64 / draws as f64).collect()
    }

    #[test]
    fn argmax_cases() {
        assert_eq!(sample_argmax(&dist(&[0.7, 0.3])), 0);
        assert_eq!(sample_argmax(&dist(&[0.3, 0.7])), 1);
        assert_eq!(sample_argmax(&dist(&[0.5, 0.5])), 0);
        assert_eq!(sample_argmax(&NextStepDistribution::one_hot(4, 3)), 3);
    }

    #[test]
    fn categorical_one_hot_and_determinism() {
        let d = NextStepDistribution::one_hot(3, 1);
        let mut rng = RandomStream::new(1);
        assert!((0..1000).all(|_| sample_categorical(&d, &mut rng) == 1));

        let d = dist(&[0.2, 0.3, 0.5]);
        let mut a = RandomStream::new(9);
        let mut b = RandomStream::new(9);
        let xs: Vec<_> = (0..200).map(|_| sample_categorical(&d, &mut a)).collect();
        let ys: Vec<_> = (0..200).map(|_| sample_categorical(&d, &mut b)).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn categorical_fair_coin() {
        let d = dist(&[0.5, 0.5]);
        let mut rng = RandomStream::new(7);
        let freq = frequencies(2, 100_000, || sample_categorical(&d, &mut rng));
        assert!((freq[0] - 0.5).abs() < 0.01);
    }

    #[test]
    fn top_k_reductions() {
        let d = dist(&[0.1, 0.4, 0.2, 0.3]);
        let mut rng = RandomStream::new(3);
        assert!((0..500).all(|_| sample_top_k(&d, 1, &mut rng) == 1));
        let mut a = RandomStream::new(11);
        let mut b = RandomStream::new(11);
        for _ in 0..500 {
            assert_eq!(sample_top_k(&d, 4, &mut a), sample_categorical(&d, &mut b));
        }
        // clamp instead of error
        let mut a = RandomStream::new(12);
        let mut b = RandomStream::new(12);
        for _ in 0..100 {
            assert_eq!(sample_top_k(&d, 99, &mut a), sample_categorical(&d, &mut b));
        }
    }

    #[test]
    fn top_k_two_of_three() {
        let d = dist(&[0.6, 0.3, 0.1]);
        let mut rng = RandomStream::new(5);
        let freq = frequencies(3, 100_000, || sample_top_k(&d, 2, &mut rng));
        assert_eq!(freq[2], 0.0);
        assert!((freq[0] - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn top_k_boundary_tie_prefers_lower_index() {
        let d = dist(&[0.2, 0.4, 0.2, 0.2]);
        assert_eq!(top_k_weights(&d, 2), vec![0.2, 0.4, 0.0, 0.0]);
    }

    #[test]
    fn nucleus_sets() {
        let d = dist(&[0.6, 0.3, 0.1]);
        let mut rng = RandomStream::new(5);
        assert!((0..1000).all(|_| sample_nucleus(&d, 0.6, &mut rng) == 0));
        assert!((0..5000).all(|_| sample_nucleus(&d, 0.7, &mut rng) != 2));
        assert_eq!(nucleus_weights(&d, 0.7), vec![0.6, 0.3, 0.0]);
        let mut a = RandomStream::new(8);
        let mut b = RandomStream::new(8);
        for _ in 0..500 {
            assert_eq!(sample_nucleus(&d, 1.0, &mut a), sample_categorical(&d, &mut b));
        }
    }

    #[test]
    fn daemon_weight_example() {
        let d = dist(&[0.8, 0.2]);
        let counts = DaemonCounts::from_vec(vec![3, 0]);
        let w = daemon_weights(&d, &counts);
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!((w[1] - 0.5).abs() < 1e-12);
        let mut rng = RandomStream::new(0);
        assert_eq!(sample_daemon(&d, &counts, DaemonMode::Argmax, &mut rng), 0);
    }

    #[test]
    fn daemon_equal_counts_reduce_to_base() {
        let d = dist(&[0.1, 0.6, 0.3]);
        let w = daemon_weights(&d, &DaemonCounts::from_vec(vec![2, 2, 2]));
        for (a, b) in w.iter().zip(d.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn daemon_zero_counts_match_base_samplers() {
        let d = dist(&[0.1, 0.6, 0.3]);
        let zero = DaemonCounts::zeros(3);
        let mut a = RandomStream::new(21);
        let mut b = RandomStream::new(21);
        for _ in 0..1000 {
            assert_eq!(
                sample_daemon(&d, &zero, DaemonMode::Sample, &mut a),
                sample_categorical(&d, &mut b)
            );
        }
        assert_eq!(sample_daemon(&d, &zero, DaemonMode::Argmax, &mut a), sample_argmax(&d));
    }

    #[test]
    fn daemon_weight_drops_after_selection() {
        let d = dist(&[0.5, 0.3, 0.2]);
        let mut counts = DaemonCounts::zeros(3);
        let mut previous = daemon_weights(&d, &counts)[0];
        for _ in 0..10 {
            counts.increment(0);
            let now = daemon_weights(&d, &counts)[0];
            assert!(now < previous);
            previous = now;
        }
    }

    #[test]
    fn policy_strings() {
        for s in ["argmax", "random", "topk:3", "nucleus:0.9", "daemon", "daemon-argmax"] {
            let p: SamplerPolicy = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        for s in ["topk", "topk:0", "topk:x", "nucleus:0", "nucleus:1.5", "beam", "daemon:sample"] {
            assert!(s.parse::<SamplerPolicy>().is_err(), "{s}");
        }
        assert_eq!(parse_policies("argmax, daemon").unwrap().len(), 2);
    }
}
