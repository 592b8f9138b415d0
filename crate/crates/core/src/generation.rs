//! Autoregressive suffix generation.

use crate::eventlog::Timestamp;
use crate::predictor::{NextStepDistribution, Predictor};
use crate::sampling::{DaemonCounts, RandomStream, SamplerPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenerationLimits {
    max_steps: usize,
}

impl GenerationLimits {
    pub fn new(max_steps: usize) -> Option<Self> {
        (max_steps >= 1).then_some(GenerationLimits { max_steps })
    }

    /// `factor` times the longest training trace, at least one step.
    pub fn from_training(max_trace_len: usize, factor: usize) -> Self {
        GenerationLimits {
            max_steps: (max_trace_len * factor).max(1),
        }
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }
}

/// Predicted continuation of a case. End times are seconds since the Unix epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedSuffix {
    pub activities: Vec<usize>,
    pub end_times: Vec<f64>,
    pub terminated_by_eoc: bool,
    /// Number of selections made, including a terminating EOC.
    pub steps_taken: usize,
}

impl GeneratedSuffix {
    /// Last predicted completion minus the prefix's last completion; 0 for an empty suffix.
    pub fn remaining_secs(&self, prefix_end_time: Timestamp) -> f64 {
        remaining_time(self, prefix_end_time)
    }
}

pub fn remaining_time(generated: &GeneratedSuffix, prefix_end_time: Timestamp) -> f64 {
    match generated.end_times.last() {
        Some(&last) => (last - prefix_end_time.as_secs_f64()).max(0.0),
        None => 0.0,
    }
}

/// One sampler decision, recorded by [`generate_suffix_traced`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub distribution: NextStepDistribution,
    pub counts: DaemonCounts,
    pub selected: usize,
    pub delta_secs: Option<f64>,
}

/// Extends `prefix` until the policy selects EOC or `limits.max_steps()`
/// activities have been appended.
pub fn generate_suffix<P: Predictor + ?Sized>(
    model: &P,
    policy: &SamplerPolicy,
    prefix: &[usize],
    prefix_end_time: Timestamp,
    limits: GenerationLimits,
    rng: &mut RandomStream,
) -> GeneratedSuffix {
    run(model, policy, prefix, prefix_end_time, limits, rng, None)
}

/// Like [`generate_suffix`], also returning every step's inputs and choice.
pub fn generate_suffix_traced<P: Predictor + ?Sized>(
    model: &P,
    policy: &SamplerPolicy,
    prefix: &[usize],
    prefix_end_time: Timestamp,
    limits: GenerationLimits,
    rng: &mut RandomStream,
) -> (GeneratedSuffix, Vec<StepRecord>) {
    let mut steps = Vec::new();
    let out = run(model, policy, prefix, prefix_end_time, limits, rng, Some(&mut steps));
    (out, steps)
}

fn run<P: Predictor + ?Sized>(
    model: &P,
    policy: &SamplerPolicy,
    prefix: &[usize],
    prefix_end_time: Timestamp,
    limits: GenerationLimits,
    rng: &mut RandomStream,
    mut trace: Option<&mut Vec<StepRecord>>,
) -> GeneratedSuffix {
    let eoc = model.eoc_index();
    let mut counts = DaemonCounts::from_prefix(model.vocab_size(), prefix);
    let mut sequence = prefix.to_vec();
    let mut clock = prefix_end_time.as_secs_f64();
    let mut out = GeneratedSuffix {
        activities: Vec::new(),
        end_times: Vec::new(),
        terminated_by_eoc: false,
        steps_taken: 0,
    };

    while out.activities.len() < limits.max_steps() {
        let dist = model.predict_next(&sequence);
        let selected = policy.select(&dist, &counts, rng);
        out.steps_taken += 1;
        let delta = (selected != eoc).then(|| model.predict_delta(&sequence, selected).max(0.0));
        if let Some(steps) = trace.as_deref_mut() {
            steps.push(StepRecord {
                distribution: dist,
                counts: counts.clone(),
                selected,
                delta_secs: delta,
            });
        }
        counts.increment(selected);
        let Some(delta) = delta else {
            out.terminated_by_eoc = true;
            break;
        };
        clock += delta;
        sequence.push(selected);
        out.activities.push(selected);
        out.end_times.push(clock);
    }
    out
}

/// Stable per-pair seed so results do not depend on scheduling order.
pub fn pair_seed(master_seed: u64, case_id: &str, k: usize) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    };
    feed(&master_seed.to_le_bytes());
    feed(case_id.as_bytes());
    feed(&[0xff]);
    feed(&(k as u64).to_le_bytes());
    splitmix64(h)
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::LogBuilder;
    use crate::predictor::train_ngram;
    use crate::sampling::DaemonMode;

    /// Fixed distribution regardless of context, constant delta.
    struct Constant {
        dist: NextStepDistribution,
        delta: f64,
    }

    impl Predictor for Constant {
        fn vocab_size(&self) -> usize {
            self.dist.len()
        }
        fn eoc_index(&self) -> usize {
            self.dist.len() - 1
        }
        fn predict_next(&self, _prefix: &[usize]) -> NextStepDistribution {
            self.dist.clone()
        }
        fn predict_delta(&self, _prefix: &[usize], _next: usize) -> f64 {
            self.delta
        }
    }

    fn limits(n: usize) -> GenerationLimits {
        GenerationLimits::new(n).unwrap()
    }

    #[test]
    fn immediate_eoc() {
        let model = Constant {
            dist: NextStepDistribution::one_hot(3, 2),
            delta: 10.0,
        };
        let out = generate_suffix(
            &model,
            &SamplerPolicy::Argmax,
            &[0],
            Timestamp::from_secs(0),
            limits(5),
            &mut RandomStream::new(0),
        );
        assert!(out.activities.is_empty());
        assert!(out.terminated_by_eoc);
        assert_eq!(out.steps_taken, 1);
        assert_eq!(out.remaining_secs(Timestamp::from_secs(0)), 0.0);
    }

    #[test]
    fn step_cap() {
        let model = Constant {
            dist: NextStepDistribution::one_hot(3, 1),
            delta: 60.0,
        };
        let start = Timestamp::from_secs(1_000);
        let out = generate_suffix(&model, &SamplerPolicy::Random, &[0], start, limits(5), &mut RandomStream::new(0));
        assert_eq!(out.activities, vec![1; 5]);
        assert!(!out.terminated_by_eoc);
        assert_eq!(out.end_times, vec![1060.0, 1120.0, 1180.0, 1240.0, 1300.0]);
        assert_eq!(out.remaining_secs(start), 300.0);
    }

    #[test]
    fn toy_ngram_argmax() {
        let mut b = LogBuilder::new();
        for (case, base) in [("x", 0), ("y", 10_000)] {
            b = b
                .event(case, "A", Timestamp::from_secs(base))
                .event(case, "B", Timestamp::from_secs(base + 600))
                .event(case, "C", Timestamp::from_secs(base + 1500));
        }
        let model = train_ngram(&b.build().unwrap(), 2, 0.0).unwrap();
        let start = Timestamp::from_secs(50_000);
        let out = generate_suffix(&model, &SamplerPolicy::Argmax, &[0], start, limits(10), &mut RandomStream::new(1));
        assert_eq!(out.activities, vec![1, 2]);
        assert!(out.terminated_by_eoc);
        assert_eq!(out.end_times, vec![50_600.0, 51_500.0]);
        assert_eq!(out.remaining_secs(start), 1500.0);
    }

    #[test]
    fn daemon_counts_track_prefix_and_generated() {
        let model = Constant {
            dist: NextStepDistribution::new(vec![0.3, 0.5, 0.15, 0.05]).unwrap(),
            delta: 1.0,
        };
        let prefix = [0, 1, 1];
        let (out, steps) = generate_suffix_traced(
            &model,
            &SamplerPolicy::Daemon(DaemonMode::Sample),
            &prefix,
            Timestamp::from_secs(0),
            limits(30),
            &mut RandomStream::new(4),
        );
        for (t, step) in steps.iter().enumerate() {
            for a in 0..4 {
                let expected = prefix.iter().chain(&out.activities[..t]).filter(|&&x| x == a).count();
                assert_eq!(step.counts.get(a), expected as u64);
            }
            assert!(step.distribution.prob(step.selected) > 0.0);
        }
        assert_eq!(steps.len(), out.steps_taken);
    }

    #[test]
    fn remaining_time_telescopes() {
        let model = Constant {
            dist: NextStepDistribution::new(vec![0.5, 0.4, 0.1]).unwrap(),
            delta: 37.5,
        };
        let start = Timestamp::from_secs(100);
        let (out, steps) = generate_suffix_traced(
            &model,
            &SamplerPolicy::Random,
            &[0],
            start,
            limits(50),
            &mut RandomStream::new(2),
        );
        let total: f64 = steps.iter().filter_map(|s| s.delta_secs).sum();
        assert!((out.remaining_secs(start) - total).abs() < 1e-9);
        assert!(out.end_times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(pair_seed(42, "c1", 1), pair_seed(42, "c1", 1));
        assert_ne!(pair_seed(42, "c1", 1), pair_seed(42, "c1", 2));
        assert_ne!(pair_seed(42, "c1", 1), pair_seed(43, "c1", 1));
        assert_ne!(pair_seed(42, "c1", 11), pair_seed(42, "c11", 1));
    }

    #[test]
    fn limits_validation() {
        assert!(GenerationLimits::new(0).is_none());
        assert_eq!(GenerationLimits::from_training(7, 2).max_steps(), 14);
    }
}
