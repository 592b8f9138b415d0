use std::collections::HashMap;

use proptest::prelude::*;

use suffixpred::harness::{generate_synthetic_log, SynthSpec};
use suffixpred::metrics::{dl_distance, mae, ras, sdl};
use suffixpred::predictor::BEGIN;
use suffixpred::sampling::{sample_nucleus, sample_top_k};
use suffixpred::*;

const LABELS: [&str; 5] = ["register", "check", "review", "approve", "close"];

/// Top-down OSA recurrence on suffixes, memoized.
fn osa_oracle(a: &[u8], b: &[u8]) -> usize {
    fn go(a: &[u8], b: &[u8], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let (ra, rb) = (&a[i..], &b[j..]);
        let d = if ra.is_empty() {
            rb.len()
        } else if rb.is_empty() {
            ra.len()
        } else {
            let mut best = (go(a, b, i + 1, j, memo) + 1)
                .min(go(a, b, i, j + 1, memo) + 1)
                .min(go(a, b, i + 1, j + 1, memo) + usize::from(ra[0] != rb[0]));
            if ra.len() >= 2 && rb.len() >= 2 && ra[0] == rb[1] && ra[1] == rb[0] {
                best = best.min(go(a, b, i + 2, j + 2, memo) + 1);
            }
            best
        };
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

fn seq(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..4, 0..max)
}

/// Traces as (label index, gap in seconds) lists.
fn traces() -> impl Strategy<Value = Vec<Vec<(usize, i64)>>> {
    prop::collection::vec(prop::collection::vec((0..LABELS.len(), 0i64..5000), 1..8), 2..12)
}

fn build(traces: &[Vec<(usize, i64)>]) -> EventLog {
    let mut b = LogBuilder::new();
    for (c, events) in traces.iter().enumerate() {
        let mut clock = 1_700_000_000 + 977 * c as i64;
        for &(label, gap) in events {
            clock += gap;
            b.push(&format!("case-{c:02}"), LABELS[label], Timestamp::from_secs(clock), None);
        }
    }
    b.build().unwrap()
}

fn write(log: &EventLog) -> Vec<u8> {
    let mut out = Vec::new();
    log.write_csv(&mut out).unwrap();
    out
}

fn parse(bytes: &[u8]) -> EventLog {
    parse_csv_log(bytes, &ColumnMapping::default(), &TimeFormat::Iso8601).unwrap()
}

fn distribution() -> impl Strategy<Value = NextStepDistribution> {
    prop::collection::vec(0.0f64..1.0, 2..8).prop_filter_map("needs mass", |mut w| {
        w[0] += 1e-3;
        NextStepDistribution::from_weights(w).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dl_matches_oracle_on_longer_pairs(a in seq(12), b in seq(12)) {
        prop_assert_eq!(dl_distance(&a, &b), osa_oracle(&a, &b));
    }

    #[test]
    fn dl_is_symmetric_and_bounded(a in seq(15), b in seq(15)) {
        let d = dl_distance(&a, &b);
        prop_assert_eq!(d, dl_distance(&b, &a));
        prop_assert!(d <= a.len().max(b.len()));
    }

    #[test]
    fn similarity_ranges(a in seq(10), b in seq(10)) {
        let (s, r) = (sdl(&a, &b), ras(&a, &b));
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn ras_ignores_order(a in seq(10), b in seq(10), rot in 0usize..10) {
        let mut shuffled = b.clone();
        shuffled.reverse();
        if !shuffled.is_empty() {
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
        }
        prop_assert_eq!(ras(&a, &b), ras(&a, &shuffled));
        let mut sorted = a.clone();
        sorted.sort();
        prop_assert_eq!(ras(&a, &b), ras(&sorted, &b));
    }

    #[test]
    fn mae_detects_constant_shift(actual in prop::collection::vec(0.0f64..1e6, 1..50), c in 0.001f64..1e4) {
        let pairs: Vec<(f64, f64)> = actual.iter().map(|&a| (a, a + c)).collect();
        let got = mae(&pairs).unwrap();
        prop_assert!((got - c).abs() <= 1e-6, "{} vs {}", got, c);
    }

    #[test]
    fn csv_round_trip(t in traces()) {
        let log = build(&t);
        let bytes = write(&log);
        let parsed = parse(&bytes);
        prop_assert_eq!(&parsed, &log);
        prop_assert_eq!(write(&parsed), bytes);
    }

    #[test]
    fn csv_write_parse_write_is_a_fixpoint(t in traces(), seed in any::<u64>()) {
        // shuffle rows across cases so label first appearance differs from trace order
        let log = build(&t);
        let text = String::from_utf8(write(&log)).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        let mut rng = RandomStream::new(seed);
        for i in (1..lines.len()).rev() {
            lines.swap(i, rng.next_index(i + 1));
        }
        let shuffled = format!("{header}\n{}\n", lines.join("\n"));
        let once = write(&parse(shuffled.as_bytes()));
        let twice = write(&parse(&once));
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn split_is_deterministic(t in traces(), f in 0.05f64..0.95) {
        let log = build(&t);
        prop_assert_eq!(temporal_split(&log, f).unwrap(), temporal_split(&log, f).unwrap());
    }

    #[test]
    fn pair_count(t in traces()) {
        let log = build(&t);
        let expected: usize = log.traces.iter().map(|t| t.len().saturating_sub(1)).sum();
        prop_assert_eq!(enumerate_log_pairs(&log).len(), expected);
    }

    #[test]
    fn distributions_sum_to_one(t in traces(), order in 1usize..5, alpha in prop::sample::select(vec![0.0, 0.1, 1.0])) {
        let log = build(&t);
        let model = train_ngram(&log, order, alpha).unwrap();
        for trace in &log.traces {
            let acts = trace.activities();
            for k in 0..=acts.len() {
                let d = model.predict_next(&acts[..k]);
                prop_assert_eq!(d.len(), model.vocab_size());
                prop_assert!(d.probs().iter().all(|&p| p >= 0.0));
                prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
        // an unseen context still yields a distribution
        let d = model.predict_next(&[0, 0, 0, 0, 0, 0]);
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn prediction_depends_only_on_context(t in traces(), order in 2usize..5, head in seq(4)) {
        let log = build(&t);
        let model = train_ngram(&log, order, 0.1).unwrap();
        let acts = log.traces[0].activities();
        let tail = &acts[acts.len().saturating_sub(order - 1)..];
        if tail.len() == order - 1 {
            let mut longer: Vec<usize> = head.iter().map(|&h| h as usize % LABELS.len()).collect();
            longer.extend_from_slice(tail);
            prop_assert_eq!(model.predict_next(tail), model.predict_next(&longer));
        }
    }

    #[test]
    fn counts_only_grow(t in traces(), extra in prop::collection::vec((0..LABELS.len(), 0i64..5000), 1..8), order in 1usize..5) {
        let before = train_ngram(&build(&t), order, 0.0).unwrap();
        let mut more = t.clone();
        more.push(extra);
        let after = train_ngram(&build(&more), order, 0.0).unwrap();
        // labels keep their indices because the new trace comes last; only EOC may move
        for trace in build(&t).traces.iter() {
            let acts: Vec<u32> = trace.activities().iter().map(|&a| a as u32).collect();
            let padded: Vec<u32> = std::iter::repeat_n(BEGIN, order - 1).chain(acts.iter().copied()).collect();
            for pos in (order - 1)..=padded.len() {
                for len in 0..order {
                    let ctx = &padded[pos - len..pos];
                    if let Some(old) = before.transition_counts(ctx) {
                        let new = after.transition_counts(ctx).expect("context kept");
                        prop_assert!(new.total >= old.total);
                        for (&next, &c) in &old.next {
                            let mapped = if next == before.eoc_index() { after.eoc_index() } else { next };
                            prop_assert!(new.next.get(&mapped).copied().unwrap_or(0) >= c);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn truncated_samplers_stay_in_support(d in distribution(), k in 1usize..9, p in 0.05f64..1.0, seed in any::<u64>()) {
        let probs = d.probs();
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        let top: Vec<usize> = order[..k.min(probs.len())].to_vec();
        let mut cum = 0.0;
        let mut nucleus = Vec::new();
        for &i in &order {
            nucleus.push(i);
            cum += probs[i];
            if cum >= p {
                break;
            }
        }
        let mut rng = RandomStream::new(seed);
        for _ in 0..50 {
            let t = sample_top_k(&d, k, &mut rng);
            prop_assert!(top.contains(&t) && probs[t] > 0.0);
            let n = sample_nucleus(&d, p, &mut rng);
            prop_assert!(nucleus.contains(&n) && probs[n] > 0.0);
        }
    }

    #[test]
    fn generation_bookkeeping(t in traces(), order in 1usize..4, seed in any::<u64>(), pick in 0usize..5) {
        let log = build(&t);
        let model = train_ngram(&log, order, 0.0).unwrap();
        let policy = SamplerPolicy::defaults()[pick];
        let trace = &log.traces[0];
        let prefix: Vec<usize> = trace.activities()[..1].to_vec();
        let limits = GenerationLimits::from_training(log.max_trace_len(), 2);
        let end = trace.events[0].end_time;
        let (out, steps) = generate_suffix_traced(&model, &policy, &prefix, end, limits, &mut RandomStream::new(seed));
        let again = generate_suffix(&model, &policy, &prefix, end, limits, &mut RandomStream::new(seed));
        prop_assert_eq!(&out, &again);
        prop_assert!(out.activities.len() <= limits.max_steps());
        let mut seen = prefix.clone();
        for step in &steps {
            for a in 0..model.vocab_size() {
                let expected = seen.iter().filter(|&&x| x == a).count() as u64;
                prop_assert_eq!(step.counts.get(a), expected);
            }
            prop_assert!(step.distribution.prob(step.selected) > 0.0);
            seen.push(step.selected);
        }
    }
}

/// Repeat counts under `continue_prob = q` and `max_iterations = m` follow
/// P(j) = (1 - q) q^j for j < m and q^m at the cap.
#[test]
fn loop_counts_follow_truncated_geometric() {
    let spec = SynthSpec::from_toml(
        r#"
        base_path = ["a", "b", "c"]
        n_cases = 10000
        [loop]
        start = 1
        end = 1
        continue_prob = 0.5
        max_iterations = 3
        "#,
    )
    .unwrap();
    let log = generate_synthetic_log(&spec, &mut RandomStream::new(11)).unwrap();
    let mut observed = [0f64; 4];
    for t in &log.traces {
        observed[t.len() - 3] += 1.0;
    }
    let (q, n) = (0.5f64, 10_000.0);
    let expected = [(1.0 - q) * n, (1.0 - q) * q * n, (1.0 - q) * q * q * n, q.powi(3) * n];
    let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    // 3 degrees of freedom, 0.999 quantile
    assert!(chi2 < 16.27, "chi-square {chi2}, observed {observed:?}");
}

#[test]
fn dl_matches_oracle_on_random_longer_pairs() {
    let mut rng = RandomStream::new(17);
    let draw = |rng: &mut RandomStream| -> Vec<u8> {
        let len = 7 + rng.next_index(6);
        (0..len).map(|_| rng.next_index(3) as u8).collect()
    };
    for _ in 0..10_000 {
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        assert_eq!(dl_distance(&a, &b), osa_oracle(&a, &b), "{a:?} vs {b:?}");
    }
}
