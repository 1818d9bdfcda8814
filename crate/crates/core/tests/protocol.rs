use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use specsmooth::data::{
    build_sequences, five_core_filter, generate_synthetic, ingest, pad_truncate, read_bundle,
    sample_negatives, split_leave_one_out, write_bundle, write_tsv, InputFormat, Interaction,
    SynthConfig, MIN_USER_EVENTS, PAD,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn events() -> impl Strategy<Value = Vec<Interaction>> {
    prop::collection::vec((0u8..12, 0u8..30, 0i64..50), 1..300).prop_map(|rows| {
        rows.into_iter()
            .map(|(u, i, t)| Interaction::new(format!("u{u}"), format!("i{i}"), t))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pad_truncate_keeps_the_most_recent_items(seq in prop::collection::vec(1u32..100, 0..40), n in 1usize..30) {
        let out = pad_truncate(&seq, n);
        prop_assert_eq!(out.len(), n);
        let keep = seq.len().min(n);
        prop_assert_eq!(&out[n - keep..], &seq[seq.len() - keep..]);
        prop_assert!(out[..n - keep].iter().all(|&v| v == PAD));
    }

    #[test]
    fn five_core_keeps_exactly_the_heavy_users(ev in events()) {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for e in &ev {
            *counts.entry(e.user.clone()).or_default() += 1;
        }
        let expected: usize = counts.values().filter(|&&c| c >= MIN_USER_EVENTS).sum();
        match five_core_filter(ev.clone()) {
            Ok(kept) => {
                prop_assert_eq!(kept.len(), expected);
                let ds = build_sequences(&kept, 10);
                prop_assert!(ds.sequences.iter().all(|s| s.len() >= MIN_USER_EVENTS));
            }
            Err(_) => prop_assert_eq!(expected, 0),
        }
    }

    #[test]
    fn reindexing_is_a_bijection(ev in events()) {
        let ds = build_sequences(&ev, 10);
        let raw: HashSet<&str> = ev.iter().map(|e| e.item.as_str()).collect();
        prop_assert_eq!(ds.num_items(), raw.len());
        let mapped: HashSet<&str> = ds.item_ids[1..].iter().map(|s| s.as_str()).collect();
        prop_assert_eq!(mapped, raw);
        prop_assert_eq!(ds.item_ids[0].as_str(), "");
        // Every event maps back to its raw id.
        let users: HashMap<&str, usize> =
            ds.user_ids.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
        for (u, seq) in ds.sequences.iter().enumerate() {
            prop_assert!(seq.iter().all(|&v| v >= 1 && v as usize <= ds.num_items()));
            let own: Vec<&str> = seq.iter().map(|&v| ds.item_ids[v as usize].as_str()).collect();
            let mut raw_own: Vec<(i64, &str)> = ev
                .iter()
                .filter(|e| users[e.user.as_str()] == u)
                .map(|e| (e.timestamp, e.item.as_str()))
                .collect();
            raw_own.sort_by_key(|&(t, _)| t);
            let raw_items: Vec<&str> = raw_own.into_iter().map(|(_, i)| i).collect();
            prop_assert_eq!(own, raw_items);
        }
    }

    #[test]
    fn splits_hold_out_the_last_two_items(ev in events(), n in 2usize..12) {
        let ds = build_sequences(&ev, n);
        let split = split_leave_one_out(&ds);
        let eligible = ds.sequences.iter().filter(|s| s.len() >= 3).count();
        prop_assert_eq!(split.test.len(), eligible);
        prop_assert_eq!(split.valid.len(), eligible);
        prop_assert_eq!(split.excluded, ds.num_users() - eligible);
        for (t, v) in split.test.iter().zip(&split.valid) {
            let seq = &ds.sequences[t.user];
            let l = seq.len();
            prop_assert_eq!(t.target, seq[l - 1]);
            prop_assert_eq!(&t.input, &pad_truncate(&seq[..l - 1], n));
            prop_assert_eq!(v.target, seq[l - 2]);
            prop_assert_eq!(&v.input, &pad_truncate(&seq[..l - 2], n));
            prop_assert!(t.target != PAD && v.target != PAD);
        }
        for ex in &split.train {
            let seq = &ds.sequences[ex.user];
            let l = seq.len();
            prop_assert_eq!(&ex.targets, &pad_truncate(&seq[1..l - 1], n));
            // Position t predicts the item after input t.
            for t in 0..n {
                if ex.targets[t] != PAD && t + 1 < n {
                    prop_assert_eq!(ex.input[t + 1], ex.targets[t]);
                }
            }
        }
    }
}

#[test]
fn spec_split_examples() {
    let ev: Vec<Interaction> = ["a", "b", "c", "d", "e"]
        .iter()
        .enumerate()
        .map(|(t, i)| Interaction::new("u", *i, t as i64))
        .collect();
    let ds = build_sequences(&ev, 5);
    let s = split_leave_one_out(&ds);
    assert_eq!(s.test[0].target, 5);
    assert_eq!(s.valid[0].target, 4);
    assert_eq!(s.train[0].input, vec![0, 0, 1, 2, 3]);
    assert_eq!(s.train[0].targets, vec![0, 0, 2, 3, 4]);

    let ds = build_sequences(&ev[..3], 3);
    let s = split_leave_one_out(&ds);
    assert_eq!(s.test[0].target, 3);
    assert_eq!(s.valid[0].target, 2);
    assert_eq!(s.train[0].targets, vec![0, 0, 2]);
}

#[test]
fn synthetic_lengths_survive_preparation() {
    let log = generate_synthetic(&SynthConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("log.tsv");
    write_tsv(&log.events, &tsv).unwrap();
    let read = ingest(&tsv, InputFormat::Tsv, false).unwrap();
    assert_eq!(read.interactions.len(), log.events.len());
    assert_eq!(read.malformed, 0);

    let ds = build_sequences(&five_core_filter(read.interactions).unwrap(), 50);
    let mut expected: Vec<usize> =
        log.user_lengths.iter().copied().filter(|&l| l >= MIN_USER_EVENTS).collect();
    let mut got: Vec<usize> = ds.sequences.iter().map(|s| s.len()).collect();
    expected.sort_unstable();
    got.sort_unstable();
    assert_eq!(got, expected);
    assert!(ds.has_categories());

    let path = dir.path().join("d.ssqb");
    write_bundle(&ds, &path).unwrap();
    assert_eq!(read_bundle(&path).unwrap(), ds);
}

#[test]
fn negatives_avoid_history_and_are_uniform() {
    let log = generate_synthetic(&SynthConfig {
        num_users: 50,
        num_items: 60,
        ..SynthConfig::default()
    })
    .unwrap();
    let ds = build_sequences(&log.events, 20);
    let user = 0;
    let seen: HashSet<u32> = ds.sequences[user].iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 6000;
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for _ in 0..draws {
        let v = sample_negatives(&ds, user, 1, &mut rng).unwrap()[0];
        assert!(!seen.contains(&v));
        *counts.entry(v).or_default() += 1;
    }
    let free = ds.num_items() - seen.len();
    let expected = draws as f64 / free as f64;
    let chi2: f64 = (1..=ds.num_items() as u32)
        .filter(|v| !seen.contains(v))
        .map(|v| {
            let o = counts.get(&v).copied().unwrap_or(0) as f64;
            (o - expected).powi(2) / expected
        })
        .sum();
    let p = 1.0 - ChiSquared::new((free - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi-square p = {p}");

    let a = sample_negatives(&ds, user, 5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = sample_negatives(&ds, user, 5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
    let distinct: HashSet<u32> = a.iter().copied().collect();
    assert_eq!(distinct.len(), 5);
}
