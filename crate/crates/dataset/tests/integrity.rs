use std::collections::BTreeMap;

use dsegym_core::{rng_for, AgentKind, ParamValue, TrialRng};
use dsegym_dataset::{
    export, import, load_file, merge, sample_mixture, Dataset, TrajectoryRecord, TrajectoryWriter, SCHEMA_VERSION,
};
use proptest::prelude::*;
use rand::Rng;

fn finite(rng: &mut TrialRng) -> f64 {
    loop {
        let x = match rng.gen_range(0..4) {
            0 => f64::from_bits(rng.gen()),
            1 => rng.gen::<f64>(),
            2 => rng.gen_range(-1e-300..1e-300),
            _ => rng.gen_range(-1e6..1e6),
        };
        if x.is_finite() {
            return x;
        }
    }
}

fn text(rng: &mut TrialRng) -> String {
    const ALPHABET: [&str; 8] = ["a", "Z", "_", "\"", "\\", "é", "µ", "\u{1F600}"];
    (0..rng.gen_range(1..10)).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

fn random_record(rng: &mut TrialRng, experiment: &str, step: u64) -> TrajectoryRecord {
    let design = (0..rng.gen_range(1..6))
        .map(|i| {
            let v = if rng.gen_bool(0.5) {
                ParamValue::Label(text(rng))
            } else {
                ParamValue::Number(finite(rng))
            };
            (format!("p{i}"), v)
        })
        .collect();
    let observation = (0..rng.gen_range(0..4)).map(|i| (format!("m{i}"), finite(rng))).collect();
    TrajectoryRecord {
        schema_version: SCHEMA_VERSION,
        experiment_id: experiment.to_string(),
        env_id: "dram".into(),
        workload_id: text(rng),
        agent_type: AgentKind::ALL[rng.gen_range(0..5)],
        hyperparam_digest: format!("{:032x}", rng.gen::<u128>()),
        seed: rng.gen(),
        step_index: step,
        design,
        observation,
        reward: finite(rng),
        wall_time_ms: rng.gen(),
    }
}

fn bits(r: &TrajectoryRecord) -> Vec<u64> {
    let mut out = vec![r.reward.to_bits()];
    out.extend(r.observation.values().map(|v| v.to_bits()));
    out.extend(r.design.values().filter_map(|v| match v {
        ParamValue::Number(x) => Some(x.to_bits()),
        ParamValue::Label(_) => None,
    }));
    out
}

#[test]
fn round_trip_of_many_random_records_is_bit_exact() {
    let mut rng = rng_for(2024, 0);
    let records: Vec<_> = (0..100_000u64)
        .map(|i| {
            let exp = format!("exp-{}", i % 37);
            random_record(&mut rng, &exp, i / 37)
        })
        .collect();
    let dataset = Dataset::from_records(records).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("all.jsonl");
    export(&dataset, &path).unwrap();
    let back = import(&path).unwrap();
    assert_eq!(back.len(), 100_000);
    for (a, b) in dataset.records().iter().zip(back.records()) {
        assert_eq!(a, b);
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn appends_one_line_each_and_recover_from_a_torn_tail() {
    let n = 100_000u64;
    let mut rng = rng_for(9, 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trial.jsonl");
    let mut w = TrajectoryWriter::create(&path).unwrap();
    for i in 0..n {
        w.append(&random_record(&mut rng, "trial", i)).unwrap();
    }
    w.sync().unwrap();
    drop(w);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), n as usize);

    // cut the last record in half, as an interrupted append would
    let last_start = text[..text.len() - 1].rfind('\n').unwrap() + 1;
    let cut = last_start + (text.len() - last_start) / 2;
    let file = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
    file.set_len(cut as u64).unwrap();
    drop(file);
    let (records, report) = load_file(&path).unwrap();
    assert_eq!(records.len(), n as usize - 1);
    assert!(report.truncated_tail);

    let mut w = TrajectoryWriter::open(&path).unwrap();
    w.append(&random_record(&mut rng, "trial", n - 1)).unwrap();
    let (records, report) = load_file(&path).unwrap();
    assert_eq!(records.len(), n as usize);
    assert!(!report.truncated_tail);
}

fn small_dataset(seed: u64, agent: AgentKind, n: u64) -> Dataset {
    let mut rng = rng_for(seed, 0);
    let id = format!("{agent}-{seed}");
    Dataset::from_records(
        (0..n)
            .map(|i| {
                let mut r = random_record(&mut rng, &id, i);
                r.agent_type = agent;
                r
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn merge_is_associative_and_order_preserving(sizes in prop::collection::vec(0u64..30, 3), seed in 0u64..1000) {
        let ds: Vec<Dataset> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| small_dataset(seed * 10 + i as u64, AgentKind::ALL[i], n))
            .collect();
        let left = merge(&[merge(&ds[..2]).unwrap(), ds[2].clone()]).unwrap();
        let right = merge(&[ds[0].clone(), merge(&ds[1..]).unwrap()]).unwrap();
        let flat = merge(&ds).unwrap();
        prop_assert_eq!(&left, &right);
        prop_assert_eq!(&left, &flat);
        prop_assert_eq!(flat.len() as u64, sizes.iter().sum::<u64>());
        let mut offset = 0;
        for d in &ds {
            prop_assert_eq!(&flat.records()[offset..offset + d.len()], d.records());
            offset += d.len();
        }
        let prov: usize = flat.provenance().values().sum();
        prop_assert_eq!(prov, flat.len());
    }

    #[test]
    fn mixture_provenance_matches_rounded_proportions(
        weights in prop::collection::vec(0u32..10, 4),
        size in 1usize..400,
        seed in 0u64..1000,
    ) {
        prop_assume!(weights.iter().any(|&w| w > 0));
        let agents = [AgentKind::ACO, AgentKind::GA, AgentKind::RW, AgentKind::BO];
        let total: u32 = weights.iter().sum();
        let proportions: BTreeMap<AgentKind, f64> =
            agents.iter().zip(&weights).map(|(&a, &w)| (a, w as f64 / total as f64)).collect();
        let sources: BTreeMap<AgentKind, Dataset> =
            agents.iter().enumerate().map(|(i, &a)| (a, small_dataset(seed + i as u64, a, 500))).collect();
        let mixed = sample_mixture(&sources, &proportions, size, &mut rng_for(seed, 1)).unwrap();
        prop_assert_eq!(mixed.len(), size);

        // independent rounding oracle
        let mut expected: BTreeMap<AgentKind, i64> =
            proportions.iter().map(|(&a, &p)| (a, (p * size as f64).round() as i64)).collect();
        let residue = size as i64 - expected.values().sum::<i64>();
        let max_p = proportions.values().cloned().fold(f64::MIN, f64::max);
        let largest = *proportions.iter().find(|(_, &p)| p == max_p).unwrap().0;
        *expected.get_mut(&largest).unwrap() += residue;
        let counts = mixed.agent_counts();
        for (a, n) in expected {
            prop_assert_eq!(counts.get(&a).copied().unwrap_or(0) as i64, n);
        }
        mixed.check_unique().unwrap();
    }
}
