use std::collections::{BTreeMap, HashSet};

use dsegym_core::{AgentKind, TrialRng};
use rand::seq::{index, SliceRandom};

use crate::{DatasetError, TrajectoryRecord};

/// Tolerance on the sum of mixture proportions.
const PROPORTION_TOLERANCE: f64 = 1e-9;

/// An ordered collection of trajectory records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    records: Vec<TrajectoryRecord>,
}

impl Dataset {
    pub fn from_records(records: Vec<TrajectoryRecord>) -> Result<Self, DatasetError> {
        for r in &records {
            r.validate()?;
        }
        Ok(Dataset { records })
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TrajectoryRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn env_id(&self) -> Option<&str> {
        self.records.first().map(|r| r.env_id.as_str())
    }

    /// Record count per (agent_type, experiment_id).
    pub fn provenance(&self) -> BTreeMap<(AgentKind, String), usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry((r.agent_type, r.experiment_id.clone())).or_insert(0) += 1;
        }
        out
    }

    pub fn agent_counts(&self) -> BTreeMap<AgentKind, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.agent_type).or_insert(0) += 1;
        }
        out
    }

    /// Records produced by one agent type, in order.
    pub fn by_agent(&self, agent: AgentKind) -> Dataset {
        Dataset {
            records: self.records.iter().filter(|r| r.agent_type == agent).cloned().collect(),
        }
    }

    /// Errors if two records share (experiment_id, step_index).
    pub fn check_unique(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.key()) {
                return Err(DatasetError::InvalidRecord(format!(
                    "duplicate step {} of `{}`",
                    r.step_index, r.experiment_id
                )));
            }
        }
        Ok(())
    }

    /// Errors unless every experiment's step indices are exactly 0..n.
    pub fn check_dense(&self) -> Result<(), DatasetError> {
        self.check_unique()?;
        let mut per: BTreeMap<&str, (u64, usize)> = BTreeMap::new();
        for r in &self.records {
            let e = per.entry(&r.experiment_id).or_insert((0, 0));
            e.0 = e.0.max(r.step_index);
            e.1 += 1;
        }
        for (id, (max, n)) in per {
            if max + 1 != n as u64 {
                return Err(DatasetError::InvalidRecord(format!(
                    "experiment `{id}` has {n} records but reaches step {max}"
                )));
            }
        }
        Ok(())
    }
}

/// Concatenates datasets in order. All records must share one env_id and
/// schema version.
pub fn merge(datasets: &[Dataset]) -> Result<Dataset, DatasetError> {
    let mut records = Vec::with_capacity(datasets.iter().map(Dataset::len).sum());
    let mut first: Option<(u32, String)> = None;
    for r in datasets.iter().flat_map(|d| &d.records) {
        match &first {
            None => first = Some((r.schema_version, r.env_id.clone())),
            Some((v, env)) => {
                if *v != r.schema_version {
                    return Err(DatasetError::MixedSchema(*v, r.schema_version));
                }
                if *env != r.env_id {
                    return Err(DatasetError::MixedEnvironments(env.clone(), r.env_id.clone()));
                }
            }
        }
        records.push(r.clone());
    }
    Ok(Dataset { records })
}

/// Draws `size` records, `round(p·size)` from each agent's source without
/// replacement, and shuffles them together. The rounding residue goes to the
/// source with the largest proportion.
pub fn sample_mixture(
    per_agent: &BTreeMap<AgentKind, Dataset>,
    proportions: &BTreeMap<AgentKind, f64>,
    size: usize,
    rng: &mut TrialRng,
) -> Result<Dataset, DatasetError> {
    let total: f64 = proportions.values().sum();
    if proportions.is_empty() || (total - 1.0).abs() > PROPORTION_TOLERANCE {
        return Err(DatasetError::Invalid(format!("mixture proportions sum to {total}, not 1")));
    }
    if let Some((a, p)) = proportions.iter().find(|(_, p)| !(**p >= 0.0)) {
        return Err(DatasetError::Invalid(format!("proportion {p} for {a} is negative")));
    }
    let mut counts: BTreeMap<AgentKind, i64> = proportions
        .iter()
        .map(|(&a, &p)| (a, (p * size as f64).round() as i64))
        .collect();
    let residue = size as i64 - counts.values().sum::<i64>();
    let largest = proportions
        .iter()
        .fold(None, |best: Option<(AgentKind, f64)>, (&a, &p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((a, p)),
        })
        .expect("non-empty")
        .0;
    *counts.get_mut(&largest).unwrap() += residue;

    let mut out = Vec::with_capacity(size);
    for (&agent, &n) in &counts {
        let n = n.max(0) as usize;
        if n == 0 {
            continue;
        }
        let source = per_agent.get(&agent).map(Dataset::records).unwrap_or_default();
        if let Some(r) = source.iter().find(|r| r.agent_type != agent) {
            return Err(DatasetError::Invalid(format!(
                "source for {agent} contains a {} record",
                r.agent_type
            )));
        }
        if source.len() < n {
            return Err(DatasetError::InsufficientRecords {
                agent,
                needed: n,
                available: source.len(),
            });
        }
        let mut picks = index::sample(rng, source.len(), n).into_vec();
        picks.sort_unstable();
        out.extend(picks.into_iter().map(|i| source[i].clone()));
    }
    out.shuffle(rng);
    Ok(Dataset { records: out })
}

/// Uniform disjoint split into (train, test) with `round(f·n)` test records.
/// Both halves keep the input order.
pub fn split(dataset: &Dataset, test_fraction: f64, rng: &mut TrialRng) -> Result<(Dataset, Dataset), DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::Invalid(format!("test fraction {test_fraction} is outside (0, 1)")));
    }
    let n = dataset.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    let mut is_test = vec![false; n];
    for i in index::sample(rng, n, n_test) {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
    for (r, t) in dataset.records.iter().zip(is_test) {
        if t {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok((Dataset { records: train }, Dataset { records: test }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::record;
    use dsegym_core::rng_for;

    fn source(agent: AgentKind, n: u64) -> Dataset {
        let id = format!("{agent}-0");
        Dataset::from_records((0..n).map(|i| record(&id, agent, i, i as f64)).collect()).unwrap()
    }

    #[test]
    fn merge_counts_and_identity() {
        let a = source(AgentKind::ACO, 100);
        let b = source(AgentKind::GA, 50);
        let m = merge(&[a.clone(), b]).unwrap();
        assert_eq!(m.len(), 150);
        assert_eq!(m.agent_counts()[&AgentKind::ACO], 100);
        assert_eq!(merge(&[a.clone()]).unwrap(), a);
        assert!(merge(&[]).unwrap().is_empty());
    }

    #[test]
    fn merge_rejects_mixed_environments() {
        let a = source(AgentKind::ACO, 3);
        let mut b = source(AgentKind::GA, 3);
        b.records[1].env_id = "accel".into();
        let err = merge(&[a, b]).unwrap_err();
        assert!(err.to_string().contains("cannot merge across environments"), "{err}");
    }

    fn sources() -> BTreeMap<AgentKind, Dataset> {
        [AgentKind::ACO, AgentKind::GA, AgentKind::RW, AgentKind::BO]
            .into_iter()
            .map(|a| (a, source(a, 400)))
            .collect()
    }

    #[test]
    fn aco_only_mixture() {
        let props = [(AgentKind::ACO, 1.0)].into_iter().collect();
        let d = sample_mixture(&sources(), &props, 300, &mut rng_for(1, 0)).unwrap();
        assert_eq!(d.len(), 300);
        assert_eq!(d.agent_counts(), [(AgentKind::ACO, 300)].into_iter().collect());
    }

    #[test]
    fn quarter_mixture_is_exact() {
        let props = [AgentKind::ACO, AgentKind::GA, AgentKind::RW, AgentKind::BO]
            .into_iter()
            .map(|a| (a, 0.25))
            .collect();
        let d = sample_mixture(&sources(), &props, 1000, &mut rng_for(2, 0)).unwrap();
        assert!(d.agent_counts().values().all(|&c| c == 250));
        d.check_unique().unwrap();
        let again = sample_mixture(&sources(), &props, 1000, &mut rng_for(2, 0)).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn rounding_residue_goes_to_largest() {
        // round(0.5·3)=2 and round(0.5·3)=2 overshoot by one; ties go to the first agent
        let props = [(AgentKind::GA, 0.5), (AgentKind::ACO, 0.5)].into_iter().collect();
        let d = sample_mixture(&sources(), &props, 3, &mut rng_for(3, 0)).unwrap();
        assert_eq!(d.agent_counts()[&AgentKind::GA], 1);
        assert_eq!(d.agent_counts()[&AgentKind::ACO], 2);
        let props = [(AgentKind::GA, 0.3), (AgentKind::ACO, 0.3), (AgentKind::BO, 0.4)]
            .into_iter()
            .collect();
        let d = sample_mixture(&sources(), &props, 5, &mut rng_for(3, 0)).unwrap();
        // 1.5→2, 1.5→2, 2.0→2, residue −1 to BO
        assert_eq!(d.agent_counts()[&AgentKind::BO], 1);
        assert_eq!(d.len(), 5);
    }

    #[test]
    fn mixture_errors() {
        let props: BTreeMap<_, _> = [(AgentKind::RL, 1.0)].into_iter().collect();
        match sample_mixture(&sources(), &props, 10, &mut rng_for(0, 0)) {
            Err(DatasetError::InsufficientRecords { agent, .. }) => assert_eq!(agent, AgentKind::RL),
            other => panic!("{other:?}"),
        }
        let props = [(AgentKind::ACO, 1.0)].into_iter().collect();
        let err = sample_mixture(&sources(), &props, 401, &mut rng_for(0, 0)).unwrap_err();
        assert!(err.to_string().contains("ACO"));
        let props = [(AgentKind::ACO, 0.6), (AgentKind::GA, 0.6)].into_iter().collect();
        assert!(sample_mixture(&sources(), &props, 10, &mut rng_for(0, 0)).is_err());
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let d = source(AgentKind::RW, 1000);
        let (train, test) = split(&d, 0.2, &mut rng_for(4, 0)).unwrap();
        assert_eq!((train.len(), test.len()), (800, 200));
        let keys: HashSet<_> = train.records().iter().map(|r| r.key()).collect();
        assert!(test.records().iter().all(|r| !keys.contains(&r.key())));
        let again = split(&d, 0.2, &mut rng_for(4, 0)).unwrap();
        assert_eq!((train, test), again);
        assert!(split(&d, 1.0, &mut rng_for(4, 0)).is_err());
    }

    #[test]
    fn density_check() {
        let d = source(AgentKind::RW, 5);
        d.check_dense().unwrap();
        let holes = Dataset::from_records(d.records()[1..].to_vec()).unwrap();
        assert!(holes.check_dense().is_err());
    }
}
