//! Coalitions, publisher-validator collusion and Sybil identities.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use crate::analysis::grid::{self, ActionGrid};
use crate::analysis::scene::{Roster, Scene};
use crate::analysis::spne::{self, DeviationResult, GroupSpec, Participant, Verdict};
use crate::error::{AnalysisError, GameError};
use crate::game::{self, trial_seed, GameConfig, PublisherStrategy, PublisherView, Revenue, StrategyProfile};
use crate::protocol::PublicationBundle;
use crate::stats::{self, Estimate};
use crate::types::{Digest256, Money, PublisherId, Report, ReportId};

/// How the members of a coalition map onto the merged publisher.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoalitionMap {
    pub merged: PublisherId,
    pub members: Vec<PublisherId>,
    /// Original owner of every report the merged publisher holds.
    pub origin: BTreeMap<ReportId, PublisherId>,
}

fn check_members(cfg: &GameConfig, members: &[PublisherId]) -> Result<Vec<PublisherId>, AnalysisError> {
    if members.is_empty() {
        return Err(AnalysisError::Invalid("coalition needs at least one member".into()));
    }
    let set: BTreeSet<PublisherId> = members.iter().copied().collect();
    if set.len() != members.len() {
        return Err(AnalysisError::Invalid("coalition lists a member twice".into()));
    }
    for m in &set {
        if !cfg.roster.contains(m) {
            return Err(GameError::UnknownPublisher(m.0).into());
        }
    }
    Ok(set.into_iter().collect())
}

/// The game in which `members` are replaced by one publisher, the smallest
/// member id, owning all of their reports.
pub fn coalition_transform(
    cfg: &GameConfig,
    members: &[PublisherId],
) -> Result<(GameConfig, CoalitionMap), AnalysisError> {
    let members = check_members(cfg, members)?;
    let merged = members[0];
    let mut origin = BTreeMap::new();
    let reports = cfg
        .reports
        .iter()
        .map(|r| {
            if members.contains(&r.owner()) {
                origin.insert(r.id(), r.owner());
                r.with_owner(merged)
            } else {
                r.clone()
            }
        })
        .collect();
    let roster = cfg.roster.iter().copied().filter(|p| *p == merged || !members.contains(p)).collect();
    let out = GameConfig { epoch: cfg.epoch, roster, reports, seed: cfg.seed };
    Ok((out, CoalitionMap { merged, members, origin }))
}

/// The merged publisher's action: every member acts on its own reports,
/// publications are united and bribe schedules summed.
#[derive(Debug, Clone)]
pub struct CoalitionStrategy {
    map: CoalitionMap,
    members: Vec<Arc<dyn PublisherStrategy>>,
}

impl CoalitionStrategy {
    pub fn new(map: CoalitionMap, profile: &StrategyProfile) -> Result<Self, AnalysisError> {
        let members = map
            .members
            .iter()
            .map(|m| profile.publishers.get(m).cloned().ok_or(GameError::MissingStrategy(m.0)))
            .collect::<Result<_, _>>()?;
        Ok(Self { map, members })
    }
}

impl PublisherStrategy for CoalitionStrategy {
    fn act(&self, view: &PublisherView) -> PublicationBundle {
        let mut out = PublicationBundle::default();
        for (m, strategy) in self.map.members.iter().zip(&self.members) {
            let own: Vec<Report> =
                view.reports.iter().filter(|r| self.map.origin.get(&r.id()) == Some(m)).cloned().collect();
            let bundle = strategy.act(&PublisherView { reports: &own, ..*view });
            out.transactions.extend(bundle.transactions);
            out.bribe.absorb(&bundle.bribe);
        }
        out
    }
}

/// Profile of the merged game matching `profile` in the original one.
pub fn transform_profile(profile: &StrategyProfile, map: &CoalitionMap) -> Result<StrategyProfile, AnalysisError> {
    let mut publishers: BTreeMap<_, _> =
        profile.publishers.iter().filter(|(p, _)| !map.members.contains(p)).map(|(p, s)| (*p, s.clone())).collect();
    publishers
        .insert(map.merged, Arc::new(CoalitionStrategy::new(map.clone(), profile)?) as Arc<dyn PublisherStrategy>);
    Ok(StrategyProfile { publishers, validator: profile.validator.clone() })
}

/// Outcome of replaying traces in the original and the merged game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub traces: u64,
    /// Traces where the coalition total, some outsider or some validator
    /// differed, compared bit for bit.
    pub mismatches: u64,
    pub first_mismatch: Option<u64>,
}

impl EquivalenceReport {
    pub fn holds(&self) -> bool {
        self.mismatches == 0
    }
}

/// Plays `traces` seeded epochs under `profile` and under its merged image
/// and compares every participant's revenue exactly.
pub fn check_coalition_equivalence(
    cfg: &GameConfig,
    members: &[PublisherId],
    profile: &StrategyProfile,
    traces: u64,
    seed: u64,
) -> Result<EquivalenceReport, AnalysisError> {
    let (merged_cfg, map) = coalition_transform(cfg, members)?;
    let merged_profile = transform_profile(profile, &map)?;
    let mut mismatches = 0;
    let mut first_mismatch = None;
    for i in 0..traces {
        let a = game::play_trial(cfg, profile, seed, i)?;
        let b = game::play_trial(&merged_cfg, &merged_profile, seed, i)?;
        let together = Revenue::combine(map.members.iter().filter_map(|m| a.publishers.get(m)));
        let mut same = together.net() == b.publishers[&map.merged].net()
            && together.received() == b.publishers[&map.merged].received();
        for p in cfg.roster.iter().filter(|p| !map.members.contains(p)) {
            same &= a.publishers[p].net() == b.publishers[p].net();
        }
        same &= a.validators.len() == b.validators.len();
        for (v, rev) in &a.validators {
            same &= b.validators.get(v).is_some_and(|x| x.net() == rev.net());
        }
        if !same {
            mismatches += 1;
            first_mismatch.get_or_insert(i);
        }
    }
    Ok(EquivalenceReport { traces, mismatches, first_mismatch })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollusionReport {
    pub members: Vec<PublisherId>,
    pub trials: u64,
    /// Combined revenue of the members and the first validator under
    /// honest play.
    pub honest: Estimate,
    /// Combined revenue under the best joint action for each first string.
    pub best: Estimate,
    pub largest_gain: Money,
    pub holds: bool,
}

/// Publishers `members` and the first validator act jointly after seeing
/// the first random string: they choose which member reports to publish
/// and which vector to include. Holds iff on every sampled string no joint
/// action beats honest play on combined revenue. Bribes between members
/// are internal transfers and drop out.
pub fn check_pub_val_collusion(
    cfg: &GameConfig,
    members: &[PublisherId],
    trials: u64,
    seed: u64,
) -> Result<CollusionReport, AnalysisError> {
    let members = check_members(cfg, members)?;
    spne::check_budget(cfg, &ActionGrid::default())?;
    if trials == 0 {
        return Err(AnalysisError::Invalid("trials must be >= 1".into()));
    }
    let roster = Roster::new(cfg);
    let n = roster.len();
    let in_group: Vec<bool> = roster.owners.iter().map(|o| members.contains(o)).collect();
    let own: Vec<usize> = (0..n).filter(|&i| in_group[i]).collect();
    let cont = if cfg.epoch.window() > 1 && n > 0 {
        own.len() as f64 / n as f64 * cfg.spec().rallpub_closed_form(n as u64)?
    } else {
        0.0
    };
    let payloads: Vec<Digest256> = cfg.reports.iter().map(|r| *r.payload_digest()).collect();
    let max_len = grid::MAX_VECTOR_LEN;
    let selections: Vec<Vec<Vec<usize>>> = (0..=n).map(|k| grid::ordered_selections(k, max_len)).collect();
    let all = vec![true; n];

    // Gains are non-negative, so their bit patterns order like the values.
    let largest = std::sync::atomic::AtomicU64::new(0);
    let acc = stats::monte_carlo(trials, 3, |i, out| {
        let s = cfg.random_string(trial_seed(seed, i), 1);
        let scene = Scene::new(&roster, &payloads, &s);
        let combined = |raw: &[usize]| {
            scene.group_reward(raw, &in_group) + scene.contract(raw) + if raw.is_empty() { cont } else { 0.0 }
        };
        let h = scene.honest(&all);
        let honest = combined(&h);
        let mut best = honest;
        for mask in grid::subsets(own.len()) {
            let mut published: Vec<bool> = in_group.iter().map(|&x| !x).collect();
            for (bit, &k) in own.iter().enumerate() {
                published[k] = mask & (1 << bit) != 0;
            }
            let listed: Vec<usize> = (0..n).filter(|&k| published[k]).collect();
            for sel in &selections[listed.len()] {
                let raw: Vec<usize> = sel.iter().map(|&k| listed[k]).collect();
                best = best.max(combined(&raw));
            }
        }
        out[0] = honest;
        out[1] = best;
        out[2] = best - honest;
        largest.fetch_max((best - honest).to_bits(), std::sync::atomic::Ordering::Relaxed);
    });
    let largest_gain = f64::from_bits(largest.into_inner());
    Ok(CollusionReport {
        members,
        trials,
        honest: acc[0].estimate(),
        best: acc[1].estimate(),
        largest_gain,
        holds: largest_gain <= 1e-9,
    })
}

/// The game in which publisher `j`'s reports are spread over fresh
/// identities, one per part of `partition`. Returns the new game and the
/// identities in partition order.
pub fn sybil_split(
    cfg: &GameConfig,
    j: PublisherId,
    partition: &[Vec<ReportId>],
) -> Result<(GameConfig, Vec<PublisherId>), AnalysisError> {
    if !cfg.roster.contains(&j) {
        return Err(GameError::UnknownPublisher(j.0).into());
    }
    let owned: BTreeSet<ReportId> = cfg.reports_of(j).iter().map(Report::id).collect();
    let listed: Vec<ReportId> = partition.iter().flatten().copied().collect();
    let listed_set: BTreeSet<ReportId> = listed.iter().copied().collect();
    if partition.iter().any(Vec::is_empty) || listed.len() != listed_set.len() || listed_set != owned {
        return Err(AnalysisError::Invalid(format!(
            "partition must split the reports of {j} into non-empty disjoint parts"
        )));
    }
    let next = cfg.roster.iter().map(|p| p.0).max().unwrap_or(0) + 1;
    let ids: Vec<PublisherId> = (0..partition.len() as u32).map(|k| PublisherId(next + k)).collect();
    let reports = cfg
        .reports
        .iter()
        .map(|r| match partition.iter().position(|part| part.contains(&r.id())) {
            Some(k) => r.with_owner(ids[k]),
            None => r.clone(),
        })
        .collect();
    let mut roster: Vec<PublisherId> = cfg.roster.iter().copied().filter(|p| *p != j).collect();
    roster.extend(&ids);
    Ok((GameConfig { epoch: cfg.epoch, roster, reports, seed: cfg.seed }, ids))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SybilReport {
    pub publisher: PublisherId,
    pub identities: Vec<PublisherId>,
    pub partition: Vec<Vec<ReportId>>,
    /// Honest identities earn exactly what `publisher` earns, trace by trace.
    pub honest_traces_equal: bool,
    pub honest_utility: Estimate,
    pub best: Option<DeviationResult>,
    pub verdict: Verdict,
    pub deviations: Vec<DeviationResult>,
}

impl SybilReport {
    pub fn holds(&self) -> bool {
        self.honest_traces_equal && self.verdict.holds()
    }
}

/// Traces compared exactly before the deviation search.
const SYBIL_TRACES: u64 = 1000;

/// Whether splitting `j`'s reports over identities can raise their combined
/// expected revenue. The identities may deviate jointly over the grid.
pub fn check_sybil_proofness(
    cfg: &GameConfig,
    j: PublisherId,
    partition: &[Vec<ReportId>],
    grid: &ActionGrid,
    epsilon_se: f64,
    trials: u64,
    seed: u64,
) -> Result<SybilReport, AnalysisError> {
    let (split, ids) = sybil_split(cfg, j, partition)?;
    let honest = StrategyProfile::honest(cfg);
    let honest_split = StrategyProfile::honest(&split);
    let mut equal = true;
    for i in 0..SYBIL_TRACES.min(trials) {
        let a = game::play_trial(cfg, &honest, seed, i)?;
        let b = game::play_trial(&split, &honest_split, seed, i)?;
        let together = Revenue::combine(ids.iter().map(|p| &b.publishers[p]));
        equal &= together.net() == a.publisher_net(j);
    }
    let honest_utility = game::expected_publisher_utility(cfg, &honest, j, trials, seed)?;
    let groups = [GroupSpec { participant: Participant::Coalition(ids.clone()), members: ids.clone() }];
    let deviations = spne::search(&split, &groups, false, grid, trials, seed, epsilon_se)?;
    let (best, verdict) = spne::summarize(&deviations, epsilon_se);
    Ok(SybilReport {
        publisher: j,
        identities: ids,
        partition: partition.to_vec(),
        honest_traces_equal: equal,
        honest_utility,
        best,
        verdict,
        deviations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{BribeForSolo, BribeToSkip, Honest, IncludeNothing, Withhold};
    use crate::protocol::EpochConfig;
    use crate::rvalue::RandomValueSpec;

    fn cfg(counts: &[u32]) -> GameConfig {
        let spec = RandomValueSpec::logarithmic(1.0, 2.0).unwrap();
        GameConfig::new(EpochConfig::new(2, 1, spec).unwrap(), counts, 4).unwrap()
    }

    #[test]
    fn transform_merges_reports() {
        let c = cfg(&[1, 1, 2]);
        let (m, map) = coalition_transform(&c, &[PublisherId(1), PublisherId(0)]).unwrap();
        assert_eq!(map.merged, PublisherId(0));
        assert_eq!(m.roster, vec![PublisherId(0), PublisherId(2)]);
        assert_eq!(m.report_count(PublisherId(0)), 2);
        assert_eq!(m.report_count(PublisherId(2)), 2);
        let ids: Vec<_> = m.reports.iter().map(Report::id).collect();
        assert_eq!(ids, c.reports.iter().map(Report::id).collect::<Vec<_>>());
        assert!(coalition_transform(&c, &[]).is_err());
        assert!(coalition_transform(&c, &[PublisherId(7)]).is_err());
    }

    #[test]
    fn honest_members_merge_to_honest_action() {
        let c = cfg(&[1, 1]);
        let (m, map) = coalition_transform(&c, &[PublisherId(0), PublisherId(1)]).unwrap();
        let p = transform_profile(&StrategyProfile::honest(&c), &map).unwrap();
        let view = PublisherView {
            step: 1,
            window: 2,
            publisher: map.merged,
            reports: &m.reports,
            history: &[],
            spec: m.spec(),
        };
        let b = p.publishers[&map.merged].act(&view);
        assert_eq!(b.reports().count(), 2);
        assert!(b.bribe.is_empty());
    }

    #[test]
    fn merged_revenues_match_exactly() {
        let c = cfg(&[2, 1, 2]);
        let strategies: Vec<Arc<dyn PublisherStrategy>> = vec![
            Arc::new(Honest),
            Arc::new(Withhold { keep: 1 }),
            Arc::new(BribeToSkip { amount: 2.5, steps: 1 }),
            Arc::new(BribeForSolo { amount: 1.5 }),
        ];
        for (k, a) in strategies.iter().enumerate() {
            let b = &strategies[(k + 1) % strategies.len()];
            let profile = StrategyProfile::honest(&c)
                .with_publisher(PublisherId(0), a.clone())
                .with_publisher(PublisherId(2), b.clone());
            let r =
                check_coalition_equivalence(&c, &[PublisherId(0), PublisherId(2)], &profile, 300, k as u64).unwrap();
            assert!(r.holds(), "{r:?}");
        }
        let profile = StrategyProfile::honest(&c).with_validator(Arc::new(IncludeNothing));
        assert!(check_coalition_equivalence(&c, &[PublisherId(1), PublisherId(0)], &profile, 50, 0).unwrap().holds());
    }

    #[test]
    fn pub_val_collusion_does_not_pay() {
        let c = cfg(&[2, 2]);
        let r = check_pub_val_collusion(&c, &[PublisherId(0)], 5000, 1).unwrap();
        assert!(r.holds, "{r:?}");
        assert_eq!(r.honest, r.best);
    }

    #[test]
    fn pub_val_collusion_pays_without_skipping_resistance() {
        let spec = RandomValueSpec::logarithmic(0.4, 2.0).unwrap();
        let c = GameConfig::new(EpochConfig::new(2, 1, spec).unwrap(), &[2, 2], 4).unwrap();
        let r = check_pub_val_collusion(&c, &[PublisherId(0), PublisherId(1)], 5000, 1).unwrap();
        assert!(!r.holds);
        assert!(r.best.mean > r.honest.mean);
    }

    #[test]
    fn sybil_split_validates_partition() {
        let c = cfg(&[2, 2]);
        let ids: Vec<ReportId> = c.reports_of(PublisherId(0)).iter().map(Report::id).collect();
        let (s, new) = sybil_split(&c, PublisherId(0), &[vec![ids[0]], vec![ids[1]]]).unwrap();
        assert_eq!(new, vec![PublisherId(2), PublisherId(3)]);
        assert_eq!(s.roster, vec![PublisherId(1), PublisherId(2), PublisherId(3)]);
        assert!(sybil_split(&c, PublisherId(0), &[vec![ids[0]]]).is_err());
        assert!(sybil_split(&c, PublisherId(0), &[vec![ids[0]], vec![]]).is_err());
        assert!(sybil_split(&c, PublisherId(0), &[vec![ids[0], ids[0]], vec![ids[1]]]).is_err());
    }

    #[test]
    fn sybil_identities_gain_nothing() {
        let c = cfg(&[2, 2]);
        let ids: Vec<ReportId> = c.reports_of(PublisherId(0)).iter().map(Report::id).collect();
        let r = check_sybil_proofness(
            &c,
            PublisherId(0),
            &[vec![ids[0]], vec![ids[1]]],
            &ActionGrid::default(),
            3.0,
            3000,
            2,
        )
        .unwrap();
        assert!(r.honest_traces_equal);
        assert!(r.holds(), "{:?}", r.verdict);
    }
}
