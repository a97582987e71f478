//! Grid search for profitable one-step deviations.
//!
//! Each step of the publication window is checked as a subgame in which
//! nothing has been included yet. A deviation changes one step's actions;
//! later steps are valued at their honest expectation, `(n_j / N) RAllPub(N)`
//! for a group owning `n_j` of the `N` reports, which is exact because an
//! honest step always ends the epoch.
//!
//! Bribes are contingent on the random string, so a bribing deviation picks
//! per string whether to offer the bribe and, for reordering, which vector
//! to pay for. Every deviation is scored against honest play on the same
//! string, and the paired differences give the mean gain and its standard
//! error.

use serde::Serialize;

use crate::analysis::grid::{self, ActionGrid, BribeLevel, MAX_REPORTS, MAX_STEPS};
use crate::analysis::scene::{Roster, Scene};
use crate::error::AnalysisError;
use crate::game::{trial_seed, GameConfig};
use crate::rvalue::{MonotonicityVerdict, PropertyCheckConfig, RandomValueSpec, SkippingVerdict};
use crate::stats::{self, Estimate};
use crate::types::{Digest256, Money, PublisherId, ReportId, ValidatorId};

/// Improvements smaller than this are treated as ties when choosing
/// whether to exercise a string-contingent option.
const CHOICE_TOL: f64 = 1e-9;

/// Who deviates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum Participant {
    Publisher(PublisherId),
    /// Publishers acting as one, with pooled reports and bribes.
    Coalition(Vec<PublisherId>),
    Validator(ValidatorId),
}

impl std::fmt::Display for Participant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Participant::Publisher(p) => write!(f, "{p}"),
            Participant::Coalition(ms) => {
                let names: Vec<String> = ms.iter().map(ToString::to_string).collect();
                write!(f, "{{{}}}", names.join("+"))
            }
            Participant::Validator(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviationKind {
    /// Publish only `kept`, no bribe.
    WithholdSubset {
        kept: Vec<ReportId>,
    },
    /// Publish `kept` and, on strings where it pays, bribe for an empty block.
    BribeToSkip {
        kept: Vec<ReportId>,
        amount: BribeLevel,
    },
    /// Publish `kept` and, on strings where it pays, bribe for the most
    /// profitable other vector.
    BribeToReorder {
        kept: Vec<ReportId>,
        amount: BribeLevel,
    },
    /// Validator picks its best non-honest vector on every string.
    Inclusion,
    CoalitionMerge {
        members: Vec<PublisherId>,
    },
    SybilSplit {
        partition: Vec<Vec<ReportId>>,
    },
}

impl DeviationKind {
    pub fn name(&self) -> &'static str {
        match self {
            DeviationKind::WithholdSubset { .. } => "withhold",
            DeviationKind::BribeToSkip { .. } => "bribe-to-skip",
            DeviationKind::BribeToReorder { .. } => "bribe-to-reorder",
            DeviationKind::Inclusion => "inclusion",
            DeviationKind::CoalitionMerge { .. } => "coalition-merge",
            DeviationKind::SybilSplit { .. } => "sybil-split",
        }
    }

    /// Compact label for tables.
    pub fn describe(&self) -> String {
        fn ids(v: &[ReportId]) -> String {
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
        }
        match self {
            DeviationKind::WithholdSubset { kept } => format!("withhold kept=[{}]", ids(kept)),
            DeviationKind::BribeToSkip { kept, amount } => {
                format!("bribe-to-skip kept=[{}] amount={}", ids(kept), amount.label())
            }
            DeviationKind::BribeToReorder { kept, amount } => {
                format!("bribe-to-reorder kept=[{}] amount={}", ids(kept), amount.label())
            }
            DeviationKind::Inclusion => "inclusion".into(),
            DeviationKind::CoalitionMerge { members } => {
                format!("coalition-merge {}", Participant::Coalition(members.clone()))
            }
            DeviationKind::SybilSplit { partition } => {
                let parts: Vec<String> = partition.iter().map(|p| format!("[{}]", ids(p))).collect();
                format!("sybil-split {}", parts.join(" "))
            }
        }
    }
}

/// Paired estimate of one deviation's gain over honest play.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationResult {
    pub participant: Participant,
    pub step: u64,
    pub kind: DeviationKind,
    pub delta: Estimate,
    /// Share of random strings on which the deviating action was taken.
    pub exercised: f64,
    pub profitable: bool,
}

impl DeviationResult {
    fn margin(&self, k: f64) -> f64 {
        self.delta.mean - k * self.delta.std_err
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// No grid deviation gains more than `epsilon_se` standard errors.
    NoProfitableDeviation {
        epsilon_se: f64,
    },
    Violation {
        witness: Box<DeviationResult>,
    },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::NoProfitableDeviation { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceSummary {
    pub spec: RandomValueSpec,
    pub t_total: u64,
    pub t_pub: u64,
    pub window: u64,
    pub reports: Vec<(PublisherId, usize)>,
    pub seed: u64,
}

impl InstanceSummary {
    pub fn of(cfg: &GameConfig) -> Self {
        Self {
            spec: *cfg.spec(),
            t_total: cfg.epoch.t_total,
            t_pub: cfg.epoch.t_pub,
            window: cfg.epoch.window(),
            reports: cfg.roster.iter().map(|&p| (p, cfg.report_count(p))).collect(),
            seed: cfg.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertySummary {
    pub monotonicity: MonotonicityVerdict,
    pub skipping_resistance: SkippingVerdict,
}

pub const SCOPE: &str = "grid-relative: no profitable deviation within the pivotal bribe grid and \
                         vectors of at most the grid length; not a certificate over continuous strategies";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub instance: InstanceSummary,
    pub scope: &'static str,
    pub grid: ActionGrid,
    pub trials: u64,
    pub seed: u64,
    /// Properties are reported, not required: breaking them is how the
    /// search is shown to find violations.
    pub properties: PropertySummary,
    pub best: Option<DeviationResult>,
    pub verdict: Verdict,
    pub deviations: Vec<DeviationResult>,
}

/// A set of publishers searched as one deviator.
#[derive(Debug, Clone)]
pub(crate) struct GroupSpec {
    pub participant: Participant,
    pub members: Vec<PublisherId>,
}

impl GroupSpec {
    pub fn single(p: PublisherId) -> Self {
        Self { participant: Participant::Publisher(p), members: vec![p] }
    }

    pub fn coalition(members: Vec<PublisherId>) -> Self {
        Self { participant: Participant::Coalition(members.clone()), members }
    }
}

struct Group {
    in_group: Vec<bool>,
    own: Vec<usize>,
    cont: Money,
    subsets: Vec<Vec<bool>>,
}

#[derive(Clone, Copy)]
enum Family {
    Skip(BribeLevel),
    Reorder(BribeLevel),
}

pub(crate) fn check_budget(cfg: &GameConfig, grid: &ActionGrid) -> Result<(), AnalysisError> {
    grid.validate()?;
    if cfg.total_reports() > MAX_REPORTS {
        return Err(AnalysisError::OverBudget(format!("{} reports (limit {MAX_REPORTS})", cfg.total_reports())));
    }
    if cfg.epoch.window() > MAX_STEPS {
        return Err(AnalysisError::OverBudget(format!("{} steps (limit {MAX_STEPS})", cfg.epoch.window())));
    }
    Ok(())
}

/// Scores every grid deviation of every group, plus validator deviations
/// when `validators` is set, over `trials` random strings per step.
pub(crate) fn search(
    cfg: &GameConfig,
    groups: &[GroupSpec],
    validators: bool,
    grid: &ActionGrid,
    trials: u64,
    seed: u64,
    k_sigma: f64,
) -> Result<Vec<DeviationResult>, AnalysisError> {
    check_budget(cfg, grid)?;
    if trials == 0 {
        return Err(AnalysisError::Invalid("trials must be >= 1".into()));
    }
    let roster = Roster::new(cfg);
    let n = roster.len();
    let m = cfg.epoch.window();
    let rallpub = if n > 0 { cfg.spec().rallpub_closed_form(n as u64)? } else { 0.0 };

    let built: Vec<Group> = groups
        .iter()
        .map(|g| {
            let in_group: Vec<bool> = roster.owners.iter().map(|o| g.members.contains(o)).collect();
            let own: Vec<usize> = (0..n).filter(|&i| in_group[i]).collect();
            let subsets = grid::subsets(own.len())
                .into_iter()
                .map(|mask| {
                    let mut published: Vec<bool> = in_group.iter().map(|&x| !x).collect();
                    for (bit, &i) in own.iter().enumerate() {
                        published[i] = mask & (1 << bit) != 0;
                    }
                    published
                })
                .collect();
            let cont = if n > 0 { own.len() as f64 / n as f64 * rallpub } else { 0.0 };
            Group { in_group, own, cont, subsets }
        })
        .collect();

    let mut families = vec![];
    for level in &grid.bribe_levels {
        families.push(Family::Skip(*level));
        families.push(Family::Reorder(*level));
    }

    // Deviation catalogue, in the order the trial closure writes them.
    let mut catalogue = Vec::new();
    for step in 1..=m {
        for (spec, g) in groups.iter().zip(&built) {
            for (si, published) in g.subsets.iter().enumerate() {
                let kept: Vec<ReportId> =
                    g.own.iter().filter(|&&i| published[i]).map(|&i| cfg.reports[i].id()).collect();
                if si > 0 {
                    catalogue.push((
                        spec.participant.clone(),
                        step,
                        DeviationKind::WithholdSubset { kept: kept.clone() },
                    ));
                }
                for f in &families {
                    let kind = match *f {
                        Family::Skip(amount) => DeviationKind::BribeToSkip { kept: kept.clone(), amount },
                        Family::Reorder(amount) => DeviationKind::BribeToReorder { kept: kept.clone(), amount },
                    };
                    catalogue.push((spec.participant.clone(), step, kind));
                }
            }
        }
        if validators {
            catalogue.push((Participant::Validator(ValidatorId(step as u32 - 1)), step, DeviationKind::Inclusion));
        }
    }
    let d = catalogue.len();

    let payloads: Vec<Digest256> = cfg.reports.iter().map(|r| *r.payload_digest()).collect();
    let selections: Vec<Vec<Vec<usize>>> = (0..=n).map(|k| grid::ordered_selections(k, grid.max_len)).collect();
    let all = vec![true; n];

    let acc = stats::monte_carlo(trials, 2 * d, |i, out| {
        let (delta, used) = out.split_at_mut(d);
        let mut idx = 0;
        let epoch_seed = trial_seed(seed, i);
        for step in 1..=m {
            let s = cfg.random_string(epoch_seed, step);
            let scene = Scene::new(&roster, &payloads, &s);
            let h = scene.honest(&all);
            let last = step == m;
            for g in &built {
                let cont = if last { 0.0 } else { g.cont };
                let honest = scene.group_reward(&h, &g.in_group);
                for (si, published) in g.subsets.iter().enumerate() {
                    let v0 = scene.honest(published);
                    let c0 = scene.contract(&v0);
                    let p0 = scene.group_reward(&v0, &g.in_group) + if v0.is_empty() { cont } else { 0.0 };
                    if si > 0 {
                        delta[idx] = p0 - honest;
                        used[idx] = 1.0;
                        idx += 1;
                    }
                    let second = scene.second(published);
                    let listed: Vec<usize> = (0..n).filter(|&j| published[j]).collect();
                    let cands: Vec<(Money, Money)> = selections[listed.len()]
                        .iter()
                        .filter(|sel| !sel.is_empty())
                        .map(|sel| sel.iter().map(|&k| listed[k]).collect::<Vec<_>>())
                        .filter(|raw| *raw != v0)
                        .map(|raw| (scene.contract(&raw), scene.group_reward(&raw, &g.in_group)))
                        .collect();
                    for level in &grid.bribe_levels {
                        let b = level.resolve(scene.r_min, second);
                        // Skip.
                        let mut best = p0;
                        if !v0.is_empty() && b > c0 && cont - b > p0 + CHOICE_TOL {
                            best = cont - b;
                            used[idx] = 1.0;
                        }
                        delta[idx] = best - honest;
                        idx += 1;
                        // Reorder.
                        let mut best = p0;
                        for &(c, r) in &cands {
                            if c + b > c0 && r - b > best + CHOICE_TOL {
                                best = r - b;
                                used[idx] = 1.0;
                            }
                        }
                        delta[idx] = best - honest;
                        idx += 1;
                    }
                }
            }
            if validators {
                let ch = scene.contract(&h);
                let best = selections[n]
                    .iter()
                    .filter(|sel| **sel != h)
                    .map(|sel| scene.contract(sel))
                    .fold(f64::NEG_INFINITY, f64::max);
                delta[idx] = if best.is_finite() { best - ch } else { 0.0 };
                used[idx] = 1.0;
                idx += 1;
            }
        }
        debug_assert_eq!(idx, d);
    });

    Ok(catalogue
        .into_iter()
        .enumerate()
        .map(|(k, (participant, step, kind))| {
            let delta = acc[k].estimate();
            DeviationResult {
                participant,
                step,
                kind,
                delta,
                exercised: acc[d + k].estimate().mean,
                profitable: delta.mean > k_sigma * delta.std_err + 1e-12,
            }
        })
        .collect())
}

/// Best deviation and verdict over a list of results.
pub(crate) fn summarize(results: &[DeviationResult], k_sigma: f64) -> (Option<DeviationResult>, Verdict) {
    let mut best: Option<&DeviationResult> = None;
    let mut witness: Option<&DeviationResult> = None;
    for r in results {
        if best.is_none_or(|b| r.delta.mean > b.delta.mean) {
            best = Some(r);
        }
        if r.profitable && witness.is_none_or(|w| r.margin(k_sigma) > w.margin(k_sigma)) {
            witness = Some(r);
        }
    }
    match witness {
        Some(w) => (Some(w.clone()), Verdict::Violation { witness: Box::new(w.clone()) }),
        None => (best.cloned(), Verdict::NoProfitableDeviation { epsilon_se: k_sigma }),
    }
}

/// Publisher groups searched by [`verify_spne`]: every publisher alone and
/// every coalition of two or more publishers that own reports.
pub(crate) fn default_groups(cfg: &GameConfig) -> Vec<GroupSpec> {
    let mut groups: Vec<GroupSpec> = cfg.roster.iter().map(|&p| GroupSpec::single(p)).collect();
    let owning: Vec<PublisherId> = cfg.roster.iter().copied().filter(|&p| cfg.report_count(p) > 0).collect();
    for mask in 1u32..(1 << owning.len()) {
        if mask.count_ones() >= 2 {
            let members = owning.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, &p)| p).collect();
            groups.push(GroupSpec::coalition(members));
        }
    }
    groups
}

/// Checks that no grid deviation by a publisher, a coalition of publishers,
/// or a validator improves expected utility by more than `epsilon_se`
/// standard errors of its paired estimate.
///
/// Coalitions are included because a coalition is strategically the same
/// as one publisher owning all of its reports, which is itself an instance
/// the equilibrium claim covers.
pub fn verify_spne(
    cfg: &GameConfig,
    grid: &ActionGrid,
    epsilon_se: f64,
    trials: u64,
    seed: u64,
) -> Result<EquilibriumReport, AnalysisError> {
    let groups = default_groups(cfg);
    let deviations = search(cfg, &groups, true, grid, trials, seed, epsilon_se)?;
    let (best, verdict) = summarize(&deviations, epsilon_se);
    let n_max = cfg.total_reports().max(1) as u64;
    let pc = PropertyCheckConfig::new(n_max);
    Ok(EquilibriumReport {
        instance: InstanceSummary::of(cfg),
        scope: SCOPE,
        grid: grid.clone(),
        trials,
        seed,
        properties: PropertySummary {
            monotonicity: cfg.spec().check_reward_monotonicity(&pc)?,
            skipping_resistance: cfg.spec().check_skipping_resistance(&pc)?,
        },
        best,
        verdict,
        deviations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::EpochConfig;

    fn cfg(spec: RandomValueSpec, counts: &[u32], t_total: u64) -> GameConfig {
        GameConfig::new(EpochConfig::new(t_total, 1, spec).unwrap(), counts, 1).unwrap()
    }

    #[test]
    fn single_report_has_no_profitable_deviation() {
        let c = cfg(RandomValueSpec::logarithmic(1.0, 2.0).unwrap(), &[1], 2);
        let r = verify_spne(&c, &ActionGrid::default(), 3.0, 2000, 4).unwrap();
        assert!(r.verdict.holds(), "{:?}", r.verdict);
        // Bribes only subtract from the reward.
        for d in &r.deviations {
            if matches!(d.participant, Participant::Publisher(_)) && d.step == 2 {
                assert!(d.delta.mean <= 0.0);
            }
        }
    }

    #[test]
    fn validator_deviations_never_gain() {
        let c = cfg(RandomValueSpec::logarithmic(1.0, 2.0).unwrap(), &[2, 1], 2);
        let r = verify_spne(&c, &ActionGrid::default(), 3.0, 1000, 9).unwrap();
        for d in r.deviations.iter().filter(|d| matches!(d.participant, Participant::Validator(_))) {
            assert!(d.delta.mean < 0.0);
        }
    }

    #[test]
    fn over_budget_is_refused() {
        let c = cfg(RandomValueSpec::logarithmic(1.0, 2.0).unwrap(), &[4, 3], 2);
        assert!(matches!(verify_spne(&c, &ActionGrid::default(), 3.0, 10, 0), Err(AnalysisError::OverBudget(_))));
        let c = cfg(RandomValueSpec::logarithmic(1.0, 2.0).unwrap(), &[1], 4);
        assert!(matches!(verify_spne(&c, &ActionGrid::default(), 3.0, 10, 0), Err(AnalysisError::OverBudget(_))));
    }

    #[test]
    fn catalogue_covers_coalitions() {
        let c = cfg(RandomValueSpec::logarithmic(1.0, 2.0).unwrap(), &[2, 2, 0], 1);
        let groups = default_groups(&c);
        let names: Vec<String> = groups.iter().map(|g| g.participant.to_string()).collect();
        assert_eq!(names, vec!["P0", "P1", "P2", "{P0+P1}"]);
    }

    #[test]
    fn withholding_found_when_monotonicity_fails() {
        let spec = RandomValueSpec::polarized(0.6, 2.0, 4.0).unwrap();
        let c = cfg(spec, &[2, 2], 2);
        let r = verify_spne(&c, &ActionGrid::default(), 3.0, 20_000, 3).unwrap();
        assert!(!r.properties.monotonicity.holds);
        assert!(r.properties.skipping_resistance.holds);
        assert!(!r.verdict.holds());
        let solo = r
            .deviations
            .iter()
            .find(|d| {
                d.participant == Participant::Publisher(PublisherId(0))
                    && d.step == 2
                    && matches!(&d.kind, DeviationKind::WithholdSubset { kept } if kept.len() == 1)
            })
            .unwrap();
        assert!(solo.profitable);
        // Keeping one of two reports: 1/3 * RAllPub(3) against 1/2 * RAllPub(4).
        let expected = 0.576 / 3.0 - 0.3072 / 2.0;
        assert!(solo.delta.within(expected, 4.0), "{:?} vs {expected}", solo.delta);
    }
}
