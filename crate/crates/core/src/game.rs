//! The sequential reporting game and its epoch engine.
//!
//! Validators are analysed on *reformulated* inclusion vectors: every block
//! that is not a clean two-report standard block gets a dummy worth `r_min`
//! inserted after its first entry. With that convention the contract pays
//! the validator the second entry's value when the vector has exactly two
//! entries and nothing otherwise, and the first entry's owner receives the
//! gap between the first two entries.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{GameError, SpecError};
use crate::oracle;
use crate::protocol::{self, EpochConfig, PublicationBundle, RewardLedger};
use crate::rvalue::{RandomValueSpec, Valuation};
use crate::seed;
use crate::stats::{self, exact_sum, Estimate};
use crate::types::{
    hex_digest, vector_key, Block, Digest256, Inclusion, Money, PublisherId, RandomString, Report, ReportMinter, Slot,
    ValidatorId, ValidatorKeys,
};
use crate::vrf;

/// One elementary offer: pay `amount` if the block's reformulated vector
/// has key `vector` (and, when `string` is set, its random string matches).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BribeEntry {
    #[serde(default, with = "opt_hex_digest", skip_serializing_if = "Option::is_none")]
    pub string: Option<Digest256>,
    pub vector: Vec<u64>,
    pub amount: Money,
}

/// A publisher's side payment as a function of the realised block.
///
/// The schedule is a sum of elementary offers; the amount owed for a block
/// is the sum of every matching entry and zero when nothing matches.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BribeSchedule {
    entries: Vec<BribeEntry>,
}

impl BribeSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, string: Option<Digest256>, vector: Vec<u64>, amount: Money) -> Result<(), GameError> {
        if !(amount >= 0.0 && amount.is_finite()) {
            return Err(GameError::NegativeBribe { publisher: u32::MAX, amount });
        }
        self.entries.push(BribeEntry { string, vector, amount });
        Ok(())
    }

    /// Offers `amount` for the reformulated vector with key `vector`,
    /// whatever the random string.
    pub fn offer(&mut self, vector: Vec<u64>, amount: Money) -> Result<(), GameError> {
        self.push(None, vector, amount)
    }

    /// Offers `amount` for `vector` only under random string `s`.
    pub fn offer_at(&mut self, s: &Digest256, vector: Vec<u64>, amount: Money) -> Result<(), GameError> {
        self.push(Some(*s), vector, amount)
    }

    pub fn with_offer(mut self, vector: Vec<u64>, amount: Money) -> Result<Self, GameError> {
        self.offer(vector, amount)?;
        Ok(self)
    }

    pub fn entries(&self) -> &[BribeEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries that apply under random string `s`.
    pub fn active<'a>(&'a self, s: &'a Digest256) -> impl Iterator<Item = &'a BribeEntry> + 'a {
        self.entries.iter().filter(move |e| e.string.as_ref().is_none_or(|x| x == s))
    }

    /// Individual payments owed for vector `key` under `s`.
    pub fn payments<'a>(&'a self, key: &'a [u64], s: &'a Digest256) -> impl Iterator<Item = Money> + 'a {
        self.active(s).filter(move |e| e.vector == key).map(|e| e.amount)
    }

    pub fn amount(&self, key: &[u64], s: &Digest256) -> Money {
        exact_sum(self.payments(key, s))
    }

    /// Adds every offer of `other` to this schedule.
    pub fn absorb(&mut self, other: &BribeSchedule) {
        self.entries.extend(other.entries.iter().cloned());
    }

    pub(crate) fn check(&self, publisher: PublisherId) -> Result<(), GameError> {
        match self.entries.iter().find(|e| !(e.amount >= 0.0 && e.amount.is_finite())) {
            Some(e) => Err(GameError::NegativeBribe { publisher: publisher.0, amount: e.amount }),
            None => Ok(()),
        }
    }
}

mod opt_hex_digest {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{hex_digest, Digest256};

    pub fn serialize<S: Serializer>(d: &Option<Digest256>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => hex_digest::serialize(d, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Digest256>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "hex_digest")] Digest256);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

/// Inserts the dummy after the first entry unless the vector is empty, is
/// already reformulated, or is a standard two-report block.
pub fn reformulate<V: Valuation + ?Sized>(raw: &[Slot], s: &RandomString, val: &V) -> Vec<Slot> {
    if raw.is_empty() || raw.get(1).is_some_and(Slot::is_dummy) {
        return raw.to_vec();
    }
    if raw.len() == 2 {
        let (v1, v2) = (val.value(&raw[0], s), val.value(&raw[1], s));
        if v1 >= v2 && v2 > val.r_min() {
            return raw.to_vec();
        }
    }
    let mut out = Vec::with_capacity(raw.len() + 1);
    out.push(raw[0].clone());
    out.push(Slot::Dummy);
    out.extend_from_slice(&raw[1..]);
    out
}

/// Inverse of [`reformulate`]: drops a dummy sitting in second position.
pub fn unreformulate(inc: &[Slot]) -> Vec<Slot> {
    let mut raw = inc.to_vec();
    if raw.get(1).is_some_and(Slot::is_dummy) {
        raw.remove(1);
    }
    raw
}

/// Contract part of the validator's utility for a reformulated vector.
pub fn validator_contract_reward<V: Valuation + ?Sized>(inc: &[Slot], s: &RandomString, val: &V) -> Money {
    if inc.len() == 2 {
        val.value(&inc[1], s)
    } else {
        0.0
    }
}

/// Contract part of the first entry owner's utility for a reformulated
/// vector, with the owner.
pub fn first_report_reward<V: Valuation + ?Sized>(
    inc: &[Slot],
    s: &RandomString,
    val: &V,
) -> Option<(PublisherId, Money)> {
    let owner = inc.first()?.owner()?;
    let second = inc.get(1).map_or(val.r_min(), |x| val.value(x, s));
    Some((owner, val.value(&inc[0], s) - second))
}

/// Validator utility: contract reward plus every publisher's bribe.
pub fn validator_utility<'a, V, I>(inc: &[Slot], bribes: I, s: &RandomString, val: &V) -> Money
where
    V: Valuation + ?Sized,
    I: IntoIterator<Item = &'a BribeSchedule>,
{
    let key = vector_key(inc);
    let mut items = vec![validator_contract_reward(inc, s, val)];
    for b in bribes {
        items.extend(b.payments(&key, &s.value));
    }
    exact_sum(items)
}

/// Step revenue of publisher `j`: the first-report reward if `j` owns the
/// first entry, minus `j`'s bribe for this vector.
pub fn publisher_step_revenue<V: Valuation + ?Sized>(
    j: PublisherId,
    bribe: &BribeSchedule,
    inc: &[Slot],
    s: &RandomString,
    val: &V,
) -> Money {
    let reward = match first_report_reward(inc, s, val) {
        Some((owner, r)) if owner == j => r,
        _ => 0.0,
    };
    reward - bribe.amount(&vector_key(inc), &s.value)
}

/// Credits and debits of one participant. Totals are exact sums of the
/// individual payments, so they do not depend on how payments are grouped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Revenue {
    credits: Vec<Money>,
    debits: Vec<Money>,
}

impl Revenue {
    pub fn credit(&mut self, x: Money) {
        self.credits.push(x);
    }

    pub fn debit(&mut self, x: Money) {
        self.debits.push(x);
    }

    /// Total received from the contract and, for validators, from bribes.
    pub fn received(&self) -> Money {
        exact_sum(self.credits.iter().copied())
    }

    /// Total paid out in bribes.
    pub fn paid(&self) -> Money {
        exact_sum(self.debits.iter().copied())
    }

    pub fn net(&self) -> Money {
        exact_sum(self.credits.iter().copied().chain(self.debits.iter().map(|d| -d)))
    }

    /// Combined revenue of several participants.
    pub fn combine<'a>(parts: impl IntoIterator<Item = &'a Revenue>) -> Revenue {
        let mut out = Revenue::default();
        for p in parts {
            out.credits.extend_from_slice(&p.credits);
            out.debits.extend_from_slice(&p.debits);
        }
        out
    }
}

impl Serialize for Revenue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Revenue", 3)?;
        st.serialize_field("received", &self.received())?;
        st.serialize_field("paid", &self.paid())?;
        st.serialize_field("net", &self.net())?;
        st.end()
    }
}

/// Publishers and their reports for one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub epoch: EpochConfig,
    pub roster: Vec<PublisherId>,
    pub reports: Vec<Report>,
    pub seed: u64,
}

impl GameConfig {
    /// Roster `0..counts.len()`; publisher `i` owns `counts[i]` reports
    /// minted in roster order from `seed`.
    pub fn new(epoch: EpochConfig, counts: &[u32], seed: u64) -> Result<Self, SpecError> {
        epoch.validate()?;
        let mut minter = ReportMinter::new();
        let mut reports = Vec::new();
        for (i, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                reports.push(minter.mint_seeded(PublisherId(i as u32), seed));
            }
        }
        let roster = (0..counts.len() as u32).map(PublisherId).collect();
        Ok(Self { epoch, roster, reports, seed })
    }

    pub fn spec(&self) -> &RandomValueSpec {
        &self.epoch.spec
    }

    pub fn reports_of(&self, j: PublisherId) -> Vec<Report> {
        self.reports.iter().filter(|r| r.owner() == j).cloned().collect()
    }

    pub fn report_count(&self, j: PublisherId) -> usize {
        self.reports.iter().filter(|r| r.owner() == j).count()
    }

    pub fn total_reports(&self) -> usize {
        self.reports.len()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Beacon of absolute block `index` under epoch seed `seed`.
    pub fn beacon(seed: u64, index: u64) -> Digest256 {
        oracle::digest(&[b"beacon", &seed.to_be_bytes(), &index.to_be_bytes()])
    }

    /// Keys of the validator producing absolute block `index`.
    pub fn validator_keys(seed: u64, index: u64) -> ValidatorKeys {
        ValidatorKeys::derive(seed, index)
    }

    /// Random string of window step `step` under epoch seed `seed`.
    pub fn random_string(&self, seed: u64, step: u64) -> RandomString {
        let index = self.epoch.block_index(step);
        vrf::generate(&Self::beacon(seed, index), &Self::validator_keys(seed, index))
    }
}

/// What a publisher sees when it acts.
#[derive(Debug, Clone, Copy)]
pub struct PublisherView<'a> {
    pub step: u64,
    pub window: u64,
    pub publisher: PublisherId,
    pub reports: &'a [Report],
    pub history: &'a [StepRecord],
    pub spec: &'a RandomValueSpec,
}

/// What a validator sees when it builds a block.
#[derive(Debug, Clone, Copy)]
pub struct ValidatorView<'a> {
    pub step: u64,
    pub bundles: &'a [(PublisherId, PublicationBundle)],
    pub s: &'a RandomString,
    pub spec: &'a RandomValueSpec,
}

impl ValidatorView<'_> {
    pub fn published(&self) -> Vec<protocol::Transaction> {
        self.bundles.iter().flat_map(|(_, b)| b.transactions.iter().cloned()).collect()
    }

    pub fn schedules(&self) -> impl Iterator<Item = &BribeSchedule> {
        self.bundles.iter().map(|(_, b)| &b.bribe)
    }
}

pub trait PublisherStrategy: Send + Sync + fmt::Debug {
    fn act(&self, view: &PublisherView) -> PublicationBundle;
}

/// Returns the raw inclusion vector (no dummy).
pub trait ValidatorStrategy: Send + Sync + fmt::Debug {
    fn include(&self, view: &ValidatorView) -> Vec<Report>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Honest;

impl PublisherStrategy for Honest {
    fn act(&self, view: &PublisherView) -> PublicationBundle {
        protocol::honest_publish(view.reports)
    }
}

impl ValidatorStrategy for Honest {
    fn include(&self, view: &ValidatorView) -> Vec<Report> {
        protocol::honest_include(&view.published(), view.s, view.spec).into_iter().map(|t| t.report).collect()
    }
}

/// Publishes only the first `keep` reports (by id), every step.
#[derive(Debug, Clone, Copy)]
pub struct Withhold {
    pub keep: usize,
}

impl PublisherStrategy for Withhold {
    fn act(&self, view: &PublisherView) -> PublicationBundle {
        let mut own = view.reports.to_vec();
        own.sort_by_key(Report::id);
        own.truncate(self.keep);
        protocol::honest_publish(&own)
    }
}

/// Publishes everything and offers `amount` for an empty block during the
/// first `steps` steps of the window.
#[derive(Debug, Clone, Copy)]
pub struct BribeToSkip {
    pub amount: Money,
    pub steps: u64,
}

impl PublisherStrategy for BribeToSkip {
    fn act(&self, view: &PublisherView) -> PublicationBundle {
        let mut bundle = protocol::honest_publish(view.reports);
        if view.step <= self.steps {
            bundle.bribe =
                BribeSchedule::new().with_offer(Vec::new(), self.amount).expect("amount validated at construction");
        }
        bundle
    }
}

/// Publishes everything and offers `amount` for any block that includes
/// one of its own reports alone.
#[derive(Debug, Clone, Copy)]
pub struct BribeForSolo {
    pub amount: Money,
}

impl PublisherStrategy for BribeForSolo {
    fn act(&self, view: &PublisherView) -> PublicationBundle {
        let mut bundle = protocol::honest_publish(view.reports);
        for r in view.reports {
            bundle
                .bribe
                .offer(vec![r.id().0, crate::types::DUMMY_KEY], self.amount)
                .expect("amount validated at construction");
        }
        bundle
    }
}

/// Always produces an empty block.
#[derive(Debug, Clone, Copy, Default)]
pub struct IncludeNothing;

impl ValidatorStrategy for IncludeNothing {
    fn include(&self, _view: &ValidatorView) -> Vec<Report> {
        Vec::new()
    }
}

/// Utility-maximising validator over raw vectors of at most `max_len`
/// reports. Ties go to the honest vector, then to the smallest
/// reformulated key.
///
/// Only the honest vector and vectors named in some bribe schedule can be
/// optimal: without a bribe no vector earns more from the contract than the
/// honest one. This strategy therefore scores just those.
#[derive(Debug, Clone, Copy)]
pub struct BestResponse {
    pub max_len: usize,
}

impl Default for BestResponse {
    fn default() -> Self {
        Self { max_len: 3 }
    }
}

impl ValidatorStrategy for BestResponse {
    fn include(&self, view: &ValidatorView) -> Vec<Report> {
        let published: Vec<Report> = view.published().into_iter().map(|t| t.report).collect();
        let schedules: Vec<&BribeSchedule> = view.schedules().collect();
        best_response_fast(&published, &schedules, view.s, view.spec, self.max_len)
            .into_iter()
            .filter_map(|s| s.report().cloned())
            .collect()
    }
}

/// Honest vector, reformulated.
pub fn honest_vector<V: Valuation + ?Sized>(published: &[Report], s: &RandomString, val: &V) -> Vec<Slot> {
    let txs = protocol::honest_publish(published).transactions;
    let raw: Vec<Slot> = protocol::honest_include(&txs, s, val).into_iter().map(|t| Slot::Report(t.report)).collect();
    reformulate(&raw, s, val)
}

/// Reformulated vector with key `key` if it is reachable by including at
/// most `max_len` distinct published reports.
pub fn realize_key<V: Valuation + ?Sized>(
    key: &[u64],
    published: &[Report],
    s: &RandomString,
    val: &V,
    max_len: usize,
) -> Option<Vec<Slot>> {
    let mut raw = Vec::with_capacity(key.len());
    let mut seen = HashSet::new();
    for (i, &k) in key.iter().enumerate() {
        if k == crate::types::DUMMY_KEY {
            if i != 1 {
                return None;
            }
            continue;
        }
        if !seen.insert(k) {
            return None;
        }
        raw.push(Slot::Report(published.iter().find(|r| r.id().0 == k)?.clone()));
    }
    if raw.len() > max_len {
        return None;
    }
    let inc = reformulate(&raw, s, val);
    (vector_key(&inc) == key).then_some(inc)
}

/// Best response restricted to the honest vector and bribed vectors.
pub fn best_response_fast<V: Valuation + ?Sized>(
    published: &[Report],
    schedules: &[&BribeSchedule],
    s: &RandomString,
    val: &V,
    max_len: usize,
) -> Vec<Slot> {
    let honest = honest_vector(published, s, val);
    let mut best_u = validator_utility(&honest, schedules.iter().copied(), s, val);
    let mut best: Option<(Vec<u64>, Vec<Slot>)> = None;
    let honest_key = vector_key(&honest);
    let mut tried = HashSet::new();
    for sch in schedules {
        for e in sch.active(&s.value) {
            if e.vector == honest_key || !tried.insert(e.vector.clone()) {
                continue;
            }
            let Some(inc) = realize_key(&e.vector, published, s, val, max_len) else {
                continue;
            };
            let u = validator_utility(&inc, schedules.iter().copied(), s, val);
            let better = u > best_u || (u == best_u && best.as_ref().is_some_and(|(k, _)| e.vector < *k));
            if better {
                best_u = u;
                best = Some((e.vector.clone(), inc));
            }
        }
    }
    best.map_or(honest, |(_, inc)| inc)
}

/// Strategies for every participant of a game.
#[derive(Debug, Clone)]
pub struct StrategyProfile {
    pub publishers: BTreeMap<PublisherId, Arc<dyn PublisherStrategy>>,
    pub validator: Arc<dyn ValidatorStrategy>,
}

impl StrategyProfile {
    /// Everybody honest; validators best-respond.
    pub fn honest(cfg: &GameConfig) -> Self {
        Self {
            publishers: cfg.roster.iter().map(|&p| (p, Arc::new(Honest) as Arc<dyn PublisherStrategy>)).collect(),
            validator: Arc::new(BestResponse::default()),
        }
    }

    pub fn with_publisher(mut self, j: PublisherId, s: Arc<dyn PublisherStrategy>) -> Self {
        self.publishers.insert(j, s);
        self
    }

    pub fn with_validator(mut self, v: Arc<dyn ValidatorStrategy>) -> Self {
        self.validator = v;
        self
    }
}

/// Everything that happened in one step.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub validator: ValidatorId,
    pub bundles: Vec<(PublisherId, PublicationBundle)>,
    pub block: Block,
    pub reformulated: Vec<u64>,
    pub ledger: RewardLedger,
    pub bribes: BTreeMap<PublisherId, Money>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochOutcome {
    pub steps: Vec<StepRecord>,
    pub publishers: BTreeMap<PublisherId, Revenue>,
    pub validators: BTreeMap<ValidatorId, Revenue>,
    pub terminated_at: Option<u64>,
}

impl EpochOutcome {
    pub fn publisher_net(&self, j: PublisherId) -> Money {
        self.publishers.get(&j).map_or(0.0, Revenue::net)
    }

    pub fn validator_total(&self) -> Money {
        exact_sum(self.validators.values().map(Revenue::net))
    }

    /// Real reports included over the whole epoch.
    pub fn included_reports(&self) -> usize {
        self.steps.iter().map(|s| s.block.inclusions.iter().filter(|i| !i.slot.is_dummy()).count()).sum()
    }
}

/// Plays one epoch with beacons and validator keys drawn from `cfg.seed`.
pub fn play_epoch(cfg: &GameConfig, profile: &StrategyProfile) -> Result<EpochOutcome, GameError> {
    let spec = cfg.spec();
    let window = cfg.epoch.window();
    let owned: BTreeMap<PublisherId, Vec<Report>> = cfg.roster.iter().map(|&p| (p, cfg.reports_of(p))).collect();
    let mut out = EpochOutcome {
        steps: Vec::new(),
        publishers: cfg.roster.iter().map(|&p| (p, Revenue::default())).collect(),
        validators: BTreeMap::new(),
        terminated_at: None,
    };
    for step in 1..=window {
        let index = cfg.epoch.block_index(step);
        let beacon = GameConfig::beacon(cfg.seed, index);
        let mut bundles = Vec::with_capacity(cfg.roster.len());
        for &j in &cfg.roster {
            let strategy = profile.publishers.get(&j).ok_or(GameError::MissingStrategy(j.0))?;
            let view = PublisherView { step, window, publisher: j, reports: &owned[&j], history: &out.steps, spec };
            let bundle = strategy.act(&view);
            for r in bundle.reports() {
                if !owned[&j].contains(r) {
                    return Err(GameError::ForeignReport { publisher: j.0, report: r.id().0 });
                }
            }
            bundle.bribe.check(j)?;
            bundles.push((j, bundle));
        }

        let keys = GameConfig::validator_keys(cfg.seed, index);
        let s = vrf::generate(&beacon, &keys);
        let view = ValidatorView { step, bundles: &bundles, s: &s, spec };
        let raw = profile.validator.include(&view);

        let mut seen = HashSet::new();
        let mut inclusions = Vec::with_capacity(raw.len());
        for r in &raw {
            if !seen.insert(r.id()) {
                return Err(GameError::DuplicateInclusion(r.id().0));
            }
            let tx = bundles
                .iter()
                .flat_map(|(_, b)| b.transactions.iter())
                .find(|t| t.report == *r)
                .ok_or(GameError::UnpublishedReport(r.id().0))?;
            inclusions.push(Inclusion::new(r.clone(), tx.bid));
        }
        let block = Block { index, beacon, random_string: s.clone(), inclusions };
        let ledger = protocol::process_block(&block, keys.public(), spec);
        let reformulated = reformulate(&block.slots(), &s, spec);
        let key = vector_key(&reformulated);

        let vid = ValidatorId(step as u32 - 1);
        let vrev = out.validators.entry(vid).or_default();
        vrev.credit(ledger.validator_reward);
        let mut paid = BTreeMap::new();
        for (j, bundle) in &bundles {
            let prev = out.publishers.get_mut(j).expect("roster member");
            let mut total = Vec::new();
            for x in bundle.bribe.payments(&key, &s.value) {
                prev.debit(x);
                vrev.credit(x);
                total.push(x);
            }
            if !total.is_empty() {
                paid.insert(*j, exact_sum(total));
            }
        }
        for (j, r) in &ledger.publisher_rewards {
            if let Some(rev) = out.publishers.get_mut(j) {
                rev.credit(*r);
            }
        }
        let done = !block.inclusions.is_empty();
        out.steps.push(StepRecord { step, validator: vid, bundles, block, reformulated: key, ledger, bribes: paid });
        if done {
            out.terminated_at = Some(step);
            break;
        }
    }
    Ok(out)
}

/// Epoch seed of trial `i` under master seed `seed`.
pub fn trial_seed(seed: u64, i: u64) -> u64 {
    seed::derive(seed, 0x7472_6961_6c00, i)
}

/// Plays trial `i`: same reports, fresh beacons.
pub fn play_trial(cfg: &GameConfig, profile: &StrategyProfile, seed: u64, i: u64) -> Result<EpochOutcome, GameError> {
    play_epoch(&cfg.with_seed(trial_seed(seed, i)), profile)
}

/// Mean total revenue of publisher `j` over `trials` epochs.
pub fn expected_publisher_utility(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    j: PublisherId,
    trials: u64,
    seed: u64,
) -> Result<Estimate, GameError> {
    if !cfg.roster.contains(&j) {
        return Err(GameError::UnknownPublisher(j.0));
    }
    Ok(simulate(cfg, profile, trials, seed)?.publishers[&j])
}

/// Aggregate statistics over many epochs.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub trials: u64,
    pub publishers: BTreeMap<PublisherId, Estimate>,
    pub validator: Estimate,
    /// `E[revenue_j] / RAllPub(N)` per publisher.
    pub fairness: BTreeMap<PublisherId, f64>,
    pub mean_included: f64,
    pub max_included: usize,
    pub terminated_at_step1: u64,
    pub terminated_later: u64,
    pub never_terminated: u64,
}

/// Runs `trials` epochs in parallel; results do not depend on thread count.
pub fn simulate(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    trials: u64,
    seed: u64,
) -> Result<SimulationSummary, GameError> {
    if trials == 0 {
        return Err(SpecError::NonPositive { field: "trials" }.into());
    }
    let n = cfg.roster.len();
    // Columns: publishers, validator, included, step1, later, never.
    let width = n + 5;
    let failure = std::sync::Mutex::new(None);
    let max_included = std::sync::atomic::AtomicUsize::new(0);
    let acc = stats::monte_carlo(trials, width, |i, out| match play_trial(cfg, profile, seed, i) {
        Ok(o) => {
            for (k, j) in cfg.roster.iter().enumerate() {
                out[k] = o.publisher_net(*j);
            }
            out[n] = o.validator_total();
            let inc = o.included_reports();
            out[n + 1] = inc as f64;
            max_included.fetch_max(inc, std::sync::atomic::Ordering::Relaxed);
            match o.terminated_at {
                Some(1) => out[n + 2] = 1.0,
                Some(_) => out[n + 3] = 1.0,
                None => out[n + 4] = 1.0,
            }
        }
        Err(e) => {
            failure.lock().unwrap().get_or_insert((i, e));
        }
    });
    if let Some((_, e)) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let total = cfg.total_reports() as u64;
    let rallpub = if total > 0 { cfg.spec().rallpub_closed_form(total)? } else { 0.0 };
    let publishers: BTreeMap<_, _> = cfg.roster.iter().enumerate().map(|(k, j)| (*j, acc[k].estimate())).collect();
    let fairness = publishers.iter().map(|(j, e)| (*j, if rallpub > 0.0 { e.mean / rallpub } else { 0.0 })).collect();
    let count = |k: usize| (acc[k].estimate().mean * trials as f64).round() as u64;
    Ok(SimulationSummary {
        trials,
        publishers,
        validator: acc[n].estimate(),
        fairness,
        mean_included: acc[n + 1].estimate().mean,
        max_included: max_included.into_inner(),
        terminated_at_step1: count(n + 2),
        terminated_later: count(n + 3),
        never_terminated: count(n + 4),
    })
}
