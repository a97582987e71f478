//! Publication, inclusion and reward processing.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::SpecError;
use crate::game::BribeSchedule;
use crate::rvalue::{RandomValueSpec, Valuation};
use crate::types::{Block, Digest256, Money, PublisherId, RandomString, Report, Slot};
use crate::vrf;

/// Timeline of one epoch: `t_total` steps, reports accepted from `t_pub`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochConfig {
    pub t_total: u64,
    pub t_pub: u64,
    pub spec: RandomValueSpec,
}

impl EpochConfig {
    pub fn new(t_total: u64, t_pub: u64, spec: RandomValueSpec) -> Result<Self, SpecError> {
        let cfg = Self { t_total, t_pub, spec };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.t_total == 0 || self.t_pub == 0 || self.t_pub > self.t_total {
            return Err(SpecError::Window { t_total: self.t_total, t_pub: self.t_pub });
        }
        self.spec.validate()
    }

    /// Length `m` of the publication window.
    pub fn window(&self) -> u64 {
        self.t_total - self.t_pub + 1
    }

    /// Absolute block index of window step `step` (1-based).
    pub fn block_index(&self, step: u64) -> u64 {
        self.t_pub + step - 1
    }
}

/// A published report together with its fee bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub report: Report,
    pub bid: Money,
}

/// What a publisher sends in one step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PublicationBundle {
    pub transactions: Vec<Transaction>,
    pub bribe: BribeSchedule,
}

impl PublicationBundle {
    pub fn reports(&self) -> impl Iterator<Item = &Report> {
        self.transactions.iter().map(|t| &t.report)
    }
}

/// Every report published with a zero bid and no bribe.
pub fn honest_publish(reports: &[Report]) -> PublicationBundle {
    PublicationBundle {
        transactions: reports.iter().map(|r| Transaction { report: r.clone(), bid: 0.0 }).collect(),
        bribe: BribeSchedule::default(),
    }
}

/// Descending by value; ties by ascending digest of the payload, then by id.
pub fn compare_reports<V: Valuation + ?Sized>(a: &Report, b: &Report, s: &RandomString, val: &V) -> Ordering {
    let va = val.value(&Slot::Report(a.clone()), s);
    let vb = val.value(&Slot::Report(b.clone()), s);
    compare_valued(a, va, b, vb)
}

fn compare_valued(a: &Report, va: Money, b: &Report, vb: Money) -> Ordering {
    vb.total_cmp(&va).then_with(|| a.tiebreak_digest().cmp(&b.tiebreak_digest())).then_with(|| a.id().cmp(&b.id()))
}

/// Published transactions in inclusion priority order.
pub fn sort_reports<V: Valuation + ?Sized>(published: &[Transaction], s: &RandomString, val: &V) -> Vec<Transaction> {
    let mut keyed: Vec<(Money, &Transaction)> =
        published.iter().map(|t| (val.value(&Slot::Report(t.report.clone()), s), t)).collect();
    keyed.sort_by(|(va, a), (vb, b)| compare_valued(&a.report, *va, &b.report, *vb));
    keyed.into_iter().map(|(_, t)| t.clone()).collect()
}

/// The best report, plus the runner-up if it is worth strictly more than
/// `r_min`.
pub fn honest_include<V: Valuation + ?Sized>(published: &[Transaction], s: &RandomString, val: &V) -> Vec<Transaction> {
    let mut sorted = sort_reports(published, s, val);
    if sorted.len() >= 2 && val.value(&Slot::Report(sorted[1].report.clone()), s) <= val.r_min() {
        sorted.truncate(1);
    }
    sorted.truncate(2);
    sorted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerCase {
    Standard,
    Succinct,
    Deviation,
    Rejected,
}

/// Contract payouts for one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardLedger {
    pub publisher_rewards: BTreeMap<PublisherId, Money>,
    pub validator_reward: Money,
    pub case: LedgerCase,
}

impl RewardLedger {
    pub fn rejected() -> Self {
        Self { publisher_rewards: BTreeMap::new(), validator_reward: 0.0, case: LedgerCase::Rejected }
    }

    pub fn publisher_reward(&self, p: PublisherId) -> Money {
        self.publisher_rewards.get(&p).copied().unwrap_or(0.0)
    }

    /// Total paid out by the contract.
    pub fn payout(&self) -> Money {
        self.validator_reward + self.publisher_rewards.values().sum::<Money>()
    }
}

/// Rewards for `block`, or `Rejected` if its random string does not verify
/// against `pk` or it carries no real report.
pub fn process_block<V: Valuation + ?Sized>(block: &Block, pk: &Digest256, val: &V) -> RewardLedger {
    if !vrf::verify(&block.beacon, &block.random_string, pk) {
        return RewardLedger::rejected();
    }
    process_slots(&block.slots(), &block.random_string, val)
}

/// Reward rules applied to an inclusion vector whose string is trusted.
pub fn process_slots<V: Valuation + ?Sized>(slots: &[Slot], s: &RandomString, val: &V) -> RewardLedger {
    if slots.iter().all(Slot::is_dummy) {
        return RewardLedger::rejected();
    }
    let r_min = val.r_min();
    let r1 = val.value(&slots[0], s);
    let mut ledger = RewardLedger::rejected();
    let credit = |slot: &Slot, amount: Money, ledger: &mut RewardLedger| {
        if let Some(owner) = slot.owner() {
            *ledger.publisher_rewards.entry(owner).or_insert(0.0) += amount;
        }
    };
    match slots.len() {
        1 => {
            ledger.case = LedgerCase::Succinct;
            ledger.validator_reward = r_min;
            credit(&slots[0], r1 - r_min, &mut ledger);
        }
        2 if {
            let r2 = val.value(&slots[1], s);
            r1 >= r2 && r2 > r_min
        } =>
        {
            let r2 = val.value(&slots[1], s);
            ledger.case = LedgerCase::Standard;
            ledger.validator_reward = r2;
            credit(&slots[0], r1 - r2, &mut ledger);
            credit(&slots[1], 0.0, &mut ledger);
        }
        _ => {
            ledger.case = LedgerCase::Deviation;
            ledger.validator_reward = 0.0;
            credit(&slots[0], r1 - r_min, &mut ledger);
        }
    }
    ledger
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rvalue::FixedValues;
    use crate::types::{Inclusion, ReportMinter, ValidatorKeys};
    use proptest::prelude::*;

    struct Fixture {
        a: Report,
        b: Report,
        c: Report,
        values: FixedValues,
        keys: ValidatorKeys,
        beacon: Digest256,
    }

    fn fixture() -> Fixture {
        let mut m = ReportMinter::new();
        let a = m.mint_seeded(PublisherId(0), 1);
        let b = m.mint_seeded(PublisherId(1), 1);
        let c = m.mint_seeded(PublisherId(2), 1);
        let values = FixedValues::new(2.0).with(a.id(), 10.0).with(b.id(), 8.0).with(c.id(), 2.0);
        Fixture { a, b, c, values, keys: ValidatorKeys::derive(0, 1), beacon: [4; 32] }
    }

    fn block(f: &Fixture, reports: &[&Report]) -> Block {
        Block {
            index: 1,
            beacon: f.beacon,
            random_string: vrf::generate(&f.beacon, &f.keys),
            inclusions: reports.iter().map(|r| Inclusion::new((*r).clone(), 0.0)).collect(),
        }
    }

    fn run(f: &Fixture, reports: &[&Report]) -> RewardLedger {
        process_block(&block(f, reports), f.keys.public(), &f.values)
    }

    #[test]
    fn table_rows() {
        let f = fixture();
        let l = run(&f, &[&f.a, &f.b]);
        assert_eq!((l.case, l.validator_reward), (LedgerCase::Standard, 8.0));
        assert_eq!((l.publisher_reward(PublisherId(0)), l.publisher_reward(PublisherId(1))), (2.0, 0.0));

        let l = run(&f, &[&f.a]);
        assert_eq!((l.case, l.validator_reward, l.publisher_reward(PublisherId(0))), (LedgerCase::Succinct, 2.0, 8.0));

        let l = run(&f, &[&f.a, &f.b, &f.c]);
        assert_eq!((l.case, l.validator_reward, l.publisher_reward(PublisherId(0))), (LedgerCase::Deviation, 0.0, 8.0));
        assert_eq!(l.publisher_reward(PublisherId(1)), 0.0);

        let l = run(&f, &[&f.b, &f.a]);
        assert_eq!((l.case, l.validator_reward, l.publisher_reward(PublisherId(1))), (LedgerCase::Deviation, 0.0, 6.0));
        assert_eq!(l.publisher_reward(PublisherId(0)), 0.0);

        let l = run(&f, &[&f.a, &f.c]);
        assert_eq!((l.case, l.validator_reward, l.publisher_reward(PublisherId(0))), (LedgerCase::Deviation, 0.0, 8.0));
    }

    #[test]
    fn rejected_paths() {
        let f = fixture();
        assert_eq!(run(&f, &[]).case, LedgerCase::Rejected);
        let mut bad = block(&f, &[&f.a]);
        bad.random_string.value[0] ^= 0x80;
        let l = process_block(&bad, f.keys.public(), &f.values);
        assert_eq!(l, RewardLedger::rejected());
        let other = ValidatorKeys::derive(9, 9);
        assert_eq!(process_block(&block(&f, &[&f.a]), other.public(), &f.values).case, LedgerCase::Rejected);
    }

    #[test]
    fn dummy_second_is_deviation() {
        let f = fixture();
        let s = vrf::generate(&f.beacon, &f.keys);
        let l = process_slots(&[Slot::Report(f.a.clone()), Slot::Dummy], &s, &f.values);
        assert_eq!((l.case, l.validator_reward, l.publisher_reward(PublisherId(0))), (LedgerCase::Deviation, 0.0, 8.0));
    }

    #[test]
    fn honest_publish_is_zero_bid() {
        assert!(honest_publish(&[]).transactions.is_empty());
        let f = fixture();
        let b = honest_publish(&[f.a.clone(), f.b.clone()]);
        assert_eq!(b.transactions.len(), 2);
        assert!(b.transactions.iter().all(|t| t.bid == 0.0));
        assert!(b.bribe.is_empty());
    }

    #[test]
    fn inclusion_examples() {
        let f = fixture();
        let s = vrf::generate(&f.beacon, &f.keys);
        let txs = |rs: &[&Report]| honest_publish(&rs.iter().map(|r| (*r).clone()).collect::<Vec<_>>()).transactions;
        let ids = |v: Vec<Transaction>| v.into_iter().map(|t| t.report.id()).collect::<Vec<_>>();
        assert_eq!(ids(honest_include(&txs(&[&f.b, &f.a]), &s, &f.values)), vec![f.a.id(), f.b.id()]);
        assert_eq!(ids(honest_include(&txs(&[&f.a]), &s, &f.values)), vec![f.a.id()]);
        assert_eq!(ids(honest_include(&txs(&[&f.c, &f.a]), &s, &f.values)), vec![f.a.id()]);
        assert_eq!(ids(honest_include(&txs(&[&f.c, &f.b, &f.a]), &s, &f.values)), vec![f.a.id(), f.b.id()]);
        assert!(honest_include(&[], &s, &f.values).is_empty());
    }

    #[test]
    fn ties_go_to_smaller_digest() {
        let mut m = ReportMinter::new();
        let x = m.mint_seeded(PublisherId(0), 3);
        let y = m.mint_seeded(PublisherId(1), 3);
        let values = FixedValues::new(2.0).with(x.id(), 10.0).with(y.id(), 10.0);
        let s = RandomString { value: [0; 32], proof: vec![] };
        let sorted = sort_reports(&honest_publish(&[y.clone(), x.clone()]).transactions, &s, &values);
        let first = if x.tiebreak_digest() < y.tiebreak_digest() { &x } else { &y };
        assert_eq!(&sorted[0].report, first);
        let again = sort_reports(&honest_publish(&[x.clone(), y.clone()]).transactions, &s, &values);
        assert_eq!(sorted, again);
    }

    #[test]
    fn epoch_window() {
        let spec = RandomValueSpec::logarithmic(1.0, 2.0).unwrap();
        let e = EpochConfig::new(3, 2, spec).unwrap();
        assert_eq!(e.window(), 2);
        assert_eq!(e.block_index(1), 2);
        assert!(EpochConfig::new(3, 4, spec).is_err());
        assert!(EpochConfig::new(0, 1, spec).is_err());
        assert!(EpochConfig::new(3, 0, spec).is_err());
    }

    proptest! {
        #[test]
        fn honest_blocks_never_deviate(seed in any::<u64>(), n in 0usize..7, p in 0.05f64..1.0) {
            let specs = [
                RandomValueSpec::logarithmic(1.0, 2.0).unwrap(),
                RandomValueSpec::polarized(p, 2.0, 6.0).unwrap(),
            ];
            let mut m = ReportMinter::new();
            let reports: Vec<Report> = (0..n).map(|i| m.mint_seeded(PublisherId(i as u32 % 3), seed)).collect();
            let keys = ValidatorKeys::derive(seed, 0);
            let beacon = crate::oracle::digest(&[&seed.to_le_bytes()]);
            let s = vrf::generate(&beacon, &keys);
            for spec in specs {
                let inc = honest_include(&honest_publish(&reports).transactions, &s, &spec);
                prop_assert!(inc.len() <= 2);
                prop_assert_eq!(inc.is_empty(), reports.is_empty());
                let b = Block {
                    index: 1,
                    beacon,
                    random_string: s.clone(),
                    inclusions: inc.iter().map(|t| Inclusion::new(t.report.clone(), t.bid)).collect(),
                };
                let l = process_block(&b, keys.public(), &spec);
                prop_assert!(l.case != LedgerCase::Deviation);
                prop_assert!(l.validator_reward >= 0.0);
                prop_assert!(l.publisher_rewards.values().all(|&r| r >= 0.0));
                if l.case == LedgerCase::Standard {
                    let r1 = spec.eval(&b.inclusions[0].slot, &s);
                    let winner = b.inclusions[0].slot.owner().unwrap();
                    // (r1 - r2) + r2 can differ from r1 by one rounding.
                    prop_assert!((l.validator_reward + l.publisher_reward(winner) - r1).abs() <= 1e-15 * r1);
                }
            }
        }
    }
}
