//! Index-based evaluation of one step under a realised random string.
//!
//! The searches score thousands of inclusion vectors per string, so they
//! work on report indices and cached values instead of cloned slots. The
//! rules here are the contract rules of the protocol module; a property
//! test pins the two together.

use crate::game::GameConfig;
use crate::rvalue::RandomValueSpec;
use crate::types::{Digest256, Money, PublisherId, RandomString};

/// Per-configuration data that does not depend on the random string.
#[derive(Debug, Clone)]
pub(crate) struct Roster {
    pub owners: Vec<PublisherId>,
    ids: Vec<u64>,
    tiebreak: Vec<Digest256>,
    pub spec: RandomValueSpec,
}

impl Roster {
    pub fn new(cfg: &GameConfig) -> Self {
        Self {
            owners: cfg.reports.iter().map(|r| r.owner()).collect(),
            ids: cfg.reports.iter().map(|r| r.id().0).collect(),
            tiebreak: cfg.reports.iter().map(|r| r.tiebreak_digest()).collect(),
            spec: *cfg.spec(),
        }
    }

    pub fn len(&self) -> usize {
        self.owners.len()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Scene {
    pub values: Vec<Money>,
    pub r_min: Money,
    /// All report indices in inclusion priority order.
    order: Vec<usize>,
}

impl Scene {
    pub fn new(roster: &Roster, payloads: &[Digest256], s: &RandomString) -> Self {
        let values: Vec<Money> = payloads.iter().map(|p| roster.spec.value_of_payload(p, &s.value)).collect();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| {
            values[b]
                .total_cmp(&values[a])
                .then_with(|| roster.tiebreak[a].cmp(&roster.tiebreak[b]))
                .then_with(|| roster.ids[a].cmp(&roster.ids[b]))
        });
        Self { values, r_min: roster.spec.r_min(), order }
    }

    /// Published indices (given as a membership mask) in priority order.
    pub fn sorted<'a>(&'a self, published: &'a [bool]) -> impl Iterator<Item = usize> + 'a {
        self.order.iter().copied().filter(move |&i| published[i])
    }

    /// Raw honest inclusion vector over the published set.
    pub fn honest(&self, published: &[bool]) -> Vec<usize> {
        let mut it = self.sorted(published);
        let mut out = Vec::with_capacity(2);
        if let Some(a) = it.next() {
            out.push(a);
            if let Some(b) = it.next() {
                if self.values[b] > self.r_min {
                    out.push(b);
                }
            }
        }
        out
    }

    /// Second-highest published value, or `r_min` with fewer than two.
    pub fn second(&self, published: &[bool]) -> Money {
        self.sorted(published).nth(1).map_or(self.r_min, |i| self.values[i])
    }

    fn is_standard(&self, raw: &[usize]) -> bool {
        raw.len() == 2 && self.values[raw[0]] >= self.values[raw[1]] && self.values[raw[1]] > self.r_min
    }

    /// Contract payment to the validator.
    pub fn contract(&self, raw: &[usize]) -> Money {
        match raw.len() {
            0 => 0.0,
            1 => self.r_min,
            _ if self.is_standard(raw) => self.values[raw[1]],
            _ => 0.0,
        }
    }

    /// Contract payment to the owner of the first report.
    pub fn winner(&self, raw: &[usize]) -> Option<(usize, Money)> {
        let &first = raw.first()?;
        let second = if self.is_standard(raw) { self.values[raw[1]] } else { self.r_min };
        Some((first, self.values[first] - second))
    }

    /// Contract payments to reports flagged in `group`.
    pub fn group_reward(&self, raw: &[usize], group: &[bool]) -> Money {
        match self.winner(raw) {
            Some((i, r)) if group[i] => r,
            _ => 0.0,
        }
    }
}
