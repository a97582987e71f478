//! Random-value functions and their analysis.
//!
//! A random-value function maps a report and the block's random string to a
//! monetary value. Both families here have a floor of `r_min`, which is
//! also what the dummy report is worth.

use std::collections::HashMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::SpecError;
use crate::oracle;
use crate::seed;
use crate::stats::{self, Estimate};
use crate::types::{Digest256, Money, RandomString, ReportId, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RandomValueSpec {
    /// `r_min + Exp(lambda)`.
    Logarithmic { lambda: f64, r_min: Money },
    /// `r_max` with probability `p`, otherwise `r_min`.
    Polarized { p: f64, r_min: Money, r_max: Money },
}

impl RandomValueSpec {
    pub fn logarithmic(lambda: f64, r_min: Money) -> Result<Self, SpecError> {
        let s = Self::Logarithmic { lambda, r_min };
        s.validate()?;
        Ok(s)
    }

    pub fn polarized(p: f64, r_min: Money, r_max: Money) -> Result<Self, SpecError> {
        let s = Self::Polarized { p, r_min, r_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let r_min = self.r_min();
        if !(r_min.is_finite() && r_min >= 0.0) {
            return Err(SpecError::RMin(r_min));
        }
        match *self {
            Self::Logarithmic { lambda, .. } => {
                if !(lambda.is_finite() && lambda > 0.0) {
                    return Err(SpecError::Lambda(lambda));
                }
            }
            Self::Polarized { p, r_max, .. } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(SpecError::Probability(p));
                }
                if !(r_max.is_finite() && r_max > r_min) {
                    return Err(SpecError::RMax { r_min, r_max });
                }
            }
        }
        Ok(())
    }

    pub fn r_min(&self) -> Money {
        match *self {
            Self::Logarithmic { r_min, .. } | Self::Polarized { r_min, .. } => r_min,
        }
    }

    /// Value for oracle output `u` in `[0, 1)`.
    pub fn value_from_uniform(&self, u: f64) -> Money {
        match *self {
            Self::Logarithmic { lambda, r_min } => r_min - (-u).ln_1p() / lambda,
            Self::Polarized { p, r_min, r_max } => {
                if u <= p {
                    r_max
                } else {
                    r_min
                }
            }
        }
    }

    /// Value of a real report's payload under random string value `s`.
    pub fn value_of_payload(&self, payload: &Digest256, s: &Digest256) -> Money {
        self.value_from_uniform(oracle::uniform(&[payload, s]))
    }

    /// Value of a slot; the dummy bypasses the oracle.
    pub fn eval(&self, slot: &Slot, s: &RandomString) -> Money {
        match slot {
            Slot::Dummy => self.r_min(),
            Slot::Report(r) => self.value_of_payload(r.payload_digest(), &s.value),
        }
    }

    /// Expected gap between the best value and the runner-up (or `r_min`
    /// when `n = 1`) among `n` reports.
    pub fn rallpub_closed_form(&self, n: u64) -> Result<Money, SpecError> {
        if n == 0 {
            return Err(SpecError::ZeroReports);
        }
        Ok(match *self {
            Self::Logarithmic { lambda, .. } => 1.0 / lambda,
            Self::Polarized { p, r_min, r_max } => n as f64 * p * (1.0 - p).powf((n - 1) as f64) * (r_max - r_min),
        })
    }

    /// Expected highest value among `n` reports, floored at `r_min`.
    pub fn expected_contract_cost(&self, n: u64) -> Result<Money, SpecError> {
        if n == 0 {
            return Err(SpecError::ZeroReports);
        }
        Ok(match *self {
            Self::Logarithmic { lambda, r_min } => r_min + harmonic(n) / lambda,
            Self::Polarized { p, r_min, r_max } => r_min + (1.0 - (1.0 - p).powf(n as f64)) * (r_max - r_min),
        })
    }

    /// Joint Monte Carlo estimate of the best-minus-runner-up gap and of the
    /// best value over `n` reports. Oracle outputs are drawn directly as
    /// independent 53-bit uniforms, which is what the oracle is modelled as.
    pub fn monte_carlo(&self, n: u64, trials: u64, seed: u64) -> Result<RvMonteCarlo, SpecError> {
        self.sample(n, trials, seed, |rng, _| oracle::uniform_from_bits(rng.next_u64()))
    }

    /// As [`monte_carlo`](Self::monte_carlo), but every value goes through
    /// the hash oracle with a fresh payload and a fresh random string per
    /// trial. About ten times slower.
    pub fn monte_carlo_hashed(&self, n: u64, trials: u64, seed: u64) -> Result<RvMonteCarlo, SpecError> {
        self.sample(n, trials, seed, |rng, s| {
            let mut payload = [0u8; 32];
            rng.fill_bytes(&mut payload);
            oracle::uniform(&[&payload, s])
        })
    }

    fn sample<F>(&self, n: u64, trials: u64, seed: u64, draw: F) -> Result<RvMonteCarlo, SpecError>
    where
        F: Fn(&mut rand_chacha::ChaCha12Rng, &Digest256) -> f64 + Sync,
    {
        if n == 0 {
            return Err(SpecError::ZeroReports);
        }
        if trials == 0 {
            return Err(SpecError::NonPositive { field: "trials" });
        }
        let r_min = self.r_min();
        let acc = stats::monte_carlo(trials, 2, |i, out| {
            let mut rng = seed::rng(seed::derive(seed, 0x5256, i));
            let mut s = [0u8; 32];
            rng.fill_bytes(&mut s);
            let (mut hi, mut lo) = (f64::NEG_INFINITY, r_min);
            for _ in 0..n {
                let v = self.value_from_uniform(draw(&mut rng, &s));
                if v > hi {
                    lo = lo.max(hi);
                    hi = v;
                } else if v > lo {
                    lo = v;
                }
            }
            out[0] = hi - lo;
            out[1] = hi.max(r_min);
        });
        Ok(RvMonteCarlo { rallpub: acc[0].estimate(), max_value: acc[1].estimate() })
    }

    /// Empirical mean of the best-minus-runner-up gap.
    pub fn rallpub_monte_carlo(&self, n: u64, trials: u64, seed: u64) -> Result<Money, SpecError> {
        Ok(self.monte_carlo(n, trials, seed)?.rallpub.mean)
    }

    /// Reward monotonicity: the total publisher payout never decreases as reports
    /// are added.
    pub fn check_reward_monotonicity(&self, cfg: &PropertyCheckConfig) -> Result<MonotonicityVerdict, SpecError> {
        cfg.validate()?;
        let mut prev = self.rallpub_closed_form(1)?;
        for n in 2..=cfg.n_max {
            let cur = self.rallpub_closed_form(n)?;
            // Analytic ties such as p = 1/(n+1) land a few ulps apart.
            if cur < prev - MONO_RTOL * prev.abs() {
                return Ok(MonotonicityVerdict { holds: false, witness: Some((n - 1, n)) });
            }
            prev = cur;
        }
        Ok(MonotonicityVerdict { holds: true, witness: None })
    }

    /// Skipping resistance: the total publisher payout stays strictly below `r_min`.
    pub fn check_skipping_resistance(&self, cfg: &PropertyCheckConfig) -> Result<SkippingVerdict, SpecError> {
        cfg.validate()?;
        let r_min = self.r_min();
        for n in 1..=cfg.n_max {
            if self.rallpub_closed_form(n)? >= r_min {
                return Ok(SkippingVerdict { holds: false, witness: Some(n) });
            }
        }
        Ok(SkippingVerdict { holds: true, witness: None })
    }
}

const MONO_RTOL: f64 = 1e-12;

/// Largest admissible `r_max` for a polarized function with both properties
/// up to `n_max` reports (the bound is exclusive).
pub fn polarized_r_max_bound(p: f64, r_min: Money, n_max: u64) -> Money {
    let n = n_max as f64;
    (1.0 + 1.0 / (n * p * (1.0 - p).powf(n - 1.0))) * r_min
}

/// `H_n = 1 + 1/2 + ... + 1/n` by direct summation.
pub fn harmonic(n: u64) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RvMonteCarlo {
    pub rallpub: Estimate,
    pub max_value: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheckConfig {
    pub n_max: u64,
    pub mc_trials: u64,
    pub tolerance: f64,
    pub seed: u64,
}

impl PropertyCheckConfig {
    pub fn new(n_max: u64) -> Self {
        Self { n_max, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.n_max == 0 {
            return Err(SpecError::NonPositive { field: "n_max" });
        }
        if self.mc_trials == 0 {
            return Err(SpecError::NonPositive { field: "mc_trials" });
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(SpecError::NonPositive { field: "tolerance" });
        }
        Ok(())
    }
}

impl Default for PropertyCheckConfig {
    fn default() -> Self {
        Self { n_max: 100, mc_trials: 100_000, tolerance: 3.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MonotonicityVerdict {
    pub holds: bool,
    pub witness: Option<(u64, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SkippingVerdict {
    pub holds: bool,
    pub witness: Option<u64>,
}

/// Anything that can value the entries of an inclusion vector.
pub trait Valuation: Sync {
    fn r_min(&self) -> Money;
    fn value(&self, slot: &Slot, s: &RandomString) -> Money;
}

impl Valuation for RandomValueSpec {
    fn r_min(&self) -> Money {
        RandomValueSpec::r_min(self)
    }

    fn value(&self, slot: &Slot, s: &RandomString) -> Money {
        self.eval(slot, s)
    }
}

/// Hand-assigned values per report id, used to replay fixed scenarios.
/// Unknown reports and the dummy are worth `r_min`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixedValues {
    pub r_min: Money,
    pub values: HashMap<ReportId, Money>,
}

impl FixedValues {
    pub fn new(r_min: Money) -> Self {
        Self { r_min, values: HashMap::new() }
    }

    pub fn with(mut self, id: ReportId, v: Money) -> Self {
        self.values.insert(id, v);
        self
    }
}

impl Valuation for FixedValues {
    fn r_min(&self) -> Money {
        self.r_min
    }

    fn value(&self, slot: &Slot, _s: &RandomString) -> Money {
        slot.report().and_then(|r| self.values.get(&r.id()).copied()).unwrap_or(self.r_min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{PublisherId, ReportMinter};
    use proptest::prelude::*;

    fn log(lambda: f64, r_min: f64) -> RandomValueSpec {
        RandomValueSpec::logarithmic(lambda, r_min).unwrap()
    }

    fn pol(p: f64, r_min: f64, r_max: f64) -> RandomValueSpec {
        RandomValueSpec::polarized(p, r_min, r_max).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RandomValueSpec::logarithmic(0.0, 2.0).is_err());
        assert!(RandomValueSpec::logarithmic(-1.0, 2.0).is_err());
        assert!(RandomValueSpec::logarithmic(1.0, -0.1).is_err());
        assert!(RandomValueSpec::polarized(0.0, 2.0, 3.0).is_err());
        assert!(RandomValueSpec::polarized(1.1, 2.0, 3.0).is_err());
        assert!(RandomValueSpec::polarized(0.5, 2.0, 2.0).is_err());
        assert!(RandomValueSpec::polarized(1.0, 2.0, 3.0).is_ok());
    }

    #[test]
    fn log_value_stubbed() {
        let s = log(1.0, 2.0);
        assert_eq!(s.value_from_uniform(0.0), 2.0);
        let v = s.value_from_uniform(1.0 - (-1.0f64).exp());
        assert!((v - 3.0).abs() < 1e-12, "{v}");
        assert!(s.value_from_uniform(1.0 - 2f64.powi(-53)).is_finite());
    }

    #[test]
    fn polarized_boundary_is_inclusive() {
        let s = pol(0.1, 2.0, 10.0);
        assert_eq!(s.value_from_uniform(0.10), 10.0);
        assert_eq!(s.value_from_uniform(0.1000001), 2.0);
    }

    #[test]
    fn dummy_is_r_min() {
        let rs = RandomString { value: [3; 32], proof: vec![] };
        assert_eq!(log(0.7, 1.5).eval(&Slot::Dummy, &rs), 1.5);
        assert_eq!(pol(1.0, 2.0, 9.0).eval(&Slot::Dummy, &rs), 2.0);
    }

    #[test]
    fn eval_uses_oracle_on_payload_and_string() {
        let spec = log(1.0, 2.0);
        let r = ReportMinter::new().mint_seeded(PublisherId(0), 1);
        let rs = RandomString { value: [5; 32], proof: vec![] };
        let u = oracle::uniform(&[r.payload_digest(), &rs.value]);
        assert!((spec.eval(&Slot::Report(r), &rs) - (2.0 - (1.0 - u).ln())).abs() < 1e-12);
    }

    #[test]
    fn rallpub_examples() {
        assert_eq!(log(0.5, 2.0).rallpub_closed_form(7).unwrap(), 2.0);
        let p = pol(0.1, 2.0, 12.0);
        assert!((p.rallpub_closed_form(2).unwrap() - 2.0 * 0.1 * 0.9 * 10.0).abs() < 1e-12);
        assert!((p.rallpub_closed_form(1).unwrap() - 1.0).abs() < 1e-12);
        assert!(p.rallpub_closed_form(0).is_err());
    }

    #[test]
    fn expected_cost_examples() {
        assert_eq!(log(1.0, 2.0).expected_contract_cost(1).unwrap(), 3.0);
        let c4 = log(1.0, 2.0).expected_contract_cost(4).unwrap();
        assert!((c4 - (2.0 + 25.0 / 12.0)).abs() < 1e-12);
        assert!((c4 - 4.0833).abs() < 1e-4);
        let c = pol(0.1, 2.0, 10.0).expected_contract_cost(3).unwrap();
        assert!((c - (2.0 + (1.0 - 0.729) * 8.0)).abs() < 1e-12);
        assert!((c - 4.168).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_examples() {
        let cfg = PropertyCheckConfig::new(100);
        assert!(log(2.0, 2.0).check_reward_monotonicity(&cfg).unwrap().holds);
        assert!(pol(0.01, 2.0, 10.0).check_reward_monotonicity(&cfg).unwrap().holds);
        let v = pol(0.5, 2.0, 10.0).check_reward_monotonicity(&PropertyCheckConfig::new(10)).unwrap();
        assert_eq!(v, MonotonicityVerdict { holds: false, witness: Some((2, 3)) });
    }

    #[test]
    fn skipping_examples() {
        let cfg = PropertyCheckConfig::new(100);
        assert!(log(1.0, 2.0).check_skipping_resistance(&cfg).unwrap().holds);
        let v = log(0.4, 2.0).check_skipping_resistance(&cfg).unwrap();
        assert_eq!(v, SkippingVerdict { holds: false, witness: Some(1) });
        let n_max = 20;
        let p = 1.0 / n_max as f64;
        let bound = polarized_r_max_bound(p, 2.0, n_max);
        let spec = pol(p, 2.0, bound * 0.999);
        let cfg = PropertyCheckConfig::new(n_max);
        assert!(spec.check_skipping_resistance(&cfg).unwrap().holds);
        assert!(spec.check_reward_monotonicity(&cfg).unwrap().holds);
        let over = pol(p, 2.0, bound * 1.001);
        assert!(!over.check_skipping_resistance(&cfg).unwrap().holds);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let s = log(1.0, 2.0);
        let a = s.rallpub_monte_carlo(3, 1, 9).unwrap();
        assert_eq!(a, s.rallpub_monte_carlo(3, 1, 9).unwrap());
        assert_ne!(a, s.rallpub_monte_carlo(3, 1, 10).unwrap());
    }

    #[test]
    fn hashed_and_direct_sampling_agree() {
        for s in [log(1.0, 2.0), pol(0.2, 2.0, 6.0)] {
            let a = s.monte_carlo(5, 40_000, 3).unwrap();
            let b = s.monte_carlo_hashed(5, 40_000, 4).unwrap();
            let se = (a.rallpub.std_err.powi(2) + b.rallpub.std_err.powi(2)).sqrt();
            assert!((a.rallpub.mean - b.rallpub.mean).abs() < 4.0 * se, "{a:?} {b:?}");
            let se = (a.max_value.std_err.powi(2) + b.max_value.std_err.powi(2)).sqrt();
            assert!((a.max_value.mean - b.max_value.mean).abs() < 4.0 * se, "{a:?} {b:?}");
        }
    }

    #[test]
    fn single_report_gap_is_surplus_over_r_min() {
        let s = pol(0.3, 2.0, 5.0);
        let mc = s.monte_carlo(1, 10_000, 1).unwrap();
        assert!(mc.rallpub.within(0.3 * 3.0, 4.0));
        assert!((mc.max_value.mean - mc.rallpub.mean - 2.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_values_default_to_r_min() {
        let mut m = ReportMinter::new();
        let a = m.mint_seeded(PublisherId(0), 0);
        let b = m.mint_seeded(PublisherId(0), 0);
        let fv = FixedValues::new(2.0).with(a.id(), 10.0);
        let rs = RandomString { value: [0; 32], proof: vec![] };
        assert_eq!(fv.value(&Slot::Report(a), &rs), 10.0);
        assert_eq!(fv.value(&Slot::Report(b), &rs), 2.0);
        assert_eq!(fv.value(&Slot::Dummy, &rs), 2.0);
    }

    proptest! {
        #[test]
        fn values_never_below_floor(u in 0.0f64..1.0, lambda in 0.01f64..10.0, r_min in 0.0f64..10.0) {
            let v = log(lambda, r_min).value_from_uniform(u);
            prop_assert!(v.is_finite() && v >= r_min);
            let w = pol(0.2, r_min, r_min + 1.0).value_from_uniform(u);
            prop_assert!(w == r_min || w == r_min + 1.0);
        }

        #[test]
        fn skipping_resistance_implies_pointwise_bound(p in 0.001f64..1.0, spread in 0.1f64..20.0, n_max in 1u64..60) {
            let spec = pol(p, 2.0, 2.0 + spread);
            let cfg = PropertyCheckConfig::new(n_max);
            if spec.check_skipping_resistance(&cfg).unwrap().holds {
                for n in 1..=n_max {
                    prop_assert!(spec.rallpub_closed_form(n).unwrap() < 2.0);
                }
            }
        }
    }
}
