//! Whether a publisher can change anyone else's payoff without losing.

use std::sync::Arc;

use serde::Serialize;

use crate::error::AnalysisError;
use crate::game::{self, BribeForSolo, BribeToSkip, GameConfig, PublisherStrategy, StrategyProfile, Withhold};
use crate::stats::{self, Estimate};
use crate::types::{Money, PublisherId};

use super::grid::PIVOT_DELTA;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityProbe {
    pub publisher: PublisherId,
    pub deviation: String,
    /// Share of trials on which some other participant's revenue moved.
    pub changed_fraction: f64,
    /// Paired change in the deviator's revenue.
    pub delta: Estimate,
    /// `-delta.mean`; positive when the deviation costs the deviator.
    pub margin: Money,
    /// Vacuous when nobody else is affected; otherwise the deviator must
    /// lose in expectation.
    pub holds: bool,
}

/// Plays `strategy` for `j` against honest play on the same seeds.
pub fn probe_stability(
    cfg: &GameConfig,
    j: PublisherId,
    label: &str,
    strategy: Arc<dyn PublisherStrategy>,
    trials: u64,
    seed: u64,
) -> Result<StabilityProbe, AnalysisError> {
    if trials == 0 {
        return Err(AnalysisError::Invalid("trials must be >= 1".into()));
    }
    let honest = StrategyProfile::honest(cfg);
    let deviant = honest.clone().with_publisher(j, strategy);
    let failure = std::sync::Mutex::new(None);
    let acc = stats::monte_carlo(trials, 2, |i, out| {
        let pair =
            game::play_trial(cfg, &honest, seed, i).and_then(|a| Ok((a, game::play_trial(cfg, &deviant, seed, i)?)));
        match pair {
            Ok((a, b)) => {
                out[0] = b.publisher_net(j) - a.publisher_net(j);
                let others = cfg.roster.iter().filter(|&&p| p != j).any(|&p| a.publisher_net(p) != b.publisher_net(p));
                let validators = a.validators.len() != b.validators.len()
                    || a.validators.iter().any(|(v, r)| b.validators.get(v).is_none_or(|x| x.net() != r.net()));
                out[1] = f64::from(u8::from(others || validators));
            }
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
            }
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e.into());
    }
    let delta = acc[0].estimate();
    let changed_fraction = acc[1].estimate().mean;
    Ok(StabilityProbe {
        publisher: j,
        deviation: label.to_string(),
        changed_fraction,
        delta,
        margin: -delta.mean,
        holds: changed_fraction == 0.0 || delta.mean < 0.0,
    })
}

/// A labelled deviation.
pub type Probe = (String, Arc<dyn PublisherStrategy>);

/// Fixed deviations probed by [`run_stability`]: every withholding level,
/// and skip and solo bribes at amounts around `r_min` and around the
/// expected second-highest value.
pub fn stability_probes(cfg: &GameConfig, j: PublisherId) -> Result<Vec<Probe>, AnalysisError> {
    let spec = cfg.spec();
    let n = cfg.total_reports().max(1) as u64;
    let r_min = spec.r_min();
    let second = spec.expected_contract_cost(n)? - spec.rallpub_closed_form(n)?;
    let d = PIVOT_DELTA;
    let mut out: Vec<Probe> = Vec::new();
    for keep in 0..cfg.report_count(j) {
        out.push((format!("withhold keep={keep}"), Arc::new(Withhold { keep })));
    }
    let steps = cfg.epoch.window();
    for amount in [r_min - d, r_min, r_min + d, second - d, second + d] {
        out.push((format!("bribe-to-skip amount={amount}"), Arc::new(BribeToSkip { amount, steps })));
        out.push((format!("bribe-for-solo amount={amount}"), Arc::new(BribeForSolo { amount })));
    }
    Ok(out)
}

/// Runs every probe for every publisher.
pub fn run_stability(cfg: &GameConfig, trials: u64, seed: u64) -> Result<Vec<StabilityProbe>, AnalysisError> {
    let mut out = Vec::new();
    for &j in &cfg.roster {
        for (label, s) in stability_probes(cfg, j)? {
            out.push(probe_stability(cfg, j, &label, s, trials, seed)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Honest;
    use crate::protocol::EpochConfig;
    use crate::rvalue::RandomValueSpec;

    fn cfg() -> GameConfig {
        let spec = RandomValueSpec::logarithmic(1.0, 2.0).unwrap();
        GameConfig::new(EpochConfig::new(2, 1, spec).unwrap(), &[2, 2], 6).unwrap()
    }

    #[test]
    fn honest_changes_nothing() {
        let c = cfg();
        let p = probe_stability(&c, PublisherId(0), "honest", Arc::new(Honest), 500, 0).unwrap();
        assert_eq!(p.changed_fraction, 0.0);
        assert_eq!(p.delta.mean, 0.0);
        assert!(p.holds);
    }

    #[test]
    fn withholding_everything_costs() {
        let c = cfg();
        let p = probe_stability(&c, PublisherId(0), "withhold", Arc::new(Withhold { keep: 0 }), 4000, 0).unwrap();
        assert!(p.changed_fraction > 0.5);
        // Honest share is RAllPub / 2 = 0.5.
        assert!(p.delta.within(-0.5, 4.0), "{:?}", p.delta);
        assert!(p.holds);
    }

    #[test]
    fn all_probes_hold() {
        let c = cfg();
        for p in run_stability(&c, 3000, 1).unwrap() {
            assert!(p.holds, "{p:?}");
        }
    }
}
