//! Exhaustive validator best response and the one-step checks built on it.

use serde::Serialize;

use crate::analysis::grid::{candidate_vectors, ActionGrid};
use crate::error::{AnalysisError, GameError};
use crate::game::{self, BribeSchedule, GameConfig};
use crate::protocol::PublicationBundle;
use crate::rvalue::Valuation;
use crate::types::{vector_key, Money, PublisherId, RandomString, Report, Slot};

/// Utility-maximising reformulated vector over every candidate of the grid,
/// with its utility. Ties go to the honest vector, then to the smallest
/// reformulated key.
pub fn validator_best_response<V: Valuation + ?Sized>(
    bundles: &[PublicationBundle],
    s: &RandomString,
    val: &V,
    grid: &ActionGrid,
) -> (Vec<Slot>, Money) {
    let published: Vec<Report> = bundles.iter().flat_map(|b| b.reports().cloned()).collect();
    let schedules: Vec<&BribeSchedule> = bundles.iter().map(|b| &b.bribe).collect();
    best_response_over(&published, &schedules, s, val, grid.max_len)
}

pub(crate) fn best_response_over<V: Valuation + ?Sized>(
    published: &[Report],
    schedules: &[&BribeSchedule],
    s: &RandomString,
    val: &V,
    max_len: usize,
) -> (Vec<Slot>, Money) {
    let honest = game::honest_vector(published, s, val);
    let honest_key = vector_key(&honest);
    let mut best_u = game::validator_utility(&honest, schedules.iter().copied(), s, val);
    let mut best: Option<(Vec<u64>, Vec<Slot>)> = None;
    for raw in candidate_vectors(published, max_len) {
        let inc = game::reformulate(&raw, s, val);
        let key = vector_key(&inc);
        if key == honest_key {
            continue;
        }
        let u = game::validator_utility(&inc, schedules.iter().copied(), s, val);
        let better = u > best_u || (u == best_u && best.as_ref().is_some_and(|(k, _)| key < *k));
        if better {
            best_u = u;
            best = Some((key, inc));
        }
    }
    (best.map_or(honest, |(_, inc)| inc), best_u)
}

/// One publisher's choice in one step.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepAction {
    pub published: Vec<Report>,
    pub bribe: BribeSchedule,
}

/// Revenue of publisher `j` in a step where it plays `action`, everyone
/// else publishes honestly without bribes and the validator best-responds,
/// against its revenue with the same reports, no bribe and an honest
/// validator. Returns `(deviating, baseline)`.
pub fn bribe_bound_revenues(
    cfg: &GameConfig,
    j: PublisherId,
    action: &StepAction,
    s: &RandomString,
) -> Result<(Money, Money), AnalysisError> {
    for r in &action.published {
        if r.owner() != j || !cfg.reports.contains(r) {
            return Err(GameError::ForeignReport { publisher: j.0, report: r.id().0 }.into());
        }
    }
    action.bribe.check(j)?;
    let spec = cfg.spec();
    let mut published: Vec<Report> = cfg.reports.iter().filter(|r| r.owner() != j).cloned().collect();
    published.extend(action.published.iter().cloned());
    let (br, _) = best_response_over(&published, &[&action.bribe], s, spec, ActionGrid::default().max_len);
    let deviating = game::publisher_step_revenue(j, &action.bribe, &br, s, spec);
    let honest = game::honest_vector(&published, s, spec);
    let baseline = game::publisher_step_revenue(j, &BribeSchedule::new(), &honest, s, spec);
    Ok((deviating, baseline))
}

/// Whether bribing never raises a publisher's step revenue above what the
/// same reports earn without a bribe.
pub fn check_bribe_bound(
    cfg: &GameConfig,
    j: PublisherId,
    action: &StepAction,
    s: &RandomString,
) -> Result<bool, AnalysisError> {
    let (deviating, baseline) = bribe_bound_revenues(cfg, j, action, s)?;
    Ok(deviating <= baseline + 1e-9)
}

/// Whether every candidate vector other than the honest one pays an
/// unbribed validator strictly less.
pub fn check_validator_strictness<V: Valuation + ?Sized>(
    published: &[Report],
    s: &RandomString,
    val: &V,
    max_len: usize,
) -> bool {
    let none: [&BribeSchedule; 0] = [];
    let honest = game::honest_vector(published, s, val);
    let honest_key = vector_key(&honest);
    let u_honest = game::validator_utility(&honest, none, s, val);
    candidate_vectors(published, max_len).into_iter().all(|raw| {
        let inc = game::reformulate(&raw, s, val);
        vector_key(&inc) == honest_key || game::validator_utility(&inc, none, s, val) < u_honest
    })
}
