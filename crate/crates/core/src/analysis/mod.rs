//! Best responses, equilibrium and robustness checks.

pub mod best_response;
pub mod collusion;
pub mod grid;
pub mod impossibility;
pub(crate) mod scene;
pub mod spne;
pub mod stability;

pub use best_response::{check_bribe_bound, check_validator_strictness, validator_best_response, StepAction};
pub use collusion::{
    check_coalition_equivalence, check_pub_val_collusion, check_sybil_proofness, coalition_transform, sybil_split,
};
pub use grid::{ActionGrid, BribeLevel};
pub use impossibility::{impossibility_demo, Baseline, ImpossibilityReport};
pub use spne::{verify_spne, DeviationKind, DeviationResult, EquilibriumReport, Participant, Verdict};
pub use stability::{probe_stability, run_stability, StabilityProbe};
