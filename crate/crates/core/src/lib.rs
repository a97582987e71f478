//! Reporting-protocol library built on personal random rewards.
//!
//! Publishers race to get functionally identical reports on chain. Each
//! report gets a private random value derived from the block's random
//! string, the two best reports are included, and the contract pays the
//! winner the gap to the runner-up while the validator keeps the
//! runner-up's value. The crate is split into:
//!
//! - [`types`], [`oracle`], [`vrf`]: identities, hashing and the simulated VRF.
//! - [`rvalue`]: random-value families and their closed-form analysis.
//! - [`protocol`]: publication, inclusion and reward processing.
//! - [`game`]: the sequential game, utilities and the epoch engine.
//! - [`parse`]: strategies from short text such as `bribe-to-skip:amount=2.5`.
//! - [`analysis`]: best responses, equilibrium and robustness checks.

pub mod analysis;
pub mod error;
pub mod game;
pub mod oracle;
pub mod parse;
pub mod protocol;
pub mod rvalue;
pub mod seed;
pub mod stats;
pub mod types;
pub mod vrf;

pub use error::{AnalysisError, GameError, SpecError};
pub use types::{
    Block, Digest256, Inclusion, Money, PublisherId, RandomString, Report, ReportId, ReportMinter, Slot, ValidatorId,
    ValidatorKeys,
};
