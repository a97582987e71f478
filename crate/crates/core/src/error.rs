use thiserror::Error;

/// Invalid parameters for a random-value function or epoch.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("lambda must be finite and > 0, got {0}")]
    Lambda(f64),
    #[error("p must lie in (0, 1], got {0}")]
    Probability(f64),
    #[error("r_min must be finite and >= 0, got {0}")]
    RMin(f64),
    #[error("r_max ({r_max}) must exceed r_min ({r_min})")]
    RMax { r_min: f64, r_max: f64 },
    #[error("report count must be >= 1")]
    ZeroReports,
    #[error("t_total must be >= 1 and 1 <= t_pub <= t_total (got t_total={t_total}, t_pub={t_pub})")]
    Window { t_total: u64, t_pub: u64 },
    #[error("{field} must be >= 1")]
    NonPositive { field: &'static str },
}

/// Faults raised by the epoch engine. These are harness bugs, not modelled
/// deviations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("publisher {publisher} published report {report} it does not own")]
    ForeignReport { publisher: u32, report: u64 },
    #[error("validator included report {0} that nobody published")]
    UnpublishedReport(u64),
    #[error("report {0} included twice")]
    DuplicateInclusion(u64),
    #[error("negative bribe {amount} in schedule of publisher {publisher}")]
    NegativeBribe { publisher: u32, amount: f64 },
    #[error("no strategy supplied for publisher {0}")]
    MissingStrategy(u32),
    #[error("publisher {0} not in configuration")]
    UnknownPublisher(u32),
    #[error("bad strategy: {0}")]
    Strategy(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// Precondition failures of the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(
        "instance exceeds the search budget: {0}; the search grows exponentially in reports, steps and bribe levels"
    )]
    OverBudget(String),
    #[error("baseline violates progress: {0}")]
    ProgressViolated(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Spec(#[from] SpecError),
}
