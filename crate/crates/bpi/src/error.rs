use thiserror::Error;

/// Errors surfaced by analytic evaluators, simulators and experiment drivers.
#[derive(Debug, Error)]
pub enum BpiError {
    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),

    #[error("supercritical cooperative regime (varsigma = {varsigma} > 0): {context}")]
    Regime { varsigma: f64, context: &'static str },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("interaction denominator degenerate at u = {u} (value {value:.3e})")]
    DegenerateDenominator { u: f64, value: f64 },

    #[error("quadrature tolerance not met: {context} (error {error:.3e} > tol {tol:.3e})")]
    ToleranceNotMet {
        context: &'static str,
        error: f64,
        tol: f64,
    },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("assumption (E) violated: the relevant E-functional is finite ({0})")]
    AssumptionEViolated(String),

    #[error("event cap of {cap} exceeded (t = {t}, state = {state})")]
    EventCapExceeded { cap: u64, t: f64, state: u64 },

    #[error("zero state encountered before the random clock closed (t = {0})")]
    ZeroState(f64),

    #[error("linear solver diverged: {0}")]
    SolverDiverged(String),

    #[error("Riccati solver stiffness failure: {0}")]
    StiffnessFailure(String),

    #[error("worker {index} panicked: {message}")]
    WorkerPanic { index: u64, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}
