use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter {name} must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("state component {name} must be nonnegative and finite, got {value}")]
    InvalidState { name: &'static str, value: f64 },
}

/// Stage of the PER equilibrium cascade, each guarded by one of the
/// saturation conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeStage {
    /// Degradation must absorb the input: c < vd.
    P2,
    /// Second phosphorylation must carry c plus P2 dephosphorylation.
    P1,
    /// First phosphorylation must carry c plus P1 dephosphorylation.
    P0,
}

impl fmt::Display for CascadeStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CascadeStage::P2 => "P2",
            CascadeStage::P1 => "P1",
            CascadeStage::P0 => "P0",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CharacteristicError {
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("saturation exceeded{}: target rate {target} is not below the maximal rate {limit}",
        .stage.map(|s| format!(" at stage {s}")).unwrap_or_default())]
    SaturationExceeded {
        stage: Option<CascadeStage>,
        target: f64,
        limit: f64,
    },
    #[error("input must be nonnegative and finite, got {0}")]
    InvalidInput(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmallGainError {
    #[error("composed characteristic undefined at u = {u}: {source}")]
    Characteristic {
        u: f64,
        #[source]
        source: CharacteristicError,
    },
    #[error("no sign change of F(u) - u on [{lo}, {hi}] (g = {g_lo}, {g_hi})")]
    NoBracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },
    #[error("seed list is empty")]
    EmptySeeds,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("non-finite state at t = {t} (step too large?)")]
    NonFinite { t: f64 },
    #[error("component {component} fell to {value} at t = {t}")]
    NegativeState {
        t: f64,
        component: &'static str,
        value: f64,
    },
    #[error("steady state not reached by t = {t_max} (residual {residual:e})")]
    NotConverged { t_max: f64, residual: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("usage: {0}")]
    Usage(String),
}
