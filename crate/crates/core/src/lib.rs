//! Goldbeter's circadian oscillator viewed as a negative-feedback loop of two
//! monotone subsystems.
//!
//! - [`model`]: parameters, states and vector fields.
//! - [`characteristics`]: steady-state input/output maps and the checkable
//!   hypotheses behind them.
//! - [`smallgain`]: the discrete iteration of the composed characteristic
//!   and the closed-loop equilibrium.
//! - [`integrate`]: fixed-step RK4 for the undelayed loop and for a constant
//!   feedback delay, plus steady-state and oscillation measurements.

pub mod characteristics;
pub mod error;
pub mod integrate;
pub mod model;
pub mod smallgain;

pub use characteristics::{
    char_mrna, char_per, check_proposition_conditions, check_state_space, invert_mm,
    ConditionReport, StateSpaceReport, DEFAULT_MBAR,
};
pub use error::{CascadeStage, CharacteristicError, IntegrateError, ModelError, SmallGainError};
pub use integrate::{
    integrate_dde, integrate_ode, oscillation_metrics, steady_state, OscillationMetrics,
    Trajectory,
};
pub use model::{hill_rate, mm_rate, rhs_full, rhs_mrna, rhs_per, FullState, ModelParams, PerState};
pub use smallgain::{
    closed_loop_equilibrium, composed_map, iterate_spiderweb, small_gain_verdict, GainVerdict,
    IterationVerdict, SpiderwebTrace,
};
