//! Steady-state input/output maps of the two subsystems and the checkable
//! hypotheses that make them well defined.
//!
//! The PER characteristic is solved in closed form. Setting the chain sums
//! P0+P1+P2+PN, P1+P2+PN, P2+PN and PN stationary gives a triangular cascade
//!
//! ```text
//! vd·P2/(kd+P2)   = c
//! k2·PN           = k1·P2
//! V3·P1/(K3+P1)   = c + V4·P2/(K4+P2)
//! V1·P0/(K1+P0)   = c + V2·P1/(K2+P1)
//! ```
//!
//! each stage inverting one strictly increasing saturating rate.

use serde::Serialize;

use crate::error::{CascadeStage, CharacteristicError};
use crate::model::{mm_rate, powi, ModelParams, PerState};

/// Upper bound on the transcription rate under which the mRNA state space
/// [0, M̄] is usable.
pub const VS_UPPER_BOUND: f64 = 0.54;

/// Default upper edge of the mRNA state space.
pub const DEFAULT_MBAR: f64 = 2.45;

/// One strict inequality `lhs < rhs` (or `lhs <= rhs`) with both sides kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Comparison {
    fn less(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs < rhs,
        }
    }

    fn less_eq(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs,
        }
    }
}

/// Hypotheses guaranteeing a unique globally attracting PER equilibrium for
/// every constant input up to `c_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    /// vd + V2 < V1
    pub c1: Comparison,
    /// V1 + V4 < V2 + V3
    pub c2: Comparison,
    /// c_max < vd
    pub c3: Comparison,
    /// vd + V4 < V3
    pub c4: Comparison,
    /// c_max + V2 < V1, implied by c1 and c3.
    pub c1_implied: Comparison,
    pub c_max: f64,
    pub overall: bool,
}

impl ConditionReport {
    pub fn entries(&self) -> [(&'static str, &'static str, Comparison); 5] {
        [
            ("C1", "vd + V2 < V1", self.c1),
            ("C2", "V1 + V4 < V2 + V3", self.c2),
            ("C3", "c_max < vd", self.c3),
            ("C4", "vd + V4 < V3", self.c4),
            ("C1'", "c_max + V2 < V1", self.c1_implied),
        ]
    }
}

/// Constraints on vs and M̄ making [0, M̄] a forward-invariant state space
/// whose output ks·M stays below vd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateSpaceReport {
    /// vs <= 0.54
    pub vs_bound: Comparison,
    /// vs < vm
    pub vs_lt_vm: Comparison,
    /// vs·km/(vm - vs) <= M̄
    pub mbar_lower: Comparison,
    /// M̄ < vd/ks
    pub mbar_upper: Comparison,
    pub mbar: f64,
    pub overall: bool,
}

impl StateSpaceReport {
    pub fn vs_bound_ok(&self) -> bool {
        self.vs_bound.holds
    }
    pub fn mbar_lower_ok(&self) -> bool {
        self.mbar_lower.holds
    }
    pub fn mbar_upper_ok(&self) -> bool {
        self.mbar_upper.holds
    }

    pub fn entries(&self) -> [(&'static str, &'static str, Comparison); 4] {
        [
            ("vs_bound", "vs <= 0.54", self.vs_bound),
            ("vs_lt_vm", "vs < vm", self.vs_lt_vm),
            ("mbar_lower", "vs*km/(vm - vs) <= mbar", self.mbar_lower),
            ("mbar_upper", "mbar < vd/ks", self.mbar_upper),
        ]
    }
}

fn check_input(x: f64) -> Result<f64, CharacteristicError> {
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(CharacteristicError::InvalidInput(x))
    }
}

/// Steady mRNA level under constant repressor input `u1`.
pub fn char_mrna(u1: f64, p: &ModelParams) -> Result<f64, CharacteristicError> {
    let u1 = check_input(u1)?;
    if p.vs >= p.vm {
        return Err(CharacteristicError::ConstraintViolation(format!(
            "char_mrna requires vs < vm (vs = {}, vm = {})",
            p.vs, p.vm
        )));
    }
    let ki_n = powi(p.ki, p.n);
    Ok(p.vs * ki_n * p.km / (p.vm * ki_n + p.vm * powi(u1, p.n) - p.vs * ki_n))
}

fn invert_stage(
    v: f64,
    k: f64,
    a: f64,
    stage: Option<CascadeStage>,
) -> Result<f64, CharacteristicError> {
    let a = check_input(a)?;
    if a >= v {
        return Err(CharacteristicError::SaturationExceeded {
            stage,
            target: a,
            limit: v,
        });
    }
    Ok(k * a / (v - a))
}

/// Solves V·x/(K + x) = a for x. Requires 0 <= a < V.
pub fn invert_mm(v: f64, k: f64, a: f64) -> Result<f64, CharacteristicError> {
    invert_stage(v, k, a, None)
}

/// Unique equilibrium of the PER subsystem under constant input `c`.
pub fn char_per(c: f64, p: &ModelParams) -> Result<PerState, CharacteristicError> {
    let c = check_input(c)?;
    let p2 = invert_stage(p.vd, p.kd, c, Some(CascadeStage::P2))?;
    let pn = p.k1 / p.k2 * p2;
    let p1 = invert_stage(
        p.v3,
        p.k_3,
        c + mm_rate(p.v4, p.k_4, p2),
        Some(CascadeStage::P1),
    )?;
    let p0 = invert_stage(
        p.v1,
        p.k_1,
        c + mm_rate(p.v2, p.k_2, p1),
        Some(CascadeStage::P0),
    )?;
    PerState::new(p0, p1, p2, pn)
        .map_err(|e| CharacteristicError::ConstraintViolation(e.to_string()))
}

/// Largest PER input the mRNA subsystem can emit from [0, M̄].
pub fn default_c_max(p: &ModelParams, mbar: f64) -> f64 {
    p.ks * mbar
}

pub fn check_proposition_conditions(p: &ModelParams, c_max: f64) -> ConditionReport {
    let c1 = Comparison::less(p.vd + p.v2, p.v1);
    let c2 = Comparison::less(p.v1 + p.v4, p.v2 + p.v3);
    let c3 = Comparison::less(c_max, p.vd);
    let c4 = Comparison::less(p.vd + p.v4, p.v3);
    let c1_implied = Comparison::less(c_max + p.v2, p.v1);
    ConditionReport {
        c1,
        c2,
        c3,
        c4,
        c1_implied,
        c_max,
        overall: c1.holds && c2.holds && c3.holds && c4.holds,
    }
}

pub fn check_state_space(p: &ModelParams, mbar: f64) -> StateSpaceReport {
    let vs_bound = Comparison::less_eq(p.vs, VS_UPPER_BOUND);
    let vs_lt_vm = Comparison::less(p.vs, p.vm);
    // Past vm the lower bound is meaningless; report it as infinite.
    let lower = if vs_lt_vm.holds {
        p.vs * p.km / (p.vm - p.vs)
    } else {
        f64::INFINITY
    };
    let mbar_lower = Comparison::less_eq(lower, mbar);
    let mbar_upper = Comparison::less(mbar, p.vd / p.ks);
    StateSpaceReport {
        vs_bound,
        vs_lt_vm,
        mbar_lower,
        mbar_upper,
        mbar,
        overall: vs_bound.holds && vs_lt_vm.holds && mbar_lower.holds && mbar_upper.holds,
    }
}
