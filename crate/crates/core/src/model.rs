//! Goldbeter's five-variable PER/mRNA oscillator.
//!
//! The closed loop is split into two open-loop subsystems wired in negative
//! feedback:
//!
//! | Subsystem | State             | Input             | Output         |
//! |-----------|-------------------|-------------------|----------------|
//! | mRNA      | M                 | u1 (nuclear PER)  | y1 = ks·M      |
//! | PER       | P0, P1, P2, PN    | u2 (translation)  | y2 = PN        |
//!
//! Units are µM for concentrations and hours for time.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Rate and threshold constants of the oscillator.
///
/// Construction through [`ModelParams::validate`] only checks positivity;
/// the stability hypotheses live in [`crate::characteristics`], so the
/// oscillating reference set (vs = 0.76) is representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Maximal transcription rate (µM/h).
    pub vs: f64,
    /// Maximal mRNA degradation rate (µM/h).
    pub vm: f64,
    /// Michaelis constant of mRNA degradation (µM).
    pub km: f64,
    /// Translation rate constant (1/h).
    pub ks: f64,
    /// Maximal degradation rate of doubly phosphorylated PER (µM/h).
    pub vd: f64,
    /// Michaelis constant of PER degradation (µM).
    pub kd: f64,
    /// Nuclear import rate constant (1/h).
    pub k1: f64,
    /// Nuclear export rate constant (1/h).
    pub k2: f64,
    #[serde(rename = "V1")]
    pub v1: f64,
    #[serde(rename = "V2")]
    pub v2: f64,
    #[serde(rename = "V3")]
    pub v3: f64,
    #[serde(rename = "V4")]
    pub v4: f64,
    #[serde(rename = "K1")]
    pub k_1: f64,
    #[serde(rename = "K2")]
    pub k_2: f64,
    #[serde(rename = "K3")]
    pub k_3: f64,
    #[serde(rename = "K4")]
    pub k_4: f64,
    /// Repression threshold of nuclear PER (µM).
    #[serde(rename = "KI")]
    pub ki: f64,
    /// Hill cooperativity of transcriptional repression.
    pub n: u32,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            vs: 0.76,
            vm: 0.65,
            km: 0.5,
            ks: 0.38,
            vd: 0.95,
            kd: 0.2,
            k1: 1.9,
            k2: 1.3,
            v1: 3.2,
            v2: 1.58,
            v3: 5.0,
            v4: 2.5,
            k_1: 2.0,
            k_2: 2.0,
            k_3: 2.0,
            k_4: 2.0,
            ki: 1.0,
            n: 4,
        }
    }
}

impl ModelParams {
    /// The reference table with only the transcription rate replaced.
    pub fn with_vs(vs: f64) -> Self {
        Self {
            vs,
            ..Self::default()
        }
    }

    /// Field names paired with their values, in declaration order.
    pub fn named_rates(&self) -> [(&'static str, f64); 17] {
        [
            ("vs", self.vs),
            ("vm", self.vm),
            ("km", self.km),
            ("ks", self.ks),
            ("vd", self.vd),
            ("kd", self.kd),
            ("k1", self.k1),
            ("k2", self.k2),
            ("V1", self.v1),
            ("V2", self.v2),
            ("V3", self.v3),
            ("V4", self.v4),
            ("K1", self.k_1),
            ("K2", self.k_2),
            ("K3", self.k_3),
            ("K4", self.k_4),
            ("KI", self.ki),
        ]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in self.named_rates() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        if self.n == 0 {
            return Err(ModelError::InvalidParameter {
                name: "n",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// Integer power by repeated multiplication.
#[inline]
pub(crate) fn powi(x: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, _| acc * x)
}

fn check_component(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(ModelError::InvalidState { name, value })
    }
}

/// Concentrations of the closed loop: mRNA plus the four PER forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FullState {
    m: f64,
    p0: f64,
    p1: f64,
    p2: f64,
    pn: f64,
}

impl FullState {
    pub const NAMES: [&'static str; 5] = ["M", "P0", "P1", "P2", "PN"];

    pub fn new(m: f64, p0: f64, p1: f64, p2: f64, pn: f64) -> Result<Self, ModelError> {
        Ok(Self {
            m: check_component("M", m)?,
            p0: check_component("P0", p0)?,
            p1: check_component("P1", p1)?,
            p2: check_component("P2", p2)?,
            pn: check_component("PN", pn)?,
        })
    }

    /// Every component set to `value`.
    pub fn splat(value: f64) -> Result<Self, ModelError> {
        Self::new(value, value, value, value, value)
    }

    pub fn from_array(x: [f64; 5]) -> Result<Self, ModelError> {
        Self::new(x[0], x[1], x[2], x[3], x[4])
    }

    /// Wraps an integrator state that may carry round-off below zero.
    pub(crate) fn from_raw(x: [f64; 5]) -> Self {
        Self {
            m: x[0],
            p0: x[1],
            p1: x[2],
            p2: x[3],
            pn: x[4],
        }
    }

    pub fn from_parts(m: f64, per: PerState) -> Result<Self, ModelError> {
        Ok(Self {
            m: check_component("M", m)?,
            p0: per.p0,
            p1: per.p1,
            p2: per.p2,
            pn: per.pn,
        })
    }

    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn p0(&self) -> f64 {
        self.p0
    }
    pub fn p1(&self) -> f64 {
        self.p1
    }
    pub fn p2(&self) -> f64 {
        self.p2
    }
    pub fn pn(&self) -> f64 {
        self.pn
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.m, self.p0, self.p1, self.p2, self.pn]
    }

    pub fn per(&self) -> PerState {
        PerState {
            p0: self.p0,
            p1: self.p1,
            p2: self.p2,
            pn: self.pn,
        }
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &FullState) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Concentrations of the four PER forms (cytosolic P0, P1, P2 and nuclear PN).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerState {
    p0: f64,
    p1: f64,
    p2: f64,
    pn: f64,
}

impl PerState {
    pub fn new(p0: f64, p1: f64, p2: f64, pn: f64) -> Result<Self, ModelError> {
        Ok(Self {
            p0: check_component("P0", p0)?,
            p1: check_component("P1", p1)?,
            p2: check_component("P2", p2)?,
            pn: check_component("PN", pn)?,
        })
    }

    pub fn from_array(x: [f64; 4]) -> Result<Self, ModelError> {
        Self::new(x[0], x[1], x[2], x[3])
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }
    pub fn p1(&self) -> f64 {
        self.p1
    }
    pub fn p2(&self) -> f64 {
        self.p2
    }
    pub fn pn(&self) -> f64 {
        self.pn
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.p0, self.p1, self.p2, self.pn]
    }
}

/// Input/output signals of the two subsystems at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsystemIo {
    pub u1: f64,
    pub y1: f64,
    pub u2: f64,
    pub y2: f64,
}

impl SubsystemIo {
    /// Signals of the undelayed closed loop at `s`: u1 = y2 = PN, u2 = y1 = ks·M.
    pub fn closed_loop(s: &FullState, p: &ModelParams) -> Self {
        let y1 = p.ks * s.m;
        let y2 = s.pn;
        Self {
            u1: y2,
            y1,
            u2: y1,
            y2,
        }
    }
}

/// Repressed transcription rate vs·KIⁿ/(KIⁿ + uⁿ).
pub fn hill_rate(u: f64, p: &ModelParams) -> f64 {
    let ki_n = powi(p.ki, p.n);
    p.vs * ki_n / (ki_n + powi(u, p.n))
}

/// Saturating rate V·x/(K + x).
#[inline]
pub fn mm_rate(v: f64, k: f64, x: f64) -> f64 {
    v * x / (k + x)
}

pub fn rhs_mrna(m: f64, u1: f64, p: &ModelParams) -> f64 {
    hill_rate(u1, p) - mm_rate(p.vm, p.km, m)
}

fn rhs_per_raw(x: &[f64; 4], u2: f64, p: &ModelParams) -> [f64; 4] {
    let [p0, p1, p2, pn] = *x;
    let phos0 = mm_rate(p.v1, p.k_1, p0);
    let dephos1 = mm_rate(p.v2, p.k_2, p1);
    let phos1 = mm_rate(p.v3, p.k_3, p1);
    let dephos2 = mm_rate(p.v4, p.k_4, p2);
    let import = p.k1 * p2;
    let export = p.k2 * pn;
    let degradation = mm_rate(p.vd, p.kd, p2);
    [
        u2 - phos0 + dephos1,
        phos0 - dephos1 - phos1 + dephos2,
        phos1 - dephos2 - import + export - degradation,
        import - export,
    ]
}

/// Vector field of the PER subsystem under input `u2`.
pub fn rhs_per(s: &PerState, u2: f64, p: &ModelParams) -> [f64; 4] {
    rhs_per_raw(&s.to_array(), u2, p)
}

/// Closed-loop vector field on a raw state vector. `pn_feedback` is the
/// nuclear PER seen by the transcription term.
pub(crate) fn rhs_full_raw(x: &[f64; 5], p: &ModelParams, pn_feedback: f64) -> [f64; 5] {
    let dm = rhs_mrna(x[0], pn_feedback, p);
    let [d0, d1, d2, dn] = rhs_per_raw(&[x[1], x[2], x[3], x[4]], p.ks * x[0], p);
    [dm, d0, d1, d2, dn]
}

/// Closed-loop vector field. Pass `s.pn()` as `pn_feedback` for the
/// undelayed system, or the delayed history value for the DDE.
pub fn rhs_full(s: &FullState, p: &ModelParams, pn_feedback: f64) -> [f64; 5] {
    rhs_full_raw(&s.to_array(), p, pn_feedback)
}
