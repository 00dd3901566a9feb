//! Discrete iteration of the composed characteristic.
//!
//! Feeding the PER characteristic with the mRNA characteristic gives a scalar
//! map `F(u) = char_per(ks·char_mrna(u)).PN` on nuclear PER levels. Because
//! repression reverses order, `F` is strictly decreasing, so its iterates
//! alternate around the unique fixed point and the even and odd subsequences
//! are each monotone. They either meet (global attractivity of the iteration,
//! hence stability of the loop under any feedback delay) or settle on a
//! period-two orbit.

use serde::Serialize;

use crate::characteristics::{char_mrna, char_per};
use crate::error::SmallGainError;
use crate::model::{FullState, ModelParams};

pub const DEFAULT_SEEDS: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_BISECTION_TOL: f64 = 1e-10;
pub const MAX_BISECTIONS: usize = 200;

/// Separation, in units of `tol`, beyond which two subsequence limits are
/// treated as a genuine two-cycle rather than slow convergence.
pub const TWO_CYCLE_SEPARATION: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum IterationVerdict {
    Converged { fixed_point: f64, iterations: usize },
    TwoCycle { lo: f64, hi: f64 },
    MaxIterReached,
}

impl IterationVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            IterationVerdict::Converged { .. } => "Converged",
            IterationVerdict::TwoCycle { .. } => "TwoCycle",
            IterationVerdict::MaxIterReached => "MaxIterReached",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpiderwebTrace {
    /// u0, F(u0), F(F(u0)), ...
    pub iterates: Vec<f64>,
    /// Cobweb path against the diagonal: (u0,u0), (u0,F(u0)), (F(u0),F(u0)), ...
    pub segments: Vec<(f64, f64)>,
    pub verdict: IterationVerdict,
}

/// Overall classification of the loop from several seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum GainVerdict {
    Stable { fixed_point: f64 },
    Unstable { lo: f64, hi: f64 },
    Inconclusive,
}

impl GainVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            GainVerdict::Stable { .. } => "Stable",
            GainVerdict::Unstable { .. } => "Unstable",
            GainVerdict::Inconclusive => "Inconclusive",
        }
    }
}

/// PER subsystem input produced by the mRNA characteristic at `u`.
pub fn mrna_output(u: f64, p: &ModelParams) -> Result<f64, SmallGainError> {
    char_mrna(u, p)
        .map(|m| p.ks * m)
        .map_err(|source| SmallGainError::Characteristic { u, source })
}

/// F(u): nuclear PER at the PER equilibrium driven by the mRNA equilibrium
/// under repressor level `u`.
pub fn composed_map(u: f64, p: &ModelParams) -> Result<f64, SmallGainError> {
    let c = mrna_output(u, p)?;
    char_per(c, p)
        .map(|s| s.pn())
        .map_err(|source| SmallGainError::Characteristic { u, source })
}

/// Central-difference slope of F at `u` (one-sided if `u < h`).
pub fn composed_map_slope(u: f64, p: &ModelParams, h: f64) -> Result<f64, SmallGainError> {
    if u >= h {
        Ok((composed_map(u + h, p)? - composed_map(u - h, p)?) / (2.0 * h))
    } else {
        Ok((composed_map(u + h, p)? - composed_map(u, p)?) / h)
    }
}

pub fn iterate_spiderweb(
    u0: f64,
    p: &ModelParams,
    max_iter: usize,
    tol: f64,
) -> Result<SpiderwebTrace, SmallGainError> {
    if !(u0.is_finite() && u0 >= 0.0) {
        return Err(SmallGainError::InvalidArgument(format!(
            "seed must be nonnegative, got {u0}"
        )));
    }
    if !(tol > 0.0) {
        return Err(SmallGainError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }

    let mut iterates = vec![u0];
    let mut segments = vec![(u0, u0)];
    let mut verdict = IterationVerdict::MaxIterReached;

    for _ in 0..max_iter {
        let u = *iterates.last().unwrap();
        let next = composed_map(u, p)?;
        iterates.push(next);
        segments.push((u, next));
        segments.push((next, next));

        let n = iterates.len() - 1;
        let step = (iterates[n] - iterates[n - 1]).abs();
        if step < tol {
            verdict = IterationVerdict::Converged {
                fixed_point: next,
                iterations: n,
            };
            break;
        }
        if n >= 3
            && (iterates[n] - iterates[n - 2]).abs() < tol
            && (iterates[n - 1] - iterates[n - 3]).abs() < tol
            && step > TWO_CYCLE_SEPARATION * tol
        {
            verdict = IterationVerdict::TwoCycle {
                lo: iterates[n].min(iterates[n - 1]),
                hi: iterates[n].max(iterates[n - 1]),
            };
            break;
        }
    }

    Ok(SpiderwebTrace {
        iterates,
        segments,
        verdict,
    })
}

/// Fixed point of F by bisection on `F(u) - u` over `[0, F(0)]`.
pub fn fixed_point(p: &ModelParams, tol: f64) -> Result<f64, SmallGainError> {
    let g = |u: f64| composed_map(u, p).map(|f| f - u);
    let mut lo = 0.0;
    let mut hi = composed_map(0.0, p)?;
    let g_lo = g(lo)?;
    let g_hi = g(hi)?;
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(SmallGainError::NoBracket { lo, hi, g_lo, g_hi });
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo < tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid)?;
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-loop equilibrium assembled from the two characteristics at the
/// fixed point of F.
pub fn closed_loop_equilibrium(p: &ModelParams, tol: f64) -> Result<FullState, SmallGainError> {
    let u = fixed_point(p, tol)?;
    let m = char_mrna(u, p).map_err(|source| SmallGainError::Characteristic { u, source })?;
    let per = char_per(p.ks * m, p).map_err(|source| SmallGainError::Characteristic { u, source })?;
    FullState::from_parts(m, per).map_err(|e| SmallGainError::InvalidArgument(e.to_string()))
}

pub fn small_gain_verdict(
    p: &ModelParams,
    seeds: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<GainVerdict, SmallGainError> {
    if seeds.is_empty() {
        return Err(SmallGainError::EmptySeeds);
    }
    let verdicts = seeds
        .iter()
        .map(|&u0| iterate_spiderweb(u0, p, max_iter, tol).map(|t| t.verdict))
        .collect::<Result<Vec<_>, _>>()?;

    if let Some(&IterationVerdict::TwoCycle { lo, hi }) = verdicts
        .iter()
        .find(|v| matches!(v, IterationVerdict::TwoCycle { .. }))
    {
        return Ok(GainVerdict::Unstable { lo, hi });
    }

    let mut limits = Vec::with_capacity(verdicts.len());
    for v in &verdicts {
        match *v {
            IterationVerdict::Converged { fixed_point, .. } => limits.push(fixed_point),
            _ => return Ok(GainVerdict::Inconclusive),
        }
    }
    let first = limits[0];
    if limits.iter().all(|u| (u - first).abs() < TWO_CYCLE_SEPARATION * tol) {
        Ok(GainVerdict::Stable { fixed_point: first })
    } else {
        Ok(GainVerdict::Inconclusive)
    }
}
