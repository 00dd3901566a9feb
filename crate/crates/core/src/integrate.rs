//! Fixed-step integration of the closed loop, with or without a constant
//! delay on the nuclear PER seen by transcription.
//!
//! Both modes share one classical RK4 stepper. In delay mode the feedback
//! value at each stage is read from a [`DelayHistory`] by cubic Hermite
//! interpolation of PN and its derivative (method of steps). The derivative
//! of PN depends only on P2 and PN, so it is exact at every stored sample.

use std::collections::VecDeque;
use std::io::{self, Write};

use serde::Serialize;

use crate::error::IntegrateError;
use crate::model::{rhs_full_raw, FullState, ModelParams};

pub const DEFAULT_ODE_STEP: f64 = 0.01;
pub const DEFAULT_DDE_STEP: f64 = 0.05;
pub const DEFAULT_STEADY_TOL: f64 = 1e-9;
pub const DEFAULT_STEADY_T_MAX: f64 = 1e4;

/// Round-off allowed below zero before a run is rejected.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-9;

/// Fraction of the amplitude above the minimum a maximum must clear to count
/// as a peak.
const PEAK_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<FullState>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[FullState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> (f64, FullState) {
        (*self.times.last().unwrap(), *self.states.last().unwrap())
    }

    /// Builds a trajectory from samples, checking the time grid is strictly
    /// increasing and the lengths agree.
    pub fn from_samples(times: Vec<f64>, states: Vec<FullState>) -> Result<Self, IntegrateError> {
        if times.len() != states.len() {
            return Err(IntegrateError::Usage(format!(
                "{} times but {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(IntegrateError::Usage("times must be strictly increasing".into()));
        }
        Ok(Self { times, states })
    }

    /// Componentwise series, e.g. `component(0)` is M(t).
    pub fn component(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.to_array()[index]).collect()
    }

    /// Writes `t,M,P0,P1,P2,PN` rows (every `stride`-th sample, always
    /// including the last).
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> io::Result<()> {
        let stride = stride.max(1);
        writeln!(out, "t,M,P0,P1,P2,PN")?;
        let last = self.len().saturating_sub(1);
        for (i, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            if i % stride != 0 && i != last {
                continue;
            }
            let [m, p0, p1, p2, pn] = s.to_array();
            writeln!(out, "{t:e},{m:e},{p0:e},{p1:e},{p2:e},{pn:e}")?;
        }
        Ok(())
    }
}

/// Classical RK4 step for an autonomous-in-feedback vector field. `feedback`
/// supplies the delayed value at the start, midpoint and end of the step.
fn rk4_step<const N: usize, F>(x: &[f64; N], h: f64, f: F) -> [f64; N]
where
    F: Fn(&[f64; N], usize) -> [f64; N],
{
    let axpy = |a: &[f64; N], s: f64, d: &[f64; N]| {
        let mut out = *a;
        for i in 0..N {
            out[i] += s * d[i];
        }
        out
    };
    let k1 = f(x, 0);
    let k2 = f(&axpy(x, 0.5 * h, &k1), 1);
    let k3 = f(&axpy(x, 0.5 * h, &k2), 1);
    let k4 = f(&axpy(x, h, &k3), 2);
    let mut out = *x;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn check_state(t: f64, x: &[f64; 5]) -> Result<(), IntegrateError> {
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(IntegrateError::NonFinite { t });
        }
        if v < -NEGATIVITY_TOLERANCE {
            return Err(IntegrateError::NegativeState {
                t,
                component: FullState::NAMES[i],
                value: v,
            });
        }
    }
    Ok(())
}

fn step_count(t_end: f64, h: f64) -> Result<usize, IntegrateError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(IntegrateError::Usage(format!("step must be positive, got {h}")));
    }
    if !(t_end >= h && t_end.is_finite()) {
        return Err(IntegrateError::Usage(format!(
            "t_end must be at least one step ({h}), got {t_end}"
        )));
    }
    Ok((t_end / h).round() as usize)
}

fn run_fixed_step<F>(
    x0: &FullState,
    t_end: f64,
    h: f64,
    mut step: F,
) -> Result<Trajectory, IntegrateError>
where
    F: FnMut(usize, &[f64; 5]) -> [f64; 5],
{
    let n = step_count(t_end, h)?;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut x = x0.to_array();
    times.push(0.0);
    states.push(*x0);
    for k in 0..n {
        x = step(k, &x);
        let t = (k + 1) as f64 * h;
        check_state(t, &x)?;
        times.push(t);
        states.push(FullState::from_raw(x));
    }
    Ok(Trajectory { times, states })
}

/// Undelayed closed loop with fixed-step RK4.
pub fn integrate_ode(
    x0: &FullState,
    p: &ModelParams,
    t_end: f64,
    h: f64,
) -> Result<Trajectory, IntegrateError> {
    run_fixed_step(x0, t_end, h, |_, x| {
        rk4_step(x, h, |y, _| rhs_full_raw(y, p, y[4]))
    })
}

/// Dense record of PN(t) and dPN/dt on the uniform step grid, trimmed to the
/// trailing delay window. Before t = 0 the history is the constant initial
/// value.
#[derive(Debug, Clone)]
pub struct DelayHistory {
    tau: f64,
    h: f64,
    initial: f64,
    /// Grid index of the front sample.
    first_index: usize,
    samples: VecDeque<(f64, f64)>,
}

impl DelayHistory {
    pub fn new(tau: f64, h: f64, initial: f64) -> Self {
        Self {
            tau,
            h,
            initial,
            first_index: 0,
            samples: VecDeque::new(),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Appends the sample at grid index `first_index + len` and drops samples
    /// no longer reachable by a query `t - tau`.
    pub fn push(&mut self, value: f64, derivative: f64) {
        self.samples.push_back((value, derivative));
        let keep = (self.tau / self.h).ceil() as usize + 2;
        while self.samples.len() > keep {
            self.samples.pop_front();
            self.first_index += 1;
        }
    }

    /// Time span currently held in the buffer.
    pub fn span(&self) -> Option<(f64, f64)> {
        if self.samples.is_empty() {
            return None;
        }
        let start = self.first_index as f64 * self.h;
        let end = (self.first_index + self.samples.len() - 1) as f64 * self.h;
        Some((start, end))
    }

    /// PN at absolute time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= 0.0 || self.samples.is_empty() {
            return self.initial;
        }
        let pos = t / self.h;
        let last = self.first_index + self.samples.len() - 1;
        // Clamp round-off at the edges of the buffered span.
        let mut i = (pos.floor() as usize).max(self.first_index);
        if i >= last {
            if last == self.first_index {
                return self.samples[0].0;
            }
            i = last - 1;
        }
        debug_assert!(i >= self.first_index, "query {t} before buffered span");
        let (y0, d0) = self.samples[i - self.first_index];
        let (y1, d1) = self.samples[i + 1 - self.first_index];
        let s = (pos - i as f64).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * self.h * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * self.h * d1
    }
}

/// Closed loop with transcription driven by PN(t - tau), constant history
/// PN = x0.PN on [-tau, 0]. `tau = 0` is the undelayed system.
pub fn integrate_dde(
    x0: &FullState,
    p: &ModelParams,
    tau: f64,
    t_end: f64,
    h: f64,
) -> Result<Trajectory, IntegrateError> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(IntegrateError::Usage(format!("delay must be nonnegative, got {tau}")));
    }
    if tau == 0.0 {
        return integrate_ode(x0, p, t_end, h);
    }
    if h > tau {
        return Err(IntegrateError::Usage(format!(
            "step {h} exceeds the delay {tau}"
        )));
    }
    let mut history = DelayHistory::new(tau, h, x0.pn());
    run_fixed_step(x0, t_end, h, |k, x| {
        history.push(x[4], p.k1 * x[3] - p.k2 * x[4]);
        let t = k as f64 * h;
        let delayed = [
            history.value_at(t - tau),
            history.value_at(t + 0.5 * h - tau),
            history.value_at(t + h - tau),
        ];
        rk4_step(x, h, |y, stage| rhs_full_raw(y, p, delayed[stage]))
    })
}

fn inf_norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Integrates `rhs` from `x0` until its ∞-norm drops below `tol`.
pub fn steady_state<const N: usize, F>(
    x0: [f64; N],
    rhs: F,
    tol: f64,
    t_max: f64,
    h: f64,
) -> Result<[f64; N], IntegrateError>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let n = step_count(t_max, h)?;
    let mut x = x0;
    for k in 0..=n {
        let residual = inf_norm(&rhs(&x));
        if !residual.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite { t: k as f64 * h });
        }
        if residual < tol {
            return Ok(x);
        }
        if k == n {
            return Err(IntegrateError::NotConverged { t_max, residual });
        }
        x = rk4_step(&x, h, |y, _| rhs(y));
    }
    unreachable!()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodEstimate {
    pub mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationMetrics {
    /// Peak-to-peak amplitude of M, P0, P1, P2, PN after the cut.
    pub amplitude: [f64; 5],
    /// Mean spacing of successive M maxima; `None` with fewer than two peaks.
    pub period: Option<PeriodEstimate>,
    pub cycles: usize,
    pub transient_cut: f64,
}

impl OscillationMetrics {
    pub fn require_period(&self) -> Result<PeriodEstimate, IntegrateError> {
        self.period.ok_or_else(|| {
            IntegrateError::InsufficientData(format!(
                "{} cycles detected after t = {}",
                self.cycles, self.transient_cut
            ))
        })
    }
}

/// Peak time by a parabola through the sample maximum and its neighbours.
fn refine_peak(t: &[f64], y: &[f64], i: usize) -> f64 {
    let (ym, y0, yp) = (y[i - 1], y[i], y[i + 1]);
    let denom = ym - 2.0 * y0 + yp;
    if denom >= 0.0 {
        return t[i];
    }
    let offset = 0.5 * (ym - yp) / denom;
    t[i] + offset * 0.5 * (t[i + 1] - t[i - 1])
}

/// Amplitudes and M period on the part of `traj` after `transient_cut`.
pub fn oscillation_metrics(
    traj: &Trajectory,
    transient_cut: f64,
) -> Result<OscillationMetrics, IntegrateError> {
    let start = traj.times.partition_point(|&t| t <= transient_cut);
    if start >= traj.len() {
        return Err(IntegrateError::InsufficientData(format!(
            "no samples after t = {transient_cut}"
        )));
    }
    let times = &traj.times[start..];
    let states = &traj.states[start..];

    let mut amplitude = [0.0; 5];
    for (c, amp) in amplitude.iter_mut().enumerate() {
        let (lo, hi) = states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            let v = s.to_array()[c];
            (lo.min(v), hi.max(v))
        });
        *amp = hi - lo;
    }

    let m: Vec<f64> = states.iter().map(|s| s.m()).collect();
    let m_min = m.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = m_min + PEAK_THRESHOLD * amplitude[0];
    let peaks: Vec<f64> = (1..m.len().saturating_sub(1))
        .filter(|&i| m[i] > m[i - 1] && m[i] > m[i + 1] && m[i] > threshold)
        .map(|i| refine_peak(times, &m, i))
        .collect();

    let spacings: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    let period = if spacings.is_empty() {
        None
    } else {
        let n = spacings.len() as f64;
        let mean = spacings.iter().sum::<f64>() / n;
        let var = spacings.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
        Some(PeriodEstimate {
            mean,
            std_dev: var.sqrt(),
        })
    };

    Ok(OscillationMetrics {
        amplitude,
        period,
        cycles: spacings.len(),
        transient_cut,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rhs_mrna;
    use approx::assert_abs_diff_eq;

    fn sinusoid(period: f64, t_end: f64, h: f64) -> Trajectory {
        let n = (t_end / h).round() as usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
        let states = times
            .iter()
            .map(|&t| {
                let m = 1.0 + 0.5 * (2.0 * std::f64::consts::PI * t / period).sin();
                FullState::new(m, 0.1, 0.1, 0.1, 0.1).unwrap()
            })
            .collect();
        Trajectory::from_samples(times, states).unwrap()
    }

    #[test]
    fn metrics_on_sinusoid() {
        let traj = sinusoid(24.0, 480.0, 0.01);
        let metrics = oscillation_metrics(&traj, 0.0).unwrap();
        let period = metrics.require_period().unwrap();
        assert_abs_diff_eq!(period.mean, 24.0, epsilon = 0.01);
        assert_abs_diff_eq!(metrics.amplitude[0], 1.0, epsilon = 1e-3);
        assert_eq!(metrics.amplitude[4], 0.0);
        assert!(metrics.cycles >= 18);
    }

    #[test]
    fn metrics_on_constant() {
        let x = FullState::splat(0.3).unwrap();
        let traj = Trajectory::from_samples(vec![0.0, 1.0, 2.0, 3.0], vec![x; 4]).unwrap();
        let metrics = oscillation_metrics(&traj, 0.0).unwrap();
        assert_eq!(metrics.amplitude, [0.0; 5]);
        assert!(matches!(
            metrics.require_period(),
            Err(IntegrateError::InsufficientData(_))
        ));
        assert!(oscillation_metrics(&traj, 3.0).is_err());
    }

    #[test]
    fn trajectory_rejects_bad_grid() {
        let x = FullState::splat(0.0).unwrap();
        assert!(Trajectory::from_samples(vec![0.0, 0.0], vec![x, x]).is_err());
        assert!(Trajectory::from_samples(vec![0.0], vec![x, x]).is_err());
    }

    #[test]
    fn ode_time_grid() {
        let p = ModelParams::with_vs(0.4);
        let x0 = FullState::splat(0.2).unwrap();
        let traj = integrate_ode(&x0, &p, 1.0, 0.3).unwrap();
        assert_eq!(traj.len(), 4);
        assert!((traj.last().0 - 1.0).abs() <= 0.3);
        assert!(integrate_ode(&x0, &p, 0.1, 0.3).is_err());
        assert!(integrate_ode(&x0, &p, 1.0, 0.0).is_err());
    }

    #[test]
    fn huge_step_is_reported() {
        let p = ModelParams::default();
        let x0 = FullState::splat(0.2).unwrap();
        let err = integrate_ode(&x0, &p, 1e4, 50.0).unwrap_err();
        assert!(matches!(
            err,
            IntegrateError::NonFinite { .. } | IntegrateError::NegativeState { .. }
        ));
    }

    #[test]
    fn dde_usage_errors() {
        let p = ModelParams::with_vs(0.4);
        let x0 = FullState::splat(0.2).unwrap();
        assert!(matches!(
            integrate_dde(&x0, &p, 0.01, 1.0, 0.05),
            Err(IntegrateError::Usage(_))
        ));
        assert!(integrate_dde(&x0, &p, -1.0, 1.0, 0.05).is_err());
    }

    #[test]
    fn dde_with_zero_delay_is_ode() {
        let p = ModelParams::with_vs(0.5);
        let x0 = FullState::splat(0.2).unwrap();
        let a = integrate_dde(&x0, &p, 0.0, 20.0, 0.01).unwrap();
        let b = integrate_ode(&x0, &p, 20.0, 0.01).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dde_holds_transcription_fixed_before_delay_elapses() {
        // For t < tau, feedback is the constant initial PN, so M obeys the
        // scalar ODE with frozen input.
        let p = ModelParams::with_vs(0.5);
        let x0 = FullState::splat(0.2).unwrap();
        let traj = integrate_dde(&x0, &p, 100.0, 50.0, 0.01).unwrap();
        let m_ref = {
            let mut m = 0.2;
            let h = 0.01;
            for _ in 0..5000 {
                let f = |m: f64| rhs_mrna(m, 0.2, &p);
                let k1 = f(m);
                let k2 = f(m + 0.5 * h * k1);
                let k3 = f(m + 0.5 * h * k2);
                let k4 = f(m + h * k3);
                m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            m
        };
        assert_abs_diff_eq!(traj.last().1.m(), m_ref, epsilon = 1e-14);
    }

    #[test]
    fn history_interpolates_cubics_exactly() {
        let h = 0.1;
        let f = |t: f64| 1.0 + t - 0.3 * t * t + 0.05 * t * t * t;
        let df = |t: f64| 1.0 - 0.6 * t + 0.15 * t * t;
        let mut hist = DelayHistory::new(1.0, h, f(0.0));
        for k in 0..40 {
            let t = k as f64 * h;
            hist.push(f(t), df(t));
        }
        let (start, end) = hist.span().unwrap();
        assert!(end - start >= 1.0);
        for q in [2.93, 3.0, 3.55, 3.899] {
            assert_abs_diff_eq!(hist.value_at(q), f(q), epsilon = 1e-12);
        }
        assert_eq!(hist.value_at(-0.5), f(0.0));
    }

    #[test]
    fn steady_state_scalar_mrna() {
        let p = ModelParams::with_vs(0.4);
        let m = steady_state([0.0], |x| [rhs_mrna(x[0], 0.0, &p)], 1e-10, 1e4, 0.05).unwrap();
        assert_abs_diff_eq!(m[0], 0.8, epsilon = 1e-6);
    }

    #[test]
    fn steady_state_already_there() {
        let calls = std::cell::Cell::new(0);
        let x = steady_state(
            [1.0, 2.0],
            |_| {
                calls.set(calls.get() + 1);
                [0.0, 0.0]
            },
            1e-9,
            10.0,
            0.1,
        )
        .unwrap();
        assert_eq!(x, [1.0, 2.0]);
        assert_eq!(calls.get(), 1);
    }

    #[test]
    fn steady_state_gives_up() {
        let err = steady_state([0.0], |_| [1.0], 1e-9, 1.0, 0.1).unwrap_err();
        assert!(matches!(err, IntegrateError::NotConverged { .. }));
    }

    #[test]
    fn csv_layout() {
        let p = ModelParams::with_vs(0.4);
        let x0 = FullState::splat(0.2).unwrap();
        let traj = integrate_ode(&x0, &p, 1.0, 0.1).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,M,P0,P1,P2,PN");
        // Rows 0, 3, 6, 9 and the final row 10.
        assert_eq!(lines.len(), 6);
        let row: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 0.2, 0.2, 0.2, 0.2, 0.2]);
        let last: Vec<f64> = lines[5].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last[1], traj.last().1.m());
    }
}
