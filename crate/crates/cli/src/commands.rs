use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use circadian_core::characteristics::{default_c_max, Comparison};
use circadian_core::integrate::oscillation_metrics;
use circadian_core::smallgain::{mrna_output, DEFAULT_BISECTION_TOL};
use circadian_core::{
    char_mrna, char_per, check_proposition_conditions, check_state_space,
    closed_loop_equilibrium, integrate_dde, integrate_ode, iterate_spiderweb, small_gain_verdict,
    FullState, IterationVerdict, ModelParams, OscillationMetrics, SpiderwebTrace, Trajectory,
};
use rayon::prelude::*;

use crate::config::{CharSystem, Mode, RunConfig};
use crate::svg::{Plot, Series};
use crate::{CliError, Command, Status};

/// M amplitude (µM) above which a sweep point counts as oscillating.
pub const OSCILLATION_AMPLITUDE: f64 = 1e-3;

pub const THREADS_ENV: &str = "CIRCADIAN_THREADS";

/// Where a run writes its files.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Outputs {
    pub fn from_flags(flags: &crate::Flags) -> Self {
        Self {
            out: flags.out.clone(),
            svg: flags.svg.clone(),
            threads: flags.threads,
        }
    }

    /// Path of the effective-config echo written next to `out`.
    pub fn echo_path(&self) -> Option<PathBuf> {
        self.out.as_ref().map(|p| p.with_extension("config.json"))
    }
}

fn open_primary<'a>(
    outputs: &Outputs,
    stdout: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>, CliError> {
    Ok(match &outputs.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(stdout),
    })
}

fn write_echo(cfg: &RunConfig, outputs: &Outputs, stderr: &mut dyn Write) -> Result<(), CliError> {
    if let Some(path) = outputs.echo_path() {
        fs::write(&path, cfg.to_json() + "\n")?;
    }
    writeln!(
        stderr,
        "effective config: {}",
        serde_json::to_string(cfg).expect("config serializes")
    )?;
    Ok(())
}

fn write_svg(path: &Path, plot: &Plot) -> Result<(), CliError> {
    fs::write(path, plot.render())?;
    Ok(())
}

fn init_state(cfg: &RunConfig) -> Result<FullState, CliError> {
    let x: [f64; 5] = cfg
        .init
        .as_slice()
        .try_into()
        .map_err(|_| CliError::Usage("`init` needs five values".into()))?;
    FullState::from_array(x).map_err(|e| CliError::Usage(e.to_string()))
}

fn grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
}

/// Runs `command` with an already merged configuration.
pub fn run(
    command: Command,
    cfg: &RunConfig,
    outputs: &Outputs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<Status, CliError> {
    let mode = match command {
        Command::Sweep => Mode::Dde,
        _ => cfg.mode,
    };
    let cfg = cfg.resolved(mode);
    write_echo(&cfg, outputs, stderr)?;
    let mut out = open_primary(outputs, stdout)?;
    let status = match command {
        Command::Check => check(&cfg, &mut out)?,
        Command::Char => characteristic(&cfg, &mut out)?,
        Command::Spiderweb => spiderweb(&cfg, outputs, &mut out, stderr)?,
        Command::Equilibrium => equilibrium(&cfg, &mut out)?,
        Command::Simulate => simulate(&cfg, outputs, &mut out, stderr)?,
        Command::Sweep => sweep(&cfg, outputs, &mut out)?,
    };
    out.flush()?;
    Ok(status)
}

fn comparison_row(
    out: &mut dyn Write,
    name: &str,
    relation: &str,
    c: &Comparison,
) -> std::io::Result<()> {
    writeln!(out, "{name},{relation},{:e},{:e},{}", c.lhs, c.rhs, c.holds)
}

fn check(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let p = &cfg.params;
    let conditions = check_proposition_conditions(p, default_c_max(p, cfg.mbar));
    let space = check_state_space(p, cfg.mbar);
    writeln!(out, "name,relation,lhs,rhs,holds")?;
    for (name, relation, c) in conditions.entries() {
        comparison_row(out, name, relation, &c)?;
    }
    writeln!(out, "conditions,all,,,{}", conditions.overall)?;
    for (name, relation, c) in space.entries() {
        comparison_row(out, name, relation, &c)?;
    }
    writeln!(out, "state_space,all,,,{}", space.overall)?;
    Ok(if conditions.overall && space.overall {
        Status::Success
    } else {
        Status::Negative
    })
}

fn characteristic(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let p = &cfg.params;
    writeln!(out, "u,value")?;
    for u in grid(0.0, cfg.char_grid_max(), cfg.grid_points) {
        let value = match cfg.system {
            CharSystem::Mrna => char_mrna(u, p)?,
            CharSystem::Per => char_per(u, p)?.pn(),
        };
        writeln!(out, "{u:e},{value:e}")?;
    }
    Ok(Status::Success)
}

fn spiderweb_plot(trace: &SpiderwebTrace, p: &ModelParams) -> Result<Plot, CliError> {
    let u_top = trace.iterates.iter().copied().fold(0.0, f64::max).max(0.1) * 1.25;
    let outputs: Vec<f64> = trace
        .iterates
        .iter()
        .map(|&u| mrna_output(u, p))
        .collect::<Result<_, _>>()?;
    let c_top = (outputs.iter().copied().fold(0.0, f64::max) * 1.1).min(0.999 * p.vd);

    let mrna_curve = grid(0.0, u_top, 200)
        .map(|u| mrna_output(u, p).map(|c| (u, c)))
        .collect::<Result<Vec<_>, _>>()?;
    let per_curve = grid(0.0, c_top, 200)
        .map(|c| char_per(c, p).map(|s| (s.pn(), c)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut path = vec![(trace.iterates[0], 0.0)];
    for (k, &c) in outputs.iter().enumerate() {
        path.push((trace.iterates[k], c));
        if let Some(&next) = trace.iterates.get(k + 1) {
            path.push((next, c));
        }
    }

    Ok(Plot {
        title: format!("Spiderweb, vs = {} ({})", p.vs, trace.verdict.label()),
        x_label: "nuclear PER, PN (µM)".into(),
        y_label: "PER input, ks·M (µM/h)".into(),
        series: vec![
            Series {
                label: "mRNA characteristic".into(),
                points: mrna_curve,
                color: "#1f77b4",
                dashed: true,
            },
            Series {
                label: "PER characteristic".into(),
                points: per_curve,
                color: "#2ca02c",
                dashed: true,
            },
            Series {
                label: "iteration".into(),
                points: path,
                color: "#d62728",
                dashed: false,
            },
        ],
    })
}

fn spiderweb(
    cfg: &RunConfig,
    outputs: &Outputs,
    out: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<Status, CliError> {
    let trace = iterate_spiderweb(cfg.u0, &cfg.params, cfg.max_iter, cfg.tol)?;
    writeln!(out, "step,u,F_u")?;
    for (k, w) in trace.iterates.windows(2).enumerate() {
        writeln!(out, "{k},{:e},{:e}", w[0], w[1])?;
    }
    if let Some(path) = &outputs.svg {
        write_svg(path, &spiderweb_plot(&trace, &cfg.params)?)?;
    }
    let status = match trace.verdict {
        IterationVerdict::Converged { fixed_point, iterations } => {
            writeln!(stderr, "verdict: Converged u* = {fixed_point:e} after {iterations} iterations")?;
            Status::Success
        }
        IterationVerdict::TwoCycle { lo, hi } => {
            writeln!(stderr, "verdict: TwoCycle lo = {lo:e} hi = {hi:e}")?;
            Status::Negative
        }
        IterationVerdict::MaxIterReached => {
            writeln!(stderr, "verdict: MaxIterReached after {} iterations", cfg.max_iter)?;
            Status::Undecided
        }
    };
    Ok(status)
}

fn equilibrium(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    let eq = closed_loop_equilibrium(&cfg.params, DEFAULT_BISECTION_TOL)?;
    let [m, p0, p1, p2, pn] = eq.to_array();
    writeln!(out, "M,P0,P1,P2,PN")?;
    writeln!(out, "{m:e},{p0:e},{p1:e},{p2:e},{pn:e}")?;
    Ok(Status::Success)
}

fn run_trajectory(
    init: &FullState,
    p: &ModelParams,
    delay: f64,
    t_end: f64,
    h: f64,
    mode: Mode,
) -> Result<Trajectory, CliError> {
    Ok(match mode {
        Mode::Ode => integrate_ode(init, p, t_end, h)?,
        Mode::Dde => integrate_dde(init, p, delay, t_end, h)?,
    })
}

fn write_metrics(m: &OscillationMetrics, w: &mut dyn Write) -> std::io::Result<()> {
    let amps: Vec<String> = m.amplitude.iter().map(|a| format!("{a:e}")).collect();
    writeln!(w, "amplitude (M,P0,P1,P2,PN) after t = {}: {}", m.transient_cut, amps.join(","))?;
    match m.period {
        Some(period) => writeln!(
            w,
            "period: {:.4} h (std {:.4} h over {} cycles)",
            period.mean, period.std_dev, m.cycles
        ),
        None => writeln!(w, "period: none (fewer than two peaks)"),
    }
}

fn simulate(
    cfg: &RunConfig,
    outputs: &Outputs,
    out: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<Status, CliError> {
    if cfg.mode == Mode::Ode && cfg.delay > 0.0 {
        return Err(CliError::Usage("--delay requires --mode dde".into()));
    }
    let init = init_state(cfg)?;
    let traj = run_trajectory(&init, &cfg.params, cfg.delay, cfg.t_end, cfg.step(cfg.mode), cfg.mode)?;
    traj.write_csv(&mut *out, cfg.stride)?;

    if cfg.transient_cut < cfg.t_end {
        let metrics = oscillation_metrics(&traj, cfg.transient_cut)?;
        write_metrics(&metrics, stderr)?;
    }
    if let Some(path) = &outputs.svg {
        let stride = (traj.len() / 4000).max(1);
        let series = |index: usize, label: &str, color: &'static str| Series {
            label: label.into(),
            points: traj
                .times()
                .iter()
                .zip(traj.component(index))
                .step_by(stride)
                .map(|(&t, v)| (t, v))
                .collect(),
            color,
            dashed: false,
        };
        let plot = Plot {
            title: format!("vs = {}, delay = {} h", cfg.params.vs, cfg.delay),
            x_label: "t (h)".into(),
            y_label: "concentration (µM)".into(),
            series: vec![series(0, "M", "#1f77b4"), series(4, "PN", "#d62728")],
        };
        write_svg(path, &plot)?;
    }
    Ok(Status::Success)
}

/// One classified (vs, delay) grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub vs: f64,
    pub delay: f64,
    pub gain: String,
    pub dynamics: &'static str,
    /// Final PN when steady, M amplitude when oscillating.
    pub value: f64,
    pub period: Option<f64>,
}

impl SweepRow {
    pub fn verdict(&self) -> String {
        format!("{}:{}", self.gain, self.dynamics)
    }
}

pub fn sweep_point(cfg: &RunConfig, vs: f64, delay: f64) -> SweepRow {
    let p = ModelParams { vs, ..cfg.params };
    let gain = match small_gain_verdict(&p, &cfg.seeds, cfg.max_iter, cfg.tol) {
        Ok(v) => v.label().to_string(),
        Err(_) => "Infeasible".to_string(),
    };
    let simulated = init_state(cfg).and_then(|init| {
        let traj = run_trajectory(&init, &p, delay, cfg.t_end, cfg.step(Mode::Dde), Mode::Dde)?;
        let metrics = oscillation_metrics(&traj, cfg.transient_cut)?;
        Ok((traj.last().1, metrics))
    });
    let (dynamics, value, period) = match simulated {
        Ok((_, metrics)) if metrics.amplitude[0] > OSCILLATION_AMPLITUDE => (
            "oscillating",
            metrics.amplitude[0],
            metrics.period.map(|p| p.mean),
        ),
        Ok((last, _)) => ("steady", last.pn(), None),
        Err(_) => ("failed", f64::NAN, None),
    };
    SweepRow {
        vs,
        delay,
        gain,
        dynamics,
        value,
        period,
    }
}

fn sweep_threads(outputs: &Outputs) -> Result<usize, CliError> {
    if let Some(n) = outputs.threads {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a count, got `{v}`"))),
        // Zero lets rayon use one worker per processor.
        Err(_) => Ok(0),
    }
}

fn sweep(cfg: &RunConfig, outputs: &Outputs, out: &mut dyn Write) -> Result<Status, CliError> {
    if cfg.sweep_vs.is_empty() || cfg.sweep_delay.is_empty() {
        return Err(CliError::Usage("sweep needs at least one vs and one delay".into()));
    }
    if cfg.transient_cut >= cfg.t_end {
        return Err(CliError::Usage("transient_cut must be below t_end".into()));
    }
    let points: Vec<(f64, f64)> = cfg
        .sweep_vs
        .iter()
        .flat_map(|&vs| cfg.sweep_delay.iter().map(move |&d| (vs, d)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_threads(outputs)?)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> =
        pool.install(|| points.par_iter().map(|&(vs, d)| sweep_point(cfg, vs, d)).collect());

    writeln!(out, "vs,delay,verdict,PN_eq_or_amp,period")?;
    for row in rows {
        let period = row.period.map(|p| format!("{p:e}")).unwrap_or_default();
        writeln!(out, "{},{},{},{:e},{period}", row.vs, row.delay, row.verdict(), row.value)?;
    }
    Ok(Status::Success)
}
