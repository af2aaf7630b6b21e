//! Learning-machine variants and their self-evolution semantics.
//!
//! A [`Machine`] wraps a [`Network`] as one of four dynamical rules:
//!
//! - `Ilm`: iterative, `x(t+1) = net(x(t))`
//! - `Dlm`: differential, `dx/dt = net(x(t))`
//! - `Ddlm`: delay-differential, `dz/dt = net(z(t), z(t-gap), ..., z(t-taps*gap))`
//! - `Dilm`: delay-iterative, `z(t+gap) = net(z(t), z(t-gap), ..., z(t-taps*gap))`
//!
//! Self-evolution closes the loop: the machine's output feeds its own
//! input, so the trained network runs as an autonomous system.

use crate::blackbox::Series;
use crate::integrate::{self, HistoryBuffer, Trajectory};
use crate::net::Network;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MachineKind {
    Ilm,
    Dlm,
    Ddlm,
    Dilm,
}

impl MachineKind {
    pub fn is_delay(self) -> bool {
        matches!(self, MachineKind::Ddlm | MachineKind::Dilm)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MachineKind::Ilm => "ilm",
            MachineKind::Dlm => "dlm",
            MachineKind::Ddlm => "ddlm",
            MachineKind::Dilm => "dilm",
        }
    }
}

/// Delay-coordinate layout: the input vector is
/// `(z(t), z(t-gap), ..., z(t-taps*gap))`, newest first, of length `taps + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySpec {
    pub taps: usize,
    pub gap: f64,
}

impl DelaySpec {
    pub fn new(taps: usize, gap: f64) -> Result<Self> {
        if taps == 0 {
            return Err(Error::Shape("delay spec needs at least one tap".into()));
        }
        if !(gap > 0.0) {
            return Err(Error::Domain(format!("delay gap must be > 0, got {gap}")));
        }
        Ok(DelaySpec { taps, gap })
    }

    /// Input width of a machine using this delay coordinate.
    pub fn window_len(&self) -> usize {
        self.taps + 1
    }

    /// Lookback span `taps * gap`.
    pub fn horizon(&self) -> f64 {
        self.taps as f64 * self.gap
    }
}

/// Machine shape and delay layout without the weights; enough to rebuild a
/// machine around any snapshot network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineSpec {
    pub kind: MachineKind,
    pub delay: Option<DelaySpec>,
}

impl MachineSpec {
    pub fn plain(kind: MachineKind) -> Self {
        MachineSpec { kind, delay: None }
    }

    pub fn delayed(kind: MachineKind, delay: DelaySpec) -> Self {
        MachineSpec {
            kind,
            delay: Some(delay),
        }
    }

    pub fn build(&self, net: Network) -> Result<Machine> {
        Machine::new(self.kind, net, self.delay)
    }
}

/// A network tagged with its dynamical interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    kind: MachineKind,
    net: Network,
    delay: Option<DelaySpec>,
}

/// Starting data for self-evolution: a state vector for plain machines, a
/// history segment for delay machines.
#[derive(Debug, Clone)]
pub enum InitialCondition {
    State(Vec<f64>),
    History(Series),
}

/// How long to evolve: a step count for maps, a time span for flows.
/// Either form is accepted; steps and time convert through the step size.
#[derive(Debug, Clone, Copy)]
pub enum EvolveSpan {
    Steps(usize),
    Time(f64),
}

impl Machine {
    pub fn new(kind: MachineKind, net: Network, delay: Option<DelaySpec>) -> Result<Self> {
        match kind {
            MachineKind::Ilm | MachineKind::Dlm => {
                if delay.is_some() {
                    return Err(Error::Usage(format!(
                        "{} machines take no delay spec",
                        kind.as_str()
                    )));
                }
                if net.l() != net.m() {
                    return Err(Error::Shape(format!(
                        "self-evolving {} needs l = m, got {}-{}-{}",
                        kind.as_str(),
                        net.m(),
                        net.n(),
                        net.l()
                    )));
                }
            }
            MachineKind::Ddlm | MachineKind::Dilm => {
                let spec = delay.ok_or_else(|| {
                    Error::Usage(format!("{} machines need a delay spec", kind.as_str()))
                })?;
                if net.l() != 1 {
                    return Err(Error::Shape(format!(
                        "delay machine output width must be 1, got {}",
                        net.l()
                    )));
                }
                if net.m() != spec.window_len() {
                    return Err(Error::Shape(format!(
                        "delay machine input width {} does not match taps + 1 = {}",
                        net.m(),
                        spec.window_len()
                    )));
                }
            }
        }
        Ok(Machine { kind, net, delay })
    }

    pub fn kind(&self) -> MachineKind {
        self.kind
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn delay(&self) -> Option<DelaySpec> {
        self.delay
    }

    pub fn spec(&self) -> MachineSpec {
        MachineSpec {
            kind: self.kind,
            delay: self.delay,
        }
    }

    fn expect_kind(&self, kind: MachineKind, op: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Usage(format!(
                "{op} requires a {} machine, this one is {}",
                kind.as_str(),
                self.kind.as_str()
            )));
        }
        Ok(())
    }

    /// Iterative update: the state at `t + 1`.
    pub fn ilm_step(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.expect_kind(MachineKind::Ilm, "ilm_step")?;
        self.net.forward(x)
    }

    /// Velocity field of the differential machine at state `x`.
    pub fn dlm_rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.expect_kind(MachineKind::Dlm, "dlm_rhs")?;
        self.net.forward(x)
    }

    /// Scalar derivative `dz/dt` from a delay window ordered newest-first.
    pub fn ddlm_rhs(&self, window: &[f64]) -> Result<f64> {
        self.expect_kind(MachineKind::Ddlm, "ddlm_rhs")?;
        Ok(self.net.forward(window)?[0])
    }

    /// Next record `z(t + gap)` from a delay window ordered newest-first.
    pub fn dilm_step(&self, window: &[f64]) -> Result<f64> {
        self.expect_kind(MachineKind::Dilm, "dilm_step")?;
        Ok(self.net.forward(window)?[0])
    }

    /// Close the loop and evolve the machine as an autonomous system.
    ///
    /// Plain machines start from a state vector; delay machines start from
    /// a history segment covering at least `taps * gap`. The returned
    /// trajectory includes the initial point. Delay-machine trajectories
    /// carry on the history's time axis; plain machines start at t = 0.
    pub fn self_evolve(
        &self,
        init: &InitialCondition,
        span: EvolveSpan,
        step: f64,
    ) -> Result<Trajectory> {
        match self.kind {
            MachineKind::Ilm => {
                let x0 = self.state_init(init)?;
                let n = match span {
                    EvolveSpan::Steps(n) => n,
                    EvolveSpan::Time(t) => t.round().max(0.0) as usize,
                };
                let step_fn = |x: &[f64]| self.net.forward(x).expect("validated state width");
                integrate::iterate_map(&step_fn, &x0, n)
            }
            MachineKind::Dlm => {
                let x0 = self.state_init(init)?;
                let duration = match span {
                    EvolveSpan::Steps(n) => n as f64 * step,
                    EvolveSpan::Time(t) => t,
                };
                let field =
                    |_t: f64, x: &[f64]| self.net.forward(x).expect("validated state width");
                integrate::integrate_ode(&field, &x0, 0.0, duration, step)
            }
            MachineKind::Ddlm => {
                let delay = self.delay.unwrap();
                let series = self.history_init(init)?;
                let history = resample_history(series, step, &delay)?;
                let t_end = history.end_time();
                let duration = match span {
                    EvolveSpan::Steps(n) => n as f64 * step,
                    EvolveSpan::Time(t) => t,
                };
                let net = &self.net;
                let rhs = move |window: &[f64]| net.forward(window).expect("validated window")[0];
                integrate::integrate_dde(&rhs, history, t_end + duration, step, delay.taps, delay.gap)
            }
            MachineKind::Dilm => {
                let delay = self.delay.unwrap();
                let series = self.history_init(init)?;
                if relative_gap_mismatch(series.gap(), delay.gap) {
                    return Err(Error::History(format!(
                        "series gap {} does not match machine delay gap {}",
                        series.gap(),
                        delay.gap
                    )));
                }
                if series.len() < delay.window_len() {
                    return Err(Error::History(format!(
                        "history has {} records, delay window needs {}",
                        series.len(),
                        delay.window_len()
                    )));
                }
                let n = match span {
                    EvolveSpan::Steps(n) => n,
                    EvolveSpan::Time(t) => (t / delay.gap).round().max(0.0) as usize,
                };
                // Window state newest-first; each step prepends the new record.
                let w0: Vec<f64> = (0..delay.window_len())
                    .map(|j| series.values()[series.len() - 1 - j])
                    .collect();
                let net = &self.net;
                let step_fn = move |w: &[f64]| {
                    let z = net.forward(w).expect("validated window")[0];
                    let mut next = Vec::with_capacity(w.len());
                    next.push(z);
                    next.extend_from_slice(&w[..w.len() - 1]);
                    next
                };
                let t_end = series.end_time();
                let windows = integrate::iterate_map(&step_fn, &w0, n).map_err(|e| match e {
                    Error::Diverged { t } => Error::Diverged {
                        t: t_end + t * delay.gap,
                    },
                    other => other,
                })?;
                let mut traj = Trajectory::with_capacity(1, windows.len());
                for i in 0..windows.len() {
                    traj.push(t_end + i as f64 * delay.gap, &[windows.value(i, 0)]);
                }
                Ok(traj)
            }
        }
    }

    fn state_init(&self, init: &InitialCondition) -> Result<Vec<f64>> {
        match init {
            InitialCondition::State(x) => {
                if x.len() != self.net.m() {
                    return Err(Error::Shape(format!(
                        "initial state has length {}, machine expects {}",
                        x.len(),
                        self.net.m()
                    )));
                }
                Ok(x.clone())
            }
            InitialCondition::History(_) => Err(Error::Usage(format!(
                "{} machines start from a state vector, not a history",
                self.kind.as_str()
            ))),
        }
    }

    fn history_init<'a>(&self, init: &'a InitialCondition) -> Result<&'a Series> {
        match init {
            InitialCondition::History(s) => Ok(s),
            InitialCondition::State(_) => Err(Error::Usage(format!(
                "{} machines start from a history segment, not a state vector",
                self.kind.as_str()
            ))),
        }
    }
}

fn relative_gap_mismatch(a: f64, b: f64) -> bool {
    (a - b).abs() > 1e-9 * b.max(a).max(1.0)
}

/// Resample an initial history segment onto the integration grid ending at
/// the series' last sample. The series must be at least as finely sampled
/// as the integration step and must span the delay horizon.
fn resample_history(series: &Series, step: f64, delay: &DelaySpec) -> Result<HistoryBuffer> {
    if series.gap() > step * (1.0 + 1e-9) {
        return Err(Error::History(format!(
            "history sampled every {} but the integration step is {step}; need spacing <= step",
            series.gap()
        )));
    }
    let span = series.end_time() - series.start_time();
    if span + 1e-9 * delay.gap < delay.horizon() {
        return Err(Error::History(format!(
            "history spans {span:.6} time units, delay window needs {:.6}",
            delay.horizon()
        )));
    }
    let per_gap = (delay.gap / step).round() as usize;
    let samples = delay.taps * per_gap;
    let t_end = series.end_time();
    let t0 = t_end - samples as f64 * step;
    let values: Result<Vec<f64>> = (0..=samples)
        .map(|k| series.value_at(t0 + k as f64 * step))
        .collect();
    HistoryBuffer::new(t0, step, values?)
}
