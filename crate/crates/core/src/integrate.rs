//! Fixed-step integration: classical RK4 for ODEs, method-of-steps RK4
//! for delay-differential equations, and discrete map iteration.
//!
//! Everything here is fixed-step on purpose: delayed lookups stay on the
//! sample grid and repeated runs are bit-reproducible. Times are always
//! generated as `t0 + k*h`, never accumulated.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Default integration step for Lorenz-family runs.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Evolution aborts once any state component exceeds this magnitude.
pub const DIVERGENCE_GUARD: f64 = 1e6;

/// A time-stamped state sequence with uniform spacing.
///
/// States are stored flat (`dim` values per sample) to keep long runs
/// cheap; index with [`Trajectory::state`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn with_capacity(dim: usize, samples: usize) -> Self {
        Trajectory {
            dim,
            times: Vec::with_capacity(samples),
            data: Vec::with_capacity(samples * dim),
        }
    }

    pub fn push(&mut self, t: f64, state: &[f64]) {
        debug_assert_eq!(state.len(), self.dim);
        self.times.push(t);
        self.data.extend_from_slice(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value(&self, i: usize, coord: usize) -> f64 {
        self.data[i * self.dim + coord]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Sample spacing; trajectories of fewer than two samples have none.
    pub fn spacing(&self) -> Option<f64> {
        (self.len() >= 2).then(|| self.times[1] - self.times[0])
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        (0..self.len()).map(move |i| (self.times[i], self.state(i)))
    }

    /// Samples at or after time `t` (with a tiny slack for grid rounding).
    pub fn tail_from(&self, t: f64) -> Trajectory {
        let mut out = Trajectory::with_capacity(self.dim, self.len());
        for (ti, state) in self.iter() {
            if ti >= t - 1e-9 {
                out.push(ti, state);
            }
        }
        out
    }

    /// Keep every `every`-th sample, starting with the first.
    pub fn downsample(&self, every: usize) -> Trajectory {
        assert!(every >= 1);
        let mut out = Trajectory::with_capacity(self.dim, self.len() / every + 1);
        for i in (0..self.len()).step_by(every) {
            out.push(self.times[i], self.state(i));
        }
        out
    }

    /// Export as CSV with header `t,x0,...,x{d-1}` and 17-significant-digit
    /// floats (enough to round-trip f64 exactly).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.len() * (self.dim + 1) * 25);
        out.push('t');
        for c in 0..self.dim {
            out.push_str(&format!(",x{c}"));
        }
        out.push('\n');
        for (t, state) in self.iter() {
            out.push_str(&format!("{t:.16e}"));
            for v in state {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

fn check_state(state: &[f64], t: f64) -> Result<()> {
    for &v in state {
        if !v.is_finite() || v.abs() > DIVERGENCE_GUARD {
            return Err(Error::Diverged { t });
        }
    }
    Ok(())
}

/// Number of steps implied by a span and step size; the ratio must sit
/// within rounding of an integer.
fn step_count(span: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step must be > 0, got {h}")));
    }
    if span < 0.0 {
        return Err(Error::Domain(format!("span must be >= 0, got {span}")));
    }
    let ratio = span / h;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::Domain(format!(
            "span {span} is not an integer multiple of step {h}"
        )));
    }
    Ok(steps as usize)
}

/// One classical 4th-order Runge-Kutta update.
pub fn rk4_step<F>(field: &F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step must be > 0, got {h}")));
    }
    let d = x.len();
    let k1 = field(t, x);
    let x2: Vec<f64> = (0..d).map(|i| x[i] + 0.5 * h * k1[i]).collect();
    let k2 = field(t + 0.5 * h, &x2);
    let x3: Vec<f64> = (0..d).map(|i| x[i] + 0.5 * h * k2[i]).collect();
    let k3 = field(t + 0.5 * h, &x3);
    let x4: Vec<f64> = (0..d).map(|i| x[i] + h * k3[i]).collect();
    let k4 = field(t + h, &x4);
    for stage in [&k1, &k2, &k3, &k4] {
        if stage.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { t });
        }
    }
    Ok((0..d)
        .map(|i| x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrate an ODE field over `[t0, t1]`; both endpoints are included in
/// the returned trajectory.
pub fn integrate_ode<F>(field: &F, x0: &[f64], t0: f64, t1: f64, h: f64) -> Result<Trajectory>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    if !(t1 > t0) {
        return Err(Error::Domain(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    let steps = step_count(t1 - t0, h)?;
    let mut traj = Trajectory::with_capacity(x0.len(), steps + 1);
    check_state(x0, t0)?;
    traj.push(t0, x0);
    let mut x = x0.to_vec();
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        x = rk4_step(field, t, &x, h)?;
        let t_next = t0 + (k + 1) as f64 * h;
        check_state(&x, t_next)?;
        traj.push(t_next, &x);
    }
    Ok(traj)
}

/// Uniformly sampled scalar history for delay-differential integration.
///
/// Lookups on the sample grid return stored values exactly; off-grid times
/// are linearly interpolated.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    t0: f64,
    spacing: f64,
    values: Vec<f64>,
}

impl HistoryBuffer {
    pub fn new(t0: f64, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::Domain(format!("spacing must be > 0, got {spacing}")));
        }
        if values.is_empty() {
            return Err(Error::History("history buffer needs at least one sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("history values must be finite".into()));
        }
        Ok(HistoryBuffer { t0, spacing, values })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn start_time(&self) -> f64 {
        self.t0
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + (self.values.len() - 1) as f64 * self.spacing
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn push(&mut self, value: f64) {
        self.values.push(value);
    }

    /// Value at time `t`: the stored sample when `t` lands on the grid,
    /// linear interpolation between neighbours otherwise.
    pub fn lookup(&self, t: f64) -> Result<f64> {
        let u = (t - self.t0) / self.spacing;
        let last = (self.values.len() - 1) as f64;
        if u < -1e-9 || u > last + 1e-9 {
            return Err(Error::History(format!(
                "t = {t} outside history span [{}, {}]",
                self.t0,
                self.end_time()
            )));
        }
        let nearest = u.round();
        if (u - nearest).abs() < 1e-9 {
            return Ok(self.values[nearest.clamp(0.0, last) as usize]);
        }
        let lo = u.floor() as usize;
        let frac = u - lo as f64;
        Ok(self.values[lo] + frac * (self.values[lo + 1] - self.values[lo]))
    }
}

/// Method-of-steps RK4 for a scalar delay-differential equation.
///
/// `rhs` receives the delay window ordered newest-first:
/// `(z(t), z(t - gap), ..., z(t - taps*gap))`. The integration step must
/// divide `gap` exactly and the history must already be sampled at that
/// step and span at least `taps*gap`. New samples are appended to the
/// buffer as the solution advances.
pub fn integrate_dde<F>(
    rhs: &F,
    history: HistoryBuffer,
    t1: f64,
    h: f64,
    taps: usize,
    gap: f64,
) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> f64,
{
    if !(gap > 0.0) {
        return Err(Error::Domain(format!("delay gap must be > 0, got {gap}")));
    }
    let per_gap = gap / h;
    if !(h > 0.0) || (per_gap - per_gap.round()).abs() > 1e-9 * per_gap.max(1.0) || per_gap < 1.0 - 1e-9 {
        return Err(Error::Domain(format!(
            "step {h} must divide the delay gap {gap} exactly"
        )));
    }
    if (history.spacing - h).abs() > 1e-12 * h {
        return Err(Error::History(format!(
            "history spacing {} does not match integration step {h}",
            history.spacing
        )));
    }
    let horizon = taps as f64 * gap;
    let t_start = history.end_time();
    if history.start_time() > t_start - horizon + 1e-9 * gap.max(1.0) {
        return Err(Error::History(format!(
            "history spans {:.6} time units, delay window needs {horizon:.6}",
            t_start - history.start_time()
        )));
    }
    let steps = step_count(t1 - t_start, h)?;

    let mut buf = history;
    let mut traj = Trajectory::with_capacity(1, steps + 1);
    traj.push(t_start, &[buf.last_value()]);

    let mut window = vec![0.0; taps + 1];
    let fill_window = |buf: &HistoryBuffer, t_stage: f64, current: f64, window: &mut [f64]| -> Result<f64> {
        window[0] = current;
        for j in 1..=taps {
            window[j] = buf.lookup(t_stage - j as f64 * gap)?;
        }
        Ok(rhs(window))
    };

    let mut z = buf.last_value();
    for k in 0..steps {
        let t = t_start + k as f64 * h;
        let k1 = fill_window(&buf, t, z, &mut window)?;
        let k2 = fill_window(&buf, t + 0.5 * h, z + 0.5 * h * k1, &mut window)?;
        let k3 = fill_window(&buf, t + 0.5 * h, z + 0.5 * h * k2, &mut window)?;
        let k4 = fill_window(&buf, t + h, z + h * k3, &mut window)?;
        for stage in [k1, k2, k3, k4] {
            if !stage.is_finite() {
                return Err(Error::Diverged { t });
            }
        }
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let t_next = t_start + (k + 1) as f64 * h;
        if !z.is_finite() || z.abs() > DIVERGENCE_GUARD {
            return Err(Error::Diverged { t: t_next });
        }
        buf.push(z);
        traj.push(t_next, &[z]);
    }
    Ok(traj)
}

/// Iterate a discrete state map `n` times; the trajectory contains `n + 1`
/// samples with times `0, 1, ..., n`.
pub fn iterate_map<F>(step_fn: &F, x0: &[f64], n: usize) -> Result<Trajectory>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut traj = Trajectory::with_capacity(x0.len(), n + 1);
    check_state(x0, 0.0)?;
    traj.push(0.0, x0);
    let mut x = x0.to_vec();
    for k in 0..n {
        x = step_fn(&x);
        let t = (k + 1) as f64;
        check_state(&x, t)?;
        traj.push(t, &x);
    }
    Ok(traj)
}
