//! Poincaré sections, period detection, bifurcation diagrams, prediction
//! horizons, and attractor projections.
//!
//! Sections and crossing times are located by linear interpolation between
//! bracketing samples, so section coordinates are accurate to the
//! trajectory's own integration error, not the sample spacing.

use std::fs;
use std::path::Path;

use crate::blackbox::{lorenz_field, LorenzParams};
use crate::integrate::{self, Trajectory};
use crate::machines::MachineSpec;
use crate::trainer::{replay_snapshots, ReplayOutcome, ReplayPlan, TrainTrace};
use crate::{Error, Result};

/// One upward (or configured-direction) crossing of the section level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionPoint {
    /// Crossing time.
    pub t_c: f64,
    /// Delayed coordinate `x(t_c - lag)`.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Both,
}

/// Where and how to section a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionSpec {
    pub coord: usize,
    pub level: f64,
    pub lag: f64,
    pub direction: Direction,
}

/// Linear interpolation of one coordinate at an arbitrary time inside the
/// trajectory span; grid times return stored values exactly.
fn interp_coord(traj: &Trajectory, coord: usize, t: f64) -> f64 {
    let t0 = traj.time(0);
    let h = traj.spacing().expect("interp needs >= 2 samples");
    let u = (t - t0) / h;
    let last = (traj.len() - 1) as f64;
    let nearest = u.round();
    if (u - nearest).abs() < 1e-9 {
        return traj.value(nearest.clamp(0.0, last) as usize, coord);
    }
    let lo = u.floor().clamp(0.0, last - 1.0) as usize;
    let frac = u - lo as f64;
    let a = traj.value(lo, coord);
    let b = traj.value(lo + 1, coord);
    a + frac * (b - a)
}

/// Crossings of `coord = level`, each recorded through the delayed
/// coordinate `x(t_c - lag)`. Crossings whose delayed time falls before
/// the trajectory start are dropped.
pub fn poincare_section(
    traj: &Trajectory,
    spec: &SectionSpec,
) -> Vec<SectionPoint> {
    let mut points = Vec::new();
    if traj.len() < 2 || spec.coord >= traj.dim() {
        return points;
    }
    let t0 = traj.time(0);
    for i in 0..traj.len() - 1 {
        let a = traj.value(i, spec.coord);
        let b = traj.value(i + 1, spec.coord);
        let crossing = match spec.direction {
            Direction::Up => a < spec.level && b >= spec.level,
            Direction::Down => a > spec.level && b <= spec.level,
            Direction::Both => {
                (a < spec.level && b >= spec.level) || (a > spec.level && b <= spec.level)
            }
        };
        if !crossing {
            continue;
        }
        let frac = (spec.level - a) / (b - a);
        let t_c = traj.time(i) + frac * (traj.time(i + 1) - traj.time(i));
        let t_delayed = t_c - spec.lag;
        if t_delayed < t0 - 1e-12 {
            continue;
        }
        points.push(SectionPoint {
            t_c,
            value: interp_coord(traj, spec.coord, t_delayed),
        });
    }
    points
}

/// Classification of a section-point sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodClass {
    Period(usize),
    Quasiperiodic,
    Chaotic,
    Diverged,
    Insufficient,
}

impl PeriodClass {
    pub fn as_str(self) -> String {
        match self {
            PeriodClass::Period(k) => format!("period-{k}"),
            PeriodClass::Quasiperiodic => "quasiperiodic".into(),
            PeriodClass::Chaotic => "chaotic".into(),
            PeriodClass::Diverged => "diverged".into(),
            PeriodClass::Insufficient => "insufficient".into(),
        }
    }

    pub fn is_periodic(self) -> bool {
        matches!(self, PeriodClass::Period(_))
    }
}

/// Find the smallest period `k <= k_max` that the tail of `values` repeats
/// within `tol` for at least `min_cycles` consecutive cycles. With no
/// k-cycle, a near-three-gap structure in the sorted values reads as
/// quasiperiodic; otherwise the sequence is chaotic/aperiodic.
pub fn detect_period(values: &[f64], tol: f64, min_cycles: usize, k_max: usize) -> PeriodClass {
    let n = values.len();
    if n < k_max * min_cycles {
        return PeriodClass::Insufficient;
    }
    for k in 1..=k_max {
        let window = k * min_cycles;
        if n < window + k {
            continue;
        }
        let tail = &values[n - window - k..];
        if tail
            .windows(k + 1)
            .all(|w| (w[k] - w[0]).abs() <= tol)
        {
            // Compare across the stride: v[i] vs v[i+k] over the tail.
            return PeriodClass::Period(k);
        }
    }
    if three_gap_structure(values) {
        PeriodClass::Quasiperiodic
    } else {
        PeriodClass::Chaotic
    }
}

/// Data-driven tolerance for classifying section values: 5% of the value
/// range, floored so that near-degenerate period-1 sections (range within
/// integrator noise) still cluster.
pub fn section_tolerance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 1e-9;
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_abs = max.abs().max(min.abs());
    (0.05 * (max - min)).max(1e-3 * max_abs).max(1e-9)
}

/// Orbits of an irrational rotation partition a circle into at most three
/// distinct gap lengths; section values of a quasiperiodic torus inherit
/// the same signature, while chaotic sections spread their gaps broadly.
fn three_gap_structure(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let range = sorted[sorted.len() - 1] - sorted[0];
    if range <= 0.0 {
        return false;
    }
    let mut gaps: Vec<f64> = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|g| *g > 1e-9 * range)
        .collect();
    if gaps.len() < 4 {
        return false;
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let threshold = 0.05 * gaps[gaps.len() - 1];
    let mut clusters = 1;
    for pair in gaps.windows(2) {
        if pair[1] - pair[0] > threshold {
            clusters += 1;
        }
    }
    clusters <= 3
}

/// One bifurcation-diagram row keyed by MC step.
#[derive(Debug, Clone)]
pub struct TrainingRow {
    pub mc_step: u64,
    pub class: PeriodClass,
    pub values: Vec<f64>,
}

/// Detection settings for bifurcation rows. With `tol = None` each row is
/// classified at its own [`section_tolerance`].
#[derive(Debug, Clone, Copy)]
pub struct PeriodSpec {
    pub tol: Option<f64>,
    pub min_cycles: usize,
    pub k_max: usize,
}

impl PeriodSpec {
    fn resolve(&self, values: &[f64]) -> f64 {
        self.tol.unwrap_or_else(|| section_tolerance(values))
    }
}

/// Replay every snapshot of a training trace and section the resulting
/// trajectories: the bifurcation diagram over training time. Snapshots
/// that diverge are emitted as empty rows flagged [`PeriodClass::Diverged`].
pub fn bifurcation_over_training(
    trace: &TrainTrace,
    mspec: &MachineSpec,
    plan: &ReplayPlan,
    section: &SectionSpec,
    period: &PeriodSpec,
) -> Result<Vec<TrainingRow>> {
    let runs = replay_snapshots(trace, mspec, plan)?;
    let mut rows = Vec::with_capacity(runs.len());
    for run in runs {
        let row = match run.outcome {
            ReplayOutcome::Diverged { .. } => TrainingRow {
                mc_step: run.mc_step,
                class: PeriodClass::Diverged,
                values: Vec::new(),
            },
            ReplayOutcome::Evolved(traj) => {
                let points = poincare_section(&traj, section);
                let values: Vec<f64> = points.iter().map(|p| p.value).collect();
                TrainingRow {
                    mc_step: run.mc_step,
                    class: detect_period(&values, period.resolve(&values), period.min_cycles, period.k_max),
                    values,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Which Lorenz parameter a ground-truth sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LorenzAxis {
    Sigma,
    R,
    B,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub param: f64,
    pub class: PeriodClass,
    pub values: Vec<f64>,
}

/// Ground-truth bifurcation diagram of the Lorenz system along one
/// parameter axis; the comparison baseline for the training-time diagram.
#[allow(clippy::too_many_arguments)]
pub fn bifurcation_sweep(
    base: &LorenzParams,
    axis: LorenzAxis,
    params: &[f64],
    x0: &[f64; 3],
    settle: f64,
    duration: f64,
    step: f64,
    section: &SectionSpec,
    period: &PeriodSpec,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(params.len());
    for &value in params {
        let mut p = *base;
        match axis {
            LorenzAxis::Sigma => p.sigma = value,
            LorenzAxis::R => p.r = value,
            LorenzAxis::B => p.b = value,
        }
        let field = lorenz_field(p);
        let run = integrate::integrate_ode(&field, x0, 0.0, settle, step).and_then(|settled| {
            integrate::integrate_ode(&field, settled.last_state(), 0.0, duration, step)
        });
        let row = match run {
            Err(Error::Diverged { .. }) => SweepRow {
                param: value,
                class: PeriodClass::Diverged,
                values: Vec::new(),
            },
            Err(other) => return Err(other),
            Ok(traj) => {
                let points = poincare_section(&traj, section);
                let values: Vec<f64> = points.iter().map(|p| p.value).collect();
                SweepRow {
                    param: value,
                    class: detect_period(&values, period.resolve(&values), period.min_cycles, period.k_max),
                    values,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// First time the two trajectories separate by more than `eps` on `coord`;
/// the end of the overlap when they never do. Both trajectories must share
/// their start time and spacing.
pub fn prediction_horizon(a: &Trajectory, b: &Trajectory, eps: f64, coord: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Shape("empty trajectory in horizon comparison".into()));
    }
    if coord >= a.dim() || coord >= b.dim() {
        return Err(Error::Shape(format!("coordinate {coord} out of range")));
    }
    if (a.time(0) - b.time(0)).abs() > 1e-9 {
        return Err(Error::Shape(format!(
            "start times differ: {} vs {}",
            a.time(0),
            b.time(0)
        )));
    }
    let overlap = a.len().min(b.len());
    if overlap >= 2 {
        let (ha, hb) = (a.spacing().unwrap(), b.spacing().unwrap());
        if (ha - hb).abs() > 1e-9 * ha.abs().max(1.0) {
            return Err(Error::Shape(format!("spacings differ: {ha} vs {hb}")));
        }
    }
    for i in 0..overlap {
        if (a.value(i, coord) - b.value(i, coord)).abs() > eps {
            return Ok(a.time(i));
        }
    }
    Ok(a.time(overlap - 1))
}

/// How to flatten a trajectory into plottable pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionMode {
    /// `(x_i, x_j)` per sample.
    Coords(usize, usize),
    /// `(x(t - lag), x(t))` of one coordinate.
    Delayed { coord: usize, lag: f64 },
}

/// Project a trajectory to 2-D points for attractor plots.
pub fn attractor_projection(traj: &Trajectory, mode: ProjectionMode) -> Result<Vec<(f64, f64)>> {
    match mode {
        ProjectionMode::Coords(i, j) => {
            if i >= traj.dim() || j >= traj.dim() {
                return Err(Error::Shape(format!(
                    "projection coords ({i}, {j}) out of range for dim {}",
                    traj.dim()
                )));
            }
            Ok((0..traj.len())
                .map(|s| (traj.value(s, i), traj.value(s, j)))
                .collect())
        }
        ProjectionMode::Delayed { coord, lag } => {
            if coord >= traj.dim() {
                return Err(Error::Shape(format!("coordinate {coord} out of range")));
            }
            if !(lag >= 0.0) {
                return Err(Error::Domain(format!("lag must be >= 0, got {lag}")));
            }
            let t0 = traj.time(0);
            let t_end = traj.time(traj.len() - 1);
            if lag > t_end - t0 {
                return Err(Error::History(format!(
                    "lag {lag} exceeds the trajectory span {}",
                    t_end - t0
                )));
            }
            let mut points = Vec::new();
            for s in 0..traj.len() {
                let t = traj.time(s);
                if t - lag < t0 - 1e-12 {
                    continue;
                }
                points.push((interp_coord(traj, coord, t - lag), traj.value(s, coord)));
            }
            Ok(points)
        }
    }
}

/// Per-coordinate (min, max) over a trajectory.
pub fn trajectory_bounds(traj: &Trajectory) -> Vec<(f64, f64)> {
    let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); traj.dim()];
    for (_, state) in traj.iter() {
        for (c, &v) in state.iter().enumerate() {
            bounds[c].0 = bounds[c].0.min(v);
            bounds[c].1 = bounds[c].1.max(v);
        }
    }
    bounds
}

/// Scale a bounding box about its center.
pub fn expand_bounds(bounds: &[(f64, f64)], factor: f64) -> Vec<(f64, f64)> {
    bounds
        .iter()
        .map(|&(lo, hi)| {
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo) * factor;
            (mid - half, mid + half)
        })
        .collect()
}

/// Fraction of samples with every coordinate inside the box.
pub fn fraction_within(traj: &Trajectory, bounds: &[(f64, f64)]) -> f64 {
    if traj.is_empty() {
        return 0.0;
    }
    let inside = traj
        .iter()
        .filter(|(_, state)| {
            state
                .iter()
                .zip(bounds)
                .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
        })
        .count();
    inside as f64 / traj.len() as f64
}

/// Fraction of 2-D points inside a rectangle.
pub fn fraction_in_rect(points: &[(f64, f64)], rect: &[(f64, f64); 2]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let inside = points
        .iter()
        .filter(|(u, v)| {
            *u >= rect[0].0 && *u <= rect[0].1 && *v >= rect[1].0 && *v <= rect[1].1
        })
        .count();
    inside as f64 / points.len() as f64
}

/// Section CSV: `t_c,delayed_value`.
pub fn write_section_csv(points: &[SectionPoint], path: &Path) -> Result<()> {
    let mut out = String::from("t_c,delayed_value\n");
    for p in points {
        out.push_str(&format!("{:.16e},{:.16e}\n", p.t_c, p.value));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Long-format bifurcation CSV keyed by MC step: `key,value`.
pub fn write_training_rows_csv(rows: &[TrainingRow], path: &Path) -> Result<()> {
    let mut out = String::from("key,value\n");
    for row in rows {
        for v in &row.values {
            out.push_str(&format!("{},{v:.16e}\n", row.mc_step));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Long-format bifurcation CSV keyed by the swept parameter: `key,value`.
pub fn write_sweep_rows_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut out = String::from("key,value\n");
    for row in rows {
        for v in &row.values {
            out.push_str(&format!("{:.16e},{v:.16e}\n", row.param));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Projection CSV with header `u,v`.
pub fn write_projection_csv(points: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut out = String::from("u,v\n");
    for (u, v) in points {
        out.push_str(&format!("{u:.16e},{v:.16e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{EvolveSpan, InitialCondition, MachineKind};
    use crate::net::{Network, TransferKind};
    use crate::trainer::TrainSnapshot;

    fn sine_trajectory(t_start: f64, t_end: f64, h: f64) -> Trajectory {
        let n = ((t_end - t_start) / h).round() as usize;
        let mut traj = Trajectory::with_capacity(1, n + 1);
        for k in 0..=n {
            let t = t_start + k as f64 * h;
            traj.push(t, &[t.sin()]);
        }
        traj
    }

    const UP_X: SectionSpec = SectionSpec {
        coord: 0,
        level: 0.0,
        lag: 0.0,
        direction: Direction::Up,
    };

    #[test]
    fn monotone_trajectory_has_no_crossings() {
        let mut traj = Trajectory::with_capacity(1, 10);
        for k in 0..10 {
            traj.push(k as f64, &[k as f64 + 10.0]);
        }
        let spec = SectionSpec { level: 5.0, ..UP_X };
        assert!(poincare_section(&traj, &spec).is_empty());
    }

    #[test]
    fn sine_crossings_land_on_multiples_of_two_pi() {
        let traj = sine_trajectory(-0.05, 15.0, 1e-3);
        let points = poincare_section(&traj, &UP_X);
        assert_eq!(points.len(), 3);
        for (i, p) in points.iter().enumerate() {
            let expected = i as f64 * 2.0 * std::f64::consts::PI;
            assert!((p.t_c - expected).abs() < 1e-4, "t_c = {}", p.t_c);
            // With zero lag the interpolated coordinate at t_c is the
            // section level itself, up to interpolation rounding.
            assert!(p.value.abs() < 1e-9, "value = {}", p.value);
        }
        let empty = Trajectory::with_capacity(1, 0);
        assert!(poincare_section(&empty, &UP_X).is_empty());
    }

    #[test]
    fn sine_delayed_values_hit_the_quarter_phase() {
        let traj = sine_trajectory(-0.05, 15.0, 1e-3);
        let spec = SectionSpec {
            lag: std::f64::consts::FRAC_PI_2,
            ..UP_X
        };
        let points = poincare_section(&traj, &spec);
        // The crossing near t = 0 is dropped: its delayed time precedes the span.
        assert_eq!(points.len(), 2);
        for p in &points {
            assert!((p.value - (-1.0)).abs() < 1e-4, "delayed = {}", p.value);
        }
    }

    #[test]
    fn downward_and_both_directions() {
        let traj = sine_trajectory(-0.05, 15.0, 1e-3);
        let down = SectionSpec {
            direction: Direction::Down,
            ..UP_X
        };
        let both = SectionSpec {
            direction: Direction::Both,
            ..UP_X
        };
        assert_eq!(poincare_section(&traj, &down).len(), 2);
        assert_eq!(poincare_section(&traj, &both).len(), 5);
    }

    #[test]
    fn constant_and_alternating_sequences_classify() {
        let constant = vec![2.0; 40];
        assert_eq!(detect_period(&constant, 0.05, 3, 8), PeriodClass::Period(1));
        let alternating: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { 3.0 }).collect();
        assert_eq!(detect_period(&alternating, 0.05, 3, 8), PeriodClass::Period(2));
    }

    #[test]
    fn short_sequences_are_insufficient() {
        assert_eq!(detect_period(&[1.0; 10], 0.05, 3, 8), PeriodClass::Insufficient);
    }

    #[test]
    fn noisy_periodic_sequences_classify_up_to_period_four() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(500);
        let tol = 0.05;
        for trial in 0..50 {
            let k = trial % 4 + 1;
            // Cluster centers at least 3*tol apart.
            let centers: Vec<f64> = (0..k)
                .map(|i| i as f64 * (3.0 * tol + rng.random_range(0.0..2.0)))
                .collect();
            let values: Vec<f64> = (0..60)
                .map(|i| centers[i % k] + rng.random_range(-tol / 2.0..tol / 2.0))
                .collect();
            let got = detect_period(&values, tol, 3, 8);
            assert_eq!(got, PeriodClass::Period(k), "trial {trial}");
        }
    }

    #[test]
    fn quasiperiodic_rotation_shows_three_gap_structure() {
        // Golden-ratio rotation on the unit circle.
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let values: Vec<f64> = (0..200).map(|i| (i as f64 * phi).fract()).collect();
        assert_eq!(detect_period(&values, 1e-4, 3, 8), PeriodClass::Quasiperiodic);
    }

    #[test]
    fn chaotic_lorenz_section_is_non_periodic() {
        let p = LorenzParams::default();
        let field = lorenz_field(p);
        let settled = integrate::integrate_ode(&field, &[1.0, 1.0, 1.0], 0.0, 20.0, 1e-3).unwrap();
        let traj =
            integrate::integrate_ode(&field, settled.last_state(), 0.0, 80.0, 1e-3).unwrap();
        let spec = SectionSpec {
            coord: 0,
            level: 5.0,
            lag: 0.1,
            direction: Direction::Up,
        };
        let points = poincare_section(&traj, &spec);
        assert!(points.len() >= 30, "only {} crossings", points.len());
        let values: Vec<f64> = points.iter().map(|p| p.value).collect();
        let range = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().cloned().fold(f64::INFINITY, f64::min);
        let class = detect_period(&values, 0.05 * range, 3, 8);
        assert_eq!(class, PeriodClass::Chaotic);
    }

    #[test]
    fn horizon_identity_and_constant_offset() {
        let a = sine_trajectory(0.0, 5.0, 0.01);
        assert_eq!(prediction_horizon(&a, &a, 0.5, 0).unwrap(), a.time(a.len() - 1));
        let mut b = Trajectory::with_capacity(1, a.len());
        for (t, _) in a.iter() {
            b.push(t, &[2.0]);
        }
        let mut zero = Trajectory::with_capacity(1, a.len());
        for (t, _) in a.iter() {
            zero.push(t, &[0.0]);
        }
        assert_eq!(prediction_horizon(&zero, &b, 1.0, 0).unwrap(), 0.0);
        // Symmetry is exact.
        assert_eq!(
            prediction_horizon(&a, &b, 0.7, 0).unwrap(),
            prediction_horizon(&b, &a, 0.7, 0).unwrap()
        );
    }

    #[test]
    fn horizon_rejects_mismatched_starts() {
        let a = sine_trajectory(0.0, 1.0, 0.01);
        let b = sine_trajectory(0.5, 1.5, 0.01);
        assert!(matches!(
            prediction_horizon(&a, &b, 0.5, 0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn coordinate_projection_counts_samples() {
        let p = LorenzParams::default();
        let field = lorenz_field(p);
        let traj = integrate::integrate_ode(&field, &[1.0, 1.0, 1.0], 0.0, 1.0, 1e-3).unwrap();
        let points = attractor_projection(&traj, ProjectionMode::Coords(0, 2)).unwrap();
        assert_eq!(points.len(), traj.len());
        assert_eq!(points[0], (1.0, 1.0));
    }

    #[test]
    fn delayed_projection_of_a_constant_sits_on_the_diagonal() {
        let mut traj = Trajectory::with_capacity(1, 101);
        for k in 0..=100 {
            traj.push(k as f64 * 0.01, &[3.5]);
        }
        let points =
            attractor_projection(&traj, ProjectionMode::Delayed { coord: 0, lag: 0.1 }).unwrap();
        assert_eq!(points.len(), 91);
        for (u, v) in points {
            assert_eq!(u, v);
        }
    }

    #[test]
    fn delayed_projection_of_lorenz_is_finite_and_counted() {
        let p = LorenzParams::default();
        let field = lorenz_field(p);
        let traj = integrate::integrate_ode(&field, &[1.0, 1.0, 1.0], 0.0, 10.0, 1e-3).unwrap();
        let points =
            attractor_projection(&traj, ProjectionMode::Delayed { coord: 0, lag: 0.1 }).unwrap();
        assert_eq!(points.len(), traj.len() - 100);
        assert!(points.iter().all(|(u, v)| u.is_finite() && v.is_finite()));
        let too_long = attractor_projection(
            &traj,
            ProjectionMode::Delayed { coord: 0, lag: 20.0 },
        );
        assert!(matches!(too_long, Err(Error::History(_))));
    }

    #[test]
    fn single_snapshot_bifurcation_matches_direct_composition() {
        let net = Network::init_random(1, 6, 1, TransferKind::Tanh, 0.9, 40).unwrap();
        let trace = TrainTrace {
            accepted: vec![],
            snapshots: vec![TrainSnapshot {
                mc_step: 500,
                mse: 0.1,
                max_err: 0.3,
                net: net.clone(),
            }],
            converged: false,
            total_steps: 500,
        };
        let mspec = MachineSpec::plain(MachineKind::Ilm);
        let plan = ReplayPlan {
            init: InitialCondition::State(vec![0.3]),
            span: EvolveSpan::Steps(200),
            step: 1.0,
            discard: 100.0,
        };
        let section = SectionSpec {
            coord: 0,
            level: 0.1,
            lag: 0.0,
            direction: Direction::Both,
        };
        let period = PeriodSpec {
            tol: Some(0.01),
            min_cycles: 3,
            k_max: 8,
        };
        let rows = bifurcation_over_training(&trace, &mspec, &plan, &section, &period).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mc_step, 500);

        let machine = mspec.build(net).unwrap();
        let traj = machine
            .self_evolve(&plan.init, plan.span, plan.step)
            .unwrap()
            .tail_from(plan.discard);
        let direct: Vec<f64> = poincare_section(&traj, &section)
            .iter()
            .map(|p| p.value)
            .collect();
        assert_eq!(rows[0].values, direct);
    }

    #[test]
    fn degenerate_sweep_emits_one_chaotic_row_at_defaults() {
        let p = LorenzParams::default();
        let section = SectionSpec {
            coord: 0,
            level: 5.0,
            lag: 0.1,
            direction: Direction::Up,
        };
        let period = PeriodSpec {
            tol: None,
            min_cycles: 3,
            k_max: 8,
        };
        let rows = bifurcation_sweep(
            &p,
            LorenzAxis::B,
            &[8.0 / 3.0],
            &[1.0, 1.0, 1.0],
            20.0,
            80.0,
            1e-3,
            &section,
            &period,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].param, 8.0 / 3.0);
        assert_eq!(rows[0].class, PeriodClass::Chaotic);
    }

    #[test]
    fn sweep_spans_both_periodic_and_chaotic_classes() {
        let p = LorenzParams::default();
        let section = SectionSpec {
            coord: 0,
            level: 5.0,
            lag: 0.1,
            direction: Direction::Up,
        };
        let period = PeriodSpec {
            tol: None,
            min_cycles: 3,
            k_max: 8,
        };
        let rows = bifurcation_sweep(
            &p,
            LorenzAxis::B,
            &[0.40, 0.58],
            &[1.0, 1.0, 1.0],
            40.0,
            120.0,
            1e-3,
            &section,
            &period,
        )
        .unwrap();
        assert_eq!(rows[0].class, PeriodClass::Period(1), "b = 0.40");
        assert_eq!(rows[1].class, PeriodClass::Chaotic, "b = 0.58");
    }

    #[test]
    fn bounds_helpers_expand_and_count() {
        let mut traj = Trajectory::with_capacity(2, 3);
        traj.push(0.0, &[0.0, 0.0]);
        traj.push(1.0, &[2.0, 4.0]);
        traj.push(2.0, &[1.0, -4.0]);
        let bounds = trajectory_bounds(&traj);
        assert_eq!(bounds, vec![(0.0, 2.0), (-4.0, 4.0)]);
        let doubled = expand_bounds(&bounds, 2.0);
        assert_eq!(doubled, vec![(-1.0, 3.0), (-8.0, 8.0)]);
        assert_eq!(fraction_within(&traj, &bounds), 1.0);
        let tight = vec![(0.0, 1.5), (-4.0, 4.0)];
        assert!((fraction_within(&traj, &tight) - 2.0 / 3.0).abs() < 1e-12);
    }
}
