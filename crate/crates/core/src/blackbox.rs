//! Reference black systems and data extraction.
//!
//! The two black systems used throughout: the Lorenz flow (observed either
//! through sampled input-output responses or through a scalar record of
//! one coordinate) and a trained classifier network probed with random
//! binary inputs. Nothing here peeks inside the system being copied; all
//! extraction goes through trajectories, records, and responses.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::integrate::{self, Trajectory, DEFAULT_STEP};
use crate::machines::DelaySpec;
use crate::net::{Network, TransferKind};
use crate::trainer::{self, TrainConfig, TrainingSet};
use crate::{Error, Result};

/// Lorenz flow parameters; defaults are the standard chaotic set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzParams {
    pub sigma: f64,
    pub r: f64,
    pub b: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams {
            sigma: 10.0,
            r: 28.0,
            b: 8.0 / 3.0,
        }
    }
}

/// The Lorenz vector field:
/// `dx/dt = -sigma (x - y)`, `dy/dt = -x z + r x - y`, `dz/dt = x y - b z`.
pub fn lorenz_rhs(p: &LorenzParams, state: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *state;
    [
        -p.sigma * (x - y),
        -x * z + p.r * x - y,
        x * y - p.b * z,
    ]
}

/// The same field shaped for the integrators.
pub fn lorenz_field(p: LorenzParams) -> impl Fn(f64, &[f64]) -> Vec<f64> {
    move |_t, s| lorenz_rhs(&p, &[s[0], s[1], s[2]]).to_vec()
}

/// A uniformly sampled scalar record.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    t0: f64,
    gap: f64,
    values: Vec<f64>,
}

impl Series {
    pub fn new(t0: f64, gap: f64, values: Vec<f64>) -> Result<Self> {
        if !(gap > 0.0) {
            return Err(Error::Domain(format!("series gap must be > 0, got {gap}")));
        }
        if values.is_empty() {
            return Err(Error::Shape("series must not be empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("series values must be finite".into()));
        }
        Ok(Series { t0, gap, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty series
    }

    pub fn start_time(&self) -> f64 {
        self.t0
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + (self.values.len() - 1) as f64 * self.gap
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.gap
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation; grid points return stored values exactly.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let u = (t - self.t0) / self.gap;
        let last = (self.values.len() - 1) as f64;
        if u < -1e-9 || u > last + 1e-9 {
            return Err(Error::History(format!(
                "t = {t} outside series span [{}, {}]",
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

    /// Sub-series of `len` records starting at index `start`.
    pub fn window(&self, start: usize, len: usize) -> Result<Series> {
        if start + len > self.values.len() || len == 0 {
            return Err(Error::Shape(format!(
                "window [{start}, {start}+{len}) outside series of length {}",
                self.values.len()
            )));
        }
        Series::new(
            self.time(start),
            self.gap,
            self.values[start..start + len].to_vec(),
        )
    }

    /// View as a one-dimensional trajectory on the series' own time grid.
    pub fn to_trajectory(&self) -> Trajectory {
        let mut traj = Trajectory::with_capacity(1, self.len());
        for (i, &v) in self.values.iter().enumerate() {
            traj.push(self.time(i), &[v]);
        }
        traj
    }
}

/// What the flow-pair targets hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowTarget {
    /// The endpoint `x(interval)` itself, paired with the initial point.
    FlowMap,
    /// The chord velocity `(x(interval) - x(0)) / interval`, paired with
    /// the mid-chord state `x(interval/2)` where it estimates the field to
    /// second order. Pairing it with the start point instead would bias
    /// the learned field by O(interval * x'') and visibly shorten the
    /// prediction horizon.
    Velocity,
}

/// Sample input-output responses of the Lorenz flow: random initial points
/// inside `ranges`, each evolved over `interval`.
pub fn sample_flow_pairs(
    p: &LorenzParams,
    count: usize,
    interval: f64,
    ranges: &[(f64, f64); 3],
    target: FlowTarget,
    seed: u64,
) -> Result<TrainingSet> {
    if count == 0 {
        return Err(Error::Shape("need at least one flow pair".into()));
    }
    if !(interval > 0.0) {
        return Err(Error::Domain(format!("interval must be > 0, got {interval}")));
    }
    for (lo, hi) in ranges {
        if !(lo < hi) {
            return Err(Error::Domain(format!("bad sampling range ({lo}, {hi})")));
        }
    }
    // Integer (even, so the midpoint sits on the grid) number of
    // default-sized steps across the interval.
    let steps = 2.0 * (interval / (2.0 * DEFAULT_STEP)).round().max(1.0);
    let h = interval / steps;
    let field = lorenz_field(*p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for _ in 0..count {
        let x0: Vec<f64> = ranges
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..hi))
            .collect();
        let traj = integrate::integrate_ode(&field, &x0, 0.0, interval, h)?;
        let end = traj.last_state();
        match target {
            FlowTarget::FlowMap => {
                targets.push(end.to_vec());
                inputs.push(x0);
            }
            FlowTarget::Velocity => {
                targets.push((0..3).map(|c| (end[c] - x0[c]) / interval).collect());
                inputs.push(traj.state(traj.len() / 2).to_vec());
            }
        }
    }
    TrainingSet::new(inputs, targets)
}

/// Record one coordinate of the Lorenz flow at spacing `gap` over
/// `[0, duration]`, integrating at the default step (or an integer
/// subdivision of `gap` when the default does not divide it).
pub fn record_series(
    p: &LorenzParams,
    x0: &[f64; 3],
    duration: f64,
    gap: f64,
    component: usize,
) -> Result<Series> {
    if component > 2 {
        return Err(Error::Shape(format!("Lorenz has 3 components, asked for {component}")));
    }
    if !(gap > 0.0) || !(duration > 0.0) {
        return Err(Error::Domain("duration and gap must be > 0".into()));
    }
    let per_gap = (gap / DEFAULT_STEP).round().max(1.0);
    let h = gap / per_gap;
    let records = (duration / gap).round();
    if (duration / gap - records).abs() > 1e-6 * records.max(1.0) {
        return Err(Error::Domain(format!(
            "duration {duration} is not an integer multiple of gap {gap}"
        )));
    }
    let field = lorenz_field(*p);
    let traj = integrate::integrate_ode(&field, x0, 0.0, duration, h)?;
    let q = per_gap as usize;
    let values: Vec<f64> = (0..=records as usize)
        .map(|k| traj.value(k * q, component))
        .collect();
    Series::new(0.0, gap, values)
}

/// What a delay-embedded sample's target holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedTarget {
    /// The next record `x(t + gap)`; feeds iterative delay machines.
    NextValue,
    /// The central difference `(x(t+gap) - x(t-gap)) / (2 gap)`; feeds
    /// delay-differential machines.
    Derivative,
}

/// Delay-embed a scalar series into training pairs. Windows are ordered
/// newest-first and advance one record at a time; the sample count is
/// `len - taps - 1` for `NextValue` and `len - taps - 2` for `Derivative`.
pub fn delay_embed(series: &Series, taps: usize, target: EmbedTarget) -> Result<(TrainingSet, DelaySpec)> {
    let spec = DelaySpec::new(taps, series.gap())?;
    let len = series.len();
    let needed = match target {
        EmbedTarget::NextValue => taps + 2,
        EmbedTarget::Derivative => taps + 3,
    };
    if len < needed {
        return Err(Error::Shape(format!(
            "series of {len} records too short to embed with {taps} taps (need {needed})"
        )));
    }
    let v = series.values();
    let first = match target {
        EmbedTarget::NextValue => taps,
        EmbedTarget::Derivative => taps + 1,
    };
    let mut inputs = Vec::with_capacity(len - first - 1);
    let mut targets = Vec::with_capacity(len - first - 1);
    for j in first..len - 1 {
        let window: Vec<f64> = (0..=taps).map(|q| v[j - q]).collect();
        let t = match target {
            EmbedTarget::NextValue => v[j + 1],
            EmbedTarget::Derivative => (v[j + 1] - v[j - 1]) / (2.0 * series.gap()),
        };
        inputs.push(window);
        targets.push(vec![t]);
    }
    Ok((TrainingSet::new(inputs, targets)?, spec))
}

/// Index of the largest entry; ties break to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Labeled binary patterns: the teacher's memory set.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl PatternSet {
    /// One pattern per line: the +-1 pixel values then the label, all
    /// space-separated integers.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        let mut width = None;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: std::result::Result<Vec<i64>, _> =
                line.split_whitespace().map(str::parse).collect();
            let fields = fields.map_err(|_| {
                Error::Format(format!("line {}: unparseable pattern entry", lineno + 1))
            })?;
            if fields.len() < 2 {
                return Err(Error::Format(format!("line {}: too few fields", lineno + 1)));
            }
            let (pixels, label) = fields.split_at(fields.len() - 1);
            if *width.get_or_insert(pixels.len()) != pixels.len() {
                return Err(Error::Format(format!("line {}: ragged pattern width", lineno + 1)));
            }
            if pixels.iter().any(|&v| v != 1 && v != -1) {
                return Err(Error::Format(format!(
                    "line {}: pattern pixels must be +-1",
                    lineno + 1
                )));
            }
            if label[0] < 0 {
                return Err(Error::Format(format!("line {}: negative label", lineno + 1)));
            }
            inputs.push(pixels.iter().map(|&v| v as f64).collect());
            labels.push(label[0] as usize);
        }
        if inputs.is_empty() {
            return Err(Error::Format("pattern file holds no patterns".into()));
        }
        Ok(PatternSet { inputs, labels })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (pattern, label) in self.inputs.iter().zip(&self.labels) {
            for v in pattern {
                out.push_str(&format!("{} ", *v as i64));
            }
            out.push_str(&format!("{label}\n"));
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Pair each pattern with a +-1 one-hot score vector of width `classes`.
    pub fn to_training_set(&self, classes: usize) -> Result<TrainingSet> {
        let mut targets = Vec::with_capacity(self.len());
        for &label in &self.labels {
            if label >= classes {
                return Err(Error::Shape(format!(
                    "label {label} outside {classes} classes"
                )));
            }
            let mut t = vec![-1.0; classes];
            t[label] = 1.0;
            targets.push(t);
        }
        TrainingSet::new(self.inputs.clone(), targets)
    }
}

const GLYPHS: [&str; 10] = [
    "..####..\
     .#....#.\
     .#....#.\
     .#....#.\
     .#....#.\
     .#....#.\
     ..####..\
     ........",
    "...##...\
     ..###...\
     ...##...\
     ...##...\
     ...##...\
     ...##...\
     ..####..\
     ........",
    "..####..\
     .#....#.\
     ......#.\
     .....#..\
     ....#...\
     ...#....\
     .######.\
     ........",
    "..####..\
     .#....#.\
     ......#.\
     ...###..\
     ......#.\
     .#....#.\
     ..####..\
     ........",
    "....##..\
     ...#.#..\
     ..#..#..\
     .#...#..\
     .######.\
     .....#..\
     .....#..\
     ........",
    ".######.\
     .#......\
     .#####..\
     ......#.\
     ......#.\
     .#....#.\
     ..####..\
     ........",
    "..####..\
     .#......\
     .#......\
     .#####..\
     .#....#.\
     .#....#.\
     ..####..\
     ........",
    ".######.\
     ......#.\
     .....#..\
     ....#...\
     ...#....\
     ..#.....\
     ..#.....\
     ........",
    "..####..\
     .#....#.\
     .#....#.\
     ..####..\
     .#....#.\
     .#....#.\
     ..####..\
     ........",
    "..####..\
     .#....#.\
     .#....#.\
     ..#####.\
     ......#.\
     ......#.\
     ..####..\
     ........",
];

/// The shipped desk-scale memory set: ten 8x8 digit glyphs, five variants
/// each (the base shape plus four two-pixel-flip variants), 50 patterns.
pub fn builtin_patterns() -> PatternSet {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut inputs = Vec::with_capacity(50);
    let mut labels = Vec::with_capacity(50);
    for (digit, art) in GLYPHS.iter().enumerate() {
        let base: Vec<f64> = art
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| if c == '#' { 1.0 } else { -1.0 })
            .collect();
        assert_eq!(base.len(), 64, "glyph {digit} is not 8x8");
        for variant in 0..5 {
            let mut pattern = base.clone();
            if variant > 0 {
                let mut flipped = Vec::new();
                while flipped.len() < 2 {
                    let px = rng.random_range(0..64);
                    if !flipped.contains(&px) {
                        pattern[px] = -pattern[px];
                        flipped.push(px);
                    }
                }
            }
            inputs.push(pattern);
            labels.push(digit);
        }
    }
    PatternSet { inputs, labels }
}

/// Fraction of memories on which the network's argmax matches the target's.
pub fn recognition_rate(net: &Network, memories: &TrainingSet) -> Result<f64> {
    if memories.input_width() != net.m() || memories.target_width() != net.l() {
        return Err(Error::Shape(format!(
            "memories are {}->{}, network is {}->{}",
            memories.input_width(),
            memories.target_width(),
            net.m(),
            net.l()
        )));
    }
    let mut hits = 0usize;
    for i in 0..memories.len() {
        let z = net.forward(memories.input(i))?;
        if argmax(&z) == argmax(memories.target(i)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / memories.len() as f64)
}

/// Train a Tanh teacher until every memory's argmax matches its label (or
/// the step budget runs out). Returns the teacher and a convergence flag.
///
/// Training runs in rounds of `cfg.snapshot_every` steps; the argmax check
/// happens between rounds, each round reseeded from `cfg.seed` plus the
/// round index.
pub fn make_teacher(
    m: usize,
    n: usize,
    l: usize,
    memories: &TrainingSet,
    cfg: &TrainConfig,
) -> Result<(Network, bool)> {
    cfg.validate()?;
    if memories.input_width() != m || memories.target_width() != l {
        return Err(Error::Shape(format!(
            "memories are {}->{}, teacher is {m}->{l}",
            memories.input_width(),
            memories.target_width()
        )));
    }
    for i in 0..memories.len() {
        let t = memories.target(i);
        let top = argmax(t);
        if t.iter().enumerate().any(|(k, &v)| k != top && v >= t[top]) {
            return Err(Error::Usage(format!(
                "memory {i} target has no strict argmax"
            )));
        }
    }
    let mut net = Network::init_random(m, n, l, TransferKind::Tanh, cfg.design_bound, cfg.seed)?;
    if recognition_rate(&net, memories)? == 1.0 {
        return Ok((net, true));
    }
    let mut spent = 0u64;
    let mut round = 0u64;
    while spent < cfg.max_steps {
        let chunk = cfg.snapshot_every.min(cfg.max_steps - spent);
        let round_cfg = TrainConfig {
            max_steps: chunk,
            seed: cfg.seed.wrapping_add(round + 1),
            ..cfg.clone()
        };
        let (next, trace) = trainer::train(&net, memories, &round_cfg)?;
        net = next;
        spent += chunk;
        round += 1;
        if recognition_rate(&net, memories)? == 1.0 {
            return Ok((net, true));
        }
        if trace.converged {
            // MSE target reached but argmax still off; more rounds return
            // immediately, so stop here.
            return Ok((net, false));
        }
    }
    Ok((net, false))
}

/// Probe input encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeEncoding {
    /// Components in {-1, +1}; matches the Tanh teacher's symmetry.
    PlusMinus,
    /// Components in {0, 1}.
    ZeroOne,
}

/// Feed `count` random binary vectors to the teacher and record its raw
/// output scores. Deterministic under the seed.
pub fn probe_random(
    teacher: &Network,
    count: usize,
    seed: u64,
    encoding: ProbeEncoding,
) -> Result<TrainingSet> {
    if count == 0 {
        return Err(Error::Shape("need at least one probe".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let low = match encoding {
        ProbeEncoding::PlusMinus => -1.0,
        ProbeEncoding::ZeroOne => 0.0,
    };
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for _ in 0..count {
        let x: Vec<f64> = (0..teacher.m())
            .map(|_| if rng.random::<bool>() { 1.0 } else { low })
            .collect();
        targets.push(teacher.forward(&x)?);
        inputs.push(x);
    }
    TrainingSet::new(inputs, targets)
}

/// Fraction of memories where the student's argmax decision matches the
/// teacher's, both evaluated on the same memory inputs.
pub fn recovery_rate(student: &Network, teacher: &Network, memories: &TrainingSet) -> Result<f64> {
    if student.l() != teacher.l() {
        return Err(Error::Shape(format!(
            "student has {} outputs, teacher has {}",
            student.l(),
            teacher.l()
        )));
    }
    if memories.input_width() != student.m() || memories.input_width() != teacher.m() {
        return Err(Error::Shape(
            "memory width does not match both networks".into(),
        ));
    }
    let mut hits = 0usize;
    for i in 0..memories.len() {
        let s = student.forward(memories.input(i))?;
        let t = teacher.forward(memories.input(i))?;
        if argmax(&s) == argmax(&t) {
            hits += 1;
        }
    }
    Ok(hits as f64 / memories.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorenz_origin_is_an_equilibrium() {
        let p = LorenzParams::default();
        assert_eq!(lorenz_rhs(&p, &[0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn lorenz_fixed_point_residual_is_tiny() {
        let p = LorenzParams::default();
        let c = (p.b * (p.r - 1.0)).sqrt();
        let rhs = lorenz_rhs(&p, &[c, c, p.r - 1.0]);
        for v in rhs {
            assert!(v.abs() < 1e-12, "residual {v}");
        }
    }

    #[test]
    fn lorenz_rhs_by_direct_substitution() {
        let p = LorenzParams::default();
        let got = lorenz_rhs(&p, &[1.0, 2.0, 3.0]);
        // -10*(1-2) = 10; -1*3 + 28*1 - 2 = 23; 1*2 - (8/3)*3 = -6
        assert_eq!(got[0], 10.0);
        assert_eq!(got[1], 23.0);
        assert!((got[2] - (-6.0)).abs() < 1e-12);
    }

    #[test]
    fn lorenz_jacobian_trace_is_constant_contraction() {
        let p = LorenzParams::default();
        let expected = -(p.sigma + 1.0 + p.b);
        let eps = 1e-5;
        for state in [[1.0, 2.0, 3.0], [-7.0, 4.4, 19.0], [0.3, -0.2, 35.0]] {
            let mut trace = 0.0;
            for c in 0..3 {
                let mut plus = state;
                let mut minus = state;
                plus[c] += eps;
                minus[c] -= eps;
                trace += (lorenz_rhs(&p, &plus)[c] - lorenz_rhs(&p, &minus)[c]) / (2.0 * eps);
            }
            assert!((trace - expected).abs() < 1e-6, "trace {trace}");
        }
    }

    #[test]
    fn lorenz_endpoint_agrees_with_half_step_run() {
        let p = LorenzParams::default();
        let field = lorenz_field(p);
        let full = integrate::integrate_ode(&field, &[1.0, 1.0, 1.0], 0.0, 0.05, 1e-3).unwrap();
        let half = integrate::integrate_ode(&field, &[1.0, 1.0, 1.0], 0.0, 0.05, 5e-4).unwrap();
        for c in 0..3 {
            assert!((full.last_state()[c] - half.last_state()[c]).abs() < 1e-8);
        }
    }

    #[test]
    fn flow_pairs_stay_in_the_sampling_box_and_are_seeded() {
        let p = LorenzParams::default();
        let ranges = [(-20.0, 20.0), (-20.0, 20.0), (0.0, 40.0)];
        let a = sample_flow_pairs(&p, 100, 0.05, &ranges, FlowTarget::FlowMap, 42).unwrap();
        let b = sample_flow_pairs(&p, 100, 0.05, &ranges, FlowTarget::FlowMap, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        for i in 0..a.len() {
            let x = a.input(i);
            for (c, &(lo, hi)) in ranges.iter().enumerate() {
                assert!(x[c] >= lo && x[c] < hi);
            }
        }
    }

    #[test]
    fn zero_flow_pairs_rejected() {
        let p = LorenzParams::default();
        let ranges = [(-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0)];
        assert!(matches!(
            sample_flow_pairs(&p, 0, 0.05, &ranges, FlowTarget::FlowMap, 1),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn tiny_interval_flow_map_is_near_identity() {
        // Field magnitudes in this box stay below ~70, so an interval of
        // 1e-6 moves each component by well under 1e-4.
        let p = LorenzParams::default();
        let ranges = [(-2.0, 2.0), (-2.0, 2.0), (0.0, 4.0)];
        let set = sample_flow_pairs(&p, 20, 1e-6, &ranges, FlowTarget::FlowMap, 7).unwrap();
        for i in 0..set.len() {
            for c in 0..3 {
                assert!((set.input(i)[c] - set.target(i)[c]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn velocity_targets_approach_the_field() {
        let p = LorenzParams::default();
        let ranges = [(-10.0, 10.0), (-10.0, 10.0), (0.0, 20.0)];
        let set = sample_flow_pairs(&p, 20, 1e-4, &ranges, FlowTarget::Velocity, 7).unwrap();
        for i in 0..set.len() {
            let x = set.input(i);
            let f = lorenz_rhs(&p, &[x[0], x[1], x[2]]);
            for c in 0..3 {
                assert!((set.target(i)[c] - f[c]).abs() < 0.2, "chord vs field at {i}/{c}");
            }
        }
    }

    #[test]
    fn record_series_of_an_equilibrium_is_constant() {
        // All-zero parameters make the origin a frozen state.
        let p = LorenzParams {
            sigma: 0.0,
            r: 0.0,
            b: 0.0,
        };
        let s = record_series(&p, &[0.0, 0.0, 0.0], 1.0, 0.01, 0).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
        assert_eq!(s.len(), 101);
    }

    #[test]
    fn record_series_counts_and_downsampling() {
        let p = LorenzParams::default();
        let s = record_series(&p, &[1.0, 1.0, 1.0], 5.0, 0.001, 0).unwrap();
        assert_eq!(s.len(), 5001);
        // gap = 2 * step agrees with the fine series subsampled by two.
        let fine = record_series(&p, &[1.0, 1.0, 1.0], 1.0, 0.001, 1).unwrap();
        let coarse = record_series(&p, &[1.0, 1.0, 1.0], 1.0, 0.002, 1).unwrap();
        for (k, &v) in coarse.values().iter().enumerate() {
            assert_eq!(v, fine.values()[2 * k]);
        }
    }

    #[test]
    fn delay_embed_hand_enumeration() {
        let s = Series::new(0.0, 1.0, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let (set, spec) = delay_embed(&s, 2, EmbedTarget::NextValue).unwrap();
        assert_eq!(spec.taps, 2);
        assert_eq!(spec.gap, 1.0);
        assert_eq!(set.len(), 3);
        assert_eq!(set.input(0), &[2.0, 1.0, 0.0]);
        assert_eq!(set.input(1), &[3.0, 2.0, 1.0]);
        assert_eq!(set.input(2), &[4.0, 3.0, 2.0]);
        assert_eq!(set.target(0), &[3.0]);
        assert_eq!(set.target(1), &[4.0]);
        assert_eq!(set.target(2), &[5.0]);
    }

    #[test]
    fn delay_embed_sample_counts() {
        let values: Vec<f64> = (0..5001).map(|i| (i as f64 * 0.01).sin()).collect();
        let s = Series::new(0.0, 0.001, values).unwrap();
        let (set, _) = delay_embed(&s, 100, EmbedTarget::NextValue).unwrap();
        assert_eq!(set.len(), 4900);
        let (set, _) = delay_embed(&s, 100, EmbedTarget::Derivative).unwrap();
        assert_eq!(set.len(), 4899);
    }

    #[test]
    fn delay_embed_windows_overlap_exactly() {
        let values: Vec<f64> = (0..40).map(|i| ((i * i) % 17) as f64).collect();
        let s = Series::new(0.0, 0.5, values).unwrap();
        let (set, _) = delay_embed(&s, 4, EmbedTarget::NextValue).unwrap();
        for j in 0..set.len() - 1 {
            assert_eq!(set.input(j)[..4], set.input(j + 1)[1..]);
        }
    }

    #[test]
    fn derivative_targets_on_linear_series_equal_the_slope() {
        let a = 2.5;
        let values: Vec<f64> = (0..20).map(|i| a * (i as f64) * 0.1 + 3.0).collect();
        let s = Series::new(0.0, 0.1, values).unwrap();
        let (set, _) = delay_embed(&s, 3, EmbedTarget::Derivative).unwrap();
        for i in 0..set.len() {
            assert!((set.target(i)[0] - a).abs() < 1e-12);
        }
    }

    #[test]
    fn too_short_series_rejected() {
        let s = Series::new(0.0, 1.0, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            delay_embed(&s, 2, EmbedTarget::NextValue),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn builtin_patterns_are_fifty_balanced_binary_patterns() {
        let set = builtin_patterns();
        assert_eq!(set.len(), 50);
        let mut counts = [0usize; 10];
        for (pattern, &label) in set.inputs.iter().zip(&set.labels) {
            assert_eq!(pattern.len(), 64);
            assert!(pattern.iter().all(|&v| v == 1.0 || v == -1.0));
            counts[label] += 1;
        }
        assert_eq!(counts, [5; 10]);
        // Deterministic.
        assert_eq!(builtin_patterns(), builtin_patterns());
    }

    #[test]
    fn pattern_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("patterns.txt");
        let set = builtin_patterns();
        set.save(&path).unwrap();
        assert_eq!(PatternSet::load(&path).unwrap(), set);
    }

    #[test]
    fn tiny_teacher_memorizes_one_pattern() {
        let memories = TrainingSet::new(
            vec![vec![1.0, -1.0, 1.0, -1.0]],
            vec![vec![1.0, -1.0]],
        )
        .unwrap();
        let cfg = TrainConfig {
            max_steps: 20_000,
            snapshot_every: 1_000,
            target_loss: 1e-9,
            seed: 6,
            ..TrainConfig::new(1.0)
        };
        let (teacher, converged) = make_teacher(4, 4, 2, &memories, &cfg).unwrap();
        assert!(converged);
        assert_eq!(recognition_rate(&teacher, &memories).unwrap(), 1.0);
    }

    #[test]
    fn probes_are_binary_and_seeded() {
        let teacher = Network::init_random(6, 4, 3, TransferKind::Tanh, 0.5, 15).unwrap();
        let a = probe_random(&teacher, 50, 9, ProbeEncoding::PlusMinus).unwrap();
        let b = probe_random(&teacher, 50, 9, ProbeEncoding::PlusMinus).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        for i in 0..a.len() {
            assert!(a.input(i).iter().all(|&v| v == 1.0 || v == -1.0));
            assert_eq!(a.target(i), teacher.forward(a.input(i)).unwrap().as_slice());
        }
        let c = probe_random(&teacher, 10, 9, ProbeEncoding::ZeroOne).unwrap();
        assert!(c.input(0).iter().all(|&v| v == 1.0 || v == 0.0));
    }

    #[test]
    fn recovery_rate_identity_and_constant_student() {
        let teacher = Network::init_random(4, 5, 3, TransferKind::Tanh, 0.8, 20).unwrap();
        let memories = TrainingSet::new(
            vec![
                vec![1.0, 1.0, -1.0, -1.0],
                vec![-1.0, 1.0, 1.0, -1.0],
                vec![1.0, -1.0, 1.0, 1.0],
                vec![-1.0, -1.0, -1.0, 1.0],
            ],
            vec![
                vec![1.0, -1.0, -1.0],
                vec![-1.0, 1.0, -1.0],
                vec![1.0, -1.0, -1.0],
                vec![-1.0, -1.0, 1.0],
            ],
        )
        .unwrap();
        assert_eq!(recovery_rate(&teacher, &teacher, &memories).unwrap(), 1.0);

        // A constant-output student always answers with one class; the rate
        // is that class's frequency among the teacher's own answers.
        let mut constant = Network::zeroed(4, 2, 3, TransferKind::Tanh).unwrap();
        constant.b_out.copy_from_slice(&[0.0, 1.0, 0.0]);
        let teacher_answers: Vec<usize> = (0..memories.len())
            .map(|i| argmax(&teacher.forward(memories.input(i)).unwrap()))
            .collect();
        let freq = teacher_answers.iter().filter(|&&k| k == 1).count() as f64
            / memories.len() as f64;
        assert_eq!(
            recovery_rate(&constant, &teacher, &memories).unwrap(),
            freq
        );
    }
}
