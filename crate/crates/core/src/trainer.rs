//! Greedy Monte-Carlo training under a hard weight bound.
//!
//! Each proposal perturbs a few randomly chosen weights, clamps them into
//! `[-design_bound, +design_bound]`, and is accepted iff the mean squared
//! error over the training set does not increase. The bound is the
//! generalization control: large machines are kept smooth by limiting the
//! weight magnitudes rather than by early stopping.
//!
//! The chain caches per-sample hidden activations and outputs so that a
//! proposal touching one weight costs O(P) instead of a full forward pass
//! over the set. Snapshot losses are always re-evaluated from scratch with
//! [`loss`], so recorded snapshots stay exactly reproducible.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::integrate::Trajectory;
use crate::machines::{EvolveSpan, InitialCondition, MachineSpec};
use crate::net::Network;
use crate::{Error, Result};

/// Paired input and target vectors measured from a black system.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Shape("training set must not be empty".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} inputs vs {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let m = inputs[0].len();
        let l = targets[0].len();
        if m == 0 || l == 0 {
            return Err(Error::Shape("zero-width training vectors".into()));
        }
        for (idx, (x, t)) in inputs.iter().zip(&targets).enumerate() {
            if x.len() != m || t.len() != l {
                return Err(Error::Shape(format!("ragged sample at index {idx}")));
            }
            if x.iter().chain(t.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite value in sample {idx}")));
            }
        }
        Ok(TrainingSet { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty sets
    }

    pub fn input_width(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn target_width(&self) -> usize {
        self.targets[0].len()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i]
    }
}

/// Monte-Carlo training controls.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Hard bound on every weight magnitude (the design-risk control).
    pub design_bound: f64,
    /// Half-width of the uniform perturbation added to a chosen weight.
    pub proposal_scale: f64,
    pub max_steps: u64,
    /// Stop once the set MSE drops to this value.
    pub target_loss: f64,
    /// Store a full network snapshot every this many MC steps.
    pub snapshot_every: u64,
    /// Weights perturbed per proposal.
    pub batch: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for everything except the bound: one weight per proposal,
    /// proposal half-width `design_bound / 50`.
    pub fn new(design_bound: f64) -> Self {
        TrainConfig {
            design_bound,
            proposal_scale: design_bound / 50.0,
            max_steps: 100_000,
            target_loss: 1e-6,
            snapshot_every: 10_000,
            batch: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.design_bound > 0.0) {
            return Err(Error::Domain(format!(
                "design_bound must be > 0, got {}",
                self.design_bound
            )));
        }
        if !(self.proposal_scale > 0.0) {
            return Err(Error::Domain(format!(
                "proposal_scale must be > 0, got {}",
                self.proposal_scale
            )));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Domain("snapshot_every must be >= 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::Domain("batch must be >= 1".into()));
        }
        Ok(())
    }
}

/// Full network copy taken at a scheduled MC step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSnapshot {
    pub mc_step: u64,
    pub mse: f64,
    pub max_err: f64,
    pub net: Network,
}

/// Loss history and scheduled snapshots of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    /// (mc_step, mse) at every accepted step; non-increasing in mse.
    pub accepted: Vec<(u64, f64)>,
    pub snapshots: Vec<TrainSnapshot>,
    pub converged: bool,
    pub total_steps: u64,
}

impl TrainTrace {
    /// Write `mc_step,mse,max_err,snapshot_path` rows, saving each snapshot
    /// network next to the CSV in the flat model format.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let snap_dir = dir.join(format!("{stem}_snapshots"));
        fs::create_dir_all(&snap_dir)?;
        let mut csv = String::from("mc_step,mse,max_err,snapshot_path\n");
        for snap in &self.snapshots {
            let snap_path = snap_dir.join(format!("snap_{:09}.txt", snap.mc_step));
            snap.net.save(&snap_path)?;
            csv.push_str(&format!(
                "{},{:.16e},{:.16e},{}\n",
                snap.mc_step,
                snap.mse,
                snap.max_err,
                snap_path.display()
            ));
        }
        let csv_path = dir.join(format!("{stem}.csv"));
        fs::write(&csv_path, csv)?;
        Ok(csv_path)
    }

    /// Write the accepted-step loss history as `mc_step,mse`.
    pub fn write_loss_csv(&self, path: &Path) -> Result<()> {
        let mut csv = String::from("mc_step,mse\n");
        for (step, mse) in &self.accepted {
            csv.push_str(&format!("{step},{mse:.16e}\n"));
        }
        fs::write(path, csv)?;
        Ok(())
    }
}

/// Mean squared error over all samples and components, plus the largest
/// absolute componentwise error.
pub fn loss(net: &Network, set: &TrainingSet) -> Result<(f64, f64)> {
    if set.input_width() != net.m() || set.target_width() != net.l() {
        return Err(Error::Shape(format!(
            "training set is {}->{}, network is {}->{}",
            set.input_width(),
            set.target_width(),
            net.m(),
            net.l()
        )));
    }
    let mut z = vec![0.0; net.l()];
    let mut sse = 0.0;
    let mut max_err = 0.0f64;
    for i in 0..set.len() {
        net.forward_into(set.input(i), &mut z);
        for (zv, tv) in z.iter().zip(set.target(i)) {
            let e = zv - tv;
            sse += e * e;
            max_err = max_err.max(e.abs());
        }
    }
    Ok((sse / (set.len() * net.l()) as f64, max_err))
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    WIn { j: usize, i: usize },
    BHid { j: usize },
    WOut { k: usize, j: usize },
    BOut { k: usize },
}

#[derive(Debug, Clone, Copy)]
struct Change {
    coord: usize,
    slot: Slot,
    old: f64,
    new: f64,
}

/// Monte-Carlo chain state: the working network plus per-sample caches of
/// hidden pre-activations, hidden activations, outputs, and the running
/// sum of squared errors.
struct Engine<'a> {
    net: Network,
    set: &'a TrainingSet,
    bound: f64,
    h: Vec<f64>,
    a: Vec<f64>,
    z: Vec<f64>,
    sse: f64,
    changes: Vec<Change>,
    hidden_js: Vec<usize>,
    out_ks: Vec<usize>,
    cand_h: Vec<f64>,
    cand_a: Vec<f64>,
    cand_z: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(net: Network, set: &'a TrainingSet, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if set.input_width() != net.m() || set.target_width() != net.l() {
            return Err(Error::Shape(format!(
                "training set is {}->{}, network is {}->{}",
                set.input_width(),
                set.target_width(),
                net.m(),
                net.l()
            )));
        }
        if net.max_abs_param() > cfg.design_bound * (1.0 + 1e-12) {
            return Err(Error::Usage(format!(
                "initial network exceeds the design bound {}",
                cfg.design_bound
            )));
        }
        let (p, n, l) = (set.len(), net.n(), net.l());
        let mut engine = Engine {
            net,
            set,
            bound: cfg.design_bound,
            h: vec![0.0; p * n],
            a: vec![0.0; p * n],
            z: vec![0.0; p * l],
            sse: 0.0,
            changes: Vec::with_capacity(cfg.batch),
            hidden_js: Vec::with_capacity(cfg.batch),
            out_ks: Vec::with_capacity(cfg.batch),
            cand_h: Vec::new(),
            cand_a: Vec::new(),
            cand_z: Vec::new(),
        };
        engine.rebuild_caches();
        Ok(engine)
    }

    /// Recompute every cache from the current network; summation order
    /// matches [`loss`] exactly.
    fn rebuild_caches(&mut self) {
        let (p, m, n, l) = (self.set.len(), self.net.m(), self.net.n(), self.net.l());
        let transfer = self.net.transfer();
        let mut sse = 0.0;
        for mu in 0..p {
            let x = self.set.input(mu);
            for j in 0..n {
                let row = &self.net.w_in[j * m..(j + 1) * m];
                let mut hv = self.net.b_hid[j];
                for (w, xi) in row.iter().zip(x) {
                    hv += w * xi;
                }
                self.h[mu * n + j] = hv;
                self.a[mu * n + j] = transfer.apply(hv);
            }
            let t = self.set.target(mu);
            for k in 0..l {
                let row = &self.net.w_out[k * n..(k + 1) * n];
                let mut acc = self.net.b_out[k];
                for (w, av) in row.iter().zip(&self.a[mu * n..(mu + 1) * n]) {
                    acc += w * av;
                }
                self.z[mu * l + k] = acc;
                let e = acc - t[k];
                sse += e * e;
            }
        }
        self.sse = sse;
    }

    fn mse(&self) -> f64 {
        self.sse / (self.set.len() * self.net.l()) as f64
    }

    fn classify(&self, coord: usize) -> Slot {
        let (m, n, l) = (self.net.m(), self.net.n(), self.net.l());
        let (nm, ln) = (n * m, l * n);
        if coord < nm {
            Slot::WIn {
                j: coord / m,
                i: coord % m,
            }
        } else if coord < nm + n {
            Slot::BHid { j: coord - nm }
        } else if coord < nm + n + ln {
            let q = coord - nm - n;
            Slot::WOut { k: q / n, j: q % n }
        } else {
            Slot::BOut {
                k: coord - nm - n - ln,
            }
        }
    }

    /// Draw one proposal, evaluate it incrementally, and commit it iff the
    /// squared-error sum does not increase. Returns the acceptance flag and
    /// the (possibly updated) MSE.
    fn propose<R: Rng>(&mut self, cfg: &TrainConfig, rng: &mut R) -> (bool, f64) {
        let count = self.net.param_count();
        self.changes.clear();
        for _ in 0..cfg.batch {
            let coord = rng.random_range(0..count);
            let delta = rng.random_range(-cfg.proposal_scale..=cfg.proposal_scale);
            match self.changes.iter_mut().find(|c| c.coord == coord) {
                Some(change) => {
                    change.new = (change.new + delta).clamp(-self.bound, self.bound);
                }
                None => {
                    let old = self.net.param(coord);
                    self.changes.push(Change {
                        coord,
                        slot: self.classify(coord),
                        old,
                        new: (old + delta).clamp(-self.bound, self.bound),
                    });
                }
            }
        }

        self.hidden_js.clear();
        self.out_ks.clear();
        for change in &self.changes {
            match change.slot {
                Slot::WIn { j, .. } | Slot::BHid { j } => {
                    if !self.hidden_js.contains(&j) {
                        self.hidden_js.push(j);
                    }
                }
                Slot::WOut { k, .. } | Slot::BOut { k } => {
                    if !self.out_ks.contains(&k) {
                        self.out_ks.push(k);
                    }
                }
            }
        }
        self.hidden_js.sort_unstable();
        self.out_ks.sort_unstable();

        let cand_sse = if self.hidden_js.is_empty() {
            self.eval_output_only()
        } else {
            self.eval_with_hidden()
        };

        let accepted = cand_sse <= self.sse;
        if accepted {
            self.commit(cand_sse);
        }
        (accepted, self.mse())
    }

    /// Candidate SSE when only output weights/biases changed: touched
    /// output components are updated in place of a full re-evaluation.
    fn eval_output_only(&mut self) -> f64 {
        let (p, n, l) = (self.set.len(), self.net.n(), self.net.l());
        let ks = &self.out_ks;
        self.cand_z.resize(p * ks.len(), 0.0);
        let mut delta_sse = 0.0;
        for mu in 0..p {
            let t = self.set.target(mu);
            for (kk, &k) in ks.iter().enumerate() {
                let mut zv = self.z[mu * l + k];
                for change in &self.changes {
                    match change.slot {
                        Slot::WOut { k: ck, j } if ck == k => {
                            zv += (change.new - change.old) * self.a[mu * n + j];
                        }
                        Slot::BOut { k: ck } if ck == k => {
                            zv += change.new - change.old;
                        }
                        _ => {}
                    }
                }
                self.cand_z[mu * ks.len() + kk] = zv;
                let e_new = zv - t[k];
                let e_old = self.z[mu * l + k] - t[k];
                delta_sse += e_new * e_new - e_old * e_old;
            }
        }
        self.sse + delta_sse
    }

    /// Candidate SSE when hidden-layer parameters changed: the affected
    /// hidden columns are recomputed and every output component shifts.
    fn eval_with_hidden(&mut self) -> f64 {
        let (p, n, l) = (self.set.len(), self.net.n(), self.net.l());
        let transfer = self.net.transfer();
        let js = &self.hidden_js;
        self.cand_h.resize(p * js.len(), 0.0);
        self.cand_a.resize(p * js.len(), 0.0);
        self.cand_z.resize(p * l, 0.0);
        let mut delta_sse = 0.0;
        for mu in 0..p {
            let x = self.set.input(mu);
            let t = self.set.target(mu);
            for (jj, &j) in js.iter().enumerate() {
                let mut hv = self.h[mu * n + j];
                for change in &self.changes {
                    match change.slot {
                        Slot::WIn { j: cj, i } if cj == j => {
                            hv += (change.new - change.old) * x[i];
                        }
                        Slot::BHid { j: cj } if cj == j => {
                            hv += change.new - change.old;
                        }
                        _ => {}
                    }
                }
                self.cand_h[mu * js.len() + jj] = hv;
                self.cand_a[mu * js.len() + jj] = transfer.apply(hv);
            }
            for k in 0..l {
                let mut zv = self.z[mu * l + k];
                for (jj, &j) in js.iter().enumerate() {
                    let w_old = self.net.w_out[k * n + j];
                    let w_new = self.effective_w_out(k, j);
                    zv += w_new * self.cand_a[mu * js.len() + jj] - w_old * self.a[mu * n + j];
                }
                for change in &self.changes {
                    match change.slot {
                        Slot::WOut { k: ck, j } if ck == k && !js.contains(&j) => {
                            zv += (change.new - change.old) * self.a[mu * n + j];
                        }
                        Slot::BOut { k: ck } if ck == k => {
                            zv += change.new - change.old;
                        }
                        _ => {}
                    }
                }
                self.cand_z[mu * l + k] = zv;
                let e_new = zv - t[k];
                let e_old = self.z[mu * l + k] - t[k];
                delta_sse += e_new * e_new - e_old * e_old;
            }
        }
        self.sse + delta_sse
    }

    fn effective_w_out(&self, k: usize, j: usize) -> f64 {
        for change in &self.changes {
            if let Slot::WOut { k: ck, j: cj } = change.slot {
                if ck == k && cj == j {
                    return change.new;
                }
            }
        }
        self.net.w_out[k * self.net.n() + j]
    }

    fn commit(&mut self, cand_sse: f64) {
        let (p, n, l) = (self.set.len(), self.net.n(), self.net.l());
        for change in &self.changes {
            self.net.set_param(change.coord, change.new);
        }
        if self.hidden_js.is_empty() {
            let ks = &self.out_ks;
            for mu in 0..p {
                for (kk, &k) in ks.iter().enumerate() {
                    self.z[mu * l + k] = self.cand_z[mu * ks.len() + kk];
                }
            }
        } else {
            let js = &self.hidden_js;
            for mu in 0..p {
                for (jj, &j) in js.iter().enumerate() {
                    self.h[mu * n + j] = self.cand_h[mu * js.len() + jj];
                    self.a[mu * n + j] = self.cand_a[mu * js.len() + jj];
                }
                self.z[mu * l..(mu + 1) * l].copy_from_slice(&self.cand_z[mu * l..(mu + 1) * l]);
            }
        }
        self.sse = cand_sse.max(0.0);
    }
}

/// One Monte-Carlo step on a standalone network. Returns the (possibly
/// unchanged) network, whether the proposal was accepted, and the MSE
/// after the step.
pub fn mc_step<R: Rng>(
    net: &Network,
    set: &TrainingSet,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(Network, bool, f64)> {
    let mut engine = Engine::new(net.clone(), set, cfg)?;
    let (accepted, mse) = engine.propose(cfg, rng);
    Ok((engine.net, accepted, mse))
}

/// Run the Monte-Carlo chain until the loss target or the step budget is
/// reached. The same seed always produces bit-identical results.
pub fn train(net: &Network, set: &TrainingSet, cfg: &TrainConfig) -> Result<(Network, TrainTrace)> {
    let mut engine = Engine::new(net.clone(), set, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = TrainTrace {
        accepted: Vec::new(),
        snapshots: Vec::new(),
        converged: false,
        total_steps: 0,
    };

    let snapshot = |engine: &Engine, step: u64| -> Result<TrainSnapshot> {
        let (mse, max_err) = loss(&engine.net, engine.set)?;
        Ok(TrainSnapshot {
            mc_step: step,
            mse,
            max_err,
            net: engine.net.clone(),
        })
    };

    if engine.mse() <= cfg.target_loss {
        trace.converged = true;
        trace.snapshots.push(snapshot(&engine, 0)?);
        return Ok((engine.net, trace));
    }

    let mut step = 0u64;
    while step < cfg.max_steps {
        step += 1;
        let (accepted, mse) = engine.propose(cfg, &mut rng);
        if accepted {
            trace.accepted.push((step, mse));
        }
        if step % cfg.snapshot_every == 0 {
            trace.snapshots.push(snapshot(&engine, step)?);
        }
        if mse <= cfg.target_loss {
            trace.converged = true;
            break;
        }
    }
    trace.total_steps = step;
    if trace.snapshots.last().map(|s| s.mc_step) != Some(step) {
        trace.snapshots.push(snapshot(&engine, step)?);
    }
    Ok((engine.net, trace))
}

/// One stage of an annealed Monte-Carlo schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStage {
    pub proposal_scale: f64,
    pub max_steps: u64,
}

/// Chain [`train`] over a coarse-to-fine proposal schedule. Stage `i` runs
/// with `base` reconfigured to the stage's scale and budget, seeded
/// `base.seed + i`; step counters in the merged trace are global across
/// stages. Stops early once a stage reaches the loss target.
pub fn train_stages(
    net: &Network,
    set: &TrainingSet,
    base: &TrainConfig,
    stages: &[TrainStage],
) -> Result<(Network, TrainTrace)> {
    if stages.is_empty() {
        return Err(Error::Usage("training schedule needs at least one stage".into()));
    }
    let mut current = net.clone();
    let mut merged = TrainTrace {
        accepted: Vec::new(),
        snapshots: Vec::new(),
        converged: false,
        total_steps: 0,
    };
    for (i, stage) in stages.iter().enumerate() {
        let cfg = TrainConfig {
            proposal_scale: stage.proposal_scale,
            max_steps: stage.max_steps,
            seed: base.seed.wrapping_add(i as u64),
            ..base.clone()
        };
        let (next, trace) = train(&current, set, &cfg)?;
        current = next;
        let offset = merged.total_steps;
        merged
            .accepted
            .extend(trace.accepted.iter().map(|&(s, m)| (offset + s, m)));
        for snap in &trace.snapshots {
            if merged.snapshots.last().map(|s| s.mc_step) == Some(offset + snap.mc_step) {
                merged.snapshots.pop();
            }
            let mut snap = snap.clone();
            snap.mc_step += offset;
            merged.snapshots.push(snap);
        }
        merged.total_steps += trace.total_steps;
        if trace.converged {
            merged.converged = true;
            break;
        }
    }
    Ok((current, merged))
}

/// Outcome of re-evolving one snapshot.
#[derive(Debug, Clone)]
pub enum ReplayOutcome {
    Evolved(Trajectory),
    Diverged { t: f64 },
}

#[derive(Debug, Clone)]
pub struct SnapshotRun {
    pub mc_step: u64,
    pub outcome: ReplayOutcome,
}

/// Evolution settings shared by every snapshot replay.
#[derive(Debug, Clone)]
pub struct ReplayPlan {
    pub init: InitialCondition,
    pub span: EvolveSpan,
    pub step: f64,
    /// Time discarded from the start of each evolved trajectory.
    pub discard: f64,
}

/// Rebuild a machine around every snapshot and self-evolve it. Divergence
/// is data here, not a fault: diverged snapshots are marked and the
/// sequence continues.
pub fn replay_snapshots(
    trace: &TrainTrace,
    mspec: &MachineSpec,
    plan: &ReplayPlan,
) -> Result<Vec<SnapshotRun>> {
    let mut runs = Vec::with_capacity(trace.snapshots.len());
    for snap in &trace.snapshots {
        let machine = mspec.build(snap.net.clone())?;
        let outcome = match machine.self_evolve(&plan.init, plan.span, plan.step) {
            Ok(traj) => {
                let start = traj.time(0);
                ReplayOutcome::Evolved(traj.tail_from(start + plan.discard))
            }
            Err(Error::Diverged { t }) => ReplayOutcome::Diverged { t },
            Err(other) => return Err(other),
        };
        runs.push(SnapshotRun {
            mc_step: snap.mc_step,
            outcome,
        });
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::MachineKind;
    use crate::net::TransferKind;

    fn scalar_set(pairs: &[(f64, f64)]) -> TrainingSet {
        TrainingSet::new(
            pairs.iter().map(|&(x, _)| vec![x]).collect(),
            pairs.iter().map(|&(_, t)| vec![t]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn training_set_validation() {
        assert!(matches!(
            TrainingSet::new(vec![], vec![]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            TrainingSet::new(vec![vec![1.0]], vec![vec![1.0], vec![2.0]]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            TrainingSet::new(vec![vec![1.0], vec![1.0, 2.0]], vec![vec![0.0], vec![0.0]]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            TrainingSet::new(vec![vec![f64::NAN]], vec![vec![0.0]]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn loss_on_exact_reproduction_is_zero() {
        let net = Network::init_random(2, 5, 2, TransferKind::Tanh, 0.5, 3).unwrap();
        let inputs = vec![vec![0.2, -0.4], vec![1.0, 0.3]];
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| net.forward(x).unwrap()).collect();
        let set = TrainingSet::new(inputs, targets).unwrap();
        assert_eq!(loss(&net, &set).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn loss_hand_values() {
        let net = Network::zeroed(1, 1, 1, TransferKind::Tanh).unwrap();
        let set = scalar_set(&[(0.5, 1.0)]);
        assert_eq!(loss(&net, &set).unwrap(), (1.0, 1.0));
        // errors 0 and 2: mse = (0 + 4) / 2 = 2, max = 2
        let set = scalar_set(&[(0.5, 0.0), (0.5, 2.0)]);
        assert_eq!(loss(&net, &set).unwrap(), (2.0, 2.0));
    }

    #[test]
    fn loss_rejects_width_mismatch() {
        let net = Network::zeroed(2, 1, 1, TransferKind::Tanh).unwrap();
        let set = scalar_set(&[(0.5, 1.0)]);
        assert!(matches!(loss(&net, &set), Err(Error::Shape(_))));
    }

    #[test]
    fn rejected_proposal_leaves_network_unchanged() {
        // Start at the optimum: targets are the net's own outputs, so any
        // effective perturbation increases the loss and must be rejected;
        // no-op perturbations are plateau-accepted with identical weights.
        let net = Network::init_random(1, 3, 1, TransferKind::Tanh, 0.5, 9).unwrap();
        let inputs = vec![vec![0.3], vec![-0.8], vec![1.2]];
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| net.forward(x).unwrap()).collect();
        let set = TrainingSet::new(inputs, targets).unwrap();
        let cfg = TrainConfig {
            seed: 1,
            ..TrainConfig::new(0.5)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut current = net.clone();
        let mut saw_reject = false;
        for _ in 0..50 {
            let (next, accepted, _) = mc_step(&current, &set, &cfg, &mut rng).unwrap();
            if !accepted {
                saw_reject = true;
                assert_eq!(next, current);
            }
            current = next;
        }
        assert!(saw_reject);
        assert_eq!(current, net, "optimum should never be left");
    }

    #[test]
    fn clamped_noop_proposal_is_plateau_accepted() {
        // Every weight sits at +bound and the set is already fit exactly, so
        // positive perturbations clamp back to the bound (exact no-ops,
        // accepted) and negative ones worsen the fit (rejected). Either way
        // the weights never move off the bound.
        let bound = 0.4;
        let m = 2;
        let count = 3 * m + 3 + 3 + 1;
        let mut net = Network::zeroed(m, 3, 1, TransferKind::Tanh).unwrap();
        for p in 0..count {
            net.set_param(p, bound);
        }
        let inputs = vec![vec![0.5, 0.25], vec![-0.3, 0.1]];
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| net.forward(x).unwrap()).collect();
        let set = TrainingSet::new(inputs, targets).unwrap();
        let cfg = TrainConfig {
            seed: 4,
            ..TrainConfig::new(bound)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut current = net;
        let mut plateau_accepts = 0;
        for _ in 0..100 {
            let (next, accepted, _) = mc_step(&current, &set, &cfg, &mut rng).unwrap();
            if accepted {
                plateau_accepts += 1;
            }
            assert!(next.max_abs_param() <= bound);
            for p in 0..count {
                assert_eq!(next.param(p), bound);
            }
            current = next;
        }
        assert!(plateau_accepts > 0, "positive perturbations should plateau-accept");
    }

    #[test]
    fn train_returns_immediately_when_target_met() {
        let net = Network::init_random(1, 2, 1, TransferKind::Tanh, 0.5, 2).unwrap();
        let inputs = vec![vec![0.4]];
        let targets = vec![net.forward(&[0.4]).unwrap()];
        let set = TrainingSet::new(inputs, targets).unwrap();
        let cfg = TrainConfig::new(0.5);
        let (out, trace) = train(&net, &set, &cfg).unwrap();
        assert_eq!(out, net);
        assert!(trace.converged);
        assert!(trace.accepted.is_empty());
        assert_eq!(trace.snapshots.len(), 1);
        assert_eq!(trace.snapshots[0].mc_step, 0);
    }

    #[test]
    fn single_sample_fit_converges_via_free_bias() {
        let net = Network::zeroed(1, 2, 1, TransferKind::Tanh).unwrap();
        let set = scalar_set(&[(0.5, 0.3)]);
        // Oracle: the output bias alone can zero the error, and the needed
        // value sits inside the design bound.
        let residual = 0.3 - net.forward(&[0.5]).unwrap()[0];
        assert!(residual.abs() <= 1.0);
        let cfg = TrainConfig {
            max_steps: 50_000,
            target_loss: 1e-6,
            seed: 11,
            ..TrainConfig::new(1.0)
        };
        let (_, trace) = train(&net, &set, &cfg).unwrap();
        assert!(trace.converged, "final mse {:?}", trace.snapshots.last().map(|s| s.mse));
    }

    #[test]
    fn training_is_deterministic() {
        let net = Network::init_random(2, 6, 2, TransferKind::Gauss, 0.8, 5).unwrap();
        let inputs: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![(i as f64) * 0.1 - 0.5, (i as f64) * 0.05])
            .collect();
        let targets: Vec<Vec<f64>> = inputs
            .iter()
            .map(|x| vec![(x[0] * 2.0).sin(), x[1]])
            .collect();
        let set = TrainingSet::new(inputs, targets).unwrap();
        let cfg = TrainConfig {
            max_steps: 3_000,
            target_loss: 0.0,
            snapshot_every: 1_000,
            seed: 77,
            ..TrainConfig::new(0.8)
        };
        let (net_a, trace_a) = train(&net, &set, &cfg).unwrap();
        let (net_b, trace_b) = train(&net, &set, &cfg).unwrap();
        assert_eq!(net_a, net_b);
        assert_eq!(trace_a, trace_b);
    }

    #[test]
    fn accepted_losses_never_increase_and_bound_holds() {
        let net = Network::init_random(2, 8, 1, TransferKind::Gauss, 0.6, 13).unwrap();
        let inputs: Vec<Vec<f64>> = (0..15)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()])
            .collect();
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![x[0] * x[1]]).collect();
        let set = TrainingSet::new(inputs, targets).unwrap();
        let cfg = TrainConfig {
            max_steps: 5_000,
            target_loss: 0.0,
            snapshot_every: 500,
            seed: 29,
            ..TrainConfig::new(0.6)
        };
        let (out, trace) = train(&net, &set, &cfg).unwrap();
        for pair in trace.accepted.windows(2) {
            assert!(pair[1].1 <= pair[0].1, "loss increased: {pair:?}");
        }
        assert!(out.max_abs_param() <= 0.6);
        for snap in &trace.snapshots {
            assert!(snap.net.max_abs_param() <= 0.6);
        }
    }

    #[test]
    fn snapshot_losses_are_reproducible() {
        let net = Network::init_random(1, 4, 1, TransferKind::Tanh, 0.9, 17).unwrap();
        let set = scalar_set(&[(0.1, 0.4), (0.6, -0.2), (-0.3, 0.1)]);
        let cfg = TrainConfig {
            max_steps: 4_000,
            target_loss: 0.0,
            snapshot_every: 1_000,
            seed: 3,
            ..TrainConfig::new(0.9)
        };
        let (_, trace) = train(&net, &set, &cfg).unwrap();
        assert!(trace.snapshots.len() >= 4);
        for snap in &trace.snapshots {
            let (mse, max_err) = loss(&snap.net, &set).unwrap();
            assert!((mse - snap.mse).abs() < 1e-12);
            assert!((max_err - snap.max_err).abs() < 1e-12);
        }
    }

    #[test]
    fn batched_proposals_match_full_reevaluation() {
        // Incremental candidate evaluation must agree with a from-scratch
        // loss computation at every accepted step.
        let net = Network::init_random(3, 5, 2, TransferKind::Gauss, 0.7, 23).unwrap();
        let inputs: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![i as f64 * 0.2, (i as f64).sin(), 0.3])
            .collect();
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![x[0], x[1] * 0.5]).collect();
        let set = TrainingSet::new(inputs, targets).unwrap();
        let cfg = TrainConfig {
            batch: 3,
            max_steps: 500,
            target_loss: 0.0,
            seed: 19,
            ..TrainConfig::new(0.7)
        };
        let mut engine = Engine::new(net, &set, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..500 {
            let (_, mse) = engine.propose(&cfg, &mut rng);
            let (fresh, _) = loss(&engine.net, &set).unwrap();
            assert!(
                (mse - fresh).abs() <= 1e-12 * fresh.max(1.0),
                "cached {mse} vs fresh {fresh}"
            );
        }
    }

    #[test]
    fn staged_training_matches_manual_chaining() {
        let net = Network::init_random(2, 5, 1, TransferKind::Gauss, 0.7, 41).unwrap();
        let inputs: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.4).sin(), (i as f64 * 0.9).cos()])
            .collect();
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![x[0] - 0.5 * x[1]]).collect();
        let set = TrainingSet::new(inputs, targets).unwrap();
        let base = TrainConfig {
            max_steps: 0,
            target_loss: 0.0,
            snapshot_every: 400,
            seed: 90,
            ..TrainConfig::new(0.7)
        };
        let stages = [
            TrainStage { proposal_scale: 0.05, max_steps: 1_000 },
            TrainStage { proposal_scale: 0.01, max_steps: 1_000 },
        ];
        let (out, trace) = train_stages(&net, &set, &base, &stages).unwrap();

        let cfg1 = TrainConfig { proposal_scale: 0.05, max_steps: 1_000, ..base.clone() };
        let (mid, t1) = train(&net, &set, &cfg1).unwrap();
        let cfg2 = TrainConfig { proposal_scale: 0.01, max_steps: 1_000, seed: 91, ..base.clone() };
        let (end, t2) = train(&mid, &set, &cfg2).unwrap();
        assert_eq!(out, end);
        assert_eq!(trace.total_steps, 2_000);
        assert_eq!(trace.accepted.len(), t1.accepted.len() + t2.accepted.len());
        let last = trace.snapshots.last().unwrap();
        assert_eq!(last.mc_step, 2_000);
        assert_eq!(last.net, t2.snapshots.last().unwrap().net);
        // Global step numbering across the boundary.
        assert!(trace.snapshots.windows(2).all(|w| w[0].mc_step < w[1].mc_step));
    }

    #[test]
    fn replay_handles_empty_identical_and_diverged_snapshots() {
        let empty = TrainTrace {
            accepted: vec![],
            snapshots: vec![],
            converged: false,
            total_steps: 0,
        };
        let mspec = MachineSpec::plain(MachineKind::Ilm);
        let plan = ReplayPlan {
            init: InitialCondition::State(vec![0.2]),
            span: EvolveSpan::Steps(5),
            step: 1.0,
            discard: 0.0,
        };
        assert!(replay_snapshots(&empty, &mspec, &plan).unwrap().is_empty());

        let net = Network::init_random(1, 3, 1, TransferKind::Tanh, 0.5, 7).unwrap();
        let snap = |step| TrainSnapshot {
            mc_step: step,
            mse: 0.1,
            max_err: 0.2,
            net: net.clone(),
        };
        let trace = TrainTrace {
            accepted: vec![],
            snapshots: vec![snap(100), snap(200)],
            converged: false,
            total_steps: 200,
        };
        let runs = replay_snapshots(&trace, &mspec, &plan).unwrap();
        assert_eq!(runs.len(), 2);
        match (&runs[0].outcome, &runs[1].outcome) {
            (ReplayOutcome::Evolved(a), ReplayOutcome::Evolved(b)) => assert_eq!(a, b),
            other => panic!("expected evolved pair, got {other:?}"),
        }

        let mut big = Network::zeroed(1, 2, 1, TransferKind::Tanh).unwrap();
        big.b_out[0] = 2e6;
        let diverging = TrainTrace {
            accepted: vec![],
            snapshots: vec![TrainSnapshot {
                mc_step: 1,
                mse: 0.0,
                max_err: 0.0,
                net: big,
            }],
            converged: true,
            total_steps: 1,
        };
        let runs = replay_snapshots(&diverging, &mspec, &plan).unwrap();
        assert!(matches!(runs[0].outcome, ReplayOutcome::Diverged { .. }));
    }

    #[test]
    fn trace_export_writes_csv_and_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let net = Network::init_random(1, 2, 1, TransferKind::Tanh, 0.5, 31).unwrap();
        let set = scalar_set(&[(0.2, 0.5)]);
        let cfg = TrainConfig {
            max_steps: 1_000,
            target_loss: 0.0,
            snapshot_every: 400,
            seed: 5,
            ..TrainConfig::new(0.5)
        };
        let (_, trace) = train(&net, &set, &cfg).unwrap();
        let csv_path = trace.export(dir.path(), "teacher").unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "mc_step,mse,max_err,snapshot_path");
        let first = lines.next().unwrap();
        let snap_path = first.rsplit(',').next().unwrap();
        let reloaded = Network::load(Path::new(snap_path)).unwrap();
        assert_eq!(reloaded, trace.snapshots[0].net);
    }
}
