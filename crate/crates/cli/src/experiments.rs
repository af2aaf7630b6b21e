//! The five experiment drivers.
//!
//! Every experiment writes its outputs under the configured directory:
//! the resolved config echo, trained model files, CSVs for plotting, and
//! a `summary.txt` with the headline metrics. Outputs depend only on the
//! config and input files; reruns are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use dyncopy_core::analysis::{
    self, attractor_projection, bifurcation_over_training, bifurcation_sweep, expand_bounds,
    fraction_in_rect, fraction_within, prediction_horizon, trajectory_bounds, LorenzAxis,
    PeriodClass, PeriodSpec, ProjectionMode, SectionSpec,
};
use dyncopy_core::blackbox::{
    self, delay_embed, make_teacher, probe_random, recognition_rate, recovery_rate, record_series,
    sample_flow_pairs, PatternSet, Series,
};
use dyncopy_core::integrate::{self, Trajectory};
use dyncopy_core::machines::{EvolveSpan, InitialCondition, Machine, MachineKind, MachineSpec};
use dyncopy_core::net::Network;
use dyncopy_core::trainer::{self, train_stages, ReplayPlan, TrainingSet};

use crate::config::{parse_transfer, ClassifierConfig, Config, DdlmConfig, DlmConfig, ReplayConfig, SeriesConfig};
use crate::idx::{read_idx, PixelEncoding};
use crate::lightcurve::{read_lightcurve, smooth_bin};
use crate::CliResult;

/// Ordered key/value pairs written to `summary.txt`.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    pairs: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.pairs.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut out = String::new();
        for (k, v) in &self.pairs {
            out.push_str(&format!("{k} = {v}\n"));
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Run an experiment end to end; returns the summary that was also
/// written to `<out_dir>/summary.txt`. A failing run leaves whatever
/// outputs it managed to write plus a `FAILED.txt` naming the error.
pub fn run(config: &Config) -> CliResult<Summary> {
    let out = config.out_dir().to_path_buf();
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.resolved.toml"), config.to_toml())?;
    let result = match config {
        Config::CopyClassifier(c) => copy_classifier(c, &out),
        Config::CopyLorenzDlm(c) => copy_lorenz_dlm(c, &out),
        Config::CopyLorenzDdlm(c) => copy_lorenz_ddlm(c, &out),
        Config::HistoryReplay(c) => history_replay(c, &out),
        Config::CopySeries(c) => copy_series(c, &out),
    };
    match result {
        Ok(summary) => {
            summary.write(&out.join("summary.txt"))?;
            Ok(summary)
        }
        Err(err) => {
            let _ = fs::write(
                out.join("FAILED.txt"),
                format!("partial outputs; run failed: {err}\n"),
            );
            Err(err)
        }
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6e}")
}

// ---------------------------------------------------------------- classifier

fn classifier_memories(c: &ClassifierConfig) -> CliResult<(TrainingSet, usize)> {
    if let Some(mnist) = &c.mnist {
        let encoding = match c.encoding()? {
            blackbox::ProbeEncoding::PlusMinus => PixelEncoding::PlusMinus,
            blackbox::ProbeEncoding::ZeroOne => PixelEncoding::ZeroOne,
        };
        let data = read_idx(&mnist.images, &mnist.labels, encoding)?;
        let take = mnist.limit.min(data.images.len());
        let set = PatternSet {
            inputs: data.images[..take].to_vec(),
            labels: data.labels[..take].iter().map(|&l| l as usize).collect(),
        };
        let width = data.rows * data.cols;
        Ok((set.to_training_set(c.classes)?, width))
    } else {
        let set = PatternSet::load(&c.patterns)?;
        let width = set.inputs[0].len();
        Ok((set.to_training_set(c.classes)?, width))
    }
}

fn copy_classifier(c: &ClassifierConfig, out: &Path) -> CliResult<Summary> {
    let mut summary = Summary::default();
    let (memories, width) = classifier_memories(c)?;
    summary.push("memories", memories.len());
    summary.push("input_width", width);

    let teacher_cfg = trainer::TrainConfig {
        design_bound: c.teacher.design_bound,
        proposal_scale: c.teacher.proposal_scale,
        max_steps: c.teacher.max_steps,
        target_loss: c.teacher.target_loss,
        snapshot_every: c.teacher.check_every,
        batch: 1,
        seed: c.seed,
    };
    let (teacher, converged) = make_teacher(width, c.teacher.hidden, c.classes, &memories, &teacher_cfg)?;
    teacher.save(&out.join("teacher.net"))?;
    let self_recognition = recognition_rate(&teacher, &memories)?;
    summary.push("teacher_converged", converged);
    summary.push("teacher_self_recognition", fmt_f(self_recognition));

    let encoding = c.encoding()?;
    let student_transfer = parse_transfer(&c.student_transfer)?;
    let mut rows = String::from("probes,recovery,mse,max_err\n");
    let mut last_rate = 0.0;
    let mut rates = Vec::new();
    for &count in &c.probe_counts {
        let probes = probe_random(&teacher, count, c.seed.wrapping_add(count as u64), encoding)?;
        let init = Network::init_random(
            width,
            c.student_hidden,
            c.classes,
            student_transfer,
            c.train.init_bound,
            c.seed,
        )?;
        let (student, _) = train_stages(&init, &probes, &c.train.base_config(c.seed), &c.train.stages())?;
        let (mse, max_err) = trainer::loss(&student, &probes)?;
        let rate = recovery_rate(&student, &teacher, &memories)?;
        student.save(&out.join(format!("student_p{count}.net")))?;
        rows.push_str(&format!("{count},{rate:.6},{mse:.6e},{max_err:.6e}\n"));
        summary.push(&format!("recovery_p{count}"), fmt_f(rate));
        rates.push(rate);
        last_rate = rate;
    }
    fs::write(out.join("recovery.csv"), rows)?;
    summary.push("recovery_final", fmt_f(last_rate));
    let monotone_within_slack = rates.windows(2).all(|w| w[1] >= w[0] - 0.05);
    summary.push("recovery_trend_ok", monotone_within_slack);
    Ok(summary)
}

// ----------------------------------------------------------------------- dlm

fn copy_lorenz_dlm(c: &DlmConfig, out: &Path) -> CliResult<Summary> {
    let mut summary = Summary::default();
    let params = c.lorenz.params();
    let set = sample_flow_pairs(
        &params,
        c.sampling.count,
        c.sampling.interval,
        &c.sampling.range_tuples(),
        c.sampling.flow_target()?,
        c.sampling.seed,
    )?;
    summary.push("samples", set.len());

    let transfer = parse_transfer(&c.transfer)?;
    let init = Network::init_random(3, c.hidden, 3, transfer, c.train.init_bound, c.seed)?;
    let (model, trace) = train_stages(&init, &set, &c.train.base_config(c.seed), &c.train.stages())?;
    model.save(&out.join("model.net"))?;
    trace.export(out, "trace")?;
    trace.write_loss_csv(&out.join("loss.csv"))?;
    let (mse, max_err) = trainer::loss(&model, &set)?;
    summary.push("train_mse", fmt_f(mse));
    summary.push("train_max_err", fmt_f(max_err));
    summary.push("train_converged", trace.converged);

    // Shared initial point on the true attractor.
    let field = blackbox::lorenz_field(params);
    let settled = integrate::integrate_ode(&field, &[1.0, 1.0, 1.0], 0.0, c.eval_settle, c.step)?;
    let x0 = settled.last_state().to_vec();
    let truth = integrate::integrate_ode(&field, &x0, 0.0, c.eval_duration, c.step)?;
    truth.write_csv(&out.join("truth.csv"))?;

    let machine = Machine::new(MachineKind::Dlm, model, None)?;
    let init_state = InitialCondition::State(x0);
    match machine.self_evolve(&init_state, EvolveSpan::Time(c.eval_duration), c.step) {
        Ok(copy) => {
            copy.write_csv(&out.join("copy.csv"))?;
            let horizon = prediction_horizon(&truth, &copy, c.eval_eps, 0)?;
            summary.push("prediction_horizon", fmt_f(horizon));
            let bounds = expand_bounds(&trajectory_bounds(&truth), 2.0);
            summary.push("in_double_box_fraction", fmt_f(fraction_within(&copy, &bounds)));
            let true_proj = attractor_projection(&truth, ProjectionMode::Coords(0, 2))?;
            let copy_proj = attractor_projection(&copy, ProjectionMode::Coords(0, 2))?;
            analysis::write_projection_csv(&true_proj, &out.join("truth_xz.csv"))?;
            analysis::write_projection_csv(&copy_proj, &out.join("copy_xz.csv"))?;
        }
        Err(dyncopy_core::Error::Diverged { t }) => {
            summary.push("prediction_horizon", "diverged");
            summary.push("diverged_at", fmt_f(t));
        }
        Err(other) => return Err(other.into()),
    }
    Ok(summary)
}

// ---------------------------------------------------------------------- ddlm

fn copy_lorenz_ddlm(c: &DdlmConfig, out: &Path) -> CliResult<Summary> {
    let mut summary = Summary::default();
    let params = c.lorenz.params();
    let field = blackbox::lorenz_field(params);
    let settled = integrate::integrate_ode(&field, &[1.0, 1.0, 1.0], 0.0, c.record.settle, c.step)?;
    let x0 = [
        settled.last_state()[0],
        settled.last_state()[1],
        settled.last_state()[2],
    ];
    let total = c.record.duration + c.attractor_duration.max(c.eval_duration);
    let full = record_series(&params, &x0, total, c.record.gap, c.record.component)?;
    let train_records = (c.record.duration / c.record.gap).round() as usize + 1;
    let train_series = full.window(0, train_records)?;
    let compare_records = (c.eval_duration / c.record.gap).round() as usize + 1;
    let truth = full
        .window(train_records - 1, compare_records)?
        .to_trajectory();

    let (set, delay) = delay_embed(&train_series, c.taps, blackbox::EmbedTarget::Derivative)?;
    summary.push("samples", set.len());

    let transfer = parse_transfer(&c.transfer)?;
    let init = Network::init_random(c.taps + 1, c.hidden, 1, transfer, c.train.init_bound, c.seed)?;
    let (model, trace) = train_stages(&init, &set, &c.train.base_config(c.seed), &c.train.stages())?;
    model.save(&out.join("model.net"))?;
    trace.write_loss_csv(&out.join("loss.csv"))?;
    let (mse, max_err) = trainer::loss(&model, &set)?;
    summary.push("train_mse", fmt_f(mse));
    summary.push("train_max_err", fmt_f(max_err));
    summary.push("train_converged", trace.converged);

    let machine = Machine::new(MachineKind::Ddlm, model, Some(delay))?;
    let init_hist = InitialCondition::History(train_series.clone());
    truth.write_csv(&out.join("truth.csv"))?;
    match machine.self_evolve(&init_hist, EvolveSpan::Time(c.eval_duration), c.step) {
        Ok(predicted) => {
            predicted.write_csv(&out.join("predicted.csv"))?;
            let horizon = prediction_horizon(&truth, &predicted, c.eval_eps, 0)?;
            summary.push("prediction_horizon", fmt_f(horizon - predicted.time(0)));
        }
        Err(dyncopy_core::Error::Diverged { t }) => {
            summary.push("prediction_horizon", "diverged");
            summary.push("diverged_at", fmt_f(t));
        }
        Err(other) => return Err(other.into()),
    }

    match machine.self_evolve(&init_hist, EvolveSpan::Time(c.attractor_duration), c.step) {
        Ok(long) => {
            let mode = ProjectionMode::Delayed {
                coord: 0,
                lag: c.projection_lag,
            };
            let copy_pts = attractor_projection(&long, mode)?;
            let true_pts = attractor_projection(&full.to_trajectory(), mode)?;
            analysis::write_projection_csv(&copy_pts, &out.join("copy_delayed.csv"))?;
            analysis::write_projection_csv(&true_pts, &out.join("truth_delayed.csv"))?;
            let rect = projection_rect(&true_pts);
            summary.push("in_true_box_fraction", fmt_f(fraction_in_rect(&copy_pts, &rect)));
        }
        Err(dyncopy_core::Error::Diverged { t }) => {
            summary.push("in_true_box_fraction", "diverged");
            summary.push("attractor_diverged_at", fmt_f(t));
        }
        Err(other) => return Err(other.into()),
    }
    Ok(summary)
}

fn projection_rect(points: &[(f64, f64)]) -> [(f64, f64); 2] {
    let mut rect = [(f64::INFINITY, f64::NEG_INFINITY); 2];
    for &(u, v) in points {
        rect[0].0 = rect[0].0.min(u);
        rect[0].1 = rect[0].1.max(u);
        rect[1].0 = rect[1].0.min(v);
        rect[1].1 = rect[1].1.max(v);
    }
    rect
}

// -------------------------------------------------------------------- replay

fn history_replay(c: &ReplayConfig, out: &Path) -> CliResult<Summary> {
    let mut summary = Summary::default();
    let params = c.lorenz.params();
    let field = blackbox::lorenz_field(params);
    let settled = integrate::integrate_ode(
        &field,
        &[1.0, 1.0, 1.0],
        0.0,
        c.record.settle,
        integrate::DEFAULT_STEP,
    )?;
    let x0 = [
        settled.last_state()[0],
        settled.last_state()[1],
        settled.last_state()[2],
    ];
    let series = record_series(&params, &x0, c.record.duration, c.record.gap, c.record.component)?;
    let embedded = if c.embed_every > 1 {
        Series::new(
            series.start_time(),
            series.gap() * c.embed_every as f64,
            series.values().iter().step_by(c.embed_every).cloned().collect(),
        )?
    } else {
        series.clone()
    };
    let (set, delay) = delay_embed(&embedded, c.taps, blackbox::EmbedTarget::Derivative)?;
    summary.push("samples", set.len());

    let transfer = parse_transfer(&c.transfer)?;
    let init = Network::init_random(c.taps + 1, c.hidden, 1, transfer, c.train.init_bound, c.seed)?;
    let (model, trace) = train_stages(&init, &set, &c.train.base_config(c.seed), &c.train.stages())?;
    model.save(&out.join("model.net"))?;
    trace.write_loss_csv(&out.join("loss.csv"))?;
    summary.push("snapshots", trace.snapshots.len());
    let (mse, _) = trainer::loss(&model, &set)?;
    summary.push("train_mse", fmt_f(mse));

    let section = c.section.spec()?;
    let period = PeriodSpec {
        tol: None,
        min_cycles: c.detect.min_cycles,
        k_max: c.detect.k_max,
    };
    let plan = ReplayPlan {
        init: InitialCondition::History(series.clone()),
        span: EvolveSpan::Time(c.replay.duration),
        step: c.replay.step,
        discard: c.replay.discard,
    };
    let mspec = MachineSpec::delayed(MachineKind::Ddlm, delay);
    let rows = bifurcation_over_training(&trace, &mspec, &plan, &section, &period)?;
    analysis::write_training_rows_csv(&rows, &out.join("bifurcation.csv"))?;
    write_row_classes(&rows, &out.join("classes.csv"))?;

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for row in &rows {
        *counts.entry(row.class.as_str()).or_default() += 1;
    }
    for (class, count) in &counts {
        summary.push(&format!("rows_{class}"), count);
    }
    let first_periodic = rows
        .iter()
        .find(|r| matches!(r.class, PeriodClass::Period(k) if k <= 4));
    let later_chaotic = first_periodic.and_then(|p| {
        rows.iter()
            .find(|r| r.mc_step > p.mc_step && r.class == PeriodClass::Chaotic)
    });
    summary.push(
        "first_period_step",
        first_periodic.map_or("none".into(), |r| r.mc_step.to_string()),
    );
    summary.push(
        "later_chaotic_step",
        later_chaotic.map_or("none".into(), |r| r.mc_step.to_string()),
    );
    summary.push(
        "periodic_then_chaotic",
        first_periodic.is_some() && later_chaotic.is_some(),
    );

    if let Some(sweep) = &c.sweep {
        let values: Vec<f64> = (0..sweep.count)
            .map(|i| {
                sweep.from + (sweep.to - sweep.from) * i as f64 / (sweep.count - 1).max(1) as f64
            })
            .collect();
        let rows = bifurcation_sweep(
            &params,
            LorenzAxis::B,
            &values,
            &[1.0, 1.0, 1.0],
            sweep.settle,
            sweep.duration,
            integrate::DEFAULT_STEP,
            &section,
            &period,
        )?;
        analysis::write_sweep_rows_csv(&rows, &out.join("sweep.csv"))?;
        let mut sweep_csv = String::from("b,class,crossings\n");
        for row in &rows {
            sweep_csv.push_str(&format!(
                "{:.6},{},{}\n",
                row.param,
                row.class.as_str(),
                row.values.len()
            ));
        }
        fs::write(out.join("sweep_classes.csv"), sweep_csv)?;
        let classes: std::collections::BTreeSet<String> =
            rows.iter().map(|r| r.class.as_str()).collect();
        summary.push("sweep_classes", classes.into_iter().collect::<Vec<_>>().join(";"));
    }
    Ok(summary)
}

fn write_row_classes(rows: &[analysis::TrainingRow], path: &Path) -> CliResult<()> {
    let mut csv = String::from("mc_step,class,crossings\n");
    for row in rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.mc_step,
            row.class.as_str(),
            row.values.len()
        ));
    }
    fs::write(path, csv)?;
    Ok(())
}

// -------------------------------------------------------------------- series

fn copy_series(c: &SeriesConfig, out: &Path) -> CliResult<Summary> {
    let mut summary = Summary::default();
    let curve = read_lightcurve(&c.input)?;
    summary.push("curve_points", curve.len());
    let smoothed = smooth_bin(&curve, c.bin_days)?;
    summary.push("smoothed_points", smoothed.len());
    write_series_csv(&smoothed, &out.join("smoothed.csv"))?;

    let (mean, std) = if c.standardize {
        let n = smoothed.len() as f64;
        let mean = smoothed.values().iter().sum::<f64>() / n;
        let var = smoothed
            .values()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        (mean, var.sqrt().max(1e-12))
    } else {
        (0.0, 1.0)
    };
    let work = Series::new(
        smoothed.start_time(),
        smoothed.gap(),
        smoothed.values().iter().map(|v| (v - mean) / std).collect(),
    )?;

    let target = c.embed_target()?;
    let (set, delay) = delay_embed(&work, c.taps, target)?;
    summary.push("samples", set.len());
    let transfer = parse_transfer(&c.transfer)?;
    let init = Network::init_random(c.taps + 1, c.hidden, 1, transfer, c.train.init_bound, c.seed)?;
    let (model, trace) = train_stages(&init, &set, &c.train.base_config(c.seed), &c.train.stages())?;
    model.save(&out.join("model.net"))?;
    trace.write_loss_csv(&out.join("loss.csv"))?;
    let (mse, max_err) = trainer::loss(&model, &set)?;
    summary.push("train_mse", fmt_f(mse));
    summary.push("train_max_err", fmt_f(max_err));

    let kind = match target {
        blackbox::EmbedTarget::NextValue => MachineKind::Dilm,
        blackbox::EmbedTarget::Derivative => MachineKind::Ddlm,
    };
    let machine = Machine::new(kind, model, Some(delay))?;
    let init_hist = InitialCondition::History(work.clone());
    match machine.self_evolve(&init_hist, EvolveSpan::Steps(c.predict_records), work.gap()) {
        Ok(predicted) => {
            let unscaled = rescale_trajectory(&predicted, mean, std);
            unscaled.write_csv(&out.join("predicted.csv"))?;
            summary.push("predicted_records", predicted.len());
        }
        Err(dyncopy_core::Error::Diverged { t }) => {
            summary.push("predicted_records", 0);
            summary.push("prediction_diverged_at", fmt_f(t));
        }
        Err(other) => return Err(other.into()),
    }

    let section = SectionSpec {
        coord: 0,
        level: c.section_level,
        lag: c.section_lag_records as f64 * work.gap(),
        direction: analysis::Direction::Up,
    };
    let period = PeriodSpec {
        tol: None,
        min_cycles: c.detect.min_cycles,
        k_max: c.detect.k_max,
    };
    let plan = ReplayPlan {
        init: InitialCondition::History(work.clone()),
        span: EvolveSpan::Steps(c.replay_records),
        step: work.gap(),
        discard: c.replay_discard as f64 * work.gap(),
    };
    let rows = bifurcation_over_training(&trace, &machine.spec(), &plan, &section, &period)?;
    analysis::write_training_rows_csv(&rows, &out.join("bifurcation.csv"))?;
    write_row_classes(&rows, &out.join("classes.csv"))?;
    let classes: std::collections::BTreeSet<String> =
        rows.iter().map(|r| r.class.as_str()).collect();
    summary.push("classes_seen", classes.into_iter().collect::<Vec<_>>().join(";"));
    Ok(summary)
}

fn rescale_trajectory(traj: &Trajectory, mean: f64, std: f64) -> Trajectory {
    let mut out = Trajectory::with_capacity(1, traj.len());
    for (t, s) in traj.iter() {
        out.push(t, &[s[0] * std + mean]);
    }
    out
}

fn write_series_csv(series: &Series, path: &Path) -> CliResult<()> {
    let mut csv = String::from("t,value\n");
    for (i, v) in series.values().iter().enumerate() {
        csv.push_str(&format!("{:.16e},{v:.16e}\n", series.time(i)));
    }
    fs::write(path, csv)?;
    Ok(())
}
