//! Light-curve ingestion and smoothing.
//!
//! A light curve is a `time_days,magnitude` CSV (comment lines start with
//! `#`). Smoothing bins the curve into consecutive fixed-width windows and
//! averages each one, which both regularizes the sampling and suppresses
//! observational noise.

use std::fs;
use std::path::Path;

use dyncopy_core::blackbox::{self, LorenzParams, Series};
use dyncopy_core::Error;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct LightCurve {
    pub times_days: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl LightCurve {
    pub fn new(times_days: Vec<f64>, magnitudes: Vec<f64>) -> CliResult<Self> {
        if times_days.is_empty() || times_days.len() != magnitudes.len() {
            return Err(CliError::Core(Error::Shape(format!(
                "light curve with {} times and {} magnitudes",
                times_days.len(),
                magnitudes.len()
            ))));
        }
        if times_days.windows(2).any(|w| w[1] < w[0]) {
            return Err(CliError::Core(Error::Format(
                "light-curve times must be non-decreasing".into(),
            )));
        }
        if times_days
            .iter()
            .chain(magnitudes.iter())
            .any(|v| !v.is_finite())
        {
            return Err(CliError::Core(Error::Domain(
                "light-curve entries must be finite".into(),
            )));
        }
        Ok(LightCurve {
            times_days,
            magnitudes,
        })
    }

    pub fn len(&self) -> usize {
        self.times_days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_days.is_empty()
    }
}

/// Parse a `time_days,magnitude` CSV. Unsorted rows are rejected, not
/// silently sorted.
pub fn read_lightcurve(path: &Path) -> CliResult<LightCurve> {
    let text = fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut mags = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',');
        let (t, m) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(m), None) => (t, m),
            _ => {
                return Err(CliError::Core(Error::Format(format!(
                    "line {}: expected `time_days,magnitude`",
                    lineno + 1
                ))))
            }
        };
        let parse = |s: &str, what: &str| -> CliResult<f64> {
            s.trim().parse().map_err(|_| {
                CliError::Core(Error::Format(format!(
                    "line {}: unparseable {what} '{s}'",
                    lineno + 1
                )))
            })
        };
        times.push(parse(t, "time")?);
        mags.push(parse(m, "magnitude")?);
    }
    LightCurve::new(times, mags)
}

pub fn write_lightcurve(curve: &LightCurve, path: &Path, comment: &str) -> CliResult<()> {
    let mut out = String::new();
    if !comment.is_empty() {
        out.push_str(&format!("# {comment}\n"));
    }
    out.push_str("# time_days,magnitude\n");
    for (t, m) in curve.times_days.iter().zip(&curve.magnitudes) {
        out.push_str(&format!("{t:.16e},{m:.16e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Mean magnitude per consecutive `bin_days` window anchored at the first
/// time; empty interior bins are filled by linear interpolation between
/// their nonempty neighbours. The result is a uniform series with spacing
/// `bin_days`, stamped at bin starts.
pub fn smooth_bin(curve: &LightCurve, bin_days: f64) -> CliResult<Series> {
    if !(bin_days > 0.0) {
        return Err(CliError::Core(Error::Domain(format!(
            "bin width must be > 0, got {bin_days}"
        ))));
    }
    let t0 = curve.times_days[0];
    let span = curve.times_days[curve.len() - 1] - t0;
    let bins = (span / bin_days).floor() as usize + 1;
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (t, m) in curve.times_days.iter().zip(&curve.magnitudes) {
        let k = (((t - t0) / bin_days).floor() as usize).min(bins - 1);
        sums[k] += m;
        counts[k] += 1;
    }
    let mut values: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    // Interior gaps: linear fill between the flanking nonempty bins. The
    // first and last bins are nonempty by construction.
    let mut k = 0;
    while k < values.len() {
        if values[k].is_some() {
            k += 1;
            continue;
        }
        let left = k - 1;
        let mut right = k;
        while values[right].is_none() {
            right += 1;
        }
        let (a, b) = (values[left].unwrap(), values[right].unwrap());
        for (step, slot) in (left + 1..right).enumerate() {
            let frac = (step + 1) as f64 / (right - left) as f64;
            values[slot] = Some(a + frac * (b - a));
        }
        k = right;
    }
    let filled: Vec<f64> = values.into_iter().map(Option::unwrap).collect();
    Series::new(t0, bin_days, filled).map_err(CliError::Core)
}

/// The shipped stand-in light curve: the x-record of the Lorenz flow at
/// the standard chaotic parameters, mapped onto a day axis and a
/// magnitude-like scale.
pub fn synthetic_lightcurve() -> LightCurve {
    let p = LorenzParams::default();
    let field = blackbox::lorenz_field(p);
    let settled =
        dyncopy_core::integrate::integrate_ode(&field, &[1.0, 1.0, 1.0], 0.0, 30.0, 1e-3).unwrap();
    let x0 = [
        settled.last_state()[0],
        settled.last_state()[1],
        settled.last_state()[2],
    ];
    // 120 time units sampled every 0.02 -> 6001 records; one record per
    // 2.5 days, so ten-day smoothing averages four records per bin.
    let series = blackbox::record_series(&p, &x0, 120.0, 0.02, 0).unwrap();
    let times = (0..series.len()).map(|i| i as f64 * 2.5).collect();
    let mags = series.values().iter().map(|x| 5.0 - x / 10.0).collect();
    LightCurve::new(times, mags).unwrap()
}
