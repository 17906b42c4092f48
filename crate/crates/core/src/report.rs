//! CSV outputs consumed by plotting and downstream scripts.
//!
//! Numbers are written with Rust's shortest round-trip formatting, which is
//! locale-independent and deterministic. Every writer checks all values
//! before creating the file, so a non-finite number never produces a
//! partial output.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sweep::{SweepPoint, SweepResult};
use crate::training::PilotSet;

pub const SWEEP_HEADER: [&str; 11] = [
    "axis_name",
    "axis_value",
    "estimator",
    "beam",
    "d_total",
    "mse_analytic",
    "mse_analytic_db",
    "mse_mc",
    "mc_std",
    "mi_nats",
    "nmse_trace",
];

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn check(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    for (i, v) in values.into_iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numerical(format!("{what}: value #{i} is {v}, refusing to write")));
        }
    }
    Ok(())
}

fn point_values(p: &SweepPoint) -> Vec<f64> {
    let mut v = vec![p.axis_value, p.mse_analytic, p.mi_nats, p.nmse_trace];
    v.extend(p.mse_mc);
    v.extend(p.mc_std);
    v
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes sweep rows in their stored order.
pub fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<()> {
    for (i, p) in result.points.iter().enumerate() {
        check(point_values(p), &format!("sweep row {i}"))?;
        if p.mse_analytic < 0.0 {
            return Err(Error::Numerical(format!("sweep row {i}: negative MSE")));
        }
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(SWEEP_HEADER)?;
    for p in &result.points {
        w.write_record([
            result.axis.name().to_string(),
            num(p.axis_value),
            p.estimator.clone(),
            p.beam.clone(),
            p.d_total.to_string(),
            num(p.mse_analytic),
            num(10.0 * p.mse_analytic.log10()),
            opt(p.mse_mc),
            opt(p.mc_std),
            num(p.mi_nats),
            num(p.nmse_trace),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Beam-pattern table: theta_deg, one gain column per beam column
/// (`col_0`, `col_1`, …) and `aggregate`.
pub fn write_pattern_csv(thetas: &[f64], rows: &[Vec<f64>], path: &Path) -> Result<()> {
    if thetas.len() != rows.len() {
        return Err(Error::shape("one pattern row per angle is required"));
    }
    // Gains are clamped at the floor used by the pattern computation, so
    // only genuinely non-finite values are rejected.
    check(thetas.iter().copied().chain(rows.iter().flatten().copied()), "beam pattern")?;
    let ncol = rows.first().map(|r| r.len().saturating_sub(1)).unwrap_or(0);
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["theta_deg".to_string()];
    header.extend((0..ncol).map(|j| format!("col_{j}")));
    header.push("aggregate".into());
    w.write_record(&header)?;
    for (th, r) in thetas.iter().zip(rows) {
        let mut rec = vec![num(*th)];
        rec.extend(r.iter().map(|&g| num(g)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Pilot table with columns user, n, re, im for n = −(L−1), …, T−1.
pub fn write_pilot_csv(pilots: &PilotSet, path: &Path) -> Result<()> {
    let pre = pilots.max_mpcs() as isize - 1;
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["user", "n", "re", "im"])?;
    for k in 0..pilots.num_users() {
        for n in -pre..pilots.len() as isize {
            w.write_record([k.to_string(), n.to_string(), num(pilots.symbol(k, n)), num(0.0)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a plain text file, mapping failures to I/O errors with the path.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Angles from −90° to 90° in steps of 0.1°.
pub fn pattern_grid() -> Vec<f64> {
    (0..=1800).map(|i| -90.0 + i as f64 * 0.1).map(|t| (t * 10.0).round() / 10.0).collect()
}
