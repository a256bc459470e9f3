//! File artifacts: plot-ready CSV trajectories and JSON reports, every one
//! stamped with the effective-config hash.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::reparam::ParamTrajectory;
use crate::viscous::ViscousTrajectory;

/// Writes a JSON artifact as `{"config_hash": ..., ...payload}`.
pub fn write_json<T: Serialize>(path: &Path, hash: &str, payload: &T) -> Result<()> {
    let mut value = serde_json::to_value(payload)?;
    match value.as_object_mut() {
        Some(map) => {
            map.insert("config_hash".into(), serde_json::Value::String(hash.into()));
        }
        None => {
            value = serde_json::json!({ "config_hash": hash, "value": value });
        }
    }
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, &value)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Columns: `t, z_1..z_n, rate_1..rate_n, energy, diss_R, diss_visc`; the
/// per-step columns of the final node row are zero.
pub fn write_viscous_csv(path: &Path, hash: &str, traj: &ViscousTrajectory) -> Result<()> {
    let n = traj.n();
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# config_hash={hash}")?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("z_{i}")));
    header.extend((1..=n).map(|i| format!("rate_{i}")));
    header.extend(["energy".into(), "diss_R".into(), "diss_visc".into()]);
    writeln!(file, "{}", header.join(","))?;
    for k in 0..traj.times.len() {
        let mut row = vec![format!("{:.17e}", traj.times[k])];
        row.extend(traj.states[k].iter().map(|x| format!("{x:.17e}")));
        if k < traj.steps() {
            row.extend(traj.rates[k].iter().map(|x| format!("{x:.17e}")));
            row.push(format!("{:.17e}", traj.energies[k]));
            row.push(format!("{:.17e}", traj.diss_r[k]));
            row.push(format!("{:.17e}", traj.diss_visc[k]));
        } else {
            row.extend(std::iter::repeat_n("0e0".to_string(), n));
            row.push(format!("{:.17e}", traj.energies[k]));
            row.push("0e0".into());
            row.push("0e0".into());
        }
        writeln!(file, "{}", row.join(","))?;
    }
    Ok(())
}

/// Columns: `s, t_hat, z_1..z_n, gap, lambda, in_G`.
pub fn write_param_csv(path: &Path, hash: &str, ptraj: &ParamTrajectory) -> Result<()> {
    let n = ptraj.n();
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# config_hash={hash}")?;
    let mut header = vec!["s".to_string(), "t_hat".to_string()];
    header.extend((1..=n).map(|i| format!("z_{i}")));
    header.extend(["gap".into(), "lambda".into(), "in_G".into()]);
    writeln!(file, "{}", header.join(","))?;
    for j in 0..ptraj.len() {
        let mut row = vec![
            format!("{:.17e}", ptraj.s_grid[j]),
            format!("{:.17e}", ptraj.t_hat[j]),
        ];
        row.extend(ptraj.z_hat[j].iter().map(|x| format!("{x:.17e}")));
        row.push(format!("{:.17e}", ptraj.gap[j]));
        row.push(format!("{:.17e}", ptraj.lambda[j]));
        row.push(if ptraj.g_mask[j] { "1".into() } else { "0".into() });
        writeln!(file, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a parametrized trajectory back from its CSV form.
pub fn read_param_csv(path: &Path) -> Result<ParamTrajectory> {
    let file = BufReader::new(File::open(path)?);
    let mut lines = file.lines();
    let mut header: Option<Vec<String>> = None;
    let mut s_grid = Vec::new();
    let mut t_hat = Vec::new();
    let mut z_hat = Vec::new();
    let mut gap = Vec::new();
    let mut lambda = Vec::new();
    let mut g_mask = Vec::new();
    let mut n = 0usize;
    while let Some(line) = lines.next() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let cols: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            n = cols.iter().filter(|c| c.starts_with("z_")).count();
            if n == 0 || cols.len() != n + 5 {
                return Err(Error::Argument(format!(
                    "unexpected parametrized-trajectory header: {line}"
                )));
            }
            header = Some(cols);
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 5 {
            return Err(Error::Argument(format!(
                "row has {} fields, expected {}",
                fields.len(),
                n + 5
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Argument(format!("bad number {s:?}: {e}")))
        };
        s_grid.push(parse(fields[0])?);
        t_hat.push(parse(fields[1])?);
        z_hat.push(DVector::from_iterator(
            n,
            fields[2..2 + n]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<Vec<_>>>()?,
        ));
        gap.push(parse(fields[2 + n])?);
        lambda.push(parse(fields[3 + n])?);
        g_mask.push(parse(fields[4 + n])? != 0.0);
    }
    if s_grid.len() < 2 {
        return Err(Error::Argument("trajectory file has fewer than 2 rows".into()));
    }
    Ok(ParamTrajectory {
        s_grid,
        t_hat,
        z_hat,
        gap,
        lambda,
        g_mask,
        provenance: Vec::new(),
    })
}
