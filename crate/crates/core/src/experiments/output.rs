//! File layout of experiment runs. CSV tables carry a header row; each run
//! also leaves `meta.json` with the config, crate version and timing.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::SweepConfig;
use super::distributions::DistOutput;
use super::ensemble::{ConfirmOutput, EnsembleRecord, SweepOutput};
use crate::error::Result;

#[derive(Debug, Serialize)]
struct Meta<'a> {
    experiment: &'a str,
    version: &'a str,
    elapsed_seconds: f64,
    config: &'a SweepConfig,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn prepare(dir: &Path, experiment: &str, cfg: &SweepConfig, elapsed: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(
        &dir.join("meta.json"),
        &Meta {
            experiment,
            version: env!("CARGO_PKG_VERSION"),
            elapsed_seconds: elapsed,
            config: cfg,
        },
    )
}

/// `sweep.csv` plus one `fit_<name>.json` per window that could be fitted.
pub fn write_sweep(dir: &Path, cfg: &SweepConfig, out: &SweepOutput, elapsed: f64) -> Result<Vec<PathBuf>> {
    prepare(dir, "sweep", cfg, elapsed)?;
    let mut files = vec![dir.join("sweep.csv")];
    write_csv(&files[0], &out.records)?;
    for f in &out.fits {
        let p = dir.join(format!("fit_{}.json", f.name));
        write_json(&p, f)?;
        files.push(p);
    }
    Ok(files)
}

pub fn write_compare(dir: &Path, cfg: &SweepConfig, out: &[EnsembleRecord], elapsed: f64) -> Result<Vec<PathBuf>> {
    prepare(dir, "compare", cfg, elapsed)?;
    let p = dir.join("compare.csv");
    write_csv(&p, out)?;
    Ok(vec![p])
}

/// `confirm.csv` (one row per state) and `confirm_summary.csv` (per λ).
pub fn write_confirm(dir: &Path, cfg: &SweepConfig, out: &ConfirmOutput, elapsed: f64) -> Result<Vec<PathBuf>> {
    prepare(dir, "confirm", cfg, elapsed)?;
    let rows = dir.join("confirm.csv");
    let summary = dir.join("confirm_summary.csv");
    write_csv(&rows, &out.rows)?;
    write_csv(&summary, &out.summary)?;
    Ok(vec![rows, summary])
}

#[derive(Serialize)]
struct HTailRow {
    b: usize,
    m: usize,
    slope: f64,
    intercept: f64,
    r2: f64,
}

pub fn write_distributions(dir: &Path, cfg: &SweepConfig, out: &DistOutput, elapsed: f64) -> Result<Vec<PathBuf>> {
    prepare(dir, "dist", cfg, elapsed)?;
    let mut files = Vec::new();
    let mut put = |name: String, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let p = dir.join(name);
        f(&p)?;
        files.push(p);
        Ok(())
    };
    put("x_distribution.csv".into(), &|p| out.x.write_csv(File::create(p)?))?;
    put("x_fit.json".into(), &|p| write_json(p, &out.x.fit))?;
    for s in &out.h {
        put(format!("h_b{}.csv", s.b), &|p| s.estimate.write_csv(File::create(p)?))?;
    }
    let tails: Vec<HTailRow> = out
        .h
        .iter()
        .map(|s| HTailRow {
            b: s.b,
            m: s.m,
            slope: s.tail_fit.slope,
            intercept: s.tail_fit.intercept,
            r2: s.tail_fit.r2,
        })
        .collect();
    put("h_tail_fits.csv".into(), &|p| write_csv(p, &tails))?;
    let points: Vec<_> = out.ladders.iter().flat_map(|l| l.points.iter().cloned()).collect();
    put("p_n.csv".into(), &|p| write_csv(p, &points))?;
    let estimates: Vec<_> = out.ladders.iter().map(|l| &l.estimate).collect();
    put("ladder.json".into(), &|p| write_json(p, &estimates))?;
    put("block_estimates.csv".into(), &|p| write_csv(p, &out.blocks))?;
    if let Some(e) = &out.block_errors {
        put("block_errors.csv".into(), &|p| e.write_csv(File::create(p)?))?;
    }
    Ok(files)
}
