//! Power simulations over the generator settings.
//!
//! Replicate `r` of setting `s` draws its data with seed
//! `derive_seed(seed, [s, r])`, so any subset of replicates can be rerun or
//! resumed on its own and the report does not depend on scheduling.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{generate, Family, GeneratorConfig};
use crate::detect::{detect, DetectConfig};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub family: Family,
    pub settings: Vec<u8>,
    pub replicates: usize,
    pub n: usize,
    pub ell: usize,
    pub d: usize,
    pub tau: usize,
    /// Half-width of the localization band around `tau`.
    pub radius: usize,
    pub detect: DetectConfig,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.detect.validate()?;
        if self.settings.is_empty() {
            return Err(Error::Config("no settings to simulate".into()));
        }
        for &s in &self.settings {
            GeneratorConfig::setting(self.family, s, self.tau, 0)?;
        }
        if self.tau < 1 || self.tau >= self.n {
            return Err(Error::Config(format!("tau = {} must satisfy 1 <= tau < n = {}", self.tau, self.n)));
        }
        Ok(())
    }
}

/// Outcome of one simulated sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub setting: u8,
    pub replicate: usize,
    pub data_seed: u64,
    pub tau_hat: usize,
    pub m_star: f64,
    pub p_value: f64,
    pub reject: bool,
    pub localized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting: u8,
    pub replicates: usize,
    pub rejections: usize,
    /// Rejections whose estimate falls within `tau +- radius`.
    pub localized: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub version: String,
    pub seed: u64,
    pub config: SimulationConfig,
    pub summary: Vec<SettingSummary>,
    pub replicates: Vec<ReplicateRecord>,
}

impl SimulationReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(format!("JSON encoding failed: {e}")))
    }

    /// Summary table as CSV, with the seed and version on every row.
    pub fn summary_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["version", "seed", "family", "setting", "replicates", "rejections", "localized"])?;
        for s in &self.summary {
            wtr.write_record([
                self.version.clone(),
                self.seed.to_string(),
                self.config.family.to_string(),
                s.setting.to_string(),
                s.replicates.to_string(),
                s.rejections.to_string(),
                s.localized.to_string(),
            ])?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Internal(format!("CSV buffer: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Runs one replicate of one setting.
pub fn run_replicate(cfg: &SimulationConfig, setting: u8, replicate: usize) -> Result<ReplicateRecord> {
    let data_seed = derive_seed(cfg.seed, &[u64::from(setting), replicate as u64]);
    let gen = GeneratorConfig::setting(cfg.family, setting, cfg.tau, data_seed)?;
    let ds = generate(&gen, cfg.n, cfg.ell, cfg.d)?;
    let detect_cfg = DetectConfig {
        seed: derive_seed(data_seed, &[1]),
        ..cfg.detect
    };
    let report = detect(&ds, &detect_cfg)?;
    let localized = report.reject && report.tau_hat.abs_diff(cfg.tau) <= cfg.radius;
    Ok(ReplicateRecord {
        setting,
        replicate,
        data_seed,
        tau_hat: report.tau_hat,
        m_star: report.m_star,
        p_value: report.p_value,
        reject: report.reject,
        localized,
    })
}

fn read_checkpoint(path: &Path) -> Result<Vec<ReplicateRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

fn summarize(cfg: &SimulationConfig, records: &[ReplicateRecord]) -> Vec<SettingSummary> {
    let mut by_setting: BTreeMap<u8, SettingSummary> = cfg
        .settings
        .iter()
        .map(|&s| {
            (
                s,
                SettingSummary {
                    setting: s,
                    replicates: 0,
                    rejections: 0,
                    localized: 0,
                },
            )
        })
        .collect();
    for r in records {
        if let Some(s) = by_setting.get_mut(&r.setting) {
            s.replicates += 1;
            s.rejections += usize::from(r.reject);
            s.localized += usize::from(r.localized);
        }
    }
    cfg.settings.iter().map(|s| by_setting[s].clone()).collect()
}

/// Runs every (setting, replicate) pair. With a checkpoint path, finished
/// replicates are appended there as they complete and skipped on rerun.
pub fn simulate(cfg: &SimulationConfig, checkpoint: Option<&Path>) -> Result<SimulationReport> {
    cfg.validate()?;
    let mut done: BTreeMap<(u8, usize), ReplicateRecord> = BTreeMap::new();
    if let Some(path) = checkpoint {
        for rec in read_checkpoint(path)? {
            done.insert((rec.setting, rec.replicate), rec);
        }
    }
    let todo: Vec<(u8, usize)> = cfg
        .settings
        .iter()
        .flat_map(|&s| (0..cfg.replicates).map(move |r| (s, r)))
        .filter(|key| !done.contains_key(key))
        .collect();

    let sink = match checkpoint {
        Some(path) => {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            Some(Mutex::new(csv::WriterBuilder::new().has_headers(false).from_writer(file)))
        }
        None => None,
    };
    let append = |rec: &ReplicateRecord| -> Result<()> {
        if let Some(sink) = &sink {
            let mut w = sink.lock().map_err(|_| Error::Internal("checkpoint lock poisoned".into()))?;
            w.serialize(rec)?;
            w.flush().map_err(|e| Error::io("<checkpoint>", e))?;
        }
        Ok(())
    };
    let fresh: Vec<ReplicateRecord> = todo
        .par_iter()
        .map(|&(s, r)| {
            let rec = run_replicate(cfg, s, r)?;
            append(&rec)?;
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    for rec in fresh {
        done.insert((rec.setting, rec.replicate), rec);
    }

    let wanted = |s: &u8, r: &usize| cfg.settings.contains(s) && *r < cfg.replicates;
    let replicates: Vec<ReplicateRecord> = done
        .into_iter()
        .filter(|((s, r), _)| wanted(s, r))
        .map(|(_, rec)| rec)
        .collect();
    Ok(SimulationReport {
        version: VERSION.to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        summary: summarize(cfg, &replicates),
        replicates,
    })
}

/// Writes a report to `path` as JSON, or as the CSV summary when the
/// extension is `.csv`.
pub fn write_report(report: &SimulationReport, path: &Path) -> Result<()> {
    let text = if path.extension().is_some_and(|e| e == "csv") {
        report.summary_csv()?
    } else {
        report.to_json()?
    };
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
