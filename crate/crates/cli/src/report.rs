//! JSON documents and CSV files written by the CLI.
//!
//! Nothing time- or host-dependent goes into an output file, so a rerun with
//! the same arguments reproduces every file byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use qlsim_core::experiment::{ScalingFit, ScalingPoint};
use qlsim_core::{
    CandidatePair, DEConfig, FitnessReport, GaussianFit, LearningRun, TrainingPolicy, TrainingSet,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingEcho {
    pub n: usize,
    pub policy: TrainingPolicy,
    pub seed: u64,
    pub balanced_count: usize,
}

impl TrainingEcho {
    pub fn of(t: &TrainingSet) -> Self {
        Self {
            n: t.arity(),
            policy: t.policy(),
            seed: t.seed(),
            balanced_count: t.balanced().len(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LearnDoc {
    pub spec_version: String,
    pub training: TrainingEcho,
    pub run: LearningRun,
}

impl LearnDoc {
    pub fn new(training: TrainingEcho, run: LearningRun) -> Self {
        Self {
            spec_version: qlsim_core::FORMAT_VERSION.into(),
            training,
            run,
        }
    }
}

/// A learning run without its per-iteration trace, which the CSV files cover.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub completed: bool,
    pub completion_iteration: Option<usize>,
    pub iterations: usize,
    pub stages_used: usize,
    pub stage_escalations: Vec<usize>,
    pub final_fitness: f64,
    pub final_pair: CandidatePair,
}

impl RunSummary {
    pub fn of(run: &LearningRun) -> Self {
        Self {
            seed: run.seed,
            completed: run.completed,
            completion_iteration: run.completion_iteration,
            iterations: run.trace.len().saturating_sub(1),
            stages_used: run.stages_used,
            stage_escalations: run.stage_escalations.clone(),
            final_fitness: run.final_fitness,
            final_pair: run.final_pair.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EnsembleDoc {
    pub spec_version: String,
    pub n: usize,
    /// Shared settings; trial `t` runs with seed `base_seed + t`.
    pub config: DEConfig,
    pub training: TrainingEcho,
    pub base_seed: u64,
    pub trial_count: usize,
    pub completion_fraction: f64,
    /// Absent when fewer than two trials completed.
    pub gaussian_fit: Option<GaussianFit>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitDoc {
    pub spec_version: String,
    pub inputs: Vec<String>,
    pub fit: ScalingFit,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HoldoutEcho {
    pub policy: String,
    pub seed: Option<u64>,
    pub count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyDoc {
    pub spec_version: String,
    pub n: usize,
    pub params: String,
    pub stages: usize,
    pub holdout: HoldoutEcho,
    pub report: FitnessReport,
}

/// Accepted inputs of `verify`.
#[derive(Debug)]
pub enum ParamsFile {
    Learn(Box<LearnDoc>),
    Run(Box<LearningRun>),
    Pair(CandidatePair),
}

impl ParamsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let value: serde_json::Value = read_json(path)?;
        let parsed = if value.get("run").is_some() {
            serde_json::from_value(value).map(|d| ParamsFile::Learn(Box::new(d)))
        } else if value.get("final_pair").is_some() {
            serde_json::from_value(value).map(|r| ParamsFile::Run(Box::new(r)))
        } else if value.get("p1").is_some() {
            serde_json::from_value(value).map(ParamsFile::Pair)
        } else {
            bail!(
                "{} holds neither a learning run nor a candidate pair",
                path.display()
            );
        };
        parsed.with_context(|| format!("parsing {}", path.display()))
    }

    pub fn pair(&self) -> &CandidatePair {
        match self {
            ParamsFile::Learn(d) => &d.run.final_pair,
            ParamsFile::Run(r) => &r.final_pair,
            ParamsFile::Pair(p) => p,
        }
    }

    pub fn stages_used(&self) -> usize {
        match self {
            ParamsFile::Learn(d) => d.run.stages_used,
            ParamsFile::Run(r) => r.stages_used,
            ParamsFile::Pair(_) => 1,
        }
    }

    pub fn training_seed(&self) -> Option<u64> {
        match self {
            ParamsFile::Learn(d) => Some(d.training.seed),
            _ => None,
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Two-column CSV of `(index, value)` rows.
pub fn write_series(path: &Path, header: [&str; 2], values: &[f64]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scaling_csv(path: &Path, points: &[ScalingPoint]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["n", "D", "sqrtD", "r_c", "delta_r"])?;
    for p in points {
        w.write_record([
            p.n.to_string(),
            p.d.to_string(),
            p.sqrt_d.to_string(),
            p.r_c.to_string(),
            p.delta_r.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
