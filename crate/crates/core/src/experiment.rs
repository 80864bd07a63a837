//! Monte-Carlo ensembles of learning runs and the statistics drawn from them:
//! mean best-fitness curves, the learning probability `P(r)`, its
//! integrated-Gaussian parameters, and the `r_c = A sqrt(D) + B` scaling fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::basis::{parameter_count, GeneratorBasis};
use crate::circuit::{fitness, CandidatePair, FitnessReport};
use crate::error::{Error, Result};
use crate::learn::{learn_with, DEConfig, LearningRun, OracleFitness};
use crate::oracle::{BooleanFunction, TrainingSet};

/// Runs of one configuration over consecutive seeds `base_seed + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEnsemble {
    pub n: usize,
    pub config: DEConfig,
    pub base_seed: u64,
    pub trial_count: usize,
    pub runs: Vec<LearningRun>,
}

impl TrialEnsemble {
    pub fn completion_iterations(&self) -> Vec<usize> {
        self.runs
            .iter()
            .filter_map(|r| r.completion_iteration)
            .collect()
    }

    pub fn completion_fraction(&self) -> f64 {
        if self.runs.is_empty() {
            return 0.0;
        }
        self.completion_iterations().len() as f64 / self.runs.len() as f64
    }
}

/// Learns `trials` times on `training`, trial `t` seeded with `base_seed + t`.
///
/// `jobs` bounds the worker pool; the result does not depend on it.
pub fn run_ensemble(
    cfg: &DEConfig,
    training: &TrainingSet,
    trials: usize,
    base_seed: u64,
    jobs: usize,
) -> Result<TrialEnsemble> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    cfg.validate()?;
    let n = training.arity();
    let evaluator = OracleFitness::new(training.clone(), cfg.shots)?;
    let run_one = |t: usize| {
        let trial_cfg = cfg.clone().with_seed(base_seed.wrapping_add(t as u64));
        learn_with(&trial_cfg, n, &evaluator)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let runs = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(run_one)
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(TrialEnsemble {
        n,
        config: cfg.clone(),
        base_seed,
        trial_count: trials,
        runs,
    })
}

/// Per-iteration mean of the best-fitness traces. Shorter traces are extended
/// with their last value.
pub fn mean_best_fitness_curve(e: &TrialEnsemble) -> Result<Vec<f64>> {
    if e.runs.is_empty() {
        return Err(Error::InsufficientData("empty ensemble".into()));
    }
    let len = e.runs.iter().map(|r| r.trace.len()).max().unwrap_or(0);
    let mut curve = vec![0.0; len];
    for run in &e.runs {
        let last = run.trace.last().copied().unwrap_or(0.0);
        for (r, slot) in curve.iter_mut().enumerate() {
            *slot += run.trace.get(r).copied().unwrap_or(last);
        }
    }
    let count = e.runs.len() as f64;
    curve.iter_mut().for_each(|v| *v /= count);
    Ok(curve)
}

/// Empirical `P(r)`: fraction of runs completed at or before iteration `r`,
/// for `r` in `0..len` where `len` is the longest trace.
pub fn learning_probability(e: &TrialEnsemble) -> Vec<f64> {
    let len = e.runs.iter().map(|r| r.trace.len()).max().unwrap_or(0);
    let mut counts = vec![0usize; len];
    for r in e.completion_iterations() {
        if r < len {
            counts[r] += 1;
        }
    }
    let total = e.runs.len().max(1) as f64;
    let mut acc = 0;
    counts
        .into_iter()
        .map(|c| {
            acc += c;
            acc as f64 / total
        })
        .collect()
}

/// Parameters of the integrated Gaussian describing `P(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    /// Mean completion iteration.
    pub r_c: f64,
    /// Sample standard deviation of the completion iteration.
    pub delta_r: f64,
    pub completed: usize,
    /// Least-squares fit of the normal CDF to the empirical `P(r)`, if it converged.
    pub cdf_fit: Option<CdfFit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfFit {
    pub r_c: f64,
    pub delta_r: f64,
    pub rss: f64,
}

/// Moment estimates `(mean, sample std)` of completion iterations.
pub fn gaussian_moments(iterations: &[usize]) -> Result<(f64, f64)> {
    if iterations.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} completed runs; at least 2 are needed",
            iterations.len()
        )));
    }
    let k = iterations.len() as f64;
    let mean = iterations.iter().map(|&r| r as f64).sum::<f64>() / k;
    let var = iterations
        .iter()
        .map(|&r| (r as f64 - mean).powi(2))
        .sum::<f64>()
        / (k - 1.0);
    Ok((mean, var.sqrt()))
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn cdf_rss(probs: &[f64], mu: f64, sigma: f64) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(r, &p)| (p - normal_cdf((r as f64 - mu) / sigma)).powi(2))
        .sum()
}

/// Levenberg-Marquardt fit of `Phi((r - mu) / sigma)` to `probs[r]`, started
/// from the moment estimates.
pub fn fit_normal_cdf(probs: &[f64], mu0: f64, sigma0: f64) -> Option<CdfFit> {
    if probs.len() < 2 || sigma0.is_nan() || sigma0 <= 0.0 {
        return None;
    }
    let (mut mu, mut sigma) = (mu0, sigma0);
    let mut rss = cdf_rss(probs, mu, sigma);
    let mut lambda = 1e-3;
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    for _ in 0..200 {
        // Normal equations J^T J delta = J^T residual.
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (r, &p) in probs.iter().enumerate() {
            let z = (r as f64 - mu) / sigma;
            let pdf = inv_sqrt_2pi * (-0.5 * z * z).exp();
            let res = p - normal_cdf(z);
            let j_mu = -pdf / sigma;
            let j_sigma = -pdf * z / sigma;
            a11 += j_mu * j_mu;
            a12 += j_mu * j_sigma;
            a22 += j_sigma * j_sigma;
            g1 += j_mu * res;
            g2 += j_sigma * res;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let (b11, b22) = (a11 * (1.0 + lambda), a22 * (1.0 + lambda));
            let det = b11 * b22 - a12 * a12;
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let d_mu = (g1 * b22 - g2 * a12) / det;
            let d_sigma = (b11 * g2 - a12 * g1) / det;
            let (mu_new, sigma_new) = (mu + d_mu, sigma + d_sigma);
            if sigma_new > 0.0 {
                let rss_new = cdf_rss(probs, mu_new, sigma_new);
                if rss_new < rss {
                    let done = (rss - rss_new) <= 1e-14 * rss.max(1e-300);
                    mu = mu_new;
                    sigma = sigma_new;
                    rss = rss_new;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = !done;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (mu.is_finite() && sigma.is_finite()).then_some(CdfFit {
        r_c: mu,
        delta_r: sigma,
        rss,
    })
}

/// `r_c` and `Delta r` of the ensemble's completion iterations, with the CDF
/// least-squares fit as a cross-check.
pub fn gaussian_fit(e: &TrialEnsemble) -> Result<GaussianFit> {
    let iterations = e.completion_iterations();
    let (r_c, delta_r) = gaussian_moments(&iterations)?;
    let cdf_fit = fit_normal_cdf(&learning_probability(e), r_c, delta_r);
    Ok(GaussianFit {
        r_c,
        delta_r,
        completed: iterations.len(),
        cdf_fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub d: usize,
    pub sqrt_d: f64,
    pub r_c: f64,
    pub delta_r: f64,
}

impl ScalingPoint {
    pub fn new(n: usize, r_c: f64, delta_r: f64) -> Self {
        let d = parameter_count(n);
        Self {
            n,
            d,
            sqrt_d: (d as f64).sqrt(),
            r_c,
            delta_r,
        }
    }
}

/// Published comparison values for `r_c = A sqrt(D) + B` at population 10.
/// The `W` and `C_r` behind them are unknown, so they are reported, not tested.
pub const REFERENCE_SLOPE: f64 = 43.0;
pub const REFERENCE_INTERCEPT: f64 = -57.0;

/// Ordinary least-squares fit of `r_c` against `sqrt(D)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<ScalingPoint>,
    /// `A`.
    pub slope: f64,
    /// `B`.
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    pub reference_slope: f64,
    pub reference_intercept: f64,
}

pub fn fit_scaling_points(mut points: Vec<ScalingPoint>) -> Result<ScalingFit> {
    points.sort_by_key(|p| p.n);
    points.dedup_by_key(|p| p.n);
    if points.len() < 2 {
        return Err(Error::InsufficientData(
            "scaling fit needs at least two distinct n".into(),
        ));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.sqrt_d).sum::<f64>() / k;
    let my = points.iter().map(|p| p.r_c).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.sqrt_d - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.sqrt_d - mx) * (p.r_c - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = points
        .iter()
        .map(|p| p.r_c - (slope * p.sqrt_d + intercept))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = points.iter().map(|p| (p.r_c - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(ScalingFit {
        points,
        slope,
        intercept,
        residuals,
        r_squared,
        reference_slope: REFERENCE_SLOPE,
        reference_intercept: REFERENCE_INTERCEPT,
    })
}

/// Scaling fit over ensembles at different `n`.
pub fn scaling_fit(ensembles: &[TrialEnsemble]) -> Result<ScalingFit> {
    let points = ensembles
        .iter()
        .map(|e| {
            let g = gaussian_fit(e)?;
            Ok(ScalingPoint::new(e.n, g.r_c, g.delta_r))
        })
        .collect::<Result<Vec<_>>>()?;
    fit_scaling_points(points)
}

/// Fitness of a learned pair on held-out balanced functions plus both constants.
pub fn verify_learned(
    pair: &CandidatePair,
    holdout: &[BooleanFunction],
    stages: usize,
) -> Result<FitnessReport> {
    if holdout.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let n = pair.qubits();
    let set = TrainingSet::from_parts(n, holdout.to_vec(), Vec::new())?;
    let basis = GeneratorBasis::for_qubits(n)?;
    fitness(pair, &basis, &set, stages)
}
