//! Two-stage emulation of replicated simulator output.
//!
//! Cumulative infections (as an attack rate) get a boosted-tree mean and a
//! heteroskedastic GP on the residual replicate means; SVI variance gets a
//! zero-mean GP. All predictive variance comes from the GP stage: latent
//! posterior variance plus the predicted noise of a single replicate.

pub mod gbm;
pub mod gp;
pub mod hetgp;
pub mod kernel;
mod linalg;
mod optim;

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gbm::{fit_gbm, GbmConfig, GbmParams, TreeEnsemble};
pub use gp::{fit_gp, log_marginal_likelihood_with_gradient, GpMean, GpModel, MleConfig, Noise};
pub use hetgp::{fit_hetgp, HetGp};
pub use kernel::{matern52, Matern52};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::stats::{self, Z_90};
use crate::store;

pub const EMULATOR_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub sd: f64,
    pub lo90: f64,
    pub hi90: f64,
}

impl Prediction {
    pub fn from_mean_var(mean: f64, var: f64) -> Self {
        let sd = var.max(0.0).sqrt();
        Self {
            mean,
            sd,
            lo90: mean - Z_90 * sd,
            hi90: mean + Z_90 * sd,
        }
    }

    /// Multiplies every field by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mean: self.mean * c,
            sd: self.sd * c,
            lo90: self.lo90 * c,
            hi90: self.hi90 * c,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo90 <= v && v <= self.hi90
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Emulated as an attack rate (infections per agent).
    CumulativeInfections,
    SviVariance,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::CumulativeInfections, Outcome::SviVariance];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::CumulativeInfections => "cumulative_infections",
            Outcome::SviVariance => "svi_variance",
        }
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Outcome::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown outcome `{s}` (expected cumulative_infections or svi_variance)"
                ))
            })
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanKind {
    Zero,
    Gbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Heteroskedastic,
    Homoskedastic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanModel {
    Zero,
    Gbm { ensemble: TreeEnsemble },
}

impl MeanModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            MeanModel::Zero => 0.0,
            MeanModel::Gbm { ensemble } => ensemble.predict(x),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Single-replicate noise from the log-variance GP.
    Heteroskedastic { log_var: GpModel },
    /// The GP's estimated noise on replicate means, scaled back up to a
    /// single replicate.
    Homoskedastic { replicates: f64 },
}

/// Per-location replicate summaries.
#[derive(Debug, Clone)]
pub struct ReplicateSummary {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub counts: Vec<usize>,
}

impl ReplicateSummary {
    pub fn from_replicates(reps: &[Vec<f64>]) -> Self {
        let mut s = Self {
            means: Vec::with_capacity(reps.len()),
            variances: Vec::with_capacity(reps.len()),
            counts: Vec::with_capacity(reps.len()),
        };
        for r in reps {
            s.means.push(stats::mean(r));
            s.variances.push(if r.len() > 1 {
                stats::sample_variance(r)
            } else {
                0.0
            });
            s.counts.push(r.len());
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub mean_model: MeanModel,
    pub gp: GpModel,
    pub noise: NoiseModel,
}

impl OutcomeModel {
    pub fn fit(
        x: &[f64],
        p: usize,
        data: &ReplicateSummary,
        mean_kind: MeanKind,
        noise_kind: NoiseKind,
        cfg: &EmulatorConfig,
    ) -> Result<Self> {
        let mean_model = match mean_kind {
            MeanKind::Zero => MeanModel::Zero,
            MeanKind::Gbm => MeanModel::Gbm {
                ensemble: fit_gbm(x, p, &data.means, &cfg.gbm)?,
            },
        };
        let resid: Vec<f64> = data
            .means
            .iter()
            .zip(x.chunks(p))
            .map(|(y, xi)| y - mean_model.predict(xi))
            .collect();
        match noise_kind {
            NoiseKind::Heteroskedastic => {
                let h = fit_hetgp(
                    x,
                    p,
                    &resid,
                    &data.variances,
                    &data.counts,
                    GpMean::Zero,
                    &cfg.mle,
                )?;
                Ok(Self {
                    mean_model,
                    gp: h.gp,
                    noise: NoiseModel::Heteroskedastic { log_var: h.log_var },
                })
            }
            NoiseKind::Homoskedastic => {
                let gp = fit_gp(
                    x,
                    p,
                    &resid,
                    Noise::Homoskedastic { variance: 0.0 },
                    GpMean::Zero,
                    &cfg.mle,
                )?;
                let replicates =
                    data.counts.iter().sum::<usize>() as f64 / data.counts.len() as f64;
                Ok(Self {
                    mean_model,
                    gp,
                    noise: NoiseModel::Homoskedastic { replicates },
                })
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        self.predict_batch(x)[0]
    }

    /// Row-major batch. Each result is independent of the rest of the batch.
    pub fn predict_batch(&self, xs: &[f64]) -> Vec<Prediction> {
        let p = self.gp.p();
        let gp = self.gp.predict_batch(xs, true);
        let noise: Vec<f64> = match &self.noise {
            NoiseModel::Heteroskedastic { log_var } => log_var
                .predict_batch(xs, false)
                .into_iter()
                .map(|(m, _)| m.exp())
                .collect(),
            NoiseModel::Homoskedastic { replicates } => {
                let g = match self.gp.noise() {
                    Noise::Homoskedastic { variance } => *variance,
                    Noise::Fixed { variances } => stats::mean(variances),
                };
                vec![g * replicates; gp.len()]
            }
        };
        xs.par_chunks(p)
            .zip(gp.par_iter())
            .zip(noise.par_iter())
            .map(|((x, (mu, var)), nz)| {
                Prediction::from_mean_var(self.mean_model.predict(x) + mu, var + nz)
            })
            .collect()
    }

    /// Smoothed single-replicate noise variance at `x`.
    pub fn noise_at(&self, x: &[f64]) -> f64 {
        match &self.noise {
            NoiseModel::Heteroskedastic { log_var } => log_var.predict_mean(x).exp(),
            NoiseModel::Homoskedastic { replicates } => match self.gp.noise() {
                Noise::Homoskedastic { variance } => variance * replicates,
                Noise::Fixed { variances } => stats::mean(variances) * replicates,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmulatorConfig {
    pub gbm: GbmConfig,
    pub mle: MleConfig,
    pub infections_mean: MeanKind,
    pub svi_noise: NoiseKind,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        Self {
            gbm: GbmConfig::default(),
            mle: MleConfig::default(),
            infections_mean: MeanKind::Gbm,
            svi_noise: NoiseKind::Heteroskedastic,
        }
    }
}

/// Replicated outcomes at unique design locations.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub design: DesignMatrix,
    pub n_agents: usize,
    /// Per location, per replicate: infections ÷ agents.
    pub attack_rate: Vec<Vec<f64>>,
    pub svi_variance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmulatedOutcomes {
    pub cumulative_infections: Prediction,
    pub svi_variance: Prediction,
}

impl EmulatedOutcomes {
    pub fn get(&self, outcome: Outcome) -> &Prediction {
        match outcome {
            Outcome::CumulativeInfections => &self.cumulative_infections,
            Outcome::SviVariance => &self.svi_variance,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Emulator {
    pub schema_version: u32,
    pub labels: Vec<String>,
    /// Population size of the training runs; multiply attack rates by this
    /// to get infection counts.
    pub n_agents: usize,
    pub n_locations: usize,
    pub replicates: usize,
    pub cumulative_infections: OutcomeModel,
    pub svi_variance: OutcomeModel,
}

impl Emulator {
    pub fn fit(data: &TrainingData, cfg: &EmulatorConfig) -> Result<Self> {
        let n = data.design.n();
        if n == 0 {
            return Err(Error::Empty("training design".into()));
        }
        if data.attack_rate.len() != n || data.svi_variance.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: data.attack_rate.len().min(data.svi_variance.len()),
            });
        }
        let p = data.design.p();
        let x = data.design.values();
        let inf = ReplicateSummary::from_replicates(&data.attack_rate);
        let svi = ReplicateSummary::from_replicates(&data.svi_variance);
        log::info!("fitting cumulative-infections emulator on {n} locations");
        let cumulative_infections = OutcomeModel::fit(
            x,
            p,
            &inf,
            cfg.infections_mean,
            NoiseKind::Heteroskedastic,
            cfg,
        )?;
        log::info!("fitting SVI-variance emulator on {n} locations");
        let svi_variance = OutcomeModel::fit(x, p, &svi, MeanKind::Zero, cfg.svi_noise, cfg)?;
        Ok(Self {
            schema_version: EMULATOR_SCHEMA_VERSION,
            labels: data.design.labels().to_vec(),
            n_agents: data.n_agents,
            n_locations: n,
            replicates: inf.counts.iter().copied().min().unwrap_or(0),
            cumulative_infections,
            svi_variance,
        })
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn model(&self, outcome: Outcome) -> &OutcomeModel {
        match outcome {
            Outcome::CumulativeInfections => &self.cumulative_infections,
            Outcome::SviVariance => &self.svi_variance,
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len % self.p() != 0 {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: len % self.p(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<EmulatedOutcomes> {
        if x.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: x.len(),
            });
        }
        Ok(self.predict_batch(x)?[0])
    }

    pub fn predict_batch(&self, xs: &[f64]) -> Result<Vec<EmulatedOutcomes>> {
        self.check_dim(xs.len())?;
        let a = self.cumulative_infections.predict_batch(xs);
        let b = self.svi_variance.predict_batch(xs);
        Ok(a.into_iter()
            .zip(b)
            .map(|(cumulative_infections, svi_variance)| EmulatedOutcomes {
                cumulative_infections,
                svi_variance,
            })
            .collect())
    }

    pub fn predict_outcome_batch(&self, outcome: Outcome, xs: &[f64]) -> Result<Vec<Prediction>> {
        self.check_dim(xs.len())?;
        Ok(self.model(outcome).predict_batch(xs))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let found = v
            .get("schema_version")
            .and_then(|x| x.as_u64())
            .unwrap_or(0) as u32;
        if found != EMULATOR_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found,
                supported: EMULATOR_SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        store::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&store::read_text(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub rmse: f64,
    pub mean_interval_width: f64,
    /// Fraction of held-out values inside the 90% interval.
    pub coverage: f64,
}

/// Compares predictions at held-out points (row-major) with simulated values.
pub fn validate_emulator(
    model: &OutcomeModel,
    heldout: &[f64],
    observed: &[f64],
) -> Result<ValidationReport> {
    if observed.is_empty() {
        return Err(Error::Empty("held-out set".into()));
    }
    let p = model.gp.p();
    if heldout.len() != observed.len() * p {
        return Err(Error::DimensionMismatch {
            expected: observed.len() * p,
            got: heldout.len(),
        });
    }
    let preds = model.predict_batch(heldout);
    let n = observed.len();
    let mut sse = 0.0;
    let mut width = 0.0;
    let mut inside = 0;
    for (pr, &y) in preds.iter().zip(observed) {
        sse += (pr.mean - y).powi(2);
        width += pr.hi90 - pr.lo90;
        inside += usize::from(pr.contains(y));
    }
    Ok(ValidationReport {
        n,
        rmse: (sse / n as f64).sqrt(),
        mean_interval_width: width / n as f64,
        coverage: inside as f64 / n as f64,
    })
}

/// One row per point: attack rate, infection counts (attack rate × `n_agents`)
/// and SVI variance, each as mean, sd and 90% interval.
pub fn write_predictions_csv(
    path: &Path,
    row_ids: &[usize],
    preds: &[EmulatedOutcomes],
    n_agents: usize,
) -> Result<()> {
    if row_ids.len() != preds.len() {
        return Err(Error::DimensionMismatch {
            expected: preds.len(),
            got: row_ids.len(),
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row_id".to_string()];
    for o in ["attack_rate", "cumulative_infections", "svi_variance"] {
        for f in ["mean", "sd", "lo90", "hi90"] {
            header.push(format!("{o}_{f}"));
        }
    }
    w.write_record(&header)
        .map_err(|e| store::csv_err(path, e))?;
    for (id, p) in row_ids.iter().zip(preds) {
        let mut rec = vec![id.to_string()];
        for q in [
            p.cumulative_infections,
            p.cumulative_infections.scaled(n_agents as f64),
            p.svi_variance,
        ] {
            rec.extend([q.mean, q.sd, q.lo90, q.hi90].iter().map(f64::to_string));
        }
        w.write_record(&rec).map_err(|e| store::csv_err(path, e))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    store::write_atomic(path, &bytes)
}
