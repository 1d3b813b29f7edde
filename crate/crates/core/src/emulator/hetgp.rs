//! Heteroskedastic GP for replicated designs.
//!
//! Per-location replicate variances are smoothed on the log scale by a
//! separate GP. With `a` replicates, log s² has variance ≈ 2/(a−1) and is
//! biased low by ≈ 1/(a−1), which gives the smoother a known nugget. The
//! smoothed noise, divided by the replicate count, is then the fixed noise of
//! the GP on the replicate means.

use serde::{Deserialize, Serialize};

use super::gp::{fit_gp, GpMean, GpModel, MleConfig, Noise};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HetGp {
    /// GP on replicate means with per-point noise `noise_i / counts_i`.
    pub gp: GpModel,
    /// GP on log replicate variance.
    pub log_var: GpModel,
}

impl HetGp {
    /// Predicted variance of a single replicate at `x`.
    pub fn noise_at(&self, x: &[f64]) -> f64 {
        self.log_var.predict_mean(x).exp()
    }

    /// Smoothed single-replicate noise variance at each training location.
    pub fn noise_per_point(&self) -> Vec<f64> {
        self.log_var
            .predict_batch(self.gp.inputs(), false)
            .into_iter()
            .map(|(m, _)| m.exp())
            .collect()
    }
}

/// `inputs` holds the unique design locations row-major with `p` columns.
pub fn fit_hetgp(
    inputs: &[f64],
    p: usize,
    means: &[f64],
    variances: &[f64],
    counts: &[usize],
    mean_mode: GpMean,
    cfg: &MleConfig,
) -> Result<HetGp> {
    let n = means.len();
    if variances.len() != n || counts.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: variances.len().min(counts.len()),
        });
    }
    if counts.contains(&0) {
        return Err(Error::InvalidConfig(
            "every design location needs at least one replicate".into(),
        ));
    }
    let usable: Vec<usize> = (0..n).filter(|&i| counts[i] >= 2).collect();
    if usable.is_empty() {
        return Err(Error::InvalidConfig(
            "heteroskedastic fit needs at least one location with 2 or more replicates".into(),
        ));
    }
    let positive: Vec<f64> = usable
        .iter()
        .map(|&i| variances[i])
        .filter(|v| *v > 0.0)
        .collect();
    let floor = if positive.is_empty() {
        1e-300
    } else {
        1e-6 * positive.iter().sum::<f64>() / positive.len() as f64
    };

    let mut xv = Vec::with_capacity(usable.len() * p);
    let mut z = Vec::with_capacity(usable.len());
    let mut z_noise = Vec::with_capacity(usable.len());
    for &i in &usable {
        xv.extend_from_slice(&inputs[i * p..(i + 1) * p]);
        let dof = (counts[i] - 1) as f64;
        z.push(variances[i].max(floor).ln() + 1.0 / dof);
        z_noise.push(2.0 / dof);
    }
    let log_var = fit_gp(
        &xv,
        p,
        &z,
        Noise::Fixed { variances: z_noise },
        GpMean::Constant,
        cfg,
    )?;

    let smoothed = log_var.predict_batch(inputs, false);
    let noise: Vec<f64> = smoothed
        .iter()
        .zip(counts)
        .map(|((m, _), &a)| m.exp() / a as f64)
        .collect();
    let gp = fit_gp(
        inputs,
        p,
        means,
        Noise::Fixed { variances: noise },
        mean_mode,
        cfg,
    )?;
    Ok(HetGp { gp, log_var })
}
