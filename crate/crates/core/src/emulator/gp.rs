//! Gaussian-process regression with a Matérn 5/2 kernel, per-point or
//! estimated observation noise, and maximum-likelihood hyperparameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{dist2, matern52_dlog, matern52_unit, Matern52};
use super::linalg;
use super::optim::{self, LbfgsOptions};
use crate::error::{Error, Result};

/// Jitter ladder, relative to the signal variance.
const JITTER_LADDER: [f64; 5] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-2, 1e2);

/// Points per block in batch prediction.
const PREDICT_BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    /// Known noise variance for each training target.
    Fixed { variances: Vec<f64> },
    /// One variance shared by all targets; estimated when fitting.
    Homoskedastic { variance: f64 },
}

impl Noise {
    fn at(&self, i: usize) -> f64 {
        match self {
            Noise::Fixed { variances } => variances[i],
            Noise::Homoskedastic { variance } => *variance,
        }
    }

    fn is_estimated(&self) -> bool {
        matches!(self, Noise::Homoskedastic { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpMean {
    Zero,
    /// Targets centered on their sample mean.
    Constant,
}

#[derive(Debug, Clone, Copy)]
pub struct MleConfig {
    pub starts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iter: 150,
            seed: 20_220_617,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GpParts {
    p: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    mean_mode: GpMean,
    mean: f64,
    kernel: Matern52,
    noise: Noise,
    jitter: f64,
}

#[derive(Debug, Clone)]
struct Factor {
    scaled: Vec<f64>,
    linv: Vec<f64>,
    alpha: Vec<f64>,
    log_det: f64,
}

/// A GP conditioned on its training data. Construction factorizes the
/// covariance once; the model is immutable afterwards.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GpParts", into = "GpParts")]
pub struct GpModel {
    parts: GpParts,
    factor: Factor,
}

impl TryFrom<GpParts> for GpModel {
    type Error = Error;

    fn try_from(parts: GpParts) -> Result<Self> {
        let GpParts {
            p,
            inputs,
            targets,
            mean_mode,
            mean,
            kernel,
            noise,
            jitter,
        } = parts;
        check_shapes(&inputs, p, &targets, &noise)?;
        let factor = factorize(&inputs, p, &targets, mean, &kernel, &noise, &[jitter])?;
        Ok(Self {
            parts: GpParts {
                p,
                inputs,
                targets,
                mean_mode,
                mean,
                kernel,
                noise,
                jitter: factor.1,
            },
            factor: factor.0,
        })
    }
}

impl From<GpModel> for GpParts {
    fn from(m: GpModel) -> Self {
        m.parts
    }
}

fn check_shapes(inputs: &[f64], p: usize, targets: &[f64], noise: &Noise) -> Result<()> {
    if p == 0 || targets.is_empty() {
        return Err(Error::Empty("GP training data".into()));
    }
    if inputs.len() != targets.len() * p {
        return Err(Error::DimensionMismatch {
            expected: targets.len() * p,
            got: inputs.len(),
        });
    }
    if let Noise::Fixed { variances } = noise {
        if variances.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: targets.len(),
                got: variances.len(),
            });
        }
        if variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidConfig(
                "noise variances must be finite and >= 0".into(),
            ));
        }
    }
    if targets.iter().chain(inputs).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "GP training data must be finite".into(),
        ));
    }
    Ok(())
}

fn mean_of(targets: &[f64], mode: GpMean) -> f64 {
    match mode {
        GpMean::Zero => 0.0,
        GpMean::Constant => targets.iter().sum::<f64>() / targets.len() as f64,
    }
}

/// Unit-variance correlation matrix of the scaled inputs (full, symmetric).
fn correlation(scaled: &[f64], n: usize, p: usize) -> Vec<f64> {
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        r[i * n + i] = 1.0;
        let xi = &scaled[i * p..(i + 1) * p];
        for j in 0..i {
            let v = matern52_unit(dist2(xi, &scaled[j * p..(j + 1) * p]).sqrt());
            r[i * n + j] = v;
            r[j * n + i] = v;
        }
    }
    r
}

/// Cholesky of σ²(R + jI) + diag(noise), trying each jitter in turn.
fn cholesky_with_jitter(
    r: &[f64],
    n: usize,
    kernel: &Matern52,
    noise: &Noise,
    ladder: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let s2 = kernel.signal_variance;
    for &j in ladder {
        let mut k: Vec<f64> = r.iter().map(|v| v * s2).collect();
        for i in 0..n {
            k[i * n + i] += s2 * j + noise.at(i);
        }
        if linalg::cholesky_in_place(&mut k, n) {
            return Ok((k, j));
        }
    }
    Err(Error::NotPositiveDefinite {
        retries: ladder.len(),
    })
}

fn factorize(
    inputs: &[f64],
    p: usize,
    targets: &[f64],
    mean: f64,
    kernel: &Matern52,
    noise: &Noise,
    ladder: &[f64],
) -> Result<(Factor, f64)> {
    if !kernel.is_valid() || kernel.dim() != p {
        return Err(Error::InvalidConfig(
            "kernel hyperparameters must be positive and match the input dimension".into(),
        ));
    }
    let n = targets.len();
    let scaled = kernel.scale_inputs(inputs);
    let r = correlation(&scaled, n, p);
    let (l, jitter) = cholesky_with_jitter(&r, n, kernel, noise, ladder)?;
    let centered: Vec<f64> = targets.iter().map(|y| y - mean).collect();
    let alpha = linalg::backward_solve_t(&l, n, &linalg::forward_solve(&l, n, &centered));
    let log_det = 2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>();
    let linv = linalg::lower_inverse(&l, n);
    Ok((
        Factor {
            scaled,
            linv,
            alpha,
            log_det,
        },
        jitter,
    ))
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on row-major `inputs`.
    pub fn new(
        inputs: &[f64],
        p: usize,
        targets: &[f64],
        kernel: Matern52,
        noise: Noise,
        mean_mode: GpMean,
    ) -> Result<Self> {
        check_shapes(inputs, p, targets, &noise)?;
        let mean = mean_of(targets, mean_mode);
        let (factor, jitter) =
            factorize(inputs, p, targets, mean, &kernel, &noise, &JITTER_LADDER)?;
        Ok(Self {
            parts: GpParts {
                p,
                inputs: inputs.to_vec(),
                targets: targets.to_vec(),
                mean_mode,
                mean,
                kernel,
                noise,
                jitter,
            },
            factor,
        })
    }

    pub fn n(&self) -> usize {
        self.parts.targets.len()
    }

    pub fn p(&self) -> usize {
        self.parts.p
    }

    pub fn inputs(&self) -> &[f64] {
        &self.parts.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.parts.targets
    }

    pub fn kernel(&self) -> &Matern52 {
        &self.parts.kernel
    }

    pub fn noise(&self) -> &Noise {
        &self.parts.noise
    }

    pub fn mean_mode(&self) -> GpMean {
        self.parts.mean_mode
    }

    /// Constant the GP mean reverts to away from data.
    pub fn prior_mean(&self) -> f64 {
        self.parts.mean
    }

    /// Jitter (relative to the signal variance) that made the covariance factorizable.
    pub fn jitter(&self) -> f64 {
        self.parts.jitter
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.n() as f64;
        let quad: f64 = self
            .parts
            .targets
            .iter()
            .zip(&self.factor.alpha)
            .map(|(y, a)| (y - self.parts.mean) * a)
            .sum();
        -0.5 * quad - 0.5 * self.factor.log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Posterior mean and latent (noise-free) variance at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let mut out = [(0.0, 0.0)];
        self.predict_block(x, true, &mut out);
        out[0]
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        let mut out = [(0.0, 0.0)];
        self.predict_block(x, false, &mut out);
        out[0].0
    }

    /// Row-major batch of points. The result for each point does not depend
    /// on which other points are in the batch.
    pub fn predict_batch(&self, xs: &[f64], with_variance: bool) -> Vec<(f64, f64)> {
        use rayon::prelude::*;
        let p = self.p();
        assert_eq!(
            xs.len() % p,
            0,
            "batch length must be a multiple of the input dimension"
        );
        let m = xs.len() / p;
        let mut out = vec![(0.0, 0.0); m];
        out.par_chunks_mut(PREDICT_BLOCK)
            .zip(xs.par_chunks(PREDICT_BLOCK * p))
            .for_each(|(o, x)| self.predict_block(x, with_variance, o));
        out
    }

    fn predict_block(&self, xs: &[f64], with_variance: bool, out: &mut [(f64, f64)]) {
        let p = self.p();
        let n = self.n();
        let m = out.len();
        let k = &self.parts.kernel;
        let s2 = k.signal_variance;
        let q = k.scale_inputs(xs);
        // Cross-covariance, n × m row-major.
        let mut ks = vec![0.0; n * m];
        for j in 0..n {
            let xj = &self.factor.scaled[j * p..(j + 1) * p];
            let row = &mut ks[j * m..(j + 1) * m];
            for (c, v) in row.iter_mut().enumerate() {
                *v = s2 * matern52_unit(dist2(xj, &q[c * p..(c + 1) * p]).sqrt());
            }
        }
        for (c, o) in out.iter_mut().enumerate() {
            let mut mu = 0.0;
            for j in 0..n {
                mu += self.factor.alpha[j] * ks[j * m + c];
            }
            o.0 = self.parts.mean + mu;
        }
        if with_variance {
            let v = linalg::lower_mul(&self.factor.linv, n, &ks, m);
            for (c, o) in out.iter_mut().enumerate() {
                let mut explained = 0.0;
                for j in 0..n {
                    let t = v[j * m + c];
                    explained += t * t;
                }
                o.1 = (s2 - explained).max(0.0);
            }
        }
    }
}

/// Log marginal likelihood and its gradient with respect to
/// `[log ℓ_1..log ℓ_p, log σ², (log noise if homoskedastic)]`.
/// `mean` is subtracted from the targets first.
pub fn log_marginal_likelihood_with_gradient(
    inputs: &[f64],
    p: usize,
    targets: &[f64],
    mean: f64,
    kernel: &Matern52,
    noise: &Noise,
) -> Result<(f64, Vec<f64>)> {
    check_shapes(inputs, p, targets, noise)?;
    lml_grad(inputs, p, targets, mean, kernel, noise, &JITTER_LADDER)
}

fn lml_grad(
    inputs: &[f64],
    p: usize,
    targets: &[f64],
    mean: f64,
    kernel: &Matern52,
    noise: &Noise,
    ladder: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if !kernel.is_valid() {
        return Err(Error::InvalidConfig(
            "invalid kernel hyperparameters".into(),
        ));
    }
    let n = targets.len();
    let s2 = kernel.signal_variance;
    let scaled = kernel.scale_inputs(inputs);
    let r = correlation(&scaled, n, p);
    let (l, jitter) = cholesky_with_jitter(&r, n, kernel, noise, ladder)?;
    let centered: Vec<f64> = targets.iter().map(|y| y - mean).collect();
    let alpha = linalg::backward_solve_t(&l, n, &linalg::forward_solve(&l, n, &centered));
    let log_det = 2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>();
    let quad: f64 = centered.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let lml = -0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    let linv = linalg::lower_inverse(&l, n);
    let kinv = linalg::lower_gram(&linv, n);
    let n_hyper = p + 1 + usize::from(noise.is_estimated());
    let mut grad = vec![0.0; n_hyper];
    // ½ tr(W ∂K) with W = ααᵀ − K⁻¹; off-diagonal pairs counted once with weight 1.
    let mut offs = vec![0.0; p];
    for i in 0..n {
        let xi = &scaled[i * p..(i + 1) * p];
        for j in 0..i {
            let w = alpha[i] * alpha[j] - kinv[i * n + j];
            if w == 0.0 {
                continue;
            }
            let xj = &scaled[j * p..(j + 1) * p];
            let mut d2 = 0.0;
            for (o, (a, b)) in offs.iter_mut().zip(xi.iter().zip(xj)) {
                let t = a - b;
                *o = t * t;
                d2 += *o;
            }
            let dk = s2 * matern52_dlog(d2.sqrt());
            for (g, o) in grad[..p].iter_mut().zip(&offs) {
                *g += w * dk * o;
            }
            grad[p] += w * s2 * r[i * n + j];
        }
        let w = alpha[i] * alpha[i] - kinv[i * n + i];
        grad[p] += 0.5 * w * s2 * (1.0 + jitter);
        if noise.is_estimated() {
            grad[p + 1] += 0.5 * w * noise.at(i);
        }
    }
    Ok((lml, grad))
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(t: f64) -> f64 {
    let t = t.clamp(1e-9, 1.0 - 1e-9);
    (t / (1.0 - t)).ln()
}

/// Box constraints in log space, mapped smoothly onto the real line.
struct Transform {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Transform {
    fn to_log(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(u, (lo, hi))| lo + (hi - lo) * sigmoid(*u))
            .collect()
    }

    fn to_free(&self, t: &[f64]) -> Vec<f64> {
        t.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (lo, hi))| logit((t - lo) / (hi - lo)))
            .collect()
    }

    fn chain(&self, u: &[f64], g: &mut [f64]) {
        for (i, gi) in g.iter_mut().enumerate() {
            let s = sigmoid(u[i]);
            *gi *= (self.hi[i] - self.lo[i]) * s * (1.0 - s);
        }
    }
}

fn unpack(theta: &[f64], p: usize, noise: &Noise) -> (Matern52, Noise) {
    let kernel = Matern52::new(theta[..p].iter().map(|v| v.exp()).collect(), theta[p].exp());
    let noise = match noise {
        Noise::Homoskedastic { .. } => Noise::Homoskedastic {
            variance: theta[p + 1].exp(),
        },
        other => other.clone(),
    };
    (kernel, noise)
}

/// Fits lengthscales and signal variance (plus the noise variance for
/// `Noise::Homoskedastic`) by multi-start maximum likelihood.
pub fn fit_gp(
    inputs: &[f64],
    p: usize,
    targets: &[f64],
    noise: Noise,
    mean_mode: GpMean,
    cfg: &MleConfig,
) -> Result<GpModel> {
    check_shapes(inputs, p, targets, &noise)?;
    let n = targets.len();
    let mean = mean_of(targets, mean_mode);
    let mut scale = targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
    if !(scale > 0.0) {
        let avg_noise = (0..n).map(|i| noise.at(i)).sum::<f64>() / n as f64;
        scale = if avg_noise > 0.0 { avg_noise } else { 1e-12 };
    }
    let (llo, lhi) = (LENGTHSCALE_BOUNDS.0.ln(), LENGTHSCALE_BOUNDS.1.ln());
    let mut lo = vec![llo; p];
    let mut hi = vec![lhi; p];
    lo.push((1e-6 * scale).ln());
    hi.push((1e2 * scale).ln());
    if noise.is_estimated() {
        lo.push((1e-8 * scale).ln());
        hi.push((10.0 * scale).ln());
    }
    let tr = Transform { lo, hi };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = Vec::with_capacity(cfg.starts.max(1));
    for s in 0..cfg.starts.max(1) {
        let mut t = Vec::with_capacity(tr.lo.len());
        for _ in 0..p {
            t.push(if s == 0 {
                0.5f64.ln()
            } else {
                rng.random_range(0.05f64.ln()..5f64.ln())
            });
        }
        t.push(if s == 0 {
            scale.ln()
        } else {
            rng.random_range((0.1 * scale).ln()..(10.0 * scale).ln())
        });
        if noise.is_estimated() {
            t.push(if s == 0 {
                (0.1 * scale).ln()
            } else {
                rng.random_range((1e-4 * scale).ln()..(0.5 * scale).ln())
            });
        }
        starts.push(tr.to_free(&t));
    }

    let objective = |u: &[f64]| -> Option<(f64, Vec<f64>)> {
        let theta = tr.to_log(u);
        let (kernel, nz) = unpack(&theta, p, &noise);
        let (lml, mut g) = lml_grad(inputs, p, targets, mean, &kernel, &nz, &JITTER_LADDER).ok()?;
        if !lml.is_finite() {
            return None;
        }
        for v in g.iter_mut() {
            *v = -*v;
        }
        tr.chain(u, &mut g);
        Some((-lml, g))
    };
    let opts = LbfgsOptions {
        max_iter: cfg.max_iter,
        ..Default::default()
    };
    let mut best: Option<optim::Minimum> = None;
    for u0 in &starts {
        if let Some(m) = optim::minimize(&objective, u0, opts) {
            log::debug!(
                "mle start: -lml {:.6} after {} iterations",
                m.f,
                m.iterations
            );
            if best.as_ref().is_none_or(|b| m.f < b.f) {
                best = Some(m);
            }
        }
    }
    let best = best.ok_or(Error::NotPositiveDefinite {
        retries: JITTER_LADDER.len(),
    })?;
    let theta = tr.to_log(&best.x);
    let (kernel, noise) = unpack(&theta, p, &noise);
    GpModel::new(inputs, p, targets, kernel, noise, mean_mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lml_trivial_cases() {
        // n = 1, K = [1], y = 0: the noise-free jitter perturbs K by 1e-8.
        let m = GpModel::new(
            &[0.0],
            1,
            &[0.0],
            Matern52::new(vec![1.0], 1.0),
            Noise::Fixed {
                variances: vec![0.0],
            },
            GpMean::Zero,
        )
        .unwrap();
        let want = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((m.log_marginal_likelihood() - want).abs() < 1e-7);
        // n = 2, far-apart points make K ≈ I.
        let m = GpModel::new(
            &[0.0, 1e4],
            1,
            &[0.0, 0.0],
            Matern52::new(vec![1.0], 1.0),
            Noise::Fixed {
                variances: vec![0.0; 2],
            },
            GpMean::Zero,
        )
        .unwrap();
        assert!((m.log_marginal_likelihood() + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-7);
    }

    #[test]
    fn interpolates_noise_free_data() {
        let x = [0.1, 0.35, 0.6, 0.9];
        let y = [1.0, -0.5, 0.3, 2.0];
        let m = GpModel::new(
            &x,
            1,
            &y,
            Matern52::new(vec![0.3], 1.0),
            Noise::Fixed {
                variances: vec![0.0; 4],
            },
            GpMean::Constant,
        )
        .unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (mu, var) = m.predict(&[*xi]);
            assert!((mu - yi).abs() <= 1e-6 * yi.abs());
            assert!(var < 1e-6);
        }
    }

    #[test]
    fn far_away_variance_reverts_to_prior() {
        let m = GpModel::new(
            &[0.0, 0.1],
            1,
            &[1.0, 2.0],
            Matern52::new(vec![0.2], 2.5),
            Noise::Fixed {
                variances: vec![0.01; 2],
            },
            GpMean::Constant,
        )
        .unwrap();
        let (mu, var) = m.predict(&[100.0]);
        assert!((mu - 1.5).abs() < 1e-12);
        assert!((var - 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_targets_predict_zero() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let m = fit_gp(
            &x,
            1,
            &[0.0; 10],
            Noise::Fixed {
                variances: vec![1e-12; 10],
            },
            GpMean::Zero,
            &MleConfig::default(),
        )
        .unwrap();
        assert!(m.predict(&[0.55]).0.abs() < 1e-12);
    }

    #[test]
    fn single_and_batch_agree_bitwise() {
        let x: Vec<f64> = (0..60).map(|i| ((i * 37) % 60) as f64 / 60.0).collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let m = GpModel::new(
            &x,
            2,
            &y,
            Matern52::new(vec![0.3, 0.7], 1.2),
            Noise::Fixed {
                variances: vec![0.05; 30],
            },
            GpMean::Constant,
        )
        .unwrap();
        let q: Vec<f64> = (0..2 * 700)
            .map(|i| ((i * 13) % 101) as f64 / 101.0)
            .collect();
        let batch = m.predict_batch(&q, true);
        for (i, b) in batch.iter().enumerate() {
            let one = m.predict(&q[2 * i..2 * i + 2]);
            assert_eq!(one.0.to_bits(), b.0.to_bits());
            assert_eq!(one.1.to_bits(), b.1.to_bits());
        }
    }

    #[test]
    fn serde_round_trip_rebuilds_factor() {
        let m = GpModel::new(
            &[0.0, 0.5, 1.0],
            1,
            &[1.0, 0.0, 1.0],
            Matern52::new(vec![0.4], 1.0),
            Noise::Homoskedastic { variance: 0.1 },
            GpMean::Constant,
        )
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: GpModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back.predict(&[0.3]), m.predict(&[0.3]));
    }
}
