//! Gaussian mixture encoding of the demonstrated wrench over phase, and
//! Gaussian Mixture Regression to recover a wrench reference at any phase.
//!
//! Samples live in joint space `[x, F_1..F_m]` where `x` is the primitive's
//! phase. Conditioning on phase instead of wall-clock time keeps the reference
//! aligned with the motion when execution is slower or faster than the
//! demonstration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{gaussian_log_pdf, log_sum_exp, Cholesky, SquareMatrix};
use crate::recording::Recording;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum GmmError {
    #[error("stream `{0}` not found in recording")]
    MissingStream(String),
    #[error("phase list has {got} entries but the recording has {expected} frames")]
    FrameMismatch { expected: usize, got: usize },
    #[error("need at least {needed} samples for this mixture, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("covariance of component {0} is singular after regularization")]
    SingularCovariance(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("empty component range")]
    EmptyRange,
}

pub type Result<T, E = GmmError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig<T> {
    pub k: usize,
    pub max_iters: usize,
    /// Relative log-likelihood change below which EM stops.
    pub tol: T,
    /// Ridge scale; the added diagonal is `reg · mean(diag(sample covariance))`.
    pub reg: T,
    /// Reserved for randomized initializations; the default init ignores it.
    pub seed: u64,
}

impl<T: Scalar> GmmConfig<T> {
    pub fn with_components(k: usize) -> Self {
        Self {
            k,
            max_iters: 200,
            tol: T::lit(1e-8),
            reg: T::lit(1e-6),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(GmmError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(GmmError::InvalidConfig("tol must be positive".into()));
        }
        if !(self.reg >= T::zero()) {
            return Err(GmmError::InvalidConfig("reg must be non-negative".into()));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for GmmConfig<T> {
    fn default() -> Self {
        Self::with_components(5)
    }
}

/// Mixture over `[phase, wrench…]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel<T> {
    pub priors: Vec<T>,
    pub means: Vec<Vec<T>>,
    pub covariances: Vec<SquareMatrix<T>>,
    /// Number of leading input coordinates (always 1: the phase).
    pub input_dim: usize,
}

/// Conditional wrench distribution at one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrenchReference<T> {
    pub mean: Vec<T>,
    pub covariance: SquareMatrix<T>,
}

/// EM result with its per-iteration log-likelihood trace.
#[derive(Debug, Clone)]
pub struct GmmFit<T> {
    pub model: GmmModel<T>,
    pub log_likelihoods: Vec<T>,
    pub converged: bool,
}

/// Pairs each frame's phase with its wrench sample: `[x_t, F_t]`.
pub fn build_dataset(rec: &Recording, wrench_stream: &str, phases: &[f64]) -> Result<Vec<Vec<f64>>> {
    let s = rec
        .stream(wrench_stream)
        .ok_or_else(|| GmmError::MissingStream(wrench_stream.to_string()))?;
    if phases.len() != rec.frames {
        return Err(GmmError::FrameMismatch {
            expected: rec.frames,
            got: phases.len(),
        });
    }
    Ok(phases
        .iter()
        .zip(s.rows())
        .map(|(&x, f)| std::iter::once(x).chain(f.iter().copied()).collect())
        .collect())
}

fn check_samples<T: Scalar>(samples: &[Vec<T>]) -> Result<usize> {
    let dim = samples.first().map_or(0, Vec::len);
    if dim < 2 {
        return Err(GmmError::InvalidConfig(
            "samples need a phase coordinate and at least one output".into(),
        ));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.len() != dim {
            return Err(GmmError::DimensionMismatch {
                index: i,
                expected: dim,
                got: s.len(),
            });
        }
    }
    Ok(dim)
}

/// Weighted mean and (biased) covariance, symmetric by construction.
fn weighted_moments<T: Scalar>(samples: &[Vec<T>], weights: &[T], dim: usize) -> (Vec<T>, SquareMatrix<T>, T) {
    let total: T = weights.iter().copied().sum();
    let mut mean = vec![T::zero(); dim];
    for (s, &w) in samples.iter().zip(weights) {
        for j in 0..dim {
            mean[j] = mean[j] + w * s[j];
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / total);
    let mut cov = SquareMatrix::zeros(dim);
    for (s, &w) in samples.iter().zip(weights) {
        for i in 0..dim {
            let di = s[i] - mean[i];
            for j in i..dim {
                cov[(i, j)] = cov[(i, j)] + w * di * (s[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / total;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mean, cov, total)
}

/// Fits a mixture by EM from a deterministic phase-binned initialization.
pub fn fit_gmm<T: Scalar>(samples: &[Vec<T>], cfg: &GmmConfig<T>) -> Result<GmmModel<T>> {
    fit_gmm_traced(samples, cfg).map(|f| f.model)
}

pub fn fit_gmm_traced<T: Scalar>(samples: &[Vec<T>], cfg: &GmmConfig<T>) -> Result<GmmFit<T>> {
    cfg.validate()?;
    let dim = check_samples(samples)?;
    let n = samples.len();
    let needed = cfg.k * dim;
    if n < needed {
        return Err(GmmError::TooFewSamples { needed, got: n });
    }

    let ones = vec![T::one(); n];
    let (_, sample_cov, _) = weighted_moments(samples, &ones, dim);
    let ridge = cfg.reg * sample_cov.trace() / T::from_usize_lossy(dim);

    // contiguous bins over phase-sorted samples
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[a][0].partial_cmp(&samples[b][0]).unwrap_or(std::cmp::Ordering::Equal));
    let mut priors = Vec::with_capacity(cfg.k);
    let mut means = Vec::with_capacity(cfg.k);
    let mut covs = Vec::with_capacity(cfg.k);
    for j in 0..cfg.k {
        let lo = j * n / cfg.k;
        let hi = (j + 1) * n / cfg.k;
        let bin: Vec<Vec<T>> = order[lo..hi].iter().map(|&i| samples[i].clone()).collect();
        let (mean, mut cov, _) = weighted_moments(&bin, &vec![T::one(); bin.len()], dim);
        cov.add_diagonal(ridge);
        priors.push(T::from_usize_lossy(hi - lo) / T::from_usize_lossy(n));
        means.push(mean);
        covs.push(cov);
    }
    let mut model = GmmModel {
        priors,
        means,
        covariances: covs,
        input_dim: 1,
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut resp = vec![vec![T::zero(); n]; cfg.k];
    let mut previous: Option<GmmModel<T>> = None;
    loop {
        let chols = model.factorize()?;
        let mut ll = T::zero();
        let mut logs = vec![T::zero(); cfg.k];
        for (t, s) in samples.iter().enumerate() {
            for (j, c) in chols.iter().enumerate() {
                logs[j] = model.priors[j].ln() + gaussian_log_pdf(s, &model.means[j], c);
            }
            let lse = log_sum_exp(&logs);
            ll = ll + lse;
            for j in 0..cfg.k {
                resp[j][t] = (logs[j] - lse).exp();
            }
        }
        if let Some(&prev) = trace.last() {
            // The ridge makes the M-step a non-ascent step once the
            // unregularized optimum is reached; keep the last ascent iterate.
            if ll < prev {
                model = previous.take().unwrap();
                converged = true;
                break;
            }
            let change: T = ll - prev;
            if change <= cfg.tol * prev.abs().max(T::min_positive_value()) {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if trace.len() > cfg.max_iters {
            break;
        }
        previous = Some(model.clone());

        // M-step
        let mut mass = Vec::with_capacity(cfg.k);
        for j in 0..cfg.k {
            let nk: T = resp[j].iter().copied().sum();
            mass.push(nk);
            if nk <= T::min_positive_value() {
                continue;
            }
            let (mean, mut cov, _) = weighted_moments(samples, &resp[j], dim);
            cov.add_diagonal(ridge);
            model.means[j] = mean;
            model.covariances[j] = cov;
        }
        let total: T = mass.iter().copied().sum();
        model.priors = mass.iter().map(|&m| m / total).collect();
    }

    Ok(GmmFit {
        model,
        log_likelihoods: trace,
        converged,
    })
}

/// `Σ_t log Σ_k π_k N(s_t; μ_k, Σ_k)`.
pub fn log_likelihood<T: Scalar>(model: &GmmModel<T>, samples: &[Vec<T>]) -> Result<T> {
    let dim = model.dim();
    for (i, s) in samples.iter().enumerate() {
        if s.len() != dim {
            return Err(GmmError::DimensionMismatch {
                index: i,
                expected: dim,
                got: s.len(),
            });
        }
    }
    let chols = model.factorize()?;
    let mut logs = vec![T::zero(); model.k()];
    Ok(samples
        .iter()
        .map(|s| {
            for (j, c) in chols.iter().enumerate() {
                logs[j] = model.priors[j].ln() + gaussian_log_pdf(s, &model.means[j], c);
            }
            log_sum_exp(&logs)
        })
        .sum())
}

/// Free parameters of a full-covariance mixture with `k` components in `dim` dimensions.
pub fn parameter_count(k: usize, dim: usize) -> usize {
    k - 1 + k * dim + k * dim * (dim + 1) / 2
}

/// Picks the component count minimizing BIC, preferring the smaller count on ties.
pub fn select_k_bic<T: Scalar>(samples: &[Vec<T>], k_range: &[usize], base: &GmmConfig<T>) -> Result<usize> {
    if k_range.is_empty() {
        return Err(GmmError::EmptyRange);
    }
    let dim = check_samples(samples)?;
    let n = T::from_usize_lossy(samples.len());
    let mut ks = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut best: Option<(usize, T)> = None;
    for k in ks {
        let cfg = GmmConfig { k, ..base.clone() };
        let model = fit_gmm(samples, &cfg)?;
        let ll = log_likelihood(&model, samples)?;
        let bic = -T::lit(2.0) * ll + T::from_usize_lossy(parameter_count(k, dim)) * n.ln();
        if best.map_or(true, |(_, b)| bic < b) {
            best = Some((k, bic));
        }
    }
    Ok(best.map(|(k, _)| k).unwrap())
}

impl<T: Scalar> GmmModel<T> {
    pub fn k(&self) -> usize {
        self.priors.len()
    }

    /// Joint dimension `1 + m`.
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn output_dim(&self) -> usize {
        self.dim().saturating_sub(self.input_dim)
    }

    fn factorize(&self) -> Result<Vec<Cholesky<T>>> {
        self.covariances
            .iter()
            .enumerate()
            .map(|(j, c)| c.cholesky().ok_or(GmmError::SingularCovariance(j)))
            .collect()
    }

    /// Checks priors, shapes, symmetry and positive definiteness.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GmmError::InvalidModel(m));
        let k = self.k();
        if k == 0 || self.means.len() != k || self.covariances.len() != k {
            return bad("components must have matching priors, means and covariances".into());
        }
        if self.input_dim != 1 {
            return bad(format!("input_dim must be 1, got {}", self.input_dim));
        }
        let dim = self.dim();
        if dim < 2 {
            return bad("joint dimension must be at least 2".into());
        }
        if self.priors.iter().any(|&p| !(p >= T::zero())) {
            return bad("priors must be non-negative".into());
        }
        let sum: T = self.priors.iter().copied().sum();
        if (sum - T::one()).abs() > T::lit(1e-12) {
            return bad(format!("priors sum to {sum}"));
        }
        for (j, (m, c)) in self.means.iter().zip(&self.covariances).enumerate() {
            if m.len() != dim || c.dim() != dim {
                return bad(format!("component {j} has inconsistent dimension"));
            }
            if m.iter().any(|v| !v.is_finite()) || !c.is_finite() {
                return bad(format!("component {j} is not finite"));
            }
            if c.asymmetry() > T::lit(1e-12) {
                return bad(format!("covariance {j} is not symmetric"));
            }
            if c.cholesky().is_none() {
                return Err(GmmError::SingularCovariance(j));
            }
        }
        Ok(())
    }

    /// Normalized component responsibilities for the phase input `x`.
    pub fn responsibilities(&self, x: T) -> Vec<T> {
        let half = T::lit(0.5);
        let log2pi = (T::lit(2.0) * T::PI()).ln();
        let logs: Vec<T> = self
            .priors
            .iter()
            .zip(&self.means)
            .zip(&self.covariances)
            .map(|((&p, m), c)| {
                let var = c[(0, 0)];
                let d = x - m[0];
                p.ln() - half * (log2pi + var.ln() + d * d / var)
            })
            .collect();
        let lse = log_sum_exp(&logs);
        logs.iter().map(|&l| (l - lse).exp()).collect()
    }

    /// Conditional mean and blended conditional covariance of the wrench at phase `x`.
    pub fn gmr(&self, x: T) -> WrenchReference<T> {
        let m = self.output_dim();
        let h = self.responsibilities(x);
        let mut mean = vec![T::zero(); m];
        let mut cov = SquareMatrix::zeros(m);
        for ((&hk, mu), c) in h.iter().zip(&self.means).zip(&self.covariances) {
            let var = c[(0, 0)];
            let dx = x - mu[0];
            for a in 0..m {
                let cross_a = c[(a + 1, 0)];
                mean[a] = mean[a] + hk * (mu[a + 1] + cross_a / var * dx);
                for b in a..m {
                    let cond = c[(a + 1, b + 1)] - cross_a * c[(0, b + 1)] / var;
                    cov[(a, b)] = cov[(a, b)] + hk * cond;
                }
            }
        }
        for a in 0..m {
            for b in (a + 1)..m {
                cov[(b, a)] = cov[(a, b)];
            }
        }
        WrenchReference { mean, covariance: cov }
    }
}
