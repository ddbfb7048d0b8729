//! Unsupervised tuning of binary linear classifiers. The score margins of
//! unlabeled data are modelled as a two-component Gaussian mixture with
//! fixed class priors; the expected hinge loss under that mixture has a
//! closed form, and coordinate descent with finite-difference gradients
//! pushes the weights toward lower expected risk without ever seeing a
//! label.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One weight vector per class; the classifier picks the class with the
/// higher dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
}

impl LinearScorer {
    pub fn new(w0: Vec<f64>, w1: Vec<f64>) -> Result<LinearScorer> {
        if w0.is_empty() || w0.len() != w1.len() {
            return Err(Error::invalid(format!(
                "weight vectors must be non-empty and equally sized, got {} and {}",
                w0.len(),
                w1.len()
            )));
        }
        if w0.iter().chain(&w1).any(|w| !w.is_finite()) {
            return Err(Error::invalid("non-finite weight"));
        }
        Ok(LinearScorer { w0, w1 })
    }

    pub fn dim(&self) -> usize {
        self.w0.len()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scorer serialization cannot fail")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(fs::write(path, self.to_json_string())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LinearScorer> {
        let scorer: LinearScorer = serde_json::from_str(&fs::read_to_string(path)?)?;
        LinearScorer::new(scorer.w0, scorer.w1)
    }
}

fn dot(w: &[f64], h: &[f64]) -> f64 {
    w.iter().zip(h).map(|(a, b)| a * b).sum()
}

/// Score margin `f_{W1}(h) - f_{W0}(h)`: positive means class 1 wins.
pub fn margin(scorer: &LinearScorer, h: &[f64]) -> Result<f64> {
    if h.len() != scorer.dim() {
        return Err(Error::invalid(format!(
            "feature vector has {} entries, scorer expects {}",
            h.len(),
            scorer.dim()
        )));
    }
    Ok(dot(&scorer.w1, h) - dot(&scorer.w0, h))
}

/// Margins for a whole feature matrix.
pub fn margins(scorer: &LinearScorer, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    features.iter().map(|h| margin(scorer, h)).collect()
}

/// Hinge loss `(1 + score_of_wrong_class - score_of_true_class)_+` for
/// true class `y` given the two class scores.
pub fn hinge_loss(y: u8, alpha0: f64, alpha1: f64) -> f64 {
    assert!(y <= 1, "class label must be 0 or 1");
    let raw = if y == 1 { 1.0 + alpha0 - alpha1 } else { 1.0 + alpha1 - alpha0 };
    raw.max(0.0)
}

/// Two-Gaussian model of the margin distribution. Component 0 is the
/// low-margin class: the constructor swaps means and deviations when
/// needed so `mu0 <= mu1` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreGmm {
    pub mu0: f64,
    pub sigma0: f64,
    pub mu1: f64,
    pub sigma1: f64,
    pub prior0: f64,
    pub prior1: f64,
}

impl ScoreGmm {
    pub fn new(
        mu0: f64,
        sigma0: f64,
        mu1: f64,
        sigma1: f64,
        prior0: f64,
        prior1: f64,
    ) -> Result<ScoreGmm> {
        for v in [mu0, sigma0, mu1, sigma1, prior0, prior1] {
            if !v.is_finite() {
                return Err(Error::invalid("non-finite mixture parameter"));
            }
        }
        if sigma0 <= 0.0 || sigma1 <= 0.0 {
            return Err(Error::invalid("deviations must be positive"));
        }
        if !(0.0..=1.0).contains(&prior0) || (prior0 + prior1 - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("priors must lie in [0, 1] and sum to 1"));
        }
        let (mu0, sigma0, mu1, sigma1) =
            if mu0 <= mu1 { (mu0, sigma0, mu1, sigma1) } else { (mu1, sigma1, mu0, sigma0) };
        Ok(ScoreGmm { mu0, sigma0, mu1, sigma1, prior0, prior1 })
    }
}

/// Expectation-maximization settings for the margin mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once the log-likelihood gain drops below this.
    pub tol: f64,
    pub sigma_floor: f64,
}

impl Default for EmConfig {
    fn default() -> EmConfig {
        EmConfig { max_iters: 200, tol: 1e-8, sigma_floor: 1e-3 }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::config("em max_iters must be positive"));
        }
        if !(self.tol > 0.0) || !(self.sigma_floor > 0.0) {
            return Err(Error::config("em tol and sigma_floor must be positive"));
        }
        Ok(())
    }
}

/// Everything the tuner needs: fixed class priors, the probe step, the
/// iteration budget, and settings for the inner EM and the Monte-Carlo
/// cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskConfig {
    pub prior0: f64,
    pub prior1: f64,
    /// Finite-difference probe step.
    pub delta: f64,
    pub iterations: usize,
    /// Stop once accepted improvements fall below this.
    pub tol: f64,
    pub em: EmConfig,
    pub mc_samples: usize,
}

impl Default for RiskConfig {
    fn default() -> RiskConfig {
        RiskConfig {
            prior0: 0.01,
            prior1: 0.99,
            delta: 0.1,
            iterations: 200,
            tol: 1e-6,
            em: EmConfig::default(),
            mc_samples: 100_000,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prior0) || (self.prior0 + self.prior1 - 1.0).abs() > 1e-9 {
            return Err(Error::config("priors must lie in [0, 1] and sum to 1"));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::config("delta must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::config("tol must be non-negative"));
        }
        self.em.validate()
    }
}

/// A fitted mixture plus fit diagnostics.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub gmm: ScoreGmm,
    /// Log-likelihood after each iteration; non-decreasing.
    pub log_likelihood: Vec<f64>,
    /// Whether the tolerance (rather than the iteration cap) stopped EM.
    pub converged: bool,
    /// Set when the data had no spread and the deviation floor did all the
    /// work.
    pub degenerate: bool,
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

fn normal_log_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -LN_SQRT_2PI - sigma.ln() - 0.5 * z * z
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fits the two-component mixture by EM with the class priors held fixed.
/// Initialization splits the sorted margins at the prior-0 quantile, so
/// the fit is deterministic.
pub fn fit_score_gmm(
    margins: &[f64],
    prior0: f64,
    prior1: f64,
    em: &EmConfig,
) -> Result<GmmFit> {
    em.validate()?;
    if !(0.0..=1.0).contains(&prior0) || (prior0 + prior1 - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("priors must lie in [0, 1] and sum to 1"));
    }
    if margins.len() < 2 {
        return Err(Error::invalid("mixture fit needs at least two margins"));
    }
    if margins.iter().any(|m| !m.is_finite()) {
        return Err(Error::invalid("non-finite margin"));
    }
    let mut sorted = margins.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let degenerate = sorted[0] == sorted[n - 1];

    let split = ((prior0 * n as f64).round() as usize).clamp(1, n - 1);
    let (mut mu0, sd0) = mean_and_sd(&sorted[..split]);
    let (mut mu1, sd1) = mean_and_sd(&sorted[split..]);
    let mut sigma0 = sd0.max(em.sigma_floor);
    let mut sigma1 = sd1.max(em.sigma_floor);

    let log_p0 = if prior0 > 0.0 { prior0.ln() } else { f64::NEG_INFINITY };
    let log_p1 = if prior1 > 0.0 { prior1.ln() } else { f64::NEG_INFINITY };
    let mut log_likelihood = Vec::new();
    let mut converged = false;
    let mut resp0 = vec![0.0; n];

    for _ in 0..em.max_iters {
        let mut ll = 0.0;
        for (i, &x) in sorted.iter().enumerate() {
            let lw0 = log_p0 + normal_log_pdf(x, mu0, sigma0);
            let lw1 = log_p1 + normal_log_pdf(x, mu1, sigma1);
            let top = lw0.max(lw1);
            let log_sum = top + ((lw0 - top).exp() + (lw1 - top).exp()).ln();
            ll += log_sum;
            resp0[i] = (lw0 - log_sum).exp();
        }
        let gain = log_likelihood.last().map(|prev| ll - prev);
        log_likelihood.push(ll);
        if let Some(gain) = gain {
            if gain < em.tol {
                converged = true;
                break;
            }
        }
        let s0: f64 = resp0.iter().sum();
        let s1 = n as f64 - s0;
        if s0 > 1e-12 {
            mu0 = sorted.iter().zip(&resp0).map(|(x, r)| x * r).sum::<f64>() / s0;
            let var = sorted.iter().zip(&resp0).map(|(x, r)| r * (x - mu0) * (x - mu0)).sum::<f64>() / s0;
            sigma0 = var.sqrt().max(em.sigma_floor);
        }
        if s1 > 1e-12 {
            mu1 = sorted.iter().zip(&resp0).map(|(x, r)| x * (1.0 - r)).sum::<f64>() / s1;
            let var = sorted
                .iter()
                .zip(&resp0)
                .map(|(x, r)| (1.0 - r) * (x - mu1) * (x - mu1))
                .sum::<f64>()
                / s1;
            sigma1 = var.sqrt().max(em.sigma_floor);
        }
    }

    let gmm = ScoreGmm::new(mu0, sigma0, mu1, sigma1, prior0, prior1)?;
    Ok(GmmFit { gmm, log_likelihood, converged, degenerate })
}

/// `E[(c - X)_+]` for `X ~ N(mu, sigma)`.
fn expected_shortfall_below(c: f64, mu: f64, sigma: f64) -> f64 {
    let z = (c - mu) / sigma;
    (c - mu) * normal_cdf(z) + sigma * normal_pdf(z)
}

/// `E[(X - c)_+]` for `X ~ N(mu, sigma)`.
fn expected_excess_above(c: f64, mu: f64, sigma: f64) -> f64 {
    let z = (mu - c) / sigma;
    (mu - c) * normal_cdf(z) + sigma * normal_pdf(z)
}

/// Expected hinge risk of the mixture in closed form: class 1 pays
/// `(1 - m)_+`, class 0 pays `(1 + m)_+`, each under its own Gaussian.
pub fn estimate_risk(gmm: &ScoreGmm) -> f64 {
    gmm.prior1 * expected_shortfall_below(1.0, gmm.mu1, gmm.sigma1)
        + gmm.prior0 * expected_excess_above(-1.0, gmm.mu0, gmm.sigma0)
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Monte-Carlo estimate of the same risk; the slow cross-check for the
/// closed form.
pub fn estimate_risk_mc(gmm: &ScoreGmm, n_samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..n_samples {
        let class1 = rng.gen::<f64>() < gmm.prior1;
        let (mu, sigma) = if class1 { (gmm.mu1, gmm.sigma1) } else { (gmm.mu0, gmm.sigma0) };
        let m = mu + sigma * standard_normal(&mut rng);
        total += if class1 { (1.0 - m).max(0.0) } else { (1.0 + m).max(0.0) };
    }
    total / n_samples as f64
}

/// Sample skewness of a data set; reported as a mixture-shape diagnostic.
pub fn sample_skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// One tuning iteration as recorded in the trace; `risk` is the estimate
/// held after the iteration, so the sequence never increases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuneStep {
    pub iteration: usize,
    pub coordinate: usize,
    pub risk: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub scorer: LinearScorer,
    pub initial_risk: f64,
    pub final_risk: f64,
    pub trace: Vec<TuneStep>,
}

fn coord_mut(scorer: &mut LinearScorer, dim: usize, coordinate: usize) -> &mut f64 {
    if coordinate < dim {
        &mut scorer.w0[coordinate]
    } else {
        &mut scorer.w1[coordinate - dim]
    }
}

fn risk_of(scorer: &LinearScorer, features: &[Vec<f64>], cfg: &RiskConfig) -> Result<f64> {
    let ms = margins(scorer, features)?;
    let fit = fit_score_gmm(&ms, cfg.prior0, cfg.prior1, &cfg.em)?;
    Ok(estimate_risk(&fit.gmm))
}

/// Coordinate descent on the expected risk. Each iteration probes one
/// randomly chosen weight with `delta`, forms a finite-difference
/// gradient, and takes a fixed step `0.1 * delta` against it; steps that
/// do not lower the risk are reverted. Stops when the budget runs out or
/// two whole sweeps pass without material improvement.
pub fn tune_weights(
    scorer: &LinearScorer,
    features: &[Vec<f64>],
    cfg: &RiskConfig,
    seed: u64,
) -> Result<TuneResult> {
    cfg.validate()?;
    if features.is_empty() {
        return Err(Error::invalid("no unlabeled features to tune on"));
    }
    let dim = scorer.dim();
    let n_coords = 2 * dim;
    let mut current = scorer.clone();
    let mut current_risk = risk_of(&current, features, cfg)?;
    let initial_risk = current_risk;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Vec::new();
    let mut stall = 0usize;

    for iteration in 0..cfg.iterations {
        let coordinate = rng.gen_range(0..n_coords);

        let mut probe = current.clone();
        *coord_mut(&mut probe, dim, coordinate) += cfg.delta;
        let probe_risk = risk_of(&probe, features, cfg)?;
        let gradient = (probe_risk - current_risk) / cfg.delta;

        let mut accepted = false;
        if gradient != 0.0 && gradient.is_finite() {
            let mut candidate = current.clone();
            *coord_mut(&mut candidate, dim, coordinate) -= 0.1 * cfg.delta * gradient.signum();
            let candidate_risk = risk_of(&candidate, features, cfg)?;
            if candidate_risk < current_risk {
                let improvement = current_risk - candidate_risk;
                current = candidate;
                current_risk = candidate_risk;
                accepted = true;
                if improvement >= cfg.tol {
                    stall = 0;
                } else {
                    stall += 1;
                }
            } else {
                stall += 1;
            }
        } else {
            stall += 1;
        }
        trace.push(TuneStep { iteration, coordinate, risk: current_risk, accepted });
        if stall >= 2 * n_coords {
            break;
        }
    }
    Ok(TuneResult { scorer: current, initial_risk, final_risk: current_risk, trace })
}
