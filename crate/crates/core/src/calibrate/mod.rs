//! Token uncertainty, span confidence, expected calibration error and
//! temperature scaling.
//!
//! Entropies are in nats. Backends only report the top alternatives of each
//! position, so the probability mass they leave out is folded into one
//! pseudo-token; dropping it would bias entropy low.

use serde::{Deserialize, Serialize};

use crate::policy::TokenLogProbs;

const MASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrateError {
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("probabilities sum to {0}, above 1")]
    MassExceedsOne(f64),
    #[error("span is empty")]
    EmptySpan,
    #[error("entropy {0} is negative or not finite")]
    BadEntropy(f64),
    #[error("no predictions")]
    NoPredictions,
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("bin count must be at least 1")]
    NoBins,
    #[error("sample {0} needs at least two scores and a valid correct index")]
    BadSample(usize),
}

/// Truncated next-token distribution plus the mass of everything not listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDistribution {
    pub probs: Vec<(String, f64)>,
    pub tail_mass: f64,
}

impl TokenDistribution {
    pub fn from_probs(probs: Vec<(String, f64)>) -> Result<Self, CalibrateError> {
        let mut total = 0.0;
        for (_, p) in &probs {
            if !(0.0..=1.0).contains(p) {
                return Err(CalibrateError::ProbabilityOutOfRange(*p));
            }
            total += p;
        }
        if total > 1.0 + MASS_TOLERANCE {
            return Err(CalibrateError::MassExceedsOne(total));
        }
        Ok(TokenDistribution {
            probs,
            tail_mass: (1.0 - total).clamp(0.0, 1.0),
        })
    }

    /// From log-probabilities of the listed alternatives.
    pub fn from_logprobs(alternatives: &[(String, f64)]) -> Result<Self, CalibrateError> {
        Self::from_probs(
            alternatives
                .iter()
                .map(|(t, lp)| (t.clone(), lp.exp()))
                .collect(),
        )
    }

    /// Distribution of one generated position. Without alternatives the chosen
    /// token is the only listed entry.
    pub fn from_token(token: &TokenLogProbs) -> Result<Self, CalibrateError> {
        if token.alternatives.is_empty() {
            Self::from_logprobs(&[(token.token.clone(), token.logprob)])
        } else {
            Self::from_logprobs(&token.alternatives)
        }
    }

    /// Rescales by temperature `t`, treating the tail as one token.
    pub fn with_temperature(&self, t: f64) -> Self {
        let scale = |p: f64| if p > 0.0 { p.powf(1.0 / t) } else { 0.0 };
        let z: f64 = self.probs.iter().map(|(_, p)| scale(*p)).sum::<f64>() + scale(self.tail_mass);
        if z <= 0.0 {
            return self.clone();
        }
        TokenDistribution {
            probs: self
                .probs
                .iter()
                .map(|(tok, p)| (tok.clone(), scale(*p) / z))
                .collect(),
            tail_mass: scale(self.tail_mass) / z,
        }
    }

    fn check(&self) -> Result<(), CalibrateError> {
        let mut total = self.tail_mass;
        for (_, p) in &self.probs {
            if !(0.0..=1.0).contains(p) {
                return Err(CalibrateError::ProbabilityOutOfRange(*p));
            }
            total += p;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(CalibrateError::MassExceedsOne(total));
        }
        Ok(())
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats, tail mass counted as a single outcome.
pub fn token_entropy(dist: &TokenDistribution) -> Result<f64, CalibrateError> {
    dist.check()?;
    let h = -(dist.probs.iter().map(|(_, p)| plogp(*p)).sum::<f64>() + plogp(dist.tail_mass));
    Ok(h.max(0.0))
}

/// `exp(-mean entropy)` over a span of positions.
pub fn span_confidence(entropies: &[f64]) -> Result<f64, CalibrateError> {
    if entropies.is_empty() {
        return Err(CalibrateError::EmptySpan);
    }
    if let Some(bad) = entropies
        .iter()
        .find(|h| h.is_nan() || **h < 0.0 || !h.is_finite())
    {
        return Err(CalibrateError::BadEntropy(*bad));
    }
    let mean = entropies.iter().sum::<f64>() / entropies.len() as f64;
    Ok((-mean).exp())
}

/// Span confidence of generated tokens after temperature scaling.
pub fn tokens_confidence(
    tokens: &[TokenLogProbs],
    temperature: f64,
) -> Result<f64, CalibrateError> {
    let entropies = tokens
        .iter()
        .map(|t| token_entropy(&TokenDistribution::from_token(t)?.with_temperature(temperature)))
        .collect::<Result<Vec<_>, _>>()?;
    span_confidence(&entropies)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub accuracy: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub temperature: f64,
    pub bin_count: usize,
    pub bins: Vec<CalibrationBin>,
    pub ece: f64,
}

/// Bin of `confidence` among `bins` equal-width, right-inclusive bins; 0 goes to the first.
fn bin_index(confidence: f64, bins: usize) -> usize {
    let scaled = confidence * bins as f64;
    let idx = (scaled - 1e-9).ceil() as isize - 1;
    idx.clamp(0, bins as isize - 1) as usize
}

/// Per-bin counts, accuracy and mean confidence.
pub fn reliability_bins(
    predictions: &[(f64, bool)],
    bins: usize,
) -> Result<Vec<CalibrationBin>, CalibrateError> {
    if bins == 0 {
        return Err(CalibrateError::NoBins);
    }
    if predictions.is_empty() {
        return Err(CalibrateError::NoPredictions);
    }
    let mut count = vec![0usize; bins];
    let mut correct = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    for &(c, ok) in predictions {
        if !(0.0..=1.0).contains(&c) {
            return Err(CalibrateError::ConfidenceOutOfRange(c));
        }
        let b = bin_index(c, bins);
        count[b] += 1;
        correct[b] += ok as usize;
        conf_sum[b] += c;
    }
    Ok((0..bins)
        .map(|b| {
            let n = count[b];
            CalibrationBin {
                lower: b as f64 / bins as f64,
                upper: (b + 1) as f64 / bins as f64,
                count: n,
                accuracy: if n > 0 {
                    correct[b] as f64 / n as f64
                } else {
                    0.0
                },
                confidence: if n > 0 { conf_sum[b] / n as f64 } else { 0.0 },
            }
        })
        .collect())
}

fn ece_of_bins(bins: &[CalibrationBin]) -> f64 {
    let total: usize = bins.iter().map(|b| b.count).sum();
    bins.iter()
        .filter(|b| b.count > 0)
        .map(|b| b.count as f64 / total as f64 * (b.accuracy - b.confidence).abs())
        .sum()
}

/// Expected calibration error over `bins` equal-width bins.
pub fn ece(predictions: &[(f64, bool)], bins: usize) -> Result<f64, CalibrateError> {
    Ok(ece_of_bins(&reliability_bins(predictions, bins)?))
}

/// Classifier scores for one example and the index of the right class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitSample {
    pub scores: Vec<f64>,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub model: CalibrationModel,
    /// ECE at temperature 1.
    pub ece_before: f64,
}

fn predictions_at(samples: &[LogitSample], t: f64) -> Vec<(f64, bool)> {
    samples
        .iter()
        .map(|s| {
            let max = s.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = s.scores.iter().map(|x| ((x - max) / t).exp()).sum();
            let argmax =
                s.scores
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, x)| if *x > s.scores[best] { i } else { best });
            ((1.0 / z).clamp(0.0, 1.0), argmax == s.correct)
        })
        .collect()
}

/// Picks the temperature in `[0.05, 10]` minimizing ECE of the softmax
/// top-class confidence. ECE is piecewise constant in the temperature, so a
/// 200-point grid on `ln T` locates a bracket that golden-section search
/// (60 steps) then refines. Ties go to the temperature closest to 1, and
/// `T = 1` is always a candidate so the fit never does worse than no scaling.
pub fn fit_temperature(
    samples: &[LogitSample],
    bins: usize,
) -> Result<CalibrationFit, CalibrateError> {
    if bins == 0 {
        return Err(CalibrateError::NoBins);
    }
    if samples.is_empty() {
        return Err(CalibrateError::NoPredictions);
    }
    for (i, s) in samples.iter().enumerate() {
        if s.scores.len() < 2
            || s.correct >= s.scores.len()
            || s.scores.iter().any(|x| !x.is_finite())
        {
            return Err(CalibrateError::BadSample(i));
        }
    }
    let eval = |t: f64| ece(&predictions_at(samples, t), bins).expect("validated input");
    let ece_before = eval(1.0);
    let finish = |t: f64| -> Result<CalibrationFit, CalibrateError> {
        let bins_at = reliability_bins(&predictions_at(samples, t), bins)?;
        Ok(CalibrationFit {
            model: CalibrationModel {
                temperature: t,
                bin_count: bins,
                ece: ece_of_bins(&bins_at),
                bins: bins_at,
            },
            ece_before,
        })
    };

    let degenerate = samples
        .iter()
        .all(|s| s.scores.iter().all(|x| *x == s.scores[0]));
    if degenerate {
        tracing::warn!("all score vectors are constant; temperature has no effect");
        return finish(1.0);
    }

    let mut candidates: Vec<(f64, f64)> = vec![(1.0, ece_before)];
    let (lo, hi) = (0.05f64.ln(), 10f64.ln());
    const GRID: usize = 200;
    let grid: Vec<f64> = (0..GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (GRID - 1) as f64)
        .collect();
    let better = |a: (f64, f64), b: (f64, f64)| {
        a.1 < b.1 || (a.1 == b.1 && (a.0 - 1.0).abs() < (b.0 - 1.0).abs())
    };
    let mut best_grid = 0;
    let mut grid_vals = Vec::with_capacity(GRID);
    for (i, &g) in grid.iter().enumerate() {
        let v = (g.exp(), eval(g.exp()));
        grid_vals.push(v);
        candidates.push(v);
        if better(v, grid_vals[best_grid]) {
            best_grid = i;
        }
    }
    let mut a = grid[best_grid.saturating_sub(1)];
    let mut b = grid[(best_grid + 1).min(GRID - 1)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = eval(c.exp());
    let mut fd = eval(d.exp());
    candidates.push((c.exp(), fc));
    candidates.push((d.exp(), fd));
    for _ in 0..60 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = eval(c.exp());
            candidates.push((c.exp(), fc));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = eval(d.exp());
            candidates.push((d.exp(), fd));
        }
    }
    let best = candidates
        .into_iter()
        .reduce(|acc, v| if better(v, acc) { v } else { acc })
        .expect("candidates are nonempty");
    finish(best.0)
}
