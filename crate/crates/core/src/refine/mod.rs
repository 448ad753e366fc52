//! Critique-and-revise loop driven by execution feedback.

use serde::{Deserialize, Serialize};

use crate::calibrate::tokens_confidence;
use crate::harness::{extract_diff, Evaluation, Patch, PatchEvaluator, Tier};
use crate::policy::{generate, tokens_in_range, GenRequest, GenResponse, GenerationBackend, Mode};
use crate::text;

/// Confidence assumed for a patch whose tokens carry no logprobs.
pub const DEFAULT_CONFIDENCE: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum RefineError {
    #[error("quality weights must be non-negative and sum to 1, got {0:?}")]
    Weights([f64; 3]),
    #[error("confidence must be in [0, 1], got {0}")]
    Confidence(f64),
    #[error("history is empty")]
    EmptyHistory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityWeights {
    pub apply: f64,
    pub tests: f64,
    pub conf: f64,
}

impl Default for QualityWeights {
    fn default() -> Self {
        QualityWeights {
            apply: 0.2,
            tests: 0.5,
            conf: 0.3,
        }
    }
}

impl QualityWeights {
    pub fn validate(&self) -> Result<(), RefineError> {
        let w = [self.apply, self.tests, self.conf];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0))
            || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(RefineError::Weights(w));
        }
        Ok(())
    }
}

/// `w.apply * [applies] + w.tests * passed / total + w.conf * confidence`.
/// An empty test set contributes 0 to the test term.
pub fn quality_score(
    applies: bool,
    passed: usize,
    total: usize,
    confidence: f64,
    weights: &QualityWeights,
) -> Result<f64, RefineError> {
    weights.validate()?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(RefineError::Confidence(confidence));
    }
    let tests = if total == 0 {
        tracing::warn!("no tests ran; test term of quality is 0");
        0.0
    } else {
        passed as f64 / total as f64
    };
    let apply = if applies { 1.0 } else { 0.0 };
    Ok(weights.apply * apply + weights.tests * tests + weights.conf * confidence)
}

fn evaluation_quality(
    eval: &Evaluation,
    confidence: f64,
    weights: &QualityWeights,
) -> Result<f64, RefineError> {
    let (passed, total) = eval
        .result
        .as_ref()
        .map_or((0, 0), |r| (r.passed(), r.total()));
    quality_score(eval.applied, passed, total, confidence, weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementState {
    pub iteration: usize,
    pub patch: String,
    pub tier: Tier,
    pub pass_fraction: Option<f64>,
    /// Execution feedback shown to the model for the next step.
    pub feedback: String,
    /// Critique that produced this patch; none for the starting patch.
    pub critique: Option<String>,
    /// Set when the reply that should have produced this patch had no usable
    /// diff and the previous patch was kept.
    pub kept_previous: bool,
    pub confidence: f64,
    pub quality: f64,
}

/// Renders an evaluation as feedback text.
pub fn render_feedback(eval: &Evaluation) -> String {
    let mut out = format!(
        "tier: {}\n",
        serde_json::to_string(&eval.tier())
            .unwrap_or_default()
            .trim_matches('"')
    );
    if let Some(r) = &eval.result {
        out.push_str(&format!("tests passed: {}/{}\n", r.passed(), r.total()));
    }
    for d in &eval.diagnostics {
        out.push_str(d);
        out.push('\n');
    }
    out
}

/// True when the latest state passes every test, the iteration budget is
/// spent, or quality rose by no more than `epsilon` over the previous state.
pub fn should_stop(
    history: &[RefinementState],
    max_iter: usize,
    epsilon: f64,
) -> Result<bool, RefineError> {
    let latest = history.last().ok_or(RefineError::EmptyHistory)?;
    if latest.tier == Tier::FullPass || latest.iteration >= max_iter {
        return Ok(true);
    }
    Ok(history.len() >= 2 && latest.quality <= history[history.len() - 2].quality + epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineConfig {
    pub weights: QualityWeights,
    pub epsilon: f64,
    pub max_iter: usize,
    pub mode: Mode,
    /// Temperature applied to logprobs before computing confidence.
    pub calibration_temperature: f64,
    pub max_units: usize,
    pub seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            weights: QualityWeights::default(),
            epsilon: 0.01,
            max_iter: 3,
            mode: Mode::Thinking,
            calibration_temperature: 1.0,
            max_units: 1024,
            seed: 0,
        }
    }
}

/// Result of one critique-and-revise call.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub critique: Option<String>,
    pub patch: String,
    pub kept_previous: bool,
    pub confidence: f64,
}

/// Mean span confidence over the added lines of the diff found in `resp`,
/// or [`DEFAULT_CONFIDENCE`] without logprobs.
pub fn added_lines_confidence(resp: &GenResponse, temperature: f64) -> f64 {
    let Some(tokens) = &resp.tokens else {
        return DEFAULT_CONFIDENCE;
    };
    let mut offset = 0;
    let mut spans = Vec::new();
    for line in resp.answer.split_inclusive('\n') {
        if line.starts_with('+') && !line.starts_with("+++") {
            let start = resp.answer_offset + offset;
            let span = tokens_in_range(tokens, start, start + line.len());
            if let Ok(c) = tokens_confidence(span, temperature) {
                spans.push(c);
            }
        }
        offset += line.len();
    }
    if spans.is_empty() {
        DEFAULT_CONFIDENCE
    } else {
        spans.iter().sum::<f64>() / spans.len() as f64
    }
}

/// Asks the model to critique `state` and produce a revised patch. Returns
/// `None` when the backend fails.
pub fn refine_step(
    issue: &str,
    state: &RefinementState,
    backend: &dyn GenerationBackend,
    cfg: &RefineConfig,
) -> Option<StepOutput> {
    let prompt = format!(
        "Issue:\n{issue}\n\nCurrent patch:\n{}\nExecution feedback:\n{}\nExplain what is wrong, then reply with a corrected unified diff.\n",
        state.patch, state.feedback
    );
    let mut req = GenRequest::new(prompt, cfg.mode);
    req.max_units = cfg.max_units;
    req.want_logprobs = true;
    req.seed = Some(cfg.seed.wrapping_add(state.iteration as u64));
    let resp = generate(&req, backend);
    if resp.is_error() {
        return None;
    }
    let revised =
        extract_diff(&resp.answer).filter(|d| Patch::parse(d).is_ok_and(|p| !p.is_empty()));
    Some(match revised {
        Some(d) => StepOutput {
            critique: resp.reasoning.clone(),
            patch: Patch::parse(&d).map(|p| p.render()).unwrap_or(d),
            kept_previous: false,
            confidence: added_lines_confidence(&resp, cfg.calibration_temperature),
        },
        None => StepOutput {
            critique: resp.reasoning.clone(),
            patch: state.patch.clone(),
            kept_previous: true,
            confidence: state.confidence,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FullPass,
    Budget,
    Plateau,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    /// Highest-quality state, earliest on ties.
    pub best: RefinementState,
    pub history: Vec<RefinementState>,
    pub stop: StopReason,
}

/// One line of the refinement trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineTraceRecord {
    pub k: usize,
    pub tier: Tier,
    pub pass_fraction: Option<f64>,
    pub quality: f64,
    pub critique_digest: Option<String>,
}

impl RefineOutcome {
    pub fn trace(&self) -> Vec<RefineTraceRecord> {
        self.history
            .iter()
            .map(|s| RefineTraceRecord {
                k: s.iteration,
                tier: s.tier,
                pass_fraction: s.pass_fraction,
                quality: s.quality,
                critique_digest: s.critique.as_deref().map(|c| text::short_digest(c, 12)),
            })
            .collect()
    }
}

fn make_state(
    iteration: usize,
    patch: String,
    critique: Option<String>,
    kept_previous: bool,
    confidence: f64,
    evaluator: &dyn PatchEvaluator,
    weights: &QualityWeights,
) -> Result<RefinementState, RefineError> {
    let eval = evaluator.evaluate(&patch);
    Ok(RefinementState {
        iteration,
        tier: eval.tier(),
        pass_fraction: eval.breakdown.pass_fraction,
        feedback: render_feedback(&eval),
        quality: evaluation_quality(&eval, confidence, weights)?,
        critique,
        kept_previous,
        confidence,
        patch,
    })
}

/// Refines `initial` until [`should_stop`] holds or the backend fails, and
/// returns the best state seen. Each state is evaluated exactly once, so at
/// most `max_iter + 1` evaluations happen.
pub fn run_refinement(
    issue: &str,
    initial: &str,
    initial_confidence: f64,
    evaluator: &dyn PatchEvaluator,
    backend: &dyn GenerationBackend,
    cfg: &RefineConfig,
) -> Result<RefineOutcome, RefineError> {
    cfg.weights.validate()?;
    let mut history = vec![make_state(
        0,
        initial.to_string(),
        None,
        false,
        initial_confidence.clamp(0.0, 1.0),
        evaluator,
        &cfg.weights,
    )?];
    let stop = loop {
        if should_stop(&history, cfg.max_iter, cfg.epsilon)? {
            let latest = history.last().expect("nonempty");
            break if latest.tier == Tier::FullPass {
                StopReason::FullPass
            } else if latest.iteration >= cfg.max_iter {
                StopReason::Budget
            } else {
                StopReason::Plateau
            };
        }
        let current = history.last().expect("nonempty");
        let Some(step) = refine_step(issue, current, backend, cfg) else {
            break StopReason::BackendError;
        };
        let next = make_state(
            current.iteration + 1,
            step.patch,
            step.critique,
            step.kept_previous,
            step.confidence,
            evaluator,
            &cfg.weights,
        )?;
        history.push(next);
    };
    let best = history
        .iter()
        .fold(None::<&RefinementState>, |best, s| match best {
            Some(b) if b.quality >= s.quality => Some(b),
            _ => Some(s),
        })
        .expect("nonempty")
        .clone();
    Ok(RefineOutcome {
        best,
        history,
        stop,
    })
}
