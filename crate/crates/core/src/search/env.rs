use super::{Action, Rollout, SearchConfig, SearchEnv};
use crate::calibrate::tokens_confidence;
use crate::harness::{extract_diff, FileDiff, FileOp, Patch, PatchEvaluator};
use crate::policy::{generate, tokens_in_range, GenRequest, GenResponse, GenerationBackend};

/// First hunk of the diff in `answer`, rendered as a one-hunk patch, with the
/// byte range of its header and body lines within `answer` when they can be
/// located there.
pub fn first_hunk(answer: &str) -> Option<(String, Option<(usize, usize)>)> {
    let diff = extract_diff(answer)?;
    let patch = Patch::parse(&diff).ok()?;
    let section = patch.files.iter().find(|f| !f.hunks.is_empty())?;
    let hunk = section.hunks[0].clone();
    let body_lines = hunk.lines.len();
    let single = Patch::from_files(vec![FileDiff {
        path: section.path.clone(),
        op: section.op,
        hunks: vec![hunk],
    }]);
    let header_pos = answer.find(&format!("{}\n", section.path)).unwrap_or(0);
    let range = answer[header_pos..].find("\n@@").map(|rel| {
        let start = header_pos + rel + 1;
        let mut end = start;
        for (i, line) in answer[start..].split_inclusive('\n').enumerate() {
            if i > body_lines {
                break;
            }
            end += line.len();
        }
        (start, end)
    });
    Some((single.diff_text, range))
}

/// Combines the hunks of `actions` and `extra` into one canonical patch.
/// Hunks on the same modified file share a section ordered by position;
/// exact duplicates are dropped; new-side line numbers are recomputed.
pub fn assemble_patch(actions: &[Action], extra: &[FileDiff]) -> String {
    let mut sections: Vec<FileDiff> = Vec::new();
    let parsed = actions
        .iter()
        .filter_map(|a| Patch::parse(&a.edit_text).ok())
        .flat_map(|p| p.files)
        .chain(extra.iter().cloned());
    for f in parsed {
        let slot = sections
            .iter_mut()
            .find(|s| s.path == f.path && s.op == FileOp::Modify && f.op == FileOp::Modify);
        match slot {
            Some(s) => {
                for h in f.hunks {
                    if !s.hunks.contains(&h) {
                        s.hunks.push(h);
                    }
                }
            }
            None => {
                if !sections.contains(&f) {
                    sections.push(f);
                }
            }
        }
    }
    for s in &mut sections {
        s.hunks.sort_by_key(|h| (h.old_start, h.old_len));
    }
    sections.retain(|s| !s.hunks.is_empty());
    if sections.is_empty() {
        return String::new();
    }
    Patch::from_files(sections).renumbered().diff_text
}

/// Search environment backed by a generation model and a patch evaluator.
pub struct PatchEnv<'a> {
    pub backend: &'a dyn GenerationBackend,
    pub evaluator: &'a dyn PatchEvaluator,
    /// Rendered issue context and edit locations.
    pub context: String,
    pub cfg: SearchConfig,
    requests: u64,
}

impl<'a> PatchEnv<'a> {
    pub fn new(
        backend: &'a dyn GenerationBackend,
        evaluator: &'a dyn PatchEvaluator,
        context: impl Into<String>,
        cfg: SearchConfig,
    ) -> Self {
        PatchEnv {
            backend,
            evaluator,
            context: context.into(),
            cfg,
            requests: 0,
        }
    }

    fn request(
        &mut self,
        prompt: String,
        temperature: f64,
        max_units: usize,
        logprobs: bool,
    ) -> GenResponse {
        let mut req = GenRequest::new(prompt, self.cfg.mode);
        req.temperature = temperature;
        req.top_p = self.cfg.top_p;
        req.max_units = max_units;
        req.want_logprobs = logprobs;
        req.seed = Some(self.cfg.seed.wrapping_add(self.requests));
        self.requests += 1;
        generate(&req, self.backend)
    }

    fn partial(state: &[Action]) -> String {
        let p = assemble_patch(state, &[]);
        if p.is_empty() {
            "(empty)\n".into()
        } else {
            p
        }
    }
}

impl SearchEnv for PatchEnv<'_> {
    fn expand(&mut self, state: &[Action], k: usize) -> Vec<Action> {
        let prompt = format!(
            "{}\nPatch so far:\n{}\nWrite the next single edit as one unified diff hunk against the original files.\n",
            self.context,
            Self::partial(state)
        );
        let mut samples: Vec<(String, Option<f64>, Option<f64>)> = Vec::new();
        let mut all_scored = true;
        for _ in 0..k {
            let resp = self.request(
                prompt.clone(),
                self.cfg.temperature,
                self.cfg.simulation_budget,
                true,
            );
            if resp.is_error() {
                continue;
            }
            let Some((text, range)) = first_hunk(&resp.answer) else {
                continue;
            };
            let hunk_tokens = match (&resp.tokens, range) {
                (Some(toks), Some((s, e))) => Some(tokens_in_range(
                    toks,
                    resp.answer_offset + s,
                    resp.answer_offset + e,
                )),
                _ => None,
            };
            let score = hunk_tokens
                .filter(|t| !t.is_empty())
                .map(|t| t.iter().map(|x| x.logprob).sum::<f64>());
            let confidence = hunk_tokens.and_then(|t| tokens_confidence(t, 1.0).ok());
            all_scored &= score.is_some();
            samples.push((text, score, confidence));
        }
        if samples.is_empty() {
            return Vec::new();
        }
        let priors: Vec<f64> = if all_scored {
            let scores: Vec<f64> = samples.iter().map(|s| s.1.unwrap_or(0.0)).collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let total: f64 = weights.iter().sum();
            weights.iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / k as f64; samples.len()]
        };
        samples
            .into_iter()
            .zip(priors)
            .map(|((edit_text, _, confidence), prior)| Action {
                edit_text,
                prior,
                confidence,
            })
            .collect()
    }

    fn simulate(&mut self, state: &[Action]) -> Rollout {
        let prompt = format!(
            "{}\nPatch so far:\n{}\nComplete the fix. Reply with the remaining hunks as a unified diff, or with nothing if the patch is complete.\n",
            self.context,
            Self::partial(state)
        );
        let resp = self.request(prompt, 0.0, self.cfg.simulation_budget, false);
        if resp.is_error() {
            return Rollout::failed();
        }
        let extra = extract_diff(&resp.answer)
            .and_then(|d| Patch::parse(&d).ok())
            .map(|p| p.files)
            .unwrap_or_default();
        let patch = assemble_patch(state, &extra);
        if patch.is_empty() {
            return Rollout::failed();
        }
        let eval = self.evaluator.evaluate(&patch);
        Rollout {
            reward: eval.reward(),
            tier: eval.tier(),
            patch,
        }
    }
}
