use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use patchtree_core::calibrate::ece;
use patchtree_core::harness::{
    extract_diff, resolve_check, Harness, Patch, PatchEvaluator, SimulatedRunner, SubprocessRunner,
    SuiteSpec, TestRunner, Tier,
};
use patchtree_core::ingest::{
    normalize_issue, pack_context, scan_repository, ContextItem, IssueReport, ItemSource,
    RepoSnapshot, SyntaxIndex, WeightTable,
};
use patchtree_core::localize::{
    build_lexical_index, loc_at_k, propose_edit_locations, rank_functions, score_files,
    EditLocation, LocalizationRecord, LocateConfig, MockEmbedder, ModType, RemoteEmbedder,
};
use patchtree_core::metrics::{
    apply_rate, code_bleu, loc_at_k_rate, patch_new_code, resolve_rate, InstanceOutcome, Rate,
};
use patchtree_core::policy::{
    generate, GenRequest, GenerationBackend, Mode, RemoteBackend, ScriptedBackend,
};
use patchtree_core::refine::{
    added_lines_confidence, run_refinement, RefineTraceRecord, DEFAULT_CONFIDENCE,
};
use patchtree_core::search::{run_search, PatchEnv, TraceRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::*;
use crate::config::{BackendKind, LoadedConfig, RunnerKind};
use crate::instances::{load_instances, select, Instance};

/// Instances that failed in a stage, with the reason.
#[derive(Debug, Default)]
pub struct StageReport {
    pub failures: Vec<(String, String)>,
}

impl StageReport {
    fn merge(&mut self, other: StageReport) {
        self.failures.extend(other.failures);
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTraceLine {
    pub instance_id: String,
    #[serde(flatten)]
    pub record: TraceRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineTraceLine {
    pub instance_id: String,
    #[serde(flatten)]
    pub record: RefineTraceRecord,
}

#[derive(Serialize)]
struct Invocation<'a> {
    seed: u64,
    instances: Vec<&'a str>,
}

pub struct Pipeline {
    pub cfg: LoadedConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub instances: Vec<Instance>,
    remote: Option<Arc<RemoteBackend>>,
}

impl Pipeline {
    /// Loads the instances and prepares the run directory, writing the config
    /// text verbatim into it.
    pub fn open(
        cfg: LoadedConfig,
        out: Option<PathBuf>,
        seed: Option<u64>,
        selector: Option<&str>,
    ) -> Result<Self> {
        let out = out.unwrap_or_else(|| cfg.resolve(&cfg.config.paths.out));
        let seed = seed.unwrap_or(cfg.config.backend.seed);
        let instances = select(
            load_instances(&cfg.resolve(&cfg.config.paths.instances))?,
            selector,
        )?;
        if instances.is_empty() {
            bail!("no instances selected");
        }
        let remote = match cfg.config.backend.kind {
            BackendKind::Remote => Some(Arc::new(
                RemoteBackend::new(cfg.config.backend.remote.clone())
                    .map_err(|e| anyhow!("backend: {e}"))?,
            )),
            BackendKind::Mock => None,
        };
        std::fs::create_dir_all(&out)
            .with_context(|| format!("cannot create {}", out.display()))?;
        std::fs::write(out.join(CONFIG_SNAPSHOT), &cfg.text)?;
        let invocation = Invocation {
            seed,
            instances: instances.iter().map(|i| i.instance_id.as_str()).collect(),
        };
        std::fs::write(
            out.join(INVOCATION),
            serde_json::to_string_pretty(&invocation)? + "\n",
        )?;
        Ok(Pipeline {
            cfg,
            out,
            seed,
            instances,
            remote,
        })
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn map_instances<T: Send>(
        &self,
        f: impl Fn(&Instance) -> Result<T> + Sync,
    ) -> Result<Vec<(String, Result<T>)>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.config.workers)
            .build()?;
        Ok(pool.install(|| {
            self.instances
                .par_iter()
                .map(|i| {
                    let r = f(i);
                    if let Err(e) = &r {
                        tracing::error!("{}: {e:#}", i.instance_id);
                    }
                    (i.instance_id.clone(), r)
                })
                .collect()
        }))
    }

    fn repo_dir(&self, inst: &Instance) -> PathBuf {
        match &inst.repo_dir {
            Some(d) => self.cfg.resolve(d),
            None => self
                .cfg
                .resolve(&self.cfg.config.paths.repos)
                .join(&inst.instance_id),
        }
    }

    fn snapshot(&self, inst: &Instance) -> Result<RepoSnapshot> {
        let (snapshot, warnings) = scan_repository(&self.repo_dir(inst), &self.cfg.config.ingest)?;
        for w in warnings {
            tracing::warn!("{}: skipped {}: {}", inst.instance_id, w.path, w.reason);
        }
        Ok(snapshot)
    }

    fn backend(&self, inst: &Instance, stage: &str) -> Result<Arc<dyn GenerationBackend>> {
        if let Some(r) = &self.remote {
            return Ok(r.clone());
        }
        let b = &self.cfg.config.backend;
        let path = self.cfg.template(&b.script, &inst.instance_id, stage);
        Ok(Arc::new(ScriptedBackend::load(&path, b.exhaustion)?))
    }

    fn harness(&self, inst: &Instance, snapshot: RepoSnapshot) -> Result<Harness> {
        let h = &self.cfg.config.harness;
        let runner: Arc<dyn TestRunner> = match h.runner {
            RunnerKind::Simulator => Arc::new(SimulatedRunner::load(&self.cfg.template(
                &h.simulator_script,
                &inst.instance_id,
                "",
            ))?),
            RunnerKind::Subprocess => Arc::new(SubprocessRunner::new(
                inst.test_command
                    .clone()
                    .unwrap_or_else(|| h.test_command.clone()),
            )),
        };
        let suite = SuiteSpec::new(inst.fail_to_pass.clone(), inst.pass_to_pass.clone());
        Ok(Harness::new(snapshot, suite, runner).with_timeout(self.cfg.config.timeout()))
    }

    pub fn localize(&self) -> Result<StageReport> {
        let results = self.map_instances(|inst| self.localize_one(inst))?;
        let mut report = StageReport::default();
        let mut ranking = Vec::new();
        let mut locations = Vec::new();
        for (id, r) in results {
            match r {
                Ok((recs, loc)) => {
                    ranking.extend(recs);
                    locations.push(loc);
                }
                Err(e) => report.failures.push((id, format!("{e:#}"))),
            }
        }
        write_jsonl(&self.artifact(LOCALIZATION), &ranking)?;
        write_jsonl(&self.artifact(LOCATIONS), &locations)?;
        Ok(report)
    }

    fn localize_one(&self, inst: &Instance) -> Result<(Vec<LocalizationRecord>, LocationsRecord)> {
        let cfg = &self.cfg.config;
        let l = &cfg.localize;
        let snapshot = self.snapshot(inst)?;
        let issue = normalize_issue(&inst.problem_statement);
        let index = build_lexical_index(&snapshot, l.k1, l.b)?;
        let alpha = l.effective_alpha();
        let scores = match (&self.remote, cfg.backend.remote_embeddings) {
            (Some(r), true) => score_files(
                &issue,
                &snapshot,
                &index,
                &RemoteEmbedder { backend: r.clone() },
                alpha,
            ),
            _ => score_files(
                &issue,
                &snapshot,
                &index,
                &MockEmbedder {
                    dim: l.embedding_dim,
                },
                alpha,
            ),
        };
        let records = scores
            .iter()
            .enumerate()
            .map(|(i, s)| LocalizationRecord {
                instance_id: inst.instance_id.clone(),
                rank: i + 1,
                path: s.path.clone(),
                dense: s.dense,
                lexical: s.lexical,
                hybrid: s.hybrid,
            })
            .collect();
        let files: Vec<String> = scores
            .iter()
            .take(l.top_k_files)
            .map(|s| s.path.clone())
            .collect();
        let outlines = SyntaxIndex::build(snapshot.files());
        let ranked = rank_functions(&files, &outlines);
        let backend = self.backend(inst, "localize")?;
        let locate = LocateConfig {
            max_locations: l.max_locations,
            context_units: cfg.ingest.context_units,
            weights: cfg.ingest.weights.clone(),
            mode: cfg.reasoning_mode(),
            seed: Some(self.seed),
        };
        let proposal =
            propose_edit_locations(&issue, &ranked, &snapshot, backend.as_ref(), &locate);
        let functions = ranked
            .iter()
            .map(|d| FunctionRef {
                path: d.path.clone(),
                name: d.def.name.clone(),
                start: d.def.span.start,
                end: d.def.span.end,
            })
            .collect();
        Ok((
            records,
            LocationsRecord {
                instance_id: inst.instance_id.clone(),
                files,
                functions,
                locations: proposal.locations,
                fallback: proposal.fallback,
                attempts: proposal.attempts,
            },
        ))
    }

    pub fn search(&self) -> Result<StageReport> {
        let (locations, _) = read_jsonl::<LocationsRecord>(&self.artifact(LOCATIONS))
            .context("search needs the localize stage output")?;
        let by_id: BTreeMap<&str, &LocationsRecord> = locations
            .iter()
            .map(|l| (l.instance_id.as_str(), l))
            .collect();
        let results = self.map_instances(|inst| {
            let loc = by_id
                .get(inst.instance_id.as_str())
                .ok_or_else(|| anyhow!("no edit locations recorded"))?;
            self.search_one(inst, loc)
        })?;
        let mut report = StageReport::default();
        let mut trace = Vec::new();
        let mut predictions = Vec::new();
        for (id, r) in results {
            match r {
                Ok((t, p)) => {
                    trace.extend(t);
                    predictions.push(p);
                }
                Err(e) => report.failures.push((id, format!("{e:#}"))),
            }
        }
        write_jsonl(&self.artifact(SEARCH_TRACE), &trace)?;
        write_jsonl(&self.artifact(PREDICTIONS), &predictions)?;
        Ok(report)
    }

    fn search_one(
        &self,
        inst: &Instance,
        loc: &LocationsRecord,
    ) -> Result<(Vec<SearchTraceLine>, Prediction)> {
        let cfg = &self.cfg.config;
        let snapshot = self.snapshot(inst)?;
        let issue = normalize_issue(&inst.problem_statement);
        let context = repair_context(
            &issue,
            &snapshot,
            &loc.locations,
            &cfg.ingest.weights,
            cfg.search.context_units,
        );
        let harness = self.harness(inst, snapshot)?;
        let backend = self.backend(inst, "search")?;
        let line = |record: TraceRecord| SearchTraceLine {
            instance_id: inst.instance_id.clone(),
            record,
        };
        if cfg.search.enabled {
            let scfg = cfg.search_config(self.seed);
            let mut env = PatchEnv::new(backend.as_ref(), &harness, context, scfg.clone());
            let outcome = run_search(&mut env, &scfg)?;
            let trace = outcome.trace.iter().cloned().map(line).collect();
            let (patch, tier, reward, confidence) = match &outcome.best {
                Some(b) => {
                    let confs: Vec<f64> = b.actions.iter().filter_map(|a| a.confidence).collect();
                    let conf = if confs.is_empty() {
                        DEFAULT_CONFIDENCE
                    } else {
                        confs.iter().sum::<f64>() / confs.len() as f64
                    };
                    (b.patch.clone(), b.tier, b.reward, conf)
                }
                None => (String::new(), Tier::Invalid, 0.0, 0.0),
            };
            return Ok((
                trace,
                self.prediction(inst, patch, "search", tier, reward, confidence),
            ));
        }

        let mut req = GenRequest::new(
            format!("{context}\nWrite a unified diff that fixes the issue.\n"),
            Mode::NonThinking,
        );
        req.temperature = 0.0;
        req.max_units = cfg.search.simulation_budget;
        req.want_logprobs = true;
        req.seed = Some(self.seed);
        let resp = generate(&req, backend.as_ref());
        let patch = extract_diff(&resp.answer)
            .and_then(|d| Patch::parse(&d).ok())
            .filter(|p| !p.is_empty())
            .map(|p| p.render())
            .unwrap_or_default();
        let (tier, reward) = if patch.is_empty() {
            (Tier::Invalid, 0.0)
        } else {
            let e = harness.evaluate(&patch);
            (e.tier(), e.reward())
        };
        let confidence = added_lines_confidence(&resp, cfg.calibrate.temperature);
        let trace = vec![line(TraceRecord {
            iteration: 1,
            depth: 0,
            action: String::new(),
            path: Vec::new(),
            tier,
            reward,
            best_so_far: reward,
        })];
        Ok((
            trace,
            self.prediction(inst, patch, "direct", tier, reward, confidence),
        ))
    }

    fn prediction(
        &self,
        inst: &Instance,
        patch: String,
        stage: &str,
        tier: Tier,
        reward: f64,
        confidence: f64,
    ) -> Prediction {
        Prediction {
            instance_id: inst.instance_id.clone(),
            model_name_or_path: self.cfg.config.backend.model_name.clone(),
            model_patch: patch,
            metadata: PredictionMeta {
                stage: stage.into(),
                tier,
                reward,
                confidence,
                quality: None,
                stop: None,
            },
        }
    }

    pub fn refine(&self) -> Result<StageReport> {
        let (predictions, _) = read_jsonl::<Prediction>(&self.artifact(PREDICTIONS))
            .context("refine needs the search stage output")?;
        let by_id: BTreeMap<&str, &Prediction> = predictions
            .iter()
            .map(|p| (p.instance_id.as_str(), p))
            .collect();
        let results = self.map_instances(|inst| {
            let p = by_id
                .get(inst.instance_id.as_str())
                .ok_or_else(|| anyhow!("no prediction recorded"))?;
            self.refine_one(inst, p)
        })?;
        let mut report = StageReport::default();
        let mut trace = Vec::new();
        let mut refined = Vec::new();
        for (id, r) in results {
            match r {
                Ok((t, p)) => {
                    trace.extend(t);
                    refined.push(p);
                }
                Err(e) => report.failures.push((id, format!("{e:#}"))),
            }
        }
        write_jsonl(&self.artifact(REFINE_TRACE), &trace)?;
        write_jsonl(&self.artifact(REFINED_PREDICTIONS), &refined)?;
        Ok(report)
    }

    fn refine_one(
        &self,
        inst: &Instance,
        pred: &Prediction,
    ) -> Result<(Vec<RefineTraceLine>, Prediction)> {
        let cfg = &self.cfg.config;
        if !cfg.refine.enabled {
            return Ok((Vec::new(), pred.clone()));
        }
        let snapshot = self.snapshot(inst)?;
        let issue = normalize_issue(&inst.problem_statement);
        let harness = self.harness(inst, snapshot)?;
        let backend = self.backend(inst, "refine")?;
        let outcome = run_refinement(
            &issue.normalized,
            &pred.model_patch,
            pred.metadata.confidence,
            &harness,
            backend.as_ref(),
            &cfg.refine_config(self.seed),
        )?;
        let trace = outcome
            .trace()
            .into_iter()
            .map(|record| RefineTraceLine {
                instance_id: inst.instance_id.clone(),
                record,
            })
            .collect();
        let best = &outcome.best;
        let reward = harness.evaluate(&best.patch).reward();
        let mut p = self.prediction(
            inst,
            best.patch.clone(),
            "refine",
            best.tier,
            reward,
            best.confidence,
        );
        p.metadata.quality = Some(best.quality);
        p.metadata.stop = Some(
            serde_json::to_value(outcome.stop)?
                .as_str()
                .unwrap_or_default()
                .to_string(),
        );
        Ok((trace, p))
    }

    pub fn evaluate(&self) -> Result<StageReport> {
        let source = [REFINED_PREDICTIONS, PREDICTIONS]
            .into_iter()
            .map(|n| self.artifact(n))
            .find(|p| p.exists())
            .ok_or_else(|| anyhow!("no predictions file in {}", self.out.display()))?;
        let (predictions, _) = read_jsonl::<Prediction>(&source)?;
        if predictions.is_empty() {
            bail!("{} holds no predictions", source.display());
        }
        let by_id: BTreeMap<&str, &Prediction> = predictions
            .iter()
            .map(|p| (p.instance_id.as_str(), p))
            .collect();
        let ranking_path = self.artifact(LOCALIZATION);
        let ranking: Vec<LocalizationRecord> = if ranking_path.exists() {
            read_jsonl(&ranking_path)?.0
        } else {
            tracing::warn!("no localization report; Loc@k will count as misses");
            Vec::new()
        };
        let mut ranked_files: BTreeMap<&str, Vec<(usize, &str)>> = BTreeMap::new();
        for r in &ranking {
            ranked_files
                .entry(r.instance_id.as_str())
                .or_default()
                .push((r.rank, r.path.as_str()));
        }

        let results = self.map_instances(|inst| {
            let mut files = ranked_files
                .get(inst.instance_id.as_str())
                .cloned()
                .unwrap_or_default();
            files.sort();
            let predicted = files.into_iter().map(|(_, p)| p.to_string()).collect();
            Ok(self.evaluate_one(
                inst,
                by_id.get(inst.instance_id.as_str()).copied(),
                predicted,
            ))
        })?;
        let mut report = StageReport::default();
        let mut lines = Vec::new();
        for (id, r) in results {
            let rep = r?;
            if let Some(e) = &rep.error {
                report.failures.push((id, e.clone()));
            }
            lines.push(rep);
        }
        let aggregate = self.aggregate(&lines)?;
        let mut records: Vec<EvaluationRecord> =
            lines.into_iter().map(EvaluationRecord::Instance).collect();
        records.push(EvaluationRecord::Aggregate(aggregate));
        write_jsonl(&self.artifact(EVALUATION), &records)?;
        Ok(report)
    }

    fn evaluate_one(
        &self,
        inst: &Instance,
        pred: Option<&Prediction>,
        predicted_files: Vec<String>,
    ) -> InstanceReport {
        let gold = inst.gold_files();
        let loc = if gold.is_empty() {
            BTreeMap::new()
        } else {
            self.cfg
                .config
                .localize
                .loc_k
                .iter()
                .map(|&k| {
                    (
                        k.to_string(),
                        loc_at_k(&predicted_files, &gold, k).unwrap_or(false),
                    )
                })
                .collect()
        };
        let mut rep = InstanceReport {
            instance_id: inst.instance_id.clone(),
            patch_present: false,
            applied: false,
            resolved: false,
            tier: Tier::Invalid,
            reward: 0.0,
            confidence: 0.0,
            predicted_files,
            gold_files: gold.into_iter().collect(),
            loc,
            codebleu: None,
            error: None,
        };
        let Some(pred) = pred else {
            rep.error = Some("no prediction".into());
            return rep;
        };
        rep.confidence = pred.metadata.confidence;
        let patch = &pred.model_patch;
        rep.patch_present = !patch.trim().is_empty();
        if let Some(reference) = &inst.patch {
            let (c, r) = (patch_new_code(patch), patch_new_code(reference));
            if !c.trim().is_empty() && !r.trim().is_empty() {
                rep.codebleu = Some(code_bleu(&c, &r));
            }
        }
        if !rep.patch_present {
            return rep;
        }
        let checked = (|| -> Result<()> {
            let harness = self.harness(inst, self.snapshot(inst)?)?;
            let eval = harness.evaluate(patch);
            rep.tier = eval.tier();
            rep.reward = eval.reward();
            rep.applied = eval.applied;
            if let Some(after) = &eval.result {
                let before = harness.baseline()?;
                rep.resolved =
                    resolve_check(&before, after, &inst.fail_to_pass, &inst.pass_to_pass)?;
            }
            Ok(())
        })();
        if let Err(e) = checked {
            rep.error = Some(format!("{e:#}"));
        }
        rep
    }

    fn aggregate(&self, lines: &[InstanceReport]) -> Result<Aggregate> {
        let cfg = &self.cfg.config;
        let outcomes: Vec<InstanceOutcome> = lines.iter().map(outcome_of).collect();
        let rate = |r: Rate| RateRecord {
            hits: r.hits,
            total: r.total,
            percent: r.rounded(),
        };
        let with_gold: Vec<InstanceOutcome> = outcomes
            .iter()
            .filter(|o| !o.gold_files.is_empty())
            .cloned()
            .collect();
        let mut loc_at = BTreeMap::new();
        if !with_gold.is_empty() {
            for &k in &cfg.localize.loc_k {
                loc_at.insert(k.to_string(), loc_at_k_rate(&with_gold, k)?);
            }
        }
        let bleus: Vec<f64> = lines
            .iter()
            .filter_map(|l| l.codebleu.map(|c| c.score))
            .collect();
        let calib: Vec<(f64, bool)> = lines
            .iter()
            .filter(|l| l.patch_present)
            .map(|l| (l.confidence, l.resolved))
            .collect();
        Ok(Aggregate {
            instances: lines.len(),
            resolve: rate(resolve_rate(&outcomes)?),
            apply: rate(apply_rate(&outcomes)?),
            loc_at_k: loc_at,
            codebleu: (!bleus.is_empty()).then(|| bleus.iter().sum::<f64>() / bleus.len() as f64),
            ece: if calib.is_empty() {
                None
            } else {
                Some(ece(&calib, cfg.calibrate.bins)?)
            },
            search: cfg.search.enabled,
            refine: cfg.refine.enabled,
            thinking: cfg.thinking.enabled,
            lexical_only: cfg.localize.lexical_only,
        })
    }

    /// Runs every stage in order. A stage that fails fatally stops the run.
    pub fn run_all(&self) -> Result<StageReport> {
        let mut report = self.localize()?;
        report.merge(self.search()?);
        report.merge(self.refine()?);
        report.merge(self.evaluate()?);
        Ok(report)
    }
}

pub fn outcome_of(l: &InstanceReport) -> InstanceOutcome {
    InstanceOutcome {
        instance_id: l.instance_id.clone(),
        patch_present: l.patch_present,
        applied: l.applied,
        resolved: l.resolved,
        predicted_files: l.predicted_files.clone(),
        gold_files: l.gold_files.iter().cloned().collect::<BTreeSet<_>>(),
        candidate_patch: String::new(),
        reference_patch: String::new(),
    }
}

const LOCATION_MARGIN: usize = 3;

fn mod_name(m: ModType) -> &'static str {
    match m {
        ModType::Insert => "insert",
        ModType::Replace => "replace",
        ModType::Delete => "delete",
    }
}

/// Prompt context for patch generation: the issue plus numbered code around
/// each edit location, packed under `budget` whitespace tokens.
pub fn repair_context(
    issue: &IssueReport,
    snapshot: &RepoSnapshot,
    locations: &[EditLocation],
    weights: &WeightTable,
    budget: usize,
) -> String {
    let mut items = vec![ContextItem::new(
        ItemSource::IssueSection,
        issue.normalized.clone(),
        weights.weight(ItemSource::IssueSection),
        1.0,
    )];
    for m in &issue.error_messages {
        items.push(ContextItem::new(
            ItemSource::ErrorMessage,
            m.clone(),
            weights.weight(ItemSource::ErrorMessage),
            1.0,
        ));
    }
    for (rank, l) in locations.iter().enumerate() {
        let Some(file) = snapshot.get(&l.file) else {
            continue;
        };
        let first = l.line_start.saturating_sub(LOCATION_MARGIN).max(1);
        let last = l.line_end + LOCATION_MARGIN;
        let body: String = file
            .content
            .split_inclusive('\n')
            .enumerate()
            .skip(first - 1)
            .take(last + 1 - first)
            .map(|(i, text)| format!("{:>5} {text}", i + 1))
            .collect();
        items.push(ContextItem::new(
            ItemSource::Chunk,
            format!(
                "# {}:{}-{} {}\n{body}",
                l.file,
                l.line_start,
                l.line_end,
                mod_name(l.mod_type)
            ),
            weights.weight(ItemSource::Chunk),
            1.0 / (1.0 + rank as f64),
        ));
    }
    pack_context(&items, budget).render()
}

/// Patch digest as used by simulator scripts.
pub fn digest_file(path: &Path) -> Result<String> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let patch = Patch::parse(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(patchtree_core::harness::patch_digest(&patch))
}
