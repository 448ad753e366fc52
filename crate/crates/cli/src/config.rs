use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use patchtree_core::ingest::IngestConfig;
use patchtree_core::policy::{Exhaustion, Mode, RemoteConfig};
use patchtree_core::refine::{QualityWeights, RefineConfig};
use patchtree_core::search::SearchConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub backend: BackendSection,
    pub ingest: IngestConfig,
    pub localize: LocalizeSection,
    pub search: SearchSection,
    pub refine: RefineSection,
    pub calibrate: CalibrateSection,
    pub harness: HarnessSection,
    pub thinking: ThinkingSection,
    /// Instances processed concurrently.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths::default(),
            backend: BackendSection::default(),
            ingest: IngestConfig::default(),
            localize: LocalizeSection::default(),
            search: SearchSection::default(),
            refine: RefineSection::default(),
            calibrate: CalibrateSection::default(),
            harness: HarnessSection::default(),
            thinking: ThinkingSection::default(),
            workers: 1,
        }
    }
}

/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Directory holding one checkout per instance, named by instance id.
    pub repos: PathBuf,
    /// Line-delimited instance metadata.
    pub instances: PathBuf,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            repos: "repos".into(),
            instances: "instances.jsonl".into(),
            out: "runs/default".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// Script path template for the mock backend; `{instance_id}` and
    /// `{stage}` are substituted.
    pub script: String,
    pub exhaustion: Exhaustion,
    pub seed: u64,
    /// Written into predictions as `model_name_or_path`.
    pub model_name: String,
    /// Use the remote server for file embeddings instead of the local hash embedder.
    pub remote_embeddings: bool,
    pub remote: RemoteConfig,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: BackendKind::Mock,
            script: "scripts/{instance_id}.{stage}.jsonl".into(),
            exhaustion: Exhaustion::Wrap,
            seed: 0,
            model_name: "patchtree".into(),
            remote_embeddings: false,
            remote: RemoteConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizeSection {
    pub alpha: f64,
    pub k1: f64,
    pub b: f64,
    pub top_k_files: usize,
    pub max_locations: usize,
    /// Ablation: rank files by BM25 alone.
    pub lexical_only: bool,
    pub embedding_dim: usize,
    /// Cutoffs reported as Loc@k.
    pub loc_k: Vec<usize>,
}

impl Default for LocalizeSection {
    fn default() -> Self {
        LocalizeSection {
            alpha: 0.7,
            k1: 1.2,
            b: 0.75,
            top_k_files: 5,
            max_locations: 5,
            lexical_only: false,
            embedding_dim: 256,
            loc_k: vec![1, 3, 5],
        }
    }
}

impl LocalizeSection {
    pub fn effective_alpha(&self) -> f64 {
        if self.lexical_only {
            0.0
        } else {
            self.alpha
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    /// When off, one greedy generation replaces the tree search.
    pub enabled: bool,
    pub c1: f64,
    pub beta: f64,
    pub expansions: usize,
    pub iterations: usize,
    pub max_depth: usize,
    pub simulation_budget: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub context_units: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        let s = SearchConfig::default();
        SearchSection {
            enabled: true,
            c1: s.c1,
            beta: s.beta,
            expansions: s.expansions,
            iterations: s.iterations,
            max_depth: s.max_depth,
            simulation_budget: s.simulation_budget,
            temperature: s.temperature,
            top_p: s.top_p,
            context_units: 6000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineSection {
    pub enabled: bool,
    pub weights: QualityWeights,
    pub epsilon: f64,
    pub max_iter: usize,
    pub max_units: usize,
}

impl Default for RefineSection {
    fn default() -> Self {
        let r = RefineConfig::default();
        RefineSection {
            enabled: true,
            weights: r.weights,
            epsilon: r.epsilon,
            max_iter: r.max_iter,
            max_units: r.max_units,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSection {
    pub bins: usize,
    /// Applied to logprobs before confidences are computed.
    pub temperature: f64,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        CalibrateSection {
            bins: 10,
            temperature: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunnerKind {
    Simulator,
    Subprocess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessSection {
    pub runner: RunnerKind,
    pub timeout_secs: u64,
    /// Simulator script path template; `{instance_id}` is substituted.
    pub simulator_script: String,
    /// Shell command run once per test id; `{test}` is substituted.
    pub test_command: String,
}

impl Default for HarnessSection {
    fn default() -> Self {
        HarnessSection {
            runner: RunnerKind::Simulator,
            timeout_secs: 120,
            simulator_script: "sim/{instance_id}.jsonl".into(),
            test_command: "python3 -m pytest -q {test}".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThinkingSection {
    /// Ablation switch: when off every stage runs in non-thinking mode.
    pub enabled: bool,
}

impl Default for ThinkingSection {
    fn default() -> Self {
        ThinkingSection { enabled: true }
    }
}

fn check(ok: bool, what: &str) -> Result<()> {
    if !ok {
        bail!("config: {what}");
    }
    Ok(())
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).context("config: cannot parse")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.localize;
        check(
            (0.0..=1.0).contains(&l.alpha),
            "localize.alpha must be in [0, 1]",
        )?;
        check(l.k1 >= 0.0, "localize.k1 must be >= 0")?;
        check((0.0..=1.0).contains(&l.b), "localize.b must be in [0, 1]")?;
        check(l.top_k_files >= 1, "localize.top_k_files must be >= 1")?;
        check(l.max_locations >= 1, "localize.max_locations must be >= 1")?;
        check(l.embedding_dim >= 1, "localize.embedding_dim must be >= 1")?;
        check(
            !l.loc_k.is_empty() && l.loc_k.iter().all(|k| *k >= 1),
            "localize.loc_k must list cutoffs >= 1",
        )?;
        check(
            self.ingest.max_chunk_units >= 1,
            "ingest.max_chunk_units must be >= 1",
        )?;
        self.search_config(0)
            .validate()
            .map_err(|e| anyhow::anyhow!("config: {e}"))?;
        check(
            self.search.context_units >= 1,
            "search.context_units must be >= 1",
        )?;
        self.refine
            .weights
            .validate()
            .map_err(|e| anyhow::anyhow!("config: {e}"))?;
        check(self.refine.epsilon >= 0.0, "refine.epsilon must be >= 0")?;
        check(self.calibrate.bins >= 1, "calibrate.bins must be >= 1")?;
        check(
            self.calibrate.temperature > 0.0 && self.calibrate.temperature.is_finite(),
            "calibrate.temperature must be > 0",
        )?;
        check(
            self.harness.timeout_secs >= 1,
            "harness.timeout_secs must be >= 1",
        )?;
        check(self.workers >= 1, "workers must be >= 1")?;
        Ok(())
    }

    pub fn search_config(&self, seed: u64) -> SearchConfig {
        let s = &self.search;
        SearchConfig {
            c1: s.c1,
            beta: s.beta,
            expansions: s.expansions,
            iterations: s.iterations,
            max_depth: s.max_depth,
            simulation_budget: s.simulation_budget,
            temperature: s.temperature,
            top_p: s.top_p,
            mode: Mode::NonThinking,
            seed,
        }
    }

    pub fn refine_config(&self, seed: u64) -> RefineConfig {
        RefineConfig {
            weights: self.refine.weights,
            epsilon: self.refine.epsilon,
            max_iter: self.refine.max_iter,
            mode: self.reasoning_mode(),
            calibration_temperature: self.calibrate.temperature,
            max_units: self.refine.max_units,
            seed,
        }
    }

    /// Mode for the stages that reason about feedback.
    pub fn reasoning_mode(&self) -> Mode {
        if self.thinking.enabled {
            Mode::Thinking
        } else {
            Mode::NonThinking
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.harness.timeout_secs)
    }
}

/// A parsed config plus the verbatim text and the directory relative paths
/// are resolved against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub text: String,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config = PipelineConfig::parse(&text)?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(LoadedConfig { config, text, base })
    }

    pub fn resolve(&self, p: impl AsRef<Path>) -> PathBuf {
        let p = p.as_ref();
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn template(&self, template: &str, instance_id: &str, stage: &str) -> PathBuf {
        self.resolve(
            template
                .replace("{instance_id}", instance_id)
                .replace("{stage}", stage),
        )
    }
}
