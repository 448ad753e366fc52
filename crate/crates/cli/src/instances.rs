use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use patchtree_core::harness::Patch;
use serde::{Deserialize, Deserializer, Serialize};

/// One task. Field names follow the common benchmark metadata layout;
/// unrecognized fields are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub instance_id: String,
    #[serde(default)]
    pub repo: Option<String>,
    pub problem_statement: String,
    #[serde(rename = "FAIL_TO_PASS", default, deserialize_with = "id_list")]
    pub fail_to_pass: Vec<String>,
    #[serde(rename = "PASS_TO_PASS", default, deserialize_with = "id_list")]
    pub pass_to_pass: Vec<String>,
    /// Reference fix, used for gold files and CodeBLEU.
    #[serde(default)]
    pub patch: Option<String>,
    #[serde(default)]
    pub gold_files: Option<Vec<String>>,
    /// Checkout directory; defaults to `<paths.repos>/<instance_id>`.
    #[serde(default)]
    pub repo_dir: Option<PathBuf>,
    /// Overrides `harness.test_command` for this instance.
    #[serde(default)]
    pub test_command: Option<String>,
}

/// Accepts either a list or a string holding a JSON-encoded list.
fn id_list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        List(Vec<String>),
        Encoded(String),
    }
    match Raw::deserialize(d)? {
        Raw::List(v) => Ok(v),
        Raw::Encoded(s) if s.trim().is_empty() => Ok(Vec::new()),
        Raw::Encoded(s) => serde_json::from_str(&s).map_err(serde::de::Error::custom),
    }
}

impl Instance {
    pub fn gold_files(&self) -> BTreeSet<String> {
        if let Some(g) = &self.gold_files {
            return g.iter().cloned().collect();
        }
        self.patch
            .as_deref()
            .and_then(|p| Patch::parse(p).ok())
            .map(|p| p.changed_paths().into_iter().collect())
            .unwrap_or_default()
    }
}

pub fn load_instances(path: &Path) -> Result<Vec<Instance>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read instances {}", path.display()))?;
    let mut out: Vec<Instance> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance = serde_json::from_str(line)
            .with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        if out.iter().any(|o| o.instance_id == inst.instance_id) {
            bail!(
                "{}: duplicate instance id {}",
                path.display(),
                inst.instance_id
            );
        }
        out.push(inst);
    }
    Ok(out)
}

/// Keeps the instances named in `selector` (comma-separated ids), in file order.
pub fn select(instances: Vec<Instance>, selector: Option<&str>) -> Result<Vec<Instance>> {
    let Some(sel) = selector else {
        return Ok(instances);
    };
    let wanted: BTreeSet<&str> = sel
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    for id in &wanted {
        if !instances.iter().any(|i| i.instance_id == *id) {
            bail!("unknown instance id {id}");
        }
    }
    Ok(instances
        .into_iter()
        .filter(|i| wanted.contains(i.instance_id.as_str()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoded_and_plain_lists() {
        let a: Instance = serde_json::from_str(
            r#"{"instance_id":"x","problem_statement":"p","FAIL_TO_PASS":"[\"t1\"]","PASS_TO_PASS":["t2"],"base_commit":"abc"}"#,
        )
        .unwrap();
        assert_eq!(a.fail_to_pass, vec!["t1"]);
        assert_eq!(a.pass_to_pass, vec!["t2"]);
    }

    #[test]
    fn gold_files_from_patch() {
        let a = Instance {
            instance_id: "x".into(),
            repo: None,
            problem_statement: String::new(),
            fail_to_pass: vec![],
            pass_to_pass: vec![],
            patch: Some("--- a/m.py\n+++ b/m.py\n@@ -1 +1 @@\n-a\n+b\n".into()),
            gold_files: None,
            repo_dir: None,
            test_command: None,
        };
        assert_eq!(a.gold_files(), ["m.py".to_string()].into());
    }

    #[test]
    fn selector() {
        let mk = |id: &str| Instance {
            instance_id: id.into(),
            repo: None,
            problem_statement: String::new(),
            fail_to_pass: vec![],
            pass_to_pass: vec![],
            patch: None,
            gold_files: None,
            repo_dir: None,
            test_command: None,
        };
        let all = vec![mk("a"), mk("b"), mk("c")];
        let got = select(all.clone(), Some("c,a")).unwrap();
        assert_eq!(
            got.iter()
                .map(|i| i.instance_id.as_str())
                .collect::<Vec<_>>(),
            ["a", "c"]
        );
        assert!(select(all, Some("zz")).is_err());
    }
}
