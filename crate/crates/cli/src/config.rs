//! Config-file overlay and list parsing for command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// Values a config file may supply. Explicit flags always win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub method: Option<String>,
    pub methods: Option<String>,
    pub order: Option<usize>,
    pub orders: Option<String>,
    pub top_n: Option<usize>,
    pub exclude_self: Option<bool>,
    pub k: Option<String>,
    pub c: Option<f64>,
    pub gamma: Option<String>,
    pub kernel: Option<String>,
    pub select: Option<String>,
    pub eval_scope: Option<String>,
    pub jobs: Option<usize>,
    pub format: Option<String>,
    pub suite: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub reps: Option<usize>,
    pub strict: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }
}

/// Parses `4..9` (inclusive), `4,5,6`, or a mix such as `4..6,9`.
pub fn parse_list(spec: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let (a, b): (usize, usize) = (
                a.trim().parse().with_context(|| format!("bad range start in {part:?}"))?,
                b.trim().parse().with_context(|| format!("bad range end in {part:?}"))?,
            );
            if a > b {
                bail!("empty range {part:?}");
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().with_context(|| format!("bad number {part:?}"))?);
        }
    }
    if out.is_empty() {
        bail!("empty list {spec:?}");
    }
    Ok(out)
}
