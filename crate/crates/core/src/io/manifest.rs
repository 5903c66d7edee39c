//! Run manifests: a `key=value` sidecar that also parses as a config file.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use crate::engine::{derive_seed, stream, ExperimentConfig, RNG_ALGORITHM};
use crate::error::{Error, Result};
use crate::io::config::{build_config, parse_settings, render_config};
use crate::io::records::write_bytes;
use crate::metrics::BaselineEstimate;

/// Bumped whenever a CSV column changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    /// Tool name and version, e.g. `ilm 0.1.0`.
    pub tool: String,
    pub rng: String,
    pub command: String,
    pub baseline: Option<BaselineEstimate>,
    /// `(started, finished)`; left out unless timing output was requested.
    pub timestamps: Option<(String, String)>,
    /// Named output files.
    pub outputs: Vec<String>,
    /// Replicates that aborted, with their diagnostics.
    pub failures: Vec<(usize, String)>,
}

impl RunManifest {
    pub fn new(
        config: ExperimentConfig,
        tool: impl Into<String>,
        command: impl Into<String>,
    ) -> Self {
        RunManifest {
            config,
            tool: tool.into(),
            rng: RNG_ALGORITHM.to_string(),
            command: command.into(),
            baseline: None,
            timestamps: None,
            outputs: Vec::new(),
            failures: Vec::new(),
        }
    }

    /// Per-replicate seeds of the initialization stream.
    pub fn replicate_seeds(&self) -> Vec<u64> {
        (0..self.config.replicates as u64)
            .map(|r| derive_seed(self.config.seed, r, stream::INIT))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# run manifest; usable as --config to repeat the run");
        let _ = writeln!(out, "manifest.version={MANIFEST_VERSION}");
        let _ = writeln!(out, "manifest.csv_schema={CSV_SCHEMA_VERSION}");
        let _ = writeln!(out, "manifest.tool={}", self.tool);
        let _ = writeln!(out, "manifest.command={}", self.command);
        let _ = writeln!(out, "manifest.rng={}", self.rng);
        if let Some((start, end)) = &self.timestamps {
            let _ = writeln!(out, "manifest.started={start}");
            let _ = writeln!(out, "manifest.finished={end}");
        }
        for (i, name) in self.outputs.iter().enumerate() {
            let _ = writeln!(out, "manifest.output.{i}={name}");
        }
        if let Some(b) = &self.baseline {
            let _ = writeln!(out, "baseline.x0={:?}", b.x0);
            let _ = writeln!(out, "baseline.c0={:?}", b.c0);
            let _ = writeln!(out, "baseline.s0={:?}", b.s0);
            let _ = writeln!(out, "baseline.agents={}", b.agents);
            let _ = writeln!(out, "baseline.pairs={}", b.pairs);
        }
        for (r, seed) in self.replicate_seeds().iter().enumerate() {
            let _ = writeln!(out, "replicate.{r}.seed={seed}");
        }
        for (r, why) in &self.failures {
            let _ = writeln!(out, "replicate.{r}.failure={}", why.replace('\n', " "));
        }
        out.push_str(&render_config(&self.config));
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, self.render().as_bytes())
    }
}

/// Reads back the metadata keys and the config of a manifest.
pub fn parse_manifest(
    text: &str,
    path: &Path,
) -> Result<(BTreeMap<String, String>, ExperimentConfig)> {
    let mut meta = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if let Some((k, v)) = line.split_once('=') {
            let k = k.trim();
            if k.contains('.') {
                meta.insert(k.to_string(), v.trim().to_string());
            }
        } else if !line.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected key=value".into(),
            });
        }
    }
    let cfg = build_config(&parse_settings(text, path)?)?;
    Ok((meta, cfg))
}

/// A baseline stored as `baseline.*` keys alongside `model`, `n` and `hidden`.
pub fn render_baseline(b: &BaselineEstimate, seed: u64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "baseline.model={}", b.kind.name());
    let _ = writeln!(out, "baseline.n={}", b.n);
    let _ = writeln!(out, "baseline.hidden={}", b.hidden);
    let _ = writeln!(out, "baseline.seed={seed}");
    let _ = writeln!(out, "baseline.x0={:?}", b.x0);
    let _ = writeln!(out, "baseline.c0={:?}", b.c0);
    let _ = writeln!(out, "baseline.s0={:?}", b.s0);
    let _ = writeln!(out, "baseline.agents={}", b.agents);
    let _ = writeln!(out, "baseline.pairs={}", b.pairs);
    out
}

pub fn parse_baseline(text: &str, path: &Path) -> Result<BaselineEstimate> {
    let mut kv = BTreeMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if let Some((k, v)) = line.split_once('=') {
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let get = |k: &str| -> Result<&String> {
        kv.get(&format!("baseline.{k}"))
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("missing baseline.{k}"),
            })
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("bad baseline.{k}"),
        })
    };
    let kind = crate::agents::AgentKind::parse(get("model")?)
        .ok_or_else(|| Error::config("baseline.model", get("model").unwrap().clone()))?;
    Ok(BaselineEstimate {
        kind,
        n: num("n")? as usize,
        hidden: num("hidden")? as usize,
        x0: num("x0")?,
        c0: num("c0")?,
        s0: num("s0")?,
        agents: num("agents")? as usize,
        pairs: num("pairs")? as usize,
    })
}
