//! Flat `key=value` configuration files.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Keys under the `manifest.`, `replicate.` and `baseline.` namespaces are
//! skipped so that a run manifest can be fed back in as a config.

use std::fs;
use std::path::{Path, PathBuf};

use crate::agents::{AgentKind, AutoDirection, AutoMode};
use crate::engine::{default_eta, ExperimentConfig};
use crate::error::{Error, Result};
use crate::neural::Loss;

/// Every key a config may set, in the order [`render_config`] writes them.
pub const KEYS: &[&str] = &[
    "model",
    "n",
    "hidden",
    "bottleneck_size",
    "auto_size",
    "auto_mode",
    "auto_direction",
    "r",
    "eta",
    "epochs",
    "loss",
    "generations",
    "replicates",
    "lambda",
    "seed",
    "gen_cap",
    "workers",
    "allow_large_obversion",
    "loss_divisor",
];

const METADATA_PREFIXES: &[&str] = &["manifest.", "replicate.", "baseline."];

/// One `key=value` assignment and where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Flag,
}

impl Setting {
    pub fn flag(key: impl Into<String>, value: impl Into<String>) -> Self {
        Setting {
            key: key.into(),
            value: value.into(),
            origin: Origin::Flag,
        }
    }

    /// Parses `key=value` as given on the command line.
    pub fn parse_flag(text: &str) -> Result<Self> {
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| Error::config(text, "expected key=value"))?;
        Ok(Setting::flag(k.trim(), v.trim()))
    }
}

pub fn parse_settings(text: &str, path: &Path) -> Result<Vec<Setting>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected key=value, got `{line}`"),
        })?;
        let key = k.trim();
        if METADATA_PREFIXES.iter().any(|p| key.starts_with(p)) {
            continue;
        }
        out.push(Setting {
            key: key.to_string(),
            value: v.trim().to_string(),
            origin: Origin::File {
                path: path.to_path_buf(),
                line: i + 1,
            },
        });
    }
    Ok(out)
}

pub fn read_settings(path: &Path) -> Result<Vec<Setting>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_settings(&text, path)
}

/// Builds a validated config. Later settings override earlier ones, so pass
/// file settings first and flags after. `model` picks the defaults (`ailm`
/// when absent); `eta` defaults per model and `hidden` to `n` unless set.
pub fn build_config(settings: &[Setting]) -> Result<ExperimentConfig> {
    let model = match settings.iter().rev().find(|s| s.key == "model") {
        Some(s) => parse_model(s)?,
        None => AgentKind::Ailm,
    };
    let mut cfg = ExperimentConfig::new(model);
    let mut auto_size_set = false;
    let mut hidden_set = false;
    for s in settings {
        apply(&mut cfg, s)?;
        auto_size_set |= s.key == "auto_size";
        hidden_set |= s.key == "hidden";
    }
    if !hidden_set {
        cfg.hidden = cfg.n;
    }
    if cfg.auto_mode == AutoMode::Shared && !auto_size_set {
        cfg.auto_size = cfg.bottleneck;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads `path` (if any), then applies `flags` on top.
pub fn load_config(path: Option<&Path>, flags: &[Setting]) -> Result<ExperimentConfig> {
    let mut settings = match path {
        Some(p) => read_settings(p)?,
        None => Vec::new(),
    };
    settings.extend_from_slice(flags);
    build_config(&settings)
}

fn parse_model(s: &Setting) -> Result<AgentKind> {
    AgentKind::parse(&s.value).ok_or_else(|| keyed(s, "expected oilm, ailm or oneway"))
}

fn keyed(s: &Setting, message: &str) -> Error {
    let where_ = match &s.origin {
        Origin::File { path, line } => format!(" ({}:{line})", path.display()),
        Origin::Flag => String::new(),
    };
    Error::config(&s.key, format!("`{}`: {message}{where_}", s.value))
}

fn num<T: std::str::FromStr>(s: &Setting) -> Result<T> {
    s.value.parse().map_err(|_| keyed(s, "not a valid number"))
}

fn apply(cfg: &mut ExperimentConfig, s: &Setting) -> Result<()> {
    match s.key.as_str() {
        "model" => {
            let model = parse_model(s)?;
            if model != cfg.model {
                cfg.model = model;
                cfg.eta = default_eta(model);
            }
        }
        "n" => cfg.n = num(s)?,
        "hidden" => cfg.hidden = num(s)?,
        "bottleneck_size" => cfg.bottleneck = num(s)?,
        "auto_size" => cfg.auto_size = num(s)?,
        "auto_mode" => {
            cfg.auto_mode = AutoMode::parse(&s.value)
                .ok_or_else(|| keyed(s, "expected shared or independent"))?
        }
        "auto_direction" => {
            cfg.auto_direction = AutoDirection::parse(&s.value)
                .ok_or_else(|| keyed(s, "expected m2m, s2s or both"))?
        }
        "r" => cfg.r = num(s)?,
        "eta" => cfg.eta = num(s)?,
        "epochs" => cfg.epochs = num(s)?,
        "loss" => {
            cfg.loss = Loss::parse(&s.value)
                .ok_or_else(|| keyed(s, "expected squared_error or cross_entropy"))?
        }
        "generations" => cfg.generations = num(s)?,
        "replicates" => cfg.replicates = num(s)?,
        "lambda" => cfg.lambda = num(s)?,
        "seed" => cfg.seed = num(s)?,
        "gen_cap" => cfg.gen_cap = num(s)?,
        "workers" => cfg.workers = num(s)?,
        "allow_large_obversion" => {
            cfg.allow_large_obversion = match s.value.as_str() {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                _ => return Err(keyed(s, "expected true or false")),
            }
        }
        "loss_divisor" => {
            cfg.loss_divisor = match s.value.as_str() {
                "" | "r" => None,
                _ => Some(num(s)?),
            }
        }
        _ => return Err(keyed(s, "unknown key")),
    }
    Ok(())
}

/// Writes every key in [`KEYS`] order; reals use the shortest representation
/// that parses back to the same value.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    for key in KEYS {
        let value = match *key {
            "model" => cfg.model.name().to_string(),
            "n" => cfg.n.to_string(),
            "hidden" => cfg.hidden.to_string(),
            "bottleneck_size" => cfg.bottleneck.to_string(),
            "auto_size" => cfg.auto_size.to_string(),
            "auto_mode" => cfg.auto_mode.name().to_string(),
            "auto_direction" => cfg.auto_direction.name().to_string(),
            "r" => cfg.r.to_string(),
            "eta" => format!("{:?}", cfg.eta),
            "epochs" => cfg.epochs.to_string(),
            "loss" => cfg.loss.name().to_string(),
            "generations" => cfg.generations.to_string(),
            "replicates" => cfg.replicates.to_string(),
            "lambda" => format!("{:?}", cfg.lambda),
            "seed" => cfg.seed.to_string(),
            "gen_cap" => cfg.gen_cap.to_string(),
            "workers" => cfg.workers.to_string(),
            "allow_large_obversion" => cfg.allow_large_obversion.to_string(),
            "loss_divisor" => cfg
                .loss_divisor
                .map(|d| format!("{d:?}"))
                .unwrap_or_else(|| "r".into()),
            _ => unreachable!(),
        };
        out.push_str(key);
        out.push('=');
        out.push_str(&value);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_text(text: &str) -> Result<ExperimentConfig> {
        build_config(&parse_settings(text, Path::new("test.cfg"))?)
    }

    #[test]
    fn empty_ailm_gets_default_rate() {
        let cfg = from_text("model=ailm\n").unwrap();
        assert_eq!(cfg.eta, 5.0);
        assert_eq!((cfg.epochs, cfg.r, cfg.replicates), (20, 20, 25));
        assert_eq!(cfg.lambda, 0.95);
        assert_eq!(from_text("model = oilm # comment\n").unwrap().eta, 1.0);
    }

    #[test]
    fn explicit_eta_survives_model_line() {
        let cfg = from_text("eta=0.5\nmodel=oilm\n").unwrap();
        assert_eq!(cfg.eta, 0.5);
    }

    #[test]
    fn flags_override_file() {
        let mut s =
            parse_settings("model=ailm\nn=6\nbottleneck_size=20\n", Path::new("f")).unwrap();
        s.push(Setting::parse_flag("n=7").unwrap());
        let cfg = build_config(&s).unwrap();
        assert_eq!(cfg.n, 7);
        assert_eq!(cfg.auto_size, 20);
    }

    #[test]
    fn hidden_follows_n_unless_set() {
        assert_eq!(from_text("n=12\n").unwrap().hidden, 12);
        assert_eq!(from_text("n=12\nhidden=30\n").unwrap().hidden, 30);
        assert_eq!(from_text("hidden=30\nn=12\n").unwrap().hidden, 30);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = from_text("model=ailm\nbottleneck=50\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bottleneck"), "{err}");
        assert!(err.contains("unknown key"), "{err}");
        assert!(err.contains("test.cfg:2"), "{err}");
    }

    #[test]
    fn oilm_at_sixteen_is_refused() {
        let err = from_text("model=oilm\nn=16\nhidden=16\nbottleneck_size=160\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("2^32"), "{err}");
    }

    #[test]
    fn shared_size_mismatch() {
        let err = from_text("model=ailm\nbottleneck_size=50\nauto_size=60\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("auto_size"), "{err}");
    }

    #[test]
    fn malformed_line() {
        let err = from_text("model ailm\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(from_text("n=eight\n").is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut cfg =
            from_text("model=ailm\nauto_mode=independent\nauto_size=150\neta=0.1\n").unwrap();
        cfg.loss_divisor = Some(8.0);
        let back = from_text(&render_config(&cfg)).unwrap();
        assert_eq!(format!("{back:?}"), format!("{cfg:?}"));
    }

    #[test]
    fn metadata_keys_are_skipped() {
        let cfg = from_text("manifest.tool=x\nreplicate.0.seed=5\nmodel=oilm\n").unwrap();
        assert_eq!(cfg.model, AgentKind::Oilm);
    }
}
