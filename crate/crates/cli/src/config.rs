//! Settings shared by the subcommands. Values come from an optional TOML
//! file and are overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use evcorr::correlator::LifecycleMode;
use evcorr::model::SilentLabels;
use evcorr::stream::Format;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelFormat {
    Simple,
    Pnml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    Csv,
    Jsonl,
}

impl From<EventFormat> for Format {
    fn from(f: EventFormat) -> Self {
        match f {
            EventFormat::Csv => Format::Csv,
            EventFormat::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Auto,
    CompletedOnly,
    StartedCompleted,
}

impl From<Mode> for LifecycleMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Auto => LifecycleMode::Auto,
            Mode::CompletedOnly => LifecycleMode::CompletedOnly,
            Mode::StartedCompleted => LifecycleMode::StartedCompleted,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum LabelList {
    One(String),
    Many(Vec<String>),
}

/// Keys accepted in the config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<PathBuf>,
    model_format: Option<ModelFormat>,
    heuristics: Option<PathBuf>,
    input: Option<PathBuf>,
    format: Option<EventFormat>,
    output: Option<PathBuf>,
    truth: Option<PathBuf>,
    threshold: Option<f64>,
    speedup: Option<f64>,
    silent_labels: Option<LabelList>,
    mode: Option<Mode>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Workflow net (.pnml or the line-based .net format)
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model_format: Option<ModelFormat>,
    /// Heuristics CSV with header activity,min,max
    #[arg(long)]
    pub heuristics: Option<PathBuf>,
    /// Event file; `-` reads standard input
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Event file format; guessed from the extension when absent
    #[arg(long, value_enum)]
    pub format: Option<EventFormat>,
    /// Output file; standard output when absent
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Labeled log holding the true case ids
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Minimum trust percentage of exported instances
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Replay speed factor; `inf` replays without delays
    #[arg(long)]
    pub speedup: Option<f64>,
    /// Comma-separated labels treated as silent transitions
    #[arg(long, value_delimiter = ',')]
    pub silent_labels: Option<Vec<String>>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: Option<PathBuf>,
    pub model_format: Option<ModelFormat>,
    pub heuristics: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub format: Option<EventFormat>,
    pub output: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub threshold: f64,
    pub speedup: f64,
    pub silent_labels: SilentLabels,
    pub mode: Mode,
}

impl RunConfig {
    pub fn resolve(file: Option<&Path>, flags: Flags) -> Result<Self> {
        let base = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str::<FileConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let silent = match (flags.silent_labels, base.silent_labels) {
            (Some(v), _) | (None, Some(LabelList::Many(v))) => SilentLabels::new(v),
            (None, Some(LabelList::One(s))) => SilentLabels::new(s.split(',').map(str::trim)),
            (None, None) => SilentLabels::default(),
        };
        let config = RunConfig {
            model: flags.model.or(base.model),
            model_format: flags.model_format.or(base.model_format),
            heuristics: flags.heuristics.or(base.heuristics),
            input: flags.input.or(base.input),
            format: flags.format.or(base.format),
            output: flags.output.or(base.output),
            truth: flags.truth.or(base.truth),
            threshold: flags.threshold.or(base.threshold).unwrap_or(0.0),
            speedup: flags.speedup.or(base.speedup).unwrap_or(f64::INFINITY),
            silent_labels: silent,
            mode: flags.mode.or(base.mode).unwrap_or(Mode::Auto),
        };
        if !(0.0..=100.0).contains(&config.threshold) {
            bail!("threshold must lie in [0, 100], got {}", config.threshold);
        }
        if config.speedup.is_nan() || config.speedup <= 0.0 {
            bail!("speedup must be positive, got {}", config.speedup);
        }
        for path in [&config.model, &config.heuristics, &config.truth].into_iter().flatten() {
            if !path.exists() {
                bail!("{} does not exist", path.display());
            }
        }
        if let Some(input) = &config.input {
            if input.as_os_str() != "-" && !input.exists() {
                bail!("{} does not exist", input.display());
            }
        }
        Ok(config)
    }

    pub fn require<'a>(value: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        match value {
            Some(p) => Ok(p),
            None => bail!("--{name} is required"),
        }
    }

    pub fn event_format(&self, path: &Path) -> Format {
        self.format.map(Format::from).unwrap_or_else(|| Format::from_path(path))
    }

    pub fn model_format(&self, path: &Path) -> ModelFormat {
        self.model_format
            .unwrap_or(match path.extension().and_then(|e| e.to_str()) {
                Some("pnml" | "xml") => ModelFormat::Pnml,
                _ => ModelFormat::Simple,
            })
    }
}
