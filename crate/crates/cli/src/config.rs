//! The TOML run configuration and the baselines table format.
//!
//! One file configures every stage; flags override individual values. All
//! sections are optional and fall back to the module defaults, but unknown
//! keys anywhere are rejected so a typo fails fast instead of silently
//! running with defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sessnas::cost::Thresholds;
use sessnas::nn::TrainConfig;
use sessnas::report::{ComparisonRow, HwRow, MetricCells};
use sessnas::search::{SearchConfig, DEFAULT_D_TH, DEFAULT_FLOPS_TH, DEFAULT_R_TH};
use sessnas::session::LabelMap;
use sessnas::space::{HeadPool, Padding, PoolKind, SpaceBounds};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub labelmap: Option<LabelMapSection>,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    /// Absent section: the default search thresholds. Present section:
    /// exactly the keys given (an omitted key leaves that quantity
    /// unconstrained, so an empty `[thresholds]` disables all three).
    pub thresholds: Option<ThresholdsSection>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub seeds: SeedsSection,
    #[serde(default)]
    pub paths: PathsSection,
}

/// Filename-substring labeling: `classes` names the class indices,
/// `patterns` is an ordered `[substring, class]` list (first hit wins).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelMapSection {
    pub classes: Vec<String>,
    pub patterns: Vec<(String, usize)>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// Fraction of each class held out as the test split.
    #[serde(default = "default_frac")]
    pub test: f64,
    /// Fraction of the remaining pool held out as the validation split.
    #[serde(default = "default_frac")]
    pub val: f64,
}

fn default_frac() -> f64 {
    0.2
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { test: 0.2, val: 0.2 }
    }
}

/// Search-space choice sets; every key is optional and overlays the default
/// bounds. Enumerated values use the genome text spelling: paddings
/// `same`/`valid`, pool kinds `none`/`max`/`avg`, head pools
/// `gap`/`flatten`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub filters: Option<Vec<usize>>,
    pub kernels: Option<Vec<usize>>,
    pub strides: Option<Vec<usize>>,
    pub paddings: Option<Vec<String>>,
    pub pool_kinds: Option<Vec<String>>,
    pub pool_sizes: Option<Vec<usize>>,
    pub dropouts: Option<Vec<f64>>,
    pub max_blocks: Option<usize>,
    pub dense_units: Option<Vec<usize>>,
    pub head_pools: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsSection {
    pub params: Option<u64>,
    pub tensor: Option<u64>,
    pub flops: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub max_epochs: Option<usize>,
    pub lr0: Option<f64>,
    pub batch_size: Option<usize>,
    pub plateau_factor: Option<f64>,
    pub plateau_patience: Option<usize>,
    pub min_lr: Option<f64>,
    pub early_stop_patience: Option<usize>,
    pub min_delta: Option<f64>,
    pub multi_start: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub generations: Option<usize>,
    pub population: Option<usize>,
    pub retry_cap: Option<usize>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsSection {
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub dataset: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub baselines: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn label_map(&self) -> Result<LabelMap, CliError> {
        let section = self
            .labelmap
            .as_ref()
            .ok_or(CliError::Missing("[labelmap] section in the config"))?;
        let map = LabelMap {
            patterns: section.patterns.clone(),
            class_names: section.classes.clone(),
        };
        map.validate()?;
        Ok(map)
    }

    pub fn thresholds(&self) -> Thresholds {
        match &self.thresholds {
            None => Thresholds {
                d_th: Some(DEFAULT_D_TH),
                r_th: Some(DEFAULT_R_TH),
                flops_th: Some(DEFAULT_FLOPS_TH),
            },
            Some(t) => Thresholds { d_th: t.params, r_th: t.tensor, flops_th: t.flops },
        }
    }

    pub fn space_bounds(&self) -> Result<SpaceBounds, CliError> {
        let mut b = SpaceBounds::default();
        let s = &self.bounds;
        if let Some(v) = &s.filters {
            b.filters_choices = v.clone();
        }
        if let Some(v) = &s.kernels {
            b.kernel_choices = v.clone();
        }
        if let Some(v) = &s.strides {
            b.stride_choices = v.clone();
        }
        if let Some(v) = &s.paddings {
            b.padding_choices = v.iter().map(|p| parse_padding(p)).collect::<Result<_, _>>()?;
        }
        if let Some(v) = &s.pool_kinds {
            b.pool_kind_choices =
                v.iter().map(|p| parse_pool_kind(p)).collect::<Result<_, _>>()?;
        }
        if let Some(v) = &s.pool_sizes {
            b.pool_size_choices = v.clone();
        }
        if let Some(v) = &s.dropouts {
            b.dropout_choices = v.clone();
        }
        if let Some(v) = s.max_blocks {
            b.max_blocks = v;
        }
        if let Some(v) = &s.dense_units {
            b.dense_units_choices = v.clone();
        }
        if let Some(v) = &s.head_pools {
            b.head_pool_choices =
                v.iter().map(|p| parse_head_pool(p)).collect::<Result<_, _>>()?;
        }
        Ok(b)
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut t = TrainConfig { seed: self.seeds.seed, ..TrainConfig::default() };
        let s = &self.train;
        if let Some(v) = s.max_epochs {
            t.max_epochs = v;
        }
        if let Some(v) = s.lr0 {
            t.lr0 = v;
        }
        if let Some(v) = s.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = s.plateau_factor {
            t.plateau.factor = v;
        }
        if let Some(v) = s.plateau_patience {
            t.plateau.patience = v;
        }
        if let Some(v) = s.min_lr {
            t.plateau.min_lr = v;
        }
        if let Some(v) = s.early_stop_patience {
            t.early_stop.patience = v;
        }
        if let Some(v) = s.min_delta {
            t.min_delta = v;
        }
        if let Some(v) = s.multi_start {
            t.multi_start = v;
        }
        t
    }

    pub fn search_config(&self) -> Result<SearchConfig, CliError> {
        let mut c = SearchConfig {
            thresholds: self.thresholds(),
            bounds: self.space_bounds()?,
            train_cfg: self.train_config(),
            seed: self.seeds.seed,
            ..SearchConfig::default()
        };
        let s = &self.search;
        if let Some(v) = s.generations {
            c.generations = v;
        }
        if let Some(v) = s.population {
            c.population = v;
        }
        if let Some(v) = s.retry_cap {
            c.candidate_retry_cap = v;
        }
        if let Some(v) = s.jobs {
            c.jobs = v;
        }
        Ok(c)
    }
}

fn parse_padding(s: &str) -> Result<Padding, CliError> {
    match s {
        "same" => Ok(Padding::Same),
        "valid" => Ok(Padding::Valid),
        other => Err(CliError::Config(format!(
            "unknown padding '{other}' (expected same|valid)"
        ))),
    }
}

fn parse_pool_kind(s: &str) -> Result<PoolKind, CliError> {
    match s {
        "none" => Ok(PoolKind::None),
        "max" => Ok(PoolKind::Max),
        "avg" => Ok(PoolKind::Avg),
        other => Err(CliError::Config(format!(
            "unknown pool kind '{other}' (expected none|max|avg)"
        ))),
    }
}

fn parse_head_pool(s: &str) -> Result<HeadPool, CliError> {
    match s {
        "gap" => Ok(HeadPool::GlobalAvg),
        "flatten" => Ok(HeadPool::Flatten),
        other => Err(CliError::Config(format!(
            "unknown head pool '{other}' (expected gap|flatten)"
        ))),
    }
}

/// Comparison-table rows: `[[model]]` entries with display-scale hardware
/// quantities and optional metric percentages (absent metrics render "-").
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselinesFile {
    #[serde(default)]
    pub model: Vec<BaselineEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineEntry {
    pub name: String,
    /// Marks the denominator row of the ratio table.
    #[serde(default)]
    pub ours: bool,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub params_m: f64,
    pub max_tensor: f64,
    pub flops_m: f64,
    pub flash_mb: f64,
    pub ram_kb: f64,
}

impl BaselineEntry {
    fn to_row(&self) -> ComparisonRow {
        ComparisonRow {
            name: self.name.clone(),
            metrics: MetricCells {
                accuracy: self.accuracy,
                precision: self.precision,
                recall: self.recall,
                f1: self.f1,
            },
            hw: HwRow {
                params_m: self.params_m,
                max_tensor: self.max_tensor,
                flops_m: self.flops_m,
                flash_mb: self.flash_mb,
                ram_kb: self.ram_kb,
            },
        }
    }
}

/// Parses a baselines file into comparison rows and the index of the row
/// flagged `ours = true` (if any; at most one is allowed).
pub fn load_baselines(path: &Path) -> Result<(Vec<ComparisonRow>, Option<usize>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: BaselinesFile = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if file.model.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no [[model]] entries",
            path.display()
        )));
    }
    let mut ours = None;
    for (i, entry) in file.model.iter().enumerate() {
        if entry.ours {
            if ours.is_some() {
                return Err(CliError::Config(format!(
                    "{}: more than one [[model]] entry sets ours = true",
                    path.display()
                )));
            }
            ours = Some(i);
        }
    }
    Ok((file.model.iter().map(BaselineEntry::to_row).collect(), ours))
}
