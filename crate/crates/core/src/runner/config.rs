//! Run configuration: a flat `key = value` file with dotted section names.
//!
//! ```text
//! # comments start with '#'
//! data.content = data/cora/cora.content
//! data.cites = data/cora/cora.cites
//! model.hidden_dim = 8
//! reg.kind = entropy_min
//! noise.case = edges_fixed_500
//! run.n_seeds = 5
//! ```
//!
//! Every key is optional; unknown keys and repeated keys are errors.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gat_model::GatConfig;
use crate::graph_store::SplitSpec;
use crate::perturbation::{FeatureModel, GridCase, GridTable};
use crate::robust_reg::{RegKind, RegSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    /// A prepared binary cache; takes precedence over the text files.
    pub cache: Option<PathBuf>,
    pub content: Option<PathBuf>,
    pub cites: Option<PathBuf>,
    /// Dataset tag selecting the attack grid family (`cora`, `citeseer`,
    /// `table1`, `table2`).
    pub tag: String,
    pub split: SplitSpec,
    pub split_seed: u64,
}

/// How the robust variant's λ is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaSelect {
    /// Use `reg.lambda` as given.
    Fixed,
    /// Sweep `reg.lambdas` at the grid corner (50 rogue nodes, 500 edges)
    /// and keep the best by validation accuracy.
    Sweep,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegConfig {
    pub kind: RegKind,
    pub lambda: f64,
    pub layers: Vec<usize>,
    pub select: LambdaSelect,
    pub lambdas: Vec<f64>,
}

impl RegConfig {
    pub fn spec(&self, lambda: f64) -> RegSpec {
        if lambda == 0.0 || self.kind == RegKind::None {
            RegSpec::none()
        } else {
            RegSpec::new(self.kind, lambda, self.layers.clone())
        }
    }
}

/// Which grid cases a benchmark runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseSelect {
    One(GridCase),
    Both,
}

impl CaseSelect {
    pub fn cases(self) -> Vec<GridCase> {
        match self {
            CaseSelect::One(c) => vec![c],
            CaseSelect::Both => vec![GridCase::EdgesFixed500, GridCase::NodesFixed50],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    pub case: CaseSelect,
    /// Overrides the grid family implied by `data.tag`.
    pub table: Option<GridTable>,
    /// Single attack used by `train` and `attack`.
    pub n_rogue: usize,
    pub edges_per_rogue: usize,
    pub feature_model: FeatureModel,
    /// Add an unpoisoned control point to benchmarks.
    pub control: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: GatConfig,
    pub reg: RegConfig,
    pub noise: NoiseConfig,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub record_wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataConfig {
                cache: None,
                content: None,
                cites: None,
                tag: "cora".into(),
                split: SplitSpec::default(),
                split_seed: 0,
            },
            model: GatConfig::default(),
            reg: RegConfig {
                kind: RegKind::EntropyMin,
                lambda: 0.5,
                layers: vec![1, 2],
                select: LambdaSelect::Sweep,
                lambdas: vec![0.0, 0.01, 0.1, 0.5, 1.0],
            },
            noise: NoiseConfig {
                case: CaseSelect::Both,
                table: None,
                n_rogue: 0,
                edges_per_rogue: 0,
                feature_model: FeatureModel::default(),
                control: true,
            },
            n_seeds: 5,
            base_seed: 0,
            output_dir: PathBuf::from("out"),
            record_wall_time: false,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {v:?}"
        ))),
    }
}

impl RunConfig {
    /// Parses configuration text. Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", ln + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: {key} set twice", ln + 1)));
            }
            cfg.set(key, value, base)
                .map_err(|e| Error::Config(format!("line {}: {}", ln + 1, strip(e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip(e))))
    }

    fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<()> {
        let path = || base.join(v);
        let m = &mut self.model;
        match key {
            "data.cache" => self.data.cache = Some(path()),
            "data.content" => self.data.content = Some(path()),
            "data.cites" => self.data.cites = Some(path()),
            "data.tag" => self.data.tag = v.to_string(),
            "data.per_class_train" => self.data.split.per_class_train = num(key, v)?,
            "data.n_val" => self.data.split.n_val = num(key, v)?,
            "data.n_test" => self.data.split.n_test = num(key, v)?,
            "data.split_seed" => self.data.split_seed = num(key, v)?,
            "model.hidden_dim" => m.hidden_dim = num(key, v)?,
            "model.heads_l1" => m.heads_l1 = num(key, v)?,
            "model.heads_l2" => m.heads_l2 = num(key, v)?,
            "model.dropout_p" => m.dropout_p = num(key, v)?,
            "model.attn_dropout_p" => m.attn_dropout_p = num(key, v)?,
            "model.leaky_slope" => m.leaky_slope = num(key, v)?,
            "model.lr" => m.lr = num(key, v)?,
            "model.weight_decay" => m.weight_decay = num(key, v)?,
            "model.max_epochs" => m.max_epochs = num(key, v)?,
            "model.patience" => m.patience = num(key, v)?,
            "reg.kind" => self.reg.kind = RegKind::parse(v)?,
            "reg.lambda" => self.reg.lambda = num(key, v)?,
            "reg.layers" => self.reg.layers = list(key, v)?,
            "reg.lambdas" => self.reg.lambdas = list(key, v)?,
            "reg.select" => {
                self.reg.select = match v {
                    "fixed" => LambdaSelect::Fixed,
                    "sweep" => LambdaSelect::Sweep,
                    _ => return Err(Error::Config(format!("{key}: expected fixed or sweep"))),
                }
            }
            "noise.case" => {
                self.noise.case = match v {
                    "both" => CaseSelect::Both,
                    _ => CaseSelect::One(GridCase::parse(v)?),
                }
            }
            "noise.table" => self.noise.table = Some(GridTable::parse(v)?),
            "noise.n_rogue" => self.noise.n_rogue = num(key, v)?,
            "noise.edges_per_rogue" => self.noise.edges_per_rogue = num(key, v)?,
            "noise.feature_model" => self.noise.feature_model = FeatureModel::parse(v)?,
            "noise.control" => self.noise.control = boolean(key, v)?,
            "run.n_seeds" => self.n_seeds = num(key, v)?,
            "run.base_seed" => self.base_seed = num(key, v)?,
            "run.output_dir" => self.output_dir = path(),
            "report.record_wall_time" => self.record_wall_time = boolean(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::Config("run.n_seeds must be at least 1".into()));
        }
        let check = GatConfig {
            regularizer: self.reg.spec(self.reg.lambda),
            ..self.model.clone()
        };
        check.validate().map_err(|e| Error::Config(strip(e)))?;
        if self.reg.kind != RegKind::None {
            RegSpec::new(self.reg.kind, 1.0, self.reg.layers.clone())
                .validate()
                .map_err(|e| Error::Config(strip(e)))?;
        }
        if self.reg.select == LambdaSelect::Sweep
            && (self.reg.lambdas.is_empty() || self.reg.lambdas.iter().any(|&l| !(l >= 0.0)))
        {
            return Err(Error::Config(
                "reg.lambdas must be a nonempty list of λ ≥ 0".into(),
            ));
        }
        Ok(())
    }

    pub fn table(&self) -> Result<GridTable> {
        match self.noise.table {
            Some(t) => Ok(t),
            None => GridTable::parse(&self.data.tag),
        }
    }

    /// Training seed for seed index `s`.
    pub fn seed(&self, s: usize) -> u64 {
        self.base_seed.wrapping_add(s as u64)
    }

    /// Model configuration with the given regularizer weight and seed.
    pub fn gat(&self, lambda: f64, seed: u64) -> GatConfig {
        GatConfig {
            seed,
            regularizer: self.reg.spec(lambda),
            ..self.model.clone()
        }
    }
}

/// The message of an error without its category prefix.
fn strip(e: Error) -> String {
    match e {
        Error::Config(m) | Error::Invalid(m) => m,
        other => other.to_string(),
    }
}
