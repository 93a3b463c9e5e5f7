//! Run configuration shared by every pipeline stage: a line-oriented
//! `key = value` file with `#` comments, plus `key=value` overrides that
//! take precedence. Every key has a default and unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{DEFAULT_DIM, DEFAULT_DROPOUT, DEFAULT_TV_DIM};
use crate::par::Execution;
use crate::text::{RegionSpec, Representation, VocabKind};
use crate::train::{SelectionGrid, TrainConfig};
use crate::tv::TvConfig;
use crate::ModelShape;

/// Pooling regime: sentiment tasks pool into a single unit, topic tasks
/// also try `k = 10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Topic,
    Sentiment,
}

impl Profile {
    fn default_pooling_ks(self) -> Vec<usize> {
        match self {
            Profile::Topic => vec![1, 10],
            Profile::Sentiment => vec![1],
        }
    }
}

impl FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "topic" => Ok(Profile::Topic),
            "sentiment" => Ok(Profile::Sentiment),
            _ => Err("expected topic or sentiment".into()),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Topic => "topic",
            Profile::Sentiment => "sentiment",
        })
    }
}

/// A tv-embedding to train or account for: representation, region size
/// and output dimension, written `repr:region_size:dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TvSpec {
    pub representation: Representation,
    pub region_size: usize,
    pub dim: usize,
}

impl FromStr for TvSpec {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || format!("tv {s:?}: expected repr:region_size:dim");
        let (repr, p, dim) = match parts.as_slice() {
            [r, p] => (*r, *p, None),
            [r, p, d] => (*r, *p, Some(*d)),
            _ => return Err(bad()),
        };
        let representation = Representation::parse(repr).ok_or_else(bad)?;
        let region_size = p.parse().ok().filter(|&p| p > 0).ok_or_else(bad)?;
        let dim = match dim {
            Some(d) => d.parse().ok().filter(|&d| d > 0).ok_or_else(bad)?,
            None => DEFAULT_TV_DIM,
        };
        Ok(TvSpec {
            representation,
            region_size,
            dim,
        })
    }
}

impl fmt::Display for TvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.representation, self.region_size, self.dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub profile: Profile,
    /// Longer training schedule for small corpora.
    pub small_data: bool,
    pub seed: u64,
    pub parallel: bool,

    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    /// Directory for vocabularies, tv-embeddings, models and metrics.
    pub work_dir: PathBuf,
    /// Model container path; defaults to `work_dir/model.swcn`.
    pub model: Option<PathBuf>,
    /// Validation documents held out from training; `None` picks by size.
    pub holdout: Option<usize>,

    pub word_vocab_size: usize,
    pub ngram_vocab_size: usize,

    pub base_repr: Representation,
    pub dim: usize,
    /// Class count; `None` infers it from the training labels.
    pub num_classes: Option<usize>,
    pub region_size: usize,
    pub pooling_k: usize,

    pub region_sizes: Vec<usize>,
    /// Pooling grid; `None` uses the profile default.
    pub pooling_ks: Option<Vec<usize>>,
    pub lrs: Vec<f64>,

    pub epochs: Option<usize>,
    pub decay_epoch: Option<usize>,
    pub decay_factor: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub init_std: f64,
    pub dropout: f64,
    pub l2: f64,
    pub lr: f64,

    pub tvs: Vec<TvSpec>,
    pub tv_epochs: usize,
    pub tv_lr: f64,
    pub tv_momentum: f64,
    pub tv_batch_size: usize,
    pub tv_negatives: usize,
    pub tv_init_std: f64,

    pub bench_repetitions: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let tv = TvConfig::default();
        RunConfig {
            profile: Profile::Topic,
            small_data: false,
            seed: 1,
            parallel: true,
            train_data: None,
            test_data: None,
            work_dir: PathBuf::from("."),
            model: None,
            holdout: None,
            word_vocab_size: 30_000,
            ngram_vocab_size: 200_000,
            base_repr: Representation::ConcatOneHot,
            dim: DEFAULT_DIM,
            num_classes: None,
            region_size: 3,
            pooling_k: 1,
            region_sizes: vec![3, 5],
            pooling_ks: None,
            lrs: SelectionGrid::DEFAULT_LRS.to_vec(),
            epochs: None,
            decay_epoch: None,
            decay_factor: train.decay_factor,
            momentum: train.momentum,
            batch_size: train.batch_size,
            init_std: train.init_std,
            dropout: DEFAULT_DROPOUT,
            l2: train.top_l2,
            lr: train.initial_lr,
            tvs: Vec::new(),
            tv_epochs: tv.epochs,
            tv_lr: tv.lr,
            tv_momentum: tv.momentum,
            tv_batch_size: tv.batch_size,
            tv_negatives: tv.negatives,
            tv_init_std: tv.init_std,
            bench_repetitions: 5,
        }
    }
}

fn parse<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| e.to_string())
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

fn parse_auto<T: FromStr>(value: &str) -> std::result::Result<Option<T>, String>
where
    T::Err: fmt::Display,
{
    if value == "auto" {
        Ok(None)
    } else {
        parse(value).map(Some)
    }
}

fn parse_repr(value: &str) -> std::result::Result<Representation, String> {
    Representation::parse(value).ok_or_else(|| "expected concat, bow-word or bow-ngram123".into())
}

fn path(value: &str) -> std::result::Result<Option<PathBuf>, String> {
    Ok((!value.is_empty()).then(|| PathBuf::from(value)))
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "profile",
        "small_data",
        "seed",
        "parallel",
        "train_data",
        "test_data",
        "work_dir",
        "model",
        "holdout",
        "word_vocab_size",
        "ngram_vocab_size",
        "base_repr",
        "dim",
        "num_classes",
        "region_size",
        "pooling_k",
        "region_sizes",
        "pooling_ks",
        "lrs",
        "epochs",
        "decay_epoch",
        "decay_factor",
        "momentum",
        "batch_size",
        "init_std",
        "dropout",
        "l2",
        "lr",
        "tvs",
        "tv_epochs",
        "tv_lr",
        "tv_momentum",
        "tv_batch_size",
        "tv_negatives",
        "tv_init_std",
        "bench_repetitions",
    ];

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let r: std::result::Result<(), String> = (|| {
            match key {
                "profile" => self.profile = parse(value)?,
                "small_data" => self.small_data = parse_bool(value)?,
                "seed" => self.seed = parse(value)?,
                "parallel" => self.parallel = parse_bool(value)?,
                "train_data" => self.train_data = path(value)?,
                "test_data" => self.test_data = path(value)?,
                "work_dir" => self.work_dir = PathBuf::from(value),
                "model" => self.model = path(value)?,
                "holdout" => self.holdout = parse_auto(value)?,
                "word_vocab_size" => self.word_vocab_size = parse(value)?,
                "ngram_vocab_size" => self.ngram_vocab_size = parse(value)?,
                "base_repr" => self.base_repr = parse_repr(value)?,
                "dim" => self.dim = parse(value)?,
                "num_classes" => self.num_classes = parse_auto(value)?,
                "region_size" => self.region_size = parse(value)?,
                "pooling_k" => self.pooling_k = parse(value)?,
                "region_sizes" => self.region_sizes = parse_list(value)?,
                "pooling_ks" => {
                    self.pooling_ks = if value == "auto" {
                        None
                    } else {
                        Some(parse_list(value)?)
                    }
                }
                "lrs" => self.lrs = parse_list(value)?,
                "epochs" => self.epochs = parse_auto(value)?,
                "decay_epoch" => self.decay_epoch = parse_auto(value)?,
                "decay_factor" => self.decay_factor = parse(value)?,
                "momentum" => self.momentum = parse(value)?,
                "batch_size" => self.batch_size = parse(value)?,
                "init_std" => self.init_std = parse(value)?,
                "dropout" => self.dropout = parse(value)?,
                "l2" => self.l2 = parse(value)?,
                "lr" => self.lr = parse(value)?,
                "tvs" => self.tvs = parse_list(value)?,
                "tv_epochs" => self.tv_epochs = parse(value)?,
                "tv_lr" => self.tv_lr = parse(value)?,
                "tv_momentum" => self.tv_momentum = parse(value)?,
                "tv_batch_size" => self.tv_batch_size = parse(value)?,
                "tv_negatives" => self.tv_negatives = parse(value)?,
                "tv_init_std" => self.tv_init_std = parse(value)?,
                "bench_repetitions" => self.bench_repetitions = parse(value)?,
                _ => return Err(format!("unknown key {key:?}")),
            }
            Ok(())
        })();
        r.map_err(|m| Error::Config(format!("{key}: {m}")))
    }

    /// Applies a `key = value` document on top of `self`. A key may
    /// appear at most once.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |m: String| Error::Config(format!("line {}: {m}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at("expected key = value".into()))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(at(format!("duplicate key {key:?}")));
            }
            self.set(key, value).map_err(|e| at(e.to_string()))?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?}: expected key=value")))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Defaults, then the optional file, then the overrides.
    pub fn load<S: AsRef<str>>(file: Option<&Path>, overrides: &[S]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        cfg.apply_overrides(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("word_vocab_size", self.word_vocab_size),
            ("ngram_vocab_size", self.ngram_vocab_size),
            ("dim", self.dim),
            ("region_size", self.region_size),
            ("pooling_k", self.pooling_k),
            ("tv_epochs", self.tv_epochs),
            ("tv_batch_size", self.tv_batch_size),
            ("bench_repetitions", self.bench_repetitions),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.num_classes.is_some_and(|c| c < 2) {
            return Err(Error::Config("num_classes must be at least 2".into()));
        }
        if self.region_sizes.is_empty() || self.region_sizes.contains(&0) {
            return Err(Error::Config("region_sizes must be non-empty and positive".into()));
        }
        let ks = self.pooling_ks();
        if ks.is_empty() || ks.contains(&0) {
            return Err(Error::Config("pooling_ks must be non-empty and positive".into()));
        }
        if self.profile == Profile::Sentiment && (ks != [1] || self.pooling_k != 1) {
            return Err(Error::Config("the sentiment profile fixes pooling to k = 1".into()));
        }
        if self.lrs.is_empty() || self.lrs.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::Config("lrs must be non-empty and non-negative".into()));
        }
        if !(self.tv_lr.is_finite() && self.tv_lr >= 0.0) || self.tv_init_std.is_nan() || self.tv_init_std < 0.0 {
            return Err(Error::Config("tv_lr and tv_init_std must be non-negative".into()));
        }
        self.train_config().validate()
    }

    pub fn pooling_ks(&self) -> Vec<usize> {
        self.pooling_ks.clone().unwrap_or_else(|| self.profile.default_pooling_ks())
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let schedule = if self.small_data {
            TrainConfig::small_data()
        } else {
            TrainConfig::default()
        };
        TrainConfig {
            epochs: self.epochs.unwrap_or(schedule.epochs),
            decay_epoch: self.decay_epoch.unwrap_or(schedule.decay_epoch),
            decay_factor: self.decay_factor,
            momentum: self.momentum,
            batch_size: self.batch_size,
            init_std: self.init_std,
            dropout: self.dropout,
            top_l2: self.l2,
            initial_lr: self.lr,
            seed: self.seed,
            exec: self.execution(),
        }
    }

    pub fn grid(&self) -> SelectionGrid {
        SelectionGrid {
            region_sizes: self.region_sizes.clone(),
            pooling_ks: self.pooling_ks(),
            initial_lrs: self.lrs.clone(),
        }
    }

    pub fn tv_config(&self, index: usize) -> TvConfig {
        TvConfig {
            seed: crate::random::mix_seed(self.seed, 0x7F, index as u64),
            epochs: self.tv_epochs,
            lr: self.tv_lr,
            momentum: self.tv_momentum,
            batch_size: self.tv_batch_size,
            negatives: self.tv_negatives,
            init_std: self.tv_init_std,
            exec: self.execution(),
        }
    }

    pub fn vocab_size(&self, kind: VocabKind) -> usize {
        match kind {
            VocabKind::Word => self.word_vocab_size,
            VocabKind::Ngram123 => self.ngram_vocab_size,
        }
    }

    /// Vocabularies needed by the configured model: always words (tv
    /// targets and the default base), n-grams when anything uses them.
    pub fn vocab_kinds(&self) -> Vec<VocabKind> {
        let mut kinds = vec![VocabKind::Word];
        let uses_ngrams = self.base_repr.vocab_kind() == VocabKind::Ngram123
            || self.tvs.iter().any(|t| t.representation.vocab_kind() == VocabKind::Ngram123);
        if uses_ngrams {
            kinds.push(VocabKind::Ngram123);
        }
        kinds
    }

    pub fn vocab_path(&self, kind: VocabKind) -> PathBuf {
        self.work_dir.join(format!("{kind}.vocab"))
    }

    pub fn tv_path(&self, index: usize) -> PathBuf {
        self.work_dir.join(format!("tv-{index}.swcn"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.work_dir.join("model.swcn"))
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.work_dir.join("metrics.txt")
    }

    /// Shape of the configured model at full vocabulary sizes, for
    /// counting parameters without data.
    pub fn shape(&self, num_classes: usize) -> Result<ModelShape> {
        let base = RegionSpec::new(
            self.base_repr,
            self.region_size,
            self.vocab_size(self.base_repr.vocab_kind()),
        )?;
        let tvs = self
            .tvs
            .iter()
            .map(|t| {
                let spec = RegionSpec::new(t.representation, t.region_size, self.vocab_size(t.representation.vocab_kind()))?;
                Ok((spec.input_dim(), t.dim))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelShape {
            base_input_dim: base.input_dim(),
            dim: self.dim,
            tvs,
            pooling_k: self.pooling_k,
            num_classes,
        })
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        fn auto<T: fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map_or("auto".into(), |x| x.to_string())
        }
        fn opt_path(p: &Option<PathBuf>) -> String {
            p.as_ref().map_or(String::new(), |p| p.display().to_string())
        }
        let t = self.train_config();
        writeln!(f, "profile = {}", self.profile)?;
        writeln!(f, "small_data = {}", self.small_data)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "parallel = {}", self.parallel)?;
        writeln!(f, "train_data = {}", opt_path(&self.train_data))?;
        writeln!(f, "test_data = {}", opt_path(&self.test_data))?;
        writeln!(f, "work_dir = {}", self.work_dir.display())?;
        writeln!(f, "model = {}", opt_path(&self.model))?;
        writeln!(f, "holdout = {}", auto(&self.holdout))?;
        writeln!(f, "word_vocab_size = {}", self.word_vocab_size)?;
        writeln!(f, "ngram_vocab_size = {}", self.ngram_vocab_size)?;
        writeln!(f, "base_repr = {}", self.base_repr)?;
        writeln!(f, "dim = {}", self.dim)?;
        writeln!(f, "num_classes = {}", auto(&self.num_classes))?;
        writeln!(f, "region_size = {}", self.region_size)?;
        writeln!(f, "pooling_k = {}", self.pooling_k)?;
        writeln!(f, "region_sizes = {}", list(&self.region_sizes))?;
        writeln!(f, "pooling_ks = {}", list(&self.pooling_ks()))?;
        writeln!(f, "lrs = {}", list(&self.lrs))?;
        writeln!(f, "epochs = {}", t.epochs)?;
        writeln!(f, "decay_epoch = {}", t.decay_epoch)?;
        writeln!(f, "decay_factor = {}", self.decay_factor)?;
        writeln!(f, "momentum = {}", self.momentum)?;
        writeln!(f, "batch_size = {}", self.batch_size)?;
        writeln!(f, "init_std = {}", self.init_std)?;
        writeln!(f, "dropout = {}", self.dropout)?;
        writeln!(f, "l2 = {}", self.l2)?;
        writeln!(f, "lr = {}", self.lr)?;
        writeln!(f, "tvs = {}", list(&self.tvs))?;
        writeln!(f, "tv_epochs = {}", self.tv_epochs)?;
        writeln!(f, "tv_lr = {}", self.tv_lr)?;
        writeln!(f, "tv_momentum = {}", self.tv_momentum)?;
        writeln!(f, "tv_batch_size = {}", self.tv_batch_size)?;
        writeln!(f, "tv_negatives = {}", self.tv_negatives)?;
        writeln!(f, "tv_init_std = {}", self.tv_init_std)?;
        writeln!(f, "bench_repetitions = {}", self.bench_repetitions)
    }
}
