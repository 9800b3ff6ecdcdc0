use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::coupling::DEFAULT_MAX_PAIRS;
use crate::error::{Error, Result};
use crate::numerics::adam::DEFAULT_LEARNING_RATE;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_bags: usize,
    /// Weight of the coupling loss; 0 disables coupling.
    pub lambda_couple: f64,
    pub m_max: usize,
    pub seed: u64,
    /// Write a checkpoint every this many epochs; 0 writes only the initial and final ones.
    pub checkpoint_every: usize,
    pub corpus: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub dev_corpus: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: 30,
            batch_bags: 8,
            lambda_couple: 1.0,
            m_max: DEFAULT_MAX_PAIRS,
            seed: 1,
            checkpoint_every: 0,
            corpus: None,
            schema: None,
            embeddings: None,
            output_dir: None,
            dev_corpus: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if !(self.lambda_couple >= 0.0 && self.lambda_couple.is_finite()) {
            return Err(Error::InvalidArgument("lambda_couple must be >= 0".into()));
        }
        if self.batch_bags == 0 {
            return Err(Error::InvalidArgument("batch_bags must be positive".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
        }
        let path = || Some(PathBuf::from(value));
        match key {
            "learning_rate" => self.learning_rate = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_bags" => self.batch_bags = num(key, value)?,
            "lambda_couple" => self.lambda_couple = num(key, value)?,
            "m_max" => self.m_max = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "corpus" => self.corpus = path(),
            "schema" => self.schema = path(),
            "embeddings" => self.embeddings = path(),
            "output_dir" => self.output_dir = path(),
            "dev_corpus" => self.dev_corpus = path(),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Parses a flat `key = value` file; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                message: format!("expected key = value, got {raw:?}"),
            })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|message| Error::Config { line: i + 1, message })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "learning_rate = {:?}", self.learning_rate);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_bags = {}", self.batch_bags);
        let _ = writeln!(s, "lambda_couple = {:?}", self.lambda_couple);
        let _ = writeln!(s, "m_max = {}", self.m_max);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "checkpoint_every = {}", self.checkpoint_every);
        for (k, v) in [
            ("corpus", &self.corpus),
            ("schema", &self.schema),
            ("embeddings", &self.embeddings),
            ("output_dir", &self.output_dir),
            ("dev_corpus", &self.dev_corpus),
        ] {
            if let Some(p) = v {
                let _ = writeln!(s, "{k} = {}", p.display());
            }
        }
        s
    }
}
