use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::size::parse_bytes;
use crate::store::DEFAULT_BLOCK_SIZE;

/// Prefix of the environment variables read by [`EngineConfig::apply_env`].
pub const ENV_PREFIX: &str = "OOCGEMM_";

/// Knobs of one multiply.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineConfig {
    /// Accounted memory budget `C` shared by the three buffers.
    pub memory_capacity_bytes: u64,
    /// Block size of the output matrix.
    pub block_size_bytes: usize,
    pub threads: usize,
    /// Fraction of the worst-case output row provisioned per worker.
    pub alpha: f64,
    /// Deal former-matrix blocks evenly; otherwise deal rows round-robin.
    pub block_balance: bool,
    /// Sum intermediates column-wise before they leave memory.
    pub partial_aggregation: bool,
    /// Where spill runs go; the output's directory when unset.
    pub spill_dir: Option<PathBuf>,
    pub output_path: PathBuf,
}

impl EngineConfig {
    pub fn new(output_path: impl Into<PathBuf>) -> Self {
        EngineConfig {
            memory_capacity_bytes: 256 << 20,
            block_size_bytes: DEFAULT_BLOCK_SIZE,
            threads: 4,
            alpha: 0.125,
            block_balance: true,
            partial_aggregation: true,
            spill_dir: None,
            output_path: output_path.into(),
        }
    }

    pub fn with_memory(mut self, bytes: u64) -> Self {
        self.memory_capacity_bytes = bytes;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_block_size(mut self, bytes: usize) -> Self {
        self.block_size_bytes = bytes;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_spill_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.spill_dir = Some(dir.into());
        self
    }

    pub fn set_strategy_toggles(mut self, block_balance: bool, partial_aggregation: bool) -> Self {
        self.block_balance = block_balance;
        self.partial_aggregation = partial_aggregation;
        self
    }

    pub fn with_variant(self, v: Variant) -> Self {
        let (bw, pa) = v.toggles();
        self.set_strategy_toggles(bw, pa)
    }

    pub fn variant(&self) -> Variant {
        Variant::from_toggles(self.block_balance, self.partial_aggregation)
    }

    /// Overrides fields from `OOCGEMM_MEMORY`, `OOCGEMM_BLOCK_SIZE`,
    /// `OOCGEMM_THREADS`, `OOCGEMM_ALPHA`, `OOCGEMM_BLOCK_BALANCE`,
    /// `OOCGEMM_PARTIAL_AGG` and `OOCGEMM_SPILL_DIR`.
    pub fn apply_env(self) -> Result<Self> {
        self.apply_vars(|name| std::env::var(name).ok())
    }

    pub fn apply_vars(mut self, var: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let get = |key: &str| var(&format!("{ENV_PREFIX}{key}"));
        if let Some(v) = get("MEMORY") {
            self.memory_capacity_bytes = parse_bytes(&v)?;
        }
        if let Some(v) = get("BLOCK_SIZE") {
            self.block_size_bytes = parse_bytes(&v)? as usize;
        }
        if let Some(v) = get("THREADS") {
            self.threads = parse_env("THREADS", &v)?;
        }
        if let Some(v) = get("ALPHA") {
            self.alpha = parse_env("ALPHA", &v)?;
        }
        if let Some(v) = get("BLOCK_BALANCE") {
            self.block_balance = parse_flag("BLOCK_BALANCE", &v)?;
        }
        if let Some(v) = get("PARTIAL_AGG") {
            self.partial_aggregation = parse_flag("PARTIAL_AGG", &v)?;
        }
        if let Some(v) = get("SPILL_DIR") {
            self.spill_dir = Some(v.into());
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        crate::store::format::check_block_size(self.block_size_bytes)
    }
}

fn parse_env<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{ENV_PREFIX}{key}: cannot parse {v:?}")))
}

fn parse_flag(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "{ENV_PREFIX}{key}: expected a boolean, got {v:?}"
        ))),
    }
}

/// The four strategy combinations compared in the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Row-based allocation, no partial aggregation.
    No,
    /// Block-based allocation only.
    Bw,
    /// Partial aggregation only.
    Pa,
    /// Both strategies.
    All,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::No, Variant::Bw, Variant::Pa, Variant::All];

    pub fn from_toggles(block_balance: bool, partial_aggregation: bool) -> Self {
        match (block_balance, partial_aggregation) {
            (false, false) => Variant::No,
            (true, false) => Variant::Bw,
            (false, true) => Variant::Pa,
            (true, true) => Variant::All,
        }
    }

    /// `(block_balance, partial_aggregation)`.
    pub fn toggles(self) -> (bool, bool) {
        match self {
            Variant::No => (false, false),
            Variant::Bw => (true, false),
            Variant::Pa => (false, true),
            Variant::All => (true, true),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::No => "no",
            Variant::Bw => "bw",
            Variant::Pa => "pa",
            Variant::All => "all",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!("unknown variant {s:?}; expected no, bw, pa or all"))
            })
    }
}
