use serde::{Deserialize, Serialize};

use crate::ctime::RefreshSchedule;
use crate::error::{invalid, Result, UrnError};
use crate::reinforcement::ReinforcementSeq;
use crate::urn_sim::default_window;

pub const SCHEMA_VERSION: u32 = 1;

fn default_radius() -> f64 {
    0.05
}

fn default_level() -> f64 {
    0.95
}

fn default_threshold() -> f64 {
    0.99
}

fn default_d() -> usize {
    2
}

fn default_balls() -> u64 {
    1
}

/// Simulator selection. `W` is given either as `m` (meaning `W(n) = n^m`) or as a full `seq`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Ium {
        #[serde(default = "default_d")]
        d: usize,
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<ReinforcementSeq>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b0: Option<Vec<u64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r0: Option<Vec<u64>>,
    },
    Multicolor {
        nc: usize,
        #[serde(default = "default_balls")]
        d: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<ReinforcementSeq>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<Vec<u64>>,
    },
    Sequential {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<ReinforcementSeq>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b0: Option<[u64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r0: Option<[u64; 2]>,
    },
    Embedding {
        nc: usize,
        #[serde(default = "default_balls")]
        d: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<ReinforcementSeq>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<Vec<u64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        schedule: Option<RefreshSchedule>,
    },
}

impl ModelConfig {
    /// The reinforcement sequence named by `m` or `seq`.
    pub fn sequence(&self) -> Result<ReinforcementSeq> {
        let (m, seq) = match self {
            ModelConfig::Ium { m, seq, .. }
            | ModelConfig::Multicolor { m, seq, .. }
            | ModelConfig::Sequential { m, seq, .. }
            | ModelConfig::Embedding { m, seq, .. } => (m, seq),
        };
        match (m, seq) {
            (Some(m), None) => ReinforcementSeq::monomial(*m),
            (None, Some(s)) => Ok(s.clone()),
            _ => invalid("give exactly one of `m` and `seq`"),
        }
    }

    /// Shape checks that need no simulation; weight positivity is checked at init.
    pub fn validate(&self) -> Result<()> {
        fn len_is<T>(v: &Option<Vec<T>>, n: usize, what: &str) -> Result<()> {
            match v {
                Some(v) if v.len() != n => {
                    invalid(format!("`{what}` must have length {n}, got {}", v.len()))
                }
                _ => Ok(()),
            }
        }
        match self {
            ModelConfig::Ium { d, p, b0, r0, .. } => {
                if *d == 0 {
                    return invalid("need at least one urn");
                }
                if !(0.0..=1.0).contains(p) {
                    return invalid(format!("p must lie in [0, 1], got {p}"));
                }
                len_is(b0, *d, "b0")?;
                len_is(r0, *d, "r0")?;
            }
            ModelConfig::Multicolor { nc, d, a, .. } | ModelConfig::Embedding { nc, d, a, .. } => {
                if *nc < 2 {
                    return invalid("need at least two colors");
                }
                if *d == 0 {
                    return invalid("d must be at least 1");
                }
                len_is(a, *nc, "a")?;
            }
            ModelConfig::Sequential { .. } => {}
        }
        self.sequence()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub schema: u32,
    pub model: ModelConfig,
    pub n_steps: u64,
    pub n_runs: u64,
    /// Sampling stride; defaults to `n_steps / 1000`, at least 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<u64>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Monopoly window; defaults to the final fifth of the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<u64>,
    /// Master seed.
    pub seed: u64,
    /// Confidence level of the reported intervals.
    #[serde(default = "default_level")]
    pub level: f64,
}

impl EnsembleConfig {
    pub fn new(model: ModelConfig, n_steps: u64, n_runs: u64, seed: u64) -> Self {
        EnsembleConfig {
            schema: SCHEMA_VERSION,
            model,
            n_steps,
            n_runs,
            record_every: None,
            radius: default_radius(),
            window: None,
            seed,
            level: default_level(),
        }
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: EnsembleConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return invalid(format!(
                "unsupported schema {}, expected {SCHEMA_VERSION}",
                self.schema
            ));
        }
        if self.n_runs == 0 {
            return invalid("n_runs must be at least 1");
        }
        if !(self.radius > 0.0 && self.radius < 0.5) {
            return invalid(format!("radius must lie in (0, 0.5), got {}", self.radius));
        }
        if self.record_every == Some(0) {
            return invalid("record_every must be at least 1");
        }
        if let Some(w) = self.window {
            if w == 0 || w > self.n_steps {
                return invalid(format!("window must lie in 1..={}", self.n_steps));
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return invalid("level must lie in (0, 1)");
        }
        self.model.validate()
    }

    pub fn record_every(&self) -> u64 {
        self.record_every.unwrap_or((self.n_steps / 1000).max(1))
    }

    /// `None` for zero-step runs, where no window exists.
    pub fn window(&self) -> Option<u64> {
        (self.n_steps > 0).then(|| self.window.unwrap_or_else(|| default_window(self.n_steps)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub schema: u32,
    pub m: u32,
    pub p_grid: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Per-point ensemble; its `m` and `p` are replaced at each grid point.
    pub base: EnsembleConfig,
}

impl ScanConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScanConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return invalid(format!(
                "unsupported schema {}, expected {SCHEMA_VERSION}",
                self.schema
            ));
        }
        if self.p_grid.is_empty() {
            return invalid("p grid is empty");
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(UrnError::InvalidArgument(format!(
                "grid value {p} outside [0, 1]"
            )));
        }
        self.base.validate()
    }
}
