use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Metric;

/// Base of every `log n` in the phase schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Two,
    Natural,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::Natural => x.ln(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" | "two" => Ok(LogBase::Two),
            "e" | "natural" | "ln" => Ok(LogBase::Natural),
            other => Err(Error::range("log_base", format!("unknown log base {other:?}"))),
        }
    }
}

/// Run parameters as supplied by the caller. Turn into a [`ValidatedConfig`]
/// with [`KormConfig::validate`] before running.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KormConfig {
    /// Lower bound on the number of facilities.
    pub k: usize,
    /// Number of phases a temporal candidate outlier is watched before a verdict.
    pub score_threshold: u32,
    pub gamma: f64,
    pub beta: f64,
    /// Raw points per chunk.
    pub chunk_size: usize,
    pub seed: u64,
    pub metric: Metric,
    pub log_base: LogBase,
    /// Parallel ONLINE-FL invocations per phase are `ceil(factor * log n)`.
    pub invocation_factor: u32,
    /// Total stream length `n`. Required for unbounded input; derived from the
    /// data for in-memory runs.
    pub stream_len: Option<u64>,
    /// Approximation factor `c` of the second beta condition. Only checked
    /// (as a warning) when set.
    pub approx_factor: Option<f64>,
    /// Record per-invocation statistics in phase records.
    pub trace: bool,
}

impl Default for KormConfig {
    fn default() -> Self {
        KormConfig {
            k: 2,
            score_threshold: 2,
            gamma: 34.0,
            beta: 34.0,
            chunk_size: 500,
            seed: 0,
            metric: Metric::SquaredEuclidean,
            log_base: LogBase::Two,
            invocation_factor: 2,
            stream_len: None,
            approx_factor: None,
            trace: false,
        }
    }
}

/// Both sides of `gamma + 4(1 + 4(beta + gamma)) <= gamma * beta`.
pub fn constraint_sides(gamma: f64, beta: f64) -> (f64, f64) {
    (gamma + 4.0 * (1.0 + 4.0 * (beta + gamma)), gamma * beta)
}

impl KormConfig {
    pub fn validate(self) -> Result<ValidatedConfig> {
        if self.k == 0 {
            return Err(Error::range("k", "must be at least 1"));
        }
        if self.chunk_size < 2 {
            return Err(Error::range("chunk_size", "must be at least 2"));
        }
        if self.k >= self.chunk_size {
            return Err(Error::range(
                "k",
                format!("k={} must be below chunk size {}", self.k, self.chunk_size),
            ));
        }
        if self.score_threshold == 0 {
            return Err(Error::range("score_threshold", "must be at least 1"));
        }
        for (name, v) in [("gamma", self.gamma), ("beta", self.beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::range(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.invocation_factor == 0 {
            return Err(Error::range("invocation_factor", "must be at least 1"));
        }
        if self.stream_len == Some(0) {
            return Err(Error::range("stream_len", "must be at least 1"));
        }
        let (lhs, rhs) = constraint_sides(self.gamma, self.beta);
        if lhs > rhs {
            return Err(Error::Constraint { lhs, rhs });
        }
        let mut warnings = Vec::new();
        if let Some(c) = self.approx_factor {
            let need = 2.0 * c * (1.0 + self.gamma) + self.gamma;
            if self.beta < need {
                warnings.push(format!(
                    "beta={} is below 2c(1+gamma)+gamma={} for c={}",
                    self.beta, need, c
                ));
            }
        }
        Ok(ValidatedConfig {
            inner: self,
            warnings,
        })
    }
}

/// A configuration that passed [`KormConfig::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    inner: KormConfig,
    warnings: Vec<String>,
}

impl ValidatedConfig {
    pub fn get(&self) -> &KormConfig {
        &self.inner
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Same configuration with `stream_len` filled in. Lengths of zero are
    /// clamped to one so the schedule stays defined.
    pub fn with_stream_len(&self, n: u64) -> ValidatedConfig {
        let mut out = self.clone();
        out.inner.stream_len = Some(n.max(1));
        out
    }
}

impl std::ops::Deref for ValidatedConfig {
    type Target = KormConfig;

    fn deref(&self) -> &KormConfig {
        &self.inner
    }
}
