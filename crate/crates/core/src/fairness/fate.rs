use std::fmt;
use std::str::FromStr;

use super::MetricsReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    EOpp0,
    EOpp1,
    EOdd,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::EOpp0, Criterion::EOpp1, Criterion::EOdd];

    pub fn of(self, m: &MetricsReport) -> f64 {
        match self {
            Criterion::EOpp0 => m.eopp0,
            Criterion::EOpp1 => m.eopp1,
            Criterion::EOdd => m.eodd,
        }
    }

    pub fn field(self) -> &'static str {
        match self {
            Criterion::EOpp0 => "eopp0",
            Criterion::EOpp1 => "eopp1",
            Criterion::EOdd => "eodd",
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eopp0" => Ok(Self::EOpp0),
            "eopp1" => Ok(Self::EOpp1),
            "eodd" => Ok(Self::EOdd),
            _ => Err(Error::Config(format!("criterion `{s}`: expected eopp0, eopp1 or eodd"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::EOpp0 => "EOpp0",
            Criterion::EOpp1 => "EOpp1",
            Criterion::EOdd => "EOdd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FateConfig {
    pub lambda: f64,
    pub criterion: Criterion,
}

impl Default for FateConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            criterion: Criterion::EOpp0,
        }
    }
}

/// Fairness-accuracy trade-off efficiency of a mitigation run against a
/// baseline: relative accuracy change minus `lambda` times the relative
/// change of the fairness criterion. Positive means the trade was worth it.
pub fn fate(acc_m: f64, acc_b: f64, fc_m: f64, fc_b: f64, cfg: &FateConfig) -> Result<f64> {
    if acc_b == 0.0 {
        return Err(Error::UndefinedFate("accuracy"));
    }
    if fc_b == 0.0 {
        return Err(Error::UndefinedFate("fairness criterion"));
    }
    if !(cfg.lambda >= 0.0) {
        return Err(Error::Config(format!("FATE lambda must be >= 0, got {}", cfg.lambda)));
    }
    Ok((acc_m - acc_b) / acc_b - cfg.lambda * (fc_m - fc_b) / fc_b)
}

/// FATE for each criterion; `None` where the baseline value is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FateReport {
    pub fate_eopp0: Option<f64>,
    pub fate_eopp1: Option<f64>,
    pub fate_eodd: Option<f64>,
}

impl FateReport {
    /// From mean accuracy and mean criterion values of the two runs.
    pub fn from_means(mitigation: &MetricsReport, baseline: &MetricsReport, lambda: f64) -> Self {
        let one = |c: Criterion| {
            fate(
                mitigation.accuracy,
                baseline.accuracy,
                c.of(mitigation),
                c.of(baseline),
                &FateConfig { lambda, criterion: c },
            )
            .ok()
        };
        Self {
            fate_eopp0: one(Criterion::EOpp0),
            fate_eopp1: one(Criterion::EOpp1),
            fate_eodd: one(Criterion::EOdd),
        }
    }

    pub fn get(&self, c: Criterion) -> Option<f64> {
        match c {
            Criterion::EOpp0 => self.fate_eopp0,
            Criterion::EOpp1 => self.fate_eopp1,
            Criterion::EOdd => self.fate_eodd,
        }
    }
}
