//! Monte Carlo harness for rejection rates of the similarity tests.
//!
//! Seven intensity configurations (one inside the null, one on the margin,
//! five alternatives moving away from it) crossed with four censoring
//! settings. Thresholds are the distances of the margin configuration under
//! each censoring setting, so the margin row sits exactly on the boundary of
//! both tests.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{intensity_distance, sup_distance_with_rates};
use crate::rng::{stream_key, tag, RngStream};
use crate::simulate::PathwaySampler;
use crate::testkit::{run_similarity_test_summaries, Measure, TestConfig};
use crate::{Censoring, Params};

pub const STUDY_TAU: f64 = 90.0;

/// Largest tolerated share of failed replicates before a cell is aborted.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioName {
    Null,
    Margin,
    Alt1,
    Alt2,
    Alt3,
    Alt4,
    Alt5,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 7] = [
        ScenarioName::Null,
        ScenarioName::Margin,
        ScenarioName::Alt1,
        ScenarioName::Alt2,
        ScenarioName::Alt3,
        ScenarioName::Alt4,
        ScenarioName::Alt5,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ScenarioName::Null => "Null",
            ScenarioName::Margin => "Margin",
            ScenarioName::Alt1 => "Alt1",
            ScenarioName::Alt2 => "Alt2",
            ScenarioName::Alt3 => "Alt3",
            ScenarioName::Alt4 => "Alt4",
            ScenarioName::Alt5 => "Alt5",
        }
    }

    /// Intensities `(group 1, group 2)`.
    pub fn intensities(self) -> ([f64; 3], [f64; 3]) {
        match self {
            ScenarioName::Null => ([0.0028, 0.0011, 0.0004], [0.0008, 0.0028, 0.0019]),
            ScenarioName::Margin => ([0.0023, 0.0011, 0.0004], [0.0008, 0.0026, 0.0019]),
            ScenarioName::Alt1 => ([0.0018, 0.0011, 0.0004], [0.0008, 0.0021, 0.0014]),
            ScenarioName::Alt2 => ([0.0013, 0.0011, 0.0004], [0.0008, 0.0016, 0.0014]),
            ScenarioName::Alt3 => ([0.0010, 0.0011, 0.0004], [0.0008, 0.0013, 0.0009]),
            ScenarioName::Alt4 => ([0.0009, 0.0011, 0.0004], [0.0008, 0.0012, 0.0007]),
            ScenarioName::Alt5 => ([0.0009, 0.0011, 0.0004], [0.0008, 0.0012, 0.0005]),
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let name = match lower.as_str() {
            "null" => ScenarioName::Null,
            "margin" => ScenarioName::Margin,
            "alt1" | "alternative1" => ScenarioName::Alt1,
            "alt2" | "alternative2" => ScenarioName::Alt2,
            "alt3" | "alternative3" => ScenarioName::Alt3,
            "alt4" | "alternative4" => ScenarioName::Alt4,
            "alt5" | "alternative5" => ScenarioName::Alt5,
            _ => return Err(Error::InvalidConfig(format!("unknown scenario {s:?}"))),
        };
        Ok(name)
    }
}

/// Censoring settings of the study: administrative at day 90 or
/// exponential with a fixed rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CensoringSetting {
    Adm,
    Exp(f64),
}

impl CensoringSetting {
    pub const ALL: [CensoringSetting; 4] = [
        CensoringSetting::Adm,
        CensoringSetting::Exp(0.002),
        CensoringSetting::Exp(0.005),
        CensoringSetting::Exp(0.01),
    ];

    pub fn spec(self) -> Censoring {
        match self {
            CensoringSetting::Adm => Censoring::Administrative { horizon: STUDY_TAU },
            CensoringSetting::Exp(rate) => Censoring::Exponential { rate },
        }
    }

    pub fn label(self) -> String {
        match self {
            CensoringSetting::Adm => "adm".into(),
            CensoringSetting::Exp(rate) => format!("Exp({rate})"),
        }
    }
}

impl fmt::Display for CensoringSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for CensoringSetting {
    type Err = Error;

    /// Accepts `adm`, `Exp(0.005)`, `exp0.005` or `exp:0.005`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "adm" {
            return Ok(CensoringSetting::Adm);
        }
        let rate = lower
            .strip_prefix("exp")
            .map(|r| {
                r.trim_start_matches(':')
                    .trim_start_matches('(')
                    .trim_end_matches(')')
            })
            .and_then(|r| r.parse::<f64>().ok())
            .filter(|r| *r > 0.0 && r.is_finite())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown censoring setting {s:?}")))?;
        Ok(CensoringSetting::Exp(rate))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: ScenarioName,
    pub group1: Params,
    pub group2: Params,
    pub censoring: CensoringSetting,
    pub tau: f64,
    pub epsilon_int: f64,
    pub epsilon_inf: f64,
}

impl Scenario {
    pub fn new(name: ScenarioName, censoring: CensoringSetting) -> Self {
        let (a, b) = name.intensities();
        let (epsilon_int, epsilon_inf) = margin_thresholds(censoring);
        Self {
            name,
            group1: Params::new(a.to_vec()).expect("positive constants"),
            group2: Params::new(b.to_vec()).expect("positive constants"),
            censoring,
            tau: STUDY_TAU,
            epsilon_int,
            epsilon_inf,
        }
    }

    pub fn epsilon(&self, measure: Measure) -> f64 {
        match measure {
            Measure::TransitionProbabilities => self.epsilon_inf,
            Measure::TransitionIntensities => self.epsilon_int,
        }
    }

    /// True distance of this configuration under its censoring setting.
    pub fn true_distance(&self, measure: Measure) -> f64 {
        match measure {
            Measure::TransitionProbabilities => {
                let psi = self.censoring.spec().censor_rate();
                sup_distance_with_rates(&self.group1, psi, &self.group2, psi, self.tau)
                    .expect("valid scenario")
                    .value
            }
            Measure::TransitionIntensities => {
                intensity_distance(&self.group1, &self.group2).expect("valid scenario")
            }
        }
    }
}

/// `(epsilon_int, epsilon_inf)`: both distances of the margin configuration.
pub fn margin_thresholds(censoring: CensoringSetting) -> (f64, f64) {
    let (a, b) = ScenarioName::Margin.intensities();
    let g1 = Params::new(a.to_vec()).expect("positive constants");
    let g2 = Params::new(b.to_vec()).expect("positive constants");
    let psi = censoring.spec().censor_rate();
    let inf = sup_distance_with_rates(&g1, psi, &g2, psi, STUDY_TAU)
        .expect("valid scenario")
        .value;
    let int = intensity_distance(&g1, &g2).expect("valid scenario");
    (int, inf)
}

/// All seven configurations under all four censoring settings.
pub fn builtin_scenarios() -> Vec<Scenario> {
    ScenarioName::ALL
        .iter()
        .flat_map(|&name| {
            CensoringSetting::ALL
                .iter()
                .map(move |&censoring| Scenario::new(name, censoring))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub censoring: String,
    pub epsilon_int: f64,
    pub epsilon_inf: f64,
    pub arg_time: f64,
    pub arg_cause: usize,
}

/// Thresholds of both tests for every censoring setting.
pub fn threshold_table() -> Vec<ThresholdRow> {
    CensoringSetting::ALL
        .iter()
        .map(|&c| {
            let s = Scenario::new(ScenarioName::Margin, c);
            let psi = c.spec().censor_rate();
            let w = sup_distance_with_rates(&s.group1, psi, &s.group2, psi, s.tau)
                .expect("valid scenario");
            ThresholdRow {
                censoring: c.label(),
                epsilon_int: s.epsilon_int,
                epsilon_inf: w.value,
                arg_time: w.arg_time,
                arg_cause: w.arg_cause,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellConfig {
    pub n1: usize,
    pub n2: usize,
    pub n_sim: usize,
    pub bootstrap: usize,
    pub alpha: f64,
    pub measure: Measure,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub scenario: ScenarioName,
    pub censoring: String,
    pub n1: usize,
    pub n2: usize,
    pub measure: Measure,
    pub n_sim: usize,
    pub bootstrap: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// `(replicate, reason)` of replicates whose test failed; they count as
    /// non-rejections.
    pub failures: Vec<(usize, String)>,
    pub seed: u64,
    pub wall_time: f64,
}

/// Simulates `n_sim` data sets from the scenario and counts rejections.
///
/// Replicate `r` draws group `l` from the stream keyed
/// `(seed, DATA, r, l)` and bootstraps with a seed derived from
/// `(seed, r)`; results do not depend on scheduling.
pub fn run_scenario(scenario: &Scenario, cell: &CellConfig) -> Result<StudyResult> {
    if cell.n_sim == 0 || cell.n1 == 0 || cell.n2 == 0 {
        return Err(Error::InvalidConfig(
            "n_sim and both sample sizes must be at least 1".into(),
        ));
    }
    let start = Instant::now();
    let censoring = scenario.censoring.spec();
    let sampler1 = PathwaySampler::new(&scenario.group1, &censoring)?;
    let sampler2 = PathwaySampler::new(&scenario.group2, &censoring)?;
    let epsilon = scenario.epsilon(cell.measure);
    TestConfig {
        epsilon,
        alpha: cell.alpha,
        bootstrap: cell.bootstrap,
        tau: scenario.tau,
        measure: cell.measure,
        seed: 0,
    }
    .validate()?;

    let outcomes: Vec<Result<bool>> = (0..cell.n_sim)
        .into_par_iter()
        .map(|r| {
            let r = r as u64;
            let s1 = sampler1.sample_summary(
                cell.n1,
                &mut RngStream::keyed(cell.seed, &[tag::DATA, r, 1]),
            );
            let s2 = sampler2.sample_summary(
                cell.n2,
                &mut RngStream::keyed(cell.seed, &[tag::DATA, r, 2]),
            );
            let cfg = TestConfig {
                epsilon,
                alpha: cell.alpha,
                bootstrap: cell.bootstrap,
                tau: scenario.tau,
                measure: cell.measure,
                seed: stream_key(&[tag::TEST_SEED, cell.seed, r]),
            };
            run_similarity_test_summaries(&s1, &s2, &censoring, &censoring, &cfg)
                .map(|rep| rep.reject)
        })
        .collect();

    let mut rejections = 0;
    let mut failures = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(true) => rejections += 1,
            Ok(false) => {}
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_RATE * cell.n_sim as f64 {
        let (first_index, first_reason) = failures[0].clone();
        return Err(Error::StudyAborted {
            failures: failures.len(),
            n_sim: cell.n_sim,
            first_index,
            first_reason,
        });
    }
    Ok(StudyResult {
        scenario: scenario.name,
        censoring: scenario.censoring.label(),
        n1: cell.n1,
        n2: cell.n2,
        measure: cell.measure,
        n_sim: cell.n_sim,
        bootstrap: cell.bootstrap,
        alpha: cell.alpha,
        epsilon,
        rejections,
        rejection_rate: rejections as f64 / cell.n_sim as f64,
        failures,
        seed: cell.seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
