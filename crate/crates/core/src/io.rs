//! File formats: cohort CSV, run and study configuration (TOML), JSON
//! reports and the study results CSV.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan::{threshold_grid, ScanResult};
use crate::simulate::{Cohort, Group, Observation};
use crate::study::{CensoringSetting, ScenarioName, StudyResult};
use crate::testkit::{Measure, TestReport};
use crate::Censoring;

pub const SCHEMA_VERSION: u32 = 1;
pub const COHORT_HEADER: [&str; 3] = ["group", "time", "state"];
pub const STUDY_HEADER: [&str; 11] = [
    "scenario",
    "censoring",
    "n1",
    "n2",
    "measure",
    "n_sim",
    "B",
    "alpha",
    "rejections",
    "rate",
    "seed",
];

/// Reads a `group,time,state` file into the two group cohorts.
///
/// `k` defaults to the largest state observed.
pub fn parse_cohorts(path: &Path, k: Option<usize>) -> Result<(Cohort, Cohort)> {
    let file = std::fs::File::open(path)?;
    read_cohorts(file, k)
}

pub fn read_cohorts<R: Read>(reader: R, k: Option<usize>) -> Result<(Cohort, Cohort)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    match records.next() {
        Some(header) => {
            let header = header?;
            if header.iter().ne(COHORT_HEADER) {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("missing header `{}`", COHORT_HEADER.join(",")),
                });
            }
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    }

    let mut rows: Vec<(usize, Group, Observation)> = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let err = |message: String| Error::Parse { line, message };
        if record.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", record.len())));
        }
        let group = record[0]
            .parse::<u8>()
            .ok()
            .and_then(Group::from_number)
            .ok_or_else(|| err(format!("group must be 1 or 2, got {:?}", &record[0])))?;
        let time: f64 = record[1]
            .parse()
            .map_err(|_| err(format!("time is not a number: {:?}", &record[1])))?;
        if !(time > 0.0) || !time.is_finite() {
            return Err(err(format!("time must be positive, got {time}")));
        }
        let state: usize = record[2].parse().map_err(|_| {
            err(format!(
                "state is not a non-negative integer: {:?}",
                &record[2]
            ))
        })?;
        if let Some(k) = k {
            if state > k {
                return Err(err(format!("state {state} exceeds k = {k}")));
            }
        }
        rows.push((line, group, Observation { time, state }));
    }

    let k = match k {
        Some(k) => k,
        None => rows.iter().map(|r| r.2.state).max().unwrap_or(0),
    };
    if k == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no events observed; pass the number of causes explicitly".into(),
        });
    }
    let split = |g: Group| -> Result<Cohort> {
        let obs: Vec<Observation> = rows.iter().filter(|r| r.1 == g).map(|r| r.2).collect();
        if obs.is_empty() {
            return Err(Error::Parse {
                line: rows.last().map_or(1, |r| r.0),
                message: format!("group {} has no rows", g.number()),
            });
        }
        Cohort::new(obs, k, g)
    };
    Ok((split(Group::First)?, split(Group::Second)?))
}

/// Writes both cohorts in the format read by [`read_cohorts`]. Times use the
/// shortest representation that parses back to the same value.
pub fn write_cohorts<W: Write>(writer: W, c1: &Cohort, c2: &Cohort) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(COHORT_HEADER)?;
    for cohort in [c1, c2] {
        let group = cohort.group().number().to_string();
        for obs in cohort.observations() {
            wtr.write_record([
                group.as_str(),
                &obs.time.to_string(),
                &obs.state.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `adm:<T>`, `exp` or `exp:<rate>`. A bare `exp` (rate 0) is enough when
/// the rate is estimated from data.
pub fn parse_censoring(s: &str) -> Result<Censoring> {
    let lower = s.trim().to_ascii_lowercase();
    let bad = || Error::InvalidCensoring(format!("{s:?} (expected adm:<T>, exp or exp:<rate>)"));
    if lower == "exp" {
        return Censoring::exponential(0.0);
    }
    if let Some(rate) = lower.strip_prefix("exp:") {
        return Censoring::exponential(rate.parse().map_err(|_| bad())?);
    }
    if let Some(horizon) = lower.strip_prefix("adm:") {
        return Censoring::administrative(horizon.parse().map_err(|_| bad())?);
    }
    Err(bad())
}

/// `lo:hi:step`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidConfig(format!("grid {s:?} (expected lo:hi:step)"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    threshold_grid(nums[0], nums[1], nums[2])
}

/// Settings of a `test` or `scan` run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub measure: Option<Measure>,
    pub epsilon: Option<f64>,
    /// `lo:hi:step`
    pub grid: Option<String>,
    pub alpha: Option<f64>,
    pub bootstrap: Option<usize>,
    pub tau: Option<f64>,
    /// Both groups, as accepted by [`parse_censoring`].
    pub censoring: Option<String>,
    /// Overrides `censoring` for group 2.
    pub censoring2: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub k: Option<usize>,
    pub refine: Option<bool>,
    pub out: Option<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn check(&self) -> Result<()> {
        if self.epsilon.is_some() && self.grid.is_some() {
            return Err(Error::InvalidConfig(
                "epsilon and grid are mutually exclusive".into(),
            ));
        }
        if let Some(g) = &self.grid {
            parse_grid(g)?;
        }
        for c in self.censoring.iter().chain(&self.censoring2) {
            parse_censoring(c)?;
        }
        Ok(())
    }
}

/// Settings of a `study` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub scenarios: Vec<String>,
    pub censorings: Vec<String>,
    /// `[[n1, n2], ...]`
    pub sizes: Vec<[usize; 2]>,
    #[serde(default = "default_measures")]
    pub measures: Vec<Measure>,
    #[serde(default = "default_n_sim")]
    pub n_sim: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<String>,
}

fn default_measures() -> Vec<Measure> {
    vec![Measure::TransitionProbabilities]
}
fn default_n_sim() -> usize {
    300
}
fn default_bootstrap() -> usize {
    300
}
fn default_alpha() -> f64 {
    0.05
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn scenario_names(&self) -> Result<Vec<ScenarioName>> {
        self.scenarios.iter().map(|s| s.parse()).collect()
    }

    pub fn censoring_settings(&self) -> Result<Vec<CensoringSetting>> {
        self.censorings.iter().map(|s| s.parse()).collect()
    }
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    kind: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn test_report_json(report: &TestReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        kind: "test",
        body: report,
    })?)
}

pub fn scan_result_json(result: &ScanResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        kind: "scan",
        body: result,
    })?)
}

/// One results-CSV row per study cell.
pub fn write_study_csv<W: Write>(writer: W, results: &[StudyResult]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(STUDY_HEADER)?;
    for r in results {
        wtr.write_record([
            r.scenario.label().to_string(),
            r.censoring.clone(),
            r.n1.to_string(),
            r.n2.to_string(),
            r.measure.label().to_string(),
            r.n_sim.to_string(),
            r.bootstrap.to_string(),
            r.alpha.to_string(),
            r.rejections.to_string(),
            format!("{:.4}", r.rejection_rate),
            r.seed.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<(Cohort, Cohort)> {
        read_cohorts(text.as_bytes(), None)
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn small_file() {
        let (c1, c2) = read("group,time,state\n1,10,1\n1,90,0\n2,5,2\n").unwrap();
        assert_eq!((c1.len(), c2.len(), c1.k()), (2, 1, 2));
        assert_eq!(
            c1.observations()[1],
            Observation {
                time: 90.0,
                state: 0
            }
        );
    }

    #[test]
    fn parse_errors_name_lines() {
        assert_eq!(line_of(read("1,10,1\n2,5,2\n").unwrap_err()), 1);
        assert_eq!(
            line_of(read("group,time,state\n1,10,1\n2,5,2\n1,0,1\n").unwrap_err()),
            4
        );
        assert_eq!(line_of(read("group,time,state\n1,abc,1\n").unwrap_err()), 2);
        assert_eq!(
            line_of(read("group,time,state\n1,3,x\n2,3,1\n").unwrap_err()),
            2
        );
        assert_eq!(line_of(read("group,time,state\n3,3,1\n").unwrap_err()), 2);
        assert!(read("group,time,state\n1,3,1\n").is_err());
        assert_eq!(
            line_of(
                read_cohorts("group,time,state\n1,3,1\n2,4,3\n".as_bytes(), Some(2)).unwrap_err()
            ),
            3
        );
        assert!(read("group,time,state\n1,3,0\n2,4,0\n").is_err());
    }

    #[test]
    fn censoring_strings() {
        assert_eq!(
            parse_censoring("adm:90").unwrap(),
            Censoring::Administrative { horizon: 90.0 }
        );
        assert_eq!(
            parse_censoring("exp").unwrap(),
            Censoring::Exponential { rate: 0.0 }
        );
        assert_eq!(
            parse_censoring("EXP:0.01").unwrap(),
            Censoring::Exponential { rate: 0.01 }
        );
        for bad in ["adm", "adm:-1", "exp:x", "weibull"] {
            assert!(parse_censoring(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn run_config_exclusivity() {
        assert!(RunConfig::from_toml("epsilon = 0.1\ngrid = \"0.05:0.1:0.01\"").is_err());
        let cfg = RunConfig::from_toml(
            "measure = \"prob\"\ngrid = \"0.05:0.13:0.01\"\ncensoring = \"adm:90\"\nseed = 3",
        )
        .unwrap();
        assert_eq!(cfg.measure, Some(Measure::TransitionProbabilities));
        assert!(RunConfig::from_toml("colour = 1").is_err());
    }

    #[test]
    fn study_config_defaults() {
        let cfg = StudyConfig::from_toml(
            "scenarios = [\"Margin\", \"Null\"]\ncensorings = [\"adm\", \"Exp(0.005)\"]\nsizes = [[200, 200]]",
        )
        .unwrap();
        assert_eq!(cfg.n_sim, 300);
        assert_eq!(cfg.measures, vec![Measure::TransitionProbabilities]);
        assert_eq!(
            cfg.censoring_settings().unwrap()[1],
            CensoringSetting::Exp(0.005)
        );
    }
}
