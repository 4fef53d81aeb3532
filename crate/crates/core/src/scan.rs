//! Smallest threshold at which similarity is established.
//!
//! The null hypotheses shrink as the threshold grows. Testing them in a
//! fixed sequence from the largest threshold down, and stopping at the first
//! non-rejection, keeps the level without adjustment. All grid points share
//! one bootstrap seed, so the raw rejections are nearly always monotone;
//! when they are not, `monotone` is false and the step-down result stands.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulate::{Cohort, CohortSummary};
use crate::testkit::{run_similarity_test_summaries, Measure, TestConfig};
use crate::Censoring;

/// Resolution of the optional bisection refinement.
pub const REFINE_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanConfig {
    pub alpha: f64,
    pub bootstrap: usize,
    pub tau: f64,
    pub measure: Measure,
    pub seed: u64,
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub d_hat: f64,
    pub grid: Vec<f64>,
    pub p_values: Vec<f64>,
    pub q_alphas: Vec<f64>,
    pub rejections: Vec<bool>,
    /// Whether the rejections form an up-set along the grid.
    pub monotone: bool,
    /// Smallest grid threshold reached by the step-down sequence.
    pub epsilon_hat: Option<f64>,
    /// `epsilon_hat` narrowed by bisection, when refinement was requested
    /// and a non-rejecting grid point lies below it.
    pub epsilon_hat_refined: Option<f64>,
    pub seed: u64,
}

/// `lo:hi:step` grid, inclusive of `hi` up to rounding.
pub fn threshold_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::InvalidConfig(format!("bad grid {lo}:{hi}:{step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=count)
        .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Default grid 0.01, 0.02, ..., 0.30.
pub fn default_grid() -> Vec<f64> {
    threshold_grid(0.01, 0.30, 0.01).expect("valid constant grid")
}

/// Index of the last rejection in the run that starts at the top of the
/// grid and proceeds downwards while the tests reject.
pub fn step_down(rejections: &[bool]) -> Option<usize> {
    match rejections.iter().rposition(|&r| !r) {
        None if rejections.is_empty() => None,
        None => Some(0),
        Some(i) if i + 1 < rejections.len() => Some(i + 1),
        Some(_) => None,
    }
}

pub fn min_epsilon(
    c1: &Cohort,
    c2: &Cohort,
    censoring1: &Censoring,
    censoring2: &Censoring,
    grid: &[f64],
    cfg: &ScanConfig,
) -> Result<ScanResult> {
    if c1.k() != c2.k() {
        return Err(Error::CauseCountMismatch {
            left: c1.k(),
            right: c2.k(),
        });
    }
    min_epsilon_summaries(
        &c1.summary(),
        &c2.summary(),
        censoring1,
        censoring2,
        grid,
        cfg,
    )
}

pub fn min_epsilon_summaries(
    s1: &CohortSummary,
    s2: &CohortSummary,
    censoring1: &Censoring,
    censoring2: &Censoring,
    grid: &[f64],
    cfg: &ScanConfig,
) -> Result<ScanResult> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty threshold grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig(
            "threshold grid must be strictly increasing".into(),
        ));
    }
    let upper = match cfg.measure {
        Measure::TransitionProbabilities => 1.0,
        Measure::TransitionIntensities => f64::INFINITY,
    };
    if grid.iter().any(|&e| !(e > 0.0 && e < upper)) {
        return Err(Error::InvalidConfig(
            "grid thresholds must lie in (0, 1)".into(),
        ));
    }

    let test_at = |epsilon: f64| {
        let test_cfg = TestConfig {
            epsilon,
            alpha: cfg.alpha,
            bootstrap: cfg.bootstrap,
            tau: cfg.tau,
            measure: cfg.measure,
            seed: cfg.seed,
        };
        run_similarity_test_summaries(s1, s2, censoring1, censoring2, &test_cfg)
    };

    let reports = grid
        .par_iter()
        .map(|&e| test_at(e))
        .collect::<Result<Vec<_>>>()?;

    let rejections: Vec<bool> = reports.iter().map(|r| r.reject).collect();
    let monotone = rejections.windows(2).all(|w| !w[0] || w[1]);
    let first = step_down(&rejections);
    let epsilon_hat = first.map(|i| grid[i]);

    let epsilon_hat_refined = match first {
        Some(i) if cfg.refine && i > 0 => {
            let (mut lo, mut hi) = (grid[i - 1], grid[i]);
            while hi - lo > REFINE_RESOLUTION {
                let mid = 0.5 * (lo + hi);
                if test_at(mid)?.reject {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi)
        }
        Some(i) if cfg.refine => Some(grid[i]),
        _ => None,
    };

    Ok(ScanResult {
        d_hat: reports[0].d_hat,
        grid: grid.to_vec(),
        p_values: reports.iter().map(|r| r.p_value).collect(),
        q_alphas: reports.iter().map(|r| r.q_alpha).collect(),
        rejections,
        monotone,
        epsilon_hat,
        epsilon_hat_refined,
        seed: cfg.seed,
    })
}
