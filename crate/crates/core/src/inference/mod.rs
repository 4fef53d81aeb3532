//! Maximum likelihood under constant intensities.
//!
//! Unconstrained estimates are closed-form count/exposure ratios. The
//! constrained estimators used by the bootstrap tests live in
//! [`constrained`].

pub mod constrained;
pub mod optim;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulate::{Cohort, CohortSummary};
use crate::{Censoring, Params};

pub use constrained::{
    constrained_fit, constrained_fit_intensity, constrained_fit_summaries, ConstrainedFit,
};

/// Unconstrained or constrained estimates for both groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedPair {
    pub group1: Params,
    pub group2: Params,
    /// Censoring rate estimate, present iff the group is exponentially censored.
    pub psi1: Option<f64>,
    pub psi2: Option<f64>,
    /// Sum of both groups' log-likelihoods.
    pub loglik: f64,
}

impl FittedPair {
    pub(crate) fn new(
        s1: &CohortSummary,
        s2: &CohortSummary,
        group1: Params,
        group2: Params,
        psi1: Option<f64>,
        psi2: Option<f64>,
    ) -> Result<Self> {
        let loglik =
            summary_log_likelihood(s1, &group1, psi1)? + summary_log_likelihood(s2, &group2, psi2)?;
        Ok(Self {
            group1,
            group2,
            psi1,
            psi2,
            loglik,
        })
    }

    /// Rates entering the transition probabilities (0 when administrative).
    pub fn censor_rates(&self) -> (f64, f64) {
        (self.psi1.unwrap_or(0.0), self.psi2.unwrap_or(0.0))
    }

    /// Censoring mechanisms to simulate bootstrap data from.
    pub fn bootstrap_censoring(&self, c1: &Censoring, c2: &Censoring) -> (Censoring, Censoring) {
        let pick = |c: &Censoring, psi: Option<f64>| match (c, psi) {
            (Censoring::Exponential { .. }, Some(rate)) => Censoring::Exponential { rate },
            _ => *c,
        };
        (pick(c1, self.psi1), pick(c2, self.psi2))
    }
}

fn check_exposure(summary: &CohortSummary) -> Result<()> {
    if summary.n == 0 {
        return Err(Error::EmptyCohort);
    }
    if !(summary.total_time > 0.0) {
        return Err(Error::ZeroTotalTime);
    }
    Ok(())
}

/// `alpha_j = events_j / total time`.
pub fn mle_intensities(cohort: &Cohort) -> Result<Params> {
    mle_intensities_summary(&cohort.summary())
}

pub fn mle_intensities_summary(summary: &CohortSummary) -> Result<Params> {
    check_exposure(summary)?;
    Params::from_estimates(
        summary.counts[1..]
            .iter()
            .map(|&d| d as f64 / summary.total_time)
            .collect(),
    )
}

/// `psi = censored / total time` (exponential censoring).
pub fn mle_censoring_rate(cohort: &Cohort) -> Result<f64> {
    mle_censoring_rate_summary(&cohort.summary())
}

pub fn mle_censoring_rate_summary(summary: &CohortSummary) -> Result<f64> {
    check_exposure(summary)?;
    Ok(summary.censored() as f64 / summary.total_time)
}

/// Log-likelihood of one group.
///
/// Administrative censoring: `-alpha_0 * sum(t) + sum_j d_j ln alpha_j`.
/// Exponential censoring with rate `psi` adds `-psi * sum(t) + c ln psi`,
/// `c` the number censored. No additive constants are dropped beyond these.
pub fn log_likelihood(cohort: &Cohort, params: &Params, censoring: &Censoring) -> Result<f64> {
    if cohort.k() != params.k() {
        return Err(Error::CauseCountMismatch {
            left: cohort.k(),
            right: params.k(),
        });
    }
    let psi = match censoring {
        Censoring::Administrative { .. } => None,
        Censoring::Exponential { rate } => Some(*rate),
    };
    summary_log_likelihood(&cohort.summary(), params, psi)
}

pub(crate) fn summary_log_likelihood(
    summary: &CohortSummary,
    params: &Params,
    psi: Option<f64>,
) -> Result<f64> {
    let mut ll = -params.all_cause_hazard() * summary.total_time;
    for (j, (&d, &a)) in summary.counts[1..]
        .iter()
        .zip(params.intensities())
        .enumerate()
    {
        if d > 0 {
            if a <= 0.0 {
                return Err(Error::ZeroRateWithEvents(format!(
                    "cause {} has {d} events but zero intensity",
                    j + 1
                )));
            }
            ll += d as f64 * a.ln();
        }
    }
    if let Some(psi) = psi {
        ll -= psi * summary.total_time;
        let c = summary.censored();
        if c > 0 {
            if psi <= 0.0 {
                return Err(Error::ZeroRateWithEvents(format!(
                    "{c} censored observations but zero censoring rate"
                )));
            }
            ll += c as f64 * psi.ln();
        }
    }
    Ok(ll)
}

/// Closed-form estimates for both groups; `psi` is estimated for every
/// exponentially censored group (the censoring rate inside `Exponential`
/// is ignored here).
pub fn fit_unconstrained(
    c1: &Cohort,
    c2: &Cohort,
    censoring1: &Censoring,
    censoring2: &Censoring,
) -> Result<FittedPair> {
    fit_unconstrained_summaries(&c1.summary(), &c2.summary(), censoring1, censoring2)
}

pub fn fit_unconstrained_summaries(
    s1: &CohortSummary,
    s2: &CohortSummary,
    censoring1: &Censoring,
    censoring2: &Censoring,
) -> Result<FittedPair> {
    if s1.k() != s2.k() {
        return Err(Error::CauseCountMismatch {
            left: s1.k(),
            right: s2.k(),
        });
    }
    let psi = |s: &CohortSummary, c: &Censoring| -> Result<Option<f64>> {
        if c.is_exponential() {
            mle_censoring_rate_summary(s).map(Some)
        } else {
            Ok(None)
        }
    };
    FittedPair::new(
        s1,
        s2,
        mle_intensities_summary(s1)?,
        mle_intensities_summary(s2)?,
        psi(s1, censoring1)?,
        psi(s2, censoring2)?,
    )
}
