//! Constrained parametric bootstrap similarity tests.
//!
//! `H0: d >= epsilon` against `H1: d < epsilon`, where `d` is either the
//! sup-norm distance between the groups' transition probabilities on
//! `[0, tau]` or the largest difference of their intensities. Bootstrap
//! samples are drawn from estimates placed on the boundary `d = epsilon`
//! (or from the unconstrained estimates when they already lie in the null).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{
    constrained_fit_intensity, constrained_fit_summaries, fit_unconstrained_summaries,
    mle_censoring_rate_summary, mle_intensities_summary, ConstrainedFit, FittedPair,
};
use crate::model::{intensity_witness, sup_distance_with_rates, IntensityWitness};
use crate::rng::{tag, RngStream};
use crate::simulate::{Cohort, CohortSummary, PathwaySampler};
use crate::{Censoring, Params, Witness};

/// Which similarity measure the test is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "prob")]
    TransitionProbabilities,
    #[serde(rename = "int")]
    TransitionIntensities,
}

impl Measure {
    pub fn label(self) -> &'static str {
        match self {
            Measure::TransitionProbabilities => "prob",
            Measure::TransitionIntensities => "int",
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prob" => Ok(Measure::TransitionProbabilities),
            "int" => Ok(Measure::TransitionIntensities),
            other => Err(Error::InvalidConfig(format!(
                "unknown measure {other:?} (expected prob or int)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub bootstrap: usize,
    pub tau: f64,
    pub measure: Measure,
    pub seed: u64,
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.measure == Measure::TransitionProbabilities && self.epsilon >= 1.0 {
            return bad(format!("epsilon must be below 1, got {}", self.epsilon));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad(format!("alpha must lie in (0, 0.5), got {}", self.alpha));
        }
        if self.bootstrap < 100 {
            return bad(format!(
                "need at least 100 bootstrap replicates, got {}",
                self.bootstrap
            ));
        }
        if quantile_rank(self.bootstrap, self.alpha) == 0 {
            return bad(format!(
                "alpha * B must be at least 1 (alpha {}, B {})",
                self.alpha, self.bootstrap
            ));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidHorizon(self.tau));
        }
        Ok(())
    }
}

/// Where the observed statistic is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum StatWitness {
    Probabilities(Witness),
    Intensities(IntensityWitness<f64>),
}

/// Parameters the bootstrap samples were drawn from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum BootstrapSource {
    /// `d_hat >= epsilon`: the unconstrained estimates already lie in the null.
    UnconstrainedReused,
    Constrained(ConstrainedFit),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub config: TestConfig,
    pub n1: usize,
    pub n2: usize,
    pub d_hat: f64,
    pub witness: StatWitness,
    pub fits_unconstrained: FittedPair,
    pub fits_constrained: BootstrapSource,
    pub bootstrap_stats: Vec<f64>,
    pub q_alpha: f64,
    pub p_value: f64,
    pub reject: bool,
}

impl TestReport {
    /// Parameters the bootstrap was drawn from.
    pub fn bootstrap_fit(&self) -> &FittedPair {
        match &self.fits_constrained {
            BootstrapSource::UnconstrainedReused => &self.fits_unconstrained,
            BootstrapSource::Constrained(fit) => &fit.fitted,
        }
    }
}

/// `floor(alpha * B)`, guarded against representation error in `alpha`.
pub fn quantile_rank(b: usize, alpha: f64) -> usize {
    (alpha * b as f64 * (1.0 + 1e-12)).floor() as usize
}

/// The `floor(alpha * B)`-th smallest statistic (1-based), no interpolation.
pub fn bootstrap_quantile(stats: &[f64], alpha: f64) -> Result<f64> {
    let rank = quantile_rank(stats.len(), alpha);
    if rank == 0 || rank > stats.len() {
        return Err(Error::InvalidConfig(format!(
            "alpha * B must be at least 1 (alpha {alpha}, B {})",
            stats.len()
        )));
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[rank - 1])
}

/// Runs the similarity test on two observed cohorts.
///
/// Each group is fitted under its own censoring mechanism; for exponential
/// censoring the rate stored in `Censoring::Exponential` is ignored and
/// re-estimated from the data. Administrative horizons are reused for the
/// bootstrap samples.
pub fn run_similarity_test(
    c1: &Cohort,
    c2: &Cohort,
    censoring1: &Censoring,
    censoring2: &Censoring,
    cfg: &TestConfig,
) -> Result<TestReport> {
    if c1.k() != c2.k() {
        return Err(Error::CauseCountMismatch {
            left: c1.k(),
            right: c2.k(),
        });
    }
    run_similarity_test_summaries(&c1.summary(), &c2.summary(), censoring1, censoring2, cfg)
}

/// [`run_similarity_test`] on sufficient statistics.
pub fn run_similarity_test_summaries(
    s1: &CohortSummary,
    s2: &CohortSummary,
    censoring1: &Censoring,
    censoring2: &Censoring,
    cfg: &TestConfig,
) -> Result<TestReport> {
    cfg.validate()?;
    if s1.k() != s2.k() {
        return Err(Error::CauseCountMismatch {
            left: s1.k(),
            right: s2.k(),
        });
    }

    // Step 1: unconstrained estimates and observed statistic.
    let fits_unconstrained = fit_unconstrained_summaries(s1, s2, censoring1, censoring2)?;
    let witness = statistic(&fits_unconstrained, cfg)?;
    let d_hat = witness_value(&witness);

    // Step 2: parameters to bootstrap from.
    let fits_constrained = if d_hat >= cfg.epsilon {
        BootstrapSource::UnconstrainedReused
    } else {
        let fit = match cfg.measure {
            Measure::TransitionProbabilities => {
                constrained_fit_summaries(s1, s2, censoring1, censoring2, cfg.epsilon, cfg.tau)?
            }
            Measure::TransitionIntensities => {
                constrained_fit_intensity(s1, s2, censoring1, censoring2, cfg.epsilon)?
            }
        };
        if !fit.converged {
            return Err(Error::ConstrainedFitFailed {
                replicate: None,
                reason: format!(
                    "optimizer did not converge (constraint residual {:.3e})",
                    fit.constraint_residual
                ),
            });
        }
        BootstrapSource::Constrained(fit)
    };
    let source = match &fits_constrained {
        BootstrapSource::UnconstrainedReused => &fits_unconstrained,
        BootstrapSource::Constrained(fit) => &fit.fitted,
    };

    // Step 3: bootstrap replicates of the statistic.
    let bootstrap_stats = bootstrap_statistics(source, censoring1, censoring2, s1.n, s2.n, cfg)?;

    // Steps 4-5: quantile and decision.
    let q_alpha = bootstrap_quantile(&bootstrap_stats, cfg.alpha)?;
    let at_or_below = bootstrap_stats.iter().filter(|&&d| d <= d_hat).count();
    let p_value = at_or_below as f64 / bootstrap_stats.len() as f64;
    Ok(TestReport {
        config: *cfg,
        n1: s1.n,
        n2: s2.n,
        d_hat,
        witness,
        fits_unconstrained,
        fits_constrained,
        bootstrap_stats,
        q_alpha,
        p_value,
        reject: d_hat < q_alpha,
    })
}

fn statistic(fit: &FittedPair, cfg: &TestConfig) -> Result<StatWitness> {
    Ok(match cfg.measure {
        Measure::TransitionProbabilities => {
            let (p1, p2) = fit.censor_rates();
            StatWitness::Probabilities(sup_distance_with_rates(
                &fit.group1,
                p1,
                &fit.group2,
                p2,
                cfg.tau,
            )?)
        }
        Measure::TransitionIntensities => {
            StatWitness::Intensities(intensity_witness(&fit.group1, &fit.group2)?)
        }
    })
}

fn witness_value(w: &StatWitness) -> f64 {
    match w {
        StatWitness::Probabilities(w) => w.value,
        StatWitness::Intensities(w) => w.value,
    }
}

/// Bootstrap statistics drawn from `source`. Replicate `b`, group `l` uses
/// the stream keyed `(seed, BOOTSTRAP, b, l)`, so the result does not depend
/// on the number of threads.
pub fn bootstrap_statistics(
    source: &FittedPair,
    censoring1: &Censoring,
    censoring2: &Censoring,
    n1: usize,
    n2: usize,
    cfg: &TestConfig,
) -> Result<Vec<f64>> {
    let (boot_c1, boot_c2) = source.bootstrap_censoring(censoring1, censoring2);
    let sampler1 = PathwaySampler::new(&source.group1, &boot_c1)?;
    let sampler2 = PathwaySampler::new(&source.group2, &boot_c2)?;
    (0..cfg.bootstrap)
        .into_par_iter()
        .map(|b| {
            let b = b as u64;
            let mut rng1 = RngStream::keyed(cfg.seed, &[tag::BOOTSTRAP, b, 1]);
            let mut rng2 = RngStream::keyed(cfg.seed, &[tag::BOOTSTRAP, b, 2]);
            let s1 = sampler1.sample_summary(n1, &mut rng1);
            let s2 = sampler2.sample_summary(n2, &mut rng2);
            replicate_statistic(&s1, &s2, &boot_c1, &boot_c2, cfg)
        })
        .collect()
}

fn replicate_statistic(
    s1: &CohortSummary,
    s2: &CohortSummary,
    c1: &Censoring,
    c2: &Censoring,
    cfg: &TestConfig,
) -> Result<f64> {
    let a1: Params = mle_intensities_summary(s1)?;
    let a2: Params = mle_intensities_summary(s2)?;
    match cfg.measure {
        Measure::TransitionProbabilities => {
            let psi = |s: &CohortSummary, c: &Censoring| -> Result<f64> {
                if c.is_exponential() {
                    mle_censoring_rate_summary(s)
                } else {
                    Ok(0.0)
                }
            };
            Ok(sup_distance_with_rates(&a1, psi(s1, c1)?, &a2, psi(s2, c2)?, cfg.tau)?.value)
        }
        Measure::TransitionIntensities => Ok(intensity_witness(&a1, &a2)?.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn cfg(epsilon: f64, measure: Measure) -> TestConfig {
        TestConfig {
            epsilon,
            alpha: 0.05,
            bootstrap: 200,
            tau: 90.0,
            measure,
            seed: 17,
        }
    }

    fn data(n: usize, censoring: &Censoring, seed: u64) -> (CohortSummary, CohortSummary) {
        let g1 = Params::new(vec![0.0010, 0.0011, 0.0004]).unwrap();
        let g2 = Params::new(vec![0.0008, 0.0013, 0.0009]).unwrap();
        let s1 = PathwaySampler::new(&g1, censoring)
            .unwrap()
            .sample_summary(n, &mut RngStream::new(seed, 1));
        let s2 = PathwaySampler::new(&g2, censoring)
            .unwrap()
            .sample_summary(n, &mut RngStream::new(seed, 2));
        (s1, s2)
    }

    #[test]
    fn quantile_examples() {
        let stats: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(bootstrap_quantile(&stats, 0.05).unwrap(), 5.0);
        assert_eq!(bootstrap_quantile(&[7.0; 4], 0.25).unwrap(), 7.0);
        assert!(bootstrap_quantile(&[1.0; 10], 0.05).is_err());
        assert_eq!(quantile_rank(100, 0.29), 29);
        let mut rng = RngStream::new(4, 4);
        let uniform: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
        assert!((bootstrap_quantile(&uniform, 0.05).unwrap() - 0.05).abs() < 0.01);
    }

    #[test]
    fn config_validation() {
        let good = cfg(0.1, Measure::TransitionProbabilities);
        assert!(good.validate().is_ok());
        assert!(TestConfig { alpha: 0.5, ..good }.validate().is_err());
        assert!(TestConfig {
            alpha: 0.001,
            ..good
        }
        .validate()
        .is_err());
        assert!(TestConfig {
            bootstrap: 99,
            ..good
        }
        .validate()
        .is_err());
        assert!(TestConfig {
            epsilon: 0.0,
            ..good
        }
        .validate()
        .is_err());
        assert!(TestConfig { tau: -1.0, ..good }.validate().is_err());
    }

    #[test]
    fn deterministic_reports() {
        let adm = Censoring::administrative(90.0).unwrap();
        let (s1, s2) = data(200, &adm, 1);
        let c = cfg(0.11805, Measure::TransitionProbabilities);
        let a = run_similarity_test_summaries(&s1, &s2, &adm, &adm, &c).unwrap();
        let b = run_similarity_test_summaries(&s1, &s2, &adm, &adm, &c).unwrap();
        assert_eq!(a, b);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_similarity_test_summaries(&s1, &s2, &adm, &adm, &c).unwrap());
        assert_eq!(a, serial);
    }

    #[test]
    fn report_invariants() {
        let exp = Censoring::exponential(0.002).unwrap();
        let (s1, s2) = data(200, &exp, 2);
        for measure in [
            Measure::TransitionProbabilities,
            Measure::TransitionIntensities,
        ] {
            let eps = if measure == Measure::TransitionProbabilities {
                0.10849
            } else {
                0.0015
            };
            let r =
                run_similarity_test_summaries(&s1, &s2, &exp, &exp, &cfg(eps, measure)).unwrap();
            assert_eq!(r.bootstrap_stats.len(), 200);
            assert_eq!(r.reject, r.d_hat < r.q_alpha);
            let rank = quantile_rank(200, 0.05) as f64 / 200.0;
            assert_eq!(r.reject, r.p_value < rank);
            let expected_p =
                r.bootstrap_stats.iter().filter(|&&d| d <= r.d_hat).count() as f64 / 200.0;
            assert_eq!(r.p_value, expected_p);
            assert!(r.fits_unconstrained.psi1.is_some());
        }
    }

    #[test]
    fn branch_rule_reuses_unconstrained_estimates() {
        let adm = Censoring::administrative(90.0).unwrap();
        let (s1, s2) = data(200, &adm, 3);
        let r = run_similarity_test_summaries(
            &s1,
            &s2,
            &adm,
            &adm,
            &cfg(1e-4, Measure::TransitionProbabilities),
        )
        .unwrap();
        assert!(r.d_hat >= 1e-4);
        assert_eq!(r.fits_constrained, BootstrapSource::UnconstrainedReused);
        assert_eq!(r.bootstrap_fit(), &r.fits_unconstrained);
        assert!(!r.reject);
    }

    #[test]
    fn enormous_threshold_rejects() {
        let adm = Censoring::administrative(90.0).unwrap();
        let (s1, s2) = data(300, &adm, 4);
        let r = run_similarity_test_summaries(
            &s1,
            &s2,
            &adm,
            &adm,
            &cfg(0.9999, Measure::TransitionProbabilities),
        )
        .unwrap();
        assert!(r.reject);
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn cause_count_mismatch() {
        let adm = Censoring::administrative(90.0).unwrap();
        let (s1, _) = data(20, &adm, 5);
        let s2 = CohortSummary {
            n: 1,
            counts: vec![0, 1],
            total_time: 3.0,
        };
        assert!(matches!(
            run_similarity_test_summaries(
                &s1,
                &s2,
                &adm,
                &adm,
                &cfg(0.1, Measure::TransitionProbabilities)
            ),
            Err(Error::CauseCountMismatch { .. })
        ));
    }
}
