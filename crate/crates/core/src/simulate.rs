//! Competing-risks pathway generation.
//!
//! A pathway is an exponential all-cause event time plus a categorical cause
//! with probabilities proportional to the cause-specific intensities. The
//! censoring mechanism then decides what is observed. Every individual
//! consumes exactly three uniforms (event time, cause, censoring time) so
//! that streams stay aligned across parameter values.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::{Censoring, Params};

/// Which of the two compared groups a cohort belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Group {
    #[serde(rename = "1")]
    First,
    #[serde(rename = "2")]
    Second,
}

impl Group {
    pub fn number(self) -> u8 {
        match self {
            Group::First => 1,
            Group::Second => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Group::First),
            2 => Some(Group::Second),
            _ => None,
        }
    }
}

/// One individual: observed time and state at that time (0 = censored).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub time: f64,
    pub state: usize,
}

impl Observation {
    pub fn is_censored(&self) -> bool {
        self.state == 0
    }
}

/// Validated sample of one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cohort {
    observations: Vec<Observation>,
    k: usize,
    group: Group,
}

impl Cohort {
    pub fn new(observations: Vec<Observation>, k: usize, group: Group) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyCohort);
        }
        if k == 0 {
            return Err(Error::InvalidParams("need at least one cause".into()));
        }
        for (i, obs) in observations.iter().enumerate() {
            if !(obs.time > 0.0) || !obs.time.is_finite() {
                return Err(Error::InvalidObservation(format!(
                    "observation {} has time {}",
                    i + 1,
                    obs.time
                )));
            }
            if obs.state > k {
                return Err(Error::InvalidObservation(format!(
                    "observation {} has state {} > k = {k}",
                    i + 1,
                    obs.state
                )));
            }
        }
        Ok(Self {
            observations,
            k,
            group,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn summary(&self) -> CohortSummary {
        let mut summary = CohortSummary::empty(self.k);
        for obs in &self.observations {
            summary.push(obs);
        }
        summary
    }
}

/// Sufficient statistics of a cohort under constant intensities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub n: usize,
    /// `counts[0]` censored, `counts[j]` events of cause `j`.
    pub counts: Vec<usize>,
    pub total_time: f64,
}

impl CohortSummary {
    pub fn empty(k: usize) -> Self {
        Self {
            n: 0,
            counts: vec![0; k + 1],
            total_time: 0.0,
        }
    }

    #[inline]
    pub fn push(&mut self, obs: &Observation) {
        self.n += 1;
        self.counts[obs.state] += 1;
        self.total_time += obs.time;
    }

    pub fn k(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn censored(&self) -> usize {
        self.counts[0]
    }

    pub fn events(&self, cause: usize) -> usize {
        self.counts[cause]
    }
}

/// Pre-validated generator for one `(params, censoring)` pair.
#[derive(Debug, Clone)]
pub struct PathwaySampler {
    cumulative: Vec<f64>,
    all_cause: f64,
    censoring: Censoring,
}

impl PathwaySampler {
    pub fn new(params: &Params, censoring: &Censoring) -> Result<Self> {
        let all_cause = params.all_cause_hazard();
        if let Censoring::Exponential { rate } = *censoring {
            if all_cause + rate <= 0.0 {
                return Err(Error::InvalidParams(
                    "all intensities and the censoring rate are zero; observed times would be infinite"
                        .into(),
                ));
            }
        }
        let cumulative = params
            .intensities()
            .iter()
            .scan(0.0, |acc, &a| {
                *acc += a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            cumulative,
            all_cause,
            censoring: *censoring,
        })
    }

    pub fn k(&self) -> usize {
        self.cumulative.len()
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> Observation {
        let event_time = rng.exponential(self.all_cause);
        let target = rng.uniform() * self.all_cause;
        let censor_u = rng.uniform();
        let cause = self.pick_cause(target);
        match self.censoring {
            Censoring::Administrative { horizon } => {
                // ties count as censored
                if event_time >= horizon {
                    Observation {
                        time: horizon,
                        state: 0,
                    }
                } else {
                    Observation {
                        time: event_time,
                        state: cause,
                    }
                }
            }
            Censoring::Exponential { rate } => {
                let censor_time = -censor_u.ln() / rate;
                if censor_time < event_time {
                    Observation {
                        time: censor_time,
                        state: 0,
                    }
                } else {
                    Observation {
                        time: event_time,
                        state: cause,
                    }
                }
            }
        }
    }

    #[inline]
    fn pick_cause(&self, target: f64) -> usize {
        match self.cumulative.iter().position(|&c| target < c) {
            Some(j) => j + 1,
            // target rounded up to the total: last cause with positive rate
            None => self
                .cumulative
                .windows(2)
                .rposition(|w| w[1] > w[0])
                .map_or(1, |j| j + 2),
        }
    }

    /// Sufficient statistics of `n` draws; identical to drawing the cohort
    /// and summarizing it.
    pub fn sample_summary(&self, n: usize, rng: &mut RngStream) -> CohortSummary {
        let mut summary = CohortSummary::empty(self.k());
        for _ in 0..n {
            summary.push(&self.sample(rng));
        }
        summary
    }
}

pub fn draw_pathway(
    params: &Params,
    censoring: &Censoring,
    rng: &mut RngStream,
) -> Result<Observation> {
    Ok(PathwaySampler::new(params, censoring)?.sample(rng))
}

pub fn draw_cohort(
    params: &Params,
    censoring: &Censoring,
    n: usize,
    group: Group,
    rng: &mut RngStream,
) -> Result<Cohort> {
    if n == 0 {
        return Err(Error::EmptyCohort);
    }
    let sampler = PathwaySampler::new(params, censoring)?;
    let observations = (0..n).map(|_| sampler.sample(rng)).collect();
    Cohort::new(observations, params.k(), group)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::transition_probability;

    fn p(v: &[f64]) -> Params {
        Params::new(v.to_vec()).unwrap()
    }

    fn censored_fraction(params: &Params, censoring: &Censoring, n: usize, seed: u64) -> f64 {
        let mut rng = RngStream::new(seed, 0);
        let s = PathwaySampler::new(params, censoring)
            .unwrap()
            .sample_summary(n, &mut rng);
        s.censored() as f64 / n as f64
    }

    #[test]
    fn single_cause_never_censored_with_far_horizon() {
        let params = p(&[1.0]);
        let adm = Censoring::administrative(1e9).unwrap();
        let mut rng = RngStream::new(3, 0);
        for _ in 0..10_000 {
            assert_eq!(draw_pathway(&params, &adm, &mut rng).unwrap().state, 1);
        }
    }

    #[test]
    fn reported_censoring_fractions() {
        let g1 = p(&[0.0023, 0.0011, 0.0004]);
        let g2 = p(&[0.0008, 0.0026, 0.0019]);
        let adm = Censoring::administrative(90.0).unwrap();
        assert!((censored_fraction(&g1, &adm, 100_000, 11) - 0.71).abs() < 0.01);
        let exp = Censoring::exponential(0.01).unwrap();
        assert!((censored_fraction(&g2, &exp, 100_000, 12) - 0.65).abs() < 0.01);
        let even = p(&[0.01]);
        assert!((censored_fraction(&even, &exp, 10_000, 13) - 0.5).abs() < 0.02);
    }

    #[test]
    fn cause_fractions_match_incidence() {
        let params = p(&[0.0023, 0.0011, 0.0004]);
        let adm = Censoring::administrative(90.0).unwrap();
        let mut rng = RngStream::new(21, 5);
        let cohort = draw_cohort(&params, &adm, 100_000, Group::First, &mut rng).unwrap();
        let s = cohort.summary();
        for cause in 1..=3 {
            let expected = transition_probability(&params, cause, 90.0, 0.0).unwrap();
            let got = s.events(cause) as f64 / 1e5;
            assert!(
                (got - expected).abs() < 0.005,
                "cause {cause}: {got} vs {expected}"
            );
        }
        assert!(cohort
            .observations()
            .iter()
            .all(|o| o.time > 0.0 && o.time <= 90.0 && (o.state == 0) == (o.time == 90.0)));
    }

    #[test]
    fn determinism_and_summary_agreement() {
        let params = p(&[0.0023, 0.0011, 0.0004]);
        let exp = Censoring::exponential(0.005).unwrap();
        let a = draw_cohort(&params, &exp, 5, Group::Second, &mut RngStream::new(1, 2)).unwrap();
        let b = draw_cohort(&params, &exp, 5, Group::Second, &mut RngStream::new(1, 2)).unwrap();
        assert_eq!(a, b);
        let s = PathwaySampler::new(&params, &exp)
            .unwrap()
            .sample_summary(5, &mut RngStream::new(1, 2));
        assert_eq!(a.summary(), s);
    }

    #[test]
    fn pooled_times_pass_ks_against_exponential() {
        let params = p(&[0.0023, 0.0011, 0.0004]);
        let psi = 0.005;
        let exp = Censoring::exponential(psi).unwrap();
        let n = 100_000;
        let cohort =
            draw_cohort(&params, &exp, n, Group::First, &mut RngStream::new(2024, 0)).unwrap();
        let mut times: Vec<f64> = cohort.observations().iter().map(|o| o.time).collect();
        times.sort_by(f64::total_cmp);
        let rate = 0.0038 + psi;
        let d = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let cdf = 1.0 - (-rate * t).exp();
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (cdf - lo).abs().max((hi - cdf).abs())
            })
            .fold(0.0, f64::max);
        // asymptotic critical value at the 1% level
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn zero_cohort_rejected() {
        let params = p(&[0.1]);
        let adm = Censoring::administrative(1.0).unwrap();
        assert!(matches!(
            draw_cohort(&params, &adm, 0, Group::First, &mut RngStream::new(0, 0)),
            Err(Error::EmptyCohort)
        ));
    }

    #[test]
    fn zero_estimates_are_all_censored_administratively() {
        let params = Params::from_estimates(vec![0.0, 0.0]).unwrap();
        let adm = Censoring::administrative(30.0).unwrap();
        let c = draw_cohort(&params, &adm, 20, Group::First, &mut RngStream::new(0, 0)).unwrap();
        assert!(c
            .observations()
            .iter()
            .all(|o| o.state == 0 && o.time == 30.0));
        let none = Censoring::exponential(0.0).unwrap();
        assert!(PathwaySampler::new(&params, &none).is_err());
    }

    #[test]
    fn cohort_validation() {
        let obs = |time, state| Observation { time, state };
        assert!(Cohort::new(vec![], 2, Group::First).is_err());
        assert!(Cohort::new(vec![obs(0.0, 1)], 2, Group::First).is_err());
        assert!(Cohort::new(vec![obs(1.0, 3)], 2, Group::First).is_err());
        assert!(Cohort::new(vec![obs(1.0, 2), obs(1.0, 0)], 2, Group::First).is_ok());
    }
}
