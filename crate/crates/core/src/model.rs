//! Constant-intensity competing-risks model.
//!
//! One transient state `0` and `k` absorbing causes. With constant
//! cause-specific intensities the cumulative incidence of cause `j` is a
//! scaled exponential, so both similarity measures have closed forms.
//! Everything here is generic over the floating-point scalar.

use num_traits::Float;
use serde::Serialize;

use crate::error::{Error, Result};

/// Cause-specific transition intensities of one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ModelParams<F> {
    intensities: Vec<F>,
}

impl<F: Float> ModelParams<F> {
    /// A fully specified model: at least one cause, all rates finite and
    /// non-negative, and at least one rate positive.
    pub fn new(intensities: Vec<F>) -> Result<Self> {
        let params = Self::from_estimates(intensities)?;
        if params.all_cause_hazard() <= F::zero() {
            return Err(Error::InvalidParams(
                "at least one intensity must be positive".into(),
            ));
        }
        Ok(params)
    }

    /// Estimated intensities. Same checks as [`ModelParams::new`] except that
    /// an all-zero vector is allowed (a sample without any observed event).
    pub fn from_estimates(intensities: Vec<F>) -> Result<Self> {
        if intensities.is_empty() {
            return Err(Error::InvalidParams("need at least one cause".into()));
        }
        if let Some(bad) = intensities
            .iter()
            .position(|a| !a.is_finite() || *a < F::zero())
        {
            return Err(Error::InvalidParams(format!(
                "intensity of cause {} is {}",
                bad + 1,
                intensities[bad].to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self { intensities })
    }

    pub fn k(&self) -> usize {
        self.intensities.len()
    }

    pub fn intensities(&self) -> &[F] {
        &self.intensities
    }

    /// Intensity of `cause` (1-based).
    pub fn intensity(&self, cause: usize) -> Result<F> {
        self.check_cause(cause)?;
        Ok(self.intensities[cause - 1])
    }

    pub fn all_cause_hazard(&self) -> F {
        self.intensities.iter().fold(F::zero(), |acc, &a| acc + a)
    }

    fn check_cause(&self, cause: usize) -> Result<()> {
        if cause == 0 || cause > self.k() {
            return Err(Error::CauseOutOfRange { cause, k: self.k() });
        }
        Ok(())
    }

    /// Same model with causes reordered: cause `j` of the result is cause
    /// `perm[j - 1] + 1` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            intensities: perm.iter().map(|&i| self.intensities[i]).collect(),
        }
    }
}

/// Censoring mechanism of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CensoringSpec<F> {
    /// Everyone still in state 0 at `horizon` is censored there.
    Administrative { horizon: F },
    /// Independent exponential censoring times with the given rate.
    Exponential { rate: F },
}

impl<F: Float> CensoringSpec<F> {
    pub fn administrative(horizon: F) -> Result<Self> {
        if !(horizon > F::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidCensoring(format!(
                "administrative horizon must be positive and finite, got {}",
                horizon.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self::Administrative { horizon })
    }

    pub fn exponential(rate: F) -> Result<Self> {
        if !(rate >= F::zero()) || !rate.is_finite() {
            return Err(Error::InvalidCensoring(format!(
                "exponential censoring rate must be finite and >= 0, got {}",
                rate.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self::Exponential { rate })
    }

    /// Rate that enters the transition probabilities: ψ for exponential
    /// censoring, 0 for administrative censoring.
    pub fn censor_rate(&self) -> F {
        match *self {
            Self::Administrative { .. } => F::zero(),
            Self::Exponential { rate } => rate,
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, Self::Exponential { .. })
    }
}

/// Where the sup-norm distance between the two groups is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupDistanceWitness<F> {
    pub value: F,
    pub arg_time: F,
    /// 1-based cause index.
    pub arg_cause: usize,
    /// Sign of `P1 - P2` at the witness; `+1` when the distance is zero.
    pub sign: i8,
}

/// Where the intensity distance is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntensityWitness<F> {
    pub value: F,
    pub arg_cause: usize,
    pub sign: i8,
}

/// `a / rate * (1 - exp(-rate * t))`; zero when `rate` is zero (then `a` is
/// zero too, so this is the continuous extension).
#[inline]
pub(crate) fn scaled_incidence<F: Float>(a: F, rate: F, t: F) -> F {
    if rate <= F::zero() {
        return F::zero();
    }
    -(a / rate) * (-rate * t).exp_m1()
}

/// Probability of having moved to `cause` by time `t`.
///
/// `censor_rate` is the exponential censoring rate ψ; pass zero for the
/// uncensored (administrative) formula. If all rates are zero the
/// probability is zero.
pub fn transition_probability<F: Float>(
    params: &ModelParams<F>,
    cause: usize,
    t: F,
    censor_rate: F,
) -> Result<F> {
    let a = params.intensity(cause)?;
    if !(t >= F::zero()) {
        return Err(Error::InvalidParams(format!(
            "time must be >= 0, got {}",
            t.to_f64().unwrap_or(f64::NAN)
        )));
    }
    if !(censor_rate >= F::zero()) {
        return Err(Error::InvalidCensoring(format!(
            "censoring rate must be >= 0, got {}",
            censor_rate.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(scaled_incidence(
        a,
        params.all_cause_hazard() + censor_rate,
        t,
    ))
}

fn check_same_k<F: Float>(m1: &ModelParams<F>, m2: &ModelParams<F>) -> Result<()> {
    if m1.k() != m2.k() {
        return Err(Error::CauseCountMismatch {
            left: m1.k(),
            right: m2.k(),
        });
    }
    Ok(())
}

/// Sup-norm distance `max_j max_{t in [0, tau]} |P1_j(t) - P2_j(t)|`.
pub fn sup_distance<F: Float>(
    m1: &ModelParams<F>,
    m2: &ModelParams<F>,
    c1: &CensoringSpec<F>,
    c2: &CensoringSpec<F>,
    tau: F,
) -> Result<SupDistanceWitness<F>> {
    sup_distance_with_rates(m1, c1.censor_rate(), m2, c2.censor_rate(), tau)
}

/// [`sup_distance`] with the censoring rates given directly.
///
/// Per cause, `D(t) = P1(t) - P2(t)` has derivative
/// `a exp(-A t) - b exp(-B t)` with at most one root
/// `t* = ln(a / b) / (A - B)`, so `|D|` on `[0, tau]` peaks at `t*` (when it
/// lies inside) or at `tau`.
pub fn sup_distance_with_rates<F: Float>(
    m1: &ModelParams<F>,
    psi1: F,
    m2: &ModelParams<F>,
    psi2: F,
    tau: F,
) -> Result<SupDistanceWitness<F>> {
    check_same_k(m1, m2)?;
    if !(tau > F::zero()) || !tau.is_finite() {
        return Err(Error::InvalidHorizon(tau.to_f64().unwrap_or(f64::NAN)));
    }
    let rate1 = m1.all_cause_hazard() + psi1;
    let rate2 = m2.all_cause_hazard() + psi2;

    let mut best = SupDistanceWitness {
        value: F::zero(),
        arg_time: tau,
        arg_cause: 1,
        sign: 1,
    };
    for (j, (&a, &b)) in m1.intensities().iter().zip(m2.intensities()).enumerate() {
        let mut consider = |t: F| {
            let diff = scaled_incidence(a, rate1, t) - scaled_incidence(b, rate2, t);
            if diff.abs() > best.value {
                best = SupDistanceWitness {
                    value: diff.abs(),
                    arg_time: t,
                    arg_cause: j + 1,
                    sign: if diff < F::zero() { -1 } else { 1 },
                };
            }
        };
        if let Some(t) = stationary_point(a, rate1, b, rate2, tau) {
            consider(t);
        }
        consider(tau);
    }
    Ok(best)
}

fn stationary_point<F: Float>(a: F, rate1: F, b: F, rate2: F, tau: F) -> Option<F> {
    if a <= F::zero() || b <= F::zero() || rate1 == rate2 {
        return None;
    }
    // Fixed argument order keeps the result bitwise symmetric in the groups.
    let (a, rate1, b, rate2) = if rate1 < rate2 {
        (a, rate1, b, rate2)
    } else {
        (b, rate2, a, rate1)
    };
    let t = (a / b).ln() / (rate1 - rate2);
    (t.is_finite() && t > F::zero() && t < tau).then_some(t)
}

/// Intensity distance `max_j |a1_j - a2_j|`.
pub fn intensity_distance<F: Float>(m1: &ModelParams<F>, m2: &ModelParams<F>) -> Result<F> {
    intensity_witness(m1, m2).map(|w| w.value)
}

pub fn intensity_witness<F: Float>(
    m1: &ModelParams<F>,
    m2: &ModelParams<F>,
) -> Result<IntensityWitness<F>> {
    check_same_k(m1, m2)?;
    let mut best = IntensityWitness {
        value: F::zero(),
        arg_cause: 1,
        sign: 1,
    };
    for (j, (&a, &b)) in m1.intensities().iter().zip(m2.intensities()).enumerate() {
        let diff = a - b;
        if diff.abs() > best.value {
            best = IntensityWitness {
                value: diff.abs(),
                arg_cause: j + 1,
                sign: if diff < F::zero() { -1 } else { 1 },
            };
        }
    }
    Ok(best)
}
