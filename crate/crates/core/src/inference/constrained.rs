//! Maximum likelihood under an equality constraint on the distance between
//! the two groups.
//!
//! For the sup-norm distance of the transition probabilities the fit runs a
//! quadratic-penalty path in log-parameters, warm-started from a feasible
//! point found by bisection along a path out of the unconstrained estimates,
//! with a handful of perturbed restarts. Every candidate is pulled back onto
//! the constraint surface by Newton steps before candidates are compared.
//!
//! For the intensity distance the likelihood separates by cause and the
//! constrained optimum has a closed form, see [`constrained_fit_intensity`].

use serde::Serialize;

use super::optim::{minimize, BfgsOptions};
use super::{fit_unconstrained_summaries, FittedPair};
use crate::error::{Error, Result};
use crate::model::{intensity_witness, sup_distance_with_rates, SupDistanceWitness};
use crate::rng::{tag, RngStream};
use crate::simulate::{Cohort, CohortSummary};
use crate::{Censoring, Params};

/// Rates are floored here while optimizing in log-space.
pub const RATE_FLOOR: f64 = 1e-12;
/// Reported rates below this are reported as zero (when that is compatible
/// with the data).
pub const REPORT_ZERO: f64 = 1e-10;
/// Feasibility tolerance on the distance scale.
pub const CONSTRAINT_TOL: f64 = 1e-6;

const RATE_CEIL: f64 = 1e3;
const PENALTY_PATH: [f64; 7] = [1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8];
const RESTARTS: usize = 5;
const RESTART_SCALE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstrainedFit {
    pub fitted: FittedPair,
    pub epsilon: f64,
    /// `|d(fit) - epsilon|`.
    pub constraint_residual: f64,
    pub converged: bool,
    /// Log-likelihood of the feasible starting point.
    pub initializer_loglik: f64,
}

/// Constrained MLE with `sup_distance = epsilon` on `[0, tau]`.
///
/// Exponentially censored groups get a free censoring rate that enters both
/// the likelihood and the transition probabilities.
pub fn constrained_fit(
    c1: &Cohort,
    c2: &Cohort,
    censoring1: &Censoring,
    censoring2: &Censoring,
    epsilon: f64,
    tau: f64,
) -> Result<ConstrainedFit> {
    constrained_fit_summaries(
        &c1.summary(),
        &c2.summary(),
        censoring1,
        censoring2,
        epsilon,
        tau,
    )
}

pub fn constrained_fit_summaries(
    s1: &CohortSummary,
    s2: &CohortSummary,
    censoring1: &Censoring,
    censoring2: &Censoring,
    epsilon: f64,
    tau: f64,
) -> Result<ConstrainedFit> {
    check_epsilon(epsilon)?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidHorizon(tau));
    }
    let mle = fit_unconstrained_summaries(s1, s2, censoring1, censoring2)?;
    let (psi1, psi2) = mle.censor_rates();
    if sup_distance_with_rates(&mle.group1, psi1, &mle.group2, psi2, tau)?.value == epsilon {
        return Ok(ConstrainedFit {
            initializer_loglik: mle.loglik,
            fitted: mle,
            epsilon,
            constraint_residual: 0.0,
            converged: true,
        });
    }
    let problem = Problem::new(s1, s2, censoring1, censoring2, epsilon, tau);

    let (mle_rates1, mle_rates2) = (mle.group1.intensities(), mle.group2.intensities());
    let (mle_psi1, mle_psi2) = mle.censor_rates();
    let start = problem.initializer(mle_rates1, mle_psi1, mle_rates2, mle_psi2)?;

    let mut init = start;
    problem.project(&mut init);
    let init_residual = problem.residual(&init);
    if init_residual > CONSTRAINT_TOL {
        return Err(Error::ConstrainedFitFailed {
            replicate: None,
            reason: format!("no feasible starting point (residual {init_residual:.3e})"),
        });
    }
    let initializer_loglik = problem.loglik(&init);

    // Candidate 0 is the initializer itself, so the result never has a
    // lower likelihood than it.
    let mut best = init.clone();
    let mut best_ll = initializer_loglik;
    let mut any_converged = false;

    let mut rng = RngStream::keyed(0, &[tag::MULTISTART]);
    for restart in 0..=RESTARTS {
        let mut x = init.clone();
        if restart > 0 {
            for v in x.iter_mut() {
                *v += RESTART_SCALE * rng.normal();
            }
        }
        let (mut x, converged) = problem.penalty_path(x);
        problem.project(&mut x);
        if problem.residual(&x) > CONSTRAINT_TOL {
            continue;
        }
        any_converged |= converged;
        let ll = problem.loglik(&x);
        if ll > best_ll {
            best_ll = ll;
            best = x;
        }
    }

    // The boundary is a union of branches, one per cause and sign of the
    // largest difference; give each its own start.
    let d_hat = problem.distance_at(mle_rates1, mle_psi1, mle_rates2, mle_psi2);
    if d_hat < epsilon {
        for x in problem.branch_starts(mle_rates1, mle_psi1, mle_rates2, mle_psi2) {
            let (mut x, converged) = problem.penalty_path(x);
            problem.project(&mut x);
            if problem.residual(&x) > CONSTRAINT_TOL {
                continue;
            }
            any_converged |= converged;
            let ll = problem.loglik(&x);
            if ll > best_ll {
                best_ll = ll;
                best = x;
            }
        }
    }

    let fitted = problem.report(&best)?;
    let residual = (problem.distance_of(&fitted)?.value - epsilon).abs();
    Ok(ConstrainedFit {
        fitted,
        epsilon,
        constraint_residual: residual,
        converged: any_converged && residual <= CONSTRAINT_TOL,
        initializer_loglik,
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "threshold must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

/// Log-parameter layout: group-1 rates, group-2 rates, then `ln psi` for
/// each exponentially censored group.
struct Problem<'a> {
    s1: &'a CohortSummary,
    s2: &'a CohortSummary,
    k: usize,
    psi1_at: Option<usize>,
    psi2_at: Option<usize>,
    epsilon: f64,
    tau: f64,
    scale: f64,
    lower: f64,
    upper: f64,
}

struct Decoded {
    rates1: Vec<f64>,
    rates2: Vec<f64>,
    psi1: f64,
    psi2: f64,
}

impl<'a> Problem<'a> {
    fn new(
        s1: &'a CohortSummary,
        s2: &'a CohortSummary,
        censoring1: &Censoring,
        censoring2: &Censoring,
        epsilon: f64,
        tau: f64,
    ) -> Self {
        let k = s1.k();
        let mut next = 2 * k;
        let mut slot = |exp: bool| {
            exp.then(|| {
                next += 1;
                next - 1
            })
        };
        let psi1_at = slot(censoring1.is_exponential());
        let psi2_at = slot(censoring2.is_exponential());
        Self {
            s1,
            s2,
            k,
            psi1_at,
            psi2_at,
            epsilon,
            tau,
            scale: 1.0 / (s1.n + s2.n) as f64,
            lower: RATE_FLOOR.ln(),
            upper: RATE_CEIL.ln(),
        }
    }

    fn dim(&self) -> usize {
        2 * self.k + self.psi1_at.is_some() as usize + self.psi2_at.is_some() as usize
    }

    fn encode(&self, rates1: &[f64], psi1: f64, rates2: &[f64], psi2: f64) -> Vec<f64> {
        let enc = |v: f64| v.clamp(RATE_FLOOR, RATE_CEIL).ln();
        let mut x: Vec<f64> = rates1.iter().chain(rates2).map(|&v| enc(v)).collect();
        if self.psi1_at.is_some() {
            x.push(enc(psi1));
        }
        if self.psi2_at.is_some() {
            x.push(enc(psi2));
        }
        x
    }

    fn decode(&self, x: &[f64]) -> Decoded {
        let dec = |v: f64| v.clamp(self.lower, self.upper).exp();
        Decoded {
            rates1: x[..self.k].iter().map(|&v| dec(v)).collect(),
            rates2: x[self.k..2 * self.k].iter().map(|&v| dec(v)).collect(),
            psi1: self.psi1_at.map_or(0.0, |i| dec(x[i])),
            psi2: self.psi2_at.map_or(0.0, |i| dec(x[i])),
        }
    }

    fn distance(&self, d: &Decoded) -> SupDistanceWitness<f64> {
        let m1 = Params::from_estimates(d.rates1.clone()).expect("positive finite rates");
        let m2 = Params::from_estimates(d.rates2.clone()).expect("positive finite rates");
        sup_distance_with_rates(&m1, d.psi1, &m2, d.psi2, self.tau).expect("validated inputs")
    }

    fn distance_of(&self, fit: &FittedPair) -> Result<SupDistanceWitness<f64>> {
        let (p1, p2) = fit.censor_rates();
        sup_distance_with_rates(&fit.group1, p1, &fit.group2, p2, self.tau)
    }

    fn residual(&self, x: &[f64]) -> f64 {
        (self.distance(&self.decode(x)).value - self.epsilon).abs()
    }

    /// Joint log-likelihood in log-parameters, with gradient when requested.
    fn loglik_grad(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let d = self.decode(x);
        let mut ll = 0.0;
        let mut g = grad;
        let mut term = |idx: usize, count: usize, rate: f64, exposure: f64| {
            ll += count as f64 * rate.ln() - rate * exposure;
            if let Some(g) = g.as_deref_mut() {
                g[idx] = count as f64 - rate * exposure;
            }
        };
        for j in 0..self.k {
            term(j, self.s1.counts[j + 1], d.rates1[j], self.s1.total_time);
            term(
                self.k + j,
                self.s2.counts[j + 1],
                d.rates2[j],
                self.s2.total_time,
            );
        }
        if let Some(i) = self.psi1_at {
            term(i, self.s1.censored(), d.psi1, self.s1.total_time);
        }
        if let Some(i) = self.psi2_at {
            term(i, self.s2.censored(), d.psi2, self.s2.total_time);
        }
        ll
    }

    fn loglik(&self, x: &[f64]) -> f64 {
        self.loglik_grad(x, None)
    }

    /// Distance and its gradient in log-parameters at the active witness.
    fn distance_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.decode(x);
        let w = self.distance(&d);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let j = w.arg_cause - 1;
        let sign = f64::from(w.sign);
        let mut group = |rates: &[f64], psi: f64, offset: usize, psi_at: Option<usize>, s: f64| {
            let rate = rates.iter().sum::<f64>() + psi;
            let (h, dh) = incidence_factor(rate, w.arg_time);
            let a = rates[j];
            for (i, &r) in rates.iter().enumerate() {
                let mut dp = a * dh;
                if i == j {
                    dp += h;
                }
                grad[offset + i] += s * dp * r;
            }
            if let Some(i) = psi_at {
                grad[i] += s * a * dh * psi;
            }
        };
        group(&d.rates1, d.psi1, 0, self.psi1_at, sign);
        group(&d.rates2, d.psi2, self.k, self.psi2_at, -sign);
        w.value
    }

    /// Minimizes `-loglik / n + lambda (d - eps)^2` along the penalty path.
    fn penalty_path(&self, mut x: Vec<f64>) -> (Vec<f64>, bool) {
        let n = self.dim();
        let opts = BfgsOptions {
            max_iter: 300,
            grad_tol: 1e-9,
            lower: self.lower,
            upper: self.upper,
            ..BfgsOptions::default()
        };
        let mut converged = false;
        let mut dgrad = vec![0.0; n];
        for &lambda in &PENALTY_PATH {
            let result = minimize(
                |x, g| {
                    let ll = self.loglik_grad(x, Some(g));
                    let dist = self.distance_grad(x, &mut dgrad);
                    let gap = dist - self.epsilon;
                    for (gi, dg) in g.iter_mut().zip(&dgrad) {
                        *gi = -*gi * self.scale + 2.0 * lambda * gap * dg;
                    }
                    -ll * self.scale + lambda * gap * gap
                },
                &x,
                &opts,
            );
            x = result.x;
            converged = result.converged;
        }
        (x, converged)
    }

    /// Newton steps on `d(x) = eps` along the distance gradient.
    fn project(&self, x: &mut [f64]) {
        let mut g = vec![0.0; x.len()];
        for _ in 0..100 {
            let gap = self.distance_grad(x, &mut g) - self.epsilon;
            if gap.abs() <= 1e-13 {
                return;
            }
            let norm2: f64 = g.iter().map(|v| v * v).sum();
            if norm2 <= 0.0 || !norm2.is_finite() {
                return;
            }
            let before = x.to_vec();
            let mut step = 1.0;
            loop {
                for (xi, (bi, gi)) in x.iter_mut().zip(before.iter().zip(&g)) {
                    *xi = (bi - step * gap * gi / norm2).clamp(self.lower, self.upper);
                }
                if self.residual(x) < gap.abs() || step < 1e-8 {
                    break;
                }
                step *= 0.5;
            }
        }
    }

    fn distance_at(&self, rates1: &[f64], psi1: f64, rates2: &[f64], psi2: f64) -> f64 {
        self.distance(&Decoded {
            rates1: rates1.iter().map(|v| v.max(RATE_FLOOR)).collect(),
            rates2: rates2.iter().map(|v| v.max(RATE_FLOOR)).collect(),
            psi1: if self.psi1_at.is_some() {
                psi1.max(RATE_FLOOR)
            } else {
                0.0
            },
            psi2: if self.psi2_at.is_some() {
                psi2.max(RATE_FLOOR)
            } else {
                0.0
            },
        })
        .value
    }

    /// Feasible points reached by separating a single cause: group 1's
    /// intensity scaled by `e^(s u)` and group 2's by `e^(-s u)`.
    fn branch_starts(&self, rates1: &[f64], psi1: f64, rates2: &[f64], psi2: f64) -> Vec<Vec<f64>> {
        let mut starts = Vec::new();
        for j in 0..self.k {
            for sign in [1.0, -1.0] {
                let moved = |u: f64| {
                    let mut r1: Vec<f64> = rates1.iter().map(|v| v.max(RATE_FLOOR)).collect();
                    let mut r2: Vec<f64> = rates2.iter().map(|v| v.max(RATE_FLOOR)).collect();
                    r1[j] = (r1[j] * (sign * u).exp()).min(RATE_CEIL);
                    r2[j] = (r2[j] * (-sign * u).exp()).max(RATE_FLOOR);
                    (r1, r2)
                };
                let eval = |u: f64| {
                    let (r1, r2) = moved(u);
                    self.distance_at(&r1, psi1, &r2, psi2)
                };
                if let Some(u) = bracket_and_bisect(eval, self.epsilon) {
                    let (r1, r2) = moved(u);
                    starts.push(self.encode(&r1, psi1, &r2, psi2));
                }
            }
        }
        starts
    }

    /// A feasible point: bisection for `d = eps` along a path leaving the
    /// unconstrained estimates.
    fn initializer(
        &self,
        rates1: &[f64],
        psi1: f64,
        rates2: &[f64],
        psi2: f64,
    ) -> Result<Vec<f64>> {
        let dist_at = |r2: &[f64], p2: f64| {
            self.distance(&Decoded {
                rates1: rates1.iter().map(|v| v.max(RATE_FLOOR)).collect(),
                rates2: r2.iter().map(|v| v.max(RATE_FLOOR)).collect(),
                psi1: if self.psi1_at.is_some() {
                    psi1.max(RATE_FLOOR)
                } else {
                    0.0
                },
                psi2: if self.psi2_at.is_some() {
                    p2.max(RATE_FLOOR)
                } else {
                    0.0
                },
            })
            .value
        };
        let d_hat = dist_at(rates2, psi2);
        let eps = self.epsilon;

        if d_hat > eps {
            // pull group 2 (and its censoring rate) towards group 1
            let point = |s: f64| {
                let r: Vec<f64> = rates2
                    .iter()
                    .zip(rates1)
                    .map(|(b, a)| b + s * (a - b))
                    .collect();
                let p = psi2 + s * (psi1 - psi2);
                (r, p)
            };
            let eval = |s: f64| {
                let (r, p) = point(s);
                dist_at(&r, p)
            };
            if eval(1.0) < eps {
                let s = bisect(eval, 0.0, 1.0, eps, false);
                let (r, p) = point(s);
                return Ok(self.encode(rates1, psi1, &r, p));
            }
        } else {
            // push group 2 away from group 1
            let ray = |s: f64| -> Vec<f64> {
                rates2
                    .iter()
                    .zip(rates1)
                    .map(|(b, a)| (b + s * (b - a)).max(0.0))
                    .collect()
            };
            if let Some(s) = bracket_and_bisect(|s| dist_at(&ray(s), psi2), eps) {
                return Ok(self.encode(rates1, psi1, &ray(s), psi2));
            }
            // near-identical fits: scale group 2 up
            let scaled = |c: f64| -> Vec<f64> { rates2.iter().map(|b| b * (1.0 + c)).collect() };
            if let Some(c) = bracket_and_bisect(|c| dist_at(&scaled(c), psi2), eps) {
                return Ok(self.encode(rates1, psi1, &scaled(c), psi2));
            }
        }

        // Fallback: log-linear path to a configuration at distance close to 1.
        let from = self.encode(rates1, psi1, rates2, psi2);
        let target = self.extreme_point(rates1, rates2, psi1, psi2);
        let at = |s: f64| -> Vec<f64> {
            from.iter()
                .zip(&target)
                .map(|(a, b)| a + s * (b - a))
                .collect()
        };
        let eval = |s: f64| self.distance(&self.decode(&at(s))).value;
        let d_target = eval(1.0);
        if (d_hat < eps && d_target < eps) || (d_hat > eps && d_target > eps) {
            return Err(Error::ConstrainedFitFailed {
                replicate: None,
                reason: format!("threshold {eps} not reachable (max distance {d_target})"),
            });
        }
        Ok(at(bisect(eval, 0.0, 1.0, eps, d_hat < eps)))
    }

    /// Log-parameters where one group almost surely ends in one cause before
    /// `tau` and the other almost never does. Distance close to 1 (or to 0
    /// when the threshold is below the current distance).
    fn extreme_point(&self, rates1: &[f64], rates2: &[f64], psi1: f64, psi2: f64) -> Vec<f64> {
        let current = self.distance(&Decoded {
            rates1: rates1.iter().map(|v| v.max(RATE_FLOOR)).collect(),
            rates2: rates2.iter().map(|v| v.max(RATE_FLOOR)).collect(),
            psi1: psi1.max(RATE_FLOOR),
            psi2: psi2.max(RATE_FLOOR),
        });
        let j = current.arg_cause - 1;
        let big = (40.0 / self.tau).min(RATE_CEIL);
        let concentrated: Vec<f64> = (0..self.k)
            .map(|i| if i == j { big } else { RATE_FLOOR })
            .collect();
        let starved: Vec<f64> = (0..self.k)
            .map(|i| {
                if i == j {
                    RATE_FLOOR
                } else {
                    rates2[i].max(rates1[i]).max(RATE_FLOOR)
                }
            })
            .collect();
        if current.sign >= 0 {
            self.encode(&concentrated, RATE_FLOOR, &starved, psi2)
        } else {
            self.encode(&starved, psi1, &concentrated, RATE_FLOOR)
        }
    }

    fn report(&self, x: &[f64]) -> Result<FittedPair> {
        let d = self.decode(x);
        let clean = |rates: Vec<f64>, s: &CohortSummary| -> Vec<f64> {
            rates
                .into_iter()
                .enumerate()
                .map(|(j, r)| {
                    if r < REPORT_ZERO && s.counts[j + 1] == 0 {
                        0.0
                    } else {
                        r
                    }
                })
                .collect()
        };
        let psi = |at: Option<usize>, v: f64, s: &CohortSummary| {
            at.map(|_| {
                if v < REPORT_ZERO && s.censored() == 0 {
                    0.0
                } else {
                    v
                }
            })
        };
        FittedPair::new(
            self.s1,
            self.s2,
            Params::from_estimates(clean(d.rates1, self.s1))?,
            Params::from_estimates(clean(d.rates2, self.s2))?,
            psi(self.psi1_at, d.psi1, self.s1),
            psi(self.psi2_at, d.psi2, self.s2),
        )
    }
}

/// `h(R) = (1 - exp(-R t)) / R` and `dh/dR`, with series near `R t = 0`.
fn incidence_factor(rate: f64, t: f64) -> (f64, f64) {
    let x = rate * t;
    if x < 1e-3 {
        (
            t * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0),
            t * t * (-0.5 + x / 3.0 - x * x / 8.0 + x * x * x / 30.0),
        )
    } else {
        let one_minus = -(-x).exp_m1();
        let h = one_minus / rate;
        let dh = (t * (-x).exp() * rate - one_minus) / (rate * rate);
        (h, dh)
    }
}

/// Bisection for `f(s) = target` on `[lo, hi]`. `increasing` tells which end
/// lies below the target.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, target: f64, increasing: bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Doubles `s` from 1 until `f(s) >= target`, then bisects on `[0, s]`.
fn bracket_and_bisect(f: impl Fn(f64) -> f64, target: f64) -> Option<f64> {
    let mut hi = 1.0;
    for _ in 0..60 {
        if f(hi) >= target {
            return Some(bisect(&f, 0.0, hi, target, true));
        }
        hi *= 2.0;
    }
    None
}

/// Constrained MLE with `max_j |a1_j - a2_j| = epsilon`.
///
/// The likelihood separates by cause. Causes whose estimated difference
/// exceeds `epsilon` are moved onto `|a1_j - a2_j| = epsilon`; if none does,
/// the single cause whose move to the boundary costs the least likelihood is
/// moved. Each move solves a one-dimensional concave problem in closed form.
/// Censoring rates keep their unconstrained estimates.
pub fn constrained_fit_intensity(
    s1: &CohortSummary,
    s2: &CohortSummary,
    censoring1: &Censoring,
    censoring2: &Censoring,
    epsilon: f64,
) -> Result<ConstrainedFit> {
    check_epsilon(epsilon)?;
    let mle = fit_unconstrained_summaries(s1, s2, censoring1, censoring2)?;
    let mut a1 = mle.group1.intensities().to_vec();
    let mut a2 = mle.group2.intensities().to_vec();
    let (t1, t2) = (s1.total_time, s2.total_time);

    let mut on_boundary = false;
    for j in 0..a1.len() {
        let diff = a1[j] - a2[j];
        if diff.abs() >= epsilon {
            let delta = epsilon.copysign(diff);
            (a1[j], a2[j]) = boundary_pair(s1.counts[j + 1], t1, s2.counts[j + 1], t2, delta);
            on_boundary = true;
        }
    }
    if !on_boundary {
        let cause_ll = |j: usize, a: f64, b: f64| {
            poisson_term(s1.counts[j + 1], a, t1) + poisson_term(s2.counts[j + 1], b, t2)
        };
        let mut best: Option<(f64, usize, f64, f64)> = None;
        for j in 0..a1.len() {
            let base = cause_ll(j, a1[j], a2[j]);
            for delta in [epsilon, -epsilon] {
                let (a, b) = boundary_pair(s1.counts[j + 1], t1, s2.counts[j + 1], t2, delta);
                let loss = base - cause_ll(j, a, b);
                if best.is_none_or(|(l, ..)| loss < l) {
                    best = Some((loss, j, a, b));
                }
            }
        }
        let (_, j, a, b) = best.expect("at least one cause");
        a1[j] = a;
        a2[j] = b;
    }

    let fitted = FittedPair::new(
        s1,
        s2,
        Params::from_estimates(a1)?,
        Params::from_estimates(a2)?,
        mle.psi1,
        mle.psi2,
    )?;
    let residual = (intensity_witness(&fitted.group1, &fitted.group2)?.value - epsilon).abs();
    Ok(ConstrainedFit {
        initializer_loglik: fitted.loglik,
        fitted,
        epsilon,
        constraint_residual: residual,
        converged: residual <= CONSTRAINT_TOL,
    })
}

fn poisson_term(count: usize, rate: f64, exposure: f64) -> f64 {
    if count == 0 {
        -rate * exposure
    } else {
        count as f64 * rate.ln() - rate * exposure
    }
}

/// Maximizes `d1 ln a - t1 a + d2 ln b - t2 b` subject to `a - b = delta`,
/// `a, b >= 0`. The stationarity condition is the quadratic
/// `T a^2 - (T delta + d1 + d2) a + d1 delta = 0`, `T = t1 + t2`, whose
/// larger root is the admissible one.
fn boundary_pair(d1: usize, t1: f64, d2: usize, t2: f64, delta: f64) -> (f64, f64) {
    let (d1, d2) = (d1 as f64, d2 as f64);
    let total = t1 + t2;
    let lower = delta.max(0.0);
    let b_coef = total * delta + d1 + d2;
    let disc = (total * delta + d2 - d1).powi(2) + 4.0 * d1 * d2;
    let root = (b_coef + disc.sqrt()) / (2.0 * total);
    let a = if root > lower { root } else { lower };
    (a, (a - delta).max(0.0))
}
