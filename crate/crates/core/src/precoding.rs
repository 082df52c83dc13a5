//! Per-BS precoder subproblem.
//!
//! With the interference of the current iterate frozen, each user's
//! per-subcarrier log term is minorized by a concave quadratic
//!
//! ```text
//! Rhat(w) = -a w^H f f^H w + 2 Re{b^H w} + const,
//! a = |f^H w_t|^2 / (ln2 (MUI + |f^H w_t|^2) MUI),   b = f f^H w_t / (ln2 MUI),
//! ```
//!
//! tight with matching gradient at `w_t`. Adding the proximal term and the
//! linear price of the interference caused to other users, the maximizer
//! under the BS power budget is
//!
//! ```text
//! w(lambda) = (a f f^H + (tau/2 + lambda) I)^-1 v,   v = pi + b + (tau/2) w_t
//! ```
//!
//! per subcarrier, with `lambda` found by bisection. Complex gradients follow
//! the conjugate-Wirtinger convention: a price `pi` changes the objective by
//! `2 Re{pi^H dw}`.

use std::f64::consts::LN_2;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::rates::{Iterate, LinkState};

type CVec = DVector<Complex64>;

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Gradient kernel `-snr / (ln2 (1 + snr) MUI)` of a receiver's rate with
/// respect to the power it receives from an interfering stream.
fn interference_weight(state: &LinkState, receiver: usize, k: usize) -> f64 {
    let snr = state.snr(receiver, k);
    -snr / (LN_2 * (1.0 + snr) * state.mui(receiver, k))
}

fn price_over<I: Iterator<Item = usize>>(
    user: usize,
    receivers: impl Fn() -> I,
    state: &LinkState,
    network: &Network,
) -> Vec<CVec> {
    let q = network.cell_of(user);
    (0..network.subcarriers())
        .map(|k| {
            let mut acc = CVec::zeros(network.antennas());
            for n in receivers() {
                let f = state.composite(q, n, k);
                acc.axpy(real(interference_weight(state, n, k)) * state.cross(user, n, k), f, real(1.0));
            }
            acc
        })
        .collect()
}

/// Price of the interference user `user`'s precoder causes in the other
/// cells, one `N`-block per subcarrier (conjugate-Wirtinger gradient of the
/// other cells' subcarrier-summed rates).
pub fn pricing_w(user: usize, state: &LinkState, network: &Network) -> Vec<CVec> {
    let q = network.cell_of(user);
    price_over(user, || (0..network.num_users()).filter(move |&n| network.cell_of(n) != q), state, network)
}

/// Same kernel over the other users of the serving cell. The frozen-MUI
/// surrogate does not see this coupling, so it is added as a local price
/// whenever a BS serves more than one user.
pub fn intracell_pricing_w(user: usize, state: &LinkState, network: &Network) -> Vec<CVec> {
    let q = network.cell_of(user);
    price_over(user, || network.cell_users(q).filter(move |&m| m != user), state, network)
}

/// Minorizer coefficients `(a, b)` of user `user` on subcarrier `k`.
pub fn surrogate_coefficients(user: usize, k: usize, state: &LinkState, network: &Network) -> (f64, CVec) {
    let q = network.cell_of(user);
    let f = state.composite(q, user, k);
    let d = state.cross(user, user, k);
    let mui = state.mui(user, k);
    let sig = d.norm_sqr();
    let a = sig / (LN_2 * (mui + sig) * mui);
    let b = f * (d / (LN_2 * mui));
    (a, b)
}

/// Local quadratic model of one user's precoder block.
#[derive(Debug, Clone)]
pub struct PrecoderSurrogate {
    pub user: usize,
    /// Own composite channel `f_{q,l,k}` per subcarrier.
    pub channel: Vec<CVec>,
    pub a: Vec<f64>,
    pub b: Vec<CVec>,
    /// Interference price per subcarrier (conjugate-Wirtinger).
    pub pricing: Vec<CVec>,
    /// Precoder at the current iterate.
    pub anchor: Vec<CVec>,
    /// Frozen interference-plus-noise power per subcarrier.
    pub mui: Vec<f64>,
}

impl PrecoderSurrogate {
    pub fn build(user: usize, state: &LinkState, iterate: &Iterate, network: &Network, pricing: Vec<CVec>) -> Self {
        let q = network.cell_of(user);
        let kk = network.subcarriers();
        let (a, b) = (0..kk).map(|k| surrogate_coefficients(user, k, state, network)).unzip();
        Self {
            user,
            channel: (0..kk).map(|k| state.composite(q, user, k).clone()).collect(),
            a,
            b,
            pricing,
            anchor: iterate.precoders[user].clone(),
            mui: (0..kk).map(|k| state.mui(user, k)).collect(),
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.channel.len()
    }

    /// The exact log term `log2(1 + |f^H w|^2 / MUI_t)` with frozen MUI.
    pub fn log_term(&self, k: usize, w: &CVec) -> f64 {
        (self.channel[k].dotc(w).norm_sqr() / self.mui[k]).ln_1p() / LN_2
    }

    /// Quadratic minorizer of [`Self::log_term`], shifted to touch it at
    /// the anchor.
    pub fn log_term_surrogate(&self, k: usize, w: &CVec) -> f64 {
        self.quadratic(k, w) + self.log_term(k, &self.anchor[k]) - self.quadratic(k, &self.anchor[k])
    }

    fn quadratic(&self, k: usize, w: &CVec) -> f64 {
        -self.a[k] * self.channel[k].dotc(w).norm_sqr() + 2.0 * self.b[k].dotc(w).re
    }

    /// Linear coefficient `v` of the closed-form solve.
    pub fn linear_term(&self, k: usize, tau: f64) -> CVec {
        &self.pricing[k] + &self.b[k] + &self.anchor[k] * real(0.5 * tau)
    }

    /// Subproblem objective: surrogate log terms, proximal penalty and the
    /// interference price.
    pub fn objective(&self, w: &[CVec], tau: f64) -> f64 {
        (0..self.subcarriers())
            .map(|k| {
                let delta = &w[k] - &self.anchor[k];
                self.log_term_surrogate(k, &w[k]) - 0.5 * tau * delta.norm_squared()
                    + 2.0 * self.pricing[k].dotc(&delta).re
            })
            .sum()
    }
}

/// `(a f f^H + (tau/2 + lambda) I)^-1 v` per subcarrier via Sherman-Morrison.
pub fn solve_precoder_given_lambda(surrogate: &PrecoderSurrogate, tau: f64, lambda: f64) -> Vec<CVec> {
    let mu = 0.5 * tau + lambda;
    (0..surrogate.subcarriers())
        .map(|k| {
            let f = &surrogate.channel[k];
            let a = surrogate.a[k];
            let v = surrogate.linear_term(k, tau);
            let coupling = f.dotc(&v) * (a / (mu + a * f.norm_squared()));
            (v - f * coupling) / real(mu)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BisectionOptions {
    /// Relative tolerance on the power residual at the active budget.
    pub rel_tol: f64,
    /// Cap on doublings of the upper bracket.
    pub max_doublings: usize,
    pub max_iterations: usize,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, max_doublings: 200, max_iterations: 300 }
    }
}

#[derive(Debug, Clone)]
pub struct PowerSolution {
    pub lambda: f64,
    /// Precoders per user of the BS (in the order of the surrogates), per subcarrier.
    pub precoders: Vec<Vec<CVec>>,
    pub power: f64,
}

fn total_power(sol: &[Vec<CVec>]) -> f64 {
    sol.iter().flatten().map(|w| w.norm_squared()).sum()
}

/// Finds the power multiplier of one BS jointly over its users.
///
/// Returns `lambda = 0` when the unconstrained maximizer fits the budget;
/// otherwise the smallest bracketed `lambda` whose power does not exceed it.
pub fn bisect_power_multiplier(
    surrogates: &[PrecoderSurrogate],
    tau: f64,
    budget: f64,
    options: &BisectionOptions,
) -> Result<PowerSolution> {
    if !(budget > 0.0) || !(tau > 0.0) {
        return Err(Error::Precondition("bisection needs a positive budget and tau".into()));
    }
    let solve = |lambda: f64| -> Vec<Vec<CVec>> {
        surrogates.iter().map(|s| solve_precoder_given_lambda(s, tau, lambda)).collect()
    };
    let free = solve(0.0);
    let free_power = total_power(&free);
    if !free_power.is_finite() {
        return Err(Error::Numerical("unconstrained precoder is not finite".into()));
    }
    if free_power <= budget {
        return Ok(PowerSolution { lambda: 0.0, precoders: free, power: free_power });
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut hi_sol = solve(hi);
    let mut doublings = 0;
    while total_power(&hi_sol) > budget {
        doublings += 1;
        if doublings > options.max_doublings {
            return Err(Error::Numerical(format!(
                "power multiplier not bracketed after {} doublings",
                options.max_doublings
            )));
        }
        lo = hi;
        hi *= 2.0;
        hi_sol = solve(hi);
    }

    for _ in 0..options.max_iterations {
        let hi_power = total_power(&hi_sol);
        if budget - hi_power <= options.rel_tol * budget || hi - lo <= f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let mid_sol = solve(mid);
        if total_power(&mid_sol) > budget {
            lo = mid;
        } else {
            hi = mid;
            hi_sol = mid_sol;
        }
    }
    let power = total_power(&hi_sol);
    Ok(PowerSolution { lambda: hi, precoders: hi_sol, power })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn surrogate(a: f64, n: usize, kk: usize) -> PrecoderSurrogate {
        let cv = |s: f64| CVec::from_fn(n, |i, _| Complex64::new(s + i as f64, 0.5 - s * i as f64));
        PrecoderSurrogate {
            user: 0,
            channel: (0..kk).map(|k| cv(0.3 + k as f64)).collect(),
            a: vec![a; kk],
            b: (0..kk).map(|k| cv(0.1 * k as f64 - 0.2)).collect(),
            pricing: (0..kk).map(|_| cv(-0.05)).collect(),
            anchor: (0..kk).map(|k| cv(0.2 * k as f64)).collect(),
            mui: vec![1.0; kk],
        }
    }

    #[test]
    fn identity_solve_when_no_curvature() {
        let s = surrogate(0.0, 3, 2);
        let w = solve_precoder_given_lambda(&s, 0.8, 0.3);
        for k in 0..2 {
            let expected = s.linear_term(k, 0.8) / real(0.4 + 0.3);
            assert!((&w[k] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn sherman_morrison_matches_dense_solve() {
        let s = surrogate(1.7, 3, 3);
        let (tau, lambda) = (0.8, 0.25);
        let w = solve_precoder_given_lambda(&s, tau, lambda);
        for k in 0..3 {
            let f = &s.channel[k];
            let mat = f * f.adjoint() * real(s.a[k]) + DMatrix::identity(3, 3) * real(0.5 * tau + lambda);
            let dense = mat.lu().solve(&s.linear_term(k, tau)).unwrap();
            assert!((&w[k] - dense).norm() <= 1e-10 * w[k].norm());
        }
    }

    #[test]
    fn norm_decreases_with_lambda() {
        let s = surrogate(0.9, 2, 2);
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let p = total_power(&[solve_precoder_given_lambda(&s, 0.8, 0.1 * i as f64)]);
            assert!(p <= last);
            last = p;
        }
    }

    #[test]
    fn bisection_respects_budget() {
        let s = surrogate(0.9, 2, 3);
        let opts = BisectionOptions::default();
        let loose = bisect_power_multiplier(std::slice::from_ref(&s), 0.8, 1e6, &opts).unwrap();
        assert_eq!(loose.lambda, 0.0);

        let budget = 1e-3;
        let tight = bisect_power_multiplier(std::slice::from_ref(&s), 0.8, budget, &opts).unwrap();
        assert!(tight.lambda > 0.0);
        assert!(tight.power <= budget && (budget - tight.power) <= 1e-8 * budget, "{}", tight.power);
        // stationarity of the Lagrangian
        let mu = 0.4 + tight.lambda;
        for k in 0..3 {
            let f = &s.channel[k];
            let w = &tight.precoders[0][k];
            let lhs = f * (f.dotc(w) * s.a[k]) + w * real(mu);
            assert!((lhs - s.linear_term(k, 0.8)).norm() <= 1e-8 * s.linear_term(k, 0.8).norm());
        }
    }

    #[test]
    fn surrogate_touches_log_term_at_anchor() {
        let s = surrogate(0.0, 2, 1);
        let w = s.anchor[0].clone();
        assert!((s.log_term_surrogate(0, &w) - s.log_term(0, &w)).abs() < 1e-15);
    }

    #[test]
    fn invalid_budget_rejected() {
        let s = surrogate(0.9, 2, 1);
        assert!(bisect_power_multiplier(&[s], 0.8, 0.0, &BisectionOptions::default()).is_err());
    }
}
