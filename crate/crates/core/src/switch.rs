//! Per-surface switch selection subproblem.
//!
//! Treating `S_q` as a real matrix, the gradient of `|f^H w|^2` is
//! `2 Re{N^T}` with
//!
//! ```text
//! F = Phi H w w^H h g^H,  K = Phi H w w^H H^H Phi^H,  G = g g^H,
//! N = F + K S^T G = (Phi H w) (f^H w)^* g^H,
//! ```
//!
//! so each transposed `N` is the outer product `(f^H w)^* conj(g) (Phi H w)^T`.
//! The linearized subproblem over permutation matrices is a linear
//! assignment; its LP relaxation over doubly stochastic matrices has
//! permutation vertices, so the assignment optimum is also optimal for the
//! relaxation.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::assignment::max_weight_assignment;
use crate::network::Network;
use crate::rates::{Iterate, LinkState};
use crate::selection::Selection;

type CVec = DVector<Complex64>;
type CMat = DMatrix<Complex64>;

/// Adds `conj(g) r^T` to `acc`.
fn add_outer(acc: &mut CMat, g: &CVec, r: &CVec) {
    for b in 0..acc.ncols() {
        let rb = r[b];
        for a in 0..acc.nrows() {
            acc[(a, b)] += g[a].conj() * rb;
        }
    }
}

/// `Phi H w` for stream `w` on surface `q`, subcarrier `k`.
fn reflected(q: usize, k: usize, w: &CVec, state: &LinkState, network: &Network) -> CVec {
    let phi = state.phase(q, k).expect("surface responses are evaluated when surfaces are deployed");
    (network.channels().bs_ris(q, k) * w).component_mul(phi)
}

/// Matrix gradient (complex, real part meaningful) of the own-cell
/// subcarrier-summed rates with respect to `S_q`.
pub fn gradient_s_own(q: usize, state: &LinkState, iterate: &Iterate, network: &Network) -> CMat {
    let m = network.elements();
    let mut grad = CMat::zeros(m, m);
    if !network.ris_deployed() {
        return grad;
    }
    let ch = network.channels();
    for l in network.cell_users(q) {
        for k in 0..network.subcarriers() {
            let mui = state.mui(l, k);
            let snr = state.snr(l, k);
            let sig = state.signal(l, k);
            let coef = (2.0 / LN_2) / ((1.0 + snr) * mui * mui);
            // combine streams first: sum_m c_m (f^H w_m)^* Phi H w_m
            let mut r = reflected(q, k, &iterate.precoders[l][k], state, network) * (state.cross(l, l, k).conj() * (coef * mui));
            for other in network.cell_users(q).filter(|&o| o != l) {
                let p = reflected(q, k, &iterate.precoders[other][k], state, network);
                r.axpy(state.cross(other, l, k).conj() * (-coef * sig), &p, Complex64::new(1.0, 0.0));
            }
            add_outer(&mut grad, ch.ris_ue(q, l, k), &r);
        }
    }
    grad
}

/// Matrix gradient of the other cells' subcarrier-summed rates with respect
/// to `S_q`.
pub fn pricing_s(q: usize, state: &LinkState, iterate: &Iterate, network: &Network) -> CMat {
    let m = network.elements();
    let mut price = CMat::zeros(m, m);
    if !network.ris_deployed() {
        return price;
    }
    let ch = network.channels();
    let streams: Vec<usize> = network.cell_users(q).collect();
    for n in (0..network.num_users()).filter(|&n| network.cell_of(n) != q) {
        for k in 0..network.subcarriers() {
            let snr = state.snr(n, k);
            let coef = -(2.0 / LN_2) * snr / ((1.0 + snr) * state.mui(n, k));
            let mut r = CVec::zeros(m);
            for &l in &streams {
                let p = reflected(q, k, &iterate.precoders[l][k], state, network);
                r.axpy(state.cross(l, n, k).conj() * coef, &p, Complex64::new(1.0, 0.0));
            }
            add_outer(&mut price, ch.ris_ue(q, n, k), &r);
        }
    }
    price
}

/// Linearization of the sum rate in `S_q` at the current iterate.
#[derive(Debug, Clone)]
pub struct SelectionGradient {
    pub own: CMat,
    pub pricing: CMat,
}

impl SelectionGradient {
    pub fn evaluate(q: usize, state: &LinkState, iterate: &Iterate, network: &Network, cooperative: bool) -> Self {
        let own = gradient_s_own(q, state, iterate, network);
        let pricing = if cooperative {
            pricing_s(q, state, iterate, network)
        } else {
            CMat::zeros(own.nrows(), own.ncols())
        };
        Self { own, pricing }
    }

    /// `Re{Gamma + Pi}`, the real gradient.
    pub fn real_gradient(&self) -> DMatrix<f64> {
        (&self.own + &self.pricing).map(|z| z.re)
    }

    /// Assignment reward `Re{Gamma + Pi} + tau S_t`.
    pub fn reward(&self, anchor: &Selection, tau: f64) -> DMatrix<f64> {
        self.real_gradient() + anchor.to_matrix() * tau
    }

    /// Selection part of the local surrogate:
    /// `<Re{Gamma + Pi}, S - S_t> - (tau/2) |S - S_t|_F^2`.
    pub fn surrogate_value(&self, s: &Selection, anchor: &Selection, tau: f64) -> f64 {
        let grad = self.real_gradient();
        grad_score(&grad, s) - grad_score(&grad, anchor) - 0.5 * tau * s.distance_sq(anchor)
    }
}

fn grad_score(grad: &DMatrix<f64>, s: &Selection) -> f64 {
    s.score(grad)
}

/// Permutation maximizing `<reward, S>`.
pub fn solve_selection(reward: &DMatrix<f64>) -> Selection {
    Selection::from_columns(max_weight_assignment(reward)).expect("assignment returns a permutation")
}

/// Change of the local selection surrogate when moving from `old` to `new`
/// (both measured against the anchor `S_t`).
pub fn objective_gain_check(new: &Selection, old: &Selection, anchor: &Selection, gradient: &SelectionGradient, tau: f64) -> f64 {
    gradient.surrogate_value(new, anchor, tau) - gradient.surrogate_value(old, anchor, tau)
}
