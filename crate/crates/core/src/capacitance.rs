//! Per-surface capacitance subproblem.
//!
//! The gradient of the subcarrier-summed rates with respect to the element
//! capacitances of surface `q` is assembled from the diagonals of the
//! matrices
//!
//! ```text
//! A = H w w^H h g^H S,   B = S^T g g^H S,   C = H w w^H H^H,
//! M = A + C Phi^H B
//! ```
//!
//! (one per receiver, subcarrier and transmitted stream). All three are rank
//! one with the common factors `p = H w` and `u = S^T g`, and
//! `M = p (f^H w)^* u^H`, so `diag(M)` costs `O(M)` once `f^H w` is known.
//!
//! Differentiating `|f^H w|^2` needs `d phi / dC` itself, i.e. the conjugate
//! of [`crate::circuit::reflection_derivative`]; the assembly below applies
//! that conjugate explicitly.

use std::f64::consts::LN_2;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::circuit::{build_phase_matrices, reflection_derivative};
use crate::error::Result;
use crate::network::Network;
use crate::rates::{Iterate, LinkState};

type CVec = DVector<Complex64>;

/// Surface responses needed by the gradient assembly.
#[derive(Debug, Clone)]
pub struct GradientWorkspace {
    pub surface: usize,
    /// `Phi_{q,k}` diagonals.
    pub phases: Vec<CVec>,
    /// `Q_{q,k}` diagonals, `d conj(phi) / dC` per element.
    pub conj_slopes: Vec<CVec>,
}

impl GradientWorkspace {
    pub fn new(q: usize, iterate: &Iterate, network: &Network) -> Result<Self> {
        let c_q = &iterate.capacitances[q];
        let phases = build_phase_matrices(c_q, network.grid(), network.circuit())?;
        let conj_slopes = network
            .grid()
            .frequencies()
            .into_iter()
            .map(|f| {
                c_q.iter()
                    .map(|&c| reflection_derivative(f, c, network.circuit()))
                    .collect::<Result<Vec<_>>>()
                    .map(CVec::from_vec)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { surface: q, phases, conj_slopes })
    }
}

/// `diag(M)` from its rank-one factors: `p_i (f^H w)^* conj(u_i)`.
pub fn vec_d_m(p: &CVec, fhw: Complex64, u: &CVec) -> CVec {
    let s = fhw.conj();
    p.zip_map(u, |pi, ui| pi * s * ui.conj())
}

/// `sum_i Re{ dphi_i/dC * x_i }` accumulated into `out` with weight `scale`.
fn accumulate(out: &mut [f64], conj_slope: &CVec, diag: &CVec, scale: f64) {
    for ((o, q), d) in out.iter_mut().zip(conj_slope.iter()).zip(diag.iter()) {
        *o += scale * (q.conj() * d).re;
    }
}

/// Gradient of the own-cell subcarrier-summed rates with respect to the
/// capacitances of surface `q`, per farad.
pub fn gradient_own(q: usize, state: &LinkState, iterate: &Iterate, network: &Network, ws: &GradientWorkspace) -> Vec<f64> {
    let m = network.elements();
    let mut grad = vec![0.0; m];
    if !network.ris_deployed() {
        return grad;
    }
    let ch = network.channels();
    let sel = &iterate.selections[q];
    for l in network.cell_users(q) {
        for k in 0..network.subcarriers() {
            let mui = state.mui(l, k);
            let snr = state.snr(l, k);
            let sig = state.signal(l, k);
            let coef = (2.0 / LN_2) / ((1.0 + snr) * mui * mui);
            let u = sel.transpose_apply(ch.ris_ue(q, l, k));
            let h = ch.bs_ris(q, k);
            let slope = &ws.conj_slopes[k];
            let own = vec_d_m(&(h * &iterate.precoders[l][k]), state.cross(l, l, k), &u);
            accumulate(&mut grad, slope, &own, coef * mui);
            for other in network.cell_users(q).filter(|&o| o != l) {
                let diag = vec_d_m(&(h * &iterate.precoders[other][k]), state.cross(other, l, k), &u);
                accumulate(&mut grad, slope, &diag, -coef * sig);
            }
        }
    }
    grad
}

/// Gradient of the other cells' subcarrier-summed rates with respect to the
/// capacitances of surface `q`, per farad.
pub fn pricing_c(q: usize, state: &LinkState, iterate: &Iterate, network: &Network, ws: &GradientWorkspace) -> Vec<f64> {
    let m = network.elements();
    let mut price = vec![0.0; m];
    if !network.ris_deployed() {
        return price;
    }
    let ch = network.channels();
    let sel = &iterate.selections[q];
    for n in (0..network.num_users()).filter(|&n| network.cell_of(n) != q) {
        for k in 0..network.subcarriers() {
            let snr = state.snr(n, k);
            let coef = -(2.0 / LN_2) * snr / ((1.0 + snr) * state.mui(n, k));
            let u = sel.transpose_apply(ch.ris_ue(q, n, k));
            let h = ch.bs_ris(q, k);
            // every stream of BS q interferes at n through surface q
            for l in network.cell_users(q) {
                let diag = vec_d_m(&(h * &iterate.precoders[l][k]), state.cross(l, n, k), &u);
                accumulate(&mut price, &ws.conj_slopes[k], &diag, coef);
            }
        }
    }
    price
}

/// Closed-form maximizer of `-(tau/2)|c - c_t|^2 + (gamma + pricing)^T (c - c_t)`
/// over the box `[c_min, c_max]`: clamp `c_t + (gamma + pricing) / tau`.
///
/// All arguments must share one capacitance unit.
pub fn update_capacitances(c_t: &[f64], gamma: &[f64], pricing: &[f64], tau: f64, c_min: f64, c_max: f64) -> Vec<f64> {
    c_t.iter()
        .zip(gamma)
        .zip(pricing)
        .map(|((&c, &g), &p)| (c + (g + p) / tau).clamp(c_min, c_max))
        .collect()
}

/// Value of the capacitance subproblem objective at `c`.
pub fn subproblem_objective(c: &[f64], c_t: &[f64], gamma: &[f64], pricing: &[f64], tau: f64) -> f64 {
    c.iter()
        .zip(c_t)
        .zip(gamma.iter().zip(pricing))
        .map(|((&c, &ct), (&g, &p))| -0.5 * tau * (c - ct).powi(2) + (g + p) * (c - ct))
        .sum()
}
