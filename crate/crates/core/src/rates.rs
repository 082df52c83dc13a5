//! Variable triplet, interference and achievable rates.

use std::f64::consts::LN_2;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channels::composite_channel;
use crate::circuit::build_phase_matrices;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::selection::Selection;

/// Precoders, surface capacitances and switch selections of all BSs.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    /// `precoders[u][k]`: `N`-vector of user `u` on subcarrier `k`.
    pub precoders: Vec<Vec<DVector<Complex64>>>,
    /// `capacitances[q][m]` in farads.
    pub capacitances: Vec<Vec<f64>>,
    pub selections: Vec<Selection>,
}

impl Iterate {
    /// Matched filters on the direct channel with the budget split evenly
    /// over users and subcarriers, capacitances at mid-range, identity
    /// selections.
    pub fn initial(network: &Network) -> Self {
        let k_count = network.subcarriers();
        let n = network.antennas();
        let precoders = (0..network.num_users())
            .map(|u| {
                let q = network.cell_of(u);
                let share = network.power_budget(q) / (network.cell_users(q).len() * k_count) as f64;
                (0..k_count)
                    .map(|k| {
                        let h = network.channels().direct(q, u, k);
                        let norm = h.norm();
                        let dir = if norm > 0.0 {
                            h / Complex64::new(norm, 0.0)
                        } else {
                            DVector::from_fn(n, |i, _| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0))
                        };
                        dir * Complex64::new(share.sqrt(), 0.0)
                    })
                    .collect()
            })
            .collect();
        let m = network.elements();
        Self {
            precoders,
            capacitances: vec![vec![network.circuit().c_mid(); m]; network.num_bs()],
            selections: vec![Selection::identity(m); network.num_bs()],
        }
    }

    /// Total transmit power of BS `q` over its users and subcarriers.
    pub fn transmit_power(&self, q: usize, network: &Network) -> f64 {
        network
            .cell_users(q)
            .flat_map(|u| self.precoders[u].iter())
            .map(|w| w.norm_squared())
            .sum()
    }

    /// Power budgets (relative slack `rel_tol`), capacitance box and
    /// permutation structure.
    pub fn check_feasible(&self, network: &Network, rel_tol: f64) -> Result<()> {
        for q in 0..network.num_bs() {
            let p = self.transmit_power(q, network);
            let budget = network.power_budget(q);
            if !(p <= budget * (1.0 + rel_tol)) {
                return Err(Error::Numerical(format!("BS {q} transmits {p} W over its {budget} W budget")));
            }
        }
        let circuit = network.circuit();
        for (q, c_q) in self.capacitances.iter().enumerate() {
            if let Some(c) = c_q.iter().find(|c| !circuit.in_range(**c)) {
                return Err(Error::Numerical(format!("surface {q} capacitance {c} F outside the box")));
            }
        }
        for (q, s) in self.selections.iter().enumerate() {
            if s.len() != network.elements() {
                return Err(Error::Numerical(format!("surface {q} selection has wrong size")));
            }
        }
        Ok(())
    }
}

/// Composite channels, cross inner products and interference at one iterate.
#[derive(Debug, Clone)]
pub struct LinkState {
    users: usize,
    subcarriers: usize,
    /// Reflection diagonals `phases[q][k]`; empty without surfaces.
    phases: Vec<Vec<DVector<Complex64>>>,
    /// `f_{j,u,k}` at `(j * U + u) * K + k`.
    composite: Vec<DVector<Complex64>>,
    /// `f_{cell(n),u,k}^H w_{n,k}` at `(n * U + u) * K + k`.
    cross: Vec<Complex64>,
    mui: Vec<f64>,
}

impl LinkState {
    pub fn evaluate(network: &Network, iterate: &Iterate) -> Result<Self> {
        let q_count = network.num_bs();
        let users = network.num_users();
        let kk = network.subcarriers();
        let ch = network.channels();

        let phases = if network.ris_deployed() {
            iterate
                .capacitances
                .iter()
                .map(|c| build_phase_matrices(c, network.grid(), network.circuit()))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };

        let mut composite = Vec::with_capacity(q_count * users * kk);
        for j in 0..q_count {
            for u in 0..users {
                for k in 0..kk {
                    let h = ch.direct(j, u, k);
                    composite.push(if network.ris_deployed() {
                        composite_channel(h, ch.ris_ue(j, u, k), &iterate.selections[j], &phases[j][k], ch.bs_ris(j, k))
                    } else {
                        h.clone()
                    });
                }
            }
        }

        let mut cross = vec![Complex64::new(0.0, 0.0); users * users * kk];
        for n in 0..users {
            let j = network.cell_of(n);
            for u in 0..users {
                for k in 0..kk {
                    let f = &composite[(j * users + u) * kk + k];
                    cross[(n * users + u) * kk + k] = f.dotc(&iterate.precoders[n][k]);
                }
            }
        }

        let sigma2 = network.noise_power();
        let mut mui = vec![sigma2; users * kk];
        for u in 0..users {
            for k in 0..kk {
                // fixed summation order over interfering streams
                for n in (0..users).filter(|&n| n != u) {
                    mui[u * kk + k] += cross[(n * users + u) * kk + k].norm_sqr();
                }
            }
        }

        Ok(Self { users, subcarriers: kk, phases, composite, cross, mui })
    }

    pub fn num_users(&self) -> usize {
        self.users
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// Reflection diagonal of surface `q` on subcarrier `k`, if deployed.
    pub fn phase(&self, q: usize, k: usize) -> Option<&DVector<Complex64>> {
        self.phases.get(q).map(|p| &p[k])
    }

    /// Composite channel `f_{j,u,k}` from BS `j` to user `u`.
    pub fn composite(&self, j: usize, u: usize, k: usize) -> &DVector<Complex64> {
        &self.composite[(j * self.users + u) * self.subcarriers + k]
    }

    /// `f^H w` of stream `n` as received by user `u` on subcarrier `k`.
    pub fn cross(&self, n: usize, u: usize, k: usize) -> Complex64 {
        self.cross[(n * self.users + u) * self.subcarriers + k]
    }

    /// Noise plus intra- and inter-cell interference power.
    pub fn mui(&self, u: usize, k: usize) -> f64 {
        self.mui[u * self.subcarriers + k]
    }

    /// Useful signal power `|f^H w|^2`.
    pub fn signal(&self, u: usize, k: usize) -> f64 {
        self.cross(u, u, k).norm_sqr()
    }

    pub fn snr(&self, u: usize, k: usize) -> f64 {
        self.signal(u, k) / self.mui(u, k)
    }

    /// `sum_k log2(1 + snr)`, the rate without the `1/K` normalization.
    pub fn user_rate_unnormalized(&self, u: usize) -> f64 {
        (0..self.subcarriers).map(|k| self.snr(u, k).ln_1p()).sum::<f64>() / LN_2
    }

    /// Rate of user `u` in bits/s/Hz.
    pub fn user_rate(&self, u: usize) -> f64 {
        self.user_rate_unnormalized(u) / self.subcarriers as f64
    }

    pub fn sum_rate(&self) -> f64 {
        (0..self.users).map(|u| self.user_rate(u)).sum()
    }

    /// Sum over the users of BS `q`.
    pub fn cell_rate(&self, q: usize, network: &Network) -> f64 {
        network.cell_users(q).map(|u| self.user_rate(u)).sum()
    }
}

/// Interference-plus-noise power of user `u` on subcarrier `k`.
pub fn mui(u: usize, k: usize, iterate: &Iterate, network: &Network) -> Result<f64> {
    Ok(LinkState::evaluate(network, iterate)?.mui(u, k))
}

/// Achievable rate of user `u` in bits/s/Hz.
pub fn user_rate(u: usize, iterate: &Iterate, network: &Network) -> Result<f64> {
    Ok(LinkState::evaluate(network, iterate)?.user_rate(u))
}

/// Network sum rate in bits/s/Hz.
pub fn sum_rate(iterate: &Iterate, network: &Network) -> Result<f64> {
    Ok(LinkState::evaluate(network, iterate)?.sum_rate())
}
