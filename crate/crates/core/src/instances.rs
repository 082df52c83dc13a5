//! Small random problem instances with unit-scale channels.
//!
//! Links are i.i.d. Rayleigh tapped-delay lines without geometry, scaled so
//! that the reflected path of a surface is comparable to the direct path.
//! Used for gradient checks and convergence experiments at desk scale.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channels::{derive_seed, generate_link_taps, taps_to_frequency, DelayProfile, NetworkChannels};
use crate::circuit::{ElementCircuit, SubcarrierGrid};
use crate::error::Result;
use crate::network::Network;
use crate::rates::Iterate;
use crate::selection::Selection;

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub users_per_bs: Vec<usize>,
    pub antennas: usize,
    pub elements: usize,
    pub subcarriers: usize,
    pub taps: usize,
    pub direct_gain: f64,
    pub bs_ris_gain: f64,
    /// Per element; the reflected path power grows with the element count.
    pub ris_ue_gain: f64,
    pub noise_power: f64,
    /// Per-BS budget, watts.
    pub power: f64,
}

impl InstanceSpec {
    /// `Q` BSs with `L` users each, `N` antennas, `M` elements, `K` subcarriers.
    pub fn new(q: usize, l: usize, n: usize, m: usize, k: usize) -> Self {
        Self {
            users_per_bs: vec![l; q],
            antennas: n,
            elements: m,
            subcarriers: k,
            taps: k.min(3),
            direct_gain: 1.0,
            bs_ris_gain: 1.0,
            ris_ue_gain: 1.0 / m as f64,
            noise_power: 1.0,
            power: 10.0,
        }
    }

    pub fn with_power(self, power: f64) -> Self {
        Self { power, ..self }
    }

    /// Channels drawn from `seed`.
    pub fn channels(&self, seed: u64) -> Result<NetworkChannels> {
        let q = self.users_per_bs.len();
        let mut out = NetworkChannels::zeros(&self.users_per_bs, self.antennas, self.elements, self.subcarriers);
        let users = out.num_users();
        let profile = DelayProfile::exponential(self.taps, 2.0);
        let draw = |tags: &[u64], rows: usize, cols: usize, gain: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tags));
            taps_to_frequency(&generate_link_taps(&mut rng, rows, cols, &profile, gain), self.subcarriers)
        };
        for j in 0..q {
            for u in 0..users {
                for (k, h) in draw(&[1, j as u64, u as u64], self.antennas, 1, self.direct_gain)?.into_iter().enumerate() {
                    *out.direct_mut(j, u, k) = h.column(0).into_owned();
                }
                for (k, g) in draw(&[3, j as u64, u as u64], self.elements, 1, self.ris_ue_gain)?.into_iter().enumerate() {
                    *out.ris_ue_mut(j, u, k) = g.column(0).into_owned();
                }
            }
            for (k, h) in draw(&[2, j as u64], self.elements, self.antennas, self.bs_ris_gain)?.into_iter().enumerate() {
                *out.bs_ris_mut(j, k) = h;
            }
        }
        Ok(out)
    }

    /// Full instance with the default element circuit on a 100 MHz band at 3.5 GHz.
    pub fn network(&self, seed: u64) -> Result<Network> {
        let grid = SubcarrierGrid::new(3.5e9, 1e8, self.subcarriers)?;
        Network::new(
            Arc::new(self.channels(seed)?),
            ElementCircuit::default(),
            grid,
            self.noise_power,
            vec![self.power; self.users_per_bs.len()],
        )
    }
}

/// Generic feasible point: Gaussian precoders using `load` of each budget,
/// uniform capacitances and uniform random selections.
pub fn random_iterate(network: &Network, seed: u64, load: f64) -> Iterate {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x69746572]));
    let n = network.antennas();
    let kk = network.subcarriers();
    let mut precoders: Vec<Vec<DVector<Complex64>>> = (0..network.num_users())
        .map(|_| {
            (0..kk)
                .map(|_| {
                    DVector::from_fn(n, |_, _| {
                        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
                    })
                })
                .collect()
        })
        .collect();
    for q in 0..network.num_bs() {
        let p: f64 = network.cell_users(q).flat_map(|u| precoders[u].iter()).map(|w| w.norm_squared()).sum();
        let scale = Complex64::new((load * network.power_budget(q) / p).sqrt(), 0.0);
        for u in network.cell_users(q) {
            for w in &mut precoders[u] {
                *w *= scale;
            }
        }
    }
    let circuit = network.circuit();
    let m = network.elements();
    let capacitances = (0..network.num_bs())
        .map(|_| (0..m).map(|_| rng.random_range(circuit.c_min..circuit.c_max)).collect())
        .collect();
    let selections = (0..network.num_bs())
        .map(|_| {
            let mut cols: Vec<usize> = (0..m).collect();
            cols.shuffle(&mut rng);
            Selection::from_columns(cols).expect("shuffle is a permutation")
        })
        .collect();
    Iterate { precoders, capacitances, selections }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        let spec = InstanceSpec::new(2, 2, 2, 4, 4);
        let a = spec.channels(3).unwrap();
        assert_eq!(a, spec.channels(3).unwrap());
        assert_ne!(a, spec.channels(4).unwrap());
        assert_eq!(a.num_users(), 4);
        assert_eq!(a.bs_ris(1, 3).shape(), (4, 2));
    }
}
