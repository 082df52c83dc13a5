//! Wideband channel generation and composite channel assembly.
//!
//! Every link is drawn as a tapped-delay line with i.i.d. circularly
//! symmetric Gaussian taps (Rayleigh fading, no spatial correlation) under an
//! exponential power-delay profile, scaled by the distance pathloss, and
//! taken to the subcarrier domain with a `K`-point DFT along the delay axis.
//!
//! Only the links that enter the received-signal model are generated: the
//! direct BS-UE links for every (BS, UE) pair, the BS-surface link between
//! each BS and its own surface, and the surface-UE links for every (surface,
//! UE) pair.

pub mod io;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::Selection;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Position = [f64; 3];

pub fn distance(a: &Position, b: &Position) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Node placement and array sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub bs: Vec<Position>,
    /// One surface per BS, controlled by that BS.
    pub ris: Vec<Position>,
    /// Users ordered cell by cell.
    pub users: Vec<Position>,
    pub users_per_bs: Vec<usize>,
    pub antennas: usize,
    pub elements: usize,
}

impl NetworkTopology {
    pub fn num_bs(&self) -> usize {
        self.bs.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.bs.len();
        if q == 0 || self.antennas == 0 || self.elements == 0 {
            return Err(Error::Config("need at least one BS, antenna and element".into()));
        }
        if self.ris.len() != q || self.users_per_bs.len() != q {
            return Err(Error::Config(format!(
                "{q} BSs but {} surfaces and {} user counts",
                self.ris.len(),
                self.users_per_bs.len()
            )));
        }
        if self.users_per_bs.iter().any(|&l| l == 0) {
            return Err(Error::Config("every BS must serve at least one user".into()));
        }
        let total: usize = self.users_per_bs.iter().sum();
        if total != self.users.len() {
            return Err(Error::Config(format!(
                "users_per_bs sums to {total} but {} user positions are given",
                self.users.len()
            )));
        }
        let nodes: Vec<&Position> = self.bs.iter().chain(&self.ris).chain(&self.users).collect();
        for (i, a) in nodes.iter().enumerate() {
            for b in &nodes[i + 1..] {
                if distance(a, b) <= 0.0 {
                    return Err(Error::Config(format!("nodes at {a:?} and {b:?} coincide")));
                }
            }
        }
        Ok(())
    }
}

/// Distance exponents of the three link types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathlossExponents {
    pub bs_ue: f64,
    pub bs_ris: f64,
    pub ris_ue: f64,
}

impl Default for PathlossExponents {
    fn default() -> Self {
        Self { bs_ue: 3.7, bs_ris: 2.2, ris_ue: 2.6 }
    }
}

/// Large- and small-scale fading parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub carrier_frequency: f64,
    pub num_taps: usize,
    /// e-folding length of the power-delay profile, in taps.
    pub delay_decay: f64,
    pub reference_distance: f64,
    pub exponents: PathlossExponents,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_frequency: 3.5e9,
            num_taps: 16,
            delay_decay: 4.0,
            reference_distance: 1.0,
            exponents: PathlossExponents::default(),
        }
    }
}

impl ChannelParams {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn delay_profile(&self) -> DelayProfile {
        DelayProfile::exponential(self.num_taps, self.delay_decay)
    }
}

/// Power gain `(lambda / 4 pi)^2 (d / d0)^-exponent` with `d0 = 1 m`.
pub fn pathloss(distance: f64, exponent: f64, wavelength: f64) -> f64 {
    pathloss_with_reference(distance, 1.0, exponent, wavelength)
}

pub fn pathloss_with_reference(distance: f64, reference: f64, exponent: f64, wavelength: f64) -> f64 {
    debug_assert!(distance > 0.0);
    let pl0 = (wavelength / (4.0 * std::f64::consts::PI)).powi(2);
    pl0 * (distance / reference).powf(-exponent)
}

/// Normalized tap powers of a tapped-delay line.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProfile {
    weights: Vec<f64>,
}

impl DelayProfile {
    /// `p_t` proportional to `exp(-t / decay)`, summing to one.
    pub fn exponential(num_taps: usize, decay: f64) -> Self {
        assert!(num_taps >= 1, "a delay profile needs at least one tap");
        let raw: Vec<f64> = (0..num_taps).map(|t| (-(t as f64) / decay).exp()).collect();
        let total: f64 = raw.iter().sum();
        Self { weights: raw.into_iter().map(|p| p / total).collect() }
    }

    pub fn flat() -> Self {
        Self { weights: vec![1.0] }
    }

    pub fn num_taps(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Draws a `rows x cols` tapped-delay-line matrix, one matrix per tap.
///
/// Entries are independent `CN(0, total_gain * p_t)`, so the expected
/// summed tap power of each entry equals `total_gain`.
pub fn generate_link_taps<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    profile: &DelayProfile,
    total_gain: f64,
) -> Vec<DMatrix<Complex64>> {
    profile
        .weights()
        .iter()
        .map(|&p| {
            let scale = (0.5 * total_gain * p).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * scale, im * scale)
            })
        })
        .collect()
}

/// `K`-point DFT along the delay axis: `H_k = sum_t tap_t exp(-j 2 pi k t / K)`.
pub fn taps_to_frequency(taps: &[DMatrix<Complex64>], num_subcarriers: usize) -> Result<Vec<DMatrix<Complex64>>> {
    if taps.is_empty() {
        return Err(Error::Precondition("no taps to transform".into()));
    }
    if taps.len() > num_subcarriers {
        return Err(Error::Precondition(format!(
            "{} taps exceed the {num_subcarriers}-point DFT",
            taps.len()
        )));
    }
    let (rows, cols) = taps[0].shape();
    let k_f = num_subcarriers as f64;
    Ok((0..num_subcarriers)
        .map(|k| {
            let mut acc = DMatrix::<Complex64>::zeros(rows, cols);
            for (t, tap) in taps.iter().enumerate() {
                // reduce the phase index first so large K*t stays exact
                let idx = (k * t) % num_subcarriers;
                let twiddle = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * idx as f64 / k_f);
                acc += tap * twiddle;
            }
            acc
        })
        .collect())
}

/// Composite BS-to-user channel `f` with `f^H = h^H + g^H S Phi H`.
///
/// `phi` holds the diagonal of `Phi`.
pub fn composite_channel(
    h: &DVector<Complex64>,
    g: &DVector<Complex64>,
    selection: &Selection,
    phi: &DVector<Complex64>,
    bs_ris: &DMatrix<Complex64>,
) -> DVector<Complex64> {
    let routed = selection.transpose_apply(g);
    let reflected = routed.zip_map(phi, |r, p| p.conj() * r);
    h + bs_ris.ad_mul(&reflected)
}

/// Mixes a root seed with a path of tags into an independent sub-stream seed.
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    tags.iter().fold(splitmix(root), |acc, &t| splitmix(acc ^ splitmix(t)))
}

const LINK_DIRECT: u64 = 1;
const LINK_BS_RIS: u64 = 2;
const LINK_RIS_UE: u64 = 3;

/// Frequency-domain channels of every link, indexed by subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkChannels {
    users_per_bs: Vec<usize>,
    antennas: usize,
    elements: usize,
    subcarriers: usize,
    /// `h_{j,u,k}` at `(j * U + u) * K + k`.
    direct: Vec<DVector<Complex64>>,
    /// `H_{q,q,k}` at `q * K + k`.
    bs_ris: Vec<DMatrix<Complex64>>,
    /// `g_{j,u,k}` at `(j * U + u) * K + k`.
    ris_ue: Vec<DVector<Complex64>>,
}

impl NetworkChannels {
    pub fn zeros(users_per_bs: &[usize], antennas: usize, elements: usize, subcarriers: usize) -> Self {
        let q = users_per_bs.len();
        let u: usize = users_per_bs.iter().sum();
        Self {
            users_per_bs: users_per_bs.to_vec(),
            antennas,
            elements,
            subcarriers,
            direct: vec![DVector::zeros(antennas); q * u * subcarriers],
            bs_ris: vec![DMatrix::zeros(elements, antennas); q * subcarriers],
            ris_ue: vec![DVector::zeros(elements); q * u * subcarriers],
        }
    }

    /// Random realization for `topology`, fully determined by `seed`.
    pub fn generate(
        topology: &NetworkTopology,
        params: &ChannelParams,
        num_subcarriers: usize,
        seed: u64,
    ) -> Result<Self> {
        topology.validate()?;
        let profile = params.delay_profile();
        let lambda = params.wavelength();
        let pl = |a: &Position, b: &Position, exponent: f64| {
            pathloss_with_reference(distance(a, b), params.reference_distance, exponent, lambda)
        };
        let n = topology.antennas;
        let m = topology.elements;
        let mut out = Self::zeros(&topology.users_per_bs, n, m, num_subcarriers);
        let ue = out.num_users();
        let owners = cell_index(&topology.users_per_bs);

        for j in 0..topology.num_bs() {
            for (u, &(cell, local)) in owners.iter().enumerate() {
                let tags = [LINK_DIRECT, j as u64, cell as u64, local as u64];
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &tags));
                let gain = pl(&topology.bs[j], &topology.users[u], params.exponents.bs_ue);
                let taps = generate_link_taps(&mut rng, n, 1, &profile, gain);
                for (k, resp) in taps_to_frequency(&taps, num_subcarriers)?.into_iter().enumerate() {
                    out.direct[(j * ue + u) * num_subcarriers + k] = resp.column(0).into_owned();
                }

                let tags = [LINK_RIS_UE, j as u64, cell as u64, local as u64];
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &tags));
                let gain = pl(&topology.ris[j], &topology.users[u], params.exponents.ris_ue);
                let taps = generate_link_taps(&mut rng, m, 1, &profile, gain);
                for (k, resp) in taps_to_frequency(&taps, num_subcarriers)?.into_iter().enumerate() {
                    out.ris_ue[(j * ue + u) * num_subcarriers + k] = resp.column(0).into_owned();
                }
            }
            let tags = [LINK_BS_RIS, j as u64, j as u64];
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &tags));
            let gain = pl(&topology.bs[j], &topology.ris[j], params.exponents.bs_ris);
            let taps = generate_link_taps(&mut rng, m, n, &profile, gain);
            for (k, resp) in taps_to_frequency(&taps, num_subcarriers)?.into_iter().enumerate() {
                out.bs_ris[j * num_subcarriers + k] = resp;
            }
        }
        Ok(out)
    }

    pub fn num_bs(&self) -> usize {
        self.users_per_bs.len()
    }

    pub fn num_users(&self) -> usize {
        self.users_per_bs.iter().sum()
    }

    pub fn users_per_bs(&self) -> &[usize] {
        &self.users_per_bs
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    fn link(&self, j: usize, u: usize, k: usize) -> usize {
        (j * self.num_users() + u) * self.subcarriers + k
    }

    /// Direct channel from BS `j` to user `u` on subcarrier `k`.
    pub fn direct(&self, j: usize, u: usize, k: usize) -> &DVector<Complex64> {
        &self.direct[self.link(j, u, k)]
    }

    pub fn direct_mut(&mut self, j: usize, u: usize, k: usize) -> &mut DVector<Complex64> {
        let i = self.link(j, u, k);
        &mut self.direct[i]
    }

    /// Channel from BS `q` to its own surface on subcarrier `k` (`M x N`).
    pub fn bs_ris(&self, q: usize, k: usize) -> &DMatrix<Complex64> {
        &self.bs_ris[q * self.subcarriers + k]
    }

    pub fn bs_ris_mut(&mut self, q: usize, k: usize) -> &mut DMatrix<Complex64> {
        &mut self.bs_ris[q * self.subcarriers + k]
    }

    /// Channel from surface `j` to user `u` on subcarrier `k`.
    pub fn ris_ue(&self, j: usize, u: usize, k: usize) -> &DVector<Complex64> {
        &self.ris_ue[self.link(j, u, k)]
    }

    pub fn ris_ue_mut(&mut self, j: usize, u: usize, k: usize) -> &mut DVector<Complex64> {
        let i = self.link(j, u, k);
        &mut self.ris_ue[i]
    }

    /// Multiplies every entry by `factor` (power gain `factor^2`).
    pub fn scale(&mut self, factor: f64) {
        let f = Complex64::new(factor, 0.0);
        self.direct.iter_mut().for_each(|v| *v *= f);
        self.bs_ris.iter_mut().for_each(|v| *v *= f);
        self.ris_ue.iter_mut().for_each(|v| *v *= f);
    }
}

/// `(cell, local index)` of every user.
pub(crate) fn cell_index(users_per_bs: &[usize]) -> Vec<(usize, usize)> {
    users_per_bs
        .iter()
        .enumerate()
        .flat_map(|(q, &l)| (0..l).map(move |i| (q, i)))
        .collect()
}
