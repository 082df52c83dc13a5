//! Node layout and per-trial problem instances.

use std::sync::Arc;

use crate::channels::{derive_seed, NetworkChannels, NetworkTopology, Position};
use crate::circuit::SubcarrierGrid;
use crate::error::Result;
use crate::harness::config::{dbm_to_watts, ScenarioConfig};
use crate::network::Network;

const TRIAL_TAG: u64 = 0x7472_6961_6c;

/// Places BSs, surfaces and users. User `q * L + l` is served by BS `q`.
pub fn build_scenario(config: &ScenarioConfig) -> Result<NetworkTopology> {
    config.validate()?;
    let g = &config.geometry;
    let w = g.bs_square_width;
    let corners = [[0.0, 0.0], [w, 0.0], [0.0, w], [w, w]];
    let bs: Vec<Position> = corners[..config.num_bs].iter().map(|c| [c[0], c[1], g.bs_height]).collect();
    let ris: Vec<Position> = g.ris_positions[..config.num_bs].iter().map(|p| [p[0], p[1], g.ris_height]).collect();
    let (ox, oy, s) = (g.ue_origin[0], g.ue_origin[1], g.ue_square_width);
    let ue_sites = [[ox, oy], [ox + s, oy], [ox, oy + s], [ox + s, oy + s]];
    let users: Vec<Position> = ue_sites[..config.num_users()].iter().map(|p| [p[0], p[1], g.ue_height]).collect();
    let topology = NetworkTopology {
        bs,
        ris,
        users,
        users_per_bs: vec![config.users_per_bs; config.num_bs],
        antennas: config.antennas,
        elements: config.elements,
    };
    topology.validate()?;
    Ok(topology)
}

/// Seed of the channel realization of `trial`.
pub fn trial_seed(root: u64, trial: usize) -> u64 {
    derive_seed(root, &[TRIAL_TAG, trial as u64])
}

pub fn trial_channels(config: &ScenarioConfig, topology: &NetworkTopology, trial: usize) -> Result<NetworkChannels> {
    NetworkChannels::generate(topology, &config.channel, config.subcarriers, trial_seed(config.seed, trial))
}

/// Instance at per-BS power `power_dbm` on the given channels.
pub fn network_at(config: &ScenarioConfig, channels: Arc<NetworkChannels>, power_dbm: f64) -> Result<Network> {
    let grid = SubcarrierGrid::new(config.channel.carrier_frequency, config.bandwidth, config.subcarriers)?;
    Network::new(
        channels,
        config.circuit,
        grid,
        dbm_to_watts(config.noise_dbm),
        vec![dbm_to_watts(power_dbm); config.num_bs],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::distance;

    #[test]
    fn default_layout() {
        let t = build_scenario(&ScenarioConfig::default()).unwrap();
        assert_eq!(t.bs, vec![[0.0, 0.0, 5.0], [60.0, 0.0, 5.0], [0.0, 60.0, 5.0], [60.0, 60.0, 5.0]]);
        assert_eq!(t.ris[2], [-2.5, 111.5, 3.0]);
        assert_eq!(t.users[3], [32.5, 62.5, 1.5]);
        // offsets (-2.5, 8.5, -2)
        assert!((distance(&t.bs[0], &t.ris[0]) - 82.5f64.sqrt()).abs() < 1e-12);
        for a in t.bs.iter().chain(&t.ris) {
            for u in &t.users {
                assert!(distance(a, u) > 0.0);
            }
        }
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }
}
