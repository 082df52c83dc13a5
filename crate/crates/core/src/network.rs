//! A fully specified problem instance: channels plus everything needed to
//! turn a variable triplet into rates.

use std::ops::Range;
use std::sync::Arc;

use crate::channels::{cell_index, NetworkChannels};
use crate::circuit::{ElementCircuit, SubcarrierGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Network {
    channels: Arc<NetworkChannels>,
    circuit: ElementCircuit,
    grid: SubcarrierGrid,
    /// Per-subcarrier noise power at every user, watts.
    noise_power: f64,
    /// Per-BS total transmit power over users and subcarriers, watts.
    power_budget: Vec<f64>,
    ris_deployed: bool,
    cells: Vec<(usize, usize)>,
    cell_start: Vec<usize>,
}

impl Network {
    pub fn new(
        channels: Arc<NetworkChannels>,
        circuit: ElementCircuit,
        grid: SubcarrierGrid,
        noise_power: f64,
        power_budget: Vec<f64>,
    ) -> Result<Self> {
        circuit.validate()?;
        grid.validate()?;
        if grid.num_subcarriers != channels.subcarriers() {
            return Err(Error::Config(format!(
                "grid has {} subcarriers, channels have {}",
                grid.num_subcarriers,
                channels.subcarriers()
            )));
        }
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return Err(Error::Config(format!("noise power must be positive, got {noise_power}")));
        }
        if power_budget.len() != channels.num_bs() || power_budget.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Config("one positive power budget per BS is required".into()));
        }
        let cells = cell_index(channels.users_per_bs());
        let mut cell_start = Vec::with_capacity(channels.num_bs() + 1);
        let mut acc = 0;
        for &l in channels.users_per_bs() {
            cell_start.push(acc);
            acc += l;
        }
        cell_start.push(acc);
        Ok(Self { channels, circuit, grid, noise_power, power_budget, ris_deployed: true, cells, cell_start })
    }

    /// Same instance with the surfaces removed (direct links only).
    pub fn without_ris(&self) -> Self {
        Self { ris_deployed: false, ..self.clone() }
    }

    pub fn with_power_budget(&self, power_budget: Vec<f64>) -> Result<Self> {
        Self::new(self.channels.clone(), self.circuit, self.grid, self.noise_power, power_budget)
            .map(|n| Self { ris_deployed: self.ris_deployed, ..n })
    }

    pub fn ris_deployed(&self) -> bool {
        self.ris_deployed
    }

    pub fn channels(&self) -> &NetworkChannels {
        &self.channels
    }

    pub fn circuit(&self) -> &ElementCircuit {
        &self.circuit
    }

    pub fn grid(&self) -> &SubcarrierGrid {
        &self.grid
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn power_budget(&self, q: usize) -> f64 {
        self.power_budget[q]
    }

    pub fn num_bs(&self) -> usize {
        self.channels.num_bs()
    }

    pub fn num_users(&self) -> usize {
        self.cells.len()
    }

    pub fn antennas(&self) -> usize {
        self.channels.antennas()
    }

    pub fn elements(&self) -> usize {
        self.channels.elements()
    }

    pub fn subcarriers(&self) -> usize {
        self.channels.subcarriers()
    }

    /// Serving BS of user `u`.
    pub fn cell_of(&self, u: usize) -> usize {
        self.cells[u].0
    }

    /// Global indices of the users served by BS `q`.
    pub fn cell_users(&self, q: usize) -> Range<usize> {
        self.cell_start[q]..self.cell_start[q + 1]
    }
}
