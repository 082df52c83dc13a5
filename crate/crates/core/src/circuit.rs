//! Frequency response of a tunable reflecting element.
//!
//! Each element is an equivalent parallel resonant circuit: an inductor `L1`
//! in parallel with a series branch made of a second inductor `L2`, a
//! resistor `R` and a tunable capacitor `C`. Its reflection coefficient
//! against the free-space impedance `Z0` is evaluated either directly from
//! the impedance or through the numerator/denominator form
//!
//! ```text
//! phi(f, C) = 1 - 2 / (1 + D(f, C) / N(f, C))
//! N(f, C)   = 1 - (2 pi f)^2 (L1 + L2) C + j 2 pi f R C
//! D(f, C)   = j 2 pi f (L1 / Z0) (1 - (2 pi f)^2 L2 C + j 2 pi f R C)
//! ```
//!
//! which is polynomial in `C` and gives a cheap analytic derivative.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angular factor between hertz and rad/s.
pub const KAPPA: f64 = 2.0 * std::f64::consts::PI;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// RLC constants shared by every element of every surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElementCircuit {
    /// Ohms.
    pub resistance: f64,
    /// Henries.
    pub inductance_l1: f64,
    /// Henries.
    pub inductance_l2: f64,
    /// Ohms.
    pub free_space_impedance: f64,
    /// Farads.
    pub c_min: f64,
    /// Farads.
    pub c_max: f64,
}

impl Default for ElementCircuit {
    /// Constants of a common varactor-element circuit model
    /// (R = 1 ohm, L1 = 2.5 nH, L2 = 0.7 nH, Z0 = 377 ohm, C in [0.47, 2.35] pF).
    /// These are configuration values, not measured ground truth.
    fn default() -> Self {
        Self {
            resistance: 1.0,
            inductance_l1: 2.5e-9,
            inductance_l2: 0.7e-9,
            free_space_impedance: 377.0,
            c_min: 0.47e-12,
            c_max: 2.35e-12,
        }
    }
}

impl ElementCircuit {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.resistance,
            self.inductance_l1,
            self.inductance_l2,
            self.free_space_impedance,
            self.c_min,
            self.c_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Precondition("circuit constants must be finite".into()));
        }
        if self.resistance < 0.0 {
            return Err(Error::Precondition("resistance must be non-negative".into()));
        }
        if self.inductance_l1 <= 0.0 || self.inductance_l2 <= 0.0 {
            return Err(Error::Precondition("inductances must be positive".into()));
        }
        if self.free_space_impedance <= 0.0 {
            return Err(Error::Precondition("free-space impedance must be positive".into()));
        }
        if !(0.0 < self.c_min && self.c_min < self.c_max) {
            return Err(Error::Precondition(format!(
                "capacitance range must satisfy 0 < c_min < c_max, got [{}, {}]",
                self.c_min, self.c_max
            )));
        }
        Ok(())
    }

    pub fn in_range(&self, c: f64) -> bool {
        c >= self.c_min && c <= self.c_max
    }

    pub fn c_mid(&self) -> f64 {
        0.5 * (self.c_min + self.c_max)
    }

    /// Numerator polynomial `N(f, C)` of the reformulated response.
    pub fn numerator(&self, f: f64, c: f64) -> Complex64 {
        let w = KAPPA * f;
        Complex64::new(1.0 - w * w * (self.inductance_l1 + self.inductance_l2) * c, w * self.resistance * c)
    }

    /// Denominator polynomial `D(f, C)` of the reformulated response.
    pub fn denominator(&self, f: f64, c: f64) -> Complex64 {
        let w = KAPPA * f;
        let inner = Complex64::new(1.0 - w * w * self.inductance_l2 * c, w * self.resistance * c);
        J * (w * self.inductance_l1 / self.free_space_impedance) * inner
    }

    /// `d conj(N) / dC`, independent of `C`.
    pub fn numerator_conj_slope(&self, f: f64) -> Complex64 {
        let w = KAPPA * f;
        Complex64::new(-w * w * (self.inductance_l1 + self.inductance_l2), -w * self.resistance)
    }

    /// `d conj(D) / dC`, independent of `C`.
    pub fn denominator_conj_slope(&self, f: f64) -> Complex64 {
        let w = KAPPA * f;
        -J * (w * self.inductance_l1 / self.free_space_impedance)
            * Complex64::new(-w * w * self.inductance_l2, -w * self.resistance)
    }
}

/// Uniform OFDM subcarrier grid centred on the carrier.
///
/// Subcarrier `k` (zero based) sits at `fc - BW/2 + (k + 1/2) BW/K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubcarrierGrid {
    /// Hertz.
    pub carrier_frequency: f64,
    /// Hertz.
    pub bandwidth: f64,
    pub num_subcarriers: usize,
}

impl SubcarrierGrid {
    pub fn new(carrier_frequency: f64, bandwidth: f64, num_subcarriers: usize) -> Result<Self> {
        let grid = Self { carrier_frequency, bandwidth, num_subcarriers };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers == 0 {
            return Err(Error::Precondition("at least one subcarrier is required".into()));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth >= 0.0) {
            return Err(Error::Precondition("bandwidth must be finite and non-negative".into()));
        }
        if !(self.carrier_frequency.is_finite() && self.carrier_frequency - 0.5 * self.bandwidth > 0.0) {
            return Err(Error::Precondition("lowest subcarrier frequency must be positive".into()));
        }
        Ok(())
    }

    pub fn frequency(&self, k: usize) -> f64 {
        let spacing = self.bandwidth / self.num_subcarriers as f64;
        self.carrier_frequency - 0.5 * self.bandwidth + (k as f64 + 0.5) * spacing
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.num_subcarriers).map(|k| self.frequency(k)).collect()
    }
}

fn check_args(f: f64, c: f64) -> Result<()> {
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::Precondition(format!("frequency must be positive, got {f}")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Precondition(format!("capacitance must be positive, got {c}")));
    }
    Ok(())
}

fn finite_or(z: Complex64, what: &str, f: f64, c: f64) -> Result<Complex64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::Degenerate(format!("{what} is not finite at f = {f} Hz, C = {c} F")))
    }
}

/// Input impedance of the equivalent circuit.
pub fn characteristic_impedance(f: f64, c: f64, circuit: &ElementCircuit) -> Result<Complex64> {
    check_args(f, c)?;
    let w = KAPPA * f;
    let cap = Complex64::new(1.0, 0.0) / (J * w * c);
    let branch = J * w * circuit.inductance_l2 + circuit.resistance + cap;
    let loop_sum = J * w * (circuit.inductance_l1 + circuit.inductance_l2) + circuit.resistance + cap;
    finite_or(J * w * circuit.inductance_l1 * branch / loop_sum, "impedance", f, c)
}

/// `(Z - Z0) / (Z + Z0)` for a load `z` on a line of impedance `z0`.
pub fn reflection_from_impedance(z: Complex64, z0: f64) -> Result<Complex64> {
    let phi = (z - z0) / (z + z0);
    if phi.re.is_finite() && phi.im.is_finite() {
        Ok(phi)
    } else {
        Err(Error::Degenerate(format!("load {z} cancels the line impedance {z0}")))
    }
}

/// Reflection coefficient `(Z - Z0) / (Z + Z0)` from the impedance.
pub fn reflection_direct(f: f64, c: f64, circuit: &ElementCircuit) -> Result<Complex64> {
    let z = characteristic_impedance(f, c, circuit)?;
    reflection_from_impedance(z, circuit.free_space_impedance)
}

/// Reflection coefficient through the `N`/`D` polynomial form.
pub fn reflection_reformulated(f: f64, c: f64, circuit: &ElementCircuit) -> Result<Complex64> {
    check_args(f, c)?;
    let n = circuit.numerator(f, c);
    let d = circuit.denominator(f, c);
    finite_or(1.0 - 2.0 / (1.0 + d / n), "reflection coefficient", f, c)
}

/// Derivative of the *conjugated* reflection coefficient, `d conj(phi) / dC`,
/// in 1/F. Conjugate the result to obtain `d phi / dC`.
pub fn reflection_derivative(f: f64, c: f64, circuit: &ElementCircuit) -> Result<Complex64> {
    check_args(f, c)?;
    let n = circuit.numerator(f, c).conj();
    let d = circuit.denominator(f, c).conj();
    let dn = circuit.numerator_conj_slope(f);
    let dd = circuit.denominator_conj_slope(f);
    let sum = n + d;
    finite_or(-2.0 / (sum * sum) * (dn * d - n * dd), "reflection derivative", f, c)
}

fn check_box(c_q: &[f64], circuit: &ElementCircuit) -> Result<()> {
    if let Some((m, c)) = c_q.iter().enumerate().find(|(_, c)| !circuit.in_range(**c)) {
        return Err(Error::Precondition(format!(
            "capacitance {c} F of element {m} outside [{}, {}]",
            circuit.c_min, circuit.c_max
        )));
    }
    Ok(())
}

/// Diagonals of the per-subcarrier reflection matrices of one surface.
///
/// Entry `[k][m]` is the response of element `m` at subcarrier `k`.
pub fn build_phase_matrices(
    c_q: &[f64],
    grid: &SubcarrierGrid,
    circuit: &ElementCircuit,
) -> Result<Vec<DVector<Complex64>>> {
    check_box(c_q, circuit)?;
    grid.frequencies()
        .into_iter()
        .map(|f| {
            let entries = c_q
                .iter()
                .map(|&c| reflection_reformulated(f, c, circuit))
                .collect::<Result<Vec<_>>>()?;
            Ok(DVector::from_vec(entries))
        })
        .collect()
}
