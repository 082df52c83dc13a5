//! Distributed SCA with interference pricing.
//!
//! Every iteration, each BS solves its local surrogate problem against the
//! same snapshot of the network (Jacobi scheme). Precoders and capacitances
//! are blended toward the local optima with a decreasing step size; switch
//! selections are discrete and are swapped outright when the new permutation
//! strictly improves the local surrogate.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacitance::{gradient_own, pricing_c, subproblem_objective, update_capacitances, GradientWorkspace};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::precoding::{bisect_power_multiplier, intracell_pricing_w, pricing_w, BisectionOptions, PrecoderSurrogate};
use crate::rates::{Iterate, LinkState};
use crate::selection::Selection;
use crate::switch::{objective_gain_check, solve_selection, SelectionGradient};

type CVec = DVector<Complex64>;

/// Relative power slack tolerated by the feasibility re-check.
pub const POWER_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RisMode {
    BeyondDiagonal,
    Diagonal,
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Coordination {
    Cooperative,
    NonCooperative,
}

/// Surface architecture paired with the pricing policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variant {
    pub ris: RisMode,
    pub coordination: Coordination,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::new(RisMode::BeyondDiagonal, Coordination::Cooperative),
        Variant::new(RisMode::BeyondDiagonal, Coordination::NonCooperative),
        Variant::new(RisMode::Diagonal, Coordination::Cooperative),
        Variant::new(RisMode::Diagonal, Coordination::NonCooperative),
        Variant::new(RisMode::Absent, Coordination::Cooperative),
        Variant::new(RisMode::Absent, Coordination::NonCooperative),
    ];

    pub const fn new(ris: RisMode, coordination: Coordination) -> Self {
        Self { ris, coordination }
    }

    pub fn cooperative(&self) -> bool {
        self.coordination == Coordination::Cooperative
    }

    /// Same surface mode with the other pricing policy.
    pub fn counterpart(&self) -> Self {
        let coordination = match self.coordination {
            Coordination::Cooperative => Coordination::NonCooperative,
            Coordination::NonCooperative => Coordination::Cooperative,
        };
        Self { coordination, ..*self }
    }

    pub fn name(&self) -> &'static str {
        match (self.ris, self.coordination) {
            (RisMode::BeyondDiagonal, Coordination::Cooperative) => "bd-ris",
            (RisMode::BeyondDiagonal, Coordination::NonCooperative) => "bd-ris-nocoop",
            (RisMode::Diagonal, Coordination::Cooperative) => "diag-ris",
            (RisMode::Diagonal, Coordination::NonCooperative) => "diag-ris-nocoop",
            (RisMode::Absent, Coordination::Cooperative) => "no-ris",
            (RisMode::Absent, Coordination::NonCooperative) => "no-ris-nocoop",
        }
    }
}

impl Default for Variant {
    fn default() -> Self {
        Variant::ALL[0]
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Proximal weight.
    pub tau: f64,
    pub alpha0: f64,
    /// Step-size decay, `alpha <- alpha (1 - epsilon alpha)`.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once the sum rate moves by at most this much (bits/s/Hz).
    pub tolerance: f64,
    /// Capacitance unit of the proximal capacitance update, farads.
    pub capacitance_unit: f64,
    /// Keep the selections fixed for this many initial iterations.
    pub switch_hold_iterations: usize,
    /// Retries when a step lowers the true sum rate: the first drops the
    /// selection swaps, later ones halve the step. Zero disables the guard.
    pub max_backtracks: usize,
    pub variant: Variant,
    pub bisection: BisectionOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: 0.8,
            alpha0: 1.0,
            epsilon: 1e-2,
            max_iterations: 500,
            tolerance: 1e-4,
            capacitance_unit: 1e-12,
            switch_hold_iterations: 0,
            max_backtracks: 30,
            variant: Variant::default(),
            bisection: BisectionOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("solver: {msg}")));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return bad("alpha0 must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1)");
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be non-negative");
        }
        if !(self.capacitance_unit > 0.0 && self.capacitance_unit.is_finite()) {
            return bad("capacitance_unit must be positive");
        }
        if !(self.bisection.rel_tol > 0.0) {
            return bad("bisection.rel_tol must be positive");
        }
        Ok(())
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self { variant, ..*self }
    }
}

/// Local optimum of one BS's surrogate problem.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub bs: usize,
    /// Precoders of the BS's users, `[local user][k]`.
    pub precoders: Vec<Vec<CVec>>,
    /// `None` when the variant has no surfaces.
    pub capacitances: Option<Vec<f64>>,
    /// `Some` only when a new permutation strictly improves the surrogate.
    pub selection: Option<Selection>,
    /// Surrogate gain over the current iterate.
    pub surrogate_gain: f64,
    pub lambda: f64,
}

/// Solves the local surrogate problem of BS `q` against `state`.
pub fn local_subproblem(
    q: usize,
    state: &LinkState,
    iterate: &Iterate,
    network: &Network,
    config: &SolverConfig,
    iteration: usize,
) -> Result<Candidate> {
    let variant = config.variant;
    let tau = config.tau;
    let zero_price = || vec![CVec::zeros(network.antennas()); network.subcarriers()];

    let surrogates: Vec<PrecoderSurrogate> = network
        .cell_users(q)
        .map(|l| {
            let mut price = if variant.cooperative() { pricing_w(l, state, network) } else { zero_price() };
            for (p, intra) in price.iter_mut().zip(intracell_pricing_w(l, state, network)) {
                *p += intra;
            }
            PrecoderSurrogate::build(l, state, iterate, network, price)
        })
        .collect();
    let power = bisect_power_multiplier(&surrogates, tau, network.power_budget(q), &config.bisection)?;
    let mut gain: f64 = surrogates
        .iter()
        .zip(&power.precoders)
        .map(|(s, w)| s.objective(w, tau) - s.objective(&s.anchor, tau))
        .sum();

    let mut capacitances = None;
    let mut selection = None;
    if network.ris_deployed() && variant.ris != RisMode::Absent {
        let unit = config.capacitance_unit;
        let ws = GradientWorkspace::new(q, iterate, network)?;
        let scaled = |g: Vec<f64>| g.into_iter().map(|x| x * unit).collect::<Vec<_>>();
        let gamma = scaled(gradient_own(q, state, iterate, network, &ws));
        let price = if variant.cooperative() {
            scaled(pricing_c(q, state, iterate, network, &ws))
        } else {
            vec![0.0; gamma.len()]
        };
        let c_t: Vec<f64> = iterate.capacitances[q].iter().map(|c| c / unit).collect();
        let circuit = network.circuit();
        let c_hat = update_capacitances(&c_t, &gamma, &price, tau, circuit.c_min / unit, circuit.c_max / unit);
        gain += subproblem_objective(&c_hat, &c_t, &gamma, &price, tau);
        capacitances = Some(
            c_hat
                .iter()
                .map(|c| (c * unit).clamp(circuit.c_min, circuit.c_max))
                .collect(),
        );

        if variant.ris == RisMode::BeyondDiagonal && iteration >= config.switch_hold_iterations {
            let anchor = &iterate.selections[q];
            let grad = SelectionGradient::evaluate(q, state, iterate, network, variant.cooperative());
            let s_new = solve_selection(&grad.reward(anchor, tau));
            let s_gain = objective_gain_check(&s_new, anchor, anchor, &grad, tau);
            if s_gain > 0.0 && s_new != *anchor {
                gain += s_gain;
                selection = Some(s_new);
            }
        }
    }

    Ok(Candidate { bs: q, precoders: power.precoders, capacitances, selection, surrogate_gain: gain, lambda: power.lambda })
}

/// `X + alpha (Xhat - X)` on precoders and capacitances; selections are
/// replaced where a candidate carries one. The result is re-checked for
/// feasibility.
pub fn step(iterate: &Iterate, candidates: &[Candidate], alpha: f64, network: &Network) -> Result<Iterate> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Precondition(format!("step size {alpha} outside [0, 1]")));
    }
    let mut next = iterate.clone();
    let blend = Complex64::new(alpha, 0.0);
    for cand in candidates {
        for (l, w_hat) in network.cell_users(cand.bs).zip(&cand.precoders) {
            for (w, w_new) in next.precoders[l].iter_mut().zip(w_hat) {
                let delta = w_new - &*w;
                w.axpy(blend, &delta, Complex64::new(1.0, 0.0));
            }
        }
        if let Some(c_hat) = &cand.capacitances {
            let circuit = network.circuit();
            for (c, c_new) in next.capacitances[cand.bs].iter_mut().zip(c_hat) {
                // clamp absorbs rounding at the box edges
                *c = (*c + alpha * (c_new - *c)).clamp(circuit.c_min, circuit.c_max);
            }
        }
        if let Some(s) = &cand.selection {
            next.selections[cand.bs] = s.clone();
        }
    }
    next.check_feasible(network, POWER_TOLERANCE)?;
    Ok(next)
}

/// Applies `step`, retrying while the true sum rate falls below `rate`.
///
/// Blended precoder and capacitance moves are ascent directions of the sum
/// rate for the cooperative scheme, so a short enough step always succeeds
/// there; the selection swaps are not scaled by the step and are dropped
/// first. When every retry fails the iterate is kept.
fn guarded_step(
    iterate: &Iterate,
    mut candidates: Vec<Candidate>,
    alpha: f64,
    rate: f64,
    network: &Network,
    config: &SolverConfig,
) -> Result<(Iterate, LinkState, f64, usize)> {
    let mut trial_alpha = alpha;
    for attempt in 0..=config.max_backtracks {
        let next = step(iterate, &candidates, trial_alpha, network)?;
        let state = LinkState::evaluate(network, &next)?;
        if config.max_backtracks == 0 || state.sum_rate() >= rate {
            return Ok((next, state, trial_alpha, attempt));
        }
        if candidates.iter().any(|c| c.selection.is_some()) {
            candidates.iter_mut().for_each(|c| c.selection = None);
        } else {
            trial_alpha *= 0.5;
        }
    }
    let state = LinkState::evaluate(network, iterate)?;
    Ok((iterate.clone(), state, 0.0, config.max_backtracks + 1))
}

/// Step size for iteration `t` given the previous one.
pub fn step_size_schedule(t: usize, alpha_prev: f64, config: &SolverConfig) -> f64 {
    if t == 0 {
        config.alpha0
    } else {
        alpha_prev * (1.0 - config.epsilon * alpha_prev)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 1-based iteration index.
    pub iteration: usize,
    /// True sum rate after the step, bits/s/Hz.
    pub sum_rate: f64,
    /// Surrogate gain of each BS's local solve.
    pub surrogate_gain: Vec<f64>,
    /// Step size actually applied.
    pub alpha: f64,
    /// Rejected trial steps before this one.
    pub backtracks: usize,
    /// `P_q - ||w_q||^2` per BS after the step.
    pub power_slack: Vec<f64>,
    pub wall_time: Duration,
}

/// Per-iteration log of one run. Holds one record per executed iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub initial_sum_rate: f64,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sum rates starting with the initialization.
    pub fn sum_rates(&self) -> Vec<f64> {
        std::iter::once(self.initial_sum_rate).chain(self.records.iter().map(|r| r.sum_rate)).collect()
    }

    /// Whether no step lowers the sum rate by more than `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.sum_rates().windows(2).all(|w| w[1] >= w[0] - slack)
    }

    /// CSV with columns `iteration,sum_rate,alpha,slack_bs0,...`; row 0 is
    /// the initialization. Contains no timing, so it is reproducible.
    pub fn write_csv<W: std::io::Write>(&self, out: W, num_bs: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string(), "sum_rate".into(), "alpha".into()];
        header.extend((0..num_bs).map(|q| format!("slack_bs{q}")));
        w.write_record(&header)?;
        let mut first = vec!["0".to_string(), fmt_f64(self.initial_sum_rate), String::new()];
        first.extend(std::iter::repeat_n(String::new(), num_bs));
        w.write_record(&first)?;
        for r in &self.records {
            let mut row = vec![r.iteration.to_string(), fmt_f64(r.sum_rate), fmt_f64(r.alpha)];
            row.extend(r.power_slack.iter().map(|s| fmt_f64(*s)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Best iterate by true sum rate (initialization included).
    pub best: Iterate,
    pub best_sum_rate: f64,
    pub last: Iterate,
    pub trace: Trace,
    pub converged: bool,
}

impl RunOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// A sub-solver failure together with the iterations completed before it.
#[derive(Debug)]
pub struct RunError {
    pub error: Error,
    pub trace: Trace,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "solver failed after {} iterations: {}", self.trace.len(), self.error)
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Network view matching the variant: surfaces dropped for `Absent`.
pub fn network_for(network: &Network, variant: Variant) -> Network {
    match variant.ris {
        RisMode::Absent => network.without_ris(),
        _ => network.clone(),
    }
}

/// Runs the distributed scheme from the standard initialization.
pub fn run(network: &Network, config: &SolverConfig) -> std::result::Result<RunOutcome, RunError> {
    let net = network_for(network, config.variant);
    run_from(&net, Iterate::initial(&net), config)
}

/// Runs the distributed scheme from `initial` on `network` as given.
pub fn run_from(network: &Network, initial: Iterate, config: &SolverConfig) -> std::result::Result<RunOutcome, RunError> {
    run_observed(network, initial, config, |_, _| {})
}

/// [`run_from`], calling `observer(t, iterate)` on the initialization
/// (`t = 0`) and after every step.
pub fn run_observed<F: FnMut(usize, &Iterate)>(
    network: &Network,
    initial: Iterate,
    config: &SolverConfig,
    mut observer: F,
) -> std::result::Result<RunOutcome, RunError> {
    let mut trace = Trace::default();
    macro_rules! bail {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => return Err(RunError { error, trace }),
            }
        };
    }
    bail!(config.validate());
    bail!(initial.check_feasible(network, POWER_TOLERANCE));

    let start = Instant::now();
    let mut iterate = initial;
    observer(0, &iterate);
    let mut state = bail!(LinkState::evaluate(network, &iterate));
    let mut rate = state.sum_rate();
    trace.initial_sum_rate = rate;
    let mut best = (iterate.clone(), rate);
    let mut alpha = config.alpha0;
    let mut converged = false;

    for t in 0..config.max_iterations {
        alpha = step_size_schedule(t, alpha, config);
        let candidates: Vec<Candidate> = bail!((0..network.num_bs())
            .into_par_iter()
            .map(|q| local_subproblem(q, &state, &iterate, network, config, t))
            .collect::<Result<Vec<_>>>());
        let (next, next_state, applied, backtracks) =
            bail!(guarded_step(&iterate, candidates.clone(), alpha, rate, network, config));
        iterate = next;
        state = next_state;
        observer(t + 1, &iterate);
        let next_rate = state.sum_rate();
        if !next_rate.is_finite() {
            return Err(RunError { error: Error::Numerical("sum rate is not finite".into()), trace });
        }
        trace.records.push(TraceRecord {
            iteration: t + 1,
            sum_rate: next_rate,
            surrogate_gain: candidates.iter().map(|c| c.surrogate_gain).collect(),
            alpha: applied,
            backtracks,
            power_slack: (0..network.num_bs())
                .map(|q| network.power_budget(q) - iterate.transmit_power(q, network))
                .collect(),
            wall_time: start.elapsed(),
        });
        if next_rate > best.1 {
            best = (iterate.clone(), next_rate);
        }
        let change = (next_rate - rate).abs();
        rate = next_rate;
        // a shortened step says little about stationarity; a rejected one is final
        let stalled = backtracks > config.max_backtracks;
        if stalled || (backtracks == 0 && change <= config.tolerance) {
            converged = true;
            break;
        }
    }

    Ok(RunOutcome { best: best.0, best_sum_rate: best.1, last: iterate, trace, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_starts_at_alpha0_and_decreases() {
        let cfg = SolverConfig::default();
        let mut a = step_size_schedule(0, 0.0, &cfg);
        assert_eq!(a, 1.0);
        for t in 1..100_000 {
            let next = step_size_schedule(t, a, &cfg);
            assert!(next > 0.0 && next < a);
            a = next;
        }
    }

    #[test]
    fn zero_epsilon_keeps_step_constant() {
        let cfg = SolverConfig { epsilon: 0.0, alpha0: 0.5, ..Default::default() };
        assert_eq!(step_size_schedule(7, 0.5, &cfg), 0.5);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(v.counterpart().counterpart(), v);
        }
        assert!("bd".parse::<Variant>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { tau: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { alpha0: 1.5, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { epsilon: 1.0, ..Default::default() }.validate().is_err());
    }
}
