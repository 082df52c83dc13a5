//! Analytic pieces checked against independent oracles.
//!
//! Rates for the finite-difference checks come from [`dense_user_rates`],
//! which builds every composite channel from dense selection matrices and the
//! impedance form of the reflection coefficient, sharing no code with the
//! factored evaluation used by the solver.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::assignment::max_weight_assignment;
use crate::capacitance::{gradient_own, pricing_c, update_capacitances, GradientWorkspace};
use crate::circuit::{reflection_derivative, reflection_direct, reflection_reformulated, ElementCircuit, SubcarrierGrid};
use crate::error::Result;
use crate::instances::{random_iterate, InstanceSpec};
use crate::network::Network;
use crate::precoding::{intracell_pricing_w, pricing_w, solve_precoder_given_lambda, PrecoderSurrogate};
use crate::rates::{Iterate, LinkState};
use crate::switch::{gradient_s_own, pricing_s};

type CVec = DVector<Complex64>;

const FD_STEP_C: f64 = 1e-17;
const FD_STEP: f64 = 1e-6;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `sum_k log2(1 + SINR)` of every user, with dense real selections.
pub fn dense_user_rates(
    network: &Network,
    precoders: &[Vec<CVec>],
    capacitances: &[Vec<f64>],
    selections: &[DMatrix<f64>],
) -> Result<Vec<f64>> {
    let ch = network.channels();
    let users = network.num_users();
    let q_count = network.num_bs();
    let freqs = network.grid().frequencies();
    let mut rates = vec![0.0; users];
    for (k, &f) in freqs.iter().enumerate() {
        // f_{j,u} = h + H^H Phi^H S^T g
        let mut comp = vec![vec![CVec::zeros(0); users]; q_count];
        for j in 0..q_count {
            let phi_h = if network.ris_deployed() {
                let diag = capacitances[j]
                    .iter()
                    .map(|&cap| reflection_direct(f, cap, network.circuit()).map(|p| p.conj()))
                    .collect::<Result<Vec<_>>>()?;
                Some(DMatrix::from_diagonal(&CVec::from_vec(diag)))
            } else {
                None
            };
            for u in 0..users {
                let h = ch.direct(j, u, k).clone();
                comp[j][u] = match &phi_h {
                    Some(phi_h) => {
                        let s_t = selections[j].transpose().map(c);
                        h + ch.bs_ris(j, k).adjoint() * phi_h * s_t * ch.ris_ue(j, u, k)
                    }
                    None => h,
                };
            }
        }
        for u in 0..users {
            let mut signal = 0.0;
            let mut mui = network.noise_power();
            for n in 0..users {
                let p = comp[network.cell_of(n)][u].dotc(&precoders[n][k]).norm_sqr();
                if n == u {
                    signal = p;
                } else {
                    mui += p;
                }
            }
            rates[u] += (signal / mui).ln_1p() / LN_2;
        }
    }
    Ok(rates)
}

fn dense_selections(iterate: &Iterate) -> Vec<DMatrix<f64>> {
    iterate.selections.iter().map(|s| s.to_matrix()).collect()
}

/// `|a - b| / |b|`, or `|a - b|` when `b` vanishes.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

fn split_cells(network: &Network, q: usize, rates: &[f64]) -> (f64, f64) {
    let own: f64 = network.cell_users(q).map(|u| rates[u]).sum();
    (own, rates.iter().sum::<f64>() - own)
}

/// Max relative error of `d conj(phi) / dC` against central differences.
pub fn element_derivative_error(seed: u64, samples: usize) -> f64 {
    let circuit = ElementCircuit::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let f = rng.random_range(3.45e9..3.55e9);
            let cap = rng.random_range(circuit.c_min + 1e-15..circuit.c_max - 1e-15);
            let an = reflection_derivative(f, cap, &circuit).unwrap();
            let phi = |x: f64| reflection_direct(f, x, &circuit).unwrap().conj();
            let fd = (phi(cap + FD_STEP_C) - phi(cap - FD_STEP_C)) / c(2.0 * FD_STEP_C);
            (an - fd).norm() / fd.norm()
        })
        .fold(0.0, f64::max)
}

/// Max distance between the two reflection forms over random in-band,
/// in-box samples (absolute plus relative).
pub fn reflection_equivalence_error(seed: u64, samples: usize) -> f64 {
    let circuit = ElementCircuit::default();
    let grid = SubcarrierGrid::new(3.5e9, 1e8, 64).unwrap();
    let (lo, hi) = (grid.frequency(0), grid.frequency(63));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let f = rng.random_range(lo..=hi);
            let cap = rng.random_range(circuit.c_min..=circuit.c_max);
            let a = reflection_direct(f, cap, &circuit).unwrap();
            let b = reflection_reformulated(f, cap, &circuit).unwrap();
            (a - b).norm() / (1.0 + a.norm())
        })
        .fold(0.0, f64::max)
}

/// Own-cell and pricing capacitance gradients against central differences,
/// worst relative error over BSs.
pub fn capacitance_gradient_error(network: &Network, iterate: &Iterate) -> Result<f64> {
    let state = LinkState::evaluate(network, iterate)?;
    let sels = dense_selections(iterate);
    let mut worst: f64 = 0.0;
    for q in 0..network.num_bs() {
        let ws = GradientWorkspace::new(q, iterate, network)?;
        let own = gradient_own(q, &state, iterate, network, &ws);
        let price = pricing_c(q, &state, iterate, network, &ws);
        let mut fd_own = vec![0.0; own.len()];
        let mut fd_price = vec![0.0; own.len()];
        for m in 0..own.len() {
            let eval = |delta: f64| -> Result<(f64, f64)> {
                let mut caps = iterate.capacitances.clone();
                caps[q][m] += delta;
                Ok(split_cells(network, q, &dense_user_rates(network, &iterate.precoders, &caps, &sels)?))
            };
            let (po, pp) = eval(FD_STEP_C)?;
            let (mo, mp) = eval(-FD_STEP_C)?;
            fd_own[m] = (po - mo) / (2.0 * FD_STEP_C);
            fd_price[m] = (pp - mp) / (2.0 * FD_STEP_C);
        }
        worst = worst.max(rel_err(&own, &fd_own)).max(rel_err(&price, &fd_price));
    }
    Ok(worst)
}

/// Conjugate-Wirtinger gradient `(d/dx + j d/dy) / 2` of `f` at precoder
/// `w_{user,k}`, by central differences.
fn wirtinger_fd(
    iterate: &Iterate,
    user: usize,
    k: usize,
    f: &dyn Fn(&[Vec<CVec>]) -> Result<f64>,
) -> Result<CVec> {
    let n = iterate.precoders[user][k].len();
    let mut grad = CVec::zeros(n);
    for i in 0..n {
        for (dir, unit) in [(0, c(1.0)), (1, Complex64::new(0.0, 1.0))] {
            let mut plus = iterate.precoders.clone();
            plus[user][k][i] += unit * FD_STEP;
            let mut minus = iterate.precoders.clone();
            minus[user][k][i] -= unit * FD_STEP;
            let d = (f(&plus)? - f(&minus)?) / (2.0 * FD_STEP);
            if dir == 0 {
                grad[i] += c(0.5 * d);
            } else {
                grad[i] += Complex64::new(0.0, 0.5 * d);
            }
        }
    }
    Ok(grad)
}

fn flatten(v: &[CVec]) -> Vec<f64> {
    v.iter().flat_map(|x| x.iter().flat_map(|z| [z.re, z.im])).collect()
}

/// Inter- and intracell precoder prices against central differences of the
/// corresponding rate sums, worst relative error over users.
pub fn precoder_pricing_error(network: &Network, iterate: &Iterate) -> Result<f64> {
    let state = LinkState::evaluate(network, iterate)?;
    let sels = dense_selections(iterate);
    let mut worst: f64 = 0.0;
    for user in 0..network.num_users() {
        let q = network.cell_of(user);
        let rates = |p: &[Vec<CVec>]| dense_user_rates(network, p, &iterate.capacitances, &sels);
        let other = |p: &[Vec<CVec>]| -> Result<f64> { Ok(split_cells(network, q, &rates(p)?).1) };
        let intra = |p: &[Vec<CVec>]| -> Result<f64> {
            let r = rates(p)?;
            Ok(network.cell_users(q).filter(|&m| m != user).map(|m| r[m]).sum())
        };
        let inter_an = pricing_w(user, &state, network);
        let intra_an = intracell_pricing_w(user, &state, network);
        let mut inter_fd = Vec::new();
        let mut intra_fd = Vec::new();
        for k in 0..network.subcarriers() {
            inter_fd.push(wirtinger_fd(iterate, user, k, &other)?);
            intra_fd.push(wirtinger_fd(iterate, user, k, &intra)?);
        }
        worst = worst.max(rel_err(&flatten(&inter_an), &flatten(&inter_fd)));
        if network.cell_users(q).len() > 1 {
            worst = worst.max(rel_err(&flatten(&intra_an), &flatten(&intra_fd)));
        }
    }
    Ok(worst)
}

/// `Re{Gamma}` and `Re{Pi}` against entrywise central differences of the
/// rates with the selection relaxed to a real matrix.
pub fn selection_gradient_error(network: &Network, iterate: &Iterate) -> Result<f64> {
    let state = LinkState::evaluate(network, iterate)?;
    let m = network.elements();
    let mut worst: f64 = 0.0;
    for q in 0..network.num_bs() {
        let own = gradient_s_own(q, &state, iterate, network).map(|z| z.re);
        let price = pricing_s(q, &state, iterate, network).map(|z| z.re);
        let mut fd_own = DMatrix::zeros(m, m);
        let mut fd_price = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                let eval = |delta: f64| -> Result<(f64, f64)> {
                    let mut sels = dense_selections(iterate);
                    sels[q][(a, b)] += delta;
                    Ok(split_cells(network, q, &dense_user_rates(network, &iterate.precoders, &iterate.capacitances, &sels)?))
                };
                let (po, pp) = eval(FD_STEP)?;
                let (mo, mp) = eval(-FD_STEP)?;
                fd_own[(a, b)] = (po - mo) / (2.0 * FD_STEP);
                fd_price[(a, b)] = (pp - mp) / (2.0 * FD_STEP);
            }
        }
        worst = worst
            .max(rel_err(own.as_slice(), fd_own.as_slice()))
            .max(rel_err(price.as_slice(), fd_price.as_slice()));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundReport {
    /// Most negative `log_term - surrogate` over the random samples.
    pub min_gap: f64,
    /// Largest `|log_term - surrogate|` at the anchor.
    pub tightness: f64,
    /// Largest relative gradient mismatch at the anchor.
    pub gradient: f64,
}

/// Minorizer checks for every user and subcarrier: lower bound at
/// `samples` random precoders, touching value and gradient at the anchor.
pub fn lower_bound_report(network: &Network, iterate: &Iterate, seed: u64, samples: usize) -> Result<LowerBoundReport> {
    let state = LinkState::evaluate(network, iterate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = network.antennas();
    let mut report = LowerBoundReport { min_gap: f64::INFINITY, tightness: 0.0, gradient: 0.0 };
    for user in 0..network.num_users() {
        let s = PrecoderSurrogate::build(user, &state, iterate, network, vec![CVec::zeros(n); network.subcarriers()]);
        for k in 0..network.subcarriers() {
            let anchor = &s.anchor[k];
            let scale = anchor.norm().max(1e-3);
            for _ in 0..samples {
                let w = CVec::from_fn(n, |_, _| {
                    Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * scale
                });
                report.min_gap = report.min_gap.min(s.log_term(k, &w) - s.log_term_surrogate(k, &w));
            }
            report.tightness = report.tightness.max((s.log_term(k, anchor) - s.log_term_surrogate(k, anchor)).abs());
            let mut g_true = CVec::zeros(n);
            let mut g_sur = CVec::zeros(n);
            for i in 0..n {
                for unit in [c(1.0), Complex64::new(0.0, 1.0)] {
                    let mut plus = anchor.clone();
                    plus[i] += unit * FD_STEP;
                    let mut minus = anchor.clone();
                    minus[i] -= unit * FD_STEP;
                    g_true[i] += unit * (0.5 * (s.log_term(k, &plus) - s.log_term(k, &minus)) / (2.0 * FD_STEP));
                    g_sur[i] += unit
                        * (0.5 * (s.log_term_surrogate(k, &plus) - s.log_term_surrogate(k, &minus)) / (2.0 * FD_STEP));
                }
            }
            let err = (&g_true - &g_sur).norm() / g_true.norm().max(1e-300);
            report.gradient = report.gradient.max(err);
        }
    }
    Ok(report)
}

/// Closed-form precoder solve against a dense Hermitian positive-definite
/// solve, over all users and subcarriers, relative error.
pub fn precoder_closed_form_error(network: &Network, iterate: &Iterate, tau: f64, lambda: f64) -> Result<f64> {
    let state = LinkState::evaluate(network, iterate)?;
    let n = network.antennas();
    let mut worst: f64 = 0.0;
    for user in 0..network.num_users() {
        let s = PrecoderSurrogate::build(user, &state, iterate, network, pricing_w(user, &state, network));
        let w = solve_precoder_given_lambda(&s, tau, lambda);
        for k in 0..network.subcarriers() {
            let f = &s.channel[k];
            let mat = f * f.adjoint() * c(s.a[k]) + DMatrix::identity(n, n) * c(0.5 * tau + lambda);
            let dense = mat
                .cholesky()
                .expect("regularized Gram matrix is positive definite")
                .solve(&s.linear_term(k, tau));
            worst = worst.max((&w[k] - &dense).norm() / dense.norm());
        }
    }
    Ok(worst)
}

/// Box-clamped capacitance update against the analytic per-coordinate
/// optimum (vertex of the parabola, or the nearer bound when it lies
/// outside), max absolute error over random draws.
pub fn clamp_error(seed: u64, samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (0.47, 2.35);
    (0..samples)
        .map(|_| {
            let tau = rng.random_range(0.1..2.0);
            let ct = rng.random_range(lo..hi);
            let g: f64 = rng.sample::<f64, _>(StandardNormal) * 3.0;
            let p: f64 = rng.sample::<f64, _>(StandardNormal);
            let got = update_capacitances(&[ct], &[g], &[p], tau, lo, hi)[0];
            // d/dx [-(tau/2)(x - ct)^2 + (g + p)(x - ct)] = 0
            let vertex = ct + (g + p) / tau;
            let expect = if vertex < lo {
                lo
            } else if vertex > hi {
                hi
            } else {
                vertex
            };
            (got - expect).abs()
        })
        .fold(0.0, f64::max)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut v = p.clone();
            v.insert(pos, n - 1);
            out.push(v);
        }
    }
    out
}

/// Number of random reward matrices (sizes 1..=6) on which the assignment
/// solve attains the enumerated optimum.
pub fn assignment_agreements(seed: u64, samples: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .filter(|i| {
            let m = 1 + i % 6;
            let w = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let score = |p: &[usize]| p.iter().enumerate().map(|(r, &col)| w[(r, col)]).sum::<f64>();
            let best = permutations(m).iter().map(|p| score(p)).fold(f64::NEG_INFINITY, f64::max);
            (score(&max_weight_assignment(&w)) - best).abs() <= 1e-12 * (1.0 + best.abs())
        })
        .count()
}

/// Gradient instance: `Q = 2`, `N = 2`, `M = 4`, `K = 4`, `L` users per BS.
pub fn gradient_instance(users_per_bs: usize, seed: u64) -> Result<(Network, Iterate)> {
    let network = InstanceSpec::new(2, users_per_bs, 2, 4, 4).network(seed)?;
    let iterate = random_iterate(&network, seed, 0.8);
    Ok((network, iterate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
    /// Worst observed error.
    pub worst: f64,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

/// Whole suite over `seeds` gradient instances per users-per-BS setting.
pub fn run_all(seeds: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut tally = |name: &'static str, errs: Vec<f64>, tol: f64| {
        checks.push(Check {
            name,
            passed: errs.iter().filter(|e| **e <= tol).count(),
            total: errs.len(),
            worst: errs.iter().copied().fold(0.0, f64::max),
        });
    };
    tally("reflection forms agree", vec![reflection_equivalence_error(1, 10_000)], 1e-10);
    tally("element derivative", (0..seeds).map(|s| element_derivative_error(s, 50)).collect(), 1e-4);

    let mut cap = Vec::new();
    let mut prec = Vec::new();
    let mut sel = Vec::new();
    let mut bound = Vec::new();
    let mut tight = Vec::new();
    let mut slope = Vec::new();
    let mut closed = Vec::new();
    for l in [1, 2] {
        for seed in 0..seeds {
            let (network, iterate) = gradient_instance(l, seed)?;
            cap.push(capacitance_gradient_error(&network, &iterate)?);
            prec.push(precoder_pricing_error(&network, &iterate)?);
            sel.push(selection_gradient_error(&network, &iterate)?);
            let r = lower_bound_report(&network, &iterate, seed, 100)?;
            bound.push((-r.min_gap).max(0.0));
            tight.push(r.tightness);
            slope.push(r.gradient);
            closed.push(precoder_closed_form_error(&network, &iterate, 0.8, 0.3)?);
        }
    }
    tally("capacitance gradient", cap, 1e-4);
    tally("precoder pricing", prec, 1e-4);
    tally("selection gradient", sel, 1e-4);
    tally("surrogate lower bound", bound, 1e-12);
    tally("surrogate tightness", tight, 1e-9);
    tally("surrogate gradient match", slope, 1e-6);
    tally("precoder closed form", closed, 1e-10);
    tally("capacitance clamp", vec![clamp_error(2, 1000)], 1e-12);
    let agree = assignment_agreements(3, 100);
    checks.push(Check { name: "assignment optimality", passed: agree, total: 100, worst: (100 - agree) as f64 });
    Ok(checks)
}
