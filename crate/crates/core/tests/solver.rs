use bdris::instances::{random_iterate, InstanceSpec};
use bdris::rates::{Iterate, LinkState};
use bdris::solver::{
    local_subproblem, run, run_observed, step, Candidate, Coordination, RisMode, SolverConfig, Variant,
};
use bdris::Network;

fn desk(seed: u64) -> Network {
    InstanceSpec::new(2, 1, 2, 8, 8).network(seed).unwrap()
}

/// Water-filling over per-subcarrier gains `g_k`: the optimum of
/// `sum_k log2(1 + g_k p_k)` with `sum_k p_k = P`.
fn water_filling_rate(gains: &[f64], budget: f64) -> f64 {
    let mut sorted: Vec<f64> = gains.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // largest active set whose water level clears every 1/g
    let mut level = 0.0;
    for n in (1..=sorted.len()).rev() {
        let mu = (budget + sorted[..n].iter().map(|g| 1.0 / g).sum::<f64>()) / n as f64;
        if mu > 1.0 / sorted[n - 1] {
            level = mu;
            break;
        }
    }
    gains.iter().map(|g| (1.0 + g * (level - 1.0 / g).max(0.0)).log2()).sum()
}

#[test]
fn single_link_reaches_water_filling() {
    let variant = Variant::new(RisMode::Absent, Coordination::Cooperative);
    for seed in 0..10 {
        for power in [0.1, 1.0, 10.0] {
            let network = InstanceSpec::new(1, 1, 2, 4, 4).with_power(power).network(seed).unwrap();
            let gains: Vec<f64> = (0..4)
                .map(|k| network.channels().direct(0, 0, k).norm_squared() / network.noise_power())
                .collect();
            let oracle = water_filling_rate(&gains, power) / 4.0;
            let config = SolverConfig { tolerance: 1e-9, max_iterations: 2000, ..SolverConfig::default() }
                .with_variant(variant);
            let out = run(&network, &config).unwrap();
            assert!(out.best_sum_rate <= oracle + 1e-9, "seed {seed}: {} > {oracle}", out.best_sum_rate);
            assert!(out.best_sum_rate >= oracle - 1e-5, "seed {seed} P {power}: {} vs {oracle}", out.best_sum_rate);
        }
    }
}

#[test]
fn water_filling_oracle_sanity() {
    // equal gains split evenly; a dead subcarrier gets nothing
    assert!((water_filling_rate(&[1.0, 1.0], 2.0) - 2.0).abs() < 1e-12);
    assert!((water_filling_rate(&[4.0, 1e-9], 1.0) - 5f64.log2()).abs() < 1e-12);
}

#[test]
fn step_endpoints() {
    let network = desk(1);
    let iterate = Iterate::initial(&network);
    let state = LinkState::evaluate(&network, &iterate).unwrap();
    let config = SolverConfig::default();
    let cands: Vec<Candidate> =
        (0..2).map(|q| local_subproblem(q, &state, &iterate, &network, &config, 0).unwrap()).collect();

    let mut no_swap = cands.clone();
    no_swap.iter_mut().for_each(|c| c.selection = None);
    assert_eq!(step(&iterate, &no_swap, 0.0, &network).unwrap(), iterate);

    let full = step(&iterate, &cands, 1.0, &network).unwrap();
    for c in &cands {
        for (l, w) in network.cell_users(c.bs).zip(&c.precoders) {
            for (a, b) in full.precoders[l].iter().zip(w) {
                assert!((a - b).norm() <= 1e-15 * b.norm().max(1.0));
            }
        }
        assert_eq!(&full.capacitances[c.bs], c.capacitances.as_ref().unwrap());
    }
    assert!(step(&iterate, &cands, 1.5, &network).is_err());
}

#[test]
fn blended_steps_stay_feasible() {
    let config = SolverConfig::default();
    for seed in 0..20 {
        let network = desk(seed);
        let iterate = random_iterate(&network, seed, 1.0);
        let state = LinkState::evaluate(&network, &iterate).unwrap();
        let cands: Vec<Candidate> =
            (0..2).map(|q| local_subproblem(q, &state, &iterate, &network, &config, 0).unwrap()).collect();
        for i in 0..=10 {
            let next = step(&iterate, &cands, i as f64 / 10.0, &network).unwrap();
            next.check_feasible(&network, 1e-8).unwrap();
        }
    }
}

#[test]
fn stationary_point_is_fixed() {
    // one BS, one antenna, one subcarrier, no surface: the matched filter at
    // full power is optimal and the proximal solve returns it
    let network = InstanceSpec::new(1, 1, 1, 2, 1).network(5).unwrap().without_ris();
    let iterate = Iterate::initial(&network);
    let state = LinkState::evaluate(&network, &iterate).unwrap();
    let cand = local_subproblem(0, &state, &iterate, &network, &SolverConfig::default(), 0).unwrap();
    assert!((&cand.precoders[0][0] - &iterate.precoders[0][0]).norm() <= 1e-7 * iterate.precoders[0][0].norm());
    assert!(cand.capacitances.is_none() && cand.selection.is_none());
}

#[test]
fn noncooperative_ignores_prices() {
    let network = desk(2);
    let iterate = random_iterate(&network, 2, 0.7);
    let state = LinkState::evaluate(&network, &iterate).unwrap();
    let nc = SolverConfig::default().with_variant(Variant::new(RisMode::BeyondDiagonal, Coordination::NonCooperative));
    let c = SolverConfig::default();
    let a = local_subproblem(0, &state, &iterate, &network, &nc, 0).unwrap();
    let b = local_subproblem(0, &state, &iterate, &network, &c, 0).unwrap();
    assert_ne!(a.precoders, b.precoders);

    // with the other cell silent the prices vanish and both coincide
    let mut quiet = iterate.clone();
    quiet.precoders[1].iter_mut().for_each(|w| w.fill(num_complex::Complex64::new(0.0, 0.0)));
    let state = LinkState::evaluate(&network, &quiet).unwrap();
    let a = local_subproblem(1, &state, &quiet, &network, &nc, 0).unwrap();
    let b = local_subproblem(1, &state, &quiet, &network, &c, 0).unwrap();
    assert_eq!(a.precoders, b.precoders);
    assert_eq!(a.capacitances, b.capacitances);
}

#[test]
fn diagonal_variant_keeps_identity() {
    let variant = Variant::new(RisMode::Diagonal, Coordination::Cooperative);
    for seed in 0..5 {
        let network = desk(seed);
        run_observed(&network, Iterate::initial(&network), &SolverConfig::default().with_variant(variant), |_, it| {
            assert!(it.selections.iter().all(|s| s.is_identity()));
        })
        .unwrap();
    }
}

#[test]
fn beyond_diagonal_moves_switches_on_desk_instances() {
    let moved = (0..10)
        .filter(|&seed| {
            let out = run(&desk(seed), &SolverConfig::default()).unwrap();
            out.best.selections.iter().any(|s| !s.is_identity())
        })
        .count();
    assert!(moved > 0);
}

#[test]
fn switch_hold_delays_selection_changes() {
    let network = desk(3);
    let config = SolverConfig { switch_hold_iterations: 5, ..SolverConfig::default() };
    run_observed(&network, Iterate::initial(&network), &config, |t, it| {
        if t <= 5 {
            assert!(it.selections.iter().all(|s| s.is_identity()), "changed at {t}");
        }
    })
    .unwrap();
}

#[test]
fn without_surfaces_only_precoders_change() {
    let network = desk(4);
    let config = SolverConfig::default().with_variant(Variant::new(RisMode::Absent, Coordination::Cooperative));
    let out = run(&network, &config).unwrap();
    let init = Iterate::initial(&network);
    assert_eq!(out.best.capacitances, init.capacitances);
    assert_eq!(out.best.selections, init.selections);
}

#[test]
fn trace_is_consistent() {
    let network = desk(6);
    let out = run(&network, &SolverConfig::default()).unwrap();
    assert_eq!(out.trace.len(), out.iterations());
    assert!(out.trace.records.iter().enumerate().all(|(i, r)| r.iteration == i + 1));
    let best = out.trace.sum_rates().into_iter().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best, out.best_sum_rate);
    assert_eq!(LinkState::evaluate(&network, &out.best).unwrap().sum_rate(), out.best_sum_rate);
    let mut a = Vec::new();
    let mut b = Vec::new();
    out.trace.write_csv(&mut a, 2).unwrap();
    run(&network, &SolverConfig::default()).unwrap().trace.write_csv(&mut b, 2).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("iteration,sum_rate,alpha,slack_bs0,slack_bs1\n"));
}

#[test]
fn unguarded_run_still_returns_best_so_far() {
    let config = SolverConfig { max_backtracks: 0, max_iterations: 60, ..SolverConfig::default() };
    for seed in 0..5 {
        let out = run(&desk(seed), &config).unwrap();
        assert!(out.best_sum_rate >= out.trace.initial_sum_rate);
    }
}

#[test]
fn invalid_config_fails_with_empty_trace() {
    let err = run(&desk(0), &SolverConfig { tau: -1.0, ..SolverConfig::default() }).unwrap_err();
    assert!(err.trace.is_empty());
}
