use bdris::assignment::max_weight_assignment;
use bdris::capacitance::{subproblem_objective, update_capacitances};
use bdris::circuit::{reflection_direct, reflection_reformulated, ElementCircuit};
use bdris::instances::{random_iterate, InstanceSpec};
use bdris::precoding::{bisect_power_multiplier, BisectionOptions, PrecoderSurrogate};
use bdris::rates::LinkState;
use bdris::Selection;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for i in 0..m {
            let mut q = p.clone();
            q.insert(i, m - 1);
            out.push(q);
        }
    }
    out
}

fn score(w: &DMatrix<f64>, cols: &[usize]) -> f64 {
    cols.iter().enumerate().map(|(i, &j)| w[(i, j)]).sum()
}

fn square(max: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max).prop_flat_map(|m| {
        prop::collection::vec(-100.0..100.0f64, m * m).prop_map(move |v| DMatrix::from_vec(m, m, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn reflection_is_passive_and_forms_agree(f in 3.0e9..4.0e9f64, t in 0.0..=1.0f64) {
        let circuit = ElementCircuit::default();
        let c = circuit.c_min + t * (circuit.c_max - circuit.c_min);
        let a = reflection_direct(f, c, &circuit).unwrap();
        let b = reflection_reformulated(f, c, &circuit).unwrap();
        prop_assert!(a.norm() <= 1.0 + 1e-12);
        prop_assert!((a - b).norm() <= 1e-12);
    }

    #[test]
    fn assignment_matches_enumeration(w in square(6)) {
        let cols = max_weight_assignment(&w);
        let best = permutations(w.ncols()).iter().map(|p| score(&w, p)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((score(&w, &cols) - best).abs() <= 1e-9 * best.abs().max(1.0));
        let sel = Selection::from_columns(cols).unwrap();
        let s = sel.to_matrix();
        // exactly one unit entry per row and column
        for i in 0..s.nrows() {
            prop_assert_eq!(s.row(i).sum(), 1.0);
            prop_assert_eq!(s.column(i).sum(), 1.0);
        }
        prop_assert_eq!(Selection::from_matrix(&s).unwrap(), sel);
    }

    #[test]
    fn clamp_solves_box_subproblem(
        c in prop::collection::vec(0.47..2.35f64, 1..8),
        g in -5.0..5.0f64,
        p in -5.0..5.0f64,
        tau in 0.1..4.0f64,
    ) {
        let n = c.len();
        let gamma = vec![g; n];
        let price = vec![p; n];
        let next = update_capacitances(&c, &gamma, &price, tau, 0.47, 2.35);
        let at = subproblem_objective(&next, &c, &gamma, &price, tau);
        for probe in [0.47, 1.0, 1.7, 2.35] {
            let other = vec![probe; n];
            prop_assert!(at >= subproblem_objective(&other, &c, &gamma, &price, tau) - 1e-12);
        }
        prop_assert!(next.iter().all(|x| (0.47..=2.35).contains(x)));
    }

    #[test]
    fn bisection_respects_budget(seed in 0u64..500, budget in 0.01..100.0f64, tau in 0.1..3.0f64) {
        let network = InstanceSpec::new(2, 2, 2, 4, 4).network(seed).unwrap();
        let iterate = random_iterate(&network, seed, 1.0);
        let state = LinkState::evaluate(&network, &iterate).unwrap();
        let surrogates: Vec<_> = network
            .cell_users(0)
            .map(|u| PrecoderSurrogate::build(u, &state, &iterate, &network, bdris::precoding::pricing_w(u, &state, &network)))
            .collect();
        let sol = bisect_power_multiplier(&surrogates, tau, budget, &BisectionOptions::default()).unwrap();
        prop_assert!(sol.power <= budget * (1.0 + 1e-8));
        if sol.lambda > 0.0 {
            prop_assert!(sol.power >= budget * (1.0 - 1e-6));
        }
    }
}
