use metastable_core::chain::{
    capacity, equilibrium_potential, heuristic_mean_time, invariant_measure, mean_hitting_time,
    mean_jump_rate, reversible_capacity_identity, trace_generator, Generator, MetastablePartition,
};
use metastable_core::landscape::{
    classify_critical_point, gradient_flow, CriticalKind, PotentialSpec,
};
use metastable_core::poisson::{poisson_residual, solve_reduction, ReductionSpec};
use proptest::prelude::*;

fn families() -> Vec<PotentialSpec> {
    vec![
        PotentialSpec::standard_quartic(),
        PotentialSpec::quartic(2.0, 0.5).unwrap(),
        PotentialSpec::separable(1.0, 1.0, vec![2.0]).unwrap(),
        PotentialSpec::separable(0.5, 2.0, vec![1.0, 3.0]).unwrap(),
        PotentialSpec::multiwell(1.0, 1.0, 2).unwrap(),
        PotentialSpec::multiwell(1.0, 1.0, 3).unwrap(),
    ]
}

fn central_difference(spec: &PotentialSpec, x: &[f64]) -> Vec<f64> {
    let h = 1e-5;
    (0..x.len())
        .map(|k| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[k] += h;
            down[k] -= h;
            (spec.value(&up).unwrap() - spec.value(&down).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Coordinates bounded away from zero: starts on a saddle's stable
/// manifold (some coordinate exactly 0) flow to that saddle.
fn generic_coordinate() -> impl Strategy<Value = f64> {
    (0.01f64..2.0, any::<bool>()).prop_map(|(m, s)| if s { m } else { -m })
}

/// Reversible chain from weights and a full symmetric conductance table.
fn reversible_chain() -> impl Strategy<Value = Generator> {
    (3usize..=8).prop_flat_map(|n| {
        (
            prop::collection::vec(0.05f64..1.0, n),
            prop::collection::vec(0.01f64..1.0, n * n),
        )
            .prop_map(move |(w, c)| {
                let cond: Vec<Vec<f64>> = (0..n)
                    .map(|x| (0..n).map(|y| c[x.min(y) * n + x.max(y)]).collect())
                    .collect();
                Generator::reversible(&w, &cond).unwrap()
            })
    })
}

/// Chain together with a partition into `k` wells; each state is assigned
/// to a well or to `Delta` by `slots`, and the first `k` states seed the wells.
fn chain_with_partition(k: usize) -> impl Strategy<Value = (Generator, MetastablePartition)> {
    reversible_chain()
        .prop_flat_map(move |g| {
            let n = g.n_states();
            (Just(g), prop::collection::vec(0..k + 1, n), Just(n))
        })
        .prop_filter("need at least k states", move |(_, _, n)| *n >= k)
        .prop_map(move |(g, slots, n)| {
            let mut wells = vec![Vec::new(); k];
            for x in 0..n {
                let slot = if x < k { x } else { slots[x] };
                if slot < k {
                    wells[slot].push(x);
                }
            }
            (g, MetastablePartition::new(n, wells).unwrap())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gradient_matches_finite_differences(
        family in 0usize..6,
        coords in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let spec = &families()[family];
        let x = &coords[..spec.dim()];
        let g = spec.grad(x).unwrap();
        let fd = central_difference(spec, x);
        let scale = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        for (a, b) in g.iter().zip(&fd) {
            prop_assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b} at {x:?}");
        }
    }

    #[test]
    fn gradient_flow_ends_at_a_minimum(
        family in 0usize..6,
        coords in prop::collection::vec(generic_coordinate(), 3),
    ) {
        let spec = &families()[family];
        let x = &coords[..spec.dim()];
        let end = gradient_flow(spec, x, 1e-2, 1e-10, 1_000_000).unwrap();
        let cp = classify_critical_point(spec, &end.point).unwrap();
        prop_assert_eq!(cp.kind, CriticalKind::Minimum);
    }

    #[test]
    fn capacity_is_symmetric_and_nonnegative((g, p) in chain_with_partition(2)) {
        let mu = invariant_measure(&g).unwrap();
        let (a, b) = (p.well(0), p.well(1));
        let ab = capacity(&g, &mu, a, b).unwrap();
        let ba = capacity(&g, &mu, b, a).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1e-300).max(1.0));
        for h in equilibrium_potential(&g, a, b).unwrap() {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&h));
        }
    }

    #[test]
    fn two_state_heuristic_is_exact(a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let g = Generator::two_state(a, b).unwrap();
        let mu = invariant_measure(&g).unwrap();
        let cap = capacity(&g, &mu, &[0], &[1]).unwrap();
        let heuristic = heuristic_mean_time(&mu, cap, &[0]).unwrap();
        let exact = mean_hitting_time(&g, 0, &[1]).unwrap();
        prop_assert!((heuristic - exact).abs() <= 1e-12 * exact.max(1.0));
    }

    #[test]
    fn capacity_identity_gives_well_flow(
        (g, p) in prop_oneof![chain_with_partition(2), chain_with_partition(3)],
        pick in 0usize..6,
    ) {
        let mu = invariant_measure(&g).unwrap();
        let k = p.n_wells();
        let i = pick % k;
        let j = (i + 1 + pick / k % (k - 1)) % k;
        let flow = mu.mass(p.well(i)) * mean_jump_rate(&g, &mu, &p, i, j).unwrap();
        let identity = reversible_capacity_identity(&g, &mu, &p, i, j).unwrap();
        prop_assert!((flow - identity).abs() <= 1e-10, "{flow} vs {identity}");
    }

    #[test]
    fn trace_generator_is_a_generator((g, p) in chain_with_partition(2)) {
        let t = trace_generator(&g, &p.union()).unwrap();
        let m = t.matrix();
        for x in 0..m.nrows() {
            prop_assert!(m.row(x).sum().abs() <= 1e-12);
            for y in 0..m.ncols() {
                if x != y {
                    prop_assert!(m[(x, y)] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn poisson_residual_is_gauge_invariant(q in 0.01f64..0.5, shift in -100.0f64..100.0) {
        let g = Generator::symmetric_three_well(q).unwrap();
        let mu = invariant_measure(&g).unwrap();
        let spec = ReductionSpec::symmetric_three_well(q).unwrap();
        let sol = solve_reduction(&g, &mu, &spec).unwrap();
        let r0 = poisson_residual(&g, &sol.psi, &sol.rhs.values).unwrap();
        let moved: Vec<f64> = sol.psi.iter().map(|v| v + shift).collect();
        let r1 = poisson_residual(&g, &moved, &sol.rhs.values).unwrap();
        // applying the generator to psi + shift rounds at the scale of the shift
        prop_assert!((r1 - r0).abs() <= 16.0 * f64::EPSILON * (1.0 + shift.abs()), "{r0} vs {r1}");
    }
}
