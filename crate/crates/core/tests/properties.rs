mod common;

use proptest::prelude::*;
use rand::Rng;

use rrgraph::chip_firing::is_reduced_by_subsets;
use rrgraph::exhaustion::{build_ball, InfiniteFamily};
use rrgraph::rational::{frac, int};
use rrgraph::spectral::{apply_l, dirichlet_energy, resolvent_solve};
use rrgraph::{
    apply_firing, nu_divisor, parse_graph, rank, reduce_divisor, rr_check, Divisor, RankStatus, Rational,
    TotalOrder, WeightedGraph,
};

fn graph_and_divisor(seed: u64, max_n: usize, bound: i64) -> (WeightedGraph, Divisor) {
    let mut rng = common::rng(seed);
    let n = rng.gen_range(2..=max_n);
    let g = common::random_graph(&mut rng, n, 2, 4, 4);
    let d = common::random_divisor(&mut rng, n, bound);
    (g, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduction_is_a_reduced_representative(seed in any::<u64>(), base in 0usize..6) {
        let (g, d) = graph_and_divisor(seed, 6, 5);
        let v0 = base % g.len();
        let r = reduce_divisor(&g, &d, v0).unwrap();
        prop_assert!(is_reduced_by_subsets(&g, &r.reduced, v0));
        prop_assert_eq!(apply_firing(&g, &d, &r.firing), r.reduced.clone());
        prop_assert_eq!(r.reduced.degree(&g), d.degree(&g));
    }

    #[test]
    fn equivalent_inputs_share_a_reduced_form(seed in any::<u64>(), f in prop::collection::vec(-3i64..=3, 6)) {
        let (g, d) = graph_and_divisor(seed, 6, 3);
        let firing = rrgraph::FiringFunction { f: f[..g.len()].to_vec() };
        let moved = apply_firing(&g, &d, &firing);
        let a = reduce_divisor(&g, &d, 0).unwrap().reduced;
        let b = reduce_divisor(&g, &moved, 0).unwrap().reduced;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn riemann_roch_holds(seed in any::<u64>()) {
        let (g, d) = graph_and_divisor(seed, 5, 3);
        let rr = rr_check(&g, &d, 0, 1_000_000).unwrap();
        prop_assert_eq!(rr.holds, Some(true), "lhs {} rhs {}", rr.lhs, rr.rhs);
    }

    #[test]
    fn nu_divisors_are_unwinnable_with_dual_reverse(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(2..=5);
        let g = common::random_graph(&mut rng, n, 2, 4, 4);
        let o = TotalOrder::random(n, &mut rng);
        let nu = nu_divisor(&g, &o);
        prop_assert_eq!(nu.degree(&g), -g.invariants().euler.clone());
        let k = Divisor::canonical(&g).unwrap();
        prop_assert_eq!(nu_divisor(&g, &o.reverse()), k.sub(&nu));
        let r = rank(&g, &nu, 0, 1_000_000).unwrap();
        prop_assert_eq!(r.status, RankStatus::Exact);
        prop_assert_eq!(r.rank, -g.invariants().i_gcd.clone());
    }

    #[test]
    fn rank_grows_by_at_most_the_added_degree(seed in any::<u64>(), x in 0usize..5) {
        let (g, d) = graph_and_divisor(seed, 5, 2);
        let x = x % g.len();
        let e = Divisor::atom(g.len(), x);
        let r = rank(&g, &d, 0, 1_000_000).unwrap().rank;
        let r2 = rank(&g, &d.add(&e), 0, 1_000_000).unwrap().rank;
        prop_assert!(r2 >= r);
        prop_assert!(r2 <= &r + &g.invariants().i[x]);
    }

    #[test]
    fn resolvent_is_exact(seed in any::<u64>(), vals in prop::collection::vec((-5i64..=5, 1i64..=4), 6)) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(2..=6);
        let g = common::random_graph(&mut rng, n, 2, 4, 4);
        let mut rhs: Vec<Rational> = vals[..n].iter().map(|&(p, q)| frac(p, q)).collect();
        let mean: Rational = g.invariants().mu.iter().zip(&rhs).map(|(m, v)| m * v).sum();
        rhs.iter_mut().for_each(|v| *v -= &mean);
        let u = resolvent_solve(&g, &rhs).unwrap();
        prop_assert_eq!(apply_l(&g, &u), rhs);
    }

    #[test]
    fn energy_is_shift_invariant(seed in any::<u64>(), c in -4i64..=4) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(2..=6);
        let g = common::random_graph(&mut rng, n, 2, 4, 4);
        let f: Vec<Rational> = (0..n).map(|_| int(rng.gen_range(-3..=3))).collect();
        let shifted: Vec<Rational> = f.iter().map(|v| v + int(c)).collect();
        prop_assert_eq!(dirichlet_energy(&g, &f, None), dirichlet_energy(&g, &shifted, None));
    }
}

#[test]
fn ball_masses_grow_with_radius() {
    for family in [InfiniteFamily::ray_double_exp(), InfiniteFamily::tree_double_exp()] {
        let mut last = int(0);
        for n in 1..=4 {
            let ball = build_ball(&family, n).unwrap();
            let mass = ball.graph.invariants().total_mass.clone();
            assert!(mass > last, "{} at radius {n}", family.name());
            last = mass;
            let (lo, hi) = family.tail_mass_bounds(n).unwrap();
            assert!(lo <= hi && lo >= int(0));
        }
    }
}

#[test]
fn text_round_trip() {
    let g = parse_graph("base b\nedge a b 1/2\nedge b c 1/3\nedge a c 2").unwrap();
    let again = parse_graph(&g.to_text()).unwrap();
    assert_eq!(g.invariants(), again.invariants());
    assert_eq!(g.names(), again.names());
    assert_eq!(g.base(), again.base());
}
