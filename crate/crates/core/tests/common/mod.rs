#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrgraph::rational::frac;
use rrgraph::{Divisor, WeightedGraph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn weight<R: Rng>(rng: &mut R, pmax: i64, qmax: i64) -> rrgraph::Rational {
    frac(rng.gen_range(1..=pmax), rng.gen_range(1..=qmax))
}

/// Random spanning tree on `n` vertices plus up to `extra` chords.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, extra: usize, pmax: i64, qmax: i64) -> WeightedGraph {
    let names = (0..n).map(|k| format!("v{k}")).collect();
    let mut edges: Vec<(usize, usize, rrgraph::Rational)> = Vec::new();
    for x in 1..n {
        let y = rng.gen_range(0..x);
        edges.push((y, x, weight(rng, pmax, qmax)));
    }
    let chords = rng.gen_range(0..=extra);
    for _ in 0..chords * 4 {
        if edges.len() >= n - 1 + chords {
            break;
        }
        let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if x == y || edges.iter().any(|(a, b, _)| (*a == x && *b == y) || (*a == y && *b == x)) {
            continue;
        }
        edges.push((x.min(y), x.max(y), weight(rng, pmax, qmax)));
    }
    WeightedGraph::new(names, edges, 0).unwrap()
}

pub fn random_divisor<R: Rng>(rng: &mut R, n: usize, bound: i64) -> Divisor {
    Divisor::new((0..n).map(|_| rng.gen_range(-bound..=bound)).collect())
}

/// All connected graphs on 2..=4 vertices up to isomorphism, as edge lists.
pub fn small_shapes() -> Vec<(usize, Vec<(usize, usize)>)> {
    vec![
        (2, vec![(0, 1)]),
        (3, vec![(0, 1), (1, 2)]),
        (3, vec![(0, 1), (1, 2), (0, 2)]),
        (4, vec![(0, 1), (1, 2), (2, 3)]),
        (4, vec![(0, 1), (0, 2), (0, 3)]),
        (4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]),
        (4, vec![(0, 1), (1, 2), (2, 0), (0, 3)]),
        (4, vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]),
        (4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
    ]
}

pub fn weighted_shape<R: Rng>(rng: &mut R, n: usize, shape: &[(usize, usize)], pmax: i64, qmax: i64) -> WeightedGraph {
    let names = (0..n).map(|k| format!("v{k}")).collect();
    let edges = shape.iter().map(|&(a, b)| (a, b, weight(rng, pmax, qmax))).collect();
    WeightedGraph::new(names, edges, 0).unwrap()
}
