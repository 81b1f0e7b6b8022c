//! Rank of a divisor, the order formula, and the Riemann-Roch check.
//!
//! Two exact strategies are implemented.
//!
//! * [`rank_by_superstables`]: every unwinnable class has a unique reduced form
//!   `c + t·1_{v₀}` with `c` superstable and `t < 0`. For a fixed `c` the
//!   largest admissible `t` follows from one reduction of `D − c`, so the rank
//!   costs two passes over the superstable configurations, whatever `deg D` is.
//! * [`rank_by_levels`]: explores the classes `[D − E]` in order of increasing
//!   `deg E`, keyed by reduced representative. Cheap when the rank is small
//!   relative to the quanta; gives a lower bound when the budget runs out.
//!
//! [`rank`] tries the first and falls back to the second.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::chip_firing::Board;
use crate::divisor::{nu_divisor, Divisor, TotalOrder};
use crate::graph::WeightedGraph;
use crate::rational::{self, Rational};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankStatus {
    Exact,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    /// exact rank, or a lower bound when the budget ran out
    pub rank: Rational,
    /// `rank / i_{(G,C)}`
    pub k: BigInt,
    pub obstruction: Option<Divisor>,
    pub tested_count: u64,
    pub status: RankStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrReport {
    pub rank_d: RankResult,
    pub rank_kd: RankResult,
    pub lhs: Rational,
    pub rhs: Rational,
    /// `None` when either rank is only a bound
    pub holds: Option<bool>,
}

fn scale(g: &WeightedGraph) -> Rational {
    Rational::from_integer(g.invariants().m_common.clone())
}

fn units_to_rational(g: &WeightedGraph, u: i128) -> Rational {
    Rational::new(BigInt::from(u), g.invariants().m_common.clone())
}

fn rank_from_units(g: &WeightedGraph, s: i128) -> (Rational, BigInt) {
    let r = units_to_rational(g, s) - &g.invariants().i_gcd;
    let k = rational::exact_quotient(&r, &g.invariants().i_gcd).expect("rank is a multiple of the global quantum");
    (r, k)
}

/// Effective divisors of degree exactly `s`. The budget bounds the number of
/// search nodes.
pub fn enumerate_effective(g: &WeightedGraph, s: &Rational, budget: u64) -> Result<Vec<Divisor>> {
    if *s < Rational::zero() || rational::exact_quotient(s, &g.invariants().i_gcd).is_none() {
        return Err(Error::Precondition("degree must be a nonnegative multiple of the global quantum".into()));
    }
    let sc = scale(g);
    let q: Vec<BigInt> = g.invariants().i.iter().map(|v| (v * &sc).to_integer()).collect();
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| q[b].cmp(&q[a]).then(a.cmp(&b)));
    let mut suffix_gcd = vec![BigInt::zero(); order.len() + 1];
    for k in (0..order.len()).rev() {
        suffix_gcd[k] = num_integer::Integer::gcd(&suffix_gcd[k + 1], &q[order[k]]);
    }
    let target = (s * &sc).to_integer();
    let mut out = Vec::new();
    let mut nodes = 0u64;
    let mut ell = vec![0i64; g.len()];

    #[allow(clippy::too_many_arguments)]
    fn go(
        k: usize,
        rest: BigInt,
        order: &[usize],
        q: &[BigInt],
        suffix_gcd: &[BigInt],
        ell: &mut Vec<i64>,
        out: &mut Vec<Divisor>,
        nodes: &mut u64,
        budget: u64,
    ) -> Result<()> {
        *nodes += 1;
        if *nodes > budget {
            return Err(Error::BudgetExceeded(budget));
        }
        if rest.is_zero() {
            out.push(Divisor::new(ell.clone()));
            return Ok(());
        }
        if k == order.len() || (&rest % &suffix_gcd[k]) != BigInt::zero() {
            return Ok(());
        }
        let x = order[k];
        let most = (&rest / &q[x]).to_i64().ok_or(Error::BudgetExceeded(budget))?;
        for c in (0..=most).rev() {
            ell[x] = c;
            go(k + 1, &rest - &q[x] * c, order, q, suffix_gcd, ell, out, nodes, budget)?;
        }
        ell[x] = 0;
        Ok(())
    }

    go(0, target, &order, &q, &suffix_gcd, &mut ell, &mut out, &mut nodes, budget)?;
    Ok(out)
}

/// `r(D)`. Each strategy may examine up to `budget` configurations.
pub fn rank(g: &WeightedGraph, d: &Divisor, v0: usize, budget: u64) -> Result<RankResult> {
    if v0 >= g.len() {
        return Err(Error::Invalid("base vertex out of range".into()));
    }
    match rank_by_superstables(g, d, budget) {
        Ok(r) => Ok(r),
        Err(Error::BudgetExceeded(_)) => {
            let mut r = rank_by_levels(g, d, v0, budget)?;
            r.tested_count += budget;
            Ok(r)
        }
        Err(e) => Err(e),
    }
}

/// Base vertex with the smallest quantum; it minimizes the number of
/// superstable configurations.
fn cheapest_base(g: &WeightedGraph) -> usize {
    let q = &g.invariants().i;
    (0..g.len()).min_by(|&a, &b| q[a].cmp(&q[b]).then(a.cmp(&b))).expect("nonempty graph")
}

/// Off-base configurations `c ≥ 0` (base entry 0) that burn completely.
pub fn superstables(board: &Board, budget: u64, count: &mut u64) -> Result<Vec<Vec<i128>>> {
    let mut out = Vec::new();
    for_each_superstable(board, budget, count, |c, _| {
        out.push(c.to_vec());
        Ok(())
    })?;
    Ok(out)
}

/// Visits every superstable configuration once; `count` is shared with the
/// visitor so both draw on one budget.
fn for_each_superstable(
    board: &Board,
    budget: u64,
    count: &mut u64,
    mut visit: impl FnMut(&[i128], &mut u64) -> Result<()>,
) -> Result<()> {
    let n = board.len();
    let b = board.base();
    let q = board.quanta();
    // every superstable is reached by raising coordinates in index order,
    // since the configuration set is closed downward
    let mut stack: Vec<(Vec<i128>, usize)> = vec![(vec![0; n], 0)];
    while let Some((c, from)) = stack.pop() {
        for x in from..n {
            if x == b {
                continue;
            }
            *count += 1;
            if *count > budget {
                return Err(Error::BudgetExceeded(budget));
            }
            let mut up = c.clone();
            up[x] += q[x];
            if board.burnt_set(&up).iter().all(|&z| z) {
                stack.push((up, x));
            }
        }
        visit(&c, count)?;
    }
    Ok(())
}

pub fn rank_by_superstables(g: &WeightedGraph, d: &Divisor, budget: u64) -> Result<RankResult> {
    let n = g.len();
    let b = cheapest_base(g);
    let board = Board::new(g, b)?;
    let q0 = board.quanta()[b];
    let dv = board.values(d);
    let deg: i128 = dv.iter().sum();
    if deg < 0 {
        return Ok(RankResult {
            rank: -g.invariants().i_gcd.clone(),
            k: BigInt::from(-1),
            obstruction: Some(Divisor::zero(n)),
            tested_count: 0,
            status: RankStatus::Exact,
        });
    }
    let mut count = 0u64;
    // best unwinnable X = c + t·1_b with [D − X] winnable, by degree
    let mut best: Option<(i128, Vec<i128>)> = None;
    for_each_superstable(&board, budget, &mut count, |c, count| {
        *count += 1;
        if *count > budget {
            return Err(Error::BudgetExceeded(budget));
        }
        let mut w: Vec<i128> = dv.iter().zip(c).map(|(a, z)| a - z).collect();
        board.reduce_values(&mut w, None);
        let lift = q0.max(-w[b]);
        let deg_x = c.iter().sum::<i128>() - lift;
        if best.as_ref().is_none_or(|(bd, _)| deg_x > *bd) {
            // E = red(D − c) + lift·1_b is effective and D − E ~ X
            w[b] += lift;
            best = Some((deg_x, w));
        }
        Ok(())
    })?;
    let (deg_x, e) = best.expect("the zero configuration is superstable");
    let (r, k) = rank_from_units(g, deg - deg_x);
    Ok(RankResult {
        rank: r,
        k,
        obstruction: Some(board.to_divisor(&e)),
        tested_count: count,
        status: RankStatus::Exact,
    })
}

/// `r(D)` by exhaustive obstruction search over linear-equivalence classes,
/// degree by degree.
pub fn rank_by_levels(g: &WeightedGraph, d: &Divisor, v0: usize, budget: u64) -> Result<RankResult> {
    if v0 >= g.len() {
        return Err(Error::Invalid("base vertex out of range".into()));
    }
    let board = Board::new(g, v0)?;
    let n = g.len();
    let q = board.quanta().to_vec();
    let start = board.values(d);
    let deg: i128 = start.iter().sum();
    let minus_one = |tested| RankResult {
        rank: -g.invariants().i_gcd.clone(),
        k: BigInt::from(-1),
        obstruction: Some(Divisor::zero(n)),
        tested_count: tested,
        status: RankStatus::Exact,
    };
    if deg < 0 {
        return Ok(minus_one(0));
    }

    // level s (in board units) -> classes (reduced values, E) reached at that degree
    let mut levels: BTreeMap<i128, Vec<(Vec<i128>, Vec<i64>)>> = BTreeMap::new();
    let mut seen: HashSet<Vec<i128>> = HashSet::new();
    let mut negative: Option<(i128, Vec<i64>)> = None;
    let mut tested = 0u64;

    let mut first = start;
    board.reduce_values(&mut first, None);
    seen.insert(first.clone());
    levels.insert(0, vec![(first, vec![0; n])]);

    while let Some((s, classes)) = levels.pop_first() {
        if let Some((sn, e)) = &negative {
            if *sn < s {
                let (r, k) = rank_from_units(g, *sn);
                return Ok(RankResult {
                    rank: r,
                    k,
                    obstruction: Some(Divisor::new(e.clone())),
                    tested_count: tested,
                    status: RankStatus::Exact,
                });
            }
        }
        for (v, e) in &classes {
            tested += 1;
            if tested > budget {
                let (r, k) = rank_from_units(g, s);
                return Ok(RankResult {
                    rank: r,
                    k,
                    obstruction: None,
                    tested_count: tested - 1,
                    status: RankStatus::BudgetExceeded,
                });
            }
            if v[v0] < 0 {
                let (r, k) = rank_from_units(g, s);
                if s == 0 {
                    return Ok(minus_one(tested));
                }
                return Ok(RankResult {
                    rank: r,
                    k,
                    obstruction: Some(Divisor::new(e.clone())),
                    tested_count: tested,
                    status: RankStatus::Exact,
                });
            }
        }
        for (v, e) in classes {
            for x in 0..n {
                let t = s + q[x];
                let mut e2 = e.clone();
                e2[x] += 1;
                if deg - t < 0 {
                    if negative.as_ref().is_none_or(|(sn, _)| t < *sn) {
                        negative = Some((t, e2));
                    }
                    continue;
                }
                let mut w = v.clone();
                w[x] -= q[x];
                board.reduce_values(&mut w, None);
                if seen.insert(w.clone()) {
                    levels.entry(t).or_default().push((w, e2));
                    // stored classes draw on the budget too
                    if seen.len() as u64 > budget {
                        let (r, k) = rank_from_units(g, s);
                        return Ok(RankResult {
                            rank: r,
                            k,
                            obstruction: None,
                            tested_count: tested,
                            status: RankStatus::BudgetExceeded,
                        });
                    }
                }
            }
        }
    }
    let (sn, e) = negative.expect("the search always ends at a negative degree");
    let (r, k) = rank_from_units(g, sn);
    Ok(RankResult {
        rank: r,
        k,
        obstruction: Some(Divisor::new(e)),
        tested_count: tested,
        status: RankStatus::Exact,
    })
}

/// Least `deg E'` over effective `E'` with `W + E'` winnable, in board units.
fn min_lift(board: &Board, w: &[i128], budget: u64, tested: &mut u64) -> Result<i128> {
    let n = board.len();
    let q = board.quanta();
    let mut first = w.to_vec();
    board.reduce_values(&mut first, None);
    let mut levels: BTreeMap<i128, Vec<Vec<i128>>> = BTreeMap::from([(0, vec![first.clone()])]);
    let mut seen: HashSet<Vec<i128>> = HashSet::from([first]);
    while let Some((s, classes)) = levels.pop_first() {
        for v in &classes {
            *tested += 1;
            if *tested > budget {
                return Err(Error::BudgetExceeded(budget));
            }
            if v[board.base()] >= 0 {
                return Ok(s);
            }
        }
        for v in classes {
            for x in 0..n {
                let mut u = v.clone();
                u[x] += q[x];
                board.reduce_values(&mut u, None);
                if seen.insert(u.clone()) {
                    levels.entry(s + q[x]).or_default().push(u);
                }
            }
        }
    }
    unreachable!("adding chips eventually makes every class winnable")
}

/// `min over orders O and D' ~ D of deg⁺(D' − ν_O)`, minus the global quantum.
pub fn rank_via_orders(g: &WeightedGraph, d: &Divisor, budget: u64) -> Result<Rational> {
    if g.len() > 6 {
        return Err(Error::SizeLimit("order enumeration needs at most 6 vertices".into()));
    }
    let values = order_values(g, d, &TotalOrder::all(g.len()), budget)?;
    let best = values.into_iter().min().expect("at least one order");
    Ok(best - &g.invariants().i_gcd)
}

/// For each order `O`, `min over D' ~ D of deg⁺(D' − ν_O)`.
pub fn order_values(g: &WeightedGraph, d: &Divisor, orders: &[TotalOrder], budget: u64) -> Result<Vec<Rational>> {
    let board = Board::new(g, g.base())?;
    let mut tested = 0u64;
    let mut cache: HashMap<Vec<i128>, i128> = HashMap::new();
    let mut out = Vec::with_capacity(orders.len());
    for order in orders {
        let w = board.values(&d.sub(&nu_divisor(g, order)));
        let deg_w: i128 = w.iter().sum();
        let mut key = w.clone();
        board.reduce_values(&mut key, None);
        let lift = match cache.get(&key) {
            Some(&l) => l,
            None => {
                let l = min_lift(&board, &w, budget, &mut tested)?;
                cache.insert(key, l);
                l
            }
        };
        out.push(units_to_rational(g, deg_w + lift));
    }
    Ok(out)
}

/// `r(D) − r(K − D)` against `deg D + 𝖊`.
pub fn rr_check(g: &WeightedGraph, d: &Divisor, v0: usize, budget: u64) -> Result<RrReport> {
    let k = Divisor::canonical(g)?;
    let rank_d = rank(g, d, v0, budget)?;
    let rank_kd = rank(g, &k.sub(d), v0, budget)?;
    let lhs = &rank_d.rank - &rank_kd.rank;
    let rhs = d.degree(g) + &g.invariants().euler;
    let exact = rank_d.status == RankStatus::Exact && rank_kd.status == RankStatus::Exact;
    let holds = exact.then(|| lhs == rhs);
    Ok(RrReport { rank_d, rank_kd, lhs, rhs, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chip_firing::{is_winnable, WinMode};
    use crate::graph::parse_graph;
    use crate::rational::{frac, int};

    fn ex1() -> WeightedGraph {
        parse_graph("base a\nedge a b 1/2\nedge b c 1/3").unwrap()
    }

    fn ray2() -> WeightedGraph {
        parse_graph("base v0\nedge v0 v1 1/2\nedge v1 v2 1/4").unwrap()
    }

    #[test]
    fn enumeration_examples() {
        let g = ex1();
        assert_eq!(enumerate_effective(&g, &frac(1, 6), 1000).unwrap(), vec![Divisor::new(vec![0, 1, 0])]);
        assert_eq!(enumerate_effective(&g, &int(0), 1000).unwrap(), vec![Divisor::zero(3)]);
        let mut two = enumerate_effective(&g, &frac(1, 3), 1000).unwrap();
        two.sort();
        assert_eq!(two, vec![Divisor::new(vec![0, 0, 1]), Divisor::new(vec![0, 2, 0])]);
        assert!(matches!(enumerate_effective(&g, &int(50), 10), Err(Error::BudgetExceeded(10))));
        assert!(enumerate_effective(&g, &frac(1, 7), 10).is_err());
    }

    #[test]
    fn rank_examples() {
        let g = ex1();
        let r = rank(&g, &Divisor::new(vec![0, 1, 0]), 0, 1000).unwrap();
        assert_eq!(r.rank, frac(1, 6));
        assert_eq!(r.k, BigInt::from(1));
        assert_eq!(r.status, RankStatus::Exact);
        assert_eq!(r.obstruction.unwrap().degree(&g), frac(1, 3));
        let neg = rank(&g, &Divisor::new(vec![0, -1, 0]), 0, 1000).unwrap();
        assert_eq!((neg.rank, neg.k), (frac(-1, 6), BigInt::from(-1)));
        let ray = ray2();
        let r = rank(&ray, &Divisor::new(vec![1, 0, 0]), 0, 1000).unwrap();
        assert_eq!(r.rank, frac(1, 2));
        assert_eq!(r.obstruction.unwrap().degree(&ray), frac(3, 4));
        // six nonzero effective E of degree at most 1/2, each leaving a winnable remainder
        let small: Vec<Divisor> = [1, 2]
            .iter()
            .flat_map(|&k| enumerate_effective(&ray, &frac(k, 4), 100).unwrap())
            .collect();
        assert_eq!(small.len(), 6);
        for e in small {
            assert!(is_winnable(&ray, &Divisor::new(vec![1, 0, 0]).sub(&e), 0, WinMode::Brute(6)).unwrap());
        }
    }

    #[test]
    fn budget_reports_lower_bound() {
        let g = ex1();
        let d = Divisor::new(vec![6, 0, 0]);
        let r = rank_by_levels(&g, &d, 0, 3).unwrap();
        assert_eq!(r.status, RankStatus::BudgetExceeded);
        assert!(r.obstruction.is_none());
        let full = rank(&g, &d, 0, 1_000_000).unwrap();
        assert!(r.rank <= full.rank);
        let k4 = parse_graph("base a\nedge a b 1\nedge a c 1\nedge a d 1\nedge b c 1\nedge b d 1\nedge c d 1").unwrap();
        let r = rank(&k4, &Divisor::new(vec![6, 0, 0, 0]), 0, 3).unwrap();
        assert_eq!(r.status, RankStatus::BudgetExceeded);
    }

    #[test]
    fn strategies_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let n = rng.gen_range(2..=4);
            let names = (0..n).map(|k| format!("v{k}")).collect();
            let mut edges = Vec::new();
            for x in 1..n {
                edges.push((rng.gen_range(0..x), x, frac(rng.gen_range(1..=4), rng.gen_range(1..=4))));
            }
            if n >= 3 && rng.gen_bool(0.5) {
                edges.push((0, n - 1, frac(rng.gen_range(1..=4), rng.gen_range(1..=4))));
                edges.retain(|e| e.0 != e.1);
                edges.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
            }
            let Ok(g) = WeightedGraph::new(names, edges, 0) else { continue };
            let d = Divisor::new((0..n).map(|_| rng.gen_range(-2..=3)).collect());
            let a = rank_by_superstables(&g, &d, 1_000_000).unwrap();
            let b = rank_by_levels(&g, &d, 0, 1_000_000).unwrap();
            assert_eq!(a.rank, b.rank);
            let e = a.obstruction.unwrap();
            assert!(e.is_effective());
            assert_eq!(e.degree(&g), &a.rank + &g.invariants().i_gcd);
            assert!(!is_winnable(&g, &d.sub(&e), 0, WinMode::Reduced).unwrap());
        }
    }

    #[test]
    fn orders_examples() {
        let g = ex1();
        assert_eq!(rank_via_orders(&g, &Divisor::new(vec![0, 1, 0]), 10_000).unwrap(), frac(1, 6));
        for o in TotalOrder::all(3) {
            let nu = nu_divisor(&g, &o);
            assert_eq!(rank_via_orders(&g, &nu, 10_000).unwrap(), frac(-1, 6));
            assert_eq!(rank(&g, &nu, 0, 10_000).unwrap().rank, frac(-1, 6));
        }
        assert_eq!(rank_via_orders(&g, &Divisor::zero(3), 10_000).unwrap(), int(0));
    }

    #[test]
    fn rr_examples() {
        let g = ex1();
        let rep = rr_check(&g, &Divisor::new(vec![0, 1, 0]), 0, 10_000).unwrap();
        assert_eq!(rep.rank_d.rank, frac(1, 6));
        assert_eq!(rep.rank_kd.rank, frac(-1, 6));
        assert_eq!(rep.lhs, frac(1, 3));
        assert_eq!(rep.holds, Some(true));
        let two = parse_graph("base a\nedge a b 1/2").unwrap();
        let rep = rr_check(&two, &Divisor::new(vec![1, 0]), 0, 10_000).unwrap();
        assert_eq!((rep.rank_d.rank.clone(), rep.rank_kd.rank.clone()), (frac(1, 2), frac(-1, 2)));
        assert_eq!(rep.lhs, int(1));
        assert_eq!(rep.holds, Some(true));
    }
}
