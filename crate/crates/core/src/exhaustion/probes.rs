use std::collections::HashMap;

use num_traits::{Signed, Zero};

use super::{build_ball, Exploration, FamilyDivisor, InfiniteFamily};
use crate::divisor::{nu_divisor, TotalOrder};
use crate::rank::{order_values, rank};
use crate::rational::{self, Rational};
use crate::spectral::{energy_f64, spectral_gap};
use crate::{Error, Result};

const MAX_ORDER_VERTICES: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderConsistencyReport {
    pub n_small: usize,
    /// `N(ε)`
    pub tail_radius: usize,
    /// bounds on `m(V∖V_N)`
    pub tail_mass: (Rational, Rational),
    pub order_count: usize,
    /// `min over D' ~ D of deg⁺(D' − ν_O)`, one entry per order
    pub order_values: Vec<Rational>,
    pub unrestricted_min: Rational,
    pub rank: Rational,
    /// `unrestricted_min = rank + i`
    pub min_matches_rank: bool,
    /// distinct order pairs whose restrictions to `V_N` agree
    pub pairs_checked: usize,
    /// largest `deg⁺(ν_O − ν_O′) + deg⁻(ν_O − ν_O′)` over those pairs
    pub max_nu_difference: Rational,
    /// weight from `S_N` to `V_N^c`
    pub shell_outflow: Rational,
    /// `max difference < m(V_N^c)`; `None` when the tail bounds straddle it
    pub literal_bound: Option<bool>,
    /// `max difference ≤ m(V_N^c) + m₊(S_N)`, checked against the lower tail bound
    pub corrected_bound: bool,
}

/// Orders on a small ball: per-order minimization against the rank, and
/// the `ν_O` difference for order pairs agreeing on `V_{N(ε)}`.
pub fn order_consistency_probe(
    family: &InfiniteFamily,
    n_small: usize,
    eps: &Rational,
    d: &FamilyDivisor,
    budget: u64,
) -> Result<OrderConsistencyReport> {
    if n_small == 0 || n_small > 3 {
        return Err(Error::Precondition("small ball radius must lie in 1..=3".into()));
    }
    let tail_radius = family.tail_radius(eps)?;
    let tail_mass = family.tail_mass_bounds(tail_radius)?;
    let ball = build_ball(family, n_small)?;
    let g = &ball.graph;
    if g.len() > MAX_ORDER_VERTICES {
        return Err(Error::SizeLimit(format!("order enumeration needs at most {MAX_ORDER_VERTICES} vertices")));
    }
    let dd = d.on_graph(g)?;
    let orders = TotalOrder::all(g.len());
    let values = order_values(g, &dd, &orders, budget)?;
    let unrestricted_min = values.iter().min().expect("at least one order").clone();
    let r = rank(g, &dd, 0, budget)?.rank;
    let min_matches_rank = unrestricted_min == &r + &g.invariants().i_gcd;

    let inner: Vec<usize> = (0..g.len()).filter(|&x| ball.dist[x] <= tail_radius).collect();
    let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for (k, o) in orders.iter().enumerate() {
        let key: Vec<usize> = o.as_slice().iter().copied().filter(|x| inner.contains(x)).collect();
        groups.entry(key).or_default().push(k);
    }
    let nus: Vec<Vec<Rational>> = orders.iter().map(|o| nu_divisor(g, o).values(g)).collect();
    let mut pairs_checked = 0;
    let mut max_nu_difference = Rational::zero();
    for members in groups.values() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let diff: Rational = nus[i].iter().zip(&nus[j]).map(|(p, q)| (p - q).abs()).sum();
                max_nu_difference = max_nu_difference.max(diff);
                pairs_checked += 1;
            }
        }
    }
    let ex = Exploration::new(family, tail_radius + 1)?;
    let shell_outflow: Rational = (0..ex.ids.len())
        .filter(|&x| ex.dist[x] == tail_radius)
        .flat_map(|x| ex.adj[x].iter().filter(|(y, _)| ex.dist[*y] > tail_radius).map(|(_, c)| c.clone()))
        .sum();
    let literal_bound = if max_nu_difference < tail_mass.0 {
        Some(true)
    } else if max_nu_difference >= tail_mass.1 {
        Some(false)
    } else {
        None
    };
    let corrected_bound = max_nu_difference <= &tail_mass.0 + &shell_outflow;
    Ok(OrderConsistencyReport {
        n_small,
        tail_radius,
        tail_mass,
        order_count: orders.len(),
        order_values: values,
        unrestricted_min,
        rank: r,
        min_matches_rank,
        pairs_checked,
        max_nu_difference,
        shell_outflow,
        literal_bound,
        corrected_bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenExtensionReport {
    pub n: usize,
    pub truncation: usize,
    pub lambda: f64,
    pub rho: Rational,
    /// `m_n(V_n)`
    pub ball_mass: Rational,
    /// `𝓔(ψ_n, ψ_n)` of the zero extension on `G_N`
    pub energy: f64,
    /// `2 m(V∖V_N) max ψ_n²`, with the upper tail bound
    pub tail: f64,
    /// `m_n(V_n)λ_n + ρ_n/(1−ρ_n) m_n(V_n) + tail`
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Zero extension of the gap eigenfunction of `G_n` into `G_N`, compared
/// with the bound built from `λ_n` and `ρ_n`.
pub fn eigen_extension_probe(family: &InfiniteFamily, n: usize, big_n: usize) -> Result<EigenExtensionReport> {
    if n == 0 || n >= big_n {
        return Err(Error::Precondition("need 1 ≤ n < N".into()));
    }
    let ball = build_ball(family, n)?;
    let eig = spectral_gap(&ball.graph)?;
    let big = Exploration::new(family, big_n)?.graph(big_n)?;
    let mut psi = eig.gap_vector.clone();
    psi.resize(big.len(), 0.0);
    let energy = energy_f64(&big, &psi);
    let rho = ball.rho();
    let mass = ball.graph.invariants().total_mass.clone();
    let (_, tail_hi) = family.tail_mass_bounds(big_n)?;
    let peak = eig.gap_vector.iter().map(|v| v * v).fold(0.0, f64::max);
    let tail = 2.0 * rational::to_f64(&tail_hi) * peak;
    let escape = &rho / (rational::int(1) - &rho) * &mass;
    let bound = rational::to_f64(&mass) * eig.gap + rational::to_f64(&escape) + tail;
    let slack = bound - energy;
    Ok(EigenExtensionReport {
        n,
        truncation: big_n,
        lambda: eig.gap,
        rho,
        ball_mass: mass,
        energy,
        tail,
        bound,
        slack,
        holds: slack >= -1e-12 * bound.abs().max(1.0),
    })
}
