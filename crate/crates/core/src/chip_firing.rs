//! Reduced divisors, burning and winnability.
//!
//! The work happens on a [`Board`]: the graph rescaled by `m_common` so that
//! weights, quanta and divisor values are all `i128` integers.

use num_traits::ToPrimitive;
use rand::{Rng, RngCore};

use crate::divisor::{Divisor, FiringFunction};
use crate::graph::{VertexSet, WeightedGraph};
use crate::rational::Rational;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionResult {
    pub reduced: Divisor,
    pub firing: FiringFunction,
    pub phase1_rounds: u64,
    pub phase2_fires: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WinMode {
    Reduced,
    Brute(i64),
}

/// Integer image of a graph with a chosen base vertex.
#[derive(Debug, Clone)]
pub struct Board {
    base: usize,
    adj: Vec<Vec<(usize, i128)>>,
    quanta: Vec<i128>,
    dist: Vec<usize>,
    shells: Vec<Vec<usize>>,
    inflow: Vec<i128>,
}

/// Randomized tie-breaking for the uniqueness probe.
type Perturb<'r> = Option<&'r mut dyn RngCore>;

impl Board {
    pub fn new(g: &WeightedGraph, base: usize) -> Result<Self> {
        let scale = Rational::from_integer(g.invariants().m_common.clone());
        let too_big = || Error::SizeLimit("weights do not fit the integer engine".into());
        let units = |r: &Rational| -> Result<i128> {
            let v = r * &scale;
            debug_assert!(v.is_integer());
            v.to_integer().to_i128().filter(|v| v.abs() < (1i128 << 100)).ok_or_else(too_big)
        };
        // multipliers are stored as i64, so keep the volume well inside that range
        if units(&g.invariants().total_mass)? >= 1i128 << 48 {
            return Err(too_big());
        }
        let n = g.len();
        let mut adj = Vec::with_capacity(n);
        for x in 0..n {
            adj.push(g.neighbors(x).iter().map(|(y, c)| Ok((*y, units(c)?))).collect::<Result<Vec<_>>>()?);
        }
        let quanta = g.invariants().i.iter().map(units).collect::<Result<Vec<_>>>()?;
        let metric = g.metric_from(base);
        let mut inflow = vec![0i128; n];
        for x in 0..n {
            for &(y, c) in &adj[x] {
                if metric.dist[y] + 1 == metric.dist[x] {
                    inflow[x] += c;
                }
            }
        }
        Ok(Board { base, adj, quanta, dist: metric.dist, shells: metric.shells, inflow })
    }

    pub fn len(&self) -> usize {
        self.quanta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quanta.is_empty()
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn quanta(&self) -> &[i128] {
        &self.quanta
    }

    pub fn adjacency(&self, x: usize) -> &[(usize, i128)] {
        &self.adj[x]
    }

    pub fn values(&self, d: &Divisor) -> Vec<i128> {
        d.ell.iter().zip(&self.quanta).map(|(&l, &q)| l as i128 * q).collect()
    }

    pub fn to_divisor(&self, v: &[i128]) -> Divisor {
        let ell = v
            .iter()
            .zip(&self.quanta)
            .map(|(&a, &q)| {
                debug_assert_eq!(a % q, 0);
                i64::try_from(a / q).expect("multiplier overflow")
            })
            .collect();
        Divisor { ell }
    }

    /// Value of `Δf` in board units.
    pub fn laplacian(&self, f: &[i64]) -> Vec<i128> {
        (0..self.len())
            .map(|x| self.adj[x].iter().map(|&(y, c)| c * (f[x] as i128 - f[y] as i128)).sum())
            .collect()
    }

    fn sweep(&self, v: &mut [i128], f: Option<&mut [i64]>, perturb: &mut Perturb<'_>) -> u64 {
        let mut rounds = 0;
        let mut shifts = vec![0i64; self.shells.len()];
        for k in (1..self.shells.len()).rev() {
            let mut t: i128 = 0;
            for &z in &self.shells[k] {
                if v[z] < 0 {
                    let need = (-v[z] + self.inflow[z] - 1) / self.inflow[z];
                    t = t.max(need);
                }
            }
            if let Some(p) = perturb.as_mut() {
                t += p.gen_range(0..=2);
            }
            if t == 0 {
                continue;
            }
            rounds += 1;
            for &z in &self.shells[k] {
                for &(y, c) in &self.adj[z] {
                    if self.dist[y] + 1 == k {
                        v[z] += t * c;
                        v[y] -= t * c;
                    }
                }
            }
            shifts[k] = i64::try_from(t).expect("firing count overflow");
        }
        if let Some(f) = f {
            // U_k = {d < k} fired t_k times; normalized so f(v₀) = 0
            let mut acc = 0i64;
            let mut below = vec![0i64; self.shells.len()];
            for k in (0..self.shells.len()).rev() {
                below[k] = acc;
                acc += shifts[k];
            }
            let total: i64 = shifts.iter().sum();
            for x in 0..self.len() {
                f[x] += below[self.dist[x]] - total;
            }
        }
        rounds
    }

    fn burn(&self, v: &[i128], perturb: &mut Perturb<'_>) -> (Vec<bool>, Vec<i128>) {
        let n = self.len();
        let mut burnt = vec![false; n];
        let mut incoming = vec![0i128; n];
        burnt[self.base] = true;
        let mut stack = vec![self.base];
        while !stack.is_empty() {
            let pick = match perturb.as_mut() {
                Some(p) => p.gen_range(0..stack.len()),
                None => stack.len() - 1,
            };
            let x = stack.swap_remove(pick);
            for &(y, c) in &self.adj[x] {
                if burnt[y] {
                    continue;
                }
                incoming[y] += c;
                if v[y] < incoming[y] {
                    burnt[y] = true;
                    stack.push(y);
                }
            }
        }
        (burnt, incoming)
    }

    fn settle(
        &self,
        v: &mut [i128],
        mut f: Option<&mut [i64]>,
        perturb: &mut Perturb<'_>,
    ) -> u64 {
        let mut fires: u64 = 0;
        loop {
            let (burnt, out) = self.burn(v, perturb);
            if burnt.iter().all(|&b| b) {
                return fires;
            }
            let mut k = i128::MAX;
            for x in 0..self.len() {
                if !burnt[x] && out[x] > 0 {
                    k = k.min(v[x] / out[x]);
                }
            }
            debug_assert!(k >= 1);
            if let Some(p) = perturb.as_mut() {
                k = p.gen_range(1..=k.min(3));
            }
            for x in 0..self.len() {
                if burnt[x] {
                    continue;
                }
                v[x] -= k * out[x];
                for &(y, c) in &self.adj[x] {
                    if burnt[y] {
                        v[y] += k * c;
                    }
                }
            }
            let k64 = i64::try_from(k).expect("firing count overflow");
            if let Some(f) = f.as_deref_mut() {
                // firing A = V∖B; shift so that f(v₀) stays 0
                for x in 0..self.len() {
                    if !burnt[x] {
                        f[x] += k64;
                    }
                }
            }
            fires += k as u64;
        }
    }

    /// Phase 1 alone: fire the sublevel sets `{d < k}` from the outside in.
    pub fn make_nonneg(&self, v: &mut [i128], f: &mut [i64]) -> u64 {
        self.sweep(v, Some(f), &mut None)
    }

    pub fn burnt_set(&self, v: &[i128]) -> Vec<bool> {
        self.burn(v, &mut None).0
    }

    /// Reduces board values in place and returns the counters.
    pub fn reduce_values(&self, v: &mut [i128], f: Option<&mut [i64]>) -> (u64, u64) {
        let mut none: Perturb<'_> = None;
        match f {
            Some(f) => {
                let r = self.sweep(v, Some(&mut *f), &mut none);
                (r, self.settle(v, Some(f), &mut none))
            }
            None => {
                let r = self.sweep(v, None, &mut none);
                (r, self.settle(v, None, &mut none))
            }
        }
    }

    /// Same as [`Board::reduce_values`] but with random Phase-1 overshoot,
    /// burn order and batch sizes.
    pub fn reduce_values_perturbed(&self, v: &mut [i128], f: &mut [i64], rng: &mut dyn RngCore) {
        let mut p: Perturb<'_> = Some(rng);
        self.sweep(v, Some(&mut *f), &mut p);
        self.settle(v, Some(f), &mut p);
    }

    pub fn reduce(&self, d: &Divisor) -> ReductionResult {
        let mut v = self.values(d);
        let mut f = vec![0i64; self.len()];
        let (phase1_rounds, phase2_fires) = self.reduce_values(&mut v, Some(&mut f));
        ReductionResult {
            reduced: self.to_divisor(&v),
            firing: FiringFunction { f },
            phase1_rounds,
            phase2_fires,
        }
    }

    pub fn winnable_values(&self, v: &[i128]) -> bool {
        if v.iter().sum::<i128>() < 0 {
            return false;
        }
        let mut w = v.to_vec();
        self.reduce_values(&mut w, None);
        w[self.base] >= 0
    }

    /// Exhaustive search over `f` with `f(v₀) = 0` and `|f| ≤ bound`.
    pub fn winnable_brute(&self, v: &[i128], bound: i64) -> bool {
        let n = self.len();
        let free: Vec<usize> = (0..n).filter(|&x| x != self.base).collect();
        let mut f = vec![0i64; n];
        for &x in &free {
            f[x] = -bound;
        }
        loop {
            let lap = self.laplacian(&f);
            if (0..n).all(|x| v[x] - lap[x] >= 0) {
                return true;
            }
            let mut k = 0;
            loop {
                if k == free.len() {
                    return false;
                }
                let x = free[k];
                if f[x] < bound {
                    f[x] += 1;
                    break;
                }
                f[x] = -bound;
                k += 1;
            }
        }
    }
}

fn check_base(g: &WeightedGraph, v0: usize) -> Result<()> {
    if v0 >= g.len() {
        return Err(Error::Invalid("base vertex out of range".into()));
    }
    Ok(())
}

/// Fires `{d(v₀,·) < k}` for `k = d_G, …, 1` until every `z ≠ v₀` is nonnegative.
pub fn make_nonneg_off_base(g: &WeightedGraph, d: &Divisor, v0: usize) -> Result<(Divisor, FiringFunction)> {
    check_base(g, v0)?;
    let board = Board::new(g, v0)?;
    let mut v = board.values(d);
    let mut f = vec![0i64; g.len()];
    board.make_nonneg(&mut v, &mut f);
    Ok((board.to_divisor(&v), FiringFunction { f }))
}

/// Burnt set of the weighted Dhar process started at `v₀`.
pub fn dhar_burnt_set(g: &WeightedGraph, d: &Divisor, v0: usize) -> Result<VertexSet> {
    check_base(g, v0)?;
    if (0..g.len()).any(|x| x != v0 && d.ell[x] < 0) {
        return Err(Error::Precondition("divisor is negative off the base vertex".into()));
    }
    let board = Board::new(g, v0)?;
    let burnt = board.burnt_set(&board.values(d));
    Ok((0..g.len()).filter(|&x| burnt[x]).collect())
}

pub fn reduce_divisor(g: &WeightedGraph, d: &Divisor, v0: usize) -> Result<ReductionResult> {
    check_base(g, v0)?;
    Ok(Board::new(g, v0)?.reduce(d))
}

pub fn is_winnable(g: &WeightedGraph, d: &Divisor, v0: usize, mode: WinMode) -> Result<bool> {
    check_base(g, v0)?;
    let board = Board::new(g, v0)?;
    let v = board.values(d);
    match mode {
        WinMode::Reduced => Ok(board.winnable_values(&v)),
        WinMode::Brute(bound) => {
            if g.len() > 5 {
                return Err(Error::SizeLimit("brute-force winnability needs at most 5 vertices".into()));
            }
            Ok(board.winnable_brute(&v, bound))
        }
    }
}

/// (P1) and (P2) with respect to `v₀`, checked over every nonempty `A ⊆ V∖{v₀}`.
pub fn is_reduced_by_subsets(g: &WeightedGraph, d: &Divisor, v0: usize) -> bool {
    let n = g.len();
    if (0..n).any(|x| x != v0 && d.ell[x] < 0) {
        return false;
    }
    let vals = d.values(g);
    let others: Vec<usize> = (0..n).filter(|&x| x != v0).collect();
    assert!(others.len() < 20, "subset check is exponential");
    for mask in 1u32..(1 << others.len()) {
        let inside = |x: usize| others.iter().position(|&o| o == x).is_some_and(|k| mask >> k & 1 == 1);
        let has_poor = others.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).any(|(_, &x)| {
            let out: Rational = g.neighbors(x).iter().filter(|(y, _)| !inside(*y)).map(|(_, c)| c.clone()).sum();
            vals[x] < out
        });
        if !has_poor {
            return false;
        }
    }
    true
}

/// Reduction with randomized tie-breaking; used to probe uniqueness.
pub fn reduce_perturbed<R: Rng>(g: &WeightedGraph, d: &Divisor, v0: usize, rng: &mut R) -> Result<ReductionResult> {
    check_base(g, v0)?;
    let board = Board::new(g, v0)?;
    let mut v = board.values(d);
    let mut f = vec![0i64; g.len()];
    board.reduce_values_perturbed(&mut v, &mut f, rng);
    Ok(ReductionResult {
        reduced: board.to_divisor(&v),
        firing: FiringFunction { f },
        phase1_rounds: 0,
        phase2_fires: 0,
    })
}
