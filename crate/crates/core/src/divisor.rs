//! Divisors, firing functions and total orders.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{MetricProfile, WeightedGraph};
use crate::linalg;
use crate::rational::{self, Rational};
use crate::{Error, Result};

/// `D = Σ ℓ(x)·i(x)·1_x`. The host graph is passed to every operation that
/// needs the quanta.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Divisor {
    pub ell: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiringFunction {
    pub f: Vec<i64>,
}

impl FiringFunction {
    pub fn zero(n: usize) -> Self {
        FiringFunction { f: vec![0; n] }
    }

    pub fn normalized(mut self, base: usize) -> Self {
        let c = self.f[base];
        self.f.iter_mut().for_each(|v| *v -= c);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.f.iter().all(|&v| v == 0)
    }
}

fn to_i64(n: &BigInt, what: &str) -> Result<i64> {
    n.to_i64().ok_or_else(|| Error::SizeLimit(format!("{what} does not fit in 64 bits")))
}

impl Divisor {
    pub fn zero(n: usize) -> Self {
        Divisor { ell: vec![0; n] }
    }

    pub fn new(ell: Vec<i64>) -> Self {
        Divisor { ell }
    }

    pub fn atom(n: usize, x: usize) -> Self {
        let mut d = Divisor::zero(n);
        d.ell[x] = 1;
        d
    }

    pub fn len(&self) -> usize {
        self.ell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ell.is_empty()
    }

    /// Converts raw rational values, failing unless `i(x)` divides each one.
    pub fn from_values(g: &WeightedGraph, values: &[Rational]) -> Result<Self> {
        if values.len() != g.len() {
            return Err(Error::Invalid("divisor length does not match the graph".into()));
        }
        let q = &g.invariants().i;
        let mut ell = Vec::with_capacity(values.len());
        for (x, v) in values.iter().enumerate() {
            let k = rational::exact_quotient(v, &q[x]).ok_or_else(|| {
                Error::Invalid(format!(
                    "value {} at {} is not a multiple of i = {}",
                    rational::to_pq(v),
                    g.name(x),
                    rational::to_pq(&q[x])
                ))
            })?;
            ell.push(to_i64(&k, "multiplier")?);
        }
        Ok(Divisor { ell })
    }

    pub fn canonical(g: &WeightedGraph) -> Result<Self> {
        let ell = g
            .invariants()
            .canonical
            .iter()
            .map(|k| to_i64(k, "canonical multiplier"))
            .collect::<Result<_>>()?;
        Ok(Divisor { ell })
    }

    pub fn value(&self, g: &WeightedGraph, x: usize) -> Rational {
        rational::int(self.ell[x]) * &g.invariants().i[x]
    }

    pub fn values(&self, g: &WeightedGraph) -> Vec<Rational> {
        (0..self.len()).map(|x| self.value(g, x)).collect()
    }

    pub fn degree(&self, g: &WeightedGraph) -> Rational {
        degree_split(g, self).0
    }

    pub fn is_effective(&self) -> bool {
        self.ell.iter().all(|&v| v >= 0)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&x| self.ell[x] != 0).collect()
    }

    pub fn add(&self, other: &Divisor) -> Divisor {
        Divisor { ell: self.ell.iter().zip(&other.ell).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Divisor) -> Divisor {
        Divisor { ell: self.ell.iter().zip(&other.ell).map(|(a, b)| a - b).collect() }
    }

    pub fn neg(&self) -> Divisor {
        Divisor { ell: self.ell.iter().map(|a| -a).collect() }
    }

    /// Zero-pads or truncates to `len` vertices. Truncation requires the
    /// dropped multipliers to vanish.
    pub fn resized(&self, len: usize) -> Result<Divisor> {
        if self.ell.iter().skip(len).any(|&v| v != 0) {
            return Err(Error::Invalid("cannot truncate a divisor with support outside the target".into()));
        }
        let mut ell = self.ell.clone();
        ell.resize(len, 0);
        Ok(Divisor { ell })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TotalOrder {
    perm: Vec<usize>,
    pos: Vec<usize>,
}

impl TotalOrder {
    /// `perm` lists the vertices from smallest to largest.
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut pos = vec![usize::MAX; n];
        for (k, &x) in perm.iter().enumerate() {
            if x >= n || pos[x] != usize::MAX {
                return Err(Error::Invalid("order is not a permutation".into()));
            }
            pos[x] = k;
        }
        Ok(TotalOrder { perm, pos })
    }

    pub fn identity(n: usize) -> Self {
        TotalOrder { perm: (0..n).collect(), pos: (0..n).collect() }
    }

    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        TotalOrder::new(perm).expect("shuffle is a permutation")
    }

    pub fn reverse(&self) -> Self {
        TotalOrder::new(self.perm.iter().rev().copied().collect()).expect("reversal is a permutation")
    }

    pub fn less(&self, x: usize, y: usize) -> bool {
        self.pos[x] < self.pos[y]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    /// Every permutation of `0..n` in lexicographic order.
    pub fn all(n: usize) -> Vec<TotalOrder> {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut out = vec![TotalOrder::new(perm.clone()).unwrap()];
        loop {
            let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else {
                return out;
            };
            let j = (i..n).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
            perm.swap(i - 1, j);
            perm[i..].reverse();
            out.push(TotalOrder::new(perm.clone()).unwrap());
        }
    }
}

/// `(deg, deg⁺, deg⁻)` with `deg = deg⁺ − deg⁻`.
pub fn degree_split(g: &WeightedGraph, d: &Divisor) -> (Rational, Rational, Rational) {
    let mut plus = Rational::zero();
    let mut minus = Rational::zero();
    for (x, &l) in d.ell.iter().enumerate() {
        let v = rational::int(l) * &g.invariants().i[x];
        if l > 0 {
            plus += v;
        } else if l < 0 {
            minus -= v;
        }
    }
    (&plus - &minus, plus, minus)
}

/// `D − Δf`. Panics if a multiplier leaves the 64-bit range.
pub fn apply_firing(g: &WeightedGraph, d: &Divisor, f: &FiringFunction) -> Divisor {
    let lap = g.laplacian_apply(&f.f, None).expect("firing function matches the graph");
    let q = &g.invariants().i;
    let ell = (0..d.len())
        .map(|x| {
            let k = rational::exact_quotient(&lap[x], &q[x]).expect("Δf(x) is a multiple of i(x)");
            let k = k.to_i64().expect("multiplier overflow");
            d.ell[x].checked_sub(k).expect("multiplier overflow")
        })
        .collect();
    Divisor { ell }
}

/// Integer `f` with `f(v₀) = 0` and `D2 = D − Δf`, if one exists.
pub fn equivalence_witness(g: &WeightedGraph, d: &Divisor, d2: &Divisor) -> Option<FiringFunction> {
    if d.degree(g) != d2.degree(g) {
        return None;
    }
    let n = g.len();
    let b = g.base();
    let rest: Vec<usize> = (0..n).filter(|&x| x != b).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &x) in rest.iter().enumerate() {
        pos[x] = k;
    }
    let diff = d.sub(d2).values(g);
    let mut a = vec![vec![Rational::zero(); rest.len()]; rest.len()];
    for (r, &x) in rest.iter().enumerate() {
        for (y, c) in g.neighbors(x) {
            a[r][r] += c;
            if *y != b {
                a[r][pos[*y]] -= c;
            }
        }
    }
    let rhs = rest.iter().map(|&x| diff[x].clone()).collect();
    let sol = linalg::solve(a, rhs)?;
    let mut f = vec![0i64; n];
    for (k, &x) in rest.iter().enumerate() {
        if !sol[k].is_integer() {
            return None;
        }
        f[x] = sol[k].to_integer().to_i64()?;
    }
    Some(FiringFunction { f })
}

/// `ν_O(x) = Σ_{y<x} C_xy − i(x)`.
pub fn nu_divisor(g: &WeightedGraph, order: &TotalOrder) -> Divisor {
    let q = &g.invariants().i;
    let ell = (0..g.len())
        .map(|x| {
            let below: Rational = g
                .neighbors(x)
                .iter()
                .filter(|(y, _)| order.less(*y, x))
                .map(|(_, c)| c.clone())
                .sum();
            let k = rational::exact_quotient(&below, &q[x]).expect("i(x) divides incident weights");
            k.to_i64().expect("multiplier overflow") - 1
        })
        .collect();
    Divisor { ell }
}

/// `(D)_n`: keeps the multipliers on vertices at distance `< n` from the root.
pub fn restrict_divisor(d: &Divisor, metric: &MetricProfile, n: usize) -> Divisor {
    let ell = d
        .ell
        .iter()
        .enumerate()
        .map(|(x, &l)| if metric.dist.get(x).is_some_and(|&r| r < n) { l } else { 0 })
        .collect();
    Divisor { ell }
}

/// Parses `<vertex> <integer>` lines, or `<vertex> <p>/<q>` values when `raw`.
pub fn parse_divisor(g: &WeightedGraph, text: &str, raw: bool) -> Result<Divisor> {
    let mut values = vec![Rational::zero(); g.len()];
    let mut ell = vec![0i64; g.len()];
    let mut seen = vec![false; g.len()];
    for (k, line) in text.lines().enumerate() {
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: k + 1, msg };
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(perr("expected `<vertex> <value>`".into()));
        }
        let x = g.index_of(toks[0]).ok_or_else(|| perr(format!("unknown vertex `{}`", toks[0])))?;
        if std::mem::replace(&mut seen[x], true) {
            return Err(perr(format!("vertex `{}` listed twice", toks[0])));
        }
        if raw {
            values[x] = rational::parse(toks[1]).ok_or_else(|| perr(format!("invalid value `{}`", toks[1])))?;
        } else {
            ell[x] = toks[1].parse().map_err(|_| perr(format!("invalid integer `{}`", toks[1])))?;
        }
    }
    if raw {
        Divisor::from_values(g, &values)
    } else {
        Ok(Divisor { ell })
    }
}

/// One `<vertex> <integer>` line per nonzero multiplier.
pub fn divisor_to_text(g: &WeightedGraph, d: &Divisor) -> String {
    d.support().iter().map(|&x| format!("{} {}\n", g.name(x), d.ell[x])).collect()
}

pub fn is_nonnegative(values: &[Rational]) -> bool {
    values.iter().all(|v| !v.is_negative())
}
