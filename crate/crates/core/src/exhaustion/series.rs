use std::thread;

use num_traits::{Signed, Zero};

use super::{Exploration, InfiniteFamily};
use crate::divisor::Divisor;
use crate::graph::WeightedGraph;
use crate::rank::{rank, rr_check, RankStatus};
use crate::rational::Rational;
use crate::spectral::{poincare_threshold, spectral_gap};
use crate::{Error, Result};

/// A finitely supported divisor on an infinite family, as values `D(x)`
/// keyed by vertex id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FamilyDivisor {
    entries: Vec<(String, Rational)>,
}

impl FamilyDivisor {
    /// Zero values are dropped; repeated ids are summed.
    pub fn new<I: IntoIterator<Item = (String, Rational)>>(entries: I) -> Self {
        let mut out: Vec<(String, Rational)> = Vec::new();
        for (id, v) in entries {
            match out.iter_mut().find(|(k, _)| *k == id) {
                Some((_, w)) => *w += v,
                None => out.push((id, v)),
            }
        }
        out.retain(|(_, v)| !v.is_zero());
        out.sort_by(|a, b| a.0.cmp(&b.0));
        FamilyDivisor { entries: out }
    }

    pub fn atom(id: &str, value: Rational) -> Self {
        Self::new([(id.to_string(), value)])
    }

    /// Reads a divisor on a finite ball of the family.
    pub fn from_divisor(g: &WeightedGraph, d: &Divisor) -> Self {
        Self::new(d.support().into_iter().map(|x| (g.name(x).to_string(), d.value(g, x))))
    }

    pub fn entries(&self) -> &[(String, Rational)] {
        &self.entries
    }

    pub fn degree(&self) -> Rational {
        self.entries.iter().map(|(_, v)| v.clone()).sum()
    }

    /// `deg⁺(E) + deg⁻(E)`.
    pub fn total_variation(&self) -> Rational {
        self.entries.iter().map(|(_, v)| v.abs()).sum()
    }

    pub fn sub(&self, other: &FamilyDivisor) -> FamilyDivisor {
        Self::new(self.entries.iter().cloned().chain(other.entries.iter().map(|(k, v)| (k.clone(), -v))))
    }

    /// The divisor on a ball containing the support. Fails when a value is
    /// not a multiple of the vertex quantum there.
    pub fn on_graph(&self, g: &WeightedGraph) -> Result<Divisor> {
        let mut values = vec![Rational::zero(); g.len()];
        for (id, v) in &self.entries {
            let x = g
                .index_of(id)
                .ok_or_else(|| Error::Precondition(format!("divisor vertex `{id}` lies outside the ball")))?;
            values[x] = v.clone();
        }
        Divisor::from_values(g, &values)
    }

    /// Largest distance from `v₀` in the support, checked against `ex`.
    fn support_radius(&self, ex: &Exploration) -> Result<usize> {
        let mut r = 0;
        for (id, _) in &self.entries {
            let x = ex
                .ids
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::Precondition(format!("divisor vertex `{id}` lies outside the window")))?;
            r = r.max(ex.dist[x]);
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub n: usize,
    pub rho: Rational,
    pub lambda: Option<f64>,
    pub euler: Rational,
    /// ambient `m(S_n)`
    pub shell_mass: Rational,
    /// `m_n(V_n)`
    pub ball_mass: Rational,
    /// ambient `min_{x∈V_n} m(x)`
    pub min_mass: Rational,
    pub ratio43: Rational,
    pub rank: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustionSeries {
    pub family: String,
    pub rows: Vec<SeriesRow>,
    pub threshold_a: f64,
    /// first `n` with `ρ_n < A`
    pub first_below_a: Option<usize>,
    /// `ρ_n m(S_n)/min m` strictly decreasing over the window
    pub ratio43_decreasing: bool,
}

/// `ρ_n`, `𝖊_n`, masses and `ratio43` for `n = 1..=N`, with `λ_n` when
/// `with_gaps`.
pub fn exhaustion_series(family: &InfiniteFamily, big_n: usize, with_gaps: bool) -> Result<ExhaustionSeries> {
    if big_n < 2 {
        return Err(Error::Precondition("series needs N ≥ 2".into()));
    }
    let ex = Exploration::new(family, big_n + 1)?;
    let threshold = poincare_threshold(0.7, 3.0, 0.01)?;
    let mut rows = Vec::with_capacity(big_n);
    for n in 1..=big_n {
        let ball = ex.ball(n)?;
        let rho = ball.rho();
        let shell_mass = ball.shell_mass();
        let min_mass = ball.min_mass();
        let ratio43 = &rho * &shell_mass / &min_mass;
        assert!(ratio43 >= rho, "min mass over V_n cannot exceed m(S_n)");
        let lambda = if with_gaps { Some(spectral_gap(&ball.graph)?.gap) } else { None };
        let inv = ball.graph.invariants();
        rows.push(SeriesRow {
            n,
            rho,
            lambda,
            euler: inv.euler.clone(),
            shell_mass,
            ball_mass: inv.total_mass.clone(),
            min_mass,
            ratio43,
            rank: None,
        });
    }
    let first_below_a = rows.iter().find(|r| crate::rational::to_f64(&r.rho) < threshold.a_value).map(|r| r.n);
    let ratio43_decreasing = rows.windows(2).all(|w| w[1].ratio43 < w[0].ratio43);
    Ok(ExhaustionSeries {
        family: family.name().to_string(),
        rows,
        threshold_a: threshold.a_value,
        first_below_a,
        ratio43_decreasing,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub n: usize,
    /// `r_n((D)_l)`
    pub rank: Rational,
    /// `r_n(K_{G_n} − (D)_l)`
    pub rank_dual: Rational,
    pub degree: Rational,
    pub euler: Rational,
    /// finite Riemann-Roch at this radius; `None` when a rank is only a bound
    pub rr_holds: Option<bool>,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSeries {
    pub l: usize,
    pub rows: Vec<RankRow>,
    /// first radius that could not be computed, with the reason
    pub truncated: Option<(usize, Error)>,
    /// number of trailing exact rows sharing the last value of `r_n`
    pub stable_suffix: usize,
    pub stabilized: bool,
}

fn rank_row(ex: &Exploration, d: &FamilyDivisor, n: usize, budget: u64) -> Result<RankRow> {
    let g = ex.graph(n)?;
    let dd = d.on_graph(&g)?;
    let rr = rr_check(&g, &dd, 0, budget)?;
    let exact = rr.rank_d.status == RankStatus::Exact && rr.rank_kd.status == RankStatus::Exact;
    Ok(RankRow {
        n,
        rank: rr.rank_d.rank,
        rank_dual: rr.rank_kd.rank,
        degree: dd.degree(&g),
        euler: g.invariants().euler.clone(),
        rr_holds: rr.holds,
        exact,
    })
}

/// Evaluates `f` on every radius with up to `jobs` threads; results come
/// back in radius order.
fn per_radius<T: Send>(radii: &[usize], jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    if jobs <= 1 || radii.len() <= 1 {
        return radii.iter().map(|&n| f(n)).collect();
    }
    let jobs = jobs.min(radii.len());
    let f = &f;
    let mut slots: Vec<Option<T>> = thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                s.spawn(move || {
                    radii.iter().enumerate().skip(j).step_by(jobs).map(|(k, &n)| (k, f(n))).collect::<Vec<_>>()
                })
            })
            .collect();
        let mut slots: Vec<Option<T>> = (0..radii.len()).map(|_| None).collect();
        for h in handles {
            for (k, v) in h.join().expect("worker panicked") {
                slots[k] = Some(v);
            }
        }
        slots
    });
    slots.iter_mut().map(|v| v.take().expect("every radius computed")).collect()
}

fn stable_suffix(rows: &[RankRow]) -> usize {
    let Some(last) = rows.last() else { return 0 };
    rows.iter().rev().take_while(|r| r.exact && r.rank == last.rank).count()
}

/// `r_n((D)_l)` and the finite Riemann-Roch identity for `n = l..=N`.
/// The series stops at the first radius that fails (size or budget).
pub fn rank_series(
    family: &InfiniteFamily,
    d: &FamilyDivisor,
    l: usize,
    big_n: usize,
    budget: u64,
    stable_k: usize,
    jobs: usize,
) -> Result<RankSeries> {
    if l == 0 || l >= big_n {
        return Err(Error::Precondition("need 1 ≤ l < N".into()));
    }
    if stable_k == 0 {
        return Err(Error::Precondition("stabilization length must be positive".into()));
    }
    let ex = Exploration::new(family, big_n)?;
    if d.support_radius(&ex)? >= l {
        return Err(Error::Precondition(format!("divisor support must lie in V_{}", l - 1)));
    }
    let radii: Vec<usize> = (l..=big_n).collect();
    let results = per_radius(&radii, jobs, |n| rank_row(&ex, d, n, budget));
    let mut rows = Vec::new();
    let mut truncated = None;
    for (n, r) in radii.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                truncated = Some((*n, e));
                break;
            }
        }
    }
    let stable = stable_suffix(&rows);
    Ok(RankSeries { l, rows, truncated, stable_suffix: stable, stabilized: stable >= stable_k })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stabilized,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stabilized => "stabilized",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// `|r(D_l) − r(D′_{l′})| ≤ deg⁺(D′ − D) + deg⁻(D′ − D)` at the last radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportTailCheck {
    pub l_alt: usize,
    pub bound: Rational,
    pub observed: Rational,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteRrReport {
    pub series: RankSeries,
    pub r_hat: Rational,
    pub r_hat_dual: Rational,
    pub e_hat: Rational,
    pub degree: Rational,
    /// `r̂(D) − r̂(K − D) − deg D − 𝖊̂`
    pub residual: Rational,
    /// finite Riemann-Roch held exactly at every computed radius
    pub per_radius_exact: bool,
    pub verdict: Verdict,
    /// `ratio43` strictly decreasing over `1..=N`
    pub decay_condition: bool,
    pub support_tail: Option<SupportTailCheck>,
}

/// Candidate limits of the rank series and the Riemann-Roch residual at the
/// last computed radius. `alt` is a second divisor `D′` with its support
/// radius `l′`, compared against `D` at that radius.
#[allow(clippy::too_many_arguments)]
pub fn infinite_rr_report(
    family: &InfiniteFamily,
    d: &FamilyDivisor,
    l: usize,
    big_n: usize,
    budget: u64,
    stable_k: usize,
    jobs: usize,
    alt: Option<(&FamilyDivisor, usize)>,
) -> Result<InfiniteRrReport> {
    let series = rank_series(family, d, l, big_n, budget, stable_k, jobs)?;
    let last = match (series.rows.last(), &series.truncated) {
        (Some(row), _) => row.clone(),
        (None, Some((_, e))) => return Err(e.clone()),
        (None, None) => unreachable!("the window is nonempty"),
    };
    let residual = &last.rank - &last.rank_dual - &last.degree - &last.euler;
    let per_radius_exact = series.rows.iter().all(|r| r.rr_holds == Some(true));
    let verdict = if series.stabilized { Verdict::Stabilized } else { Verdict::Inconclusive };
    let decay_condition = exhaustion_series(family, big_n, false)?.ratio43_decreasing;
    let support_tail = match alt {
        None => None,
        Some((d2, l2)) => {
            if l2 < l || l2 > last.n {
                return Err(Error::Precondition("need l ≤ l′ ≤ last computed radius".into()));
            }
            let ex = Exploration::new(family, last.n)?;
            if d2.support_radius(&ex)? >= l2 {
                return Err(Error::Precondition(format!("second divisor support must lie in V_{}", l2 - 1)));
            }
            let g = ex.graph(last.n)?;
            let r2 = rank(&g, &d2.on_graph(&g)?, 0, budget)?;
            let bound = d2.sub(d).total_variation();
            let observed = (&last.rank - &r2.rank).abs();
            let holds = observed <= bound;
            Some(SupportTailCheck { l_alt: l2, bound, observed, holds })
        }
    };
    Ok(InfiniteRrReport {
        r_hat: last.rank.clone(),
        r_hat_dual: last.rank_dual.clone(),
        e_hat: last.euler.clone(),
        degree: last.degree.clone(),
        residual,
        per_radius_exact,
        verdict,
        decay_condition,
        support_tail,
        series,
    })
}
