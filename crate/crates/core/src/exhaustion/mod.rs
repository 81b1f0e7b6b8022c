//! Infinite weighted graphs given by neighbor generators, their exhaustion by
//! metric balls `V_n = {x : d(v₀, x) ≤ n}`, and series computed along it.
//!
//! Every ball is materialized together with one extra ring, so the ambient
//! mass `m(x)` of each `x ∈ V_n` is exact.

mod probes;
mod series;

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::graph::WeightedGraph;
use crate::rational::{self, Rational};
use crate::{Error, Result};

pub use probes::{eigen_extension_probe, order_consistency_probe, EigenExtensionReport, OrderConsistencyReport};
pub use series::{
    exhaustion_series, infinite_rr_report, rank_series, SupportTailCheck, ExhaustionSeries, FamilyDivisor,
    InfiniteRrReport, RankRow, RankSeries, SeriesRow, Verdict,
};

/// Largest radius explored for the double-exponential presets; the weights
/// `2^{−2^k}` grow by one doubling of bit length per ring.
pub const MAX_DOUBLE_EXP_RADIUS: usize = 18;
pub const MAX_BALL_VERTICES: usize = 50_000;
const MAX_DEGREE: usize = 4096;
/// explicit terms summed before the geometric bound on the remainder
const TAIL_TERMS: usize = 2;

/// `2^{−2^k}`
fn dexp(k: usize) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << (1usize << k))
}

#[derive(Debug, Clone)]
enum Preset {
    RayDoubleExp,
    RayGeometric(Rational),
    TreeDoubleExp,
    Lollipop { core: WeightedGraph, attach: usize, attach_dist: usize, core_radius: usize },
}

/// A locally finite, finite-volume weighted graph described by a pure
/// neighbor generator on string ids.
#[derive(Debug, Clone)]
pub struct InfiniteFamily {
    name: String,
    preset: Preset,
}

fn tail_index(id: &str) -> Option<usize> {
    let k = id.strip_prefix('t')?;
    if k.is_empty() || k.starts_with('0') || !k.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    k.parse().ok()
}

fn parse_index(id: &str) -> Result<usize> {
    let ok = !id.is_empty() && id.bytes().all(|b| b.is_ascii_digit()) && (id == "0" || !id.starts_with('0'));
    ok.then(|| id.parse().ok()).flatten().ok_or_else(|| Error::Invalid(format!("unknown vertex id `{id}`")))
}

impl InfiniteFamily {
    /// Ray `0 – 1 – 2 – …` with `C_{k,k+1} = 2^{−2^k}`.
    pub fn ray_double_exp() -> Self {
        InfiniteFamily { name: "ray-double-exp".into(), preset: Preset::RayDoubleExp }
    }

    /// Ray with `C_{k,k+1} = r^{k+1}`, `0 < r < 1`.
    pub fn ray_geometric(ratio: Rational) -> Result<Self> {
        if !ratio.is_positive() || ratio >= Rational::one() {
            return Err(Error::Invalid("ratio must lie in (0, 1)".into()));
        }
        Ok(InfiniteFamily { name: "ray-geometric".into(), preset: Preset::RayGeometric(ratio) })
    }

    /// Rooted binary tree on heap ids (root `1`, children `2j`, `2j+1`);
    /// edges from depth `k` to `k+1` weigh `2^{−2^k}`.
    pub fn tree_double_exp() -> Self {
        InfiniteFamily { name: "tree-double-exp".into(), preset: Preset::TreeDoubleExp }
    }

    /// Finite `core` (base vertex = its base) with a tail `attach – t1 – t2 – …`,
    /// `C_{attach,t1} = 1/2` and `C_{t_k,t_{k+1}} = 2^{−2^k}`.
    pub fn lollipop(core: WeightedGraph, attach: &str) -> Result<Self> {
        let a = core
            .index_of(attach)
            .ok_or_else(|| Error::Invalid(format!("attach vertex `{attach}` not in core")))?;
        if let Some(bad) = core.names().iter().find(|s| tail_index(s).is_some()) {
            return Err(Error::Invalid(format!("core vertex `{bad}` clashes with tail ids")));
        }
        let metric = core.metric_profile();
        let attach_dist = metric.dist[a];
        Ok(InfiniteFamily {
            name: "lollipop".into(),
            preset: Preset::Lollipop { core, attach: a, attach_dist, core_radius: metric.d_g },
        })
    }

    /// Builds a preset from its CLI name and `key=value` parameters. `load`
    /// reads the file named by a `core` parameter.
    pub fn from_preset(
        name: &str,
        params: &[(String, String)],
        load: &dyn Fn(&str) -> Result<WeightedGraph>,
    ) -> Result<Self> {
        let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let allowed: &[&str] = match name {
            "ray-double-exp" | "tree-double-exp" => &[],
            "ray-geometric" => &["ratio"],
            "lollipop" => &["core", "attach"],
            _ => return Err(Error::Invalid(format!("unknown preset `{name}`"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Invalid(format!("preset `{name}` takes no parameter `{k}`")));
        }
        match name {
            "ray-double-exp" => Ok(Self::ray_double_exp()),
            "tree-double-exp" => Ok(Self::tree_double_exp()),
            "ray-geometric" => {
                let text = get("ratio").unwrap_or("1/2");
                let r = rational::parse(text).ok_or_else(|| Error::Invalid(format!("invalid ratio `{text}`")))?;
                Self::ray_geometric(r)
            }
            _ => {
                let path = get("core").ok_or_else(|| Error::Invalid("lollipop needs --param core=<file>".into()))?;
                let core = load(path)?;
                let attach = match get("attach") {
                    Some(a) => a.to_string(),
                    None => core.name(core.base()).to_string(),
                };
                Self::lollipop(core, &attach)
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base_id(&self) -> String {
        match &self.preset {
            Preset::RayDoubleExp | Preset::RayGeometric(_) => "0".into(),
            Preset::TreeDoubleExp => "1".into(),
            Preset::Lollipop { core, .. } => core.name(core.base()).to_string(),
        }
    }

    /// Largest radius this preset may be explored to.
    fn max_radius(&self) -> usize {
        match &self.preset {
            Preset::RayGeometric(_) => 4096,
            Preset::Lollipop { attach_dist, .. } => MAX_DOUBLE_EXP_RADIUS + attach_dist,
            _ => MAX_DOUBLE_EXP_RADIUS,
        }
    }

    /// Neighbors of `id` with edge weights.
    pub fn neighbors(&self, id: &str) -> Result<Vec<(String, Rational)>> {
        match &self.preset {
            Preset::RayDoubleExp | Preset::RayGeometric(_) => {
                let k = parse_index(id)?;
                let w = |j: usize| match &self.preset {
                    Preset::RayGeometric(r) => num_traits::pow(r.clone(), j + 1),
                    _ => dexp(j),
                };
                let mut out = Vec::with_capacity(2);
                if k > 0 {
                    out.push(((k - 1).to_string(), w(k - 1)));
                }
                out.push(((k + 1).to_string(), w(k)));
                Ok(out)
            }
            Preset::TreeDoubleExp => {
                let j = parse_index(id)?;
                if j == 0 {
                    return Err(Error::Invalid("tree ids start at 1".into()));
                }
                let depth = (usize::BITS - 1 - j.leading_zeros()) as usize;
                let mut out = Vec::with_capacity(3);
                if j > 1 {
                    out.push(((j / 2).to_string(), dexp(depth - 1)));
                }
                out.push(((2 * j).to_string(), dexp(depth)));
                out.push(((2 * j + 1).to_string(), dexp(depth)));
                Ok(out)
            }
            Preset::Lollipop { core, attach, .. } => {
                if let Some(k) = tail_index(id) {
                    let prev = if k == 1 { core.name(*attach).to_string() } else { format!("t{}", k - 1) };
                    let wp = if k == 1 { rational::frac(1, 2) } else { dexp(k - 1) };
                    return Ok(vec![(prev, wp), (format!("t{}", k + 1), dexp(k))]);
                }
                let x = core.index_of(id).ok_or_else(|| Error::Invalid(format!("unknown vertex id `{id}`")))?;
                let mut out: Vec<(String, Rational)> =
                    core.neighbors(x).iter().map(|(y, c)| (core.name(*y).to_string(), c.clone())).collect();
                if x == *attach {
                    out.push(("t1".into(), rational::frac(1, 2)));
                }
                Ok(out)
            }
        }
    }

    /// Smallest radius `R` such that every edge outside `G_R` belongs to the
    /// tail series handled by [`Self::outside_edge_bounds`].
    fn exact_radius(&self) -> usize {
        match &self.preset {
            Preset::Lollipop { attach_dist, core_radius, .. } => (*core_radius).max(attach_dist + 1),
            _ => 0,
        }
    }

    /// Lower and upper bounds on the total weight of edges not in `G_R`.
    /// Requires `R ≥ exact_radius()`.
    fn outside_edge_bounds(&self, r: usize) -> (Rational, Rational) {
        match &self.preset {
            Preset::RayDoubleExp => dexp_tail(r, false),
            Preset::TreeDoubleExp => dexp_tail(r, true),
            Preset::RayGeometric(q) => {
                let t = num_traits::pow(q.clone(), r + 1) / (Rational::one() - q);
                (t.clone(), t)
            }
            Preset::Lollipop { attach_dist, .. } => dexp_tail(r - attach_dist, false),
        }
    }

    /// Bounds on `m(V∖V_n)`, the ambient mass outside the ball of radius `n`.
    pub fn tail_mass_bounds(&self, n: usize) -> Result<(Rational, Rational)> {
        let r = (n + 2).max(self.exact_radius());
        let ex = Exploration::new(self, r)?;
        let two = rational::int(2);
        let mut exact = Rational::zero();
        // edges of G_R counted once per endpoint beyond V_n; edges outside G_R
        // have both endpoints beyond V_n
        for (x, row) in ex.adj.iter().enumerate() {
            if ex.dist[x] > n {
                exact += row.iter().map(|(_, c)| c.clone()).sum::<Rational>();
            }
        }
        let (lo, hi) = self.outside_edge_bounds(r);
        Ok((&exact + &two * lo, exact + two * hi))
    }

    /// Bounds on the total volume `m(V)`.
    pub fn total_mass_bounds(&self) -> Result<(Rational, Rational)> {
        let r = self.exact_radius().max(2);
        let ex = Exploration::new(self, r)?;
        let inside: Rational = ex.adj.iter().flatten().map(|(_, c)| c.clone()).sum();
        let (lo, hi) = self.outside_edge_bounds(r);
        let two = rational::int(2);
        Ok((&inside + &two * lo, inside + two * hi))
    }

    /// `N(ε)`: least `n ≥ 1` whose tail mass `m(V∖V_n)` is certainly below `ε`.
    pub fn tail_radius(&self, eps: &Rational) -> Result<usize> {
        if !eps.is_positive() {
            return Err(Error::Precondition("ε must be positive".into()));
        }
        for n in 1..self.max_radius().saturating_sub(2) {
            if &self.tail_mass_bounds(n)?.1 < eps {
                return Ok(n);
            }
        }
        Err(Error::SizeLimit("tail mass stays above ε within the explorable radius".into()))
    }
}

/// `Σ_{k≥s} c_k 2^{−2^k}` with `c_k = 2^{k+1}` (tree levels) or `1`.
/// Past the explicit terms the ratio of consecutive terms is at most
/// `(c_{k+1}/c_k)·2^{−2^k}`, which decreases in `k`.
fn dexp_tail(s: usize, tree: bool) -> (Rational, Rational) {
    let term = |k: usize| {
        let c = if tree { Rational::from_integer(BigInt::one() << (k + 1)) } else { Rational::one() };
        c * dexp(k)
    };
    let lo: Rational = (s..s + TAIL_TERMS).map(term).sum();
    let j = s + TAIL_TERMS;
    let ratio = if tree { rational::int(2) * dexp(j) } else { dexp(j) };
    let hi = &lo + term(j) / (Rational::one() - ratio);
    (lo, hi)
}

/// Breadth-first exploration to radius `r`: vertices in BFS order and the
/// adjacency of `G_r`.
#[derive(Debug, Clone)]
pub(crate) struct Exploration {
    pub ids: Vec<String>,
    pub dist: Vec<usize>,
    pub adj: Vec<Vec<(usize, Rational)>>,
    pub radius: usize,
}

impl Exploration {
    pub(crate) fn new(family: &InfiniteFamily, r: usize) -> Result<Self> {
        if r > family.max_radius() {
            return Err(Error::SizeLimit(format!(
                "radius {r} exceeds the limit {} for {}",
                family.max_radius(),
                family.name
            )));
        }
        let mut ids = vec![family.base_id()];
        let mut dist = vec![0usize];
        let mut index: HashMap<String, usize> = HashMap::from([(ids[0].clone(), 0)]);
        let mut lists: Vec<Vec<(String, Rational)>> = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            let list = family.neighbors(&ids[x])?;
            if list.len() > MAX_DEGREE {
                return Err(Error::Structural(format!("vertex {} has more than {MAX_DEGREE} neighbors", ids[x])));
            }
            for (k, (y, w)) in list.iter().enumerate() {
                if *y == ids[x] {
                    return Err(Error::Structural(format!("generator produced a loop at {y}")));
                }
                if !w.is_positive() {
                    return Err(Error::Structural(format!("nonpositive weight on {}-{y}", ids[x])));
                }
                if list[..k].iter().any(|(z, _)| z == y) {
                    return Err(Error::Structural(format!("generator lists {y} twice at {}", ids[x])));
                }
                if !index.contains_key(y) && dist[x] < r {
                    if ids.len() >= MAX_BALL_VERTICES {
                        return Err(Error::SizeLimit(format!("ball exceeds {MAX_BALL_VERTICES} vertices")));
                    }
                    index.insert(y.clone(), ids.len());
                    ids.push(y.clone());
                    dist.push(dist[x] + 1);
                    queue.push_back(ids.len() - 1);
                }
            }
            lists.push(list);
        }
        let mut adj: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); ids.len()];
        for (x, list) in lists.iter().enumerate() {
            for (y, w) in list {
                if let Some(&yi) = index.get(y) {
                    adj[x].push((yi, w.clone()));
                }
            }
        }
        // every vertex of G_r was expanded, so symmetry is checked on all its edges
        for x in 0..ids.len() {
            for (y, w) in &adj[x] {
                if !adj[*y].iter().any(|(z, v)| *z == x && v == w) {
                    return Err(Error::Structural(format!(
                        "generator is not symmetric on {}-{}",
                        ids[x], ids[*y]
                    )));
                }
            }
        }
        Ok(Exploration { ids, dist, adj, radius: r })
    }

    fn count_within(&self, n: usize) -> usize {
        self.dist.partition_point(|&d| d <= n)
    }

    /// Induced graph on `V_n`, base `v₀` at index 0.
    pub(crate) fn graph(&self, n: usize) -> Result<WeightedGraph> {
        if n > self.radius {
            return Err(Error::Precondition("radius beyond the exploration".into()));
        }
        let k = self.count_within(n);
        let mut edges = Vec::new();
        for x in 0..k {
            for (y, w) in &self.adj[x] {
                if x < *y && *y < k {
                    edges.push((x, *y, w.clone()));
                }
            }
        }
        WeightedGraph::new(self.ids[..k].to_vec(), edges, 0)
    }

    pub(crate) fn ball(&self, n: usize) -> Result<Ball> {
        if n == 0 || n + 1 > self.radius {
            return Err(Error::Precondition("ball radius must satisfy 1 ≤ n < exploration radius".into()));
        }
        Ok(Ball {
            radius: n,
            graph: self.graph(n)?,
            ring: self.graph(n + 1)?,
            dist: self.dist[..self.count_within(n + 1)].to_vec(),
        })
    }
}

/// `G_n` together with `G_{n+1}`; the vertices of `V_n` come first in both.
#[derive(Debug, Clone)]
pub struct Ball {
    pub radius: usize,
    pub graph: WeightedGraph,
    pub ring: WeightedGraph,
    /// distance from `v₀` for every vertex of the ring graph
    pub dist: Vec<usize>,
}

impl Ball {
    /// Indices of `S_n`.
    pub fn shell(&self) -> Vec<usize> {
        (0..self.graph.len()).filter(|&x| self.dist[x] == self.radius).collect()
    }

    /// Ambient `m(x)` for `x ∈ V_n`.
    pub fn ambient_mass(&self, x: usize) -> &Rational {
        assert!(x < self.graph.len(), "vertex outside V_n");
        &self.ring.invariants().m[x]
    }

    /// `m(x) − m_n(x)`, the weight from `x` to `V_n^c`.
    pub fn escaping_mass(&self, x: usize) -> Rational {
        self.ambient_mass(x) - &self.graph.invariants().m[x]
    }

    /// `ρ_n = max_{x∈S_n} (1 − m₋(x)/m(x))`.
    pub fn rho(&self) -> Rational {
        crate::spectral::rho_of_shell(&self.ring, &self.dist, &self.shell())
    }

    pub fn shell_mass(&self) -> Rational {
        self.shell().iter().map(|&x| self.ambient_mass(x).clone()).sum()
    }

    pub fn min_mass(&self) -> Rational {
        (0..self.graph.len()).map(|x| self.ambient_mass(x).clone()).min().expect("nonempty ball")
    }
}

/// `G_n` with its extra ring, by breadth-first expansion from `v₀`.
pub fn build_ball(family: &InfiniteFamily, n: usize) -> Result<Ball> {
    if n == 0 {
        return Err(Error::Precondition("ball radius must be at least 1".into()));
    }
    Exploration::new(family, n + 1)?.ball(n)
}
