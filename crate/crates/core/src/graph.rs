//! Weighted graphs, their invariants and metric structure.

use std::collections::{BTreeSet, HashMap, VecDeque};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::rational::{self, Rational};
use crate::{Error, Result};

pub type VertexSet = BTreeSet<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphInvariants {
    pub m: Vec<Rational>,
    pub mu: Vec<Rational>,
    pub i: Vec<Rational>,
    pub i_gcd: Rational,
    /// multipliers of the canonical divisor, `K(x) = canonical[x]·i(x)`
    pub canonical: Vec<BigInt>,
    pub euler: Rational,
    pub m_common: BigInt,
    pub total_mass: Rational,
}

impl GraphInvariants {
    pub fn canonical_values(&self) -> Vec<Rational> {
        self.canonical
            .iter()
            .zip(&self.i)
            .map(|(k, q)| Rational::from_integer(k.clone()) * q)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricProfile {
    pub root: usize,
    pub dist: Vec<usize>,
    pub shells: Vec<Vec<usize>>,
    pub d_g: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProfile {
    /// sparse rows: `p[x]` lists `(y, C_xy / m(x))`
    pub p: Vec<Vec<(usize, Rational)>>,
    pub m_plus: Vec<Rational>,
    pub m_minus: Vec<Rational>,
}

impl TransitionProfile {
    pub fn prob(&self, x: usize, y: usize) -> Rational {
        self.p[x]
            .iter()
            .find(|(z, _)| *z == y)
            .map(|(_, w)| w.clone())
            .unwrap_or_else(Rational::zero)
    }
}

#[derive(Debug, Clone)]
pub struct WeightedGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<Vec<(usize, Rational)>>,
    edges: Vec<(usize, usize, Rational)>,
    base: usize,
    inv: GraphInvariants,
}

impl PartialEq for WeightedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.adj == other.adj && self.base == other.base
    }
}

fn valid_token(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

impl WeightedGraph {
    /// Builds a graph on `names` (in that order) from index-based edges.
    pub fn new(names: Vec<String>, edges: Vec<(usize, usize, Rational)>, base: usize) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::Structural("graph has no vertices".into()));
        }
        if base >= n {
            return Err(Error::Invalid("base vertex out of range".into()));
        }
        let mut index = HashMap::with_capacity(n);
        for (k, name) in names.iter().enumerate() {
            if index.insert(name.clone(), k).is_some() {
                return Err(Error::Invalid(format!("vertex {name} listed twice")));
            }
        }
        let mut adj: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); n];
        for (u, v, w) in &edges {
            if *u >= n || *v >= n {
                return Err(Error::Invalid("edge endpoint out of range".into()));
            }
            if u == v {
                return Err(Error::Structural(format!("loop at {}", names[*u])));
            }
            if *w <= Rational::zero() {
                return Err(Error::Invalid(format!(
                    "nonpositive weight on {}-{}",
                    names[*u], names[*v]
                )));
            }
            if adj[*u].iter().any(|(y, _)| y == v) {
                return Err(Error::Invalid(format!(
                    "duplicate edge {}-{}",
                    names[*u], names[*v]
                )));
            }
            adj[*u].push((*v, w.clone()));
            adj[*v].push((*u, w.clone()));
        }
        for row in &mut adj {
            row.sort_by_key(|(y, _)| *y);
        }
        if let Some(x) = (0..n).find(|&x| adj[x].is_empty()) {
            if n > 1 {
                return Err(Error::Structural(format!("vertex {} is isolated", names[x])));
            }
            return Err(Error::Structural("graph has no edges".into()));
        }
        let inv = compute_invariants(&adj, &edges);
        let g = WeightedGraph { names, index, adj, edges, base, inv };
        let reach = g.metric_from(base).dist.iter().filter(|&&d| d != usize::MAX).count();
        if reach != n {
            return Err(Error::Structural("graph is disconnected".into()));
        }
        Ok(g)
    }

    /// Vertices are numbered by first appearance, with `base` first.
    pub fn from_named(base: &str, edges: &[(&str, &str, Rational)]) -> Result<Self> {
        let mut names: Vec<String> = vec![base.to_string()];
        let mut idx: HashMap<String, usize> = HashMap::from([(base.to_string(), 0)]);
        let mut ie = Vec::with_capacity(edges.len());
        for (u, v, w) in edges {
            let mut id = |s: &str| {
                *idx.entry(s.to_string()).or_insert_with(|| {
                    names.push(s.to_string());
                    names.len() - 1
                })
            };
            let (a, b) = (id(u), id(v));
            ie.push((a, b, w.clone()));
        }
        WeightedGraph::new(names, ie, 0)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, x: usize) -> &str {
        &self.names[x]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn with_base(&self, base: usize) -> Result<Self> {
        if base >= self.len() {
            return Err(Error::Invalid("base vertex out of range".into()));
        }
        let mut g = self.clone();
        g.base = base;
        Ok(g)
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, Rational)] {
        &self.adj[x]
    }

    pub fn edges(&self) -> &[(usize, usize, Rational)] {
        &self.edges
    }

    pub fn weight(&self, x: usize, y: usize) -> Option<&Rational> {
        self.adj[x].iter().find(|(z, _)| *z == y).map(|(_, w)| w)
    }

    pub fn invariants(&self) -> &GraphInvariants {
        &self.inv
    }

    pub fn metric_profile(&self) -> MetricProfile {
        self.metric_from(self.base)
    }

    /// Breadth-first distances from `root`; unreachable vertices get `usize::MAX`.
    pub fn metric_from(&self, root: usize) -> MetricProfile {
        let n = self.len();
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::from([root]);
        dist[root] = 0;
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &self.adj[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        let d_g = dist.iter().copied().filter(|&d| d != usize::MAX).max().unwrap_or(0);
        let mut shells = vec![Vec::new(); d_g + 1];
        for (x, &d) in dist.iter().enumerate() {
            if d != usize::MAX {
                shells[d].push(x);
            }
        }
        MetricProfile { root, dist, shells, d_g }
    }

    /// `Δf`, or `Δ_U f` when `restrict_to` is given. Entries outside `U` are zero
    /// and `f` is only read on `U`.
    pub fn laplacian_apply(&self, f: &[i64], restrict_to: Option<&VertexSet>) -> Result<Vec<Rational>> {
        let fr: Vec<Rational> = f.iter().map(|&v| rational::int(v)).collect();
        self.laplacian_rational(&fr, restrict_to)
    }

    pub fn laplacian_rational(
        &self,
        f: &[Rational],
        restrict_to: Option<&VertexSet>,
    ) -> Result<Vec<Rational>> {
        let n = self.len();
        if f.len() != n {
            return Err(Error::Invalid(format!("function has {} entries, graph has {n}", f.len())));
        }
        if let Some(u) = restrict_to {
            if u.iter().any(|&x| x >= n) {
                return Err(Error::Invalid("restriction set is not a vertex subset".into()));
            }
        }
        let inside = |x: usize| restrict_to.is_none_or(|u| u.contains(&x));
        let mut out = vec![Rational::zero(); n];
        for x in 0..n {
            if !inside(x) {
                continue;
            }
            let mut acc = Rational::zero();
            for (y, c) in &self.adj[x] {
                if inside(*y) {
                    acc += c * (&f[x] - &f[*y]);
                }
            }
            out[x] = acc;
        }
        Ok(out)
    }

    pub fn transition_profile(&self) -> TransitionProfile {
        let metric = self.metric_profile();
        let n = self.len();
        let mut p = Vec::with_capacity(n);
        let mut m_plus = vec![Rational::zero(); n];
        let mut m_minus = vec![Rational::zero(); n];
        for x in 0..n {
            let mx = &self.inv.m[x];
            p.push(self.adj[x].iter().map(|(y, c)| (*y, c / mx)).collect());
            for (y, c) in &self.adj[x] {
                if metric.dist[*y] == metric.dist[x] + 1 {
                    m_plus[x] += c;
                } else if metric.dist[*y] + 1 == metric.dist[x] {
                    m_minus[x] += c;
                }
            }
        }
        TransitionProfile { p, m_plus, m_minus }
    }

    /// Induced subgraph on `keep`, listed in the given order; the base is `keep[0]`.
    pub fn induced(&self, keep: &[usize]) -> Result<Self> {
        let pos: HashMap<usize, usize> = keep.iter().enumerate().map(|(k, &x)| (x, k)).collect();
        let names = keep.iter().map(|&x| self.names[x].clone()).collect();
        let mut edges = Vec::new();
        for (u, v, w) in &self.edges {
            if let (Some(&a), Some(&b)) = (pos.get(u), pos.get(v)) {
                edges.push((a, b, w.clone()));
            }
        }
        WeightedGraph::new(names, edges, 0)
    }

    /// Writes the graph in the text format read by [`parse_graph`].
    pub fn to_text(&self) -> String {
        let mut s = format!("base {}\n", self.names[self.base]);
        for (u, v, w) in &self.edges {
            s.push_str(&format!("edge {} {} {}\n", self.names[*u], self.names[*v], rational::to_pq(w)));
        }
        s
    }
}

fn compute_invariants(adj: &[Vec<(usize, Rational)>], edges: &[(usize, usize, Rational)]) -> GraphInvariants {
    let m: Vec<Rational> = adj
        .iter()
        .map(|row| row.iter().fold(Rational::zero(), |acc, (_, c)| acc + c))
        .collect();
    let total_mass = m.iter().fold(Rational::zero(), |acc, v| acc + v);
    let mu = m.iter().map(|v| v / &total_mass).collect();
    let i: Vec<Rational> = adj.iter().map(|row| rational::gcd_all(row.iter().map(|(_, c)| c))).collect();
    let i_gcd = rational::gcd_all(i.iter());
    let canonical = m
        .iter()
        .zip(&i)
        .map(|(mx, ix)| (mx / ix).to_integer() - BigInt::from(2))
        .collect();
    let sum_c = edges.iter().fold(Rational::zero(), |acc, (_, _, c)| acc + c);
    let euler = i.iter().fold(Rational::zero(), |acc, v| acc + v) - sum_c;
    let m_common = if edges.is_empty() {
        BigInt::one()
    } else {
        rational::lcm_of_denominators(edges.iter().map(|(_, _, c)| c))
    };
    GraphInvariants { m, mu, i, i_gcd, canonical, euler, m_common, total_mass }
}

/// Reads the line-oriented graph format (`base v`, `edge u v p/q`, `# comment`).
pub fn parse_graph(text: &str) -> Result<WeightedGraph> {
    let mut base: Option<(String, usize)> = None;
    let mut names: Vec<String> = Vec::new();
    let mut idx: HashMap<String, usize> = HashMap::new();
    let mut edges: Vec<(usize, usize, Rational)> = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut id = |s: &str, names: &mut Vec<String>| -> usize {
        *idx.entry(s.to_string()).or_insert_with(|| {
            names.push(s.to_string());
            names.len() - 1
        })
    };
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let perr = |msg: String| Error::Parse { line, msg };
        match toks[0] {
            "base" => {
                if toks.len() != 2 {
                    return Err(perr("expected `base <vertex>`".into()));
                }
                if !valid_token(toks[1]) {
                    return Err(perr(format!("invalid vertex token `{}`", toks[1])));
                }
                if let Some((_, first)) = &base {
                    return Err(perr(format!("base already declared on line {first}")));
                }
                id(toks[1], &mut names);
                base = Some((toks[1].to_string(), line));
            }
            "edge" => {
                if toks.len() != 4 {
                    return Err(perr("expected `edge <u> <v> <p>/<q>`".into()));
                }
                for t in &toks[1..3] {
                    if !valid_token(t) {
                        return Err(perr(format!("invalid vertex token `{t}`")));
                    }
                }
                let w = rational::parse(toks[3])
                    .ok_or_else(|| perr(format!("invalid weight `{}`", toks[3])))?;
                if w <= Rational::zero() {
                    return Err(perr(format!("weight must be positive, got {}", toks[3])));
                }
                if toks[1] == toks[2] {
                    return Err(Error::Structural(format!("line {line}: loop at {}", toks[1])));
                }
                let (u, v) = (id(toks[1], &mut names), id(toks[2], &mut names));
                let key = (u.min(v), u.max(v));
                if let Some(prev) = seen.insert(key, line) {
                    return Err(perr(format!("duplicate edge {}-{} (first on line {prev})", toks[1], toks[2])));
                }
                edges.push((u, v, w));
            }
            other => return Err(perr(format!("unknown directive `{other}`"))),
        }
    }
    let (base, _) = base.ok_or(Error::Parse { line: 0, msg: "missing `base` line".into() })?;
    let b = names.iter().position(|s| *s == base).expect("base registered");
    WeightedGraph::new(names, edges, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    pub(crate) fn ex1() -> WeightedGraph {
        parse_graph("base a\nedge a b 1/2\nedge b c 1/3").unwrap()
    }

    #[test]
    fn parse_examples() {
        let g = ex1();
        assert_eq!(g.names(), ["a", "b", "c"]);
        assert_eq!(g.weight(0, 1), Some(&frac(1, 2)));
        assert_eq!(g.weight(2, 1), Some(&frac(1, 3)));
        assert!(matches!(parse_graph("base a\nedge a a 1/2"), Err(Error::Structural(_))));
        assert!(matches!(
            parse_graph("base a\nedge a b 1/2\nedge c d 1/3"),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn parse_rejections() {
        let bad = [
            "edge a b 1/2",
            "base a\nbase b\nedge a b 1/2",
            "base a\nedge a b 0/2",
            "base a\nedge a b -1/2",
            "base a\nedge a b 1/2\nedge b a 1/3",
            "base a\nedge a b x",
            "base a\nedge a-1 b 1/2",
            "base a\nvertex a",
        ];
        for text in bad {
            assert!(matches!(parse_graph(text), Err(Error::Parse { .. })), "{text}");
        }
        assert!(matches!(parse_graph("base z\nedge a b 1/2"), Err(Error::Structural(_))));
        let g = parse_graph("# header\n\nbase b\n  edge a b 3/6 # not a comment?\n");
        assert!(g.is_err());
        let g = parse_graph("# header\n\nbase b\n  edge a b 3/6\n").unwrap();
        assert_eq!(g.base(), 0);
        assert_eq!(g.weight(0, 1), Some(&frac(1, 2)));
    }

    #[test]
    fn ex1_invariants() {
        let inv = ex1().invariants().clone();
        assert_eq!(inv.i, vec![frac(1, 2), frac(1, 6), frac(1, 3)]);
        assert_eq!(inv.i_gcd, frac(1, 6));
        assert_eq!(inv.m, vec![frac(1, 2), frac(5, 6), frac(1, 3)]);
        assert_eq!(inv.euler, frac(1, 6));
        assert_eq!(inv.canonical_values(), vec![frac(-1, 2), frac(1, 2), frac(-1, 3)]);
        let deg: Rational = inv.canonical_values().iter().sum();
        assert_eq!(deg, frac(-1, 3));
        assert_eq!(deg, -int(2) * &inv.euler);
        assert_eq!(inv.m_common, BigInt::from(6));
        assert_eq!(inv.mu, vec![frac(3, 10), frac(1, 2), frac(1, 5)]);
    }

    #[test]
    fn small_invariants() {
        let g = parse_graph("base a\nedge a b 1/2").unwrap();
        let inv = g.invariants();
        assert_eq!(inv.i, vec![frac(1, 2), frac(1, 2)]);
        assert_eq!(inv.i_gcd, frac(1, 2));
        assert_eq!(inv.euler, frac(1, 2));
        assert_eq!(inv.canonical_values(), vec![frac(-1, 2), frac(-1, 2)]);
        let p = parse_graph("base a\nedge a b 1\nedge b c 1").unwrap();
        assert_eq!(p.invariants().i, vec![int(1); 3]);
        assert_eq!(p.invariants().euler, int(1));
    }

    #[test]
    fn metric_examples() {
        let g = ex1();
        let mp = g.metric_profile();
        assert_eq!(mp.dist, vec![0, 1, 2]);
        assert_eq!(mp.shells, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(mp.d_g, 2);
        let mb = g.metric_from(1);
        assert_eq!(mb.shells, vec![vec![1], vec![0, 2]]);
        assert_eq!(mb.d_g, 1);
        assert_eq!(parse_graph("base a\nedge a b 1").unwrap().metric_profile().d_g, 1);
    }

    #[test]
    fn laplacian_examples() {
        let g = ex1();
        assert_eq!(g.laplacian_apply(&[1, 0, 0], None).unwrap(), vec![frac(1, 2), frac(-1, 2), int(0)]);
        assert_eq!(g.laplacian_apply(&[5, 5, 5], None).unwrap(), vec![int(0); 3]);
        let u: VertexSet = [0, 1].into();
        let r = g.laplacian_apply(&[1, -1, 0], Some(&u)).unwrap();
        assert_eq!(&r[..2], &[int(1), int(-1)]);
        let bad: VertexSet = [7].into();
        assert!(g.laplacian_apply(&[0, 0, 0], Some(&bad)).is_err());
    }

    #[test]
    fn transition_examples() {
        let g = ex1();
        let t = g.transition_profile();
        assert_eq!(t.prob(1, 0), frac(3, 5));
        assert_eq!(t.prob(1, 2), frac(2, 5));
        for row in &t.p {
            assert_eq!(row.iter().map(|(_, w)| w.clone()).sum::<Rational>(), int(1));
        }
        assert_eq!(t.m_minus[2], frac(1, 3));
        assert_eq!(t.m_plus[2], int(0));
    }

    #[test]
    fn text_round_trip() {
        let g = ex1();
        assert_eq!(parse_graph(&g.to_text()).unwrap(), g);
    }
}
