//! Energies, spectral gaps, resolvents and harmonic extensions.
//!
//! Everything is exact except eigenpairs, which come from a cyclic Jacobi
//! solve of `M^{-1/2} Δ M^{-1/2}` after the kernel direction `√m` has been
//! split off with a Householder reflection.

use num_traits::{Signed, Zero};

use crate::graph::{VertexSet, WeightedGraph};
use crate::linalg;
use crate::rational::{self, Rational};
use crate::{Error, Result};

pub const MAX_EIGEN_VERTICES: usize = 2000;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    /// eigenvalues of `L = (1/m)Δ`, ascending, starting with the kernel's 0
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    /// μ-mean zero, μ-norm one
    pub gap_vector: Vec<f64>,
    /// `‖Lψ − λψ‖∞`
    pub residual: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Energy {
    pub energy: Rational,
    /// energy divided by `m_U(V_U)`
    pub normalized: Rational,
}

/// `𝓔_U(f, f) = Σ_{edges in U} C (f(x) − f(y))²`; the whole graph when `u` is `None`.
pub fn dirichlet_energy(g: &WeightedGraph, f: &[Rational], u: Option<&VertexSet>) -> Energy {
    let inside = |x: usize| u.is_none_or(|s| s.contains(&x));
    let mut energy = Rational::zero();
    let mut mass = Rational::zero();
    for (x, y, c) in g.edges() {
        if inside(*x) && inside(*y) {
            let d = &f[*x] - &f[*y];
            energy += c * &d * &d;
            mass += c * rational::int(2);
        }
    }
    let normalized = if mass.is_zero() { Rational::zero() } else { &energy / &mass };
    Energy { energy, normalized }
}

pub fn energy_f64(g: &WeightedGraph, f: &[f64]) -> f64 {
    g.edges()
        .iter()
        .map(|(x, y, c)| rational::to_f64(c) * (f[*x] - f[*y]).powi(2))
        .sum()
}

/// `(𝓔(f,f)/m(V)) / ‖f‖²_{L²(μ)}`.
pub fn rayleigh_quotient(g: &WeightedGraph, f: &[f64]) -> f64 {
    let inv = g.invariants();
    let mv = rational::to_f64(&inv.total_mass);
    let norm: f64 = inv.mu.iter().zip(f).map(|(m, v)| rational::to_f64(m) * v * v).sum();
    energy_f64(g, f) / mv / norm
}

/// Symmetric eigendecomposition by cyclic Jacobi. `a` is row-major `n × n`.
/// Returns eigenvalues and column eigenvectors (row-major `n × n`).
pub fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let mut v = vec![0.0; n * n];
    for k in 0..n {
        v[k * n + k] = 1.0;
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    s += a[p * n + q] * a[p * n + q];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) >= JACOBI_TOL {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(format!("Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals = (0..n).map(|k| a[k * n + k]).collect();
    Ok((vals, v, sweeps))
}

pub fn spectral_gap(g: &WeightedGraph) -> Result<SpectralResult> {
    let n = g.len();
    if n > MAX_EIGEN_VERTICES {
        return Err(Error::SizeLimit(format!("eigensolve limited to {MAX_EIGEN_VERTICES} vertices")));
    }
    if n < 2 {
        return Err(Error::Structural("spectral gap needs at least two vertices".into()));
    }
    let inv = g.invariants();
    let m: Vec<f64> = inv.m.iter().map(rational::to_f64).collect();
    let sm: Vec<f64> = m.iter().map(|v| v.sqrt()).collect();
    let mut b = vec![0.0; n * n];
    for x in 0..n {
        b[x * n + x] = 1.0;
        for (y, c) in g.neighbors(x) {
            b[x * n + y] = -rational::to_f64(c) / (sm[x] * sm[*y]);
        }
    }
    // Householder H = I − 2wwᵀ/wᵀw sends the unit kernel vector u to −sign(u₀)e₀
    let norm = sm.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u: Vec<f64> = sm.iter().map(|v| v / norm).collect();
    let mut w = u.clone();
    w[0] += u[0].signum() * 1.0;
    let ww: f64 = w.iter().map(|v| v * v).sum();
    let apply_h = |z: &mut [f64]| {
        let dot: f64 = w.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        let k = 2.0 * dot / ww;
        for (zi, wi) in z.iter_mut().zip(&w) {
            *zi -= k * wi;
        }
    };
    // HBH, computed column by column then row by row
    for col in 0..n {
        let mut z: Vec<f64> = (0..n).map(|r| b[r * n + col]).collect();
        apply_h(&mut z);
        for r in 0..n {
            b[r * n + col] = z[r];
        }
    }
    for r in 0..n {
        apply_h(&mut b[r * n..(r + 1) * n]);
    }
    let k = n - 1;
    let mut d = vec![0.0; k * k];
    for r in 0..k {
        for c in 0..k {
            d[r * k + c] = 0.5 * (b[(r + 1) * n + c + 1] + b[(c + 1) * n + r + 1]);
        }
    }
    let (vals, vecs, sweeps) = jacobi_eigen(d, k)?;
    let imin = (0..k).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("k ≥ 1");
    let gap = vals[imin];
    let mut z = vec![0.0; n];
    for r in 0..k {
        z[r + 1] = vecs[r * k + imin];
    }
    apply_h(&mut z);
    let mv = rational::to_f64(&inv.total_mass);
    let mut psi: Vec<f64> = z.iter().zip(&sm).map(|(a, s)| a / s * mv.sqrt()).collect();
    let lead = (0..n).max_by(|&a, &b| psi[a].abs().total_cmp(&psi[b].abs()).then(b.cmp(&a))).unwrap();
    if psi[lead] < 0.0 {
        psi.iter_mut().for_each(|v| *v = -*v);
    }
    let residual = (0..n)
        .map(|x| {
            let lap: f64 = g.neighbors(x).iter().map(|(y, c)| rational::to_f64(c) * (psi[x] - psi[*y])).sum();
            (lap / m[x] - gap * psi[x]).abs()
        })
        .fold(0.0, f64::max);
    let mut eigenvalues = vec![0.0];
    let mut rest = vals;
    rest.sort_by(f64::total_cmp);
    eigenvalues.extend(rest);
    Ok(SpectralResult { eigenvalues, gap, gap_vector: psi, residual, sweeps })
}

/// Exact solve of `L u = g` with `(u, 1)_{L²(μ)} = 0`.
pub fn resolvent_solve(g: &WeightedGraph, rhs: &[Rational]) -> Result<Vec<Rational>> {
    let n = g.len();
    if rhs.len() != n {
        return Err(Error::Invalid("right-hand side length does not match the graph".into()));
    }
    let inv = g.invariants();
    let mean: Rational = inv.mu.iter().zip(rhs).map(|(m, v)| m * v).sum();
    if !mean.is_zero() {
        return Err(Error::Precondition("right-hand side is not μ-mean zero".into()));
    }
    // Δu = m·g with u(v₀) = 0, then shift to μ-mean zero
    let b = g.base();
    let rest: Vec<usize> = (0..n).filter(|&x| x != b).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &x) in rest.iter().enumerate() {
        pos[x] = k;
    }
    let mut a = vec![vec![Rational::zero(); rest.len()]; rest.len()];
    for (r, &x) in rest.iter().enumerate() {
        for (y, c) in g.neighbors(x) {
            a[r][r] += c;
            if *y != b {
                a[r][pos[*y]] -= c;
            }
        }
    }
    let v = rest.iter().map(|&x| &inv.m[x] * &rhs[x]).collect();
    let sol = linalg::solve(a, v).expect("reduced Laplacian of a connected graph is nonsingular");
    let mut u = vec![Rational::zero(); n];
    for (k, &x) in rest.iter().enumerate() {
        u[x] = sol[k].clone();
    }
    let shift: Rational = inv.mu.iter().zip(&u).map(|(m, v)| m * v).sum();
    Ok(u.into_iter().map(|v| v - &shift).collect())
}

/// `L u` in exact arithmetic.
pub fn apply_l(g: &WeightedGraph, u: &[Rational]) -> Vec<Rational> {
    let lap = g.laplacian_rational(u, None).expect("length checked by caller");
    lap.into_iter().zip(&g.invariants().m).map(|(v, m)| v / m).collect()
}

pub fn mu_norm_sq(g: &WeightedGraph, f: &[Rational]) -> Rational {
    g.invariants().mu.iter().zip(f).map(|(m, v)| m * v * v).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareThreshold {
    pub a_value: f64,
    pub argmax_a: f64,
}

/// Smaller and larger roots of
/// `(E − 1/E)t² − 2(E − 2/E + 1)t + (1 − 2/E) = 0` with `E = e^a`.
pub fn b_roots_from_exp(e: f64) -> (f64, f64) {
    let alpha = e - 1.0 / e;
    let beta = e - 2.0 / e + 1.0;
    let gamma = 1.0 - 2.0 / e;
    let disc = (beta * beta - alpha * gamma).max(0.0).sqrt();
    // product of the roots is γ/α; this form keeps the small root accurate
    let small = gamma / (beta + disc);
    let large = (beta + disc) / alpha;
    (small, large)
}

pub fn b_roots(a: f64) -> (f64, f64) {
    b_roots_from_exp(a.exp())
}

/// Maximizes the smaller root over `a ∈ [a_min, a_max]`: grid search, then
/// golden-section refinement to `1e-6`.
pub fn poincare_threshold(a_min: f64, a_max: f64, step: f64) -> Result<PoincareThreshold> {
    if a_min <= std::f64::consts::LN_2 || a_max <= a_min || step <= 0.0 {
        return Err(Error::Precondition("need log 2 < a_min < a_max and step > 0".into()));
    }
    let f = |a: f64| b_roots(a).0;
    let steps = ((a_max - a_min) / step).ceil() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| (a_min + k as f64 * step).min(a_max)).collect();
    let best = (0..grid.len()).max_by(|&i, &j| f(grid[i]).total_cmp(&f(grid[j]))).unwrap();
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    while hi - lo > 1e-6 {
        if f(c) > f(d) {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - r * (hi - lo);
        d = lo + r * (hi - lo);
    }
    let argmax_a = 0.5 * (lo + hi);
    Ok(PoincareThreshold { a_value: f(argmax_a), argmax_a })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub lhs: Rational,
    pub rhs: Rational,
    pub holds: bool,
}

/// `Σ_{x∈U} f(x)(1/m(x))Δ_U f(x)μ(x) ≤ (ε/2)‖f‖²_{L²(μ)} + 𝓔(f,f)/(ε m(V))`.
pub fn energy_split_probe(g: &WeightedGraph, u: &VertexSet, f: &[Rational], eps: &Rational) -> Result<ProbeReport> {
    if !eps.is_positive() {
        return Err(Error::Precondition("ε must be positive".into()));
    }
    let mv = &g.invariants().total_mass;
    let lap_u = g.laplacian_rational(f, Some(u))?;
    let lhs: Rational = u.iter().map(|&x| &f[x] * &lap_u[x]).sum::<Rational>() / mv;
    let energy = dirichlet_energy(g, f, None).energy;
    let rhs = eps / rational::int(2) * mu_norm_sq(g, f) + energy / (eps * mv);
    let holds = lhs <= rhs;
    Ok(ProbeReport { lhs, rhs, holds })
}

/// Escape bound from the ball `V_n = {d(v₀,·) ≤ n}` of `g`:
/// `Σ_{x∈V_n, y∉V_n} f(x)² C_xy ≤ ρ_n Σ_{x∈V_n} f(x)² m(x)`.
/// Masses are those of `g`, so `g` should extend at least one ring past `V_n`.
pub fn escape_probe(g: &WeightedGraph, n: usize, f: &[Rational]) -> Result<(ProbeReport, Rational)> {
    let metric = g.metric_profile();
    if n == 0 || n > metric.d_g {
        return Err(Error::Precondition("radius must lie in 1..=d_G".into()));
    }
    let inv = g.invariants();
    let rho = rho_of_shell(g, &metric.dist, &metric.shells[n]);
    let mut lhs = Rational::zero();
    let mut mass = Rational::zero();
    for x in 0..g.len() {
        if metric.dist[x] > n {
            continue;
        }
        let f2 = &f[x] * &f[x];
        mass += &f2 * &inv.m[x];
        for (y, c) in g.neighbors(x) {
            if metric.dist[*y] > n {
                lhs += &f2 * c;
            }
        }
    }
    let rhs = &rho * mass;
    let holds = lhs <= rhs;
    Ok((ProbeReport { lhs, rhs, holds }, rho))
}

/// `max_{x∈S} (1 − m₋(x)/m(x))` using the masses of `g`.
pub fn rho_of_shell(g: &WeightedGraph, dist: &[usize], shell: &[usize]) -> Rational {
    let inv = g.invariants();
    shell
        .iter()
        .map(|&x| {
            let minus: Rational =
                g.neighbors(x).iter().filter(|(y, _)| dist[*y] + 1 == dist[x]).map(|(_, c)| c.clone()).sum();
            rational::int(1) - minus / &inv.m[x]
        })
        .max()
        .unwrap_or_else(Rational::zero)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicExtension {
    pub h: Vec<Rational>,
    pub gfloor: Vec<i64>,
    /// `Δh = 0` exactly on the annulus
    pub harmonic: bool,
    pub max_principle: bool,
    /// `max |Δ⌊h⌋(x)|/m(x)` over the annulus
    pub pointwise_max: Rational,
    /// `Σ_{annulus} |Δ⌊h⌋(x)|`, the L¹(m) norm of `(1/m)Δ⌊h⌋` there
    pub annulus_l1: Rational,
    pub annulus_mass: Rational,
}

impl HarmonicExtension {
    pub fn pointwise_ok(&self) -> bool {
        self.pointwise_max <= rational::int(2)
    }

    pub fn l1_ok(&self) -> bool {
        self.annulus_l1 <= rational::int(2) * &self.annulus_mass
    }
}

/// Harmonic extension of integer data `f` on `inner` to the rest of `g`.
/// Only the entries of `f` on `inner` are read.
pub fn harmonic_extension(g: &WeightedGraph, inner: &VertexSet, f: &[i64]) -> Result<HarmonicExtension> {
    let n = g.len();
    if inner.is_empty() || inner.len() >= n || inner.iter().any(|&x| x >= n) {
        return Err(Error::Precondition("inner set must be a nonempty proper vertex subset".into()));
    }
    let annulus: Vec<usize> = (0..n).filter(|x| !inner.contains(x)).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &x) in annulus.iter().enumerate() {
        pos[x] = k;
    }
    let inv = g.invariants();
    let mut a = vec![vec![Rational::zero(); annulus.len()]; annulus.len()];
    let mut rhs = vec![Rational::zero(); annulus.len()];
    for (r, &x) in annulus.iter().enumerate() {
        a[r][r] = inv.m[x].clone();
        for (y, c) in g.neighbors(x) {
            if inner.contains(y) {
                rhs[r] += c * rational::int(f[*y]);
            } else {
                a[r][pos[*y]] -= c;
            }
        }
    }
    let sol = linalg::solve(a, rhs).ok_or_else(|| Error::Structural("annulus is not connected to the inner set".into()))?;
    let h: Vec<Rational> = (0..n)
        .map(|x| if inner.contains(&x) { rational::int(f[x]) } else { sol[pos[x]].clone() })
        .collect();
    let gfloor: Vec<i64> = h
        .iter()
        .map(|v| num_traits::ToPrimitive::to_i64(&rational::floor_int(v)).expect("bounded by the data"))
        .collect();
    let lap_h = g.laplacian_rational(&h, None)?;
    let harmonic = annulus.iter().all(|&x| lap_h[x].is_zero());
    let bound = inner.iter().map(|&x| f[x].abs()).max().unwrap_or(0);
    let max_principle = h.iter().all(|v| v.abs() <= rational::int(bound));
    let lap_g = g.laplacian_apply(&gfloor, None)?;
    let mut pointwise_max = Rational::zero();
    let mut annulus_l1 = Rational::zero();
    let mut annulus_mass = Rational::zero();
    for &x in &annulus {
        let v = lap_g[x].abs();
        pointwise_max = pointwise_max.max(&v / &inv.m[x]);
        annulus_l1 += v;
        annulus_mass += &inv.m[x];
    }
    Ok(HarmonicExtension { h, gfloor, harmonic, max_principle, pointwise_max, annulus_l1, annulus_mass })
}
