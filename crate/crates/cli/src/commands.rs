use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrgraph::divisor::parse_divisor;
use rrgraph::exhaustion::{
    build_ball, eigen_extension_probe, exhaustion_series, infinite_rr_report, order_consistency_probe, rank_series,
    FamilyDivisor, InfiniteFamily, RankSeries, SeriesRow,
};
use rrgraph::rational::{self, Rational};
use rrgraph::spectral::{
    energy_split_probe, escape_probe, harmonic_extension, poincare_threshold, rayleigh_quotient, spectral_gap,
    b_roots_from_exp,
};
use rrgraph::{
    is_winnable, rank, rank_via_orders, reduce_divisor, rr_check, Divisor, RankStatus, WeightedGraph, WinMode,
};

use crate::format::{dec, pairs, rat, sig, table};
use crate::{Cli, Command, FamilyAction, Failure, Global, Probe, Window, EXIT_BUDGET, EXIT_OK};

type Outcome = Result<i32, Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Failure { code: crate::EXIT_INPUT, message: format!("{}: {e}", path.display()) })
}

fn load_graph(path: &Path, base: Option<&str>) -> Result<WeightedGraph, Failure> {
    let g = rrgraph::parse_graph(&read_text(path)?)?;
    match base {
        None => Ok(g),
        Some(b) => {
            let x = g.index_of(b).ok_or_else(|| rrgraph::Error::Invalid(format!("unknown base vertex `{b}`")))?;
            Ok(g.with_base(x)?)
        }
    }
}

fn load_divisor(g: &WeightedGraph, path: &Path, raw: bool) -> Result<Divisor, Failure> {
    Ok(parse_divisor(g, &read_text(path)?, raw)?)
}

fn divisor_line(g: &WeightedGraph, d: &Divisor) -> String {
    let parts: Vec<String> = d.support().iter().map(|&x| format!("{}:{}", g.name(x), rat(&d.value(g, x)))).collect();
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" ")
    }
}

fn status(s: RankStatus) -> &'static str {
    match s {
        RankStatus::Exact => "exact",
        RankStatus::BudgetExceeded => "lower bound (budget exceeded)",
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, Failure> {
    Ok(csv::Writer::from_path(path)?)
}

pub(crate) fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Info { graph } => info(g, graph, out),
        Command::Reduce { graph, divisor } => reduce(g, graph, divisor, out),
        Command::Winnable { graph, divisor, brute } => winnable(g, graph, divisor, *brute, out),
        Command::Rank { graph, divisor } => rank_cmd(g, graph, divisor, out),
        Command::RrCheck { graph, divisor } => rr_cmd(g, graph, divisor, out),
        Command::OrdersRank { graph, divisor } => orders_rank(g, graph, divisor, out),
        Command::Spectral { graph, probe, eps, radius, samples } => {
            spectral(g, graph, *probe, eps, *radius, *samples, out)
        }
        Command::Family { preset, params, action } => {
            let load = |p: &str| -> rrgraph::Result<WeightedGraph> {
                let text = fs::read_to_string(p).map_err(|e| rrgraph::Error::Invalid(format!("{p}: {e}")))?;
                rrgraph::parse_graph(&text)
            };
            let family = InfiniteFamily::from_preset(preset, params, &load)?;
            family_cmd(g, &family, action, out, err)
        }
        Command::ThresholdA { a_min, a_max, step } => threshold(*a_min, *a_max, *step, out),
    }
}

fn info(gl: &Global, path: &Path, out: &mut dyn Write) -> Outcome {
    let g = load_graph(path, gl.base.as_deref())?;
    let inv = g.invariants();
    writeln!(out, "graph: {} vertices, {} edges, base {}", g.len(), g.edges().len(), g.name(g.base()))?;
    let k = inv.canonical_values();
    let rows: Vec<Vec<String>> =
        (0..g.len()).map(|x| vec![g.name(x).to_string(), rat(&inv.m[x]), rat(&inv.i[x]), rat(&k[x])]).collect();
    table(out, &["vertex", "m", "i", "K"], &rows)?;
    pairs(
        out,
        &[
            ("i_gcd", rat(&inv.i_gcd)),
            ("euler", rat(&inv.euler)),
            ("deg K", rat(&k.iter().sum())),
            ("m_common", inv.m_common.to_string()),
            ("m(V)", rat(&inv.total_mass)),
        ],
    )?;
    if let Some(p) = &gl.csv {
        let mut w = csv_writer(p)?;
        w.write_record(["vertex", "m", "i", "K"])?;
        for x in 0..g.len() {
            w.write_record([g.name(x), &rational::to_pq(&inv.m[x]), &rational::to_pq(&inv.i[x]), &rational::to_pq(&k[x])])?;
        }
        w.flush()?;
    }
    Ok(EXIT_OK)
}

fn reduce(gl: &Global, graph: &Path, divisor: &Path, out: &mut dyn Write) -> Outcome {
    let g = load_graph(graph, gl.base.as_deref())?;
    let d = load_divisor(&g, divisor, gl.raw)?;
    let r = reduce_divisor(&g, &d, g.base())?;
    writeln!(out, "base {}", g.name(g.base()))?;
    let rows: Vec<Vec<String>> = (0..g.len())
        .map(|x| {
            vec![
                g.name(x).to_string(),
                rat(&d.value(&g, x)),
                r.reduced.ell[x].to_string(),
                rat(&r.reduced.value(&g, x)),
                r.firing.f[x].to_string(),
            ]
        })
        .collect();
    table(out, &["vertex", "D", "ell", "reduced", "firing"], &rows)?;
    pairs(
        out,
        &[
            ("degree", rat(&d.degree(&g))),
            ("winnable", (r.reduced.ell[g.base()] >= 0).to_string()),
            ("phase1_rounds", r.phase1_rounds.to_string()),
            ("phase2_fires", r.phase2_fires.to_string()),
        ],
    )?;
    if let Some(p) = &gl.csv {
        let mut w = csv_writer(p)?;
        w.write_record(["vertex", "ell", "value", "firing"])?;
        for x in 0..g.len() {
            w.write_record([
                g.name(x).to_string(),
                r.reduced.ell[x].to_string(),
                rational::to_pq(&r.reduced.value(&g, x)),
                r.firing.f[x].to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(EXIT_OK)
}

fn winnable(gl: &Global, graph: &Path, divisor: &Path, brute: Option<i64>, out: &mut dyn Write) -> Outcome {
    let g = load_graph(graph, gl.base.as_deref())?;
    let d = load_divisor(&g, divisor, gl.raw)?;
    let fast = is_winnable(&g, &d, g.base(), WinMode::Reduced)?;
    let mut items = vec![("winnable", fast.to_string())];
    if let Some(b) = brute {
        let slow = is_winnable(&g, &d, g.base(), WinMode::Brute(b))?;
        items.push(("brute force", format!("{slow} (|f| ≤ {b})")));
        items.push(("agree", (slow == fast).to_string()));
    }
    pairs(out, &items)?;
    Ok(EXIT_OK)
}

fn rank_cmd(gl: &Global, graph: &Path, divisor: &Path, out: &mut dyn Write) -> Outcome {
    let g = load_graph(graph, gl.base.as_deref())?;
    let d = load_divisor(&g, divisor, gl.raw)?;
    let r = rank(&g, &d, g.base(), gl.budget)?;
    let obstruction = r.obstruction.as_ref().map_or_else(|| "none".into(), |e| divisor_line(&g, e));
    pairs(
        out,
        &[
            ("rank", rat(&r.rank)),
            ("rank / i_gcd", r.k.to_string()),
            ("status", status(r.status).into()),
            ("obstruction", obstruction),
            ("tested", r.tested_count.to_string()),
        ],
    )?;
    Ok(if r.status == RankStatus::Exact { EXIT_OK } else { EXIT_BUDGET })
}

fn rr_cmd(gl: &Global, graph: &Path, divisor: &Path, out: &mut dyn Write) -> Outcome {
    let g = load_graph(graph, gl.base.as_deref())?;
    let d = load_divisor(&g, divisor, gl.raw)?;
    let r = rr_check(&g, &d, g.base(), gl.budget)?;
    let verdict = match r.holds {
        Some(true) => "HOLDS",
        Some(false) => "FAILS",
        None => "UNDECIDED (budget exceeded)",
    };
    pairs(
        out,
        &[
            ("deg D", rat(&d.degree(&g))),
            ("r(D)", format!("{} ({})", rat(&r.rank_d.rank), status(r.rank_d.status))),
            ("r(K-D)", format!("{} ({})", rat(&r.rank_kd.rank), status(r.rank_kd.status))),
            ("euler", rat(&g.invariants().euler)),
            ("lhs", rat(&r.lhs)),
            ("rhs", rat(&r.rhs)),
        ],
    )?;
    writeln!(out, "{verdict}")?;
    Ok(match r.holds {
        Some(true) => EXIT_OK,
        Some(false) => crate::EXIT_STRUCTURAL,
        None => EXIT_BUDGET,
    })
}

fn orders_rank(gl: &Global, graph: &Path, divisor: &Path, out: &mut dyn Write) -> Outcome {
    let g = load_graph(graph, gl.base.as_deref())?;
    let d = load_divisor(&g, divisor, gl.raw)?;
    let via = rank_via_orders(&g, &d, gl.budget)?;
    let direct = rank(&g, &d, g.base(), gl.budget)?;
    pairs(
        out,
        &[
            ("rank via orders", rat(&via)),
            ("rank", format!("{} ({})", rat(&direct.rank), status(direct.status))),
            ("agree", (via == direct.rank).to_string()),
        ],
    )?;
    Ok(if direct.status == RankStatus::Exact { EXIT_OK } else { EXIT_BUDGET })
}

fn random_function(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    (0..n).map(|_| rational::frac(rng.gen_range(-4..=4), rng.gen_range(1..=4))).collect()
}

fn spectral(
    gl: &Global,
    graph: &Path,
    probe: Option<Probe>,
    eps: &str,
    radius: usize,
    samples: usize,
    out: &mut dyn Write,
) -> Outcome {
    let g = load_graph(graph, gl.base.as_deref())?;
    let s = spectral_gap(&g)?;
    let eigen: Vec<String> = s.eigenvalues.iter().map(|v| sig(*v)).collect();
    pairs(
        out,
        &[
            ("eigenvalues", eigen.join(" ")),
            ("gap", sig(s.gap)),
            ("rayleigh(psi)", sig(rayleigh_quotient(&g, &s.gap_vector))),
            ("residual", sig(s.residual)),
            ("sweeps", s.sweeps.to_string()),
        ],
    )?;
    if let Some(p) = &gl.csv {
        let mut w = csv_writer(p)?;
        w.write_record(["k", "eigenvalue"])?;
        for (k, v) in s.eigenvalues.iter().enumerate() {
            w.write_record([k.to_string(), sig(*v)])?;
        }
        w.flush()?;
    }
    let Some(probe) = probe else { return Ok(EXIT_OK) };
    let metric = g.metric_profile();
    let ball: BTreeSet<usize> = (0..g.len()).filter(|&x| metric.dist[x] <= radius).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(gl.seed);
    let mut rows = Vec::new();
    let mut all = true;
    match probe {
        Probe::Lemma33 => {
            let eps = rational::parse(eps).ok_or_else(|| rrgraph::Error::Invalid(format!("invalid ε `{eps}`")))?;
            for k in 0..samples {
                let f = random_function(&mut rng, g.len());
                let r = energy_split_probe(&g, &ball, &f, &eps)?;
                all &= r.holds;
                rows.push(vec![k.to_string(), rat(&r.lhs), rat(&r.rhs), r.holds.to_string()]);
            }
            writeln!(out, "energy split on the ball of radius {radius}, eps {}", rat(&eps))?;
            table(out, &["sample", "lhs", "rhs", "holds"], &rows)?;
        }
        Probe::Lemma34 => {
            let mut rho = Rational::from_integer(0.into());
            for k in 0..samples {
                let f = random_function(&mut rng, g.len());
                let (r, p) = escape_probe(&g, radius, &f)?;
                rho = p;
                all &= r.holds;
                rows.push(vec![k.to_string(), rat(&r.lhs), rat(&r.rhs), r.holds.to_string()]);
            }
            writeln!(out, "escape bound from the ball of radius {radius}, rho {}", rat(&rho))?;
            table(out, &["sample", "lhs", "rhs", "holds"], &rows)?;
        }
        Probe::Extension => {
            for k in 0..samples {
                let f: Vec<i64> = (0..g.len()).map(|_| rng.gen_range(-3..=3)).collect();
                let h = harmonic_extension(&g, &ball, &f)?;
                let ok = h.harmonic && h.max_principle && h.pointwise_ok() && h.l1_ok();
                all &= ok;
                rows.push(vec![
                    k.to_string(),
                    h.harmonic.to_string(),
                    h.max_principle.to_string(),
                    rat(&h.pointwise_max),
                    rat(&h.annulus_l1),
                    ok.to_string(),
                ]);
            }
            writeln!(out, "harmonic extension from the ball of radius {radius}")?;
            table(out, &["sample", "harmonic", "max_principle", "max|Δg|/m", "annulus_l1", "ok"], &rows)?;
        }
    }
    writeln!(out, "{}", if all { "ALL HOLD" } else { "VIOLATION" })?;
    Ok(if all { EXIT_OK } else { crate::EXIT_STRUCTURAL })
}

fn threshold(a_min: f64, a_max: f64, step: f64, out: &mut dyn Write) -> Outcome {
    let t = poincare_threshold(a_min, a_max, step)?;
    pairs(
        out,
        &[
            ("A", sig(t.a_value)),
            ("argmax a", sig(t.argmax_a)),
            ("B(log 2)", sig(b_roots_from_exp(2.0).0)),
        ],
    )?;
    Ok(EXIT_OK)
}

fn family_divisor(gl: &Global, family: &InfiniteFamily, path: &Path, l: usize) -> Result<FamilyDivisor, Failure> {
    if l == 0 {
        return Err(rrgraph::Error::Precondition("support radius must be at least 1".into()).into());
    }
    let ball = build_ball(family, l)?;
    let d = load_divisor(&ball.graph, path, gl.raw)?;
    Ok(FamilyDivisor::from_divisor(&ball.graph, &d))
}

const CSV_HEADER: [&str; 6] = ["n", "rho_n", "lambda_n", "e_n", "ratio43", "r_n"];

fn write_series_csv(path: &Path, rows: &[SeriesRow], decimal: Option<usize>) -> Result<(), Failure> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = CSV_HEADER.iter().map(|s| s.to_string()).collect();
    if decimal.is_some() {
        header.extend(["rho_n_dec", "e_n_dec", "ratio43_dec", "r_n_dec"].map(String::from));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.n.to_string(),
            rational::to_pq(&r.rho),
            r.lambda.map(sig).unwrap_or_default(),
            rational::to_pq(&r.euler),
            rational::to_pq(&r.ratio43),
            r.rank.as_ref().map(rational::to_pq).unwrap_or_default(),
        ];
        if let Some(d) = decimal {
            rec.extend([
                dec(&r.rho, d),
                dec(&r.euler, d),
                dec(&r.ratio43, d),
                r.rank.as_ref().map(|v| dec(v, d)).unwrap_or_default(),
            ]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn series_table(out: &mut dyn Write, rows: &[SeriesRow], decimal: Option<usize>) -> io::Result<()> {
    let mut header = vec!["n", "rho_n", "lambda_n", "e_n", "ratio43", "r_n"];
    if decimal.is_some() {
        header.extend(["rho_n ~", "e_n ~"]);
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![
                r.n.to_string(),
                rat(&r.rho),
                r.lambda.map(sig).unwrap_or_else(|| "-".into()),
                rat(&r.euler),
                rat(&r.ratio43),
                r.rank.as_ref().map(rat).unwrap_or_else(|| "-".into()),
            ];
            if let Some(d) = decimal {
                v.extend([dec(&r.rho, d), dec(&r.euler, d)]);
            }
            v
        })
        .collect();
    table(out, &header, &body)
}

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.into()
}

/// Exit code for a rank series: budget bounds first, then truncation.
fn series_code(s: &RankSeries, err: &mut dyn Write) -> Outcome {
    if let Some((n, e)) = &s.truncated {
        writeln!(err, "series truncated at n = {n}: {e}")?;
    }
    if s.rows.iter().any(|r| !r.exact) {
        return Ok(EXIT_BUDGET);
    }
    Ok(match &s.truncated {
        Some((_, e)) => Failure::from(e.clone()).code,
        None => EXIT_OK,
    })
}

fn family_cmd(
    gl: &Global,
    family: &InfiniteFamily,
    action: &FamilyAction,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Outcome {
    match action {
        FamilyAction::Series { to, gaps } => {
            let s = exhaustion_series(family, *to, *gaps)?;
            writeln!(out, "family {}, n = 1..{to}", s.family)?;
            series_table(out, &s.rows, gl.decimal)?;
            pairs(
                out,
                &[
                    ("threshold A", sig(s.threshold_a)),
                    ("first n with rho_n < A", s.first_below_a.map_or_else(|| "none".into(), |n| n.to_string())),
                    ("ratio43 strictly decreasing", yes_no(s.ratio43_decreasing)),
                ],
            )?;
            if let Some(p) = &gl.csv {
                write_series_csv(p, &s.rows, gl.decimal)?;
            }
            Ok(EXIT_OK)
        }
        FamilyAction::Converge { window, gaps } => {
            let Window { divisor, support_radius: l, to, stable } = window;
            let d = family_divisor(gl, family, divisor, *l)?;
            let rs = rank_series(family, &d, *l, *to, gl.budget, *stable, gl.jobs)?;
            let es = exhaustion_series(family, *to, *gaps)?;
            let mut rows: Vec<SeriesRow> = Vec::new();
            for r in &rs.rows {
                let mut row = es.rows[r.n - 1].clone();
                row.rank = Some(r.rank.clone());
                rows.push(row);
            }
            writeln!(out, "family {}, D = {}, l = {l}", family.name(), family_line(&d))?;
            let body: Vec<Vec<String>> = rs
                .rows
                .iter()
                .map(|r| {
                    let rr = match r.rr_holds {
                        Some(true) => "holds",
                        Some(false) => "FAILS",
                        None => "bound only",
                    };
                    vec![
                        r.n.to_string(),
                        rat(&r.rank),
                        rat(&r.rank_dual),
                        rat(&r.degree),
                        rat(&r.euler),
                        rr.to_string(),
                    ]
                })
                .collect();
            table(out, &["n", "r_n(D)", "r_n(K-D)", "deg D", "e_n", "RR"], &body)?;
            pairs(
                out,
                &[
                    ("stable suffix", rs.stable_suffix.to_string()),
                    ("stabilized", yes_no(rs.stabilized)),
                ],
            )?;
            if let Some(p) = &gl.csv {
                write_series_csv(p, &rows, gl.decimal)?;
            }
            series_code(&rs, err)
        }
        FamilyAction::RrReport { window, alt_divisor, alt_radius } => {
            let Window { divisor, support_radius: l, to, stable } = window;
            let d = family_divisor(gl, family, divisor, *l)?;
            let alt = match (alt_divisor, alt_radius) {
                (Some(p), Some(l2)) => Some((family_divisor(gl, family, p, *l2)?, *l2)),
                _ => None,
            };
            let rep = infinite_rr_report(
                family,
                &d,
                *l,
                *to,
                gl.budget,
                *stable,
                gl.jobs,
                alt.as_ref().map(|(d2, l2)| (d2, *l2)),
            )?;
            let last = rep.series.rows.last().map_or(0, |r| r.n);
            let mut items = vec![
                ("family", family.name().to_string()),
                ("D", family_line(&d)),
                ("window", format!("n = {l}..{last}")),
                ("r_hat(D)", rat(&rep.r_hat)),
                ("r_hat(K-D)", rat(&rep.r_hat_dual)),
                ("e_hat", rat(&rep.e_hat)),
                ("deg D", rat(&rep.degree)),
                ("residual", rat(&rep.residual)),
                ("finite RR at every n", yes_no(rep.per_radius_exact)),
                ("verdict", format!("{} (last {} values of r_n equal)", rep.verdict, rep.series.stable_suffix)),
                ("decay condition on ratio43", if rep.decay_condition { "met".into() } else { "unmet".into() }),
            ];
            if let Some(c) = &rep.support_tail {
                items.push(("larger support l'", c.l_alt.to_string()));
                items.push(("|r(D) - r(D')|", rat(&c.observed)));
                items.push(("deg+ + deg- of D' - D", rat(&c.bound)));
                items.push(("tail bound", if c.holds { "holds".into() } else { "FAILS".into() }));
            }
            pairs(out, &items)?;
            writeln!(out, "note: values stabilize over a finite window; no limit is claimed")?;
            series_code(&rep.series, err)
        }
        FamilyAction::Orders { radius, eps, divisor } => {
            let eps = rational::parse(eps).ok_or_else(|| rrgraph::Error::Invalid(format!("invalid ε `{eps}`")))?;
            let d = match divisor {
                Some(p) => family_divisor(gl, family, p, *radius)?,
                None => FamilyDivisor::default(),
            };
            let rep = order_consistency_probe(family, *radius, &eps, &d, gl.budget)?;
            let literal = match rep.literal_bound {
                Some(true) => "holds",
                Some(false) => "fails",
                None => "undecided",
            };
            pairs(
                out,
                &[
                    ("family", family.name().to_string()),
                    ("small ball radius", rep.n_small.to_string()),
                    ("N(eps)", rep.tail_radius.to_string()),
                    ("m(V \\ V_N) in", format!("[{}, {}]", sig(rational::to_f64(&rep.tail_mass.0)), sig(rational::to_f64(&rep.tail_mass.1)))),
                    ("orders", rep.order_count.to_string()),
                    ("min over orders", rat(&rep.unrestricted_min)),
                    ("rank", rat(&rep.rank)),
                    ("min = rank + i_gcd", yes_no(rep.min_matches_rank)),
                    ("pairs agreeing on V_N", rep.pairs_checked.to_string()),
                    ("max nu difference", rat(&rep.max_nu_difference)),
                    ("m+(S_N)", rat(&rep.shell_outflow)),
                    ("diff < m(V \\ V_N)", literal.into()),
                    ("diff <= m(V \\ V_N) + m+(S_N)", yes_no(rep.corrected_bound)),
                ],
            )?;
            Ok(if rep.min_matches_rank && rep.corrected_bound { EXIT_OK } else { crate::EXIT_STRUCTURAL })
        }
        FamilyAction::Extension { n, to } => {
            let rep = eigen_extension_probe(family, *n, *to)?;
            pairs(
                out,
                &[
                    ("family", family.name().to_string()),
                    ("n", rep.n.to_string()),
                    ("N", rep.truncation.to_string()),
                    ("lambda_n", sig(rep.lambda)),
                    ("rho_n", rat(&rep.rho)),
                    ("m_n(V_n)", rat(&rep.ball_mass)),
                    ("energy", sig(rep.energy)),
                    ("tail", sig(rep.tail)),
                    ("bound", sig(rep.bound)),
                    ("slack", sig(rep.slack)),
                    ("holds", yes_no(rep.holds)),
                ],
            )?;
            Ok(if rep.holds { EXIT_OK } else { crate::EXIT_STRUCTURAL })
        }
    }
}

fn family_line(d: &FamilyDivisor) -> String {
    if d.entries().is_empty() {
        return "0".into();
    }
    d.entries().iter().map(|(k, v)| format!("{k}:{}", rat(v))).collect::<Vec<_>>().join(" ")
}
