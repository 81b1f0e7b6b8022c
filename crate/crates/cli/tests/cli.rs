use std::path::PathBuf;

use rrgraph::exhaustion::{exhaustion_series, InfiniteFamily};
use rrgraph::rational;
use rrgraph_cli::{run, EXIT_BUDGET, EXIT_INPUT, EXIT_OK, EXIT_STRUCTURAL, EXIT_USAGE};

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn golden(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", name].iter().collect();
    std::fs::read_to_string(p).unwrap()
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rrgraph").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn info_golden() {
    let (code, out, _) = call(&["info", &data("ex1.graph")]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, golden("info_ex1.txt"));
    assert!(out.contains("i_gcd     1/6") && out.contains("euler     1/6") && out.contains("m_common  6"));
}

#[test]
fn rr_check_golden() {
    let (code, out, _) = call(&["rr-check", &data("ex1.graph"), &data("d.divisor")]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, golden("rr_check_ex1.txt"));
    assert!(out.contains("lhs     1/3") && out.contains("rhs     1/3") && out.ends_with("HOLDS\n"));
}

#[test]
fn threshold_golden() {
    let (code, out, _) = call(&["threshold-A"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, golden("threshold_a.txt"));
    assert!(out.starts_with("A         0.0569"));
}

#[test]
fn family_golden() {
    let (code, out, _) = call(&["family", "ray-double-exp", "series", "--to", "4"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, golden("ray_series.txt"));
    let (code, out, _) = call(&[
        "family",
        "ray-double-exp",
        "rr-report",
        "--divisor",
        &data("half_at_root.divisor"),
        "--support-radius",
        "2",
        "--to",
        "3",
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, golden("ray_rr_report.txt"));
}

#[test]
fn output_is_deterministic() {
    let runs = [
        vec!["spectral".to_string(), data("ex1.graph"), "--probe".into(), "extension".into(), "--seed".into(), "7".into()],
        vec!["family".into(), "tree-double-exp".into(), "series".into(), "--to".into(), "3".into(), "--gaps".into()],
        vec![
            "family".into(),
            "ray-double-exp".into(),
            "converge".into(),
            "--divisor".into(),
            data("half_at_root.divisor"),
            "--support-radius".into(),
            "2".into(),
            "--to".into(),
            "5".into(),
            "--jobs".into(),
            "3".into(),
        ],
    ];
    for args in &runs {
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(call(&a), call(&a));
    }
}

#[test]
fn jobs_do_not_change_output() {
    let base = [
        "family",
        "ray-double-exp",
        "converge",
        "--divisor",
        &data("half_at_root.divisor"),
        "--support-radius",
        "2",
        "--to",
        "5",
    ]
    .map(String::from);
    let mut threaded = base.to_vec();
    threaded.extend(["--jobs".to_string(), "4".to_string()]);
    let a: Vec<&str> = base.iter().map(String::as_str).collect();
    let b: Vec<&str> = threaded.iter().map(String::as_str).collect();
    assert_eq!(call(&a), call(&b));
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    let p = path.to_string_lossy().into_owned();
    let (code, _, _) = call(&["family", "ray-double-exp", "series", "--to", "5", "--gaps", "--csv", &p, "--decimal", "8"]);
    assert_eq!(code, EXIT_OK);
    let series = exhaustion_series(&InfiniteFamily::ray_double_exp(), 5, false).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(&header[..6], ["n", "rho_n", "lambda_n", "e_n", "ratio43", "r_n"]);
    assert_eq!(header.len(), 10);
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 5);
    for (rec, row) in records.iter().zip(&series.rows) {
        assert_eq!(rec[0].parse::<usize>().unwrap(), row.n);
        for (k, want) in [(1, &row.rho), (3, &row.euler), (4, &row.ratio43)] {
            assert!(rec[k].contains('/'), "rational cells are p/q");
            assert_eq!(&rational::parse(&rec[k]).unwrap(), want);
        }
        let lambda: f64 = rec[2].parse().unwrap();
        assert!(lambda > 0.0);
        assert!(rec[5].is_empty());
    }
}

#[test]
fn converge_csv_carries_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.csv").to_string_lossy().into_owned();
    let (code, _, _) = call(&[
        "family",
        "ray-double-exp",
        "converge",
        "--divisor",
        &data("half_at_root.divisor"),
        "--support-radius",
        "2",
        "--to",
        "3",
        "--csv",
        &p,
    ]);
    assert_eq!(code, EXIT_OK);
    let mut reader = csv::Reader::from_path(&p).unwrap();
    let ranks: Vec<String> = reader.records().map(|r| r.unwrap()[5].to_string()).collect();
    assert_eq!(ranks, ["1/2", "1/2"]);
}

#[test]
fn exit_codes() {
    assert_eq!(call(&["info"]).0, EXIT_USAGE);
    assert_eq!(call(&["info", &data("ex1.graph"), "--no-such-flag"]).0, EXIT_USAGE);
    assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(call(&["--help"]).0, EXIT_OK);

    assert_eq!(call(&["info", &data("missing.graph")]).0, EXIT_INPUT);
    assert_eq!(call(&["rank", &data("ex1.graph"), &data("ex1.graph")]).0, EXIT_INPUT);
    assert_eq!(call(&["family", "no-such-preset", "series", "--to", "3"]).0, EXIT_INPUT);

    let (code, out, _) = call(&["rank", &data("k4.graph"), &data("k4.divisor"), "--budget", "3"]);
    assert_eq!(code, EXIT_BUDGET);
    assert!(out.contains("lower bound"));

    let (code, _, err) = call(&["info", &data("disconnected.graph")]);
    assert_eq!(code, EXIT_STRUCTURAL);
    assert!(err.contains("disconnected"));
    let (code, out, err) = call(&[
        "family",
        "ray-double-exp",
        "converge",
        "--divisor",
        &data("half_at_root.divisor"),
        "--support-radius",
        "2",
        "--to",
        "8",
    ]);
    assert_eq!(code, EXIT_STRUCTURAL);
    assert!(out.contains("4294967296") && err.contains("truncated at n = 7"));
}

#[test]
fn other_commands_run() {
    let g = data("ex1.graph");
    let d = data("d.divisor");
    for args in [
        vec!["reduce", &g, &d],
        vec!["winnable", &g, &d, "--brute", "4"],
        vec!["orders-rank", &g, &d],
        vec!["spectral", &g, "--probe", "lemma34"],
        vec!["spectral", &g, "--probe", "lemma33", "--eps", "1/2"],
        vec!["info", &g, "--base", "c"],
    ] {
        let (code, out, err) = call(&args);
        assert_eq!(code, EXIT_OK, "{args:?}: {err}");
        assert!(!out.is_empty());
    }
    let (_, out, _) = call(&["orders-rank", &g, &d]);
    assert!(out.contains("agree            true"));
    let (_, out, _) = call(&["winnable", &g, &d, "--brute", "4"]);
    assert!(out.contains("agree        true"));
}

#[test]
fn family_probes() {
    let (code, out, _) =
        call(&["family", "ray-double-exp", "orders", "--divisor", &data("half_at_root.divisor"), "--eps", "1/4"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("N(eps)                        2"));
    let (code, out, _) = call(&["family", "ray-double-exp", "extension", "--n", "2", "--to", "7"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("holds     yes"));
    let (code, _, _) = call(&["family", "ray-geometric", "--param", "ratio=1/3", "series", "--to", "4"]);
    assert_eq!(code, EXIT_OK);
    let (code, out, _) = call(&[
        "family",
        "lollipop",
        "--param",
        &format!("core={}", data("ex1.graph")),
        "--param",
        "attach=c",
        "series",
        "--to",
        "4",
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert_eq!(call(&["family", "ray-geometric", "--param", "ratio=2", "series", "--to", "3"]).0, EXIT_INPUT);
}
