use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use spectrafree_core::io::{read_table, write_table, Table};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectrafree")).args(args).output().expect("binary runs")
}

/// Runs a command writing into `out` and returns its report.
fn ok(out: &Path, args: &[&str]) -> Value {
    let mut all: Vec<&str> = args.to_vec();
    let o = out.to_str().unwrap();
    all.extend(["--out", o]);
    let res = run(&all);
    assert!(res.status.success(), "{args:?}: {}", String::from_utf8_lossy(&res.stderr));
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn table(dir: &Path, name: &str) -> Table {
    read_table(dir.join(name)).unwrap()
}

fn col<'a>(t: &'a Table, name: &str) -> &'a [f64] {
    t.column(name).unwrap_or_else(|| panic!("no column {name}"))
}

fn metric(r: &Value, name: &str) -> f64 {
    r["metrics"][name].as_f64().unwrap_or_else(|| panic!("no metric {name}"))
}

fn signal_file(dir: &Path, n: usize) -> PathBuf {
    let f: Vec<f64> = (0..n).map(|i| (0.37 * i as f64).sin() + 0.01 * (i % 7) as f64).collect();
    let path = dir.join("signal.csv");
    write_table(&path, &["f"], &[&f]).unwrap();
    path
}

#[test]
fn two_node_diffusion_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["kernel", "--graph", "complete:2", "--laplacian", "comb", "--filter", "diffusion:0.5"];
    let want = [(1.0 + (-1.0f64).exp()) / 2.0, (1.0 - (-1.0f64).exp()) / 2.0];
    for (method, tol) in [("oracle", 1e-14), ("pade:7", 1e-6), ("cheb-rational:20", 1e-6)] {
        let out = dir.path().join(method.replace(':', "_"));
        let mut args = base.to_vec();
        args.extend(["--method", method]);
        ok(&out, &args);
        let got = col(&table(&out, "kernel.csv"), "p0").to_vec();
        assert!(got.iter().zip(&want).all(|(g, w)| (g - w).abs() <= tol), "{method}: {got:?}");
    }
}

#[test]
fn identity_kernel_is_a_delta_and_checks_are_recomputable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &["kernel", "--graph", "random:20:10:3", "--filter", "identity", "--nodes", "4"]);
    let t = table(out, "kernel.csv");
    let p = col(&t, "p4");
    assert!(p.iter().enumerate().all(|(i, v)| (*v - if i == 4 { 1.0 } else { 0.0 }).abs() <= 1e-14));

    let r = ok(
        out,
        &[
            "kernel",
            "--graph",
            "random:40:30:1",
            "--filter",
            "mexican",
            "--scales",
            "0.5,2",
            "--seeds",
            "3",
            "--method",
            "cheb-rational:20",
            "--check",
        ],
    );
    let (k, o) = (table(out, "kernel.csv"), table(out, "kernel_oracle.csv"));
    assert_eq!(k.columns.len(), 7);
    let (mut linf, mut l2) = (0.0f64, 0.0f64);
    for (a, b) in k.columns[1..].iter().zip(&o.columns[1..]) {
        let dn = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dm = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let e2 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let ei = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        l2 = l2.max(e2 / dn);
        linf = linf.max(ei / dm);
    }
    assert!((metric(&r, "max_relative_l2") - l2).abs() <= 1e-12 * (1.0 + l2));
    assert!((metric(&r, "max_relative_linf") - linf).abs() <= 1e-12 * (1.0 + linf));
    assert!(l2 <= 1e-4, "{l2}");
}

#[test]
fn mesh_inputs_load() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(dir.path(), &["kernel", "--mesh", "torus:8:6", "--filter", "diffusion:1", "--nodes", "0,10"]);
    assert_eq!(r["nodes"], 48);
    assert_eq!(table(dir.path(), "kernel.csv").columns.len(), 3);
}

#[test]
fn compare_reports_errors_against_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let r = ok(
        out,
        &[
            "compare",
            "--graph",
            "random:200:300:1",
            "--filter",
            "diffusion:1",
            "--methods",
            "oracle,pade:7,truncated:100,cheb:4,cheb:8,cheb:16",
            "--trials",
            "4",
        ],
    );
    let t = table(out, "compare.csv");
    assert_eq!(col(&t, "trial"), [0.0, 1.0, 2.0, 3.0]);
    assert!(col(&t, "oracle.l2").iter().all(|&e| e == 0.0));
    let pade = col(&t, "pade:7.l2");
    let trunc = col(&t, "truncated:100.l2");
    assert!(pade.iter().zip(trunc).all(|(p, q)| p < q));
    let c: Vec<f64> = ["cheb:4", "cheb:8", "cheb:16"].iter().map(|m| metric(&r, &format!("{m}.l2.median"))).collect();
    assert!(c[0] > c[1] && c[1] > c[2], "{c:?}");

    // Aggregates match the per-trial table.
    for m in ["pade:7", "truncated:100", "cheb:8"] {
        let mut e = col(&t, &format!("{m}.l2")).to_vec();
        let max = e.iter().copied().fold(0.0, f64::max);
        e.sort_by(f64::total_cmp);
        let med = 0.5 * (e[1] + e[2]);
        assert!((metric(&r, &format!("{m}.l2.max")) - max).abs() <= 1e-12 * max);
        assert!((metric(&r, &format!("{m}.l2.median")) - med).abs() <= 1e-12 * med);
    }
    assert!(r["solver"]["pade:7"]["all_converged"].as_bool().unwrap());
}

#[test]
fn compare_is_deterministic_in_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args =
        ["compare", "--graph", "random:50:40:2", "--filter", "diffusion:1", "--methods", "cheb:6", "--trials", "3"];
    let read = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let mut a = args.to_vec();
        a.extend(["--rng-seed", seed]);
        ok(&out, &a);
        std::fs::read_to_string(out.join("compare.csv")).unwrap()
    };
    assert_eq!(read("a", "9"), read("b", "9"));
    assert_ne!(read("a", "9"), read("c", "10"));
}

#[test]
fn reconstruction_curve_on_an_eigenbasis() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let sig = signal_file(out, 30);
    let r =
        ok(out, &["reconstruct", "--graph", "random:30:20:5", "--signal", sig.to_str().unwrap(), "--basis", "eigs:30"]);
    let curve = table(out, "curve.csv");
    assert_eq!(col(&curve, "k").len(), 30);
    assert!(*col(&curve, "l2").last().unwrap() <= 1e-8);
    assert_eq!(metric(&r, "l2_increases"), 0.0);
    let fits = table(out, "fits.csv");
    let f = col(&fits, "signal");
    let mean = f.iter().sum::<f64>() / 30.0;
    assert!(col(&fits, "k=1").iter().all(|v| (v - mean).abs() <= 1e-12));
    // The curve is recomputable from the fits.
    for (i, k) in col(&curve, "k").iter().enumerate() {
        let fit = col(&fits, &format!("k={k}"));
        let e = f.iter().zip(fit).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let n = f.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!((e / n - col(&curve, "l2")[i]).abs() <= 1e-12);
    }
    assert!(r["inputs"][sig.to_str().unwrap()].as_str().unwrap().len() == 64);
}

#[test]
fn smoothing_and_seed_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let sig = signal_file(out, 40);
    let s = sig.to_str().unwrap();
    let r = ok(
        out,
        &["smooth", "--graph", "random:40:30:7", "--signal", s, "--noise", "0", "--seeds", "40", "--scales", "0.1"],
    );
    assert!(metric(&r, "l2") <= 1e-8, "{}", metric(&r, "l2"));
    let t = table(out, "smoothed.csv");
    assert_eq!(col(&t, "clean"), col(&t, "noisy"));

    let sig = signal_file(out, 128);
    let a = [
        "smooth",
        "--mesh",
        "torus:16:8",
        "--signal",
        sig.to_str().unwrap(),
        "--noise",
        "0.05",
        "--seeds",
        "8",
        "--sweep",
        "4,32",
        "--trials",
        "3",
    ];
    let r1 = ok(&out.join("one"), &a);
    let trials = table(&out.join("one"), "sweep_trials.csv");
    assert_eq!(col(&trials, "k").len(), 6);
    let sweep = table(&out.join("one"), "sweep.csv");
    let mut e: Vec<f64> = col(&trials, "l2")[..3].to_vec();
    e.sort_by(f64::total_cmp);
    assert_eq!(col(&sweep, "l2_median")[0], e[1]);
    let r2 = ok(&out.join("two"), &a);
    assert_eq!(r1["metrics"], r2["metrics"]);
    assert_eq!(
        std::fs::read_to_string(out.join("one/smoothed.csv")).unwrap(),
        std::fs::read_to_string(out.join("two/smoothed.csv")).unwrap()
    );
}

#[test]
fn density_moments_of_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(dir.path(), &["density", "--graph", "path:3", "--moments", "8", "--points", "11"]);
    // Random-walk eigenvalues 0, 1, 2 map to -1, 0, 1.
    let mu = col(&table(dir.path(), "moments.csv"), "mu").to_vec();
    for (k, m) in mu.iter().enumerate() {
        let want = [-1.0f64, 0.0, 1.0].iter().map(|x| (k as f64 * x.acos()).cos()).sum::<f64>() / 3.0;
        assert!((m - want).abs() <= 1e-12, "mu_{k} = {m}");
    }
    assert_eq!(metric(&r, "mu0"), 1.0);
    let d = table(dir.path(), "density.csv");
    assert_eq!(col(&d, "x").len(), 11);
}

#[test]
fn pseudospectrum_of_a_diagonal_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "0,0,0\n0,1,0\n0,0,3\n").unwrap();
    let r = ok(
        dir.path(),
        &[
            "pseudospec",
            "--matrix",
            m.to_str().unwrap(),
            "--epsilon",
            "0.1,0.6",
            "--from",
            "-0.5",
            "--to",
            "3.5",
            "--points",
            "81",
        ],
    );
    let t = table(dir.path(), "pseudospec.csv");
    for (i, &z) in col(&t, "z").iter().enumerate() {
        let dist = [0.0f64, 1.0, 3.0].iter().map(|l| (z - l).abs()).fold(f64::INFINITY, f64::min);
        assert!((col(&t, "margin")[i] - dist).abs() <= 1e-12);
        // Grid points on the boundary itself are decided by rounding.
        if (dist - 0.1).abs() > 1e-9 {
            assert_eq!(col(&t, "member@0.1")[i] == 1.0, dist < 0.1, "z = {z}");
        }
    }
    let iv = &r["extra"]["pseudospectra"][1]["intervals"];
    assert_eq!(iv.as_array().unwrap().len(), 2);
    assert!((iv[0][1].as_f64().unwrap() - 1.6).abs() <= 1e-12);

    std::fs::write(&m, "0,1\n0,0\n").unwrap();
    assert_eq!(
        run(&["pseudospec", "--matrix", m.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn characteristic_polynomials() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["charpoly", "--eigenvalues", "2,1,1"]);
    assert_eq!(col(&table(dir.path(), "charpoly.csv"), "coefficient"), [-2.0, 5.0, -4.0, 1.0]);
    assert_eq!(col(&table(dir.path(), "groups.csv"), "multiplicity"), [2.0, 1.0]);

    // Combinatorial Laplacian of the path on 3 nodes: λ(λ-1)(λ-3).
    ok(dir.path(), &["charpoly", "--graph", "path:3", "--laplacian", "comb"]);
    let c = col(&table(dir.path(), "charpoly.csv"), "coefficient").to_vec();
    assert!(c.iter().zip([0.0, 3.0, -4.0, 1.0]).all(|(a, b)| (a - b).abs() <= 1e-12), "{c:?}");
}

#[test]
fn commute_time_distances() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["distance", "--graph", "complete:2", "--laplacian", "comb", "--pairs", "0-1,1-1"]);
    let d = col(&table(dir.path(), "distances.csv"), "distance").to_vec();
    assert!((d[0] - 0.5f64.sqrt()).abs() <= 1e-12 && d[1] == 0.0);

    ok(dir.path(), &["distance", "--graph", "path:5", "--source", "0", "--method", "oracle"]);
    let d = col(&table(dir.path(), "distances.csv"), "distance").to_vec();
    assert_eq!(d.len(), 5);
    assert!(d[0] == 0.0 && d.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn exit_codes_separate_input_and_numerical_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = |args: &[&str]| {
        let mut a = args.to_vec();
        a.extend(["--out", out]);
        run(&a).status.code()
    };
    assert_eq!(code(&["kernel", "--graph", "missing.txt", "--filter", "identity"]), Some(2));
    assert_eq!(code(&["kernel", "--graph", "path:3", "--filter", "bogus"]), Some(2));
    assert_eq!(code(&["kernel", "--graph", "path:3", "--filter", "identity", "--nodes", "9"]), Some(2));
    assert_eq!(code(&["kernel", "--filter", "identity"]), Some(2));
    assert_eq!(code(&["no-such-command"]), Some(2));
    let sig = signal_file(dir.path(), 4);
    assert_eq!(
        code(&["reconstruct", "--graph", "path:5", "--signal", sig.to_str().unwrap(), "--basis", "eigs:3"]),
        Some(2)
    );
    // A strongly decaying filter makes the Padé denominator too ill-conditioned to solve.
    assert_eq!(
        code(&[
            "kernel",
            "--graph",
            "random:300:600:2",
            "--laplacian",
            "comb",
            "--filter",
            "diffusion:200",
            "--method",
            "pade:7"
        ]),
        Some(3)
    );
}
