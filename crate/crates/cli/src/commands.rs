use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use spectrafree_core::apps::{
    add_gaussian_noise, build_basis, least_squares_projection, reconstruction_curve, relative_errors, BasisOptions,
    BasisSpec, DEFAULT_DIFFUSION_SCALES,
};
use spectrafree_core::graph::{farthest_point_sampling, EdgeLength};
use spectrafree_core::io::{read_table, write_table};
use spectrafree_core::oracle::{dense_eigen, EigenSystem};
use spectrafree_core::sparse::SolveReport;
use spectrafree_core::spectrum::{
    characteristic_polynomial, group_eigenvalues, pseudo_spectrum_query, smooth_density_from_moments,
    spectral_density_moments, MappedOperator, MomentMethod,
};
use spectrafree_core::{Error, FilterEngine, FilterSpec, Method};

use crate::input::{digest_file, parse_list, parse_sweep, read_signal, GraphArgs, Loaded};
use crate::report::{median, ExperimentReport, SolverSummary};

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Directory for the CSV outputs and report.json.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
}

impl RunArgs {
    fn prepare(&self) -> Result<ExperimentReport> {
        std::fs::create_dir_all(&self.out)
            .map_err(Error::from)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(ExperimentReport::new(self.rng_seed))
    }
}

fn start_report(run: &RunArgs, loaded: &Loaded) -> Result<ExperimentReport> {
    let mut report = run.prepare()?;
    report.inputs.extend(loaded.digests.iter().cloned());
    report.laplacian = format!("{:?}", loaded.lap.kind());
    report.nodes = loaded.lap.n();
    report.warnings.extend(loaded.warnings.iter().cloned());
    Ok(report)
}

/// Parses a filter, recording the digest of a backing file if there is one.
fn parse_filter(spec: &str, report: &mut ExperimentReport) -> Result<FilterSpec> {
    let filter = FilterSpec::parse(spec).with_context(|| format!("filter {spec:?}"))?;
    if let Some((_, arg)) = spec.split_once(':') {
        let p = Path::new(arg);
        if matches!(filter, FilterSpec::Rational { .. } | FilterSpec::Chebyshev { .. } | FilterSpec::Tabulated { .. }) {
            let (k, v) = digest_file(p)?;
            report.inputs.insert(k, v);
        }
    }
    Ok(filter)
}

fn parse_method(spec: &str) -> Result<Method> {
    Ok(spec.trim().parse::<Method>().with_context(|| format!("method {spec:?}"))?)
}

fn write_csv(report: &mut ExperimentReport, dir: &Path, name: &str, header: &[&str], cols: &[&[f64]]) -> Result<()> {
    let path = dir.join(name);
    write_table(&path, header, cols).with_context(|| format!("writing {}", path.display()))?;
    report.output(&path);
    Ok(())
}

fn indices(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

fn scales_or(spec: &Option<String>, default: &[f64]) -> Result<Vec<f64>> {
    match spec {
        Some(s) => {
            let v: Vec<f64> = parse_list(s, "scale")?;
            if v.is_empty() || v.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
                bail!(Error::Argument(format!("scales must be positive, got {s:?}")));
            }
            Ok(v)
        }
        None => Ok(default.to_vec()),
    }
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    pub input: GraphArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Filter, e.g. `diffusion:0.5`, `commute-time`, `mexican:1`.
    #[arg(long)]
    pub filter: String,
    /// `oracle`, `cheb:N`, `pade:R`, `cheb-pade:R` or `cheb-rational:K`.
    #[arg(long, default_value = "cheb-rational:20")]
    pub method: String,
    /// Explicit centre nodes, comma-separated.
    #[arg(long, conflicts_with = "seeds")]
    pub nodes: Option<String>,
    /// Number of centres picked by farthest-point sampling.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub fps_start: usize,
    /// Scales substituted into the filter, comma-separated.
    #[arg(long)]
    pub scales: Option<String>,
    /// Also evaluate with the dense oracle and report the relative errors.
    #[arg(long)]
    pub check: bool,
}

pub fn kernel(a: &KernelArgs) -> Result<ExperimentReport> {
    let loaded = a.input.load()?;
    let mut report = start_report(&a.run, &loaded)?;
    let base = parse_filter(&a.filter, &mut report)?;
    let method = parse_method(&a.method)?;
    let n = loaded.lap.n();
    let nodes: Vec<usize> = match (&a.nodes, a.seeds) {
        (Some(s), _) => parse_list(s, "node")?,
        (None, Some(k)) => farthest_point_sampling(&loaded.graph, k, a.fps_start, EdgeLength::Weight)?,
        (None, None) => vec![0],
    };
    if let Some(&p) = nodes.iter().find(|&&p| p >= n) {
        bail!(Error::Argument(format!("node {p} out of range for {n} nodes")));
    }
    let filters: Vec<(Option<f64>, FilterSpec)> = match &a.scales {
        Some(_) => {
            scales_or(&a.scales, &[])?.into_iter().map(|t| Ok((Some(t), base.at_scale(t)?))).collect::<Result<_>>()?
        }
        None => vec![(None, base.clone())],
    };
    let engine = FilterEngine::new(&loaded.lap, a.input.solver()?);
    let mut labels = Vec::new();
    let mut columns = Vec::new();
    let mut reports: Vec<SolveReport> = Vec::new();
    let t0 = Instant::now();
    for &p in &nodes {
        for (t, filter) in &filters {
            let mut delta = vec![0.0; n];
            delta[p] = 1.0;
            let out = engine.apply(&delta, filter, method)?;
            reports.extend(out.reports);
            columns.push(out.signal);
            labels.push(match t {
                Some(t) => format!("p{p}@t={t}"),
                None => format!("p{p}"),
            });
        }
    }
    report.timing(method.to_string(), t0);
    report.methods.push(method.to_string());
    report.solver.insert(method.to_string(), SolverSummary::from_reports(&reports));

    let idx = indices(n);
    let mut header: Vec<&str> = vec!["node"];
    header.extend(labels.iter().map(String::as_str));
    let mut cols: Vec<&[f64]> = vec![&idx];
    cols.extend(columns.iter().map(Vec::as_slice));
    write_csv(&mut report, &a.run.out, "kernel.csv", &header, &cols)?;

    if a.check {
        let t0 = Instant::now();
        let reference: Vec<Vec<f64>> = nodes
            .iter()
            .flat_map(|&p| filters.iter().map(move |(_, f)| (p, f)))
            .map(|(p, f)| {
                let mut delta = vec![0.0; n];
                delta[p] = 1.0;
                Ok(engine.apply(&delta, f, Method::Oracle)?.signal)
            })
            .collect::<Result<_>>()?;
        report.timing("oracle", t0);
        let (mut linf, mut l2) = (0.0f64, 0.0f64);
        for (r, c) in reference.iter().zip(&columns) {
            let (a, b) = relative_errors(r, c);
            linf = linf.max(a);
            l2 = l2.max(b);
        }
        report.metric("max_relative_l2", l2);
        report.metric("max_relative_linf", linf);
        let mut cols: Vec<&[f64]> = vec![&idx];
        cols.extend(reference.iter().map(Vec::as_slice));
        write_csv(&mut report, &a.run.out, "kernel_oracle.csv", &header, &cols)?;
    }
    report.extra = Some(json!({ "filter": base.name(), "nodes": nodes }));
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: GraphArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub filter: String,
    /// Methods compared against the oracle, comma-separated.
    #[arg(long, default_value = "pade:5,pade:7,cheb-rational:20")]
    pub methods: String,
    /// Random unit-norm test signals.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
}

pub fn compare(a: &CompareArgs) -> Result<ExperimentReport> {
    let loaded = a.input.load()?;
    let mut report = start_report(&a.run, &loaded)?;
    let filter = parse_filter(&a.filter, &mut report)?;
    let methods: Vec<Method> =
        a.methods.split(',').filter(|s| !s.trim().is_empty()).map(parse_method).collect::<Result<_>>()?;
    if methods.is_empty() || a.trials == 0 {
        bail!(Error::Argument("need at least one method and one trial".into()));
    }
    let n = loaded.lap.n();
    let engine = FilterEngine::new(&loaded.lap, a.input.solver()?);
    let t0 = Instant::now();
    engine.eigensystem()?;
    report.timing("eigendecomposition", t0);

    let mut rng = ChaCha8Rng::seed_from_u64(a.run.rng_seed);
    let signals: Vec<Vec<f64>> = (0..a.trials)
        .map(|_| {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let reference: Vec<Vec<f64>> =
        signals.iter().map(|f| Ok(engine.apply(f, &filter, Method::Oracle)?.signal)).collect::<Result<_>>()?;

    let trial_col: Vec<f64> = indices(a.trials);
    let mut names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for &m in &methods {
        let mut l2s = Vec::new();
        let mut linfs = Vec::new();
        let mut reports = Vec::new();
        let t0 = Instant::now();
        for (f, r) in signals.iter().zip(&reference) {
            let out = engine.apply(f, &filter, m)?;
            reports.extend(out.reports);
            let (linf, l2) = relative_errors(r, &out.signal);
            linfs.push(linf);
            l2s.push(l2);
        }
        report.timing(m.to_string(), t0);
        report.methods.push(m.to_string());
        report.solver.insert(m.to_string(), SolverSummary::from_reports(&reports));
        report.metric(format!("{m}.l2.max"), l2s.iter().copied().fold(0.0, f64::max));
        report.metric(format!("{m}.l2.median"), median(&l2s));
        report.metric(format!("{m}.linf.max"), linfs.iter().copied().fold(0.0, f64::max));
        names.push(format!("{m}.l2"));
        names.push(format!("{m}.linf"));
        cols.push(l2s);
        cols.push(linfs);
    }
    let mut header: Vec<&str> = vec!["trial"];
    header.extend(names.iter().map(String::as_str));
    let mut refs: Vec<&[f64]> = vec![&trial_col];
    refs.extend(cols.iter().map(Vec::as_slice));
    write_csv(&mut report, &a.run.out, "compare.csv", &header, &refs)?;
    report.extra = Some(json!({ "filter": filter.name(), "trials": a.trials }));
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct BasisArgs {
    /// Kernel-basis method (ignored for eigenbases).
    #[arg(long, default_value = "cheb-rational:20")]
    pub method: String,
    #[arg(long, default_value_t = 0)]
    pub fps_start: usize,
    /// Diffusion scales, comma-separated.
    #[arg(long)]
    pub scales: Option<String>,
}

impl BasisArgs {
    fn options(&self) -> Result<BasisOptions> {
        Ok(BasisOptions { method: parse_method(&self.method)?, fps_start: self.fps_start, ..BasisOptions::default() })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub input: GraphArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub basis_args: BasisArgs,
    /// Signal CSV; the last column is used.
    #[arg(long)]
    pub signal: PathBuf,
    /// `eigs:K`, `harmonic:K` or `diffusion:K`.
    #[arg(long)]
    pub basis: String,
    /// Basis sizes to fit: `a,b,c` or `start:end[:step]`; default `1:K`.
    #[arg(long)]
    pub k_sweep: Option<String>,
}

pub fn reconstruct(a: &ReconstructArgs) -> Result<ExperimentReport> {
    let loaded = a.input.load()?;
    let mut report = start_report(&a.run, &loaded)?;
    let n = loaded.lap.n();
    let mut digests = Vec::new();
    let f = read_signal(&a.signal, n, &mut digests)?;
    report.inputs.extend(digests);
    let scales = scales_or(&a.basis_args.scales, &DEFAULT_DIFFUSION_SCALES)?;
    let spec = BasisSpec::parse(&a.basis, &scales)?;
    let ks = match &a.k_sweep {
        Some(s) => parse_sweep(s)?,
        None => (1..=spec.size()).collect(),
    };
    if let Some(&k) = ks.iter().find(|&&k| k > spec.size()) {
        bail!(Error::Argument(format!("sweep entry {k} exceeds the basis size {}", spec.size())));
    }
    let opts = a.basis_args.options()?;
    let engine = FilterEngine::new(&loaded.lap, a.input.solver()?);
    let t0 = Instant::now();
    let basis = build_basis(&loaded.graph, &engine, &spec, &opts)?;
    report.timing("basis", t0);
    if !matches!(spec, BasisSpec::Eigs { .. }) {
        report.methods.push(opts.method.to_string());
    } else {
        report.methods.push("oracle".into());
    }
    let t0 = Instant::now();
    let curve = reconstruction_curve(&basis, &f, &f, &ks)?;
    report.timing("projection", t0);
    // Fitted signals, so every curve entry can be recomputed.
    let fits: Vec<Vec<f64>> = ks
        .iter()
        .map(|&k| {
            let cols = basis.prefix_columns(k);
            Ok(least_squares_projection(&basis.columns.columns(0, cols).into_owned(), &f)?.fitted)
        })
        .collect::<Result<_>>()?;
    if curve.iter().any(|p| p.regularized) {
        report.warnings.push("rank-deficient basis prefixes were fitted with a ridge".into());
    }
    let kcol: Vec<f64> = curve.iter().map(|p| p.k as f64).collect();
    let ccol: Vec<f64> = curve.iter().map(|p| p.columns as f64).collect();
    let linf: Vec<f64> = curve.iter().map(|p| p.linf).collect();
    let l2: Vec<f64> = curve.iter().map(|p| p.l2).collect();
    write_csv(&mut report, &a.run.out, "curve.csv", &["k", "columns", "linf", "l2"], &[&kcol, &ccol, &linf, &l2])?;
    let labels: Vec<String> = ks.iter().map(|k| format!("k={k}")).collect();
    let mut header: Vec<&str> = vec!["signal"];
    header.extend(labels.iter().map(String::as_str));
    let mut cols: Vec<&[f64]> = vec![&f];
    cols.extend(fits.iter().map(Vec::as_slice));
    write_csv(&mut report, &a.run.out, "fits.csv", &header, &cols)?;
    if let Some(last) = curve.last() {
        report.metric("final.linf", last.linf);
        report.metric("final.l2", last.l2);
    }
    let increases = l2.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-12) + 1e-15).count();
    report.metric("l2_increases", increases as f64);
    report.extra = Some(json!({ "basis": a.basis, "seeds": basis.seeds, "labels": basis.labels }));
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct SmoothArgs {
    #[command(flatten)]
    pub input: GraphArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub basis_args: BasisArgs,
    /// Clean signal CSV; the last column is used.
    #[arg(long)]
    pub signal: PathBuf,
    /// Standard deviation of the added Gaussian noise.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Farthest-point seeds of the diffusion basis.
    #[arg(long, default_value_t = 100)]
    pub seeds: usize,
    /// Seed counts for an error sweep, `a,b,c` or `start:end[:step]`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Noise draws per sweep entry; the sweep reports medians.
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
}

fn fit_errors(a: &DMatrix<f64>, clean: &[f64], noisy: &[f64]) -> Result<(Vec<f64>, f64, f64, bool)> {
    let proj = least_squares_projection(a, noisy)?;
    let (linf, l2) = relative_errors(clean, &proj.fitted);
    Ok((proj.fitted, linf, l2, proj.regularized))
}

pub fn smooth(a: &SmoothArgs) -> Result<ExperimentReport> {
    let loaded = a.input.load()?;
    let mut report = start_report(&a.run, &loaded)?;
    let n = loaded.lap.n();
    let mut digests = Vec::new();
    let clean = read_signal(&a.signal, n, &mut digests)?;
    report.inputs.extend(digests);
    let scales = scales_or(&a.basis_args.scales, &DEFAULT_DIFFUSION_SCALES)?;
    let sweep = match &a.sweep {
        Some(s) => parse_sweep(s)?,
        None => Vec::new(),
    };
    if a.seeds == 0 || sweep.contains(&0) {
        bail!(Error::Argument("seed counts must be positive".into()));
    }
    let k_max = sweep.iter().copied().chain([a.seeds]).max().unwrap_or(a.seeds);
    if k_max > n {
        bail!(Error::Argument(format!("{k_max} seeds requested on {n} nodes")));
    }
    let opts = a.basis_args.options()?;
    let engine = FilterEngine::new(&loaded.lap, a.input.solver()?);
    let t0 = Instant::now();
    // Farthest-point seeds are nested, so one basis serves every prefix.
    let basis = build_basis(&loaded.graph, &engine, &BasisSpec::Diffusion { k: k_max, scales: scales.clone() }, &opts)?;
    report.timing("basis", t0);
    report.methods.push(opts.method.to_string());

    let prefix = |k: usize| basis.columns.columns(0, basis.prefix_columns(k)).into_owned();
    let t0 = Instant::now();
    let noisy = add_gaussian_noise(&clean, a.noise, a.run.rng_seed)?;
    let (smoothed, linf, l2, regularized) = fit_errors(&prefix(a.seeds), &clean, &noisy)?;
    report.timing("projection", t0);
    if regularized {
        report.warnings.push("rank-deficient basis was fitted with a ridge".into());
    }
    report.metric("linf", linf);
    report.metric("l2", l2);
    let (noise_linf, noise_l2) = relative_errors(&clean, &noisy);
    report.metric("noisy.linf", noise_linf);
    report.metric("noisy.l2", noise_l2);
    write_csv(
        &mut report,
        &a.run.out,
        "smoothed.csv",
        &["node", "clean", "noisy", "smoothed"],
        &[&indices(n), &clean, &noisy, &smoothed],
    )?;

    if !sweep.is_empty() {
        if a.trials == 0 {
            bail!(Error::Argument("--trials must be positive".into()));
        }
        let t0 = Instant::now();
        let (mut tk, mut tt, mut tinf, mut tl2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let (mut mk, mut minf, mut ml2) = (Vec::new(), Vec::new(), Vec::new());
        for &k in &sweep {
            let cols = prefix(k);
            let (mut e_inf, mut e_l2) = (Vec::new(), Vec::new());
            for t in 0..a.trials {
                let noisy = add_gaussian_noise(&clean, a.noise, a.run.rng_seed.wrapping_add(t as u64))?;
                let (_, linf, l2, _) = fit_errors(&cols, &clean, &noisy)?;
                tk.push(k as f64);
                tt.push(t as f64);
                tinf.push(linf);
                tl2.push(l2);
                e_inf.push(linf);
                e_l2.push(l2);
            }
            mk.push(k as f64);
            minf.push(median(&e_inf));
            ml2.push(median(&e_l2));
        }
        report.timing("sweep", t0);
        write_csv(
            &mut report,
            &a.run.out,
            "sweep_trials.csv",
            &["k", "trial", "linf", "l2"],
            &[&tk, &tt, &tinf, &tl2],
        )?;
        write_csv(&mut report, &a.run.out, "sweep.csv", &["k", "linf_median", "l2_median"], &[&mk, &minf, &ml2])?;
    }
    report.extra = Some(json!({
        "noise": a.noise,
        "seeds": &basis.seeds[..a.seeds],
        "scales": scales,
        "columns": basis.prefix_columns(a.seeds),
    }));
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub input: GraphArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Highest Chebyshev moment.
    #[arg(long, default_value_t = 50)]
    pub moments: usize,
    /// Width of the Gaussian smoothing kernel, in mapped coordinates.
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Rademacher probes for a stochastic trace; exact trace when omitted on
    /// small graphs.
    #[arg(long)]
    pub probes: Option<usize>,
}

pub fn density(a: &DensityArgs) -> Result<ExperimentReport> {
    let loaded = a.input.load()?;
    let mut report = start_report(&a.run, &loaded)?;
    if a.points < 2 {
        bail!(Error::Argument("--points must be at least 2".into()));
    }
    let n = loaded.lap.n();
    let op = MappedOperator::new(&loaded.lap);
    let method = match a.probes {
        Some(p) => MomentMethod::Stochastic { probes: p, seed: a.run.rng_seed },
        None => MomentMethod::default_for(n, a.run.rng_seed),
    };
    let t0 = Instant::now();
    let m = spectral_density_moments(&op, op.certified_radius(), a.moments, method)?;
    report.timing("moments", t0);
    report.methods.push(serde_json::to_string(&method)?);
    let grid: Vec<f64> = (0..a.points).map(|i| -1.0 + 2.0 * i as f64 / (a.points - 1) as f64).collect();
    let t0 = Instant::now();
    let dens = smooth_density_from_moments(&m, &grid, a.sigma)?;
    report.timing("density", t0);
    let (lo, hi) = op.interval();
    let lambda: Vec<f64> = grid.iter().map(|x| lo + (x + 1.0) * (hi - lo) / 2.0).collect();
    write_csv(&mut report, &a.run.out, "moments.csv", &["k", "mu"], &[&indices(m.mu.len()), &m.mu])?;
    write_csv(&mut report, &a.run.out, "density.csv", &["x", "lambda", "density"], &[&grid, &lambda, &dens])?;
    report.metric("mu0", m.mu[0]);
    report.extra = Some(json!({ "interval": [lo, hi], "sigma": a.sigma }));
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub input: GraphArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Dense symmetric matrix as CSV, one row per line, instead of a graph.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

/// Eigenvalues of `--matrix` if given, else of the graph Laplacian pair.
fn spectrum(a: &MatrixArgs) -> Result<(Vec<f64>, ExperimentReport)> {
    match &a.matrix {
        Some(path) => {
            let mut report = a.run.prepare()?;
            let (k, v) = digest_file(path)?;
            report.inputs.insert(k, v);
            let t = read_table(path).with_context(|| format!("reading matrix {}", path.display()))?;
            let n = t.columns.len();
            if t.columns.first().map_or(0, Vec::len) != n || n == 0 {
                bail!(Error::Validation(format!("{} is not a nonempty square matrix", path.display())));
            }
            let m = DMatrix::from_fn(n, n, |r, c| t.columns[c][r]);
            let asym = (&m - m.transpose()).amax();
            if asym > 1e-12 * m.amax().max(1.0) {
                bail!(Error::Validation(format!("matrix is not symmetric (max asymmetry {asym:e})")));
            }
            report.nodes = n;
            let t0 = Instant::now();
            let es = EigenSystem::from_dense_symmetric(&m)?;
            report.timing("eigendecomposition", t0);
            Ok((es.eigenvalues().to_vec(), report))
        }
        None => {
            let loaded = a.input.load()?;
            let mut report = start_report(&a.run, &loaded)?;
            let t0 = Instant::now();
            let es = dense_eigen(&loaded.lap)?;
            report.timing("eigendecomposition", t0);
            Ok((es.eigenvalues().to_vec(), report))
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PseudospecArgs {
    #[command(flatten)]
    pub source: MatrixArgs,
    /// Comma-separated ε values.
    #[arg(long, default_value = "0.1")]
    pub epsilon: String,
    /// Scan start; defaults to one below the smallest eigenvalue.
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    /// Scan end; defaults to one above the largest eigenvalue.
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
}

/// `ε`-neighbourhoods of `eig` merged into disjoint intervals.
fn member_intervals(eig: &[f64], eps: f64) -> Vec<[f64; 2]> {
    let mut v = eig.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<[f64; 2]> = Vec::new();
    for l in v {
        match out.last_mut() {
            Some(last) if l - eps <= last[1] => last[1] = last[1].max(l + eps),
            _ => out.push([l - eps, l + eps]),
        }
    }
    out
}

pub fn pseudospec(a: &PseudospecArgs) -> Result<ExperimentReport> {
    let (eig, mut report) = spectrum(&a.source)?;
    let eps: Vec<f64> = parse_list(&a.epsilon, "epsilon")?;
    if eps.is_empty() || eps.iter().any(|e| !(*e >= 0.0)) {
        bail!(Error::Argument(format!("epsilon values must be nonnegative, got {:?}", a.epsilon)));
    }
    let lo = a.from.unwrap_or_else(|| eig.iter().copied().fold(f64::INFINITY, f64::min) - 1.0);
    let hi = a.to.unwrap_or_else(|| eig.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0);
    if !(hi > lo) || a.points < 2 {
        bail!(Error::Argument(format!("empty scan [{lo}, {hi}] with {} points", a.points)));
    }
    let zs: Vec<f64> = (0..a.points).map(|i| lo + (hi - lo) * i as f64 / (a.points - 1) as f64).collect();
    let margin: Vec<f64> = zs.iter().map(|&z| pseudo_spectrum_query(&eig, z, 0.0).margin).collect();
    let member: Vec<Vec<f64>> = eps
        .iter()
        .map(|&e| zs.iter().map(|&z| if pseudo_spectrum_query(&eig, z, e).member { 1.0 } else { 0.0 }).collect())
        .collect();
    let names: Vec<String> = eps.iter().map(|e| format!("member@{e}")).collect();
    let mut header = vec!["z", "margin"];
    header.extend(names.iter().map(String::as_str));
    let mut cols: Vec<&[f64]> = vec![&zs, &margin];
    cols.extend(member.iter().map(Vec::as_slice));
    write_csv(&mut report, &a.source.run.out, "pseudospec.csv", &header, &cols)?;
    write_csv(
        &mut report,
        &a.source.run.out,
        "eigenvalues.csv",
        &["index", "eigenvalue"],
        &[&indices(eig.len()), &eig],
    )?;
    let intervals: Vec<_> =
        eps.iter().map(|&e| json!({ "epsilon": e, "intervals": member_intervals(&eig, e) })).collect();
    report.extra = Some(json!({ "pseudospectra": intervals }));
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct CharpolyArgs {
    #[command(flatten)]
    pub source: MatrixArgs,
    /// Eigenvalues given directly, comma-separated.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "matrix")]
    pub eigenvalues: Option<String>,
    /// Eigenvalues closer than this are merged into one multiple root.
    #[arg(long, default_value_t = 1e-8)]
    pub group_tol: f64,
}

pub fn charpoly(a: &CharpolyArgs) -> Result<ExperimentReport> {
    let (eig, mut report) = match &a.eigenvalues {
        Some(list) => {
            let mut report = a.source.run.prepare()?;
            let eig: Vec<f64> = parse_list(list, "eigenvalue")?;
            report.inputs.insert("eigenvalues".into(), crate::input::sha256_hex(list.as_bytes()));
            report.nodes = eig.len();
            (eig, report)
        }
        None => spectrum(&a.source)?,
    };
    let groups = group_eigenvalues(&eig, a.group_tol);
    let coeffs = characteristic_polynomial(&groups)?;
    let values: Vec<f64> = groups.iter().map(|g| g.0).collect();
    let mult: Vec<f64> = groups.iter().map(|g| g.1 as f64).collect();
    write_csv(
        &mut report,
        &a.source.run.out,
        "charpoly.csv",
        &["degree", "coefficient"],
        &[&indices(coeffs.len()), &coeffs],
    )?;
    write_csv(&mut report, &a.source.run.out, "groups.csv", &["value", "multiplicity"], &[&values, &mult])?;
    let residual = eig.iter().map(|&l| spectrafree_core::spectrum::poly_eval(&coeffs, l).abs()).fold(0.0, f64::max);
    report.metric("max_abs_residual", residual);
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct DistanceArgs {
    #[command(flatten)]
    pub input: GraphArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// `commute-time`, `biharmonic` or `inverse:K`, or any other filter.
    #[arg(long, default_value = "commute-time")]
    pub filter: String,
    #[arg(long, default_value = "pade:5")]
    pub method: String,
    /// Node pairs `p-q`, comma-separated.
    #[arg(long, conflicts_with = "source")]
    pub pairs: Option<String>,
    /// Distances from this node to every node.
    #[arg(long)]
    pub source: Option<usize>,
}

pub fn distance(a: &DistanceArgs) -> Result<ExperimentReport> {
    let loaded = a.input.load()?;
    let mut report = start_report(&a.run, &loaded)?;
    let filter = parse_filter(&a.filter, &mut report)?;
    let method = parse_method(&a.method)?;
    let n = loaded.lap.n();
    let pairs: Vec<(usize, usize)> = match (&a.pairs, a.source) {
        (Some(s), _) => s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                let (p, q) =
                    t.split_once('-').ok_or_else(|| Error::Argument(format!("pair {t:?} must look like p-q")))?;
                let parse =
                    |v: &str| v.trim().parse::<usize>().map_err(|_| Error::Argument(format!("invalid node {v:?}")));
                Ok((parse(p)?, parse(q)?))
            })
            .collect::<Result<_>>()?,
        (None, Some(p)) => (0..n).map(|q| (p, q)).collect(),
        (None, None) => bail!(Error::Argument("give --pairs or --source".into())),
    };
    let engine = FilterEngine::new(&loaded.lap, a.input.solver()?);
    let mut reports = Vec::new();
    let (mut ps, mut qs, mut ds) = (Vec::new(), Vec::new(), Vec::new());
    let t0 = Instant::now();
    for &(p, q) in &pairs {
        let (d, reps) = engine.distance(&filter, p, q, method)?;
        reports.extend(reps);
        ps.push(p as f64);
        qs.push(q as f64);
        ds.push(d);
    }
    report.timing(method.to_string(), t0);
    report.methods.push(method.to_string());
    report.solver.insert(method.to_string(), SolverSummary::from_reports(&reports));
    write_csv(&mut report, &a.run.out, "distances.csv", &["p", "q", "distance"], &[&ps, &qs, &ds])?;
    report.extra = Some(json!({ "filter": filter.name() }));
    Ok(report)
}
