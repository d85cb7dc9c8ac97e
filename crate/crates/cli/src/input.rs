//! Graph, mesh and signal inputs shared by the commands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use sha2::{Digest, Sha256};

use spectrafree_core::graph::{
    complete_graph, laplacian, path_graph, random_connected_graph, read_positions_csv, EdgeWeighting, Graph,
    LaplacianKind, LaplacianPair, Mesh, MeshWeighting,
};
use spectrafree_core::sparse::SolverConfig;
use spectrafree_core::Error;

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Edge list (`u v [w]` per line) or a generator: `path:N`,
    /// `complete:N`, `random:N:EXTRA:SEED`.
    #[arg(long, conflicts_with = "mesh")]
    pub graph: Option<String>,
    /// Node positions, one `x,y,z` row per node, for an edge-list graph.
    #[arg(long, requires = "graph")]
    pub positions: Option<PathBuf>,
    /// Edge weights of an edge list: `given`, `unit` or `gaussian:SIGMA`.
    #[arg(long, default_value = "given")]
    pub edge_weights: String,
    /// Triangle mesh in OFF format, or `torus:NU:NV`.
    #[arg(long)]
    pub mesh: Option<String>,
    /// Mesh edge weights: `cotangent` or `uniform`.
    #[arg(long, default_value = "cotangent")]
    pub weighting: String,
    #[arg(long, default_value = "rw")]
    pub laplacian: String,
    /// Relative tolerance of iterative solves.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

/// A loaded input together with the digests of everything read.
pub struct Loaded {
    pub graph: Graph,
    pub lap: LaplacianPair,
    pub digests: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<(String, String)> {
    let bytes = std::fs::read(path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))?;
    Ok((path.display().to_string(), sha256_hex(&bytes)))
}

fn generator_args(spec: &str, name: &str, count: usize) -> Result<Option<Vec<u64>>> {
    let Some(rest) = spec.strip_prefix(name).and_then(|r| r.strip_prefix(':')) else {
        return Ok(None);
    };
    let vals = rest
        .split(':')
        .map(|v| v.parse::<u64>().map_err(|_| Error::Argument(format!("invalid number {v:?} in {spec:?}"))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if vals.len() != count {
        return Err(Error::Argument(format!("{spec:?}: {name} takes {count} parameters")).into());
    }
    Ok(Some(vals))
}

fn edge_weighting(spec: &str) -> Result<EdgeWeighting> {
    Ok(match spec.split_once(':') {
        None if spec == "given" => EdgeWeighting::Given,
        None if spec == "unit" => EdgeWeighting::Unit,
        Some(("gaussian", s)) => EdgeWeighting::Gaussian {
            sigma: s.parse().map_err(|_| Error::Argument(format!("invalid gaussian width {s:?}")))?,
        },
        _ => return Err(Error::Argument(format!("unknown edge weighting {spec:?}")).into()),
    })
}

impl GraphArgs {
    pub fn solver(&self) -> Result<SolverConfig> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Argument(format!("--tol must lie in (0, 1), got {}", self.tol)).into());
        }
        Ok(SolverConfig { tol: self.tol, ..SolverConfig::default() })
    }

    pub fn load(&self) -> Result<Loaded> {
        let kind: LaplacianKind = self.laplacian.parse()?;
        let mut digests = Vec::new();
        let mut warnings = Vec::new();
        let graph = match (&self.graph, &self.mesh) {
            (Some(spec), None) => self.load_graph(spec, &mut digests)?,
            (None, Some(spec)) => {
                let mesh = if let Some(v) = generator_args(spec, "torus", 2)? {
                    digests.push((spec.clone(), sha256_hex(spec.as_bytes())));
                    if v[0] < 3 || v[1] < 3 {
                        bail!(Error::Argument("torus needs at least 3 × 3 vertices".into()));
                    }
                    Mesh::torus(v[0] as usize, v[1] as usize, 2.0, 0.7)
                } else {
                    digests.push(digest_file(Path::new(spec))?);
                    Mesh::read_off(spec).with_context(|| format!("reading mesh {spec}"))?
                };
                let weighting = match self.weighting.as_str() {
                    "cotangent" | "cot" => MeshWeighting::Cotangent,
                    "uniform" => MeshWeighting::Uniform,
                    other => bail!(Error::Argument(format!("unknown mesh weighting {other:?}"))),
                };
                let mg = mesh.to_graph(weighting)?;
                warnings.extend(mg.warnings);
                mg.graph
            }
            _ => bail!(Error::Argument("exactly one of --graph and --mesh is required".into())),
        };
        let lap = laplacian(&graph, kind)?;
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(Loaded { graph, lap, digests, warnings })
    }

    fn load_graph(&self, spec: &str, digests: &mut Vec<(String, String)>) -> Result<Graph> {
        let generated = if let Some(v) = generator_args(spec, "path", 1)? {
            Some(path_graph(v[0] as usize))
        } else if let Some(v) = generator_args(spec, "complete", 1)? {
            Some(complete_graph(v[0] as usize))
        } else if let Some(v) = generator_args(spec, "random", 3)? {
            Some(random_connected_graph(v[0] as usize, v[1] as usize, v[2]))
        } else {
            None
        };
        if let Some(g) = generated {
            if g.n_nodes() == 0 {
                bail!(Error::Argument(format!("{spec:?} has no nodes")));
            }
            digests.push((spec.to_string(), sha256_hex(spec.as_bytes())));
            return Ok(g);
        }
        let positions = match &self.positions {
            Some(p) => {
                digests.push(digest_file(p)?);
                Some(read_positions_csv(p).with_context(|| format!("reading positions {}", p.display()))?)
            }
            None => None,
        };
        digests.push(digest_file(Path::new(spec))?);
        Ok(Graph::read_edge_list(spec, edge_weighting(&self.edge_weights)?, positions)
            .with_context(|| format!("reading graph {spec}"))?)
    }
}

/// Comma-separated numbers.
pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::Argument(format!("invalid {what} {t:?}")).into()))
        .collect()
}

/// `a,b,c` or an inclusive range `start:end[:step]`.
pub fn parse_sweep(s: &str) -> Result<Vec<usize>> {
    if s.contains(':') {
        let parts: Vec<usize> = s
            .split(':')
            .map(|t| t.trim().parse().map_err(|_| Error::Argument(format!("invalid sweep bound {t:?}"))))
            .collect::<std::result::Result<_, _>>()?;
        let (start, end, step) = match parts[..] {
            [a, b] => (a, b, 1),
            [a, b, c] if c > 0 => (a, b, c),
            _ => bail!(Error::Argument(format!("sweep {s:?} must be start:end[:step] with a positive step"))),
        };
        Ok((start..=end).step_by(step).collect())
    } else {
        parse_list(s, "sweep entry")
    }
}

/// Signal file whose length must match the graph.
pub fn read_signal(path: &Path, n: usize, digests: &mut Vec<(String, String)>) -> Result<Vec<f64>> {
    digests.push(digest_file(path)?);
    let f = spectrafree_core::io::read_signal(path).with_context(|| format!("reading signal {}", path.display()))?;
    if f.len() != n {
        bail!(Error::DimensionMismatch { expected: n, found: f.len() });
    }
    Ok(f)
}
