//! Experiment runner: configuration, end-to-end solves, error metrics,
//! parameter sweeps and table reproduction.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer};

use crate::assembly::{assemble_system, AssemblyOptions, BlockWeights, ContinuityMode};
use crate::basis::{gauss_lobatto, TensorQuadrature, TestFunctionSet};
use crate::error::{Result, RrnnError};
use crate::fdm::{self, FdmSolution};
use crate::lstsq;
use crate::partition::{decompose, sample_collocation, CollocationSet};
use crate::problems::{self, ProblemParams, ProblemSpec, ScalarFn};
use crate::rbfnet::{random_init, RbfConfig, RrnnSolution};

impl FromStr for ContinuityMode {
    type Err = RrnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "3-row" => Ok(ContinuityMode::Full),
            "normal" | "2-row" => Ok(ContinuityMode::Normal),
            other => Err(RrnnError::Config(format!(
                "continuity must be full (3-row) or normal (2-row), got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ContinuityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContinuityMode::Full => "full",
            ContinuityMode::Normal => "normal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceKind {
    /// Closed-form solution of the problem.
    #[default]
    Exact,
    /// Finite-difference oracle.
    Fdm,
}

impl FromStr for ReferenceKind {
    type Err = RrnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ReferenceKind::Exact),
            "fdm" => Ok(ReferenceKind::Fdm),
            other => Err(RrnnError::Config(format!(
                "reference must be exact or fdm, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReferenceKind::Exact => "exact",
            ReferenceKind::Fdm => "fdm",
        })
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub params: ProblemParams,
    /// Subdomains per axis.
    pub s: Vec<usize>,
    pub j: usize,
    pub q: usize,
    pub beta: f64,
    pub seed: u64,
    /// Gauss-Lobatto points per axis.
    pub n_q: usize,
    pub n_bper: usize,
    pub n_cper: usize,
    pub rcond: Option<f64>,
    pub continuity: ContinuityMode,
    pub block_weights: BlockWeights,
    /// Test points per axis.
    pub test_grid: usize,
    pub reference: ReferenceKind,
    pub fdm_h: f64,
    /// Directory holding cached oracle grids.
    pub fdm_cache: Option<PathBuf>,
    pub share_basis: bool,
    pub out: Option<PathBuf>,
    /// CSV dump of `(x, u_approx, u_ref, |diff|)` on the test grid.
    pub samples: Option<PathBuf>,
    /// Binary dump of the assembled `(A, b)`.
    pub dump_system: Option<PathBuf>,
}

fn problem_dim(name: &str) -> Result<usize> {
    match name {
        "periodic-1d" | "double-scale-1d" | "three-scale-1d" | "linear-1d" | "sine-1d" => Ok(1),
        "radial-2d" | "double-scale-2d" | "poisson-boltzmann" | "linear-2d" | "sine-2d" => Ok(2),
        other => Err(RrnnError::Config(format!(
            "unknown problem {other:?}; expected one of {:?}",
            problems::PROBLEM_NAMES
        ))),
    }
}

fn lookup(table: &[(f64, usize)], eps: f64) -> Option<usize> {
    table
        .iter()
        .find(|(e, _)| (e - eps).abs() <= 1e-12 * e.abs())
        .map(|(_, s)| *s)
}

fn scale_count(eps: f64) -> usize {
    ((1.0 / eps).round() as usize).max(5)
}

impl RunConfig {
    /// Published hyperparameters for a problem and its scale parameters.
    pub fn defaults(problem: &str, params: ProblemParams) -> Result<Self> {
        let dim = problem_dim(problem)?;
        let eps = params.eps.unwrap_or(0.5);
        let square = |n: usize| vec![n; dim];
        let two_d = [(0.5, 5), (0.2, 8), (0.1, 10)];
        let (s, j, q, beta) = match problem {
            "periodic-1d" => {
                let table = [(0.5, 5), (0.1, 10), (0.05, 20), (0.01, 50), (0.005, 100)];
                let s = lookup(&table, eps).unwrap_or_else(|| ((0.5 / eps).ceil() as usize).max(5));
                (vec![s], 100, 20, 2.0)
            }
            "double-scale-1d" => (vec![scale_count(eps)], 50, 20, 5.0),
            "three-scale-1d" => (vec![scale_count(params.eps2.unwrap_or(0.01))], 50, 20, 5.0),
            "radial-2d" => (
                square(lookup(&two_d, eps).unwrap_or_else(|| scale_count(eps))),
                200,
                10,
                1.0,
            ),
            "double-scale-2d" => (
                square(lookup(&two_d, eps).unwrap_or_else(|| scale_count(eps))),
                200,
                9,
                3.0,
            ),
            "poisson-boltzmann" => (square(10), 200, 9, 2.0),
            _ if dim == 1 => (vec![4], 50, 20, 2.0),
            _ => (square(2), 100, 9, 2.0),
        };
        let exact = matches!(
            problem,
            "periodic-1d"
                | "radial-2d"
                | "poisson-boltzmann"
                | "linear-1d"
                | "sine-1d"
                | "linear-2d"
                | "sine-2d"
        );
        Ok(RunConfig {
            problem: problem.to_string(),
            params,
            s,
            j,
            q,
            beta,
            seed: 0,
            n_q: if dim == 1 { 80 } else { 10 },
            n_bper: 10,
            n_cper: 10,
            rcond: None,
            continuity: ContinuityMode::Full,
            block_weights: BlockWeights::default(),
            test_grid: if dim == 1 { 10001 } else { 1001 },
            reference: if exact {
                ReferenceKind::Exact
            } else {
                ReferenceKind::Fdm
            },
            fdm_h: if dim == 1 {
                fdm::DEFAULT_H_1D
            } else {
                fdm::DEFAULT_H_2D
            },
            fdm_cache: None,
            share_basis: false,
            out: None,
            samples: None,
            dump_system: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = problem_dim(&self.problem)?;
        let bad = |msg: String| Err(RrnnError::Config(msg));
        if self.s.len() != dim {
            return bad(format!(
                "S needs {dim} counts for {}, got {:?}",
                self.problem, self.s
            ));
        }
        for (name, v) in [
            ("S", *self.s.iter().min().unwrap_or(&0)),
            ("J", self.j),
            ("Q", self.q),
            ("N_bper", self.n_bper),
            ("N_cper", self.n_cper),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.n_q < 2 {
            return bad("n_q must be at least 2".into());
        }
        if self.test_grid < 2 {
            return bad("test_grid must be at least 2".into());
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if let Some(r) = self.rcond {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("rcond must lie in [0, 1), got {r}"));
            }
        }
        let w = self.block_weights;
        if [w.pde, w.boundary, w.continuity]
            .iter()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return bad("block weights must be positive".into());
        }
        if !(self.fdm_h > 0.0) {
            return bad("fdm_h must be positive".into());
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<ProblemSpec> {
        problems::by_name(&self.problem, &self.params)
    }

    /// Overrides fields with every value present in `raw`.
    pub fn apply(&mut self, raw: &RawConfig) -> Result<()> {
        if let Some(s) = &raw.s {
            self.s = match s.as_slice() {
                [n] => vec![*n; self.dim().max(1)],
                many => many.to_vec(),
            };
        }
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = raw.$field.clone() { self.$field = v; } )* };
        }
        take!(
            j,
            q,
            beta,
            seed,
            n_q,
            n_bper,
            n_cper,
            test_grid,
            fdm_h,
            share_basis
        );
        if raw.rcond.is_some() {
            self.rcond = raw.rcond;
        }
        if let Some(c) = &raw.continuity {
            self.continuity = c.parse()?;
        }
        if let Some(r) = &raw.reference {
            self.reference = r.parse()?;
        }
        if let Some(w) = &raw.block_weights {
            let [pde, boundary, continuity] = w.as_slice() else {
                return Err(RrnnError::Config("block_weights needs three values".into()));
            };
            self.block_weights = BlockWeights {
                pde: *pde,
                boundary: *boundary,
                continuity: *continuity,
            };
        }
        for (dst, src) in [
            (&mut self.out, &raw.out),
            (&mut self.samples, &raw.samples),
            (&mut self.dump_system, &raw.dump_system),
            (&mut self.fdm_cache, &raw.fdm_cache),
        ] {
            if src.is_some() {
                *dst = src.clone();
            }
        }
        Ok(())
    }

    /// Resolves defaults for the named problem, then applies the overrides.
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let problem = raw
            .problem
            .as_deref()
            .ok_or_else(|| RrnnError::Config("no problem given".into()))?;
        let params = ProblemParams {
            eps: raw.eps,
            eps1: raw.eps1,
            eps2: raw.eps2,
        };
        let mut cfg = RunConfig::defaults(problem, params)?;
        cfg.apply(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| RrnnError::Config(e.to_string()))?;
        RunConfig::from_raw(&raw)
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<Vec<usize>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Counts {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(Option::<Counts>::deserialize(d)?.map(|c| match c {
        Counts::One(n) => vec![n],
        Counts::Many(v) => v,
    }))
}

/// Partially specified configuration, as read from a config file or flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// Problem name
    #[arg(long)]
    pub problem: Option<String>,
    /// Scale ratio
    #[arg(long)]
    pub eps: Option<f64>,
    /// First scale ratio (three-scale problem)
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Second scale ratio (three-scale problem)
    #[arg(long)]
    pub eps2: Option<f64>,
    /// Subdomains per axis, one value or comma-separated per axis
    #[arg(long = "S", value_delimiter = ',')]
    #[serde(rename = "S", default, deserialize_with = "one_or_many")]
    pub s: Option<Vec<usize>>,
    /// Neurons per subdomain
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<usize>,
    /// Test functions per axis
    #[arg(long = "Q")]
    #[serde(rename = "Q")]
    pub q: Option<usize>,
    /// Shape coefficients are drawn from U([0, beta])
    #[arg(long)]
    pub beta: Option<f64>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Quadrature points per axis
    #[arg(long = "n_q", alias = "n-q")]
    pub n_q: Option<usize>,
    /// Boundary collocation points per subdomain edge
    #[arg(long = "N_bper")]
    #[serde(rename = "N_bper")]
    pub n_bper: Option<usize>,
    /// Interface collocation points per subdomain edge
    #[arg(long = "N_cper")]
    #[serde(rename = "N_cper")]
    pub n_cper: Option<usize>,
    /// Relative singular value cutoff
    #[arg(long)]
    pub rcond: Option<f64>,
    /// full (3-row) or normal (2-row)
    #[arg(long)]
    pub continuity: Option<String>,
    /// Row block scalings pde,boundary,continuity
    #[arg(long = "block_weights", alias = "block-weights", value_delimiter = ',')]
    pub block_weights: Option<Vec<f64>>,
    /// Test points per axis
    #[arg(long = "test_grid", alias = "test-grid")]
    pub test_grid: Option<usize>,
    /// exact or fdm
    #[arg(long)]
    pub reference: Option<String>,
    /// Grid step of the finite-difference reference
    #[arg(long = "fdm_h", alias = "fdm-h")]
    pub fdm_h: Option<f64>,
    /// Directory for cached reference grids
    #[arg(long = "fdm_cache", alias = "fdm-cache")]
    pub fdm_cache: Option<PathBuf>,
    /// Use one random draw for every subdomain
    #[arg(long = "share_basis", alias = "share-basis")]
    pub share_basis: Option<bool>,
    /// Output CSV path (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write (x, u, u_ref, |diff|) samples to this CSV
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Write the assembled system to this binary file
    #[arg(long = "dump_system", alias = "dump-system")]
    pub dump_system: Option<PathBuf>,
}

impl RawConfig {
    /// Merges `other` over `self`, field by field.
    pub fn overlay(&self, other: &RawConfig) -> RawConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RawConfig { $( $f: other.$f.clone().or_else(|| self.$f.clone()), )* } };
        }
        pick!(
            problem,
            eps,
            eps1,
            eps2,
            s,
            j,
            q,
            beta,
            seed,
            n_q,
            n_bper,
            n_cper,
            rcond,
            continuity,
            block_weights,
            test_grid,
            reference,
            fdm_h,
            fdm_cache,
            share_basis,
            out,
            samples,
            dump_system
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| RrnnError::Config(format!("{}: {e}", path.display())))
    }
}

/// Discrete relative sup-norm and Euclidean-norm errors.
pub fn metrics(approx: &[f64], reference: &[f64]) -> Result<(f64, f64)> {
    if approx.is_empty() || approx.len() != reference.len() {
        return Err(RrnnError::InvalidInput(format!(
            "metric needs equal non-empty samples, got {} and {}",
            approx.len(),
            reference.len()
        )));
    }
    let mut diff_max = 0.0f64;
    let mut ref_max = 0.0f64;
    let mut diff_sq = 0.0;
    let mut ref_sq = 0.0;
    for (a, r) in approx.iter().zip(reference) {
        let d = (a - r).abs();
        diff_max = diff_max.max(d);
        ref_max = ref_max.max(r.abs());
        diff_sq += d * d;
        ref_sq += r * r;
    }
    if ref_max == 0.0 {
        return Err(RrnnError::UndefinedMetric(
            "reference solution is identically zero on the test grid".into(),
        ));
    }
    Ok((diff_max / ref_max, (diff_sq / ref_sq).sqrt()))
}

/// Reference solution used to score a run.
#[derive(Clone)]
pub enum Reference {
    Exact(ScalarFn),
    Grid(Arc<FdmSolution>),
}

impl Reference {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Reference::Exact(u) => Ok(u(x)),
            Reference::Grid(g) => g.interpolate(x),
        }
    }
}

impl fmt::Debug for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::Exact(_) => f.write_str("Reference::Exact"),
            Reference::Grid(g) => write!(f, "Reference::Grid(h = {})", g.h),
        }
    }
}

/// Builds (or loads from the cache) the reference for a configuration.
pub fn prepare_reference(config: &RunConfig, problem: &ProblemSpec) -> Result<Reference> {
    match config.reference {
        ReferenceKind::Exact => problem.exact.clone().map(Reference::Exact).ok_or_else(|| {
            RrnnError::Config(format!(
                "problem {} has no closed-form solution; use reference = \"fdm\"",
                problem.name
            ))
        }),
        ReferenceKind::Fdm => {
            let sol = match &config.fdm_cache {
                Some(dir) => fdm::load_or_solve(problem, config.fdm_h, dir, fdm::DEFAULT_NODE_CAP)?,
                None => fdm::fdm_solve(problem, config.fdm_h)?,
            };
            Ok(Reference::Grid(Arc::new(sol)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub config: RunConfig,
    /// Rows `N` of the least-squares system.
    pub n_rows: usize,
    /// Columns `M`.
    pub n_cols: usize,
    pub rank: usize,
    pub max_error: f64,
    pub rms_error: f64,
    pub residual_norm: f64,
    /// Largest `|u_L - u_R|` over the interface collocation points.
    pub interface_jump: f64,
    /// Assembly time in seconds.
    pub t_pre: f64,
    /// Least-squares time in seconds.
    pub t_opt: f64,
    /// Test-grid evaluation time in seconds.
    pub t_test: f64,
    pub seed: u64,
}

/// Test-grid samples of a run.
#[derive(Debug, Clone, Default)]
pub struct Samples {
    pub dim: usize,
    /// Flattened test points.
    pub points: Vec<f64>,
    pub approx: Vec<f64>,
    pub reference: Vec<f64>,
}

impl Samples {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = if self.dim == 1 {
            vec!["x"]
        } else {
            vec!["x", "y"]
        };
        header.extend(["u", "u_ref", "abs_diff"]);
        w.write_record(&header)?;
        for (i, x) in self.points.chunks(self.dim).enumerate() {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            let (a, r) = (self.approx[i], self.reference[i]);
            rec.extend([a.to_string(), r.to_string(), (a - r).abs().to_string()]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: SolveReport,
    pub solution: RrnnSolution,
    pub weights: Vec<f64>,
    pub collocation: CollocationSet,
    pub samples: Samples,
}

/// Uniform test grid, flattened, with the last axis fastest.
pub fn test_points(problem: &ProblemSpec, per_axis: usize) -> Vec<f64> {
    let lo = problem.domain.lower();
    let hi = problem.domain.upper();
    let coord = |d: usize, i: usize| {
        if i + 1 == per_axis {
            hi[d]
        } else {
            lo[d] + (hi[d] - lo[d]) * i as f64 / (per_axis - 1) as f64
        }
    };
    match problem.dim {
        1 => (0..per_axis).map(|i| coord(0, i)).collect(),
        _ => (0..per_axis)
            .flat_map(|i| (0..per_axis).flat_map(move |j| [coord(0, i), coord(1, j)]))
            .collect(),
    }
}

/// Runs the whole pipeline, building the reference on the way.
pub fn run(config: &RunConfig) -> Result<SolveReport> {
    Ok(run_full(config)?.report)
}

pub fn run_full(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let problem = config.build_problem().map_err(|e| e.in_stage("problem"))?;
    let reference = prepare_reference(config, &problem).map_err(|e| e.in_stage("reference"))?;
    run_with_reference(config, &problem, &reference)
}

/// Runs with a prepared problem and reference (shared across sweeps).
pub fn run_with_reference(
    config: &RunConfig,
    problem: &ProblemSpec,
    reference: &Reference,
) -> Result<RunOutput> {
    config.validate()?;
    let dim = config.dim();
    if problem.dim != dim {
        return Err(RrnnError::Config(format!(
            "problem {} is {}D, S has {} entries",
            problem.name, problem.dim, dim
        )));
    }

    let start = Instant::now();
    let (solution_parts, system, collocation) = (|| {
        let partition = decompose(&problem.domain, &config.s)?;
        let mut rbf = RbfConfig::new(config.j, config.beta, dim, config.seed)?;
        rbf.share_basis = config.share_basis;
        let nets = random_init(&rbf, partition.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let points = sample_collocation(&partition, config.n_bper, config.n_cper, &mut rng)?;
        let tests = TestFunctionSet::new(config.q, dim)?;
        let quad = TensorQuadrature::new(&gauss_lobatto(config.n_q)?, dim)?;
        let options = AssemblyOptions {
            continuity: config.continuity,
            weights: config.block_weights,
        };
        let system = assemble_system(problem, &partition, &nets, &tests, &quad, &points, &options)?;
        Ok::<_, RrnnError>(((partition, nets, rbf), system, points))
    })()
    .map_err(|e| e.in_stage("assembly"))?;
    if let Some(path) = &config.dump_system {
        system
            .write_dump(path)
            .map_err(|e| e.in_stage("system dump"))?;
    }
    let t_pre = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let (n_rows, n_cols) = system.dims();
    let (a, b) = system.to_dense();
    let solve = lstsq::solve_min_norm_in_place(a, &b, config.rcond)
        .map_err(|e| e.in_stage("least squares"))?;
    let residual_norm = system.residual_norm(&solve.weights)?;
    let t_opt = start.elapsed().as_secs_f64();
    drop(system);

    let start = Instant::now();
    let (partition, nets, rbf) = solution_parts;
    let mut solution = RrnnSolution::new(partition, nets, rbf)?;
    solution.assign_weights(&solve.weights)?;
    let points = test_points(problem, config.test_grid);
    let approx = solution
        .eval_many(&points)
        .map_err(|e| e.in_stage("testing"))?;
    let t_test = start.elapsed().as_secs_f64();

    let reference_values = points
        .chunks(dim)
        .map(|x| reference.eval(x))
        .collect::<Result<Vec<f64>>>()
        .map_err(|e| e.in_stage("reference"))?;
    let (max_error, rms_error) =
        metrics(&approx, &reference_values).map_err(|e| e.in_stage("metrics"))?;
    let interface_jump = crate::assembly::max_interface_jump(&solution, &collocation)?;

    let samples = Samples {
        dim,
        points,
        approx,
        reference: reference_values,
    };
    if let Some(path) = &config.samples {
        samples
            .write_csv(path)
            .map_err(|e| e.in_stage("sample dump"))?;
    }
    Ok(RunOutput {
        report: SolveReport {
            config: config.clone(),
            n_rows,
            n_cols,
            rank: solve.rank,
            max_error,
            rms_error,
            residual_norm,
            interface_jump,
            t_pre,
            t_opt,
            t_test,
            seed: config.seed,
        },
        solution,
        weights: solve.weights,
        collocation,
        samples,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

const CONFIG_COLUMNS: [&str; 12] = [
    "problem",
    "eps",
    "eps1",
    "eps2",
    "S",
    "J",
    "Q",
    "beta",
    "n_q",
    "N_bper",
    "N_cper",
    "continuity",
];

fn config_record(c: &RunConfig) -> Vec<String> {
    vec![
        c.problem.clone(),
        opt(c.params.eps),
        opt(c.params.eps1),
        opt(c.params.eps2),
        c.s.iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("x"),
        c.j.to_string(),
        c.q.to_string(),
        c.beta.to_string(),
        c.n_q.to_string(),
        c.n_bper.to_string(),
        c.n_cper.to_string(),
        c.continuity.to_string(),
    ]
}

/// Writes one row per report with the fixed column order.
pub fn write_reports_csv<W: Write>(out: W, reports: &[SolveReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CONFIG_COLUMNS.to_vec();
    header.extend([
        "N",
        "M",
        "max_error",
        "rms_error",
        "t_pre",
        "t_opt",
        "t_test",
        "seed",
    ]);
    w.write_record(&header)?;
    for r in reports {
        let mut rec = config_record(&r.config);
        rec.extend([
            r.n_rows.to_string(),
            r.n_cols.to_string(),
            format!("{:e}", r.max_error),
            format!("{:e}", r.rms_error),
            format!("{:.3}", r.t_pre),
            format!("{:.3}", r.t_opt),
            format!("{:.3}", r.t_test),
            r.seed.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    J,
    Q,
    S,
    Beta,
    Seed,
}

impl FromStr for SweepAxis {
    type Err = RrnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "J" => Ok(SweepAxis::J),
            "Q" => Ok(SweepAxis::Q),
            "S" => Ok(SweepAxis::S),
            "beta" => Ok(SweepAxis::Beta),
            "seed" => Ok(SweepAxis::Seed),
            other => Err(RrnnError::invalid(format!(
                "unknown sweep axis {other:?}; expected J, Q, S, beta or seed"
            ))),
        }
    }
}

impl SweepAxis {
    fn set(self, cfg: &mut RunConfig, value: f64) -> Result<()> {
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(RrnnError::invalid(format!(
                    "{value} is not a positive integer"
                )))
            }
        };
        match self {
            SweepAxis::J => cfg.j = count()?,
            SweepAxis::Q => cfg.q = count()?,
            SweepAxis::S => cfg.s = vec![count()?; cfg.dim()],
            SweepAxis::Beta => cfg.beta = value,
            SweepAxis::Seed => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(RrnnError::invalid(format!(
                        "seed {value} is not a non-negative integer"
                    )));
                }
                cfg.seed = value as u64;
            }
        }
        Ok(())
    }
}

/// Runs for one swept value, one per seed.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub reports: Vec<SolveReport>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl SweepPoint {
    pub fn median_rms(&self) -> f64 {
        median(self.reports.iter().map(|r| r.rms_error).collect())
    }

    pub fn median_max(&self) -> f64 {
        median(self.reports.iter().map(|r| r.max_error).collect())
    }
}

/// One run per value (and per seed in `seeds`, when given).
pub fn sweep(
    base: &RunConfig,
    axis: SweepAxis,
    values: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(RrnnError::invalid("sweep needs at least one value"));
    }
    if axis == SweepAxis::Seed && !seeds.is_empty() {
        return Err(RrnnError::invalid(
            "cannot replicate over seeds while sweeping the seed",
        ));
    }
    let seeds: Vec<u64> = if seeds.is_empty() {
        vec![base.seed]
    } else {
        seeds.to_vec()
    };
    let problem = base.build_problem().map_err(|e| e.in_stage("problem"))?;
    let reference = prepare_reference(base, &problem).map_err(|e| e.in_stage("reference"))?;
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut cfg = base.clone();
        axis.set(&mut cfg, value)?;
        let mut reports = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            if axis != SweepAxis::Seed {
                cfg.seed = seed;
            }
            reports.push(run_with_reference(&cfg, &problem, &reference)?.report);
        }
        points.push(SweepPoint { value, reports });
    }
    Ok(points)
}

/// Plain report rows for single-seed sweeps; median rows with min/max
/// columns when each point was replicated over seeds.
pub fn write_sweep_csv<W: Write>(out: W, points: &[SweepPoint]) -> Result<()> {
    if points.iter().all(|p| p.reports.len() == 1) {
        let reports: Vec<SolveReport> = points.iter().map(|p| p.reports[0].clone()).collect();
        return write_reports_csv(out, &reports);
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CONFIG_COLUMNS.to_vec();
    header.extend([
        "N",
        "M",
        "max_error",
        "rms_error",
        "t_pre",
        "t_opt",
        "t_test",
        "seed",
        "max_error_min",
        "max_error_max",
        "rms_error_min",
        "rms_error_max",
        "replicates",
    ]);
    w.write_record(&header)?;
    for p in points {
        let first = &p.reports[0];
        let col = |f: fn(&SolveReport) -> f64| p.reports.iter().map(f).collect::<Vec<f64>>();
        let (maxes, rmses) = (col(|r| r.max_error), col(|r| r.rms_error));
        let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut rec = config_record(&first.config);
        rec.extend([
            first.n_rows.to_string(),
            first.n_cols.to_string(),
            format!("{:e}", median(maxes.clone())),
            format!("{:e}", median(rmses.clone())),
            format!("{:.3}", median(col(|r| r.t_pre))),
            format!("{:.3}", median(col(|r| r.t_opt))),
            format!("{:.3}", median(col(|r| r.t_test))),
            first.seed.to_string(),
            format!("{:e}", lo(&maxes)),
            format!("{:e}", hi(&maxes)),
            format!("{:e}", lo(&rmses)),
            format!("{:e}", hi(&rmses)),
            p.reports.len().to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const TABLE_IDS: &[&str] = &[
    "table1",
    "table2",
    "table4-rrnn",
    "table5",
    "table9-rrnn",
    "table10-rrnn",
    "table11-rrnn",
];

/// Configurations of a published results table.
pub fn table_configs(id: &str) -> Result<Vec<RunConfig>> {
    let eps = |v: f64| ProblemParams {
        eps: Some(v),
        ..Default::default()
    };
    let each = |problem: &str, values: &[f64]| {
        values
            .iter()
            .map(|v| RunConfig::defaults(problem, eps(*v)))
            .collect::<Result<Vec<_>>>()
    };
    match id {
        "table1" => each("periodic-1d", &[0.5, 0.1, 0.05, 0.01, 0.005]),
        "table2" => each("double-scale-1d", &[0.5, 0.1, 0.05, 0.01, 0.005]),
        "table4-rrnn" => each("double-scale-1d", &[0.05, 0.01, 0.005, 0.002]),
        "table5" => [(0.1, 0.01), (0.05, 0.005)]
            .iter()
            .map(|&(e1, e2)| {
                RunConfig::defaults(
                    "three-scale-1d",
                    ProblemParams {
                        eps: None,
                        eps1: Some(e1),
                        eps2: Some(e2),
                    },
                )
            })
            .collect(),
        "table9-rrnn" => each("radial-2d", &[0.5, 0.2, 0.1]),
        "table10-rrnn" => each("double-scale-2d", &[0.5, 0.2, 0.1]),
        "table11-rrnn" => Ok(vec![RunConfig::defaults(
            "poisson-boltzmann",
            ProblemParams::default(),
        )?]),
        other => Err(RrnnError::invalid(format!(
            "unknown table {other:?}; expected one of {TABLE_IDS:?}"
        ))),
    }
}

/// Runs every configuration of a table with the given seed, reusing
/// references between rows of the same problem.
pub fn run_table(id: &str, seed: u64, fdm_cache: Option<&Path>) -> Result<Vec<SolveReport>> {
    let mut references: HashMap<String, (ProblemSpec, Reference)> = HashMap::new();
    let mut reports = Vec::new();
    for mut cfg in table_configs(id)? {
        cfg.seed = seed;
        cfg.fdm_cache = fdm_cache.map(Path::to_path_buf);
        let problem = cfg.build_problem()?;
        let key = problem.key();
        if !references.contains_key(&key) {
            let reference = prepare_reference(&cfg, &problem)?;
            references.insert(key.clone(), (problem, reference));
        }
        let (problem, reference) = &references[&key];
        reports.push(run_with_reference(&cfg, problem, reference)?.report);
    }
    Ok(reports)
}
