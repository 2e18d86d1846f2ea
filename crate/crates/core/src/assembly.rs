//! Global least-squares system: Petrov-Galerkin rows per subdomain,
//! boundary collocation rows and interface continuity rows.
//!
//! Rows are kept block-sparse. Each row touches the columns of one or two
//! subdomains, and the global column of neuron `i` in subdomain `K` is
//! `K * J + i`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::basis::{TensorQuadrature, TestFunctionSet};
use crate::error::{Result, RrnnError};
use crate::partition::{CollocationSet, Partition};
use crate::problems::ProblemSpec;
use crate::rbfnet::{LocalRbfNet, RrnnSolution};

/// Which continuity conditions are collocated at each interface point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContinuityMode {
    /// Value plus every component of the gradient (2 rows in 1D, 3 in 2D).
    #[default]
    Full,
    /// Value plus the normal derivative only.
    Normal,
}

impl ContinuityMode {
    pub fn rows_per_point(self, dim: usize) -> usize {
        match self {
            ContinuityMode::Full => 1 + dim,
            ContinuityMode::Normal => 2,
        }
    }
}

/// Scalings applied to the three row blocks when the system is stacked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockWeights {
    pub pde: f64,
    pub boundary: f64,
    pub continuity: f64,
}

impl Default for BlockWeights {
    fn default() -> Self {
        BlockWeights {
            pde: 1.0,
            boundary: 1.0,
            continuity: 1.0,
        }
    }
}

/// One row: per-subdomain coefficient blocks of length `J`, and its rhs.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRow {
    pub blocks: Vec<(usize, Vec<f64>)>,
    pub rhs: f64,
}

impl BlockRow {
    fn dot(&self, w: &[f64], j: usize) -> f64 {
        self.blocks
            .iter()
            .map(|(k, vals)| {
                vals.iter()
                    .zip(&w[k * j..(k + 1) * j])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct BlockSystem {
    neurons: usize,
    subdomains: usize,
    pub pde: Vec<BlockRow>,
    pub boundary: Vec<BlockRow>,
    pub continuity: Vec<BlockRow>,
    pub weights: BlockWeights,
}

impl BlockSystem {
    /// Total rows `N`.
    pub fn n_rows(&self) -> usize {
        self.pde.len() + self.boundary.len() + self.continuity.len()
    }

    /// Total columns `M = S * J`.
    pub fn n_cols(&self) -> usize {
        self.neurons * self.subdomains
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_rows(), self.n_cols())
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    fn rows(&self) -> impl Iterator<Item = (&BlockRow, f64)> {
        self.pde
            .iter()
            .map(|r| (r, self.weights.pde))
            .chain(self.boundary.iter().map(|r| (r, self.weights.boundary)))
            .chain(self.continuity.iter().map(|r| (r, self.weights.continuity)))
    }

    /// Dense weighted matrix `[A_e; A_b; A_c]` and right-hand side.
    pub fn to_dense(&self) -> (DMatrix<f64>, Vec<f64>) {
        let mut a = DMatrix::zeros(self.n_rows(), self.n_cols());
        let mut b = Vec::with_capacity(self.n_rows());
        let j = self.neurons;
        for (r, (row, scale)) in self.rows().enumerate() {
            for (k, vals) in &row.blocks {
                for (i, v) in vals.iter().enumerate() {
                    a[(r, k * j + i)] += scale * v;
                }
            }
            b.push(scale * row.rhs);
        }
        (a, b)
    }

    /// `||A w - b||_2` of the weighted system, computed from the blocks.
    pub fn residual_norm(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.n_cols() {
            return Err(RrnnError::Dimension(format!(
                "{} weights for {} columns",
                w.len(),
                self.n_cols()
            )));
        }
        Ok(self
            .rows()
            .map(|(row, s)| {
                let r = s * (row.dot(w, self.neurons) - row.rhs);
                r * r
            })
            .sum::<f64>()
            .sqrt())
    }

    /// Writes the weighted system as little-endian binary: magic `RRNNSYS1`,
    /// `u64` rows and columns, row-major `f64` matrix, then the rhs.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(b"RRNNSYS1")?;
        out.write_all(&(self.n_rows() as u64).to_le_bytes())?;
        out.write_all(&(self.n_cols() as u64).to_le_bytes())?;
        let mut dense_row = vec![0.0; self.n_cols()];
        let j = self.neurons;
        for (row, scale) in self.rows() {
            dense_row.iter_mut().for_each(|v| *v = 0.0);
            for (k, vals) in &row.blocks {
                for (i, v) in vals.iter().enumerate() {
                    dense_row[k * j + i] += scale * v;
                }
            }
            for v in &dense_row {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        for (row, scale) in self.rows() {
            out.write_all(&(scale * row.rhs).to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }
}

fn uniform_neurons(nets: &[LocalRbfNet], partition: &Partition) -> Result<usize> {
    if nets.len() != partition.len() {
        return Err(RrnnError::Dimension(format!(
            "{} networks for {} subdomains",
            nets.len(),
            partition.len()
        )));
    }
    let j = nets[0].neurons();
    if nets
        .iter()
        .any(|n| n.neurons() != j || n.dim() != partition.dim())
    {
        return Err(RrnnError::Dimension(
            "all subdomain networks must share J and the partition dimension".into(),
        ));
    }
    Ok(j)
}

fn finite(what: &'static str, v: f64, x: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(RrnnError::Assembly {
            what,
            point: x.to_vec(),
        })
    }
}

/// Weak-form rows: for every subdomain `K` and test function `v_k`,
/// `sum_i w_i int_K (A grad rho_i . grad v_k + kappa rho_i v_k) = int_K f v_k`.
/// The facet term vanishes because every `v_k` is zero on the facets.
pub fn assemble_pde_rows(
    problem: &ProblemSpec,
    partition: &Partition,
    nets: &[LocalRbfNet],
    tests: &TestFunctionSet,
    quad: &TensorQuadrature,
) -> Result<Vec<BlockRow>> {
    let j = uniform_neurons(nets, partition)?;
    let dim = partition.dim();
    if tests.dim != dim || quad.dim != dim {
        return Err(RrnnError::Dimension(
            "test functions and quadrature must match the partition dimension".into(),
        ));
    }
    let nk = tests.len();
    let mut rows = Vec::with_capacity(partition.len() * nk);

    let mut x = vec![0.0; dim];
    let mut rho = vec![0.0; j];
    let mut drho = vec![0.0; j * dim];
    let mut v = vec![0.0; nk];
    let mut dv = vec![0.0; nk * dim];
    // per-neuron integrand factors at one quadrature point
    let mut flux = vec![0.0; j * dim];
    let mut mass = vec![0.0; j];

    for (sub, net) in partition.subdomains().iter().zip(nets) {
        let jac = sub.jacobian();
        let scale2: Vec<f64> = (0..dim).map(|d| sub.gradient_scale(d).powi(2)).collect();
        let mut block = vec![0.0; nk * j];
        let mut rhs = vec![0.0; nk];
        for q in 0..quad.len() {
            let xr = quad.point(q);
            sub.from_reference_into(xr, &mut x);
            let a = finite("coefficient", problem.coefficient_at(&x), &x)?;
            let f = finite("source", problem.source_at(&x), &x)?;
            let kappa = finite("reaction", problem.reaction_at(&x), &x)?;
            let wq = quad.weights[q] * jac;

            net.eval_basis_grad_into(xr, &mut rho, &mut drho);
            tests.eval_all(xr, &mut v, &mut dv);
            for i in 0..j {
                for d in 0..dim {
                    flux[i * dim + d] = wq * a * scale2[d] * drho[i * dim + d];
                }
                mass[i] = wq * kappa * rho[i];
            }
            for k in 0..nk {
                let dvk = &dv[k * dim..(k + 1) * dim];
                let row = &mut block[k * j..(k + 1) * j];
                if dim == 1 {
                    let (g, vk) = (dvk[0], v[k]);
                    for i in 0..j {
                        row[i] += flux[i] * g + mass[i] * vk;
                    }
                } else {
                    let (gx, gy, vk) = (dvk[0], dvk[1], v[k]);
                    for i in 0..j {
                        row[i] += flux[2 * i] * gx + flux[2 * i + 1] * gy + mass[i] * vk;
                    }
                }
                rhs[k] += wq * f * v[k];
            }
        }
        for (k, r) in rhs.into_iter().enumerate() {
            rows.push(BlockRow {
                blocks: vec![(sub.id, block[k * j..(k + 1) * j].to_vec())],
                rhs: r,
            });
        }
    }
    Ok(rows)
}

/// Dirichlet rows `u_K(x) = g(x)` at the boundary collocation points.
pub fn assemble_boundary_rows(
    problem: &ProblemSpec,
    partition: &Partition,
    nets: &[LocalRbfNet],
    points: &CollocationSet,
) -> Result<Vec<BlockRow>> {
    uniform_neurons(nets, partition)?;
    points
        .boundary_points
        .iter()
        .map(|bp| {
            let xr = partition.subdomain(bp.subdomain).to_reference(&bp.x)?;
            let g = finite("boundary data", problem.dirichlet_at(&bp.x), &bp.x)?;
            Ok(BlockRow {
                blocks: vec![(bp.subdomain, nets[bp.subdomain].eval_basis(&xr))],
                rhs: g,
            })
        })
        .collect()
}

/// Continuity rows `u_L - u_R = 0` and `d(u_L - u_R) = 0` at interface
/// points, `L` being the lower-coordinate neighbour.
pub fn assemble_continuity_rows(
    partition: &Partition,
    nets: &[LocalRbfNet],
    points: &CollocationSet,
    mode: ContinuityMode,
) -> Result<Vec<BlockRow>> {
    let j = uniform_neurons(nets, partition)?;
    let dim = partition.dim();
    let mut rows = Vec::with_capacity(points.n_c() * mode.rows_per_point(dim));
    let mut values = [vec![0.0; j], vec![0.0; j]];
    let mut grads = [vec![0.0; j * dim], vec![0.0; j * dim]];
    for ip in &points.interface_points {
        let iface = &partition.interfaces()[ip.interface];
        let ids = [iface.left_id, iface.right_id];
        for side in 0..2 {
            let sub = partition.subdomain(ids[side]);
            let xr = sub.to_reference(&ip.x)?;
            nets[ids[side]].eval_basis_grad_into(&xr, &mut values[side], &mut grads[side]);
        }
        let signed = |side: usize, vals: Vec<f64>| {
            let s = if side == 0 { 1.0 } else { -1.0 };
            (
                ids[side],
                vals.into_iter().map(|v| s * v).collect::<Vec<_>>(),
            )
        };
        rows.push(BlockRow {
            blocks: vec![signed(0, values[0].clone()), signed(1, values[1].clone())],
            rhs: 0.0,
        });
        let axes: Vec<usize> = match mode {
            ContinuityMode::Full => (0..dim).collect(),
            ContinuityMode::Normal => vec![iface.facet.axis],
        };
        for d in axes {
            let deriv = |side: usize| {
                let s = partition.subdomain(ids[side]).gradient_scale(d);
                (0..j)
                    .map(|i| s * grads[side][i * dim + d])
                    .collect::<Vec<_>>()
            };
            rows.push(BlockRow {
                blocks: vec![signed(0, deriv(0)), signed(1, deriv(1))],
                rhs: 0.0,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub continuity: ContinuityMode,
    pub weights: BlockWeights,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            continuity: ContinuityMode::Full,
            weights: BlockWeights::default(),
        }
    }
}

/// Assembles all three row blocks.
pub fn assemble_system(
    problem: &ProblemSpec,
    partition: &Partition,
    nets: &[LocalRbfNet],
    tests: &TestFunctionSet,
    quad: &TensorQuadrature,
    points: &CollocationSet,
    options: &AssemblyOptions,
) -> Result<BlockSystem> {
    if problem.dim != partition.dim() {
        return Err(RrnnError::invalid(format!(
            "problem {} is {}D but the partition is {}D",
            problem.name,
            problem.dim,
            partition.dim()
        )));
    }
    let neurons = uniform_neurons(nets, partition)?;
    Ok(BlockSystem {
        neurons,
        subdomains: partition.len(),
        pde: assemble_pde_rows(problem, partition, nets, tests, quad)?,
        boundary: assemble_boundary_rows(problem, partition, nets, points)?,
        continuity: assemble_continuity_rows(partition, nets, points, options.continuity)?,
        weights: options.weights,
    })
}

/// Row count of the assembled system without building it.
pub fn expected_rows(
    partition: &Partition,
    tests: &TestFunctionSet,
    points: &CollocationSet,
    mode: ContinuityMode,
) -> usize {
    partition.len() * tests.len()
        + points.n_b()
        + points.n_c() * mode.rows_per_point(partition.dim())
}

/// Largest value jump `|u_L - u_R|` over the interface collocation points.
pub fn max_interface_jump(solution: &RrnnSolution, points: &CollocationSet) -> Result<f64> {
    let mut worst = 0.0f64;
    for ip in &points.interface_points {
        let iface = &solution.partition().interfaces()[ip.interface];
        let left = solution.eval_in(iface.left_id, &ip.x)?;
        let right = solution.eval_in(iface.right_id, &ip.x)?;
        worst = worst.max((left - right).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::gauss_lobatto;
    use crate::partition::{decompose, sample_collocation, Domain};
    use crate::problems;
    use crate::rbfnet::{random_init, RbfConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(
        counts: &[usize],
        j: usize,
        q: usize,
        n_q: usize,
        beta: f64,
    ) -> (
        Partition,
        Vec<LocalRbfNet>,
        TestFunctionSet,
        TensorQuadrature,
        CollocationSet,
    ) {
        let dim = counts.len();
        let p = decompose(&Domain::unit(dim).unwrap(), counts).unwrap();
        let cfg = RbfConfig::new(j, beta, dim, 0).unwrap();
        let nets = random_init(&cfg, p.len()).unwrap();
        let tests = TestFunctionSet::new(q, dim).unwrap();
        let quad = TensorQuadrature::new(&gauss_lobatto(n_q).unwrap(), dim).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = sample_collocation(&p, 10, 10, &mut rng).unwrap();
        (p, nets, tests, quad, pts)
    }

    #[test]
    fn constant_basis_has_zero_stiffness() {
        let prob = problems::sine_1d().unwrap();
        let p = decompose(&Domain::unit(1).unwrap(), &[1]).unwrap();
        let nets = vec![LocalRbfNet::new(1, vec![0.0], vec![0.0]).unwrap()];
        let tests = TestFunctionSet::new(5, 1).unwrap();
        let quad = TensorQuadrature::new(&gauss_lobatto(20).unwrap(), 1).unwrap();
        let rows = assemble_pde_rows(&prob, &p, &nets, &tests, &quad).unwrap();
        for r in rows {
            assert!(r.blocks[0].1[0].abs() < 1e-14);
        }
    }

    #[test]
    fn load_vector_for_unit_source() {
        // f = 1 on (0,1): int v_1 = (1/2) int_{-1}^{1} (P_2 - P_0) = -1
        let mut prob = problems::sine_1d().unwrap();
        prob.source = std::sync::Arc::new(|_| 1.0);
        let p = decompose(&Domain::unit(1).unwrap(), &[1]).unwrap();
        let nets = vec![LocalRbfNet::new(1, vec![0.0], vec![0.0]).unwrap()];
        let tests = TestFunctionSet::new(3, 1).unwrap();
        let quad = TensorQuadrature::new(&gauss_lobatto(20).unwrap(), 1).unwrap();
        let rows = assemble_pde_rows(&prob, &p, &nets, &tests, &quad).unwrap();
        assert!((rows[0].rhs + 1.0).abs() < 1e-14);
        // higher test functions are orthogonal to constants
        assert!(rows[1].rhs.abs() < 1e-14);
        assert!(rows[2].rhs.abs() < 1e-14);
    }

    #[test]
    fn stiffness_matches_direct_integration() {
        // For rho = exp(-s (t - c)^2) on one subdomain [a, b], compare with
        // a fine composite trapezoid integration in physical coordinates.
        let prob = problems::periodic_1d(0.3).unwrap();
        let dom = Domain::new(vec![0.0], vec![1.0]).unwrap();
        let p = decompose(&dom, &[4]).unwrap();
        let cfg = RbfConfig::new(3, 2.0, 1, 4).unwrap();
        let nets = random_init(&cfg, 4).unwrap();
        let tests = TestFunctionSet::new(4, 1).unwrap();
        let quad = TensorQuadrature::new(&gauss_lobatto(60).unwrap(), 1).unwrap();
        let rows = assemble_pde_rows(&prob, &p, &nets, &tests, &quad).unwrap();
        let sub = p.subdomain(2);
        let net = &nets[2];
        let n = 200_000;
        for k in 1..=4usize {
            for i in 0..3 {
                let mut s = 0.0;
                for m in 0..=n {
                    let t = -1.0 + 2.0 * m as f64 / n as f64;
                    let x = sub.from_reference(&[t]);
                    let g = net.eval_basis_grad(&[t])[i][0] * sub.gradient_scale(0);
                    let dv =
                        crate::basis::test_function_1d(k, t).unwrap().1 * sub.gradient_scale(0);
                    let w = if m == 0 || m == n { 0.5 } else { 1.0 };
                    s += w * prob.coefficient_at(&x) * g * dv;
                }
                s *= sub.half_widths[0] * 2.0 / n as f64;
                let got = rows[2 * 4 + k - 1].blocks[0].1[i];
                assert!((got - s).abs() < 1e-8, "k={k} i={i} {got} vs {s}");
            }
        }
    }

    #[test]
    fn one_dimensional_dimensions() {
        let prob = problems::double_scale_1d(0.05).unwrap();
        let (p, nets, tests, quad, pts) = setup(&[20], 50, 20, 80, 5.0);
        let sys = assemble_system(
            &prob,
            &p,
            &nets,
            &tests,
            &quad,
            &pts,
            &AssemblyOptions::default(),
        )
        .unwrap();
        assert_eq!(sys.dims(), (440, 1000));
        assert_eq!(expected_rows(&p, &tests, &pts, ContinuityMode::Full), 440);
    }

    #[test]
    fn two_dimensional_dimensions() {
        let prob = problems::double_scale_2d(0.5).unwrap();
        let (p, nets, tests, quad, pts) = setup(&[5, 5], 20, 9, 10, 3.0);
        let sys = assemble_system(
            &prob,
            &p,
            &nets,
            &tests,
            &quad,
            &pts,
            &AssemblyOptions::default(),
        )
        .unwrap();
        assert_eq!(sys.n_rows(), 3425);
        assert_eq!(sys.pde.len(), 2025);
        assert_eq!(sys.boundary.len(), 200);
        assert_eq!(sys.continuity.len(), 1200);
        let opts = AssemblyOptions {
            continuity: ContinuityMode::Normal,
            ..Default::default()
        };
        let sys = assemble_system(&prob, &p, &nets, &tests, &quad, &pts, &opts).unwrap();
        assert_eq!(sys.continuity.len(), 800);
    }

    #[test]
    fn block_structure() {
        let prob = problems::sine_2d().unwrap();
        let (p, nets, tests, quad, pts) = setup(&[3, 3], 7, 3, 6, 1.0);
        let sys = assemble_system(
            &prob,
            &p,
            &nets,
            &tests,
            &quad,
            &pts,
            &AssemblyOptions::default(),
        )
        .unwrap();
        for (r, row) in sys.pde.iter().enumerate() {
            assert_eq!(row.blocks.len(), 1);
            assert_eq!(row.blocks[0].0, r / tests.len());
        }
        for row in &sys.continuity {
            assert_eq!(row.blocks.len(), 2);
            assert_ne!(row.blocks[0].0, row.blocks[1].0);
        }
        let (a, b) = sys.to_dense();
        let w: Vec<f64> = (0..sys.n_cols()).map(|i| (i as f64 * 0.37).sin()).collect();
        let dense = crate::lstsq::residual_norm(&a, &w, &b);
        let sparse = sys.residual_norm(&w).unwrap();
        assert!((dense - sparse).abs() <= 1e-12 * dense.max(1.0));
    }

    #[test]
    fn block_weights_scale_rows() {
        let prob = problems::sine_1d().unwrap();
        let (p, nets, tests, quad, pts) = setup(&[3], 5, 4, 20, 1.0);
        let mut opts = AssemblyOptions::default();
        let base = assemble_system(&prob, &p, &nets, &tests, &quad, &pts, &opts).unwrap();
        opts.weights.boundary = 10.0;
        let scaled = assemble_system(&prob, &p, &nets, &tests, &quad, &pts, &opts).unwrap();
        let (a0, _) = base.to_dense();
        let (a1, _) = scaled.to_dense();
        let r = base.pde.len();
        assert_eq!(a1[(r, 0)], 10.0 * a0[(r, 0)]);
        assert_eq!(a1[(0, 0)], a0[(0, 0)]);
    }

    #[test]
    fn continuity_rows_vanish_for_shared_smooth_function() {
        // Nets identical in physical space on both sides produce zero
        // continuity residual for the same weights.
        let p = decompose(&Domain::unit(1).unwrap(), &[2]).unwrap();
        let nets = vec![
            LocalRbfNet::new(1, vec![1.0], vec![0.5]).unwrap(),
            LocalRbfNet::new(1, vec![-1.0], vec![0.5]).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts = sample_collocation(&p, 1, 1, &mut rng).unwrap();
        let rows = assemble_continuity_rows(&p, &nets, &pts, ContinuityMode::Full).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert!(r.dot(&[1.0, 1.0], 1).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_coefficient_is_reported() {
        let mut prob = problems::sine_1d().unwrap();
        prob.coefficient = std::sync::Arc::new(|x| if x[0] > 0.5 { f64::NAN } else { 1.0 });
        let (p, nets, tests, quad, _) = setup(&[2], 3, 2, 5, 1.0);
        let err = assemble_pde_rows(&prob, &p, &nets, &tests, &quad).unwrap_err();
        assert!(matches!(
            err,
            RrnnError::Assembly {
                what: "coefficient",
                ..
            }
        ));
    }

    #[test]
    fn dump_round_trip() {
        let prob = problems::sine_1d().unwrap();
        let (p, nets, tests, quad, pts) = setup(&[2], 3, 2, 5, 1.0);
        let sys = assemble_system(
            &prob,
            &p,
            &nets,
            &tests,
            &quad,
            &pts,
            &AssemblyOptions::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sys.bin");
        sys.write_dump(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"RRNNSYS1");
        let (n, m) = sys.dims();
        assert_eq!(bytes.len(), 24 + 8 * (n * m + n));
        let (a, _) = sys.to_dense();
        let first = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
        assert_eq!(first, a[(0, 0)]);
    }
}
