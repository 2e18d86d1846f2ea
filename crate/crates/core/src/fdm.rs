//! Finite-difference reference solutions on uniform grids.
//!
//! Both solvers use the conservative stencil
//! `-[A_{i+1/2}(u_{i+1} - u_i) - A_{i-1/2}(u_i - u_{i-1})]/h^2 + kappa u_i = f_i`
//! per axis, with `A` evaluated at edge midpoints.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Result, RrnnError};
use crate::partition::FACET_TOL;
use crate::problems::ProblemSpec;

/// Default grid step for one-dimensional references.
pub const DEFAULT_H_1D: f64 = 1e-4;
/// Default grid step for two-dimensional references.
pub const DEFAULT_H_2D: f64 = 1.0 / 1024.0;
/// Largest 2D grid (in nodes) solved unless the caller raises the cap.
pub const DEFAULT_NODE_CAP: usize = 4_200_000;
/// Relative residual at which the 2D iteration stops.
pub const CG_TOLERANCE: f64 = 1e-10;

const CACHE_MAGIC: &[u8; 8] = b"RRNNFDM1";

#[derive(Debug, Clone, PartialEq)]
pub struct FdmSolution {
    pub h: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Nodes per axis, boundaries included.
    pub nodes: Vec<usize>,
    /// Nodal values, row-major (last axis fastest).
    pub values: Vec<f64>,
    pub problem_key: String,
}

impl FdmSolution {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Node coordinate along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.nodes[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.h
        }
    }

    pub fn value(&self, index: &[usize]) -> f64 {
        match index {
            [i] => self.values[*i],
            [i, j] => self.values[i * self.nodes[1] + j],
            _ => f64::NAN,
        }
    }

    /// Linear (1D) or bilinear (2D) interpolation of the nodal values.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(RrnnError::invalid(format!(
                "{}D point for a {}D grid",
                x.len(),
                self.dim()
            )));
        }
        let mut cell = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for d in 0..self.dim() {
            if x[d] < self.lower[d] - FACET_TOL || x[d] > self.upper[d] + FACET_TOL {
                return Err(RrnnError::OutOfDomain {
                    point: x.to_vec(),
                    region: format!("grid {:?}..{:?}", self.lower, self.upper),
                });
            }
            let t = ((x[d] - self.lower[d]) / self.h).max(0.0);
            let i = (t.floor() as usize).min(self.nodes[d] - 2);
            cell[d] = i;
            frac[d] = (t - i as f64).clamp(0.0, 1.0);
        }
        Ok(match self.dim() {
            1 => {
                let (a, b) = (self.values[cell[0]], self.values[cell[0] + 1]);
                a + frac[0] * (b - a)
            }
            _ => {
                let (i, j, tx, ty) = (cell[0], cell[1], frac[0], frac[1]);
                let v = |a: usize, b: usize| self.value(&[a, b]);
                (1.0 - tx) * ((1.0 - ty) * v(i, j) + ty * v(i, j + 1))
                    + tx * ((1.0 - ty) * v(i + 1, j) + ty * v(i + 1, j + 1))
            }
        })
    }

    /// Writes the grid as little-endian binary: magic, `u64` dim, `f64` h,
    /// per axis `f64` lower, `f64` upper, `u64` nodes, then the values.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(CACHE_MAGIC)?;
        out.write_all(&(self.dim() as u64).to_le_bytes())?;
        out.write_all(&self.h.to_le_bytes())?;
        for d in 0..self.dim() {
            out.write_all(&self.lower[d].to_le_bytes())?;
            out.write_all(&self.upper[d].to_le_bytes())?;
            out.write_all(&(self.nodes[d] as u64).to_le_bytes())?;
        }
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_cache(path: &Path, problem_key: &str) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(RrnnError::InvalidInput(format!(
                "{} is not a reference grid file",
                path.display()
            )));
        }
        let mut word = [0u8; 8];
        let mut next = |input: &mut BufReader<File>| -> Result<[u8; 8]> {
            input.read_exact(&mut word)?;
            Ok(word)
        };
        let dim = u64::from_le_bytes(next(&mut input)?) as usize;
        if !(1..=2).contains(&dim) {
            return Err(RrnnError::InvalidInput(format!(
                "grid file dimension {dim}"
            )));
        }
        let h = f64::from_le_bytes(next(&mut input)?);
        let (mut lower, mut upper, mut nodes) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..dim {
            lower.push(f64::from_le_bytes(next(&mut input)?));
            upper.push(f64::from_le_bytes(next(&mut input)?));
            nodes.push(u64::from_le_bytes(next(&mut input)?) as usize);
        }
        let total: usize = nodes.iter().product();
        let mut bytes = Vec::with_capacity(total * 8);
        input.read_to_end(&mut bytes)?;
        if bytes.len() != total * 8 {
            return Err(RrnnError::InvalidInput(format!(
                "grid file holds {} bytes of values, expected {}",
                bytes.len(),
                total * 8
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(FdmSolution {
            h,
            lower,
            upper,
            nodes,
            values,
            problem_key: problem_key.to_string(),
        })
    }
}

/// Cells per axis for step `h`, or an error when `h` does not divide the extent.
fn cells(problem: &ProblemSpec, h: f64) -> Result<Vec<usize>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(RrnnError::invalid(format!(
            "grid step must be positive, got {h}"
        )));
    }
    (0..problem.dim)
        .map(|d| {
            let len = problem.domain.upper()[d] - problem.domain.lower()[d];
            let n = (len / h).round();
            if n < 2.0 || ((n * h - len) / len).abs() > 1e-9 {
                Err(RrnnError::invalid(format!(
                    "grid step {h} does not divide the extent {len} into at least two cells"
                )))
            } else {
                Ok(n as usize)
            }
        })
        .collect()
}

fn check_finite(what: &'static str, v: f64, x: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(RrnnError::Assembly {
            what,
            point: x.to_vec(),
        })
    }
}

/// Tridiagonal solve of the 1D conservative scheme.
pub fn fdm_solve_1d(problem: &ProblemSpec, h: f64) -> Result<FdmSolution> {
    if problem.dim != 1 {
        return Err(RrnnError::invalid("fdm_solve_1d needs a 1D problem"));
    }
    let n = cells(problem, h)?[0];
    let (lo, hi) = (problem.domain.lower()[0], problem.domain.upper()[0]);
    let h = (hi - lo) / n as f64;
    let x = |i: usize| if i == n { hi } else { lo + i as f64 * h };

    let mut u = vec![0.0; n + 1];
    u[0] = check_finite("boundary data", problem.dirichlet_at(&[lo]), &[lo])?;
    u[n] = check_finite("boundary data", problem.dirichlet_at(&[hi]), &[hi])?;

    let m = n - 1;
    let mut edge = Vec::with_capacity(n);
    for i in 0..n {
        let xm = lo + (i as f64 + 0.5) * h;
        edge.push(check_finite(
            "coefficient",
            problem.coefficient_at(&[xm]),
            &[xm],
        )?);
    }
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for r in 0..m {
        let i = r + 1;
        let xi = x(i);
        let kappa = check_finite("reaction", problem.reaction_at(&[xi]), &[xi])?;
        let f = check_finite("source", problem.source_at(&[xi]), &[xi])?;
        diag[r] = edge[i - 1] + edge[i] + kappa * h * h;
        lower[r] = -edge[i - 1];
        upper[r] = -edge[i];
        rhs[r] = h * h * f;
    }
    rhs[0] += edge[0] * u[0];
    rhs[m - 1] += edge[n - 1] * u[n];

    // Thomas algorithm
    for r in 1..m {
        let factor = lower[r] / diag[r - 1];
        diag[r] -= factor * upper[r - 1];
        rhs[r] -= factor * rhs[r - 1];
    }
    u[m] = rhs[m - 1] / diag[m - 1];
    for r in (0..m - 1).rev() {
        u[r + 1] = (rhs[r] - upper[r] * u[r + 2]) / diag[r];
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(RrnnError::Solver(
            "tridiagonal solve produced non-finite values".into(),
        ));
    }
    Ok(FdmSolution {
        h,
        lower: vec![lo],
        upper: vec![hi],
        nodes: vec![n + 1],
        values: u,
        problem_key: problem.key(),
    })
}

/// Interior 5-point operator scaled by `h^2`, with edge coefficients.
struct Stencil {
    /// Interior nodes per axis.
    nx: usize,
    ny: usize,
    /// `A` at `(x_{i+1/2}, y_j)` for `i` in `0..n`, `j` in `0..=n`; row-major in `(i, j)`.
    ax: Vec<f64>,
    /// `A` at `(x_i, y_{j+1/2})` for `i` in `0..=n`, `j` in `0..n`.
    ay: Vec<f64>,
    diag: Vec<f64>,
}

impl Stencil {
    // Interior unknown (i, j), 1-based grid indices, stored at (i-1)*ny + (j-1).
    fn west(&self, i: usize, j: usize) -> f64 {
        self.ax[(i - 1) * (self.ny + 2) + j]
    }

    fn east(&self, i: usize, j: usize) -> f64 {
        self.ax[i * (self.ny + 2) + j]
    }

    fn south(&self, i: usize, j: usize) -> f64 {
        self.ay[i * (self.ny + 1) + j - 1]
    }

    fn north(&self, i: usize, j: usize) -> f64 {
        self.ay[i * (self.ny + 1) + j]
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for i in 1..=nx {
            for j in 1..=ny {
                let r = (i - 1) * ny + (j - 1);
                let mut s = self.diag[r] * u[r];
                if i > 1 {
                    s -= self.west(i, j) * u[r - ny];
                }
                if i < nx {
                    s -= self.east(i, j) * u[r + ny];
                }
                if j > 1 {
                    s -= self.south(i, j) * u[r - 1];
                }
                if j < ny {
                    s -= self.north(i, j) * u[r + 1];
                }
                out[r] = s;
            }
        }
    }

    /// Symmetric SOR preconditioner: solves `(D/w + L) D^-1 (w/(2-w)) (D/w + U) z = r`.
    fn ssor(&self, omega: f64, r: &[f64], z: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        // forward sweep: (D/w + L) y = r
        for i in 1..=nx {
            for j in 1..=ny {
                let k = (i - 1) * ny + (j - 1);
                let mut s = r[k];
                if i > 1 {
                    s += self.west(i, j) * z[k - ny];
                }
                if j > 1 {
                    s += self.south(i, j) * z[k - 1];
                }
                z[k] = s * omega / self.diag[k];
            }
        }
        let scale = (2.0 - omega) / omega;
        for (zk, d) in z.iter_mut().zip(&self.diag) {
            *zk *= scale * d;
        }
        // backward sweep: (D/w + U) z = y
        for i in (1..=nx).rev() {
            for j in (1..=ny).rev() {
                let k = (i - 1) * ny + (j - 1);
                let mut s = z[k];
                if i < nx {
                    s += self.east(i, j) * z[k + ny];
                }
                if j < ny {
                    s += self.north(i, j) * z[k + 1];
                }
                z[k] = s * omega / self.diag[k];
            }
        }
    }
}

/// 5-point conservative scheme on the unit-step grid, solved by
/// SSOR-preconditioned conjugate gradients to [`CG_TOLERANCE`].
pub fn fdm_solve_2d(problem: &ProblemSpec, h: f64, node_cap: usize) -> Result<FdmSolution> {
    if problem.dim != 2 {
        return Err(RrnnError::invalid("fdm_solve_2d needs a 2D problem"));
    }
    let n = cells(problem, h)?;
    let total = (n[0] + 1) * (n[1] + 1);
    if total > node_cap {
        return Err(RrnnError::invalid(format!(
            "grid with {total} nodes exceeds the node cap {node_cap}"
        )));
    }
    let lo = problem.domain.lower().to_vec();
    let hi = problem.domain.upper().to_vec();
    let hx = (hi[0] - lo[0]) / n[0] as f64;
    let hy = (hi[1] - lo[1]) / n[1] as f64;
    if ((hx - hy) / hx).abs() > 1e-12 {
        return Err(RrnnError::invalid(
            "2D grids must have equal steps on both axes",
        ));
    }
    let h = hx;
    let coord = |d: usize, i: usize| {
        if i == n[d] {
            hi[d]
        } else {
            lo[d] + i as f64 * h
        }
    };
    let (gx, gy) = (n[0] + 1, n[1] + 1);

    let mut u = vec![0.0; gx * gy];
    for i in 0..gx {
        for j in 0..gy {
            if i == 0 || j == 0 || i == n[0] || j == n[1] {
                let p = [coord(0, i), coord(1, j)];
                u[i * gy + j] = check_finite("boundary data", problem.dirichlet_at(&p), &p)?;
            }
        }
    }

    let (nx, ny) = (n[0] - 1, n[1] - 1);
    let mut ax = vec![0.0; n[0] * gy];
    for i in 0..n[0] {
        for j in 0..gy {
            let p = [lo[0] + (i as f64 + 0.5) * h, coord(1, j)];
            ax[i * gy + j] = check_finite("coefficient", problem.coefficient_at(&p), &p)?;
        }
    }
    let mut ay = vec![0.0; gx * n[1]];
    for i in 0..gx {
        for j in 0..n[1] {
            let p = [coord(0, i), lo[1] + (j as f64 + 0.5) * h];
            ay[i * n[1] + j] = check_finite("coefficient", problem.coefficient_at(&p), &p)?;
        }
    }
    let mut stencil = Stencil {
        nx,
        ny,
        ax,
        ay,
        diag: vec![0.0; nx * ny],
    };
    let mut b = vec![0.0; nx * ny];
    for i in 1..=nx {
        for j in 1..=ny {
            let r = (i - 1) * ny + (j - 1);
            let p = [coord(0, i), coord(1, j)];
            let kappa = check_finite("reaction", problem.reaction_at(&p), &p)?;
            let f = check_finite("source", problem.source_at(&p), &p)?;
            let (w, e, s, nn) = (
                stencil.west(i, j),
                stencil.east(i, j),
                stencil.south(i, j),
                stencil.north(i, j),
            );
            stencil.diag[r] = w + e + s + nn + kappa * h * h;
            let mut rhs = h * h * f;
            if i == 1 {
                rhs += w * u[j];
            }
            if i == nx {
                rhs += e * u[(nx + 1) * gy + j];
            }
            if j == 1 {
                rhs += s * u[i * gy];
            }
            if j == ny {
                rhs += nn * u[i * gy + ny + 1];
            }
            b[r] = rhs;
        }
    }

    let interior = pcg(&stencil, &b, h)?;
    for i in 1..=nx {
        let row = &interior[(i - 1) * ny..i * ny];
        u[i * gy + 1..i * gy + 1 + ny].copy_from_slice(row);
    }
    Ok(FdmSolution {
        h,
        lower: lo,
        upper: hi,
        nodes: vec![gx, gy],
        values: u,
        problem_key: problem.key(),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(stencil: &Stencil, b: &[f64], h: f64) -> Result<Vec<f64>> {
    let m = b.len();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; m];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let omega = (2.0 / (1.0 + std::f64::consts::PI * h)).clamp(1.0, 1.95);
    let mut r = b.to_vec();
    let mut z = vec![0.0; m];
    stencil.ssor(omega, &r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; m];
    let mut rz = dot(&r, &z);
    let max_iter = 20 * (stencil.nx + stencil.ny) + 1000;
    for _ in 0..max_iter {
        stencil.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if dot(&r, &r).sqrt() <= CG_TOLERANCE * b_norm {
            // confirm against the true residual, not the recurrence
            stencil.apply(&x, &mut ap);
            let true_res = ap
                .iter()
                .zip(b)
                .map(|(a, bb)| (bb - a) * (bb - a))
                .sum::<f64>()
                .sqrt();
            if true_res <= CG_TOLERANCE * b_norm {
                return Ok(x);
            }
            for k in 0..m {
                r[k] = b[k] - ap[k];
            }
        }
        stencil.ssor(omega, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..m {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(RrnnError::Solver(format!(
        "conjugate gradients did not reach relative residual {CG_TOLERANCE} in {max_iter} iterations"
    )))
}

/// Solves with the default node cap, dispatching on dimension.
pub fn fdm_solve(problem: &ProblemSpec, h: f64) -> Result<FdmSolution> {
    match problem.dim {
        1 => fdm_solve_1d(problem, h),
        _ => fdm_solve_2d(problem, h, DEFAULT_NODE_CAP),
    }
}

/// Cache file for a problem and grid step inside `dir`.
pub fn cache_path(dir: &Path, problem: &ProblemSpec, h: f64) -> PathBuf {
    dir.join(format!("{}_h{h}.grid", problem.key()))
}

/// Reads the cached grid if present, otherwise solves and writes it.
pub fn load_or_solve(
    problem: &ProblemSpec,
    h: f64,
    dir: &Path,
    node_cap: usize,
) -> Result<FdmSolution> {
    let path = cache_path(dir, problem, h);
    if path.exists() {
        let sol = FdmSolution::read_cache(&path, &problem.key())?;
        let expected: Vec<usize> = cells(problem, h)?.iter().map(|c| c + 1).collect();
        if sol.nodes == expected {
            return Ok(sol);
        }
    }
    let sol = match problem.dim {
        1 => fdm_solve_1d(problem, h)?,
        _ => fdm_solve_2d(problem, h, node_cap)?,
    };
    std::fs::create_dir_all(dir)?;
    sol.write_cache(&path)?;
    Ok(sol)
}
