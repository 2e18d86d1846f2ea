//! Local Gaussian RBF networks with frozen random centers and shape
//! coefficients. Only the output weights are ever solved for.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RrnnError};
use crate::lstsq::{self, LstsqResult};
use crate::partition::Partition;

#[derive(Debug, Clone, PartialEq)]
pub struct RbfConfig {
    /// Neurons per subdomain (`J`).
    pub neurons: usize,
    /// Upper bound of the shape coefficient distribution `U([0, beta])`.
    pub beta: f64,
    pub dim: usize,
    pub seed: u64,
    /// Reuse one random draw for every subdomain.
    pub share_basis: bool,
}

impl RbfConfig {
    pub fn new(neurons: usize, beta: f64, dim: usize, seed: u64) -> Result<Self> {
        let cfg = RbfConfig {
            neurons,
            beta,
            dim,
            seed,
            share_basis: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.neurons == 0 {
            return Err(RrnnError::invalid("J must be >= 1"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(RrnnError::invalid(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if !(1..=2).contains(&self.dim) {
            return Err(RrnnError::invalid(format!(
                "unsupported dimension {}",
                self.dim
            )));
        }
        Ok(())
    }
}

/// `u(x) = sum_i w_i exp(-sigma_i |x - c_i|^2)` on the reference cube.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRbfNet {
    dim: usize,
    /// `J * dim`, neuron-major.
    centers: Vec<f64>,
    shapes: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl LocalRbfNet {
    pub fn new(dim: usize, centers: Vec<f64>, shapes: Vec<f64>) -> Result<Self> {
        if dim == 0 || centers.len() != dim * shapes.len() || shapes.is_empty() {
            return Err(RrnnError::invalid(format!(
                "{} center coordinates do not match {} shapes in dimension {dim}",
                centers.len(),
                shapes.len()
            )));
        }
        if shapes.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(RrnnError::invalid(
                "shape coefficients must be finite and >= 0",
            ));
        }
        Ok(LocalRbfNet {
            dim,
            centers,
            shapes,
            weights: None,
        })
    }

    fn draw<R: Rng + ?Sized>(cfg: &RbfConfig, rng: &mut R) -> Self {
        let centers = (0..cfg.neurons * cfg.dim)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let shapes = (0..cfg.neurons)
            .map(|_| rng.random_range(0.0..=cfg.beta))
            .collect();
        LocalRbfNet {
            dim: cfg.dim,
            centers,
            shapes,
            weights: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn neurons(&self) -> usize {
        self.shapes.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn shapes(&self) -> &[f64] {
        &self.shapes
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.neurons() {
            return Err(RrnnError::Dimension(format!(
                "{} weights for {} neurons",
                weights.len(),
                self.neurons()
            )));
        }
        self.weights = Some(weights);
        Ok(())
    }

    pub fn eval_basis_into(&self, xr: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let c = self.center(i);
            let r2: f64 = xr.iter().zip(c).map(|(x, c)| (x - c) * (x - c)).sum();
            *o = (-self.shapes[i] * r2).exp();
        }
    }

    /// Values `rho_i(xr)` of every neuron.
    pub fn eval_basis(&self, xr: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.neurons()];
        self.eval_basis_into(xr, &mut out);
        out
    }

    /// Values and reference-coordinate gradients; `grads` is `J * dim`.
    pub fn eval_basis_grad_into(&self, xr: &[f64], values: &mut [f64], grads: &mut [f64]) {
        let dim = self.dim;
        for i in 0..self.neurons() {
            let c = self.center(i);
            let r2: f64 = xr.iter().zip(c).map(|(x, c)| (x - c) * (x - c)).sum();
            let rho = (-self.shapes[i] * r2).exp();
            values[i] = rho;
            for d in 0..dim {
                grads[i * dim + d] = -2.0 * self.shapes[i] * (xr[d] - c[d]) * rho;
            }
        }
    }

    /// Gradients `-2 sigma_i (xr - c_i) rho_i(xr)` in reference coordinates.
    pub fn eval_basis_grad(&self, xr: &[f64]) -> Vec<Vec<f64>> {
        let mut values = vec![0.0; self.neurons()];
        let mut grads = vec![0.0; self.neurons() * self.dim];
        self.eval_basis_grad_into(xr, &mut values, &mut grads);
        grads.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// Network output at a reference point; requires assigned weights.
    pub fn evaluate(&self, xr: &[f64]) -> Result<f64> {
        let w = self
            .weights
            .as_ref()
            .ok_or_else(|| RrnnError::invalid("network weights have not been assigned"))?;
        let mut sum = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let c = self.center(i);
            let r2: f64 = xr.iter().zip(c).map(|(x, c)| (x - c) * (x - c)).sum();
            sum += wi * (-self.shapes[i] * r2).exp();
        }
        Ok(sum)
    }
}

/// Draws `s` networks from `U([-1,1]^dim)` centers and `U([0, beta])` shapes.
pub fn random_init(cfg: &RbfConfig, s: usize) -> Result<Vec<LocalRbfNet>> {
    cfg.validate()?;
    if s == 0 {
        return Err(RrnnError::invalid("need at least one subdomain"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if cfg.share_basis {
        let net = LocalRbfNet::draw(cfg, &mut rng);
        Ok(vec![net; s])
    } else {
        Ok((0..s).map(|_| LocalRbfNet::draw(cfg, &mut rng)).collect())
    }
}

/// Minimal-norm output weights fitting `samples` of `(reference point, value)`.
pub fn elm_fit(
    net: &LocalRbfNet,
    samples: &[(Vec<f64>, f64)],
    rcond: Option<f64>,
) -> Result<LstsqResult> {
    if samples.is_empty() {
        return Err(RrnnError::invalid("ELM fit needs at least one sample"));
    }
    let j = net.neurons();
    let mut a = DMatrix::zeros(samples.len(), j);
    let mut row = vec![0.0; j];
    for (r, (x, _)) in samples.iter().enumerate() {
        if x.len() != net.dim() {
            return Err(RrnnError::invalid(
                "sample dimension does not match network",
            ));
        }
        net.eval_basis_into(x, &mut row);
        for (c, v) in row.iter().enumerate() {
            a[(r, c)] = *v;
        }
    }
    let b: Vec<f64> = samples.iter().map(|(_, u)| *u).collect();
    lstsq::solve_min_norm(&a, &b, rcond)
}

/// Piecewise network solution over a partition, one net per subdomain.
#[derive(Debug, Clone)]
pub struct RrnnSolution {
    partition: Partition,
    nets: Vec<LocalRbfNet>,
    config: RbfConfig,
}

impl RrnnSolution {
    pub fn new(partition: Partition, nets: Vec<LocalRbfNet>, config: RbfConfig) -> Result<Self> {
        if nets.len() != partition.len() {
            return Err(RrnnError::Dimension(format!(
                "{} networks for {} subdomains",
                nets.len(),
                partition.len()
            )));
        }
        if nets.iter().any(|n| n.dim() != partition.dim()) {
            return Err(RrnnError::Dimension(
                "network dimension does not match partition".into(),
            ));
        }
        Ok(RrnnSolution {
            partition,
            nets,
            config,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn nets(&self) -> &[LocalRbfNet] {
        &self.nets
    }

    pub fn config(&self) -> &RbfConfig {
        &self.config
    }

    /// Distributes a global weight vector (subdomain-major, `S * J`).
    pub fn assign_weights(&mut self, w: &[f64]) -> Result<()> {
        let total: usize = self.nets.iter().map(LocalRbfNet::neurons).sum();
        if w.len() != total {
            return Err(RrnnError::Dimension(format!(
                "{} weights for {total} columns",
                w.len()
            )));
        }
        let mut offset = 0;
        for net in &mut self.nets {
            let j = net.neurons();
            net.set_weights(w[offset..offset + j].to_vec())?;
            offset += j;
        }
        Ok(())
    }

    /// Value of the solution at physical `x`, taken from the owning subdomain.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let id = self.partition.locate(x)?;
        self.eval_in(id, x)
    }

    /// Value of subdomain `id`'s network at physical `x` (which may lie on its facet).
    pub fn eval_in(&self, id: usize, x: &[f64]) -> Result<f64> {
        let xr = self.partition.subdomain(id).to_reference(x)?;
        self.nets[id].evaluate(&xr)
    }

    /// Physical gradient of subdomain `id`'s network at `x`.
    pub fn grad_in(&self, id: usize, x: &[f64]) -> Result<Vec<f64>> {
        let sub = self.partition.subdomain(id);
        let xr = sub.to_reference(x)?;
        let net = &self.nets[id];
        let w = net
            .weights()
            .ok_or_else(|| RrnnError::invalid("network weights have not been assigned"))?;
        let dim = net.dim();
        let mut values = vec![0.0; net.neurons()];
        let mut grads = vec![0.0; net.neurons() * dim];
        net.eval_basis_grad_into(&xr, &mut values, &mut grads);
        Ok((0..dim)
            .map(|d| {
                sub.gradient_scale(d)
                    * w.iter()
                        .enumerate()
                        .map(|(i, wi)| wi * grads[i * dim + d])
                        .sum::<f64>()
            })
            .collect())
    }

    /// Evaluates at many points (each of length `dim`, flattened).
    pub fn eval_many(&self, points: &[f64]) -> Result<Vec<f64>> {
        let dim = self.partition.dim();
        let mut xr = vec![0.0; dim];
        points
            .chunks(dim)
            .map(|x| {
                let id = self.partition.locate(x)?;
                self.partition
                    .subdomain(id)
                    .to_reference_unchecked(x, &mut xr);
                self.nets[id].evaluate(&xr)
            })
            .collect()
    }
}
