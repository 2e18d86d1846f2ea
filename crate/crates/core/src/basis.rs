//! Gauss–Lobatto quadrature and Legendre-type test functions on the
//! reference cube `[-1, 1]^n`.

use std::f64::consts::PI;

use crate::error::{Result, RrnnError};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// Legendre polynomial `P_k(x)` and its derivative.
pub fn legendre(k: usize, x: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    if k == 0 {
        return (1.0, 0.0);
    }
    for n in 1..k {
        let nf = n as f64;
        let p_next = ((2.0 * nf + 1.0) * x * p - nf * p_prev) / (nf + 1.0);
        // P'_{n+1} = P'_{n-1} + (2n + 1) P_n
        let dp_next = dp_prev + (2.0 * nf + 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

/// Values and derivatives of `P_0..=P_kmax` at `x`.
pub fn legendre_table(kmax: usize, x: f64, values: &mut Vec<f64>, derivs: &mut Vec<f64>) {
    values.clear();
    derivs.clear();
    values.push(1.0);
    derivs.push(0.0);
    if kmax == 0 {
        return;
    }
    values.push(x);
    derivs.push(1.0);
    for n in 1..kmax {
        let nf = n as f64;
        values.push(((2.0 * nf + 1.0) * x * values[n] - nf * values[n - 1]) / (nf + 1.0));
        derivs.push(derivs[n - 1] + (2.0 * nf + 1.0) * values[n]);
    }
}

/// Gauss–Lobatto–Legendre rule with `n_q` nodes on `[-1, 1]`.
///
/// Interior nodes are the roots of `P'_{n_q-1}`, found by Newton iteration
/// from Chebyshev–Gauss–Lobatto starting points.
pub fn gauss_lobatto(n_q: usize) -> Result<QuadratureRule> {
    if n_q < 2 {
        return Err(RrnnError::invalid(format!(
            "Gauss-Lobatto rule needs at least 2 nodes, got {n_q}"
        )));
    }
    let n = n_q - 1;
    let nf = n as f64;
    let mut nodes = vec![0.0; n_q];
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    for j in 1..n {
        let mut x = -(PI * j as f64 / nf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let d2p = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
            let step = dp / d2p;
            x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        nodes[j] = x;
    }
    // exact symmetry about the origin
    for j in 0..n_q / 2 {
        let m = 0.5 * (nodes[n - j] - nodes[j]);
        nodes[j] = -m;
        nodes[n - j] = m;
    }
    if n_q % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (p, _) = legendre(n, x);
            2.0 / (nf * (nf + 1.0) * p * p)
        })
        .collect();
    Ok(QuadratureRule { nodes, weights })
}

/// Tensor-product quadrature over `[-1, 1]^dim`, flattened point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorQuadrature {
    pub dim: usize,
    /// `len * dim` coordinates.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TensorQuadrature {
    pub fn new(rule: &QuadratureRule, dim: usize) -> Result<Self> {
        match dim {
            1 => Ok(TensorQuadrature {
                dim,
                points: rule.nodes.clone(),
                weights: rule.weights.clone(),
            }),
            2 => {
                let mut points = Vec::with_capacity(2 * rule.order().pow(2));
                let mut weights = Vec::with_capacity(rule.order().pow(2));
                for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
                    for (y, wy) in rule.nodes.iter().zip(&rule.weights) {
                        points.extend_from_slice(&[*x, *y]);
                        weights.push(wx * wy);
                    }
                }
                Ok(TensorQuadrature {
                    dim,
                    points,
                    weights,
                })
            }
            _ => Err(RrnnError::invalid(format!("unsupported dimension {dim}"))),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.dim..(q + 1) * self.dim]
    }
}

/// One-dimensional factor `P_{k+1} - P_{k-1}` and its derivative.
pub fn test_function_1d(k: usize, x: f64) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(RrnnError::invalid("test function index must be >= 1"));
    }
    let (a, da) = legendre(k + 1, x);
    let (b, db) = legendre(k - 1, x);
    Ok((a - b, da - db))
}

/// Test function with per-axis index `k` at the reference point `xr`,
/// returning its value and reference gradient.
pub fn test_function(k: &[usize], xr: &[f64]) -> Result<(f64, Vec<f64>)> {
    if k.len() != xr.len() || !(1..=2).contains(&k.len()) {
        return Err(RrnnError::invalid(
            "test function index and point must both have dimension 1 or 2",
        ));
    }
    let factors = k
        .iter()
        .zip(xr)
        .map(|(&ki, &xi)| test_function_1d(ki, xi))
        .collect::<Result<Vec<_>>>()?;
    match factors.as_slice() {
        [(v, dv)] => Ok((*v, vec![*dv])),
        [(vx, dvx), (vy, dvy)] => Ok((vx * vy, vec![dvx * vy, vx * dvy])),
        _ => unreachable!(),
    }
}

/// The `Q^dim` test functions of one subdomain, indexed row-major in
/// `(k1, k2)` with each `k` running over `1..=Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestFunctionSet {
    pub q: usize,
    pub dim: usize,
}

impl TestFunctionSet {
    pub fn new(q: usize, dim: usize) -> Result<Self> {
        if q == 0 {
            return Err(RrnnError::invalid("Q must be >= 1"));
        }
        if !(1..=2).contains(&dim) {
            return Err(RrnnError::invalid(format!("unsupported dimension {dim}")));
        }
        Ok(TestFunctionSet { q, dim })
    }

    /// Number of test functions (rows) per subdomain.
    pub fn len(&self) -> usize {
        self.q.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, row: usize) -> Vec<usize> {
        match self.dim {
            1 => vec![row + 1],
            _ => vec![row / self.q + 1, row % self.q + 1],
        }
    }

    /// Evaluates every test function at `xr`; `grads` is `len * dim`, row-major.
    pub fn eval_all(&self, xr: &[f64], values: &mut [f64], grads: &mut [f64]) {
        let mut p = Vec::with_capacity(self.q + 2);
        let mut dp = Vec::with_capacity(self.q + 2);
        let factors: Vec<(Vec<f64>, Vec<f64>)> = xr
            .iter()
            .map(|&x| {
                legendre_table(self.q + 1, x, &mut p, &mut dp);
                (1..=self.q)
                    .map(|k| (p[k + 1] - p[k - 1], dp[k + 1] - dp[k - 1]))
                    .unzip()
            })
            .collect();
        match self.dim {
            1 => {
                let (v, dv) = &factors[0];
                values.copy_from_slice(v);
                grads.copy_from_slice(dv);
            }
            _ => {
                let ((vx, dvx), (vy, dvy)) = (&factors[0], &factors[1]);
                for a in 0..self.q {
                    for b in 0..self.q {
                        let r = a * self.q + b;
                        values[r] = vx[a] * vy[b];
                        grads[2 * r] = dvx[a] * vy[b];
                        grads[2 * r + 1] = vx[a] * dvy[b];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_and_three_point_rules() {
        let r2 = gauss_lobatto(2).unwrap();
        assert_eq!(r2.nodes, vec![-1.0, 1.0]);
        assert!(r2.weights.iter().all(|w| (w - 1.0).abs() < 1e-15));

        // Exactness for 1, x, x^2, x^3 forces w = (1/3, 4/3, 1/3) on {-1, 0, 1}:
        // w0 + w1 + w2 = 2, w2 - w0 = 0, w0 + w2 = 2/3.
        let r3 = gauss_lobatto(3).unwrap();
        let expected = [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0];
        assert_eq!(r3.nodes, vec![-1.0, 0.0, 1.0]);
        for (w, e) in r3.weights.iter().zip(expected) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_degenerate_rule() {
        assert!(matches!(
            gauss_lobatto(1),
            Err(RrnnError::InvalidArgument(_))
        ));
    }

    #[test]
    fn eighty_point_rule_integrates_high_monomial() {
        let r = gauss_lobatto(80).unwrap();
        let q = r.integrate(|x| x.powi(156));
        let exact = 2.0 / 157.0;
        assert!(((q - exact) / exact).abs() < 1e-12, "{q} vs {exact}");
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn interior_nodes_are_derivative_roots() {
        for n_q in [5, 10, 33, 80] {
            let r = gauss_lobatto(n_q).unwrap();
            for &x in &r.nodes[1..n_q - 1] {
                let (_, dp) = legendre(n_q - 1, x);
                // |P'_N| peaks at N(N+1)/2 on [-1, 1]
                let scale = ((n_q - 1) * n_q) as f64 / 2.0;
                assert!(dp.abs() < 1e-13 * scale, "n_q={n_q} x={x} P'={dp}");
            }
        }
    }

    #[test]
    fn legendre_examples() {
        assert!((legendre(2, 0.5).0 + 0.125).abs() < 1e-16);
        assert_eq!(legendre(0, 0.37), (1.0, 0.0));
        assert!((legendre(5, 1.0).0 - 1.0).abs() < 1e-15);
        let (p, dp) = legendre(2, 0.3);
        assert!((p - (3.0 * 0.09 - 1.0) / 2.0).abs() < 1e-16);
        assert!((dp - 3.0 * 0.3).abs() < 1e-16);
        assert_eq!(legendre(1, -0.7), (-0.7, 1.0));
    }

    #[test]
    fn table_matches_single_evaluation() {
        let (mut v, mut d) = (Vec::new(), Vec::new());
        legendre_table(12, 0.41, &mut v, &mut d);
        for k in 0..=12 {
            let (p, dp) = legendre(k, 0.41);
            assert!((v[k] - p).abs() < 1e-15);
            assert!((d[k] - dp).abs() < 1e-13);
        }
    }

    #[test]
    fn test_function_examples() {
        assert!(test_function(&[1], &[1.0]).unwrap().0.abs() < 1e-15);
        assert!(test_function(&[1], &[-1.0]).unwrap().0.abs() < 1e-15);
        assert!((test_function(&[1], &[0.0]).unwrap().0 + 1.5).abs() < 1e-15);
        assert!(test_function(&[1, 1], &[1.0, 0.3]).unwrap().0.abs() < 1e-15);
        assert!(matches!(
            test_function(&[0], &[0.2]),
            Err(RrnnError::InvalidArgument(_))
        ));
    }

    #[test]
    fn eval_all_matches_pointwise() {
        let set = TestFunctionSet::new(4, 2).unwrap();
        let x = [0.3, -0.55];
        let mut v = vec![0.0; set.len()];
        let mut g = vec![0.0; 2 * set.len()];
        set.eval_all(&x, &mut v, &mut g);
        for r in 0..set.len() {
            let (val, grad) = test_function(&set.index(r), &x).unwrap();
            assert!((v[r] - val).abs() < 1e-14);
            assert!((g[2 * r] - grad[0]).abs() < 1e-13);
            assert!((g[2 * r + 1] - grad[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn tensor_rule_weights_sum_to_area() {
        let tq = TensorQuadrature::new(&gauss_lobatto(10).unwrap(), 2).unwrap();
        assert_eq!(tq.len(), 100);
        assert!((tq.weights.iter().sum::<f64>() - 4.0).abs() < 1e-13);
    }
}
