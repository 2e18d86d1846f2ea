//! Benchmark problems `-div(A grad u) + kappa u = f` on the unit interval or
//! square with Dirichlet data `g`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Result, RrnnError};
use crate::partition::Domain;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Number of coefficient samples used by the positivity check.
pub const POSITIVITY_SAMPLES: usize = 10_000;

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    pub domain: Domain,
    /// Scalar diffusion coefficient `A(x)`.
    pub coefficient: ScalarFn,
    pub source: ScalarFn,
    pub dirichlet: ScalarFn,
    pub reaction: Option<ScalarFn>,
    pub exact: Option<ScalarFn>,
    /// Named scale ratios, e.g. `("eps", 0.1)`.
    pub params: Vec<(String, f64)>,
    /// Known bounds `(lambda, Lambda)` of the coefficient.
    pub ellipticity: Option<(f64, f64)>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("params", &self.params)
            .field("has_reaction", &self.reaction.is_some())
            .field("has_exact", &self.exact.is_some())
            .field("ellipticity", &self.ellipticity)
            .finish()
    }
}

fn arc(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

fn check_eps(name: &str, eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(RrnnError::invalid(format!(
            "{name} must be positive and finite, got {eps}"
        )))
    }
}

impl ProblemSpec {
    pub fn coefficient_at(&self, x: &[f64]) -> f64 {
        (self.coefficient)(x)
    }

    pub fn source_at(&self, x: &[f64]) -> f64 {
        (self.source)(x)
    }

    pub fn dirichlet_at(&self, x: &[f64]) -> f64 {
        (self.dirichlet)(x)
    }

    pub fn reaction_at(&self, x: &[f64]) -> f64 {
        self.reaction.as_ref().map_or(0.0, |k| k(x))
    }

    pub fn exact_at(&self, x: &[f64]) -> Option<f64> {
        self.exact.as_ref().map(|u| u(x))
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// Cache/report key built from the name and parameters.
    pub fn key(&self) -> String {
        let mut key = self.name.clone();
        for (k, v) in &self.params {
            key.push_str(&format!("_{k}{v}"));
        }
        key
    }

    /// Minimum and maximum of the coefficient over a uniform sample of
    /// [`POSITIVITY_SAMPLES`] points; fails if the coefficient is not
    /// strictly positive or the reaction is negative anywhere on it.
    pub fn check_positivity(&self) -> Result<(f64, f64)> {
        let per_axis = match self.dim {
            1 => POSITIVITY_SAMPLES,
            _ => (POSITIVITY_SAMPLES as f64).sqrt() as usize,
        };
        let lo = self.domain.lower();
        let hi = self.domain.upper();
        let coord = |d: usize, i: usize| lo[d] + (hi[d] - lo[d]) * i as f64 / (per_axis - 1) as f64;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut x = vec![0.0; self.dim];
        let total = per_axis.pow(self.dim as u32);
        for n in 0..total {
            let mut rem = n;
            for d in (0..self.dim).rev() {
                x[d] = coord(d, rem % per_axis);
                rem /= per_axis;
            }
            let a = self.coefficient_at(&x);
            if !(a > 0.0 && a.is_finite()) {
                return Err(RrnnError::invalid(format!(
                    "coefficient of {} is not positive at {x:?} (A = {a})",
                    self.name
                )));
            }
            if self.reaction_at(&x) < 0.0 {
                return Err(RrnnError::invalid(format!(
                    "reaction of {} is negative at {x:?}",
                    self.name
                )));
            }
            min = min.min(a);
            max = max.max(a);
        }
        Ok((min, max))
    }

    fn checked(mut self) -> Result<Self> {
        let (min, max) = self.check_positivity()?;
        if self.ellipticity.is_none() {
            self.ellipticity = Some((min, max));
        }
        Ok(self)
    }
}

/// `A = 1/(2 + cos(2 pi x/eps))`, `f = 1`, `u(0) = u(1) = 0`, with closed-form solution.
pub fn periodic_1d(eps: f64) -> Result<ProblemSpec> {
    check_eps("eps", eps)?;
    let k = 2.0 * PI / eps;
    ProblemSpec {
        name: "periodic-1d".into(),
        dim: 1,
        domain: Domain::unit(1)?,
        coefficient: arc(move |x| 1.0 / (2.0 + (k * x[0]).cos())),
        source: arc(|_| 1.0),
        dirichlet: arc(|_| 0.0),
        reaction: None,
        exact: Some(arc(move |x| {
            let x = x[0];
            let s = (k * x).sin();
            let c = (k * x).cos();
            x - x * x + eps * (s / (4.0 * PI) - x * s / (2.0 * PI))
                - eps * eps / (4.0 * PI * PI) * (c - 1.0)
        })),
        params: vec![("eps".into(), eps)],
        ellipticity: Some((1.0 / 3.0, 1.0)),
    }
    .checked()
}

/// `A = 2 + sin(2 pi x/eps) cos(2 pi x)`, `f = 1`, `u = 1` at both ends.
pub fn double_scale_1d(eps: f64) -> Result<ProblemSpec> {
    check_eps("eps", eps)?;
    let k = 2.0 * PI / eps;
    ProblemSpec {
        name: "double-scale-1d".into(),
        dim: 1,
        domain: Domain::unit(1)?,
        coefficient: arc(move |x| 2.0 + (k * x[0]).sin() * (2.0 * PI * x[0]).cos()),
        source: arc(|_| 1.0),
        dirichlet: arc(|_| 1.0),
        reaction: None,
        exact: None,
        params: vec![("eps".into(), eps)],
        ellipticity: Some((1.0, 3.0)),
    }
    .checked()
}

/// `A = (2 + cos(2 pi x/eps1))(2 + cos(2 pi x/eps2))`, `f = 1`, `u = 1` at both ends.
pub fn three_scale_1d(eps1: f64, eps2: f64) -> Result<ProblemSpec> {
    check_eps("eps1", eps1)?;
    check_eps("eps2", eps2)?;
    let (k1, k2) = (2.0 * PI / eps1, 2.0 * PI / eps2);
    ProblemSpec {
        name: "three-scale-1d".into(),
        dim: 1,
        domain: Domain::unit(1)?,
        coefficient: arc(move |x| (2.0 + (k1 * x[0]).cos()) * (2.0 + (k2 * x[0]).cos())),
        source: arc(|_| 1.0),
        dirichlet: arc(|_| 1.0),
        reaction: None,
        exact: None,
        params: vec![("eps1".into(), eps1), ("eps2".into(), eps2)],
        ellipticity: Some((1.0, 9.0)),
    }
    .checked()
}

/// Radially oscillating `A = 1/(4 + cos(2 pi r^2/eps))` with `f = -r^2` and a
/// closed-form solution supplying the boundary data.
pub fn radial_2d(eps: f64) -> Result<ProblemSpec> {
    check_eps("eps", eps)?;
    let k = 2.0 * PI / eps;
    let exact = arc(move |x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        0.25 * r2 * r2
            + eps / (16.0 * PI) * r2 * (k * r2).sin()
            + eps * eps / (32.0 * PI * PI) * (k * r2).cos()
    });
    ProblemSpec {
        name: "radial-2d".into(),
        dim: 2,
        domain: Domain::unit(2)?,
        coefficient: arc(move |x| 1.0 / (4.0 + (k * (x[0] * x[0] + x[1] * x[1])).cos())),
        source: arc(|x| -(x[0] * x[0] + x[1] * x[1])),
        dirichlet: exact.clone(),
        reaction: None,
        exact: Some(exact),
        params: vec![("eps".into(), eps)],
        ellipticity: Some((0.2, 1.0 / 3.0)),
    }
    .checked()
}

/// Two-scale coefficient built from ratios of shifted sines, `f = -10`, `g = 0`.
pub fn double_scale_2d(eps: f64) -> Result<ProblemSpec> {
    check_eps("eps", eps)?;
    let k = 2.0 * PI / eps;
    ProblemSpec {
        name: "double-scale-2d".into(),
        dim: 2,
        domain: Domain::unit(2)?,
        coefficient: arc(move |x| {
            let (sx, cx, sy) = ((k * x[0]).sin(), (k * x[0]).cos(), (k * x[1]).sin());
            (1.5 + sx) / (1.5 + sy)
                + (1.5 + sy) / (1.5 + cx)
                + (4.0 * x[0] * x[0] * x[1] * x[1]).sin()
                + 1.0
        }),
        source: arc(|_| -10.0),
        dirichlet: arc(|_| 0.0),
        reaction: None,
        exact: None,
        params: vec![("eps".into(), eps)],
        ellipticity: None,
    }
    .checked()
}

/// Poisson-Boltzmann type problem with `kappa = pi^2`,
/// `A = 1 + 0.5 cos(10 pi x) cos(20 pi y)` and an imposed smooth-plus-oscillatory solution.
pub fn poisson_boltzmann() -> Result<ProblemSpec> {
    let coefficient = |x: f64, y: f64| 1.0 + 0.5 * (10.0 * PI * x).cos() * (20.0 * PI * y).cos();
    let exact = arc(|x| {
        (PI * x[0]).sin() * (PI * x[1]).sin()
            + 0.05 * (10.0 * PI * x[0]).sin() * (20.0 * PI * x[1]).sin()
    });
    let source = arc(move |p| {
        let (x, y) = (p[0], p[1]);
        let (s1x, c1x, s1y, c1y) = (
            (PI * x).sin(),
            (PI * x).cos(),
            (PI * y).sin(),
            (PI * y).cos(),
        );
        let (s10x, c10x) = ((10.0 * PI * x).sin(), (10.0 * PI * x).cos());
        let (s20y, c20y) = ((20.0 * PI * y).sin(), (20.0 * PI * y).cos());
        let u = s1x * s1y + 0.05 * s10x * s20y;
        let lap = -2.0 * PI * PI * s1x * s1y - 25.0 * PI * PI * s10x * s20y;
        let ux = PI * c1x * s1y + 0.5 * PI * c10x * s20y;
        let uy = PI * s1x * c1y + PI * s10x * c20y;
        let ax = -5.0 * PI * s10x * c20y;
        let ay = -10.0 * PI * c10x * s20y;
        -coefficient(x, y) * lap - (ax * ux + ay * uy) + PI * PI * u
    });
    ProblemSpec {
        name: "poisson-boltzmann".into(),
        dim: 2,
        domain: Domain::unit(2)?,
        coefficient: arc(move |x| coefficient(x[0], x[1])),
        source,
        dirichlet: exact.clone(),
        reaction: Some(arc(|_| PI * PI)),
        exact: Some(exact),
        params: Vec::new(),
        ellipticity: Some((0.5, 1.5)),
    }
    .checked()
}

/// `-u'' = 0` with `u = x`: lies in any trial space that can represent linears.
pub fn linear_1d() -> Result<ProblemSpec> {
    let exact = arc(|x| x[0]);
    ProblemSpec {
        name: "linear-1d".into(),
        dim: 1,
        domain: Domain::unit(1)?,
        coefficient: arc(|_| 1.0),
        source: arc(|_| 0.0),
        dirichlet: exact.clone(),
        reaction: None,
        exact: Some(exact),
        params: Vec::new(),
        ellipticity: Some((1.0, 1.0)),
    }
    .checked()
}

/// `-u'' = pi^2 sin(pi x)` with `u = sin(pi x)`.
pub fn sine_1d() -> Result<ProblemSpec> {
    let exact = arc(|x| (PI * x[0]).sin());
    ProblemSpec {
        name: "sine-1d".into(),
        dim: 1,
        domain: Domain::unit(1)?,
        coefficient: arc(|_| 1.0),
        source: arc(|x| PI * PI * (PI * x[0]).sin()),
        dirichlet: exact.clone(),
        reaction: None,
        exact: Some(exact),
        params: Vec::new(),
        ellipticity: Some((1.0, 1.0)),
    }
    .checked()
}

/// `-lap u = 2 pi^2 sin(pi x) sin(pi y)` with `u = sin(pi x) sin(pi y)`.
pub fn sine_2d() -> Result<ProblemSpec> {
    let exact = arc(|x| (PI * x[0]).sin() * (PI * x[1]).sin());
    ProblemSpec {
        name: "sine-2d".into(),
        dim: 2,
        domain: Domain::unit(2)?,
        coefficient: arc(|_| 1.0),
        source: arc(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()),
        dirichlet: exact.clone(),
        reaction: None,
        exact: Some(exact),
        params: Vec::new(),
        ellipticity: Some((1.0, 1.0)),
    }
    .checked()
}

/// `-lap u = 0` with `u = 1 + x - 2y`, exactly linear in 2D.
pub fn linear_2d() -> Result<ProblemSpec> {
    let exact = arc(|x| 1.0 + x[0] - 2.0 * x[1]);
    ProblemSpec {
        name: "linear-2d".into(),
        dim: 2,
        domain: Domain::unit(2)?,
        coefficient: arc(|_| 1.0),
        source: arc(|_| 0.0),
        dirichlet: exact.clone(),
        reaction: None,
        exact: Some(exact),
        params: Vec::new(),
        ellipticity: Some((1.0, 1.0)),
    }
    .checked()
}

/// Scale parameters of a named problem.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProblemParams {
    pub eps: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
}

pub const PROBLEM_NAMES: &[&str] = &[
    "periodic-1d",
    "double-scale-1d",
    "three-scale-1d",
    "radial-2d",
    "double-scale-2d",
    "poisson-boltzmann",
    "linear-1d",
    "sine-1d",
    "linear-2d",
    "sine-2d",
];

/// Builds a problem from its name; see [`PROBLEM_NAMES`].
pub fn by_name(name: &str, params: &ProblemParams) -> Result<ProblemSpec> {
    let need = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| RrnnError::invalid(format!("problem {name} needs parameter {key}")))
    };
    match name {
        "periodic-1d" => periodic_1d(need(params.eps, "eps")?),
        "double-scale-1d" => double_scale_1d(need(params.eps, "eps")?),
        "three-scale-1d" => three_scale_1d(need(params.eps1, "eps1")?, need(params.eps2, "eps2")?),
        "radial-2d" => radial_2d(need(params.eps, "eps")?),
        "double-scale-2d" => double_scale_2d(need(params.eps, "eps")?),
        "poisson-boltzmann" => poisson_boltzmann(),
        "linear-1d" => linear_1d(),
        "sine-1d" => sine_1d(),
        "linear-2d" => linear_2d(),
        "sine-2d" => sine_2d(),
        other => Err(RrnnError::invalid(format!(
            "unknown problem {other:?}; expected one of {PROBLEM_NAMES:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Conservative second difference of the flux A u' applied to the exact solution.
    fn residual_1d(p: &ProblemSpec, x: f64, h: f64) -> f64 {
        let u = p.exact.as_ref().unwrap();
        let a = |t: f64| p.coefficient_at(&[t]);
        let (ul, uc, ur) = (u(&[x - h]), u(&[x]), u(&[x + h]));
        let div = (a(x + h / 2.0) * (ur - uc) - a(x - h / 2.0) * (uc - ul)) / (h * h);
        -div + p.reaction_at(&[x]) * uc - p.source_at(&[x])
    }

    fn residual_2d(p: &ProblemSpec, x: f64, y: f64, h: f64) -> f64 {
        let u = p.exact.as_ref().unwrap();
        let a = |s: f64, t: f64| p.coefficient_at(&[s, t]);
        let uc = u(&[x, y]);
        let div = (a(x + h / 2.0, y) * (u(&[x + h, y]) - uc)
            - a(x - h / 2.0, y) * (uc - u(&[x - h, y]))
            + a(x, y + h / 2.0) * (u(&[x, y + h]) - uc)
            - a(x, y - h / 2.0) * (uc - u(&[x, y - h])))
            / (h * h);
        -div + p.reaction_at(&[x, y]) * uc - p.source_at(&[x, y])
    }

    #[test]
    fn periodic_examples() {
        let p = periodic_1d(0.1).unwrap();
        assert_eq!(p.exact_at(&[0.0]).unwrap(), 0.0);
        assert!(p.exact_at(&[1.0]).unwrap().abs() < 1e-15);
        assert!((p.coefficient_at(&[0.0]) - 1.0 / 3.0).abs() < 1e-16);
        assert!(periodic_1d(0.0).is_err());
        assert!(periodic_1d(-1.0).is_err());
    }

    #[test]
    fn periodic_residual_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for eps in [0.5, 0.1, 0.05] {
            let p = periodic_1d(eps).unwrap();
            for _ in 0..1000 {
                let x = rng.random_range(0.001..0.999);
                let r = residual_1d(&p, x, 1e-5);
                assert!(r.abs() <= 1e-4, "eps={eps} x={x} r={r}");
            }
        }
    }

    #[test]
    fn double_and_three_scale_examples() {
        let p = double_scale_1d(0.05).unwrap();
        assert_eq!(p.coefficient_at(&[0.0]), 2.0);
        assert_eq!(p.dirichlet_at(&[0.0]), 1.0);
        assert_eq!(p.dirichlet_at(&[1.0]), 1.0);
        let (lo, hi) = p.check_positivity().unwrap();
        assert!(lo >= 1.0 && hi <= 3.0);

        let p = three_scale_1d(0.1, 0.01).unwrap();
        assert_eq!(p.coefficient_at(&[0.0]), 9.0);
        let (lo, hi) = p.check_positivity().unwrap();
        assert!(lo >= 1.0 && hi <= 9.0);
        assert_eq!(p.param("eps2"), Some(0.01));
    }

    #[test]
    fn radial_examples_and_residual() {
        let eps = 0.5;
        let p = radial_2d(eps).unwrap();
        let u0 = p.exact_at(&[0.0, 0.0]).unwrap();
        assert!((u0 - eps * eps / (32.0 * PI * PI)).abs() < 1e-17);
        assert!((p.coefficient_at(&[0.0, 0.0]) - 0.2).abs() < 1e-16);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for eps in [0.5, 0.2] {
            let p = radial_2d(eps).unwrap();
            for _ in 0..1000 {
                let (x, y) = (rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
                let r = residual_2d(&p, x, y, 1e-5);
                assert!(r.abs() <= 1e-3, "eps={eps} ({x},{y}) r={r}");
            }
        }
    }

    #[test]
    fn double_scale_2d_examples() {
        let p = double_scale_2d(0.1).unwrap();
        assert!((p.coefficient_at(&[0.0, 0.0]) - 2.6).abs() < 1e-15);
        for t in [0.0, 0.3, 1.0] {
            for x in [[t, 0.0], [t, 1.0], [0.0, t], [1.0, t]] {
                assert_eq!(p.dirichlet_at(&x), 0.0);
            }
        }
        let (lo, _) = p.check_positivity().unwrap();
        assert!(lo > 0.0);
    }

    #[test]
    fn poisson_boltzmann_examples_and_residual() {
        let p = poisson_boltzmann().unwrap();
        assert!((p.exact_at(&[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-14);
        let (lo, hi) = p.check_positivity().unwrap();
        assert!(lo >= 0.5 && hi <= 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let (x, y) = (rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
            let r = residual_2d(&p, x, y, 1e-5);
            assert!(r.abs() <= 1e-3, "({x},{y}) r={r}");
        }
    }

    #[test]
    fn exact_solutions_match_boundary_data() {
        let problems = [
            periodic_1d(0.05).unwrap(),
            radial_2d(0.2).unwrap(),
            poisson_boltzmann().unwrap(),
            linear_1d().unwrap(),
            sine_1d().unwrap(),
            linear_2d().unwrap(),
            sine_2d().unwrap(),
        ];
        for p in &problems {
            let pts: Vec<Vec<f64>> = if p.dim == 1 {
                vec![vec![0.0], vec![1.0]]
            } else {
                (0..=10)
                    .flat_map(|i| {
                        let t = i as f64 / 10.0;
                        [vec![t, 0.0], vec![t, 1.0], vec![0.0, t], vec![1.0, t]]
                    })
                    .collect()
            };
            for x in pts {
                let d = p.dirichlet_at(&x) - p.exact_at(&x).unwrap();
                assert!(d.abs() < 1e-14, "{} at {x:?}: {d}", p.name);
            }
        }
    }

    #[test]
    fn manufactured_residuals_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for p in [linear_1d().unwrap(), sine_1d().unwrap()] {
            for _ in 0..100 {
                assert!(residual_1d(&p, rng.random_range(0.01..0.99), 1e-4).abs() < 1e-4);
            }
        }
        for p in [linear_2d().unwrap(), sine_2d().unwrap()] {
            for _ in 0..100 {
                let (x, y) = (rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
                assert!(residual_2d(&p, x, y, 1e-4).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn positivity_check_rejects_bad_coefficient() {
        let mut p = sine_1d().unwrap();
        p.coefficient = arc(|x| x[0] - 0.5);
        assert!(p.check_positivity().is_err());
        let mut p = sine_1d().unwrap();
        p.reaction = Some(arc(|_| -1.0));
        assert!(p.check_positivity().is_err());
    }

    #[test]
    fn lookup_by_name() {
        let params = ProblemParams {
            eps: Some(0.1),
            eps1: Some(0.1),
            eps2: Some(0.01),
        };
        for name in PROBLEM_NAMES {
            let p = by_name(name, &params).unwrap();
            assert_eq!(&p.name, name);
        }
        assert!(by_name("periodic-1d", &ProblemParams::default()).is_err());
        assert!(by_name("nope", &params).is_err());
        assert_eq!(
            by_name("three-scale-1d", &params).unwrap().key(),
            "three-scale-1d_eps10.1_eps20.01"
        );
    }
}
