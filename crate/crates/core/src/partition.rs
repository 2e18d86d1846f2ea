//! Uniform tensor-product decomposition of a box domain into non-overlapping
//! subdomains, the affine maps onto the reference cube `[-1, 1]^n`, and the
//! boundary / interface collocation sets used to glue local solutions.
//!
//! Subdomain ids are row-major in the per-axis indices: in 2D the subdomain
//! with indices `(i, j)` has id `i * counts[1] + j`.

use rand::Rng;

use crate::error::{Result, RrnnError};

/// Absolute tolerance for facet membership and domain containment.
pub const FACET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(RrnnError::invalid("domain bounds have different lengths"));
        }
        if !(1..=2).contains(&lower.len()) {
            return Err(RrnnError::invalid(format!(
                "domain dimension must be 1 or 2, got {}",
                lower.len()
            )));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(RrnnError::invalid(format!(
                    "domain bounds must satisfy lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Domain { lower, upper })
    }

    /// The unit interval or unit square.
    pub fn unit(dim: usize) -> Result<Self> {
        Domain::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn measure(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (lo, hi))| *xi >= lo - FACET_TOL && *xi <= hi + FACET_TOL)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    pub id: usize,
    /// Per-axis grid index of this subdomain.
    pub index: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub half_widths: Vec<f64>,
}

impl Subdomain {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(xi, (lo, hi))| *xi >= lo - FACET_TOL && *xi <= hi + FACET_TOL)
    }

    /// Maps a physical point of this box onto `[-1, 1]^n`.
    pub fn to_reference(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.contains(x) {
            return Err(RrnnError::OutOfDomain {
                point: x.to_vec(),
                region: format!("subdomain {} {:?}..{:?}", self.id, self.lo, self.hi),
            });
        }
        let mut out = vec![0.0; x.len()];
        self.to_reference_unchecked(x, &mut out);
        Ok(out)
    }

    pub(crate) fn to_reference_unchecked(&self, x: &[f64], out: &mut [f64]) {
        for d in 0..x.len() {
            out[d] = 2.0 * (x[d] - self.lo[d]) / (self.hi[d] - self.lo[d]) - 1.0;
        }
    }

    pub fn from_reference(&self, xr: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; xr.len()];
        self.from_reference_into(xr, &mut out);
        out
    }

    pub(crate) fn from_reference_into(&self, xr: &[f64], out: &mut [f64]) {
        for d in 0..xr.len() {
            out[d] = self.lo[d] + (xr[d] + 1.0) * self.half_widths[d];
        }
    }

    /// Determinant of the reference-to-physical map, `prod h_d / 2`.
    pub fn jacobian(&self) -> f64 {
        self.half_widths.iter().product()
    }

    /// Chain-rule factor `2 / h_d` taking reference derivatives to physical ones.
    pub fn gradient_scale(&self, axis: usize) -> f64 {
        1.0 / self.half_widths[axis]
    }

    pub fn measure(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(lo, hi)| hi - lo)
            .product()
    }
}

/// An axis-aligned facet: a point in 1D, a segment in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Axis the facet is normal to.
    pub axis: usize,
    /// Coordinate of the facet along `axis`.
    pub position: f64,
    /// Extent along the tangential axis (2D only).
    pub span: Option<(f64, f64)>,
}

impl Facet {
    fn sample<R: Rng + ?Sized>(&self, dim: usize, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        match (dim, self.span) {
            (1, _) | (_, None) => vec![vec![self.position]],
            (_, Some((a, b))) => (0..count)
                .map(|_| {
                    let t = a + (b - a) * rng.random::<f64>();
                    let mut x = vec![0.0; 2];
                    x[self.axis] = self.position;
                    x[1 - self.axis] = t;
                    x
                })
                .collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if (x[self.axis] - self.position).abs() > FACET_TOL {
            return false;
        }
        match self.span {
            None => true,
            Some((a, b)) => {
                let t = x[1 - self.axis];
                t >= a - FACET_TOL && t <= b + FACET_TOL
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interface {
    pub id: usize,
    /// The subdomain on the lower-coordinate side (K+).
    pub left_id: usize,
    /// The subdomain on the upper-coordinate side (K-).
    pub right_id: usize,
    pub facet: Facet,
    /// Unit normal pointing out of `left_id`.
    pub normal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub subdomain: usize,
    pub facet: Facet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    domain: Domain,
    counts: Vec<usize>,
    subdomains: Vec<Subdomain>,
    interfaces: Vec<Interface>,
    boundary_facets: Vec<BoundaryFacet>,
}

/// Uniform tensor partition of `domain` with `counts[d]` cells along axis `d`.
pub fn decompose(domain: &Domain, counts: &[usize]) -> Result<Partition> {
    let dim = domain.dim();
    if counts.len() != dim {
        return Err(RrnnError::invalid(format!(
            "expected {dim} subdomain counts, got {}",
            counts.len()
        )));
    }
    if counts.contains(&0) {
        return Err(RrnnError::invalid("subdomain counts must be >= 1"));
    }
    let widths: Vec<f64> = (0..dim)
        .map(|d| (domain.upper[d] - domain.lower[d]) / counts[d] as f64)
        .collect();
    let edge = |d: usize, i: usize| {
        if i == counts[d] {
            domain.upper[d]
        } else {
            domain.lower[d] + i as f64 * widths[d]
        }
    };

    let total: usize = counts.iter().product();
    let mut subdomains = Vec::with_capacity(total);
    for id in 0..total {
        let index = unravel(id, counts);
        let lo: Vec<f64> = (0..dim).map(|d| edge(d, index[d])).collect();
        let hi: Vec<f64> = (0..dim).map(|d| edge(d, index[d] + 1)).collect();
        let half_widths = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).collect();
        subdomains.push(Subdomain {
            id,
            index,
            lo,
            hi,
            half_widths,
        });
    }

    let tangential_span = |sub: &Subdomain, axis: usize| -> Option<(f64, f64)> {
        (dim == 2).then(|| (sub.lo[1 - axis], sub.hi[1 - axis]))
    };

    let mut interfaces = Vec::new();
    let mut boundary_facets = Vec::new();
    for sub in &subdomains {
        for axis in 0..dim {
            if sub.index[axis] + 1 < counts[axis] {
                let mut nb = sub.index.clone();
                nb[axis] += 1;
                let mut normal = vec![0.0; dim];
                normal[axis] = 1.0;
                interfaces.push(Interface {
                    id: interfaces.len(),
                    left_id: sub.id,
                    right_id: ravel(&nb, counts),
                    facet: Facet {
                        axis,
                        position: sub.hi[axis],
                        span: tangential_span(sub, axis),
                    },
                    normal,
                });
            }
        }
        for axis in 0..dim {
            if sub.index[axis] == 0 {
                boundary_facets.push(BoundaryFacet {
                    subdomain: sub.id,
                    facet: Facet {
                        axis,
                        position: domain.lower[axis],
                        span: tangential_span(sub, axis),
                    },
                });
            }
            if sub.index[axis] + 1 == counts[axis] {
                boundary_facets.push(BoundaryFacet {
                    subdomain: sub.id,
                    facet: Facet {
                        axis,
                        position: domain.upper[axis],
                        span: tangential_span(sub, axis),
                    },
                });
            }
        }
    }

    Ok(Partition {
        domain: domain.clone(),
        counts: counts.to_vec(),
        subdomains,
        interfaces,
        boundary_facets,
    })
}

fn unravel(mut id: usize, counts: &[usize]) -> Vec<usize> {
    let mut index = vec![0; counts.len()];
    for d in (0..counts.len()).rev() {
        index[d] = id % counts[d];
        id /= counts[d];
    }
    index
}

fn ravel(index: &[usize], counts: &[usize]) -> usize {
    index.iter().zip(counts).fold(0, |acc, (i, c)| acc * c + i)
}

impl Partition {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total number of subdomains `S`.
    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn subdomain(&self, id: usize) -> &Subdomain {
        &self.subdomains[id]
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    /// Id of the subdomain owning `x`; points on a shared facet go to the
    /// lowest id among the subdomains touching it.
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        if !self.domain.contains(x) {
            return Err(RrnnError::OutOfDomain {
                point: x.to_vec(),
                region: format!("domain {:?}..{:?}", self.domain.lower, self.domain.upper),
            });
        }
        let mut index = vec![0usize; self.dim()];
        for d in 0..self.dim() {
            let width = (self.domain.upper[d] - self.domain.lower[d]) / self.counts[d] as f64;
            let t = (x[d] - self.domain.lower[d]) / width;
            let nearest = t.round();
            let k = if nearest >= 1.0 && (t - nearest).abs() * width <= FACET_TOL {
                nearest as usize - 1
            } else {
                t.floor().max(0.0) as usize
            };
            index[d] = k.min(self.counts[d] - 1);
        }
        Ok(ravel(&index, &self.counts))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub x: Vec<f64>,
    pub subdomain: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfacePoint {
    pub x: Vec<f64>,
    pub interface: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub boundary_points: Vec<BoundaryPoint>,
    pub interface_points: Vec<InterfacePoint>,
}

impl CollocationSet {
    pub fn n_b(&self) -> usize {
        self.boundary_points.len()
    }

    pub fn n_c(&self) -> usize {
        self.interface_points.len()
    }
}

/// Collocation points on the domain boundary and on interior facets.
///
/// In 2D every boundary edge receives `n_bper` and every interior edge
/// `n_cper` uniformly random points. In 1D each facet is a single point, so
/// the set is deterministic and the per-edge counts are ignored.
pub fn sample_collocation<R: Rng + ?Sized>(
    p: &Partition,
    n_bper: usize,
    n_cper: usize,
    rng: &mut R,
) -> Result<CollocationSet> {
    let dim = p.dim();
    if dim == 2 && (n_bper == 0 || n_cper == 0) {
        return Err(RrnnError::invalid(
            "N_bper and N_cper must be >= 1 in two dimensions",
        ));
    }
    let mut boundary_points = Vec::new();
    for bf in p.boundary_facets() {
        for x in bf.facet.sample(dim, n_bper, rng) {
            boundary_points.push(BoundaryPoint {
                x,
                subdomain: bf.subdomain,
            });
        }
    }
    let mut interface_points = Vec::new();
    for iface in p.interfaces() {
        for x in iface.facet.sample(dim, n_cper, rng) {
            interface_points.push(InterfacePoint {
                x,
                interface: iface.id,
            });
        }
    }
    Ok(CollocationSet {
        boundary_points,
        interface_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_dimensional_split() {
        let p = decompose(&Domain::unit(1).unwrap(), &[5]).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p.interfaces().len(), 4);
        for s in p.subdomains() {
            assert!((s.hi[0] - s.lo[0] - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn single_subdomain_has_no_interfaces() {
        let p = decompose(&Domain::unit(1).unwrap(), &[1]).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.interfaces().is_empty());
        assert_eq!(p.boundary_facets().len(), 2);
    }

    #[test]
    fn grid_edge_counts_match_enumeration() {
        // Brute-force count over all cell edges of a 5x5 grid: an edge is
        // interior when the neighbour across it exists.
        let (nx, ny) = (5usize, 5usize);
        let (mut interior, mut boundary) = (0, 0);
        for i in 0..nx as i64 {
            for j in 0..ny as i64 {
                for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        boundary += 1;
                    } else {
                        interior += 1;
                    }
                }
            }
        }
        interior /= 2;
        let p = decompose(&Domain::unit(2).unwrap(), &[5, 5]).unwrap();
        assert_eq!(p.len(), 25);
        assert_eq!(p.interfaces().len(), interior);
        assert_eq!(p.boundary_facets().len(), boundary);
        assert_eq!((interior, boundary), (40, 20));
    }

    #[test]
    fn zero_count_rejected() {
        let d = Domain::unit(2).unwrap();
        assert!(matches!(
            decompose(&d, &[3, 0]),
            Err(RrnnError::InvalidArgument(_))
        ));
        assert!(decompose(&d, &[3]).is_err());
    }

    #[test]
    fn reference_map_examples() {
        let p = decompose(&Domain::unit(1).unwrap(), &[5]).unwrap();
        let s = p.subdomain(1);
        assert!((s.to_reference(&[0.3]).unwrap()[0]).abs() < 1e-14);
        assert!((s.to_reference(&[0.4]).unwrap()[0] - 1.0).abs() < 1e-14);
        assert!(matches!(
            s.to_reference(&[0.5]),
            Err(RrnnError::OutOfDomain { .. })
        ));

        let p2 = decompose(&Domain::unit(2).unwrap(), &[2, 2]).unwrap();
        // indices (0, 1): [0, 0.5] x [0.5, 1]
        let s = p2.subdomain(1);
        assert_eq!(s.lo, vec![0.0, 0.5]);
        let r = s.to_reference(&[0.25, 0.75]).unwrap();
        assert!(r[0].abs() < 1e-15 && r[1].abs() < 1e-15);
    }

    #[test]
    fn facet_tolerance_accepts_tiny_overshoot() {
        let p = decompose(&Domain::unit(1).unwrap(), &[5]).unwrap();
        let s = p.subdomain(1);
        assert!(s.to_reference(&[0.4 + 5e-13]).is_ok());
        assert!(s.to_reference(&[0.4 + 5e-11]).is_err());
    }

    #[test]
    fn locate_breaks_ties_towards_lowest_id() {
        let p = decompose(&Domain::unit(1).unwrap(), &[5]).unwrap();
        assert_eq!(p.locate(&[0.0]).unwrap(), 0);
        assert_eq!(p.locate(&[0.2]).unwrap(), 0);
        assert_eq!(p.locate(&[0.2000001]).unwrap(), 1);
        assert_eq!(p.locate(&[1.0]).unwrap(), 4);
        assert!(p.locate(&[1.1]).is_err());

        let p2 = decompose(&Domain::unit(2).unwrap(), &[2, 2]).unwrap();
        assert_eq!(p2.locate(&[0.5, 0.5]).unwrap(), 0);
        assert_eq!(p2.locate(&[0.75, 0.5]).unwrap(), 2);
        assert_eq!(p2.locate(&[0.75, 0.75]).unwrap(), 3);
    }

    #[test]
    fn collocation_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p1 = decompose(&Domain::unit(1).unwrap(), &[20]).unwrap();
        let c1 = sample_collocation(&p1, 10, 10, &mut rng).unwrap();
        assert_eq!(c1.n_b(), 2);
        assert_eq!(c1.n_c(), 19);
        let xs: Vec<f64> = c1.boundary_points.iter().map(|b| b.x[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0]);

        let p2 = decompose(&Domain::unit(2).unwrap(), &[5, 5]).unwrap();
        let c2 = sample_collocation(&p2, 10, 10, &mut rng).unwrap();
        assert_eq!(c2.n_b(), 200);
        assert_eq!(c2.n_c(), 400);
        assert!(sample_collocation(&p2, 0, 10, &mut rng).is_err());
    }

    #[test]
    fn collocation_points_lie_on_their_facets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = decompose(&Domain::unit(2).unwrap(), &[4, 3]).unwrap();
        let c = sample_collocation(&p, 7, 5, &mut rng).unwrap();
        for bp in &c.boundary_points {
            let on_boundary =
                bp.x.iter()
                    .any(|v| v.abs() < 1e-15 || (v - 1.0).abs() < 1e-15);
            assert!(on_boundary);
            assert!(p.subdomain(bp.subdomain).contains(&bp.x));
        }
        for ip in &c.interface_points {
            let iface = &p.interfaces()[ip.interface];
            assert!(iface.facet.contains(&ip.x));
            for id in [iface.left_id, iface.right_id] {
                let r = p.subdomain(id).to_reference(&ip.x).unwrap();
                assert!((r[iface.facet.axis].abs() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn collocation_is_seed_deterministic() {
        let p = decompose(&Domain::unit(2).unwrap(), &[3, 3]).unwrap();
        let a = sample_collocation(&p, 10, 10, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = sample_collocation(&p, 10, 10, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }
}
