use proptest::prelude::*;

use rrnn::basis::{gauss_lobatto, legendre, test_function};
use rrnn::cli::metrics;
use rrnn::partition::{decompose, Domain};
use rrnn::rbfnet::LocalRbfNet;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reference_map_round_trips(s1 in 1usize..12, s2 in 1usize..12, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let p = decompose(&Domain::unit(2).unwrap(), &[s1, s2]).unwrap();
        let x = [u, v];
        let id = p.locate(&x).unwrap();
        let sub = p.subdomain(id);
        let xr = sub.to_reference(&x).unwrap();
        prop_assert!(xr.iter().all(|t| t.abs() <= 1.0 + 1e-12));
        let back = sub.from_reference(&xr);
        for d in 0..2 {
            prop_assert!((back[d] - x[d]).abs() <= 1e-14);
        }
    }

    #[test]
    fn partition_tiles_the_square(s1 in 1usize..10, s2 in 1usize..10) {
        let p = decompose(&Domain::unit(2).unwrap(), &[s1, s2]).unwrap();
        prop_assert_eq!(p.len(), s1 * s2);
        let area: f64 = p.subdomains().iter().map(|s| s.measure()).sum();
        prop_assert!((area - 1.0).abs() <= 1e-12);
        prop_assert_eq!(p.interfaces().len(), (s1 - 1) * s2 + s1 * (s2 - 1));
        prop_assert_eq!(p.boundary_facets().len(), 2 * (s1 + s2));
    }

    #[test]
    fn lobatto_weights_are_positive_and_sum_to_two(n in 2usize..90) {
        let rule = gauss_lobatto(n).unwrap();
        prop_assert!(rule.weights.iter().all(|w| *w > 0.0));
        let total: f64 = rule.weights.iter().sum();
        prop_assert!((total - 2.0).abs() <= 1e-12);
        prop_assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn legendre_is_bounded_and_fixed_at_one(k in 0usize..60, x in -1.0f64..1.0) {
        let (p, _) = legendre(k, x);
        prop_assert!(p.abs() <= 1.0 + 1e-12);
        let (p1, d1) = legendre(k, 1.0);
        prop_assert!((p1 - 1.0).abs() <= 1e-12);
        let kk = k as f64;
        prop_assert!((d1 - kk * (kk + 1.0) / 2.0).abs() <= 1e-9 * (1.0 + kk * kk));
    }

    #[test]
    fn test_functions_vanish_on_facets(k1 in 1usize..25, k2 in 1usize..25, t in -1.0f64..1.0) {
        for xr in [[-1.0, t], [1.0, t], [t, -1.0], [t, 1.0]] {
            prop_assert!(test_function(&[k1, k2], &xr).unwrap().0.abs() <= 1e-13);
        }
    }

    #[test]
    fn basis_is_positive_and_peaks_at_center(
        c in -1.0f64..1.0, sigma in 0.0f64..10.0, x in -1.0f64..1.0,
    ) {
        let net = LocalRbfNet::new(1, vec![c], vec![sigma]).unwrap();
        let at_x = net.eval_basis(&[x])[0];
        prop_assert!(at_x > 0.0 && at_x <= 1.0);
        prop_assert!((net.eval_basis(&[c])[0] - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn metrics_scale_invariant(
        reference in prop::collection::vec(-5.0f64..5.0, 2..40),
        noise in 0.0f64..0.1, scale in 0.1f64..100.0,
    ) {
        prop_assume!(reference.iter().any(|v| v.abs() > 1e-3));
        let approx: Vec<f64> = reference.iter().enumerate().map(|(i, v)| v + noise * (i as f64).sin()).collect();
        let (m1, r1) = metrics(&approx, &reference).unwrap();
        let sa: Vec<f64> = approx.iter().map(|v| v * scale).collect();
        let sr: Vec<f64> = reference.iter().map(|v| v * scale).collect();
        let (m2, r2) = metrics(&sa, &sr).unwrap();
        prop_assert!((m1 - m2).abs() <= 1e-12 * (1.0 + m1));
        prop_assert!((r1 - r2).abs() <= 1e-12 * (1.0 + r1));
        prop_assert!(m1 >= 0.0 && r1 >= 0.0);
    }
}
