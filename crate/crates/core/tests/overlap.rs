mod common;

use std::f64::consts::PI;

use dgff_core::closedform::beta_c;
use dgff_core::field::sample_dgff;
use dgff_core::overlap::{
    bk_derivative_identity, bk_integral_identity, empirical_cdf, integrate_empirical_cdf,
    overlap_q, overlap_sample, sample_pair_overlaps, two_overlap_distribution,
};
use dgff_core::{BoxGeometry, DgffSampler, GibbsContext, GreenCache, OverlapConfig, Vertex};
use proptest::prelude::*;

#[test]
fn overlaps_match_dense_green() {
    let n = 10;
    let geom = BoxGeometry::new(n).unwrap();
    let cache = GreenCache::new(geom);
    let g = common::dense_green(n);
    let scale = PI / geom.log_n2();
    for (v, w) in [((1, 1), (10, 10)), ((5, 5), (5, 5)), ((3, 7), (4, 7))] {
        let (v, w) = (Vertex::new(v.0, v.1), Vertex::new(w.0, w.1));
        let q = overlap_q(&cache, v, w).unwrap();
        let expect = g[(geom.index(v).unwrap(), geom.index(w).unwrap())] * scale;
        assert!((q - expect).abs() < 1e-12);
    }
}

#[test]
fn pair_overlaps_are_consistent_with_pairs() {
    let geom = BoxGeometry::new(24).unwrap();
    let cache = GreenCache::new(geom);
    let s = sample_dgff(geom, 2);
    let ctx = GibbsContext::on_box(&s, 2.0).unwrap();
    let po = sample_pair_overlaps(&ctx, &cache, 3000, 8);
    for (&(a, b), &q) in po.pairs.iter().zip(&po.q) {
        let expect = overlap_q(&cache, geom.vertex(a), geom.vertex(b)).unwrap();
        assert!((q - expect).abs() < 1e-14);
    }
    assert_eq!(po, sample_pair_overlaps(&ctx, &cache, 3000, 8));
}

#[test]
fn histogram_is_independent_of_thread_count() {
    let geom = BoxGeometry::new(32).unwrap();
    let sampler = DgffSampler::new(geom);
    let cache = GreenCache::new(geom);
    let config = OverlapConfig::new(32, 2.0 * beta_c(), Some(0.3), 6, 500, 21);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| two_overlap_distribution(&config, &sampler, &cache).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert!(one.x.windows(2).all(|w| w[0] <= w[1]));
    assert!(one.x.iter().all(|&x| (0.0..=1.0).contains(&x)));
    assert_eq!(one.rows().len(), one.r_grid.len());
}

#[test]
fn integral_identity_holds_on_field_overlaps() {
    let geom = BoxGeometry::new(32).unwrap();
    let sampler = DgffSampler::new(geom);
    let cache = GreenCache::new(geom);
    let config = OverlapConfig::new(32, 3.0, Some(0.4), 1, 4000, 4);
    let region = config.region().unwrap();
    for id in 0..5 {
        let s = overlap_sample(&config, &region, &sampler, &cache, id).unwrap();
        for alpha in [0.0, 0.25, 0.5, 0.9] {
            let id = bk_integral_identity(&s.overlaps.q, alpha).unwrap();
            assert!(id.check.difference.abs() < 1e-12, "{id:?}");
        }
    }
}

proptest! {
    #[test]
    fn integral_identity_on_arbitrary_overlaps(
        q in prop::collection::vec(-0.2f64..1.5, 1..300),
        alpha in 0.0f64..1.0,
    ) {
        let id = bk_integral_identity(&q, alpha).unwrap();
        prop_assert!(id.check.difference.abs() < 1e-12);
        prop_assert!(id.overshoot >= 0.0);
    }

    #[test]
    fn integral_matches_grid_quadrature(q in prop::collection::vec(0.0f64..1.2, 1..50), alpha in 0.0f64..0.9) {
        let steps = 20_000;
        let h = (1.0 - alpha) / steps as f64;
        let grid: Vec<f64> = (0..steps).map(|k| alpha + (k as f64 + 0.5) * h).collect();
        let riemann: f64 = empirical_cdf(&q, &grid).iter().sum::<f64>() * h;
        // Each breakpoint can cost at most one cell of width h.
        prop_assert!((integrate_empirical_cdf(&q, alpha) - riemann).abs() <= h * (q.len() as f64 + 1.0));
    }
}

#[test]
fn derivative_identity_across_temperatures() {
    let geom = BoxGeometry::new(32).unwrap();
    for seed in 0..4 {
        let s = sample_dgff(geom, seed);
        for beta in [0.5, 1.0, 2.0] {
            let id = bk_derivative_identity(&s, beta, 0.4, 0.5, 1e-4).unwrap();
            assert!(
                id.check.difference.abs() < 1e-6,
                "seed {seed} beta {beta}: {id:?}"
            );
            assert!(id.convexity >= -1e-12);
        }
    }
}
