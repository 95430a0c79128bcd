mod common;

use dgff_core::field::{
    green_column, green_diagonal, green_exact_small, potential_kernel, sample_dgff,
    variance_profile,
};
use dgff_core::{BoxGeometry, DgffSampler, FieldSample, GreenCache, Vertex};

fn geom(n: usize) -> BoxGeometry {
    BoxGeometry::new(n).unwrap()
}

#[test]
fn columns_match_dense_solve() {
    for n in [1, 2, 3, 4, 7, 8, 16] {
        let g = geom(n);
        let dense = common::dense_green(n);
        for v in g.vertices() {
            let col = green_column(g, v).unwrap();
            let vi = g.index(v).unwrap();
            for (ui, &x) in col.values().iter().enumerate() {
                assert!((x - dense[(vi, ui)]).abs() < 1e-10, "N={n} v={v:?} u={ui}");
            }
        }
    }
}

#[test]
fn two_by_two_by_hand() {
    let g = geom(2);
    let col = green_column(g, Vertex::new(1, 1)).unwrap();
    let expect = [7.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
    for (a, b) in col.values().iter().zip(expect) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn spectrum_matches_dense_eigenvalues() {
    use std::f64::consts::PI;
    for n in [2, 5, 9] {
        let mut formula: Vec<f64> = (1..=n)
            .flat_map(|j| (1..=n).map(move |k| (j, k)))
            .map(|(j, k)| {
                let c = |m: usize| (PI * m as f64 / (n + 1) as f64).cos();
                1.0 - 0.5 * (c(j) + c(k))
            })
            .collect();
        formula.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in formula.iter().zip(common::dense_eigenvalues(n)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn green_counts_walk_visits() {
    let g = geom(6);
    let v = Vertex::new(3, 3);
    let w = Vertex::new(4, 2);
    let exact = green_column(g, v).unwrap().get(w);
    let (mean, se) = common::walk_visits(g, v, w, 200_000, &mut common::rng(5));
    assert!((mean - exact).abs() < 5.0 * se, "{mean} ± {se} vs {exact}");
}

#[test]
fn diagonal_matches_columns() {
    let g = geom(12);
    let diag = green_diagonal(g);
    for v in g.vertices() {
        let i = g.index(v).unwrap();
        assert!((diag[i] - green_column(g, v).unwrap().at_index(i)).abs() < 1e-11);
    }
}

#[test]
fn dense_oracle_agrees_with_library_inverse() {
    let g = geom(10);
    let lib = green_exact_small(g).unwrap();
    let lu = common::dense_green(10);
    assert!((lib - lu).abs().max() < 1e-11);
    assert!(green_exact_small(geom(64)).is_err());
}

#[test]
fn variance_grows_like_log_n() {
    use std::f64::consts::PI;
    // G(c, c) = (1/π) log N² + O(1); the O(1) part settles as N grows.
    let offsets: Vec<f64> = [16usize, 32, 64, 128]
        .iter()
        .map(|&n| {
            let g = geom(n);
            let c = g.center();
            green_column(g, c).unwrap().get(c) - g.log_n2() / PI
        })
        .collect();
    for w in offsets.windows(2) {
        assert!((w[1] - w[0]).abs() < 0.05, "{offsets:?}");
    }
    let profile = variance_profile(geom(32), 0.25).unwrap();
    assert!(profile
        .iter()
        .all(|(v, _)| geom(32).boundary_distance(*v) > 8));
}

#[test]
fn potential_kernel_tracks_green_difference() {
    // G(v,v) - G(v,w) ≈ a(v,w) deep inside a large box.
    let g = geom(128);
    let c = g.center();
    let col = green_column(g, c).unwrap();
    for d in [3i64, 5, 8] {
        let w = c.offset(d, 0);
        let diff = col.get(c) - col.get(w);
        let a = potential_kernel(c, w).value;
        assert!((diff - a).abs() < 0.02, "d={d}: {diff} vs {a}");
    }
    assert_eq!(potential_kernel(c, c).value, 0.0);
}

#[test]
fn sampler_is_deterministic_and_snapshot_round_trips() {
    let g = geom(24);
    let a = sample_dgff(g, 99);
    let b = DgffSampler::new(g).sample(99);
    assert_eq!(a, b);
    assert_ne!(a.values(), sample_dgff(g, 100).values());

    let mut buf = Vec::new();
    a.write_snapshot(&mut buf).unwrap();
    assert_eq!(buf.len(), 32 + 8 * 24 * 24);
    let back = FieldSample::read_snapshot(&buf[..]).unwrap();
    assert_eq!(back, a);
    assert_eq!(back.seed(), 99);

    let mut bad = buf.clone();
    bad[0] ^= 1;
    assert!(FieldSample::read_snapshot(&bad[..]).is_err());
    assert!(FieldSample::read_snapshot(&buf[..40]).is_err());
}

#[test]
fn sample_outside_box_is_zero() {
    let s = sample_dgff(geom(5), 1);
    assert_eq!(s.value(Vertex::new(0, 3)), 0.0);
    assert_eq!(s.value(Vertex::new(6, 6)), 0.0);
}

#[test]
fn cache_reuses_columns() {
    let g = geom(16);
    let cache = GreenCache::with_capacity(g, 2);
    let v = Vertex::new(3, 4);
    let first = cache.column(v).unwrap();
    let again = cache.column(v).unwrap();
    assert!(std::sync::Arc::ptr_eq(&first, &again));
    cache.column(Vertex::new(1, 1)).unwrap();
    cache.column(Vertex::new(2, 2)).unwrap();
    let (hits, misses) = cache.stats();
    assert_eq!((hits, misses), (1, 3));
    assert!(cache.column(Vertex::new(17, 1)).is_err());
    let budget = GreenCache::with_memory_budget(geom(256), 64 << 20);
    assert!(budget.capacity() >= 1 && budget.capacity() < 4096);
}
