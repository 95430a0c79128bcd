//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls the spectral code: Green functions come from dense LU solves of
//! `I - Q`, conditional means from covariance Schur complements, harmonic measure from
//! simulated random walks and PD weights from stick-breaking.

#![allow(dead_code)]

use dgff_core::{BoxGeometry, Vertex};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `I - Q` restricted to `sites`, in the given order.
pub fn walk_precision(sites: &[Vertex]) -> DMatrix<f64> {
    let m = sites.len();
    let mut a = DMatrix::identity(m, m);
    for (i, v) in sites.iter().enumerate() {
        for (j, w) in sites.iter().enumerate() {
            if v.dist2(*w) == 1 {
                a[(i, j)] = -0.25;
            }
        }
    }
    a
}

/// `(I - Q)^{-1}` on `V_N` by LU, indexed like `BoxGeometry::index`.
pub fn dense_green(n: usize) -> DMatrix<f64> {
    let geom = BoxGeometry::new(n).unwrap();
    let sites: Vec<Vertex> = geom.vertices().collect();
    walk_precision(&sites)
        .lu()
        .try_inverse()
        .expect("I - Q is invertible")
}

/// Eigenvalues of `I - Q` on `V_N`, ascending.
pub fn dense_eigenvalues(n: usize) -> Vec<f64> {
    let geom = BoxGeometry::new(n).unwrap();
    let sites: Vec<Vertex> = geom.vertices().collect();
    let mut ev: Vec<f64> = walk_precision(&sites)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// `E[φ_v | φ_C] = G_{vC} G_{CC}^{-1} φ_C` with `C = V_N \ box`.
pub fn conditional_mean(
    g: &DMatrix<f64>,
    geom: BoxGeometry,
    phi: &[f64],
    v: Vertex,
    in_box: impl Fn(Vertex) -> bool,
) -> f64 {
    let outside: Vec<usize> = geom
        .vertices()
        .filter(|u| !in_box(*u))
        .map(|u| geom.index(u).unwrap())
        .collect();
    let vi = geom.index(v).unwrap();
    let m = outside.len();
    let gcc = DMatrix::from_fn(m, m, |a, b| g[(outside[a], outside[b])]);
    let gvc = DVector::from_fn(m, |a, _| g[(vi, outside[a])]);
    let phic = DVector::from_fn(m, |a, _| phi[outside[a]]);
    let chol = gcc.cholesky().expect("G_CC is positive definite");
    let solved = chol.solve(&phic);
    gvc.dot(&solved)
}

/// Green function of a box with Dirichlet conditions outside it, by LU.
pub fn box_green(sites: &[Vertex]) -> DMatrix<f64> {
    walk_precision(sites)
        .lu()
        .try_inverse()
        .expect("invertible")
}

/// Lazy-free simple random walk from `start` until it leaves `inside`; returns the exit vertex
/// and the number of steps taken.
pub fn walk_until_exit<R: Rng>(
    start: Vertex,
    inside: impl Fn(Vertex) -> bool,
    rng: &mut R,
) -> (Vertex, u64) {
    let mut v = start;
    let mut steps = 0;
    while inside(v) {
        v = match rng.gen_range(0..4) {
            0 => v.offset(1, 0),
            1 => v.offset(-1, 0),
            2 => v.offset(0, 1),
            _ => v.offset(0, -1),
        };
        steps += 1;
    }
    (v, steps)
}

/// Monte Carlo expected number of visits to `target` before leaving `V_N`, starting at `start`.
pub fn walk_visits<R: Rng>(
    geom: BoxGeometry,
    start: Vertex,
    target: Vertex,
    walks: usize,
    rng: &mut R,
) -> (f64, f64) {
    let mut counts = Vec::with_capacity(walks);
    for _ in 0..walks {
        let mut v = start;
        let mut c = 0u64;
        while geom.contains(v) {
            if v == target {
                c += 1;
            }
            v = match rng.gen_range(0..4) {
                0 => v.offset(1, 0),
                1 => v.offset(-1, 0),
                2 => v.offset(0, 1),
                _ => v.offset(0, -1),
            };
        }
        counts.push(c as f64);
    }
    let m = counts.iter().sum::<f64>() / walks as f64;
    let var = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (walks as f64 - 1.0);
    (m, (var / walks as f64).sqrt())
}

/// GEM(α) stick-breaking weights (the size-biased order of PD(α)) until the remaining stick
/// drops below `eps` or `max_atoms` sticks are broken. The unbroken rest adds at most
/// `rest²` to `Σξ²`.
pub fn gem_weights<R: Rng>(alpha: f64, eps: f64, max_atoms: usize, rng: &mut R) -> Vec<f64> {
    let mut rest = 1.0;
    let mut out = Vec::new();
    let mut i = 1usize;
    while rest > eps && i <= max_atoms {
        let b = Beta::new(1.0 - alpha, i as f64 * alpha).unwrap();
        let v: f64 = b.sample(rng);
        out.push(rest * v);
        rest *= 1.0 - v;
        i += 1;
    }
    out
}
