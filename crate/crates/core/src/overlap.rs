//! Overlaps `q` and `q_α`, the two-overlap distribution, and the two identities
//! linking it to the scale-perturbed free energy.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{DgffSampler, GreenCache};
use crate::gibbs::{log_partition, GibbsContext};
use crate::lattice::{bulk_region, BoxGeometry, Vertex, VertexSet};
use crate::multiscale::{psi_field, ScaleResidual};
use crate::seed::{derive_seed, rng_from_seed, TaskKind};
use crate::stats::mean_stderr;
use crate::FieldSample;

/// Number of points in the default `r` grid on `[0, 1]`.
pub const DEFAULT_GRID_POINTS: usize = 101;

/// Distinct first-replica vertices whose Green columns are held at once.
const COLUMN_BATCH: usize = 256;

fn bulk_scale(geom: BoxGeometry) -> f64 {
    PI / geom.log_n2()
}

/// `q(v, v')` and optionally `q_α(v, v')` for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapValue {
    pub v: Vertex,
    pub w: Vertex,
    pub q: f64,
    pub q_alpha: Option<f64>,
}

/// `q(v, v') = G(v, v') / ((1/π) log N²)`.
pub fn overlap_q(cache: &GreenCache, v: Vertex, w: Vertex) -> Result<f64> {
    cache.geometry().checked_index(w)?;
    Ok(cache.value(v, w)? * bulk_scale(cache.geometry()))
}

/// `q_α(v, v')`: the residual covariance at scale `α` over `(1/π) log N²`.
pub fn overlap_alpha(cache: &GreenCache, alpha: f64, v: Vertex, w: Vertex) -> Result<f64> {
    let res = ScaleResidual::new(cache, alpha)?;
    Ok(res.covariance(v, w)? * bulk_scale(cache.geometry()))
}

pub fn overlap_value(
    cache: &GreenCache,
    v: Vertex,
    w: Vertex,
    alpha: Option<f64>,
) -> Result<OverlapValue> {
    let q = overlap_q(cache, v, w)?;
    let q_alpha = alpha.map(|a| overlap_alpha(cache, a, v, w)).transpose()?;
    Ok(OverlapValue { v, w, q, q_alpha })
}

/// Replica pairs drawn from one Gibbs measure, with their overlaps.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOverlaps {
    /// Linear vertex indices.
    pub pairs: Vec<(usize, usize)>,
    pub q: Vec<f64>,
}

/// Draws `count` pairs from `𝒢^{×2}` and evaluates `q` through the Green cache.
///
/// Columns are fetched per distinct first replica, a batch at a time, in parallel.
pub fn sample_pair_overlaps(
    ctx: &GibbsContext,
    cache: &GreenCache,
    count: usize,
    seed: u64,
) -> PairOverlaps {
    let mut rng = rng_from_seed(seed);
    let pairs: Vec<(usize, usize)> = (0..count)
        .map(|_| (ctx.draw_site(&mut rng), ctx.draw_site(&mut rng)))
        .collect();

    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by_key(|&k| pairs[k].0);
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for k in order {
        match groups.last_mut() {
            Some((key, members)) if *key == pairs[k].0 => members.push(k),
            _ => groups.push((pairs[k].0, vec![k])),
        }
    }

    let scale = bulk_scale(cache.geometry());
    let mut q = vec![0.0; count];
    for batch in groups.chunks(COLUMN_BATCH) {
        let evaluated: Vec<Vec<(usize, f64)>> = batch
            .par_iter()
            .map(|(key, members)| {
                let col = cache.column_by_index(*key);
                members
                    .iter()
                    .map(|&k| (k, col.at_index(pairs[k].1) * scale))
                    .collect()
            })
            .collect();
        for (k, value) in evaluated.into_iter().flatten() {
            q[k] = value;
        }
    }
    PairOverlaps { pairs, q }
}

/// Uniform grid of `points` values on `[0, 1]`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..points)
            .map(|i| i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Settings for one two-overlap-distribution estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapConfig {
    pub n: usize,
    pub beta: f64,
    /// Restrict the Gibbs measure to `A_{N,ρ}`; `None` uses all of `V_N`.
    pub rho: Option<f64>,
    pub disorder: usize,
    pub pairs: usize,
    pub seed: u64,
    pub r_grid: Vec<f64>,
}

impl OverlapConfig {
    pub fn new(
        n: usize,
        beta: f64,
        rho: Option<f64>,
        disorder: usize,
        pairs: usize,
        seed: u64,
    ) -> Self {
        OverlapConfig {
            n,
            beta,
            rho,
            disorder,
            pairs,
            seed,
            r_grid: uniform_grid(DEFAULT_GRID_POINTS),
        }
    }

    fn validate(&self) -> Result<BoxGeometry> {
        if self.disorder == 0 {
            return Err(Error::param(
                "disorder",
                "need at least one disorder sample",
            ));
        }
        if self.pairs == 0 {
            return Err(Error::param("pairs", "need at least one pair per sample"));
        }
        if self.r_grid.is_empty() {
            return Err(Error::param("r_grid", "empty grid"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::param(
                "beta",
                format!("{} must be a finite value >= 0", self.beta),
            ));
        }
        BoxGeometry::new(self.n)
    }

    /// The region carrying the Gibbs measure.
    pub fn region(&self) -> Result<VertexSet> {
        let geom = self.validate()?;
        let region = match self.rho {
            Some(rho) => bulk_region(geom, rho)?,
            None => geom.all(),
        };
        if region.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(region)
    }
}

/// Estimate of `r ↦ x_{β,N,ρ}(r)` on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapHistogram {
    pub n: usize,
    pub beta: f64,
    pub rho: Option<f64>,
    pub seed: u64,
    pub disorder_samples: usize,
    pub pairs_per_sample: usize,
    pub r_grid: Vec<f64>,
    pub x: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Per disorder sample, the empirical `x_d(r)` on the grid.
    pub per_sample: Vec<Vec<f64>>,
    /// Mean fraction of pairs with `q > 1`.
    pub fraction_above_one: f64,
}

/// One CSV row: `(N, beta, rho, r, x_estimate, stderr, disorder_samples, pairs_per_sample, seed)`.
#[derive(Debug, Clone, Serialize)]
pub struct OverlapRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: f64,
    pub rho: Option<f64>,
    pub r: f64,
    pub x_estimate: f64,
    pub stderr: f64,
    pub disorder_samples: usize,
    pub pairs_per_sample: usize,
    pub seed: u64,
}

impl OverlapHistogram {
    /// `(x, stderr)` at a grid point equal to `r`.
    pub fn at(&self, r: f64) -> Option<(f64, f64)> {
        self.r_grid
            .iter()
            .position(|&g| (g - r).abs() < 1e-12)
            .map(|k| (self.x[k], self.stderr[k]))
    }

    pub fn rows(&self) -> Vec<OverlapRow> {
        self.r_grid
            .iter()
            .enumerate()
            .map(|(k, &r)| OverlapRow {
                n: self.n,
                beta: self.beta,
                rho: self.rho,
                r,
                x_estimate: self.x[k],
                stderr: self.stderr[k],
                disorder_samples: self.disorder_samples,
                pairs_per_sample: self.pairs_per_sample,
                seed: self.seed,
            })
            .collect()
    }
}

/// Empirical `x(r) = #{q ≤ r} / #pairs` on a grid.
pub fn empirical_cdf(q: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut sorted = q.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    grid.iter()
        .map(|&r| sorted.partition_point(|&x| x <= r) as f64 / total)
        .collect()
}

/// Everything computed for one disorder sample of the overlap experiment.
#[derive(Debug, Clone)]
pub struct OverlapSample {
    pub field: FieldSample,
    pub gibbs: GibbsContext,
    pub overlaps: PairOverlaps,
}

/// Field, Gibbs measure and pair overlaps for disorder sample `id`.
pub fn overlap_sample(
    config: &OverlapConfig,
    region: &VertexSet,
    sampler: &DgffSampler,
    cache: &GreenCache,
    id: u64,
) -> Result<OverlapSample> {
    let field = sampler.sample(derive_seed(config.seed, id, TaskKind::Field));
    let gibbs = GibbsContext::on_region(&field, region, config.beta)?.with_sample_id(id);
    let overlaps = sample_pair_overlaps(
        &gibbs,
        cache,
        config.pairs,
        derive_seed(config.seed, id, TaskKind::Replicas),
    );
    Ok(OverlapSample {
        field,
        gibbs,
        overlaps,
    })
}

/// Monte Carlo estimate of the two-overlap distribution.
///
/// Disorder samples run in parallel; each owns its streams and the merge is in
/// sample order, so the result does not depend on the thread count.
pub fn two_overlap_distribution(
    config: &OverlapConfig,
    sampler: &DgffSampler,
    cache: &GreenCache,
) -> Result<OverlapHistogram> {
    let region = config.region()?;
    if sampler.geometry().n() != config.n || cache.geometry().n() != config.n {
        return Err(Error::param(
            "N",
            "sampler or cache built for a different box",
        ));
    }
    let per: Vec<(Vec<f64>, f64)> = (0..config.disorder as u64)
        .into_par_iter()
        .map(|id| {
            let s = overlap_sample(config, &region, sampler, cache, id)?;
            let q = &s.overlaps.q;
            let above = q.iter().filter(|&&x| x > 1.0).count() as f64 / q.len() as f64;
            Ok((empirical_cdf(q, &config.r_grid), above))
        })
        .collect::<Result<_>>()?;

    let mut x = Vec::with_capacity(config.r_grid.len());
    let mut stderr = Vec::with_capacity(config.r_grid.len());
    for k in 0..config.r_grid.len() {
        let col: Vec<f64> = per.iter().map(|(c, _)| c[k]).collect();
        let (m, se) = mean_stderr(&col);
        x.push(m);
        stderr.push(se);
    }
    let fraction_above_one = per.iter().map(|p| p.1).sum::<f64>() / per.len() as f64;
    Ok(OverlapHistogram {
        n: config.n,
        beta: config.beta,
        rho: config.rho,
        seed: config.seed,
        disorder_samples: config.disorder,
        pairs_per_sample: config.pairs,
        r_grid: config.r_grid.clone(),
        x,
        stderr,
        per_sample: per.into_iter().map(|p| p.0).collect(),
        fraction_above_one,
    })
}

/// Both sides of an identity and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub difference: f64,
}

impl IdentityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        IdentityCheck {
            lhs,
            rhs,
            difference: lhs - rhs,
        }
    }
}

/// Integral identity on one empirical pair measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralIdentity {
    pub check: IdentityCheck,
    /// `mean (q - 1)⁺`: the amount by which pairs with `q > 1` shift the right side
    /// when `q` is not capped at 1.
    pub overshoot: f64,
}

/// Neumaier-compensated sum.
fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// `∫_α^1 x(r) dr` for the empirical distribution of `q`, integrating the step function exactly.
pub fn integrate_empirical_cdf(q: &[f64], alpha: f64) -> f64 {
    let mut sorted = q.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    // x is constant between consecutive breakpoints inside (α, 1).
    let below = sorted.partition_point(|&x| x <= alpha);
    let mut pieces = Vec::new();
    let mut left = alpha;
    let mut count = below;
    for &b in &sorted[below..] {
        if b >= 1.0 {
            break;
        }
        pieces.push(count as f64 / total * (b - left));
        left = b;
        count += 1;
    }
    // Ties at the same breakpoint contribute zero-width pieces above.
    pieces.push(count as f64 / total * (1.0 - left));
    compensated_sum(pieces)
}

/// `∫_α^1 x(r) dr = (1 - α) - E[q ∧ 1 - α ; q ≥ α]` on one empirical pair measure.
///
/// The left side integrates the empirical distribution function; the right side is
/// the Fubini rearrangement. `q` is capped at 1 on the right because `x` is only
/// integrated up to 1 while finite-`N` diagonal overlaps exceed 1.
pub fn bk_integral_identity(q: &[f64], alpha: f64) -> Result<IntegralIdentity> {
    if q.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("{alpha} is outside [0, 1]")));
    }
    let total = q.len() as f64;
    let lhs = integrate_empirical_cdf(q, alpha);
    let tail = compensated_sum(
        q.iter()
            .filter(|&&x| x >= alpha)
            .map(|&x| x.min(1.0) - alpha),
    ) / total;
    let rhs = (1.0 - alpha) - tail;
    let overshoot = compensated_sum(q.iter().map(|&x| (x - 1.0).max(0.0))) / total;
    Ok(IntegralIdentity {
        check: IdentityCheck::new(lhs, rhs),
        overshoot,
    })
}

/// Derivative identity for one field sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeIdentity {
    pub check: IdentityCheck,
    /// `f(+du) + f(-du) - 2 f(0)`, nonnegative by convexity in `u`.
    pub convexity: f64,
    /// Whether both sides carry the `π/β²` normalisation (false only at `β = 0`).
    pub normalised: bool,
}

/// `(π/β²) ∂_u f^{(α,(1,1+u))}_{N,ρ}(β)|_{u=0}` by central differences against the exact
/// Gibbs average of `φ_v - φ_{[v]_α}` over `A_{N,ρ}`.
///
/// Differentiating `log Σ exp(β(φ + u(φ - φ_α)))` gives `β 𝔼_𝒢[φ - φ_α]`, so after the
/// `π/β²` factor the right side is `𝔼_𝒢[φ - φ_α] / (β (1/π) log N²)`. At `β = 0` both
/// sides are reported without the normalisation (both are zero).
pub fn bk_derivative_identity(
    sample: &FieldSample,
    beta: f64,
    rho: f64,
    alpha: f64,
    du: f64,
) -> Result<DerivativeIdentity> {
    if !(du > 0.0 && du.is_finite()) {
        return Err(Error::param("du", format!("{du} must be positive")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::param(
            "beta",
            format!("{beta} must be a finite value >= 0"),
        ));
    }
    let geom = sample.geometry();
    let log_n2 = geom.log_n2();
    let psi = psi_field(sample, alpha, 1.0, 1.0, rho)?;
    let free = |u: f64| -> Result<f64> {
        let shifted = psi.with_sigmas(1.0, 1.0 + u)?;
        Ok(log_partition(shifted.values(), beta)? / log_n2)
    };
    let (fp, fm, f0) = (free(du)?, free(-du)?, free(0.0)?);
    let derivative = (fp - fm) / (2.0 * du);
    let gibbs = GibbsContext::new(psi.values(), beta)?;
    let mean_fine = gibbs.expectation(psi.fine());
    let (lhs, rhs, normalised) = if beta > 0.0 {
        (
            PI / (beta * beta) * derivative,
            mean_fine / (beta * log_n2 / PI),
            true,
        )
    } else {
        (derivative, 0.0, false)
    };
    Ok(DerivativeIdentity {
        check: IdentityCheck::new(lhs, rhs),
        convexity: fp + fm - 2.0 * f0,
        normalised,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sample_dgff;

    #[test]
    fn two_by_two_overlap() {
        let geom = BoxGeometry::new(2).unwrap();
        let cache = GreenCache::new(geom);
        let q = overlap_q(&cache, Vertex::new(1, 1), Vertex::new(2, 1)).unwrap();
        assert!((q - (1.0 / 3.0) * PI / 4f64.ln()).abs() < 1e-12);
        let back = overlap_q(&cache, Vertex::new(2, 1), Vertex::new(1, 1)).unwrap();
        assert!((q - back).abs() < 1e-15);
    }

    #[test]
    fn overlap_alpha_rejects_degenerate_scale() {
        let geom = BoxGeometry::new(32).unwrap();
        let cache = GreenCache::new(geom);
        let c = geom.center();
        assert!(overlap_alpha(&cache, 1.0, c, c).is_err());
        let v = overlap_value(&cache, c, c, Some(0.5)).unwrap();
        assert!(v.q_alpha.unwrap() < v.q);
    }

    #[test]
    fn empirical_cdf_counts() {
        let q = [0.1, 0.5, 0.5, 0.9];
        assert_eq!(
            empirical_cdf(&q, &[0.0, 0.5, 0.95, 1.0]),
            vec![0.0, 0.75, 1.0, 1.0]
        );
    }

    #[test]
    fn integral_identity_edge_cases() {
        let q = [0.2, 0.4, 0.7, 0.95, 1.0];
        let id = bk_integral_identity(&q, 1.0).unwrap();
        assert_eq!(id.check.lhs, 0.0);
        assert!(id.check.rhs.abs() < 1e-15);
        let id = bk_integral_identity(&q, 0.3).unwrap();
        // Pairs: (0.2 -> 0.7), (0.4 -> 0.6), (0.7 -> 0.3), (0.95 -> 0.05), (1.0 -> 0).
        assert!((id.check.lhs - 1.65 / 5.0).abs() < 1e-15);
        assert!(id.check.difference.abs() < 1e-15);
        assert_eq!(id.overshoot, 0.0);
        let id = bk_integral_identity(&[0.5, 1.3], 0.2).unwrap();
        assert!(id.check.difference.abs() < 1e-15);
        assert!((id.overshoot - 0.15).abs() < 1e-15);
        assert!(bk_integral_identity(&[], 0.5).is_err());
    }

    #[test]
    fn derivative_identity_small_box() {
        let geom = BoxGeometry::new(32).unwrap();
        let s = sample_dgff(geom, 17);
        let id = bk_derivative_identity(&s, 1.0, 0.4, 0.5, 1e-4).unwrap();
        assert!(id.check.difference.abs() < 1e-6, "{id:?}");
        assert!(id.convexity >= -1e-10);
        let cold = bk_derivative_identity(&s, 0.0, 0.4, 0.5, 1e-4).unwrap();
        assert_eq!(cold.check.lhs, 0.0);
        assert_eq!(cold.check.rhs, 0.0);
        assert!(!cold.normalised);
        assert!(bk_derivative_identity(&s, 1.0, 0.4, 0.5, 0.0).is_err());
    }

    #[test]
    fn histogram_is_a_cdf() {
        let config = OverlapConfig::new(16, 2.0, None, 4, 500, 3);
        let sampler = DgffSampler::new(BoxGeometry::new(16).unwrap());
        let cache = GreenCache::new(sampler.geometry());
        let h = two_overlap_distribution(&config, &sampler, &cache).unwrap();
        assert_eq!(h.x.len(), DEFAULT_GRID_POINTS);
        assert!(h.x.windows(2).all(|w| w[0] <= w[1]));
        assert!(h.x.iter().all(|&x| (0.0..=1.0).contains(&x)));
        // x(1) plus the mass above 1 accounts for every pair.
        assert!((h.x[DEFAULT_GRID_POINTS - 1] + h.fraction_above_one - 1.0).abs() < 1e-12);
        let again = two_overlap_distribution(&config, &sampler, &cache).unwrap();
        assert_eq!(h, again);
    }
}
