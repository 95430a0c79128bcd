//! Partition functions, Gibbs replicas, boundary mass and high points.

use rand::distributions::Distribution;
use rand::Rng;
use rand_distr::WeightedAliasIndex;

use crate::error::{Error, Result};
use crate::field::FieldSample;
use crate::lattice::{bulk_region, BoxGeometry, VertexSet};
use crate::seed::rng_from_seed;

/// Stable `log Σ exp(x_i)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log Z = log Σ_v exp(β φ_v)` over the given values.
pub fn log_partition(values: &[f64], beta: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyRegion);
    }
    check_beta(beta)?;
    Ok(scaled_log_sum_exp(values, beta))
}

fn scaled_log_sum_exp(values: &[f64], beta: f64) -> f64 {
    let m = values
        .iter()
        .map(|v| beta * v)
        .fold(f64::NEG_INFINITY, f64::max);
    m + values
        .iter()
        .map(|v| (beta * v - m).exp())
        .sum::<f64>()
        .ln()
}

/// Finite-`N` free energy `log Z / log N²`.
pub fn free_energy(values: &[f64], beta: f64, n: usize) -> Result<f64> {
    if n <= 1 {
        return Err(Error::param("N", "free energy needs N >= 2"));
    }
    let log_n2 = 2.0 * (n as f64).ln();
    Ok(log_partition(values, beta)? / log_n2)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::param(
            "beta",
            format!("{beta} must be a finite value >= 0"),
        ));
    }
    Ok(())
}

/// Normalised Gibbs weights `e^{βφ_v}/Z` over a set of sites, with an alias table for draws.
#[derive(Debug, Clone)]
pub struct GibbsContext {
    beta: f64,
    sample_id: u64,
    sites: Vec<usize>,
    log_z: f64,
    probs: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl GibbsContext {
    /// Sites are `0..values.len()`.
    pub fn new(values: &[f64], beta: f64) -> Result<Self> {
        Self::with_sites(values, (0..values.len()).collect(), beta)
    }

    /// `sites[k]` labels `values[k]`, typically a linear vertex index.
    pub fn with_sites(values: &[f64], sites: Vec<usize>, beta: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if sites.len() != values.len() {
            return Err(Error::param("sites", "length differs from values"));
        }
        check_beta(beta)?;
        let log_z = scaled_log_sum_exp(values, beta);
        let probs: Vec<f64> = values.iter().map(|v| (beta * v - log_z).exp()).collect();
        let alias = WeightedAliasIndex::new(probs.clone())
            .map_err(|e| Error::param("values", format!("cannot build alias table: {e}")))?;
        Ok(GibbsContext {
            beta,
            sample_id: 0,
            sites,
            log_z,
            probs,
            alias,
        })
    }

    /// Gibbs measure of a field restricted to `region`.
    pub fn on_region(sample: &FieldSample, region: &VertexSet, beta: f64) -> Result<Self> {
        let values: Vec<f64> = region
            .indices()
            .iter()
            .map(|&i| sample.values()[i])
            .collect();
        Self::with_sites(&values, region.indices().to_vec(), beta)
    }

    /// Gibbs measure of a field on all of `V_N`.
    pub fn on_box(sample: &FieldSample, beta: f64) -> Result<Self> {
        let sites = (0..sample.values().len()).collect();
        Self::with_sites(sample.values(), sites, beta)
    }

    pub fn with_sample_id(mut self, id: u64) -> Self {
        self.sample_id = id;
        self
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sample_id(&self) -> u64 {
        self.sample_id
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Exact Gibbs average of an observable aligned with the sites.
    pub fn expectation(&self, observable: &[f64]) -> f64 {
        self.probs.iter().zip(observable).map(|(p, f)| p * f).sum()
    }

    /// One site drawn from the Gibbs measure; returns a position into `sites()`.
    pub fn draw_position<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng)
    }

    pub fn draw_site<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sites[self.draw_position(rng)]
    }
}

/// `s` i.i.d. replicas from one Gibbs measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaDraw {
    pub sample_id: u64,
    /// Site labels (vertex indices when the context was built from a field).
    pub vertices: Vec<usize>,
}

/// `count` independent draws of `s` replicas, deterministic in `seed`.
pub fn gibbs_sample(
    ctx: &GibbsContext,
    s: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<ReplicaDraw>> {
    if s == 0 {
        return Err(Error::param("s", "need at least one replica"));
    }
    if count == 0 {
        return Err(Error::param("count", "need at least one draw"));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..count)
        .map(|_| ReplicaDraw {
            sample_id: ctx.sample_id,
            vertices: (0..s).map(|_| ctx.draw_site(&mut rng)).collect(),
        })
        .collect())
}

/// Gibbs mass of `V_N \ A_{N,ρ}` for a context built over all of `V_N`.
pub fn boundary_mass(ctx: &GibbsContext, geom: BoxGeometry, rho: f64) -> Result<f64> {
    if ctx.sites.len() != geom.vertex_count() {
        return Err(Error::param(
            "ctx",
            "boundary mass needs a Gibbs measure over all of V_N",
        ));
    }
    let bulk = bulk_region(geom, rho)?;
    let mass: f64 = ctx
        .sites
        .iter()
        .zip(&ctx.probs)
        .filter(|(&site, _)| !bulk.contains_index(site))
        .map(|(_, p)| p)
        .sum();
    Ok(mass.clamp(0.0, 1.0))
}

/// Level set `{value ≥ γ √(2/π) log N²}` summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighPoints {
    pub gamma: f64,
    pub threshold: f64,
    pub count: usize,
    pub region_size: usize,
    /// `log(count) / log N²`, absent when the set is empty.
    pub exponent: Option<f64>,
}

/// High points among `values` (already restricted to the region of interest).
pub fn high_points_count(values: &[f64], gamma: f64, n: usize) -> Result<HighPoints> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::param(
            "gamma",
            format!("{gamma} must be a finite value >= 0"),
        ));
    }
    if n <= 1 {
        return Err(Error::param("N", "high-point exponents need N >= 2"));
    }
    let log_n2 = 2.0 * (n as f64).ln();
    let threshold = gamma * std::f64::consts::FRAC_2_PI.sqrt() * log_n2;
    let count = values.iter().filter(|&&v| v >= threshold).count();
    Ok(HighPoints {
        gamma,
        threshold,
        count,
        region_size: values.len(),
        exponent: (count > 0).then(|| (count as f64).ln() / log_n2),
    })
}

/// High points of a field inside `region`.
pub fn high_points_in(sample: &FieldSample, region: &VertexSet, gamma: f64) -> Result<HighPoints> {
    let values: Vec<f64> = region
        .indices()
        .iter()
        .map(|&i| sample.values()[i])
        .collect();
    high_points_count(&values, gamma, sample.geometry().n())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_p;

    #[test]
    fn log_partition_examples() {
        let vals = [0.3, -1.2, 2.0, 0.7];
        assert!((log_partition(&vals, 0.0).unwrap() - 4f64.ln()).abs() < 1e-15);
        let c = [1.5; 10];
        assert!((log_partition(&c, 2.0).unwrap() - (10f64.ln() + 3.0)).abs() < 1e-13);
        let (a, b) = (1.3f64, -0.4f64);
        let brute = ((1.7 * a).exp() + (1.7 * b).exp()).ln();
        assert!((log_partition(&[a, b], 1.7).unwrap() - brute).abs() < 1e-12);
        assert!(matches!(log_partition(&[], 1.0), Err(Error::EmptyRegion)));
    }

    #[test]
    fn log_partition_survives_huge_exponents() {
        let vals = [1e4, 1e4 - 1.0, -1e4];
        let lz = log_partition(&vals, 1.0).unwrap();
        let expect = 1e4 + (1.0 + (-1f64).exp()).ln();
        assert!((lz - expect).abs() < 1e-9);
    }

    #[test]
    fn free_energy_at_zero_beta_is_one() {
        let vals = vec![0.1; 64];
        assert!((free_energy(&vals, 0.0, 8).unwrap() - 1.0).abs() < 1e-15);
        assert!(free_energy(&vals, 1.0, 1).is_err());
    }

    #[test]
    fn shift_invariance() {
        let vals = [0.3, -1.2, 2.0, 0.7, 1.1];
        let shifted: Vec<f64> = vals.iter().map(|v| v + 3.25).collect();
        let a = GibbsContext::new(&vals, 1.4).unwrap();
        let b = GibbsContext::new(&shifted, 1.4).unwrap();
        assert!((b.log_partition() - a.log_partition() - 1.4 * 3.25).abs() < 1e-12);
        for (p, q) in a.probabilities().iter().zip(b.probabilities()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_draws_at_zero_beta() {
        let ctx = GibbsContext::new(&[0.5, -2.0, 3.0, 1.0, 0.0], 0.0).unwrap();
        let draws = gibbs_sample(&ctx, 1, 50_000, 11).unwrap();
        let mut counts = [0u64; 5];
        for d in &draws {
            counts[d.vertices[0]] += 1;
        }
        assert!(chi_square_p(&counts, &[0.2; 5]) > 1e-3);
    }

    #[test]
    fn two_point_ratio() {
        let ctx = GibbsContext::new(&[1.0, 0.0], 1.0).unwrap();
        let draws = gibbs_sample(&ctx, 2, 100_000, 5).unwrap();
        let first = draws
            .iter()
            .flat_map(|d| d.vertices.iter())
            .filter(|&&v| v == 0)
            .count() as f64;
        let total = 200_000.0;
        let p = std::f64::consts::E / (1.0 + std::f64::consts::E);
        let se = (p * (1.0 - p) / total).sqrt();
        assert!((first / total - p).abs() < 4.0 * se);
    }

    #[test]
    fn draws_are_deterministic() {
        let ctx = GibbsContext::new(&[0.2, 0.9, -0.3], 2.0)
            .unwrap()
            .with_sample_id(4);
        let a = gibbs_sample(&ctx, 3, 100, 99).unwrap();
        assert_eq!(a, gibbs_sample(&ctx, 3, 100, 99).unwrap());
        assert_ne!(a, gibbs_sample(&ctx, 3, 100, 98).unwrap());
        assert!(a.iter().all(|d| d.sample_id == 4 && d.vertices.len() == 3));
    }

    #[test]
    fn boundary_mass_at_zero_beta_is_area_fraction() {
        let geom = BoxGeometry::new(16).unwrap();
        let sample = crate::field::sample_dgff(geom, 1);
        let ctx = GibbsContext::on_box(&sample, 0.0).unwrap();
        let bulk = bulk_region(geom, 0.5).unwrap();
        let expect = 1.0 - bulk.len() as f64 / 256.0;
        assert!((boundary_mass(&ctx, geom, 0.5).unwrap() - expect).abs() < 1e-12);
        let hot = GibbsContext::on_box(&sample, 5.0).unwrap();
        let m = boundary_mass(&hot, geom, 0.5).unwrap();
        assert!((0.0..=1.0).contains(&m));
    }

    #[test]
    fn high_point_counts() {
        let vals = [-1.0, 0.0, 0.5, 3.0];
        let h = high_points_count(&vals, 0.0, 2).unwrap();
        assert_eq!(h.count, 3);
        let h = high_points_count(&vals, 10.0, 2).unwrap();
        assert_eq!(h.count, 0);
        assert_eq!(h.exponent, None);
        assert!(high_points_count(&vals, -0.1, 2).is_err());
    }
}
