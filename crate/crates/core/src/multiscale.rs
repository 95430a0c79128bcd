//! Harmonic exit kernels, coarse-grained fields `φ_{[v]_α}` and the scale-split field `ψ`.
//!
//! By the Markov property, `E[φ_v | F_{[v]_t^c}] = Σ_{u∈∂[v]_t} P_v(S_τ = u) φ_u`. The exit
//! distribution only depends on the position of `v` inside its box, and every unclipped
//! `[v]_α` has the same shape, so one kernel per side length serves the whole bulk.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{FieldSample, GreenCache};
use crate::lattice::{
    bulk_region, neighborhood_side, square_around, BoxGeometry, Vertex, VertexSet,
};
use crate::spectral::SineBasis;

/// Exit distribution of a walk started at `v` from the square `[v]` of a given side.
///
/// Offsets are relative to `v`; for even side `s` the square spans `-s/2+1 ..= s/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicKernel {
    side: usize,
    weights: Vec<(i64, i64, f64)>,
}

impl HarmonicKernel {
    pub fn side(&self) -> usize {
        self.side
    }

    /// `(dx, dy, p)` over the boundary ring, row-major in `(dy, dx)`.
    pub fn weights(&self) -> &[(i64, i64, f64)] {
        &self.weights
    }

    pub fn weight(&self, dx: i64, dy: i64) -> f64 {
        self.weights
            .iter()
            .find(|w| w.0 == dx && w.1 == dy)
            .map_or(0.0, |w| w.2)
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().map(|w| w.2).sum()
    }

    /// `Σ_u p(u - v) f(u)`.
    #[inline]
    pub fn apply(&self, v: Vertex, mut f: impl FnMut(Vertex) -> f64) -> f64 {
        self.weights
            .iter()
            .map(|&(dx, dy, p)| p * f(v.offset(dx, dy)))
            .sum()
    }
}

/// Kernel for even side `≥ 2`.
pub fn harmonic_kernel(side: usize) -> Result<HarmonicKernel> {
    if side < 2 || !side.is_multiple_of(2) {
        return Err(Error::param(
            "side",
            format!("{side} is not an even integer >= 2"),
        ));
    }
    Ok(exit_kernel(side))
}

/// The degenerate one-vertex box: the walk leaves after one step.
pub fn single_site_kernel() -> HarmonicKernel {
    exit_kernel(1)
}

fn exit_kernel(side: usize) -> HarmonicKernel {
    let lo = if side == 1 { 0 } else { -(side as i64) / 2 + 1 };
    let hi = lo + side as i64 - 1;
    let basis = SineBasis::new(side);
    // Start vertex sits at 0-based position -lo inside the box.
    let start = (-lo) as usize;
    let green = basis.solve_unit(start, start);
    let at = |dx: i64, dy: i64| green[(dy - lo) as usize * side + (dx - lo) as usize];
    let inside = |d: i64| (lo..=hi).contains(&d);

    let mut weights = Vec::with_capacity(4 * side);
    for dy in lo - 1..=hi + 1 {
        for dx in lo - 1..=hi + 1 {
            if inside(dx) && inside(dy) {
                continue;
            }
            // Ring vertices (not corners) touch exactly one box vertex.
            let w = if inside(dx) {
                if dy == lo - 1 {
                    Some((dx, lo))
                } else {
                    Some((dx, hi))
                }
            } else if inside(dy) {
                if dx == lo - 1 {
                    Some((lo, dy))
                } else {
                    Some((hi, dy))
                }
            } else {
                None
            };
            if let Some((wx, wy)) = w {
                weights.push((dx, dy, 0.25 * at(wx, wy)));
            }
        }
    }
    // The start vertex lies on the diagonal, so p is symmetric under (dx, dy) -> (dy, dx).
    let snapshot = weights.clone();
    for w in weights.iter_mut() {
        let mirror = snapshot
            .iter()
            .find(|m| m.0 == w.1 && m.1 == w.0)
            .expect("ring is transpose-invariant")
            .2;
        w.2 = 0.5 * (w.2 + mirror);
    }
    HarmonicKernel { side, weights }
}

/// `φ_{[v]_α}` on a region.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseField {
    alpha: f64,
    side: usize,
    region: VertexSet,
    values: Vec<f64>,
}

impl CoarseField {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn region(&self) -> &VertexSet {
        &self.region
    }

    /// Values aligned with `region().indices()`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, v: Vertex) -> Option<f64> {
        let idx = self.region.geometry().index(v)?;
        self.region
            .indices()
            .binary_search(&idx)
            .ok()
            .map(|k| self.values[k])
    }
}

/// Side of `[v]_α` and its kernel, failing when any region vertex has a clipped box.
fn kernel_for_region(
    geom: BoxGeometry,
    alpha: f64,
    region: &VertexSet,
) -> Result<(usize, HarmonicKernel)> {
    let side = neighborhood_side(geom, alpha)?;
    let kernel = if side == 1 {
        single_site_kernel()
    } else {
        harmonic_kernel(side)?
    };
    for v in region.vertices() {
        if square_around(geom, v, side).is_clipped() {
            return Err(Error::Clipped {
                x: v.x,
                y: v.y,
                side,
                n: geom.n(),
            });
        }
    }
    Ok((side, kernel))
}

/// `φ_{[v]_α} = Σ_u p(u - v) φ_u` for every `v` in `region`; `α = 1` returns `φ` itself.
pub fn coarse_field(sample: &FieldSample, alpha: f64, region: &VertexSet) -> Result<CoarseField> {
    let geom = sample.geometry();
    if region.geometry() != geom {
        return Err(Error::param("region", "belongs to a different box"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", format!("{alpha} is outside (0, 1]")));
    }
    if alpha == 1.0 {
        let values = region
            .indices()
            .iter()
            .map(|&i| sample.values()[i])
            .collect();
        return Ok(CoarseField {
            alpha,
            side: 1,
            region: region.clone(),
            values,
        });
    }
    let (side, kernel) = kernel_for_region(geom, alpha, region)?;
    let values = region
        .indices()
        .par_iter()
        .map(|&i| kernel.apply(geom.vertex(i), |u| sample.value(u)))
        .collect();
    Ok(CoarseField {
        alpha,
        side,
        region: region.clone(),
        values,
    })
}

/// `ψ_v = σ₁ φ_{[v]_α} + σ₂ (φ_v - φ_{[v]_α})` on `A_{N,ρ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedField {
    region: VertexSet,
    alpha: f64,
    sigma1: f64,
    sigma2: f64,
    rho: f64,
    coarse: Vec<f64>,
    fine: Vec<f64>,
    values: Vec<f64>,
}

impl GeneralizedField {
    pub fn region(&self) -> &VertexSet {
        &self.region
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigmas(&self) -> (f64, f64) {
        (self.sigma1, self.sigma2)
    }

    /// `ψ` aligned with `region().indices()`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `φ_{[v]_α}` on the region.
    pub fn coarse(&self) -> &[f64] {
        &self.coarse
    }

    /// `φ_v - φ_{[v]_α}` on the region.
    pub fn fine(&self) -> &[f64] {
        &self.fine
    }

    /// Same components recombined with new standard deviations.
    pub fn with_sigmas(&self, sigma1: f64, sigma2: f64) -> Result<GeneralizedField> {
        check_sigmas(sigma1, sigma2)?;
        let values = combine(&self.coarse, &self.fine, sigma1, sigma2);
        Ok(GeneralizedField {
            sigma1,
            sigma2,
            values,
            ..self.clone()
        })
    }
}

fn check_sigmas(sigma1: f64, sigma2: f64) -> Result<()> {
    if !(sigma1 >= 0.0 && sigma1.is_finite()) {
        return Err(Error::param(
            "sigma1",
            format!("{sigma1} must be a finite value >= 0"),
        ));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::param(
            "sigma2",
            format!("{sigma2} must be a finite value >= 0"),
        ));
    }
    Ok(())
}

fn combine(coarse: &[f64], fine: &[f64], sigma1: f64, sigma2: f64) -> Vec<f64> {
    coarse
        .iter()
        .zip(fine)
        .map(|(c, f)| sigma1 * c + sigma2 * f)
        .collect()
}

pub fn psi_field(
    sample: &FieldSample,
    alpha: f64,
    sigma1: f64,
    sigma2: f64,
    rho: f64,
) -> Result<GeneralizedField> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} is outside (0, 1)")));
    }
    if !(rho > 0.0 && rho < alpha) {
        return Err(Error::param(
            "rho",
            format!("need 0 < rho < alpha, got rho = {rho}"),
        ));
    }
    check_sigmas(sigma1, sigma2)?;
    let region = bulk_region(sample.geometry(), rho)?;
    let coarse = coarse_field(sample, alpha, &region)?;
    let fine: Vec<f64> = region
        .indices()
        .iter()
        .zip(coarse.values())
        .map(|(&i, c)| sample.values()[i] - c)
        .collect();
    let coarse = coarse.values;
    let values = combine(&coarse, &fine, sigma1, sigma2);
    Ok(GeneralizedField {
        region,
        alpha,
        sigma1,
        sigma2,
        rho,
        coarse,
        fine,
        values,
    })
}

/// The four Green-function sums making up `E[(φ_v - φ_{[v]_α})(φ_w - φ_{[w]_α})]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualTerms {
    /// `G(v, w)`
    pub direct: f64,
    /// `Σ_{u'} p(u' - w) G(v, u') = E[φ_v φ_{[w]_α}]`
    pub cross_left: f64,
    /// `Σ_u p(u - v) G(u, w) = E[φ_{[v]_α} φ_w]`
    pub cross_right: f64,
    /// `Σ_{u,u'} p(u - v) p(u' - w) G(u, u') = E[φ_{[v]_α} φ_{[w]_α}]`
    pub coarse: f64,
}

impl ResidualTerms {
    pub fn covariance(&self) -> f64 {
        self.direct - self.cross_left - self.cross_right + self.coarse
    }
}

/// Exact residual covariances at one scale, backed by a Green cache.
pub struct ScaleResidual<'a> {
    cache: &'a GreenCache,
    kernel: HarmonicKernel,
    side: usize,
}

impl<'a> ScaleResidual<'a> {
    pub fn new(cache: &'a GreenCache, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("{alpha} is outside (0, 1)")));
        }
        let side = neighborhood_side(cache.geometry(), alpha)?;
        Ok(ScaleResidual {
            cache,
            kernel: harmonic_kernel(side)?,
            side,
        })
    }

    pub fn kernel(&self) -> &HarmonicKernel {
        &self.kernel
    }

    fn check(&self, v: Vertex) -> Result<()> {
        let geom = self.cache.geometry();
        geom.checked_index(v)?;
        if square_around(geom, v, self.side).is_clipped() {
            return Err(Error::Clipped {
                x: v.x,
                y: v.y,
                side: self.side,
                n: geom.n(),
            });
        }
        Ok(())
    }

    pub fn terms(&self, v: Vertex, w: Vertex) -> Result<ResidualTerms> {
        self.check(v)?;
        self.check(w)?;
        let geom = self.cache.geometry();
        let col_v = self.cache.column(v)?;
        let col_w = self.cache.column(w)?;
        let direct = col_v.get(w);
        let cross_left = self.kernel.apply(w, |u| col_v.get(u));
        let cross_right = self.kernel.apply(v, |u| col_w.get(u));
        let coarse = self.kernel.apply(v, |u| match geom.index(u) {
            Some(iu) => {
                let col_u = self.cache.column_by_index(iu);
                self.kernel.apply(w, |u2| col_u.get(u2))
            }
            None => 0.0,
        });
        Ok(ResidualTerms {
            direct,
            cross_left,
            cross_right,
            coarse,
        })
    }

    pub fn covariance(&self, v: Vertex, w: Vertex) -> Result<f64> {
        Ok(self.terms(v, w)?.covariance())
    }
}

/// `E[(φ_v - φ_{[v]_α})(φ_w - φ_{[w]_α})]` expanded into Green entries.
pub fn residual_covariance(cache: &GreenCache, alpha: f64, v: Vertex, w: Vertex) -> Result<f64> {
    ScaleResidual::new(cache, alpha)?.covariance(v, w)
}
