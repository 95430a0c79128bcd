//! Limiting free energies, maximum and high-point exponents, and a two-level GREM sampler.
//!
//! Normalisation throughout: the bulk variance is `(1/π) log N²` and `β_c = √(2π)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// `β_c = √(2π)`.
pub fn beta_c() -> f64 {
    (2.0 * PI).sqrt()
}

/// `√(2/π)`.
fn sqrt_2_over_pi() -> f64 {
    (2.0 / PI).sqrt()
}

/// `(σ₁, σ₂, α)` of the scale-split field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaPair {
    pub sigma1: f64,
    pub sigma2: f64,
    pub alpha: f64,
}

impl SigmaPair {
    pub fn new(sigma1: f64, sigma2: f64, alpha: f64) -> Result<Self> {
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
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("{alpha} is outside (0, 1)")));
        }
        Ok(SigmaPair {
            sigma1,
            sigma2,
            alpha,
        })
    }

    /// `V₁₂ = σ₁²α + σ₂²(1-α)`.
    pub fn v12(&self) -> f64 {
        self.sigma1 * self.sigma1 * self.alpha + self.sigma2 * self.sigma2 * (1.0 - self.alpha)
    }

    /// True on the `σ₁ ≥ σ₂` (two-level) branch; ties count as either, the formulas agree there.
    pub fn coarse_dominant(&self) -> bool {
        self.sigma1 >= self.sigma2
    }
}

/// `f(β) = 1 + β²/(2π)` for `β ≤ √(2π)`, else `√(2/π) β`.
pub fn gff_free_energy(beta: f64) -> f64 {
    rem_value(beta, 1.0)
}

/// REM free energy for `N²` i.i.d. Gaussians of variance `(σ²/π) log N²`.
pub fn rem_free_energy(beta: f64, sigma_sq: f64) -> Result<f64> {
    if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
        return Err(Error::param(
            "sigma_sq",
            format!("{sigma_sq} must be positive"),
        ));
    }
    Ok(rem_value(beta, sigma_sq))
}

fn rem_value(beta: f64, sigma_sq: f64) -> f64 {
    let sigma = sigma_sq.sqrt();
    if sigma == 0.0 || beta <= beta_c() / sigma {
        1.0 + beta * beta * sigma_sq / (2.0 * PI)
    } else {
        sqrt_2_over_pi() * sigma * beta
    }
}

/// Critical inverse temperature `√(2π)/σ` of the REM with variance scale `σ²`.
pub fn rem_beta_c(sigma_sq: f64) -> f64 {
    beta_c() / sigma_sq.sqrt()
}

/// Limit of `f^{(α,σ⃗)}_{N,ρ}(β)`.
pub fn generalized_free_energy(beta: f64, sp: &SigmaPair) -> f64 {
    if sp.sigma1 <= sp.sigma2 {
        rem_value(beta, sp.v12())
    } else {
        sp.alpha * rem_value(beta, sp.sigma1 * sp.sigma1)
            + (1.0 - sp.alpha) * rem_value(beta, sp.sigma2 * sp.sigma2)
    }
}

/// Which regime a limiting overlap distribution belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapRegime {
    /// `β ≤ β_c`: all mass at `q = 0`, so the distribution function is 1 on `[0, 1]`.
    HighTemperature,
    /// `β > β_c`: atoms at 0 and 1 with weights `β_c/β` and `1 - β_c/β`.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapLimit {
    pub value: f64,
    pub regime: OverlapRegime,
}

/// Limit of `x_{β,N}(r)` for `r ∈ [0, 1]`.
pub fn overlap_limit(beta: f64, r: f64) -> Result<OverlapLimit> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::param("r", format!("{r} is outside [0, 1]")));
    }
    if !(beta >= 0.0) {
        return Err(Error::param("beta", format!("{beta} must be >= 0")));
    }
    let bc = beta_c();
    Ok(if beta <= bc {
        OverlapLimit {
            value: 1.0,
            regime: OverlapRegime::HighTemperature,
        }
    } else {
        OverlapLimit {
            value: if r < 1.0 { bc / beta } else { 1.0 },
            regime: OverlapRegime::Frozen,
        }
    })
}

/// `γ_max`: `√V₁₂` if `σ₁ ≤ σ₂`, else `σ₁α + σ₂(1-α)`.
pub fn gamma_max(sp: &SigmaPair) -> f64 {
    if sp.sigma1 <= sp.sigma2 {
        sp.v12().sqrt()
    } else {
        sp.sigma1 * sp.alpha + sp.sigma2 * (1.0 - sp.alpha)
    }
}

/// `γ_crit = V₁₂/σ₁`, where the two-level exponent switches branch.
pub fn gamma_crit(sp: &SigmaPair) -> f64 {
    sp.v12() / sp.sigma1
}

/// High-point exponent `ℰ^{(α,σ⃗)}(γ)` for `0 ≤ γ < γ_max`.
pub fn highpoint_exponent(gamma: f64, sp: &SigmaPair) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::param("gamma", format!("{gamma} must be >= 0")));
    }
    let gmax = gamma_max(sp);
    if gamma >= gmax {
        return Err(Error::param(
            "gamma",
            format!("{gamma} is not below gamma_max = {gmax}"),
        ));
    }
    Ok(exponent_unchecked(gamma, sp))
}

fn exponent_unchecked(gamma: f64, sp: &SigmaPair) -> f64 {
    let v12 = sp.v12();
    if sp.sigma1 <= sp.sigma2 || gamma < gamma_crit(sp) {
        1.0 - gamma * gamma / v12
    } else {
        let d = gamma - sp.sigma1 * sp.alpha;
        (1.0 - sp.alpha) - d * d / (sp.sigma2 * sp.sigma2 * (1.0 - sp.alpha))
    }
}

/// Which side of `u = 0` a one-sided derivative is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// `(π/β²) ∂_u f^{(α,(1,1+u))}(β)` at `u`, on the given side.
///
/// Requires the frozen regime near `u`, `β > √(2π)/min(1, 1+u)`.
pub fn free_energy_u_derivative_at(beta: f64, alpha: f64, u: f64, side: Side) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} is outside (0, 1)")));
    }
    if !(u > -1.0) {
        return Err(Error::param("u", format!("{u} must exceed -1")));
    }
    let s2 = 1.0 + u;
    if !(beta > beta_c() / s2.min(1.0)) {
        return Err(Error::param(
            "beta",
            format!("{beta} is not in the frozen regime for u = {u}"),
        ));
    }
    let pref = beta_c() / beta;
    Ok(match side {
        Side::Plus => pref * (1.0 - alpha) * s2 / (alpha + (1.0 - alpha) * s2 * s2).sqrt(),
        Side::Minus => pref * (1.0 - alpha),
    })
}

/// One-sided `u`-derivatives at `u = 0`; both equal `(√(2π)/β)(1-α)`.
pub fn free_energy_u_derivative(beta: f64, alpha: f64, side: Side) -> Result<f64> {
    free_energy_u_derivative_at(beta, alpha, 0.0, side)
}

/// Maximiser and maximum of `P_β(γ) = ℰ(γ) + √(2/π) β γ` over `[0, γ_max]`.
///
/// Candidates are the stationary point of each branch (clipped to its domain) and the
/// branch boundaries; a uniform grid guards against a missed candidate.
pub fn exponent_curve_max(beta: f64, sp: &SigmaPair) -> (f64, f64) {
    let c = sqrt_2_over_pi() * beta;
    let gmax = gamma_max(sp);
    let curve = |g: f64| exponent_unchecked(g, sp) + c * g;
    let v12 = sp.v12();

    let mut candidates = vec![0.0, gmax];
    if sp.sigma1 <= sp.sigma2 {
        candidates.push((c * v12 / 2.0).clamp(0.0, gmax));
    } else {
        let crit = gamma_crit(sp).min(gmax);
        candidates.push(crit);
        candidates.push((c * v12 / 2.0).clamp(0.0, crit));
        let s2 = sp.sigma2 * sp.sigma2 * (1.0 - sp.alpha);
        candidates.push((sp.sigma1 * sp.alpha + c * s2 / 2.0).clamp(crit, gmax));
    }
    const GRID: usize = 2000;
    candidates.extend((0..=GRID).map(|i| gmax * i as f64 / GRID as f64));

    candidates
        .into_iter()
        .map(|g| (g, curve(g)))
        .fold((0.0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        })
}

/// A closed form evaluated by name, with the branch that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub formula: String,
    pub value: f64,
    pub branch: String,
}

/// Inputs accepted by [`predict`]; unused fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PredictInputs {
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub gamma: Option<f64>,
    pub r: Option<f64>,
    pub u: Option<f64>,
}

/// Names accepted by [`predict`].
pub const FORMULAS: &[&str] = &[
    "gff_free_energy",
    "rem_free_energy",
    "generalized_free_energy",
    "overlap_limit",
    "gamma_max",
    "highpoint_exponent",
    "free_energy_u_derivative",
    "exponent_curve_max",
];

fn need(v: Option<f64>, name: &'static str) -> Result<f64> {
    v.ok_or_else(|| Error::param(name, "missing input"))
}

fn sigma_pair(inp: &PredictInputs) -> Result<SigmaPair> {
    SigmaPair::new(
        need(inp.sigma1, "sigma1")?,
        need(inp.sigma2, "sigma2")?,
        need(inp.alpha, "alpha")?,
    )
}

fn temperature_branch(beta: f64, sigma_sq: f64) -> &'static str {
    if beta <= rem_beta_c(sigma_sq) {
        "high_temperature"
    } else {
        "frozen"
    }
}

/// Evaluates a named closed form.
pub fn predict(formula: &str, inp: &PredictInputs) -> Result<Prediction> {
    let (value, branch): (f64, String) = match formula {
        "gff_free_energy" => {
            let beta = need(inp.beta, "beta")?;
            (gff_free_energy(beta), temperature_branch(beta, 1.0).into())
        }
        "rem_free_energy" => {
            let beta = need(inp.beta, "beta")?;
            let s2 = need(inp.sigma_sq, "sigma_sq")?;
            (
                rem_free_energy(beta, s2)?,
                temperature_branch(beta, s2).into(),
            )
        }
        "generalized_free_energy" => {
            let beta = need(inp.beta, "beta")?;
            let sp = sigma_pair(inp)?;
            let branch = if sp.sigma1 <= sp.sigma2 {
                format!("sigma1<=sigma2/{}", temperature_branch(beta, sp.v12()))
            } else {
                format!(
                    "sigma1>sigma2/level1_{}/level2_{}",
                    temperature_branch(beta, sp.sigma1 * sp.sigma1),
                    temperature_branch(beta, sp.sigma2 * sp.sigma2)
                )
            };
            (generalized_free_energy(beta, &sp), branch)
        }
        "overlap_limit" => {
            let lim = overlap_limit(need(inp.beta, "beta")?, need(inp.r, "r")?)?;
            let branch = match lim.regime {
                OverlapRegime::HighTemperature => "high_temperature",
                OverlapRegime::Frozen => "frozen",
            };
            (lim.value, branch.into())
        }
        "gamma_max" => {
            let sp = sigma_pair(inp)?;
            let branch = if sp.sigma1 <= sp.sigma2 {
                "sigma1<=sigma2"
            } else {
                "sigma1>sigma2"
            };
            (gamma_max(&sp), branch.into())
        }
        "highpoint_exponent" => {
            let sp = sigma_pair(inp)?;
            let gamma = need(inp.gamma, "gamma")?;
            let branch = if sp.sigma1 <= sp.sigma2 || gamma < gamma_crit(&sp) {
                "gamma<gamma_crit"
            } else {
                "gamma>=gamma_crit"
            };
            (highpoint_exponent(gamma, &sp)?, branch.into())
        }
        "free_energy_u_derivative" => {
            let beta = need(inp.beta, "beta")?;
            let alpha = need(inp.alpha, "alpha")?;
            let u = inp.u.unwrap_or(0.0);
            if u < 0.0 {
                (
                    free_energy_u_derivative_at(beta, alpha, u, Side::Minus)?,
                    "u<0".into(),
                )
            } else {
                (
                    free_energy_u_derivative_at(beta, alpha, u, Side::Plus)?,
                    "u>=0".into(),
                )
            }
        }
        "exponent_curve_max" => {
            let beta = need(inp.beta, "beta")?;
            let sp = sigma_pair(inp)?;
            let (g, v) = exponent_curve_max(beta, &sp);
            (v, format!("argmax_gamma={g}"))
        }
        other => {
            return Err(Error::param(
                "formula",
                format!(
                    "unknown formula `{other}`; expected one of {}",
                    FORMULAS.join(", ")
                ),
            ))
        }
    };
    Ok(Prediction {
        formula: formula.to_string(),
        value,
        branch,
    })
}

/// Two-level hierarchical Gaussian field: `K₁` blocks of `K₂` leaves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grem2Spec {
    pub blocks: usize,
    pub leaves_per_block: usize,
    pub var1: f64,
    pub var2: f64,
}

impl Grem2Spec {
    pub fn new(blocks: usize, leaves_per_block: usize, var1: f64, var2: f64) -> Result<Self> {
        if blocks == 0 || leaves_per_block == 0 {
            return Err(Error::param("blocks", "branch counts must be positive"));
        }
        if !(var1 > 0.0 && var2 > 0.0) {
            return Err(Error::param("var", "level variances must be positive"));
        }
        Ok(Grem2Spec {
            blocks,
            leaves_per_block,
            var1,
            var2,
        })
    }

    /// GREM matched to an `N × N` box: `K₁ = N^{2α}`, `K₂ = N^{2(1-α)}`, level variances
    /// `(σ₁²α/π) log N²` and `(σ₂²(1-α)/π) log N²`.
    pub fn scaled(n: usize, sp: &SigmaPair) -> Result<Self> {
        let nf = n as f64;
        let log_n2 = 2.0 * nf.ln();
        let blocks = nf.powf(2.0 * sp.alpha).round().max(1.0) as usize;
        let leaves = nf.powf(2.0 * (1.0 - sp.alpha)).round().max(1.0) as usize;
        Self::new(
            blocks,
            leaves,
            sp.sigma1 * sp.sigma1 * sp.alpha / PI * log_n2,
            sp.sigma2 * sp.sigma2 * (1.0 - sp.alpha) / PI * log_n2,
        )
    }

    pub fn leaves(&self) -> usize {
        self.blocks * self.leaves_per_block
    }

    pub fn block_of(&self, leaf: usize) -> usize {
        leaf / self.leaves_per_block
    }
}

/// `ψ̄_v = g¹_{block(v)} + g²_v`, leaves ordered block by block.
pub fn sample_grem2(spec: &Grem2Spec, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let (s1, s2) = (spec.var1.sqrt(), spec.var2.sqrt());
    let mut out = Vec::with_capacity(spec.leaves());
    for _ in 0..spec.blocks {
        let top = s1 * rng.sample::<f64, _>(StandardNormal);
        for _ in 0..spec.leaves_per_block {
            out.push(top + s2 * rng.sample::<f64, _>(StandardNormal));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(s1: f64, s2: f64, a: f64) -> SigmaPair {
        SigmaPair::new(s1, s2, a).unwrap()
    }

    #[test]
    fn gff_values() {
        let bc = beta_c();
        assert_eq!(gff_free_energy(0.0), 1.0);
        assert!((gff_free_energy(bc) - 2.0).abs() < 1e-12);
        assert!((sqrt_2_over_pi() * bc - 2.0).abs() < 1e-12);
        assert!((gff_free_energy(2.0 * bc) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rem_values() {
        let bc = beta_c();
        for b in [0.0, 0.7, 2.0, 3.0, 9.0] {
            assert_eq!(rem_free_energy(b, 1.0).unwrap(), gff_free_energy(b));
        }
        assert!((rem_free_energy(bc, 4.0).unwrap() - 4.0).abs() < 1e-12);
        for s2 in [0.3, 1.0, 2.5, 7.0] {
            let b = rem_beta_c(s2);
            let low = 1.0 + b * b * s2 / (2.0 * PI);
            let high = sqrt_2_over_pi() * s2.sqrt() * b;
            assert!((low - 2.0).abs() < 1e-12 && (high - 2.0).abs() < 1e-12);
        }
        assert!(rem_free_energy(1.0, 0.0).is_err());
    }

    #[test]
    fn generalized_values() {
        let bc = beta_c();
        assert!((generalized_free_energy(bc, &sp(2.0, 1.0, 0.5)) - 3.0).abs() < 1e-12);
        assert!(
            (generalized_free_energy(bc, &sp(1.0, 2.0, 0.5)) - 2.0 * 2.5f64.sqrt()).abs() < 1e-12
        );
        for b in [0.0, 1.0, 2.5, 6.0] {
            assert_eq!(
                generalized_free_energy(b, &sp(1.0, 1.0, 0.3)),
                gff_free_energy(b)
            );
        }
    }

    #[test]
    fn overlap_limit_values() {
        let bc = beta_c();
        let lim = overlap_limit(2.0 * bc, 0.5).unwrap();
        assert!((lim.value - 0.5).abs() < 1e-15);
        assert_eq!(lim.regime, OverlapRegime::Frozen);
        assert_eq!(overlap_limit(2.0 * bc, 1.0).unwrap().value, 1.0);
        assert!(overlap_limit(1e12, 0.3).unwrap().value < 1e-11);
        let hot = overlap_limit(0.5 * bc, 0.3).unwrap();
        assert_eq!(
            (hot.value, hot.regime),
            (1.0, OverlapRegime::HighTemperature)
        );
        assert!(overlap_limit(1.0, 1.5).is_err());
    }

    #[test]
    fn gamma_max_values() {
        assert!((gamma_max(&sp(2.0, 1.0, 0.5)) - 1.5).abs() < 1e-15);
        assert!((gamma_max(&sp(1.0, 2.0, 0.5)) - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((gamma_max(&sp(1.7, 1.7, 0.2)) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn exponent_values() {
        let unit = sp(1.0, 1.0, 0.4);
        for g in [0.0, 0.3, 0.5, 0.99] {
            assert!((highpoint_exponent(g, &unit).unwrap() - (1.0 - g * g)).abs() < 1e-12);
        }
        let s = sp(2.0, 1.0, 0.5);
        assert!((gamma_crit(&s) - 1.25).abs() < 1e-15);
        let left = 1.0 - 1.25f64.powi(2) / 2.5;
        let right = 0.5 - (1.25f64 - 1.0).powi(2) / 0.5;
        assert!((left - 0.375).abs() < 1e-15 && (right - 0.375).abs() < 1e-15);
        assert!((highpoint_exponent(1.25, &s).unwrap() - 0.375).abs() < 1e-12);
        assert!(highpoint_exponent(1.5, &s).is_err());
        assert_eq!(highpoint_exponent(0.0, &s).unwrap(), 1.0);
    }

    #[test]
    fn u_derivative_values() {
        let b = 2.0 * beta_c();
        let plus = free_energy_u_derivative(b, 0.5, Side::Plus).unwrap();
        let minus = free_energy_u_derivative(b, 0.5, Side::Minus).unwrap();
        assert!((plus - 0.25).abs() < 1e-15 && (minus - 0.25).abs() < 1e-15);
        assert!(free_energy_u_derivative(b, 0.999_999, Side::Plus).unwrap() < 1e-5);
        assert!(free_energy_u_derivative(1.0, 0.5, Side::Plus).is_err());
    }

    #[test]
    fn u_derivative_matches_finite_differences() {
        let b = 1.5 * beta_c();
        for alpha in [0.2, 0.5, 0.8] {
            let f = |u: f64| generalized_free_energy(b, &sp(1.0, 1.0 + u, alpha));
            let h = 1e-6;
            for u in [0.05, 0.2] {
                let fd = PI / (b * b) * (f(u + h) - f(u - h)) / (2.0 * h);
                let exact = free_energy_u_derivative_at(b, alpha, u, Side::Plus).unwrap();
                assert!((fd - exact).abs() < 1e-7, "alpha {alpha} u {u}");
            }
            for u in [-0.05, -0.2] {
                let fd = PI / (b * b) * (f(u + h) - f(u - h)) / (2.0 * h);
                let exact = free_energy_u_derivative_at(b, alpha, u, Side::Minus).unwrap();
                assert!((fd - exact).abs() < 1e-7, "alpha {alpha} u {u}");
            }
        }
    }

    #[test]
    fn exponent_curve_small_beta() {
        let unit = sp(1.0, 1.0, 0.5);
        let b = 1.3;
        let (g, v) = exponent_curve_max(b, &unit);
        // d/dγ (1 - γ² + √(2/π) β γ) = 0  ⇒  γ* = β/√(2π)
        assert!((g - b / beta_c()).abs() < 1e-12);
        assert!((v - (1.0 + b * b / (2.0 * PI))).abs() < 1e-12);
        let (g0, v0) = exponent_curve_max(0.0, &unit);
        assert_eq!((g0, v0), (0.0, 1.0));
    }

    #[test]
    fn predict_dispatch() {
        let p = predict(
            "gff_free_energy",
            &PredictInputs {
                beta: Some(2.0 * beta_c()),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((p.value - 4.0).abs() < 1e-12);
        assert_eq!(p.branch, "frozen");
        assert!(predict("nope", &PredictInputs::default()).is_err());
        assert!(predict("gamma_max", &PredictInputs::default()).is_err());
        for f in FORMULAS {
            let inp = PredictInputs {
                beta: Some(3.0 * beta_c()),
                alpha: Some(0.5),
                sigma1: Some(2.0),
                sigma2: Some(1.0),
                sigma_sq: Some(1.0),
                gamma: Some(0.4),
                r: Some(0.5),
                u: Some(0.0),
            };
            assert!(predict(f, &inp).unwrap().value.is_finite(), "{f}");
        }
    }

    #[test]
    fn grem_structure() {
        let spec = Grem2Spec::new(3, 4, 2.0, 0.5).unwrap();
        let x = sample_grem2(&spec, 1);
        assert_eq!(x.len(), 12);
        assert_eq!(spec.block_of(7), 1);
        assert_eq!(x, sample_grem2(&spec, 1));
        let scaled = Grem2Spec::scaled(64, &sp(2.0, 1.0, 0.5)).unwrap();
        assert_eq!((scaled.blocks, scaled.leaves_per_block), (64, 64));
        assert!(Grem2Spec::new(0, 4, 1.0, 1.0).is_err());
    }
}
