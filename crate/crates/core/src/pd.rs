//! Poisson–Dirichlet weights and replica moments `E Σ ξ_{k₁}⋯ξ_{k_s} F(δ_{k_l k_l'})`.
//!
//! Atoms are `η_i = Γ_i^{-1/α}` for unit-rate arrival times `Γ_i`, truncated after `K`
//! atoms. The normaliser is the retained sum plus the conditional mean of the discarded
//! tail, so `Σ ξ_k < 1`. The missing mass is "dust": infinitely many vanishing atoms that
//! contribute to first moments but never to coincidences.

use rand::distributions::Distribution;
use rand::Rng;
use rand_distr::{Exp1, WeightedAliasIndex};
use rayon::prelude::*;
use serde::Serialize;

use crate::closedform::beta_c;
use crate::error::{Error, Result};
use crate::overlap::OverlapHistogram;
use crate::seed::{derive_seed, rng_from_seed, TaskKind};
use crate::stats::mean_stderr;

/// Largest `s` evaluated by exact summation over equality patterns.
pub const EXACT_MAX_REPLICAS: usize = 4;

/// Index draws per weight sample when `s` exceeds [`EXACT_MAX_REPLICAS`].
pub const DEFAULT_INDEX_DRAWS: usize = 64;

/// One decreasing Poisson–Dirichlet sequence truncated after `K` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct PdWeights {
    alpha: f64,
    weights: Vec<f64>,
    retained: f64,
    tail: f64,
}

impl PdWeights {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn truncation(&self) -> usize {
        self.weights.len()
    }

    /// `ξ₁ ≥ ξ₂ ≥ … ≥ ξ_K`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_k ξ_k`.
    pub fn retained_mass(&self) -> f64 {
        self.retained
    }

    /// `1 - Σ_k ξ_k`, the dust mass.
    pub fn deficit(&self) -> f64 {
        (1.0 - self.retained).max(0.0)
    }

    /// Estimated unnormalised tail `E[Σ_{i>K} η_i | Γ_K]`.
    pub fn tail_estimate(&self) -> f64 {
        self.tail
    }

    /// Power sum `Σ ξ^m` including dust, so `m = 1` gives exactly 1.
    pub fn power_sum(&self, m: u32) -> f64 {
        match m {
            0 => panic!("power_sum needs m >= 1"),
            1 => 1.0,
            2 => neumaier(self.weights.iter().map(|x| x * x)),
            _ => neumaier(self.weights.iter().map(|x| x.powi(m as i32))),
        }
    }

    /// `Σ ξ_k²`, the probability that two independent draws hit the same atom.
    pub fn coincidence(&self) -> f64 {
        self.power_sum(2)
    }
}

fn neumaier(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} is outside (0, 1)")))
    }
}

/// `α/(1-α) Γ^{1-1/α}`: the integral of `t^{-1/α}` beyond `Γ`.
pub fn tail_mass(alpha: f64, gamma_k: f64) -> f64 {
    alpha / (1.0 - alpha) * gamma_k.powf(1.0 - 1.0 / alpha)
}

pub fn sample_pd_with<R: Rng + ?Sized>(alpha: f64, atoms: usize, rng: &mut R) -> Result<PdWeights> {
    check_alpha(alpha)?;
    if atoms == 0 {
        return Err(Error::param("atoms", "need at least one atom"));
    }
    let expo = -1.0 / alpha;
    let square = alpha == 0.5;
    let mut arrival = 0.0f64;
    let mut eta = Vec::with_capacity(atoms);
    for _ in 0..atoms {
        arrival += rng.sample::<f64, _>(Exp1);
        eta.push(if square {
            1.0 / (arrival * arrival)
        } else {
            arrival.powf(expo)
        });
    }
    let tail = tail_mass(alpha, arrival);
    let raw = neumaier(eta.iter().copied());
    let total = raw + tail;
    for x in eta.iter_mut() {
        *x /= total;
    }
    Ok(PdWeights {
        alpha,
        weights: eta,
        retained: raw / total,
        tail,
    })
}

/// Samples `PD(α)` truncated after `atoms` atoms.
pub fn sample_pd(alpha: f64, atoms: usize, seed: u64) -> Result<PdWeights> {
    sample_pd_with(alpha, atoms, &mut rng_from_seed(seed))
}

/// Equality pattern of `s` replica indices as restricted-growth labels:
/// `labels[0] = 0` and each label is at most one more than all earlier ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ReplicaPattern {
    labels: Vec<u8>,
}

impl ReplicaPattern {
    pub fn from_labels(labels: Vec<u8>) -> Result<Self> {
        let mut next = 0u8;
        for &l in &labels {
            if l > next {
                return Err(Error::param("labels", "not a restricted-growth string"));
            }
            if l == next {
                next += 1;
            }
        }
        Ok(ReplicaPattern { labels })
    }

    /// Canonical pattern of arbitrary atom indices.
    pub fn from_indices<T: PartialEq>(indices: &[T]) -> Self {
        let mut reps: Vec<&T> = Vec::new();
        let labels = indices
            .iter()
            .map(|k| match reps.iter().position(|r| *r == k) {
                Some(p) => p as u8,
                None => {
                    reps.push(k);
                    (reps.len() - 1) as u8
                }
            })
            .collect();
        ReplicaPattern { labels }
    }

    pub fn replicas(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// `δ_{k_l k_l'}`.
    pub fn same(&self, l: usize, lp: usize) -> bool {
        self.labels[l] == self.labels[lp]
    }

    pub fn block_count(&self) -> usize {
        self.labels
            .iter()
            .map(|&l| l as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn block_sizes(&self) -> Vec<u32> {
        let mut sizes = vec![0u32; self.block_count()];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Relabels replicas: replica `l` of the result is replica `perm[l]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let picked: Vec<u8> = perm.iter().map(|&p| self.labels[p]).collect();
        Self::from_indices(&picked)
    }

    /// All set partitions of `s` replicas.
    pub fn all(s: usize) -> Vec<ReplicaPattern> {
        set_partitions(s)
            .into_iter()
            .map(|labels| ReplicaPattern { labels })
            .collect()
    }
}

fn set_partitions(s: usize) -> Vec<Vec<u8>> {
    fn rec(cur: &mut Vec<u8>, s: usize, next: u8, out: &mut Vec<Vec<u8>>) {
        if cur.len() == s {
            out.push(cur.clone());
            return;
        }
        for l in 0..=next {
            cur.push(l);
            rec(cur, s, if l == next { next + 1 } else { next }, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(s), s, 0, &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `Σ_{distinct k₁..k_m} Π ξ_{k_j}^{b_j}` by Möbius inversion over merges of the blocks.
fn distinct_sum(sizes: &[u32], power: &dyn Fn(u32) -> f64) -> f64 {
    set_partitions(sizes.len())
        .into_iter()
        .map(|merge| {
            let groups = merge.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
            let mut exps = vec![0u32; groups];
            let mut counts = vec![0usize; groups];
            for (b, &g) in merge.iter().enumerate() {
                exps[g as usize] += sizes[b];
                counts[g as usize] += 1;
            }
            let mu: f64 = counts
                .iter()
                .map(|&c| {
                    if c % 2 == 1 {
                        factorial(c - 1)
                    } else {
                        -factorial(c - 1)
                    }
                })
                .product();
            mu * exps.iter().map(|&e| power(e)).product::<f64>()
        })
        .sum()
}

/// `Σ_{k₁..k_s} ξ_{k₁}⋯ξ_{k_s} F(pattern)` for one weight sequence, summed exactly over patterns.
pub fn pattern_sum<F>(w: &PdWeights, s: usize, f: &F) -> f64
where
    F: Fn(&ReplicaPattern) -> f64 + ?Sized,
{
    let mut powers = [0.0f64; EXACT_MAX_REPLICAS + 1];
    for (m, p) in powers.iter_mut().enumerate().skip(1).take(s) {
        *p = w.power_sum(m as u32);
    }
    let power = |m: u32| powers[m as usize];
    ReplicaPattern::all(s)
        .iter()
        .map(|pat| {
            let fv = f(pat);
            if fv == 0.0 {
                0.0
            } else {
                fv * distinct_sum(&pat.block_sizes(), &power)
            }
        })
        .sum()
}

/// Monte Carlo estimate of the same sum: `draws` independent `s`-tuples of atom indices.
/// Dust draws are fresh atoms distinct from everything else.
pub fn pattern_sum_sampled<F, R>(w: &PdWeights, s: usize, f: &F, draws: usize, rng: &mut R) -> f64
where
    F: Fn(&ReplicaPattern) -> f64 + ?Sized,
    R: Rng + ?Sized,
{
    let mut table: Vec<f64> = w.weights.clone();
    table.push(w.deficit());
    let alias = WeightedAliasIndex::new(table).expect("positive weights");
    let dust = w.weights.len();
    let mut acc = 0.0;
    let mut idx = vec![0usize; s];
    for _ in 0..draws {
        let mut fresh = usize::MAX;
        for slot in idx.iter_mut() {
            let k = alias.sample(rng);
            *slot = if k == dust {
                fresh -= 1;
                fresh
            } else {
                k
            };
        }
        acc += f(&ReplicaPattern::from_indices(&idx));
    }
    acc / draws as f64
}

/// Mean and standard error over weight samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// `E Σ ξ_{k₁}⋯ξ_{k_s} F(δ_{k_l k_l'})` over `samples` weight sequences with `atoms` atoms.
///
/// Exact over patterns for `s ≤ 4`; otherwise [`DEFAULT_INDEX_DRAWS`] sampled index tuples
/// per sequence.
pub fn pd_replica_moment<F>(
    alpha: f64,
    s: usize,
    f: &F,
    samples: usize,
    atoms: usize,
    seed: u64,
) -> Result<MomentEstimate>
where
    F: Fn(&ReplicaPattern) -> f64 + Sync + ?Sized,
{
    check_alpha(alpha)?;
    if s < 2 {
        return Err(Error::param("s", format!("{s} replicas; need at least 2")));
    }
    if samples == 0 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i, TaskKind::Pd));
            let w = sample_pd_with(alpha, atoms, &mut rng)?;
            Ok(if s <= EXACT_MAX_REPLICAS {
                pattern_sum(&w, s, f)
            } else {
                pattern_sum_sampled(&w, s, f, DEFAULT_INDEX_DRAWS, &mut rng)
            })
        })
        .collect::<Result<_>>()?;
    let (mean, stderr) = mean_stderr(&values);
    Ok(MomentEstimate {
        mean,
        stderr,
        samples,
    })
}

/// `E Σ ξ_k²`, whose value is `1 - α`.
pub fn pd_second_moment(
    alpha: f64,
    samples: usize,
    atoms: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    pd_replica_moment(
        alpha,
        2,
        &|p: &ReplicaPattern| if p.same(0, 1) { 1.0 } else { 0.0 },
        samples,
        atoms,
        seed,
    )
}

/// One interior grid point of a field overlap histogram against the limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapComparison {
    pub r: f64,
    pub field: f64,
    pub stderr: f64,
    pub target: f64,
    pub discrepancy: f64,
    /// Discrepancy in units of the field standard error (infinite when the error is 0).
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdFieldReport {
    pub beta: f64,
    pub pd_alpha: f64,
    /// Limiting interior value `β_c/β`.
    pub target: f64,
    pub coincidence: MomentEstimate,
    /// `1 - coincidence` minus `target`; zero up to Monte Carlo error.
    pub consistency: f64,
    pub rows: Vec<OverlapComparison>,
}

/// Interior range of `r` compared by [`pd_vs_field_overlap`].
pub const INTERIOR: (f64, f64) = (0.2, 0.8);

/// Pairs the field estimate of `x(r)` for interior `r` with `β_c/β` and the PD
/// pair-coincidence moment at `α = β_c/β`.
pub fn pd_vs_field_overlap(
    beta: f64,
    hist: &OverlapHistogram,
    samples: usize,
    atoms: usize,
    seed: u64,
) -> Result<PdFieldReport> {
    let bc = beta_c();
    if !(beta > bc) {
        return Err(Error::param(
            "beta",
            format!("{beta} is not above beta_c = {bc}"),
        ));
    }
    let alpha = bc / beta;
    let coincidence = pd_second_moment(alpha, samples, atoms, seed)?;
    let rows = hist
        .r_grid
        .iter()
        .zip(hist.x.iter().zip(&hist.stderr))
        .filter(|(r, _)| **r >= INTERIOR.0 && **r <= INTERIOR.1)
        .map(|(&r, (&field, &stderr))| {
            let discrepancy = field - alpha;
            OverlapComparison {
                r,
                field,
                stderr,
                target: alpha,
                discrepancy,
                z: if stderr > 0.0 {
                    discrepancy / stderr
                } else {
                    f64::INFINITY
                },
            }
        })
        .collect();
    Ok(PdFieldReport {
        beta,
        pd_alpha: alpha,
        target: alpha,
        coincidence,
        consistency: 1.0 - coincidence.mean - alpha,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_decreasing_and_sub_stochastic() {
        for alpha in [0.1, 0.5, 0.9] {
            let w = sample_pd(alpha, 500, 3).unwrap();
            assert!(w.weights().windows(2).all(|p| p[0] >= p[1]));
            assert!(w.weights().iter().all(|&x| (0.0..=1.0).contains(&x)));
            assert!(w.retained_mass() <= 1.0 + 1e-12);
            assert!(w.tail_estimate() > 0.0);
        }
        assert_eq!(
            sample_pd(0.5, 100, 9).unwrap(),
            sample_pd(0.5, 100, 9).unwrap()
        );
        assert!(sample_pd(1.0, 10, 0).is_err());
        assert!(sample_pd(0.0, 10, 0).is_err());
    }

    #[test]
    fn partitions_are_counted_by_bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52];
        for (s, &b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(s).len(), b);
        }
    }

    #[test]
    fn pattern_labels() {
        let p = ReplicaPattern::from_indices(&[7, 3, 7, 9]);
        assert_eq!(p.labels(), &[0, 1, 0, 2]);
        assert!(p.same(0, 2) && !p.same(0, 1));
        assert_eq!(p.block_sizes(), vec![2, 1, 1]);
        assert_eq!(p.permuted(&[1, 0, 2, 3]).labels(), &[0, 1, 1, 2]);
        assert!(ReplicaPattern::from_labels(vec![0, 2]).is_err());
    }

    #[test]
    fn distinct_sums_by_hand() {
        let xs = [0.5, 0.3, 0.2];
        let p = |m: u32| xs.iter().map(|x: &f64| x.powi(m as i32)).sum::<f64>();
        let pair = distinct_sum(&[1, 1], &p);
        let brute: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| xs[i] * xs[j])
            .sum();
        assert!((pair - brute).abs() < 1e-15);
        assert!((pair - (p(1) * p(1) - p(2))).abs() < 1e-15);
        let triple = distinct_sum(&[2, 1, 1], &p);
        let mut brute = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    if i != j && j != k && i != k {
                        brute += xs[i] * xs[i] * xs[j] * xs[k];
                    }
                }
            }
        }
        assert!((triple - brute).abs() < 1e-15);
    }

    #[test]
    fn constant_function_sums_to_one() {
        let w = sample_pd(0.5, 200, 1).unwrap();
        for s in 2..=4 {
            assert!((pattern_sum(&w, s, &|_: &ReplicaPattern| 1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_matches_exact() {
        let w = sample_pd(0.4, 300, 5).unwrap();
        let f = |p: &ReplicaPattern| {
            if p.same(0, 1) && !p.same(1, 2) {
                1.0
            } else {
                0.0
            }
        };
        let exact = pattern_sum(&w, 3, &f);
        let mut rng = rng_from_seed(11);
        let approx = pattern_sum_sampled(&w, 3, &f, 200_000, &mut rng);
        assert!((exact - approx).abs() < 5e-3, "{exact} vs {approx}");
    }

    #[test]
    fn second_moment_is_roughly_one_minus_alpha() {
        let m = pd_second_moment(0.5, 4000, 1000, 2).unwrap();
        assert!((m.mean - 0.5).abs() < 4.0 * m.stderr + 5e-3, "{m:?}");
    }
}
