//! Sine-basis diagonalisation of `I - Q` on `V_N`, where `Q` is the adjacency
//! operator divided by 4 with Dirichlet conditions outside the box.
//!
//! The orthonormal 2D DST-I `S` satisfies `S = Sᵀ = S⁻¹` and
//! `S (I - Q) S = diag(λ_{jk})` with `λ_{jk} = 1 - (cos(πj/(N+1)) + cos(πk/(N+1)))/2`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustdct::{DctPlanner, Dst1};

pub(crate) struct SineBasis {
    n: usize,
    plan: Arc<dyn Dst1<f64>>,
    scale: f64,
    cosines: Vec<f64>,
}

impl SineBasis {
    pub(crate) fn new(n: usize) -> Self {
        let plan = DctPlanner::new().plan_dst1(n);
        let cosines = (1..=n)
            .map(|j| (PI * j as f64 / (n + 1) as f64).cos())
            .collect();
        SineBasis {
            n,
            plan,
            scale: (2.0 / (n + 1) as f64).sqrt(),
            cosines,
        }
    }

    /// `λ_{jk}` for 0-based frequency indices.
    #[inline]
    pub(crate) fn eigenvalue(&self, j: usize, k: usize) -> f64 {
        1.0 - 0.5 * (self.cosines[j] + self.cosines[k])
    }

    /// Orthonormal 1D basis vector entry `sqrt(2/(N+1)) sin(π (j+1)(x+1)/(N+1))`, 0-based.
    #[inline]
    pub(crate) fn mode(&self, j: usize, x: usize) -> f64 {
        self.scale * (PI * ((j + 1) * (x + 1)) as f64 / (self.n + 1) as f64).sin()
    }

    /// rustdct 0.7's FFT-backed DST-I reads two padding slots of the scratch buffer
    /// without writing them, so the scratch must be zero on every call.
    fn dst1(&self, buffer: &mut [f64], scratch: &mut [f64]) {
        scratch.fill(0.0);
        self.plan.process_dst1_with_scratch(buffer, scratch);
    }

    /// Applies the orthonormal 2D DST-I in place to a row-major `N × N` grid.
    pub(crate) fn transform(&self, data: &mut [f64]) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        let mut scratch = vec![0.0; self.plan.get_scratch_len()];
        for row in data.chunks_exact_mut(n) {
            self.dst1(row, &mut scratch);
        }
        let mut column = vec![0.0; n];
        for x in 0..n {
            for y in 0..n {
                column[y] = data[y * n + x];
            }
            self.dst1(&mut column, &mut scratch);
            for y in 0..n {
                data[y * n + x] = column[y];
            }
        }
        let s2 = self.scale * self.scale;
        data.iter_mut().for_each(|v| *v *= s2);
    }

    /// Solves `(I - Q) g = e_source`, returning `g` row-major.
    pub(crate) fn solve_unit(&self, sx: usize, sy: usize) -> Vec<f64> {
        let n = self.n;
        let mx: Vec<f64> = (0..n).map(|j| self.mode(j, sx)).collect();
        let my: Vec<f64> = (0..n).map(|k| self.mode(k, sy)).collect();
        let mut spec = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                spec[k * n + j] = mx[j] * my[k] / self.eigenvalue(j, k);
            }
        }
        self.transform(&mut spec);
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_is_an_involution() {
        let basis = SineBasis::new(9);
        let orig: Vec<f64> = (0..81).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut data = orig.clone();
        basis.transform(&mut data);
        basis.transform(&mut data);
        for (a, b) in orig.iter().zip(&data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_matches_explicit_modes() {
        let n = 5;
        let basis = SineBasis::new(n);
        let mut data = vec![0.0; n * n];
        data[2 * n + 1] = 1.0; // x = 1, y = 2
        basis.transform(&mut data);
        for k in 0..n {
            for j in 0..n {
                let expected = basis.mode(j, 1) * basis.mode(k, 2);
                assert!((data[k * n + j] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn transform_is_an_involution_at_fft_sizes() {
        for n in [33, 64, 100, 129] {
            let basis = SineBasis::new(n);
            let orig: Vec<f64> = (0..n * n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
            let mut data = orig.clone();
            basis.transform(&mut data);
            basis.transform(&mut data);
            let err = orig
                .iter()
                .zip(&data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "n = {n}: {err}");
        }
    }
}
