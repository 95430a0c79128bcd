//! Exact DGFF sampling and Green-function evaluation on `V_N`.
//!
//! The covariance is the expected-visits matrix `G = (I - Q)⁻¹`, with `Q` the
//! nearest-neighbor adjacency divided by 4. Both sampling and Green columns go
//! through the sine basis that diagonalises `I - Q`, so each costs one 2D
//! transform, `O(N² log N)`.

use std::io::{Read, Write};
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::{inner_box, BoxGeometry, Vertex};
use crate::spectral::SineBasis;

/// Version stamped into snapshots; bump when the sampler's output for a seed changes.
pub const SAMPLER_VERSION: u64 = 1;

/// `u64::from_le_bytes(*b"DGFFSNAP")`.
pub const SNAPSHOT_MAGIC: u64 = u64::from_le_bytes(*b"DGFFSNAP");

/// Default number of cached Green columns.
pub const DEFAULT_GREEN_CACHE_CAPACITY: usize = 4096;

/// Largest `N` accepted by [`green_exact_small`].
pub const DENSE_GREEN_LIMIT: usize = 32;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Additive constant of the potential kernel, `(2γ₀ + log 8)/π`.
pub const DEFAULT_KAPPA: f64 = (2.0 * EULER_GAMMA + 2.079_441_541_679_835_8) / std::f64::consts::PI;

/// One realisation of a real field on `V_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    geom: BoxGeometry,
    seed: u64,
    values: Vec<f64>,
}

impl FieldSample {
    pub fn from_values(geom: BoxGeometry, seed: u64, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.vertex_count() {
            return Err(Error::param(
                "values",
                format!(
                    "expected {} values, got {}",
                    geom.vertex_count(),
                    values.len()
                ),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(
                "values",
                format!("non-finite value at index {i}"),
            ));
        }
        Ok(FieldSample { geom, seed, values })
    }

    pub fn geometry(&self) -> BoxGeometry {
        self.geom
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Field value at `v`; zero outside the box (Dirichlet condition).
    pub fn value(&self, v: Vertex) -> f64 {
        self.geom.index(v).map_or(0.0, |i| self.values[i])
    }

    /// Multiplies every value by `c`.
    pub fn scaled(&self, c: f64) -> FieldSample {
        FieldSample {
            geom: self.geom,
            seed: self.seed,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Writes the binary snapshot: four little-endian `u64` (magic, version, N, seed)
    /// followed by `N²` little-endian `f64` in row-major order.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        for word in [
            SNAPSHOT_MAGIC,
            SAMPLER_VERSION,
            self.geom.n() as u64,
            self.seed,
        ] {
            w.write_all(&word.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut header = [0u64; 4];
        for h in header.iter_mut() {
            r.read_exact(&mut word)?;
            *h = u64::from_le_bytes(word);
        }
        let [magic, version, n, seed] = header;
        if magic != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot(format!("bad magic {magic:#018x}")));
        }
        if version != SAMPLER_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let n = usize::try_from(n)
            .ok()
            .filter(|&n| n > 0 && n <= 1 << 16)
            .ok_or_else(|| Error::Snapshot(format!("implausible side length {n}")))?;
        let geom = BoxGeometry::new(n)?;
        let mut raw = vec![0u8; 8 * geom.vertex_count()];
        r.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        FieldSample::from_values(geom, seed, values).map_err(|e| Error::Snapshot(e.to_string()))
    }
}

/// Reusable spectral sampler for one box size.
pub struct DgffSampler {
    geom: BoxGeometry,
    basis: SineBasis,
    inv_sqrt_eig: Vec<f64>,
}

impl DgffSampler {
    pub fn new(geom: BoxGeometry) -> Self {
        let basis = SineBasis::new(geom.n());
        let n = geom.n();
        let mut inv_sqrt_eig = Vec::with_capacity(n * n);
        for k in 0..n {
            for j in 0..n {
                inv_sqrt_eig.push(basis.eigenvalue(j, k).sqrt().recip());
            }
        }
        DgffSampler {
            geom,
            basis,
            inv_sqrt_eig,
        }
    }

    pub fn geometry(&self) -> BoxGeometry {
        self.geom
    }

    /// One exact sample, deterministic in `seed`.
    pub fn sample(&self, seed: u64) -> FieldSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, seed)
    }

    /// Draws from `rng`; `seed` is recorded as metadata only.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, seed: u64) -> FieldSample {
        let mut values: Vec<f64> = self
            .inv_sqrt_eig
            .iter()
            .map(|s| s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        self.basis.transform(&mut values);
        FieldSample {
            geom: self.geom,
            seed,
            values,
        }
    }
}

/// Draws one DGFF sample on `V_N`.
pub fn sample_dgff(geom: BoxGeometry, seed: u64) -> FieldSample {
    DgffSampler::new(geom).sample(seed)
}

/// `G_{V_N}(source, ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenColumn {
    geom: BoxGeometry,
    source: Vertex,
    values: Vec<f64>,
}

impl GreenColumn {
    pub fn source(&self) -> Vertex {
        self.source
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `G(source, u)`, zero for `u` outside the box.
    pub fn get(&self, u: Vertex) -> f64 {
        self.geom.index(u).map_or(0.0, |i| self.values[i])
    }

    pub fn at_index(&self, index: usize) -> f64 {
        self.values[index]
    }
}

/// Exact Green column for one source vertex, without caching.
pub fn green_column(geom: BoxGeometry, v: Vertex) -> Result<GreenColumn> {
    let basis = SineBasis::new(geom.n());
    solve_column(geom, &basis, v)
}

fn solve_column(geom: BoxGeometry, basis: &SineBasis, v: Vertex) -> Result<GreenColumn> {
    geom.checked_index(v)?;
    let mut values = basis.solve_unit(v.x as usize - 1, v.y as usize - 1);
    // The exact column is nonnegative; clamp transform round-off at far vertices.
    values.iter_mut().for_each(|g| *g = g.max(0.0));
    Ok(GreenColumn {
        geom,
        source: v,
        values,
    })
}

/// Thread-safe LRU cache of Green columns for one box.
///
/// Lookups and inserts are serialised by a mutex; solves run outside the lock,
/// so concurrent misses on distinct vertices proceed in parallel.
pub struct GreenCache {
    geom: BoxGeometry,
    basis: SineBasis,
    columns: Mutex<LruCache<usize, Arc<GreenColumn>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl GreenCache {
    pub fn new(geom: BoxGeometry) -> Self {
        Self::with_capacity(geom, DEFAULT_GREEN_CACHE_CAPACITY)
    }

    pub fn with_capacity(geom: BoxGeometry, capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        GreenCache {
            geom,
            basis: SineBasis::new(geom.n()),
            columns: Mutex::new(LruCache::new(cap)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Capacity chosen so the cached columns fit in `bytes`, capped at the default capacity.
    pub fn with_memory_budget(geom: BoxGeometry, bytes: usize) -> Self {
        let per_column = 8 * geom.vertex_count();
        let cap = (bytes / per_column).clamp(1, DEFAULT_GREEN_CACHE_CAPACITY);
        Self::with_capacity(geom, cap)
    }

    pub fn geometry(&self) -> BoxGeometry {
        self.geom
    }

    pub fn capacity(&self) -> usize {
        self.columns.lock().unwrap().cap().get()
    }

    pub fn column(&self, v: Vertex) -> Result<Arc<GreenColumn>> {
        let idx = self.geom.checked_index(v)?;
        Ok(self.column_by_index(idx))
    }

    pub fn column_by_index(&self, index: usize) -> Arc<GreenColumn> {
        if let Some(col) = self.columns.lock().unwrap().get(&index) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Arc::clone(col);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let col = Arc::new(
            solve_column(self.geom, &self.basis, self.geom.vertex(index))
                .expect("index is inside the box"),
        );
        self.columns.lock().unwrap().put(index, Arc::clone(&col));
        col
    }

    /// `G(v, u)`; zero when `u` lies outside the box.
    pub fn value(&self, v: Vertex, u: Vertex) -> Result<f64> {
        Ok(self.column(v)?.get(u))
    }

    /// (hits, misses) since construction.
    pub fn stats(&self) -> (u64, u64) {
        (
            self.hits.load(Ordering::Relaxed),
            self.misses.load(Ordering::Relaxed),
        )
    }
}

/// Dense `(I - Q)⁻¹` for small boxes; used as a test oracle.
pub fn green_exact_small(geom: BoxGeometry) -> Result<DMatrix<f64>> {
    green_exact_small_with_limit(geom, DENSE_GREEN_LIMIT)
}

pub fn green_exact_small_with_limit(geom: BoxGeometry, limit: usize) -> Result<DMatrix<f64>> {
    let n = geom.n();
    if n > limit {
        return Err(Error::TooLarge { n, limit });
    }
    let m = geom.vertex_count();
    let mut a = DMatrix::<f64>::identity(m, m);
    for (i, v) in geom.vertices().enumerate() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            if let Some(j) = geom.index(v.offset(dx, dy)) {
                a[(i, j)] -= 0.25;
            }
        }
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::param("N", "I - Q is not positive definite"))?;
    Ok(chol.inverse())
}

/// `G(v, v)` for every vertex, row-major, in `O(N³)`.
pub fn green_diagonal(geom: BoxGeometry) -> Vec<f64> {
    let n = geom.n();
    let basis = SineBasis::new(n);
    // a[j][x] = mode_j(x)²
    let a: Vec<f64> = (0..n)
        .flat_map(|j| (0..n).map(move |x| (j, x)))
        .map(|(j, x)| basis.mode(j, x).powi(2))
        .collect();
    // b[j][y] = Σ_k a[k][y] / λ_{jk}
    let mut b = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            let w = 1.0 / basis.eigenvalue(j, k);
            for y in 0..n {
                b[j * n + y] += w * a[k * n + y];
            }
        }
    }
    let mut diag = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            diag[y * n + x] = (0..n).map(|j| a[j * n + x] * b[j * n + y]).sum();
        }
    }
    diag
}

/// `(v, G(v,v))` over `V_N^δ`, row-major.
pub fn variance_profile(geom: BoxGeometry, delta: f64) -> Result<Vec<(Vertex, f64)>> {
    let set = inner_box(geom, delta)?;
    let diag = green_diagonal(geom);
    Ok(set
        .indices()
        .iter()
        .map(|&i| (geom.vertex(i), diag[i]))
        .collect())
}

/// Potential kernel `a(v, v')` of the planar walk, asymptotic form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialKernelValue {
    pub value: f64,
    pub kappa: f64,
}

/// `a(v,v') ≈ (2/π) log‖v - v'‖ + κ` with the default constant; `a(v,v) = 0`.
pub fn potential_kernel(v: Vertex, w: Vertex) -> PotentialKernelValue {
    potential_kernel_with(v, w, DEFAULT_KAPPA)
}

pub fn potential_kernel_with(v: Vertex, w: Vertex, kappa: f64) -> PotentialKernelValue {
    let value = if v == w {
        0.0
    } else {
        std::f64::consts::FRAC_2_PI * v.dist(w).ln() + kappa
    };
    PotentialKernelValue { value, kappa }
}
