//! Geometry of the box `V_N = {1..N}²` and the regions built on it.
//!
//! Vertices use 1-based coordinates; the linear index is row-major with `x`
//! running fastest, so `index(x, y) = (y - 1) * N + (x - 1)`.

use crate::error::{Error, Result};

/// Fraction of `N^{1-α}` used for partition boxes by default.
pub const DEFAULT_PARTITION_FRACTION: f64 = 0.25;

/// Slack when comparing integer distances against real thresholds such as `N^{1-ρ}`.
const THRESHOLD_EPS: f64 = 1e-9;

/// A lattice point of `ℤ²`. May lie outside the box (e.g. on `∂V_N`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    pub x: i64,
    pub y: i64,
}

impl Vertex {
    pub const fn new(x: i64, y: i64) -> Self {
        Vertex { x, y }
    }

    pub fn offset(self, dx: i64, dy: i64) -> Self {
        Vertex::new(self.x + dx, self.y + dy)
    }

    pub fn dist2(self, other: Vertex) -> i64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Vertex) -> f64 {
        (self.dist2(other) as f64).sqrt()
    }
}

/// The box `V_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoxGeometry {
    n: usize,
}

impl BoxGeometry {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("N", "side length must be positive"));
        }
        Ok(BoxGeometry { n })
    }

    /// Side length `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        self.n * self.n
    }

    /// `log N²`, the normalisation used by free energies and overlaps.
    pub fn log_n2(&self) -> f64 {
        2.0 * (self.n as f64).ln()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        let n = self.n as i64;
        (1..=n).contains(&v.x) && (1..=n).contains(&v.y)
    }

    pub fn index(&self, v: Vertex) -> Option<usize> {
        self.contains(v)
            .then(|| (v.y as usize - 1) * self.n + (v.x as usize - 1))
    }

    pub fn checked_index(&self, v: Vertex) -> Result<usize> {
        self.index(v).ok_or(Error::OutsideBox {
            x: v.x,
            y: v.y,
            n: self.n,
        })
    }

    pub fn vertex(&self, index: usize) -> Vertex {
        debug_assert!(index < self.vertex_count());
        Vertex::new((index % self.n) as i64 + 1, (index / self.n) as i64 + 1)
    }

    /// The central vertex `(⌈N/2⌉, ⌈N/2⌉)`.
    pub fn center(&self) -> Vertex {
        let c = self.n.div_ceil(2) as i64;
        Vertex::new(c, c)
    }

    /// Row-major iteration over `V_N`.
    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.vertex_count()).map(move |i| self.vertex(i))
    }

    /// Euclidean distance from `v` to the nearest vertex of `∂V_N`.
    ///
    /// The nearest outside neighbor is always axis-aligned, so this is
    /// `min(x, N+1-x, y, N+1-y)`.
    pub fn boundary_distance(&self, v: Vertex) -> i64 {
        let n1 = self.n as i64 + 1;
        v.x.min(n1 - v.x).min(v.y).min(n1 - v.y)
    }

    /// The outer boundary `∂V_N`: outside vertices sharing an edge with `V_N` (no corners).
    pub fn boundary(&self) -> Vec<Vertex> {
        let n = self.n as i64;
        let mut out = Vec::with_capacity(4 * self.n);
        for k in 1..=n {
            out.push(Vertex::new(k, 0));
            out.push(Vertex::new(k, n + 1));
            out.push(Vertex::new(0, k));
            out.push(Vertex::new(n + 1, k));
        }
        out
    }

    /// The full box as a [`VertexSet`].
    pub fn all(&self) -> VertexSet {
        VertexSet::from_predicate(*self, |_| true)
    }
}

/// A subset of `V_N` with row-major iteration order.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    geom: BoxGeometry,
    members: Vec<usize>,
    mask: Vec<bool>,
}

impl VertexSet {
    pub fn from_predicate(geom: BoxGeometry, mut keep: impl FnMut(Vertex) -> bool) -> Self {
        let mut mask = vec![false; geom.vertex_count()];
        let mut members = Vec::new();
        for (i, slot) in mask.iter_mut().enumerate() {
            if keep(geom.vertex(i)) {
                *slot = true;
                members.push(i);
            }
        }
        VertexSet {
            geom,
            members,
            mask,
        }
    }

    pub fn geometry(&self) -> BoxGeometry {
        self.geom
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.geom.index(v).is_some_and(|i| self.mask[i])
    }

    pub fn contains_index(&self, index: usize) -> bool {
        self.mask.get(index).copied().unwrap_or(false)
    }

    /// Linear indices of the members, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.members
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.members.iter().map(move |&i| self.geom.vertex(i))
    }

    pub fn is_subset_of(&self, other: &VertexSet) -> bool {
        self.members.iter().all(|&i| other.contains_index(i))
    }
}

/// An axis-aligned rectangle of vertices inside `V_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxRegion {
    geom: BoxGeometry,
    lower: Vertex,
    width: usize,
    height: usize,
    clipped: bool,
}

impl BoxRegion {
    pub fn lower(&self) -> Vertex {
        self.lower
    }

    pub fn upper(&self) -> Vertex {
        self.lower
            .offset(self.width as i64 - 1, self.height as i64 - 1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// True when the requested square was cut down to fit.
    pub fn is_clipped(&self) -> bool {
        self.clipped
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, v: Vertex) -> bool {
        let up = self.upper();
        (self.lower.x..=up.x).contains(&v.x) && (self.lower.y..=up.y).contains(&v.y)
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        let (x0, y0) = (self.lower.x, self.lower.y);
        let w = self.width as i64;
        (0..self.height as i64)
            .flat_map(move |dy| (0..w).map(move |dx| Vertex::new(x0 + dx, y0 + dy)))
    }

    pub fn to_vertex_set(&self) -> VertexSet {
        VertexSet::from_predicate(self.geom, |v| self.contains(v))
    }
}

/// Rounds `x` to the nearest even integer, never below 2.
pub fn even_side(x: f64) -> usize {
    let half = (x / 2.0).round().max(1.0);
    2 * half as usize
}

/// Side length of `[v]_t`: `N^{1-t}` rounded to the nearest even integer, or 1 for `t = 1`.
pub fn neighborhood_side(geom: BoxGeometry, t: f64) -> Result<usize> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::param("t", format!("{t} is outside (0, 1]")));
    }
    if t == 1.0 {
        return Ok(1);
    }
    Ok(even_side((geom.n() as f64).powf(1.0 - t)))
}

/// `V_N^δ`: vertices whose distance to `∂V_N` exceeds `δN`.
pub fn inner_box(geom: BoxGeometry, delta: f64) -> Result<VertexSet> {
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::param(
            "delta",
            format!("{delta} is outside [0, 1/2)"),
        ));
    }
    let cut = delta * geom.n() as f64;
    Ok(VertexSet::from_predicate(geom, |v| {
        geom.boundary_distance(v) as f64 > cut
    }))
}

/// `A_{N,ρ}`: vertices at distance at least `N^{1-ρ}` from `∂V_N`.
pub fn bulk_region(geom: BoxGeometry, rho: f64) -> Result<VertexSet> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param("rho", format!("{rho} is outside (0, 1)")));
    }
    let cut = bulk_threshold(geom, rho);
    Ok(VertexSet::from_predicate(geom, |v| {
        geom.boundary_distance(v) as f64 >= cut
    }))
}

fn bulk_threshold(geom: BoxGeometry, rho: f64) -> f64 {
    (geom.n() as f64).powf(1.0 - rho) - THRESHOLD_EPS
}

/// `[v]_t`: the square of side `N^{1-t}` (rounded to even) around `v`, intersected with `V_N`.
///
/// For even side `s` the square spans offsets `-s/2+1 ..= s/2` in each coordinate.
pub fn neighborhood(geom: BoxGeometry, v: Vertex, t: f64) -> Result<BoxRegion> {
    geom.checked_index(v)?;
    let side = neighborhood_side(geom, t)?;
    Ok(square_around(geom, v, side))
}

pub(crate) fn square_around(geom: BoxGeometry, v: Vertex, side: usize) -> BoxRegion {
    let (lo, hi) = if side == 1 {
        (0, 0)
    } else {
        (-(side as i64) / 2 + 1, side as i64 / 2)
    };
    let n = geom.n() as i64;
    let x0 = (v.x + lo).max(1);
    let y0 = (v.y + lo).max(1);
    let x1 = (v.x + hi).min(n);
    let y1 = (v.y + hi).min(n);
    let width = (x1 - x0 + 1) as usize;
    let height = (y1 - y0 + 1) as usize;
    BoxRegion {
        geom,
        lower: Vertex::new(x0, y0),
        width,
        height,
        clipped: width != side || height != side,
    }
}

/// Side of the partition boxes: `fraction · N^{1-α}`, floored, at least 1.
pub fn partition_side(geom: BoxGeometry, alpha: f64, fraction: f64) -> usize {
    let raw = fraction * (geom.n() as f64).powf(1.0 - alpha);
    ((raw + THRESHOLD_EPS).floor() as usize).max(1)
}

/// Disjoint square boxes tiling `A_{N,ρ}`, anchored at its lower-left corner.
///
/// Boxes truncated by the far edge of `A_{N,ρ}` are flagged as clipped.
pub fn partition_boxes(
    geom: BoxGeometry,
    rho: f64,
    alpha: f64,
    fraction: f64,
) -> Result<Vec<BoxRegion>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} is outside (0, 1)")));
    }
    if rho >= alpha {
        return Err(Error::param(
            "rho",
            format!("rho = {rho} must be below alpha = {alpha}"),
        ));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param(
            "fraction",
            format!("{fraction} is outside (0, 1]"),
        ));
    }
    let bulk = bulk_region(geom, rho)?;
    if bulk.is_empty() {
        return Ok(Vec::new());
    }
    // A_{N,ρ} is the centered square [m, N+1-m]².
    let lo = geom.vertex(bulk.indices()[0]).x;
    let hi = geom.n() as i64 + 1 - lo;
    let side = partition_side(geom, alpha, fraction) as i64;
    let mut boxes = Vec::new();
    let mut y = lo;
    while y <= hi {
        let h = side.min(hi - y + 1);
        let mut x = lo;
        while x <= hi {
            let w = side.min(hi - x + 1);
            boxes.push(BoxRegion {
                geom,
                lower: Vertex::new(x, y),
                width: w as usize,
                height: h as usize,
                clipped: w != side || h != side,
            });
            x += side;
        }
        y += side;
    }
    Ok(boxes)
}
