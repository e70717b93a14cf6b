//! Uniform box grids, sampled functions and node regions.
//!
//! Nodes are addressed either by a multi-index or by a row-major linear
//! index (last axis fastest). Every sampled value is finite; points outside
//! the support of a function are modelled by leaving them out of a region,
//! never by a sentinel value.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A uniform grid on the box `[mins, maxs]` with `shape[i] >= 2` points per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainRepr", into = "DomainRepr")]
pub struct GridDomain {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct DomainRepr {
    dim: usize,
    min: Vec<f64>,
    max: Vec<f64>,
    shape: Vec<usize>,
}

impl TryFrom<DomainRepr> for GridDomain {
    type Error = Error;

    fn try_from(r: DomainRepr) -> Result<Self> {
        if r.min.len() != r.dim {
            return Err(Error::Dimension { expected: r.dim, got: r.min.len() });
        }
        GridDomain::new(r.min, r.max, r.shape)
    }
}

impl From<GridDomain> for DomainRepr {
    fn from(d: GridDomain) -> Self {
        DomainRepr { dim: d.dim(), min: d.mins, max: d.maxs, shape: d.shape }
    }
}

impl GridDomain {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let n = mins.len();
        if n == 0 {
            return domain("grid dimension must be positive");
        }
        if maxs.len() != n {
            return Err(Error::Dimension { expected: n, got: maxs.len() });
        }
        if shape.len() != n {
            return Err(Error::Dimension { expected: n, got: shape.len() });
        }
        let mut spacing = Vec::with_capacity(n);
        for i in 0..n {
            if !(mins[i].is_finite() && maxs[i].is_finite()) || maxs[i] <= mins[i] {
                return domain(format!("axis {i}: need finite min < max"));
            }
            if shape[i] < 2 {
                return domain(format!("axis {i}: need at least 2 points"));
            }
            let h = (maxs[i] - mins[i]) / (shape[i] - 1) as f64;
            if !(h.is_finite() && h > 0.0) {
                return domain(format!("axis {i}: degenerate spacing"));
            }
            spacing.push(h);
        }
        let mut strides = vec![1usize; n];
        for i in (0..n - 1).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        let len = shape.iter().product();
        Ok(Self { mins, maxs, shape, spacing, strides, len })
    }

    /// One-dimensional grid with `points` nodes on `[lo, hi]`.
    pub fn line(lo: f64, hi: f64, points: usize) -> Result<Self> {
        Self::new(vec![lo], vec![hi], vec![points])
    }

    /// Cube `[lo, hi]^dim` with `points` nodes per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, points: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], vec![points; dim])
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }
    pub fn mins(&self) -> &[f64] {
        &self.mins
    }
    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }
    /// Volume of one grid cell, `prod h[i]`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Coordinate of node `k` along `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        // Last node is pinned to `max` so both box faces are represented exactly.
        if k + 1 == self.shape[axis] {
            self.maxs[axis]
        } else {
            self.mins[axis] + k as f64 * self.spacing[axis]
        }
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.shape[axis]).map(|k| self.coord(axis, k)).collect()
    }

    pub fn linearize(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for (i, s) in self.strides.iter().enumerate() {
            idx[i] = lin / s;
            lin %= s;
        }
        idx
    }

    /// Coordinates of the node with linear index `lin`.
    pub fn node(&self, lin: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node_into(lin, &mut out);
        out
    }

    pub fn node_into(&self, mut lin: usize, out: &mut [f64]) {
        for (axis, s) in self.strides.iter().enumerate() {
            out[axis] = self.coord(axis, lin / s);
            lin %= s;
        }
    }

    pub fn node_of_index(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(a, &k)| self.coord(a, k)).collect()
    }

    /// All node coordinates, flattened row-major (`len * dim` values).
    pub fn nodes_flat(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; self.len * n];
        for (lin, chunk) in out.chunks_mut(n).enumerate() {
            self.node_into(lin, chunk);
        }
        out
    }

    /// Linear index of the node nearest to `x` (coordinates clamped to the box).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = (0..self.dim())
            .map(|a| {
                let t = ((x[a] - self.mins[a]) / self.spacing[a]).round();
                t.clamp(0.0, (self.shape[a] - 1) as f64) as usize
            })
            .collect();
        self.linearize(&idx)
    }

    /// Linear index of a node whose coordinates match `x` to within a
    /// thousandth of a cell, if any.
    pub fn exact_node(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let lin = self.nearest_node(x);
        let node = self.node(lin);
        let close = node
            .iter()
            .zip(x)
            .zip(&self.spacing)
            .all(|((a, b), h)| (a - b).abs() <= 1e-3 * h);
        close.then_some(lin)
    }

    /// Whether every axis index of `lin` is strictly inside `1..shape-1`.
    pub fn is_interior(&self, lin: usize) -> bool {
        self.unravel(lin)
            .iter()
            .zip(&self.shape)
            .all(|(&k, &s)| k > 0 && k + 1 < s)
    }

    /// Neighbour of `lin` shifted by `step` along `axis`, if it stays on the grid.
    pub fn shifted(&self, lin: usize, axis: usize, step: isize) -> Option<usize> {
        let k = (lin / self.strides[axis]) % self.shape[axis];
        let t = k as isize + step;
        if t < 0 || t >= self.shape[axis] as isize {
            None
        } else {
            Some((lin as isize + step * self.strides[axis] as isize) as usize)
        }
    }

    /// Euclidean distance from `x` to the boundary of the box.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|a| (x[a] - self.mins[a]).min(self.maxs[a] - x[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }
}

/// A function sampled at every node of a [`GridDomain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FunctionRepr", into = "FunctionRepr")]
pub struct GridFunction {
    domain: GridDomain,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FunctionRepr {
    dim: usize,
    min: Vec<f64>,
    max: Vec<f64>,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<FunctionRepr> for GridFunction {
    type Error = Error;

    fn try_from(r: FunctionRepr) -> Result<Self> {
        let domain = GridDomain::try_from(DomainRepr { dim: r.dim, min: r.min, max: r.max, shape: r.shape })?;
        GridFunction::new(domain, r.values)
    }
}

impl From<GridFunction> for FunctionRepr {
    fn from(f: GridFunction) -> Self {
        let d: DomainRepr = f.domain.into();
        FunctionRepr { dim: d.dim, min: d.min, max: d.max, shape: d.shape, values: f.values }
    }
}

impl GridFunction {
    pub fn new(domain: GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::Dimension { expected: domain.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { domain, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(domain: &GridDomain, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; domain.dim()];
        let values = (0..domain.len())
            .map(|i| {
                domain.node_into(i, &mut x);
                f(&x)
            })
            .collect();
        Self::new(domain.clone(), values)
    }

    pub fn constant(domain: &GridDomain, c: f64) -> Result<Self> {
        Self::new(domain.clone(), vec![c; domain.len()])
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    #[inline]
    pub fn at(&self, lin: usize) -> f64 {
        self.values[lin]
    }

    /// Value at the node whose coordinates equal `x`.
    pub fn value_at_point(&self, x: &[f64]) -> Result<f64> {
        self.domain.check_point(x)?;
        match self.domain.exact_node(x) {
            Some(i) => Ok(self.values[i]),
            None => domain(format!("{x:?} is not a grid node")),
        }
    }

    /// `max |values|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise map, keeping the domain.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.domain.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination with another function on the same grid.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.domain != other.domain {
            return domain("functions live on different grids");
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.domain.clone(), values)
    }

    /// Adds `g(node)` at every node.
    pub fn add_fn(&self, g: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; self.domain.dim()];
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                self.domain.node_into(i, &mut x);
                v + g(&x)
            })
            .collect();
        Self::new(self.domain.clone(), values)
    }
}

/// Geometric description attached to a region, used for boundary distances.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionShape {
    /// The whole grid box.
    Full,
    /// Closed Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// An arbitrary node set; boundary distance is measured to the nearest
    /// grid node outside the set or to the box, whichever is closer.
    Nodes,
}

/// Sorted, duplicate-free set of linear node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexRegion {
    domain: GridDomain,
    members: Vec<usize>,
    shape: RegionShape,
}

impl IndexRegion {
    pub fn new(domain: &GridDomain, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if let Some(&last) = members.last() {
            if last >= domain.len() {
                return crate::error::domain(format!("index {last} out of range"));
            }
        }
        Ok(Self { domain: domain.clone(), members, shape: RegionShape::Nodes })
    }

    pub fn full(domain: &GridDomain) -> Self {
        Self { domain: domain.clone(), members: (0..domain.len()).collect(), shape: RegionShape::Full }
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }
    pub fn members(&self) -> &[usize] {
        &self.members
    }
    pub fn shape(&self) -> &RegionShape {
        &self.shape
    }
    pub fn len(&self) -> usize {
        self.members.len()
    }
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
    pub fn contains(&self, lin: usize) -> bool {
        self.members.binary_search(&lin).is_ok()
    }

    /// Members satisfying `keep`; the result is a plain node set.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self {
            domain: self.domain.clone(),
            members: self.members.iter().copied().filter(|&i| keep(i)).collect(),
            shape: RegionShape::Nodes,
        }
    }

    pub fn intersect(&self, other: &IndexRegion) -> Self {
        self.filter(|i| other.contains(i))
    }

    /// Distance from `x` to the boundary of the set this region stands for.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        let d = &self.domain;
        match &self.shape {
            RegionShape::Full => d.boundary_distance(x),
            RegionShape::Ball { center, radius } => radius - dist(x, center),
            RegionShape::Nodes => {
                let mut best = d.boundary_distance(x);
                let mut y = vec![0.0; d.dim()];
                for i in 0..d.len() {
                    if !self.contains(i) {
                        d.node_into(i, &mut y);
                        best = best.min(dist(x, &y));
                    }
                }
                best
            }
        }
    }
}

/// `c + |node - v|^2 / (2r)` at every node.
pub fn sample_quadratic(domain: &GridDomain, c: f64, v: &[f64], r: f64) -> Result<GridFunction> {
    if !(r > 0.0 && r.is_finite()) {
        return self::domain("radius must be positive");
    }
    domain.check_point(v)?;
    GridFunction::from_fn(domain, |x| c + dist2(x, v) / (2.0 * r))
}

/// `max - min` of `u` over the region.
pub fn oscillation(u: &GridFunction, region: &IndexRegion) -> Result<f64> {
    if region.is_empty() {
        return domain("oscillation over an empty region");
    }
    let (lo, hi) = region
        .members()
        .iter()
        .map(|&i| u.at(i))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(hi - lo)
}

/// All nodes in the closed ball `|node - center| <= rho`.
pub fn region_ball(domain: &GridDomain, center: &[f64], rho: f64) -> Result<IndexRegion> {
    domain.check_point(center)?;
    if !(rho >= 0.0) {
        return self::domain("ball radius must be non-negative");
    }
    let mut x = vec![0.0; domain.dim()];
    // Relative slack so that nodes on the sphere survive coordinate rounding.
    let limit = rho * rho * (1.0 + 4.0 * f64::EPSILON) + 1e-300;
    let members = (0..domain.len())
        .filter(|&i| {
            domain.node_into(i, &mut x);
            dist2(&x, center) <= limit
        })
        .collect();
    Ok(IndexRegion {
        domain: domain.clone(),
        members,
        shape: RegionShape::Ball { center: center.to_vec(), radius: rho },
    })
}

/// Node count times cell volume.
///
/// Estimates the measure of the union of cells centred at the member nodes.
/// The bias is of order `h` times the perimeter of the region.
pub fn cell_measure(region: &IndexRegion) -> f64 {
    region.len() as f64 * region.domain().cell_volume()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
