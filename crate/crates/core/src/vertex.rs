//! Paraboloids of a fixed radius, the vertex map and its contraction.
//!
//! A radius-`r` paraboloid `c + |y - v|^2 / (2r)` touching `u` from above at
//! `x` with slope `p` has vertex `v = x - r p`. On convex functions this
//! vertex map is 1-Lipschitz; the slab and tangent helpers below are the
//! two-paraboloid geometry behind that fact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{global_contact_set, radius_contact};
use crate::convex::is_convex_on;
use crate::error::{domain, Error, Result};
use crate::grid::{dist, dist2, dot, norm, oscillation, region_ball, GridFunction, IndexRegion, RegionShape};
use crate::matrix::SymMatrix;

/// `c + |y - v|^2 / (2r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paraboloid {
    pub v: Vec<f64>,
    pub c: f64,
    pub r: f64,
}

impl Paraboloid {
    pub fn new(v: Vec<f64>, c: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return domain("paraboloid radius must be positive");
        }
        if !c.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(0));
        }
        Ok(Self { v, c, r })
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.c + dist2(y, &self.v) / (2.0 * self.r)
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.v).map(|(a, b)| (a - b) / self.r).collect()
    }

    /// `min_y (P(y) - alpha - <g, y>)`, attained at `y = v + r g`.
    pub fn min_minus_affine(&self, alpha: f64, g: &[f64]) -> f64 {
        self.c - alpha - dot(g, &self.v) - 0.5 * self.r * dot(g, g)
    }
}

/// `{ y : lo < <e, y> < hi }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub e: Vec<f64>,
    pub m: f64,
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
}

impl Slab {
    pub fn contains(&self, y: &[f64]) -> bool {
        let t = dot(&self.e, y);
        self.lo < t && t < self.hi
    }
}

fn same_radius(p1: &Paraboloid, p2: &Paraboloid) -> Result<f64> {
    if p1.v.len() != p2.v.len() {
        return Err(Error::Dimension { expected: p1.v.len(), got: p2.v.len() });
    }
    if p1.r != p2.r {
        return domain("paraboloids must share one radius");
    }
    Ok(p1.r)
}

/// Slab between the caps of two equal-radius paraboloids: `e` points from
/// `v1` to `v2`, `m` is the height slope along `e`, and the walls pass
/// through `v_i + r m e`.
pub fn slab_of_paraboloids(p1: &Paraboloid, p2: &Paraboloid) -> Result<Slab> {
    let r = same_radius(p1, p2)?;
    let d: Vec<f64> = p2.v.iter().zip(&p1.v).map(|(a, b)| a - b).collect();
    let len = norm(&d);
    if len == 0.0 {
        return domain("paraboloid vertices coincide");
    }
    let e: Vec<f64> = d.iter().map(|x| x / len).collect();
    let m = (p2.c - p1.c) / len;
    let lo = dot(&e, &p1.v) + r * m;
    let hi = dot(&e, &p2.v) + r * m;
    Ok(Slab { e, m, lo, hi, width: len })
}

/// Points of common tangency and the shared plane's normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonTangent {
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub normal: Vec<f64>,
    /// `min (P_i - plane)` for each paraboloid; both vanish in exact arithmetic.
    pub defects: [f64; 2],
}

/// Tangent plane touching both graphs at `v_i + r m e + w_bar`, `w_bar ⊥ e`.
pub fn common_tangent(p1: &Paraboloid, p2: &Paraboloid, w_bar: &[f64]) -> Result<CommonTangent> {
    let slab = slab_of_paraboloids(p1, p2)?;
    let r = p1.r;
    if w_bar.len() != p1.v.len() {
        return Err(Error::Dimension { expected: p1.v.len(), got: w_bar.len() });
    }
    if dot(w_bar, &slab.e).abs() > 1e-12 * (1.0 + norm(w_bar)) {
        return domain("w_bar must be orthogonal to e");
    }
    let shift: Vec<f64> = slab.e.iter().zip(w_bar).map(|(e, w)| r * slab.m * e + w).collect();
    let y1: Vec<f64> = p1.v.iter().zip(&shift).map(|(a, b)| a + b).collect();
    let y2: Vec<f64> = p2.v.iter().zip(&shift).map(|(a, b)| a + b).collect();
    let g: Vec<f64> = shift.iter().map(|s| s / r).collect();
    let h1 = p1.value(&y1);
    let alpha = h1 - dot(&g, &y1);
    let defects = [p1.min_minus_affine(alpha, &g), p2.min_minus_affine(alpha, &g)];
    let mut z1 = y1;
    z1.push(h1);
    let mut z2 = y2.clone();
    z2.push(p2.value(&y2));
    let mut normal = g;
    normal.push(-1.0);
    Ok(CommonTangent { z1, z2, normal, defects })
}

/// `min (P2 - T)` where `T` is the tangent plane of `P1` at `y`.
pub fn tangent_defect(p1: &Paraboloid, p2: &Paraboloid, y: &[f64]) -> Result<f64> {
    same_radius(p1, p2)?;
    p1.v.len().eq(&y.len()).then_some(()).ok_or(Error::Dimension { expected: p1.v.len(), got: y.len() })?;
    let g = p1.gradient(y);
    let alpha = p1.value(y) - dot(&g, y);
    Ok(p2.min_minus_affine(alpha, &g))
}

/// Whether the tangent plane of `P1` at `y` lies below both graphs.
pub fn tangent_supports_both(p1: &Paraboloid, p2: &Paraboloid, y: &[f64]) -> Result<bool> {
    let scale = 1.0 + p1.c.abs().max(p2.c.abs());
    Ok(tangent_defect(p1, p2, y)? >= -1e-9 * scale)
}

#[inline]
pub fn vertex_of_jet(x: &[f64], p: &[f64], r: f64) -> Vec<f64> {
    x.iter().zip(p).map(|(a, b)| a - r * b).collect()
}

/// Contact node `x` and its vertex `v = x - r p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexPair {
    pub node: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

/// Whether `v` lies where the region has grid coverage: inside the ball or
/// box, or within half a cell of a member node.
fn region_covers(region: &IndexRegion, v: &[f64]) -> bool {
    let d = region.domain();
    match region.shape() {
        RegionShape::Full => (0..d.dim()).all(|a| d.mins()[a] <= v[a] && v[a] <= d.maxs()[a]),
        RegionShape::Ball { center, radius } => dist(center, v) <= *radius,
        RegionShape::Nodes => {
            let i = d.nearest_node(v);
            let node = d.node(i);
            region.contains(i) && (0..d.dim()).all(|a| (node[a] - v[a]).abs() <= 0.5 * d.spacing()[a])
        }
    }
}

/// Vertices of the radius-`r` contact set of a convex `u` on `region`.
///
/// Every pair whose vertex lies over the region satisfies
/// `|v - x|^2 <= 2 r (Osc + 2 tol scale) + n h^2 / 4`; the last term accounts
/// for the vertex falling between nodes. A violation is a consistency error.
pub fn vertex_map(u: &GridFunction, region: &IndexRegion, r: f64, tol: f64) -> Result<Vec<VertexPair>> {
    if !(r > 0.0) {
        return domain("radius must be positive");
    }
    if !is_convex_on(u, region, 1e-9)? {
        return domain("vertex map needs a convex function");
    }
    let d = u.domain();
    let n = d.dim();
    let c = global_contact_set(u, region, &SymMatrix::scaled_identity(n, 1.0 / r), tol)?;
    let osc = oscillation(u, region)?;
    let scale = 1.0 + region.members().iter().fold(0.0f64, |m, &i| m.max(u.at(i).abs()));
    let h = d.max_spacing();
    let bound2 = 2.0 * r * (osc + 2.0 * tol * scale) + n as f64 * h * h / 4.0;
    let mut out = Vec::with_capacity(c.len());
    for (&i, p) in c.members.members().iter().zip(c.witnesses()) {
        let x = d.node(i);
        let v = vertex_of_jet(&x, p, r);
        if region_covers(region, &v) && dist2(&x, &v) > bound2 * (1.0 + 1e-12) {
            return Err(Error::Consistency(format!("vertex of node {i} is too far from its contact point")));
        }
        out.push(VertexPair { node: i, x, v });
    }
    Ok(out)
}

/// `max (|v2 - v1| - |x2 - x1|)` over unordered pairs.
pub fn contraction_defect(pairs: &[VertexPair]) -> Result<f64> {
    if pairs.len() < 2 {
        return domain("contraction defect needs at least two pairs");
    }
    if pairs[0].x.len() == 1 {
        return Ok(contraction_defect_1d(pairs));
    }
    Ok((0..pairs.len())
        .into_par_iter()
        .map(|i| {
            let a = &pairs[i];
            pairs[i + 1..].iter().fold(f64::NEG_INFINITY, |m, b| m.max(dist(&a.v, &b.v) - dist(&a.x, &b.x)))
        })
        .reduce(|| f64::NEG_INFINITY, f64::max))
}

/// Linear-time version for the line: with pairs sorted by `x`,
/// `|v_j - v_i| - (x_j - x_i)` is the larger of `(±v_j - x_j) - (±v_i - x_i)`,
/// so running minima of `±v - x` suffice.
fn contraction_defect_1d(pairs: &[VertexPair]) -> f64 {
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.sort_by(|&a, &b| pairs[a].x[0].total_cmp(&pairs[b].x[0]));
    let mut best = f64::NEG_INFINITY;
    let (mut min_plus, mut min_minus) = (f64::INFINITY, f64::INFINITY);
    for &k in &idx {
        let (x, v) = (pairs[k].x[0], pairs[k].v[0]);
        let (plus, minus) = (v - x, -v - x);
        best = best.max(plus - min_plus).max(minus - min_minus);
        min_plus = min_plus.min(plus);
        min_minus = min_minus.min(minus);
    }
    best
}

/// Outcome of the ball-coverage test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Radius `rho (1 - sqrt(r / R))` of the ball that should be covered.
    pub target_radius: f64,
    pub probes: Vec<usize>,
    pub attained: Vec<usize>,
    pub failures: Vec<usize>,
    pub contact_count: usize,
}

/// Checks `0 <= u(y) - u(x0) < |y - x0|^2 / (2R)` at the nodes of `B_rho(x0)`,
/// strictly off `x0` with margin `tol |y - x0|^2`.
pub fn check_normalized_bound(u: &GridFunction, x0: &[f64], rho: f64, big_r: f64, tol: f64) -> Result<()> {
    let d = u.domain();
    let Some(c) = d.exact_node(x0) else {
        return domain(format!("{x0:?} is not a grid node"));
    };
    let base = u.at(c);
    let slack = tol * (1.0 + u.sup_norm());
    let ball = region_ball(d, x0, rho)?;
    let mut y = vec![0.0; d.dim()];
    for &i in ball.members() {
        d.node_into(i, &mut y);
        let val = u.at(i) - base;
        let r2 = dist2(&y, x0);
        let upper_ok = i == c || val < r2 / (2.0 * big_r) - tol * r2;
        if val < -slack || !upper_ok {
            return domain(format!("normalized growth bound fails at node {i}"));
        }
    }
    Ok(())
}

/// Probes the grid nodes of `B(x0, rho (1 - sqrt(r / R)) - tol)` as vertices.
///
/// A probe `v` counts as attained when the lowest radius-`r` paraboloid with
/// vertex `v` above `u` on `B_rho(x0)` touches at a contact point `x` strictly
/// inside the ball whose own vertex lies within half a cell of `v` in every
/// coordinate.
pub fn coverage_check(u: &GridFunction, x0: &[f64], rho: f64, r: f64, big_r: f64, tol: f64) -> Result<CoverageReport> {
    if !(rho > 0.0 && r > 0.0 && big_r >= r) {
        return domain("need rho > 0 and 0 < r <= R");
    }
    check_normalized_bound(u, x0, rho, big_r, tol)?;
    let d = u.domain();
    let n = d.dim();
    let ball = region_ball(d, x0, rho)?;
    if !is_convex_on(u, &ball, 1e-9)? {
        return domain("coverage needs a convex function");
    }
    let contacts = global_contact_set(u, &ball, &SymMatrix::scaled_identity(n, 1.0 / r), tol)?;
    let target_radius = rho * (1.0 - (r / big_r).sqrt());
    let probe_ball = region_ball(d, x0, (target_radius - tol).max(0.0))?;
    let mut probes = probe_ball.members().to_vec();
    if probes.is_empty() {
        // vacuous case: the centre is still a probe
        probes.push(d.exact_node(x0).unwrap_or_else(|| d.nearest_node(x0)));
    }

    let half: Vec<f64> = d.spacing().iter().map(|h| 0.5 * h * (1.0 + 1e-9)).collect();
    let results: Vec<Result<bool>> = probes
        .par_iter()
        .map(|&j| {
            let v = d.node(j);
            let rc = radius_contact(u, &ball, &v, r)?;
            Ok(rc.contacts.members().iter().any(|&i| {
                let x = d.node(i);
                if dist(&x, x0) >= rho {
                    return false;
                }
                let Some(p) = contacts.witness(i) else { return false };
                let vx = vertex_of_jet(&x, p, r);
                (0..n).all(|a| (vx[a] - v[a]).abs() <= half[a])
            }))
        })
        .collect();
    let mut attained = Vec::new();
    let mut failures = Vec::new();
    for (&j, ok) in probes.iter().zip(results) {
        if ok? {
            attained.push(j);
        } else {
            failures.push(j);
        }
    }
    Ok(CoverageReport { target_radius, probes, attained, failures, contact_count: contacts.len() })
}

/// `|B_1|` in `n` dimensions.
pub fn unit_ball_volume(n: usize) -> f64 {
    // omega_n = pi^(n/2) / Gamma(n/2 + 1), by the two-step recursion
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

/// The three measures `|B_target| <= |attained vertices| <= |contact set|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureChain {
    pub lhs: f64,
    pub mid: f64,
    pub rhs: f64,
    /// `4 h`, the allowed shortfall at each inequality.
    pub slack: f64,
    pub coverage: CoverageReport,
}

impl MeasureChain {
    /// Largest shortfall `max(lhs - mid, mid - rhs, 0)`.
    pub fn shortfall(&self) -> f64 {
        (self.lhs - self.mid).max(self.mid - self.rhs).max(0.0)
    }
    pub fn holds(&self) -> bool {
        self.shortfall() <= self.slack
    }
}

pub fn measure_chain(u: &GridFunction, x0: &[f64], rho: f64, r: f64, big_r: f64, tol: f64) -> Result<MeasureChain> {
    let coverage = coverage_check(u, x0, rho, r, big_r, tol)?;
    let d = u.domain();
    let cell = d.cell_volume();
    let lhs = unit_ball_volume(d.dim()) * coverage.target_radius.powi(d.dim() as i32);
    let mid = coverage.attained.len() as f64 * cell;
    let rhs = coverage.contact_count as f64 * cell;
    Ok(MeasureChain { lhs, mid, rhs, slack: 4.0 * d.max_spacing(), coverage })
}
