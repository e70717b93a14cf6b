//! Upper contact jets and global contact sets.
//!
//! A node `x` is a global upper contact point of type `A` on a region `X` when
//! some `p` makes `u(y) <= u(x) + <p, y - x> + <A(y - x), y - x> / 2` hold for
//! every `y` in `X`. Subtracting `q_A(y) = <Ay, y> / 2` turns this into a
//! supporting hyperplane condition for `w = q_A - u`, so the contact set is
//! the set where `w` touches its convex envelope on `X`, and a supporting
//! slope `s` of that envelope gives the witness `p = A x - s`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{dist2, oscillation, region_ball, GridFunction, IndexRegion};
use crate::legendre::region_envelope;
use crate::matrix::SymMatrix;
use crate::stencil::{numerical_gradient, numerical_hessian};

/// Second-order jet `(value, p, A)` based at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub x: Vec<f64>,
    pub value: f64,
    pub p: Vec<f64>,
    #[serde(rename = "A")]
    pub a: SymMatrix,
}

impl Jet {
    pub fn new(x: Vec<f64>, value: f64, p: Vec<f64>, a: SymMatrix) -> Result<Self> {
        let n = x.len();
        if p.len() != n {
            return Err(Error::Dimension { expected: n, got: p.len() });
        }
        if a.dim() != n {
            return Err(Error::Dimension { expected: n, got: a.dim() });
        }
        if !value.is_finite() {
            return Err(Error::NonFinite(0));
        }
        if let Some(i) = x.iter().chain(&p).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { x, value, p, a })
    }

    /// Jet of `u` at the grid node `x`, taking the value from `u`.
    pub fn at_node(u: &GridFunction, x: &[f64], p: Vec<f64>, a: SymMatrix) -> Result<Self> {
        let v = u.value_at_point(x)?;
        Self::new(x.to_vec(), v, p, a)
    }

    /// `value + <p, y - x> + <A(y - x), y - x> / 2`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        let dy: Vec<f64> = y.iter().zip(&self.x).map(|(a, b)| a - b).collect();
        self.value + crate::grid::dot(&self.p, &dy) + 0.5 * self.a.quad_form(&dy)
    }

    /// Same jet with `A + eps I`.
    pub fn strictified(&self, eps: f64) -> Jet {
        Jet { a: self.a.add_scaled_identity(eps), ..self.clone() }
    }
}

/// Checks the upper contact inequality at every node of the closed ball of
/// radius `rho` about `jet.x`.
///
/// Non-strict mode allows slack `tol (1 + |u|)`. Strict mode asks for a margin
/// of `tol |y - x|^2` at every node `y != x`.
pub fn is_upper_contact_jet(u: &GridFunction, jet: &Jet, rho: f64, strict: bool, tol: f64) -> Result<bool> {
    if !(rho > 0.0) {
        return domain("contact radius must be positive");
    }
    let ball = region_ball(u.domain(), &jet.x, rho)?;
    if ball.is_empty() {
        return domain("no grid node within the contact radius");
    }
    let d = u.domain();
    let slack = tol * (1.0 + u.sup_norm());
    let mut y = vec![0.0; d.dim()];
    for &i in ball.members() {
        d.node_into(i, &mut y);
        let bound = jet.eval(&y);
        let r2 = dist2(&y, &jet.x);
        let ok = if strict && r2 > 0.0 { u.at(i) < bound - tol * r2 } else { u.at(i) <= bound + slack };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Global upper contact points of type `A` on a region, with witnesses.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSet {
    pub region: IndexRegion,
    pub members: IndexRegion,
    pub type_matrix: SymMatrix,
    witnesses: Vec<Vec<f64>>,
}

impl ContactSet {
    /// Witness `p` for a member node, if `lin` is a member.
    pub fn witness(&self, lin: usize) -> Option<&[f64]> {
        let k = self.members.members().binary_search(&lin).ok()?;
        Some(&self.witnesses[k])
    }

    /// Witnesses aligned with `members.members()`.
    pub fn witnesses(&self) -> &[Vec<f64>] {
        &self.witnesses
    }

    pub fn measure(&self) -> f64 {
        crate::grid::cell_measure(&self.members)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Contact set `C(u, region, A)`.
///
/// Members are the nodes where `w = q_A - u` restricted to the region lies
/// within `tol (1 + max_region |u|)` of its convex envelope. Each witness is
/// rechecked against the raw contact inequality on the whole region.
pub fn global_contact_set(u: &GridFunction, region: &IndexRegion, a: &SymMatrix, tol: f64) -> Result<ContactSet> {
    let d = u.domain();
    if region.domain() != d {
        return domain("region and function live on different grids");
    }
    if region.is_empty() {
        return domain("contact set over an empty region");
    }
    if a.dim() != d.dim() {
        return Err(Error::Dimension { expected: d.dim(), got: a.dim() });
    }
    let n = d.dim();
    let scale = 1.0 + region.members().iter().fold(0.0f64, |m, &i| m.max(u.at(i).abs()));
    let slack = tol * scale;

    let nodes = d.nodes_flat();
    let node = |i: usize| &nodes[i * n..(i + 1) * n];
    let mut w = vec![0.0; d.len()];
    for &i in region.members() {
        w[i] = 0.5 * a.quad_form(node(i)) - u.at(i);
    }
    let pref = (n > 1).then(|| region_slopes(&w, region));
    let env = region_envelope(&w, region, pref.as_deref())?;

    let mut members = Vec::new();
    let mut witnesses = Vec::new();
    for (k, &i) in region.members().iter().enumerate() {
        if env.values[k] >= w[i] - slack {
            let ax = a.apply(node(i));
            let p: Vec<f64> = ax.iter().zip(env.slope(k)).map(|(a, s)| a - s).collect();
            members.push(i);
            witnesses.push(p);
        }
    }

    // raw inequality over the region for every accepted witness
    let check = 2.0 * slack + 1e-12 * scale;
    let dense: Vec<f64> = (0..n * n).map(|k| a.get(k / n, k % n)).collect();
    let pts: Vec<f64> = region.members().iter().flat_map(|&j| node(j).iter().copied()).collect();
    let vals: Vec<f64> = region.members().iter().map(|&j| u.at(j)).collect();
    let bad = members.par_iter().zip(&witnesses).find_any(|(&i, p)| {
        let x = node(i);
        let ui = u.at(i) + check;
        if n == 1 {
            let (x, p, half_a) = (x[0], p[0], 0.5 * dense[0]);
            return pts.iter().zip(&vals).any(|(&y, &uj)| {
                let t = y - x;
                uj > ui + t * (p + half_a * t)
            });
        }
        let mut dy = vec![0.0; n];
        pts.chunks_exact(n).zip(&vals).any(|(y, &uj)| {
            let mut lin = 0.0;
            for k in 0..n {
                dy[k] = y[k] - x[k];
                lin += p[k] * dy[k];
            }
            let mut quad = 0.0;
            for r in 0..n {
                let row = &dense[r * n..(r + 1) * n];
                quad += dy[r] * row.iter().zip(&dy).map(|(m, t)| m * t).sum::<f64>();
            }
            uj > ui + lin + 0.5 * quad
        })
    });
    if let Some((&i, _)) = bad {
        return Err(Error::Consistency(format!("contact witness at node {i} fails the contact inequality")));
    }

    Ok(ContactSet {
        region: region.clone(),
        members: region.filter(|i| members.binary_search(&i).is_ok()),
        type_matrix: a.clone(),
        witnesses,
    })
}

/// Centred differences of `w` inside the region, one-sided where a
/// neighbour is missing; indexed by node.
fn region_slopes(w: &[f64], region: &IndexRegion) -> Vec<f64> {
    let d = region.domain();
    let n = d.dim();
    let mut out = vec![0.0; d.len() * n];
    for &i in region.members() {
        for a in 0..n {
            let h = d.spacing()[a];
            let nb = |s: isize| d.shifted(i, a, s).filter(|&j| region.contains(j));
            out[i * n + a] = match (nb(-1), nb(1)) {
                (Some(l), Some(r)) => (w[r] - w[l]) / (2.0 * h),
                (None, Some(r)) => (w[r] - w[i]) / h,
                (Some(l), None) => (w[i] - w[l]) / h,
                (None, None) => 0.0,
            };
        }
    }
    out
}

/// Relative tolerance for ties in the paraboloid contact search.
pub const RADIUS_CONTACT_TOL: f64 = 1e-12;

/// Lowest paraboloid `c + |y - v|^2 / (2r)` above `u` on the region and the
/// nodes where it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusContact {
    pub c_hat: f64,
    pub contacts: IndexRegion,
}

pub fn radius_contact(u: &GridFunction, region: &IndexRegion, v: &[f64], r: f64) -> Result<RadiusContact> {
    let d = u.domain();
    d.check_point(v)?;
    if !(r > 0.0) {
        return domain("radius must be positive");
    }
    if region.is_empty() {
        return domain("contact search over an empty region");
    }
    let mut y = vec![0.0; d.dim()];
    let vals: Vec<(usize, f64)> = region
        .members()
        .iter()
        .map(|&i| {
            d.node_into(i, &mut y);
            (i, u.at(i) - dist2(&y, v) / (2.0 * r))
        })
        .collect();
    let c_hat = vals.iter().fold(f64::NEG_INFINITY, |m, &(_, s)| m.max(s));
    let scale = 1.0 + region.members().iter().fold(0.0f64, |m, &i| m.max(u.at(i).abs())) + c_hat.abs();
    let cut = c_hat - RADIUS_CONTACT_TOL * scale;
    let hits: Vec<usize> = vals.iter().filter(|&&(_, s)| s >= cut).map(|&(i, _)| i).collect();
    Ok(RadiusContact { c_hat, contacts: region.filter(|i| hits.binary_search(&i).is_ok()) })
}

/// `sqrt(2 r Osc_region(u))`, the largest distance from a vertex to its
/// contact points.
pub fn contact_distance_bound(u: &GridFunction, region: &IndexRegion, r: f64) -> Result<f64> {
    Ok((2.0 * r * oscillation(u, region)?).sqrt())
}

/// Members farther than `sqrt(2 r Osc)` from the boundary of the region.
pub fn interior_contact_region(u: &GridFunction, region: &IndexRegion, r: f64) -> Result<IndexRegion> {
    if !(r > 0.0) {
        return domain("radius must be positive");
    }
    let delta = contact_distance_bound(u, region, r)?;
    let d = u.domain();
    Ok(region.filter(|i| region.boundary_distance(&d.node(i)) > delta))
}

/// `w + (lambda / 2) |y - x|^2`.
pub fn jensen_to_slodkowski(w: &GridFunction, x: &[f64], lambda: f64) -> Result<GridFunction> {
    w.domain().check_point(x)?;
    if !(lambda >= 0.0) {
        return domain("lambda must be non-negative");
    }
    w.add_fn(|y| 0.5 * lambda * dist2(y, x))
}

/// One step of the jet approximation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetSample {
    pub x: Vec<f64>,
    pub node: usize,
    pub p: Vec<f64>,
    #[serde(rename = "A")]
    pub a: SymMatrix,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JetApproximation {
    pub samples: Vec<JetSample>,
    /// Set when a ball in the schedule held too few usable nodes.
    pub resolution_exhausted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetApproxOptions {
    /// Radius on which `jet0` is checked as an upper contact jet.
    pub rho0: f64,
    pub tol: f64,
}

impl Default for JetApproxOptions {
    fn default() -> Self {
        Self { rho0: 0.5, tol: 1e-9 }
    }
}

/// `eps0, eps0/2, eps0/4, ...` down to `min_eps`.
pub fn default_eps_schedule(eps0: f64, min_eps: f64) -> Vec<f64> {
    std::iter::successors(Some(eps0), |e| Some(e / 2.0)).take_while(|&e| e >= min_eps && e > 0.0).collect()
}

/// For each `eps` in the schedule, picks the contact point of type
/// `A0 + eps I` on `B_eps(x0) ∩ E` closest to `x0` and reports the
/// finite-difference gradient and Hessian there.
pub fn jet_approximation(
    u: &GridFunction,
    jet0: &Jet,
    e: &IndexRegion,
    eps_schedule: &[f64],
    lambda: f64,
    opts: JetApproxOptions,
) -> Result<JetApproximation> {
    let d = u.domain();
    if !(lambda >= 0.0) {
        return domain("lambda must be non-negative");
    }
    if eps_schedule.windows(2).any(|w| w[1] >= w[0]) || eps_schedule.iter().any(|&x| !(x > 0.0)) {
        return domain("eps schedule must be positive and decreasing");
    }
    if e.members().iter().any(|&i| !d.is_interior(i)) {
        return domain("E must contain interior nodes only");
    }
    if !is_upper_contact_jet(u, jet0, opts.rho0, false, opts.tol)? {
        return domain("jet0 is not an upper contact jet");
    }

    let mut samples = Vec::new();
    for &eps in eps_schedule {
        let ball = region_ball(d, &jet0.x, eps)?.intersect(e);
        if ball.len() < 3 {
            return Ok(JetApproximation { samples, resolution_exhausted: true });
        }
        let c = global_contact_set(u, &ball, &jet0.strictified(eps).a, opts.tol)?;
        let pick = c
            .members
            .members()
            .iter()
            .map(|&i| (dist2(&d.node(i), &jet0.x), i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((_, i)) = pick else {
            return Ok(JetApproximation { samples, resolution_exhausted: true });
        };
        let (Some(p), Some(a)) = (numerical_gradient(u, i), numerical_hessian(u, i)) else {
            return Err(Error::Consistency(format!("finite differences undefined at node {i}")));
        };
        samples.push(JetSample { x: d.node(i), node: i, p, a, eps });
    }
    Ok(JetApproximation { samples, resolution_exhausted: false })
}
