//! Proximal map, the inverse gradient `G`, the potential `g`, and
//! second-derivative statistics.
//!
//! With `f = r u + |x|^2 / 2` and `u` convex, `∂f = I + r ∂u` is expansive and
//! its inverse `G` is single valued and 1-Lipschitz. On the grid `G(y)` is the
//! minimiser of `r u(z) + |z - y|^2 / 2`, and `g = f*` has gradient `G`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::contains_at;
use crate::error::{domain, Error, Result};
use crate::grid::{dist, dist2, dot, GridFunction};
use crate::legendre::{conjugate, DualGrid};
use crate::matrix::SymMatrix;
use crate::stencil::{numerical_gradient, numerical_hessian as hessian_stencil};

/// Largest condition number of `DG` accepted as a regular value.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxResult {
    pub y: Vec<f64>,
    pub node: usize,
    pub x: Vec<f64>,
    /// `(y - x) / r`.
    pub p: Vec<f64>,
    pub objective: f64,
}

/// Grid minimiser of `r u(z) + |z - y|^2 / 2`; ties go to the smaller index.
pub fn prox(u: &GridFunction, y: &[f64], r: f64) -> Result<ProxResult> {
    let d = u.domain();
    d.check_point(y)?;
    if !(r > 0.0) {
        return domain("prox radius must be positive");
    }
    let mut z = vec![0.0; d.dim()];
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..d.len() {
        d.node_into(i, &mut z);
        let obj = r * u.at(i) + 0.5 * dist2(&z, y);
        if obj < best.0 {
            best = (obj, i);
        }
    }
    let x = d.node(best.1);
    let p = y.iter().zip(&x).map(|(a, b)| (a - b) / r).collect();
    Ok(ProxResult { y: y.to_vec(), node: best.1, x, p, objective: best.0 })
}

/// `G(y) = prox(u, y, r).x` at every dual node, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientInverse {
    pub dual: DualGrid,
    pub r: f64,
    points: Vec<f64>,
    nodes: Vec<usize>,
}

impl GradientInverse {
    pub fn at(&self, j: usize) -> &[f64] {
        let n = self.dual.dim();
        &self.points[j * n..(j + 1) * n]
    }
    pub fn node(&self, j: usize) -> usize {
        self.nodes[j]
    }

    /// `max (|G(y1) - G(y2)| - |y1 - y2|)` over all pairs of dual nodes.
    pub fn contraction_defect(&self) -> f64 {
        let m = self.dual.len();
        let ys = self.dual.nodes_flat();
        let n = self.dual.dim();
        (0..m)
            .into_par_iter()
            .map(|i| {
                let yi = &ys[i * n..(i + 1) * n];
                (i + 1..m).fold(f64::NEG_INFINITY, |acc, j| {
                    acc.max(dist(self.at(i), self.at(j)) - dist(yi, &ys[j * n..(j + 1) * n]))
                })
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
}

pub fn gradient_inverse_g(u: &GridFunction, r: f64, dual: &DualGrid) -> Result<GradientInverse> {
    if dual.dim() != u.domain().dim() {
        return Err(Error::Dimension { expected: u.domain().dim(), got: dual.dim() });
    }
    let results: Vec<Result<ProxResult>> = (0..dual.len()).into_par_iter().map(|j| prox(u, &dual.node(j), r)).collect();
    let mut points = Vec::with_capacity(dual.len() * dual.dim());
    let mut nodes = Vec::with_capacity(dual.len());
    for res in results {
        let pr = res?;
        points.extend(pr.x);
        nodes.push(pr.node);
    }
    Ok(GradientInverse { dual: dual.clone(), r, points, nodes })
}

/// Dual nodes farther than `2 sqrt(r |u|) + sqrt(n) h` from the boundary of
/// the primal box; their prox minimisers are interior nodes.
pub fn prox_inner_nodes(u: &GridFunction, r: f64, dual: &DualGrid) -> Vec<usize> {
    let d = u.domain();
    let delta = 2.0 * (r * u.sup_norm()).sqrt() + (d.dim() as f64).sqrt() * d.max_spacing();
    (0..dual.len()).filter(|&j| d.boundary_distance(&dual.node(j)) > delta).collect()
}

/// A pair `(x, y)` claimed to satisfy `y ∈ ∂f(x)`.
pub type GraphPoint = (Vec<f64>, Vec<f64>);

/// `max (|x1 - x2| - |y1 - y2|)` over pairs of validated graph points of `∂f`.
pub fn expansive_defect(f: &GridFunction, pairs: &[(GraphPoint, GraphPoint)], tol: f64) -> Result<f64> {
    if pairs.is_empty() {
        return domain("no pairs given");
    }
    let d = f.domain();
    let mut worst = f64::NEG_INFINITY;
    for (index, ((x1, y1), (x2, y2))) in pairs.iter().enumerate() {
        for (x, y) in [(x1, y1), (x2, y2)] {
            d.check_point(y)?;
            let Some(t) = d.exact_node(x) else {
                return Err(Error::InvalidPair { index });
            };
            if !contains_at(f, t, y, tol) {
                return Err(Error::InvalidPair { index });
            }
        }
        worst = worst.max(dist(x1, x2) - dist(y1, y2));
    }
    Ok(worst)
}

/// `f = r u + |x|^2 / 2` on the grid of `u`.
pub fn prox_potential(u: &GridFunction, r: f64) -> Result<GridFunction> {
    let scaled = u.map(|v| r * v)?;
    scaled.add_fn(|x| 0.5 * dot(x, x))
}

/// `g = f*` on the dual grid, computed by the same conjugation routine as
/// everywhere else.
pub fn legendre_potential(u: &GridFunction, r: f64, dual: &DualGrid) -> Result<GridFunction> {
    conjugate(&prox_potential(u, r)?, dual)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianSample {
    pub node: usize,
    pub x: Vec<f64>,
    #[serde(rename = "H")]
    pub h: SymMatrix,
    pub valid: bool,
    pub scale: f64,
}

/// Finite-difference Hessian; `valid` is false (and `h` zero) off the interior.
pub fn numerical_hessian(u: &GridFunction, lin: usize) -> HessianSample {
    let d = u.domain();
    let (h, valid) = match hessian_stencil(u, lin) {
        Some(m) => (m, true),
        None => (SymMatrix::zeros(d.dim()), false),
    };
    HessianSample { node: lin, x: d.node(lin), h, valid, scale: d.max_spacing() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlexandrovReport {
    /// Interior nodes, ascending.
    pub nodes: Vec<usize>,
    pub passed: Vec<bool>,
    pub fraction: f64,
}

/// Index offsets whose physical length is at most `s`.
fn offsets_within(d: &crate::grid::GridDomain, s: f64) -> Vec<(Vec<isize>, Vec<f64>)> {
    let n = d.dim();
    let k: Vec<isize> = d.spacing().iter().map(|h| (s / h * (1.0 + 1e-12)).floor() as isize).collect();
    let mut out = Vec::new();
    let mut cur = k.iter().map(|x| -x).collect::<Vec<_>>();
    loop {
        let dx: Vec<f64> = (0..n).map(|a| cur[a] as f64 * d.spacing()[a]).collect();
        if dot(&dx, &dx) <= s * s * (1.0 + 1e-12) {
            out.push((cur.clone(), dx));
        }
        let mut a = n;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            if cur[a] < k[a] {
                cur[a] += 1;
                break;
            }
            cur[a] = -k[a];
        }
    }
}

/// Fraction of interior nodes where `u` looks twice differentiable.
///
/// A node passes when its finite-difference Hessian `H` has eigenvalues at
/// least `-lambda - taylor_tol` and, for each radius `s`, the second-order
/// Taylor remainder built from the centred gradient and `H` stays below
/// `taylor_tol s^2` on all nodes within distance `s`.
pub fn alexandrov_statistic(u: &GridFunction, lambda: f64, taylor_tol: f64, radii: &[f64]) -> Result<AlexandrovReport> {
    if radii.is_empty() || radii.iter().any(|&s| !(s > 0.0)) {
        return domain("radii must be positive");
    }
    let d = u.domain();
    let nodes: Vec<usize> = (0..d.len()).filter(|&i| d.is_interior(i)).collect();
    let stencils: Vec<Vec<(Vec<isize>, Vec<f64>)>> = radii.iter().map(|&s| offsets_within(d, s)).collect();
    let passed: Vec<bool> = nodes
        .par_iter()
        .map(|&i| {
            let (Some(p), Some(h)) = (numerical_gradient(u, i), hessian_stencil(u, i)) else {
                return false;
            };
            if h.min_eigenvalue() < -lambda - taylor_tol {
                return false;
            }
            radii.iter().zip(&stencils).all(|(&s, offs)| {
                let worst = offs
                    .iter()
                    .filter_map(|(k, dx)| {
                        let mut j = i;
                        for (a, &ka) in k.iter().enumerate() {
                            j = d.shifted(j, a, ka)?;
                        }
                        Some((u.at(j) - u.at(i) - dot(&p, dx) - 0.5 * h.quad_form(dx)).abs())
                    })
                    .fold(0.0, f64::max);
                worst <= taylor_tol * s * s
            })
        })
        .collect();
    let fraction = if nodes.is_empty() { 0.0 } else { passed.iter().filter(|&&b| b).count() as f64 / nodes.len() as f64 };
    Ok(AlexandrovReport { nodes, passed, fraction })
}

/// Second derivative of `f` recovered by inverting the derivative of `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianViaG {
    pub x0: Vec<f64>,
    /// Symmetrised centred difference of `G` at `y0`.
    pub b: SymMatrix,
    /// `B^{-1}`.
    pub a: SymMatrix,
    /// Finite-difference Hessian of `f` at `x0`, when defined.
    pub f_hessian: Option<SymMatrix>,
    /// `(s, max_{|x - x0| <= s} |f(x) - f(x0) - <y0, x - x0> - <A(x - x0), x - x0> / 2|)`.
    pub remainders: Vec<(f64, f64)>,
}

/// `D^2 f` at `x0 = G(y0)` as the inverse of the difference quotient of `G`.
///
/// The quotient uses a step of `m` dual spacings, `m = max(1, ceil(2 h / k))`,
/// so it spans at least two primal cells. Returns `None` when the quotient's
/// condition number exceeds `MAX_CONDITION`.
pub fn hessian_via_g(u: &GridFunction, r: f64, dual: &DualGrid, y0: &[f64], radii: &[f64]) -> Result<Option<HessianViaG>> {
    let d = u.domain();
    dual.check_point(y0)?;
    let n = d.dim();
    let mut cols = vec![0.0; n * n];
    for b in 0..n {
        let k = dual.spacing()[b];
        let m = (2.0 * d.spacing()[b] / k).ceil().max(1.0);
        let t = m * k;
        let mut yp = y0.to_vec();
        let mut ym = y0.to_vec();
        yp[b] += t;
        ym[b] -= t;
        let gp = prox(u, &yp, r)?.x;
        let gm = prox(u, &ym, r)?.x;
        for a in 0..n {
            cols[a * n + b] = (gp[a] - gm[a]) / (2.0 * t);
        }
    }
    let bm = SymMatrix::from_dense(n, &cols)?;
    let Some(am) = bm.inverse_if_conditioned(MAX_CONDITION) else {
        return Ok(None);
    };
    let center = prox(u, y0, r)?;
    let f = prox_potential(u, r)?;
    let f_hessian = hessian_stencil(&f, center.node);
    let x0 = center.x;
    let fx0 = f.at(center.node);
    let mut x = vec![0.0; n];
    let remainders = radii
        .iter()
        .map(|&s| {
            let mut worst = 0.0f64;
            for i in 0..d.len() {
                d.node_into(i, &mut x);
                if dist2(&x, &x0) <= s * s {
                    let dx: Vec<f64> = x.iter().zip(&x0).map(|(p, q)| p - q).collect();
                    worst = worst.max((f.at(i) - fx0 - dot(y0, &dx) - 0.5 * am.quad_form(&dx)).abs());
                }
            }
            (s, worst)
        })
        .collect();
    Ok(Some(HessianViaG { x0, b: bm, a: am, f_hessian, remainders }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;

    fn line(n: usize, f: impl Fn(f64) -> f64) -> GridFunction {
        let d = GridDomain::line(-2.0, 2.0, n).unwrap();
        GridFunction::from_fn(&d, |x| f(x[0])).unwrap()
    }

    #[test]
    fn prox_examples() {
        let z = line(41, |_| 0.0);
        assert!((prox(&z, &[0.73], 1.0).unwrap().x[0] - 0.7).abs() < 1e-12);
        let a = line(401, f64::abs);
        let pr = prox(&a, &[0.7], 0.5).unwrap();
        assert!((pr.x[0] - 0.2).abs() < 1e-12);
        assert!((pr.p[0] - 1.0).abs() < 1e-9);
        let q = line(41, |x| 0.5 * x * x);
        assert!((prox(&q, &[1.2], 1.0).unwrap().x[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn g_examples() {
        let dual = GridDomain::line(-2.0, 2.0, 41).unwrap();
        let q = line(41, |x| 0.5 * x * x);
        let g = gradient_inverse_g(&q, 1.0, &dual).unwrap();
        for j in 0..dual.len() {
            let y = dual.coord(0, j);
            assert!((g.at(j)[0] - y / 2.0).abs() <= 0.05 + 1e-12);
        }
        assert!(g.contraction_defect() <= 2.0 * 0.1);
        let a = line(41, f64::abs);
        let g = gradient_inverse_g(&a, 1.0, &dual).unwrap();
        for j in 0..dual.len() {
            if dual.coord(0, j).abs() <= 1.0 {
                assert_eq!(g.at(j)[0], 0.0);
            }
        }
    }

    #[test]
    fn expansive_examples() {
        let d = GridDomain::line(-2.0, 2.0, 41).unwrap();
        let f = GridFunction::from_fn(&d, |x| x[0] * x[0]).unwrap();
        let pt = |x: f64, y: f64| (vec![x], vec![y]);
        assert!((expansive_defect(&f, &[(pt(0.0, 0.0), pt(1.0, 2.0))], 1e-9).unwrap() + 1.0).abs() < 1e-12);
        let g = GridFunction::from_fn(&d, |x| x[0].abs() + 0.5 * x[0] * x[0]).unwrap();
        assert!((expansive_defect(&g, &[(pt(0.0, -1.0), pt(0.0, 1.0))], 1e-9).unwrap() + 2.0).abs() < 1e-12);
        assert_eq!(expansive_defect(&f, &[(pt(1.0, 2.0), pt(1.0, 2.0))], 1e-9).unwrap(), 0.0);
        assert_eq!(expansive_defect(&f, &[(pt(1.0, 0.0), pt(1.0, 2.0))], 1e-9), Err(Error::InvalidPair { index: 0 }));
    }

    #[test]
    fn potential_examples() {
        // dual spacing 2h keeps the maximiser y / 2 on the primal grid
        let coarse = GridDomain::line(-2.0, 2.0, 21).unwrap();
        let q = line(41, |x| 0.5 * x * x);
        let g = legendre_potential(&q, 1.0, &coarse).unwrap();
        for j in 0..coarse.len() {
            let y = coarse.coord(0, j);
            assert!((g.at(j) - y * y / 4.0).abs() < 1e-12);
        }
        let dual = GridDomain::line(-2.0, 2.0, 41).unwrap();
        let z = line(41, |_| 0.0);
        let g = legendre_potential(&z, 3.0, &dual).unwrap();
        for j in 0..dual.len() {
            let y = dual.coord(0, j);
            assert!((g.at(j) - y * y / 2.0).abs() < 1e-12);
        }
        // same routine as the plain conjugate
        assert_eq!(g, conjugate(&prox_potential(&z, 3.0).unwrap(), &dual).unwrap());
    }

    #[test]
    fn hessian_examples() {
        let d = GridDomain::cube(2, -1.0, 1.0, 11).unwrap();
        let u = GridFunction::from_fn(&d, |x| 0.5 * (2.0 * x[0] * x[0] + 2.0 * 0.5 * x[0] * x[1] + 3.0 * x[1] * x[1])).unwrap();
        let s = numerical_hessian(&u, d.nearest_node(&[0.2, -0.4]));
        assert!(s.valid);
        assert!((s.h.get(0, 0) - 2.0).abs() < 1e-10 && (s.h.get(0, 1) - 0.5).abs() < 1e-10);
        assert!(!numerical_hessian(&u, 0).valid);
        let a = line(41, f64::abs);
        assert!((numerical_hessian(&a, 20).h.get(0, 0) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn statistic_examples() {
        let q = line(401, |x| 0.5 * x * x);
        let h = 0.01;
        let rep = alexandrov_statistic(&q, 0.0, 1e-6, &[h, 2.0 * h, 3.0 * h]).unwrap();
        assert_eq!(rep.fraction, 1.0);
        let m = line(401, |x| (0.5 * (x - 1.0).powi(2)).max(0.5 * (x + 1.0).powi(2)));
        let rep = alexandrov_statistic(&m, 0.0, 1e-6, &[h, 2.0 * h, 3.0 * h]).unwrap();
        assert!(rep.fraction >= 0.98, "{}", rep.fraction);
    }

    #[test]
    fn hessian_via_g_examples() {
        let d = GridDomain::line(-2.0, 2.0, 81).unwrap();
        let radii = [0.1, 0.2];
        let q = GridFunction::from_fn(&d, |x| 0.5 * x[0] * x[0]).unwrap();
        let res = hessian_via_g(&q, 1.0, &d, &[0.0], &radii).unwrap().unwrap();
        assert!((res.a.get(0, 0) - 2.0).abs() < 1e-6);
        assert!(res.remainders.iter().all(|&(_, r)| r < 1e-12));
        let a = GridFunction::from_fn(&d, |x| x[0].abs()).unwrap();
        assert!(hessian_via_g(&a, 1.0, &d, &[0.0], &radii).unwrap().is_none());
        let z = GridFunction::constant(&d, 0.0).unwrap();
        let res = hessian_via_g(&z, 1.0, &d, &[0.0], &radii).unwrap().unwrap();
        assert!((res.a.get(0, 0) - 1.0).abs() < 1e-12);
    }
}
