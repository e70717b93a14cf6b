//! Subdifferentials, grid convexity and quasi-convexity.
//!
//! Grid convexity has one definition throughout the crate: a function is
//! convex when it agrees with its lower convex envelope up to a relative
//! tolerance. Axis-wise second differences are not used because they miss
//! non-convexity along diagonals.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{dot, norm, GridFunction, IndexRegion};
use crate::legendre::{biconjugate_envelope, conjugate, region_envelope, DualGrid};
use crate::matrix::SymMatrix;

/// Default relative tolerance for algebraic identities.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default relative tolerance for witnesses found by search.
pub const SEARCH_TOL: f64 = 1e-6;

#[inline]
fn scaled(u: &GridFunction, tol: f64) -> f64 {
    tol * (1.0 + u.sup_norm())
}

/// `max |f - env f|` over the grid.
pub fn convexity_defect(f: &GridFunction) -> Result<f64> {
    let env = biconjugate_envelope(f)?;
    Ok(f.values().iter().zip(env.values()).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

pub fn is_convex(f: &GridFunction, tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return domain("tolerance must be positive");
    }
    Ok(convexity_defect(f)? <= scaled(f, tol))
}

/// Grid convexity of `f` restricted to the nodes of `region`.
pub fn is_convex_on(f: &GridFunction, region: &IndexRegion, tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return domain("tolerance must be positive");
    }
    if region.is_empty() {
        return Ok(true);
    }
    let env = region_envelope(f.values(), region, None)?;
    let scale = 1.0 + region.members().iter().fold(0.0f64, |m, &i| m.max(f.at(i).abs()));
    let defect = region.members().iter().zip(&env.values).fold(0.0f64, |m, (&i, e)| m.max((f.at(i) - e).abs()));
    Ok(defect <= tol * scale)
}

/// `u + (lambda / 2) |x|^2`.
pub fn add_half_square(u: &GridFunction, lambda: f64) -> Result<GridFunction> {
    u.add_fn(|x| 0.5 * lambda * dot(x, x))
}

/// Outcome of the quasi-convexity modulus search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Modulus {
    Value(f64),
    ExceedsMax,
}

/// Smallest `lambda` in `[0, lambda_max]`, to within `tol`, such that
/// `u + (lambda / 2)|x|^2` is grid-convex.
pub fn quasiconvex_modulus(u: &GridFunction, lambda_max: f64, tol: f64) -> Result<Modulus> {
    if !(lambda_max > 0.0) || !(tol > 0.0) {
        return domain("lambda_max and tol must be positive");
    }
    let convex_at = |l: f64| -> Result<bool> { is_convex(&add_half_square(u, l)?, DEFAULT_TOL) };
    if convex_at(0.0)? {
        return Ok(Modulus::Value(0.0));
    }
    if !convex_at(lambda_max)? {
        return Ok(Modulus::ExceedsMax);
    }
    let (mut lo, mut hi) = (0.0, lambda_max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if convex_at(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Modulus::Value(hi))
}

/// Whether `u(x) + <p, y - x> <= u(y) + tol (1 + |u|)` at every node `y`.
pub fn subdifferential_contains(u: &GridFunction, x: &[f64], p: &[f64], tol: f64) -> Result<bool> {
    let d = u.domain();
    d.check_point(p)?;
    let Some(t) = d.exact_node(x) else {
        return domain(format!("{x:?} is not a grid node"));
    };
    Ok(contains_at(u, t, p, tol))
}

pub(crate) fn contains_at(u: &GridFunction, t: usize, p: &[f64], tol: f64) -> bool {
    let d = u.domain();
    let slack = scaled(u, tol);
    let x = d.node(t);
    let ux = u.at(t);
    let mut y = vec![0.0; d.dim()];
    (0..d.len()).all(|i| {
        d.node_into(i, &mut y);
        let mut l = ux;
        for a in 0..y.len() {
            l += p[a] * (y[a] - x[a]);
        }
        l <= u.at(i) + slack
    })
}

/// `[p-, p+]`, the subdifferential of a convex 1-D grid function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubdiffInterval {
    pub lower: f64,
    pub upper: f64,
}

impl SubdiffInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

/// Left and right chord-slope bounds at an interior node of a 1-D function.
pub fn subdifferential_interval_1d(u: &GridFunction, x: f64) -> Result<SubdiffInterval> {
    let d = u.domain();
    if d.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: d.dim() });
    }
    let Some(t) = d.exact_node(&[x]) else {
        return domain(format!("{x} is not a grid node"));
    };
    if !d.is_interior(t) {
        return domain("subdifferential interval needs an interior node");
    }
    let xt = d.coord(0, t);
    let lower = (0..t).map(|i| (u.at(t) - u.at(i)) / (xt - d.coord(0, i))).fold(f64::NEG_INFINITY, f64::max);
    let upper = (t + 1..d.len()).map(|i| (u.at(i) - u.at(t)) / (d.coord(0, i) - xt)).fold(f64::INFINITY, f64::min);
    if lower <= upper {
        return Ok(SubdiffInterval { lower, upper });
    }
    // equal chord slopes can cross by a rounding error on affine stretches
    let slack = 1e-12 * (1.0 + lower.abs().max(upper.abs()));
    if lower - upper <= slack {
        let mid = 0.5 * (lower + upper);
        return Ok(SubdiffInterval { lower: mid, upper: mid });
    }
    Err(Error::NonConvex { node: t, left: lower, right: upper })
}

/// Dual node minimising the Fenchel gap at `x`, if that gap is below
/// `SEARCH_TOL (1 + |u|)`. Ties go to the smaller dual index.
pub fn subgradient_witness(u: &GridFunction, x: &[f64], dual: &DualGrid) -> Result<Option<Vec<f64>>> {
    let d = u.domain();
    d.check_point(x)?;
    let Some(t) = d.exact_node(x) else {
        return domain(format!("{x:?} is not a grid node"));
    };
    let g = conjugate(u, dual)?;
    let xt = d.node(t);
    let mut best = (f64::INFINITY, 0usize);
    let mut y = vec![0.0; d.dim()];
    for j in 0..dual.len() {
        dual.node_into(j, &mut y);
        let gap = u.at(t) + g.at(j) - dot(&xt, &y);
        if gap < best.0 {
            best = (gap, j);
        }
    }
    Ok((best.0 <= scaled(u, SEARCH_TOL)).then(|| dual.node(best.1)))
}

/// Grid Lipschitz bound over `region`: at each member, the per-axis maxima of
/// `|chord slope|` to its grid neighbours form a vector; the result is the
/// largest norm of these vectors.
pub fn lipschitz_constant(u: &GridFunction, region: &IndexRegion) -> Result<f64> {
    if region.is_empty() {
        return domain("Lipschitz constant over an empty region");
    }
    let d = u.domain();
    let mut best = 0.0f64;
    let mut v = vec![0.0; d.dim()];
    for &i in region.members() {
        for (a, va) in v.iter_mut().enumerate() {
            let h = d.spacing()[a];
            *va = [-1isize, 1]
                .iter()
                .filter_map(|&s| d.shifted(i, a, s))
                .map(|j| ((u.at(j) - u.at(i)) / h).abs())
                .fold(0.0, f64::max);
        }
        best = best.max(norm(&v));
    }
    Ok(best)
}

/// A pair of subgradients `p` at `x` and `q` at `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgradientPair {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub y: Vec<f64>,
    pub q: Vec<f64>,
}

/// `min <q - p, y - x>` over pairs whose members pass `subdifferential_contains`.
pub fn monotonicity_defect(u: &GridFunction, pairs: &[SubgradientPair], tol: f64) -> Result<f64> {
    if pairs.is_empty() {
        return domain("no pairs given");
    }
    let mut worst = f64::INFINITY;
    for (index, pr) in pairs.iter().enumerate() {
        if !subdifferential_contains(u, &pr.x, &pr.p, tol)? || !subdifferential_contains(u, &pr.y, &pr.q, tol)? {
            return Err(Error::InvalidPair { index });
        }
        let s: f64 = (0..pr.x.len()).map(|a| (pr.q[a] - pr.p[a]) * (pr.y[a] - pr.x[a])).sum();
        worst = worst.min(s);
    }
    Ok(worst)
}

/// `c + <q, x> + <P x, x> / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPolynomial {
    #[serde(rename = "const")]
    pub constant: f64,
    pub linear: Vec<f64>,
    pub curvature: SymMatrix,
}

impl QuadraticPolynomial {
    pub fn new(constant: f64, linear: Vec<f64>, curvature: SymMatrix) -> Result<Self> {
        if linear.len() != curvature.dim() {
            return Err(Error::Dimension { expected: curvature.dim(), got: linear.len() });
        }
        Ok(Self { constant, linear, curvature })
    }

    pub fn zero(dim: usize) -> Self {
        Self { constant: 0.0, linear: vec![0.0; dim], curvature: SymMatrix::zeros(dim) }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + dot(&self.linear, x) + 0.5 * self.curvature.quad_form(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.curvature.apply(x).iter().zip(&self.linear).map(|(a, b)| a + b).collect()
    }
}

/// `u + phi` at every node.
pub fn shift_by_quadratic(u: &GridFunction, phi: &QuadraticPolynomial) -> Result<GridFunction> {
    let d = u.domain();
    if phi.linear.len() != d.dim() {
        return Err(Error::Dimension { expected: d.dim(), got: phi.linear.len() });
    }
    u.add_fn(|x| phi.value(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;

    fn on_line(n: usize, f: impl Fn(f64) -> f64) -> GridFunction {
        let d = GridDomain::line(-2.0, 2.0, n).unwrap();
        GridFunction::from_fn(&d, |x| f(x[0])).unwrap()
    }

    #[test]
    fn convexity_examples() {
        assert!(is_convex(&on_line(41, f64::abs), 1e-9).unwrap());
        assert!(!is_convex(&on_line(41, |x| -x.abs()), 1e-9).unwrap());
        let well = on_line(41, |x| ((x + 1.0).powi(2)).min((x - 1.0).powi(2)));
        assert!(!is_convex(&well, 1e-9).unwrap());
        let env = biconjugate_envelope(&well).unwrap();
        assert!((well.value_at_point(&[0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(env.value_at_point(&[0.0]).unwrap().abs() < 1e-12);
        assert!(is_convex(&well, 0.0).is_err());
    }

    #[test]
    fn diagonal_nonconvexity_is_caught() {
        // convex along both axes, concave along the diagonal x = y
        let d = GridDomain::cube(2, -1.0, 1.0, 11).unwrap();
        let f = GridFunction::from_fn(&d, |x| x[0] * x[0] + x[1] * x[1] - 3.0 * x[0] * x[1]).unwrap();
        assert!(!is_convex(&f, 1e-9).unwrap());
        let g = GridFunction::from_fn(&d, |x| x[0] * x[0] + x[1] * x[1] - x[0] * x[1]).unwrap();
        assert!(is_convex(&g, 1e-9).unwrap());
    }

    #[test]
    fn modulus_examples() {
        let tol = 1e-4;
        assert_eq!(quasiconvex_modulus(&on_line(41, |x| 0.5 * x * x), 10.0, tol).unwrap(), Modulus::Value(0.0));
        let d = GridDomain::line(-1.0, 1.0, 41).unwrap();
        let neg = GridFunction::from_fn(&d, |x| -0.5 * x[0] * x[0]).unwrap();
        let Modulus::Value(l) = quasiconvex_modulus(&neg, 10.0, tol).unwrap() else { panic!() };
        assert!((l - 1.0).abs() <= tol);
        for h in [0.1, 0.05, 0.025] {
            let n = (2.0 / h) as usize + 1;
            let d = GridDomain::line(-1.0, 1.0, n).unwrap();
            let f = GridFunction::from_fn(&d, |x| -x[0].abs()).unwrap();
            let Modulus::Value(l) = quasiconvex_modulus(&f, 1000.0, tol).unwrap() else { panic!() };
            assert!((l - 2.0 / h).abs() <= 1e-3 * (2.0 / h), "h={h}: {l}");
        }
        assert_eq!(quasiconvex_modulus(&neg, 0.5, tol).unwrap(), Modulus::ExceedsMax);
    }

    #[test]
    fn membership_and_intervals() {
        let abs = on_line(41, f64::abs);
        assert!(subdifferential_contains(&abs, &[0.0], &[0.5], 1e-9).unwrap());
        assert!(!subdifferential_contains(&abs, &[0.0], &[1.5], 1e-9).unwrap());
        let half = on_line(41, |x| 0.5 * x * x);
        assert!(subdifferential_contains(&half, &[1.0], &[1.0], 1e-9).unwrap());

        let i = subdifferential_interval_1d(&abs, 0.0).unwrap();
        assert_eq!((i.lower, i.upper), (-1.0, 1.0));
        let h = 0.1;
        let i = subdifferential_interval_1d(&half, 1.0).unwrap();
        assert!((i.lower - (1.0 - h / 2.0)).abs() < 1e-12 && (i.upper - (1.0 + h / 2.0)).abs() < 1e-12);
        let i = subdifferential_interval_1d(&abs, 1.0).unwrap();
        assert!((i.lower - 1.0).abs() < 1e-12 && (i.upper - 1.0).abs() < 1e-12);

        let bad = on_line(41, |x| -x.abs());
        assert!(matches!(subdifferential_interval_1d(&bad, 0.0), Err(Error::NonConvex { .. })));
        assert!(subdifferential_interval_1d(&abs, 2.0).is_err());
    }

    #[test]
    fn witnesses() {
        let dual = GridDomain::line(-3.0, 3.0, 61).unwrap();
        let half = on_line(41, |x| 0.5 * x * x);
        let p = subgradient_witness(&half, &[1.0], &dual).unwrap().unwrap();
        assert!((p[0] - 1.0).abs() <= dual.spacing()[0]);
        let abs = on_line(41, f64::abs);
        let p = subgradient_witness(&abs, &[0.0], &dual).unwrap().unwrap();
        assert!((p[0] + 1.0).abs() < 1e-12);
        let aff = on_line(41, |x| 0.7 * x);
        let p = subgradient_witness(&aff, &[0.3], &dual).unwrap().unwrap();
        assert!((p[0] - 0.7).abs() <= dual.spacing()[0]);
    }

    #[test]
    fn lipschitz_examples() {
        let d = GridDomain::line(-2.0, 2.0, 41).unwrap();
        let inner = IndexRegion::new(&d, (10..=30).collect()).unwrap();
        let abs = on_line(41, f64::abs);
        assert!((lipschitz_constant(&abs, &inner).unwrap() - 1.0).abs() < 1e-12);
        let half = on_line(41, |x| 0.5 * x * x);
        assert!(lipschitz_constant(&half, &inner).unwrap() <= 1.0 + 0.1);
        assert_eq!(lipschitz_constant(&on_line(41, |_| 3.0), &inner).unwrap(), 0.0);
        assert!(lipschitz_constant(&abs, &IndexRegion::new(&d, vec![]).unwrap()).is_err());
    }

    #[test]
    fn monotonicity_examples() {
        let abs = on_line(41, f64::abs);
        let pr = |x: f64, p: f64, y: f64, q: f64| SubgradientPair { x: vec![x], p: vec![p], y: vec![y], q: vec![q] };
        assert!((monotonicity_defect(&abs, &[pr(-1.0, -1.0, 1.0, 1.0)], 1e-9).unwrap() - 4.0).abs() < 1e-12);
        let half = on_line(41, |x| 0.5 * x * x);
        assert!((monotonicity_defect(&half, &[pr(0.0, 0.0, 1.0, 1.0)], 1e-9).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(monotonicity_defect(&abs, &[pr(0.0, -1.0, 0.0, 1.0)], 1e-9).unwrap(), 0.0);
        assert_eq!(
            monotonicity_defect(&abs, &[pr(0.0, 0.0, 1.0, 2.0)], 1e-9),
            Err(Error::InvalidPair { index: 0 })
        );
    }

    #[test]
    fn shift_adds_subdifferentials() {
        let abs = on_line(41, f64::abs);
        let phi = QuadraticPolynomial::new(0.0, vec![0.0], SymMatrix::identity(1)).unwrap();
        let s = shift_by_quadratic(&abs, &phi).unwrap();
        let i = subdifferential_interval_1d(&s, 0.0).unwrap();
        // chords of |x| + x^2/2 from 0 have slopes 1 + h/2
        assert!((i.lower + 1.05).abs() < 1e-12 && (i.upper - 1.05).abs() < 1e-12);
        let same = shift_by_quadratic(&abs, &QuadraticPolynomial::zero(1)).unwrap();
        assert_eq!(same, abs);
    }
}
