//! Discrete Legendre–Fenchel conjugation and convex envelopes.
//!
//! `conjugate` computes `g(y) = max_x (<x, y> - f(x))` over all primal nodes.
//! In one dimension the maximiser moves monotonically along the lower hull of
//! the data as `y` increases, which gives a linear-time sweep. In `n`
//! dimensions the transform factorises into one such sweep per axis.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{dot, GridDomain, GridFunction, IndexRegion};
use crate::hull::{self, Envelope};

/// A grid read as slopes rather than positions.
pub type DualGrid = GridDomain;

/// 1-D conjugate of `(xs, fs)` at the sorted slopes `ys`.
///
/// Returns the values and, per slope, the index into `xs` of the maximiser
/// (smallest index on ties). `xs` must be strictly increasing.
pub fn conjugate_1d(xs: &[f64], fs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<usize>) {
    debug_assert!(ys.windows(2).all(|w| w[0] <= w[1]));
    let order: Vec<usize> = (0..xs.len()).collect();
    let hull = hull::lower_hull(xs, fs, &order);
    let mut vals = Vec::with_capacity(ys.len());
    let mut args = Vec::with_capacity(ys.len());
    let mut k = 0;
    for &y in ys {
        let mut best = xs[hull[k]] * y - fs[hull[k]];
        while k + 1 < hull.len() {
            let next = xs[hull[k + 1]] * y - fs[hull[k + 1]];
            if next > best {
                best = next;
                k += 1;
            } else {
                break;
            }
        }
        vals.push(best);
        args.push(hull[k]);
    }
    (vals, args)
}

/// Conjugate together with the linear index of a maximising primal node.
pub fn conjugate_with_argmax(f: &GridFunction, dual: &DualGrid) -> Result<(GridFunction, Vec<usize>)> {
    let primal = f.domain();
    let n = primal.dim();
    if dual.dim() != n {
        return Err(Error::Dimension { expected: n, got: dual.dim() });
    }
    if dual.is_empty() {
        return crate::error::domain("empty dual grid");
    }

    let mut cur = f.values().to_vec();
    let mut partial = vec![0usize; cur.len()];
    let mut shape = primal.shape().to_vec();
    for (step, axis) in (0..n).rev().enumerate() {
        let xs = primal.axis_coords(axis);
        let ys = dual.axis_coords(axis);
        let len_in = shape[axis];
        let len_out = ys.len();
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let pstride = primal.strides()[axis];
        let sign = if step == 0 { 1.0 } else { -1.0 };

        let lines: Vec<(Vec<f64>, Vec<usize>)> = (0..outer * inner)
            .into_par_iter()
            .map(|line| {
                let (o, i) = (line / inner, line % inner);
                let base = o * len_in * inner + i;
                let fs: Vec<f64> = (0..len_in).map(|k| sign * cur[base + k * inner]).collect();
                let (vals, args) = conjugate_1d(&xs, &fs, &ys);
                let parts = args.iter().map(|&a| partial[base + a * inner] + a * pstride).collect();
                (vals, parts)
            })
            .collect();

        let mut next = vec![0.0; outer * len_out * inner];
        let mut next_partial = vec![0usize; next.len()];
        for (line, (vals, parts)) in lines.into_iter().enumerate() {
            let (o, i) = (line / inner, line % inner);
            let base = o * len_out * inner + i;
            for j in 0..len_out {
                next[base + j * inner] = vals[j];
                next_partial[base + j * inner] = parts[j];
            }
        }
        cur = next;
        partial = next_partial;
        shape[axis] = len_out;
    }
    Ok((GridFunction::new(dual.clone(), cur)?, partial))
}

/// `g(y) = max_x (<x, y> - f(x))` at every dual node.
pub fn conjugate(f: &GridFunction, dual: &DualGrid) -> Result<GridFunction> {
    conjugate_with_argmax(f, dual).map(|(g, _)| g)
}

/// Direct `O(N M)` evaluation of the conjugate; ties go to the smaller index.
pub fn conjugate_brute(f: &GridFunction, dual: &DualGrid) -> Result<(GridFunction, Vec<usize>)> {
    let primal = f.domain();
    if dual.dim() != primal.dim() {
        return Err(Error::Dimension { expected: primal.dim(), got: dual.dim() });
    }
    if dual.is_empty() {
        return crate::error::domain("empty dual grid");
    }
    let xs = primal.nodes_flat();
    let n = primal.dim();
    let (vals, args): (Vec<f64>, Vec<usize>) = (0..dual.len())
        .into_par_iter()
        .map(|j| {
            let y = dual.node(j);
            let mut best = (f64::NEG_INFINITY, 0);
            for (i, x) in xs.chunks(n).enumerate() {
                let v = dot(x, &y) - f.at(i);
                if v > best.0 {
                    best = (v, i);
                }
            }
            best
        })
        .unzip();
    Ok((GridFunction::new(dual.clone(), vals)?, args))
}

/// Dual grid covering every forward-difference slope of `f`, padded by one
/// dual spacing on each side, with at least as many nodes per axis as `f`.
pub fn auto_dual(f: &GridFunction) -> Result<DualGrid> {
    let d = f.domain();
    let n = d.dim();
    let (mut mins, mut maxs, mut shape) = (vec![0.0; n], vec![0.0; n], vec![0usize; n]);
    for a in 0..n {
        let h = d.spacing()[a];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..d.len() {
            if let Some(j) = d.shifted(i, a, 1) {
                let s = (f.at(j) - f.at(i)) / h;
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 0.0);
        }
        if hi - lo <= 1e-12 * (1.0 + hi.abs().max(lo.abs())) {
            lo -= 0.5;
            hi += 0.5;
        }
        let m = d.shape()[a].max(2);
        let step = (hi - lo) / (m - 1) as f64;
        mins[a] = lo - step;
        maxs[a] = hi + step;
        shape[a] = m + 2;
    }
    GridDomain::new(mins, maxs, shape)
}

/// Centred differences, one-sided on the boundary.
pub fn difference_slopes(f: &GridFunction) -> Vec<f64> {
    let d = f.domain();
    let n = d.dim();
    let mut out = vec![0.0; d.len() * n];
    for i in 0..d.len() {
        for a in 0..n {
            let h = d.spacing()[a];
            let (lo, hi) = (d.shifted(i, a, -1), d.shifted(i, a, 1));
            out[i * n + a] = match (lo, hi) {
                (Some(l), Some(r)) => (f.at(r) - f.at(l)) / (2.0 * h),
                (None, Some(r)) => (f.at(r) - f.at(i)) / h,
                (Some(l), None) => (f.at(i) - f.at(l)) / h,
                (None, None) => 0.0,
            };
        }
    }
    out
}

/// Lower convex envelope of `values` restricted to `region`, with one
/// supporting slope per member (in member order).
pub fn region_envelope(values: &[f64], region: &IndexRegion, preferred: Option<&[f64]>) -> Result<Envelope> {
    let d = region.domain();
    let n = d.dim();
    if values.len() != d.len() {
        return Err(Error::Dimension { expected: d.len(), got: values.len() });
    }
    let members = region.members();
    let mut pts = vec![0.0; members.len() * n];
    for (k, &i) in members.iter().enumerate() {
        d.node_into(i, &mut pts[k * n..(k + 1) * n]);
    }
    let vals: Vec<f64> = members.iter().map(|&i| values[i]).collect();
    let pref: Option<Vec<f64>> =
        preferred.map(|p| members.iter().flat_map(|&i| p[i * n..(i + 1) * n].iter().copied()).collect());
    hull::lower_envelope(n, &pts, &vals, pref.as_deref())
}

/// Envelope of `f` over its whole grid with supporting slopes.
pub fn envelope_with_slopes(f: &GridFunction) -> Result<Envelope> {
    let pref = (f.domain().dim() > 1).then(|| difference_slopes(f));
    region_envelope(f.values(), &IndexRegion::full(f.domain()), pref.as_deref())
}

/// Largest convex function below the samples of `f`, i.e. the second conjugate
/// taken over the exact set of attained slopes.
pub fn biconjugate_envelope(f: &GridFunction) -> Result<GridFunction> {
    let env = envelope_with_slopes(f)?;
    GridFunction::new(f.domain().clone(), env.values)
}

/// `g**` through an explicit dual grid: `max_y (<x, y> - g(y))` at primal nodes.
pub fn double_conjugate(f: &GridFunction, dual: &DualGrid) -> Result<GridFunction> {
    let g = conjugate(f, dual)?;
    conjugate(&g, f.domain())
}

/// `f(x) + g(y) - <x, y>` for a primal node `x` and dual node `y`.
pub fn fenchel_gap(f: &GridFunction, g: &GridFunction, x: &[f64], y: &[f64]) -> Result<f64> {
    let fx = f.value_at_point(x)?;
    let gy = g.value_at_point(y)?;
    Ok(fx + gy - dot(x, y))
}
