//! Exact lower convex envelopes of finite point clouds.
//!
//! For points `z_i` with heights `w_i` the envelope at `z_t` is
//! `min { sum l_i w_i : sum l_i z_i = z_t, sum l_i = 1, l >= 0 }`, the value of
//! the largest affine minorant of the data at `z_t`. Alongside every value we
//! return the slope of one such minorant, so callers get a subgradient of the
//! envelope for free.
//!
//! One dimension uses a monotone lower hull. Higher dimensions solve the
//! linear program above per point with a revised simplex whose basis has
//! `n + 1` points; the optimal dual is the supporting plane.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Envelope values and supporting slopes, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    dim: usize,
    pub values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Envelope {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn slope(&self, i: usize) -> &[f64] {
        &self.slopes[i * self.dim..(i + 1) * self.dim]
    }
}

const MAX_PIVOTS: usize = 100_000;

/// Lower convex envelope of `(points[i], values[i])`.
///
/// `points` is flat with `dim` coordinates per point. `preferred`, when given,
/// holds one slope per point (flat); among supporting slopes at a point the
/// returned one is moved as far toward the preferred slope as feasibility
/// allows along the segment joining them.
pub fn lower_envelope(dim: usize, points: &[f64], values: &[f64], preferred: Option<&[f64]>) -> Result<Envelope> {
    let n_pts = values.len();
    if dim == 0 || points.len() != n_pts * dim {
        return Err(Error::Dimension { expected: n_pts * dim.max(1), got: points.len() });
    }
    if let Some(p) = preferred {
        if p.len() != points.len() {
            return Err(Error::Dimension { expected: points.len(), got: p.len() });
        }
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    if n_pts == 0 {
        return Ok(Envelope { dim, values: vec![], slopes: vec![] });
    }

    let basis = affine_basis(dim, points);
    let rank = basis.dirs.len();
    if rank == dim {
        return if dim == 1 {
            Ok(chain_envelope(points, values))
        } else {
            simplex_envelope(dim, points, values, preferred)
        };
    }

    // Degenerate cloud: work in coordinates of its affine hull.
    let reduce = |p: &[f64]| -> Vec<f64> {
        basis.dirs.iter().map(|e| e.iter().zip(p).zip(&basis.origin).map(|((a, b), o)| a * (b - o)).sum()).collect()
    };
    let project = |s: &[f64]| -> Vec<f64> {
        basis.dirs.iter().map(|e| e.iter().zip(s).map(|(a, b)| a * b).sum()).collect()
    };
    if rank == 0 {
        return Ok(Envelope { dim, values: values.to_vec(), slopes: vec![0.0; n_pts * dim] });
    }
    let red_pts: Vec<f64> = points.chunks(dim).flat_map(reduce).collect();
    let red_pref: Option<Vec<f64>> = preferred.map(|p| p.chunks(dim).flat_map(project).collect());
    let red = if rank == 1 {
        chain_envelope(&red_pts, values)
    } else {
        simplex_envelope(rank, &red_pts, values, red_pref.as_deref())?
    };
    let mut slopes = vec![0.0; n_pts * dim];
    for i in 0..n_pts {
        let s = red.slope(i);
        for (k, e) in basis.dirs.iter().enumerate() {
            for a in 0..dim {
                slopes[i * dim + a] += s[k] * e[a];
            }
        }
    }
    Ok(Envelope { dim, values: red.values, slopes })
}

struct AffineBasis {
    origin: Vec<f64>,
    dirs: Vec<Vec<f64>>,
}

fn affine_basis(dim: usize, points: &[f64]) -> AffineBasis {
    let origin = points[..dim].to_vec();
    let scale = points
        .chunks(dim)
        .map(|p| p.iter().zip(&origin).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    if scale == 0.0 {
        return AffineBasis { origin, dirs };
    }
    for p in points.chunks(dim) {
        if dirs.len() == dim {
            break;
        }
        let mut v: Vec<f64> = p.iter().zip(&origin).map(|(a, b)| a - b).collect();
        for e in &dirs {
            let c: f64 = e.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-9 * scale {
            dirs.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    AffineBasis { origin, dirs }
}

/// Cross product sign test: is `b` on or above the segment from `a` to `c`?
#[inline]
fn above_or_on(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0) <= 0.0
}

/// Indices of the lower hull of `(xs[order[k]], fs[order[k]])`, `xs` sorted via `order`.
pub(crate) fn lower_hull(xs: &[f64], fs: &[f64], order: &[usize]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(order.len());
    for &i in order {
        // equal abscissae: keep the lower value, earlier index on ties
        if let Some(&last) = hull.last() {
            if xs[last] == xs[i] {
                if fs[i] < fs[last] {
                    hull.pop();
                } else {
                    continue;
                }
            }
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if above_or_on((xs[a], fs[a]), (xs[b], fs[b]), (xs[i], fs[i])) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

fn chain_envelope(xs: &[f64], fs: &[f64]) -> Envelope {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    let hull = lower_hull(xs, fs, &order);
    let mut values = vec![0.0; n];
    let mut slopes = vec![0.0; n];
    if hull.len() == 1 {
        // every point shares one abscissa
        for i in 0..n {
            values[i] = fs[hull[0]];
        }
        return Envelope { dim: 1, values, slopes };
    }
    let edge = |k: usize| {
        let (a, b) = (hull[k], hull[k + 1]);
        (fs[b] - fs[a]) / (xs[b] - xs[a])
    };
    let mut k = 0;
    for &i in &order {
        while k + 2 < hull.len() && xs[hull[k + 1]] <= xs[i] {
            k += 1;
        }
        // now xs[hull[k]] <= xs[i] <= xs[hull[k+1]] (or i is the last hull point)
        let a = hull[k];
        let s = edge(k);
        let x = xs[i];
        // vertices take the mean of the adjacent edge slopes; the two ends
        // extrapolate by half the last slope increment
        let last = hull.len() - 2;
        let end_step = |k: usize, j: usize| if last == 0 { 0.0 } else { 0.5 * (edge(k) - edge(j)) };
        if x == xs[a] {
            values[i] = fs[a];
            slopes[i] = if k == 0 { s - end_step(1, 0) } else { 0.5 * (edge(k - 1) + s) };
        } else if x == xs[hull[k + 1]] {
            let b = hull[k + 1];
            values[i] = fs[b];
            slopes[i] = if k == last { s + end_step(last, last.saturating_sub(1)) } else { 0.5 * (s + edge(k + 1)) };
        } else {
            values[i] = (fs[a] + s * (x - xs[a])).min(fs[i]);
            slopes[i] = s;
        }
    }
    Envelope { dim: 1, values, slopes }
}

fn simplex_envelope(dim: usize, points: &[f64], values: &[f64], preferred: Option<&[f64]>) -> Result<Envelope> {
    let n = values.len();
    let scale = 1.0 + values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let results: Vec<Result<(f64, Vec<f64>)>> = (0..n)
        .into_par_iter()
        .map(|t| {
            let pref = preferred.map(|p| &p[t * dim..(t + 1) * dim]);
            envelope_at(dim, points, values, t, scale, pref)
        })
        .collect();
    let mut out_vals = Vec::with_capacity(n);
    let mut slopes = Vec::with_capacity(n * dim);
    for r in results {
        let (v, s) = r?;
        out_vals.push(v);
        slopes.extend(s);
    }
    Ok(Envelope { dim, values: out_vals, slopes })
}

#[inline]
fn pt(points: &[f64], dim: usize, i: usize) -> &[f64] {
    &points[i * dim..(i + 1) * dim]
}

/// Slack `w(z) - (c + <y, z - x>)` at every point; returns the most negative and where.
fn worst_slack(dim: usize, points: &[f64], values: &[f64], x: &[f64], c: f64, y: &[f64]) -> (f64, usize) {
    let mut worst = (f64::INFINITY, 0usize);
    for (i, (p, &w)) in points.chunks(dim).zip(values).enumerate() {
        let mut l = c;
        for a in 0..dim {
            l += y[a] * (p[a] - x[a]);
        }
        let s = w - l;
        if s < worst.0 {
            worst = (s, i);
        }
    }
    worst
}

fn envelope_at(
    dim: usize,
    points: &[f64],
    values: &[f64],
    t: usize,
    scale: f64,
    preferred: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    let x = pt(points, dim, t);
    let eps = 1e-13 * scale;

    // Fast path: the preferred plane already supports the data at x.
    if let Some(y) = preferred {
        let (s, _) = worst_slack(dim, points, values, x, values[t], y);
        if s >= -eps {
            return Ok((values[t], y.to_vec()));
        }
    }

    let mut basis = initial_basis(dim, points, t);
    let m = dim + 1;
    let col = |i: usize| -> DVector<f64> {
        let mut v = DVector::zeros(m);
        v[0] = 1.0;
        v.rows_mut(1, dim).copy_from_slice(pt(points, dim, i));
        v
    };
    let mut rhs = DVector::zeros(m);
    rhs[0] = 1.0;
    rhs.rows_mut(1, dim).copy_from_slice(x);

    let mut plane = DVector::zeros(m);
    let mut lambda;
    let mut stalls = 0usize;
    for _ in 0..MAX_PIVOTS {
        let p_mat = DMatrix::from_columns(&basis.iter().map(|&i| col(i)).collect::<Vec<_>>());
        let lu = p_mat.clone().lu();
        lambda = lu.solve(&rhs).ok_or_else(|| Error::Consistency("singular simplex basis".into()))?;
        let wb = DVector::from_iterator(m, basis.iter().map(|&i| values[i]));
        plane = p_mat
            .transpose()
            .lu()
            .solve(&wb)
            .ok_or_else(|| Error::Consistency("singular simplex basis".into()))?;

        // Pricing: most violated point, or Bland's rule once pivots stall.
        let c_at_x = plane[0] + (0..dim).map(|a| plane[a + 1] * x[a]).sum::<f64>();
        let y: Vec<f64> = (1..m).map(|a| plane[a]).collect();
        let entering = if stalls < 50 {
            let (s, i) = worst_slack(dim, points, values, x, c_at_x, &y);
            (s < -eps).then_some(i)
        } else {
            points.chunks(dim).zip(values).position(|(p, &w)| {
                let l = c_at_x + (0..dim).map(|a| y[a] * (p[a] - x[a])).sum::<f64>();
                w - l < -eps
            })
        };
        let Some(e) = entering else {
            let value = c_at_x.min(values[t]);
            let y = match preferred {
                Some(pref) => steer(dim, points, values, x, value, &y, pref, eps),
                None => y,
            };
            return Ok((value, y));
        };

        let d = lu.solve(&col(e)).ok_or_else(|| Error::Consistency("singular simplex basis".into()))?;
        let mut leave: Option<(f64, usize)> = None;
        for k in 0..m {
            if d[k] > 1e-12 {
                let ratio = lambda[k].max(0.0) / d[k];
                let better = match leave {
                    None => true,
                    Some((r, kk)) => ratio < r || (ratio == r && basis[k] < basis[kk]),
                };
                if better {
                    leave = Some((ratio, k));
                }
            }
        }
        let Some((theta, k)) = leave else {
            return Err(Error::Consistency("unbounded envelope program".into()));
        };
        stalls = if theta <= 1e-15 { stalls + 1 } else { 0 };
        basis[k] = e;
    }
    let _ = plane;
    Err(Error::Consistency(format!("envelope simplex did not converge at point {t}")))
}

/// Supporting slope at `x` closest to `pref`, found by an active-set descent
/// from the feasible slope `y`. Constraints may be violated by `eps / 2`.
#[allow(clippy::too_many_arguments)]
fn steer(dim: usize, points: &[f64], values: &[f64], x: &[f64], value: f64, y: &[f64], pref: &[f64], eps: f64) -> Vec<f64> {
    let mut s = DVector::from_column_slice(y);
    let target = DVector::from_column_slice(pref);
    let row = |k: usize| DVector::from_iterator(dim, (0..dim).map(|a| points[k * dim + a] - x[a]));
    let mut active: Vec<usize> = Vec::new();
    for _ in 0..(20 * dim + 20) {
        let g = &target - &s;
        let (d, lambda) = if active.is_empty() {
            (g.clone(), DVector::zeros(0))
        } else {
            let a = DMatrix::from_rows(&active.iter().map(|&k| row(k).transpose()).collect::<Vec<_>>());
            let gram = (&a * a.transpose()).pseudo_inverse(1e-12).unwrap_or_else(|_| DMatrix::zeros(active.len(), active.len()));
            let lambda = &gram * (&a * &g);
            (&g - a.transpose() * &lambda, lambda)
        };
        if d.norm() <= 1e-13 * (1.0 + g.norm()) {
            match lambda.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
                Some((k, &l)) if l < -1e-12 => {
                    active.remove(k);
                    continue;
                }
                _ => break,
            }
        }
        let mut t = 1.0f64;
        let mut block = None;
        for (k, &w) in values.iter().enumerate() {
            if active.contains(&k) {
                continue;
            }
            let (mut rate, mut lhs) = (0.0, 0.0);
            for a in 0..dim {
                let dz = points[k * dim + a] - x[a];
                rate += d[a] * dz;
                lhs += s[a] * dz;
            }
            if rate > 0.0 {
                let slack = (w - value - lhs).max(-0.5 * eps) + 0.5 * eps;
                let tk = slack / rate;
                if tk < t {
                    t = tk;
                    block = Some(k);
                }
            }
        }
        s += t * &d;
        match block {
            Some(k) if active.len() < dim => active.push(k),
            Some(k) => {
                active.remove(0);
                active.push(k);
            }
            None => break,
        }
    }
    s.iter().copied().collect()
}

/// `t` together with `dim` points that make an affinely independent set,
/// searched outward from `t` in input order.
fn initial_basis(dim: usize, points: &[f64], t: usize) -> Vec<usize> {
    let n = points.len() / dim;
    let x = pt(points, dim, t);
    let mut basis = vec![t];
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    let mut offset = 1usize;
    while dirs.len() < dim && (offset <= t || t + offset < n) {
        for cand in [t.checked_sub(offset), (t + offset < n).then_some(t + offset)].into_iter().flatten() {
            if dirs.len() == dim {
                break;
            }
            let mut v: Vec<f64> = pt(points, dim, cand).iter().zip(x).map(|(a, b)| a - b).collect();
            let nv0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nv0 == 0.0 {
                continue;
            }
            for e in &dirs {
                let c: f64 = e.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
            }
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if nv > 1e-6 * nv0 {
                dirs.push(v.into_iter().map(|a| a / nv).collect());
                basis.push(cand);
            }
        }
        offset += 1;
    }
    basis
}
