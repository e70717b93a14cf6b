//! Centred finite differences at grid nodes.

use crate::grid::GridFunction;
use crate::matrix::SymMatrix;

/// Centred first differences; `None` unless `lin` is an interior node.
pub fn numerical_gradient(u: &GridFunction, lin: usize) -> Option<Vec<f64>> {
    let d = u.domain();
    if !d.is_interior(lin) {
        return None;
    }
    Some(
        (0..d.dim())
            .map(|a| {
                let (l, r) = (d.shifted(lin, a, -1)?, d.shifted(lin, a, 1)?);
                Some((u.at(r) - u.at(l)) / (2.0 * d.spacing()[a]))
            })
            .collect::<Option<Vec<f64>>>()?,
    )
}

/// Centred second differences on the diagonal and the four-point cross
/// stencil off it; `None` unless `lin` is an interior node.
pub fn numerical_hessian(u: &GridFunction, lin: usize) -> Option<SymMatrix> {
    let d = u.domain();
    if !d.is_interior(lin) {
        return None;
    }
    let n = d.dim();
    let h = d.spacing();
    let mut m = SymMatrix::zeros(n);
    for a in 0..n {
        let (l, r) = (d.shifted(lin, a, -1)?, d.shifted(lin, a, 1)?);
        m.set(a, a, (u.at(r) - 2.0 * u.at(lin) + u.at(l)) / (h[a] * h[a]));
        for b in a + 1..n {
            let corner = |sa: isize, sb: isize| -> Option<f64> { Some(u.at(d.shifted(d.shifted(lin, a, sa)?, b, sb)?)) };
            let v = corner(1, 1)? - corner(1, -1)? - corner(-1, 1)? + corner(-1, -1)?;
            m.set(a, b, v / (4.0 * h[a] * h[b]));
        }
    }
    Some(m)
}
