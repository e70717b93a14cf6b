//! Deterministic test subjects with analytic derivative oracles.
//!
//! An [`OracleFunction`] is a pointwise maximum of quadratic pieces. Every
//! piece with curvature `>= -lambda I` keeps the maximum `lambda`-quasi-convex,
//! i.e. `u + (lambda/2)|x|^2` convex.
//!
//! # Draw order
//!
//! [`gen_max_quadratics`] seeds a ChaCha8 generator with `seed` and, for each
//! piece in turn, draws (all uniform):
//!
//! 1. `dim` centre coordinates in `[min_i, max_i]`,
//! 2. `dim` linear coefficients in `[-1, 1]`,
//! 3. one constant in `[-0.5, 0.5]`,
//! 4. `dim` curvature eigenvalues in `[lo, hi]`,
//! 5. `dim(dim-1)/2` Givens angles in `[0, pi)`, applied for axis pairs
//!    `(i, j)`, `i < j`, in lexicographic order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::grid::{dot, GridDomain, GridFunction};
use crate::matrix::SymMatrix;

/// A piece is "the unique maximiser" when it beats every other piece by
/// more than this, relative to `1 + |value|`.
pub const ACTIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadPiece {
    pub center: Vec<f64>,
    pub linear: Vec<f64>,
    #[serde(rename = "const")]
    pub constant: f64,
    pub curvature: SymMatrix,
}

impl QuadPiece {
    /// `c/2 |x - center|^2`.
    pub fn isotropic(center: Vec<f64>, c: f64) -> Self {
        let n = center.len();
        Self { center, linear: vec![0.0; n], constant: 0.0, curvature: SymMatrix::scaled_identity(n, c) }
    }

    /// The affine function `<p, x>`.
    pub fn affine(p: Vec<f64>) -> Self {
        let n = p.len();
        Self { center: vec![0.0; n], linear: p, constant: 0.0, curvature: SymMatrix::zeros(n) }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.constant + dot(&self.linear, &d) + 0.5 * self.curvature.quad_form(&d)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let cd = self.curvature.apply(&d);
        self.linear.iter().zip(cd).map(|(l, c)| l + c).collect()
    }
}

/// Pointwise maximum of quadratic pieces with a declared quasi-convexity modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFunction {
    pub pieces: Vec<QuadPiece>,
    pub declared_modulus: f64,
}

/// Value and, away from kinks, derivatives of an [`OracleFunction`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleJet {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
    pub hessian: Option<SymMatrix>,
    pub active_pieces: usize,
}

impl OracleFunction {
    /// Builds from pieces, setting the modulus to `max(0, -min curvature eigenvalue)`.
    pub fn new(pieces: Vec<QuadPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return domain("an oracle function needs at least one piece");
        }
        let n = pieces[0].center.len();
        if pieces.iter().any(|p| p.center.len() != n || p.linear.len() != n || p.curvature.dim() != n) {
            return domain("pieces disagree in dimension");
        }
        let declared_modulus = pieces
            .iter()
            .map(|p| -p.curvature.min_eigenvalue())
            .fold(0.0f64, f64::max);
        Ok(Self { pieces, declared_modulus })
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].center.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.pieces.iter().map(|p| p.value(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest curvature eigenvalue over all pieces.
    pub fn max_curvature(&self) -> f64 {
        self.pieces.iter().map(|p| p.curvature.max_eigenvalue()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn jet(&self, x: &[f64]) -> OracleJet {
        oracle_jet(self, x)
    }
}

/// Random maximum of `pieces` quadratics with curvature eigenvalues in `curvature_range`.
pub fn gen_max_quadratics(
    seed: u64,
    domain: &GridDomain,
    pieces: usize,
    curvature_range: (f64, f64),
) -> Result<OracleFunction> {
    let (lo, hi) = curvature_range;
    if pieces == 0 {
        return self::domain("need at least one piece");
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return self::domain("curvature range must be finite with lo <= hi");
    }
    let n = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |a: f64, b: f64| if a == b { a } else { rng.random_range(a..b) };
    let mut out = Vec::with_capacity(pieces);
    let mut min_eig = f64::INFINITY;
    for _ in 0..pieces {
        let center: Vec<f64> = (0..n).map(|i| uniform(domain.mins()[i], domain.maxs()[i])).collect();
        let linear: Vec<f64> = (0..n).map(|_| uniform(-1.0, 1.0)).collect();
        let constant = uniform(-0.5, 0.5);
        let eig: Vec<f64> = (0..n).map(|_| uniform(lo, hi)).collect();
        min_eig = eig.iter().copied().fold(min_eig, f64::min);
        let mut q = nalgebra::DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let t = uniform(0.0, std::f64::consts::PI);
                let mut g = nalgebra::DMatrix::<f64>::identity(n, n);
                let (s, c) = t.sin_cos();
                g[(i, i)] = c;
                g[(j, j)] = c;
                g[(i, j)] = -s;
                g[(j, i)] = s;
                q = g * q;
            }
        }
        let diag = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig.clone()));
        let mut curvature = SymMatrix::from_nalgebra(&(q.transpose() * diag * q));
        if n == 1 {
            curvature = SymMatrix::scaled_identity(1, eig[0]);
        }
        out.push(QuadPiece { center, linear, constant, curvature });
    }
    let mut f = OracleFunction::new(out)?;
    // drawn eigenvalues, widened by any round-off from the rotation
    f.declared_modulus = f.declared_modulus.max(-min_eig).max(0.0);
    Ok(f)
}

/// Samples `f` at every node of `domain`.
pub fn rasterize(f: &OracleFunction, domain: &GridDomain) -> Result<GridFunction> {
    GridFunction::from_fn(domain, |x| f.value(x))
}

/// Value, and the active piece's derivatives when it is the unique maximiser.
pub fn oracle_jet(f: &OracleFunction, x: &[f64]) -> OracleJet {
    let vals: Vec<f64> = f.pieces.iter().map(|p| p.value(x)).collect();
    let (best, value) = vals
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let gap = ACTIVITY_TOL * (1.0 + value.abs());
    let active_pieces = vals.iter().filter(|&&v| v >= value - gap).count();
    if active_pieces == 1 {
        let p = &f.pieces[best];
        OracleJet {
            value,
            gradient: Some(p.gradient(x)),
            hessian: Some(p.curvature.clone()),
            active_pieces,
        }
    } else {
        OracleJet { value, gradient: None, hessian: None, active_pieces }
    }
}
