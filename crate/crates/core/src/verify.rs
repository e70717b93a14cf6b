//! Seeded property suites over the random corpus.
//!
//! Each suite draws its cases from `seed`, counts the cases whose defect
//! exceeds the suite threshold and reports the worst defect seen. Suites are
//! sized to finish in seconds.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alexandrov::{alexandrov_statistic, gradient_inverse_g, prox};
use crate::contact::{
    default_eps_schedule, global_contact_set, is_upper_contact_jet, jensen_to_slodkowski, jet_approximation, Jet,
    JetApproxOptions,
};
use crate::convex::{
    monotonicity_defect, shift_by_quadratic, subdifferential_contains, subdifferential_interval_1d, QuadraticPolynomial,
    SubgradientPair,
};
use crate::corpus::{gen_max_quadratics, rasterize, OracleFunction, QuadPiece};
use crate::error::{domain, Result};
use crate::grid::{dist, dist2, region_ball, GridDomain, GridFunction, IndexRegion};
use crate::legendre::{biconjugate_envelope, conjugate, conjugate_brute};
use crate::matrix::SymMatrix;
use crate::vertex::{
    contraction_defect, measure_chain, slab_of_paraboloids, tangent_supports_both, vertex_map, Paraboloid,
};

pub const SUITES: [&str; 11] = [
    "conjugate",
    "envelope",
    "subdiff",
    "shift",
    "slab",
    "contraction",
    "coverage",
    "jensen",
    "jets",
    "alexandrov",
    "prox",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: String,
    pub cases: usize,
    pub failures: usize,
    pub worst_defect: f64,
    pub seed: u64,
    /// Seconds.
    pub wall_time: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Case tally: `(cases, failures, worst defect)`.
struct Tally {
    cases: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self { cases: 0, failures: 0, worst: f64::NEG_INFINITY }
    }
    fn record(&mut self, defect: f64, limit: f64) {
        self.cases += 1;
        self.worst = self.worst.max(defect);
        if !(defect <= limit) {
            self.failures += 1;
        }
    }
}

pub fn run_suite(name: &str, seed: u64) -> Result<VerifyReport> {
    let t0 = Instant::now();
    let Some(k) = SUITES.iter().position(|s| *s == name) else {
        return domain(format!("unknown suite {name:?}; expected one of {}", SUITES.join(", ")));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(k as u64));
    let tally = match name {
        "conjugate" => conjugate_suite(&mut rng)?,
        "envelope" => envelope_suite(&mut rng)?,
        "subdiff" => subdiff_suite(&mut rng)?,
        "shift" => shift_suite(&mut rng)?,
        "slab" => slab_suite(&mut rng)?,
        "contraction" => contraction_suite(&mut rng)?,
        "coverage" => coverage_suite(&mut rng)?,
        "jensen" => jensen_suite(&mut rng)?,
        "jets" => jets_suite(&mut rng)?,
        "alexandrov" => alexandrov_suite(&mut rng)?,
        _ => prox_suite(&mut rng)?,
    };
    Ok(VerifyReport {
        suite: name.to_string(),
        cases: tally.cases,
        failures: tally.failures,
        worst_defect: tally.worst,
        seed,
        wall_time: t0.elapsed().as_secs_f64(),
    })
}

pub fn run_all(seed: u64) -> Result<Vec<VerifyReport>> {
    SUITES.iter().map(|s| run_suite(s, seed)).collect()
}

fn uni(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    rng.random_range(a..b)
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> SymMatrix {
    let m = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| uni(rng, -1.0, 1.0));
    let q = m.qr().q();
    let eig = nalgebra::DVector::from_fn(n, |_, _| uni(rng, lo, hi));
    SymMatrix::from_nalgebra(&(&q * nalgebra::DMatrix::from_diagonal(&eig) * q.transpose()))
}

fn draw(rng: &mut ChaCha8Rng, d: &GridDomain, pieces: usize, curv: (f64, f64)) -> Result<(OracleFunction, GridFunction)> {
    let f = gen_max_quadratics(rng.random(), d, pieces, curv)?;
    let u = rasterize(&f, d)?;
    Ok((f, u))
}

fn line(points: usize) -> GridDomain {
    GridDomain::line(-2.0, 2.0, points).expect("valid line")
}

fn square(points: usize) -> GridDomain {
    GridDomain::cube(2, -2.0, 2.0, points).expect("valid square")
}

/// Fast against direct conjugation, relative to `1 + |f*|`.
fn conjugate_suite(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new();
    for _ in 0..40 {
        let d = GridDomain::line(uni(rng, -3.0, -1.0), uni(rng, 1.0, 3.0), rng.random_range(2..=257))?;
        let vals: Vec<f64> = (0..d.len()).map(|_| uni(rng, -1.0, 1.0)).collect();
        let f = GridFunction::new(d, vals)?;
        let dual = GridDomain::line(uni(rng, -4.0, 0.0), uni(rng, 0.5, 4.0), rng.random_range(2..=300))?;
        let fast = conjugate(&f, &dual)?;
        let (slow, _) = conjugate_brute(&f, &dual)?;
        let scale = 1.0 + slow.sup_norm();
        let dev = fast.values().iter().zip(slow.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        t.record(dev / scale, 1e-12);
    }
    Ok(t)
}

/// `|f** - f| / (1 + |f|)` on convex corpus functions.
fn envelope_suite(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new();
    for k in 0..30 {
        let d = if k % 2 == 0 { line(161) } else { square(21) };
        let (_, u) = draw(rng, &d, 1 + k % 4, (0.0, 2.0))?;
        let env = biconjugate_envelope(&u)?;
        let dev = env.values().iter().zip(u.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        t.record(dev / (1.0 + u.sup_norm()), 1e-9);
    }
    Ok(t)
}

/// Negated monotonicity `-min <q - p, y - x>` over validated pairs.
fn subdiff_suite(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new();
    let d = line(201);
    for _ in 0..10 {
        let (_, u) = draw(rng, &d, 4, (0.0, 2.0))?;
        let mut pairs = Vec::new();
        while pairs.len() < 200 {
            let mut pick = || -> Result<(Vec<f64>, Vec<f64>)> {
                let x = d.node(rng.random_range(1..d.len() - 1));
                let iv = subdifferential_interval_1d(&u, x[0])?;
                let p = if iv.upper > iv.lower { uni(rng, iv.lower, iv.upper) } else { iv.lower };
                Ok((x, vec![p]))
            };
            let ((x, p), (y, q)) = (pick()?, pick()?);
            if subdifferential_contains(&u, &x, &p, 1e-9)? && subdifferential_contains(&u, &y, &q, 1e-9)? {
                pairs.push(SubgradientPair { x, p, y, q });
            }
        }
        t.record(-monotonicity_defect(&u, &pairs, 1e-9)?, 1e-9);
    }
    Ok(t)
}

/// Size of the symmetric difference between `C(u, X, A)` and `C(u + phi, X, A + P)`.
fn shift_suite(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new();
    for k in 0..30 {
        let d = if k % 2 == 0 { line(121) } else { square(17) };
        let n = d.dim();
        let (_, u) = draw(rng, &d, 3, (-1.0, 2.0))?;
        let p = random_sym(rng, n, -1.0, 1.0);
        let phi = QuadraticPolynomial::new(uni(rng, -1.0, 1.0), (0..n).map(|_| uni(rng, -1.0, 1.0)).collect(), p.clone())?;
        let a = random_sym(rng, n, -1.0, 2.0);
        let region = IndexRegion::full(&d);
        let base = global_contact_set(&u, &region, &a, 1e-9)?;
        let moved = global_contact_set(&shift_by_quadratic(&u, &phi)?, &region, &a.add(&p)?, 1e-9)?;
        let (x, y) = (base.members.members(), moved.members.members());
        let diff = x.iter().filter(|i| y.binary_search(i).is_err()).count()
            + y.iter().filter(|i| x.binary_search(i).is_err()).count();
        t.record(diff as f64, 0.0);
    }
    Ok(t)
}

/// Width error, plus one unit per misclassified probe.
fn slab_suite(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new();
    for _ in 0..100 {
        let n = rng.random_range(1..=3);
        let r = uni(rng, 0.2, 2.0);
        let p1 = Paraboloid::new((0..n).map(|_| uni(rng, -2.0, 2.0)).collect(), uni(rng, -1.0, 1.0), r)?;
        let p2 = Paraboloid::new((0..n).map(|_| uni(rng, -2.0, 2.0)).collect(), uni(rng, -1.0, 1.0), r)?;
        let s = slab_of_paraboloids(&p1, &p2)?;
        let mut defect = (s.width - dist(&p1.v, &p2.v)).abs();
        for _ in 0..5 {
            let y: Vec<f64> = (0..n).map(|_| uni(rng, -3.0, 3.0)).collect();
            let side: f64 = (0..n).map(|a| s.e[a] * (y[a] - p1.v[a])).sum::<f64>() - r * s.m;
            if side.abs() > 1e-6 && tangent_supports_both(&p1, &p2, &y)? != (side <= 0.0) {
                defect += 1.0;
            }
        }
        t.record(defect, 1e-12);
    }
    Ok(t)
}

/// Vertex-map contraction on the line, scaled by `1 + max(|x|, |v|)`.
fn contraction_suite(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new();
    let d = line(2001);
    for _ in 0..10 {
        let (f, u) = draw(rng, &d, 4, (0.1, 2.0))?;
        let r = uni(rng, 0.3, 1.0) / f.max_curvature();
        let pairs = vertex_map(&u, &IndexRegion::full(&d), r, 1e-9)?;
        if pairs.len() < 2 {
            continue;
        }
        let scale = 1.0 + pairs.iter().fold(0.0f64, |m, p| m.max(p.x[0].abs()).max(p.v[0].abs()));
        t.record(contraction_defect(&pairs)? / scale, 1e-8);
    }
    Ok(t)
}

/// Measure-chain shortfall in units of its slack, for `|y|^2 / 4` and random
/// `max_k <Q_k y, y> / 2` with `0 <= Q_k <= 0.9 I`.
fn coverage_suite(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new();
    let (rho, r, big_r) = (1.0, 0.25, 1.0);
    for k in 0..8 {
        let (n, pts) = if k < 6 { (1, 241) } else { (2, 33) };
        let d = GridDomain::cube(n, -1.2, 1.2, pts)?;
        let u = if k == 0 || k == 6 {
            GridFunction::from_fn(&d, |y| 0.25 * y.iter().map(|s| s * s).sum::<f64>())?
        } else {
            let pieces = (0..rng.random_range(1..=3))
                .map(|_| QuadPiece { center: vec![0.0; n], linear: vec![0.0; n], constant: 0.0, curvature: random_sym(rng, n, 0.0, 0.9) })
                .collect();
            rasterize(&OracleFunction::new(pieces)?, &d)?
        };
        let chain = measure_chain(&u, &vec![0.0; n], rho, r, big_r, 1e-9)?;
        t.record(chain.shortfall() / chain.slack, 1.0);
    }
    Ok(t)
}

/// Symmetric difference of `C(w + lambda/2 |y - x|^2, B, lambda I)` and `C(w, B, 0)`.
fn jensen_suite(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new();
    for k in 0..20 {
        let d = if k % 2 == 0 { line(161) } else { square(19) };
        let n = d.dim();
        let (_, w) = draw(rng, &d, 3, (-1.0, 2.0))?;
        let lambda = uni(rng, 0.1, 2.0);
        let x = d.node(d.nearest_node(&(0..n).map(|_| uni(rng, -0.8, 0.8)).collect::<Vec<_>>()));
        let ball = region_ball(&d, &x, uni(rng, 0.5, 1.2))?;
        let cu = global_contact_set(&jensen_to_slodkowski(&w, &x, lambda)?, &ball, &SymMatrix::scaled_identity(n, lambda), 1e-9)?;
        let cw = global_contact_set(&w, &ball, &SymMatrix::zeros(n), 1e-9)?;
        let (a, b) = (cu.members.members(), cw.members.members());
        let diff = a.iter().filter(|i| b.binary_search(i).is_err()).count()
            + b.iter().filter(|i| a.binary_search(i).is_err()).count();
        t.record(diff as f64, 0.0);
    }
    Ok(t)
}

/// Sandwich violations of the jet approximation: gradient drift beyond
/// `C (h + eps)` and Hessian eigenvalues outside `[-lambda, max eig A0 + eps]`.
fn jets_suite(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new();
    let d = line(401);
    let h = d.max_spacing();
    let opts = JetApproxOptions { rho0: 0.5, tol: 1e-9 };
    for _ in 0..10 {
        let (f, u) = draw(rng, &d, 3, (-0.5, 1.5))?;
        let lambda = f.declared_modulus;
        let c = 2.0 * (1.0 + f.pieces.iter().fold(0.0f64, |m, p| m.max(p.curvature.get(0, 0).abs())));
        let mut jet0 = None;
        for _ in 0..200 {
            let i = rng.random_range(0..d.len());
            let x = d.node(i);
            if d.boundary_distance(&x) < 0.6 {
                continue;
            }
            let oj = f.jet(&x);
            let (Some(g), Some(hs)) = (oj.gradient, oj.hessian) else { continue };
            let jet = Jet::at_node(&u, &x, g, hs.add_scaled_identity(0.1))?;
            if is_upper_contact_jet(&u, &jet, opts.rho0, false, opts.tol)? {
                jet0 = Some(jet);
                break;
            }
        }
        let Some(jet0) = jet0 else { continue };
        let e = region_ball(&d, &jet0.x, 0.4)?.filter(|i| d.is_interior(i));
        let approx = jet_approximation(&u, &jet0, &e, &default_eps_schedule(0.4, h), lambda, opts)?;
        let top = jet0.a.max_eigenvalue();
        let worst = approx.samples.iter().fold(0.0f64, |m, s| {
            let drift = dist(&s.p, &jet0.p) - c * (h + s.eps);
            let low = -lambda - 1e-6 - s.a.min_eigenvalue();
            let high = s.a.max_eigenvalue() - top - s.eps - 1e-6;
            m.max(drift).max(low).max(high)
        });
        t.record(worst, 0.0);
    }
    Ok(t)
}

/// `1 - fraction`: zero for quadratics, at most 0.02 for two-piece maxima at `h = 0.01`.
fn alexandrov_suite(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new();
    let d = line(401);
    let h = d.max_spacing();
    let radii = [h, 2.0 * h, 3.0 * h];
    for k in 0..6 {
        let (f, u) = draw(rng, &d, if k < 2 { 1 } else { 2 }, (-0.5, 1.5))?;
        let rep = alexandrov_statistic(&u, f.declared_modulus, 1e-6, &radii)?;
        // two pieces cross at most twice; each crossing spoils the nodes within 3h
        let spoiled = if k < 2 { 0.0 } else { 2.0 * 7.0 / rep.nodes.len() as f64 };
        t.record(1.0 - rep.fraction, spoiled);
    }
    Ok(t)
}

/// Prox optimality over the whole grid, and `G` contraction in units of `h`
/// against the allowed `2h`.
fn prox_suite(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new();
    let d = line(161);
    let dual = GridDomain::line(-3.0, 3.0, 61)?;
    let h = d.max_spacing();
    for _ in 0..10 {
        let (_, u) = draw(rng, &d, 3, (0.0, 2.0))?;
        let r = uni(rng, 0.2, 1.5);
        let mut gap = f64::NEG_INFINITY;
        for j in (0..dual.len()).step_by(6) {
            let y = dual.node(j);
            let pr = prox(&u, &y, r)?;
            let best = r * u.at(pr.node) + 0.5 * dist2(&pr.x, &y);
            let rival = (0..d.len()).map(|i| r * u.at(i) + 0.5 * dist2(&d.node(i), &y)).fold(f64::INFINITY, f64::min);
            gap = gap.max(best - rival);
        }
        t.record(gap, 0.0);
        let g = gradient_inverse_g(&u, r, &dual)?;
        t.record(g.contraction_defect() / h, 2.0);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes() {
        for rep in run_all(1).unwrap() {
            assert!(rep.passed(), "{rep:?}");
            assert!(rep.cases > 0, "{rep:?}");
        }
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(run_suite("nope", 0).is_err());
    }

    #[test]
    fn reports_are_reproducible() {
        let a = run_suite("slab", 7).unwrap();
        let b = run_suite("slab", 7).unwrap();
        assert_eq!((a.cases, a.failures, a.worst_defect), (b.cases, b.failures, b.worst_defect));
    }
}
