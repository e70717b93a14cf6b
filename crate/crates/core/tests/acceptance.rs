//! Acceptance criteria, one line each. Runs as a plain binary so the report
//! always reaches stdout; exits non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use quasiconvex::alexandrov::{
    alexandrov_statistic, expansive_defect, gradient_inverse_g, hessian_via_g, prox_potential, GraphPoint,
};
use quasiconvex::contact::{
    global_contact_set, is_upper_contact_jet, jensen_to_slodkowski, jet_approximation, default_eps_schedule, Jet,
    JetApproxOptions,
};
use quasiconvex::convex::{
    lipschitz_constant, monotonicity_defect, shift_by_quadratic, subdifferential_contains, subdifferential_interval_1d,
    QuadraticPolynomial, SubgradientPair,
};
use quasiconvex::corpus::{gen_max_quadratics, rasterize, OracleFunction, QuadPiece};
use quasiconvex::grid::{cell_measure, dist, region_ball};
use quasiconvex::legendre::{biconjugate_envelope, conjugate};
use quasiconvex::vertex::{
    contraction_defect, coverage_check, measure_chain, slab_of_paraboloids, tangent_supports_both, vertex_map,
    Paraboloid,
};
use quasiconvex::{GridDomain, GridFunction, IndexRegion, SymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uni(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    rng.random_range(a..b)
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> SymMatrix {
    // Q diag(eig) Q^T with Q from Gram-Schmidt of a random matrix
    let m = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| uni(rng, -1.0, 1.0));
    let q = m.qr().q();
    let eig = nalgebra::DVector::from_fn(n, |_, _| uni(rng, lo, hi));
    SymMatrix::from_nalgebra(&(&q * nalgebra::DMatrix::from_diagonal(&eig) * q.transpose()))
}

fn corpus(seed: u64, d: &GridDomain, pieces: usize, curv: (f64, f64)) -> (OracleFunction, GridFunction) {
    let f = gen_max_quadratics(seed, d, pieces, curv).unwrap();
    let u = rasterize(&f, d).unwrap();
    (f, u)
}

fn sup(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `max_i (x_i y - f_i)` by direct search.
fn brute_conjugate(xs: &[f64], fs: &[f64], ys: &[f64]) -> Vec<f64> {
    ys.iter()
        .map(|&y| xs.iter().zip(fs).map(|(&x, &f)| x * y - f).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Lower hull of `(x_i, f_i)` (Andrew's monotone chain), interpolated at every `x_i`.
fn chain_hull(xs: &[f64], fs: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (xs[b] - xs[a]) * (fs[i] - fs[a]) - (fs[b] - fs[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = vec![0.0; xs.len()];
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        for i in a..=b {
            let t = (xs[i] - xs[a]) / (xs[b] - xs[a]);
            out[i] = fs[a] + t * (fs[b] - fs[a]);
        }
    }
    if hull.len() == 1 {
        out[hull[0]] = fs[hull[0]];
    }
    out
}

/// Members of the type-`a` contact set of `u` on a 1-D region, by comparing
/// every left chord of `q_a - u` with every right chord.
fn brute_contact_1d(u: &GridFunction, region: &IndexRegion, a: f64, tol: f64) -> Vec<usize> {
    let d = u.domain();
    let m = region.members();
    let xs: Vec<f64> = m.iter().map(|&i| d.node(i)[0]).collect();
    let w: Vec<f64> = m.iter().zip(&xs).map(|(&i, &x)| 0.5 * a * x * x - u.at(i)).collect();
    let t = tol * (1.0 + m.iter().fold(0.0f64, |s, &i| s.max(u.at(i).abs())));
    (0..m.len())
        .filter(|&k| {
            let left = (0..k).map(|j| (w[k] - t - w[j]) / (xs[k] - xs[j])).fold(f64::NEG_INFINITY, f64::max);
            let right = (k + 1..m.len()).map(|j| (w[j] - w[k] + t) / (xs[j] - xs[k])).fold(f64::INFINITY, f64::min);
            left <= right
        })
        .map(|k| m[k])
        .collect()
}

/// A node at least `margin` inside the box where a single piece is active,
/// with that piece's gradient and Hessian.
fn smooth_node(f: &OracleFunction, d: &GridDomain, rng: &mut ChaCha8Rng, margin: f64) -> Option<(usize, Vec<f64>, SymMatrix)> {
    for _ in 0..500 {
        let i = rng.random_range(0..d.len());
        let x = d.node(i);
        if d.boundary_distance(&x) < margin {
            continue;
        }
        let jet = f.jet(&x);
        if let (Some(g), Some(h)) = (jet.gradient, jet.hessian) {
            return Some((i, g, h));
        }
    }
    None
}

fn c1_conjugate_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..=257);
        let lo = uni(&mut rng, -3.0, 0.0);
        let d = GridDomain::line(lo, lo + uni(&mut rng, 0.5, 4.0), n).unwrap();
        let bump = uni(&mut rng, -1.0, 2.0);
        let vals: Vec<f64> = d.axis_coords(0).iter().map(|x| bump * x * x + rng.random_range(-1.0..1.0)).collect();
        let f = GridFunction::new(d.clone(), vals).unwrap();
        let m = rng.random_range(1..=300);
        let ylo = uni(&mut rng, -5.0, 0.0);
        let dual = GridDomain::line(ylo, ylo + uni(&mut rng, 0.1, 10.0), m.max(2)).unwrap();
        let fast = conjugate(&f, &dual).unwrap();
        let xs = d.axis_coords(0);
        let ys = dual.axis_coords(0);
        let slow = brute_conjugate(&xs, f.values(), &ys);
        let scale = 1.0 + sup(&slow);
        let dev = fast.values().iter().zip(&slow).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(dev / scale);
    }
    let secs = t0.elapsed().as_secs_f64();
    (worst <= 1e-12 && secs < 10.0, format!("max relative deviation {worst:.2e}, {secs:.2} s"))
}

fn c2_involution() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let d = if seed % 2 == 0 {
            GridDomain::line(-2.0, 2.0, 101 + 2 * seed as usize).unwrap()
        } else {
            GridDomain::cube(2, -2.0, 2.0, 21 + (seed as usize % 13)).unwrap()
        };
        let (_, u) = corpus(seed, &d, 1 + seed as usize % 5, (0.0, 2.0));
        let env = biconjugate_envelope(&u).unwrap();
        let dev = env.values().iter().zip(u.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(dev / (1.0 + u.sup_norm()));
    }
    let d = GridDomain::line(-2.0, 2.0, 401).unwrap();
    let f = GridFunction::from_fn(&d, |x| ((x[0] + 1.0).powi(2)).min((x[0] - 1.0).powi(2))).unwrap();
    let env = biconjugate_envelope(&f).unwrap();
    let oracle = chain_hull(&d.axis_coords(0), f.values());
    let well = env.values().iter().zip(&oracle).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    (worst <= 1e-9 && well <= 1e-9, format!("corpus max scaled |f** - f| {worst:.2e}, double well vs hull oracle {well:.2e}"))
}

fn c3_subdifferential() -> Outcome {
    let d = GridDomain::line(-2.0, 2.0, 401).unwrap();
    let abs = GridFunction::from_fn(&d, |x| x[0].abs()).unwrap();
    let iv = subdifferential_interval_1d(&abs, 0.0).unwrap();
    let exact = iv.lower == -1.0 && iv.upper == 1.0;

    let mut rng = rng(303);
    let d = GridDomain::line(-2.0, 2.0, 201).unwrap();
    let mut mono = f64::INFINITY;
    let mut count = 0usize;
    let mut rejected = 0usize;
    for seed in 0..20u64 {
        let (_, u) = corpus(1000 + seed, &d, 4, (0.0, 2.0));
        let mut pairs = Vec::new();
        let draw = |rng: &mut ChaCha8Rng| {
            let i = rng.random_range(1..d.len() - 1);
            let x = d.node(i);
            let iv = subdifferential_interval_1d(&u, x[0]).unwrap();
            let p = if iv.upper > iv.lower { rng.random_range(iv.lower..=iv.upper) } else { iv.lower };
            (x, vec![p])
        };
        while pairs.len() < 500 {
            let (x, p) = draw(&mut rng);
            let (y, q) = draw(&mut rng);
            if subdifferential_contains(&u, &x, &p, 1e-9).unwrap() && subdifferential_contains(&u, &y, &q, 1e-9).unwrap() {
                pairs.push(SubgradientPair { x, p, y, q });
            } else {
                rejected += 1;
            }
        }
        count += pairs.len();
        mono = mono.min(monotonicity_defect(&u, &pairs, 1e-9).unwrap());
    }

    let mut lip_violations = 0usize;
    let mut lip_pairs = 0usize;
    for seed in 0..50u64 {
        let d = if seed % 2 == 0 {
            GridDomain::line(-2.0, 2.0, 201).unwrap()
        } else {
            GridDomain::cube(2, -2.0, 2.0, 31).unwrap()
        };
        let (_, u) = corpus(2000 + seed, &d, 3, (0.0, 2.0));
        let center: Vec<f64> = (0..d.dim()).map(|_| uni(&mut rng, -0.5, 0.5)).collect();
        let region = region_ball(&d, &center, 1.0).unwrap();
        let c = lipschitz_constant(&u, &region).unwrap();
        let m = region.members();
        for (k, &i) in m.iter().enumerate() {
            for &j in &m[k + 1..] {
                lip_pairs += 1;
                let lhs = (u.at(j) - u.at(i)).abs();
                if lhs > c * dist(&d.node(i), &d.node(j)) * (1.0 + 1e-12) + 1e-12 {
                    lip_violations += 1;
                }
            }
        }
    }
    let ok = exact && mono >= -1e-9 && count >= 10_000 && lip_violations == 0;
    (
        ok,
        format!(
            "|x| at 0 -> [{}, {}]; min monotonicity {mono:.2e} over {count} pairs ({rejected} draws rejected); Lipschitz violations {lip_violations}/{lip_pairs}",
            iv.lower, iv.upper
        ),
    )
}

fn c4_shift_lemma() -> Outcome {
    let mut rng = rng(404);
    let mut mismatches = 0usize;
    let mut oracle_mismatches = 0usize;
    let mut total_members = 0usize;
    for k in 0..100u64 {
        let one_d = k % 2 == 0;
        let d = if one_d { GridDomain::line(-2.0, 2.0, 161).unwrap() } else { GridDomain::cube(2, -2.0, 2.0, 21).unwrap() };
        let n = d.dim();
        let (_, u) = corpus(4000 + k, &d, 3, (-1.0, 2.0));
        let p = random_sym(&mut rng, n, -1.0, 1.0);
        let phi = QuadraticPolynomial::new(uni(&mut rng, -1.0, 1.0), (0..n).map(|_| uni(&mut rng, -1.0, 1.0)).collect(), p.clone()).unwrap();
        let a = random_sym(&mut rng, n, -1.0, 2.0);
        let region = if k % 4 < 2 {
            IndexRegion::full(&d)
        } else {
            let c: Vec<f64> = (0..n).map(|_| uni(&mut rng, -0.5, 0.5)).collect();
            region_ball(&d, &c, uni(&mut rng, 0.8, 1.4)).unwrap()
        };
        let base = global_contact_set(&u, &region, &a, 1e-9).unwrap();
        let shifted = global_contact_set(&shift_by_quadratic(&u, &phi).unwrap(), &region, &a.add(&p).unwrap(), 1e-9).unwrap();
        total_members += base.len();
        if base.members.members() != shifted.members.members() {
            mismatches += 1;
        }
        if one_d && brute_contact_1d(&u, &region, a.get(0, 0), 1e-9) != base.members.members() {
            oracle_mismatches += 1;
        }
    }
    (
        mismatches == 0 && oracle_mismatches == 0,
        format!("{mismatches}/100 member-set mismatches, {oracle_mismatches}/50 against the 1-D chord oracle ({total_members} members total)"),
    )
}

fn c5_slab() -> Outcome {
    let mut rng = rng(505);
    let paraboloids = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..=3);
        let r = uni(rng, 0.2, 2.0);
        let v1: Vec<f64> = (0..n).map(|_| uni(rng, -2.0, 2.0)).collect();
        let v2: Vec<f64> = (0..n).map(|_| uni(rng, -2.0, 2.0)).collect();
        let p1 = Paraboloid::new(v1, uni(rng, -1.0, 1.0), r).unwrap();
        let p2 = Paraboloid::new(v2, uni(rng, -1.0, 1.0), r).unwrap();
        (p1, p2)
    };
    let mut width_err = 0.0f64;
    for _ in 0..100 {
        let (p1, p2) = paraboloids(&mut rng);
        let s = slab_of_paraboloids(&p1, &p2).unwrap();
        width_err = width_err.max((s.width - dist(&p1.v, &p2.v)).abs());
    }
    let mut wrong = 0usize;
    let mut skipped = 0usize;
    for _ in 0..500 {
        let (p1, p2) = paraboloids(&mut rng);
        let s = slab_of_paraboloids(&p1, &p2).unwrap();
        let y: Vec<f64> = (0..p1.v.len()).map(|_| uni(&mut rng, -3.0, 3.0)).collect();
        let side: f64 = s.e.iter().zip(y.iter().zip(&p1.v)).map(|(e, (a, b))| e * (a - b)).sum::<f64>() - p1.r * s.m;
        if side.abs() <= 1e-6 {
            skipped += 1;
            continue;
        }
        if tangent_supports_both(&p1, &p2, &y).unwrap() != (side <= 0.0) {
            wrong += 1;
        }
    }
    (
        width_err <= 1e-12 && wrong == 0,
        format!("max |width - |v1 - v2|| {width_err:.2e}; {wrong} misclassified of {} probes ({skipped} within margin)", 500 - skipped),
    )
}

fn c6_contraction() -> Outcome {
    let t0 = Instant::now();
    let d = GridDomain::line(-2.0, 2.0, 10_001).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut pairs_total = 0usize;
    let mut used = 0usize;
    for seed in 0..50u64 {
        let (f, u) = corpus(6000 + seed, &d, 4, (0.1, 2.0));
        let r = if seed % 2 == 0 { 1.0 } else { 0.5 } / f.max_curvature();
        let pairs = vertex_map(&u, &IndexRegion::full(&d), r, 1e-9).unwrap();
        if pairs.len() < 2 {
            continue;
        }
        used += 1;
        pairs_total += pairs.len();
        let scale = 1.0 + pairs.iter().fold(0.0f64, |m, p| m.max(p.x[0].abs()).max(p.v[0].abs()));
        worst = worst.max(contraction_defect(&pairs).unwrap() / scale);
    }
    let secs = t0.elapsed().as_secs_f64();
    (
        worst <= 1e-8 && secs < 30.0 && used > 0,
        format!("N = {}: max scaled defect {worst:.2e} over {pairs_total} pairs from {used} functions, {secs:.1} s", d.len()),
    )
}

/// Grid-level contraction in the plane, reported but not gated.
fn c6_planar_info() -> String {
    let d = GridDomain::cube(2, -2.0, 2.0, 41).unwrap();
    let (mut all, mut inner) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for seed in 0..10u64 {
        let (f, u) = corpus(6500 + seed, &d, 4, (0.1, 2.0));
        let pairs = vertex_map(&u, &IndexRegion::full(&d), 0.8 / f.max_curvature(), 1e-9).unwrap();
        if pairs.len() >= 2 {
            all = all.max(contraction_defect(&pairs).unwrap());
        }
        let interior: Vec<_> = pairs.into_iter().filter(|p| d.is_interior(p.node)).collect();
        if interior.len() >= 2 {
            inner = inner.max(contraction_defect(&interior).unwrap());
        }
    }
    format!("2-D, h = {}: max defect {all:.2e} over all contact pairs, {inner:.2e} over interior nodes", d.max_spacing())
}

/// `max_k <Q_k y, y> / 2` with `0 <= Q_k <= 0.9 I`.
fn normalized_quadratics(rng: &mut ChaCha8Rng, n: usize) -> OracleFunction {
    let k = rng.random_range(1..=3);
    let pieces = (0..k)
        .map(|_| QuadPiece { center: vec![0.0; n], linear: vec![0.0; n], constant: 0.0, curvature: random_sym(rng, n, 0.0, 0.9) })
        .collect();
    OracleFunction::new(pieces).unwrap()
}

fn c7_coverage() -> Outcome {
    let (rho, r, big_r, tol) = (1.0, 0.25, 1.0, 1e-9);
    let mut ok = true;
    let mut notes = Vec::new();
    for (n, pts) in [(1usize, 301usize), (2, 97)] {
        let d = GridDomain::cube(n, -1.2, 1.2, pts).unwrap();
        let h = d.max_spacing();
        let u = GridFunction::from_fn(&d, |y| 0.25 * y.iter().map(|t| t * t).sum::<f64>()).unwrap();
        let x0 = vec![0.0; n];
        let cov = coverage_check(&u, &x0, rho, r, big_r, tol).unwrap();
        let missed = cov.failures.iter().filter(|&&j| dist(&d.node(j), &x0) < 0.5 - h).count();
        let chain = measure_chain(&u, &x0, rho, r, big_r, tol).unwrap();
        ok &= missed == 0 && chain.holds();
        notes.push(format!(
            "n={n}: {missed} missed of {} probes, chain {:.4} <= {:.4} <= {:.4} (shortfall {:.1e}, slack {:.1e})",
            cov.probes.len(),
            chain.lhs,
            chain.mid,
            chain.rhs,
            chain.shortfall(),
            chain.slack
        ));
    }
    let mut rng = rng(707);
    let mut held = 0usize;
    let mut grew = 0usize;
    for k in 0..20 {
        let (n, pts) = if k < 10 { (1usize, 121usize) } else { (2, 25) };
        let f = normalized_quadratics(&mut rng, n);
        let x0 = vec![0.0; n];
        let mut shortfalls = Vec::new();
        for p in [pts, 2 * pts - 1] {
            let d = GridDomain::cube(n, -1.2, 1.2, p).unwrap();
            let u = rasterize(&f, &d).unwrap();
            let chain = measure_chain(&u, &x0, rho, r, big_r, tol).unwrap();
            held += chain.holds() as usize;
            shortfalls.push((chain.shortfall(), chain.slack));
        }
        if shortfalls[1].0 > shortfalls[0].0 + 1e-12 {
            grew += 1;
        }
    }
    ok &= held == 40 && grew == 0;
    notes.push(format!("random normalized functions: chain held {held}/40, shortfall grew on refinement {grew}/20"));
    (ok, notes.join("; "))
}

fn c8_jensen_slodkowski() -> Outcome {
    let mut rng = rng(808);
    let mut mismatches = 0usize;
    let mut members = 0usize;
    for k in 0..50u64 {
        let d = if k % 2 == 0 { GridDomain::line(-2.0, 2.0, 201).unwrap() } else { GridDomain::cube(2, -2.0, 2.0, 25).unwrap() };
        let n = d.dim();
        let (_, w) = corpus(8000 + k, &d, 3, (-1.0, 2.0));
        let lambda = uni(&mut rng, 0.1, 2.0);
        let x = d.node(d.nearest_node(&(0..n).map(|_| uni(&mut rng, -0.8, 0.8)).collect::<Vec<_>>()));
        let ball = region_ball(&d, &x, uni(&mut rng, 0.5, 1.2)).unwrap();
        let u = jensen_to_slodkowski(&w, &x, lambda).unwrap();
        let cu = global_contact_set(&u, &ball, &SymMatrix::scaled_identity(n, lambda), 1e-9).unwrap();
        let cw = global_contact_set(&w, &ball, &SymMatrix::zeros(n), 1e-9).unwrap();
        members += cw.len();
        if cu.members.members() != cw.members.members() {
            mismatches += 1;
        }
    }
    (mismatches == 0, format!("{mismatches}/50 member-set mismatches ({members} members total)"))
}

fn c9_positivity() -> Outcome {
    let mut rng = rng(909);
    let mut empty = 0usize;
    let mut tested = 0usize;
    let mut skipped = 0usize;
    let rho0 = 0.4;
    for k in 0..50u64 {
        let d = if k % 2 == 0 { GridDomain::line(-2.0, 2.0, 401).unwrap() } else { GridDomain::cube(2, -2.0, 2.0, 61).unwrap() };
        let n = d.dim();
        let (f, u) = corpus(9000 + k, &d, 3, (-1.0, 2.0));
        let mut jet = None;
        for _ in 0..50 {
            let Some((i, g, h)) = smooth_node(&f, &d, &mut rng, rho0) else { break };
            let cand = Jet::at_node(&u, &d.node(i), g, h.add_scaled_identity(0.5)).unwrap();
            if is_upper_contact_jet(&u, &cand, rho0, true, 1e-9).unwrap() {
                jet = Some(cand);
                break;
            }
        }
        let Some(jet) = jet else {
            skipped += 1;
            continue;
        };
        assert_eq!(jet.x.len(), n);
        for j in 0..5 {
            let ball = region_ball(&d, &jet.x, rho0 / 2f64.powi(j)).unwrap();
            let c = global_contact_set(&u, &ball, &jet.a, 1e-9).unwrap();
            tested += 1;
            if c.is_empty() || !(cell_measure(&c.members) > 0.0) {
                empty += 1;
            }
        }
    }
    (
        empty == 0 && skipped == 0,
        format!("{empty} empty contact sets over {tested} balls; {skipped} functions without a strict jet"),
    )
}

fn c10_jet_approximation() -> Outcome {
    let mut rng = rng(1010);
    let mut bad = 0usize;
    let mut samples = 0usize;
    let mut exhausted = 0usize;
    let mut instances = 0usize;
    let mut worst_ratio = 0.0f64;
    for k in 0..30u64 {
        let d = if k % 2 == 0 { GridDomain::line(-2.0, 2.0, 401).unwrap() } else { GridDomain::cube(2, -2.0, 2.0, 41).unwrap() };
        let h = d.max_spacing();
        let (f, u) = corpus(10_000 + k, &d, 3, (-0.5, 1.5));
        let lambda = f.declared_modulus;
        let c_bound = 2.0 * (1.0 + f.pieces.iter().fold(0.0f64, |m, p| m.max(p.curvature.max_eigenvalue().abs()).max(p.curvature.min_eigenvalue().abs())));
        let opts = JetApproxOptions { rho0: 0.5, tol: 1e-9 };
        let mut found = None;
        for _ in 0..50 {
            let Some((i, g, hess)) = smooth_node(&f, &d, &mut rng, 0.6) else { break };
            let jet = Jet::at_node(&u, &d.node(i), g, hess.add_scaled_identity(0.1)).unwrap();
            if is_upper_contact_jet(&u, &jet, opts.rho0, false, opts.tol).unwrap() {
                found = Some(jet);
                break;
            }
        }
        let Some(jet0) = found else { continue };
        instances += 1;
        let e = region_ball(&d, &jet0.x, 0.4).unwrap().filter(|i| d.is_interior(i));
        let schedule = default_eps_schedule(0.4, h);
        let approx = jet_approximation(&u, &jet0, &e, &schedule, lambda, opts).unwrap();
        exhausted += approx.resolution_exhausted as usize;
        let top = jet0.a.max_eigenvalue();
        for s in &approx.samples {
            samples += 1;
            let dp = dist(&s.p, &jet0.p);
            worst_ratio = worst_ratio.max(dp / (h + s.eps));
            let (lo, hi) = (s.a.min_eigenvalue(), s.a.max_eigenvalue());
            if dp > c_bound * (h + s.eps) || lo < -lambda - 1e-6 || hi > top + s.eps + 1e-6 {
                bad += 1;
            }
        }
    }
    (
        bad == 0 && instances == 30 && samples > 0,
        format!(
            "{instances} instances, {samples} samples, {bad} outside the sandwich; max |p_j - p0| / (h + eps_j) = {worst_ratio:.3}; {exhausted} schedules hit grid resolution"
        ),
    )
}

fn c11_alexandrov() -> Outcome {
    let mut rng = rng(1111);
    let d = GridDomain::cube(2, -1.0, 1.0, 101).unwrap();
    let q = random_sym(&mut rng, 2, -1.0, 2.0);
    let b = [uni(&mut rng, -1.0, 1.0), uni(&mut rng, -1.0, 1.0)];
    let quad = GridFunction::from_fn(&d, |y| 0.5 * q.quad_form(y) + b[0] * y[0] + b[1] * y[1]).unwrap();
    let h = d.max_spacing();
    let exact = alexandrov_statistic(&quad, 1.0, 1e-6, &[h, 2.0 * h, 3.0 * h]).unwrap().fraction;

    let mut min_fraction = f64::INFINITY;
    let mut ratios = Vec::new();
    for seed in 0..10u64 {
        let coarse = GridDomain::line(-2.0, 2.0, 401).unwrap();
        let fine = GridDomain::line(-2.0, 2.0, 801).unwrap();
        let f = gen_max_quadratics(11_000 + seed, &coarse, 2, (-0.5, 1.5)).unwrap();
        let lambda = f.declared_modulus;
        let mut failing = Vec::new();
        for d in [&coarse, &fine] {
            let u = rasterize(&f, d).unwrap();
            let h = d.max_spacing();
            let rep = alexandrov_statistic(&u, lambda, 1e-6, &[h, 2.0 * h, 3.0 * h]).unwrap();
            failing.push(1.0 - rep.fraction);
            if d.len() == 401 {
                min_fraction = min_fraction.min(rep.fraction);
            }
        }
        if failing[0] > 0.0 {
            ratios.push(failing[0] / failing[1]);
        }
    }
    let ratio_ok = !ratios.is_empty() && ratios.iter().all(|&r| (1.5..=3.0).contains(&r));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    (
        exact == 1.0 && min_fraction >= 0.98 && ratio_ok,
        format!("quadratic fraction {exact}; corpus min fraction at h = 0.01: {min_fraction:.4}; failing ratios h/(h/2): [{}]", shown.join(", ")),
    )
}

fn c12_prox_maps() -> Outcome {
    let mut rng = rng(1212);
    let d = GridDomain::line(-2.0, 2.0, 201).unwrap();
    let mut expansive = f64::NEG_INFINITY;
    let mut pair_count = 0usize;
    for seed in 0..20u64 {
        let (_, u) = corpus(12_000 + seed, &d, 4, (0.0, 2.0));
        let r = uni(&mut rng, 0.2, 1.5);
        let f = prox_potential(&u, r).unwrap();
        let mut graph: Vec<GraphPoint> = Vec::new();
        while graph.len() < 60 {
            let i = rng.random_range(1..d.len() - 1);
            let x = d.node(i);
            let iv = subdifferential_interval_1d(&u, x[0]).unwrap();
            let p = if iv.upper > iv.lower { rng.random_range(iv.lower..=iv.upper) } else { iv.lower };
            let y = vec![x[0] + r * p];
            if subdifferential_contains(&f, &x, &y, 1e-9).unwrap() {
                graph.push((x, y));
            }
        }
        let pairs: Vec<(GraphPoint, GraphPoint)> =
            graph.chunks(2).map(|c| (c[0].clone(), c[1].clone())).filter(|(a, b)| a.0 != b.0).collect();
        pair_count += pairs.len();
        expansive = expansive.max(expansive_defect(&f, &pairs, 1e-9).unwrap());
    }

    // worst G defect in units of h, for the line and the plane
    let mut g_worst = [f64::NEG_INFINITY; 2];
    for seed in 0..50u64 {
        let k = (seed % 2) as usize;
        let (d, dual) = if k == 0 {
            (GridDomain::line(-2.0, 2.0, 161).unwrap(), GridDomain::line(-3.0, 3.0, 97).unwrap())
        } else {
            (GridDomain::cube(2, -2.0, 2.0, 21).unwrap(), GridDomain::cube(2, -3.0, 3.0, 17).unwrap())
        };
        let (_, u) = corpus(12_500 + seed, &d, 3, (0.0, 2.0));
        let g = gradient_inverse_g(&u, uni(&mut rng, 0.2, 1.5), &dual).unwrap();
        g_worst[k] = g_worst[k].max(g.contraction_defect() / d.max_spacing());
    }

    let d = GridDomain::line(-2.0, 2.0, 401).unwrap();
    let half_sq = GridFunction::from_fn(&d, |x| 0.5 * x[0] * x[0]).unwrap();
    let hq = hessian_via_g(&half_sq, 1.0, &d, &[0.5], &[0.1, 0.2]).unwrap();
    let two = hq.as_ref().map(|h| h.a.get(0, 0));
    let fan = hessian_via_g(&GridFunction::from_fn(&d, |x| x[0].abs()).unwrap(), 1.0, &d, &[0.0], &[0.1]).unwrap();
    let ok = expansive <= 1e-9 && g_worst.iter().all(|&g| g <= 2.0) && two.is_some_and(|a| (a - 2.0).abs() <= 1e-6) && fan.is_none();
    (
        ok,
        format!(
            "expansive defect {expansive:.2e} over {pair_count} pairs; max G defect {:.3} h (1-D), {:.3} h (2-D); D2f at 1/2: {two:?}; fan point: {}",
            g_worst[0],
            g_worst[1],
            if fan.is_none() { "none" } else { "some" }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("conjugate oracle equivalence", c1_conjugate_oracle),
        ("involution and envelope", c2_involution),
        ("subdifferential identities", c3_subdifferential),
        ("quadratic shift of contact sets", c4_shift_lemma),
        ("slab width and tangent dichotomy", c5_slab),
        ("vertex map contraction", c6_contraction),
        ("coverage and measure chain", c7_coverage),
        ("jensen to slodkowski translation", c8_jensen_slodkowski),
        ("positivity of contact sets", c9_positivity),
        ("upper contact jet approximation", c10_jet_approximation),
        ("alexandrov statistic", c11_alexandrov),
        ("prox and gradient-inverse maps", c12_prox_maps),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = run();
        failed += !ok as usize;
        println!("criterion {:>2} {}: {} ({detail}) [{:.1} s]", k + 1, name, if ok { "PASS" } else { "FAIL" }, t0.elapsed().as_secs_f64());
        if k == 5 {
            println!("            info: {}", c6_planar_info());
        }
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
