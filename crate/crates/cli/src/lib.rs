//! `qcvx`: command-line front end to the `quasiconvex` library.
//!
//! Every subcommand either writes a grid function document or a report.
//! Reports are CSV with a fixed header (plus `# key=value` summary lines) or
//! the same fields as JSON with `--format structured`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use quasiconvex::alexandrov::{alexandrov_statistic, prox};
use quasiconvex::contact::global_contact_set;
use quasiconvex::convex::{quasiconvex_modulus, subdifferential_contains, subdifferential_interval_1d, subgradient_witness, Modulus};
use quasiconvex::corpus::{gen_max_quadratics, rasterize};
use quasiconvex::grid::region_ball;
use quasiconvex::io;
use quasiconvex::legendre::{auto_dual, biconjugate_envelope, conjugate};
use quasiconvex::verify::{run_all, run_suite};
use quasiconvex::vertex::{contraction_defect, measure_chain, slab_of_paraboloids, vertex_map, Paraboloid};
use quasiconvex::{Error, GridDomain, GridFunction, IndexRegion, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Structured,
}

#[derive(Debug, Args)]
struct Common {
    /// Input grid function (JSON).
    #[arg(long = "in", global = true)]
    input: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long = "R", global = true)]
    big_r: Option<f64>,
    /// Report format; function outputs are always JSON documents.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Omit timestamps and timings so reports are reproducible byte for byte.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Debug, Parser)]
#[command(name = "qcvx", version, about = "Convex analysis on sampled grid functions")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Random maximum of quadratics sampled on a cube.
    Gen {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value_t = 3)]
        pieces: usize,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        curv_lo: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        curv_hi: f64,
        /// Also write the analytic oracle here.
        #[arg(long)]
        oracle: Option<PathBuf>,
    },
    /// Legendre transform onto a dual grid (automatic when not given).
    Transform {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dual_min: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dual_max: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        dual_points: Option<Vec<usize>>,
    },
    /// Lower convex envelope.
    Envelope,
    /// Subdifferential at a node: the interval in 1-D, a witness otherwise.
    Subdiff {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        /// Test membership of this slope instead.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Option<Vec<f64>>,
    },
    /// Smallest lambda making u + lambda/2 |x|^2 convex.
    Modulus {
        #[arg(long, default_value_t = 100.0)]
        lambda_max: f64,
    },
    /// Contact set of type A = lambda I (or --matrix) on the grid or a ball.
    Contact {
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Option<Vec<f64>>,
    },
    /// Radius-r contact points and their vertices.
    Vertexmap {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Option<Vec<f64>>,
    },
    /// Slab between two equal-radius paraboloids.
    Slab {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v1: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        c1: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v2: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        c2: f64,
    },
    /// Ball measure, attained vertices and contact measure around a point.
    Measure {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Option<Vec<f64>>,
    },
    /// Proximal point of y.
    Prox {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Vec<f64>,
    },
    /// Per-node second-order Taylor test.
    Alexandrov {
        #[arg(long, default_value_t = 1e-6)]
        taylor_tol: f64,
        /// Radii; defaults to h, 2h, 3h.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
    },
    /// Property suites; exits 1 when any case fails.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

/// Runs `qcvx` with `argv` (program name first) against the process streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                0
            } else {
                let _ = write!(err, "{}", e.render());
                2
            };
        }
    };
    match execute(&cli) {
        Ok((text, code)) => {
            let written = match &cli.common.out {
                Some(path) => fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => code,
                Err(msg) => {
                    let _ = writeln!(err, "qcvx: {msg}");
                    2
                }
            }
        }
        Err(msg) => {
            let _ = writeln!(err, "qcvx: {msg}");
            2
        }
    }
}

type Outcome = Result<(String, i32), String>;

fn fail(e: Error) -> String {
    e.to_string()
}

/// Column names, rows and trailing summary fields of a report.
struct Report {
    command: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<Value>>,
    summary: Vec<(String, Value)>,
}

impl Report {
    fn new(command: &'static str, header: Vec<String>) -> Self {
        Self { command, header, rows: Vec::new(), summary: Vec::new() }
    }

    fn render(&self, common: &Common) -> String {
        let stamp = (!common.no_timestamp)
            .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
        match common.format.unwrap_or(Format::Csv) {
            Format::Csv => {
                let mut s = String::new();
                if let Some(t) = stamp {
                    s.push_str(&format!("# generated_at={t}\n"));
                }
                s.push_str(&self.header.join(","));
                s.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(cell).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                for (k, v) in &self.summary {
                    s.push_str(&format!("# {k}={}\n", cell(v)));
                }
                s
            }
            Format::Structured => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Object(self.header.iter().cloned().zip(r.iter().cloned()).collect::<Map<_, _>>()))
                    .collect();
                let mut doc = Map::new();
                doc.insert("command".into(), json!(self.command));
                if let Some(t) = stamp {
                    doc.insert("generated_at".into(), json!(t));
                }
                doc.insert("columns".into(), json!(self.header));
                doc.insert("rows".into(), Value::Array(rows));
                doc.insert("summary".into(), Value::Object(self.summary.iter().cloned().collect()));
                let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("report serialises");
                s.push('\n');
                s
            }
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => n.as_f64().map(|x| x.to_string()).unwrap_or_default(),
        other => other.to_string(),
    }
}

fn num(x: f64) -> Value {
    // JSON has no infinities; keep them readable
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(x.to_string()))
}

fn cols(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|a| format!("{prefix}{a}")).collect()
}

fn load(common: &Common) -> Result<GridFunction, String> {
    let path = common.input.as_ref().ok_or("--in FILE is required")?;
    io::read_function(path).map_err(fail)
}

fn need(v: Option<f64>, flag: &str) -> Result<f64, String> {
    v.ok_or_else(|| format!("{flag} is required"))
}

fn function_doc(f: &GridFunction) -> Outcome {
    let mut s = io::to_json(f).map_err(fail)?;
    s.push('\n');
    Ok((s, 0))
}

/// Ball around `center` (origin by default) when `--rho` is given, else the whole grid.
fn region(u: &GridFunction, rho: Option<f64>, center: &Option<Vec<f64>>) -> Result<IndexRegion, String> {
    let d = u.domain();
    match rho {
        Some(r) => {
            let c = center.clone().unwrap_or_else(|| vec![0.0; d.dim()]);
            region_ball(d, &c, r).map_err(fail)
        }
        None => Ok(IndexRegion::full(d)),
    }
}

fn execute(cli: &Cli) -> Outcome {
    let c = &cli.common;
    match &cli.command {
        Command::Gen { dim, points, pieces, lo, hi, curv_lo, curv_hi, oracle } => {
            let d = GridDomain::cube(*dim, *lo, *hi, *points).map_err(fail)?;
            let f = gen_max_quadratics(c.seed, &d, *pieces, (*curv_lo, *curv_hi)).map_err(fail)?;
            if let Some(path) = oracle {
                io::write_oracle(path, &f).map_err(fail)?;
            }
            function_doc(&rasterize(&f, &d).map_err(fail)?)
        }
        Command::Transform { dual_min, dual_max, dual_points } => {
            let u = load(c)?;
            let dual = match (dual_min, dual_max, dual_points) {
                (None, None, None) => auto_dual(&u).map_err(fail)?,
                (Some(lo), Some(hi), Some(pts)) => {
                    let n = u.domain().dim();
                    let widen = |v: &Vec<f64>| if v.len() == 1 { vec![v[0]; n] } else { v.clone() };
                    let pts = if pts.len() == 1 { vec![pts[0]; n] } else { pts.clone() };
                    GridDomain::new(widen(lo), widen(hi), pts).map_err(fail)?
                }
                _ => return Err("--dual-min, --dual-max and --dual-points go together".into()),
            };
            function_doc(&conjugate(&u, &dual).map_err(fail)?)
        }
        Command::Envelope => function_doc(&biconjugate_envelope(&load(c)?).map_err(fail)?),
        Command::Subdiff { x, p } => {
            let u = load(c)?;
            let n = u.domain().dim();
            if let Some(p) = p {
                let inside = subdifferential_contains(&u, x, p, c.tol).map_err(fail)?;
                let mut rep = Report::new("subdiff", [cols("x", n), cols("p", n), vec!["contains".into()]].concat());
                rep.rows.push(x.iter().chain(p).map(|&v| num(v)).chain([json!(inside)]).collect());
                Ok((rep.render(c), 0))
            } else if n == 1 {
                let iv = subdifferential_interval_1d(&u, x[0]).map_err(fail)?;
                let mut rep = Report::new("subdiff", vec!["x".into(), "lower".into(), "upper".into()]);
                rep.rows.push(vec![num(x[0]), num(iv.lower), num(iv.upper)]);
                Ok((rep.render(c), 0))
            } else {
                let dual = auto_dual(&u).map_err(fail)?;
                let w = subgradient_witness(&u, x, &dual).map_err(fail)?;
                let mut rep = Report::new("subdiff", [cols("x", n), cols("p", n)].concat());
                if let Some(w) = w {
                    rep.rows.push(x.iter().chain(&w).map(|&v| num(v)).collect());
                }
                Ok((rep.render(c), 0))
            }
        }
        Command::Modulus { lambda_max } => {
            let u = load(c)?;
            let m = quasiconvex_modulus(&u, *lambda_max, c.tol).map_err(fail)?;
            let mut rep = Report::new("modulus", vec!["modulus".into(), "exceeds_max".into()]);
            rep.rows.push(match m {
                Modulus::Value(v) => vec![num(v), json!(false)],
                Modulus::ExceedsMax => vec![num(*lambda_max), json!(true)],
            });
            Ok((rep.render(c), 0))
        }
        Command::Contact { matrix, center } => {
            let u = load(c)?;
            let n = u.domain().dim();
            let a = match (matrix, c.lambda) {
                (Some(path), _) => io::read_matrix(path).map_err(fail)?,
                (None, Some(l)) => SymMatrix::scaled_identity(n, l),
                (None, None) => return Err("--lambda or --matrix is required".into()),
            };
            let reg = region(&u, c.rho, center)?;
            let set = global_contact_set(&u, &reg, &a, c.tol).map_err(fail)?;
            let d = u.domain();
            let mut rep = Report::new("contact", [vec!["node".into()], cols("x", n), cols("p", n)].concat());
            for (&i, p) in set.members.members().iter().zip(set.witnesses()) {
                rep.rows.push([json!(i)].into_iter().chain(d.node(i).iter().chain(p).map(|&v| num(v))).collect());
            }
            rep.summary.push(("members".into(), json!(set.len())));
            rep.summary.push(("measure".into(), num(set.measure())));
            Ok((rep.render(c), 0))
        }
        Command::Vertexmap { center } => {
            let u = load(c)?;
            let n = u.domain().dim();
            let r = need(c.radius, "--radius")?;
            let reg = region(&u, c.rho, center)?;
            let pairs = vertex_map(&u, &reg, r, c.tol).map_err(fail)?;
            let mut rep = Report::new("vertexmap", [vec!["node".into()], cols("x", n), cols("v", n)].concat());
            for pr in &pairs {
                rep.rows.push([json!(pr.node)].into_iter().chain(pr.x.iter().chain(&pr.v).map(|&v| num(v))).collect());
            }
            let defect = if pairs.len() >= 2 { num(contraction_defect(&pairs).map_err(fail)?) } else { Value::Null };
            rep.summary.push(("contraction_defect".into(), defect));
            Ok((rep.render(c), 0))
        }
        Command::Slab { v1, c1, v2, c2 } => {
            let r = need(c.radius, "--radius")?;
            let p1 = Paraboloid::new(v1.clone(), *c1, r).map_err(fail)?;
            let p2 = Paraboloid::new(v2.clone(), *c2, r).map_err(fail)?;
            let s = slab_of_paraboloids(&p1, &p2).map_err(fail)?;
            let header = [cols("e", s.e.len()), vec!["m".into(), "lo".into(), "hi".into(), "width".into()]].concat();
            let mut rep = Report::new("slab", header);
            rep.rows.push(s.e.iter().chain([&s.m, &s.lo, &s.hi, &s.width]).map(|&v| num(v)).collect());
            Ok((rep.render(c), 0))
        }
        Command::Measure { center } => {
            let u = load(c)?;
            let x0 = center.clone().unwrap_or_else(|| vec![0.0; u.domain().dim()]);
            let chain = measure_chain(&u, &x0, need(c.rho, "--rho")?, need(c.radius, "--radius")?, need(c.big_r, "--R")?, c.tol)
                .map_err(fail)?;
            let header = ["lhs", "mid", "rhs", "slack", "shortfall", "holds", "probes", "attained"];
            let mut rep = Report::new("measure", header.iter().map(|s| s.to_string()).collect());
            rep.rows.push(vec![
                num(chain.lhs),
                num(chain.mid),
                num(chain.rhs),
                num(chain.slack),
                num(chain.shortfall()),
                json!(chain.holds()),
                json!(chain.coverage.probes.len()),
                json!(chain.coverage.attained.len()),
            ]);
            Ok((rep.render(c), 0))
        }
        Command::Prox { y } => {
            let u = load(c)?;
            let n = u.domain().dim();
            let pr = prox(&u, y, need(c.radius, "--radius")?).map_err(fail)?;
            let mut rep = Report::new("prox", [cols("y", n), cols("x", n), cols("p", n), vec!["objective".into()]].concat());
            rep.rows.push(pr.y.iter().chain(&pr.x).chain(&pr.p).chain([&pr.objective]).map(|&v| num(v)).collect());
            Ok((rep.render(c), 0))
        }
        Command::Alexandrov { taylor_tol, radii } => {
            let u = load(c)?;
            let d = u.domain();
            let h = d.max_spacing();
            let radii = radii.clone().unwrap_or_else(|| vec![h, 2.0 * h, 3.0 * h]);
            let rep_data = alexandrov_statistic(&u, c.lambda.unwrap_or(0.0), *taylor_tol, &radii).map_err(fail)?;
            let n = d.dim();
            let mut rep = Report::new("alexandrov", [vec!["node".into()], cols("x", n), vec!["passed".into()]].concat());
            for (&i, &ok) in rep_data.nodes.iter().zip(&rep_data.passed) {
                rep.rows.push([json!(i)].into_iter().chain(d.node(i).into_iter().map(num)).chain([json!(ok)]).collect());
            }
            rep.summary.push(("fraction".into(), num(rep_data.fraction)));
            Ok((rep.render(c), 0))
        }
        Command::Verify { suite } => {
            let reports = if suite == "all" { run_all(c.seed) } else { run_suite(suite, c.seed).map(|r| vec![r]) }.map_err(fail)?;
            let header = ["suite", "cases", "failures", "worst_defect", "seed", "wall_time"];
            let mut rep = Report::new("verify", header.iter().map(|s| s.to_string()).collect());
            for r in &reports {
                let wall = if c.no_timestamp { 0.0 } else { r.wall_time };
                rep.rows.push(vec![json!(r.suite), json!(r.cases), json!(r.failures), num(r.worst_defect), json!(r.seed), num(wall)]);
            }
            let failed = reports.iter().filter(|r| !r.passed()).count();
            rep.summary.push(("suites".into(), json!(reports.len())));
            rep.summary.push(("failed".into(), json!(failed)));
            Ok((rep.render(c), if failed > 0 { 1 } else { 0 }))
        }
    }
}
