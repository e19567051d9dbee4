//! Command-line front end: builds diagrams, evaluates theta functions and
//! structure constants, runs the segment constructions and the convexity
//! checks, and renders SVG figures. All artifacts are canonical JSON.

pub mod json;
pub mod svg;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use csd_core::brokenline::{enumerate, theta};
use csd_core::constructions::{
    glue_balanced, pair_from_segment, structure_constant_report, structure_constants_peeling, Scaling, ThetaCache,
};
use csd_core::convexity::{
    blc_hull_2d_with_depth, check_positive, is_blc_2d_with_depth, main_theorem_harness, Verdict, DEFAULT_DEPTH_BOUND,
};
use csd_core::lattice::{Rat, RatPoint};
use csd_core::scattering::{complete_rank2, initial_diagram, Diagram};
use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde_json::{json, Value};

use crate::json::{DiagramDoc, SeedDoc};

/// Environment variable overriding the chart search depth.
pub const DEPTH_ENV: &str = "CSD_DEPTH_BOUND";

#[derive(Debug, Parser)]
#[command(name = "csd", version, about = "Cluster scattering diagrams, broken lines and broken line convexity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complete the initial diagram of a seed to order K.
    Build {
        #[arg(long)]
        seed: PathBuf,
        #[arg(long, default_value_t = 6)]
        order: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Theta function at an endpoint; `--out` receives the broken lines.
    Theta {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        direction: String,
        #[arg(long, allow_hyphen_values = true)]
        endpoint: String,
        #[arg(long, default_value_t = 6)]
        order: u32,
        /// Selects the perturbation direction used when the endpoint lies on a wall.
        #[arg(long, default_value_t = 0)]
        perturb_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structure constants α(p, q, r) for all r.
    Multiply {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(short, long, allow_hyphen_values = true)]
        p: String,
        #[arg(short, long, allow_hyphen_values = true)]
        q: String,
        #[arg(long, default_value_t = 6)]
        order: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Glue a balanced pair of broken lines into a segment.
    SegmentFromPair {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        pair: PathBuf,
        /// Scaling; defaults to the one stored with the pair, else (1, 1).
        #[arg(long, requires = "b")]
        a: Option<i64>,
        #[arg(long, requires = "a")]
        b: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a segment at time τ into a balanced pair.
    PairFromSegment {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        segment: PathBuf,
        #[arg(long)]
        tau: String,
        /// Fixed scaling; both or neither of `--a`, `--b`.
        #[arg(long, requires = "b")]
        a: Option<i64>,
        #[arg(long, requires = "a")]
        b: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Broken line convex hull of a list of points.
    Hull {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive positivity check; exit 1 with a witness if it fails.
    CheckPositive {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        polygon: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_degree: u32,
        #[arg(long, default_value_t = 6)]
        order: u32,
    },
    /// Broken line convexity check; exit 1 with a witness if it fails.
    CheckConvex {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        polygon: PathBuf,
    },
    /// Compare the positivity and convexity verdicts on random polygons.
    Harness {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        max_degree: u32,
        #[arg(long, default_value_t = 6)]
        order: u32,
        /// Seed of the polygon generator.
        #[arg(long, default_value_t = 0)]
        perturb_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the diagram with optional overlays as SVG.
    Render {
        #[arg(long)]
        diagram: PathBuf,
        /// JSON list of broken lines (as written by `theta --out`).
        #[arg(long)]
        broken_lines: Option<PathBuf>,
        /// JSON segment or list of segments.
        #[arg(long)]
        segments: Option<PathBuf>,
        /// JSON vertex list.
        #[arg(long)]
        polygon: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Outcome of a command: text for standard output and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub code: u8,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, code: 0 }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_json(path: &Path, what: &str) -> Result<Value> {
    json::parse(&read(path)?, what)
}

fn write_artifact(out: &Option<PathBuf>, text: &str) -> Result<()> {
    if let Some(path) = out {
        fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn load_diagram(path: &Path) -> Result<DiagramDoc> {
    json::diagram_from(&read_json(path, "diagram")?)
}

/// Chart search depth, from the environment if set.
pub fn depth_bound() -> Result<u32> {
    match std::env::var(DEPTH_ENV) {
        Ok(s) => s.trim().parse().map_err(|_| anyhow!("{DEPTH_ENV} must be a non-negative integer, got {s:?}")),
        Err(_) => Ok(DEFAULT_DEPTH_BOUND),
    }
}

fn require_positive_order(k: u32) -> Result<()> {
    if k == 0 {
        bail!("--order must be at least 1");
    }
    Ok(())
}

/// Moves an endpoint lying on a wall a short way into an adjacent chamber,
/// along one of a fixed list of directions picked by `seed`.
fn perturb_endpoint(d: &Diagram, x: &RatPoint, seed: u64) -> Result<RatPoint> {
    if !d.on_support(x) {
        return Ok(x.clone());
    }
    const DIRS: [[i64; 2]; 6] = [[3, 7], [-5, 2], [2, -9], [-7, -3], [11, 4], [-4, 13]];
    let start = (seed % DIRS.len() as u64) as usize;
    for i in 0..DIRS.len() {
        let v = RatPoint::from_i64s(&DIRS[(start + i) % DIRS.len()]);
        let mut eps = Rat::new(BigInt::one(), BigInt::from(64));
        for _ in 0..64 {
            let y = x + &v.scale(&eps);
            let z = x + &v.scale(&(&eps / Rat::from_integer(BigInt::from(2))));
            // both points off the support and on the same side of every wall
            let same_side = d.walls.iter().all(|w| {
                let c = w.covector().to_rat();
                c.dot(&y).signum() == c.dot(&z).signum()
            });
            if !y.is_zero() && !d.on_support(&y) && !d.on_support(&z) && same_side {
                return Ok(y);
            }
            eps /= Rat::from_integer(BigInt::from(2));
        }
    }
    bail!("could not move the endpoint {x} off the walls")
}

/// Runs a parsed command.
pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Build { seed, order, out } => {
            require_positive_order(order)?;
            let doc: SeedDoc = serde_json::from_str(&read(&seed)?).context("malformed seed JSON")?;
            let (fd, s) = doc.fixed_data()?;
            let d = complete_rank2(&initial_diagram(&fd, &s)?, order)?;
            let text = json::to_string(&json::diagram(&DiagramDoc { seed: doc, diagram: d }));
            write_artifact(&out, &text)?;
            Ok(Outcome::ok(if out.is_some() { String::new() } else { text }))
        }
        Command::Theta { diagram, direction, endpoint, order, perturb_seed, out } => {
            require_positive_order(order)?;
            let d = load_diagram(&diagram)?.diagram;
            let m = json::parse_lattice(&direction)?;
            let x = perturb_endpoint(&d, &json::parse_point(&endpoint)?, perturb_seed)?;
            let t = theta(&d, &m, &x, order)?;
            let lines = enumerate(&d, &m, &x, order)?;
            write_artifact(&out, &json::to_string(&Value::Array(lines.iter().map(json::broken_line).collect())))?;
            Ok(Outcome::ok(format!("{t}\n")))
        }
        Command::Multiply { diagram, p, q, order, out } => {
            require_positive_order(order)?;
            let d = load_diagram(&diagram)?.diagram;
            let (p, q) = (json::parse_lattice(&p)?, json::parse_lattice(&q)?);
            let mut cache = ThetaCache::new(&d, order);
            let table = structure_constants_peeling(&d, &p, &q, &mut cache)?;
            let mut text = String::new();
            let mut rows = Vec::new();
            for (r, alpha) in &table {
                // every entry is recomputed from pairs of broken lines
                let rep = structure_constant_report(&d, &p, &q, r, order)?;
                if &rep.value != alpha {
                    bail!("structure constant at r={r} disagrees between methods: {alpha} vs {}", rep.value);
                }
                text.push_str(&format!("r={r}: {}/{}\n", alpha.numer(), alpha.denom()));
                rows.push(json!({ "r": json::lattice(r), "alpha": json::rat(alpha) }));
            }
            write_artifact(&out, &json::to_string(&json!({ "p": json::lattice(&p), "q": json::lattice(&q), "order": order, "table": rows })))?;
            Ok(Outcome::ok(text))
        }
        Command::SegmentFromPair { diagram, pair, a, b, out } => {
            let d = load_diagram(&diagram)?.diagram;
            let (pair, stored) = json::pair_from(&read_json(&pair, "pair")?)?;
            let (a, b) = match (a, b, stored) {
                (Some(a), Some(b), _) => (BigInt::from(a), BigInt::from(b)),
                (_, _, Some(ab)) => ab,
                _ => (BigInt::one(), BigInt::one()),
            };
            if !a.is_positive() || !b.is_positive() {
                bail!("a and b must be positive");
            }
            let g = glue_balanced(&d, &pair, &a, &b)?;
            let text = json::to_string(&json::segment(&g.segment));
            write_artifact(&out, &text)?;
            let split = &g.split_time;
            Ok(Outcome::ok(format!("{}\nsplit time {}/{}\n", g.segment, split.numer(), split.denom())))
        }
        Command::PairFromSegment { diagram, segment, tau, a, b, out } => {
            let d = load_diagram(&diagram)?.diagram;
            let seg = json::segment_from(&read_json(&segment, "segment")?)?;
            let tau = json::parse_rat(&tau)?;
            let scaling = match (a, b) {
                (Some(a), Some(b)) => Scaling::Fixed(BigInt::from(a), BigInt::from(b)),
                _ => Scaling::Auto,
            };
            let (pair, trace) = pair_from_segment(&d, &seg, &tau, &scaling)?;
            write_artifact(&out, &json::to_string(&json::pair(&pair, Some((&trace.a, &trace.b)))))?;
            Ok(Outcome::ok(format!("{trace}\n")))
        }
        Command::Hull { diagram, points, out } => {
            let d = load_diagram(&diagram)?.diagram;
            let pts = json::points_from(&read_json(&points, "points")?)?;
            let hull = blc_hull_2d_with_depth(&d, &pts, depth_bound()?)?;
            let verts = json::points(hull.set.vertices());
            write_artifact(&out, &json::to_string(&verts))?;
            let mut text = json::to_string(&json!({ "vertices": verts, "exact": hull.exact }));
            if !hull.exact {
                text.push_str("warning: chart search did not close; the hull may be too small\n");
            }
            Ok(Outcome::ok(text))
        }
        Command::CheckPositive { diagram, polygon, max_degree, order } => {
            require_positive_order(order)?;
            let d = load_diagram(&diagram)?.diagram;
            let s = json::polygon_from(&read_json(&polygon, "polygon")?)?;
            let rep = check_positive(&d, &s, max_degree, order)?;
            Ok(verdict_outcome(rep.verdict, &rep.witnesses, json!({ "max_degree": max_degree, "order": order })))
        }
        Command::CheckConvex { diagram, polygon } => {
            let d = load_diagram(&diagram)?.diagram;
            let s = json::polygon_from(&read_json(&polygon, "polygon")?)?;
            let rep = is_blc_2d_with_depth(&d, &s, depth_bound()?)?;
            Ok(verdict_outcome(rep.verdict, &rep.witnesses, json!({ "charts": rep.charts, "closed": rep.closed })))
        }
        Command::Harness { diagram, trials, max_degree, order, perturb_seed, out } => {
            require_positive_order(order)?;
            let d = load_diagram(&diagram)?.diagram;
            let rep = main_theorem_harness(&d, trials, max_degree, order, perturb_seed, depth_bound()?)?;
            let mut disagreements = Vec::new();
            for t in &rep.trials {
                if t.agrees() == Some(false) {
                    let wit: Vec<Value> = t.positive.witnesses.iter().chain(&t.convex.witnesses).map(json::witness).collect();
                    disagreements.push(json!({
                        "polygon": json::points(t.polygon.vertices()),
                        "positive": format!("{:?}", t.positive.verdict),
                        "convex": format!("{:?}", t.convex.verdict),
                        "witnesses": wit,
                    }));
                }
            }
            let summary = json!({
                "trials": rep.trials.len(),
                "agreements": rep.agreements,
                "disagreements": rep.disagreements,
                "unknown": rep.unknown,
                "failures": disagreements,
            });
            let text = json::to_string(&summary);
            write_artifact(&out, &text)?;
            Ok(Outcome { stdout: text, code: if rep.disagreements == 0 { 0 } else { 1 } })
        }
        Command::Render { diagram, broken_lines, segments, polygon, out } => {
            let d = load_diagram(&diagram)?.diagram;
            let mut overlays = svg::Overlays::default();
            if let Some(p) = broken_lines {
                let v = read_json(&p, "broken lines")?;
                let list = v.as_array().ok_or_else(|| anyhow!("broken lines file must hold a list"))?;
                overlays.broken_lines = list.iter().map(json::broken_line_from).collect::<Result<_>>()?;
            }
            if let Some(p) = segments {
                let v = read_json(&p, "segments")?;
                overlays.segments = match v.as_array() {
                    Some(list) => list.iter().map(json::segment_from).collect::<Result<_>>()?,
                    None => vec![json::segment_from(&v)?],
                };
            }
            if let Some(p) = polygon {
                overlays.polygons.push(json::polygon_from(&read_json(&p, "polygon")?)?.vertices().to_vec());
            }
            let text = svg::render(&d, &overlays);
            write_artifact(&out, &text)?;
            Ok(Outcome::ok(if out.is_some() { String::new() } else { text }))
        }
    }
}

fn verdict_outcome(verdict: Verdict, witnesses: &[csd_core::convexity::Witness], extra: Value) -> Outcome {
    let name = match verdict {
        Verdict::True => "true",
        Verdict::False => "false",
        Verdict::Unknown => "unknown",
    };
    let doc = json!({
        "verdict": name,
        "witnesses": witnesses.iter().map(json::witness).collect::<Vec<_>>(),
        "details": extra,
    });
    Outcome { stdout: json::to_string(&doc), code: if verdict == Verdict::False { 1 } else { 0 } }
}

/// Parses arguments, runs the command and prints its output; returns the
/// process exit code (0 success, 1 failed check, 2 input error).
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(o) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(o.stdout.as_bytes());
            o.code
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
