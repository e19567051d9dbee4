use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use csd_cli::{json, main_with_args, run, Cli, Outcome};
use tempfile::TempDir;

const A2_SEED: &str = r#"{ "rank": 2, "unfrozen": [0, 1], "d": [1, 1], "exchange": [[0, 1], [-1, 0]], "principal": false }"#;
const G2_SEED: &str = r#"{ "rank": 2, "unfrozen": [0, 1], "d": [1, 3], "exchange": [[0, 3], [-1, 0]], "principal": false }"#;
const G2_GVECTORS: &str = r#"[[1,0],[0,1],[-1,0],[0,-1],[1,-1],[1,-2],[1,-3],[2,-3]]"#;

fn exec(args: &[&str]) -> Outcome {
    let mut full = vec!["csd"];
    full.extend_from_slice(args);
    run(Cli::try_parse_from(full).expect("arguments parse")).expect("command succeeds")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn build(dir: &TempDir, seed: &str, order: &str) -> PathBuf {
    let seed = write(dir, "seed.json", seed);
    let out = dir.path().join(format!("diagram-{order}.json"));
    exec(&["build", "--seed", s(&seed), "--order", order, "--out", s(&out)]);
    out
}

#[test]
fn a2_theta() {
    let dir = TempDir::new().unwrap();
    let d = build(&dir, A2_SEED, "6");
    let lines = dir.path().join("lines.json");
    let o = exec(&["theta", "--diagram", s(&d), "--direction", "-1,0", "--endpoint", "2,1", "--order", "6", "--out", s(&lines)]);
    assert_eq!(o.stdout.trim(), "z^(-1,1) + z^(-1,0)");
    let v = json::parse(&fs::read_to_string(&lines).unwrap(), "lines").unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn theta_on_a_wall_is_perturbed() {
    let dir = TempDir::new().unwrap();
    let d = build(&dir, A2_SEED, "6");
    let a = exec(&["theta", "--diagram", s(&d), "--direction", "-1,0", "--endpoint", "2,0", "--perturb-seed", "0"]);
    let b = exec(&["theta", "--diagram", s(&d), "--direction", "-1,0", "--endpoint", "2,0", "--perturb-seed", "3"]);
    assert_eq!(a.code, 0);
    assert!(!a.stdout.trim().is_empty() && !b.stdout.trim().is_empty());
}

#[test]
fn g2_multiply() {
    let dir = TempDir::new().unwrap();
    let d = build(&dir, G2_SEED, "8");
    let o = exec(&["multiply", "--diagram", s(&d), "-p", "1,0", "-q", "-1,0", "--order", "8"]);
    assert_eq!(o.stdout, "r=(0,0): 1/1\nr=(0,3): 1/1\n");
}

#[test]
fn diagram_json_round_trips() {
    let dir = TempDir::new().unwrap();
    for (seed, k) in [(A2_SEED, "5"), (G2_SEED, "8")] {
        let d = build(&dir, seed, k);
        let text = fs::read_to_string(&d).unwrap();
        let doc = json::diagram_from(&json::parse(&text, "diagram").unwrap()).unwrap();
        assert_eq!(json::to_string(&json::diagram(&doc)), text);
        let again = json::diagram_from(&json::parse(&json::to_string(&json::diagram(&doc)), "diagram").unwrap()).unwrap();
        assert_eq!(again, doc);
    }
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let d1 = build(&dir, G2_SEED, "7");
    let first = fs::read(&d1).unwrap();
    let d2 = build(&dir, G2_SEED, "7");
    assert_eq!(first, fs::read(&d2).unwrap());
    let pts = write(&dir, "pts.json", G2_GVECTORS);
    let a = exec(&["render", "--diagram", s(&d1), "--polygon", s(&pts)]);
    let b = exec(&["render", "--diagram", s(&d1), "--polygon", s(&pts)]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn a2_render_has_five_rays() {
    let dir = TempDir::new().unwrap();
    let d = build(&dir, A2_SEED, "5");
    let out = dir.path().join("a2.svg");
    exec(&["render", "--diagram", s(&d), "--out", s(&out)]);
    let svg = fs::read_to_string(&out).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 5);
    assert_eq!(svg.matches("class=\"wall\"").count(), 3);
}

#[test]
fn g2_hull_and_checks() {
    let dir = TempDir::new().unwrap();
    let d = build(&dir, G2_SEED, "8");
    let pts = write(&dir, "pts.json", G2_GVECTORS);
    let hull = dir.path().join("hull.json");
    exec(&["hull", "--diagram", s(&d), "--points", s(&pts), "--out", s(&hull)]);
    let verts = json::points_from(&json::parse(&fs::read_to_string(&hull).unwrap(), "hull").unwrap()).unwrap();
    assert_eq!(verts.len(), 5);
    assert!(fs::read_to_string(&hull).unwrap().contains("\"3/2\""));

    let ok = exec(&["check-positive", "--diagram", s(&d), "--polygon", s(&hull), "--max-degree", "3", "--order", "8"]);
    assert_eq!(ok.code, 0);
    let bad = exec(&["check-positive", "--diagram", s(&d), "--polygon", s(&pts), "--max-degree", "2", "--order", "8"]);
    assert_eq!(bad.code, 1);
    assert!(bad.stdout.contains("\"false\"") && bad.stdout.contains("positivity"));
    let conv = exec(&["check-convex", "--diagram", s(&d), "--polygon", s(&pts)]);
    assert_eq!(conv.code, 1);
    assert!(conv.stdout.contains("\"segment\""));
    assert_eq!(exec(&["check-convex", "--diagram", s(&d), "--polygon", s(&hull)]).code, 0);
}

#[test]
fn split_and_glue_round_trip() {
    let dir = TempDir::new().unwrap();
    let d = build(&dir, A2_SEED, "5");
    let seg = r#"{
        "start": ["1/1", "-5/1"],
        "pieces": [
            { "exponent": [1, -3], "coeff": "1", "duration": "1", "bend": null },
            { "exponent": [1, -2], "coeff": "1", "duration": "1", "bend": { "point": ["0", "-2"], "normal": [1, 0], "ray": [0, -1] } },
            { "exponent": [-1, -2], "coeff": "1", "duration": "1", "bend": { "point": ["-1", "0"], "normal": [0, 1], "ray": [-1, 0] } },
            { "exponent": [-1, -1], "coeff": "1", "duration": "2", "bend": { "point": ["0", "2"], "normal": [1, 0], "ray": [0, 1] } }
        ]
    }"#;
    let seg = write(&dir, "seg.json", seg);
    let pair = dir.path().join("pair.json");
    let o = exec(&["pair-from-segment", "--diagram", s(&d), "--segment", s(&seg), "--tau", "5/2", "--a", "1", "--b", "1", "--out", s(&pair)]);
    assert!(o.stdout.contains("(-3,-4)"));
    let (p, ab) = json::pair_from(&json::parse(&fs::read_to_string(&pair).unwrap(), "pair").unwrap()).unwrap();
    let ab = ab.expect("scaling stored");
    assert_eq!(json::to_string(&json::pair(&p, Some((&ab.0, &ab.1)))), fs::read_to_string(&pair).unwrap());

    let auto = dir.path().join("auto.json");
    exec(&["pair-from-segment", "--diagram", s(&d), "--segment", s(&seg), "--tau", "5/2", "--out", s(&auto)]);
    let glued = dir.path().join("glued.json");
    exec(&["segment-from-pair", "--diagram", s(&d), "--pair", s(&auto), "--out", s(&glued)]);
    let g = json::segment_from(&json::parse(&fs::read_to_string(&glued).unwrap(), "segment").unwrap()).unwrap();
    assert_eq!(g.start.to_string(), "(1,-5)");
    assert_eq!(g.end.to_string(), "(2,4)");
}

#[test]
fn input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", "{ not json");
    assert_eq!(main_with_args(["csd", "build", "--seed", s(&bad)]), 2);
    assert_eq!(main_with_args(["csd", "build", "--seed", s(&dir.path().join("missing.json"))]), 2);
    assert_eq!(main_with_args(["csd", "frobnicate"]), 2);
    let prin = write(&dir, "prin.json", &A2_SEED.replace("\"principal\": false", "\"principal\": true"));
    let d = dir.path().join("prin-diagram.json");
    // the principal-coefficient diagram has rank 4: rank-2 commands refuse it
    assert_eq!(main_with_args(["csd", "build", "--seed", s(&prin), "--order", "2", "--out", s(&d)]), 2);
}

#[test]
fn harness_command() {
    let dir = TempDir::new().unwrap();
    let d = build(&dir, A2_SEED, "6");
    let o = exec(&["harness", "--diagram", s(&d), "--trials", "4", "--perturb-seed", "3"]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("\"disagreements\": 0"));
}
