//! Canonical JSON encoding of core values. Rationals are `"num/den"` strings,
//! lattice points are integer arrays, object keys are sorted.

use anyhow::{anyhow, bail, Context, Result};
use csd_core::brokenline::{Bend, BrokenLine, Piece, SegPiece, Segment};
use csd_core::constructions::BalancedPair;
use csd_core::convexity::{RationalPointSet, Witness};
use csd_core::lattice::{with_principal_coefficients, FixedData, LatticePoint, Rat, RatPoint, Seed};
use csd_core::scattering::{Diagram, Support, Wall};
use csd_core::series::{LaurentPoly, WallFunction};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

/// Fixed data and initial seed as read from a seed file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedDoc {
    pub rank: usize,
    pub unfrozen: Vec<usize>,
    pub d: Vec<i64>,
    pub exchange: Vec<Vec<i64>>,
    #[serde(default)]
    pub principal: bool,
}

impl SeedDoc {
    pub fn fixed_data(&self) -> Result<(FixedData, Seed)> {
        if self.exchange.len() != self.rank || self.d.len() != self.rank {
            bail!("seed: exchange matrix and d must have {} rows", self.rank);
        }
        let fd = FixedData::from_exchange(&self.exchange, &self.d, &self.unfrozen)?;
        let seed = Seed::standard(self.rank);
        if self.principal {
            Ok(with_principal_coefficients(&fd, &seed)?)
        } else {
            Ok((fd, seed))
        }
    }
}

/// A diagram together with the seed document it was built from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiagramDoc {
    pub seed: SeedDoc,
    pub diagram: Diagram,
}

pub fn to_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn parse(text: &str, what: &str) -> Result<Value> {
    serde_json::from_str(text).with_context(|| format!("malformed {what} JSON"))
}

pub fn rat(x: &Rat) -> Value {
    Value::String(format!("{}/{}", x.numer(), x.denom()))
}

pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| anyhow!("not a rational: {s:?}"))?;
    let d: BigInt = d.parse().map_err(|_| anyhow!("not a rational: {s:?}"))?;
    if d == BigInt::from(0) {
        bail!("zero denominator in {s:?}");
    }
    Ok(Rat::new(n, d))
}

pub fn rat_from(v: &Value) -> Result<Rat> {
    match v {
        Value::String(s) => parse_rat(s),
        Value::Number(n) if n.is_i64() => Ok(Rat::from_integer(BigInt::from(n.as_i64().unwrap_or_default()))),
        _ => bail!("expected a rational, found {v}"),
    }
}

fn int(x: &BigInt) -> Value {
    match x.to_i64() {
        Some(i) => json!(i),
        None => Value::String(x.to_string()),
    }
}

fn int_from(v: &Value) -> Result<BigInt> {
    match v {
        Value::Number(n) if n.is_i64() => Ok(BigInt::from(n.as_i64().unwrap_or_default())),
        Value::String(s) => s.parse().map_err(|_| anyhow!("not an integer: {s:?}")),
        _ => bail!("expected an integer, found {v}"),
    }
}

pub fn lattice(p: &LatticePoint) -> Value {
    Value::Array(p.0.iter().map(int).collect())
}

pub fn lattice_from(v: &Value) -> Result<LatticePoint> {
    let a = v.as_array().ok_or_else(|| anyhow!("expected an integer vector, found {v}"))?;
    Ok(LatticePoint::new(a.iter().map(int_from).collect::<Result<_>>()?))
}

pub fn point(p: &RatPoint) -> Value {
    Value::Array(p.0.iter().map(rat).collect())
}

pub fn point_from(v: &Value) -> Result<RatPoint> {
    let a = v.as_array().ok_or_else(|| anyhow!("expected a rational vector, found {v}"))?;
    Ok(RatPoint::new(a.iter().map(rat_from).collect::<Result<_>>()?))
}

/// Parses `"x,y"` as a rational vector.
pub fn parse_point(s: &str) -> Result<RatPoint> {
    Ok(RatPoint::new(s.split(',').map(parse_rat).collect::<Result<_>>()?))
}

/// Parses `"x,y"` as an integral vector.
pub fn parse_lattice(s: &str) -> Result<LatticePoint> {
    parse_point(s)?.to_lattice().ok_or_else(|| anyhow!("not an integral vector: {s:?}"))
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| anyhow!("missing field {key:?}"))
}

fn array<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>> {
    field(v, key)?.as_array().ok_or_else(|| anyhow!("field {key:?} must be an array"))
}

pub fn wall_function(f: &WallFunction) -> Value {
    json!({
        "dir": lattice(&f.direction),
        "coeffs": f.coeffs.iter().map(rat).collect::<Vec<_>>(),
        "order": f.order,
        "exact": f.exact,
    })
}

fn wall_function_from(fd: &FixedData, v: &Value) -> Result<WallFunction> {
    let dir = lattice_from(field(v, "dir")?)?;
    let coeffs = array(v, "coeffs")?.iter().map(rat_from).collect::<Result<Vec<_>>>()?;
    let order = field(v, "order")?.as_u64().ok_or_else(|| anyhow!("order must be a non-negative integer"))? as u32;
    let exact = field(v, "exact")?.as_bool().ok_or_else(|| anyhow!("exact must be a boolean"))?;
    Ok(WallFunction::from_fd(fd, dir, coeffs, order, exact)?)
}

fn support(s: &Support) -> Value {
    match s {
        Support::Line => json!({ "kind": "line" }),
        Support::Ray(r) => json!({ "kind": "ray", "dir": lattice(r) }),
    }
}

fn support_from(v: &Value) -> Result<Support> {
    match field(v, "kind")?.as_str() {
        Some("line") => Ok(Support::Line),
        Some("ray") => Ok(Support::Ray(lattice_from(field(v, "dir")?)?)),
        _ => bail!("support kind must be \"line\" or \"ray\""),
    }
}

pub fn diagram(doc: &DiagramDoc) -> Value {
    let d = &doc.diagram;
    let walls: Vec<Value> = d
        .walls
        .iter()
        .map(|w| json!({ "normal": lattice(&w.normal), "support": support(&w.support), "func": wall_function(&w.func) }))
        .collect();
    json!({
        "seed": serde_json::to_value(&doc.seed).expect("seed serializes"),
        "order": d.order,
        "saturated": d.saturated,
        "walls": walls,
    })
}

pub fn diagram_from(v: &Value) -> Result<DiagramDoc> {
    let seed: SeedDoc = serde_json::from_value(field(v, "seed")?.clone()).context("malformed seed")?;
    let (fd, s) = seed.fixed_data()?;
    let order = field(v, "order")?.as_u64().ok_or_else(|| anyhow!("order must be a non-negative integer"))? as u32;
    let saturated = field(v, "saturated")?.as_bool().ok_or_else(|| anyhow!("saturated must be a boolean"))?;
    let mut walls = Vec::new();
    for w in array(v, "walls")? {
        let normal = lattice_from(field(w, "normal")?)?;
        let func = wall_function_from(&fd, field(w, "func")?)?;
        walls.push(Wall::new(&fd, normal, support_from(field(w, "support")?)?, func)?);
    }
    Ok(DiagramDoc { seed, diagram: Diagram::new(fd, s, walls, order, saturated) })
}

fn bend(b: &Option<Bend>) -> Value {
    match b {
        None => Value::Null,
        Some(b) => json!({ "point": point(&b.point), "normal": lattice(&b.normal), "ray": lattice(&b.ray) }),
    }
}

fn bend_from(v: &Value) -> Result<Option<Bend>> {
    if v.is_null() {
        return Ok(None);
    }
    Ok(Some(Bend {
        point: point_from(field(v, "point")?)?,
        normal: lattice_from(field(v, "normal")?)?,
        ray: lattice_from(field(v, "ray")?)?,
    }))
}

pub fn segment(s: &Segment) -> Value {
    let pieces: Vec<Value> = s
        .pieces
        .iter()
        .map(|p| {
            json!({
                "exponent": lattice(&p.exponent),
                "coeff": rat(&p.coeff),
                "duration": rat(&p.duration),
                "bend": bend(&p.bend),
            })
        })
        .collect();
    json!({ "start": point(&s.start), "end": point(&s.end), "total_time": rat(&s.total_time), "pieces": pieces })
}

pub fn segment_from(v: &Value) -> Result<Segment> {
    let start = point_from(field(v, "start")?)?;
    let mut pieces = Vec::new();
    for p in array(v, "pieces")? {
        pieces.push(SegPiece {
            exponent: lattice_from(field(p, "exponent")?)?,
            coeff: rat_from(field(p, "coeff")?)?,
            duration: rat_from(field(p, "duration")?)?,
            bend: bend_from(field(p, "bend")?)?,
        });
    }
    if pieces.is_empty() {
        bail!("a segment needs at least one piece");
    }
    Ok(Segment::new(start, pieces))
}

pub fn broken_line(l: &BrokenLine) -> Value {
    let pieces: Vec<Value> = l
        .pieces
        .iter()
        .map(|p| json!({ "exponent": lattice(&p.exponent), "coeff": rat(&p.coeff), "bend": bend(&p.bend) }))
        .collect();
    json!({
        "endpoint": point(&l.endpoint),
        "initial": lattice(&l.initial),
        "perturbation": l.perturbation.as_ref().map(point).unwrap_or(Value::Null),
        "pieces": pieces,
    })
}

pub fn broken_line_from(v: &Value) -> Result<BrokenLine> {
    let mut pieces = Vec::new();
    for p in array(v, "pieces")? {
        pieces.push(Piece {
            exponent: lattice_from(field(p, "exponent")?)?,
            coeff: rat_from(field(p, "coeff")?)?,
            bend: bend_from(field(p, "bend")?)?,
        });
    }
    if pieces.is_empty() {
        bail!("a broken line needs at least one piece");
    }
    let perturbation = match v.get("perturbation") {
        None | Some(Value::Null) => None,
        Some(p) => Some(point_from(p)?),
    };
    Ok(BrokenLine {
        endpoint: point_from(field(v, "endpoint")?)?,
        initial: lattice_from(field(v, "initial")?)?,
        pieces,
        perturbation,
    })
}

/// A balanced pair with the scaling `(a, b)` it was built for, if known.
pub fn pair(p: &BalancedPair, scaling: Option<(&BigInt, &BigInt)>) -> Value {
    let mut v = json!({ "base": point(&p.base), "line1": broken_line(&p.line1), "line2": broken_line(&p.line2) });
    if let Some((a, b)) = scaling {
        v["scaling"] = json!({ "a": int(a), "b": int(b) });
    }
    v
}

pub fn pair_from(v: &Value) -> Result<(BalancedPair, Option<(BigInt, BigInt)>)> {
    let pair = BalancedPair {
        base: point_from(field(v, "base")?)?,
        line1: broken_line_from(field(v, "line1")?)?,
        line2: broken_line_from(field(v, "line2")?)?,
    };
    let scaling = match v.get("scaling") {
        None | Some(Value::Null) => None,
        Some(s) => Some((int_from(field(s, "a")?)?, int_from(field(s, "b")?)?)),
    };
    Ok((pair, scaling))
}

/// A list of rational points (polygon vertices in counterclockwise order).
pub fn points(ps: &[RatPoint]) -> Value {
    Value::Array(ps.iter().map(point).collect())
}

pub fn points_from(v: &Value) -> Result<Vec<RatPoint>> {
    let a = v.as_array().ok_or_else(|| anyhow!("expected a list of points"))?;
    a.iter().map(point_from).collect()
}

pub fn polygon_from(v: &Value) -> Result<RationalPointSet> {
    let pts = points_from(v)?;
    Ok(RationalPointSet::polygon(&pts)?)
}

pub fn laurent(p: &LaurentPoly) -> Value {
    let mut m = Map::new();
    m.insert("text".into(), Value::String(p.to_string()));
    m.insert(
        "terms".into(),
        Value::Array(p.terms.iter().rev().map(|(e, c)| json!({ "exponent": lattice(e), "coeff": rat(c) })).collect()),
    );
    Value::Object(m)
}

pub fn witness(w: &Witness) -> Value {
    match w {
        Witness::Positivity { p, q, r, a, b, alpha } => json!({
            "kind": "positivity",
            "p": lattice(p),
            "q": lattice(q),
            "r": lattice(r),
            "a": a,
            "b": b,
            "alpha": rat(alpha),
        }),
        Witness::Segment(s) => json!({ "kind": "segment", "segment": segment(s) }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_round_trip() {
        for s in ["3/2", "-7/3", "0/1", "5/1"] {
            assert_eq!(rat(&parse_rat(s).unwrap()), Value::String(s.into()));
        }
        assert_eq!(parse_rat("4/6").unwrap(), parse_rat("2/3").unwrap());
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }

    #[test]
    fn vectors_parse() {
        assert_eq!(parse_lattice("-1,0").unwrap(), LatticePoint::from_i64s(&[-1, 0]));
        assert_eq!(parse_point("5/2, 1").unwrap(), RatPoint::from_fracs(&[(5, 2), (1, 1)]));
        assert!(parse_lattice("1/2,0").is_err());
    }
}
