//! Broken-line convexity and positivity of rational point sets in rank 2,
//! the broken-line convex hull, and a harness comparing the two predicates.
//!
//! Convexity is decided in seed charts: piecewise-linear maps that straighten
//! maximal bends toward the origin at incoming walls, generated by repeatedly
//! straightening the incoming walls of the transported diagram.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brokenline::{ray_of, validate_segment, Bend, Segment};
use crate::constructions::{segment_from_pieces, structure_constant_report, structure_constants_peeling, ThetaCache};
use crate::error::{Error, Result};
use crate::lattice::{cross, LatticePoint, Rat, RatPoint};
use crate::scattering::{initial_diagram, Diagram, Support};

/// Default bound on the number of straightenings composed into one chart.
pub const DEFAULT_DEPTH_BOUND: u32 = 16;

/// Bound on the number of rounds of the hull fixpoint.
const HULL_ROUNDS: usize = 64;

/// A closed rational polygon (convex, counterclockwise, no repeated or
/// collinear vertices) or a finite set of points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RationalPointSet {
    Polygon(Vec<RatPoint>),
    Finite(Vec<RatPoint>),
}

impl RationalPointSet {
    /// The convex hull of the given points as a polygon.
    pub fn polygon(points: &[RatPoint]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty polygon".into()));
        }
        if points.iter().any(|p| p.dim() != 2) {
            return Err(Error::NotRank2);
        }
        Ok(RationalPointSet::Polygon(convex_hull(points)))
    }

    pub fn vertices(&self) -> &[RatPoint] {
        match self {
            RationalPointSet::Polygon(v) | RationalPointSet::Finite(v) => v,
        }
    }

    /// Closed membership test.
    pub fn contains(&self, x: &RatPoint) -> bool {
        match self {
            RationalPointSet::Polygon(v) => in_convex(v, x),
            RationalPointSet::Finite(v) => v.contains(x),
        }
    }

    /// Integral points of `a·S`, sorted.
    pub fn lattice_points(&self, a: u32) -> Vec<LatticePoint> {
        let k = Rat::from_integer(BigInt::from(a));
        match self {
            RationalPointSet::Finite(v) => {
                let mut out: Vec<LatticePoint> = v.iter().filter_map(|p| p.scale(&k).to_lattice()).collect();
                out.sort();
                out.dedup();
                out
            }
            RationalPointSet::Polygon(v) => {
                let poly: Vec<RatPoint> = v.iter().map(|p| p.scale(&k)).collect();
                let lo = |i: usize| poly.iter().map(|p| p.0[i].floor().to_integer()).min().unwrap_or_default();
                let hi = |i: usize| poly.iter().map(|p| p.0[i].ceil().to_integer()).max().unwrap_or_default();
                let mut out = Vec::new();
                let mut x = lo(0);
                while x <= hi(0) {
                    let mut y = lo(1);
                    while y <= hi(1) {
                        let p = LatticePoint::new(vec![x.clone(), y.clone()]);
                        if in_convex(&poly, &p.to_rat()) {
                            out.push(p);
                        }
                        y += 1;
                    }
                    x += 1;
                }
                out
            }
        }
    }
}

/// Three-valued verdict; `Unknown` when the chart search was cut off.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl Verdict {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Verdict::True => Some(true),
            Verdict::False => Some(false),
            Verdict::Unknown => None,
        }
    }
}

/// Evidence for a failed check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// `α(p, q, r) ≠ 0` with `p ∈ aS`, `q ∈ bS`, `r ∉ (a+b)S`.
    Positivity { p: LatticePoint, q: LatticePoint, r: LatticePoint, a: u32, b: u32, alpha: Rat },
    /// A broken line segment with endpoints in `S` leaving `S`.
    Segment(Segment),
}

/// Outcome of a positivity or convexity check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub degree_checked: Option<u32>,
    pub order_checked: Option<u32>,
    /// Number of charts examined (convexity checks).
    pub charts: usize,
    /// Whether the chart set closed under straightening.
    pub closed: bool,
}

impl CheckReport {
    fn convexity(verdict: Verdict, witnesses: Vec<Witness>, charts: usize, closed: bool) -> Self {
        CheckReport { verdict, witnesses, degree_checked: None, order_checked: None, charts, closed }
    }
}

// ---------------------------------------------------------------------------
// Planar helpers

fn pt(x: Rat, y: Rat) -> RatPoint {
    RatPoint::new(vec![x, y])
}

fn half(v: &RatPoint) -> u8 {
    let (x, y) = (&v.0[0], &v.0[1]);
    if y.is_positive() || (y.is_zero() && x.is_positive()) {
        0
    } else {
        1
    }
}

/// Compares directions by angle in `[0, 2π)`.
fn angle_cmp(a: &RatPoint, b: &RatPoint) -> Ordering {
    half(a).cmp(&half(b)).then_with(|| {
        let c = cross(a, b);
        if c.is_positive() {
            Ordering::Less
        } else if c.is_negative() {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    })
}

/// Primitive integral vector in the direction of `v`.
fn prim(v: &RatPoint) -> LatticePoint {
    v.scale(&Rat::from_integer(v.denom())).to_lattice().expect("cleared denominators").primitive().0
}

fn orient(a: &RatPoint, b: &RatPoint, c: &RatPoint) -> Rat {
    cross(&(b - a), &(c - a))
}

/// Counterclockwise convex hull without collinear points.
pub fn convex_hull(points: &[RatPoint]) -> Vec<RatPoint> {
    let mut p: Vec<RatPoint> = points.to_vec();
    p.sort();
    p.dedup();
    if p.len() <= 2 {
        return p;
    }
    let mut lower: Vec<RatPoint> = Vec::new();
    for x in &p {
        while lower.len() >= 2 && !orient(&lower[lower.len() - 2], &lower[lower.len() - 1], x).is_positive() {
            lower.pop();
        }
        lower.push(x.clone());
    }
    let mut upper: Vec<RatPoint> = Vec::new();
    for x in p.iter().rev() {
        while upper.len() >= 2 && !orient(&upper[upper.len() - 2], &upper[upper.len() - 1], x).is_positive() {
            upper.pop();
        }
        upper.push(x.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Closed membership in a convex counterclockwise polygon.
fn in_convex(poly: &[RatPoint], x: &RatPoint) -> bool {
    match poly.len() {
        0 => false,
        1 => poly[0] == *x,
        2 => {
            orient(&poly[0], &poly[1], x).is_zero()
                && !(x - &poly[0]).dot(&(x - &poly[1])).is_positive()
        }
        n => (0..n).all(|i| !orient(&poly[i], &poly[(i + 1) % n], x).is_negative()),
    }
}

// ---------------------------------------------------------------------------
// Piecewise-linear charts

type Mat = [Rat; 4];

fn mat_id() -> Mat {
    [Rat::one(), Rat::zero(), Rat::zero(), Rat::one()]
}

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    [
        &a[0] * &b[0] + &a[1] * &b[2],
        &a[0] * &b[1] + &a[1] * &b[3],
        &a[2] * &b[0] + &a[3] * &b[2],
        &a[2] * &b[1] + &a[3] * &b[3],
    ]
}

fn mat_inv(a: &Mat) -> Mat {
    let det = &a[0] * &a[3] - &a[1] * &a[2];
    [&a[3] / &det, -(&a[1] / &det), -(&a[2] / &det), &a[0] / &det]
}

fn mat_apply(a: &Mat, v: &RatPoint) -> RatPoint {
    pt(&a[0] * &v.0[0] + &a[1] * &v.0[1], &a[2] * &v.0[0] + &a[3] * &v.0[1])
}

/// A continuous, homogeneous, piecewise-linear, orientation-preserving map of
/// the plane: breakpoint rays sorted by angle and one matrix per cone (cone
/// `i` runs counterclockwise from ray `i` to ray `i+1`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PlMap {
    rays: Vec<LatticePoint>,
    mats: Vec<Mat>,
}

impl PlMap {
    pub fn identity() -> Self {
        PlMap { rays: Vec::new(), mats: vec![mat_id()] }
    }

    /// `y ↦ y + max(0, u·y)·v` with `u` the primitive covector vanishing on `v`.
    fn straightening(v: &LatticePoint) -> Self {
        let vr = v.to_rat();
        let (pv, _) = v.primitive();
        // u·y = cross(v_prim, y), positive to the left of v
        let u = [-&pv.0[1], pv.0[0].clone()];
        let shear: Mat = [
            Rat::one() + Rat::from_integer(&vr.0[0].to_integer() * &u[0]),
            Rat::from_integer(&vr.0[0].to_integer() * &u[1]),
            Rat::from_integer(&vr.0[1].to_integer() * &u[0]),
            Rat::one() + Rat::from_integer(&vr.0[1].to_integer() * &u[1]),
        ];
        let neg = -&pv;
        let mut m = PlMap { rays: vec![pv, neg], mats: Vec::new() };
        m.rays.sort_by(|a, b| angle_cmp(&a.to_rat(), &b.to_rat()));
        // the cone from +v counterclockwise to −v is the sheared side
        let first_is_v = m.rays[0].to_rat().dot(&vr).is_positive();
        m.mats = if first_is_v { vec![shear, mat_id()] } else { vec![mat_id(), shear] };
        m
    }

    pub fn rays(&self) -> &[LatticePoint] {
        &self.rays
    }

    fn cone_index(&self, y: &RatPoint) -> usize {
        let n = self.rays.len();
        if n == 0 {
            return 0;
        }
        match (0..n).rev().find(|&i| angle_cmp(&self.rays[i].to_rat(), y) != Ordering::Greater) {
            Some(i) => i,
            None => n - 1,
        }
    }

    fn interior(&self, i: usize) -> RatPoint {
        let n = self.rays.len();
        if n == 0 {
            return pt(Rat::one(), Rat::zero());
        }
        let r1 = self.rays[i].to_rat();
        if n == 1 {
            return -&r1;
        }
        let r2 = self.rays[(i + 1) % n].to_rat();
        let c = cross(&r1, &r2);
        if c.is_positive() {
            &r1 + &r2
        } else if c.is_negative() {
            -&(&r1 + &r2)
        } else {
            pt(-r1.0[1].clone(), r1.0[0].clone())
        }
    }

    fn linear_at(&self, y: &RatPoint) -> &Mat {
        &self.mats[self.cone_index(y)]
    }

    pub fn apply(&self, y: &RatPoint) -> RatPoint {
        if y.is_zero() {
            return y.clone();
        }
        mat_apply(self.linear_at(y), y)
    }

    pub fn inverse(&self) -> PlMap {
        let mut pairs: Vec<(LatticePoint, Mat)> =
            self.rays.iter().zip(&self.mats).map(|(r, m)| (prim(&mat_apply(m, &r.to_rat())), mat_inv(m))).collect();
        if pairs.is_empty() {
            return PlMap { rays: Vec::new(), mats: vec![mat_inv(&self.mats[0])] };
        }
        pairs.sort_by(|a, b| angle_cmp(&a.0.to_rat(), &b.0.to_rat()));
        let (rays, mats) = pairs.into_iter().unzip();
        PlMap { rays, mats }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PlMap) -> PlMap {
        let inv = inner.inverse();
        let mut rays: Vec<LatticePoint> = inner.rays.clone();
        rays.extend(self.rays.iter().map(|r| prim(&inv.apply(&r.to_rat()))));
        rays.sort_by(|a, b| angle_cmp(&a.to_rat(), &b.to_rat()));
        rays.dedup();
        let mut out = PlMap { rays, mats: Vec::new() };
        let n = out.rays.len().max(1);
        out.mats = (0..n)
            .map(|i| {
                let w = out.interior(i);
                mat_mul(self.linear_at(&inner.apply(&w)), inner.linear_at(&w))
            })
            .collect();
        out.merge();
        out
    }

    /// Drops breakpoint rays between cones with equal matrices.
    fn merge(&mut self) {
        loop {
            let n = self.rays.len();
            if n == 0 {
                return;
            }
            let Some(i) = (0..n).find(|&i| self.mats[(i + n - 1) % n] == self.mats[i]) else { return };
            if n == 1 {
                self.rays.clear();
                self.mats.truncate(1);
                return;
            }
            self.rays.remove(i);
            self.mats.remove(i);
            if n == 2 && self.mats.len() == 1 && self.rays.len() == 1 {
                // a single breakpoint cannot separate distinct linear pieces
                self.rays.clear();
            }
        }
    }

    /// Composes with the inverse of the linear part near a fixed direction.
    fn normalized(&self) -> (PlMap, Mat) {
        let g = RatPoint::from_i64s(&[1009, 1013]);
        let l = mat_inv(self.linear_at(&g));
        let m = PlMap { rays: self.rays.clone(), mats: self.mats.iter().map(|m| mat_mul(&l, m)).collect() };
        (m, l)
    }
}

/// A wall of the diagram transported into a chart.
#[derive(Clone, Debug)]
struct ChartWall {
    ray: LatticePoint,
    /// Exponent of the wall function (zero if it is never straightened).
    exp: LatticePoint,
    /// Index of the initial-wall ray it came from.
    initial: Option<usize>,
}

/// A seed chart: the map and the diagram's walls transported into it.
#[derive(Clone, Debug)]
pub struct Chart {
    pub map: PlMap,
    walls: Vec<ChartWall>,
    pub depth: u32,
}

impl Chart {
    /// Rays of the chart's diagram whose function exponent points along the
    /// ray: the summed exponent and the initial rays contributing to it.
    fn incoming(&self) -> Vec<(LatticePoint, Vec<usize>)> {
        let mut out: Vec<(LatticePoint, LatticePoint, Vec<usize>)> = Vec::new();
        for w in &self.walls {
            if w.exp.to_rat().ratio_to(&w.ray.to_rat()).is_some_and(|t| t.is_positive()) {
                let i = match out.iter().position(|(s, _, _)| *s == w.ray) {
                    Some(i) => {
                        out[i].1 = &out[i].1 + &w.exp;
                        i
                    }
                    None => {
                        out.push((w.ray.clone(), w.exp.clone(), Vec::new()));
                        out.len() - 1
                    }
                };
                out[i].2.extend(w.initial);
            }
        }
        out.into_iter().map(|(_, v, ids)| (v, ids)).collect()
    }

    fn straighten(&self, v: &LatticePoint) -> Chart {
        let t = PlMap::straightening(v);
        let vp = v.primitive().0.to_rat();
        let (map, l) = t.compose(&self.map).normalized();
        let walls = self
            .walls
            .iter()
            .map(|w| {
                let rr = w.ray.to_rat();
                let mut exp = mat_apply(t.linear_at(&rr), &w.exp.to_rat());
                if cross(&rr, &vp).is_zero() {
                    // the straightened wall's function is inverted
                    exp = -&exp;
                }
                ChartWall {
                    ray: prim(&mat_apply(&l, &t.apply(&rr))),
                    exp: mat_apply(&l, &exp).to_lattice().expect("unimodular"),
                    initial: w.initial,
                }
            })
            .collect();
        Chart { map, walls, depth: self.depth + 1 }
    }
}

/// Seed charts reachable by at most `depth` straightenings.
#[derive(Clone, Debug)]
pub struct ChartSet {
    pub charts: Vec<Chart>,
    /// No new chart would appear past the depth bound.
    pub closed: bool,
}

fn initial_chart(d: &Diagram) -> Result<Chart> {
    let init = initial_diagram(&d.fd, &d.seed)?;
    let mut walls = Vec::new();
    let mut next_initial = 0;
    for w in &d.walls {
        let exp = if w.func.is_one() || !w.func.exact {
            // only polynomial walls are ever straightened
            LatticePoint::zero(2)
        } else {
            w.func.direction.scale_i(w.func.degree() as i64)
        };
        let is_initial = w.support == Support::Line && init.walls.iter().any(|i| i.normal == w.normal);
        for ray in w.rays() {
            let initial = is_initial.then(|| {
                next_initial += 1;
                next_initial - 1
            });
            walls.push(ChartWall { ray, exp: exp.clone(), initial });
        }
    }
    Ok(Chart { map: PlMap::identity(), walls, depth: 0 })
}

/// Breadth-first closure of the seed charts under straightening.
pub fn seed_charts(d: &Diagram, depth: u32) -> Result<ChartSet> {
    if d.rank() != 2 {
        return Err(Error::NotRank2);
    }
    let start = initial_chart(d)?;
    let mut seen: BTreeSet<PlMap> = BTreeSet::new();
    seen.insert(start.map.clone());
    let mut charts = vec![start];
    let mut closed = true;
    let mut i = 0;
    while i < charts.len() {
        let c = charts[i].clone();
        i += 1;
        let inc = c.incoming();
        if inc.len() < 2 && !d.saturated {
            // the truncated diagram lacks some of this chart's initial walls
            closed = false;
        }
        for (v, _) in inc {
            let next = c.straighten(&v);
            if seen.contains(&next.map) {
                continue;
            }
            if next.depth > depth {
                closed = false;
                continue;
            }
            seen.insert(next.map.clone());
            charts.push(next);
        }
    }
    Ok(ChartSet { charts, closed })
}

/// Charts straightening maximal bends toward the origin at initial walls
/// only, each initial ray at most once (a chord straight in a chart turns by
/// less than a full circle, so it crosses each ray at most once).
fn initial_wall_charts(d: &Diagram) -> Result<Vec<Chart>> {
    let start = initial_chart(d)?;
    let mut seen: BTreeSet<(PlMap, u64)> = BTreeSet::new();
    seen.insert((start.map.clone(), 0));
    let mut queue = vec![(start, 0u64)];
    let mut out: Vec<Chart> = Vec::new();
    let mut i = 0;
    while i < queue.len() {
        let (c, used) = queue[i].clone();
        i += 1;
        for (v, ids) in c.incoming() {
            let fresh: u64 = ids.iter().map(|&k| 1u64 << k).fold(0, |a, b| a | b) & !used;
            if fresh == 0 {
                continue;
            }
            let next = c.straighten(&v);
            let key = (next.map.clone(), used | fresh);
            if seen.insert(key.clone()) {
                queue.push((next, key.1));
            }
        }
        if !out.iter().any(|o| o.map == c.map) {
            out.push(c);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Images of polygons

/// Crossing of the segment `[a, b]` with the ray through `r` (strictly
/// inside the segment), or the origin if the segment passes through it.
fn crossing(a: &RatPoint, b: &RatPoint, r: &RatPoint) -> Option<RatPoint> {
    let w = b - a;
    let c = cross(&w, r);
    if c.is_zero() {
        return None;
    }
    let t = -cross(a, r) / c;
    if !t.is_positive() || t >= Rat::one() {
        return None;
    }
    let x = a + &w.scale(&t);
    (x.is_zero() || x.dot(r).is_positive()).then_some(x)
}

/// The boundary of a polygon (closed loop) with its crossings of `rays`
/// inserted, in order.
fn refine_boundary(poly: &[RatPoint], rays: &[LatticePoint]) -> Vec<RatPoint> {
    let n = poly.len();
    let mut out: Vec<RatPoint> = Vec::new();
    let edges = if n == 2 { 2 } else { n };
    for i in 0..edges {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        out.push(a.clone());
        let w = b - a;
        let mut pts: Vec<(Rat, RatPoint)> = Vec::new();
        for r in rays {
            if let Some(x) = crossing(a, b, &r.to_rat()) {
                let t = (&x - a).ratio_to(&w).expect("on the edge");
                pts.push((t, x));
            }
        }
        pts.sort();
        pts.dedup();
        out.extend(pts.into_iter().map(|(_, x)| x));
    }
    out.dedup();
    out
}

/// Index of a strictly reflex vertex of a closed loop, if any.
fn reflex_vertex(loop_: &[RatPoint]) -> Option<usize> {
    let n = loop_.len();
    if n < 3 {
        return None;
    }
    (0..n).find(|&i| orient(&loop_[(i + n - 1) % n], &loop_[i], &loop_[(i + 1) % n]).is_negative())
}

/// Pulls a straight chord of a chart back to a broken line segment.
fn pull_back_chord(d: &Diagram, chart: &Chart, a: &RatPoint, b: &RatPoint) -> Result<Segment> {
    let inv = chart.map.inverse();
    let (ca, cb) = (chart.map.apply(a), chart.map.apply(b));
    let w = &cb - &ca;
    let mut ts: Vec<Rat> = vec![Rat::zero(), Rat::one()];
    for r in &inv.rays {
        if let Some(x) = crossing(&ca, &cb, &r.to_rat()) {
            if x.is_zero() {
                return Err(Error::ThroughOrigin);
            }
            ts.push((&x - &ca).ratio_to(&w).expect("on the chord"));
        }
    }
    ts.sort();
    ts.dedup();
    let pts: Vec<RatPoint> = ts.iter().map(|t| inv.apply(&(&ca + &w.scale(t)))).collect();
    let w0 = prim(&w).to_rat();
    let mut parts = Vec::new();
    for k in 0..pts.len() - 1 {
        let mid = (&pts[k] + &pts[k + 1]).scale(&Rat::new(BigInt::one(), BigInt::from(2)));
        let vel = mat_apply(inv.linear_at(&chart.map.apply(&mid)), &w0);
        let m = (-&vel).to_lattice().ok_or(Error::Degenerate("chart is not unimodular"))?;
        let dur = (&pts[k + 1] - &pts[k]).ratio_to(&vel).ok_or(Error::Degenerate("pulled back chord is inconsistent"))?;
        let bend = if k == 0 {
            None
        } else {
            let x = pts[k].clone();
            let normal = d.walls_containing(&x).first().map(|&i| d.walls[i].normal.clone());
            normal.map(|normal| Bend { ray: ray_of(&x), point: x, normal })
        };
        parts.push((m, dur, bend));
    }
    segment_from_pieces(d, pts[0].clone(), parts)
}

/// Tries chords around a reflex vertex of the chart image until one pulls
/// back to a valid broken line segment leaving `S`.
fn reflex_witness(d: &Diagram, s: &RationalPointSet, chart: &Chart, boundary: &[RatPoint], i: usize) -> Option<Segment> {
    let n = boundary.len();
    let prev = &boundary[(i + n - 1) % n];
    let v = &boundary[i];
    let next = &boundary[(i + 1) % n];
    let halfway = |x: &RatPoint, y: &RatPoint| (x + y).scale(&Rat::new(BigInt::one(), BigInt::from(2)));
    let candidates = [(prev.clone(), next.clone()), (halfway(prev, v), halfway(v, next))];
    for (a, b) in candidates {
        let Ok(seg) = pull_back_chord(d, chart, &a, &b) else { continue };
        if !validate_segment(d, &seg).ok {
            continue;
        }
        if seg.polyline().iter().any(|x| !s.contains(x)) || leaves(s, &seg) {
            return Some(seg);
        }
    }
    None
}

/// Whether some point of the segment (sampled at piece midpoints) lies
/// outside `S`.
fn leaves(s: &RationalPointSet, seg: &Segment) -> bool {
    let pts = seg.polyline();
    pts.windows(2).any(|w| !s.contains(&(&w[0] + &w[1]).scale(&Rat::new(BigInt::one(), BigInt::from(2)))))
}

fn straight_witness(d: &Diagram, p: &RatPoint, q: &RatPoint) -> Option<Segment> {
    let w = q - p;
    let m = -&prim(&w);
    let dur = w.ratio_to(&(-&m).to_rat())?;
    let seg = segment_from_pieces(d, p.clone(), vec![(m, dur, None)]).ok()?;
    validate_segment(d, &seg).ok.then_some(seg)
}

fn is_blc_in_charts(d: &Diagram, s: &RationalPointSet, charts: &[Chart]) -> (Verdict, Vec<Witness>) {
    let pts = match s {
        RationalPointSet::Finite(v) => {
            let mut v = v.clone();
            v.sort();
            v.dedup();
            if v.len() <= 1 {
                return (Verdict::True, Vec::new());
            }
            // two distinct points: the straight segment between them leaves S
            let w = straight_witness(d, &v[0], &v[1]).map(Witness::Segment).into_iter().collect::<Vec<_>>();
            return (Verdict::False, w);
        }
        RationalPointSet::Polygon(v) => v,
    };
    if pts.len() <= 1 {
        return (Verdict::True, Vec::new());
    }
    for chart in charts {
        let inv_rays = chart.map.rays.clone();
        let boundary = refine_boundary(pts, &inv_rays);
        let image: Vec<RatPoint> = boundary.iter().map(|x| chart.map.apply(x)).collect();
        if let Some(i) = reflex_vertex(&image) {
            let w = reflex_witness(d, s, chart, &boundary, i).map(Witness::Segment).into_iter().collect();
            return (Verdict::False, w);
        }
        if pts.len() == 2 && image.windows(3).any(|w| !orient(&w[0], &w[1], &w[2]).is_zero()) {
            // a segment whose image bends: the chord between its ends leaves it
            let w = pull_back_chord(d, chart, &pts[0], &pts[1]).ok().map(Witness::Segment).into_iter().collect();
            return (Verdict::False, w);
        }
    }
    (Verdict::True, Vec::new())
}

/// Whether `S` is broken line convex: its image in every seed chart is convex.
/// A failure carries a validated broken line segment with endpoints in `S`
/// that leaves `S`. If the chart search is cut off by `depth` and the set
/// does not contain the origin, a positive answer is `Unknown`.
pub fn is_blc_2d_with_depth(d: &Diagram, s: &RationalPointSet, depth: u32) -> Result<CheckReport> {
    let set = seed_charts(d, depth)?;
    let (verdict, witnesses) = is_blc_in_charts(d, s, &set.charts);
    let verdict = match verdict {
        Verdict::True if !set.closed => {
            if s.contains(&RatPoint::zero(2)) {
                is_blc_in_charts(d, s, &initial_wall_charts(d)?).0
            } else {
                Verdict::Unknown
            }
        }
        v => v,
    };
    Ok(CheckReport::convexity(verdict, witnesses, set.charts.len(), set.closed))
}

/// [`is_blc_2d_with_depth`] at the default depth bound.
pub fn is_blc_2d(d: &Diagram, s: &RationalPointSet) -> Result<CheckReport> {
    is_blc_2d_with_depth(d, s, DEFAULT_DEPTH_BOUND)
}

/// Convexity in the identity chart and the charts straightening one initial
/// incoming wall, which decides broken line convexity for sets containing
/// the origin.
pub fn is_blc_2d_origin_shortcut(d: &Diagram, s: &RationalPointSet) -> Result<CheckReport> {
    if d.rank() != 2 {
        return Err(Error::NotRank2);
    }
    if !s.contains(&RatPoint::zero(2)) {
        return Err(Error::InvalidInput("the set does not contain the origin".into()));
    }
    let charts = initial_wall_charts(d)?;
    let (verdict, witnesses) = is_blc_in_charts(d, s, &charts);
    Ok(CheckReport::convexity(verdict, witnesses, charts.len(), true))
}

/// A broken line convex hull and whether it is exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hull {
    pub set: RationalPointSet,
    /// The chart set closed and the fixpoint was reached.
    pub exact: bool,
    pub rounds: usize,
}

/// The smallest broken line convex polygon containing `pts`: the fixpoint of
/// taking the ordinary convex hull in every chart and pulling it back.
pub fn blc_hull_2d_with_depth(d: &Diagram, pts: &[RatPoint], depth: u32) -> Result<Hull> {
    let charts = seed_charts(d, depth)?;
    let mut cur = convex_hull(pts);
    if cur.is_empty() {
        return Err(Error::InvalidInput("no points".into()));
    }
    for round in 1..=HULL_ROUNDS {
        let mut all: Vec<RatPoint> = cur.clone();
        for chart in &charts.charts {
            let image: Vec<RatPoint> =
                refine_boundary(&cur, &chart.map.rays).iter().map(|x| chart.map.apply(x)).collect();
            let hull = convex_hull(&image);
            let inv = chart.map.inverse();
            all.extend(refine_boundary(&hull, &inv.rays).iter().map(|y| inv.apply(y)));
        }
        let next = convex_hull(&all);
        if next == cur {
            return Ok(Hull { set: RationalPointSet::Polygon(cur), exact: charts.closed, rounds: round });
        }
        cur = next;
    }
    Ok(Hull { set: RationalPointSet::Polygon(cur), exact: false, rounds: HULL_ROUNDS })
}

/// [`blc_hull_2d_with_depth`] at the default depth bound.
pub fn blc_hull_2d(d: &Diagram, pts: &[RatPoint]) -> Result<Hull> {
    blc_hull_2d_with_depth(d, pts, DEFAULT_DEPTH_BOUND)
}

// ---------------------------------------------------------------------------
// Positivity

/// Chamber of the diagram containing `x` (index of the last wall ray at or
/// before `x` in angular order), or `None` on a wall ray or at the origin.
fn chamber(rays: &[RatPoint], x: &RatPoint) -> Option<usize> {
    if x.is_zero() || rays.is_empty() {
        return None;
    }
    Some(match (0..rays.len()).rev().find(|&i| angle_cmp(&rays[i], x) != Ordering::Greater) {
        Some(i) => i,
        None => rays.len() - 1,
    })
}

/// Whether `p` and `q` lie in one closed chamber of a finite-type diagram, in
/// which case `ϑ_p ϑ_q = ϑ_{p+q}`.
fn same_closed_chamber(rays: &[RatPoint], p: &RatPoint, q: &RatPoint) -> bool {
    if p.is_zero() || q.is_zero() {
        return true;
    }
    let n = rays.len();
    if n == 0 {
        return true;
    }
    let cones = |x: &RatPoint| -> Vec<usize> {
        let i = chamber(rays, x).unwrap_or(0);
        if angle_cmp(&rays[i], x) == Ordering::Equal {
            vec![i, (i + n - 1) % n]
        } else {
            vec![i]
        }
    };
    let cp = cones(p);
    let cq = cones(q);
    cp.iter().any(|c| cq.contains(c)) && {
        // a chamber of angle ≥ π is not a cluster cone
        let i = cp.iter().find(|c| cq.contains(c)).copied().unwrap_or(0);
        let (a, b) = (&rays[i], &rays[(i + 1) % n]);
        n > 1 && cross(a, b).is_positive()
    }
}

/// Exhaustive positivity check up to total degree `max_degree`: for all
/// integral `p ∈ aS`, `q ∈ bS` with `a + b ≤ max_degree`, every `r` with
/// `α(p, q, r) ≠ 0` (to order `K`) must lie in `(a+b)S`.
pub fn check_positive(d: &Diagram, s: &RationalPointSet, max_degree: u32, k: u32) -> Result<CheckReport> {
    if d.rank() != 2 {
        return Err(Error::NotRank2);
    }
    if max_degree < 2 {
        return Err(Error::InvalidInput("max_degree must be at least 2".into()));
    }
    let mut rays: Vec<RatPoint> = d.walls.iter().flat_map(|w| w.rays()).map(|r| r.to_rat()).collect();
    rays.sort_by(angle_cmp);
    rays.dedup();
    let mut cache = ThetaCache::new(d, k);
    let mut witnesses = Vec::new();
    let dilates: Vec<Vec<LatticePoint>> = (0..=max_degree).map(|a| s.lattice_points(a)).collect();
    for total in 2..=max_degree {
        for a in 1..=total / 2 {
            let b = total - a;
            for (i, p) in dilates[a as usize].iter().enumerate() {
                for (j, q) in dilates[b as usize].iter().enumerate() {
                    if a == b && j < i {
                        continue;
                    }
                    if d.saturated && same_closed_chamber(&rays, &p.to_rat(), &q.to_rat()) {
                        continue;
                    }
                    let table = structure_constants_peeling(d, p, q, &mut cache)?;
                    for (r, alpha) in table {
                        let rr = r.to_rat().scale(&Rat::new(BigInt::one(), BigInt::from(total)));
                        if s.contains(&rr) {
                            continue;
                        }
                        let check = structure_constant_report(d, p, q, &r, k)?;
                        if check.value != alpha {
                            return Err(Error::InvalidInput(format!(
                                "structure constant α({p}, {q}, {r}) disagrees between methods: {alpha} vs {}",
                                check.value
                            )));
                        }
                        witnesses.push(Witness::Positivity { p: p.clone(), q: q.clone(), r, a, b, alpha });
                        if witnesses.len() >= 4 {
                            return Ok(positivity_report(witnesses, max_degree, k));
                        }
                    }
                }
            }
        }
        if !witnesses.is_empty() {
            break;
        }
    }
    Ok(positivity_report(witnesses, max_degree, k))
}

fn positivity_report(witnesses: Vec<Witness>, max_degree: u32, k: u32) -> CheckReport {
    let verdict = if witnesses.is_empty() { Verdict::True } else { Verdict::False };
    CheckReport { verdict, witnesses, degree_checked: Some(max_degree), order_checked: Some(k), charts: 0, closed: true }
}

// ---------------------------------------------------------------------------
// Harness

/// One random polygon and both verdicts.
#[derive(Clone, Debug)]
pub struct Trial {
    pub polygon: RationalPointSet,
    pub positive: CheckReport,
    pub convex: CheckReport,
}

impl Trial {
    /// `Some(true)` on agreement, `Some(false)` on disagreement, `None` if
    /// the convexity verdict is unknown.
    pub fn agrees(&self) -> Option<bool> {
        let c = self.convex.verdict.as_bool()?;
        Some(self.positive.verdict.as_bool() == Some(c))
    }
}

/// Results of [`main_theorem_harness`].
#[derive(Clone, Debug)]
pub struct HarnessReport {
    pub trials: Vec<Trial>,
    pub agreements: usize,
    pub disagreements: usize,
    pub unknown: usize,
}

/// A random lattice polygon with nonempty interior: the convex hull of 3 to 5
/// points in `[−2, 2]²`, or its broken line convex hull.
fn random_polygon(d: &Diagram, rng: &mut ChaCha8Rng, take_hull: bool, depth: u32) -> Result<RationalPointSet> {
    loop {
        let n = rng.gen_range(3..=5);
        let pts: Vec<RatPoint> =
            (0..n).map(|_| RatPoint::from_i64s(&[rng.gen_range(-2..=2), rng.gen_range(-2..=2)])).collect();
        let hull = convex_hull(&pts);
        if hull.len() < 3 {
            continue;
        }
        if take_hull {
            let h = blc_hull_2d_with_depth(d, &hull, depth)?;
            if h.exact {
                return Ok(h.set);
            }
        }
        return Ok(RationalPointSet::Polygon(hull));
    }
}

/// Compares the positivity verdict with the convexity verdict on `trials`
/// random polygons (alternating ordinary and broken line convex hulls of
/// random lattice points).
pub fn main_theorem_harness(d: &Diagram, trials: usize, max_degree: u32, k: u32, seed: u64, depth: u32) -> Result<HarnessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = HarnessReport { trials: Vec::new(), agreements: 0, disagreements: 0, unknown: 0 };
    for t in 0..trials {
        let polygon = random_polygon(d, &mut rng, t % 2 == 1, depth)?;
        let positive = check_positive(d, &polygon, max_degree, k)?;
        let convex = is_blc_2d_with_depth(d, &polygon, depth)?;
        let trial = Trial { polygon, positive, convex };
        match trial.agrees() {
            Some(true) => report.agreements += 1,
            Some(false) => report.disagreements += 1,
            None => report.unknown += 1,
        }
        report.trials.push(trial);
    }
    Ok(report)
}

/// Human-readable description of a witness.
pub fn describe_witness(w: &Witness) -> String {
    match w {
        Witness::Positivity { p, q, r, a, b, alpha } => format!("p={p} q={q} r={r} a={a} b={b} alpha={alpha}"),
        Witness::Segment(s) => format!("segment {s}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{FixedData, Seed};
    use crate::scattering::{complete_rank2, initial_diagram};
    use proptest::prelude::*;

    fn rp(c: &[i64]) -> RatPoint {
        RatPoint::from_i64s(c)
    }

    fn fr(c: &[(i64, i64)]) -> RatPoint {
        RatPoint::from_fracs(c)
    }

    fn diagram(eps: [[i64; 2]; 2], d: [i64; 2], k: u32) -> Diagram {
        let fd = FixedData::from_exchange(&[eps[0].to_vec(), eps[1].to_vec()], &d, &[0, 1]).unwrap();
        complete_rank2(&initial_diagram(&fd, &Seed::standard(2)).unwrap(), k).unwrap()
    }

    fn a2() -> Diagram {
        diagram([[0, 1], [-1, 0]], [1, 1], 6)
    }

    fn g2() -> Diagram {
        diagram([[0, 3], [-1, 0]], [1, 3], 8)
    }

    fn poly(pts: &[RatPoint]) -> RationalPointSet {
        RationalPointSet::polygon(pts).unwrap()
    }

    fn g2_gvectors() -> Vec<RatPoint> {
        [[1, 0], [0, 1], [-1, 0], [0, -1], [1, -1], [1, -2], [1, -3], [2, -3]].iter().map(|c| rp(c)).collect()
    }

    #[test]
    fn hull_and_membership() {
        let h = convex_hull(&[rp(&[0, 0]), rp(&[2, 0]), rp(&[1, 0]), rp(&[0, 2]), rp(&[1, 1]), rp(&[2, 2])]);
        assert_eq!(h, vec![rp(&[0, 0]), rp(&[2, 0]), rp(&[2, 2]), rp(&[0, 2])]);
        assert!(in_convex(&h, &rp(&[1, 2])));
        assert!(!in_convex(&h, &fr(&[(1, 1), (5, 2)])));
        let s = poly(&h);
        assert_eq!(s.lattice_points(1).len(), 9);
        assert_eq!(s.lattice_points(2).len(), 25);
    }

    #[test]
    fn pl_maps_compose_and_invert() {
        let t = PlMap::straightening(&LatticePoint::from_i64s(&[0, 1]));
        assert_eq!(t.apply(&rp(&[-1, 0])), rp(&[-1, 1]));
        assert_eq!(t.apply(&rp(&[1, 0])), rp(&[1, 0]));
        let inv = t.inverse();
        for p in [rp(&[-3, 2]), rp(&[2, -5]), rp(&[-1, -1])] {
            assert_eq!(inv.apply(&t.apply(&p)), p);
        }
        assert_eq!(inv.compose(&t), PlMap::identity());
    }

    #[test]
    fn chart_counts() {
        let a = seed_charts(&a2(), DEFAULT_DEPTH_BOUND).unwrap();
        assert!(a.closed);
        assert_eq!(a.charts.len(), 5);
        let g = seed_charts(&g2(), DEFAULT_DEPTH_BOUND).unwrap();
        assert!(g.closed);
        assert_eq!(g.charts.len(), 8);
    }

    #[test]
    fn g2_hull_is_the_pentagon() {
        let d = g2();
        let h = blc_hull_2d(&d, &g2_gvectors()).unwrap();
        assert!(h.exact);
        let expected = poly(&[rp(&[1, 0]), fr(&[(0, 1), (3, 2)]), rp(&[-1, 0]), rp(&[1, -3]), rp(&[2, -3])]);
        assert_eq!(h.set, expected);
        assert_eq!(is_blc_2d(&d, &h.set).unwrap().verdict, Verdict::True);
    }

    #[test]
    fn g2_ordinary_hull_is_not_convex() {
        let d = g2();
        let s = poly(&g2_gvectors());
        let rep = is_blc_2d(&d, &s).unwrap();
        assert_eq!(rep.verdict, Verdict::False);
        let Some(Witness::Segment(seg)) = rep.witnesses.first() else { panic!("no witness") };
        assert!(validate_segment(&d, seg).ok);
        let ends = seg.polyline();
        assert!(s.contains(&ends[0]) && s.contains(ends.last().unwrap()));
        assert!(leaves(&s, seg) || ends.iter().any(|x| !s.contains(x)));
    }

    #[test]
    fn a2_chambers_are_convex() {
        let d = a2();
        let s = poly(&[rp(&[1, 0]), rp(&[0, 1]), rp(&[-1, 1]), rp(&[-1, 0]), rp(&[0, -1])]);
        let h = blc_hull_2d(&d, s.vertices()).unwrap();
        assert_eq!(h.set, s);
        assert_eq!(is_blc_2d(&d, &s).unwrap().verdict, Verdict::True);
        assert_eq!(check_positive(&d, &s, 3, 6).unwrap().verdict, Verdict::True);
    }

    #[test]
    fn finite_sets() {
        let d = a2();
        let one = RationalPointSet::Finite(vec![rp(&[1, 1])]);
        assert_eq!(is_blc_2d(&d, &one).unwrap().verdict, Verdict::True);
        let two = RationalPointSet::Finite(vec![rp(&[1, 1]), rp(&[2, -1])]);
        let rep = is_blc_2d(&d, &two).unwrap();
        assert_eq!(rep.verdict, Verdict::False);
        assert!(matches!(rep.witnesses.first(), Some(Witness::Segment(_))));
    }

    #[test]
    fn g2_positivity() {
        let d = g2();
        let pent = poly(&[rp(&[1, 0]), fr(&[(0, 1), (3, 2)]), rp(&[-1, 0]), rp(&[1, -3]), rp(&[2, -3])]);
        assert_eq!(check_positive(&d, &pent, 4, 8).unwrap().verdict, Verdict::True);
        let rep = check_positive(&d, &poly(&g2_gvectors()), 2, 8).unwrap();
        assert_eq!(rep.verdict, Verdict::False);
        let (e1, e2) = (LatticePoint::from_i64s(&[1, 0]), LatticePoint::from_i64s(&[-1, 0]));
        assert!(rep.witnesses.iter().any(|w| matches!(w,
            Witness::Positivity { p, q, r, a: 1, b: 1, alpha }
                if ((*p == e1 && *q == e2) || (*p == e2 && *q == e1))
                    && *r == LatticePoint::from_i64s(&[0, 3])
                    && alpha.is_one())));
    }

    #[test]
    fn chamber_pairs_multiply_as_monomials() {
        let d = a2();
        let mut rays: Vec<RatPoint> = d.walls.iter().flat_map(|w| w.rays()).map(|r| r.to_rat()).collect();
        rays.sort_by(angle_cmp);
        rays.dedup();
        let mut cache = ThetaCache::new(&d, 6);
        for p in [[1, 0], [2, 1], [1, 1], [0, -1], [-1, 1], [-2, 0]] {
            for q in [[1, 2], [3, 0], [-1, 0], [0, 2], [-1, -1], [1, -1]] {
                let (p, q) = (LatticePoint::from_i64s(&p), LatticePoint::from_i64s(&q));
                if same_closed_chamber(&rays, &p.to_rat(), &q.to_rat()) {
                    let t = structure_constants_peeling(&d, &p, &q, &mut cache).unwrap();
                    assert_eq!(t, vec![(&p + &q, Rat::one())], "{p} {q}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn hull_contains_input_and_is_idempotent(pts in proptest::collection::vec((-3i64..=3, -3i64..=3), 3..6)) {
            let d = g2();
            let pts: Vec<RatPoint> = pts.iter().map(|&(x, y)| rp(&[x, y])).collect();
            let h = blc_hull_2d(&d, &pts).unwrap();
            prop_assert!(h.exact);
            for p in &pts {
                prop_assert!(h.set.contains(p));
            }
            let again = blc_hull_2d(&d, h.set.vertices()).unwrap();
            prop_assert_eq!(&again.set, &h.set);
            if convex_hull(&pts).len() >= 3 {
                prop_assert_eq!(is_blc_2d(&d, &h.set).unwrap().verdict, Verdict::True);
            }
        }

        #[test]
        fn origin_shortcut_agrees(pts in proptest::collection::vec((-3i64..=3, -3i64..=3), 3..6), g in any::<bool>()) {
            let d = if g { g2() } else { a2() };
            let mut pts: Vec<RatPoint> = pts.iter().map(|&(x, y)| rp(&[x, y])).collect();
            pts.push(RatPoint::zero(2));
            let s = poly(&pts);
            prop_assume!(s.vertices().len() >= 3);
            prop_assert_eq!(
                is_blc_2d(&d, &s).unwrap().verdict,
                is_blc_2d_origin_shortcut(&d, &s).unwrap().verdict
            );
        }
    }
}
