//! Broken lines, broken line segments, enumeration and theta functions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lattice::{cross, denom_lcm, LatticePoint, Rat, RatPoint};
use crate::scattering::Diagram;
use crate::series::LaurentPoly;

/// A bend: the point, the normal of the wall(s) bent at, and the support ray
/// containing the point (recorded explicitly so that limits at the origin keep it).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Bend {
    pub point: RatPoint,
    pub normal: LatticePoint,
    pub ray: LatticePoint,
}

/// A domain of linearity with its monomial `c z^m`; `bend` is the bend at its start.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Piece {
    pub exponent: LatticePoint,
    pub coeff: Rat,
    pub bend: Option<Bend>,
}

/// A broken line, pieces in forward order (unbounded piece first).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BrokenLine {
    pub endpoint: RatPoint,
    pub pieces: Vec<Piece>,
    pub initial: LatticePoint,
    pub perturbation: Option<RatPoint>,
}

impl BrokenLine {
    /// Number of bends `s`.
    pub fn num_bends(&self) -> usize {
        self.pieces.len() - 1
    }

    /// `𝔪_i` in backward numbering (`𝔪_0` is the final exponent).
    pub fn m(&self, i: usize) -> &LatticePoint {
        &self.pieces[self.num_bends() - i].exponent
    }

    /// Coefficient of the piece with backward index `i`.
    pub fn c(&self, i: usize) -> &Rat {
        &self.pieces[self.num_bends() - i].coeff
    }

    /// Bend `i ≥ 1` in backward numbering (between `𝔪_i` and `𝔪_{i−1}`).
    pub fn bend(&self, i: usize) -> &Bend {
        self.pieces[self.num_bends() - i + 1].bend.as_ref().expect("bend data on every non-initial piece")
    }

    /// `x_i` in backward numbering, `x_0` the endpoint.
    pub fn x(&self, i: usize) -> &RatPoint {
        if i == 0 {
            &self.endpoint
        } else {
            &self.bend(i).point
        }
    }

    pub fn final_exponent(&self) -> &LatticePoint {
        self.m(0)
    }

    pub fn final_coeff(&self) -> &Rat {
        self.c(0)
    }

    /// Backward travel time from `x_{i−1}` to `x_i`.
    pub fn leg_time(&self, i: usize) -> Option<Rat> {
        (self.x(i) - self.x(i - 1)).ratio_to(&self.m(i - 1).to_rat())
    }

    /// The bounded restriction starting `extra` time units before the first bend.
    pub fn restriction(&self, extra: &Rat) -> Result<Segment> {
        let s = self.num_bends();
        let ms = self.m(s).to_rat();
        let start = self.x(s) + &ms.scale(extra);
        let mut pieces = Vec::with_capacity(s + 1);
        for k in 0..=s {
            let i = s - k;
            let duration = if i == s {
                extra.clone()
            } else {
                self.leg_time(i + 1).ok_or_else(|| Error::InvalidSegment("bend points inconsistent with exponents".into()))?
            };
            let p = &self.pieces[k];
            pieces.push(SegPiece { exponent: p.exponent.clone(), coeff: p.coeff.clone(), duration, bend: p.bend.clone() });
        }
        Ok(Segment::new(start, pieces))
    }

    /// The final monomial `c(γ) z^{F(γ)}`.
    pub fn monomial(&self) -> (LatticePoint, Rat) {
        (self.final_exponent().clone(), self.final_coeff().clone())
    }

    /// The `Par` data: exponents and bend normals.
    pub fn par(&self) -> Vec<(LatticePoint, Option<LatticePoint>)> {
        self.pieces.iter().map(|p| (p.exponent.clone(), p.bend.as_ref().map(|b| b.normal.clone()))).collect()
    }

    fn sort_key(&self) -> (LatticePoint, Vec<Piece>) {
        (self.final_exponent().clone(), self.pieces.clone())
    }
}

impl fmt::Display for BrokenLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "endpoint {}:", self.endpoint)?;
        for p in &self.pieces {
            if let Some(b) = &p.bend {
                write!(f, " | bend at {}", b.point)?;
            }
            write!(f, " {}z^{}", p.coeff, p.exponent)?;
        }
        Ok(())
    }
}

/// A piece of a segment, traversed for `duration` with velocity `−exponent`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegPiece {
    pub exponent: LatticePoint,
    pub coeff: Rat,
    pub duration: Rat,
    pub bend: Option<Bend>,
}

/// A broken line segment `γ̃: [0, T] → M°_ℝ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: RatPoint,
    pub pieces: Vec<SegPiece>,
    pub end: RatPoint,
    pub total_time: Rat,
}

impl Segment {
    /// Builds a segment, deriving the end point and total time.
    pub fn new(start: RatPoint, pieces: Vec<SegPiece>) -> Self {
        let mut end = start.clone();
        let mut total = Rat::zero();
        for p in &pieces {
            end = &end - &p.exponent.to_rat().scale(&p.duration);
            total += &p.duration;
        }
        Segment { start, pieces, end, total_time: total }
    }

    /// Position at the start of piece `k` (`k = len` gives the end).
    pub fn junction(&self, k: usize) -> RatPoint {
        let mut x = self.start.clone();
        for p in &self.pieces[..k] {
            x = &x - &p.exponent.to_rat().scale(&p.duration);
        }
        x
    }

    /// Start times of the pieces.
    pub fn times(&self) -> Vec<Rat> {
        let mut t = Rat::zero();
        let mut out = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            out.push(t.clone());
            t += &p.duration;
        }
        out
    }

    /// Position at time `t ∈ [0, T]`.
    pub fn at(&self, t: &Rat) -> RatPoint {
        let mut x = self.start.clone();
        let mut rem = t.clone();
        for p in &self.pieces {
            let dt = if rem < p.duration { rem.clone() } else { p.duration.clone() };
            x = &x - &p.exponent.to_rat().scale(&dt);
            rem -= dt;
            if rem.is_zero() {
                break;
            }
        }
        x
    }

    /// Vertices of the support polyline (junctions with duplicates removed).
    pub fn polyline(&self) -> Vec<RatPoint> {
        let mut out: Vec<RatPoint> = Vec::new();
        for k in 0..=self.pieces.len() {
            let x = self.junction(k);
            if out.last() != Some(&x) {
                out.push(x);
            }
        }
        out
    }

    pub fn par(&self) -> Vec<(LatticePoint, Option<LatticePoint>)> {
        self.pieces.iter().map(|p| (p.exponent.clone(), p.bend.as_ref().map(|b| b.normal.clone()))).collect()
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.start)?;
        for p in &self.pieces {
            write!(f, " -[{}z^{} for {}]->", p.coeff, p.exponent, p.duration)?;
        }
        write!(f, " {}", self.end)
    }
}

/// The primitive integral direction of a nonzero rational point.
pub fn ray_of(x: &RatPoint) -> LatticePoint {
    let l = denom_lcm(&x.0);
    let v = LatticePoint(x.0.iter().map(|c| (c * Rat::from_integer(l.clone())).to_integer()).collect());
    v.primitive().0
}

/// Terms `(shift, coefficient, order)` of `Π_w f_w^{|⟨n_w, m⟩|}` over the given
/// walls (all on one line), with `order ≤ budget`. The trivial term comes first.
pub fn bend_terms(d: &Diagram, walls: &[usize], m: &LatticePoint, budget: u32) -> Result<Vec<(LatticePoint, Rat, u32)>> {
    let mut acc: BTreeMap<LatticePoint, (Rat, u32)> = BTreeMap::new();
    acc.insert(LatticePoint::zero(m.dim()), (Rat::one(), 0));
    for &i in walls {
        let w = &d.walls[i];
        let e = w.pair(m).abs();
        if e.is_zero() || w.func.is_one() {
            continue;
        }
        let n = budget / w.func.step;
        let series = w.func.pow_dense(&e, n)?;
        let mut next: BTreeMap<LatticePoint, (Rat, u32)> = BTreeMap::new();
        for (sh, (c, o)) in &acc {
            for (j, b) in series.iter().enumerate() {
                let o2 = o + j as u32 * w.func.step;
                if o2 > budget {
                    break;
                }
                if b.is_zero() {
                    continue;
                }
                let key = sh + &w.func.direction.scale_i(j as i64);
                let entry = next.entry(key).or_insert_with(|| (Rat::zero(), o2));
                entry.0 += c * b;
            }
        }
        acc = next;
    }
    let mut out: Vec<(LatticePoint, Rat, u32)> =
        acc.into_iter().filter(|(_, (c, _))| !c.is_zero()).map(|(s, (c, o))| (s, c, o)).collect();
    out.sort_by(|a, b| a.2.cmp(&b.2).then(a.0.cmp(&b.0)));
    Ok(out)
}

/// Walls on the line of `normal` whose support contains the ray `ray`.
pub fn walls_on_ray(d: &Diagram, normal: &LatticePoint, ray: &LatticePoint) -> Vec<usize> {
    let u = d.fd.normal_covector(normal);
    let r = ray.to_rat();
    (0..d.walls.len())
        .filter(|&i| {
            let w = &d.walls[i];
            (*w.covector() == u || *w.covector() == -&u) && w.contains(&r)
        })
        .collect()
}

/// Every allowed bend `(𝔪_out, coefficient)` for exponent `m_in` at `point`,
/// including the trivial one.
pub fn allowed_bends(d: &Diagram, point: &RatPoint, m_in: &LatticePoint, k: u32) -> Result<Vec<(LatticePoint, Rat)>> {
    d.fd.check_dim(point.dim())?;
    if point.is_zero() {
        return Err(Error::ThroughOrigin);
    }
    let walls = d.walls_containing(point);
    if walls.is_empty() {
        return Err(Error::PointOnNoWall);
    }
    Ok(bend_terms(d, &walls, m_in, k)?.into_iter().map(|(s, c, _)| (m_in + &s, c)).collect())
}

/// Allowed bends at a point of the ray `ray` on the line of `normal`
/// (used for bends recorded at the origin).
pub fn allowed_bends_on_ray(
    d: &Diagram,
    normal: &LatticePoint,
    ray: &LatticePoint,
    m_in: &LatticePoint,
    k: u32,
) -> Result<Vec<(LatticePoint, Rat)>> {
    let walls = walls_on_ray(d, normal, ray);
    if walls.is_empty() {
        return Err(Error::PointOnNoWall);
    }
    Ok(bend_terms(d, &walls, m_in, k)?.into_iter().map(|(s, c, _)| (m_in + &s, c)).collect())
}

/// Coefficient of the bend `m_in → m_out` at a bend, or zero if not allowed.
pub(crate) fn bend_coeff(d: &Diagram, walls: &[usize], m_in: &LatticePoint, m_out: &LatticePoint) -> Result<Rat> {
    let shift = m_out - m_in;
    if shift.is_zero() {
        return Ok(Rat::one());
    }
    let Some(budget) = d.fd.j_order(&shift) else { return Ok(Rat::zero()) };
    if let Some(c) = bend_coeff_on_line(d, walls, m_in, &shift)? {
        return Ok(c);
    }
    Ok(bend_terms(d, walls, m_in, budget)?
        .into_iter()
        .find(|(s, _, _)| *s == shift)
        .map(|(_, c, _)| c)
        .unwrap_or_else(Rat::zero))
}

/// The coefficient of `z^{shift}` in `Π_w f_w^{|⟨n_w, m⟩|}` when all active
/// walls share one direction `v` and `shift` is a multiple of `v`; this only
/// needs the single coefficient, which matters for large exponents.
fn bend_coeff_on_line(d: &Diagram, walls: &[usize], m: &LatticePoint, shift: &LatticePoint) -> Result<Option<Rat>> {
    let active: Vec<(&crate::scattering::Wall, BigInt)> = walls
        .iter()
        .map(|&i| (&d.walls[i], d.walls[i].pair(m).abs()))
        .filter(|(w, e)| !e.is_zero() && !w.func.is_one())
        .collect();
    let Some((first, _)) = active.first() else { return Ok(Some(Rat::zero())) };
    let v = &first.func.direction;
    if active.iter().any(|(w, _)| w.func.direction != *v) {
        return Ok(None);
    }
    let Some(j) = shift.to_rat().ratio_to(&v.to_rat()) else { return Ok(Some(Rat::zero())) };
    if !j.is_integer() || j.is_negative() {
        return Ok(Some(Rat::zero()));
    }
    let Ok(j) = usize::try_from(j.to_integer()) else { return Ok(None) };
    if let [(w, e)] = active.as_slice() {
        if w.func.exact && w.func.degree() == 1 {
            // (1 + c t)^e: a single binomial term
            let e = e.clone();
            if BigInt::from(j) > e {
                return Ok(Some(Rat::zero()));
            }
            let k = core::cmp::min(BigInt::from(j), &e - BigInt::from(j));
            let k = usize::try_from(k).map_err(|_| Error::Degenerate("bend exponent too large"))?;
            let mut binom = BigInt::one();
            for i in 0..k {
                binom = binom * (&e - BigInt::from(i)) / BigInt::from(i + 1);
            }
            return Ok(Some(Rat::from_integer(binom) * num_traits::pow(w.func.coeffs[0].clone(), j)));
        }
    }
    let mut acc: Vec<Rat> = vec![Rat::one()];
    acc.resize(j + 1, Rat::zero());
    let last = active.len() - 1;
    for (k, (w, e)) in active.iter().enumerate() {
        let series = w.func.pow_dense(e, j as u32)?;
        if k == last {
            let c = (0..=j).filter(|&i| !acc[i].is_zero() && !series[j - i].is_zero()).map(|i| &acc[i] * &series[j - i]);
            return Ok(Some(c.fold(Rat::zero(), |s, x| s + x)));
        }
        let mut next = vec![Rat::zero(); j + 1];
        for (i, a) in acc.iter().enumerate().filter(|(_, a)| !a.is_zero()) {
            for (l, b) in series.iter().enumerate().take(j + 1 - i).filter(|(_, b)| !b.is_zero()) {
                next[i + l] += a * b;
            }
        }
        acc = next;
    }
    Ok(Some(acc[j].clone()))
}

/// First wall hit strictly after `pos` along `+m`: the parameter and the walls.
pub(crate) fn next_hit(d: &Diagram, pos: &RatPoint, m: &LatticePoint) -> Option<(Rat, Vec<usize>)> {
    let mr = m.to_rat();
    let mut best: Option<(Rat, Vec<usize>)> = None;
    for (i, w) in d.walls.iter().enumerate() {
        let um = w.pair(m);
        if um.is_zero() {
            continue;
        }
        let u = w.covector().to_rat();
        let s = -u.dot(pos) / Rat::from_integer(um);
        if !s.is_positive() {
            continue;
        }
        if let Some((b, _)) = &best {
            if s > *b {
                continue;
            }
        }
        let x = pos + &mr.scale(&s);
        if !w.contains(&x) {
            continue;
        }
        match &mut best {
            Some((b, idx)) if *b == s => idx.push(i),
            _ => best = Some((s, vec![i])),
        }
    }
    best
}

struct Search<'a> {
    d: &'a Diagram,
    initial: LatticePoint,
    endpoint: RatPoint,
    out: Vec<BrokenLine>,
}

/// One backward step: `(bend point, wall normal, exponent after the bend, coefficient)`.
type Step = (RatPoint, LatticePoint, LatticePoint, Rat);

impl Search<'_> {
    fn dfs(&mut self, pos: &RatPoint, m: &LatticePoint, budget: u32, path: &mut Vec<Step>) -> Result<()> {
        let Some((s, walls)) = next_hit(self.d, pos, m) else {
            if *m == self.initial {
                self.accept(path);
            }
            return Ok(());
        };
        let x = pos + &m.to_rat().scale(&s);
        if x.is_zero() {
            return Err(Error::ThroughOrigin);
        }
        for (shift, g, o) in bend_terms(self.d, &walls, m, budget)? {
            if shift.is_zero() {
                self.dfs(&x, m, budget, path)?;
                continue;
            }
            let prev = m - &shift;
            if self.d.fd.j_order(&(&prev - &self.initial)) != Some(budget - o) {
                continue;
            }
            path.push((x.clone(), self.d.walls[walls[0]].normal.clone(), m.clone(), g));
            self.dfs(&x, &prev, budget - o, path)?;
            path.pop();
        }
        Ok(())
    }

    fn accept(&mut self, path: &[Step]) {
        let mut pieces = vec![Piece { exponent: self.initial.clone(), coeff: Rat::one(), bend: None }];
        let mut c = Rat::one();
        for (x, n, m_after, g) in path.iter().rev() {
            c = &c * g;
            pieces.push(Piece {
                exponent: m_after.clone(),
                coeff: c.clone(),
                bend: Some(Bend { point: x.clone(), normal: n.clone(), ray: ray_of(x) }),
            });
        }
        self.out.push(BrokenLine { endpoint: self.endpoint.clone(), pieces, initial: self.initial.clone(), perturbation: None });
    }
}

/// All broken lines with `I(γ) = initial`, `γ(0) = endpoint` and
/// `j_order(F(γ) − initial) ≤ K`, in a deterministic order.
pub fn enumerate(d: &Diagram, initial: &LatticePoint, endpoint: &RatPoint, k: u32) -> Result<Vec<BrokenLine>> {
    if d.rank() != 2 {
        return Err(Error::NotRank2);
    }
    d.fd.check_dim(initial.dim())?;
    d.fd.check_dim(endpoint.dim())?;
    if initial.is_zero() {
        return Err(Error::InvalidInput("broken lines need a nonzero initial exponent".into()));
    }
    if d.on_support(endpoint) {
        return Err(Error::EndpointOnSupport);
    }
    let mut search = Search { d, initial: initial.clone(), endpoint: endpoint.clone(), out: Vec::new() };
    for ord in 0..=k {
        for p in d.fd.monoid_points_of_order(ord) {
            let f = initial + &p;
            let mut path = Vec::new();
            search.dfs(endpoint, &f, ord, &mut path)?;
        }
    }
    let mut out = search.out;
    out.sort_by_key(BrokenLine::sort_key);
    Ok(out)
}

/// The theta function `ϑ_{x₀, m}` modulo `J^{K+1}`.
pub fn theta(d: &Diagram, m: &LatticePoint, endpoint: &RatPoint, k: u32) -> Result<LaurentPoly> {
    d.fd.check_dim(m.dim())?;
    if m.is_zero() {
        return Ok(LaurentPoly::monomial(m.clone(), k));
    }
    let mut x = endpoint.clone();
    let mut tries = 0u32;
    let lines = loop {
        match enumerate(d, m, &x, k) {
            Err(Error::ThroughOrigin) if tries < 64 => {
                tries += 1;
                x = same_chamber_nudge(d, endpoint, tries).ok_or(Error::ThroughOrigin)?;
            }
            other => break other?,
        }
    };
    let mut p = LaurentPoly::zero(m.clone(), k);
    for line in lines {
        let (e, c) = line.monomial();
        p.add_term(&d.fd, e, c);
    }
    Ok(p)
}

/// The point `x0 + 3^{-j} w` for a fixed direction `w`, if it lies in the same
/// connected component of the complement of the wall lines. Theta functions
/// are constant there.
fn same_chamber_nudge(d: &Diagram, x0: &RatPoint, j: u32) -> Option<RatPoint> {
    let w = &RatPoint::new(vec![-x0.0[1].clone(), x0.0[0].clone()]) + &RatPoint::from_fracs(&[(1, 7), (1, 11)]);
    let delta = Rat::new(BigInt::one(), BigInt::from(3).pow(j));
    let y = x0 + &w.scale(&delta);
    let lines = wall_lines(d);
    lines.iter().all(|u| crate::lattice::sgn(&u.dot(&y)) == crate::lattice::sgn(&u.dot(x0))).then_some(y)
}

/// Reverses a segment: pieces in reverse order, exponents negated,
/// coefficients `c_i ↦ c_first c_last / c_i`.
pub fn reverse(s: &Segment) -> Segment {
    let n = s.pieces.len();
    if n == 0 {
        return Segment::new(s.end.clone(), Vec::new());
    }
    let scale = &s.pieces[0].coeff * &s.pieces[n - 1].coeff;
    let pieces = (0..n)
        .map(|k| {
            let p = &s.pieces[n - 1 - k];
            SegPiece {
                exponent: -&p.exponent,
                coeff: &scale / &p.coeff,
                duration: p.duration.clone(),
                bend: if k == 0 { None } else { s.pieces[n - k].bend.clone() },
            }
        })
        .collect();
    Segment::new(s.end.clone(), pieces)
}

/// Outcome of [`validate_segment`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentCheck {
    pub ok: bool,
    /// Index of the offending piece and a description.
    pub violation: Option<(usize, String)>,
}

impl SegmentCheck {
    fn pass() -> Self {
        SegmentCheck { ok: true, violation: None }
    }

    fn fail(i: usize, msg: String) -> Self {
        SegmentCheck { ok: false, violation: Some((i, msg)) }
    }
}

/// Checks a segment: time arithmetic, positive coefficients, and that every
/// change of exponent is an allowed bend on a wall with the right coefficient.
pub fn validate_segment(d: &Diagram, s: &Segment) -> SegmentCheck {
    if s.pieces.is_empty() {
        return SegmentCheck::fail(0, "segment has no pieces".into());
    }
    let recomputed = Segment::new(s.start.clone(), s.pieces.clone());
    if recomputed.end != s.end || recomputed.total_time != s.total_time {
        return SegmentCheck::fail(s.pieces.len(), "end point or total time inconsistent with the pieces".into());
    }
    for (i, p) in s.pieces.iter().enumerate() {
        if p.duration.is_negative() {
            return SegmentCheck::fail(i, "negative duration".into());
        }
        if !p.coeff.is_positive() {
            return SegmentCheck::fail(i, "coefficient is not positive".into());
        }
    }
    for i in 1..s.pieces.len() {
        let (prev, next) = (&s.pieces[i - 1], &s.pieces[i]);
        if prev.exponent == next.exponent {
            if prev.coeff != next.coeff {
                return SegmentCheck::fail(i, "coefficient changes without a bend".into());
            }
            continue;
        }
        let x = s.junction(i);
        let walls = if x.is_zero() {
            match &next.bend {
                Some(b) => walls_on_ray(d, &b.normal, &b.ray),
                None => return SegmentCheck::fail(i, "bend at the origin without wall data".into()),
            }
        } else {
            d.walls_containing(&x)
        };
        if walls.is_empty() {
            return SegmentCheck::fail(i, format!("exponent changes at {x}, which lies on no wall"));
        }
        let g = match bend_coeff(d, &walls, &prev.exponent, &next.exponent) {
            Ok(g) => g,
            Err(e) => return SegmentCheck::fail(i, format!("bend at {x}: {e}")),
        };
        if !g.is_positive() {
            return SegmentCheck::fail(
                i,
                format!("bend {} -> {} at {x} is not allowed", prev.exponent, next.exponent),
            );
        }
        if next.coeff != &prev.coeff * &g {
            return SegmentCheck::fail(i, format!("coefficient at {x} should be {}", &prev.coeff * &g));
        }
    }
    SegmentCheck::pass()
}

/// Checks a broken line: initial piece, bends and coefficients.
pub fn validate_broken_line(d: &Diagram, line: &BrokenLine) -> SegmentCheck {
    let first = &line.pieces[0];
    if first.exponent != line.initial || !first.coeff.is_one() || first.bend.is_some() {
        return SegmentCheck::fail(0, "initial piece must be z^I with coefficient 1".into());
    }
    for i in 1..=line.num_bends() {
        if line.leg_time(i).map_or(true, |t| t.is_negative()) {
            return SegmentCheck::fail(line.num_bends() + 1 - i, "bend points inconsistent with exponents".into());
        }
    }
    match line.restriction(&Rat::one()) {
        Ok(seg) => validate_segment(d, &seg),
        Err(e) => SegmentCheck::fail(0, format!("{e}")),
    }
}

/// An affine function `a + bε` of the perturbation size.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Affine {
    a: Rat,
    b: Rat,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Need {
    Positive,
    NonZero,
}

fn affine_point(p0: &RatPoint, p1: &RatPoint, eps: &Rat) -> RatPoint {
    p0 + &p1.scale(eps)
}

/// Smallest positive `ε` at which any condition degenerates.
fn threshold(conds: &[(Affine, Need)]) -> Result<Option<Rat>> {
    let mut best: Option<Rat> = None;
    for (f, need) in conds {
        if f.a.is_zero() {
            let ok = match need {
                Need::Positive => f.b.is_positive(),
                Need::NonZero => !f.b.is_zero(),
            };
            if !ok {
                return Err(Error::NonGenericPerturbation);
            }
            continue;
        }
        if *need == Need::Positive && f.a.is_negative() {
            return Err(Error::NonGenericPerturbation);
        }
        if f.b.is_zero() {
            continue;
        }
        let root = -&f.a / &f.b;
        if root.is_positive() && best.as_ref().map_or(true, |b| root < *b) {
            best = Some(root);
        }
    }
    Ok(best)
}

/// Distinct wall lines as covectors (up to sign).
pub(crate) fn wall_lines(d: &Diagram) -> Vec<RatPoint> {
    let mut out: Vec<LatticePoint> = Vec::new();
    for w in &d.walls {
        let u = w.covector().clone();
        if !out.contains(&u) && !out.contains(&-&u) {
            out.push(u);
        }
    }
    out.iter().map(LatticePoint::to_rat).collect()
}

fn same_line(u: &RatPoint, v: &RatPoint) -> bool {
    cross(u, v).is_zero()
}

/// A family of generic broken lines (or segments) converging to a given one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerturbedFamily<T> {
    base: T,
    /// affine bend positions `p0 + ε p1`, indexed like the pieces
    affine: Option<(Vec<RatPoint>, Vec<RatPoint>)>,
    coeffs: Vec<Rat>,
    threshold: Option<Rat>,
    v: Option<RatPoint>,
}

impl<T: Clone> PerturbedFamily<T> {
    /// Supremum of admissible `ε` (`None` for no bound).
    pub fn threshold(&self) -> Option<&Rat> {
        self.threshold.as_ref()
    }

    /// Whether the family is constant (the input was already generic).
    pub fn is_constant(&self) -> bool {
        self.affine.is_none()
    }

    fn check_eps(&self, eps: &Rat) -> Result<()> {
        if !eps.is_positive() || self.threshold.as_ref().is_some_and(|t| eps >= t) {
            return Err(Error::InvalidInput(format!("perturbation size {eps} outside the stable range")));
        }
        Ok(())
    }
}

impl PerturbedFamily<BrokenLine> {
    /// The generic member at `ε`.
    pub fn at(&self, eps: &Rat) -> Result<BrokenLine> {
        self.check_eps(eps)?;
        Ok(self.eval(eps))
    }

    /// The limit `ε → 0` (degenerate pieces retained).
    pub fn limit(&self) -> BrokenLine {
        self.eval(&Rat::zero())
    }

    fn eval(&self, eps: &Rat) -> BrokenLine {
        let Some((p0, p1)) = &self.affine else { return self.base.clone() };
        let mut line = self.base.clone();
        let s = line.num_bends();
        line.endpoint = affine_point(&p0[0], &p1[0], eps);
        for i in 1..=s {
            let x = affine_point(&p0[i], &p1[i], eps);
            let k = s - i + 1;
            let bend = line.pieces[k].bend.as_mut().expect("bend data");
            if !x.is_zero() {
                bend.ray = ray_of(&x);
            }
            bend.point = x;
        }
        for (p, c) in line.pieces.iter_mut().zip(&self.coeffs) {
            p.coeff = c.clone();
        }
        line.perturbation = if eps.is_zero() { self.v.clone() } else { None };
        line
    }
}

impl PerturbedFamily<Segment> {
    /// The generic member at `ε`.
    pub fn at(&self, eps: &Rat) -> Result<Segment> {
        self.check_eps(eps)?;
        Ok(self.eval(eps))
    }

    /// The limit `ε → 0`.
    pub fn limit(&self) -> Segment {
        self.eval(&Rat::zero())
    }

    fn eval(&self, eps: &Rat) -> Segment {
        let Some((p0, p1)) = &self.affine else { return self.base.clone() };
        let pts: Vec<RatPoint> = p0.iter().zip(p1).map(|(a, b)| affine_point(a, b, eps)).collect();
        let n = self.base.pieces.len();
        let mut pieces = Vec::with_capacity(n);
        for k in 0..n {
            let mut p = self.base.pieces[k].clone();
            p.coeff = self.coeffs[k].clone();
            if k + 1 < n {
                p.duration = (&pts[k] - &pts[k + 1]).ratio_to(&p.exponent.to_rat()).unwrap_or_else(Rat::zero);
            }
            if k > 0 {
                if let Some(b) = p.bend.as_mut() {
                    if !pts[k].is_zero() {
                        b.ray = ray_of(&pts[k]);
                    }
                    b.point = pts[k].clone();
                }
            }
            pieces.push(p);
        }
        Segment::new(pts[0].clone(), pieces)
    }
}

fn is_generic_line(d: &Diagram, line: &BrokenLine) -> bool {
    !d.on_support(&line.endpoint) && (1..=line.num_bends()).all(|i| !line.x(i).is_zero())
}

/// The family of generic broken lines with endpoints `x₀ + εv`, the same
/// exponents and the same bending walls, for `0 < ε < threshold`.
pub fn perturbed_family(d: &Diagram, line: &BrokenLine, v: &RatPoint, k: u32) -> Result<PerturbedFamily<BrokenLine>> {
    if d.rank() != 2 {
        return Err(Error::NotRank2);
    }
    let coeffs: Vec<Rat> = line.pieces.iter().map(|p| p.coeff.clone()).collect();
    if is_generic_line(d, line) {
        return Ok(PerturbedFamily { base: line.clone(), affine: None, coeffs, threshold: None, v: None });
    }
    let s = line.num_bends();
    let lines = wall_lines(d);
    let mut p0 = vec![line.endpoint.clone()];
    let mut p1 = vec![v.clone()];
    let mut conds: Vec<(Affine, Need)> = Vec::new();
    for u in &lines {
        conds.push((Affine { a: u.dot(&p0[0]), b: u.dot(&p1[0]) }, Need::NonZero));
    }
    for i in 1..=s {
        let b = line.bend(i);
        let u = d.fd.normal_covector(&b.normal).to_rat();
        let m = line.m(i - 1).to_rat();
        let um = u.dot(&m);
        if um.is_zero() {
            return Err(Error::Degenerate("piece runs parallel to its bending wall"));
        }
        let sa = -u.dot(&p0[i - 1]) / &um;
        let sb = -u.dot(&p1[i - 1]) / &um;
        conds.push((Affine { a: sa.clone(), b: sb.clone() }, Need::Positive));
        let x0 = &p0[i - 1] + &m.scale(&sa);
        let x1 = &p1[i - 1] + &m.scale(&sb);
        let r = if b.point.is_zero() { b.ray.to_rat() } else { ray_of(&b.point).to_rat() };
        conds.push((Affine { a: r.dot(&x0), b: r.dot(&x1) }, Need::Positive));
        for l in &lines {
            if !same_line(l, &u) {
                conds.push((Affine { a: l.dot(&x0), b: l.dot(&x1) }, Need::NonZero));
            }
        }
        p0.push(x0);
        p1.push(x1);
    }
    for i in 0..=s {
        let m = line.m(i).to_rat();
        conds.push((Affine { a: cross(&p0[i], &m), b: cross(&p1[i], &m) }, Need::NonZero));
    }
    let thr = threshold(&conds)?;
    let mut fam = PerturbedFamily { base: line.clone(), affine: Some((p0, p1)), coeffs, threshold: thr, v: Some(v.clone()) };
    // sample strictly inside the stable range to read off the walls and coefficients
    let sample = fam.threshold.clone().map_or_else(Rat::one, |t| t / Rat::from_integer(BigInt::from(2)));
    let probe = fam.eval(&sample);
    let mut c = Rat::one();
    let mut out = vec![Rat::one()];
    for k2 in 1..probe.pieces.len() {
        let x = probe.pieces[k2].bend.as_ref().expect("bend data").point.clone();
        let walls = d.walls_containing(&x);
        let m_in = &probe.pieces[k2 - 1].exponent;
        let m_out = &probe.pieces[k2].exponent;
        let shift = m_out - m_in;
        let g = match d.fd.j_order(&shift) {
            Some(o) if o <= k || shift.is_zero() => bend_coeff(d, &walls, m_in, m_out)?,
            _ => Rat::zero(),
        };
        if !g.is_positive() {
            return Err(Error::NonGenericPerturbation);
        }
        c = &c * &g;
        out.push(c.clone());
    }
    fam.coeffs = out;
    if next_hit(d, probe.x(s), probe.m(s)).is_some_and(|(_, w)| {
        bend_terms(d, &w, probe.m(s), 0).map(|t| t.len() > 1).unwrap_or(true)
    }) {
        return Err(Error::NonGenericPerturbation);
    }
    Ok(fam)
}

/// The family of segments started at `start + εv`, traced forward with the
/// same exponents and bending walls; the last piece keeps its duration.
pub fn perturbed_segment_family(d: &Diagram, seg: &Segment, v: &RatPoint) -> Result<PerturbedFamily<Segment>> {
    if d.rank() != 2 {
        return Err(Error::NotRank2);
    }
    let n = seg.pieces.len();
    let coeffs: Vec<Rat> = seg.pieces.iter().map(|p| p.coeff.clone()).collect();
    let degenerate = seg.pieces[..n.saturating_sub(1)].iter().any(|p| p.duration.is_zero())
        || (0..=n).any(|k| seg.junction(k).is_zero());
    if !degenerate {
        return Ok(PerturbedFamily { base: seg.clone(), affine: None, coeffs, threshold: None, v: None });
    }
    let lines = wall_lines(d);
    let mut p0 = vec![seg.start.clone()];
    let mut p1 = vec![v.clone()];
    let mut conds: Vec<(Affine, Need)> = Vec::new();
    for k in 0..n {
        let m = seg.pieces[k].exponent.to_rat();
        let (t0, t1) = if k + 1 < n {
            let b = seg.pieces[k + 1]
                .bend
                .as_ref()
                .ok_or_else(|| Error::InvalidSegment("missing bend data".into()))?;
            let u = d.fd.normal_covector(&b.normal).to_rat();
            let um = u.dot(&m);
            if um.is_zero() {
                return Err(Error::Degenerate("piece runs parallel to its bending wall"));
            }
            let t0 = u.dot(&p0[k]) / &um;
            let t1 = u.dot(&p1[k]) / &um;
            conds.push((Affine { a: t0.clone(), b: t1.clone() }, Need::Positive));
            (t0, t1)
        } else {
            (seg.pieces[k].duration.clone(), Rat::zero())
        };
        let y0 = &p0[k] - &m.scale(&t0);
        let y1 = &p1[k] - &m.scale(&t1);
        conds.push((Affine { a: cross(&p0[k], &m), b: cross(&p1[k], &m) }, Need::NonZero));
        if k + 1 < n {
            let b = seg.pieces[k + 1].bend.as_ref().expect("checked above");
            let u = d.fd.normal_covector(&b.normal).to_rat();
            let r = if b.point.is_zero() { b.ray.to_rat() } else { ray_of(&b.point).to_rat() };
            conds.push((Affine { a: r.dot(&y0), b: r.dot(&y1) }, Need::Positive));
            for l in &lines {
                if !same_line(l, &u) {
                    conds.push((Affine { a: l.dot(&y0), b: l.dot(&y1) }, Need::NonZero));
                }
            }
        }
        p0.push(y0);
        p1.push(y1);
    }
    let thr = threshold(&conds)?;
    Ok(PerturbedFamily { base: seg.clone(), affine: Some((p0, p1)), coeffs, threshold: thr, v: Some(v.clone()) })
}
