//! Structure constants from balanced pairs, and the two constructions relating
//! balanced pairs of broken lines to broken line segments.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::brokenline::{
    bend_coeff, enumerate, ray_of, reverse, theta, validate_broken_line, validate_segment, walls_on_ray, wall_lines,
    Bend, BrokenLine, Piece, SegPiece, Segment,
};
use crate::error::{Error, Result};
use crate::lattice::{cross, LatticePoint, Rat, RatPoint};
use crate::scattering::Diagram;
use crate::series::LaurentPoly;

/// Two broken lines sharing the endpoint `base`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalancedPair {
    pub line1: BrokenLine,
    pub line2: BrokenLine,
    pub base: RatPoint,
}

impl BalancedPair {
    /// Whether both lines end at `base` and their final exponents sum to it.
    pub fn is_balanced(&self) -> bool {
        self.line1.endpoint == self.base
            && self.line2.endpoint == self.base
            && (self.line1.final_exponent() + self.line2.final_exponent()).to_rat() == self.base
    }
}

/// Data of the forward construction for one broken line (indices as in the
/// broken line, `0` at the endpoint).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstructionTrace {
    /// `ρ_i(γ)` for `i = 0..=s`.
    pub rho: Vec<BigInt>,
    /// `C_i` for `i = 0..=s`.
    pub c: Vec<BigInt>,
    /// `x̃_i` for `i = 0..=s`.
    pub xt: Vec<RatPoint>,
    /// `𝔪̃_i` for `i = 0..=s`.
    pub mt: Vec<LatticePoint>,
    /// Bend times `t_i` (with `t_0 = 0`).
    pub times: Vec<Rat>,
    /// Start time `τ ≤ 0` of the segment, at `𝔪_s/a`.
    pub tau: Rat,
    pub lambda: BigInt,
    /// Dilation applied when the endpoint is not integral.
    pub beta: BigInt,
    /// Exponents `𝔪_i` and the scaling `a` actually used (after dilation).
    pub m: Vec<LatticePoint>,
    pub a: BigInt,
}

/// Data of the reverse construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReverseTrace {
    /// Index of the piece of the segment containing `r̃` (or ending at it).
    pub split_index: usize,
    /// Segment exponents `𝔪̃_i^{(1)}`, `𝔪̃_i^{(2)}`.
    pub mt1: Vec<LatticePoint>,
    pub mt2: Vec<LatticePoint>,
    /// Broken line exponents `𝔪_i^{(1)}`, `𝔪_i^{(2)}`.
    pub m1: Vec<LatticePoint>,
    pub m2: Vec<LatticePoint>,
    pub rho1: Vec<BigInt>,
    pub rho2: Vec<BigInt>,
    pub a: BigInt,
    pub b: BigInt,
    pub times1: Vec<Rat>,
    pub times2: Vec<Rat>,
    pub total_time: Rat,
    pub tau: Rat,
    /// Offset used to index `r̃` when it lies on a bending wall.
    pub delta: Option<Rat>,
    /// Whether `a p̃ ∈ ρ̃₀⁽¹⁾M°` and `b q̃ ∈ ρ̃₀⁽²⁾M°`.
    pub hypotheses_hold: bool,
}

/// Result of gluing a balanced pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlueResult {
    pub segment: Segment,
    pub trace1: ConstructionTrace,
    pub trace2: ConstructionTrace,
    /// Time at which the segment passes through `x₀/(a+b)`.
    pub split_time: Rat,
}

/// Choice of the integers `(a, b)` in the reverse construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scaling {
    Auto,
    Fixed(BigInt, BigInt),
}

/// A structure constant with its provenance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlphaReport {
    pub value: Rat,
    /// The generic endpoint used.
    pub z: Option<RatPoint>,
    /// Two endpoints at different distances from `r` gave the same value.
    pub stable: bool,
    /// The truncation order suffices for this triple.
    pub certified: bool,
}

fn big(n: &BigInt) -> Rat {
    Rat::from_integer(n.clone())
}

fn pair_rat(u: &LatticePoint, x: &RatPoint) -> Rat {
    u.to_rat().dot(x)
}

fn require_rank2(d: &Diagram) -> Result<()> {
    if d.rank() == 2 {
        Ok(())
    } else {
        Err(Error::NotRank2)
    }
}

/// Walls relevant for a bend at `x` (at the origin, those on the recorded ray).
fn walls_at(d: &Diagram, x: &RatPoint, bend: &Bend) -> Vec<usize> {
    if x.is_zero() {
        walls_on_ray(d, &bend.normal, &bend.ray)
    } else {
        d.walls_containing(x)
    }
}

/// Builds a segment from `start` through the given `(exponent, duration, bend)`
/// pieces, with coefficient 1 on the first piece and the bend coefficients
/// of the diagram afterwards.
pub fn segment_from_pieces(d: &Diagram, start: RatPoint, parts: Vec<(LatticePoint, Rat, Option<Bend>)>) -> Result<Segment> {
    let mut pieces: Vec<SegPiece> = Vec::with_capacity(parts.len());
    let mut x = start.clone();
    let mut c = Rat::one();
    for (k, (m, dur, bend)) in parts.into_iter().enumerate() {
        if k > 0 {
            let prev = &pieces[k - 1].exponent;
            if *prev != m {
                let b = bend.as_ref().ok_or_else(|| Error::InvalidSegment("exponent changes without bend data".into()))?;
                let walls = walls_at(d, &x, b);
                let g = bend_coeff(d, &walls, prev, &m)?;
                if !g.is_positive() {
                    return Err(Error::InvalidSegment(alloc::format!("bend {prev} -> {m} at {x} is not allowed")));
                }
                c = &c * &g;
            }
        }
        x = &x - &m.to_rat().scale(&dur);
        pieces.push(SegPiece { exponent: m, coeff: c.clone(), duration: dur, bend });
    }
    Ok(Segment::new(start, pieces))
}

/// Builds a broken line with endpoint `x0` from exponents `m_0..m_s` (backward
/// numbering) and bend data `bends[i-1]` for the bend between `m_i` and `m_{i−1}`,
/// tracing the bend points backward from `x0`.
pub fn line_from_exponents(d: &Diagram, x0: &RatPoint, m: &[LatticePoint], bends: &[(LatticePoint, LatticePoint)]) -> Result<BrokenLine> {
    let s = bends.len();
    let mut pts = vec![x0.clone()];
    for i in 1..=s {
        let (normal, ray) = &bends[i - 1];
        let u = d.fd.normal_covector(normal);
        let um = u.dot(&m[i - 1]);
        if um.is_zero() {
            return Err(Error::Degenerate("piece runs parallel to its bending wall"));
        }
        let t = -pair_rat(&u, &pts[i - 1]) / big(&um);
        if t.is_negative() {
            return Err(Error::InvalidSegment("traced path misses a bending ray".into()));
        }
        let x = &pts[i - 1] + &m[i - 1].to_rat().scale(&t);
        if !x.is_zero() && ray_of(&x) != *ray {
            return Err(Error::InvalidSegment("traced path meets the bending line on the wrong ray".into()));
        }
        pts.push(x);
    }
    let mut pieces = vec![Piece { exponent: m[s].clone(), coeff: Rat::one(), bend: None }];
    let mut c = Rat::one();
    for i in (1..=s).rev() {
        let (normal, ray) = &bends[i - 1];
        let bend = Bend { point: pts[i].clone(), normal: normal.clone(), ray: ray.clone() };
        let walls = walls_at(d, &pts[i], &bend);
        let g = bend_coeff(d, &walls, &m[i], &m[i - 1])?;
        if !g.is_positive() {
            return Err(Error::InvalidSegment(alloc::format!("bend {} -> {} is not allowed", m[i], m[i - 1])));
        }
        c = &c * &g;
        pieces.push(Piece { exponent: m[i - 1].clone(), coeff: c.clone(), bend: Some(bend) });
    }
    Ok(BrokenLine { endpoint: x0.clone(), pieces, initial: m[s].clone(), perturbation: None })
}

/// `ρ_i(γ) = Π_{k=i}^{s−1} |⟨n_{0,k+1}, 𝔪_k⟩|` for `i = 0..=s`.
pub fn rho(d: &Diagram, gamma: &BrokenLine) -> Result<Vec<BigInt>> {
    let s = gamma.num_bends();
    let mut out = vec![BigInt::one(); s + 1];
    for i in (0..s).rev() {
        let u = d.fd.normal_covector(&gamma.bend(i + 1).normal);
        let p = u.dot(gamma.m(i)).abs();
        if p.is_zero() {
            return Err(Error::Degenerate("piece runs parallel to its bending wall"));
        }
        out[i] = &out[i + 1] * p;
    }
    Ok(out)
}

/// The unique point of the segment `[λ₁x, λ₂m]` on the ray `ℝ_{≥0}·ray`.
pub fn ray_segment_intersection(x: &RatPoint, lam1: &Rat, m: &LatticePoint, lam2: &Rat, ray: &RatPoint) -> Result<RatPoint> {
    if !lam1.is_positive() || !lam2.is_positive() {
        return Err(Error::InvalidInput("scalars must be positive".into()));
    }
    let p = x.scale(lam1);
    let q = m.to_rat().scale(lam2);
    let w = &q - &p;
    let c = cross(&w, ray);
    if c.is_zero() {
        return Err(Error::Degenerate("segment parallel to the ray"));
    }
    let s = -cross(&p, ray) / c;
    if s.is_negative() || s > Rat::one() {
        return Err(Error::Degenerate("segment misses the ray"));
    }
    let y = &p + &w.scale(&s);
    if y.dot(ray).is_negative() {
        return Err(Error::Degenerate("segment meets the opposite ray"));
    }
    Ok(y)
}

/// The support of the segment attached to `γ` and `(a, b)`: the points
/// `x̃_0, …, x̃_s` followed by `𝔪_s/a` (a single point when `x̃_0 = 𝔪_0/a`).
pub fn segment_support(d: &Diagram, gamma: &BrokenLine, a: &BigInt, b: &BigInt) -> Result<Vec<RatPoint>> {
    require_rank2(d)?;
    if !a.is_positive() || !b.is_positive() {
        return Err(Error::InvalidInput("a and b must be positive".into()));
    }
    let s = gamma.num_bends();
    let inv_a = Rat::new(BigInt::one(), a.clone());
    let x0 = gamma.endpoint.scale(&Rat::new(BigInt::one(), a + b));
    let target0 = gamma.m(0).to_rat().scale(&inv_a);
    if x0 == target0 {
        if s > 0 {
            return Err(Error::Degenerate("x̃₀ = 𝔪₀/a for a bending broken line"));
        }
        return Ok(vec![x0]);
    }
    let mut out = vec![x0];
    for i in 0..s {
        let ray = gamma.bend(i + 1).ray.to_rat();
        let next = ray_segment_intersection(&out[i], &Rat::one(), gamma.m(i), &inv_a, &ray)?;
        out.push(next);
    }
    out.push(gamma.m(s).to_rat().scale(&inv_a));
    Ok(out)
}

/// Attaches monomials to the support of `γ` (output of [`segment_support`]),
/// producing a segment from `𝔪_s/a` to `x₀/(a+b)`.
pub fn attach_monomials(
    d: &Diagram,
    support: &[RatPoint],
    gamma: &BrokenLine,
    a: &BigInt,
    b: &BigInt,
    lam: &BigInt,
) -> Result<(Segment, ConstructionTrace)> {
    require_rank2(d)?;
    if !lam.is_positive() {
        return Err(Error::InvalidInput("λ must be positive".into()));
    }
    let s = gamma.num_bends();
    // dilate by β when x₀ is not integral: the support is unchanged
    let beta = gamma.endpoint.denom();
    let (a, b) = (a * &beta, b * &beta);
    let m: Vec<LatticePoint> = (0..=s).map(|i| gamma.m(i).scale(&beta)).collect();
    let us: Vec<LatticePoint> = (1..=s).map(|i| d.fd.normal_covector(&gamma.bend(i).normal)).collect();
    let mut rho = vec![BigInt::one(); s + 1];
    for i in (0..s).rev() {
        let p = us[i].dot(&m[i]).abs();
        if p.is_zero() {
            return Err(Error::Degenerate("piece runs parallel to its bending wall"));
        }
        rho[i] = &rho[i + 1] * p;
    }
    let ar = big(&a);
    let target = |i: usize| m[i].to_rat().scale(&ar.recip());
    let xt: Vec<RatPoint> = support[..support.len().min(s + 1)].to_vec();
    if xt.len() != s + 1 {
        return Err(Error::InvalidInput("support does not match the broken line".into()));
    }
    let mut cs = vec![&a * (&a + &b) * &rho[0] * lam];
    let mut mt: Vec<LatticePoint> = Vec::with_capacity(s + 1);
    for i in 0..=s {
        if i > 0 {
            let num = &a * us[i - 1].dot(&mt[i - 1]);
            let den = us[i - 1].dot(&m[i - 1]);
            if !num.is_multiple_of(&den) {
                return Err(Error::Degenerate("C_i is not integral"));
            }
            cs.push(num / den);
        }
        let v = (&target(i) - &xt[i]).scale(&big(&cs[i]));
        let v = v.to_lattice().ok_or(Error::Degenerate("attached exponent is not integral"))?;
        mt.push(v);
    }
    // durations: piece i runs from x̃_{i+1} (or 𝔪_s/a) to x̃_i
    let mut dur = Vec::with_capacity(s + 1);
    for i in 0..=s {
        let from = if i == s { target(s) } else { xt[i + 1].clone() };
        let t = (&from - &xt[i])
            .ratio_to(&mt[i].to_rat())
            .filter(|t| !t.is_negative())
            .ok_or(Error::Degenerate("support inconsistent with the attached exponents"))?;
        dur.push(t);
    }
    let mut times = vec![Rat::zero()];
    for i in 0..s {
        let t = &times[i] - &dur[i];
        times.push(t);
    }
    let tau = &times[s] - &dur[s];
    let mut parts = Vec::with_capacity(s + 1);
    for k in 0..=s {
        let i = s - k;
        let bend = (i < s).then(|| {
            let g = gamma.bend(i + 1);
            Bend { point: xt[i + 1].clone(), normal: g.normal.clone(), ray: g.ray.clone() }
        });
        parts.push((mt[i].clone(), dur[i].clone(), bend));
    }
    let seg = segment_from_pieces(d, target(s), parts)?;
    if seg.end != xt[0] {
        return Err(Error::Degenerate("segment does not end at x̃₀"));
    }
    let trace = ConstructionTrace { rho, c: cs, xt, mt, times, tau, lambda: lam.clone(), beta, m, a };
    Ok((seg, trace))
}

/// [`segment_support`] followed by [`attach_monomials`].
pub fn construct_segment(d: &Diagram, gamma: &BrokenLine, a: &BigInt, b: &BigInt, lam: &BigInt) -> Result<(Segment, ConstructionTrace)> {
    let support = segment_support(d, gamma, a, b)?;
    attach_monomials(d, &support, gamma, a, b, lam)
}

/// Glues the segments of a balanced pair into one segment from `I(γ¹)/a` to
/// `I(γ²)/b` passing through `x₀/(a+b)` at time `bT/(a+b)`.
pub fn glue_balanced(d: &Diagram, pair: &BalancedPair, a: &BigInt, b: &BigInt) -> Result<GlueResult> {
    require_rank2(d)?;
    if !pair.is_balanced() || pair.base.to_lattice().is_none() {
        return Err(Error::NotBalanced);
    }
    let (g1, g2) = (&pair.line1, &pair.line2);
    let rho1 = rho(d, g1)?;
    let rho2 = rho(d, g2)?;
    let (seg1, trace1) = construct_segment(d, g1, a, b, &rho2[0])?;
    let (seg2, trace2) = construct_segment(d, g2, b, a, &rho1[0])?;
    let m1 = &trace1.mt[0];
    let m2 = &trace2.mt[0];
    if m1.is_zero() || m2.is_zero() {
        if !(m1.is_zero() && m2.is_zero()) {
            return Err(Error::Degenerate("only one side of the pair collapses"));
        }
        let x = seg1.end.clone();
        let point = Segment::new(x, vec![SegPiece { exponent: m1.clone(), coeff: Rat::one(), duration: Rat::zero(), bend: None }]);
        return Ok(GlueResult { segment: point, trace1, trace2, split_time: Rat::zero() });
    }
    if *m1 != -m2 {
        return Err(Error::Degenerate("joining exponents do not match"));
    }
    let rev2 = reverse(&seg2);
    let n1 = seg1.pieces.len();
    let last = &seg1.pieces[n1 - 1];
    let scale = &last.coeff / &rev2.pieces[0].coeff;
    let mut pieces: Vec<SegPiece> = seg1.pieces[..n1 - 1].to_vec();
    pieces.push(SegPiece {
        exponent: last.exponent.clone(),
        coeff: last.coeff.clone(),
        duration: &last.duration + &rev2.pieces[0].duration,
        bend: last.bend.clone(),
    });
    for p in &rev2.pieces[1..] {
        let mut p = p.clone();
        p.coeff = &p.coeff * &scale;
        pieces.push(p);
    }
    let segment = Segment::new(seg1.start.clone(), pieces);
    let split_time = seg1.total_time.clone();
    let check = validate_segment(d, &segment);
    if !check.ok {
        return Err(Error::InvalidSegment(alloc::format!("glued segment invalid: {:?}", check.violation)));
    }
    Ok(GlueResult { segment, trace1, trace2, split_time })
}

/// Merges consecutive pieces with equal exponents.
fn merge_straight(s: &Segment) -> Segment {
    let mut pieces: Vec<SegPiece> = Vec::new();
    for p in &s.pieces {
        match pieces.last_mut() {
            Some(q) if q.exponent == p.exponent => q.duration = &q.duration + &p.duration,
            _ => pieces.push(p.clone()),
        }
    }
    Segment::new(s.start.clone(), pieces)
}

fn denominators_lcm(points: &[RatPoint]) -> BigInt {
    points.iter().fold(BigInt::one(), |acc, p| acc.lcm(&p.denom()))
}

/// Splits a segment at time `τ` into a pair of broken lines balanced at
/// `(a+b)·s(τ)`, with `I(γ¹) = a·s(0)` and `I(γ²) = b·s(T)`.
pub fn pair_from_segment(d: &Diagram, seg: &Segment, tau: &Rat, scaling: &Scaling) -> Result<(BalancedPair, ReverseTrace)> {
    require_rank2(d)?;
    let s = merge_straight(seg);
    let total = s.total_time.clone();
    if !tau.is_positive() || *tau >= total {
        return Err(Error::TauOutOfRange);
    }
    let n = s.pieces.len();
    let starts = s.times();
    let j = (0..n)
        .find(|&k| starts[k] < *tau && *tau <= &starts[k] + &s.pieces[k].duration)
        .ok_or(Error::TauOutOfRange)?;
    let on_bend = j + 1 < n && *tau == starts[j + 1];
    let delta = on_bend.then(|| (tau - &starts[j]) / Rat::from_integer(BigInt::from(2)));
    let r = s.at(tau);
    let p = s.start.clone();
    let q = s.end.clone();
    let mt = |k: usize| s.pieces[k].exponent.clone();
    // the line of piece k extrapolated to time 0 and to time T
    let ext0 = |k: usize| &s.junction(k) + &s.pieces[k].exponent.to_rat().scale(&starts[k]);
    let ext_t = |k: usize| &s.junction(k) - &s.pieces[k].exponent.to_rat().scale(&(&total - &starts[k]));
    let bend_of = |k: usize| -> Result<Bend> {
        s.pieces[k].bend.clone().ok_or_else(|| Error::InvalidSegment("missing bend data".into()))
    };
    let s1 = j;
    let s2 = n - 1 - j;
    let mt1: Vec<LatticePoint> = (0..=s1).map(|i| mt(j - i)).collect();
    let mt2: Vec<LatticePoint> = (0..=s2).map(|i| mt(j + i)).collect();
    let bends1: Vec<Bend> = (1..=s1).map(|i| bend_of(j - i + 1)).collect::<Result<_>>()?;
    let bends2: Vec<Bend> = (1..=s2).map(|i| bend_of(j + i)).collect::<Result<_>>()?;
    let tilde_rho = |mts: &[LatticePoint], bends: &[Bend]| -> Result<Vec<BigInt>> {
        let sn = bends.len();
        let mut out = vec![BigInt::one(); sn + 1];
        for i in (0..sn).rev() {
            let u = d.fd.normal_covector(&bends[i].normal);
            let v = u.dot(&mts[i + 1]).abs();
            if v.is_zero() {
                return Err(Error::Degenerate("piece runs parallel to its bending wall"));
            }
            out[i] = &out[i + 1] * v;
        }
        Ok(out)
    };
    let rho1 = tilde_rho(&mt1, &bends1)?;
    let rho2 = tilde_rho(&mt2, &bends2)?;
    let e1: Vec<RatPoint> = (0..=s1).map(|i| ext0(j - i)).collect();
    let e2: Vec<RatPoint> = (0..=s2).map(|i| ext_t(j + i)).collect();
    let ratio = tau / &total;
    let (a, b) = match scaling {
        Scaling::Fixed(a, b) => {
            if !a.is_positive() || !b.is_positive() || Rat::new(b.clone(), a + b) != ratio {
                return Err(Error::NoValidScaling);
            }
            (a.clone(), b.clone())
        }
        Scaling::Auto => {
            let u = ratio.numer().clone();
            let v = ratio.denom().clone();
            let a0 = big(&(&v - &u));
            let b0 = big(&u);
            let mut pts: Vec<RatPoint> = vec![
                p.scale(&(&a0 / big(&rho1[0]))),
                q.scale(&(&b0 / big(&rho2[0]))),
            ];
            pts.extend(e1.iter().map(|x| x.scale(&a0)));
            pts.extend(e2.iter().map(|x| x.scale(&b0)));
            let k = denominators_lcm(&pts);
            (&k * (&v - &u), &k * &u)
        }
    };
    let (ar, br) = (big(&a), big(&b));
    let m1: Vec<LatticePoint> =
        e1.iter().map(|x| x.scale(&ar).to_lattice()).collect::<Option<_>>().ok_or(Error::NoValidScaling)?;
    let m2: Vec<LatticePoint> =
        e2.iter().map(|x| x.scale(&br).to_lattice()).collect::<Option<_>>().ok_or(Error::NoValidScaling)?;
    let in_multiple = |x: &RatPoint, k: &BigInt| x.scale(&big(k).recip()).to_lattice().is_some();
    let hypotheses_hold = in_multiple(&p.scale(&ar), &rho1[0]) && in_multiple(&q.scale(&br), &rho2[0]);
    let base = r.scale(&(&ar + &br));
    let bd = |bs: &[Bend]| bs.iter().map(|b| (b.normal.clone(), b.ray.clone())).collect::<Vec<_>>();
    let line1 = line_from_exponents(d, &base, &m1, &bd(&bends1))?;
    let line2 = line_from_exponents(d, &base, &m2, &bd(&bends2))?;
    for line in [&line1, &line2] {
        let c = validate_broken_line(d, line);
        if !c.ok {
            return Err(Error::InvalidSegment(alloc::format!("constructed broken line invalid: {:?}", c.violation)));
        }
    }
    let mut times1 = vec![tau.clone()];
    times1.extend((1..=s1).map(|i| starts[j - i + 1].clone()));
    let mut times2 = vec![tau.clone()];
    times2.extend((1..=s2).map(|i| starts[j + i].clone()));
    let pair = BalancedPair { line1, line2, base };
    let trace = ReverseTrace {
        split_index: j,
        mt1,
        mt2,
        m1,
        m2,
        rho1,
        rho2,
        a,
        b,
        times1,
        times2,
        total_time: total,
        tau: tau.clone(),
        delta,
        hypotheses_hold,
    };
    Ok((pair, trace))
}

/// The first `count` lattice directions, in a fixed spiral order, off every
/// wall line and not parallel to `r`.
fn generic_directions(d: &Diagram, r: &RatPoint, count: usize) -> Vec<RatPoint> {
    let lines = wall_lines(d);
    let mut out: Vec<RatPoint> = Vec::new();
    for radius in 1i64.. {
        for x in -radius..=radius {
            for y in [-radius, radius] {
                for v in [[x, y], [y, x]] {
                    let v = RatPoint::from_i64s(&v);
                    let fresh = !out.iter().any(|w| cross(w, &v).is_zero() && w.dot(&v).is_positive());
                    if fresh && lines.iter().all(|u| !u.dot(&v).is_zero()) && (r.is_zero() || !cross(r, &v).is_zero()) {
                        out.push(v);
                        if out.len() == count {
                            return out;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Half the distance along `v` from `r` to the first wall line crossed.
fn first_hit_half(d: &Diagram, r: &RatPoint, v: &RatPoint) -> Rat {
    let mut best: Option<Rat> = None;
    for u in wall_lines(d) {
        let (a, b) = (u.dot(r), u.dot(v));
        if a.is_zero() || b.is_zero() {
            continue;
        }
        let t = -a / b;
        if t.is_positive() && best.as_ref().map_or(true, |x| t < *x) {
            best = Some(t);
        }
    }
    best.unwrap_or_else(Rat::one) / Rat::from_integer(BigInt::from(2))
}

fn alpha_at(d: &Diagram, p: &LatticePoint, q: &LatticePoint, r: &LatticePoint, z: &RatPoint, ord: u32) -> Result<Rat> {
    let l1 = enumerate(d, p, z, ord)?;
    let l2 = enumerate(d, q, z, ord)?;
    let mut by_f: BTreeMap<LatticePoint, Rat> = BTreeMap::new();
    for l in &l2 {
        *by_f.entry(l.final_exponent().clone()).or_insert_with(Rat::zero) += l.final_coeff();
    }
    let mut total = Rat::zero();
    for l in &l1 {
        let need = r - l.final_exponent();
        if let Some(c2) = by_f.get(&need) {
            total += l.final_coeff() * c2;
        }
    }
    Ok(total)
}

/// `α(p, q, r)` with the endpoint used and stability information.
pub fn structure_constant_report(d: &Diagram, p: &LatticePoint, q: &LatticePoint, r: &LatticePoint, k: u32) -> Result<AlphaReport> {
    require_rank2(d)?;
    for x in [p, q, r] {
        d.fd.check_dim(x.dim())?;
    }
    let exact = |v: bool| AlphaReport { value: if v { Rat::one() } else { Rat::zero() }, z: None, stable: true, certified: true };
    if p.is_zero() {
        return Ok(exact(r == q));
    }
    if q.is_zero() {
        return Ok(exact(r == p));
    }
    let Some(ord) = d.fd.j_order(&(&(r - p) - q)) else {
        return Ok(AlphaReport { value: Rat::zero(), z: None, stable: true, certified: true });
    };
    if ord > k {
        return Ok(AlphaReport { value: Rat::zero(), z: None, stable: true, certified: false });
    }
    let certified = d.saturated || d.available_order(ord) >= ord && ord <= d.order;
    let rr = r.to_rat();
    let third = Rat::new(BigInt::one(), BigInt::from(3));
    'dirs: for v in generic_directions(d, &rr, 8) {
        let mut delta = first_hit_half(d, &rr, &v);
        let mut prev: Option<(Rat, RatPoint)> = None;
        for _ in 0..12 {
            let z = &rr + &v.scale(&delta);
            match alpha_at(d, p, q, r, &z, ord) {
                Ok(val) => {
                    if let Some((pv, pz)) = &prev {
                        if *pv == val {
                            return Ok(AlphaReport { value: val, z: Some(pz.clone()), stable: true, certified });
                        }
                    }
                    prev = Some((val, z));
                }
                Err(Error::ThroughOrigin) => continue 'dirs,
                Err(e) => return Err(e),
            }
            delta = &delta * &third;
        }
        if let Some((val, z)) = prev {
            return Ok(AlphaReport { value: val, z: Some(z), stable: false, certified });
        }
    }
    Err(Error::ThroughOrigin)
}

/// The structure constant `α(p, q, r)` of theta function multiplication,
/// modulo `J^{K+1}`.
pub fn structure_constant(d: &Diagram, p: &LatticePoint, q: &LatticePoint, r: &LatticePoint, k: u32) -> Result<Rat> {
    Ok(structure_constant_report(d, p, q, r, k)?.value)
}

/// All nonzero `α(p, q, r)` with `j_order(r − p − q) ≤ K`, sorted by `r`.
pub fn structure_constants(d: &Diagram, p: &LatticePoint, q: &LatticePoint, k: u32) -> Result<Vec<(LatticePoint, Rat)>> {
    let mut out = Vec::new();
    for ord in 0..=k {
        for pt in d.fd.monoid_points_of_order(ord) {
            let r = &(p + q) + &pt;
            let a = structure_constant(d, p, q, &r, k)?;
            if !a.is_zero() {
                out.push((r, a));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Theta functions at a fixed generic endpoint, computed on demand.
#[derive(Clone, Debug)]
pub struct ThetaCache {
    pub z: RatPoint,
    pub order: u32,
    cache: BTreeMap<LatticePoint, LaurentPoly>,
}

impl ThetaCache {
    /// A cache at the first point of a fixed list lying off every wall line.
    pub fn new(d: &Diagram, order: u32) -> Self {
        let lines = wall_lines(d);
        let z = [(13, 7, 5, 3), (7, 5, 9, 11), (3, 17, 5, 13), (-5, 7, 2, 9)]
            .iter()
            .map(|&(a, b, c, e)| RatPoint::from_fracs(&[(a, b), (c, e)]))
            .find(|z| lines.iter().all(|u| !u.dot(z).is_zero()))
            .unwrap_or_else(|| RatPoint::from_fracs(&[(1, 1), (1, 1000003)]));
        ThetaCache { z, order, cache: BTreeMap::new() }
    }

    /// `ϑ_m` at the cached endpoint.
    pub fn get(&mut self, d: &Diagram, m: &LatticePoint) -> Result<&LaurentPoly> {
        if !self.cache.contains_key(m) {
            let t = theta(d, m, &self.z, self.order)?;
            self.cache.insert(m.clone(), t);
        }
        Ok(&self.cache[m])
    }
}

/// All nonzero `α(p, q, r)` with `j_order(r − p − q) ≤ K`, by expanding
/// `ϑ_p ϑ_q` at one generic point and peeling off `ϑ_r` in order of `r`.
pub fn structure_constants_peeling(d: &Diagram, p: &LatticePoint, q: &LatticePoint, cache: &mut ThetaCache) -> Result<Vec<(LatticePoint, Rat)>> {
    let k = cache.order;
    if p.is_zero() || q.is_zero() {
        let r = if p.is_zero() { q.clone() } else { p.clone() };
        return Ok(vec![(r, Rat::one())]);
    }
    let tp = cache.get(d, p)?.clone();
    let tq = cache.get(d, q)?.clone();
    let mut prod = tp.mul(&d.fd, &tq);
    let base = prod.base.clone();
    let mut out = Vec::new();
    for ord in 0..=k {
        for pt in d.fd.monoid_points_of_order(ord) {
            let r = &base + &pt;
            let c = prod.coeff(&r);
            if c.is_zero() {
                continue;
            }
            out.push((r.clone(), c.clone()));
            let tr = if r.is_zero() { LaurentPoly::monomial(r.clone(), k) } else { cache.get(d, &r)?.clone() };
            for (m, e) in &tr.terms {
                prod.add_term(&d.fd, m.clone(), -(&c * e));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Points `0 = t_0 < … ` where the exponent of a segment changes, with the support
/// vertices; used to compare supports up to dilation.
pub fn support_vertices(s: &Segment) -> Vec<RatPoint> {
    let m = merge_straight(s);
    let mut out: Vec<RatPoint> = Vec::new();
    for k in 0..=m.pieces.len() {
        let x = m.junction(k);
        if out.last() != Some(&x) {
            out.push(x);
        }
    }
    out
}

/// Whether two segments have the same support up to a positive dilation.
pub fn same_support_up_to_dilation(s1: &Segment, s2: &Segment) -> Option<Rat> {
    let v1 = support_vertices(s1);
    let v2 = support_vertices(s2);
    if v1.len() != v2.len() {
        return None;
    }
    let mut factor: Option<Rat> = None;
    for (x, y) in v1.iter().zip(&v2) {
        if x.is_zero() && y.is_zero() {
            continue;
        }
        let t = y.ratio_to(x)?;
        if !t.is_positive() {
            return None;
        }
        match &factor {
            None => factor = Some(t),
            Some(f) if *f != t => return None,
            _ => {}
        }
    }
    Some(factor.unwrap_or_else(Rat::one))
}

impl core::fmt::Display for ReverseTrace {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let list = |v: &[LatticePoint]| v.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" ");
        write!(f, "a={} b={} m1=[{}] m2=[{}]", self.a, self.b, list(&self.m1), list(&self.m2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{rat, ri, FixedData, Seed};
    use crate::scattering::{complete_rank2, initial_diagram};
    use proptest::prelude::*;

    fn lp(c: &[i64]) -> LatticePoint {
        LatticePoint::from_i64s(c)
    }

    fn rp(c: &[i64]) -> RatPoint {
        RatPoint::from_i64s(c)
    }

    fn fr(c: &[(i64, i64)]) -> RatPoint {
        RatPoint::from_fracs(c)
    }

    fn bi(n: i64) -> BigInt {
        BigInt::from(n)
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

    fn bend(p: RatPoint, n: &[i64]) -> Option<Bend> {
        let ray = ray_of(&p);
        Some(Bend { point: p, normal: lp(n), ray })
    }

    /// The broken line with endpoint (2,4) and exponents (-1,-1), (-1,-2), (1,-2), (1,-3).
    fn forward_example_line(d: &Diagram) -> BrokenLine {
        let m = [lp(&[-1, -1]), lp(&[-1, -2]), lp(&[1, -2]), lp(&[1, -3])];
        let bends = [(lp(&[1, 0]), lp(&[0, 1])), (lp(&[0, 1]), lp(&[-1, 0])), (lp(&[1, 0]), lp(&[0, -1]))];
        line_from_exponents(d, &rp(&[2, 4]), &m, &bends).unwrap()
    }

    fn split_example_segment() -> Segment {
        let pieces = vec![
            SegPiece { exponent: lp(&[1, -3]), coeff: ri(1), duration: ri(1), bend: None },
            SegPiece { exponent: lp(&[1, -2]), coeff: ri(1), duration: ri(1), bend: bend(rp(&[0, -2]), &[1, 0]) },
            SegPiece { exponent: lp(&[-1, -2]), coeff: ri(1), duration: ri(1), bend: bend(rp(&[-1, 0]), &[0, 1]) },
            SegPiece { exponent: lp(&[-1, -1]), coeff: ri(1), duration: ri(2), bend: bend(rp(&[0, 2]), &[1, 0]) },
        ];
        Segment::new(rp(&[1, -5]), pieces)
    }

    fn timing_identity_holds(t: &ConstructionTrace) -> bool {
        let a = big(&t.a);
        (0..t.mt.len()).all(|i| &t.m[i].to_rat().scale(&a.recip()) - &t.xt[i] == t.mt[i].to_rat().scale(&(&t.times[i] - &t.tau)))
    }

    #[test]
    fn forward_example_support_and_monomials() {
        let d = a2();
        let g = forward_example_line(&d);
        assert!(validate_broken_line(&d, &g).ok);
        assert_eq!(rho(&d, &g).unwrap(), vec![bi(2), bi(2), bi(1), bi(1)]);
        let sup = segment_support(&d, &g, &bi(1), &bi(2)).unwrap();
        let want = [fr(&[(2, 3), (4, 3)]), fr(&[(0, 1), (2, 5)]), fr(&[(-1, 6), (0, 1)]), fr(&[(0, 1), (-2, 7)]), rp(&[1, -3])];
        assert_eq!(sup, want);
        let (seg, t) = attach_monomials(&d, &sup, &g, &bi(1), &bi(2), &bi(1)).unwrap();
        assert_eq!(t.c, vec![bi(6), bi(10), bi(12), bi(14)]);
        assert_eq!(t.mt, vec![lp(&[-10, -14]), lp(&[-10, -24]), lp(&[14, -24]), lp(&[14, -38])]);
        assert_eq!(&t.times[0] - &t.times[1], rat(1, 15));
        assert!(timing_identity_holds(&t));
        assert_eq!(seg.start, rp(&[1, -3]));
        assert_eq!(seg.end, want[0]);
        assert!(validate_segment(&d, &seg).ok);
    }

    #[test]
    fn non_integral_endpoint_is_dilated() {
        let d = a2();
        let m = [lp(&[-1, -1]), lp(&[-1, -2]), lp(&[1, -2]), lp(&[1, -3])];
        let bends = [(lp(&[1, 0]), lp(&[0, 1])), (lp(&[0, 1]), lp(&[-1, 0])), (lp(&[1, 0]), lp(&[0, -1]))];
        let g = line_from_exponents(&d, &fr(&[(1, 2), (1, 1)]), &m, &bends).unwrap();
        let (seg, t) = construct_segment(&d, &g, &bi(1), &bi(2), &bi(1)).unwrap();
        assert_eq!(t.beta, bi(2));
        assert!(timing_identity_holds(&t));
        assert_eq!(seg.end, fr(&[(1, 6), (1, 3)]));
        assert_eq!(seg.start, rp(&[1, -3]));
        assert!(validate_segment(&d, &seg).ok);
    }

    #[test]
    fn degenerate_support_is_a_point() {
        let d = a2();
        let g = BrokenLine {
            endpoint: rp(&[2, 2]),
            pieces: vec![Piece { exponent: lp(&[1, 1]), coeff: ri(1), bend: None }],
            initial: lp(&[1, 1]),
            perturbation: None,
        };
        assert_eq!(segment_support(&d, &g, &bi(1), &bi(1)).unwrap(), vec![rp(&[1, 1])]);
    }

    #[test]
    fn ray_intersection() {
        let y = ray_segment_intersection(&rp(&[2, 2]), &ri(1), &lp(&[-2, 0]), &ri(1), &lp(&[0, 1]).to_rat()).unwrap();
        assert_eq!(y, rp(&[0, 1]));
        assert!(ray_segment_intersection(&rp(&[2, 2]), &ri(1), &lp(&[-2, 0]), &ri(1), &lp(&[0, -1]).to_rat()).is_err());
    }

    #[test]
    fn split_example_fixed_scaling() {
        let d = a2();
        let s = split_example_segment();
        let (pair, t) = pair_from_segment(&d, &s, &rat(5, 2), &Scaling::Fixed(bi(1), bi(1))).unwrap();
        assert_eq!(pair.base, rp(&[-1, 2]));
        assert!(pair.is_balanced());
        assert_eq!(t.m1, vec![lp(&[-3, -4]), lp(&[1, -4]), lp(&[1, -5])]);
        assert_eq!(t.m2, vec![lp(&[2, 6]), lp(&[2, 4])]);
        assert_eq!(t.rho1[0], bi(2));
        assert_eq!(t.rho2[0], bi(1));
        assert!(!t.hypotheses_hold);
        assert_eq!(pair.line1.x(1), &fr(&[(-5, 2), (0, 1)]));
        assert_eq!(pair.line1.x(2), &rp(&[0, -10]));
        assert_eq!(pair.line2.x(1), &rp(&[0, 5]));
        assert_eq!(pair.line1.initial, lp(&[1, -5]));
        assert_eq!(pair.line2.initial, lp(&[2, 4]));
    }

    #[test]
    fn split_example_auto_and_glue() {
        let d = a2();
        let s = split_example_segment();
        let (pair, t) = pair_from_segment(&d, &s, &rat(5, 2), &Scaling::Auto).unwrap();
        assert!(t.hypotheses_hold);
        assert_eq!(Rat::new(t.b.clone(), &t.a + &t.b), rat(1, 2));
        assert_eq!(pair.line1.initial, s.start.scale(&big(&t.a)).to_lattice().unwrap());
        assert_eq!(pair.line2.initial, s.end.scale(&big(&t.b)).to_lattice().unwrap());
        let g = glue_balanced(&d, &pair, &t.a, &t.b).unwrap();
        assert!(timing_identity_holds(&g.trace1) && timing_identity_holds(&g.trace2));
        assert_eq!(g.segment.start, s.start);
        assert_eq!(g.segment.end, s.end);
        assert_eq!(g.segment.at(&g.split_time), s.at(&rat(5, 2)));
        assert_eq!(&g.split_time / &g.segment.total_time, rat(1, 2));
        assert!(same_support_up_to_dilation(&g.segment, &s).is_some());
    }

    #[test]
    fn bad_tau_and_scaling() {
        let d = a2();
        let s = split_example_segment();
        assert_eq!(pair_from_segment(&d, &s, &ri(0), &Scaling::Auto).unwrap_err(), Error::TauOutOfRange);
        assert_eq!(pair_from_segment(&d, &s, &ri(5), &Scaling::Auto).unwrap_err(), Error::TauOutOfRange);
        assert_eq!(
            pair_from_segment(&d, &s, &rat(5, 2), &Scaling::Fixed(bi(1), bi(2))).unwrap_err(),
            Error::NoValidScaling
        );
    }

    #[test]
    fn split_at_a_bend() {
        let d = a2();
        let s = split_example_segment();
        let (pair, t) = pair_from_segment(&d, &s, &ri(2), &Scaling::Auto).unwrap();
        assert!(t.delta.is_some());
        assert!(pair.is_balanced());
        let g = glue_balanced(&d, &pair, &t.a, &t.b).unwrap();
        assert!(same_support_up_to_dilation(&g.segment, &s).is_some());
    }

    #[test]
    fn unbalanced_rejected() {
        let d = a2();
        let g = forward_example_line(&d);
        let pair = BalancedPair { line1: g.clone(), line2: g, base: rp(&[2, 4]) };
        assert_eq!(glue_balanced(&d, &pair, &bi(1), &bi(1)).unwrap_err(), Error::NotBalanced);
    }

    #[test]
    fn alpha_trivial_cases() {
        let d = a2();
        assert_eq!(structure_constant(&d, &lp(&[0, 0]), &lp(&[1, 2]), &lp(&[1, 2]), 4).unwrap(), ri(1));
        assert_eq!(structure_constant(&d, &lp(&[1, 0]), &lp(&[0, 1]), &lp(&[-3, 0]), 4).unwrap(), ri(0));
        // theta functions in the positive chamber multiply as monomials
        assert_eq!(structure_constant(&d, &lp(&[1, 0]), &lp(&[0, 1]), &lp(&[1, 1]), 4).unwrap(), ri(1));
    }

    #[test]
    fn alpha_a2_table_matches_peeling() {
        let d = a2();
        let p = lp(&[1, 0]);
        let q = lp(&[-1, 0]);
        let table = structure_constants(&d, &p, &q, 4).unwrap();
        let mut cache = ThetaCache::new(&d, 4);
        let peel = structure_constants_peeling(&d, &p, &q, &mut cache).unwrap();
        assert_eq!(table, peel);
        assert!(table.iter().all(|(_, c)| c.is_integer() && c.is_positive()));
    }

    #[test]
    fn alpha_g2_example() {
        let d = g2();
        let p = lp(&[1, 0]);
        let q = lp(&[-1, 0]);
        let table = structure_constants(&d, &p, &q, 8).unwrap();
        assert_eq!(table, vec![(lp(&[0, 0]), ri(1)), (lp(&[0, 3]), ri(1))]);
        let rep = structure_constant_report(&d, &p, &q, &lp(&[0, 3]), 8).unwrap();
        assert!(rep.stable && rep.certified);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn alpha_commutes(px in -2i64..3, py in -2i64..3, qx in -2i64..3, qy in -2i64..3, k in 0u32..3) {
            let d = a2();
            let (p, q) = (lp(&[px, py]), lp(&[qx, qy]));
            let pts = d.fd.monoid_points_of_order(k);
            let r = &(&p + &q) + &pts[0];
            let a = structure_constant(&d, &p, &q, &r, 4).unwrap();
            let b = structure_constant(&d, &q, &p, &r, 4).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn forward_construction_identities(ax in -6i64..6, ay in -6i64..6, mx in -2i64..3, my in -2i64..3, a in 1i64..4, b in 1i64..4) {
            let d = a2();
            prop_assume!(mx != 0 || my != 0);
            let z = rp(&[ax, ay]);
            prop_assume!(!d.on_support(&z));
            let lines = enumerate(&d, &lp(&[mx, my]), &z, 5);
            prop_assume!(lines.is_ok());
            for g in lines.unwrap() {
                match construct_segment(&d, &g, &bi(a), &bi(b), &bi(1)) {
                    Ok((seg, t)) => {
                        prop_assert!(timing_identity_holds(&t));
                        prop_assert!(t.tau.is_negative());
                        prop_assert!(validate_segment(&d, &seg).ok, "{}", seg);
                    }
                    Err(Error::Degenerate(_)) => {}
                    Err(e) => prop_assert!(false, "{:?}", e),
                }
            }
        }

        #[test]
        fn split_then_glue_recovers_support(ax in -6i64..6, ay in -6i64..6, mx in -2i64..3, my in -2i64..3, num in 1i64..8) {
            let d = a2();
            prop_assume!(mx != 0 || my != 0);
            let z = rp(&[ax, ay]);
            prop_assume!(!d.on_support(&z));
            let lines = enumerate(&d, &lp(&[mx, my]), &z, 5);
            prop_assume!(lines.is_ok());
            for g in lines.unwrap() {
                let s = g.restriction(&ri(1)).unwrap();
                let tau = &s.total_time * rat(num, 8);
                let (pair, t) = pair_from_segment(&d, &s, &tau, &Scaling::Auto).unwrap();
                prop_assert!(t.hypotheses_hold);
                prop_assert_eq!(pair.line1.initial.to_rat(), s.start.scale(&big(&t.a)));
                prop_assert_eq!(pair.line2.initial.to_rat(), s.end.scale(&big(&t.b)));
                let glued = glue_balanced(&d, &pair, &t.a, &t.b).unwrap();
                prop_assert!(same_support_up_to_dilation(&glued.segment, &s).is_some(), "{} vs {}", glued.segment, s);
            }
        }
    }
}
