//! Walls, scattering diagrams, path-ordered products, consistency and the
//! rank-2 order-by-order completion.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::lattice::{cross, sgn, FixedData, LatticePoint, Rat, RatPoint, Seed};
use crate::series::{wall_cross, LaurentPoly, WallFunction};

/// Support of a wall: the whole hyperplane `n⊥` or a ray from the origin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Support {
    Line,
    Ray(LatticePoint),
}

/// Incoming or outgoing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WallKind {
    Incoming,
    Outgoing,
}

/// A wall `(𝔡, f_𝔡)` with `𝔡 ⊆ n⊥`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wall {
    pub normal: LatticePoint,
    pub support: Support,
    pub func: WallFunction,
    /// Integral covector `u` with `u · m = ⟨n₀′, m⟩`.
    covector: LatticePoint,
}

impl Wall {
    /// Builds and validates a wall.
    pub fn new(fd: &FixedData, normal: LatticePoint, support: Support, func: WallFunction) -> Result<Self> {
        fd.check_dim(normal.dim())?;
        fd.check_dim(func.direction.dim())?;
        if normal.is_zero() {
            return Err(Error::InvalidInput("wall normal is zero".into()));
        }
        let covector = fd.normal_covector(&normal);
        if let Support::Ray(r) = &support {
            fd.check_dim(r.dim())?;
            if r.is_zero() || !covector.dot(r).is_zero() {
                return Err(Error::InvalidInput(format!("ray {r} is not in the hyperplane of normal {normal}")));
            }
        }
        let p = fd.p1_star(&normal)?;
        match func.direction.to_rat().ratio_to(&p.to_rat()) {
            Some(t) if t.is_positive() => {}
            _ => {
                return Err(Error::InvalidInput(format!(
                    "wall function direction {} is not a positive multiple of p1*({normal}) = {p}",
                    func.direction
                )))
            }
        }
        let support = match support {
            Support::Ray(r) => Support::Ray(r.primitive().0),
            s => s,
        };
        Ok(Wall { normal, support, func, covector })
    }

    pub fn covector(&self) -> &LatticePoint {
        &self.covector
    }

    /// Incoming iff the function direction lies in the support.
    pub fn classify(&self) -> WallKind {
        match &self.support {
            Support::Line => WallKind::Incoming,
            Support::Ray(r) => match self.func.direction.to_rat().ratio_to(&r.to_rat()) {
                Some(t) if t.is_positive() => WallKind::Incoming,
                _ => WallKind::Outgoing,
            },
        }
    }

    /// A primitive generator of the support line (rank 2).
    pub fn line_dir(&self) -> LatticePoint {
        let u = &self.covector.0;
        LatticePoint(vec![-u[1].clone(), u[0].clone()])
    }

    /// Rays making up the support (rank 2).
    pub fn rays(&self) -> Vec<LatticePoint> {
        match &self.support {
            Support::Line => {
                let r = self.line_dir();
                let neg = -&r;
                vec![r, neg]
            }
            Support::Ray(r) => vec![r.clone()],
        }
    }

    /// Whether `x` lies in the support.
    pub fn contains(&self, x: &RatPoint) -> bool {
        if !self.covector.to_rat().dot(x).is_zero() {
            return false;
        }
        match &self.support {
            Support::Line => true,
            Support::Ray(r) => !r.to_rat().dot(x).is_negative(),
        }
    }

    /// `⟨n₀′, m⟩` for an exponent `m`.
    pub fn pair(&self, m: &LatticePoint) -> BigInt {
        self.covector.dot(m)
    }
}

impl fmt::Display for Wall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.support {
            Support::Line => write!(f, "line {}⊥: {}", self.normal, self.func),
            Support::Ray(r) => write!(f, "ray {r}: {}", self.func),
        }
    }
}

/// A finite scattering diagram.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagram {
    pub fd: FixedData,
    pub seed: Seed,
    pub walls: Vec<Wall>,
    /// Consistency order `K`.
    pub order: u32,
    /// Every wall function is an exact polynomial and the diagram is consistent
    /// to all orders.
    pub saturated: bool,
}

impl Diagram {
    pub fn new(fd: FixedData, seed: Seed, walls: Vec<Wall>, order: u32, saturated: bool) -> Self {
        Diagram { fd, seed, walls, order, saturated }
    }

    pub fn rank(&self) -> usize {
        self.fd.rank()
    }

    /// Indices of walls whose support contains `x`.
    pub fn walls_containing(&self, x: &RatPoint) -> Vec<usize> {
        (0..self.walls.len()).filter(|&i| self.walls[i].contains(x)).collect()
    }

    /// Whether `x` lies in the support of the diagram.
    pub fn on_support(&self, x: &RatPoint) -> bool {
        self.walls.iter().any(|w| w.contains(x))
    }

    /// The largest order at which wall functions are available.
    pub fn available_order(&self, k: u32) -> u32 {
        self.walls.iter().fold(k, |acc, w| w.func.effective_order(acc))
    }

    fn require_rank2(&self) -> Result<()> {
        if self.rank() == 2 {
            Ok(())
        } else {
            Err(Error::NotRank2)
        }
    }
}

/// Classifies a wall as incoming or outgoing.
pub fn classify(w: &Wall) -> WallKind {
    w.classify()
}

/// The initial diagram: one incoming line `e_i⊥` with `1 + z^{p₁*(e_i)}` per unfrozen index.
pub fn initial_diagram(fd: &FixedData, seed: &Seed) -> Result<Diagram> {
    if !fd.p1_star_injective() {
        return Err(Error::DependentGenerators);
    }
    let mut walls = Vec::new();
    for &i in fd.unfrozen() {
        let n = seed.basis.get(i).cloned().ok_or(Error::DimensionMismatch)?;
        let dir = fd.p1_star(&n)?;
        let step = fd.j_order(&dir).unwrap_or(1);
        let func = WallFunction::binomial(dir, step, 0);
        walls.push(Wall::new(fd, n, Support::Line, func)?);
    }
    Ok(Diagram::new(fd.clone(), seed.clone(), walls, 0, false))
}

/// Half-plane index of `r` relative to the base direction `b`, for angular sorting.
fn half(b: &RatPoint, r: &RatPoint) -> u8 {
    let c = cross(b, r);
    if c.is_positive() || (c.is_zero() && b.dot(r).is_positive()) {
        0
    } else {
        1
    }
}

/// Counter-clockwise angular comparison of directions, starting at `b`.
pub fn angle_cmp(b: &RatPoint, r1: &RatPoint, r2: &RatPoint) -> Ordering {
    let (h1, h2) = (half(b, r1), half(b, r2));
    if h1 != h2 {
        return h1.cmp(&h2);
    }
    let c = cross(r1, r2);
    if c.is_positive() {
        Ordering::Less
    } else if c.is_negative() {
        Ordering::Greater
    } else {
        Ordering::Equal
    }
}

/// Crossing events of a counter-clockwise loop around the origin: wall rays in
/// angular order from a base direction off all walls.
fn loop_events(d: &Diagram) -> Vec<(LatticePoint, Vec<usize>)> {
    let mut groups: BTreeMap<LatticePoint, Vec<usize>> = BTreeMap::new();
    for (i, w) in d.walls.iter().enumerate() {
        for r in w.rays() {
            groups.entry(r.primitive().0).or_default().push(i);
        }
    }
    let base = (1i64..)
        .map(|k| LatticePoint::from_i64s(&[k, 1]))
        .find(|b| !groups.contains_key(b))
        .unwrap_or_else(|| LatticePoint::from_i64s(&[1, 1]))
        .to_rat();
    let mut events: Vec<(LatticePoint, Vec<usize>)> = groups.into_iter().collect();
    events.sort_by(|a, b| angle_cmp(&base, &a.0.to_rat(), &b.0.to_rat()));
    events
}

/// Applies a counter-clockwise loop around the origin to `p` (rank 2).
pub fn loop_product(d: &Diagram, p: &LaurentPoly, k: u32) -> Result<LaurentPoly> {
    d.require_rank2()?;
    let mut q = p.truncate(&d.fd, k);
    for (r, idx) in loop_events(d) {
        let v = LatticePoint(vec![-r.0[1].clone(), r.0[0].clone()]);
        for i in idx {
            let w = &d.walls[i];
            let sign = -w.pair(&v).signum().to_i32().unwrap_or(0);
            q = wall_cross(&d.fd, &q, &w.func, &w.normal, sign, k);
        }
    }
    Ok(q)
}

/// Path-ordered product along a polyline whose vertices avoid `Supp(𝔇)`.
pub fn path_ordered_product(d: &Diagram, path: &[RatPoint], p: &LaurentPoly, k: u32) -> Result<LaurentPoly> {
    for x in path {
        d.fd.check_dim(x.dim())?;
        if d.on_support(x) {
            return Err(Error::BadPath);
        }
    }
    let mut q = p.truncate(&d.fd, k);
    for seg in path.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let dir = b - a;
        let mut events: Vec<(Rat, usize, i32)> = Vec::new();
        for (i, w) in d.walls.iter().enumerate() {
            let u = w.covector().to_rat();
            let (ua, ub) = (u.dot(a), u.dot(b));
            if sgn(&ua) * sgn(&ub) >= 0 {
                continue;
            }
            let t = &ua / (&ua - &ub);
            let x = a + &dir.scale(&t);
            if x.is_zero() {
                return Err(Error::BadPath);
            }
            if w.contains(&x) {
                events.push((t, i, -sgn(&u.dot(&dir))));
            }
        }
        events.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.cmp(&y.1)));
        // simultaneous crossings must lie on a single hyperplane
        for pair in events.windows(2) {
            if pair[0].0 == pair[1].0 {
                let (u0, u1) = (d.walls[pair[0].1].covector(), d.walls[pair[1].1].covector());
                if u0 != u1 && *u0 != -u1 {
                    return Err(Error::BadPath);
                }
            }
        }
        for (_, i, sign) in events {
            let w = &d.walls[i];
            q = wall_cross(&d.fd, &q, &w.func, &w.normal, sign, k);
        }
    }
    Ok(q)
}

/// Loop discrepancies `𝔭(z^{f_i}) − z^{f_i}` for the basis exponents.
pub fn loop_discrepancies(d: &Diagram, k: u32) -> Result<Vec<LaurentPoly>> {
    d.require_rank2()?;
    let mut out = Vec::new();
    for i in 0..2 {
        let m = LatticePoint::unit(2, i);
        let p = LaurentPoly::monomial(m, k);
        let q = loop_product(d, &p, k)?;
        out.push(q.sub(&d.fd, &p)?);
    }
    Ok(out)
}

/// Whether the loop product fixes `z^{f₁}` and `z^{f₂}` mod `J^{k+1}`, with the
/// discrepancy per generator.
pub fn check_consistent(d: &Diagram, k: u32) -> Result<(bool, Vec<LaurentPoly>)> {
    let disc = loop_discrepancies(d, k)?;
    Ok((disc.iter().all(LaurentPoly::is_zero), disc))
}

/// Consistent completion of a rank-2 diagram modulo `J^{K+1}`.
pub fn complete_rank2(d_in: &Diagram, k_max: u32) -> Result<Diagram> {
    d_in.require_rank2()?;
    let fd = &d_in.fd;
    if !fd.p1_star_injective() {
        return Err(Error::DependentGenerators);
    }
    if d_in.available_order(k_max) < k_max {
        return Err(Error::TruncationExceeded);
    }
    let mut d = d_in.clone();
    for w in d.walls.iter_mut() {
        if !w.func.exact {
            w.func = WallFunction::new(w.func.direction.clone(), w.func.step, w.func.coeffs.clone(), k_max, false);
        }
    }
    for k in 1..=k_max {
        let disc = loop_discrepancies(&d, k)?;
        let bases = [LatticePoint::unit(2, 0), LatticePoint::unit(2, 1)];
        let mut shifts: BTreeMap<LatticePoint, [Rat; 2]> = BTreeMap::new();
        for (i, q) in disc.iter().enumerate() {
            for (m, c) in &q.terms {
                let p = m - &bases[i];
                match fd.j_order(&p) {
                    Some(o) if o == k => {}
                    _ => return Err(Error::Degenerate("loop discrepancy below the current order")),
                }
                shifts.entry(p).or_insert_with(|| [Rat::zero(), Rat::zero()])[i] = c.clone();
            }
        }
        for (p, a) in shifts {
            add_correction(&mut d, &p, &a, k_max)?;
        }
        if !check_consistent(&d, k)?.0 {
            return Err(Error::Degenerate("completion failed to cancel the loop discrepancy"));
        }
    }
    sort_walls(&mut d.walls);
    d.order = k_max;
    d.saturated = false;
    let mut exact = d.clone();
    for w in exact.walls.iter_mut() {
        w.func.exact = true;
    }
    if check_consistent(&exact, 2 * k_max.max(1))?.0 {
        exact.saturated = true;
        return Ok(exact);
    }
    Ok(d)
}

/// Inserts or updates the outgoing ray `ℝ≥0(−p)` so that it cancels the
/// order-`k` loop term `a_i z^{f_i + p}`.
fn add_correction(d: &mut Diagram, p: &LatticePoint, a: &[Rat; 2], k_max: u32) -> Result<()> {
    let fd = &d.fd;
    let n_rat = fd.p1_star_preimage(p).ok_or(Error::Degenerate("discrepancy outside the image of p1*"))?;
    let n_int = n_rat.to_lattice().ok_or(Error::Degenerate("discrepancy outside the monoid"))?;
    let (n, kk) = n_int.primitive();
    let dir = fd.p1_star(&n)?;
    let u = fd.normal_covector(&n);
    let b = if !u.0[0].is_zero() {
        let b = &a[0] / Rat::from_integer(u.0[0].clone());
        if a[1] != &b * Rat::from_integer(u.0[1].clone()) {
            return Err(Error::Degenerate("loop discrepancy is not a wall-crossing derivation"));
        }
        b
    } else {
        if !a[0].is_zero() {
            return Err(Error::Degenerate("loop discrepancy is not a wall-crossing derivation"));
        }
        &a[1] / Rat::from_integer(u.0[1].clone())
    };
    let ray = (-p).primitive().0;
    let v = LatticePoint(vec![-ray.0[1].clone(), ray.0[0].clone()]);
    let eps = -u.dot(&v).signum().to_i32().unwrap_or(0);
    if eps == 0 {
        return Err(Error::Degenerate("correction ray is parallel to its own crossing"));
    }
    let c = -b * Rat::from_integer(BigInt::from(eps));
    let kk = kk.to_usize().ok_or(Error::Degenerate("order overflow"))?;
    let support = Support::Ray(ray);
    if let Some(w) = d.walls.iter_mut().find(|w| w.support == support && w.func.direction == dir) {
        let mut coeffs = w.func.coeffs.clone();
        if coeffs.len() < kk {
            coeffs.resize(kk, Rat::zero());
        }
        coeffs[kk - 1] += c;
        w.func = WallFunction::new(dir, w.func.step, coeffs, k_max, w.func.exact);
        return Ok(());
    }
    let step = fd.j_order(&dir).ok_or(Error::Degenerate("wall direction outside the monoid"))?;
    let mut coeffs = vec![Rat::zero(); kk];
    coeffs[kk - 1] = c;
    let func = WallFunction::new(dir, step, coeffs, k_max, false);
    let wall = Wall::new(fd, n, support, func)?;
    d.walls.push(wall);
    Ok(())
}

/// Lines first in input order, then rays counter-clockwise from `(1,0)`.
fn sort_walls(walls: &mut [Wall]) {
    let base = RatPoint::from_i64s(&[1, 0]);
    walls.sort_by(|a, b| match (&a.support, &b.support) {
        (Support::Line, Support::Line) => Ordering::Equal,
        (Support::Line, Support::Ray(_)) => Ordering::Less,
        (Support::Ray(_), Support::Line) => Ordering::Greater,
        (Support::Ray(r1), Support::Ray(r2)) => angle_cmp(&base, &r1.to_rat(), &r2.to_rat())
            .then_with(|| a.func.direction.cmp(&b.func.direction)),
    });
}

/// Whether every coefficient of every wall function is a nonnegative integer.
pub fn coefficients_positive_integral(d: &Diagram) -> bool {
    d.walls.iter().all(|w| w.func.coeffs.iter().all(|c| c.is_integer() && !c.is_negative()))
}

/// Whether `f` has coefficients `[1, c_1, …]` at the stored truncation.
pub fn func_matches(f: &WallFunction, expected: &[Rat]) -> bool {
    (0..expected.len()).all(|k| f.coeff(k as u32).map(|c| c == expected[k]).unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ri;
    use crate::series::wf_pow;

    fn lp(c: &[i64]) -> LatticePoint {
        LatticePoint::from_i64s(c)
    }

    fn fd_of(eps: [[i64; 2]; 2], d: [i64; 2]) -> FixedData {
        FixedData::from_exchange(&[eps[0].to_vec(), eps[1].to_vec()], &d, &[0, 1]).unwrap()
    }

    fn a2() -> FixedData {
        fd_of([[0, 1], [-1, 0]], [1, 1])
    }

    fn g2() -> FixedData {
        fd_of([[0, 3], [-1, 0]], [1, 3])
    }

    fn kron() -> FixedData {
        fd_of([[0, 2], [-2, 0]], [1, 1])
    }

    fn init(fd: &FixedData) -> Diagram {
        initial_diagram(fd, &Seed::standard(fd.rank())).unwrap()
    }

    fn ray_wall<'a>(d: &'a Diagram, ray: &[i64], dir: &[i64]) -> Option<&'a Wall> {
        d.walls.iter().find(|w| w.support == Support::Ray(lp(ray)) && w.func.direction == lp(dir))
    }

    #[test]
    fn initial_walls() {
        let d = init(&a2());
        assert_eq!(d.walls.len(), 2);
        assert_eq!(d.walls[0].func.direction, lp(&[0, 1]));
        assert_eq!(d.walls[1].func.direction, lp(&[-1, 0]));
        let d = init(&g2());
        assert_eq!(d.walls[0].func.direction, lp(&[0, 3]));
        assert_eq!(d.walls[1].func.direction, lp(&[-1, 0]));
        let empty = FixedData::from_exchange(&[vec![0, 1], vec![-1, 0]], &[1, 1], &[]).unwrap();
        assert!(init(&empty).walls.is_empty());
    }

    #[test]
    fn initial_principal_kronecker() {
        let (p, s) = crate::lattice::with_principal_coefficients(&kron(), &Seed::standard(2)).unwrap();
        let d = initial_diagram(&p, &s).unwrap();
        let dirs: Vec<_> = d.walls.iter().map(|w| w.func.direction.clone()).collect();
        assert_eq!(dirs, vec![lp(&[0, 2, 1, 0]), lp(&[-2, 0, 0, 1])]);
    }

    #[test]
    fn classify_examples() {
        let fd = a2();
        let d = init(&fd);
        assert_eq!(classify(&d.walls[0]), WallKind::Incoming);
        let f = WallFunction::from_fd(&fd, lp(&[-1, 1]), vec![ri(1)], 0, true).unwrap();
        let w = Wall::new(&fd, lp(&[1, 1]), Support::Ray(lp(&[1, -1])), f).unwrap();
        assert_eq!(classify(&w), WallKind::Outgoing);
        let kf = kron();
        let minus = WallFunction::from_fd(&kf, lp(&[-2, 2]), vec![ri(-1)], 6, true).unwrap();
        let f = wf_pow(&minus, -2, 6);
        let w = Wall::new(&kf, lp(&[1, 1]), Support::Ray(lp(&[1, -1])), f).unwrap();
        assert_eq!(classify(&w), WallKind::Outgoing);
    }

    #[test]
    fn wall_rejects_bad_ray() {
        let fd = a2();
        let f = WallFunction::from_fd(&fd, lp(&[-1, 1]), vec![ri(1)], 0, true).unwrap();
        assert!(Wall::new(&fd, lp(&[1, 1]), Support::Ray(lp(&[1, 1])), f).is_err());
    }

    #[test]
    fn a2_initial_inconsistent() {
        let d = init(&a2());
        let (ok, disc) = check_consistent(&d, 2).unwrap();
        assert!(!ok);
        // oracle: composing the two initial crossings by hand leaves the term z^{f_i + (−1,1)}
        for (i, q) in disc.iter().enumerate() {
            for m in q.terms.keys() {
                let p = m - &LatticePoint::unit(2, i);
                assert_eq!(p, lp(&[-1, 1]));
            }
        }
        assert!(disc.iter().any(|q| !q.is_zero()));
    }

    #[test]
    fn a2_completion() {
        let d = complete_rank2(&init(&a2()), 5).unwrap();
        assert_eq!(d.walls.len(), 3);
        let w = ray_wall(&d, &[1, -1], &[-1, 1]).expect("outgoing wall");
        assert_eq!(w.func.coeffs, vec![ri(1)]);
        assert_eq!(classify(w), WallKind::Outgoing);
        assert!(d.saturated);
        for k in 1..=5 {
            assert!(check_consistent(&d, k).unwrap().0);
        }
    }

    #[test]
    fn a2_loop_oracle() {
        // explicit composition of the A2 crossings on z^(1,0)
        let d = complete_rank2(&init(&a2()), 5).unwrap();
        let fd = &d.fd;
        let p = LaurentPoly::monomial(lp(&[1, 0]), 5);
        let q = loop_product(&d, &p, 5).unwrap();
        assert_eq!(q, p.truncate(fd, 5));
    }

    #[test]
    fn single_wall_consistent() {
        let fd = a2();
        let mut d = init(&fd);
        d.walls.truncate(1);
        assert!(check_consistent(&d, 4).unwrap().0);
    }

    #[test]
    fn g2_completion() {
        let d = complete_rank2(&init(&g2()), 9).unwrap();
        assert_eq!(d.walls.len(), 6);
        for (ray, dir) in [([1, -3], [-1, 3]), ([2, -3], [-2, 3]), ([1, -1], [-3, 3]), ([1, -2], [-3, 6])] {
            let w = ray_wall(&d, &ray, &dir).unwrap_or_else(|| panic!("wall {ray:?}"));
            assert_eq!(w.func.coeffs, vec![ri(1)]);
            assert_eq!(classify(w), WallKind::Outgoing);
        }
        assert!(d.saturated);
    }

    #[test]
    fn kronecker_completion() {
        let d = complete_rank2(&init(&kron()), 6).unwrap();
        assert!(!d.saturated);
        let c = ray_wall(&d, &[1, -1], &[-2, 2]).expect("central wall");
        let expected: Vec<Rat> = (2..=4).map(ri).collect();
        assert_eq!(c.func.coeffs, expected);
        assert_eq!(c.func.order, 6);
        let w = ray_wall(&d, &[2, -1], &[-4, 2]).expect("wall (2,-1)");
        assert_eq!(w.func.coeffs, vec![ri(1)]);
        let w = ray_wall(&d, &[1, -2], &[-2, 4]).expect("wall (1,-2)");
        assert_eq!(w.func.coeffs, vec![ri(1)]);
        assert!(coefficients_positive_integral(&d));
        for w in &d.walls[2..] {
            assert_eq!(classify(w), WallKind::Outgoing);
        }
    }

    #[test]
    fn completion_idempotent() {
        let d = complete_rank2(&init(&kron()), 4).unwrap();
        let e = complete_rank2(&d, 4).unwrap();
        assert_eq!(d.walls, e.walls);
    }

    #[test]
    fn completion_requires_rank2() {
        let (p, s) = crate::lattice::with_principal_coefficients(&a2(), &Seed::standard(2)).unwrap();
        let d = initial_diagram(&p, &s).unwrap();
        assert_eq!(complete_rank2(&d, 3).unwrap_err(), Error::NotRank2);
    }

    #[test]
    fn path_quarter_loop() {
        let fd = a2();
        let d = init(&fd);
        // crosses only e1⊥ (the vertical axis) moving right
        let path = [RatPoint::from_i64s(&[-2, 1]), RatPoint::from_i64s(&[2, 1])];
        let p = LaurentPoly::monomial(lp(&[-1, 0]), 5);
        let q = path_ordered_product(&d, &path, &p, 5).unwrap();
        assert_eq!(q.terms.len(), 2);
        assert_eq!(q.coeff(&lp(&[-1, 1])), ri(1));
        let same = path_ordered_product(&d, &[RatPoint::from_i64s(&[2, 1]), RatPoint::from_i64s(&[3, 1])], &p, 5).unwrap();
        assert_eq!(same, p);
    }

    #[test]
    fn path_rejects_origin() {
        let d = init(&a2());
        let path = [RatPoint::from_i64s(&[-1, -1]), RatPoint::from_i64s(&[1, 1])];
        let p = LaurentPoly::monomial(lp(&[1, 0]), 3);
        assert_eq!(path_ordered_product(&d, &path, &p, 3), Err(Error::BadPath));
    }
}
