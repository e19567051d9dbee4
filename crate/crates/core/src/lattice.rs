//! Exact lattice arithmetic and cluster fixed data.
//!
//! Points of `N` are written in the seed basis `e_i`; points of `M°` are written
//! in the basis `f_i = e_i* / d_i`, so `⟨n, m⟩ = Σ n_i m_i / d_i`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number, always in lowest terms with positive denominator.
pub type Rat = BigRational;

/// Builds the rational `n / d`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Builds the integer rational `n`.
pub fn ri(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Least common multiple of the denominators of `xs` (1 for an empty slice).
pub fn denom_lcm<'a>(xs: impl IntoIterator<Item = &'a Rat>) -> BigInt {
    xs.into_iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

/// Sign of a rational as -1, 0 or 1.
pub fn sgn(x: &Rat) -> i32 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

/// An integral point of `N`, `M°` or one of their sublattices.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(pub Vec<BigInt>);

impl LatticePoint {
    pub fn new(coords: Vec<BigInt>) -> Self {
        LatticePoint(coords)
    }

    pub fn from_i64s(coords: &[i64]) -> Self {
        LatticePoint(coords.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero(rank: usize) -> Self {
        LatticePoint(vec![BigInt::zero(); rank])
    }

    /// The `i`-th standard basis vector.
    pub fn unit(rank: usize, i: usize) -> Self {
        let mut v = Self::zero(rank);
        v.0[i] = BigInt::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        LatticePoint(self.0.iter().map(|c| c * k).collect())
    }

    pub fn scale_i(&self, k: i64) -> Self {
        self.scale(&BigInt::from(k))
    }

    /// Gcd of the coordinates (0 for the zero vector).
    pub fn content(&self) -> BigInt {
        self.0.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// The primitive vector on the ray through `self`, and the multiplier.
    pub fn primitive(&self) -> (Self, BigInt) {
        let g = self.content();
        if g.is_zero() {
            return (self.clone(), g);
        }
        (LatticePoint(self.0.iter().map(|c| c / &g).collect()), g)
    }

    pub fn to_rat(&self) -> RatPoint {
        RatPoint(self.0.iter().map(|c| Rat::from_integer(c.clone())).collect())
    }

    /// Euclidean dot product of coordinate vectors.
    pub fn dot(&self, other: &LatticePoint) -> BigInt {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Coordinates as `i64`, if they fit.
    pub fn to_i64s(&self) -> Option<Vec<i64>> {
        self.0.iter().map(ToPrimitive::to_i64).collect()
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Add for &LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|a| -a).collect())
    }
}

/// A rational point of `M°_ℚ` (or `N_ℚ`).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RatPoint(pub Vec<Rat>);

impl RatPoint {
    pub fn new(coords: Vec<Rat>) -> Self {
        RatPoint(coords)
    }

    pub fn from_i64s(coords: &[i64]) -> Self {
        RatPoint(coords.iter().map(|&c| ri(c)).collect())
    }

    /// Builds a point from `(numerator, denominator)` pairs.
    pub fn from_fracs(coords: &[(i64, i64)]) -> Self {
        RatPoint(coords.iter().map(|&(n, d)| rat(n, d)).collect())
    }

    pub fn zero(rank: usize) -> Self {
        RatPoint(vec![Rat::zero(); rank])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn scale(&self, k: &Rat) -> Self {
        RatPoint(self.0.iter().map(|c| c * k).collect())
    }

    pub fn dot(&self, other: &RatPoint) -> Rat {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// The integral point equal to `self`, if any.
    pub fn to_lattice(&self) -> Option<LatticePoint> {
        self.0
            .iter()
            .map(|c| c.is_integer().then(|| c.to_integer()))
            .collect::<Option<Vec<_>>>()
            .map(LatticePoint)
    }

    /// Least common multiple of the coordinate denominators.
    pub fn denom(&self) -> BigInt {
        denom_lcm(&self.0)
    }

    /// If `self = t * dir` for some rational `t`, returns `t`.
    pub fn ratio_to(&self, dir: &RatPoint) -> Option<Rat> {
        let mut t: Option<Rat> = None;
        for (a, b) in self.0.iter().zip(&dir.0) {
            if b.is_zero() {
                if !a.is_zero() {
                    return None;
                }
            } else {
                let q = a / b;
                match &t {
                    None => t = Some(q),
                    Some(t0) if *t0 != q => return None,
                    _ => {}
                }
            }
        }
        Some(t.unwrap_or_else(Rat::zero))
    }
}

impl fmt::Debug for RatPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for RatPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Add for &RatPoint {
    type Output = RatPoint;
    fn add(self, rhs: &RatPoint) -> RatPoint {
        RatPoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &RatPoint {
    type Output = RatPoint;
    fn sub(self, rhs: &RatPoint) -> RatPoint {
        RatPoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &RatPoint {
    type Output = RatPoint;
    fn neg(self) -> RatPoint {
        RatPoint(self.0.iter().map(|a| -a).collect())
    }
}

/// 2D cross product `a_x b_y - a_y b_x`.
pub fn cross(a: &RatPoint, b: &RatPoint) -> Rat {
    &a.0[0] * &b.0[1] - &a.0[1] * &b.0[0]
}

/// Integer 2D cross product.
pub fn cross_int(a: &LatticePoint, b: &LatticePoint) -> BigInt {
    &a.0[0] * &b.0[1] - &a.0[1] * &b.0[0]
}

/// Counter-clockwise rotation by a quarter turn.
pub fn rot90(v: &RatPoint) -> RatPoint {
    RatPoint(vec![-v.0[1].clone(), v.0[0].clone()])
}

/// Solves `A x = b` exactly, where `A` is given by its columns.
/// Returns `None` if there is no solution; errors if the columns are dependent.
fn solve_columns(cols: &[Vec<Rat>], b: &[Rat]) -> Result<Option<Vec<Rat>>> {
    let rows = b.len();
    let k = cols.len();
    // augmented matrix, row-major
    let mut m: Vec<Vec<Rat>> = (0..rows)
        .map(|r| {
            let mut row: Vec<Rat> = cols.iter().map(|c| c[r].clone()).collect();
            row.push(b[r].clone());
            row
        })
        .collect();
    let mut pivot_row = 0;
    let mut pivots = Vec::with_capacity(k);
    for col in 0..k {
        let Some(p) = (pivot_row..rows).find(|&r| !m[r][col].is_zero()) else {
            return Err(Error::DependentGenerators);
        };
        m.swap(pivot_row, p);
        let inv = m[pivot_row][col].recip();
        for c in col..=k {
            m[pivot_row][c] = &m[pivot_row][c] * &inv;
        }
        for r in 0..rows {
            if r != pivot_row && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..=k {
                    let v = &m[pivot_row][c] * &f;
                    m[r][c] -= v;
                }
            }
        }
        pivots.push(pivot_row);
        pivot_row += 1;
    }
    if (pivot_row..rows).any(|r| !m[r][k].is_zero()) {
        return Ok(None);
    }
    Ok(Some(pivots.iter().map(|&r| m[r][k].clone()).collect()))
}

/// Expresses points of `M°` in terms of independent monoid generators.
#[derive(Clone, Debug, PartialEq, Eq)]
struct GenSolver {
    /// indices of `k` coordinates on which the generators are independent
    rows: Vec<usize>,
    /// inverse of the `k x k` generator submatrix on those coordinates
    inv: Vec<Vec<Rat>>,
    gens: Vec<LatticePoint>,
}

impl GenSolver {
    fn new(gens: &[LatticePoint], rank: usize) -> Result<Self> {
        let k = gens.len();
        if k == 0 {
            return Ok(GenSolver { rows: Vec::new(), inv: Vec::new(), gens: Vec::new() });
        }
        // pick independent rows greedily by row reduction of the transpose
        let mut rows = Vec::new();
        let mut basis: Vec<Vec<Rat>> = Vec::new();
        for r in 0..rank {
            let mut v: Vec<Rat> = gens.iter().map(|g| Rat::from_integer(g.0[r].clone())).collect();
            for (b, &pc) in basis.iter().zip(rows_pivots(&basis).iter()) {
                if !v[pc].is_zero() {
                    let f = &v[pc] / &b[pc];
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= &f * y;
                    }
                }
            }
            if v.iter().any(|x| !x.is_zero()) {
                basis.push(v);
                rows.push(r);
                if rows.len() == k {
                    break;
                }
            }
        }
        if rows.len() < k {
            return Err(Error::DependentGenerators);
        }
        let cols: Vec<Vec<Rat>> = gens
            .iter()
            .map(|g| rows.iter().map(|&r| Rat::from_integer(g.0[r].clone())).collect())
            .collect();
        let mut inv = vec![vec![Rat::zero(); k]; k];
        for j in 0..k {
            let mut e = vec![Rat::zero(); k];
            e[j] = Rat::one();
            let x = solve_columns(&cols, &e)?.ok_or(Error::DependentGenerators)?;
            for i in 0..k {
                inv[i][j] = x[i].clone();
            }
        }
        Ok(GenSolver { rows, inv, gens: gens.to_vec() })
    }

    fn coords(&self, m: &LatticePoint) -> Option<Vec<Rat>> {
        let b: Vec<Rat> = self.rows.iter().map(|&r| Rat::from_integer(m.0[r].clone())).collect();
        let a: Vec<Rat> = self
            .inv
            .iter()
            .map(|row| row.iter().zip(&b).map(|(x, y)| x * y).sum())
            .collect();
        // verify on every coordinate
        for r in 0..m.dim() {
            let s: Rat = self
                .gens
                .iter()
                .zip(&a)
                .map(|(g, ai)| ai * Rat::from_integer(g.0[r].clone()))
                .sum();
            if s != Rat::from_integer(m.0[r].clone()) {
                return None;
            }
        }
        Some(a)
    }
}

fn rows_pivots(basis: &[Vec<Rat>]) -> Vec<usize> {
    basis.iter().map(|b| b.iter().position(|x| !x.is_zero()).unwrap_or(0)).collect()
}

/// Fixed data: rank, unfrozen indices, skew form, multipliers and monoid generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedData {
    rank: usize,
    unfrozen: Vec<usize>,
    skew: Vec<Vec<Rat>>,
    d: Vec<i64>,
    monoid_gens: Vec<LatticePoint>,
    principal: bool,
    solver: Option<GenSolver>,
}

impl FixedData {
    /// Builds fixed data from an exchange matrix `ε_ij = {e_i, e_j} d_j`.
    pub fn from_exchange(exchange: &[Vec<i64>], d: &[i64], unfrozen: &[usize]) -> Result<Self> {
        let rank = d.len();
        if rank == 0 || exchange.len() != rank || exchange.iter().any(|r| r.len() != rank) {
            return Err(Error::DimensionMismatch);
        }
        let skew: Vec<Vec<Rat>> = (0..rank)
            .map(|i| (0..rank).map(|j| rat(exchange[i][j], d[j])).collect())
            .collect();
        Self::from_skew(skew, d, unfrozen, None)
    }

    /// Builds fixed data from the skew form `{e_i, e_j}` directly.
    pub fn from_skew(
        skew: Vec<Vec<Rat>>,
        d: &[i64],
        unfrozen: &[usize],
        monoid_gens: Option<Vec<LatticePoint>>,
    ) -> Result<Self> {
        let rank = d.len();
        if skew.len() != rank || skew.iter().any(|r| r.len() != rank) {
            return Err(Error::DimensionMismatch);
        }
        if d.iter().any(|&x| x <= 0) {
            return Err(Error::InvalidFixedData("multipliers must be positive"));
        }
        if d.iter().fold(0i64, |g, &x| g.gcd(&x)) != 1 {
            return Err(Error::InvalidFixedData("gcd of multipliers must be 1"));
        }
        for i in 0..rank {
            for j in 0..rank {
                if skew[i][j] != -&skew[j][i] {
                    return Err(Error::InvalidFixedData("skew form is not antisymmetric"));
                }
            }
        }
        let mut uf: Vec<usize> = unfrozen.to_vec();
        uf.sort_unstable();
        uf.dedup();
        if uf.iter().any(|&i| i >= rank) {
            return Err(Error::DimensionMismatch);
        }
        // {N_uf, N°} ⊆ ℤ and {N, N_uf ∩ N°} ⊆ ℤ
        for &i in &uf {
            for j in 0..rank {
                if !(&skew[i][j] * ri(d[j])).is_integer() || !(&skew[j][i] * ri(d[i])).is_integer() {
                    return Err(Error::InvalidFixedData("skew form fails the integrality conditions"));
                }
            }
        }
        let mut fd = FixedData {
            rank,
            unfrozen: uf,
            skew,
            d: d.to_vec(),
            monoid_gens: Vec::new(),
            principal: false,
            solver: None,
        };
        let gens = match monoid_gens {
            Some(g) => g,
            None => fd.unfrozen.iter().map(|&i| fd.p1_star_unit(i)).collect(),
        };
        if gens.iter().any(|g| g.dim() != rank) {
            return Err(Error::DimensionMismatch);
        }
        fd.solver = GenSolver::new(&gens, rank).ok();
        fd.monoid_gens = gens;
        Ok(fd)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn unfrozen(&self) -> &[usize] {
        &self.unfrozen
    }

    pub fn skew(&self) -> &[Vec<Rat>] {
        &self.skew
    }

    pub fn d(&self) -> &[i64] {
        &self.d
    }

    pub fn monoid_gens(&self) -> &[LatticePoint] {
        &self.monoid_gens
    }

    pub fn is_principal(&self) -> bool {
        self.principal
    }

    /// The exchange matrix `ε_ij = {e_i, e_j} d_j`.
    pub fn exchange(&self) -> Vec<Vec<BigInt>> {
        (0..self.rank)
            .map(|i| {
                (0..self.rank).map(|j| (&self.skew[i][j] * ri(self.d[j])).to_integer()).collect()
            })
            .collect()
    }

    /// `{n1, n2}` for `n1, n2 ∈ N`.
    pub fn skew_form(&self, n1: &LatticePoint, n2: &LatticePoint) -> Rat {
        let mut s = Rat::zero();
        for i in 0..self.rank {
            if n1.0[i].is_zero() {
                continue;
            }
            for j in 0..self.rank {
                if !n2.0[j].is_zero() {
                    s += &self.skew[i][j] * Rat::from_integer(&n1.0[i] * &n2.0[j]);
                }
            }
        }
        s
    }

    fn p1_star_unit(&self, i: usize) -> LatticePoint {
        LatticePoint(
            (0..self.rank).map(|j| (&self.skew[i][j] * ri(self.d[j])).to_integer()).collect(),
        )
    }

    /// `p₁*(n) = {n, ·}` in f-coordinates.
    pub fn p1_star(&self, n: &LatticePoint) -> Result<LatticePoint> {
        if n.dim() != self.rank {
            return Err(Error::DimensionMismatch);
        }
        if (0..self.rank).any(|i| !n.0[i].is_zero() && !self.unfrozen.contains(&i)) {
            return Err(Error::FrozenComponent);
        }
        let mut out = LatticePoint::zero(self.rank);
        for &i in &self.unfrozen {
            if n.0[i].is_zero() {
                continue;
            }
            let row = self.p1_star_unit(i);
            for j in 0..self.rank {
                out.0[j] += &n.0[i] * &row.0[j];
            }
        }
        Ok(out)
    }

    /// Preimage of `m` under `p₁*` on `N_uf`, if `m` lies in its image.
    pub fn p1_star_preimage(&self, m: &LatticePoint) -> Option<RatPoint> {
        let cols: Vec<Vec<Rat>> =
            self.unfrozen.iter().map(|&i| self.p1_star_unit(i).to_rat().0).collect();
        let a = solve_columns(&cols, &m.to_rat().0).ok()??;
        let mut n = RatPoint::zero(self.rank);
        for (k, &i) in self.unfrozen.iter().enumerate() {
            n.0[i] = a[k].clone();
        }
        Some(n)
    }

    /// Coordinates of `m` over the monoid generators, if `m` is in their span.
    pub fn monoid_coords(&self, m: &LatticePoint) -> Option<Vec<Rat>> {
        self.solver.as_ref()?.coords(m)
    }

    /// Whether the monoid generators are linearly independent.
    pub fn gens_independent(&self) -> bool {
        self.solver.is_some()
    }

    /// Whether `p₁*` is injective on `N_uf`.
    pub fn p1_star_injective(&self) -> bool {
        let gens: Vec<LatticePoint> = self.unfrozen.iter().map(|&i| self.p1_star_unit(i)).collect();
        GenSolver::new(&gens, self.rank).is_ok()
    }

    /// Order of `m` in the grading by powers of `J = P \ {0}`, erroring when
    /// the monoid generators are dependent.
    pub fn try_j_order(&self, m: &LatticePoint) -> Result<Option<u32>> {
        if self.solver.is_none() {
            return Err(Error::DependentGenerators);
        }
        Ok(self.j_order(m))
    }

    /// Order of `m` in the grading by powers of `J = P \ {0}`, or `None` if
    /// `m ∉ P` (or the generators are dependent).
    pub fn j_order(&self, m: &LatticePoint) -> Option<u32> {
        if m.is_zero() {
            return Some(0);
        }
        let a = self.monoid_coords(m)?;
        let mut total = 0u32;
        for x in a {
            if !x.is_integer() || x.is_negative() {
                return None;
            }
            total = total.checked_add(x.to_integer().to_u32()?)?;
        }
        Some(total)
    }

    /// All points of `P` of order exactly `k`.
    pub fn monoid_points_of_order(&self, k: u32) -> Vec<LatticePoint> {
        let g = self.monoid_gens.len();
        let mut out = Vec::new();
        let mut a = vec![0u32; g];
        compositions(k, 0, &mut a, &mut |a| {
            let mut m = LatticePoint::zero(self.rank);
            for (ai, gen) in a.iter().zip(&self.monoid_gens) {
                if *ai > 0 {
                    m = &m + &gen.scale_i(i64::from(*ai));
                }
            }
            out.push(m);
        });
        out
    }

    /// The primitive element of `N°` on the ray through `n`, as an integral
    /// covector on f-coordinates: `u · m = ⟨n', m⟩`.
    pub fn normal_covector(&self, n: &LatticePoint) -> LatticePoint {
        let v: Vec<Rat> = (0..self.rank).map(|j| Rat::new(n.0[j].clone(), BigInt::from(self.d[j]))).collect();
        let l = denom_lcm(&v);
        let ints = LatticePoint(v.iter().map(|x| (x * Rat::from_integer(l.clone())).to_integer()).collect());
        ints.primitive().0
    }

    /// The pairing `⟨n, m⟩ = Σ n_i m_i / d_i`.
    pub fn pairing(&self, n: &LatticePoint, m: &RatPoint) -> Result<Rat> {
        pairing(&self.d, n, m)
    }

    /// Dimension check helper.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if dim == self.rank {
            Ok(())
        } else {
            Err(Error::DimensionMismatch)
        }
    }
}

fn compositions(k: u32, idx: usize, a: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
    if a.is_empty() {
        if k == 0 {
            f(a);
        }
        return;
    }
    if idx == a.len() - 1 {
        a[idx] = k;
        f(a);
        a[idx] = 0;
        return;
    }
    for v in 0..=k {
        a[idx] = v;
        compositions(k - v, idx + 1, a, f);
    }
    a[idx] = 0;
}

/// The pairing `⟨n, m⟩ = Σ n_i m_i / d_i` between `N` and `M°` (f-coordinates).
pub fn pairing(d: &[i64], n: &LatticePoint, m: &RatPoint) -> Result<Rat> {
    if n.dim() != d.len() || m.dim() != d.len() {
        return Err(Error::DimensionMismatch);
    }
    Ok(n.0
        .iter()
        .zip(&m.0)
        .zip(d)
        .map(|((a, b), &di)| Rat::from_integer(a.clone()) * b / ri(di))
        .sum())
}

/// A seed: a basis of `N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Seed {
    pub basis: Vec<LatticePoint>,
}

impl Seed {
    /// The standard seed `e_1, …, e_n`.
    pub fn standard(rank: usize) -> Self {
        Seed { basis: (0..rank).map(|i| LatticePoint::unit(rank, i)).collect() }
    }

    /// Validates that the basis is unimodular.
    pub fn new(basis: Vec<LatticePoint>) -> Result<Self> {
        let n = basis.len();
        if basis.iter().any(|b| b.dim() != n) {
            return Err(Error::DimensionMismatch);
        }
        let cols: Vec<Vec<Rat>> = basis.iter().map(|b| b.to_rat().0).collect();
        if determinant(&cols).abs() != Rat::one() {
            return Err(Error::InvalidFixedData("seed basis is not unimodular"));
        }
        Ok(Seed { basis })
    }
}

/// Exact determinant by fraction-free elimination over `ℚ`.
pub fn determinant(cols: &[Vec<Rat>]) -> Rat {
    let n = cols.len();
    let mut m: Vec<Vec<Rat>> = (0..n).map(|r| (0..n).map(|c| cols[c][r].clone()).collect()).collect();
    let mut det = Rat::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else {
            return Rat::zero();
        };
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= &m[c][c];
        for r in c + 1..n {
            if !m[r][c].is_zero() {
                let f = &m[r][c] / &m[c][c];
                for k in c..n {
                    let v = &m[c][k] * &f;
                    m[r][k] -= v;
                }
            }
        }
    }
    det
}

/// Principal-coefficient fixed data `Ñ = N ⊕ M°` with the doubled seed.
pub fn with_principal_coefficients(fd: &FixedData, _seed: &Seed) -> Result<(FixedData, Seed)> {
    let n = fd.rank;
    let r2 = 2 * n;
    let mut skew = vec![vec![Rat::zero(); r2]; r2];
    for i in 0..n {
        for j in 0..n {
            skew[i][j] = fd.skew[i][j].clone();
        }
        // {(e_i,0),(0,f_i)} = ⟨e_i, f_i⟩ = 1/d_i
        skew[i][n + i] = rat(1, fd.d[i]);
        skew[n + i][i] = -rat(1, fd.d[i]);
    }
    let mut d = fd.d.clone();
    d.extend_from_slice(&fd.d);
    let mut out = FixedData::from_skew(skew, &d, &fd.unfrozen, None)?;
    out.principal = true;
    Ok((out, Seed::standard(r2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g2() -> FixedData {
        FixedData::from_exchange(&[vec![0, 3], vec![-1, 0]], &[1, 3], &[0, 1]).unwrap()
    }

    fn a2() -> FixedData {
        FixedData::from_exchange(&[vec![0, 1], vec![-1, 0]], &[1, 1], &[0, 1]).unwrap()
    }

    fn kronecker() -> FixedData {
        FixedData::from_exchange(&[vec![0, 2], vec![-2, 0]], &[1, 1], &[0, 1]).unwrap()
    }

    #[test]
    fn pairing_basis() {
        let d = [1, 3];
        let e1 = LatticePoint::from_i64s(&[1, 0]);
        let e2 = LatticePoint::from_i64s(&[0, 1]);
        assert_eq!(pairing(&d, &e1, &RatPoint::from_i64s(&[1, 0])).unwrap(), ri(1));
        assert_eq!(pairing(&d, &e2, &RatPoint::from_i64s(&[0, 1])).unwrap(), rat(1, 3));
        let d_e2 = LatticePoint::from_i64s(&[0, 3]);
        assert_eq!(pairing(&d, &d_e2, &RatPoint::from_i64s(&[0, 1])).unwrap(), ri(1));
    }

    #[test]
    fn pairing_example_value() {
        let v = pairing(&[1, 1], &LatticePoint::from_i64s(&[0, 1]), &RatPoint::from_i64s(&[1, -2]))
            .unwrap();
        assert_eq!(v, ri(-2));
    }

    #[test]
    fn pairing_dimension_mismatch() {
        let r = pairing(&[1, 1], &LatticePoint::from_i64s(&[1, 0, 0]), &RatPoint::from_i64s(&[1, 0]));
        assert_eq!(r, Err(Error::DimensionMismatch));
    }

    #[test]
    fn p1_star_g2() {
        let fd = g2();
        assert_eq!(fd.p1_star(&LatticePoint::from_i64s(&[1, 0])).unwrap(), LatticePoint::from_i64s(&[0, 3]));
        assert_eq!(fd.p1_star(&LatticePoint::from_i64s(&[0, 1])).unwrap(), LatticePoint::from_i64s(&[-1, 0]));
        assert_eq!(fd.skew()[0][1], ri(1));
    }

    #[test]
    fn p1_star_a2() {
        let fd = a2();
        assert_eq!(fd.p1_star(&LatticePoint::from_i64s(&[1, 0])).unwrap(), LatticePoint::from_i64s(&[0, 1]));
        assert_eq!(fd.p1_star(&LatticePoint::from_i64s(&[0, 1])).unwrap(), LatticePoint::from_i64s(&[-1, 0]));
    }

    #[test]
    fn p1_star_rejects_frozen() {
        let fd = FixedData::from_exchange(&[vec![0, 1], vec![-1, 0]], &[1, 1], &[0]).unwrap();
        assert_eq!(fd.p1_star(&LatticePoint::from_i64s(&[0, 1])), Err(Error::FrozenComponent));
    }

    #[test]
    fn principal_kronecker() {
        let fd = kronecker();
        let (p, seed) = with_principal_coefficients(&fd, &Seed::standard(2)).unwrap();
        assert_eq!(p.rank(), 4);
        assert_eq!(seed.basis.len(), 4);
        assert_eq!(p.unfrozen(), &[0, 1]);
        assert_eq!(p.p1_star(&LatticePoint::from_i64s(&[1, 0, 0, 0])).unwrap(), LatticePoint::from_i64s(&[0, 2, 1, 0]));
        assert_eq!(p.p1_star(&LatticePoint::from_i64s(&[0, 1, 0, 0])).unwrap(), LatticePoint::from_i64s(&[-2, 0, 0, 1]));
    }

    #[test]
    fn principal_skew_matches_direct_formula() {
        // {(n1,m1),(n2,m2)} = {n1,n2} + ⟨n1,m2⟩ − ⟨n2,m1⟩ on basis pairs
        let fd = g2();
        let (p, _) = with_principal_coefficients(&fd, &Seed::standard(2)).unwrap();
        let n = 2;
        for a in 0..4 {
            for b in 0..4 {
                let (na, ma) = split(a, n);
                let (nb, mb) = split(b, n);
                let direct = fd.skew_form(&na, &nb) + fd.pairing(&na, &mb.to_rat()).unwrap()
                    - fd.pairing(&nb, &ma.to_rat()).unwrap();
                assert_eq!(p.skew()[a][b], direct, "pair {a},{b}");
            }
        }
    }

    fn split(i: usize, n: usize) -> (LatticePoint, LatticePoint) {
        if i < n {
            (LatticePoint::unit(n, i), LatticePoint::zero(n))
        } else {
            (LatticePoint::zero(n), LatticePoint::unit(n, i - n))
        }
    }

    #[test]
    fn j_order_a2() {
        let fd = a2();
        assert_eq!(fd.j_order(&LatticePoint::from_i64s(&[0, 0])), Some(0));
        assert_eq!(fd.j_order(&LatticePoint::from_i64s(&[-1, 1])), Some(2));
        assert_eq!(fd.j_order(&LatticePoint::from_i64s(&[1, 0])), None);
    }

    #[test]
    fn j_order_g2_non_integral() {
        let fd = g2();
        assert_eq!(fd.j_order(&LatticePoint::from_i64s(&[-1, 1])), None);
        assert_eq!(fd.j_order(&LatticePoint::from_i64s(&[-3, 6])), Some(5));
    }

    #[test]
    fn j_order_principal_rank4() {
        let (p, _) = with_principal_coefficients(&kronecker(), &Seed::standard(2)).unwrap();
        assert_eq!(p.j_order(&LatticePoint::from_i64s(&[-2, 2, 1, 1])), Some(2));
        assert_eq!(p.j_order(&LatticePoint::from_i64s(&[0, 2, 0, 0])), None);
    }

    #[test]
    fn dependent_generators_rejected() {
        let r = FixedData::from_skew(
            vec![vec![ri(0), ri(1)], vec![ri(-1), ri(0)]],
            &[1, 1],
            &[0, 1],
            Some(vec![LatticePoint::from_i64s(&[1, 1]), LatticePoint::from_i64s(&[2, 2])]),
        )
        .unwrap();
        assert_eq!(r.try_j_order(&LatticePoint::from_i64s(&[1, 1])), Err(Error::DependentGenerators));
    }

    #[test]
    fn normal_covectors() {
        let fd = g2();
        assert_eq!(fd.normal_covector(&LatticePoint::from_i64s(&[0, 1])), LatticePoint::from_i64s(&[0, 1]));
        assert_eq!(fd.normal_covector(&LatticePoint::from_i64s(&[1, 1])), LatticePoint::from_i64s(&[3, 1]));
        assert_eq!(fd.normal_covector(&LatticePoint::from_i64s(&[1, 3])), LatticePoint::from_i64s(&[1, 1]));
    }

    #[test]
    fn monoid_points() {
        let fd = a2();
        let mut pts = fd.monoid_points_of_order(2);
        pts.sort();
        assert_eq!(pts.len(), 3);
        assert!(pts.contains(&LatticePoint::from_i64s(&[-1, 1])));
    }

    #[test]
    fn invalid_skew_rejected() {
        let r = FixedData::from_exchange(&[vec![0, 1], vec![1, 0]], &[1, 1], &[0, 1]);
        assert!(matches!(r, Err(Error::InvalidFixedData(_))));
    }
}
