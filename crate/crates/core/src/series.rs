//! Wall functions `1 + Σ c_k x^k` with `x = z^{m₀}`, truncated Laurent
//! polynomials over `M°`, and the wall-crossing automorphism.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lattice::{FixedData, LatticePoint, Rat};

/// A scattering function `f = 1 + Σ_{k≥1} c_k x^k`, `x = z^{direction}`.
///
/// `order` is the truncation in the `J`-adic grading; `x^k` has order
/// `k * step` where `step = j_order(direction)`. Exact functions are genuine
/// polynomials: every coefficient past the stored ones is zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WallFunction {
    pub direction: LatticePoint,
    pub step: u32,
    /// `coeffs[k-1] = c_k`; trailing zeros are trimmed.
    pub coeffs: Vec<Rat>,
    pub order: u32,
    pub exact: bool,
}

impl WallFunction {
    pub fn new(direction: LatticePoint, step: u32, coeffs: Vec<Rat>, order: u32, exact: bool) -> Self {
        let step = step.max(1);
        let mut f = WallFunction { direction, step, coeffs, order, exact };
        if !exact {
            let n = f.max_power() as usize;
            f.coeffs.truncate(n);
        }
        f.trim();
        f
    }

    /// The exact polynomial `1 + x`.
    pub fn binomial(direction: LatticePoint, step: u32, order: u32) -> Self {
        Self::new(direction, step, vec![Rat::one()], order, true)
    }

    /// The constant function 1.
    pub fn one(direction: LatticePoint, step: u32, order: u32) -> Self {
        Self::new(direction, step, Vec::new(), order, true)
    }

    /// Builds a function whose step is read off the fixed data.
    pub fn from_fd(fd: &FixedData, direction: LatticePoint, coeffs: Vec<Rat>, order: u32, exact: bool) -> Result<Self> {
        let step = fd.j_order(&direction).filter(|&s| s > 0).ok_or(Error::InvalidInput(
            alloc::format!("wall function direction {direction} is not in the monoid"),
        ))?;
        Ok(Self::new(direction, step, coeffs, order, exact))
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(Zero::is_zero) {
            self.coeffs.pop();
        }
    }

    /// Largest power of `x` known at the stored truncation.
    pub fn max_power(&self) -> u32 {
        self.order / self.step
    }

    /// Degree of the stored polynomial part.
    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of `x^k`, erroring past a non-exact truncation.
    pub fn coeff(&self, k: u32) -> Result<Rat> {
        if k == 0 {
            return Ok(Rat::one());
        }
        if !self.exact && k > self.max_power() {
            return Err(Error::TruncationExceeded);
        }
        Ok(self.coeffs.get(k as usize - 1).cloned().unwrap_or_else(Rat::zero))
    }

    /// Full coefficient list `[1, c_1, …, c_n]` for `n` powers.
    fn dense(&self, n: usize) -> Vec<Rat> {
        let mut v = Vec::with_capacity(n + 1);
        v.push(Rat::one());
        for k in 1..=n {
            v.push(self.coeffs.get(k - 1).cloned().unwrap_or_else(Rat::zero));
        }
        v
    }

    /// Effective `J`-adic truncation when used at requested order `k`.
    pub fn effective_order(&self, k: u32) -> u32 {
        if self.exact {
            k
        } else {
            k.min(self.order)
        }
    }

    /// Coefficients of `f^e` up to `x^n`, where `n` must be available.
    pub fn pow_dense(&self, e: &BigInt, n: u32) -> Result<Vec<Rat>> {
        if !self.exact && n > self.max_power() {
            return Err(Error::TruncationExceeded);
        }
        Ok(pow_series(&self.dense(n as usize), e, n as usize))
    }
}

impl fmt::Display for WallFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1")?;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let m = self.direction.scale_i(k as i64 + 1);
            if c.is_negative() {
                write!(f, " - {}z^{m}", coeff_prefix(&-c))?;
            } else {
                write!(f, " + {}z^{m}", coeff_prefix(c))?;
            }
        }
        if !self.exact {
            write!(f, " + O(J^{})", self.order + 1)?;
        }
        Ok(())
    }
}

fn coeff_prefix(c: &Rat) -> alloc::string::String {
    if c.is_one() {
        alloc::string::String::new()
    } else {
        alloc::format!("{c}·")
    }
}

/// Coefficients of `a^e` mod `x^{n+1}` for `a_0 = 1`, by the power recurrence
/// `b_n = (1/n) Σ_{k=1}^n ((e+1)k − n) a_k b_{n−k}`.
pub fn pow_series(a: &[Rat], e: &BigInt, n: usize) -> Vec<Rat> {
    let mut b = vec![Rat::zero(); n + 1];
    b[0] = Rat::one();
    if e.is_zero() {
        return b;
    }
    if a.iter().all(Rat::is_integer) {
        return pow_series_int(a, e, n);
    }
    let e1 = Rat::from_integer(e + 1);
    for m in 1..=n {
        let mut s = Rat::zero();
        for k in 1..=m.min(a.len().saturating_sub(1)) {
            if a[k].is_zero() || b[m - k].is_zero() {
                continue;
            }
            let w = &e1 * Rat::from_integer(BigInt::from(k)) - Rat::from_integer(BigInt::from(m));
            s += w * &a[k] * &b[m - k];
        }
        b[m] = s / Rat::from_integer(BigInt::from(m));
    }
    b
}

/// [`pow_series`] for integral coefficients, where every `b_n` is integral.
fn pow_series_int(a: &[Rat], e: &BigInt, n: usize) -> Vec<Rat> {
    let a: Vec<(usize, BigInt)> =
        a.iter().enumerate().skip(1).filter(|(_, c)| !c.is_zero()).map(|(k, c)| (k, c.to_integer())).collect();
    let e1 = e + 1;
    let mut b: Vec<BigInt> = Vec::with_capacity(n + 1);
    b.push(BigInt::one());
    for m in 1..=n {
        let mut s = BigInt::zero();
        for (k, ak) in a.iter().take_while(|(k, _)| *k <= m) {
            let bm = &b[m - k];
            if bm.is_zero() {
                continue;
            }
            let w = &e1 * BigInt::from(*k) - BigInt::from(m);
            s += w * ak * bm;
        }
        b.push(s / BigInt::from(m));
    }
    b.into_iter().map(Rat::from_integer).collect()
}

/// Product of two wall functions with the same direction, truncated at `k`.
pub fn wf_mul(a: &WallFunction, b: &WallFunction, k: u32) -> Result<WallFunction> {
    if a.direction != b.direction || a.step != b.step {
        return Err(Error::DirectionMismatch);
    }
    let k = a.effective_order(b.effective_order(k));
    let exact = a.exact && b.exact && ((a.degree() + b.degree()) as u64) * u64::from(a.step) <= u64::from(k);
    let n = (k / a.step) as usize;
    let da = a.dense(n);
    let db = b.dense(n);
    let mut c = vec![Rat::zero(); n + 1];
    for i in 0..=n {
        if da[i].is_zero() {
            continue;
        }
        for j in 0..=n - i {
            if !db[j].is_zero() {
                c[i + j] += &da[i] * &db[j];
            }
        }
    }
    c.remove(0);
    Ok(WallFunction::new(a.direction.clone(), a.step, c, k, exact))
}

/// Integer power `f^e`, truncated at `k` (negative `e` by series inversion).
pub fn wf_pow(f: &WallFunction, e: i64, k: u32) -> WallFunction {
    let k = f.effective_order(k);
    let n = k / f.step;
    let exact = f.exact && e >= 0 && (f.degree() as u64) * (e as u64) * u64::from(f.step) <= u64::from(k);
    let mut c = pow_series(&f.dense(n as usize), &BigInt::from(e), n as usize);
    c.remove(0);
    WallFunction::new(f.direction.clone(), f.step, c, k, exact)
}

/// A truncated Laurent polynomial over `M°`.
///
/// Terms are kept relative to a base exponent: `e` survives iff
/// `j_order(e − base) ≤ order`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaurentPoly {
    pub base: LatticePoint,
    pub order: u32,
    pub terms: BTreeMap<LatticePoint, Rat>,
}

impl LaurentPoly {
    pub fn zero(base: LatticePoint, order: u32) -> Self {
        LaurentPoly { base, order, terms: BTreeMap::new() }
    }

    /// The monomial `z^m` with base `m`.
    pub fn monomial(m: LatticePoint, order: u32) -> Self {
        Self::term(m.clone(), Rat::one(), order)
    }

    /// The single term `c z^m` with base `m`.
    pub fn term(m: LatticePoint, c: Rat, order: u32) -> Self {
        let mut p = Self::zero(m.clone(), order);
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &LatticePoint) -> Rat {
        self.terms.get(m).cloned().unwrap_or_else(Rat::zero)
    }

    /// Adds `c z^m` if it lies within the truncation.
    pub fn add_term(&mut self, fd: &FixedData, m: LatticePoint, c: Rat) {
        if c.is_zero() {
            return;
        }
        match fd.j_order(&(&m - &self.base)) {
            Some(o) if o <= self.order => {}
            _ => return,
        }
        let entry = self.terms.entry(m.clone()).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    /// Sum of two polynomials with the same base; truncation is the minimum.
    pub fn add(&self, fd: &FixedData, other: &LaurentPoly) -> Result<LaurentPoly> {
        if self.base != other.base {
            return Err(Error::InvalidInput("adding Laurent polynomials with different bases".into()));
        }
        let mut out = LaurentPoly::zero(self.base.clone(), self.order.min(other.order));
        for (m, c) in self.terms.iter().chain(&other.terms) {
            out.add_term(fd, m.clone(), c.clone());
        }
        Ok(out)
    }

    /// Product; the base is the sum of the bases, the truncation the minimum.
    pub fn mul(&self, fd: &FixedData, other: &LaurentPoly) -> LaurentPoly {
        let mut out = LaurentPoly::zero(&self.base + &other.base, self.order.min(other.order));
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(fd, m1 + m2, c1 * c2);
            }
        }
        out
    }

    /// Restricts to a lower truncation order.
    pub fn truncate(&self, fd: &FixedData, order: u32) -> LaurentPoly {
        let mut out = LaurentPoly::zero(self.base.clone(), self.order.min(order));
        for (m, c) in &self.terms {
            out.add_term(fd, m.clone(), c.clone());
        }
        out
    }

    /// Equality of the truncations at the smaller of the two orders.
    pub fn eq_mod(&self, fd: &FixedData, other: &LaurentPoly) -> bool {
        let k = self.order.min(other.order);
        self.base == other.base && self.truncate(fd, k).terms == other.truncate(fd, k).terms
    }

    /// The difference `self − other` at the smaller truncation.
    pub fn sub(&self, fd: &FixedData, other: &LaurentPoly) -> Result<LaurentPoly> {
        let neg = LaurentPoly {
            base: other.base.clone(),
            order: other.order,
            terms: other.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        };
        self.add(fd, &neg)
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_zero() {
                write!(f, "{a}")?;
            } else {
                write!(f, "{}z^{m}", coeff_prefix(&a))?;
            }
        }
        Ok(())
    }
}

/// Wall crossing `z^m ↦ z^m f^{sign·⟨n₀′, m⟩}`, with `n₀′` the primitive
/// element of `N°` on the ray through `n0`.
pub fn wall_cross(
    fd: &FixedData,
    p: &LaurentPoly,
    f: &WallFunction,
    n0: &LatticePoint,
    sign: i32,
    k: u32,
) -> LaurentPoly {
    let u = fd.normal_covector(n0);
    let k = f.effective_order(k.min(p.order));
    let mut out = LaurentPoly::zero(p.base.clone(), k);
    let mut cache: BTreeMap<BigInt, Vec<Rat>> = BTreeMap::new();
    let n_max = k / f.step;
    for (m, c) in &p.terms {
        let Some(o) = fd.j_order(&(m - &p.base)) else { continue };
        if o > k {
            continue;
        }
        let e = u.dot(m) * BigInt::from(sign);
        if e.is_zero() || f.is_one() {
            out.add_term(fd, m.clone(), c.clone());
            continue;
        }
        let jmax = ((k - o) / f.step) as usize;
        let series = cache
            .entry(e.clone())
            .or_insert_with(|| pow_series(&f.dense(n_max as usize), &e, n_max as usize));
        for (j, b) in series.iter().enumerate().take(jmax + 1) {
            if !b.is_zero() {
                out.add_term(fd, m + &f.direction.scale_i(j as i64), c * b);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ri, FixedData};
    use proptest::prelude::*;

    fn a2() -> FixedData {
        FixedData::from_exchange(&[vec![0, 1], vec![-1, 0]], &[1, 1], &[0, 1]).unwrap()
    }

    fn kron() -> FixedData {
        FixedData::from_exchange(&[vec![0, 2], vec![-2, 0]], &[1, 1], &[0, 1]).unwrap()
    }

    fn lp(c: &[i64]) -> LatticePoint {
        LatticePoint::from_i64s(c)
    }

    fn ints(v: &[i64]) -> Vec<Rat> {
        v.iter().map(|&x| ri(x)).collect()
    }

    fn x() -> LatticePoint {
        lp(&[-2, 2])
    }

    #[test]
    fn mul_binomial() {
        let f = WallFunction::binomial(x(), 1, 2);
        let g = wf_mul(&f, &f, 2).unwrap();
        assert_eq!(g.coeffs, ints(&[2, 1]));
        let one = WallFunction::one(x(), 1, 2);
        assert_eq!(wf_mul(&f, &one, 2).unwrap().coeffs, ints(&[1]));
    }

    #[test]
    fn mul_direction_mismatch() {
        let f = WallFunction::binomial(x(), 1, 2);
        let g = WallFunction::binomial(lp(&[0, 1]), 1, 2);
        assert_eq!(wf_mul(&f, &g, 2), Err(Error::DirectionMismatch));
    }

    #[test]
    fn mul_against_long_multiplication() {
        // (1+x)(1-x)^{-2} = 1 + 3x + 5x^2 + ...
        let plus = WallFunction::binomial(x(), 1, 6);
        let minus = WallFunction::new(x(), 1, ints(&[-1]), 6, true);
        let inv2 = wf_pow(&minus, -2, 6);
        let g = wf_mul(&plus, &inv2, 6).unwrap();
        // oracle: a = (1,1), b_k = k+1, c_n = b_n + b_{n-1}
        let oracle: Vec<Rat> = (1..=6).map(|n| ri(n + 1 + n)).collect();
        assert_eq!(g.coeffs, oracle);
        assert_eq!(&g.coeffs[..2], &ints(&[3, 5])[..]);
    }

    #[test]
    fn pow_examples() {
        let minus = WallFunction::new(x(), 1, ints(&[-1]), 3, true);
        assert_eq!(wf_pow(&minus, -2, 3).coeffs, ints(&[2, 3, 4]));
        let f = WallFunction::binomial(x(), 1, 3);
        assert!(wf_pow(&f, 0, 3).is_one());
        let cube = wf_pow(&f, 3, 3);
        assert_eq!(cube.coeffs, ints(&[3, 3, 1]));
        assert!(cube.exact);
    }

    #[test]
    fn pow_inverse() {
        let f = WallFunction::new(x(), 1, ints(&[2, -1, 5]), 5, true);
        let inv = wf_pow(&f, -1, 5);
        let one = wf_mul(&inv, &f, 5).unwrap();
        assert!(one.is_one());
    }

    #[test]
    fn truncated_coeff_errors() {
        let f = WallFunction::new(x(), 2, ints(&[1, 1]), 4, false);
        assert_eq!(f.coeff(2).unwrap(), ri(1));
        assert_eq!(f.coeff(3), Err(Error::TruncationExceeded));
        let g = WallFunction::binomial(x(), 2, 4);
        assert_eq!(g.coeff(7).unwrap(), ri(0));
    }

    #[test]
    fn cross_a2_example() {
        let fd = a2();
        let f = WallFunction::from_fd(&fd, lp(&[0, 1]), ints(&[1]), 5, true).unwrap();
        let p = LaurentPoly::monomial(lp(&[-1, 0]), 5);
        let q = wall_cross(&fd, &p, &f, &lp(&[1, 0]), -1, 5);
        assert_eq!(q.terms.len(), 2);
        assert_eq!(q.coeff(&lp(&[-1, 0])), ri(1));
        assert_eq!(q.coeff(&lp(&[-1, 1])), ri(1));
        assert_eq!(alloc::format!("{q}"), "z^(-1,1) + z^(-1,0)");
    }

    #[test]
    fn cross_parallel_unchanged() {
        let fd = a2();
        let f = WallFunction::from_fd(&fd, lp(&[0, 1]), ints(&[1]), 5, true).unwrap();
        let p = LaurentPoly::monomial(lp(&[0, 1]), 5);
        assert_eq!(wall_cross(&fd, &p, &f, &lp(&[1, 0]), 1, 5), p);
    }

    #[test]
    fn cross_effective_order_drops_to_stored() {
        let fd = kron();
        let f = WallFunction::from_fd(&fd, lp(&[-2, 2]), ints(&[2, 3]), 4, false).unwrap();
        let p = LaurentPoly::monomial(lp(&[1, 0]), 6);
        let q = wall_cross(&fd, &p, &f, &lp(&[1, 1]), 1, 6);
        assert_eq!(q.order, 4);
    }

    fn arb_poly() -> impl Strategy<Value = Vec<(i64, i64, i64)>> {
        prop::collection::vec((-3i64..4, -3i64..4, -3i64..4), 1..4)
    }

    proptest! {
        #[test]
        fn pow_additive(a in -3i64..4, b in -3i64..4, c1 in -3i64..4, c2 in -3i64..4) {
            let f = WallFunction::new(x(), 1, ints(&[c1, c2]), 5, true);
            let lhs = wf_mul(&wf_pow(&f, a, 5), &wf_pow(&f, b, 5), 5).unwrap();
            let rhs = wf_pow(&f, a + b, 5);
            prop_assert_eq!(lhs.coeffs, rhs.coeffs);
        }

        #[test]
        fn cross_inverse_is_identity(terms in arb_poly(), s in prop::sample::select(vec![-1i32, 1])) {
            let fd = kron();
            let base = lp(&[1, -1]);
            let mut p = LaurentPoly::zero(base.clone(), 6);
            for (i, j, c) in terms {
                // base + i g1 + j g2 with small nonnegative shifts
                let m = &(&base + &lp(&[0, 2]).scale_i(i.abs())) + &lp(&[-2, 0]).scale_i(j.abs());
                p.add_term(&fd, m, ri(c));
            }
            let f = WallFunction::from_fd(&fd, lp(&[-2, 2]), ints(&[2, 3, 4]), 6, true).unwrap();
            let n0 = lp(&[1, 1]);
            let q = wall_cross(&fd, &wall_cross(&fd, &p, &f, &n0, s, 6), &f, &n0, -s, 6);
            prop_assert!(q.eq_mod(&fd, &p));
        }

        #[test]
        fn cross_multiplicative(i in 0i64..3, j in 0i64..3, s in prop::sample::select(vec![-1i32, 1])) {
            let fd = kron();
            let f = WallFunction::from_fd(&fd, lp(&[0, 2]), ints(&[1]), 6, true).unwrap();
            let n0 = lp(&[1, 0]);
            let p = LaurentPoly::monomial(lp(&[-1 - i, 1]), 6);
            let q = LaurentPoly::monomial(lp(&[1, j - 2]), 6);
            let lhs = wall_cross(&fd, &p.mul(&fd, &q), &f, &n0, s, 6);
            let rhs = wall_cross(&fd, &p, &f, &n0, s, 6).mul(&fd, &wall_cross(&fd, &q, &f, &n0, s, 6));
            prop_assert!(lhs.eq_mod(&fd, &rhs));
        }

        #[test]
        fn same_hyperplane_crossings_commute(c in 1i64..4, m0 in -3i64..3, m1 in -3i64..3) {
            let fd = a2();
            let f = WallFunction::from_fd(&fd, lp(&[0, 1]), ints(&[1]), 6, true).unwrap();
            let g = WallFunction::from_fd(&fd, lp(&[0, 1]), ints(&[c, 1]), 6, false).unwrap();
            let n0 = lp(&[1, 0]);
            let p = LaurentPoly::monomial(lp(&[m0, m1]), 6);
            let a = wall_cross(&fd, &wall_cross(&fd, &p, &f, &n0, 1, 6), &g, &n0, 1, 6);
            let b = wall_cross(&fd, &wall_cross(&fd, &p, &g, &n0, 1, 6), &f, &n0, 1, 6);
            prop_assert!(a.eq_mod(&fd, &b));
        }
    }
}
