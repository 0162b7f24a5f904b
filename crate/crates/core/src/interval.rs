//! Closed real intervals and axis-aligned boxes with outward rounding.
//!
//! Every arithmetic operation widens its result by one unit in the last
//! place on each bound, so the true real-arithmetic result is always
//! contained despite floating-point rounding. Bounds are required to stay
//! finite; an operation that would overflow (or divide by a zero-containing
//! interval) reports a [`NumericError`] instead of producing infinities.

use thiserror::Error;

use crate::scalar::Scalar;

/// Numeric failure during interval evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("division by an interval containing zero")]
    DivisionByZero,
    #[error("operation produced a non-finite bound")]
    NonFinite,
}

/// A closed interval `[lo, hi]` with finite bounds and `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<S> {
    pub lo: S,
    pub hi: S,
}

impl<S: Scalar> Interval<S> {
    pub fn new(lo: S, hi: S) -> Self {
        debug_assert!(lo <= hi, "interval bounds out of order");
        debug_assert!(lo.is_finite() && hi.is_finite(), "non-finite bound");
        Interval { lo, hi }
    }

    pub fn point(x: S) -> Self {
        Interval::new(x, x)
    }

    pub fn zero() -> Self {
        Interval::point(S::zero())
    }

    pub fn width(&self) -> S {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> S {
        let half = S::from_f64(0.5).unwrap();
        let m = self.lo * half + self.hi * half;
        // A midpoint must lie inside the interval even after rounding.
        m.max(self.lo).min(self.hi)
    }

    /// Largest absolute value over the interval.
    pub fn magnitude(&self) -> S {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains_point(&self, x: S) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains_point(S::zero())
    }

    pub fn hull(&self, other: &Self) -> Self {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            Some(Interval::new(lo, hi))
        } else {
            None
        }
    }

    /// Widens both bounds outward by `eps >= 0`.
    pub fn widen(&self, eps: S) -> Self {
        Interval::new(self.lo - eps, self.hi + eps)
    }

    fn outward(lo: S, hi: S) -> Result<Self, NumericError> {
        let lo = lo.next_down();
        let hi = hi.next_up();
        if lo.is_finite() && hi.is_finite() {
            Ok(Interval::new(lo, hi))
        } else {
            Err(NumericError::NonFinite)
        }
    }

    /// Exact negation (IEEE negation never rounds).
    pub fn neg(&self) -> Self {
        Interval::new(-self.hi, -self.lo)
    }

    pub fn checked_add(&self, rhs: &Self) -> Result<Self, NumericError> {
        Self::outward(self.lo + rhs.lo, self.hi + rhs.hi)
    }

    pub fn checked_sub(&self, rhs: &Self) -> Result<Self, NumericError> {
        Self::outward(self.lo - rhs.hi, self.hi - rhs.lo)
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self, NumericError> {
        let products = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let mut lo = products[0];
        let mut hi = products[0];
        for &p in &products[1..] {
            lo = lo.min(p);
            hi = hi.max(p);
        }
        if lo.is_nan() || hi.is_nan() {
            return Err(NumericError::NonFinite);
        }
        Self::outward(lo, hi)
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self, NumericError> {
        if rhs.contains_zero() {
            return Err(NumericError::DivisionByZero);
        }
        let quotients = [
            self.lo / rhs.lo,
            self.lo / rhs.hi,
            self.hi / rhs.lo,
            self.hi / rhs.hi,
        ];
        let mut lo = quotients[0];
        let mut hi = quotients[0];
        for &q in &quotients[1..] {
            lo = lo.min(q);
            hi = hi.max(q);
        }
        Self::outward(lo, hi)
    }

    /// Rigorous enclosure of `x^n` for a point `x`, by binary exponentiation
    /// with outward-rounded interval multiplications.
    fn point_pow(x: S, n: u32) -> Result<Self, NumericError> {
        let mut result = Interval::point(S::one());
        let mut base = Interval::point(x);
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.checked_mul(&base)?;
            }
            n >>= 1;
            if n > 0 {
                base = base.checked_mul(&base)?;
            }
        }
        Ok(result)
    }

    /// Integer power with the dedicated even/odd monotone decomposition, so
    /// `[-2,1]^2` yields `[0,4]` rather than the `x*x` result `[-2,4]`.
    pub fn checked_powi(&self, n: u32) -> Result<Self, NumericError> {
        match n {
            0 => Ok(Interval::point(S::one())),
            1 => Ok(*self),
            _ if n % 2 == 1 => {
                let lo = Self::point_pow(self.lo, n)?;
                let hi = Self::point_pow(self.hi, n)?;
                Ok(Interval::new(lo.lo, hi.hi))
            }
            _ => {
                let big = Self::point_pow(self.magnitude(), n)?;
                if self.contains_zero() {
                    Ok(Interval::new(S::zero(), big.hi))
                } else {
                    let small = self.lo.abs().min(self.hi.abs());
                    let small = Self::point_pow(small, n)?;
                    Ok(Interval::new(small.lo.max(S::zero()), big.hi))
                }
            }
        }
    }
}

/// An axis-aligned box: one closed interval per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion<S> {
    dims: Vec<Interval<S>>,
}

impl<S: Scalar> BoxRegion<S> {
    pub fn new(dims: Vec<Interval<S>>) -> Self {
        BoxRegion { dims }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn intervals(&self) -> &[Interval<S>] {
        &self.dims
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval<S>> {
        self.dims.iter()
    }

    pub fn contains(&self, other: &Self) -> bool {
        debug_assert_eq!(self.dim(), other.dim());
        self.dims
            .iter()
            .zip(other.dims.iter())
            .all(|(a, b)| a.contains(b))
    }

    pub fn contains_point(&self, point: &[S]) -> bool {
        debug_assert_eq!(self.dim(), point.len());
        self.dims
            .iter()
            .zip(point.iter())
            .all(|(iv, &x)| iv.contains_point(x))
    }

    pub fn hull(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        BoxRegion::new(
            self.dims
                .iter()
                .zip(other.dims.iter())
                .map(|(a, b)| a.hull(b))
                .collect(),
        )
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        debug_assert_eq!(self.dim(), other.dim());
        self.dims
            .iter()
            .zip(other.dims.iter())
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()
            .map(BoxRegion::new)
    }

    /// Widens each dimension outward by the matching `eps` entry.
    pub fn widen_each(&self, eps: &[S]) -> Self {
        debug_assert_eq!(self.dim(), eps.len());
        BoxRegion::new(
            self.dims
                .iter()
                .zip(eps.iter())
                .map(|(iv, &e)| iv.widen(e))
                .collect(),
        )
    }

    pub fn midpoint(&self) -> Vec<S> {
        self.dims.iter().map(|iv| iv.midpoint()).collect()
    }

    pub fn widths(&self) -> Vec<S> {
        self.dims.iter().map(|iv| iv.width()).collect()
    }
}

impl<S> std::ops::Index<usize> for BoxRegion<S> {
    type Output = Interval<S>;
    fn index(&self, i: usize) -> &Interval<S> {
        &self.dims[i]
    }
}

impl<S> FromIterator<Interval<S>> for BoxRegion<S> {
    fn from_iter<T: IntoIterator<Item = Interval<S>>>(iter: T) -> Self {
        BoxRegion {
            dims: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type I = Interval<f64>;

    #[test]
    fn add_contains_exact_sum() {
        let a = I::new(1.0, 2.0);
        let b = I::new(-0.5, 0.25);
        let s = a.checked_add(&b).unwrap();
        assert!(s.lo <= 0.5 && 2.25 <= s.hi);
        assert!(s.width() <= 1.75 + 1e-12);
    }

    #[test]
    fn mul_covers_sign_cases() {
        let a = I::new(-2.0, 3.0);
        let b = I::new(-1.0, 4.0);
        let p = a.checked_mul(&b).unwrap();
        assert!(p.lo <= -8.0 && 12.0 <= p.hi);
    }

    #[test]
    fn div_by_zero_interval_is_error() {
        let a = I::new(1.0, 2.0);
        assert_eq!(
            a.checked_div(&I::new(-1.0, 1.0)),
            Err(NumericError::DivisionByZero)
        );
        let q = a.checked_div(&I::new(2.0, 4.0)).unwrap();
        assert!(q.lo <= 0.25 && 1.0 <= q.hi);
    }

    #[test]
    fn even_power_uses_monotone_decomposition() {
        let sq = I::new(-2.0, 1.0).checked_powi(2).unwrap();
        assert_eq!(sq.lo, 0.0);
        assert!(4.0 <= sq.hi && sq.hi <= 4.0 + 1e-12);
        let cube = I::new(-2.0, 1.0).checked_powi(3).unwrap();
        assert!(cube.lo <= -8.0 && cube.hi >= 1.0);
        assert!(cube.lo >= -8.0 - 1e-12);
    }

    #[test]
    fn overflow_is_reported() {
        let big = I::point(1e300);
        assert_eq!(big.checked_mul(&big), Err(NumericError::NonFinite));
    }

    #[test]
    fn box_ops() {
        let a = BoxRegion::new(vec![I::new(0.0, 1.0), I::new(-1.0, 1.0)]);
        let b = BoxRegion::new(vec![I::new(0.25, 0.5), I::new(0.0, 0.5)]);
        assert!(a.contains(&b));
        assert!(!b.contains(&a));
        assert!(a.contains_point(&[0.5, 0.0]));
        let c = a.intersect(&b).unwrap();
        assert_eq!(c, b);
    }
}
