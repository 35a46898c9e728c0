//! Value vectors and the two norms used by every bound: sup-norm and span.

use std::ops::{Add, Deref, DerefMut, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A real vector indexed by state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueVec<T>(Vec<T>);

impl<T: Real> ValueVec<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn constant(n: usize, c: T) -> Self {
        Self(vec![c; n])
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn sup_norm(&self) -> T {
        sup_norm(&self.0)
    }

    pub fn span(&self) -> Result<T> {
        span(&self.0)
    }

    pub fn sup_dist(&self, other: &[T]) -> Result<T> {
        sup_dist(&self.0, other)
    }

    pub fn max(&self) -> T {
        self.0.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.0.iter().copied().fold(T::infinity(), T::min)
    }

    /// Returns `self + c * other`.
    pub fn axpy(&self, c: T, other: &[T]) -> Self {
        assert_eq!(self.len(), other.len(), "axpy length mismatch");
        Self(self.0.iter().zip(other).map(|(&a, &b)| a + c * b).collect())
    }

    pub fn shifted(&self, c: T) -> Self {
        Self(self.0.iter().map(|&a| a + c).collect())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self(self.0.iter().map(|&a| f(a)).collect())
    }

    pub fn cast<U: Real>(&self) -> ValueVec<U> {
        ValueVec(self.0.iter().map(|&a| U::lit(a.as_f64())).collect())
    }

    /// Entrywise `self <= other + tol`.
    pub fn le_with(&self, other: &[T], tol: T) -> bool {
        self.len() == other.len() && self.0.iter().zip(other).all(|(&a, &b)| a <= b + tol)
    }
}

impl<T> From<Vec<T>> for ValueVec<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

impl<T> FromIterator<T> for ValueVec<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<T> Deref for ValueVec<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for ValueVec<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

impl<T> Index<usize> for ValueVec<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for ValueVec<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

// Arithmetic operators panic on length mismatch; use the checked helpers
// (`sup_dist`) where lengths come from user input.
impl<T: Real> Add<&[T]> for &ValueVec<T> {
    type Output = ValueVec<T>;
    fn add(self, rhs: &[T]) -> ValueVec<T> {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        self.0.iter().zip(rhs).map(|(&a, &b)| a + b).collect()
    }
}

impl<T: Real> Add<&ValueVec<T>> for &ValueVec<T> {
    type Output = ValueVec<T>;
    fn add(self, rhs: &ValueVec<T>) -> ValueVec<T> {
        self + rhs.as_slice()
    }
}

impl<T: Real> Sub<&[T]> for &ValueVec<T> {
    type Output = ValueVec<T>;
    fn sub(self, rhs: &[T]) -> ValueVec<T> {
        assert_eq!(self.len(), rhs.len(), "vector length mismatch");
        self.0.iter().zip(rhs).map(|(&a, &b)| a - b).collect()
    }
}

impl<T: Real> Sub<&ValueVec<T>> for &ValueVec<T> {
    type Output = ValueVec<T>;
    fn sub(self, rhs: &ValueVec<T>) -> ValueVec<T> {
        self - rhs.as_slice()
    }
}

impl<T: Real> Mul<T> for &ValueVec<T> {
    type Output = ValueVec<T>;
    fn mul(self, c: T) -> ValueVec<T> {
        self.0.iter().map(|&a| a * c).collect()
    }
}

/// Largest absolute entry; 0 for an empty slice.
pub fn sup_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Largest absolute entrywise difference.
pub fn sup_dist<T: Real>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { expected: u.len(), got: v.len() });
    }
    Ok(u.iter().zip(v).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
}

/// Span seminorm `max(v) - min(v)`.
pub fn span<T: Real>(v: &[T]) -> Result<T> {
    if v.is_empty() {
        return Err(Error::EmptyVector);
    }
    let (lo, hi) = v
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Ok(hi - lo)
}
