//! Floating-point abstraction shared by the scoring and training code.
//!
//! Embeddings are stored on disk as `f32`; everything that produces a score
//! or a gradient is written against [`Scalar`] so it can run in either
//! precision. The crate root exposes `f64` aliases for the common case.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable for scores, probabilities and classifier weights.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float scalar")
    }

    fn of_f32(v: f32) -> Self {
        Self::from_f32(v).expect("finite f32 converts to any float scalar")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to any float scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Norms below this are treated as zero by [`cosine`].
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VectorError {
    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("cosine of a zero-norm vector")]
    ZeroNorm,
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Cosine similarity, clamped into `[-1, 1]` against rounding.
pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> Result<S, VectorError> {
    if a.len() != b.len() {
        return Err(VectorError::LengthMismatch { expected: a.len(), got: b.len() });
    }
    let (na, nb) = (norm(a), norm(b));
    let eps = S::of(ZERO_NORM);
    if na < eps || nb < eps {
        return Err(VectorError::ZeroNorm);
    }
    let c = dot(a, b) / (na * nb);
    Ok(c.max(-S::one()).min(S::one()))
}

/// Numerically stable softmax; the result always sums to one.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let mut out: Vec<S> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: S = out.iter().copied().sum();
    for p in &mut out {
        *p = *p / total;
    }
    out
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
