//! Floating point abstraction shared by every numeric routine in the engine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the engine is generic over: `f32` or `f64`.
///
/// Hyperparameters and on-disk documents are always `f64`; they are cast
/// into the working scalar at the boundary with [`Scalar::of`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + ScalarOperand + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every supported scalar")
    }

    /// Widens to `f64` for serialization and comparison.
    fn widen(self) -> f64 {
        self.to_f64().expect("scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable logistic function.
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}
