//! Floating-point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::num::ParseFloatError;
use std::str::FromStr;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the embedding trainers, graph builder and model are generic over.
///
/// Implemented for `f32` and `f64`. Training defaults to `f64`; `f32` trades
/// gradient-check precision for speed.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + Default
    + FromStr<Err = ParseFloatError>
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Name used in checkpoints and reports.
    const NAME: &'static str;

    /// Converts an `f64` literal. Panics only for values the type cannot represent.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}

/// Logistic sigmoid, evaluated without overflow for large |x|.
#[inline]
pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `ln(sigmoid(x))` without cancellation.
#[inline]
pub fn log_sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}
