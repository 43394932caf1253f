//! Scalar abstraction for the signal-path math.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the DSP and clustering code is generic over.
///
/// Implemented for `f32` and `f64`. Configuration values are plain `f64` and
/// are converted at the boundary with [`real`]; manifests always store `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert a configuration-space `f64` into the working scalar.
pub fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("finite f64 representable in scalar type")
}

/// Convert a working scalar back to `f64` for storage in records.
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().expect("scalar convertible to f64")
}
