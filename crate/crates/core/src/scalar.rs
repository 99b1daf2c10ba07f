//! Floating-point abstraction for the numeric core.
//!
//! Everything that touches noise scales, budgets or pseudoinverses is generic
//! over [`Scalar`], implemented for `f32` and `f64`. Conversions go through
//! `num-traits`; linear algebra goes through `nalgebra::RealField`.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

pub trait Scalar:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Singular values below `PINV_RTOL * sigma_max` are treated as zero.
    const PINV_RTOL: f64;

    /// Converts an `f64` literal or intermediate into `Self`.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_count(c: u64) -> Self {
        Self::from_u64(c).expect("count representable in scalar type")
    }
}

impl Scalar for f64 {
    const PINV_RTOL: f64 = 1e-10;
}

// 1e-10 is below f32 resolution, so the cutoff is raised to a few ulps.
impl Scalar for f32 {
    const PINV_RTOL: f64 = 1e-6;
}
