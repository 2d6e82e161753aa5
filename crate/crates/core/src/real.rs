//! Floating-point precision selection.
//!
//! Every simulation run is monomorphized over one [`Real`] type. Storage in the
//! variable registry goes through [`RealCell`], a relaxed atomic holding the
//! value's bits, so kernel views can be shared across worker threads without
//! any host-side synchronization.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Run-wide precision tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Single => "f32",
            Precision::Double => "f64",
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "f32" | "single" => Ok(Precision::Single),
            "f64" | "double" => Ok(Precision::Double),
            other => Err(format!("unknown precision `{other}` (expected f32 or f64)")),
        }
    }
}

impl Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Interior-mutable storage slot for one [`Real`] value.
///
/// Loads and stores are `Relaxed`: ordering between kernel launches is
/// provided by the join at the end of every dispatch.
pub trait RealCell<R>: Send + Sync + Debug {
    fn new(value: R) -> Self;
    fn load(&self) -> R;
    fn store(&self, value: R);
}

impl RealCell<f32> for AtomicU32 {
    #[inline(always)]
    fn new(value: f32) -> Self {
        AtomicU32::new(value.to_bits())
    }
    #[inline(always)]
    fn load(&self) -> f32 {
        f32::from_bits(AtomicU32::load(self, Ordering::Relaxed))
    }
    #[inline(always)]
    fn store(&self, value: f32) {
        AtomicU32::store(self, value.to_bits(), Ordering::Relaxed)
    }
}

impl RealCell<f64> for AtomicU64 {
    #[inline(always)]
    fn new(value: f64) -> Self {
        AtomicU64::new(value.to_bits())
    }
    #[inline(always)]
    fn load(&self) -> f64 {
        f64::from_bits(AtomicU64::load(self, Ordering::Relaxed))
    }
    #[inline(always)]
    fn store(&self, value: f64) {
        AtomicU64::store(self, value.to_bits(), Ordering::Relaxed)
    }
}

/// Floating-point scalar used throughout the solver (`f32` or `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    type Cell: RealCell<Self>;
    const PRECISION: Precision;

    /// Converts an `f64` literal or configuration value into this precision.
    fn lit(value: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Raw bit pattern widened to 64 bits, for bitwise comparisons.
    fn bits(self) -> u64;
}

impl Real for f32 {
    type Cell = AtomicU32;
    const PRECISION: Precision = Precision::Single;

    #[inline(always)]
    fn lit(value: f64) -> Self {
        value as f32
    }
    #[inline(always)]
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn bits(self) -> u64 {
        self.to_bits() as u64
    }
}

impl Real for f64 {
    type Cell = AtomicU64;
    const PRECISION: Precision = Precision::Double;

    #[inline(always)]
    fn lit(value: f64) -> Self {
        value
    }
    #[inline(always)]
    fn as_f64(self) -> f64 {
        self
    }
    fn bits(self) -> u64 {
        self.to_bits()
    }
}

/// Fixed-size vector helpers on plain arrays.
pub mod vecn {
    use super::Real;

    #[inline(always)]
    pub fn sub<R: Real, const D: usize>(a: [R; D], b: [R; D]) -> [R; D] {
        std::array::from_fn(|k| a[k] - b[k])
    }

    #[inline(always)]
    pub fn add<R: Real, const D: usize>(a: [R; D], b: [R; D]) -> [R; D] {
        std::array::from_fn(|k| a[k] + b[k])
    }

    #[inline(always)]
    pub fn scale<R: Real, const D: usize>(a: [R; D], s: R) -> [R; D] {
        std::array::from_fn(|k| a[k] * s)
    }

    /// `a + b * s`, component-wise.
    #[inline(always)]
    pub fn add_scaled<R: Real, const D: usize>(a: [R; D], b: [R; D], s: R) -> [R; D] {
        std::array::from_fn(|k| a[k] + b[k] * s)
    }

    #[inline(always)]
    pub fn dot<R: Real, const D: usize>(a: [R; D], b: [R; D]) -> R {
        let mut acc = R::zero();
        for k in 0..D {
            acc += a[k] * b[k];
        }
        acc
    }

    #[inline(always)]
    pub fn norm_sq<R: Real, const D: usize>(a: [R; D]) -> R {
        dot(a, a)
    }

    #[inline(always)]
    pub fn norm<R: Real, const D: usize>(a: [R; D]) -> R {
        norm_sq(a).sqrt()
    }

    #[inline(always)]
    pub fn zero<R: Real, const D: usize>() -> [R; D] {
        [R::zero(); D]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_round_trip_bits() {
        let c = <<f64 as Real>::Cell as RealCell<f64>>::new(-0.0);
        assert_eq!(RealCell::<f64>::load(&c).to_bits(), (-0.0f64).to_bits());
        RealCell::<f64>::store(&c, 0.013);
        assert_eq!(RealCell::<f64>::load(&c), 0.013);

        let c = <<f32 as Real>::Cell as RealCell<f32>>::new(f32::NAN);
        assert!(RealCell::<f32>::load(&c).is_nan());
        RealCell::<f32>::store(&c, 1.5);
        assert_eq!(RealCell::<f32>::load(&c), 1.5);
    }

    #[test]
    fn precision_parses() {
        assert_eq!("f32".parse::<Precision>().unwrap(), Precision::Single);
        assert_eq!("double".parse::<Precision>().unwrap(), Precision::Double);
        assert!("f16".parse::<Precision>().is_err());
        assert_eq!(<f32 as Real>::PRECISION, Precision::Single);
    }
}
