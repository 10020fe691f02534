//! Scalar abstraction shared by the numeric kernels.
//!
//! Linear algebra, the simplex solver, admittance assembly and the Newton
//! power flow are written against [`Scalar`] so they run in `f32` or `f64`.
//! Network data, profiles and results are stored in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal or data value.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance floor for pivots and feasibility tests: `1e-9` in `f64`,
    /// a few ulps scaled up for narrower types.
    fn solver_eps() -> Self {
        let floor = Self::of(1e-9);
        let scaled = Self::epsilon() * Self::of(1e3);
        if scaled > floor {
            scaled
        } else {
            floor
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
