//! Scalar abstraction for the deterministic model arithmetic.
//!
//! The ODE and probability-evolution math is written against this trait so the
//! same code runs in `f32` or `f64`. Everything stochastic (counts, RNG) stays
//! concrete.

use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Float:
    num_traits::Float + num_traits::FromPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Float")
    }
}

impl Float for f32 {}
impl Float for f64 {}
