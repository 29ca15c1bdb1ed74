//! Scalar abstraction for the state/channel algebra.
//!
//! The algebra layer (operators, channels, entanglement monotones and the
//! channel families) is written once over [`Real`] and instantiated for `f32`
//! and `f64`. The dynamical layers (master equations, trajectories, witness
//! scans) work in `f64` because their tolerances are pinned at double
//! precision.

use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the algebra layer.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Lossy conversion back to `f64`, for diagnostics and error payloads.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A tolerance that is at least `tol` but never below what the type can
    /// resolve (a few thousand ulps around 1).
    #[inline]
    fn tolerance(tol: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(4096.0);
        let t = Self::lit(tol);
        if t > floor {
            t
        } else {
            floor
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;
/// Dense complex matrix over `T`.
pub type CMatrix<T> = DMatrix<Complex<T>>;
/// Dense complex column vector over `T`.
pub type CVector<T> = DVector<Complex<T>>;

#[inline]
pub(crate) fn c<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(T::lit(re), T::lit(im))
}

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}
