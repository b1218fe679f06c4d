use std::fmt::{Debug, Display};

use num_traits::Float;

/// Floating-point element type of feature matrices and edge values.
pub trait Scalar: Float + Debug + Display + Default + Send + Sync + 'static {
    /// Storage width in bytes.
    const BYTES: usize;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    const BYTES: usize = 4;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Column index storage for [`CsrMatrix`](crate::CsrMatrix).
pub trait ColIndex: Copy + Debug + Eq + Ord + Send + Sync + 'static {
    const BYTES: usize;

    fn to_usize(self) -> usize;
    fn from_usize(v: usize) -> Option<Self>;
}

impl ColIndex for u32 {
    const BYTES: usize = 4;

    #[inline(always)]
    fn to_usize(self) -> usize {
        self as usize
    }

    fn from_usize(v: usize) -> Option<Self> {
        u32::try_from(v).ok()
    }
}

impl ColIndex for u64 {
    const BYTES: usize = 8;

    #[inline(always)]
    fn to_usize(self) -> usize {
        self as usize
    }

    fn from_usize(v: usize) -> Option<Self> {
        u64::try_from(v).ok()
    }
}
