//! Picks the fastest lane width for a known pattern on this machine.

use std::time::{Duration, Instant};

use super::{fused_mm_specialized, LaneWidth};
use crate::csr::CsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::KernelError;
use crate::ops::OpSpec;
use crate::scalar::{ColIndex, Scalar};

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best: LaneWidth,
    /// Best-of-`reps` time per candidate.
    pub timings: Vec<(LaneWidth, Duration)>,
}

pub fn select_lane_width<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
    threads: usize,
    reps: usize,
) -> Result<TuneResult, KernelError> {
    let mut timings = Vec::with_capacity(LaneWidth::ALL.len());
    for lanes in LaneWidth::ALL {
        fused_mm_specialized(a, x, y, spec, threads, lanes)?;
        let mut best = Duration::MAX;
        for _ in 0..reps.max(1) {
            let start = Instant::now();
            let z = fused_mm_specialized(a, x, y, spec, threads, lanes)?;
            best = best.min(start.elapsed());
            std::hint::black_box(z);
        }
        timings.push((lanes, best));
    }
    let best = timings
        .iter()
        .min_by_key(|(_, t)| *t)
        .map(|(w, _)| *w)
        .unwrap_or_default();
    Ok(TuneResult { best, timings })
}
