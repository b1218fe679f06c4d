use std::ops::Range;

use crate::csr::CsrMatrix;
use crate::error::KernelError;
use crate::scalar::{ColIndex, Scalar};

/// Contiguous row ranges, one per worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    boundaries: Vec<usize>,
}

impl PartitionPlan {
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn parts(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn part(&self, i: usize) -> Range<usize> {
        self.boundaries[i]..self.boundaries[i + 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.boundaries.windows(2).map(|w| w[0]..w[1])
    }
}

/// Splits the rows of `a` into `t` contiguous parts of roughly `nnz / t`
/// nonzeros each.
///
/// Boundary `i` is the smallest row `r` with `row_ptr[r] >= i * nnz / t`, found
/// in one scan of `row_ptr`. Each part then holds at most
/// `nnz / t + max_row_nnz` nonzeros. Without nonzeros, rows are split evenly.
pub fn part1d<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    t: usize,
) -> Result<PartitionPlan, KernelError> {
    if t == 0 {
        return Err(KernelError::ZeroWorkers);
    }
    Ok(split_row_ptr(a.row_ptr(), t))
}

pub(crate) fn split_row_ptr(row_ptr: &[usize], t: usize) -> PartitionPlan {
    let m = row_ptr.len() - 1;
    let nnz = row_ptr[m] as u128;
    let mut boundaries = vec![0usize; t + 1];
    boundaries[t] = m;
    if nnz == 0 {
        for (i, b) in boundaries.iter_mut().enumerate().take(t).skip(1) {
            *b = i * m / t;
        }
        return PartitionPlan { boundaries };
    }
    let parts = t as u128;
    let mut r = 0usize;
    for (i, b) in boundaries.iter_mut().enumerate().take(t).skip(1) {
        let target = i as u128 * nnz;
        while r < m && (row_ptr[r] as u128) * parts < target {
            r += 1;
        }
        *b = r;
    }
    PartitionPlan { boundaries }
}
