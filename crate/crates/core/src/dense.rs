use crate::error::MatrixError;
use crate::scalar::Scalar;

/// Row-major `nrows x dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    nrows: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    /// Validates length and finiteness.
    pub fn new(nrows: usize, dim: usize, data: Vec<T>) -> Result<Self, MatrixError> {
        if data.len() != nrows * dim {
            return Err(MatrixError::DenseLength {
                len: data.len(),
                nrows,
                dim,
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                index,
                value: data[index].to_f64(),
            });
        }
        Ok(Self { nrows, dim, data })
    }

    pub fn zeros(nrows: usize, dim: usize) -> Self {
        Self::filled(nrows, dim, T::zero())
    }

    /// Kernel outputs may hold non-finite accumulator identities (e.g. -inf for
    /// an empty row under max accumulation), so this skips the finiteness check.
    pub(crate) fn filled(nrows: usize, dim: usize, value: T) -> Self {
        Self {
            nrows,
            dim,
            data: vec![value; nrows * dim],
        }
    }

    pub(crate) fn from_raw(nrows: usize, dim: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), nrows * dim);
        Self { nrows, dim, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, MatrixError> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(MatrixError::DenseLength {
                    len: r.len(),
                    nrows: rows.len(),
                    dim,
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, u: usize) -> &[T] {
        &self.data[u * self.dim..(u + 1) * self.dim]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.nrows).map(|u| self.row(u).to_vec()).collect()
    }

    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            nrows: self.nrows,
            dim: self.dim,
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    /// Largest elementwise relative difference, `|a-b| / max(|b|, floor)`.
    /// Matching infinities count as equal.
    pub fn max_rel_diff(&self, other: &DenseMatrix<f64>, floor: f64) -> f64 {
        assert_eq!((self.nrows, self.dim), (other.nrows, other.dim));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| {
                let a = a.to_f64();
                if a == b {
                    0.0
                } else {
                    (a - b).abs() / b.abs().max(floor)
                }
            })
            .fold(0.0, f64::max)
    }
}
