//! Compressed sparse row adjacency.
//!
//! Rows are vertices of the current subgraph (`m`), columns are all vertices
//! (`n`). Rows need not be sorted by column; every kernel in this crate visits
//! the stored neighbors of a row in storage order, which fixes the
//! floating-point accumulation order.

use crate::error::MatrixError;
use crate::scalar::{ColIndex, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T, I = u64> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<I>,
    values: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphStats {
    pub nrows: usize,
    pub ncols: usize,
    pub nnz: usize,
    /// nnz / nrows (0 for an empty row set).
    pub avg_degree: f64,
    pub max_degree: usize,
}

impl<T: Scalar, I: ColIndex> CsrMatrix<T, I> {
    /// Builds a validated matrix from raw CSR arrays.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<I>,
        values: Vec<T>,
    ) -> Result<Self, MatrixError> {
        let a = Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        };
        a.validate()?;
        Ok(a)
    }

    /// Builds a matrix from coordinate entries.
    ///
    /// Duplicate `(row, col)` pairs are summed. Within a row, entries keep the
    /// order in which each column first appeared in `entries`.
    pub fn from_coo(
        entries: &[(usize, usize, T)],
        nrows: usize,
        ncols: usize,
    ) -> Result<Self, MatrixError> {
        for (index, &(row, col, _)) in entries.iter().enumerate() {
            if row >= nrows || col >= ncols {
                return Err(MatrixError::EntryOutOfBounds {
                    index,
                    row,
                    col,
                    nrows,
                    ncols,
                });
            }
        }
        if let Some(last) = ncols.checked_sub(1) {
            if I::from_usize(last).is_none() {
                return Err(MatrixError::IndexOverflow { col: last });
            }
        }

        // Stable bucket by row.
        let mut counts = vec![0usize; nrows + 1];
        for &(row, _, _) in entries {
            counts[row + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut order = vec![0usize; entries.len()];
        for (k, &(row, _, _)) in entries.iter().enumerate() {
            order[next[row]] = k;
            next[row] += 1;
        }

        // Per-row dedup; `slot[col]` is valid only when `stamp[col] == row + 1`.
        let mut stamp = vec![0usize; ncols];
        let mut slot = vec![0usize; ncols];
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<T> = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        for row in 0..nrows {
            for &k in &order[counts[row]..counts[row + 1]] {
                let (_, col, v) = entries[k];
                if stamp[col] == row + 1 {
                    let p = slot[col];
                    values[p] = values[p] + v;
                } else {
                    stamp[col] = row + 1;
                    slot[col] = col_idx.len();
                    col_idx.push(I::from_usize(col).expect("checked above"));
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), MatrixError> {
        let bad = |msg: String| Err(MatrixError::InvalidCsr(msg));
        if self.row_ptr.len() != self.nrows + 1 {
            return bad(format!(
                "row_ptr has length {}, expected {}",
                self.row_ptr.len(),
                self.nrows + 1
            ));
        }
        if self.row_ptr[0] != 0 {
            return bad("row_ptr[0] is not 0".into());
        }
        for i in 1..self.row_ptr.len() {
            if self.row_ptr[i] < self.row_ptr[i - 1] {
                return bad(format!("row_ptr not monotone at index {i}"));
            }
        }
        let nnz = self.col_idx.len();
        if self.values.len() != nnz {
            return bad(format!(
                "values has length {}, col_idx has length {nnz}",
                self.values.len()
            ));
        }
        if self.row_ptr[self.nrows] != nnz {
            return bad(format!(
                "row_ptr[m] = {} but nnz = {nnz}",
                self.row_ptr[self.nrows]
            ));
        }
        if let Some(p) = self.col_idx.iter().position(|c| c.to_usize() >= self.ncols) {
            return bad(format!(
                "column index out of range: {} at position {p} (ncols {})",
                self.col_idx[p].to_usize(),
                self.ncols
            ));
        }
        let mut stamp = vec![0usize; self.ncols];
        for row in 0..self.nrows {
            for &c in &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]] {
                let c = c.to_usize();
                if stamp[c] == row + 1 {
                    return bad(format!("duplicate column {c} in row {row}"));
                }
                stamp[c] = row + 1;
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> GraphStats {
        let max_degree = (0..self.nrows).map(|u| self.row_nnz(u)).max().unwrap_or(0);
        let avg_degree = if self.nrows == 0 {
            0.0
        } else {
            self.nnz() as f64 / self.nrows as f64
        };
        GraphStats {
            nrows: self.nrows,
            ncols: self.ncols,
            nnz: self.nnz(),
            avg_degree,
            max_degree,
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    #[inline]
    pub fn col_idx(&self) -> &[I] {
        &self.col_idx
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn row_nnz(&self, u: usize) -> usize {
        self.row_ptr[u + 1] - self.row_ptr[u]
    }

    /// Column indices and edge values of row `u`, in storage order.
    #[inline]
    pub fn row(&self, u: usize) -> (&[I], &[T]) {
        let r = self.row_ptr[u]..self.row_ptr[u + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Expands to `(row, col, value)` triples in storage order.
    pub fn to_coo(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for u in 0..self.nrows {
            let (cols, vals) = self.row(u);
            out.extend(cols.iter().zip(vals).map(|(c, &v)| (u, c.to_usize(), v)));
        }
        out
    }

    /// Same matrix with every row sorted by column index.
    pub fn sorted(&self) -> Self {
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        let mut row: Vec<(I, T)> = Vec::new();
        for u in 0..self.nrows {
            let (cols, vals) = self.row(u);
            row.clear();
            row.extend(cols.iter().copied().zip(vals.iter().copied()));
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in &row {
                col_idx.push(c);
                values.push(v);
            }
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx,
            values,
        }
    }

    /// Row-major `m*n` view with `None` for absent entries (explicit zeros kept).
    pub fn to_dense(&self) -> Vec<Option<T>> {
        let mut out = vec![None; self.nrows * self.ncols];
        for (u, v, a) in self.to_coo() {
            out[u * self.ncols + v] = Some(a);
        }
        out
    }

    /// Converts element and index types, keeping structure and storage order.
    pub fn cast<U: Scalar, J: ColIndex>(&self) -> CsrMatrix<U, J> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self
                .col_idx
                .iter()
                .map(|c| J::from_usize(c.to_usize()).expect("column index overflow"))
                .collect(),
            values: self
                .values
                .iter()
                .map(|&v| U::from_f64(v.to_f64()))
                .collect(),
        }
    }

    /// First `rows` rows as a standalone matrix with the same column space.
    pub fn head_rows(&self, rows: usize) -> Self {
        let rows = rows.min(self.nrows);
        let end = self.row_ptr[rows];
        Self {
            nrows: rows,
            ncols: self.ncols,
            row_ptr: self.row_ptr[..=rows].to_vec(),
            col_idx: self.col_idx[..end].to_vec(),
            values: self.values[..end].to_vec(),
        }
    }
}
