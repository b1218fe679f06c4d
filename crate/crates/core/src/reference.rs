//! Unfused SDDMM followed by SpMM, with every edge message materialized.
//!
//! This path deliberately pays the memory cost a separate-kernel pipeline
//! pays: stage outputs are stored per edge. A VOP result feeding a reduction
//! is materialized as an `nnz x d` edge tensor before it is reduced, except
//! for MUL followed by RSUM, which runs as a direct edge-wise dot product.

use crate::csr::CsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::ReferenceError;
use crate::kernel::check_dims;
use crate::ops::{Aop, Message, Mop, OpSpec, Rop, Sop, Vop};
use crate::scalar::{ColIndex, Scalar};

/// Bytes per materialized element under the 4-byte value / 8-byte index
/// storage convention used by [`crate::perf::memory_estimate`].
pub const MODEL_BYTES_PER_ELEMENT: usize = 12;

/// Edge message storage: one scalar or one `d`-vector per stored edge.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload<T> {
    Scalar(Vec<T>),
    Vector(Vec<T>),
}

impl<T> Payload<T> {
    pub fn len(&self) -> usize {
        match self {
            Payload::Scalar(v) | Payload::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn shape(&self) -> &'static str {
        match self {
            Payload::Scalar(_) => "scalar",
            Payload::Vector(_) => "vector",
        }
    }
}

/// Materialized messages `H`, sharing the sparsity pattern (and edge values)
/// of the matrix they were generated from.
#[derive(Debug, Clone)]
pub struct SparseMessages<'a, T, I = u64> {
    source: &'a CsrMatrix<T, I>,
    dim: usize,
    payload: Payload<T>,
    peak_edge_scalars: usize,
}

impl<'a, T: Scalar, I: ColIndex> SparseMessages<'a, T, I> {
    /// Sparsity pattern and edge values.
    pub fn pattern(&self) -> &'a CsrMatrix<T, I> {
        self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn payload(&self) -> &Payload<T> {
        &self.payload
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self.payload, Payload::Scalar(_))
    }

    /// Message on stored edge `e`.
    #[inline]
    pub fn message(&self, e: usize) -> Message<'_, T> {
        match &self.payload {
            Payload::Scalar(h) => Message::Scalar(h[e]),
            Payload::Vector(h) => Message::Vector(&h[e * self.dim..(e + 1) * self.dim]),
        }
    }

    /// Largest per-edge buffer (in scalars) alive while `H` was built.
    pub fn peak_edge_scalars(&self) -> usize {
        self.peak_edge_scalars
    }

    /// Peak materialization in bytes of the element type.
    pub fn materialized_bytes(&self) -> usize {
        self.peak_edge_scalars * T::BYTES
    }

    /// Peak materialization under the fixed 12-bytes-per-element convention.
    pub fn materialized_bytes_model(&self) -> usize {
        self.peak_edge_scalars * MODEL_BYTES_PER_ELEMENT
    }
}

/// Generates `h_uv = SOP(ROP(VOP(x_u, y_v)))` on every stored edge.
pub fn sddmm<'a, T: Scalar, I: ColIndex>(
    a: &'a CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
) -> Result<SparseMessages<'a, T, I>, ReferenceError> {
    sddmm_with_limit(a, x, y, spec, None)
}

/// As [`sddmm`], failing with [`ReferenceError::Allocation`] when an edge
/// buffer would exceed `limit_bytes` or cannot be allocated.
pub fn sddmm_with_limit<'a, T: Scalar, I: ColIndex>(
    a: &'a CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
    limit_bytes: Option<usize>,
) -> Result<SparseMessages<'a, T, I>, ReferenceError> {
    check_dims(a, Some(x), y)?;
    let d = y.dim();
    let nnz = a.nnz();

    if matches!((&spec.vop, &spec.rop), (Vop::Mul, Rop::Rsum)) {
        let mut h = alloc_edges::<T>(nnz, limit_bytes)?;
        for u in 0..a.nrows() {
            let x_u = x.row(u);
            for &v in a.row(u).0 {
                let y_v = y.row(v.to_usize());
                let mut s = T::zero();
                for (&xi, &yi) in x_u.iter().zip(y_v) {
                    s = s + xi * yi;
                }
                h.push(s);
            }
        }
        scale_scalars(&mut h, a.values(), &spec.sop);
        return Ok(SparseMessages {
            source: a,
            dim: d,
            payload: Payload::Scalar(h),
            peak_edge_scalars: nnz,
        });
    }

    // Stage 1: VOP edge tensor.
    let mut edges = alloc_edges::<T>(nnz * d, limit_bytes)?;
    edges.resize(nnz * d, T::zero());
    let mut e = 0;
    for u in 0..a.nrows() {
        let x_u = x.row(u);
        for &v in a.row(u).0 {
            spec.vop
                .apply(x_u, y.row(v.to_usize()), &mut edges[e * d..(e + 1) * d]);
            e += 1;
        }
    }
    let peak = nnz * d;

    if spec.rop.is_noop() {
        // Stage 3 on vectors, in place.
        for (msg, &a_uv) in edges.chunks_exact_mut(d.max(1)).zip(a.values()) {
            spec.sop.apply(msg, a_uv);
        }
        return Ok(SparseMessages {
            source: a,
            dim: d,
            payload: Payload::Vector(edges),
            peak_edge_scalars: peak,
        });
    }

    // Stage 2: reduce each edge vector; scalar e overwrites slot e (e <= e*d).
    for e in 0..nnz {
        let s = spec
            .rop
            .apply(&edges[e * d..(e + 1) * d])
            .expect("ROP is active");
        edges[e] = s;
    }
    edges.truncate(nnz);
    edges.shrink_to_fit();
    scale_scalars(&mut edges, a.values(), &spec.sop);
    Ok(SparseMessages {
        source: a,
        dim: d,
        payload: Payload::Scalar(edges),
        peak_edge_scalars: peak.max(nnz),
    })
}

fn alloc_edges<T: Scalar>(
    len: usize,
    limit_bytes: Option<usize>,
) -> Result<Vec<T>, ReferenceError> {
    let bytes = len.saturating_mul(T::BYTES);
    if limit_bytes.is_some_and(|limit| bytes > limit) {
        return Err(ReferenceError::Allocation { bytes });
    }
    let mut v = Vec::new();
    v.try_reserve_exact(len)
        .map_err(|_| ReferenceError::Allocation { bytes })?;
    Ok(v)
}

fn scale_scalars<T: Scalar>(h: &mut [T], edge_values: &[T], sop: &Sop<T>) {
    if matches!(sop, Sop::Noop) {
        return;
    }
    for (s, &a_uv) in h.iter_mut().zip(edge_values) {
        *s = sop.apply_scalar(*s, a_uv);
    }
}

/// Aggregates materialized messages: `z_u = AOP over edges of MOP(h_uv, y_v, a_uv)`.
pub fn spmm<T: Scalar, I: ColIndex>(
    h: &SparseMessages<'_, T, I>,
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
) -> Result<DenseMatrix<T>, ReferenceError> {
    let expected = if spec.message_is_scalar() {
        "scalar"
    } else {
        "vector"
    };
    if h.payload.shape() != expected {
        return Err(ReferenceError::ShapeTag {
            expected,
            found: h.payload.shape(),
        });
    }
    let a = h.source;
    check_dims(a, None, y)?;
    if y.dim() != h.dim {
        return Err(crate::error::KernelError::Dimension(format!(
            "messages have dimension {} but Y has dimension {}",
            h.dim,
            y.dim()
        ))
        .into());
    }
    let d = y.dim();
    let mut z = DenseMatrix::filled(a.nrows(), d, spec.aop.identity());
    let mut w = vec![T::zero(); d];
    let out = z.data_mut();
    for u in 0..a.nrows() {
        let z_u = &mut out[u * d..(u + 1) * d];
        for e in a.row_ptr()[u]..a.row_ptr()[u + 1] {
            let v = a.col_idx()[e].to_usize();
            spec.mop
                .apply(h.message(e), y.row(v), a.values()[e], &mut w);
            spec.aop.apply(z_u, &w);
        }
    }
    Ok(z)
}

/// `spmm(sddmm(A, X, Y))`.
pub fn unfused<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
) -> Result<DenseMatrix<T>, ReferenceError> {
    let h = sddmm(a, x, y, spec)?;
    spmm(&h, y, spec)
}

/// Largest `m * n` the dense oracle accepts.
pub const ORACLE_MAX_ENTRIES: usize = 4096;

/// Ground truth by a direct loop over the dense expansion of `A`: rows `u`,
/// columns `v` in ascending order, dimensions in index order, all in `f64`.
///
/// Standard operations are evaluated here independently of [`crate::ops`].
/// Matches a CSR kernel exactly when rows are stored in ascending column
/// order.
#[allow(clippy::needless_range_loop)]
pub fn dense_oracle<I: ColIndex>(
    a: &CsrMatrix<f64, I>,
    x: &DenseMatrix<f64>,
    y: &DenseMatrix<f64>,
    spec: &OpSpec<f64>,
) -> Result<DenseMatrix<f64>, ReferenceError> {
    let (m, n) = (a.nrows(), a.ncols());
    if m * n > ORACLE_MAX_ENTRIES {
        return Err(ReferenceError::OracleTooLarge {
            m,
            n,
            limit: ORACLE_MAX_ENTRIES,
        });
    }
    check_dims(a, Some(x), y)?;
    let d = y.dim();
    let dense = a.to_dense();
    let identity = match &spec.aop {
        Aop::Asum => 0.0,
        Aop::Amax => f64::NEG_INFINITY,
        Aop::User { identity, .. } => *identity,
    };
    let mut out = vec![identity; m * d];
    let mut t = vec![0.0; d];
    let mut w = vec![0.0; d];
    for u in 0..m {
        for v in 0..n {
            let Some(a_uv) = dense[u * n + v] else {
                continue;
            };
            for k in 0..d {
                let (xk, yk) = (x.row(u)[k], y.row(v)[k]);
                t[k] = match &spec.vop {
                    Vop::Add => xk + yk,
                    Vop::Mul => xk * yk,
                    Vop::Sub => xk - yk,
                    Vop::Sel2nd => yk,
                    Vop::User(_) => 0.0,
                };
            }
            if let Vop::User(f) = &spec.vop {
                f(x.row(u), y.row(v), &mut t);
            }
            let reduced = match &spec.rop {
                Rop::Noop => None,
                Rop::Rsum => {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += t[k];
                    }
                    Some(s)
                }
                Rop::Rmul => {
                    let mut s = 1.0;
                    for k in 0..d {
                        s *= t[k];
                    }
                    Some(s)
                }
                Rop::Norm => {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += t[k] * t[k];
                    }
                    Some(s.sqrt())
                }
                Rop::User(f) => Some(f(&t)),
            };
            let scale = |s: f64| -> f64 {
                match &spec.sop {
                    Sop::Noop => s,
                    Sop::Sigmoid => 1.0 / (1.0 + (-s).exp()),
                    Sop::Scal(alpha) => alpha * s,
                    Sop::User(f) => {
                        let mut one = [s];
                        f(&mut one, a_uv);
                        one[0]
                    }
                }
            };
            let h = match reduced {
                Some(s) => Message::Scalar(scale(s)),
                None => {
                    match &spec.sop {
                        Sop::User(f) => f(&mut t, a_uv),
                        _ => t.iter_mut().for_each(|v| *v = scale(*v)),
                    }
                    Message::Vector(&t[..])
                }
            };
            match (&spec.mop, h) {
                (Mop::Mul, Message::Scalar(h)) => {
                    for k in 0..d {
                        w[k] = h * y.row(v)[k];
                    }
                }
                (Mop::Mul, Message::Vector(h)) => {
                    for k in 0..d {
                        w[k] = a_uv * h[k];
                    }
                }
                (Mop::Sel2nd, _) => w.copy_from_slice(y.row(v)),
                (Mop::User(f), h) => f(h, y.row(v), a_uv, &mut w),
            }
            let z_u = &mut out[u * d..(u + 1) * d];
            match &spec.aop {
                Aop::Asum => {
                    for k in 0..d {
                        z_u[k] += w[k];
                    }
                }
                Aop::Amax => {
                    for k in 0..d {
                        z_u[k] = z_u[k].max(w[k]);
                    }
                }
                Aop::User { f, .. } => f(z_u, &w),
            }
        }
    }
    Ok(DenseMatrix::from_raw(m, d, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::StandardOp::{self, *};

    fn spec(ops: [StandardOp; 5]) -> OpSpec<f64> {
        OpSpec::from_standard(ops).unwrap()
    }

    fn m(rows: &[Vec<f64>]) -> DenseMatrix<f64> {
        DenseMatrix::from_rows(rows).unwrap()
    }

    fn two_cycle() -> CsrMatrix<f64> {
        CsrMatrix::from_coo(&[(0, 1, 1.0), (1, 0, 1.0)], 2, 2).unwrap()
    }

    #[test]
    fn scalar_messages_two_cycle() {
        let a = two_cycle();
        let x = m(&[vec![0.0], vec![0.0]]);
        let y = m(&[vec![1.0], vec![2.0]]);
        let s = spec([Mul, Rsum, Sigmoid, Mul, Asum]);
        let h = sddmm(&a, &x, &y, &s).unwrap();
        assert_eq!(h.payload(), &Payload::Scalar(vec![0.5, 0.5]));
        assert_eq!(h.pattern().row_ptr(), a.row_ptr());
        let z = spmm(&h, &y, &s).unwrap();
        assert_eq!(z.to_rows(), vec![vec![1.0], vec![0.5]]);
        assert_eq!(dense_oracle(&a, &x, &y, &s).unwrap(), z);
    }

    #[test]
    fn vector_messages_copy_neighbors() {
        let a: CsrMatrix<f64> =
            CsrMatrix::from_coo(&[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)], 2, 2).unwrap();
        let y = m(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        let x = DenseMatrix::zeros(2, 2);
        let s = spec([Sel2nd, Noop, Noop, Mul, Asum]);
        let h = sddmm(&a, &x, &y, &s).unwrap();
        assert_eq!(
            h.payload(),
            &Payload::Vector(vec![1.0, 1.0, 2.0, 2.0, 2.0, 2.0])
        );
        assert_eq!(h.payload().len(), a.nnz() * 2);
        let z = spmm(&h, &y, &s).unwrap();
        assert_eq!(z.to_rows(), vec![vec![5.0, 5.0], vec![6.0, 6.0]]);
        assert_eq!(dense_oracle(&a, &x, &y, &s).unwrap(), z);
    }

    #[test]
    fn dot_product_message() {
        let a: CsrMatrix<f64> = CsrMatrix::from_coo(&[(0, 0, 1.0)], 1, 1).unwrap();
        let x = m(&[vec![1.0, 2.0]]);
        let y = m(&[vec![3.0, 4.0]]);
        let h = sddmm(&a, &x, &y, &spec([Mul, Rsum, Noop, Mul, Asum])).unwrap();
        assert_eq!(h.payload(), &Payload::Scalar(vec![11.0]));
        assert_eq!(h.peak_edge_scalars(), 1);
    }

    #[test]
    fn staged_reduction_materializes_edge_tensor() {
        let a = two_cycle();
        let x = m(&[vec![3.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]);
        let y = m(&[vec![0.0, 4.0, 0.0], vec![0.0, 4.0, 0.0]]);
        let h = sddmm(&a, &x, &y, &spec([Add, Norm, Scal(1.0), Mul, Asum])).unwrap();
        assert_eq!(h.payload(), &Payload::Scalar(vec![5.0, 4.0]));
        assert_eq!(h.peak_edge_scalars(), 2 * 3);
        assert_eq!(h.materialized_bytes(), 6 * 8);
        assert_eq!(h.materialized_bytes_model(), 6 * 12);
    }

    #[test]
    fn empty_messages() {
        let a = CsrMatrix::<f64>::from_coo(&[], 2, 2).unwrap();
        let x = DenseMatrix::zeros(2, 3);
        let s = spec([Mul, Rsum, Sigmoid, Mul, Amax]);
        let h = sddmm(&a, &x, &x, &s).unwrap();
        assert!(h.payload().is_empty());
        let z = spmm(&h, &x, &s).unwrap();
        assert!(z.data().iter().all(|v| *v == f64::NEG_INFINITY));
    }

    #[test]
    fn shape_tag_mismatch() {
        let a = two_cycle();
        let x = m(&[vec![1.0], vec![1.0]]);
        let h = sddmm(&a, &x, &x, &spec([Mul, Rsum, Sigmoid, Mul, Asum])).unwrap();
        let err = spmm(&h, &x, &spec([Sel2nd, Noop, Noop, Mul, Asum])).unwrap_err();
        assert!(matches!(err, ReferenceError::ShapeTag { .. }));
    }

    #[test]
    fn allocation_limit() {
        let a = two_cycle();
        let x = DenseMatrix::zeros(2, 4);
        let s = spec([Add, Norm, Scal(1.0), Mul, Asum]);
        let err = sddmm_with_limit(&a, &x, &x, &s, Some(16)).unwrap_err();
        assert_eq!(err, ReferenceError::Allocation { bytes: 64 });
        assert!(sddmm_with_limit(&a, &x, &x, &s, Some(64)).is_ok());
    }

    #[test]
    fn oracle_refuses_large_inputs() {
        let a = CsrMatrix::<f64>::from_coo(&[], 65, 64).unwrap();
        let x = DenseMatrix::zeros(65, 1);
        let y = DenseMatrix::zeros(64, 1);
        let err = dense_oracle(&a, &x, &y, &spec([Mul, Rsum, Sigmoid, Mul, Asum])).unwrap_err();
        assert!(matches!(err, ReferenceError::OracleTooLarge { .. }));
    }
}
