//! Fused SDDMM + SpMM.
//!
//! Rows of `A`, `X` and `Z` are split into contiguous parts by [`part1d`];
//! each worker owns one part of `Z` and only reads `Y`. Within a row the
//! stored neighbors are visited in storage order, so the output does not
//! depend on the worker count.

mod blocked;
mod partition;
pub mod tune;

use std::ops::Range;

pub use blocked::{LaneWidth, BLOCKED_DIMS};
pub use partition::{part1d, PartitionPlan};

use crate::csr::CsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::KernelError;
use crate::ops::{pattern_of, KnownPattern, Message, OpSpec};
use crate::scalar::{ColIndex, Scalar};

/// Which inner loop [`fused_mm_with`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelPath {
    /// Blocked kernel for known patterns, generic loop otherwise.
    #[default]
    Auto,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelConfig {
    pub threads: usize,
    pub lane_width: LaneWidth,
    pub path: KernelPath,
}

impl KernelConfig {
    pub fn with_threads(threads: usize) -> Self {
        Self {
            threads,
            ..Self::default()
        }
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            threads: 1,
            lane_width: LaneWidth::default(),
            path: KernelPath::Auto,
        }
    }
}

/// `Z[u,:] = AOP over v in N(u) of MOP(SOP(ROP(VOP(x_u, y_v))), y_v, a_uv)`,
/// computed with `t` workers and no per-edge message storage.
pub fn fused_mm<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
    t: usize,
) -> Result<DenseMatrix<T>, KernelError> {
    fused_mm_with(a, x, y, spec, &KernelConfig::with_threads(t))
}

pub fn fused_mm_with<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
    cfg: &KernelConfig,
) -> Result<DenseMatrix<T>, KernelError> {
    check_dims(a, Some(x), y)?;
    let plan = part1d(a, cfg.threads)?;
    match (cfg.path, pattern_of(spec)) {
        (KernelPath::Auto, p) if p != KnownPattern::Generic => {
            Ok(blocked::run(p, spec, a, Some(x), y, &plan, cfg.lane_width))
        }
        _ => Ok(run_generic(a, Some(x), y, spec, &plan)),
    }
}

/// Generic five-slot loop regardless of pattern.
pub fn fused_mm_generic<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
    t: usize,
) -> Result<DenseMatrix<T>, KernelError> {
    let cfg = KernelConfig {
        threads: t,
        path: KernelPath::Generic,
        ..KernelConfig::default()
    };
    fused_mm_with(a, x, y, spec, &cfg)
}

/// Blocked kernel for a known pattern; errors if `spec` is generic.
pub fn fused_mm_specialized<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
    t: usize,
    lanes: LaneWidth,
) -> Result<DenseMatrix<T>, KernelError> {
    let pattern = pattern_of(spec);
    if pattern == KnownPattern::Generic {
        return Err(KernelError::NotSpecialized(pattern));
    }
    check_dims(a, Some(x), y)?;
    let plan = part1d(a, t)?;
    Ok(blocked::run(pattern, spec, a, Some(x), y, &plan, lanes))
}

/// `Z = A * Y` through the SEL2ND/MUL/ASUM kernel, without an `X` operand.
pub(crate) fn spmm_without_x<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
    t: usize,
) -> Result<DenseMatrix<T>, KernelError> {
    debug_assert_eq!(pattern_of(spec), KnownPattern::SpmmGcn);
    check_dims(a, None, y)?;
    let plan = part1d(a, t)?;
    Ok(blocked::run(
        KnownPattern::SpmmGcn,
        spec,
        a,
        None,
        y,
        &plan,
        LaneWidth::default(),
    ))
}

pub(crate) fn check_dims<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    x: Option<&DenseMatrix<T>>,
    y: &DenseMatrix<T>,
) -> Result<(), KernelError> {
    if y.nrows() < a.ncols() {
        return Err(KernelError::Dimension(format!(
            "Y has {} rows but A has {} columns",
            y.nrows(),
            a.ncols()
        )));
    }
    if let Some(x) = x {
        if x.nrows() != a.nrows() {
            return Err(KernelError::Dimension(format!(
                "X has {} rows but A has {} rows",
                x.nrows(),
                a.nrows()
            )));
        }
        if x.dim() != y.dim() {
            return Err(KernelError::Dimension(format!(
                "X has dimension {} but Y has dimension {}",
                x.dim(),
                y.dim()
            )));
        }
    }
    Ok(())
}

/// Message generation and aggregation for one vertex.
///
/// `cols`/`vals` are the stored neighbors of `u` in storage order.
pub fn update_u<T: Scalar, I: ColIndex>(
    cols: &[I],
    vals: &[T],
    x_u: &[T],
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
) -> Vec<T> {
    assert_eq!(x_u.len(), y.dim(), "x_u length differs from Y dimension");
    let mut z = vec![spec.aop.identity(); y.dim()];
    let mut scratch = Scratch::new(y.dim());
    update_row(cols, vals, x_u, y, spec, &mut z, &mut scratch);
    z
}

struct Scratch<T> {
    t: Vec<T>,
    w: Vec<T>,
}

impl<T: Scalar> Scratch<T> {
    fn new(d: usize) -> Self {
        Self {
            t: vec![T::zero(); d],
            w: vec![T::zero(); d],
        }
    }
}

#[inline]
fn update_row<T: Scalar, I: ColIndex>(
    cols: &[I],
    vals: &[T],
    x_u: &[T],
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
    z_u: &mut [T],
    s: &mut Scratch<T>,
) {
    for (&v, &a_uv) in cols.iter().zip(vals) {
        let y_v = y.row(v.to_usize());
        spec.vop.apply(x_u, y_v, &mut s.t);
        match spec.rop.apply(&s.t) {
            Some(r) => {
                let h = spec.sop.apply_scalar(r, a_uv);
                spec.mop.apply(Message::Scalar(h), y_v, a_uv, &mut s.w);
            }
            None => {
                spec.sop.apply(&mut s.t, a_uv);
                spec.mop.apply(Message::Vector(&s.t), y_v, a_uv, &mut s.w);
            }
        }
        spec.aop.apply(z_u, &s.w);
    }
}

fn run_generic<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    x: Option<&DenseMatrix<T>>,
    y: &DenseMatrix<T>,
    spec: &OpSpec<T>,
    plan: &PartitionPlan,
) -> DenseMatrix<T> {
    let d = y.dim();
    let mut z = DenseMatrix::filled(a.nrows(), d, spec.aop.identity());
    for_each_part(plan, z.data_mut(), d, |rows, z_part| {
        let mut scratch = Scratch::new(d);
        let zeros = if x.is_none() {
            vec![T::zero(); d]
        } else {
            Vec::new()
        };
        let r0 = rows.start;
        for u in rows {
            let (cols, vals) = a.row(u);
            let x_u = x.map_or(&zeros[..], |x| x.row(u));
            let z_u = &mut z_part[(u - r0) * d..(u - r0 + 1) * d];
            update_row(cols, vals, x_u, y, spec, z_u, &mut scratch);
        }
    });
    z
}

/// Runs `work(rows, z_rows)` for every part, each on its own worker. The first
/// part runs on the calling thread; empty parts are skipped.
pub(crate) fn for_each_part<T, F>(plan: &PartitionPlan, z: &mut [T], d: usize, work: F)
where
    T: Send,
    F: Fn(Range<usize>, &mut [T]) + Sync,
{
    let mut chunks = Vec::with_capacity(plan.parts());
    let mut rest = z;
    for rows in plan.iter() {
        let (head, tail) = rest.split_at_mut(rows.len() * d);
        chunks.push((rows, head));
        rest = tail;
    }
    let mut chunks = chunks.into_iter().filter(|(rows, _)| !rows.is_empty());
    let Some((first_rows, first_z)) = chunks.next() else {
        return;
    };
    let work = &work;
    std::thread::scope(|s| {
        for (rows, part) in chunks {
            s.spawn(move || work(rows, part));
        }
        work(first_rows, first_z);
    });
}
