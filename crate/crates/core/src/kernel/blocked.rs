//! Register-blocked kernels for the three known patterns.
//!
//! For each row, the first `min(d, BLOCKED_DIMS)` entries of `x_u` and of the
//! `z_u` accumulator live in fixed-size stack blocks of `L` lanes for the
//! whole neighbor loop; `z_u` is written back once. Dimensions past
//! `BLOCKED_DIMS` are accumulated directly in the output row.
//!
//! Per-edge reductions run in index order and accumulation runs in neighbor
//! storage order, so results match the generic loop exactly. Dot products of
//! `NEIGHBOR_GROUP` neighbors are interleaved to keep independent chains in
//! flight.

use std::ops::Range;

use super::{for_each_part, PartitionPlan};
use crate::csr::CsrMatrix;
use crate::dense::DenseMatrix;
use crate::ops::{sigmoid, KnownPattern, OpSpec, Sop};
use crate::scalar::{ColIndex, Scalar};

/// Dimensions held in stack blocks per row; the rest are streamed.
pub const BLOCKED_DIMS: usize = 256;
const NEIGHBOR_GROUP: usize = 4;
/// Edges ahead of the current one whose `Y` rows are prefetched.
const PREFETCH_AHEAD: usize = 8;

/// Compile-time lane count of the blocked loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LaneWidth {
    W4,
    #[default]
    W8,
    W16,
}

impl LaneWidth {
    pub const ALL: [LaneWidth; 3] = [LaneWidth::W4, LaneWidth::W8, LaneWidth::W16];

    pub fn lanes(self) -> usize {
        match self {
            LaneWidth::W4 => 4,
            LaneWidth::W8 => 8,
            LaneWidth::W16 => 16,
        }
    }

    pub fn from_lanes(lanes: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.lanes() == lanes)
    }
}

pub(super) fn run<T: Scalar, I: ColIndex>(
    pattern: KnownPattern,
    spec: &OpSpec<T>,
    a: &CsrMatrix<T, I>,
    x: Option<&DenseMatrix<T>>,
    y: &DenseMatrix<T>,
    plan: &PartitionPlan,
    lanes: LaneWidth,
) -> DenseMatrix<T> {
    match lanes {
        LaneWidth::W4 => run_lanes::<T, I, 4>(pattern, spec, a, x, y, plan),
        LaneWidth::W8 => run_lanes::<T, I, 8>(pattern, spec, a, x, y, plan),
        LaneWidth::W16 => run_lanes::<T, I, 16>(pattern, spec, a, x, y, plan),
    }
}

fn run_lanes<T: Scalar, I: ColIndex, const L: usize>(
    pattern: KnownPattern,
    spec: &OpSpec<T>,
    a: &CsrMatrix<T, I>,
    x: Option<&DenseMatrix<T>>,
    y: &DenseMatrix<T>,
    plan: &PartitionPlan,
) -> DenseMatrix<T> {
    let d = y.dim();
    // All three patterns accumulate with ASUM.
    let mut z = DenseMatrix::filled(a.nrows(), d, T::zero());
    match pattern {
        KnownPattern::SigmoidEmbed => {
            let x = x.expect("SIGMOID_EMBED reads X");
            for_each_part(plan, z.data_mut(), d, |rows, zp| {
                scalar_message_rows::<T, I, L, _>(a, x, y, rows, zp, SigmoidDot)
            });
        }
        KnownPattern::FrLayout => {
            let x = x.expect("FR_LAYOUT reads X");
            let Sop::Scal(alpha) = spec.sop else {
                unreachable!("FR_LAYOUT has SCAL in SOP")
            };
            for_each_part(plan, z.data_mut(), d, |rows, zp| {
                scalar_message_rows::<T, I, L, _>(a, x, y, rows, zp, ScaledNorm(alpha))
            });
        }
        KnownPattern::SpmmGcn => {
            for_each_part(plan, z.data_mut(), d, |rows, zp| {
                weighted_sum_rows::<T, I, L>(a, y, rows, zp)
            });
        }
        KnownPattern::Generic => unreachable!("generic specs never reach the blocked path"),
    }
    z
}

/// Scalar-message rule: `h = finish(sum_i term(x_i, y_i))`, then `z += h * y`.
trait ScalarRule<T>: Copy {
    fn term(x: T, y: T) -> T;
    fn finish(self, s: T) -> T;
}

/// MUL, RSUM, SIGMOID.
#[derive(Clone, Copy)]
struct SigmoidDot;

impl<T: Scalar> ScalarRule<T> for SigmoidDot {
    #[inline(always)]
    fn term(x: T, y: T) -> T {
        x * y
    }

    #[inline(always)]
    fn finish(self, s: T) -> T {
        sigmoid(s)
    }
}

/// ADD, NORM, SCAL(alpha).
#[derive(Clone, Copy)]
struct ScaledNorm<T>(T);

impl<T: Scalar> ScalarRule<T> for ScaledNorm<T> {
    #[inline(always)]
    fn term(x: T, y: T) -> T {
        let t = x + y;
        t * t
    }

    #[inline(always)]
    fn finish(self, s: T) -> T {
        self.0 * s.sqrt()
    }
}

#[inline(always)]
fn prefetch_row<T>(row: &[T]) {
    #[cfg(target_arch = "x86_64")]
    {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        let p = row.as_ptr().cast::<i8>();
        let bytes = std::mem::size_of_val(row);
        for off in (0..bytes).step_by(64) {
            // SAFETY: `off` stays inside `row`; prefetch never faults.
            #[allow(unused_unsafe)]
            unsafe {
                _mm_prefetch(p.add(off), _MM_HINT_T0)
            };
        }
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = row;
}

/// Prefetches `Y` rows for part-local edges `[from, to)`.
#[inline(always)]
fn prefetch_edges<T: Scalar, I: ColIndex>(cols: &[I], from: usize, to: usize, y: &DenseMatrix<T>) {
    for &v in cols.get(from..to.min(cols.len())).unwrap_or(&[]) {
        prefetch_row(y.row(v.to_usize()));
    }
}

#[inline(always)]
fn axpy_blocked<T: Scalar, const L: usize>(acc: &mut [T], h: T, y: &[T]) {
    debug_assert_eq!(acc.len(), y.len());
    let mut ac = acc.chunks_exact_mut(L);
    let mut yc = y.chunks_exact(L);
    for (a, b) in (&mut ac).zip(&mut yc) {
        for l in 0..L {
            a[l] = a[l] + h * b[l];
        }
    }
    for (a, &b) in ac.into_remainder().iter_mut().zip(yc.remainder()) {
        *a = *a + h * b;
    }
}

#[inline(always)]
fn axpy_stream<T: Scalar>(z: &mut [T], h: T, y: &[T]) {
    for (a, &b) in z.iter_mut().zip(y) {
        *a = *a + h * b;
    }
}

fn scalar_message_rows<T: Scalar, I: ColIndex, const L: usize, R: ScalarRule<T>>(
    a: &CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    rows: Range<usize>,
    z_part: &mut [T],
    rule: R,
) {
    let d = y.dim();
    let kb = d.min(BLOCKED_DIMS);
    let mut xb = [T::zero(); BLOCKED_DIMS];
    let mut acc = [T::zero(); BLOCKED_DIMS];
    let r0 = rows.start;
    let e0 = a.row_ptr()[rows.start];
    let part_cols = &a.col_idx()[e0..a.row_ptr()[rows.end]];
    for u in rows {
        let x_u = x.row(u);
        xb[..kb].copy_from_slice(&x_u[..kb]);
        acc[..kb].fill(T::zero());
        let x_head = &xb[..kb];
        let x_tail = &x_u[kb..];
        let acc = &mut acc[..kb];
        let z_u = &mut z_part[(u - r0) * d..(u - r0 + 1) * d];
        let (z_head, z_tail) = z_u.split_at_mut(kb);

        let (cols, _) = a.row(u);
        let mut e = a.row_ptr()[u] - e0;
        let mut groups = cols.chunks_exact(NEIGHBOR_GROUP);
        for g in &mut groups {
            prefetch_edges(
                part_cols,
                e + PREFETCH_AHEAD,
                e + PREFETCH_AHEAD + NEIGHBOR_GROUP,
                y,
            );
            e += NEIGHBOR_GROUP;
            let ys: [&[T]; NEIGHBOR_GROUP] = std::array::from_fn(|j| y.row(g[j].to_usize()));
            let heads: [&[T]; NEIGHBOR_GROUP] = std::array::from_fn(|j| &ys[j][..kb]);
            let mut s = [T::zero(); NEIGHBOR_GROUP];
            for (i, &xi) in x_head.iter().enumerate() {
                for j in 0..NEIGHBOR_GROUP {
                    s[j] = s[j] + R::term(xi, heads[j][i]);
                }
            }
            for (i, &xi) in x_tail.iter().enumerate() {
                for j in 0..NEIGHBOR_GROUP {
                    s[j] = s[j] + R::term(xi, ys[j][kb + i]);
                }
            }
            for j in 0..NEIGHBOR_GROUP {
                let h = rule.finish(s[j]);
                let (y_head, y_tail) = ys[j].split_at(kb);
                axpy_blocked::<T, L>(acc, h, y_head);
                axpy_stream(z_tail, h, y_tail);
            }
        }
        for &v in groups.remainder() {
            prefetch_edges(part_cols, e + PREFETCH_AHEAD, e + PREFETCH_AHEAD + 1, y);
            e += 1;
            let y_v = y.row(v.to_usize());
            let (y_head, y_tail) = y_v.split_at(kb);
            let mut s = T::zero();
            for (&xi, &yi) in x_head.iter().zip(y_head) {
                s = s + R::term(xi, yi);
            }
            for (&xi, &yi) in x_tail.iter().zip(y_tail) {
                s = s + R::term(xi, yi);
            }
            let h = rule.finish(s);
            axpy_blocked::<T, L>(acc, h, y_head);
            axpy_stream(z_tail, h, y_tail);
        }
        z_head.copy_from_slice(acc);
    }
}

fn weighted_sum_rows<T: Scalar, I: ColIndex, const L: usize>(
    a: &CsrMatrix<T, I>,
    y: &DenseMatrix<T>,
    rows: Range<usize>,
    z_part: &mut [T],
) {
    let d = y.dim();
    let kb = d.min(BLOCKED_DIMS);
    let mut acc = [T::zero(); BLOCKED_DIMS];
    let r0 = rows.start;
    let e0 = a.row_ptr()[rows.start];
    let part_cols = &a.col_idx()[e0..a.row_ptr()[rows.end]];
    for u in rows {
        let acc = &mut acc[..kb];
        acc.fill(T::zero());
        let z_u = &mut z_part[(u - r0) * d..(u - r0 + 1) * d];
        let (z_head, z_tail) = z_u.split_at_mut(kb);
        let (cols, vals) = a.row(u);
        let e = a.row_ptr()[u] - e0;
        for (k, (&v, &a_uv)) in cols.iter().zip(vals).enumerate() {
            prefetch_edges(
                part_cols,
                e + k + PREFETCH_AHEAD,
                e + k + PREFETCH_AHEAD + 1,
                y,
            );
            let (y_head, y_tail) = y.row(v.to_usize()).split_at(kb);
            axpy_blocked::<T, L>(acc, a_uv, y_head);
            axpy_stream(z_tail, a_uv, y_tail);
        }
        z_head.copy_from_slice(acc);
    }
}
