//! Fused sampled dense-dense and sparse-dense matrix multiplication over CSR
//! graphs, with a staged reference pipeline, roofline helpers and a
//! benchmark harness.

pub mod alloc;
pub mod apps;
pub mod bench;
pub mod csr;
pub mod dense;
pub mod error;
pub mod io;
pub mod kernel;
pub mod ops;
pub mod perf;
pub mod reference;
pub mod scalar;

pub use apps::{AppConfig, AppKind, AppParams, LinearMessage};
pub use csr::{CsrMatrix, GraphStats};
pub use dense::DenseMatrix;
pub use error::{ConfigError, KernelError, MatrixError, ReferenceError};
pub use kernel::{
    fused_mm, fused_mm_generic, fused_mm_specialized, fused_mm_with, part1d, KernelConfig,
    KernelPath, LaneWidth, PartitionPlan,
};
pub use ops::{Aop, KnownPattern, Message, Mop, OpSpec, Rop, Sop, StandardOp, Vop};
pub use perf::{arithmetic_intensity, PerfEstimate};
pub use reference::{dense_oracle, sddmm, spmm, unfused, SparseMessages};
pub use scalar::{ColIndex, Scalar};
