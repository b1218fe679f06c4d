//! Analytical cost model: FLOPs, memory footprint, an arithmetic-intensity
//! lower bound and a roofline report.
//!
//! The intensity bound assumes every neighbor access to `Y` misses cache, so
//! real kernels with reuse do better; it is a lower bound, not a prediction.

use crate::csr::GraphStats;
use crate::error::ConfigError;

/// Byte widths used by the memory model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ByteWidths {
    pub value: u64,
    pub index: u64,
}

impl ByteWidths {
    /// 4-byte values with 8-byte indices.
    pub const MODEL: ByteWidths = ByteWidths { value: 4, index: 8 };
}

impl Default for ByteWidths {
    fn default() -> Self {
        Self::MODEL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryEstimate {
    /// X, Z (m*d each), Y (n*d) and A (value + index per nonzero).
    pub fused_bytes: u64,
    /// Extra storage for an nnz x d message tensor in an unfused pipeline.
    pub unfused_extra_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfEstimate {
    pub flops: u64,
    /// Traffic under the no-locality assumption.
    pub bytes_moved: u64,
    pub ai_lower_bound: f64,
    pub mem_fused_bytes: u64,
    pub mem_unfused_extra_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RooflineReport {
    pub ai_lower_bound: f64,
    pub achieved_gflops: f64,
    pub attainable_gflops: f64,
    pub efficiency: f64,
}

/// `(3/d + 2/avg_degree + 1)^-1`.
pub fn arithmetic_intensity(avg_degree: f64, d: usize) -> Result<f64, ConfigError> {
    if avg_degree.is_nan() || avg_degree <= 0.0 || avg_degree.is_infinite() {
        return Err(ConfigError::Invalid(format!(
            "average degree must be positive, got {avg_degree}"
        )));
    }
    if d == 0 {
        return Err(ConfigError::Invalid("dimension must be at least 1".into()));
    }
    Ok(1.0 / (3.0 / d as f64 + 2.0 / avg_degree + 1.0))
}

/// `4 * d * nnz`: 2d for generating a scalar message, 2d for scaling and
/// accumulating it.
pub fn flop_count(nnz: u64, d: u64) -> u64 {
    4 * d * nnz
}

pub fn memory_estimate(m: u64, n: u64, d: u64, nnz: u64) -> MemoryEstimate {
    memory_estimate_with(m, n, d, nnz, ByteWidths::MODEL)
}

/// Same formulas with explicit element and index widths.
pub fn memory_estimate_with(m: u64, n: u64, d: u64, nnz: u64, w: ByteWidths) -> MemoryEstimate {
    let per_nnz = w.value + w.index;
    MemoryEstimate {
        fused_bytes: 2 * w.value * m * d + w.value * n * d + per_nnz * nnz,
        unfused_extra_bytes: per_nnz * nnz * d,
    }
}

/// Model traffic: `12*nnz + 8*m*d + 4*d*nnz` bytes.
pub fn bytes_moved(m: u64, d: u64, nnz: u64) -> u64 {
    12 * nnz + 8 * m * d + 4 * d * nnz
}

impl PerfEstimate {
    pub fn new(m: u64, n: u64, d: u64, nnz: u64) -> Result<Self, ConfigError> {
        if m == 0 || nnz == 0 {
            return Err(ConfigError::Invalid(
                "estimate needs at least one row and one nonzero".into(),
            ));
        }
        let mem = memory_estimate(m, n, d, nnz);
        Ok(Self {
            flops: flop_count(nnz, d),
            bytes_moved: bytes_moved(m, d, nnz),
            ai_lower_bound: arithmetic_intensity(nnz as f64 / m as f64, d as usize)?,
            mem_fused_bytes: mem.fused_bytes,
            mem_unfused_extra_bytes: mem.unfused_extra_bytes,
        })
    }

    pub fn from_stats(stats: &GraphStats, d: usize) -> Result<Self, ConfigError> {
        Self::new(
            stats.nrows as u64,
            stats.ncols as u64,
            d as u64,
            stats.nnz as u64,
        )
    }

    /// `ai_lower_bound * bandwidth`, in GFLOP/s for a bandwidth in GB/s.
    pub fn attainable_gflops(&self, bandwidth_gbps: f64, peak_gflops: Option<f64>) -> f64 {
        let bw_bound = self.ai_lower_bound * bandwidth_gbps;
        peak_gflops.map_or(bw_bound, |p| p.min(bw_bound))
    }
}

/// Compares a measured run against the memory-bandwidth roof.
pub fn roofline(
    estimate: &PerfEstimate,
    measured_seconds: f64,
    bandwidth_gbps: f64,
    peak_gflops: Option<f64>,
) -> Result<RooflineReport, ConfigError> {
    if measured_seconds.is_nan() || measured_seconds <= 0.0 {
        return Err(ConfigError::Invalid(format!(
            "measured time must be positive, got {measured_seconds}"
        )));
    }
    let achieved = estimate.flops as f64 / measured_seconds / 1e9;
    let attainable = estimate.attainable_gflops(bandwidth_gbps, peak_gflops);
    Ok(RooflineReport {
        ai_lower_bound: estimate.ai_lower_bound,
        achieved_gflops: achieved,
        attainable_gflops: attainable,
        efficiency: achieved / attainable,
    })
}
