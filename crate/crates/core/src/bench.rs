//! Benchmark orchestration and CSV output.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::alloc::{measure_peak, AllocProbe};
use crate::apps::{gcn_forward, make_spec, AppKind, AppParams, LinearMessage};
use crate::csr::CsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::{ConfigError, KernelError, ReferenceError};
use crate::io::RmatParams;
use crate::kernel::fused_mm;
use crate::ops::OpSpec;
use crate::perf::{arithmetic_intensity, flop_count};
use crate::reference::{sddmm_with_limit, spmm};

/// Graphs up to this many stored entries get a correctness check.
pub const VERIFY_MAX_NNZ: usize = 100_000;
/// Rough size of the subsample the check runs on.
const VERIFY_SAMPLE_NNZ: usize = 20_000;
const VERIFY_TOL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchApp {
    Embed,
    Fr,
    /// `A * Y` without an `X` operand.
    Gcn,
    /// The GCN pattern through the general entry point.
    Spmm,
    GnnMlp,
}

impl BenchApp {
    pub const ALL: [BenchApp; 5] = [Self::Embed, Self::Fr, Self::Gcn, Self::Spmm, Self::GnnMlp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Embed => "embed",
            Self::Fr => "fr",
            Self::Gcn => "gcn",
            Self::Spmm => "spmm",
            Self::GnnMlp => "gnnmlp",
        }
    }

    pub fn kind(self) -> AppKind {
        match self {
            Self::Embed => AppKind::NodeEmbedSigmoid,
            Self::Fr => AppKind::FrLayout,
            Self::Gcn | Self::Spmm => AppKind::GcnForward,
            Self::GnnMlp => AppKind::GnnMlp,
        }
    }
}

impl fmt::Display for BenchApp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchApp {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConfigError::Invalid(format!("unknown app {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    Fused,
    Reference,
    Both,
}

impl BenchMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fused => "fused",
            Self::Reference => "ref",
            Self::Both => "both",
        }
    }

    fn runs_fused(self) -> bool {
        self != Self::Reference
    }

    fn runs_reference(self) -> bool {
        self != Self::Fused
    }
}

impl FromStr for BenchMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fused" => Ok(Self::Fused),
            "ref" | "reference" => Ok(Self::Reference),
            "both" => Ok(Self::Both),
            _ => Err(ConfigError::Invalid(format!("unknown mode {s:?}"))),
        }
    }
}

/// A graph plus the metadata that goes into every record.
#[derive(Debug, Clone)]
pub struct BenchGraph {
    pub name: String,
    pub rmat: Option<RmatParams>,
    pub matrix: CsrMatrix<f32>,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub app: BenchApp,
    pub dims: Vec<usize>,
    pub threads: Vec<usize>,
    pub iterations: usize,
    pub mode: BenchMode,
    /// Seeds the dense operands and the MLP weights.
    pub seed: u64,
    pub alpha: f32,
    /// Edge-buffer cap for the reference path; exceeding it records `×`.
    pub ref_limit_bytes: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            app: BenchApp::Embed,
            dims: vec![128],
            threads: vec![1],
            iterations: 10,
            mode: BenchMode::Fused,
            seed: 1,
            alpha: 1.0,
            ref_limit_bytes: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iterations == 0 {
            return Err(ConfigError::Invalid("iterations must be at least 1".into()));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(ConfigError::Invalid(format!(
                "bad dimension list {:?}",
                self.dims
            )));
        }
        if self.threads.is_empty() || self.threads.contains(&0) {
            return Err(ConfigError::Invalid(format!(
                "bad thread list {:?}",
                self.threads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefStatus {
    #[default]
    NotRun,
    Completed,
    /// Edge buffer could not be allocated; written as `×`.
    AllocFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub graph: String,
    /// `scale,ef,a,b,c,d,seed` for generated graphs, empty otherwise.
    pub rmat: String,
    pub m: usize,
    pub n: usize,
    pub nnz: usize,
    /// `nnz / 2`, comparable with undirected edge counts.
    pub undirected_edges: usize,
    pub avg_degree: f64,
    pub max_degree: usize,
    pub d: usize,
    pub app: BenchApp,
    pub pattern: String,
    pub threads: usize,
    pub iterations: usize,
    pub mode: BenchMode,
    pub fused_seconds: Option<f64>,
    pub reference_seconds: Option<f64>,
    pub reference_status: RefStatus,
    pub speedup: Option<f64>,
    pub fused_gflops: Option<f64>,
    pub ai_lower_bound: f64,
    /// Peak heap growth during one fused call, minus the output.
    pub fused_aux_bytes: Option<usize>,
    /// Edge-buffer high-water mark in the element type.
    pub reference_h_bytes: Option<usize>,
    /// Same buffer under the 12-bytes-per-entry (value + index) convention.
    pub reference_h_bytes_model: Option<usize>,
    /// Peak heap growth during one reference SDDMM, if a probe was given.
    pub reference_h_alloc_bytes: Option<usize>,
    pub verified: Option<bool>,
}

pub const CSV_HEADER: [&str; 25] = [
    "graph",
    "rmat",
    "m",
    "n",
    "nnz",
    "undirected_edges",
    "avg_degree",
    "max_degree",
    "d",
    "app",
    "pattern",
    "threads",
    "iterations",
    "mode",
    "fused_seconds",
    "reference_seconds",
    "reference_status",
    "speedup",
    "fused_gflops",
    "ai_lower_bound",
    "fused_aux_bytes",
    "reference_h_bytes",
    "reference_h_bytes_model",
    "reference_h_alloc_bytes",
    "verified",
];

const CROSS: &str = "\u{00d7}";

impl BenchRecord {
    fn csv_row(&self) -> Vec<String> {
        fn opt<V: ToString>(v: Option<V>) -> String {
            v.map(|v| v.to_string()).unwrap_or_default()
        }
        let g = |v: Option<f64>| v.map(fmt_g6).unwrap_or_default();
        let failed = self.reference_status == RefStatus::AllocFailed;
        let cross_or = |s: String| if failed { CROSS.to_string() } else { s };
        vec![
            self.graph.clone(),
            self.rmat.clone(),
            self.m.to_string(),
            self.n.to_string(),
            self.nnz.to_string(),
            self.undirected_edges.to_string(),
            fmt_g6(self.avg_degree),
            self.max_degree.to_string(),
            self.d.to_string(),
            self.app.to_string(),
            self.pattern.clone(),
            self.threads.to_string(),
            self.iterations.to_string(),
            self.mode.name().to_string(),
            g(self.fused_seconds),
            cross_or(g(self.reference_seconds)),
            match self.reference_status {
                RefStatus::NotRun => "not_run",
                RefStatus::Completed => "ok",
                RefStatus::AllocFailed => "alloc_failed",
            }
            .to_string(),
            cross_or(g(self.speedup)),
            g(self.fused_gflops),
            fmt_g6(self.ai_lower_bound),
            opt(self.fused_aux_bytes),
            cross_or(opt(self.reference_h_bytes)),
            cross_or(opt(self.reference_h_bytes_model)),
            cross_or(opt(self.reference_h_alloc_bytes)),
            opt(self.verified),
        ]
    }
}

/// `printf("%.6g")` formatting.
pub fn fmt_g6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<(), BenchError> {
    let file = std::fs::File::create(path)?;
    write_csv_to(records, file)
}

pub fn write_csv_to<W: Write>(records: &[BenchRecord], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Uniform entries in `[-1, 1)`.
pub fn random_dense(rows: usize, d: usize, rng: &mut impl Rng) -> DenseMatrix<f32> {
    let data = (0..rows * d)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    DenseMatrix::new(rows, d, data).expect("finite by construction")
}

fn spec_for(app: BenchApp, d: usize, cfg: &BenchConfig) -> Result<OpSpec<f32>, ConfigError> {
    let params = AppParams {
        alpha: cfg.alpha,
        mlp: (app == BenchApp::GnnMlp).then(|| LinearMessage::seeded(d, cfg.seed).into_hook()),
    };
    make_spec(app.kind(), &params)
}

fn run_fused(
    app: BenchApp,
    a: &CsrMatrix<f32>,
    x: &DenseMatrix<f32>,
    y: &DenseMatrix<f32>,
    spec: &OpSpec<f32>,
    t: usize,
) -> Result<DenseMatrix<f32>, KernelError> {
    match app {
        BenchApp::Gcn => gcn_forward(a, y, t),
        _ => fused_mm(a, x, y, spec, t),
    }
}

fn mean_seconds<E>(iterations: usize, mut f: impl FnMut() -> Result<(), E>) -> Result<f64, E> {
    f()?;
    let start = Instant::now();
    for _ in 0..iterations {
        f()?;
    }
    Ok(start.elapsed().as_secs_f64() / iterations as f64)
}

/// Mean seconds of two calls timed in alternation, so slow drift in machine
/// load hits both equally. Each gets one warm-up call first.
fn mean_seconds_interleaved<E>(
    iterations: usize,
    mut f: impl FnMut() -> Result<(), E>,
    mut g: impl FnMut() -> Result<(), E>,
) -> Result<(f64, f64), E> {
    f()?;
    g()?;
    let (mut tf, mut tg) = (0.0, 0.0);
    for _ in 0..iterations {
        let start = Instant::now();
        f()?;
        tf += start.elapsed().as_secs_f64();
        let start = Instant::now();
        g()?;
        tg += start.elapsed().as_secs_f64();
    }
    Ok((tf / iterations as f64, tg / iterations as f64))
}

/// Times every `(d, t)` combination.
///
/// Each measurement is one warm-up call followed by `iterations` timed calls;
/// only the kernel calls are inside the timer. In `both` mode the fused and
/// reference calls alternate. With a probe, one extra call per path records
/// peak heap growth.
pub fn run_bench(
    graph: &BenchGraph,
    cfg: &BenchConfig,
    probe: Option<&dyn AllocProbe>,
) -> Result<Vec<BenchRecord>, BenchError> {
    cfg.validate()?;
    let a = &graph.matrix;
    let stats = a.stats();
    let mut records = Vec::new();
    for &d in &cfg.dims {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (d as u64).rotate_left(32));
        let x = random_dense(a.nrows(), d, &mut rng);
        let y = random_dense(a.ncols(), d, &mut rng);
        let spec = spec_for(cfg.app, d, cfg)?;
        let ai = if stats.nnz > 0 && stats.nrows > 0 {
            arithmetic_intensity(stats.avg_degree, d)?
        } else {
            0.0
        };
        let flops = flop_count(stats.nnz as u64, d as u64) as f64;

        let reference_call = || -> Result<(), ReferenceError> {
            let h = sddmm_with_limit(a, &x, &y, &spec, cfg.ref_limit_bytes)?;
            spmm(&h, &y, &spec).map(drop)
        };
        let mut reference = RefMeasure::default();
        if cfg.mode.runs_reference() {
            reference = probe_reference(a, &x, &y, &spec, cfg, probe)?;
        }
        let ref_ok = reference.status == RefStatus::Completed;
        // The reference is single-threaded; time it once for every t.
        if cfg.mode == BenchMode::Reference && ref_ok {
            match mean_seconds(cfg.iterations, reference_call) {
                Ok(secs) => reference.seconds = Some(secs),
                Err(e) => reference.fail(e)?,
            }
        }

        for &t in &cfg.threads {
            let mut rec = BenchRecord {
                graph: graph.name.clone(),
                rmat: graph.rmat.map(|p| p.label()).unwrap_or_default(),
                m: stats.nrows,
                n: stats.ncols,
                nnz: stats.nnz,
                undirected_edges: stats.nnz / 2,
                avg_degree: stats.avg_degree,
                max_degree: stats.max_degree,
                d,
                app: cfg.app,
                pattern: format!("{spec:?}"),
                threads: t,
                iterations: cfg.iterations,
                mode: cfg.mode,
                fused_seconds: None,
                reference_seconds: reference.seconds,
                reference_status: reference.status,
                speedup: None,
                fused_gflops: None,
                ai_lower_bound: ai,
                fused_aux_bytes: None,
                reference_h_bytes: reference.h_bytes,
                reference_h_bytes_model: reference.h_bytes_model,
                reference_h_alloc_bytes: reference.h_alloc_bytes,
                verified: None,
            };
            if cfg.mode.runs_fused() {
                let fused_call = || run_fused(cfg.app, a, &x, &y, &spec, t).map(drop);
                let secs =
                    if cfg.mode == BenchMode::Both && reference.status == RefStatus::Completed {
                        let timed = mean_seconds_interleaved(
                            cfg.iterations,
                            || fused_call().map_err(BenchError::from),
                            || reference_call().map_err(BenchError::from),
                        );
                        match timed {
                            Ok((f, r)) => {
                                rec.reference_seconds = Some(r);
                                rec.speedup = Some(r / f);
                                f
                            }
                            Err(BenchError::Reference(e)) => {
                                reference.fail(e)?;
                                rec.reference_status = reference.status;
                                rec.reference_seconds = None;
                                mean_seconds(cfg.iterations, fused_call)?
                            }
                            Err(e) => return Err(e),
                        }
                    } else {
                        mean_seconds(cfg.iterations, fused_call)?
                    };
                rec.fused_seconds = Some(secs);
                rec.fused_gflops = Some(flops / secs / 1e9);
                if let Some(probe) = probe {
                    let (z, peak) = measure_peak(probe, || run_fused(cfg.app, a, &x, &y, &spec, t));
                    let out = std::mem::size_of_val(z?.data());
                    rec.fused_aux_bytes = Some(peak.saturating_sub(out));
                }
                if stats.nnz <= VERIFY_MAX_NNZ {
                    rec.verified = Some(verify_sample(cfg.app, a, &x, &y, &spec, t)?);
                }
            }
            records.push(rec);
        }
    }
    Ok(records)
}

#[derive(Default)]
struct RefMeasure {
    seconds: Option<f64>,
    status: RefStatus,
    h_bytes: Option<usize>,
    h_bytes_model: Option<usize>,
    h_alloc_bytes: Option<usize>,
}

impl RefMeasure {
    /// Records an allocation failure as `×`; other errors propagate.
    fn fail(&mut self, e: ReferenceError) -> Result<(), BenchError> {
        match e {
            ReferenceError::Allocation { .. } => {
                *self = RefMeasure {
                    status: RefStatus::AllocFailed,
                    ..RefMeasure::default()
                };
                Ok(())
            }
            e => Err(e.into()),
        }
    }
}

/// One untimed reference run for buffer sizes, plus one under the probe.
fn probe_reference(
    a: &CsrMatrix<f32>,
    x: &DenseMatrix<f32>,
    y: &DenseMatrix<f32>,
    spec: &OpSpec<f32>,
    cfg: &BenchConfig,
    probe: Option<&dyn AllocProbe>,
) -> Result<RefMeasure, BenchError> {
    let mut out = RefMeasure::default();
    let sizes = sddmm_with_limit(a, x, y, spec, cfg.ref_limit_bytes).and_then(|h| {
        let sizes = (h.materialized_bytes(), h.materialized_bytes_model());
        spmm(&h, y, spec).map(|_| sizes)
    });
    let (h_bytes, h_bytes_model) = match sizes {
        Ok(sizes) => sizes,
        Err(e) => {
            out.fail(e)?;
            return Ok(out);
        }
    };
    out.status = RefStatus::Completed;
    out.h_bytes = Some(h_bytes);
    out.h_bytes_model = Some(h_bytes_model);
    if let Some(p) = probe {
        let (h, peak) = measure_peak(p, || {
            sddmm_with_limit(a, x, y, spec, cfg.ref_limit_bytes).map(drop)
        });
        if let Err(e) = h {
            out.fail(e)?;
            return Ok(out);
        }
        out.h_alloc_bytes = Some(peak);
    }
    Ok(out)
}

/// Fused vs. reference on a leading-rows subsample.
fn verify_sample(
    app: BenchApp,
    a: &CsrMatrix<f32>,
    x: &DenseMatrix<f32>,
    y: &DenseMatrix<f32>,
    spec: &OpSpec<f32>,
    t: usize,
) -> Result<bool, BenchError> {
    let rows = a
        .row_ptr()
        .partition_point(|&p| p < VERIFY_SAMPLE_NNZ)
        .min(a.nrows());
    let sub = a.head_rows(rows);
    let d = x.dim();
    let xs = DenseMatrix::new(rows, d, x.data()[..rows * d].to_vec()).expect("rows of X");
    let fused = run_fused(app, &sub, &xs, y, spec, t)?;
    let h = sddmm_with_limit(&sub, &xs, y, spec, None)?;
    let reference = spmm(&h, y, spec)?;
    Ok(fused.max_rel_diff(&reference.cast::<f64>(), 1e-6) <= VERIFY_TOL)
}
