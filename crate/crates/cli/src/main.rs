use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fusedmm::alloc::CountingAllocator;
use fusedmm::bench::{
    fmt_g6, random_dense, run_bench, write_csv, BenchApp, BenchConfig, BenchGraph, BenchRecord,
    RefStatus,
};
use fusedmm::io::{read_matrix_market, rmat_generate, write_matrix_market, RmatParams};
use fusedmm::perf::PerfEstimate;
use fusedmm::reference::{dense_oracle, ORACLE_MAX_ENTRIES};
use fusedmm::{fused_mm, unfused, AppParams, ConfigError, CsrMatrix, LinearMessage, OpSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator::new();

const RMAT_HELP: &str = "RMAT graph as scale,ef[,seed] or scale,ef,a,b,c,d,seed. \
    Default quadrant probabilities a,b,c,d = 0.57,0.19,0.19,0.05; default seed 1";

#[derive(Parser)]
#[command(
    name = "fusedmm",
    version,
    about = "Fused SDDMM+SpMM kernels: benchmarks, graph generation and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time fused and/or reference kernels and write a CSV.
    Bench(BenchArgs),
    /// Generate an RMAT graph as Matrix Market.
    Rmat {
        #[arg(long, help = RMAT_HELP)]
        rmat: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare fused results against the reference pipeline.
    Verify {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value = "embed")]
        app: String,
        #[arg(long, default_value = "32", value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, default_value = "1,4", value_delimiter = ',')]
        threads: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the analytic performance model for a problem size.
    Model {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        d: u64,
        #[arg(long)]
        nnz: u64,
        /// Memory bandwidth in GB/s.
        #[arg(long, default_value_t = 100.0)]
        bandwidth: f64,
        /// Compute ceiling in GFLOP/s.
        #[arg(long)]
        peak: Option<f64>,
    },
    /// Rewrite a Matrix Market file as sorted `coordinate real general`.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct GraphArgs {
    /// Matrix Market file.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, help = RMAT_HELP)]
    rmat: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// embed, fr, gcn, spmm or gnnmlp.
    #[arg(long, default_value = "embed")]
    app: String,
    #[arg(long, default_value = "32,64,128", value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long, default_value = "1", value_delimiter = ',')]
    threads: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// fused, ref or both.
    #[arg(long, default_value = "fused")]
    mode: String,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Seed for the dense operands.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// SCAL factor of the fr app.
    #[arg(long, default_value_t = 1.0)]
    alpha: f32,
    /// Cap on the reference edge buffer; larger runs are recorded as failed.
    #[arg(long)]
    ref_limit_bytes: Option<usize>,
}

/// Failures that map to distinct exit codes.
enum Failure {
    Config(anyhow::Error),
    Verification(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

fn parse_rmat(s: &str) -> Result<RmatParams> {
    let fields: Vec<&str> = s.split(',').map(str::trim).collect();
    let int = |i: usize| -> Result<u64> {
        fields[i]
            .parse()
            .with_context(|| format!("bad integer {:?} in --rmat", fields[i]))
    };
    let float = |i: usize| -> Result<f64> {
        fields[i]
            .parse()
            .with_context(|| format!("bad probability {:?} in --rmat", fields[i]))
    };
    let params = match fields.len() {
        2 | 3 => {
            let seed = if fields.len() == 3 { int(2)? } else { 1 };
            RmatParams::new(int(0)? as u32, int(1)? as usize, seed)
        }
        7 => RmatParams::new(int(0)? as u32, int(1)? as usize, int(6)?).with_probs(
            float(2)?,
            float(3)?,
            float(4)?,
            float(5)?,
        ),
        _ => bail!("--rmat takes scale,ef[,seed] or scale,ef,a,b,c,d,seed"),
    };
    params.validate()?;
    Ok(params)
}

fn load_graph(args: &GraphArgs) -> Result<BenchGraph> {
    if let Some(path) = &args.graph {
        let matrix =
            read_matrix_market(path).with_context(|| format!("reading {}", path.display()))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        return Ok(BenchGraph {
            name,
            rmat: None,
            matrix,
        });
    }
    let params = parse_rmat(args.rmat.as_deref().expect("clap enforces one source"))?;
    Ok(BenchGraph {
        name: format!("rmat-s{}-ef{}", params.scale, params.edge_factor),
        rmat: Some(params),
        matrix: rmat_generate(&params)?,
    })
}

fn print_record(r: &BenchRecord) {
    let secs = |v: Option<f64>| v.map(fmt_g6).unwrap_or_else(|| "-".into());
    let reference = match r.reference_status {
        RefStatus::AllocFailed => "\u{00d7}".to_string(),
        _ => secs(r.reference_seconds),
    };
    println!(
        "{} d={} t={} fused={}s ref={}s speedup={} gflops={} ai={}{}",
        r.graph,
        r.d,
        r.threads,
        secs(r.fused_seconds),
        reference,
        secs(r.speedup),
        secs(r.fused_gflops),
        fmt_g6(r.ai_lower_bound),
        match r.verified {
            Some(true) => " verified",
            Some(false) => " VERIFICATION FAILED",
            None => "",
        }
    );
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let graph = load_graph(&args.graph)?;
    let s = graph.matrix.stats();
    println!(
        "{}: m={} n={} nnz={} (nnz/2={}) avg_degree={}",
        graph.name,
        s.nrows,
        s.ncols,
        s.nnz,
        s.nnz / 2,
        fmt_g6(s.avg_degree)
    );
    let cfg = BenchConfig {
        app: args.app.parse().map_err(anyhow::Error::from)?,
        dims: args.dims,
        threads: args.threads,
        iterations: args.iters,
        mode: args.mode.parse().map_err(anyhow::Error::from)?,
        seed: args.seed,
        alpha: args.alpha,
        ref_limit_bytes: args.ref_limit_bytes,
    };
    let records = run_bench(&graph, &cfg, Some(&ALLOC)).map_err(anyhow::Error::from)?;
    records.iter().for_each(print_record);
    write_csv(&records, &args.out)
        .map_err(anyhow::Error::from)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} records to {}", records.len(), args.out.display());
    if records.iter().any(|r| r.verified == Some(false)) {
        return Err(Failure::Verification(
            "fused output differs from the reference".into(),
        ));
    }
    Ok(())
}

fn spec_f64(app: BenchApp, d: usize, seed: u64) -> Result<OpSpec<f64>, ConfigError> {
    let params = AppParams {
        alpha: 1.0,
        mlp: (app == BenchApp::GnnMlp).then(|| LinearMessage::seeded(d, seed).into_hook()),
    };
    fusedmm::apps::make_spec(app.kind(), &params)
}

fn verify(
    graph: &GraphArgs,
    app: &str,
    dims: &[usize],
    threads: &[usize],
    seed: u64,
) -> Result<(), Failure> {
    let graph = load_graph(graph)?;
    let app: BenchApp = app.parse().map_err(anyhow::Error::from)?;
    // Sorted rows make the dense oracle's column order match storage order.
    let a64: CsrMatrix<f64> = graph.matrix.cast::<f64, u64>().sorted();
    let use_oracle = a64.nrows() * a64.ncols() <= ORACLE_MAX_ENTRIES;
    let mut failures = 0;
    for &d in dims {
        let spec = spec_f64(app, d, seed).map_err(anyhow::Error::from)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_dense(a64.nrows(), d, &mut rng).cast::<f64>();
        let y = random_dense(a64.ncols(), d, &mut rng).cast::<f64>();
        let reference = unfused(&a64, &x, &y, &spec).map_err(anyhow::Error::from)?;
        let oracle = if use_oracle {
            Some(dense_oracle(&a64, &x, &y, &spec).map_err(anyhow::Error::from)?)
        } else {
            None
        };
        for &t in threads {
            let fused = fused_mm(&a64, &x, &y, &spec, t).map_err(anyhow::Error::from)?;
            let diff = fused.max_rel_diff(&reference, 1e-12);
            let oracle_diff = oracle.as_ref().map(|o| fused.max_rel_diff(o, 1e-12));
            let ok = diff == 0.0 && oracle_diff.is_none_or(|v| v == 0.0);
            failures += usize::from(!ok);
            println!(
                "{} d={d} t={t}: max rel diff vs reference {}{} {}",
                app,
                fmt_g6(diff),
                oracle_diff
                    .map(|v| format!(", vs dense oracle {}", fmt_g6(v)))
                    .unwrap_or_default(),
                if ok { "ok" } else { "MISMATCH" }
            );
        }
    }
    if failures > 0 {
        return Err(Failure::Verification(format!(
            "{failures} configurations differ"
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bench(args) => bench(args),
        Command::Rmat { rmat, out } => {
            let params = parse_rmat(&rmat)?;
            let a: CsrMatrix<f32> = rmat_generate(&params).map_err(anyhow::Error::from)?;
            write_matrix_market(&a, &out).with_context(|| format!("writing {}", out.display()))?;
            let s = a.stats();
            println!(
                "rmat {}: m={} nnz={} avg_degree={} max_degree={} -> {}",
                params.label(),
                s.nrows,
                s.nnz,
                fmt_g6(s.avg_degree),
                s.max_degree,
                out.display()
            );
            Ok(())
        }
        Command::Verify {
            graph,
            app,
            dims,
            threads,
            seed,
        } => verify(&graph, &app, &dims, &threads, seed),
        Command::Model {
            m,
            n,
            d,
            nnz,
            bandwidth,
            peak,
        } => {
            let est = PerfEstimate::new(m, n, d, nnz).map_err(anyhow::Error::from)?;
            println!("flops                 {}", est.flops);
            println!("bytes_moved           {}", est.bytes_moved);
            println!("ai_lower_bound        {}", fmt_g6(est.ai_lower_bound));
            println!("fused_bytes           {}", est.mem_fused_bytes);
            println!("unfused_extra_bytes   {}", est.mem_unfused_extra_bytes);
            println!(
                "attainable_gflops     {} (at {} GB/s)",
                fmt_g6(est.attainable_gflops(bandwidth, peak)),
                fmt_g6(bandwidth)
            );
            Ok(())
        }
        Command::Convert { input, output } => {
            let a: CsrMatrix<f64> = read_matrix_market(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            write_matrix_market(&a.sorted(), &output)
                .with_context(|| format!("writing {}", output.display()))?;
            println!(
                "{}: {}x{} nnz={}",
                output.display(),
                a.nrows(),
                a.ncols(),
                a.nnz()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(2)
        }
    }
}
