//! Command-line driver: `gen`, `convert`, `multiply`, `verify` and `bench`.
//!
//! Engine knobs are resolved in three layers: built-in defaults, then
//! `OOCGEMM_*` environment variables, then explicit flags. Exit codes:
//! 0 success, 2 configuration or input rejection, 3 malformed data,
//! 4 out of storage, 5 verification mismatch, 1 anything else.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{run_suite, BenchReport, BenchRow, BenchSuite};
use crate::engine::{multiply, EngineConfig, MultiplyReport, Variant};
use crate::error::{Error, Result};
use crate::io::{
    export_coordinate, ingest_file, transpose_stored, IngestOptions, InputFormat,
    DEFAULT_SORT_ENTRIES,
};
use crate::rmat::{generate, Benchmark, RmatParams};
use crate::size::{format_bytes, parse_bytes};
use crate::store::{pack_matrix, StoredMatrix, DEFAULT_BLOCK_SIZE};
use crate::verify::{
    column_sum_checksum, file_sha256, sample_rows, verify_rows, verify_with_oracle, Comparison,
    DEFAULT_ORACLE_ENTRIES,
};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_FORMAT: u8 = 3;
pub const EXIT_STORAGE: u8 = 4;
pub const EXIT_MISMATCH: u8 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "oocgemm",
    version,
    about = "Out-of-core sparse matrix multiplication"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an R-MAT graph and pack it as a block file.
    Gen(GenArgs),
    /// Ingest Matrix Market or edge-list text into a block file, or export a
    /// block file as Matrix Market.
    Convert(ConvertArgs),
    /// Multiply two stored matrices under a memory budget.
    Multiply(MultiplyArgs),
    /// Check a stored product against its inputs.
    Verify(VerifyArgs),
    /// Sweep R-MAT squarings over a configuration grid.
    Bench(BenchArgs),
}

fn bytes_arg(s: &str) -> std::result::Result<u64, String> {
    parse_bytes(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "graph500", value_parser = parse_preset)]
    pub preset: Benchmark,
    #[arg(long)]
    pub scale: u32,
    #[arg(long, default_value_t = 1, env = "OOCGEMM_SEED")]
    pub seed: u64,
    /// Samples per node; defaults to the preset's value.
    #[arg(long)]
    pub edge_factor: Option<f64>,
    /// Quadrant probabilities `a,b,c,d`; overrides the preset's.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub skew: Option<Vec<f64>>,
    #[arg(long, value_parser = bytes_arg, env = "OOCGEMM_BLOCK_SIZE")]
    pub block_size: Option<u64>,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn parse_preset(s: &str) -> std::result::Result<Benchmark, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Mtx,
    Edges,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Input format; guessed from the extension (`.mtx`) when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Treat ids as one-based (Matrix Market default).
    #[arg(long, conflicts_with = "zero_indexed")]
    pub one_indexed: bool,
    /// Treat ids as zero-based (edge-list default).
    #[arg(long)]
    pub zero_indexed: bool,
    /// Add the reverse of every edge-list edge.
    #[arg(long)]
    pub symmetrize: bool,
    /// Keep symmetric Matrix Market files as stored (lower triangle only).
    #[arg(long)]
    pub no_symmetrize: bool,
    /// Keep entries whose value is exactly zero.
    #[arg(long)]
    pub keep_zeros: bool,
    #[arg(long)]
    pub transpose: bool,
    /// Renumber edge-list ids densely in order of appearance.
    #[arg(long)]
    pub compact_ids: bool,
    #[arg(long, value_parser = bytes_arg, env = "OOCGEMM_BLOCK_SIZE")]
    pub block_size: Option<u64>,
    /// Triplets held in memory while sorting.
    #[arg(long, default_value_t = DEFAULT_SORT_ENTRIES)]
    pub sort_entries: usize,
}

/// Engine knobs shared by `multiply` and `bench`. Unset flags fall back to
/// the environment, then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct EngineArgs {
    /// Memory capacity, e.g. `256MiB`.
    #[arg(long, value_parser = bytes_arg)]
    pub memory: Option<u64>,
    #[arg(long, value_parser = bytes_arg)]
    pub block_size: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output buffer factor in (0, 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Deal rows to workers round-robin instead of balancing blocks.
    #[arg(long)]
    pub no_block_balance: bool,
    /// Spill raw intermediate products instead of per-row partial sums.
    #[arg(long)]
    pub no_partial_agg: bool,
    #[arg(long)]
    pub spill_dir: Option<PathBuf>,
}

impl EngineArgs {
    pub fn config(&self, output: &Path) -> Result<EngineConfig> {
        let mut cfg = EngineConfig::new(output).apply_env()?;
        if let Some(m) = self.memory {
            cfg = cfg.with_memory(m);
        }
        if let Some(b) = self.block_size {
            cfg = cfg.with_block_size(b as usize);
        }
        if let Some(t) = self.threads {
            cfg = cfg.with_threads(t);
        }
        if let Some(a) = self.alpha {
            cfg = cfg.with_alpha(a);
        }
        if let Some(d) = &self.spill_dir {
            cfg = cfg.with_spill_dir(d);
        }
        let bw = cfg.block_balance && !self.no_block_balance;
        let pa = cfg.partial_aggregation && !self.no_partial_agg;
        cfg = cfg.set_strategy_toggles(bw, pa);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct MultiplyArgs {
    pub a: PathBuf,
    pub b: Option<PathBuf>,
    /// Multiply A by itself.
    #[arg(long, conflicts_with = "b")]
    pub square: bool,
    /// Use the transpose of the right operand (materialized first).
    #[arg(long)]
    pub transpose: bool,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Write the full JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write one CSV row of plot data here.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    pub c: PathBuf,
    /// Entries per input above which the dense oracle refuses to run.
    #[arg(long, default_value_t = DEFAULT_ORACLE_ENTRIES)]
    pub max_entries: u64,
    /// Absolute tolerance per entry for oracle and row checks.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Run the streaming row-sum and column-sum checks instead of the oracle.
    #[arg(long)]
    pub checksum: bool,
    /// Recompute this many random rows instead of the oracle.
    #[arg(long)]
    pub sample_rows: Option<usize>,
    #[arg(long, default_value_t = 1, env = "OOCGEMM_SEED")]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "graph500", value_parser = parse_preset)]
    pub preset: Benchmark,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub scales: Vec<u32>,
    /// Memory capacities; defaults to the resolved `--memory` value.
    #[arg(long, value_delimiter = ',', value_parser = bytes_arg)]
    pub memories: Vec<u64>,
    /// Block sizes; defaults to the resolved `--block-size` value.
    #[arg(long, value_delimiter = ',', value_parser = bytes_arg)]
    pub block_sizes: Vec<u64>,
    /// Thread counts; defaults to the resolved `--threads` value.
    #[arg(long = "thread-counts", value_delimiter = ',')]
    pub thread_counts: Vec<usize>,
    /// Output buffer factors; defaults to the resolved `--alpha` value.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// Strategy variants (`no`, `bw`, `pa`, `all`); defaults to the one
    /// selected by the toggles.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    pub variants: Vec<Variant>,
    #[arg(long, default_value_t = 1, env = "OOCGEMM_SEED")]
    pub seed: u64,
    #[arg(long, default_value_t = 5, env = "OOCGEMM_REPEAT")]
    pub repeat: usize,
    /// Directory for generated inputs and outputs; a temporary one by default.
    #[arg(long)]
    pub work_dir: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Mismatch,
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::InfeasibleBudget { .. }
        | Error::InvalidInput(_)
        | Error::DimensionMismatch { .. } => EXIT_CONFIG,
        Error::Format { .. } | Error::RowNotFound { .. } => EXIT_FORMAT,
        Error::OutOfStorage { .. } => EXIT_STORAGE,
        Error::Storage { .. } | Error::Io(_) => 1,
    }
}

/// Parses `std::env::args`, runs the command and maps the result to an
/// exit code.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Mismatch) => ExitCode::from(EXIT_MISMATCH),
        Err(e) => {
            eprintln!("oocgemm: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Outcome> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Convert(a) => cmd_convert(&a, out),
        Command::Multiply(a) => cmd_multiply(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    }
}

fn block_size_or_default(v: Option<u64>) -> usize {
    v.map_or(DEFAULT_BLOCK_SIZE, |b| b as usize)
}

pub fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> Result<Outcome> {
    let mut p = RmatParams::preset(args.preset, args.scale).with_seed(args.seed);
    if let Some(e) = args.edge_factor {
        p = p.with_edge_factor(e);
    }
    if let Some(s) = &args.skew {
        p = p.with_skew(s[0], s[1], s[2], s[3]);
    }
    p.validate()?;
    let m = generate(&p)?;
    let stored = pack_matrix(&m, block_size_or_default(args.block_size), &args.output)?;
    writeln!(out, "preset   {}", p.benchmark)?;
    writeln!(out, "scale    {}", p.scale)?;
    writeln!(out, "seed     {}", p.seed)?;
    writeln!(out, "nodes    {}", p.n_nodes())?;
    writeln!(out, "samples  {}", p.n_samples())?;
    writeln!(out, "entries  {}", stored.n_entries())?;
    writeln!(out, "blocks   {}", stored.block_count())?;
    writeln!(out, "bytes    {}", stored.file_bytes())?;
    writeln!(out, "output   {}", stored.path().display())?;
    Ok(Outcome::Success)
}

fn is_block_file(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("blk"))
}

pub fn cmd_convert(args: &ConvertArgs, out: &mut dyn Write) -> Result<Outcome> {
    if is_block_file(&args.input) {
        let m = StoredMatrix::open(&args.input)?;
        let mut m = m.to_sparse()?;
        if args.transpose {
            m = m.transpose();
        }
        let file = File::create(&args.output).map_err(|e| Error::storage(&args.output, e, 0))?;
        let mut w = BufWriter::new(file);
        export_coordinate(&m, &mut w)?;
        w.flush().map_err(|e| Error::storage(&args.output, e, 0))?;
        writeln!(
            out,
            "exported {}×{} with {} entries to {}",
            m.n_rows(),
            m.n_cols(),
            m.n_entries(),
            args.output.display()
        )?;
        return Ok(Outcome::Success);
    }
    let format = match args.format {
        Some(FormatArg::Mtx) => InputFormat::MatrixMarket,
        Some(FormatArg::Edges) => InputFormat::EdgeList,
        None => InputFormat::from_path(&args.input),
    };
    let mut opts = match format {
        InputFormat::MatrixMarket => IngestOptions {
            symmetrize: !args.no_symmetrize,
            ..IngestOptions::default()
        },
        InputFormat::EdgeList => IngestOptions {
            symmetrize: args.symmetrize,
            ..IngestOptions::edge_list()
        },
    };
    if args.one_indexed {
        opts.one_indexed = Some(true);
    } else if args.zero_indexed {
        opts.one_indexed = Some(false);
    }
    opts.drop_explicit_zeros = !args.keep_zeros;
    opts.transpose = args.transpose;
    opts.compact_ids = args.compact_ids;
    let m = ingest_file(
        &args.input,
        format,
        &opts,
        block_size_or_default(args.block_size),
        &args.output,
        args.sort_entries,
    )?;
    writeln!(
        out,
        "packed {}×{} with {} entries into {} blocks at {}",
        m.n_rows(),
        m.n_cols(),
        m.n_entries(),
        m.block_count(),
        m.path().display()
    )?;
    Ok(Outcome::Success)
}

fn write_report_files(report: &impl serde::Serialize, json: Option<&Path>) -> Result<()> {
    if let Some(path) = json {
        let file = File::create(path).map_err(|e| Error::storage(path, e, 0))?;
        serde_json::to_writer_pretty(BufWriter::new(file), report)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    Ok(())
}

fn multiply_plot_row(path: &Path, r: &MultiplyReport, sha: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::storage(path, e, 0))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record([
        "variant",
        "alpha",
        "memory_bytes",
        "block_size",
        "threads",
        "total_seconds",
        "compute_seconds",
        "merge_seconds",
        "spill_flush_bytes",
        "spill_read_bytes",
        "b1_loads",
        "b2_loads",
        "output_entries",
        "output_sha256",
    ])
    .map_err(csv_err)?;
    w.write_record([
        r.variant.to_string(),
        r.config.alpha.to_string(),
        r.config.memory_capacity_bytes.to_string(),
        r.config.block_size_bytes.to_string(),
        r.config.threads.to_string(),
        format!("{:.6}", r.phases.total),
        format!("{:.6}", r.phases.compute),
        format!("{:.6}", r.phases.merge),
        r.io.spill_flush_bytes.to_string(),
        r.io.spill_read_bytes.to_string(),
        r.io.b1_loads.to_string(),
        r.io.b2_loads.to_string(),
        r.output_entries.to_string(),
        sha.to_string(),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

fn print_multiply_summary(
    out: &mut dyn Write,
    r: &MultiplyReport,
    shape: (usize, usize),
    sha: &str,
) -> Result<()> {
    let p = &r.plan;
    writeln!(out, "variant        {} ({:?})", r.variant, r.policy)?;
    writeln!(out, "memory         {}", format_bytes(p.capacity_bytes))?;
    writeln!(
        out,
        "buffers        B1 {}  B2 {} ({} blocks)  Bout {}",
        format_bytes(p.b1_bytes),
        format_bytes(p.b2_bytes),
        r.b2_capacity_blocks,
        format_bytes(p.bout_bytes)
    )?;
    writeln!(out, "max row        {} entries", r.max_row_entries)?;
    writeln!(
        out,
        "time           total {:.3}s  symbolic {:.3}s  compute {:.3}s  merge {:.3}s",
        r.phases.total, r.phases.symbolic, r.phases.compute, r.phases.merge
    )?;
    writeln!(
        out,
        "io             B1 loads {}  B2 loads {}  hits {}  evictions {}",
        r.io.b1_loads, r.io.b2_loads, r.io.b2_hits, r.io.b2_evictions
    )?;
    writeln!(
        out,
        "spill          {} runs  {} written  {} read",
        r.io.spill_runs,
        format_bytes(r.io.spill_flush_bytes),
        format_bytes(r.io.spill_read_bytes)
    )?;
    writeln!(
        out,
        "worker  blocks  a_entries    products  spill_runs  peak_share"
    )?;
    for t in &r.threads {
        writeln!(
            out,
            "{:>6}  {:>6}  {:>9}  {:>10}  {:>10}  {:>10}",
            t.worker, t.assigned_blocks, t.a_entries, t.products, t.spill_runs, t.peak_share_bytes
        )?;
    }
    writeln!(
        out,
        "output         {}×{} with {} entries in {} nonempty rows",
        shape.0, shape.1, r.output_entries, r.output_rows
    )?;
    writeln!(out, "sha256         {sha}")?;
    Ok(())
}

#[derive(serde::Serialize)]
struct MultiplyDocument<'a> {
    format: &'static str,
    version: u32,
    former: &'a Path,
    latter: &'a Path,
    transposed_latter: bool,
    output: &'a Path,
    output_sha256: &'a str,
    report: &'a MultiplyReport,
}

pub fn cmd_multiply(args: &MultiplyArgs, out: &mut dyn Write) -> Result<Outcome> {
    let cfg = args.engine.config(&args.output)?;
    let a = StoredMatrix::open(&args.a)?;
    let b_path = match (&args.b, args.square) {
        (Some(b), false) => b.clone(),
        (None, true) => args.a.clone(),
        (None, false) => {
            return Err(Error::Config("give a right operand or --square".into()));
        }
        (Some(_), true) => unreachable!("clap rejects --square with a right operand"),
    };
    let b = StoredMatrix::open(&b_path)?;
    // Holds the materialized transpose until the multiply is done.
    let mut scratch = None;
    let b = if args.transpose {
        let parent = cfg
            .spill_dir
            .clone()
            .unwrap_or_else(|| match args.output.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => ".".into(),
            });
        let dir = tempfile::Builder::new()
            .prefix("oocgemm-transpose-")
            .tempdir_in(&parent)
            .map_err(|e| Error::storage(&parent, e, 0))?;
        let bt = transpose_stored(
            &b,
            b.block_size(),
            &dir.path().join("bt.blk"),
            DEFAULT_SORT_ENTRIES,
        )?;
        scratch = Some(dir);
        bt
    } else {
        b
    };
    let (c, report) = multiply(&a, &b, &cfg)?;
    drop(scratch);
    let sha = file_sha256(c.path())?;
    print_multiply_summary(out, &report, (c.n_rows(), c.n_cols()), &sha)?;
    let doc = MultiplyDocument {
        format: "oocgemm-multiply",
        version: 1,
        former: &args.a,
        latter: &b_path,
        transposed_latter: args.transpose,
        output: &args.output,
        output_sha256: &sha,
        report: &report,
    };
    write_report_files(&doc, args.report.as_deref())?;
    if let Some(p) = &args.plot_data {
        multiply_plot_row(p, &report, &sha)?;
    }
    Ok(Outcome::Success)
}

fn print_comparison(out: &mut dyn Write, what: &str, c: &Comparison) -> Result<()> {
    writeln!(
        out,
        "{what}: {} rows compared, {} mismatched, max |diff| {:e}",
        c.rows_compared, c.mismatched_rows, c.max_abs_diff
    )?;
    if let Some(m) = &c.first_mismatch {
        writeln!(out, "first mismatch: {m}")?;
    }
    Ok(())
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<Outcome> {
    let a = StoredMatrix::open(&args.a)?;
    let b = StoredMatrix::open(&args.b)?;
    let c = StoredMatrix::open(&args.c)?;
    let mut ok = true;
    let mut ran = false;
    if args.checksum {
        ran = true;
        let r = column_sum_checksum(&a, &b, &c, 1e-12)?;
        writeln!(
            out,
            "checksum: max |diff| {:e} (tolerance {:e})",
            r.max_abs_diff, r.tolerance
        )?;
        ok &= r.passed();
    }
    if let Some(n) = args.sample_rows {
        ran = true;
        let rows = sample_rows(a.n_rows(), n, args.seed);
        let cmp = verify_rows(&a, &b, &c, &rows, args.tolerance)?;
        print_comparison(out, "sampled rows", &cmp)?;
        ok &= cmp.passed();
    }
    if !ran {
        let cmp = verify_with_oracle(&a, &b, &c, args.max_entries, args.tolerance)?;
        print_comparison(out, "oracle", &cmp)?;
        ok &= cmp.passed();
    }
    writeln!(out, "{}", if ok { "PASS" } else { "FAIL" })?;
    Ok(if ok {
        Outcome::Success
    } else {
        Outcome::Mismatch
    })
}

fn print_bench_row(out: &mut dyn Write, r: &BenchRow) -> std::io::Result<()> {
    let c = &r.cell;
    writeln!(
        out,
        "{:>5}  {:>4}  {:>10}  {:>9}  {:>3}  {:>6}  {:>10.4}  {:>12}  {:>12}",
        c.scale,
        c.variant.name(),
        format_bytes(c.memory_bytes),
        format_bytes(c.block_size as u64),
        c.threads,
        c.alpha,
        r.mean_seconds,
        r.io.spill_flush_bytes,
        r.output_entries
    )
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<Outcome> {
    let placeholder = Path::new("unused.blk");
    let base = args.engine.config(placeholder)?;
    let or_default = |v: &Vec<u64>, d: u64| if v.is_empty() { vec![d] } else { v.clone() };
    let tmp;
    let work_dir = match &args.work_dir {
        Some(d) => d.clone(),
        None => {
            tmp = tempfile::Builder::new()
                .prefix("oocgemm-bench-")
                .tempdir()
                .map_err(|e| Error::storage(std::env::temp_dir(), e, 0))?;
            tmp.path().to_path_buf()
        }
    };
    let suite = BenchSuite {
        preset: args.preset,
        scales: args.scales.clone(),
        seed: args.seed,
        memories: or_default(&args.memories, base.memory_capacity_bytes),
        block_sizes: or_default(&args.block_sizes, base.block_size_bytes as u64)
            .into_iter()
            .map(|b| b as usize)
            .collect(),
        threads: if args.thread_counts.is_empty() {
            vec![base.threads]
        } else {
            args.thread_counts.clone()
        },
        alphas: if args.alphas.is_empty() {
            vec![base.alpha]
        } else {
            args.alphas.clone()
        },
        variants: if args.variants.is_empty() {
            vec![base.variant()]
        } else {
            args.variants.clone()
        },
        repeat: args.repeat.max(1),
        work_dir,
    };
    writeln!(
        out,
        "scale  var       memory      block  thr   alpha    mean (s)   spill bytes  out entries"
    )?;
    let mut io_err = None;
    let report: BenchReport = run_suite(&suite, |row| {
        if let Err(e) = print_bench_row(out, row) {
            io_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    if let Some(p) = &args.report {
        let file = File::create(p).map_err(|e| Error::storage(p, e, 0))?;
        report.write_json(BufWriter::new(file))?;
    }
    if let Some(p) = &args.plot_data {
        let file = File::create(p).map_err(|e| Error::storage(p, e, 0))?;
        report.write_csv(BufWriter::new(file))?;
    }
    Ok(Outcome::Success)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (Result<Outcome>, String) {
        let cli =
            Cli::try_parse_from(std::iter::once("oocgemm").chain(args.iter().copied())).unwrap();
        let mut buf = Vec::new();
        let r = run(cli, &mut buf);
        (r, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn gen_reports_table_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("g.blk");
        let (r, text) = run_args(&[
            "gen",
            "--preset",
            "graph500",
            "--scale",
            "15",
            "-o",
            out.to_str().unwrap(),
        ]);
        assert_eq!(r.unwrap(), Outcome::Success);
        assert!(text.contains("nodes    32768"), "{text}");
        assert!(text.contains("samples  524288"), "{text}");
    }

    #[test]
    fn gen_scale_zero_is_one_node() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("g.blk");
        let (r, text) = run_args(&["gen", "--scale", "0", "-o", out.to_str().unwrap()]);
        r.unwrap();
        assert!(text.contains("nodes    1\n"), "{text}");
        let m = StoredMatrix::open(&out).unwrap().to_sparse().unwrap();
        assert_eq!(m.triplets().collect::<Vec<_>>(), [(0, 0, 16.0)]);
    }

    #[test]
    fn infeasible_memory_maps_to_config_exit() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.blk");
        run_args(&["gen", "--scale", "6", "-o", a.to_str().unwrap()])
            .0
            .unwrap();
        let c = dir.path().join("c.blk");
        let (r, _) = run_args(&[
            "multiply",
            a.to_str().unwrap(),
            "--square",
            "-o",
            c.to_str().unwrap(),
            "--memory",
            "5MiB",
        ]);
        let e = r.unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
        assert!(e.to_string().contains("at least"), "{e}");
    }
}
