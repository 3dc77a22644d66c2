//! The `barycenter` command line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::barycenter::{
    build_primal, primal_dimensions, solve_barycenter, BarycenterOptions, BarycenterResult, CostTensor, ResultDoc,
};
use crate::centroid::{build_centroids, detect_grid, DEFAULT_TUPLE_CAP};
use crate::demo::{generate_demo, DemoSpec};
use crate::error::{Error, Result};
use crate::lp::SolveOptions;
use crate::measure::{load_measure_set, Format, MeasureSet};
use crate::oracle::{run_oracle, RandomSpec, DEFAULT_NODE_BUDGET};
use crate::scalar::{rel_close, Rational, Scalar};
use crate::sparsity::sparsify;
use crate::svg::{render_svg, SvgOptions};
use crate::transport::{certify, VerifyReport};

/// Environment variable capping the worker thread count.
pub const THREADS_VAR: &str = "BARYCENTER_THREADS";

#[derive(Parser, Debug)]
#[command(name = "barycenter", version, about = "Exact Wasserstein barycenters of discrete measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve for the barycenter of the measures in a JSON file.
    Solve {
        measures: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Re-solve over the optimal tuples to get a basic, sparse barycenter.
        #[arg(long)]
        sparse: bool,
        /// Rational arithmetic throughout.
        #[arg(long)]
        exact: bool,
        /// Tolerance of the post-solve duality and dual feasibility check.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Write the linked primal LP as sparse triplets.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
    },
    /// Check a saved result for mass splitting and build its potential certificate.
    Verify { result: PathBuf, measures: PathBuf },
    /// Print the centroid set and LP dimensions.
    Centroids { measures: PathBuf },
    /// Write a bundled demo instance.
    Demo {
        #[arg(value_parser = ["california"])]
        name: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Also store masses as exact fractions.
        #[arg(long)]
        exact: bool,
    },
    /// Compare the solvers against brute-force enumeration on random rational instances.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        max_n: usize,
        #[arg(long, default_value_t = 3)]
        max_support: usize,
        #[arg(long, default_value_t = 4)]
        denominator: u32,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
    },
    /// Draw a planar result as SVG.
    Plot {
        result: PathBuf,
        measures: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Draw the transport arrows to this measure.
        #[arg(long)]
        transport_to: Option<usize>,
    },
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Validation(_) | Error::Dimension { .. } | Error::Io(_) => 2,
        Error::Numerical(_) | Error::InfeasibleTransport(_) | Error::Status(_) => 3,
        Error::Size(_) | Error::BudgetExceeded(_) => 4,
    }
}

/// Exit code of a check that ran but did not pass.
pub const CHECK_FAILED: i32 = 1;

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: {THREADS_VAR} must be a positive integer");
                return 2;
            }
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Solve { measures, output, sparse, exact, tol, svg, dump_lp } => {
            let args = SolveArgs { output, sparse, tol, svg, dump_lp };
            if exact {
                solve_cmd::<Rational>(&measures, &args)
            } else {
                solve_cmd::<f64>(&measures, &args)
            }
        }
        Command::Verify { result, measures } => verify_cmd(&result, &measures),
        Command::Centroids { measures } => centroids_cmd(&measures),
        Command::Demo { output, exact, .. } => {
            let doc = if exact {
                generate_demo::<Rational>(&DemoSpec::california())?.to_doc()
            } else {
                generate_demo::<f64>(&DemoSpec::california())?.to_doc()
            };
            write_json(&output, &doc)?;
            Ok(0)
        }
        Command::Oracle { seed, count, max_n, max_support, denominator, budget } => {
            let spec = RandomSpec { max_n, max_support, denominator, ..RandomSpec::default() };
            let summary = run_oracle(seed, count, &spec, budget)?;
            println!("{}", serde_json::to_string_pretty(&summary).map_err(Error::from)?);
            Ok(if summary.failed == 0 { 0 } else { CHECK_FAILED })
        }
        Command::Plot { result, measures, output, transport_to } => {
            let doc = read_result(&result)?;
            let opts = SvgOptions { transport_to, ..SvgOptions::default() };
            let svg = if doc.total_cost_exact.is_some() {
                let ms = read_measures::<Rational>(&measures)?;
                render_svg(&BarycenterResult::from_doc(&doc, &ms)?, &ms, &opts)?
            } else {
                let ms = read_measures::<f64>(&measures)?;
                render_svg(&BarycenterResult::from_doc(&doc, &ms)?, &ms, &opts)?
            };
            std::fs::write(output, svg)?;
            Ok(0)
        }
    }
}

struct SolveArgs {
    output: PathBuf,
    sparse: bool,
    tol: f64,
    svg: Option<PathBuf>,
    dump_lp: Option<PathBuf>,
}

fn read_measures<T: Scalar>(path: &Path) -> Result<MeasureSet<T>> {
    load_measure_set(BufReader::new(File::open(path)?), Format::Json)
}

fn read_result(path: &Path) -> Result<ResultDoc> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn solve_cmd<T: Scalar>(path: &Path, args: &SolveArgs) -> Result<i32> {
    let ms = read_measures::<T>(path)?;
    let opts = BarycenterOptions::default();
    if let Some(dump) = &args.dump_lp {
        let s = build_centroids(&ms, opts.tuple_cap)?;
        let ct = CostTensor::new(&ms, &s);
        let p = build_primal(&ms, &s, &ct, opts.variable_cap)?;
        let mut w = BufWriter::new(File::create(dump)?);
        p.write_triplets(&mut w)?;
        w.flush()?;
    }
    let mut result = solve_barycenter(&ms, &opts)?;
    if args.sparse {
        let s = result.centroids.clone();
        result = sparsify(&result, &ms, &s, &opts.lp)?;
    }
    let ct = CostTensor::new(&ms, &result.centroids);
    let dual = result.dual.objective(&ms).to_f64();
    let primal = result.total_cost.to_f64();
    let violation = result.dual.max_violation(&ct);
    if !rel_close(dual, primal, args.tol) || violation > args.tol {
        return Err(Error::Numerical(format!(
            "optimality check failed: primal {primal}, dual {dual}, dual violation {violation:e}"
        )));
    }
    write_json(&args.output, &result.to_doc())?;
    if let Some(svg) = &args.svg {
        std::fs::write(svg, render_svg(&result, &ms, &SvgOptions::default())?)?;
    }
    eprintln!(
        "optimal: total cost {primal}, barycenter support {} (bound {})",
        result.support_size(),
        ms.sparsity_bound()
    );
    Ok(0)
}

fn verify_cmd(result: &Path, measures: &Path) -> Result<i32> {
    let doc = read_result(result)?;
    let report = if doc.total_cost_exact.is_some() {
        verify_with::<Rational>(&doc, measures)?
    } else {
        verify_with::<f64>(&doc, measures)?
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.pass() { 0 } else { CHECK_FAILED })
}

fn verify_with<T: Scalar>(doc: &ResultDoc, measures: &Path) -> Result<VerifyReport> {
    let ms = read_measures::<T>(measures)?;
    let result = BarycenterResult::from_doc(doc, &ms)?;
    let cert = certify(&result, &ms, &SolveOptions::default())?;
    Ok(VerifyReport::from_certificate(&cert))
}

#[derive(Serialize)]
struct CentroidReport {
    count: usize,
    support_sizes: Vec<usize>,
    primal_variables: usize,
    primal_constraints: usize,
    sparsity_bound: usize,
    grid: Option<GridReport>,
    centroids: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct GridReport {
    origin: Vec<f64>,
    axes: Vec<Vec<f64>>,
    extents: Vec<usize>,
    refined_extents: Vec<usize>,
    density_bound: f64,
}

fn centroids_cmd(path: &Path) -> Result<i32> {
    let ms = read_measures::<f64>(path)?;
    let s = build_centroids(&ms, DEFAULT_TUPLE_CAP)?;
    let sizes = ms.support_sizes();
    let (vars, rows) = primal_dimensions(&sizes, s.len());
    let grid = detect_grid(&ms).map(|g| {
        let refined = crate::centroid::refined_grid(&g, ms.len());
        let (density_bound, _) = crate::centroid::grid_density_bound(&g, ms.len());
        GridReport { origin: g.origin, axes: g.axes, extents: g.extents, refined_extents: refined.extents, density_bound }
    });
    let report = CentroidReport {
        count: s.len(),
        support_sizes: sizes,
        primal_variables: vars,
        primal_constraints: rows,
        sparsity_bound: ms.sparsity_bound(),
        grid,
        centroids: s.points().to_vec(),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}
