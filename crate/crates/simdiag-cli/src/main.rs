//! `simdiag`: command-line harness around the refinement experiments.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use simdiag::diag::{self, DiagSolveOptions, DiagState};
use simdiag::harness::{self, QrCompareConfig, RunConfig};
use simdiag::matrix::{Field, Matrix, MatrixJson};
use simdiag::poly::Route;
use simdiag::report::IterationTrace;
use simdiag::scalar;
use simdiag::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(name = "simdiag", about = "Newton-type eigendecomposition refinement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct TestArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    perturb_exp: u32,
    #[arg(long)]
    field: Field,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    prec: u32,
    #[arg(long)]
    iters: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Refine a single perturbed eigendecomposition (Test 1 shape).
    Test1(TestArgs),
    /// Simultaneously refine two matrices (Test 2 shape).
    Test2(TestArgs),
    /// High-precision Wilkinson roots through the chosen matrix realization.
    Wilkinson {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        prec: u32,
        #[arg(long)]
        iters: usize,
        #[arg(long)]
        route: Route,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare classical and certificate QR stopping rules on Gaussian PSD
    /// instances.
    QrCompare {
        #[arg(long)]
        min_n: usize,
        #[arg(long)]
        max_n: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refine a user-supplied decomposition of a user-supplied matrix.
    Refine {
        /// Matrix JSON file.
        #[arg(long)]
        matrix: PathBuf,
        /// JSON file with fields E, F, Sigma (each in matrix format).
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        prec: u32,
        #[arg(long)]
        iters: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&PathBuf>, text: &str) -> simdiag::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn trace_csv(trace: &IterationTrace, prec: u32) -> String {
    let mut buf = Vec::new();
    trace
        .write_csv(&mut buf, IterationTrace::render_digits(prec))
        .expect("in-memory write");
    String::from_utf8(buf).expect("csv is ascii")
}

fn run_test(args: &TestArgs, second: bool) -> simdiag::Result<(String, Format, Option<PathBuf>)> {
    let cfg = RunConfig {
        n: args.n,
        perturb_exp: args.perturb_exp,
        field: args.field,
        seed: args.seed,
        prec: args.prec,
        iters: args.iters,
    };
    let digits = IterationTrace::render_digits(args.prec);
    let (trace, meta_extra, solver) = if second {
        let run = harness::run_test2(&cfg)?;
        let extra = serde_json::json!({
            "e_resample_offset": run.e_resample_offset,
            "f_resample_offset": run.f_resample_offset,
        });
        (run.outcome.trace, extra, "test2")
    } else {
        let run = harness::run_test1(&cfg)?;
        let extra = serde_json::json!({ "resample_offset": run.resample_offset });
        (run.outcome.trace, extra, "test1")
    };
    let text = match args.format {
        Format::Csv => trace_csv(&trace, args.prec),
        Format::Json => {
            let mut meta = serde_json::json!({
                "solver": solver,
                "n": args.n,
                "perturb_exp": args.perturb_exp,
                "field": args.field.to_string(),
                "seed": args.seed,
                "precision_bits": args.prec,
            });
            for (k, v) in meta_extra.as_object().unwrap() {
                meta[k] = v.clone();
            }
            let doc = serde_json::json!({
                "meta": meta,
                "trace": trace.to_json_value(digits),
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
        }
    };
    Ok((text, args.format, args.out.clone()))
}

fn run() -> simdiag::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Test1(args) => {
            let (text, _, out) = run_test(args, false)?;
            emit(out.as_ref(), &text)
        }
        Command::Test2(args) => {
            let (text, _, out) = run_test(args, true)?;
            emit(out.as_ref(), &text)
        }
        Command::Wilkinson { n, prec, iters, route, format, out } => {
            let refine = harness::run_wilkinson(*n, *prec, *iters, *route)?;
            let digits = IterationTrace::render_digits(*prec);
            let roots: Vec<(String, String)> = (0..refine.roots.n())
                .map(|i| {
                    let v = refine.roots.value(i);
                    (
                        scalar::fmt_sci(v.real(), digits),
                        scalar::fmt_sci(v.imag(), digits),
                    )
                })
                .collect();
            let text = match format {
                Format::Csv => {
                    let mut text = trace_csv(&refine.solve.trace, *prec);
                    text.push('\n');
                    text.push_str("index,root_re,root_im\n");
                    for (i, (re, im)) in roots.iter().enumerate() {
                        text.push_str(&format!("{i},{re},{im}\n"));
                    }
                    text
                }
                Format::Json => {
                    let doc = serde_json::json!({
                        "meta": {
                            "solver": "wilkinson",
                            "n": n,
                            "route": route.to_string(),
                            "precision_bits": prec,
                        },
                        "roots": roots
                            .iter()
                            .map(|(re, im)| serde_json::json!({ "re": re, "im": im }))
                            .collect::<Vec<_>>(),
                        "trace": refine.solve.trace.to_json_value(digits),
                    });
                    format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
                }
            };
            emit(out.as_ref(), &text)
        }
        Command::QrCompare { min_n, max_n, trials, seed, threshold, format, out } => {
            let cfg = QrCompareConfig {
                min_n: *min_n,
                max_n: *max_n,
                trials: *trials,
                threshold: *threshold,
                seed: *seed,
            };
            let rows = harness::run_qr_compare(&cfg)?;
            let text = match format {
                Format::Csv => {
                    let mut text = String::from("n,trial,iters_alg1,iters_alg3\n");
                    for r in &rows {
                        text.push_str(&format!(
                            "{},{},{},{}\n",
                            r.n, r.trial, r.iters_alg1, r.iters_alg3
                        ));
                    }
                    text
                }
                Format::Json => {
                    let doc = serde_json::json!({
                        "meta": {
                            "solver": "qr-compare",
                            "min_n": min_n,
                            "max_n": max_n,
                            "trials": trials,
                            "threshold": threshold,
                            "seed": seed,
                        },
                        "rows": rows
                            .iter()
                            .map(|r| serde_json::json!({
                                "n": r.n,
                                "trial": r.trial,
                                "iters_alg1": r.iters_alg1,
                                "iters_alg3": r.iters_alg3,
                            }))
                            .collect::<Vec<_>>(),
                    });
                    format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
                }
            };
            emit(out.as_ref(), &text)
        }
        Command::Refine { matrix, init, prec, iters, format, out } => {
            let m = Matrix::read_json_file(matrix)?;
            let text = std::fs::read_to_string(init)?;
            #[derive(serde::Deserialize)]
            struct InitJson {
                #[serde(rename = "E")]
                e: MatrixJson,
                #[serde(rename = "F")]
                f: MatrixJson,
                #[serde(rename = "Sigma")]
                sigma: MatrixJson,
            }
            let init: InitJson = serde_json::from_str(&text)?;
            let e = Matrix::from_json(&init.e)?;
            let f = Matrix::from_json(&init.f)?;
            let sigma = Spectrum::from_diag(&Matrix::from_json(&init.sigma)?);
            let state = DiagState::new(m, e, f, sigma)?.with_prec(*prec);
            let outcome = diag::diag_solve(
                state,
                &DiagSolveOptions { max_iter: *iters, target: rug::Float::new(*prec) },
            )?;
            let digits = IterationTrace::render_digits(*prec);
            let text = match format {
                Format::Csv => trace_csv(&outcome.trace, *prec),
                Format::Json => {
                    let doc = serde_json::json!({
                        "meta": { "solver": "refine", "precision_bits": prec },
                        "trace": outcome.trace.to_json_value(digits),
                    });
                    format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
                }
            };
            emit(out.as_ref(), &text)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("simdiag: {err}");
            ExitCode::FAILURE
        }
    }
}
