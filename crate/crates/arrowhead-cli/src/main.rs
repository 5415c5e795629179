//! `arrowhead` binary: generate benchmark problems, solve systems from
//! Matrix Market files, and run method sweeps that emit CSV + plot data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use arrowhead_cli::{
    run_bench, run_gen, run_solve, BenchConfig, CliError, MethodChoice, PartChoice, ProblemKind,
};

#[derive(Parser)]
#[command(name = "arrowhead", version, about = "Domain-decomposition direct solver harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write Matrix Market system + RHS files for each sweep point.
    Gen(CommonArgs),
    /// Solve one system from files and write the solution.
    Solve(CommonArgs),
    /// Run the factor/solve sweep and emit CSV (and optional plot data).
    Bench(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Problem family: sphere | array | mtx.
    #[arg(long, default_value = "sphere")]
    problem: String,
    /// Grid nodes per axis, comma-separated (sphere/array sweeps).
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Input files for --problem mtx: MATRIX [RHS] per sweep point.
    #[arg(long, num_args = 1..)]
    files: Vec<PathBuf>,
    /// Subdomain count, or 'auto' for the built-in heuristic.
    #[arg(long, default_value = "auto")]
    parts: String,
    /// Right-hand-side count (default: 200 for sphere, array grid size).
    #[arg(long)]
    rhs: Option<usize>,
    /// Helmholtz wavenumber k; 0 gives the SPD problem.
    #[arg(long, default_value_t = 0.0)]
    wavenumber: f64,
    /// Relative permittivity inside the sphere.
    #[arg(long = "eps-contrast", default_value_t = 4.0)]
    eps_contrast: f64,
    /// Method: dd | baseline | both.
    #[arg(long, default_value = "both")]
    method: String,
    /// Worker threads; 0 reads DD_SOLVER_THREADS, defaulting to 1.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Seed for problem generation (source placement).
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output path: bench CSV, solve solution file, gen directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gnuplot-ready whitespace-separated copy of the bench rows.
    #[arg(long = "plot-data")]
    plot_data: Option<PathBuf>,
    /// Repeat runs, keeping the best wall times.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Residual acceptance threshold (default 1e-10 SPD, 1e-8 otherwise).
    #[arg(long)]
    threshold: Option<f64>,
}

impl CommonArgs {
    fn to_config(&self) -> Result<BenchConfig, CliError> {
        Ok(BenchConfig {
            problem: ProblemKind::parse(&self.problem).map_err(CliError::Other)?,
            sizes: self.sizes.clone(),
            files: self.files.clone(),
            parts: PartChoice::parse(&self.parts).map_err(CliError::Other)?,
            rhs: self.rhs,
            wavenumber: self.wavenumber,
            eps_contrast: self.eps_contrast,
            method: MethodChoice::parse(&self.method).map_err(CliError::Other)?,
            threads: self.threads,
            seed: self.seed,
            out: self.out.clone(),
            plot_data: self.plot_data.clone(),
            repeat: self.repeat,
            threshold: self.threshold,
        })
    }
}

fn dispatch(cmd: &Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Gen(args) => {
            let cfg = args.to_config()?;
            for path in run_gen(&cfg)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Cmd::Solve(args) => {
            let cfg = args.to_config()?;
            let out = run_solve(&cfg)?;
            print!("{}", out.csv);
            if out.relres_max > out.threshold {
                return Err(CliError::Residual { max: out.relres_max, threshold: out.threshold });
            }
            Ok(())
        }
        Cmd::Bench(args) => {
            let cfg = args.to_config()?;
            let out = run_bench(&cfg)?;
            for w in &out.warnings {
                eprintln!("{w}");
            }
            match &cfg.out {
                Some(path) => std::fs::write(path, &out.csv)?,
                None => print!("{}", out.csv),
            }
            if let Some(path) = &cfg.plot_data {
                std::fs::write(path, &out.plot)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
