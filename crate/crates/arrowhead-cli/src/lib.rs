//! Benchmark harness behind the `arrowhead` binary: problem sweeps, method
//! runs, CSV/plot-data emission. Everything is callable as a library so the
//! determinism contract (byte-identical CSV modulo wall-time columns) can be
//! tested in-process.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use arrowhead::{
    assemble, baseline_factor, baseline_solve, build_grid, dd_factor, dd_solve, point_source_rhs,
    read_dense, read_sym_sparse, record_residuals, relative_residual, sniff_field,
    sphere_material, write_dense, write_sym_sparse, DdOptions, DenseMatrix, DriverError, MmError,
    Scalar, ScalarField, SolveStats, SymSparseMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact benchmark CSV header; consumers key on these names.
pub const CSV_HEADER: &str =
    "problem,n,nnz,n_parts,n_interface,rhs,method,phase,peak_mem_bytes,wall_s,relres_max,pert_flags,status";

/// Column indices of the wall-time fields (excluded from byte-determinism).
pub const WALL_COLUMNS: [usize; 1] = [9];

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or unwritable files → exit code 2.
    Io(String),
    /// Solution residual above the configured threshold → exit code 3.
    Residual { max: f64, threshold: f64 },
    /// Anything else → exit code 1.
    Other(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Residual { max, threshold } => {
                write!(f, "residual {max:.3e} exceeds threshold {threshold:.3e}")
            }
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 2,
            CliError::Residual { .. } => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<MmError> for CliError {
    fn from(e: MmError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DriverError> for CliError {
    fn from(e: DriverError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<arrowhead::ProblemError> for CliError {
    fn from(e: arrowhead::ProblemError) -> Self {
        CliError::Other(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Sphere,
    Array,
    Mtx,
}

impl ProblemKind {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "sphere" => Ok(ProblemKind::Sphere),
            "array" => Ok(ProblemKind::Array),
            "mtx" => Ok(ProblemKind::Mtx),
            other => Err(format!("unknown problem '{other}' (use sphere|array|mtx)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dd,
    Baseline,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Dd => "dd",
            Method::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Dd,
    Baseline,
    Both,
}

impl MethodChoice {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "dd" => Ok(MethodChoice::Dd),
            "baseline" => Ok(MethodChoice::Baseline),
            "both" => Ok(MethodChoice::Both),
            other => Err(format!("unknown method '{other}' (use dd|baseline|both)")),
        }
    }

    fn methods(self) -> &'static [Method] {
        match self {
            MethodChoice::Dd => &[Method::Dd],
            MethodChoice::Baseline => &[Method::Baseline],
            MethodChoice::Both => &[Method::Dd, Method::Baseline],
        }
    }
}

/// Subdomain count: explicit or the driver heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartChoice {
    Auto,
    Fixed(usize),
}

impl PartChoice {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(PartChoice::Auto);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&p| p >= 1)
            .map(PartChoice::Fixed)
            .ok_or_else(|| format!("parts must be 'auto' or a positive integer, got '{s}'"))
    }

    fn option(self) -> Option<usize> {
        match self {
            PartChoice::Auto => None,
            PartChoice::Fixed(p) => Some(p),
        }
    }
}

/// Full harness configuration shared by `gen`, `solve` and `bench`.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub problem: ProblemKind,
    /// Grid nodes per axis, one sweep point each (sphere/array).
    pub sizes: Vec<usize>,
    /// Input files (mtx problem: matrix [rhs] pairs or a matrix per point).
    pub files: Vec<PathBuf>,
    pub parts: PartChoice,
    /// RHS count; defaults to 200 for sphere, rows×cols for array.
    pub rhs: Option<usize>,
    pub wavenumber: f64,
    pub eps_contrast: f64,
    pub method: MethodChoice,
    pub threads: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub plot_data: Option<PathBuf>,
    pub repeat: usize,
    /// Residual acceptance threshold; `None` picks 1e-10 (SPD) or 1e-8
    /// (indefinite / file input).
    pub threshold: Option<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            problem: ProblemKind::Sphere,
            sizes: vec![],
            files: vec![],
            parts: PartChoice::Auto,
            rhs: None,
            wavenumber: 0.0,
            eps_contrast: 4.0,
            method: MethodChoice::Both,
            threads: 0,
            seed: 42,
            out: None,
            plot_data: None,
            repeat: 1,
            threshold: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let points = match self.problem {
            ProblemKind::Mtx => self.files.len(),
            _ => self.sizes.len(),
        };
        if points == 0 {
            return Err(CliError::Other(
                "empty sweep: give --sizes for sphere/array or --files for mtx".into(),
            ));
        }
        if self.rhs == Some(0) {
            return Err(CliError::Other("rhs count must be at least 1".into()));
        }
        if self.repeat == 0 {
            return Err(CliError::Other("repeat must be at least 1".into()));
        }
        Ok(())
    }

    fn threshold_for(&self, indefinite: bool) -> f64 {
        self.threshold.unwrap_or(if indefinite { 1e-8 } else { 1e-10 })
    }
}

/// Array excitation grid (Fig-2-style): 10 × 20 sources, one RHS each.
pub const ARRAY_ROWS: usize = 10;
pub const ARRAY_COLS: usize = 20;

/// A generated or loaded sweep instance.
pub struct Instance<T: Scalar> {
    pub name: String,
    pub a: SymSparseMatrix<T>,
    pub b: DenseMatrix<T>,
    pub threshold: f64,
}

/// Deterministically sample `count` distinct interior nodes.
fn sample_sources(map: &arrowhead::InteriorMap, count: usize, seed: u64) -> Vec<u32> {
    let n = map.n_interior();
    let count = count.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let idx = rng.gen_range(0..n) as u32;
        if seen.insert(idx) {
            out.push(map.node_of(idx));
        }
    }
    out
}

/// Build the sphere instance for `size` grid nodes per axis.
pub fn sphere_instance(cfg: &BenchConfig, size: usize) -> Result<Instance<f64>, CliError> {
    let h = 1.0 / (size.max(2) - 1) as f64;
    let mesh = build_grid(size, size, size, h)?;
    let mat = sphere_material(&mesh, [0.5, 0.5, 0.5], 0.3, cfg.eps_contrast);
    let (a, map) = assemble(&mesh, &mat, cfg.wavenumber)?;
    let sources = sample_sources(&map, cfg.rhs.unwrap_or(200), cfg.seed);
    let b = point_source_rhs(&map, &sources)?;
    Ok(Instance {
        name: format!("sphere_s{size}"),
        a,
        b,
        threshold: cfg.threshold_for(cfg.wavenumber > 0.0),
    })
}

/// Build the source-array instance for `size` grid nodes per axis.
pub fn array_instance(cfg: &BenchConfig, size: usize) -> Result<Instance<f64>, CliError> {
    let span = ARRAY_COLS.max(ARRAY_ROWS) - 1;
    let spacing = ((size.saturating_sub(3)) / span).max(1);
    let (a, b, _map) = arrowhead::array_problem::<f64>(
        ARRAY_ROWS,
        ARRAY_COLS,
        spacing,
        [size, size, size],
        cfg.wavenumber,
    )?;
    Ok(Instance {
        name: format!("array_s{size}"),
        a,
        b,
        threshold: cfg.threshold_for(cfg.wavenumber > 0.0),
    })
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "mtx".into())
}

/// Default RHS for a matrix loaded without one: a single column of ones.
fn ones_rhs<T: Scalar>(n: usize, k: usize) -> DenseMatrix<T> {
    DenseMatrix::from_fn(n, k, |_, _| T::one())
}

/// One benchmark CSV row. Wall-time fields are the only nondeterministic
/// content; everything else is reproducible bit-for-bit.
#[derive(Debug, Clone)]
pub struct Row {
    pub problem: String,
    pub n: String,
    pub nnz: String,
    pub n_parts: String,
    pub n_interface: String,
    pub rhs: String,
    pub method: String,
    pub phase: String,
    pub peak_mem_bytes: String,
    pub wall_s: String,
    pub relres_max: String,
    pub pert_flags: String,
    pub status: String,
}

impl Row {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.problem,
            self.n,
            self.nnz,
            self.n_parts,
            self.n_interface,
            self.rhs,
            self.method,
            self.phase,
            self.peak_mem_bytes,
            self.wall_s,
            self.relres_max,
            self.pert_flags,
            self.status
        )
    }

    fn to_plot(&self) -> String {
        let dash = |s: &str| if s.is_empty() { "-".to_string() } else { s.to_string() };
        format!(
            "{} {} {} {} {} {} {} {} {} {} {} {} {}",
            dash(&self.problem),
            dash(&self.n),
            dash(&self.nnz),
            dash(&self.n_parts),
            dash(&self.n_interface),
            dash(&self.rhs),
            dash(&self.method),
            dash(&self.phase),
            dash(&self.peak_mem_bytes),
            dash(&self.wall_s),
            dash(&self.relres_max),
            dash(&self.pert_flags),
            dash(&self.status)
        )
    }

    fn error(problem: &str, n: usize, rhs: usize, method: &str, phase: &str, msg: String) -> Row {
        Row {
            problem: problem.into(),
            n: n.to_string(),
            nnz: String::new(),
            n_parts: String::new(),
            n_interface: String::new(),
            rhs: rhs.to_string(),
            method: method.into(),
            phase: phase.into(),
            peak_mem_bytes: String::new(),
            wall_s: String::new(),
            relres_max: String::new(),
            pert_flags: String::new(),
            status: format!("error:{}", sanitize(&msg)),
        }
    }
}

/// Status text must not break the CSV: strip separators and spaces.
fn sanitize(msg: &str) -> String {
    let flat: String = msg
        .chars()
        .map(|c| if c == ',' || c == '\n' || c == ' ' { '_' } else { c })
        .collect();
    flat.chars().take(60).collect()
}

fn fmt_wall(s: f64) -> String {
    format!("{s:.6e}")
}

fn fmt_relres(r: f64) -> String {
    format!("{r:.6e}")
}

/// Factor+solve one instance with one method; returns (factor, solve) stats
/// and the solution. Repeats `repeat` times keeping the minimum wall clocks.
fn run_method<T: Scalar>(
    inst: &Instance<T>,
    method: Method,
    cfg: &BenchConfig,
) -> Result<(SolveStats, SolveStats, DenseMatrix<T>), CliError>
where
    T::Real: Into<f64>,
{
    let mut best: Option<(SolveStats, SolveStats, DenseMatrix<T>)> = None;
    for _ in 0..cfg.repeat.max(1) {
        let (fs, mut ss, x) = match method {
            Method::Dd => {
                let opts = DdOptions {
                    n_parts: cfg.parts.option(),
                    threads: cfg.threads,
                    ..DdOptions::default()
                };
                let (f, fs) = dd_factor(&inst.a, &opts)?;
                let (x, ss) = dd_solve(&f, &inst.b)?;
                (fs, ss, x)
            }
            Method::Baseline => {
                let (f, fs) = baseline_factor(&inst.a)?;
                let (x, ss) = baseline_solve(&f, &inst.b)?;
                (fs, ss, x)
            }
        };
        record_residuals(&mut ss, &inst.a, &x, &inst.b);
        match &mut best {
            None => best = Some((fs, ss, x)),
            Some((bf, bs, _)) => {
                for i in 0..6 {
                    bf.phase_wall[i] = bf.phase_wall[i].min(fs.phase_wall[i]);
                    bs.phase_wall[i] = bs.phase_wall[i].min(ss.phase_wall[i]);
                }
            }
        }
    }
    Ok(best.expect("repeat >= 1"))
}

/// Run every configured method on one instance, appending rows. Returns the
/// dd/baseline factor peaks when both methods succeeded.
fn bench_instance<T: Scalar>(
    inst: &Instance<T>,
    cfg: &BenchConfig,
    rows: &mut Vec<Row>,
) -> Option<(u64, u64)>
where
    T::Real: Into<f64>,
{
    let k = inst.b.cols();
    let mut peaks = (None, None);
    for &method in cfg.method.methods() {
        match run_method(inst, method, cfg) {
            Ok((fs, ss, _x)) => {
                let relres = fmt_relres(ss.max_residual());
                let status =
                    if ss.max_residual() <= inst.threshold { "ok" } else { "residual_above_threshold" };
                let base = Row {
                    problem: inst.name.clone(),
                    n: fs.n.to_string(),
                    nnz: fs.nnz.to_string(),
                    n_parts: fs.n_parts.to_string(),
                    n_interface: fs.n_interface.to_string(),
                    rhs: k.to_string(),
                    method: method.name().into(),
                    phase: "factor".into(),
                    peak_mem_bytes: fs.factor_peak().to_string(),
                    wall_s: fmt_wall(fs.factor_wall()),
                    relres_max: relres.clone(),
                    pert_flags: fs.pert_flags.to_string(),
                    status: status.into(),
                };
                let mut solve_row = base.clone();
                solve_row.phase = "solve".into();
                solve_row.peak_mem_bytes = ss.phase_peak[5].to_string();
                solve_row.wall_s = fmt_wall(ss.solve_wall());
                match method {
                    Method::Dd => peaks.0 = Some(fs.factor_peak()),
                    Method::Baseline => peaks.1 = Some(fs.factor_peak()),
                }
                rows.push(base);
                rows.push(solve_row);
            }
            Err(e) => {
                rows.push(Row::error(
                    &inst.name,
                    inst.a.n(),
                    k,
                    method.name(),
                    "factor",
                    e.to_string(),
                ));
            }
        }
    }
    if let (Some(dd), Some(bl)) = peaks {
        let ratio = dd as f64 / bl as f64;
        rows.push(Row {
            problem: inst.name.clone(),
            n: inst.a.n().to_string(),
            nnz: inst.a.nnz().to_string(),
            n_parts: String::new(),
            n_interface: String::new(),
            rhs: k.to_string(),
            method: "both".into(),
            phase: "mem_ratio".into(),
            peak_mem_bytes: dd.to_string(),
            wall_s: String::new(),
            relres_max: format!("{ratio:.6}"),
            pert_flags: "0".into(),
            status: "info".into(),
        });
        return Some((dd, bl));
    }
    None
}

/// Everything `bench` produces, before touching the filesystem.
pub struct BenchOutput {
    pub csv: String,
    pub plot: String,
    pub warnings: Vec<String>,
}

/// Run the full sweep; pure in-memory so tests can diff outputs.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchOutput, CliError> {
    cfg.validate()?;
    let mut rows: Vec<Row> = Vec::new();
    match cfg.problem {
        ProblemKind::Sphere | ProblemKind::Array => {
            for &size in &cfg.sizes {
                let built = if cfg.problem == ProblemKind::Sphere {
                    sphere_instance(cfg, size)
                } else {
                    array_instance(cfg, size)
                };
                match built {
                    Ok(inst) => {
                        bench_instance(&inst, cfg, &mut rows);
                    }
                    Err(e) => {
                        let name = format!(
                            "{}_s{size}",
                            if cfg.problem == ProblemKind::Sphere { "sphere" } else { "array" }
                        );
                        rows.push(Row::error(&name, 0, 0, "-", "gen", e.to_string()));
                    }
                }
            }
        }
        ProblemKind::Mtx => {
            for chunk in cfg.files.chunks(2) {
                match load_instance(cfg, &chunk[0], chunk.get(1).map(|p| p.as_path())) {
                    Ok(LoadedInstance::Real(inst)) => {
                        bench_instance(&inst, cfg, &mut rows);
                    }
                    Ok(LoadedInstance::Complex(inst)) => {
                        bench_instance(&inst, cfg, &mut rows);
                    }
                    Err(e) => {
                        rows.push(Row::error(&file_stem(&chunk[0]), 0, 0, "-", "load", e.to_string()));
                    }
                }
            }
        }
    }
    let warnings = monotonicity_warnings(&rows);
    let mut csv = String::new();
    writeln!(csv, "{CSV_HEADER}").unwrap();
    let mut plot = String::new();
    writeln!(plot, "# {}", CSV_HEADER.replace(',', " ")).unwrap();
    for r in &rows {
        writeln!(csv, "{}", r.to_csv()).unwrap();
        writeln!(plot, "{}", r.to_plot()).unwrap();
    }
    Ok(BenchOutput { csv, plot, warnings })
}

/// Soft check: within a method, larger n should not shrink the factor peak.
fn monotonicity_warnings(rows: &[Row]) -> Vec<String> {
    let mut warnings = Vec::new();
    for method in ["dd", "baseline"] {
        let mut seen: Vec<(usize, u64)> = rows
            .iter()
            .filter(|r| r.method == method && r.phase == "factor" && r.status == "ok")
            .filter_map(|r| Some((r.n.parse().ok()?, r.peak_mem_bytes.parse().ok()?)))
            .collect();
        seen.sort();
        for w in seen.windows(2) {
            if w[1].1 < w[0].1 {
                warnings.push(format!(
                    "warning: {method} peak memory shrank from n={} ({} B) to n={} ({} B)",
                    w[0].0, w[0].1, w[1].0, w[1].1
                ));
            }
        }
    }
    warnings
}

/// A matrix/rhs pair loaded from Matrix Market files, field-dispatched.
pub enum LoadedInstance {
    Real(Instance<f64>),
    Complex(Instance<arrowhead::Complex>),
}

pub fn load_instance(
    cfg: &BenchConfig,
    matrix: &Path,
    rhs: Option<&Path>,
) -> Result<LoadedInstance, CliError> {
    let name = file_stem(matrix);
    let threshold = cfg.threshold_for(true);
    match sniff_field(matrix)? {
        ScalarField::Real => {
            let a: SymSparseMatrix<f64> = read_sym_sparse(matrix)?;
            let b = match rhs {
                Some(p) => read_dense(p)?,
                None => ones_rhs(a.n(), cfg.rhs.unwrap_or(1)),
            };
            check_rhs_shape(&a, &b)?;
            Ok(LoadedInstance::Real(Instance { name, a, b, threshold }))
        }
        ScalarField::Complex => {
            let a: SymSparseMatrix<arrowhead::Complex> = read_sym_sparse(matrix)?;
            let b = match rhs {
                Some(p) => read_dense(p)?,
                None => ones_rhs(a.n(), cfg.rhs.unwrap_or(1)),
            };
            check_rhs_shape(&a, &b)?;
            Ok(LoadedInstance::Complex(Instance { name, a, b, threshold }))
        }
    }
}

fn check_rhs_shape<T: Scalar>(
    a: &SymSparseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<(), CliError> {
    if b.rows() != a.n() {
        return Err(CliError::Other(format!(
            "rhs has {} rows but the matrix is {}x{}",
            b.rows(),
            a.n(),
            a.n()
        )));
    }
    Ok(())
}

/// `gen`: write each sweep point's system and RHS as Matrix Market files
/// under `--out` (a directory). Returns the written paths.
pub fn run_gen(cfg: &BenchConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    if cfg.problem == ProblemKind::Mtx {
        return Err(CliError::Other("gen needs a generated problem (sphere|array)".into()));
    }
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for &size in &cfg.sizes {
        let inst = if cfg.problem == ProblemKind::Sphere {
            sphere_instance(cfg, size)?
        } else {
            array_instance(cfg, size)?
        };
        let a_path = dir.join(format!("{}_A.mtx", inst.name));
        let b_path = dir.join(format!("{}_b.mtx", inst.name));
        write_sym_sparse(&a_path, &inst.a)?;
        write_dense(&b_path, &inst.b)?;
        written.push(a_path);
        written.push(b_path);
    }
    Ok(written)
}

/// `solve` result: the stats rows (header + factor + solve) and the residual
/// verdict the process exit code is derived from.
pub struct SolveOutput {
    pub csv: String,
    pub relres_max: f64,
    pub threshold: f64,
}

/// `solve`: read matrix + rhs, run one method, write the solution, report.
pub fn run_solve(cfg: &BenchConfig) -> Result<SolveOutput, CliError> {
    if cfg.files.is_empty() {
        return Err(CliError::Other("solve needs --files MATRIX [RHS]".into()));
    }
    if cfg.method == MethodChoice::Both {
        return Err(CliError::Other("solve runs one method; pass --method dd|baseline".into()));
    }
    let method = cfg.method.methods()[0];
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("x.mtx"));
    let loaded = load_instance(cfg, &cfg.files[0], cfg.files.get(1).map(|p| p.as_path()))?;
    match loaded {
        LoadedInstance::Real(inst) => solve_one(&inst, method, cfg, &out),
        LoadedInstance::Complex(inst) => solve_one(&inst, method, cfg, &out),
    }
}

fn solve_one<T: Scalar>(
    inst: &Instance<T>,
    method: Method,
    cfg: &BenchConfig,
    out: &Path,
) -> Result<SolveOutput, CliError>
where
    T::Real: Into<f64>,
{
    let (fs, ss, x) = run_method(inst, method, cfg)?;
    write_dense(out, &x)?;
    let mut rows = Vec::new();
    let relres = ss.max_residual();
    let status = if relres <= inst.threshold { "ok" } else { "residual_above_threshold" };
    rows.push(Row {
        problem: inst.name.clone(),
        n: fs.n.to_string(),
        nnz: fs.nnz.to_string(),
        n_parts: fs.n_parts.to_string(),
        n_interface: fs.n_interface.to_string(),
        rhs: inst.b.cols().to_string(),
        method: method.name().into(),
        phase: "factor".into(),
        peak_mem_bytes: fs.factor_peak().to_string(),
        wall_s: fmt_wall(fs.factor_wall()),
        relres_max: fmt_relres(relres),
        pert_flags: fs.pert_flags.to_string(),
        status: status.into(),
    });
    let mut solve_row = rows[0].clone();
    solve_row.phase = "solve".into();
    solve_row.peak_mem_bytes = ss.phase_peak[5].to_string();
    solve_row.wall_s = fmt_wall(ss.solve_wall());
    rows.push(solve_row);
    let mut csv = String::new();
    writeln!(csv, "{CSV_HEADER}").unwrap();
    for r in &rows {
        writeln!(csv, "{}", r.to_csv()).unwrap();
    }
    Ok(SolveOutput { csv, relres_max: relres, threshold: inst.threshold })
}

/// Strip the wall-time columns from a CSV for determinism comparison.
pub fn strip_wall_columns(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            fields
                .iter()
                .enumerate()
                .filter(|(i, _)| !WALL_COLUMNS.contains(i))
                .map(|(_, f)| *f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Convenience for tests and the residual checks: max relres of `x`.
pub fn max_relres<T: Scalar>(
    a: &SymSparseMatrix<T>,
    x: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> f64
where
    T::Real: Into<f64>,
{
    relative_residual(a, x, b).into_iter().map(Into::into).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> BenchConfig {
        BenchConfig {
            sizes: vec![6, 7],
            rhs: Some(3),
            threads: 1,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn header_is_pinned() {
        assert_eq!(
            CSV_HEADER,
            "problem,n,nnz,n_parts,n_interface,rhs,method,phase,peak_mem_bytes,wall_s,relres_max,pert_flags,status"
        );
        assert_eq!(CSV_HEADER.split(',').count(), 13);
        assert_eq!(CSV_HEADER.split(',').nth(WALL_COLUMNS[0]), Some("wall_s"));
    }

    #[test]
    fn bench_emits_rows_per_point_method_phase() {
        let out = run_bench(&tiny_cfg()).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        // 2 sizes × 2 methods × {factor,solve} + 2 ratio rows.
        assert_eq!(lines.len(), 1 + 2 * 2 * 2 + 2);
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 13, "bad row: {line}");
        }
        let ok_rows = lines[1..].iter().filter(|l| l.ends_with(",ok")).count();
        assert_eq!(ok_rows, 8);
        assert_eq!(out.plot.lines().count(), lines.len());
        assert!(out.plot.starts_with("# "));
    }

    #[test]
    fn ok_rows_meet_threshold() {
        let out = run_bench(&tiny_cfg()).unwrap();
        for line in out.csv.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f[12] == "ok" {
                let relres: f64 = f[10].parse().unwrap();
                assert!(relres <= 1e-10, "row over threshold: {line}");
            }
        }
    }

    #[test]
    fn csv_is_deterministic_modulo_wall_columns() {
        let cfg = tiny_cfg();
        let a = run_bench(&cfg).unwrap();
        let b = run_bench(&cfg).unwrap();
        assert_eq!(strip_wall_columns(&a.csv), strip_wall_columns(&b.csv));
        let mut threaded = cfg.clone();
        threaded.threads = 4;
        let c = run_bench(&threaded).unwrap();
        assert_eq!(strip_wall_columns(&a.csv), strip_wall_columns(&c.csv));
    }

    #[test]
    fn seed_changes_the_sphere_rhs() {
        let cfg = tiny_cfg();
        let mut other = cfg.clone();
        other.seed = 43;
        let i1 = sphere_instance(&cfg, 6).unwrap();
        let i2 = sphere_instance(&other, 6).unwrap();
        let mut differ = false;
        for i in 0..i1.b.rows() {
            for j in 0..i1.b.cols() {
                differ |= i1.b.at(i, j) != i2.b.at(i, j);
            }
        }
        assert!(differ);
    }

    #[test]
    fn array_instance_has_row_col_rhs() {
        let cfg = BenchConfig {
            problem: ProblemKind::Array,
            sizes: vec![24],
            ..BenchConfig::default()
        };
        let inst = array_instance(&cfg, 24).unwrap();
        assert_eq!(inst.b.cols(), ARRAY_ROWS * ARRAY_COLS);
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let cfg = BenchConfig { sizes: vec![], ..BenchConfig::default() };
        assert!(matches!(run_bench(&cfg), Err(CliError::Other(_))));
    }

    #[test]
    fn strip_wall_removes_only_wall() {
        let line = "a,1,2,3,4,5,m,f,100,9.9e-1,1e-12,0,ok";
        assert_eq!(strip_wall_columns(line), "a,1,2,3,4,5,m,f,100,1e-12,0,ok");
    }
}
