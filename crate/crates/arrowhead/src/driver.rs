//! End-to-end drivers: the domain-decomposition solver and the single-domain
//! baseline it is measured against.
//!
//! `dd_factor` runs the pipeline partition → classify → group → layout →
//! split → per-subdomain factor + Schur → assemble → block symbolic → block
//! numeric, with wall timing and accounted memory tracked per phase. Schur
//! workspaces are released before the interface numeric phase; interior
//! factors are retained for the solve. `baseline_factor` applies the same
//! LDLᵀ kernel to the whole matrix under a fill-reducing ordering, with
//! identical accounting rules, so memory and time comparisons are
//! apples-to-apples.
//!
//! Subdomain stages run concurrently across parts when `threads > 1`;
//! results are accumulated in ascending part order, so solutions and
//! accounted memory are bit-identical at any thread count.

use crate::decompose::{
    build_layout, classify, group_interface, partition_with, ArrowheadLayout, DecomposeError,
    SeedRule,
};
use crate::dense::DenseMatrix;
use crate::interface::{
    block_numeric, block_solve, block_symbolic_with, BlockLDLFactor, BlockOrderRule,
    InterfaceAssembler, InterfaceError,
};
use crate::ldl::SparseLdlt;
use crate::order::FillOrdering;
use crate::scalar::Scalar;
use crate::sparse::{relative_residual, RectSparse, SymSparseMatrix};
use crate::stats::{MemLedger, Phase, SolveStats};
use crate::subdomain::{
    interior_recover, numeric_factor, schur_contribution, solve_factored, split_arrowhead,
    SubdomainError, SubdomainFactor,
};

/// Any failure raised by the driver pipeline.
#[derive(Debug)]
pub enum DriverError {
    Shape(&'static str),
    Decompose(DecomposeError),
    Subdomain(SubdomainError),
    Interface(InterfaceError),
}

impl std::fmt::Display for DriverError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DriverError::Shape(msg) => write!(f, "shape error: {msg}"),
            DriverError::Decompose(e) => write!(f, "decomposition failed: {e}"),
            DriverError::Subdomain(e) => write!(f, "subdomain stage failed: {e}"),
            DriverError::Interface(e) => write!(f, "interface stage failed: {e}"),
        }
    }
}

impl std::error::Error for DriverError {}

impl From<DecomposeError> for DriverError {
    fn from(e: DecomposeError) -> Self {
        DriverError::Decompose(e)
    }
}

impl From<SubdomainError> for DriverError {
    fn from(e: SubdomainError) -> Self {
        DriverError::Subdomain(e)
    }
}

impl From<InterfaceError> for DriverError {
    fn from(e: InterfaceError) -> Self {
        DriverError::Interface(e)
    }
}

/// Tuning knobs for [`dd_factor`].
#[derive(Debug, Clone)]
pub struct DdOptions {
    /// Number of subdomains; `None` picks [`default_n_parts`].
    pub n_parts: Option<usize>,
    /// Seed rule for the recursive-bisection partitioner.
    pub seed_rule: SeedRule,
    /// Elimination-order heuristic for the interface blocks.
    pub order_rule: BlockOrderRule,
    /// Worker threads for the subdomain stages; `0` reads
    /// `DD_SOLVER_THREADS`, defaulting to 1.
    pub threads: usize,
}

impl Default for DdOptions {
    fn default() -> Self {
        DdOptions {
            n_parts: None,
            seed_rule: SeedRule::default(),
            order_rule: BlockOrderRule::MinFill,
            threads: 0,
        }
    }
}

/// Part-count heuristic: `round(√n / 8)` clamped to `[2, 64]`.
pub fn default_n_parts(n: usize) -> usize {
    (((n as f64).sqrt() / 8.0).round() as usize).clamp(2, 64)
}

/// Resolve a requested thread count: explicit value, else the
/// `DD_SOLVER_THREADS` environment variable, else 1.
pub fn resolve_threads(requested: usize) -> usize {
    if requested > 0 {
        return requested;
    }
    std::env::var("DD_SOLVER_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
}

/// Ordered parallel map over `0..count`; sequential when `threads <= 1`.
fn par_map<R, F>(threads: usize, count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    if threads <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.min(count))
        .build()
        .expect("worker pool construction cannot fail");
    pool.install(|| {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    })
}

/// Everything needed to solve `A·X = B` for arbitrary `B` without
/// refactorizing: the layout, the retained interior factors and coupling
/// blocks, and the factored interface matrix.
#[derive(Debug)]
pub struct DDFactor<T: Scalar> {
    layout: ArrowheadLayout,
    factors: Vec<SubdomainFactor<T>>,
    a_ib: Vec<RectSparse<T>>,
    interface: BlockLDLFactor<T>,
    /// Interface position → original vertex id.
    ipos_to_old: Vec<u32>,
    threads: usize,
    n: usize,
    nnz: usize,
    pert_flags: u32,
}

impl<T: Scalar> DDFactor<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn n_parts(&self) -> usize {
        self.factors.len()
    }

    pub fn n_interface(&self) -> usize {
        self.layout.n_interface()
    }

    /// Perturbed pivots across all subdomain factors and the interface.
    pub fn pert_flags(&self) -> u32 {
        self.pert_flags
    }

    pub fn layout(&self) -> &ArrowheadLayout {
        &self.layout
    }

    pub fn interface(&self) -> &BlockLDLFactor<T> {
        &self.interface
    }

    pub fn accounted_bytes(&self) -> u64 {
        self.layout.accounted_bytes()
            + self.factors.iter().map(|f| f.accounted_bytes()).sum::<u64>()
            + self.a_ib.iter().map(|m| m.accounted_bytes()).sum::<u64>()
            + self.interface.accounted_bytes()
            + 4 * self.ipos_to_old.len() as u64
    }
}

/// Factor `A` with the domain-decomposition pipeline.
pub fn dd_factor<T: Scalar>(
    a: &SymSparseMatrix<T>,
    opts: &DdOptions,
) -> Result<(DDFactor<T>, SolveStats), DriverError> {
    let n = a.n();
    if n == 0 {
        return Err(DriverError::Shape("matrix must be non-empty"));
    }
    let threads = resolve_threads(opts.threads);
    let n_parts = opts.n_parts.unwrap_or_else(|| default_n_parts(n)).min(n);

    let mut led = MemLedger::with_resident(a.accounted_bytes());
    led.enter(Phase::Partition);
    let g = a.adjacency();
    led.alloc(g.accounted_bytes());
    let p = partition_with(&g, n_parts, opts.seed_rule)?;
    led.alloc(4 * n as u64);
    let c = classify(&g, &p);
    let class_ids: usize = (0..n_parts).map(|i| c.interior(i).len()).sum::<usize>()
        + c.interface().len()
        + (0..c.interface().len()).map(|i| c.signature(i).len()).sum::<usize>();
    led.alloc(4 * class_ids as u64);
    let grps = group_interface(&c);
    let grp_ids: usize = (0..grps.len())
        .map(|gi| grps.vertices(gi).len() + grps.signature(gi).len())
        .sum();
    led.alloc(4 * grp_ids as u64);
    let layout = build_layout(&g, &p, &c, &grps)?;
    led.alloc(layout.accounted_bytes());
    // The layout subsumes the graph, the part labels and the classification;
    // only the groups stay alive, for assembly metadata.
    led.release(g.accounted_bytes() + 4 * (n + class_ids) as u64);
    drop(g);
    drop(c);
    drop(p);

    led.enter(Phase::SubdomainFactor);
    let blocks = split_arrowhead(a, &layout)?;
    led.alloc(blocks.accounted_bytes());
    let a_ii = blocks.a_ii;
    let a_ib = blocks.a_ib;
    let a_bb = blocks.a_bb;
    let factors: Vec<SubdomainFactor<T>> = par_map(threads, n_parts, |i| {
        numeric_factor(&a_ii[i], layout.interior_vertices(i).to_vec())
    });
    led.alloc(factors.iter().map(|f| f.accounted_bytes()).sum());
    led.release(a_ii.iter().map(|m| m.accounted_bytes()).sum());
    drop(a_ii);

    // Schur contributions are computed in fixed-size waves and folded into
    // the interface sum immediately (ascending part order), so the transient
    // footprint is a few contributions, never all of them — and the ledger
    // stays identical at any thread count.
    led.enter(Phase::Schur);
    const SCHUR_WAVE: usize = 4;
    let mut asm = InterfaceAssembler::new(&grps);
    let mut s_bytes = asm.accounted_bytes();
    led.alloc(s_bytes);
    let part_ids: Vec<usize> = (0..n_parts).collect();
    for wave in part_ids.chunks(SCHUR_WAVE) {
        let contribs = par_map(threads, wave.len(), |wi| {
            let i = wave[wi];
            schur_contribution(&factors[i], &a_ib[i], &a_bb, &layout, i)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        let wave_bytes: u64 = contribs.iter().map(|c| c.accounted_bytes()).sum();
        led.alloc(wave_bytes);
        for c in &contribs {
            asm.add(c)?;
        }
        let grown = asm.accounted_bytes();
        led.alloc(grown - s_bytes);
        s_bytes = grown;
        led.release(wave_bytes);
    }
    led.release(a_bb.accounted_bytes());
    drop(a_bb);
    let s = asm.finish();
    led.release(4 * grp_ids as u64);
    drop(grps);

    led.enter(Phase::InterfaceSymbolic);
    let sym = block_symbolic_with(&s, opts.order_rule);
    let sym_ids: usize = 2 * s.n_groups()
        + (0..s.n_groups()).map(|e| sym.col_rows(e).len()).sum::<usize>()
        + 2 * sym.fill_blocks().len();
    led.alloc(4 * sym_ids as u64);

    led.enter(Phase::InterfaceNumeric);
    let s_bytes = s.accounted_bytes();
    led.release(s_bytes);
    let interface = block_numeric(s, &sym)?;
    led.alloc(interface.accounted_bytes());
    led.release(4 * sym_ids as u64);
    drop(sym);

    let n_interior = layout.n_interior();
    let ipos_to_old: Vec<u32> =
        (n_interior..n).map(|pos| layout.perm().old_index(pos) as u32).collect();
    led.alloc(4 * ipos_to_old.len() as u64);
    led.finish();

    let pert_flags = factors
        .iter()
        .map(|f| f.perturbed_pivots().len() as u32)
        .sum::<u32>()
        + interface.perturbed();
    let mut stats = SolveStats {
        n,
        nnz: a.nnz(),
        n_parts,
        n_interface: layout.n_interface(),
        pert_flags,
        ..SolveStats::default()
    };
    stats.absorb_ledger(&led);
    let f = DDFactor {
        layout,
        factors,
        a_ib,
        interface,
        ipos_to_old,
        threads,
        n,
        nnz: stats.nnz,
        pert_flags,
    };
    Ok((f, stats))
}

/// Solve `A·X = B` from a [`DDFactor`]. Multiple right-hand sides are
/// processed as one block.
pub fn dd_solve<T: Scalar>(
    f: &DDFactor<T>,
    b: &DenseMatrix<T>,
) -> Result<(DenseMatrix<T>, SolveStats), DriverError> {
    if b.rows() != f.n {
        return Err(DriverError::Shape("rhs rows must equal matrix dimension"));
    }
    let n = f.n;
    let k = b.cols();
    let n_b = f.layout.n_interface();
    let n_parts = f.factors.len();
    let width = |rows: usize| (rows * k) as u64 * T::WIDTH;

    let mut led = MemLedger::with_resident(f.accounted_bytes() + b.accounted_bytes());
    led.enter(Phase::Solve);

    // Condensation: g_b = b_b − Σ_i A_ibᵀ · (A_ii⁻¹ · b_i), accumulated in
    // ascending part order so any thread count yields identical bits.
    let w: Vec<DenseMatrix<T>> = par_map(f.threads, n_parts, |i| {
        let rows = f.factors[i].local_to_global();
        let b_i = DenseMatrix::from_fn(rows.len(), k, |r, j| b.at(rows[r] as usize, j));
        solve_factored(&f.factors[i], &b_i)
    });
    led.alloc(w.iter().map(|m| m.accounted_bytes()).sum());
    let mut acc = DenseMatrix::<T>::zeros(n_b, k);
    led.alloc(width(n_b));
    for i in 0..n_parts {
        f.a_ib[i].t_mul_add(&w[i], &mut acc);
    }
    let rhs_b =
        DenseMatrix::from_fn(n_b, k, |ip, j| b.at(f.ipos_to_old[ip] as usize, j) - acc.at(ip, j));
    led.alloc(width(n_b));
    led.release(width(n_b));
    drop(acc);
    led.release(w.iter().map(|m| m.accounted_bytes()).sum());
    drop(w);

    let x_b = block_solve(&f.interface, &rhs_b)?;
    led.alloc(width(n_b));
    led.release(width(n_b));
    drop(rhs_b);

    // Interior recovery, embarrassingly parallel across parts.
    let xi: Vec<DenseMatrix<T>> = par_map(f.threads, n_parts, |i| {
        let rows = f.factors[i].local_to_global();
        let b_i = DenseMatrix::from_fn(rows.len(), k, |r, j| b.at(rows[r] as usize, j));
        interior_recover(&f.factors[i], &f.a_ib[i], &x_b, &b_i)
    });
    led.alloc(xi.iter().map(|m| m.accounted_bytes()).sum());
    let mut x = DenseMatrix::<T>::zeros(n, k);
    led.alloc(width(n));
    for i in 0..n_parts {
        let rows = f.factors[i].local_to_global();
        for (r, &old) in rows.iter().enumerate() {
            x.row_mut(old as usize).copy_from_slice(xi[i].row(r));
        }
    }
    for ip in 0..n_b {
        x.row_mut(f.ipos_to_old[ip] as usize).copy_from_slice(x_b.row(ip));
    }
    led.release(xi.iter().map(|m| m.accounted_bytes()).sum());
    drop(xi);
    led.release(width(n_b));
    drop(x_b);
    led.finish();

    let mut stats = SolveStats {
        n,
        nnz: f.nnz,
        n_parts,
        n_interface: n_b,
        pert_flags: f.pert_flags,
        ..SolveStats::default()
    };
    stats.absorb_ledger(&led);
    Ok((x, stats))
}

/// Single-domain reference factor: one LDLᵀ of the whole matrix under a
/// fill-reducing ordering, same kernel and accounting as the subdomain path.
#[derive(Debug)]
pub struct BaselineFactor<T: Scalar> {
    ldlt: SparseLdlt<T>,
    nnz: usize,
}

impl<T: Scalar> BaselineFactor<T> {
    pub fn n(&self) -> usize {
        self.ldlt.n()
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn pert_flags(&self) -> u32 {
        self.ldlt.perturbed().len() as u32
    }

    pub fn ldlt(&self) -> &SparseLdlt<T> {
        &self.ldlt
    }

    pub fn accounted_bytes(&self) -> u64 {
        self.ldlt.accounted_bytes()
    }
}

/// Factor `A` as a single domain.
pub fn baseline_factor<T: Scalar>(
    a: &SymSparseMatrix<T>,
) -> Result<(BaselineFactor<T>, SolveStats), DriverError> {
    if a.n() == 0 {
        return Err(DriverError::Shape("matrix must be non-empty"));
    }
    let mut led = MemLedger::with_resident(a.accounted_bytes());
    led.enter(Phase::SubdomainFactor);
    let ldlt = SparseLdlt::factor(a, FillOrdering::Amd);
    led.alloc(ldlt.accounted_bytes());
    led.finish();
    let mut stats = SolveStats {
        n: a.n(),
        nnz: a.nnz(),
        n_parts: 1,
        n_interface: 0,
        pert_flags: ldlt.perturbed().len() as u32,
        ..SolveStats::default()
    };
    stats.absorb_ledger(&led);
    Ok((BaselineFactor { ldlt, nnz: stats.nnz }, stats))
}

/// Solve `A·X = B` from a [`BaselineFactor`].
pub fn baseline_solve<T: Scalar>(
    f: &BaselineFactor<T>,
    b: &DenseMatrix<T>,
) -> Result<(DenseMatrix<T>, SolveStats), DriverError> {
    if b.rows() != f.n() {
        return Err(DriverError::Shape("rhs rows must equal matrix dimension"));
    }
    let mut led = MemLedger::with_resident(f.accounted_bytes() + b.accounted_bytes());
    led.enter(Phase::Solve);
    // The kernel gathers into a permuted working copy, then scatters back.
    led.alloc(2 * b.accounted_bytes());
    let x = f.ldlt.solve(b);
    led.release(b.accounted_bytes());
    led.finish();
    let mut stats = SolveStats {
        n: f.n(),
        nnz: f.nnz,
        n_parts: 1,
        n_interface: 0,
        pert_flags: f.pert_flags(),
        ..SolveStats::default()
    };
    stats.absorb_ledger(&led);
    Ok((x, stats))
}

/// Fill `stats.residuals` with the componentwise relative backward error of
/// `x` against the original system.
pub fn record_residuals<T: Scalar>(
    stats: &mut SolveStats,
    a: &SymSparseMatrix<T>,
    x: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) where
    T::Real: Into<f64>,
{
    stats.residuals = relative_residual(a, x, b).into_iter().map(Into::into).collect();
}
