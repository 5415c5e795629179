//! Direct solver for large sparse symmetric (real or complex-symmetric)
//! linear systems based on non-overlapping domain decomposition: subdomain
//! interiors are eliminated independently with sparse LDLᵀ, their Schur
//! complements are assembled into a block-sparse interface matrix whose dense
//! blocks follow the interface group structure, and the interface system is
//! factored with a block LDLᵀ using Bunch-Kaufman pivoting restricted to
//! group diagonal blocks.

pub mod bk;
pub mod decompose;
pub mod dense;
pub mod driver;
pub mod interface;
pub mod ldl;
pub mod graph;
pub mod mm;
pub mod order;
pub mod problem;
pub mod scalar;
pub mod sparse;
pub mod stats;
pub mod subdomain;

pub use bk::DenseBk;
pub use driver::{
    baseline_factor, baseline_solve, dd_factor, dd_solve, default_n_parts, record_residuals,
    resolve_threads, BaselineFactor, DDFactor, DdOptions, DriverError,
};
pub use decompose::{build_layout, classify, group_interface, partition, partition_with, ArrowheadLayout, DecomposeError, InterfaceClassification, InterfaceGroups, Partition, SeedRule};
pub use dense::DenseMatrix;
pub use graph::Graph;
pub use interface::{
    assemble_interface, block_numeric, block_solve, block_symbolic, block_symbolic_with,
    BlockLDLFactor, BlockOrderRule, BlockSparseSym, BlockSymbolic, InterfaceAssembler,
    InterfaceError,
};
pub use mm::{read_dense, read_sym_sparse, sniff_field, write_dense, write_sym_sparse, MmError};
pub use order::{amd_order, FillOrdering, Permutation};
pub use problem::{array_problem, assemble, build_grid, element_matrices, point_source_rhs, sphere_material, HexMesh, InteriorMap, MaterialField, ProblemError};
pub use scalar::{Scalar, ScalarField};
pub use sparse::{relative_residual, RectSparse, SymSparseMatrix};
pub use stats::{MemLedger, Phase, SolveStats, PHASES};
pub use subdomain::{
    interior_recover, numeric_factor, schur_contribution, solve_factored, split_arrowhead,
    ArrowheadBlocks, SchurContribution, SubdomainError, SubdomainFactor,
};

/// Real scalar type used by the concrete solver aliases.
pub type Real = f64;
/// Complex scalar type (complex-symmetric systems).
pub type Complex = num_complex::Complex64;

pub type RealMatrix = SymSparseMatrix<Real>;
pub type ComplexMatrix = SymSparseMatrix<Complex>;
