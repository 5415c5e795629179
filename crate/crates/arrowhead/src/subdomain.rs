//! Per-subdomain elimination: splitting the permuted matrix into arrowhead
//! blocks, sparse LDLᵀ of each interior block, Schur-complement contributions
//! onto the interface groups, and interior solution recovery.

use std::fmt;

use crate::decompose::ArrowheadLayout;
use crate::dense::DenseMatrix;
use crate::ldl::SparseLdlt;
use crate::order::FillOrdering;
use crate::scalar::Scalar;
use crate::sparse::{RectSparse, SparseError, SymSparseMatrix};

/// Column-panel width for the W = A_ii⁻¹·A_ib sweep; bounds the dense
/// workspace while keeping the products panel-sized.
pub const SCHUR_PANEL: usize = 64;

#[derive(Debug)]
pub enum SubdomainError {
    Shape(&'static str),
    /// An entry couples interiors of two different parts.
    CrossCoupling { row: usize, col: usize },
    Sparse(SparseError),
}

impl fmt::Display for SubdomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubdomainError::Shape(what) => write!(f, "shape mismatch: {what}"),
            SubdomainError::CrossCoupling { row, col } => {
                write!(f, "entry ({row},{col}) couples interiors of different parts")
            }
            SubdomainError::Sparse(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SubdomainError {}

impl From<SparseError> for SubdomainError {
    fn from(e: SparseError) -> Self {
        SubdomainError::Sparse(e)
    }
}

/// The arrowhead blocks of a matrix under a layout: one interior block and
/// one interior-to-interface coupling per part, plus the interface
/// self-coupling. `a_ib` columns are indexed by the global interface
/// ordering.
#[derive(Debug, Clone)]
pub struct ArrowheadBlocks<T: Scalar> {
    pub a_ii: Vec<SymSparseMatrix<T>>,
    pub a_ib: Vec<RectSparse<T>>,
    pub a_bb: SymSparseMatrix<T>,
}

impl<T: Scalar> ArrowheadBlocks<T> {
    pub fn accounted_bytes(&self) -> u64 {
        self.a_ii.iter().map(|m| m.accounted_bytes()).sum::<u64>()
            + self.a_ib.iter().map(|m| m.accounted_bytes()).sum::<u64>()
            + self.a_bb.accounted_bytes()
    }
}

/// Split `a` into arrowhead blocks. Every stored entry lands in exactly one
/// block, so reassembling the blocks under the layout permutation reproduces
/// the permuted matrix entry for entry.
pub fn split_arrowhead<T: Scalar>(
    a: &SymSparseMatrix<T>,
    layout: &ArrowheadLayout,
) -> Result<ArrowheadBlocks<T>, SubdomainError> {
    let n = a.n();
    if n != layout.n() {
        return Err(SubdomainError::Shape("matrix and layout dimensions differ"));
    }
    let n_parts = layout.n_parts();
    // Old id → (part, local interior index) or interface position.
    let mut part_of = vec![u32::MAX; n];
    let mut local_of = vec![0u32; n];
    for p in 0..n_parts {
        for (li, &v) in layout.interior_vertices(p).iter().enumerate() {
            part_of[v as usize] = p as u32;
            local_of[v as usize] = li as u32;
        }
    }
    let mut ii: Vec<Vec<(usize, usize, T)>> = vec![Vec::new(); n_parts];
    let mut ib: Vec<Vec<(usize, usize, T)>> = vec![Vec::new(); n_parts];
    let mut bb: Vec<(usize, usize, T)> = Vec::new();
    let (_, colptr, rowidx, values) = a.parts();
    for c in 0..n {
        for e in colptr[c]..colptr[c + 1] {
            let r = rowidx[e] as usize;
            let v = values[e];
            match (layout.interface_pos(r), layout.interface_pos(c)) {
                (None, None) => {
                    let (pr, pc) = (part_of[r], part_of[c]);
                    if pr != pc {
                        return Err(SubdomainError::CrossCoupling { row: r, col: c });
                    }
                    ii[pr as usize].push((local_of[r] as usize, local_of[c] as usize, v));
                }
                (Some(ir), None) => ib[part_of[c] as usize].push((local_of[c] as usize, ir, v)),
                (None, Some(ic)) => ib[part_of[r] as usize].push((local_of[r] as usize, ic, v)),
                (Some(ir), Some(ic)) => bb.push((ir, ic, v)),
            }
        }
    }
    let n_b = layout.n_interface();
    let mut a_ii = Vec::with_capacity(n_parts);
    let mut a_ib = Vec::with_capacity(n_parts);
    for p in 0..n_parts {
        let ni = layout.interior_range(p).len();
        a_ii.push(SymSparseMatrix::from_triplets(ni, ii[p].drain(..))?);
        a_ib.push(RectSparse::from_triplets(ni, n_b, ib[p].drain(..))?);
    }
    let a_bb = SymSparseMatrix::from_triplets(n_b, bb)?;
    Ok(ArrowheadBlocks { a_ii, a_ib, a_bb })
}

/// Sparse LDLᵀ of one interior block plus the local→global index map.
#[derive(Debug, Clone)]
pub struct SubdomainFactor<T: Scalar> {
    ldlt: SparseLdlt<T>,
    local_to_global: Vec<u32>,
}

impl<T: Scalar> SubdomainFactor<T> {
    pub fn n(&self) -> usize {
        self.ldlt.n()
    }

    /// Indices of pivots that required perturbation.
    pub fn perturbed_pivots(&self) -> &[u32] {
        self.ldlt.perturbed()
    }

    pub fn local_to_global(&self) -> &[u32] {
        &self.local_to_global
    }

    pub fn ldlt(&self) -> &SparseLdlt<T> {
        &self.ldlt
    }

    pub fn accounted_bytes(&self) -> u64 {
        self.ldlt.accounted_bytes() + self.local_to_global.len() as u64 * 4
    }
}

/// AMD-ordered sparse LDLᵀ of an interior block. Tiny pivots are perturbed
/// (relative threshold 1e-12) and flagged rather than failing.
pub fn numeric_factor<T: Scalar>(
    a_ii: &SymSparseMatrix<T>,
    local_to_global: Vec<u32>,
) -> SubdomainFactor<T> {
    assert_eq!(local_to_global.len(), a_ii.n(), "index map covers the block");
    SubdomainFactor { ldlt: SparseLdlt::factor(a_ii, FillOrdering::Amd), local_to_global }
}

/// x = A_ii⁻¹ · rhs, multi-column.
pub fn solve_factored<T: Scalar>(
    f: &SubdomainFactor<T>,
    rhs: &DenseMatrix<T>,
) -> DenseMatrix<T> {
    assert_eq!(rhs.rows(), f.n(), "rhs rows match interior size");
    f.ldlt.solve(rhs)
}

/// One subdomain's additive contribution to the interface matrix: dense
/// blocks per group pair (g ≤ h), at full group-pair shape.
#[derive(Debug, Clone)]
pub struct SchurContribution<T: Scalar> {
    blocks: Vec<(u32, u32, DenseMatrix<T>)>,
}

impl<T: Scalar> SchurContribution<T> {
    /// Build from explicit blocks; they must be keyed (g, h) with g ≤ h and
    /// sorted. Mainly for assembling synthetic interface matrices in tests.
    pub fn from_blocks(blocks: Vec<(u32, u32, DenseMatrix<T>)>) -> Self {
        assert!(blocks.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));
        assert!(blocks.iter().all(|(g, h, _)| g <= h));
        SchurContribution { blocks }
    }

    pub fn blocks(&self) -> &[(u32, u32, DenseMatrix<T>)] {
        &self.blocks
    }

    pub fn accounted_bytes(&self) -> u64 {
        self.blocks.iter().map(|(_, _, b)| b.accounted_bytes()).sum()
    }
}

/// S_i = (A_bb share) − A_ibᵀ · A_ii⁻¹ · A_ib for part `part`, evaluated on
/// the packed interface footprint with W formed in ≤[`SCHUR_PANEL`]-column
/// panels. The A_bb share gives this part the entries whose endpoint
/// signatures both contain `part`, weighted by 1/(number of sharing parts),
/// so the shares sum to A_bb exactly.
pub fn schur_contribution<T: Scalar>(
    f: &SubdomainFactor<T>,
    a_ib: &RectSparse<T>,
    a_bb: &SymSparseMatrix<T>,
    layout: &ArrowheadLayout,
    part: usize,
) -> Result<SchurContribution<T>, SubdomainError> {
    let n_b = layout.n_interface();
    if a_ib.rows() != f.n() || a_ib.cols() != n_b || a_bb.n() != n_b {
        return Err(SubdomainError::Shape("a_ib/a_bb dims do not match layout"));
    }
    let part = part as u32;
    // Footprint: interface positions whose signature contains this part.
    let mut foot = Vec::new();
    let mut foot_of = vec![u32::MAX; n_b];
    for ipos in 0..n_b {
        let g = layout.group_of_pos(ipos);
        if layout.group_signature(g).contains(&part) {
            foot_of[ipos] = foot.len() as u32;
            foot.push(ipos as u32);
        }
    }
    let nf = foot.len();
    let mut s_loc = DenseMatrix::<T>::zeros(nf, nf);

    // A_bb share on the footprint.
    let (_, colptr, rowidx, values) = a_bb.parts();
    for c in 0..n_b {
        let fc = foot_of[c];
        if fc == u32::MAX {
            continue;
        }
        let gc = layout.group_of_pos(c);
        for e in colptr[c]..colptr[c + 1] {
            let r = rowidx[e] as usize;
            let fr = foot_of[r];
            if fr == u32::MAX {
                continue;
            }
            let gr = layout.group_of_pos(r);
            let sharing = count_common(layout.group_signature(gr), layout.group_signature(gc));
            debug_assert!(sharing >= 1);
            let w = T::from_real(
                <T::Real as num_traits::FromPrimitive>::from_f64(1.0 / sharing as f64).unwrap(),
            );
            let v = values[e] * w;
            *s_loc.at_mut(fr as usize, fc as usize) += v;
            if r != c {
                *s_loc.at_mut(fc as usize, fr as usize) += v;
            }
        }
    }

    // Packed A_ib on the footprint columns.
    let ni = f.n();
    if ni > 0 && nf > 0 {
        let mut packed = Vec::new();
        for (j, &ipos) in foot.iter().enumerate() {
            let (rows, vals) = a_ib.col(ipos as usize);
            for (&r, &v) in rows.iter().zip(vals.iter()) {
                packed.push((r as usize, j, v));
            }
        }
        let a_ib_f = RectSparse::from_triplets(ni, nf, packed)?;
        // S_loc −= A_ib_fᵀ · (A_ii⁻¹ · A_ib_f), panel by panel.
        let mut lo = 0;
        while lo < nf {
            let hi = (lo + SCHUR_PANEL).min(nf);
            let mut panel = DenseMatrix::<T>::zeros(ni, hi - lo);
            for j in lo..hi {
                let (rows, vals) = a_ib_f.col(j);
                for (&r, &v) in rows.iter().zip(vals.iter()) {
                    *panel.at_mut(r as usize, j - lo) = v;
                }
            }
            let w = solve_factored(f, &panel);
            // y = A_ib_fᵀ·w into columns [lo, hi) of s_loc.
            let mut y = DenseMatrix::<T>::zeros(nf, hi - lo);
            a_ib_f.t_mul_add(&w, &mut y);
            for i in 0..nf {
                let yr = y.row(i);
                let sr = s_loc.row_mut(i);
                for j in lo..hi {
                    sr[j] -= yr[j - lo];
                }
            }
            lo = hi;
        }
    }

    // Scatter the footprint matrix into full-shape group-pair blocks.
    let mut blocks = Vec::new();
    let mut touched: Vec<u32> = foot.iter().map(|&ip| layout.group_of_pos(ip as usize) as u32).collect();
    touched.sort_unstable();
    touched.dedup();
    for (ti, &g) in touched.iter().enumerate() {
        for &h in &touched[ti..] {
            let (gr, hr) = (layout.group_range(g as usize), layout.group_range(h as usize));
            let g0 = gr.start - layout.n_interior(); // group start as interface position
            let h0 = hr.start - layout.n_interior();
            let mut blk = DenseMatrix::<T>::zeros(gr.len(), hr.len());
            let mut any = false;
            for lg in 0..gr.len() {
                let fg = foot_of[g0 + lg];
                if fg == u32::MAX {
                    continue;
                }
                for lh in 0..hr.len() {
                    let fh = foot_of[h0 + lh];
                    if fh == u32::MAX {
                        continue;
                    }
                    let v = s_loc.at(fg as usize, fh as usize);
                    *blk.at_mut(lg, lh) = v;
                    if !v.is_zero() {
                        any = true;
                    }
                }
            }
            if any || g == h {
                blocks.push((g, h, blk));
            }
        }
    }
    Ok(SchurContribution { blocks })
}

fn count_common(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// x_i = A_ii⁻¹ (b_i − A_ib · x_b), multi-column. `x_b` spans the full
/// global interface ordering.
pub fn interior_recover<T: Scalar>(
    f: &SubdomainFactor<T>,
    a_ib: &RectSparse<T>,
    x_b: &DenseMatrix<T>,
    b_i: &DenseMatrix<T>,
) -> DenseMatrix<T> {
    assert_eq!(b_i.rows(), f.n(), "b_i rows match interior size");
    assert_eq!(x_b.rows(), a_ib.cols(), "x_b rows match interface size");
    assert_eq!(x_b.cols(), b_i.cols(), "column counts agree");
    let mut rhs = b_i.clone();
    a_ib.mul_sub(x_b, &mut rhs);
    solve_factored(f, &rhs)
}
