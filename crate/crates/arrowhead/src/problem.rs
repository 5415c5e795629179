//! Scalable test-problem generation: scalar Helmholtz on a structured
//! hexahedral grid with zero-Dirichlet outer boundary.
//!
//! Two families: a dielectric sphere embedded in a uniform background
//! (matrix-only, point-source excitations added separately) and a planar
//! source array in a uniform medium (one right-hand side per array element).
//! Assembly is deterministic — elements are visited in ascending cell index —
//! so repeated generation is bit-identical.

use std::collections::HashMap;

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::dense::DenseMatrix;
use crate::scalar::Scalar;
use crate::sparse::SymSparseMatrix;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("grid dimensions must be at least 2 nodes per axis, got {0}x{1}x{2}")]
    GridTooSmall(usize, usize, usize),
    #[error("grid spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("material field has {got} cells, mesh has {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("source node {0} is on the Dirichlet boundary or out of range")]
    BadSource(u32),
    #[error("a {rows}x{cols} array at spacing {spacing} does not fit inside the mesh interior")]
    ArrayDoesNotFit { rows: usize, cols: usize, spacing: usize },
    #[error(transparent)]
    Sparse(#[from] crate::sparse::SparseError),
}

/// Structured hexahedral grid: nodes at (i·h, j·h, k·h), x-fastest ids.
#[derive(Debug, Clone)]
pub struct HexMesh {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub h: f64,
}

impl HexMesh {
    #[inline]
    pub fn node_id(&self, i: usize, j: usize, k: usize) -> u32 {
        (i + self.nx * (j + self.ny * k)) as u32
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn cell_count(&self) -> usize {
        (self.nx - 1) * (self.ny - 1) * (self.nz - 1)
    }

    pub fn interior_count(&self) -> usize {
        (self.nx - 2) * (self.ny - 2) * (self.nz - 2)
    }

    /// Corner nodes of cell (ci,cj,ck); local corner index a + 2b + 4c for
    /// offsets (a,b,c) along (x,y,z).
    pub fn cell_corners(&self, ci: usize, cj: usize, ck: usize) -> [u32; 8] {
        let mut out = [0u32; 8];
        for (l, slot) in out.iter_mut().enumerate() {
            let (a, b, c) = (l & 1, (l >> 1) & 1, (l >> 2) & 1);
            *slot = self.node_id(ci + a, cj + b, ck + c);
        }
        out
    }

    pub fn node_ijk(&self, id: u32) -> (usize, usize, usize) {
        let id = id as usize;
        (id % self.nx, (id / self.nx) % self.ny, id / (self.nx * self.ny))
    }

    pub fn is_boundary(&self, id: u32) -> bool {
        let (i, j, k) = self.node_ijk(id);
        i == 0 || j == 0 || k == 0 || i == self.nx - 1 || j == self.ny - 1 || k == self.nz - 1
    }
}

pub fn build_grid(nx: usize, ny: usize, nz: usize, h: f64) -> Result<HexMesh, ProblemError> {
    if nx < 2 || ny < 2 || nz < 2 {
        return Err(ProblemError::GridTooSmall(nx, ny, nz));
    }
    if !(h > 0.0) {
        return Err(ProblemError::BadSpacing(h));
    }
    Ok(HexMesh { nx, ny, nz, h })
}

/// Per-cell relative permittivity.
#[derive(Debug, Clone)]
pub struct MaterialField<T> {
    pub eps: Vec<T>,
}

/// Cells whose centroid lies within `radius` of `center` get `eps_in`;
/// everything else is background (1).
pub fn sphere_material<T: Scalar>(
    mesh: &HexMesh,
    center: [f64; 3],
    radius: f64,
    eps_in: T,
) -> MaterialField<T> {
    let mut eps = Vec::with_capacity(mesh.cell_count());
    for ck in 0..mesh.nz - 1 {
        for cj in 0..mesh.ny - 1 {
            for ci in 0..mesh.nx - 1 {
                let cx = (ci as f64 + 0.5) * mesh.h;
                let cy = (cj as f64 + 0.5) * mesh.h;
                let cz = (ck as f64 + 0.5) * mesh.h;
                let d2 = (cx - center[0]).powi(2)
                    + (cy - center[1]).powi(2)
                    + (cz - center[2]).powi(2);
                eps.push(if d2 <= radius * radius { eps_in } else { T::one() });
            }
        }
    }
    MaterialField { eps }
}

/// Gauss–Legendre points and weights on [0,1].
fn gauss_1d(order: usize) -> Vec<(f64, f64)> {
    match order {
        2 => {
            let d = 1.0 / (2.0 * 3.0f64.sqrt());
            vec![(0.5 - d, 0.5), (0.5 + d, 0.5)]
        }
        3 => {
            let p = (3.0f64 / 5.0).sqrt() / 2.0;
            vec![(0.5 - p, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + p, 5.0 / 18.0)]
        }
        _ => panic!("unsupported quadrature order {order}"),
    }
}

/// Element stiffness and mass (real parts) for a cube cell of side `h`,
/// integrated with an `order`-point tensor Gauss rule.
pub fn element_stiffness_mass(h: f64, order: usize) -> (DenseMatrix<f64>, DenseMatrix<f64>) {
    let pts = gauss_1d(order);
    let mut ke = DenseMatrix::<f64>::zeros(8, 8);
    let mut me = DenseMatrix::<f64>::zeros(8, 8);
    let mut n = [0.0f64; 8];
    let mut g = [[0.0f64; 3]; 8];
    for &(gx, wx) in &pts {
        for &(gy, wy) in &pts {
            for &(gz, wz) in &pts {
                let w = wx * wy * wz;
                for (a, (na, ga)) in n.iter_mut().zip(g.iter_mut()).enumerate() {
                    let bits = [a & 1, (a >> 1) & 1, (a >> 2) & 1];
                    let t = [gx, gy, gz];
                    let f = |d: usize| if bits[d] == 1 { t[d] } else { 1.0 - t[d] };
                    let df = |d: usize| if bits[d] == 1 { 1.0 } else { -1.0 };
                    *na = f(0) * f(1) * f(2);
                    *ga = [df(0) * f(1) * f(2), f(0) * df(1) * f(2), f(0) * f(1) * df(2)];
                }
                for a in 0..8 {
                    for b in 0..8 {
                        let grad =
                            g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2];
                        // ∫∇N·∇N over the cell scales as h; ∫N·N as h³
                        *ke.at_mut(a, b) += w * grad * h;
                        *me.at_mut(a, b) += w * n[a] * n[b] * h * h * h;
                    }
                }
            }
        }
    }
    (ke, me)
}

/// E = K_e − k²·eps·M_e for one trilinear hexahedral element.
pub fn element_matrices<T: Scalar>(h: f64, eps: T, k: f64) -> Result<DenseMatrix<T>, ProblemError> {
    if !(h > 0.0) {
        return Err(ProblemError::BadSpacing(h));
    }
    let (ke, me) = element_stiffness_mass(h, 2);
    let kk = T::from_real(real_of::<T>(k * k));
    Ok(DenseMatrix::from_fn(8, 8, |a, b| {
        T::from_real(real_of::<T>(ke.at(a, b))) - kk * eps * T::from_real(real_of::<T>(me.at(a, b)))
    }))
}

#[inline]
fn real_of<T: Scalar>(v: f64) -> T::Real {
    <T::Real as num_traits::FromPrimitive>::from_f64(v).unwrap()
}

/// Interior-unknown ↔ mesh-node correspondence left after eliminating the
/// zero-Dirichlet boundary.
#[derive(Debug, Clone)]
pub struct InteriorMap {
    interior_to_node: Vec<u32>,
    node_to_interior: Vec<u32>,
}

impl InteriorMap {
    fn build(mesh: &HexMesh) -> InteriorMap {
        let mut interior_to_node = Vec::with_capacity(mesh.interior_count());
        let mut node_to_interior = vec![u32::MAX; mesh.node_count()];
        for k in 1..mesh.nz - 1 {
            for j in 1..mesh.ny - 1 {
                for i in 1..mesh.nx - 1 {
                    let id = mesh.node_id(i, j, k);
                    node_to_interior[id as usize] = interior_to_node.len() as u32;
                    interior_to_node.push(id);
                }
            }
        }
        InteriorMap { interior_to_node, node_to_interior }
    }

    pub fn n_interior(&self) -> usize {
        self.interior_to_node.len()
    }

    pub fn node_of(&self, interior: u32) -> u32 {
        self.interior_to_node[interior as usize]
    }

    pub fn interior_of(&self, node: u32) -> Option<u32> {
        match self.node_to_interior.get(node as usize) {
            Some(&v) if v != u32::MAX => Some(v),
            _ => None,
        }
    }
}

/// Assemble the global system over interior nodes. At most 27 nonzeros per
/// row (the 3×3×3 node neighborhood of a structured grid).
pub fn assemble<T: Scalar>(
    mesh: &HexMesh,
    mat: &MaterialField<T>,
    k: f64,
) -> Result<(SymSparseMatrix<T>, InteriorMap), ProblemError> {
    if mat.eps.len() != mesh.cell_count() {
        return Err(ProblemError::SizeMismatch { got: mat.eps.len(), want: mesh.cell_count() });
    }
    let map = InteriorMap::build(mesh);
    let mut cache: HashMap<(u64, u64), DenseMatrix<T>> = HashMap::new();
    let mut triplets: Vec<(usize, usize, T)> = Vec::new();
    let mut cell = 0usize;
    for ck in 0..mesh.nz - 1 {
        for cj in 0..mesh.ny - 1 {
            for ci in 0..mesh.nx - 1 {
                let eps = mat.eps[cell];
                cell += 1;
                let key = (
                    eps.re().to_f64().unwrap().to_bits(),
                    eps.im().to_f64().unwrap().to_bits(),
                );
                let e = match cache.get(&key) {
                    Some(e) => e,
                    None => {
                        let e = element_matrices(mesh.h, eps, k)?;
                        cache.entry(key).or_insert(e)
                    }
                };
                let corners = mesh.cell_corners(ci, cj, ck);
                for a in 0..8 {
                    let Some(ia) = map.interior_of(corners[a]) else { continue };
                    for b in 0..=a {
                        let Some(ib) = map.interior_of(corners[b]) else { continue };
                        triplets.push((ia as usize, ib as usize, e.at(a, b)));
                    }
                }
            }
        }
    }
    let a = SymSparseMatrix::from_triplets(map.n_interior(), triplets)?;
    Ok((a, map))
}

/// One unit-vector column per source node.
pub fn point_source_rhs<T: Scalar>(
    map: &InteriorMap,
    sources: &[u32],
) -> Result<DenseMatrix<T>, ProblemError> {
    let n = map.n_interior();
    let mut b = DenseMatrix::zeros(n, sources.len());
    for (s, &node) in sources.iter().enumerate() {
        let idx = map.interior_of(node).ok_or(ProblemError::BadSource(node))?;
        *b.at_mut(idx as usize, s) = T::one();
    }
    Ok(b)
}

/// Uniform-material system with a centered rows×cols grid of point sources
/// on the mid-z node plane, `spacing` nodes apart.
pub fn array_problem<T: Scalar>(
    rows: usize,
    cols: usize,
    spacing: usize,
    dims: [usize; 3],
    k: f64,
) -> Result<(SymSparseMatrix<T>, DenseMatrix<T>, InteriorMap), ProblemError> {
    let [nx, ny, nz] = dims;
    let mesh = build_grid(nx, ny, nz, 1.0 / (nx.max(ny).max(nz) - 1) as f64)?;
    let fit = |count: usize, n: usize| -> Option<usize> {
        if count == 0 || spacing == 0 {
            return None;
        }
        let span = (count - 1) * spacing;
        let lo = (n - 1).checked_sub(span)? / 2;
        (lo >= 1 && lo + span <= n - 2).then_some(lo)
    };
    let (Some(x0), Some(y0)) = (fit(cols, nx), fit(rows, ny)) else {
        return Err(ProblemError::ArrayDoesNotFit { rows, cols, spacing });
    };
    let zmid = (nz - 1) / 2;
    if zmid == 0 || zmid >= nz - 1 {
        return Err(ProblemError::ArrayDoesNotFit { rows, cols, spacing });
    }
    let mut sources = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            sources.push(mesh.node_id(x0 + c * spacing, y0 + r * spacing, zmid));
        }
    }
    let mat = MaterialField { eps: vec![T::one(); mesh.cell_count()] };
    let (a, map) = assemble(&mesh, &mat, k)?;
    let b = point_source_rhs(&map, &sources)?;
    Ok((a, b, map))
}
