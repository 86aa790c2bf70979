//! Sparse symmetric stiffness systems on the free degrees of freedom.
//!
//! The sparsity pattern, the element scatter map and the symbolic LDLᵀ
//! analysis depend only on the mesh and the supports, so they are computed
//! once per [`StiffnessSystem`]. Every numeric factorization is kept in a
//! [`FactoredStiffness`] that serves both the primal and the adjoint solve.

use std::collections::BTreeSet;

use sprs::errors::LinalgError;
use sprs::{CsMat, FillInReduction, SymmetryCheck};
use sprs_ldl::{Ldl, LdlNumeric, LdlSymbolic};

use crate::error::{Error, Result};

/// Relative residual every solve must meet.
pub const SOLVE_RTOL: f64 = 1e-10;

/// Pivots below this fraction of the largest pivot indicate a rigid-body mode.
const PIVOT_RTOL: f64 = 1e-12;

/// Maps global dofs (`2 * node + component`) to free-dof equations.
#[derive(Debug, Clone)]
pub struct DofMap {
    free_of: Vec<Option<usize>>,
    global_of: Vec<usize>,
}

impl DofMap {
    pub fn new(n_dofs: usize, constrained: &BTreeSet<usize>) -> Self {
        let mut free_of = vec![None; n_dofs];
        let mut global_of = Vec::with_capacity(n_dofs - constrained.len().min(n_dofs));
        for (g, slot) in free_of.iter_mut().enumerate() {
            if !constrained.contains(&g) {
                *slot = Some(global_of.len());
                global_of.push(g);
            }
        }
        Self { free_of, global_of }
    }

    pub fn n_dofs(&self) -> usize {
        self.free_of.len()
    }

    pub fn n_free(&self) -> usize {
        self.global_of.len()
    }

    pub fn free(&self, global: usize) -> Option<usize> {
        self.free_of[global]
    }

    pub fn reduce(&self, full: &[f64]) -> Vec<f64> {
        self.global_of.iter().map(|&g| full[g]).collect()
    }

    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_dofs()];
        for (&g, &v) in self.global_of.iter().zip(reduced) {
            full[g] = v;
        }
        full
    }
}

/// Fixed CSR pattern of the reduced stiffness matrix plus element scatter.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    dofs: DofMap,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    /// Per element, the CSR slot of each (row, col) pair of the 6x6 block;
    /// `usize::MAX` for pairs touching a constrained dof.
    scatter: Vec<[usize; 36]>,
    symbolic: LdlSymbolic<usize>,
}

impl StiffnessSystem {
    /// `element_dofs[e]` lists the six global dofs of element `e`.
    pub fn new(element_dofs: &[[usize; 6]], dofs: DofMap) -> Result<Self> {
        let n = dofs.n_free();
        if n == 0 {
            return Err(Error::Solver("no free degrees of freedom".into()));
        }
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for ed in element_dofs {
            for &gi in ed {
                if let Some(i) = dofs.free(gi) {
                    rows[i].extend(ed.iter().filter_map(|&gj| dofs.free(gj)));
                }
            }
        }
        // isolated dofs (no element) still need a diagonal slot
        for (i, r) in rows.iter_mut().enumerate() {
            r.insert(i);
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for r in &rows {
            indices.extend(r.iter().copied());
            indptr.push(indices.len());
        }
        let slot = |i: usize, j: usize| -> usize {
            let row = &indices[indptr[i]..indptr[i + 1]];
            indptr[i] + row.binary_search(&j).expect("pattern covers element block")
        };
        let scatter = element_dofs
            .iter()
            .map(|ed| {
                let mut s = [usize::MAX; 36];
                for a in 0..6 {
                    for b in 0..6 {
                        if let (Some(i), Some(j)) = (dofs.free(ed[a]), dofs.free(ed[b])) {
                            s[6 * a + b] = slot(i, j);
                        }
                    }
                }
                s
            })
            .collect();
        let pattern = CsMat::new((n, n), indptr.clone(), indices.clone(), vec![1.0; indices.len()]);
        let symbolic = Ldl::new()
            .check_symmetry(SymmetryCheck::DontCheckSymmetry)
            .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
            .symbolic(pattern.view());
        Ok(Self {
            dofs,
            indptr,
            indices,
            scatter,
            symbolic,
        })
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Assembles `Σ_e blocks[e]` into the fixed pattern. Accumulation runs
    /// in element order, so results are bitwise reproducible.
    pub fn assemble<'a>(&self, blocks: impl Iterator<Item = &'a [[f64; 6]; 6]>) -> CsMat<f64> {
        let mut data = vec![0.0; self.indices.len()];
        for (block, scatter) in blocks.zip(&self.scatter) {
            for a in 0..6 {
                for b in 0..6 {
                    let s = scatter[6 * a + b];
                    if s != usize::MAX {
                        data[s] += block[a][b];
                    }
                }
            }
        }
        let n = self.dofs.n_free();
        CsMat::new((n, n), self.indptr.clone(), self.indices.clone(), data)
    }

    /// Numeric LDLᵀ of an assembled matrix.
    pub fn factor(&self, matrix: CsMat<f64>) -> Result<FactoredStiffness> {
        let ldl = self
            .symbolic
            .clone()
            .factor(matrix.view())
            .map_err(|e| match e {
                LinalgError::SingularMatrix(info) => Error::InsufficientConstraints {
                    index: info.index,
                    pivot: 0.0,
                },
                other => Error::Solver(other.to_string()),
            })?;
        let d = ldl.d();
        let dmax = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if let Some((index, &pivot)) = d
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > PIVOT_RTOL * dmax))
        {
            return Err(Error::InsufficientConstraints { index, pivot });
        }
        Ok(FactoredStiffness {
            matrix,
            ldl,
            dofs: self.dofs.clone(),
        })
    }
}

/// An assembled reduced stiffness matrix and its factorization.
#[derive(Debug, Clone)]
pub struct FactoredStiffness {
    matrix: CsMat<f64>,
    ldl: LdlNumeric<f64, usize>,
    dofs: DofMap,
}

impl FactoredStiffness {
    pub fn matrix(&self) -> &CsMat<f64> {
        &self.matrix
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    /// `K · x` on the reduced system.
    pub fn apply_reduced(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            y[i] = row.iter().map(|(j, &v)| v * x[j]).sum();
        }
        y
    }

    /// Solves the reduced system with one step of iterative refinement when
    /// the first residual misses [`SOLVE_RTOL`].
    pub fn solve_reduced(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let bnorm = norm(rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        let mut x: Vec<f64> = self.ldl.solve(rhs.to_vec());
        for _ in 0..2 {
            let r: Vec<f64> = rhs
                .iter()
                .zip(self.apply_reduced(&x))
                .map(|(b, kx)| b - kx)
                .collect();
            let rel = norm(&r) / bnorm;
            if !rel.is_finite() {
                return Err(Error::Solver("non-finite residual".into()));
            }
            if rel <= SOLVE_RTOL {
                return Ok(x);
            }
            let dx: Vec<f64> = self.ldl.solve(r);
            x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
        }
        let r: Vec<f64> = rhs
            .iter()
            .zip(self.apply_reduced(&x))
            .map(|(b, kx)| b - kx)
            .collect();
        let rel = norm(&r) / bnorm;
        if rel <= SOLVE_RTOL {
            Ok(x)
        } else {
            Err(Error::Solver(format!("relative residual {rel:e} exceeds {SOLVE_RTOL:e}")))
        }
    }

    /// Solves with a full-length right-hand side; constrained entries of the
    /// result are zero and constrained entries of `rhs` are ignored.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let x = self.solve_reduced(&self.dofs.reduce(rhs))?;
        Ok(self.dofs.expand(&x))
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
