//! Thin wrapper over faer's sparse direct solvers: symmetric systems with
//! some unknowns prescribed (Dirichlet rows eliminated), several right-hand
//! sides at once.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("sparse matrix assembly failed: {0}")]
    Assembly(String),
    #[error("factorization failed ({0}); the constrained system is singular")]
    Singular(String),
    #[error("solution is not finite")]
    NonFinite,
    #[error("relative residual {0:e} above tolerance {1:e}")]
    Residual(f64, f64),
}

/// Symmetric n×n matrix collected as (row, col, value) entries. Repeated
/// entries are summed.
#[derive(Debug, Clone, Default)]
pub struct SymMatrix {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SymMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i, j, v));
    }

    /// Adds v at (i, j) and (j, i); on the diagonal only once.
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i, j, v));
        if i != j {
            self.entries.push((j, i, v));
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// xᵀAy
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, j, v)| x[i] * v * y[j]).sum()
    }

    /// Entries merged and sorted by (row, col).
    pub fn compressed(&self) -> Vec<(usize, usize, f64)> {
        let mut e = self.entries.clone();
        e.sort_by_key(|a| (a.0, a.1));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(e.len());
        for (i, j, v) in e {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.iter().filter(|e| e.0 == i && e.1 == j).map(|e| e.2).sum()
    }
}

pub const RESIDUAL_TOL: f64 = 1e-10;

// relative residual accepted by every solve in the process; the pipeline
// sets it from its configuration
static RESIDUAL_LIMIT: AtomicU64 = AtomicU64::new(0x3DDB7CDFD9D7BDBB);

pub fn residual_tolerance() -> f64 {
    f64::from_bits(RESIDUAL_LIMIT.load(Ordering::Relaxed))
}

pub fn set_residual_tolerance(t: f64) {
    RESIDUAL_LIMIT.store(t.to_bits(), Ordering::Relaxed);
}

/// Solves A x = b for the free unknowns, with `fixed[i] = Some(values)`
/// prescribing unknown i in every right-hand-side column. `rhs` holds one
/// column per entry of the inner arrays; pass zeros for a homogeneous
/// system. Returns the full solution, fixed entries included.
pub fn solve_dirichlet<const C: usize>(a: &SymMatrix, fixed: &[Option<[f64; C]>], rhs: Option<&[[f64; C]]>) -> Result<Vec<[f64; C]>, SolveError> {
    let n = a.n;
    assert_eq!(fixed.len(), n);
    let mut free_index = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        if fixed[i].is_none() {
            free_index[i] = free.len();
            free.push(i);
        }
    }
    let nf = free.len();
    let mut out: Vec<[f64; C]> = (0..n).map(|i| fixed[i].unwrap_or([0.0; C])).collect();
    if nf == 0 {
        return Ok(out);
    }
    let mut b = Mat::<f64>::zeros(nf, C);
    if let Some(r) = rhs {
        for (k, &i) in free.iter().enumerate() {
            for c in 0..C {
                b[(k, c)] = r[i][c];
            }
        }
    }
    let mut trip = Vec::with_capacity(a.entries.len());
    for &(i, j, v) in &a.entries {
        let fi = free_index[i];
        if fi == usize::MAX {
            continue;
        }
        match fixed[j] {
            Some(val) => {
                for c in 0..C {
                    b[(fi, c)] -= v * val[c];
                }
            }
            None => trip.push(Triplet::new(fi, free_index[j], v)),
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &trip).map_err(|e| SolveError::Assembly(format!("{e:?}")))?;
    let x = match mat.sp_cholesky(Side::Lower) {
        Ok(llt) => llt.solve(&b),
        Err(chol_err) => {
            let lu = mat.sp_lu().map_err(|e| SolveError::Singular(format!("cholesky: {chol_err:?}; lu: {e:?}")))?;
            lu.solve(&b)
        }
    };
    // residual check on the reduced system
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let mut ax = Mat::<f64>::zeros(nf, C);
    for t in &trip {
        for c in 0..C {
            ax[(t.row, c)] += t.val * x[(t.col, c)];
        }
    }
    for k in 0..nf {
        for c in 0..C {
            let xv = x[(k, c)];
            if !xv.is_finite() {
                return Err(SolveError::NonFinite);
            }
            num = num.max((ax[(k, c)] - b[(k, c)]).abs());
            den = den.max(b[(k, c)].abs());
        }
    }
    let scale = if den > 0.0 { den } else { 1.0 };
    let limit = residual_tolerance();
    if num / scale > limit {
        return Err(SolveError::Residual(num / scale, limit));
    }
    for (k, &i) in free.iter().enumerate() {
        for c in 0..C {
            out[i][c] = x[(k, c)];
        }
    }
    Ok(out)
}
