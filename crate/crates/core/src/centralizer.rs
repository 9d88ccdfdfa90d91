//! Centralizer triviality of finite matrix sets.
//!
//! `X` commutes with `A` iff `(I ⊗ A - Aᵀ ⊗ I) Vec(X) = 0` under
//! column-stacking `Vec`. The commutant of a set is the common kernel of these
//! operators, computed here by successive intersection: take the kernel of
//! the first operator, then for each further operator `C` restrict `C` to the
//! current kernel basis `B` and keep `B · ker(C·B)`. Memory stays at one
//! `d² x d²` operator no matter how many matrices are in the set.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::linalg::{kron, nullspace_basis_relative_to, restrict_to_subspace, DenseMatrix, Tolerance};
use crate::operators::{TaskDistribution, TaskSampler};
use crate::rng::RngStream;

/// Outcome of a triviality test.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizerReport {
    pub d: usize,
    pub n_matrices: usize,
    /// Dimension of the commutant (always at least 1).
    pub commutant_dim: usize,
    pub trivial: bool,
    pub tolerance: Tolerance,
    /// Whether the deterministic part `K` was appended to the sample set.
    pub augmented: bool,
}

/// Monte Carlo estimate of the probability that `N` draws have trivial
/// centralizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiversityEstimate {
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub p_hat: f64,
    pub stderr: f64,
}

impl DiversityEstimate {
    pub fn from_counts(n: usize, trials: usize, successes: usize) -> Self {
        assert!(successes <= trials && trials > 0);
        let p_hat = successes as f64 / trials as f64;
        Self {
            n,
            trials,
            successes,
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
        }
    }
}

/// `I_d ⊗ a - aᵀ ⊗ I_d`, the matrix of `Vec(X) ↦ Vec(aX - Xa)`.
pub fn commutator_operator(a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() {
        return domain(format!(
            "commutator operator needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        ));
    }
    let id = DenseMatrix::identity(a.rows());
    let left = kron(&id, a)?;
    let right = kron(&a.transpose(), &id)?;
    Ok(&left - &right)
}

fn check_set(set: &[DenseMatrix]) -> Result<usize> {
    let first = match set.first() {
        Some(m) => m,
        None => return domain("matrix set must be nonempty"),
    };
    if !first.is_square() {
        return domain("matrices must be square");
    }
    let d = first.rows();
    if d == 0 {
        return domain("matrices must be nonempty");
    }
    if let Some((i, m)) = set.iter().enumerate().find(|(_, m)| m.shape() != (d, d)) {
        return domain(format!(
            "matrix {i} is {}x{}, expected {d}x{d}",
            m.rows(),
            m.cols()
        ));
    }
    Ok(d)
}

/// Orthonormal basis (columns, in `Vec` coordinates) of the commutant of
/// `set`.
pub fn commutant_basis(set: &[DenseMatrix], tol: Tolerance) -> Result<DenseMatrix> {
    let d = check_set(set)?;
    let mut basis = DenseMatrix::identity(d * d);
    for a in set {
        if basis.cols() <= 1 {
            // Vec(I) is always in the kernel, so one dimension is final.
            break;
        }
        let op = commutator_operator(a)?;
        // σ_max(I ⊗ A - Aᵀ ⊗ I) <= 2‖A‖₂ <= 2‖A‖_F
        let reference = 2.0 * a.frobenius_norm();
        let restricted = restrict_to_subspace(&op, &basis)?;
        let kernel = nullspace_basis_relative_to(&restricted, tol, reference)?;
        basis = basis.matmul(&kernel)?;
    }
    Ok(basis)
}

/// Decides whether only scalar multiples of the identity commute with every
/// matrix of `set`.
pub fn is_trivial_centralizer(set: &[DenseMatrix], tol: Tolerance) -> Result<CentralizerReport> {
    let d = check_set(set)?;
    let dim = commutant_basis(set, tol)?.cols();
    Ok(CentralizerReport {
        d,
        n_matrices: set.len(),
        commutant_dim: dim,
        trivial: dim == 1,
        tolerance: tol,
        augmented: false,
    })
}

/// Runs `trials` independent experiments: draw `n` task matrices (optionally
/// appending `K`), test triviality, count successes. Trial `t` uses
/// substream `t` of `rng`, so the estimate does not depend on scheduling.
pub fn estimate_diversity_probability(
    dist: &TaskDistribution,
    n: usize,
    trials: usize,
    augment_with_k: bool,
    rng: RngStream,
    tol: Tolerance,
) -> Result<DiversityEstimate> {
    if n == 0 {
        return domain("sample-set size N must be >= 1");
    }
    if trials == 0 {
        return domain("trial count must be >= 1");
    }
    let sampler = TaskSampler::new(dist)?;
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|t| trial_is_trivial(&sampler, n, augment_with_k, rng.substream(t), tol))
        .collect::<Result<Vec<bool>>>()?;
    let successes = outcomes.iter().filter(|&&ok| ok).count();
    Ok(DiversityEstimate::from_counts(n, trials, successes))
}

fn trial_is_trivial(
    sampler: &TaskSampler,
    n: usize,
    augment_with_k: bool,
    stream: RngStream,
    tol: Tolerance,
) -> Result<bool> {
    let mut rng = stream.rng();
    let mut set = Vec::with_capacity(n + 1);
    if augment_with_k {
        set.push(sampler.deterministic_part().clone());
    }
    for _ in 0..n {
        set.push(sampler.sample(&mut rng)?);
    }
    let mut report = is_trivial_centralizer(&set, tol)?;
    report.augmented = augment_with_k;
    Ok(report.trivial)
}
