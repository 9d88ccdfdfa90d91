//! Discretized Schrödinger operators `-Δ + V` on `[0, 1]^D` with zero
//! boundary values, and the random task distributions they induce.
//!
//! Finite differences use the grid `x_i = i / M` in every axis and a
//! Kronecker-sum Laplacian; the potential is diagonal. Finite elements (1D
//! only) use piecewise-linear hat functions on `M` equispaced nodes and a
//! potential that is constant on each of the `M - 1` cells.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{kron, kron_diagonal, DenseMatrix};

/// Largest system size `d` the dense routines accept.
pub const MAX_SYSTEM_SIZE: usize = 4096;

/// Law of the random potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// Independent point values: `a` with probability `p`, otherwise `b`.
    /// In `D > 1` a single separable product of such factors.
    BernoulliPoint { p: f64, a: f64, b: f64 },
    /// Bernoulli values held constant on each grid cell. Identical to
    /// `BernoulliPoint` under finite differences.
    PiecewiseConstantBernoulli { p: f64, a: f64, b: f64 },
    /// Sum of `terms` independent separable Bernoulli products.
    SeparableSum { p: f64, a: f64, b: f64, terms: usize },
    /// `V = exp(g)` with `g(x) = Σ ξ_i (i²π² + α)^(-β/2) sin(iπx)`, truncated
    /// after `truncation` modes (default: `M`).
    LognormalField {
        alpha: f64,
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<usize>,
    },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialSpec::BernoulliPoint { p, a, b }
            | PotentialSpec::PiecewiseConstantBernoulli { p, a, b }
            | PotentialSpec::SeparableSum { p, a, b, .. } => {
                if !(p > 0.0 && p < 1.0) {
                    return domain(format!("Bernoulli probability p = {p} must lie in (0, 1)"));
                }
                if !(a.is_finite() && b.is_finite() && a > 0.0 && a <= b) {
                    return domain(format!("Bernoulli support needs 0 < a <= b (a = {a}, b = {b})"));
                }
                if let PotentialSpec::SeparableSum { terms, .. } = *self {
                    if terms == 0 {
                        return domain("separable sum needs at least one term");
                    }
                }
                Ok(())
            }
            PotentialSpec::LognormalField {
                alpha,
                beta,
                truncation,
            } => {
                if !(alpha.is_finite() && alpha >= 0.0) {
                    return domain(format!("lognormal alpha = {alpha} must be finite and >= 0"));
                }
                if !(beta.is_finite() && beta > 0.0) {
                    return domain(format!("lognormal beta = {beta} must be finite and > 0"));
                }
                if truncation == Some(0) {
                    return domain("lognormal truncation must be >= 1");
                }
                Ok(())
            }
        }
    }

    /// Bernoulli parameters `(p, a, b)`, if this is a Bernoulli law.
    pub fn bernoulli(&self) -> Option<(f64, f64, f64)> {
        match *self {
            PotentialSpec::BernoulliPoint { p, a, b }
            | PotentialSpec::PiecewiseConstantBernoulli { p, a, b }
            | PotentialSpec::SeparableSum { p, a, b, .. } => Some((p, a, b)),
            PotentialSpec::LognormalField { .. } => None,
        }
    }

    fn terms(&self) -> usize {
        match *self {
            PotentialSpec::SeparableSum { terms, .. } => terms,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "FD")]
    FiniteDifference,
    #[serde(rename = "FEM")]
    FiniteElement,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::FiniteDifference => "FD",
            Method::FiniteElement => "FEM",
        }
    }
}

fn default_dim() -> usize {
    1
}

/// A matrix law: discretization method, grid size per axis, spatial
/// dimension and potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDistribution {
    pub method: Method,
    #[serde(rename = "M")]
    pub grid_size: usize,
    #[serde(rename = "D", default = "default_dim")]
    pub dim: usize,
    pub potential: PotentialSpec,
}

impl TaskDistribution {
    pub fn fd(grid_size: usize, dim: usize, potential: PotentialSpec) -> Result<Self> {
        let dist = Self {
            method: Method::FiniteDifference,
            grid_size,
            dim,
            potential,
        };
        dist.validate()?;
        Ok(dist)
    }

    pub fn fem(grid_size: usize, potential: PotentialSpec) -> Result<Self> {
        let dist = Self {
            method: Method::FiniteElement,
            grid_size,
            dim: 1,
            potential,
        };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        match self.method {
            Method::FiniteDifference => {
                if self.grid_size < 2 {
                    return domain(format!("FD needs M >= 2 (got {})", self.grid_size));
                }
                if self.dim == 0 {
                    return domain("spatial dimension D must be >= 1");
                }
                if self.dim > 1 && matches!(self.potential, PotentialSpec::LognormalField { .. }) {
                    return Err(Error::Unsupported(
                        "lognormal potential is only available for D = 1".into(),
                    ));
                }
            }
            Method::FiniteElement => {
                if self.dim != 1 {
                    return domain(format!("FEM is only defined for D = 1 (got D = {})", self.dim));
                }
                if self.grid_size < 3 {
                    return domain(format!("FEM needs M >= 3 (got {})", self.grid_size));
                }
            }
        }
        system_size(self.grid_size, self.dim).map(|_| ())
    }

    /// System size `d`: `M^D` for FD, `M` for FEM.
    pub fn d(&self) -> usize {
        match self.method {
            Method::FiniteDifference => self.grid_size.pow(self.dim as u32),
            Method::FiniteElement => self.grid_size,
        }
    }

    fn lognormal_truncation(&self) -> usize {
        match self.potential {
            PotentialSpec::LognormalField { truncation, .. } => truncation.unwrap_or(self.grid_size),
            _ => 0,
        }
    }
}

fn system_size(grid_size: usize, dim: usize) -> Result<usize> {
    let d = u32::try_from(dim)
        .ok()
        .and_then(|e| grid_size.checked_pow(e))
        .ok_or_else(|| Error::Sizing(format!("M^D overflows for M = {grid_size}, D = {dim}")))?;
    if d > MAX_SYSTEM_SIZE {
        return Err(Error::Sizing(format!(
            "system size {d} exceeds the dense limit {MAX_SYSTEM_SIZE}"
        )));
    }
    Ok(d)
}

/// `M² · tridiag(1, -2, 1)`, the 1D finite-difference matrix as printed in
/// the source construction (it carries the `-2` diagonal).
pub fn fd_laplacian_1d(grid_size: usize) -> Result<DenseMatrix> {
    if grid_size < 2 {
        return domain(format!("FD Laplacian needs M >= 2 (got {grid_size})"));
    }
    let m = grid_size;
    let h2 = (m * m) as f64;
    let mut out = DenseMatrix::zeros(m, m);
    for i in 0..m {
        out[(i, i)] = -2.0 * h2;
        if i + 1 < m {
            out[(i, i + 1)] = h2;
            out[(i + 1, i)] = h2;
        }
    }
    Ok(out)
}

/// `Σ_i I_{M^(i-1)} ⊗ L₁ ⊗ I_{M^(D-i)}` with `L₁ = fd_laplacian_1d(M)`.
pub fn fd_laplacian_nd(grid_size: usize, dim: usize) -> Result<DenseMatrix> {
    if dim == 0 {
        return domain("spatial dimension D must be >= 1");
    }
    let d = system_size(grid_size, dim)?;
    let l1 = fd_laplacian_1d(grid_size)?;
    let mut sum = DenseMatrix::zeros(d, d);
    for i in 0..dim {
        let left = DenseMatrix::identity(grid_size.pow(i as u32));
        let right = DenseMatrix::identity(grid_size.pow((dim - i - 1) as u32));
        let term = kron(&kron(&left, &l1)?, &right)?;
        sum = &sum + &term;
    }
    Ok(sum)
}

/// Stiffness matrix `∫ φ'_i φ'_j` of the `M` hat functions on `[0, 1]`
/// (mesh width `h = 1/(M-1)`, half-hats at both ends).
pub fn fem_laplacian_1d(grid_size: usize) -> Result<DenseMatrix> {
    if grid_size < 3 {
        return domain(format!("FEM Laplacian needs M >= 3 (got {grid_size})"));
    }
    let m = grid_size;
    let inv_h = (m - 1) as f64;
    let mut out = DenseMatrix::zeros(m, m);
    // Assemble cell by cell: cell k joins nodes k and k+1.
    for k in 0..m - 1 {
        out[(k, k)] += inv_h;
        out[(k + 1, k + 1)] += inv_h;
        out[(k, k + 1)] -= inv_h;
        out[(k + 1, k)] -= inv_h;
    }
    Ok(out)
}

/// Matrix of `∫ φ_i φ_j V` for a potential equal to `values[k]` on cell `k`.
///
/// Tridiagonal with prefactor `1/(6(M-1))`: corners `2v₁`, `2v_{M-1}`,
/// interior diagonal `2(v_{k-1} + v_k)`, off-diagonals `v_k`.
pub fn fem_potential_matrix(values: &[f64], grid_size: usize) -> Result<DenseMatrix> {
    if grid_size < 3 {
        return domain(format!("FEM potential needs M >= 3 (got {grid_size})"));
    }
    if values.len() != grid_size - 1 {
        return domain(format!(
            "expected {} cell values for M = {grid_size}, got {}",
            grid_size - 1,
            values.len()
        ));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return domain(format!("non-finite cell value {bad}"));
    }
    let m = grid_size;
    let pre = 1.0 / (6.0 * (m - 1) as f64);
    let mut out = DenseMatrix::zeros(m, m);
    for (k, &v) in values.iter().enumerate() {
        out[(k, k)] += 2.0 * v * pre;
        out[(k + 1, k + 1)] += 2.0 * v * pre;
        out[(k, k + 1)] += v * pre;
        out[(k + 1, k)] += v * pre;
    }
    Ok(out)
}

/// `exp(Σ_{i=1}^{truncation} ξ_i (i²π² + α)^(-β/2) sin(iπx))`.
pub fn lognormal_field_eval(x: f64, alpha: f64, beta: f64, truncation: usize, xi: &[f64]) -> f64 {
    assert!(truncation >= 1, "truncation must be >= 1");
    assert!(xi.len() >= truncation, "need one normal draw per mode");
    let g: f64 = xi[..truncation]
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let k = (i + 1) as f64;
            z * (k * k * PI * PI + alpha).powf(-beta / 2.0) * (k * PI * x).sin()
        })
        .sum();
    g.exp()
}

fn bernoulli_draw<R: Rng + ?Sized>(rng: &mut R, p: f64, a: f64, b: f64) -> f64 {
    if rng.random::<f64>() < p {
        a
    } else {
        b
    }
}

fn lognormal_values<R: Rng + ?Sized>(
    rng: &mut R,
    alpha: f64,
    beta: f64,
    truncation: usize,
    points: impl Iterator<Item = f64>,
) -> Vec<f64> {
    let xi: Vec<f64> = (0..truncation).map(|_| rng.sample(StandardNormal)).collect();
    points
        .map(|x| lognormal_field_eval(x, alpha, beta, truncation, &xi))
        .collect()
}

/// Diagonal of a finite-difference potential matrix, length `M^D`.
pub fn sample_fd_potential_diagonal<R: Rng + ?Sized>(
    dist: &TaskDistribution,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if dist.method != Method::FiniteDifference {
        return domain("finite-difference potential requested for a FEM distribution");
    }
    dist.validate()?;
    let m = dist.grid_size;
    match dist.potential {
        PotentialSpec::LognormalField { alpha, beta, .. } => Ok(lognormal_values(
            rng,
            alpha,
            beta,
            dist.lognormal_truncation(),
            (1..=m).map(|i| i as f64 / m as f64),
        )),
        _ => {
            let (p, a, b) = dist.potential.bernoulli().expect("Bernoulli law");
            let mut diag = vec![0.0; dist.d()];
            for _ in 0..dist.potential.terms() {
                let mut product = vec![1.0];
                for _ in 0..dist.dim {
                    let factor: Vec<f64> = (0..m).map(|_| bernoulli_draw(rng, p, a, b)).collect();
                    product = kron_diagonal(&product, &factor);
                }
                for (acc, v) in diag.iter_mut().zip(product) {
                    *acc += v;
                }
            }
            Ok(diag)
        }
    }
}

/// Finite-difference potential matrix (always diagonal).
pub fn sample_fd_potential<R: Rng + ?Sized>(
    dist: &TaskDistribution,
    rng: &mut R,
) -> Result<DenseMatrix> {
    Ok(DenseMatrix::from_diagonal(&sample_fd_potential_diagonal(dist, rng)?))
}

/// Cell values of a FEM potential, length `M - 1`.
pub fn sample_fem_cell_values<R: Rng + ?Sized>(
    dist: &TaskDistribution,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if dist.method != Method::FiniteElement {
        return domain("FEM cell values requested for an FD distribution");
    }
    dist.validate()?;
    let cells = dist.grid_size - 1;
    match dist.potential {
        PotentialSpec::LognormalField { alpha, beta, .. } => Ok(lognormal_values(
            rng,
            alpha,
            beta,
            dist.lognormal_truncation(),
            (0..cells).map(|k| (k as f64 + 0.5) / cells as f64),
        )),
        _ => {
            let (p, a, b) = dist.potential.bernoulli().expect("Bernoulli law");
            let mut values = vec![0.0; cells];
            for _ in 0..dist.potential.terms() {
                for v in values.iter_mut() {
                    *v += bernoulli_draw(rng, p, a, b);
                }
            }
            Ok(values)
        }
    }
}

/// The deterministic part `K` of a sample: the negated Laplacian matrix.
pub fn deterministic_part(dist: &TaskDistribution) -> Result<DenseMatrix> {
    dist.validate()?;
    let lap = match dist.method {
        Method::FiniteDifference => fd_laplacian_nd(dist.grid_size, dist.dim)?,
        Method::FiniteElement => fem_laplacian_1d(dist.grid_size)?,
    };
    Ok(-&lap)
}

/// Samples the random part `V` in the representation matching the method.
pub fn sample_potential_matrix<R: Rng + ?Sized>(
    dist: &TaskDistribution,
    rng: &mut R,
) -> Result<DenseMatrix> {
    match dist.method {
        Method::FiniteDifference => sample_fd_potential(dist, rng),
        Method::FiniteElement => {
            fem_potential_matrix(&sample_fem_cell_values(dist, rng)?, dist.grid_size)
        }
    }
}

/// One draw `A = K + V`.
pub fn sample_task_matrix<R: Rng + ?Sized>(
    dist: &TaskDistribution,
    rng: &mut R,
) -> Result<DenseMatrix> {
    TaskSampler::new(dist)?.sample(rng)
}

/// Caches `K` for repeated draws from one distribution.
#[derive(Debug, Clone)]
pub struct TaskSampler {
    dist: TaskDistribution,
    deterministic: DenseMatrix,
}

impl TaskSampler {
    pub fn new(dist: &TaskDistribution) -> Result<Self> {
        Ok(Self {
            deterministic: deterministic_part(dist)?,
            dist: dist.clone(),
        })
    }

    pub fn distribution(&self) -> &TaskDistribution {
        &self.dist
    }

    pub fn deterministic_part(&self) -> &DenseMatrix {
        &self.deterministic
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DenseMatrix> {
        let v = sample_potential_matrix(&self.dist, rng)?;
        Ok(&self.deterministic + &v)
    }
}
