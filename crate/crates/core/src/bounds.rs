//! Closed-form lower bounds on the probability of a trivial centralizer, and
//! numerical checks of the facts those bounds rest on.
//!
//! Every evaluator reports the raw expression (possibly negative when the
//! bound is vacuous) together with its clamp to `[0, 1]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::operators::{sample_fd_potential_diagonal, Method, TaskDistribution};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Theorem {
    /// Augmented set `S_N ∪ {K}`: `1 - (d-1) c^N`.
    #[serde(rename = "ThmMain")]
    Main,
    /// Diagonal random part, no augmentation: `1 - d(d-1) c_V^⌊N/2⌋`.
    #[serde(rename = "Thm2")]
    Thm2,
    /// Finite differences, augmented: `1 - (M^D - 1) c^N`.
    #[serde(rename = "ThmFD")]
    Fd,
    /// Finite differences, no augmentation: `1 - M(M-1) c_V^⌊N/2⌋`.
    #[serde(rename = "ThmFD2")]
    Fd2,
    /// 1D finite elements, augmented: `1 - (M-1) c^N`.
    #[serde(rename = "ThmFEM")]
    Fem,
}

impl Theorem {
    pub fn label(&self) -> &'static str {
        match self {
            Theorem::Main => "ThmMain",
            Theorem::Thm2 => "Thm2",
            Theorem::Fd => "ThmFD",
            Theorem::Fd2 => "ThmFD2",
            Theorem::Fem => "ThmFEM",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        [Theorem::Main, Theorem::Thm2, Theorem::Fd, Theorem::Fd2, Theorem::Fem]
            .into_iter()
            .find(|t| t.label() == s)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub theorem: Theorem,
    pub raw_value: f64,
    pub clamped: f64,
    /// Intermediate constants keyed by name (`c`, `c_V`, `base`, `exponent`).
    pub constants: BTreeMap<String, f64>,
}

impl BoundResult {
    fn new(theorem: Theorem, raw_value: f64, constants: &[(&str, f64)]) -> Self {
        Self {
            theorem,
            raw_value,
            clamped: raw_value.clamp(0.0, 1.0),
            constants: constants.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("p = {p} must lie in (0, 1)"));
    }
    Ok(())
}

fn check_open_unit(name: &str, c: f64) -> Result<()> {
    if !(c > 0.0 && c < 1.0) {
        return domain(format!("{name} = {c} must lie in (0, 1)"));
    }
    Ok(())
}

fn pow_usize(base: f64, exp: usize) -> f64 {
    match i32::try_from(exp) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(exp as f64),
    }
}

/// `1 - (d-1) c^N` for the augmented sample set.
pub fn bound_main(d: usize, c: f64, n: usize) -> Result<BoundResult> {
    if d < 2 {
        return domain(format!("d = {d} must be >= 2"));
    }
    check_open_unit("c", c)?;
    if n < 1 {
        return domain("N must be >= 1");
    }
    let raw = 1.0 - (d - 1) as f64 * pow_usize(c, n);
    Ok(BoundResult::new(
        Theorem::Main,
        raw,
        &[("c", c), ("base", c), ("exponent", n as f64)],
    ))
}

/// `1 - d(d-1) c_V^⌊N/2⌋`; odd `N` discards the last sample.
pub fn bound_thm2(d: usize, c_v: f64, n: usize) -> Result<BoundResult> {
    if d < 2 {
        return domain(format!("d = {d} must be >= 2"));
    }
    check_open_unit("c_V", c_v)?;
    if n < 2 {
        return domain("N must be >= 2");
    }
    let half = n / 2;
    let raw = 1.0 - (d * (d - 1)) as f64 * pow_usize(c_v, half);
    Ok(BoundResult::new(
        Theorem::Thm2,
        raw,
        &[("c_V", c_v), ("base", c_v), ("exponent", half as f64)],
    ))
}

/// Smallest grid size for which the `D >= 2` finite-difference bound holds.
pub fn fd_grid_threshold(p: f64) -> f64 {
    9.0 / (2.0 * p * (1.0 - p))
}

/// Finite-difference constant `c`: `1/√(1 + (2/3)Mp(1-p))` in 1D and twice
/// that for `D >= 2`. No hypothesis check.
pub fn fd_constant(grid_size: usize, dim: usize, p: f64) -> f64 {
    let root = (1.0 + (2.0 / 3.0) * grid_size as f64 * p * (1.0 - p)).sqrt();
    if dim == 1 {
        1.0 / root
    } else {
        2.0 / root
    }
}

/// `1 - (M^D - 1) c^N` for the augmented finite-difference set.
pub fn bound_fd(grid_size: usize, dim: usize, p: f64, n: usize) -> Result<BoundResult> {
    check_probability(p)?;
    if dim == 0 {
        return domain("D must be >= 1");
    }
    if n < 1 {
        return domain("N must be >= 1");
    }
    if dim == 1 {
        if grid_size < 2 {
            return domain(format!("M = {grid_size} must be >= 2"));
        }
    } else {
        let threshold = fd_grid_threshold(p);
        if (grid_size as f64) < threshold {
            return domain(format!(
                "for D >= 2 the bound requires M >= 9/(2p(1-p)) = {threshold} (got M = {grid_size})"
            ));
        }
    }
    let c = fd_constant(grid_size, dim, p);
    let d = (grid_size as f64).powf(dim as f64);
    let raw = 1.0 - (d - 1.0) * pow_usize(c, n);
    Ok(BoundResult::new(
        Theorem::Fd,
        raw,
        &[("c", c), ("base", c), ("exponent", n as f64)],
    ))
}

/// `c_V = 1 - 2p²(1-p)²` for Bernoulli diagonals.
pub fn bernoulli_c_v(p: f64) -> f64 {
    1.0 - 2.0 * p * p * (1.0 - p) * (1.0 - p)
}

/// `1 - M(M-1) (1 - 2p²(1-p)²)^⌊N/2⌋` for the plain finite-difference set.
pub fn bound_fd2(grid_size: usize, p: f64, n: usize) -> Result<BoundResult> {
    if grid_size < 2 {
        return domain(format!("M = {grid_size} must be >= 2"));
    }
    check_probability(p)?;
    if n < 2 {
        return domain("N must be >= 2");
    }
    let c_v = bernoulli_c_v(p);
    let half = n / 2;
    let m = grid_size as f64;
    let raw = 1.0 - m * (m - 1.0) * pow_usize(c_v, half);
    Ok(BoundResult::new(
        Theorem::Fd2,
        raw,
        &[("c_V", c_v), ("base", c_v), ("exponent", half as f64)],
    ))
}

/// `1 - (M-1) (1/√(1 + 2p(1-p)))^N` for the augmented 1D FEM set.
pub fn bound_fem(grid_size: usize, p: f64, n: usize) -> Result<BoundResult> {
    if grid_size < 5 {
        return domain(format!("the FEM bound requires M >= 5 (got M = {grid_size})"));
    }
    check_probability(p)?;
    if n < 1 {
        return domain("N must be >= 1");
    }
    let c = 1.0 / (1.0 + 2.0 * p * (1.0 - p)).sqrt();
    let raw = 1.0 - (grid_size - 1) as f64 * pow_usize(c, n);
    Ok(BoundResult::new(
        Theorem::Fem,
        raw,
        &[("c", c), ("base", c), ("exponent", n as f64)],
    ))
}

/// Result of counting nonzeros of the cosine products `w^(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SparsityReport {
    pub grid_size: usize,
    pub min_nonzero: usize,
    /// `k` attaining the minimum (first one, 1-based).
    pub worst_k: usize,
    /// `⌈M/3⌉`.
    pub required: usize,
    pub passes: bool,
}

/// `w^(k)_j = cos(2πk(j-1)/M) cos(2π(k+1)(j-1)/M)`, `j = 1..=M`.
pub fn cosine_product(grid_size: usize, k: usize) -> Vec<f64> {
    let m = grid_size as f64;
    (0..grid_size)
        .map(|j| {
            let j = j as f64;
            (2.0 * PI * k as f64 * j / m).cos() * (2.0 * PI * (k + 1) as f64 * j / m).cos()
        })
        .collect()
}

/// Counts entries of `w^(k)` above `1e-12` in magnitude for every
/// `k = 1..M-1` and compares the minimum to `⌈M/3⌉`.
pub fn verify_claim_sparsity(grid_size: usize) -> Result<SparsityReport> {
    if grid_size < 2 {
        return domain(format!("M = {grid_size} must be >= 2"));
    }
    let (worst_k, min_nonzero) = (1..grid_size)
        .map(|k| {
            let count = cosine_product(grid_size, k)
                .iter()
                .filter(|w| w.abs() > 1e-12)
                .count();
            (k, count)
        })
        .min_by_key(|&(k, count)| (count, k))
        .expect("M >= 2 gives at least one k");
    let required = grid_size.div_ceil(3);
    Ok(SparsityReport {
        grid_size,
        min_nonzero,
        worst_k,
        required,
        passes: min_nonzero >= required,
    })
}

/// Unit cosine vectors `u_k ∝ (cos(2πk(j-1)/M))_j` for `k = 1..=M`.
pub fn cosine_basis_1d(grid_size: usize) -> Vec<Vec<f64>> {
    let m = grid_size as f64;
    (1..=grid_size)
        .map(|k| {
            let v: Vec<f64> = (0..grid_size)
                .map(|j| (2.0 * PI * k as f64 * j as f64 / m).cos())
                .collect();
            let n = crate::linalg::norm(&v);
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

/// Tensor-product enumeration in `D` dimensions: the last factor varies
/// slowest, i.e. `[u¹ ⊗ u_1, …, u^last ⊗ u_1, u¹ ⊗ u_2, …]` where `u^j` runs
/// over the `(D-1)`-dimensional enumeration.
pub fn cosine_basis_nd(grid_size: usize, dim: usize) -> Vec<Vec<f64>> {
    let base = cosine_basis_1d(grid_size);
    let mut current = base.clone();
    for _ in 1..dim {
        let mut next = Vec::with_capacity(current.len() * base.len());
        for u in &base {
            for prev in &current {
                next.push(crate::linalg::kron_diagonal(prev, u));
            }
        }
        current = next;
    }
    current
}

/// Monte Carlo check of the consecutive-pair zero probabilities
/// `P(u_kᵀ V u_{k+1} = 0)` for a finite-difference distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub trials: usize,
    /// One estimate per consecutive pair `(k, k+1)`, `k = 1..d-1`.
    pub pair_zero_probabilities: Vec<f64>,
    pub max_zero_probability: f64,
    /// 1-based `k` of the largest estimate.
    pub worst_pair: usize,
    /// Standard error of the largest estimate.
    pub stderr: f64,
    /// Constant the finite-difference bound uses, for Bernoulli laws.
    pub theoretical_c: Option<f64>,
    /// Every pair is nonzero with positive probability.
    pub assumption_holds: bool,
    /// `max ≤ c + 3·stderr`, when a constant is available.
    pub within_constant: Option<bool>,
}

pub fn verify_assumption_main(
    dist: &TaskDistribution,
    trials: usize,
    rng: RngStream,
) -> Result<AssumptionReport> {
    if dist.method != Method::FiniteDifference {
        return domain("the eigenvector check applies to finite-difference distributions");
    }
    if trials == 0 {
        return domain("trial count must be >= 1");
    }
    dist.validate()?;
    let basis = cosine_basis_nd(dist.grid_size, dist.dim);
    let pairs: Vec<Vec<f64>> = basis
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| a * b).collect())
        .collect();

    let zeros = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<u32>> {
            let v = sample_fd_potential_diagonal(dist, &mut rng.substream(t).rng())?;
            let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            Ok(pairs
                .iter()
                .map(|w| {
                    let form: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
                    u32::from(form.abs() <= 1e-10 * scale)
                })
                .collect())
        })
        .try_reduce(
            || vec![0u32; pairs.len()],
            |mut acc, x| {
                acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
                Ok(acc)
            },
        )?;

    let probs: Vec<f64> = zeros.iter().map(|&z| z as f64 / trials as f64).collect();
    let (worst, max) = probs
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, q)| if q > best.1 { (k, q) } else { best });
    let stderr = (max * (1.0 - max) / trials as f64).sqrt();
    let theoretical_c = dist
        .potential
        .bernoulli()
        .map(|(p, _, _)| fd_constant(dist.grid_size, dist.dim, p));
    Ok(AssumptionReport {
        trials,
        pair_zero_probabilities: probs,
        max_zero_probability: max,
        worst_pair: worst + 1,
        stderr,
        theoretical_c,
        assumption_holds: max < 1.0,
        within_constant: theoretical_c.map(|c| max <= c + 3.0 * stderr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::PotentialSpec;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn main_bound_examples() {
        assert_eq!(bound_main(2, 0.5, 1).unwrap().raw_value, 0.5);
        assert_eq!(bound_main(5, 0.5, 10).unwrap().raw_value, 0.99609375);
        let vacuous = bound_main(10, 0.9, 1).unwrap();
        assert!(vacuous.raw_value < 0.0);
        assert_eq!(vacuous.clamped, 0.0);
        assert!(bound_main(1, 0.5, 1).is_err());
        assert!(bound_main(3, 1.0, 1).is_err());
        assert!(bound_main(3, 0.5, 0).is_err());
    }

    #[test]
    fn thm2_floor_rule() {
        assert_eq!(bound_thm2(2, 0.5, 4).unwrap().raw_value, 0.5);
        assert_eq!(
            bound_thm2(2, 0.5, 5).unwrap().raw_value,
            bound_thm2(2, 0.5, 4).unwrap().raw_value
        );
        assert_eq!(bound_thm2(6, 0.99, 2).unwrap().clamped, 0.0);
        assert!(bound_thm2(2, 0.5, 1).is_err());
    }

    #[test]
    fn fd_constants() {
        let one = bound_fd(24, 1, 0.5, 3).unwrap();
        assert!(rel(one.constant("c").unwrap(), 1.0 / 5f64.sqrt()) < 1e-15);
        let two = bound_fd(24, 2, 0.5, 3).unwrap();
        assert!(rel(two.constant("c").unwrap(), 2.0 / 5f64.sqrt()) < 1e-15);
        assert_eq!(fd_grid_threshold(0.5), 18.0);
        match bound_fd(10, 2, 0.5, 3) {
            Err(crate::Error::Domain(msg)) => assert!(msg.contains("18")),
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(bound_fd(1, 1, 0.5, 3).is_err());
    }

    #[test]
    fn fd2_examples() {
        let r = bound_fd2(5, 0.5, 100).unwrap();
        assert_eq!(r.constant("c_V"), Some(0.875));
        assert!(rel(r.raw_value, 1.0 - 20.0 * 0.875f64.powi(50)) < 1e-15);
        let v = bound_fd2(5, 0.5, 10).unwrap();
        assert!((v.raw_value - (1.0 - 20.0 * 0.875f64.powi(5))).abs() < 1e-12);
        assert!(v.raw_value < -9.0);
        assert_eq!(v.clamped, 0.0);
    }

    #[test]
    fn fem_examples() {
        let c = bound_fem(5, 0.5, 1).unwrap().constant("c").unwrap();
        assert!(rel(c, 1.0 / 1.5f64.sqrt()) < 1e-15);
        let r = bound_fem(10, 0.5, 50).unwrap();
        assert!(rel(1.0 - r.raw_value, 9.0 * 1.5f64.powi(-25)) < 1e-10);
        assert!(bound_fem(4, 0.5, 3).is_err());
        assert!(bound_fem(5, 0.5, 0).is_err());
    }

    #[test]
    fn bounds_nondecreasing_in_n() {
        for n in 2..80 {
            let pairs = [
                (bound_main(7, 0.8, n).unwrap(), bound_main(7, 0.8, n + 1).unwrap()),
                (bound_thm2(7, 0.8, n).unwrap(), bound_thm2(7, 0.8, n + 1).unwrap()),
                (bound_fd(20, 2, 0.5, n).unwrap(), bound_fd(20, 2, 0.5, n + 1).unwrap()),
                (bound_fd2(5, 0.3, n).unwrap(), bound_fd2(5, 0.3, n + 1).unwrap()),
                (bound_fem(9, 0.2, n).unwrap(), bound_fem(9, 0.2, n + 1).unwrap()),
            ];
            for (a, b) in pairs {
                assert!(b.raw_value >= a.raw_value, "{:?} at N = {n}", a.theorem);
                assert!((0.0..=1.0).contains(&a.clamped));
            }
        }
    }

    #[test]
    fn one_dimensional_fd_bound_dominates() {
        for m in [18, 24, 40] {
            for n in [1, 5, 20, 60] {
                let one = bound_fd(m, 1, 0.5, n).unwrap().raw_value;
                let two = bound_fd(m, 2, 0.5, n).unwrap().raw_value;
                assert!(one >= two);
            }
        }
    }

    #[test]
    fn sparsity_examples() {
        let r5 = verify_claim_sparsity(5).unwrap();
        assert_eq!(r5.min_nonzero, 5);
        assert!(r5.passes);
        let r16 = verify_claim_sparsity(16).unwrap();
        assert!(r16.min_nonzero >= 6);
        // k = 1 at M = 8: cos(πj/2) vanishes at odd j, cos(πj/4) at j = 2, 6
        let r8 = verify_claim_sparsity(8).unwrap();
        assert_eq!((r8.min_nonzero, r8.worst_k, r8.required), (2, 1, 3));
        assert!(!r8.passes);
    }

    #[test]
    fn cosine_basis_nd_ordering() {
        let one = cosine_basis_1d(3);
        let two = cosine_basis_nd(3, 2);
        assert_eq!(two.len(), 9);
        // second element: u¹ ⊗ u_1 with u¹ = second 1D vector
        let want = crate::linalg::kron_diagonal(&one[1], &one[0]);
        assert_eq!(two[1], want);
        let want = crate::linalg::kron_diagonal(&one[0], &one[1]);
        assert_eq!(two[3], want);
        for u in &two {
            assert!((crate::linalg::norm(u) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_potential_violates_assumption() {
        let dist = TaskDistribution::fd(
            6,
            1,
            PotentialSpec::BernoulliPoint { p: 0.5, a: 2.0, b: 2.0 },
        )
        .unwrap();
        let r = verify_assumption_main(&dist, 20, RngStream::new(0, 0)).unwrap();
        assert_eq!(r.max_zero_probability, 1.0);
        assert!(!r.assumption_holds);
    }

    #[test]
    fn bernoulli_pairs_respect_constant() {
        let dist = TaskDistribution::fd(
            5,
            1,
            PotentialSpec::BernoulliPoint { p: 0.5, a: 1.0, b: 2.0 },
        )
        .unwrap();
        let trials = 4000;
        let r = verify_assumption_main(&dist, trials, RngStream::new(4, 0)).unwrap();
        let c = 1.0 / (1.0 + (2.0 / 3.0) * 5.0 * 0.25f64).sqrt();
        assert!((r.theoretical_c.unwrap() - c).abs() < 1e-15);
        for &q in &r.pair_zero_probabilities {
            let se = (q * (1.0 - q) / trials as f64).sqrt();
            assert!(q <= c + 3.0 * se, "{q} > {c}");
        }
        assert_eq!(r.within_constant, Some(true));
        let single = verify_assumption_main(&dist, 1, RngStream::new(4, 1)).unwrap();
        assert!(single.pair_zero_probabilities.iter().all(|&q| q == 0.0 || q == 1.0));
    }

    #[test]
    fn assumption_check_rejects_fem() {
        let dist = TaskDistribution::fem(5, PotentialSpec::BernoulliPoint { p: 0.5, a: 1.0, b: 2.0 }).unwrap();
        assert!(verify_assumption_main(&dist, 10, RngStream::new(0, 0)).is_err());
    }
}
