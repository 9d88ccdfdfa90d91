//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails. Every criterion also has to
//! finish inside its time budget.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use matdiv_core::bounds::{bound_fd2, bound_fem, bound_main, bound_thm2, verify_claim_sparsity};
use matdiv_core::centralizer::{estimate_diversity_probability, is_trivial_centralizer, DiversityEstimate};
use matdiv_core::icl::{
    evaluate, prompt_for_task, risk_and_gradients, train, ErrorKind, EvalConfig, EvalReport, Example, TrainConfig,
};
use matdiv_core::operators::{fem_laplacian_1d, fem_potential_matrix, TaskSampler};
use matdiv_core::{DenseMatrix, PotentialSpec, RngStream, TaskDistribution, Tolerance};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// 1. centralizer vs exact stacked-matrix kernel

/// Rank over the rationals by fraction-based Gaussian elimination.
fn exact_rank(mut rows: Vec<Vec<BigRational>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let lead = rows[rank][c].clone();
        for r in 0..rows.len() {
            if r != rank && !rows[r][c].is_zero() {
                let factor = &rows[r][c] / &lead;
                for k in c..cols {
                    let delta = &factor * &rows[rank][k];
                    rows[r][k] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Rows of the map `X ↦ AX - XA` for every `A`, built column by column from
/// the images of the elementary matrices `E_kl` (column-stacked).
fn stacked_commutator(set: &[Vec<Vec<i64>>]) -> Vec<Vec<BigRational>> {
    let d = set[0].len();
    let mut rows = Vec::new();
    for a in set {
        let mut block = vec![vec![BigRational::zero(); d * d]; d * d];
        for l in 0..d {
            for k in 0..d {
                // E_kl has a single one at (k, l); its Vec index is l*d + k
                let col = l * d + k;
                for i in 0..d {
                    for j in 0..d {
                        let ax = if j == l { a[i][k] } else { 0 };
                        let xa = if i == k { a[l][j] } else { 0 };
                        block[j * d + i][col] = BigRational::from_integer(BigInt::from(ax - xa));
                    }
                }
            }
        }
        rows.extend(block);
    }
    rows
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = Vec::new();
    let mut trivial = 0;
    for case in 0..200 {
        let d = rng.random_range(1..=4usize);
        let count = rng.random_range(1..=3usize);
        let set: Vec<Vec<Vec<i64>>> = (0..count)
            .map(|_| (0..d).map(|_| (0..d).map(|_| rng.random_range(-2..=2i64)).collect()).collect())
            .collect();
        let expected_dim = d * d - exact_rank(stacked_commutator(&set));
        let mats: Vec<DenseMatrix> = set
            .iter()
            .map(|m| {
                let data = m.iter().flatten().map(|&v| v as f64).collect();
                DenseMatrix::from_row_major(d, d, data).unwrap()
            })
            .collect();
        let report = is_trivial_centralizer(&mats, Tolerance::default()).unwrap();
        if report.commutant_dim != expected_dim || report.trivial != (expected_dim == 1) {
            mismatches.push(format!("case {case}: d={d} got {} want {expected_dim}", report.commutant_dim));
        }
        trivial += usize::from(expected_dim == 1);
    }
    outcome(
        mismatches.is_empty(),
        format!("200 sets, {trivial} trivial, {} mismatches {:?}", mismatches.len(), mismatches),
    )
}

// ---------------------------------------------------------------------------
// 2 and 3. Monte Carlo diversity curves

fn bernoulli(p: f64) -> PotentialSpec {
    PotentialSpec::BernoulliPoint { p, a: 1.0, b: 2.0 }
}

fn curve(dist: &TaskDistribution, ns: &[usize], trials: usize, seed: u64) -> Vec<DiversityEstimate> {
    ns.iter()
        .map(|&n| {
            estimate_diversity_probability(dist, n, trials, false, RngStream::new(seed, n as u64), Tolerance::default())
                .unwrap()
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let ns: Vec<usize> = (1..=60).collect();
    let mut violations = Vec::new();
    let mut best_half = 0.0f64;
    for (i, p) in [0.2, 0.3, 0.5].into_iter().enumerate() {
        let dist = TaskDistribution::fd(5, 1, bernoulli(p)).unwrap();
        for est in curve(&dist, &ns, 300, 100 + i as u64) {
            let bound = if est.n >= 2 { bound_fd2(5, p, est.n).unwrap().clamped } else { 0.0 };
            if est.p_hat < bound - 3.0 * est.stderr {
                violations.push(format!("p={p} N={}: {} < {bound}", est.n, est.p_hat));
            }
            if p == 0.5 {
                best_half = best_half.max(est.p_hat);
            }
        }
    }
    outcome(
        violations.is_empty() && best_half >= 0.95,
        format!("bound violations {violations:?}; max p_hat at p=0.5 is {best_half}"),
    )
}

/// Pool-adjacent-violators fit of a nondecreasing sequence (equal weights).
fn isotonic(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
            let (v2, n2) = blocks.pop().unwrap();
            let (v1, n1) = blocks.pop().unwrap();
            blocks.push(((v1 * n1 as f64 + v2 * n2 as f64) / (n1 + n2) as f64, n1 + n2));
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

fn crossing(ns: &[usize], fit: &[f64], level: f64) -> Option<usize> {
    ns.iter().zip(fit).find(|(_, &v)| v >= level).map(|(&n, _)| n)
}

fn criterion_3() -> Outcome {
    let trials = 100;
    let ns: Vec<usize> = (1..=120).collect();
    let two = TaskDistribution::fd(3, 2, bernoulli(0.5)).unwrap();
    let one = TaskDistribution::fd(9, 1, bernoulli(0.5)).unwrap();
    let raw2: Vec<f64> = curve(&two, &ns, trials, 300).iter().map(|e| e.p_hat).collect();
    let raw1: Vec<f64> = curve(&one, &ns, trials, 301).iter().map(|e| e.p_hat).collect();
    let (fit2, fit1) = (isotonic(&raw2), isotonic(&raw1));
    let band = 3.0 * (0.25 / trials as f64).sqrt();
    let deviation = raw2.iter().zip(&fit2).map(|(r, f)| (r - f).abs()).fold(0.0, f64::max);
    let (c2, c1) = (crossing(&ns, &fit2, 0.9), crossing(&ns, &fit1, 0.9));
    let slower = match (c2, c1) {
        (Some(a), Some(b)) => a > b,
        _ => false,
    };
    outcome(
        deviation <= band && c2.is_some() && slower,
        format!(
            "max |raw - isotonic| = {deviation:.3} (band {band:.3}); first N with fit >= 0.9: 2D (M=3) {c2:?}, 1D (M=9) {c1:?}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. bounds vs exact rational evaluation

fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn rpow(base: &BigRational, e: usize) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * base)
}

fn rel_err(value: f64, exact: &BigRational) -> f64 {
    let v = BigRational::from_float(value).unwrap();
    ((v - exact).abs() / exact.abs()).to_f64().unwrap()
}

fn criterion_4() -> Outcome {
    let one = BigRational::one();
    let cases = [
        ("ThmMain d=2 c=1/2 N=1", bound_main(2, 0.5, 1).unwrap().raw_value, &one - rational(1, 2)),
        (
            "ThmMain d=5 c=1/2 N=10",
            bound_main(5, 0.5, 10).unwrap().raw_value,
            &one - rational(4, 1) * rpow(&rational(1, 2), 10),
        ),
        (
            "Thm2 d=2 c_V=1/2 N=4",
            bound_thm2(2, 0.5, 4).unwrap().raw_value,
            &one - rational(2, 1) * rpow(&rational(1, 2), 2),
        ),
        (
            "ThmFD2 M=5 p=1/2 N=100",
            bound_fd2(5, 0.5, 100).unwrap().raw_value,
            &one - rational(20, 1) * rpow(&rational(7, 8), 50),
        ),
        (
            "ThmFEM M=10 p=1/2 N=50",
            bound_fem(10, 0.5, 50).unwrap().raw_value,
            &one - rational(9, 1) * rpow(&rational(2, 3), 25),
        ),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, got, exact) in &cases {
        let e = rel_err(*got, exact);
        worst = worst.max(e);
        parts.push(format!("{name}: {got} (rel {e:.1e})"));
    }
    outcome(worst <= 1e-12, parts.join("; "))
}

// ---------------------------------------------------------------------------
// 5. nonzero counts of cosine products

fn criterion_5() -> Outcome {
    let failing: Vec<String> = (2..=64)
        .map(|m| verify_claim_sparsity(m).unwrap())
        .filter(|r| !r.passes)
        .map(|r| format!("M={} (min {} at k={}, need {})", r.grid_size, r.min_nonzero, r.worst_k, r.required))
        .collect();
    outcome(failing.is_empty(), format!("{} of 63 sizes fail: {}", failing.len(), failing.join(", ")))
}

// ---------------------------------------------------------------------------
// 6. FEM matrices vs adaptive quadrature

fn simpson_rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for m in 3..=12usize {
        let h = 1.0 / (m - 1) as f64;
        let node = |i: usize| i as f64 * h;
        let hat = move |i: usize, x: f64| (1.0 - (x - node(i)).abs() / h).max(0.0);
        let slope = move |i: usize, x: f64| {
            let t = x - node(i);
            if t.abs() >= h {
                0.0
            } else if t < 0.0 {
                1.0 / h
            } else {
                -1.0 / h
            }
        };
        let values: Vec<f64> = (0..m - 1).map(|_| if rng.random::<f64>() < 0.5 { 1.0 } else { 2.0 }).collect();
        let stiffness = fem_laplacian_1d(m).unwrap();
        let potential = fem_potential_matrix(&values, m).unwrap();
        for i in 0..m {
            for j in 0..m {
                // integrate cell by cell: the integrands are smooth inside cells
                let (mut k_ij, mut v_ij) = (0.0, 0.0);
                for (cell, &v) in values.iter().enumerate() {
                    let (a, b) = (node(cell), node(cell + 1));
                    k_ij += adaptive_simpson(&|x| slope(i, x) * slope(j, x), a, b, 1e-14);
                    v_ij += adaptive_simpson(&|x| v * hat(i, x) * hat(j, x), a, b, 1e-14);
                }
                worst = worst.max((stiffness[(i, j)] - k_ij).abs()).max((potential[(i, j)] - v_ij).abs());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max abs deviation {worst:.2e} over M = 3..12"))
}

// ---------------------------------------------------------------------------
// 7. analytic gradients vs central differences

fn criterion_7() -> Outcome {
    let dist = TaskDistribution::fd(3, 1, bernoulli(0.5)).unwrap();
    let sampler = TaskSampler::new(&dist).unwrap();
    let mut r = RngStream::new(7, 0).rng();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let gaussian = |r: &mut rand_chacha::ChaCha20Rng| {
            let data = (0..9).map(|_| r.sample(StandardNormal)).collect();
            DenseMatrix::from_row_major(3, 3, data).unwrap()
        };
        let p = gaussian(&mut r);
        let q = gaussian(&mut r);
        let examples: Vec<Example> = (0..5)
            .map(|_| {
                let task = sampler.sample(&mut r).unwrap();
                Example::from_prompt(&prompt_for_task(task, 4, &mut r).unwrap()).unwrap()
            })
            .collect();
        let refs: Vec<&Example> = examples.iter().collect();
        let (_, gp, gq) = risk_and_gradients(&p, &q, &refs).unwrap();
        let loss = |p: &DenseMatrix, q: &DenseMatrix| risk_and_gradients(p, q, &refs).unwrap().0;
        let mut fp = DenseMatrix::zeros(3, 3);
        let mut fq = DenseMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                let (mut a, mut b) = (p.clone(), p.clone());
                a[(i, j)] += h;
                b[(i, j)] -= h;
                fp[(i, j)] = (loss(&a, &q) - loss(&b, &q)) / (2.0 * h);
                let (mut a, mut b) = (q.clone(), q.clone());
                a[(i, j)] += h;
                b[(i, j)] -= h;
                fq[(i, j)] = (loss(&p, &a) - loss(&p, &b)) / (2.0 * h);
            }
        }
        let rel = |x: &DenseMatrix, y: &DenseMatrix| (x - y).frobenius_norm() / y.frobenius_norm();
        worst = worst.max(rel(&gp, &fp)).max(rel(&gq, &fq));
    }
    outcome(worst <= 1e-6, format!("max relative deviation {worst:.2e} over 20 instances"))
}

// ---------------------------------------------------------------------------
// 8 and 9. in-context learning

const M_VALUES: [usize; 6] = [10, 20, 40, 80, 160, 320];

fn piecewise() -> PotentialSpec {
    PotentialSpec::PiecewiseConstantBernoulli { p: 0.5, a: 1.0, b: 2.0 }
}

fn eval_config(kind: ErrorKind) -> EvalConfig {
    EvalConfig { m_values: M_VALUES.to_vec(), tasks: 1000, queries_per_task: 10, error_kind: kind }
}

fn describe(r: &EvalReport) -> String {
    let errs: Vec<String> = r.errors.iter().map(|e| format!("{e:.4e}")).collect();
    format!("errors [{}], slope {:?}", errs.join(", "), r.fitted_slope)
}

fn criterion_8() -> Outcome {
    let dist = TaskDistribution::fd(10, 1, piecewise()).unwrap();
    let params = train(&dist, &TrainConfig::default(), RngStream::new(8, 0)).unwrap();
    let report = evaluate(&params, &dist, &eval_config(ErrorKind::Mse), RngStream::new(8, 1)).unwrap();
    let pass = report.fitted_slope.is_some_and(|s| (-1.4..=-0.6).contains(&s));
    outcome(pass, describe(&report))
}

fn criterion_9() -> Outcome {
    let fd = TaskDistribution::fd(10, 1, piecewise()).unwrap();
    let fem = TaskDistribution::fem(10, piecewise()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, train_dist, test_dist) in [("FD->FEM", &fd, &fem), ("FEM->FD", &fem, &fd)] {
        let params = train(train_dist, &TrainConfig::default(), RngStream::new(9, 0)).unwrap();
        let r = evaluate(&params, test_dist, &eval_config(ErrorKind::ShiftedRelative), RngStream::new(9, 1)).unwrap();
        let finite = r.errors.iter().all(|e| e.is_finite());
        let drop = r.errors[0] / r.errors[r.errors.len() - 1];
        pass &= finite && drop > 4.0;
        parts.push(format!("{name}: {}, error(10)/error(320) = {drop:.2}", describe(&r)));
    }
    outcome(pass, parts.join("; "))
}

// ---------------------------------------------------------------------------
// 10. byte-identical reruns through the CLI

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_matdiv"))
        .args(args)
        .stdout(std::process::Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Result<(), String> {
    for name in names {
        let x = fs::read(a.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = fs::read(b.join(name)).map_err(|e| format!("{name}: {e}"))?;
        if x != y {
            return Err(format!("{name} differs"));
        }
    }
    Ok(())
}

fn criterion_10() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path();
    let diversity = dir.join("diversity.json");
    fs::write(
        &diversity,
        r#"{"method": "FD", "M": 5, "a": 1, "b": 2, "p_values": [0.3, 0.5], "N": {"from": 1, "to": 20}, "trials": 100, "seed": 3}"#,
    )
    .unwrap();
    let train = dir.join("train.json");
    fs::write(
        &train,
        r#"{"distribution": {"method": "FD", "M": 10, "potential": {"kind": "piecewise_constant_bernoulli", "p": 0.5, "a": 1, "b": 2}},
            "train": {"tasks": 256, "prompt_length": 50, "steps": 500}, "seed": 11}"#,
    )
    .unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for (cmd, cfg, files) in [
        ("diversity", &diversity, vec!["diversity.csv"]),
        ("icl-train", &train, vec!["P.txt", "Q.txt", "meta.json", "loss_history.csv"]),
    ] {
        let (a, b) = (dir.join(format!("{cmd}-a")), dir.join(format!("{cmd}-b")));
        fs::create_dir_all(&a).unwrap();
        fs::create_dir_all(&b).unwrap();
        let ok_a = run_cli(&[cmd, "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
        let ok_b = run_cli(&[cmd, "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--threads", "1"]);
        let verdict = if ok_a && ok_b { same_files(&a, &b, &files) } else { Err("command failed".into()) };
        pass &= verdict.is_ok();
        parts.push(format!("{cmd}: {}", verdict.map(|_| "identical".to_string()).unwrap_or_else(|e| e)));
    }
    outcome(pass, parts.join("; "))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 10] = [
        (1, "centralizer agrees with exact stacked kernel", Duration::from_secs(10), criterion_1),
        (2, "1D FD diversity curve vs bound", Duration::from_secs(300), criterion_2),
        (3, "2D FD diversity curve", Duration::from_secs(900), criterion_3),
        (4, "bound values vs exact rationals", Duration::from_secs(1), criterion_4),
        (5, "cosine-product nonzero counts, M = 2..64", Duration::from_secs(1), criterion_5),
        (6, "FEM matrices vs quadrature", Duration::from_secs(5), criterion_6),
        (7, "gradients vs central differences", Duration::from_secs(1), criterion_7),
        (8, "in-domain error scaling slope", Duration::from_secs(600), criterion_8),
        (9, "FD/FEM transfer", Duration::from_secs(1200), criterion_9),
        (10, "deterministic CLI reruns", Duration::from_secs(600), criterion_10),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run)
            .unwrap_or_else(|_| outcome(false, "panicked"));
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = result.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "criterion {id:>2} {}: {name} [{:.2}s of {}s] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { result.detail } else { format!("over time budget; {}", result.detail) }
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
