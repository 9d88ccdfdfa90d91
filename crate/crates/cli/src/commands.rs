use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use matdiv_core::bounds::{bound_fd, bound_fd2, bound_fem, bound_main, bound_thm2, BoundResult, Theorem};
use matdiv_core::centralizer::estimate_diversity_probability;
use matdiv_core::icl::{evaluate, train_with_history, EvalConfig, TransformerParams};
use matdiv_core::matrix_io::write_matrix;
use matdiv_core::operators::{deterministic_part, TaskSampler};
use matdiv_core::{Method, RngStream};

use crate::config::{
    BoundSweep, BoundsConfig, DiversityConfig, GenConfig, IclEvalConfig, IclTrainConfig, ToleranceConfig,
};
use crate::error::CliError;
use crate::svg::{self, Plot, Scale, Series};

/// Options shared by every command.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub svg: bool,
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    if !dir.is_dir() {
        return Err(CliError::Io(format!("output directory {} does not exist", dir.display())));
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const DIVERSITY_HEADER: &str =
    "method,M,D,p,N,trials,successes,p_hat,stderr,bound_thm_fd2,bound_thm_fd_augmented";

pub fn diversity(cfg: &DiversityConfig, opts: &RunOptions) -> Result<(), CliError> {
    cfg.validate()?;
    ensure_out_dir(&opts.out)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let tol = ToleranceConfig::build(cfg.tolerance)?;
    let ns = cfg.n_values.values("N")?;
    let mut csv = format!("{DIVERSITY_HEADER}\n");
    let mut series = Vec::new();
    for (pi, &p) in cfg.p_values.iter().enumerate() {
        let dist = cfg.distribution(p)?;
        let mut points = Vec::new();
        for &n in &ns {
            let stream = RngStream::new(seed, ((pi as u64) << 32) | n as u64);
            let est = estimate_diversity_probability(&dist, n, cfg.trials, cfg.augment, stream, tol)?;
            let (fd2, augmented) = match cfg.method {
                Method::FiniteDifference => (
                    if cfg.dim == 1 { bound_fd2(cfg.grid_size, p, n).ok() } else { None },
                    bound_fd(cfg.grid_size, cfg.dim, p, n).ok(),
                ),
                Method::FiniteElement => (None, bound_fem(cfg.grid_size, p, n).ok()),
            };
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{}",
                cfg.method.label(),
                cfg.grid_size,
                dist.dim,
                p,
                n,
                est.trials,
                est.successes,
                est.p_hat,
                est.stderr,
                opt(fd2.map(|b| b.clamped)),
                opt(augmented.map(|b| b.clamped)),
            )
            .expect("writing to a String");
            points.push((n as f64, est.p_hat));
        }
        series.push(Series { label: format!("p = {p}"), points });
    }
    write_file(&opts.out.join("diversity.csv"), &csv)?;
    if opts.svg {
        let plot = Plot {
            title: &format!("Trivial centralizer probability ({}, M = {}, D = {})", cfg.method.label(), cfg.grid_size, cfg.dim),
            x_label: "sample size N",
            y_label: "estimated probability",
            scale: Scale::Linear,
            series: &series,
            reference_slope: None,
        };
        write_file(&opts.out.join("diversity.svg"), &svg::render(&plot))?;
    }
    Ok(())
}

pub const BOUNDS_HEADER: &str = "theorem,d,M,D,p,c_input,N,raw,clamped,c,c_V,status";

#[derive(Debug, Clone, Copy, Default)]
struct BoundPoint {
    d: Option<usize>,
    grid_size: Option<usize>,
    dim: Option<usize>,
    p: Option<f64>,
    c_input: Option<f64>,
    n: usize,
}

fn sweep_points(sweep: &BoundSweep, theorem: Theorem) -> Result<Vec<BoundPoint>, CliError> {
    let key = |name: &str| format!("{}: {name}", theorem.label());
    let need = |present: bool, name: &str| -> Result<(), CliError> {
        if present {
            Ok(())
        } else {
            Err(CliError::Config(format!("{} is required", key(name))))
        }
    };
    let forbid = |present: bool, name: &str| -> Result<(), CliError> {
        if present {
            Err(CliError::Config(format!("{} does not apply to this theorem", key(name))))
        } else {
            Ok(())
        }
    };
    let (uses_d, uses_c, uses_cv, uses_m, uses_dim, uses_p) = match theorem {
        Theorem::Main => (true, true, false, false, false, false),
        Theorem::Thm2 => (true, false, true, false, false, false),
        Theorem::Fd => (false, false, false, true, true, true),
        Theorem::Fd2 | Theorem::Fem => (false, false, false, true, false, true),
    };
    for (uses, present, name) in [
        (uses_d, sweep.d.is_some(), "d"),
        (uses_c, sweep.c.is_some(), "c"),
        (uses_cv, sweep.c_v.is_some(), "c_V"),
        (uses_m, sweep.grid_size.is_some(), "M"),
        (uses_p, sweep.p.is_some(), "p"),
    ] {
        if uses {
            need(present, name)?;
        } else {
            forbid(present, name)?;
        }
    }
    if !uses_dim {
        forbid(sweep.dim.is_some(), "D")?;
    }
    let ns = sweep.n_values.values(&key("N"))?;
    let ints = |v: &Option<Vec<usize>>| v.clone().map(|v| v.into_iter().map(Some).collect()).unwrap_or(vec![None]);
    let reals = |v: &Option<Vec<f64>>| v.clone().map(|v| v.into_iter().map(Some).collect()).unwrap_or(vec![None]);
    let c_inputs = if uses_c { reals(&sweep.c) } else { reals(&sweep.c_v) };
    let dims = if uses_dim { sweep.dim.clone().unwrap_or(vec![1]).into_iter().map(Some).collect() } else { vec![None] };
    let mut points = Vec::new();
    for d in ints(&sweep.d) {
        for grid_size in ints(&sweep.grid_size) {
            for &dim in &dims {
                for p in reals(&sweep.p) {
                    for &c_input in &c_inputs {
                        for &n in &ns {
                            points.push(BoundPoint { d, grid_size, dim, p, c_input, n });
                        }
                    }
                }
            }
        }
    }
    Ok(points)
}

fn evaluate_point(theorem: Theorem, pt: &BoundPoint) -> matdiv_core::Result<BoundResult> {
    let u = |v: Option<usize>| v.expect("validated");
    let f = |v: Option<f64>| v.expect("validated");
    match theorem {
        Theorem::Main => bound_main(u(pt.d), f(pt.c_input), pt.n),
        Theorem::Thm2 => bound_thm2(u(pt.d), f(pt.c_input), pt.n),
        Theorem::Fd => bound_fd(u(pt.grid_size), u(pt.dim), f(pt.p), pt.n),
        Theorem::Fd2 => bound_fd2(u(pt.grid_size), f(pt.p), pt.n),
        Theorem::Fem => bound_fem(u(pt.grid_size), f(pt.p), pt.n),
    }
}

fn sanitize(msg: &str) -> String {
    msg.replace([',', '\n', '\r'], ";")
}

/// Writes every row; rows whose hypotheses fail carry an error status and
/// make the command return [`CliError::Partial`].
pub fn bounds(cfg: &BoundsConfig, opts: &RunOptions) -> Result<(), CliError> {
    if cfg.sweeps.is_empty() {
        return Err(CliError::Config("sweeps: must be nonempty".into()));
    }
    let mut plan = Vec::new();
    for (i, sweep) in cfg.sweeps.iter().enumerate() {
        let theorem = Theorem::from_label(&sweep.theorem).ok_or_else(|| {
            CliError::Config(format!(
                "sweeps[{i}].theorem {:?}: expected one of ThmMain, Thm2, ThmFD, ThmFD2, ThmFEM",
                sweep.theorem
            ))
        })?;
        plan.push((theorem, sweep_points(sweep, theorem)?));
    }
    ensure_out_dir(&opts.out)?;
    let mut csv = format!("{BOUNDS_HEADER}\n");
    let mut failures = 0;
    let u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for (theorem, points) in &plan {
        for pt in points {
            let prefix = format!(
                "{},{},{},{},{},{},{}",
                theorem.label(),
                u(pt.d),
                u(pt.grid_size),
                u(pt.dim),
                opt(pt.p),
                opt(pt.c_input),
                pt.n
            );
            match evaluate_point(*theorem, pt) {
                Ok(r) => writeln!(
                    csv,
                    "{prefix},{},{},{},{},ok",
                    r.raw_value,
                    r.clamped,
                    opt(r.constant("c")),
                    opt(r.constant("c_V"))
                ),
                Err(e) => {
                    failures += 1;
                    eprintln!("{}: {e}", theorem.label());
                    writeln!(csv, "{prefix},,,,,error: {}", sanitize(&e.to_string()))
                }
            }
            .expect("writing to a String");
        }
    }
    write_file(&opts.out.join("bounds.csv"), &csv)?;
    if failures > 0 {
        return Err(CliError::Partial(failures));
    }
    Ok(())
}

pub fn icl_train(cfg: &IclTrainConfig, opts: &RunOptions) -> Result<(), CliError> {
    cfg.distribution.validate()?;
    cfg.train.validate()?;
    ensure_out_dir(&opts.out)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let outcome = train_with_history(&cfg.distribution, &cfg.train, RngStream::new(seed, 0))?;
    outcome.params.save(&opts.out)?;
    let mut csv = String::from("step,loss\n");
    for (step, loss) in &outcome.history {
        writeln!(csv, "{step},{loss}").expect("writing to a String");
    }
    write_file(&opts.out.join("loss_history.csv"), &csv)?;
    println!("final_train_loss {}", outcome.params.meta.final_train_loss);
    Ok(())
}

pub const EVAL_HEADER: &str = "test_label,m,error,error_kind";

/// Relative checkpoint paths are taken relative to the config file.
pub fn icl_eval(cfg: &IclEvalConfig, config_dir: &Path, opts: &RunOptions) -> Result<(), CliError> {
    cfg.validate()?;
    let eval = EvalConfig {
        m_values: cfg.m_values.clone(),
        tasks: cfg.tasks,
        queries_per_task: cfg.queries_per_task,
        error_kind: cfg.error_kind,
    };
    eval.validate()?;
    ensure_out_dir(&opts.out)?;
    let checkpoint = if cfg.checkpoint.is_absolute() {
        cfg.checkpoint.clone()
    } else {
        config_dir.join(&cfg.checkpoint)
    };
    let params = TransformerParams::load(&checkpoint)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let mut series = Vec::new();
    for (i, test) in cfg.tests.iter().enumerate() {
        if test.distribution.d() != params.d() {
            return Err(CliError::Config(format!(
                "tests[{i}] has d = {} but the checkpoint has d = {}",
                test.distribution.d(),
                params.d()
            )));
        }
        let report = evaluate(&params, &test.distribution, &eval, RngStream::new(seed, 0))?;
        let mut csv = format!("{EVAL_HEADER}\n");
        for (m, err) in report.prompt_lengths.iter().zip(&report.errors) {
            writeln!(csv, "{},{m},{err},{}", test.label, report.error_kind.label()).expect("writing to a String");
        }
        let slope = report.fitted_slope.map(|s| s.to_string()).unwrap_or_else(|| "NA".into());
        writeln!(csv, "slope,{slope}").expect("writing to a String");
        write_file(&opts.out.join(format!("eval_{}.csv", test.label)), &csv)?;
        println!("{} slope {slope}", test.label);
        series.push(Series {
            label: test.label.clone(),
            points: report.prompt_lengths.iter().map(|&m| m as f64).zip(report.errors.iter().copied()).collect(),
        });
    }
    if opts.svg {
        let plot = Plot {
            title: "Error against inference prompt length",
            x_label: "prompt length m",
            y_label: cfg.error_kind.label(),
            scale: Scale::LogLog,
            series: &series,
            reference_slope: Some(-1.0),
        };
        write_file(&opts.out.join("eval.svg"), &svg::render(&plot))?;
    }
    Ok(())
}

pub fn gen(cfg: &GenConfig, opts: &RunOptions) -> Result<(), CliError> {
    cfg.distribution.validate()?;
    ensure_out_dir(&opts.out)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    if cfg.write_deterministic {
        write_matrix(&opts.out.join("K.txt"), &deterministic_part(&cfg.distribution)?)?;
    }
    let sampler = TaskSampler::new(&cfg.distribution)?;
    for i in 0..cfg.count {
        let a = sampler.sample(&mut RngStream::new(seed, i as u64).rng())?;
        write_matrix(&opts.out.join(format!("sample_{i:04}.txt")), &a)?;
    }
    Ok(())
}
