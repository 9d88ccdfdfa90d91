//! One-layer linear transformer for in-context learning of `y = A x`.
//!
//! For a prompt `(x_1, y_1), …, (x_n, y_n)` and a query `x`, the model
//! predicts `P · G · Q · x` with `G = (1/n) Σ y_i x_iᵀ`. Training minimizes
//! the mean squared prediction error over a fixed pool of prompts by
//! minibatch SGD with exact gradients.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{spectral_norm, DenseMatrix};
use crate::matrix_io::{read_matrix, write_matrix};
use crate::operators::{TaskDistribution, TaskSampler};
use crate::rng::RngStream;

/// Errors below this floor make the log-log slope meaningless.
pub const SLOPE_ERROR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainMeta {
    pub d: usize,
    pub seed: u64,
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub final_train_loss: f64,
    /// Divisor applied to the training tasks (1 when not prescaled).
    #[serde(default = "one")]
    pub task_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerParams {
    pub p: DenseMatrix,
    pub q: DenseMatrix,
    pub meta: TrainMeta,
}

impl TransformerParams {
    pub fn new(p: DenseMatrix, q: DenseMatrix, meta: TrainMeta) -> Result<Self> {
        let d = p.rows();
        if !p.is_square() || q.shape() != (d, d) || meta.d != d {
            return Err(Error::Sizing(format!(
                "P {}x{}, Q {}x{} and d = {} disagree",
                p.rows(),
                p.cols(),
                q.rows(),
                q.cols(),
                meta.d
            )));
        }
        if !p.is_finite() || !q.is_finite() {
            return domain("transformer weights must be finite");
        }
        Ok(Self { p, q, meta })
    }

    /// Untrained weights with the given matrices and placeholder metadata.
    pub fn from_weights(p: DenseMatrix, q: DenseMatrix) -> Result<Self> {
        let meta = TrainMeta {
            d: p.rows(),
            seed: 0,
            steps: 0,
            learning_rate: 0.0,
            batch_size: 0,
            final_train_loss: f64::NAN,
            task_scale: 1.0,
        };
        Self::new(p, q, meta)
    }

    pub fn d(&self) -> usize {
        self.p.rows()
    }

    /// Writes `P.txt`, `Q.txt` and `meta.json` into `dir`, which must exist.
    pub fn save(&self, dir: &Path) -> Result<()> {
        if !dir.is_dir() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("checkpoint directory {} does not exist", dir.display()),
            )));
        }
        write_matrix(&dir.join("P.txt"), &self.p)?;
        write_matrix(&dir.join("Q.txt"), &self.q)?;
        let mut meta = serde_json::to_string_pretty(&self.meta)
            .map_err(|e| Error::Parse(e.to_string()))?;
        meta.push('\n');
        fs::write(dir.join("meta.json"), meta)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let p = read_matrix(&dir.join("P.txt"))?;
        let q = read_matrix(&dir.join("Q.txt"))?;
        let meta: TrainMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)
            .map_err(|e| Error::Parse(format!("meta.json: {e}")))?;
        Self::new(p, q, meta)
    }
}

/// Demonstrations `ys[i] = task · xs[i]` plus one query and its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
    pub query: Vec<f64>,
    pub target: Vec<f64>,
    pub task: DenseMatrix,
}

impl Prompt {
    pub fn d(&self) -> usize {
        self.query.len()
    }

    pub fn moment(&self) -> Result<DenseMatrix> {
        moment(&self.xs, &self.ys)
    }
}

/// `(1/n) Σ y_i x_iᵀ`.
pub fn moment(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<DenseMatrix> {
    if xs.is_empty() {
        return domain("prompt needs at least one (x, y) pair");
    }
    if xs.len() != ys.len() {
        return Err(Error::Sizing(format!("{} xs but {} ys", xs.len(), ys.len())));
    }
    let d = xs[0].len();
    let mut g = DenseMatrix::zeros(d, d);
    accumulate_moment(&mut g, xs, ys)?;
    Ok(g.scale(1.0 / xs.len() as f64))
}

fn accumulate_moment(g: &mut DenseMatrix, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<()> {
    let d = g.rows();
    for (x, y) in xs.iter().zip(ys) {
        if x.len() != d || y.len() != d {
            return Err(Error::Sizing(format!("prompt vector length differs from d = {d}")));
        }
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] += y[i] * x[j];
            }
        }
    }
    Ok(())
}

/// `P · (G · (Q · query))`.
pub fn forward_with_moment(
    p: &DenseMatrix,
    q: &DenseMatrix,
    g: &DenseMatrix,
    query: &[f64],
) -> Result<Vec<f64>> {
    p.matvec(&g.matvec(&q.matvec(query)?)?)
}

pub fn tf_forward(
    params: &TransformerParams,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    query: &[f64],
) -> Result<Vec<f64>> {
    let g = moment(xs, ys)?;
    if g.rows() != params.d() || query.len() != params.d() {
        return Err(Error::Sizing(format!(
            "prompt dimension {} does not match model dimension {}",
            g.rows(),
            params.d()
        )));
    }
    forward_with_moment(&params.p, &params.q, &g, query)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean of `‖TF(prompt) - target‖²` over `prompts`.
pub fn empirical_risk(params: &TransformerParams, prompts: &[Prompt]) -> Result<f64> {
    if prompts.is_empty() {
        return domain("empirical risk needs at least one prompt");
    }
    let mut total = 0.0;
    for prompt in prompts {
        let pred = tf_forward(params, &prompt.xs, &prompt.ys, &prompt.query)?;
        total += squared_distance(&pred, &prompt.target);
    }
    Ok(total / prompts.len() as f64)
}

/// A prompt reduced to what training needs: its moment, query and target.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub g: DenseMatrix,
    pub query: Vec<f64>,
    pub target: Vec<f64>,
    /// `‖task‖₂`, used for step normalization.
    pub task_norm: f64,
}

impl Example {
    pub fn from_prompt(prompt: &Prompt) -> Result<Self> {
        Ok(Self {
            g: prompt.moment()?,
            query: prompt.query.clone(),
            target: prompt.target.clone(),
            task_norm: spectral_norm(&prompt.task)?,
        })
    }
}

/// Mean squared error over `examples` and its gradients with respect to `P`
/// and `Q`. With `r = PGQx - y`: `∂P = 2 r (GQx)ᵀ`, `∂Q = 2 Gᵀ Pᵀ r xᵀ`,
/// averaged.
pub fn risk_and_gradients(
    p: &DenseMatrix,
    q: &DenseMatrix,
    examples: &[&Example],
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    if examples.is_empty() {
        return domain("gradient needs at least one example");
    }
    let d = p.rows();
    let mut grad_p = DenseMatrix::zeros(d, d);
    let mut grad_q = DenseMatrix::zeros(d, d);
    let mut loss = 0.0;
    for ex in examples {
        let qx = q.matvec(&ex.query)?;
        let gqx = ex.g.matvec(&qx)?;
        let pred = p.matvec(&gqx)?;
        let r: Vec<f64> = pred.iter().zip(&ex.target).map(|(a, b)| a - b).collect();
        loss += r.iter().map(|v| v * v).sum::<f64>();
        let ptr = p.tr_matvec(&r)?;
        let back = ex.g.tr_matvec(&ptr)?;
        for i in 0..d {
            for j in 0..d {
                grad_p[(i, j)] += r[i] * gqx[j];
                grad_q[(i, j)] += back[i] * ex.query[j];
            }
        }
    }
    let n = examples.len() as f64;
    Ok((loss / n, grad_p.scale(2.0 / n), grad_q.scale(2.0 / n)))
}

fn mean_loss(p: &DenseMatrix, q: &DenseMatrix, examples: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let pred = forward_with_moment(p, q, &ex.g, &ex.query)?;
        total += squared_distance(&pred, &ex.target);
    }
    Ok(total / examples.len() as f64)
}

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Prompt of length `n` for a fixed task matrix.
pub fn prompt_for_task<R: Rng + ?Sized>(task: DenseMatrix, n: usize, rng: &mut R) -> Result<Prompt> {
    if n == 0 {
        return domain("prompt length n must be >= 1");
    }
    if !task.is_square() {
        return domain("task matrix must be square");
    }
    let d = task.rows();
    let xs: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vector(rng, d)).collect();
    let query = gaussian_vector(rng, d);
    let ys = xs.iter().map(|x| task.matvec(x)).collect::<Result<Vec<_>>>()?;
    let target = task.matvec(&query)?;
    Ok(Prompt { xs, ys, query, target, task })
}

pub fn sample_prompt(dist: &TaskDistribution, n: usize, rng: RngStream) -> Result<Prompt> {
    sample_prompt_scaled(dist, n, 1.0, rng)
}

/// Like [`sample_prompt`] with the task divided by `scale`.
pub fn sample_prompt_scaled(
    dist: &TaskDistribution,
    n: usize,
    scale: f64,
    rng: RngStream,
) -> Result<Prompt> {
    let sampler = TaskSampler::new(dist)?;
    prompt_from_sampler(&sampler, n, scale, rng)
}

fn prompt_from_sampler(sampler: &TaskSampler, n: usize, scale: f64, rng: RngStream) -> Result<Prompt> {
    let mut r = rng.rng();
    let mut task = sampler.sample(&mut r)?;
    if scale != 1.0 {
        task = task.scale(1.0 / scale);
    }
    prompt_for_task(task, n, &mut r)
}

/// Optional division of every training task by a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskScaling {
    #[default]
    None,
    /// Divide by a fixed positive constant.
    Constant { value: f64 },
    /// Divide by the largest spectral norm among `samples` draws.
    SpectralEstimate { samples: usize },
}

impl TaskScaling {
    pub fn resolve(&self, dist: &TaskDistribution, rng: RngStream) -> Result<f64> {
        match *self {
            TaskScaling::None => Ok(1.0),
            TaskScaling::Constant { value } => {
                if !(value.is_finite() && value > 0.0) {
                    return domain(format!("scaling constant {value} must be finite and > 0"));
                }
                Ok(value)
            }
            TaskScaling::SpectralEstimate { samples } => {
                if samples == 0 {
                    return domain("spectral estimate needs at least one sample");
                }
                let sampler = TaskSampler::new(dist)?;
                let mut r = rng.rng();
                let mut best = 0.0f64;
                for _ in 0..samples {
                    best = best.max(spectral_norm(&sampler.sample(&mut r)?)?);
                }
                if best == 0.0 {
                    return domain("sampled tasks are all zero");
                }
                Ok(best)
            }
        }
    }
}

fn default_tasks() -> usize {
    2000
}
fn default_prompt_length() -> usize {
    200
}
fn default_learning_rate() -> f64 {
    1e-2
}
fn default_final_learning_rate() -> f64 {
    1e-4
}
fn default_batch_size() -> usize {
    64
}
fn default_steps() -> usize {
    20_000
}
fn default_true() -> bool {
    true
}

/// SGD hyperparameters and training-set size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Number of training prompts `N`.
    #[serde(default = "default_tasks")]
    pub tasks: usize,
    /// Training prompt length `n`.
    #[serde(default = "default_prompt_length")]
    pub prompt_length: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// End point of the cosine decay.
    #[serde(default = "default_final_learning_rate")]
    pub final_learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Initial entries are `N(0, init_scale² / d)`.
    #[serde(default = "one")]
    pub init_scale: f64,
    /// Divide step sizes by the mean of `‖A‖₂²` over the training tasks.
    #[serde(default = "default_true")]
    pub normalize_step: bool,
    #[serde(default)]
    pub scaling: TaskScaling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            tasks: default_tasks(),
            prompt_length: default_prompt_length(),
            learning_rate: default_learning_rate(),
            final_learning_rate: default_final_learning_rate(),
            batch_size: default_batch_size(),
            steps: default_steps(),
            init_scale: 1.0,
            normalize_step: true,
            scaling: TaskScaling::None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return domain("steps must be >= 1");
        }
        if self.batch_size == 0 || self.tasks < self.batch_size {
            return domain(format!(
                "need tasks >= batch_size >= 1 (tasks = {}, batch_size = {})",
                self.tasks, self.batch_size
            ));
        }
        if self.prompt_length == 0 {
            return domain("prompt_length must be >= 1");
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("final_learning_rate", self.final_learning_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} = {v} must be finite and > 0"));
            }
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return domain(format!("init_scale = {} must be finite and > 0", self.init_scale));
        }
        Ok(())
    }

    /// Cosine decay from `learning_rate` at step 0 to `final_learning_rate`.
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        let t = step as f64 / self.steps as f64;
        self.final_learning_rate
            + 0.5 * (self.learning_rate - self.final_learning_rate) * (1.0 + (PI * t).cos())
    }
}

/// Trained weights plus the full training loss every 100 steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: TransformerParams,
    /// `(step, loss)`; includes step 0 and the final step.
    pub history: Vec<(usize, f64)>,
}

pub const HISTORY_INTERVAL: usize = 100;

/// Draws `N` training prompts (prompt `i` on substream `i`) and reduces
/// them to examples.
pub fn generate_examples(
    dist: &TaskDistribution,
    tasks: usize,
    prompt_length: usize,
    scale: f64,
    rng: RngStream,
) -> Result<Vec<Example>> {
    let sampler = TaskSampler::new(dist)?;
    (0..tasks as u64)
        .into_par_iter()
        .map(|i| Example::from_prompt(&prompt_from_sampler(&sampler, prompt_length, scale, rng.substream(i))?))
        .collect()
}

pub fn train(dist: &TaskDistribution, config: &TrainConfig, rng: RngStream) -> Result<TransformerParams> {
    Ok(train_with_history(dist, config, rng)?.params)
}

pub fn train_with_history(
    dist: &TaskDistribution,
    config: &TrainConfig,
    rng: RngStream,
) -> Result<TrainOutcome> {
    config.validate()?;
    dist.validate()?;
    let scale = config.scaling.resolve(dist, rng.substream(u64::MAX - 1))?;
    let examples = generate_examples(dist, config.tasks, config.prompt_length, scale, rng)?;
    let mut outcome = train_on_examples(&examples, config, rng.substream(u64::MAX))?;
    outcome.params.meta.seed = rng.seed;
    outcome.params.meta.task_scale = scale;
    Ok(outcome)
}

/// SGD over a fixed pool. Minibatches walk a fresh shuffle of the pool each
/// epoch.
pub fn train_on_examples(
    examples: &[Example],
    config: &TrainConfig,
    rng: RngStream,
) -> Result<TrainOutcome> {
    config.validate()?;
    if examples.len() < config.batch_size {
        return domain(format!(
            "{} examples cannot fill a batch of {}",
            examples.len(),
            config.batch_size
        ));
    }
    let d = examples[0].g.rows();
    let mut r = rng.rng();
    let init = Normal::new(0.0, config.init_scale / (d as f64).sqrt())
        .map_err(|e| Error::Domain(e.to_string()))?;
    let draw = |r: &mut rand_chacha::ChaCha20Rng| {
        let data = (0..d * d).map(|_| r.sample(init)).collect();
        DenseMatrix::from_row_major(d, d, data)
    };
    let mut p = draw(&mut r)?;
    let mut q = draw(&mut r)?;

    let step_scale = if config.normalize_step {
        let s = examples.iter().map(|e| e.task_norm * e.task_norm).sum::<f64>() / examples.len() as f64;
        if s > 0.0 {
            s
        } else {
            1.0
        }
    } else {
        1.0
    };

    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut r);
    let mut cursor = 0;
    let mut history = vec![(0, mean_loss(&p, &q, examples)?)];
    for step in 0..config.steps {
        if cursor + config.batch_size > order.len() {
            order.shuffle(&mut r);
            cursor = 0;
        }
        let batch: Vec<&Example> = order[cursor..cursor + config.batch_size]
            .iter()
            .map(|&i| &examples[i])
            .collect();
        cursor += config.batch_size;
        let (loss, gp, gq) = risk_and_gradients(&p, &q, &batch)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { step, loss });
        }
        let lr = config.learning_rate_at(step) / step_scale;
        p = &p - &gp.scale(lr);
        q = &q - &gq.scale(lr);
        if (step + 1) % HISTORY_INTERVAL == 0 || step + 1 == config.steps {
            let full = mean_loss(&p, &q, examples)?;
            if !full.is_finite() {
                return Err(Error::Divergence { step: step + 1, loss: full });
            }
            history.push((step + 1, full));
        }
    }
    let final_train_loss = history.last().expect("history is nonempty").1;
    let meta = TrainMeta {
        d,
        seed: rng.seed,
        steps: config.steps,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        final_train_loss,
        task_scale: 1.0,
    };
    Ok(TrainOutcome {
        params: TransformerParams::new(p, q, meta)?,
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Mean of `‖ŷ - y‖²`.
    Mse,
    /// `Σ ‖ŷ - y‖² / Σ ‖y‖²` over all queries at a given `m`.
    ShiftedRelative,
}

impl ErrorKind {
    pub fn label(&self) -> &'static str {
        match self {
            ErrorKind::Mse => "MSE",
            ErrorKind::ShiftedRelative => "shifted-relative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub prompt_lengths: Vec<usize>,
    pub errors: Vec<f64>,
    pub error_kind: ErrorKind,
    /// `None` when fewer than two points or some error is below
    /// [`SLOPE_ERROR_FLOOR`].
    pub fitted_slope: Option<f64>,
    pub task_count: usize,
}

/// Least-squares slope of `ln e` against `ln m`.
pub fn fit_loglog_slope(ms: &[usize], errors: &[f64]) -> Option<f64> {
    if ms.len() != errors.len() || ms.len() < 2 || errors.iter().any(|&e| !(e >= SLOPE_ERROR_FLOOR)) {
        return None;
    }
    let xs: Vec<f64> = ms.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

fn default_queries() -> usize {
    10
}

/// Evaluation protocol: prompt lengths, number of fresh tasks and queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub m_values: Vec<usize>,
    pub tasks: usize,
    #[serde(default = "default_queries")]
    pub queries_per_task: usize,
    pub error_kind: ErrorKind,
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() {
            return domain("m_values must be nonempty");
        }
        if self.m_values[0] == 0 || self.m_values.windows(2).any(|w| w[0] >= w[1]) {
            return domain("m_values must be positive and strictly increasing");
        }
        if self.tasks == 0 || self.queries_per_task == 0 {
            return domain("tasks and queries_per_task must be >= 1");
        }
        Ok(())
    }
}

/// Error of `params` on fresh prompts from `test_dist` at every prompt
/// length. Task `t` draws its matrix, the longest prompt and its queries from
/// substream `t`; shorter prompts are prefixes, so all lengths see the same
/// tasks.
pub fn evaluate(
    params: &TransformerParams,
    test_dist: &TaskDistribution,
    config: &EvalConfig,
    rng: RngStream,
) -> Result<EvalReport> {
    config.validate()?;
    let sampler = TaskSampler::new(test_dist)?;
    let d = test_dist.d();
    if d != params.d() {
        return domain(format!(
            "test distribution has d = {d} but the model has d = {}",
            params.d()
        ));
    }
    let m_max = *config.m_values.last().expect("nonempty");
    let per_task = (0..config.tasks as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<(f64, f64)>> {
            let mut r = rng.substream(t).rng();
            let task = sampler.sample(&mut r)?;
            let xs: Vec<Vec<f64>> = (0..m_max).map(|_| gaussian_vector(&mut r, d)).collect();
            let ys = xs.iter().map(|x| task.matvec(x)).collect::<Result<Vec<_>>>()?;
            let queries: Vec<Vec<f64>> = (0..config.queries_per_task)
                .map(|_| gaussian_vector(&mut r, d))
                .collect();
            let targets = queries.iter().map(|x| task.matvec(x)).collect::<Result<Vec<_>>>()?;
            config
                .m_values
                .iter()
                .map(|&m| {
                    let g = moment(&xs[..m], &ys[..m])?;
                    let mut err = 0.0;
                    let mut energy = 0.0;
                    for (x, y) in queries.iter().zip(&targets) {
                        let pred = forward_with_moment(&params.p, &params.q, &g, x)?;
                        err += squared_distance(&pred, y);
                        energy += y.iter().map(|v| v * v).sum::<f64>();
                    }
                    Ok((err, energy))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let count = (config.tasks * config.queries_per_task) as f64;
    let errors: Vec<f64> = (0..config.m_values.len())
        .map(|k| {
            let (err, energy) = per_task
                .iter()
                .fold((0.0, 0.0), |(e, s), row| (e + row[k].0, s + row[k].1));
            match config.error_kind {
                ErrorKind::Mse => err / count,
                ErrorKind::ShiftedRelative => {
                    if energy > 0.0 {
                        err / energy
                    } else {
                        f64::NAN
                    }
                }
            }
        })
        .collect();
    if errors.iter().any(|e| !e.is_finite()) {
        return domain("evaluation produced a non-finite error (all targets zero?)");
    }
    Ok(EvalReport {
        fitted_slope: fit_loglog_slope(&config.m_values, &errors),
        prompt_lengths: config.m_values.clone(),
        errors,
        error_kind: config.error_kind,
        task_count: config.tasks,
    })
}

/// Trains once on `train_dist` (substream 0) and evaluates on each test
/// distribution with a shared evaluation stream (substream 1).
pub fn ood_suite(
    train_dist: &TaskDistribution,
    test_dists: &[TaskDistribution],
    train_config: &TrainConfig,
    eval_config: &EvalConfig,
    rng: RngStream,
) -> Result<(TransformerParams, Vec<EvalReport>)> {
    let d = train_dist.d();
    if let Some(bad) = test_dists.iter().find(|t| t.d() != d) {
        return domain(format!(
            "test distribution has d = {} but training uses d = {d}",
            bad.d()
        ));
    }
    let params = train(train_dist, train_config, rng.substream(0))?;
    let reports = test_dists
        .iter()
        .map(|t| evaluate(&params, t, eval_config, rng.substream(1)))
        .collect::<Result<Vec<_>>>()?;
    Ok((params, reports))
}
