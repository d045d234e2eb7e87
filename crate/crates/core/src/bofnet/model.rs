use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::circle_loss_grad;
use super::train::TrainHyper;
use super::BofError;
use crate::featurize::{vectorize, FeatureBag, SparseVector, VectorMode, Vocabulary};

/// How feature multiplicity enters the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Each distinct feature counts once.
    #[default]
    Set,
    /// Features weighted by their count.
    Count,
}

impl Pooling {
    pub fn vector_mode(self) -> VectorMode {
        match self {
            Pooling::Set => VectorMode::Binary,
            Pooling::Count => VectorMode::Count,
        }
    }
}

/// Embedding table, projection weight (row-major `dim × dim`) and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BofModel {
    pub dim: usize,
    pub vocab_size: usize,
    pub dropout: f64,
    pub pooling: Pooling,
    pub embeddings: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    fn zeros(model: &BofModel) -> Self {
        Gradients {
            embeddings: vec![0.0; model.embeddings.len()],
            weight: vec![0.0; model.weight.len()],
            bias: vec![0.0; model.bias.len()],
        }
    }

    fn flat(&self, k: usize) -> f64 {
        let (e, w) = (self.embeddings.len(), self.weight.len());
        if k < e {
            self.embeddings[k]
        } else if k < e + w {
            self.weight[k - e]
        } else {
            self.bias[k - e - w]
        }
    }
}

impl BofModel {
    /// Embeddings and weight uniform in ±1/√dim, zero bias.
    pub fn new(vocab_size: usize, dim: usize, dropout: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (dim as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-bound..bound)).collect::<Vec<f64>>();
        let embeddings = draw(vocab_size * dim);
        let weight = draw(dim * dim);
        BofModel {
            dim,
            vocab_size,
            dropout,
            pooling: Pooling::Set,
            embeddings,
            weight,
            bias: vec![0.0; dim],
        }
    }

    pub fn embedding(&self, row: usize) -> &[f64] {
        &self.embeddings[row * self.dim..(row + 1) * self.dim]
    }

    pub fn n_params(&self) -> usize {
        self.embeddings.len() + self.weight.len() + self.bias.len()
    }

    fn flat_mut(&mut self, k: usize) -> &mut f64 {
        let (e, w) = (self.embeddings.len(), self.weight.len());
        if k < e {
            &mut self.embeddings[k]
        } else if k < e + w {
            &mut self.weight[k - e]
        } else {
            &mut self.bias[k - e - w]
        }
    }

    fn check_input(&self, input: &SparseVector) -> Result<(), BofError> {
        if input.dimension != self.vocab_size {
            return Err(BofError::Shape { expected: self.vocab_size, found: input.dimension });
        }
        Ok(())
    }
}

/// Per-program forward intermediates.
struct Trace {
    /// Inverted-dropout multipliers, `features × dim`.
    mask: Option<Vec<f64>>,
    weight_total: f64,
    pooled: Vec<f64>,
    code: Vec<f64>,
}

fn forward(model: &BofModel, input: &SparseVector, rng: Option<&mut ChaCha8Rng>) -> Trace {
    let d = model.dim;
    let mask = match rng {
        Some(rng) if model.dropout > 0.0 => {
            let keep = 1.0 / (1.0 - model.dropout);
            Some(
                (0..input.entries.len() * d)
                    .map(|_| if rng.gen::<f64>() < model.dropout { 0.0 } else { keep })
                    .collect::<Vec<f64>>(),
            )
        }
        _ => None,
    };
    let weight_total: f64 = input.entries.iter().map(|e| e.1).sum();
    let mut pooled = vec![0.0; d];
    if weight_total > 0.0 {
        for (f, &(row, w)) in input.entries.iter().enumerate() {
            let e = model.embedding(row as usize);
            for k in 0..d {
                let m = mask.as_ref().map_or(1.0, |m| m[f * d + k]);
                pooled[k] += w * m * e[k];
            }
        }
        pooled.iter_mut().for_each(|v| *v /= weight_total);
    }
    let code = (0..d)
        .map(|r| model.bias[r] + model.weight[r * d..(r + 1) * d].iter().zip(&pooled).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    Trace { mask, weight_total, pooled, code }
}

/// Code vector of a vectorized program. Dropout applies only when `rng` is given.
pub fn embed_input(model: &BofModel, input: &SparseVector, rng: Option<&mut ChaCha8Rng>) -> Result<Vec<f64>, BofError> {
    model.check_input(input)?;
    Ok(forward(model, input, rng).code)
}

/// Code vector of a feature bag: `W · mean(dropout(e_x)) + b`.
pub fn embed_program(
    model: &BofModel,
    bag: &FeatureBag,
    vocab: &Vocabulary,
    train_mode: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, BofError> {
    let input = vectorize(bag, vocab, model.pooling.vector_mode());
    embed_input(model, &input, train_mode.then_some(rng))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Pairwise cosine similarities; zero vectors are rejected.
pub fn similarity_matrix(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, BofError> {
    let units = unit_vectors(vectors)?;
    Ok(cosines(&units))
}

fn unit_vectors(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, BofError> {
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let n = norm(v);
            if !n.is_finite() {
                return Err(BofError::NonFinite(format!("code vector {i}")));
            }
            if n == 0.0 {
                return Err(BofError::ZeroCodeVector(i));
            }
            Ok(v.iter().map(|x| x / n).collect())
        })
        .collect()
}

fn cosines(units: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = units.len();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        s[i][i] = 1.0;
        for j in i + 1..n {
            let v: f64 = units[i].iter().zip(&units[j]).map(|(a, b)| a * b).sum();
            s[i][j] = v;
            s[j][i] = v;
        }
    }
    s
}

/// Batch loss without dropout.
pub fn batch_loss(model: &BofModel, inputs: &[&SparseVector], same: &[Vec<bool>], hyper: &TrainHyper) -> Result<f64, BofError> {
    let codes: Vec<Vec<f64>> = inputs.iter().map(|x| embed_input(model, x, None)).collect::<Result<_, _>>()?;
    let s = similarity_matrix(&codes)?;
    Ok(circle_loss_grad(&s, same, hyper.gamma, hyper.margin).0)
}

/// Loss and analytic gradients for one batch. Dropout applies when `rng` is given.
pub fn backward(
    model: &BofModel,
    inputs: &[&SparseVector],
    same: &[Vec<bool>],
    hyper: &TrainHyper,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Gradients), BofError> {
    let d = model.dim;
    for x in inputs {
        model.check_input(x)?;
    }
    let traces: Vec<Trace> = inputs.iter().map(|x| forward(model, x, rng.as_deref_mut())).collect();
    let codes: Vec<Vec<f64>> = traces.iter().map(|t| t.code.clone()).collect();
    let units = unit_vectors(&codes)?;
    let s = cosines(&units);
    let (loss, ds) = circle_loss_grad(&s, same, hyper.gamma, hyper.margin);
    if !loss.is_finite() {
        return Err(BofError::NonFinite("loss".into()));
    }

    let n = inputs.len();
    let mut du = vec![vec![0.0; d]; n];
    for i in 0..n {
        for j in i + 1..n {
            let g = ds[i][j];
            if g == 0.0 {
                continue;
            }
            for k in 0..d {
                du[i][k] += g * units[j][k];
                du[j][k] += g * units[i][k];
            }
        }
    }

    let mut grads = Gradients::zeros(model);
    for (i, t) in traces.iter().enumerate() {
        // through the normalization: (g − u(u·g)) / ‖c‖
        let u = &units[i];
        let c_norm = norm(&t.code);
        let proj: f64 = u.iter().zip(&du[i]).map(|(a, b)| a * b).sum();
        let dc: Vec<f64> = (0..d).map(|k| (du[i][k] - u[k] * proj) / c_norm).collect();

        let mut dh = vec![0.0; d];
        for r in 0..d {
            grads.bias[r] += dc[r];
            let row = &model.weight[r * d..(r + 1) * d];
            for k in 0..d {
                grads.weight[r * d + k] += dc[r] * t.pooled[k];
                dh[k] += row[k] * dc[r];
            }
        }
        if t.weight_total == 0.0 {
            continue;
        }
        for (f, &(row, w)) in inputs[i].entries.iter().enumerate() {
            let scale = w / t.weight_total;
            let base = row as usize * d;
            for k in 0..d {
                let m = t.mask.as_ref().map_or(1.0, |m| m[f * d + k]);
                grads.embeddings[base + k] += scale * m * dh[k];
            }
        }
    }
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !(finite(&grads.embeddings) && finite(&grads.weight) && finite(&grads.bias)) {
        return Err(BofError::NonFinite("gradients".into()));
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates where both gradients are below the zero tolerance; these
    /// only need to agree within that tolerance.
    pub skipped_zero: usize,
    /// Near-zero coordinates whose absolute error exceeds the zero tolerance.
    pub zero_violations: usize,
}

impl GradCheck {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_rel_error <= rel_tol && self.zero_violations == 0
    }
}

/// Gradients below `ZERO_TOL · max(1, ‖g‖∞)` count as zero. Central
/// differences carry roughly `ulp(L)/ε` of noise, so tiny entries next to a
/// large gradient have no meaningful relative error.
const ZERO_TOL: f64 = 1e-8;

/// Central-difference check of [`backward`] on up to `max_params` sampled
/// coordinates, dropout off.
pub fn grad_check(
    model: &BofModel,
    inputs: &[&SparseVector],
    same: &[Vec<bool>],
    hyper: &TrainHyper,
    epsilon: f64,
    max_params: usize,
    seed: u64,
) -> Result<GradCheck, BofError> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(BofError::Hyper(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }
    let (_, grads) = backward(model, inputs, same, hyper, None)?;
    let total = model.n_params();
    let mut coords: Vec<usize> = if max_params >= total {
        (0..total).collect()
    } else {
        sample(&mut ChaCha8Rng::seed_from_u64(seed), total, max_params).into_vec()
    };
    coords.sort_unstable();

    let g_max = (0..total).map(|k| grads.flat(k).abs()).fold(0.0, f64::max);
    let zero_tol = ZERO_TOL * g_max.max(1.0);
    let mut probe = model.clone();
    let mut result = GradCheck { max_rel_error: 0.0, checked: 0, skipped_zero: 0, zero_violations: 0 };
    for k in coords {
        let orig = *probe.flat_mut(k);
        *probe.flat_mut(k) = orig + epsilon;
        let up = batch_loss(&probe, inputs, same, hyper)?;
        *probe.flat_mut(k) = orig - epsilon;
        let down = batch_loss(&probe, inputs, same, hyper)?;
        *probe.flat_mut(k) = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let analytic = grads.flat(k);
        let scale = numeric.abs().max(analytic.abs());
        if scale < zero_tol {
            result.skipped_zero += 1;
            if (numeric - analytic).abs() > zero_tol {
                result.zero_violations += 1;
            }
            continue;
        }
        result.checked += 1;
        result.max_rel_error = result.max_rel_error.max((numeric - analytic).abs() / scale);
    }
    Ok(result)
}
