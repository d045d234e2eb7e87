use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{backward, embed_input, BofModel, Pooling};
use super::optim::{AdamW, OptimizerState};
use super::BofError;
use crate::evalkit::{map_at_r_by, EvalError, EvalReport, LabeledCorpus};
use crate::featurize::{vectorize, FeatureBag, SparseVector, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub gamma: f64,
    pub margin: f64,
    pub lr: f64,
    pub weight_decay: f64,
    /// Classes per batch.
    pub p: usize,
    /// Programs per class per batch, at most.
    pub k: usize,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub seed: u64,
    pub dim: usize,
    pub dropout: f64,
    pub pooling: Pooling,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            gamma: 80.0,
            margin: 0.4,
            lr: 1e-3,
            weight_decay: 0.01,
            p: 16,
            k: 5,
            epochs: 100,
            iters_per_epoch: 1000,
            seed: 0,
            dim: 128,
            dropout: 0.5,
            pooling: Pooling::Set,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<(), BofError> {
        let bad = |m: &str| Err(BofError::Hyper(m.to_string()));
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if !(self.margin > 0.0 && self.margin < 1.0) {
            return bad("margin must lie in (0, 1)");
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("lr must be positive and weight_decay non-negative");
        }
        if self.p < 2 || self.k < 2 {
            return bad("p and k must be at least 2");
        }
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

/// A labeled corpus with model inputs aligned to its items.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCorpus {
    pub corpus: LabeledCorpus,
    pub inputs: Vec<SparseVector>,
}

impl EncodedCorpus {
    pub fn new(bags: &[FeatureBag], vocab: &Vocabulary, pooling: Pooling) -> Result<Self, BofError> {
        let mut sorted: Vec<&FeatureBag> = bags.iter().collect();
        sorted.sort_by(|a, b| a.program_id.cmp(&b.program_id));
        let items = sorted
            .iter()
            .map(|b| match &b.class_label {
                Some(c) => Ok((b.program_id.clone(), c.clone())),
                None => Err(EvalError::MissingLabel(b.program_id.clone())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let corpus = LabeledCorpus::new(items)?;
        let inputs = sorted.iter().map(|b| vectorize(b, vocab, pooling.vector_mode())).collect();
        Ok(EncodedCorpus { corpus, inputs })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Item positions of a P-K batch with their classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub members: Vec<usize>,
    pub classes: Vec<String>,
}

impl Batch {
    /// `[i][j]` is true iff `i ≠ j` share a class.
    pub fn pair_labels(&self) -> Vec<Vec<bool>> {
        let n = self.members.len();
        (0..n)
            .map(|i| (0..n).map(|j| i != j && self.classes[i] == self.classes[j]).collect())
            .collect()
    }
}

/// `p` distinct classes, then up to `k` distinct programs from each.
pub fn sample_pk_batch(corpus: &LabeledCorpus, p: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Batch, BofError> {
    let classes = corpus.classes();
    if classes.len() < p {
        return Err(BofError::TooFewClasses { need: p, have: classes.len() });
    }
    let mut batch = Batch { members: Vec::new(), classes: Vec::new() };
    for class in classes.choose_multiple(rng, p) {
        let members = corpus.members(class);
        for &m in members.choose_multiple(rng, k.min(members.len())) {
            batch.members.push(m);
            batch.classes.push(class.to_string());
        }
    }
    Ok(batch)
}

/// Eval-mode code vectors scaled to unit length; zero vectors stay zero.
fn unit_codes(model: &BofModel, data: &EncodedCorpus) -> Result<Vec<Vec<f64>>, BofError> {
    data.inputs
        .iter()
        .map(|x| {
            let c = embed_input(model, x, None)?;
            let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(if n > 0.0 { c.iter().map(|v| v / n).collect() } else { c })
        })
        .collect()
}

/// MAP@R of the model's cosine similarities over `data`.
pub fn evaluate_map_at_r(model: &BofModel, data: &EncodedCorpus) -> Result<EvalReport, BofError> {
    let units = unit_codes(model, data)?;
    let (ids, labels): (Vec<String>, Vec<String>) = data.corpus.items().iter().cloned().unzip();
    Ok(map_at_r_by(&ids, &labels, |i, j| units[i].iter().zip(&units[j]).map(|(a, b)| a * b).sum()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub validation_map_at_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Model with the best validation MAP@R (the initial model when no epoch ran).
    pub model: BofModel,
    pub optimizer: OptimizerState,
    pub history: Vec<EpochStats>,
    /// 1-based epoch of `model`; 0 for the initial model.
    pub best_epoch: usize,
}

/// Trains from a seeded initialization, keeping the epoch with the best
/// validation MAP@R. Single-threaded and deterministic per seed.
pub fn train(
    train_set: &EncodedCorpus,
    validation: &EncodedCorpus,
    vocab: &Vocabulary,
    hyper: &TrainHyper,
) -> Result<TrainOutcome, BofError> {
    hyper.validate()?;
    let mut model = BofModel::new(vocab.len(), hyper.dim, hyper.dropout, hyper.seed);
    model.pooling = hyper.pooling;
    for x in train_set.inputs.iter().chain(&validation.inputs) {
        if x.dimension != vocab.len() {
            return Err(BofError::Shape { expected: vocab.len(), found: x.dimension });
        }
    }
    let mut optimizer = OptimizerState::new(&model, AdamW { weight_decay: hyper.weight_decay, ..AdamW::default() });
    let mut best = TrainOutcome { model: model.clone(), optimizer: optimizer.clone(), history: Vec::new(), best_epoch: 0 };
    let mut best_score = f64::NEG_INFINITY;
    let mut history = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(1);
    for epoch in 1..=hyper.epochs {
        let mut loss_sum = 0.0;
        for _ in 0..hyper.iters_per_epoch {
            let batch = sample_pk_batch(&train_set.corpus, hyper.p, hyper.k, &mut rng)?;
            let inputs: Vec<&SparseVector> = batch.members.iter().map(|&m| &train_set.inputs[m]).collect();
            let (loss, grads) = backward(&model, &inputs, &batch.pair_labels(), hyper, Some(&mut rng))?;
            optimizer.apply(&mut model, &grads, hyper.lr)?;
            loss_sum += loss;
        }
        let val = evaluate_map_at_r(&model, validation)?.value;
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / hyper.iters_per_epoch.max(1) as f64,
            validation_map_at_r: val,
        };
        log::info!("epoch {epoch}: loss {:.6} validation MAP@R {:.6}", stats.mean_loss, val);
        history.push(stats);
        // ties go to the later epoch, so a saturated validation score keeps training progress
        if val >= best_score {
            best_score = val;
            best.model = model.clone();
            best.optimizer = optimizer.clone();
            best.best_epoch = epoch;
        }
    }
    best.history = history;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::build_vocab;

    fn labeled(classes: usize, sizes: impl Fn(usize) -> usize) -> LabeledCorpus {
        LabeledCorpus::new((0..classes).flat_map(|c| (0..sizes(c)).map(move |p| (format!("c{c:02}/{p}"), format!("c{c:02}")))))
            .unwrap()
    }

    #[test]
    fn pk_batch_sizes() {
        let corpus = labeled(20, |c| if c == 0 { 3 } else { 6 });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = sample_pk_batch(&corpus, 20, 5, &mut rng).unwrap();
        assert_eq!(b.members.len(), 19 * 5 + 3);
        let b = sample_pk_batch(&labeled(20, |_| 5), 16, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(b.members.len(), 80);
        let mut uniq = b.members.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 80);
        assert_eq!(b, sample_pk_batch(&labeled(20, |_| 5), 16, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap());
        assert!(sample_pk_batch(&labeled(3, |_| 5), 4, 2, &mut rng).is_err());
    }

    #[test]
    fn pair_labels_have_empty_diagonal() {
        let b = Batch { members: vec![0, 1, 2], classes: vec!["a".into(), "a".into(), "b".into()] };
        assert_eq!(b.pair_labels(), vec![vec![false, true, false], vec![true, false, false], vec![false, false, false]]);
    }

    fn toy() -> (EncodedCorpus, EncodedCorpus, Vocabulary) {
        let mut bags = Vec::new();
        for c in 0..6 {
            for p in 0..4 {
                let mut b = FeatureBag::new(format!("c{c}/{p}"), Some(format!("c{c}")));
                b.add(format!("core{c}"));
                b.add(format!("core{}", (c + 1) % 6));
                b.add(format!("noise{}", (c * 4 + p) % 7));
                bags.push(b);
            }
        }
        let vocab = build_vocab(&bags, 1).unwrap();
        let (tr, va): (Vec<FeatureBag>, Vec<FeatureBag>) = bags.into_iter().partition(|b| !b.program_id.starts_with("c5"));
        (
            EncodedCorpus::new(&tr, &vocab, Pooling::Set).unwrap(),
            EncodedCorpus::new(&va, &vocab, Pooling::Set).unwrap(),
            vocab,
        )
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let (tr, va, vocab) = toy();
        let hyper = TrainHyper { epochs: 0, dim: 8, p: 3, k: 2, ..TrainHyper::default() };
        let out = train(&tr, &va, &vocab, &hyper).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(out.best_epoch, 0);
        assert_eq!(out.model, BofModel::new(vocab.len(), 8, 0.5, 0));
    }

    #[test]
    fn training_is_deterministic() {
        let (tr, va, vocab) = toy();
        let hyper = TrainHyper { epochs: 2, iters_per_epoch: 5, dim: 8, p: 3, k: 2, ..TrainHyper::default() };
        let a = train(&tr, &va, &vocab, &hyper).unwrap();
        let b = train(&tr, &va, &vocab, &hyper).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 2);
        assert!(a.history.iter().all(|h| h.mean_loss.is_finite() && (0.0..=1.0).contains(&h.validation_map_at_r)));
    }

    #[test]
    fn hyper_validation() {
        assert!(TrainHyper::default().validate().is_ok());
        assert!(TrainHyper { margin: 1.0, ..TrainHyper::default() }.validate().is_err());
        assert!(TrainHyper { p: 1, ..TrainHyper::default() }.validate().is_err());
        assert!(TrainHyper { gamma: 0.0, ..TrainHyper::default() }.validate().is_err());
    }
}
