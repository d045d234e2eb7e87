use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;

/// Programs with their class labels, ordered by program id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCorpus {
    items: Vec<(String, String)>,
    by_class: BTreeMap<String, Vec<usize>>,
}

impl LabeledCorpus {
    pub fn new(items: impl IntoIterator<Item = (String, String)>) -> Result<Self, EvalError> {
        let mut items: Vec<(String, String)> = items.into_iter().collect();
        items.sort();
        let mut seen = HashSet::new();
        let mut by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, (id, class)) in items.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(EvalError::DuplicateId(id.clone()));
            }
            if class.is_empty() {
                return Err(EvalError::MissingLabel(id.clone()));
            }
            by_class.entry(class.clone()).or_default().push(i);
        }
        Ok(LabeledCorpus { items, by_class })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[(String, String)] {
        &self.items
    }

    /// Class labels in sorted order.
    pub fn classes(&self) -> Vec<&str> {
        self.by_class.keys().map(String::as_str).collect()
    }

    /// Item positions of `class`, in id order.
    pub fn members(&self, class: &str) -> &[usize] {
        self.by_class.get(class).map_or(&[], Vec::as_slice)
    }

    /// Sub-corpus restricted to `classes`.
    pub fn restrict(&self, classes: &BTreeSet<String>) -> LabeledCorpus {
        let items = self.items.iter().filter(|(_, c)| classes.contains(c)).cloned();
        LabeledCorpus::new(items).expect("subset of a valid corpus")
    }
}

/// Disjoint train/validation/test class sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

/// Shuffles the classes with `seed` and cuts them by `fractions`
/// (train, validation, test); part sizes are rounded, the remainder goes to test.
pub fn split_by_problem(corpus: &LabeledCorpus, fractions: [f64; 3], seed: u64) -> Result<Split, EvalError> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(EvalError::Fractions(fractions));
    }
    let mut classes: Vec<String> = corpus.classes().into_iter().map(str::to_string).collect();
    let n = classes.len();
    let parts = fractions.iter().filter(|&&f| f > 0.0).count();
    if n < parts.max(1) {
        return Err(EvalError::TooFewClasses { classes: n, parts });
    }
    classes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut sizes = [0usize; 3];
    for i in 0..2 {
        sizes[i] = (fractions[i] * n as f64).round() as usize;
        if fractions[i] > 0.0 {
            sizes[i] = sizes[i].max(1);
        }
    }
    // leave at least one class for every later non-empty part
    let reserve = |from: usize| (from..3).filter(|&j| fractions[j] > 0.0).count();
    sizes[0] = sizes[0].min(n - reserve(1));
    sizes[1] = sizes[1].min(n - sizes[0] - reserve(2));
    sizes[2] = n - sizes[0] - sizes[1];
    if fractions[2] == 0.0 && sizes[2] > 0 {
        // rounding left classes over; hand them to the last non-empty part
        let last = if fractions[1] > 0.0 { 1 } else { 0 };
        sizes[last] += sizes[2];
        sizes[2] = 0;
    }

    let mut it = classes.into_iter();
    let mut take = |k: usize| it.by_ref().take(k).collect::<BTreeSet<String>>();
    Ok(Split {
        train: take(sizes[0]),
        validation: take(sizes[1]),
        test: take(sizes[2]),
    })
}

/// `n_groups` groups of `group_size` distinct classes, each sorted.
pub fn sample_problem_groups(
    classes: &[String],
    group_size: usize,
    n_groups: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>, EvalError> {
    let mut pool: Vec<String> = classes.to_vec();
    pool.sort();
    pool.dedup();
    if group_size > pool.len() {
        return Err(EvalError::GroupTooLarge { size: group_size, classes: pool.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_groups)
        .map(|_| {
            let mut g: Vec<String> = pool.choose_multiple(&mut rng, group_size).cloned().collect();
            g.sort();
            g
        })
        .collect())
}
