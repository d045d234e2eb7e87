//! Manual feature extraction from a CASS and vocabulary-indexed vectors.
//!
//! Feature kinds, all computed per CASS tree:
//!
//! * node labels: the full label of every node;
//! * parent chains: `L(leaf)>i1>L(a1)`, extended up to three ancestors,
//!   where `ij` is the child index taken at ancestor `aj`;
//! * sibling pairs: `L(l)~L(l')` for consecutive leaves in pre-order;
//! * variable usage: `use:L(p)→L(p')` for the parents of consecutive uses of
//!   one local variable;
//! * GAT entries: `IO:<in>-<out>`.
//!
//! A feature that would mention a suppressed node is not emitted. Labels are
//! escaped so that `>`, `~`, `:` and `\` inside them cannot be confused with
//! the separators.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cass::{Cass, CassNode};

pub const UNKNOWN: &str = "<UNKNOWN>";

/// Parent-chain depth.
pub const CHAIN_DEPTH: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("min_count must be at least 1")]
    MinCount,
    #[error("malformed feature file line {line}: {message}")]
    FeatureLine { line: usize, message: String },
    #[error("malformed vocabulary: {0}")]
    Vocabulary(String),
    #[error("invalid sparse vector: {0}")]
    Vector(String),
}

/// Multiset of feature strings of one program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureBag {
    pub program_id: String,
    pub class_label: Option<String>,
    pub counts: BTreeMap<String, u32>,
}

impl FeatureBag {
    pub fn new(program_id: impl Into<String>, class_label: Option<String>) -> Self {
        FeatureBag {
            program_id: program_id.into(),
            class_label,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, feature: impl Into<String>) {
        *self.counts.entry(feature.into()).or_insert(0) += 1;
    }

    pub fn contains(&self, feature: &str) -> bool {
        self.counts.contains_key(feature)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }
}

pub fn escape_label(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for ch in label.chars() {
        if matches!(ch, '\\' | '>' | '~' | ':') {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

fn esc(node: &CassNode) -> String {
    escape_label(&node.full_label())
}

struct LeafSite<'a> {
    leaf: &'a CassNode,
    parent: Option<&'a CassNode>,
}

fn visit<'a>(
    node: &'a CassNode,
    stack: &mut Vec<(&'a CassNode, usize)>,
    bag: &mut FeatureBag,
    leaves: &mut Vec<LeafSite<'a>>,
) {
    if !node.suppressed {
        bag.add(esc(node));
    }
    if node.is_leaf() {
        if !node.suppressed {
            let mut chain = esc(node);
            for &(anc, idx) in stack.iter().rev().take(CHAIN_DEPTH) {
                if anc.suppressed {
                    break;
                }
                chain.push_str(&format!(">{idx}>{}", esc(anc)));
                bag.add(chain.clone());
            }
        }
        leaves.push(LeafSite {
            leaf: node,
            parent: stack.last().map(|(p, _)| *p),
        });
        return;
    }
    for (i, child) in node.children.iter().enumerate() {
        stack.push((node, i));
        visit(child, stack, bag, leaves);
        stack.pop();
    }
}

fn tree_features(root: &CassNode, bag: &mut FeatureBag) {
    let mut leaves = Vec::new();
    visit(root, &mut Vec::new(), bag, &mut leaves);

    for pair in leaves.windows(2) {
        let (a, b) = (pair[0].leaf, pair[1].leaf);
        if !a.suppressed && !b.suppressed {
            bag.add(format!("{}~{}", esc(a), esc(b)));
        }
    }

    let mut uses: BTreeMap<u32, Vec<Option<&CassNode>>> = BTreeMap::new();
    for site in &leaves {
        if let Some(b) = site.leaf.binding {
            uses.entry(b).or_default().push(site.parent);
        }
    }
    for parents in uses.values() {
        for pair in parents.windows(2) {
            if let (Some(p), Some(q)) = (pair[0], pair[1]) {
                if !p.suppressed && !q.suppressed {
                    bag.add(format!("use:{}→{}", esc(p), esc(q)));
                }
            }
        }
    }
}

/// Feature bag of a CASS, with an empty program id.
pub fn extract_features(cass: &Cass) -> FeatureBag {
    extract_labeled(cass, "", None)
}

pub fn extract_labeled(cass: &Cass, program_id: &str, class_label: Option<&str>) -> FeatureBag {
    let mut bag = FeatureBag::new(program_id, class_label.map(str::to_string));
    for tree in &cass.trees {
        if let Some(root) = &tree.root {
            tree_features(root, &mut bag);
        }
    }
    for entry in cass.gat.iter().flatten() {
        bag.add(format!("IO:{}-{}", entry.input_cardinality, entry.output_cardinality));
    }
    bag
}

/// Feature → index map with `UNKNOWN` at index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    min_count: u32,
    features: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    min_count: u32,
    features: Vec<String>,
}

impl Vocabulary {
    fn from_sorted(min_count: u32, features: Vec<String>) -> Self {
        let index = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i as u32 + 1))
            .collect();
        Vocabulary { min_count, features, index }
    }

    /// Number of indices including `UNKNOWN`.
    pub fn len(&self) -> usize {
        self.features.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    /// Index of `feature`, 0 when out of vocabulary.
    pub fn index_of(&self, feature: &str) -> u32 {
        self.index.get(feature).copied().unwrap_or(0)
    }

    pub fn feature(&self, index: u32) -> Option<&str> {
        match index {
            0 => Some(UNKNOWN),
            i => self.features.get(i as usize - 1).map(String::as_str),
        }
    }

    /// Retained features in index order (without `UNKNOWN`).
    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VocabFile {
            min_count: self.min_count,
            features: self.features.clone(),
        })
        .expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FeatureError> {
        let file: VocabFile = serde_json::from_str(text).map_err(|e| FeatureError::Vocabulary(e.to_string()))?;
        if file.min_count == 0 {
            return Err(FeatureError::MinCount);
        }
        if file.features.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FeatureError::Vocabulary("features must be sorted and unique".into()));
        }
        Ok(Vocabulary::from_sorted(file.min_count, file.features))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// Keeps features whose total count over `bags` is at least `min_count`.
pub fn build_vocab(bags: &[FeatureBag], min_count: u32) -> Result<Vocabulary, FeatureError> {
    if min_count == 0 {
        return Err(FeatureError::MinCount);
    }
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for bag in bags {
        for (f, &c) in &bag.counts {
            *totals.entry(f).or_insert(0) += u64::from(c);
        }
    }
    let features = totals
        .into_iter()
        .filter(|&(_, c)| c >= u64::from(min_count))
        .map(|(f, _)| f.to_string())
        .collect();
    Ok(Vocabulary::from_sorted(min_count, features))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorMode {
    Binary,
    Count,
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dimension: usize,
    pub entries: Vec<(u32, f64)>,
    pub mode: VectorMode,
}

impl SparseVector {
    pub fn new(dimension: usize, entries: Vec<(u32, f64)>, mode: VectorMode) -> Result<Self, FeatureError> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(FeatureError::Vector("indices must be strictly increasing".into()));
        }
        if entries.last().is_some_and(|&(i, _)| i as usize >= dimension) {
            return Err(FeatureError::Vector("index out of range".into()));
        }
        if mode == VectorMode::Binary && entries.iter().any(|&(_, v)| v != 1.0) {
            return Err(FeatureError::Vector("binary vectors hold only ones".into()));
        }
        Ok(SparseVector { dimension, entries, mode })
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, v)| v == 0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dimension];
        for &(i, v) in &self.entries {
            d[i as usize] = v;
        }
        d
    }
}

/// Maps a bag onto `vocab`; out-of-vocabulary features land on `UNKNOWN`.
pub fn vectorize(bag: &FeatureBag, vocab: &Vocabulary, mode: VectorMode) -> SparseVector {
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    for (f, &c) in &bag.counts {
        let slot = acc.entry(vocab.index_of(f)).or_insert(0.0);
        match mode {
            VectorMode::Binary => *slot = 1.0,
            VectorMode::Count => *slot += f64::from(c),
        }
    }
    SparseVector {
        dimension: vocab.len(),
        entries: acc.into_iter().collect(),
        mode,
    }
}

#[derive(Serialize, Deserialize)]
struct FeatureLine {
    id: String,
    label: Option<String>,
    features: Vec<(String, u32)>,
}

/// One JSON object per line: `{"id","label","features":[["f",count],…]}`.
pub fn write_feature_lines(bags: &[FeatureBag]) -> String {
    let mut out = String::new();
    for bag in bags {
        let line = FeatureLine {
            id: bag.program_id.clone(),
            label: bag.class_label.clone(),
            features: bag.counts.iter().map(|(f, &c)| (f.clone(), c)).collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("feature line serializes"));
        out.push('\n');
    }
    out
}

pub fn read_feature_lines(text: &str) -> Result<Vec<FeatureBag>, FeatureError> {
    let mut bags = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let err = |message: String| FeatureError::FeatureLine { line: n + 1, message };
        let line: FeatureLine = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let mut bag = FeatureBag::new(line.id, line.label);
        for (f, c) in line.features {
            if f.is_empty() || c == 0 {
                return Err(err("features need a non-empty name and a positive count".into()));
            }
            *bag.counts.entry(f).or_insert(0) += c;
        }
        bags.push(bag);
    }
    Ok(bags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cass::{build_cass, parse_config_id, CassTree};
    use crate::cst::parse_str;

    fn bag(src: &str, id: &str) -> FeatureBag {
        extract_features(&build_cass(&parse_str(src).unwrap(), &parse_config_id(id).unwrap()))
    }

    fn bag_of(counts: &[(&str, u32)]) -> FeatureBag {
        let mut b = FeatureBag::new("p", None);
        for &(f, c) in counts {
            b.counts.insert(f.to_string(), c);
        }
        b
    }

    #[test]
    fn empty_tree_yields_only_gat_features() {
        let cass = Cass {
            config: parse_config_id("0-0-0-0-1").unwrap(),
            trees: vec![CassTree { function_name: "f".into(), root: None }],
            gat: Some(vec![crate::cass::GatEntry {
                function_name: "f".into(),
                input_cardinality: 1,
                output_cardinality: 0,
            }]),
        };
        let b = extract_features(&cass);
        assert_eq!(b.counts.keys().collect::<Vec<_>>(), ["IO:1-0"]);
    }

    #[test]
    fn io_cardinality_feature() {
        let b = bag("int f(int a,int b){return a+b;}", "0-0-0-0-1");
        assert_eq!(b.counts.get("IO:2-1"), Some(&1));
        assert!(!bag("int f(int a,int b){return a+b;}", "0-0-0-0-0").contains("IO:2-1"));
    }

    #[test]
    fn hand_enumerated_small_program() {
        // f(x) is `int$$$` over [f, ($), {$}], with `return$;` over `#VAR`.
        let b = bag("int f(int x){return x;}", "0-0-0-0-0");
        for f in [
            "int$$$",
            "f",
            "($)",
            "int$",
            "#VAR",
            "{$}",
            "return$;",
            "#VAR>0>int$",
            "#VAR>0>int$>0>($)",
            "#VAR>0>int$>0>($)>1>int$$$",
            "#VAR>0>return$;>0>{$}>2>int$$$",
            "f>0>int$$$",
            "f~#VAR",
            "#VAR~#VAR",
            "use:int$→return$;",
        ] {
            assert!(b.contains(f), "missing {f}: {:?}", b.counts.keys().collect::<Vec<_>>());
        }
        assert_eq!(b.counts["#VAR"], 2);
    }

    #[test]
    fn separators_are_escaped() {
        let b = bag("int main(){ return a > b; }", "0-0-0-0-0");
        assert!(b.contains("$\\>$"));
        assert!(b.contains("a>0>$\\>$"));
        let b = bag("int main(){ f(x); }", "2-0-0-0-0");
        assert!(b.contains("args\\:($)"));
        assert_eq!(escape_label("a\\b"), "a\\\\b");
    }

    #[test]
    fn local_renaming_gives_identical_bags() {
        let a = bag("int main(){ int i = 0; while (i < 3) i++; return i; }", "0-0-0-0-0");
        let b = bag("int main(){ int k = 0; while (k < 3) k++; return k; }", "0-0-0-0-0");
        assert_eq!(a, b);
    }

    #[test]
    fn compound_label_feature_per_option() {
        let one = "int main(){a();}";
        let two = "int main(){a();a();}";
        assert!(bag(one, "0-0-0-0-0").contains("{$}"));
        assert!(bag(two, "0-0-0-0-0").contains("{$$}"));
        assert!(bag(one, "0-2-0-0-0").contains("{#}") && bag(two, "0-2-0-0-0").contains("{#}"));
        let dropped = bag(two, "0-1-0-0-0");
        assert!(dropped.counts.keys().all(|f| !f.contains('{')), "{dropped:?}");
    }

    #[test]
    fn dropped_globals_never_appear() {
        let src = "int gcount; int main(){ int x; gcount = gcount + x; report(gcount); }";
        let b = bag(src, "0-0-1-1-0");
        assert!(b.counts.keys().all(|f| !f.contains("gcount") && !f.contains("report")), "{b:?}");
        assert!(bag(src, "0-0-0-0-0").counts.keys().any(|f| f.contains("gcount")));
    }

    #[test]
    fn vocabulary_threshold() {
        let bags = vec![bag_of(&[("f1", 3), ("f2", 2)]), bag_of(&[("f1", 2), ("f2", 2)])];
        let v = build_vocab(&bags, 5).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.index_of("f1"), 1);
        assert_eq!(v.index_of("f2"), 0);
        assert_eq!(v.feature(0), Some(UNKNOWN));
        assert_eq!(build_vocab(&bags, 1).unwrap().features(), ["f1", "f2"]);
        assert_eq!(build_vocab(&bags, 1).unwrap(), build_vocab(&bags, 1).unwrap());
        assert_eq!(build_vocab(&[], 5).unwrap().len(), 1);
        assert!(build_vocab(&bags, 0).is_err());
    }

    #[test]
    fn vocabulary_json_round_trip() {
        let v = build_vocab(&[bag_of(&[("b", 1), ("a", 1)])], 1).unwrap();
        assert_eq!(v.to_json(), r#"{"min_count":1,"features":["a","b"]}"#);
        assert_eq!(Vocabulary::from_json(&v.to_json()).unwrap(), v);
        assert_eq!(v.hash().len(), 64);
        assert!(Vocabulary::from_json(r#"{"min_count":1,"features":["b","a"]}"#).is_err());
    }

    #[test]
    fn vectorize_modes() {
        let v = build_vocab(&[bag_of(&[("f1", 5)])], 5).unwrap();
        let b = bag_of(&[("f1", 3), ("f9", 1)]);
        assert_eq!(vectorize(&b, &v, VectorMode::Binary).entries, [(0, 1.0), (1, 1.0)]);
        assert_eq!(vectorize(&b, &v, VectorMode::Count).entries, [(0, 1.0), (1, 3.0)]);
        let empty = FeatureBag::default();
        assert!(vectorize(&empty, &v, VectorMode::Count).entries.is_empty());
        assert!(vectorize(&empty, &v, VectorMode::Binary).entries.is_empty());
        let oov = bag_of(&[("x", 2), ("y", 3)]);
        assert_eq!(vectorize(&oov, &v, VectorMode::Count).entries, [(0, 5.0)]);
    }

    #[test]
    fn sparse_vector_validation() {
        assert!(SparseVector::new(3, vec![(1, 1.0), (1, 1.0)], VectorMode::Count).is_err());
        assert!(SparseVector::new(3, vec![(3, 1.0)], VectorMode::Count).is_err());
        assert!(SparseVector::new(3, vec![(0, 2.0)], VectorMode::Binary).is_err());
        assert!(SparseVector::new(3, vec![(0, 1.0), (2, 1.0)], VectorMode::Binary).is_ok());
    }

    #[test]
    fn feature_lines_round_trip() {
        let mut b = bag_of(&[("x>0>y", 2), ("IO:1-1", 1)]);
        b.class_label = Some("p7".into());
        let text = write_feature_lines(&[b.clone()]);
        assert_eq!(text, "{\"id\":\"p\",\"label\":\"p7\",\"features\":[[\"IO:1-1\",1],[\"x>0>y\",2]]}\n");
        assert_eq!(read_feature_lines(&text).unwrap(), vec![b]);
        assert!(read_feature_lines("{\"id\":\"p\",\"label\":null,\"features\":[[\"\",1]]}").is_err());
    }

    proptest::proptest! {
        #[test]
        fn vectorize_is_monotone(extra in "[a-c]{1,2}", base in proptest::collection::btree_map("[a-c]{1,2}", 1u32..4, 0..6)) {
            let vocab = build_vocab(&[bag_of(&[("a", 1), ("b", 1), ("ab", 1)])], 1).unwrap();
            let mut bag = FeatureBag::new("p", None);
            bag.counts = base;
            let before = vectorize(&bag, &vocab, VectorMode::Count);
            bag.add(extra);
            let after = vectorize(&bag, &vocab, VectorMode::Count);
            for (i, v) in before.entries {
                let now = after.entries.iter().find(|e| e.0 == i).map(|e| e.1);
                proptest::prop_assert!(now.is_some_and(|n| n >= v));
            }
        }
    }
}
