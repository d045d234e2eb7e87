use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{average_precision, EvalError};
use crate::cass::{build_cass, CassConfig, AXES};
use crate::cst::{parse_str, CstNode};
use crate::featurize::{build_vocab, extract_labeled, FeatureBag, VectorMode};
use crate::simindex::{build_index, CorpusIndex, Metric};

/// A parsed program with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub id: String,
    pub class: String,
    pub tree: CstNode,
}

/// Parsed programs ordered by id.
#[derive(Debug, Clone, Default)]
pub struct ProgramCorpus {
    programs: Vec<Program>,
    by_class: BTreeMap<String, Vec<usize>>,
}

impl ProgramCorpus {
    pub fn new(mut programs: Vec<Program>) -> Result<Self, EvalError> {
        programs.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = programs.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(EvalError::DuplicateId(w[0].id.clone()));
        }
        let mut by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, p) in programs.iter().enumerate() {
            by_class.entry(p.class.clone()).or_default().push(i);
        }
        Ok(ProgramCorpus { programs, by_class })
    }

    /// Parses `(id, class, source)` triples. Unparsable sources are skipped;
    /// their ids are returned alongside the corpus.
    pub fn parse<I>(sources: I) -> Result<(Self, Vec<String>), EvalError>
    where
        I: IntoIterator<Item = (String, String, String)>,
    {
        let mut programs = Vec::new();
        let mut skipped = Vec::new();
        for (id, class, src) in sources {
            match parse_str(&src) {
                Ok(tree) => programs.push(Program { id, class, tree }),
                Err(e) => {
                    log::warn!("skipping {id}: {e}");
                    skipped.push(id);
                }
            }
        }
        Ok((ProgramCorpus::new(programs)?, skipped))
    }

    pub fn programs(&self) -> &[Program] {
        &self.programs
    }

    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }

    pub fn classes(&self) -> Vec<String> {
        self.by_class.keys().cloned().collect()
    }

    /// Feature bags of every program under `cfg`, in id order.
    pub fn feature_bags(&self, cfg: &CassConfig) -> Vec<FeatureBag> {
        self.programs
            .par_iter()
            .map(|p| extract_labeled(&build_cass(&p.tree, cfg), &p.id, Some(&p.class)))
            .collect()
    }

    /// Binary-vector index of the whole corpus under `cfg`.
    pub fn index(&self, cfg: &CassConfig) -> Result<CorpusIndex, EvalError> {
        let bags = self.feature_bags(cfg);
        let vocab = build_vocab(&bags, 1)?;
        Ok(build_index(&bags, &vocab, VectorMode::Binary)?)
    }

    fn group_members(&self, group: &[String]) -> Result<Vec<usize>, EvalError> {
        let mut members = Vec::new();
        for class in group {
            let m = self.by_class.get(class).ok_or_else(|| EvalError::UnknownClass(class.clone()))?;
            members.extend_from_slice(m);
        }
        members.sort_unstable();
        Ok(members)
    }
}

/// AP of one problem group. A group with a single class has no negative
/// pairs; it scores 1.0 and is flagged degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupAp {
    pub ap: f64,
    pub degenerate: bool,
}

/// Pairs `i <= j` over the group's programs, self-pairs included.
fn group_ap(index: &CorpusIndex, members: &[usize], metric: Metric) -> Result<GroupAp, EvalError> {
    let labels = index.labels();
    let distinct: BTreeSet<&Option<String>> = members.iter().map(|&i| &labels[i]).collect();
    if distinct.len() < 2 {
        return Ok(GroupAp { ap: 1.0, degenerate: true });
    }
    let mut scores = Vec::with_capacity(members.len() * (members.len() + 1) / 2);
    let mut same = Vec::with_capacity(scores.capacity());
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a..] {
            scores.push(index.score(i, j, metric));
            same.push(labels[i] == labels[j]);
        }
    }
    Ok(GroupAp { ap: average_precision(&scores, &same)?, degenerate: false })
}

/// Scores every solution pair of `group` under `cfg`.
pub fn evaluate_group_ap(group: &[String], corpus: &ProgramCorpus, cfg: &CassConfig, metric: Metric) -> Result<GroupAp, EvalError> {
    let members = corpus.group_members(group)?;
    if members.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let bags: Vec<FeatureBag> = members
        .iter()
        .map(|&i| {
            let p = &corpus.programs[i];
            extract_labeled(&build_cass(&p.tree, cfg), &p.id, Some(&p.class))
        })
        .collect();
    let vocab = build_vocab(&bags, 1)?;
    let index = build_index(&bags, &vocab, VectorMode::Binary)?;
    let all: Vec<usize> = (0..index.len()).collect();
    group_ap(&index, &all, metric)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub config: CassConfig,
    pub mean_ap: f64,
    /// Groups where this config's AP is strictly above the baseline's.
    pub wins: usize,
    pub losses: usize,
    pub degenerate_groups: usize,
    pub group_aps: Vec<f64>,
}

/// Summary over all swept configs sharing one option of one axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalRow {
    pub axis: &'static str,
    pub option: u8,
    pub n_configs: usize,
    pub mean_ap: f64,
    pub wins: usize,
    pub losses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub metric: Metric,
    pub n_groups: usize,
    pub baseline: CassConfig,
    pub rows: Vec<SweepRow>,
    pub marginals: Vec<MarginalRow>,
}

impl SweepReport {
    pub fn row(&self, cfg: &CassConfig) -> Option<&SweepRow> {
        self.rows.iter().find(|r| &r.config == cfg)
    }

    pub fn marginal(&self, axis: &str, option: u8) -> Option<&MarginalRow> {
        self.marginals.iter().find(|m| m.axis == axis && m.option == option)
    }

    /// `config_id,mean_ap,wins,losses`, one row per config then one per
    /// `axis=option` marginal.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config_id,mean_ap,wins,losses\n");
        for r in &self.rows {
            writeln!(out, "{},{:.9},{},{}", r.config, r.mean_ap, r.wins, r.losses).unwrap();
        }
        for m in &self.marginals {
            writeln!(out, "{}={},{:.9},{},{}", m.axis, m.option, m.mean_ap, m.wins, m.losses).unwrap();
        }
        out
    }
}

fn config_group_aps(corpus: &ProgramCorpus, members: &[Vec<usize>], cfg: &CassConfig, metric: Metric) -> Result<Vec<GroupAp>, EvalError> {
    let index = corpus.index(cfg)?;
    members.iter().map(|m| group_ap(&index, m, metric)).collect()
}

/// Mean group AP per config, wins/losses against `0-0-0-0-0`, and per-axis
/// marginals. Rows keep the order of `configs`.
pub fn sweep_configs(
    corpus: &ProgramCorpus,
    groups: &[Vec<String>],
    configs: &[CassConfig],
    metric: Metric,
) -> Result<SweepReport, EvalError> {
    let members: Vec<Vec<usize>> = groups.iter().map(|g| corpus.group_members(g)).collect::<Result<_, _>>()?;
    let baseline = CassConfig::SPT;
    let mut todo: Vec<CassConfig> = configs.to_vec();
    if !todo.contains(&baseline) {
        todo.push(baseline);
    }
    let results: Vec<Vec<GroupAp>> = todo
        .par_iter()
        .map(|cfg| config_group_aps(corpus, &members, cfg, metric))
        .collect::<Result<_, _>>()?;
    let base = &results[todo.iter().position(|c| *c == baseline).expect("baseline scheduled")];

    let rows: Vec<SweepRow> = configs
        .iter()
        .zip(&results)
        .map(|(cfg, aps)| {
            let n = aps.len();
            SweepRow {
                config: *cfg,
                mean_ap: if n == 0 { 0.0 } else { aps.iter().map(|g| g.ap).sum::<f64>() / n as f64 },
                wins: aps.iter().zip(base).filter(|(a, b)| a.ap > b.ap).count(),
                losses: aps.iter().zip(base).filter(|(a, b)| a.ap < b.ap).count(),
                degenerate_groups: aps.iter().filter(|g| g.degenerate).count(),
                group_aps: aps.iter().map(|g| g.ap).collect(),
            }
        })
        .collect();

    let mut marginals = Vec::new();
    for (axis_pos, (axis, _, size)) in AXES.iter().enumerate() {
        for option in 0..*size {
            let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.config.digits()[axis_pos] == option).collect();
            if sel.is_empty() {
                continue;
            }
            marginals.push(MarginalRow {
                axis,
                option,
                n_configs: sel.len(),
                mean_ap: sel.iter().map(|r| r.mean_ap).sum::<f64>() / sel.len() as f64,
                wins: sel.iter().map(|r| r.wins).sum(),
                losses: sel.iter().map(|r| r.losses).sum(),
            });
        }
    }
    Ok(SweepReport { metric, n_groups: groups.len(), baseline, rows, marginals })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(sources: &[(&str, &str, &str)]) -> ProgramCorpus {
        let (c, skipped) = ProgramCorpus::parse(
            sources.iter().map(|(i, c, s)| (i.to_string(), c.to_string(), s.to_string())),
        )
        .unwrap();
        assert!(skipped.is_empty());
        c
    }

    fn two_classes() -> ProgramCorpus {
        corpus(&[
            ("a/1", "a", "int main(){ int x = 1; while (x < 10) x = x * 2; return x; }"),
            ("a/2", "a", "int main(){ int x = 1; while (x < 10) x = x * 2; return x; }"),
            ("b/1", "b", "int f(int n){ if (n) return f(n - 1); return 0; }"),
            ("b/2", "b", "int f(int n){ if (n) return f(n - 1); return 0; }"),
        ])
    }

    fn groups(v: &[&[&str]]) -> Vec<Vec<String>> {
        v.iter().map(|g| g.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn identical_within_class_group_is_perfect() {
        let c = two_classes();
        let g = evaluate_group_ap(&["a".into(), "b".into()], &c, &CassConfig::SPT, Metric::Cosine).unwrap();
        assert_eq!(g, GroupAp { ap: 1.0, degenerate: false });
    }

    #[test]
    fn single_class_group_is_degenerate() {
        let c = two_classes();
        let g = evaluate_group_ap(&["a".into()], &c, &CassConfig::SPT, Metric::Dot).unwrap();
        assert!(g.degenerate);
        assert_eq!(g.ap, 1.0);
        assert!(matches!(
            evaluate_group_ap(&["zz".into()], &c, &CassConfig::SPT, Metric::Dot),
            Err(EvalError::UnknownClass(_))
        ));
    }

    #[test]
    fn unparsable_sources_are_skipped() {
        let (c, skipped) = ProgramCorpus::parse(vec![
            ("a/1".to_string(), "a".to_string(), "int main(){}".to_string()),
            ("a/2".to_string(), "a".to_string(), "int main({".to_string()),
        ])
        .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(skipped, ["a/2"]);
    }

    #[test]
    fn baseline_against_itself() {
        let c = two_classes();
        let r = sweep_configs(&c, &groups(&[&["a", "b"]]), &[CassConfig::SPT], Metric::Dot).unwrap();
        assert_eq!((r.rows[0].wins, r.rows[0].losses), (0, 0));
        assert_eq!(r.to_csv().lines().next(), Some("config_id,mean_ap,wins,losses"));
        assert!(r.to_csv().contains("\n0-0-0-0-0,1.000000000,0,0\n"));
    }

    #[test]
    fn sweep_matches_standalone_group_ap() {
        let c = corpus(&[
            ("a/1", "a", "int g; int main(){ int x = g; return x + 1; }"),
            ("a/2", "a", "int h; int main(){ int y = h; y = y * 2; return y; }"),
            ("b/1", "b", "int main(){ for (int i = 0; i < 3; i++) g = g + i; return 0; }"),
            ("b/2", "b", "int g; int main(){ int x = g; return x; }"),
            ("c/1", "c", "int f(int n){ return n ? f(n - 1) : 0; }"),
        ]);
        let gs = groups(&[&["a", "b"], &["a", "b", "c"], &["b", "c"]]);
        let cfgs = [CassConfig::SPT, "2-1-3-1-1".parse().unwrap(), "0-0-2-0-0".parse().unwrap()];
        for metric in [Metric::Dot, Metric::Cosine] {
            let r = sweep_configs(&c, &gs, &cfgs, metric).unwrap();
            for row in &r.rows {
                for (g, ap) in gs.iter().zip(&row.group_aps) {
                    let direct = evaluate_group_ap(g, &c, &row.config, metric).unwrap();
                    assert!((direct.ap - ap).abs() < 1e-12);
                }
            }
            assert_eq!(r, sweep_configs(&c, &gs, &cfgs, metric).unwrap());
        }
    }

    #[test]
    fn identical_configs_identical_means_and_marginals() {
        let c = two_classes();
        let cfg: CassConfig = "1-2-0-1-0".parse().unwrap();
        let r = sweep_configs(&c, &groups(&[&["a", "b"], &["a"]]), &[cfg, cfg], Metric::Cosine).unwrap();
        assert_eq!(r.rows[0].mean_ap, r.rows[1].mean_ap);
        assert_eq!(r.rows[0].degenerate_groups, 1);
        assert_eq!(r.marginal("node_prefix", 1).unwrap().n_configs, 2);
        assert!(r.marginal("node_prefix", 0).is_none());
        assert!(r.to_csv().contains("\nglobal_vars=0,"));
    }
}
