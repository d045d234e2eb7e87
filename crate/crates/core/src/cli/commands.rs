use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::dataset::{load_dataset, sha256_hex, Dataset};
use super::{CliError, Command, Format, GlobalArgs, GradcheckArgs, Measure, ModeArg, Output, RunManifest, TrainArgs};
use crate::bofnet::{
    self, embed_input, grad_check, BofModel, Checkpoint, EncodedCorpus, Pooling, TrainHyper,
};
use crate::cass::{build_cass_with, enumerate_configs, BuildOptions, CassConfig};
use crate::cst::{dump_tree, load_tree, parse_str, CstNode};
use crate::evalkit::{
    average_precision, map_at_r, pair_average_precision, sample_problem_groups, split_by_problem,
    sweep_configs, EvalReport, LabeledCorpus, ProgramCorpus,
};
use crate::featurize::{
    build_vocab, extract_labeled, read_feature_lines, vectorize, write_feature_lines, FeatureBag, SparseVector,
    VectorMode, Vocabulary,
};
use crate::simindex::{build_index, CorpusIndex, Metric};

type CmdResult = Result<Output, CliError>;

pub(super) fn dispatch(g: &GlobalArgs, cmd: &Command) -> CmdResult {
    match cmd {
        Command::Parse { file } => parse(g, cmd, file),
        Command::Cass { file, tree, keep_literals } => cass(g, cmd, file, *tree, *keep_literals),
        Command::Featurize { files, dataset, keep_literals, out } => {
            featurize(g, cmd, files, dataset.as_deref(), *keep_literals, out.as_deref())
        }
        Command::Vocab { features, min_count, out } => vocab(g, cmd, features, *min_count, out.as_deref()),
        Command::Compare { a, b } => compare(g, cmd, a, b),
        Command::Index { dataset, vocab, min_count, mode, out } => {
            index(g, cmd, dataset, vocab.as_deref(), *min_count, *mode, out)
        }
        Command::Query { index, file, k } => query(g, cmd, index, file, *k),
        Command::Eval { dataset, measure, split, model, out } => {
            eval(g, cmd, dataset, *measure, split.as_deref(), model.as_deref(), out.as_deref())
        }
        Command::Sweep { dataset, configs, groups, group_size, groups_file, out } => {
            sweep(g, cmd, dataset, configs, *groups, *group_size, groups_file.as_deref(), out.as_deref())
        }
        Command::Train(args) => train(g, cmd, args),
        Command::Gradcheck(args) => gradcheck(g, cmd, args),
    }
}

#[derive(Serialize)]
struct Flags<'a> {
    #[serde(flatten)]
    global: &'a GlobalArgs,
    #[serde(flatten)]
    command: &'a Command,
}

fn manifest(g: &GlobalArgs, cmd: &Command, name: &str, config: Option<CassConfig>) -> RunManifest {
    RunManifest::new(name, &Flags { global: g, command: cmd }, config.map(|c| c.id()), g.seed)
}

fn read_input(path: &Path) -> Result<(String, String), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let digest = sha256_hex(&bytes);
    let text = String::from_utf8(bytes).map_err(|_| anyhow!("{}: not UTF-8", path.display()))?;
    Ok((text, digest))
}

fn parse_file(path: &Path, text: &str) -> Result<CstNode, CliError> {
    parse_str(text).map_err(|d| CliError::Domain(anyhow!("{}: {d}", path.display())))
}

fn require_dir(path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("dataset directory {} does not exist", path.display())))
    }
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    require_dir(path)?;
    load_dataset(path).with_context(|| format!("reading {}", path.display())).map_err(CliError::from)
}

fn parse_corpus(ds: &Dataset) -> Result<(ProgramCorpus, Vec<String>), CliError> {
    let (corpus, mut skipped) = ProgramCorpus::parse(ds.triples()).map_err(anyhow::Error::from)?;
    skipped.extend(ds.unreadable.iter().cloned());
    skipped.sort();
    Ok((corpus, skipped))
}

fn write_out(path: &Path, body: &str, manifest: &RunManifest) -> Result<(), CliError> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    let side = format!("{}.manifest.json", path.display());
    fs::write(&side, manifest.to_json() + "\n").with_context(|| format!("writing {side}"))?;
    Ok(())
}

fn json_line(value: &impl Serialize) -> String {
    serde_json::to_string(value).expect("serializable output") + "\n"
}

fn parse(g: &GlobalArgs, cmd: &Command, file: &Path) -> CmdResult {
    let (text, digest) = read_input(file)?;
    let tree = parse_file(file, &text)?;
    let mut m = manifest(g, cmd, "parse", None);
    m.input(file.display().to_string(), digest);
    Ok(Output {
        stdout: String::from_utf8(dump_tree(&tree)).expect("json is UTF-8") + "\n",
        stderr: m.to_json() + "\n",
    })
}

fn cass(g: &GlobalArgs, cmd: &Command, file: &Path, tree: bool, keep_literals: bool) -> CmdResult {
    let (text, digest) = read_input(file)?;
    let cst = if tree {
        load_tree(text.as_bytes()).map_err(|e| anyhow!("{}: {e}", file.display()))?
    } else {
        parse_file(file, &text)?
    };
    let cfg = g.config();
    let c = build_cass_with(&cst, &cfg, &BuildOptions { keep_literals });
    let mut m = manifest(g, cmd, "cass", Some(cfg));
    m.input(file.display().to_string(), digest);
    Ok(Output { stdout: c.to_json() + "\n", stderr: m.to_json() + "\n" })
}

fn bag_of(tree: &CstNode, cfg: &CassConfig, keep_literals: bool, id: &str, class: Option<&str>) -> FeatureBag {
    extract_labeled(&build_cass_with(tree, cfg, &BuildOptions { keep_literals }), id, class)
}

fn featurize(
    g: &GlobalArgs,
    cmd: &Command,
    files: &[std::path::PathBuf],
    dataset: Option<&Path>,
    keep_literals: bool,
    out: Option<&Path>,
) -> CmdResult {
    let cfg = g.config();
    let mut m = manifest(g, cmd, "featurize", Some(cfg));
    let mut bags = Vec::new();
    let mut stderr = String::new();
    if let Some(root) = dataset {
        let ds = read_dataset(root)?;
        m.input(root.display().to_string(), ds.digest());
        let (corpus, skipped) = parse_corpus(&ds)?;
        for s in &skipped {
            writeln!(stderr, "skipped unparsable {s}").unwrap();
        }
        for p in corpus.programs() {
            bags.push(bag_of(&p.tree, &cfg, keep_literals, &p.id, Some(&p.class)));
        }
    }
    for f in files {
        let (text, digest) = read_input(f)?;
        let tree = parse_file(f, &text)?;
        let id = f.display().to_string();
        m.input(id.clone(), digest);
        bags.push(bag_of(&tree, &cfg, keep_literals, &id, None));
    }
    if bags.is_empty() && dataset.is_none() {
        return Err(CliError::Usage("featurize needs input files or --dataset".into()));
    }
    let body = write_feature_lines(&bags);
    stderr.push_str(&(m.to_json() + "\n"));
    match out {
        Some(path) => {
            write_out(path, &body, &m)?;
            Ok(Output { stdout: String::new(), stderr })
        }
        None => Ok(Output { stdout: body, stderr }),
    }
}

fn vocab(g: &GlobalArgs, cmd: &Command, features: &Path, min_count: u32, out: Option<&Path>) -> CmdResult {
    let (text, digest) = read_input(features)?;
    let bags = read_feature_lines(&text).map_err(anyhow::Error::from)?;
    let v = build_vocab(&bags, min_count).map_err(anyhow::Error::from)?;
    let mut m = manifest(g, cmd, "vocab", None);
    m.input(features.display().to_string(), digest);
    let body = v.to_json() + "\n";
    match out {
        Some(path) => {
            write_out(path, &body, &m)?;
            Ok(Output { stdout: String::new(), stderr: m.to_json() + "\n" })
        }
        None => Ok(Output { stdout: body, stderr: m.to_json() + "\n" }),
    }
}

/// Score of two sources under `cfg` with a vocabulary of their own features.
pub fn compare_sources(a: &CstNode, b: &CstNode, cfg: &CassConfig, metric: Metric) -> f64 {
    let bags = [bag_of(a, cfg, false, "a", None), bag_of(b, cfg, false, "b", None)];
    let vocab = build_vocab(&bags, 1).expect("min_count 1 is valid");
    let va = vectorize(&bags[0], &vocab, VectorMode::Binary);
    let vb = vectorize(&bags[1], &vocab, VectorMode::Binary);
    match metric {
        Metric::Dot => crate::simindex::dot(&va, &vb),
        Metric::Cosine => crate::simindex::cosine(&va, &vb),
    }
    .expect("same vocabulary")
}

fn compare(g: &GlobalArgs, cmd: &Command, a: &Path, b: &Path) -> CmdResult {
    let (ta, da) = read_input(a)?;
    let (tb, db) = read_input(b)?;
    let (ca, cb) = (parse_file(a, &ta)?, parse_file(b, &tb)?);
    let cfg = g.config();
    let score = compare_sources(&ca, &cb, &cfg, g.metric);
    let mut m = manifest(g, cmd, "compare", Some(cfg));
    m.input(a.display().to_string(), da);
    m.input(b.display().to_string(), db);
    Ok(Output { stdout: format!("{score:.6}\n"), stderr: m.to_json() + "\n" })
}

fn vector_mode(mode: ModeArg) -> VectorMode {
    match mode {
        ModeArg::Binary => VectorMode::Binary,
        ModeArg::Count => VectorMode::Count,
    }
}

fn index(
    g: &GlobalArgs,
    cmd: &Command,
    dataset: &Path,
    vocab_path: Option<&Path>,
    min_count: u32,
    mode: ModeArg,
    out: &Path,
) -> CmdResult {
    let ds = read_dataset(dataset)?;
    let cfg = g.config();
    let mut m = manifest(g, cmd, "index", Some(cfg));
    m.input(dataset.display().to_string(), ds.digest());
    let (corpus, skipped) = parse_corpus(&ds)?;
    let bags = corpus.feature_bags(&cfg);
    let vocab = match vocab_path {
        Some(p) => {
            let (text, digest) = read_input(p)?;
            m.input(p.display().to_string(), digest);
            Vocabulary::from_json(text.trim()).map_err(anyhow::Error::from)?
        }
        None => build_vocab(&bags, min_count).map_err(anyhow::Error::from)?,
    };
    let idx = build_index(&bags, &vocab, vector_mode(mode)).map_err(anyhow::Error::from)?;
    write_out(out, &(idx.to_json(Some(&cfg.id())) + "\n"), &m)?;
    let mut stderr = String::new();
    for s in &skipped {
        writeln!(stderr, "skipped unparsable {s}").unwrap();
    }
    stderr.push_str(&(m.to_json() + "\n"));
    Ok(Output { stdout: format!("indexed {} programs\n", idx.len()), stderr })
}

fn query(g: &GlobalArgs, cmd: &Command, index_path: &Path, file: &Path, k: usize) -> CmdResult {
    let (itext, idigest) = read_input(index_path)?;
    let (idx, stored) = CorpusIndex::from_json(&itext).map_err(anyhow::Error::from)?;
    let cfg = match (stored.as_deref().map(str::parse::<CassConfig>), g.config) {
        (Some(Ok(s)), Some(c)) if s != c => {
            return Err(anyhow!("index was built with config {s}, not {c}").into());
        }
        (Some(Ok(s)), _) => s,
        (Some(Err(e)), _) => return Err(anyhow!("index config: {e}").into()),
        (None, c) => c.unwrap_or(CassConfig::SPT),
    };
    let (text, digest) = read_input(file)?;
    let tree = parse_file(file, &text)?;
    let id = file.display().to_string();
    let bag = bag_of(&tree, &cfg, false, &id, None);
    let q = vectorize(&bag, idx.vocabulary(), idx.mode());
    let res = idx.query(&id, &q, k.min(idx.len()).max(1), g.metric).map_err(anyhow::Error::from)?;
    let mut m = manifest(g, cmd, "query", Some(cfg));
    m.input(index_path.display().to_string(), idigest);
    m.input(id, digest);
    let stdout = match g.format.unwrap_or(Format::Json) {
        Format::Json => json_line(&res),
        f => {
            let sep = if f == Format::Csv { ',' } else { '\t' };
            let mut s = format!("rank{sep}program_id{sep}score\n");
            for (i, (pid, score)) in res.hits.iter().enumerate() {
                writeln!(s, "{}{sep}{pid}{sep}{score:.6}", i + 1).unwrap();
            }
            s
        }
    };
    Ok(Output { stdout, stderr: m.to_json() + "\n" })
}

fn parse_fractions(s: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("split must be three comma-separated numbers, got {s:?}")))?;
    <[f64; 3]>::try_from(parts).map_err(|_| CliError::Usage(format!("split must have three parts, got {s:?}")))
}

/// JSON body of `eval`.
#[derive(Debug, Serialize)]
pub struct EvalOutput {
    pub metric: String,
    pub value: f64,
    pub n_queries: usize,
    pub skipped: usize,
    pub config: String,
    pub seed: u64,
    pub scorer: String,
    pub per_class: BTreeMap<String, usize>,
    pub skipped_files: Vec<String>,
    pub empty_classes: Vec<String>,
    pub manifest: RunManifest,
}

/// Programs of the evaluated classes.
fn evaluated_programs(corpus: &ProgramCorpus, split: Option<[f64; 3]>, seed: u64) -> Result<ProgramCorpus, CliError> {
    let Some(fr) = split else {
        return Ok(corpus.clone());
    };
    let labeled = LabeledCorpus::new(corpus.programs().iter().map(|p| (p.id.clone(), p.class.clone())))
        .map_err(anyhow::Error::from)?;
    let s = split_by_problem(&labeled, fr, seed).map_err(anyhow::Error::from)?;
    let keep: Vec<_> = corpus.programs().iter().filter(|p| s.test.contains(&p.class)).cloned().collect();
    Ok(ProgramCorpus::new(keep).map_err(anyhow::Error::from)?)
}

fn model_report(ck: &Checkpoint, corpus: &ProgramCorpus, cfg: &CassConfig, measure: Measure) -> Result<EvalReport, CliError> {
    let vocab = ck.vocabulary()?;
    let bags = corpus.feature_bags(cfg);
    let data = EncodedCorpus::new(&bags, &vocab, ck.model.pooling)?;
    if measure == Measure::Mapr {
        return Ok(bofnet::evaluate_map_at_r(&ck.model, &data)?);
    }
    let units: Vec<Vec<f64>> = data
        .inputs
        .iter()
        .map(|x| {
            let c = embed_input(&ck.model, x, None)?;
            let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(if n > 0.0 { c.iter().map(|v| v / n).collect() } else { c })
        })
        .collect::<Result<_, bofnet::BofError>>()?;
    let labels: Vec<&String> = data.corpus.items().iter().map(|i| &i.1).collect();
    let (mut scores, mut same) = (Vec::new(), Vec::new());
    for i in 0..units.len() {
        for j in i + 1..units.len() {
            scores.push(units[i].iter().zip(&units[j]).map(|(a, b)| a * b).sum());
            same.push(labels[i] == labels[j]);
        }
    }
    let value = average_precision(&scores, &same).map_err(anyhow::Error::from)?;
    let mut per_class = BTreeMap::new();
    for l in labels {
        *per_class.entry(l.clone()).or_insert(0) += 1;
    }
    Ok(EvalReport {
        metric: "ap".into(),
        value,
        n_queries: scores.len(),
        skipped: 0,
        per_query: Vec::new(),
        pr_points: Vec::new(),
        per_class,
        config: None,
        seed: None,
    })
}

/// Library-level evaluation used by `eval`.
pub fn evaluate_corpus(corpus: &ProgramCorpus, cfg: &CassConfig, metric: Metric, measure: Measure) -> Result<EvalReport, CliError> {
    let idx = corpus.index(cfg).map_err(anyhow::Error::from)?;
    let report = match measure {
        Measure::Mapr => map_at_r(&idx, metric),
        Measure::Ap => pair_average_precision(&idx, metric, false),
    };
    Ok(report.map_err(anyhow::Error::from)?)
}

impl From<bofnet::BofError> for CliError {
    fn from(e: bofnet::BofError) -> Self {
        CliError::Domain(e.into())
    }
}

fn eval(
    g: &GlobalArgs,
    cmd: &Command,
    dataset: &Path,
    measure: Measure,
    split: Option<&str>,
    model: Option<&Path>,
    out: Option<&Path>,
) -> CmdResult {
    let split = split.map(parse_fractions).transpose()?;
    let ds = read_dataset(dataset)?;
    let mut m = manifest(g, cmd, "eval", None);
    m.input(dataset.display().to_string(), ds.digest());
    let (corpus, skipped_files) = parse_corpus(&ds)?;
    if corpus.is_empty() {
        return Err(anyhow!("no parsable programs in {}", dataset.display()).into());
    }
    let scope = evaluated_programs(&corpus, split, g.seed)?;

    let (report, cfg, scorer) = match model {
        Some(path) => {
            let (text, digest) = read_input(path)?;
            m.input(path.display().to_string(), digest);
            let ck = Checkpoint::from_json(&text)?;
            let stored = ck.config.as_deref().map(str::parse::<CassConfig>).transpose().map_err(|e| anyhow!("checkpoint config: {e}"))?;
            let cfg = match (stored, g.config) {
                (Some(s), Some(c)) if s != c => return Err(anyhow!("checkpoint was trained with config {s}, not {c}").into()),
                (Some(s), _) => s,
                (None, c) => c.unwrap_or(CassConfig::SPT),
            };
            (model_report(&ck, &scope, &cfg, measure)?, cfg, "bof-cosine".to_string())
        }
        None => {
            let cfg = g.config();
            (evaluate_corpus(&scope, &cfg, g.metric, measure)?, cfg, format!("sparse-{}", g.metric))
        }
    };
    m.config = Some(cfg.id());
    let body = EvalOutput {
        metric: report.metric,
        value: report.value,
        n_queries: report.n_queries,
        skipped: report.skipped,
        config: cfg.id(),
        seed: g.seed,
        scorer,
        per_class: report.per_class,
        skipped_files,
        empty_classes: ds.empty_classes.clone(),
        manifest: m.clone(),
    };
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => json_line(&body),
        f => {
            let sep = if f == Format::Csv { "," } else { "\t" };
            format!(
                "metric{sep}value{sep}n_queries{sep}skipped{sep}config{sep}seed\n{}{sep}{:.9}{sep}{}{sep}{}{sep}{}{sep}{}\n",
                body.metric, body.value, body.n_queries, body.skipped, body.config, body.seed
            )
        }
    };
    let mut stderr = String::new();
    for s in &body.skipped_files {
        writeln!(stderr, "skipped unparsable {s}").unwrap();
    }
    match out {
        Some(path) => {
            write_out(path, &text, &m)?;
            Ok(Output { stdout: String::new(), stderr })
        }
        None => Ok(Output { stdout: text, stderr }),
    }
}

fn parse_configs(spec: &str) -> Result<Vec<CassConfig>, CliError> {
    if spec.trim() == "all" {
        return Ok(enumerate_configs());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<CassConfig>().map_err(|e| CliError::Usage(format!("--configs: {e}"))))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    g: &GlobalArgs,
    cmd: &Command,
    dataset: &Path,
    configs: &str,
    n_groups: usize,
    group_size: usize,
    groups_file: Option<&Path>,
    out: Option<&Path>,
) -> CmdResult {
    let configs = parse_configs(configs)?;
    let ds = read_dataset(dataset)?;
    let mut m = manifest(g, cmd, "sweep", None);
    m.input(dataset.display().to_string(), ds.digest());
    let (corpus, skipped) = parse_corpus(&ds)?;
    let groups: Vec<Vec<String>> = match groups_file {
        Some(p) => {
            let (text, digest) = read_input(p)?;
            m.input(p.display().to_string(), digest);
            serde_json::from_str(&text).with_context(|| format!("{}: expected a JSON list of class lists", p.display()))?
        }
        None => sample_problem_groups(&corpus.classes(), group_size, n_groups, g.seed).map_err(anyhow::Error::from)?,
    };
    let report = sweep_configs(&corpus, &groups, &configs, g.metric).map_err(anyhow::Error::from)?;
    let text = match g.format.unwrap_or(Format::Csv) {
        Format::Csv => report.to_csv(),
        Format::Tsv => report.to_csv().replace(',', "\t"),
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                report: &'a crate::evalkit::SweepReport,
                manifest: &'a RunManifest,
            }
            json_line(&Body { report: &report, manifest: &m })
        }
    };
    let mut stderr = String::new();
    for s in &skipped {
        writeln!(stderr, "skipped unparsable {s}").unwrap();
    }
    stderr.push_str(&(m.to_json() + "\n"));
    match out {
        Some(path) => {
            write_out(path, &text, &m)?;
            Ok(Output { stdout: String::new(), stderr })
        }
        None => Ok(Output { stdout: text, stderr }),
    }
}

fn train(g: &GlobalArgs, cmd: &Command, a: &TrainArgs) -> CmdResult {
    let fractions = parse_fractions(&a.split)?;
    let ds = read_dataset(&a.dataset)?;
    let cfg = g.config();
    let mut m = manifest(g, cmd, "train", Some(cfg));
    m.input(a.dataset.display().to_string(), ds.digest());
    let (corpus, skipped) = parse_corpus(&ds)?;
    let labeled = LabeledCorpus::new(corpus.programs().iter().map(|p| (p.id.clone(), p.class.clone())))
        .map_err(anyhow::Error::from)?;
    let split = split_by_problem(&labeled, fractions, g.seed).map_err(anyhow::Error::from)?;
    if split.validation.is_empty() {
        return Err(CliError::Usage("training needs a non-empty validation fraction".into()));
    }
    let bags = corpus.feature_bags(&cfg);
    let part = |set: &BTreeSet<String>| -> Vec<FeatureBag> {
        bags.iter().filter(|b| b.class_label.as_ref().is_some_and(|c| set.contains(c))).cloned().collect()
    };
    let (train_bags, val_bags, test_bags) = (part(&split.train), part(&split.validation), part(&split.test));
    let vocab = build_vocab(&train_bags, a.min_count).map_err(anyhow::Error::from)?;
    let pooling = match a.pooling {
        ModeArg::Binary => Pooling::Set,
        ModeArg::Count => Pooling::Count,
    };
    let hyper = TrainHyper {
        gamma: a.gamma,
        margin: a.margin,
        lr: a.lr,
        weight_decay: a.weight_decay,
        p: a.p,
        k: a.k,
        epochs: a.epochs,
        iters_per_epoch: a.iters,
        seed: g.seed,
        dim: a.dim,
        dropout: a.dropout,
        pooling,
    };
    let train_set = EncodedCorpus::new(&train_bags, &vocab, pooling)?;
    let val_set = EncodedCorpus::new(&val_bags, &vocab, pooling)?;
    let outcome = bofnet::train(&train_set, &val_set, &vocab, &hyper)?;
    let test_map = if test_bags.is_empty() {
        None
    } else {
        Some(bofnet::evaluate_map_at_r(&outcome.model, &EncodedCorpus::new(&test_bags, &vocab, pooling)?)?.value)
    };
    let ck = Checkpoint::new(outcome, &vocab, &hyper, Some(cfg.id()));
    write_out(&a.out, &(ck.to_json() + "\n"), &m)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        best_epoch: usize,
        history: &'a [bofnet::EpochStats],
        test_map_at_r: Option<f64>,
        classes: [usize; 3],
        vocab_size: usize,
        skipped_files: &'a [String],
        manifest: &'a RunManifest,
    }
    let summary = Summary {
        best_epoch: ck.best_epoch,
        history: &ck.history,
        test_map_at_r: test_map,
        classes: [split.train.len(), split.validation.len(), split.test.len()],
        vocab_size: vocab.len(),
        skipped_files: &skipped,
        manifest: &m,
    };
    Ok(Output { stdout: json_line(&summary), stderr: String::new() })
}

/// Random tiny batch for gradient checking: `programs` inputs over three classes.
fn tiny_batch(args: &GradcheckArgs, seed: u64) -> (Vec<SparseVector>, Vec<Vec<bool>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: Vec<usize> = (0..args.programs).map(|i| i % 3).collect();
    let inputs = (0..args.programs)
        .map(|_| {
            let mut idx: Vec<u32> = (0..args.vocab as u32).filter(|_| rng.gen_bool(0.4)).collect();
            if idx.is_empty() {
                idx.push(rng.gen_range(0..args.vocab as u32));
            }
            SparseVector::new(args.vocab, idx.into_iter().map(|i| (i, 1.0)).collect(), VectorMode::Binary)
                .expect("sorted indices in range")
        })
        .collect();
    let same = (0..args.programs)
        .map(|i| (0..args.programs).map(|j| i != j && classes[i] == classes[j]).collect())
        .collect();
    (inputs, same)
}

fn gradcheck(g: &GlobalArgs, cmd: &Command, a: &GradcheckArgs) -> CmdResult {
    if a.programs < 4 || a.vocab == 0 || a.dim == 0 {
        return Err(CliError::Usage("gradcheck needs --programs >= 4, --vocab >= 1 and --dim >= 1".into()));
    }
    let model = BofModel::new(a.vocab, a.dim, 0.0, g.seed);
    let (inputs, same) = tiny_batch(a, g.seed);
    let refs: Vec<&SparseVector> = inputs.iter().collect();
    let hyper = TrainHyper { gamma: a.gamma, margin: a.margin, dim: a.dim, dropout: 0.0, ..TrainHyper::default() };
    let r = grad_check(&model, &refs, &same, &hyper, a.epsilon, usize::MAX, g.seed)?;
    let m = manifest(g, cmd, "gradcheck", None);
    let stdout = json_line(&r);
    if !r.passes(a.tolerance) {
        bail_with(format!("gradient check failed: max relative error {:e} > {:e}", r.max_rel_error, a.tolerance), stdout)
    } else {
        Ok(Output { stdout, stderr: m.to_json() + "\n" })
    }
}

fn bail_with(msg: String, detail: String) -> CmdResult {
    Err(CliError::Domain(anyhow!("{msg}\n{}", detail.trim_end())))
}
