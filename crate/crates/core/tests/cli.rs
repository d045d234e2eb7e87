mod common;

use std::path::Path;
use std::process::{Command, Output};

use misim::cass::CassConfig;
use misim::cli::{evaluate_corpus, Measure};
use misim::evalkit::ProgramCorpus;
use misim::simindex::Metric;

use common::{learning_corpus, rename_identifiers, PROGRAM_A, PROGRAM_B, SORT_PROGRAM};

fn misim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_misim")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_dataset(root: &Path) {
    for (id, _, src) in learning_corpus(4, 5, 6, 21) {
        let path = root.join(id);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, src).unwrap();
    }
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn compare_is_one_for_identical_and_renamed_copies() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.c", SORT_PROGRAM);
    let renamed = rename_identifiers(SORT_PROGRAM, &[("i", "row"), ("j", "col"), ("t", "swap")]);
    let b = write(dir.path(), "b.c", &renamed);
    assert_eq!(stdout(&misim(&["compare", &a, &a])).trim(), "1.000000");
    assert_eq!(stdout(&misim(&["compare", &a, &b])).trim(), "1.000000");
}

#[test]
fn compare_ranks_a_program_closer_to_its_sibling() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.c", PROGRAM_A);
    let b = write(dir.path(), "b.c", PROGRAM_B);
    let s = write(dir.path(), "s.c", SORT_PROGRAM);
    let score = |x: &str, y: &str| -> f64 {
        stdout(&misim(&["compare", x, y, "--config", "2-1-3-1-1", "--metric", "cosine"])).trim().parse().unwrap()
    };
    let (ab, as_) = (score(&a, &b), score(&a, &s));
    assert!(ab > as_, "A~B {ab} should beat A~sort {as_}");
}

#[test]
fn sweep_all_writes_one_row_per_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_dataset(&data);
    let out = stdout(&misim(&["sweep", "--dataset", data.to_str().unwrap(), "--groups", "4", "--group-size", "2"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "config_id,mean_ap,wins,losses");
    let configs = lines[1..].iter().filter(|l| !l.contains('=')).count();
    let marginals = lines[1..].iter().filter(|l| l.contains('=')).count();
    assert_eq!((configs, marginals), (216, 3 + 3 + 4 + 3 + 2));
    assert!(lines.iter().any(|l| l.starts_with("0-0-0-0-0,")));
    assert!(lines.iter().any(|l| l.starts_with("global_vars=2,")));
}

#[test]
fn eval_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_dataset(&data);
    let out = stdout(&misim(&["eval", "--dataset", data.to_str().unwrap(), "--config", "1-2-2-0-1", "--metric", "dot"]));
    let report: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    let (corpus, _) = ProgramCorpus::parse(learning_corpus(4, 5, 6, 21)).unwrap();
    let cfg: CassConfig = "1-2-2-0-1".parse().unwrap();
    let lib = evaluate_corpus(&corpus, &cfg, Metric::Dot, Measure::Mapr).unwrap();
    assert_eq!(report["metric"], "map@r");
    assert_eq!(report["value"].as_f64().unwrap(), lib.value);
    assert_eq!(report["n_queries"].as_u64().unwrap() as usize, lib.n_queries);
    assert_eq!(report["manifest"]["config"], "1-2-2-0-1");
}

#[test]
fn index_then_query_finds_the_same_program_first() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_dataset(&data);
    let index = dir.path().join("corpus.index.json");
    stdout(&misim(&["index", "--dataset", data.to_str().unwrap(), "--out", index.to_str().unwrap()]));
    assert!(dir.path().join("corpus.index.json.manifest.json").exists());
    let query = data.join("c02/p03.c");
    let out = stdout(&misim(&["query", "--index", index.to_str().unwrap(), query.to_str().unwrap(), "--k", "3"]));
    let result: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(result["hits"][0][0], "c02/p03.c");
    assert_eq!(result["hits"].as_array().unwrap().len(), 3);
}

#[test]
fn gradcheck_and_untrained_checkpoint() {
    stdout(&misim(&["gradcheck"]));
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_dataset(&data);
    let ck = dir.path().join("model.json");
    let (data, ck) = (data.to_str().unwrap(), ck.to_str().unwrap());
    stdout(&misim(&["train", "--dataset", data, "--out", ck, "--epochs", "0", "--dim", "8"]));
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(ck).unwrap()).unwrap();
    assert_eq!(saved["history"].as_array().unwrap().len(), 0);
    let out = stdout(&misim(&["eval", "--dataset", data, "--model", ck]));
    let report: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(report["scorer"], "bof-cosine");
    let clash = misim(&["eval", "--dataset", data, "--model", ck, "--config", "2-2-2-2-1"]);
    assert_eq!(clash.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(misim(&["eval", "--dataset", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(misim(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(misim(&["eval", "--dataset", ".", "--config", "9-9-9-9-9"]).status.code(), Some(2));
}

#[test]
fn unparsable_file_is_an_error_for_compare() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.c", PROGRAM_A);
    let bad = write(dir.path(), "bad.c", "int main( {");
    let out = misim(&["compare", &good, &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.c"));
}
