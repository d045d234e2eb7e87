//! Fixtures shared by the integration tests: small hand-written programs and
//! seeded generators for synthetic labelled corpora.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Prints the digits of its input, reading with stream operators.
pub const PROGRAM_A: &str = r#"
int main() {
    int a;
    while (!cin.eof()) {
        while (!cin.eof() && !isdigit(cin.peek()))
            cin.get();
        if (cin >> a)
            cout << a << endl;
    }
    return 0;
}
"#;

/// Same task as [`PROGRAM_A`], walking a character buffer by pointer.
pub const PROGRAM_B: &str = r#"
int main() {
    char *p, *head, c;
    p = (char *) malloc(sizeof(char) * 30);
    head = p;
    scanf("%c", p);
    while (*p != '\n') { p++; *p = getchar(); }
    *p = '\0';
    p = head;
    for (; *p != '\0'; p++) {
        if (*p <= '9' && *p >= '0') { printf("%c", *p); }
        else if (*(p + 1) < 58 && *(p + 1) > 47) { putchar('\n'); }
    }
    return 0;
}
"#;

/// An unrelated task: bubble sort of a global array.
pub const SORT_PROGRAM: &str = r#"
int data[100];
int n;
void sort(int len) {
    int i, j, t;
    for (i = 0; i < len; i++)
        for (j = 0; j + 1 < len - i; j++)
            if (data[j] > data[j + 1]) { t = data[j]; data[j] = data[j + 1]; data[j + 1] = t; }
}
int main() {
    int i;
    scanf("%d", &n);
    for (i = 0; i < n; i++) scanf("%d", &data[i]);
    sort(n);
    for (i = 0; i < n; i++) printf("%d ", data[i]);
    return 0;
}
"#;

/// Local variable names the generators draw from.
pub const LOCAL_NAMES: &[&str] = &[
    "i", "j", "k", "n", "m", "x", "y", "z", "t", "s", "cnt", "sum", "tmp", "val", "res", "acc", "lo", "hi",
];

/// Statement shapes over locals `{a}`, `{b}`, `{c}`.
const CORE_SHAPES: &[&str] = &[
    "while ({a} > 0) { {b} = {b} + {a} % 10; {a} = {a} / 10; }",
    "for ({c} = 0; {c} < {a}; {c}++) { if ({c} % 2 == 0) {b} += {c}; }",
    "if ({a} > {b}) { {c} = {a}; {a} = {b}; {b} = {c}; }",
    "{b} = {a} * {a} - 4 * {c};",
    "while ({a} != {b}) { if ({a} > {b}) {a} -= {b}; else {b} -= {a}; }",
    "{c} = ({a} > {b}) ? {a} : {b};",
    "for ({c} = 1; {c} <= {a}; {c}++) {b} = {b} * {c};",
    "do { {a} = {a} >> 1; {c}++; } while ({a} > 0);",
    "switch ({a} % 3) { case 0: {b} = 1; break; case 1: {b} = 2; break; default: {b} = 0; }",
    "if ({a} % 4 == 0 && {a} % 100 != 0 || {a} % 400 == 0) {b} = 1;",
    "{b} = sqrt({a} * {a} + {c} * {c});",
    "while ({c} < {a}) { {c} = {c} * 2 + 1; }",
    "if ({b} < 0) {b} = -{b};",
    "{a} = {b} ^ ({c} << 2);",
    "{c} = abs({a} - {b}) / 2;",
    "for ({c} = {a}; {c} > 1; {c}--) { if ({a} % {c} == 0) break; }",
];

/// Filler statements shared by every class.
const DISTRACTOR_SHAPES: &[&str] = &[
    "printf(\"%d\\n\", {a});",
    "scanf(\"%d\", &{b});",
    "{c} = 0;",
    "{a}++;",
    "{b} = {b} + 1;",
    "puts(\"done\");",
    "{c} = {a};",
    "getchar();",
    "{a} = {a} + {b};",
    "printf(\"%d %d\\n\", {b}, {c});",
    "if ({a} == 0) { puts(\"zero\"); }",
    "{b} = {c} - 1;",
    "for ({c} = 0; {c} < 3; {c}++) { printf(\"%d \", {c}); }",
    "if ({b} != {c} && {a} >= 0) { {a} = {a} * 10 + {b}; }",
    "while (scanf(\"%d\", &{a}) == 1) { {b} = {b} | {a}; }",
    "{c} = ({a} + {b} + {c}) / 3 + ({a} - {b}) * 2;",
    "if ({a} < {b} || {b} < {c}) { {c} = {a} < {b} ? {b} : {a}; } else { {c} = -1; }",
    "do { {b}--; } while ({b} > {a} && {b} % 7 != 0);",
    "printf(\"%d %d %d\\n\", {a} + 1, {b} * 2, {c} % 5);",
    "{a} = ({b} << 3) + ({c} >> 1) - ({a} & 15);",
];

const LOCAL_SLOTS: [&str; 3] = ["{a}", "{b}", "{c}"];
const GLOBAL_SLOTS: [&str; 4] = ["{a}", "{b}", "{g}", "{h}"];

fn fill(shape: &str, slots: &[&str], vars: &[&str]) -> String {
    let mut out = shape.to_string();
    for (slot, name) in slots.iter().zip(vars) {
        out = out.replace(slot, name);
    }
    out
}

fn pick_names<'a>(pool: &[&'a str], n: usize, rng: &mut ChaCha8Rng) -> Vec<&'a str> {
    pool.choose_multiple(rng, n).copied().collect()
}

/// Three core shapes per class. Neighbouring classes share a shape, so every
/// class has a near-duplicate distractor class.
pub fn class_signature(class: usize) -> [usize; 3] {
    let n = CORE_SHAPES.len();
    [(2 * class) % n, (2 * class + 1) % n, (2 * class + 2) % n]
}

/// `(id, class, source)` triples: each program holds its class's core
/// statements plus `n_distractors` distinct fillers, shuffled, with fresh local names.
pub fn learning_corpus(classes: usize, per_class: usize, n_distractors: usize, seed: u64) -> Vec<(String, String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for class in 0..classes {
        for p in 0..per_class {
            let names = pick_names(LOCAL_NAMES, 3, &mut rng);
            let mut stmts: Vec<String> = class_signature(class).iter().map(|&s| fill(CORE_SHAPES[s], &LOCAL_SLOTS, &names)).collect();
            for shape in DISTRACTOR_SHAPES.choose_multiple(&mut rng, n_distractors) {
                stmts.push(fill(shape, &LOCAL_SLOTS, &names));
            }
            stmts.shuffle(&mut rng);
            let src = format!(
                "int main() {{\n    int {}, {}, {};\n    {}\n    return 0;\n}}\n",
                names[0],
                names[1],
                names[2],
                stmts.join("\n    ")
            );
            out.push((format!("c{class:02}/p{p:02}.c"), format!("c{class:02}"), src));
        }
    }
    out
}

/// Statement shapes over globals `{g}`, `{h}` and locals `{a}`, `{b}`.
const GLOBAL_SHAPES: &[&str] = &[
    "{g} = {g} + {a};",
    "if ({h} > {a}) {h} = {a};",
    "while ({g} > 0) { {g} = {g} / 2; {b}++; }",
    "for ({a} = 0; {a} < {h}; {a}++) {g} += {a};",
    "{b} = {g} * {h};",
    "if ({g} % 2 == 0) { {h} = {h} - {b}; }",
    "{h} = ({g} > {b}) ? {g} : {b};",
    "printf(\"%d\\n\", {g});",
    "scanf(\"%d\", &{h});",
    "{a} = {h} - {g};",
];

/// Global names shared by all classes when names are drawn per program.
pub const SHARED_GLOBALS: &[&str] = &["total", "limit", "best", "count", "value", "step", "peak", "last"];

/// How global variables are named in [`global_name_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlobalNaming {
    /// Drawn afresh for each program from [`SHARED_GLOBALS`]; class structure is fixed.
    RandomPerProgram,
    /// Fixed per class; statements are drawn at random from one shared pool.
    ClassConsistent,
}

/// Corpus whose class signal lives either in statement structure (names
/// random) or in global names (structure random).
pub fn global_name_corpus(
    classes: usize,
    per_class: usize,
    naming: GlobalNaming,
    seed: u64,
) -> Vec<(String, String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = GLOBAL_SHAPES.len();
    let mut out = Vec::new();
    for class in 0..classes {
        let template: Vec<usize> = (0..4).map(|i| (class * 3 + i * (class % 3 + 1)) % n).collect();
        for p in 0..per_class {
            let locals = pick_names(LOCAL_NAMES, 2, &mut rng);
            let globals: Vec<String> = match naming {
                GlobalNaming::RandomPerProgram => pick_names(SHARED_GLOBALS, 2, &mut rng).into_iter().map(String::from).collect(),
                GlobalNaming::ClassConsistent => vec![format!("g{class}_sum"), format!("g{class}_max")],
            };
            let shapes: Vec<usize> = match naming {
                GlobalNaming::RandomPerProgram => {
                    let mut s = template.clone();
                    s.shuffle(&mut rng);
                    s
                }
                GlobalNaming::ClassConsistent => (0..4).map(|_| rng.gen_range(0..n)).collect(),
            };
            let vars = [locals[0], locals[1], globals[0].as_str(), globals[1].as_str()];
            let body: Vec<String> = shapes.iter().map(|&s| fill(GLOBAL_SHAPES[s], &GLOBAL_SLOTS, &vars)).collect();
            let src = format!(
                "int {g};\nint {h};\nint main() {{\n    int {a}, {b};\n    {body}\n    return 0;\n}}\n",
                g = globals[0],
                h = globals[1],
                a = locals[0],
                b = locals[1],
                body = body.join("\n    ")
            );
            out.push((format!("g{class:02}/p{p:02}.c"), format!("g{class:02}"), src));
        }
    }
    out
}

/// Renames whole-word identifiers in `src`.
pub fn rename_identifiers(src: &str, map: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(src.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        let replaced = map.iter().find(|(from, _)| *from == word.as_str()).map(|(_, to)| *to);
        out.push_str(replaced.unwrap_or(word));
        word.clear();
    };
    let mut in_string = false;
    for ch in src.chars() {
        if in_string {
            out.push(ch);
            if ch == '"' {
                in_string = false;
            }
            continue;
        }
        if ch.is_ascii_alphanumeric() || ch == '_' {
            word.push(ch);
        } else {
            flush(&mut word, &mut out);
            if ch == '"' {
                in_string = true;
            }
            out.push(ch);
        }
    }
    flush(&mut word, &mut out);
    out
}
