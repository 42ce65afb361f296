//! Deterministic corpus generation.
//!
//! Every family pins the function-name subtokens to features that survive
//! in the token bag. The verb is carried redundantly by two signal words
//! (the parameter and a local, or a printed string), and two verbs share
//! each operator, so names are the only thing separating a pair: flipping
//! the verb needs both carriers gone, which random site choices rarely
//! achieve but optimized ones do. The noun rides on a literal constant
//! that no transform can touch, except in the three-subtoken family whose
//! last subtoken is a renameable field.

use std::collections::HashSet;
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::token::RESERVED_WORDS;
use super::vocab::Vocabulary;

/// One corpus program: source text plus its function-name subtokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: u64,
    pub source: String,
    pub name_subtokens: Vec<String>,
}

/// Name-pattern families the generator can draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `verb_num`: arithmetic chain, signal words on param and local.
    Arith,
    /// `verb_num`: reads `self.<field>` as furniture.
    FieldAccess,
    /// `verb_num`: comparison plus boolean literals.
    BoolCheck,
    /// `verb_num`: one signal word printed, one as the parameter.
    PrintTrace,
    /// `abs_num` and friends: the builtin call carries the verb.
    BuiltinCall,
    /// `verb_num_field`: three subtokens, the last on a renameable field.
    ArithField,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Arith,
        Family::FieldAccess,
        Family::BoolCheck,
        Family::PrintTrace,
        Family::BuiltinCall,
        Family::ArithField,
    ];

    fn weight(self) -> u32 {
        match self {
            Family::Arith => 30,
            Family::FieldAccess => 16,
            Family::BoolCheck => 16,
            Family::PrintTrace => 12,
            Family::BuiltinCall => 11,
            Family::ArithField => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub count: usize,
    pub families: Vec<Family>,
    pub seed: u64,
    /// Probability of corrupting the noun subtoken: names are predictable
    /// from the body only statistically, like real code.
    pub noise: f64,
}

impl GenConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        GenConfig {
            count,
            families: Family::ALL.to_vec(),
            seed,
            noise: 0.1,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("corpus line {line}: {message}")]
    Format { line: usize, message: String },
}

const PARAM_POOL: &[&str] = &["p", "q", "n", "m", "v", "w"];

/// Two verbs per operator: the operator token alone can never separate
/// them, only the signal words can.
const VERB_POOLS: &[(&str, &[&str])] = &[
    ("add", &["total", "accum", "gain", "grow"]),
    ("plus", &["boost", "extra", "bonus", "more"]),
    ("sub", &["diff", "drop", "cut", "less"]),
    ("minus", &["taken", "shrink", "fewer", "small"]),
    ("mul", &["prod", "scale", "wide", "big"]),
    ("times", &["fold", "stack", "rep", "many"]),
    ("div", &["half", "ratio", "part", "piece"]),
    ("split", &["share", "chunk", "slice", "bits"]),
    ("get", &["got", "fetch", "grab", "pick"]),
    ("load", &["pull", "carry", "hold", "bring"]),
    ("check", &["flag", "okay", "fine", "pass"]),
    ("test", &["probe", "trial", "guess", "seek"]),
    ("show", &["note", "mark", "sign", "tag"]),
    ("emit", &["sent", "cast", "beam", "wave"]),
];

const NEUTRAL_BASES: &[&str] = &[
    "foo", "bar", "baz", "qux", "tmp", "obj", "item", "node", "elem", "cell", "slot", "data",
    "unit", "spot", "blob", "misc", "stub", "knob", "twig", "husk", "crumb", "ridge", "patch",
    "lump",
];

const NEUTRAL_SUFFIXES: &[&str] = &["", "2", "3", "4", "5", "6"];

/// Label-free filler identifiers. Kept much larger than the signal pools
/// so a uniformly random replacement word rarely carries verb signal.
fn neutral_pool() -> Vec<String> {
    let mut out = Vec::with_capacity(NEUTRAL_BASES.len() * NEUTRAL_SUFFIXES.len());
    for base in NEUTRAL_BASES {
        for suffix in NEUTRAL_SUFFIXES {
            out.push(format!("{base}{suffix}"));
        }
    }
    out
}

const NUM_WORDS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

const FIELD_POOL: &[&str] = &["x", "y", "size", "count"];

const ARITH_OPS: &[(&str, [&str; 2])] = &[
    ("+", ["add", "plus"]),
    ("-", ["sub", "minus"]),
    ("*", ["mul", "times"]),
    ("//", ["div", "split"]),
];

fn pool_for(verb: &str) -> &'static [&'static str] {
    VERB_POOLS
        .iter()
        .find(|(v, _)| *v == verb)
        .map(|(_, pool)| *pool)
        .expect("known verb")
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

struct Draft {
    source: String,
    subtokens: Vec<String>,
}

/// Per-program dosage of each signal channel. Varying these during
/// generation puts attack-reachable bag compositions inside the training
/// distribution, so only genuinely adversarial token choices move the
/// model.
struct Dosage {
    /// Distinct verb-pool words in the program (1..=3).
    sig_words: usize,
    /// Filler statements spliced into the body (0..=6).
    fillers: usize,
}

impl Dosage {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let sig_words = match rng.gen_range(0..4u32) {
            0 => 1,
            3 => 3,
            _ => 2,
        };
        Dosage {
            sig_words,
            fillers: rng.gen_range(0..=6usize),
        }
    }
}

struct NamePool {
    used: Vec<String>,
}

impl NamePool {
    fn new(taken: &[&str]) -> Self {
        NamePool {
            used: taken.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn fresh(&mut self, rng: &mut ChaCha8Rng, items: &[String]) -> String {
        loop {
            let cand = items[rng.gen_range(0..items.len())].clone();
            if !self.used.contains(&cand) {
                self.used.push(cand.clone());
                return cand;
            }
        }
    }

    fn fresh_str(&mut self, rng: &mut ChaCha8Rng, items: &[&str]) -> String {
        loop {
            let cand = items[rng.gen_range(0..items.len())].to_string();
            if !self.used.contains(&cand) {
                self.used.push(cand.clone());
                return cand;
            }
        }
    }
}

/// Assemble a body: core statements keep their order, extras land at
/// random positions between them.
fn assemble(
    rng: &mut ChaCha8Rng,
    header: String,
    core: Vec<String>,
    extras: Vec<String>,
) -> String {
    let mut body: Vec<String> = core;
    for stmt in extras {
        let pos = rng.gen_range(0..=body.len());
        body.insert(pos, stmt);
    }
    let mut out = header;
    for line in body {
        out.push_str("    ");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Filler statements: assignments (with and without the core constant),
/// prints with arbitrary string arguments, and inert guarded statements.
/// Together they make ordinary bodies look like bodies that have had
/// benign statements inserted, so only the inserted token's identity can
/// carry attack signal.
fn filler_stmts(
    rng: &mut ChaCha8Rng,
    names: &mut NamePool,
    neutrals: &[String],
    param: &str,
    c: usize,
    count: usize,
) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let stmt = match rng.gen_range(0..5u32) {
            0 => {
                let name = names.fresh(rng, neutrals);
                let op = if rng.gen_bool(0.5) { "+" } else { "-" };
                format!("{name} = {param} {op} {c}")
            }
            1 => {
                let name = names.fresh(rng, neutrals);
                let op = if rng.gen_bool(0.5) { "+" } else { "-" };
                format!("{name} = {param} {op} {param}")
            }
            2 | 3 => {
                let word = &neutrals[rng.gen_range(0..neutrals.len())];
                format!("print(\"{word}\")")
            }
            _ => {
                let word = &neutrals[rng.gen_range(0..neutrals.len())];
                format!("if \"{word}\" != \"{word}\": _dead = 1")
            }
        };
        out.push(stmt);
    }
    out
}

/// Extra pool-word assignments carrying redundant verb signal.
fn sig_stmts(
    rng: &mut ChaCha8Rng,
    names: &mut NamePool,
    pool: &[&str],
    param: &str,
    op: &str,
    c: usize,
    count: usize,
) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name = names.fresh_str(rng, pool);
        out.push(format!("{name} = {param} {op} {c}"));
    }
    out
}

fn gen_one(rng: &mut ChaCha8Rng, family: Family, neutrals: &[String]) -> Draft {
    let c = rng.gen_range(1..=9usize);
    let numword = NUM_WORDS[c - 1];
    let dosage = Dosage::draw(rng);
    match family {
        Family::Arith => {
            let (op, verbs) = ARITH_OPS[rng.gen_range(0..ARITH_OPS.len())];
            let verb = verbs[rng.gen_range(0..2)];
            let pool = pool_for(verb);
            let sig1 = pick(rng, pool);
            let mut names = NamePool::new(&[sig1]);
            let ret = if dosage.sig_words >= 2 {
                names.fresh_str(rng, pool)
            } else {
                names.fresh(rng, neutrals)
            };
            let mut extras = sig_stmts(
                rng,
                &mut names,
                pool,
                sig1,
                op,
                c,
                dosage.sig_words.saturating_sub(2),
            );
            extras.extend(filler_stmts(rng, &mut names, neutrals, sig1, c, dosage.fillers));
            let header = format!("def {verb}_{numword}({sig1}):\n");
            let core = vec![format!("{ret} = {sig1} {op} {c}"), format!("return {ret}")];
            Draft {
                source: assemble(rng, header, core, extras),
                subtokens: vec![verb.into(), numword.into()],
            }
        }
        Family::FieldAccess => {
            let verb = if rng.gen_bool(0.5) { "get" } else { "load" };
            let pool = pool_for(verb);
            let sig1 = pick(rng, pool);
            let mut names = NamePool::new(&[sig1]);
            let field = pick(rng, FIELD_POOL);
            let loc = names.fresh(rng, neutrals);
            let ret = if dosage.sig_words >= 2 {
                names.fresh_str(rng, pool)
            } else {
                names.fresh(rng, neutrals)
            };
            let mut extras = sig_stmts(
                rng,
                &mut names,
                pool,
                sig1,
                "+",
                c,
                dosage.sig_words.saturating_sub(2),
            );
            extras.extend(filler_stmts(rng, &mut names, neutrals, sig1, c, dosage.fillers));
            let header = format!("def {verb}_{numword}({sig1}):\n");
            let core = vec![
                format!("{loc} = self.{field} + {c}"),
                format!("{ret} = {loc} - {sig1}"),
                format!("return {ret}"),
            ];
            Draft {
                source: assemble(rng, header, core, extras),
                subtokens: vec![verb.into(), numword.into()],
            }
        }
        Family::BoolCheck => {
            let verb = if rng.gen_bool(0.5) { "check" } else { "test" };
            let pool = pool_for(verb);
            let sig1 = pick(rng, pool);
            let mut names = NamePool::new(&[sig1]);
            let cmp = if rng.gen_bool(0.5) { ">" } else { "<" };
            let cond = if dosage.sig_words >= 2 {
                names.fresh_str(rng, pool)
            } else {
                names.fresh(rng, neutrals)
            };
            let mut extras = sig_stmts(
                rng,
                &mut names,
                pool,
                sig1,
                "-",
                c,
                dosage.sig_words.saturating_sub(2),
            );
            extras.extend(filler_stmts(rng, &mut names, neutrals, sig1, c, dosage.fillers));
            let header = format!("def {verb}_{numword}({sig1}):\n");
            let core = vec![
                format!("{cond} = {sig1} {cmp} {c}"),
                format!("if {cond}: return True"),
                format!("return False"),
            ];
            Draft {
                source: assemble(rng, header, core, extras),
                subtokens: vec![verb.into(), numword.into()],
            }
        }
        Family::PrintTrace => {
            let verb = if rng.gen_bool(0.5) { "show" } else { "emit" };
            let pool = pool_for(verb);
            let sig1 = pick(rng, pool);
            let mut names = NamePool::new(&[sig1]);
            let content = if dosage.sig_words >= 2 {
                names.fresh_str(rng, pool)
            } else {
                names.fresh(rng, neutrals)
            };
            let ret = names.fresh(rng, neutrals);
            let mut extras = sig_stmts(
                rng,
                &mut names,
                pool,
                sig1,
                "+",
                c,
                dosage.sig_words.saturating_sub(2),
            );
            extras.extend(filler_stmts(rng, &mut names, neutrals, sig1, c, dosage.fillers));
            let header = format!("def {verb}_{numword}({sig1}):\n");
            let core = vec![
                format!("print(\"{content}\")"),
                format!("{ret} = {sig1} + {c}"),
                format!("return {ret}"),
            ];
            Draft {
                source: assemble(rng, header, core, extras),
                subtokens: vec![verb.into(), numword.into()],
            }
        }
        Family::BuiltinCall => {
            let (callee, verb) = match rng.gen_range(0..3) {
                0 => ("abs", "abs"),
                1 => ("max", "max"),
                _ => ("min", "min"),
            };
            let param = pick(rng, PARAM_POOL);
            let mut names = NamePool::new(&[param]);
            let ret = names.fresh(rng, neutrals);
            let call = if callee == "abs" {
                format!("abs({param} - {c})")
            } else {
                format!("{callee}({param}, {c})")
            };
            let extras = filler_stmts(rng, &mut names, neutrals, param, c, dosage.fillers);
            let header = format!("def {verb}_{numword}({param}):\n");
            let core = vec![format!("{ret} = {call}"), format!("return {ret}")];
            Draft {
                source: assemble(rng, header, core, extras),
                subtokens: vec![verb.into(), numword.into()],
            }
        }
        Family::ArithField => {
            let (op, verbs) = ARITH_OPS[rng.gen_range(0..ARITH_OPS.len())];
            let verb = verbs[rng.gen_range(0..2)];
            let pool = pool_for(verb);
            let sig1 = pick(rng, pool);
            let mut names = NamePool::new(&[sig1]);
            let field = pick(rng, FIELD_POOL);
            let ret = if dosage.sig_words >= 2 {
                names.fresh_str(rng, pool)
            } else {
                names.fresh(rng, neutrals)
            };
            let mut extras = sig_stmts(
                rng,
                &mut names,
                pool,
                sig1,
                op,
                c,
                dosage.sig_words.saturating_sub(2),
            );
            // vary the field occurrence count like every other channel
            for _ in 0..rng.gen_range(0..=2usize) {
                let name = names.fresh(rng, neutrals);
                extras.push(format!("{name} = self.{field} + {c}"));
            }
            extras.extend(filler_stmts(rng, &mut names, neutrals, sig1, c, dosage.fillers));
            let header = format!("def {verb}_{numword}_{field}({sig1}):\n");
            let core = vec![
                format!("{ret} = {sig1} {op} {c}"),
                format!("return {ret} + self.{field}"),
            ];
            Draft {
                source: assemble(rng, header, core, extras),
                subtokens: vec![verb.into(), numword.into(), field.into()],
            }
        }
    }
}

/// Generate `config.count` distinct programs, byte-deterministic in the
/// seed.
pub fn generate_corpus(config: &GenConfig) -> Vec<CorpusEntry> {
    assert!(config.count >= 1, "count must be at least 1");
    assert!(!config.families.is_empty(), "at least one family");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let weights: Vec<u32> = config.families.iter().map(|f| f.weight()).collect();
    let total: u32 = weights.iter().sum();
    let neutrals = neutral_pool();
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(config.count);
    while out.len() < config.count {
        let mut roll = rng.gen_range(0..total);
        let mut family = config.families[0];
        for (f, w) in config.families.iter().zip(&weights) {
            if roll < *w {
                family = *f;
                break;
            }
            roll -= w;
        }
        let mut draft = gen_one(&mut rng, family, &neutrals);
        if config.noise > 0.0 && rng.gen::<f64>() < config.noise {
            // corrupt the noun: the name no longer matches the body
            let wrong = pick(&mut rng, NUM_WORDS);
            let old_name = draft.subtokens.join("_");
            draft.subtokens[1] = wrong.to_string();
            let new_name = draft.subtokens.join("_");
            draft.source = draft.source.replacen(&old_name, &new_name, 1);
        }
        if seen.insert(draft.source.clone()) {
            out.push(CorpusEntry {
                id: out.len() as u64,
                source: draft.source,
                name_subtokens: draft.subtokens,
            });
        }
    }
    out
}

/// The fixed vocabulary covering everything the generator can emit plus
/// the replacement-word pools.
pub fn standard_vocabulary() -> Vocabulary {
    let mut tokens: Vec<String> = Vec::new();
    for t in RESERVED_WORDS {
        tokens.push(t.to_string());
    }
    for t in [":", "=", "==", "!=", "<", ">", "+", "-", "*", "//"] {
        tokens.push(t.to_string());
    }
    for d in 0..=9 {
        tokens.push(d.to_string());
    }
    for t in PARAM_POOL {
        tokens.push(t.to_string());
    }
    for (_, pool) in VERB_POOLS {
        for t in *pool {
            tokens.push(t.to_string());
        }
    }
    for t in neutral_pool() {
        tokens.push(t);
    }
    for t in FIELD_POOL {
        tokens.push(t.to_string());
    }
    Vocabulary::new(tokens)
}

/// All subtokens any generated name can contain (sorted, without PAD).
pub fn output_subtokens() -> Vec<String> {
    let mut out: Vec<String> = VERB_POOLS.iter().map(|(v, _)| v.to_string()).collect();
    out.extend(["abs", "max", "min"].map(String::from));
    out.extend(NUM_WORDS.iter().map(|s| s.to_string()));
    out.extend(FIELD_POOL.iter().map(|s| s.to_string()));
    out.sort();
    out.dedup();
    out
}

pub fn write_corpus(path: &Path, entries: &[CorpusEntry]) -> Result<(), CorpusError> {
    let mut buf = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut buf, e).expect("entry serializes");
        buf.push(b'\n');
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CorpusEntry =
            serde_json::from_str(&line).map_err(|e| CorpusError::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parser::parse;
    use crate::minilang::token::tokenize;

    #[test]
    fn generation_is_deterministic() {
        let a = generate_corpus(&GenConfig::new(1, 7));
        let b = generate_corpus(&GenConfig::new(1, 7));
        assert_eq!(a, b);
        let c = generate_corpus(&GenConfig::new(1, 8));
        assert_ne!(a, c);
    }

    #[test]
    fn all_generated_programs_parse_and_are_distinct() {
        let entries = generate_corpus(&GenConfig::new(500, 7));
        assert_eq!(entries.len(), 500);
        let mut seen = HashSet::new();
        for e in &entries {
            assert!(seen.insert(e.source.clone()), "duplicate source");
            let f = parse(&tokenize(&e.source).unwrap()).unwrap();
            assert!(!f.body.is_empty());
            assert!((1..=3).contains(&e.name_subtokens.len()));
        }
    }

    #[test]
    fn generated_programs_interpret_cleanly() {
        use crate::minilang::interp::interpret;
        let entries = generate_corpus(&GenConfig::new(100, 3));
        for e in &entries {
            let f = parse(&tokenize(&e.source).unwrap()).unwrap();
            for arg in [-50i64, 0, 3, 77] {
                let args = vec![arg; f.params.len()];
                interpret(&f, &args, 10_000).unwrap_or_else(|err| {
                    panic!("program {} failed on {arg}: {err}\n{}", e.id, e.source)
                });
            }
        }
    }

    #[test]
    fn vocabulary_covers_generated_tokens() {
        use crate::minilang::sites::core_model_tokens;
        let vocab = standard_vocabulary();
        let entries = generate_corpus(&GenConfig::new(200, 11));
        for e in &entries {
            let f = parse(&tokenize(&e.source).unwrap()).unwrap();
            for t in core_model_tokens(&f) {
                assert!(
                    vocab.id(t.vocab_text()).is_some(),
                    "token {:?} missing from standard vocabulary",
                    t.text
                );
            }
        }
    }

    #[test]
    fn corpus_file_round_trip() {
        let entries = generate_corpus(&GenConfig::new(10, 5));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        write_corpus(&path, &entries).unwrap();
        let loaded = read_corpus(&path).unwrap();
        assert_eq!(entries, loaded);
    }

    #[test]
    fn output_subtokens_cover_all_names() {
        let names = output_subtokens();
        let entries = generate_corpus(&GenConfig::new(300, 13));
        for e in &entries {
            for st in &e.name_subtokens {
                assert!(names.contains(st), "{st}");
            }
        }
    }

    #[test]
    fn verb_signal_dosage_varies() {
        // every non-builtin program carries its verb on at least one
        // name, and the count varies across the corpus so depleted bags
        // stay in-distribution
        let entries = generate_corpus(&GenConfig::new(200, 17));
        let mut ones = 0usize;
        let mut multi = 0usize;
        for e in &entries {
            let verb = &e.name_subtokens[0];
            if ["abs", "max", "min"].contains(&verb.as_str()) {
                continue;
            }
            let pool = pool_for(verb);
            let hits = pool.iter().filter(|w| e.source.contains(*w)).count();
            assert!(hits >= 1, "{} carries no signal words:\n{}", verb, e.source);
            if hits == 1 {
                ones += 1;
            } else {
                multi += 1;
            }
        }
        assert!(ones > 10, "single-signal programs missing ({ones})");
        assert!(multi > 10, "multi-signal programs missing ({multi})");
    }
}
