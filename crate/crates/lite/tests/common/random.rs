//! Seeded random acyclic projects for checking counting, enumeration and
//! matching against each other.
//!
//! Shape rules the generator keeps so every project assembles cleanly:
//! no variable occurs twice on one Source line; variables sit at the top
//! level of a line, with the same optionality on every line of a unit;
//! each line has at least one mandatory word; categories only refer to
//! categories declared after them, so the reference graph is acyclic.

use std::collections::HashSet;
use std::fmt::Write;

use lite_core::engine::match_source;
use lite_core::grammar::{compile_grammar, count_language, enumerate_language};
use lite_core::{assemble, parse_rule_file, tokenize, AssembledProject, FileRole, ProjectManifest};
use num_bigint::BigUint;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: &[&str] = &["a", "b", "c", "d", "e", "f", "g", "h"];

fn word(rng: &mut ChaCha8Rng) -> &'static str {
    WORDS.choose(rng).unwrap()
}

/// A run of plain words, sometimes with one group: `b ( c | d e )`.
fn words(rng: &mut ChaCha8Rng, allow_empty_alt: bool) -> String {
    let mut parts = vec![word(rng).to_string()];
    for _ in 0..rng.random_range(0..3) {
        let piece = match rng.random_range(0..4) {
            0 => format!("?{}", word(rng)),
            1 => {
                let alts: Vec<String> = (0..rng.random_range(2..4))
                    .map(|_| (0..rng.random_range(1..3)).map(|_| word(rng)).collect::<Vec<_>>().join(" "))
                    .collect();
                format!("( {} )", alts.join(" | "))
            }
            2 if allow_empty_alt => format!("?( {} | {} )", word(rng), word(rng)),
            _ => word(rng).to_string(),
        };
        parts.push(piece);
    }
    parts.join(" ")
}

struct Category {
    name: String,
    lexical: bool,
}

/// Rule text for one random project.
pub fn random_rules(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cats = rng.random_range(0..4);
    let cats: Vec<Category> = (0..n_cats)
        .map(|i| Category { name: format!("$$c{i}"), lexical: i == n_cats - 1 || rng.random_bool(0.6) })
        .collect();
    let mut out = String::new();
    let mut key = 0;
    // $$top may refer to any category; $$cI only to $$cJ with J > I.
    let mut units = |out: &mut String, rng: &mut ChaCha8Rng, name: &str, refs: &[&Category]| {
        for _ in 0..rng.random_range(1..4) {
            let mut vars: Vec<(&str, bool)> = Vec::new();
            for c in refs {
                if vars.len() < 2 && rng.random_bool(0.5) {
                    vars.push((c.name.as_str(), rng.random_bool(0.3)));
                }
            }
            writeln!(out, "TrPhrase {name}").unwrap();
            for _ in 0..rng.random_range(1..3) {
                let mut parts = vec![words(rng, true)];
                for (v, optional) in &vars {
                    let at = rng.random_range(0..=parts.len());
                    parts.insert(at, format!("{}{v}", if *optional { "?" } else { "" }));
                }
                writeln!(out, "Source {}", parts.join(" ")).unwrap();
            }
            let canonical: Vec<String> = std::iter::once(format!("k{key}"))
                .chain(vars.iter().map(|(v, o)| format!("{}{v}", if *o { "?" } else { "" })))
                .collect();
            key += 1;
            writeln!(out, "Target/english {}", canonical.join(" ")).unwrap();
            writeln!(out, "EndTrPhrase\n").unwrap();
        }
    };
    units(&mut out, &mut rng, "$$top", &cats.iter().collect::<Vec<_>>());
    for (i, c) in cats.iter().enumerate() {
        if c.lexical {
            for j in 0..rng.random_range(1..4) {
                writeln!(out, "TrLex {} source=\"{}\" english=\"l{i}x{j}\"", c.name, words(&mut rng, false)).unwrap();
            }
        } else {
            let later: Vec<&Category> = cats[i + 1..].iter().collect();
            units(&mut out, &mut rng, &c.name, &later);
        }
    }
    out
}

pub fn assemble_rules(text: &str) -> AssembledProject {
    let manifest = ProjectManifest::new("random", "english", &[]);
    let (file, diags) = parse_rule_file(text, "random.lite", FileRole::Monolithic, &manifest.source_language);
    assert!(diags.iter().all(|d| !d.is_error()), "{diags:?}\n{text}");
    match assemble(&manifest, &[file]).into_result() {
        Ok((p, _)) => p,
        Err(d) => panic!("{d:?}\n{text}"),
    }
}

pub struct Outcome {
    pub count: BigUint,
    pub enumerated: usize,
    pub distinct: usize,
    pub candidates_matched: usize,
}

/// Check one project; `Err` describes the first disagreement.
pub fn check_project(seed: u64, max: usize) -> Result<Option<Outcome>, String> {
    let text = random_rules(seed);
    let project = assemble_rules(&text);
    let g = compile_grammar(&project, None).map_err(|e| format!("seed {seed}: {e}"))?;
    let count = count_language(&g).count;
    if count > BigUint::from(max) {
        return Ok(None);
    }
    let sentences: Vec<Vec<String>> = enumerate_language(&g, max + 1).collect();
    if BigUint::from(sentences.len()) != count {
        return Err(format!("seed {seed}: count {count} but {} enumerated\n{text}", sentences.len()));
    }
    let set: HashSet<Vec<String>> = sentences.iter().cloned().collect();
    for s in &set {
        let utt = tokenize(&s.join(" ")).map_err(|_| format!("seed {seed}: empty sentence enumerated"))?;
        if match_source(&project, &utt).is_err() {
            return Err(format!("seed {seed}: enumerated {s:?} does not match\n{text}"));
        }
    }

    // Candidates: random strings and one-token edits of enumerated sentences.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut candidates: Vec<Vec<String>> = Vec::new();
    for _ in 0..200 {
        let n = rng.random_range(1..8);
        candidates.push((0..n).map(|_| word(&mut rng).to_string()).collect());
    }
    for s in sentences.iter().take(200) {
        let mut c = s.clone();
        let i = rng.random_range(0..=c.len());
        match rng.random_range(0..3) {
            0 => c.insert(i, word(&mut rng).to_string()),
            1 if i < c.len() => {
                c.remove(i);
            }
            _ if i < c.len() => c[i] = word(&mut rng).to_string(),
            _ => c.push(word(&mut rng).to_string()),
        }
        candidates.push(c);
    }
    let mut matched = 0;
    for c in candidates.iter().filter(|c| !c.is_empty()) {
        let utt = tokenize(&c.join(" ")).unwrap();
        if match_source(&project, &utt).is_ok() {
            matched += 1;
            if !set.contains(c) {
                return Err(format!("seed {seed}: {c:?} matches but was never enumerated\n{text}"));
            }
        }
    }
    Ok(Some(Outcome { count, enumerated: sentences.len(), distinct: set.len(), candidates_matched: matched }))
}

/// Run seeds from 0 until `want` projects within `max` sentences are checked.
pub fn check_many(want: usize, max: usize) -> Result<Vec<Outcome>, String> {
    let mut done = Vec::new();
    let mut seed = 0;
    while done.len() < want {
        if let Some(o) = check_project(seed, max)? {
            done.push(o);
        }
        seed += 1;
        if seed > 50 * want as u64 {
            return Err(format!("only {} of {want} projects stayed under {max} sentences", done.len()));
        }
    }
    Ok(done)
}
