//! Scripted interviews that between them take every routing edge.

use std::collections::{BTreeMap, VecDeque};

use lite_core::grammar::{count_language, nth_sentence};
use lite_core::questionnaire::{active_slice, replay, QuestionnaireDef, SessionInput, END};
use lite_core::AssembledProject;
use num_bigint::BigUint;

/// Shortest answer sequence from `from` to `to` (`END` allowed).
fn shortest(def: &QuestionnaireDef, from: &str, to: &str) -> Option<Vec<(String, String)>> {
    let mut prev: BTreeMap<String, (String, String)> = BTreeMap::new();
    let mut queue = VecDeque::from([from.to_string()]);
    let mut seen = vec![from.to_string()];
    while let Some(f) = queue.pop_front() {
        if f == to {
            let mut path = Vec::new();
            let mut at = f;
            while at != from {
                let (p, a) = prev[&at].clone();
                path.push((p.clone(), a));
                at = p;
            }
            path.reverse();
            return Some(path);
        }
        let Some(field) = def.field(&f) else { continue };
        for (answer, next) in &field.routing {
            if !seen.contains(next) {
                seen.push(next.clone());
                prev.insert(next.clone(), (f.clone(), answer.clone()));
                queue.push_back(next.clone());
            }
        }
    }
    None
}

/// One (field, answer) path per routing edge, each from the start to `END`.
pub fn edge_paths(def: &QuestionnaireDef) -> Vec<Vec<(String, String)>> {
    let mut out = Vec::new();
    for field in &def.fields {
        for (answer, next) in &field.routing {
            let mut path = shortest(def, &def.start_field, &field.id).expect("field reachable");
            path.push((field.id.clone(), answer.clone()));
            path.extend(shortest(def, next, END).expect("END reachable"));
            out.push(path);
        }
    }
    out
}

/// Inputs for a path; the `n`th sentence of each field's slice is asked.
pub fn inputs_for(def: &QuestionnaireDef, project: &AssembledProject, path: &[(String, String)], n: usize) -> Vec<SessionInput> {
    let mut inputs = Vec::new();
    for (i, (field, answer)) in path.iter().enumerate() {
        let g = active_slice(def, field, project).expect("slice compiles");
        let size = count_language(&g).count;
        let index = BigUint::from(n + 7 * i) % size;
        let text = nth_sentence(&g, &index).expect("index in range").join(" ");
        let f = def.field(field).unwrap();
        let times = if f.require_rephrase_once { 2 } else { 1 };
        for _ in 0..times {
            inputs.push(SessionInput::Propose { text: text.clone() });
        }
        inputs.push(SessionInput::Confirm { accept: true });
        inputs.push(SessionInput::Answer { answer_id: answer.clone() });
    }
    inputs
}

/// Run every edge path and check exports and replay; returns edges covered.
pub fn check_all_edges(def: &QuestionnaireDef, project: &AssembledProject) -> Result<usize, String> {
    let paths = edge_paths(def);
    for (k, path) in paths.iter().enumerate() {
        let inputs = inputs_for(def, project, path, k);
        let id = format!("edge{k}");
        let s = replay(def, project, "french", id.clone(), &inputs, 1_000).map_err(|e| format!("path {k}: {e}"))?;
        if !s.is_ended() {
            return Err(format!("path {k} stopped at {}", s.current_field));
        }
        let doc = s.export();
        let got: Vec<(&str, &str)> = doc.records.iter().map(|r| (r.field.as_str(), r.answer_id.as_str())).collect();
        let want: Vec<(&str, &str)> = path.iter().map(|(f, a)| (f.as_str(), a.as_str())).collect();
        if got != want {
            return Err(format!("path {k}: records {got:?}, visited {want:?}"));
        }
        if doc.records.iter().any(|r| r.translation.is_empty() || r.paraphrase.is_empty()) {
            return Err(format!("path {k}: a record lacks its translation"));
        }
        let again = replay(def, project, "french", id.clone(), &s.inputs(), 1_000).map_err(|e| e.to_string())?;
        if again != s {
            return Err(format!("path {k}: replay from the transcript differs"));
        }
    }
    Ok(paths.len())
}
