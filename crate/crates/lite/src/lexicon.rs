//! The three sign lexicon spreadsheets and their blank-row refresh.
//!
//! | file      | header                | key                |
//! |-----------|-----------------------|--------------------|
//! | manual    | `gloss,hamnosys`      | gloss              |
//! | nonmanual | `symbol,stream,sigml` | (stream, symbol)   |
//! | mouthing  | `symbol,phonetic`     | mouthing symbol    |
//!
//! A value of `?` is a blank waiting for the sign language expert.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use lite_core::sign::{SignLexicon, StreamName, SymbolInventory, BLANK};
use lite_core::Diagnostic;
use serde::Deserialize;

use crate::manifest::{display, read, LoadError};

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconPaths {
    pub manual: Option<PathBuf>,
    pub nonmanual: Option<PathBuf>,
    pub mouthing: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexiconKind {
    Manual,
    Nonmanual,
    Mouthing,
}

impl LexiconKind {
    pub const ALL: [LexiconKind; 3] = [LexiconKind::Manual, LexiconKind::Nonmanual, LexiconKind::Mouthing];

    pub fn header(self) -> &'static str {
        match self {
            LexiconKind::Manual => "gloss,hamnosys",
            LexiconKind::Nonmanual => "symbol,stream,sigml",
            LexiconKind::Mouthing => "symbol,phonetic",
        }
    }

    fn key_width(self) -> usize {
        match self {
            LexiconKind::Nonmanual => 2,
            _ => 1,
        }
    }

    pub fn path(self, paths: &LexiconPaths) -> Option<&Path> {
        match self {
            LexiconKind::Manual => paths.manual.as_deref(),
            LexiconKind::Nonmanual => paths.nonmanual.as_deref(),
            LexiconKind::Mouthing => paths.mouthing.as_deref(),
        }
    }

    /// Keys the inventory needs, as CSV key cells.
    fn needed(self, inv: &SymbolInventory) -> Vec<Vec<String>> {
        match self {
            LexiconKind::Manual => inv.glosses.iter().map(|g| vec![g.clone()]).collect(),
            LexiconKind::Nonmanual => inv
                .nonmanual
                .iter()
                .map(|(s, v)| vec![v.clone(), s.as_str().to_string()])
                .collect(),
            LexiconKind::Mouthing => inv.mouthings.iter().map(|m| vec![m.clone()]).collect(),
        }
    }
}

/// Rows as (csv line, cells). The header row is required and skipped.
fn rows(text: &str, path: &str, kind: LexiconKind, diags: &mut Vec<Diagnostic>) -> Vec<(usize, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        match record {
            Ok(r) => {
                let line = r.position().map_or(1, |p| p.line() as usize);
                let cells: Vec<String> = r.iter().map(|c| c.trim().to_string()).collect();
                if cells.iter().all(String::is_empty) {
                    continue;
                }
                if cells.len() != kind.key_width() + 1 {
                    diags.push(Diagnostic::error(
                        "CsvSyntax",
                        format!("expected columns {}", kind.header()),
                        path,
                        Some(line),
                    ));
                    continue;
                }
                out.push((line, cells));
            }
            Err(e) => diags.push(Diagnostic::error(
                "CsvSyntax",
                e.to_string(),
                path,
                e.position().map(|p| p.line() as usize),
            )),
        }
    }
    out
}

/// Add one CSV table to a lexicon.
pub fn parse_lexicon_csv(text: &str, path: &str, kind: LexiconKind, lex: &mut SignLexicon) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, cells) in rows(text, path, kind, &mut diags) {
        let key = &cells[..kind.key_width()];
        if !seen.insert(key.to_vec()) {
            diags.push(Diagnostic::error("DuplicateLexiconKey", format!("{} listed twice", key.join(",")), path, Some(line)));
            continue;
        }
        let value = cells.last().expect("width checked").clone();
        match kind {
            LexiconKind::Manual => {
                lex.manual.insert(cells[0].clone(), value);
            }
            LexiconKind::Mouthing => {
                lex.mouthing.insert(cells[0].clone(), value);
            }
            LexiconKind::Nonmanual => match StreamName::parse(&cells[1]).filter(|s| s.is_nonmanual()) {
                Some(s) => {
                    lex.nonmanual.insert((s, cells[0].clone()), value);
                }
                None => diags.push(Diagnostic::error(
                    "CsvSyntax",
                    format!("{:?} is not a nonmanual stream", cells[1]),
                    path,
                    Some(line),
                )),
            },
        }
    }
    diags.sort_by_key(|d| d.line);
    diags
}

/// Load whichever lexicon files exist; absent files count as empty.
pub fn load_lexicon(root: &Path, paths: &LexiconPaths) -> Result<(SignLexicon, Vec<Diagnostic>), LoadError> {
    let mut lex = SignLexicon::default();
    let mut diags = Vec::new();
    for kind in LexiconKind::ALL {
        let Some(rel) = kind.path(paths) else { continue };
        let full = root.join(rel);
        if !full.exists() {
            continue;
        }
        diags.extend(parse_lexicon_csv(&read(&full)?, &display(rel), kind, &mut lex));
    }
    Ok((lex, diags))
}

/// Append a `?` row for every needed key the table lacks.
///
/// Existing text is kept byte for byte; an empty input gains the header.
/// Rows are appended in sorted key order.
pub fn refresh_lexicon_csv(existing: &str, kind: LexiconKind, inv: &SymbolInventory) -> String {
    let mut scratch = Vec::new();
    let have: BTreeSet<Vec<String>> = rows(existing, "", kind, &mut scratch)
        .into_iter()
        .map(|(_, cells)| cells[..kind.key_width()].to_vec())
        .collect();
    let missing: Vec<Vec<String>> = kind.needed(inv).into_iter().filter(|k| !have.contains(k)).collect();
    let mut out = existing.to_string();
    if out.trim().is_empty() {
        out = format!("{}\n", kind.header());
    } else if !out.ends_with('\n') {
        out.push('\n');
    }
    if missing.is_empty() {
        return if existing.trim().is_empty() { out } else { existing.to_string() };
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for key in missing {
        let mut row = key;
        row.push(BLANK.to_string());
        w.write_record(&row).expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells"));
    out
}

/// Refresh every configured table on disk; returns the files it rewrote.
pub fn refresh_lexicon_files(root: &Path, paths: &LexiconPaths, inv: &SymbolInventory) -> Result<Vec<PathBuf>, LoadError> {
    let mut written = Vec::new();
    for kind in LexiconKind::ALL {
        let Some(rel) = kind.path(paths) else { continue };
        let full = root.join(rel);
        let existing = if full.exists() { read(&full)? } else { String::new() };
        let updated = refresh_lexicon_csv(&existing, kind, inv);
        if updated != existing {
            fs::write(&full, &updated).map_err(|source| LoadError::Io { path: full.clone(), source })?;
            written.push(full);
        }
    }
    Ok(written)
}
