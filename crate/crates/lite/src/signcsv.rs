//! Sign rules written as a spreadsheet: one CSV row per stream.
//!
//! ```text
//! kind,category,text,stream,symbols...
//! phrase,$$top,ce train ne circule pas via $$station,gloss,TRAIN,CE,$$station,ALLER,PAS
//! lex,$$station,genčve,gloss,GENEVE
//! ```
//!
//! Consecutive rows sharing `kind`, `category` and `text` form one rule. For
//! `phrase` rows `text` is the source pattern; for `lex` rows it is the
//! lexeme's source text. Trailing empty cells are ignored.

use lite_core::{parse_rule_file, Diagnostic, FileRole, LanguageTag, RuleFile};

struct Block {
    kind: String,
    category: String,
    text: String,
    /// (csv line, stream, symbols)
    rows: Vec<(usize, String, Vec<String>)>,
}

fn syntax(message: String, path: &str, line: usize) -> Diagnostic {
    Diagnostic::error("CsvSyntax", message, path, Some(line))
}

/// Parse the CSV form into the same rule file the text form produces.
pub fn parse_sign_csv(text: &str, path: &str, lang: &LanguageTag, canonical: &LanguageTag) -> (RuleFile, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut blocks: Vec<Block> = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(1, |p| p.line() as usize);
                diags.push(syntax(e.to_string(), path, line));
                continue;
            }
        };
        let line = record.position().map_or(1, |p| p.line() as usize);
        let mut cells: Vec<&str> = record.iter().map(str::trim).collect();
        while cells.last() == Some(&"") {
            cells.pop();
        }
        if cells.is_empty() {
            continue;
        }
        if cells.len() < 5 {
            diags.push(syntax("expected kind,category,text,stream and at least one symbol".into(), path, line));
            continue;
        }
        let (kind, category, text, stream) = (cells[0], cells[1], cells[2], cells[3]);
        if kind != "phrase" && kind != "lex" {
            diags.push(syntax(format!("unknown row kind {kind:?}"), path, line));
            continue;
        }
        if kind == "lex" && (text.contains('"') || cells[4..].iter().any(|c| c.contains('"'))) {
            diags.push(syntax("lexeme cells cannot contain '\"'".into(), path, line));
            continue;
        }
        let row = (line, stream.to_string(), cells[4..].iter().map(|c| c.to_string()).collect());
        match blocks.last_mut() {
            Some(b) if b.kind == kind && b.category == category && b.text == text => b.rows.push(row),
            _ => blocks.push(Block {
                kind: kind.into(),
                category: category.into(),
                text: text.into(),
                rows: vec![row],
            }),
        }
    }

    // Rule-file text plus, per generated line, the CSV line it came from.
    let mut out = String::new();
    let mut lines: Vec<usize> = Vec::new();
    let mut emit = |out: &mut String, s: String, csv_line: usize| {
        out.push_str(&s);
        out.push('\n');
        lines.push(csv_line);
    };
    for b in &blocks {
        let first = b.rows[0].0;
        if b.kind == "phrase" {
            emit(&mut out, format!("TrPhrase {}", b.category), first);
            emit(&mut out, format!("Source {}", b.text), first);
            for (line, stream, symbols) in &b.rows {
                emit(&mut out, format!("Target/{stream} {}", symbols.join(" ")), *line);
            }
            emit(&mut out, "EndTrPhrase".into(), first);
        } else {
            let attrs: Vec<String> = b
                .rows
                .iter()
                .map(|(_, stream, symbols)| format!("{stream}=\"{}\"", symbols.join(" ")))
                .collect();
            emit(&mut out, format!("TrLex {} source=\"{}\" {}", b.category, b.text, attrs.join(" ")), first);
        }
    }
    let (mut file, file_diags) = parse_rule_file(&out, path, FileRole::Sign(lang.clone()), canonical);
    let remap = |l: usize| lines.get(l.wrapping_sub(1)).copied().unwrap_or(l);
    for mut d in file_diags {
        d.line = d.line.map(remap);
        diags.push(d);
    }
    for u in &mut file.units {
        u.span.start = remap(u.span.start);
        u.span.end = remap(u.span.end);
    }
    for l in &mut file.lexemes {
        l.span.start = remap(l.span.start);
        l.span.end = remap(l.span.end);
    }
    (file, diags)
}
