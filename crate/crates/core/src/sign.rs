//! Six-stream sign tables, sign target rules with slot inheritance, and
//! SiGML rendering.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::diagnostic::Diagnostic;
use crate::engine::{match_canonical, match_source, realize_canonical, BoundValue, EngineError, MatchResult};
use crate::pattern::TemplateElement;
use crate::project::{derive_canonical, AssembledProject, CanonicalKey, Origin};
use crate::rules::{AttrValue, RuleFile, TargetLine};
use crate::token::{LanguageTag, Utterance, VariableName};

/// The value that means "no nonmanual activity"; renders to nothing.
pub const NEUTRAL: &str = "Neutral";

/// Placeholder for an unfilled lexicon cell.
pub const BLANK: &str = "?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamName {
    Gloss,
    Head,
    Gaze,
    Eyebrows,
    Aperture,
    Mouthing,
}

impl StreamName {
    pub const ALL: [StreamName; 6] = [
        StreamName::Gloss,
        StreamName::Head,
        StreamName::Gaze,
        StreamName::Eyebrows,
        StreamName::Aperture,
        StreamName::Mouthing,
    ];

    pub fn parse(s: &str) -> Option<StreamName> {
        StreamName::ALL.into_iter().find(|n| n.as_str() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StreamName::Gloss => "gloss",
            StreamName::Head => "head",
            StreamName::Gaze => "gaze",
            StreamName::Eyebrows => "eyebrows",
            StreamName::Aperture => "aperture",
            StreamName::Mouthing => "mouthing",
        }
    }

    /// Streams rendered through the nonmanual lexicon.
    pub fn is_nonmanual(self) -> bool {
        !matches!(self, StreamName::Gloss | StreamName::Mouthing)
    }
}

impl fmt::Display for StreamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignSlot {
    Symbol(String),
    Var(VariableName),
}

/// Six aligned slot lists for one canonical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignTargetRule {
    pub category: VariableName,
    pub key: CanonicalKey,
    /// Indexed by [`StreamName::index`]; all the same length.
    pub streams: [Vec<SignSlot>; 6],
    pub origin: Origin,
}

impl SignTargetRule {
    pub fn width(&self) -> usize {
        self.streams[0].len()
    }

    pub fn slot(&self, stream: StreamName, column: usize) -> &SignSlot {
        &self.streams[stream.index()][column]
    }

    /// The variable of a column, if any stream has a variable there.
    pub fn column_variable(&self, column: usize) -> Option<&VariableName> {
        self.streams.iter().find_map(|s| match &s[column] {
            SignSlot::Var(v) => Some(v),
            SignSlot::Symbol(_) => None,
        })
    }

    pub fn column_variables(&self) -> impl Iterator<Item = &VariableName> {
        (0..self.width()).filter_map(|c| self.column_variable(c))
    }
}

/// Sign values of a lexeme. Streams left out are inherited from the rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignLexEntry {
    pub category: VariableName,
    pub key: CanonicalKey,
    pub streams: [Option<Vec<String>>; 6],
    pub width: usize,
    pub origin: Origin,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignRuleSet {
    pub rules: Vec<SignTargetRule>,
    pub lexemes: Vec<SignLexEntry>,
}

impl SignRuleSet {
    pub fn rule(&self, category: &VariableName, key: &CanonicalKey) -> Option<&SignTargetRule> {
        self.rules.iter().find(|r| &r.category == category && &r.key == key)
    }

    pub fn lexeme(&self, category: &VariableName, key: &CanonicalKey) -> Option<&SignLexEntry> {
        self.lexemes.iter().find(|l| &l.category == category && &l.key == key)
    }

    pub fn extend(&mut self, other: SignRuleSet) {
        self.rules.extend(other.rules);
        self.lexemes.extend(other.lexemes);
    }

    /// Every symbol a lexicon must cover.
    pub fn inventory(&self) -> SymbolInventory {
        let mut inv = SymbolInventory::default();
        let mut add = |stream: StreamName, sym: &str| {
            if sym == NEUTRAL {
                return;
            }
            match stream {
                StreamName::Gloss => inv.glosses.insert(sym.to_string()),
                StreamName::Mouthing => inv.mouthings.insert(sym.to_string()),
                s => inv.nonmanual.insert((s, sym.to_string())),
            };
        };
        for rule in &self.rules {
            for s in StreamName::ALL {
                for slot in &rule.streams[s.index()] {
                    if let SignSlot::Symbol(sym) = slot {
                        add(s, sym);
                    }
                }
            }
        }
        for lex in &self.lexemes {
            for s in StreamName::ALL {
                for sym in lex.streams[s.index()].iter().flatten() {
                    add(s, sym);
                }
            }
        }
        inv
    }
}

/// Symbols referenced by rules and lexemes, `Neutral` excluded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolInventory {
    pub glosses: BTreeSet<String>,
    pub nonmanual: BTreeSet<(StreamName, String)>,
    pub mouthings: BTreeSet<String>,
}

fn err(code: &'static str, message: String, origin: &Origin) -> Diagnostic {
    Diagnostic::error(code, message, &origin.path, Some(origin.line))
}

/// Extract sign rules and sign lexemes from a sign-role rule file.
///
/// Units are keyed by their canonical (`Target/<canonical>` or derived from
/// the first `Source` line); lexemes likewise.
pub fn sign_rules_from_file(file: &RuleFile) -> (SignRuleSet, Vec<Diagnostic>) {
    let mut set = SignRuleSet::default();
    let mut diags = Vec::new();
    let canonical = &file.canonical_language;
    for frag in &file.units {
        let origin = Origin {
            path: file.path.clone(),
            line: frag.span.start,
            end_line: frag.span.end,
        };
        let template = match frag.targets.get(canonical) {
            Some(TargetLine::Template(t)) => t.clone(),
            _ => match frag.sources.first().map(derive_canonical) {
                Some(Ok(t)) => t,
                _ => continue,
            },
        };
        let mut streams: [Vec<SignSlot>; 6] = Default::default();
        let mut ok = true;
        for s in StreamName::ALL {
            let tag = LanguageTag::new(s.as_str()).expect("stream names are valid tags");
            match frag.targets.get(&tag) {
                Some(TargetLine::Template(t)) => {
                    for el in &t.elements {
                        match el {
                            TemplateElement::Literal(tok) => {
                                streams[s.index()].push(SignSlot::Symbol(tok.display().to_string()))
                            }
                            TemplateElement::Var(v) => streams[s.index()].push(SignSlot::Var(v.clone())),
                            TemplateElement::OptionalVar(v) => {
                                diags.push(err(
                                    "OptionalSignSlot",
                                    format!("Target/{s} slot ?{v} cannot be optional; write {v}"),
                                    &origin,
                                ));
                                ok = false;
                            }
                        }
                    }
                }
                _ => {
                    diags.push(err("MissingStream", format!("no Target/{s} line"), &origin));
                    ok = false;
                }
            }
        }
        if !ok {
            continue;
        }
        let width = streams[0].len();
        if let Some(s) = StreamName::ALL.into_iter().find(|s| streams[s.index()].len() != width) {
            diags.push(err(
                "StreamLengthMismatch",
                format!("gloss has {width} columns but {s} has {}", streams[s.index()].len()),
                &origin,
            ));
            continue;
        }
        let mut consistent = true;
        for c in 0..width {
            let vars: BTreeSet<&VariableName> = streams
                .iter()
                .filter_map(|st| match &st[c] {
                    SignSlot::Var(v) => Some(v),
                    _ => None,
                })
                .collect();
            if vars.len() > 1 {
                let names: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
                diags.push(err(
                    "InconsistentVarColumn",
                    format!("column {} mixes {}", c + 1, names.join(" and ")),
                    &origin,
                ));
                consistent = false;
            }
        }
        let mut seen = BTreeSet::new();
        for c in 0..width {
            let v = streams.iter().find_map(|st| match &st[c] {
                SignSlot::Var(v) => Some(v),
                _ => None,
            });
            if let Some(v) = v {
                if !seen.insert(v.clone()) {
                    diags.push(err(
                        "InconsistentVarColumn",
                        format!("{v} occupies more than one column"),
                        &origin,
                    ));
                    consistent = false;
                }
            }
        }
        if !consistent {
            continue;
        }
        set.rules.push(SignTargetRule {
            category: frag.category.clone(),
            key: CanonicalKey::of_template(&template),
            streams,
            origin,
        });
    }
    for frag in &file.lexemes {
        let origin = Origin {
            path: file.path.clone(),
            line: frag.span.start,
            end_line: frag.span.end,
        };
        let key = match (frag.attrs.get(canonical), &frag.source) {
            (Some(AttrValue::Tokens(t)), _) => CanonicalKey::of_tokens(t),
            (_, Some(src)) => match derive_canonical(src) {
                Ok(t) => CanonicalKey::of_template(&t),
                Err(_) => continue,
            },
            _ => continue,
        };
        let mut streams: [Option<Vec<String>>; 6] = Default::default();
        for s in StreamName::ALL {
            let tag = LanguageTag::new(s.as_str()).expect("stream names are valid tags");
            if let Some(AttrValue::Tokens(t)) = frag.attrs.get(&tag) {
                streams[s.index()] = Some(t.iter().map(|t| t.display().to_string()).collect());
            }
        }
        let Some(width) = streams[0].as_ref().map(Vec::len) else {
            diags.push(err("MissingStream", "sign lexeme has no gloss= attribute".into(), &origin));
            continue;
        };
        let bad = StreamName::ALL
            .into_iter()
            .find(|s| streams[s.index()].as_ref().is_some_and(|v| v.len() != width));
        if let Some(s) = bad {
            diags.push(err(
                "StreamLengthMismatch",
                format!("gloss has {width} symbols but {s} has {}", streams[s.index()].as_ref().unwrap().len()),
                &origin,
            ));
            continue;
        }
        set.lexemes.push(SignLexEntry {
            category: frag.category.clone(),
            key,
            streams,
            width,
            origin,
        });
    }
    (set, diags)
}

/// Six equal-length symbol lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignTable {
    streams: [Vec<String>; 6],
}

impl SignTable {
    pub fn from_streams(streams: [Vec<String>; 6]) -> Result<SignTable, SignError> {
        let width = streams[0].len();
        if let Some(s) = StreamName::ALL.into_iter().find(|s| streams[s.index()].len() != width) {
            return Err(SignError::StreamLengthMismatch(s));
        }
        Ok(SignTable { streams })
    }

    pub fn width(&self) -> usize {
        self.streams[0].len()
    }

    pub fn stream(&self, s: StreamName) -> &[String] {
        &self.streams[s.index()]
    }

    /// Values of all six streams at one column.
    pub fn column(&self, c: usize) -> [&str; 6] {
        StreamName::ALL.map(|s| self.streams[s.index()][c].as_str())
    }

    fn push_column(&mut self, values: [String; 6]) {
        for (s, v) in self.streams.iter_mut().zip(values) {
            s.push(v);
        }
    }
}

impl Serialize for SignTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(6))?;
        for s in StreamName::ALL {
            map.serialize_entry(s.as_str(), &self.streams[s.index()])?;
        }
        map.end()
    }
}

/// Aligned text table, one stream per row.
impl fmt::Display for SignTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let widths: Vec<usize> = (0..self.width())
            .map(|c| self.column(c).iter().map(|v| v.chars().count()).max().unwrap_or(0))
            .collect();
        for s in StreamName::ALL {
            let mut line = format!("{:<10}", s.as_str());
            for (c, v) in self.streams[s.index()].iter().enumerate() {
                line.push_str(&format!(" {:<w$}", v, w = widths[c]));
            }
            writeln!(f, "{}", line.trim_end())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("no {lang} sign rule for {key:?}")]
    MissingSignTarget { lang: LanguageTag, key: String },
    #[error("{stream} slot of {var} is not supplied by the bound value")]
    UnfilledSlot { var: VariableName, stream: StreamName },
    #[error("stream {0} has a different length from gloss")]
    StreamLengthMismatch(StreamName),
    #[error("no lexicon entry for {0:?}")]
    MissingLexiconEntry(String),
}

impl SignError {
    pub fn code(&self) -> &'static str {
        match self {
            SignError::Engine(e) => e.code(),
            SignError::MissingSignTarget { .. } => "MissingSignTarget",
            SignError::UnfilledSlot { .. } => "UnfilledSlot",
            SignError::StreamLengthMismatch(_) => "StreamLengthMismatch",
            SignError::MissingLexiconEntry(_) => "MissingLexiconEntry",
        }
    }
}

fn build_table(set: &SignRuleSet, lang: &LanguageTag, m: &MatchResult<'_>) -> Result<SignTable, SignError> {
    let missing = |key: &CanonicalKey| SignError::MissingSignTarget {
        lang: lang.clone(),
        key: key.as_str().to_string(),
    };
    let rule = set.rule(&m.unit.category, &m.unit.key).ok_or_else(|| missing(&m.unit.key))?;
    let mut table = SignTable::default();
    for c in 0..rule.width() {
        let Some(v) = rule.column_variable(c) else {
            table.push_column(StreamName::ALL.map(|s| match rule.slot(s, c) {
                SignSlot::Symbol(x) => x.clone(),
                SignSlot::Var(_) => unreachable!("column has no variable"),
            }));
            continue;
        };
        let Some(binding) = m.binding(v) else {
            continue;
        };
        // Values supplied by the bound value, per stream; `None` means inherit.
        let (width, supplied): (usize, [Option<Vec<String>>; 6]) = match &binding.value {
            BoundValue::Lexeme(l) => {
                let entry = set.lexeme(&l.category, &l.key).ok_or_else(|| missing(&l.key))?;
                (entry.width, entry.streams.clone())
            }
            BoundValue::Phrase(inner) => {
                let sub = build_table(set, lang, inner)?;
                (sub.width(), sub.streams.map(Some))
            }
        };
        for s in StreamName::ALL {
            let values = match (&supplied[s.index()], rule.slot(s, c)) {
                (Some(vals), _) => vals.clone(),
                (None, SignSlot::Symbol(x)) => alloc::vec![x.clone(); width],
                (None, SignSlot::Var(v)) => {
                    return Err(SignError::UnfilledSlot { var: v.clone(), stream: s })
                }
            };
            table.streams[s.index()].extend(values);
        }
    }
    Ok(table)
}

/// Translate an utterance into a sign table: stage-1 match, canonical
/// realization, stage-2 parse, then the sign rules of the stage-2 tree.
pub fn sign_translate(project: &AssembledProject, lang: &LanguageTag, utt: &Utterance) -> Result<SignTable, SignError> {
    let set = project.sign_rules(lang).ok_or_else(|| SignError::MissingSignTarget {
        lang: lang.clone(),
        key: String::new(),
    })?;
    let matches = match_source(project, utt)?;
    let canonical = realize_canonical(&matches[0])?;
    let m = match_canonical(project, &canonical)?;
    let table = build_table(set, lang, &m)?;
    debug_assert!(StreamName::ALL.iter().all(|s| table.stream(*s).len() == table.width()));
    Ok(table)
}

/// Lexicon tables mapping sign-table symbols to SiGML content.
///
/// Values equal to [`BLANK`] count as missing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignLexicon {
    /// gloss → HamNoSys string
    pub manual: BTreeMap<String, String>,
    /// (stream, symbol) → SiGML nonmanual tag value
    pub nonmanual: BTreeMap<(StreamName, String), String>,
    /// mouthing symbol → phonetic string
    pub mouthing: BTreeMap<String, String>,
}

fn filled(v: Option<&String>) -> Option<&str> {
    v.map(String::as_str).filter(|v| *v != BLANK)
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn nonmanual_element(s: StreamName) -> &'static str {
    match s {
        StreamName::Head => "hnm_head",
        StreamName::Gaze => "hnm_eyegaze",
        StreamName::Eyebrows => "hnm_eyebrows",
        StreamName::Aperture => "hnm_eyelids",
        StreamName::Gloss | StreamName::Mouthing => unreachable!("manual stream"),
    }
}

/// Render a sign table as a SiGML document, one `hns_sign` per column.
pub fn render_sigml(table: &SignTable, lex: &SignLexicon) -> Result<String, SignError> {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<sigml>\n");
    for c in 0..table.width() {
        let [gloss, .., mouthing] = table.column(c);
        let manual = filled(lex.manual.get(gloss))
            .ok_or_else(|| SignError::MissingLexiconEntry(gloss.to_string()))?;
        let mut nonmanual = Vec::new();
        for s in StreamName::ALL.into_iter().filter(|s| s.is_nonmanual()) {
            let value = &table.stream(s)[c];
            if value == NEUTRAL {
                continue;
            }
            let tag = filled(lex.nonmanual.get(&(s, value.clone())))
                .ok_or_else(|| SignError::MissingLexiconEntry(format!("{s}:{value}")))?;
            nonmanual.push(format!("      <{} tag=\"{}\"/>\n", nonmanual_element(s), escape_xml(tag)));
        }
        if mouthing != NEUTRAL {
            let picture = filled(lex.mouthing.get(mouthing))
                .ok_or_else(|| SignError::MissingLexiconEntry(mouthing.to_string()))?;
            nonmanual.push(format!("      <hnm_mouthpicture picture=\"{}\"/>\n", escape_xml(picture)));
        }
        out.push_str(&format!("  <hns_sign gloss=\"{}\">\n", escape_xml(gloss)));
        if !nonmanual.is_empty() {
            out.push_str("    <hamnosys_nonmanual>\n");
            nonmanual.iter().for_each(|l| out.push_str(l));
            out.push_str("    </hamnosys_nonmanual>\n");
        }
        out.push_str(&format!("    <hamnosys_manual>{}</hamnosys_manual>\n", escape_xml(manual)));
        out.push_str("  </hns_sign>\n");
    }
    out.push_str("</sigml>\n");
    Ok(out)
}

/// Gloss row of a table, space separated.
pub fn gloss_string(table: &SignTable) -> String {
    table.stream(StreamName::Gloss).join(" ")
}
