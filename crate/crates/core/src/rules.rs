//! Rule files: `TrPhrase … EndTrPhrase` blocks and `TrLex` lines.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::diagnostic::Diagnostic;
use crate::pattern::{parse_pattern, parse_template, Pattern, PatternError, Template};
use crate::sign::StreamName;
use crate::token::{LanguageTag, Token, VariableName};

/// What a rule file contributes to a project.
///
/// Every role is parsed against a canonical language: the tag whose
/// `Target/<tag>` line or `<tag>=` attribute carries the canonical version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileRole {
    /// Source-language pieces (`Source` lines plus the canonical).
    Source,
    /// Target-language pieces for one language, linked by the canonical.
    Target(LanguageTag),
    /// Source lines and target lines in the same block.
    Monolithic,
    /// Six-stream sign targets for one sign language; may carry `Source` lines.
    Sign(LanguageTag),
}

impl FileRole {
    pub fn has_sources(&self) -> bool {
        !matches!(self, FileRole::Target(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetLine {
    /// The `?` placeholder of a blank target file.
    Blank,
    Template(Template),
}

impl TargetLine {
    pub fn template(&self) -> Option<&Template> {
        match self {
            TargetLine::Blank => None,
            TargetLine::Template(t) => Some(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseFragment {
    pub category: VariableName,
    pub sources: Vec<Pattern>,
    pub targets: BTreeMap<LanguageTag, TargetLine>,
    pub span: LineSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttrValue {
    Blank,
    Tokens(Vec<Token>),
}

impl AttrValue {
    pub fn tokens(&self) -> Option<&[Token]> {
        match self {
            AttrValue::Blank => None,
            AttrValue::Tokens(t) => Some(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexFragment {
    pub category: VariableName,
    /// The `source=` pattern (source-side roles only).
    pub source: Option<Pattern>,
    pub attrs: BTreeMap<LanguageTag, AttrValue>,
    pub span: LineSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleFile {
    pub path: String,
    pub role: FileRole,
    pub canonical_language: LanguageTag,
    pub units: Vec<PhraseFragment>,
    pub lexemes: Vec<LexFragment>,
}

impl RuleFile {
    pub fn new(path: &str, role: FileRole, canonical_language: LanguageTag) -> Self {
        RuleFile {
            path: path.to_string(),
            role,
            canonical_language,
            units: Vec::new(),
            lexemes: Vec::new(),
        }
    }

    /// Equality ignoring line spans.
    pub fn same_structure(&self, other: &RuleFile) -> bool {
        self.without_spans() == other.without_spans()
    }

    fn without_spans(&self) -> RuleFile {
        let mut f = self.clone();
        f.units.iter_mut().for_each(|u| u.span = LineSpan::default());
        f.lexemes.iter_mut().for_each(|l| l.span = LineSpan::default());
        f
    }
}

struct OpenBlock {
    category: VariableName,
    sources: Vec<Pattern>,
    targets: BTreeMap<LanguageTag, TargetLine>,
    start: usize,
    ok: bool,
}

struct FileParser<'a> {
    path: &'a str,
    role: FileRole,
    canonical: LanguageTag,
    diags: Vec<Diagnostic>,
    file: RuleFile,
}

impl<'a> FileParser<'a> {
    fn error(&mut self, code: &'static str, message: impl Into<String>, line: usize) {
        self.diags
            .push(Diagnostic::error(code, message, self.path, Some(line)));
    }

    fn pattern_error(&mut self, err: &PatternError, what: &str, line: usize) {
        self.error(err.code(), format!("{what}: {err}"), line);
    }

    fn warn_punctuation(&mut self, pattern: &Pattern, line: usize) {
        let bad: Vec<String> = pattern
            .literals()
            .into_iter()
            .filter(|t| t.has_edge_punctuation())
            .map(|t| t.display().to_string())
            .collect();
        for t in bad {
            self.diags.push(Diagnostic::warning(
                "PunctuatedToken",
                format!("token {t:?} carries edge punctuation and cannot match spoken input"),
                self.path,
                Some(line),
            ));
        }
    }

    fn category(&mut self, rest: &str, line: usize) -> Option<(VariableName, String)> {
        let rest = rest.trim_start();
        let (word, tail) = match rest.find(char::is_whitespace) {
            Some(i) => (&rest[..i], &rest[i..]),
            None => (rest, ""),
        };
        if word.is_empty() {
            self.error("MissingCategory", "directive needs a $$category", line);
            return None;
        }
        match word.strip_prefix("$$").map(VariableName::new) {
            Some(Ok(v)) => Some((v, tail.to_string())),
            _ => {
                self.error("BadVariableName", format!("bad category {word:?}"), line);
                None
            }
        }
    }

    fn close_unterminated(&mut self, block: OpenBlock) {
        self.error(
            "UnterminatedBlock",
            format!("TrPhrase {} has no EndTrPhrase", block.category),
            block.start,
        );
    }

    fn finish_block(&mut self, block: OpenBlock, end: usize) {
        if !block.ok {
            return;
        }
        match &self.role {
            FileRole::Target(_) => {
                if !block.targets.contains_key(&self.canonical) {
                    self.error(
                        "MissingCanonical",
                        format!("block has no Target/{} line", self.canonical),
                        block.start,
                    );
                    return;
                }
            }
            FileRole::Sign(_) => {
                if block.sources.is_empty() && !block.targets.contains_key(&self.canonical) {
                    self.error(
                        "MissingSource",
                        format!("block needs Source lines or a Target/{} line", self.canonical),
                        block.start,
                    );
                    return;
                }
            }
            FileRole::Source | FileRole::Monolithic => {
                if block.sources.is_empty() {
                    self.error("MissingSource", "block has no Source line", block.start);
                    return;
                }
            }
        }
        self.file.units.push(PhraseFragment {
            category: block.category,
            sources: block.sources,
            targets: block.targets,
            span: LineSpan { start: block.start, end },
        });
    }

    fn block_line(&mut self, block: &mut OpenBlock, directive: &str, rest: &str, line: usize) {
        if directive == "Source" {
            if !self.role.has_sources() {
                self.error("SourceInTargetFile", "Source line in a target-language file", line);
                block.ok = false;
                return;
            }
            match parse_pattern(rest) {
                Ok(p) => {
                    self.warn_punctuation(&p, line);
                    block.sources.push(p);
                }
                Err(e) => {
                    self.pattern_error(&e, "Source", line);
                    block.ok = false;
                }
            }
        } else if let Some(tag) = directive.strip_prefix("Target/") {
            let Ok(tag) = LanguageTag::new(tag) else {
                self.error("BadLanguageTag", format!("bad target tag {tag:?}"), line);
                block.ok = false;
                return;
            };
            let text = rest.trim();
            let target = if text == "?" {
                TargetLine::Blank
            } else {
                match parse_template(text) {
                    Ok(t) => TargetLine::Template(t),
                    Err(e) => {
                        self.pattern_error(&e, directive, line);
                        block.ok = false;
                        return;
                    }
                }
            };
            if tag == self.canonical {
                if let TargetLine::Template(t) = &target {
                    self.warn_punctuation(&t.to_pattern(), line);
                }
            }
            if block.targets.insert(tag.clone(), target).is_some() {
                self.error("DuplicateTarget", format!("second Target/{tag} line in block"), line);
                block.ok = false;
            }
        } else {
            self.error("UnknownDirective", format!("unknown directive {directive:?} in TrPhrase block"), line);
            block.ok = false;
        }
    }

    fn lex_line(&mut self, rest: &str, line: usize) {
        let Some((category, tail)) = self.category(rest, line) else {
            return;
        };
        let attrs = match parse_attributes(&tail) {
            Ok(a) => a,
            Err(AttrError::Duplicate(k)) => {
                self.error("DuplicateAttributeKey", format!("attribute {k:?} given twice"), line);
                return;
            }
            Err(AttrError::Syntax(m)) => {
                self.error("AttributeSyntax", m, line);
                return;
            }
        };
        let mut source = None;
        let mut values = BTreeMap::new();
        for (key, value) in attrs {
            let value = value.trim();
            if value.is_empty() {
                self.error("EmptyAttribute", format!("attribute {key:?} is empty"), line);
                return;
            }
            let tag = if key == "source" {
                if self.role.has_sources() {
                    match parse_pattern(value) {
                        Ok(p) if !p.variables().is_empty() => {
                            self.error(
                                "VariableInLexeme",
                                "TrLex source patterns cannot contain variables",
                                line,
                            );
                            return;
                        }
                        Ok(p) => {
                            self.warn_punctuation(&p, line);
                            source = Some(p);
                        }
                        Err(e) => {
                            self.pattern_error(&e, "source", line);
                            return;
                        }
                    }
                    continue;
                }
                // target files use `source=` as a spelling of the canonical key
                self.canonical.clone()
            } else {
                match LanguageTag::new(key) {
                    Ok(t) => t,
                    Err(_) => {
                        self.error("BadLanguageTag", format!("bad attribute key {key:?}"), line);
                        return;
                    }
                }
            };
            let v = if value == "?" {
                AttrValue::Blank
            } else {
                AttrValue::Tokens(
                    value
                        .split_whitespace()
                        .map(|w| Token::new(w).expect("split on whitespace"))
                        .collect(),
                )
            };
            if values.insert(tag.clone(), v).is_some() {
                self.error(
                    "DuplicateAttributeKey",
                    format!("attribute for {tag} given twice"),
                    line,
                );
                return;
            }
        }
        let has_canonical = values.contains_key(&self.canonical);
        match &self.role {
            FileRole::Target(_) if !has_canonical => {
                self.error(
                    "MissingCanonical",
                    format!("TrLex needs a {}= attribute", self.canonical),
                    line,
                );
                return;
            }
            FileRole::Source | FileRole::Monolithic if source.is_none() => {
                self.error("MissingSource", "TrLex needs a source= attribute", line);
                return;
            }
            FileRole::Sign(_) if source.is_none() && !has_canonical => {
                self.error(
                    "MissingSource",
                    format!("TrLex needs source= or {}=", self.canonical),
                    line,
                );
                return;
            }
            _ => {}
        }
        self.file.lexemes.push(LexFragment {
            category,
            source,
            attrs: values,
            span: LineSpan { start: line, end: line },
        });
    }
}

enum AttrError {
    Duplicate(String),
    Syntax(String),
}

/// `key="value" key="value"`; values may not contain `"`.
fn parse_attributes(text: &str) -> Result<Vec<(&str, &str)>, AttrError> {
    let mut out: Vec<(&str, &str)> = Vec::new();
    let mut rest = text.trim_start();
    while !rest.is_empty() {
        let eq = rest
            .find('=')
            .ok_or_else(|| AttrError::Syntax(format!("expected key=\"value\" at {rest:?}")))?;
        let key = &rest[..eq];
        if key.is_empty() || key.chars().any(|c| c.is_whitespace() || c == '"') {
            return Err(AttrError::Syntax(format!("bad attribute key {key:?}")));
        }
        let after = rest[eq + 1..]
            .strip_prefix('"')
            .ok_or_else(|| AttrError::Syntax(format!("value of {key:?} must be quoted")))?;
        let close = after
            .find('"')
            .ok_or_else(|| AttrError::Syntax(format!("unterminated value for {key:?}")))?;
        if out.iter().any(|(k, _)| *k == key) {
            return Err(AttrError::Duplicate(key.to_string()));
        }
        out.push((key, &after[..close]));
        let tail = &after[close + 1..];
        if !tail.is_empty() && !tail.starts_with(char::is_whitespace) {
            return Err(AttrError::Syntax(format!("missing space after value of {key:?}")));
        }
        rest = tail.trim_start();
    }
    Ok(out)
}

/// Parse a rule file. Fragments with errors are dropped and reported.
pub fn parse_rule_file(
    text: &str,
    path: &str,
    role: FileRole,
    canonical_language: &LanguageTag,
) -> (RuleFile, Vec<Diagnostic>) {
    let mut p = FileParser {
        path,
        role: role.clone(),
        canonical: canonical_language.clone(),
        diags: Vec::new(),
        file: RuleFile::new(path, role, canonical_language.clone()),
    };
    let mut open: Option<OpenBlock> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (directive, rest) = match line.find(char::is_whitespace) {
            Some(i) => (&line[..i], &line[i..]),
            None => (line, ""),
        };
        match directive {
            "TrPhrase" => {
                if let Some(b) = open.take() {
                    p.close_unterminated(b);
                }
                open = p.category(rest, line_no).map(|(category, tail)| {
                    if !tail.trim().is_empty() {
                        p.diags.push(Diagnostic::warning(
                            "TrailingText",
                            format!("ignored text after category: {:?}", tail.trim()),
                            path,
                            Some(line_no),
                        ));
                    }
                    OpenBlock {
                        category,
                        sources: Vec::new(),
                        targets: BTreeMap::new(),
                        start: line_no,
                        ok: true,
                    }
                });
            }
            "EndTrPhrase" => match open.take() {
                Some(b) => p.finish_block(b, line_no),
                None => p.error("UnexpectedEnd", "EndTrPhrase without TrPhrase", line_no),
            },
            "TrLex" => {
                if let Some(b) = open.take() {
                    p.close_unterminated(b);
                }
                p.lex_line(rest, line_no);
            }
            _ => match open.as_mut() {
                Some(block) => p.block_line(block, directive, rest, line_no),
                None if directive == "Source" || directive.starts_with("Target/") => {
                    p.error("DirectiveOutsideBlock", format!("{directive} outside TrPhrase block"), line_no)
                }
                None => p.error("UnknownDirective", format!("unknown directive {directive:?}"), line_no),
            },
        }
    }
    if let Some(b) = open.take() {
        p.close_unterminated(b);
    }
    (p.file, p.diags)
}

/// Order of `Target/` lines and attributes: canonical, sign streams, then the rest alphabetically.
fn ordered_tags<'a, V>(map: &'a BTreeMap<LanguageTag, V>, canonical: &LanguageTag) -> Vec<(&'a LanguageTag, &'a V)> {
    let rank = |t: &LanguageTag| -> (u8, usize) {
        if t == canonical {
            (0, 0)
        } else if let Some(s) = StreamName::parse(t.as_str()) {
            (1, s.index())
        } else {
            (2, 0)
        }
    };
    let mut items: Vec<_> = map.iter().collect();
    // stable sort keeps alphabetical order within a rank
    items.sort_by_key(|(t, _)| rank(t));
    items
}

fn write_unit(out: &mut String, unit: &PhraseFragment, canonical: &LanguageTag) {
    out.push_str(&format!("TrPhrase {}\n", unit.category));
    for s in &unit.sources {
        out.push_str(&format!("Source {s}\n"));
    }
    for (tag, target) in ordered_tags(&unit.targets, canonical) {
        match target {
            TargetLine::Blank => out.push_str(&format!("Target/{tag} ?\n")),
            TargetLine::Template(t) => out.push_str(&format!("Target/{tag} {t}\n")),
        }
    }
    out.push_str("EndTrPhrase\n");
}

fn write_lexeme(out: &mut String, lex: &LexFragment, canonical: &LanguageTag) {
    out.push_str(&format!("TrLex {}", lex.category));
    if let Some(src) = &lex.source {
        out.push_str(&format!(" source=\"{src}\""));
    }
    for (tag, value) in ordered_tags(&lex.attrs, canonical) {
        match value {
            AttrValue::Blank => out.push_str(&format!(" {tag}=\"?\"")),
            AttrValue::Tokens(tokens) => {
                out.push_str(&format!(" {tag}=\"{}\"", crate::token::join_display(tokens)))
            }
        }
    }
    out.push('\n');
}

/// Canonical formatting. Unit blocks come first, separated by blank lines,
/// followed by the `TrLex` lines.
pub fn serialize_rule_file(file: &RuleFile) -> String {
    serialize_marked(file, |_| false, |_| false)
}

pub(crate) const ORPHAN_MARKER: &str = "# ORPHAN";

/// Serialize, prefixing fragments selected by the predicates with `# ORPHAN`.
pub(crate) fn serialize_marked(
    file: &RuleFile,
    orphan_unit: impl Fn(&PhraseFragment) -> bool,
    orphan_lex: impl Fn(&LexFragment) -> bool,
) -> String {
    let mut chunks: Vec<String> = Vec::new();
    for unit in &file.units {
        let mut s = String::new();
        if orphan_unit(unit) {
            s.push_str(ORPHAN_MARKER);
            s.push('\n');
        }
        write_unit(&mut s, unit, &file.canonical_language);
        chunks.push(s);
    }
    if !file.lexemes.is_empty() {
        let mut s = String::new();
        for lex in &file.lexemes {
            if orphan_lex(lex) {
                s.push_str(ORPHAN_MARKER);
                s.push('\n');
            }
            write_lexeme(&mut s, lex, &file.canonical_language);
        }
        chunks.push(s);
    }
    if chunks.is_empty() {
        return String::from("\n");
    }
    chunks.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostic::has_errors;

    pub(crate) const CAFE_ENGLISH: &str = "\
TrPhrase $$top
Source i ( want | would like ) $$food-or-drink ?please
Source ( could | can ) i have  $$food-or-drink ?please
Target/english i want $$food-or-drink please
EndTrPhrase

TrLex $$food-or-drink source=\"a (coca-cola | coke)\" english=\"a coke\"
";

    const CAFE_FRENCH: &str = "\
TrPhrase $$top
Target/english i want $$food-or-drink please
Target/french je voudrais $$food-or-drink s'il vous plaît
EndTrPhrase

TrLex $$food-or-drink english=\"a coke\" french=\"un coca\"
";

    fn english() -> LanguageTag {
        LanguageTag::new("english").unwrap()
    }

    fn french() -> LanguageTag {
        LanguageTag::new("french").unwrap()
    }

    #[test]
    fn source_file() {
        let (f, d) = parse_rule_file(CAFE_ENGLISH, "cafe.english", FileRole::Source, &english());
        assert!(d.is_empty(), "{d:?}");
        assert_eq!(f.units.len(), 1);
        assert_eq!(f.units[0].sources.len(), 2);
        assert_eq!(f.units[0].span, LineSpan { start: 1, end: 5 });
        assert_eq!(f.lexemes.len(), 1);
        assert!(f.lexemes[0].source.is_some());
        assert_eq!(f.lexemes[0].span.start, 7);
    }

    #[test]
    fn empty_file() {
        let (f, d) = parse_rule_file("", "x", FileRole::Source, &english());
        assert!(d.is_empty());
        assert!(f.units.is_empty() && f.lexemes.is_empty());
        assert_eq!(serialize_rule_file(&f), "\n");
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# header\n\n  # indented\nTrLex $$x source=\"a\" english=\"a\"\n";
        let (f, d) = parse_rule_file(text, "x", FileRole::Source, &english());
        assert!(d.is_empty());
        assert_eq!(f.lexemes.len(), 1);
    }

    #[test]
    fn unterminated_block() {
        let text = "\n# c\nTrPhrase $$top\nSource hello\n";
        let (f, d) = parse_rule_file(text, "x", FileRole::Source, &english());
        assert!(f.units.is_empty());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "UnterminatedBlock");
        assert_eq!(d[0].line, Some(3));
    }

    #[test]
    fn directive_errors() {
        let cases = [
            ("Frobnicate x\n", "UnknownDirective"),
            ("TrPhrase\nSource a\nEndTrPhrase\n", "MissingCategory"),
            ("TrLex\n", "MissingCategory"),
            ("TrLex $$x source=\"a\" source=\"b\"\n", "DuplicateAttributeKey"),
            ("TrLex $$x source=\"a\" english=\"a\" english=\"b\"\n", "DuplicateAttributeKey"),
            ("TrPhrase $$top\nSource (a | )\nEndTrPhrase\n", "EmptyAlternative"),
            ("TrPhrase $$top\nBogus\nEndTrPhrase\n", "UnknownDirective"),
            ("Source a\n", "DirectiveOutsideBlock"),
            ("EndTrPhrase\n", "UnexpectedEnd"),
            ("TrLex $$x source=\"a $$y\"\n", "VariableInLexeme"),
            ("TrLex $$x english=\"a\"\n", "MissingSource"),
            ("TrLex $$x source=a\n", "AttributeSyntax"),
            ("TrPhrase $$top\nTarget/english a\nEndTrPhrase\n", "MissingSource"),
            ("TrPhrase $$top\nSource a\nTarget/french x\nTarget/french y\nEndTrPhrase\n", "DuplicateTarget"),
        ];
        for (text, code) in cases {
            let (_, d) = parse_rule_file(text, "x", FileRole::Source, &english());
            assert!(d.iter().any(|d| d.code == code), "{text:?}: {d:?}");
            assert!(has_errors(&d));
        }
    }

    #[test]
    fn target_file_roles() {
        let (f, d) = parse_rule_file(CAFE_FRENCH, "cafe.french", FileRole::Target(french()), &english());
        assert!(d.is_empty(), "{d:?}");
        assert_eq!(f.units[0].targets.len(), 2);
        assert!(f.lexemes[0].source.is_none());

        let (_, d) = parse_rule_file(
            "TrPhrase $$top\nSource a\nTarget/english a\nEndTrPhrase\n",
            "x",
            FileRole::Target(french()),
            &english(),
        );
        assert_eq!(d[0].code, "SourceInTargetFile");
        let (_, d) = parse_rule_file(
            "TrPhrase $$top\nTarget/french a\nEndTrPhrase\n",
            "x",
            FileRole::Target(french()),
            &english(),
        );
        assert_eq!(d[0].code, "MissingCanonical");
    }

    #[test]
    fn blank_lexeme_accepts_source_spelling() {
        let text = "TrLex $$food-or-drink source=\"a coke\" french=\"?\"\n";
        let (f, d) = parse_rule_file(text, "x", FileRole::Target(french()), &english());
        assert!(d.is_empty());
        let lex = &f.lexemes[0];
        assert_eq!(lex.attrs[&english()].tokens().unwrap().len(), 2);
        assert_eq!(lex.attrs[&french()], AttrValue::Blank);
        assert_eq!(
            serialize_rule_file(&f),
            "TrLex $$food-or-drink english=\"a coke\" french=\"?\"\n"
        );
        let both = "TrLex $$f source=\"a coke\" english=\"a coke\" french=\"?\"\n";
        let (_, d) = parse_rule_file(both, "x", FileRole::Target(french()), &english());
        assert_eq!(d[0].code, "DuplicateAttributeKey");
    }

    #[test]
    fn french_round_trip_is_fixpoint() {
        let (f, _) = parse_rule_file(CAFE_FRENCH, "f", FileRole::Target(french()), &english());
        let text = serialize_rule_file(&f);
        assert_eq!(text, CAFE_FRENCH);
        let (g, d) = parse_rule_file(&text, "f", FileRole::Target(french()), &english());
        assert!(d.is_empty());
        assert!(f.same_structure(&g));
        assert_eq!(serialize_rule_file(&g), text);
    }

    #[test]
    fn source_serialization_normalizes_spacing() {
        let (f, _) = parse_rule_file(CAFE_ENGLISH, "e", FileRole::Source, &english());
        let text = serialize_rule_file(&f);
        assert!(text.contains("Source ( could | can ) i have $$food-or-drink ?please\n"));
        assert!(text.contains("TrLex $$food-or-drink source=\"a ( coca-cola | coke )\" english=\"a coke\"\n"));
        let (g, _) = parse_rule_file(&text, "e", FileRole::Source, &english());
        assert!(f.same_structure(&g));
    }

    #[test]
    fn punctuated_tokens_warn() {
        let (_, d) = parse_rule_file(
            "TrPhrase $$top\nSource is it raining?\nEndTrPhrase\n",
            "x",
            FileRole::Source,
            &english(),
        );
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "PunctuatedToken");
        assert!(!d[0].is_error());
    }

    #[test]
    fn diagnostics_point_into_input() {
        let text = "TrPhrase $$top\nSource (\nEndTrPhrase\nTrLex $$x\nFoo\nTrPhrase $$a\n";
        let (_, d) = parse_rule_file(text, "x", FileRole::Source, &english());
        let lines = text.lines().count();
        assert!(!d.is_empty());
        for diag in d {
            let l = diag.line.unwrap();
            assert!(l >= 1 && l <= lines);
        }
    }
}
