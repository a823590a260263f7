//! Merging source-side and target-side rule files into one validated project.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::diagnostic::{has_errors, Diagnostic};
use crate::pattern::{Pattern, PatternElement, PatternError, Template};
use crate::rules::{AttrValue, FileRole, LexFragment, PhraseFragment, RuleFile, TargetLine};
use crate::sign::{sign_rules_from_file, SignRuleSet, StreamName};
use crate::token::{join_display, LanguageTag, Token, VariableName};

/// Normalized serialization of a canonical template; the link between
/// source-side and target-side pieces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct CanonicalKey(String);

impl CanonicalKey {
    pub fn of_template(t: &Template) -> Self {
        CanonicalKey(t.key_string())
    }

    pub fn of_tokens(tokens: &[Token]) -> Self {
        let norms: Vec<&str> = tokens.iter().map(Token::norm).collect();
        CanonicalKey(norms.join(" "))
    }

    /// Normalize free text (whitespace and case) into a key.
    pub fn normalize(text: &str) -> Self {
        let words: Vec<String> = text
            .split_whitespace()
            .map(|w| {
                if w.starts_with("$$") || w.starts_with("?$$") {
                    w.to_string()
                } else {
                    w.nfc().collect::<String>().to_lowercase()
                }
            })
            .collect();
        CanonicalKey(words.join(" "))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<String> for CanonicalKey {
    fn from(value: String) -> Self {
        CanonicalKey::normalize(&value)
    }
}

impl From<CanonicalKey> for String {
    fn from(value: CanonicalKey) -> Self {
        value.0
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Languages a project is built for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectManifest {
    pub id: String,
    pub source_language: LanguageTag,
    /// BCP 47 tag for recogniser artifacts, e.g. `en-US`.
    pub source_locale: Option<String>,
    pub target_languages: Vec<LanguageTag>,
    pub sign_languages: Vec<LanguageTag>,
}

impl ProjectManifest {
    pub fn new(id: &str, source: &str, targets: &[&str]) -> Self {
        ProjectManifest {
            id: id.to_string(),
            source_language: LanguageTag::new(source).expect("valid tag"),
            source_locale: None,
            target_languages: targets
                .iter()
                .map(|t| LanguageTag::new(t).expect("valid tag"))
                .collect(),
            sign_languages: Vec::new(),
        }
    }

    pub fn with_sign_language(mut self, tag: &str) -> Self {
        self.sign_languages.push(LanguageTag::new(tag).expect("valid tag"));
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Origin {
    pub path: String,
    pub line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrPhraseUnit {
    pub category: VariableName,
    pub source_lines: Vec<Pattern>,
    pub canonical: Template,
    pub key: CanonicalKey,
    pub targets: BTreeMap<LanguageTag, Template>,
    /// Where each target was written; target files differ from `origin`.
    pub target_origins: BTreeMap<LanguageTag, Origin>,
    pub origin: Origin,
    pub declaration_index: usize,
    /// Canonical derived from the first `Source` line rather than written.
    pub derived_canonical: bool,
    pub(crate) canonical_pattern: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrLexEntry {
    pub category: VariableName,
    pub source_pattern: Pattern,
    pub canonical: Vec<Token>,
    pub key: CanonicalKey,
    pub targets: BTreeMap<LanguageTag, Vec<Token>>,
    pub origin: Origin,
    pub declaration_index: usize,
    pub(crate) canonical_pattern: Pattern,
}

/// A validated, indexed project. Immutable once built.
#[derive(Debug, Clone)]
pub struct AssembledProject {
    manifest: ProjectManifest,
    units: BTreeMap<VariableName, Vec<TrPhraseUnit>>,
    lexemes: BTreeMap<VariableName, Vec<TrLexEntry>>,
    variable_graph: BTreeMap<VariableName, BTreeSet<VariableName>>,
    sign_rules: BTreeMap<LanguageTag, SignRuleSet>,
}

impl AssembledProject {
    pub fn manifest(&self) -> &ProjectManifest {
        &self.manifest
    }

    pub fn source_language(&self) -> &LanguageTag {
        &self.manifest.source_language
    }

    pub fn target_languages(&self) -> &[LanguageTag] {
        &self.manifest.target_languages
    }

    pub fn units(&self, category: &VariableName) -> &[TrPhraseUnit] {
        self.units.get(category).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn lexemes(&self, category: &VariableName) -> &[TrLexEntry] {
        self.lexemes.get(category).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn top_units(&self) -> &[TrPhraseUnit] {
        self.units(&VariableName::top())
    }

    /// Every category with at least one unit or lexeme.
    pub fn categories(&self) -> BTreeSet<&VariableName> {
        self.units.keys().chain(self.lexemes.keys()).collect()
    }

    /// All units in declaration order.
    pub fn all_units(&self) -> Vec<&TrPhraseUnit> {
        let mut all: Vec<_> = self.units.values().flatten().collect();
        all.sort_by_key(|u| u.declaration_index);
        all
    }

    /// All lexemes in declaration order.
    pub fn all_lexemes(&self) -> Vec<&TrLexEntry> {
        let mut all: Vec<_> = self.lexemes.values().flatten().collect();
        all.sort_by_key(|l| l.declaration_index);
        all
    }

    pub fn variable_graph(&self) -> &BTreeMap<VariableName, BTreeSet<VariableName>> {
        &self.variable_graph
    }

    pub fn sign_rules(&self, lang: &LanguageTag) -> Option<&SignRuleSet> {
        self.sign_rules.get(lang)
    }

    pub fn find_unit(&self, category: &VariableName, key: &CanonicalKey) -> Option<&TrPhraseUnit> {
        self.units(category).iter().find(|u| &u.key == key)
    }

    pub fn find_lexeme(&self, category: &VariableName, key: &CanonicalKey) -> Option<&TrLexEntry> {
        self.lexemes(category).iter().find(|l| &l.key == key)
    }

    /// `(category, key, language) → target` for every filled target.
    pub fn target_index(&self) -> BTreeMap<(VariableName, CanonicalKey, LanguageTag), String> {
        let mut index = BTreeMap::new();
        for u in self.units.values().flatten() {
            for (lang, t) in &u.targets {
                index.insert((u.category.clone(), u.key.clone(), lang.clone()), t.to_string());
            }
        }
        for l in self.lexemes.values().flatten() {
            for (lang, t) in &l.targets {
                index.insert((l.category.clone(), l.key.clone(), lang.clone()), join_display(t));
            }
        }
        index
    }

    /// Categories reachable from `$$top` through the variable graph.
    pub fn reachable_categories(&self) -> BTreeSet<VariableName> {
        let mut seen = BTreeSet::new();
        let mut todo = alloc::vec![VariableName::top()];
        while let Some(c) = todo.pop() {
            if seen.insert(c.clone()) {
                if let Some(next) = self.variable_graph.get(&c) {
                    todo.extend(next.iter().cloned());
                }
            }
        }
        seen
    }
}

/// Result of [`assemble`]. `project` is `None` when a fatal error prevented
/// building the indexes; validation errors leave it populated.
#[derive(Debug)]
pub struct Assembly {
    pub project: Option<AssembledProject>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Assembly {
    pub fn has_errors(&self) -> bool {
        has_errors(&self.diagnostics)
    }

    /// The project if assembly produced no errors at all.
    pub fn into_result(self) -> Result<(AssembledProject, Vec<Diagnostic>), Vec<Diagnostic>> {
        match self.project {
            Some(p) if !has_errors(&self.diagnostics) => Ok((p, self.diagnostics)),
            _ => Err(self.diagnostics),
        }
    }
}

/// First alternative of every group with optionals dropped.
pub(crate) fn derive_canonical(pattern: &Pattern) -> Result<Template, PatternError> {
    Template::from_elements(&pattern.first_reading())
}

fn derive_lexeme_canonical(pattern: &Pattern) -> Vec<Token> {
    pattern
        .first_reading()
        .into_iter()
        .filter_map(|e| match e {
            PatternElement::Literal(t) => Some(t),
            _ => None,
        })
        .collect()
}

fn literal_pattern(tokens: &[Token]) -> Pattern {
    Pattern {
        elements: tokens.iter().cloned().map(PatternElement::Literal).collect(),
    }
}

fn origin(file: &RuleFile, start: usize, end: usize) -> Origin {
    Origin {
        path: file.path.clone(),
        line: start,
        end_line: end,
    }
}

struct PendingTarget {
    category: VariableName,
    key: CanonicalKey,
    lang: LanguageTag,
    value: PendingValue,
    origin: Origin,
}

enum PendingValue {
    Phrase(Template),
    Lex(Vec<Token>),
}

struct Builder<'m> {
    manifest: &'m ProjectManifest,
    diags: Vec<Diagnostic>,
    units: BTreeMap<VariableName, Vec<TrPhraseUnit>>,
    lexemes: BTreeMap<VariableName, Vec<TrLexEntry>>,
    targets: Vec<PendingTarget>,
    sign_rules: BTreeMap<LanguageTag, SignRuleSet>,
    next_index: usize,
    fatal: bool,
}

impl<'m> Builder<'m> {
    fn fatal(&mut self, code: &'static str, message: String, origin: &Origin) {
        self.fatal = true;
        self.diags
            .push(Diagnostic::error(code, message, &origin.path, Some(origin.line)));
    }

    fn warn(&mut self, code: &'static str, message: String, origin: &Origin) {
        self.diags
            .push(Diagnostic::warning(code, message, &origin.path, Some(origin.line)));
    }

    fn is_text_target(&self, tag: &LanguageTag) -> bool {
        self.manifest.target_languages.contains(tag)
    }

    fn collect_target(&mut self, tag: &LanguageTag, role: &FileRole, origin: &Origin) -> bool {
        if *tag == self.manifest.source_language {
            return false;
        }
        if self.is_text_target(tag) {
            return true;
        }
        let sign_stream = matches!(role, FileRole::Sign(_)) && StreamName::parse(tag.as_str()).is_some();
        if !sign_stream {
            self.warn(
                "UnknownTargetLanguage",
                format!("Target/{tag} is not a target language of this project"),
                origin,
            );
        }
        false
    }

    fn add_source_unit(&mut self, file: &RuleFile, frag: &PhraseFragment) {
        let origin = origin(file, frag.span.start, frag.span.end);
        let (canonical, derived) = match frag.targets.get(&self.manifest.source_language) {
            Some(TargetLine::Template(t)) => (t.clone(), false),
            Some(TargetLine::Blank) | None => match derive_canonical(&frag.sources[0]) {
                Ok(t) => {
                    self.warn(
                        "DerivedCanonical",
                        format!(
                            "no Target/{} line; using {:?} from the first Source line",
                            self.manifest.source_language,
                            t.to_string()
                        ),
                        &origin,
                    );
                    (t, true)
                }
                Err(e) => {
                    self.fatal(
                        "BadDerivedCanonical",
                        format!("cannot derive a canonical from the first Source line: {e}"),
                        &origin,
                    );
                    return;
                }
            },
        };
        let key = CanonicalKey::of_template(&canonical);
        if self.units.get(&frag.category).is_some_and(|us| us.iter().any(|u| u.key == key)) {
            self.fatal(
                "DuplicateCanonical",
                format!("{} already has a unit with canonical {:?}", frag.category, key.as_str()),
                &origin,
            );
            return;
        }
        for (tag, target) in &frag.targets {
            if let TargetLine::Template(t) = target {
                if self.collect_target(tag, &file.role, &origin) {
                    self.targets.push(PendingTarget {
                        category: frag.category.clone(),
                        key: key.clone(),
                        lang: tag.clone(),
                        value: PendingValue::Phrase(t.clone()),
                        origin: origin.clone(),
                    });
                }
            }
        }
        let unit = TrPhraseUnit {
            category: frag.category.clone(),
            source_lines: frag.sources.clone(),
            canonical_pattern: canonical.to_pattern(),
            canonical,
            key,
            targets: BTreeMap::new(),
            target_origins: BTreeMap::new(),
            origin,
            declaration_index: self.next_index,
            derived_canonical: derived,
        };
        self.next_index += 1;
        self.units.entry(frag.category.clone()).or_default().push(unit);
    }

    fn add_source_lexeme(&mut self, file: &RuleFile, frag: &LexFragment, source: &Pattern) {
        let origin = origin(file, frag.span.start, frag.span.end);
        let canonical = match frag.attrs.get(&self.manifest.source_language) {
            Some(AttrValue::Tokens(t)) => t.clone(),
            _ => {
                let t = derive_lexeme_canonical(source);
                self.warn(
                    "DerivedCanonical",
                    format!(
                        "no {}= attribute; using {:?} from the source pattern",
                        self.manifest.source_language,
                        join_display(&t)
                    ),
                    &origin,
                );
                t
            }
        };
        let key = CanonicalKey::of_tokens(&canonical);
        if frag.category.is_top() {
            self.fatal("LexemeInTop", "TrLex entries cannot belong to $$top".to_string(), &origin);
            return;
        }
        if self.lexemes.get(&frag.category).is_some_and(|ls| ls.iter().any(|l| l.key == key)) {
            self.fatal(
                "DuplicateCanonical",
                format!("{} already has a lexeme with canonical {:?}", frag.category, key.as_str()),
                &origin,
            );
            return;
        }
        for (tag, value) in &frag.attrs {
            if let AttrValue::Tokens(t) = value {
                if self.collect_target(tag, &file.role, &origin) {
                    self.targets.push(PendingTarget {
                        category: frag.category.clone(),
                        key: key.clone(),
                        lang: tag.clone(),
                        value: PendingValue::Lex(t.clone()),
                        origin: origin.clone(),
                    });
                }
            }
        }
        let entry = TrLexEntry {
            category: frag.category.clone(),
            source_pattern: source.clone(),
            canonical_pattern: literal_pattern(&canonical),
            canonical,
            key,
            targets: BTreeMap::new(),
            origin,
            declaration_index: self.next_index,
        };
        self.next_index += 1;
        self.lexemes.entry(frag.category.clone()).or_default().push(entry);
    }

    fn add_target_file(&mut self, file: &RuleFile, lang: &LanguageTag) {
        let canonical_lang = &self.manifest.source_language;
        if !self.is_text_target(lang) {
            let o = origin(file, 1, 1);
            self.warn(
                "UnknownTargetLanguage",
                format!("{lang} is not a target language of this project; file ignored"),
                &o,
            );
            return;
        }
        for frag in &file.units {
            let o = origin(file, frag.span.start, frag.span.end);
            let Some(TargetLine::Template(canonical)) = frag.targets.get(canonical_lang) else {
                continue;
            };
            for tag in frag.targets.keys() {
                if tag != canonical_lang && tag != lang {
                    self.warn(
                        "UnexpectedTarget",
                        format!("Target/{tag} in a {lang} file is ignored"),
                        &o,
                    );
                }
            }
            if let Some(TargetLine::Template(t)) = frag.targets.get(lang) {
                self.targets.push(PendingTarget {
                    category: frag.category.clone(),
                    key: CanonicalKey::of_template(canonical),
                    lang: lang.clone(),
                    value: PendingValue::Phrase(t.clone()),
                    origin: o,
                });
            }
        }
        for frag in &file.lexemes {
            let o = origin(file, frag.span.start, frag.span.end);
            let Some(AttrValue::Tokens(canonical)) = frag.attrs.get(canonical_lang) else {
                continue;
            };
            if let Some(AttrValue::Tokens(t)) = frag.attrs.get(lang) {
                self.targets.push(PendingTarget {
                    category: frag.category.clone(),
                    key: CanonicalKey::of_tokens(canonical),
                    lang: lang.clone(),
                    value: PendingValue::Lex(t.clone()),
                    origin: o,
                });
            }
        }
    }

    fn merge_targets(&mut self) {
        let targets = core::mem::take(&mut self.targets);
        for t in targets {
            match t.value {
                PendingValue::Phrase(template) => {
                    let unit = self
                        .units
                        .get_mut(&t.category)
                        .and_then(|us| us.iter_mut().find(|u| u.key == t.key));
                    let Some(unit) = unit else {
                        self.warn(
                            "OrphanTarget",
                            format!("{} {:?} has no source-side unit", t.category, t.key.as_str()),
                            &t.origin,
                        );
                        continue;
                    };
                    match unit.targets.get(&t.lang) {
                        None => {
                            unit.target_origins.insert(t.lang.clone(), t.origin);
                            unit.targets.insert(t.lang, template);
                        }
                        Some(existing) if *existing == template => self.warn(
                            "DuplicateTarget",
                            format!("{} translation of {:?} given twice", t.lang, t.key.as_str()),
                            &t.origin,
                        ),
                        Some(_) => self.fatal(
                            "ConflictingTarget",
                            format!("two different {} translations of {:?}", t.lang, t.key.as_str()),
                            &t.origin,
                        ),
                    }
                }
                PendingValue::Lex(tokens) => {
                    let lex = self
                        .lexemes
                        .get_mut(&t.category)
                        .and_then(|ls| ls.iter_mut().find(|l| l.key == t.key));
                    let Some(lex) = lex else {
                        self.warn(
                            "OrphanTarget",
                            format!("{} {:?} has no source-side lexeme", t.category, t.key.as_str()),
                            &t.origin,
                        );
                        continue;
                    };
                    match lex.targets.get(&t.lang) {
                        None => {
                            lex.targets.insert(t.lang, tokens);
                        }
                        Some(existing) if *existing == tokens => self.warn(
                            "DuplicateTarget",
                            format!("{} translation of {:?} given twice", t.lang, t.key.as_str()),
                            &t.origin,
                        ),
                        Some(_) => self.fatal(
                            "ConflictingTarget",
                            format!("two different {} translations of {:?}", t.lang, t.key.as_str()),
                            &t.origin,
                        ),
                    }
                }
            }
        }
    }

    fn build_graph(&mut self) -> BTreeMap<VariableName, BTreeSet<VariableName>> {
        let mut graph: BTreeMap<VariableName, BTreeSet<VariableName>> = BTreeMap::new();
        let defined: BTreeSet<VariableName> =
            self.units.keys().chain(self.lexemes.keys()).cloned().collect();
        let mut unknown = Vec::new();
        for unit in self.units.values().flatten() {
            let edges = graph.entry(unit.category.clone()).or_default();
            for line in &unit.source_lines {
                for v in line.variables() {
                    edges.insert(v.clone());
                    if !defined.contains(v) {
                        unknown.push((v.clone(), unit.origin.clone()));
                    }
                }
            }
        }
        for (v, origin) in unknown {
            self.fatal(
                "UnknownVariable",
                format!("{v} has no TrPhrase or TrLex definition"),
                &origin,
            );
        }
        for c in self.lexemes.keys() {
            graph.entry(c.clone()).or_default();
        }
        graph
    }

    fn check_cycles(&mut self, graph: &BTreeMap<VariableName, BTreeSet<VariableName>>) {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        fn visit<'g>(
            node: &'g VariableName,
            graph: &'g BTreeMap<VariableName, BTreeSet<VariableName>>,
            marks: &mut BTreeMap<&'g VariableName, Mark>,
            path: &mut Vec<&'g VariableName>,
            cycles: &mut Vec<Vec<VariableName>>,
        ) {
            match marks.get(node) {
                Some(Mark::Done) => return,
                Some(Mark::Active) => {
                    let start = path.iter().position(|n| *n == node).unwrap_or(0);
                    let mut cycle: Vec<VariableName> = path[start..].iter().map(|n| (*n).clone()).collect();
                    cycle.push(node.clone());
                    cycles.push(cycle);
                    return;
                }
                None => {}
            }
            marks.insert(node, Mark::Active);
            path.push(node);
            if let Some(next) = graph.get(node) {
                for n in next {
                    visit(n, graph, marks, path, cycles);
                }
            }
            path.pop();
            marks.insert(node, Mark::Done);
        }
        let mut marks = BTreeMap::new();
        let mut cycles = Vec::new();
        for node in graph.keys() {
            visit(node, graph, &mut marks, &mut Vec::new(), &mut cycles);
        }
        for cycle in cycles {
            let names: Vec<String> = cycle.iter().map(|v| v.to_string()).collect();
            let origin = self
                .units
                .get(&cycle[0])
                .and_then(|us| us.first())
                .map(|u| u.origin.clone())
                .unwrap_or(Origin { path: String::new(), line: 0, end_line: 0 });
            self.fatal("CyclicVariable", format!("cycle {}", names.join(" -> ")), &origin);
        }
    }
}

/// Merge parsed rule files into a project.
///
/// Files are processed in the given order; declaration indices follow
/// source-side fragments in that order.
pub fn assemble(manifest: &ProjectManifest, files: &[RuleFile]) -> Assembly {
    let mut b = Builder {
        manifest,
        diags: Vec::new(),
        units: BTreeMap::new(),
        lexemes: BTreeMap::new(),
        targets: Vec::new(),
        sign_rules: BTreeMap::new(),
        next_index: 0,
        fatal: false,
    };
    for file in files {
        match &file.role {
            FileRole::Target(lang) => b.add_target_file(file, lang),
            role => {
                for frag in &file.units {
                    if !frag.sources.is_empty() {
                        b.add_source_unit(file, frag);
                    }
                }
                for frag in &file.lexemes {
                    if let Some(src) = &frag.source {
                        b.add_source_lexeme(file, frag, src);
                    }
                }
                if let FileRole::Sign(lang) = role {
                    if !manifest.sign_languages.contains(lang) {
                        let o = origin(file, 1, 1);
                        b.warn(
                            "UnknownTargetLanguage",
                            format!("{lang} is not a sign language of this project"),
                            &o,
                        );
                    }
                    let (set, diags) = sign_rules_from_file(file);
                    b.fatal |= has_errors(&diags);
                    b.diags.extend(diags);
                    b.sign_rules.entry(lang.clone()).or_default().extend(set);
                }
            }
        }
    }
    b.merge_targets();
    let graph = b.build_graph();
    b.check_cycles(&graph);
    if !b.units.contains_key(&VariableName::top()) {
        b.fatal = true;
        let path = files.first().map(|f| f.path.as_str()).unwrap_or("");
        b.diags.push(Diagnostic::error(
            "MissingTop",
            "project defines no $$top units",
            path,
            None,
        ));
    }
    if b.fatal {
        return Assembly {
            project: None,
            diagnostics: b.diags,
        };
    }
    let mut project = AssembledProject {
        manifest: manifest.clone(),
        units: b.units,
        lexemes: b.lexemes,
        variable_graph: graph,
        sign_rules: b.sign_rules,
    };
    let mut diagnostics = b.diags;
    diagnostics.extend(check_sign_rules(&mut project));
    diagnostics.extend(validate(&project));
    Assembly {
        project: Some(project),
        diagnostics,
    }
}

fn check_sign_rules(project: &mut AssembledProject) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for (lang, set) in &project.sign_rules {
        for rule in &set.rules {
            let Some(unit) = project.find_unit(&rule.category, &rule.key) else {
                diags.push(Diagnostic::warning(
                    "OrphanTarget",
                    format!("{lang} sign rule {:?} has no source-side unit", rule.key.as_str()),
                    &rule.origin.path,
                    Some(rule.origin.line),
                ));
                continue;
            };
            for v in rule.column_variables() {
                if !unit.canonical.variables().any(|c| c == v) {
                    diags.push(Diagnostic::error(
                        "SignVariableNotInCanonical",
                        format!("{v} is not in the canonical {:?}", unit.key.as_str()),
                        &rule.origin.path,
                        Some(rule.origin.line),
                    ));
                }
            }
        }
        for lex in &set.lexemes {
            if project.find_lexeme(&lex.category, &lex.key).is_none() {
                diags.push(Diagnostic::warning(
                    "OrphanTarget",
                    format!("{lang} sign lexeme {:?} has no source-side lexeme", lex.key.as_str()),
                    &lex.origin.path,
                    Some(lex.origin.line),
                ));
            }
        }
    }
    diags
}

fn at(code: &'static str, message: String, origin: &Origin, error: bool) -> Diagnostic {
    if error {
        Diagnostic::error(code, message, &origin.path, Some(origin.line))
    } else {
        Diagnostic::warning(code, message, &origin.path, Some(origin.line))
    }
}

/// Coverage and consistency checks on an assembled project.
pub fn validate(project: &AssembledProject) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let manifest = &project.manifest;
    for unit in project.all_units() {
        let source_vars: BTreeSet<&VariableName> =
            unit.source_lines.iter().flat_map(Pattern::variables).collect();
        for v in unit.canonical.variables() {
            if !source_vars.contains(v) {
                diags.push(at(
                    "UnknownTemplateVariable",
                    format!("canonical uses {v}, which no Source line binds"),
                    &unit.origin,
                    true,
                ));
            }
        }
        for (i, line) in unit.source_lines.iter().enumerate() {
            let mandatory = line.mandatory_variables();
            for v in unit.canonical.mandatory_variables() {
                if !mandatory.contains(v) {
                    diags.push(at(
                        "MandatoryVariableNotCovered",
                        format!("canonical requires {v} but Source line {} can omit it", i + 1),
                        &unit.origin,
                        true,
                    ));
                }
            }
            for v in line.variables() {
                // one binding per variable per unit: a second occurrence can never match
                if line.max_occurrences(v) > 1 {
                    diags.push(at(
                        "RepeatedVariable",
                        format!("Source line {} can bind {v} more than once", i + 1),
                        &unit.origin,
                        true,
                    ));
                }
            }
            if unit.category.is_top() && line.is_nullable() {
                diags.push(at(
                    "NullableTop",
                    format!("Source line {} of a $$top unit matches the empty utterance", i + 1),
                    &unit.origin,
                    true,
                ));
            }
        }
        for (lang, target) in &unit.targets {
            let target_origin = unit.target_origins.get(lang).unwrap_or(&unit.origin);
            for v in target.variables() {
                if !unit.canonical.variables().any(|c| c == v) {
                    diags.push(at(
                        "UnknownTemplateVariable",
                        format!("{lang} target uses {v}, which the canonical lacks"),
                        target_origin,
                        true,
                    ));
                } else if !target.is_optional(v) && unit.canonical.is_optional(v) {
                    diags.push(at(
                        "OptionalityMismatch",
                        format!("{lang} target requires {v} but the canonical makes it optional"),
                        target_origin,
                        false,
                    ));
                }
            }
        }
        for lang in &manifest.target_languages {
            if !unit.targets.contains_key(lang) {
                diags.push(at(
                    "MissingTarget",
                    format!("no {lang} translation for {:?}", unit.key.as_str()),
                    &unit.origin,
                    false,
                ));
            }
        }
        for lang in &manifest.sign_languages {
            let has = project
                .sign_rules(lang)
                .is_some_and(|s| s.rule(&unit.category, &unit.key).is_some());
            if !has {
                diags.push(at(
                    "MissingSignTarget",
                    format!("no {lang} sign rule for {:?}", unit.key.as_str()),
                    &unit.origin,
                    false,
                ));
            }
        }
    }
    for lex in project.all_lexemes() {
        for lang in &manifest.target_languages {
            if !lex.targets.contains_key(lang) {
                diags.push(at(
                    "MissingTarget",
                    format!("no {lang} translation for {:?}", lex.key.as_str()),
                    &lex.origin,
                    false,
                ));
            }
        }
        for lang in &manifest.sign_languages {
            let has = project
                .sign_rules(lang)
                .is_some_and(|s| s.lexeme(&lex.category, &lex.key).is_some());
            if !has {
                diags.push(at(
                    "MissingSignTarget",
                    format!("no {lang} sign entry for {:?}", lex.key.as_str()),
                    &lex.origin,
                    false,
                ));
            }
        }
    }
    let reachable = project.reachable_categories();
    for category in project.categories() {
        if !reachable.contains(category) {
            let origin = project
                .units(category)
                .first()
                .map(|u| &u.origin)
                .or_else(|| project.lexemes(category).first().map(|l| &l.origin))
                .expect("category has a definition");
            diags.push(at(
                "UnreachableCategory",
                format!("{category} is never referenced from $$top"),
                origin,
                false,
            ));
        }
    }
    diags
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rules::parse_rule_file;
    use alloc::vec;

    pub const CAFE_ENGLISH: &str = "\
TrPhrase $$top
Source i ( want | would like ) $$food-or-drink ?please
Source ( could | can ) i have  $$food-or-drink ?please
Target/english i want $$food-or-drink please
EndTrPhrase

TrLex $$food-or-drink source=\"a (coca-cola | coke)\" english=\"a coke\"
";

    pub const CAFE_FRENCH: &str = "\
TrPhrase $$top
Target/english i want $$food-or-drink please
Target/french je voudrais $$food-or-drink s'il vous plaît
EndTrPhrase

TrLex $$food-or-drink english=\"a coke\" french=\"un coca\"
";

    pub const HELLO: &str = "\
TrPhrase $$top
Source ( hello | hi )
Target/french Bonjour
EndTrPhrase
";

    pub fn manifest() -> ProjectManifest {
        ProjectManifest::new("cafe", "english", &["french"])
    }

    pub fn files(sources: &[&str], french: &[&str], monolithic: &[&str]) -> Vec<RuleFile> {
        let en = LanguageTag::new("english").unwrap();
        let fr = LanguageTag::new("french").unwrap();
        let mut out = Vec::new();
        for (i, t) in monolithic.iter().enumerate() {
            let (f, d) = parse_rule_file(t, &format!("mono{i}"), FileRole::Monolithic, &en);
            assert!(!has_errors(&d), "{d:?}");
            out.push(f);
        }
        for (i, t) in sources.iter().enumerate() {
            let (f, d) = parse_rule_file(t, &format!("src{i}"), FileRole::Source, &en);
            assert!(!has_errors(&d), "{d:?}");
            out.push(f);
        }
        for (i, t) in french.iter().enumerate() {
            let (f, d) = parse_rule_file(t, &format!("fr{i}"), FileRole::Target(fr.clone()), &en);
            assert!(!has_errors(&d), "{d:?}");
            out.push(f);
        }
        out
    }

    pub fn cafe() -> AssembledProject {
        let a = assemble(&manifest(), &files(&[CAFE_ENGLISH], &[CAFE_FRENCH], &[HELLO]));
        a.project.expect("cafe assembles")
    }

    fn codes(d: &[Diagnostic]) -> Vec<&'static str> {
        d.iter().map(|d| d.code).collect()
    }

    #[test]
    fn cafe_assembles() {
        let a = assemble(&manifest(), &files(&[CAFE_ENGLISH], &[CAFE_FRENCH], &[]));
        assert!(!a.has_errors(), "{:?}", a.diagnostics);
        let p = a.project.unwrap();
        let top = p.top_units();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].source_lines.len(), 2);
        assert_eq!(
            top[0].targets[&LanguageTag::new("french").unwrap()].to_string(),
            "je voudrais $$food-or-drink s'il vous plaît"
        );
        let lex = p.lexemes(&VariableName::new("food-or-drink").unwrap());
        assert_eq!(lex.len(), 1);
        assert_eq!(join_display(&lex[0].targets[&LanguageTag::new("french").unwrap()]), "un coca");
        assert!(validate(&p).is_empty(), "{:?}", validate(&p));
    }

    #[test]
    fn monolithic_hello_derives_canonical() {
        let a = assemble(&manifest(), &files(&[], &[], &[HELLO]));
        assert_eq!(codes(&a.diagnostics), vec!["DerivedCanonical"]);
        let p = a.project.unwrap();
        assert_eq!(p.top_units()[0].key.as_str(), "hello");
        assert!(p.top_units()[0].derived_canonical);
    }

    #[test]
    fn orphan_target_warns() {
        let extra = "TrPhrase $$top\nTarget/english i need a taxi\nTarget/french il me faut un taxi\nEndTrPhrase\n";
        let a = assemble(&manifest(), &files(&[CAFE_ENGLISH], &[CAFE_FRENCH, extra], &[]));
        assert!(!a.has_errors());
        assert_eq!(codes(&a.diagnostics), vec!["OrphanTarget"]);
        assert!(a.diagnostics[0].message.contains("i need a taxi"));
    }

    #[test]
    fn cycle_is_fatal() {
        let text = "\
TrPhrase $$top
Source go $$a
EndTrPhrase
TrPhrase $$a
Source x $$b
EndTrPhrase
TrPhrase $$b
Source y $$a
EndTrPhrase
";
        let a = assemble(&manifest(), &files(&[], &[], &[text]));
        assert!(a.project.is_none());
        let cyc: Vec<_> = a.diagnostics.iter().filter(|d| d.code == "CyclicVariable").collect();
        assert_eq!(cyc.len(), 1);
        assert!(cyc[0].message.contains("$$a -> $$b -> $$a"), "{}", cyc[0].message);
    }

    #[test]
    fn unknown_variable_and_missing_top() {
        let text = "TrPhrase $$top\nSource buy $$thing\nEndTrPhrase\n";
        let a = assemble(&manifest(), &files(&[], &[], &[text]));
        assert!(a.project.is_none());
        assert!(codes(&a.diagnostics).contains(&"UnknownVariable"));

        let text = "TrLex $$x source=\"a\" english=\"a\"\n";
        let a = assemble(&manifest(), &files(&[text], &[], &[]));
        assert!(codes(&a.diagnostics).contains(&"MissingTop"));
    }

    #[test]
    fn duplicate_canonicals() {
        let dup = "\
TrPhrase $$top
Source hi there
Target/english hello
EndTrPhrase
TrPhrase $$top
Source hello
EndTrPhrase
";
        let a = assemble(&manifest(), &files(&[dup], &[], &[]));
        assert!(a.project.is_none());
        assert!(codes(&a.diagnostics).contains(&"DuplicateCanonical"));

        let fr_dup = "TrLex $$food-or-drink english=\"a coke\" french=\"un coca\"\n";
        let a = assemble(&manifest(), &files(&[CAFE_ENGLISH], &[CAFE_FRENCH, fr_dup], &[]));
        assert!(!a.has_errors());
        assert!(codes(&a.diagnostics).contains(&"DuplicateTarget"));

        let fr_conflict = "TrLex $$food-or-drink english=\"a coke\" french=\"une boisson\"\n";
        let a = assemble(&manifest(), &files(&[CAFE_ENGLISH], &[CAFE_FRENCH, fr_conflict], &[]));
        assert!(a.has_errors());
        assert!(codes(&a.diagnostics).contains(&"ConflictingTarget"));
    }

    #[test]
    fn missing_lexeme_translation() {
        let fr = CAFE_FRENCH.replace(" french=\"un coca\"", "");
        let a = assemble(&manifest(), &files(&[CAFE_ENGLISH], &[&fr], &[]));
        let p = a.project.unwrap();
        let d = validate(&p);
        assert_eq!(codes(&d), vec!["MissingTarget"]);
        assert!(d[0].message.contains("french") && d[0].message.contains("\"a coke\""));
    }

    #[test]
    fn unreachable_category() {
        let color = "TrLex $$color source=\"red\" english=\"red\" french=\"rouge\"\n";
        let a = assemble(&manifest(), &files(&[CAFE_ENGLISH, color], &[CAFE_FRENCH], &[]));
        let d = validate(a.project.as_ref().unwrap());
        assert_eq!(codes(&d), vec!["UnreachableCategory"]);
        assert!(d[0].message.contains("$$color"));
    }

    #[test]
    fn validation_errors() {
        let text = "\
TrPhrase $$top
Source ?please
Target/english please
EndTrPhrase
TrPhrase $$top
Source tell me ?$$x
Source say $$x
Target/english tell me $$x
EndTrPhrase
TrLex $$x source=\"a\" english=\"a\" french=\"a\"
";
        let a = assemble(&manifest(), &files(&[text], &[], &[]));
        let c = codes(&a.diagnostics);
        assert!(c.contains(&"NullableTop"), "{c:?}");
        assert!(c.contains(&"MandatoryVariableNotCovered"), "{c:?}");
        assert!(a.has_errors());
        assert!(a.project.is_some());
        assert!(a.into_result().is_err());
    }

    #[test]
    fn assembly_is_deterministic() {
        let run = || {
            let p = cafe();
            (p.target_index(), p.all_units().iter().map(|u| u.key.clone()).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn target_index_keys_come_from_source() {
        let p = cafe();
        let sources: BTreeSet<_> = p
            .all_units()
            .iter()
            .map(|u| (u.category.clone(), u.key.clone()))
            .chain(p.all_lexemes().iter().map(|l| (l.category.clone(), l.key.clone())))
            .collect();
        for (cat, key, _) in p.target_index().keys() {
            assert!(sources.contains(&(cat.clone(), key.clone())));
        }
    }

    #[test]
    fn canonical_key_normalization() {
        assert_eq!(
            CanonicalKey::normalize("  I want   $$food-or-drink  PLEASE "),
            CanonicalKey::of_template(&crate::pattern::parse_template("i want $$food-or-drink please").unwrap())
        );
    }
}
