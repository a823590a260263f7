//! Matching utterances against source patterns and translating through the
//! canonical pivot.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
use core::slice;

use crate::pattern::{Pattern, PatternElement, Template, TemplateElement};
use crate::project::{AssembledProject, CanonicalKey, TrLexEntry, TrPhraseUnit};
use crate::token::{join_display, tokenize, LanguageTag, Token, Utterance, VariableName};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("utterance contains no tokens")]
    EmptyUtterance,
    #[error("no source pattern matches the utterance")]
    NoMatch,
    #[error("template needs {0} but the match does not bind it")]
    UnboundMandatoryVariable(VariableName),
    #[error("canonical {0:?} matches no canonical template")]
    NoCanonicalMatch(String),
    #[error("no {lang} translation for {key:?}")]
    MissingTarget { lang: LanguageTag, key: String },
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::EmptyUtterance => "EmptyUtterance",
            EngineError::NoMatch => "NoMatch",
            EngineError::UnboundMandatoryVariable(_) => "UnboundMandatoryVariable",
            EngineError::NoCanonicalMatch(_) => "NoCanonicalMatch",
            EngineError::MissingTarget { .. } => "MissingTarget",
        }
    }
}

/// What a variable was bound to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundValue<'p> {
    Lexeme(&'p TrLexEntry),
    Phrase(Box<MatchResult<'p>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding<'p> {
    pub variable: VariableName,
    /// Token indices in the matched utterance.
    pub span: Range<usize>,
    pub value: BoundValue<'p>,
}

/// One parse of (part of) an utterance by a unit's pattern line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult<'p> {
    pub unit: &'p TrPhraseUnit,
    pub line_index: usize,
    /// In utterance order.
    pub bindings: Vec<Binding<'p>>,
    pub span: Range<usize>,
}

/// Total order on parses. Equal priorities imply identical parse trees.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Priority {
    pub unit: usize,
    pub line: usize,
    pub bindings: Vec<BindingPriority>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BindingPriority {
    /// Declaration index of the bound lexeme or nested unit.
    pub declaration: usize,
    pub nested: Option<Box<Priority>>,
    pub span: (usize, usize),
}

impl<'p> MatchResult<'p> {
    pub fn binding(&self, v: &VariableName) -> Option<&Binding<'p>> {
        self.bindings.iter().find(|b| &b.variable == v)
    }

    pub fn priority(&self) -> Priority {
        Priority {
            unit: self.unit.declaration_index,
            line: self.line_index,
            bindings: self
                .bindings
                .iter()
                .map(|b| match &b.value {
                    BoundValue::Lexeme(l) => BindingPriority {
                        declaration: l.declaration_index,
                        nested: None,
                        span: (b.span.start, b.span.end),
                    },
                    BoundValue::Phrase(m) => BindingPriority {
                        declaration: m.unit.declaration_index,
                        nested: Some(Box::new(m.priority())),
                        span: (b.span.start, b.span.end),
                    },
                })
                .collect(),
        }
    }
}

/// Which patterns a unit or lexeme is matched by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `Source` lines and `source=` patterns.
    Source,
    /// Canonical templates read as patterns (stage 2).
    Canonical,
}

impl Side {
    fn unit_lines<'p>(&self, unit: &'p TrPhraseUnit) -> &'p [Pattern] {
        match self {
            Side::Source => &unit.source_lines,
            Side::Canonical => slice::from_ref(&unit.canonical_pattern),
        }
    }

    fn lexeme_pattern<'p>(&self, lex: &'p TrLexEntry) -> &'p Pattern {
        match self {
            Side::Source => &lex.source_pattern,
            Side::Canonical => &lex.canonical_pattern,
        }
    }
}

type Cont<'k, 'p> = dyn FnMut(usize, &[Binding<'p>]) + 'k;

struct Matcher<'p, 't> {
    project: &'p AssembledProject,
    side: Side,
    tokens: &'t [Token],
}

impl<'p> Matcher<'p, '_> {
    /// Match the concatenation of `stack` (last entry first) from `pos`,
    /// calling `k` with the end position for every way to do so.
    /// `stack` is restored before returning.
    fn seq(
        &self,
        stack: &mut Vec<&'p [PatternElement]>,
        pos: usize,
        frame: &mut Vec<Binding<'p>>,
        k: &mut Cont<'_, 'p>,
    ) {
        let Some(top) = stack.pop() else {
            k(pos, frame);
            return;
        };
        match top.split_first() {
            None => self.seq(stack, pos, frame, k),
            Some((first, rest)) => {
                stack.push(rest);
                self.element(first, stack, pos, frame, k);
                stack.pop();
            }
        }
        stack.push(top);
    }

    fn element(
        &self,
        el: &'p PatternElement,
        stack: &mut Vec<&'p [PatternElement]>,
        pos: usize,
        frame: &mut Vec<Binding<'p>>,
        k: &mut Cont<'_, 'p>,
    ) {
        match el {
            PatternElement::Literal(t) => {
                if self.tokens.get(pos).is_some_and(|u| u.norm() == t.norm()) {
                    self.seq(stack, pos + 1, frame, k);
                }
            }
            PatternElement::Optional(inner) => {
                self.seq(stack, pos, frame, k);
                stack.push(slice::from_ref(&**inner));
                self.seq(stack, pos, frame, k);
                stack.pop();
            }
            PatternElement::Group(alts) => {
                for alt in alts {
                    stack.push(alt);
                    self.seq(stack, pos, frame, k);
                    stack.pop();
                }
            }
            PatternElement::Var(v) => {
                if frame.iter().any(|b| &b.variable == v) {
                    return;
                }
                self.category(v, pos, &mut |end, value| {
                    frame.push(Binding {
                        variable: v.clone(),
                        span: pos..end,
                        value,
                    });
                    self.seq(stack, end, frame, k);
                    frame.pop();
                });
            }
        }
    }

    fn category(
        &self,
        v: &VariableName,
        pos: usize,
        k: &mut dyn FnMut(usize, BoundValue<'p>),
    ) {
        for unit in self.project.units(v) {
            self.unit(unit, pos, &mut |end, m| k(end, BoundValue::Phrase(Box::new(m))));
        }
        for lex in self.project.lexemes(v) {
            let pattern = self.side.lexeme_pattern(lex);
            let mut stack = vec![pattern.elements.as_slice()];
            self.seq(&mut stack, pos, &mut Vec::new(), &mut |end, _| {
                k(end, BoundValue::Lexeme(lex))
            });
        }
    }

    fn unit(&self, unit: &'p TrPhraseUnit, pos: usize, k: &mut dyn FnMut(usize, MatchResult<'p>)) {
        for (line_index, line) in self.side.unit_lines(unit).iter().enumerate() {
            let mut stack = vec![line.elements.as_slice()];
            self.seq(&mut stack, pos, &mut Vec::new(), &mut |end, bindings| {
                k(
                    end,
                    MatchResult {
                        unit,
                        line_index,
                        bindings: bindings.to_vec(),
                        span: pos..end,
                    },
                )
            });
        }
    }
}

/// Every full-utterance parse by a `$$top` unit, best first, deduplicated.
pub fn match_side<'p>(
    project: &'p AssembledProject,
    tokens: &[Token],
    side: Side,
    scope: Option<&BTreeSet<CanonicalKey>>,
) -> Vec<MatchResult<'p>> {
    let matcher = Matcher { project, side, tokens };
    let mut found: Vec<(Priority, MatchResult<'p>)> = Vec::new();
    for unit in project.top_units() {
        if scope.is_some_and(|s| !s.contains(&unit.key)) {
            continue;
        }
        matcher.unit(unit, 0, &mut |end, m| {
            if end == tokens.len() {
                found.push((m.priority(), m));
            }
        });
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    found.dedup_by(|a, b| a.0 == b.0);
    found.into_iter().map(|(_, m)| m).collect()
}

pub fn match_source<'p>(project: &'p AssembledProject, utt: &Utterance) -> Result<Vec<MatchResult<'p>>, EngineError> {
    match_source_scoped(project, utt, None)
}

/// [`match_source`] restricted to `$$top` units whose key is in `scope`.
pub fn match_source_scoped<'p>(
    project: &'p AssembledProject,
    utt: &Utterance,
    scope: Option<&BTreeSet<CanonicalKey>>,
) -> Result<Vec<MatchResult<'p>>, EngineError> {
    let matches = match_side(project, &utt.tokens, Side::Source, scope);
    if matches.is_empty() {
        Err(EngineError::NoMatch)
    } else {
        Ok(matches)
    }
}

type Fill<'a> = &'a dyn Fn(&BoundValue<'_>, &mut Vec<Token>) -> Result<(), EngineError>;

/// Walk `template`, filling variable slots from `m` with `fill`.
fn walk(
    template: &Template,
    m: &MatchResult<'_>,
    out: &mut Vec<Token>,
    fill: Fill<'_>,
) -> Result<(), EngineError> {
    for el in &template.elements {
        match el {
            TemplateElement::Literal(t) => out.push(t.clone()),
            TemplateElement::Var(v) => {
                let b = m
                    .binding(v)
                    .ok_or_else(|| EngineError::UnboundMandatoryVariable(v.clone()))?;
                fill(&b.value, out)?;
            }
            TemplateElement::OptionalVar(v) => {
                if let Some(b) = m.binding(v) {
                    fill(&b.value, out)?;
                }
            }
        }
    }
    Ok(())
}

fn canonical_tokens(m: &MatchResult<'_>, out: &mut Vec<Token>) -> Result<(), EngineError> {
    walk(&m.unit.canonical, m, out, &|value, out| match value {
        BoundValue::Lexeme(l) => {
            out.extend(l.canonical.iter().cloned());
            Ok(())
        }
        BoundValue::Phrase(inner) => canonical_tokens(inner, out),
    })
}

/// The source-language canonical realization of a match (the paraphrase).
pub fn realize_canonical(m: &MatchResult<'_>) -> Result<String, EngineError> {
    let mut out = Vec::new();
    canonical_tokens(m, &mut out)?;
    Ok(join_display(&out))
}

fn target_tokens(m: &MatchResult<'_>, lang: &LanguageTag, out: &mut Vec<Token>) -> Result<(), EngineError> {
    let template = m.unit.targets.get(lang).ok_or_else(|| EngineError::MissingTarget {
        lang: lang.clone(),
        key: m.unit.key.as_str().into(),
    })?;
    walk(template, m, out, &|value, out| match value {
        BoundValue::Lexeme(l) => {
            let t = l.targets.get(lang).ok_or_else(|| EngineError::MissingTarget {
                lang: lang.clone(),
                key: l.key.as_str().into(),
            })?;
            out.extend(t.iter().cloned());
            Ok(())
        }
        BoundValue::Phrase(inner) => target_tokens(inner, lang, out),
    })
}

/// Emit the `lang` target of a (stage-2) match.
pub fn emit_target(m: &MatchResult<'_>, lang: &LanguageTag) -> Result<String, EngineError> {
    let mut out = Vec::new();
    target_tokens(m, lang, &mut out)?;
    Ok(join_display(&out))
}

/// Stage 2: parse a canonical string with canonical templates; best parse.
pub fn match_canonical<'p>(project: &'p AssembledProject, canonical: &str) -> Result<MatchResult<'p>, EngineError> {
    let no_match = || EngineError::NoCanonicalMatch(canonical.into());
    let utt = tokenize(canonical).map_err(|_| no_match())?;
    match_side(project, &utt.tokens, Side::Canonical, None)
        .into_iter()
        .next()
        .ok_or_else(no_match)
}

pub fn translate_canonical(project: &AssembledProject, canonical: &str, lang: &LanguageTag) -> Result<String, EngineError> {
    emit_target(&match_canonical(project, canonical)?, lang)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationResult {
    pub paraphrase: String,
    /// Key of the `$$top` unit that produced the paraphrase.
    pub matched_key: CanonicalKey,
    pub outputs: BTreeMap<LanguageTag, Result<String, EngineError>>,
}

/// Best source match, its paraphrase, and a stage-2 translation per language.
pub fn translate(project: &AssembledProject, utt: &Utterance, langs: &[LanguageTag]) -> Result<TranslationResult, EngineError> {
    translate_scoped(project, utt, langs, None)
}

pub fn translate_scoped(
    project: &AssembledProject,
    utt: &Utterance,
    langs: &[LanguageTag],
    scope: Option<&BTreeSet<CanonicalKey>>,
) -> Result<TranslationResult, EngineError> {
    let matches = match_source_scoped(project, utt, scope)?;
    let best = &matches[0];
    let paraphrase = realize_canonical(best)?;
    let outputs = langs
        .iter()
        .map(|l| (l.clone(), translate_canonical(project, &paraphrase, l)))
        .collect();
    Ok(TranslationResult {
        paraphrase,
        matched_key: best.unit.key.clone(),
        outputs,
    })
}

/// Tokenize and translate raw text.
pub fn translate_text(project: &AssembledProject, raw: &str, langs: &[LanguageTag]) -> Result<TranslationResult, EngineError> {
    let utt = tokenize(raw).map_err(|_| EngineError::EmptyUtterance)?;
    translate(project, &utt, langs)
}
