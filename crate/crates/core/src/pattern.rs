//! Phrase patterns (`i ( want | would like ) $$food-or-drink ?please`) and the
//! flat templates used for canonical and target lines.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::token::{Token, VariableName};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("empty pattern")]
    EmptyPattern,
    #[error("unbalanced parenthesis")]
    UnbalancedParenthesis,
    #[error("empty alternative in group")]
    EmptyAlternative,
    #[error("`?` is not followed by anything")]
    DanglingOptional,
    #[error("bad variable name {0:?}")]
    BadVariableName(String),
    #[error("`|` outside of a group")]
    UnexpectedAlternation,
    #[error("groups are not allowed in a template")]
    GroupInTemplate,
    #[error("only variables may be optional in a template, found ?{0}")]
    OptionalLiteralInTemplate(String),
    #[error("variable {0} occurs twice in a template")]
    DuplicateTemplateVariable(VariableName),
}

impl PatternError {
    /// Short identifier used in diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            PatternError::EmptyPattern => "EmptyPattern",
            PatternError::UnbalancedParenthesis => "UnbalancedParenthesis",
            PatternError::EmptyAlternative => "EmptyAlternative",
            PatternError::DanglingOptional => "DanglingOptional",
            PatternError::BadVariableName(_) => "BadVariableName",
            PatternError::UnexpectedAlternation => "UnexpectedAlternation",
            PatternError::GroupInTemplate => "GroupInTemplate",
            PatternError::OptionalLiteralInTemplate(_) => "OptionalLiteralInTemplate",
            PatternError::DuplicateTemplateVariable(_) => "DuplicateTemplateVariable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum PatternElement {
    Literal(Token),
    Var(VariableName),
    Group(Vec<Vec<PatternElement>>),
    Optional(Box<PatternElement>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pattern {
    pub elements: Vec<PatternElement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lexeme<'a> {
    Open,
    Close,
    Bar,
    Question,
    Word(&'a str),
}

fn lex(text: &str) -> Vec<Lexeme<'_>> {
    let mut out = Vec::new();
    let mut word_start: Option<usize> = None;
    // `?` is only an operator at the start of a word
    for (i, c) in text.char_indices() {
        let special = matches!(c, '(' | ')' | '|');
        if c.is_whitespace() || special {
            if let Some(s) = word_start.take() {
                out.push(Lexeme::Word(&text[s..i]));
            }
            match c {
                '(' => out.push(Lexeme::Open),
                ')' => out.push(Lexeme::Close),
                '|' => out.push(Lexeme::Bar),
                _ => {}
            }
        } else if c == '?' && word_start.is_none() {
            out.push(Lexeme::Question);
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(s) = word_start {
        out.push(Lexeme::Word(&text[s..]));
    }
    out
}

struct Parser<'a> {
    lexemes: Vec<Lexeme<'a>>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Lexeme<'a>> {
        self.lexemes.get(self.pos)
    }

    fn sequence(&mut self) -> Result<Vec<PatternElement>, PatternError> {
        let mut seq = Vec::new();
        while let Some(lx) = self.peek() {
            if matches!(lx, Lexeme::Close | Lexeme::Bar) {
                break;
            }
            seq.push(self.element()?);
        }
        Ok(seq)
    }

    fn element(&mut self) -> Result<PatternElement, PatternError> {
        let lx = self.peek().cloned().ok_or(PatternError::DanglingOptional)?;
        self.pos += 1;
        match lx {
            Lexeme::Question => match self.peek() {
                None | Some(Lexeme::Close) | Some(Lexeme::Bar) => {
                    Err(PatternError::DanglingOptional)
                }
                _ => Ok(PatternElement::Optional(Box::new(self.element()?))),
            },
            Lexeme::Open => {
                let mut alternatives = Vec::new();
                loop {
                    let alt = self.sequence()?;
                    if alt.is_empty() {
                        // distinguish `(a | )` from `(a` at end of input
                        if self.peek().is_none() {
                            return Err(PatternError::UnbalancedParenthesis);
                        }
                        return Err(PatternError::EmptyAlternative);
                    }
                    alternatives.push(alt);
                    match self.peek() {
                        Some(Lexeme::Bar) => self.pos += 1,
                        Some(Lexeme::Close) => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(PatternError::UnbalancedParenthesis),
                    }
                }
                Ok(PatternElement::Group(alternatives))
            }
            Lexeme::Close => Err(PatternError::UnbalancedParenthesis),
            Lexeme::Bar => Err(PatternError::UnexpectedAlternation),
            Lexeme::Word(w) => word_element(w),
        }
    }
}

fn word_element(w: &str) -> Result<PatternElement, PatternError> {
    if let Some(name) = w.strip_prefix("$$") {
        VariableName::new(name)
            .map(PatternElement::Var)
            .map_err(|_| PatternError::BadVariableName(w.to_string()))
    } else {
        Ok(PatternElement::Literal(
            Token::new(w).expect("lexer yields whitespace-free words"),
        ))
    }
}

/// Parse a pattern string. `?` binds to the next token, group or variable.
pub fn parse_pattern(text: &str) -> Result<Pattern, PatternError> {
    let mut parser = Parser { lexemes: lex(text), pos: 0 };
    let elements = parser.sequence()?;
    match parser.peek() {
        None => {}
        Some(Lexeme::Close) => return Err(PatternError::UnbalancedParenthesis),
        Some(_) => return Err(PatternError::UnexpectedAlternation),
    }
    if elements.is_empty() {
        return Err(PatternError::EmptyPattern);
    }
    Ok(Pattern { elements }.normalized())
}

fn normalize_element(el: PatternElement) -> PatternElement {
    match el {
        PatternElement::Optional(inner) => match normalize_element(*inner) {
            PatternElement::Optional(x) => PatternElement::Optional(x),
            other => PatternElement::Optional(Box::new(other)),
        },
        PatternElement::Group(alts) => {
            let mut alts: Vec<Vec<PatternElement>> = alts
                .into_iter()
                .map(|alt| alt.into_iter().map(normalize_element).collect())
                .collect();
            if alts.len() == 1 && alts[0].len() == 1 {
                alts.pop().unwrap().pop().unwrap()
            } else {
                PatternElement::Group(alts)
            }
        }
        other => other,
    }
}

impl PatternElement {
    fn nullable(&self) -> bool {
        match self {
            PatternElement::Literal(_) | PatternElement::Var(_) => false,
            PatternElement::Optional(_) => true,
            PatternElement::Group(alts) => {
                alts.iter().any(|alt| alt.iter().all(PatternElement::nullable))
            }
        }
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a VariableName>) {
        match self {
            PatternElement::Literal(_) => {}
            PatternElement::Var(v) => {
                out.insert(v);
            }
            PatternElement::Group(alts) => {
                for el in alts.iter().flatten() {
                    el.collect_vars(out);
                }
            }
            PatternElement::Optional(inner) => inner.collect_vars(out),
        }
    }

    fn mandatory_vars(&self) -> BTreeSet<&VariableName> {
        match self {
            PatternElement::Literal(_) | PatternElement::Optional(_) => BTreeSet::new(),
            PatternElement::Var(v) => BTreeSet::from([v]),
            PatternElement::Group(alts) => {
                let mut iter = alts.iter().map(|alt| seq_mandatory_vars(alt));
                let first = iter.next().unwrap_or_default();
                iter.fold(first, |acc, s| acc.intersection(&s).copied().collect())
            }
        }
    }
}

fn seq_mandatory_vars(seq: &[PatternElement]) -> BTreeSet<&VariableName> {
    seq.iter().flat_map(PatternElement::mandatory_vars).collect()
}

impl Pattern {
    /// Collapse `??x` into `?x` and unwrap single-element groups.
    /// Idempotent.
    pub fn normalized(self) -> Pattern {
        Pattern {
            elements: self.elements.into_iter().map(normalize_element).collect(),
        }
    }

    /// True when the pattern matches the empty utterance.
    pub fn is_nullable(&self) -> bool {
        self.elements.iter().all(PatternElement::nullable)
    }

    /// Every variable mentioned anywhere in the pattern.
    pub fn variables(&self) -> BTreeSet<&VariableName> {
        let mut out = BTreeSet::new();
        for el in &self.elements {
            el.collect_vars(&mut out);
        }
        out
    }

    /// Variables that every match of the pattern binds.
    pub fn mandatory_variables(&self) -> BTreeSet<&VariableName> {
        seq_mandatory_vars(&self.elements)
    }

    /// Most times `var` can occur along one path through the pattern.
    pub fn max_occurrences(&self, var: &VariableName) -> usize {
        fn el(e: &PatternElement, v: &VariableName) -> usize {
            match e {
                PatternElement::Literal(_) => 0,
                PatternElement::Var(x) => usize::from(x == v),
                PatternElement::Group(alts) => alts.iter().map(|a| seq(a, v)).max().unwrap_or(0),
                PatternElement::Optional(inner) => el(inner, v),
            }
        }
        fn seq(items: &[PatternElement], v: &VariableName) -> usize {
            items.iter().map(|e| el(e, v)).sum()
        }
        seq(&self.elements, var)
    }

    /// Literal tokens in written order (all alternatives, optional or not).
    pub fn literals(&self) -> Vec<&Token> {
        fn walk<'a>(el: &'a PatternElement, out: &mut Vec<&'a Token>) {
            match el {
                PatternElement::Literal(t) => out.push(t),
                PatternElement::Var(_) => {}
                PatternElement::Group(alts) => alts.iter().flatten().for_each(|e| walk(e, out)),
                PatternElement::Optional(inner) => walk(inner, out),
            }
        }
        let mut out = Vec::new();
        self.elements.iter().for_each(|e| walk(e, &mut out));
        out
    }

    /// First alternative of every group, optionals dropped.
    pub fn first_reading(&self) -> Vec<PatternElement> {
        fn walk(el: &PatternElement, out: &mut Vec<PatternElement>) {
            match el {
                PatternElement::Literal(_) | PatternElement::Var(_) => out.push(el.clone()),
                PatternElement::Group(alts) => alts[0].iter().for_each(|e| walk(e, out)),
                PatternElement::Optional(_) => {}
            }
        }
        let mut out = Vec::new();
        self.elements.iter().for_each(|e| walk(e, &mut out));
        out
    }
}

fn write_seq(f: &mut fmt::Formatter<'_>, seq: &[PatternElement]) -> fmt::Result {
    for (i, el) in seq.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{el}")?;
    }
    Ok(())
}

impl fmt::Display for PatternElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternElement::Literal(t) => f.write_str(t.display()),
            PatternElement::Var(v) => write!(f, "{v}"),
            PatternElement::Group(alts) => {
                f.write_str("(")?;
                for (i, alt) in alts.iter().enumerate() {
                    f.write_str(if i == 0 { " " } else { " | " })?;
                    write_seq(f, alt)?;
                }
                f.write_str(" )")
            }
            PatternElement::Optional(inner) => write!(f, "?{inner}"),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_seq(f, &self.elements)
    }
}

/// Element of a canonical or target line.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TemplateElement {
    Literal(Token),
    Var(VariableName),
    OptionalVar(VariableName),
}

/// A flat line: literals, variables and optional variables only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Template {
    pub elements: Vec<TemplateElement>,
}

impl Template {
    /// Build from pattern elements, enforcing the template shape rules.
    pub fn from_elements(elements: &[PatternElement]) -> Result<Template, PatternError> {
        let mut out = Vec::with_capacity(elements.len());
        let mut seen = BTreeSet::new();
        for el in elements {
            let t = match el {
                PatternElement::Literal(t) => TemplateElement::Literal(t.clone()),
                PatternElement::Var(v) => TemplateElement::Var(v.clone()),
                PatternElement::Optional(inner) => match inner.as_ref() {
                    PatternElement::Var(v) => TemplateElement::OptionalVar(v.clone()),
                    PatternElement::Group(_) => return Err(PatternError::GroupInTemplate),
                    other => {
                        return Err(PatternError::OptionalLiteralInTemplate(other.to_string()))
                    }
                },
                PatternElement::Group(_) => return Err(PatternError::GroupInTemplate),
            };
            if let TemplateElement::Var(v) | TemplateElement::OptionalVar(v) = &t {
                if !seen.insert(v.clone()) {
                    return Err(PatternError::DuplicateTemplateVariable(v.clone()));
                }
            }
            out.push(t);
        }
        if out.is_empty() {
            return Err(PatternError::EmptyPattern);
        }
        Ok(Template { elements: out })
    }

    pub fn variables(&self) -> impl Iterator<Item = &VariableName> {
        self.elements.iter().filter_map(|e| match e {
            TemplateElement::Var(v) | TemplateElement::OptionalVar(v) => Some(v),
            TemplateElement::Literal(_) => None,
        })
    }

    pub fn mandatory_variables(&self) -> impl Iterator<Item = &VariableName> {
        self.elements.iter().filter_map(|e| match e {
            TemplateElement::Var(v) => Some(v),
            _ => None,
        })
    }

    pub fn is_optional(&self, var: &VariableName) -> bool {
        self.elements
            .iter()
            .any(|e| matches!(e, TemplateElement::OptionalVar(v) if v == var))
    }

    /// The template as a matchable pattern (stage-two parsing).
    pub fn to_pattern(&self) -> Pattern {
        Pattern {
            elements: self
                .elements
                .iter()
                .map(|e| match e {
                    TemplateElement::Literal(t) => PatternElement::Literal(t.clone()),
                    TemplateElement::Var(v) => PatternElement::Var(v.clone()),
                    TemplateElement::OptionalVar(v) => {
                        PatternElement::Optional(Box::new(PatternElement::Var(v.clone())))
                    }
                })
                .collect(),
        }
    }

    /// Normalized form: lowercased literals, single spaces, `$$v` / `?$$v`.
    pub fn key_string(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match e {
                TemplateElement::Literal(t) => out.push_str(t.norm()),
                TemplateElement::Var(v) => out.push_str(&v.to_string()),
                TemplateElement::OptionalVar(v) => {
                    out.push('?');
                    out.push_str(&v.to_string());
                }
            }
        }
        out
    }
}

impl fmt::Display for TemplateElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateElement::Literal(t) => f.write_str(t.display()),
            TemplateElement::Var(v) => write!(f, "{v}"),
            TemplateElement::OptionalVar(v) => write!(f, "?{v}"),
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Parse a canonical or target line.
pub fn parse_template(text: &str) -> Result<Template, PatternError> {
    let pattern = parse_pattern(text)?;
    Template::from_elements(&pattern.elements)
}
