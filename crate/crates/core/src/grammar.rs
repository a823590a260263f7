//! Recognition grammars compiled from a project: counting, enumeration and
//! the `lite-bnf` and SRGS XML formats.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::pattern::{Pattern, PatternElement};
use crate::project::{AssembledProject, CanonicalKey};
use crate::token::VariableName;

/// Name of the start rule.
pub const START: &str = "top";

/// Regular expression over terminals and rule references.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GrammarExpr {
    Terminal(String),
    RuleRef(String),
    /// At least two items.
    Seq(Vec<GrammarExpr>),
    /// At least two items.
    Alt(Vec<GrammarExpr>),
    Opt(Box<GrammarExpr>),
}

impl GrammarExpr {
    /// Sequence, unwrapping a single item.
    pub fn seq(mut items: Vec<GrammarExpr>) -> GrammarExpr {
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            GrammarExpr::Seq(items)
        }
    }

    /// Alternation, unwrapping a single item.
    pub fn alt(mut items: Vec<GrammarExpr>) -> GrammarExpr {
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            GrammarExpr::Alt(items)
        }
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a GrammarExpr)) {
        f(self);
        match self {
            GrammarExpr::Seq(xs) | GrammarExpr::Alt(xs) => xs.iter().for_each(|x| x.visit(f)),
            GrammarExpr::Opt(x) => x.visit(f),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecognitionGrammar {
    pub rules: BTreeMap<String, GrammarExpr>,
    pub start: String,
    /// `xml:lang` of the SRGS document.
    pub locale: Option<String>,
}

impl RecognitionGrammar {
    pub fn terminals(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for e in self.rules.values() {
            e.visit(&mut |x| {
                if let GrammarExpr::Terminal(t) = x {
                    out.insert(t.as_str());
                }
            });
        }
        out
    }

    fn references(e: &GrammarExpr) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        e.visit(&mut |x| {
            if let GrammarExpr::RuleRef(r) = x {
                out.insert(r.as_str());
            }
        });
        out
    }

    /// Start present, references defined, no cycles.
    pub fn check(&self) -> Result<(), GrammarError> {
        if !self.rules.contains_key(&self.start) {
            return Err(GrammarError::UndefinedRule(self.start.clone()));
        }
        let mut state: BTreeMap<&str, bool> = BTreeMap::new();
        fn visit<'g>(
            g: &'g RecognitionGrammar,
            name: &'g str,
            state: &mut BTreeMap<&'g str, bool>,
        ) -> Result<(), GrammarError> {
            match state.get(name) {
                Some(true) => return Ok(()),
                Some(false) => return Err(GrammarError::CyclicRule(name.to_string())),
                None => {}
            }
            let expr = g.rules.get(name).ok_or_else(|| GrammarError::UndefinedRule(name.to_string()))?;
            state.insert(name, false);
            for r in RecognitionGrammar::references(expr) {
                visit(g, r, state)?;
            }
            state.insert(name, true);
            Ok(())
        }
        for name in self.rules.keys() {
            visit(self, name, &mut state)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("scope selects no $$top unit")]
    EmptyScope,
    #[error("scope key {0:?} is not a $$top canonical")]
    UnknownScopeKey(String),
    #[error("{0} and {1} both map to rule name {2:?}")]
    NameCollision(String, String, String),
    #[error("rule {0:?} is referenced but not defined")]
    UndefinedRule(String),
    #[error("rule {0:?} refers to itself")]
    CyclicRule(String),
    #[error("lite-bnf line {line}: {message}")]
    Syntax { line: usize, message: String },
}

impl GrammarError {
    pub fn code(&self) -> &'static str {
        match self {
            GrammarError::EmptyScope => "EmptyScope",
            GrammarError::UnknownScopeKey(_) => "UnknownScopeKey",
            GrammarError::NameCollision(..) => "NameCollision",
            GrammarError::UndefinedRule(_) => "UndefinedRule",
            GrammarError::CyclicRule(_) => "CyclicRule",
            GrammarError::Syntax { .. } => "GrammarSyntax",
        }
    }
}

pub fn rule_name(v: &VariableName) -> String {
    v.as_str().replace('-', "_")
}

fn element_expr(el: &PatternElement) -> GrammarExpr {
    match el {
        PatternElement::Literal(t) => GrammarExpr::Terminal(t.norm().to_string()),
        PatternElement::Var(v) => GrammarExpr::RuleRef(rule_name(v)),
        PatternElement::Group(alts) => {
            let mut items: Vec<GrammarExpr> = Vec::new();
            for alt in alts {
                let e = seq_expr(alt);
                // identical alternatives within one group are one derivation
                if !items.contains(&e) {
                    items.push(e);
                }
            }
            GrammarExpr::alt(items)
        }
        PatternElement::Optional(inner) => GrammarExpr::Opt(Box::new(element_expr(inner))),
    }
}

fn seq_expr(elements: &[PatternElement]) -> GrammarExpr {
    GrammarExpr::seq(elements.iter().map(element_expr).collect())
}

fn pattern_expr(p: &Pattern) -> GrammarExpr {
    seq_expr(&p.elements)
}

/// One rule per category reachable from `$$top`; `$$top` keeps only the
/// units whose key is in `scope`.
pub fn compile_grammar(
    project: &AssembledProject,
    scope: Option<&BTreeSet<CanonicalKey>>,
) -> Result<RecognitionGrammar, GrammarError> {
    if let Some(scope) = scope {
        for k in scope {
            if !project.top_units().iter().any(|u| &u.key == k) {
                return Err(GrammarError::UnknownScopeKey(k.as_str().to_string()));
            }
        }
    }
    let mut names: BTreeMap<String, &VariableName> = BTreeMap::new();
    for c in project.categories() {
        let n = rule_name(c);
        if let Some(other) = names.insert(n.clone(), c) {
            return Err(GrammarError::NameCollision(other.to_string(), c.to_string(), n));
        }
    }
    let mut rules = BTreeMap::new();
    let mut todo = vec![VariableName::top()];
    let mut seen = BTreeSet::new();
    while let Some(cat) = todo.pop() {
        if !seen.insert(cat.clone()) {
            continue;
        }
        let mut alts = Vec::new();
        for unit in project.units(&cat) {
            if cat.is_top() && scope.is_some_and(|s| !s.contains(&unit.key)) {
                continue;
            }
            for line in &unit.source_lines {
                alts.push(pattern_expr(line));
                todo.extend(line.variables().into_iter().cloned());
            }
        }
        for lex in project.lexemes(&cat) {
            alts.push(pattern_expr(&lex.source_pattern));
        }
        if alts.is_empty() {
            return Err(GrammarError::EmptyScope);
        }
        rules.insert(rule_name(&cat), GrammarExpr::alt(alts));
    }
    Ok(RecognitionGrammar {
        rules,
        start: START.to_string(),
        locale: project.manifest().source_locale.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageSize {
    /// Number of derivations from the start rule.
    pub count: BigUint,
    pub vocabulary: usize,
}

fn count_expr(e: &GrammarExpr, g: &RecognitionGrammar, memo: &mut BTreeMap<String, BigUint>) -> BigUint {
    match e {
        GrammarExpr::Terminal(_) => BigUint::one(),
        GrammarExpr::RuleRef(r) => count_rule(r, g, memo),
        GrammarExpr::Seq(xs) => xs.iter().fold(BigUint::one(), |acc, x| acc * count_expr(x, g, memo)),
        GrammarExpr::Alt(xs) => xs.iter().fold(BigUint::zero(), |acc, x| acc + count_expr(x, g, memo)),
        GrammarExpr::Opt(x) => count_expr(x, g, memo) + 1u32,
    }
}

fn count_rule(name: &str, g: &RecognitionGrammar, memo: &mut BTreeMap<String, BigUint>) -> BigUint {
    if let Some(c) = memo.get(name) {
        return c.clone();
    }
    let c = g.rules.get(name).map_or_else(BigUint::zero, |e| count_expr(e, g, memo));
    memo.insert(name.to_string(), c.clone());
    c
}

/// Derivation count, bottom-up, without enumerating. Assumes an acyclic grammar.
pub fn count_language(g: &RecognitionGrammar) -> LanguageSize {
    let mut memo = BTreeMap::new();
    LanguageSize {
        count: count_rule(&g.start, g, &mut memo),
        vocabulary: g.terminals().len(),
    }
}

/// Expression annotated with derivation counts for unranking.
#[derive(Debug)]
enum Counted {
    Terminal(String),
    Ref(Rc<Counted>),
    Seq(Vec<Counted>, BigUint),
    Alt(Vec<Counted>, BigUint),
    Opt(Box<Counted>, BigUint),
}

impl Counted {
    fn count(&self) -> BigUint {
        match self {
            Counted::Terminal(_) => BigUint::one(),
            Counted::Ref(r) => r.count(),
            Counted::Seq(_, c) | Counted::Alt(_, c) | Counted::Opt(_, c) => c.clone(),
        }
    }

    /// Rule bodies are built once and shared between references.
    fn build(e: &GrammarExpr, g: &RecognitionGrammar, memo: &mut BTreeMap<String, Rc<Counted>>) -> Counted {
        match e {
            GrammarExpr::Terminal(t) => Counted::Terminal(t.clone()),
            GrammarExpr::RuleRef(r) => {
                if let Some(c) = memo.get(r) {
                    return Counted::Ref(c.clone());
                }
                let body = match g.rules.get(r) {
                    Some(x) => Counted::build(x, g, memo),
                    None => Counted::Alt(Vec::new(), BigUint::zero()),
                };
                let rc = Rc::new(body);
                memo.insert(r.clone(), rc.clone());
                Counted::Ref(rc)
            }
            GrammarExpr::Seq(xs) => {
                let items: Vec<Counted> = xs.iter().map(|x| Counted::build(x, g, memo)).collect();
                let c = items.iter().fold(BigUint::one(), |a, x| a * x.count());
                Counted::Seq(items, c)
            }
            GrammarExpr::Alt(xs) => {
                let items: Vec<Counted> = xs.iter().map(|x| Counted::build(x, g, memo)).collect();
                let c = items.iter().fold(BigUint::zero(), |a, x| a + x.count());
                Counted::Alt(items, c)
            }
            GrammarExpr::Opt(x) => {
                let inner = Counted::build(x, g, memo);
                let c = inner.count() + 1u32;
                Counted::Opt(Box::new(inner), c)
            }
        }
    }

    /// Append derivation number `i` (< count) to `out`.
    fn unrank(&self, mut i: BigUint, out: &mut Vec<String>) {
        match self {
            Counted::Terminal(t) => out.push(t.clone()),
            Counted::Ref(r) => r.unrank(i, out),
            Counted::Alt(xs, _) => {
                for x in xs {
                    let c = x.count();
                    if i < c {
                        return x.unrank(i, out);
                    }
                    i -= c;
                }
                unreachable!("index below count");
            }
            Counted::Opt(x, _) => {
                if !i.is_zero() {
                    x.unrank(i - 1u32, out);
                }
            }
            Counted::Seq(xs, _) => {
                // first item is the most significant digit
                let mut digits = Vec::with_capacity(xs.len());
                for x in xs.iter().rev() {
                    let c = x.count();
                    digits.push(&i % &c);
                    i /= c;
                }
                for (x, d) in xs.iter().zip(digits.into_iter().rev()) {
                    x.unrank(d, out);
                }
            }
        }
    }
}

/// Derivations of the start rule in index order: alternatives in written
/// order, an absent optional before a present one, earlier positions
/// varying slowest.
pub struct Enumeration {
    root: Counted,
    next: BigUint,
    end: BigUint,
}

impl Iterator for Enumeration {
    type Item = Vec<String>;

    fn next(&mut self) -> Option<Vec<String>> {
        if self.next >= self.end {
            return None;
        }
        let mut out = Vec::new();
        self.root.unrank(self.next.clone(), &mut out);
        self.next += 1u32;
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (&self.end - &self.next).to_usize().unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

/// At most `limit` derivations, each as a list of terminals.
pub fn enumerate_language(g: &RecognitionGrammar, limit: usize) -> Enumeration {
    let root = match g.rules.get(&g.start) {
        Some(e) => Counted::build(e, g, &mut BTreeMap::new()),
        None => Counted::Alt(Vec::new(), BigUint::zero()),
    };
    let end = core::cmp::min(root.count(), BigUint::from(limit));
    Enumeration {
        root,
        next: BigUint::zero(),
        end,
    }
}

/// Derivation `index` of the start rule, if it exists.
pub fn nth_sentence(g: &RecognitionGrammar, index: &BigUint) -> Option<Vec<String>> {
    let root = Counted::build(g.rules.get(&g.start)?, g, &mut BTreeMap::new());
    if *index >= root.count() {
        return None;
    }
    let mut out = Vec::new();
    root.unrank(index.clone(), &mut out);
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrammarFormat {
    LiteBnf,
    SrgsXml,
}

pub fn emit_grammar(g: &RecognitionGrammar, format: GrammarFormat) -> String {
    match format {
        GrammarFormat::LiteBnf => emit_lite_bnf(g),
        GrammarFormat::SrgsXml => emit_srgs(g),
    }
}

const BNF_SPECIAL: &[char] = &['(', ')', '[', ']', '|', ';', '=', '$', '"', '@', '\\'];

fn bnf_terminal(t: &str, out: &mut String) {
    if t.is_empty() || t.contains(BNF_SPECIAL) || t.contains(char::is_whitespace) {
        out.push('"');
        for c in t.chars() {
            if c == '"' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('"');
    } else {
        out.push_str(t);
    }
}

fn bnf_expr(e: &GrammarExpr, nested: bool, out: &mut String) {
    match e {
        GrammarExpr::Terminal(t) => bnf_terminal(t, out),
        GrammarExpr::RuleRef(r) => {
            out.push('$');
            out.push_str(r);
        }
        GrammarExpr::Seq(xs) => {
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                bnf_expr(x, true, out);
            }
        }
        GrammarExpr::Alt(xs) => {
            if nested {
                out.push_str("( ");
            }
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                bnf_expr(x, false, out);
            }
            if nested {
                out.push_str(" )");
            }
        }
        GrammarExpr::Opt(x) => {
            out.push_str("[ ");
            bnf_expr(x, false, out);
            out.push_str(" ]");
        }
    }
}

/// `@start <name> ;` then one `name = expr ;` line per rule, start rule
/// first, the rest by name.
pub fn emit_lite_bnf(g: &RecognitionGrammar) -> String {
    let mut out = format!("@start {} ;\n", g.start);
    let ordered = g
        .rules
        .get_key_value(&g.start)
        .into_iter()
        .chain(g.rules.iter().filter(|(n, _)| **n != g.start));
    for (name, e) in ordered {
        out.push_str(name);
        out.push_str(" = ");
        bnf_expr(e, false, &mut out);
        out.push_str(" ;\n");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum BnfToken {
    Sym(char),
    Ref(String),
    Word(String),
    Start,
}

fn bnf_lex(line: &str, line_no: usize) -> Result<Vec<BnfToken>, GrammarError> {
    let syntax = |message: String| GrammarError::Syntax { line: line_no, message };
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if "()[]|;=".contains(c) {
            chars.next();
            out.push(BnfToken::Sym(c));
        } else if c == '"' {
            chars.next();
            let mut w = String::new();
            loop {
                match chars.next() {
                    Some('\\') => w.push(chars.next().ok_or_else(|| syntax("dangling escape".into()))?),
                    Some('"') => break,
                    Some(c) => w.push(c),
                    None => return Err(syntax("unterminated quoted terminal".into())),
                }
            }
            out.push(BnfToken::Word(w));
        } else {
            let mut w = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() || BNF_SPECIAL.contains(&c) && !(w.is_empty() && (c == '$' || c == '@')) {
                    break;
                }
                w.push(c);
                chars.next();
            }
            if let Some(r) = w.strip_prefix('$') {
                if r.is_empty() {
                    return Err(syntax("empty rule reference".into()));
                }
                out.push(BnfToken::Ref(r.to_string()));
            } else if w == "@start" {
                out.push(BnfToken::Start);
            } else if w.starts_with('@') || w.is_empty() {
                return Err(syntax(format!("unexpected {c:?}")));
            } else {
                out.push(BnfToken::Word(w));
            }
        }
    }
    Ok(out)
}

struct BnfParser {
    tokens: Vec<BnfToken>,
    pos: usize,
    line: usize,
}

impl BnfParser {
    fn err(&self, message: &str) -> GrammarError {
        GrammarError::Syntax {
            line: self.line,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<&BnfToken> {
        self.tokens.get(self.pos)
    }

    fn alt(&mut self) -> Result<GrammarExpr, GrammarError> {
        let mut items = vec![self.seq()?];
        while self.peek() == Some(&BnfToken::Sym('|')) {
            self.pos += 1;
            items.push(self.seq()?);
        }
        Ok(GrammarExpr::alt(items))
    }

    fn seq(&mut self) -> Result<GrammarExpr, GrammarError> {
        let mut items = Vec::new();
        loop {
            let item = match self.peek().cloned() {
                Some(BnfToken::Word(w)) => GrammarExpr::Terminal(w),
                Some(BnfToken::Ref(r)) => GrammarExpr::RuleRef(r),
                Some(BnfToken::Sym('(')) => {
                    self.pos += 1;
                    let e = self.alt()?;
                    if self.peek() != Some(&BnfToken::Sym(')')) {
                        return Err(self.err("expected )"));
                    }
                    e
                }
                Some(BnfToken::Sym('[')) => {
                    self.pos += 1;
                    let e = self.alt()?;
                    if self.peek() != Some(&BnfToken::Sym(']')) {
                        return Err(self.err("expected ]"));
                    }
                    GrammarExpr::Opt(Box::new(e))
                }
                _ => break,
            };
            self.pos += 1;
            items.push(item);
        }
        if items.is_empty() {
            return Err(self.err("empty expression"));
        }
        Ok(GrammarExpr::seq(items))
    }
}

/// Parse the output of [`emit_lite_bnf`].
pub fn parse_lite_bnf(text: &str) -> Result<RecognitionGrammar, GrammarError> {
    let mut start = None;
    let mut rules = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let tokens = bnf_lex(line, line_no)?;
        if tokens.is_empty() {
            continue;
        }
        let mut p = BnfParser { tokens, pos: 0, line: line_no };
        match (p.tokens.first().cloned(), p.tokens.get(1).cloned()) {
            (Some(BnfToken::Start), Some(BnfToken::Word(name))) => {
                if p.tokens.get(2) != Some(&BnfToken::Sym(';')) || p.tokens.len() != 3 {
                    return Err(p.err("expected `@start name ;`"));
                }
                start = Some(name);
            }
            (Some(BnfToken::Word(name)), Some(BnfToken::Sym('='))) => {
                p.pos = 2;
                let e = p.alt()?;
                if p.peek() != Some(&BnfToken::Sym(';')) || p.pos + 1 != p.tokens.len() {
                    return Err(p.err("expected ; at end of rule"));
                }
                if rules.insert(name.clone(), e).is_some() {
                    return Err(p.err(&format!("rule {name} defined twice")));
                }
            }
            _ => return Err(p.err("expected `name = expr ;`")),
        }
    }
    let g = RecognitionGrammar {
        rules,
        start: start.ok_or(GrammarError::Syntax {
            line: 1,
            message: "missing @start line".into(),
        })?,
        locale: None,
    };
    g.check()?;
    Ok(g)
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn srgs_expr(e: &GrammarExpr, out: &mut String) {
    match e {
        GrammarExpr::Terminal(t) => out.push_str(&escape_xml(t)),
        GrammarExpr::RuleRef(r) => out.push_str(&format!("<ruleref uri=\"#{r}\"/>")),
        GrammarExpr::Seq(xs) => {
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                srgs_expr(x, out);
            }
        }
        GrammarExpr::Alt(xs) => {
            out.push_str("<one-of>");
            for x in xs {
                out.push_str("<item>");
                srgs_expr(x, out);
                out.push_str("</item>");
            }
            out.push_str("</one-of>");
        }
        GrammarExpr::Opt(x) => {
            out.push_str("<item repeat=\"0-1\">");
            srgs_expr(x, out);
            out.push_str("</item>");
        }
    }
}

/// SRGS 1.0 XML form, one `<rule>` per category, the start rule as root.
pub fn emit_srgs(g: &RecognitionGrammar) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<grammar xmlns=\"http://www.w3.org/2001/06/grammar\" version=\"1.0\" mode=\"voice\"");
    if let Some(l) = &g.locale {
        out.push_str(&format!(" xml:lang=\"{}\"", escape_xml(l)));
    }
    out.push_str(&format!(" root=\"{}\">\n", escape_xml(&g.start)));
    for (name, e) in &g.rules {
        let scope = if *name == g.start { "public" } else { "private" };
        out.push_str(&format!("  <rule id=\"{name}\" scope=\"{scope}\">"));
        srgs_expr(e, &mut out);
        out.push_str("</rule>\n");
    }
    out.push_str("</grammar>\n");
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::engine::{match_side, Side};
    use crate::project::tests::cafe;
    use crate::token::{tokenize, Token};
    use proptest::prelude::*;

    /// Every derivation, by structural recursion (independent of unranking).
    pub fn brute_force(g: &RecognitionGrammar) -> Vec<Vec<String>> {
        fn all(e: &GrammarExpr, g: &RecognitionGrammar) -> Vec<Vec<String>> {
            match e {
                GrammarExpr::Terminal(t) => vec![vec![t.clone()]],
                GrammarExpr::RuleRef(r) => all(&g.rules[r], g),
                GrammarExpr::Alt(xs) => xs.iter().flat_map(|x| all(x, g)).collect(),
                GrammarExpr::Opt(x) => {
                    let mut v = vec![Vec::new()];
                    v.extend(all(x, g));
                    v
                }
                GrammarExpr::Seq(xs) => xs.iter().fold(vec![Vec::new()], |acc, x| {
                    let tails = all(x, g);
                    acc.iter()
                        .flat_map(|a| {
                            tails.iter().map(move |t| {
                                let mut s = a.clone();
                                s.extend(t.iter().cloned());
                                s
                            })
                        })
                        .collect()
                }),
            }
        }
        all(&g.rules[&g.start], g)
    }

    #[test]
    fn cafe_grammar() {
        let p = cafe();
        let g = compile_grammar(&p, None).unwrap();
        assert_eq!(g.rules.keys().collect::<Vec<_>>(), ["food_or_drink", "top"]);
        let vocab: Vec<_> = g.terminals().into_iter().collect();
        let mut expected = vec![
            "hello", "hi", "i", "want", "would", "like", "could", "can", "have", "a", "coca-cola", "coke", "please",
        ];
        expected.sort();
        assert_eq!(vocab, expected);
        let size = count_language(&g);
        assert_eq!(size.count, BigUint::from(18u32));
        assert_eq!(size.vocabulary, 13);
        let all: Vec<_> = enumerate_language(&g, 100).collect();
        assert_eq!(all, brute_force(&g));
        assert_eq!(all.len(), 18);
        assert!(all.contains(&vec!["hi".to_string()]));
        assert!(all.contains(&"can i have a coke".split(' ').map(String::from).collect()));
        assert_eq!(enumerate_language(&g, 1).count(), 1);
        assert_eq!(enumerate_language(&g, 1).next().unwrap(), ["hello"]);
        let bnf = emit_lite_bnf(&g);
        assert!(bnf.contains("food_or_drink = a ( coca-cola | coke ) ;\n"), "{bnf}");
        assert!(bnf.starts_with("@start top ;\ntop = hello | hi | i ( want | would like ) $food_or_drink [ please ] |"));
    }

    #[test]
    fn scoping() {
        let p = cafe();
        let hello: BTreeSet<_> = [CanonicalKey::normalize("hello")].into();
        let g = compile_grammar(&p, Some(&hello)).unwrap();
        let all: Vec<_> = enumerate_language(&g, 100).map(|s| s.join(" ")).collect();
        assert_eq!(all, ["hello", "hi"]);
        assert_eq!(emit_lite_bnf(&g), "@start top ;\ntop = hello | hi ;\n");
        let none = BTreeSet::new();
        assert_eq!(compile_grammar(&p, Some(&none)), Err(GrammarError::EmptyScope));
        let bad: BTreeSet<_> = [CanonicalKey::normalize("nope")].into();
        assert_eq!(compile_grammar(&p, Some(&bad)).unwrap_err().code(), "UnknownScopeKey");
    }

    #[test]
    fn language_equivalence_on_cafe() {
        let p = cafe();
        let g = compile_grammar(&p, None).unwrap();
        for s in enumerate_language(&g, 1000) {
            let toks: Vec<Token> = s.iter().map(|w| Token::new(w).unwrap()).collect();
            assert!(!match_side(&p, &toks, Side::Source, None).is_empty(), "{s:?}");
        }
        for s in ["i want", "please", "hello hi", "could i have a coke a coke"] {
            let u = tokenize(s).unwrap();
            assert!(match_side(&p, &u.tokens, Side::Source, None).is_empty());
        }
    }

    #[test]
    fn single_sentence() {
        let mut rules = BTreeMap::new();
        rules.insert("top".into(), GrammarExpr::Terminal("yes".into()));
        let g = RecognitionGrammar { rules, start: "top".into(), locale: None };
        assert_eq!(count_language(&g).count, BigUint::one());
        assert_eq!(emit_lite_bnf(&g), "@start top ;\ntop = yes ;\n");
    }

    #[test]
    fn srgs_is_wellformed() {
        let mut p = cafe().manifest().clone();
        p.source_locale = Some("en-US".into());
        let g = compile_grammar(&cafe(), None).unwrap();
        let xml = emit_srgs(&RecognitionGrammar { locale: p.source_locale.clone(), ..g });
        let doc = roxmltree::Document::parse(&xml).unwrap();
        let root = doc.root_element();
        assert_eq!(root.attribute("root"), Some("top"));
        let rules: Vec<_> = root.children().filter(|n| n.has_tag_name("rule")).collect();
        assert_eq!(rules.len(), 2);
        assert!(xml.contains("<ruleref uri=\"#food_or_drink\"/>"));
        assert!(xml.contains("<item repeat=\"0-1\">please</item>"));
    }

    #[test]
    fn bnf_rejects_garbage() {
        assert!(parse_lite_bnf("top = ;\n@start top ;").is_err());
        assert!(parse_lite_bnf("@start top ;\ntop = $missing ;\n").is_err());
        assert!(parse_lite_bnf("@start top ;\ntop = a $top ;\n").is_err());
        assert!(parse_lite_bnf("top = a ;\n").is_err());
    }

    fn arb_terminal() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-z]{1,3}",
            Just("s'il".to_string()),
            Just("a(b".to_string()),
            Just("q\"x".to_string()),
            Just("$x".to_string()),
            Just("@at".to_string()),
            Just("é;".to_string()),
        ]
    }

    fn arb_expr(refs: Vec<String>) -> impl Strategy<Value = GrammarExpr> {
        let leaf = if refs.is_empty() {
            arb_terminal().prop_map(GrammarExpr::Terminal).boxed()
        } else {
            prop_oneof![
                3 => arb_terminal().prop_map(GrammarExpr::Terminal),
                1 => proptest::sample::select(refs).prop_map(GrammarExpr::RuleRef),
            ]
            .boxed()
        };
        leaf.prop_recursive(3, 16, 3, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 2..4).prop_map(GrammarExpr::Seq),
                proptest::collection::vec(inner.clone(), 2..4).prop_map(GrammarExpr::Alt),
                inner.prop_filter("no nested optionals", |e| !matches!(e, GrammarExpr::Opt(_)))
                    .prop_map(|e| GrammarExpr::Opt(Box::new(e))),
            ]
        })
    }

    /// Flatten nested Seq-in-Seq and Alt-in-Alt, which the emitter cannot
    /// distinguish from their flattened forms.
    fn normalize(e: GrammarExpr) -> GrammarExpr {
        match e {
            GrammarExpr::Seq(xs) => GrammarExpr::seq(
                xs.into_iter()
                    .map(normalize)
                    .flat_map(|x| match x {
                        GrammarExpr::Seq(ys) => ys,
                        x => vec![x],
                    })
                    .collect(),
            ),
            GrammarExpr::Alt(xs) => GrammarExpr::alt(
                xs.into_iter()
                    .map(normalize)
                    .flat_map(|x| match x {
                        GrammarExpr::Alt(ys) => ys,
                        x => vec![x],
                    })
                    .collect(),
            ),
            GrammarExpr::Opt(x) => GrammarExpr::Opt(Box::new(normalize(*x))),
            e => e,
        }
    }

    fn arb_grammar() -> impl Strategy<Value = RecognitionGrammar> {
        (arb_expr(vec![]), arb_expr(vec!["leaf".into()])).prop_map(|(leaf, top)| {
            let mut rules = BTreeMap::new();
            rules.insert("leaf".to_string(), normalize(leaf));
            rules.insert("top".to_string(), normalize(top));
            RecognitionGrammar { rules, start: "top".into(), locale: None }
        })
    }

    proptest! {
        #[test]
        fn bnf_round_trip(g in arb_grammar()) {
            let text = emit_lite_bnf(&g);
            let back = parse_lite_bnf(&text).unwrap();
            prop_assert_eq!(emit_lite_bnf(&back), text);
            prop_assert_eq!(back.rules, g.rules);
        }

        #[test]
        fn count_matches_brute_force(g in arb_grammar()) {
            let size = count_language(&g);
            let all = brute_force(&g);
            prop_assert_eq!(size.count.clone(), BigUint::from(all.len()));
            let limit = all.len().min(5000);
            let listed: Vec<_> = enumerate_language(&g, limit).collect();
            prop_assert_eq!(&listed[..], &all[..limit]);
        }
    }
}
