//! Blank target files for translators, and refreshing them as the source grows.

use alloc::collections::BTreeSet;
use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::project::{AssembledProject, CanonicalKey, TrLexEntry, TrPhraseUnit};
use crate::rules::{
    serialize_marked, serialize_rule_file, AttrValue, FileRole, LexFragment, LineSpan, PhraseFragment,
    RuleFile, TargetLine,
};
use crate::token::{LanguageTag, VariableName};

fn blank_unit(unit: &TrPhraseUnit, source: &LanguageTag, lang: &LanguageTag) -> PhraseFragment {
    let mut targets = BTreeMap::new();
    targets.insert(source.clone(), TargetLine::Template(unit.canonical.clone()));
    targets.insert(lang.clone(), TargetLine::Blank);
    PhraseFragment {
        category: unit.category.clone(),
        sources: alloc::vec::Vec::new(),
        targets,
        span: LineSpan::default(),
    }
}

fn blank_lexeme(lex: &TrLexEntry, source: &LanguageTag, lang: &LanguageTag) -> LexFragment {
    let mut attrs = BTreeMap::new();
    attrs.insert(source.clone(), AttrValue::Tokens(lex.canonical.clone()));
    attrs.insert(lang.clone(), AttrValue::Blank);
    LexFragment {
        category: lex.category.clone(),
        source: None,
        attrs,
        span: LineSpan::default(),
    }
}

/// The blank file as a rule file: every unit then every lexeme still
/// lacking a `lang` translation, in declaration order.
pub fn blank_rule_file(project: &AssembledProject, lang: &LanguageTag) -> RuleFile {
    let source = project.source_language();
    let mut file = RuleFile::new("", FileRole::Target(lang.clone()), source.clone());
    file.units = project
        .all_units()
        .into_iter()
        .filter(|u| !u.targets.contains_key(lang))
        .map(|u| blank_unit(u, source, lang))
        .collect();
    file.lexemes = project
        .all_lexemes()
        .into_iter()
        .filter(|l| !l.targets.contains_key(lang))
        .map(|l| blank_lexeme(l, source, lang))
        .collect();
    file
}

/// Text of a blank target file for `lang`, with `?` placeholders.
pub fn generate_blank_targets(project: &AssembledProject, lang: &LanguageTag) -> String {
    serialize_rule_file(&blank_rule_file(project, lang))
}

fn unit_key(frag: &PhraseFragment, canonical: &LanguageTag) -> Option<(VariableName, CanonicalKey)> {
    let t = frag.targets.get(canonical)?.template()?;
    Some((frag.category.clone(), CanonicalKey::of_template(t)))
}

fn lex_key(frag: &LexFragment, canonical: &LanguageTag) -> Option<(VariableName, CanonicalKey)> {
    let t = frag.attrs.get(canonical)?.tokens()?;
    Some((frag.category.clone(), CanonicalKey::of_tokens(t)))
}

/// Bring an existing target file up to date with the project.
///
/// Existing fragments keep their text and order; fragments whose canonical
/// left the source are kept behind a `# ORPHAN` line; canonicals with no
/// `lang` translation anywhere in the project are appended as blanks.
pub fn refresh_blank_targets(existing: &RuleFile, project: &AssembledProject, lang: &LanguageTag) -> String {
    let source = project.source_language();
    let unit_keys: BTreeSet<_> = project
        .all_units()
        .into_iter()
        .map(|u| (u.category.clone(), u.key.clone()))
        .collect();
    let lex_keys: BTreeSet<_> = project
        .all_lexemes()
        .into_iter()
        .map(|l| (l.category.clone(), l.key.clone()))
        .collect();
    let have_units: BTreeSet<_> = existing.units.iter().filter_map(|f| unit_key(f, source)).collect();
    let have_lexes: BTreeSet<_> = existing.lexemes.iter().filter_map(|f| lex_key(f, source)).collect();

    let mut file = existing.clone();
    file.canonical_language = source.clone();
    for u in project.all_units() {
        if !u.targets.contains_key(lang) && !have_units.contains(&(u.category.clone(), u.key.clone())) {
            file.units.push(blank_unit(u, source, lang));
        }
    }
    for l in project.all_lexemes() {
        if !l.targets.contains_key(lang) && !have_lexes.contains(&(l.category.clone(), l.key.clone())) {
            file.lexemes.push(blank_lexeme(l, source, lang));
        }
    }
    serialize_marked(
        &file,
        |f| unit_key(f, source).is_some_and(|k| !unit_keys.contains(&k)),
        |f| lex_key(f, source).is_some_and(|k| !lex_keys.contains(&k)),
    )
}
