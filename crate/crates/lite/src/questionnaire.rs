//! Questionnaire definition files (TOML) and response export.

use lite_core::questionnaire::{ExportDocument, ExportRecord, QuestionnaireDef};
use lite_core::{Diagnostic, LanguageTag};
use serde::Serialize;

/// Parse a questionnaire definition. Cross-checks against a project are
/// done by `lite_core::questionnaire::check_questionnaire`.
pub fn load_questionnaire(text: &str, path: &str) -> Result<QuestionnaireDef, Diagnostic> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Diagnostic::error("QuestionnaireSyntax", e.message().to_string(), path, line)
    })
}

/// One session as a pretty-printed JSON document.
pub fn export_json(doc: &ExportDocument) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("export is plain data");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct FlatRecord<'a> {
    session_id: &'a str,
    questionnaire: &'a str,
    respondent_language: &'a LanguageTag,
    #[serde(flatten)]
    record: &'a ExportRecord,
}

/// One JSON object per answered field, one per line, for bulk analysis.
pub fn export_jsonl<'a>(docs: impl IntoIterator<Item = &'a ExportDocument>) -> String {
    let mut out = String::new();
    for doc in docs {
        for record in &doc.records {
            let flat = FlatRecord {
                session_id: &doc.session_id,
                questionnaire: &doc.questionnaire,
                respondent_language: &doc.respondent_language,
                record,
            };
            out.push_str(&serde_json::to_string(&flat).expect("export is plain data"));
            out.push('\n');
        }
    }
    out
}
