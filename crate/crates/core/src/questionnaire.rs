//! Branching questionnaires: definitions, the per-interview state machine,
//! and response export.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diagnostic::Diagnostic;
use crate::engine::{translate_scoped, EngineError};
use crate::grammar::{compile_grammar, GrammarError, RecognitionGrammar};
use crate::project::{AssembledProject, CanonicalKey};
use crate::token::{tokenize, LanguageTag};

/// Routing target that ends the interview.
pub const END: &str = "END";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionnaireDef {
    pub id: String,
    #[serde(default)]
    pub title: BTreeMap<LanguageTag, String>,
    pub start_field: String,
    pub fields: Vec<FieldDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDef {
    pub id: String,
    pub heading: String,
    pub question_keys: Vec<CanonicalKey>,
    pub answers: Vec<AnswerOption>,
    /// answer id → field id or [`END`]
    pub routing: BTreeMap<String, String>,
    /// Ask for one rephrasing before accepting the first match in this field.
    #[serde(default)]
    pub require_rephrase_once: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerOption {
    pub id: String,
    pub labels: BTreeMap<LanguageTag, String>,
    pub icon: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<String>,
}

impl QuestionnaireDef {
    pub fn field(&self, id: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.id == id)
    }

    pub fn total_keys(&self) -> usize {
        self.fields.iter().map(|f| f.question_keys.len()).sum()
    }
}

impl FieldDef {
    pub fn scope(&self) -> BTreeSet<CanonicalKey> {
        self.question_keys.iter().cloned().collect()
    }

    pub fn answer(&self, id: &str) -> Option<&AnswerOption> {
        self.answers.iter().find(|a| a.id == id)
    }
}

/// Check a definition against a project. `path` locates the diagnostics.
pub fn check_questionnaire(def: &QuestionnaireDef, project: &AssembledProject, path: &str) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut error = |code, msg: String| diags.push(Diagnostic::error(code, msg, path, None));
    let mut ids = BTreeSet::new();
    for f in &def.fields {
        if f.id == END || !ids.insert(f.id.as_str()) {
            error("DuplicateField", format!("field id {:?} is reserved or used twice", f.id));
        }
    }
    if def.field(&def.start_field).is_none() {
        error("RoutingGap", format!("start_field {:?} is not a field", def.start_field));
    }
    let top: BTreeSet<&CanonicalKey> = project.top_units().iter().map(|u| &u.key).collect();
    for f in &def.fields {
        if f.question_keys.is_empty() || f.answers.is_empty() {
            error("EmptyField", format!("field {:?} needs question keys and answers", f.id));
        }
        for k in &f.question_keys {
            if !top.contains(k) {
                error(
                    "UnknownQuestionKey",
                    format!("field {:?}: {:?} is not a $$top canonical", f.id, k.as_str()),
                );
            }
        }
        let mut answer_ids = BTreeSet::new();
        for a in &f.answers {
            if !answer_ids.insert(a.id.as_str()) {
                error("DuplicateAnswer", format!("field {:?}: answer {:?} twice", f.id, a.id));
            }
            match f.routing.get(&a.id) {
                None => error("RoutingGap", format!("field {:?}: answer {:?} has no route", f.id, a.id)),
                Some(to) if to != END && !ids.contains(to.as_str()) => error(
                    "RoutingGap",
                    format!("field {:?}: answer {:?} routes to unknown field {to:?}", f.id, a.id),
                ),
                Some(_) => {}
            }
        }
        for answer in f.routing.keys() {
            if !answer_ids.contains(answer.as_str()) {
                error("RoutingGap", format!("field {:?}: route for unknown answer {answer:?}", f.id));
            }
        }
    }
    let mut reached = BTreeSet::new();
    let mut todo = vec![def.start_field.as_str()];
    while let Some(id) = todo.pop() {
        if id == END || !reached.insert(id) {
            continue;
        }
        if let Some(f) = def.field(id) {
            todo.extend(f.routing.values().map(String::as_str));
        }
    }
    for f in &def.fields {
        if !reached.contains(f.id.as_str()) {
            error("UnreachableField", format!("field {:?} cannot be reached from {:?}", f.id, def.start_field));
        }
    }
    for f in &def.fields {
        for a in &f.answers {
            for lang in project.target_languages() {
                if !a.labels.contains_key(lang) {
                    diags.push(Diagnostic::warning(
                        "MissingAnswerLabel",
                        format!("field {:?}: answer {:?} has no {lang} label", f.id, a.id),
                        path,
                        None,
                    ));
                }
            }
        }
    }
    diags
}

/// Recognition grammar restricted to one field's questions.
pub fn active_slice(def: &QuestionnaireDef, field: &str, project: &AssembledProject) -> Result<RecognitionGrammar, GrammarError> {
    let f = def.field(field).ok_or(GrammarError::EmptyScope)?;
    compile_grammar(project, Some(&f.scope()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalOutcome {
    /// Matched and translated; awaiting confirmation.
    Paraphrase,
    NoMatch,
    /// Matched, but the field asks for one rephrasing first.
    RephraseRequested,
    /// Matched, but the respondent-language translation failed.
    TranslationFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    FieldEntered,
    UtteranceProposed {
        raw: String,
        outcome: ProposalOutcome,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        paraphrase: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        translation: Option<String>,
    },
    Confirmed,
    Rejected,
    Answered {
        answer_id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// Milliseconds since the Unix epoch, as supplied by the caller.
    pub at: u64,
    pub field: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("the interview has ended")]
    SessionEnded,
    #[error("no paraphrase is waiting for confirmation")]
    NothingToConfirm,
    #[error("answers need a confirmed question first")]
    AnswerBeforeConfirm,
    #[error("{0:?} is not an answer of this field")]
    UnknownAnswer(String),
    #[error("{0:?} is not a target language of the project")]
    UnknownLanguage(String),
    #[error("field {0:?} is not in the questionnaire")]
    UnknownField(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::SessionEnded => "SessionEnded",
            SessionError::NothingToConfirm => "NothingToConfirm",
            SessionError::AnswerBeforeConfirm => "AnswerBeforeConfirm",
            SessionError::UnknownAnswer(_) => "UnknownAnswer",
            SessionError::UnknownLanguage(_) => "UnknownLanguage",
            SessionError::UnknownField(_) => "UnknownField",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Proposal {
    pub outcome: ProposalOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paraphrase: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub translation: Option<String>,
    /// Engine error code when the outcome is not `paraphrase`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<&'static str>,
}

/// Where the interview goes after an answer. `None` means it ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerResult {
    pub next_field: Option<String>,
}

/// A caller action, as replayed from a transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SessionInput {
    Propose { text: String },
    Confirm { accept: bool },
    Answer { answer_id: String },
}

/// One interview. Operations on a session are single-writer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub questionnaire: String,
    pub respondent_language: LanguageTag,
    /// A field id or [`END`].
    pub current_field: String,
    pub transcript: Vec<SessionEvent>,
    /// field id → answer id; a re-entered field keeps only its last answer.
    pub responses: BTreeMap<String, String>,
}

impl SessionState {
    pub fn start(
        def: &QuestionnaireDef,
        project: &AssembledProject,
        respondent_language: &str,
        session_id: String,
        now: u64,
    ) -> Result<SessionState, SessionError> {
        let lang = LanguageTag::new(respondent_language)
            .ok()
            .filter(|l| project.target_languages().contains(l))
            .ok_or_else(|| SessionError::UnknownLanguage(respondent_language.to_string()))?;
        def.field(&def.start_field)
            .ok_or_else(|| SessionError::UnknownField(def.start_field.clone()))?;
        Ok(SessionState {
            session_id,
            questionnaire: def.id.clone(),
            respondent_language: lang,
            current_field: def.start_field.clone(),
            transcript: vec![SessionEvent {
                at: now,
                field: def.start_field.clone(),
                kind: EventKind::FieldEntered,
            }],
            responses: BTreeMap::new(),
        })
    }

    pub fn is_ended(&self) -> bool {
        self.current_field == END
    }

    fn push(&mut self, now: u64, kind: EventKind) {
        // timestamps never go backwards
        let at = self.transcript.last().map_or(now, |e| e.at.max(now));
        self.transcript.push(SessionEvent {
            at,
            field: self.current_field.clone(),
            kind,
        });
    }

    fn active_field<'d>(&self, def: &'d QuestionnaireDef) -> Result<&'d FieldDef, SessionError> {
        if self.is_ended() {
            return Err(SessionError::SessionEnded);
        }
        def.field(&self.current_field)
            .ok_or_else(|| SessionError::UnknownField(self.current_field.clone()))
    }

    /// Events since the current field was last entered.
    fn current_visit(&self) -> &[SessionEvent] {
        let start = self
            .transcript
            .iter()
            .rposition(|e| e.kind == EventKind::FieldEntered)
            .unwrap_or(0);
        &self.transcript[start..]
    }

    /// Match `raw` against the current field's questions only.
    pub fn propose(
        &mut self,
        def: &QuestionnaireDef,
        project: &AssembledProject,
        raw: &str,
        now: u64,
    ) -> Result<Proposal, SessionError> {
        let field = self.active_field(def)?;
        let scope = field.scope();
        let lang = self.respondent_language.clone();
        let result = tokenize(raw)
            .map_err(|_| EngineError::EmptyUtterance)
            .and_then(|u| translate_scoped(project, &u, core::slice::from_ref(&lang), Some(&scope)));
        let proposal = match result {
            Err(e) => Proposal {
                outcome: ProposalOutcome::NoMatch,
                paraphrase: None,
                translation: None,
                error: Some(e.code()),
            },
            Ok(r) => {
                let already_rephrased = self.current_visit().iter().any(|e| {
                    matches!(
                        e.kind,
                        EventKind::UtteranceProposed { outcome: ProposalOutcome::RephraseRequested, .. }
                    )
                });
                match r.outputs.into_values().next().expect("one language requested") {
                    Err(e) => Proposal {
                        outcome: ProposalOutcome::TranslationFailed,
                        paraphrase: Some(r.paraphrase),
                        translation: None,
                        error: Some(e.code()),
                    },
                    Ok(_) if field.require_rephrase_once && !already_rephrased => Proposal {
                        outcome: ProposalOutcome::RephraseRequested,
                        paraphrase: Some(r.paraphrase),
                        translation: None,
                        error: None,
                    },
                    Ok(t) => Proposal {
                        outcome: ProposalOutcome::Paraphrase,
                        paraphrase: Some(r.paraphrase),
                        translation: Some(t),
                        error: None,
                    },
                }
            }
        };
        self.push(
            now,
            EventKind::UtteranceProposed {
                raw: raw.to_string(),
                outcome: proposal.outcome,
                paraphrase: proposal.paraphrase.clone(),
                translation: proposal.translation.clone(),
            },
        );
        Ok(proposal)
    }

    /// Accept or reject the pending paraphrase. Accepting returns the
    /// field's answer options.
    pub fn confirm(&mut self, def: &QuestionnaireDef, accept: bool, now: u64) -> Result<Vec<AnswerOption>, SessionError> {
        let field = self.active_field(def)?;
        let pending = matches!(
            self.transcript.last().map(|e| &e.kind),
            Some(EventKind::UtteranceProposed { outcome: ProposalOutcome::Paraphrase, .. })
        );
        if !pending {
            return Err(SessionError::NothingToConfirm);
        }
        let answers = field.answers.clone();
        if accept {
            self.push(now, EventKind::Confirmed);
            Ok(answers)
        } else {
            self.push(now, EventKind::Rejected);
            Ok(Vec::new())
        }
    }

    pub fn answer(&mut self, def: &QuestionnaireDef, answer_id: &str, now: u64) -> Result<AnswerResult, SessionError> {
        let field = self.active_field(def)?;
        if self.transcript.last().map(|e| &e.kind) != Some(&EventKind::Confirmed) {
            return Err(SessionError::AnswerBeforeConfirm);
        }
        if field.answer(answer_id).is_none() {
            return Err(SessionError::UnknownAnswer(answer_id.to_string()));
        }
        let next = field.routing[answer_id].clone();
        self.push(now, EventKind::Answered { answer_id: answer_id.to_string() });
        self.responses.insert(field.id.clone(), answer_id.to_string());
        self.current_field = next.clone();
        if next == END {
            return Ok(AnswerResult { next_field: None });
        }
        self.push(now, EventKind::FieldEntered);
        Ok(AnswerResult { next_field: Some(next) })
    }

    /// Apply one input, discarding its result.
    pub fn apply(
        &mut self,
        def: &QuestionnaireDef,
        project: &AssembledProject,
        input: &SessionInput,
        now: u64,
    ) -> Result<(), SessionError> {
        match input {
            SessionInput::Propose { text } => self.propose(def, project, text, now).map(drop),
            SessionInput::Confirm { accept } => self.confirm(def, *accept, now).map(drop),
            SessionInput::Answer { answer_id } => self.answer(def, answer_id, now).map(drop),
        }
    }

    /// The caller inputs that produced this transcript.
    pub fn inputs(&self) -> Vec<SessionInput> {
        self.transcript
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::FieldEntered => None,
                EventKind::UtteranceProposed { raw, .. } => Some(SessionInput::Propose { text: raw.clone() }),
                EventKind::Confirmed => Some(SessionInput::Confirm { accept: true }),
                EventKind::Rejected => Some(SessionInput::Confirm { accept: false }),
                EventKind::Answered { answer_id } => Some(SessionInput::Answer { answer_id: answer_id.clone() }),
            })
            .collect()
    }

    pub fn export(&self) -> ExportDocument {
        let mut records: Vec<ExportRecord> = Vec::new();
        let mut utterances: Vec<String> = Vec::new();
        let mut paraphrase = None;
        let mut translation = None;
        let mut entered_at = 0;
        for e in &self.transcript {
            match &e.kind {
                EventKind::FieldEntered => {
                    utterances.clear();
                    paraphrase = None;
                    translation = None;
                    entered_at = e.at;
                }
                EventKind::UtteranceProposed { raw, paraphrase: p, translation: t, .. } => {
                    utterances.push(raw.clone());
                    paraphrase = p.clone();
                    translation = t.clone();
                }
                EventKind::Confirmed | EventKind::Rejected => {}
                EventKind::Answered { answer_id } => {
                    let record = ExportRecord {
                        field: e.field.clone(),
                        answer_id: answer_id.clone(),
                        paraphrase: paraphrase.clone().unwrap_or_default(),
                        translation: translation.clone().unwrap_or_default(),
                        utterances: utterances.clone(),
                        entered_at,
                        answered_at: e.at,
                    };
                    // a re-entered field overwrites its record in place
                    match records.iter_mut().find(|r| r.field == e.field) {
                        Some(r) => *r = record,
                        None => records.push(record),
                    }
                }
            }
        }
        ExportDocument {
            session_id: self.session_id.clone(),
            questionnaire: self.questionnaire.clone(),
            respondent_language: self.respondent_language.clone(),
            status: if self.is_ended() { "ended" } else { "active" }.to_string(),
            records,
            transcript: self.transcript.clone(),
        }
    }
}

/// Rebuild a session by re-applying inputs; all events get timestamp `now`.
pub fn replay(
    def: &QuestionnaireDef,
    project: &AssembledProject,
    respondent_language: &str,
    session_id: String,
    inputs: &[SessionInput],
    now: u64,
) -> Result<SessionState, SessionError> {
    let mut s = SessionState::start(def, project, respondent_language, session_id, now)?;
    for input in inputs {
        s.apply(def, project, input, now)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub field: String,
    pub answer_id: String,
    /// Paraphrase of the last proposal before the answer.
    pub paraphrase: String,
    pub translation: String,
    /// Every utterance proposed during the visit, in order.
    pub utterances: Vec<String>,
    pub entered_at: u64,
    pub answered_at: u64,
}

/// One answered field per record, in first-visit order, plus the transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportDocument {
    pub session_id: String,
    pub questionnaire: String,
    pub respondent_language: LanguageTag,
    pub status: String,
    pub records: Vec<ExportRecord>,
    pub transcript: Vec<SessionEvent>,
}
