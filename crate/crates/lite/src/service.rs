//! HTTP+JSON service over a loaded project: translation, sign translation
//! and questionnaire sessions.
//!
//! The project is an immutable snapshot behind an `Arc`; `POST /reload`
//! swaps in a new one while requests in flight finish on the old. A session
//! keeps the snapshot it started on. Operations on one session are
//! serialized by its mutex; distinct sessions run concurrently.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lite_core::engine::{translate_text, EngineError};
use lite_core::questionnaire::{
    AnswerOption, EventKind, ProposalOutcome, QuestionnaireDef, SessionError, SessionEvent, SessionInput, SessionState,
};
use lite_core::sign::{render_sigml, sign_translate, SignError, SignTable};
use lite_core::{tokenize, AssembledProject, CanonicalKey, Diagnostic, LanguageTag};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::manifest::{load_project, LoadedProject};
use crate::questionnaire::{export_json, export_jsonl, load_questionnaire};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub manifest: PathBuf,
    /// Questionnaires in addition to those the manifest lists.
    pub questionnaires: Vec<PathBuf>,
    /// Append-only session journal, replayed at startup.
    pub journal: Option<PathBuf>,
    pub max_sessions: usize,
}

impl ServiceConfig {
    pub fn new(manifest: PathBuf) -> Self {
        ServiceConfig {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            manifest,
            questionnaires: Vec::new(),
            journal: None,
            max_sessions: 10_000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("{0}")]
    Load(#[from] crate::manifest::LoadError),
    #[error("project has errors:\n{}", join_lines(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn join_lines(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

/// A validated project with its questionnaires and lexicons.
#[derive(Debug)]
pub struct Snapshot {
    loaded: LoadedProject,
}

impl Snapshot {
    pub fn load(config: &ServiceConfig) -> Result<Snapshot, ServeError> {
        let mut loaded = load_project(&config.manifest)?;
        for path in &config.questionnaires {
            let text = crate::manifest::read(path)?;
            let name = crate::manifest::display(path);
            match load_questionnaire(&text, &name) {
                Ok(def) => {
                    if let Some(p) = &loaded.project {
                        loaded
                            .diagnostics
                            .extend(lite_core::questionnaire::check_questionnaire(&def, p, &name));
                    }
                    loaded.questionnaires.push(def);
                }
                Err(d) => loaded.diagnostics.push(d),
            }
        }
        if loaded.ready().is_none() {
            let errors = loaded.diagnostics.into_iter().filter(Diagnostic::is_error).collect();
            return Err(ServeError::Invalid(errors));
        }
        Ok(Snapshot { loaded })
    }

    pub fn project(&self) -> &AssembledProject {
        self.loaded.ready().expect("checked at load")
    }

    pub fn id(&self) -> &str {
        &self.loaded.manifest.id
    }

    fn questionnaire(&self, id: &str) -> Option<&QuestionnaireDef> {
        self.loaded.questionnaire(id)
    }
}

struct Session {
    snapshot: Arc<Snapshot>,
    questionnaire: String,
    state: SessionState,
}

impl Session {
    fn def(&self) -> &QuestionnaireDef {
        self.snapshot.questionnaire(&self.questionnaire).expect("checked at start")
    }
}

type Clock = Box<dyn Fn() -> u64 + Send + Sync>;
type IdSource = Box<dyn Fn() -> String + Send + Sync>;

pub struct AppState {
    config: ServiceConfig,
    current: RwLock<Arc<Snapshot>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    journal: Option<Mutex<File>>,
    clock: Clock,
    ids: IdSource,
}

fn wall_clock() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// One journal line: a session start or one input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct JournalEntry {
    at: u64,
    session_id: String,
    #[serde(flatten)]
    op: JournalOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum JournalOp {
    Start { questionnaire: String, respondent_lang: String },
    Input { input: SessionInput },
}

impl AppState {
    /// Load the project, open the journal and replay it.
    pub fn new(config: ServiceConfig) -> Result<AppState, ServeError> {
        let snapshot = Arc::new(Snapshot::load(&config)?);
        let mut state = AppState {
            current: RwLock::new(snapshot),
            sessions: Mutex::new(HashMap::new()),
            journal: None,
            clock: Box::new(wall_clock),
            ids: Box::new(|| uuid::Uuid::new_v4().to_string()),
            config,
        };
        if let Some(path) = state.config.journal.clone() {
            if path.exists() {
                state.replay_journal(&path)?;
            }
            let file = OpenOptions::new().create(true).append(true).open(&path)?;
            state.journal = Some(Mutex::new(file));
        }
        Ok(state)
    }

    /// Replace the clock, e.g. with a fixed one in tests.
    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    /// Replace the session id source.
    pub fn with_ids(mut self, ids: impl Fn() -> String + Send + Sync + 'static) -> Self {
        self.ids = Box::new(ids);
        self
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock").clone()
    }

    /// Load a fresh snapshot and swap it in; the old one stays valid for
    /// requests and sessions that hold it.
    pub fn reload(&self) -> Result<Arc<Snapshot>, ServeError> {
        let fresh = Arc::new(Snapshot::load(&self.config)?);
        *self.current.write().expect("snapshot lock") = fresh.clone();
        Ok(fresh)
    }

    fn replay_journal(&mut self, path: &std::path::Path) -> Result<(), ServeError> {
        let snapshot = self.snapshot();
        let mut sessions: HashMap<String, Session> = HashMap::new();
        for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let Ok(entry) = serde_json::from_str::<JournalEntry>(&line) else {
                eprintln!("{}:{}: skipping unreadable journal line", path.display(), n + 1);
                continue;
            };
            match entry.op {
                JournalOp::Start { questionnaire, respondent_lang } => {
                    let Some(def) = snapshot.questionnaire(&questionnaire) else { continue };
                    if let Ok(state) =
                        SessionState::start(def, snapshot.project(), &respondent_lang, entry.session_id.clone(), entry.at)
                    {
                        sessions.insert(
                            entry.session_id,
                            Session { snapshot: snapshot.clone(), questionnaire, state },
                        );
                    }
                }
                JournalOp::Input { input } => {
                    if let Some(s) = sessions.get_mut(&entry.session_id) {
                        let def = s.snapshot.questionnaire(&s.questionnaire).expect("present at start");
                        if let Err(e) = s.state.apply(def, s.snapshot.project(), &input, entry.at) {
                            eprintln!("{}:{}: journal replay: {e}", path.display(), n + 1);
                        }
                    }
                }
            }
        }
        let map = self.sessions.get_mut().expect("sessions lock");
        for (id, s) in sessions {
            map.insert(id, Arc::new(Mutex::new(s)));
        }
        Ok(())
    }

    fn journal(&self, entry: &JournalEntry) {
        if let Some(j) = &self.journal {
            let mut f = j.lock().expect("journal lock");
            let line = serde_json::to_string(entry).expect("journal entries are plain data");
            if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
                eprintln!("journal write failed: {e}");
            }
        }
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session {id:?}")))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("sessions lock").len()
    }
}

/// Error body `{"code": ..., "message": ...}` with an HTTP status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub diagnostics: Vec<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), diagnostics: Vec::new() }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
    }
}

impl From<SignError> for ApiError {
    fn from(e: SignError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::SessionEnded | SessionError::NothingToConfirm | SessionError::AnswerBeforeConfirm => {
                StatusCode::CONFLICT
            }
            SessionError::UnknownAnswer(_) | SessionError::UnknownLanguage(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::UnknownField(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if !self.diagnostics.is_empty() {
            body["diagnostics"] = json!(self.diagnostics);
        }
        (self.status, Json(body)).into_response()
    }
}

/// JSON body extractor whose rejection uses the API error shape.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Body(v))
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e.body_text()))
    }
}

type Shared = State<Arc<AppState>>;
type ApiResult = Result<Response, ApiError>;

fn ok(v: impl Serialize) -> ApiResult {
    Ok(Json(v).into_response())
}

/// Text input: `text`, or the first entry of `nbest` (later hypotheses are ignored).
#[derive(Debug, Deserialize)]
struct Utterance {
    text: Option<String>,
    #[serde(default)]
    nbest: Vec<String>,
}

impl Utterance {
    fn text(self) -> Result<String, ApiError> {
        self.text
            .or_else(|| self.nbest.into_iter().next())
            .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", "request needs \"text\" or \"nbest\""))
    }
}

fn parse_lang(tag: &str, allowed: &[LanguageTag]) -> Result<LanguageTag, ApiError> {
    LanguageTag::new(tag)
        .ok()
        .filter(|l| allowed.contains(l))
        .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "UnknownLanguage", format!("{tag:?} is not a language of this project")))
}

async fn health(State(app): Shared) -> ApiResult {
    ok(json!({ "status": "ok", "project": app.snapshot().id() }))
}

async fn reload(State(app): Shared) -> ApiResult {
    match app.reload() {
        Ok(s) => ok(json!({ "status": "reloaded", "project": s.id() })),
        Err(e) => {
            let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ReloadFailed", "the previous project stays loaded");
            err.diagnostics = match e {
                ServeError::Invalid(d) => d.iter().map(ToString::to_string).collect(),
                other => vec![other.to_string()],
            };
            Err(err)
        }
    }
}

#[derive(Debug, Deserialize)]
struct TranslateRequest {
    #[serde(flatten)]
    utterance: Utterance,
    /// Defaults to every target language.
    langs: Option<Vec<String>>,
}

async fn translate(State(app): Shared, Body(req): Body<TranslateRequest>) -> ApiResult {
    let snap = app.snapshot();
    let project = snap.project();
    let langs = match req.langs {
        Some(ls) => ls.iter().map(|l| parse_lang(l, project.target_languages())).collect::<Result<Vec<_>, _>>()?,
        None => project.target_languages().to_vec(),
    };
    let r = translate_text(project, &req.utterance.text()?, &langs)?;
    let outputs: serde_json::Map<String, Value> = r
        .outputs
        .into_iter()
        .map(|(lang, out)| {
            let v = match out {
                Ok(text) => Value::String(text),
                Err(e) => json!({ "code": e.code(), "message": e.to_string() }),
            };
            (lang.to_string(), v)
        })
        .collect();
    ok(json!({ "paraphrase": r.paraphrase, "outputs": outputs }))
}

#[derive(Debug, Deserialize)]
struct SignRequest {
    #[serde(flatten)]
    utterance: Utterance,
    lang: String,
}

#[derive(Serialize)]
struct SignResponse<'a> {
    table: &'a SignTable,
    sigml: String,
}

async fn sign(State(app): Shared, Body(req): Body<SignRequest>) -> ApiResult {
    let snap = app.snapshot();
    let project = snap.project();
    let lang = parse_lang(&req.lang, &project.manifest().sign_languages)?;
    let text = req.utterance.text()?;
    let utt = tokenize(&text).map_err(|_| EngineError::EmptyUtterance)?;
    let table = sign_translate(project, &lang, &utt)?;
    let empty = Default::default();
    let lex = snap.loaded.lexicons.get(&lang).unwrap_or(&empty);
    let sigml = render_sigml(&table, lex)?;
    ok(SignResponse { table: &table, sigml })
}

#[derive(Debug, Deserialize)]
struct StartRequest {
    questionnaire: String,
    respondent_lang: String,
}

async fn start_session(State(app): Shared, Body(req): Body<StartRequest>) -> ApiResult {
    let snap = app.snapshot();
    let def = snap.questionnaire(&req.questionnaire).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "UnknownQuestionnaire", format!("no questionnaire {:?}", req.questionnaire))
    })?;
    let now = (app.clock)();
    let mut sessions = app.sessions.lock().expect("sessions lock");
    if sessions.len() >= app.config.max_sessions {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "TooManySessions", "session limit reached"));
    }
    let id = (app.ids)();
    let state = SessionState::start(def, snap.project(), &req.respondent_lang, id.clone(), now)?;
    let field = state.current_field.clone();
    let heading = def.field(&field).map(|f| f.heading.clone());
    app.journal(&JournalEntry {
        at: now,
        session_id: id.clone(),
        op: JournalOp::Start { questionnaire: req.questionnaire.clone(), respondent_lang: req.respondent_lang },
    });
    sessions.insert(
        id.clone(),
        Arc::new(Mutex::new(Session { snapshot: snap.clone(), questionnaire: req.questionnaire, state })),
    );
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id, "field": field, "heading": heading }))).into_response())
}

/// What the interviewer should do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Awaiting {
    Utterance,
    Confirmation,
    Answer,
    Nothing,
}

#[derive(Serialize)]
struct Pending<'a> {
    paraphrase: &'a str,
    translation: &'a str,
}

/// Everything a client needs to redraw an interview.
#[derive(Serialize)]
struct SessionView<'a> {
    session_id: &'a str,
    questionnaire: &'a str,
    respondent_language: &'a LanguageTag,
    status: &'static str,
    current_field: &'a str,
    heading: Option<&'a str>,
    questions: &'a [CanonicalKey],
    awaiting: Awaiting,
    #[serde(skip_serializing_if = "Option::is_none")]
    pending: Option<Pending<'a>>,
    answers: &'a [AnswerOption],
    visited: usize,
    total_fields: usize,
    responses: &'a std::collections::BTreeMap<String, String>,
    transcript: &'a [SessionEvent],
}

fn view(s: &Session) -> SessionView<'_> {
    let st = &s.state;
    let field = s.def().field(&st.current_field);
    let last = st.transcript.last().map(|e| &e.kind);
    let (awaiting, pending) = match last {
        _ if st.is_ended() => (Awaiting::Nothing, None),
        Some(EventKind::UtteranceProposed {
            outcome: ProposalOutcome::Paraphrase,
            paraphrase: Some(p),
            translation: Some(t),
            ..
        }) => (Awaiting::Confirmation, Some(Pending { paraphrase: p, translation: t })),
        Some(EventKind::Confirmed) => (Awaiting::Answer, None),
        _ => (Awaiting::Utterance, None),
    };
    let visited = {
        let mut seen = std::collections::BTreeSet::new();
        st.transcript
            .iter()
            .filter(|e| e.kind == EventKind::FieldEntered)
            .filter(|e| seen.insert(e.field.as_str()))
            .count()
    };
    SessionView {
        session_id: &st.session_id,
        questionnaire: &st.questionnaire,
        respondent_language: &st.respondent_language,
        status: if st.is_ended() { "ended" } else { "active" },
        current_field: &st.current_field,
        heading: field.map(|f| f.heading.as_str()),
        questions: field.map_or(&[], |f| f.question_keys.as_slice()),
        awaiting,
        pending,
        answers: match (awaiting, field) {
            (Awaiting::Answer, Some(f)) => &f.answers,
            _ => &[],
        },
        visited,
        total_fields: s.def().fields.len(),
        responses: &st.responses,
        transcript: &st.transcript,
    }
}

async fn get_session(State(app): Shared, Path(id): Path<String>) -> ApiResult {
    let s = app.session(&id)?;
    let s = s.lock().expect("session lock");
    ok(view(&s))
}

/// Apply one input under the session lock and journal it on success.
fn with_session<T>(
    app: &AppState,
    id: &str,
    input: SessionInput,
    f: impl FnOnce(&mut Session, u64) -> Result<T, SessionError>,
) -> Result<T, ApiError> {
    let s = app.session(id)?;
    let mut s = s.lock().expect("session lock");
    let now = (app.clock)();
    let out = f(&mut s, now)?;
    app.journal(&JournalEntry { at: now, session_id: id.to_string(), op: JournalOp::Input { input } });
    Ok(out)
}

async fn utterance(State(app): Shared, Path(id): Path<String>, Body(req): Body<Utterance>) -> ApiResult {
    let text = req.text()?;
    let input = SessionInput::Propose { text: text.clone() };
    let p = with_session(&app, &id, input, |s, now| {
        let snap = s.snapshot.clone();
        let def = snap.questionnaire(&s.questionnaire).expect("checked at start");
        s.state.propose(def, snap.project(), &text, now)
    })?;
    let mut body = json!({ "outcome": p.outcome });
    if let Some(x) = &p.paraphrase {
        body["paraphrase"] = json!(x);
    }
    if let Some(x) = &p.translation {
        body["translation"] = json!(x);
    }
    match p.outcome {
        ProposalOutcome::NoMatch => body["nomatch"] = json!(true),
        ProposalOutcome::RephraseRequested => body["rephrase"] = json!(true),
        _ => {}
    }
    if let Some(code) = p.error {
        body["error"] = json!(code);
    }
    ok(body)
}

#[derive(Debug, Deserialize)]
struct ConfirmRequest {
    accept: bool,
}

async fn confirm(State(app): Shared, Path(id): Path<String>, Body(req): Body<ConfirmRequest>) -> ApiResult {
    let input = SessionInput::Confirm { accept: req.accept };
    let (answers, question) = with_session(&app, &id, input, |s, now| {
        let snap = s.snapshot.clone();
        let def = snap.questionnaire(&s.questionnaire).expect("checked at start");
        let question = match s.state.transcript.last().map(|e| &e.kind) {
            Some(EventKind::UtteranceProposed { translation, .. }) => translation.clone(),
            _ => None,
        };
        let answers = s.state.confirm(def, req.accept, now)?;
        Ok((answers, question.filter(|_| req.accept)))
    })?;
    let mut body = json!({ "answers": answers });
    if let Some(q) = question {
        body["question"] = json!(q);
    }
    ok(body)
}

#[derive(Debug, Deserialize)]
struct AnswerRequest {
    answer_id: String,
}

async fn answer(State(app): Shared, Path(id): Path<String>, Body(req): Body<AnswerRequest>) -> ApiResult {
    let input = SessionInput::Answer { answer_id: req.answer_id.clone() };
    let next = with_session(&app, &id, input, |s, now| {
        let snap = s.snapshot.clone();
        let def = snap.questionnaire(&s.questionnaire).expect("checked at start");
        let r = s.state.answer(def, &req.answer_id, now)?;
        Ok(r.next_field.map(|f| (def.field(&f).map(|d| d.heading.clone()), f)))
    })?;
    match next {
        Some((heading, field)) => ok(json!({ "next_field": field, "heading": heading })),
        None => ok(json!({ "end": true })),
    }
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export(State(app): Shared, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> ApiResult {
    let s = app.session(&id)?;
    let doc = s.lock().expect("session lock").state.export();
    match q.format.as_deref() {
        None | Some("json") => {
            Ok(([(header::CONTENT_TYPE, "application/json")], export_json(&doc)).into_response())
        }
        Some("jsonl") => {
            Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], export_jsonl([&doc])).into_response())
        }
        Some(other) => Err(ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", format!("unknown export format {other:?}"))),
    }
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint")
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/reload", post(reload))
        .route("/translate", post(translate))
        .route("/sign/translate", post(sign))
        .route("/sessions", post(start_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/utterance", post(utterance))
        .route("/sessions/{id}/confirm", post(confirm))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/export", get(export))
        .fallback(not_found)
        .with_state(app)
}

/// Run until interrupted.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let addr = config.addr;
    let app = Arc::new(AppState::new(config)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("serving {} on http://{}", app.snapshot().id(), listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
