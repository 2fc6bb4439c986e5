//! JSON-over-HTTP access to the simulator and the checker.
//!
//! A session holds a loaded model and the run stepped so far. Every
//! response that describes a session carries its revision; stepping names
//! the revision its transition listing came from, and a mismatch is
//! answered with 409 instead of firing whatever now sits at that index.
//! Verification runs as a background job polled by id and never touches
//! the session's run.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/api/v1/sessions` | model text or corpus config |
//! | GET, DELETE | `/api/v1/sessions/{sid}` | |
//! | GET | `/api/v1/sessions/{sid}/state` | |
//! | GET | `/api/v1/sessions/{sid}/enabled` | |
//! | POST | `/api/v1/sessions/{sid}/step` | `{revision, index}` |
//! | POST | `/api/v1/sessions/{sid}/undo`, `/reset` | |
//! | GET | `/api/v1/sessions/{sid}/trace` | run so far as a trace file |
//! | POST | `/api/v1/sessions/{sid}/trace` | install a job's trace |
//! | GET, POST | `/api/v1/sessions/{sid}/bookmarks` | |
//! | POST | `/api/v1/sessions/{sid}/bookmarks/{name}/goto` | |
//! | POST | `/api/v1/sessions/{sid}/checks` | start a job |
//! | GET | `/api/v1/jobs/{jid}` | poll |
//! | GET | `/api/v1/jobs/{jid}/trace` | full trace file |

pub mod api;
pub mod error;
pub mod session;

use api::*;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use error::ApiError;
use masgraph::abstraction::{check_with_abstraction, AbstractionSpec, Outcome};
use masgraph::checker::{self, Formula, Options, Stats, Trace};
use masgraph::textlang::{self, Model};
use masgraph::votecorpus::{self, Config, Property, SpecName};
use session::Session;
use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Steps of a verification trace included in a job result.
    pub trace_cap: usize,
    pub mem_budget: usize,
    pub threads: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            trace_cap: 200,
            mem_budget: checker::DEFAULT_BUDGET,
            threads: 1,
        }
    }
}

enum Job {
    Running,
    Done(Box<CheckResult>, Option<Trace>),
    Failed(serde_json::Value),
}

struct JobEntry {
    session: String,
    model: Arc<Model>,
    job: Job,
}

struct Inner {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    jobs: Mutex<HashMap<String, JobEntry>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig) -> AppState {
        AppState(Arc::new(Inner {
            config,
            sessions: Mutex::default(),
            jobs: Mutex::default(),
        }))
    }

    fn session(&self, sid: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.0
            .sessions
            .lock()
            .unwrap()
            .get(sid)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("session {sid}")))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/sessions", post(create_session))
        .route("/api/v1/sessions/{sid}", get(get_state).delete(delete_session))
        .route("/api/v1/sessions/{sid}/state", get(get_state))
        .route("/api/v1/sessions/{sid}/enabled", get(get_enabled))
        .route("/api/v1/sessions/{sid}/step", post(step))
        .route("/api/v1/sessions/{sid}/undo", post(undo))
        .route("/api/v1/sessions/{sid}/reset", post(reset))
        .route("/api/v1/sessions/{sid}/trace", get(session_trace).post(load_trace))
        .route("/api/v1/sessions/{sid}/bookmarks", get(list_bookmarks).post(add_bookmark))
        .route("/api/v1/sessions/{sid}/bookmarks/{name}/goto", post(goto_bookmark))
        .route("/api/v1/sessions/{sid}/checks", post(start_check))
        .route("/api/v1/jobs/{jid}", get(get_job))
        .route("/api/v1/jobs/{jid}/trace", get(job_trace))
        .with_state(state)
}

/// Serve on `addr` until the process ends.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(config))).await
}

fn view(sid: &str, s: &Session) -> StateView {
    StateView::new(sid, s.revision(), &s.model.graph, s.states())
}

type Reply<T> = Result<Json<T>, ApiError>;

async fn create_session(State(st): State<AppState>, Json(req): Json<CreateSession>) -> Result<impl IntoResponse, ApiError> {
    let session = match (req.model, req.corpus) {
        (Some(text), None) => Session::new(textlang::load_model(&text)?, None)?,
        (None, Some(c)) => {
            let cfg: Config = c.config.parse()?;
            Session::new(votecorpus::load(&cfg, &c.deviations)?, Some(cfg))?
        }
        _ => return Err(ApiError::invalid("give exactly one of 'model' and 'corpus'")),
    };
    let sid = uuid::Uuid::new_v4().to_string();
    let body = Created {
        session: sid.clone(),
        revision: session.revision(),
    };
    st.0.sessions.lock().unwrap().insert(sid, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn delete_session(State(st): State<AppState>, Path(sid): Path<String>) -> Result<StatusCode, ApiError> {
    st.0.sessions
        .lock()
        .unwrap()
        .remove(&sid)
        .map(|_| StatusCode::NO_CONTENT)
        .ok_or_else(|| ApiError::NotFound(format!("session {sid}")))
}

async fn get_state(State(st): State<AppState>, Path(sid): Path<String>) -> Reply<StateView> {
    let s = st.session(&sid)?;
    let s = s.lock().unwrap();
    Ok(Json(view(&sid, &s)))
}

async fn get_enabled(State(st): State<AppState>, Path(sid): Path<String>) -> Reply<EnabledView> {
    let s = st.session(&sid)?;
    let s = s.lock().unwrap();
    let g = &s.model.graph;
    Ok(Json(EnabledView {
        revision: s.revision(),
        transitions: s.enabled().iter().enumerate().map(|(i, t)| TransitionView::new(g, i, t)).collect(),
    }))
}

async fn step(State(st): State<AppState>, Path(sid): Path<String>, Json(req): Json<StepRequest>) -> Reply<StateView> {
    let s = st.session(&sid)?;
    let mut s = s.lock().unwrap();
    s.step(req.revision, req.index)?;
    Ok(Json(view(&sid, &s)))
}

async fn undo(State(st): State<AppState>, Path(sid): Path<String>) -> Reply<StateView> {
    let s = st.session(&sid)?;
    let mut s = s.lock().unwrap();
    s.undo()?;
    Ok(Json(view(&sid, &s)))
}

async fn reset(State(st): State<AppState>, Path(sid): Path<String>) -> Reply<StateView> {
    let s = st.session(&sid)?;
    let mut s = s.lock().unwrap();
    s.reset()?;
    Ok(Json(view(&sid, &s)))
}

fn attachment(name: String, entries: Vec<TraceEntry>) -> impl IntoResponse {
    (
        [(header::CONTENT_DISPOSITION, format!("attachment; filename=\"{name}.json\""))],
        Json(entries),
    )
}

async fn session_trace(State(st): State<AppState>, Path(sid): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let s = st.session(&sid)?;
    let s = s.lock().unwrap();
    let g = &s.model.graph;
    let entries = s
        .fired()
        .iter()
        .zip(s.states().windows(2))
        .map(|((rev, t), w)| TraceEntry::new(g, *rev, t, &w[0], &w[1]))
        .collect();
    Ok(attachment(format!("session-{sid}"), entries))
}

async fn load_trace(State(st): State<AppState>, Path(sid): Path<String>, Json(req): Json<LoadTrace>) -> Reply<StateView> {
    let labels = match (req.job, req.transitions) {
        (Some(jid), None) => {
            let jobs = st.0.jobs.lock().unwrap();
            let e = jobs.get(&jid).ok_or_else(|| ApiError::NotFound(format!("job {jid}")))?;
            if e.session != sid {
                return Err(ApiError::invalid(format!("job {jid} belongs to another session")));
            }
            match &e.job {
                Job::Done(_, Some(t)) => t.steps.iter().map(|(l, _)| l.clone()).collect(),
                Job::Done(_, None) => return Err(ApiError::invalid(format!("job {jid} has no trace"))),
                Job::Running => return Err(ApiError::Conflict(format!("job {jid} is still running"))),
                Job::Failed(_) => return Err(ApiError::invalid(format!("job {jid} failed"))),
            }
        }
        (None, Some(ts)) => ts,
        _ => return Err(ApiError::invalid("give exactly one of 'job' and 'transitions'")),
    };
    let s = st.session(&sid)?;
    let mut s = s.lock().unwrap();
    s.install(&labels)?;
    Ok(Json(view(&sid, &s)))
}

async fn list_bookmarks(State(st): State<AppState>, Path(sid): Path<String>) -> Reply<HashMap<String, usize>> {
    let s = st.session(&sid)?;
    let s = s.lock().unwrap();
    Ok(Json(s.bookmarks().iter().map(|(k, v)| (k.clone(), *v)).collect()))
}

async fn add_bookmark(
    State(st): State<AppState>,
    Path(sid): Path<String>,
    Json(req): Json<BookmarkRequest>,
) -> Reply<StateView> {
    let s = st.session(&sid)?;
    let mut s = s.lock().unwrap();
    s.bookmark(&req.name);
    Ok(Json(view(&sid, &s)))
}

async fn goto_bookmark(State(st): State<AppState>, Path((sid, name)): Path<(String, String)>) -> Reply<StateView> {
    let s = st.session(&sid)?;
    let mut s = s.lock().unwrap();
    s.goto(&name)?;
    Ok(Json(view(&sid, &s)))
}

/// A check whose inputs have been validated.
enum Prepared {
    Concrete { query: String, formula: Formula },
    Abstract { query: String, spec: AbstractionSpec },
}

fn prepare(model: &Model, corpus: Option<Config>, req: &CheckRequest) -> Result<Prepared, ApiError> {
    let need_corpus = || corpus.ok_or_else(|| ApiError::invalid("named properties and specs need a corpus session"));
    let (voter, cand) = req.property.as_ref().map_or((1, 1), |p| (p.voter, p.cand));
    let query = match (&req.query, &req.property) {
        (Some(q), None) => q.clone(),
        (None, Some(p)) => Property::parse(&p.name, p.voter, p.cand, p.office)?.query(&need_corpus()?)?,
        _ => return Err(ApiError::invalid("give exactly one of 'query' and 'property'")),
    };
    let spec = match (&req.abstraction, &req.abstraction_name) {
        (None, None) => None,
        (Some(text), None) => Some(AbstractionSpec::parse(text)?),
        (None, Some(name)) => Some(votecorpus::abstraction_spec(
            &SpecName::parse(name, voter, cand)?,
            &need_corpus()?,
        )?),
        _ => return Err(ApiError::invalid("give at most one of 'abstraction' and 'abstraction_name'")),
    };
    Ok(match spec {
        Some(spec) => Prepared::Abstract { query, spec },
        None => {
            let formula = textlang::load_queries(model, &query)?
                .into_iter()
                .next()
                .ok_or_else(|| ApiError::invalid("empty query"))?
                .formula;
            Prepared::Concrete { query, formula }
        }
    })
}

fn run(model: &Model, p: Prepared, opts: &Options, cap: usize) -> Result<(CheckResult, Option<Trace>), ApiError> {
    match p {
        Prepared::Concrete { query, formula } => {
            let v = checker::check(&model.graph, &formula, opts).map_err(|e| ApiError::from(match e {
                checker::CheckError::Kernel(k) => k,
            }))?;
            let trace = v.trace.as_ref().map(|t| {
                let mut steps = trace_entries(&model.graph, t);
                let truncated = steps.len() > cap;
                steps.truncate(cap);
                TraceView {
                    length: t.len(),
                    truncated,
                    loop_start: t.loop_start,
                    steps,
                }
            });
            let result = CheckResult {
                query,
                mode: "concrete".into(),
                sat: v.satisfied(),
                conclusive: v.satisfied().is_some(),
                memout: v.satisfied().is_none(),
                stats: v.stats.clone(),
                trace,
                evidence: Vec::new(),
            };
            Ok((result, v.trace))
        }
        Prepared::Abstract { query, spec } => {
            let cv = check_with_abstraction(model, &spec, &query, opts)?;
            let mut stats = Stats::default();
            for e in &cv.evidence {
                stats.states_stored += e.verdict.stats.states_stored;
                stats.states_explored += e.verdict.stats.states_explored;
                stats.time_s += e.verdict.stats.time_s;
                stats.mem_bytes = stats.mem_bytes.max(e.verdict.stats.mem_bytes);
            }
            let result = CheckResult {
                query,
                mode: "abstract".into(),
                sat: match cv.outcome {
                    Outcome::True => Some(true),
                    Outcome::False => Some(false),
                    Outcome::Inconclusive => None,
                },
                conclusive: cv.outcome != Outcome::Inconclusive,
                memout: cv.memout,
                stats,
                trace: None,
                evidence: cv
                    .evidence
                    .iter()
                    .map(|e| EvidenceView {
                        direction: format!("{:?}", e.direction).to_lowercase(),
                        query: e.query.clone(),
                        status: e.verdict.status,
                        stats: e.verdict.stats.clone(),
                    })
                    .collect(),
            };
            Ok((result, None))
        }
    }
}

async fn start_check(
    State(st): State<AppState>,
    Path(sid): Path<String>,
    Json(req): Json<CheckRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let (model, corpus) = {
        let s = st.session(&sid)?;
        let s = s.lock().unwrap();
        (s.model.clone(), s.corpus)
    };
    let prepared = prepare(&model, corpus, &req)?;
    let cfg = &st.0.config;
    let opts = Options {
        mem_budget: cfg.mem_budget,
        threads: cfg.threads,
        eg_mode: req.eg_mode.unwrap_or_default(),
    };
    let jid = uuid::Uuid::new_v4().to_string();
    st.0.jobs.lock().unwrap().insert(
        jid.clone(),
        JobEntry {
            session: sid,
            model: model.clone(),
            job: Job::Running,
        },
    );
    let (st2, jid2, cap) = (st.clone(), jid.clone(), cfg.trace_cap);
    tokio::task::spawn_blocking(move || {
        let job = match run(&model, prepared, &opts, cap) {
            Ok((r, t)) => Job::Done(Box::new(r), t),
            Err(e) => Job::Failed(serde_json::to_value(e.body()).unwrap_or_default()),
        };
        if let Some(e) = st2.0.jobs.lock().unwrap().get_mut(&jid2) {
            e.job = job;
        }
    });
    Ok((StatusCode::ACCEPTED, Json(JobCreated { job: jid })))
}

async fn get_job(State(st): State<AppState>, Path(jid): Path<String>) -> Reply<JobView> {
    let jobs = st.0.jobs.lock().unwrap();
    let e = jobs.get(&jid).ok_or_else(|| ApiError::NotFound(format!("job {jid}")))?;
    let (state, result, error) = match &e.job {
        Job::Running => (JobState::Running, None, None),
        Job::Done(r, _) => (JobState::Done, Some((**r).clone()), None),
        Job::Failed(err) => (JobState::Failed, None, Some(err.clone())),
    };
    Ok(Json(JobView {
        job: jid,
        session: e.session.clone(),
        state,
        result,
        error,
    }))
}

async fn job_trace(State(st): State<AppState>, Path(jid): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let jobs = st.0.jobs.lock().unwrap();
    let e = jobs.get(&jid).ok_or_else(|| ApiError::NotFound(format!("job {jid}")))?;
    match &e.job {
        Job::Done(_, Some(t)) => Ok(attachment(format!("trace-{jid}"), trace_entries(&e.model.graph, t))),
        Job::Running => Err(ApiError::Conflict(format!("job {jid} is still running"))),
        _ => Err(ApiError::NotFound(format!("trace of job {jid}"))),
    }
}
