use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use masgraph::kernel::{GlobalState, TransitionLabel};
use masgraph::votecorpus::{self, Config, DeviationSet};
use masgraph_service::api::{CheckResult, EnabledView, JobView, StateView, TraceEntry};
use masgraph_service::{router, AppState, ServiceConfig};
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use std::time::Duration;
use tower::ServiceExt;

const COUNTER: &str = "int[0,3] x;
chan c;
process P {
    state a, b;
    init a;
    trans a -> b { guard x < 3; sync c!; assign x = x + 1; },
          b -> a { select k : int[0,1]; assign x = x * k; };
}
process Q {
    state w;
    init w;
    trans w -> w { sync c?; };
}
system P, Q;
";

fn app(config: ServiceConfig) -> Router {
    router(AppState::new(config))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, v)
}

async fn create(app: &Router, body: Value) -> String {
    let (st, v) = call(app, "POST", "/api/v1/sessions", Some(body)).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    v["session"].as_str().unwrap().to_string()
}

async fn state(app: &Router, sid: &str) -> StateView {
    let (st, v) = call(app, "GET", &format!("/api/v1/sessions/{sid}/state"), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    serde_json::from_value(v).unwrap()
}

async fn enabled(app: &Router, sid: &str) -> EnabledView {
    let (st, v) = call(app, "GET", &format!("/api/v1/sessions/{sid}/enabled"), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    serde_json::from_value(v).unwrap()
}

async fn step(app: &Router, sid: &str, revision: u64, index: usize) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/api/v1/sessions/{sid}/step"),
        Some(json!({ "revision": revision, "index": index })),
    )
    .await
}

async fn finish(app: &Router, jid: &str) -> JobView {
    for _ in 0..600 {
        let (st, v) = call(app, "GET", &format!("/api/v1/jobs/{jid}"), None).await;
        assert_eq!(st, StatusCode::OK);
        let j: JobView = serde_json::from_value(v).unwrap();
        if !matches!(j.state, masgraph_service::api::JobState::Running) {
            return j;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("job {jid} did not finish");
}

async fn check(app: &Router, sid: &str, body: Value) -> (String, CheckResult) {
    let (st, v) = call(app, "POST", &format!("/api/v1/sessions/{sid}/checks"), Some(body)).await;
    assert_eq!(st, StatusCode::ACCEPTED, "{v}");
    let jid = v["job"].as_str().unwrap().to_string();
    let j = finish(app, &jid).await;
    (jid, j.result.unwrap_or_else(|| panic!("job failed: {:?}", j.error)))
}

fn rendered(m: &masgraph::textlang::Model, s: &GlobalState) -> (Vec<(String, String)>, Vec<(String, String)>) {
    (m.graph.render_locations(s), m.graph.render_values(s))
}

fn of_view(v: &StateView) -> (Vec<(String, String)>, Vec<(String, String)>) {
    let p = |xs: &[masgraph_service::api::NamedValue]| xs.iter().map(|x| (x.name.clone(), x.value.clone())).collect();
    (p(&v.locations), p(&v.values))
}

#[tokio::test]
async fn corpus_session_lists_the_kernel_transitions() {
    let app = app(ServiceConfig::default());
    let sid = create(&app, json!({ "corpus": { "config": "1,1,1,1", "deviations": { "envelope_unsealed": true } } })).await;
    let m = votecorpus::load(
        &Config::new(1, 1, 1, 1).unwrap(),
        &DeviationSet {
            envelope_unsealed: true,
            ..DeviationSet::honest()
        },
    )
    .unwrap();
    let init = m.graph.initial_state().unwrap();
    assert_eq!(of_view(&state(&app, &sid).await), rendered(&m, &init));
    let listed = enabled(&app, &sid).await;
    let labels: Vec<TransitionLabel> = listed.transitions.iter().map(|t| t.transition.clone()).collect();
    assert!(!labels.is_empty());
    assert_eq!(labels, m.graph.enabled(&init).unwrap());
    for (i, t) in listed.transitions.iter().enumerate() {
        assert_eq!(t.index, i);
        assert_eq!(t.label, m.graph.label_text(&t.transition));
    }
}

#[tokio::test]
async fn step_then_undo_restores_the_state() {
    let app = app(ServiceConfig::default());
    let sid = create(&app, json!({ "model": COUNTER })).await;
    let before = state(&app, &sid).await;
    let (st, after) = step(&app, &sid, before.revision, 0).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(after["position"], 1);
    assert_eq!(after["changed"], json!(["x"]));
    let (st, undone) = call(&app, "POST", &format!("/api/v1/sessions/{sid}/undo"), None).await;
    assert_eq!(st, StatusCode::OK);
    let undone: StateView = serde_json::from_value(undone).unwrap();
    assert_eq!(of_view(&undone), of_view(&before));
    assert!(undone.revision > before.revision);
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let app = app(ServiceConfig::default());
    let (st, _) = call(&app, "GET", "/api/v1/sessions/nope/state", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = call(&app, "GET", "/api/v1/jobs/nope", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    let (st, v) = call(&app, "POST", "/api/v1/sessions", Some(json!({ "model": "int x;\nprocess P {\n  state a\n}" }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "parse");
    assert_eq!(v["line"], 4);
    let (st, v) = call(&app, "POST", "/api/v1/sessions", Some(json!({ "model": "process P { state a; init a; trans a -> a { assign y = 1; }; } system P;" }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "type");
    assert!(v["col"].as_u64().is_some());
    let (st, _) = call(&app, "POST", "/api/v1/sessions", Some(json!({ "corpus": { "config": "0,1,1,1" } }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let (st, _) = call(&app, "POST", "/api/v1/sessions", Some(json!({}))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);

    let sid = create(&app, json!({ "model": COUNTER })).await;
    let rev = enabled(&app, &sid).await.revision;
    assert_eq!(step(&app, &sid, rev, 0).await.0, StatusCode::OK);
    // The listing at `rev` is stale now.
    assert_eq!(step(&app, &sid, rev, 0).await.0, StatusCode::CONFLICT);
    assert_eq!(step(&app, &sid, rev + 1, 99).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let (st, v) = call(&app, "POST", &format!("/api/v1/sessions/{sid}/checks"), Some(json!({ "query": "A[] (x <" }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "parse");
    call(&app, "POST", &format!("/api/v1/sessions/{sid}/reset"), None).await;
    let (st, _) = call(&app, "POST", &format!("/api/v1/sessions/{sid}/undo"), None).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let (st, _) = call(&app, "DELETE", &format!("/api/v1/sessions/{sid}"), None).await;
    assert_eq!(st, StatusCode::NO_CONTENT);
    assert_eq!(step(&app, &sid, 0, 0).await.0, StatusCode::NOT_FOUND);
}

/// Random API walks must visit exactly the states the kernel computes for
/// the same choices.
#[tokio::test]
async fn random_api_walks_match_the_kernel() {
    let app = app(ServiceConfig::default());
    let models = [
        (json!({ "model": COUNTER }), masgraph::textlang::load_model(COUNTER).unwrap()),
        (
            json!({ "corpus": { "config": "1,1,1,2", "deviations": DeviationSet::voters() } }),
            votecorpus::load(&Config::new(1, 1, 1, 2).unwrap(), &DeviationSet::voters()).unwrap(),
        ),
    ];
    for (seed, (body, m)) in models.iter().enumerate().flat_map(|(i, x)| (0..4).map(move |k| (10 * i as u64 + k, x))) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let sid = create(&app, body.clone()).await;
        let mut run = vec![m.graph.initial_state().unwrap()];
        for _ in 0..60 {
            let roll: f64 = rng.gen();
            if roll < 0.1 {
                let (st, _) = call(&app, "POST", &format!("/api/v1/sessions/{sid}/undo"), None).await;
                if run.len() > 1 {
                    assert_eq!(st, StatusCode::OK);
                    run.pop();
                } else {
                    assert_eq!(st, StatusCode::CONFLICT);
                }
            } else if roll < 0.13 {
                call(&app, "POST", &format!("/api/v1/sessions/{sid}/reset"), None).await;
                run.truncate(1);
            } else {
                let listed = enabled(&app, &sid).await;
                let cur = run.last().unwrap();
                let kernel = m.graph.enabled(cur).unwrap();
                let labels: Vec<_> = listed.transitions.iter().map(|t| t.transition.clone()).collect();
                assert_eq!(labels, kernel, "seed {seed}");
                let i = rng.gen_range(0..kernel.len());
                let (st, v) = step(&app, &sid, listed.revision, i).await;
                assert_eq!(st, StatusCode::OK, "{v}");
                run.push(m.graph.step(cur, &kernel[i]).unwrap());
            }
            let view = state(&app, &sid).await;
            assert_eq!(view.position + 1, run.len());
            assert_eq!(of_view(&view), rendered(m, run.last().unwrap()), "seed {seed}");
        }
    }
}

#[tokio::test]
async fn valvote_counterexample_replays_in_the_session() {
    let app = app(ServiceConfig::default());
    let sid = create(&app, json!({ "corpus": { "config": "1,1,1,1", "deviations": DeviationSet::voters() } })).await;
    let before = state(&app, &sid).await;
    let (jid, r) = check(&app, &sid, json!({ "property": { "name": "valvote", "voter": 1, "cand": 1 } })).await;
    assert_eq!(r.sat, Some(false));
    assert!(r.conclusive);
    let tv = r.trace.unwrap();
    assert!(tv.length > 0 && !tv.truncated);
    // Checking leaves the session alone.
    let after = state(&app, &sid).await;
    assert_eq!(after.revision, before.revision);
    assert_eq!(of_view(&after), of_view(&before));

    // Step through the trace by picking each transition from the listing.
    for e in &tv.steps {
        let listed = enabled(&app, &sid).await;
        let i = listed
            .transitions
            .iter()
            .position(|t| t.transition == e.transition)
            .expect("trace step is enabled");
        let (st, v) = step(&app, &sid, listed.revision, i).await;
        assert_eq!(st, StatusCode::OK);
        let changed: Vec<String> = e.changed.iter().map(|c| c.name.clone()).collect();
        assert_eq!(v["changed"], json!(changed));
    }
    let stepped = state(&app, &sid).await;
    assert!(stepped.locations.iter().any(|l| l.name == "Time" && l.value == "end"));

    call(&app, "POST", &format!("/api/v1/sessions/{sid}/reset"), None).await;
    let (st, v) = call(&app, "POST", &format!("/api/v1/sessions/{sid}/trace"), Some(json!({ "job": jid }))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    let installed: StateView = serde_json::from_value(v).unwrap();
    assert_eq!(of_view(&installed), of_view(&stepped));
    assert_eq!(installed.position, tv.length);

    let (st, v) = call(&app, "GET", &format!("/api/v1/sessions/{sid}/trace"), None).await;
    assert_eq!(st, StatusCode::OK);
    let run: Vec<TraceEntry> = serde_json::from_value(v).unwrap();
    let labels: Vec<_> = run.iter().map(|e| e.transition.clone()).collect();
    let expected: Vec<_> = tv.steps.iter().map(|e| e.transition.clone()).collect();
    assert_eq!(labels, expected);

    // A job from another session cannot be installed here.
    let other = create(&app, json!({ "model": COUNTER })).await;
    let (st, _) = call(&app, "POST", &format!("/api/v1/sessions/{other}/trace"), Some(json!({ "job": jid }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn traces_are_capped_but_downloadable_in_full() {
    let app = app(ServiceConfig {
        trace_cap: 2,
        ..ServiceConfig::default()
    });
    let sid = create(&app, json!({ "model": COUNTER })).await;
    let (jid, r) = check(&app, &sid, json!({ "query": "E<> x == 3" })).await;
    assert_eq!(r.sat, Some(true));
    let tv = r.trace.unwrap();
    assert!(tv.truncated);
    assert_eq!(tv.steps.len(), 2);
    let (st, v) = call(&app, "GET", &format!("/api/v1/jobs/{jid}/trace"), None).await;
    assert_eq!(st, StatusCode::OK);
    let full: Vec<TraceEntry> = serde_json::from_value(v).unwrap();
    assert_eq!(full.len(), tv.length);
    assert_eq!(full[..2], tv.steps[..]);
    assert!(full.iter().enumerate().all(|(i, e)| e.revision == i as u64 + 1));

    let (st, v) = call(
        &app,
        "POST",
        &format!("/api/v1/sessions/{sid}/trace"),
        Some(json!({ "transitions": full.iter().map(|e| &e.transition).collect::<Vec<_>>() })),
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["values"][0]["value"], "3");
}

#[tokio::test]
async fn abstract_checks_report_conclusiveness() {
    let app = app(ServiceConfig::default());
    let sid = create(&app, json!({ "corpus": { "config": "1,1,1,1", "deviations": DeviationSet::voters() } })).await;
    let (_, r) = check(&app, &sid, json!({ "property": { "name": "bstuff" }, "abstraction_name": "bstuff_spec" })).await;
    assert_eq!(r.mode, "abstract");
    assert_eq!(r.sat, Some(true));
    assert!(r.conclusive && r.trace.is_none());
    assert_eq!(r.evidence.len(), 1);

    let (_, r) = check(&app, &sid, json!({ "property": { "name": "valvote" }, "abstraction_name": "valvote_spec" })).await;
    assert_eq!(r.sat, None);
    assert!(!r.conclusive && !r.memout);

    let plain = create(&app, json!({ "model": COUNTER })).await;
    let (st, _) = call(
        &app,
        "POST",
        &format!("/api/v1/sessions/{plain}/checks"),
        Some(json!({ "property": { "name": "bstuff" } })),
    )
    .await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let (st, v) = call(
        &app,
        "POST",
        &format!("/api/v1/sessions/{plain}/checks"),
        Some(json!({ "query": "A[] x <= 3", "abstraction": "remove x;\nmerge big : bool = x >= 2;" })),
    )
    .await;
    assert_eq!(st, StatusCode::ACCEPTED);
    let j = finish(&app, v["job"].as_str().unwrap()).await;
    assert!(matches!(j.state, masgraph_service::api::JobState::Failed));
    assert_eq!(j.error.unwrap()["error"], "abstraction");
}

#[tokio::test]
async fn bookmarks_cut_back_the_run() {
    let app = app(ServiceConfig::default());
    let sid = create(&app, json!({ "model": COUNTER })).await;
    let r0 = state(&app, &sid).await.revision;
    step(&app, &sid, r0, 0).await;
    let (st, _) = call(&app, "POST", &format!("/api/v1/sessions/{sid}/bookmarks"), Some(json!({ "name": "one" }))).await;
    assert_eq!(st, StatusCode::OK);
    let r = state(&app, &sid).await.revision;
    step(&app, &sid, r, 0).await;
    let (_, marks) = call(&app, "GET", &format!("/api/v1/sessions/{sid}/bookmarks"), None).await;
    assert_eq!(marks, json!({ "one": 1 }));
    let (st, v) = call(&app, "POST", &format!("/api/v1/sessions/{sid}/bookmarks/one/goto"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["position"], 1);
    let (st, _) = call(&app, "POST", &format!("/api/v1/sessions/{sid}/bookmarks/two/goto"), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}
