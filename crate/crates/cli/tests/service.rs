use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use exmip_cli::server::{router, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn fixture(rel: &str) -> String {
    std::fs::read_to_string(repo("fixtures").join(rel)).unwrap()
}

fn schema(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(repo("docs/schemas").join(name)).unwrap())
        .unwrap()
}

/// Resolves `$ref`s between the schema files by file name.
struct SchemaDir;

impl jsonschema::Retrieve for SchemaDir {
    fn retrieve(
        &self,
        uri: &jsonschema::Uri<String>,
    ) -> Result<Value, Box<dyn std::error::Error + Send + Sync>> {
        let name = uri
            .path()
            .as_str()
            .rsplit('/')
            .next()
            .unwrap_or_default()
            .to_string();
        Ok(schema(&name))
    }
}

fn validator(name: &str) -> jsonschema::Validator {
    jsonschema::options()
        .with_retriever(SchemaDir)
        .build(&schema(name))
        .unwrap()
}

fn assert_valid(name: &str, v: &Value) {
    let errors: Vec<String> = validator(name)
        .iter_errors(v)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{v:#}");
}

struct Service {
    app: Router,
    _dir: tempfile::TempDir,
}

impl Service {
    fn new() -> Service {
        Service::with(|_| {})
    }

    fn with(tweak: impl FnOnce(&mut ServiceConfig)) -> Service {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ServiceConfig::new(dir.path());
        tweak(&mut config);
        Service {
            app: router(&config).unwrap(),
            _dir: dir,
        }
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let body = body.map_or(Body::empty(), |b| Body::from(b.to_string()));
        self.raw(method, uri, body).await
    }

    async fn raw(&self, method: &str, uri: &str, body: Body) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body)
            .unwrap();
        let res = self.app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        let v = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes)
                .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, v)
    }

    async fn session(&self, family: &str, payload: &str) -> String {
        let (status, v) = self
            .call(
                "POST",
                "/instances",
                Some(json!({ "family": family, "payload": payload })),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        v["id"].as_str().unwrap().to_string()
    }
}

#[tokio::test]
async fn instance_lifecycle() {
    let svc = Service::new();
    let id = svc.session("wdp", &fixture("wdp/toy.cats")).await;

    let (status, v) = svc
        .call("GET", &format!("/sessions/{id}/history"), None)
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!([]));

    let (status, v) = svc.call("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "created");

    let (status, v) = svc
        .call(
            "POST",
            &format!("/sessions/{id}/explain"),
            Some(json!({ "query": { "kind": "W1", "bid": 1 } })),
        )
        .await;
    assert_eq!(status, StatusCode::CONFLICT, "{v}");

    let (status, v) = svc
        .call("POST", &format!("/sessions/{id}/solve"), None)
        .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["f_star"], 9.0);
    let (_, v) = svc.call("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["status"], "solved");

    let (status, v) = svc
        .call(
            "POST",
            &format!("/sessions/{id}/explain"),
            Some(json!({ "query": { "kind": "W1", "bid": 1 }, "algorithm": "smallest" })),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["explanation"]["type"], "reasons");
    assert_eq!(v["iis_stats"]["size"], 3);
    assert_valid("graph.json", &v["explanation"]["graph"]);
    let artifact = v["artifact"].as_str().unwrap().to_string();

    let (status, v) = svc
        .call(
            "POST",
            &format!("/sessions/{id}/explain"),
            Some(json!({ "query": { "kind": "W2", "bid": 1 } })),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["explanation"]["type"], "alternate_optimum");
    assert_valid("notice.json", &v["explanation"]["notice"]);

    let (status, v) = svc
        .call("GET", &format!("/sessions/{id}/history"), None)
        .await;
    assert_eq!(status, StatusCode::OK);
    let entries = v.as_array().unwrap();
    assert_eq!(entries.len(), 2);
    for e in entries {
        assert_valid("record.json", e);
    }
    assert_eq!(entries[0]["artifact"], artifact.as_str());
    assert_eq!(entries[1]["index"], 1);

    let (status, v) = svc
        .call("GET", &format!("/artifacts/{artifact}"), None)
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["query"], json!({ "kind": "W1", "bid": 1 }));
}

#[tokio::test]
async fn instance_errors() {
    let svc = Service::new();
    let (status, v) = svc
        .call(
            "POST",
            "/instances",
            Some(json!({ "family": "knapsack", "payload": "" })),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "unknown_family");

    let broken = fixture("rcpsp/three.sm").replace(
        "   2        1          1      4",
        "   2        1          x      4",
    );
    let (status, v) = svc
        .call(
            "POST",
            "/instances",
            Some(json!({ "family": "rcpsp", "payload": broken })),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{v}");
    assert_eq!(v["error"]["code"], "parse_error");
    assert!(
        v["error"]["section"]
            .as_str()
            .unwrap()
            .contains("PRECEDENCE"),
        "{v}"
    );
    assert!(v["error"]["line"].is_u64());

    let (status, _) = svc.raw("POST", "/instances", Body::from("{not json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let small = Service::with(|c| c.max_body = 1024);
    let payload = "x".repeat(4096);
    let (status, _) = small
        .call(
            "POST",
            "/instances",
            Some(json!({ "family": "wdp", "payload": payload })),
        )
        .await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn unknown_sessions_are_not_found() {
    let svc = Service::new();
    for (method, path) in [
        ("GET", "/sessions/nope/history"),
        ("GET", "/sessions/nope"),
        ("POST", "/sessions/nope/solve"),
        ("GET", "/sessions/..%2Fescape/history"),
    ] {
        let (status, _) = svc.call(method, path, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{method} {path}");
    }
}

#[tokio::test]
async fn explain_rejects_bad_queries() {
    let svc = Service::new();
    let id = svc.session("rcpsp", &fixture("rcpsp/three.sm")).await;
    let (status, _) = svc
        .call("POST", &format!("/sessions/{id}/solve"), Some(json!({})))
        .await;
    assert_eq!(status, StatusCode::OK);
    let cases = [
        (json!({ "kind": "Q9", "activity": 2 }), "invalid_query"),
        (
            json!({ "kind": "Q1", "activity": 99, "time": 3 }),
            "unknown_entity",
        ),
        (
            json!({ "kind": "Q1", "activity": 2, "time": 60 }),
            "time_out_of_window",
        ),
        (json!({ "kind": "W1", "bid": 1 }), "wrong_family"),
    ];
    for (query, code) in cases {
        let (status, v) = svc
            .call(
                "POST",
                &format!("/sessions/{id}/explain"),
                Some(json!({ "query": query })),
            )
            .await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{v}");
        assert_eq!(v["error"]["code"], code, "{v}");
    }
    let (status, v) = svc
        .call("GET", &format!("/sessions/{id}/history"), None)
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!([]));
}

#[tokio::test]
async fn infeasible_main_problem_is_unprocessable() {
    let svc = Service::new();
    let model = "vars 1 cons 2 sense min\nvar 0 x 0 1 bin\ncon a Generic - : 1*x >= 1\ncon b Generic - : 1*x <= 0\n";
    let id = svc.session("canonical", model).await;
    let (status, v) = svc
        .call("POST", &format!("/sessions/{id}/solve"), None)
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert!(v["error"]["message"]
        .as_str()
        .unwrap()
        .contains("main problem infeasible"));
    let (_, v) = svc.call("GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["status"], "failed");
}

#[tokio::test]
async fn solve_timeout_is_a_gateway_timeout() {
    let svc = Service::new();
    let id = svc.session("rcpsp", &fixture("rcpsp/chain24.sm")).await;
    let (status, v) = svc
        .call(
            "POST",
            &format!("/sessions/{id}/solve"),
            Some(json!({ "time_limit": 0.0 })),
        )
        .await;
    assert_eq!(status, StatusCode::GATEWAY_TIMEOUT, "{v}");
}

#[tokio::test]
async fn concurrent_solve_is_a_conflict() {
    let svc = Service::new();
    let id = svc.session("rcpsp", &fixture("rcpsp/chain24.sm")).await;
    let uri = format!("/sessions/{id}/solve");
    let first = svc.call("POST", &uri, None);
    // `join!` polls the first request until it waits on the solver, so the
    // second one finds the session locked.
    let second = svc.call("POST", &uri, None);
    let ((a, _), (b, _)) = tokio::join!(first, second);
    let mut codes = [a, b];
    codes.sort();
    assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT]);
}

#[test]
fn query_schema_accepts_every_kind() {
    let v = validator("query.json");
    for q in [
        json!({ "kind": "Q3", "activity": 24, "time": 41 }),
        json!({ "kind": "Q5none", "activities": [2, 3], "time": 4 }),
        json!({ "kind": "Q7", "activity": 2, "time": 4, "alt_time": 5 }),
        json!({ "kind": "W4", "bid": 1, "other": 2 }),
        json!({ "kind": "All", "queries": [{ "kind": "W1", "bid": 0 }] }),
    ] {
        assert!(v.is_valid(&q), "{q}");
        let parsed: exmip_core::query::Query = serde_json::from_value(q).unwrap();
        assert!(v.is_valid(&serde_json::to_value(parsed).unwrap()));
    }
    assert!(!v.is_valid(&json!({ "kind": "Q1", "activity": 2 })));
    assert!(!v.is_valid(&json!({ "kind": "W1", "bid": 1, "extra": 0 })));
}
