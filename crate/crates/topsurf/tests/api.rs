// SPDX-License-Identifier: Apache-2.0

mod common;

use std::path::Path;

use axum::body::{to_bytes, Body};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use topsurf::config::QuerySettings;
use topsurf::server::{load_state, router, QueryResponse};
use topsurf::store::{IndexStore, Layout};
use topsurf_core::query::{region_query, whole_image_query, Rect};
use topsurf_core::QuerySpec;
use tower::ServiceExt;

const SUM: &str = "feedface";

fn fixture(root: &Path) {
    let mut rng = common::seeded(3);
    let mut store = IndexStore::open_writer(&root.join("index"), SUM, 300, Layout::PerWord).unwrap();
    let mut batch = Vec::new();
    for (cat, n) in [("building", 6), ("beach", 5), ("untagged", 4)] {
        for i in 0..n {
            let id = format!("{cat}/img {i}.png");
            batch.push((common::random_descriptor(&mut rng, &id, 300, 60), cat.to_string()));
        }
    }
    store.add_batch(batch).unwrap();
    let img = image::RgbImage::from_fn(8, 8, |x, y| image::Rgb([x as u8 * 30, y as u8 * 30, 0]));
    std::fs::create_dir_all(root.join("images/building")).unwrap();
    img.save(root.join("images/building/img 0.png")).unwrap();
}

fn app(root: &Path, checksum: &str) -> Router {
    let state = load_state(&root.join("index"), checksum, root.join("images"), QuerySettings::default()).unwrap();
    router(state, None)
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>, Option<String>) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let ct = res.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string());
    (status, to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec(), ct)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, body, _) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&body).unwrap_or(Value::Null))
}

async fn post(app: &Router, body: &str) -> (StatusCode, Value) {
    let req =
        Request::post("/api/query").header(header::CONTENT_TYPE, "application/json").body(Body::from(body.to_string()));
    let (s, body, _) = call(app, req.unwrap()).await;
    (s, serde_json::from_slice(&body).unwrap())
}

#[tokio::test]
async fn read_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let app = app(dir.path(), SUM);

    let (s, health) = get(&app, "/api/health").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(health["status"], "ok");
    assert_eq!(health["images"], 15);
    assert_eq!(health["words"], 300);

    let (_, cats) = get(&app, "/api/categories").await;
    assert_eq!(cats, json!(["beach", "building", "untagged"]));

    let (s, ids) = get(&app, "/api/search?tag=building").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ids.as_array().unwrap().len(), 6);
    assert_eq!(ids[0], "building/img 0.png");
    assert_eq!(get(&app, "/api/search?tag=zebra").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/search").await.0, StatusCode::BAD_REQUEST);

    let (s, words) = get(&app, "/api/images/building%2Fimg%200.png/words").await;
    assert_eq!(s, StatusCode::OK);
    let first = &words[0];
    assert!(first["index"].as_u64().unwrap() >= 1 && first["weight"].as_f64().unwrap() > 0.0);
    assert!(first["locations"][0].as_array().unwrap().len() == 2);
    assert_eq!(get(&app, "/api/images/nope/words").await.0, StatusCode::NOT_FOUND);

    let (s, bytes, ct) =
        call(&app, Request::get("/api/images/building%2Fimg%200.png").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ct.as_deref(), Some("image/png"));
    assert_eq!(&bytes[1..4], b"PNG");
    // Indexed but no file on disk.
    assert_eq!(get(&app, "/api/images/beach%2Fimg%200.png").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn queries_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let app = app(dir.path(), SUM);
    let store = IndexStore::open(&dir.path().join("index")).unwrap();
    let source = "building/img 1.png";

    // Full-image positive rectangle equals the whole-image query.
    let body =
        json!({"source_image": source, "rects": [{"x0": 0, "y0": 0, "x1": 640, "y1": 480, "polarity": "positive"}]});
    let (s, res) = post(&app, &body.to_string()).await;
    assert_eq!(s, StatusCode::OK);
    let res: QueryResponse = serde_json::from_value(res).unwrap();
    let lib = whole_image_query(source, &store, 20).unwrap();
    assert_eq!(res.results.len(), lib.len());
    for (a, b) in res.results.iter().zip(&lib) {
        assert_eq!((&a.image_id, a.score, a.similarity), (&b.image_id, b.score, b.similarity));
        assert_eq!(a.matched_positive, b.matched_positive.len());
    }

    let body = json!({
        "source_image": source,
        "rects": [
            {"x0": 0, "y0": 0, "x1": 320, "y1": 240, "polarity": "positive"},
            {"x0": 300, "y0": 200, "x1": 640, "y1": 480, "polarity": "negative"}
        ],
        "lambda": 0.5, "limit": 7, "exclude_source": false
    });
    let (_, res) = post(&app, &body.to_string()).await;
    let res: QueryResponse = serde_json::from_value(res).unwrap();
    let spec = QuerySpec::new(
        source,
        vec![Rect::positive(0.0, 0.0, 320.0, 240.0), Rect::negative(300.0, 200.0, 640.0, 480.0)],
    )
    .with_negative_weight(0.5)
    .with_limit(7)
    .with_exclude_source(false);
    let lib = region_query(&spec, &store).unwrap();
    assert_eq!(
        res.results.iter().map(|r| (&r.image_id, r.score)).collect::<Vec<_>>(),
        lib.iter().map(|r| (&r.image_id, r.score)).collect::<Vec<_>>()
    );
}

#[tokio::test]
async fn query_errors() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let app = app(dir.path(), SUM);
    let src = "building/img 1.png";
    assert_eq!(post(&app, &json!({"source_image": src, "rects": []}).to_string()).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(&app, "{not json").await.0, StatusCode::BAD_REQUEST);
    let inverted =
        json!({"source_image": src, "rects": [{"x0": 5, "y0": 0, "x1": 1, "y1": 9, "polarity": "positive"}]});
    assert_eq!(post(&app, &inverted.to_string()).await.0, StatusCode::BAD_REQUEST);
    let only_negative =
        json!({"source_image": src, "rects": [{"x0": 0, "y0": 0, "x1": 640, "y1": 480, "polarity": "negative"}]});
    assert_eq!(post(&app, &only_negative.to_string()).await.0, StatusCode::BAD_REQUEST);
    let missing =
        json!({"source_image": "ghost.png", "rects": [{"x0": 0, "y0": 0, "x1": 1, "y1": 1, "polarity": "positive"}]});
    let (s, body) = post(&app, &missing.to_string()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("ghost.png"));
}

#[tokio::test]
async fn dictionary_mismatch_answers_conflict() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let app = app(dir.path(), "0000");
    for uri in ["/api/health", "/api/categories", "/api/search?tag=beach"] {
        assert_eq!(get(&app, uri).await.0, StatusCode::CONFLICT);
    }
    let body = json!({"source_image": "x", "rects": []});
    assert_eq!(post(&app, &body.to_string()).await.0, StatusCode::CONFLICT);
}
