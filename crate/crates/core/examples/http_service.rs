// Drive the HTTP API in-process: list generators, fetch a schema, edit a
// parameter and render the result. `procinv serve` exposes the same router.
//
// `cargo run --example http_service`

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use procinv::service::{router, AppState, ServiceConfig, HASH_HEADER};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Value) -> procinv::Result<(u16, Value)> {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .expect("request is well formed");
    let resp = app.clone().oneshot(req).await.expect("router is infallible");
    let status = resp.status().as_u16();
    let hash = resp.headers()[HASH_HEADER].to_str().unwrap_or_default().to_string();
    let bytes = resp.into_body().collect().await.expect("body is in memory").to_bytes();
    println!("{method:<4} {uri:<30} -> {status} ({} bytes, hash {hash})", bytes.len());
    Ok((status, serde_json::from_slice(&bytes)?))
}

/// Returns the status codes of the calls in order.
fn run_example() -> procinv::Result<Vec<u16>> {
    let app = router(AppState::with_checkpoints(ServiceConfig::default(), Default::default()));
    let rt = tokio::runtime::Builder::new_current_thread().build()?;
    rt.block_on(async {
        let mut codes = Vec::new();
        let (c, ids) = call(&app, "GET", "/api/generators", Value::Null).await?;
        codes.push(c);
        println!("  generators: {ids}");
        let (c, schema) = call(&app, "GET", "/api/generators/table/schema", Value::Null).await?;
        codes.push(c);
        println!("  table has {} parameters", schema["params"].as_array().map_or(0, |a| a.len()));
        let (c, mesh) = call(&app, "POST", "/api/generators/table/mesh", json!({"leg_style": "pedestal"})).await?;
        codes.push(c);
        println!("  pedestal table: {} triangles", mesh["triangles"].as_array().map_or(0, |a| a.len()));
        let (c, err) = call(&app, "POST", "/api/generators/table/mesh", json!({"height": 3.0})).await?;
        codes.push(c);
        println!("  rejected: {}", err["error"]);
        let (c, img) = call(&app, "POST", "/api/render", json!({"generator_id": "table", "params": {"leg_style": "pedestal"}})).await?;
        codes.push(c);
        println!("  rendered {}x{}", img["width"], img["height"]);
        let (c, _) = call(&app, "POST", "/api/invert", json!({"generator_id": "table", "image": ""})).await?;
        codes.push(c);
        Ok(codes)
    })
}

#[allow(dead_code)]
fn main() -> procinv::Result<()> {
    run_example()?;
    Ok(())
}
