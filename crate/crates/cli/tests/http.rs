mod common;

use common::*;
use serde_json::json;

fn keylock_server() -> (tempfile::TempDir, Client) {
    let tmp = tempfile::tempdir().unwrap();
    let fx = private_copy("keylock", tmp.path());
    let app = replay_app(&fx, &tmp.path().join("store"));
    (tmp, Client::new(spawn_server(app)))
}

fn description() -> String {
    std::fs::read_to_string(fixture("keylock/description.txt")).unwrap()
}

fn create(c: &Client) -> String {
    let (status, body) = c.post("/sessions", Some(json!({"name": "Key-Lock", "description": description()})));
    assert_eq!(status, 201, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

#[test]
fn create_starts_in_drafting() {
    let (_tmp, c) = keylock_server();
    let (status, body) = c.post("/sessions", Some(json!({"description": "a key and a lock"})));
    assert_eq!(status, 201);
    assert_eq!(body["phase"], "drafting");
    assert_eq!(body["trial_counter"], 0);
    let id = body["session_id"].as_str().unwrap();
    let (status, listed) = c.get("/sessions");
    assert_eq!(status, 200);
    assert_eq!(listed[0]["session_id"], id);
    let (status, shown) = c.get(&format!("/sessions/{id}"));
    assert_eq!(status, 200);
    assert_eq!(shown, body);
}

#[test]
fn wrong_phase_is_a_conflict() {
    let (_tmp, c) = keylock_server();
    let id = create(&c);
    let (status, body) = c.post(&format!("/sessions/{id}/validate"), None);
    assert_eq!(status, 409);
    assert_eq!(body["code"], "wrong_phase");
    let (_, shown) = c.get(&format!("/sessions/{id}"));
    assert_eq!(shown["phase"], "drafting");
}

#[test]
fn unknown_things_are_404() {
    let (_tmp, c) = keylock_server();
    let (status, body) = c.get("/sessions/does-not-exist");
    assert_eq!((status, body["code"].as_str()), (404, Some("not_found")));
    let (status, _) = c.post("/sessions/does-not-exist/design", None);
    assert_eq!(status, 404);
    let (status, body) = c.get("/nowhere");
    assert_eq!((status, body["code"].as_str()), (404, Some("not_found")));
    let id = create(&c);
    assert_eq!(c.get(&format!("/sessions/{id}/code/1")).0, 404);
    assert_eq!(c.get(&format!("/sessions/{id}/code/0")).0, 404);
}

#[test]
fn invalid_bodies_are_422() {
    let (_tmp, c) = keylock_server();
    let (status, body) = c.post_raw("/sessions", "{not json");
    assert_eq!((status, body["code"].as_str()), (422, Some("invalid_body")));
    let (status, _) = c.post("/sessions", Some(json!({"name": "x"})));
    assert_eq!(status, 422);
    let (status, body) = c.post("/sessions", Some(json!({"description": "   "})));
    assert_eq!((status, body["code"].as_str()), (422, Some("invalid_request")));
    let id = create(&c);
    assert_eq!(c.post(&format!("/sessions/{id}/design"), None).0, 200);
    let (status, _) = c.post(&format!("/sessions/{id}/feedback"), Some(json!({"text": ""})));
    assert_eq!(status, 422);
    let (status, _) = c.post(&format!("/sessions/{id}/approve"), Some(json!({"edited": {"observation": 3}})));
    assert_eq!(status, 422);
}

#[test]
fn metrics_before_the_end_conflict() {
    let (_tmp, c) = keylock_server();
    let id = create(&c);
    assert_eq!(c.get(&format!("/sessions/{id}/metrics")).0, 409);
    assert_eq!(c.post(&format!("/sessions/{id}/abandon"), None).0, 200);
    let (status, m) = c.get(&format!("/sessions/{id}/metrics"));
    assert_eq!(status, 200);
    assert_eq!(m["trials_to_execution"], serde_json::Value::Null);
    assert_eq!(m["outcome"], "abandoned");
}

#[test]
fn full_walkthrough_with_event_cursor() {
    let (_tmp, c) = keylock_server();
    let id = create(&c);
    let path = |op: &str| format!("/sessions/{id}/{op}");

    let (_, page) = c.get(&format!("{}?cursor=0", path("events")));
    let first_cursor = page["next_cursor"].as_u64().unwrap();
    let seen_before = page["events"].as_array().unwrap().len();
    assert!(seen_before >= 1);

    let (status, s) = c.post(&path("design"), None);
    assert_eq!(status, 200, "{s}");
    assert_eq!(s["phase"], "design_proposed");
    assert_eq!(c.post(&path("approve"), None).0, 200);

    for round in 1..=3 {
        let (status, s) = c.post(&path("codify"), None);
        assert_eq!(status, 200, "{s}");
        assert_eq!(s["phase"], "code_generated");
        let (status, s) = c.post(&path("validate"), None);
        assert_eq!(status, 200, "{s}");
        let expected = if round < 3 { format!("{{\"failed\":{round}}}") } else { "\"executable\"".into() };
        assert_eq!(s["phase"].to_string(), expected);
    }

    let (status, code) = c.get(&format!("{}/3", path("code")));
    assert_eq!(status, 200);
    assert_eq!(code["query"], "debug");
    assert!(code["source"].as_str().unwrap().contains("class"));
    assert_eq!(c.get(&format!("{}/1", path("code"))).1["query"], "codify");

    let (status, m) = c.get(&path("metrics"));
    assert_eq!(status, 200);
    assert_eq!(m["trials_to_execution"], 2);
    assert_eq!(m["space_kind"], "Discrete");
    assert_eq!(m["description_tokens"], 48);

    // the cursor only ever moves forward and pages do not overlap
    let (_, later) = c.get(&format!("{}?cursor={first_cursor}", path("events")));
    let events = later["events"].as_array().unwrap();
    assert!(!events.is_empty());
    assert!(events.iter().all(|e| e["seq"].as_u64().unwrap() >= first_cursor));
    let (_, all) = c.get(&path("events"));
    assert_eq!(all["events"].as_array().unwrap().len(), seen_before + events.len());
    let end = later["next_cursor"].as_u64().unwrap();
    let (_, empty) = c.get(&format!("{}?cursor={end}", path("events")));
    assert!(empty["events"].as_array().unwrap().is_empty());
    assert_eq!(empty["next_cursor"], end);

    assert_eq!(c.post(&path("codify"), None).0, 409);
}
