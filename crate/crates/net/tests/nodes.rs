mod common;

use std::path::PathBuf;
use std::time::Duration;

use lbs_net::client::NodeClient;
use lbs_net::config::{NodeConfig, Role};
use lbs_net::demo::{self, DemoOptions};
use lbs_net::envelope::{Envelope, ErrorCode};
use lbs_net::scenario::{Runner, Scenario};
use lbs_net::{serve, ServeError};
use serde_json::{json, Value};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo")
}

fn zones_file() -> PathBuf {
    fixtures().join("zones.json")
}

async fn login(lsp: &NodeClient, phone: &str, prefs: &[&str]) -> String {
    let prefs: Vec<String> = prefs.iter().map(|s| s.to_string()).collect();
    let env = lsp.register(phone, "long-enough", &prefs).await.unwrap();
    assert!(env.is_ok(), "{env:?}");
    let user = env.data_field("user_id").unwrap().as_str().unwrap().to_string();
    let env = lsp.login(&user, "long-enough").await.unwrap();
    env.data_field("token").unwrap().as_str().unwrap().to_string()
}

fn assert_error(env: &Envelope, code: ErrorCode) {
    assert!(!env.is_ok(), "{env:?}");
    assert_eq!(env.message, code.text());
    assert!(env.data.is_none());
}

#[tokio::test]
async fn csp_healthz_reports_ok() {
    let mut cfg = NodeConfig::new(Role::Csp, "127.0.0.1:0", &zones_file());
    cfg.lsp_endpoint = Some("127.0.0.1:1".into());
    let node = serve(cfg).await.unwrap();
    let env = NodeClient::new(&node.endpoint()).healthz().await.unwrap();
    assert!(env.is_ok());
    assert_eq!(env.data_field("status"), Some(&json!("ok")));
    node.shutdown().await;
}

#[tokio::test]
async fn cu_without_csp_is_degraded() {
    let mut cfg = NodeConfig::new(Role::Cu, "127.0.0.1:0", &zones_file());
    cfg.lsp_endpoint = Some("127.0.0.1:1".into());
    cfg.csp_endpoint = Some("127.0.0.1:1".into());
    cfg.zone_id = Some("harbor".into());
    cfg.heartbeat_ms = Some(50);
    let node = serve(cfg).await.unwrap();
    tokio::time::sleep(Duration::from_millis(150)).await;
    let env = NodeClient::new(&node.endpoint()).healthz().await.unwrap();
    assert_eq!(env.data_field("status"), Some(&json!("degraded")));
    node.shutdown().await;
}

#[tokio::test]
async fn second_node_on_same_port_gets_bind_error() {
    let first = serve(NodeConfig::new(Role::Lsp, "127.0.0.1:0", &zones_file())).await.unwrap();
    let err = serve(NodeConfig::new(Role::Lsp, &first.endpoint(), &zones_file()))
        .await
        .unwrap_err();
    assert!(matches!(err, ServeError::Bind { .. }));
    assert_eq!(err.code(), ErrorCode::BindError);
    first.shutdown().await;
}

#[tokio::test]
async fn bad_inputs_are_config_errors() {
    let err = serve(NodeConfig::new(Role::Lsp, "127.0.0.1:0", &fixtures().join("missing.json")))
        .await
        .unwrap_err();
    assert_eq!(err.code(), ErrorCode::ConfigError);

    let mut cfg = NodeConfig::new(Role::Cu, "127.0.0.1:0", &zones_file());
    cfg.lsp_endpoint = Some("a:1".into());
    cfg.csp_endpoint = Some("b:1".into());
    cfg.zone_id = Some("atlantis".into());
    assert_eq!(serve(cfg).await.unwrap_err().code(), ErrorCode::ConfigError);
}

#[tokio::test]
async fn lsp_error_texts_are_exact() {
    let node = serve(NodeConfig::new(Role::Lsp, "127.0.0.1:0", &zones_file())).await.unwrap();
    let lsp = NodeClient::new(&node.endpoint());
    assert_error(&lsp.register("12ab", "long-enough", &[]).await.unwrap(), ErrorCode::InvalidPhone);
    assert_error(&lsp.register("5550100", "short", &[]).await.unwrap(), ErrorCode::WeakPassword);
    assert!(lsp.register("5550100", "long-enough", &[]).await.unwrap().is_ok());
    assert_error(&lsp.register("555-0100", "long-enough", &[]).await.unwrap(), ErrorCode::DuplicatePhone);

    let env = lsp.login("5550100", "wrong-password").await.unwrap();
    assert_eq!(env.message, "Authentication Failed");
    assert_error(&env, ErrorCode::AuthFailed);
    assert_error(&lsp.introspect(&"0".repeat(64)).await.unwrap(), ErrorCode::InvalidToken);

    let rfid = |tag: &str| json!({"method": "rfid", "tag": tag});
    assert_error(&lsp.locate(&rfid("nope"), None).await.unwrap(), ErrorCode::UnknownTag);
    let gps = |obs: Value| json!({"method": "gps", "observations": obs});
    let two = json!([{"bx": 0, "by": 0, "d": 1}, {"bx": 1, "by": 0, "d": 1}]);
    assert_error(&lsp.locate(&gps(two), None).await.unwrap(), ErrorCode::Underdetermined);
    let line = json!([{"bx": 0, "by": 0, "d": 1}, {"bx": 1, "by": 0, "d": 1}, {"bx": 2, "by": 0, "d": 1}]);
    assert_error(&lsp.locate(&gps(line), None).await.unwrap(), ErrorCode::DegenerateGeometry);
    // (500, 500) is outside every zone.
    let far = json!([
        {"bx": 0, "by": 0, "d": 707.1067811865476},
        {"bx": 1000, "by": 0, "d": 707.1067811865476},
        {"bx": 0, "by": 1000, "d": 707.1067811865476}]);
    assert_error(&lsp.locate(&gps(far), None).await.unwrap(), ErrorCode::NotCovered);
    assert_error(&lsp.presence_count("atlantis").await.unwrap(), ErrorCode::UnknownZone);
    assert_error(&lsp.post("/lsp/register", &json!({"phone": 1}), None).await.unwrap(), ErrorCode::ParseError);
    node.shutdown().await;
}

#[tokio::test]
async fn gps_locate_returns_position() {
    let node = serve(NodeConfig::new(Role::Lsp, "127.0.0.1:0", &zones_file())).await.unwrap();
    let lsp = NodeClient::new(&node.endpoint());
    let body = json!({"method": "gps", "observations": [
        {"bx": 0, "by": 0, "d": 50.0},
        {"bx": 100, "by": 0, "d": 6500f64.sqrt()},
        {"bx": 0, "by": 100, "d": 4500f64.sqrt()}]});
    let env = lsp.locate(&body, None).await.unwrap();
    assert_eq!(env.data_field("zone_id"), Some(&json!("downtown")));
    let x = env.data_field("x").unwrap().as_f64().unwrap();
    let y = env.data_field("y").unwrap().as_f64().unwrap();
    assert!((x - 30.0).abs() < 1e-9 && (y - 40.0).abs() < 1e-9);
    node.shutdown().await;
}

#[tokio::test]
async fn cu_enforces_zone_and_subscription() {
    let topo = demo::up(&DemoOptions::new(zones_file())).await.unwrap();
    let lsp = NodeClient::new(&topo.lsp_endpoint());
    let downtown = NodeClient::new(&topo.cu_endpoint("downtown").unwrap());
    let harbor = NodeClient::new(&topo.cu_endpoint("harbor").unwrap());
    let token = login(&lsp, "+1 555 0142 000", &["indian"]).await;

    assert_error(&downtown.restaurants("not-a-token").await.unwrap(), ErrorCode::InvalidToken);
    // Not located yet.
    assert_error(&downtown.restaurants(&token).await.unwrap(), ErrorCode::WrongZone);
    lsp.locate(&json!({"method": "rfid", "tag": "T-17"}), Some(&token)).await.unwrap();
    assert!(downtown.restaurants(&token).await.unwrap().is_ok());
    assert_error(&harbor.restaurants(&token).await.unwrap(), ErrorCode::WrongZone);

    assert_error(&downtown.restaurant(&token, "dt-999").await.unwrap(), ErrorCode::NotFound);
    assert_error(&downtown.restaurant(&token, "dt-002").await.unwrap(), ErrorCode::NotAuthorized);
    let env = downtown.query(&token, "thai").await.unwrap();
    assert_eq!(env.data_field("served_by"), Some(&json!("escalated")));
    assert_eq!(env.data_field("source_zone"), Some(&json!("downtown")));
    // The grant makes the record readable and the repeat local.
    assert!(downtown.restaurant(&token, "dt-002").await.unwrap().is_ok());
    let env = downtown.query(&token, "thai").await.unwrap();
    assert_eq!(env.data_field("served_by"), Some(&json!("local")));

    let services = downtown.cu_services(&token).await.unwrap();
    assert_eq!(services.data_field("available"), Some(&json!(["indian", "thai"])));
    topo.shutdown().await;
}

#[tokio::test]
async fn escalation_without_csp_is_reported() {
    let lsp_node = serve(NodeConfig::new(Role::Lsp, "127.0.0.1:0", &zones_file())).await.unwrap();
    let mut cfg = NodeConfig::new(Role::Cu, "127.0.0.1:0", &zones_file());
    cfg.lsp_endpoint = Some(lsp_node.endpoint());
    cfg.csp_endpoint = Some("127.0.0.1:1".into());
    cfg.zone_id = Some("downtown".into());
    cfg.seed_file = Some(fixtures().join("restaurants/downtown.jsonl"));
    let cu_node = serve(cfg).await.unwrap();

    let lsp = NodeClient::new(&lsp_node.endpoint());
    let cu = NodeClient::new(&cu_node.endpoint());
    let token = login(&lsp, "5550143", &["indian"]).await;
    lsp.locate(&json!({"method": "rfid", "tag": "T-17"}), Some(&token)).await.unwrap();
    assert_eq!(cu.query(&token, "indian").await.unwrap().data_field("served_by"), Some(&json!("local")));
    assert_error(&cu.query(&token, "thai").await.unwrap(), ErrorCode::CspUnreachable);
    cu_node.shutdown().await;
    lsp_node.shutdown().await;
}

#[tokio::test]
async fn dead_cloud_unit_gives_partial_result() {
    let mut opts = DemoOptions::new(zones_file());
    opts.heartbeat_ms = Some(100);
    let mut topo = demo::up(&opts).await.unwrap();
    let (zone, harbor) = topo.cus.remove(1);
    assert_eq!(zone, "harbor");
    harbor.shutdown().await;

    let lsp = NodeClient::new(&topo.lsp_endpoint());
    let token = login(&lsp, "5550144", &[]).await;
    lsp.locate(&json!({"method": "rfid", "tag": "T-17"}), Some(&token)).await.unwrap();
    let env = NodeClient::new(&topo.cu_endpoint("downtown").unwrap()).query(&token, "thai").await.unwrap();
    assert!(env.is_ok());
    assert_eq!(env.message, "PartialResult");
    assert_eq!(env.data_field("failed_zones"), Some(&json!(["harbor"])));
    let grouped = common::grouped_ids(env.data_field("grouped").unwrap());
    assert_eq!(grouped.keys().cloned().collect::<Vec<_>>(), ["downtown", "uptown"]);

    // Once heartbeats lapse the zone is reported dead without being asked.
    tokio::time::sleep(Duration::from_millis(400)).await;
    let csp = NodeClient::new(&topo.csp_endpoint());
    assert_error(&csp.route("harbor").await.unwrap(), ErrorCode::NoCuForZone);
    topo.shutdown().await;
}

#[tokio::test]
async fn csp_directory_and_escalation_errors() {
    let topo = demo::up(&DemoOptions::new(zones_file())).await.unwrap();
    let csp = NodeClient::new(&topo.csp_endpoint());
    assert_error(&csp.register_cu("atlantis", "127.0.0.1:9").await.unwrap(), ErrorCode::UnknownZone);
    assert!(csp.register_cu("harbor", "127.0.0.1:9").await.unwrap().is_ok());
    let entries = csp.directory().await.unwrap();
    let harbor_eps = entries.data_field("entries").unwrap().as_array().unwrap().iter().filter(|e| e["zone_id"] == "harbor").count();
    assert_eq!(harbor_eps, 2);

    let req = json!({"request_id": "r1", "user_id": "5550999", "origin_zone": "downtown", "category": "thai"});
    assert_error(&csp.post("/csp/escalate", &req, None).await.unwrap(), ErrorCode::UnknownUser);
    topo.shutdown().await;
}

#[tokio::test]
async fn ingest_replaces_store_and_reports_rejects() {
    let topo = demo::up(&DemoOptions::new(zones_file())).await.unwrap();
    let cu = NodeClient::new(&topo.cu_endpoint("harbor").unwrap());
    let good = r#"{"restaurant_id":"h1","name":"n","address":"a","contact":"5550001","food_style":"thai","x":150,"y":50,"zone_id":"harbor"}"#;
    let foreign = r#"{"restaurant_id":"h2","name":"n","address":"a","contact":"5550002","food_style":"thai","x":50,"y":50,"zone_id":"downtown"}"#;
    let env = cu.ingest(&format!("{good}\n{foreign}\n")).await.unwrap();
    assert_eq!(env.data_field("loaded"), Some(&json!(1)));
    assert_eq!(env.data_field("rejected").unwrap()[0]["reason"], "ZoneMismatch");
    assert_error(&cu.ingest("{not json\n").await.unwrap(), ErrorCode::ParseError);
    topo.shutdown().await;
}

#[tokio::test]
async fn every_response_is_an_envelope() {
    let topo = demo::up(&DemoOptions::new(zones_file())).await.unwrap();
    let http = reqwest::Client::new();
    let cu = topo.cu_endpoint("downtown").unwrap();
    let calls = [
        ("GET", format!("http://{}/healthz", topo.lsp_endpoint())),
        ("POST", format!("http://{}/lsp/login", topo.lsp_endpoint())),
        ("GET", format!("http://{}/lsp/presence/downtown", topo.lsp_endpoint())),
        ("GET", format!("http://{cu}/cu/restaurants")),
        ("POST", format!("http://{cu}/cu/query")),
        ("GET", format!("http://{}/csp/route/nowhere", topo.csp_endpoint())),
        ("POST", format!("http://{}/csp/escalate", topo.csp_endpoint())),
    ];
    for (method, url) in calls {
        let req = if method == "GET" { http.get(&url) } else { http.post(&url).body("{}") };
        let text = req.send().await.unwrap().text().await.unwrap();
        let env: Envelope = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{url}: {e}: {text}"));
        if !env.is_ok() {
            assert!(env.error_code().is_some(), "{url}: undocumented message {:?}", env.message);
            assert!(env.data.is_none());
        }
    }
    topo.shutdown().await;
}

#[tokio::test]
async fn empty_scenario_has_empty_transcript() {
    let scenario = Scenario::parse(r#"{"v":1,"steps":[]}"#).unwrap();
    let transcript = Runner::new("127.0.0.1:1", "127.0.0.1:1").run(&scenario).await;
    assert!(transcript.steps.is_empty());
    assert!(transcript.into_result().is_ok());
}

#[tokio::test]
async fn fixture_journeys_pass() {
    let topo = demo::up(&DemoOptions::new(zones_file())).await.unwrap();
    for name in ["journey.json", "journey_gps.json", "journey_escalation.json"] {
        let scenario = Scenario::load(&fixtures().join(name)).unwrap();
        let runner = Runner::new(&topo.lsp_endpoint(), &topo.csp_endpoint());
        let transcript = runner.run(&scenario).await;
        assert_eq!(transcript.steps.len(), scenario.steps.len());
        assert_eq!(transcript.first_failure(), None, "{name}: {}", transcript.to_json_pretty());
        let token = transcript.steps[1].response.as_ref().unwrap().data_field("token");
        assert_eq!(token, Some(&json!("<redacted>")));
    }
    topo.shutdown().await;
}

#[tokio::test]
async fn mismatch_reports_first_failing_step() {
    let topo = demo::up(&DemoOptions::new(zones_file())).await.unwrap();
    let scenario = Scenario::parse(
        r#"{"v":1,"steps":[
            {"actor":"a","action":"register","args":{"phone":"5550150","password":"long-enough"}},
            {"actor":"a","action":"login","args":{"password":"wrong-password"}},
            {"actor":"a","action":"list"}]}"#,
    )
    .unwrap();
    let transcript = Runner::new(&topo.lsp_endpoint(), &topo.csp_endpoint()).run(&scenario).await;
    assert_eq!(transcript.first_failure(), Some(1));
    assert!(!transcript.steps[2].matched);
    let err = transcript.into_result().unwrap_err();
    assert!(err.to_string().starts_with("StepFailed: step 1"));
    topo.shutdown().await;
}
