use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use foodprompt::persistence::parse_food_list;
use foodprompt::{CoOccurrenceModel, Corpus, Meal, RuleSet};
use foodprompt_service::{bind, AppState, ArmPolicy, ServiceConfig, Snapshot, DEFAULT_SESSION_TTL};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

const RULES: &str = "\
# chain a -> b -> ... -> g
r1\ta\tb\tHad b with a?
r2\tb\tc\tHad c with b?
r3\tc\td\tHad d with c?
r4\td\te\tHad e with d?
r5\te\tf\tHad f with e?
r6\tf\tg\tHad g with f?
r7\ttoast\tbutter\tAnything on the toast?
";

fn hub_model() -> CoOccurrenceModel {
    let mut meals = vec![Meal::from_codes(["toast", "butter"]), Meal::from_codes(["toast", "jam"])];
    for i in 0..30 {
        meals.push(Meal::from_codes(["hub".to_string(), format!("side{i:02}")]));
    }
    CoOccurrenceModel::build(&Corpus::new(meals, "hub").unwrap()).unwrap()
}

fn snapshot(model: bool, rules: bool) -> Snapshot {
    Snapshot {
        model: model.then(hub_model),
        rules: rules.then(|| RuleSet::parse(RULES).unwrap()),
        foods: parse_food_list("toast\tToast, white\nbutter\tButter\njam\tStrawberry jam\nhub\tHub food\n".as_bytes())
            .unwrap(),
    }
}

fn config(policy: ArmPolicy, dir: &Path) -> ServiceConfig {
    ServiceConfig {
        arm_policy: policy,
        seed: 7,
        log_dir: dir.to_path_buf(),
        session_ttl: DEFAULT_SESSION_TTL,
    }
}

struct Server {
    base: String,
    http: Client,
    task: tokio::task::JoinHandle<()>,
}

impl Drop for Server {
    fn drop(&mut self) {
        self.task.abort();
    }
}

impl Server {
    async fn start(snapshot: Snapshot, config: &ServiceConfig) -> Server {
        let state = Arc::new(AppState::new(snapshot, config).unwrap());
        let addr: SocketAddr = "127.0.0.1:0".parse().unwrap();
        let (local, serve) = bind(state, addr).await.unwrap();
        let task = tokio::spawn(async move {
            serve.await.unwrap();
        });
        Server {
            base: format!("http://{local}"),
            http: Client::new(),
            task,
        }
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let resp = self.http.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap())
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let resp = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap())
    }

    async fn ok(&self, path: &str, body: Value) -> Value {
        let (status, value) = self.post(path, body).await;
        assert_eq!(status, StatusCode::OK, "{path}: {value}");
        value
    }

    async fn session(&self) -> (String, String) {
        let v = self.ok("/sessions", json!({"device_class": "mobile"})).await;
        (v["session_id"].as_str().unwrap().to_string(), v["arm"].as_str().unwrap().to_string())
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn handcoded_session_prompts_per_food_and_persists() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(snapshot(true, true), &config("fixed:handcoded".parse().unwrap(), dir.path())).await;
    let (id, arm) = server.session().await;
    assert_eq!(arm, "handcoded");

    let meal = server.ok(&format!("/sessions/{id}/meals"), json!({"name": "breakfast"})).await;
    assert_eq!(meal["meal_index"], 0);
    let prompts = server.ok(&format!("/sessions/{id}/meals/0/foods"), json!({"food": "toast"})).await;
    assert_eq!(prompts["prompts"][0]["food"], "butter");
    let event = prompts["event_id"].as_str().unwrap().to_string();

    let (status, err) = server
        .post(&format!("/sessions/{id}/events/{event}/accept"), json!({"accepted": ["jam"]}))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "not_shown");

    let outcome = server
        .ok(&format!("/sessions/{id}/events/{event}/accept"), json!({"accepted": ["butter"]}))
        .await;
    assert_eq!(outcome["meal"]["foods"], json!(["toast", "butter"]));

    let (status, _) = server
        .post(&format!("/sessions/{id}/events/{event}/accept"), json!({"accepted": []}))
        .await;
    assert_eq!(status, StatusCode::CONFLICT);

    // Generated lists are never produced for handcoded sessions.
    let finished = server.ok(&format!("/sessions/{id}/meals/0/finish"), json!({})).await;
    assert_eq!(finished["event_id"], Value::Null);

    let recall = server
        .ok(&format!("/sessions/{id}/submit"), json!({"duration_minutes": 12.5, "energy_kcal": 900.0}))
        .await;
    assert_eq!(recall["arm"], "handcoded");
    assert_eq!(recall["recall_id"], id.as_str());

    let (status, _) = server.post(&format!("/sessions/{id}/meals"), json!({"name": "late"})).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let events = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    assert_eq!(events.lines().count(), 1);
    let recalls = std::fs::read_to_string(dir.path().join("recalls.jsonl")).unwrap();
    assert_eq!(recalls.lines().count(), 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn rule_chain_stops_at_depth_five() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(snapshot(false, true), &config("fixed:handcoded".parse().unwrap(), dir.path())).await;
    let (id, _) = server.session().await;
    server.ok(&format!("/sessions/{id}/meals"), json!({"name": "lunch"})).await;
    let mut prompts = server.ok(&format!("/sessions/{id}/meals/0/foods"), json!({"food": "a"})).await;
    let mut screens = 0;
    while let Some(event) = prompts["event_id"].as_str().map(str::to_string) {
        screens += 1;
        let food = prompts["prompts"][0]["food"].clone();
        let outcome = server
            .ok(&format!("/sessions/{id}/events/{event}/accept"), json!({"accepted": [food]}))
            .await;
        prompts = outcome["follow_up"].clone();
    }
    assert_eq!(screens, 5);
    let recall = server.ok(&format!("/sessions/{id}/submit"), json!({"duration_minutes": 3.0})).await;
    assert_eq!(recall["meals"][0]["foods"], json!(["a", "b", "c", "d", "e", "f"]));
}

#[tokio::test(flavor = "multi_thread")]
async fn generated_session_gets_one_capped_list_per_meal() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(snapshot(true, true), &config("fixed:generated".parse().unwrap(), dir.path())).await;
    let (id, arm) = server.session().await;
    assert_eq!(arm, "generated");

    server.ok(&format!("/sessions/{id}/meals"), json!({"name": "dinner"})).await;
    let immediate = server.ok(&format!("/sessions/{id}/meals/0/foods"), json!({"food": "toast"})).await;
    assert_eq!(immediate["event_id"], Value::Null, "no rule prompts in the generated arm");
    server.ok(&format!("/sessions/{id}/meals/0/foods"), json!({"food": "hub"})).await;

    let list = server.ok(&format!("/sessions/{id}/meals/0/finish"), json!({})).await;
    let recs = list["recommendations"].as_array().unwrap();
    assert_eq!(recs.len(), 15);
    let shown: Vec<&str> = recs.iter().map(|r| r["food"].as_str().unwrap()).collect();
    assert!(!shown.contains(&"toast") && !shown.contains(&"hub"));
    let event = list["event_id"].as_str().unwrap().to_string();

    let (status, _) = server.post(&format!("/sessions/{id}/meals/0/finish"), json!({})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = server.post(&format!("/sessions/{id}/meals/0/foods"), json!({"food": "jam"})).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let outcome = server
        .ok(&format!("/sessions/{id}/events/{event}/accept"), json!({"accepted": [shown[0], shown[3]]}))
        .await;
    assert_eq!(outcome["follow_up"]["event_id"], Value::Null);
    assert_eq!(outcome["meal"]["foods"].as_array().unwrap().len(), 4);

    server.ok(&format!("/sessions/{id}/submit"), json!({"duration_minutes": 8.0, "energy_kcal": 1200.0})).await;
    let (status, metrics) = server.get("/metrics").await;
    assert_eq!(status, StatusCode::OK);
    let generated = metrics["arms"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["arm"] == "generated")
        .unwrap();
    assert_eq!(generated["foods_shown"], 15);
    assert_eq!(generated["foods_accepted"], 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_are_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(snapshot(true, true), &config(ArmPolicy::Alternate, dir.path())).await;
    let (first, arm1) = server.session().await;
    let (second, arm2) = server.session().await;
    assert_ne!(first, second);
    assert_ne!(arm1, arm2);

    for id in [&first, &second] {
        server.ok(&format!("/sessions/{id}/meals"), json!({"name": "snack"})).await;
    }
    server.ok(&format!("/sessions/{first}/meals/0/foods"), json!({"food": "toast"})).await;
    server.ok(&format!("/sessions/{second}/meals/0/foods"), json!({"food": "jam"})).await;

    let (status, err) = server.post(&format!("/sessions/{second}/events/{first}-e1/accept"), json!({"accepted": []})).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{err}");

    let r1 = server.ok(&format!("/sessions/{first}/submit"), json!({"duration_minutes": 1.0})).await;
    let r2 = server.ok(&format!("/sessions/{second}/submit"), json!({"duration_minutes": 1.0})).await;
    assert_eq!(r1["meals"][0]["foods"], json!(["toast"]));
    assert_eq!(r2["meals"][0]["foods"], json!(["jam"]));
}

#[tokio::test(flavor = "multi_thread")]
async fn missing_arm_data_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(snapshot(false, true), &config("fixed:generated".parse().unwrap(), dir.path())).await;
    let (status, err) = server.post("/sessions", json!({})).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(err["error"], "arm_unavailable");
    let (_, health) = server.get("/health").await;
    assert_eq!(health["model_loaded"], false);
    assert_eq!(health["rules_loaded"], true);
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_requests_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(snapshot(true, true), &config(ArmPolicy::Random, dir.path())).await;
    let (status, _) = server.post("/sessions/nope/meals", json!({"name": "x"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (id, _) = server.session().await;
    let (status, _) = server.post(&format!("/sessions/{id}/meals/3/foods"), json!({"food": "toast"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    server.ok(&format!("/sessions/{id}/meals"), json!({"name": "x"})).await;
    let (status, _) = server.post(&format!("/sessions/{id}/meals/0/foods"), json!({"food": "two words"})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = server.post(&format!("/sessions/{id}/meals/0/finish"), json!({})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "empty meal cannot be finished");
    let (status, _) = server.post(&format!("/sessions/{id}/submit"), json!({"duration_minutes": 2.0})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "empty recall");
    let (status, _) = server.post(&format!("/sessions/{id}/meals/0/foods"), json!({"food": "toast"})).await;
    assert_eq!(status, StatusCode::OK, "session still open after a rejected submit");
    let (status, _) = server.post(&format!("/sessions/{id}/submit"), json!({"duration_minutes": -2.0})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test(flavor = "multi_thread")]
async fn food_search_is_case_insensitive() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(snapshot(true, true), &config(ArmPolicy::Alternate, dir.path())).await;
    let (_, hits) = server.get("/foods?q=TOAST").await;
    assert_eq!(hits, json!([{"code": "toast", "name": "Toast, white"}]));
    let (_, hits) = server.get("/foods?q=t&limit=2").await;
    assert_eq!(hits.as_array().unwrap().len(), 2);
    let (_, hits) = server.get("/foods").await;
    assert_eq!(hits, json!([]));
}

#[tokio::test(flavor = "multi_thread")]
async fn logs_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(ArmPolicy::Alternate, dir.path());
    let first_id = {
        let server = Server::start(snapshot(true, true), &cfg).await;
        let (id, _) = server.session().await;
        server.ok(&format!("/sessions/{id}/meals"), json!({"name": "x"})).await;
        server.ok(&format!("/sessions/{id}/meals/0/foods"), json!({"food": "toast"})).await;
        server.ok(&format!("/sessions/{id}/submit"), json!({"duration_minutes": 4.0})).await;
        id
    };
    let server = Server::start(snapshot(true, true), &cfg).await;
    let (second_id, _) = server.session().await;
    assert!(second_id > first_id, "{second_id} should follow {first_id}");
    let (_, metrics) = server.get("/metrics").await;
    let total: u64 = metrics["arms"].as_array().unwrap().iter().map(|a| a["recalls"].as_u64().unwrap()).sum();
    assert_eq!(total, 1);
}
