//! Starts the service in-process and runs a five-trial risky-choice session
//! over HTTP, answering with a participant who prefers the safer lottery.
//!
//! ```text
//! cargo run --release -p simsel-service --example http_client
//! ```

use std::time::Duration;

use serde_json::{json, Value};
use simsel_service::{AppState, ServiceConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let state = AppState::open(ServiceConfig::new(dir.path()))?;
    let (addr, _server) = simsel_service::spawn(state, "127.0.0.1:0".parse()?).await?;
    let base = format!("http://{addr}");
    let http = reqwest::Client::new();

    let created: Value = http
        .post(format!("{base}/sessions"))
        .json(&json!({"v": 1, "task": "risky", "method": "bosmos", "budget": 5, "seed": 8}))
        .send()
        .await?
        .json()
        .await?;
    let id = created["session_id"].as_str().unwrap_or_default().to_string();
    println!("session {id}");

    loop {
        let r = http.get(format!("{base}/sessions/{id}/next-design")).send().await?;
        match r.status().as_u16() {
            202 => {
                tokio::time::sleep(Duration::from_millis(100)).await;
                continue;
            }
            409 => break,
            _ => {}
        }
        let d: Value = r.json().await?;
        let hint = &d["render_hint"];
        let spread = |l: &Value| l["p_low"].as_f64().unwrap_or(0.0) + l["p_high"].as_f64().unwrap_or(0.0);
        let choice = if spread(&hint["lottery_b"]) < spread(&hint["lottery_a"]) { 1.0 } else { 0.0 };
        let snap: Value = http
            .post(format!("{base}/sessions/{id}/response"))
            .json(&json!({"trial_index": d["trial_index"], "response": [choice]}))
            .send()
            .await?
            .json()
            .await?;
        let marg: Vec<String> = snap["models"]
            .as_array()
            .into_iter()
            .flatten()
            .map(|m| format!("{} {:.2}", m["name"].as_str().unwrap_or("?"), m["probability"].as_f64().unwrap_or(0.0)))
            .collect();
        println!("trial {} chose {}: {}", d["trial_index"], if choice == 1.0 { "B" } else { "A" }, marg.join(", "));
    }
    let post: Value = http.get(format!("{base}/sessions/{id}/posterior")).send().await?.json().await?;
    println!("phase {}, MAP {}", post["phase"], post["map"]);
    Ok(())
}
