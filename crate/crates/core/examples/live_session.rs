//! Drives a live session by hand, writes its event log, and rebuilds the
//! session from the log.
//!
//! ```text
//! cargo run --release -p simsel --example live_session
//! ```

use simsel::session::SessionConfig;
use simsel::{Method, Response, Session};

fn main() -> simsel::Result<()> {
    let mut session = Session::create("example", SessionConfig::new("memory", Method::Ado, 5, 21))?;
    // A participant who remembers short lags only.
    while let Ok(design) = session.next_design() {
        let recalled = if design.0[0] < 30.0 { 1.0 } else { 0.0 };
        let snap = session.submit_response(Response::scalar(recalled), None)?;
        let marg: Vec<String> = snap.models.iter().map(|m| format!("{} {:.2}", m.name, m.probability)).collect();
        println!("trial {} lag {:5.1}s recalled {recalled}: {}", snap.trial_index, design.0[0], marg.join(", "));
    }
    let dir = std::env::temp_dir().join("simsel-live-session.jsonl");
    session.write_log(&dir)?;
    let rebuilt = Session::read_log(&dir)?;
    assert_eq!(rebuilt.snapshot(), session.snapshot());
    println!("final MAP {:?}; replayed {} events from {}", session.snapshot().map, rebuilt.events().len(), dir.display());
    Ok(())
}
