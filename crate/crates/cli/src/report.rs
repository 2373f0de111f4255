use std::path::Path;

use harbour_core::port::SessionMetrics;
use harbour_fed::tower::read_event_log;

use crate::{exit, CmdResult, Failure, Format};

fn rows(m: &SessionMetrics) -> Vec<(String, String)> {
    let mut out = vec![
        ("missions".to_string(), m.mission_times.len().to_string()),
        ("mission_mean_s".to_string(), m.mission_mean.to_string()),
        ("mission_std_s".to_string(), m.mission_std.to_string()),
        ("collisions".to_string(), m.collisions.to_string()),
        ("groundings".to_string(), m.groundings.to_string()),
    ];
    for (rule, n) in &m.violations {
        out.push((rule.clone(), n.to_string()));
    }
    out.push((
        "wrong_manoeuvres".to_string(),
        m.wrong_manoeuvres().to_string(),
    ));
    out
}

pub fn metrics(path: &Path, format: Format) -> CmdResult {
    let events = read_event_log(path).map_err(|e| {
        let code = if e.kind() == std::io::ErrorKind::InvalidData {
            exit::CONFIG
        } else {
            exit::RUNTIME
        };
        Failure::new(code, format!("{}: {e}", path.display()))
    })?;
    let m = SessionMetrics::from_events(&events);
    match format {
        Format::Csv => {
            println!("metric,value");
            for (k, v) in rows(&m) {
                println!("{k},{v}");
            }
        }
        Format::Json => {
            let mut v = serde_json::to_value(&m).map_err(|e| Failure::new(exit::RUNTIME, e))?;
            v["wrong_manoeuvres"] = m.wrong_manoeuvres().into();
            println!("{v}");
        }
        Format::Table => {
            for (k, v) in rows(&m) {
                println!("{k:<20} {v}");
            }
        }
    }
    Ok(())
}
