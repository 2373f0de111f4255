use std::fs;
use std::path::PathBuf;
use std::thread::sleep;
use std::time::Duration;

use clap::Args;
use harbour_core::units::wrap_pi;
use harbour_fed::bridge::HelmOrder;
use harbour_fed::local::LocalClient;
use harbour_fed::rti::{FedMessage, MsgType};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::{exit, interrupted, CmdResult, Failure};

#[derive(Debug, Args)]
pub struct AutopilotArgs {
    /// Script file (TOML).
    #[arg(long)]
    script: PathBuf,
    /// Bridge control address.
    #[arg(long, default_value = "127.0.0.1:4517")]
    control: String,
    /// Snapshot polling period, wall ms.
    #[arg(long, default_value_t = 100)]
    poll_ms: u64,
    /// Stop the bridge session when the script ends.
    #[arg(long)]
    stop: bool,
}

/// One timed helm order; every other key is a HELM_ORDER field.
#[derive(Debug, Clone, Deserialize)]
pub struct TimedOrder {
    pub time: f64,
    #[serde(flatten)]
    pub order: toml::Table,
}

/// Closed-loop heading hold over [start, end) of simulated time.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadingHold {
    pub start: f64,
    pub end: f64,
    /// deg, clockwise from north
    pub heading: f64,
    /// rad of rudder per rad of heading error
    pub kp: f64,
    /// rad of rudder per rad/s of yaw rate
    pub kd: f64,
    /// deg
    #[serde(default = "default_max_rudder")]
    pub max_rudder: f64,
}

fn default_max_rudder() -> f64 {
    35.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutopilotScript {
    #[serde(default)]
    pub orders: Vec<TimedOrder>,
    #[serde(default)]
    pub hold: Vec<HeadingHold>,
}

impl AutopilotScript {
    pub fn parse(text: &str) -> Result<Self, String> {
        let s: AutopilotScript = toml::from_str(text).map_err(|e| e.to_string())?;
        if s.orders.windows(2).any(|w| w[1].time < w[0].time) {
            return Err("order times must be non-decreasing".into());
        }
        for (i, o) in s.orders.iter().enumerate() {
            serde_json::from_value::<HelmOrder>(Self::payload(o))
                .map_err(|e| format!("order {}: {e}", i + 1))?;
        }
        for h in &s.hold {
            if !(h.end > h.start) || !(h.max_rudder > 0.0) {
                return Err(format!(
                    "heading hold from {} s needs end > start and a positive rudder limit",
                    h.start
                ));
            }
        }
        Ok(s)
    }

    fn payload(o: &TimedOrder) -> Value {
        serde_json::to_value(&o.order).expect("toml values map to json")
    }

    fn end(&self) -> f64 {
        let last_order = self.orders.last().map_or(0.0, |o| o.time);
        self.hold.iter().map(|h| h.end).fold(last_order, f64::max)
    }
}

/// PD heading-hold rudder command, rad.
pub fn hold_rudder(h: &HeadingHold, heading: f64, yaw_rate: f64) -> f64 {
    let limit = h.max_rudder.to_radians();
    let err = wrap_pi(h.heading.to_radians() - heading);
    (h.kp * err - h.kd * yaw_rate).clamp(-limit, limit)
}

fn request(c: &mut LocalClient, t: MsgType, p: Value) -> Result<FedMessage, Failure> {
    c.request(t, p)
        .map_err(|e| Failure::new(exit::RUNTIME, format!("bridge connection: {e}")))
}

pub fn run(a: AutopilotArgs) -> CmdResult {
    let text = fs::read_to_string(&a.script)
        .map_err(|e| Failure::config(format!("{}: {e}", a.script.display())))?;
    let script = AutopilotScript::parse(&text)
        .map_err(|e| Failure::config(format!("{}: {e}", a.script.display())))?;
    let mut c = LocalClient::connect(&a.control, "autopilot")
        .map_err(|e| Failure::new(exit::RUNTIME, format!("{}: {e}", a.control)))?;
    let end = script.end();
    let mut next = 0;
    let mut last_rudder: Option<f64> = None;
    loop {
        if interrupted() {
            break;
        }
        let snap = request(&mut c, MsgType::SnapshotRequest, json!({}))?;
        let t = snap.sim_time;
        while next < script.orders.len() && script.orders[next].time <= t {
            let o = &script.orders[next];
            send(&mut c, t, AutopilotScript::payload(o))?;
            next += 1;
        }
        if let Some(h) = script.hold.iter().find(|h| h.start <= t && t < h.end) {
            let heading = snap.f64_field("heading").unwrap_or(0.0);
            let r = snap.f64_field("rate_of_turn").unwrap_or(0.0);
            let rudder = hold_rudder(h, heading, r);
            if last_rudder.map_or(true, |p| (p - rudder).abs() > 1e-4) {
                send(&mut c, t, json!({"rudder": rudder}))?;
                last_rudder = Some(rudder);
            }
        } else {
            last_rudder = None;
        }
        if next == script.orders.len() && t >= end {
            break;
        }
        sleep(Duration::from_millis(a.poll_ms.max(1)));
    }
    if a.stop {
        request(&mut c, MsgType::SessionControl, json!({"action": "stop"}))?;
    }
    println!("autopilot done orders {next}");
    Ok(())
}

fn send(c: &mut LocalClient, t: f64, order: Value) -> Result<(), Failure> {
    let r = request(c, MsgType::HelmOrder, order.clone())?;
    if r.msg_type == MsgType::Error {
        log::warn!("order at {t:.2} s rejected: {:?}", r.payload);
    } else {
        println!("t {t:.2} order {order}");
    }
    Ok(())
}
