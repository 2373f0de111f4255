use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::mpsc::{channel, Receiver};
use std::thread;
use std::time::{Duration, Instant};

use harbour_fed::local::LocalClient;
use harbour_fed::rti::{MsgType, RtiClient};
use serde_json::json;
use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_harboursim");

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> PathBuf {
    root().join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(root())
        .env("RUST_LOG", "warn")
        .env_remove("HARBOUR_RTI")
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

/// A long-running subcommand with its stdout lines on a channel.
struct Proc {
    child: Child,
    lines: Receiver<String>,
}

impl Proc {
    fn spawn(args: &[&str]) -> Proc {
        let mut child = Command::new(BIN)
            .args(args)
            .current_dir(root())
            .env("RUST_LOG", "warn")
            .env_remove("HARBOUR_RTI")
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        let (tx, rx) = channel();
        let out = child.stdout.take().unwrap();
        thread::spawn(move || {
            for l in BufReader::new(out).lines().map_while(Result::ok) {
                if tx.send(l).is_err() {
                    break;
                }
            }
        });
        Proc { child, lines: rx }
    }

    /// Next stdout line containing `needle`.
    fn expect(&self, needle: &str) -> String {
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let l = self
                .lines
                .recv_timeout(left)
                .unwrap_or_else(|_| panic!("no line containing {needle:?}"));
            if l.contains(needle) {
                return l;
            }
        }
    }

    /// Address printed after `key`.
    fn addr(&self, needle: &str, key: &str) -> String {
        let l = self.expect(needle);
        let mut it = l.split_whitespace();
        it.find(|w| *w == key).unwrap();
        it.next().unwrap().to_string()
    }

    fn interrupt(&self) {
        let ok = Command::new("kill")
            .args(["-INT", &self.child.id().to_string()])
            .status()
            .unwrap();
        assert!(ok.success());
    }

    fn wait(&mut self, limit: Duration) -> i32 {
        let t0 = Instant::now();
        loop {
            if let Some(s) = self.child.try_wait().unwrap() {
                return s.code().unwrap_or(-1);
            }
            assert!(t0.elapsed() < limit, "process did not exit");
            thread::sleep(Duration::from_millis(20));
        }
    }
}

impl Drop for Proc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn serve() -> (Proc, String) {
    let p = Proc::spawn(&["serve", "--listen", "127.0.0.1:0"]);
    let addr = p.addr("rti listening", "on");
    (p, addr)
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

#[test]
fn circle_trial_writes_record_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "trial", "circle", "--speed", "8kn", "--rudder", "-35", "--ship", "kriso", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("tactical_diameter_m"));
    let csv = fs::read_to_string(dir.path().join("circle_8kn_-35deg.csv")).unwrap();
    assert!(csv.starts_with("t,x,y,psi,u,v,r,delta,n,beta,speed"));
    let metrics = fs::read_to_string(dir.path().join("circle_8kn_-35deg.metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value\n"));
}

#[test]
fn zigzag_trial_reports_overshoots() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "trial",
        "zigzag",
        "--pair",
        "10/10",
        "--speed",
        "5kn",
        "--format",
        "csv",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let n = text(&o.stdout)
        .lines()
        .filter(|l| l.contains(",overshoot_"))
        .count();
    assert!(n >= 2, "{}", text(&o.stdout));
}

#[test]
fn config_errors_exit_2() {
    let o = run(&["trial", "circle", "--ship", "ships/missing.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "schema = 1\n\n[particulars\n").unwrap();
    let o = run(&["trial", "circle", "--ship", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("line 3"), "{}", text(&o.stderr));
    assert_eq!(
        run(&["trial", "circle", "--rudder", "60"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["bridge", "--scenario", "scenarios/none.toml"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn trial_timeout_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "trial",
        "stop",
        "--speed",
        "8kn",
        "--max-time",
        "30",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o.stderr));
}

#[test]
fn bind_failure_exits_4() {
    let (_rti, addr) = serve();
    let o = run(&["serve", "--listen", &addr]);
    assert_eq!(o.status.code(), Some(4));
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().to_string();
    let o = run(&[
        "bridge",
        "--standalone",
        "--scenario",
        scenario("salerno_entry.toml").to_str().unwrap(),
        "--control",
        &port,
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn bridge_without_server_runs_standalone() {
    let o = run(&[
        "bridge",
        "--rti",
        "127.0.0.1:9",
        "--control",
        "127.0.0.1:0",
        "--duration",
        "1",
        "--time-scale",
        "10",
        "--scenario",
        scenario("salerno_entry.toml").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("standalone"));
    assert!(text(&o.stderr).contains("running standalone"));
}

#[test]
fn federation_end_to_end() {
    let (_rti, rti) = serve();
    let scen = scenario("salerno_entry.toml");
    let scen = scen.to_str().unwrap();
    let tower = Proc::spawn(&[
        "tower",
        "--rti",
        &rti,
        "--query",
        "127.0.0.1:0",
        "--scenario",
        scen,
    ]);
    let query = tower.addr("tower tower query", "query");
    let mut q = LocalClient::connect(&query, "test").unwrap();

    let mut bridge = Proc::spawn(&[
        "bridge",
        "--rti",
        &rti,
        "--control",
        "127.0.0.1:0",
        "--scenario",
        scen,
    ]);
    let line = bridge.expect("federated");
    let joined = Instant::now();
    assert!(line.contains("bridge-pilot"));
    let seen = loop {
        let p = q.request(MsgType::PictureRequest, json!({})).unwrap();
        if p.payload["ships"]
            .as_array()
            .is_some_and(|s| s.iter().any(|s| s["id"] == "pilot"))
        {
            break joined.elapsed();
        }
        assert!(joined.elapsed() < Duration::from_secs(5));
        thread::sleep(Duration::from_millis(10));
    };
    assert!(
        seen <= Duration::from_millis(500),
        "ship visible after {seen:?}"
    );

    let dup = run(&[
        "bridge",
        "--rti",
        &rti,
        "--control",
        "127.0.0.1:0",
        "--scenario",
        scen,
    ]);
    assert_eq!(dup.status.code(), Some(5), "{}", text(&dup.stderr));

    let watcher = RtiClient::connect(&rti, "watcher").unwrap();
    bridge.interrupt();
    assert_eq!(bridge.wait(Duration::from_secs(5)), 0);
    let deadline = Instant::now() + Duration::from_secs(3);
    let resign = loop {
        let m = watcher
            .recv_timeout(deadline.saturating_duration_since(Instant::now()))
            .unwrap();
        if m.msg_type == MsgType::Resign {
            break m;
        }
    };
    assert_eq!(resign.str_field("federate"), Some("bridge-pilot"));
    assert_eq!(resign.str_field("reason"), Some("voluntary"));
}

#[test]
fn replay_reproduces_session() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("orders.jsonl");
    let traj = dir.path().join("session.csv");
    let scen = scenario("salerno_entry.toml");
    let bridge = Proc::spawn(&[
        "bridge",
        "--standalone",
        "--control",
        "127.0.0.1:0",
        "--duration",
        "20",
        "--time-scale",
        "10",
        "--order-log",
        log.to_str().unwrap(),
        "--trajectory",
        traj.to_str().unwrap(),
        "--scenario",
        scen.to_str().unwrap(),
    ]);
    let control = bridge.addr("standalone", "control");
    let mut c = LocalClient::connect(&control, "test").unwrap();
    c.request(
        MsgType::HelmOrder,
        json!({"rudder": 0.2, "telegraph": "full_ahead"}),
    )
    .unwrap();
    thread::sleep(Duration::from_millis(500));
    c.request(MsgType::HelmOrder, json!({"rudder": -0.1}))
        .unwrap();
    bridge.expect("bridge stopped");
    drop(bridge);

    let out = dir.path().join("replay.csv");
    let o = run(&[
        "replay",
        "--log",
        log.to_str().unwrap(),
        "--scenario",
        scen.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert_eq!(sha(&out), sha(&traj));
    assert!(text(&o.stdout).contains(&sha(&traj)));

    let lines: Vec<String> = fs::read_to_string(&log)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    let cut = dir.path().join("cut.jsonl");
    fs::write(
        &cut,
        format!("{}\n{{\"kind\":", lines[..lines.len() - 1].join("\n")),
    )
    .unwrap();
    let o = run(&[
        "replay",
        "--log",
        cut.to_str().unwrap(),
        "--scenario",
        scen.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stderr).contains("truncated"));
    assert!(fs::read_to_string(&traj)
        .unwrap()
        .starts_with(&text(&o.stdout)));

    let tampered = dir.path().join("tampered.jsonl");
    let mut header: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    header["config_hash"] = json!("0".repeat(64));
    fs::write(&tampered, format!("{header}\n{}\n", lines[1..].join("\n"))).unwrap();
    let o = run(&[
        "replay",
        "--log",
        tampered.to_str().unwrap(),
        "--scenario",
        scen.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o.stderr));
}

#[test]
fn autopilot_holds_heading() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("hold.toml");
    fs::write(
        &script,
        "[[orders]]\ntime = 0.0\ntelegraph = \"full_ahead\"\n\n\
         [[hold]]\nstart = 1.0\nend = 240.0\nheading = 15.0\nkp = 3.0\nkd = 60.0\n",
    )
    .unwrap();
    let bridge = Proc::spawn(&[
        "bridge",
        "--standalone",
        "--control",
        "127.0.0.1:0",
        "--time-scale",
        "30",
        "--scenario",
        scenario("salerno_entry.toml").to_str().unwrap(),
    ]);
    let control = bridge.addr("standalone", "control");
    let o = run(&[
        "autopilot",
        "--script",
        script.to_str().unwrap(),
        "--control",
        &control,
        "--poll-ms",
        "20",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let mut c = LocalClient::connect(&control, "test").unwrap();
    let snap = c.request(MsgType::SnapshotRequest, json!({})).unwrap();
    let heading = snap.f64_field("heading").unwrap().to_degrees();
    assert!((heading - 15.0).abs() < 3.0, "heading {heading}");
    c.request(MsgType::SessionControl, json!({"action": "stop"}))
        .unwrap();
    bridge.expect("bridge stopped");

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[[orders]]\ntime = 2.0\n[[orders]]\ntime = 1.0\n").unwrap();
    let o = run(&[
        "autopilot",
        "--script",
        bad.to_str().unwrap(),
        "--control",
        &control,
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metrics_from_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let events = [
        json!({"kind": "mission_complete", "sim_time": 300.0, "ships": ["a"], "detail": "", "value": 300.0}),
        json!({"kind": "mission_complete", "sim_time": 500.0, "ships": ["b"], "detail": "", "value": 500.0}),
        json!({"kind": "speed_violation", "sim_time": 20.0, "ships": ["a"], "detail": ""}),
        json!({"kind": "channel_violation", "sim_time": 30.0, "ships": ["a", "b"], "detail": ""}),
        json!({"kind": "grounding", "sim_time": 40.0, "ships": ["b"], "detail": ""}),
    ];
    let body: Vec<String> = events.iter().map(|e| e.to_string()).collect();
    fs::write(&log, body.join("\n") + "\n").unwrap();
    let o = run(&[
        "metrics",
        "--event-log",
        log.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert!(out.starts_with("metric,value\n"));
    for row in [
        "missions,2",
        "mission_mean_s,400",
        "mission_std_s,100",
        "groundings,1",
        "wrong_manoeuvres,2",
    ] {
        assert!(out.lines().any(|l| l == row), "missing {row} in\n{out}");
    }
    fs::write(&log, "{not json}\n").unwrap();
    assert_eq!(
        run(&["metrics", "--event-log", log.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}
