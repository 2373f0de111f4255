//! Control tower federate: traffic picture, port rules, missions, metrics
//! and the teleport view.

pub mod core;
pub mod picture;
pub mod runner;

pub use self::core::{
    read_event_log, EventLogWriter, TeleportView, TowerCore, TowerError, CONNING_FRESH,
};
pub use picture::{
    Ingest, TrafficPicture, TrafficRecord, TrafficView, DEFAULT_HISTORY, HISTORY_PERIOD,
    STALE_AFTER,
};
pub use runner::{start_tower, TowerHandle, TowerOptions, TowerReport, DEFAULT_QUERY_PORT};
