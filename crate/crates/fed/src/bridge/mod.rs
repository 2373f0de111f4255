//! Ship bridge federate: one piloted ship simulated in real time.

pub mod log;
pub mod runner;
pub mod sim;

pub use log::{
    read_order_log, replay, LogEntry, LogHeader, OrderLog, OrderLogWriter, ReplayError,
    ReplayReport, TrajectoryWriter, TRAJECTORY_HEADER,
};
pub use runner::{
    conning_object, conning_ship, start_bridge, BridgeHandle, BridgeOptions, BridgeReport,
    RunError, CONNING_CLASS, DEFAULT_CONTROL_PORT, ENVIRONMENT_CLASS, MAX_CATCH_UP,
    SHIP_STATE_CLASS,
};
pub use sim::{
    AnchorOrder, BridgeError, BridgeSim, ConningSnapshot, Detent, EnvironmentUpdate, HelmOrder,
    Setpoints, Telegraph, TelegraphTable, WaveSpec, ANCHOR_MAX_SPEED_KN, DEFAULT_DT,
    SHIP_STATE_SCHEMA,
};
