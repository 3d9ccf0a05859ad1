pub mod calibrate;
pub mod check;
pub mod metrics;
pub mod retarget;
pub mod stabilize;
