//! Pulse-level simulator of a transmon-coupled superconducting cavity
//! quantum memory, plus the companion analytic and microwave-design
//! toolkit.

pub mod analytic_models;
pub mod cavity_design;
pub mod control_pulses;
pub mod experiments;
pub mod fit;
pub mod linalg;
pub mod operator_core;
pub mod lindblad_engine;
pub mod system_model;
