pub mod calibrate;
pub mod dse;
pub mod energy;
pub mod gen;
pub mod resilience;
