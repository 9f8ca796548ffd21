//! Bit-accurate simulation toolkit for studying the error resilience of the
//! StEFCal gain-calibration kernel and for modelling a heterogeneous
//! accurate/approximate two-core least-squares accelerator.
//!
//! The crate is organised around six subsystems:
//!
//! * [`fixedpoint`] — signed fixed-point scalars/complex values with
//!   configurable word and fraction lengths, saturation and LSB truncation.
//! * [`datagen`] — synthetic calibration problems (model/measured covariance
//!   matrices plus ground-truth gains) and their file formats.
//! * [`stefcal`] — the alternating least-squares calibration kernel, its
//!   convergence and quality metrics, and run traces.
//! * [`errormodel`] — statistical error injection (Gaussian relative errors
//!   gated by an error rate and an approximate-iteration budget) wrapping any
//!   arithmetic backend.
//! * [`resilience`] — parameter-sweep harness mapping the quality-accepted
//!   region over the injection parameters.
//! * [`accel`] — fixed-point datapath cores, the two-core switching run, the
//!   energy-savings model and the truncation design-space exploration.

pub mod accel;
pub mod datagen;
pub mod errormodel;
pub mod fixedpoint;
pub mod resilience;
pub mod stefcal;

pub use accel::{DatapathConfig, DsePoint, EnergyBreakdown, EnergyModel, PowerModel};
pub use datagen::{CalibrationProblem, ComplexMatrix};
pub use errormodel::{ErrorModelConfig, InjectionSite, NaxBudget};
pub use fixedpoint::{FixedComplex, FixedFormat, FixedScalar, QuantStats, Rounding};
pub use resilience::{ResilienceProfile, SweepGrid};
pub use stefcal::{Backend, CoreTag, ReferenceBackend, RunTrace, StefcalConfig};
