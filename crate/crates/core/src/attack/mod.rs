//! Gradient-inversion attacks on analytic tasks and the leakage they achieve.

pub mod inversion;
pub mod leakage;
pub mod task;

pub use inversion::{protected_gradient, run_inversion, trace_csv, AttackTrace, Optimizer, ProtectedRelease};
pub use leakage::{fit_regret, privacy_leakage, verify_privacy_distortion, DistortionConfig, DistortionOutcome, RegretFit};
pub use task::{DataDomain, LossFamily, ReconstructionTask};
