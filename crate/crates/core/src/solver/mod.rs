//! The alternating penalty solver, its inner box-constrained minimizer, KKT
//! multiplier estimation and the exactness and stability probes.

mod apfa;
mod inner;
mod kkt;
mod nnls;
mod probe;

pub use apfa::{apfa_solve, SolveResult, SolveStatus, SolverParams, TraceRecord};
pub use inner::{inner_minimize, multistart_minimize, sample_starts, InnerParams, InnerResult};
pub use kkt::{kkt_check, kkt_residual, KktReport, ACTIVE_TOL};
pub use nnls::nnls;
pub use probe::{
    exactness_probe, stability_probe, ExactnessEntry, ExactnessReport, StabilityReport,
    StabilitySample, IMPROVE_TOL,
};
