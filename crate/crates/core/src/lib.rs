//! Pauli-string simulation of spin chains and data-driven extraction of the
//! linear generators that drive their observable dynamics.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod dense;
pub mod dictionary;
pub mod error;
pub mod gedmd;
pub mod hamiltonian;
pub mod hydro;
pub mod linalg;
pub mod pauli;
pub mod propagator;
pub mod scalar;

pub use dictionary::{Dictionary, SiteRange};
pub use error::{Error, Result};
pub use gedmd::{
    assemble_block, fit_liouvillian, liouvillian_trace, max_dissipation_pole, reconstruct,
    reconstruct_rows, spectrum, DerivMode, LiouvillianEstimate, SnapshotBlock, Spectrum,
    WindowSpec,
};
pub use hamiltonian::{build_hamiltonian, build_quench_pair, ChainSpec, QuenchSpec};
pub use hydro::{bulk_median, extract_coefficients, time_average, CoarseGrainSweep, HydroProfile};
pub use pauli::{pauli_mul, Letter, ObservableExpr, PauliString, Phase, Role, StateVector};
pub use propagator::{
    run_trajectory, run_trajectory_multi, run_trajectory_path, EvolutionSchedule, HamiltonianPath, Propagator, RecordMode,
    TrajectoryRecord,
};
pub use scalar::Real;

pub type State = StateVector<f64>;
pub type Observable = ObservableExpr<f64>;
pub type Chain = ChainSpec<f64>;
pub type Dict = Dictionary<f64>;
pub type Record = TrajectoryRecord<f64>;
pub type Window = WindowSpec<f64>;
pub type Block = SnapshotBlock<f64>;
pub type Estimate = LiouvillianEstimate<f64>;
pub type Profile = HydroProfile<f64>;
