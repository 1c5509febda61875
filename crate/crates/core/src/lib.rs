//! Multi-qudit singlet states: the permutation Hamiltonian whose ground state
//! they are, their behaviour under local measurements, their entanglement,
//! and the SU(d) Hubbard model they emerge from at strong coupling.

pub mod entanglement;
pub mod error;
pub mod hamiltonian;
pub mod harness;
pub mod hubbard;
pub mod lanczos;
pub mod measurement;
pub mod network;
pub mod qudit;
pub mod singlet;
pub mod verify;

pub use error::{Error, Result};
pub use harness::{run_scenario, Command, RunReport, ScenarioConfig};
pub use network::{QuditNetwork, Topology};
pub use qudit::{Bipartition, DensityMatrix, StateVector, UnitaryMatrix};
pub use singlet::{build_full_singlet, build_singlet, SingletSpec};
pub use verify::{verify_all, CheckOutcome, Level};
