//! Local witnesses for quantum memory in qubit dynamics: channel algebra,
//! entanglement monotones of Choi states, time-local master equations,
//! non-Markovianity measures, classical-memory representations and
//! quantum-jump trajectories.
//!
//! The algebra layer is generic over [`scalar::Real`]; the aliases below fix
//! it to `f64` (and `f32` with an `F32` suffix).

pub mod channel;
pub mod error;
pub mod linalg;
pub mod operator;
pub mod scalar;
pub mod entanglement;
pub mod families;
pub mod io;
pub mod ode;
pub mod meq;
pub mod random;
pub mod nonmarkov;
pub mod witness;
pub mod classical;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Operator = operator::Operator<f64>;
pub type DensityMatrix = operator::DensityMatrix<f64>;
pub type QuantumChannel = channel::QuantumChannel<f64>;
pub type Dynamics = channel::Dynamics<f64>;
pub type AffineForm = channel::AffineForm<f64>;
pub type ThermalAdParams = families::ThermalAdParams<f64>;
pub type ToyModelParams = families::ToyModelParams<f64>;

pub type OperatorF32 = operator::Operator<f32>;
pub type DensityMatrixF32 = operator::DensityMatrix<f32>;
pub type QuantumChannelF32 = channel::QuantumChannel<f32>;
pub type DynamicsF32 = channel::Dynamics<f32>;

pub use classical::{verify_representation, ClassicalMemoryRepresentation};
pub use meq::{PropagatorFamily, TimeLocalGksl};
pub use trajectory::{DampFlipScheme, JumpScheme};
pub use witness::{evaluate_witness, Verdict, WitnessReport};
