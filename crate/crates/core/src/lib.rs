//! Identification of linear periodically time-varying (LPTV) state-space
//! systems through their cyclic reformulation.
//!
//! The pipeline cycles the measured input/output signals into block-sparse
//! form, identifies a time-invariant model of order `M n` with a subspace
//! method, transforms it into block-cyclic coordinates and reads the per-phase
//! matrices `A_k, B_k, C_k, D_k` back out. See [`transform::identify_lptv`].
//!
//! All numerical code is generic over [`Real`] (`f32`/`f64`); the `*F64`
//! aliases below name the common double-precision instantiations.

pub mod cyclic;
pub mod error;
pub mod io;
pub mod linalg;
pub mod markov;
pub mod model;
pub mod scalar;
pub mod subspace;
pub mod transform;

pub use cyclic::{
    build_cyclic, cycle_input, extract_periodic, is_block_diagonal, is_cyclic, shift_matrix,
    simulate_cycled, uncycle_output, CycledModel, CycledSignal, ShiftMatrix,
};
pub use error::{Error, ErrorClass, Result, Stage};
pub use markov::{check_structure, compare_markov, markov_parameters, MarkovSequence, StateSpace};
pub use model::{
    generate_random_plant, simulate_lptv, validate_model, LptvModel, NoiseSpec, PlantDims,
    SignalSequence, ValidationReport,
};
pub use scalar::Real;
pub use subspace::{estimate_order, subspace_identify, HankelConfig, IdentifiedLtiModel};
pub use transform::{
    apply_phi, apply_transformation, build_transformation, default_selector, identify_lptv,
    observability_aggregate, project_structure, IdentifyConfig, PhiFreedom, SelectorMatrix,
    TransformationMatrix,
};

pub type LptvModelF64 = LptvModel<f64>;
pub type LptvModelF32 = LptvModel<f32>;
pub type CycledModelF64 = CycledModel<f64>;
pub type CycledModelF32 = CycledModel<f32>;
pub type SignalF64 = SignalSequence<f64>;
pub type SignalF32 = SignalSequence<f32>;
pub type CycledSignalF64 = CycledSignal<f64>;
pub type IdentifiedLtiModelF64 = IdentifiedLtiModel<f64>;
pub type MarkovSequenceF64 = MarkovSequence<f64>;
pub type SelectorMatrixF64 = SelectorMatrix<f64>;
pub type TransformationMatrixF64 = TransformationMatrix<f64>;
