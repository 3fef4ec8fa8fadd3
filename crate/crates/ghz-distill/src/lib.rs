//! Distillation of maximally entangled three-qubit (GHZ) states from
//! arbitrary tripartite pure states by local POVM steps.
//!
//! The library covers:
//!
//! - [`state`]: the 8-amplitude state type, Schmidt decompositions, partial
//!   traces, local unitaries, and Haar sampling;
//! - [`measures`]: local binary entropy and the three GHZ-distance measures
//!   D_p, D_S, D_2;
//! - [`povm`]: the single ancilla-mediated POVM step, in the Schmidt basis or
//!   a rotated one, with big-step and incremental settings of alpha;
//! - [`protocols`]: full expectation-mode distillation runs (big-step and
//!   infinitesimal), residue pooling, EPR accounting, GHZ recombination, and
//!   the EPR-first baseline;
//! - [`special`]: triple states, the golden-mean attractor, and rotated-basis
//!   escape;
//! - [`ensemble`]: seeded, reproducible Monte Carlo over input ensembles.

pub mod ensemble;
pub mod error;
pub mod measures;
pub mod povm;
pub mod protocols;
pub mod special;
pub mod state;

pub use ensemble::{run_ensemble, Distribution, EnsembleConfig, EnsembleReport, ProtocolSelect};
pub use error::{Error, Result};
pub use measures::{binary_entropy, distances, entanglement_entropy, DistanceTriple};
pub use povm::{alpha_big_step, alpha_for_target, povm_step, MeasurementBasis, PovmOutcome};
pub use protocols::{
    baseline_epr_first, combine_eprs, full_pipeline, run_big_step, run_infinitesimal,
    secondary_yield, BasisSearch, EprCounts, EprMode, PipelineConfig, ProtocolKind, ResiduePool,
    RunConfig, Terminal, TrajectoryRecord, YieldReport,
};
pub use special::{
    attractor_iterate, escape_step, golden_mean_state, is_triple_state, multiset_distance,
    random_triple_state, TripleStateReport,
};
pub use state::{BipartiteState, Pair, SchmidtView, Subsystem, TripartiteState};
