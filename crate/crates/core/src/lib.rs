//! Power-quality disturbance classification with a simulated variational quantum circuit.
//!
//! The pipeline is: synthesize labelled waveforms ([`signal`]), take the
//! S-transform ([`stransform`]), reduce it to nine statistics ([`features`]),
//! angle-encode those on data qubits and train a layered `Ry`/`CRy` circuit
//! whose ancilla Z expectations act as class logits ([`qsim`], [`qnn`],
//! [`training`]). [`experiment`] wires the stages to files for the `pqdvqc` binary.

pub mod error;
pub mod experiment;
pub mod features;
pub mod io;
pub mod qnn;
pub mod qsim;
pub mod signal;
pub mod stats;
pub mod stransform;
pub mod training;

pub use error::{Error, Result};
pub use features::{extract_features, ExtractionSettings, FeatureSet, FeatureVector};
pub use qnn::{Checkpoint, ModelConfig, QnnModel};
pub use qsim::{Circuit, GateKind, GateOp, StateVector};
pub use signal::{synthesize, DisturbanceClass, SignalSpec, Waveform};
pub use stransform::{stransform, SpectralMatrix};
pub use training::{train, GradientMethod, LossKind, TrainConfig, TrainReport};
