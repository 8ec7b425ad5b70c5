//! Object and signal simulation.

pub mod clb;
pub mod mc;
pub mod rayleigh;
pub mod task;

pub use clb::{generate_clb, ClbParams};
pub use mc::{insert_mc_cluster, synth_mc_cluster, ClusterLibrary, McSignalSpec, McSource, SyntheticMcParams};
pub use rayleigh::{make_rayleigh_signal, Hypothesis, LineAmplitude, RayleighSignalSpec};
pub use task::{generate_ensemble, ImageSeeds, LabeledSet, PreparedTask, TaskKind, TaskSpec};
