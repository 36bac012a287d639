//! Supervised projective learning with orthogonal completeness.
//!
//! A complete orthonormal basis is rotated, one plane at a time, so that each
//! mode either discriminates between two labeled classes of data streams or
//! shows them to be indistinguishable. Modes that do neither stay
//! undetermined. The crate is organised as:
//!
//! * [`packets`]: labeled data streams, trajectory files and manifests.
//! * [`synthgen`]: synthetic two-dimensional molecule trajectories.
//! * [`scoring`]: selection, consensus and cluster quality of a mode, the
//!   bias-controlled efficacy and the D/U/I decision.
//! * [`pursuit`]: the basis optimizer.
//! * [`analysis`]: subspace similarity, projected fluctuation profiles and
//!   replicate statistics.

pub mod analysis;
pub mod error;
pub mod packets;
pub mod pursuit;
pub mod rng;
pub mod scoring;
pub mod synthgen;

pub use error::{Result, SplocError};
pub use packets::{DataPacket, Label, PacketManifest, StateVector};
pub use pursuit::{run_sploc, Basis, OptimizerConfig, SplocResult};
pub use scoring::{BiasMode, ModeClass, ModeScore, Spectrum, Thresholds};
