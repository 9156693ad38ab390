//! Last-layer Bayesian inference: one ensemble sampler per output unit on
//! features from the frozen MLE network.

pub mod archive;
pub mod design;
pub mod fit;

pub use archive::{read_head_archive, write_head_archive, HeadManifest, UnitEntry};
pub use design::{build_design, DesignBundle, PairRef, DEFAULT_DESIGN_SIZE};
pub use fit::{fit_head, HeadFit, HeadProvenance, PosteriorHead, UnitFit};
