//! Acoustic-to-articulatory inversion toolkit.
//!
//! The crate is organized as the pipeline runs:
//!
//! - [`dsp`]: resampling, FIR filtering, decimation and MFCC extraction
//! - [`artic`]: articulatory channel layout, trajectory preprocessing and
//!   kinematic augmentation to 24 dimensions
//! - [`featio`]: feature/embedding files, manifests, normalization, alignment
//! - [`net`]: the speaker-conditioned BLSTM regressor and its training loop
//! - [`train`]: subject-specific, pooled, fine-tuned, leave-one-subject-out
//!   and adaptation protocols
//! - [`eval`]: Pearson-correlation scoring, aggregation and report output
//! - [`synth`]: synthetic corpora with a known inverse for verification
//! - [`conf`]: the sectioned key/value configuration syntax

pub mod artic;
pub mod conf;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod featio;
pub mod net;
pub mod synth;
pub mod train;

pub use error::{AaiError, Result};
