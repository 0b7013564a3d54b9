//! Popularity prediction for online videos.

pub mod error;
pub mod events;
pub mod features;
pub mod synth;
pub mod timeline;

pub use error::{Error, Result};
pub use timeline::{PredictionTask, Target, TargetKind, TimeGrid, VideoId, VideoTimeline};

pub mod lim;
pub mod sparse;
pub mod learn;
pub mod eval;
pub mod harness;

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::Digest;
    sha2::Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
