//! Long-term face tracking in video.
//!
//! Given a face selected in one frame, the engine finds every later frame
//! showing the same person. A cheap patch tracker follows the face between
//! frames; whenever tracking breaks down, the candidate is verified against
//! an averaged face embedding, and when verification fails the detector
//! sweeps the frame (skipping ahead in fixed steps) until the person is
//! found again.
//!
//! Module map:
//! - [`domain`]: boxes, frames, embeddings, configuration
//! - [`videoio`]: image-sequence videos
//! - [`detect`], [`verify`], [`track`]: the three components, each behind a
//!   backend interface where a learned model would plug in
//! - [`engine`]: the state machine producing the timeline and event trace
//! - [`bench`]: synthetic scenarios, ground truth, precision and recall
//! - [`cli`]: the `facetrack` command

pub mod adapter;
pub mod bench;
pub mod cli;
pub mod detect;
pub mod domain;
pub mod engine;
pub mod raster;
pub mod seeding;
pub mod track;
pub mod verify;
pub mod videoio;
