//! Hyperchaos-driven image cipher and the known-plaintext cryptanalysis that
//! breaks it.
//!
//! * [`chaos`] integrates the four-dimensional flow and quantizes it into a
//!   byte keystream.
//! * [`cipher`] is the two-pass XOR / mod-256 cipher.
//! * [`attacks`] recovers the equivalent key from one or two known pairs, and
//!   runs the chosen-plaintext baseline.
//! * [`analysis`] measures the equivalent-key and diffusion defects.
//! * [`imageio`] reads and writes binary PGM and raw byte files.

pub mod analysis;
pub mod attacks;
pub mod chaos;
pub mod cipher;
pub mod cli;
pub mod error;
pub mod imageio;

pub use attacks::{AttackReport, CandidateKeystream};
pub use chaos::{HyperState, Keystream, SecretKey};
pub use error::{Error, Result};
pub use imageio::GrayImage;
