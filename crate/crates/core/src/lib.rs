//! Finite-field multiple access: element-pair codes, multiuser encoding,
//! channel coding, modulation over the Gaussian multiple-access channel,
//! multiuser detection and Monte Carlo evaluation.

pub mod butterfly;
pub mod channel_code;
pub mod encoder;
pub mod epcode;
pub mod error;
pub mod gf;
pub mod harness;
pub mod modem;
pub mod receiver;

pub use channel_code::{Codeword, ParityCheck, Posteriors, SystematicCode};
pub use encoder::{BitMatrix, EncoderMode, FfspBlock, FfspSequence, FrameLayout, UserBlock};
pub use epcode::{AccessRegime, ElementPair, EpCode, Family, LoadingFactor, UspmVerdict};
pub use error::{Error, Result};
pub use gf::{FfMatrix, FfVector, FieldModulus};
pub use harness::{ExperimentConfig, Simulator, SweepResult, SweepRow};
pub use modem::{Pav, PavMode, RealSignal};
pub use receiver::{Alphabet, CfspStats, Correlation};
