pub mod coeffs;
pub mod envelopes;
pub mod error;
pub mod frame;
pub mod operator;
pub mod signal;
pub mod solver;
pub mod stft;
pub mod synth;
pub mod prony;
pub mod estimation;
pub mod io;
pub mod mip;
pub mod experiment;
