//! Continuous-variable simulation with states written as linear combinations
//! of complex Gaussian functions in phase space.
//!
//! Quadratures are ordered mode-wise, (q₁, p₁, …, q_N, p_N), and ħ is carried
//! by every state (default 2).

pub mod analysis;
pub mod channels;
pub mod error;
pub mod gates;
pub mod io;
pub mod linalg;
pub mod measurement;
pub mod mixture;
pub mod program;
pub mod scenarios;
pub mod states;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, RMat, RVec, C64};
pub use mixture::{Diagnostics, Mixture, Peak, State, DEFAULT_HBAR};
