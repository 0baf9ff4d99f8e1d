//! Uplink simulator for cell-free massive MIMO networks.
//!
//! A large number of single-antenna access points (APs), spread over a
//! wrap-around square, jointly serve a smaller number of single-antenna
//! users on the uplink. The crate models the full pipeline:
//!
//! * [`network`] — AP/user layout, three-slope path loss, correlated
//!   log-normal shadowing;
//! * [`channel`] — pilot assignment, small-scale fading, per-AP MMSE channel
//!   estimation under pilot contamination, and the physical-to-normalized
//!   noise conversion;
//! * [`receivers`] — matched-filter, MMSE, partial-MMSE, and large-scale
//!   fading decoding (LSFD) receivers with closed-form and instantaneous
//!   SINR evaluation;
//! * [`det_equiv`] — a deterministic (large-system) approximation of the
//!   partial-MMSE SINR computed from large-scale statistics only;
//! * [`power`] — max-min uplink power control for the LSFD receiver;
//! * [`harness`] — Monte Carlo experiment driver producing per-user rate
//!   samples, empirical CDFs, and outage/mean summaries, with bit-exact
//!   reproducibility regardless of thread count.
//!
//! The crate is deliberately dependency-light and deterministic: every random
//! stage derives its own counter-keyed stream from the experiment's master
//! seed (see [`rng`]).

pub mod channel;
pub mod det_equiv;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod power;
pub mod receivers;
pub mod rng;

pub use error::{Error, Result};
