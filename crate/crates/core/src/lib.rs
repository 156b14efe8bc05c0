//! Time-of-occurrence probabilities for finite-dimensional quantum dynamics.
//!
//! Three ways of asking "when did it happen?" are implemented side by side:
//!
//! - a single projective measurement at a fixed time, with Lüders
//!   conditioning ([`luders`]);
//! - repeated projective measurement along the Heisenberg family `M_t`,
//!   including its frequent-measurement limit ([`luders`], [`zeno`]);
//! - the time-of-occurrence distribution obtained by integrating `P_t` over
//!   time and normalizing the resulting operator family ([`occurrence`]).
//!
//! [`models`] provides the scenarios used throughout: exponential decay, a
//! system ⊗ apparatus measurement model, and a driven two-level system.
//!
//! ```
//! use occtime::models::RabiModel;
//! use occtime::occurrence::{OccurrenceDistribution, Partition, TimeHorizon};
//! use occtime::quadrature::QuadratureSpec;
//! use occtime::linalg::SUPPORT_EPS;
//!
//! let rabi = RabiModel::new(1.0)?;
//! let horizon = TimeHorizon::window(0.0, rabi.period())?;
//! let partition = Partition::uniform(&horizon, 2)?;
//! let dist = OccurrenceDistribution::build(
//!     &rabi.event_family()?, horizon, partition, &QuadratureSpec::default(), SUPPORT_EPS,
//! )?;
//! let p = dist.probabilities(rabi.initial_state())?;
//! assert!((p[0] - 0.5).abs() < 1e-8);
//! # Ok::<(), occtime::Error>(())
//! ```

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod luders;
pub mod models;
pub mod occurrence;
pub mod quadrature;
pub mod zeno;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/conditioning.md")]
    mod conditioning {}
    #[doc = include_str!("../../../book/src/decay.md")]
    mod decay {}
    #[doc = include_str!("../../../book/src/occurrence.md")]
    mod occurrence {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/zeno.md")]
    mod zeno {}
}
