//! Colossally abundant numbers, certified lower convex envelopes, highest
//! abundant numbers and Robin / Lagarias inequality audits.

pub mod error;
pub mod arithmetic;
pub mod criticals;
pub mod envelope;
pub mod ha;
pub mod realball;
pub mod verifiers;

pub use error::{Error, Result};
pub use realball::{PrecisionPolicy, RealBall, SignDecision};
