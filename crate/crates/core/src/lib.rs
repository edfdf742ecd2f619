//! Usage-control policy engine for data-space connectors.
//!
//! Policies are ODRL documents in a small Turtle subset ([`textio`]) parsed into the
//! information model ([`model`]). Requests are decided by the [`pdp`] with context from
//! the [`pip`], enforced and audited by [`enforcement`], and exercised end to end by the
//! connector [`simulator`]. The [`patterns`] catalog instantiates the 22 usage-control
//! patterns as policies.

pub mod model;
pub mod profile;
pub mod textio;
pub mod vocab;
pub mod pip;
pub mod pdp;
pub mod enforcement;
pub mod patterns;
pub mod simulator;
pub mod batch;
