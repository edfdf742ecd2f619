//! Library half of the `dsp-policy` tool: the HTTP service router.

pub mod serve;
