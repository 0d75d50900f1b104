//! Pushdown control-flow analysis for higher-order programs in A-normal
//! form.
//!
//! The pipeline: parse an ANF program ([`syntax`]), view its semantics as a
//! CESK machine ([`concrete`]), abstract the machine onto finite addresses
//! while keeping the stack exact ([`abstracted`]), recast the abstracted
//! machine as a rooted pushdown system ([`pushdown`]), saturate its Dyck
//! state graph ([`dsg`]) or the store-widened control-flow graph
//! ([`widened`]), and answer flow, call, escape and dependence queries
//! ([`clients`]). Call and return edges match exactly — no spurious
//! interprocedural return paths.

pub mod abstracted;
pub mod clients;
pub mod concrete;
pub mod corpus;
pub mod dsg;
pub mod pushdown;
pub mod syntax;
pub mod widened;
