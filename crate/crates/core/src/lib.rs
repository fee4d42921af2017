//! Private federated submodel learning over replicated databases.
//!
//! A global model of `r` submodels (rows of an `r x s` matrix over a prime
//! field) is hosted, masked, by `N` non-communicating databases. Per
//! iteration one local machine privately downloads a single submodel,
//! trains it, and uploads masked updates, such that no single database
//! learns which submodel was touched. The crate also ships the whole-model
//! baseline, symbol-exact overhead accounting for both schemes, and audits
//! that check the privacy claim by exhaustive enumeration at small scale.

pub mod audit;
pub mod cli;
pub mod field;
pub mod mdscode;
pub mod naive;
pub mod pir;
pub mod protocol;
pub mod transport;
