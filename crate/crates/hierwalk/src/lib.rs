// SPDX-License-Identifier: Apache-2.0
//! Hierarchical random graphs with quantum-walk traversal, spectral
//! diagnostics and classical oracle baselines.

pub mod bigmath;
pub mod graph;
pub mod oracle;
pub mod rng;
pub mod line;
pub mod linalg;
pub mod lieb;
pub mod spectral;
pub mod qwalk;
pub mod classical;
pub mod sparsify;
pub mod experiments;
