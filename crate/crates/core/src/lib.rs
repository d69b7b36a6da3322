// SPDX-License-Identifier: Apache-2.0

//! Simulator and mini-CAD toolkit for a dual-context FPGA built from
//! FeFET-style configurable primitives.

pub mod device;
pub mod kvfile;
pub mod primitives;
pub mod scheduler;
pub mod techlib;
pub mod context;
pub mod fabric;
pub mod fixtures;
