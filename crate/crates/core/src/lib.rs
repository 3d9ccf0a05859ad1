//! Kernels for turning egocentric human demonstrations into robot supervision:
//! video stabilization, hand-to-robot retargeting, stability metrics, and the
//! flow-matching / diffusion-noising math used downstream.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod filter;
pub mod genmath;
pub mod geometry;
pub mod metrics;
pub mod retarget;
pub mod stabilizer;
pub mod vision;
