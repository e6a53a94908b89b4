//! Multimode homodyne tomography: simulation of Gaussian states measured with
//! multimode local oscillators, and unbiased estimators for quasidistributions,
//! density-matrix elements and normally ordered moments.

pub mod dataset;
pub mod error;
pub mod gaussian_sim;
pub mod kernels;
pub mod geometry;
pub mod io;
pub mod quadrature;
pub mod reconstruct;
pub mod special_fns;

pub use dataset::{MeasurementRecord, PhaseSampling, QuadratureDataset};
pub use error::{Error, Result};
