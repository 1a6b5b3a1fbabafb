//! Traveling-wave analysis for non-local delayed reaction-diffusion
//! equations `u_t = u_xx - u + ∫K(x-y) g(u(t-h,y)) dy`.
//!
//! * [`kernels`]: convolution kernels and their exponential moments
//! * [`birth`]: birth functions, landmarks, structural hypotheses
//! * [`spectral`]: characteristic function and critical speeds
//! * [`waveform`]: profile operator and fixed-point solver
//! * [`criteria`]: wavefront certificates and speed classes

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod birth;
pub mod criteria;
pub mod kernels;
pub mod numeric;
pub mod problem;
pub mod report;
pub mod spectral;
pub mod waveform;

pub use birth::{BirthError, BirthFunction, Custom, Landmarks};
pub use kernels::{Kernel, KernelError, LinearTerm};
pub use problem::ProblemSpec;
pub use report::ExtReal;
