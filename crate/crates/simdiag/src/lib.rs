//! Multiprecision Newton-type methods for (simultaneous) matrix diagonalization.
//!
//! The solvers refine an approximate eigendecomposition `F M E = Sigma`,
//! `F E = I` (or its two-matrix variant) by inversion-free Newton steps with
//! closed-form linearized solves, so each iteration costs a constant number of
//! matrix multiplications.  Every solver carries a convergence certificate: a
//! scalar built from the residual, the spectral gap and the spectral radius
//! whose smallness guarantees quadratic convergence from the current point.
//!
//! Modules:
//! - [`matrix`], [`spectrum`]: configurable-precision complex matrices (MPFR
//!   backed), the three norms used by the solvers, seeded Gaussian sampling
//!   and JSON serialization.
//! - [`inverse`]: the Newton iteration for `F E - I = 0`.
//! - [`diag`]: single-matrix eigendecomposition refinement and its
//!   certificate (threshold 0.136).
//! - [`simdiag2`]: simultaneous refinement for two matrices (threshold 0.094).
//! - [`family`]: reduction strategies for families of p simultaneously
//!   diagonalizable matrices, including the certified linear combination with
//!   roots-of-unity target spectrum.
//! - [`qr`]: basic QR iteration, the certificate stopping test, and the
//!   QR-then-Newton hybrid eigensolver.
//! - [`poly`]: companion and symmetric arrowhead constructions for
//!   high-precision polynomial root refinement.
//! - [`harness`]: seeded reproductions of the benchmark experiments, used by
//!   the `simdiag` CLI.

pub mod diag;
pub mod error;
pub mod family;
pub mod harness;
pub mod inverse;
pub mod matrix;
pub mod poly;
pub mod qr;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod simdiag2;
pub mod spectrum;

pub use error::{Error, Result};
pub use matrix::{Field, Matrix};
pub use report::{CertificateReport, IterationTrace, SolveStatus, TraceRow};
pub use spectrum::Spectrum;
