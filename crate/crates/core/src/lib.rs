//! Weyl-Heisenberg integral quantization with arbitrary weight functions.
//!
//! The crate builds truncated Fock-basis operators for classical
//! phase-space symbols under a chosen weight function w(z) = Pi(q,p)
//! (constant, exponential isotropic, sinc, separable Gaussian, Heaviside
//! classes, or custom), through four mutually checking pipelines:
//!
//! * phase-space quadrature of the displaced operator family
//!   ([`quantize::quantize_grid`]),
//! * closed monomial recurrences driven by the weight's Taylor
//!   coefficients, in both the complex and the canonical variable sets
//!   ([`quantize::quantize_poly_z`], [`quantize::quantize_poly_qp`]),
//! * separable position-profile formulas for Gaussian weights and the
//!   Weyl calculus ([`quantize::quantize_separable_gauss`],
//!   [`quantize::quantize_ww_separable`]),
//! * position-representation integral kernels projected on oscillator
//!   states ([`kernel::position_kernel`]).
//!
//! Around the quantizer sit the coefficient families c, d, a and their
//! reciprocals ([`coeffs`]), the induced star product on symbols
//! ([`star`]), the symplectic Fourier transform and quadrature grids
//! ([`sft`]), and semiclassical portraits generalizing the familiar
//! phase-space functions ([`portraits`]).
//!
//! Conventions: hbar = 1, z = (q + ip)/sqrt(2), measure d^2z = dq dp / 2;
//! all integrals over the plane are taken against d^2z / pi.

pub mod coeffs;
pub mod error;
pub mod fock;
pub mod io;
pub mod kernel;
pub mod portraits;
pub mod quantize;
pub mod sft;
pub mod special;
pub mod star;
pub mod weights;

pub use error::{Error, Result};
pub use fock::{FockOperator, FockVector, PhasePoint};
pub use sft::{PhaseField, PhaseGrid};
pub use weights::WeightSpec;
