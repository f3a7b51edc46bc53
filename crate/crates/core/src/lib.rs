//! Boundary-driven Kawasaki lattice gas with a reflected Kac interaction.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar to `f64`, with `*32` variants for single precision.

pub mod error;
pub mod field;
pub mod kernel;
pub mod ldp;
pub mod linalg;
pub mod microdyn;
pub mod pde;
pub mod scalar;

pub use error::{Error, Result};
pub use field::Grid;
pub use kernel::{Configuration, KernelProfile};
pub use scalar::Real;

pub type BaseKernel = kernel::BaseKernel<f64>;
pub type KernelTable = kernel::KernelTable<f64>;
pub type DensityField = field::DensityField<f64>;
pub type DensityPath = field::DensityPath<f64>;
pub type SpaceTimeField = field::SpaceTimeField<f64>;
pub type ConvolutionOperator = pde::ConvolutionOperator<f64>;

pub type BaseKernel32 = kernel::BaseKernel<f32>;
pub type KernelTable32 = kernel::KernelTable<f32>;
pub type DensityField32 = field::DensityField<f32>;
pub type DensityPath32 = field::DensityPath<f32>;
pub type ConvolutionOperator32 = pde::ConvolutionOperator<f32>;
