//! Weather-artifact removal for driver-assistance imagery.
//!
//! The crate covers the whole desk-scale pipeline: procedural fog, rain and
//! snow ([`weathergen`]), a from-scratch reverse-mode autodiff engine
//! ([`autodiff`]), the UNet denoiser built on it ([`wunet`]), dataset
//! materialization ([`datasets`]) and detection metrics ([`detect`]).

pub mod autodiff;
pub mod datasets;
pub mod detect;
pub mod error;
pub mod imaging;
pub mod rng;
pub mod weathergen;
pub mod wunet;

pub use error::{Error, Result};
pub use imaging::{ColorSpace, CropGrid, Image};
