#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod error;
pub mod integrators;
pub mod mechanics;
pub mod models;
pub mod systems;
pub mod training;
pub mod trajopt;
pub mod tvlqr;

pub use error::{Error, Result};
