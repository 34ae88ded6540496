//! Metric-based (prototypical) classification heads, class re-weighted
//! cross-entropy and ordinal evaluation metrics for imbalanced proficiency
//! grading over pooled utterance embeddings.
//!
//! The crate is `no_std` and only needs `alloc`. All floating-point
//! transcendental functions go through [`libm`], so a given seed yields the
//! same trajectory on every target. File formats and the command-line tool
//! live in the `protograde-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

/// Declares a fieldless enum with a fixed lowercase text form used by
/// `Display`, `FromStr` and serde.
macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        #[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
        pub enum $name {
            $(#[cfg_attr(feature = "serde", serde(rename = $text))] $variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl core::fmt::Display for $name {
            fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl core::str::FromStr for $name {
            type Err = $crate::Error;
            fn from_str(s: &str) -> $crate::Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err($crate::Error::InvalidParameter(alloc::format!(
                        concat!("unknown ", stringify!($name), " '{}'"), other
                    ))),
                }
            }
        }
    };
}

mod error;
mod math;
mod rng;

pub mod dataset;
pub mod embed2d;
pub mod kmeans;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
